//! Complex FFT (iterative radix-2, Bluestein for other lengths) and the
//! real-signal helpers built on it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use super::AudioClip;
use crate::error::{Error, Result};

/// One-sided spectrum of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub bin_spacing_hz: f64,
    pub transform_length: usize,
}

impl Spectrum {
    pub fn frequency_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_spacing_hz
    }
}

/// A precomputed transform of fixed length.
#[derive(Debug)]
pub struct FftPlan {
    n: usize,
    kind: PlanKind,
}

#[derive(Debug)]
enum PlanKind {
    Radix2 {
        twiddles: Vec<Complex64>,
    },
    Bluestein {
        inner: Box<FftPlan>,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        if n.is_power_of_two() {
            let twiddles = (0..n / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            return Self {
                n,
                kind: PlanKind::Radix2 { twiddles },
            };
        }

        let m = (2 * n - 1).next_power_of_two();
        let inner = Box::new(FftPlan::new(m));
        // w_k = exp(-i*pi*k^2/n); k^2 is reduced mod 2n to keep the angle small.
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % two_n;
                Complex64::from_polar(1.0, -PI * k2 as f64 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            n,
            kind: PlanKind::Bluestein {
                inner,
                chirp,
                kernel_spectrum: kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X_k = sum_t x_t exp(-2 pi i k t / n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        match &self.kind {
            PlanKind::Radix2 { twiddles } => radix2(buf, twiddles),
            PlanKind::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.len();
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for (k, w) in work.iter_mut().take(self.n).enumerate() {
                    *w = buf[k] * chirp[k];
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_spectrum) {
                    *w *= k;
                }
                inner.inverse(&mut work);
                for (k, out) in buf.iter_mut().enumerate() {
                    *out = work[k] * chirp[k];
                }
            }
        }
    }

    /// In-place inverse transform including the `1/n` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &[Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<FftPlan>>> = RefCell::new(HashMap::new());
}

/// Returns a cached plan for length `n` (cache is per thread).
pub fn fft_plan(n: usize) -> Rc<FftPlan> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(FftPlan::new(n)))
            .clone()
    })
}

/// Full-length complex spectrum of a real sequence.
pub(crate) fn full_spectrum(x: &[f64]) -> Vec<Complex64> {
    let plan = fft_plan(x.len());
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Spectra of two equal-length real sequences from a single complex
/// transform of `a + i b`. Both outputs have full length `n`.
pub fn real_pair_spectra(a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let plan = fft_plan(n);
    let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&re, &im)| Complex64::new(re, im)).collect();
    plan.forward(&mut z);
    let mut sa = Vec::with_capacity(n);
    let mut sb = Vec::with_capacity(n);
    for k in 0..n {
        let zk = z[k];
        let zc = z[(n - k) % n].conj();
        sa.push((zk + zc) * 0.5);
        // (zk - zc) / (2i)
        let d = (zk - zc) * 0.5;
        sb.push(Complex64::new(d.im, -d.re));
    }
    (sa, sb)
}

/// First `n/2 + 1` bins of the DFT of a real sequence.
pub fn rfft_bins(x: &[f64]) -> Vec<Complex64> {
    let mut full = full_spectrum(x);
    full.truncate(x.len() / 2 + 1);
    full
}

/// One-sided spectrum of a clip.
pub fn rfft(clip: &AudioClip) -> Result<Spectrum> {
    clip.require_non_empty("rfft")?;
    let n = clip.len();
    Ok(Spectrum {
        bins: rfft_bins(&clip.samples),
        bin_spacing_hz: clip.sample_rate_hz as f64 / n as f64,
        transform_length: n,
    })
}

/// Inverse of [`rfft`]: rebuilds the Hermitian spectrum and returns the real
/// time signal of length `transform_length`.
pub fn irfft(spectrum: &Spectrum) -> Result<Vec<f64>> {
    let n = spectrum.transform_length;
    if n == 0 || spectrum.bins.len() != n / 2 + 1 {
        return Err(Error::invalid(format!(
            "spectrum has {} bins, expected {} for length {n}",
            spectrum.bins.len(),
            n / 2 + 1
        )));
    }
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    for (k, b) in spectrum.bins.iter().enumerate() {
        full[k] = *b;
        if k > 0 && k < n - k {
            full[n - k] = b.conj();
        }
    }
    fft_plan(n).inverse(&mut full);
    Ok(full.into_iter().map(|c| c.re).collect())
}
