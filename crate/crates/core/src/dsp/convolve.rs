use num_complex::Complex64;

use super::fft::{fft_plan, real_pair_spectra};
use crate::error::{Error, Result};

/// Output extent of [`convolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// `|a| + |b| - 1` samples.
    Full,
    /// The first `|a|` samples of the full result (causal filtering of `a`
    /// by `b`).
    SameAsFirst,
}

// Below this many multiply-adds the direct sum is cheaper than the FFT.
const DIRECT_LIMIT: usize = 1 << 15;

/// Linear convolution of two real sequences.
pub fn convolve(a: &[f64], b: &[f64], mode: ConvMode) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("convolve: empty input"));
    }
    let mut out = if a.len().min(b.len()) <= 16 || a.len() * b.len() <= DIRECT_LIMIT {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    };
    if mode == ConvMode::SameAsFirst {
        out.truncate(a.len());
    }
    Ok(out)
}

/// Direct `O(n m)` full convolution.
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        for (o, &bv) in out[i..i + b.len()].iter_mut().zip(b) {
            *o += av * bv;
        }
    }
    out
}

fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut pa = a.to_vec();
    pa.resize(n, 0.0);
    let mut pb = b.to_vec();
    pb.resize(n, 0.0);
    let (sa, sb) = real_pair_spectra(&pa, &pb);
    let mut prod: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
    fft_plan(n).inverse(&mut prod);
    prod.truncate(len);
    prod.into_iter().map(|c| c.re).collect()
}
