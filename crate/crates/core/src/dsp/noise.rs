use rand::Rng;
use rand_distr::StandardNormal;

use super::{mean_square, AudioClip};
use crate::error::{Error, Result};

/// Adds white Gaussian noise so that `10 log10(P_signal / P_noise)` equals
/// `snr_db` exactly for the drawn realisation (the noise is rescaled to the
/// target power). `snr_db = +inf` returns the clip unchanged.
pub fn add_noise_at_snr<R: Rng + ?Sized>(clip: &AudioClip, snr_db: f64, rng: &mut R) -> Result<AudioClip> {
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let p_signal = clip.power();
    if p_signal <= 0.0 {
        return Err(Error::invalid("SNR undefined for a zero-power signal"));
    }
    let noise: Vec<f64> = (0..clip.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let p_noise_raw = mean_square(&noise);
    let target = p_signal / 10f64.powf(snr_db / 10.0);
    let scale = (target / p_noise_raw).sqrt();
    let samples = clip.samples.iter().zip(&noise).map(|(s, n)| s + scale * n).collect();
    AudioClip::new(samples, clip.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_power_tone() -> AudioClip {
        // amplitude sqrt(2) sine has unit mean power over whole periods
        AudioClip::new(
            (0..10_000)
                .map(|n| 2f64.sqrt() * (2.0 * PI * 100.0 * n as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn added_power(a: &AudioClip, b: &AudioClip) -> f64 {
        let d: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect();
        mean_square(&d)
    }

    #[test]
    fn zero_db_matches_signal_power() {
        let clip = unit_power_tone();
        let noisy = add_noise_at_snr(&clip, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p = added_power(&noisy, &clip);
        assert!((p / clip.power() - 1.0).abs() < 0.05);
    }

    #[test]
    fn ten_db_on_unit_power() {
        let clip = unit_power_tone();
        assert!((clip.power() - 1.0).abs() < 1e-9);
        let noisy = add_noise_at_snr(&clip, 10.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let p = added_power(&noisy, &clip);
        assert!((p - 0.1).abs() < 0.005, "{p}");
    }

    #[test]
    fn infinite_snr_is_noop() {
        let clip = unit_power_tone();
        let out = add_noise_at_snr(&clip, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(out, clip);
    }

    #[test]
    fn zero_power_rejected() {
        let clip = AudioClip::new(vec![0.0; 100], 16_000).unwrap();
        assert!(add_noise_at_snr(&clip, 10.0, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }

    #[test]
    fn equal_seeds_bit_identical() {
        let clip = unit_power_tone();
        let a = add_noise_at_snr(&clip, 5.0, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = add_noise_at_snr(&clip, 5.0, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert!(a
            .samples
            .iter()
            .zip(&b.samples)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
