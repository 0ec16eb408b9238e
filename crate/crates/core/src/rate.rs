//! Effective channels, achievable rate and MRT beamforming.
//!
//! Rates are accumulated in nats and converted to bits/s/Hz at the boundary.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelBatch, ChannelSample};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// RIS phase shifts in radians; the reflection coefficients are `e^{j phi}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector {
    pub phi: Vec<f64>,
}

impl PhaseVector {
    pub fn new(phi: Vec<f64>) -> Self {
        PhaseVector { phi }
    }

    pub fn zeros(m: usize) -> Self {
        PhaseVector { phi: vec![0.0; m] }
    }

    pub fn theta(&self) -> Vec<Complex64> {
        theta(&self.phi)
    }
}

pub fn theta(phi: &[f64]) -> Vec<Complex64> {
    phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

/// Transmit beamformer. `degenerate` marks the arbitrary full-power vector
/// returned when the effective channel is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamVector {
    pub w: Vec<Complex64>,
    pub degenerate: bool,
}

impl BeamVector {
    pub fn power(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.power() <= p_max + 1e-9
    }
}

/// `G^H Theta h_r,k + h_d,k`.
pub fn effective_channel(sample: &ChannelSample, theta: &[Complex64], k: usize) -> Result<Vec<Complex64>> {
    if theta.len() != sample.m {
        return Err(Error::Dimension(format!(
            "phase vector has {} entries, RIS has {}",
            theta.len(),
            sample.m
        )));
    }
    if k >= sample.num_users() {
        return Err(Error::Dimension(format!("user index {k} out of range")));
    }
    Ok(effective_channel_unchecked(sample, theta, k))
}

pub(crate) fn effective_channel_unchecked(sample: &ChannelSample, theta: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut h = sample.h_d[k].clone();
    let hr = &sample.h_r[k];
    for m in 0..sample.m {
        let s = theta[m] * hr[m];
        let row = &sample.g[m * sample.n_t..(m + 1) * sample.n_t];
        for (ht, g) in h.iter_mut().zip(row) {
            *ht += g.conj() * s;
        }
    }
    h
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `log2(1 + x)` for an SNR `x`.
pub fn bits(snr: f64) -> f64 {
    snr.ln_1p() / LN_2
}

/// Rate `log2(1 + |h_k^H w|^2 / sigma^2)` of user `k`.
pub fn rate(sample: &ChannelSample, theta: &[Complex64], w: &BeamVector, k: usize, cfg: &ScenarioConfig) -> Result<f64> {
    let h = effective_channel(sample, theta, k)?;
    if w.w.len() != h.len() {
        return Err(Error::Dimension(format!(
            "beamformer has {} entries, UAV has {} antennas",
            w.w.len(),
            h.len()
        )));
    }
    let gain: Complex64 = h.iter().zip(&w.w).map(|(a, b)| a.conj() * b).sum();
    Ok(bits(gain.norm_sqr() / cfg.sigma2))
}

/// Maximum-ratio transmission toward the effective channel `h`.
pub fn mrt_for_channel(h: &[Complex64], p_max: f64) -> BeamVector {
    let norm = norm_sqr(h).sqrt();
    if norm > 0.0 && norm.is_finite() {
        let s = p_max.sqrt() / norm;
        BeamVector {
            w: h.iter().map(|z| z * s).collect(),
            degenerate: false,
        }
    } else {
        let mut w = vec![Complex64::new(0.0, 0.0); h.len()];
        if let Some(first) = w.first_mut() {
            *first = Complex64::new(p_max.sqrt(), 0.0);
        }
        BeamVector { w, degenerate: true }
    }
}

pub fn mrt_beamformer(sample: &ChannelSample, theta: &[Complex64], k: usize, cfg: &ScenarioConfig) -> Result<BeamVector> {
    let h = effective_channel(sample, theta, k)?;
    Ok(mrt_for_channel(&h, cfg.p_max))
}

/// Rate achieved by MRT: `log2(1 + (P / sigma^2) ||h_k||^2)`.
pub fn mrt_rate(sample: &ChannelSample, theta: &[Complex64], k: usize, cfg: &ScenarioConfig) -> f64 {
    let h = effective_channel_unchecked(sample, theta, k);
    bits(cfg.snr_scale() * norm_sqr(&h))
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub mean_rate: f64,
    pub std_error: f64,
    /// Mean rate per slot, empty when the estimate covers a single slot.
    pub per_slot: Vec<f64>,
    pub n_samples: usize,
    /// One value per realization, kept for paired comparisons.
    #[serde(skip)]
    pub draws: Vec<f64>,
}

impl EvalResult {
    /// Mean and standard error of `draws`; the error of a single draw is 0.
    pub fn from_draws(draws: Vec<f64>, per_slot: Vec<f64>) -> Self {
        let (mean, se) = mean_and_se(&draws);
        EvalResult {
            mean_rate: mean,
            std_error: se,
            per_slot,
            n_samples: draws.len(),
            draws,
        }
    }
}

/// Fixed-order mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Beamforming rule used by [`mc_expected_rate`].
#[derive(Clone, Copy, Debug)]
pub enum Beam<'a> {
    Mrt,
    Fixed(&'a BeamVector),
}

pub fn mc_expected_rate(
    batch: &ChannelBatch,
    theta: &[Complex64],
    k: usize,
    beam: Beam<'_>,
    cfg: &ScenarioConfig,
) -> Result<EvalResult> {
    if batch.is_empty() {
        return Err(Error::Dimension("empty channel batch".into()));
    }
    let mut draws = Vec::with_capacity(batch.len());
    for s in &batch.samples {
        let r = match beam {
            Beam::Mrt => {
                let h = effective_channel(s, theta, k)?;
                bits(cfg.snr_scale() * norm_sqr(&h))
            }
            Beam::Fixed(w) => rate(s, theta, w, k, cfg)?,
        };
        draws.push(r);
    }
    Ok(EvalResult::from_draws(draws, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_batch, ChannelStream};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_sample(g: Complex64, hr: Complex64, hd: Complex64) -> ChannelSample {
        ChannelSample {
            slot: 0,
            m: 1,
            n_t: 1,
            g: vec![g],
            h_r: vec![vec![hr]],
            h_d: vec![vec![hd]],
        }
    }

    fn random_sample(rng: &mut ChaCha8Rng, m: usize, n_t: usize, k: usize) -> ChannelSample {
        let mut z = || c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        ChannelSample {
            slot: 0,
            m,
            n_t,
            g: (0..m * n_t).map(|_| z()).collect(),
            h_r: (0..k).map(|_| (0..m).map(|_| z()).collect()).collect(),
            h_d: (0..k).map(|_| (0..n_t).map(|_| z()).collect()).collect(),
        }
    }

    #[test]
    fn zero_cascade_leaves_direct_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = random_sample(&mut rng, 4, 3, 2);
        s.g.iter_mut().for_each(|z| *z = c(0.0, 0.0));
        let th = theta(&[0.3, 1.0, -2.0, 0.1]);
        assert_eq!(effective_channel(&s, &th, 1).unwrap(), s.h_d[1]);
    }

    #[test]
    fn scalar_effective_channel() {
        let s = scalar_sample(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let h = effective_channel(&s, &theta(&[std::f64::consts::FRAC_PI_2]), 0).unwrap();
        // G^H Theta h_r = e^{j pi/2}.
        assert!((h[0] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_phase_gives_plain_cascade() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = random_sample(&mut rng, 3, 2, 1);
        s.h_d[0] = vec![c(0.0, 0.0); 2];
        let h = effective_channel(&s, &theta(&[0.0; 3]), 0).unwrap();
        for t in 0..2 {
            let want: Complex64 = (0..3).map(|m| s.g_at(m, t).conj() * s.h_r[0][m]).sum();
            assert!((h[t] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let s = scalar_sample(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        assert!(matches!(effective_channel(&s, &theta(&[0.0, 0.0]), 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn rate_reference_values() {
        let mut cfg = ScenarioConfig::desk();
        cfg.sigma2 = 1.0;
        let s = scalar_sample(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let th = theta(&[0.0]);
        let w = |x: f64| BeamVector { w: vec![c(x, 0.0)], degenerate: false };
        assert_eq!(rate(&s, &th, &w(0.0), 0, &cfg).unwrap(), 0.0);
        assert!((rate(&s, &th, &w(3f64.sqrt()), 0, &cfg).unwrap() - 2.0).abs() < 1e-14);
        assert!((rate(&s, &th, &w(1.0), 0, &cfg).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mrt_scales_aligned_channel() {
        let w = mrt_for_channel(&[c(1.0, 0.0), c(0.0, 0.0)], 4.0);
        assert!(!w.degenerate);
        assert!((w.w[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(w.w[1], c(0.0, 0.0));
    }

    #[test]
    fn mrt_zero_channel_is_flagged() {
        let w = mrt_for_channel(&[c(0.0, 0.0); 3], 2.0);
        assert!(w.degenerate);
        assert!((w.power() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mrt_beats_random_beamformers() {
        let mut cfg = ScenarioConfig::desk();
        cfg.sigma2 = 0.1;
        cfg.p_max = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_sample(&mut rng, 5, 4, 1);
        let th = theta(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let w = mrt_beamformer(&s, &th, 0, &cfg).unwrap();
        assert!((w.power() - cfg.p_max).abs() < 1e-12);
        let best = rate(&s, &th, &w, 0, &cfg).unwrap();
        assert!((best - mrt_rate(&s, &th, 0, &cfg)).abs() < 1e-12);
        for _ in 0..100 {
            let raw: Vec<Complex64> = (0..4).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let scale = (cfg.p_max * rng.random::<f64>() / norm_sqr(&raw)).sqrt();
            let probe = BeamVector { w: raw.iter().map(|z| z * scale).collect(), degenerate: false };
            assert!(probe.is_feasible(cfg.p_max));
            assert!(best >= rate(&s, &th, &probe, 0, &cfg).unwrap() - 1e-12);
        }
    }

    #[test]
    fn mc_singleton_and_deterministic_limits() {
        let mut cfg = ScenarioConfig::desk();
        let stream = ChannelStream::new(4);
        let th = theta(&vec![0.0; cfg.num_elements()]);
        let b = sample_batch([0.0, 40.0], &cfg, 0, stream, 0, 1).unwrap();
        let r = mc_expected_rate(&b, &th, 0, Beam::Mrt, &cfg).unwrap();
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.mean_rate, mrt_rate(&b.samples[0], &th, 0, &cfg));

        cfg.beta_ur = 1e12;
        cfg.beta_rg = 1e12;
        cfg.beta_ug = 1e12;
        let b = sample_batch([0.0, 40.0], &cfg, 0, stream, 0, 50).unwrap();
        let r = mc_expected_rate(&b, &th, 1, Beam::Mrt, &cfg).unwrap();
        assert!(r.std_error < 1e-6);
    }

    #[test]
    fn rate_monotone_in_power_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sample(&mut rng, 3, 2, 1);
        let th = theta(&[0.5, 1.5, 2.5]);
        let mut cfg = ScenarioConfig::desk();
        cfg.sigma2 = 0.5;
        let mut last = -1.0;
        for p in [0.0, 0.1, 0.5, 1.0, 3.0] {
            cfg.p_max = p;
            let r = mrt_rate(&s, &th, 0, &cfg);
            assert!(r >= last);
            last = r;
        }
        cfg.p_max = 1.0;
        let mut last = f64::INFINITY;
        for n in [0.01, 0.1, 1.0, 10.0] {
            cfg.sigma2 = n;
            let r = mrt_rate(&s, &th, 0, &cfg);
            assert!(r <= last);
            last = r;
        }
    }

    proptest! {
        #[test]
        fn rate_is_2pi_periodic(seed in 0u64..1000, shifts in proptest::collection::vec(-3i32..3, 4)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sample(&mut rng, 4, 2, 1);
            let mut cfg = ScenarioConfig::desk();
            cfg.sigma2 = 0.2;
            let phi: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 6.0).collect();
            let shifted: Vec<f64> = phi.iter().zip(&shifts).map(|(p, k)| p + 2.0 * std::f64::consts::PI * *k as f64).collect();
            let a = mrt_rate(&s, &theta(&phi), 0, &cfg);
            let b = mrt_rate(&s, &theta(&shifted), 0, &cfg);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        }

        #[test]
        fn mrt_dominates_any_feasible_beam(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sample(&mut rng, 3, 3, 1);
            let mut cfg = ScenarioConfig::desk();
            cfg.sigma2 = 0.3;
            cfg.p_max = 1.5;
            let th = theta(&[rng.random(), rng.random(), rng.random()]);
            let raw: Vec<Complex64> = (0..3).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let scale = (cfg.p_max / norm_sqr(&raw)).sqrt();
            let probe = BeamVector { w: raw.iter().map(|z| z * scale).collect(), degenerate: false };
            prop_assert!(mrt_rate(&s, &th, 0, &cfg) >= rate(&s, &th, &probe, 0, &cfg).unwrap() - 1e-12);
        }
    }
}
