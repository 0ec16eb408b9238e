use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::ChannelSample;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rate::{effective_channel_unchecked, norm_sqr};

/// Distance-free channel coefficients of one sample:
/// `||h_k||^2 = A / u^kappa + B / v^gamma + C / (u^(kappa/2) v^(gamma/2))`
/// with `u = d_UG`, `v = d_UR`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `D`, `E`, `F` of the first-order expansion at `(u_j, v_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorTerms {
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

/// Coefficients of user `k` for a sample drawn with the UAV at distances
/// `(d_ug, d_ur)`; the distance scaling cancels the sampled path loss.
pub fn abc_coefficients(
    sample: &ChannelSample,
    theta: &[Complex64],
    k: usize,
    d_ug: f64,
    d_ur: f64,
    cfg: &ScenarioConfig,
) -> Result<RateCoefficients> {
    if !(d_ug > 0.0 && d_ur > 0.0) {
        return Err(Error::Geometry(format!(
            "nonpositive expansion distances d_UG = {d_ug}, d_UR = {d_ur}"
        )));
    }
    let direct = &sample.h_d[k];
    // G^H Theta h_r alone is the effective channel with the direct link removed.
    let total = effective_channel_unchecked(sample, theta, k);
    let cascade: Vec<Complex64> = total.iter().zip(direct).map(|(t, d)| t - d).collect();
    let cross: Complex64 = cascade.iter().zip(direct).map(|(c, d)| c.conj() * d).sum();
    Ok(RateCoefficients {
        a: norm_sqr(direct) * d_ug.powf(cfg.kappa),
        b: norm_sqr(&cascade) * d_ur.powf(cfg.gamma),
        c: 2.0 * cross.re * d_ug.powf(cfg.kappa / 2.0) * d_ur.powf(cfg.gamma / 2.0),
    })
}

impl RateCoefficients {
    /// Channel power gain `||h_k||^2` at slack distances `(u, v)`.
    pub fn gain(&self, u: f64, v: f64, cfg: &ScenarioConfig) -> f64 {
        self.a * u.powf(-cfg.kappa)
            + self.b * v.powf(-cfg.gamma)
            + self.c * u.powf(-cfg.kappa / 2.0) * v.powf(-cfg.gamma / 2.0)
    }

    pub fn taylor(&self, u_j: f64, v_j: f64, cfg: &ScenarioConfig) -> TaylorTerms {
        let s = cfg.snr_scale();
        let (ka, ga) = (cfg.kappa, cfg.gamma);
        let d = 1.0 + s * self.gain(u_j, v_j, cfg);
        let e = -s
            * (ka * self.a * u_j.powf(-ka - 1.0)
                + 0.5 * ka * self.c * v_j.powf(-ga / 2.0) * u_j.powf(-ka / 2.0 - 1.0));
        let f = -s
            * (ga * self.b * v_j.powf(-ga - 1.0)
                + 0.5 * ga * self.c * u_j.powf(-ka / 2.0) * v_j.powf(-ga / 2.0 - 1.0));
        TaylorTerms { d, e, f }
    }
}

/// Rate in bits/s/Hz as a function of the slack distances.
pub fn true_rate_uv(coef: &RateCoefficients, u: f64, v: f64, cfg: &ScenarioConfig) -> f64 {
    (cfg.snr_scale() * coef.gain(u, v, cfg)).ln_1p() / LN_2
}

/// First-order expansion of [`true_rate_uv`] around `(u_j, v_j)`.
pub fn taylor_rate(
    coef: &RateCoefficients,
    u: f64,
    v: f64,
    u_j: f64,
    v_j: f64,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    if !(u_j > 0.0 && v_j > 0.0) {
        return Err(Error::Geometry(format!("expansion point ({u_j}, {v_j}) must be positive")));
    }
    let t = coef.taylor(u_j, v_j, cfg);
    if !(t.d > 0.0) {
        return Err(Error::Numeric(format!("nonpositive SNR term D = {}", t.d)));
    }
    Ok(t.d.log2() + (t.e * (u - u_j) + t.f * (v - v_j)) / (t.d * LN_2))
}
