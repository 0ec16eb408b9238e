//! Link distances and far-field array responses.
//!
//! The UAV carries a ULA along the x axis. The RIS is a URA lying in the x-z
//! plane with its normal along +y. Element offsets are measured in
//! wavelengths, so the line-of-sight phase of an element at offset `p` toward
//! the unit direction `e` is `2 pi <p, e>`.

use num_complex::Complex64;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn unit(from: [f64; 3], to: [f64; 3]) -> [f64; 3] {
    let d = dist3(from, to);
    [(to[0] - from[0]) / d, (to[1] - from[1]) / d, (to[2] - from[2]) / d]
}

/// Distances seen from one UAV position.
#[derive(Clone, Debug, PartialEq)]
pub struct Distances {
    pub uav_ris: f64,
    pub uav_user: Vec<f64>,
    pub ris_user: Vec<f64>,
}

/// Distances from the UAV at `(q, z_F)` to the RIS and the users, and from
/// the RIS to the users.
pub fn distances(q: [f64; 2], cfg: &ScenarioConfig) -> Result<Distances> {
    let uav = cfg.uav_position(q);
    let uav_ris = dist3(uav, cfg.ris_pos);
    if !(uav_ris > 0.0) {
        return Err(Error::Geometry(format!(
            "UAV at ({}, {}) coincides with the RIS",
            q[0], q[1]
        )));
    }
    let mut uav_user = Vec::with_capacity(cfg.num_users());
    let mut ris_user = Vec::with_capacity(cfg.num_users());
    for (k, &u) in cfg.user_pos.iter().enumerate() {
        let dug = dist3(uav, u);
        let drg = dist3(cfg.ris_pos, u);
        if !(dug > 0.0) || !(drg > 0.0) {
            return Err(Error::Geometry(format!("user {} coincides with the UAV or the RIS", k + 1)));
        }
        uav_user.push(dug);
        ris_user.push(drg);
    }
    Ok(Distances {
        uav_ris,
        uav_user,
        ris_user,
    })
}

/// Offsets (wavelengths) of the RIS elements, index `m = iz * M_x + ix`.
pub fn ris_offsets(cfg: &ScenarioConfig) -> Vec<[f64; 3]> {
    let (mx, mz) = cfg.ris_dims;
    let d = cfg.element_spacing;
    let mut out = Vec::with_capacity(mx * mz);
    for iz in 0..mz {
        for ix in 0..mx {
            out.push([ix as f64 * d, 0.0, iz as f64 * d]);
        }
    }
    out
}

/// Offsets (wavelengths) of the UAV antennas.
pub fn uav_offsets(cfg: &ScenarioConfig) -> Vec<[f64; 3]> {
    (0..cfg.n_t)
        .map(|t| [t as f64 * cfg.element_spacing, 0.0, 0.0])
        .collect()
}

/// Far-field response of an array with the given offsets toward `dir`.
pub fn steering(offsets: &[[f64; 3]], dir: [f64; 3]) -> Vec<Complex64> {
    offsets
        .iter()
        .map(|p| {
            let phase = 2.0 * std::f64::consts::PI * (p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2]);
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Deterministic (LoS) components of all links at one UAV position.
#[derive(Clone, Debug)]
pub struct LosComponents {
    /// UAV-RIS component, `M x N_t` row-major.
    pub zbar: Vec<Complex64>,
    /// RIS-user components, length `M` each.
    pub zbar_r: Vec<Vec<Complex64>>,
    /// UAV-user components, length `N_t` each.
    pub zbar_d: Vec<Vec<Complex64>>,
}

pub fn los_components(q: [f64; 2], cfg: &ScenarioConfig) -> Result<LosComponents> {
    distances(q, cfg)?;
    let uav = cfg.uav_position(q);
    let ris_off = ris_offsets(cfg);
    let uav_off = uav_offsets(cfg);

    let a_ris = steering(&ris_off, unit(cfg.ris_pos, uav));
    let a_uav = steering(&uav_off, unit(uav, cfg.ris_pos));
    let n_t = cfg.n_t;
    let mut zbar = Vec::with_capacity(a_ris.len() * n_t);
    for r in &a_ris {
        for u in &a_uav {
            zbar.push(r * u);
        }
    }
    let zbar_r = cfg
        .user_pos
        .iter()
        .map(|&u| steering(&ris_off, unit(cfg.ris_pos, u)))
        .collect();
    let zbar_d = cfg
        .user_pos
        .iter()
        .map(|&u| steering(&uav_off, unit(uav, u)))
        .collect();
    Ok(LosComponents { zbar, zbar_r, zbar_d })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ris_user_distance_from_reference_layout() {
        let cfg = ScenarioConfig::paper();
        let d = distances(cfg.q0, &cfg).unwrap();
        assert!((d.ris_user[0] - 16100f64.sqrt()).abs() < 1e-12);
        assert!((d.ris_user[0] - 126.886).abs() < 1e-3);
        assert!((d.uav_ris - 252000f64.sqrt()).abs() < 1e-9);
        assert!((d.uav_ris - 501.996).abs() < 1e-3);
    }

    #[test]
    fn coincident_uav_and_ris_rejected() {
        let mut cfg = ScenarioConfig::paper();
        cfg.z_f = 40.0;
        assert!(matches!(distances([0.0, 0.0], &cfg), Err(Error::Geometry(_))));
    }

    #[test]
    fn distances_translation_invariant() {
        let cfg = ScenarioConfig::paper();
        let mut shifted = cfg.clone();
        let t = [13.5, -7.25, 3.0];
        for u in shifted.user_pos.iter_mut() {
            *u = [u[0] + t[0], u[1] + t[1], u[2] + t[2]];
        }
        shifted.ris_pos = [cfg.ris_pos[0] + t[0], cfg.ris_pos[1] + t[1], cfg.ris_pos[2] + t[2]];
        shifted.z_f += t[2];
        let q = [30.0, 44.0];
        let a = distances(q, &cfg).unwrap();
        let b = distances([q[0] + t[0], q[1] + t[1]], &shifted).unwrap();
        assert!((a.uav_ris - b.uav_ris).abs() < 1e-9);
        for k in 0..4 {
            assert!((a.uav_user[k] - b.uav_user[k]).abs() < 1e-9);
            assert!((a.ris_user[k] - b.ris_user[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn single_element_arrays_are_unit_scalars() {
        let mut cfg = ScenarioConfig::desk();
        cfg.ris_dims = (1, 1);
        cfg.n_t = 1;
        let los = los_components([10.0, 30.0], &cfg).unwrap();
        assert_eq!(los.zbar.len(), 1);
        assert!((los.zbar[0].norm() - 1.0).abs() < 1e-15);
        assert!((los.zbar_r[0][0].norm() - 1.0).abs() < 1e-15);
        assert!((los.zbar_d[1][0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn los_entries_unit_modulus() {
        let cfg = ScenarioConfig::paper();
        for q in [[-500.0, 20.0], [0.0, 5.0], [37.0, 91.0]] {
            let los = los_components(q, &cfg).unwrap();
            assert_eq!(los.zbar.len(), 400 * 5);
            assert!(los.zbar.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert!(los.zbar_r.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert!(los.zbar_d.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn broadside_response_has_equal_phases() {
        let mut cfg = ScenarioConfig::desk();
        cfg.ris_dims = (2, 1);
        // User straight in front of the panel, same x and z as the RIS.
        cfg.user_pos = vec![[0.0, 50.0, 40.0]];
        let los = los_components([20.0, 20.0], &cfg).unwrap();
        let r = &los.zbar_r[0];
        assert!((r[0] - r[1]).norm() < 1e-12);
        assert!((r[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zbar_is_outer_product() {
        let cfg = ScenarioConfig::desk();
        let q = [-40.0, 35.0];
        let los = los_components(q, &cfg).unwrap();
        let uav = cfg.uav_position(q);
        let a_r = steering(&ris_offsets(&cfg), unit(cfg.ris_pos, uav));
        let a_u = steering(&uav_offsets(&cfg), unit(uav, cfg.ris_pos));
        for m in 0..cfg.num_elements() {
            for t in 0..cfg.n_t {
                assert!((los.zbar[m * cfg.n_t + t] - a_r[m] * a_u[t]).norm() < 1e-12);
            }
        }
    }
}
