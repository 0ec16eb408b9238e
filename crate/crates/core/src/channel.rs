//! Rician fading channel sampler.
//!
//! Every small-scale fading vector is drawn from its own counter-derived
//! stream keyed by `(stream, slot, draw, link)`. A sample therefore depends
//! only on those indices and the UAV position, never on the order in which
//! samples are generated, and re-sampling at a new position with the same
//! indices reuses the same NLoS realization (common random numbers).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ScenarioConfig;
use crate::geometry::{distances, los_components, Distances, LosComponents};
use crate::error::Result;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Root of a family of independent random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChannelStream {
    key: u64,
}

impl ChannelStream {
    pub fn new(seed: u64) -> Self {
        ChannelStream { key: splitmix64(seed) }
    }

    pub fn child(self, index: u64) -> Self {
        ChannelStream {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0x51ED_270B))),
        }
    }

    pub fn named(self, label: &str) -> Self {
        self.child(fnv1a(label))
    }

    /// Generator for one `(slot, draw, link)` cell of this stream.
    pub fn rng(self, slot: usize, draw: u64, link: u64) -> ChaCha8Rng {
        let k = self.child(slot as u64).child(draw).child(link);
        ChaCha8Rng::seed_from_u64(k.key)
    }
}

const LINK_G: u64 = 0;
const LINK_RIS_USER: u64 = 1 << 32;
const LINK_UAV_USER: u64 = 2 << 32;

/// One joint realization of all links in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    pub slot: usize,
    pub m: usize,
    pub n_t: usize,
    /// UAV-RIS channel, `M x N_t` row-major.
    pub g: Vec<Complex64>,
    pub h_r: Vec<Vec<Complex64>>,
    pub h_d: Vec<Vec<Complex64>>,
}

impl ChannelSample {
    pub fn g_at(&self, m: usize, t: usize) -> Complex64 {
        self.g[m * self.n_t + t]
    }

    pub fn num_users(&self) -> usize {
        self.h_r.len()
    }
}

/// Samples drawn at one UAV position and slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelBatch {
    pub slot: usize,
    pub position: [f64; 2],
    pub samples: Vec<ChannelSample>,
}

impl ChannelBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn cn01(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(rho d^-e) (sqrt(b/(1+b)) los + sqrt(1/(1+b)) z)` element-wise.
fn rician_link(
    los: &[Complex64],
    path_gain: f64,
    beta: f64,
    nlos: bool,
    rng: impl FnOnce() -> ChaCha8Rng,
) -> Vec<Complex64> {
    let amp = path_gain.sqrt();
    let w_los = amp * (beta / (1.0 + beta)).sqrt();
    let w_nlos = amp * (1.0 / (1.0 + beta)).sqrt();
    if !nlos {
        return los.iter().map(|z| z * w_los).collect();
    }
    let mut rng = rng();
    los.iter().map(|z| z * w_los + cn01(&mut rng) * w_nlos).collect()
}

/// Geometry shared by every sample at one position.
pub(crate) struct SiteModel {
    pub dist: Distances,
    pub los: LosComponents,
}

impl SiteModel {
    pub fn new(q: [f64; 2], cfg: &ScenarioConfig) -> Result<Self> {
        Ok(SiteModel {
            dist: distances(q, cfg)?,
            los: los_components(q, cfg)?,
        })
    }

    pub fn sample(&self, cfg: &ScenarioConfig, slot: usize, stream: ChannelStream, draw: u64) -> ChannelSample {
        let rho = cfg.rho;
        let g = rician_link(
            &self.los.zbar,
            rho * self.dist.uav_ris.powf(-cfg.gamma),
            cfg.beta_ur,
            cfg.nlos,
            || stream.rng(slot, draw, LINK_G),
        );
        let h_r = (0..cfg.num_users())
            .map(|k| {
                rician_link(
                    &self.los.zbar_r[k],
                    rho * self.dist.ris_user[k].powf(-cfg.alpha),
                    cfg.beta_rg,
                    cfg.nlos,
                    || stream.rng(slot, draw, LINK_RIS_USER | k as u64),
                )
            })
            .collect();
        let h_d = (0..cfg.num_users())
            .map(|k| {
                rician_link(
                    &self.los.zbar_d[k],
                    rho * self.dist.uav_user[k].powf(-cfg.kappa),
                    cfg.beta_ug,
                    cfg.nlos,
                    || stream.rng(slot, draw, LINK_UAV_USER | k as u64),
                )
            })
            .collect();
        ChannelSample {
            slot,
            m: cfg.num_elements(),
            n_t: cfg.n_t,
            g,
            h_r,
            h_d,
        }
    }
}

impl SiteModel {
    /// The links of user `k` only; identical to the corresponding parts of
    /// [`SiteModel::sample`]. Other users' vectors are left empty.
    pub fn sample_user(
        &self,
        cfg: &ScenarioConfig,
        slot: usize,
        stream: ChannelStream,
        draw: u64,
        k: usize,
    ) -> ChannelSample {
        let rho = cfg.rho;
        let g = rician_link(
            &self.los.zbar,
            rho * self.dist.uav_ris.powf(-cfg.gamma),
            cfg.beta_ur,
            cfg.nlos,
            || stream.rng(slot, draw, LINK_G),
        );
        let mut h_r = vec![Vec::new(); cfg.num_users()];
        let mut h_d = vec![Vec::new(); cfg.num_users()];
        h_r[k] = rician_link(
            &self.los.zbar_r[k],
            rho * self.dist.ris_user[k].powf(-cfg.alpha),
            cfg.beta_rg,
            cfg.nlos,
            || stream.rng(slot, draw, LINK_RIS_USER | k as u64),
        );
        h_d[k] = rician_link(
            &self.los.zbar_d[k],
            rho * self.dist.uav_user[k].powf(-cfg.kappa),
            cfg.beta_ug,
            cfg.nlos,
            || stream.rng(slot, draw, LINK_UAV_USER | k as u64),
        );
        ChannelSample {
            slot,
            m: cfg.num_elements(),
            n_t: cfg.n_t,
            g,
            h_r,
            h_d,
        }
    }
}

/// Draws realization `draw` of slot `slot` with the UAV at `q`.
pub fn sample_channel(
    q: [f64; 2],
    cfg: &ScenarioConfig,
    slot: usize,
    stream: ChannelStream,
    draw: u64,
) -> Result<ChannelSample> {
    Ok(SiteModel::new(q, cfg)?.sample(cfg, slot, stream, draw))
}

/// Draws realizations `first .. first + size` of one slot.
pub fn sample_batch(
    q: [f64; 2],
    cfg: &ScenarioConfig,
    slot: usize,
    stream: ChannelStream,
    first: u64,
    size: usize,
) -> Result<ChannelBatch> {
    let site = SiteModel::new(q, cfg)?;
    let samples = (0..size as u64)
        .map(|i| site.sample(cfg, slot, stream, first + i))
        .collect();
    Ok(ChannelBatch {
        slot,
        position: q,
        samples,
    })
}
