//! Network geometry and the large-scale / small-scale channel model.
//!
//! Every draw is keyed by an explicit seed. Geometry and fading use separate
//! ChaCha streams of the same seed so that they can be regenerated
//! independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{block_range, CVector};
use crate::{Error, Result, C64};

const GEOMETRY_STREAM: u64 = 1;
const FADING_STREAM: u64 = 2;

/// Standard deviation of the log-normal shadowing, in dB.
pub const SHADOWING_STD_DB: f64 = 8.0;

/// Static description of a cooperative cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_bs: usize,
    pub antennas_per_bs: usize,
    pub num_users: usize,
    /// Per-BS budgets `P_b` in watts.
    pub power_budgets: Vec<f64>,
    /// Receiver noise power `σ²` in watts, shared by all users.
    pub noise_variance: f64,
    pub cell_radius: f64,
    pub coop_radius: f64,
    pub snr_db: f64,
    /// Gain that turns the transmit SNR into a budget:
    /// `P_b = σ² · 10^(snr/10) / reference_gain`.
    pub reference_gain: f64,
    pub rate_fraction: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub const DEFAULT_CELL_RADIUS: f64 = 300.0;
    pub const DEFAULT_COOP_RADIUS: f64 = 100.0;
    pub const DEFAULT_RATE_FRACTION: f64 = 0.3;

    /// Builds a config with the default geometry and budgets derived from
    /// `snr_db`. Noise power and reference gain both default to the
    /// cell-edge pathloss, which makes `P_b = 10^(snr/10)` and keeps the
    /// normalized channels near unit scale.
    pub fn new(num_bs: usize, antennas_per_bs: usize, num_users: usize, snr_db: f64) -> Result<Self> {
        let edge = pathloss(Self::DEFAULT_CELL_RADIUS, 0.0)?;
        let mut cfg = NetworkConfig {
            num_bs,
            antennas_per_bs,
            num_users,
            power_budgets: Vec::new(),
            noise_variance: edge,
            cell_radius: Self::DEFAULT_CELL_RADIUS,
            coop_radius: Self::DEFAULT_COOP_RADIUS,
            snr_db,
            reference_gain: edge,
            rate_fraction: Self::DEFAULT_RATE_FRACTION,
            seed: 0,
        };
        cfg.derive_budgets();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Changes the SNR and re-derives every budget from it.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self.derive_budgets();
        self
    }

    /// Recomputes `power_budgets` from `snr_db`, `noise_variance` and
    /// `reference_gain`.
    pub fn derive_budgets(&mut self) {
        let p = self.noise_variance * 10f64.powf(self.snr_db / 10.0) / self.reference_gain;
        self.power_budgets = vec![p; self.num_bs];
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_bs == 0 || self.antennas_per_bs == 0 || self.num_users == 0 {
            return bad("num_bs, antennas_per_bs and num_users must be at least 1");
        }
        if self.power_budgets.len() != self.num_bs {
            return Err(Error::InvalidConfig(format!(
                "expected {} power budgets, got {}",
                self.num_bs,
                self.power_budgets.len()
            )));
        }
        if self.power_budgets.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("power budgets must be positive and finite");
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance must be positive");
        }
        if !(self.reference_gain > 0.0 && self.reference_gain.is_finite()) {
            return bad("reference_gain must be positive");
        }
        if !(self.cell_radius > 0.0) || !(self.coop_radius >= 0.0) {
            return bad("radii must be nonnegative and cell_radius positive");
        }
        if self.coop_radius > self.cell_radius {
            return bad("coop_radius must not exceed cell_radius");
        }
        if !(self.rate_fraction > 0.0 && self.rate_fraction <= 1.0) {
            return bad("rate_fraction must lie in (0, 1]");
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite");
        }
        Ok(())
    }

    /// `B·N_t`, the length of a cascaded channel and the scheduling limit.
    pub fn total_antennas(&self) -> usize {
        self.num_bs * self.antennas_per_bs
    }

    pub fn total_budget(&self) -> f64 {
        self.power_budgets.iter().sum()
    }
}

/// BS and user coordinates relative to the cooperative-region center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// `distances[k][b]` in meters.
    pub distances: Vec<Vec<f64>>,
}

/// Large-scale gain `10^((−38·log10 d − 34.5 + shadowing)/10)`.
pub fn pathloss(d: f64, shadowing_db: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("pathloss distance must be positive, got {d}")));
    }
    Ok(10f64.powf((-38.0 * d.log10() - 34.5 + shadowing_db) / 10.0))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Places the BSs at equal angular spacing on a circle of radius
/// `cell_radius` around the origin and drops users uniformly in the disk of
/// radius `coop_radius`.
pub fn generate_geometry(config: &NetworkConfig, seed: u64) -> UserPlacement {
    let bs_positions: Vec<[f64; 2]> = (0..config.num_bs)
        .map(|b| {
            let a = 2.0 * PI * b as f64 / config.num_bs as f64 + PI / 2.0;
            [config.cell_radius * a.cos(), config.cell_radius * a.sin()]
        })
        .collect();
    let mut rng = stream_rng(seed, GEOMETRY_STREAM);
    let user_positions: Vec<[f64; 2]> = (0..config.num_users)
        .map(|_| {
            let r = config.coop_radius * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let distances = user_positions
        .iter()
        .map(|u| bs_positions.iter().map(|s| (u[0] - s[0]).hypot(u[1] - s[1])).collect())
        .collect();
    UserPlacement { bs_positions, user_positions, distances }
}

/// Per-user channels. Indexing is `[k][b]` for per-BS quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub num_bs: usize,
    pub antennas_per_bs: usize,
    pub user_positions: Vec<[f64; 2]>,
    pub pathloss: Vec<Vec<f64>>,
    pub shadowing_db: Vec<Vec<f64>>,
    pub fast_fading: Vec<Vec<CVector>>,
    pub raw: Vec<Vec<CVector>>,
    pub cascaded: Vec<CVector>,
    pub noise_std: Vec<f64>,
    pub normalized: Vec<CVector>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.normalized.len()
    }

    pub fn total_antennas(&self) -> usize {
        self.num_bs * self.antennas_per_bs
    }

    /// Builds a set directly from normalized channels (unit noise, unit
    /// pathloss). Handy for synthetic instances.
    pub fn from_normalized(num_bs: usize, antennas_per_bs: usize, normalized: Vec<CVector>) -> Result<Self> {
        let m = num_bs * antennas_per_bs;
        if let Some(h) = normalized.iter().find(|h| h.len() != m) {
            return Err(Error::Malformed(format!("channel length {} != {m}", h.len())));
        }
        let k = normalized.len();
        let raw: Vec<Vec<CVector>> = normalized
            .iter()
            .map(|h| {
                (0..num_bs)
                    .map(|b| CVector::from_column_slice(&h.as_slice()[block_range(b, antennas_per_bs)]))
                    .collect()
            })
            .collect();
        Ok(ChannelSet {
            num_bs,
            antennas_per_bs,
            user_positions: vec![[0.0, 0.0]; k],
            pathloss: vec![vec![1.0; num_bs]; k],
            shadowing_db: vec![vec![0.0; num_bs]; k],
            fast_fading: raw.clone(),
            raw,
            cascaded: normalized.clone(),
            noise_std: vec![1.0; k],
            normalized,
        })
    }

    /// Keeps only the listed users, in the given order.
    pub fn subset(&self, users: &[usize]) -> ChannelSet {
        fn pick<T: Clone>(v: &[T], users: &[usize]) -> Vec<T> {
            users.iter().map(|&k| v[k].clone()).collect()
        }
        ChannelSet {
            num_bs: self.num_bs,
            antennas_per_bs: self.antennas_per_bs,
            user_positions: pick(&self.user_positions, users),
            pathloss: pick(&self.pathloss, users),
            shadowing_db: pick(&self.shadowing_db, users),
            fast_fading: pick(&self.fast_fading, users),
            raw: pick(&self.raw, users),
            cascaded: pick(&self.cascaded, users),
            noise_std: pick(&self.noise_std, users),
            normalized: pick(&self.normalized, users),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChannelSetJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dto: ChannelSetJson = serde_json::from_str(s)?;
        dto.try_into()
    }
}

fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws shadowing and Rayleigh fading for a placement.
pub fn generate_channels(placement: &UserPlacement, config: &NetworkConfig, seed: u64) -> Result<ChannelSet> {
    let (nb, nt) = (config.num_bs, config.antennas_per_bs);
    if placement.bs_positions.len() != nb || placement.distances.len() != placement.user_positions.len() {
        return Err(Error::Malformed("placement does not match config".into()));
    }
    let mut rng = stream_rng(seed, FADING_STREAM);
    let shadow = Normal::new(0.0, SHADOWING_STD_DB).expect("positive std");
    let sigma = config.noise_variance.sqrt();
    let k = placement.user_positions.len();

    let mut out = ChannelSet {
        num_bs: nb,
        antennas_per_bs: nt,
        user_positions: placement.user_positions.clone(),
        pathloss: Vec::with_capacity(k),
        shadowing_db: Vec::with_capacity(k),
        fast_fading: Vec::with_capacity(k),
        raw: Vec::with_capacity(k),
        cascaded: Vec::with_capacity(k),
        noise_std: vec![sigma; k],
        normalized: Vec::with_capacity(k),
    };
    for dist in &placement.distances {
        let mut pl = Vec::with_capacity(nb);
        let mut sh = Vec::with_capacity(nb);
        let mut ff = Vec::with_capacity(nb);
        let mut raw = Vec::with_capacity(nb);
        for &d in dist {
            let s: f64 = shadow.sample(&mut rng);
            let g = pathloss(d, s)?;
            let f = CVector::from_fn(nt, |_, _| complex_normal(&mut rng));
            raw.push(f.scale(g.sqrt()));
            pl.push(g);
            sh.push(s);
            ff.push(f);
        }
        let cascaded = CVector::from_iterator(nb * nt, raw.iter().flat_map(|h| h.iter().copied()));
        out.normalized.push(cascaded.unscale(sigma));
        out.cascaded.push(cascaded);
        out.pathloss.push(pl);
        out.shadowing_db.push(sh);
        out.fast_fading.push(ff);
        out.raw.push(raw);
    }
    Ok(out)
}

/// Geometry plus channels for `config.seed`.
pub fn draw(config: &NetworkConfig) -> Result<ChannelSet> {
    let placement = generate_geometry(config, config.seed);
    generate_channels(&placement, config, config.seed)
}

/// On-disk layout of a [`ChannelSet`]. Complex entries are `[re, im]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSetJson {
    num_bs: usize,
    antennas_per_bs: usize,
    user_positions: Vec<[f64; 2]>,
    noise_std: Vec<f64>,
    pathloss: Vec<Vec<f64>>,
    shadowing_db: Vec<Vec<f64>>,
    /// `[k][b][i]`
    fast_fading: Vec<Vec<Vec<C64>>>,
    /// `[k][b][i]`
    raw: Vec<Vec<Vec<C64>>>,
}

impl From<&ChannelSet> for ChannelSetJson {
    fn from(c: &ChannelSet) -> Self {
        let vv = |v: &Vec<Vec<CVector>>| {
            v.iter()
                .map(|bs| bs.iter().map(|h| h.iter().copied().collect()).collect())
                .collect()
        };
        ChannelSetJson {
            num_bs: c.num_bs,
            antennas_per_bs: c.antennas_per_bs,
            user_positions: c.user_positions.clone(),
            noise_std: c.noise_std.clone(),
            pathloss: c.pathloss.clone(),
            shadowing_db: c.shadowing_db.clone(),
            fast_fading: vv(&c.fast_fading),
            raw: vv(&c.raw),
        }
    }
}

impl TryFrom<ChannelSetJson> for ChannelSet {
    type Error = Error;

    fn try_from(j: ChannelSetJson) -> Result<Self> {
        let (nb, nt) = (j.num_bs, j.antennas_per_bs);
        let k = j.raw.len();
        let shape_ok = |v: &Vec<Vec<Vec<C64>>>| {
            v.len() == k && v.iter().all(|bs| bs.len() == nb && bs.iter().all(|h| h.len() == nt))
        };
        if !shape_ok(&j.raw)
            || !shape_ok(&j.fast_fading)
            || j.noise_std.len() != k
            || j.user_positions.len() != k
            || j.pathloss.len() != k
            || j.shadowing_db.len() != k
        {
            return Err(Error::Malformed("channel set arrays have inconsistent shapes".into()));
        }
        if j.noise_std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Malformed("noise_std must be positive".into()));
        }
        let to_c = |v: Vec<Vec<Vec<C64>>>| -> Vec<Vec<CVector>> {
            v.into_iter()
                .map(|bs| bs.into_iter().map(CVector::from_vec).collect())
                .collect()
        };
        let raw = to_c(j.raw);
        let cascaded: Vec<CVector> = raw
            .iter()
            .map(|bs| CVector::from_iterator(nb * nt, bs.iter().flat_map(|h| h.iter().copied())))
            .collect();
        let normalized = cascaded.iter().zip(&j.noise_std).map(|(h, &s)| h.unscale(s)).collect();
        Ok(ChannelSet {
            num_bs: nb,
            antennas_per_bs: nt,
            user_positions: j.user_positions,
            pathloss: j.pathloss,
            shadowing_db: j.shadowing_db,
            fast_fading: to_c(j.fast_fading),
            raw,
            cascaded,
            noise_std: j.noise_std,
            normalized,
        })
    }
}
