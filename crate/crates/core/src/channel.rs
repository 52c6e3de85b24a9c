//! Scenarios, pathloss, channel covariances and channel sampling.
//!
//! `vec(G)` stacks the columns of the `M_B x M_R` BS–RIS channel, so the
//! covariance of `vec(G)` built from Kronecker factors is `ρ_G (R_GR ⊗ R_GB)`
//! with the RIS factor outside.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cxlinalg::{
    hadamard, hermitian_eigen, is_hermitian, kron, rng_for, standard_cn, CMat, GaussianSampler,
    C64,
};
use crate::error::{Error, Result};

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Large-scale power gain `10^((gains_db − 37.5 − 22 log10 d)/10)` of the
/// urban-micro model, `d` in meters.
pub fn pathloss_gain(d: f64, gains_db: f64) -> Result<f64> {
    if !(d >= 1.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pathloss distance must be at least 1 m, got {d}"
        )));
    }
    Ok(10f64.powf((gains_db - 37.5 - 22.0 * d.log10()) / 10.0))
}

/// Spatial correlation model shared by all correlation factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coefficient", rename_all = "lowercase")]
pub enum Correlation {
    Uncorrelated,
    /// `[R]_ij = c^|i−j|`, `0 ≤ c < 1`.
    Exponential(f64),
}

impl Correlation {
    pub fn matrix(&self, n: usize) -> Result<CMat> {
        match *self {
            Correlation::Uncorrelated => Ok(CMat::identity(n, n)),
            Correlation::Exponential(c) => {
                if !(0.0..1.0).contains(&c) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential correlation coefficient must lie in [0, 1), got {c}"
                    )));
                }
                Ok(CMat::from_fn(n, n, |i, j| {
                    C64::new(c.powi(i.abs_diff(j) as i32), 0.0)
                }))
            }
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub m_b: usize,
    /// RIS elements; the training length equals this.
    pub m_r: usize,
    pub k_users: usize,
    /// Training power budget in watts.
    pub p_max: f64,
    pub d_b: f64,
    pub d_u: Vec<f64>,
    /// BS noise power per antenna in watts.
    pub sigma_b_sq: f64,
    /// Per-user noise powers in watts.
    pub sigma_u_sq: Vec<f64>,
    pub gains_db: f64,
    pub correlation: Correlation,
    pub seed: u64,
}

/// Combined antenna gain of the default link budget.
pub const DEFAULT_GAINS_DB: f64 = 5.0;
/// Default seed, overridable from the CLI environment.
pub const DEFAULT_SEED: u64 = 20240517;

impl Scenario {
    /// Analysis setting: i.i.d. channels, `d = 80 m`, all noise at −90 dBm.
    pub fn analysis(m_b: usize, m_r: usize, k_users: usize, p_max: f64) -> Self {
        Self {
            m_b,
            m_r,
            k_users,
            p_max,
            d_b: 80.0,
            d_u: vec![80.0; k_users],
            sigma_b_sq: dbm_to_watts(-90.0),
            sigma_u_sq: vec![dbm_to_watts(-90.0); k_users],
            gains_db: DEFAULT_GAINS_DB,
            correlation: Correlation::Uncorrelated,
            seed: DEFAULT_SEED,
        }
    }

    /// Simulation setting: correlated channels, `d = 100 m`, BS noise at
    /// −90 dBm and user noise at −80 dBm.
    pub fn simulation(m_b: usize, m_r: usize, k_users: usize, p_max: f64) -> Self {
        Self {
            m_b,
            m_r,
            k_users,
            p_max,
            d_b: 100.0,
            d_u: vec![100.0; k_users],
            sigma_b_sq: dbm_to_watts(-90.0),
            sigma_u_sq: vec![dbm_to_watts(-80.0); k_users],
            gains_db: DEFAULT_GAINS_DB,
            correlation: Correlation::Exponential(0.5),
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.m_b == 0 || self.m_r == 0 || self.k_users == 0 {
            return bad("m_b, m_r and k_users must all be at least 1".into());
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad(format!("p_max must be positive, got {}", self.p_max));
        }
        if self.d_u.len() != self.k_users {
            return bad(format!(
                "d_u has {} entries for {} users",
                self.d_u.len(),
                self.k_users
            ));
        }
        if self.sigma_u_sq.len() != self.k_users {
            return bad(format!(
                "sigma_u_sq has {} entries for {} users",
                self.sigma_u_sq.len(),
                self.k_users
            ));
        }
        for &d in std::iter::once(&self.d_b).chain(&self.d_u) {
            if !(d >= 1.0 && d.is_finite()) {
                return bad(format!("distances must be at least 1 m, got {d}"));
            }
        }
        for &s in std::iter::once(&self.sigma_b_sq).chain(&self.sigma_u_sq) {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("noise powers must be positive, got {s}"));
            }
        }
        if !self.gains_db.is_finite() {
            return bad("gains_db must be finite".into());
        }
        self.correlation.matrix(1)?;
        Ok(())
    }
}

/// Second-order channel and noise statistics.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub m_b: usize,
    pub m_r: usize,
    /// Covariance of `vec(G)`, `M_B M_R` square.
    pub r_g: CMat,
    /// Covariance of each `h_k`, `M_R` square.
    pub r_h: Vec<CMat>,
    /// BS noise covariance `Σ_B`.
    pub sigma_b_mat: CMat,
    pub sigma_u_sq: Vec<f64>,
    pub rho_g: f64,
    pub rho_h: Vec<f64>,
}

impl ChannelStats {
    /// Validating constructor for arbitrary statistics. `rho_g`/`rho_h` are
    /// set to the average diagonal of the corresponding covariance.
    pub fn new(
        m_b: usize,
        m_r: usize,
        r_g: CMat,
        r_h: Vec<CMat>,
        sigma_b_mat: CMat,
        sigma_u_sq: Vec<f64>,
    ) -> Result<Self> {
        let n = m_b * m_r;
        if r_g.shape() != (n, n) {
            return Err(Error::Dimension(format!("r_g must be {n}x{n}")));
        }
        if r_h.is_empty() || r_h.len() != sigma_u_sq.len() {
            return Err(Error::Dimension(
                "need one r_h and one sigma_u_sq per user".into(),
            ));
        }
        if r_h.iter().any(|r| r.shape() != (m_r, m_r)) {
            return Err(Error::Dimension(format!("each r_h must be {m_r}x{m_r}")));
        }
        if sigma_b_mat.shape() != (m_b, m_b) {
            return Err(Error::Dimension(format!("sigma_b_mat must be {m_b}x{m_b}")));
        }
        for m in std::iter::once(&r_g).chain(&r_h) {
            require_psd(m)?;
        }
        let (vals, _) = hermitian_eigen(&sigma_b_mat)?;
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        if sigma_u_sq.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(
                "user noise powers must be positive".into(),
            ));
        }
        let rho_g = r_g.trace().re / n as f64;
        let rho_h = r_h.iter().map(|r| r.trace().re / m_r as f64).collect();
        Ok(Self {
            m_b,
            m_r,
            r_g,
            r_h,
            sigma_b_mat,
            sigma_u_sq,
            rho_g,
            rho_h,
        })
    }

    pub fn k_users(&self) -> usize {
        self.r_h.len()
    }

    /// Covariance of `vec(H_c,k) = vec(G Diag(h_k))`: `R_G ⊙ (R_h,k ⊗ 𝟙)`.
    pub fn cascaded_covariance(&self, k: usize) -> Result<CMat> {
        let r_h = self
            .r_h
            .get(k)
            .ok_or_else(|| Error::InvalidParameter(format!("user index {k} out of range")))?;
        let ones = CMat::from_element(self.m_b, self.m_b, C64::new(1.0, 0.0));
        Ok(hadamard(&self.r_g, &kron(r_h, &ones)))
    }

    /// `Tr R_Hc,k`.
    pub fn cascaded_power(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for m in 0..self.m_r {
            let rh = self.r_h[k][(m, m)].re;
            for b in 0..self.m_b {
                let i = m * self.m_b + b;
                s += self.r_g[(i, i)].re * rh;
            }
        }
        s
    }

    /// The same statistics in units of the average large-scale gains:
    /// `R_G`, `Σ_B` are divided by `g = ρ_G` and every `R_h,k`, `σ_U,k²` by the
    /// common `h = mean_k ρ_h,k`. Linear receivers are unchanged and every
    /// MSE trace scales by `1/(g h)`. Returns `(stats, g, h)`.
    pub fn normalized(&self) -> (ChannelStats, f64, f64) {
        let g = if self.rho_g > 0.0 { self.rho_g } else { 1.0 };
        let mean_h = self.rho_h.iter().sum::<f64>() / self.rho_h.len().max(1) as f64;
        let h = if mean_h > 0.0 { mean_h } else { 1.0 };
        let out = ChannelStats {
            m_b: self.m_b,
            m_r: self.m_r,
            r_g: &self.r_g / C64::new(g, 0.0),
            r_h: self.r_h.iter().map(|r| r / C64::new(h, 0.0)).collect(),
            sigma_b_mat: &self.sigma_b_mat / C64::new(g, 0.0),
            sigma_u_sq: self.sigma_u_sq.iter().map(|s| s / h).collect(),
            rho_g: self.rho_g / g,
            rho_h: self.rho_h.iter().map(|r| r / h).collect(),
        };
        (out, g, h)
    }
}

fn require_psd(m: &CMat) -> Result<()> {
    if !is_hermitian(m) {
        return Err(Error::NotHermitian {
            deviation: crate::cxlinalg::max_abs_diff(m, &m.adjoint()),
        });
    }
    let (vals, _) = hermitian_eigen(m)?;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&v) = vals.iter().find(|&&v| v < -1e-10 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotPsd { eigenvalue: v });
    }
    Ok(())
}

/// Statistics of a scenario: `R_G = ρ_G (R_GR ⊗ R_GB)`, `R_h,k = ρ_h,k R_hR`,
/// `Σ_B = σ_B² I`.
pub fn build_stats(s: &Scenario) -> Result<ChannelStats> {
    s.validate()?;
    let rho_g = pathloss_gain(s.d_b, s.gains_db)?;
    let rho_h = s
        .d_u
        .iter()
        .map(|&d| pathloss_gain(d, s.gains_db))
        .collect::<Result<Vec<_>>>()?;
    let r_gr = s.correlation.matrix(s.m_r)?;
    let r_gb = s.correlation.matrix(s.m_b)?;
    let r_hr = s.correlation.matrix(s.m_r)?;
    Ok(ChannelStats {
        m_b: s.m_b,
        m_r: s.m_r,
        r_g: kron(&r_gr, &r_gb) * C64::new(rho_g, 0.0),
        r_h: rho_h.iter().map(|&r| &r_hr * C64::new(r, 0.0)).collect(),
        sigma_b_mat: CMat::identity(s.m_b, s.m_b) * C64::new(s.sigma_b_sq, 0.0),
        sigma_u_sq: s.sigma_u_sq.clone(),
        rho_g,
        rho_h,
    })
}

/// Random well-conditioned statistics for tests and benchmarks. Covariances
/// are `ρ (A Aᴴ/n + 0.2 I)/1.2`-style matrices, noise levels are drawn
/// around `noise_scale`.
pub fn random_stats(
    m_b: usize,
    m_r: usize,
    k_users: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<ChannelStats> {
    let mut rng = rng_for(seed, 0x5747);
    let random_cov = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let a = standard_cn(rng, n, n);
        let s: f64 = rng.random_range(0.5..2.0);
        (&a * a.adjoint() / C64::new(n as f64, 0.0) + CMat::identity(n, n) * C64::new(0.2, 0.0))
            * C64::new(s / 1.2, 0.0)
    };
    let r_g = random_cov(m_b * m_r, &mut rng);
    let r_h = (0..k_users).map(|_| random_cov(m_r, &mut rng)).collect();
    let sb = random_cov(m_b, &mut rng) * C64::new(noise_scale, 0.0);
    let su = (0..k_users)
        .map(|_| noise_scale * rng.random_range(0.5..2.0))
        .collect();
    ChannelStats::new(m_b, m_r, crate::cxlinalg::hermitian_part(&r_g), r_h, crate::cxlinalg::hermitian_part(&sb), su)
}

/// One channel realization.
#[derive(Debug, Clone)]
pub struct Channels {
    /// `M_B x M_R`.
    pub g: CMat,
    /// `K` columns of length `M_R`.
    pub h: Vec<CMat>,
}

/// Draws channels (and noise) with cached covariance square roots.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    m_b: usize,
    m_r: usize,
    g: GaussianSampler,
    h: Vec<GaussianSampler>,
    n_b: GaussianSampler,
    sigma_u: Vec<f64>,
}

impl ChannelSampler {
    pub fn new(stats: &ChannelStats) -> Result<Self> {
        Ok(Self {
            m_b: stats.m_b,
            m_r: stats.m_r,
            g: GaussianSampler::new(&stats.r_g)?,
            h: stats
                .r_h
                .iter()
                .map(GaussianSampler::new)
                .collect::<Result<_>>()?,
            n_b: GaussianSampler::new(&stats.sigma_b_mat)?,
            sigma_u: stats.sigma_u_sq.iter().map(|s| s.sqrt()).collect(),
        })
    }

    pub fn channels<R: Rng + ?Sized>(&self, rng: &mut R) -> Channels {
        let vg = self.g.sample(rng);
        let g = CMat::from_column_slice(self.m_b, self.m_r, vg.as_slice());
        let h = self.h.iter().map(|s| s.sample(rng)).collect();
        Channels { g, h }
    }

    /// BS noise `M_B x T`, columns i.i.d. `CN(0, Σ_B)`.
    pub fn bs_noise<R: Rng + ?Sized>(&self, rng: &mut R, t: usize) -> CMat {
        let mut n = CMat::zeros(self.m_b, t);
        for j in 0..t {
            n.set_column(j, &self.n_b.sample(rng).column(0));
        }
        n
    }

    /// Noise at user `k`, length `t`, i.i.d. `CN(0, σ_U,k²)`.
    pub fn user_noise<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, t: usize) -> CMat {
        standard_cn(rng, t, 1) * C64::new(self.sigma_u[k], 0.0)
    }
}

/// Draws `(G, {h_k})` from the statistics.
pub fn sample_channels<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> Result<Channels> {
    Ok(ChannelSampler::new(stats)?.channels(rng))
}

/// `H_c = G Diag(h)`.
pub fn cascaded_channel(g: &CMat, h: &CMat) -> Result<CMat> {
    if h.ncols() != 1 || h.nrows() != g.ncols() {
        return Err(Error::Dimension(format!(
            "cascade of a {}x{} channel with a {}x{} vector",
            g.nrows(),
            g.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let mut out = g.clone();
    for j in 0..g.ncols() {
        let s = h[(j, 0)];
        for v in out.column_mut(j).iter_mut() {
            *v *= s;
        }
    }
    Ok(out)
}

/// Free-function form of [`ChannelStats::cascaded_covariance`].
pub fn cascaded_covariance(stats: &ChannelStats, k: usize) -> Result<CMat> {
    stats.cascaded_covariance(k)
}
