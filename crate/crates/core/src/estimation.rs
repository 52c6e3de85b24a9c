//! RIS-transmitted training: pilots, linear receivers, the analytic MSE of
//! the product estimate `Ĥ_c,k = Ĝ Diag(ĥ_k)`, closed forms and Monte Carlo.
//!
//! The RIS sends `Ψ = Φ Diag(p)` over `T` slots (column `t` is the slot-`t`
//! pilot). The BS observes `Y_B = G Ψ + N_B`, i.e. `vec(Y_B) = (Ψᵀ ⊗ I) g + n`,
//! and user `k` observes `y_k = Ψᵀ h_k + n_k`. Estimates are `ĝ = W_Gᴴ vec(Y_B)`
//! and `ĥ_k = W_h,kᴴ y_k`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSampler, ChannelStats};
use crate::cxlinalg::{
    block_diag_trace, condition_number, hermitian_part, inv_hpd, kron, rng_for, solve_hpd, CMat,
    C64,
};
use crate::error::{Error, Result};

/// Unit-modulus tolerance on pilot phases.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// Largest condition number of `Ψ` accepted by the LS receivers.
pub const LS_MAX_CONDITION: f64 = 1e8;

/// Phase matrix `Φ` (`M_R x T`, unit modulus) and slot amplitudes `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSequence {
    pub phi: CMat,
    pub p: Vec<f64>,
}

impl PilotSequence {
    pub fn new(phi: CMat, p: Vec<f64>) -> Result<Self> {
        if phi.ncols() != p.len() {
            return Err(Error::Dimension(format!(
                "phase matrix has {} slots but {} amplitudes were given",
                phi.ncols(),
                p.len()
            )));
        }
        crate::cxlinalg::check_finite(&phi)?;
        if let Some(z) = phi.iter().find(|z| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::InvalidParameter(format!(
                "pilot phase entry {z} is not unit modulus"
            )));
        }
        if let Some(x) = p.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "pilot amplitude {x} is negative or non-finite"
            )));
        }
        Ok(Self { phi, p })
    }

    /// Pilot from phases `Θ` (`Φ = e^{jΘ}`).
    pub fn from_phases(theta: &nalgebra::DMatrix<f64>, p: Vec<f64>) -> Result<Self> {
        Self::new(theta.map(|t| C64::from_polar(1.0, t)), p)
    }

    pub fn m_r(&self) -> usize {
        self.phi.nrows()
    }

    pub fn slots(&self) -> usize {
        self.phi.ncols()
    }

    pub fn theta(&self) -> nalgebra::DMatrix<f64> {
        self.phi.map(|z| z.arg())
    }

    /// `Ψ = Φ Diag(p)`.
    pub fn psi(&self) -> CMat {
        let mut psi = self.phi.clone();
        for (j, &pj) in self.p.iter().enumerate() {
            for v in psi.column_mut(j).iter_mut() {
                *v *= pj;
            }
        }
        psi
    }

    /// `‖Ψ‖_F² = M_R Σ p_t²`.
    pub fn energy(&self) -> f64 {
        self.m_r() as f64 * self.p.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.energy() <= p_max + 1e-9
            && self.p.iter().all(|&x| x >= 0.0)
            && self
                .phi
                .iter()
                .all(|z| (z.norm() - 1.0).abs() <= UNIT_MODULUS_TOL)
    }
}

/// DFT phases `e^{−j2π ij/M_R}` with uniform amplitudes `√P_max/M_R`.
pub fn dft_pilot(m_r: usize, p_max: f64) -> PilotSequence {
    PilotSequence {
        phi: dft_matrix(m_r),
        p: vec![p_max.sqrt() / m_r as f64; m_r],
    }
}

pub fn dft_matrix(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        // Reduce the exponent mod n first so large indices stay accurate.
        let e = (i * j) % n;
        C64::from_polar(1.0, -2.0 * std::f64::consts::PI * e as f64 / n as f64)
    })
}

/// `A_G(Ψ) = Ψᵀ ⊗ I_{M_B}`.
pub fn measurement_matrix(pilot: &PilotSequence, m_b: usize) -> CMat {
    kron(&pilot.psi().transpose(), &CMat::identity(m_b, m_b))
}

/// Linear receivers: `ĝ = W_Gᴴ y_B`, `ĥ_k = W_h,kᴴ y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSet {
    /// `(M_B T) x (M_B M_R)`.
    pub w_g: CMat,
    /// `K` matrices of size `T x M_R`.
    pub w_h: Vec<CMat>,
}

/// `I_T ⊗ Σ_B`, the covariance of `vec(N_B)`.
pub fn bs_noise_covariance(stats: &ChannelStats, slots: usize) -> CMat {
    kron(&CMat::identity(slots, slots), &stats.sigma_b_mat)
}

/// Covariance of `vec(Y_B)`: `A R_G Aᴴ + I ⊗ Σ_B`.
pub fn bs_observation_covariance(a: &CMat, stats: &ChannelStats, slots: usize) -> CMat {
    hermitian_part(&(a * &stats.r_g * a.adjoint() + bs_noise_covariance(stats, slots)))
}

/// Covariance of `y_k`: `Ψᵀ R_h,k Ψ* + σ_U,k² I`.
pub fn user_observation_covariance(psi_t: &CMat, stats: &ChannelStats, k: usize) -> CMat {
    let t = psi_t.nrows();
    hermitian_part(
        &(psi_t * &stats.r_h[k] * psi_t.adjoint()
            + CMat::identity(t, t) * C64::new(stats.sigma_u_sq[k], 0.0)),
    )
}

fn check_dims(pilot: &PilotSequence, stats: &ChannelStats) -> Result<()> {
    if pilot.m_r() != stats.m_r {
        return Err(Error::Dimension(format!(
            "pilot has {} RIS rows, statistics have M_R = {}",
            pilot.m_r(),
            stats.m_r
        )));
    }
    Ok(())
}

/// Per-link LMMSE receivers.
pub fn lmmse_receivers(pilot: &PilotSequence, stats: &ChannelStats) -> Result<ReceiverSet> {
    check_dims(pilot, stats)?;
    let t = pilot.slots();
    let a = measurement_matrix(pilot, stats.m_b);
    let s_g = bs_observation_covariance(&a, stats, t);
    let w_g = solve_hpd(&s_g, &(&a * &stats.r_g))?;
    let psi_t = pilot.psi().transpose();
    let w_h = (0..stats.k_users())
        .map(|k| {
            let s_h = user_observation_covariance(&psi_t, stats, k);
            solve_hpd(&s_h, &(&psi_t * &stats.r_h[k]))
        })
        .collect::<Result<_>>()?;
    Ok(ReceiverSet { w_g, w_h })
}

/// Least-squares receivers `W_G = A(AᴴA)⁻¹`, `W_h = Ψᵀ(Ψ*Ψᵀ)⁻¹`.
pub fn ls_receivers(pilot: &PilotSequence, m_b: usize, k_users: usize) -> Result<ReceiverSet> {
    let psi = pilot.psi();
    if pilot.slots() < pilot.m_r() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let condition = condition_number(&psi);
    if !(condition <= LS_MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let psi_t = psi.transpose();
    let gram = hermitian_part(&(psi.conjugate() * &psi_t));
    let w_h = psi_t * inv_hpd(&gram)?;
    let w_g = kron(&w_h, &CMat::identity(m_b, m_b));
    Ok(ReceiverSet {
        w_g,
        w_h: vec![w_h; k_users],
    })
}

/// `C_Ĝ` and `{C_ĥ,k}`, the covariances of the estimates.
pub fn estimate_covariances(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
) -> Result<(CMat, Vec<CMat>)> {
    check_dims(pilot, stats)?;
    let a = measurement_matrix(pilot, stats.m_b);
    let s_g = bs_observation_covariance(&a, stats, pilot.slots());
    let c_g = hermitian_part(&(rx.w_g.adjoint() * s_g * &rx.w_g));
    let psi_t = pilot.psi().transpose();
    let c_h = rx
        .w_h
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let s_h = user_observation_covariance(&psi_t, stats, k);
            hermitian_part(&(w.adjoint() * s_h * w))
        })
        .collect();
    Ok((c_g, c_h))
}

/// Second-order quantities shared by the MSE, its trace and its gradient.
#[derive(Debug, Clone)]
pub struct Moments {
    pub a: CMat,
    pub c_g: CMat,
    pub c_h: Vec<CMat>,
    /// `E{g ĝᴴ} = R_G Aᴴ W_G`.
    pub x_g: CMat,
    /// `E{h_k ĥ_kᴴ} = R_h,k Ψ* W_h,k`.
    pub y_h: Vec<CMat>,
}

pub fn moments(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<Moments> {
    check_dims(pilot, stats)?;
    if rx.w_h.len() != stats.k_users() {
        return Err(Error::Dimension(format!(
            "{} user receivers for {} users",
            rx.w_h.len(),
            stats.k_users()
        )));
    }
    let (c_g, c_h) = estimate_covariances(pilot, stats, rx)?;
    let a = measurement_matrix(pilot, stats.m_b);
    let x_g = &stats.r_g * a.adjoint() * &rx.w_g;
    let psi_c = pilot.psi().conjugate();
    let y_h = rx
        .w_h
        .iter()
        .zip(&stats.r_h)
        .map(|(w, r)| r * &psi_c * w)
        .collect();
    Ok(Moments {
        a,
        c_g,
        c_h,
        x_g,
        y_h,
    })
}

/// Covariance of `vec(H_c,k − Ĥ_c,k)`:
/// `R_G⊙(R_h⊗𝟙) + C_Ĝ⊙(C_ĥ⊗𝟙) − X⊙(Y⊗𝟙) − (X⊙(Y⊗𝟙))ᴴ`.
pub fn mse_matrix(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
    k: usize,
) -> Result<CMat> {
    if k >= stats.k_users() {
        return Err(Error::InvalidParameter(format!("user index {k} out of range")));
    }
    let mo = moments(pilot, stats, rx)?;
    let ones = CMat::from_element(stats.m_b, stats.m_b, C64::new(1.0, 0.0));
    let lift = |m: &CMat| kron(m, &ones);
    let cross = mo.x_g.component_mul(&lift(&mo.y_h[k]));
    let c = stats.r_g.component_mul(&lift(&stats.r_h[k]))
        + mo.c_g.component_mul(&lift(&mo.c_h[k]))
        - &cross
        - cross.adjoint();
    Ok(hermitian_part(&c))
}

/// `Tr C_Hc,k` for every user, computed from block-diagonal traces only.
pub fn mse_traces(stats: &ChannelStats, mo: &Moments) -> Result<Vec<f64>> {
    let mb = stats.m_b;
    let rg = block_diag_trace(&stats.r_g, mb)?;
    let cg = block_diag_trace(&mo.c_g, mb)?;
    let xg = block_diag_trace(&mo.x_g, mb)?;
    Ok((0..stats.k_users())
        .map(|k| {
            (0..stats.m_r)
                .map(|m| {
                    (rg[m] * stats.r_h[k][(m, m)]).re + (cg[m] * mo.c_h[k][(m, m)]).re
                        - 2.0 * (xg[m] * mo.y_h[k][(m, m)]).re
                })
                .sum()
        })
        .collect())
}

/// Objective of the pilot design problem: `(1/K) Σ_k Tr C_Hc,k`.
pub fn objective_p1(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<f64> {
    let mo = moments(pilot, stats, rx)?;
    let tr = mse_traces(stats, &mo)?;
    Ok(tr.iter().sum::<f64>() / tr.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    MonteCarlo,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::MonteCarlo => "mc",
        }
    }
}

/// Per-user MSE and NMSE with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub mse: Vec<f64>,
    pub nmse: Vec<f64>,
    pub method: Method,
    pub trials: Option<usize>,
    /// Standard errors of `mse`, Monte Carlo only.
    pub se: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl MseReport {
    pub fn mean_mse(&self) -> f64 {
        self.mse.iter().sum::<f64>() / self.mse.len() as f64
    }

    pub fn mean_nmse(&self) -> f64 {
        self.nmse.iter().sum::<f64>() / self.nmse.len() as f64
    }
}

/// Analytic MSE of every user.
pub fn analytic_report(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
) -> Result<MseReport> {
    let mo = moments(pilot, stats, rx)?;
    let mse = mse_traces(stats, &mo)?;
    let nmse = mse
        .iter()
        .enumerate()
        .map(|(k, m)| m / stats.cascaded_power(k))
        .collect();
    Ok(MseReport {
        mse,
        nmse,
        method: Method::Analytic,
        trials: None,
        se: None,
        seed: None,
    })
}

/// Monte-Carlo training: draws channels and noise, applies the receivers,
/// and averages `‖H_c,k − Ĝ Diag(ĥ_k)‖_F²`. Trial `i` uses stream `i` of
/// `seed`, and trials are accumulated in index order.
pub fn simulate_training(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
    seed: u64,
    trials: usize,
) -> Result<MseReport> {
    check_dims(pilot, stats)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let sampler = ChannelSampler::new(stats)?;
    let psi = pilot.psi();
    let psi_t = psi.transpose();
    let t = pilot.slots();
    let (m_b, m_r) = (stats.m_b, stats.m_r);
    let kk = stats.k_users();
    let wg_h = rx.w_g.adjoint();
    let wh_h: Vec<CMat> = rx.w_h.iter().map(|w| w.adjoint()).collect();
    let mut sum = vec![0.0; kk];
    let mut sum_sq = vec![0.0; kk];
    for trial in 0..trials {
        let mut rng = rng_for(seed, trial as u64);
        let ch = sampler.channels(&mut rng);
        let y_b = &ch.g * &psi + sampler.bs_noise(&mut rng, t);
        let g_hat_v = &wg_h * crate::cxlinalg::vec_of(&y_b);
        let g_hat = CMat::from_column_slice(m_b, m_r, g_hat_v.as_slice());
        for k in 0..kk {
            let y_k = &psi_t * &ch.h[k] + sampler.user_noise(&mut rng, k, t);
            let h_hat = &wh_h[k] * y_k;
            let mut err = 0.0;
            for j in 0..m_r {
                for i in 0..m_b {
                    err += (ch.g[(i, j)] * ch.h[k][(j, 0)] - g_hat[(i, j)] * h_hat[(j, 0)])
                        .norm_sqr();
                }
            }
            sum[k] += err;
            sum_sq[k] += err * err;
        }
    }
    let n = trials as f64;
    let mse: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se = mse
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| {
            if trials < 2 {
                0.0
            } else {
                ((s2 / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    let nmse = mse
        .iter()
        .enumerate()
        .map(|(k, m)| m / stats.cascaded_power(k))
        .collect();
    Ok(MseReport {
        mse,
        nmse,
        method: Method::MonteCarlo,
        trials: Some(trials),
        se: Some(se),
        seed: Some(seed),
    })
}

/// Scalar link parameters for the i.i.d./DFT closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub rho_g: f64,
    pub rho_h: f64,
    pub sigma_b_sq: f64,
    pub sigma_u_sq: f64,
    pub m_r: f64,
    pub m_b: f64,
    pub p_max: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.rho_g,
            self.rho_h,
            self.sigma_b_sq,
            self.sigma_u_sq,
            self.m_r,
            self.m_b,
            self.p_max,
        ];
        if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "closed-form parameters must all be positive and finite".into(),
            ))
        }
    }

    /// Parameters for user `k` of a scenario.
    pub fn from_scenario(s: &crate::channel::Scenario, k: usize) -> Result<Self> {
        s.validate()?;
        let rho_g = crate::channel::pathloss_gain(s.d_b, s.gains_db)?;
        let rho_h = crate::channel::pathloss_gain(
            *s.d_u
                .get(k)
                .ok_or_else(|| Error::InvalidParameter(format!("user index {k} out of range")))?,
            s.gains_db,
        )?;
        Ok(Self {
            rho_g,
            rho_h,
            sigma_b_sq: s.sigma_b_sq,
            sigma_u_sq: s.sigma_u_sq[k],
            m_r: s.m_r as f64,
            m_b: s.m_b as f64,
            p_max: s.p_max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lmmse,
    Ls,
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::Lmmse => "lmmse",
            Estimator::Ls => "ls",
        }
    }
}

/// NMSE of the RIS-TX scheme with a DFT pilot under i.i.d. Rayleigh fading.
///
/// With per-link errors `e_G = ρ_G σ_B² M/(ρ_G P + σ_B² M)` (LMMSE) or
/// `σ_B² M/P` (LS), and likewise `e_h`, the per-entry product error is
/// `ρ_G e_h + ρ_h e_G ∓ e_G e_h`.
pub fn closed_form_nmse(estimator: Estimator, lp: &LinkParams) -> Result<f64> {
    lp.validate()?;
    let (m, p) = (lp.m_r, lp.p_max);
    Ok(match estimator {
        Estimator::Lmmse => {
            let num = lp.rho_g * lp.sigma_u_sq * m * p
                + lp.rho_h * lp.sigma_b_sq * m * p
                + lp.sigma_b_sq * lp.sigma_u_sq * m * m;
            num / ((lp.rho_g * p + lp.sigma_b_sq * m) * (lp.rho_h * p + lp.sigma_u_sq * m))
        }
        Estimator::Ls => {
            lp.sigma_u_sq * m / (p * lp.rho_h)
                + lp.sigma_b_sq * m / (p * lp.rho_g)
                + lp.sigma_b_sq * lp.sigma_u_sq * m * m / (p * p * lp.rho_g * lp.rho_h)
        }
    })
}
