//! Fisher information and Cramér–Rao bounds for both training schemes, the
//! RIS size at which the two bounds cross, and log-log scaling fits of the
//! closed-form NMSEs.
//!
//! Scalar bounds take a [`LinkParams`] and assume i.i.d. Rayleigh fading with
//! a DFT pilot. The matrix-valued functions work for any pilot.

use serde::{Deserialize, Serialize};

use crate::cascaded::cscd_closed_form_nmse;
use crate::channel::{Channels, ChannelStats, Scenario};
use crate::cxlinalg::{inv_hpd, kron, CMat, C64};
use crate::error::{Error, Result};
use crate::estimation::{closed_form_nmse, Estimator, LinkParams, PilotSequence};

/// Training scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ris-tx")]
    RisTx,
    #[serde(rename = "cscd")]
    Cscd,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::RisTx => "ris-tx",
            Scheme::Cscd => "cscd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ris-tx" | "ristx" | "ris_tx" => Ok(Scheme::RisTx),
            "cscd" | "cascaded" => Ok(Scheme::Cscd),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected ris-tx or cscd)"
            ))),
        }
    }
}

/// Closed-form NMSE of either scheme.
pub fn scheme_nmse(scheme: Scheme, estimator: Estimator, lp: &LinkParams) -> Result<f64> {
    match scheme {
        Scheme::RisTx => closed_form_nmse(estimator, lp),
        Scheme::Cscd => cscd_closed_form_nmse(estimator, lp),
    }
}

/// FIM of `vec(G)` at the BS: `(Ψ*⊗I)(I_T⊗Σ_B)⁻¹(Ψᵀ⊗I) = (Ψ*Ψᵀ)⊗Σ_B⁻¹`.
pub fn fim_g(pilot: &PilotSequence, sigma_b_mat: &CMat) -> Result<CMat> {
    let inv = inv_hpd(sigma_b_mat)?;
    Ok(kron(&gram(pilot), &inv))
}

/// FIM of `h_k` at user `k`: `Ψ*Ψᵀ/σ_U,k²`.
pub fn fim_h(pilot: &PilotSequence, sigma_u_sq: f64) -> Result<CMat> {
    if !(sigma_u_sq > 0.0 && sigma_u_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "user noise power must be positive, got {sigma_u_sq}"
        )));
    }
    Ok(gram(pilot) / C64::new(sigma_u_sq, 0.0))
}

fn gram(pilot: &PilotSequence) -> CMat {
    let psi = pilot.psi();
    psi.conjugate() * psi.transpose()
}

/// `∂vec(H_c)/∂vec(G)ᵀ = Diag(h)⊗I_MB`.
pub fn jacobian_g(h: &CMat, m_b: usize) -> CMat {
    let m_r = h.nrows();
    let mut j = CMat::zeros(m_r * m_b, m_r * m_b);
    for m in 0..m_r {
        for b in 0..m_b {
            j[(m * m_b + b, m * m_b + b)] = h[(m, 0)];
        }
    }
    j
}

/// `∂vec(H_c)/∂hᵀ = blkdiag(g_1, …, g_MR)` with `g_m` the columns of `G`.
pub fn jacobian_h(g: &CMat) -> CMat {
    let (m_b, m_r) = g.shape();
    let mut j = CMat::zeros(m_r * m_b, m_r);
    for m in 0..m_r {
        for b in 0..m_b {
            j[(m * m_b + b, m)] = g[(b, m)];
        }
    }
    j
}

/// Chain-rule bound on the MSE matrix of `vec(H_c,k)` given the channel
/// realization: `J_g F_g⁻¹ J_gᴴ + J_h F_h⁻¹ J_hᴴ`.
pub fn crlb_matrix(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    channels: &Channels,
    k: usize,
) -> Result<CMat> {
    let h = channels
        .h
        .get(k)
        .ok_or_else(|| Error::InvalidParameter(format!("user index {k} out of range")))?;
    if channels.g.shape() != (stats.m_b, stats.m_r) || h.shape() != (stats.m_r, 1) {
        return Err(Error::Dimension("channel realization does not match the statistics".into()));
    }
    if pilot.m_r() != stats.m_r {
        return Err(Error::Dimension(format!(
            "pilot has {} rows, statistics expect {}",
            pilot.m_r(),
            stats.m_r
        )));
    }
    let cg = inv_hpd(&fim_g(pilot, &stats.sigma_b_mat)?)?;
    let ch = inv_hpd(&fim_h(pilot, stats.sigma_u_sq[k])?)?;
    let jg = jacobian_g(h, stats.m_b);
    let jh = jacobian_h(&channels.g);
    Ok(&jg * cg * jg.adjoint() + &jh * ch * jh.adjoint())
}

/// Conditional NMSE bound for any pilot and statistics: the trace of
/// [`crlb_matrix`] over `Tr R_Hc,k`.
pub fn crlb_conditional_nmse(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    channels: &Channels,
    k: usize,
) -> Result<f64> {
    let c = crlb_matrix(pilot, stats, channels, k)?;
    Ok(c.trace().re / stats.cascaded_power(k))
}

/// How the RIS-TX bound treats the channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CrlbMode {
    /// Given `‖h_k‖²` and `‖G‖_F²`.
    Conditional { h_norm_sq: f64, g_fro_sq: f64 },
    /// Expectation over i.i.d. Rayleigh channels.
    Averaged,
}

/// RIS-TX NMSE bound under a DFT pilot.
pub fn crlb_ris_tx_nmse(lp: &LinkParams, mode: CrlbMode) -> Result<f64> {
    lp.validate()?;
    match mode {
        CrlbMode::Averaged => Ok(
            (lp.rho_h * lp.sigma_b_sq * lp.m_r + lp.rho_g * lp.sigma_u_sq * lp.m_r)
                / (lp.rho_g * lp.rho_h * lp.p_max),
        ),
        CrlbMode::Conditional { h_norm_sq, g_fro_sq } => {
            if !(h_norm_sq > 0.0 && g_fro_sq > 0.0 && h_norm_sq.is_finite() && g_fro_sq.is_finite())
            {
                return Err(Error::InvalidParameter(
                    "channel norms must be positive".into(),
                ));
            }
            Ok((lp.sigma_b_sq * lp.m_b * h_norm_sq + lp.sigma_u_sq * g_fro_sq)
                / (lp.rho_g * lp.rho_h * lp.m_b * lp.p_max))
        }
    }
}

/// Cascaded-scheme NMSE bound `σ_B²/(ρ_G ρ_h M_R P)`.
pub fn crlb_cscd_nmse(lp: &LinkParams) -> Result<f64> {
    lp.validate()?;
    Ok(lp.sigma_b_sq / (lp.rho_g * lp.rho_h * lp.m_r * lp.p_max))
}

pub const WATERSHED_BRACKET: (f64, f64) = (1.0, 1e9);
const WATERSHED_ITERS: usize = 200;
const WATERSHED_REL_TOL: f64 = 1e-6;

/// RIS size at which the averaged RIS-TX bound meets the cascaded bound.
/// `lp.m_r` is ignored. Below the returned value RIS-TX has the lower bound.
///
/// With equal gains and noise powers this is `1/√(2ρ)`. Otherwise the
/// crossing is found by bisection on `[1, 10⁹]`; a crossing outside the
/// bracket is reported as the nearer end.
pub fn watershed_mr(lp: &LinkParams) -> Result<f64> {
    lp.validate()?;
    if lp.rho_g == lp.rho_h && lp.sigma_b_sq == lp.sigma_u_sq {
        let m = 1.0 / (2.0 * lp.rho_g).sqrt();
        return Ok(m.clamp(WATERSHED_BRACKET.0, WATERSHED_BRACKET.1));
    }
    // Log-ratio of the two bounds, increasing in M_R.
    let gap = |m: f64| -> Result<f64> {
        let at = LinkParams { m_r: m, ..*lp };
        Ok(crlb_ris_tx_nmse(&at, CrlbMode::Averaged)?.ln() - crlb_cscd_nmse(&at)?.ln())
    };
    let (mut lo, mut hi) = WATERSHED_BRACKET;
    if gap(lo)? >= 0.0 {
        return Ok(lo);
    }
    if gap(hi)? <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..WATERSHED_ITERS {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= WATERSHED_REL_TOL * lo {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bound summary for one user of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport {
    pub scheme: Scheme,
    pub user: usize,
    pub nmse_bound: f64,
    pub params: LinkParams,
    pub m_r_threshold: f64,
}

/// Averaged bounds of both schemes for every user, RIS-TX first.
pub fn crlb_reports(s: &Scenario) -> Result<Vec<CrlbReport>> {
    let mut out = Vec::with_capacity(2 * s.k_users);
    for scheme in [Scheme::RisTx, Scheme::Cscd] {
        for k in 0..s.k_users {
            let lp = LinkParams::from_scenario(s, k)?;
            let nmse_bound = match scheme {
                Scheme::RisTx => crlb_ris_tx_nmse(&lp, CrlbMode::Averaged)?,
                Scheme::Cscd => crlb_cscd_nmse(&lp)?,
            };
            out.push(CrlbReport {
                scheme,
                user: k,
                nmse_bound,
                params: lp,
                m_r_threshold: watershed_mr(&lp)?,
            });
        }
    }
    Ok(out)
}

/// Axis of a scaling-law fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingAxis {
    /// `P_max/σ_B²`.
    Snr,
    MR,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "a slope fit needs at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("grid has no spread".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Fitted log-log slope of a closed-form NMSE along `axis`, other parameters
/// taken from `base`. On the SNR axis each grid value sets
/// `P_max = snr·σ_B²`.
///
/// The fit only reflects the asymptotic law inside its regime:
/// SNR axis needs `ρ P ≫ σ² M_R` for RIS-TX and `ρ_G ρ_h M_R P ≫ σ²` for
/// cascaded LMMSE; the RIS-TX LS `M_R` law needs `σ² M_R ≫ ρ P`.
pub fn scaling_slopes(
    scheme: Scheme,
    estimator: Estimator,
    axis: ScalingAxis,
    grid: &[f64],
    base: &LinkParams,
) -> Result<f64> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "scaling grid needs at least two strictly increasing points".into(),
        ));
    }
    let ys = grid
        .iter()
        .map(|&x| {
            let lp = match axis {
                ScalingAxis::Snr => LinkParams { p_max: x * base.sigma_b_sq, ..*base },
                ScalingAxis::MR => LinkParams { m_r: x, ..*base },
            };
            scheme_nmse(scheme, estimator, &lp)
        })
        .collect::<Result<Vec<_>>>()?;
    log_log_slope(grid, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_stats, dbm_to_watts, pathloss_gain, random_stats, ChannelSampler};
    use crate::cxlinalg::{max_abs, max_abs_diff, rng_for, standard_cn};
    use crate::estimation::{dft_pilot, ls_receivers, moments, mse_traces};

    fn analysis_link(m_r: f64, p_max: f64) -> LinkParams {
        let rho = pathloss_gain(80.0, 5.0).unwrap();
        LinkParams {
            rho_g: rho,
            rho_h: rho,
            sigma_b_sq: 1e-12,
            sigma_u_sq: 1e-12,
            m_r,
            m_b: 8.0,
            p_max,
        }
    }

    fn random_pilot(seed: u64, m_r: usize, t: usize) -> PilotSequence {
        let mut rng = rng_for(seed, 0);
        let phi = standard_cn(&mut rng, m_r, t).map(|z| z / z.norm());
        let p = (0..t).map(|i| 0.3 + 0.1 * i as f64).collect();
        PilotSequence::new(phi, p).unwrap()
    }

    #[test]
    fn fim_g_matches_dense_definition() {
        let pilot = random_pilot(1, 3, 4);
        let mut rng = rng_for(2, 0);
        let l = standard_cn(&mut rng, 2, 2);
        let sb = &l * l.adjoint() + CMat::identity(2, 2);
        let a = kron(&pilot.psi().transpose(), &CMat::identity(2, 2));
        let n = kron(&CMat::identity(4, 4), &sb);
        let oracle = a.adjoint() * inv_hpd(&n).unwrap() * &a;
        let f = fim_g(&pilot, &sb).unwrap();
        assert!(max_abs_diff(&f, &oracle) < 1e-12 * max_abs(&oracle));
        let (vals, _) = crate::cxlinalg::hermitian_eigen(&f).unwrap();
        assert!(vals.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn dft_fims_are_scaled_identities() {
        let (m_r, p, s2) = (8, 3.0, 0.5);
        let pilot = dft_pilot(m_r, p);
        let sb = CMat::identity(2, 2) * C64::new(s2, 0.0);
        let fg = fim_g(&pilot, &sb).unwrap();
        let want = CMat::identity(2 * m_r, 2 * m_r) * C64::new(p / (m_r as f64 * s2), 0.0);
        assert!(max_abs_diff(&fg, &want) < 1e-12);
        let fh = fim_h(&pilot, s2).unwrap();
        let want = CMat::identity(m_r, m_r) * C64::new(p / (m_r as f64 * s2), 0.0);
        assert!(max_abs_diff(&fh, &want) < 1e-12);
    }

    #[test]
    fn zero_power_gives_zero_fim() {
        let pilot = PilotSequence::new(dft_pilot(4, 1.0).phi, vec![0.0; 4]).unwrap();
        assert_eq!(fim_g(&pilot, &CMat::identity(3, 3)).unwrap().norm(), 0.0);
        assert_eq!(fim_h(&pilot, 2.0).unwrap().norm(), 0.0);
        assert!(fim_h(&pilot, 0.0).is_err());
    }

    #[test]
    fn jacobians_reproduce_cascaded_channel() {
        let mut rng = rng_for(3, 0);
        let g = standard_cn(&mut rng, 3, 4);
        let h = standard_cn(&mut rng, 4, 1);
        let hc = crate::channel::cascaded_channel(&g, &h).unwrap();
        let vec_hc = CMat::from_column_slice(12, 1, hc.as_slice());
        let vec_g = CMat::from_column_slice(12, 1, g.as_slice());
        assert!(max_abs_diff(&(jacobian_g(&h, 3) * vec_g), &vec_hc) < 1e-14);
        assert!(max_abs_diff(&(jacobian_h(&g) * &h), &vec_hc) < 1e-14);
    }

    #[test]
    fn averaged_example() {
        let b = crlb_ris_tx_nmse(&analysis_link(64.0, 100.0), CrlbMode::Averaged).unwrap();
        assert!((b - 3.50e-5).abs() < 0.01e-5, "{b}");
        let b2 = crlb_ris_tx_nmse(&analysis_link(64.0, 200.0), CrlbMode::Averaged).unwrap();
        assert!((b / b2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cascaded_examples() {
        let b = crlb_cscd_nmse(&analysis_link(1000.0, 100.0)).unwrap();
        assert!((b - 7.48e-3).abs() < 0.01e-3, "{b}");
        let b2 = crlb_cscd_nmse(&analysis_link(2000.0, 100.0)).unwrap();
        assert!((b / b2 - 2.0).abs() < 1e-14);
        let other = LinkParams { sigma_u_sq: 7.0, ..analysis_link(1000.0, 100.0) };
        assert_eq!(crlb_cscd_nmse(&other).unwrap(), b);
        let ls = cscd_closed_form_nmse(Estimator::Ls, &analysis_link(1000.0, 100.0)).unwrap();
        assert_eq!(ls, b);
    }

    #[test]
    fn nonpositive_params_rejected() {
        let lp = LinkParams { p_max: 0.0, ..analysis_link(64.0, 1.0) };
        assert!(crlb_ris_tx_nmse(&lp, CrlbMode::Averaged).is_err());
        assert!(crlb_cscd_nmse(&lp).is_err());
        let mode = CrlbMode::Conditional { h_norm_sq: -1.0, g_fro_sq: 1.0 };
        assert!(crlb_ris_tx_nmse(&analysis_link(64.0, 1.0), mode).is_err());
    }

    #[test]
    fn matrix_bound_matches_conditional_formula_for_dft() {
        let s = Scenario::analysis(2, 8, 1, 0.5);
        let stats = build_stats(&s).unwrap();
        let sampler = ChannelSampler::new(&stats).unwrap();
        let ch = sampler.channels(&mut rng_for(9, 0));
        let pilot = dft_pilot(8, 0.5);
        let via_matrix = crlb_conditional_nmse(&pilot, &stats, &ch, 0).unwrap();
        let mode = CrlbMode::Conditional {
            h_norm_sq: ch.h[0].norm_squared(),
            g_fro_sq: ch.g.norm_squared(),
        };
        let via_formula = crlb_ris_tx_nmse(&LinkParams::from_scenario(&s, 0).unwrap(), mode).unwrap();
        assert!((via_matrix / via_formula - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conditional_averages_to_averaged() {
        let s = Scenario::analysis(2, 8, 1, 0.5);
        let lp = LinkParams::from_scenario(&s, 0).unwrap();
        let sampler = ChannelSampler::new(&build_stats(&s).unwrap()).unwrap();
        let mut rng = rng_for(10, 0);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let ch = sampler.channels(&mut rng);
                let mode = CrlbMode::Conditional {
                    h_norm_sq: ch.h[0].norm_squared(),
                    g_fro_sq: ch.g.norm_squared(),
                };
                crlb_ris_tx_nmse(&lp, mode).unwrap()
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let avg = crlb_ris_tx_nmse(&lp, CrlbMode::Averaged).unwrap();
        assert!((mean - avg).abs() < 4.0 * se, "{mean} vs {avg} (se {se})");
    }

    #[test]
    fn expected_matrix_bound_below_ls_mse() {
        for seed in 0..5u64 {
            let stats = random_stats(2, 3, 2, 0.3, seed).unwrap();
            let pilot = random_pilot(100 + seed, 3, 3);
            let rx = ls_receivers(&pilot, 2, 2).unwrap();
            let ls = mse_traces(&stats, &moments(&pilot, &stats, &rx).unwrap()).unwrap();
            let cg = inv_hpd(&fim_g(&pilot, &stats.sigma_b_mat).unwrap()).unwrap();
            for k in 0..2 {
                let ch = inv_hpd(&fim_h(&pilot, stats.sigma_u_sq[k]).unwrap()).unwrap();
                // E|h_m|² weighs the G-blocks, E‖g_m‖² weighs the h-entries.
                let mut expected = 0.0;
                for m in 0..3 {
                    let mut gm = 0.0;
                    for b in 0..2 {
                        let i = m * 2 + b;
                        expected += stats.r_h[k][(m, m)].re * cg[(i, i)].re;
                        gm += stats.r_g[(i, i)].re;
                    }
                    expected += gm * ch[(m, m)].re;
                }
                assert!(expected <= ls[k] * (1.0 + 1e-10), "{expected} > {}", ls[k]);
            }
        }
    }

    #[test]
    fn expected_matrix_bound_matches_monte_carlo() {
        let stats = random_stats(2, 3, 1, 0.3, 4).unwrap();
        let pilot = random_pilot(7, 3, 3);
        let sampler = ChannelSampler::new(&stats).unwrap();
        let mut rng = rng_for(8, 0);
        let n = 4000;
        let draws: Vec<f64> = (0..n)
            .map(|_| crlb_matrix(&pilot, &stats, &sampler.channels(&mut rng), 0).unwrap().trace().re)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let cg = inv_hpd(&fim_g(&pilot, &stats.sigma_b_mat).unwrap()).unwrap();
        let ch = inv_hpd(&fim_h(&pilot, stats.sigma_u_sq[0]).unwrap()).unwrap();
        let mut expected = 0.0;
        for m in 0..3 {
            for b in 0..2 {
                let i = m * 2 + b;
                expected += stats.r_h[0][(m, m)].re * cg[(i, i)].re + stats.r_g[(i, i)].re * ch[(m, m)].re;
            }
        }
        assert!((mean - expected).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn averaged_bound_below_ls_closed_form() {
        for d in [20.0, 50.0, 80.0, 120.0] {
            for m_r in [4.0, 64.0, 1024.0] {
                for p in [1e-3, 1.0, 100.0] {
                    let rho = pathloss_gain(d, 5.0).unwrap();
                    let lp = LinkParams { rho_g: rho, rho_h: 0.5 * rho, m_r, p_max: p, ..analysis_link(m_r, p) };
                    let b = crlb_ris_tx_nmse(&lp, CrlbMode::Averaged).unwrap();
                    assert!(b <= closed_form_nmse(Estimator::Ls, &lp).unwrap());
                }
            }
        }
    }

    #[test]
    fn watershed_closed_form_and_invariance() {
        let base = analysis_link(64.0, 1.0);
        let th = watershed_mr(&base).unwrap();
        let oracle = 1.0 / (2.0 * 3.656e-8f64).sqrt();
        assert!((th / oracle - 1.0).abs() < 0.01, "{th}");
        for dbm in [10.0, 30.0, 50.0] {
            let lp = LinkParams { p_max: dbm_to_watts(dbm), ..base };
            assert_eq!(watershed_mr(&lp).unwrap(), th);
        }
        for d in [70.0, 90.0] {
            let rho = pathloss_gain(d, 5.0).unwrap();
            let lp = LinkParams { rho_g: rho, rho_h: rho, ..base };
            let t = watershed_mr(&lp).unwrap();
            assert!((3000.0..=5000.0).contains(&t), "{d}: {t}");
        }
    }

    #[test]
    fn watershed_bisection_matches_ratio_root() {
        let rho = pathloss_gain(80.0, 5.0).unwrap();
        let lp = LinkParams { rho_h: 3.0 * rho, sigma_u_sq: 4e-12, ..analysis_link(64.0, 2.0) };
        let t = watershed_mr(&lp).unwrap();
        // The bound ratio is M² (ρ_h σ_B² + ρ_G σ_U²)/σ_B².
        let root = (lp.sigma_b_sq / (lp.rho_h * lp.sigma_b_sq + lp.rho_g * lp.sigma_u_sq)).sqrt();
        assert!((t / root - 1.0).abs() < 2e-6, "{t} vs {root}");
        let below = LinkParams { m_r: 0.9 * t, ..lp };
        assert!(crlb_ris_tx_nmse(&below, CrlbMode::Averaged).unwrap() < crlb_cscd_nmse(&below).unwrap());
    }

    #[test]
    fn watershed_clamps_to_bracket() {
        let lp = LinkParams { rho_g: 10.0, rho_h: 10.0, sigma_u_sq: 2e-12, ..analysis_link(1.0, 1.0) };
        assert_eq!(watershed_mr(&lp).unwrap(), 1.0);
    }

    #[test]
    fn slopes_examples() {
        let base = analysis_link(64.0, 1.0);
        let mr: Vec<f64> = (0..=8).map(|i| 256.0 * 2f64.powf(i as f64 / 2.0)).collect();
        let low_p = LinkParams { p_max: 1e-5, ..base };
        let s = scaling_slopes(Scheme::RisTx, Estimator::Ls, ScalingAxis::MR, &mr, &low_p).unwrap();
        assert!((s - 2.0).abs() < 0.05, "{s}");
        let snr: Vec<f64> = (0..=8).map(|i| 1e16 * 10f64.powf(i as f64 / 4.0)).collect();
        let s = scaling_slopes(Scheme::Cscd, Estimator::Lmmse, ScalingAxis::Snr, &snr, &base).unwrap();
        assert!((s + 1.0).abs() < 0.05, "{s}");
        let big = LinkParams { m_r: 1e6, ..base };
        let v = closed_form_nmse(Estimator::Lmmse, &big).unwrap();
        assert!((0.9..=1.0).contains(&v), "{v}");
    }

    #[test]
    fn slope_fit_errors() {
        let base = analysis_link(64.0, 1.0);
        assert!(scaling_slopes(Scheme::Cscd, Estimator::Ls, ScalingAxis::MR, &[4.0], &base).is_err());
        assert!(scaling_slopes(Scheme::Cscd, Estimator::Ls, ScalingAxis::MR, &[4.0, 4.0], &base).is_err());
        assert!(log_log_slope(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        let s = log_log_slope(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reports_cover_both_schemes() {
        let r = crlb_reports(&Scenario::analysis(8, 64, 2, 100.0)).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r[0].scheme, Scheme::RisTx);
        assert_eq!(r[3].scheme, Scheme::Cscd);
        assert!(r.iter().all(|x| x.nmse_bound > 0.0 && x.m_r_threshold >= 1.0));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!(Scheme::parse("RIS-TX").unwrap(), Scheme::RisTx);
        assert_eq!(Scheme::parse("cscd").unwrap().tag(), "cscd");
        assert!(Scheme::parse("x").is_err());
    }
}
