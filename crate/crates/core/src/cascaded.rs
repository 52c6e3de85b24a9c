//! Cascaded-channel baseline: users send orthogonal uplink pilots while the
//! RIS cycles through DFT phase patterns, and the BS estimates each
//! `h_c,k = vec(G Diag(h_k))` directly.
//!
//! After de-spreading with `z_k` the BS holds
//! `ỹ_k = P_max A_G(Φ_p) h_c,k + ñ_k` with `ñ_k ~ CN(0, P_max (I ⊗ Σ_B))`.

use crate::channel::{ChannelSampler, ChannelStats, Channels};
use crate::cxlinalg::{hermitian_part, inv_hpd, kron, rng_for, solve_hpd, CMat, C64};
use crate::error::{Error, Result};
use crate::estimation::{dft_matrix, Estimator, LinkParams, Method, MseReport};

/// RIS phase patterns and user pilot sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct CscdPilot {
    /// `M_R x T` DFT phases, column `t` used in slot `t`.
    pub phi_p: CMat,
    /// `K x K`, column `k` is user `k`'s sequence; `Zᴴ Z = P_max I`.
    pub z: CMat,
    pub p_max: f64,
}

impl CscdPilot {
    pub fn new(m_r: usize, k_users: usize, p_max: f64) -> Result<Self> {
        if m_r == 0 || k_users == 0 || !(p_max > 0.0) {
            return Err(Error::InvalidParameter(
                "cascaded pilot needs m_r, k_users ≥ 1 and p_max > 0".into(),
            ));
        }
        let scale = (p_max / k_users as f64).sqrt();
        Ok(Self {
            phi_p: dft_matrix(m_r),
            z: dft_matrix(k_users) * C64::new(scale, 0.0),
            p_max,
        })
    }

    /// `A_G(Φ_p) = Φ_pᵀ ⊗ I_{M_B}`.
    pub fn measurement(&self, m_b: usize) -> CMat {
        kron(&self.phi_p.transpose(), &CMat::identity(m_b, m_b))
    }
}

/// De-spread observation of user `k`, `vec([Ỹ⁽¹⁾z_k, …, Ỹ⁽ᵀ⁾z_k])`.
///
/// `noise[t]` is the `M_B x K` noise block of slot `t`.
pub fn cscd_receive(pilot: &CscdPilot, ch: &Channels, noise: &[CMat], k: usize) -> Result<CMat> {
    let (m_b, m_r) = (ch.g.nrows(), ch.g.ncols());
    let t = pilot.phi_p.ncols();
    let kk = pilot.z.ncols();
    if pilot.phi_p.nrows() != m_r || ch.h.len() != kk || noise.len() != t || k >= kk {
        return Err(Error::Dimension(
            "cascaded observation: channel, pilot and noise dimensions disagree".into(),
        ));
    }
    if noise.iter().any(|n| n.shape() != (m_b, kk)) {
        return Err(Error::Dimension(format!("noise blocks must be {m_b}x{kk}")));
    }
    let cascades: Vec<CMat> = ch
        .h
        .iter()
        .map(|h| crate::channel::cascaded_channel(&ch.g, h))
        .collect::<Result<_>>()?;
    let zk = pilot.z.column(k).into_owned();
    let mut out = CMat::zeros(m_b * t, 1);
    for s in 0..t {
        let phi = pilot.phi_p.column(s).into_owned();
        let mut y = &noise[s] * &zk;
        for (j, hc) in cascades.iter().enumerate() {
            let zj = pilot.z.column(j).into_owned();
            // H_c,j φ z_jᴴ z_k
            let coupling = (zj.adjoint() * &zk)[(0, 0)];
            y += hc * &phi * coupling;
        }
        out.view_mut((s * m_b, 0), (m_b, 1)).copy_from(&y);
    }
    Ok(out)
}

fn effective_noise(stats: &ChannelStats, t: usize, p_max: f64) -> CMat {
    kron(&CMat::identity(t, t), &stats.sigma_b_mat) / C64::new(p_max, 0.0)
}

/// LMMSE error covariance of `h_c,k`:
/// `R − R Aᴴ (A R Aᴴ + (I⊗Σ_B)/P_max)⁻¹ A R`.
pub fn cscd_lmmse_mse(stats: &ChannelStats, k: usize, p_max: f64) -> Result<CMat> {
    if !(p_max > 0.0) {
        return Err(Error::InvalidParameter("p_max must be positive".into()));
    }
    let r = stats.cascaded_covariance(k)?;
    let pilot = CscdPilot::new(stats.m_r, stats.k_users(), p_max)?;
    let a = pilot.measurement(stats.m_b);
    let s = hermitian_part(&(&a * &r * a.adjoint() + effective_noise(stats, stats.m_r, p_max)));
    let ar = &a * &r;
    let c = &r - ar.adjoint() * solve_hpd(&s, &ar)?;
    Ok(hermitian_part(&c))
}

/// LS error covariance with DFT phases: `σ_B²/(M_R P_max) I`.
pub fn cscd_ls_mse(m_b: usize, m_r: usize, sigma_b_sq: f64, p_max: f64) -> Result<CMat> {
    if m_b == 0 || m_r == 0 || !(sigma_b_sq > 0.0) || !(p_max > 0.0) {
        return Err(Error::InvalidParameter(
            "cascaded LS needs positive dimensions and powers".into(),
        ));
    }
    let n = m_b * m_r;
    Ok(CMat::identity(n, n) * C64::new(sigma_b_sq / (m_r as f64 * p_max), 0.0))
}

/// Closed-form cascaded NMSE under i.i.d. fading with DFT phases.
pub fn cscd_closed_form_nmse(estimator: Estimator, lp: &LinkParams) -> Result<f64> {
    lp.validate()?;
    let snr = lp.rho_g * lp.rho_h * lp.m_r * lp.p_max;
    Ok(match estimator {
        Estimator::Lmmse => lp.sigma_b_sq / (snr + lp.sigma_b_sq),
        Estimator::Ls => lp.sigma_b_sq / snr,
    })
}

/// Minimum training length of the cascaded scheme without sparsity,
/// `M_R + max{K−1, (K−1)⌈M_R/M_B⌉}`.
pub fn pilot_overhead(m_r: usize, m_b: usize, k_users: usize) -> usize {
    let k1 = k_users.saturating_sub(1);
    m_r + k1.max(k1 * m_r.div_ceil(m_b.max(1)))
}

/// Monte-Carlo evaluation of the cascaded scheme.
pub fn simulate_cscd(
    stats: &ChannelStats,
    p_max: f64,
    estimator: Estimator,
    seed: u64,
    trials: usize,
) -> Result<MseReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let (m_b, m_r, kk) = (stats.m_b, stats.m_r, stats.k_users());
    let pilot = CscdPilot::new(m_r, kk, p_max)?;
    let a = pilot.measurement(m_b);
    let sampler = ChannelSampler::new(stats)?;
    // Receivers act on ỹ_k / P_max.
    let w: Vec<CMat> = (0..kk)
        .map(|k| match estimator {
            Estimator::Lmmse => {
                let r = stats.cascaded_covariance(k)?;
                let s = hermitian_part(&(&a * &r * a.adjoint() + effective_noise(stats, m_r, p_max)));
                Ok(solve_hpd(&s, &(&a * r))?.adjoint())
            }
            Estimator::Ls => Ok(inv_hpd(&hermitian_part(&(a.adjoint() * &a)))? * a.adjoint()),
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; kk];
    let mut sum_sq = vec![0.0; kk];
    for trial in 0..trials {
        let mut rng = rng_for(seed, trial as u64);
        let ch = sampler.channels(&mut rng);
        let noise: Vec<CMat> = (0..m_r).map(|_| sampler.bs_noise(&mut rng, kk)).collect();
        for k in 0..kk {
            let y = cscd_receive(&pilot, &ch, &noise, k)? / C64::new(p_max, 0.0);
            let est = &w[k] * y;
            let hc = crate::channel::cascaded_channel(&ch.g, &ch.h[k])?;
            let err: f64 = hc
                .as_slice()
                .iter()
                .zip(est.as_slice())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
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
                ((s2 / n - m * m).max(0.0) / (n - 1.0)).sqrt()
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

/// Analytic cascaded report for every user.
pub fn cscd_analytic_report(
    stats: &ChannelStats,
    p_max: f64,
    estimator: Estimator,
) -> Result<MseReport> {
    let mse: Vec<f64> = (0..stats.k_users())
        .map(|k| match estimator {
            Estimator::Lmmse => Ok(cscd_lmmse_mse(stats, k, p_max)?.trace().re),
            Estimator::Ls => {
                let a = CscdPilot::new(stats.m_r, stats.k_users(), p_max)?.measurement(stats.m_b);
                let gram_inv = inv_hpd(&hermitian_part(&(a.adjoint() * &a)))?;
                let noise = effective_noise(stats, stats.m_r, p_max);
                Ok((&gram_inv * a.adjoint() * noise * &a * &gram_inv).trace().re)
            }
        })
        .collect::<Result<_>>()?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_stats, Scenario};
    use crate::cxlinalg::max_abs_diff;

    #[test]
    fn user_pilots_are_orthogonal() {
        let p = CscdPilot::new(4, 3, 2.0).unwrap();
        let g = p.z.adjoint() * &p.z;
        assert!(max_abs_diff(&g, &(CMat::identity(3, 3) * C64::new(2.0, 0.0))) < 1e-14);
    }

    #[test]
    fn noiseless_observation_and_orthogonality() {
        let s = Scenario::analysis(2, 3, 2, 1.0);
        let stats = build_stats(&s).unwrap();
        let mut rng = rng_for(1, 0);
        let ch = crate::channel::sample_channels(&stats, &mut rng).unwrap();
        let pilot = CscdPilot::new(3, 2, 1.5).unwrap();
        let zero: Vec<CMat> = (0..3).map(|_| CMat::zeros(2, 2)).collect();
        let y = cscd_receive(&pilot, &ch, &zero, 0).unwrap();
        let hc = crate::channel::cascaded_channel(&ch.g, &ch.h[0]).unwrap();
        let want = pilot.measurement(2) * crate::cxlinalg::vec_of(&hc) * C64::new(1.5, 0.0);
        assert!(max_abs_diff(&y, &want) < 1e-12 * want.norm());
        // With user 0 silent, user 1's sequence is orthogonal to z_0.
        let mut only_user1 = ch.clone();
        only_user1.h[0] = CMat::zeros(3, 1);
        let y = cscd_receive(&pilot, &only_user1, &zero, 0).unwrap();
        assert!(y.norm() < 1e-12 * want.norm());
    }

    #[test]
    fn ls_covariance_scaling() {
        let a = cscd_ls_mse(2, 1, 0.5, 2.0).unwrap();
        assert!((a[(0, 0)].re - 0.25).abs() < 1e-15);
        let b = cscd_ls_mse(2, 4, 0.5, 2.0).unwrap();
        let c = cscd_ls_mse(2, 8, 0.5, 2.0).unwrap();
        assert!((b[(3, 3)].re / c[(3, 3)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn overhead_formula() {
        assert_eq!(pilot_overhead(64, 8, 1), 64);
        assert_eq!(pilot_overhead(64, 8, 4), 64 + 3 * 8);
        assert_eq!(pilot_overhead(4, 8, 3), 4 + 2);
        for k in 2..6 {
            assert!(pilot_overhead(16, 4, k) > 16);
        }
    }

    #[test]
    fn lmmse_tends_to_prior_without_power() {
        let s = Scenario::analysis(2, 3, 1, 1.0);
        let stats = build_stats(&s).unwrap();
        let c = cscd_lmmse_mse(&stats, 0, 1e-20).unwrap();
        let r = stats.cascaded_covariance(0).unwrap();
        assert!(max_abs_diff(&c, &r) < 1e-6 * crate::cxlinalg::max_abs(&r));
    }
}
