//! Penalty duality decomposition for the pilot design problem.
//!
//! Copies of the pilot are introduced so that every block of variables has a
//! closed-form or Sylvester-equation update:
//!
//! * `U₁,k = Ψ*`, `U₂ = Ψ* ⊗ I`,
//! * `U₃,k = R_h,k^{1/2} U₁,k W_h,k`, `U₄ = R_G^{1/2} U₂ W_G`.
//!
//! The inner loop cycles through `W_h, W_G, U₁, U₂, U₃, U₄, Φ, p`, each an exact
//! block minimizer of the augmented Lagrangian. The outer loop moves the
//! multipliers of the satisfied copy constraints and shrinks the penalty for
//! the violated ones.
//!
//! The solver works in scaled units: covariances are divided by their average
//! gains and the pilot by `√P_max` (noise powers are divided by `P_max` to
//! compensate), so the copy variables are `O(1/M_R)` regardless of the link
//! budget and the violation threshold is meaningful as an absolute number.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelStats;
use crate::cxlinalg::{
    block_trace, hermitian_part, inv_hpd, kron, matrix_sqrt_psd, max_abs, schur_form, CMat,
    Schur, SylvesterOperator, C64,
};
use crate::error::{Error, Result};
use crate::estimation::{lmmse_receivers, PilotSequence, ReceiverSet};
use crate::gd::{self, objective_with, project_power, InitialPilot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkPolicy {
    /// Every violated constraint shrinks the penalty once.
    #[default]
    PerConstraint,
    /// At most one shrink per outer iteration.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PddConfig {
    /// Initial penalty as a multiple of the starting objective (scaled units).
    pub rho0: f64,
    pub c_shrink: f64,
    pub delta: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Inner stop: relative change of the augmented objective.
    pub tol_inner: f64,
    /// Outer stop: relative change of the true objective.
    pub tol_rel_obj: f64,
    pub shrink: ShrinkPolicy,
    pub seed: u64,
    pub slots: Option<usize>,
    pub initial: InitialPilot,
}

impl Default for PddConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            c_shrink: 0.6,
            delta: 1e-5,
            max_inner: 50,
            max_outer: 200,
            tol_inner: 1e-7,
            tol_rel_obj: 1e-6,
            shrink: ShrinkPolicy::PerConstraint,
            seed: crate::channel::DEFAULT_SEED,
            slots: None,
            initial: InitialPilot::Dft,
        }
    }
}

impl PddConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0 must be positive");
        }
        if !(self.c_shrink > 0.0 && self.c_shrink < 1.0) {
            return bad("c_shrink must lie in (0, 1)");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be at least 1");
        }
        if !(self.tol_inner > 0.0 && self.tol_rel_obj > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.slots == Some(0) {
            return bad("slots must be at least 1");
        }
        Ok(())
    }

    fn gd_view(&self) -> gd::GdConfig {
        gd::GdConfig {
            seed: self.seed,
            slots: self.slots,
            initial: self.initial.clone(),
            ..gd::GdConfig::default()
        }
    }
}

/// Statistics in scaled units plus the matrix functions the updates reuse.
#[derive(Debug, Clone)]
pub struct PddProblem {
    pub stats: ChannelStats,
    /// `‖p‖² ≤ budget` in scaled units (`1/M_R`).
    pub budget: f64,
    /// Multiply scaled pilots by this to get physical ones.
    pub pilot_scale: f64,
    /// Multiply scaled MSE values by this to get physical ones.
    pub mse_scale: f64,
    rh_half: Vec<CMat>,
    rh_inv: Vec<(CMat, Schur)>,
    rg_half: CMat,
    rg_inv: (CMat, Schur),
    /// `Σ_B^{-1/2}`.
    sb_inv_half: CMat,
}

impl PddProblem {
    pub fn new(stats: &ChannelStats, p_max: f64) -> Result<Self> {
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::InvalidParameter("p_max must be positive".into()));
        }
        let (mut s, g, h) = stats.normalized();
        s.sigma_b_mat /= C64::new(p_max, 0.0);
        s.sigma_u_sq.iter_mut().for_each(|v| *v /= p_max);
        if s.sigma_u_sq.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("user noise powers must be positive".into()));
        }
        let inv_with_schur = |r: &CMat| -> Result<(CMat, Schur)> {
            let inv = inv_hpd(r)?;
            let schur = schur_form(&inv)?;
            Ok((inv, schur))
        };
        let rh_half = s.r_h.iter().map(matrix_sqrt_psd).collect::<Result<_>>()?;
        let rh_inv = s.r_h.iter().map(inv_with_schur).collect::<Result<_>>()?;
        let rg_half = matrix_sqrt_psd(&s.r_g)?;
        let rg_inv = inv_with_schur(&s.r_g)?;
        let sb_inv_half = matrix_sqrt_psd(&inv_hpd(&s.sigma_b_mat)?)?;
        Ok(Self {
            budget: 1.0 / s.m_r as f64,
            pilot_scale: p_max.sqrt(),
            mse_scale: g * h,
            stats: s,
            rh_half,
            rh_inv,
            rg_half,
            rg_inv,
            sb_inv_half,
        })
    }

    fn k(&self) -> usize {
        self.stats.k_users()
    }

    /// Physical pilot and receivers from scaled ones.
    pub fn unscale(&self, pilot: &PilotSequence, rx: &ReceiverSet) -> Result<(PilotSequence, ReceiverSet)> {
        let s = self.pilot_scale;
        let p = PilotSequence::new(pilot.phi.clone(), pilot.p.iter().map(|v| v * s).collect())?;
        let inv = C64::new(1.0 / s, 0.0);
        let rx = ReceiverSet {
            w_g: &rx.w_g * inv,
            w_h: rx.w_h.iter().map(|w| w * inv).collect(),
        };
        Ok((p, rx))
    }

    /// Scaled pilot from a physical one.
    pub fn scale(&self, pilot: &PilotSequence) -> Result<PilotSequence> {
        let s = self.pilot_scale;
        PilotSequence::new(pilot.phi.clone(), pilot.p.iter().map(|v| v / s).collect())
    }
}

/// Primal copies, multipliers and penalty.
#[derive(Debug, Clone)]
pub struct PddState {
    pub pilot: PilotSequence,
    pub rx: ReceiverSet,
    pub u1: Vec<CMat>,
    pub u2: CMat,
    pub u3: Vec<CMat>,
    pub u4: CMat,
    pub lambda1: Vec<CMat>,
    pub lambda2: CMat,
    pub lambda3: Vec<CMat>,
    pub lambda4: CMat,
    pub rho: f64,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn conj_kron_i(psi: &CMat, mb: usize) -> CMat {
    kron(&psi.conjugate(), &CMat::identity(mb, mb))
}

/// Right-hand sides `U_iᴿ` of the four copy constraints.
struct Targets {
    u1: CMat,
    u2: CMat,
    u3: Vec<CMat>,
    u4: CMat,
}

fn targets(pb: &PddProblem, st: &PddState) -> Targets {
    let psi = st.pilot.psi();
    Targets {
        u1: psi.conjugate(),
        u2: conj_kron_i(&psi, pb.stats.m_b),
        u3: (0..pb.k())
            .map(|k| &pb.rh_half[k] * &st.u1[k] * &st.rx.w_h[k])
            .collect(),
        u4: &pb.rg_half * &st.u2 * &st.rx.w_g,
    }
}

impl PddState {
    /// Copies that satisfy their definitions exactly, zero multipliers.
    pub fn initial(pb: &PddProblem, pilot: PilotSequence, rx: ReceiverSet, rho: f64) -> Self {
        let k = pb.k();
        let psi_c = pilot.psi().conjugate();
        let u1 = vec![psi_c; k];
        let u2 = conj_kron_i(&pilot.psi(), pb.stats.m_b);
        let u3: Vec<CMat> = (0..k).map(|i| &pb.rh_half[i] * &u1[i] * &rx.w_h[i]).collect();
        let u4 = &pb.rg_half * &u2 * &rx.w_g;
        Self {
            lambda1: u1.iter().map(|u| CMat::zeros(u.nrows(), u.ncols())).collect(),
            lambda2: CMat::zeros(u2.nrows(), u2.ncols()),
            lambda3: u3.iter().map(|u| CMat::zeros(u.nrows(), u.ncols())).collect(),
            lambda4: CMat::zeros(u4.nrows(), u4.ncols()),
            pilot,
            rx,
            u1,
            u2,
            u3,
            u4,
            rho,
        }
    }
}

/// `max‖U_i − U_iᴿ‖_max` for the four constraint groups.
pub fn violations(pb: &PddProblem, st: &PddState) -> [f64; 4] {
    let t = targets(pb, st);
    let worst = |a: &[CMat], b: &dyn Fn(usize) -> CMat| {
        a.iter()
            .enumerate()
            .map(|(k, u)| max_abs(&(u - b(k))))
            .fold(0.0, f64::max)
    };
    [
        worst(&st.u1, &|_| t.u1.clone()),
        max_abs(&(&st.u2 - &t.u2)),
        worst(&st.u3, &|k| t.u3[k].clone()),
        max_abs(&(&st.u4 - &t.u4)),
    ]
}

/// `bdt(diag(U₄ᴴU₄ + W_GᴴNW_G))`, one entry per RIS element.
fn f2_diag(pb: &PddProblem, st: &PddState) -> Vec<f64> {
    let mb = pb.stats.m_b;
    let t = st.pilot.slots();
    let n = st.u4.ncols();
    let mut d = vec![0.0; n];
    for (i, v) in d.iter_mut().enumerate() {
        *v = st.u4.column(i).norm_squared();
    }
    for s in 0..t {
        let wt = st.rx.w_g.rows(s * mb, mb);
        let sw = &pb.stats.sigma_b_mat * &wt;
        for (i, v) in d.iter_mut().enumerate() {
            *v += wt.column(i).dotc(&sw.column(i)).re;
        }
    }
    (0..pb.stats.m_r)
        .map(|m| d[m * mb..(m + 1) * mb].iter().sum())
        .collect()
}

/// `diag(U₃,kᴴU₃,k + σ_U,k² W_h,kᴴW_h,k)` per user.
fn f1_diag(pb: &PddProblem, st: &PddState) -> Vec<Vec<f64>> {
    (0..pb.k())
        .map(|k| {
            let s2 = pb.stats.sigma_u_sq[k];
            (0..pb.stats.m_r)
                .map(|m| st.u3[k].column(m).norm_squared() + s2 * st.rx.w_h[k].column(m).norm_squared())
                .collect()
        })
        .collect()
}

/// `Σ_k f1_k ⊗ 𝟙`, one entry per column of `U₄`.
fn d3_diag(pb: &PddProblem, st: &PddState) -> Vec<f64> {
    let f1 = f1_diag(pb, st);
    let mb = pb.stats.m_b;
    (0..pb.stats.m_r * mb)
        .map(|i| f1.iter().map(|f| f[i / mb]).sum())
        .collect()
}

/// Objective of the copy-variable reformulation, summed over users.
fn split_objective(pb: &PddProblem, st: &PddState) -> f64 {
    let s = &pb.stats;
    let mb = s.m_b;
    let f2 = f2_diag(pb, st);
    let f1 = f1_diag(pb, st);
    let x = &pb.rg_half * &st.u4;
    let mut total = 0.0;
    for k in 0..pb.k() {
        let y = &pb.rh_half[k] * &st.u3[k];
        for m in 0..s.m_r {
            let rg: f64 = (0..mb).map(|j| s.r_g[(m * mb + j, m * mb + j)].re).sum();
            let xm: C64 = (0..mb).map(|j| x[(m * mb + j, m * mb + j)]).sum();
            total += f2[m] * f1[k][m] + rg * s.r_h[k][(m, m)].re - 2.0 * (xm * y[(m, m)]).re;
        }
    }
    total
}

/// Augmented Lagrangian: split objective plus
/// `(1/2ρ) Σ_i ‖U_i − U_iᴿ + ρΛ_i‖²`.
pub fn augmented_objective(pb: &PddProblem, st: &PddState) -> f64 {
    let t = targets(pb, st);
    let rho = st.rho;
    let r = c(rho);
    let mut pen = 0.0;
    for k in 0..pb.k() {
        pen += (&st.u1[k] - &t.u1 + &st.lambda1[k] * r).norm_squared();
        pen += (&st.u3[k] - &t.u3[k] + &st.lambda3[k] * r).norm_squared();
    }
    pen += (&st.u2 - &t.u2 + &st.lambda2 * r).norm_squared();
    pen += (&st.u4 - &t.u4 + &st.lambda4 * r).norm_squared();
    split_objective(pb, st) + pen / (2.0 * rho)
}

/// User receivers: `(1/(2ρσ²)) U₁ᴴR_hU₁ W + W Diag(f₂) = (1/(2ρσ²)) U₁ᴴR_h^{1/2}(U₃ + ρΛ₃)`.
pub fn update_wh(pb: &PddProblem, st: &PddState) -> Result<Vec<CMat>> {
    let f2 = f2_diag(pb, st);
    let b = CMat::from_diagonal(&nalgebra::DVector::from_iterator(f2.len(), f2.iter().map(|&v| c(v))));
    (0..pb.k())
        .map(|k| {
            let s = c(1.0 / (2.0 * st.rho * pb.stats.sigma_u_sq[k]));
            let u1h = st.u1[k].adjoint();
            let a = hermitian_part(&(&u1h * &pb.stats.r_h[k] * &st.u1[k] * s));
            let rhs = u1h * &pb.rh_half[k] * (&st.u3[k] + &st.lambda3[k] * c(st.rho)) * s;
            SylvesterOperator::new(&a, &b)?.solve(&rhs)
        })
        .collect()
}

/// BS receiver. With `V = N^{1/2} W_G` the equation
/// `(1/2ρ) N⁻¹U₂ᴴR_GU₂ W + W D₃ = (1/2ρ) N⁻¹U₂ᴴR_G^{1/2}(U₄ + ρΛ₄)`
/// becomes a Hermitian Sylvester equation in `V`.
pub fn update_wg(pb: &PddProblem, st: &PddState) -> Result<CMat> {
    let t = st.pilot.slots();
    let n_ih = kron(&CMat::identity(t, t), &pb.sb_inv_half);
    let s = c(1.0 / (2.0 * st.rho));
    let m = &n_ih * st.u2.adjoint();
    let a = hermitian_part(&(&m * &pb.stats.r_g * m.adjoint() * s));
    let d3 = d3_diag(pb, st);
    let b = CMat::from_diagonal(&nalgebra::DVector::from_iterator(d3.len(), d3.iter().map(|&v| c(v))));
    let rhs = m * &pb.rg_half * (&st.u4 + &st.lambda4 * c(st.rho)) * s;
    let v = SylvesterOperator::new(&a, &b)?.solve(&rhs)?;
    Ok(n_ih * v)
}

/// `R_h⁻¹U₁ + U₁W_hW_hᴴ = R_h⁻¹(Ψ* − ρΛ₁ + R_h^{1/2}(U₃ + ρΛ₃)W_hᴴ)`.
pub fn update_u1(pb: &PddProblem, st: &PddState) -> Result<Vec<CMat>> {
    let psi_c = st.pilot.psi().conjugate();
    let r = c(st.rho);
    (0..pb.k())
        .map(|k| {
            let (inv, schur) = &pb.rh_inv[k];
            let w = &st.rx.w_h[k];
            let b = hermitian_part(&(w * w.adjoint()));
            let inner = &psi_c - &st.lambda1[k] * r
                + &pb.rh_half[k] * (&st.u3[k] + &st.lambda3[k] * r) * w.adjoint();
            SylvesterOperator::with_left(inv, schur.clone(), &b)?.solve(&(inv * inner))
        })
        .collect()
}

/// `R_G⁻¹U₂ + U₂W_GW_Gᴴ = R_G⁻¹(Ψ*⊗I − ρΛ₂ + R_G^{1/2}(U₄ + ρΛ₄)W_Gᴴ)`.
pub fn update_u2(pb: &PddProblem, st: &PddState) -> Result<CMat> {
    let (inv, schur) = &pb.rg_inv;
    let w = &st.rx.w_g;
    let b = hermitian_part(&(w * w.adjoint()));
    let r = c(st.rho);
    let inner = conj_kron_i(&st.pilot.psi(), pb.stats.m_b) - &st.lambda2 * r
        + &pb.rg_half * (&st.u4 + &st.lambda4 * r) * w.adjoint();
    SylvesterOperator::with_left(inv, schur.clone(), &b)?.solve(&(inv * inner))
}

fn scale_columns(m: &CMat, s: impl Fn(usize) -> C64) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= s(j);
    }
    out
}

fn diag_denominator(rho: f64, d: &[f64], what: &str) -> Result<Vec<f64>> {
    d.iter()
        .map(|&v| {
            let den = 1.0 / (2.0 * rho) + v;
            if den > 0.0 && den.is_finite() {
                Ok(den)
            } else {
                Err(Error::Singular(format!("{what} diagonal is not positive")))
            }
        })
        .collect()
}

/// `U₃,k = ((1/2ρ)R_h^{1/2}U₁W_h − Λ₃/2 + R_h^{1/2}Diag(x̄)) ((1/2ρ)I + Diag(f₂))⁻¹`
/// with `x = bdt(diag(R_G^{1/2}U₄))`.
pub fn update_u3(pb: &PddProblem, st: &PddState) -> Result<Vec<CMat>> {
    let mb = pb.stats.m_b;
    let x = &pb.rg_half * &st.u4;
    let xb: Vec<C64> = (0..pb.stats.m_r)
        .map(|m| (0..mb).map(|j| x[(m * mb + j, m * mb + j)]).sum())
        .collect();
    let den = diag_denominator(st.rho, &f2_diag(pb, st), "U3")?;
    let s = c(1.0 / (2.0 * st.rho));
    Ok((0..pb.k())
        .map(|k| {
            let num = &pb.rh_half[k] * &st.u1[k] * &st.rx.w_h[k] * s - &st.lambda3[k] * c(0.5)
                + scale_columns(&pb.rh_half[k], |j| xb[j].conj());
            scale_columns(&num, |j| c(1.0 / den[j]))
        })
        .collect())
}

/// `U₄ = ((1/2ρ)R_G^{1/2}U₂W_G − Λ₄/2 + R_G^{1/2}Diag(ξ̄)) ((1/2ρ)I + D₃)⁻¹`
/// with `ξ = Σ_k diag(R_h,k^{1/2}U₃,k) ⊗ 𝟙`.
pub fn update_u4(pb: &PddProblem, st: &PddState) -> Result<CMat> {
    let mb = pb.stats.m_b;
    let mut xi = vec![C64::new(0.0, 0.0); pb.stats.m_r];
    for k in 0..pb.k() {
        let y = &pb.rh_half[k] * &st.u3[k];
        for (m, v) in xi.iter_mut().enumerate() {
            *v += y[(m, m)];
        }
    }
    let den = diag_denominator(st.rho, &d3_diag(pb, st), "U4")?;
    let s = c(1.0 / (2.0 * st.rho));
    let num = &pb.rg_half * &st.u2 * &st.rx.w_g * s - &st.lambda4 * c(0.5)
        + scale_columns(&pb.rg_half, |j| xi[j / mb].conj());
    Ok(scale_columns(&num, |j| c(1.0 / den[j])))
}

/// `S = Σ_k (U₁,k + ρΛ₁,k) + bt(U₂ + ρΛ₂)`; the pilot terms of the augmented
/// Lagrangian are `(1/2ρ)((K + M_B)M_R‖p‖² − 2 Re Σ_ij S_ij Ψ_ij) + const`.
fn pilot_linear_term(pb: &PddProblem, st: &PddState) -> Result<CMat> {
    let r = c(st.rho);
    let mut s = block_trace(&(&st.u2 + &st.lambda2 * r), pb.stats.m_b)?;
    for k in 0..pb.k() {
        s += &st.u1[k] + &st.lambda1[k] * r;
    }
    Ok(s)
}

/// Unit-modulus maximizer of `Re Σ_ij S_ij Φ_ij`: `Φ_ij = e^{−j∠S_ij}`, with
/// phase 0 where `S_ij = 0`.
pub fn align_phases(s: &CMat) -> CMat {
    s.map(|z| {
        if z.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            z.conj() / z.norm()
        }
    })
}

/// Minimizer of `coeff·‖p‖² − 2qᵀp` over `{p ≥ 0, ‖p‖² ≤ budget}`.
pub fn solve_power_qp(q: &[f64], coeff: f64, budget: f64) -> Vec<f64> {
    let v: Vec<f64> = q.iter().map(|x| x / coeff).collect();
    project_power(&v, budget)
}

pub fn update_phi(pb: &PddProblem, st: &PddState) -> Result<CMat> {
    Ok(align_phases(&pilot_linear_term(pb, st)?))
}

/// Linear term `q` and quadratic coefficient of the amplitude subproblem
/// at the current phases.
pub fn power_qp_terms(pb: &PddProblem, st: &PddState) -> Result<(Vec<f64>, f64)> {
    let s = pilot_linear_term(pb, st)?;
    let phi = &st.pilot.phi;
    let q: Vec<f64> = (0..phi.ncols())
        .map(|j| (0..phi.nrows()).map(|i| (s[(i, j)] * phi[(i, j)]).re).sum())
        .collect();
    let coeff = ((pb.k() + pb.stats.m_b) * pb.stats.m_r) as f64;
    Ok((q, coeff))
}

pub fn update_p(pb: &PddProblem, st: &PddState) -> Result<Vec<f64>> {
    let (q, coeff) = power_qp_terms(pb, st)?;
    Ok(solve_power_qp(&q, coeff, pb.budget))
}

/// One inner sweep in the order `W_h, W_G, U₁, U₂, U₃, U₄, Φ, p`.
pub fn inner_sweep(pb: &PddProblem, st: &mut PddState) -> Result<()> {
    st.rx.w_h = update_wh(pb, st)?;
    st.rx.w_g = update_wg(pb, st)?;
    st.u1 = update_u1(pb, st)?;
    st.u2 = update_u2(pb, st)?;
    st.u3 = update_u3(pb, st)?;
    st.u4 = update_u4(pb, st)?;
    let phi = update_phi(pb, st)?;
    st.pilot = PilotSequence::new(phi, st.pilot.p.clone())?;
    let p = update_p(pb, st)?;
    st.pilot = PilotSequence::new(st.pilot.phi.clone(), p)?;
    Ok(())
}

/// Dual ascent on satisfied constraints, penalty shrink on violated ones.
/// Multipliers move by `(U_i − U_iᴿ)/ρ` with the penalty in force at the start
/// of the step.
pub fn pdd_outer(pb: &PddProblem, st: &mut PddState, cfg: &PddConfig) -> [f64; 4] {
    let t = targets(pb, st);
    let v = violations(pb, st);
    let inv = c(1.0 / st.rho);
    let mut shrinks = 0;
    for (i, &vi) in v.iter().enumerate() {
        if vi <= cfg.delta {
            match i {
                0 => {
                    for k in 0..pb.k() {
                        st.lambda1[k] += (&st.u1[k] - &t.u1) * inv;
                    }
                }
                1 => st.lambda2 += (&st.u2 - &t.u2) * inv,
                2 => {
                    for k in 0..pb.k() {
                        st.lambda3[k] += (&st.u3[k] - &t.u3[k]) * inv;
                    }
                }
                _ => st.lambda4 += (&st.u4 - &t.u4) * inv,
            }
        } else {
            shrinks += 1;
        }
    }
    let times = match cfg.shrink {
        ShrinkPolicy::PerConstraint => shrinks,
        ShrinkPolicy::Single => shrinks.min(1),
    };
    st.rho *= cfg.c_shrink.powi(times as i32);
    v
}

/// One record per outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PddIteration {
    pub outer: usize,
    pub inner_sweeps: usize,
    /// Augmented objective at the end of the inner loop (scaled units).
    pub augmented: f64,
    /// True objective at the current pilot and receivers (physical units).
    pub objective: f64,
    pub violations: [f64; 4],
    /// Penalty used during this iteration's inner loop.
    pub rho: f64,
}

impl PddIteration {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PddResult {
    pub pilot: PilotSequence,
    pub receivers: ReceiverSet,
    /// Objective of the returned pilot and receivers (physical units).
    pub objective: f64,
    /// Objective at the starting point with per-link LMMSE receivers.
    pub initial_objective: f64,
    pub trace: Vec<PddIteration>,
    /// Augmented objective after every inner sweep, grouped by outer iteration.
    pub inner_traces: Vec<Vec<f64>>,
    pub converged: bool,
}

pub fn run_pdd(stats: &ChannelStats, p_max: f64, cfg: &PddConfig) -> Result<PddResult> {
    cfg.validate()?;
    let pb = PddProblem::new(stats, p_max)?;
    let start = gd::initial_pilot(stats.m_r, p_max, &cfg.gd_view())?;
    if !start.is_feasible(p_max) {
        return Err(Error::InvalidParameter("initial pilot is infeasible".into()));
    }
    let pilot = pb.scale(&start)?;
    let rx = lmmse_receivers(&pilot, &pb.stats)?;
    let f0 = objective_with(&pilot, &pb.stats, &rx)?;
    let scale = if f0 > 0.0 { f0 } else { 1.0 };
    let mut st = PddState::initial(&pb, pilot, rx, cfg.rho0 * scale);

    let mut trace = Vec::new();
    let mut inner_traces = Vec::new();
    let mut best = (f0, st.pilot.clone(), st.rx.clone());
    let mut f_prev = f0;
    let mut converged = false;
    for outer in 1..=cfg.max_outer {
        let rho = st.rho;
        let mut aug = augmented_objective(&pb, &st);
        let mut sweeps = vec![aug];
        for _ in 0..cfg.max_inner {
            inner_sweep(&pb, &mut st)?;
            let next = augmented_objective(&pb, &st);
            sweeps.push(next);
            let rel = (aug - next).abs() / aug.abs().max(f64::MIN_POSITIVE);
            aug = next;
            if rel < cfg.tol_inner {
                break;
            }
        }
        let f = objective_with(&st.pilot, &pb.stats, &st.rx)?;
        if f < best.0 {
            best = (f, st.pilot.clone(), st.rx.clone());
        }
        let v = pdd_outer(&pb, &mut st, cfg);
        trace.push(PddIteration {
            outer,
            inner_sweeps: sweeps.len() - 1,
            augmented: aug,
            objective: f * pb.mse_scale,
            violations: v,
            rho,
        });
        inner_traces.push(sweeps);
        let rel = (f_prev - f).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if v.iter().all(|&x| x < cfg.delta) && rel < cfg.tol_rel_obj {
            converged = true;
            break;
        }
    }
    let (f, pilot, rx) = if converged {
        (f_prev, st.pilot.clone(), st.rx.clone())
    } else {
        best
    };
    let (pilot, receivers) = pb.unscale(&pilot, &rx)?;
    Ok(PddResult {
        pilot,
        receivers,
        objective: f * pb.mse_scale,
        initial_objective: f0 * pb.mse_scale,
        trace,
        inner_traces,
        converged,
    })
}
