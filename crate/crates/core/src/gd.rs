//! Block-coordinate descent on the average product-channel MSE.
//!
//! One outer sweep updates `W_G`, then every `W_h,k` (both in closed form),
//! then the phases `Θ` by gradient descent, then the amplitudes `p` by
//! projected gradient descent. With the backtracking rule every block step is
//! a descent step, so the objective trace is nonincreasing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelStats;
use crate::cxlinalg::{rng_for, solve_hpd, CMat, C64};
use crate::error::{Error, Result};
use crate::estimation::{
    bs_observation_covariance, lmmse_receivers, measurement_matrix, user_observation_covariance,
    PilotSequence, ReceiverSet,
};

/// Largest number of halvings tried by one backtracking search.
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// Fixed step on the objective divided by its starting value.
    Constant { eta: f64 },
    /// Armijo backtracking. The first trial moves the largest phase by
    /// `initial` radians (or the largest amplitude by `initial·√budget`).
    Backtracking { beta: f64, c1: f64, initial: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            beta: 0.5,
            c1: 1e-4,
            initial: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPilot {
    /// DFT phases, uniform amplitudes using the whole budget.
    #[default]
    Dft,
    /// Uniform random phases drawn from `GdConfig::seed`.
    Random,
    #[serde(skip)]
    Given { pilot: PilotSequence },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub max_outer_iters: usize,
    pub inner_theta_iters: usize,
    pub inner_p_iters: usize,
    pub step_rule: StepRule,
    pub tol_rel_obj: f64,
    pub seed: u64,
    /// Number of training slots `T` for generated initial pilots.
    pub slots: Option<usize>,
    pub initial: InitialPilot,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            inner_theta_iters: 20,
            inner_p_iters: 20,
            step_rule: StepRule::default(),
            tol_rel_obj: 1e-6,
            seed: crate::channel::DEFAULT_SEED,
            slots: None,
            initial: InitialPilot::Dft,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self.step_rule {
            StepRule::Constant { eta } if !(eta > 0.0 && eta.is_finite()) => {
                return bad("constant step must be positive")
            }
            StepRule::Backtracking { beta, c1, initial }
                if !(beta > 0.0 && beta < 1.0 && c1 > 0.0 && c1 < 1.0 && initial > 0.0) =>
            {
                return bad("backtracking needs 0 < beta < 1, 0 < c1 < 1, initial > 0")
            }
            _ => {}
        }
        if !(self.tol_rel_obj > 0.0) {
            return bad("tol_rel_obj must be positive");
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be at least 1");
        }
        if self.slots == Some(0) {
            return bad("slots must be at least 1");
        }
        Ok(())
    }
}

/// Diagonal quantities the objective and its gradient are built from,
/// computed with the Kronecker structure of `A = Ψᵀ ⊗ I` exploited.
struct Terms {
    /// `E{g ĝᴴ} = R_G Aᴴ W_G`.
    x: CMat,
    /// `bdt(C_Ĝ)`.
    gamma: Vec<f64>,
    /// `bdt(X)`.
    chi: Vec<C64>,
    /// `diag(C_ĥ,k)` per user.
    ch: Vec<Vec<f64>>,
    /// `diag(E{h_k ĥ_kᴴ})` per user.
    y: Vec<Vec<C64>>,
    /// `E{h_k ĥ_kᴴ}` per user.
    y_full: Vec<CMat>,
}

/// `(Ψ* ⊗ I_nb) W`.
fn apply_a_adj(psi: &CMat, w: &CMat, nb: usize) -> CMat {
    let (mr, t) = psi.shape();
    let mut out = CMat::zeros(mr * nb, w.ncols());
    for j in 0..w.ncols() {
        for m in 0..mr {
            for s in 0..t {
                let c = psi[(m, s)].conj();
                for b in 0..nb {
                    out[(m * nb + b, j)] += c * w[(s * nb + b, j)];
                }
            }
        }
    }
    out
}

fn check_receivers(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<()> {
    let (mb, mr, t) = (stats.m_b, stats.m_r, pilot.slots());
    let ok = pilot.m_r() == mr
        && rx.w_g.shape() == (t * mb, mr * mb)
        && rx.w_h.len() == stats.k_users()
        && rx.w_h.iter().all(|w| w.shape() == (t, mr));
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "receivers do not match M_B = {mb}, M_R = {mr}, T = {t}, K = {}",
            stats.k_users()
        )))
    }
}

fn terms(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<Terms> {
    check_receivers(pilot, stats, rx)?;
    let (mb, mr, t) = (stats.m_b, stats.m_r, pilot.slots());
    let psi = pilot.psi();
    let b = apply_a_adj(&psi, &rx.w_g, mb);
    let x = &stats.r_g * &b;
    let n = mr * mb;
    let mut cg = vec![0.0; n];
    for (i, c) in cg.iter_mut().enumerate() {
        *c = b.column(i).dotc(&x.column(i)).re;
    }
    for s in 0..t {
        let wt = rx.w_g.rows(s * mb, mb);
        let sw = &stats.sigma_b_mat * &wt;
        for (i, c) in cg.iter_mut().enumerate() {
            *c += wt.column(i).dotc(&sw.column(i)).re;
        }
    }
    let fold = |v: &dyn Fn(usize) -> C64| -> Vec<C64> {
        (0..mr).map(|m| (0..mb).map(|j| v(m * mb + j)).sum()).collect()
    };
    let gamma = fold(&|i| C64::new(cg[i], 0.0)).iter().map(|z| z.re).collect();
    let chi = fold(&|i| x[(i, i)]);
    let psi_c = psi.conjugate();
    let psi_t = psi.transpose();
    let mut ch = Vec::with_capacity(stats.k_users());
    let mut y = Vec::with_capacity(stats.k_users());
    let mut y_full = Vec::with_capacity(stats.k_users());
    for k in 0..stats.k_users() {
        let w = &rx.w_h[k];
        let yk = &stats.r_h[k] * &psi_c * w;
        let pw = &psi_c * w;
        let s_w = &psi_t * (&stats.r_h[k] * &pw) + w * C64::new(stats.sigma_u_sq[k], 0.0);
        ch.push((0..mr).map(|m| w.column(m).dotc(&s_w.column(m)).re).collect());
        y.push((0..mr).map(|m| yk[(m, m)]).collect());
        y_full.push(yk);
    }
    Ok(Terms {
        x,
        gamma,
        chi,
        ch,
        y,
        y_full,
    })
}

fn objective_of(stats: &ChannelStats, tm: &Terms) -> f64 {
    let (mb, mr) = (stats.m_b, stats.m_r);
    let rg: Vec<f64> = (0..mr)
        .map(|m| (0..mb).map(|j| stats.r_g[(m * mb + j, m * mb + j)].re).sum())
        .collect();
    let total: f64 = (0..stats.k_users())
        .map(|k| {
            (0..mr)
                .map(|m| {
                    rg[m] * stats.r_h[k][(m, m)].re + tm.gamma[m] * tm.ch[k][m]
                        - 2.0 * (tm.chi[m] * tm.y[k][m]).re
                })
                .sum::<f64>()
        })
        .sum();
    total / stats.k_users() as f64
}

/// Objective at fixed receivers (same value as `objective_p1`).
pub fn objective_with(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<f64> {
    Ok(objective_of(stats, &terms(pilot, stats, rx)?))
}

/// Diagonal weights of the receiver subproblems: `d = Σ_k diag(C_ĥ,k) ⊗ 𝟙`,
/// `ξ = Σ_k diag(E{h_k ĥ_kᴴ}) ⊗ 𝟙`, `γ = bdt(C_Ĝ)`, `χ = bdt(E{g ĝᴴ})`.
struct Weights {
    d: Vec<f64>,
    xi: Vec<C64>,
    gamma: Vec<f64>,
    chi: Vec<C64>,
}

fn weights_of(stats: &ChannelStats, tm: &Terms) -> Weights {
    let (mb, mr) = (stats.m_b, stats.m_r);
    let mut d = vec![0.0; mr * mb];
    let mut xi = vec![C64::new(0.0, 0.0); mr * mb];
    for m in 0..mr {
        let dm: f64 = tm.ch.iter().map(|c| c[m]).sum();
        let xm: C64 = tm.y.iter().map(|y| y[m]).sum();
        for b in 0..mb {
            d[m * mb + b] = dm;
            xi[m * mb + b] = xm;
        }
    }
    Weights {
        d,
        xi,
        gamma: tm.gamma.clone(),
        chi: tm.chi.clone(),
    }
}

fn scale_columns(m: &CMat, s: impl Fn(usize) -> C64) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= s(j);
    }
    out
}

fn strided_rows(m: &CMat, offset: usize, stride: usize) -> CMat {
    m.select_rows((offset..m.nrows()).step_by(stride).collect::<Vec<_>>().iter())
}

fn strided_columns(m: &CMat, offset: usize, stride: usize) -> CMat {
    m.select_columns((offset..m.ncols()).step_by(stride).collect::<Vec<_>>().iter())
}

fn grad_from_terms(stats: &ChannelStats, rx: &ReceiverSet, tm: &Terms) -> CMat {
    let w = weights_of(stats, tm);
    let mb = stats.m_b;
    let two = C64::new(2.0, 0.0);
    // BS-side terms through A = Ψᵀ ⊗ I:
    // 2 bt(X D₂ W_Gᴴ) − 2 bt(W_G Diag(ξ) R_G)ᴴ.
    let xd2 = scale_columns(&tm.x, |j| C64::new(w.d[j], 0.0));
    let wg_xi = scale_columns(&rx.w_g, |j| w.xi[j]);
    let mut e = CMat::zeros(stats.m_r, rx.w_g.nrows() / mb);
    for b in 0..mb {
        let xb = strided_rows(&xd2, b, mb);
        let wb = strided_rows(&rx.w_g, b, mb);
        let vb = strided_rows(&wg_xi, b, mb);
        let rb = strided_columns(&stats.r_g, b, mb);
        e += (xb * wb.adjoint() - (vb * rb).adjoint()) * two;
    }
    // User-side terms through Ψᵀ and Ψ*.
    for k in 0..stats.k_users() {
        let y_gamma = scale_columns(&tm.y_full[k], |j| C64::new(w.gamma[j], 0.0));
        let wh_chi = scale_columns(&rx.w_h[k], |j| w.chi[j]);
        e += (y_gamma * rx.w_h[k].adjoint()) * two - (wh_chi * &stats.r_h[k]).adjoint() * two;
    }
    e / C64::new(stats.k_users() as f64, 0.0)
}

/// `E` with `df = Re Σ_ij E_ij dΨ_ij` for the objective at fixed receivers.
pub fn grad_psi(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<CMat> {
    let tm = terms(pilot, stats, rx)?;
    Ok(grad_from_terms(stats, rx, &tm))
}

fn theta_from_e(e: &CMat, psi: &CMat) -> DMatrix<f64> {
    DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| {
        (e[(i, j)] * C64::new(0.0, 1.0) * psi[(i, j)]).re
    })
}

fn p_from_e(e: &CMat, phi: &CMat) -> Vec<f64> {
    (0..e.ncols())
        .map(|j| (0..e.nrows()).map(|i| (e[(i, j)] * phi[(i, j)]).re).sum())
        .collect()
}

/// Gradient of the objective with respect to the phases `Θ` (receivers fixed).
pub fn grad_theta(
    pilot: &PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
) -> Result<DMatrix<f64>> {
    let e = grad_psi(pilot, stats, rx)?;
    Ok(theta_from_e(&e, &pilot.psi()))
}

/// Gradient of the objective with respect to the amplitudes `p`.
pub fn grad_p(pilot: &PilotSequence, stats: &ChannelStats, rx: &ReceiverSet) -> Result<Vec<f64>> {
    let e = grad_psi(pilot, stats, rx)?;
    Ok(p_from_e(&e, &pilot.phi))
}

/// Euclidean projection onto `{x ≥ 0, ‖x‖² ≤ budget}`.
pub fn project_power(p: &[f64], budget: f64) -> Vec<f64> {
    let mut x: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = budget.max(0.0).sqrt();
    if norm > radius {
        let s = radius / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
    x
}

/// Replaces exact zeros of a nonnegative diagonal by `1e-12·max`.
fn regularize(d: &mut [f64], what: &str) -> Result<()> {
    let top = d.iter().fold(0.0f64, |a, &v| a.max(v));
    if !(top > 0.0) {
        return Err(Error::Singular(format!("{what} diagonal is zero")));
    }
    for v in d.iter_mut() {
        if *v <= 0.0 {
            *v = 1e-12 * top;
        }
    }
    Ok(())
}

/// Minimizer over `W_G` with the user receivers held fixed:
/// `W_G = S_G⁻¹ A R_G Diag(ξ)ᴴ D₂⁻¹`.
pub fn update_wg(pilot: &PilotSequence, stats: &ChannelStats, w_h: &[CMat]) -> Result<CMat> {
    let t = pilot.slots();
    let a = measurement_matrix(pilot, stats.m_b);
    // Only the user-side moments are needed; W_G is a placeholder here.
    let rx = ReceiverSet {
        w_g: CMat::zeros(t * stats.m_b, stats.m_r * stats.m_b),
        w_h: w_h.to_vec(),
    };
    let mut w = weights_of(stats, &terms(pilot, stats, &rx)?);
    regularize(&mut w.d, "D_G2")?;
    let s_g = bs_observation_covariance(&a, stats, t);
    let j_g = solve_hpd(&s_g, &(&a * &stats.r_g))?;
    Ok(scale_columns(&j_g, |j| w.xi[j].conj() / w.d[j]))
}

/// Minimizers over every `W_h,k` with `W_G` held fixed:
/// `W_h,k = S_h,k⁻¹ Ψᵀ R_h,k Diag(χ)ᴴ Diag(γ)⁻¹`.
pub fn update_wh(pilot: &PilotSequence, stats: &ChannelStats, w_g: &CMat) -> Result<Vec<CMat>> {
    let t = pilot.slots();
    let rx = ReceiverSet {
        w_g: w_g.clone(),
        w_h: vec![CMat::zeros(t, stats.m_r); stats.k_users()],
    };
    let mut w = weights_of(stats, &terms(pilot, stats, &rx)?);
    regularize(&mut w.gamma, "D_h2")?;
    let psi_t = pilot.psi().transpose();
    (0..stats.k_users())
        .map(|k| {
            let s_h = user_observation_covariance(&psi_t, stats, k);
            let j_h = solve_hpd(&s_h, &(&psi_t * &stats.r_h[k]))?;
            Ok(scale_columns(&j_h, |j| w.chi[j].conj() / w.gamma[j]))
        })
        .collect()
}

/// One record of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdIteration {
    pub iter: usize,
    /// Objective after the sweep, in the units of the input statistics.
    pub objective: f64,
    /// Largest phase change of the sweep (radians).
    pub theta_step: f64,
    /// Largest amplitude change of the sweep.
    pub p_step: f64,
    /// `‖ΦP‖_F²`.
    pub energy: f64,
    /// `max |1 − |Φ_ij||`.
    pub unit_modulus_residual: f64,
}

#[derive(Debug, Clone)]
pub struct GdResult {
    pub pilot: PilotSequence,
    pub receivers: ReceiverSet,
    /// Entry 0 is the starting point (per-link LMMSE receivers).
    pub trace: Vec<GdIteration>,
    pub converged: bool,
}

impl GdResult {
    pub fn objective(&self) -> f64 {
        self.trace.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }
}

/// Uniform amplitudes spending the full budget over `t` slots.
pub fn uniform_amplitudes(m_r: usize, t: usize, p_max: f64) -> Vec<f64> {
    vec![(p_max / (m_r * t) as f64).sqrt(); t]
}

pub fn initial_pilot(m_r: usize, p_max: f64, cfg: &GdConfig) -> Result<PilotSequence> {
    let t = cfg.slots.unwrap_or(m_r);
    match &cfg.initial {
        InitialPilot::Dft => {
            let f = crate::estimation::dft_matrix(m_r.max(t));
            let phi = f.view((0, 0), (m_r, t)).into_owned();
            PilotSequence::new(phi, uniform_amplitudes(m_r, t, p_max))
        }
        InitialPilot::Random => {
            use rand::Rng;
            let mut rng = rng_for(cfg.seed, 0x6744);
            let theta = DMatrix::from_fn(m_r, t, |_, _| {
                rng.random_range(0.0..std::f64::consts::TAU)
            });
            PilotSequence::from_phases(&theta, uniform_amplitudes(m_r, t, p_max))
        }
        InitialPilot::Given { pilot } => {
            if pilot.m_r() != m_r {
                return Err(Error::Dimension(format!(
                    "initial pilot has {} rows, M_R = {m_r}",
                    pilot.m_r()
                )));
            }
            Ok(pilot.clone())
        }
    }
}

fn max_abs_real(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn unit_modulus_residual(phi: &CMat) -> f64 {
    max_abs_real(phi.iter().map(|z| 1.0 - z.norm()))
}

fn with_theta(pilot: &PilotSequence, theta: &DMatrix<f64>) -> Result<PilotSequence> {
    PilotSequence::from_phases(theta, pilot.p.clone())
}

fn with_p(pilot: &PilotSequence, p: Vec<f64>) -> Result<PilotSequence> {
    PilotSequence::new(pilot.phi.clone(), p)
}

/// First trial step: one expansion of the last accepted step, never beyond
/// the configured initial step.
fn warm_start(cap: f64, last: Option<f64>, beta: f64) -> f64 {
    match last {
        Some(a) => cap.min(a / beta),
        None => cap,
    }
}

/// Gradient steps on `Θ`; returns the largest accumulated phase change.
fn theta_block(
    pilot: &mut PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
    cfg: &GdConfig,
    f_scale: f64,
    memory: &mut Option<f64>,
) -> Result<f64> {
    let theta0 = pilot.theta();
    let mut f = objective_with(pilot, stats, rx)?;
    for _ in 0..cfg.inner_theta_iters {
        let theta = pilot.theta();
        let g = grad_theta(pilot, stats, rx)?;
        let gmax = g.amax();
        if !(gmax > 0.0) {
            break;
        }
        match cfg.step_rule {
            StepRule::Constant { eta } => {
                *pilot = with_theta(pilot, &(&theta - &g * (eta / f_scale)))?;
            }
            StepRule::Backtracking { beta, c1, initial } => {
                let g2 = g.norm_squared();
                let mut alpha = warm_start(initial / gmax, *memory, beta);
                let mut accepted = None;
                for _ in 0..MAX_BACKTRACKS {
                    let cand = with_theta(pilot, &(&theta - &g * alpha))?;
                    let fc = objective_with(&cand, stats, rx)?;
                    if fc <= f - c1 * alpha * g2 {
                        *memory = Some(alpha);
                        accepted = Some((cand, fc));
                        break;
                    }
                    alpha *= beta;
                }
                match accepted {
                    Some((cand, fc)) => {
                        *pilot = cand;
                        f = fc;
                    }
                    None => break,
                }
            }
        }
    }
    Ok((pilot.theta() - theta0).amax())
}

/// Projected gradient steps on `p`; returns the largest amplitude change.
fn p_block(
    pilot: &mut PilotSequence,
    stats: &ChannelStats,
    rx: &ReceiverSet,
    cfg: &GdConfig,
    budget: f64,
    f_scale: f64,
    memory: &mut Option<f64>,
) -> Result<f64> {
    let p0 = pilot.p.clone();
    let mut f = objective_with(pilot, stats, rx)?;
    for _ in 0..cfg.inner_p_iters {
        let g = grad_p(pilot, stats, rx)?;
        let gmax = max_abs_real(g.iter().copied());
        if !(gmax > 0.0) {
            break;
        }
        let step = |alpha: f64| -> Vec<f64> {
            let raw: Vec<f64> = pilot.p.iter().zip(&g).map(|(x, d)| x - alpha * d).collect();
            project_power(&raw, budget)
        };
        match cfg.step_rule {
            StepRule::Constant { eta } => {
                let next = step(eta / f_scale);
                *pilot = with_p(pilot, next)?;
            }
            StepRule::Backtracking { beta, c1, initial } => {
                let mut alpha = warm_start(initial * budget.sqrt() / gmax, *memory, beta);
                let mut accepted = None;
                for _ in 0..MAX_BACKTRACKS {
                    let next = step(alpha);
                    let decrease: f64 = g.iter().zip(&next).zip(&pilot.p).map(|((d, a), b)| d * (a - b)).sum();
                    if decrease >= 0.0 {
                        // Projection returned the current point: stationary.
                        break;
                    }
                    let cand = with_p(pilot, next)?;
                    let fc = objective_with(&cand, stats, rx)?;
                    if fc <= f + c1 * decrease {
                        *memory = Some(alpha);
                        accepted = Some((cand, fc));
                        break;
                    }
                    alpha *= beta;
                }
                match accepted {
                    Some((cand, fc)) => {
                        *pilot = cand;
                        f = fc;
                    }
                    None => break,
                }
            }
        }
    }
    Ok(max_abs_real(pilot.p.iter().zip(&p0).map(|(a, b)| a - b)))
}

/// Runs the block-coordinate descent from the configured initial pilot.
/// Internally the statistics are normalized by their average gains; the
/// reported objectives are in the original units.
pub fn run_gd(stats: &ChannelStats, p_max: f64, cfg: &GdConfig) -> Result<GdResult> {
    cfg.validate()?;
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::InvalidParameter("p_max must be positive".into()));
    }
    let (ns, g, h) = stats.normalized();
    let unit = g * h;
    let budget = p_max / stats.m_r as f64;
    let mut pilot = initial_pilot(stats.m_r, p_max, cfg)?;
    if !pilot.is_feasible(p_max) {
        return Err(Error::InvalidParameter("initial pilot is infeasible".into()));
    }
    let mut rx = lmmse_receivers(&pilot, &ns)?;
    let f0 = objective_with(&pilot, &ns, &rx)?;
    let f_scale = if f0 > 0.0 { f0 } else { 1.0 };
    let record = |iter, f: f64, pilot: &PilotSequence, dt, dp| GdIteration {
        iter,
        objective: f * unit,
        theta_step: dt,
        p_step: dp,
        energy: pilot.energy(),
        unit_modulus_residual: unit_modulus_residual(&pilot.phi),
    };
    let mut trace = vec![record(0, f0, &pilot, 0.0, 0.0)];
    let mut f_prev = f0;
    let mut converged = false;
    let (mut mem_theta, mut mem_p) = (None, None);
    for iter in 1..=cfg.max_outer_iters {
        rx.w_g = update_wg(&pilot, &ns, &rx.w_h)?;
        rx.w_h = update_wh(&pilot, &ns, &rx.w_g)?;
        let dt = theta_block(&mut pilot, &ns, &rx, cfg, f_scale, &mut mem_theta)?;
        let dp = p_block(&mut pilot, &ns, &rx, cfg, budget, f_scale, &mut mem_p)?;
        let f = objective_with(&pilot, &ns, &rx)?;
        trace.push(record(iter, f, &pilot, dt, dp));
        let rel = (f_prev - f).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f;
        if rel < cfg.tol_rel_obj {
            converged = true;
            break;
        }
    }
    Ok(GdResult {
        pilot,
        receivers: rx,
        trace,
        converged,
    })
}
