//! Primal-dual interior-point solver: slack variables, log-barrier
//! subproblems, Newton steps on the reduced symmetric KKT system with
//! inertia correction, fraction-to-boundary stepping and two barrier
//! update rules.

mod barrier;
#[cfg(test)]
pub(crate) mod test_problems;

pub use barrier::{BarrierProblem, BoundRow};

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::grid::Network;
use crate::opf::{build_nlp, initial_guess, Formulation, NlpProblem, OpfError, Start};
use crate::sparse::{norm_inf, Csr, Inertia, SparseError, SparseSym, SymIndefSolver};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_XI: f64 = 0.99995;
const SLACK_FLOOR: f64 = 1e-2;
const DELTA_G: f64 = 1e-10;
const DELTA_X_CAP: f64 = 1e8;
const STALL_FACTOR: f64 = 1e3;
const STALL_LIMIT: usize = 50;
const MAX_STEP_HALVINGS: usize = 10;

/// Barrier parameter update strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MuRule {
    /// mu' = sigma (s' lam_h) / m_ineq, every iteration.
    ScaledComplementarity { sigma: f64 },
    /// Monotone decrease mu' = max(tol/10, min(kappa mu, mu^theta)),
    /// applied only once the mu-subproblem is solved to 10 mu.
    MonotoneFM { kappa: f64, theta: f64 },
}

impl Default for MuRule {
    fn default() -> Self {
        MuRule::ScaledComplementarity { sigma: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub xi: f64,
    /// Initial barrier parameter; None resolves to 1.0 (or 1e-2 for warm
    /// starts when going through `solve_opf`).
    pub mu0: Option<f64>,
    pub mu_rule: MuRule,
    pub step_control: bool,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub verbose: bool,
    /// Record the worst reduced-step block residual (diagnostic).
    pub check_step_blocks: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            xi: DEFAULT_XI,
            mu0: None,
            mu_rule: MuRule::default(),
            step_control: true,
            time_limit: None,
            verbose: false,
            check_step_blocks: false,
        }
    }
}

impl SolveOptions {
    /// Default options with the start-dependent initial barrier: warm
    /// starts begin much closer to zero.
    pub fn for_start(start: Start) -> Self {
        SolveOptions {
            mu0: Some(match start {
                Start::Flat => 1.0,
                Start::CaseData | Start::PfSolve => 1e-2,
            }),
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    TimeLimit,
    NumericalFailure,
    Infeasible,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KktConditions {
    pub feas: f64,
    pub grad: f64,
    pub comp: f64,
    pub cost: f64,
}

impl KktConditions {
    pub fn all_below(&self, tol: f64) -> bool {
        self.feas <= tol && self.grad <= tol && self.comp <= tol && self.cost <= tol
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub f: f64,
    pub lam_g: Vec<f64>,
    pub lam_h: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktConditions,
    pub wall_time: f64,
    pub peak_mem: usize,
    pub factorizations: usize,
    /// Smallest slack / inequality dual over all accepted iterates.
    pub min_slack: f64,
    pub min_dual: f64,
    /// Worst scaled residual of the recovered step in the four KKT block
    /// equations, when `check_step_blocks` is on.
    pub max_block_residual: Option<f64>,
    pub failure: Option<String>,
}

/// Primal-dual iterate of the barrier problem.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub lam_g: Vec<f64>,
    pub lam_h: Vec<f64>,
    pub mu: f64,
    pub k: usize,
}

/// KKT residual blocks in the `L = f - mu ln s + lam_g' g + lam_h' (h+s)`
/// convention: r_x is the stationarity row, r_s the complementarity row
/// postmultiplied by S, r_g and r_h the primal rows.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub r_x: Vec<f64>,
    pub r_s: Vec<f64>,
    pub r_g: Vec<f64>,
    pub r_h: Vec<f64>,
}

impl Residuals {
    pub fn stacked_norm(&self) -> f64 {
        norm_inf(&self.r_x)
            .max(norm_inf(&self.r_s))
            .max(norm_inf(&self.r_g))
            .max(norm_inf(&self.r_h))
    }
}

/// Newton direction on the barrier problem.
#[derive(Debug, Clone)]
pub struct Step {
    pub dx: Vec<f64>,
    pub ds: Vec<f64>,
    pub dlam_g: Vec<f64>,
    pub dlam_h: Vec<f64>,
    /// Final (1,1)-block regularization used, 0 when none was needed.
    pub delta_x: f64,
    pub factorizations: usize,
}

struct Eval {
    f: f64,
    grad: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    jg: Csr<f64>,
    jh: Csr<f64>,
}

fn evaluate(bar: &BarrierProblem, x: &[f64]) -> Result<Eval, OpfError> {
    Ok(Eval {
        f: bar.eval_f(x)?,
        grad: bar.eval_grad_f(x)?,
        g: bar.eval_g(x)?,
        h: bar.eval_h(x)?,
        jg: bar.eval_jg(x)?,
        jh: bar.eval_jh(x)?,
    })
}

/// Residuals of the problem `min obj_w f(x)` at the iterate; the solver
/// loop runs on an internally scaled objective and unscales at exit.
fn residuals_scaled(ev: &Eval, st: &IterateState, obj_w: f64) -> Residuals {
    let mut r_x: Vec<f64> = ev.grad.iter().map(|g| obj_w * g).collect();
    let jg_l = ev.jg.matvec_transposed(&st.lam_g);
    let jh_l = ev.jh.matvec_transposed(&st.lam_h);
    for i in 0..r_x.len() {
        r_x[i] += jg_l[i] + jh_l[i];
    }
    let r_s: Vec<f64> = st
        .s
        .iter()
        .zip(&st.lam_h)
        .map(|(&s, &l)| l * s - st.mu)
        .collect();
    let r_h: Vec<f64> = ev.h.iter().zip(&st.s).map(|(&h, &s)| h + s).collect();
    Residuals { r_x, r_s, r_g: ev.g.clone(), r_h }
}

/// KKT residual blocks at an iterate (standalone, unscaled evaluation).
pub fn kkt_residuals(bar: &BarrierProblem, st: &IterateState) -> Result<Residuals, OpfError> {
    let ev = evaluate(bar, &st.x)?;
    Ok(residuals_scaled(&ev, st, 1.0))
}

/// Fraction-to-boundary step cap keeping `v + alpha dv` strictly positive.
pub fn fraction_to_boundary(v: &[f64], dv: &[f64], xi: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (&vi, &di) in v.iter().zip(dv) {
        if di < 0.0 {
            alpha = alpha.min(xi * (-vi / di));
        }
    }
    alpha.min(1.0)
}

/// Barrier parameter update. `sub_res_max` is the stacked residual norm of
/// the current mu-subproblem, used by the monotone rule's trigger.
pub fn update_mu(rule: MuRule, mu: f64, s: &[f64], lam_h: &[f64], tol: f64, sub_res_max: f64) -> f64 {
    if s.is_empty() {
        return mu;
    }
    match rule {
        MuRule::ScaledComplementarity { sigma } => {
            let dot: f64 = s.iter().zip(lam_h).map(|(a, b)| a * b).sum();
            sigma * dot / s.len() as f64
        }
        MuRule::MonotoneFM { kappa, theta } => {
            if sub_res_max <= 10.0 * mu {
                (tol / 10.0).max((kappa * mu).min(mu.powf(theta)))
            } else {
                mu
            }
        }
    }
}

#[derive(Debug)]
enum StepFailure {
    Factorization(SparseError),
    Eval(OpfError),
}

impl std::fmt::Display for StepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepFailure::Factorization(e) => write!(f, "factorization: {e}"),
            StepFailure::Eval(e) => write!(f, "evaluation: {e}"),
        }
    }
}

/// Computes the Newton direction by eliminating (ds, dlam_h) and solving
/// the reduced symmetric system
/// `[[H + Jh' Sigma Jh, Jg'], [Jg, 0]] [dx; dlam_g] = [rhs_x; -r_g]`
/// with inertia correction toward (n, m_eq, 0).
pub fn newton_step<S: SymIndefSolver>(
    bar: &BarrierProblem,
    st: &IterateState,
    solver: &mut S,
    prepared: &mut bool,
) -> Result<Step, String> {
    let ev = evaluate(bar, &st.x).map_err(|e| e.to_string())?;
    let res = residuals_scaled(&ev, st, 1.0);
    newton_step_cached(bar, &ev, &res, st, 1.0, solver, prepared, &mut 0, 0.0)
        .map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn newton_step_cached<S: SymIndefSolver>(
    bar: &BarrierProblem,
    ev: &Eval,
    res: &Residuals,
    st: &IterateState,
    obj_w: f64,
    solver: &mut S,
    prepared: &mut bool,
    kkt_nnz: &mut usize,
    warm_delta: f64,
) -> Result<Step, StepFailure> {
    let n = bar.n_vars();
    let m_eq = bar.n_eq();
    let m_ineq = bar.n_ineq();
    let dim = n + m_eq;

    let h_tr = bar
        .eval_hess(&st.x, obj_w, &st.lam_g, &st.lam_h)
        .map_err(StepFailure::Eval)?;
    let h_norm = {
        let mut row_sums = vec![0.0f64; n];
        for &(r, c, v) in &h_tr {
            row_sums[r] += v.abs();
            if r != c {
                row_sums[c] += v.abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    };

    let sigma: Vec<f64> = st.lam_h.iter().zip(&st.s).map(|(&l, &s)| l / s).collect();

    let mut base = h_tr.clone();
    for r in 0..m_ineq {
        let row: Vec<(usize, f64)> = ev.jh.row(r).collect();
        for (i, &(ci, vi)) in row.iter().enumerate() {
            for &(cj, vj) in &row[i..] {
                let (hi, lo) = if ci >= cj { (ci, cj) } else { (cj, ci) };
                base.push((hi, lo, vi * sigma[r] * vj));
            }
        }
    }
    for (r, c, v) in ev.jg.iter() {
        base.push((n + r, c, v));
    }
    *kkt_nnz = base.len();

    if !*prepared {
        let pattern: Vec<(usize, usize)> = base.iter().map(|&(r, c, _)| (r, c)).collect();
        solver.prepare(dim, &pattern);
        *prepared = true;
    }

    // rhs of the reduced system
    let aux: Vec<f64> = (0..m_ineq)
        .map(|r| (st.lam_h[r] * res.r_h[r] - res.r_s[r]) / st.s[r])
        .collect();
    let jh_aux = ev.jh.matvec_transposed(&aux);
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = -res.r_x[i] - jh_aux[i];
    }
    for r in 0..m_eq {
        rhs[n + r] = -res.r_g[r];
    }

    let want = Inertia { pos: n, neg: m_eq, zero: 0 };
    // the unregularized system is always tried first; when it fails, the
    // escalation ladder re-enters near the previous iteration's shift
    let delta_floor = 1e-8 * (1.0 + h_norm);
    let mut delta_x = 0.0f64;
    let mut factorizations = 0;
    loop {
        let mut tr = base.clone();
        if delta_x > 0.0 {
            tr.extend((0..n).map(|i| (i, i, delta_x)));
            tr.extend((0..m_eq).map(|r| (n + r, n + r, -DELTA_G)));
        }
        solver.set_values(&tr).map_err(StepFailure::Factorization)?;
        factorizations += 1;
        let attempt = solver.factorize();
        if std::env::var_os("GRIDOPT_IPM_DEBUG").is_some() {
            eprintln!("ipm: k={} delta_x={delta_x:.3e} -> {attempt:?} want ({n}, {m_eq}, 0)", st.k);
            if let Some(path) = std::env::var_os("GRIDOPT_IPM_DUMP") {
                if !std::path::Path::new(&path).exists() && !matches!(attempt, Ok(i) if i == want) {
                    let mut out = String::new();
                    out.push_str(&format!("{dim} {n} {m_eq}\n"));
                    for &(r, c, v) in &tr {
                        out.push_str(&format!("{r} {c} {v:e}\n"));
                    }
                    let _ = std::fs::write(path, out);
                }
            }
        }
        let ok = match attempt {
            Ok(inertia) => inertia == want,
            Err(SparseError::BreakdownPivot(_)) => false,
            Err(e) => return Err(StepFailure::Factorization(e)),
        };
        if ok {
            break;
        }
        delta_x = if delta_x == 0.0 {
            delta_floor.max(warm_delta / 10.0)
        } else {
            delta_x * 10.0
        };
        if delta_x > DELTA_X_CAP {
            return Err(StepFailure::Factorization(SparseError::BreakdownPivot(0)));
        }
    }

    let sol = solver.solve(&rhs).map_err(StepFailure::Factorization)?;
    let dx = sol[..n].to_vec();
    let dlam_g = sol[n..].to_vec();
    let jh_dx = ev.jh.matvec(&dx);
    let ds: Vec<f64> = (0..m_ineq).map(|r| -res.r_h[r] - jh_dx[r]).collect();
    let dlam_h: Vec<f64> = (0..m_ineq).map(|r| aux[r] + sigma[r] * jh_dx[r]).collect();
    let mut step = Step { dx, ds, dlam_g, dlam_h, delta_x, factorizations };

    // one refinement pass on the four-block system: the dual recovery
    // multiplies solve error by sigma, which grows without bound as the
    // barrier collapses; re-solving for the block residual claws the lost
    // digits back
    let h_mul = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(r, c, hv) in &h_tr {
            out[r] += hv * v[c];
            if r != c {
                out[c] += hv * v[r];
            }
        }
        out
    };
    let dg_shift = if delta_x > 0.0 { DELTA_G } else { 0.0 };
    let h_dx = h_mul(&step.dx);
    let jg_dlg = ev.jg.matvec_transposed(&step.dlam_g);
    let jh_dlh = ev.jh.matvec_transposed(&step.dlam_h);
    let rho_x: Vec<f64> = (0..n)
        .map(|i| -res.r_x[i] - h_dx[i] - delta_x * step.dx[i] - jg_dlg[i] - jh_dlh[i])
        .collect();
    let rho_s: Vec<f64> = (0..m_ineq)
        .map(|r| -res.r_s[r] - st.lam_h[r] * step.ds[r] - st.s[r] * step.dlam_h[r])
        .collect();
    let jg_dx = ev.jg.matvec(&step.dx);
    let rho_g: Vec<f64> = (0..m_eq)
        .map(|r| -res.r_g[r] - jg_dx[r] + dg_shift * step.dlam_g[r])
        .collect();
    let jh_dx2 = ev.jh.matvec(&step.dx);
    let rho_h: Vec<f64> = (0..m_ineq)
        .map(|r| -res.r_h[r] - jh_dx2[r] - step.ds[r])
        .collect();

    // the reduction of the correction system mirrors the main solve with
    // the block residuals as right-hand side
    let aux2: Vec<f64> = (0..m_ineq)
        .map(|r| (rho_s[r] - st.lam_h[r] * rho_h[r]) / st.s[r])
        .collect();
    let jh_aux2 = ev.jh.matvec_transposed(&aux2);
    let mut rhs2 = vec![0.0; dim];
    for i in 0..n {
        rhs2[i] = rho_x[i] - jh_aux2[i];
    }
    for r in 0..m_eq {
        rhs2[n + r] = rho_g[r];
    }
    if let Ok(corr) = solver.solve(&rhs2) {
        let cx = &corr[..n];
        let jh_cx = ev.jh.matvec(cx);
        for i in 0..n {
            step.dx[i] += cx[i];
        }
        for (i, c) in corr[n..].iter().enumerate() {
            step.dlam_g[i] += c;
        }
        for r in 0..m_ineq {
            step.ds[r] += rho_h[r] - jh_cx[r];
            step.dlam_h[r] += aux2[r] + sigma[r] * jh_cx[r];
        }
    }

    Ok(step)
}

/// Residual of the recovered direction in the four block equations of the
/// linearized KKT system actually solved (regularization shifts included).
/// Scaled by 1 + the stacked rhs norm.
fn step_block_residual(
    bar: &BarrierProblem,
    ev: &Eval,
    res: &Residuals,
    st: &IterateState,
    obj_w: f64,
    step: &Step,
) -> f64 {
    let n = bar.n_vars();
    let h_tr = match bar.eval_hess(&st.x, obj_w, &st.lam_g, &st.lam_h) {
        Ok(t) => t,
        Err(_) => return f64::INFINITY,
    };
    let mut h_dx = vec![0.0; n];
    for &(r, c, v) in &h_tr {
        h_dx[r] += v * step.dx[c];
        if r != c {
            h_dx[c] += v * step.dx[r];
        }
    }
    let jg_dlg = ev.jg.matvec_transposed(&step.dlam_g);
    let jh_dlh = ev.jh.matvec_transposed(&step.dlam_h);
    // row 1: H dx + delta_x dx + Jg' dlam_g + Jh' dlam_h + r_x = 0
    let r1 = (0..n)
        .map(|i| h_dx[i] + step.delta_x * step.dx[i] + jg_dlg[i] + jh_dlh[i] + res.r_x[i])
        .fold(0.0f64, |a, v| a.max(v.abs()));
    // row 2: Lam_h ds + S dlam_h + r_s = 0
    let r2 = (0..st.s.len())
        .map(|r| st.lam_h[r] * step.ds[r] + st.s[r] * step.dlam_h[r] + res.r_s[r])
        .fold(0.0f64, |a, v| a.max(v.abs()));
    // row 3: Jg dx - delta_g dlam_g + r_g = 0
    let jg_dx = ev.jg.matvec(&step.dx);
    let dg = if step.delta_x > 0.0 { DELTA_G } else { 0.0 };
    let r3 = (0..res.r_g.len())
        .map(|r| jg_dx[r] - dg * step.dlam_g[r] + res.r_g[r])
        .fold(0.0f64, |a, v| a.max(v.abs()));
    // row 4: Jh dx + ds + r_h = 0
    let jh_dx = ev.jh.matvec(&step.dx);
    let r4 = (0..res.r_h.len())
        .map(|r| jh_dx[r] + step.ds[r] + res.r_h[r])
        .fold(0.0f64, |a, v| a.max(v.abs()));

    let rhs_norm = res.stacked_norm();
    r1.max(r2).max(r3).max(r4) / (1.0 + rhs_norm)
}

/// The four convergence conditions in the problem's original units: the
/// internal objective scaling `obj_w` divides out of the stationarity
/// residual and the multipliers.
fn convergence(ev: &Eval, st: &IterateState, res: &Residuals, f_prev: f64, obj_w: f64) -> KktConditions {
    let max_h_pos = ev.h.iter().fold(0.0f64, |a, &v| a.max(v));
    let x_scale = 1.0 + norm_inf(&st.x).max(norm_inf(&st.s));
    let feas = norm_inf(&res.r_g).max(max_h_pos.max(0.0)) / x_scale;
    let grad = norm_inf(&res.r_x) / (obj_w + norm_inf(&st.lam_g).max(norm_inf(&st.lam_h)));
    let comp_dot: f64 = st.s.iter().zip(&st.lam_h).map(|(a, b)| a * b).sum();
    let comp = comp_dot / (obj_w * (1.0 + norm_inf(&st.x)));
    let cost = (ev.f - f_prev).abs() / (1.0 + f_prev.abs());
    KktConditions { feas, grad, comp, cost }
}

/// Solves the NLP from x0 with the internal sparse factorization.
pub fn ipm_solve(prob: &dyn NlpProblem, x0: &[f64], opts: &SolveOptions) -> SolveResult {
    let mut solver = SparseSym::default();
    if opts.verbose {
        let mut err = std::io::stderr();
        ipm_solve_with(prob, x0, opts, &mut solver, Some(&mut err))
    } else {
        ipm_solve_with(prob, x0, opts, &mut solver, None)
    }
}

/// Solver loop over any linear-solver backend; the iteration log, when
/// requested, has one line per iteration:
/// `k=<i> f=<v> feas=<v> grad=<v> comp=<v> mu=<v> alpha_p=<v> alpha_d=<v> delta_x=<v>`.
pub fn ipm_solve_with<S: SymIndefSolver>(
    prob: &dyn NlpProblem,
    x0: &[f64],
    opts: &SolveOptions,
    solver: &mut S,
    mut log: Option<&mut dyn Write>,
) -> SolveResult {
    let clock = Instant::now();
    let bar = BarrierProblem::new(prob);
    let m_ineq = bar.n_ineq();
    let mu0 = opts.mu0.unwrap_or(1.0);

    let mut st = IterateState {
        x: x0.to_vec(),
        s: vec![1.0; m_ineq],
        lam_g: vec![0.0; bar.n_eq()],
        lam_h: vec![1.0; m_ineq],
        mu: mu0,
        k: 0,
    };
    bar.interior_clip(&mut st.x, SLACK_FLOOR);

    let fail = |st: &IterateState, msg: String, iterations: usize, clock: &Instant, diag: &Diag| {
        finish(
            SolveStatus::NumericalFailure,
            st,
            KktConditions::default(),
            f64::NAN,
            1.0,
            iterations,
            clock,
            diag,
            Some(msg),
        )
    };

    let mut diag = Diag::default();
    let mut ev = match evaluate(&bar, &st.x) {
        Ok(ev) => ev,
        Err(e) => return fail(&st, e.to_string(), 0, &clock, &diag),
    };
    // internal objective scaling keeps the dual magnitudes commensurate
    // with the constraint scale; everything reported is unscaled again
    let obj_w = {
        let g0 = norm_inf(&ev.grad);
        if g0.is_finite() && g0 > 1.0 {
            1.0 / g0
        } else {
            1.0
        }
    };
    // slack and dual initialization off the initial constraint values
    for (i, s) in st.s.iter_mut().enumerate() {
        *s = (-ev.h[i]).max(SLACK_FLOOR);
    }
    for (i, l) in st.lam_h.iter_mut().enumerate() {
        *l = st.mu / st.s[i];
    }
    diag.observe_state(&st);

    let mut f_prev = ev.f;
    let mut prepared = false;
    let mut kkt_nnz = 0usize;
    let mut stall = 0usize;
    let mut alpha_p = 0.0f64;
    let mut alpha_d = 0.0f64;
    let mut last_delta = 0.0f64;

    loop {
        let mut res = residuals_scaled(&ev, &st, obj_w);
        let conds = convergence(&ev, &st, &res, f_prev, obj_w);

        if let Some(w) = log.as_deref_mut() {
            let _ = writeln!(
                w,
                "k={} f={:.10e} feas={:.4e} grad={:.4e} comp={:.4e} mu={:.4e} alpha_p={:.4e} alpha_d={:.4e} delta_x={:.4e}",
                st.k, ev.f, conds.feas, conds.grad, conds.comp, st.mu, alpha_p, alpha_d, last_delta
            );
        }

        if !ev.f.is_finite() || res.stacked_norm().is_nan() {
            return fail(&st, "NaN in evaluation".into(), st.k, &clock, &diag);
        }
        if conds.all_below(opts.tol) {
            return finish(SolveStatus::Optimal, &st, conds, ev.f, obj_w, st.k, &clock, &diag, None);
        }
        if st.k >= opts.max_iter {
            let status = if stall >= STALL_LIMIT { SolveStatus::Infeasible } else { SolveStatus::MaxIter };
            return finish(status, &st, conds, ev.f, obj_w, st.k, &clock, &diag, None);
        }
        if let Some(limit) = opts.time_limit {
            if clock.elapsed().as_secs_f64() > limit {
                return finish(SolveStatus::TimeLimit, &st, conds, ev.f, obj_w, st.k, &clock, &diag, None);
            }
        }
        if conds.feas > STALL_FACTOR * opts.tol {
            stall += 1;
            if stall >= STALL_LIMIT {
                return finish(SolveStatus::Infeasible, &st, conds, ev.f, obj_w, st.k, &clock, &diag, None);
            }
        } else {
            stall = 0;
        }

        // barrier update, then refresh the complementarity residual; once
        // the complementarity condition has converged, driving mu further
        // down only explodes the active-set scaling lam/s, so hold it
        if conds.comp > opts.tol {
            st.mu = update_mu(opts.mu_rule, st.mu, &st.s, &st.lam_h, opts.tol, res.stacked_norm());
            for (i, r) in res.r_s.iter_mut().enumerate() {
                *r = st.lam_h[i] * st.s[i] - st.mu;
            }
        }

        let step = match newton_step_cached(&bar, &ev, &res, &st, obj_w, solver, &mut prepared, &mut kkt_nnz, last_delta) {
            Ok(s) => s,
            Err(e) => return fail(&st, e.to_string(), st.k, &clock, &diag),
        };
        diag.factorizations += step.factorizations;
        last_delta = step.delta_x;

        if opts.check_step_blocks {
            let r = step_block_residual(&bar, &ev, &res, &st, obj_w, &step);
            diag.max_block_residual = Some(diag.max_block_residual.unwrap_or(0.0).max(r));
        }

        alpha_p = fraction_to_boundary(&st.s, &step.ds, opts.xi);
        alpha_d = fraction_to_boundary(&st.lam_h, &step.dlam_h, opts.xi);

        // trial state at scale t over (alpha_p, alpha_d); step control
        // halves t until the stacked KKT residual stops growing
        let trial_at = |t: f64| -> IterateState {
            let mut nx = st.x.clone();
            let mut ns = st.s.clone();
            let mut nlg = st.lam_g.clone();
            let mut nlh = st.lam_h.clone();
            for i in 0..nx.len() {
                nx[i] += t * alpha_p * step.dx[i];
            }
            for i in 0..ns.len() {
                ns[i] += t * alpha_p * step.ds[i];
            }
            for i in 0..nlg.len() {
                nlg[i] += t * alpha_d * step.dlam_g[i];
            }
            for i in 0..nlh.len() {
                nlh[i] += t * alpha_d * step.dlam_h[i];
            }
            IterateState { x: nx, s: ns, lam_g: nlg, lam_h: nlh, mu: st.mu, k: st.k + 1 }
        };

        let mut accepted: Option<(IterateState, Eval)> = None;
        if opts.step_control {
            let ref_norm = res.stacked_norm();
            let mut t = 1.0;
            let mut smallest: Option<(IterateState, Eval)> = None;
            for _ in 0..=MAX_STEP_HALVINGS {
                let cand = trial_at(t);
                if let Ok(cev) = evaluate(&bar, &cand.x) {
                    let cres = residuals_scaled(&cev, &cand, obj_w);
                    let ok = cres.stacked_norm() <= 1.1 * ref_norm;
                    smallest = Some((cand, cev));
                    if ok {
                        accepted = smallest.take();
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_none() {
                accepted = smallest; // smallest evaluated trial
            }
        } else {
            let cand = trial_at(1.0);
            if let Ok(cev) = evaluate(&bar, &cand.x) {
                accepted = Some((cand, cev));
            }
        }

        let Some((new_st, new_ev)) = accepted else {
            return fail(&st, "all trial steps failed to evaluate".into(), st.k, &clock, &diag);
        };
        if new_st.x.iter().any(|v| !v.is_finite())
            || new_st.s.iter().any(|v| !v.is_finite())
            || new_st.lam_h.iter().any(|v| !v.is_finite())
        {
            return fail(&st, "non-finite iterate".into(), st.k, &clock, &diag);
        }

        f_prev = ev.f;
        st = new_st;
        ev = new_ev;
        diag.observe_state(&st);
        diag.observe_mem(&st, kkt_nnz, solver.factor_bytes());
    }
}

#[derive(Debug, Default)]
struct Diag {
    factorizations: usize,
    max_block_residual: Option<f64>,
    min_slack: Option<f64>,
    min_dual: Option<f64>,
    peak_mem: usize,
}

impl Diag {
    fn observe_state(&mut self, st: &IterateState) {
        if let Some(&m) = st.s.iter().min_by(|a, b| a.total_cmp(b)) {
            self.min_slack = Some(self.min_slack.map_or(m, |c: f64| c.min(m)));
        }
        if let Some(&m) = st.lam_h.iter().min_by(|a, b| a.total_cmp(b)) {
            self.min_dual = Some(self.min_dual.map_or(m, |c: f64| c.min(m)));
        }
    }

    fn observe_mem(&mut self, st: &IterateState, kkt_nnz: usize, factor_bytes: usize) {
        let vec_bytes = 8 * (6 * st.x.len() + 6 * st.s.len() + 3 * st.lam_g.len() + 4 * st.lam_h.len());
        let kkt_bytes = kkt_nnz * 24;
        self.peak_mem = self.peak_mem.max(vec_bytes + kkt_bytes + factor_bytes);
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    status: SolveStatus,
    st: &IterateState,
    kkt: KktConditions,
    f: f64,
    obj_w: f64,
    iterations: usize,
    clock: &Instant,
    diag: &Diag,
    failure: Option<String>,
) -> SolveResult {
    SolveResult {
        status,
        x: st.x.clone(),
        f,
        lam_g: st.lam_g.iter().map(|l| l / obj_w).collect(),
        lam_h: st.lam_h.iter().map(|l| l / obj_w).collect(),
        s: st.s.clone(),
        iterations,
        kkt,
        wall_time: clock.elapsed().as_secs_f64(),
        peak_mem: diag.peak_mem,
        factorizations: diag.factorizations,
        min_slack: diag.min_slack.unwrap_or(f64::INFINITY),
        min_dual: diag.min_dual.unwrap_or(f64::INFINITY),
        max_block_residual: diag.max_block_residual,
        failure,
    }
}

/// End-to-end convenience: build the formulation, produce the starting
/// point and solve. The start-dependent initial barrier applies when the
/// options leave `mu0` unset.
pub fn solve_opf(
    net: &Network,
    form: Formulation,
    start: Start,
    opts: &SolveOptions,
) -> Result<SolveResult, OpfError> {
    let prob = build_nlp(net, form)?;
    let x0 = initial_guess(net, prob.as_ref(), start)?;
    let mut opts = opts.clone();
    if opts.mu0.is_none() {
        opts.mu0 = Some(match start {
            Start::Flat => 1.0,
            Start::CaseData | Start::PfSolve => 1e-2,
        });
    }
    Ok(ipm_solve(prob.as_ref(), &x0, &opts))
}
