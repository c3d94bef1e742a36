//! Time-stepping for the pricing Cauchy problem. Interior rows advance by
//! an implicit solve against the assembled form; the degenerate boundary
//! row `xi = 0` is an unknown evolved by its own first-order transport
//! equation via a semi-Lagrangian update; far-field edges carry Dirichlet
//! data from the payoff asymptotes.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{lagrange3_d1, Grid2D};
use crate::linalg::{ls_slope, BandedLu};
use crate::operator::FormAssembly;
use crate::spaces::norm_l2w;
use std::sync::Arc;

const BLOWUP_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone)]
pub enum Payoff {
    Call,
    Put,
    /// Frozen table of nodal values (row-major, xi fastest).
    Custom(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub t_final: f64,
    pub steps: usize,
    pub scheme: Scheme,
    pub payoff: Payoff,
    pub strike: f64,
    /// Snapshot cadence in steps; 0 keeps only the initial and final fields.
    pub output_every: usize,
}

impl SolveConfig {
    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn check(&self) -> Result<()> {
        if !(self.t_final > 0.0) || self.steps == 0 {
            return Err(Error::Config(format!(
                "need t_final > 0 and steps >= 1, got {} and {}",
                self.t_final, self.steps
            )));
        }
        if !(self.strike > 0.0) {
            return Err(Error::Config(format!("strike {} must be > 0", self.strike)));
        }
        Ok(())
    }
}

/// Samples the payoff at the nodes; constant in xi.
pub fn initial_field(payoff: &Payoff, strike: f64, grid: Arc<Grid2D>) -> Result<Field> {
    match payoff {
        Payoff::Call => Ok(Field::from_fn(grid, |x, _| strike * (x.exp() - 1.0).max(0.0))),
        Payoff::Put => Ok(Field::from_fn(grid, |x, _| strike * (1.0 - x.exp()).max(0.0))),
        Payoff::Custom(table) => {
            if table.len() != grid.len() {
                return Err(Error::Config(format!(
                    "custom payoff table has {} values, grid has {} nodes",
                    table.len(),
                    grid.len()
                )));
            }
            Ok(Field { grid, values: table.clone(), time: 0.0 })
        }
    }
}

/// Dirichlet values on the three far-field edges at time `t`.
///
/// Call: 0 at x_min; the asymptote `K(e^x - 1)` at x_max; the clamped
/// payoff `K(e^x - 1)^+` along xi_max (kept nonnegative so the discrete
/// solution can satisfy the lower maximum-principle bound). Put: K at
/// x_min, 0 at x_max, frozen payoff along xi_max. Custom payoffs freeze
/// their table values. Discounting is folded away by the risk-premium
/// absorption, so the values are time-independent; `t` stays in the
/// signature as the seam for alternative policies.
pub struct EdgeValues {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub xi_max: Vec<f64>,
}

pub fn far_field_values(_t: f64, grid: &Grid2D, payoff: &Payoff, strike: f64) -> EdgeValues {
    let nxi = grid.nxi();
    let nx = grid.nx();
    match payoff {
        Payoff::Call => {
            let xmax = grid.x_nodes[nx];
            EdgeValues {
                x_min: vec![0.0; nxi + 1],
                x_max: vec![strike * (xmax.exp() - 1.0); nxi + 1],
                xi_max: grid
                    .x_nodes
                    .iter()
                    .map(|x| strike * (x.exp() - 1.0).max(0.0))
                    .collect(),
            }
        }
        Payoff::Put => EdgeValues {
            x_min: vec![strike; nxi + 1],
            x_max: vec![0.0; nxi + 1],
            xi_max: grid
                .x_nodes
                .iter()
                .map(|x| strike * (1.0 - x.exp()).max(0.0))
                .collect(),
        },
        Payoff::Custom(table) => EdgeValues {
            x_min: (0..=nxi).map(|j| table[grid.idx(0, j)]).collect(),
            x_max: (0..=nxi).map(|j| table[grid.idx(nx, j)]).collect(),
            xi_max: (0..=nx).map(|i| table[grid.idx(i, nxi)]).collect(),
        },
    }
}

/// Cubic Lagrange interpolation on a uniform 1D grid, clamped to the range.
fn interp_cubic(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let cell = (((x - nodes[0]) / h).floor() as i64).clamp(0, n as i64 - 2) as usize;
    let base = cell.saturating_sub(1).min(n - 4);
    let mut out = 0.0;
    for k in 0..4 {
        let mut w = 1.0;
        for l in 0..4 {
            if l != k {
                w *= (x - nodes[base + l]) / (nodes[base + k] - nodes[base + l]);
            }
        }
        out += w * vals[base + k];
    }
    out
}

/// One semi-Lagrangian step of the boundary transport equation
/// `u_t + q_r u_x - kappa theta_sigma u_xi = 0` on the row `xi = 0`:
/// trace the characteristic back to `x - q_r dt`, interpolate the row,
/// and add the interior source `kappa theta_sigma dt u_xi` at the foot.
/// Feet outside the x-range are clamped; the count is returned.
pub fn boundary_transport_step(
    x_nodes: &[f64],
    row: &[f64],
    u_xi: &[f64],
    q_r: f64,
    kappa_theta_sigma: f64,
    dt: f64,
) -> (Vec<f64>, usize) {
    let n = x_nodes.len();
    let (x0, x1) = (x_nodes[0], x_nodes[n - 1]);
    let mut clamped = 0usize;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut foot = x_nodes[i] - q_r * dt;
        if foot < x0 || foot > x1 {
            foot = foot.clamp(x0, x1);
            clamped += 1;
        }
        out[i] = interp_cubic(x_nodes, row, foot)
            + kappa_theta_sigma * dt * interp_cubic(x_nodes, u_xi, foot);
    }
    (out, clamped)
}

/// One-sided second-order xi-derivative of a field on the boundary row.
pub fn boundary_u_xi(f: &Field) -> Vec<f64> {
    let grid = &f.grid;
    let (a, b, c) = (grid.xi_nodes[0], grid.xi_nodes[1], grid.xi_nodes[2]);
    let w = lagrange3_d1(a, b, c, a);
    (0..=grid.nx())
        .map(|i| w[0] * f.at(i, 0) + w[1] * f.at(i, 1) + w[2] * f.at(i, 2))
        .collect()
}

/// Evolution record: snapshots, per-step norms, boundary-row history, and
/// the smoothing diagnostic table when it has been run.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub snapshots: Vec<Field>,
    pub norms: Vec<(f64, f64)>,
    pub boundary_rows: Vec<(f64, Vec<f64>)>,
    pub smoothing: Vec<(f64, f64, f64)>,
    pub clamp_events: usize,
}

/// Prepared stepper: factorizations are built once and reused across steps.
pub struct Stepper<'a> {
    pub asm: &'a FormAssembly,
    pub cfg: SolveConfig,
    dt: f64,
    implicit_lu: BandedLu,
    /// Optional forcing `t -> field` added to the right-hand side.
    forcing: Option<Box<dyn Fn(f64) -> Field + Sync + 'a>>,
    pub clamp_events: std::cell::Cell<usize>,
}

impl<'a> Stepper<'a> {
    pub fn new(asm: &'a FormAssembly, cfg: SolveConfig) -> Result<Stepper<'a>> {
        cfg.check()?;
        if matches!(cfg.payoff, Payoff::Call) {
            let report = crate::params::validate(&asm.params, &asm.weights)?;
            if !report.gamma_call_ok {
                return Err(Error::InvalidParams(format!(
                    "call payoff needs gamma > 2 for membership in H; gamma = {}",
                    asm.weights.gamma
                )));
            }
        }
        let dt = cfg.dt();
        let c = match cfg.scheme {
            Scheme::ImplicitEuler => dt,
            Scheme::CrankNicolson => 0.5 * dt,
        };
        let m = asm.form.scale(c).add_diag_scaled(1.0, &asm.gram_diag);
        let implicit_lu = m.factor().map_err(|e| match e {
            Error::SingularFactorization { row, .. } => {
                let (i, j) = asm.map.node(row);
                Error::SingularFactorization { row, i, j }
            }
            other => other,
        })?;
        Ok(Stepper { asm, cfg, dt, implicit_lu, forcing: None, clamp_events: std::cell::Cell::new(0) })
    }

    pub fn with_forcing(mut self, f: impl Fn(f64) -> Field + Sync + 'a) -> Stepper<'a> {
        self.forcing = Some(Box::new(f));
        self
    }

    fn apply_edges(&self, f: &mut Field, t: f64) {
        let grid = &self.asm.grid;
        let edges = far_field_values(t, grid, &self.cfg.payoff, self.cfg.strike);
        let nx = grid.nx();
        let nxi = grid.nxi();
        for i in 0..=nx {
            f.set(i, nxi, edges.xi_max[i]);
        }
        for j in 0..=nxi {
            f.set(0, j, edges.x_min[j]);
            f.set(nx, j, edges.x_max[j]);
        }
    }

    /// Interior solve given the fully populated boundary (row 0, edges) of
    /// `next` and the previous field.
    fn interior_solve(&self, u: &Field, next: &mut Field) -> Result<()> {
        let asm = self.asm;
        let n = asm.map.n();
        let dt = self.dt;
        let tn = u.time;
        let tnp = next.time;
        let mut b = match self.cfg.scheme {
            Scheme::ImplicitEuler => {
                let mut b = asm.gram_action(u);
                // known columns of u^{n+1} move to the right-hand side
                for (row, coups) in asm.form_bnd.iter().enumerate() {
                    for &(g, c) in coups {
                        b[row] -= dt * c * next.values[g];
                    }
                }
                if let Some(fc) = &self.forcing {
                    let f_next = fc(tnp);
                    let gf = asm.gram_action(&f_next);
                    for (bi, gi) in b.iter_mut().zip(gf.iter()) {
                        *bi += dt * gi;
                    }
                }
                b
            }
            Scheme::CrankNicolson => {
                // (G + dt/2 F) u^{n+1} = (G - dt/2 F) u^n + dt/2 (G f^n + G f^{n+1});
                // form_action(u) already carries the boundary columns at t_n.
                let gu = asm.gram_action(u);
                let fu = asm.form_action(u);
                let mut b: Vec<f64> =
                    gu.iter().zip(fu.iter()).map(|(g, f)| g - 0.5 * dt * f).collect();
                for (row, coups) in asm.form_bnd.iter().enumerate() {
                    for &(g, c) in coups {
                        b[row] -= 0.5 * dt * c * next.values[g];
                    }
                }
                if let Some(fc) = &self.forcing {
                    let f_n = fc(tn);
                    let f_np = fc(tnp);
                    let gf_n = asm.gram_action(&f_n);
                    let gf_np = asm.gram_action(&f_np);
                    for ((bi, a), c) in b.iter_mut().zip(gf_n.iter()).zip(gf_np.iter()) {
                        *bi += 0.5 * dt * (a + c);
                    }
                }
                b
            }
        };
        self.implicit_lu.solve_in_place(&mut b);
        for k in 0..n {
            let (i, j) = asm.map.node(k);
            next.set(i, j, b[k]);
        }
        Ok(())
    }

    /// Advances the field by one step of the configured scheme.
    pub fn step(&self, u: &Field) -> Result<Field> {
        let asm = self.asm;
        let grid = &asm.grid;
        if asm.grid_hash != u.grid.hash() {
            return Err(Error::GridMismatch("field grid differs from assembly grid".into()));
        }
        let dt = self.dt;
        let p = &asm.params;
        let tnp = u.time + dt;
        let mut next = Field::zeros(grid.clone());
        next.time = tnp;

        // Transport update for the boundary row from the current field.
        let row: Vec<f64> = (0..=grid.nx()).map(|i| u.at(i, 0)).collect();
        let uxi = boundary_u_xi(u);
        let (new_row, clamped) = boundary_transport_step(
            &grid.x_nodes,
            &row,
            &uxi,
            p.q_r(),
            p.kappa * p.theta_sigma(),
            dt,
        );
        self.clamp_events.set(self.clamp_events.get() + clamped);
        for (i, v) in new_row.iter().enumerate() {
            next.set(i, 0, *v);
        }
        // Far-field edges overwrite the shared corners.
        self.apply_edges(&mut next, tnp);
        self.interior_solve(u, &mut next)?;

        if matches!(self.cfg.scheme, Scheme::CrankNicolson) {
            // Corrector for the boundary row: trapezoidal source using the
            // predicted interior solution, then one more interior solve.
            let uxi_new = boundary_u_xi(&next);
            let kts = p.kappa * p.theta_sigma();
            let mut corrected = vec![0.0; grid.nx() + 1];
            for i in 0..=grid.nx() {
                let foot = (grid.x_nodes[i] - p.q_r() * dt)
                    .clamp(grid.x_nodes[0], grid.x_nodes[grid.nx()]);
                corrected[i] = interp_cubic(&grid.x_nodes, &row, foot)
                    + 0.5 * kts * dt * (interp_cubic(&grid.x_nodes, &uxi, foot) + uxi_new[i]);
            }
            for (i, v) in corrected.iter().enumerate() {
                next.set(i, 0, *v);
            }
            self.apply_edges(&mut next, tnp);
            self.interior_solve(u, &mut next)?;
        }

        let m = next.max_abs();
        if !m.is_finite() || m > BLOWUP_GUARD {
            return Err(Error::BlowUp {
                step: (tnp / dt).round() as usize,
                max_abs: m,
            });
        }
        Ok(next)
    }
}

/// Runs the full evolution and records the trace.
pub fn solve(asm: &FormAssembly, cfg: &SolveConfig) -> Result<EvolutionTrace> {
    let stepper = Stepper::new(asm, cfg.clone())?;
    let mut u = initial_field(&cfg.payoff, cfg.strike, asm.grid.clone())?;
    stepper.apply_edges(&mut u, 0.0);
    let w = &asm.weights;
    let mut trace = EvolutionTrace {
        snapshots: vec![u.clone()],
        norms: vec![(0.0, norm_l2w(&u, w))],
        boundary_rows: vec![(0.0, (0..=asm.grid.nx()).map(|i| u.at(i, 0)).collect())],
        smoothing: Vec::new(),
        clamp_events: 0,
    };
    for step_idx in 1..=cfg.steps {
        u = stepper.step(&u)?;
        trace.norms.push((u.time, norm_l2w(&u, w)));
        trace
            .boundary_rows
            .push((u.time, (0..=asm.grid.nx()).map(|i| u.at(i, 0)).collect()));
        let snap = cfg.output_every != 0 && step_idx % cfg.output_every == 0;
        if snap || step_idx == cfg.steps {
            trace.snapshots.push(u.clone());
        }
    }
    trace.clamp_events = stepper.clamp_events.get();
    Ok(trace)
}

/// Smoothing diagnostic table: norms of `(lambda I + A_h)^k e^{-t A_h} u0`
/// for k = 1, 2 along a list of times, plus their log-log slopes.
#[derive(Debug, Clone)]
pub struct SmoothingTable {
    pub rows: Vec<(f64, f64, f64)>,
    pub slope1: f64,
    pub slope2: f64,
}

/// Evolves `u0` with implicit Euler at step `dt` and applies the shifted
/// operator once and twice at each requested time (times snap to step
/// boundaries).
pub fn smoothing_diagnostics(
    asm: &FormAssembly,
    u0: &Field,
    t_list: &[f64],
    lambda: f64,
    dt: f64,
) -> Result<SmoothingTable> {
    if t_list.is_empty() || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] <= 0.0 {
        return Err(Error::Config("t_list must be positive and increasing".into()));
    }
    let t_end = *t_list.last().unwrap();
    let steps = (t_end / dt).round().max(1.0) as usize;
    let cfg = SolveConfig {
        t_final: t_end,
        steps,
        scheme: Scheme::ImplicitEuler,
        payoff: Payoff::Custom(u0.values.clone()),
        strike: 1.0,
        output_every: 0,
    };
    let stepper = Stepper::new(asm, cfg)?;
    let w = &asm.weights;
    let mut u = u0.clone();
    u.time = 0.0;
    let mut rows = Vec::with_capacity(t_list.len());
    let mut next_target = 0usize;
    for s in 1..=steps {
        u = stepper.step(&u)?;
        let t = s as f64 * dt;
        while next_target < t_list.len() && t + 0.5 * dt >= t_list[next_target] {
            let f01 = shifted_apply(asm, &u, lambda);
            let f02 = shifted_apply(asm, &f01, lambda);
            rows.push((t, norm_l2w(&f01, w), norm_l2w(&f02, w)));
            next_target += 1;
        }
        if next_target == t_list.len() {
            break;
        }
    }
    let lt: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let l1: Vec<f64> = rows.iter().map(|r| r.1.max(1e-300).ln()).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.2.max(1e-300).ln()).collect();
    Ok(SmoothingTable { rows, slope1: ls_slope(&lt, &l1), slope2: ls_slope(&lt, &l2) })
}

/// `(lambda I + A_h) u` with the weak operator; edge values are taken from
/// `lambda u` (the operator rows live on the interior).
pub fn shifted_apply(asm: &FormAssembly, u: &Field, lambda: f64) -> Field {
    let au = asm.apply_weak(u);
    let mut out = u.clone();
    for v in out.values.iter_mut() {
        *v *= lambda;
    }
    for (a, b) in out.values.iter_mut().zip(au.values.iter()) {
        *a += b;
    }
    out
}
