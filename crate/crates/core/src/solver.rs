//! Drivers for the shifted system
//! `d_t v = -(v + ubar) . grad (v + ubar) - grad p`, `div v = 0`, `v2 = 0` on the walls,
//! with a steady, divergence-free base flow `ubar` that may cross the walls.
//!
//! [`step_rk4`] is the production integrator. [`picard_run`] iterates the
//! frozen-coefficient scheme `d_t v_(n+1) = F(v_n)` as a time quadrature on
//! Chebyshev nodes and records the contraction of successive differences.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic_norms::{DerivativeTable, NormParams, NormValues, RadiusSchedule};
use crate::chebyshev;
use crate::checkpoint::Checkpoint;
use crate::grid_field::{GridField, Transforms, VectorGridField};
use crate::mode_field::Side;
use crate::pressure::{
    build_pressure_problem_grid, solve_neumann_grid, truncate_chebyshev, BoundaryForm, ResidualReport,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub form: BoundaryForm,
    /// Relative bound on `||div v||` and `||v2||` on the walls after each step.
    pub invariant_tol: f64,
    /// Admitted [`Resolution::chebyshev_tail`] of `v + ubar`.
    pub chebyshev_tail_tol: f64,
    /// Admitted [`Resolution::fourier_tail`] of `v + ubar`.
    pub fourier_tail_tol: f64,
    /// `dt * max speed <= cfl * h`
    pub cfl: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            form: BoundaryForm::FullTrace,
            invariant_tol: 1e-9,
            chebyshev_tail_tol: 1e-8,
            fourier_tail_tol: 1e-4,
            cfl: 0.5,
        }
    }
}

/// Right side of the shifted system at one state.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub dvdt: VectorGridField,
    pub p: GridField,
    pub pressure: ResidualReport,
}

/// Trailing spectral content relative to the largest coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Resolution {
    /// Top Chebyshev pair over all rows; drives the tau residual and hence
    /// the divergence of the tendency.
    pub chebyshev_tail: f64,
    /// Whole outermost wavenumber row.
    pub fourier_tail: f64,
}

pub fn resolution_indicator(v: &VectorGridField) -> Resolution {
    let (mut cheb, mut four, mut all) = (0.0f64, 0.0f64, 0.0f64);
    let (k, p) = (v.k_max() as i64, v.degree());
    let max = |r: &[Complex64]| r.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for f in [&v.comp1, &v.comp2] {
        all = all.max(f.max_abs_coeff());
        for w in f.wavenumbers() {
            let row = f.row(w);
            cheb = cheb.max(max(&row[p.saturating_sub(1)..]));
            if k > 0 && w.abs() == k {
                four = four.max(max(row));
            }
        }
    }
    if all == 0.0 {
        return Resolution::default();
    }
    Resolution {
        chebyshev_tail: cheb / all,
        fourier_tail: four / all,
    }
}

/// `F(v) = -(v + ubar) . grad (v + ubar) - grad p`.
pub fn rhs_shifted(v: &VectorGridField, ubar: &VectorGridField, settings: &SolverSettings) -> Result<Tendency> {
    let u = v.add(ubar);
    let res = resolution_indicator(&u);
    if res.chebyshev_tail > settings.chebyshev_tail_tol {
        return Err(Error::Precondition(format!(
            "under-resolved velocity: top Chebyshev coefficients at {:.2e} of the peak (limit {:.1e}); increase P",
            res.chebyshev_tail, settings.chebyshev_tail_tol
        )));
    }
    if res.fourier_tail > settings.fourier_tail_tol {
        return Err(Error::Precondition(format!(
            "under-resolved velocity: wavenumber K carries {:.2e} of the peak (limit {:.1e}); increase K",
            res.fourier_tail, settings.fourier_tail_tol
        )));
    }
    let (pb, n) = build_pressure_problem_grid(v, ubar, settings.form)?;
    let sol = solve_neumann_grid(&pb)?;
    let dp = VectorGridField::new(truncate_chebyshev(&sol.p.diff(1), v.degree() - 2), sol.p.diff(2));
    let dvdt = n.sub(&dp);
    Ok(Tendency {
        dvdt,
        p: sol.p,
        pressure: sol.residual,
    })
}

/// `int_T a b c dx1` for three Fourier series indexed `k + K`.
fn triple_integral(a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> Complex64 {
    let k = (a.len() / 2) as i64;
    let mut s = Complex64::default();
    for k1 in -k..=k {
        for k2 in -k..=k {
            let k3 = -(k1 + k2);
            if k3.abs() <= k {
                s += a[(k1 + k) as usize] * b[(k2 + k) as usize] * c[(k3 + k) as usize];
            }
        }
    }
    s
}

fn pair_integral(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let k = a.len() - 1;
    (0..a.len()).map(|i| a[i] * b[k - i]).sum()
}

/// Energy budget `d/dt (1/2)||u||^2 + int_walls ((1/2)|u|^2 + p) u . n = 0` at one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FluxBalance {
    pub t: f64,
    pub energy_rate: f64,
    pub flux: f64,
    /// `|energy_rate + flux| / (||u|| ||d_t v||)`
    pub relative: f64,
}

pub fn flux_balance(t: f64, v: &VectorGridField, ubar: &VectorGridField, tend: &Tendency) -> FluxBalance {
    let u = v.add(ubar);
    let energy_rate = u.comp1.inner(&tend.dvdt.comp1).re + u.comp2.inner(&tend.dvdt.comp2).re;
    let wall = |side: Side| {
        let (a, b, p) = (u.comp1.trace(side), u.comp2.trace(side), tend.p.trace(side));
        let kinetic = 0.5 * (triple_integral(&a, &a, &b) + triple_integral(&b, &b, &b));
        (kinetic + pair_integral(&p, &b)).re
    };
    // outward normal is +e2 on top, -e2 on the bottom
    let flux = wall(Side::Top) - wall(Side::Bottom);
    let scale = u.l2_norm() * tend.dvdt.l2_norm();
    let gap = (energy_rate + flux).abs();
    FluxBalance {
        t,
        energy_rate,
        flux,
        relative: if scale > 0.0 { gap / scale } else { gap },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub div: f64,
    pub trace: f64,
    /// `(1/2)||v + ubar||^2`
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub v: VectorGridField,
    pub tau: f64,
    pub diag: Diagnostics,
    /// Energy budget at the start of the step that produced this state.
    pub last_balance: Option<FluxBalance>,
}

fn diagnostics(v: &VectorGridField, ubar: &VectorGridField) -> Diagnostics {
    Diagnostics {
        div: v.divergence().l2_norm(),
        trace: v.normal_trace_norm(),
        energy: 0.5 * v.add(ubar).l2_norm().powi(2),
    }
}

fn check_invariants(t: f64, v: &VectorGridField, d: &Diagnostics, tol: f64) -> Result<()> {
    let limit = tol * v.l2_norm().max(1.0);
    for (what, value) in [("divergence", d.div), ("wall trace of v2", d.trace)] {
        if !(value <= limit) {
            return Err(Error::Invariant {
                time: t,
                what,
                value,
                limit,
            });
        }
    }
    Ok(())
}

impl SolverState {
    pub fn new(
        v: VectorGridField,
        ubar: &VectorGridField,
        schedule: &RadiusSchedule,
        settings: &SolverSettings,
    ) -> Result<Self> {
        let diag = diagnostics(&v, ubar);
        check_invariants(0.0, &v, &diag, settings.invariant_tol)?;
        Ok(SolverState {
            t: 0.0,
            tau: schedule.tau(0.0),
            v,
            diag,
            last_balance: None,
        })
    }
}

/// Smallest grid spacing: the x1 collocation step or the narrowest Lobatto gap.
pub fn grid_spacing(k: usize, p: usize) -> f64 {
    let tr = Transforms::get(k, p);
    let x2 = tr.x2_base();
    let gap = x2.windows(2).map(|w| (w[0] - w[1]).abs()).fold(f64::INFINITY, f64::min);
    (1.0 / tr.n1 as f64).min(gap)
}

/// Upper bound of `|u|` on the collocation grid.
pub fn max_speed(u: &VectorGridField) -> f64 {
    let m = |f: &GridField| f.to_values().iter().map(|c| c.norm()).fold(0.0, f64::max);
    m(&u.comp1).hypot(m(&u.comp2))
}

/// Largest step admitted by the CFL bound.
pub fn max_stable_dt(v: &VectorGridField, ubar: &VectorGridField, settings: &SolverSettings) -> f64 {
    let speed = max_speed(&v.add(ubar));
    let h = grid_spacing(v.k_max(), v.degree());
    if speed == 0.0 {
        f64::INFINITY
    } else {
        settings.cfl * h / speed
    }
}

/// One classical RK4 step with a pressure solve per stage.
pub fn step_rk4(
    state: &SolverState,
    dt: f64,
    ubar: &VectorGridField,
    schedule: &RadiusSchedule,
    settings: &SolverSettings,
) -> Result<SolverState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("time step {dt} must be positive")));
    }
    let t1 = state.t + dt;
    if t1 > schedule.t0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "step to t = {t1} passes the end of the schedule T0 = {}",
            schedule.t0
        )));
    }
    let limit = max_stable_dt(&state.v, ubar, settings);
    if dt > limit {
        return Err(Error::Precondition(format!(
            "time step {dt:.3e} violates the CFL bound {limit:.3e}"
        )));
    }
    let v = &state.v;
    let k1 = rhs_shifted(v, ubar, settings)?;
    let balance = flux_balance(state.t, v, ubar, &k1);
    let k2 = rhs_shifted(&v.axpy(0.5 * dt, &k1.dvdt), ubar, settings)?;
    let k3 = rhs_shifted(&v.axpy(0.5 * dt, &k2.dvdt), ubar, settings)?;
    let k4 = rhs_shifted(&v.axpy(dt, &k3.dvdt), ubar, settings)?;
    let incr = k1.dvdt.add(&k2.dvdt.scale(2.0)).add(&k3.dvdt.scale(2.0)).add(&k4.dvdt);
    let next = v.axpy(dt / 6.0, &incr);
    let t = if (t1 - schedule.t0).abs() <= 1e-12 * schedule.t0 {
        schedule.t0
    } else {
        t1
    };
    let diag = diagnostics(&next, ubar);
    check_invariants(t, &next, &diag, settings.invariant_tol)?;
    Ok(SolverState {
        t,
        tau: schedule.tau(t),
        v: next,
        diag,
        last_balance: Some(balance),
    })
}

/// Shift `x1 -> x1 - s` (exact in Fourier space).
pub fn shift_x1(v: &VectorGridField, s: f64) -> VectorGridField {
    let shift = |f: &GridField| {
        let mut out = f.clone();
        for k in f.wavenumbers() {
            let ph = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * s);
            out.row_mut(k).iter_mut().for_each(|c| *c *= ph);
        }
        out
    };
    VectorGridField::new(shift(&v.comp1), shift(&v.comp2))
}

/// Everything a run needs, already on the grid.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub v0: VectorGridField,
    pub ubar: VectorGridField,
    pub schedule: RadiusSchedule,
    /// Requested step; the step actually used divides `T0` evenly.
    pub dt: f64,
    pub norms: NormParams,
    pub settings: SolverSettings,
    /// Blow-up ceiling on `||v||_X~`; `None` selects the default.
    pub ceiling: Option<f64>,
    /// Record a norm row every this many steps.
    pub sample_every: usize,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

/// One row of the norm time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub tau: f64,
    pub x: f64,
    pub x_tilde: f64,
    pub y: f64,
    pub y_tilde: f64,
    pub y_bar: f64,
    pub hr: f64,
    pub div: f64,
    pub trace: f64,
    pub energy: f64,
}

impl SeriesRow {
    pub fn norms(&self) -> NormValues {
        NormValues {
            x: self.x,
            x_tilde: self.x_tilde,
            y: self.y,
            y_tilde: self.y_tilde,
            y_bar: self.y_bar,
            hr: self.hr,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: Vec<SeriesRow>,
    pub balances: Vec<FluxBalance>,
    pub final_state: SolverState,
    pub steps: usize,
    pub dt: f64,
    pub ceiling: f64,
    pub checkpoints: Vec<PathBuf>,
}

/// Norms of a grid field at radius `tau`.
pub fn grid_norms(v: &VectorGridField, p: &NormParams, tau: f64) -> NormValues {
    NormValues::of(
        &DerivativeTable::from_vector_grid_unchecked(v, p.n_max),
        &p.with_tau(tau),
    )
}

fn series_row(s: &SolverState, p: &NormParams) -> SeriesRow {
    let n = grid_norms(&s.v, p, s.tau);
    SeriesRow {
        t: s.t,
        tau: s.tau,
        x: n.x,
        x_tilde: n.x_tilde,
        y: n.y,
        y_tilde: n.y_tilde,
        y_bar: n.y_bar,
        hr: n.hr,
        div: s.diag.div,
        trace: s.diag.trace,
        energy: s.diag.energy,
    }
}

/// Default blow-up ceiling: `1e3` times the initial `||v||_X~`, falling back
/// to `||ubar||_X~` and then to 1 when the initial data vanish.
pub fn default_ceiling(v0: &VectorGridField, ubar: &VectorGridField, p: &NormParams, tau0: f64) -> f64 {
    let a = grid_norms(v0, p, tau0).x_tilde;
    let b = grid_norms(ubar, p, tau0).x_tilde;
    1e3 * if a > 0.0 {
        a
    } else if b > 0.0 {
        b
    } else {
        1.0
    }
}

/// Integrate on `[0, T0]` and stop exactly at `T0`; the schedule guarantees
/// `tau(T0) >= 0`.
pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    spec.schedule.validate()?;
    spec.norms.validate()?;
    if !(spec.dt > 0.0) {
        return Err(Error::Config(format!("dt = {} must be positive", spec.dt)));
    }
    let t0 = spec.schedule.t0;
    let steps = ((t0 / spec.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = t0 / steps as f64;
    let ceiling = spec
        .ceiling
        .unwrap_or_else(|| default_ceiling(&spec.v0, &spec.ubar, &spec.norms, spec.schedule.tau0));
    let every = spec.sample_every.max(1);
    let mut state = SolverState::new(spec.v0.clone(), &spec.ubar, &spec.schedule, &spec.settings)?;
    let mut series = vec![series_row(&state, &spec.norms)];
    let mut balances = Vec::with_capacity(steps);
    let mut checkpoints = Vec::new();
    for i in 1..=steps {
        let target = if i == steps { t0 } else { i as f64 * dt };
        state = step_rk4(&state, target - state.t, &spec.ubar, &spec.schedule, &spec.settings)?;
        if i == steps {
            state.t = t0;
            state.tau = spec.schedule.tau(t0);
        }
        balances.extend(state.last_balance);
        if i % every == 0 || i == steps {
            let row = series_row(&state, &spec.norms);
            if !(row.x_tilde <= ceiling) {
                return Err(Error::BlowUp {
                    time: state.t,
                    norm: row.x_tilde,
                    ceiling,
                });
            }
            series.push(row);
        }
        if let (Some(n), Some(dir)) = (spec.checkpoint_every, &spec.checkpoint_dir) {
            if n > 0 && (i % n == 0 || i == steps) {
                let path = dir.join(format!("checkpoint_{i:06}.bin"));
                Checkpoint {
                    t: state.t,
                    tau: state.tau,
                    v: state.v.clone(),
                }
                .write(&path)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(RunOutput {
        series,
        balances,
        final_state: state,
        steps,
        dt,
        ceiling,
        checkpoints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSettings {
    /// Chebyshev degree in time (`nodes + 1` time nodes).
    pub nodes: usize,
    /// Stop once the composite falls below this fraction of its first value.
    pub floor: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings { nodes: 16, floor: 1e-9 }
    }
}

/// `a_n = sup_t ||w_n||_X~`, `b_n = int ||w_n||_Y-` for `w_n = v_n - v_(n-1)`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IterationTrace {
    pub m: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn composite(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + self.m * b).collect()
    }

    /// `c_(n+1) / c_n` for consecutive iterates.
    pub fn ratios(&self) -> Vec<f64> {
        self.composite()
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    /// Measured contraction factor: the largest consecutive ratio.
    pub fn rho(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }
}

/// `sup_t ||v_n||_X~ + M int ||v_n||_Y-` per iterate against
/// `A = 3 ||v0||_Y-(tau0) + sup_t ||ubar||_Y-(tau(t))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBound {
    pub a_bound: f64,
    pub values: Vec<f64>,
}

impl UniformBound {
    pub fn holds(&self) -> bool {
        self.values.iter().all(|&v| v <= self.a_bound)
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutput {
    pub trace: IterationTrace,
    pub bound: UniformBound,
    /// Time nodes, ascending from 0 to `T0`.
    pub times: Vec<f64>,
    /// Last iterate at the time nodes.
    pub last: Vec<VectorGridField>,
    pub converged: bool,
}

impl PicardOutput {
    pub fn at_t0(&self) -> &VectorGridField {
        self.last.last().expect("at least one node")
    }
}

/// `A = 3 ||v0||_Y-(tau0) + sup_t ||ubar||_Y-(tau(t))`. For steady `ubar` the
/// supremum sits at the largest radius `tau0`.
pub fn uniform_bound_constant(v0: &VectorGridField, ubar: &VectorGridField, norms: &NormParams, tau0: f64) -> f64 {
    3.0 * grid_norms(v0, norms, tau0).y_bar + grid_norms(ubar, norms, tau0).y_bar
}

/// Smallest admissible `M >= 12 C0 A` (and `M >= 1`), with the matching
/// final time `T0 = min(1, tau0) / M`.
pub fn contraction_schedule(c0: f64, a: f64, tau0: f64) -> Result<RadiusSchedule> {
    let m = (12.0 * c0 * a).max(1.0);
    RadiusSchedule::new(tau0, m, tau0.min(1.0) / m)
}

/// Picard iteration `v_(n+1)(t) = v0 + int_0^t F(v_n)` with `v_0 = v0`.
pub fn picard_run(
    v0: &VectorGridField,
    ubar: &VectorGridField,
    schedule: &RadiusSchedule,
    n_iters: usize,
    norms: &NormParams,
    settings: &SolverSettings,
    picard: &PicardSettings,
) -> Result<PicardOutput> {
    schedule.validate()?;
    norms.validate()?;
    if n_iters < 2 {
        return Err(Error::Precondition(format!(
            "n_iters = {n_iters} but at least 2 are required"
        )));
    }
    let nn = picard.nodes.max(2);
    let t0 = schedule.t0;
    // nodes from lobatto_x2 run from 1 to 0; reverse to ascending time
    let x = chebyshev::lobatto_x2(nn);
    let s_desc = chebyshev::integration_matrix(nn);
    let cc_desc = chebyshev::clenshaw_curtis_x2(nn);
    let m = nn + 1;
    let rev = |i: usize| m - 1 - i;
    let times: Vec<f64> = (0..m).map(|i| t0 * x[rev(i)]).collect();
    let weights: Vec<f64> = (0..m).map(|i| t0 * cc_desc[rev(i)]).collect();
    let taus: Vec<f64> = times.iter().map(|&t| schedule.tau(t)).collect();

    let a_bound = uniform_bound_constant(v0, ubar, norms, schedule.tau0);

    let measure = |f: &[VectorGridField]| -> (f64, f64) {
        let vals: Vec<NormValues> = f
            .par_iter()
            .zip(&taus)
            .map(|(g, &tau)| grid_norms(g, norms, tau))
            .collect();
        let sup = vals.iter().map(|n| n.x_tilde).fold(0.0, f64::max);
        let int: f64 = vals.iter().zip(&weights).map(|(n, w)| n.y_bar * w).sum();
        (sup, int)
    };

    let mut prev: Vec<VectorGridField> = vec![v0.clone(); m];
    let (s0, i0) = measure(&prev);
    let mut bound_values = vec![s0 + schedule.m * i0];
    let mut trace = IterationTrace {
        m: schedule.m,
        ..Default::default()
    };
    let mut converged = false;
    let mut growth = 0;
    for _ in 0..n_iters {
        let f: Vec<VectorGridField> = prev
            .par_iter()
            .map(|v| rhs_shifted(v, ubar, settings).map(|t| t.dvdt))
            .collect::<Result<_>>()?;
        let next: Vec<VectorGridField> = (0..m)
            .map(|i| {
                let mut acc = v0.clone();
                for j in 0..m {
                    let w = t0 * s_desc[rev(i) * m + rev(j)];
                    if w != 0.0 {
                        acc = acc.axpy(w, &f[j]);
                    }
                }
                acc
            })
            .collect();
        let diff: Vec<VectorGridField> = next.iter().zip(&prev).map(|(a, b)| a.sub(b)).collect();
        let (a, b) = measure(&diff);
        let (sv, iv) = measure(&next);
        bound_values.push(sv + schedule.m * iv);
        trace.a.push(a);
        trace.b.push(b);
        prev = next;
        let c = trace.composite();
        let n = c.len();
        if n >= 2 && c[n - 1] > c[n - 2] {
            growth += 1;
            if growth >= 2 {
                return Err(Error::Diverged { trace: c });
            }
        } else {
            growth = 0;
        }
        if c[n - 1] <= picard.floor * c[0] || c[n - 1] == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(PicardOutput {
        trace,
        bound: UniformBound {
            a_bound,
            values: bound_values,
        },
        times,
        last: prev,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_field::{ModeField, VectorModeField, VerticalBasis::*};

    fn sched() -> RadiusSchedule {
        RadiusSchedule::new(0.2, 2.0, 0.1).unwrap()
    }

    fn params() -> NormParams {
        NormParams::new(3, 0.2, 0.1, 6).unwrap()
    }

    fn small_v(k: usize, p: usize) -> VectorGridField {
        let psi = ModeField::sin_x1(1, Sin(1), 0.02).add(&ModeField::cos_x1(2, Sin(2), 0.01));
        VectorGridField::from_stream_function(&GridField::from_mode(&psi, k, p).0)
    }

    fn uniform(c: f64, k: usize, p: usize) -> VectorGridField {
        VectorGridField::from_mode(&VectorModeField::new(ModeField::constant(c), ModeField::zero()), k, p).0
    }

    #[test]
    fn constant_base_flow_without_perturbation_is_steady() {
        let t = rhs_shifted(
            &VectorGridField::zeros(4, 8),
            &uniform(1.5, 4, 8),
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(t.dvdt.l2_norm() < 1e-14);
        assert!(t.p.l2_norm() < 1e-14);
    }

    #[test]
    fn base_flow_tendency_matches_mode_algebra() {
        use crate::pressure::{build_pressure_problem_mode, solve_neumann_mode};
        // two Laplacian eigenvalues, so this is not a steady flow
        let ubar = VectorModeField::from_stream_function(&ModeField::sin_x1(1, Sin(1), 0.3).add(&ModeField::cos_x1(
            1,
            Sin(2),
            0.2,
        )));
        let pb = build_pressure_problem_mode(&VectorModeField::zero(), &ubar, BoundaryForm::FullTrace).unwrap();
        let p = solve_neumann_mode(&pb).unwrap().p;
        let want = ubar
            .advect_vector(&ubar)
            .unwrap()
            .scale_real(-1.0)
            .sub(&VectorModeField::new(p.differentiate(1), p.differentiate(2)));
        let (k, deg) = (6, 24);
        let got = rhs_shifted(
            &VectorGridField::zeros(k, deg),
            &VectorGridField::from_mode(&ubar, k, deg).0,
            &SolverSettings::default(),
        )
        .unwrap()
        .dvdt;
        let want = VectorGridField::from_mode(&want, k, deg).0;
        let rel = got.sub(&want).l2_norm() / want.l2_norm();
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn homogeneous_tendency_matches_vorticity_transport() {
        // curl of d_t v must equal -v . grad omega, the transport of vorticity
        let psi = ModeField::sin_x1(1, Sin(1), 0.4).add(&ModeField::cos_x1(1, Sin(2), 0.2));
        let vm = VectorModeField::from_stream_function(&psi);
        let omega = vm.comp2.differentiate(1).sub(&vm.comp1.differentiate(2));
        let transport = vm.advect(&omega).unwrap().scale_real(-1.0);
        let (k, p) = (6, 28);
        let v = VectorGridField::from_mode(&vm, k, p).0;
        let d = rhs_shifted(&v, &VectorGridField::zeros(k, p), &SolverSettings::default())
            .unwrap()
            .dvdt;
        let curl = d.comp2.diff(1).sub(&d.comp1.diff(2));
        let want = GridField::from_mode(&transport, k, p).0;
        assert!(curl.sub(&want).l2_norm() < 1e-8 * want.l2_norm());
        // the remaining freedom (div, wall flux, mean streamwise momentum) is pinned too
        assert!(d.divergence().l2_norm() < 1e-9 * d.l2_norm());
        assert!(d.normal_trace_norm() < 1e-9 * d.l2_norm());
        assert!(d.comp1.mean().norm() < 1e-12 * d.l2_norm());
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = sched();
        let st = SolverState::new(
            VectorGridField::zeros(3, 8),
            &VectorGridField::zeros(3, 8),
            &s,
            &SolverSettings::default(),
        )
        .unwrap();
        let mut st = st;
        for _ in 0..10 {
            st = step_rk4(&st, 1e-3, &VectorGridField::zeros(3, 8), &s, &SolverSettings::default()).unwrap();
        }
        assert_eq!(st.v.l2_norm(), 0.0);
    }

    #[test]
    fn step_refuses_cfl_violation_and_overrun() {
        let s = sched();
        let (k, p) = (4, 16);
        let ubar = uniform(1.0, k, p);
        let st = SolverState::new(small_v(k, p), &ubar, &s, &SolverSettings::default()).unwrap();
        assert!(matches!(
            step_rk4(&st, 0.05, &ubar, &s, &SolverSettings::default()),
            Err(Error::Precondition(_))
        ));
        let late = SolverState { t: 0.0999, ..st };
        assert!(matches!(
            step_rk4(&late, 0.001, &ubar, &s, &SolverSettings::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn run_halts_exactly_when_radius_is_exhausted() {
        let (k, p) = (6, 24);
        let spec = RunSpec {
            v0: small_v(k, p),
            ubar: uniform(1.0, k, p),
            schedule: sched(),
            dt: 1.5e-3,
            norms: params(),
            settings: SolverSettings::default(),
            ceiling: None,
            sample_every: 5,
            checkpoint_every: None,
            checkpoint_dir: None,
        };
        let out = run(&spec).unwrap();
        assert_eq!(out.final_state.t, 0.1);
        assert_eq!(out.final_state.tau, 0.0);
        assert_eq!(out.series.last().unwrap().t, 0.1);
    }

    #[test]
    fn shift_is_a_group_action() {
        let v = small_v(4, 8);
        let back = shift_x1(&shift_x1(&v, 0.3), -0.3);
        assert!(back.sub(&v).l2_norm() < 1e-15);
        let whole = shift_x1(&v, 1.0);
        assert!(whole.sub(&v).l2_norm() < 1e-14);
    }

    #[test]
    fn picard_zero_data_gives_zero_trace() {
        let z = VectorGridField::zeros(2, 6);
        let out = picard_run(
            &z,
            &z,
            &sched(),
            3,
            &params(),
            &SolverSettings::default(),
            &PicardSettings::default(),
        )
        .unwrap();
        assert!(out.trace.a.iter().chain(&out.trace.b).all(|&x| x == 0.0));
        assert!(out.converged);
    }
}
