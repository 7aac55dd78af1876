//! Neumann problems for the pressure in the channel.
//!
//! `Delta p = rhs` in `T x (0,1)`, `d2 p = g_bottom` at `x2 = 0` and
//! `d2 p = g_top` at `x2 = 1`, normalized by `int p = 0`. The boundary data are
//! values of `d2 p`, not of the outward normal derivative, so the
//! compatibility condition reads `int rhs = g_top[0] - g_bottom[0]`.
//!
//! Two solvers: a closed-form one for trig-pure [`ModeField`] data and a
//! Chebyshev tau solver for [`GridField`] data.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic_norms::{norm, DerivativeTable, Family, NormParams};
use crate::chebyshev;
use crate::grid_field::{GridField, VectorGridField};
use crate::mode_field::{Anchor, FourierCoeffs, ModeField, Side, Term, VectorModeField, VerticalBasis};
use crate::{Error, Result};

/// Defect above which a grid problem is rejected as incompatible.
pub const GRID_DEFECT_TOL: f64 = 1e-8;
/// Relative defect tolerance for mode problems (exact up to roundoff).
pub const MODE_DEFECT_TOL: f64 = 1e-12;

/// Which wall datum is used for the pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryForm {
    /// `-(ubar . grad)(ubar_2 + v_2)`
    BaseAdvection,
    /// `-((v + ubar) . grad (v + ubar))_2`, the normal component of the momentum equation
    #[default]
    FullTrace,
}

impl std::str::FromStr for BoundaryForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base-advection" => Ok(BoundaryForm::BaseAdvection),
            "full-trace" => Ok(BoundaryForm::FullTrace),
            other => Err(Error::Config(format!(
                "unknown boundary form {other:?} (expected base-advection or full-trace)"
            ))),
        }
    }
}

/// Residuals of a computed pressure.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualReport {
    /// `||Delta p - rhs||` (rhs after defect removal for grid problems)
    pub interior: f64,
    /// max over wavenumbers and walls of `|d2 p - g|`
    pub boundary: f64,
    /// `int p`
    pub mean: f64,
    /// `int rhs - (g_top[0] - g_bottom[0])` before any correction
    pub defect: f64,
}

/// `A : B = A_ij B_ji` of two gradients, i.e. `sum_ij d_j a_i d_i b_j`.
pub fn grad_contraction_mode(a: &VectorModeField, b: &VectorModeField) -> Result<ModeField> {
    let mut out = ModeField::zero();
    for i in 1..=2 {
        for j in 1..=2 {
            let t = a
                .component(i)
                .differentiate(j)
                .multiply(&b.component(j).differentiate(i))?;
            out = out.add(&t);
        }
    }
    Ok(out)
}

/// Neumann problem with mode-field data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeNeumannProblem {
    pub rhs: ModeField,
    pub g_bottom: FourierCoeffs,
    pub g_top: FourierCoeffs,
}

impl ModeNeumannProblem {
    pub fn defect(&self) -> f64 {
        (self.rhs.mean() - (self.g_top.get(0) - self.g_bottom.get(0))).norm()
    }

    fn scale(&self) -> f64 {
        let r: f64 = self.rhs.terms().iter().map(|t| t.amp.norm()).sum();
        let g: f64 = self
            .g_top
            .0
            .values()
            .chain(self.g_bottom.0.values())
            .map(|c| c.norm())
            .sum();
        r + g
    }
}

/// Pressure problem of the shifted system with mode data.
pub fn build_pressure_problem_mode(
    v: &VectorModeField,
    ubar: &VectorModeField,
    form: BoundaryForm,
) -> Result<ModeNeumannProblem> {
    if !v.is_impermeable() {
        return Err(Error::Precondition(
            "v must be impermeable (v2 = 0 on both walls)".into(),
        ));
    }
    let u = v.add(ubar);
    let rhs = grad_contraction_mode(&u, &u)?.scale_real(-1.0);
    let normal = match form {
        BoundaryForm::FullTrace => u.advect(&u.comp2)?,
        BoundaryForm::BaseAdvection => ubar.advect(&u.comp2)?,
    }
    .scale_real(-1.0);
    let pb = ModeNeumannProblem {
        rhs,
        g_bottom: normal.boundary_trace(Side::Bottom),
        g_top: normal.boundary_trace(Side::Top),
    };
    let d = pb.defect();
    if d > MODE_DEFECT_TOL * pb.scale().max(1.0) {
        return Err(Error::Compatibility {
            defect: d,
            tolerance: MODE_DEFECT_TOL,
        });
    }
    Ok(pb)
}

/// Solution of a mode problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePressure {
    pub p: ModeField,
    pub residual: ResidualReport,
}

/// Closed-form solve: per wavenumber a particular solution of
/// `p'' - (2 pi k)^2 p = f` from the trig terms, a hyperbolic lift (`k != 0`)
/// or a linear correction (`k = 0`) for the wall data, then zero mean.
pub fn solve_neumann_mode(pb: &ModeNeumannProblem) -> Result<ModePressure> {
    if !pb.rhs.is_trig_pure() {
        return Err(Error::NotTrigPure("pressure right-hand side"));
    }
    let d = pb.defect();
    if d > MODE_DEFECT_TOL * pb.scale().max(1.0) {
        return Err(Error::Compatibility {
            defect: d,
            tolerance: MODE_DEFECT_TOL,
        });
    }
    let mut ks: Vec<i64> = pb.rhs.terms().iter().map(|t| t.k).collect();
    ks.extend(pb.g_bottom.0.keys());
    ks.extend(pb.g_top.0.keys());
    ks.sort_unstable();
    ks.dedup();

    let mut terms: Vec<Term> = Vec::new();
    for &k in &ks {
        let lam = 2.0 * PI * k as f64;
        let lam2 = lam * lam;
        // particular solution and its wall derivatives
        let mut d_bot = Complex64::default();
        let mut d_top = Complex64::default();
        for t in pb.rhs.terms().iter().filter(|t| t.k == k) {
            let (basis, amp) = match t.basis {
                VerticalBasis::Monomial(0) if k == 0 => (VerticalBasis::Monomial(2), t.amp * 0.5),
                VerticalBasis::Monomial(0) => (t.basis, -t.amp / lam2),
                VerticalBasis::Cos(m) | VerticalBasis::Sin(m) => {
                    let mu = m as f64 * PI;
                    (t.basis, -t.amp / (mu * mu + lam2))
                }
                _ => unreachable!("trig-pure checked above"),
            };
            terms.push(Term { k, basis, amp });
            if let Some((db, f)) = basis.derivative() {
                d_bot += amp * f * db.wall_value(Side::Bottom);
                d_top += amp * f * db.wall_value(Side::Top);
            }
        }
        let h_bot = pb.g_bottom.get(k) - d_bot;
        let h_top = pb.g_top.get(k) - d_top;
        if k == 0 {
            // compatibility makes h_bot = h_top up to roundoff
            let c = 0.5 * (h_bot + h_top);
            terms.push(Term {
                k,
                basis: VerticalBasis::X2,
                amp: c,
            });
        } else {
            let mu = lam.abs();
            let s = mu * mu.sinh();
            // [h_top cosh(mu x2) - h_bot cosh(mu (1 - x2))] / (mu sinh mu)
            terms.push(Term {
                k,
                basis: VerticalBasis::Cosh(mu, Anchor::Bottom),
                amp: h_top / s,
            });
            terms.push(Term {
                k,
                basis: VerticalBasis::Cosh(mu, Anchor::Top),
                amp: -h_bot / s,
            });
        }
    }
    let p0 = ModeField::from_terms(terms);
    let mean = p0.mean();
    let p = p0.sub(&ModeField::mode(0, VerticalBasis::ONE, mean));
    let residual = mode_residual(pb, &p, d);
    Ok(ModePressure { p, residual })
}

fn mode_residual(pb: &ModeNeumannProblem, p: &ModeField, defect: f64) -> ResidualReport {
    let lap = p.derivative([2, 0]).add(&p.derivative([0, 2]));
    let interior = lap.sub(&pb.rhs).l2_norm();
    let dp = p.differentiate(2);
    let bot = dp.boundary_trace(Side::Bottom).sub(&pb.g_bottom);
    let top = dp.boundary_trace(Side::Top).sub(&pb.g_top);
    let boundary = bot
        .0
        .values()
        .chain(top.0.values())
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    ResidualReport {
        interior,
        boundary,
        mean: p.mean().norm(),
        defect,
    }
}

/// Neumann problem with grid data; wall data indexed `k + K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridNeumannProblem {
    pub rhs: GridField,
    pub g_bottom: Vec<Complex64>,
    pub g_top: Vec<Complex64>,
}

impl GridNeumannProblem {
    pub fn defect(&self) -> f64 {
        let k0 = self.rhs.k_max();
        (self.rhs.mean() - (self.g_top[k0] - self.g_bottom[k0])).norm()
    }

    /// Grid version of a mode problem (exact wall data, sampled interior).
    pub fn from_mode(pb: &ModeNeumannProblem, k: usize, p: usize) -> Self {
        let wall = |g: &FourierCoeffs| (-(k as i64)..=k as i64).map(|w| g.get(w)).collect();
        GridNeumannProblem {
            rhs: GridField::from_mode(&pb.rhs, k, p).0,
            g_bottom: wall(&pb.g_bottom),
            g_top: wall(&pb.g_top),
        }
    }
}

/// Solution of a grid problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPressure {
    pub p: GridField,
    pub residual: ResidualReport,
}

struct TauSystem {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Dense `d/dx2` matrix on Chebyshev coefficients of degree `p`.
fn derivative_matrix(p: usize) -> DMatrix<f64> {
    let n = p + 1;
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::default(); n];
        e[j] = Complex64::new(1.0, 0.0);
        for (i, v) in chebyshev::derivative_coeffs(&e).into_iter().enumerate() {
            d[(i, j)] = v.re;
        }
    }
    d
}

/// The `(P + 1)`-square tau matrix for wavenumber `k`; for `k = 0` the
/// constant mode and the zeroth interior row are removed, leaving `P` rows.
fn tau_matrix(k: i64, p: usize) -> DMatrix<f64> {
    let d = derivative_matrix(p);
    let lam2 = (2.0 * PI * k as f64).powi(2);
    let op = &d * &d - DMatrix::identity(p + 1, p + 1) * lam2;
    let n = p + 1;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..p.saturating_sub(1) {
        a.set_row(i, &op.row(i));
    }
    for j in 0..n {
        let (top, bot) = chebyshev::dt_at_walls(j);
        a[(n - 2, j)] = 2.0 * top;
        a[(n - 1, j)] = 2.0 * bot;
    }
    if k == 0 {
        a.remove_row(0).remove_column(0)
    } else {
        a
    }
}

fn tau_system(k: i64, p: usize) -> Result<Arc<TauSystem>> {
    static CACHE: OnceLock<Mutex<HashMap<(i64, usize), Arc<TauSystem>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().unwrap().get(&(k, p)) {
        return Ok(s.clone());
    }
    let a = tau_matrix(k, p);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lu = a.lu();
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(pivot > 1e-13 * scale) {
        return Err(Error::SingularTau { k });
    }
    let s = Arc::new(TauSystem { lu });
    Ok(cache.lock().unwrap().entry((k, p)).or_insert(s).clone())
}

fn solve_real(sys: &TauSystem, b: DVector<f64>, k: i64) -> Result<DVector<f64>> {
    sys.lu.solve(&b).ok_or(Error::SingularTau { k })
}

/// Chebyshev tau solve, one dense system per wavenumber. At `k = 0` the
/// compatibility defect of the tau-truncated data is subtracted from the
/// constant coefficient of the right side before solving, and the free
/// constant is fixed by `int p = 0`.
pub fn solve_neumann_grid(pb: &GridNeumannProblem) -> Result<GridPressure> {
    let defect = pb.defect();
    let scale = pb.rhs.l2_norm()
        + pb.g_top
            .iter()
            .chain(&pb.g_bottom)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    if defect > GRID_DEFECT_TOL * scale.max(1.0) {
        return Err(Error::Compatibility {
            defect,
            tolerance: GRID_DEFECT_TOL,
        });
    }
    let (kmax, p) = (pb.rhs.k_max(), pb.rhs.degree());
    assert!(p >= 2, "tau solve needs degree at least 2");
    let mut sol = GridField::zeros(kmax, p);
    let mut corrected = pb.rhs.clone();
    for k in pb.rhs.wavenumbers() {
        let ik = (k + kmax as i64) as usize;
        let f = pb.rhs.row(k);
        let (gt, gb) = (pb.g_top[ik], pb.g_bottom[ik]);
        let sys = tau_system(k, p)?;
        let mut out = vec![Complex64::default(); p + 1];
        if k == 0 {
            let integral: Complex64 = (0..=p - 2).map(|n| f[n] * (0.5 * chebyshev::t_integral(n))).sum();
            let c = integral - (gt - gb);
            corrected.row_mut(0)[0] -= c;
            for part in 0..2 {
                let pick = |z: Complex64| if part == 0 { z.re } else { z.im };
                let mut b = DVector::zeros(p);
                for n in 1..=p - 2 {
                    b[n - 1] = pick(f[n]);
                }
                b[p - 2] = pick(gt);
                b[p - 1] = pick(gb);
                let x = solve_real(&sys, b, k)?;
                for j in 1..=p {
                    if part == 0 {
                        out[j].re = x[j - 1];
                    } else {
                        out[j].im = x[j - 1];
                    }
                }
            }
            // zero mean: a_0 = -(1/2) sum_{j >= 1} a_j int_{-1}^{1} T_j
            out[0] = -(1..=p)
                .map(|j| out[j] * (0.5 * chebyshev::t_integral(j)))
                .sum::<Complex64>();
        } else {
            for part in 0..2 {
                let pick = |z: Complex64| if part == 0 { z.re } else { z.im };
                let mut b = DVector::zeros(p + 1);
                for n in 0..=p - 2 {
                    b[n] = pick(f[n]);
                }
                b[p - 1] = pick(gt);
                b[p] = pick(gb);
                let x = solve_real(&sys, b, k)?;
                for j in 0..=p {
                    if part == 0 {
                        out[j].re = x[j];
                    } else {
                        out[j].im = x[j];
                    }
                }
            }
        }
        sol.row_mut(k).copy_from_slice(&out);
    }
    let residual = grid_residual(pb, &corrected, &sol, defect);
    Ok(GridPressure { p: sol, residual })
}

fn grid_residual(pb: &GridNeumannProblem, rhs: &GridField, p: &GridField, defect: f64) -> ResidualReport {
    let lap = p.diff(1).diff(1).add(&p.diff(2).diff(2));
    let interior = lap.sub(rhs).l2_norm();
    let dp = p.diff(2);
    let mut boundary: f64 = 0.0;
    for (tr, g) in [(dp.trace(Side::Bottom), &pb.g_bottom), (dp.trace(Side::Top), &pb.g_top)] {
        for (a, b) in tr.iter().zip(g) {
            boundary = boundary.max((a - b).norm());
        }
    }
    ResidualReport {
        interior,
        boundary,
        mean: p.mean().norm(),
        defect,
    }
}

/// `N = -(u . grad) u` by dealiased products, with the six fine-grid
/// transforms shared between the two components.
pub fn advection_terms(u: &VectorGridField) -> VectorGridField {
    let (k, p) = (u.k_max(), u.degree());
    let fine = |f: &GridField| f.to_fine();
    let (u1, u2) = (fine(&u.comp1), fine(&u.comp2));
    let component = |c: &GridField| {
        let prod = u1.mul(&fine(&c.diff(1)));
        let mut vals = u2.mul(&fine(&c.diff(2)));
        for (a, b) in vals.values.iter_mut().zip(&prod.values) {
            *a = -(*a + b);
        }
        GridField::from_fine(k, p, &vals)
    };
    VectorGridField::new(component(&u.comp1), component(&u.comp2))
}

/// Zero every Chebyshev coefficient above `degree`.
pub fn truncate_chebyshev(f: &GridField, degree: usize) -> GridField {
    let mut out = f.clone();
    for k in f.wavenumbers() {
        for c in out.row_mut(k).iter_mut().skip(degree + 1) {
            *c = Complex64::default();
        }
    }
    out
}

/// Pressure problem of the shifted system on the grid, together with the
/// advection field `N` it was built from.
///
/// The interior datum is `div N`, which equals `-grad u : grad u` for
/// solenoidal `u`. `N1` is cut to degree `P - 2` and `N2` to `P - 1`, so
/// `div N` lies inside the rows the tau system enforces; with `d1 p` cut the
/// same way, `N - grad p` is then solenoidal to rounding.
pub fn build_pressure_problem_grid(
    v: &VectorGridField,
    ubar: &VectorGridField,
    form: BoundaryForm,
) -> Result<(GridNeumannProblem, VectorGridField)> {
    let scale = v.l2_norm().max(1.0);
    let trace = v.normal_trace_norm();
    if trace > 1e-9 * scale {
        return Err(Error::Precondition(format!(
            "v must be impermeable: wall trace of v2 is {trace:.3e}"
        )));
    }
    let u = v.add(ubar);
    let deg = u.degree();
    let full = advection_terms(&u);
    let n = VectorGridField::new(
        truncate_chebyshev(&full.comp1, deg - 2),
        truncate_chebyshev(&full.comp2, deg - 1),
    );
    let normal = match form {
        BoundaryForm::FullTrace => n.comp2.clone(),
        BoundaryForm::BaseAdvection => {
            let (k, p) = (u.k_max(), u.degree());
            let a = ubar.comp1.to_fine().mul(&u.comp2.diff(1).to_fine());
            let mut b = ubar.comp2.to_fine().mul(&u.comp2.diff(2).to_fine());
            for (x, y) in b.values.iter_mut().zip(&a.values) {
                *x = -(*x + y);
            }
            GridField::from_fine(k, p, &b)
        }
    };
    let pb = GridNeumannProblem {
        rhs: n.divergence(),
        g_bottom: normal.trace(Side::Bottom),
        g_top: normal.trace(Side::Top),
    };
    Ok((pb, n))
}

/// Gradient of a scalar field as a vector field.
pub fn gradient_grid(p: &GridField) -> VectorGridField {
    VectorGridField::new(p.diff(1), p.diff(2))
}

pub fn gradient_mode(p: &ModeField) -> VectorModeField {
    VectorModeField::new(p.differentiate(1), p.differentiate(2))
}

/// Measured constant of the pressure estimate for the Neumann problem
/// `Delta p = grad f1 : grad f2`, `d2 p = g1 . grad g2` on the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn pressure_estimate_problem(
    f1: &VectorModeField,
    f2: &VectorModeField,
    g1: &VectorModeField,
    g2: &ModeField,
) -> Result<ModeNeumannProblem> {
    let rhs = grad_contraction_mode(f1, f2)?;
    let normal = g1.advect(g2)?;
    Ok(ModeNeumannProblem {
        rhs,
        g_bottom: normal.boundary_trace(Side::Bottom),
        g_top: normal.boundary_trace(Side::Top),
    })
}

/// `||grad p||_X / (||f1||_X~ ||f2||_X~ + ||g1||_X~ ||g2||_Y-)`.
pub fn pressure_estimate_ratio(
    f1: &VectorModeField,
    f2: &VectorModeField,
    g1: &VectorModeField,
    g2: &ModeField,
    params: &NormParams,
) -> Result<PressureEstimate> {
    let pb = pressure_estimate_problem(f1, f2, g1, g2)?;
    let p = solve_neumann_mode(&pb)?.p;
    let n = params.n_max;
    let lhs = norm(
        &DerivativeTable::from_vector_mode(&gradient_mode(&p), n),
        params,
        Family::X,
    );
    let xt = |f: &VectorModeField| norm(&DerivativeTable::from_vector_mode(f, n), params, Family::XTilde);
    let rhs = xt(f1) * xt(f2) + xt(g1) * norm(&DerivativeTable::from_mode(g2, n), params, Family::YBar);
    if lhs == 0.0 {
        return Ok(PressureEstimate { lhs, rhs, ratio: 0.0 });
    }
    if rhs == 0.0 {
        return Err(Error::ZeroDenominator("right side of the pressure estimate"));
    }
    Ok(PressureEstimate {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// Manufactured pair `p = cos(2 pi x1) cos(pi x2)` with `Delta p = -5 pi^2 p`
/// and `d2 p = 0` on both walls.
pub fn manufactured_problem() -> (ModeNeumannProblem, ModeField) {
    let pb = ModeNeumannProblem {
        rhs: ModeField::cos_x1(1, VerticalBasis::Cos(1), -5.0 * PI * PI),
        g_bottom: FourierCoeffs::zero(),
        g_top: FourierCoeffs::zero(),
    };
    (pb, ModeField::cos_x1(1, VerticalBasis::Cos(1), 1.0))
}

/// One row of the grid convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub resolution: String,
    pub k: usize,
    pub p: usize,
    /// relative L2 error against the exact solution
    pub error: f64,
    /// largest of the interior and wall residuals
    pub residual: f64,
    /// error at the previous degree over error at this one
    pub ratio: Option<f64>,
}

/// Grid solves of the manufactured problem at increasing Chebyshev degree.
pub fn manufactured_convergence(k: usize, degrees: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let (pb, exact) = manufactured_problem();
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &p in degrees {
        let sol = solve_neumann_grid(&GridNeumannProblem::from_mode(&pb, k, p))?;
        let ex = GridField::from_mode(&exact, k, p).0;
        let error = sol.p.sub(&ex).l2_norm() / ex.l2_norm();
        rows.push(ConvergenceRow {
            resolution: format!("K{k}P{p}"),
            k,
            p,
            error,
            residual: sol.residual.interior.max(sol.residual.boundary),
            ratio: rows.last().map(|r| r.error / error),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_field::VerticalBasis::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn manufactured() -> ModeNeumannProblem {
        ModeNeumannProblem {
            rhs: ModeField::cos_x1(1, Cos(1), -5.0 * PI * PI),
            g_bottom: FourierCoeffs::zero(),
            g_top: FourierCoeffs::zero(),
        }
    }

    #[test]
    fn manufactured_mode_solution() {
        let sol = solve_neumann_mode(&manufactured()).unwrap();
        let exact = ModeField::cos_x1(1, Cos(1), 1.0);
        assert!(sol.p.sub(&exact).l2_norm() < 1e-14);
        assert!(sol.residual.interior < 1e-12);
        assert!(sol.residual.mean < 1e-15);
    }

    #[test]
    fn harmonic_lift() {
        let g = PI * (2.0 * PI).sinh();
        let mut top = FourierCoeffs::zero();
        top.0.insert(1, c(g));
        top.0.insert(-1, c(g));
        let pb = ModeNeumannProblem {
            rhs: ModeField::zero(),
            g_bottom: FourierCoeffs::zero(),
            g_top: top,
        };
        let sol = solve_neumann_mode(&pb).unwrap();
        // cosh(2 pi x2) cos(2 pi x1) has zero mean already
        let exact = ModeField::cos_x1(1, Cosh(2.0 * PI, Anchor::Bottom), 1.0);
        let err = sol.p.sub(&exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-13, "{err}");
        assert!(sol.residual.interior < 1e-9 && sol.residual.boundary < 1e-9);
    }

    #[test]
    fn zero_data_gives_zero() {
        let pb = ModeNeumannProblem {
            rhs: ModeField::zero(),
            g_bottom: FourierCoeffs::zero(),
            g_top: FourierCoeffs::zero(),
        };
        assert!(solve_neumann_mode(&pb).unwrap().p.is_empty());
    }

    #[test]
    fn grid_manufactured_solution() {
        let pb = GridNeumannProblem::from_mode(&manufactured(), 2, 16);
        let sol = solve_neumann_grid(&pb).unwrap();
        let exact = GridField::from_mode(&ModeField::cos_x1(1, Cos(1), 1.0), 2, 16).0;
        let err = sol.p.sub(&exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-10, "{err}");
        assert!(sol.residual.mean < 1e-12);
    }

    #[test]
    fn incompatible_grid_data() {
        let pb = GridNeumannProblem {
            rhs: GridField::from_real_fn(2, 8, |_, _| 1.0),
            g_bottom: vec![Complex64::default(); 5],
            g_top: vec![Complex64::default(); 5],
        };
        match solve_neumann_grid(&pb) {
            Err(Error::Compatibility { defect, .. }) => assert!((defect - 1.0).abs() < 1e-13),
            other => panic!("expected compatibility error, got {other:?}"),
        }
    }

    #[test]
    fn constant_base_flow_has_no_pressure() {
        let ubar = VectorModeField::new(ModeField::constant(1.3), ModeField::zero());
        let pb = build_pressure_problem_mode(&VectorModeField::zero(), &ubar, BoundaryForm::FullTrace).unwrap();
        assert!(pb.rhs.is_empty());
        assert!(pb.g_top.is_zero() && pb.g_bottom.is_zero());
    }

    #[test]
    fn forms_agree_when_normal_base_flow_vanishes() {
        let psi = ModeField::sin_x1(1, Sin(1), 0.4);
        let ubar = VectorModeField::from_stream_function(&psi);
        let v = VectorModeField::from_stream_function(&ModeField::cos_x1(2, Sin(2), 0.1));
        let a = build_pressure_problem_mode(&v, &ubar, BoundaryForm::FullTrace).unwrap();
        let b = build_pressure_problem_mode(&v, &ubar, BoundaryForm::BaseAdvection).unwrap();
        assert_eq!(a.g_top, b.g_top);
        assert_eq!(a.g_bottom, b.g_bottom);
    }

    #[test]
    fn estimate_ratio_vanishes_without_data() {
        let z = VectorModeField::zero();
        let g2 = ModeField::sin_x1(1, Cos(1), 1.0);
        let p = NormParams::new(3, 0.1, 0.1, 8).unwrap();
        let r = pressure_estimate_ratio(&z, &z, &z, &g2, &p).unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    fn cellular_flow() -> VectorModeField {
        // psi = sin(pi x2) sin(2 pi x1)
        VectorModeField::from_stream_function(&ModeField::sin_x1(1, Sin(1), 1.0))
    }

    #[test]
    fn cellular_flow_rhs_matches_hand_expansion() {
        // -grad u : grad u = -4 pi^4 (cos(2 pi x2) + cos(4 pi x1)), worked out by hand
        let pb =
            build_pressure_problem_mode(&VectorModeField::zero(), &cellular_flow(), BoundaryForm::FullTrace).unwrap();
        let pi4 = PI.powi(4);
        for &(x1, x2) in &[(0.1, 0.2), (0.37, 0.9), (0.8, 0.55), (0.0, 0.0)] {
            let want = -4.0 * pi4 * ((2.0 * PI * x2).cos() + (4.0 * PI * x1).cos());
            assert!((pb.rhs.eval(x1, x2).re - want).abs() < 1e-10 * pi4);
        }
    }

    #[test]
    fn spectral_decay_in_degree() {
        let exact = ModeField::cos_x1(1, Cos(1), 1.0);
        let err = |p: usize| {
            let sol = solve_neumann_grid(&GridNeumannProblem::from_mode(&manufactured(), 2, p)).unwrap();
            sol.p.sub(&GridField::from_mode(&exact, 2, p).0).l2_norm()
        };
        let (e8, e16) = (err(8), err(16));
        assert!(e8 / e16.max(f64::MIN_POSITIVE) > 1e3, "{e8} {e16}");
    }

    #[test]
    fn grid_and_mode_solvers_agree() {
        let psi = ModeField::sin_x1(1, Sin(1), 0.3).add(&ModeField::cos_x1(2, Sin(2), 0.1));
        let ubar = VectorModeField::from_stream_function(&psi)
            .add(&VectorModeField::new(ModeField::constant(1.0), ModeField::zero()));
        let v = VectorModeField::from_stream_function(&ModeField::sin_x1(1, Sin(2), 0.05));
        let pb = build_pressure_problem_mode(&v, &ubar, BoundaryForm::FullTrace).unwrap();
        let pm = solve_neumann_mode(&pb).unwrap();
        let pg = solve_neumann_grid(&GridNeumannProblem::from_mode(&pb, 8, 32)).unwrap();
        let want = GridField::from_mode(&pm.p, 8, 32).0;
        let rel = pg.p.sub(&want).l2_norm() / want.l2_norm();
        assert!(rel < 1e-8, "{rel}");
        assert!(pg.residual.mean < 1e-12 * want.l2_norm());
        assert!(pg.residual.boundary < 1e-9);
    }

    #[test]
    fn grid_assembly_matches_mode_assembly() {
        let ubar = cellular_flow();
        let v = VectorModeField::from_stream_function(&ModeField::cos_x1(1, Sin(2), 0.2));
        let pm = build_pressure_problem_mode(&v, &ubar, BoundaryForm::FullTrace).unwrap();
        let (k, p) = (6, 24);
        let (pg, _) = build_pressure_problem_grid(
            &VectorGridField::from_mode(&v, k, p).0,
            &VectorGridField::from_mode(&ubar, k, p).0,
            BoundaryForm::FullTrace,
        )
        .unwrap();
        let want = GridNeumannProblem::from_mode(&pm, k, p);
        let scale = want.rhs.l2_norm();
        assert!(pg.rhs.sub(&want.rhs).l2_norm() < 1e-10 * scale);
        for (a, b) in pg
            .g_top
            .iter()
            .zip(&want.g_top)
            .chain(pg.g_bottom.iter().zip(&want.g_bottom))
        {
            assert!((a - b).norm() < 1e-10 * scale);
        }
    }
}
