//! Measured constants of the functional inequalities behind the local theory.
//!
//! Every inequality of the form `lhs <~ rhs` is turned into a ratio `lhs / rhs`
//! on concrete fields. All sums over multi-indices are truncated at
//! `NormParams::n_max` on both sides.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic_norms::{
    coeff_flat, norm, DerivativeTable, Family, NormParams, NormValues, RadiusSchedule, CAP_TOL,
};
use crate::grid_field::{GridField, VectorGridField};
use crate::mode_field::VectorModeField;
use crate::{Error, Result};

/// Right sides below this are reported as vacuous instead of divided by.
pub const VACUOUS_RHS: f64 = 1e-14;

/// One measured inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMeasurement {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Both sides below [`VACUOUS_RHS`]: the inequality holds trivially.
    pub vacuous: bool,
    pub r: u32,
    pub tau: f64,
    pub eps: f64,
    pub n_max: usize,
    pub fields: String,
}

impl EstimateMeasurement {
    pub fn new(name: &str, lhs: f64, rhs: f64, p: &NormParams, fields: &str) -> Result<Self> {
        let vacuous = rhs < VACUOUS_RHS;
        if vacuous && lhs.abs() >= VACUOUS_RHS {
            return Err(Error::ZeroDenominator("right side of a measured estimate"));
        }
        Ok(EstimateMeasurement {
            name: name.to_string(),
            lhs,
            rhs,
            ratio: if vacuous { 0.0 } else { lhs / rhs },
            vacuous,
            r: p.r,
            tau: p.tau,
            eps: p.eps,
            n_max: p.n_max,
            fields: fields.to_string(),
        })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Multi-index binomial `C(alpha, beta)`.
pub fn binomial2(alpha: [usize; 2], beta: [usize; 2]) -> f64 {
    binomial(alpha[0], beta[0]) * binomial(alpha[1], beta[1])
}

/// Multi-indices `beta <= alpha` with `beta != 0`.
fn nonzero_below(alpha: [usize; 2]) -> impl Iterator<Item = [usize; 2]> {
    (0..=alpha[0])
        .flat_map(move |b1| (0..=alpha[1]).map(move |b2| [b1, b2]))
        .filter(|b| b[0] + b[1] > 0)
}

/// `S_alpha(u, w) = sum_{0 < beta <= alpha} C(alpha, beta) (d^beta u . grad) d^(alpha - beta) w`.
pub fn s_alpha_mode(u: &VectorModeField, w: &VectorModeField, alpha: [usize; 2]) -> Result<VectorModeField> {
    let mut out = VectorModeField::zero();
    for beta in nonzero_below(alpha) {
        let rest = [alpha[0] - beta[0], alpha[1] - beta[1]];
        let term = u.derivative(beta).advect_vector(&w.derivative(rest))?;
        out = out.add(&term.scale_real(binomial2(alpha, beta)));
    }
    Ok(out)
}

/// `(u . grad) w` for vector grid fields, dealiased.
pub fn advect_grid(u: &VectorGridField, w: &VectorGridField) -> VectorGridField {
    let (k, p) = (u.k_max(), u.degree());
    let (u1, u2) = (u.comp1.to_fine(), u.comp2.to_fine());
    let comp = |c: &GridField| {
        let mut a = u1.mul(&c.diff(1).to_fine());
        let b = u2.mul(&c.diff(2).to_fine());
        for (x, y) in a.values.iter_mut().zip(&b.values) {
            *x += y;
        }
        GridField::from_fine(k, p, &a)
    };
    VectorGridField::new(comp(&w.comp1), comp(&w.comp2))
}

/// Largest derivative order of `f` whose roundoff stays below [`CAP_TOL`].
pub fn grid_conditioning_cap(f: &VectorGridField, n: usize) -> usize {
    DerivativeTable::from_vector_grid_unchecked(f, n).conditioning_cap(CAP_TOL)
}

/// Grid version of [`s_alpha_mode`]. Needs `|alpha| + 1` trustworthy
/// derivatives of `w` and `|alpha|` of `u`.
pub fn s_alpha_grid(u: &VectorGridField, w: &VectorGridField, alpha: [usize; 2]) -> Result<VectorGridField> {
    let order = alpha[0] + alpha[1];
    for (f, need) in [(u, order), (w, order + 1)] {
        let cap = grid_conditioning_cap(f, need);
        if cap < need {
            return Err(Error::Conditioning {
                requested: need,
                max_order: cap,
            });
        }
    }
    let mut out = VectorGridField::zeros(u.k_max(), u.degree());
    for beta in nonzero_below(alpha) {
        let rest = [alpha[0] - beta[0], alpha[1] - beta[1]];
        let term = advect_grid(&u.derivative(beta), &w.derivative(rest));
        out = out.axpy(binomial2(alpha, beta), &term);
    }
    Ok(out)
}

/// Relative defect of `d^alpha((u . grad) w) = (u . grad) d^alpha w + S_alpha(u, w)`.
pub fn leibniz_defect_mode(u: &VectorModeField, w: &VectorModeField, alpha: [usize; 2]) -> Result<f64> {
    let whole = u.advect_vector(w)?.derivative(alpha);
    let split = u.advect_vector(&w.derivative(alpha))?.add(&s_alpha_mode(u, w, alpha)?);
    let scale = whole.l2_norm().max(f64::MIN_POSITIVE);
    Ok(whole.sub(&split).l2_norm() / scale)
}

pub fn leibniz_defect_grid(u: &VectorGridField, w: &VectorGridField, alpha: [usize; 2]) -> Result<f64> {
    let whole = advect_grid(u, w).derivative(alpha);
    let split = advect_grid(u, &w.derivative(alpha)).add(&s_alpha_grid(u, w, alpha)?);
    let scale = whole.l2_norm().max(f64::MIN_POSITIVE);
    Ok(whole.sub(&split).l2_norm() / scale)
}

/// Orders `r..=n_max` as multi-indices `(alpha1, alpha2)`.
fn weighted_indices(p: &NormParams) -> Vec<[usize; 2]> {
    (p.r as usize..=p.n_max)
        .flat_map(|n| (0..=n).map(move |a2| [n - a2, a2]))
        .collect()
}

/// Derivatives of a vector mode field, memoized by multi-index.
struct Derivatives<'a> {
    f: &'a VectorModeField,
    cache: HashMap<[usize; 2], VectorModeField>,
}

impl<'a> Derivatives<'a> {
    fn new(f: &'a VectorModeField, n: usize) -> Self {
        let mut cache = HashMap::new();
        for m in 0..=n {
            for a2 in 0..=m {
                let a = [m - a2, a2];
                cache.insert(a, f.derivative(a));
            }
        }
        Derivatives { f, cache }
    }

    fn get(&self, a: [usize; 2]) -> VectorModeField {
        self.cache.get(&a).cloned().unwrap_or_else(|| self.f.derivative(a))
    }
}

/// Product estimate: `sum c_alpha ||S_alpha(u, v)||` against
/// `||v||_Y~ ||u||_X~ + ||v||_X~ ||u||_Y~`.
pub fn product_estimate_ratio(u: &VectorModeField, v: &VectorModeField, p: &NormParams) -> Result<EstimateMeasurement> {
    p.validate()?;
    let du = Derivatives::new(u, p.n_max);
    let dv = Derivatives::new(v, p.n_max + 1);
    let terms: Vec<Result<f64>> = weighted_indices(p)
        .into_par_iter()
        .map(|alpha| {
            let mut s = VectorModeField::zero();
            for beta in nonzero_below(alpha) {
                let rest = [alpha[0] - beta[0], alpha[1] - beta[1]];
                let t = du.get(beta).advect_vector(&dv.get(rest))?;
                s = s.add(&t.scale_real(binomial2(alpha, beta)));
            }
            Ok(coeff_flat(alpha, p, false)? * s.l2_norm())
        })
        .collect();
    let mut lhs = 0.0;
    for t in terms {
        lhs += t?;
    }
    let tu = DerivativeTable::from_vector_mode(u, p.n_max);
    let tv = DerivativeTable::from_vector_mode(v, p.n_max);
    let nu = NormValues::of(&tu, p);
    let nv = NormValues::of(&tv, p);
    let rhs = nv.y_tilde * nu.x_tilde + nv.x_tilde * nu.y_tilde;
    EstimateMeasurement::new("product", lhs, rhs, p, "u, v")
}

/// Frobenius-type L2 norm of the tensor `(a_i b_j)` for vector fields `a, b`,
/// summed over the listed x-derivatives.
fn tensor_norm(a: &VectorModeField, b: &VectorModeField, derivs: &[[usize; 2]]) -> Result<f64> {
    let mut s = 0.0;
    for i in 1..=2 {
        for j in 1..=2 {
            let prod = a.component(i).multiply(b.component(j))?;
            for &d in derivs {
                s += prod.derivative(d).l2_norm().powi(2);
            }
        }
    }
    Ok(s.sqrt())
}

fn vector_norm(f: &VectorModeField, derivs: &[[usize; 2]]) -> f64 {
    derivs
        .iter()
        .map(|&d| f.derivative(d).l2_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Measurements of the four related product estimates:
///
/// * `tangential-normal`: `sum_{alpha2 >= 2} c_alpha ||d^(alpha1, alpha2 - 2) grad (d_j u d_i v)||`
///   against `||u||_X~ ||v||_X~`,
/// * `tangential`: `sum c_alpha ||d1^(|alpha| - 1)(d_j u d_i v)||` against `||u||_X~ ||v||_X~`,
/// * `tangential-h1`: `sum c_alpha ||d1^(|alpha| - 1)(u . grad v)||_H1` against `||u||_X~ ||v||_Y-`,
/// * `advection-x`: `||u . grad v||_X` against `||u||_X~ ||v||_Y- + ||u||_Y- ||v||_X~`.
///
/// For the first two the index pair `(i, j)` with the largest left side is kept.
pub fn corollary_ratios(u: &VectorModeField, v: &VectorModeField, p: &NormParams) -> Result<Vec<EstimateMeasurement>> {
    p.validate()?;
    let idx = weighted_indices(p);
    let nu = NormValues::of(&DerivativeTable::from_vector_mode(u, p.n_max), p);
    let nv = NormValues::of(&DerivativeTable::from_vector_mode(v, p.n_max), p);

    let mut tn: f64 = 0.0;
    let mut tg: f64 = 0.0;
    for i in 1..=2 {
        for j in 1..=2 {
            let (a, b) = (u.derivative(unit(j)), v.derivative(unit(i)));
            let sums: Vec<Result<(f64, f64)>> = idx
                .par_iter()
                .map(|&alpha| {
                    let c = coeff_flat(alpha, p, false)?;
                    let n = alpha[0] + alpha[1];
                    let normal = if alpha[1] >= 2 {
                        let base = [alpha[0], alpha[1] - 2];
                        c * tensor_norm(&a, &b, &[[base[0] + 1, base[1]], [base[0], base[1] + 1]])?
                    } else {
                        0.0
                    };
                    let tang = c * tensor_norm(&a, &b, &[[n - 1, 0]])?;
                    Ok((normal, tang))
                })
                .collect();
            let (mut sn, mut st) = (0.0, 0.0);
            for s in sums {
                let (x, y) = s?;
                sn += x;
                st += y;
            }
            tn = tn.max(sn);
            tg = tg.max(st);
        }
    }

    let adv = u.advect_vector(v)?;
    let mut h1 = 0.0;
    for &alpha in &idx {
        let n = alpha[0] + alpha[1];
        h1 += coeff_flat(alpha, p, false)? * vector_norm(&adv, &[[n - 1, 0], [n, 0], [n - 1, 1]]);
    }
    let adv_x = norm(&DerivativeTable::from_vector_mode(&adv, p.n_max), p, Family::X);

    Ok(vec![
        EstimateMeasurement::new("tangential-normal", tn, nu.x_tilde * nv.x_tilde, p, "u, v")?,
        EstimateMeasurement::new("tangential", tg, nu.x_tilde * nv.x_tilde, p, "u, v")?,
        EstimateMeasurement::new("tangential-h1", h1, nu.x_tilde * nv.y_bar, p, "u, v")?,
        EstimateMeasurement::new(
            "advection-x",
            adv_x,
            nu.x_tilde * nv.y_bar + nu.y_bar * nv.x_tilde,
            p,
            "u, v",
        )?,
    ])
}

fn unit(axis: usize) -> [usize; 2] {
    if axis == 1 {
        [1, 0]
    } else {
        [0, 1]
    }
}

/// One sample of a trajectory's norm history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub tau: f64,
    pub v: NormValues,
}

/// A priori inequality along a trajectory:
/// `d/dt ||v||_X~ + M ||v||_Y` against
/// `||v||_X~ ||v||_Y~ + ||ubar||_Y- ||v||_X~ + ||ubar||_X~ ||v||_Y- + ||ubar||_X~ ||ubar||_Y-`,
/// all at `tau(t)`. The time derivative is a centered difference of the
/// sampled norms, so the norm's own dependence on `tau(t)` is included.
pub fn apriori_check(
    samples: &[NormSample],
    schedule: &RadiusSchedule,
    ubar: &DerivativeTable,
    p: &NormParams,
) -> Result<Vec<EstimateMeasurement>> {
    if samples.len() < 3 {
        return Err(Error::Precondition(
            "a priori check needs at least three samples".into(),
        ));
    }
    let h = samples[1].t - samples[0].t;
    let limit = 1e-3 * schedule.tau0 / schedule.m;
    if !(h > 0.0) || h > limit * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!(
            "sampling step {h:.3e} is too coarse; at most 1e-3 tau0 / M = {limit:.3e} is required"
        )));
    }
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(w[1].t.abs()) {
            return Err(Error::Precondition(
                "a priori check needs uniformly spaced samples".into(),
            ));
        }
    }
    samples
        .windows(3)
        .map(|w| {
            let s = &w[1];
            let pt = p.with_tau(s.tau);
            let ub = NormValues::of(ubar, &pt);
            let dxdt = (w[2].v.x_tilde - w[0].v.x_tilde) / (2.0 * h);
            let lhs = dxdt + schedule.m * s.v.y;
            let rhs =
                s.v.x_tilde * s.v.y_tilde + ub.y_bar * s.v.x_tilde + ub.x_tilde * s.v.y_bar + ub.x_tilde * ub.y_bar;
            EstimateMeasurement::new("apriori", lhs, rhs, &pt, &format!("t = {:.6}", s.t))
        })
        .collect()
}

/// Pressure estimate on each field `u` of a suite, with `f1 = f2 = g1 = u`
/// and `g2 = u2`: the data of the pressure of `u` itself.
pub fn pressure_estimate_suite(suite: &[VectorModeField], p: &NormParams) -> Result<Vec<EstimateMeasurement>> {
    suite
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let m = crate::pressure::pressure_estimate_ratio(u, u, u, &u.comp2, p)?;
            EstimateMeasurement::new("pressure", m.lhs, m.rhs, p, &format!("suite[{i}]"))
        })
        .collect()
}

/// Product estimate and its four relatives on neighbouring pairs
/// `(suite[i], suite[i + 1])`, cyclically.
pub fn product_suite(suite: &[VectorModeField], p: &NormParams) -> Result<Vec<EstimateMeasurement>> {
    let n = suite.len();
    let per_pair: Vec<Result<Vec<EstimateMeasurement>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (&suite[i], &suite[(i + 1) % n]);
            let tag = format!("suite[{i}], suite[{}]", (i + 1) % n);
            let mut out = vec![product_estimate_ratio(u, v, p)?];
            out.extend(corollary_ratios(u, v, p)?);
            for m in &mut out {
                m.fields = tag.clone();
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_pair {
        all.extend(r?);
    }
    Ok(all)
}

/// Largest ratio among measurements called `name`.
pub fn max_ratio(ms: &[EstimateMeasurement], name: &str) -> f64 {
    ms.iter()
        .filter(|m| m.name == name)
        .map(|m| m.ratio)
        .fold(0.0, f64::max)
}
