//! Truncated analytic norms with a shrinking radius.
//!
//! For a field `u` and multi-indices `alpha = (a1, a2)` the families are
//!
//! ```text
//! X  = sum_{|a| >= r}     |a|^r     / |a|! tau^{|a|-r}   eps^{a2} ||d^a u||
//! Y  = sum_{|a| >= r + 1} |a|^{r+1} / |a|! tau^{|a|-r-1} eps^{a2} ||d^a u||
//! Hr = sum_{|a| <= r} ||d^a u||
//! ```
//!
//! with `X~ = X + Hr`, `Y~ = tau Y + Hr` and `Y- = Y + Hr`. Sums run up to
//! `|a| = n_max`. Vector fields use the Euclidean L2 norm per multi-index.

use rayon::prelude::*;

use crate::grid_field::{GridField, VectorGridField};
use crate::mode_field::{ModeField, VectorModeField};
use crate::{Error, Result};

/// Default relative roundoff allowed per derivative order on grid fields.
pub const CAP_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub r: u32,
    pub tau: f64,
    pub eps: f64,
    pub n_max: usize,
}

impl NormParams {
    pub fn new(r: u32, tau: f64, eps: f64, n_max: usize) -> Result<Self> {
        let p = NormParams { r, tau, eps, n_max };
        p.validate()?;
        Ok(p)
    }

    /// `tau = 0` is admitted: it is where the radius schedule ends.
    pub fn validate(&self) -> Result<()> {
        if self.r < 3 {
            return Err(Error::Config(format!("r = {} but r >= 3 is required", self.r)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau = {} must be finite and nonnegative",
                self.tau
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if self.n_max < self.r as usize + 2 {
            return Err(Error::Config(format!(
                "n_max = {} but n_max >= r + 2 = {} is required",
                self.n_max,
                self.r + 2
            )));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        NormParams { tau, ..self }
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        NormParams { n_max, ..self }
    }
}

/// Norm families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    X,
    XTilde,
    Y,
    YTilde,
    YBar,
    Hr,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::X,
        Family::XTilde,
        Family::Y,
        Family::YTilde,
        Family::YBar,
        Family::Hr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::X => "X",
            Family::XTilde => "X~",
            Family::Y => "Y",
            Family::YTilde => "Y~",
            Family::YBar => "Y-",
            Family::Hr => "Hr",
        }
    }
}

/// `n^e / n!` in floating point.
fn power_over_factorial(n: usize, e: u32) -> f64 {
    let mut v = (n as f64).powi(e as i32);
    for j in 2..=n {
        v /= j as f64;
    }
    v
}

/// Weight of `||d^alpha u||` in the X (`y = false`) or Y (`y = true`) sum.
pub fn coeff_flat(alpha: [usize; 2], p: &NormParams, y: bool) -> Result<f64> {
    let n = alpha[0] + alpha[1];
    let r = p.r as usize;
    let shift = r + usize::from(y);
    if n < shift {
        return Err(Error::Precondition(format!(
            "|alpha| = {n} is below the {} threshold {shift}",
            if y { "Y" } else { "X" }
        )));
    }
    Ok(power_over_factorial(n, shift as u32) * p.tau.powi((n - shift) as i32) * p.eps.powi(alpha[1] as i32))
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `||d^alpha u||` for all `|alpha| <= n_max`, with roundoff estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable {
    n_max: usize,
    values: Vec<f64>,
    errors: Vec<f64>,
}

impl DerivativeTable {
    fn index(alpha: [usize; 2]) -> usize {
        tri(alpha[0] + alpha[1]) + alpha[1]
    }

    fn from_fn(n_max: usize, f: impl Fn(usize) -> Vec<(f64, f64)> + Sync) -> Self {
        // f(a1) returns (value, error) for a2 = 0..=n_max - a1
        let rows: Vec<Vec<(f64, f64)>> = (0..=n_max).into_par_iter().map(&f).collect();
        let len = tri(n_max + 1);
        let mut values = vec![0.0; len];
        let mut errors = vec![0.0; len];
        for (a1, row) in rows.into_iter().enumerate() {
            for (a2, (v, e)) in row.into_iter().enumerate() {
                let i = Self::index([a1, a2]);
                values[i] = v;
                errors[i] = e;
            }
        }
        DerivativeTable { n_max, values, errors }
    }

    /// Exact table of a mode field.
    pub fn from_mode(u: &ModeField, n_max: usize) -> Self {
        Self::from_fn(n_max, |a1| {
            let mut f = u.derivative([a1, 0]);
            let mut out = Vec::with_capacity(n_max - a1 + 1);
            for a2 in 0..=n_max - a1 {
                if a2 > 0 {
                    f = f.differentiate(2);
                }
                out.push((f.l2_norm(), 0.0));
            }
            out
        })
    }

    pub fn from_vector_mode(u: &VectorModeField, n_max: usize) -> Self {
        Self::from_mode(&u.comp1, n_max).euclidean(&Self::from_mode(&u.comp2, n_max))
    }

    /// Table of a grid field. Fails when some order up to `n_max` exceeds the
    /// roundoff tolerance `tol` (see [`DerivativeTable::conditioning_cap`]).
    pub fn from_grid(u: &GridField, n_max: usize, tol: f64) -> Result<Self> {
        let t = Self::from_grid_unchecked(u, n_max);
        let cap = t.conditioning_cap(tol);
        if cap < n_max {
            return Err(Error::Conditioning {
                requested: n_max,
                max_order: cap,
            });
        }
        Ok(t)
    }

    pub fn from_grid_unchecked(u: &GridField, n_max: usize) -> Self {
        Self::from_fn(n_max, |a1| {
            let mut f = u.derivative([a1, 0]);
            let mut out = Vec::with_capacity(n_max - a1 + 1);
            for a2 in 0..=n_max - a1 {
                if a2 > 0 {
                    f = f.diff(2);
                }
                out.push((f.l2_norm(), u.derivative_error_estimate([a1, a2])));
            }
            out
        })
    }

    pub fn from_vector_grid(u: &VectorGridField, n_max: usize, tol: f64) -> Result<Self> {
        let t = Self::from_grid_unchecked(&u.comp1, n_max).euclidean(&Self::from_grid_unchecked(&u.comp2, n_max));
        let cap = t.conditioning_cap(tol);
        if cap < n_max {
            return Err(Error::Conditioning {
                requested: n_max,
                max_order: cap,
            });
        }
        Ok(t)
    }

    pub fn from_vector_grid_unchecked(u: &VectorGridField, n_max: usize) -> Self {
        Self::from_grid_unchecked(&u.comp1, n_max).euclidean(&Self::from_grid_unchecked(&u.comp2, n_max))
    }

    /// Builds a table from raw entries (`values[a1][a2]`); used by tests and tools.
    pub fn from_entries(n_max: usize, entry: impl Fn([usize; 2]) -> f64) -> Self {
        let mut values = vec![0.0; tri(n_max + 1)];
        for n in 0..=n_max {
            for a2 in 0..=n {
                values[Self::index([n - a2, a2])] = entry([n - a2, a2]);
            }
        }
        let errors = vec![0.0; values.len()];
        DerivativeTable { n_max, values, errors }
    }

    /// Per-multi-index `sqrt(a^2 + b^2)`.
    pub fn euclidean(&self, o: &DerivativeTable) -> DerivativeTable {
        assert_eq!(self.n_max, o.n_max, "table orders differ");
        DerivativeTable {
            n_max: self.n_max,
            values: self.values.iter().zip(&o.values).map(|(a, b)| a.hypot(*b)).collect(),
            errors: self.errors.iter().zip(&o.errors).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    /// Table of `d_axis u` read off this one (order drops by one).
    pub fn shifted(&self, axis: usize) -> DerivativeTable {
        assert!(self.n_max >= 1);
        let e = match axis {
            1 => [1, 0],
            2 => [0, 1],
            _ => panic!("axis must be 1 or 2"),
        };
        let n = self.n_max - 1;
        let mut values = vec![0.0; tri(n + 1)];
        let mut errors = vec![0.0; tri(n + 1)];
        for k in 0..=n {
            for a2 in 0..=k {
                let a = [k - a2, a2];
                let src = Self::index([a[0] + e[0], a[1] + e[1]]);
                values[Self::index(a)] = self.values[src];
                errors[Self::index(a)] = self.errors[src];
            }
        }
        DerivativeTable {
            n_max: n,
            values,
            errors,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, alpha: [usize; 2]) -> f64 {
        self.values[Self::index(alpha)]
    }

    pub fn error(&self, alpha: [usize; 2]) -> f64 {
        self.errors[Self::index(alpha)]
    }

    /// `(sum_{|alpha| = n} ||d^alpha u||^2)^(1/2)`.
    pub fn order_norm(&self, n: usize) -> f64 {
        (0..=n).map(|a2| self.get([n - a2, a2]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn order_error(&self, n: usize) -> f64 {
        (0..=n).map(|a2| self.error([n - a2, a2]).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest order `N` such that every order `n <= N` has estimated
    /// roundoff at most `tol` times its own size.
    pub fn conditioning_cap(&self, tol: f64) -> usize {
        for n in 1..=self.n_max {
            let e = self.order_error(n);
            if e > 0.0 && e > tol * self.order_norm(n) {
                return n - 1;
            }
        }
        self.n_max
    }
}

fn check_table(t: &DerivativeTable, p: &NormParams) {
    assert!(
        t.n_max >= p.n_max,
        "derivative table of order {} cannot serve n_max = {}",
        t.n_max,
        p.n_max
    );
}

fn weighted_sum(t: &DerivativeTable, p: &NormParams, y: bool, errors: bool) -> f64 {
    check_table(t, p);
    let start = p.r as usize + usize::from(y);
    let mut s = 0.0;
    for n in start..=p.n_max {
        for a2 in 0..=n {
            let a = [n - a2, a2];
            let v = if errors { t.error(a) } else { t.get(a) };
            if v != 0.0 {
                s += coeff_flat(a, p, y).expect("index above threshold") * v;
            }
        }
    }
    s
}

fn sobolev(t: &DerivativeTable, p: &NormParams, errors: bool) -> f64 {
    let mut s = 0.0;
    for n in 0..=(p.r as usize).min(t.n_max) {
        for a2 in 0..=n {
            s += if errors {
                t.error([n - a2, a2])
            } else {
                t.get([n - a2, a2])
            };
        }
    }
    s
}

fn assemble(t: &DerivativeTable, p: &NormParams, which: Family, errors: bool) -> f64 {
    let hr = || sobolev(t, p, errors);
    match which {
        Family::X => weighted_sum(t, p, false, errors),
        Family::Y => weighted_sum(t, p, true, errors),
        Family::Hr => hr(),
        Family::XTilde => weighted_sum(t, p, false, errors) + hr(),
        Family::YTilde => p.tau * weighted_sum(t, p, true, errors) + hr(),
        Family::YBar => weighted_sum(t, p, true, errors) + hr(),
    }
}

/// Norm of the field behind `t`.
pub fn norm(t: &DerivativeTable, p: &NormParams, which: Family) -> f64 {
    assemble(t, p, which, false)
}

/// Propagated roundoff of [`norm`] from the table's error estimates.
pub fn norm_roundoff(t: &DerivativeTable, p: &NormParams, which: Family) -> f64 {
    assemble(t, p, which, true)
}

/// Size estimate of the first omitted order: `c_{N+1}` times the number of
/// multi-indices of that order times the largest weighted entry of order `N`,
/// scaled by the observed growth from order `N-1` to `N`.
pub fn tail_bound(t: &DerivativeTable, p: &NormParams, which: Family) -> f64 {
    let y = match which {
        Family::Hr => return 0.0,
        Family::X | Family::XTilde => false,
        Family::Y | Family::YTilde | Family::YBar => true,
    };
    let n = p.n_max;
    let weighted_max = |m: usize| {
        (0..=m)
            .map(|a2| p.eps.powi(a2 as i32) * t.get([m - a2, a2]))
            .fold(0.0, f64::max)
    };
    let top = weighted_max(n);
    let below = weighted_max(n - 1);
    let growth = if below > 0.0 { top / below } else { 0.0 };
    let shift = p.r + u32::from(y);
    let c = power_over_factorial(n + 1, shift) * p.tau.powi((n + 1 - shift as usize) as i32);
    let scale = if which == Family::YTilde { p.tau } else { 1.0 };
    scale * c * (n + 2) as f64 * top * growth
}

/// One row of a norm report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEntry {
    pub family: Family,
    pub value: f64,
    pub tail: f64,
}

/// All families at once.
pub fn norm_report(t: &DerivativeTable, p: &NormParams) -> Vec<NormEntry> {
    Family::ALL
        .iter()
        .map(|&family| NormEntry {
            family,
            value: norm(t, p, family),
            tail: tail_bound(t, p, family),
        })
        .collect()
}

/// `(||d1 u||_X~ + ||d2 u||_X~) / ||u||_Y-`, the gradient tables truncated one
/// order below the table of `u`.
pub fn grad_embedding_ratio(t: &DerivativeTable, p: &NormParams) -> Result<f64> {
    check_table(t, p);
    let den = norm(t, p, Family::YBar);
    if den == 0.0 {
        return Err(Error::ZeroDenominator("||u||_Y- in the gradient embedding ratio"));
    }
    let pg = p.with_n_max(p.n_max - 1);
    let num = norm(&t.shifted(1), &pg, Family::XTilde) + norm(&t.shifted(2), &pg, Family::XTilde);
    Ok(num / den)
}

/// Every norm family of one field at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct NormValues {
    pub x: f64,
    pub x_tilde: f64,
    pub y: f64,
    pub y_tilde: f64,
    pub y_bar: f64,
    pub hr: f64,
}

impl NormValues {
    pub fn of(t: &DerivativeTable, p: &NormParams) -> Self {
        let x = weighted_sum(t, p, false, false);
        let y = weighted_sum(t, p, true, false);
        let hr = sobolev(t, p, false);
        NormValues {
            x,
            x_tilde: x + hr,
            y,
            y_tilde: p.tau * y + hr,
            y_bar: y + hr,
            hr,
        }
    }

    pub fn get(&self, which: Family) -> f64 {
        match which {
            Family::X => self.x,
            Family::XTilde => self.x_tilde,
            Family::Y => self.y,
            Family::YTilde => self.y_tilde,
            Family::YBar => self.y_bar,
            Family::Hr => self.hr,
        }
    }
}

/// Radius schedule `tau(t) = tau0 - M t` on `[0, T0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSchedule {
    pub tau0: f64,
    pub m: f64,
    pub t0: f64,
}

impl RadiusSchedule {
    pub fn new(tau0: f64, m: f64, t0: f64) -> Result<Self> {
        let s = RadiusSchedule { tau0, m, t0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::Config(format!("tau0 = {} must be positive", self.tau0)));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("M = {} must be at least 1", self.m)));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::Config(format!("T0 = {} must be positive", self.t0)));
        }
        if self.t0 > self.tau0 / self.m {
            return Err(Error::Config(format!(
                "radius constraint violated: T0 = {} exceeds tau0 / M = {} (the radius tau0 - M t would turn negative)",
                self.t0,
                self.tau0 / self.m
            )));
        }
        Ok(())
    }

    /// Time at which the radius reaches zero.
    pub fn exhaustion_time(&self) -> f64 {
        self.tau0 / self.m
    }

    /// Radius at time `t`; exactly zero at (and after) exhaustion.
    pub fn tau(&self, t: f64) -> f64 {
        let v = self.tau0 - self.m * t;
        if v <= 4.0 * f64::EPSILON * self.tau0 {
            0.0
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_field::VerticalBasis::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn params(r: u32, tau: f64, eps: f64, n: usize) -> NormParams {
        NormParams::new(r, tau, eps, n).unwrap()
    }

    #[test]
    fn coefficient_values() {
        let p = params(3, 0.5, 0.1, 8);
        assert!((coeff_flat([3, 0], &p, false).unwrap() - 4.5).abs() < 1e-15);
        assert!((coeff_flat([3, 1], &p, false).unwrap() - 2.0 / 15.0).abs() < 1e-15);
        let p1 = params(3, 1.0, 0.1, 8);
        assert!((coeff_flat([4, 0], &p1, true).unwrap() - 32.0 / 3.0).abs() < 1e-14);
        assert!(coeff_flat([2, 0], &p, false).is_err());
        assert!(coeff_flat([3, 0], &p, true).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(NormParams::new(2, 0.1, 0.1, 8).is_err());
        assert!(NormParams::new(3, 0.1, 1.0, 8).is_err());
        assert!(NormParams::new(3, 0.1, 0.1, 4).is_err());
        assert!(NormParams::new(3, 0.0, 0.1, 5).is_ok());
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let t = DerivativeTable::from_mode(&ModeField::zero(), 10);
        let p = params(3, 0.3, 0.1, 10);
        for f in Family::ALL {
            assert_eq!(norm(&t, &p, f), 0.0);
        }
    }

    #[test]
    fn closed_form_tables() {
        let u = ModeField::sin_x1(1, ONE, 1.0);
        let t = DerivativeTable::from_mode(&u, 8);
        for j in 0..=8 {
            let e = (2.0 * PI).powi(j as i32) / 2f64.sqrt();
            assert!((t.get([j, 0]) - e).abs() <= 1e-13 * e);
        }
        let v = ModeField::mode(0, Sin(1), Complex64::new(1.0, 0.0));
        let t = DerivativeTable::from_mode(&v, 4);
        assert!((t.get([0, 2]) - PI * PI / 2f64.sqrt()).abs() < 1e-13);
    }

    use crate::mode_field::VerticalBasis;
    const ONE: VerticalBasis = VerticalBasis::ONE;

    #[test]
    fn x_norm_against_direct_summation() {
        let u = ModeField::sin_x1(1, ONE, 1.0);
        let p = params(3, 0.1, 0.5, 12);
        let t = DerivativeTable::from_mode(&u, 12);
        // independent sum in log space
        let mut expected = 0.0;
        for j in 3..=12u32 {
            let lf: f64 = (1..=j).map(|i| (i as f64).ln()).sum();
            let log_term = 3.0 * (j as f64).ln() - lf + (j as f64 - 3.0) * 0.1f64.ln() + j as f64 * (2.0 * PI).ln()
                - 0.5 * 2f64.ln();
            expected += log_term.exp();
        }
        let x = norm(&t, &p, Family::X);
        assert!((x - expected).abs() <= 1e-12 * expected, "{x} {expected}");
    }

    #[test]
    fn radius_monotonicity() {
        let u = ModeField::sin_x1(1, Cos(1), 1.0);
        let t = DerivativeTable::from_mode(&u, 10);
        let a = norm(&t, &params(3, 0.25, 0.1, 10), Family::X);
        let b = norm(&t, &params(3, 0.5, 0.1, 10), Family::X);
        assert!(a <= b);
    }

    #[test]
    fn embedding_ratio_cases() {
        let t = DerivativeTable::from_mode(&ModeField::constant(2.0), 10);
        let p = params(3, 0.1, 0.1, 10);
        assert_eq!(grad_embedding_ratio(&t, &p).unwrap(), 0.0);
        let z = DerivativeTable::from_mode(&ModeField::zero(), 10);
        assert!(matches!(grad_embedding_ratio(&z, &p), Err(Error::ZeroDenominator(_))));
        let s = DerivativeTable::from_mode(&ModeField::sin_x1(1, ONE, 1.0), 10);
        assert!(grad_embedding_ratio(&s, &p).unwrap().is_finite());
    }

    #[test]
    fn schedule() {
        assert!(RadiusSchedule::new(0.2, 2.0, 0.2).is_err());
        let s = RadiusSchedule::new(0.2, 2.0, 0.1).unwrap();
        assert_eq!(s.tau(0.1), 0.0);
        assert!(s.tau(0.05) > 0.0);
        assert_eq!(s.exhaustion_time(), 0.1);
    }

    #[test]
    fn grid_table_reports_cap() {
        let (g, _) = GridField::from_mode(&ModeField::mode(0, Sin(1), Complex64::new(1.0, 0.0)), 2, 16);
        let t = DerivativeTable::from_grid_unchecked(&g, 14);
        let cap = t.conditioning_cap(1e-8);
        assert!(cap >= 4 && cap < 14, "cap {cap}");
        assert!(matches!(
            DerivativeTable::from_grid(&g, 14, 1e-8),
            Err(Error::Conditioning { requested: 14, .. })
        ));
    }
}
