//! Exact algebra of separable modes on the channel `T x (0,1)`.
//!
//! A [`ModeField`] is a finite sum `sum amp * exp(2 pi i k x1) * b(x2)` where
//! `b` is one of the [`VerticalBasis`] functions. The x1-period is 1. The
//! trigonometric part of the algebra (cosines, sines and the constant) is
//! closed under products and derivatives; hyperbolic and polynomial profiles
//! only appear as exact solutions of Neumann problems and are rejected by
//! [`ModeField::multiply`].
//!
//! Like terms are merged on construction. A merged amplitude whose real or
//! imaginary part cancels to within a few ulps of the summed magnitudes is set
//! to exactly zero, so identities such as `d1 d2 f = d2 d1 f` or
//! `div curl psi = 0` simplify to the empty field.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::rc::Rc;

use num_complex::Complex64;

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Relative threshold (in units of machine epsilon) below which a merged
/// amplitude is treated as an exact cancellation.
const CANCEL_ULPS: f64 = 32.0;

/// Which wall a hyperbolic profile is centred on: `cosh(mu (x2 - a))` with
/// `a = 0` for [`Anchor::Bottom`] and `a = 1` for [`Anchor::Top`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anchor {
    Bottom,
    Top,
}

impl Anchor {
    fn offset(self) -> f64 {
        match self {
            Anchor::Bottom => 0.0,
            Anchor::Top => 1.0,
        }
    }
}

/// Profiles in the wall-normal direction x2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerticalBasis {
    /// `cos(m pi x2)`
    Cos(u32),
    /// `sin(m pi x2)`, `m >= 1`
    Sin(u32),
    /// `cosh(mu (x2 - a))`
    Cosh(f64, Anchor),
    /// `sinh(mu (x2 - a))`
    Sinh(f64, Anchor),
    /// `x2^n`; `Monomial(0)` is the constant profile and `Monomial(1)` is `x2`.
    Monomial(u32),
}

pub use VerticalBasis::*;

impl VerticalBasis {
    pub const ONE: VerticalBasis = Monomial(0);
    pub const X2: VerticalBasis = Monomial(1);

    /// Canonical form; `None` means the profile vanishes identically. The
    /// returned factor multiplies the amplitude.
    fn canonical(self) -> Option<(VerticalBasis, f64)> {
        match self {
            Cos(0) => Some((Monomial(0), 1.0)),
            Sin(0) => None,
            Cosh(mu, a) if mu == 0.0 => {
                let _ = a;
                Some((Monomial(0), 1.0))
            }
            Cosh(mu, a) if mu < 0.0 => Some((Cosh(-mu, a), 1.0)),
            Sinh(mu, _) if mu == 0.0 => None,
            Sinh(mu, a) if mu < 0.0 => Some((Sinh(-mu, a), -1.0)),
            b => Some((b, 1.0)),
        }
    }

    /// True for the trigonometric profiles (including the constant).
    pub fn is_trig(self) -> bool {
        matches!(self, Cos(_) | Sin(_) | Monomial(0))
    }

    /// Vertical "frequency index" used to size quadrature rules.
    pub fn frequency_index(self) -> u32 {
        match self {
            Cos(m) | Sin(m) | Monomial(m) => m,
            Cosh(mu, _) | Sinh(mu, _) => (mu / PI).ceil() as u32,
        }
    }

    pub fn eval(self, x2: f64) -> f64 {
        match self {
            Cos(m) => (m as f64 * PI * x2).cos(),
            Sin(m) => (m as f64 * PI * x2).sin(),
            Cosh(mu, a) => (mu * (x2 - a.offset())).cosh(),
            Sinh(mu, a) => (mu * (x2 - a.offset())).sinh(),
            Monomial(n) => x2.powi(n as i32),
        }
    }

    /// Exact wall values; `sin(m pi)` is zero, not `1e-16`.
    pub fn wall_value(self, side: Side) -> f64 {
        match (self, side) {
            (Cos(_), Side::Bottom) => 1.0,
            (Cos(m), Side::Top) => {
                if m % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            (Sin(_), _) => 0.0,
            (Cosh(_, Anchor::Bottom), Side::Bottom) | (Cosh(_, Anchor::Top), Side::Top) => 1.0,
            (Cosh(mu, _), _) => mu.cosh(),
            (Sinh(_, Anchor::Bottom), Side::Bottom) | (Sinh(_, Anchor::Top), Side::Top) => 0.0,
            (Sinh(mu, Anchor::Bottom), Side::Top) => mu.sinh(),
            (Sinh(mu, Anchor::Top), Side::Bottom) => -mu.sinh(),
            (Monomial(0), _) => 1.0,
            (Monomial(_), Side::Bottom) => 0.0,
            (Monomial(_), Side::Top) => 1.0,
        }
    }

    /// d/dx2 as `(profile, factor)`; `None` for the constant.
    pub fn derivative(self) -> Option<(VerticalBasis, f64)> {
        match self {
            Cos(m) => Some((Sin(m), -(m as f64) * PI)),
            Sin(m) => Some((Cos(m), m as f64 * PI)),
            Cosh(mu, a) => Some((Sinh(mu, a), mu)),
            Sinh(mu, a) => Some((Cosh(mu, a), mu)),
            Monomial(0) => None,
            Monomial(n) => Some((Monomial(n - 1), n as f64)),
        }
    }

    fn key(self) -> BasisKey {
        match self {
            Monomial(n) => BasisKey(0, n as u64, 0),
            Cos(m) => BasisKey(1, m as u64, 0),
            Sin(m) => BasisKey(2, m as u64, 0),
            Cosh(mu, a) => BasisKey(3, mu.to_bits(), a as u8),
            Sinh(mu, a) => BasisKey(4, mu.to_bits(), a as u8),
        }
    }

    fn tag(self) -> (&'static str, String) {
        match self {
            Cos(m) => ("cos", m.to_string()),
            Sin(m) => ("sin", m.to_string()),
            Cosh(mu, Anchor::Bottom) => ("cosh", format!("{mu:e}")),
            Cosh(mu, Anchor::Top) => ("cosh_top", format!("{mu:e}")),
            Sinh(mu, Anchor::Bottom) => ("sinh", format!("{mu:e}")),
            Sinh(mu, Anchor::Top) => ("sinh_top", format!("{mu:e}")),
            Monomial(n) => ("mono", n.to_string()),
        }
    }

    fn from_tag(tag: &str, param: &str) -> Result<VerticalBasis> {
        let int = || {
            param
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("basis parameter {param:?}: {e}")))
        };
        let real = || {
            param
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("basis parameter {param:?}: {e}")))
        };
        Ok(match tag {
            "cos" => Cos(int()?),
            "sin" => Sin(int()?),
            "mono" => Monomial(int()?),
            "cosh" => Cosh(real()?, Anchor::Bottom),
            "cosh_top" => Cosh(real()?, Anchor::Top),
            "sinh" => Sinh(real()?, Anchor::Bottom),
            "sinh_top" => Sinh(real()?, Anchor::Top),
            other => return Err(Error::Parse(format!("unknown basis tag {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct BasisKey(u8, u64, u8);

/// Product of two trig profiles as a short sum of trig profiles.
fn trig_product(a: VerticalBasis, b: VerticalBasis) -> [(VerticalBasis, f64); 2] {
    let as_trig = |v: VerticalBasis| match v {
        Monomial(0) => (true, 0i64),
        Cos(m) => (true, m as i64),
        Sin(m) => (false, m as i64),
        _ => unreachable!("trig_product on non-trig profile"),
    };
    let (ca, m) = as_trig(a);
    let (cb, n) = as_trig(b);
    // sin with signed index: sin(-j) = -sin(j)
    let sin_signed = |j: i64, c: f64| -> (VerticalBasis, f64) {
        if j >= 0 {
            (Sin(j as u32), c)
        } else {
            (Sin((-j) as u32), -c)
        }
    };
    match (ca, cb) {
        (true, true) => [(Cos((m - n).unsigned_abs() as u32), 0.5), (Cos((m + n) as u32), 0.5)],
        (false, false) => [(Cos((m - n).unsigned_abs() as u32), 0.5), (Cos((m + n) as u32), -0.5)],
        (false, true) => [sin_signed(m + n, 0.5), sin_signed(m - n, 0.5)],
        (true, false) => [sin_signed(n + m, 0.5), sin_signed(n - m, 0.5)],
    }
}

/// Closed-form `int_0^1 a(x) b(x) dx` for trig profiles.
fn trig_integral(a: VerticalBasis, b: VerticalBasis) -> f64 {
    let mean = |v: VerticalBasis, c: f64| -> f64 {
        match v {
            Monomial(0) => c,
            Cos(_) => 0.0,
            Sin(j) => c * (1.0 - if j % 2 == 0 { 1.0 } else { -1.0 }) / (j as f64 * PI),
            _ => unreachable!(),
        }
    };
    trig_product(a, b)
        .iter()
        .filter_map(|&(v, c)| v.canonical().map(|(v, f)| (v, c * f)))
        .map(|(v, c)| mean(v, c))
        .sum()
}

/// Side of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Top,
}

/// x1-Fourier coefficients of a function on the circle (period 1), e.g. a
/// wall trace. Absent keys are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FourierCoeffs(pub BTreeMap<i64, Complex64>);

impl FourierCoeffs {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(k: i64, c: Complex64) -> Self {
        let mut m = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            m.insert(k, c);
        }
        FourierCoeffs(m)
    }

    pub fn get(&self, k: i64) -> Complex64 {
        self.0.get(&k).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|c| c.norm() == 0.0)
    }

    pub fn max_abs_k(&self) -> i64 {
        self.0.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// L2 norm over one period.
    pub fn l2_norm(&self) -> f64 {
        self.0.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x1: f64) -> Complex64 {
        self.0
            .iter()
            .map(|(&k, &c)| c * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x1))
            .sum()
    }

    pub fn sub(&self, other: &FourierCoeffs) -> FourierCoeffs {
        let mut m = self.0.clone();
        for (&k, &c) in &other.0 {
            *m.entry(k).or_default() -= c;
        }
        m.retain(|_, c| c.norm() != 0.0);
        FourierCoeffs(m)
    }
}

/// One separable term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub k: i64,
    pub basis: VerticalBasis,
    pub amp: Complex64,
}

/// Finite sum of separable modes, normalized (merged, zero-pruned, sorted).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeField {
    terms: Vec<Term>,
}

#[derive(Default)]
struct Accum {
    basis: Option<VerticalBasis>,
    sum: Complex64,
    abs_re: f64,
    abs_im: f64,
}

fn snap(sum: f64, abs: f64) -> f64 {
    if sum.abs() <= CANCEL_ULPS * f64::EPSILON * abs {
        0.0
    } else {
        sum
    }
}

impl ModeField {
    pub fn zero() -> Self {
        ModeField { terms: Vec::new() }
    }

    /// Builds a normalized field from arbitrary terms.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut acc: BTreeMap<(i64, BasisKey), Accum> = BTreeMap::new();
        for t in terms {
            let Some((basis, f)) = t.basis.canonical() else {
                continue;
            };
            let amp = t.amp * f;
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let e = acc.entry((t.k, basis.key())).or_default();
            e.basis = Some(basis);
            e.sum += amp;
            e.abs_re += amp.re.abs();
            e.abs_im += amp.im.abs();
        }
        let terms = acc
            .into_iter()
            .filter_map(|((k, _), a)| {
                let amp = Complex64::new(snap(a.sum.re, a.abs_re), snap(a.sum.im, a.abs_im));
                (amp.re != 0.0 || amp.im != 0.0).then(|| Term {
                    k,
                    basis: a.basis.unwrap(),
                    amp,
                })
            })
            .collect();
        ModeField { terms }
    }

    /// `amp * exp(2 pi i k x1) * basis(x2)`.
    pub fn mode(k: i64, basis: VerticalBasis, amp: Complex64) -> Self {
        Self::from_terms([Term { k, basis, amp }])
    }

    /// Real field `a cos(2 pi k x1) basis(x2)`.
    pub fn cos_x1(k: i64, basis: VerticalBasis, a: f64) -> Self {
        if k == 0 {
            return Self::mode(0, basis, Complex64::new(a, 0.0));
        }
        let h = Complex64::new(0.5 * a, 0.0);
        Self::from_terms([Term { k, basis, amp: h }, Term { k: -k, basis, amp: h }])
    }

    /// Real field `a sin(2 pi k x1) basis(x2)`.
    pub fn sin_x1(k: i64, basis: VerticalBasis, a: f64) -> Self {
        if k == 0 {
            return Self::zero();
        }
        Self::from_terms([
            Term {
                k,
                basis,
                amp: Complex64::new(0.0, -0.5 * a),
            },
            Term {
                k: -k,
                basis,
                amp: Complex64::new(0.0, 0.5 * a),
            },
        ])
    }

    /// Constant field.
    pub fn constant(c: f64) -> Self {
        Self::mode(0, Monomial(0), Complex64::new(c, 0.0))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_trig_pure(&self) -> bool {
        self.terms.iter().all(|t| t.basis.is_trig())
    }

    pub fn max_abs_k(&self) -> i64 {
        self.terms.iter().map(|t| t.k.abs()).max().unwrap_or(0)
    }

    pub fn max_frequency_index(&self) -> u32 {
        self.terms.iter().map(|t| t.basis.frequency_index()).max().unwrap_or(0)
    }

    /// Largest Chebyshev-relevant vertical index of trig terms.
    pub fn max_trig_index(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.basis.is_trig())
            .map(|t| t.basis.frequency_index())
            .max()
            .unwrap_or(0)
    }

    /// True when the k-spectrum is conjugate symmetric, i.e. the field is real.
    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.terms.iter().map(|t| t.amp.norm()).fold(0.0, f64::max);
        self.terms.iter().all(|t| {
            let partner = self
                .terms
                .iter()
                .find(|s| s.k == -t.k && s.basis.key() == t.basis.key())
                .map(|s| s.amp)
                .unwrap_or_default();
            (partner - t.amp.conj()).norm() <= tol * scale.max(1.0)
        })
    }

    pub fn add(&self, other: &ModeField) -> ModeField {
        Self::from_terms(self.terms.iter().chain(&other.terms).copied())
    }

    pub fn sub(&self, other: &ModeField) -> ModeField {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> ModeField {
        Self::from_terms(self.terms.iter().map(|t| Term { amp: t.amp * c, ..*t }))
    }

    pub fn scale_real(&self, c: f64) -> ModeField {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Exact partial derivative along `axis` (1 or 2).
    pub fn differentiate(&self, axis: usize) -> ModeField {
        match axis {
            1 => Self::from_terms(self.terms.iter().map(|t| Term {
                amp: t.amp * Complex64::new(0.0, 2.0 * PI * t.k as f64),
                ..*t
            })),
            2 => Self::from_terms(self.terms.iter().filter_map(|t| {
                t.basis.derivative().map(|(basis, f)| Term {
                    k: t.k,
                    basis,
                    amp: t.amp * f,
                })
            })),
            _ => panic!("axis must be 1 or 2, got {axis}"),
        }
    }

    /// `d1^a1 d2^a2 f`.
    pub fn derivative(&self, alpha: [usize; 2]) -> ModeField {
        let mut f = self.clone();
        for _ in 0..alpha[0] {
            f = f.differentiate(1);
        }
        for _ in 0..alpha[1] {
            f = f.differentiate(2);
        }
        f
    }

    /// Exact product of two trig-pure fields.
    pub fn multiply(&self, other: &ModeField) -> Result<ModeField> {
        if !self.is_trig_pure() {
            return Err(Error::NotTrigPure("left operand of multiply"));
        }
        if !other.is_trig_pure() {
            return Err(Error::NotTrigPure("right operand of multiply"));
        }
        let mut out = Vec::with_capacity(2 * self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                let amp = a.amp * b.amp;
                for (basis, c) in trig_product(a.basis, b.basis) {
                    out.push(Term {
                        k: a.k + b.k,
                        basis,
                        amp: amp * c,
                    });
                }
            }
        }
        Ok(Self::from_terms(out))
    }

    /// Point evaluation.
    pub fn eval(&self, x1: f64, x2: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.amp * Complex64::from_polar(1.0, 2.0 * PI * t.k as f64 * x1) * t.basis.eval(x2))
            .sum()
    }

    /// Exact x1-Fourier coefficients of the wall trace.
    pub fn boundary_trace(&self, side: Side) -> FourierCoeffs {
        let mut acc: BTreeMap<i64, (Complex64, f64, f64)> = BTreeMap::new();
        for t in &self.terms {
            let v = t.basis.wall_value(side);
            if v == 0.0 {
                continue;
            }
            let c = t.amp * v;
            let e = acc.entry(t.k).or_insert((Complex64::default(), 0.0, 0.0));
            e.0 += c;
            e.1 += c.re.abs();
            e.2 += c.im.abs();
        }
        FourierCoeffs(
            acc.into_iter()
                .filter_map(|(k, (s, ar, ai))| {
                    let c = Complex64::new(snap(s.re, ar), snap(s.im, ai));
                    (c.norm() != 0.0).then_some((k, c))
                })
                .collect(),
        )
    }

    /// `int_Omega f conj(g)`.
    pub fn l2_inner(&self, other: &ModeField) -> Complex64 {
        let mut total = Complex64::default();
        let mut i = 0;
        let mut j = 0;
        // both term lists are sorted by k first
        while i < self.terms.len() && j < other.terms.len() {
            let kf = self.terms[i].k;
            let kg = other.terms[j].k;
            if kf < kg {
                i += 1;
                continue;
            }
            if kg < kf {
                j += 1;
                continue;
            }
            let ie = i + self.terms[i..].iter().take_while(|t| t.k == kf).count();
            let je = j + other.terms[j..].iter().take_while(|t| t.k == kg).count();
            total += slice_inner(&self.terms[i..ie], &other.terms[j..je]);
            i = ie;
            j = je;
        }
        total
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).re.max(0.0).sqrt()
    }

    /// `int_Omega f`.
    pub fn mean(&self) -> Complex64 {
        self.l2_inner(&ModeField::constant(1.0))
    }

    /// One record per line: `k tag param amp_re amp_im`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# k tag param amp_re amp_im\n");
        for t in &self.terms {
            let (tag, param) = t.basis.tag();
            let _ = writeln!(s, "{} {} {} {:e} {:e}", t.k, tag, param, t.amp.re, t.amp.im);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<ModeField> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let k = fields[0]
                .parse::<i64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let basis = VerticalBasis::from_tag(fields[1], fields[2])?;
            terms.push(Term {
                k,
                basis,
                amp: Complex64::new(num(fields[3])?, num(fields[4])?),
            });
        }
        Ok(ModeField::from_terms(terms))
    }
}

thread_local! {
    static GL_CACHE: RefCell<HashMap<usize, Rc<GaussLegendre>>> = RefCell::new(HashMap::new());
}

fn gauss_legendre(n: usize) -> Rc<GaussLegendre> {
    GL_CACHE.with(|c| {
        c.borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(GaussLegendre::new(n)))
            .clone()
    })
}

/// Node count for the quadrature fallback.
pub fn quadrature_nodes(max_index: u32) -> usize {
    2 * max_index as usize + 32
}

fn slice_inner(f: &[Term], g: &[Term]) -> Complex64 {
    let mut total = Complex64::default();
    let (ft, fn_): (Vec<&Term>, Vec<&Term>) = f.iter().partition(|t| t.basis.is_trig());
    let (gt, gn): (Vec<&Term>, Vec<&Term>) = g.iter().partition(|t| t.basis.is_trig());
    for a in &ft {
        for b in &gt {
            let v = trig_integral(a.basis, b.basis);
            if v != 0.0 {
                total += a.amp * b.amp.conj() * v;
            }
        }
    }
    if fn_.is_empty() && gn.is_empty() {
        return total;
    }
    let max_index = f.iter().chain(g).map(|t| t.basis.frequency_index()).max().unwrap_or(0);
    let gl = gauss_legendre(quadrature_nodes(max_index));
    let eval = |ts: &[&Term], x: f64| -> Complex64 { ts.iter().map(|t| t.amp * t.basis.eval(x)).sum() };
    for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
        let fa = eval(&fn_, x);
        let fb = eval(&ft, x);
        let ga = eval(&gn, x);
        let gb = eval(&gt, x);
        // (fn + ft) conj(gn) + fn conj(gt)
        total += (fa + fb) * ga.conj() * w + fa * gb.conj() * w;
    }
    total
}

/// Two-component field `(comp1, comp2)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorModeField {
    pub comp1: ModeField,
    pub comp2: ModeField,
}

impl VectorModeField {
    pub fn new(comp1: ModeField, comp2: ModeField) -> Self {
        VectorModeField { comp1, comp2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `(d2 psi, -d1 psi)`; divergence free by construction and impermeable
    /// when `psi` is built from `Sin` profiles.
    pub fn from_stream_function(psi: &ModeField) -> Self {
        VectorModeField {
            comp1: psi.differentiate(2),
            comp2: psi.differentiate(1).scale_real(-1.0),
        }
    }

    pub fn component(&self, i: usize) -> &ModeField {
        match i {
            1 => &self.comp1,
            2 => &self.comp2,
            _ => panic!("component index must be 1 or 2"),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        VectorModeField::new(self.comp1.add(&o.comp1), self.comp2.add(&o.comp2))
    }

    pub fn sub(&self, o: &Self) -> Self {
        VectorModeField::new(self.comp1.sub(&o.comp1), self.comp2.sub(&o.comp2))
    }

    pub fn scale_real(&self, c: f64) -> Self {
        VectorModeField::new(self.comp1.scale_real(c), self.comp2.scale_real(c))
    }

    pub fn derivative(&self, alpha: [usize; 2]) -> Self {
        VectorModeField::new(self.comp1.derivative(alpha), self.comp2.derivative(alpha))
    }

    pub fn divergence(&self) -> ModeField {
        self.comp1.differentiate(1).add(&self.comp2.differentiate(2))
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence().is_empty()
    }

    /// Normal component vanishes exactly on both walls.
    pub fn is_impermeable(&self) -> bool {
        self.comp2.boundary_trace(Side::Bottom).is_zero() && self.comp2.boundary_trace(Side::Top).is_zero()
    }

    pub fn is_trig_pure(&self) -> bool {
        self.comp1.is_trig_pure() && self.comp2.is_trig_pure()
    }

    /// `(self . grad) w` for a scalar `w`.
    pub fn advect(&self, w: &ModeField) -> Result<ModeField> {
        Ok(self
            .comp1
            .multiply(&w.differentiate(1))?
            .add(&self.comp2.multiply(&w.differentiate(2))?))
    }

    /// `(self . grad) w` componentwise.
    pub fn advect_vector(&self, w: &VectorModeField) -> Result<VectorModeField> {
        Ok(VectorModeField::new(self.advect(&w.comp1)?, self.advect(&w.comp2)?))
    }

    /// Euclidean L2 norm `(|v1|^2 + |v2|^2)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.comp1.l2_inner(&self.comp1).re + self.comp2.l2_inner(&self.comp2).re)
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs_k(&self) -> i64 {
        self.comp1.max_abs_k().max(self.comp2.max_abs_k())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn derivative_of_sine_profile() {
        let f = ModeField::mode(0, Sin(1), c(1.0));
        let d = f.differentiate(2);
        assert_eq!(d, ModeField::mode(0, Cos(1), c(PI)));
    }

    #[test]
    fn derivative_of_zero_is_zero() {
        assert!(ModeField::zero().differentiate(1).is_empty());
        assert!(ModeField::zero().differentiate(2).is_empty());
    }

    #[test]
    fn second_x1_derivative_of_wave() {
        let f = ModeField::mode(3, Cos(2), c(1.0));
        let d = f.differentiate(1).differentiate(1);
        let expected = -36.0 * PI * PI;
        assert_eq!(d.len(), 1);
        let t = d.terms()[0];
        assert_eq!((t.k, t.basis), (3, Cos(2)));
        assert!((t.amp - c(expected)).norm() <= 1e-14 * expected.abs());
    }

    #[test]
    fn polynomial_chain_terminates() {
        let f = ModeField::mode(0, VerticalBasis::X2, c(2.0));
        assert_eq!(f.differentiate(2), ModeField::constant(2.0));
        assert!(f.differentiate(2).differentiate(2).is_empty());
    }

    #[test]
    fn sine_squared_product_to_sum() {
        let s = ModeField::mode(0, Sin(1), c(1.0));
        let p = s.multiply(&s).unwrap();
        let expected = ModeField::constant(0.5).add(&ModeField::mode(0, Cos(2), c(-0.5)));
        assert_eq!(p, expected);
    }

    #[test]
    fn product_with_zero() {
        let s = ModeField::mode(2, Cos(3), c(1.5));
        assert!(s.multiply(&ModeField::zero()).unwrap().is_empty());
    }

    #[test]
    fn mixed_product_matches_pointwise_evaluation() {
        let f = ModeField::mode(1, Cos(1), c(1.0));
        let g = ModeField::mode(-1, Sin(1), c(1.0));
        let p = f.multiply(&g).unwrap();
        assert_eq!(p, ModeField::mode(0, Sin(2), c(0.5)));
        let mut max_err: f64 = 0.0;
        for i in 0..32 {
            for j in 0..33 {
                let (x1, x2) = (i as f64 / 32.0, j as f64 / 32.0);
                let direct = f.eval(x1, x2) * g.eval(x1, x2);
                max_err = max_err.max((direct - p.eval(x1, x2)).norm());
            }
        }
        assert!(max_err < 1e-12, "{max_err}");
    }

    #[test]
    fn multiply_rejects_hyperbolic_operands() {
        let h = ModeField::mode(1, Cosh(2.0, Anchor::Bottom), c(1.0));
        let s = ModeField::mode(0, Sin(1), c(1.0));
        assert!(matches!(h.multiply(&s), Err(Error::NotTrigPure(_))));
        assert!(matches!(s.multiply(&h), Err(Error::NotTrigPure(_))));
    }

    #[test]
    fn inner_products() {
        let s = ModeField::sin_x1(1, VerticalBasis::ONE, 1.0);
        assert!((s.l2_inner(&s) - c(0.5)).norm() < 1e-15);
        let one = ModeField::constant(1.0);
        let cosy = ModeField::mode(0, Cos(1), c(1.0));
        assert!(one.l2_inner(&cosy).norm() < 1e-15);
    }

    /// Independent adaptive Simpson oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn hyperbolic_inner_product_against_adaptive_quadrature() {
        let f = ModeField::mode(0, Cosh(1.0, Anchor::Bottom), c(1.0));
        let v = f.l2_inner(&ModeField::constant(1.0));
        let oracle = adaptive_simpson(&|x: f64| x.cosh(), 0.0, 1.0, 1e-15);
        assert!((v.re - oracle).abs() < 1e-13);
        assert!((v.re - 1f64.sinh()).abs() < 1e-13);
    }

    #[test]
    fn steep_hyperbolic_norm_is_accurate() {
        let mu = 2.0 * PI * 6.0;
        let f = ModeField::mode(0, Cosh(mu, Anchor::Top), c(1.0 / mu.cosh()));
        // int_0^1 cosh^2(mu (x-1)) dx = (sinh(2 mu)/(2 mu) + 1)/2
        let exact = ((2.0 * mu).sinh() / (2.0 * mu) + 1.0) / 2.0 / mu.cosh().powi(2);
        let v = f.l2_inner(&f).re;
        assert!((v - exact).abs() < 1e-13 * exact, "{v} vs {exact}");
    }

    #[test]
    fn traces() {
        let s = ModeField::mode(0, Sin(1), c(1.0));
        assert!(s.boundary_trace(Side::Bottom).is_zero());
        assert!(s.boundary_trace(Side::Top).is_zero());
        let cy = ModeField::mode(0, Cos(1), c(1.0));
        assert_eq!(cy.boundary_trace(Side::Top), FourierCoeffs::single(0, c(-1.0)));
        let h = ModeField::mode(1, Sinh(2.0, Anchor::Bottom), c(1.0));
        let t = h.boundary_trace(Side::Top);
        assert!((t.get(1) - c(2f64.sinh())).norm() < 1e-15);
        assert_eq!(t.0.len(), 1);
    }

    #[test]
    fn stream_function_field_is_solenoidal_and_impermeable() {
        let psi = ModeField::sin_x1(2, Sin(1), 0.3)
            .add(&ModeField::cos_x1(1, Sin(3), -0.7))
            .add(&ModeField::mode(0, Sin(2), c(0.2)));
        let v = VectorModeField::from_stream_function(&psi);
        assert!(v.is_divergence_free());
        assert!(v.is_impermeable());
        // an inflow stream function keeps the solenoidal property only
        let inflow = VectorModeField::from_stream_function(&ModeField::cos_x1(1, Cos(1), 0.5));
        assert!(inflow.is_divergence_free());
        assert!(!inflow.is_impermeable());
    }

    #[test]
    fn text_round_trip() {
        let f = ModeField::sin_x1(2, Sin(1), 0.3)
            .add(&ModeField::mode(1, Cosh(3.5, Anchor::Top), Complex64::new(0.1, -0.2)))
            .add(&ModeField::mode(0, Monomial(2), c(1.0 / 3.0)));
        let g = ModeField::from_text(&f.to_text()).unwrap();
        assert_eq!(f, g);
        assert!(ModeField::from_text("1 foo 2 0 0").is_err());
    }

    #[test]
    fn real_field_predicate() {
        let f = ModeField::sin_x1(2, Cos(1), 0.3);
        assert!(f.is_real(1e-14));
        let g = ModeField::mode(2, Cos(1), c(1.0));
        assert!(!g.is_real(1e-14));
    }
}
