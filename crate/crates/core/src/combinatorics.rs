//! Exact certificates for the coefficient inequalities of the product
//! estimate and the related counting identities.
//!
//! Everything here is integer or rational arithmetic on arbitrary precision
//! numbers. Lengths of multi-indices are written `a = |alpha|`,
//! `b = |beta|`, and `m = a - b`. The low sum has `0 < b <= a/2`, the high sum
//! `b > a/2`, and throughout `|kappa| = 1`, `|gamma| = 2`.
//!
//! The "bounded by a constant depending on r" claims are certified
//! empirically: the supremum over a finite range is computed exactly, and the
//! report records where it is attained, so that doubling the range can be
//! seen not to move it. This is evidence, not a proof.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Violations kept verbatim in a report; the rest are only counted.
const KEPT_VIOLATIONS: usize = 20;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn half(v: i64) -> BigRational {
    BigRational::new(BigInt::from(v), BigInt::from(2))
}

fn pos(v: i64) -> i64 {
    v.max(0)
}

/// Outcome of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub name: String,
    pub range: String,
    pub instances: u64,
    pub violation_count: u64,
    pub violations: Vec<String>,
    /// Exact supremum as a fraction string, when the claim is a bound.
    pub sup: Option<String>,
    /// Index tuple attaining the supremum (first in enumeration order).
    pub sup_at: Option<String>,
    pub verified: bool,
}

impl CertificateReport {
    fn new(name: &str, range: String) -> Self {
        CertificateReport {
            name: name.to_string(),
            range,
            instances: 0,
            violation_count: 0,
            violations: Vec::new(),
            sup: None,
            sup_at: None,
            verified: true,
        }
    }

    fn absorb(&mut self, block: Block) {
        self.instances += block.instances;
        self.violation_count += block.violations.len() as u64;
        for v in block.violations {
            if self.violations.len() < KEPT_VIOLATIONS {
                self.violations.push(v);
            }
        }
        self.verified = self.violation_count == 0;
    }

    /// Error out when a violation was found.
    pub fn into_result(self) -> Result<Self> {
        if self.verified {
            Ok(self)
        } else {
            Err(Error::Certificate {
                name: self.name,
                count: self.violation_count as usize,
            })
        }
    }
}

#[derive(Default)]
struct Block {
    instances: u64,
    violations: Vec<String>,
}

/// Runs `f(a)` for `a` in `lo..=hi` in parallel and merges in index order.
fn sweep(report: &mut CertificateReport, lo: i64, hi: i64, f: impl Fn(i64) -> Block + Sync) {
    let blocks: Vec<Block> = (lo..=hi).into_par_iter().map(&f).collect();
    for b in blocks {
        report.absorb(b);
    }
}

/// tau-exponent of the low coefficient `b_l`.
pub fn bl_exponent(a: i64, b: i64, r: i64) -> Result<BigRational> {
    if !(b > 0 && 2 * b <= a && a >= r) {
        return Err(Error::Precondition(format!(
            "low coefficient needs 0 < |beta| <= |alpha|/2 and |alpha| >= r, got ({a}, {b}, {r})"
        )));
    }
    // |beta + gamma| = b + 2, |alpha - beta + kappa| = a - b + 1
    Ok(int(a - r) - half(pos(b - r)) - half(pos(b + 2 - r)) - int(pos(a - b + 1 - r - 1)))
}

/// tau-exponent of the high coefficient `b_h`.
pub fn bh_exponent(a: i64, b: i64, r: i64) -> Result<BigRational> {
    if !(2 * b > a && b <= a && a >= r) {
        return Err(Error::Precondition(format!(
            "high coefficient needs |alpha|/2 < |beta| <= |alpha| and |alpha| >= r, got ({a}, {b}, {r})"
        )));
    }
    // |alpha - beta + kappa| = a - b + 1, |alpha - beta + kappa + gamma| = a - b + 3
    Ok(int(a - r) - int(pos(b - r - 1)) - half(pos(a - b + 1 - r)) - half(pos(a - b + 3 - r)))
}

/// Claimed lower bound for the low exponent: 1 when `a - b >= r`, else 0.
pub fn bl_claim(a: i64, b: i64, r: i64) -> i64 {
    i64::from(a - b >= r)
}

/// Claimed lower bound for the high exponent: 1 when `b >= r + 1`, else 0.
pub fn bh_claim(_a: i64, b: i64, r: i64) -> i64 {
    i64::from(b > r)
}

pub fn verify_bl(n: i64, r: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("b_l tau exponent", format!("r = {r}, r <= |alpha| <= {n}"));
    sweep(&mut rep, r.max(2), n, |a| {
        let mut blk = Block::default();
        for b in 1..=a / 2 {
            blk.instances += 1;
            let e = bl_exponent(a, b, r).expect("range respects precondition");
            if e < int(bl_claim(a, b, r)) {
                blk.violations
                    .push(format!("(|alpha|, |beta|) = ({a}, {b}): exponent {e}"));
            }
        }
        blk
    });
    rep
}

pub fn verify_bh(n: i64, r: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("b_h tau exponent", format!("r = {r}, r <= |alpha| <= {n}"));
    sweep(&mut rep, r.max(1), n, |a| {
        let mut blk = Block::default();
        for b in a / 2 + 1..=a {
            blk.instances += 1;
            let e = bh_exponent(a, b, r).expect("range respects precondition");
            if e < int(bh_claim(a, b, r)) {
                blk.violations
                    .push(format!("(|alpha|, |beta|) = ({a}, {b}): exponent {e}"));
            }
        }
        blk
    });
    rep
}

/// Curved-case exponent table with `(i + j, n + l)` in place of
/// `(|alpha|, |beta|)`. The exponent depends on the index sums only, so the
/// sweep enumerates sums; the low branch is `0 < n + l <= (i + j)/2`.
pub fn curved_exponent(ij: i64, nl: i64, r: i64) -> Result<(BigRational, i64)> {
    if ij < r || nl <= 0 || nl > ij {
        return Err(Error::Precondition(format!(
            "curved exponent needs i + j >= r and 0 < n + l <= i + j, got ({ij}, {nl}, {r})"
        )));
    }
    if 2 * nl <= ij {
        Ok((bl_exponent(ij, nl, r)?, bl_claim(ij, nl, r)))
    } else {
        Ok((bh_exponent(ij, nl, r)?, bh_claim(ij, nl, r)))
    }
}

pub fn verify_curved_exponents(n: i64, r: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("curved tau exponents", format!("r = {r}, r <= i + j <= {n}"));
    sweep(&mut rep, r, n, |ij| {
        let mut blk = Block::default();
        for nl in 1..=ij {
            blk.instances += 1;
            let (e, claim) = curved_exponent(ij, nl, r).expect("range respects precondition");
            if e < int(claim) {
                blk.violations
                    .push(format!("(i + j, n + l) = ({ij}, {nl}): exponent {e}"));
            }
        }
        blk
    });
    rep
}

fn pow(base: i64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(base), e as usize)
}

/// Squared low coefficient of factorials in closed form:
/// `(a/(m+1))^{2r} (b+1)(b+2) / (b^r (b+2)^r)`.
pub fn al_squared(a: i64, b: i64, r: u32) -> Result<BigRational> {
    if !(b > 0 && 2 * b <= a) {
        return Err(Error::Precondition(format!(
            "a_l needs 0 < |beta| <= |alpha|/2, got ({a}, {b})"
        )));
    }
    let m = a - b;
    let num = pow(a, 2 * r) * BigInt::from((b + 1) * (b + 2));
    let den = pow(m + 1, 2 * r) * pow(b, r) * pow(b + 2, r);
    Ok(BigRational::new(num, den))
}

/// Squared high coefficient of factorials in closed form:
/// `a^{2r} (m+1)^2 (m+2) (m+3) / (b^{2r+2} (m+1)^r (m+3)^r)`.
pub fn ah_squared(a: i64, b: i64, r: u32) -> Result<BigRational> {
    if !(2 * b > a && b <= a) {
        return Err(Error::Precondition(format!(
            "a_h needs |alpha|/2 < |beta| <= |alpha|, got ({a}, {b})"
        )));
    }
    let m = a - b;
    let num = pow(a, 2 * r) * BigInt::from((m + 1) * (m + 1) * (m + 2) * (m + 3));
    let den = pow(b, 2 * r + 2) * pow(m + 1, r) * pow(m + 3, r);
    Ok(BigRational::new(num, den))
}

/// Exact supremum of a family over `a <= n`, with its first attaining index
/// and the last `a` at which the running maximum over `a' <= a` increased.
#[derive(Debug, Clone, PartialEq)]
pub struct SupSweep {
    pub sup: BigRational,
    pub at: (i64, i64),
    pub last_increase: i64,
    pub instances: u64,
}

fn sup_sweep(
    n: i64,
    lo: i64,
    betas: impl Fn(i64) -> std::ops::RangeInclusive<i64> + Sync,
    value: impl Fn(i64, i64) -> BigRational + Sync,
) -> SupSweep {
    let rows: Vec<Option<(BigRational, i64, u64)>> = (lo..=n)
        .into_par_iter()
        .map(|a| {
            let mut best: Option<(BigRational, i64)> = None;
            let mut count = 0;
            for b in betas(a) {
                count += 1;
                let v = value(a, b);
                if best.as_ref().is_none_or(|(s, _)| v > *s) {
                    best = Some((v, b));
                }
            }
            best.map(|(v, b)| (v, b, count))
        })
        .collect();
    let mut out = SupSweep {
        sup: BigRational::zero(),
        at: (0, 0),
        last_increase: lo,
        instances: 0,
    };
    for (i, row) in rows.into_iter().enumerate() {
        let a = lo + i as i64;
        if let Some((v, b, c)) = row {
            out.instances += c;
            if v > out.sup {
                out.sup = v;
                out.at = (a, b);
                out.last_increase = a;
            }
        }
    }
    out
}

pub fn sup_al(n: i64, r: u32) -> SupSweep {
    sup_sweep(n, (r as i64).max(2), |a| 1..=a / 2, |a, b| al_squared(a, b, r).unwrap())
}

pub fn sup_ah(n: i64, r: u32) -> SupSweep {
    sup_sweep(n, r as i64, |a| a / 2 + 1..=a, |a, b| ah_squared(a, b, r).unwrap())
}

fn sup_report(name: &str, n: i64, r: u32, s: &SupSweep, early: i64) -> CertificateReport {
    let mut rep = CertificateReport::new(name, format!("r = {r}, r <= |alpha| <= {n}"));
    rep.instances = s.instances;
    rep.sup = Some(s.sup.to_string());
    rep.sup_at = Some(format!("(|alpha|, |beta|) = ({}, {})", s.at.0, s.at.1));
    if s.last_increase > early {
        rep.violation_count = 1;
        rep.violations.push(format!(
            "running maximum still increasing at |alpha| = {}",
            s.last_increase
        ));
        rep.verified = false;
    }
    rep
}

/// Index by which a supremum must have been attained.
pub const EARLY_INDEX: i64 = 50;

/// Sup of `a_l^2` with the attained-early check.
pub fn certify_al(n: i64, r: u32) -> CertificateReport {
    sup_report("a_l squared supremum", n, r, &sup_al(n, r), EARLY_INDEX)
}

pub fn certify_ah(n: i64, r: u32) -> CertificateReport {
    sup_report("a_h squared supremum", n, r, &sup_ah(n, r), EARLY_INDEX)
}

/// A multi-index in two dimensions.
pub type Idx = [i64; 2];

fn len(a: Idx) -> i64 {
    a[0] + a[1]
}

/// Doubled epsilon exponent of the weights collected in one term of the
/// product estimate, and the doubled bound `-gamma_2 - 2 kappa_2` it is
/// claimed to dominate.
pub fn epsilon_exponent2(alpha: Idx, beta: Idx, gamma: Idx, kappa: Idx, r: i64) -> Result<(i64, i64)> {
    let ok = len(gamma) == 2
        && len(kappa) == 1
        && gamma.iter().chain(&kappa).all(|&c| c >= 0)
        && beta.iter().zip(&alpha).all(|(&b, &a)| 0 <= b && b <= a)
        && len(beta) > 0;
    if !ok {
        return Err(Error::Precondition(format!(
            "epsilon bound needs 0 < beta <= alpha, |gamma| = 2, |kappa| = 1; got {alpha:?} {beta:?} {gamma:?} {kappa:?}"
        )));
    }
    let ind = |c: bool| i64::from(c);
    let (a, b) = (len(alpha), len(beta));
    let (a2, b2, g2, k2) = (alpha[1], beta[1], gamma[1], kappa[1]);
    let e2 = if 2 * b <= a {
        // F_beta^{1/2} F_{beta+gamma}^{1/2} G_{alpha-beta+kappa}
        2 * a2 - b2 * ind(b >= r) - (b2 + g2) * ind(b + 2 >= r) - 2 * (a2 - b2 + k2) * ind(a - b + 1 >= r + 1)
    } else {
        // G_beta F_{alpha-beta+kappa}^{1/2} F_{alpha-beta+kappa+gamma}^{1/2}
        2 * a2
            - 2 * b2 * ind(b >= r + 1)
            - (a2 - b2 + k2) * ind(a - b + 1 >= r)
            - (a2 - b2 + k2 + g2) * ind(a - b + 3 >= r)
    };
    Ok((e2, -g2 - 2 * k2))
}

/// `eps^E <= eps^{-2}` for the exponent `E` of [`epsilon_exponent2`], with
/// the intermediate bound `E >= -gamma_2/2 - kappa_2` checked as well.
pub fn verify_epsilon_bound(alpha: Idx, beta: Idx, gamma: Idx, kappa: Idx, r: i64, eps: f64) -> Result<bool> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in (0, 1)")));
    }
    let (e2, bound2) = epsilon_exponent2(alpha, beta, gamma, kappa, r)?;
    Ok(e2 >= bound2 && bound2 >= -4)
}

pub fn verify_epsilon_sweep(n: i64, r: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("epsilon exponent", format!("r = {r}, |alpha| <= {n}, all splits"));
    let gammas = [[2, 0], [1, 1], [0, 2]];
    let kappas = [[1, 0], [0, 1]];
    sweep(&mut rep, 1, n, |a| {
        let mut blk = Block::default();
        for a2 in 0..=a {
            let alpha = [a - a2, a2];
            for b1 in 0..=alpha[0] {
                for b2 in 0..=alpha[1] {
                    if b1 + b2 == 0 {
                        continue;
                    }
                    for g in gammas {
                        for k in kappas {
                            blk.instances += 1;
                            let (e2, bound2) = epsilon_exponent2(alpha, [b1, b2], g, k, r).unwrap();
                            if e2 < bound2 || bound2 < -4 {
                                blk.violations.push(format!(
                                    "alpha {alpha:?} beta {:?} gamma {g:?} kappa {k:?}: 2E = {e2}",
                                    [b1, b2]
                                ));
                            }
                        }
                    }
                }
            }
        }
        blk
    });
    rep
}

/// Pascal triangle of exact binomials up to row `n`.
pub struct Binomials {
    rows: Vec<Vec<BigUint>>,
}

impl Binomials {
    pub fn new(n: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut row = vec![BigUint::one(); i + 1];
            for j in 1..i {
                row[j] = &rows[i - 1][j - 1] + &rows[i - 1][j];
            }
            rows.push(row);
        }
        Binomials { rows }
    }

    pub fn get(&self, n: i64, k: i64) -> BigUint {
        if k < 0 || k > n || n < 0 {
            return BigUint::zero();
        }
        self.rows[n as usize][k as usize].clone()
    }
}

/// `sum_{alpha' <= alpha, |alpha'| = k} C(alpha1, alpha'1) C(alpha2, alpha'2) = C(|alpha|, k)`.
pub fn verify_komatsu_identity(alpha: Idx, k: i64) -> bool {
    let bin = Binomials::new(len(alpha) as usize);
    komatsu_with(&bin, alpha, k)
}

fn komatsu_with(bin: &Binomials, alpha: Idx, k: i64) -> bool {
    let mut s = BigUint::zero();
    for j1 in 0..=alpha[0].min(k) {
        let j2 = k - j1;
        if j2 <= alpha[1] {
            s += bin.get(alpha[0], j1) * bin.get(alpha[1], j2);
        }
    }
    s == bin.get(len(alpha), k)
}

pub fn verify_komatsu_sweep(m: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("sub-multi-index identity", format!("|alpha| <= {m}, 0 <= k <= |alpha|"));
    let bin = Binomials::new(m as usize);
    sweep(&mut rep, 0, m, |n| {
        let mut blk = Block::default();
        for a2 in 0..=n {
            for k in 0..=n {
                blk.instances += 1;
                if !komatsu_with(&bin, [n - a2, a2], k) {
                    blk.violations.push(format!("alpha = {:?}, k = {k}", [n - a2, a2]));
                }
            }
        }
        blk
    });
    rep
}

/// `C(m+2+l, m+2) <= C(i+j, i)` for `i >= m + 2`, `j >= l`.
pub fn verify_binomial_inequality(m: i64, l: i64, i: i64, j: i64) -> Result<bool> {
    if !(m >= 0 && l >= 0 && i >= m + 2 && j >= l) {
        return Err(Error::Precondition(format!(
            "binomial inequality needs i >= m + 2 and j >= l, got (m, l, i, j) = ({m}, {l}, {i}, {j})"
        )));
    }
    let bin = Binomials::new((i + j).max(m + 2 + l) as usize);
    Ok(bin.get(m + 2 + l, m + 2) <= bin.get(i + j, i))
}

pub fn verify_binomial_sweep(n: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("binomial inequality", format!("0 <= m, l, i, j <= {n}"));
    let bin = Binomials::new(2 * n as usize + 2);
    sweep(&mut rep, 0, n, |m| {
        let mut blk = Block::default();
        for l in 0..=n {
            let lhs = bin.get(m + 2 + l, m + 2);
            for i in m + 2..=n {
                for j in l..=n {
                    blk.instances += 1;
                    if lhs > bin.get(i + j, i) {
                        blk.violations.push(format!("(m, l, i, j) = ({m}, {l}, {i}, {j})"));
                    }
                }
            }
        }
        blk
    });
    rep
}

/// `a / b <= 2 (a - b)` for integers `a >= b + 1 >= 2`.
pub fn verify_elementary_inequality(a: i64, b: i64) -> Result<bool> {
    if !(b >= 1 && a >= b + 1) {
        return Err(Error::Precondition(format!(
            "elementary inequality needs a >= b + 1 >= 2, got ({a}, {b})"
        )));
    }
    let lhs = BigRational::new(BigInt::from(a), BigInt::from(b));
    Ok(lhs <= int(2 * (a - b)))
}

pub fn verify_elementary_sweep(n: i64) -> CertificateReport {
    let mut rep = CertificateReport::new("elementary inequality", format!("1 <= b < a <= {n}"));
    sweep(&mut rep, 2, n, |a| {
        let mut blk = Block::default();
        for b in 1..a {
            blk.instances += 1;
            // a/b <= 2(a-b)  <=>  a <= 2 b (a - b), b > 0
            let ok = BigInt::from(a) <= BigInt::from(2 * b) * BigInt::from(a - b);
            if !ok {
                blk.violations.push(format!("(a, b) = ({a}, {b})"));
            }
        }
        blk
    });
    rep
}

/// Every sweep of the certificate suite for one range.
pub fn full_suite(range: i64, rs: &[i64]) -> Vec<CertificateReport> {
    let mut out = Vec::new();
    for &r in rs {
        out.push(verify_bl(range, r));
        out.push(verify_bh(range, r));
        out.push(verify_curved_exponents(range, r));
        out.push(certify_al(range, r as u32));
        out.push(certify_ah(range, r as u32));
        out.push(verify_epsilon_sweep(range.min(40), r));
    }
    out.push(verify_komatsu_sweep(10));
    out.push(verify_binomial_sweep(30));
    out.push(verify_elementary_sweep(1000));
    out
}

/// Numerator and denominator magnitude check used by reports.
pub fn is_nonnegative(q: &BigRational) -> bool {
    !q.is_negative()
}
