//! Fourier x Chebyshev fields used by the time-dependent solver.
//!
//! A [`GridField`] stores coefficients `c[k][p]` of
//! `sum_{|k|<=K} sum_{p<=P} c[k][p] exp(2 pi i k x1) T_p(2 x2 - 1)`.
//! The base collocation grid has `2K + 1` equispaced x1 points and `P + 1`
//! Lobatto points; products are formed on a `3/2`-enlarged x1 grid and a
//! `2P`-degree Lobatto grid, which removes quadratic aliasing entirely.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::chebyshev::{self, LobattoTransform};
use crate::mode_field::{ModeField, Side};
use crate::quadrature::GaussLegendre;

/// Largest wall-normal derivative order with a precomputed amplification table.
pub const MAX_TABLED_ORDER: usize = 24;

/// Transform plans and matrices shared by every field of one resolution.
pub struct Transforms {
    pub k: usize,
    pub p: usize,
    /// base x1 grid size, `2K + 1`
    pub n1: usize,
    /// dealiased x1 grid size, `ceil(3 (2K + 1) / 2)`
    pub m1: usize,
    /// dealiased Chebyshev degree, `2P`
    pub q: usize,
    fft_n1: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fft_m1: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    lob: LobattoTransform,
    fine_lob: LobattoTransform,
    /// `T_p` at the fine Lobatto points, `(q + 1) x (p + 1)`
    fine_eval: Vec<f64>,
    pub gram: Vec<f64>,
    pub fine_cc: Vec<f64>,
    /// `amplification[j][p] = ||d2^j T_p||`
    amplification: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Transforms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transforms")
            .field("k", &self.k)
            .field("p", &self.p)
            .field("m1", &self.m1)
            .field("q", &self.q)
            .finish()
    }
}

impl Transforms {
    fn new(k: usize, p: usize) -> Self {
        let n1 = 2 * k + 1;
        let m1 = (3 * n1).div_ceil(2);
        let q = 2 * p.max(1);
        let mut planner = FftPlanner::new();
        let fft_n1 = (planner.plan_fft_forward(n1), planner.plan_fft_inverse(n1));
        let fft_m1 = (planner.plan_fft_forward(m1), planner.plan_fft_inverse(m1));
        let mut fine_eval = Vec::with_capacity((q + 1) * (p + 1));
        for xi in chebyshev::lobatto_xi(q) {
            fine_eval.extend(chebyshev::t_values(p, xi));
        }
        let amplification = (0..=MAX_TABLED_ORDER)
            .map(|j| chebyshev::derivative_amplification(p, j))
            .collect();
        Transforms {
            k,
            p,
            n1,
            m1,
            q,
            fft_n1,
            fft_m1,
            lob: LobattoTransform::new(p),
            fine_lob: LobattoTransform::new(q),
            fine_eval,
            gram: chebyshev::gram(p),
            fine_cc: chebyshev::clenshaw_curtis_x2(q),
            amplification,
        }
    }

    /// Cached transforms for `(K, P)`.
    pub fn get(k: usize, p: usize) -> Arc<Transforms> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Transforms>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&(k, p)) {
            return t.clone();
        }
        let t = Arc::new(Transforms::new(k, p));
        cache.lock().unwrap().entry((k, p)).or_insert(t).clone()
    }

    pub fn x1_base(&self) -> Vec<f64> {
        (0..self.n1).map(|i| i as f64 / self.n1 as f64).collect()
    }

    pub fn x1_fine(&self) -> Vec<f64> {
        (0..self.m1).map(|i| i as f64 / self.m1 as f64).collect()
    }

    pub fn x2_base(&self) -> Vec<f64> {
        chebyshev::lobatto_x2(self.p)
    }

    pub fn x2_fine(&self) -> Vec<f64> {
        chebyshev::lobatto_x2(self.q)
    }
}

fn fft_slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Outcome of sampling a [`ModeField`] onto a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport {
    pub max_abs_k: i64,
    /// True when the mode field has wavenumbers beyond `K`.
    pub aliased: bool,
    /// Max pointwise mismatch on an interleaved check grid.
    pub residual: f64,
}

/// Values on the dealiased grid, `m1 x (q + 1)` row-major (x1 index first).
#[derive(Debug, Clone, PartialEq)]
pub struct FineValues {
    pub m1: usize,
    pub q: usize,
    pub values: Vec<Complex64>,
}

impl FineValues {
    pub fn zeros(m1: usize, q: usize) -> Self {
        FineValues {
            m1,
            q,
            values: vec![Complex64::default(); m1 * (q + 1)],
        }
    }

    pub fn mul(&self, o: &FineValues) -> FineValues {
        FineValues {
            m1: self.m1,
            q: self.q,
            values: self.values.iter().zip(&o.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Fourier x Chebyshev coefficient field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    k: usize,
    p: usize,
    coeffs: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(k: usize, p: usize) -> Self {
        GridField {
            k,
            p,
            coeffs: vec![Complex64::default(); (2 * k + 1) * (p + 1)],
        }
    }

    pub fn from_coeffs(k: usize, p: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), (2 * k + 1) * (p + 1), "coefficient table shape");
        GridField { k, p, coeffs }
    }

    pub fn k_max(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn transforms(&self) -> Arc<Transforms> {
        Transforms::get(self.k, self.p)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn idx(&self, k: i64, p: usize) -> usize {
        (k + self.k as i64) as usize * (self.p + 1) + p
    }

    pub fn coeff(&self, k: i64, p: usize) -> Complex64 {
        if k.unsigned_abs() as usize > self.k || p > self.p {
            return Complex64::default();
        }
        self.coeffs[self.idx(k, p)]
    }

    pub fn set_coeff(&mut self, k: i64, p: usize, v: Complex64) {
        let i = self.idx(k, p);
        self.coeffs[i] = v;
    }

    /// Chebyshev coefficients of wavenumber `k`.
    pub fn row(&self, k: i64) -> &[Complex64] {
        let s = self.idx(k, 0);
        &self.coeffs[s..s + self.p + 1]
    }

    pub fn row_mut(&mut self, k: i64) -> &mut [Complex64] {
        let s = self.idx(k, 0);
        let n = self.p + 1;
        &mut self.coeffs[s..s + n]
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        let k = self.k as i64;
        -k..=k
    }

    /// Physical values on the base grid, `(2K + 1) x (P + 1)`.
    pub fn to_values(&self) -> Vec<Complex64> {
        let tr = self.transforms();
        let (n1, np) = (tr.n1, self.p + 1);
        let mut out = vec![Complex64::default(); n1 * np];
        let mut line = vec![Complex64::default(); n1];
        let vert: Vec<Vec<Complex64>> = self.wavenumbers().map(|k| tr.lob.to_values(self.row(k))).collect();
        for j in 0..np {
            line.iter_mut().for_each(|v| *v = Complex64::default());
            for (ik, k) in self.wavenumbers().enumerate() {
                line[fft_slot(k, n1)] = vert[ik][j];
            }
            tr.fft_n1.1.process(&mut line);
            for i in 0..n1 {
                out[i * np + j] = line[i];
            }
        }
        out
    }

    /// Inverse of [`GridField::to_values`].
    pub fn from_values(k: usize, p: usize, values: &[Complex64]) -> Self {
        let tr = Transforms::get(k, p);
        let (n1, np) = (tr.n1, p + 1);
        assert_eq!(values.len(), n1 * np);
        let mut f = GridField::zeros(k, p);
        let mut spec = vec![vec![Complex64::default(); np]; n1];
        let mut line = vec![Complex64::default(); n1];
        for j in 0..np {
            for i in 0..n1 {
                line[i] = values[i * np + j];
            }
            tr.fft_n1.0.process(&mut line);
            for (s, v) in line.iter().enumerate() {
                spec[s][j] = v / n1 as f64;
            }
        }
        for kk in -(k as i64)..=k as i64 {
            let c = tr.lob.to_coeffs(&spec[fft_slot(kk, n1)]);
            f.row_mut(kk).copy_from_slice(&c);
        }
        f
    }

    /// Samples `func(x1, x2)` on the base grid and transforms.
    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(k: usize, p: usize, func: F) -> Self {
        let tr = Transforms::get(k, p);
        let x1 = tr.x1_base();
        let x2 = tr.x2_base();
        let mut vals = Vec::with_capacity(x1.len() * x2.len());
        for &a in &x1 {
            for &b in &x2 {
                vals.push(func(a, b));
            }
        }
        Self::from_values(k, p, &vals)
    }

    pub fn from_real_fn<F: Fn(f64, f64) -> f64>(k: usize, p: usize, func: F) -> Self {
        Self::from_fn(k, p, |a, b| Complex64::new(func(a, b), 0.0))
    }

    /// Collocation projection of a mode field with a mismatch report.
    pub fn from_mode(f: &ModeField, k: usize, p: usize) -> (Self, ProjectionReport) {
        let g = Self::from_fn(k, p, |a, b| f.eval(a, b));
        let max_abs_k = f.max_abs_k();
        let n1 = 2 * k + 1;
        let gl = GaussLegendre::new(p + 2);
        let mut residual: f64 = 0.0;
        for i in 0..n1 {
            let a = (i as f64 + 0.5) / n1 as f64;
            for &b in &gl.nodes {
                residual = residual.max((g.eval(a, b) - f.eval(a, b)).norm());
            }
        }
        (
            g,
            ProjectionReport {
                max_abs_k,
                aliased: max_abs_k > k as i64,
                residual,
            },
        )
    }

    /// Point evaluation.
    pub fn eval(&self, x1: f64, x2: f64) -> Complex64 {
        let xi = 2.0 * x2 - 1.0;
        self.wavenumbers()
            .map(|k| chebyshev::clenshaw(self.row(k), xi) * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x1))
            .sum()
    }

    /// Spectral derivative along `axis` (1 or 2).
    pub fn diff(&self, axis: usize) -> GridField {
        let mut out = GridField::zeros(self.k, self.p);
        for k in self.wavenumbers() {
            match axis {
                1 => {
                    let f = Complex64::new(0.0, 2.0 * PI * k as f64);
                    for (o, c) in out.row_mut(k).iter_mut().zip(self.row(k)) {
                        *o = c * f;
                    }
                }
                2 => out
                    .row_mut(k)
                    .copy_from_slice(&chebyshev::derivative_coeffs(self.row(k))),
                _ => panic!("axis must be 1 or 2, got {axis}"),
            }
        }
        out
    }

    pub fn derivative(&self, alpha: [usize; 2]) -> GridField {
        let mut f = self.clone();
        for _ in 0..alpha[0] {
            f = f.diff(1);
        }
        for _ in 0..alpha[1] {
            f = f.diff(2);
        }
        f
    }

    /// Values on the dealiased grid.
    pub fn to_fine(&self) -> FineValues {
        let tr = self.transforms();
        let (m1, nq, np) = (tr.m1, tr.q + 1, self.p + 1);
        let mut out = FineValues::zeros(m1, tr.q);
        let mut line = vec![Complex64::default(); m1];
        let vert: Vec<Vec<Complex64>> = self
            .wavenumbers()
            .map(|k| {
                let row = self.row(k);
                (0..nq)
                    .map(|j| {
                        tr.fine_eval[j * np..(j + 1) * np]
                            .iter()
                            .zip(row)
                            .map(|(&t, &c)| c * t)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        for j in 0..nq {
            line.iter_mut().for_each(|v| *v = Complex64::default());
            for (ik, k) in self.wavenumbers().enumerate() {
                line[fft_slot(k, m1)] = vert[ik][j];
            }
            tr.fft_m1.1.process(&mut line);
            for i in 0..m1 {
                out.values[i * nq + j] = line[i];
            }
        }
        out
    }

    /// Truncating inverse of [`GridField::to_fine`].
    pub fn from_fine(k: usize, p: usize, fine: &FineValues) -> GridField {
        let tr = Transforms::get(k, p);
        let (m1, nq) = (tr.m1, tr.q + 1);
        assert_eq!((fine.m1, fine.q), (tr.m1, tr.q), "fine grid shape");
        let mut spec = vec![vec![Complex64::default(); nq]; m1];
        let mut line = vec![Complex64::default(); m1];
        for j in 0..nq {
            for i in 0..m1 {
                line[i] = fine.values[i * nq + j];
            }
            tr.fft_m1.0.process(&mut line);
            for (s, v) in line.iter().enumerate() {
                spec[s][j] = v / m1 as f64;
            }
        }
        let mut f = GridField::zeros(k, p);
        for kk in -(k as i64)..=k as i64 {
            let c = tr.fine_lob.to_coeffs(&spec[fft_slot(kk, m1)]);
            f.row_mut(kk).copy_from_slice(&c[..=p]);
        }
        f
    }

    /// Dealiased product.
    pub fn product(&self, g: &GridField) -> GridField {
        assert_eq!((self.k, self.p), (g.k, g.p), "product needs matching (K, P)");
        GridField::from_fine(self.k, self.p, &self.to_fine().mul(&g.to_fine()))
    }

    pub fn add(&self, g: &GridField) -> GridField {
        self.zip_with(g, |a, b| a + b)
    }

    pub fn sub(&self, g: &GridField) -> GridField {
        self.zip_with(g, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> GridField {
        GridField {
            k: self.k,
            p: self.p,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * g`
    pub fn axpy(&self, s: f64, g: &GridField) -> GridField {
        self.zip_with(g, |a, b| a + b * s)
    }

    fn zip_with(&self, g: &GridField, op: impl Fn(Complex64, Complex64) -> Complex64) -> GridField {
        assert_eq!((self.k, self.p), (g.k, g.p), "shape mismatch");
        GridField {
            k: self.k,
            p: self.p,
            coeffs: self.coeffs.iter().zip(&g.coeffs).map(|(&a, &b)| op(a, b)).collect(),
        }
    }

    /// `int_Omega f conj(g)` in coefficient space.
    pub fn inner(&self, g: &GridField) -> Complex64 {
        let gram = &self.transforms().gram;
        let np = self.p + 1;
        let mut s = Complex64::default();
        for k in self.wavenumbers() {
            let (a, b) = (self.row(k), g.row(k));
            for p in 0..np {
                if a[p] == Complex64::default() {
                    continue;
                }
                let mut t = Complex64::default();
                for q in 0..np {
                    t += b[q].conj() * gram[p * np + q];
                }
                s += a[p] * t;
            }
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// L2 norm by Clenshaw-Curtis quadrature on the dealiased grid.
    pub fn l2_norm_quadrature(&self) -> f64 {
        let tr = self.transforms();
        let fine = self.to_fine();
        let nq = tr.q + 1;
        let mut s = 0.0;
        for i in 0..tr.m1 {
            for j in 0..nq {
                s += tr.fine_cc[j] * fine.values[i * nq + j].norm_sqr();
            }
        }
        (s / tr.m1 as f64).sqrt()
    }

    /// `int_Omega f`.
    pub fn mean(&self) -> Complex64 {
        self.row(0)
            .iter()
            .enumerate()
            .map(|(p, c)| c * (0.5 * chebyshev::t_integral(p)))
            .sum()
    }

    /// x1-Fourier coefficients of the wall trace, indexed `k + K`.
    pub fn trace(&self, side: Side) -> Vec<Complex64> {
        self.wavenumbers()
            .map(|k| {
                self.row(k)
                    .iter()
                    .enumerate()
                    .map(|(p, c)| {
                        let (top, bot) = chebyshev::t_at_walls(p);
                        c * match side {
                            Side::Top => top,
                            Side::Bottom => bot,
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// L2 norm of the wall trace over one period.
    pub fn trace_norm(&self, side: Side) -> f64 {
        self.trace(side).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Roundoff estimate for `||d^alpha f||`. Each row carries a noise floor
    /// taken as the larger of machine epsilon times its size and its two
    /// trailing coefficients; the floor is propagated through the exact
    /// amplification of the differentiation operators.
    pub fn derivative_error_estimate(&self, alpha: [usize; 2]) -> f64 {
        let tr = self.transforms();
        let j = alpha[1].min(MAX_TABLED_ORDER);
        let amp2: f64 = tr.amplification[j].iter().map(|a| a * a).sum();
        let mut s = 0.0;
        for k in self.wavenumbers() {
            let row = self.row(k);
            let size = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            // rows of degree below alpha[1] differentiate to exact zeros
            let degree = row.iter().rposition(|c| *c != Complex64::new(0.0, 0.0));
            if degree.is_none_or(|d| d < alpha[1]) {
                continue;
            }
            let tail = row[self.p]
                .norm()
                .max(if self.p > 0 { row[self.p - 1].norm() } else { 0.0 });
            let eta = (f64::EPSILON * size).max(tail);
            let kx = (2.0 * PI * k.unsigned_abs() as f64).powi(alpha[0] as i32);
            if alpha[0] > 0 && k == 0 {
                continue;
            }
            s += (kx * eta).powi(2) * amp2;
        }
        s.sqrt()
    }

    /// Real part check: conjugate symmetry of the x1 spectrum.
    pub fn imag_residual(&self) -> f64 {
        let mut s: f64 = 0.0;
        for k in self.wavenumbers() {
            for p in 0..=self.p {
                s = s.max((self.coeff(k, p) - self.coeff(-k, p).conj()).norm());
            }
        }
        s
    }

    /// Replaces the field by its real part (conjugate-symmetrizes the spectrum).
    pub fn real_part(&self) -> GridField {
        let mut out = self.clone();
        for k in self.wavenumbers() {
            for p in 0..=self.p {
                out.set_coeff(k, p, 0.5 * (self.coeff(k, p) + self.coeff(-k, p).conj()));
            }
        }
        out
    }

    /// Copy with a different resolution (zero padded or truncated).
    pub fn resample(&self, k: usize, p: usize) -> GridField {
        let mut out = GridField::zeros(k, p);
        let kk = k.min(self.k) as i64;
        for w in -kk..=kk {
            for q in 0..=p.min(self.p) {
                out.set_coeff(w, q, self.coeff(w, q));
            }
        }
        out
    }
}

/// Two-component grid field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridField {
    pub comp1: GridField,
    pub comp2: GridField,
}

impl VectorGridField {
    pub fn new(comp1: GridField, comp2: GridField) -> Self {
        assert_eq!((comp1.k, comp1.p), (comp2.k, comp2.p), "component shapes differ");
        VectorGridField { comp1, comp2 }
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        VectorGridField::new(GridField::zeros(k, p), GridField::zeros(k, p))
    }

    pub fn from_mode(v: &crate::mode_field::VectorModeField, k: usize, p: usize) -> (Self, ProjectionReport) {
        let (a, ra) = GridField::from_mode(&v.comp1, k, p);
        let (b, rb) = GridField::from_mode(&v.comp2, k, p);
        let report = ProjectionReport {
            max_abs_k: ra.max_abs_k.max(rb.max_abs_k),
            aliased: ra.aliased || rb.aliased,
            residual: ra.residual.max(rb.residual),
        };
        (VectorGridField::new(a, b), report)
    }

    /// `(d2 psi, -d1 psi)`: discretely solenoidal, and impermeable whenever
    /// `psi` is constant along each wall.
    pub fn from_stream_function(psi: &GridField) -> Self {
        VectorGridField::new(psi.diff(2), psi.diff(1).scale(-1.0))
    }

    pub fn k_max(&self) -> usize {
        self.comp1.k
    }

    pub fn degree(&self) -> usize {
        self.comp1.p
    }

    pub fn component(&self, i: usize) -> &GridField {
        match i {
            1 => &self.comp1,
            2 => &self.comp2,
            _ => panic!("component index must be 1 or 2"),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        VectorGridField::new(self.comp1.add(&o.comp1), self.comp2.add(&o.comp2))
    }

    pub fn sub(&self, o: &Self) -> Self {
        VectorGridField::new(self.comp1.sub(&o.comp1), self.comp2.sub(&o.comp2))
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorGridField::new(self.comp1.scale(s), self.comp2.scale(s))
    }

    pub fn axpy(&self, s: f64, o: &Self) -> Self {
        VectorGridField::new(self.comp1.axpy(s, &o.comp1), self.comp2.axpy(s, &o.comp2))
    }

    pub fn derivative(&self, alpha: [usize; 2]) -> Self {
        VectorGridField::new(self.comp1.derivative(alpha), self.comp2.derivative(alpha))
    }

    pub fn divergence(&self) -> GridField {
        self.comp1.diff(1).add(&self.comp2.diff(2))
    }

    /// Euclidean L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.comp1.l2_norm().powi(2) + self.comp2.l2_norm().powi(2)).sqrt()
    }

    /// `||v2||` on both walls combined.
    pub fn normal_trace_norm(&self) -> f64 {
        (self.comp2.trace_norm(Side::Bottom).powi(2) + self.comp2.trace_norm(Side::Top).powi(2)).sqrt()
    }

    pub fn real_part(&self) -> Self {
        VectorGridField::new(self.comp1.real_part(), self.comp2.real_part())
    }

    pub fn resample(&self, k: usize, p: usize) -> Self {
        VectorGridField::new(self.comp1.resample(k, p), self.comp2.resample(k, p))
    }
}
