//! Chebyshev polynomials on the wall-normal interval, mapped `x2 = (xi + 1) / 2`.
//!
//! Coefficients `c_p` represent `sum_p c_p T_p(2 x2 - 1)`. Collocation uses the
//! Gauss-Lobatto points `xi_j = cos(pi j / n)`, ordered from the top wall
//! (`x2 = 1`) to the bottom wall.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Lobatto points in `xi` for degree `n` (n + 1 points, descending).
pub fn lobatto_xi(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    (0..=n)
        .map(|j| {
            // symmetric evaluation keeps xi_j = -xi_{n-j} exactly
            (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin()
        })
        .collect()
}

/// Lobatto points mapped to `[0, 1]`.
pub fn lobatto_x2(n: usize) -> Vec<f64> {
    lobatto_xi(n).into_iter().map(|xi| 0.5 * (xi + 1.0)).collect()
}

/// Values `T_0(xi) .. T_deg(xi)`.
pub fn t_values(deg: usize, xi: f64) -> Vec<f64> {
    let mut t = vec![0.0; deg + 1];
    t[0] = 1.0;
    if deg >= 1 {
        t[1] = xi;
    }
    for p in 2..=deg {
        t[p] = 2.0 * xi * t[p - 1] - t[p - 2];
    }
    t
}

/// Clenshaw evaluation of `sum c_p T_p(xi)`.
pub fn clenshaw(c: &[Complex64], xi: f64) -> Complex64 {
    let mut b1 = Complex64::default();
    let mut b2 = Complex64::default();
    for &cp in c.iter().skip(1).rev() {
        let b0 = cp + b1 * (2.0 * xi) - b2;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or_default() + b1 * xi - b2
}

/// Coefficients of `d/dx2` of a Chebyshev series in `x2` (factor 2 from the map).
/// The output has the same length; the top coefficient is zero.
pub fn derivative_coeffs(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len();
    let mut d = vec![Complex64::default(); n];
    if n <= 1 {
        return d;
    }
    let deg = n - 1;
    // b_{deg} = 0, b_{p-1} = b_{p+1} + 2 p c_p
    for p in (1..=deg).rev() {
        let next = if p + 1 <= deg { d[p + 1] } else { Complex64::default() };
        d[p - 1] = next + c[p] * (2.0 * p as f64);
    }
    d[0] *= 0.5;
    for v in &mut d {
        *v *= 2.0;
    }
    d
}

/// `int_{-1}^{1} T_n(xi) d xi`.
pub fn t_integral(n: usize) -> f64 {
    if n % 2 == 1 {
        0.0
    } else {
        2.0 / (1.0 - (n * n) as f64)
    }
}

/// Gram matrix `int_0^1 T_p T_q dx2` for `p, q <= deg`, row-major.
pub fn gram(deg: usize) -> Vec<f64> {
    let n = deg + 1;
    let mut g = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            g[p * n + q] = 0.25 * (t_integral(p + q) + t_integral(p.abs_diff(q)));
        }
    }
    g
}

/// `T_p(1)` and `T_p(-1)`.
pub fn t_at_walls(p: usize) -> (f64, f64) {
    (1.0, if p % 2 == 0 { 1.0 } else { -1.0 })
}

/// `T_p'(xi)` at `xi = 1` and `xi = -1`.
pub fn dt_at_walls(p: usize) -> (f64, f64) {
    let p2 = (p * p) as f64;
    (p2, if p % 2 == 0 { -p2 } else { p2 })
}

/// Dense DCT-I pair for `n + 1` Lobatto points.
#[derive(Debug, Clone)]
pub struct LobattoTransform {
    pub n: usize,
    /// values_j = sum_p backward[j][p] c_p
    pub backward: Vec<f64>,
    /// c_p = sum_j forward[p][j] values_j
    pub forward: Vec<f64>,
}

impl LobattoTransform {
    pub fn new(n: usize) -> Self {
        let m = n + 1;
        let mut backward = vec![0.0; m * m];
        let mut forward = vec![0.0; m * m];
        if n == 0 {
            return LobattoTransform {
                n,
                backward: vec![1.0],
                forward: vec![1.0],
            };
        }
        let cosjp = |j: usize, p: usize| {
            // cos(pi j p / n) with the argument reduced mod 2n for accuracy
            let r = (j * p) % (2 * n);
            (PI * r as f64 / n as f64).cos()
        };
        for j in 0..m {
            for p in 0..m {
                backward[j * m + p] = cosjp(j, p);
            }
        }
        for p in 0..m {
            let gp = if p == 0 || p == n { 2.0 } else { 1.0 };
            for j in 0..m {
                let hj = if j == 0 || j == n { 0.5 } else { 1.0 };
                forward[p * m + j] = 2.0 / (n as f64 * gp) * hj * cosjp(j, p);
            }
        }
        LobattoTransform { n, backward, forward }
    }

    pub fn to_values(&self, c: &[Complex64]) -> Vec<Complex64> {
        apply(&self.backward, self.n + 1, c)
    }

    pub fn to_coeffs(&self, v: &[Complex64]) -> Vec<Complex64> {
        apply(&self.forward, self.n + 1, v)
    }
}

fn apply(mat: &[f64], m: usize, x: &[Complex64]) -> Vec<Complex64> {
    (0..m)
        .map(|i| mat[i * m..(i + 1) * m].iter().zip(x).map(|(&a, &b)| b * a).sum())
        .collect()
}

/// Clenshaw-Curtis weights on `[0, 1]` at [`lobatto_x2`].
pub fn clenshaw_curtis_x2(n: usize) -> Vec<f64> {
    crate::quadrature::clenshaw_curtis_weights(n)
        .into_iter()
        .map(|w| 0.5 * w)
        .collect()
}

/// Wall-normal derivative amplification: `||d^j T_p||_{L2(0,1)}` for every
/// `p <= deg`, i.e. how much a unit perturbation of coefficient `p` grows
/// under `j` applications of [`derivative_coeffs`].
pub fn derivative_amplification(deg: usize, j: usize) -> Vec<f64> {
    let g = gram(deg);
    let n = deg + 1;
    (0..n)
        .map(|p| {
            let mut c = vec![Complex64::default(); n];
            c[p] = Complex64::new(1.0, 0.0);
            for _ in 0..j {
                c = derivative_coeffs(&c);
            }
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += (c[a] * c[b].conj()).re * g[a * n + b];
                }
            }
            s.max(0.0).sqrt()
        })
        .collect()
}

/// Antiderivative coefficients in `xi` (length `len + 1`, constant term 0).
fn antiderivative_xi(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let at = |i: usize| c.get(i).copied().unwrap_or(0.0);
    let mut a = vec![0.0; n + 1];
    if n == 0 {
        return a;
    }
    a[1] = at(0) - 0.5 * at(2);
    for k in 2..=n {
        a[k] = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
    }
    a
}

/// Cumulative integration on [`lobatto_x2`] nodes: `S[i][j]` (row-major) is
/// `int_0^{x_i} l_j`, with `l_j` the Lagrange basis of the nodes.
pub fn integration_matrix(n: usize) -> Vec<f64> {
    let tr = LobattoTransform::new(n);
    let m = n + 1;
    let xi = lobatto_xi(n);
    let mut s = vec![0.0; m * m];
    for j in 0..m {
        let c: Vec<f64> = (0..m).map(|p| tr.forward[p * m + j]).collect();
        let a = antiderivative_xi(&c);
        let eval = |x: f64| t_values(a.len() - 1, x).iter().zip(&a).map(|(t, c)| t * c).sum::<f64>();
        let base = eval(-1.0);
        for i in 0..m {
            // dx2 = dxi / 2
            s[i * m + j] = 0.5 * (eval(xi[i]) - base);
        }
    }
    s
}
