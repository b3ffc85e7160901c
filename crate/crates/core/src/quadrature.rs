//! Degree-6 quadrature on triangles and tetrahedra.
//!
//! Both rules are collapsed (Duffy) tensor products of Gauss-Legendre rules,
//! so every weight is positive. Points are stored in barycentric coordinates
//! and weights are normalized to sum to one; multiply by the simplex measure.

use crate::scalar::Real;

/// Polynomial degree integrated exactly by [`triangle_rule`] and [`tet_rule`].
pub const EXACT_DEGREE: usize = 6;

#[derive(Debug, Clone)]
pub struct Rule<T, const K: usize> {
    pub points: Vec<[T; K]>,
    pub weights: Vec<T>,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(count: usize) -> Vec<(f64, f64)> {
    let n = count;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// 16-point rule on the triangle, exact through degree 6.
pub fn triangle_rule<T: Real>() -> Rule<T, 3> {
    let ga = gauss_legendre(4);
    let gb = gauss_legendre(4);
    let mut points = Vec::with_capacity(16);
    let mut weights = Vec::with_capacity(16);
    for &(a, wa) in &ga {
        for &(b, wb) in &gb {
            let x = a;
            let y = b * (1.0 - a);
            points.push([T::lit(1.0 - x - y), T::lit(x), T::lit(y)]);
            // reference area 1/2, normalized to 1
            weights.push(T::lit(2.0 * wa * wb * (1.0 - a)));
        }
    }
    Rule { points, weights }
}

/// 80-point rule on the tetrahedron, exact through degree 6.
pub fn tet_rule<T: Real>() -> Rule<T, 4> {
    let ga = gauss_legendre(5);
    let gb = gauss_legendre(4);
    let gc = gauss_legendre(4);
    let mut points = Vec::with_capacity(80);
    let mut weights = Vec::with_capacity(80);
    for &(a, wa) in &ga {
        for &(b, wb) in &gb {
            for &(c, wc) in &gc {
                let x = a;
                let y = b * (1.0 - a);
                let z = c * (1.0 - a) * (1.0 - b);
                points.push([T::lit(1.0 - x - y - z), T::lit(x), T::lit(y), T::lit(z)]);
                weights.push(T::lit(6.0 * wa * wb * wc * (1.0 - a).powi(2) * (1.0 - b)));
            }
        }
    }
    Rule { points, weights }
}
