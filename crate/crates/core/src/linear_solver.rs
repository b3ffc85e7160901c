//! Discrete solution operator `h -> v` of the linear Neumann problem
//! `-Δv + v = 0`, `∂v/∂η = h`, and the studies built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{AssemblyError, BoundaryPoint, FeSpace, FemFunction};
use crate::exponents::ExponentContext;
use crate::krylov::{conjugate_gradient, SolverError};
use crate::mesh::{build_cube_mesh, MeshError, Point};
use crate::norms::{boundary_field_lp, norm_linf, norm_w1m, NormError, Region};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone)]
pub struct LinearSolveResult<'s, T> {
    pub solution: FemFunction<'s, T>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub tolerance: f64,
}

/// Iteration cap used by every CG solve: ten times the number of unknowns.
pub fn default_iteration_cap(dimension: usize) -> usize {
    10 * dimension
}

/// Solves `A v = load` by Jacobi-preconditioned CG, warm-started from `guess`.
pub fn solve_load<'s, T: Real>(
    space: &'s FeSpace<T>,
    load: &[T],
    tol: T,
    guess: Option<&[T]>,
) -> Result<LinearSolveResult<'s, T>, LinearError> {
    if !(tol > T::zero()) {
        return Err(LinearError::BadTolerance(tol.as_f64()));
    }
    let mut x = match guess {
        Some(g) => g.to_vec(),
        None => vec![T::zero(); space.dimension()],
    };
    let stats = conjugate_gradient(
        space.h1_operator(),
        load,
        &mut x,
        tol,
        default_iteration_cap(space.dimension()),
    )?;
    Ok(LinearSolveResult {
        solution: space.function(x)?,
        iterations: stats.iterations,
        residual_norm: stats.relative_residual,
        tolerance: tol.as_f64(),
    })
}

/// `v = T h`: the P1 solution with Neumann data `h`.
pub fn solve_neumann<'s, T: Real>(
    space: &'s FeSpace<T>,
    h: impl Fn(&BoundaryPoint<T>) -> T,
    tol: T,
) -> Result<LinearSolveResult<'s, T>, LinearError> {
    let load = space.boundary_load(h)?;
    solve_load(space, &load, tol, None)
}

/// Closed-form solutions of `-Δv + v = 0` used for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ManufacturedCase {
    /// `v = e^{x1}`
    #[serde(rename = "exp-x1")]
    ExpX1,
    /// `v = e^{(x1 + x2)/√2}`
    #[serde(rename = "exp-diag")]
    ExpDiagonal,
}

impl ManufacturedCase {
    pub fn name(self) -> &'static str {
        match self {
            ManufacturedCase::ExpX1 => "exp-x1",
            ManufacturedCase::ExpDiagonal => "exp-diag",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp-x1" => Some(Self::ExpX1),
            "exp-diag" => Some(Self::ExpDiagonal),
            _ => None,
        }
    }

    pub fn value<T: Real>(self, x: &Point<T>) -> T {
        match self {
            Self::ExpX1 => x[0].exp(),
            Self::ExpDiagonal => ((x[0] + x[1]) * T::FRAC_1_SQRT_2()).exp(),
        }
    }

    pub fn gradient<T: Real>(self, x: &Point<T>) -> Point<T> {
        match self {
            Self::ExpX1 => [x[0].exp(), T::zero(), T::zero()],
            Self::ExpDiagonal => {
                let g = self.value(x) * T::FRAC_1_SQRT_2();
                [g, g, T::zero()]
            }
        }
    }

    /// Neumann data `∇v · η`.
    pub fn flux<T: Real>(self, bp: &BoundaryPoint<T>) -> T {
        let g = self.gradient(&bp.x);
        g[0] * bp.normal[0] + g[1] * bp.normal[1] + g[2] * bp.normal[2]
    }

    /// Exact `||v||^2_{H1}` on the unit cube.
    pub fn h1_norm_squared(self) -> f64 {
        match self {
            Self::ExpX1 => std::f64::consts::E.powi(2) - 1.0,
            Self::ExpDiagonal => (std::f64::consts::SQRT_2.exp() - 1.0).powi(2),
        }
    }
}

/// `(H1 error, L2 error)` of a P1 function against a manufactured solution.
pub fn manufactured_errors<T: Real>(u: &FemFunction<'_, T>, case: ManufacturedCase) -> (T, T) {
    let mut l2 = T::zero();
    let mut semi = T::zero();
    u.space().for_each_volume_point(|tet, bary, x, w| {
        let e = u.at_volume_point(tet, bary) - case.value(x);
        let gh = u.gradient(tet);
        let ge = case.gradient(x);
        let d = [gh[0] - ge[0], gh[1] - ge[1], gh[2] - ge[2]];
        l2 = l2 + w * e * e;
        semi = semi + w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    });
    ((l2 + semi).sqrt(), l2.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub case: &'static str,
    pub n: usize,
    pub h1_error: f64,
    pub l2_error: f64,
    pub h1_relative_error: f64,
    /// Observed order against the previous row; absent on the first row.
    pub h1_order: Option<f64>,
    pub l2_order: Option<f64>,
    pub iterations: usize,
}

/// Error table of the manufactured problem over the mesh levels in `n_list`.
pub fn manufactured_convergence(
    case: ManufacturedCase,
    n_list: &[usize],
    tol: f64,
) -> Result<Vec<ConvergenceRow>, LinearError> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let space = FeSpace::new(build_cube_mesh::<f64>(n)?)?;
        let solve = solve_neumann(&space, |bp| case.flux(bp), tol)?;
        let (h1, l2) = manufactured_errors(&solve.solution, case);
        let (h1_order, l2_order) = match rows.last() {
            Some(prev) => {
                let ratio = (n as f64 / prev.n as f64).ln();
                (
                    Some((prev.h1_error / h1).ln() / ratio),
                    Some((prev.l2_error / l2).ln() / ratio),
                )
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            case: case.name(),
            n,
            h1_error: h1,
            l2_error: l2,
            h1_relative_error: h1 / case.h1_norm_squared().sqrt(),
            h1_order,
            l2_order,
            iterations: solve.iterations,
        });
    }
    Ok(rows)
}

/// Where a trace exponent `r` sits relative to the regularity ranges of the
/// Neumann solution operator for data in `L^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TraceRange {
    /// `q < N-1` and `r <= (N-1)q/(N-1-q)`.
    Continuous { limit: f64 },
    /// `q < N-1` and `r` beyond the admissible limit.
    OutsideRange { limit: f64 },
    /// `q = N-1`: every finite `r`.
    AnyFinite,
    /// `q > N-1`: the solution is Hölder continuous, every `r` including infinity.
    Holder,
}

impl TraceRange {
    pub fn label(self) -> &'static str {
        match self {
            TraceRange::Continuous { .. } => "in range",
            TraceRange::OutsideRange { .. } => "outside the trace range for q < N-1",
            TraceRange::AnyFinite => "any finite r",
            TraceRange::Holder => "Hölder continuous",
        }
    }
}

/// Classifies `r` (use `f64::INFINITY` for the sup norm).
pub fn trace_range(dimension: u32, q: f64, r: f64) -> TraceRange {
    let d = dimension as f64 - 1.0;
    if q > d {
        TraceRange::Holder
    } else if q == d {
        if r.is_finite() {
            TraceRange::AnyFinite
        } else {
            TraceRange::OutsideRange { limit: f64::INFINITY }
        }
    } else {
        let limit = d * q / (d - q);
        if r <= limit {
            TraceRange::Continuous { limit }
        } else {
            TraceRange::OutsideRange { limit }
        }
    }
}

/// Smooth boundary datum drawn from a fixed dictionary of low-order
/// monomials and trigonometric traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothBoundaryData {
    pub coefficients: Vec<f64>,
}

impl SmoothBoundaryData {
    pub const DICTIONARY_SIZE: usize = 13;

    /// Deterministic draw for `(seed, sample)`; independent of the mesh.
    pub fn draw(seed: u64, sample: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64 + 1);
        Self {
            coefficients: (0..Self::DICTIONARY_SIZE)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut coefficients = vec![0.0; Self::DICTIONARY_SIZE];
        coefficients[0] = c;
        Self { coefficients }
    }

    pub fn eval<T: Real>(&self, x: &Point<T>) -> T {
        let [a, b, c] = x.map(|v| v.as_f64());
        let pi = std::f64::consts::PI;
        let basis = [
            1.0,
            a,
            b,
            c,
            a * b,
            b * c,
            c * a,
            a * a,
            b * b,
            c * c,
            (pi * a).sin(),
            (pi * b).cos(),
            (2.0 * pi * c).sin(),
        ];
        T::lit(self.coefficients.iter().zip(basis).map(|(k, f)| k * f).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityRow {
    pub n: usize,
    pub sample: usize,
    pub q: f64,
    pub m: f64,
    pub ratio_w1m: f64,
    pub ratio_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub rows: Vec<RegularityRow>,
    /// `(n, max ratio_w1m, max ratio_linf)` per mesh level.
    pub maxima: Vec<(usize, f64, f64)>,
    pub sup_norm_range: TraceRange,
}

/// Ratios `||Th||_{W^{1,m}} / ||h||_{L^q}` and `||Th||_inf / ||h||_{L^q}`
/// over `sample_count` seeded smooth data `h`.
pub fn regularity_ratio_suite(
    ctx: &ExponentContext<f64>,
    n_list: &[usize],
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> Result<RegularityReport, LinearError> {
    regularity_ratio_suite_with(ctx, n_list, &seeded_boundary_data(seed, sample_count), tol)
}

/// Same as [`regularity_ratio_suite`] over explicit data.
pub fn regularity_ratio_suite_with(
    ctx: &ExponentContext<f64>,
    n_list: &[usize],
    data: &[SmoothBoundaryData],
    tol: f64,
) -> Result<RegularityReport, LinearError> {
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for &n in n_list {
        let space = FeSpace::new(build_cube_mesh::<f64>(n)?)?;
        let (mut max_w, mut max_inf) = (0.0f64, 0.0f64);
        for (sample, h) in data.iter().enumerate() {
            let v = solve_neumann(&space, |bp| h.eval(&bp.x), tol)?.solution;
            let h_norm = boundary_field_lp(&space, |bp| h.eval(&bp.x), ctx.q)?;
            let ratio_w1m = norm_w1m(&v, ctx.m)? / h_norm;
            let ratio_linf = norm_linf(&v, Region::Volume) / h_norm;
            max_w = max_w.max(ratio_w1m);
            max_inf = max_inf.max(ratio_linf);
            rows.push(RegularityRow {
                n,
                sample,
                q: ctx.q,
                m: ctx.m,
                ratio_w1m,
                ratio_linf,
            });
        }
        maxima.push((n, max_w, max_inf));
    }
    Ok(RegularityReport {
        rows,
        maxima,
        sup_norm_range: trace_range(ctx.dimension, ctx.q, f64::INFINITY),
    })
}

/// Seeded data set for [`regularity_ratio_suite`].
pub fn seeded_boundary_data(seed: u64, sample_count: usize) -> Vec<SmoothBoundaryData> {
    (0..sample_count)
        .map(|i| SmoothBoundaryData::draw(seed, i))
        .collect()
}
