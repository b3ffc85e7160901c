//! Boundary nonlinearities and weak solutions of `-Δu + u = 0`,
//! `∂u/∂η = f(x, u)`.
//!
//! Solutions are computed in three stages: inverse iteration on the
//! constraint manifold `∫_{∂Ω} |w|^{p+1} = 1`, multiplier unscaling, and
//! damped Newton on the discrete weak residual.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{AssemblyError, BoundaryPoint, FeSpace, FemFunction};
use crate::krylov::{minres, SolverError};
use crate::linear_solver::{default_iteration_cap, solve_load, LinearError};
use crate::mesh::Point;
use crate::norms::{h1_squared, power_integral, Region};
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;
use crate::sparse::norm2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NonlinearError {
    #[error("power p = {0} outside the subcritical range (1, 3)")]
    PowerOutOfRange(f64),
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("the ground-state solver needs a pure-power nonlinearity")]
    NotPurePower,
    #[error("constraint iteration stagnated after {iterations} steps (last multipliers {tail:?})")]
    Stagnation { iterations: usize, tail: Vec<f64> },
    #[error("Newton diverged: residual trace {trace:?}")]
    NewtonDivergence { trace: Vec<f64>, last: Vec<f64> },
    #[error("Newton did not reach {tol:e} in {iterations} steps: residual trace {trace:?}")]
    NewtonIterationCap {
        iterations: usize,
        tol: f64,
        trace: Vec<f64>,
    },
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

pub type BoundaryLaw<T> = Arc<dyn Fn(&Point<T>, T) -> T + Send + Sync>;

#[derive(Clone)]
enum Law<T> {
    PurePower {
        scale: T,
    },
    Custom {
        f: BoundaryLaw<T>,
        antiderivative: BoundaryLaw<T>,
        derivative: BoundaryLaw<T>,
    },
}

/// `f(x, s)` together with its antiderivative, derivative, growth data
/// `(p, B0)` and superlinearity data `(θ, s0)`.
#[derive(Clone)]
pub struct Nonlinearity<T> {
    p: T,
    b0: T,
    theta: T,
    s0: T,
    law: Law<T>,
}

impl<T: Real> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.law {
            Law::PurePower { scale } => format!("PurePower(scale={scale})"),
            Law::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("Nonlinearity")
            .field("law", &kind)
            .field("p", &self.p)
            .field("b0", &self.b0)
            .field("theta", &self.theta)
            .field("s0", &self.s0)
            .finish()
    }
}

/// `f(s) = scale |s|^{p-1} s` with `B0 = scale`, `θ = p + 1`, `s0 = 0`.
pub fn make_power_nonlinearity<T: Real>(p: T, scale: T) -> Result<Nonlinearity<T>, NonlinearError> {
    if !(p > T::one() && p < T::lit(3.0)) {
        return Err(NonlinearError::PowerOutOfRange(p.as_f64()));
    }
    if !(scale > T::zero()) {
        return Err(NonlinearError::BadScale(scale.as_f64()));
    }
    Ok(Nonlinearity {
        p,
        b0: scale,
        theta: p + T::one(),
        s0: T::zero(),
        law: Law::PurePower { scale },
    })
}

impl<T: Real> Nonlinearity<T> {
    /// Arbitrary law with declared growth and superlinearity data.
    pub fn custom(
        p: T,
        b0: T,
        theta: T,
        s0: T,
        f: impl Fn(&Point<T>, T) -> T + Send + Sync + 'static,
        antiderivative: impl Fn(&Point<T>, T) -> T + Send + Sync + 'static,
        derivative: impl Fn(&Point<T>, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            p,
            b0,
            theta,
            s0,
            law: Law::Custom {
                f: Arc::new(f),
                antiderivative: Arc::new(antiderivative),
                derivative: Arc::new(derivative),
            },
        }
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn b0(&self) -> T {
        self.b0
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn s0(&self) -> T {
        self.s0
    }

    /// The scale of a pure power, `None` for custom laws.
    pub fn power_scale(&self) -> Option<T> {
        match self.law {
            Law::PurePower { scale } => Some(scale),
            Law::Custom { .. } => None,
        }
    }

    pub fn eval(&self, x: &Point<T>, s: T) -> T {
        match &self.law {
            Law::PurePower { scale } => *scale * s.abs().powf(self.p - T::one()) * s,
            Law::Custom { f, .. } => f(x, s),
        }
    }

    pub fn antiderivative(&self, x: &Point<T>, s: T) -> T {
        match &self.law {
            Law::PurePower { scale } => {
                *scale * s.abs().powf(self.p + T::one()) / (self.p + T::one())
            }
            Law::Custom { antiderivative, .. } => antiderivative(x, s),
        }
    }

    pub fn derivative(&self, x: &Point<T>, s: T) -> T {
        match &self.law {
            Law::PurePower { scale } => *scale * self.p * s.abs().powf(self.p - T::one()),
            Law::Custom { derivative, .. } => derivative(x, s),
        }
    }

    /// `θ F(x, s) - s f(x, s)`. For pure powers both terms share the factor
    /// `scale |s|^{p+1}`, which is pulled out so the identity case is exactly zero.
    pub fn ar_gap(&self, x: &Point<T>, s: T) -> T {
        match &self.law {
            Law::PurePower { scale } => {
                *scale * s.abs().powf(self.p + T::one()) * (self.theta / (self.p + T::one()) - T::one())
            }
            Law::Custom { .. } => self.theta * self.antiderivative(x, s) - s * self.eval(x, s),
        }
    }
}

/// Sample grid `(x, s)` for pointwise certification.
#[derive(Debug, Clone)]
pub struct CheckGrid<T> {
    pub s_values: Vec<T>,
    pub points: Vec<Point<T>>,
}

impl<T: Real> CheckGrid<T> {
    /// `count` equispaced values on `[-s_max, s_max]` at a few boundary points.
    pub fn symmetric(s_max: T, count: usize) -> Self {
        let count = count.max(2);
        let step = T::lit(2.0) * s_max / T::from_usize_lossy(count - 1);
        let s_values = (0..count)
            .map(|i| -s_max + step * T::from_usize_lossy(i))
            .collect();
        let h = T::lit(0.5);
        let (z, o) = (T::zero(), T::one());
        let points = vec![[h, h, z], [h, h, o], [z, h, h], [o, h, h], [h, z, h], [o, o, o]];
        Self { s_values, points }
    }

    fn iter(&self) -> impl Iterator<Item = (&Point<T>, T)> + '_ {
        self.points
            .iter()
            .flat_map(move |x| self.s_values.iter().map(move |&s| (x, s)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointViolation {
    pub x: [f64; 3],
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// `|f(x,s)| <= B0 (1 + |s|^p)` on the grid.
pub fn growth_check<T: Real>(nl: &Nonlinearity<T>, grid: &CheckGrid<T>) -> Result<(), PointViolation> {
    for (x, s) in grid.iter() {
        let lhs = nl.eval(x, s).abs();
        let rhs = nl.b0 * (T::one() + s.abs().powf(nl.p));
        if !(lhs <= rhs) {
            return Err(PointViolation {
                x: x.map(|c| c.as_f64()),
                s: s.as_f64(),
                lhs: lhs.as_f64(),
                rhs: rhs.as_f64(),
            });
        }
    }
    Ok(())
}

/// `θ F(x,s) <= s f(x,s)` for `|s| > s0` on the grid.
pub fn ar_check<T: Real>(nl: &Nonlinearity<T>, grid: &CheckGrid<T>) -> Result<(), PointViolation> {
    for (x, s) in grid.iter() {
        if s.abs() <= nl.s0 {
            continue;
        }
        let gap = nl.ar_gap(x, s);
        if gap > T::zero() {
            return Err(PointViolation {
                x: x.map(|c| c.as_f64()),
                s: s.as_f64(),
                lhs: (nl.theta * nl.antiderivative(x, s)).as_f64(),
                rhs: (s * nl.eval(x, s)).as_f64(),
            });
        }
    }
    Ok(())
}

/// `F(x,t) = ∫_0^t f(x,s) ds` on the grid, with the integral by composite
/// Gauss-Legendre quadrature and relative tolerance `tol`.
pub fn antiderivative_check<T: Real>(
    nl: &Nonlinearity<T>,
    grid: &CheckGrid<T>,
    tol: f64,
) -> Result<(), PointViolation> {
    let gl = gauss_legendre(8);
    let panels = 64;
    for (x, t) in grid.iter() {
        let t64 = t.as_f64();
        let width = t64 / panels as f64;
        let mut integral = 0.0;
        for k in 0..panels {
            let a = k as f64 * width;
            for &(node, w) in &gl {
                let s = T::lit(a + node * width);
                integral += w * width * nl.eval(x, s).as_f64();
            }
        }
        let stated = nl.antiderivative(x, t).as_f64();
        if (stated - integral).abs() > tol * (1.0 + integral.abs()) {
            return Err(PointViolation {
                x: x.map(|c| c.as_f64()),
                s: t64,
                lhs: stated,
                rhs: integral,
            });
        }
    }
    Ok(())
}

/// `A u - l(g(·, u))` for an arbitrary boundary law `g(bp, u(bp))`.
pub fn residual_vector_with<T: Real>(
    u: &FemFunction<'_, T>,
    g: impl Fn(&BoundaryPoint<T>, T) -> T,
) -> Result<Vec<T>, AssemblyError> {
    let space = u.space();
    let au = space.h1_operator().apply(u.values());
    let load = space.boundary_load(|bp| g(bp, u.at_boundary_point(bp)))?;
    Ok(au.iter().zip(&load).map(|(&a, &l)| a - l).collect())
}

pub fn residual_vector<T: Real>(
    u: &FemFunction<'_, T>,
    nl: &Nonlinearity<T>,
) -> Result<Vec<T>, AssemblyError> {
    residual_vector_with(u, |bp, s| nl.eval(&bp.x, s))
}

/// `||A u - l(g(u))|| / (1 + ||A u||)`.
pub fn weak_residual_with<T: Real>(
    u: &FemFunction<'_, T>,
    g: impl Fn(&BoundaryPoint<T>, T) -> T,
) -> Result<T, AssemblyError> {
    let r = residual_vector_with(u, g)?;
    let au = u.space().h1_operator().apply(u.values());
    Ok(norm2(&r) / (T::one() + norm2(&au)))
}

/// Relative discrete residual of the weak formulation.
pub fn weak_residual<T: Real>(u: &FemFunction<'_, T>, nl: &Nonlinearity<T>) -> T {
    // pure powers and every law this crate builds are finite on finite input
    weak_residual_with(u, |bp, s| nl.eval(&bp.x, s)).unwrap_or(T::infinity())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Target weak residual.
    pub tol: f64,
    pub seed: u64,
    /// Relative change of the multiplier that ends the constraint iteration.
    pub multiplier_tol: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Relative tolerance of every inner linear solve.
    pub linear_tol: f64,
}

impl SolverConfig {
    pub fn new(tol: f64, seed: u64) -> Self {
        Self {
            tol,
            seed,
            multiplier_tol: 1e-8,
            max_outer: 5000,
            max_newton: 40,
            max_halvings: 30,
            linear_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<'s, T> {
    pub solution: FemFunction<'s, T>,
    /// Multiplier of the constraint iteration (zero when not run).
    pub multiplier: T,
    pub weak_residual: T,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub positive: bool,
    /// Weak residual before each Newton step and after the last.
    pub newton_trace: Vec<f64>,
}

fn constraint_normalize<T: Real>(w: FemFunction<'_, T>, p: T) -> FemFunction<'_, T> {
    let mass = power_integral(&w, p + T::one(), Region::Boundary);
    let c = mass.powf(-(p + T::one()).recip());
    w.scaled(c)
}

/// Positive ground state of the pure-power problem.
pub fn solve_ground_state<'s, T: Real>(
    space: &'s FeSpace<T>,
    nl: &Nonlinearity<T>,
    config: &SolverConfig,
) -> Result<SolveOutcome<'s, T>, NonlinearError> {
    let scale = nl.power_scale().ok_or(NonlinearError::NotPurePower)?;
    let p = nl.p();
    let linear_tol = T::lit(config.linear_tol);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start: Vec<T> = (0..space.dimension())
        .map(|_| T::lit(rng.gen_range(0.5..1.5)))
        .collect();
    let start = space.function(start)?;
    let smooth_load = space.boundary_load(|bp| start.at_boundary_point(bp))?;
    let smoothed = solve_load(space, &smooth_load, linear_tol, None)?.solution;
    let mut w = constraint_normalize(smoothed, p);
    let mut lambda = h1_squared(&w);

    let mut history: Vec<f64> = vec![lambda.as_f64()];
    let mut outer = 0;
    loop {
        if outer >= config.max_outer {
            let tail = history.iter().rev().take(5).rev().cloned().collect();
            return Err(NonlinearError::Stagnation {
                iterations: outer,
                tail,
            });
        }
        outer += 1;
        let load = space.boundary_load(|bp| {
            let s = w.at_boundary_point(bp);
            s.abs().powf(p - T::one()) * s
        })?;
        let guess: Vec<T> = w.values().iter().map(|&v| v / lambda).collect();
        let v = solve_load(space, &load, linear_tol, Some(&guess))?.solution;
        w = constraint_normalize(v, p);
        let next = h1_squared(&w);
        history.push(next.as_f64());
        let change = (next - lambda).abs();
        lambda = next;
        if change <= T::lit(config.multiplier_tol) * lambda {
            break;
        }
    }

    let unscaled = w.scaled((lambda / scale).powf((p - T::one()).recip()));
    let mut outcome = newton_refine(unscaled, nl, config)?;
    outcome.multiplier = lambda;
    outcome.outer_iterations = outer;
    Ok(outcome)
}

/// Damped Newton on the discrete weak residual, halving the step until the
/// residual decreases.
pub fn newton_refine<'s, T: Real>(
    u0: FemFunction<'s, T>,
    nl: &Nonlinearity<T>,
    config: &SolverConfig,
) -> Result<SolveOutcome<'s, T>, NonlinearError> {
    let space = u0.space();
    let a = space.h1_operator();
    let diag = a.diagonal();
    let tol = T::lit(config.tol);
    let mut u = u0;
    let mut res = weak_residual(&u, nl);
    let mut trace = vec![res.as_f64()];
    let mut steps = 0;

    while !(res <= tol) {
        if steps >= config.max_newton {
            return Err(NonlinearError::NewtonIterationCap {
                iterations: steps,
                tol: config.tol,
                trace,
            });
        }
        steps += 1;
        let r = residual_vector(&u, nl)?;
        let boundary = space.boundary_jacobian(|bp| nl.derivative(&bp.x, u.at_boundary_point(bp)))?;
        let jacobian = a.combine(T::one(), &boundary, -T::one());
        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let (delta, _) = minres(
            &jacobian,
            &rhs,
            &diag,
            T::lit(config.linear_tol),
            default_iteration_cap(space.dimension()),
        )?;
        let delta = space.function(delta)?;

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial = u.combine(T::one(), &delta, step);
            let trial_res = weak_residual(&trial, nl);
            if trial_res < res {
                accepted = Some((trial, trial_res));
                break;
            }
            step = step / T::lit(2.0);
        }
        match accepted {
            Some((next, next_res)) => {
                u = next;
                res = next_res;
                trace.push(res.as_f64());
            }
            None => {
                return Err(NonlinearError::NewtonDivergence {
                    trace,
                    last: u.values().iter().map(|v| v.as_f64()).collect(),
                })
            }
        }
    }

    let positive = u.values().iter().all(|&v| v > T::zero());
    Ok(SolveOutcome {
        solution: u,
        multiplier: T::zero(),
        weak_residual: res,
        outer_iterations: 0,
        newton_iterations: steps,
        positive,
        newton_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_solver::solve_neumann;
    use crate::mesh::build_cube_mesh;

    fn space(n: usize) -> FeSpace<f64> {
        FeSpace::new(build_cube_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn power_law_values() {
        let nl = make_power_nonlinearity(2.0, 1.0).unwrap();
        let x = [0.0; 3];
        assert_eq!(nl.eval(&x, -3.0), -9.0);
        assert_eq!(nl.theta() * nl.antiderivative(&x, 2.0), 8.0);
        assert_eq!(nl.ar_gap(&x, 1.7), 0.0);
        let nl = make_power_nonlinearity(1.5, 1.0).unwrap();
        assert!((nl.antiderivative(&x, 2.0) - 2f64.powf(2.5) / 2.5).abs() < 1e-14);
        assert!((nl.antiderivative(&x, 2.0) - 2.2627).abs() < 1e-4);
        assert!(make_power_nonlinearity(3.0, 1.0).is_err());
        assert!(make_power_nonlinearity(1.0, 1.0).is_err());
        assert!(make_power_nonlinearity(2.0, 0.0).is_err());
    }

    #[test]
    fn pure_power_passes_all_checks() {
        let grid = CheckGrid::symmetric(100.0, 401);
        for p in [1.25, 2.0, 2.75] {
            let nl = make_power_nonlinearity(p, 1.0).unwrap();
            growth_check(&nl, &grid).unwrap();
            ar_check(&nl, &grid).unwrap();
        }
        let small = CheckGrid::symmetric(10.0, 41);
        antiderivative_check(&make_power_nonlinearity(1.5, 2.0).unwrap(), &small, 1e-6).unwrap();
    }

    #[test]
    fn shifted_square_fails_growth_at_zero() {
        let nl = Nonlinearity::custom(
            2.0,
            1.0,
            3.0,
            0.0,
            |_, s: f64| s * s + 10.0,
            |_, s: f64| s * s * s / 3.0 + 10.0 * s,
            |_, s: f64| 2.0 * s,
        );
        let grid = CheckGrid::symmetric(10.0, 21);
        let v = growth_check(&nl, &grid).unwrap_err();
        assert!(v.lhs > v.rhs);
        // the grid point s = 0 must violate
        let at_zero = CheckGrid {
            s_values: vec![0.0],
            points: vec![[0.5, 0.5, 0.0]],
        };
        let v = growth_check(&nl, &at_zero).unwrap_err();
        assert_eq!((v.s, v.lhs, v.rhs), (0.0, 10.0, 1.0));
    }

    #[test]
    fn log_growth_beats_declared_power() {
        let nl = Nonlinearity::custom(
            1.01,
            1.0,
            2.0,
            0.0,
            |_, s: f64| s * (1.0 + s.abs()).ln(),
            |_, s: f64| {
                let a = s.abs();
                0.5 * ((a * a - 1.0) * (1.0 + a).ln() - 0.5 * a * a + a)
            },
            |_, s: f64| (1.0 + s.abs()).ln() + s.abs() / (1.0 + s.abs()),
        );
        assert!(growth_check(&nl, &CheckGrid::symmetric(1.0, 101)).is_ok());
        let scan = CheckGrid {
            s_values: (0..=1000).map(|i| i as f64 * 0.1).collect(),
            points: vec![[0.5, 0.5, 0.0]],
        };
        let v = growth_check(&nl, &scan).unwrap_err();
        // s ln(1+s) first exceeds 1 + s^1.01 between 2.8 and 3.0
        assert!(v.s > 2.7 && v.s < 3.0, "first violation at {}", v.s);
        antiderivative_check(&nl, &CheckGrid::symmetric(20.0, 41), 1e-6).unwrap();
    }

    #[test]
    fn residual_examples() {
        let s = space(3);
        let nl = make_power_nonlinearity(2.0, 1.0).unwrap();
        assert_eq!(weak_residual(&s.zeros(), &nl), 0.0);
        assert!(weak_residual(&s.constant(1.0), &nl) > 0.1);
        let v = solve_neumann(&s, |bp| bp.x[0] + 1.0, 1e-12).unwrap().solution;
        let r = weak_residual_with(&v, |bp, _| bp.x[0] + 1.0).unwrap();
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn newton_from_zero_is_immediate() {
        let s = space(2);
        let nl = make_power_nonlinearity(2.0, 1.0).unwrap();
        let out = newton_refine(s.zeros(), &nl, &SolverConfig::new(1e-8, 0)).unwrap();
        assert_eq!(out.newton_iterations, 0);
        assert!(!out.positive);
    }

    #[test]
    fn ground_state_small_mesh() {
        let s = space(4);
        let nl = make_power_nonlinearity(2.0, 1.0).unwrap();
        let cfg = SolverConfig::new(1e-8, 1);
        let out = solve_ground_state(&s, &nl, &cfg).unwrap();
        assert!(out.weak_residual <= 1e-8);
        assert!(out.positive);
        assert!(out.multiplier > 0.0);
        let lhs = h1_squared(&out.solution);
        let rhs = power_integral(&out.solution, 3.0, Region::Boundary);
        assert!((lhs - rhs).abs() <= 1e-6 * lhs);
        // odd nonlinearity: the negative is a solution too
        let neg = out.solution.scaled(-1.0);
        assert!((weak_residual(&neg, &nl) - out.weak_residual).abs() < 1e-15);
        // restarting Newton at a solution needs no steps
        let again = newton_refine(out.solution.clone(), &nl, &cfg).unwrap();
        assert_eq!(again.newton_iterations, 0);
    }

    #[test]
    fn ground_state_rejects_custom_law() {
        let s = space(1);
        let nl = Nonlinearity::custom(2.0, 1.0, 3.0, 0.0, |_, s| s, |_, s| s * s / 2.0, |_, _| 1.0);
        assert!(matches!(
            solve_ground_state(&s, &nl, &SolverConfig::new(1e-8, 0)),
            Err(NonlinearError::NotPurePower)
        ));
    }
}
