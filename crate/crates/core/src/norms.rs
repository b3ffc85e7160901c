//! Norms and functionals of P1 functions.
//!
//! Powers `|u|^r` are integrated with the degree-6 rules, so even integer
//! `r <= 6` is exact. Sup norms are nodal maxima, exact for P1 functions.

use serde::Serialize;

use crate::assembly::{BoundaryPoint, FeSpace, FemFunction};
use crate::exponents::ExponentContext;
use crate::nonlinear::Nonlinearity;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormError {
    #[error("integrability exponent {0} is below 1")]
    ExponentBelowOne(f64),
    #[error("interpolation ratio undefined for the zero function")]
    ZeroFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Volume,
    Boundary,
}

pub fn norm_h1<T: Real>(u: &FemFunction<'_, T>) -> T {
    h1_squared(u).max(T::zero()).sqrt()
}

/// The H1 quadratic form `a(u, u)`.
pub fn h1_squared<T: Real>(u: &FemFunction<'_, T>) -> T {
    u.space().h1_operator().quadratic_form(u.values())
}

fn check_exponent<T: Real>(r: T) -> Result<(), NormError> {
    if r >= T::one() {
        Ok(())
    } else {
        Err(NormError::ExponentBelowOne(r.as_f64()))
    }
}

/// `integral over region of |u|^r`.
pub fn power_integral<T: Real>(u: &FemFunction<'_, T>, r: T, region: Region) -> T {
    match region {
        Region::Boundary => u
            .space()
            .boundary_integral(|bp| u.at_boundary_point(bp).abs().powf(r)),
        Region::Volume => {
            let mut acc = T::zero();
            u.space().for_each_volume_point(|tet, bary, _, w| {
                acc = acc + w * u.at_volume_point(tet, bary).abs().powf(r);
            });
            acc
        }
    }
}

pub fn norm_lp<T: Real>(u: &FemFunction<'_, T>, r: T, region: Region) -> Result<T, NormError> {
    check_exponent(r)?;
    Ok(power_integral(u, r, region).powf(r.recip()))
}

/// L^r norm of a boundary field sampled at the boundary quadrature points.
pub fn boundary_field_lp<T: Real>(
    space: &FeSpace<T>,
    g: impl Fn(&BoundaryPoint<T>) -> T,
    r: T,
) -> Result<T, NormError> {
    check_exponent(r)?;
    Ok(space.boundary_integral(|bp| g(bp).abs().powf(r)).powf(r.recip()))
}

pub fn norm_linf<T: Real>(u: &FemFunction<'_, T>, region: Region) -> T {
    let mask = u.space().boundary_mask();
    u.values()
        .iter()
        .zip(mask)
        .filter(|(_, &on_boundary)| region == Region::Volume || on_boundary)
        .fold(T::zero(), |acc, (v, _)| acc.max(v.abs()))
}

/// `(integral |u|^m + integral |grad u|^m)^(1/m)`.
pub fn norm_w1m<T: Real>(u: &FemFunction<'_, T>, m: T) -> Result<T, NormError> {
    check_exponent(m)?;
    let mesh = u.space().mesh();
    let gradient_part: T = (0..mesh.tets.len())
        .map(|t| {
            let g = u.gradient(t);
            let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            mesh.signed_volume(t) * len.powf(m)
        })
        .sum();
    let value_part = power_integral(u, m, Region::Volume);
    Ok((value_part + gradient_part).powf(m.recip()))
}

/// `J[u] = a(u,u)/2 - integral over the boundary of F(x, u)`.
pub fn energy_j<T: Real>(u: &FemFunction<'_, T>, nl: &Nonlinearity<T>) -> T {
    let boundary = u
        .space()
        .boundary_integral(|bp| nl.antiderivative(&bp.x, u.at_boundary_point(bp)));
    h1_squared(u) / T::lit(2.0) - boundary
}

/// `||u||_inf / (||u||_{W^{1,m}}^sigma * ||u||_{L^{2*}}^{1-sigma})`.
pub fn gn_ratio<T: Real>(u: &FemFunction<'_, T>, ctx: &ExponentContext<f64>) -> Result<T, NormError> {
    let sigma = T::lit(ctx.sigma);
    let w1m = norm_w1m(u, T::lit(ctx.m))?;
    let l2s = norm_lp(u, T::lit(ctx.two_star), Region::Volume)?;
    let denom = w1m.powf(sigma) * l2s.powf(T::one() - sigma);
    if !(denom > T::zero()) {
        return Err(NormError::ZeroFunction);
    }
    Ok(norm_linf(u, Region::Volume) / denom)
}

/// The six norms of one function plus the exponent metadata they used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub h1: f64,
    pub linf: f64,
    pub l_two_star_volume: f64,
    pub l_two_low_star_boundary: f64,
    pub w1m: f64,
    pub linf_boundary: f64,
}

pub fn norm_report<T: Real>(u: &FemFunction<'_, T>, ctx: &ExponentContext<f64>) -> NormReport {
    NormReport {
        n: u.space().subdivisions(),
        p: ctx.p,
        q: ctx.q,
        m: ctx.m,
        h1: norm_h1(u).as_f64(),
        linf: norm_linf(u, Region::Volume).as_f64(),
        l_two_star_volume: norm_lp(u, T::lit(ctx.two_star), Region::Volume)
            .expect("2* >= 1")
            .as_f64(),
        l_two_low_star_boundary: norm_lp(u, T::lit(ctx.two_low_star), Region::Boundary)
            .expect("2_* >= 1")
            .as_f64(),
        w1m: norm_w1m(u, T::lit(ctx.m)).expect("m >= 1").as_f64(),
        linf_boundary: norm_linf(u, Region::Boundary).as_f64(),
    }
}
