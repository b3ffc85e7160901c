//! P1 finite-element assembly of the H1 form and of boundary integrals.

use crate::mesh::{Mesh, Point};
use crate::quadrature::{tet_rule, triangle_rule, Rule};
use crate::scalar::Real;
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("degenerate tetrahedron {tet} (volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },
    #[error("non-finite boundary value on face {face} at {x:?}")]
    NonFiniteBoundaryValue { face: usize, x: [f64; 3] },
    #[error("nodal vector has length {found}, mesh has {expected} vertices")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite nodal value at vertex {0}")]
    NonFiniteNodalValue(usize),
}

/// A boundary quadrature point with everything a boundary field may need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint<T> {
    pub x: Point<T>,
    pub normal: Point<T>,
    pub face: usize,
    pub vertices: [usize; 3],
    pub bary: [T; 3],
    /// Quadrature weight times face area.
    pub weight: T,
}

pub fn boundary_points<T: Real>(mesh: &Mesh<T>) -> Vec<BoundaryPoint<T>> {
    let rule: Rule<T, 3> = triangle_rule();
    let mut out = Vec::with_capacity(mesh.boundary_faces.len() * rule.weights.len());
    for (f, face) in mesh.boundary_faces.iter().enumerate() {
        let area = mesh.face_area(f);
        let corners = face.vertices.map(|v| mesh.vertices[v]);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = [T::zero(); 3];
            for (b, c) in bary.iter().zip(&corners) {
                for d in 0..3 {
                    x[d] = x[d] + *b * c[d];
                }
            }
            out.push(BoundaryPoint {
                x,
                normal: face.normal,
                face: f,
                vertices: face.vertices,
                bary: *bary,
                weight: w * area,
            });
        }
    }
    out
}

/// Stiffness plus consistent mass for P1 elements.
pub fn assemble_h1_operator<T: Real>(mesh: &Mesh<T>) -> Result<SparseOperator<T>, AssemblyError> {
    let mut triplets = Vec::with_capacity(16 * mesh.tets.len());
    let twenty = T::lit(20.0);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let volume = mesh.signed_volume(t);
        if !(volume > T::zero()) {
            return Err(AssemblyError::DegenerateTet {
                tet: t,
                volume: volume.as_f64(),
            });
        }
        let grads = mesh.barycentric_gradients(t);
        for a in 0..4 {
            for b in 0..4 {
                let stiff = volume
                    * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1] + grads[a][2] * grads[b][2]);
                let mass = if a == b {
                    volume * T::lit(2.0) / twenty
                } else {
                    volume / twenty
                };
                triplets.push((tet[a], tet[b], stiff + mass));
            }
        }
    }
    Ok(SparseOperator::from_triplets(mesh.vertex_count(), triplets))
}

fn load_from_points<T: Real>(
    dimension: usize,
    points: &[BoundaryPoint<T>],
    g: impl Fn(&BoundaryPoint<T>) -> T,
) -> Result<Vec<T>, AssemblyError> {
    let mut load = vec![T::zero(); dimension];
    for bp in points {
        let value = g(bp);
        if !value.is_finite() {
            return Err(AssemblyError::NonFiniteBoundaryValue {
                face: bp.face,
                x: bp.x.map(|c| c.as_f64()),
            });
        }
        for (v, b) in bp.vertices.iter().zip(&bp.bary) {
            load[*v] = load[*v] + bp.weight * value * *b;
        }
    }
    Ok(load)
}

fn jacobian_from_points<T: Real>(
    dimension: usize,
    points: &[BoundaryPoint<T>],
    w: impl Fn(&BoundaryPoint<T>) -> T,
) -> Result<SparseOperator<T>, AssemblyError> {
    let mut triplets = Vec::with_capacity(9 * points.len());
    for bp in points {
        let value = w(bp);
        if !value.is_finite() {
            return Err(AssemblyError::NonFiniteBoundaryValue {
                face: bp.face,
                x: bp.x.map(|c| c.as_f64()),
            });
        }
        let scaled = bp.weight * value;
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((bp.vertices[a], bp.vertices[b], scaled * (bp.bary[a] * bp.bary[b])));
            }
        }
    }
    Ok(SparseOperator::from_triplets(dimension, triplets))
}

/// `l_i = integral over the boundary of g * psi_i`.
pub fn assemble_boundary_load<T: Real>(
    mesh: &Mesh<T>,
    g: impl Fn(&BoundaryPoint<T>) -> T,
) -> Result<Vec<T>, AssemblyError> {
    load_from_points(mesh.vertex_count(), &boundary_points(mesh), g)
}

/// Entries `integral over the boundary of w * psi_i * psi_j`.
pub fn assemble_boundary_jacobian<T: Real>(
    mesh: &Mesh<T>,
    w: impl Fn(&BoundaryPoint<T>) -> T,
) -> Result<SparseOperator<T>, AssemblyError> {
    jacobian_from_points(mesh.vertex_count(), &boundary_points(mesh), w)
}

/// Mesh together with its H1 operator and cached quadrature data.
#[derive(Debug, Clone)]
pub struct FeSpace<T> {
    mesh: Mesh<T>,
    h1: SparseOperator<T>,
    boundary: Vec<BoundaryPoint<T>>,
    boundary_mask: Vec<bool>,
    tet_rule: Rule<T, 4>,
}

impl<T: Real> FeSpace<T> {
    pub fn new(mesh: Mesh<T>) -> Result<Self, AssemblyError> {
        let h1 = assemble_h1_operator(&mesh)?;
        let boundary = boundary_points(&mesh);
        let boundary_mask = mesh.boundary_mask();
        Ok(Self {
            mesh,
            h1,
            boundary,
            boundary_mask,
            tet_rule: tet_rule(),
        })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn h1_operator(&self) -> &SparseOperator<T> {
        &self.h1
    }

    pub fn boundary_points(&self) -> &[BoundaryPoint<T>] {
        &self.boundary
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn dimension(&self) -> usize {
        self.mesh.vertex_count()
    }

    pub fn subdivisions(&self) -> usize {
        self.mesh.subdivisions
    }

    pub fn boundary_load(&self, g: impl Fn(&BoundaryPoint<T>) -> T) -> Result<Vec<T>, AssemblyError> {
        load_from_points(self.dimension(), &self.boundary, g)
    }

    pub fn boundary_jacobian(
        &self,
        w: impl Fn(&BoundaryPoint<T>) -> T,
    ) -> Result<SparseOperator<T>, AssemblyError> {
        jacobian_from_points(self.dimension(), &self.boundary, w)
    }

    /// Sum over boundary quadrature points of `weight * g`.
    pub fn boundary_integral(&self, g: impl Fn(&BoundaryPoint<T>) -> T) -> T {
        self.boundary.iter().map(|bp| bp.weight * g(bp)).sum()
    }

    /// Visits every volume quadrature point as `(tet, barycentric, x, weight)`.
    pub fn for_each_volume_point(&self, mut visit: impl FnMut(usize, &[T; 4], &Point<T>, T)) {
        for t in 0..self.mesh.tets.len() {
            let volume = self.mesh.signed_volume(t);
            let corners = self.mesh.tets[t].map(|v| self.mesh.vertices[v]);
            for (bary, &w) in self.tet_rule.points.iter().zip(&self.tet_rule.weights) {
                let mut x = [T::zero(); 3];
                for (b, c) in bary.iter().zip(&corners) {
                    for d in 0..3 {
                        x[d] = x[d] + *b * c[d];
                    }
                }
                visit(t, bary, &x, w * volume);
            }
        }
    }

    pub fn zeros(&self) -> FemFunction<'_, T> {
        FemFunction {
            space: self,
            values: vec![T::zero(); self.dimension()],
        }
    }

    pub fn constant(&self, c: T) -> FemFunction<'_, T> {
        FemFunction {
            space: self,
            values: vec![c; self.dimension()],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(&Point<T>) -> T) -> FemFunction<'_, T> {
        FemFunction {
            space: self,
            values: self.mesh.vertices.iter().map(f).collect(),
        }
    }

    pub fn function(&self, values: Vec<T>) -> Result<FemFunction<'_, T>, AssemblyError> {
        FemFunction::new(self, values)
    }
}

/// Nodal coefficients of a P1 function on a fixed space.
#[derive(Debug, Clone)]
pub struct FemFunction<'s, T> {
    space: &'s FeSpace<T>,
    values: Vec<T>,
}

impl<'s, T: Real> FemFunction<'s, T> {
    pub fn new(space: &'s FeSpace<T>, values: Vec<T>) -> Result<Self, AssemblyError> {
        if values.len() != space.dimension() {
            return Err(AssemblyError::LengthMismatch {
                expected: space.dimension(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AssemblyError::NonFiniteNodalValue(i));
        }
        Ok(Self { space, values })
    }

    pub fn space(&self) -> &'s FeSpace<T> {
        self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at_boundary_point(&self, bp: &BoundaryPoint<T>) -> T {
        bp.vertices
            .iter()
            .zip(&bp.bary)
            .map(|(&v, &b)| b * self.values[v])
            .sum()
    }

    pub fn at_volume_point(&self, tet: usize, bary: &[T; 4]) -> T {
        self.space.mesh.tets[tet]
            .iter()
            .zip(bary)
            .map(|(&v, &b)| b * self.values[v])
            .sum()
    }

    pub fn gradient(&self, tet: usize) -> Point<T> {
        let grads = self.space.mesh.barycentric_gradients(tet);
        let mut g = [T::zero(); 3];
        for (a, &v) in self.space.mesh.tets[tet].iter().enumerate() {
            for d in 0..3 {
                g[d] = g[d] + self.values[v] * grads[a][d];
            }
        }
        g
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            space: self.space,
            values: self.values.iter().map(|&v| alpha * v).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        Self {
            space: self.space,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;
    use crate::sparse::dot;

    fn space(n: usize) -> FeSpace<f64> {
        FeSpace::new(build_cube_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn h1_form_on_constants_and_linears() {
        for n in [1, 2, 4] {
            let s = space(n);
            let one = s.constant(1.0);
            assert!((s.h1_operator().quadratic_form(one.values()) - 1.0).abs() < 1e-13);
            let x = s.interpolate(|p| p[0]);
            let q = s.h1_operator().quadratic_form(x.values());
            assert!((q - 4.0 / 3.0).abs() < 1e-12, "n={n}: {q}");
        }
    }

    #[test]
    fn mass_row_sums_total_volume() {
        let mesh = build_cube_mesh::<f64>(3).unwrap();
        let total: f64 = (0..mesh.tets.len())
            .map(|t| {
                let v = mesh.signed_volume(t);
                // 4 diagonal entries 2V/20 plus 12 off-diagonal V/20
                4.0 * 2.0 * v / 20.0 + 12.0 * v / 20.0
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn operator_is_symmetric_and_positive() {
        let s = space(3);
        let op = s.h1_operator();
        assert!(op.is_symmetric());
        let mut seed = 12345u64;
        for _ in 0..10 {
            let v: Vec<f64> = (0..op.dimension())
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            assert!(op.quadratic_form(&v) > 0.0);
        }
    }

    #[test]
    fn degenerate_tet_aborts() {
        let mut mesh = build_cube_mesh::<f64>(1).unwrap();
        mesh.tets[0][1] = mesh.tets[0][0];
        assert!(matches!(
            assemble_h1_operator(&mesh),
            Err(AssemblyError::DegenerateTet { tet: 0, .. })
        ));
    }

    #[test]
    fn boundary_load_examples() {
        let mesh = build_cube_mesh::<f64>(3).unwrap();
        let ones = assemble_boundary_load(&mesh, |_| 1.0).unwrap();
        assert!((ones.iter().sum::<f64>() - 6.0).abs() < 1e-12);
        let xs = assemble_boundary_load(&mesh, |bp| bp.x[0]).unwrap();
        assert!((xs.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        let zeros = assemble_boundary_load(&mesh, |_| 0.0).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
        assert!(matches!(
            assemble_boundary_load(&mesh, |_| f64::NAN),
            Err(AssemblyError::NonFiniteBoundaryValue { .. })
        ));
    }

    #[test]
    fn boundary_jacobian_examples() {
        let mesh = build_cube_mesh::<f64>(2).unwrap();
        let jac = assemble_boundary_jacobian(&mesh, |_| 1.0).unwrap();
        assert!((jac.entry_sum() - 6.0).abs() < 1e-12);
        assert!(jac.is_symmetric());
        let one = vec![1.0; mesh.vertex_count()];
        assert!((jac.quadratic_form(&one) - 6.0).abs() < 1e-12);
        assert!(assemble_boundary_jacobian(&mesh, |_| 0.0).unwrap().is_zero());
        // interior vertex 13 has an empty row
        assert_eq!(jac.row(13).count(), 0);
    }

    #[test]
    fn load_consistent_with_boundary_quadrature() {
        let s = space(3);
        let u = s.interpolate(|p| (p[0] - 0.3) * p[1] + p[2] * p[2]);
        let g = |bp: &BoundaryPoint<f64>| (bp.x[0] * 3.0).sin() + bp.x[2];
        let load = s.boundary_load(g).unwrap();
        let direct = s.boundary_integral(|bp| g(bp) * u.at_boundary_point(bp));
        assert!((dot(u.values(), &load) - direct).abs() < 1e-12);
    }

    #[test]
    fn function_constructor_validates() {
        let s = space(1);
        assert!(matches!(
            s.function(vec![0.0; 3]),
            Err(AssemblyError::LengthMismatch { expected: 8, found: 3 })
        ));
        let mut v = vec![0.0; 8];
        v[4] = f64::INFINITY;
        assert_eq!(s.function(v).unwrap_err(), AssemblyError::NonFiniteNodalValue(4));
    }
}
