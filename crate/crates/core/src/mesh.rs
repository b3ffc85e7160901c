//! Structured tetrahedral mesh of the unit cube.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Write};

use crate::scalar::Real;

pub type Point<T> = [T; 3];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeshError {
    #[error("subdivision level must be at least 1")]
    ZeroSubdivision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace<T> {
    /// Counter-clockwise when seen from outside, so the right-hand normal points out.
    pub vertices: [usize; 3],
    pub normal: Point<T>,
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub vertices: Vec<Point<T>>,
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace<T>>,
    pub subdivisions: usize,
}

/// First invariant violated by a mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    NegativeVolume { tet: usize, volume: f64 },
    VolumeSum { total: f64 },
    AreaSum { total: f64 },
    FaceNotOnParent { face: usize },
    InwardNormal { face: usize },
    NotOnCubeFace { face: usize },
    UnpairedInteriorFace { vertices: [usize; 3], count: usize },
    BoundaryFaceMismatch { expected: usize, found: usize },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshViolation::NegativeVolume { tet, volume } => {
                write!(f, "negative volume: tet {tet} has signed volume {volume:e}")
            }
            MeshViolation::VolumeSum { total } => write!(f, "total volume {total} differs from 1"),
            MeshViolation::AreaSum { total } => write!(f, "total boundary area {total} differs from 6"),
            MeshViolation::FaceNotOnParent { face } => {
                write!(f, "boundary face {face} is not a face of its parent tet")
            }
            MeshViolation::InwardNormal { face } => write!(f, "inward normal on boundary face {face}"),
            MeshViolation::NotOnCubeFace { face } => {
                write!(f, "boundary face {face} does not lie on a cube face")
            }
            MeshViolation::UnpairedInteriorFace { vertices, count } => {
                write!(f, "interior face {vertices:?} shared by {count} tets")
            }
            MeshViolation::BoundaryFaceMismatch { expected, found } => {
                write!(f, "{found} boundary faces listed, {expected} found by face counting")
            }
        }
    }
}

pub(crate) fn sub<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot<T: Real>(a: &Point<T>, b: &Point<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Builds the uniform mesh of `(0,1)^3` with `n` subcubes per edge, each split into six tets.
pub fn build_cube_mesh<T: Real>(n: usize) -> Result<Mesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivision);
    }
    let side = n + 1;
    let index = |i: usize, j: usize, k: usize| i + side * (j + side * k);
    let h = T::one() / T::from_usize_lossy(n);

    let mut vertices = Vec::with_capacity(side * side * side);
    for k in 0..side {
        for j in 0..side {
            for i in 0..side {
                vertices.push([
                    T::from_usize_lossy(i) * h,
                    T::from_usize_lossy(j) * h,
                    T::from_usize_lossy(k) * h,
                ]);
            }
        }
    }

    // Paths 000 -> 111 along the axes in every order; even permutations keep
    // the path order positively oriented, odd ones swap the last two vertices.
    const PATHS: [([usize; 3], bool); 6] = [
        ([0, 1, 2], true),
        ([1, 2, 0], true),
        ([2, 0, 1], true),
        ([0, 2, 1], false),
        ([2, 1, 0], false),
        ([1, 0, 2], false),
    ];

    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for (axes, even) in PATHS {
                    let mut corner = [i, j, k];
                    let mut tet = [index(i, j, k), 0, 0, 0];
                    for (slot, axis) in axes.into_iter().enumerate() {
                        corner[axis] += 1;
                        tet[slot + 1] = index(corner[0], corner[1], corner[2]);
                    }
                    if !even {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    let lattice = |v: usize| [v % side, (v / side) % side, v / (side * side)];
    let mut boundary_faces = Vec::new();
    for (t, tet) in tets.iter().enumerate() {
        for skip in 0..4 {
            let face: Vec<usize> = (0..4).filter(|&s| s != skip).map(|s| tet[s]).collect();
            let coords: Vec<[usize; 3]> = face.iter().map(|&v| lattice(v)).collect();
            for axis in 0..3 {
                for (plane, sign) in [(0usize, -1.0), (n, 1.0)] {
                    if coords.iter().all(|c| c[axis] == plane) {
                        let mut normal = [T::zero(); 3];
                        normal[axis] = T::lit(sign);
                        let mut verts = [face[0], face[1], face[2]];
                        let e1 = sub(&vertices[verts[1]], &vertices[verts[0]]);
                        let e2 = sub(&vertices[verts[2]], &vertices[verts[0]]);
                        if dot(&cross(&e1, &e2), &normal) < T::zero() {
                            verts.swap(1, 2);
                        }
                        boundary_faces.push(BoundaryFace {
                            vertices: verts,
                            normal,
                            parent: t,
                        });
                    }
                }
            }
        }
    }

    Ok(Mesh {
        vertices,
        tets,
        boundary_faces,
        subdivisions: n,
    })
}

impl<T: Real> Mesh<T> {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn signed_volume(&self, tet: usize) -> T {
        let [a, b, c, d] = self.tets[tet].map(|v| self.vertices[v]);
        dot(&sub(&b, &a), &cross(&sub(&c, &a), &sub(&d, &a))) / T::lit(6.0)
    }

    pub fn face_area(&self, face: usize) -> T {
        let [a, b, c] = self.boundary_faces[face].vertices.map(|v| self.vertices[v]);
        let n = cross(&sub(&b, &a), &sub(&c, &a));
        dot(&n, &n).sqrt() / T::lit(2.0)
    }

    pub fn tet_centroid(&self, tet: usize) -> Point<T> {
        let mut c = [T::zero(); 3];
        for &v in &self.tets[tet] {
            for (acc, x) in c.iter_mut().zip(self.vertices[v]) {
                *acc = *acc + x;
            }
        }
        c.map(|x| x / T::lit(4.0))
    }

    /// Gradients of the four barycentric coordinate functions on `tet`.
    pub fn barycentric_gradients(&self, tet: usize) -> [Point<T>; 4] {
        let [a, b, c, d] = self.tets[tet].map(|v| self.vertices[v]);
        let (e1, e2, e3) = (sub(&b, &a), sub(&c, &a), sub(&d, &a));
        let det = dot(&e1, &cross(&e2, &e3));
        let g1 = cross(&e2, &e3).map(|x| x / det);
        let g2 = cross(&e3, &e1).map(|x| x / det);
        let g3 = cross(&e1, &e2).map(|x| x / det);
        let g0 = [
            -(g1[0] + g2[0] + g3[0]),
            -(g1[1] + g2[1] + g3[1]),
            -(g1[2] + g2[2] + g3[2]),
        ];
        [g0, g1, g2, g3]
    }

    fn on_cube_boundary(&self, v: usize) -> bool {
        self.vertices[v]
            .iter()
            .any(|&x| x == T::zero() || x == T::one())
    }

    /// Vertices with some coordinate equal to 0 or 1.
    pub fn boundary_vertex_set(&self) -> BTreeSet<usize> {
        (0..self.vertex_count())
            .filter(|&v| self.on_cube_boundary(v))
            .collect()
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.vertex_count()).map(|v| self.on_cube_boundary(v)).collect()
    }

    /// Plain-text dump: `v x y z`, `t i j k l`, `b i j k nx ny nz`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.tets {
            writeln!(out, "t {} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        for b in &self.boundary_faces {
            let [i, j, k] = b.vertices;
            let [x, y, z] = b.normal;
            writeln!(out, "b {i} {j} {k} {x} {y} {z}")?;
        }
        Ok(())
    }
}

fn geometry_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(1e3))
}

/// Checks every mesh invariant and reports the first violation.
pub fn mesh_integrity<T: Real>(mesh: &Mesh<T>) -> Result<(), MeshViolation> {
    let tol = geometry_tolerance::<T>();
    let mut total = T::zero();
    for t in 0..mesh.tets.len() {
        let vol = mesh.signed_volume(t);
        if vol <= T::zero() {
            return Err(MeshViolation::NegativeVolume {
                tet: t,
                volume: vol.as_f64(),
            });
        }
        total = total + vol;
    }
    if (total - T::one()).abs() > tol {
        return Err(MeshViolation::VolumeSum { total: total.as_f64() });
    }

    let mut area = T::zero();
    for (f, face) in mesh.boundary_faces.iter().enumerate() {
        area = area + mesh.face_area(f);
        let parent = &mesh.tets[face.parent];
        if !face.vertices.iter().all(|v| parent.contains(v)) {
            return Err(MeshViolation::FaceNotOnParent { face: f });
        }
        let on_plane = (0..3).any(|axis| {
            let x0 = mesh.vertices[face.vertices[0]][axis];
            (x0 == T::zero() || x0 == T::one())
                && face.vertices.iter().all(|&v| mesh.vertices[v][axis] == x0)
        });
        if !on_plane {
            return Err(MeshViolation::NotOnCubeFace { face: f });
        }
        let outward = sub(&mesh.vertices[face.vertices[0]], &mesh.tet_centroid(face.parent));
        if dot(&outward, &face.normal) <= T::zero() {
            return Err(MeshViolation::InwardNormal { face: f });
        }
    }
    let area_target = T::lit(6.0);
    if (area - area_target).abs() > tol * area_target {
        return Err(MeshViolation::AreaSum { total: area.as_f64() });
    }

    let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
    for tet in &mesh.tets {
        for skip in 0..4 {
            let mut key = [0usize; 3];
            let mut slot = 0;
            for (s, &v) in tet.iter().enumerate() {
                if s != skip {
                    key[slot] = v;
                    slot += 1;
                }
            }
            key.sort_unstable();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let listed: BTreeSet<[usize; 3]> = mesh
        .boundary_faces
        .iter()
        .map(|b| {
            let mut k = b.vertices;
            k.sort_unstable();
            k
        })
        .collect();
    let mut singles = 0;
    let mut keys: Vec<_> = counts.into_iter().collect();
    keys.sort_unstable();
    for (key, count) in keys {
        match count {
            1 => {
                singles += 1;
                if !listed.contains(&key) {
                    return Err(MeshViolation::UnpairedInteriorFace { vertices: key, count });
                }
            }
            2 => {}
            _ => return Err(MeshViolation::UnpairedInteriorFace { vertices: key, count }),
        }
    }
    if singles != mesh.boundary_faces.len() || listed.len() != singles {
        return Err(MeshViolation::BoundaryFaceMismatch {
            expected: singles,
            found: mesh.boundary_faces.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_small_levels() {
        let m1 = build_cube_mesh::<f64>(1).unwrap();
        assert_eq!(
            (m1.vertices.len(), m1.tets.len(), m1.boundary_faces.len()),
            (8, 6, 12)
        );
        let m2 = build_cube_mesh::<f64>(2).unwrap();
        assert_eq!(
            (m2.vertices.len(), m2.tets.len(), m2.boundary_faces.len()),
            (27, 48, 48)
        );
        assert_eq!(build_cube_mesh::<f64>(0), Err(MeshError::ZeroSubdivision));
    }

    #[test]
    fn integrity_passes_for_several_levels() {
        for n in 1..=5 {
            mesh_integrity(&build_cube_mesh::<f64>(n).unwrap()).unwrap();
        }
        mesh_integrity(&build_cube_mesh::<f32>(3).unwrap()).unwrap();
    }

    #[test]
    fn integrity_detects_negative_volume() {
        let mut mesh = build_cube_mesh::<f64>(2).unwrap();
        mesh.tets[5].swap(0, 1);
        let err = mesh_integrity(&mesh).unwrap_err();
        assert!(err.to_string().starts_with("negative volume"), "{err}");
    }

    #[test]
    fn integrity_detects_flipped_normal() {
        let mut mesh = build_cube_mesh::<f64>(2).unwrap();
        mesh.boundary_faces[7].normal = mesh.boundary_faces[7].normal.map(|x| -x);
        let err = mesh_integrity(&mesh).unwrap_err();
        assert!(err.to_string().starts_with("inward normal"), "{err}");
    }

    #[test]
    fn boundary_vertices() {
        let m1 = build_cube_mesh::<f64>(1).unwrap();
        assert_eq!(m1.boundary_vertex_set().len(), 8);
        let m2 = build_cube_mesh::<f64>(2).unwrap();
        let set = m2.boundary_vertex_set();
        assert_eq!(set.len(), 26);
        assert!(!set.contains(&13));
        for n in 1..=4 {
            let mesh = build_cube_mesh::<f64>(n).unwrap();
            let from_faces: BTreeSet<usize> = mesh
                .boundary_faces
                .iter()
                .flat_map(|b| b.vertices)
                .collect();
            assert_eq!(from_faces, mesh.boundary_vertex_set());
        }
    }

    #[test]
    fn refinement_keeps_totals() {
        for n in [1usize, 2, 3] {
            let coarse = build_cube_mesh::<f64>(n).unwrap();
            let fine = build_cube_mesh::<f64>(2 * n).unwrap();
            let vol = |m: &Mesh<f64>| (0..m.tets.len()).map(|t| m.signed_volume(t)).sum::<f64>();
            let area = |m: &Mesh<f64>| {
                (0..m.boundary_faces.len()).map(|f| m.face_area(f)).sum::<f64>()
            };
            assert!((vol(&coarse) - vol(&fine)).abs() < 1e-12);
            assert!((area(&coarse) - area(&fine)).abs() < 1e-12);
        }
    }

    #[test]
    fn barycentric_gradients_sum_to_zero_and_reproduce_coordinates() {
        let mesh = build_cube_mesh::<f64>(2).unwrap();
        for t in 0..mesh.tets.len() {
            let g = mesh.barycentric_gradients(t);
            // grad x = sum_i x_i grad(lambda_i) = e_x
            for axis in 0..3 {
                for comp in 0..3 {
                    let s: f64 = (0..4)
                        .map(|i| mesh.vertices[mesh.tets[t][i]][axis] * g[i][comp])
                        .sum();
                    let expect = if axis == comp { 1.0 } else { 0.0 };
                    assert!((s - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dump_format() {
        let mesh = build_cube_mesh::<f64>(1).unwrap();
        let mut buf = Vec::new();
        mesh.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8 + 6 + 12);
        assert_eq!(lines[0], "v 0 0 0");
        assert!(lines[8].starts_with("t 0 "));
        assert_eq!(lines.iter().filter(|l| l.starts_with("b ")).count(), 12);
        assert_eq!(lines[14].split_whitespace().count(), 7);
    }
}
