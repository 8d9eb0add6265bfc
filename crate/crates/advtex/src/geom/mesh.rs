//! Indexed triangle meshes with per-vertex UVs and normals.

use super::math::Vec3;
use crate::error::{Error, Result};

/// Faces below this area are considered degenerate.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct TriMesh {
    pub positions: Vec<[f64; 3]>,
    /// Per-vertex texture coordinates in [0,1]^2; empty when the mesh
    /// carries no UVs.
    pub uvs: Vec<[f64; 2]>,
    /// Per-vertex unit normals; empty until computed or loaded.
    pub normals: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn has_uvs(&self) -> bool {
        !self.uvs.is_empty()
    }

    pub fn position(&self, v: u32) -> Vec3 {
        Vec3::from_array(self.positions[v as usize])
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.positions.len() as u32;
        if !self.uvs.is_empty() && self.uvs.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!(
                "{} uvs for {} vertices",
                self.uvs.len(),
                self.positions.len()
            )));
        }
        if !self.normals.is_empty() && self.normals.len() != self.positions.len() {
            return Err(Error::InvalidMesh(format!(
                "{} normals for {} vertices",
                self.normals.len(),
                self.positions.len()
            )));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {v} of {nv}"
                    )));
                }
            }
            let area = face_area(self, *f);
            if area <= MIN_FACE_AREA {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} is degenerate (area {area:.3e})"
                )));
            }
        }
        for (i, uv) in self.uvs.iter().enumerate() {
            if !(0.0..=1.0).contains(&uv[0]) || !(0.0..=1.0).contains(&uv[1]) {
                return Err(Error::InvalidMesh(format!(
                    "uv {i} = ({}, {}) outside [0,1]^2",
                    uv[0], uv[1]
                )));
            }
        }
        for (i, n) in self.normals.iter().enumerate() {
            let len = Vec3::from_array(*n).norm();
            if (len - 1.0).abs() > 1e-5 {
                return Err(Error::InvalidMesh(format!("normal {i} has length {len}")));
            }
        }
        Ok(())
    }

    /// 1-ring vertex adjacency (deduplicated, unordered).
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.positions.len()];
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

pub fn face_area(mesh: &TriMesh, f: [u32; 3]) -> f64 {
    let a = mesh.position(f[0]);
    let b = mesh.position(f[1]);
    let c = mesh.position(f[2]);
    (b - a).cross(c - a).norm() * 0.5
}

/// Area-weighted vertex normals. Returns the normals and the indices of
/// isolated vertices (no incident faces), which get a zero normal.
pub fn compute_vertex_normals(mesh: &TriMesh) -> (Vec<[f64; 3]>, Vec<u32>) {
    let mut acc = vec![Vec3::ZERO; mesh.positions.len()];
    for f in &mesh.faces {
        let a = mesh.position(f[0]);
        let b = mesh.position(f[1]);
        let c = mesh.position(f[2]);
        // cross product length is twice the face area, so summing raw cross
        // products area-weights the average
        let n = (b - a).cross(c - a);
        for &v in f {
            acc[v as usize] = acc[v as usize] + n;
        }
    }
    let mut isolated = Vec::new();
    let normals = acc
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if n.norm() == 0.0 {
                isolated.push(i as u32);
                [0.0, 0.0, 0.0]
            } else {
                n.normalized().to_array()
            }
        })
        .collect();
    (normals, isolated)
}

/// Uniform-weight Laplacian smoothing of a per-vertex scalar field: each
/// step replaces a value with the mean of its 1-ring neighbors. Vertices
/// without neighbors keep their value.
pub fn laplacian_smooth_scalars(values: &[f64], mesh: &TriMesh, steps: usize) -> Vec<f64> {
    assert_eq!(values.len(), mesh.positions.len(), "one scalar per vertex");
    laplacian_smooth_with_adjacency(values, &mesh.vertex_neighbors(), steps)
}

/// Smoothing core over an explicit adjacency, shared with tests that build
/// graphs directly.
pub fn laplacian_smooth_with_adjacency(
    values: &[f64],
    adjacency: &[Vec<u32>],
    steps: usize,
) -> Vec<f64> {
    assert_eq!(values.len(), adjacency.len());
    let mut cur = values.to_vec();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..steps {
        for (v, neighbors) in adjacency.iter().enumerate() {
            next[v] = if neighbors.is_empty() {
                cur[v]
            } else {
                neighbors.iter().map(|&n| cur[n as usize]).sum::<f64>() / neighbors.len() as f64
            };
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_mesh() -> TriMesh {
        // unit quad in the z=0 plane, two triangles
        TriMesh {
            positions: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            uvs: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            normals: vec![],
            faces: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    #[test]
    fn quad_normals_are_plane_normal() {
        let (normals, isolated) = compute_vertex_normals(&quad_mesh());
        assert!(isolated.is_empty());
        for n in &normals {
            assert!((n[2].abs() - 1.0).abs() < 1e-12 && n[0].abs() < 1e-12 && n[1].abs() < 1e-12);
        }
    }

    #[test]
    fn octahedron_normals_point_radially() {
        let positions: Vec<[f64; 3]> = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let faces = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let mesh = TriMesh {
            positions: positions.clone(),
            uvs: vec![],
            normals: vec![],
            faces,
        };
        let (normals, isolated) = compute_vertex_normals(&mesh);
        assert!(isolated.is_empty());
        for (p, n) in positions.iter().zip(&normals) {
            let dir = Vec3::from_array(*p).normalized();
            let n = Vec3::from_array(*n);
            assert!(dir.dot(n) > 0.999, "normal {n:?} not radial at {p:?}");
        }
    }

    #[test]
    fn normals_are_unit_length_and_isolated_flagged() {
        let mut mesh = quad_mesh();
        mesh.positions.push([5.0, 5.0, 5.0]); // isolated
        mesh.uvs.push([0.5, 0.5]);
        let (normals, isolated) = compute_vertex_normals(&mesh);
        assert_eq!(isolated, vec![4]);
        for n in &normals[..4] {
            assert!((Vec3::from_array(*n).norm() - 1.0).abs() < 1e-5);
        }
        assert_eq!(normals[4], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn smoothing_fixed_points() {
        let mesh = quad_mesh();
        let constant = vec![0.75; 4]; // exactly representable
        assert_eq!(laplacian_smooth_scalars(&constant, &mesh, 5), constant);
        let values = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(laplacian_smooth_scalars(&values, &mesh, 0), values);
    }

    #[test]
    fn smoothing_on_path_graph_matches_hand_evaluation() {
        // path adjacency: endpoints copy their single neighbor, interior
        // vertices average the two
        let adj: Vec<Vec<u32>> = vec![vec![1], vec![0, 2], vec![1, 3], vec![2, 4], vec![3]];
        let values = [0.0, 0.0, 1.0, 0.0, 0.0];
        let smoothed = laplacian_smooth_with_adjacency(&values, &adj, 1);
        assert_eq!(smoothed, vec![0.0, 0.5, 0.0, 0.5, 0.0]);

        // same rule through the mesh API on a triangle (fully connected)
        let strip = TriMesh {
            positions: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0]],
            uvs: vec![],
            normals: vec![],
            faces: vec![[0, 1, 2]],
        };
        let smoothed = laplacian_smooth_scalars(&[0.0, 3.0, 6.0], &strip, 1);
        assert_eq!(smoothed, vec![4.5, 3.0, 1.5]);
    }

    #[test]
    fn smoothing_stays_within_input_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mesh = quad_mesh();
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for steps in 1..6 {
            for v in laplacian_smooth_scalars(&values, &mesh, steps) {
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn validate_rejects_bad_faces() {
        let mut mesh = quad_mesh();
        mesh.faces.push([0, 1, 9]);
        assert!(mesh.validate().is_err());

        let mut mesh = quad_mesh();
        mesh.faces.push([0, 1, 1]); // zero-area
        assert!(mesh.validate().is_err());
    }
}
