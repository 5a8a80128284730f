//! Linear blendshape head mesh `V(φ) = base + Σₖ φₖ·Bₖ`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// Triangles with area below this are treated as degenerate.
pub const EPS_AREA: f64 = 1e-12;

/// Default bound on ‖φ‖.
pub const DEFAULT_PARAM_CAP: f64 = 10.0;

/// Blendshape coefficients φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeshParams(pub Vec<f64>);

impl MeshParams {
    pub fn zeros(k: usize) -> Self {
        MeshParams(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn validate(&self, cap: f64) -> Result<()> {
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite blendshape coefficient"));
        }
        if self.norm() > cap {
            return Err(Error::invalid(format!(
                "blendshape coefficient norm {} exceeds cap {cap}",
                self.norm()
            )));
        }
        Ok(())
    }

    /// Rescales in place so that ‖φ‖ ≤ cap.
    pub fn clamp_norm(&mut self, cap: f64) {
        let n = self.norm();
        if n > cap {
            let k = cap / n;
            self.0.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn distance(&self, other: &MeshParams) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricMesh {
    pub base_vertices: Vec<Vec3>,
    /// `blendshapes[k][v]` is the displacement of vertex `v` for unit `φₖ`.
    pub blendshapes: Vec<Vec<Vec3>>,
    pub triangles: Vec<[usize; 3]>,
}

impl ParametricMesh {
    pub fn new(base_vertices: Vec<Vec3>, blendshapes: Vec<Vec<Vec3>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = ParametricMesh {
            base_vertices,
            blendshapes,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.base_vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_params(&self) -> usize {
        self.blendshapes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base_vertices.len();
        for (k, shape) in self.blendshapes.iter().enumerate() {
            if shape.len() != n {
                return Err(Error::invalid(format!(
                    "blendshape {k} has {} rows, mesh has {n} vertices",
                    shape.len()
                )));
            }
        }
        for (i, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("triangle {i} indexes past {n} vertices")));
            }
            if triangle_area(&self.base_vertices, tri) <= EPS_AREA {
                return Err(Error::invalid(format!("triangle {i} is degenerate at φ = 0")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, phi: &MeshParams) -> Result<Vec<Vec3>> {
        mesh_eval(self, phi)
    }

    /// Backpropagates per-vertex gradients to the blendshape coefficients.
    pub fn param_gradient(&self, vertex_grads: &[Vec3]) -> Vec<f64> {
        self.blendshapes
            .iter()
            .map(|shape| shape.iter().zip(vertex_grads).map(|(b, g)| b.dot(g)).sum())
            .collect()
    }

    /// The bundled low-poly head: a deformed subdivided icosahedron with 320
    /// faces and eight smooth synthetic blendshapes.
    pub fn bundled_head() -> Self {
        let (sphere, triangles) = icosphere(2);
        let base: Vec<Vec3> = sphere.iter().map(head_shape).collect();
        let blendshapes = (0..8)
            .map(|k| sphere.iter().map(|d| blendshape_field(k, d)).collect())
            .collect();
        ParametricMesh::new(base, blendshapes, triangles).expect("bundled head mesh is valid")
    }
}

pub fn triangle_area(vertices: &[Vec3], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| vertices[i]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

pub fn mesh_eval(mesh: &ParametricMesh, phi: &MeshParams) -> Result<Vec<Vec3>> {
    if phi.len() != mesh.num_params() {
        return Err(Error::invalid(format!(
            "expected {} blendshape coefficients, got {}",
            mesh.num_params(),
            phi.len()
        )));
    }
    let mut out = mesh.base_vertices.clone();
    for (shape, &w) in mesh.blendshapes.iter().zip(&phi.0) {
        if w == 0.0 {
            continue;
        }
        for (v, d) in out.iter_mut().zip(shape) {
            *v += d * w;
        }
    }
    Ok(out)
}

fn head_shape(d: &Vec3) -> Vec3 {
    // Slightly narrow, tall ellipsoid with a nose ridge and a flattened neck.
    let mut p = Vec3::new(0.78 * d.x, 0.95 * d.y, 0.88 * d.z);
    let nose = (-((d.x / 0.18).powi(2) + ((d.y + 0.05) / 0.3).powi(2))).exp();
    if d.z > 0.0 {
        p.z += 0.12 * nose * d.z;
    }
    let chin = (-((d.y + 0.75) / 0.2).powi(2)).exp();
    p.z += 0.05 * chin * d.z.max(0.0);
    p
}

fn blendshape_field(k: usize, d: &Vec3) -> Vec3 {
    let front = d.z.max(0.0);
    let radial = match k {
        0 => d.x * d.x - 0.3,               // widen
        1 => d.y,                           // stretch vertically
        2 => front * (-d.y - 0.3).max(0.0), // jaw drop
        3 => front * (d.y - 0.2).max(0.0),  // brow raise
        4 => d.x * d.y,                     // shear-like asymmetry
        5 => d.z * d.z - 0.3,               // depth
        6 => front * d.x,                   // cheek asymmetry
        _ => (-d.z).max(0.0) * d.y,         // occiput bulge
    };
    d * (0.1 * radial)
}

/// Unit icosphere: `subdivisions` midpoint splits of the icosahedron,
/// faces wound counter-clockwise seen from outside.
pub fn icosphere(subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}
