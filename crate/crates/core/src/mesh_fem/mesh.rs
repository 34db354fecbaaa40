use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Base side length of the slab.
pub const BASE_LENGTH: f64 = 1.0;
/// Slab height; base/height aspect ratio 100.
pub const HEIGHT: f64 = 0.01;

/// Boundary tag of an exterior face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceTag {
    /// The four side faces; homogeneous Dirichlet.
    Dirichlet,
    /// Top face, carries the source and the sensors.
    Neumann,
    /// Bottom face, carries the Robin coefficient `e^m`.
    Robin,
}

/// A rectangular exterior face of one element. `nodes` go around the
/// face as a tensor product: `(0,0), (1,0), (0,1), (1,1)` in the face's
/// two in-plane directions, and `lengths` are the matching side lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub nodes: [usize; 4],
    pub lengths: [f64; 2],
    pub tag: FaceTag,
}

/// Structured hexahedral mesh of `[0, 1]^2 x [0, 0.01]`.
///
/// Nodes are numbered x-fastest: `i + (nx+1) * (j + (ny+1) * k)`. Bottom
/// nodes (`k = 0`) therefore share their index with the bottom-surface
/// numbering `i + (nx+1) * j`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub coords: Vec<[f64; 3]>,
    /// Local node `a = ia + 2 ja + 4 ka`.
    pub elements: Vec<[usize; 8]>,
    pub boundary_faces: Vec<BoundaryFace>,
}

pub fn build_box_mesh(nx: usize, ny: usize, nz: usize) -> Result<Mesh> {
    if nx < 2 || ny < 2 || nz < 1 {
        return Err(invalid(format!(
            "mesh needs nx, ny >= 2 and nz >= 1, got ({nx}, {ny}, {nz})"
        )));
    }
    let (lx, ly, lz) = (BASE_LENGTH, BASE_LENGTH, HEIGHT);
    let (hx, hy, hz) = (lx / nx as f64, ly / ny as f64, lz / nz as f64);
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([i as f64 * hx, j as f64 * hy, k as f64 * hz]);
            }
        }
    }

    let mut elements = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut e = [0; 8];
                for (a, slot) in e.iter_mut().enumerate() {
                    *slot = id(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
                }
                elements.push(e);
            }
        }
    }

    let mut faces = Vec::new();
    for (k, tag) in [(0, FaceTag::Robin), (nz, FaceTag::Neumann)] {
        for j in 0..ny {
            for i in 0..nx {
                faces.push(BoundaryFace {
                    nodes: [id(i, j, k), id(i + 1, j, k), id(i, j + 1, k), id(i + 1, j + 1, k)],
                    lengths: [hx, hy],
                    tag,
                });
            }
        }
    }
    for j in [0, ny] {
        for k in 0..nz {
            for i in 0..nx {
                faces.push(BoundaryFace {
                    nodes: [id(i, j, k), id(i + 1, j, k), id(i, j, k + 1), id(i + 1, j, k + 1)],
                    lengths: [hx, hz],
                    tag: FaceTag::Dirichlet,
                });
            }
        }
    }
    for i in [0, nx] {
        for k in 0..nz {
            for j in 0..ny {
                faces.push(BoundaryFace {
                    nodes: [id(i, j, k), id(i, j + 1, k), id(i, j, k + 1), id(i, j + 1, k + 1)],
                    lengths: [hy, hz],
                    tag: FaceTag::Dirichlet,
                });
            }
        }
    }

    Ok(Mesh {
        nx,
        ny,
        nz,
        lx,
        ly,
        lz,
        coords,
        elements,
        boundary_faces: faces,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Number of nodes on the bottom face.
    pub fn n_bottom(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node_id(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    /// `(i, j, k)` grid position of a node.
    pub fn node_ijk(&self, id: usize) -> (usize, usize, usize) {
        let i = id % (self.nx + 1);
        let rest = id / (self.nx + 1);
        (i, rest % (self.ny + 1), rest / (self.ny + 1))
    }

    pub fn element_size(&self) -> [f64; 3] {
        [
            self.lx / self.nx as f64,
            self.ly / self.ny as f64,
            self.lz / self.nz as f64,
        ]
    }

    fn on_side(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Nodes on the side faces, sorted.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| {
                let (i, j, _) = self.node_ijk(n);
                self.on_side(i, j)
            })
            .collect()
    }

    /// Bottom-surface indices that are not on a side face.
    pub fn free_bottom_nodes(&self) -> Vec<usize> {
        (0..self.n_bottom())
            .filter(|&n| {
                let (i, j, _) = self.node_ijk(n);
                !self.on_side(i, j)
            })
            .collect()
    }

    pub fn top_nodes(&self) -> Vec<usize> {
        let base = self.n_bottom() * self.nz;
        (base..base + self.n_bottom()).collect()
    }

    pub fn faces_with(&self, tag: FaceTag) -> impl Iterator<Item = &BoundaryFace> {
        self.boundary_faces.iter().filter(move |f| f.tag == tag)
    }

    /// Coordinates of bottom-surface node `b`.
    pub fn bottom_coords(&self, b: usize) -> [f64; 3] {
        self.coords[b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_smallest_mesh() {
        let m = build_box_mesh(2, 2, 1).unwrap();
        assert_eq!(m.n_nodes(), 18);
        assert_eq!(m.n_bottom(), 9);
        assert_eq!(m.top_nodes().len(), 9);
        assert_eq!(m.elements.len(), 4);
        // 4 bottom + 4 top + 2*2*2 side faces
        assert_eq!(m.boundary_faces.len(), 16);
    }

    #[test]
    fn reference_scale_counts() {
        let m = build_box_mesh(20, 20, 4).unwrap();
        assert_eq!(m.n_nodes(), 2205);
        assert_eq!(m.n_bottom(), 441);
        assert_eq!(m.free_bottom_nodes().len(), 361);
        assert!((m.coords[m.n_nodes() - 1][2] - HEIGHT).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_counts() {
        assert!(build_box_mesh(1, 2, 1).is_err());
        assert!(build_box_mesh(2, 2, 0).is_err());
    }

    #[test]
    fn every_exterior_face_tagged_once() {
        let m = build_box_mesh(3, 4, 2).unwrap();
        // count element faces not shared by two elements
        let mut counts = std::collections::HashMap::new();
        let local = [
            [0, 1, 2, 3],
            [4, 5, 6, 7],
            [0, 1, 4, 5],
            [2, 3, 6, 7],
            [0, 2, 4, 6],
            [1, 3, 5, 7],
        ];
        for e in &m.elements {
            for f in &local {
                let mut key: Vec<usize> = f.iter().map(|&a| e[a]).collect();
                key.sort_unstable();
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        let exterior: std::collections::HashSet<Vec<usize>> = counts
            .into_iter()
            .filter(|(_, c)| *c == 1)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(exterior.len(), m.boundary_faces.len());
        for f in &m.boundary_faces {
            let mut key = f.nodes.to_vec();
            key.sort_unstable();
            assert!(exterior.contains(&key));
        }
    }
}
