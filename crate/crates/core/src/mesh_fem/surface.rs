//! The bottom face as a two-dimensional bilinear mesh. The inversion field
//! `m` and its prior live here.

use super::element::QuadRule;
use super::mesh::Mesh;
use crate::numkit::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone)]
pub struct BottomSurface {
    nx: usize,
    ny: usize,
    h: [f64; 2],
    rule: QuadRule,
    elements: Vec<[usize; 4]>,
}

impl BottomSurface {
    pub fn new(mesh: &Mesh) -> Self {
        let (nx, ny) = (mesh.nx, mesh.ny);
        let h = [mesh.lx / nx as f64, mesh.ly / ny as f64];
        let id = |i: usize, j: usize| i + (nx + 1) * j;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)]);
            }
        }
        Self {
            nx,
            ny,
            h,
            rule: QuadRule::new(h),
            elements,
        }
    }

    pub fn n(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Nodes on the perimeter of the face.
    pub fn perimeter_nodes(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&b| {
                let (i, j) = (b % (self.nx + 1), b / (self.nx + 1));
                i == 0 || j == 0 || i == self.nx || j == self.ny
            })
            .collect()
    }

    fn assemble(&self, tag: &str, local: impl Fn(&[usize; 4]) -> [[f64; 4]; 4]) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.n());
        for e in &self.elements {
            let ke = local(e);
            for a in 0..4 {
                for c in 0..4 {
                    b.push(e[a], e[c], ke[a][c]);
                }
            }
        }
        b.build(tag)
    }

    /// `int psi_i psi_j`
    pub fn mass(&self) -> CsrMatrix {
        let r = &self.rule;
        self.assemble("mass_bottom", |_| {
            let mut ke = [[0.0; 4]; 4];
            for q in 0..4 {
                for a in 0..4 {
                    for c in 0..4 {
                        ke[a][c] += r.wdet * r.n[q][a] * r.n[q][c];
                    }
                }
            }
            ke
        })
    }

    /// `int diag(theta) grad psi_i . grad psi_j`
    pub fn stiffness(&self, theta: [f64; 2]) -> CsrMatrix {
        let r = &self.rule;
        self.assemble("stiffness_bottom", |_| {
            let mut ke = [[0.0; 4]; 4];
            for q in 0..4 {
                for a in 0..4 {
                    for c in 0..4 {
                        let g = theta[0] * r.dn[q][a][0] * r.dn[q][c][0]
                            + theta[1] * r.dn[q][a][1] * r.dn[q][c][1];
                        ke[a][c] += r.wdet * g;
                    }
                }
            }
            ke
        })
    }

    /// One-dimensional mass matrix of the face perimeter.
    pub fn perimeter_mass(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.n());
        let id = |i: usize, j: usize| i + (self.nx + 1) * j;
        let mut edge = |p: usize, q: usize, len: f64| {
            b.push(p, p, len / 3.0);
            b.push(q, q, len / 3.0);
            b.push(p, q, len / 6.0);
            b.push(q, p, len / 6.0);
        };
        for i in 0..self.nx {
            edge(id(i, 0), id(i + 1, 0), self.h[0]);
            edge(id(i, self.ny), id(i + 1, self.ny), self.h[0]);
        }
        for j in 0..self.ny {
            edge(id(0, j), id(0, j + 1), self.h[1]);
            edge(id(self.nx, j), id(self.nx, j + 1), self.h[1]);
        }
        b.build("perimeter_bottom")
    }

    /// `int e^m psi_i psi_j`, with `e^m` taken at the quadrature points.
    pub fn robin(&self, m: &[f64]) -> CsrMatrix {
        let r = &self.rule;
        self.assemble("robin", |e| {
            let mq = r.interpolate([m[e[0]], m[e[1]], m[e[2]], m[e[3]]]);
            let mut ke = [[0.0; 4]; 4];
            for q in 0..4 {
                let w = r.wdet * mq[q].exp();
                for a in 0..4 {
                    for c in 0..4 {
                        ke[a][c] += w * r.n[q][a] * r.n[q][c];
                    }
                }
            }
            ke
        })
    }

    /// `v_i = int e^m a b psi_i`.
    pub fn trilinear(&self, m: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        let r = &self.rule;
        let mut out = vec![0.0; self.n()];
        let pick = |v: &[f64], e: &[usize; 4]| [v[e[0]], v[e[1]], v[e[2]], v[e[3]]];
        for e in &self.elements {
            let mq = r.interpolate(pick(m, e));
            let aq = r.interpolate(pick(a, e));
            let bq = r.interpolate(pick(b, e));
            for q in 0..4 {
                let w = r.wdet * mq[q].exp() * aq[q] * bq[q];
                for k in 0..4 {
                    out[e[k]] += w * r.n[q][k];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::build_box_mesh;

    #[test]
    fn mass_integrates_to_area() {
        let s = BottomSurface::new(&build_box_mesh(4, 3, 1).unwrap());
        let total: f64 = s.mass().row_sums().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let perim: f64 = s.perimeter_mass().row_sums().iter().sum();
        assert!((perim - 4.0).abs() < 1e-13);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let s = BottomSurface::new(&build_box_mesh(4, 4, 1).unwrap());
        let k = s.stiffness([0.1, 0.1]);
        assert!(k.row_sums().iter().all(|v| v.abs() < 1e-12));
        assert!(k.symmetry_defect() < 1e-14);
    }

    #[test]
    fn trilinear_matches_robin_matrix() {
        let s = BottomSurface::new(&build_box_mesh(3, 3, 1).unwrap());
        let n = s.n();
        let m: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.05).collect();
        let ones = vec![1.0; n];
        let w = s.trilinear(&m, &ones, &b);
        let rb = s.robin(&m).matvec(&b);
        for (x, y) in w.iter().zip(&rb) {
            assert!((x - y).abs() < 1e-14);
        }
        let ab = s.trilinear(&m, &a, &b);
        let ba = s.trilinear(&m, &b, &a);
        for (x, y) in ab.iter().zip(&ba) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
