use std::sync::Arc;

use super::element::{HexRule, QuadRule};
use super::field::{Field, Support};
use super::mesh::{FaceTag, Mesh};
use super::surface::BottomSurface;
use crate::error::Result;
use crate::numkit::{
    cg_solve, CsrMatrix, FnOperator, SolveLedger, SparseCholesky, TripletBuilder, FORWARD_RTOL,
};

/// Ledger label for forward (state) solves.
pub const STATE_TAG: &str = "state";

/// `int c(x) sum_d theta_d d_d N_i d_d N_j` over the volume, with
/// `c = exp(log_coef)` interpolated at quadrature points, or 1.
pub fn volume_stiffness(mesh: &Mesh, log_coef: Option<&[f64]>, theta: [f64; 3]) -> CsrMatrix {
    let rule = HexRule::new(mesh.element_size());
    let mut b = TripletBuilder::new(mesh.n_nodes());
    for e in &mesh.elements {
        let mut ke = [[0.0; 8]; 8];
        for q in 0..8 {
            let c = match log_coef {
                Some(x) => (0..8).map(|a| rule.n[q][a] * x[e[a]]).sum::<f64>().exp(),
                None => 1.0,
            };
            let w = rule.wdet * c;
            let dn = &rule.dn[q];
            for a in 0..8 {
                for k in a..8 {
                    let g = theta[0] * dn[a][0] * dn[k][0]
                        + theta[1] * dn[a][1] * dn[k][1]
                        + theta[2] * dn[a][2] * dn[k][2];
                    ke[a][k] += w * g;
                }
            }
        }
        for a in 0..8 {
            for k in a..8 {
                b.push(e[a], e[k], ke[a][k]);
                if k != a {
                    b.push(e[k], e[a], ke[a][k]);
                }
            }
        }
    }
    b.build("stiffness")
}

/// Consistent volume mass matrix.
pub fn volume_mass(mesh: &Mesh) -> CsrMatrix {
    let rule = HexRule::new(mesh.element_size());
    let mut ke = [[0.0; 8]; 8];
    for q in 0..8 {
        for a in 0..8 {
            for k in 0..8 {
                ke[a][k] += rule.wdet * rule.n[q][a] * rule.n[q][k];
            }
        }
    }
    let mut b = TripletBuilder::new(mesh.n_nodes());
    for e in &mesh.elements {
        for a in 0..8 {
            for k in 0..8 {
                b.push(e[a], e[k], ke[a][k]);
            }
        }
    }
    b.build("mass_volume")
}

/// `int_F c psi_i psi_j` over the exterior faces whose tag is in `tags`,
/// with `c = exp(log_coef)` at quadrature points (indexed by node), or 1.
pub fn boundary_mass(mesh: &Mesh, tags: &[FaceTag], log_coef: Option<&[f64]>) -> CsrMatrix {
    let mut b = TripletBuilder::new(mesh.n_nodes());
    let mut rules: Vec<([f64; 2], QuadRule)> = Vec::new();
    for f in mesh.boundary_faces.iter().filter(|f| tags.contains(&f.tag)) {
        let idx = match rules.iter().position(|(l, _)| *l == f.lengths) {
            Some(i) => i,
            None => {
                rules.push((f.lengths, QuadRule::new(f.lengths)));
                rules.len() - 1
            }
        };
        let rule = &rules[idx].1;
        let cq = match log_coef {
            Some(x) => rule
                .interpolate([x[f.nodes[0]], x[f.nodes[1]], x[f.nodes[2]], x[f.nodes[3]]])
                .map(f64::exp),
            None => [1.0; 4],
        };
        for q in 0..4 {
            let w = rule.wdet * cq[q];
            for a in 0..4 {
                for k in 0..4 {
                    b.push(f.nodes[a], f.nodes[k], w * rule.n[q][a] * rule.n[q][k]);
                }
            }
        }
    }
    b.build("boundary_mass")
}

/// `int_{Gamma_N} h psi_i` for a source given pointwise on the top face.
pub fn source_load(mesh: &Mesh, h: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for f in mesh.faces_with(FaceTag::Neumann) {
        let rule = QuadRule::new(f.lengths);
        let xs: Vec<[f64; 3]> = f.nodes.iter().map(|&n| mesh.coords[n]).collect();
        for q in 0..4 {
            let x: f64 = (0..4).map(|a| rule.n[q][a] * xs[a][0]).sum();
            let y: f64 = (0..4).map(|a| rule.n[q][a] * xs[a][1]).sum();
            let w = rule.wdet * h(x, y);
            for a in 0..4 {
                load[f.nodes[a]] += w * rule.n[q][a];
            }
        }
    }
    load
}

/// The source `1 + sin(4 pi |(x, y) - (1, 1)|)` on the top face.
pub fn default_source(x: f64, y: f64) -> f64 {
    1.0 + (4.0 * std::f64::consts::PI * ((x - 1.0).powi(2) + (y - 1.0).powi(2)).sqrt()).sin()
}

/// Discrete state operator and related matrices for one `(xi, m)`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Volume stiffness with coefficient `e^xi`, before boundary conditions.
    pub k: CsrMatrix,
    /// Bottom Robin mass with weight `e^m`, before boundary conditions.
    pub r: CsrMatrix,
    pub m_vol: CsrMatrix,
    /// Bottom-surface mass matrix.
    pub m_bdry: CsrMatrix,
    pub dirichlet_dofs: Vec<usize>,
    operator: CsrMatrix,
}

/// `K + R` with the side nodes eliminated symmetrically (unit diagonal).
pub fn state_operator(mesh: &Mesh, xi: &[f64], m: &[f64]) -> Result<CsrMatrix> {
    let k = volume_stiffness(mesh, Some(xi), [1.0; 3]);
    let r = robin_volume(mesh, m);
    let mut a = k.add_scaled(1.0, &r)?.with_tag(STATE_TAG);
    a.eliminate_symmetric(&mesh.dirichlet_nodes(), 1.0);
    Ok(a)
}

fn robin_volume(mesh: &Mesh, m: &[f64]) -> CsrMatrix {
    // bottom ids coincide with volume ids on k = 0
    let mut padded = vec![0.0; mesh.n_nodes()];
    padded[..m.len()].copy_from_slice(m);
    boundary_mass(mesh, &[FaceTag::Robin], Some(&padded))
}

pub fn assemble(mesh: &Mesh, xi: &Field, m: &Field) -> Result<AssembledSystem> {
    xi.check(mesh, Support::Volume)?;
    m.check(mesh, Support::Bottom)?;
    let k = volume_stiffness(mesh, Some(xi.values()), [1.0; 3]).with_tag(STATE_TAG);
    let r = robin_volume(mesh, m.values()).with_tag(STATE_TAG);
    let dirichlet_dofs = mesh.dirichlet_nodes();
    let mut operator = k.add_scaled(1.0, &r)?;
    operator.eliminate_symmetric(&dirichlet_dofs, 1.0);
    Ok(AssembledSystem {
        k,
        r,
        m_vol: volume_mass(mesh),
        m_bdry: BottomSurface::new(mesh).mass(),
        dirichlet_dofs,
        operator,
    })
}

impl AssembledSystem {
    /// The symmetric positive definite system matrix.
    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    fn masked_load(&self, load: &[f64]) -> Vec<f64> {
        let mut rhs = load.to_vec();
        for &d in &self.dirichlet_dofs {
            rhs[d] = 0.0;
        }
        rhs
    }

    /// Solves the state equation for a nodal load vector with a sparse
    /// direct factorization.
    pub fn solve_state(&self, load: &[f64], ledger: Option<Arc<SolveLedger>>) -> Result<Field> {
        let chol = SparseCholesky::factor(&self.operator, ledger)?;
        let u = chol.solve(&self.masked_load(load));
        Ok(Field::from_values(Support::Volume, u))
    }

    /// Same as [`AssembledSystem::solve_state`] with Jacobi-preconditioned CG.
    pub fn solve_state_cg(&self, load: &[f64], ledger: Option<&SolveLedger>) -> Result<Field> {
        let inv_diag: Vec<f64> = self.operator.diagonal().iter().map(|d| 1.0 / d).collect();
        let jacobi = FnOperator::new(inv_diag.len(), |x: &[f64]| {
            x.iter().zip(&inv_diag).map(|(a, b)| a * b).collect()
        });
        let rhs = self.masked_load(load);
        let u = cg_solve(
            &self.operator,
            Some(&jacobi),
            &rhs,
            FORWARD_RTOL,
            20 * rhs.len(),
            ledger,
            STATE_TAG,
        )?;
        Ok(Field::from_values(Support::Volume, u))
    }
}
