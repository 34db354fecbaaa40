//! Exact static condensation of the state equation onto the free bottom
//! nodes for a fixed conductivity.
//!
//! With `xi` fixed, only the Robin block `R(m)` changes between solves. The
//! free nodes split into bottom nodes `b` and the rest `o`; eliminating `o`
//! once gives a dense Schur complement `S`, and each new `m` costs one dense
//! Cholesky of `S + R_bb(m)` of size `(nx-1)(ny-1)`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::mesh_fem::{volume_stiffness, BottomSurface, Mesh, SensorGrid, STATE_TAG};
use crate::numkit::{SolveLedger, SparseCholesky, TripletBuilder};

/// Ledger label for solves made while building the condensed operator.
pub const SETUP_TAG: &str = "setup";
pub const ADJOINT_TAG: &str = "adjoint";
pub const INC_STATE_TAG: &str = "incremental_state";
pub const INC_ADJOINT_TAG: &str = "incremental_adjoint";

#[derive(Debug)]
pub struct ReducedModel {
    surface: BottomSurface,
    n_surface: usize,
    /// Free bottom nodes (volume and surface index coincide).
    b_nodes: Vec<usize>,
    o_nodes: Vec<usize>,
    n_nodes: usize,
    schur: DMatrix<f64>,
    /// `K_oo^{-1} K_ob`
    z: DMatrix<f64>,
    /// `K_oo^{-1} f_o`
    y_o: DVector<f64>,
    f_b: DVector<f64>,
    /// `B_o Z`
    q: DMatrix<f64>,
    obs0: DVector<f64>,
    ledger: Arc<SolveLedger>,
}

/// Factorized state operator and state at one `m`.
#[derive(Debug, Clone)]
pub struct LinearizedState {
    pub m: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    u_b: DVector<f64>,
    /// State on all bottom-surface nodes, zero on the perimeter.
    pub u_surface: Vec<f64>,
    /// `F(m)` at every candidate sensor.
    pub obs: Vec<f64>,
}

impl ReducedModel {
    pub fn new(
        mesh: &Mesh,
        sensors: &SensorGrid,
        xi: &[f64],
        load: &[f64],
        ledger: Arc<SolveLedger>,
    ) -> Result<Self> {
        let n_nodes = mesh.n_nodes();
        let k = volume_stiffness(mesh, Some(xi), [1.0; 3]);
        let dirichlet = mesh.dirichlet_nodes();
        let mut fixed = vec![false; n_nodes];
        for &d in &dirichlet {
            fixed[d] = true;
        }
        let b_nodes = mesh.free_bottom_nodes();
        let n_surface = mesh.n_bottom();
        let o_nodes: Vec<usize> = (n_surface..n_nodes).filter(|&n| !fixed[n]).collect();
        const NONE: usize = usize::MAX;
        let mut pos_o = vec![NONE; n_nodes];
        for (i, &n) in o_nodes.iter().enumerate() {
            pos_o[n] = i;
        }
        let mut pos_b = vec![NONE; n_nodes];
        for (i, &n) in b_nodes.iter().enumerate() {
            pos_b[n] = i;
        }
        let (no, nb) = (o_nodes.len(), b_nodes.len());

        let mut koo = TripletBuilder::new(no);
        let mut kob = DMatrix::zeros(no, nb);
        let mut kbb = DMatrix::zeros(nb, nb);
        for i in 0..n_nodes {
            let (cols, vals) = k.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match (pos_o[i], pos_b[i], pos_o[j], pos_b[j]) {
                    (oi, _, oj, _) if oi != NONE && oj != NONE => koo.push(oi, oj, v),
                    (oi, _, _, bj) if oi != NONE && bj != NONE => kob[(oi, bj)] = v,
                    (_, bi, _, bj) if bi != NONE && bj != NONE => kbb[(bi, bj)] = v,
                    _ => {}
                }
            }
        }
        let koo = koo.build(SETUP_TAG);
        let koo_chol = SparseCholesky::factor(&koo, Some(ledger.clone()))?;

        let mut z = DMatrix::zeros(no, nb);
        for j in 0..nb {
            let col: Vec<f64> = kob.column(j).iter().copied().collect();
            z.set_column(j, &DVector::from_vec(koo_chol.solve(&col)));
        }
        let schur = kbb - kob.transpose() * &z;
        let schur = (&schur + schur.transpose()) * 0.5;

        let f_o: Vec<f64> = o_nodes.iter().map(|&n| load[n]).collect();
        let y_o = DVector::from_vec(koo_chol.solve(&f_o));
        let f_b = -(kob.transpose() * &y_o);

        let ns = sensors.len();
        let mut q = DMatrix::zeros(ns, nb);
        let mut obs0 = DVector::zeros(ns);
        for (s, row) in sensors.rows().iter().enumerate() {
            for &(node, w) in row {
                if pos_b[node] != NONE {
                    return Err(Error::InvalidArgument("sensor on the bottom face".into()));
                }
                if pos_o[node] == NONE {
                    continue;
                }
                let o = pos_o[node];
                obs0[s] += w * y_o[o];
                for j in 0..nb {
                    q[(s, j)] += w * z[(o, j)];
                }
            }
        }

        Ok(Self {
            surface: BottomSurface::new(mesh),
            n_surface,
            b_nodes,
            o_nodes,
            n_nodes,
            schur,
            z,
            y_o,
            f_b,
            q,
            obs0,
            ledger,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_surface(&self) -> usize {
        self.n_surface
    }

    pub fn surface(&self) -> &BottomSurface {
        &self.surface
    }

    fn restrict(&self, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.b_nodes.len(), self.b_nodes.iter().map(|&n| v[n]))
    }

    fn expand(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_surface];
        for (i, &n) in self.b_nodes.iter().enumerate() {
            out[n] = v[i];
        }
        out
    }

    /// Factors `S + R_bb(m)` and solves for the state.
    pub fn linearize(&self, m: &[f64]) -> Result<LinearizedState> {
        let r = self.surface.robin(m);
        let nb = self.b_nodes.len();
        let mut h = self.schur.clone();
        let mut pos = vec![usize::MAX; self.n_surface];
        for (i, &n) in self.b_nodes.iter().enumerate() {
            pos[n] = i;
        }
        for (i, &n) in self.b_nodes.iter().enumerate() {
            let (cols, vals) = r.row(n);
            for (&c, &v) in cols.iter().zip(vals) {
                if pos[c] < nb {
                    h[(i, pos[c])] += v;
                }
            }
        }
        let chol = Cholesky::new(h).ok_or_else(|| {
            Error::Factorization("condensed state operator is not positive definite".into())
        })?;
        self.ledger.record(STATE_TAG);
        let u_b = chol.solve(&self.f_b);
        let obs = (&self.obs0 - &self.q * &u_b).as_slice().to_vec();
        Ok(LinearizedState {
            m: m.to_vec(),
            u_surface: self.expand(&u_b),
            chol,
            u_b,
            obs,
        })
    }

    /// `J dm` at every sensor, via one incremental state solve.
    pub fn jacobian_apply(&self, st: &LinearizedState, dm: &[f64]) -> Vec<f64> {
        let rhs = self.surface.trilinear(&st.m, dm, &st.u_surface);
        self.ledger.record(INC_STATE_TAG);
        let du = st.chol.solve(&self.restrict(&rhs));
        (&self.q * du).as_slice().to_vec()
    }

    /// `J^T v` as a dual vector on the bottom surface; one adjoint solve
    /// charged to `tag`.
    pub fn jacobian_transpose(&self, st: &LinearizedState, v: &[f64], tag: &str) -> Vec<f64> {
        let rhs = self.q.tr_mul(&DVector::from_column_slice(v));
        self.ledger.record(tag);
        let p = self.expand(&st.chol.solve(&rhs));
        self.surface.trilinear(&st.m, &st.u_surface, &p)
    }

    /// The full volume state belonging to a linearization.
    pub fn full_state(&self, st: &LinearizedState) -> Vec<f64> {
        let u_o = &self.y_o - &self.z * &st.u_b;
        let mut u = vec![0.0; self.n_nodes];
        for (i, &n) in self.o_nodes.iter().enumerate() {
            u[n] = u_o[i];
        }
        for (i, &n) in self.b_nodes.iter().enumerate() {
            u[n] = st.u_b[i];
        }
        u
    }
}
