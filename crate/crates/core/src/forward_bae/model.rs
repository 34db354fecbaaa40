use std::sync::Arc;

use super::reduced::{LinearizedState, ReducedModel};
use crate::error::Result;
use crate::mesh_fem::{
    default_source, source_load, state_operator, Field, Mesh, SensorGrid, Support,
};
use crate::numkit::{reverse_cuthill_mckee, SolveLedger, SparseCholesky};

/// Parameter-to-observable maps `G(m, xi)` and `F(m) = G(m, xi_bar)`.
#[derive(Debug)]
pub struct ForwardModel {
    mesh: Arc<Mesh>,
    sensors: SensorGrid,
    load: Vec<f64>,
    dirichlet: Vec<usize>,
    xi_bar: Field,
    ordering: Vec<usize>,
    reduced: ReducedModel,
    ledger: Arc<SolveLedger>,
}

impl ForwardModel {
    /// Uses the default top-face source.
    pub fn new(
        mesh: Arc<Mesh>,
        sensors: SensorGrid,
        xi_bar: Field,
        ledger: Arc<SolveLedger>,
    ) -> Result<Self> {
        let load = source_load(&mesh, default_source);
        Self::with_load(mesh, sensors, xi_bar, load, ledger)
    }

    pub fn with_load(
        mesh: Arc<Mesh>,
        sensors: SensorGrid,
        xi_bar: Field,
        load: Vec<f64>,
        ledger: Arc<SolveLedger>,
    ) -> Result<Self> {
        xi_bar.check(&mesh, Support::Volume)?;
        let m0 = vec![0.0; mesh.n_bottom()];
        let pattern = state_operator(&mesh, xi_bar.values(), &m0)?;
        let ordering = reverse_cuthill_mckee(&pattern);
        let reduced = ReducedModel::new(&mesh, &sensors, xi_bar.values(), &load, ledger.clone())?;
        Ok(Self {
            dirichlet: mesh.dirichlet_nodes(),
            mesh,
            sensors,
            load,
            xi_bar,
            ordering,
            reduced,
            ledger,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn sensors(&self) -> &SensorGrid {
        &self.sensors
    }

    pub fn n_obs(&self) -> usize {
        self.sensors.len()
    }

    pub fn xi_bar(&self) -> &Field {
        &self.xi_bar
    }

    pub fn reduced(&self) -> &ReducedModel {
        &self.reduced
    }

    pub fn ledger(&self) -> &Arc<SolveLedger> {
        &self.ledger
    }

    /// State `u(m, xi)` on the whole mesh, by a sparse direct solve.
    pub fn solve_state(&self, m: &Field, xi: &Field) -> Result<Field> {
        m.check(&self.mesh, Support::Bottom)?;
        xi.check(&self.mesh, Support::Volume)?;
        let a = state_operator(&self.mesh, xi.values(), m.values())?;
        let chol = SparseCholesky::factor_with_ordering(&a, self.ordering.clone(), Some(self.ledger.clone()))?;
        let mut rhs = self.load.clone();
        for &d in &self.dirichlet {
            rhs[d] = 0.0;
        }
        Ok(Field::from_values(Support::Volume, chol.solve(&rhs)))
    }

    /// `G(m, xi)`
    pub fn forward_full(&self, m: &Field, xi: &Field) -> Result<Vec<f64>> {
        let u = self.solve_state(m, xi)?;
        self.sensors.observe(&u)
    }

    /// `F(m) = G(m, xi_bar)`, evaluated through the condensed operator.
    pub fn forward_approx(&self, m: &Field) -> Result<Vec<f64>> {
        m.check(&self.mesh, Support::Bottom)?;
        Ok(self.reduced.linearize(m.values())?.obs)
    }

    /// Condensed linearization at `m` (state, factorization and `F(m)`).
    pub fn linearize(&self, m: &[f64]) -> Result<LinearizedState> {
        self.reduced.linearize(m)
    }
}
