use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::error::{invalid, Result};

/// Where a field's degrees of freedom live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// All mesh nodes (u, p, xi).
    Volume,
    /// Bottom-face nodes (m).
    Bottom,
}

impl Support {
    pub fn dofs(self, mesh: &Mesh) -> usize {
        match self {
            Support::Volume => mesh.n_nodes(),
            Support::Bottom => mesh.n_bottom(),
        }
    }
}

/// Nodal values of a piecewise multilinear function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    support: Support,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: &Mesh, support: Support, values: Vec<f64>) -> Result<Self> {
        if values.len() != support.dofs(mesh) {
            return Err(invalid(format!(
                "{support:?} field needs {} values, got {}",
                support.dofs(mesh),
                values.len()
            )));
        }
        Ok(Self { support, values })
    }

    /// Wraps values without a mesh check; callers guarantee the length.
    pub fn from_values(support: Support, values: Vec<f64>) -> Self {
        Self { support, values }
    }

    pub fn constant(mesh: &Mesh, support: Support, c: f64) -> Self {
        Self {
            support,
            values: vec![c; support.dofs(mesh)],
        }
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fails unless the field lives on `support` of `mesh`.
    pub fn check(&self, mesh: &Mesh, support: Support) -> Result<()> {
        if self.support != support {
            return Err(invalid(format!(
                "expected a {support:?} field, got {:?}",
                self.support
            )));
        }
        if self.values.len() != support.dofs(mesh) {
            return Err(invalid(format!(
                "{support:?} field has {} values, mesh has {}",
                self.values.len(),
                support.dofs(mesh)
            )));
        }
        Ok(())
    }

    fn same_space(&self, other: &Field) -> Result<()> {
        if self.support != other.support || self.values.len() != other.values.len() {
            return Err(invalid("field arithmetic between different supports"));
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<()> {
        self.same_space(other)?;
        crate::numkit::axpy(alpha, &other.values, &mut self.values);
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            support: self.support,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::build_box_mesh;

    #[test]
    fn lengths_are_checked() {
        let mesh = build_box_mesh(2, 2, 1).unwrap();
        assert!(Field::new(&mesh, Support::Bottom, vec![0.0; 9]).is_ok());
        assert!(Field::new(&mesh, Support::Bottom, vec![0.0; 18]).is_err());
        assert!(Field::new(&mesh, Support::Volume, vec![0.0; 18]).is_ok());
    }

    #[test]
    fn mixed_support_arithmetic_fails() {
        let mesh = build_box_mesh(2, 2, 1).unwrap();
        let a = Field::constant(&mesh, Support::Bottom, 1.0);
        let b = Field::constant(&mesh, Support::Volume, 1.0);
        assert!(a.add(&b).is_err());
        let c = a.add(&a).unwrap();
        assert!(c.values().iter().all(|v| *v == 2.0));
    }
}
