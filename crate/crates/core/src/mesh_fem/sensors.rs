use super::field::{Field, Support};
use super::mesh::Mesh;
use crate::error::{invalid, Result};

/// Candidate sensor locations on the top face and the pointwise
/// observation operator `B` they define.
#[derive(Debug, Clone)]
pub struct SensorGrid {
    points: Vec<[f64; 2]>,
    /// Sparse rows of `B`: `(node, weight)`.
    rows: Vec<Vec<(usize, f64)>>,
    n_nodes: usize,
}

const SNAP: f64 = 1e-10;

impl SensorGrid {
    pub fn new(mesh: &Mesh, points: Vec<[f64; 2]>) -> Result<Self> {
        let [hx, hy, _] = mesh.element_size();
        let mut rows = Vec::with_capacity(points.len());
        for p in &points {
            if !(0.0..=mesh.lx).contains(&p[0]) || !(0.0..=mesh.ly).contains(&p[1]) {
                return Err(invalid(format!(
                    "sensor ({}, {}) lies outside the top face",
                    p[0], p[1]
                )));
            }
            let locate = |x: f64, h: f64, n: usize| {
                let s = x / h;
                let cell = (s.floor() as usize).min(n - 1);
                let mut t = s - cell as f64;
                if t.abs() < SNAP {
                    t = 0.0;
                } else if (1.0 - t).abs() < SNAP {
                    t = 1.0;
                }
                (cell, t)
            };
            let (i, tx) = locate(p[0], hx, mesh.nx);
            let (j, ty) = locate(p[1], hy, mesh.ny);
            let mut row = Vec::with_capacity(4);
            for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
                for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
                    let w = wx * wy;
                    if w != 0.0 {
                        row.push((mesh.node_id(i + di, j + dj, mesh.nz), w));
                    }
                }
            }
            rows.push(row);
        }
        Ok(Self {
            points,
            rows,
            n_nodes: mesh.n_nodes(),
        })
    }

    /// `per_side x per_side` grid with the given margin from the sides,
    /// numbered x-fastest.
    pub fn regular(mesh: &Mesh, per_side: usize, margin: f64) -> Result<Self> {
        if per_side < 1 {
            return Err(invalid("sensor grid needs at least one sensor per side"));
        }
        let step = |l: f64| {
            if per_side == 1 {
                0.0
            } else {
                (l - 2.0 * margin) / (per_side - 1) as f64
            }
        };
        let (sx, sy) = (step(mesh.lx), step(mesh.ly));
        let mut points = Vec::with_capacity(per_side * per_side);
        for j in 0..per_side {
            for i in 0..per_side {
                points.push([margin + i as f64 * sx, margin + j as f64 * sy]);
            }
        }
        Self::new(mesh, points)
    }

    /// The 10 x 10 grid at `0.05 + 0.1 i`.
    pub fn default_grid(mesh: &Mesh) -> Result<Self> {
        Self::regular(mesh, 10, 0.05)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// `B u` on raw nodal values.
    pub fn observe_values(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(n, w)| w * u[n]).sum())
            .collect()
    }

    /// `B^T r` on raw values.
    pub fn adjoint_values(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (row, ri) in self.rows.iter().zip(r) {
            for &(n, w) in row {
                out[n] += w * ri;
            }
        }
        out
    }

    pub fn observe(&self, u: &Field) -> Result<Vec<f64>> {
        if u.support() != Support::Volume || u.len() != self.n_nodes {
            return Err(invalid("observation needs a volume field on the sensor mesh"));
        }
        Ok(self.observe_values(u.values()))
    }

    pub fn adjoint_of_observe(&self, r: &[f64]) -> Result<Field> {
        if r.len() != self.len() {
            return Err(invalid(format!(
                "expected {} sensor values, got {}",
                self.len(),
                r.len()
            )));
        }
        Ok(Field::from_values(Support::Volume, self.adjoint_values(r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::build_box_mesh;
    use crate::numkit::{dot, gaussian_vector, stream};

    #[test]
    fn default_grid_snaps_to_nodes() {
        let mesh = build_box_mesh(20, 20, 4).unwrap();
        let s = SensorGrid::default_grid(&mesh).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.rows().iter().all(|r| r.len() == 1 && r[0].1 == 1.0));
        let p = s.points()[13];
        assert!((p[0] - 0.35).abs() < 1e-12 && (p[1] - 0.15).abs() < 1e-12);
        assert_eq!(s.rows()[13][0].0, mesh.node_id(7, 3, 4));
    }

    #[test]
    fn constant_field_and_linearity() {
        let mesh = build_box_mesh(3, 3, 1).unwrap();
        let s = SensorGrid::new(&mesh, vec![[0.1, 0.2], [0.5, 0.5], [1.0, 1.0]]).unwrap();
        let c = Field::constant(&mesh, Support::Volume, 2.5);
        assert!(s.observe(&c).unwrap().iter().all(|v| (v - 2.5).abs() < 1e-14));
        let u1 = gaussian_vector(&mut stream(1, "u", 0), mesh.n_nodes());
        let u2 = gaussian_vector(&mut stream(1, "u", 1), mesh.n_nodes());
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let lhs = s.observe_values(&sum);
        let a = s.observe_values(&u1);
        let b = s.observe_values(&u2);
        for i in 0..3 {
            assert!((lhs[i] - a[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_domain_sensor_rejected() {
        let mesh = build_box_mesh(2, 2, 1).unwrap();
        assert!(SensorGrid::new(&mesh, vec![[1.2, 0.5]]).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let mesh = build_box_mesh(4, 4, 2).unwrap();
        let s = SensorGrid::new(&mesh, vec![[0.13, 0.71], [0.5, 0.25], [0.9, 0.05]]).unwrap();
        for k in 0..100 {
            let r = gaussian_vector(&mut stream(2, "r", k), s.len());
            let u = gaussian_vector(&mut stream(2, "u", k), mesh.n_nodes());
            let lhs = dot(&r, &s.observe_values(&u));
            let rhs = dot(&s.adjoint_values(&r), &u);
            let scale = crate::numkit::norm2(&r) * crate::numkit::norm2(&u);
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
        let z = s.adjoint_of_observe(&[0.0; 3]).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nodal_sensor_adjoint_is_point_load() {
        let mesh = build_box_mesh(4, 4, 1).unwrap();
        let s = SensorGrid::new(&mesh, vec![[0.25, 0.5]]).unwrap();
        let f = s.adjoint_of_observe(&[3.0]).unwrap();
        let node = mesh.node_id(1, 2, 1);
        for (i, v) in f.values().iter().enumerate() {
            assert_eq!(*v, if i == node { 3.0 } else { 0.0 });
        }
    }
}
