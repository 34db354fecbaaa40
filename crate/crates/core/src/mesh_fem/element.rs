//! Reference data for trilinear hexahedra and bilinear quadrilaterals on
//! an axis-aligned grid. Every element of a structured mesh has the same
//! size, so one rule serves the whole mesh.

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// 2x2x2 Gauss rule on a `hx x hy x hz` brick. Local node
/// `a = ia + 2 ja + 4 ka`, point `q` ordered the same way.
#[derive(Debug, Clone)]
pub(crate) struct HexRule {
    pub n: [[f64; 8]; 8],
    /// Physical gradients `dn[q][a][d]`.
    pub dn: [[[f64; 3]; 8]; 8],
    /// Weight times Jacobian determinant, identical for every point.
    pub wdet: f64,
}

impl HexRule {
    pub fn new(h: [f64; 3]) -> Self {
        let mut n = [[0.0; 8]; 8];
        let mut dn = [[[0.0; 3]; 8]; 8];
        for q in 0..8 {
            let p = [sign(q & 1) * G, sign((q >> 1) & 1) * G, sign((q >> 2) & 1) * G];
            for a in 0..8 {
                let s = [sign(a & 1), sign((a >> 1) & 1), sign((a >> 2) & 1)];
                let f = [
                    0.5 * (1.0 + s[0] * p[0]),
                    0.5 * (1.0 + s[1] * p[1]),
                    0.5 * (1.0 + s[2] * p[2]),
                ];
                n[q][a] = f[0] * f[1] * f[2];
                // d/dx of 0.5(1 + s x) on [-1,1] mapped to length h is s/h
                dn[q][a] = [
                    s[0] / h[0] * f[1] * f[2],
                    f[0] * s[1] / h[1] * f[2],
                    f[0] * f[1] * s[2] / h[2],
                ];
            }
        }
        Self {
            n,
            dn,
            wdet: h[0] * h[1] * h[2] / 8.0,
        }
    }
}

/// 2x2 Gauss rule on an `l0 x l1` rectangle. Local node `a = ia + 2 ja`.
#[derive(Debug, Clone)]
pub(crate) struct QuadRule {
    pub n: [[f64; 4]; 4],
    pub dn: [[[f64; 2]; 4]; 4],
    pub wdet: f64,
}

impl QuadRule {
    pub fn new(l: [f64; 2]) -> Self {
        let mut n = [[0.0; 4]; 4];
        let mut dn = [[[0.0; 2]; 4]; 4];
        for q in 0..4 {
            let p = [sign(q & 1) * G, sign((q >> 1) & 1) * G];
            for a in 0..4 {
                let s = [sign(a & 1), sign((a >> 1) & 1)];
                let f = [0.5 * (1.0 + s[0] * p[0]), 0.5 * (1.0 + s[1] * p[1])];
                n[q][a] = f[0] * f[1];
                dn[q][a] = [s[0] / l[0] * f[1], f[0] * s[1] / l[1]];
            }
        }
        Self {
            n,
            dn,
            wdet: l[0] * l[1] / 4.0,
        }
    }

    /// `sum_a N_a(q) v_a` at every point.
    pub fn interpolate(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (q, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|a| self.n[q][a] * v[a]).sum();
        }
        out
    }
}

#[inline]
fn sign(bit: usize) -> f64 {
    if bit == 0 {
        -1.0
    } else {
        1.0
    }
}
