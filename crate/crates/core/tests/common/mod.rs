//! Dense reference assembly built directly from element integrals and nodal
//! quadrature, independent of the matrix-free stencil and kernel tables.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub const SCREENING: f64 = 1e2;
pub const REGULARIZATION: f64 = 1e-1;

pub fn yukawa(r: f64) -> f64 {
    (-SCREENING * r).exp() / (r + REGULARIZATION)
}

pub fn harmonic(c: f64, (a, b): (f64, f64), (x, y): (f64, f64)) -> f64 {
    c * ((x - a).powi(2) + (y - b).powi(2))
}

/// Interior node coordinates, first index fastest.
pub fn interior_nodes(side: f64, m: usize) -> Vec<(f64, f64)> {
    let h = side / (m - 1) as f64;
    let n = m - 2;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(((i + 1) as f64 * h, (j + 1) as f64 * h));
        }
    }
    out
}

/// Stiffness matrix of bilinear elements with homogeneous Dirichlet
/// conditions, integrated with 2x2 Gauss points on each cell.
pub fn stiffness(m: usize) -> DMatrix<f64> {
    let n = m - 2;
    let g = 0.5 / 3f64.sqrt();
    let gauss = [0.5 - g, 0.5 + g];
    // reference cell [0,1]^2, local nodes (0,0) (1,0) (0,1) (1,1)
    let grad = |k: usize, xi: f64, eta: f64| -> (f64, f64) {
        let (sx, sy) = ((k & 1) as f64, (k >> 1) as f64);
        let fx = if sx == 1.0 { xi } else { 1.0 - xi };
        let fy = if sy == 1.0 { eta } else { 1.0 - eta };
        let dx = if sx == 1.0 { 1.0 } else { -1.0 };
        let dy = if sy == 1.0 { 1.0 } else { -1.0 };
        (dx * fy, fx * dy)
    };
    let mut local = [[0.0; 4]; 4];
    for &xi in &gauss {
        for &eta in &gauss {
            for a in 0..4 {
                for b in 0..4 {
                    let (ga, gb) = (grad(a, xi, eta), grad(b, xi, eta));
                    local[a][b] += 0.25 * (ga.0 * gb.0 + ga.1 * gb.1);
                }
            }
        }
    }
    let mut k = DMatrix::zeros(n * n, n * n);
    let interior = |i: usize, j: usize| -> Option<usize> {
        (i >= 1 && j >= 1 && i <= n && j <= n).then(|| (i - 1) + (j - 1) * n)
    };
    for cj in 0..m - 1 {
        for ci in 0..m - 1 {
            let nodes = [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)];
            for a in 0..4 {
                for b in 0..4 {
                    if let (Some(p), Some(q)) = (
                        interior(nodes[a].0, nodes[a].1),
                        interior(nodes[b].0, nodes[b].1),
                    ) {
                        k[(p, q)] += local[a][b];
                    }
                }
            }
        }
    }
    k
}

/// Dense pieces of the lumped two-component problem.
pub struct DenseProblem {
    pub side: f64,
    pub m: usize,
    pub h: f64,
    pub stiffness: DMatrix<f64>,
    pub external: [DVector<f64>; 2],
    /// `h^4 V(p_i - p_j)`.
    pub kernel: DMatrix<f64>,
    pub theta: [f64; 2],
    pub kappa: f64,
    pub mass: [f64; 2],
}

impl DenseProblem {
    pub fn new(
        side: f64,
        m: usize,
        traps: [(f64, (f64, f64)); 2],
        theta: [f64; 2],
        kappa: f64,
    ) -> Self {
        let h = side / (m - 1) as f64;
        let nodes = interior_nodes(side, m);
        let dim = nodes.len();
        let external = traps.map(|(c, center)| {
            DVector::from_iterator(dim, nodes.iter().map(|&p| h * h * harmonic(c, center, p)))
        });
        let kernel = DMatrix::from_fn(dim, dim, |i, j| {
            let (dx, dy) = (nodes[i].0 - nodes[j].0, nodes[i].1 - nodes[j].1);
            h.powi(4) * yukawa((dx * dx + dy * dy).sqrt())
        });
        Self {
            side,
            m,
            h,
            stiffness: stiffness(m),
            external,
            kernel,
            theta,
            kappa,
            mass: [1.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn g0(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.kernel * w.component_mul(w)
    }

    pub fn hamiltonian(&self, alpha: usize, fields: [&DVector<f64>; 2]) -> DMatrix<f64> {
        let own = self.g0(fields[alpha]);
        let cross = self.g0(fields[1 - alpha]);
        let diag = &self.external[alpha] + own * self.theta[alpha] + cross * self.kappa;
        (&self.stiffness + DMatrix::from_diagonal(&diag)) / (self.h * self.h)
    }

    /// Lowest eigenpair, vector Euclidean-normalized with its largest entry positive.
    pub fn ground(&self, matrix: &DMatrix<f64>) -> (f64, DVector<f64>) {
        lowest_eigenpair(matrix)
    }

    /// One successive-substitution step carried out with dense eigensolves.
    pub fn step(&self, fields: [&DVector<f64>; 2]) -> [DVector<f64>; 2] {
        [0, 1].map(|alpha| {
            let (_, v) = self.ground(&self.hamiltonian(alpha, fields));
            let mut z = v.map(|x| (x * self.mass[alpha].sqrt() / self.h).max(0.0));
            let mass = self.h * self.h * z.norm_squared();
            z *= (self.mass[alpha] / mass).sqrt();
            z
        })
    }
}

pub fn lowest_eigenpair(matrix: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(matrix.clone());
    let (idx, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let mut v = eig.eigenvectors.column(idx).into_owned();
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v = -v;
    }
    (value, v)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}
