//! Discrete operators of the lumped finite-element system.
//!
//! Everything is matrix-free. The stiffness matrix of piecewise-bilinear
//! elements on squares is a fixed 9-point stencil, the lumped mass matrix is
//! `h^2 I`, and both the trap and the Hartree convolution terms are diagonal.
//! `HamiltonianOperator` applies
//! `H = (B + Y + theta diag(G0[z_own]) + kappa diag(G0[z_other])) / h^2`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::eigensolver::FieldVector;
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::potentials::{HarmonicPotential, KernelTable};

/// Below this many unknowns the kernels stay on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

/// 9-point stiffness stencil of bilinear elements on a square mesh.
///
/// In 2D the weights do not depend on `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessStencil {
    pub center: f64,
    pub edge: f64,
    pub corner: f64,
}

impl Default for StiffnessStencil {
    fn default() -> Self {
        Self {
            center: 8.0 / 3.0,
            edge: -1.0 / 3.0,
            corner: -1.0 / 3.0,
        }
    }
}

impl StiffnessStencil {
    /// Writes `B z` into `out`, with zero Dirichlet values outside the
    /// `n x n` interior block.
    pub fn apply_into(&self, n: usize, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), n * n);
        debug_assert_eq!(out.len(), n * n);
        let row = |b: usize, out_row: &mut [f64]| self.apply_row(n, b, z, out_row);
        if n * n >= PARALLEL_THRESHOLD {
            out.par_chunks_mut(n)
                .enumerate()
                .for_each(|(b, r)| row(b, r));
        } else {
            out.chunks_mut(n).enumerate().for_each(|(b, r)| row(b, r));
        }
    }

    fn apply_row(&self, n: usize, b: usize, z: &[f64], out: &mut [f64]) {
        let cur = &z[b * n..(b + 1) * n];
        let below = (b > 0).then(|| &z[(b - 1) * n..b * n]);
        let above = (b + 1 < n).then(|| &z[(b + 1) * n..(b + 2) * n]);
        for a in 0..n {
            let mut edge = 0.0;
            let mut corner = 0.0;
            if a > 0 {
                edge += cur[a - 1];
            }
            if a + 1 < n {
                edge += cur[a + 1];
            }
            for nb in [below, above].into_iter().flatten() {
                edge += nb[a];
                if a > 0 {
                    corner += nb[a - 1];
                }
                if a + 1 < n {
                    corner += nb[a + 1];
                }
            }
            out[a] = self.center * cur[a] + self.edge * edge + self.corner * corner;
        }
    }

    /// Sum of absolute off-diagonal stencil weights present in row `(a, b)`.
    fn off_diagonal_abs(&self, n: usize, a: usize, b: usize) -> f64 {
        let span = |k: usize| 1 + usize::from(k > 0) + usize::from(k + 1 < n);
        let (sa, sb) = (span(a), span(b));
        // edges: same row or same column, minus the node itself
        let edges = (sa - 1) + (sb - 1);
        let corners = (sa - 1) * (sb - 1);
        edges as f64 * self.edge.abs() + corners as f64 * self.corner.abs()
    }
}

/// `B z` for a field on its own lattice.
pub fn stiffness_apply(z: &FieldVector) -> FieldVector {
    let lattice = *z.lattice();
    let mut out = vec![0.0; z.len()];
    StiffnessStencil::default().apply_into(lattice.interior_per_side(), z.values(), &mut out);
    FieldVector::from_parts(lattice, out)
}

/// Lumped mass matrix `A = h^2 I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedMass {
    pub weight: f64,
}

impl LumpedMass {
    pub fn new(lattice: &Lattice) -> Self {
        let h = lattice.spacing();
        Self { weight: h * h }
    }

    /// `<u, A v>`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weight * dot(u, v)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}

/// Lumped potential matrix `Y`: entry `j` is `h^2 V(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPotential {
    entries: Vec<f64>,
}

impl DiagonalPotential {
    pub fn from_fn(lattice: &Lattice, f: impl Fn((f64, f64)) -> f64) -> Self {
        let h2 = lattice.spacing().powi(2);
        Self {
            entries: lattice.nodes().map(|(_, x, y)| h2 * f((x, y))).collect(),
        }
    }

    pub fn harmonic(lattice: &Lattice, trap: &HarmonicPotential) -> Self {
        Self::from_fn(lattice, |p| trap.eval(p))
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self {
            entries: vec![0.0; lattice.interior_count()],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    /// O(M^2) summation over node pairs.
    #[default]
    Direct,
    /// Zero-padded FFT convolution.
    Fast,
}

struct FftConvolution {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FftConvolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftConvolution")
            .field("size", &self.size)
            .finish()
    }
}

impl FftConvolution {
    fn new(table: &KernelTable) -> Self {
        let n = table.lattice().interior_per_side();
        // linear convolution of an n-wide field with a (2n-1)-wide kernel
        let size = (3 * n - 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);

        let width = table.width();
        let mut kernel_spectrum = vec![Complex::new(0.0, 0.0); size * size];
        for (k, &v) in table.values().iter().enumerate() {
            kernel_spectrum[(k % width) + (k / width) * size] = Complex::new(v, 0.0);
        }
        let mut conv = Self {
            size,
            forward,
            inverse,
            kernel_spectrum: Vec::new(),
        };
        conv.transform(&mut kernel_spectrum, true);
        conv.kernel_spectrum = kernel_spectrum;
        conv
    }

    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        let fft = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        let l = self.size;
        fft.process(buf);
        transpose_square(buf, l);
        fft.process(buf);
        transpose_square(buf, l);
    }

    /// Full-grid convolution of `density` (n x n) with the table, cropped to
    /// the interior block.
    fn convolve(&self, n: usize, density: &[f64]) -> Vec<f64> {
        let l = self.size;
        let mut buf = vec![Complex::new(0.0, 0.0); l * l];
        for b in 0..n {
            for a in 0..n {
                buf[a + b * l] = Complex::new(density[a + b * n], 0.0);
            }
        }
        self.transform(&mut buf, true);
        for (x, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *x *= k;
        }
        self.transform(&mut buf, false);
        let scale = 1.0 / (l * l) as f64;
        let shift = n - 1;
        let mut out = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                let v = buf[(a + shift) + (b + shift) * l].re * scale;
                out[a + b * n] = v.max(0.0);
            }
        }
        out
    }
}

fn transpose_square(buf: &mut [Complex<f64>], l: usize) {
    for i in 0..l {
        for j in (i + 1)..l {
            buf.swap(i * l + j, j * l + i);
        }
    }
}

/// Evaluates the lumped convolution `G0[w]_i = h^4 sum_j |w_j|^2 V(h (p_i - p_j))`.
#[derive(Debug)]
pub struct Convolver {
    table: KernelTable,
    path: ConvolutionPath,
    fft: Option<FftConvolution>,
}

impl Convolver {
    pub fn new(table: KernelTable, path: ConvolutionPath) -> Self {
        let fft = (path == ConvolutionPath::Fast).then(|| FftConvolution::new(&table));
        Self { table, path, fft }
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn lattice(&self) -> &Lattice {
        self.table.lattice()
    }

    pub fn path(&self) -> ConvolutionPath {
        self.path
    }

    pub fn apply(&self, w: &FieldVector) -> Result<FieldVector> {
        if w.lattice() != self.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(FieldVector::from_parts(
            *self.lattice(),
            self.apply_slice(w.values()),
        ))
    }

    pub(crate) fn apply_slice(&self, w: &[f64]) -> Vec<f64> {
        let lattice = self.lattice();
        let n = lattice.interior_per_side();
        let h = lattice.spacing();
        let h4 = h.powi(4);
        let density: Vec<f64> = w.iter().map(|x| x * x).collect();
        let mut out = match &self.fft {
            Some(fft) => fft.convolve(n, &density),
            None => direct_convolution(&self.table, n, &density),
        };
        out.iter_mut().for_each(|v| *v *= h4);
        out
    }
}

fn direct_convolution(table: &KernelTable, n: usize, density: &[f64]) -> Vec<f64> {
    let width = table.width();
    let reach = table.reach();
    let k = table.values();
    let row = |b: usize, out: &mut [f64]| {
        for (a, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for jb in 0..n {
                let krow = (b + reach - jb) * width + a + reach;
                let drow = &density[jb * n..(jb + 1) * n];
                for (ja, &d) in drow.iter().enumerate() {
                    acc += d * k[krow - ja];
                }
            }
            *slot = acc;
        }
    };
    let mut out = vec![0.0; n * n];
    if n * n >= PARALLEL_THRESHOLD / 4 {
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(b, r)| row(b, r));
    } else {
        out.chunks_mut(n).enumerate().for_each(|(b, r)| row(b, r));
    }
    out
}

/// Which spectral shift the power method uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftRule {
    /// `|H|_1 + 1`, the sum of absolute values of all matrix entries plus one.
    EntrywiseL1,
    /// Largest absolute row sum plus one. Also bounds the spectral radius,
    /// but grows like `1/h^2` instead of `M/h^2`.
    #[default]
    MaxRowSum,
}

/// Matrix-free `H_alpha[z1, z2]` for one component.
#[derive(Debug, Clone)]
pub struct HamiltonianOperator {
    lattice: Lattice,
    stencil: StiffnessStencil,
    external: Vec<f64>,
    self_coupling: f64,
    cross_coupling: f64,
    own_density: Vec<f64>,
    cross_density: Vec<f64>,
    diagonal: Vec<f64>,
}

impl HamiltonianOperator {
    /// `own_density` and `cross_density` are `G0[z_own]` and `G0[z_other]`.
    pub fn new(
        lattice: Lattice,
        external: &DiagonalPotential,
        self_coupling: f64,
        cross_coupling: f64,
        own_density: Vec<f64>,
        cross_density: Vec<f64>,
    ) -> Result<Self> {
        for len in [
            external.entries().len(),
            own_density.len(),
            cross_density.len(),
        ] {
            lattice.check_len(len)?;
        }
        if !(self_coupling >= 0.0 && cross_coupling >= 0.0) {
            return Err(Error::invalid("coupling", "couplings must be nonnegative"));
        }
        let diagonal = external
            .entries()
            .iter()
            .zip(&own_density)
            .zip(&cross_density)
            .map(|((y, g), c)| y + self_coupling * g + cross_coupling * c)
            .collect();
        Ok(Self {
            lattice,
            stencil: StiffnessStencil::default(),
            external: external.entries().to_vec(),
            self_coupling,
            cross_coupling,
            own_density,
            cross_density,
            diagonal,
        })
    }

    /// Operator with no density terms, `(B + Y) / h^2`.
    pub fn linear(lattice: Lattice, external: &DiagonalPotential) -> Result<Self> {
        let zeros = vec![0.0; lattice.interior_count()];
        Self::new(lattice, external, 0.0, 0.0, zeros.clone(), zeros)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.interior_count()
    }

    pub fn stencil(&self) -> &StiffnessStencil {
        &self.stencil
    }

    pub fn external(&self) -> &[f64] {
        &self.external
    }

    pub fn self_coupling(&self) -> f64 {
        self.self_coupling
    }

    pub fn cross_coupling(&self) -> f64 {
        self.cross_coupling
    }

    pub fn own_density(&self) -> &[f64] {
        &self.own_density
    }

    pub fn cross_density(&self) -> &[f64] {
        &self.cross_density
    }

    /// Combined diagonal `Y + theta G0[own] + kappa G0[other]`, before the
    /// `1/h^2` prefactor.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn apply(&self, z: &FieldVector) -> Result<FieldVector> {
        if z.lattice() != &self.lattice {
            return Err(Error::LatticeMismatch);
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_into(z.values(), &mut out)?;
        Ok(FieldVector::from_parts(self.lattice, out))
    }

    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.lattice.check_len(z.len())?;
        self.lattice.check_len(out.len())?;
        let n = self.lattice.interior_per_side();
        self.stencil.apply_into(n, z, out);
        let inv_h2 = self.lattice.spacing().powi(-2);
        for ((o, d), x) in out.iter_mut().zip(&self.diagonal).zip(z) {
            *o = (*o + d * x) * inv_h2;
        }
        Ok(())
    }

    /// Entrywise `|H|_1`, counted exactly from the stencil and the diagonal.
    pub fn entrywise_l1(&self) -> f64 {
        let n = self.lattice.interior_per_side();
        let sum: f64 = (0..self.dim()).map(|j| self.row_abs_sum(n, j)).sum();
        sum * self.lattice.spacing().powi(-2)
    }

    /// `max_i sum_j |H_ij|`.
    pub fn max_row_sum(&self) -> f64 {
        let n = self.lattice.interior_per_side();
        let max = (0..self.dim())
            .map(|j| self.row_abs_sum(n, j))
            .fold(0.0, f64::max);
        max * self.lattice.spacing().powi(-2)
    }

    fn row_abs_sum(&self, n: usize, j: usize) -> f64 {
        (self.stencil.center + self.diagonal[j]).abs()
            + self.stencil.off_diagonal_abs(n, j % n, j / n)
    }

    pub fn shift(&self, rule: ShiftRule) -> f64 {
        match rule {
            ShiftRule::EntrywiseL1 => self.entrywise_l1() + 1.0,
            ShiftRule::MaxRowSum => self.max_row_sum() + 1.0,
        }
    }
}

/// The shift `s = |H|_1 + 1`.
pub fn shift_of(h: &HamiltonianOperator) -> f64 {
    h.shift(ShiftRule::EntrywiseL1)
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}
