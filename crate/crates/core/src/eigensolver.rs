//! Shifted power method for the ground state of a fixed Hamiltonian.
//!
//! With `s` bounding the spectral radius, every eigenvalue of `H - s` lies in
//! `(-2s, 0)` and the ground state of `H` becomes the dominant eigenvector of
//! the shifted operator.

use crate::assembly::{dot, HamiltonianOperator, ShiftRule};
use crate::error::{Error, Result};
use crate::grid::Lattice;

/// Coefficients of one component in the nodal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    lattice: Lattice,
    values: Vec<f64>,
}

impl FieldVector {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        lattice.check_len(values.len())?;
        Ok(Self { lattice, values })
    }

    pub(crate) fn from_parts(lattice: Lattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lattice.interior_count());
        Self { lattice, values }
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Self {
            lattice,
            values: vec![0.0; lattice.interior_count()],
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
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

    /// Euclidean norm `|z|`.
    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    /// Lumped L2 norm `|z|_2 = h |z|`.
    pub fn l2_norm(&self) -> f64 {
        self.lattice.spacing() * self.norm()
    }

    /// `|z|_2^2`, the mass of the component.
    pub fn mass(&self) -> f64 {
        self.lattice.spacing().powi(2) * dot(&self.values, &self.values)
    }

    pub fn dot(&self, other: &FieldVector) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn scaled(&self, factor: f64) -> FieldVector {
        Self::from_parts(
            self.lattice,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Flips the sign so that the entry of largest magnitude is positive.
    pub fn canonicalize_sign(&mut self) {
        let pivot =
            self.values
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            self.values.iter_mut().for_each(|v| *v = -*v);
        }
    }

    /// Rescales to lumped mass `mass`. Fails on the zero vector.
    pub fn normalize_mass(&mut self, mass: f64) -> Result<()> {
        let current = self.mass();
        if !(current > 0.0 && current.is_finite()) {
            return Err(Error::InvalidInput("cannot normalize a zero field".into()));
        }
        let factor = (mass / current).sqrt();
        self.values.iter_mut().for_each(|v| *v *= factor);
        Ok(())
    }
}

/// Outcome of a converged power iteration.
#[derive(Debug, Clone)]
pub struct PmResult {
    /// Euclidean-normalized ground vector, largest entry positive.
    pub ground_vector: FieldVector,
    pub shifted_energy: f64,
    pub energy: f64,
    pub shift: f64,
    pub iterations: usize,
    pub final_residual: f64,
}

/// `|(H^ - e^) z| / |e^ + s|` for a Euclidean-unit `z`.
///
/// Evaluated as `|H z - (e^ + s) z| / |e^ + s|`, which is the same quotient
/// and only depends on `e^ + s`.
pub fn residual(
    h: &HamiltonianOperator,
    z: &FieldVector,
    shifted_energy: f64,
    shift: f64,
) -> Result<f64> {
    let energy = shifted_energy + shift;
    if energy == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let hz = h.apply(z)?;
    Ok(residual_norm(hz.values(), z.values(), energy) / energy.abs())
}

fn residual_norm(hz: &[f64], z: &[f64], energy: f64) -> f64 {
    hz.iter()
        .zip(z)
        .map(|(a, b)| {
            let r = a - energy * b;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// One step of the shifted iteration, as observed after normalization.
#[derive(Debug, Clone, Copy)]
pub struct PowerStep {
    pub iteration: usize,
    /// `<z, H z>` of the new iterate.
    pub energy: f64,
    pub shifted_energy: f64,
    pub residual: f64,
}

/// Stepwise shifted power iteration `z <- H^ z / |H^ z|`.
pub struct PowerIteration<'a> {
    op: &'a HamiltonianOperator,
    shift: f64,
    z: Vec<f64>,
    hz: Vec<f64>,
    iteration: usize,
}

impl<'a> PowerIteration<'a> {
    pub fn new(op: &'a HamiltonianOperator, start: &FieldVector, shift: f64) -> Result<Self> {
        if start.lattice() != op.lattice() {
            return Err(Error::LatticeMismatch);
        }
        let norm = start.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput(
                "power method start vector is zero".into(),
            ));
        }
        let z: Vec<f64> = start.values().iter().map(|v| v / norm).collect();
        let mut hz = vec![0.0; z.len()];
        op.apply_into(&z, &mut hz)?;
        Ok(Self {
            op,
            shift,
            z,
            hz,
            iteration: 0,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn current(&self) -> &[f64] {
        &self.z
    }

    /// Advances one iterate and reports the energy and residual of the new one.
    pub fn step(&mut self) -> Result<PowerStep> {
        // invariant: hz == H z for the current iterate
        let s = self.shift;
        for (z, hz) in self.z.iter_mut().zip(&self.hz) {
            *z = hz - s * *z;
        }
        let norm = dot(&self.z, &self.z).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Internal("power iterate collapsed to zero".into()));
        }
        self.z.iter_mut().for_each(|v| *v /= norm);
        self.iteration += 1;

        self.op.apply_into(&self.z, &mut self.hz)?;
        let energy = dot(&self.z, &self.hz);
        if energy == 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        let residual = residual_norm(&self.hz, &self.z, energy) / energy.abs();
        Ok(PowerStep {
            iteration: self.iteration,
            energy,
            shifted_energy: energy - s,
            residual,
        })
    }
}

/// Power method settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMethod {
    pub tolerance: f64,
    pub max_iter: usize,
    pub shift_rule: ShiftRule,
}

impl Default for PowerMethod {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 200_000,
            shift_rule: ShiftRule::default(),
        }
    }
}

impl PowerMethod {
    pub fn solve(&self, op: &HamiltonianOperator, start: &FieldVector) -> Result<PmResult> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tol_pm", "tolerance must be positive"));
        }
        let shift = op.shift(self.shift_rule);
        let mut iter = PowerIteration::new(op, start, shift)?;
        let mut last = f64::INFINITY;
        while iter.iteration < self.max_iter {
            let step = iter.step()?;
            last = step.residual;
            if step.residual <= self.tolerance {
                let mut ground_vector = FieldVector::from_parts(*op.lattice(), iter.z);
                ground_vector.canonicalize_sign();
                return Ok(PmResult {
                    ground_vector,
                    shifted_energy: step.shifted_energy,
                    energy: step.energy,
                    shift,
                    iterations: step.iteration,
                    final_residual: step.residual,
                });
            }
        }
        Err(Error::PowerMethodNonConvergence {
            iterations: self.max_iter,
            residual: last,
        })
    }
}

/// Power method with the given tolerance, iteration cap and default shift rule.
pub fn power_iterate(
    op: &HamiltonianOperator,
    start: &FieldVector,
    tolerance: f64,
    max_iter: usize,
) -> Result<PmResult> {
    PowerMethod {
        tolerance,
        max_iter,
        ..PowerMethod::default()
    }
    .solve(op, start)
}
