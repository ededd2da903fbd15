//! Coulomb energy, energy breakdown and per-sweep-point records.

use std::time::Duration;

use crate::assembly::{dot, Convolver, StiffnessStencil};
use crate::eigensolver::FieldVector;
use crate::error::{Error, Result};
use crate::mss::{HartreeSystem, MssSolution};

/// `D0[z1, z2] = <z1, diag(G0[z2]) z1>`.
pub fn coulomb_d0(z1: &FieldVector, z2: &FieldVector, convolver: &Convolver) -> Result<f64> {
    if z1.lattice() != convolver.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let g = convolver.apply(z2)?;
    Ok(d0_from_density(z1.values(), g.values()))
}

/// `D0` when `G0[z2]` is already available.
pub fn d0_from_density(z1: &[f64], g0_of_z2: &[f64]) -> f64 {
    z1.iter().zip(g0_of_z2).map(|(z, g)| z * z * g).sum()
}

/// Discrete energy functional split into its parts.
///
/// All quadratic forms are Euclidean pairings of the assembled matrices
/// (before the `1/h^2` factor), i.e. lumped quadratures of the continuum
/// integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `<z, B z>`.
    pub kinetic: [f64; 2],
    /// `<z, Y z>`.
    pub external: [f64; 2],
    /// `(theta / 2) D0[z, z]`.
    pub self_energy: [f64; 2],
    /// `kappa D0[z1, z2]`.
    pub interaction: f64,
    pub total: f64,
    /// `total - interaction`.
    pub decoupled: f64,
    pub d0_self: [f64; 2],
    pub d0_cross: f64,
}

impl EnergyBreakdown {
    pub fn evaluate(system: &HartreeSystem, fields: &[FieldVector; 2]) -> Result<Self> {
        let lattice = system.lattice();
        for f in fields {
            if f.lattice() != lattice {
                return Err(Error::LatticeMismatch);
            }
        }
        let n = lattice.interior_per_side();
        let couplings = system.couplings();
        let g0 = system.densities(fields)?;
        let stencil = StiffnessStencil::default();

        let mut kinetic = [0.0; 2];
        let mut external = [0.0; 2];
        let mut self_energy = [0.0; 2];
        let mut d0_self = [0.0; 2];
        for alpha in 0..2 {
            let z = fields[alpha].values();
            let mut bz = vec![0.0; z.len()];
            stencil.apply_into(n, z, &mut bz);
            kinetic[alpha] = dot(z, &bz);
            external[alpha] = z
                .iter()
                .zip(system.external(alpha).entries())
                .map(|(v, y)| v * v * y)
                .sum();
            d0_self[alpha] = d0_from_density(z, &g0[alpha]);
            self_energy[alpha] = 0.5 * couplings.self_coupling[alpha] * d0_self[alpha];
        }
        let d0_cross = d0_from_density(fields[0].values(), &g0[1]);
        let interaction = couplings.cross_coupling * d0_cross;
        let decoupled: f64 = (0..2)
            .map(|a| kinetic[a] + external[a] + self_energy[a])
            .sum();
        Ok(Self {
            kinetic,
            external,
            self_energy,
            interaction,
            total: decoupled + interaction,
            decoupled,
            d0_self,
            d0_cross,
        })
    }

    /// Right-hand side of `N mu = <z,Bz> + <z,Yz> + theta D0[z,z] + kappa D0[z1,z2]`.
    pub fn mass_times_mu(&self, alpha: usize, system: &HartreeSystem) -> f64 {
        let c = system.couplings();
        self.kinetic[alpha]
            + self.external[alpha]
            + c.self_coupling[alpha] * self.d0_self[alpha]
            + c.cross_coupling * self.d0_cross
    }
}

/// Observables of one converged point of an interaction-strength sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub kappa: f64,
    pub mu: [f64; 2],
    pub d0: f64,
    pub kappa_d0: f64,
    pub energy: EnergyBreakdown,
    pub outer_iterations: usize,
    pub pm_iterations: usize,
    pub residuals: [f64; 2],
    pub wall_time: Duration,
}

impl SweepRecord {
    pub fn from_solution(
        system: &HartreeSystem,
        solution: &MssSolution,
        wall_time: Duration,
    ) -> Result<Self> {
        let energy = EnergyBreakdown::evaluate(system, &solution.state.fields)?;
        let kappa = system.couplings().cross_coupling;
        Ok(Self {
            kappa,
            mu: solution.state.mu,
            d0: energy.d0_cross,
            kappa_d0: kappa * energy.d0_cross,
            energy,
            outer_iterations: solution.history.outer_iterations(),
            pm_iterations: solution.history.pm_iterations(),
            residuals: solution.state.residuals,
            wall_time,
        })
    }
}

/// `integral of min(|phi1|^2, |phi2|^2)` in lumped quadrature.
pub fn overlap(z1: &FieldVector, z2: &FieldVector) -> f64 {
    let h2 = z1.lattice().spacing().powi(2);
    h2 * z1
        .values()
        .iter()
        .zip(z2.values())
        .map(|(a, b)| (a * a).min(b * b))
        .sum::<f64>()
}
