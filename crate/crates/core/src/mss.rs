//! Method of successive substitution for the coupled lumped system.
//!
//! One outer step freezes both density terms at level `n`, computes the linear
//! ground state of each component with the shifted power method, rescales it
//! to the prescribed mass and evaluates `mu` and the nonlinear residual with
//! the operators rebuilt at level `n + 1`.

use std::path::PathBuf;
use std::sync::Arc;

use crate::assembly::{dot, Convolver, DiagonalPotential, HamiltonianOperator};
use crate::eigensolver::{FieldVector, PmResult, PowerMethod};
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::potentials::HarmonicPotential;

/// Relative size of the node-seeded perturbation added to power-method starts.
const START_PERTURBATION: f64 = 1e-12;

/// Couplings and mass constraints of the two-component system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    pub self_coupling: [f64; 2],
    pub cross_coupling: f64,
    pub mass: [f64; 2],
}

impl CouplingSpec {
    pub fn new(self_coupling: [f64; 2], cross_coupling: f64, mass: [f64; 2]) -> Result<Self> {
        let spec = Self {
            self_coupling,
            cross_coupling,
            mass,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for t in self.self_coupling {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid("theta", "self-coupling must be nonnegative"));
            }
        }
        if !(self.cross_coupling.is_finite() && self.cross_coupling >= 0.0) {
            return Err(Error::invalid(
                "kappa",
                "interaction strength must be nonnegative",
            ));
        }
        for n in self.mass {
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::invalid("mass", "masses must be positive"));
            }
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        self.cross_coupling = kappa;
        self.validate()?;
        Ok(self)
    }
}

/// Lattice, traps, interaction kernel and couplings of one problem instance.
#[derive(Debug, Clone)]
pub struct HartreeSystem {
    lattice: Lattice,
    traps: [HarmonicPotential; 2],
    external: [DiagonalPotential; 2],
    convolver: Arc<Convolver>,
    couplings: CouplingSpec,
}

impl HartreeSystem {
    pub fn new(
        traps: [HarmonicPotential; 2],
        convolver: Arc<Convolver>,
        couplings: CouplingSpec,
    ) -> Result<Self> {
        couplings.validate()?;
        let lattice = *convolver.lattice();
        let external = traps.map(|t| DiagonalPotential::harmonic(&lattice, &t));
        Ok(Self {
            lattice,
            traps,
            external,
            convolver,
            couplings,
        })
    }

    /// Same problem at another interaction strength; the kernel is shared.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut next = self.clone();
        next.couplings = self.couplings.with_kappa(kappa)?;
        Ok(next)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn traps(&self) -> &[HarmonicPotential; 2] {
        &self.traps
    }

    pub fn external(&self, alpha: usize) -> &DiagonalPotential {
        &self.external[alpha]
    }

    pub fn convolver(&self) -> &Convolver {
        &self.convolver
    }

    pub fn couplings(&self) -> &CouplingSpec {
        &self.couplings
    }

    /// `[G0[z1], G0[z2]]`.
    pub fn densities(&self, fields: &[FieldVector; 2]) -> Result<[Vec<f64>; 2]> {
        for f in fields {
            if f.lattice() != &self.lattice {
                return Err(Error::LatticeMismatch);
            }
        }
        let (a, b) = rayon::join(
            || self.convolver.apply_slice(fields[0].values()),
            || self.convolver.apply_slice(fields[1].values()),
        );
        Ok([a, b])
    }

    /// `H_alpha` with the given `[G0[z1], G0[z2]]`.
    pub fn hamiltonian(
        &self,
        alpha: usize,
        densities: &[Vec<f64>; 2],
    ) -> Result<HamiltonianOperator> {
        let other = 1 - alpha;
        HamiltonianOperator::new(
            self.lattice,
            &self.external[alpha],
            self.couplings.self_coupling[alpha],
            self.couplings.cross_coupling,
            densities[alpha].clone(),
            densities[other].clone(),
        )
    }
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MssOptions {
    pub power_method: PowerMethod,
    pub tolerance: f64,
    pub max_outer: usize,
    /// `z <- (1 - w) z_old + w z_new`, renormalized. `1.0` is plain Picard.
    pub mixing: f64,
}

impl Default for MssOptions {
    fn default() -> Self {
        Self {
            power_method: PowerMethod::default(),
            tolerance: 1e-8,
            max_outer: 10_000,
            mixing: 1.0,
        }
    }
}

impl MssOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tol_mss", "tolerance must be positive"));
        }
        if !(self.power_method.tolerance > 0.0) {
            return Err(Error::invalid("tol_pm", "tolerance must be positive"));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::invalid("mixing", "mixing must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Iterate of the outer loop.
#[derive(Debug, Clone)]
pub struct MssState {
    pub fields: [FieldVector; 2],
    pub mu: [f64; 2],
    pub outer_iteration: usize,
    pub residuals: [f64; 2],
    densities: Option<[Vec<f64>; 2]>,
}

impl MssState {
    /// Wraps a pair, rescaling each component to its mass unless it already
    /// matches to 1e-13. `mu` and the residuals are unknown until the first step.
    pub fn from_fields(mut fields: [FieldVector; 2], mass: [f64; 2]) -> Result<Self> {
        if fields[0].lattice() != fields[1].lattice() {
            return Err(Error::LatticeMismatch);
        }
        for (f, n) in fields.iter_mut().zip(mass) {
            if !((f.mass() - n).abs() <= 1e-13 * n) {
                f.normalize_mass(n)?;
            }
            if f.values().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidInput(
                    "initial fields must be nonnegative".into(),
                ));
            }
        }
        Ok(Self {
            fields,
            mu: [f64::NAN; 2],
            outer_iteration: 0,
            residuals: [f64::INFINITY; 2],
            densities: None,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        self.fields[0].lattice()
    }

    /// Same pair, counters reset; used to seed the next point of a sweep.
    pub fn restart(&self) -> Self {
        Self {
            fields: self.fields.clone(),
            mu: [f64::NAN; 2],
            outer_iteration: 0,
            residuals: [f64::INFINITY; 2],
            densities: self.densities.clone(),
        }
    }
}

/// How to seed the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Uniform,
    /// Oscillator ground-state profile of each component's own trap.
    Gaussian,
    FromFile(PathBuf),
}

impl InitMode {
    pub fn label(&self) -> String {
        match self {
            Self::Uniform => "uniform".into(),
            Self::Gaussian => "gaussian".into(),
            Self::FromFile(p) => format!("from-file:{}", p.display()),
        }
    }
}

pub fn initial_state(system: &HartreeSystem, mode: &InitMode) -> Result<MssState> {
    let lattice = *system.lattice();
    let mass = system.couplings().mass;
    let fields = match mode {
        InitMode::Uniform => {
            let f = FieldVector::from_parts(lattice, vec![1.0; lattice.interior_count()]);
            [f.clone(), f]
        }
        InitMode::Gaussian => system.traps().map(|t| gaussian_profile(&lattice, &t)),
        InitMode::FromFile(path) => crate::cli::io::read_state(path, &lattice)?,
    };
    MssState::from_fields(fields, mass)
}

fn gaussian_profile(lattice: &Lattice, trap: &HarmonicPotential) -> FieldVector {
    // exp(-sqrt(c) r^2 / 2) is the ground state of -Laplace + c r^2
    let side = lattice.side_length();
    let rate = if trap.strength > 0.0 {
        trap.strength.sqrt() / 2.0
    } else {
        8.0 / (side * side)
    };
    let values = lattice
        .nodes()
        .map(|(_, x, y)| {
            let dx = x - trap.center.0;
            let dy = y - trap.center.1;
            // floor keeps every entry positive on the grid
            (-rate * (dx * dx + dy * dy)).exp().max(1e-300)
        })
        .collect();
    FieldVector::from_parts(*lattice, values)
}

/// Record of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer_iteration: usize,
    /// Linear ground energies `epsilon` of the frozen operators.
    pub epsilon: [f64; 2],
    pub mu: [f64; 2],
    pub residuals: [f64; 2],
    pub pm_iterations: [usize; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MssHistory {
    pub records: Vec<OuterRecord>,
}

impl MssHistory {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn pm_iterations(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.pm_iterations[0] + r.pm_iterations[1])
            .sum()
    }
}

/// Output of one outer step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: MssState,
    pub power: [PmResult; 2],
}

impl StepOutcome {
    pub fn record(&self) -> OuterRecord {
        OuterRecord {
            outer_iteration: self.state.outer_iteration,
            epsilon: [self.power[0].energy, self.power[1].energy],
            mu: self.state.mu,
            residuals: self.state.residuals,
            pm_iterations: [self.power[0].iterations, self.power[1].iterations],
        }
    }
}

/// Converged outer loop.
#[derive(Debug, Clone)]
pub struct MssSolution {
    pub state: MssState,
    pub history: MssHistory,
}

fn perturbed_start(z: &FieldVector) -> FieldVector {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let scale = START_PERTURBATION * z.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let values = z
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| v + scale * (1.0 + (j as f64 * GOLDEN).fract()))
        .collect();
    FieldVector::from_parts(*z.lattice(), values)
}

/// `mu_alpha` and the nonlinear relative residual of `z` under `op`.
///
/// `mu = <z, H z>_2 / N` and the residual is `|(H - mu) z|_2 / |mu|`, both in
/// the lumped inner product.
pub fn nonlinear_residual(
    op: &HamiltonianOperator,
    z: &FieldVector,
    mass: f64,
) -> Result<(f64, f64)> {
    let h = op.lattice().spacing();
    let hz = op.apply(z)?;
    let mu = h * h * dot(z.values(), hz.values()) / mass;
    if mu == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let r: f64 = hz
        .values()
        .iter()
        .zip(z.values())
        .map(|(a, b)| {
            let d = a - mu * b;
            d * d
        })
        .sum();
    Ok((mu, h * r.sqrt() / mu.abs()))
}

pub fn mss_step(
    state: &MssState,
    system: &HartreeSystem,
    options: &MssOptions,
) -> Result<StepOutcome> {
    options.validate()?;
    if state.lattice() != system.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let mass = system.couplings().mass;
    let h = system.lattice().spacing();

    let frozen = match &state.densities {
        Some(d) => d.clone(),
        None => system.densities(&state.fields)?,
    };
    let ops = [
        system.hamiltonian(0, &frozen)?,
        system.hamiltonian(1, &frozen)?,
    ];
    let solve = |alpha: usize| {
        options
            .power_method
            .solve(&ops[alpha], &perturbed_start(&state.fields[alpha]))
    };
    let (p0, p1) = rayon::join(|| solve(0), || solve(1));
    let power = [p0?, p1?];

    let mut fields = [0, 1].map(|alpha| {
        let scale = mass[alpha].sqrt() / h;
        let fresh = power[alpha]
            .ground_vector
            .values()
            .iter()
            .map(|v| (v * scale).max(0.0));
        let w = options.mixing;
        let values = if w == 1.0 {
            fresh.collect()
        } else {
            fresh
                .zip(state.fields[alpha].values())
                .map(|(new, old)| (1.0 - w) * old + w * new)
                .collect()
        };
        FieldVector::from_parts(*system.lattice(), values)
    });
    for (f, n) in fields.iter_mut().zip(mass) {
        f.normalize_mass(n)?;
    }
    for (alpha, f) in fields.iter().enumerate() {
        let err = (f.mass() - mass[alpha]).abs() / mass[alpha];
        if err > 1e-12 {
            return Err(Error::Internal(format!(
                "component {} mass off by {err:e} after renormalization",
                alpha + 1
            )));
        }
    }

    let densities = system.densities(&fields)?;
    let mut mu = [0.0; 2];
    let mut residuals = [0.0; 2];
    for alpha in 0..2 {
        let op = system.hamiltonian(alpha, &densities)?;
        (mu[alpha], residuals[alpha]) = nonlinear_residual(&op, &fields[alpha], mass[alpha])?;
    }

    Ok(StepOutcome {
        state: MssState {
            fields,
            mu,
            outer_iteration: state.outer_iteration + 1,
            residuals,
            densities: Some(densities),
        },
        power,
    })
}

pub fn mss_solve(
    initial: MssState,
    system: &HartreeSystem,
    options: &MssOptions,
) -> Result<MssSolution> {
    mss_solve_with(initial, system, options, |_| {})
}

/// `mss_solve` with a callback invoked after every outer step.
pub fn mss_solve_with(
    initial: MssState,
    system: &HartreeSystem,
    options: &MssOptions,
    mut on_step: impl FnMut(&StepOutcome),
) -> Result<MssSolution> {
    options.validate()?;
    let mut state = initial;
    let mut history = MssHistory::default();
    for _ in 0..options.max_outer {
        let outcome = mss_step(&state, system, options)?;
        on_step(&outcome);
        history.records.push(outcome.record());
        state = outcome.state;
        if state.residuals.iter().all(|&r| r <= options.tolerance) {
            return Ok(MssSolution { state, history });
        }
    }
    Err(Error::MssNonConvergence {
        history: Box::new(history),
    })
}
