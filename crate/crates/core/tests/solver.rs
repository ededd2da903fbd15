mod common;

use std::sync::Arc;

use approx::assert_relative_eq;
use common::DenseProblem;
use hartree_core::assembly::DiagonalPotential;
use hartree_core::eigensolver::{power_iterate, residual, PowerIteration};
use hartree_core::mss::{self, initial_state, mss_solve, mss_step};
use hartree_core::observables::{overlap, EnergyBreakdown};
use hartree_core::*;
use nalgebra::{DMatrix, DVector};

fn system(m: usize, traps: [(f64, (f64, f64)); 2], theta: [f64; 2], kappa: f64) -> HartreeSystem {
    let l = Lattice::new(1.0, m).unwrap();
    let v = YukawaPotential::new(common::SCREENING, common::REGULARIZATION)
        .unwrap()
        .into();
    let conv = Arc::new(Convolver::new(
        KernelTable::build(&v, &l),
        ConvolutionPath::Direct,
    ));
    let traps = traps.map(|(c, center)| HarmonicPotential::new(center, c).unwrap());
    HartreeSystem::new(
        traps,
        conv,
        CouplingSpec::new(theta, kappa, [1.0, 1.0]).unwrap(),
    )
    .unwrap()
}

const CENTERED: [(f64, (f64, f64)); 2] = [(1e5, (0.5, 0.5)), (1e3, (0.5, 0.5))];

fn tight_options() -> MssOptions {
    MssOptions {
        power_method: PowerMethod {
            tolerance: 1e-12,
            ..PowerMethod::default()
        },
        ..MssOptions::default()
    }
}

#[test]
fn power_method_on_smallest_lattice() {
    // m = 4 leaves a 2x2 interior; the symmetric trap makes the ground
    // state the constant vector with energy (B row sum + h^2 V) / h^2
    let l = Lattice::new(1.0, 4).unwrap();
    let trap = HarmonicPotential::new((0.5, 0.5), 10.0).unwrap();
    let op = HamiltonianOperator::linear(l, &DiagonalPotential::harmonic(&l, &trap)).unwrap();
    let start = FieldVector::new(l, vec![1.0, 0.2, 0.3, 0.9]).unwrap();
    let res = power_iterate(&op, &start, 1e-12, 10_000).unwrap();
    let h: f64 = 1.0 / 3.0;
    let v = 10.0 * 2.0 * (0.5 - h).powi(2);
    let expected = (8.0 / 3.0 - 3.0 / 3.0 + h * h * v) / (h * h);
    assert_relative_eq!(res.energy, expected, max_relative = 1e-12);
    for z in res.ground_vector.values() {
        assert_relative_eq!(*z, 0.5, max_relative = 1e-10);
    }
}

#[test]
fn exact_eigenvector_stops_after_one_step() {
    let m = 7;
    let l = Lattice::new(1.0, m).unwrap();
    let dense = DenseProblem::new(1.0, m, CENTERED, [0.0; 2], 0.0);
    let zero = DVector::zeros(dense.dim());
    let (_, v) = dense.ground(&dense.hamiltonian(1, [&zero, &zero]));
    let trap = HarmonicPotential::new((0.5, 0.5), 1e3).unwrap();
    let op = HamiltonianOperator::linear(l, &DiagonalPotential::harmonic(&l, &trap)).unwrap();
    let res = power_iterate(
        &op,
        &FieldVector::new(l, v.as_slice().to_vec()).unwrap(),
        1e-10,
        100,
    )
    .unwrap();
    assert_eq!(res.iterations, 1);
}

#[test]
fn residual_depends_only_on_the_unshifted_energy() {
    let l = Lattice::new(1.0, 6).unwrap();
    let trap = HarmonicPotential::new((0.3, 0.7), 1e3).unwrap();
    let op = HamiltonianOperator::linear(l, &DiagonalPotential::harmonic(&l, &trap)).unwrap();
    let mut z = FieldVector::new(l, (0..16).map(|i| (i as f64).sin() + 1.5).collect()).unwrap();
    z = z.scaled(1.0 / z.norm());
    let energy = z.dot(&op.apply(&z).unwrap());
    let r1 = residual(&op, &z, energy - 10.0, 10.0).unwrap();
    let r2 = residual(
        &op,
        &z,
        energy - op.entrywise_l1() - 1.0,
        op.entrywise_l1() + 1.0,
    )
    .unwrap();
    assert_relative_eq!(r1, r2, max_relative = 1e-12);

    // direct evaluation of |(H^ - e^) z| / |e^ + s| with the literal shift
    let s = hartree_core::assembly::shift_of(&op);
    let hz = op.apply(&z).unwrap();
    let shifted_hz: Vec<f64> = hz
        .values()
        .iter()
        .zip(z.values())
        .map(|(a, b)| a - s * b)
        .collect();
    let e_hat = energy - s;
    let num: f64 = shifted_hz
        .iter()
        .zip(z.values())
        .map(|(a, b)| (a - e_hat * b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert_relative_eq!(r1, num / energy.abs(), max_relative = 1e-9);
}

#[test]
fn power_iterates_lower_the_energy() {
    let l = Lattice::new(1.0, 12).unwrap();
    let trap = HarmonicPotential::new((0.5, 0.5), 1e3).unwrap();
    let op = HamiltonianOperator::linear(l, &DiagonalPotential::harmonic(&l, &trap)).unwrap();
    let start = FieldVector::new(l, vec![1.0; 100]).unwrap();
    let mut it = PowerIteration::new(&op, &start, op.shift(ShiftRule::MaxRowSum)).unwrap();
    let mut previous = f64::INFINITY;
    for _ in 0..500 {
        let step = it.step().unwrap();
        assert!(step.energy <= previous + 1e-9 * previous.abs().min(1e12));
        previous = step.energy;
    }
}

#[test]
fn literal_shift_reaches_the_same_ground_state() {
    let m = 6;
    let l = Lattice::new(1.0, m).unwrap();
    let trap = HarmonicPotential::new((0.5, 0.5), 1e3).unwrap();
    let op = HamiltonianOperator::linear(l, &DiagonalPotential::harmonic(&l, &trap)).unwrap();
    let start = FieldVector::new(l, vec![1.0; 16]).unwrap();
    let pm = |rule| {
        PowerMethod {
            tolerance: 1e-10,
            max_iter: 2_000_000,
            shift_rule: rule,
        }
        .solve(&op, &start)
        .unwrap()
    };
    let a = pm(ShiftRule::EntrywiseL1);
    let b = pm(ShiftRule::MaxRowSum);
    assert_relative_eq!(a.energy, b.energy, max_relative = 1e-9);
    assert!(common::rel_err(a.ground_vector.values(), b.ground_vector.values()) < 1e-7);
    assert!(a.iterations > b.iterations);
}

#[test]
fn three_steps_match_dense_iteration() {
    let m = 8;
    let s = system(m, CENTERED, [0.0; 2], 0.5);
    let dense = DenseProblem::new(1.0, m, CENTERED, [0.0; 2], 0.5);
    let mut state = initial_state(&s, &InitMode::Uniform).unwrap();
    let mut fields = [0, 1].map(|a| DVector::from_vec(state.fields[a].values().to_vec()));
    for _ in 0..3 {
        state = mss_step(&state, &s, &tight_options()).unwrap().state;
        fields = dense.step([&fields[0], &fields[1]]);
    }
    for a in 0..2 {
        let err = common::rel_err(state.fields[a].values(), fields[a].as_slice());
        assert!(err < 1e-8, "component {a}: {err:e}");
    }
    // mu against the dense Rayleigh quotient at level n + 1
    for a in 0..2 {
        let hmat = dense.hamiltonian(a, [&fields[0], &fields[1]]);
        let z = &fields[a];
        let mu = dense.h * dense.h * z.dot(&(&hmat * z));
        assert_relative_eq!(state.mu[a], mu, max_relative = 1e-9);
    }
}

#[test]
fn decoupled_problem_converges_immediately() {
    let s = system(12, CENTERED, [0.0; 2], 0.0);
    let sol = mss_solve(
        initial_state(&s, &InitMode::Gaussian).unwrap(),
        &s,
        &MssOptions::default(),
    )
    .unwrap();
    assert!(sol.history.outer_iterations() <= 2);
    let dense = DenseProblem::new(1.0, 12, CENTERED, [0.0; 2], 0.0);
    let zero = DVector::zeros(dense.dim());
    for a in 0..2 {
        let (eig, _) = dense.ground(&dense.hamiltonian(a, [&zero, &zero]));
        assert_relative_eq!(sol.state.mu[a], eig, max_relative = 1e-8);
    }
}

#[test]
fn identical_components_stay_identical() {
    let traps = [(1e3, (0.5, 0.5)); 2];
    let s = system(12, traps, [0.5, 0.5], 3.0);
    let sol = mss_solve(
        initial_state(&s, &InitMode::Uniform).unwrap(),
        &s,
        &MssOptions::default(),
    )
    .unwrap();
    assert_eq!(sol.state.fields[0], sol.state.fields[1]);
    assert_eq!(sol.state.mu[0], sol.state.mu[1]);
}

#[test]
fn swapping_traps_swaps_the_solution() {
    let a = [(1e4, (0.4, 0.5)), (1e3, (0.6, 0.55))];
    let b = [a[1], a[0]];
    let sa = system(12, a, [0.2, 0.0], 5.0);
    let sb = system(12, b, [0.0, 0.2], 5.0);
    let solve = |s: &HartreeSystem| {
        mss_solve(
            initial_state(s, &InitMode::Uniform).unwrap(),
            s,
            &MssOptions::default(),
        )
        .unwrap()
    };
    let (xa, xb) = (solve(&sa), solve(&sb));
    for k in 0..2 {
        assert!(
            common::rel_err(xa.state.fields[k].values(), xb.state.fields[1 - k].values()) < 1e-7
        );
        assert_relative_eq!(xa.state.mu[k], xb.state.mu[1 - k], max_relative = 1e-8);
    }
}

fn converged(m: usize, theta: [f64; 2], kappa: f64) -> (HartreeSystem, MssSolution) {
    let s = system(m, CENTERED, theta, kappa);
    let sol = mss_solve(
        initial_state(&s, &InitMode::Gaussian).unwrap(),
        &s,
        &MssOptions::default(),
    )
    .unwrap();
    (s, sol)
}

#[test]
fn chemical_potential_identity_with_self_coupling() {
    let (s, sol) = converged(17, [2.0, 1.0], 3.0);
    let e = EnergyBreakdown::evaluate(&s, &sol.state.fields).unwrap();
    for a in 0..2 {
        assert_relative_eq!(
            e.mass_times_mu(a, &s),
            sol.state.mu[a],
            max_relative = 1e-10
        );
    }
    assert_relative_eq!(e.total, e.decoupled + e.interaction, max_relative = 1e-14);
}

#[test]
fn energy_grows_along_a_sweep() {
    let mut last = f64::NEG_INFINITY;
    for kappa in [0.0, 1.0, 5.0, 25.0] {
        let (s, sol) = converged(15, [0.0; 2], kappa);
        let e = EnergyBreakdown::evaluate(&s, &sol.state.fields)
            .unwrap()
            .total;
        assert!(e >= last * (1.0 - 10.0 * 1e-8));
        last = e;
    }
}

#[test]
fn solver_beats_half_domain_bumps() {
    let m = 15;
    for kappa in [0.5, 10.0] {
        let (s, sol) = converged(m, [0.0; 2], kappa);
        let l = *s.lattice();
        let bump = |left: bool| {
            let values = l
                .nodes()
                .map(|(_, x, y)| {
                    let inside = if left { x < 0.5 } else { x > 0.5 };
                    if inside {
                        let u = if left { 2.0 * x } else { 2.0 * x - 1.0 };
                        (std::f64::consts::PI * u).sin() * (std::f64::consts::PI * y).sin()
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut f = FieldVector::new(l, values).unwrap();
            f.normalize_mass(1.0).unwrap();
            f
        };
        let trial = [bump(true), bump(false)];
        let e_trial = EnergyBreakdown::evaluate(&s, &trial).unwrap().total;
        let e = EnergyBreakdown::evaluate(&s, &sol.state.fields)
            .unwrap()
            .total;
        assert!(e <= e_trial + 10.0 * 1e-8 * e.abs());
        // a pair without cross repulsion bounds from below
        let e0 = converged(m, [0.0; 2], 0.0).1.state.mu.iter().sum::<f64>();
        assert!(e >= e0 * (1.0 - 1e-8));
    }
}

#[test]
fn stopping_contract_holds_on_converged_states() {
    let (s, sol) = converged(17, [0.0; 2], 10.0);
    let densities = s.densities(&sol.state.fields).unwrap();
    for a in 0..2 {
        let op = s.hamiltonian(a, &densities).unwrap();
        let (mu, r) = mss::nonlinear_residual(&op, &sol.state.fields[a], 1.0).unwrap();
        assert!(r <= 1e-8);
        assert_eq!(mu, sol.state.mu[a]);
        assert!((sol.state.fields[a].mass() - 1.0).abs() <= 1e-12);
        assert!(sol.state.fields[a].values().iter().all(|&v| v >= 0.0));
    }
    assert!(overlap(&sol.state.fields[0], &sol.state.fields[1]) > 0.0);
}

#[test]
fn mixing_reaches_the_same_fixed_point() {
    let s = system(12, CENTERED, [0.0; 2], 20.0);
    let plain = mss_solve(
        initial_state(&s, &InitMode::Uniform).unwrap(),
        &s,
        &MssOptions::default(),
    )
    .unwrap();
    let damped = mss_solve(
        initial_state(&s, &InitMode::Uniform).unwrap(),
        &s,
        &MssOptions {
            mixing: 0.5,
            ..MssOptions::default()
        },
    )
    .unwrap();
    for a in 0..2 {
        assert!(
            common::rel_err(
                damped.state.fields[a].values(),
                plain.state.fields[a].values()
            ) < 1e-6
        );
    }
}

#[test]
fn dense_stiffness_has_constant_nullspace_in_the_interior() {
    let k: DMatrix<f64> = common::stiffness(9);
    let ones = DVector::from_element(49, 1.0);
    let kz = &k * ones;
    // row for the central node
    assert!(kz[24].abs() < 1e-14);
}
