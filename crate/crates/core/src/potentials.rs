//! External traps and the interaction kernel.

use crate::error::{Error, Result};
use crate::grid::Lattice;

/// Isotropic harmonic trap `c ((x - a)^2 + (y - b)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPotential {
    pub center: (f64, f64),
    pub strength: f64,
}

impl HarmonicPotential {
    pub fn new(center: (f64, f64), strength: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::invalid(
                "strength",
                "trap strength must be nonnegative",
            ));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::invalid("center", "trap center must be finite"));
        }
        Ok(Self { center, strength })
    }

    pub fn eval(&self, (x, y): (f64, f64)) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        self.strength * (dx * dx + dy * dy)
    }
}

/// Regularized Yukawa kernel `exp(-screening r) / (r + regularization)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YukawaPotential {
    screening: f64,
    regularization: f64,
}

impl YukawaPotential {
    pub fn new(screening: f64, regularization: f64) -> Result<Self> {
        if !(screening.is_finite() && screening >= 0.0) {
            return Err(Error::invalid("screening", "screening must be nonnegative"));
        }
        check_regularization(regularization)?;
        Ok(Self {
            screening,
            regularization,
        })
    }

    pub fn screening(&self) -> f64 {
        self.screening
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        (-self.screening * r).exp() / (r + self.regularization)
    }

    pub fn eval(&self, (x, y): (f64, f64)) -> f64 {
        self.eval_radius(x.hypot(y))
    }
}

fn check_regularization(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "regularization",
            "regularization must be positive",
        ))
    }
}

/// Radial interaction kernels with a finite value at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionPotential {
    Yukawa(YukawaPotential),
    /// `1 / (r^exponent + regularization)`, a smoothed Coulomb-type `|x|^-exponent`.
    RegularizedPower {
        exponent: f64,
        regularization: f64,
    },
}

impl InteractionPotential {
    pub fn regularized_power(exponent: f64, regularization: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::invalid("exponent", "exponent must be positive"));
        }
        check_regularization(regularization)?;
        Ok(Self::RegularizedPower {
            exponent,
            regularization,
        })
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        match self {
            Self::Yukawa(y) => y.eval_radius(r),
            Self::RegularizedPower {
                exponent,
                regularization,
            } => 1.0 / (r.powf(*exponent) + regularization),
        }
    }

    pub fn eval(&self, (x, y): (f64, f64)) -> f64 {
        self.eval_radius(x.hypot(y))
    }

    /// Value at `r = 0`, which bounds the kernel from above.
    pub fn peak(&self) -> f64 {
        self.eval_radius(0.0)
    }
}

impl From<YukawaPotential> for InteractionPotential {
    fn from(y: YukawaPotential) -> Self {
        Self::Yukawa(y)
    }
}

/// Kernel values `V(h d1, h d2)` for every offset between two interior nodes,
/// `d1, d2` in `[-(n-1), n-1]` with `n = m - 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    lattice: Lattice,
    reach: usize,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn build(potential: &InteractionPotential, lattice: &Lattice) -> Self {
        let n = lattice.interior_per_side();
        let reach = n - 1;
        let width = 2 * reach + 1;
        let h = lattice.spacing();

        // evaluate on the canonical octant so the table carries the square's
        // symmetries exactly
        let mut octant = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..=a {
                let v = potential.eval_radius((a as f64 * h).hypot(b as f64 * h));
                octant[a * n + b] = if v < f64::MIN_POSITIVE { 0.0 } else { v };
            }
        }

        let mut values = vec![0.0; width * width];
        for (k, slot) in values.iter_mut().enumerate() {
            let d1 = (k % width).abs_diff(reach);
            let d2 = (k / width).abs_diff(reach);
            *slot = octant[d1.max(d2) * n + d1.min(d2)];
        }
        Self {
            lattice: *lattice,
            reach,
            values,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Largest offset magnitude along one axis, `m - 3`.
    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Side length of the offset table, `2 (m - 3) + 1`.
    pub fn width(&self) -> usize {
        2 * self.reach + 1
    }

    pub fn at(&self, d1: isize, d2: isize) -> f64 {
        let r = self.reach as isize;
        assert!(
            d1.abs() <= r && d2.abs() <= r,
            "kernel offset ({d1}, {d2}) out of reach {r}"
        );
        let w = self.width() as isize;
        self.values[((d1 + r) + (d2 + r) * w) as usize]
    }

    /// Raw table, first offset index fastest.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
