//! Uniform square lattice on `(0, D)^2` and the interior-node numbering.
//!
//! Only interior nodes carry unknowns (Dirichlet-zero boundary). Interior node
//! `(m1, m2)` with `0 <= m1, m2 < m - 2` has linear index `m1 + m2 * (m - 2)`
//! and sits at `((m1 + 1) h, (m2 + 1) h)`.

use crate::error::{Error, Result};

/// Square lattice with `m` nodes per side (boundary included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    side: f64,
    nodes: usize,
}

impl Lattice {
    pub fn new(side_length: f64, nodes_per_side: usize) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::invalid("side_length", "must be positive and finite"));
        }
        if nodes_per_side < 4 {
            return Err(Error::invalid(
                "nodes",
                format!("need at least 4 nodes per side, got {nodes_per_side}"),
            ));
        }
        Ok(Self {
            side: side_length,
            nodes: nodes_per_side,
        })
    }

    pub fn side_length(&self) -> f64 {
        self.side
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes
    }

    /// Lattice spacing `h = D / (m - 1)`.
    pub fn spacing(&self) -> f64 {
        self.side / (self.nodes - 1) as f64
    }

    pub fn interior_per_side(&self) -> usize {
        self.nodes - 2
    }

    /// Number of unknowns `M = (m - 2)^2`.
    pub fn interior_count(&self) -> usize {
        let n = self.interior_per_side();
        n * n
    }

    pub fn tau(&self, m1: usize, m2: usize) -> Result<usize> {
        let n = self.interior_per_side();
        if m1 >= n {
            return Err(Error::IndexRange {
                index: m1,
                bound: n,
            });
        }
        if m2 >= n {
            return Err(Error::IndexRange {
                index: m2,
                bound: n,
            });
        }
        Ok(m1 + m2 * n)
    }

    pub fn tau_inv(&self, j: usize) -> Result<(usize, usize)> {
        self.check_index(j)?;
        let n = self.interior_per_side();
        Ok((j % n, j / n))
    }

    pub fn node_position(&self, j: usize) -> Result<(f64, f64)> {
        let (m1, m2) = self.tau_inv(j)?;
        Ok(self.position_of_pair(m1, m2))
    }

    /// Coordinates of interior pair `(m1, m2)`; no range check.
    pub(crate) fn position_of_pair(&self, m1: usize, m2: usize) -> (f64, f64) {
        let h = self.spacing();
        ((m1 + 1) as f64 * h, (m2 + 1) as f64 * h)
    }

    /// Iterator over `(j, x, y)` for every interior node in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let n = self.interior_per_side();
        (0..self.interior_count()).map(move |j| {
            let (x, y) = self.position_of_pair(j % n, j / n);
            (j, x, y)
        })
    }

    pub fn check_index(&self, j: usize) -> Result<()> {
        let bound = self.interior_count();
        if j >= bound {
            Err(Error::IndexRange { index: j, bound })
        } else {
            Ok(())
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.interior_count();
        if len != expected {
            Err(Error::Dimension {
                expected,
                actual: len,
            })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(m: usize) -> Lattice {
        Lattice::new(1.0, m).unwrap()
    }

    #[test]
    fn tau_examples() {
        let l = lat(10);
        assert_eq!(l.tau(0, 0).unwrap(), 0);
        assert_eq!(l.tau(3, 2).unwrap(), 19);
        assert_eq!(l.tau(7, 7).unwrap(), 63);
        assert_eq!(l.interior_count(), 64);
    }

    #[test]
    fn tau_inv_examples() {
        let l = lat(10);
        assert_eq!(l.tau_inv(0).unwrap(), (0, 0));
        assert_eq!(l.tau_inv(19).unwrap(), (3, 2));
        assert_eq!(l.tau_inv(63).unwrap(), (7, 7));
    }

    #[test]
    fn out_of_range_indices() {
        let l = lat(10);
        assert!(matches!(l.tau(8, 0), Err(Error::IndexRange { .. })));
        assert!(matches!(l.tau(0, 8), Err(Error::IndexRange { .. })));
        assert!(matches!(l.tau_inv(64), Err(Error::IndexRange { .. })));
        assert!(matches!(l.node_position(64), Err(Error::IndexRange { .. })));
    }

    #[test]
    fn node_positions() {
        let l = lat(10);
        let (x, y) = l.node_position(0).unwrap();
        assert!((x - 1.0 / 9.0).abs() < 1e-15 && (y - 1.0 / 9.0).abs() < 1e-15);
        let (x, y) = l.node_position(63).unwrap();
        assert!((x - 8.0 / 9.0).abs() < 1e-15 && (y - 8.0 / 9.0).abs() < 1e-15);

        // m = 11: interior 9x9, center pair (4, 4)
        let l = lat(11);
        let j = l.tau(4, 4).unwrap();
        let (x, y) = l.node_position(j).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Lattice::new(0.0, 10).is_err());
        assert!(Lattice::new(-1.0, 10).is_err());
        assert!(Lattice::new(1.0, 3).is_err());
        assert!(Lattice::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn spacing_consistent_with_side() {
        for m in [4, 5, 17, 65, 129] {
            let l = Lattice::new(2.5, m).unwrap();
            let back = l.spacing() * (m - 1) as f64;
            assert!((back - 2.5).abs() <= f64::EPSILON * 2.5);
            assert_eq!(l.interior_count(), (m - 2) * (m - 2));
        }
    }

    proptest! {
        #[test]
        fn tau_is_bijective(m in 4usize..40, seed in 0usize..10_000) {
            let l = lat(m);
            let j = seed % l.interior_count();
            let (a, b) = l.tau_inv(j).unwrap();
            prop_assert_eq!(l.tau(a, b).unwrap(), j);
            let n = l.interior_per_side();
            let p = (seed % n, (seed / n) % n);
            prop_assert_eq!(l.tau_inv(l.tau(p.0, p.1).unwrap()).unwrap(), p);
        }

        #[test]
        fn nodes_stay_inside(m in 4usize..40, side in 0.1f64..10.0, seed in 0usize..10_000) {
            let l = Lattice::new(side, m).unwrap();
            let h = l.spacing();
            let (x, y) = l.node_position(seed % l.interior_count()).unwrap();
            let tol = 1e-12 * side;
            prop_assert!(x >= h - tol && x <= side - h + tol);
            prop_assert!(y >= h - tol && y <= side - h + tol);
        }
    }
}
