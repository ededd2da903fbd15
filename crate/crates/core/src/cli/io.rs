//! Text formats written by the sweep driver.
//!
//! Density grids are gnuplot scanline files: one `x y value` row per interior
//! node, `y` varying fastest, a blank line between consecutive `x` values.
//! State files use the same layout with both coefficient vectors, `x y z1 z2`,
//! and reproduce a state bit-for-bit when read back.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::eigensolver::FieldVector;
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::observables::SweepRecord;

pub const SWEEP_HEADER: &str =
    "# kappa,mu1,mu2,D0,kappaD0,E_total,E_decoupled,outer_iters,pm_iters,resid1,resid2,seconds";
pub const RESIDUAL_HEADER: &str = "# kappa,n,alpha,epsilon,mu,residual";

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn scanlines(lattice: &Lattice, columns: impl Fn(usize) -> Vec<f64>) -> String {
    let n = lattice.interior_per_side();
    let mut out = String::new();
    for a in 0..n {
        if a > 0 {
            out.push('\n');
        }
        for b in 0..n {
            let j = a + b * n;
            let (x, y) = lattice.position_of_pair(a, b);
            let _ = write!(out, "{} {}", num(x), num(y));
            for v in columns(j) {
                let _ = write!(out, " {}", num(v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn density_text(z: &FieldVector) -> String {
    scanlines(z.lattice(), |j| vec![z.values()[j] * z.values()[j]])
}

pub fn write_density(z: &FieldVector, path: &Path) -> Result<()> {
    fs::write(path, density_text(z)).map_err(|e| Error::io(path, e))
}

pub fn write_state(fields: &[FieldVector; 2], path: &Path) -> Result<()> {
    let text = scanlines(fields[0].lattice(), |j| {
        vec![fields[0].values()[j], fields[1].values()[j]]
    });
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses scanline rows into per-node value columns, checking node positions
/// against `lattice`.
fn read_columns(path: &Path, lattice: &Lattice, width: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let n = lattice.interior_per_side();
    let h = lattice.spacing();
    let mut columns = vec![vec![0.0; lattice.interior_count()]; width];
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad =
            |what: &str| Error::InvalidInput(format!("{}:{}: {what}", path.display(), lineno + 1));
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("not a number"))?;
        if fields.len() != 2 + width {
            return Err(bad(&format!("expected {} columns", 2 + width)));
        }
        if row >= lattice.interior_count() {
            return Err(bad("more rows than interior nodes"));
        }
        let (a, b) = (row / n, row % n);
        let (x, y) = lattice.position_of_pair(a, b);
        if (fields[0] - x).abs() > 1e-9 * h || (fields[1] - y).abs() > 1e-9 * h {
            return Err(bad("node position does not match the lattice"));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            col[a + b * n] = fields[2 + c];
        }
        row += 1;
    }
    if row != lattice.interior_count() {
        return Err(Error::InvalidInput(format!(
            "{}: found {row} rows, lattice has {} interior nodes",
            path.display(),
            lattice.interior_count()
        )));
    }
    Ok(columns)
}

/// Reads a density file back into nonnegative coefficients `sqrt(|z|^2)`.
pub fn read_density(path: &Path, lattice: &Lattice) -> Result<FieldVector> {
    let mut cols = read_columns(path, lattice, 1)?;
    let values = cols
        .remove(0)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    FieldVector::new(*lattice, values)
}

pub fn read_state(path: &Path, lattice: &Lattice) -> Result<[FieldVector; 2]> {
    let mut cols = read_columns(path, lattice, 2)?;
    let z2 = cols.pop().expect("two columns");
    let z1 = cols.pop().expect("two columns");
    Ok([
        FieldVector::new(*lattice, z1)?,
        FieldVector::new(*lattice, z2)?,
    ])
}

pub fn sweep_row(r: &SweepRecord, timing: bool) -> String {
    let seconds = if timing {
        r.wall_time.as_secs_f64()
    } else {
        0.0
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        num(r.kappa),
        num(r.mu[0]),
        num(r.mu[1]),
        num(r.d0),
        num(r.kappa_d0),
        num(r.energy.total),
        num(r.energy.decoupled),
        r.outer_iterations,
        r.pm_iterations,
        num(r.residuals[0]),
        num(r.residuals[1]),
        num(seconds),
    )
}

/// Parsed row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    pub mu: [f64; 2],
    pub d0: f64,
    pub kappa_d0: f64,
    pub total: f64,
    pub decoupled: f64,
    pub outer_iterations: usize,
    pub pm_iterations: usize,
    pub residuals: [f64; 2],
    pub seconds: f64,
}

pub fn parse_sweep_table(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::InvalidInput(format!("sweep table line {}: malformed row", lineno + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(bad());
        }
        let f = |i: usize| cols[i].trim().parse::<f64>().map_err(|_| bad());
        let u = |i: usize| cols[i].trim().parse::<usize>().map_err(|_| bad());
        rows.push(SweepRow {
            kappa: f(0)?,
            mu: [f(1)?, f(2)?],
            d0: f(3)?,
            kappa_d0: f(4)?,
            total: f(5)?,
            decoupled: f(6)?,
            outer_iterations: u(7)?,
            pm_iterations: u(8)?,
            residuals: [f(9)?, f(10)?],
            seconds: f(11)?,
        });
    }
    Ok(rows)
}

pub fn density_file_name(kappa: f64, alpha: usize) -> String {
    format!("density_kappa_{kappa}_{alpha}.dat")
}

pub fn state_file_name(kappa: f64) -> String {
    format!("state_kappa_{kappa}.dat")
}

/// gnuplot script: surface and contour plot of every density file, then the
/// Coulomb energy against `kappa`.
pub fn plot_script(kappas: &[f64]) -> String {
    let mut s = String::from(
        "# gnuplot script; run from the output directory: gnuplot plot.gp\n\
         set terminal pngcairo size 900,700\n\
         set pm3d\n\
         set contour base\n\
         set cntrparam levels 10\n\
         set hidden3d\n\
         set xlabel 'x'\n\
         set ylabel 'y'\n\
         set zlabel '|z|^2'\n",
    );
    for &kappa in kappas {
        for alpha in 1..=2 {
            let data = density_file_name(kappa, alpha);
            let _ = writeln!(
                s,
                "set output 'density_kappa_{kappa}_{alpha}.png'\n\
                 set title 'component {alpha}, kappa = {kappa}'\n\
                 splot '{data}' using 1:2:3 with pm3d notitle"
            );
        }
    }
    s.push_str(
        "unset pm3d\n\
         unset contour\n\
         set datafile separator ','\n\
         set output 'coulomb_energy.png'\n\
         set title 'Coulomb energy D0 against kappa'\n\
         set xlabel 'kappa'\n\
         set ylabel 'D0'\n\
         plot 'sweep.csv' using 1:4 with linespoints title 'D0', \\\n\
         \x20    'sweep.csv' using 1:5 with linespoints axes x1y2 title 'kappa D0'\n",
    );
    s
}
