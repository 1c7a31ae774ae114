//! Ground-truth machinery on small instances.
//!
//! For p <= 2 the RWMH kernel is discretized on a grid by the
//! diagonal-absorption rule: off-diagonal mass `alpha(x_i, x_j) q(|x_i -
//! x_j|) vol(cell)`, with the diagonal absorbing the remainder exactly as
//! Metropolis rejection does. The discrete chain's stationary vector, its
//! second-largest eigenvalue modulus (SLEM), and total-variation decay
//! curves then serve as an empirical oracle for every reported bound: the
//! sandwich check asserts `lower <= SLEM <= upper` up to a slack.
//!
//! The discrete SLEM approximates the continuous rate; there is no
//! quantitative link between the two here, so the sandwich is a consistency
//! check with one-sided slack, not an exact identity.

use crate::error::{Error, Result};
use crate::numeric;
use crate::proposal::RadialProposal;
use crate::rates::{LowerBoundMethod, RateReport};
use crate::target::TargetBundle;
use nalgebra::DMatrix;
use serde::Serialize;

/// Regular grid on an interval or a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Grid {
    One { lo: f64, hi: f64, n: usize },
    Two { lo: [f64; 2], hi: [f64; 2], n: [usize; 2] },
}

impl Grid {
    pub fn one_dim(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 11 {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: n as f64,
                constraint: "hi > lo and n >= 11",
            });
        }
        Ok(Grid::One { lo, hi, n })
    }

    pub fn two_dim(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || n[0] < 11 || n[1] < 11 {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: n[0].min(n[1]) as f64,
                constraint: "hi > lo per axis and n >= 11 per axis",
            });
        }
        Ok(Grid::Two { lo, hi, n })
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::One { .. } => 1,
            Grid::Two { .. } => 2,
        }
    }

    pub fn n_cells(&self) -> usize {
        match self {
            Grid::One { n, .. } => *n,
            Grid::Two { n, .. } => n[0] * n[1],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        match self {
            Grid::One { lo, hi, n } => (hi - lo) / *n as f64,
            Grid::Two { lo, hi, n } => {
                (hi[0] - lo[0]) / n[0] as f64 * ((hi[1] - lo[1]) / n[1] as f64)
            }
        }
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        match self {
            Grid::One { lo, hi, n } => {
                let w = (hi - lo) / *n as f64;
                vec![lo + (cell as f64 + 0.5) * w]
            }
            Grid::Two { lo, hi, n } => {
                let (i, j) = (cell / n[1], cell % n[1]);
                let wx = (hi[0] - lo[0]) / n[0] as f64;
                let wy = (hi[1] - lo[1]) / n[1] as f64;
                vec![lo[0] + (i as f64 + 0.5) * wx, lo[1] + (j as f64 + 0.5) * wy]
            }
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.n_cells()).map(|i| self.center(i)).collect()
    }

    pub fn cell_bounds(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            Grid::One { lo, hi, n } => {
                let w = (hi - lo) / *n as f64;
                (vec![lo + cell as f64 * w], vec![lo + (cell as f64 + 1.0) * w])
            }
            Grid::Two { lo, hi, n } => {
                let (i, j) = (cell / n[1], cell % n[1]);
                let wx = (hi[0] - lo[0]) / n[0] as f64;
                let wy = (hi[1] - lo[1]) / n[1] as f64;
                (
                    vec![lo[0] + i as f64 * wx, lo[1] + j as f64 * wy],
                    vec![lo[0] + (i as f64 + 1.0) * wx, lo[1] + (j as f64 + 1.0) * wy],
                )
            }
        }
    }

    /// Volume of `cell` intersected with the centered ball of radius `r`.
    pub fn cell_ball_overlap(&self, cell: usize, r: f64) -> f64 {
        let (lo, hi) = self.cell_bounds(cell);
        match self.dim() {
            1 => (hi[0].min(r) - lo[0].max(-r)).max(0.0),
            2 => {
                if numeric::norm(&lo).max(numeric::norm(&hi)) <= r
                    && numeric::norm(&[lo[0], hi[1]]) <= r
                    && numeric::norm(&[hi[0], lo[1]]) <= r
                {
                    return (hi[0] - lo[0]) * (hi[1] - lo[1]);
                }
                let chord = |x: f64| -> f64 {
                    if x.abs() >= r {
                        return 0.0;
                    }
                    let half = (r * r - x * x).sqrt();
                    (hi[1].min(half) - lo[1].max(-half)).max(0.0)
                };
                numeric::adaptive_simpson(&chord, lo[0].max(-r), hi[0].min(r).max(lo[0].max(-r)), 1e-10)
            }
            _ => unreachable!(),
        }
    }

    /// True when the grid extent contains the centered ball of radius `r`.
    pub fn covers_ball(&self, r: f64) -> bool {
        match self {
            Grid::One { lo, hi, .. } => *lo <= -r && *hi >= r,
            Grid::Two { lo, hi, .. } => {
                lo[0] <= -r && lo[1] <= -r && hi[0] >= r && hi[1] >= r
            }
        }
    }
}

/// Row-stochastic discretization of the kernel.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub matrix: DMatrix<f64>,
    pub centers: Vec<Vec<f64>>,
    pub cell_volume: f64,
}

impl DiscreteKernel {
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// `max |pi_i P_ij - pi_j P_ji|` over all pairs.
    pub fn reversibility_residual(&self, pi: &[f64]) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((pi[i] * self.matrix[(i, j)] - pi[j] * self.matrix[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Discretize the kernel: `P_ij = alpha(x_i, x_j) q(|x_i - x_j|) vol` off
/// the diagonal, with the diagonal absorbing the rejection mass. Errors if
/// any diagonal entry would be negative (grid too coarse).
pub fn discretize(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    grid: &Grid,
) -> Result<DiscreteKernel> {
    if bundle.dim() > 2 {
        return Err(Error::OracleDimension { dim: bundle.dim() });
    }
    if grid.dim() != bundle.dim() || prop.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            left: grid.dim(),
            right: bundle.dim(),
            context: "discretize",
        });
    }
    let centers = grid.centers();
    let vol = grid.cell_volume();
    let n = centers.len();
    let logf: Vec<f64> = centers.iter().map(|x| bundle.target().log_density(x)).collect();
    if logf.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogDensity {
            at: vec![],
            context: "discretize",
        });
    }
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let ln_alpha = (logf[j] - logf[i]).min(0.0);
            let ln_q = prop.radial_log_density(numeric::dist(&centers[i], &centers[j]));
            let mass = (ln_alpha + ln_q).exp() * vol;
            p[(i, j)] = mass;
            row_sum += mass;
        }
        let diag = 1.0 - row_sum;
        if diag < -1e-12 {
            return Err(Error::NegativeDiagonal {
                cell: i,
                value: diag,
            });
        }
        p[(i, i)] = diag.max(0.0);
    }
    Ok(DiscreteKernel {
        matrix: p,
        centers,
        cell_volume: vol,
    })
}

/// Stationary vector (power iteration to 1e-12) and the SLEM via the
/// eigen-decomposition of the reversibility-symmetrized matrix.
pub fn stationary_and_slem(kernel: &DiscreteKernel) -> Result<(Vec<f64>, f64)> {
    let n = kernel.n();
    let p = &kernel.matrix;
    let mut pi = vec![1.0 / n as f64; n];
    let mut converged = false;
    // Documented tolerance is 1e-12; iterate past it so the stationary error
    // stays far below small TV distances computed against pi.
    for _ in 0..300_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let pi_i = pi[i];
            if pi_i == 0.0 {
                continue;
            }
            for j in 0..n {
                next[j] += pi_i * p[(i, j)];
            }
        }
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        let delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        pi = next;
        if delta < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "stationary power iteration",
            iterations: 300_000,
            last: vec![],
        });
    }
    if pi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "pi",
            value: 0.0,
            constraint: "strictly positive stationary vector",
        });
    }
    // Symmetrize: S = D^{1/2} P D^{-1/2}; exact under reversibility.
    let sqrt_pi: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sqrt_pi[i] * p[(i, j)] / sqrt_pi[j];
        }
    }
    let sym = (&s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut moduli: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let slem = moduli[1];
    if !(slem < 1.0 - 1e-10) {
        return Err(Error::InvalidParameter {
            name: "slem",
            value: slem,
            constraint: "slem < 1 (kernel must mix)",
        });
    }
    Ok((pi, slem))
}

/// Total-variation distance curve `TV_n = 0.5 || e_start P^n - pi ||_1`.
pub fn tv_decay(kernel: &DiscreteKernel, start_index: usize, n_steps: usize) -> Result<Vec<f64>> {
    let n = kernel.n();
    if start_index >= n {
        return Err(Error::InvalidParameter {
            name: "start_index",
            value: start_index as f64,
            constraint: "start within grid",
        });
    }
    let (pi, _) = stationary_and_slem(kernel)?;
    let p = &kernel.matrix;
    let mut dist = vec![0.0; n];
    dist[start_index] = 1.0;
    let mut out = Vec::with_capacity(n_steps + 1);
    for _ in 0..=n_steps {
        let tv = 0.5
            * dist
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        out.push(tv);
        let mut next = vec![0.0; n];
        for i in 0..n {
            let d = dist[i];
            if d == 0.0 {
                continue;
            }
            for j in 0..n {
                next[j] += d * p[(i, j)];
            }
        }
        dist = next;
    }
    Ok(out)
}

/// One sandwich comparison line.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichLine {
    pub method: LowerBoundMethod,
    pub value: f64,
    pub ok: bool,
    /// `slem + slack - value`; negative means the bound exceeds the oracle.
    pub margin: f64,
}

/// Verdict of the sandwich test `lower <= SLEM <= upper` (up to slack).
#[derive(Debug, Clone, Serialize)]
pub struct SandwichVerdict {
    pub slem: f64,
    pub slack: f64,
    pub pass: bool,
    pub lower_checks: Vec<SandwichLine>,
    pub upper_checked: bool,
    pub upper_ok: Option<bool>,
    pub upper_margin: Option<f64>,
    pub annotations: Vec<String>,
}

/// Check every non-vacuous reported bound against the oracle SLEM.
pub fn sandwich_check(report: &RateReport, slem: f64, slack: f64) -> SandwichVerdict {
    let mut lower_checks = Vec::new();
    let mut annotations = Vec::new();
    let mut pass = true;
    for lb in &report.lower_bounds {
        if lb.vacuous {
            annotations.push(format!(
                "{} lower bound is vacuous (clamped at zero); skipped",
                lb.method.as_str()
            ));
            continue;
        }
        let ok = lb.value <= slem + slack;
        if !ok {
            pass = false;
        }
        lower_checks.push(SandwichLine {
            method: lb.method,
            value: lb.value,
            ok,
            margin: slem + slack - lb.value,
        });
    }
    let (upper_checked, upper_ok, upper_margin) = if report.upper.vacuous {
        annotations.push(
            "upper bound is vacuous (t_R >= 1); slem <= upper holds trivially and is skipped"
                .to_string(),
        );
        (false, None, None)
    } else {
        let ok = slem <= report.upper.t_r + slack;
        if !ok {
            pass = false;
        }
        (true, Some(ok), Some(report.upper.t_r + slack - slem))
    };
    SandwichVerdict {
        slem,
        slack,
        pass,
        lower_checks,
        upper_checked,
        upper_ok,
        upper_margin,
        annotations,
    }
}

/// Write a TV decay curve as CSV (`step, tv`).
pub fn write_tv_csv<W: std::io::Write>(writer: W, tv: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "tv"])?;
    for (i, v) in tv.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the leading spectrum moduli as CSV (`rank, modulus`).
pub fn write_spectrum_csv<W: std::io::Write>(
    writer: W,
    kernel: &DiscreteKernel,
    count: usize,
) -> Result<()> {
    let (pi, _) = stationary_and_slem(kernel)?;
    let n = kernel.n();
    let sqrt_pi: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sqrt_pi[i] * kernel.matrix[(i, j)] / sqrt_pi[j];
        }
    }
    let sym = (&s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut moduli: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "modulus"])?;
    for (i, m) in moduli.iter().take(count).enumerate() {
        w.write_record([i.to_string(), format!("{m:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
