//! The random walk Metropolis-Hastings kernel.
//!
//! One step proposes `y = x + z` with `z` from the radial proposal and
//! accepts with probability `min(1, f(y)/f(x))`. All Hastings ratios are
//! handled in log space; the acceptance decision consumes exactly one
//! uniform draw per step, so a trajectory is a pure function of the seed
//! and the chain configuration.

use crate::error::{Error, Result};
use crate::proposal::RadialProposal;
use crate::rng::{self, CrateRng};
use crate::target::TargetBundle;
use rand::Rng;
use serde::Serialize;

/// Chain run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ChainConfig {
    pub initial: Vec<f64>,
    pub steps: usize,
    pub seed: u64,
    pub record_every: usize,
}

impl ChainConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.initial.len() != dim {
            return Err(Error::DimensionMismatch {
                left: self.initial.len(),
                right: dim,
                context: "chain initial state",
            });
        }
        if self.steps < 1 {
            return Err(Error::InvalidParameter {
                name: "steps",
                value: self.steps as f64,
                constraint: "steps >= 1",
            });
        }
        if self.record_every < 1 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                value: self.record_every as f64,
                constraint: "record_every >= 1",
            });
        }
        Ok(())
    }
}

/// Recorded trajectory. `states[0]` is the initial state (step 0); the
/// accepted flag of a row is the flag of the move that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ChainOutput {
    pub states: Vec<Vec<f64>>,
    pub recorded_steps: Vec<usize>,
    pub accepted_flags: Vec<bool>,
    pub accepted: usize,
    pub acceptance_rate: f64,
    /// Proposals rejected because the log-density was non-finite there.
    pub nonfinite_rejections: usize,
}

/// Outcome of one kernel step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub accepted: bool,
    /// The proposal had a non-finite log-density and was rejected outright.
    pub nonfinite_proposal: bool,
}

/// One RWMH step from `x`. Consumes one increment and one uniform.
pub fn rwmh_step(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    x: &[f64],
    rng: &mut CrateRng,
) -> StepOutcome {
    let z = prop.sample_increment(rng);
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
    let lx = bundle.target().log_density(x);
    let ly = bundle.target().log_density(&y);
    let u: f64 = rng.random();
    if !ly.is_finite() {
        return StepOutcome {
            state: x.to_vec(),
            accepted: false,
            nonfinite_proposal: true,
        };
    }
    // Accept iff u < min(1, exp(ly - lx)), tested as ln u < ly - lx.
    if u.ln() < ly - lx {
        StepOutcome {
            state: y,
            accepted: true,
            nonfinite_proposal: false,
        }
    } else {
        StepOutcome {
            state: x.to_vec(),
            accepted: false,
            nonfinite_proposal: false,
        }
    }
}

/// Run a chain; reproducible for a fixed config.
pub fn run_chain(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    cfg.validate(bundle.dim())?;
    if prop.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            left: prop.dim(),
            right: bundle.dim(),
            context: "run_chain",
        });
    }
    let mut rng = rng::stream_rng(cfg.seed, 0);
    let mut x = cfg.initial.clone();
    let mut states = vec![x.clone()];
    let mut recorded_steps = vec![0usize];
    let mut accepted_flags = vec![false];
    let mut accepted = 0usize;
    let mut nonfinite = 0usize;
    for step in 1..=cfg.steps {
        let out = rwmh_step(bundle, prop, &x, &mut rng);
        if out.accepted {
            accepted += 1;
        }
        if out.nonfinite_proposal {
            nonfinite += 1;
        }
        x = out.state;
        if step % cfg.record_every == 0 {
            states.push(x.clone());
            recorded_steps.push(step);
            accepted_flags.push(out.accepted);
        }
    }
    Ok(ChainOutput {
        states,
        recorded_steps,
        accepted_flags,
        accepted,
        acceptance_rate: accepted as f64 / cfg.steps as f64,
        nonfinite_rejections: nonfinite,
    })
}

/// Monte Carlo estimate of the acceptance probability from `x`:
/// mean of `min(1, f(y)/f(x))` over `y ~ Q(x, .)`, with standard error.
pub fn estimate_acceptance(
    bundle: &TargetBundle,
    prop: &RadialProposal,
    x: &[f64],
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = rng::stream_rng(seed, 0);
    let lx = bundle.target().log_density(x);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let z = prop.sample_increment(&mut rng);
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let ly = bundle.target().log_density(&y);
        let a = if ly.is_finite() {
            (ly - lx).min(0.0).exp()
        } else {
            0.0
        };
        sum += a;
        sum_sq += a * a;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0).max(1.0) * nf;
    (mean, (var / nf).sqrt())
}

/// Write a recorded chain as CSV: `step, x1..xp, accepted`.
pub fn write_chain_csv<W: std::io::Write>(out: &mut ChainCsv<W>, chain: &ChainOutput) -> Result<()> {
    out.write(chain)
}

/// CSV writer wrapper carrying the dimension for the header.
pub struct ChainCsv<W: std::io::Write> {
    writer: csv::Writer<W>,
    dim: usize,
}

impl<W: std::io::Write> ChainCsv<W> {
    pub fn new(inner: W, dim: usize) -> Self {
        Self {
            writer: csv::Writer::from_writer(inner),
            dim,
        }
    }

    pub fn write(&mut self, chain: &ChainOutput) -> Result<()> {
        let mut header = vec!["step".to_string()];
        for i in 1..=self.dim {
            header.push(format!("x{i}"));
        }
        header.push("accepted".to_string());
        self.writer.write_record(&header)?;
        for ((state, &step), &flag) in chain
            .states
            .iter()
            .zip(&chain.recorded_steps)
            .zip(&chain.accepted_flags)
        {
            let mut row = vec![step.to_string()];
            for v in state {
                row.push(format!("{v:.17e}"));
            }
            row.push(if flag { "1" } else { "0" }.to_string());
            self.writer.write_record(&row)?;
        }
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric;

    #[test]
    fn uphill_moves_always_accepted() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let mut rng = rng::stream_rng(5, 0);
        for _ in 0..200 {
            let out = rwmh_step(&bundle, &prop, &[4.0], &mut rng);
            // Moves from 4.0 toward the mode raise the density; whenever the
            // proposal landed closer to zero it must have been accepted.
            if out.state[0].abs() < 4.0 - 1e-12 {
                assert!(out.accepted);
            }
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let bundle = TargetBundle::standard_normal(2).unwrap();
        let prop = RadialProposal::gaussian(2, 0.8).unwrap();
        let cfg = ChainConfig {
            initial: vec![1.0, -1.0],
            steps: 500,
            seed: 7,
            record_every: 1,
        };
        let a = run_chain(&bundle, &prop, &cfg).unwrap();
        let b = run_chain(&bundle, &prop, &cfg).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.accepted, b.accepted);
    }

    #[test]
    fn single_step_bookkeeping() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let cfg = ChainConfig {
            initial: vec![0.0],
            steps: 1,
            seed: 1,
            record_every: 1,
        };
        let out = run_chain(&bundle, &prop, &cfg).unwrap();
        assert_eq!(out.states.len(), 2); // initial plus one recorded step
        assert_eq!(out.recorded_steps, vec![0, 1]);
        let rate = out.acceptance_rate;
        assert!(rate == 0.0 || rate == 1.0);
    }

    #[test]
    fn acceptance_rate_in_expected_band() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let cfg = ChainConfig {
            initial: vec![0.0],
            steps: 100_000,
            seed: 11,
            record_every: 10,
        };
        let out = run_chain(&bundle, &prop, &cfg).unwrap();
        assert!(
            (0.5..0.8).contains(&out.acceptance_rate),
            "rate {}",
            out.acceptance_rate
        );
    }

    #[test]
    fn long_run_moments() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let cfg = ChainConfig {
            initial: vec![0.0],
            steps: 1_000_000,
            seed: 3,
            record_every: 1,
        };
        let out = run_chain(&bundle, &prop, &cfg).unwrap();
        let xs: Vec<f64> = out.states.iter().skip(10_000).map(|s| s[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        // MCSE of the mean with integrated autocorrelation time ~9.
        let mcse = (9.0f64 / n).sqrt();
        assert!(mean.abs() < 4.0 * mcse, "mean {mean} (mcse {mcse})");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn estimate_acceptance_local_moves() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let tiny = RadialProposal::gaussian(1, 1e-8).unwrap();
        let (a, se) = estimate_acceptance(&bundle, &tiny, &[0.3], 2_000, 9);
        assert!(a > 1.0 - 2.0 * se.max(1e-7), "alpha {a}");
    }

    #[test]
    fn estimate_acceptance_at_mode_is_inv_sqrt2() {
        // At the mode of N(0,1) with sigma = 1 the acceptance is exactly
        // E[exp(-z^2/2)] = 1/sqrt(2).
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let (a, se) = estimate_acceptance(&bundle, &prop, &[0.0], 200_000, 12);
        let expect = 1.0 / 2.0f64.sqrt();
        assert!((a - expect).abs() < 4.0 * se, "alpha {a} vs {expect}");
    }

    #[test]
    fn tail_acceptance_above_half() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let (a, _) = estimate_acceptance(&bundle, &prop, &[10.0], 50_000, 21);
        assert!(a > 0.5, "alpha {a}");
    }

    #[test]
    fn detailed_balance_identity() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let mut rng = rng::stream_rng(31, 0);
        use rand::Rng;
        for _ in 0..200 {
            let x = [rng.random_range(-3.0..3.0)];
            let y = [rng.random_range(-3.0..3.0)];
            let fx = bundle.target().log_density(&x).exp();
            let fy = bundle.target().log_density(&y).exp();
            let q = prop.density_at(&x, &y).unwrap();
            let lhs = fx * (fy / fx).min(1.0) * q;
            let rhs = fy * (fx / fy).min(1.0) * q;
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn chain_marginal_matches_direct_draws() {
        let bundle = TargetBundle::standard_normal(1).unwrap();
        let prop = RadialProposal::gaussian(1, 1.0).unwrap();
        let cfg = ChainConfig {
            initial: vec![0.0],
            steps: 110_000,
            seed: 19,
            record_every: 1,
        };
        let out = run_chain(&bundle, &prop, &cfg).unwrap();
        let chain: Vec<f64> = out.states.iter().skip(10_000).map(|s| s[0]).collect();
        let mut rng = rng::stream_rng(20, 1);
        use rand_distr::Distribution;
        let direct: Vec<f64> = (0..100_000)
            .map(|_| rand_distr::StandardNormal.sample(&mut rng))
            .collect();
        let d = numeric::ks_two_sample(&chain, &direct);
        assert!(d < 0.02, "KS {d}");
    }
}
