//! Batch front end.
//!
//! Subcommands: `verify` (assumption probes), `bounds` (certificate plus
//! rate report), `lower` (lower-bound table only), `sample` (one chain as
//! CSV), `oracle` (grid discretization, SLEM, sandwich verdict), `report`
//! (merge previously written JSON reports).
//!
//! Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 sandwich
//! failure.

use crate::config::{RunConfig, TargetConfig};
use crate::drift::{drift_certificate, verify_minorization_grid, MinorOptions};
use crate::error::{Error, Result};
use crate::glm::{
    logistic_bundle, logistic_constants, poisson_preset, GlmData, LogisticConstants,
    PoissonLowerBound, PriorSpec,
};
use crate::oracle::{discretize, sandwich_check, stationary_and_slem, tv_decay};
use crate::proposal::RadialProposal;
use crate::rates::{
    acceptance_lower, assemble_rate_report, bounded_proposal_lower, default_candidates,
    mode_lower, spectral_lower, spectral_proposal_constants, LowerBoundEntry, LowerBoundMethod,
    RateReport, RateReportOptions, SpectralMode,
};
use crate::report::{self, CertReport, Envelope, Prov, RatesReportJson};
use crate::sampler::{run_chain, ChainConfig, ChainCsv};
use crate::target::{
    gaussian_mixture_bundle, verify_assumptions, AssumptionCheckOptions, TargetBundle,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rwmh-certify",
    version,
    about = "Drift/minorization certificates and convergence-rate bounds for RWMH"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's [output] dir, else "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override (the RWMH_CERTIFY_SEED environment variable wins).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample size override.
    #[arg(long)]
    mc: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the target's certificates numerically; write assumptions.json.
    Verify(CommonArgs),
    /// Compute the certificate and rate bounds; write cert.json + bounds.csv.
    Bounds(CommonArgs),
    /// Compute the lower-bound table; write lower.json + lower.csv.
    Lower(CommonArgs),
    /// Run one chain; write chain.csv.
    Sample(CommonArgs),
    /// Discretize, compute the SLEM and TV decay, run the sandwich check.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// One-sided slack for the sandwich comparisons.
        #[arg(long, default_value_t = 1e-3)]
        slack: f64,
    },
    /// Merge previously written reports into report.json.
    Report(CommonArgs),
}

/// Entry point used by `main` and by tests. Returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Lower(a) => cmd_lower(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Oracle { common, slack } => cmd_oracle(&common, slack),
        Command::Report(a) => cmd_report(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Everything the subcommands need from the configuration.
struct Built {
    cfg: RunConfig,
    bundle: TargetBundle,
    prop: RadialProposal,
    eta: f64,
    sigma_eff: f64,
    seed: u64,
    n_mc: usize,
    out_dir: PathBuf,
    logistic: Option<LogisticConstants>,
    poisson_lower: Option<PoissonLowerBound>,
}

fn build(args: &CommonArgs) -> Result<Built> {
    let cfg = RunConfig::from_path(&args.config)?;
    let seed = cfg.effective_seed(args.seed);
    let n_mc = args.mc.unwrap_or(cfg.pipeline.mc_samples);
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut logistic = None;
    let mut poisson_lower = None;
    let (bundle, eta, sigma_eff) = match &cfg.target {
        TargetConfig::StandardNormal { dim, eta } => {
            let eta = eta.unwrap_or(0.99);
            (
                TargetBundle::standard_normal_with_eta(*dim, eta)?,
                eta,
                1.0,
            )
        }
        TargetConfig::GaussianMixture { a } => {
            let bundle = gaussian_mixture_bundle(*a)?;
            let eta = bundle.curvature().eta;
            let sigma_eff = (0.25 / a.min(1.0) + 0.25).sqrt();
            (bundle, eta, sigma_eff)
        }
        TargetConfig::Logistic { dataset, eta } => {
            let data = GlmData::from_csv_path(dataset)?;
            let probe = logistic_constants(&data.x, &data.y_scalar(), 1e-9)?;
            let eta = eta.unwrap_or(0.5 / probe.lambda2);
            let consts = logistic_constants(&data.x, &data.y_scalar(), eta)?;
            let bundle = logistic_bundle(&data.x, &data.y_scalar(), eta)?;
            logistic = Some(consts);
            (bundle, eta, 1.0)
        }
        TargetConfig::Poisson {
            dataset,
            prior_lambda1,
        } => {
            let data = GlmData::from_csv_path(dataset)?;
            let prior = PriorSpec::isotropic_gaussian(prior_lambda1.unwrap_or(1.0));
            let prop = cfg.proposal_for(data.p)?;
            let (bundle, lb) = poisson_preset(&data.x, &data.y_scalar(), &prior, &prop)?;
            poisson_lower = Some(lb);
            let eta = bundle.curvature().eta;
            let sigma_eff = 1.0 / prior_lambda1.unwrap_or(1.0).sqrt();
            (bundle, eta, sigma_eff)
        }
    };
    let prop = cfg.proposal_for(bundle.dim())?;
    Ok(Built {
        cfg,
        bundle,
        prop,
        eta,
        sigma_eff,
        seed,
        n_mc,
        out_dir,
        logistic,
        poisson_lower,
    })
}

fn cmd_verify(args: &CommonArgs) -> Result<i32> {
    let b = build(args)?;
    let opts = AssumptionCheckOptions {
        radii: b
            .cfg
            .pipeline
            .radii
            .clone()
            .unwrap_or_else(|| AssumptionCheckOptions::defaults(b.bundle.m_star(), b.seed).radii),
        n_directions: b.cfg.pipeline.n_directions,
        seed: b.seed,
        check_log_concavity: b.cfg.pipeline.log_concavity,
    };
    let report_payload = verify_assumptions(&b.bundle, &opts);
    let env = Envelope::new("assumptions", b.seed, &report_payload);
    report::write_json(&b.out_dir.join("assumptions.json"), &env)?;
    println!(
        "assumptions: superexp {} curvature {} envelope {}{}",
        pass_str(report_payload.superexp.pass),
        pass_str(report_payload.curvature.pass),
        pass_str(report_payload.envelope.pass),
        report_payload
            .log_concavity
            .as_ref()
            .map(|c| format!(" log-concavity {}", pass_str(c.pass)))
            .unwrap_or_default()
    );
    Ok(0)
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct BoundsPayload {
    certificate: CertReport,
    rates: RatesReportJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    logistic_constants: Option<LogisticConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poisson_lower: Option<PoissonLowerBound>,
}

fn compute_bounds(b: &Built) -> Result<(crate::drift::DriftMinCert, RateReport)> {
    let params = b.cfg.cone_params(b.eta)?;
    let cert = drift_certificate(&b.bundle, &b.prop, &params)?;
    let rates = assemble_rate_report(
        &cert,
        &b.bundle,
        &b.prop,
        &RateReportOptions {
            candidates: b.cfg.pipeline.candidates.clone(),
            n_mc: b.n_mc,
            seed: b.seed,
            spectral: b.cfg.spectral_info(),
        },
    )?;
    Ok((cert, rates))
}

fn cmd_bounds(args: &CommonArgs) -> Result<i32> {
    let b = build(args)?;
    let (cert, rates) = compute_bounds(&b)?;
    let payload = BoundsPayload {
        certificate: CertReport::from_cert(&cert),
        rates: RatesReportJson::from_report(&rates),
        logistic_constants: b.logistic.clone(),
        poisson_lower: b.poisson_lower,
    };
    let env = Envelope::new("bounds", b.seed, &payload);
    report::write_json(&b.out_dir.join("cert.json"), &env)?;
    let file = std::fs::File::create(b.out_dir.join("bounds.csv"))?;
    crate::rates::write_bounds_csv(file, &rates)?;
    println!(
        "bounds: lambda_tilde={:.6} log_b={:.6e} upper={}",
        cert.lambda_tilde,
        cert.log_b,
        if rates.upper.vacuous {
            "vacuous".to_string()
        } else {
            format!("{:.6}", rates.upper.t_r)
        }
    );
    Ok(0)
}

fn lower_bound_table(b: &Built) -> Result<Vec<LowerBoundEntry>> {
    let candidates = b
        .cfg
        .pipeline
        .candidates
        .clone()
        .unwrap_or_else(|| default_candidates(&b.bundle));
    let mut entries = vec![
        acceptance_lower(&b.bundle, &b.prop, &candidates, b.n_mc.max(10_000), b.seed)?,
        bounded_proposal_lower(&b.bundle, &b.prop, &candidates)?,
        mode_lower(&b.bundle, &b.prop, b.n_mc.max(10_000), b.seed ^ 0x6d6f6465)?,
    ];
    if let Some(info) = b.cfg.spectral_info() {
        if let Some((m1, v0, j_tilde)) = spectral_proposal_constants(&b.prop) {
            let p = b.bundle.dim();
            let d = spectral_lower(SpectralMode::Dirichlet, info.m, m1, info.l, p, v0, j_tilde)?;
            entries.push(LowerBoundEntry {
                method: LowerBoundMethod::SpectralDirichlet,
                value: d,
                vacuous: !(d > 0.0),
                std_error: None,
                note: format!("L={}, J_tilde={j_tilde}", info.l),
            });
            let c = spectral_lower(SpectralMode::Conductance, info.m, m1, info.l, p, v0, j_tilde)?;
            entries.push(LowerBoundEntry {
                method: LowerBoundMethod::SpectralConductance,
                value: c,
                vacuous: !(c > 0.0),
                std_error: None,
                note: format!("m={}, m1={m1}", info.m),
            });
        }
    }
    Ok(entries)
}

#[derive(Serialize)]
struct LowerPayload {
    lower_bounds: Vec<crate::report::LowerBoundJson>,
}

fn cmd_lower(args: &CommonArgs) -> Result<i32> {
    let b = build(args)?;
    let mut entries = lower_bound_table(&b)?;
    if let Some(pl) = b.poisson_lower {
        entries.push(LowerBoundEntry {
            method: LowerBoundMethod::Mode,
            value: pl.value,
            vacuous: !(pl.value > 0.0),
            std_error: None,
            note: format!(
                "bounded proposal at the posterior mode{}",
                if pl.near_vacuous {
                    "; near-vacuous: certifies only slow convergence"
                } else {
                    ""
                }
            ),
        });
    }
    std::fs::create_dir_all(&b.out_dir)?;
    let mut w = csv::Writer::from_writer(std::fs::File::create(b.out_dir.join("lower.csv"))?);
    w.write_record(["method", "value", "metadata"])?;
    for e in &entries {
        let mut meta = e.note.clone();
        if let Some(se) = e.std_error {
            meta = format!("{meta}; se={se:.3e}");
        }
        if e.vacuous {
            meta = format!("{meta}; vacuous");
        }
        w.write_record([e.method.as_str(), &format!("{:.12}", e.value), &meta])?;
    }
    w.flush()?;
    let payload = LowerPayload {
        lower_bounds: entries
            .iter()
            .map(|lb| crate::report::LowerBoundJson {
                method: lb.method.as_str(),
                bound: Prov::plain(lb.value, "rates.lower-bound", &[lb.value]),
                vacuous: lb.vacuous,
                std_error: lb.std_error,
                note: lb.note.clone(),
            })
            .collect(),
    };
    let env = Envelope::new("lower", b.seed, &payload);
    report::write_json(&b.out_dir.join("lower.json"), &env)?;
    let best = entries
        .iter()
        .filter(|e| !e.vacuous)
        .map(|e| e.value)
        .fold(0.0f64, f64::max);
    println!("lower: best non-vacuous bound {best:.6}");
    Ok(0)
}

fn cmd_sample(args: &CommonArgs) -> Result<i32> {
    let b = build(args)?;
    let initial = b
        .cfg
        .pipeline
        .chain_initial
        .clone()
        .unwrap_or_else(|| b.bundle.mode().to_vec());
    let steps = args.mc.unwrap_or(b.cfg.pipeline.chain_steps);
    let chain_cfg = ChainConfig {
        initial,
        steps,
        seed: b.seed,
        record_every: b.cfg.pipeline.record_every,
    };
    let out = run_chain(&b.bundle, &b.prop, &chain_cfg)?;
    std::fs::create_dir_all(&b.out_dir)?;
    let file = std::fs::File::create(b.out_dir.join("chain.csv"))?;
    let mut writer = ChainCsv::new(file, b.bundle.dim());
    writer.write(&out)?;
    println!(
        "sample: {} steps, acceptance rate {:.4}",
        steps, out.acceptance_rate
    );
    Ok(0)
}

#[derive(Serialize)]
struct OraclePayload {
    slem: Prov,
    grid_cells: usize,
    verdict: crate::oracle::SandwichVerdict,
    minorization: crate::drift::MinorReport,
}

fn cmd_oracle(args: &CommonArgs, slack: f64) -> Result<i32> {
    let b = build(args)?;
    let (cert, rates) = compute_bounds(&b)?;
    let grid = b.cfg.grid_for(b.bundle.dim(), b.sigma_eff)?;
    let kernel = discretize(&b.bundle, &b.prop, &grid)?;
    let (pi, slem) = stationary_and_slem(&kernel)?;
    // TV curve from a state off the mode so the slowest mode is excited.
    let start = (kernel.n() * 3) / 4;
    let tv = tv_decay(&kernel, start, 200)?;
    let mut verdict = sandwich_check(&rates, slem, slack);
    if !grid.covers_ball(cert.r_max) {
        verdict.annotations.push(format!(
            "grid extent does not cover the small set B(0, {:.3e}); \
             the SLEM approximates the restricted chain",
            cert.r_max
        ));
    }
    let minor = verify_minorization_grid(
        &cert,
        &b.bundle,
        &b.prop,
        &grid,
        &MinorOptions {
            n_x: b.cfg.pipeline.minor_x_points,
            n_sets: b.cfg.pipeline.minor_sets,
            seed: b.seed,
            tol: 1e-8,
        },
    )?;
    std::fs::create_dir_all(&b.out_dir)?;
    crate::oracle::write_tv_csv(std::fs::File::create(b.out_dir.join("tv.csv"))?, &tv)?;
    crate::oracle::write_spectrum_csv(
        std::fs::File::create(b.out_dir.join("spectrum.csv"))?,
        &kernel,
        32,
    )?;
    let payload = OraclePayload {
        slem: Prov::plain(slem, "oracle.slem", &[grid.n_cells() as f64]),
        grid_cells: grid.n_cells(),
        verdict,
        minorization: minor,
    };
    let env = Envelope::new("oracle", b.seed, &payload);
    report::write_json(&b.out_dir.join("oracle.json"), &env)?;
    let pass = env.payload.verdict.pass;
    let _ = pi;
    println!("slem: {slem:.6}");
    println!("sandwich: {}", pass_str(pass));
    Ok(if pass { 0 } else { 3 })
}

fn read_json_if_present(path: &Path) -> Result<Option<serde_json::Value>> {
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text)?))
    } else {
        Ok(None)
    }
}

#[derive(Serialize)]
struct MergedReport {
    schema_version: u32,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    assumptions: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<serde_json::Value>,
}

fn cmd_report(args: &CommonArgs) -> Result<i32> {
    let b = build(args)?;
    let merged = MergedReport {
        schema_version: report::SCHEMA_VERSION,
        kind: "merged",
        assumptions: read_json_if_present(&b.out_dir.join("assumptions.json"))?,
        bounds: read_json_if_present(&b.out_dir.join("cert.json"))?,
        lower: read_json_if_present(&b.out_dir.join("lower.json"))?,
        oracle: read_json_if_present(&b.out_dir.join("oracle.json"))?,
    };
    if merged.assumptions.is_none()
        && merged.bounds.is_none()
        && merged.lower.is_none()
        && merged.oracle.is_none()
    {
        return Err(Error::Config(format!(
            "no prior reports found under {}",
            b.out_dir.display()
        )));
    }
    report::write_json(&b.out_dir.join("report.json"), &merged)?;
    println!("report: merged into {}", b.out_dir.join("report.json").display());
    Ok(0)
}
