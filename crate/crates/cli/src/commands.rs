use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use usp_core::datasets::BUILTIN_NAMES;
use usp_core::experiments::{self, Experiment, Scale};
use usp_core::io::{export_results, load_dataset, GridSpec, Mode, PriorRule, ResultsRecord, RunConfig, V0Base, RUN_CONFIG_SCHEMA};
use usp_core::sampler::SamplerConfig;
use usp_core::{run_chain, CoverageResult, RngStream};

pub enum CliError {
    Usage(String),
    /// Exit code 2 without a single underlying error.
    Numeric(String),
    Core(usp_core::Error),
}

impl From<usp_core::Error> for CliError {
    fn from(e: usp_core::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "usp", version, about = "Uniform shrinkage prior fits and frequency coverage evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one model and print posterior summaries.
    Fit(FitArgs),
    /// Evaluate coverage for one prior at one generative value.
    Evaluate(EvaluateArgs),
    /// Run every cell of a JSON run configuration.
    Campaign(CampaignArgs),
    /// Run a preset campaign for a builtin dataset.
    Reproduce(ReproduceArgs),
    /// List builtin datasets.
    Datasets,
    /// Print the run configuration JSON schema.
    Schema,
}

#[derive(Args, Debug, Default)]
pub struct ChainArgs {
    /// Total sweeps per chain.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Log-scale random-walk step for p = 1.
    #[arg(long)]
    sigma: Option<f64>,
    /// Inverse-Wishart proposal degrees of freedom for p >= 2.
    #[arg(long)]
    nu: Option<f64>,
}

impl ChainArgs {
    fn apply(&self, c: &mut SamplerConfig) {
        if let Some(v) = self.iterations {
            c.total_iterations = v;
        }
        if let Some(v) = self.burn_in {
            c.burn_in = v;
        }
        if let Some(v) = self.thin {
            c.thin = v;
        }
        if let Some(v) = self.sigma {
            c.proposal_sigma = v;
        }
        if let Some(v) = self.nu {
            c.proposal_nu = v;
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Builtin name or CSV path.
    #[arg(long, default_value = "eight-schools")]
    dataset: String,
    /// usp-dm, usp-em, usp-dm-diag, usp-em-diag (optionally :delta), or flat.
    #[arg(long, default_value = "usp-dm")]
    prior: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, default_value = "eight-schools")]
    dataset: String,
    #[arg(long, default_value = "usp-dm")]
    prior: String,
    /// Reference shrinkage of a univariate grid point, A = (1 - B0) V0 / B0.
    #[arg(long, conflicts_with = "u")]
    b0: Option<f64>,
    /// Divisor of a multivariate grid point, A = V0 / u.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long, default_value_t = 200)]
    n_sim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for result files; nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
pub struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// eight-schools or hospital
    experiment: String,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Override the preset's simulations per cell.
    #[arg(long)]
    n_sim: Option<usize>,
    /// Only run the first N grid points.
    #[arg(long)]
    grid_points: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
}

/// `USP_THREADS` wins over flags and config.
fn threads(flag: Option<usize>, config: usize) -> CliResult<usize> {
    match std::env::var("USP_THREADS") {
        Ok(v) => v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("USP_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(flag.unwrap_or(config)),
    }
}

fn prior_rule(s: &str) -> CliResult<PriorRule> {
    s.parse().map_err(|e: usp_core::Error| CliError::Usage(e.to_string()))
}

fn builtin_sampler(dataset: &str, fallback: SamplerConfig) -> SamplerConfig {
    match dataset.parse::<Experiment>() {
        Ok(e) => experiments::preset(e, Scale::Desk, 0).sampler,
        Err(_) => fallback,
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Campaign(a) => campaign(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Datasets => {
            for name in BUILTIN_NAMES {
                let d = load_dataset(name)?.dataset;
                println!("{name}\tk={}\tp={}\tm={}", d.k(), d.p(), d.m());
            }
            Ok(())
        }
        Command::Schema => {
            println!("{RUN_CONFIG_SCHEMA}");
            Ok(())
        }
    }
}

fn fit(a: FitArgs) -> CliResult<()> {
    let mut config = RunConfig::new(Mode::Fit, a.dataset.clone());
    config.priors = vec![prior_rule(&a.prior)?];
    config.sampler = builtin_sampler(&a.dataset, SamplerConfig::default());
    // A fit of observed data has no generative beta to start from.
    if config.sampler.init_beta == usp_core::sampler::InitBeta::Generative {
        config.sampler.init_beta = usp_core::sampler::InitBeta::PooledMean;
    }
    config.sampler.total_iterations = SamplerConfig::default().total_iterations;
    a.chain.apply(&mut config.sampler);
    config.level = a.level;
    config.master_seed = a.seed;
    let run = config.resolve()?;
    let samples = run_chain(&run.dataset, &run.priors[0], &config.sampler, &mut RngStream::new(a.seed, 0))?;
    let summary = samples.summarize(a.level)?;
    if a.json {
        let out = serde_json::json!({
            "config": config,
            "prior": run.priors[0],
            "acceptance_rate": samples.acceptance_rate,
            "parameters": summary,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("summary serializes"));
        return Ok(());
    }
    println!("# dataset={} prior={} seed={}", run.dataset.label(), run.priors[0].description, a.seed);
    println!("# draws={} acceptance_rate={:.4}", samples.len(), samples.acceptance_rate);
    let pct = a.level * 100.0;
    println!("{:<14} {:>12} {:>12} {:>12} {:>12} {:>10}", "parameter", "mean", "sd", format!("{pct}% lo"), format!("{pct}% hi"), "ess");
    for s in summary {
        let ess = s.ess.map(|e| format!("{e:.0}")).unwrap_or_else(|| "-".into());
        println!("{:<14} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>10}", s.label, s.mean, s.sd, s.lower, s.upper, ess);
    }
    Ok(())
}

fn print_cell(r: &CoverageResult) {
    println!(
        "{}\t{}\toverall_rb={:.4}\tse={:.4}\tnaive={:.4}\tcomponent_rb={:.4}\tcomponent_se={:.4}\tacceptance={:.3}",
        r.metadata.prior,
        r.metadata.generative,
        r.overall_rb,
        r.overall_rb_se(),
        r.overall_naive,
        r.overall_component_rb,
        r.overall_component_rb_se(),
        r.metadata.mean_acceptance_rate,
    );
}

fn finish(record: &ResultsRecord, out: Option<PathBuf>) -> CliResult<()> {
    for cell in &record.campaign.cells {
        print_cell(&cell.result);
    }
    for f in &record.campaign.failures {
        eprintln!("cell (prior {}, grid {}) failed: {}", f.prior_index, f.grid_index, f.message);
    }
    if let Some(dir) = out {
        for path in export_results(record, &dir)? {
            println!("wrote {}", path.display());
        }
    }
    let failures = &record.campaign.failures;
    if !failures.is_empty() && record.campaign.cells.is_empty() {
        let msg = "every cell failed".to_string();
        return Err(if failures.iter().all(|f| f.numeric) { CliError::Numeric(msg) } else { CliError::Usage(msg) });
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let mut config = RunConfig::new(Mode::EvaluateCell, a.dataset.clone());
    config.priors = vec![prior_rule(&a.prior)?];
    config.grid = Some(match (a.b0, a.u) {
        (Some(b0), None) => GridSpec::B0 {
            values: vec![b0],
            base: V0Base::Harmonic,
        },
        (None, Some(u)) => GridSpec::Divisor {
            values: vec![u],
            base: V0Base::Arithmetic,
        },
        _ => return Err(CliError::Usage("evaluate needs exactly one of --b0 or --u".into())),
    });
    config.sampler = builtin_sampler(&a.dataset, SamplerConfig::desk());
    a.chain.apply(&mut config.sampler);
    config.n_sim = a.n_sim;
    config.level = a.level;
    config.master_seed = a.seed;
    config.parallelism = threads(a.threads, 1)?;
    config.output_dir = a.out.clone();
    let record = ResultsRecord::from_single_cell(&config.resolve()?)?;
    finish(&record, a.out)
}

fn campaign(a: CampaignArgs) -> CliResult<()> {
    let mut config = RunConfig::from_file(&a.config)?;
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    config.parallelism = threads(a.threads, config.parallelism)?;
    let out = a.out.or_else(|| config.output_dir.clone());
    config.output_dir = out.clone();
    if config.mode == Mode::Fit {
        return Err(CliError::Usage("campaign needs a config with a generative grid, not mode fit".into()));
    }
    let record = ResultsRecord::from_run(&config.resolve()?)?;
    finish(&record, out)
}

fn reproduce(a: ReproduceArgs) -> CliResult<()> {
    let experiment: Experiment = a.experiment.parse().map_err(|e: usp_core::Error| CliError::Usage(e.to_string()))?;
    let scale: Scale = a.scale.parse().map_err(|e: usp_core::Error| CliError::Usage(e.to_string()))?;
    let mut config = experiments::preset(experiment, scale, a.seed);
    a.chain.apply(&mut config.sampler);
    if let Some(n) = a.n_sim {
        config.n_sim = n;
    }
    if let Some(n) = a.grid_points {
        match config.grid.as_mut() {
            Some(GridSpec::B0 { values, .. }) | Some(GridSpec::Divisor { values, .. }) => values.truncate(n),
            _ => {}
        }
    }
    config.parallelism = threads(a.threads, config.parallelism)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("usp-{experiment}-{}", a.scale)));
    config.output_dir = Some(out.clone());
    let record = ResultsRecord::from_run(&config.resolve()?)?;
    finish(&record, Some(out))
}
