//! Command-line front end: simulate data, fit hyperparameters, predict
//! discovery curves, optimize a follow-up design and run fold evaluations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::RngCore;
use serde_json::json;

use vardisc::bnp::{self, PoissonPrediction};
use vardisc::curve::{CurvePoint, PredictionCurve};
use vardisc::design::{self, DesignProblem};
use vardisc::fit::{self, FitConfig};
use vardisc::harness::{self, EvalConfig, RunMetadata};
use vardisc::noise::calling_probability;
use vardisc::optim::DEOptions;
use vardisc::simulate;
use vardisc::{io, BPHyperParams, Error, Result, SequencingConfig, VariantMatrix};

#[derive(Parser)]
#[command(name = "vardisc", version, about = "Predict variant discovery in follow-up sequencing studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic sample-by-variant matrix.
    Simulate(SimulateArgs),
    /// Fit beta-process hyperparameters to a pilot matrix.
    Fit(FitArgs),
    /// Predict new variants over a follow-up of up to M samples.
    Predict(PredictArgs),
    /// Choose the follow-up depth that maximizes discovery under a budget.
    Design(DesignArgs),
    /// Compare predictors on held-out folds.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Ibp,
    Beta,
    Powerlaw,
    Freqs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    generator: Generator,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Number of sites (beta and powerlaw).
    #[arg(long)]
    bigk: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    freq_file: Option<PathBuf>,
    /// Probability that each incidence is observed.
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Sequencing quality of the pilot; without `--lambda-init` calling is perfect.
#[derive(Args)]
struct PilotArgs {
    #[arg(long)]
    lambda_init: Option<f64>,
    #[arg(long, default_value_t = 30)]
    threshold: u32,
    #[arg(long, default_value_t = 0.01)]
    perr: f64,
}

impl PilotArgs {
    fn config(&self, depth: Option<f64>) -> Result<Option<SequencingConfig>> {
        depth.map(|d| SequencingConfig::new(d, self.threshold, self.perr)).transpose()
    }

    fn pilot(&self) -> Result<Option<SequencingConfig>> {
        self.config(self.lambda_init)
    }
}

fn phi(cfg: Option<&SequencingConfig>) -> f64 {
    cfg.map_or(1.0, calling_probability)
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    seq: PilotArgs,
    /// Fraction of pilot samples used as the training prefix.
    #[arg(long, default_value_t = 0.6667)]
    split_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParamArgs {
    /// JSON file with `alpha`, `sigma`, `c`.
    #[arg(long, conflicts_with_all = ["alpha", "sigma", "c"])]
    params: Option<PathBuf>,
    #[arg(long, requires_all = ["sigma", "c"])]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
}

impl ParamArgs {
    fn given(&self) -> Result<Option<BPHyperParams>> {
        match (&self.params, self.alpha, self.sigma, self.c) {
            (Some(p), ..) => io::read_params(p).map(Some),
            (None, Some(a), Some(s), Some(c)) => BPHyperParams::new(a, s, c).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Follow-up size.
    #[arg(long)]
    m: u64,
    #[command(flatten)]
    seq: PilotArgs,
    #[arg(long)]
    lambda_follow: Option<f64>,
    /// Count only variants seen at most R times in the follow-up.
    #[arg(long)]
    rare: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cost {
    Mloglambda,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 3000.0)]
    budget: f64,
    #[arg(long, value_enum, default_value = "mloglambda")]
    cost: Cost,
    /// Log-spaced follow-up depths as `lo,hi,n`.
    #[arg(long, default_value = "2,100,64")]
    lambda_grid: String,
    #[arg(long, default_value_t = 40.0)]
    lambda_init: f64,
    #[arg(long, default_value_t = 30)]
    threshold: u32,
    #[arg(long, default_value_t = 0.01)]
    perr: f64,
    #[arg(long)]
    rare: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = harness::DEFAULT_FOLDS)]
    folds: usize,
    /// Comma-separated: bnp, bb, jackknife[:p|:auto], gt[:log2|:log3].
    #[arg(long, default_value = "bnp,bb,jackknife:auto,gt:log2")]
    methods: String,
    #[command(flatten)]
    seq: PilotArgs,
    #[arg(long)]
    lambda_follow: Option<f64>,
    /// Assign consecutive samples to folds instead of a seeded shuffle.
    #[arg(long)]
    contiguous: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn need<T>(v: Option<T>, flag: &str, generator: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("`simulate {generator}` requires --{flag}")))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let matrix = match args.generator {
        Generator::Ibp => {
            let p = BPHyperParams::new(
                need(args.alpha, "alpha", "ibp")?,
                need(args.sigma, "sigma", "ibp")?,
                need(args.c, "c", "ibp")?,
            )?;
            simulate::draw_ibp(args.n, &p, args.seed)?
        }
        Generator::Beta => simulate::draw_beta_bernoulli(
            args.n,
            need(args.bigk, "bigk", "beta")?,
            need(args.a, "a", "beta")?,
            need(args.b, "b", "beta")?,
            args.seed,
        )?,
        Generator::Powerlaw => simulate::draw_power_law(
            args.n,
            need(args.bigk, "bigk", "powerlaw")?,
            need(args.exponent, "exponent", "powerlaw")?,
            args.seed,
        )?,
        Generator::Freqs => {
            let freqs = io::read_frequencies(&need(args.freq_file.clone(), "freq-file", "freqs")?)?;
            return write_matrix_summary(
                &simulate::draw_from_frequencies(&freqs, args.n, args.phi, args.seed)?,
                &args.out,
            );
        }
    };
    let matrix = if args.phi < 1.0 {
        let thin_seed = simulate::substream(args.seed, u64::MAX).next_u64();
        simulate::thin_matrix(&matrix, args.phi, thin_seed)?
    } else if args.phi == 1.0 {
        matrix
    } else {
        return Err(Error::InvalidInput(format!("--phi must lie in [0, 1] (got {})", args.phi)));
    };
    write_matrix_summary(&matrix, &args.out)
}

fn write_matrix_summary(matrix: &VariantMatrix, out: &Path) -> Result<()> {
    info!(
        "{} samples, {} distinct variants, {} incidences",
        matrix.n_samples(),
        matrix.n_distinct(),
        matrix.n_incidences()
    );
    io::write_matrix(matrix, out)
}

fn fit_pilot(matrix: &VariantMatrix, phi_init: f64, split_frac: Option<f64>, seed: u64) -> Result<fit::FitResult> {
    let cfg = FitConfig { split_frac, ..FitConfig::default() };
    let res = fit::fit_hyperparams_with(matrix, phi_init, &DEOptions::for_hyperparams(seed), &cfg)?;
    for w in &res.warnings {
        warn!("{w}");
    }
    info!(
        "fitted alpha = {:.6}, sigma = {:.6}, c = {:.6} (objective {:.6e})",
        res.params.alpha(),
        res.params.sigma(),
        res.params.c(),
        res.objective
    );
    Ok(res)
}

fn fit(args: &FitArgs) -> Result<()> {
    let matrix = io::read_matrix(&args.matrix)?;
    let pilot = args.seq.pilot()?;
    let phi_init = phi(pilot.as_ref());
    let res = fit_pilot(&matrix, phi_init, Some(args.split_frac), args.seed)?;
    io::write_json(
        &json!({
            "alpha": res.params.alpha(),
            "sigma": res.params.sigma(),
            "c": res.params.c(),
            "fit": res,
            "phi_init": phi_init,
            "pilot_config": pilot,
            "split_frac": args.split_frac,
            "seed": args.seed,
            "de_options": DEOptions::for_hyperparams(args.seed),
        }),
        &args.out,
    )
}

fn params_or_fit(given: &ParamArgs, matrix: &VariantMatrix, phi_init: f64, seed: u64) -> Result<BPHyperParams> {
    match given.given()? {
        Some(p) => Ok(p),
        None => {
            info!("no hyperparameters given; fitting them to the pilot");
            Ok(fit_pilot(matrix, phi_init, None, seed)?.params)
        }
    }
}

fn predict(args: &PredictArgs) -> Result<()> {
    let matrix = io::read_matrix(&args.matrix)?;
    let pilot = args.seq.pilot()?;
    let follow = args.seq.config(args.lambda_follow)?;
    let (phi_i, phi_f) = (phi(pilot.as_ref()), phi(follow.as_ref()));
    let params = params_or_fit(&args.params, &matrix, phi_i, args.seed)?;
    let n = matrix.n_samples() as u64;
    let observed = matrix.n_distinct() as f64;

    let (tag, base, means) = match args.rare {
        Some(r) => {
            let means = (1..=args.m)
                .map(|m| design::predict_design(&params, n, m, phi_i, phi_f, Some(r)))
                .collect::<Result<Vec<_>>>()?;
            (format!("bnp:rare{r}"), 0.0, means)
        }
        None => (
            "bnp".to_string(),
            observed,
            bnp::noisy_new_variants_curve(n, args.m, &params, phi_i, phi_f)?,
        ),
    };
    let mut points = vec![CurvePoint { m: 0, mean: base, std: 0.0, lo: base, hi: base }];
    for (i, &mean) in means.iter().enumerate() {
        let post = PoissonPrediction::new(mean.max(0.0))?;
        points.push(CurvePoint {
            m: i + 1,
            mean: base + mean,
            std: post.variance().sqrt(),
            lo: base + post.quantile(0.025)? as f64,
            hi: base + post.quantile(0.975)? as f64,
        });
    }
    let curve = PredictionCurve::new(tag, n as usize, points)?;
    harness::emit_curves(
        std::slice::from_ref(&curve),
        None,
        &json!({
            "params": params,
            "pilot_samples": n,
            "pilot_distinct": observed,
            "pilot_config": pilot,
            "follow_config": follow,
            "phi_init": phi_i,
            "phi_follow": phi_f,
            "m": args.m,
            "rare": args.rare,
            "seed": args.seed,
        }),
        &args.out,
    )
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::InvalidInput(format!("--lambda-grid expects lo,hi,n (got '{s}')"));
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    design::log_grid(
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
        n.parse().map_err(|_| bad())?,
    )
}

fn design_cmd(args: &DesignArgs) -> Result<()> {
    let Cost::Mloglambda = args.cost;
    let matrix = io::read_matrix(&args.matrix)?;
    let pilot = SequencingConfig::new(args.lambda_init, args.threshold, args.perr)?;
    let params = params_or_fit(&args.params, &matrix, calling_probability(&pilot), args.seed)?;
    let problem = DesignProblem {
        lambda_grid: parse_grid(&args.lambda_grid)?,
        rare_cap: args.rare,
        ..DesignProblem::new(params, matrix.n_samples() as u64, pilot, args.budget)
    };
    let sweep = design::sweep_designs(&problem)?;
    let best = design::best_point(&sweep)?;
    info!(
        "best depth {:.4}: {} samples, {:.3} predicted new variants",
        best.lambda_follow, best.m_max, best.predicted
    );
    io::write_json(
        &json!({
            "best": best,
            "sweep": sweep,
            "params": params,
            "pilot_samples": matrix.n_samples(),
            "pilot_config": pilot,
            "budget": args.budget,
            "cost": "mloglambda",
            "rare": args.rare,
            "seed": args.seed,
        }),
        &args.out,
    )
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let matrix = io::read_matrix(&args.matrix)?;
    let pilot = args.seq.pilot()?;
    let follow = args.seq.config(args.lambda_follow)?;
    let cfg = EvalConfig {
        n_folds: args.folds,
        methods: harness::parse_methods(&args.methods)?,
        seed: args.seed,
        contiguous: args.contiguous,
        output_path: Some(args.out.clone()),
    };
    let report = harness::run_folds(&matrix, &cfg, pilot.as_ref(), follow.as_ref())?;
    for &m in &cfg.methods {
        if let Some(e) = report.mean_abs_rel_error(m) {
            info!("{m}: mean absolute relative error {e:.4}");
        }
    }
    let meta = RunMetadata::new(&report, &cfg, pilot.as_ref(), follow.as_ref());
    harness::emit_curves(&report.curves, Some(&report.truth), &meta, &args.out)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Design(a) => design_cmd(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
