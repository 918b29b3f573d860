//! Command-line front end: estimation, bound curves, and the Monte Carlo
//! experiment harness.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, unreadable input,
//! malformed config), 2 numeric or validity failure (duplicate points in
//! strict mode, non-convergent quadrature, out-of-range parameters).

use clap::{Args, Parser, Subcommand, ValueEnum};
use knn_entropy::bounds::{self, BoundValue};
use knn_entropy::experiments::{self, parse_config, ExperimentConfig, ExperimentKind, KRule};
use knn_entropy::knn::format_real;
use knn_entropy::{
    kl_entropy, mutual_information, Dataset, Distribution, Error, MetricSpace, Mode, Result,
};
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "knn-entropy",
    version,
    about = "Kozachenko-Leonenko k-NN entropy estimation, finite-sample bound curves, \
             and a seeded Monte Carlo verification harness"
)]
struct Cli {
    /// Base RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of Monte Carlo trials
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads (default: all cores); output is identical for any count
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write tables to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the entropy of a CSV dataset or of a sampled distribution
    Estimate(EstimateArgs),
    /// Estimate mutual information between two CSV datasets
    Mi(MiArgs),
    /// Bias / variance / MSE sweep over a grid of sample sizes
    Sweep(SweepArgs),
    /// Empirical tails of eps_k at a query point vs the concentration bounds
    Concentration(TrialArgs),
    /// Empirical moments of eps_k at a query point vs the moment bounds
    Moments(MomentsArgs),
    /// Evaluate a bound formula from flags as a CSV curve
    Bounds(BoundsArgs),
    /// Digamma-identity check on the uniform torus
    Identity(IdentityArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "uniform_cube")]
    UniformCube,
    #[value(name = "uniform_torus")]
    UniformTorus,
    #[value(name = "gaussian")]
    Gaussian,
    #[value(name = "sine_bump")]
    SineBump,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Euclidean,
    #[value(name = "flat_torus")]
    FlatTorus,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Lenient => Mode::Lenient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Nats,
    Bits,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV: one row per point, D comma-separated columns
    #[arg(long, conflicts_with = "family")]
    input: Option<PathBuf>,

    /// Metric space of the input CSV
    #[arg(long, value_enum, default_value = "euclidean")]
    space: SpaceArg,

    /// Point dimension
    #[arg(long, default_value_t = 1)]
    dim: usize,

    /// Sample from this family instead of reading a CSV
    #[arg(long, value_enum, requires = "n")]
    family: Option<FamilyArg>,

    /// Gaussian scale parameter
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Sample size when --family is given
    #[arg(long)]
    n: Option<usize>,

    /// Neighbor order
    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Duplicate-point handling
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,

    /// Output unit
    #[arg(long, value_enum, default_value = "nats")]
    unit: UnitArg,
}

#[derive(Args)]
struct MiArgs {
    /// CSV with samples of X
    #[arg(long)]
    input_x: PathBuf,

    /// CSV with samples of Y
    #[arg(long)]
    input_y: PathBuf,

    #[arg(long, default_value_t = 1)]
    dim_x: usize,

    #[arg(long, default_value_t = 1)]
    dim_y: usize,

    #[arg(long, default_value_t = 1)]
    k: usize,

    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,

    #[arg(long, value_enum, default_value = "nats")]
    unit: UnitArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Config file (`key = value` lines); flags below are ignored if set
    #[arg(long)]
    config: Option<PathBuf>,

    /// bias_sweep | variance_sweep | mse_sweep
    #[arg(long)]
    experiment: Option<String>,

    #[arg(long, value_enum)]
    family: Option<FamilyArg>,

    #[arg(long, default_value_t = 1)]
    dim: usize,

    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Comma-separated, strictly increasing sample sizes
    #[arg(long)]
    n_grid: Option<String>,

    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Use the MSE-optimal k scaling with this smoothness exponent
    #[arg(long)]
    optimal_k_beta: Option<f64>,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long, value_enum, default_value = "uniform_torus")]
    family: FamilyArg,

    #[arg(long, default_value_t = 1)]
    dim: usize,

    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    /// Sample size per trial
    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Grid points per tail window
    #[arg(long, default_value_t = 20)]
    r_points: usize,

    /// Query point, comma-separated coordinates (default: space center)
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long, value_enum, default_value = "uniform_torus")]
    family: FamilyArg,

    #[arg(long, default_value_t = 1)]
    dim: usize,

    #[arg(long, default_value_t = 1.0)]
    sigma: f64,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 1)]
    k: usize,

    /// Comma-separated moment exponents
    #[arg(long, default_value = "1.0,-0.5", allow_hyphen_values = true)]
    alphas: String,

    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,

    #[arg(long, default_value_t = 1000)]
    n: usize,

    /// Comma-separated neighbor orders
    #[arg(long, default_value = "1,2,5")]
    k_list: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    #[value(name = "concentration_upper")]
    ConcentrationUpper,
    #[value(name = "concentration_lower")]
    ConcentrationLower,
    /// C_2 / C_3 moment bound at --alpha
    Moment,
    /// Closed-form bound on E[ln_+ eps]
    LogPos,
    /// Closed-form bound on E[ln_- eps]
    LogNeg,
    Bias,
    Variance,
    Mse,
    #[value(name = "moment_ceiling")]
    MomentCeiling,
    #[value(name = "optimal_k")]
    OptimalK,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    bound: BoundKind,

    #[arg(long, default_value_t = 1)]
    k: usize,

    #[arg(long, default_value_t = 1000)]
    n: usize,

    /// Sweep over these sample sizes instead of the single --n
    #[arg(long)]
    n_grid: Option<String>,

    #[arg(long, default_value_t = 1)]
    dim: usize,

    #[arg(long, default_value_t = 1.0)]
    gamma_star: f64,

    /// Defaults to --gamma-star
    #[arg(long)]
    gamma_sup: Option<f64>,

    /// Ball-volume exactness radius of the space
    #[arg(long, default_value_t = f64::INFINITY)]
    rho: f64,

    /// Tail constant C_T of the expectation bounds
    #[arg(long, default_value_t = 0.0)]
    c_t: f64,

    /// Moment exponent
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,

    /// Smoothness exponent
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Smoothing constant C_beta
    #[arg(long, default_value_t = 1.0)]
    c_beta: f64,

    /// Envelope tail integral Gamma_B
    #[arg(long, default_value_t = 1.0)]
    gamma_b: f64,

    /// Ball-volume constant c_D (default: Euclidean unit-ball volume of --dim)
    #[arg(long)]
    c_d: Option<f64>,

    /// k-NN in-degree cap N_k (default: k times the kissing number of --dim)
    #[arg(long)]
    n_k: Option<u64>,

    /// Fourth central moment ceiling M_4 (default: the moment ceiling at
    /// the midpoint lambda)
    #[arg(long)]
    m4: Option<f64>,

    /// Central moment order for moment_ceiling
    #[arg(long, default_value_t = 4)]
    ell: u32,

    #[arg(long)]
    lambda: Option<f64>,

    #[arg(long, default_value_t = 1.0)]
    c_m: f64,

    /// Points for swept curves (r sweeps)
    #[arg(long, default_value_t = 50)]
    points: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::Config(format!("cannot build worker pool: {e}"))),
        },
        None => run(&cli),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::ZeroDistance { .. } | Error::Convergence(_) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(args) => cmd_estimate(cli, args),
        Command::Mi(args) => cmd_mi(args),
        Command::Sweep(args) => cmd_sweep(cli, args),
        Command::Concentration(args) => cmd_concentration(cli, args),
        Command::Moments(args) => cmd_moments(cli, args),
        Command::Bounds(args) => cmd_bounds(cli, args),
        Command::Identity(args) => cmd_identity(cli, args),
    }
}

fn build_distribution(family: FamilyArg, dim: usize, sigma: f64) -> Result<Distribution> {
    match family {
        FamilyArg::UniformCube => Distribution::uniform_cube(dim),
        FamilyArg::UniformTorus => Distribution::uniform_torus(dim),
        FamilyArg::Gaussian => Distribution::gaussian(dim, sigma),
        FamilyArg::SineBump => Distribution::sine_bump(dim),
    }
}

fn parse_num_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} entry {f:?}")))
        })
        .collect()
}

fn read_dataset(path: &PathBuf, space: MetricSpace) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    Dataset::read_csv(space, BufReader::new(file))
}

fn write_table(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let data = if let Some(path) = &args.input {
        let space = match args.space {
            SpaceArg::Euclidean => MetricSpace::euclidean(args.dim)?,
            SpaceArg::FlatTorus => MetricSpace::flat_torus(args.dim)?,
        };
        read_dataset(path, space)?
    } else if let Some(family) = args.family {
        let dist = build_distribution(family, args.dim, args.sigma)?;
        let n = args.n.expect("clap enforces --n with --family");
        dist.sample(n, cli.seed.unwrap_or(0))?
    } else {
        return Err(Error::Config(
            "estimate needs either --input FILE or --family ... --n N".into(),
        ));
    };
    let est = kl_entropy(&data, args.k, args.mode.into())?;
    let (value, unit) = convert_unit(est.value, args.unit);
    println!("entropy = {} {unit}", format_real(value));
    println!(
        "n = {}  k = {}  dropped_points = {}",
        est.n, est.k, est.dropped_points
    );
    Ok(())
}

fn convert_unit(nats: f64, unit: UnitArg) -> (f64, &'static str) {
    match unit {
        UnitArg::Nats => (nats, "nats"),
        UnitArg::Bits => (nats / std::f64::consts::LN_2, "bits"),
    }
}

fn cmd_mi(args: &MiArgs) -> Result<()> {
    let x = read_dataset(&args.input_x, MetricSpace::euclidean(args.dim_x)?)?;
    let y = read_dataset(&args.input_y, MetricSpace::euclidean(args.dim_y)?)?;
    let mi = mutual_information(&x, &y, args.k, args.mode.into())?;
    let (value, unit) = convert_unit(mi, args.unit);
    println!("mutual_information = {} {unit}", format_real(value));
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let (mut cfg, cfg_out) = if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        parse_config(&text)?
    } else {
        let kind: ExperimentKind = args
            .experiment
            .as_deref()
            .ok_or_else(|| Error::Config("sweep needs --config or --experiment".into()))?
            .parse()?;
        let family = args
            .family
            .ok_or_else(|| Error::Config("sweep needs --family".into()))?;
        let dist = build_distribution(family, args.dim, args.sigma)?;
        let mut cfg = ExperimentConfig::new(kind, dist);
        if let Some(grid) = &args.n_grid {
            cfg.n_grid = parse_num_list(grid, "n_grid")?;
        }
        cfg.k_rule = match args.optimal_k_beta {
            Some(beta) => KRule::Optimal { beta },
            None => KRule::Fixed(args.k),
        };
        (cfg, None)
    };
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    let result = experiments::run_sweep(&cfg)?;
    let out = cli.out.clone().or(cfg_out.map(PathBuf::from));
    write_table(&out, &result.to_csv())
}

fn cmd_concentration(cli: &Cli, args: &TrialArgs) -> Result<()> {
    let dist = build_distribution(args.family, args.dim, args.sigma)?;
    let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration, dist);
    cfg.n_grid = vec![args.n];
    cfg.k_rule = KRule::Fixed(args.k);
    cfg.r_points = args.r_points;
    cfg.trials = cli.trials.unwrap_or(10_000);
    cfg.base_seed = cli.seed.unwrap_or(0);
    if let Some(x) = &args.x {
        cfg.query = Some(parse_num_list(x, "query point")?);
    }
    let result = experiments::run_concentration(&cfg)?;
    write_table(&cli.out, &result.to_csv())
}

fn cmd_moments(cli: &Cli, args: &MomentsArgs) -> Result<()> {
    let dist = build_distribution(args.family, args.dim, args.sigma)?;
    let mut cfg = ExperimentConfig::new(ExperimentKind::Moments, dist);
    cfg.n_grid = vec![args.n];
    cfg.k_rule = KRule::Fixed(args.k);
    cfg.alphas = parse_num_list(&args.alphas, "alphas")?;
    cfg.trials = cli.trials.unwrap_or(10_000);
    cfg.base_seed = cli.seed.unwrap_or(0);
    if let Some(x) = &args.x {
        cfg.query = Some(parse_num_list(x, "query point")?);
    }
    let result = experiments::run_moments(&cfg)?;
    write_table(&cli.out, &result.to_csv())
}

fn cmd_identity(cli: &Cli, args: &IdentityArgs) -> Result<()> {
    let dist = Distribution::uniform_torus(args.dim)?;
    let mut cfg = ExperimentConfig::new(ExperimentKind::DigammaIdentity, dist);
    cfg.n_grid = vec![args.n];
    cfg.k_list = parse_num_list(&args.k_list, "k_list")?;
    cfg.trials = cli.trials.unwrap_or(200);
    cfg.base_seed = cli.seed.unwrap_or(0);
    let result = experiments::run_identity(&cfg)?;
    write_table(&cli.out, &result.to_csv())
}

fn cmd_bounds(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    let gamma_sup = args.gamma_sup.unwrap_or(args.gamma_star);
    let c_d = match args.c_d {
        Some(c) => c,
        None => MetricSpace::euclidean(args.dim)?.ball_volume_constant(),
    };
    let n_grid: Vec<usize> = match &args.n_grid {
        Some(g) => parse_num_list(g, "n_grid")?,
        None => vec![args.n],
    };

    let mut rows: Vec<(String, BoundValue)> = Vec::new();
    match args.bound {
        BoundKind::ConcentrationUpper => {
            let n = n_grid[0];
            let lo = bounds::upper_window_start(args.k, n, args.dim, args.gamma_star);
            let hi = if args.rho.is_finite() {
                args.rho
            } else {
                ((args.k as f64 + 45.0) / (args.gamma_star * n as f64)).powf(1.0 / args.dim as f64)
            };
            for i in 0..args.points {
                let r = lo + (hi - lo) * i as f64 / (args.points - 1).max(1) as f64;
                let b =
                    bounds::concentration_upper(r, args.k, n, args.dim, args.gamma_star, args.rho);
                rows.push((format_real(r), b));
            }
        }
        BoundKind::ConcentrationLower => {
            let n = n_grid[0];
            let hi = bounds::lower_window_end(args.k, n, args.dim, gamma_sup, args.rho);
            for i in 0..args.points {
                let r = hi * i as f64 / (args.points - 1).max(1) as f64;
                let b = bounds::concentration_lower(
                    r,
                    args.k,
                    n,
                    args.dim,
                    args.gamma_star,
                    gamma_sup,
                    args.rho,
                );
                rows.push((format_real(r), b));
            }
        }
        BoundKind::Moment => {
            let alpha = args
                .alpha
                .ok_or_else(|| Error::Config("moment bound needs --alpha".into()))?;
            for &n in &n_grid {
                let v =
                    bounds::moment_bound(alpha, args.k, n, args.dim, args.gamma_star, gamma_sup)?;
                rows.push((n.to_string(), plain(v)));
            }
        }
        BoundKind::LogPos => {
            for &n in &n_grid {
                let v = bounds::log_moment_upper_closed(args.k, n, args.dim, args.gamma_star)?;
                rows.push((n.to_string(), plain(v)));
            }
        }
        BoundKind::LogNeg => {
            for &n in &n_grid {
                let v = bounds::log_moment_lower_closed(
                    args.k,
                    n,
                    args.dim,
                    args.gamma_star,
                    gamma_sup,
                )?;
                rows.push((n.to_string(), plain(v)));
            }
        }
        BoundKind::Bias => {
            for &n in &n_grid {
                let v = bounds::bias_bound(
                    args.k,
                    n,
                    args.dim,
                    args.beta,
                    args.c_beta,
                    args.gamma_b,
                    c_d,
                );
                rows.push((n.to_string(), plain(v)));
            }
        }
        BoundKind::Variance => {
            let n_k = args
                .n_k
                .or_else(|| bounds::kissing_number_upper(args.dim).map(|k| k * args.k as u64))
                .ok_or_else(|| {
                    Error::Config("no kissing-number default for this dim; pass --n-k".into())
                })?;
            let m4 = match args.m4 {
                Some(m) => m,
                None => bounds::default_m4(args.k, args.dim, args.gamma_star, gamma_sup, args.c_m)?,
            };
            for &n in &n_grid {
                rows.push((n.to_string(), bounds::variance_bound(args.k, n, n_k, m4)));
            }
        }
        BoundKind::Mse => {
            let n_k = args
                .n_k
                .or_else(|| bounds::kissing_number_upper(args.dim).map(|k| k * args.k as u64))
                .ok_or_else(|| {
                    Error::Config("no kissing-number default for this dim; pass --n-k".into())
                })?;
            let m4 = match args.m4 {
                Some(m) => m,
                None => bounds::default_m4(args.k, args.dim, args.gamma_star, gamma_sup, args.c_m)?,
            };
            for &n in &n_grid {
                rows.push((
                    n.to_string(),
                    bounds::mse_bound(
                        args.k,
                        n,
                        args.dim,
                        args.beta,
                        args.c_beta,
                        args.gamma_b,
                        c_d,
                        n_k,
                        m4,
                    ),
                ));
            }
        }
        BoundKind::MomentCeiling => {
            let lambda = args
                .lambda
                .ok_or_else(|| Error::Config("moment_ceiling needs --lambda".into()))?;
            let v = bounds::moment_ceiling(args.ell, lambda, args.c_m)?;
            rows.push((args.ell.to_string(), plain(v)));
        }
        BoundKind::OptimalK => {
            for &n in &n_grid {
                let k = bounds::optimal_k(n, args.beta, args.dim);
                rows.push((n.to_string(), plain(k as f64)));
            }
        }
    }

    let mut out = String::new();
    out.push_str("#schema: bounds parameter,raw_bound,clamped_bound,validity_flag\n");
    out.push_str("parameter,raw_bound,clamped_bound,validity_flag\n");
    for (param, b) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            param,
            format_real(b.raw),
            format_real(b.clamped),
            u8::from(b.valid)
        ));
    }
    write_table(&cli.out, &out)
}

fn plain(v: f64) -> BoundValue {
    BoundValue {
        raw: v,
        clamped: v,
        valid: true,
    }
}
