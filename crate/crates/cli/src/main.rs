use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfm::bench::{self, delays, Ablation, ModelBundle, PipelineConfig};
use dfm::dataset::{self, DelaySpace, NormScope};
use dfm::{Error, Result};

#[derive(Parser)]
#[command(name = "dfm", version, about = "Data-driven fuzzy modeling for nonlinear system identification")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write report.json, predictions.csv, model.kv
    /// and the optimizer trace.
    Train(RunArgs),
    /// Evaluate a saved model on a data file.
    Eval(EvalArgs),
    /// Run the RBM × probabilistic-rule ablation grid over several seeds.
    Ablate(AblateArgs),
    /// Reproduce a benchmark table.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Random search over the regressor delays.
    DelaysSearch(DelayArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Box-Jenkins gas furnace.
    GasFurnace(BenchArgs),
    /// Wiener-Hammerstein system.
    Wh(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    GasFurnace,
    Wh,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Starting hyperparameters.
    #[arg(long, value_enum, default_value = "gas-furnace")]
    preset: Preset,
    /// CSV file with the input/output series; defaults to the built-in data
    /// of the preset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config file whose keys override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the full Wiener-Hammerstein split instead of the desk-scale one.
    #[arg(long)]
    full: bool,
    /// Re-solve the consequents after the probability fit.
    #[arg(long)]
    resolve_w: bool,
    /// Rows the normalization statistics are computed on.
    #[arg(long, value_parser = parse_scope)]
    norm_scope: Option<NormScope>,
    /// Input column name in the CSV file.
    #[arg(long)]
    u_column: Option<String>,
    /// Output column name in the CSV file.
    #[arg(long)]
    y_column: Option<String>,
    /// Directory for output files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster the normalized regressors directly.
    #[arg(long)]
    no_rbm: bool,
    /// Keep P = I.
    #[arg(long)]
    no_prob: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    full: bool,
    #[arg(long)]
    resolve_w: bool,
    #[arg(long, value_parser = parse_scope)]
    norm_scope: Option<NormScope>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DelayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Smallest delay count drawn for each channel.
    #[arg(long, default_value_t = 1)]
    min_delay: usize,
    /// Largest delay count drawn for each channel.
    #[arg(long, default_value_t = 10)]
    max_delay: usize,
    /// Raw sample index where validation starts; defaults to the preset's
    /// training rows plus the largest delay.
    #[arg(long)]
    split: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_scope(s: &str) -> std::result::Result<NormScope, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn resolve(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match args.preset {
        Preset::GasFurnace => PipelineConfig::gas_furnace(),
        Preset::Wh => PipelineConfig::wiener_hammerstein(args.full),
    };
    if let Some(path) = &args.config {
        cfg = cfg.merge_file(path)?;
    }
    if args.data.is_some() {
        cfg.data.path = args.data.clone();
    }
    if args.resolve_w {
        cfg.probopt.resolve_w = true;
    }
    if let Some(scope) = args.norm_scope {
        cfg.data.norm_scope = scope;
    }
    if let Some(c) = &args.u_column {
        cfg.data.u_column = c.clone();
    }
    if let Some(c) = &args.y_column {
        cfg.data.y_column = c.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn train(args: &RunArgs) -> Result<()> {
    let mut cfg = resolve(&args.config)?.with_seed(args.seed);
    cfg.run.use_rbm = !args.no_rbm;
    cfg.run.use_prob_rules = !args.no_prob;
    let ts = bench::load_series(&cfg)?;
    let out = bench::run_pipeline(&ts, &cfg)?;
    bench::write_run(&args.config.out_dir, &out)?;
    let r = &out.report;
    println!(
        "K={} train MSE {:.4e} (RMS {:.4}), test MSE {:.4e} (RMS {:.4})",
        r.k, r.train.mse, r.train.rms, r.test.mse, r.test.rms
    );
    println!("wrote {}", args.config.out_dir.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let cfg = resolve(&args.config)?;
    let ts = bench::load_series(&cfg)?;
    let reg = dataset::build_regressors(&ts, bundle.regressors)?;
    let ds = dataset::normalize_with(&reg, &bundle.norm)?;
    let feats = bundle.features(ds.x())?;
    let pred = bundle.fuzzy.predict(&feats, bundle.probabilistic)?;
    let errors = bench::Errors::of(ds.y(), &pred, bundle.norm.y_span());
    create_dir(&args.config.out_dir)?;
    bench::write_predictions(&args.config.out_dir.join("predictions.csv"), ds.y(), &pred, &bundle.norm, reg.first_index)?;
    let json = serde_json::to_string_pretty(&errors).expect("errors serialize");
    write_file(&args.config.out_dir.join("eval.json"), &json)?;
    println!("{} rows: MSE {:.4e} (RMS {:.4})", ds.len(), errors.mse, errors.rms);
    Ok(())
}

fn write_ablation(dir: &Path, a: &Ablation, extra: &str) -> Result<()> {
    create_dir(dir)?;
    let json = serde_json::to_string_pretty(a).expect("ablation serializes");
    write_file(&dir.join("ablation.json"), &json)?;
    let text = format!("{}{extra}", a.table());
    write_file(&dir.join("table.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn ablate(args: &AblateArgs) -> Result<()> {
    let cfg = resolve(&args.config)?;
    let ts = bench::load_series(&cfg)?;
    let a = bench::ablate(&ts, &cfg, &args.seeds)?;
    write_ablation(&args.config.out_dir, &a, "")
}

/// Published testing MSE (×10⁻³) in table order: standard/no RBM,
/// standard/RBM, probabilistic/no RBM, probabilistic/RBM.
const GAS_PUBLISHED: [f64; 4] = [26.2, 23.7, 22.5, 19.3];
const WH_PUBLISHED: [f64; 4] = [26.4, 22.8, 23.6, 19.3];

fn bench_run(args: &BenchArgs, preset: Preset) -> Result<()> {
    let config = ConfigArgs {
        preset,
        data: args.data.clone(),
        config: args.config.clone(),
        full: args.full,
        resolve_w: args.resolve_w,
        norm_scope: args.norm_scope,
        u_column: None,
        y_column: None,
        out_dir: args.out_dir.clone(),
    };
    let cfg = resolve(&config)?;
    let ts = bench::load_series(&cfg)?;
    let a = bench::ablate(&ts, &cfg, &args.seeds)?;
    let published = match preset {
        Preset::GasFurnace => GAS_PUBLISHED,
        Preset::Wh => WH_PUBLISHED,
    };
    let mut extra = String::from("\nTesting MSE x 1e-3, measured vs published\n");
    let cells = [(false, false), (true, false), (false, true), (true, true)];
    for ((rbm, prob), p) in cells.into_iter().zip(published) {
        let name = format!(
            "{} / {}",
            if prob { "probabilistic" } else { "standard" },
            if rbm { "RBM" } else { "no RBM" }
        );
        let _ = writeln!(extra, "{name:<26}{:>10.2}{p:>10.1}", a.cell(rbm, prob).median_test_mse * 1e3);
    }
    write_ablation(&args.out_dir, &a, &extra)
}

fn delays_search(args: &DelayArgs) -> Result<()> {
    let cfg = resolve(&args.config)?;
    let ts = bench::load_series(&cfg)?;
    let split = args.split.unwrap_or(cfg.data.n_train + args.max_delay);
    let space = DelaySpace::Range { lo: args.min_delay, hi: args.max_delay };
    let found = delays::search(&ts, &space, args.trials, split, args.seed, &cfg)?;
    let mut text = String::from("n_y,n_u,validation_mse\n");
    for (c, m) in &found.trials {
        let _ = writeln!(text, "{},{},{m}", c.n_y, c.n_u);
    }
    create_dir(&args.config.out_dir)?;
    write_file(&args.config.out_dir.join("delays.csv"), &text)?;
    println!("best n_y={} n_u={} validation MSE {:.4e}", found.best.n_y, found.best.n_u, found.best_mse);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Bench(BenchCommand::GasFurnace(a)) => bench_run(a, Preset::GasFurnace),
        Command::Bench(BenchCommand::Wh(a)) => bench_run(a, Preset::Wh),
        Command::DelaysSearch(a) => delays_search(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
