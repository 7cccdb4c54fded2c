use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtcn_core::dataset::SyntheticConfig;
use dtcn_core::numerics::gradcheck::GradCheckConfig;
use dtcn_core::run::{self, OutputGuard, RunConfig, RunError};

const OUTPUT_ENV: &str = "DTCN_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "dtcn", version, about = "Temporal context popularity prediction")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted trend and periodicity.
    Gen(GenArgs),
    /// Train on a whole dataset and save the model.
    Train(RunArgs),
    /// Predict every record of a dataset with a saved model.
    Predict(PredictArgs),
    /// Run the moving-partition evaluation.
    Eval(RunArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset (JSON lines). Without it the built-in generator is used.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Context spec such as NTC:1P:1D or PTC:1D:3W; repeatable.
    #[arg(long = "context", value_name = "SPEC")]
    contexts: Vec<String>,
    /// Run the context-free model.
    #[arg(long, conflicts_with = "contexts")]
    no_context: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $DTCN_OUTPUT_DIR or dtcn-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Evaluate rounds concurrently.
    #[arg(long)]
    parallel_rounds: bool,
    /// Override any configuration key, e.g. --set lstm_hidden=32.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Dataset path to write; the header goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML generator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    records: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    visual_dim: Option<usize>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    trend_amplitude: Option<f64>,
    #[arg(long)]
    periodic_amplitude: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset to predict; defaults to the one the model was trained on.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

fn default_out() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("dtcn-out"), PathBuf::from)
}

fn resolve(args: RunArgs) -> Result<RunConfig, RunError> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).map_err(|e| RunError::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::resolve(&text, &args.sets, Some(&default_out()))?;
    if let Some(d) = args.data {
        cfg.data = Some(d);
    }
    if args.no_context {
        cfg.contexts.clear();
    } else if !args.contexts.is_empty() {
        cfg.contexts = args.contexts;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    cfg.parallel_rounds |= args.parallel_rounds;
    cfg.validate()?;
    Ok(cfg)
}

fn echo(command: &str, cfg: &RunConfig) {
    println!("# dtcn {command}, seed {}", cfg.seed);
    print!("{}", cfg.to_toml());
    println!();
}

fn gen(args: GenArgs) -> Result<(), RunError> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| RunError::Usage(format!("{}: {e}", p.display())))?;
            SyntheticConfig::from_toml(&text).map_err(|e| RunError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(v) = args.records {
        cfg.n_records = v;
    }
    if let Some(v) = args.users {
        cfg.n_users = v;
    }
    if let Some(v) = args.visual_dim {
        cfg.visual_dim = v;
    }
    if let Some(v) = args.days {
        cfg.span_days = v;
    }
    if let Some(v) = args.trend_amplitude {
        cfg.trend_amplitude = v;
    }
    if let Some(v) = args.periodic_amplitude {
        cfg.periodic_amplitude = v;
    }
    if let Some(v) = args.noise {
        cfg.noise = v;
    }
    println!("# dtcn gen, seed {}", args.seed);
    print!("{}", cfg.to_toml());
    let mut guard = OutputGuard::new();
    let header = run::run_gen(&cfg, args.seed, &args.out, &mut guard)?;
    guard.commit();
    println!("\nwrote {} records to {}", header.record_count, args.out.display());
    Ok(())
}

fn train(args: RunArgs) -> Result<(), RunError> {
    let cfg = resolve(args)?;
    echo("train", &cfg);
    let mut guard = OutputGuard::new();
    let report = run::run_train(&cfg, &mut guard)?;
    guard.commit();
    println!(
        "trained {} epochs{}, final loss {:.6}; model in {}",
        report.loss_history.len(),
        if report.stopped_early { " (early stop)" } else { "" },
        report.loss_history.last().copied().unwrap_or(f64::NAN),
        cfg.output_dir.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), RunError> {
    let out = args.out.unwrap_or_else(default_out);
    let mut guard = OutputGuard::new();
    let (cfg, n) = run::run_predict(&args.model, args.data, &out, &mut guard)?;
    guard.commit();
    echo("predict", &cfg);
    println!("wrote {n} predictions to {}", out.join("predictions.csv").display());
    Ok(())
}

fn eval(args: RunArgs) -> Result<(), RunError> {
    let cfg = resolve(args)?;
    echo("eval", &cfg);
    let mut guard = OutputGuard::new();
    let report = run::run_eval(&cfg, &mut guard)?;
    guard.commit();
    print!("{}", report.to_text());
    println!("report in {}", cfg.output_dir.display());
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), RunError> {
    println!("# dtcn gradcheck, seeds 0..{}", args.seeds);
    let primitives = GradCheckConfig::default();
    let model = GradCheckConfig {
        rel_tol: 1e-5,
        ..GradCheckConfig::default()
    };
    let outcomes = run::run_gradcheck(args.seeds, primitives, model)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    println!("{} checks, {failed} failed", outcomes.len());
    if failed > 0 {
        return Err(RunError::GradCheck(format!("{failed} of {} checks", outcomes.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtcn: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
