use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uygraph_cli::config::parse_config_text;
use uygraph_cli::{cmd_augment, cmd_diagnose, cmd_simulate, cmd_sweep, cmd_train, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "uygraph", version, about = "Collapsing-node signed graph augmentation and diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Write the augmented graph, C matrix and negative-edge counts.
    Augment,
    /// Train one model per seed and report mean ± std test accuracy.
    Train,
    /// Spectrum, sensitivity, curvature and over-smoothing reports.
    Diagnose,
    /// Integrate the continuous dynamics and test for bi-cluster flocking.
    Simulate,
    /// Accuracy per CN count.
    Sweep,
}

#[derive(Args)]
struct Opts {
    /// key = value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Comma-separated SBM fields, e.g. `p_in=0.02,p_out=0.2`.
    #[arg(long, global = true)]
    sbm: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long = "cn-mult", global = true)]
    cn_mult: Option<String>,
    #[arg(long = "cn-cn", global = true, value_parser = ["none", "negative", "identity"])]
    cn_cn: Option<String>,
    #[arg(long, global = true)]
    delta: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    /// `0,1,2` or `0..10`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// Any other key, as key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Opts {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let named = [
            ("dataset", &self.dataset),
            ("sbm", &self.sbm),
            ("model", &self.model),
            ("cn_mult", &self.cn_mult),
            ("cn_cn", &self.cn_cn),
            ("delta", &self.delta),
            ("lr", &self.lr),
            ("epochs", &self.epochs),
            ("seeds", &self.seeds),
            ("out", &self.out),
        ];
        let mut out: Vec<(String, String)> =
            named.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {s:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config_text(&text, path)?
        }
        None => Vec::new(),
    };
    let cfg = RunConfig::resolve(&file, &cli.opts.overrides()?)?;
    match cli.command {
        Command::Augment => {
            let s = cmd_augment(&cfg)?;
            println!("K = {}, |E-| = {}, bound {}", s["num_cns"], s["negative_edges"], s["theorem_bound"]);
        }
        Command::Train => {
            let r = cmd_train(&cfg)?;
            println!(
                "{}: test accuracy {:.2} ± {:.2} over {} seed(s), lr {}",
                r.model,
                100.0 * r.mean_test_accuracy,
                100.0 * r.std_test_accuracy,
                r.runs.len(),
                r.lr
            );
        }
        Command::Diagnose => {
            let r = cmd_diagnose(&cfg)?;
            let s = &r["spectrum"];
            if !s.is_null() {
                println!(
                    "negative eigenvalues: {} (|E-| = {}, bound {})",
                    s["negative_count"], s["edge_negative_count"], s["theorem_bound"]
                );
            }
            println!("curvature delta: min {}, mean {}", r["curvature"]["min_delta"], r["curvature"]["mean_delta"]);
            println!("x-block std: augmented {}, plain {}", r["osm"]["augmented"]["x_block_std"], r["osm"]["baseline"]["x_block_std"]);
        }
        Command::Simulate => {
            let r = cmd_simulate(&cfg)?;
            let f = &r["flocking"];
            println!("explosive: {}, flocked: {}", r["explosive"], if f.is_null() { "not assessed".into() } else { f["flocked"].to_string() });
        }
        Command::Sweep => {
            for row in cmd_sweep(&cfg)? {
                println!("K = {:>3}: {:.2} ± {:.2}", row.k, 100.0 * row.mean_accuracy, 100.0 * row.std_accuracy);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UYGRAPH_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
