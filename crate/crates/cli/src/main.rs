use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndm::geometry::geodesic_integrate;
use ndm::harness::checks::{self, CheckResult};
use ndm::harness::{geometry_report, make_dataset, train, write_run, Checkpoint, Task, TrainConfig};

#[derive(Parser)]
#[command(name = "ndm", version, about = "Train and inspect neural differential manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics, checkpoint and geometry report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer curvature and volume statistics of a checkpoint as JSON.
    Geometry {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset whose inputs are evaluated.
        #[arg(long)]
        task: String,
        #[arg(long)]
        n: usize,
        /// Dataset seed; defaults to the checkpoint's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a geodesic of one layer's learned metric; CSV of t, x, speed.
    Geodesic {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, required = true)]
        v0: Vec<f64>,
        #[arg(long = "T", default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare reverse-mode gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = checks::GRADCHECK_DRAWS)]
        draws: usize,
    },
    /// Check curvature and geodesics on closed-form metrics.
    Oracle,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<ndm::Error> for Failure {
    fn from(e: ndm::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type CliResult = Result<bool, Failure>;

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| Failure::Usage(format!("cannot load checkpoint {}: {e}", path.display())))
}

fn report_checks(results: &[CheckResult]) -> bool {
    for r in results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    checks::all_passed(results)
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Train { config, seed, out } => {
            let mut cfg = TrainConfig::load(&config)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", config.display())))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o.to_string_lossy().into_owned();
            }
            let outcome = train(&cfg)?;
            let dir = PathBuf::from(&cfg.output_dir);
            write_run(&outcome, &cfg, &dir)?;
            for f in &outcome.flags {
                eprintln!("warning: {f}");
            }
            match outcome.final_accuracy {
                Some(a) => println!("trained {} steps, accuracy {a}, task loss {}", cfg.steps, outcome.final_task_loss),
                None => println!("trained {} steps, task loss {}", cfg.steps, outcome.final_task_loss),
            }
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Geometry { checkpoint, task, n, seed, out } => {
            let ck = load_checkpoint(&checkpoint)?;
            let task: Task = task.parse().map_err(|e: ndm::Error| Failure::Usage(e.to_string()))?;
            if n == 0 {
                return Err(Failure::Usage("--n must be positive".into()));
            }
            let model = ck.model()?;
            let points = make_dataset(task, n, seed.unwrap_or(ck.config.seed))?
                .padded_inputs(ck.config.d)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let report = geometry_report(&model, &points, ck.config.curvature_h)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Run(e.to_string()))?;
            emit(out.as_deref(), &(json + "\n"))?;
            Ok(true)
        }
        Command::Geodesic { checkpoint, layer, x0, v0, duration, steps, out } => {
            let ck = load_checkpoint(&checkpoint)?;
            let model = ck.model()?;
            let layers = model.layers();
            let Some(l) = layers.get(layer) else {
                return Err(Failure::Usage(format!("layer {layer} out of range; the model has {} layers", layers.len())));
            };
            let d = ck.config.d;
            if x0.len() != d || v0.len() != d {
                return Err(Failure::Usage(format!("--x0 and --v0 need {d} values each")));
            }
            if !(duration.is_finite()) || steps == 0 {
                return Err(Failure::Usage("--T must be finite and --steps positive".into()));
            }
            let field = l.metric_net.field(model.params());
            let path = geodesic_integrate(&field, &x0, &v0, duration, steps)?;
            let mut csv = String::from("t");
            for i in 0..d {
                let _ = write!(csv, ",x{i}");
            }
            csv.push_str(",speed\n");
            let mut buf = ryu::Buffer::new();
            for s in &path {
                csv.push_str(buf.format(s.t));
                for v in &s.x {
                    csv.push(',');
                    csv.push_str(buf.format(*v));
                }
                csv.push(',');
                csv.push_str(buf.format(s.speed));
                csv.push('\n');
            }
            emit(out.as_deref(), &csv)?;
            Ok(true)
        }
        Command::Gradcheck { seed, draws } => {
            if draws == 0 {
                return Err(Failure::Usage("--draws must be positive".into()));
            }
            Ok(report_checks(&checks::gradcheck_suite(seed, draws)?))
        }
        Command::Oracle => Ok(report_checks(&checks::oracle_suite()?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
