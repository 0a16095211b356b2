use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use navkit::config::{PolicyKind, RunConfig};
use navkit::pipeline::{self, PipelineError};

#[derive(Parser, Debug)]
#[command(name = "amr-navkit", version, about = "Object-relative navigation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides run.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides run.workers (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate procedural scenes as JSON files.
    GenScenes {
        #[command(flatten)]
        common: Common,
        /// Number of scenes; defaults to run.scene_count.
        #[arg(long)]
        count: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate expert demonstrations for every scene.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Scene directory; defaults to dataset.scenes_dir.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Defaults to dataset.episodes_per_scene.
        #[arg(long)]
        episodes_per_scene: Option<usize>,
        /// Dataset path; defaults to dataset.out. The manifest is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed-loop benchmark.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Scene directory; defaults to dataset.scenes_dir.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Defaults to eval.n_tasks.
        #[arg(long)]
        n_tasks: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Decode codec tokens without residuals.
        #[arg(long)]
        no_residuals: bool,
        /// Output directory for report.json, report.csv and traces.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a report.json.
    Report {
        report: PathBuf,
        /// Also write the bucket table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Oracle,
    CodecRoundtrip,
}

fn load(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.run.master_seed = s;
    }
    if let Some(w) = common.workers {
        cfg.run.workers = w;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::GenScenes { common, count, out } => {
            let cfg = load(&common)?;
            let paths = pipeline::cmd_gen_scenes(&cfg, count.unwrap_or(cfg.run.scene_count), &out)?;
            println!("wrote {} scenes to {}", paths.len(), out.display());
        }
        Command::GenData {
            common,
            scenes,
            episodes_per_scene,
            out,
        } => {
            let cfg = load(&common)?;
            let scenes = scenes.unwrap_or_else(|| cfg.dataset.scenes_dir.clone());
            let out = out.unwrap_or_else(|| cfg.dataset.out.clone());
            let per = episodes_per_scene.unwrap_or(cfg.dataset.episodes_per_scene);
            let s = pipeline::cmd_gen_data(&cfg, &scenes, per, &out)?;
            println!(
                "wrote {} records ({} skipped) from {} scenes to {}",
                s.manifest.record_count,
                s.failed,
                s.manifest.scene_count,
                out.display()
            );
        }
        Command::Eval {
            common,
            scenes,
            n_tasks,
            policy,
            no_residuals,
            out,
        } => {
            let cfg = load(&common)?;
            let scenes = scenes.unwrap_or_else(|| cfg.dataset.scenes_dir.clone());
            let kind = match policy {
                Some(PolicyArg::Oracle) => PolicyKind::Oracle,
                Some(PolicyArg::CodecRoundtrip) => PolicyKind::CodecRoundtrip,
                None => cfg.eval.policy,
            };
            let residuals = cfg.eval.residuals && !no_residuals;
            let (report, _) =
                pipeline::cmd_eval(&cfg, &scenes, n_tasks.unwrap_or(cfg.eval.n_tasks), kind, residuals, &out)?;
            print!("{}", pipeline::render_report(&report));
        }
        Command::Report { report, out } => {
            print!("{}", pipeline::cmd_report(&report, out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
