use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use vkoga_ie::config::{self, ExperimentConfig};
use vkoga_ie::model_select::select_epsilon;
use vkoga_ie::pipeline::{
    self, assemble_training_set, compare, load_model, save_model, training_trajectories,
    CompareOptions, SurrogateModel,
};
use vkoga_ie::report;
use vkoga_ie::vkoga::SelectionRule;

#[derive(Parser)]
#[command(
    name = "vkoga-ie",
    version,
    about = "Kernel surrogate initializers for implicit Euler"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training trajectories, select epsilon and train a model.
    Offline {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output model file (default: <output dir>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one parameter with a trained model as Newton initializer.
    Online {
        #[arg(long)]
        model: PathBuf,
        /// Parameter vector, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        mu: Vec<f64>,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        /// Use the previous-value initializer instead of the model.
        #[arg(long)]
        baseline: bool,
        /// Write the run report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare previous-value and surrogate initialization on the test set.
    Bench {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Trained model; trained from the config when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory (default: the config's output dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Run test cases concurrently (distorts timings).
        #[arg(long)]
        parallel: bool,
    },
    /// Run only the cross validation and write the score curve.
    Cv {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output CSV (default: <output dir>/cv.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        grid_count: Option<usize>,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment TOML file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment (see `presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Greedy selection rule: f, p or fp.
    #[arg(long)]
    rule: Option<SelectionRule>,
    /// Fixed shape parameter; skips cross validation.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_path(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => bail!("either --config or --preset is required"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(rule) = self.rule {
            cfg.offline.train.rule = rule;
        }
        if let Some(eps) = self.epsilon {
            cfg.offline.train.epsilon = Some(eps);
        }
        Ok(cfg)
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_offline(cfg: &ExperimentConfig, model_out: &Path) -> Result<SurrogateModel> {
    let outcome = pipeline::offline(&cfg.offline_config()?)?;
    let p = &outcome.model.provenance;
    println!(
        "training points: {} ({} before dedup)",
        p.training_points, p.training_points_before_dedup
    );
    println!("epsilon: {} ({})", p.epsilon, p.epsilon_source);
    println!("centers: {} ({:?})", p.selected_centers, p.stop_reason);
    if let Some(cv) = &outcome.cv {
        let path = model_out.with_file_name("cv.csv");
        report::write_cv_csv(&cv.scores, create_file(&path)?)?;
        println!("cv scores: {}", path.display());
    }
    save_model(&outcome.model, model_out)?;
    println!("model: {}", model_out.display());
    Ok(outcome.model)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Offline { exp, out } => {
            let cfg = exp.load()?;
            let out = out.unwrap_or_else(|| cfg.output_dir().join("model.json"));
            run_offline(&cfg, &out)?;
        }
        Command::Online {
            model,
            mu,
            dt,
            t_end,
            baseline,
            out,
        } => {
            let model = load_model(&model)?;
            let newton = Default::default();
            let (_, rep) = if baseline {
                let problem = model.provenance.problem.build()?;
                pipeline::baseline(problem.as_ref(), &mu, dt, t_end, &newton)?
            } else {
                pipeline::online(&model, &mu, dt, t_end, &newton)?
            };
            println!(
                "mu = {}, dt = {dt}: {} steps, mean Newton iterations {:.4}, {:.4} s",
                report::format_mu(&mu),
                rep.steps,
                rep.mean_iterations,
                rep.wall_time_s
            );
            if let Some(path) = out {
                serde_json::to_writer_pretty(create_file(&path)?, &rep)?;
            }
            if let Some(f) = &rep.failure {
                bail!("integration stopped early: {f}");
            }
        }
        Command::Bench {
            exp,
            model,
            out,
            repetitions,
            parallel,
        } => {
            let cfg = exp.load()?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            let model = match model {
                Some(path) => load_model(&path)?,
                None => run_offline(&cfg, &dir.join("model.json"))?,
            };
            let online = cfg.online_section()?;
            let options = CompareOptions {
                repetitions: repetitions.unwrap_or(online.repetitions),
                parallel,
            };
            let cases = cfg.test_cases()?;
            info!(
                "{} test cases, {} repetitions",
                cases.len(),
                options.repetitions
            );
            let rep = compare(&model, &cases, options, &cfg.newton_settings())?;
            report::write_comparison_csv(&rep, create_file(&dir.join("comparison.csv"))?)?;
            serde_json::to_writer_pretty(create_file(&dir.join("comparison.json"))?, &rep)?;
            let table = report::render_table(&rep);
            fs::write(dir.join("table.txt"), &table)?;
            print!("{}", report::render_rows(&rep));
            println!();
            print!("{table}");
            println!("results: {}", dir.display());
            if rep.summary.is_none() {
                bail!("every comparison run failed");
            }
        }
        Command::Cv {
            exp,
            out,
            grid_count,
        } => {
            let mut cfg = exp.load()?;
            cfg.offline.train.epsilon = None;
            if let Some(k) = grid_count {
                cfg.offline.cv.grid_count = k;
            }
            let off = cfg.offline_config()?;
            let assembled = assemble_training_set(&training_trajectories(&off)?)?;
            let cv_cfg = off.cross_validation.expect("epsilon cleared above");
            let res = select_epsilon(&assembled.data, &cv_cfg)?;
            let out = out.unwrap_or_else(|| cfg.output_dir().join("cv.csv"));
            report::write_cv_csv(&res.scores, create_file(&out)?)?;
            println!(
                "epsilon: {} (score {:e}) over {} points",
                res.epsilon.value(),
                res.best().score,
                assembled.data.len()
            );
            println!("cv scores: {}", out.display());
        }
        Command::Presets => {
            for name in config::preset_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
