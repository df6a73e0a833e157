use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdca::energy::EnergyParams;
use pdca::graph::DEFAULT_PATCH_HALFWIDTH;
use pdca::solver::{InitMode, SpectralBound};
use pdca::{Normalization, PrecondKind, SolverConfig, StepSize, StoppingRule};
use pdca_cli::config::{
    parse_mode, parse_precond, parse_scaling, parse_size, parse_step, parse_window, BenchTask, BenchThreshold,
    ClusterTask, DataSource, GraphSource, GraphTask, ImageGraphSpec, ImageSource, SegmentTask, Task,
};
use pdca_cli::run::load_config;
use pdca_cli::{execute, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "pdca", version, about = "Graph Ginzburg-Landau segmentation and clustering by preconditioned DCA")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image from a red/blue prior mask.
    Segment {
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Initial guess: prior, eigvec or random:SEED.
        #[arg(long, default_value = "prior")]
        init: String,
    },
    /// Cluster a point cloud on its KNN graph.
    Cluster {
        #[command(flatten)]
        points: PointArgs,
        /// Fraction of each class revealed as prior (0 = unsupervised).
        #[arg(long, default_value_t = 0.0)]
        supervised_frac: f64,
        #[arg(long, default_value_t = 0)]
        supervision_seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sweep preconditioners, step sizes and Laplacian modes.
    Bench {
        #[command(flatten)]
        image: ImageArgs,
        /// Cluster a point cloud instead of segmenting an image.
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 10)]
        knn: usize,
        #[arg(long, default_value = "local:10")]
        scaling: String,
        #[arg(long, default_value_t = 0.0)]
        supervised_frac: f64,
        #[arg(long, default_value = "jd,jp,rich", value_delimiter = ',')]
        kinds: Vec<String>,
        #[arg(long, default_value = "0.01,0.05,0.1,1,5,inf", value_delimiter = ',')]
        ks: Vec<String>,
        #[arg(long, default_value = "norm,unnorm", value_delimiter = ',')]
        modes: Vec<String>,
        /// Count steps until DICE (or accuracy) reaches this value.
        #[arg(long, default_value_t = 0.99)]
        target: f64,
        /// Count steps until the stopping rule fires instead.
        #[arg(long)]
        until_stop: bool,
        /// Count steps until the gradient max-norm drops by this factor.
        #[arg(long, conflicts_with = "until_stop")]
        grad_rel: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Build a graph, write it as GLSW and print statistics.
    Graph {
        #[command(flatten)]
        image: ImageArgs,
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 10)]
        knn: usize,
        #[arg(long, default_value = "local:10")]
        scaling: String,
        #[arg(long, default_value = "norm")]
        mode: String,
        #[arg(long, default_value_t = 150)]
        power_iters: usize,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun from a saved run_config.json.
    Replay {
        #[arg(long)]
        config: PathBuf,
        /// Write outputs here instead of the saved directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ImageArgs {
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Use the built-in two-region test image of this size (e.g. 64x64).
    #[arg(long, conflicts_with = "image")]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 0)]
    synthetic_seed: u64,
    /// box:SIZE, sparse9 or scatter.
    #[arg(long, default_value = "box:15")]
    window: String,
    #[arg(long, default_value_t = DEFAULT_PATCH_HALFWIDTH)]
    patch_halfwidth: usize,
    /// Kernel bandwidth on [0,1] colors (default (ln n + 1) / 255).
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct PointArgs {
    /// twomoons:N, halfcircle:N, mnist:IMAGES,LABELS[;IMAGES,LABELS] or csv:PATH.
    #[arg(long)]
    data: String,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 10)]
    knn: usize,
    /// local:M or fixed:SIGMA.
    #[arg(long, default_value = "local:10")]
    scaling: String,
}

#[derive(Args)]
struct SolverArgs {
    /// norm or unnorm.
    #[arg(long, default_value = "norm")]
    mode: String,
    /// jd, jp or rich.
    #[arg(long, default_value = "rich")]
    precond: String,
    /// Step size, a positive number or inf.
    #[arg(long = "k", default_value = "inf")]
    step: String,
    #[arg(long, default_value_t = 4)]
    sweeps: usize,
    #[arg(long, default_value_t = 100.0)]
    eps: f64,
    /// Convex split constant
    #[arg(long = "convex-shift", visible_alias = "c", default_value_t = 11.0)]
    convex_shift: f64,
    #[arg(long, default_value_t = 100.0)]
    eta: f64,
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    /// Relative change tolerance of the stopping rule.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Consecutive steps the tolerance must hold.
    #[arg(long, default_value_t = 10)]
    stop_window: usize,
    /// Run exactly --max-outer steps.
    #[arg(long)]
    fixed_steps: bool,
    #[arg(long, default_value_t = pdca::precond::DEFAULT_DELTA0)]
    delta0: f64,
    /// Use the analytic spectral bound (2 or 2 max degree) for Richardson.
    #[arg(long)]
    analytic_bound: bool,
    #[arg(long, default_value_t = pdca::precond::DEFAULT_POWER_ITERS)]
    power_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Write wall-clock times as zero so reruns give identical files.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn solver(&self) -> Result<SolverConfig, RunError> {
        Ok(SolverConfig {
            params: EnergyParams {
                epsilon: self.eps,
                eta: self.eta,
                convex_shift: self.convex_shift,
            },
            step: parse_step(&self.step)?,
            precond: parse_precond(&self.precond)?,
            inner_sweeps: self.sweeps,
            max_outer: self.max_outer,
            stop: if self.fixed_steps {
                StoppingRule::MaxOuter
            } else {
                StoppingRule::RelChange {
                    tol: self.tol,
                    window: self.stop_window,
                }
            },
            delta0: self.delta0,
            spectral: if self.analytic_bound {
                SpectralBound::Analytic
            } else {
                SpectralBound::PowerMethod { iters: self.power_iters }
            },
            seed: self.seed,
            track_energy: true,
        })
    }

    fn config(&self, task: Task) -> Result<RunConfig, RunError> {
        let config = RunConfig {
            task,
            solver: self.solver()?,
            mode: parse_mode(&self.mode)?,
            out: self.out.clone(),
            threads: self.threads,
            record_timing: !self.no_timing,
        };
        config.solver.validate()?;
        Ok(config)
    }
}

impl ImageArgs {
    fn source(&self) -> Result<ImageSource, RunError> {
        if let Some(size) = &self.synthetic {
            let (w, h) = parse_size(size)?;
            let mut src = ImageSource::synthetic(w, h);
            if let ImageSource::Synthetic { seed, .. } = &mut src {
                *seed = self.synthetic_seed;
            }
            return Ok(src);
        }
        let image = self
            .image
            .clone()
            .ok_or_else(|| RunError::input("--image (or --synthetic) is required"))?;
        let prior = self
            .prior
            .clone()
            .ok_or_else(|| RunError::input("--prior is required with --image"))?;
        Ok(ImageSource::Files {
            image,
            prior,
            truth: self.truth.clone(),
        })
    }

    fn graph(&self) -> Result<ImageGraphSpec, RunError> {
        Ok(ImageGraphSpec {
            window: parse_window(&self.window)?,
            patch_halfwidth: self.patch_halfwidth,
            sigma: self.sigma,
        })
    }

    fn task(&self, init: InitMode) -> Result<Task, RunError> {
        Ok(Task::Segment(SegmentTask {
            source: self.source()?,
            graph: self.graph()?,
            init,
        }))
    }
}

fn parse_init(s: &str) -> Result<InitMode, RunError> {
    match s {
        "prior" => Ok(InitMode::FromPrior),
        "eigvec" => Ok(InitMode::SecondEigvec),
        _ => s
            .strip_prefix("random:")
            .and_then(|v| v.parse().ok())
            .map(|seed| InitMode::Random { seed })
            .ok_or_else(|| RunError::input(format!("init {s:?} must be prior, eigvec or random:SEED"))),
    }
}

fn data_source(spec: &str, seed: u64) -> Result<DataSource, RunError> {
    let mut d: DataSource = spec.parse()?;
    d.set_seed(seed);
    Ok(d)
}

fn build(cli: Cli) -> Result<RunConfig, RunError> {
    match cli.command {
        Command::Segment { image, solver, init } => solver.config(image.task(parse_init(&init)?)?),
        Command::Cluster {
            points,
            supervised_frac,
            supervision_seed,
            solver,
        } => {
            let task = ClusterTask {
                data: data_source(&points.data, points.data_seed)?,
                knn: points.knn,
                scaling: parse_scaling(&points.scaling)?,
                supervised_frac,
                supervision_seed,
                init: None,
            };
            solver.config(Task::Cluster(task))
        }
        Command::Bench {
            image,
            data,
            knn,
            scaling,
            supervised_frac,
            kinds,
            ks,
            modes,
            target,
            until_stop,
            grad_rel,
            solver,
        } => {
            let base = match data {
                Some(d) => Task::Cluster(ClusterTask {
                    data: data_source(&d, 0)?,
                    knn,
                    scaling: parse_scaling(&scaling)?,
                    supervised_frac,
                    supervision_seed: 0,
                    init: None,
                }),
                None => image.task(InitMode::FromPrior)?,
            };
            let task = BenchTask {
                base: Box::new(base),
                kinds: kinds.iter().map(|k| parse_precond(k)).collect::<Result<Vec<PrecondKind>, _>>()?,
                steps: ks.iter().map(|k| parse_step(k)).collect::<Result<Vec<StepSize>, _>>()?,
                modes: modes.iter().map(|m| parse_mode(m)).collect::<Result<Vec<Normalization>, _>>()?,
                threshold: match (until_stop, grad_rel) {
                    (true, _) => BenchThreshold::Stop,
                    (false, Some(rel)) => BenchThreshold::Gradient { rel },
                    (false, None) => BenchThreshold::Metric { target },
                },
            };
            solver.config(Task::Bench(task))
        }
        Command::Graph {
            image,
            data,
            knn,
            scaling,
            mode,
            power_iters,
            threads,
            out,
        } => {
            let source = match data {
                Some(d) => GraphSource::Points {
                    data: data_source(&d, 0)?,
                    knn,
                    scaling: parse_scaling(&scaling)?,
                },
                None => GraphSource::Image {
                    source: image.source()?,
                    graph: image.graph()?,
                },
            };
            Ok(RunConfig {
                task: Task::Graph(GraphTask {
                    source,
                    power_iters,
                    seed: 0,
                }),
                solver: SolverConfig::default(),
                mode: parse_mode(&mode)?,
                out,
                threads,
                record_timing: true,
            })
        }
        Command::Replay { config, out } => {
            let mut cfg = load_config(&config)?;
            if out.is_some() {
                cfg.out = out;
            }
            Ok(cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match build(cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdca: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
