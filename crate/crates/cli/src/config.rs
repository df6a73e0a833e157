//! Resolved run configuration, written as `run_config.json` next to outputs.

use std::path::PathBuf;
use std::str::FromStr;

use pdca::data::{DEFAULT_HALF_CIRCLE_INNER, DEFAULT_HALF_CIRCLE_OUTER, DEFAULT_MOON_NOISE_DIM, DEFAULT_MOON_NOISE_SIGMA};
use pdca::graph::{KernelScaling, WindowSpec, DEFAULT_PATCH_HALFWIDTH};
use pdca::solver::InitMode;
use pdca::{Normalization, PrecondKind, SolverConfig, StepSize};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub solver: SolverConfig,
    pub mode: Normalization,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` means available parallelism.
    pub threads: Option<usize>,
    /// When false, every wall-clock field is written as zero so repeated
    /// runs produce identical files.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Segment(SegmentTask),
    Cluster(ClusterTask),
    Bench(BenchTask),
    Graph(GraphTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGraphSpec {
    pub window: WindowSpec,
    pub patch_halfwidth: usize,
    /// Kernel bandwidth on `[0, 1]` colors; `None` uses `(ln n + 1) / 255`.
    pub sigma: Option<f64>,
}

impl Default for ImageGraphSpec {
    fn default() -> Self {
        ImageGraphSpec {
            window: WindowSpec::Box { dist: 8 },
            patch_halfwidth: DEFAULT_PATCH_HALFWIDTH,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageSource {
    Files {
        image: PathBuf,
        prior: PathBuf,
        truth: Option<PathBuf>,
    },
    /// Two-region test image with known ground truth.
    Synthetic {
        width: usize,
        height: usize,
        noise: f64,
        prior_fraction: f64,
        seed: u64,
    },
}

impl ImageSource {
    pub fn synthetic(width: usize, height: usize) -> Self {
        ImageSource::Synthetic {
            width,
            height,
            noise: 0.03,
            prior_fraction: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTask {
    pub source: ImageSource,
    pub graph: ImageGraphSpec,
    pub init: InitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    TwoMoons {
        n: usize,
        noise_dim: usize,
        noise_sigma: f64,
        seed: u64,
    },
    HalfCircle {
        n: usize,
        inner: (f64, f64),
        outer: (f64, f64),
        seed: u64,
    },
    Mnist {
        files: Vec<(PathBuf, PathBuf)>,
        digits: Vec<u8>,
        pca_dim: usize,
    },
    Csv {
        path: PathBuf,
    },
}

impl FromStr for DataSource {
    type Err = RunError;

    /// `twomoons:N`, `halfcircle:N`, `mnist:IMAGES,LABELS[;IMAGES,LABELS...]`
    /// or `csv:PATH`.
    fn from_str(s: &str) -> Result<Self, RunError> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| RunError::input(format!("data source {s:?} must look like kind:argument")))?;
        let count = || -> Result<usize, RunError> {
            arg.parse()
                .map_err(|_| RunError::input(format!("bad point count {arg:?}")))
        };
        match kind {
            "twomoons" => Ok(DataSource::TwoMoons {
                n: count()?,
                noise_dim: DEFAULT_MOON_NOISE_DIM,
                noise_sigma: DEFAULT_MOON_NOISE_SIGMA,
                seed: 0,
            }),
            "halfcircle" => Ok(DataSource::HalfCircle {
                n: count()?,
                inner: DEFAULT_HALF_CIRCLE_INNER,
                outer: DEFAULT_HALF_CIRCLE_OUTER,
                seed: 0,
            }),
            "mnist" => {
                let files = arg
                    .split(';')
                    .map(|pair| {
                        pair.split_once(',')
                            .map(|(i, l)| (PathBuf::from(i), PathBuf::from(l)))
                            .ok_or_else(|| RunError::input("mnist source needs IMAGES,LABELS"))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(DataSource::Mnist {
                    files,
                    digits: vec![4, 9],
                    pca_dim: 50,
                })
            }
            "csv" => Ok(DataSource::Csv { path: arg.into() }),
            _ => Err(RunError::input(format!("unknown data source {kind:?}"))),
        }
    }
}

impl DataSource {
    pub fn set_seed(&mut self, s: u64) {
        match self {
            DataSource::TwoMoons { seed, .. } | DataSource::HalfCircle { seed, .. } => *seed = s,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTask {
    pub data: DataSource,
    pub knn: usize,
    pub scaling: KernelScaling,
    /// Fraction of each class revealed as prior; 0 for unsupervised runs.
    pub supervised_frac: f64,
    pub supervision_seed: u64,
    /// `None`: from the prior when supervised, second eigenvector otherwise.
    pub init: Option<InitMode>,
}

impl ClusterTask {
    pub fn resolved_init(&self) -> InitMode {
        self.init.unwrap_or(if self.supervised_frac > 0.0 {
            InitMode::FromPrior
        } else {
            InitMode::SecondEigvec
        })
    }
}

/// When a bench run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchThreshold {
    /// First outer step whose quality score (DICE, or accuracy for
    /// clustering) reaches `target`.
    Metric { target: f64 },
    /// First outer step with `|grad F(u^t)|_inf <= rel |grad F(u^0)|_inf`.
    Gradient { rel: f64 },
    /// The solver's own stopping rule.
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTask {
    /// A segment or cluster task to sweep.
    pub base: Box<Task>,
    pub kinds: Vec<PrecondKind>,
    pub steps: Vec<StepSize>,
    pub modes: Vec<Normalization>,
    pub threshold: BenchThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    Image { source: ImageSource, graph: ImageGraphSpec },
    Points { data: DataSource, knn: usize, scaling: KernelScaling },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTask {
    pub source: GraphSource,
    pub power_iters: usize,
    pub seed: u64,
}

pub fn parse_window(s: &str) -> Result<WindowSpec, RunError> {
    match s {
        "sparse9" => Ok(WindowSpec::default_sparse_nine()),
        "scatter" => Ok(WindowSpec::default_sparse_scatter()),
        _ => {
            let size = s
                .strip_prefix("box:")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| RunError::input(format!("window {s:?} must be box:SIZE, sparse9 or scatter")))?;
            WindowSpec::square(size).map_err(RunError::from)
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Normalization, RunError> {
    match s {
        "norm" | "normalized" => Ok(Normalization::Normalized),
        "unnorm" | "unnormalized" => Ok(Normalization::Unnormalized),
        _ => Err(RunError::input(format!("mode {s:?} must be norm or unnorm"))),
    }
}

pub fn parse_precond(s: &str) -> Result<PrecondKind, RunError> {
    match s {
        "jd" => Ok(PrecondKind::DampedJacobi),
        "jp" => Ok(PrecondKind::PerturbedJacobi),
        "rich" => Ok(PrecondKind::Richardson),
        _ => Err(RunError::input(format!("preconditioner {s:?} must be jd, jp or rich"))),
    }
}

pub fn precond_name(k: PrecondKind) -> &'static str {
    match k {
        PrecondKind::DampedJacobi => "jd",
        PrecondKind::PerturbedJacobi => "jp",
        PrecondKind::Richardson => "rich",
    }
}

pub fn mode_name(m: Normalization) -> &'static str {
    match m {
        Normalization::Normalized => "norm",
        Normalization::Unnormalized => "unnorm",
    }
}

pub fn parse_scaling(s: &str) -> Result<KernelScaling, RunError> {
    let bad = || RunError::input(format!("scaling {s:?} must be local:M or fixed:SIGMA"));
    match s.split_once(':') {
        Some(("local", m)) => Ok(KernelScaling::LocalScaling {
            m: m.parse().map_err(|_| bad())?,
        }),
        Some(("fixed", v)) => Ok(KernelScaling::Fixed {
            sigma: v.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

pub fn parse_step(s: &str) -> Result<StepSize, RunError> {
    s.parse::<StepSize>().map_err(RunError::from)
}

/// `WxH` or a single side length.
pub fn parse_size(s: &str) -> Result<(usize, usize), RunError> {
    let bad = || RunError::input(format!("size {s:?} must be WIDTHxHEIGHT"));
    match s.split_once('x') {
        Some((w, h)) => Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?)),
        None => {
            let v = s.parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_flags() {
        assert_eq!(parse_window("box:15").unwrap(), WindowSpec::Box { dist: 8 });
        assert_eq!(parse_window("sparse9").unwrap(), WindowSpec::default_sparse_nine());
        assert_eq!(parse_window("scatter").unwrap(), WindowSpec::default_sparse_scatter());
        assert!(parse_window("box:14").is_err());
        assert!(parse_window("ring").is_err());
    }

    #[test]
    fn data_flags() {
        assert!(matches!("twomoons:2000".parse::<DataSource>().unwrap(), DataSource::TwoMoons { n: 2000, .. }));
        assert!(matches!("halfcircle:10".parse::<DataSource>().unwrap(), DataSource::HalfCircle { n: 10, .. }));
        match "mnist:a,b;c,d".parse::<DataSource>().unwrap() {
            DataSource::Mnist { files, .. } => assert_eq!(files.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!("moons:3".parse::<DataSource>().is_err());
    }

    #[test]
    fn misc_flags() {
        assert_eq!(parse_scaling("local:10").unwrap(), KernelScaling::LocalScaling { m: 10 });
        assert_eq!(parse_scaling("fixed:0.5").unwrap(), KernelScaling::Fixed { sigma: 0.5 });
        assert_eq!(parse_step("inf").unwrap(), StepSize::Infinite);
        assert_eq!(parse_size("64x32").unwrap(), (64, 32));
        assert_eq!(parse_size("64").unwrap(), (64, 64));
        assert_eq!(parse_precond("rich").unwrap(), PrecondKind::Richardson);
        assert_eq!(parse_mode("unnorm").unwrap(), Normalization::Unnormalized);
    }
}
