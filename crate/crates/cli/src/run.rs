use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pdca::data::{
    gen_half_circles, gen_two_moons, gen_two_region_image, load_image, load_mnist_idx, load_prior, pca_reduce,
    read_point_cloud, sample_supervision, write_mask, ImageBuffer, PointCloud,
};
use pdca::energy::{grad_total, threshold};
use pdca::linalg::norm_inf;
use pdca::graph::{build_image_graph, build_knn_graph, default_bandwidth, write_graph, SparseSym};
use pdca::metrics::{accuracy, ConfusionCounts, MetricReport};
use pdca::precond::power_method;
use pdca::solver::{initialize, InitMode, Observation, Solver};
use pdca::{LaplacianOp, Normalization, PriorField, SolveTrace, SolverConfig};
use serde::Serialize;

use crate::config::{
    mode_name, precond_name, BenchThreshold, ClusterTask, DataSource, GraphSource, ImageGraphSpec, ImageSource,
    RunConfig, SegmentTask, Task,
};
use crate::{RunError, THREADS_ENV};

type Result<T> = std::result::Result<T, RunError>;

/// Thread count: explicit value, else `PDCA_THREADS`, else available
/// parallelism.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize> {
    if let Some(t) = explicit {
        return if t == 0 { Err(RunError::input("thread count must be >= 1")) } else { Ok(t) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| RunError::input(format!("{THREADS_ENV}={v:?} is not a positive integer")));
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::compute(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Validate, pin the thread count, run, and write outputs.
pub fn execute(config: &RunConfig) -> Result<()> {
    let mut config = config.clone();
    config.solver.validate().map_err(RunError::from)?;
    let threads = resolve_threads(config.threads)?;
    config.threads = Some(threads);
    log::info!("running with {threads} threads");
    with_threads(threads, || match &config.task {
        Task::Segment(_) => run_segment(&config).map(|o| log::info!("{}", summary(&o.report))),
        Task::Cluster(_) => run_cluster(&config).map(|o| log::info!("{}", summary(&o.report))),
        Task::Bench(_) => run_bench(&config).map(|rows| log::info!("{} benchmark rows", rows.len())),
        Task::Graph(_) => run_graph(&config).map(|g| println!("{}", g.describe())),
    })?
}

fn summary(r: &MetricReport) -> String {
    let mut parts = vec![format!("iterations={} sweeps={}", r.iterations, r.inner_sweeps)];
    if let Some(d) = r.dice {
        parts.push(format!("dice={d:.6}"));
    }
    if let Some(j) = r.jaccard {
        parts.push(format!("jaccard={j:.6}"));
    }
    if let Some(a) = r.accuracy {
        parts.push(format!("accuracy={a:.6}"));
    }
    parts.push(format!("seconds={:.3}", r.seconds));
    parts.join(" ")
}

fn out_dir(config: &RunConfig) -> Result<Option<PathBuf>> {
    match &config.out {
        None => Ok(None),
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| RunError::input(format!("cannot create {}: {e}", dir.display())))?;
            Ok(Some(dir.clone()))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_common(dir: &Path, config: &RunConfig, trace: &SolveTrace, report: &MetricReport) -> Result<()> {
    write_json(&dir.join("run_config.json"), config)?;
    trace.write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
    write_json(&dir.join("metrics.json"), report)
}

/// A loaded or generated image with its prior and optional ground truth.
pub struct ImageProblem {
    pub image: ImageBuffer,
    pub prior: PriorField,
    pub truth: Option<Vec<i8>>,
}

fn load_truth(path: &Path, width: usize, height: usize) -> Result<Vec<i8>> {
    let img = load_image(path).map_err(|e| RunError::from(e).context("ground truth"))?;
    if img.width() != width || img.height() != height {
        return Err(RunError::input(format!(
            "ground truth is {}x{}, image is {width}x{height}",
            img.width(),
            img.height()
        )));
    }
    Ok((0..width * height)
        .map(|i| if img.pixel(i % width, i / width)[0] > 0.5 { 1 } else { -1 })
        .collect())
}

pub fn load_image_problem(source: &ImageSource) -> Result<ImageProblem> {
    match source {
        ImageSource::Files { image, prior, truth } => {
            let img = load_image(image).map_err(|e| RunError::from(e).context("image"))?;
            let (w, h) = (img.width(), img.height());
            let prior = load_prior(prior, w, h).map_err(|e| RunError::from(e).context("prior"))?;
            if prior.support_size() == 0 {
                log::warn!("prior mask has no red or blue pixels");
            }
            let truth = truth.as_deref().map(|t| load_truth(t, w, h)).transpose()?;
            Ok(ImageProblem { image: img, prior, truth })
        }
        &ImageSource::Synthetic {
            width,
            height,
            noise,
            prior_fraction,
            seed,
        } => {
            let t = gen_two_region_image(width, height, noise, prior_fraction, seed)?;
            Ok(ImageProblem {
                image: t.image,
                prior: t.prior,
                truth: Some(t.truth),
            })
        }
    }
}

/// Bandwidth for `[0, 1]` colors: the usual `ln n + 1` rule is stated for
/// 0..255 intensities, so it is rescaled by 1/255.
pub fn image_sigma(spec: &ImageGraphSpec, n: usize) -> f64 {
    spec.sigma.unwrap_or_else(|| default_bandwidth(n) / 255.0)
}

pub fn build_image_weights(image: &ImageBuffer, spec: &ImageGraphSpec) -> Result<SparseSym> {
    let sigma = image_sigma(spec, image.len());
    let t = Instant::now();
    let w = build_image_graph(image, &spec.window, spec.patch_halfwidth, sigma)?;
    log::info!(
        "image graph: {} nodes, {} stored weights, sigma {sigma:.4}, {:.2}s",
        w.num_nodes(),
        w.nnz(),
        t.elapsed().as_secs_f64()
    );
    Ok(w)
}

pub struct SegmentOutcome {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<i8>,
    pub field: Vec<f64>,
    pub trace: SolveTrace,
    pub report: MetricReport,
}

fn segment_task(config: &RunConfig) -> Result<&SegmentTask> {
    match &config.task {
        Task::Segment(t) => Ok(t),
        _ => Err(RunError::input("not a segment configuration")),
    }
}

fn cluster_task(config: &RunConfig) -> Result<&ClusterTask> {
    match &config.task {
        Task::Cluster(t) => Ok(t),
        _ => Err(RunError::input("not a cluster configuration")),
    }
}

fn report_for(trace: &SolveTrace, seconds: f64, record_timing: bool) -> MetricReport {
    MetricReport {
        dice: None,
        jaccard: None,
        accuracy: None,
        iterations: trace.outer_iterations(),
        inner_sweeps: trace.total_sweeps(),
        seconds: if record_timing { seconds } else { 0.0 },
    }
}

pub fn run_segment(config: &RunConfig) -> Result<SegmentOutcome> {
    let task = segment_task(config)?;
    let problem = load_image_problem(&task.source)?;
    let weights = build_image_weights(&problem.image, &task.graph)?;
    let l = LaplacianOp::new(weights, config.mode);
    let start = Instant::now();
    let u0 = initialize(task.init, &l, &problem.prior)?;
    let solver = Solver::new(&l, &problem.prior, config.solver)?;
    let (u, mut trace) = solver.solve(u0)?;
    let seconds = start.elapsed().as_secs_f64();
    if !config.record_timing {
        trace.strip_timing();
    }
    let labels = u.thresholded();
    let mut report = report_for(&trace, seconds, config.record_timing);
    if let Some(truth) = &problem.truth {
        let c = ConfusionCounts::from_labels(&labels, truth)?;
        report.dice = Some(c.dice());
        report.jaccard = Some(c.jaccard());
    }
    let (width, height) = (problem.image.width(), problem.image.height());
    if let Some(dir) = out_dir(config)? {
        write_mask(&dir.join("mask.pgm"), &labels, width, height)?;
        write_common(&dir, config, &trace, &report)?;
    }
    Ok(SegmentOutcome {
        width,
        height,
        labels,
        field: u.into_vec(),
        trace,
        report,
    })
}

pub fn load_points(source: &DataSource) -> Result<PointCloud> {
    match source {
        &DataSource::TwoMoons {
            n,
            noise_dim,
            noise_sigma,
            seed,
        } => Ok(gen_two_moons(n, noise_dim, noise_sigma, seed)?),
        &DataSource::HalfCircle { n, inner, outer, seed } => Ok(gen_half_circles(n, inner, outer, seed)?),
        DataSource::Mnist { files, digits, pca_dim } => {
            let pairs: Vec<(&Path, &Path)> = files.iter().map(|(i, l)| (i.as_path(), l.as_path())).collect();
            let raw = load_mnist_idx(&pairs, digits)?;
            log::info!("mnist: {} images of dimension {}", raw.len(), raw.dim());
            Ok(pca_reduce(&raw, *pca_dim)?.projected)
        }
        DataSource::Csv { path } => {
            let f = File::open(path).map_err(|e| RunError::input(format!("{}: {e}", path.display())))?;
            Ok(read_point_cloud(std::io::BufReader::new(f))?)
        }
    }
}

pub struct ClusterOutcome {
    pub labels: Vec<i8>,
    pub truth: Option<Vec<i8>>,
    pub trace: SolveTrace,
    pub report: MetricReport,
}

/// Semi-supervised prior (empty when the fraction is zero).
pub fn cluster_prior(task: &ClusterTask, cloud: &PointCloud) -> Result<PriorField> {
    if task.supervised_frac > 0.0 {
        let labels = cloud
            .labels
            .as_deref()
            .ok_or_else(|| RunError::input("supervised clustering needs labeled points"))?;
        Ok(sample_supervision(labels, task.supervised_frac, task.supervision_seed)?)
    } else {
        Ok(PriorField::empty(cloud.len()))
    }
}

pub fn run_cluster(config: &RunConfig) -> Result<ClusterOutcome> {
    let task = cluster_task(config)?;
    let cloud = load_points(&task.data)?;
    let t = Instant::now();
    let weights = build_knn_graph(&cloud.features, task.knn, task.scaling)?;
    log::info!(
        "knn graph: {} nodes, {} stored weights, {:.2}s",
        weights.num_nodes(),
        weights.nnz(),
        t.elapsed().as_secs_f64()
    );
    let l = LaplacianOp::new(weights, config.mode);
    let prior = cluster_prior(task, &cloud)?;
    let start = Instant::now();
    let u0 = initialize(task.resolved_init(), &l, &prior)?;
    let solver = Solver::new(&l, &prior, config.solver)?;
    let (u, mut trace) = solver.solve(u0)?;
    let seconds = start.elapsed().as_secs_f64();
    if !config.record_timing {
        trace.strip_timing();
    }
    let labels = u.thresholded();
    let mut report = report_for(&trace, seconds, config.record_timing);
    if let Some(truth) = &cloud.labels {
        report.accuracy = Some(accuracy(&labels, truth)?);
    }
    if let Some(dir) = out_dir(config)? {
        let mut f = BufWriter::new(File::create(dir.join("labels.csv"))?);
        writeln!(f, "index,label")?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(f, "{i},{l}")?;
        }
        f.flush()?;
        write_common(&dir, config, &trace, &report)?;
    }
    Ok(ClusterOutcome {
        labels,
        truth: cloud.labels,
        trace,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: &'static str,
    pub precond: &'static str,
    pub step: String,
    /// Outer steps to the threshold; `None` if it was never reached.
    pub iterations: Option<usize>,
    pub inner_sweeps: usize,
    pub seconds: f64,
    pub metric: Option<f64>,
    pub energy: f64,
}

/// A graph, prior, ground truth and initial guess shared by bench runs.
struct BenchProblem {
    weights: SparseSym,
    prior: PriorField,
    truth: Option<Vec<i8>>,
    init: InitMode,
    segmentation: bool,
}

fn bench_problem(base: &Task) -> Result<BenchProblem> {
    match base {
        Task::Segment(t) => {
            let p = load_image_problem(&t.source)?;
            Ok(BenchProblem {
                weights: build_image_weights(&p.image, &t.graph)?,
                prior: p.prior,
                truth: p.truth,
                init: t.init,
                segmentation: true,
            })
        }
        Task::Cluster(t) => {
            let cloud = load_points(&t.data)?;
            Ok(BenchProblem {
                weights: build_knn_graph(&cloud.features, t.knn, t.scaling)?,
                prior: cluster_prior(t, &cloud)?,
                truth: cloud.labels,
                init: t.resolved_init(),
                segmentation: false,
            })
        }
        _ => Err(RunError::input("bench base must be a segment or cluster task")),
    }
}

pub fn run_bench(config: &RunConfig) -> Result<Vec<BenchRow>> {
    let Task::Bench(task) = &config.task else {
        return Err(RunError::input("not a bench configuration"));
    };
    let problem = bench_problem(&task.base)?;
    let score = |labels: &[i8], truth: &[i8]| -> f64 {
        if problem.segmentation {
            ConfusionCounts::from_labels(labels, truth).map_or(0.0, |c| c.dice())
        } else {
            accuracy(labels, truth).unwrap_or(0.0)
        }
    };
    if let BenchThreshold::Gradient { rel } = task.threshold {
        if !(rel > 0.0) {
            return Err(RunError::input(format!("gradient threshold must be > 0, got {rel}")));
        }
    }
    if matches!(task.threshold, BenchThreshold::Metric { .. }) && problem.truth.is_none() {
        return Err(RunError::input("a metric threshold needs ground truth"));
    }
    let mut rows = Vec::new();
    for &mode in &task.modes {
        let l = LaplacianOp::new(problem.weights.clone(), mode);
        let u0 = initialize(problem.init, &l, &problem.prior)?;
        let grad0 = norm_inf(&grad_total(u0.as_slice(), &l, &problem.prior, &config.solver.params)?);
        for &kind in &task.kinds {
            for &step in &task.steps {
                let solver_cfg = SolverConfig {
                    precond: kind,
                    step,
                    ..config.solver
                };
                let solver = Solver::new(&l, &problem.prior, solver_cfg)?;
                let start = Instant::now();
                let mut reached = None;
                let (u, trace) = solver.solve_with_monitor(u0.clone(), |iter, u| {
                    let metric = problem.truth.as_deref().map(|t| score(&threshold(u), t));
                    let hit = match (task.threshold, metric) {
                        (BenchThreshold::Metric { target }, Some(m)) => m >= target,
                        (BenchThreshold::Gradient { rel }, _) => grad_total(u, &l, &problem.prior, &solver_cfg.params)
                            .map_or(false, |g| norm_inf(&g) <= rel * grad0),
                        _ => false,
                    };
                    if hit {
                        reached = Some(iter);
                    }
                    let halt = hit;
                    Observation { metric, halt }
                })?;
                let seconds = start.elapsed().as_secs_f64();
                let iterations = match task.threshold {
                    BenchThreshold::Metric { .. } | BenchThreshold::Gradient { .. } => reached,
                    BenchThreshold::Stop => Some(trace.outer_iterations()),
                };
                let metric = problem.truth.as_deref().map(|t| score(&u.thresholded(), t));
                let row = BenchRow {
                    mode: mode_name(mode),
                    precond: precond_name(kind),
                    step: step.to_string(),
                    iterations,
                    inner_sweeps: iterations.unwrap_or(trace.outer_iterations()) * solver_cfg.inner_sweeps,
                    seconds: if config.record_timing { seconds } else { 0.0 },
                    metric,
                    energy: trace.records.last().map_or(trace.initial_energy, |r| r.energy),
                };
                log::info!("{row:?}");
                rows.push(row);
            }
        }
    }
    if let Some(dir) = out_dir(config)? {
        write_json(&dir.join("run_config.json"), config)?;
        write_bench_csv(&dir.join("bench.csv"), &rows)?;
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "mode,precond,k,iterations,inner_sweeps,seconds,metric,energy")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{:.6},{},{:e}",
            r.mode,
            r.precond,
            r.step,
            r.iterations.map_or(String::new(), |v| v.to_string()),
            r.inner_sweeps,
            r.seconds,
            r.metric.map_or(String::new(), |v| format!("{v:.6}")),
            r.energy
        )?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphOutcome {
    pub nodes: usize,
    pub nnz: usize,
    pub degree_min: f64,
    pub degree_mean: f64,
    pub degree_max: f64,
    pub lambda_max: f64,
    pub mode: Normalization,
}

impl GraphOutcome {
    pub fn describe(&self) -> String {
        format!(
            "nodes {}\nnnz {}\ndegree min {:.6e} mean {:.6e} max {:.6e}\nlambda_max ({}) {:.6}",
            self.nodes,
            self.nnz,
            self.degree_min,
            self.degree_mean,
            self.degree_max,
            mode_name(self.mode),
            self.lambda_max
        )
    }
}

pub fn run_graph(config: &RunConfig) -> Result<GraphOutcome> {
    let Task::Graph(task) = &config.task else {
        return Err(RunError::input("not a graph configuration"));
    };
    let weights = match &task.source {
        GraphSource::Image { source, graph } => build_image_weights(&load_image_problem(source)?.image, graph)?,
        GraphSource::Points { data, knn, scaling } => build_knn_graph(&load_points(data)?.features, *knn, *scaling)?,
    };
    let d = weights.degrees();
    let ds = d.as_slice();
    let n = weights.num_nodes();
    let nnz = weights.nnz();
    let l = LaplacianOp::new(weights, config.mode);
    let lambda_max = power_method(&l, task.power_iters, task.seed)?.lambda_max;
    let outcome = GraphOutcome {
        nodes: n,
        nnz,
        degree_min: ds.iter().cloned().fold(f64::INFINITY, f64::min),
        degree_mean: ds.iter().sum::<f64>() / n as f64,
        degree_max: ds.iter().cloned().fold(0.0, f64::max),
        lambda_max,
        mode: config.mode,
    };
    if let Some(dir) = out_dir(config)? {
        write_json(&dir.join("run_config.json"), config)?;
        let f = BufWriter::new(File::create(dir.join("graph.glsw"))?);
        write_graph(l.weights(), config.mode, f)?;
        fs::write(dir.join("graph.txt"), outcome.describe() + "\n")?;
    }
    Ok(outcome)
}

/// Read a `run_config.json` written by an earlier run.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let f = File::open(path).map_err(|e| RunError::input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
