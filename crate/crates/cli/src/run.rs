//! Executes the tasks of a configuration and assembles the report.

use std::time::Instant;

use num_complex::Complex64;
use rcpl_core::bundle::to_scalar;
use rcpl_core::curvature::bochner_residual;
use rcpl_core::expr::Expression;
use rcpl_core::functorial::{
    build_cutoff, line_bundle_negativity_bound, perturb_metric, tensor_power_curvature, twist_threshold, twisted_form,
    PerturbationOutcome, PerturbationPlan, TwistBound, TENSOR_POWER_LIMIT,
};
use rcpl_core::hsc::hsc_uniform_bound_report;
use rcpl_core::linalg::{hermitian_eigen, CMatrix};
use rcpl_core::positivity::{certify_grid, certify_point, certify_points};
use rcpl_core::projectivize::{
    chart_consistency_at, chart_points, finsler_induced_metric, finsler_taut_metric, line_rc_positive_on_grid,
    taut_line_metric, LineRcReport,
};
use rcpl_core::{
    chern_curvature_at, curvature_fd_oracle, BundleSpec, CoordBox, Error, HscReport, PositivityReport, ProjChart,
    ProjSpace, SampleGrid,
};
use serde::Serialize;

use crate::config::{RunConfig, Task};

pub const SCHEMA: &str = "rcpl-report/1";

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Include wall time in the report (which makes it non-reproducible).
    pub timing: bool,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub toolkit_version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub tasks: Vec<TaskRecord>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Error,
}

/// An asserted invariant: passes when `value` is on the right side of
/// `threshold`.
#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: value >= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TaskRecord {
    pub task: Task,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TaskResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum TaskResult {
    Curvature(CurvatureResult),
    Certify(Box<CertifyResult>),
    Hsc(HscReport<f64>),
    Perturb(Box<PerturbResult>),
    Projectivize(ProjResult),
    Twist(TwistResult),
}

#[derive(Debug, Serialize)]
pub struct CurvaturePoint {
    pub index: usize,
    pub point: Vec<Complex64>,
    /// `R[i][j][α][β]` flattened as `((i·n + j)·r + α)·r + β`.
    pub tensor: Vec<Complex64>,
    /// `None` where the difference stencil does not fit inside the domain.
    pub fd_relative_error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BochnerRecord {
    pub section: usize,
    pub point: usize,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvatureResult {
    pub n: usize,
    pub r: usize,
    pub points: Vec<CurvaturePoint>,
    pub fd_max_relative_error: Option<f64>,
    pub bochner: Vec<BochnerRecord>,
    pub bochner_max: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct TensorSquare {
    pub global_c: f64,
    pub bound: f64,
}

#[derive(Debug, Serialize)]
pub struct CertifyResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ProjChart>,
    pub report: PositivityReport<f64>,
    /// Certificate of `E ⊗ E` against `2·C(E)`, when the fiber is small enough.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensor_square: Option<TensorSquare>,
}

#[derive(Debug, Serialize)]
pub struct PerturbResult {
    pub s_points: usize,
    pub x_points: usize,
    pub plan: PerturbationPlan,
    pub outcome: PerturbationOutcome,
}

#[derive(Debug, Serialize)]
pub struct ChartLine {
    pub chart: ProjChart,
    pub metric: String,
    pub line: LineRcReport,
}

#[derive(Debug, Serialize)]
pub struct ProjResult {
    pub charts: Vec<ChartLine>,
    pub chart_deviation: f64,
    pub index_agreement: bool,
    pub compared_points: usize,
    /// Uniform certificate of the bundle on the base grid, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle_global_c: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct AssembledTwist {
    pub point: usize,
    pub m: u32,
    pub lambda_min: f64,
    pub guaranteed: f64,
}

#[derive(Debug, Serialize)]
pub struct TwistResult {
    pub threshold: TwistBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assembled: Option<AssembledTwist>,
}

type Outcome = Result<(TaskResult, Vec<Check>), Error>;

/// Runs every task in order. Failures are recorded per task.
pub fn run(cfg: &RunConfig, opts: RunOptions) -> Report {
    let start = Instant::now();
    let tasks: Vec<TaskRecord> = cfg
        .tasks
        .iter()
        .map(|&task| {
            let outcome = match cfg.validate() {
                Ok(()) => run_task(cfg, task),
                Err(e) => Err(Error::Invalid(e.to_string())),
            };
            match outcome {
                Ok((result, checks)) => TaskRecord {
                    task,
                    status: if checks.iter().all(|c| c.passed) {
                        Status::Ok
                    } else {
                        Status::Failed
                    },
                    checks,
                    result: Some(result),
                    error: None,
                },
                Err(e) => TaskRecord {
                    task,
                    status: Status::Error,
                    checks: vec![],
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Report {
        schema: SCHEMA,
        toolkit_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: RunConfig {
            output: None,
            ..cfg.clone()
        },
        passed: tasks.iter().all(|t| t.status == Status::Ok),
        tasks,
        wall_time_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
    }
}

fn config_error(e: crate::CliError) -> Error {
    Error::Invalid(e.to_string())
}

fn run_task(cfg: &RunConfig, task: Task) -> Outcome {
    if cfg.finsler.is_some() {
        return run_finsler_task(cfg, task);
    }
    let spec = cfg.bundle_spec().map_err(config_error)?;
    let grid = cfg.grid().map_err(config_error)?;
    match task {
        Task::Curvature => curvature_task(cfg, &spec, &grid),
        Task::Certify => certify_task(cfg, &spec, &grid, None),
        Task::Hsc => {
            let rep = hsc_uniform_bound_report::<f64>(&spec, &grid, &cfg.search_budget())?;
            let checks = vec![Check::at_least(
                "hsc_bounds",
                if rep.bounds_hold { 1.0 } else { 0.0 },
                1.0,
            )];
            Ok((TaskResult::Hsc(rep), checks))
        }
        Task::Perturb => perturb_task(cfg, &spec, &grid),
        Task::Projectivize => projectivize_bundle_task(cfg, &spec, &grid),
        Task::Twist => twist_task(cfg, &spec, &grid),
    }
}

fn run_finsler_task(cfg: &RunConfig, task: Task) -> Outcome {
    let fs = cfg.finsler_spec().map_err(config_error)?;
    let chart = cfg.finsler_chart().map_err(config_error)?;
    let grid = cfg.grid().map_err(config_error)?;
    match task {
        Task::Curvature => {
            let spec = finsler_induced_metric(&fs, &chart)?;
            curvature_task(cfg, &spec, &grid)
        }
        Task::Certify => {
            let spec = finsler_induced_metric(&fs, &chart)?;
            certify_task(cfg, &spec, &grid, Some(chart))
        }
        Task::Projectivize => {
            fs.validate()?;
            let mut lines = Vec::new();
            for pivot in cfg.pivots(fs.r()).map_err(config_error)? {
                let c = ProjChart::new(fs.n(), fs.r(), pivot, ProjSpace::Hyperplanes)?.with_fiber_box(chart.fiber_box);
                lines.push((c.clone(), finsler_taut_metric(&fs, &c)?));
            }
            projectivize_lines(cfg, lines, fs.domain(), None)
        }
        other => Err(Error::Invalid(format!(
            "task `{}` needs a [bundle] block",
            other.name()
        ))),
    }
}

fn curvature_task(cfg: &RunConfig, spec: &BundleSpec, grid: &SampleGrid) -> Outcome {
    let tol = &cfg.tolerances;
    let pts = grid.checked_points(spec.domain())?;
    let mut points = Vec::with_capacity(pts.len());
    let mut fd_max: Option<f64> = None;
    for (index, p) in pts.iter().enumerate() {
        let ad = chern_curvature_at::<f64>(spec, p).map_err(|e| e.at_point(index))?;
        let fd_relative_error = match curvature_fd_oracle::<f64>(spec, p, tol.fd_step) {
            Ok(fd) => Some(ad.sub(&fd).max_abs() / ad.max_abs().max(1.0)),
            Err(Error::StepTooLarge { .. }) => None,
            Err(e) => return Err(e.at_point(index)),
        };
        if let Some(e) = fd_relative_error {
            fd_max = Some(fd_max.map_or(e, |m: f64| m.max(e)));
        }
        points.push(CurvaturePoint {
            index,
            point: p.clone(),
            tensor: ad.as_slice().to_vec(),
            fd_relative_error,
        });
    }
    let mut bochner = Vec::new();
    for (section, s) in spec.sections().iter().enumerate() {
        for (point, p) in pts.iter().enumerate() {
            let residual = bochner_residual::<f64>(spec, s, &to_scalar(p)).map_err(|e| e.at_point(point))?;
            bochner.push(BochnerRecord {
                section,
                point,
                residual,
            });
        }
    }
    let bochner_max = bochner.iter().map(|b| b.residual).reduce(f64::max);
    let mut checks = Vec::new();
    if let Some(m) = fd_max {
        checks.push(Check::at_most("ad_fd_agreement", m, tol.fd_agreement));
    }
    if let Some(m) = bochner_max {
        checks.push(Check::at_most("bochner_residual", m, tol.bochner));
    }
    Ok((
        TaskResult::Curvature(CurvatureResult {
            n: spec.n(),
            r: spec.r(),
            points,
            fd_max_relative_error: fd_max,
            bochner,
            bochner_max,
        }),
        checks,
    ))
}

/// Largest amount by which `griffiths ≤ C_uniform ≤ C_rc` fails.
fn hierarchy_violation(rep: &PositivityReport<f64>) -> f64 {
    rep.points
        .iter()
        .map(|p| (p.griffiths_min - p.c_uniform).max(p.c_uniform - p.c_rc))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn certify_task(cfg: &RunConfig, spec: &BundleSpec, grid: &SampleGrid, chart: Option<ProjChart>) -> Outcome {
    let budget = cfg.search_budget();
    let tol = &cfg.tolerances;
    let report = certify_grid::<f64>(spec, grid, &budget)?;
    let mut checks = vec![Check::at_most("hierarchy", hierarchy_violation(&report), tol.hierarchy)];
    let tensor_square = if spec.r() * spec.r() <= 16 {
        let mut global = f64::INFINITY;
        for rec in &report.points {
            let p = &rec.point;
            let r = chern_curvature_at::<f64>(spec, p).map_err(|e| e.at_point(rec.index))?;
            let h = spec.metric_at(p)?;
            let w = spec.omega_at(p)?;
            let big = tensor_power_curvature(&r, &h, 2)?;
            let eye = CMatrix::identity(big.r());
            let c = certify_point(rec.index, p.clone(), &big, &w, &eye, &budget)?;
            global = global.min(c.c_uniform);
        }
        let bound = 2.0 * report.global_c;
        checks.push(Check::at_least("tensor_square", global - bound, -tol.bound));
        Some(TensorSquare {
            global_c: global,
            bound,
        })
    } else {
        None
    };
    Ok((
        TaskResult::Certify(Box::new(CertifyResult {
            chart,
            report,
            tensor_square,
        })),
        checks,
    ))
}

fn perturb_task(cfg: &RunConfig, spec: &BundleSpec, grid: &SampleGrid) -> Outcome {
    let block = cfg
        .perturb
        .as_ref()
        .ok_or_else(|| Error::Invalid("perturb needs a [perturb] block".into()))?;
    let budget = cfg.search_budget();
    let phi = Expression::parse(&block.phi, spec.n())?;
    let center: Vec<Complex64> = match &block.s_center {
        Some(c) => c.iter().map(|x| Complex64::new(x[0], x[1])).collect(),
        None => vec![Complex64::new(0.0, 0.0); spec.n()],
    };
    if center.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "perturb.s_center".into(),
            expected: spec.n(),
            found: center.len(),
        });
    }
    let pts = grid.checked_points(spec.domain())?;
    let dist = |p: &[Complex64]| {
        p.iter()
            .zip(&center)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let (s_points, rest): (Vec<_>, Vec<_>) = pts.iter().cloned().partition(|p| dist(p) < block.s_radius);
    if rest.is_empty() {
        return Err(Error::Invalid("every grid point lies in the excised set".into()));
    }
    let c = certify_points::<f64>(spec, &rest, &budget)?.global_c;
    let plan = build_cutoff(spec, &phi, &s_points, &pts, c)?;
    let outcome = perturb_metric(spec, &plan, &budget)?;
    let checks = vec![
        Check::at_least("recertified_constant", outcome.report.global_c, f64::MIN_POSITIVE),
        Check::at_least("perturbation_bound", outcome.worst_slack, -cfg.tolerances.bound),
    ];
    Ok((
        TaskResult::Perturb(Box::new(PerturbResult {
            s_points: s_points.len(),
            x_points: pts.len(),
            plan,
            outcome,
        })),
        checks,
    ))
}

fn projectivize_bundle_task(cfg: &RunConfig, spec: &BundleSpec, grid: &SampleGrid) -> Outcome {
    let fiber = CoordBox::centered(cfg.projectivize_block().fiber_box);
    let mut lines = Vec::new();
    for pivot in cfg.pivots(spec.r()).map_err(|e| Error::Invalid(e.to_string()))? {
        let chart = ProjChart::new(spec.n(), spec.r(), pivot, ProjSpace::Lines)?.with_fiber_box(fiber);
        lines.push((chart.clone(), taut_line_metric(spec, &chart)?));
    }
    let c = certify_grid::<f64>(spec, grid, &cfg.search_budget())?.global_c;
    projectivize_lines(cfg, lines, spec.domain(), Some(c))
}

fn projectivize_lines(
    cfg: &RunConfig,
    lines: Vec<(ProjChart, Expression)>,
    base: &[CoordBox],
    bundle_c: Option<f64>,
) -> Outcome {
    let band = rcpl_core::positivity::ZERO_BAND;
    let mut charts = Vec::with_capacity(lines.len());
    for (chart, l) in &lines {
        let pts = chart_points(chart, base, cfg.grid.count);
        let line = line_rc_positive_on_grid(l, &pts, band)?;
        charts.push(ChartLine {
            chart: chart.clone(),
            metric: l.to_string(),
            line,
        });
    }
    let mut deviation = 0.0f64;
    let mut agree = true;
    let mut compared = 0;
    if let Some((c0, l0)) = lines.first() {
        let pts = chart_points(c0, base, cfg.grid.count);
        for (c1, l1) in lines.iter().skip(1) {
            for (idx, p) in pts.iter().enumerate() {
                if let Some((dev, same)) = chart_consistency_at(l0, c0, l1, c1, p, band).map_err(|e| e.at_point(idx))? {
                    deviation = deviation.max(dev);
                    agree &= same;
                    compared += 1;
                }
            }
        }
    }
    let mut checks = vec![
        Check::at_most("chart_consistency", deviation, cfg.tolerances.bound),
        Check::at_least("chart_index_agreement", if agree { 1.0 } else { 0.0 }, 1.0),
    ];
    if bundle_c.is_some_and(|c| c > band) {
        // A uniformly RC-positive bundle has an RC-positive tautological line.
        let worst = charts
            .iter()
            .map(|c| c.line.worst_lambda_max)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("tautological_line_positive", worst, band));
    }
    Ok((
        TaskResult::Projectivize(ProjResult {
            charts,
            chart_deviation: deviation,
            index_agreement: agree,
            compared_points: compared,
            bundle_global_c: bundle_c,
        }),
        checks,
    ))
}

fn twist_task(cfg: &RunConfig, spec: &BundleSpec, grid: &SampleGrid) -> Outcome {
    let block = cfg
        .twist
        .as_ref()
        .ok_or_else(|| Error::Invalid("twist needs a [twist] block".into()))?;
    let budget = cfg.search_budget();
    let mut line = BundleSpec::new(spec.n(), 1, vec![Expression::parse(&block.line, spec.n())?])?
        .with_domain(spec.domain().to_vec())?;
    if let Some(om) = spec.omega_entries() {
        line = line.with_omega(om.to_vec())?;
    }
    let report = certify_grid::<f64>(spec, grid, &budget)?;
    let b = line_bundle_negativity_bound::<f64>(&line, grid)?;
    let threshold = twist_threshold(report.global_c, b, block.k)?;
    let worst = &report.points[report.worst_point];
    let dim = (spec.r() as u128).checked_pow(threshold.m_min);
    let assembled = if dim.is_some_and(|d| d <= TENSOR_POWER_LIMIT as u128) {
        let p = &worst.point;
        let r = chern_curvature_at::<f64>(spec, p)?;
        let h = spec.metric_at(p)?;
        let rl = chern_curvature_at::<f64>(&line, p)?;
        let hl = line.metric_at(p)?[(0, 0)].re;
        let w = spec.omega_at(p)?;
        let raw = &worst.u_star;
        let mut norm2 = 0.0;
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                norm2 += (raw[i] * w[(i, j)] * raw[j].conj()).re;
            }
        }
        let u: Vec<Complex64> = raw.iter().map(|x| x / norm2.sqrt()).collect();
        let line_value = rl.form_in_base_direction(&u)[(0, 0)].re / hl;
        let form = twisted_form(&r, &h, threshold.m_min, &u, line_value, block.k)?;
        Some(AssembledTwist {
            point: report.worst_point,
            m: threshold.m_min,
            lambda_min: hermitian_eigen(&form)?.min(),
            guaranteed: threshold.bound(threshold.m_min),
        })
    } else {
        None
    };
    let mut checks = vec![Check::at_least("normalized_margin", threshold.normalized_margin, 1.0)];
    if let Some(a) = &assembled {
        checks.push(Check::at_least(
            "twisted_lambda_min",
            a.lambda_min - a.guaranteed,
            -1e-9,
        ));
    }
    Ok((TaskResult::Twist(TwistResult { threshold, assembled }), checks))
}
