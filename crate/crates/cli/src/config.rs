//! Run configuration: TOML with `[bundle]` or `[finsler]`, `[grid]` and
//! optional task blocks.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rcpl_core::expr::Expression;
use rcpl_core::{BundleSpec, CoordBox, FinslerSpec, ProjChart, ProjSpace, SampleGrid, SearchBudget};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Curvature,
    Certify,
    Hsc,
    Perturb,
    Projectivize,
    Twist,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Curvature => "curvature",
            Task::Certify => "certify",
            Task::Hsc => "hsc",
            Task::Perturb => "perturb",
            Task::Projectivize => "projectivize",
            Task::Twist => "twist",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "curvature" => Ok(Task::Curvature),
            "certify" => Ok(Task::Certify),
            "hsc" => Ok(Task::Hsc),
            "perturb" => Ok(Task::Perturb),
            "projectivize" => Ok(Task::Projectivize),
            "twist" => Ok(Task::Twist),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finsler: Option<FinslerBlock>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub budget: BudgetBlock,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<TwistBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projectivize: Option<ProjBlock>,
}

/// A coordinate box `[re_lo, re_hi, im_lo, im_hi]`.
pub type BoxBounds = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleBlock {
    pub n: usize,
    pub r: usize,
    /// Row-major `h_{αβ̄}` over `z1..zn`.
    pub h: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<BoxBounds>>,
    /// Holomorphic sections of the dual bundle, in the dual frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinslerBlock {
    pub n: usize,
    pub r: usize,
    /// `F` over `z1..zn, w1..wr`.
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<BoxBounds>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Samples per real axis.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Explicit points as `[re, im]` pairs; overrides `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<[f64; 2]>>>,
}

fn default_count() -> usize {
    3
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            count: default_count(),
            points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetBlock {
    pub starts: usize,
    pub iterations: usize,
    pub tol: f64,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        let b = SearchBudget::default();
        Self {
            starts: b.starts,
            iterations: b.iterations,
            tol: b.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative agreement between AD and finite-difference curvature.
    pub fd_agreement: f64,
    pub fd_step: f64,
    pub bochner: f64,
    /// Slack for `griffiths ≤ C_uniform ≤ C_rc`.
    pub hierarchy: f64,
    /// Slack for the κ/2, tensor-power, twist and perturbation bounds.
    pub bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fd_agreement: 1e-6,
            fd_step: 1e-3,
            bochner: 1e-7,
            hierarchy: 1e-8,
            bound: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbBlock {
    /// Potential `Φ`, strictly plurisubharmonic on the excised set.
    pub phi: String,
    /// The excised set `S` is the grid points within this distance of `s_center`.
    pub s_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_center: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistBlock {
    /// Metric of the line bundle `L` on the same chart.
    pub line: String,
    #[serde(default = "one")]
    pub k: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjBlock {
    /// Chart pivots to use; all pivots when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivots: Option<Vec<usize>>,
    /// Half-width of the box used for each fiber coordinate.
    #[serde(default = "default_fiber_box")]
    pub fiber_box: f64,
}

fn default_fiber_box() -> f64 {
    1.0
}

impl Default for ProjBlock {
    fn default() -> Self {
        Self {
            pivots: None,
            fiber_box: default_fiber_box(),
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
        path: String::new(),
        message: e.to_string(),
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn boxes(domain: &Option<Vec<BoxBounds>>, n: usize, path: &str) -> Result<Vec<CoordBox>, CliError> {
    match domain {
        None => Ok(vec![CoordBox::centered(1.0); n]),
        Some(d) if d.len() != n => Err(invalid(path, format!("expected {n} boxes, found {}", d.len()))),
        Some(d) => d
            .iter()
            .map(|b| {
                if b[0] < b[1] && b[2] < b[3] {
                    Ok(CoordBox::new([b[0], b[1]], [b[2], b[3]]))
                } else {
                    Err(invalid(path, format!("empty box {b:?}")))
                }
            })
            .collect(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.bundle, &self.finsler) {
            (Some(_), Some(_)) => return Err(invalid("", "give exactly one of [bundle] and [finsler], not both")),
            (None, None) => return Err(invalid("", "missing [bundle] or [finsler] block")),
            _ => {}
        }
        if self.tasks.is_empty() {
            return Err(invalid("tasks", "no tasks requested"));
        }
        if self.grid.count == 0 {
            return Err(invalid("grid.count", "must be at least 1"));
        }
        if !(self.projectivize_block().fiber_box > 0.0) {
            return Err(invalid("projectivize.fiber_box", "must be positive"));
        }
        if self.budget.starts == 0 || self.budget.iterations == 0 || !(self.budget.tol > 0.0) {
            return Err(invalid("budget", "starts and iterations must be positive, tol > 0"));
        }
        for (i, &t) in self.tasks.iter().enumerate() {
            let path = format!("tasks[{i}]");
            if self.finsler.is_some() && matches!(t, Task::Hsc | Task::Perturb | Task::Twist) {
                return Err(invalid(&path, format!("task `{}` needs a [bundle] block", t.name())));
            }
            if let (Task::Hsc, Some(b)) = (t, &self.bundle) {
                if b.n != b.r {
                    return Err(invalid(&path, "hsc needs a tangent-type bundle (r = n)"));
                }
            }
            if t == Task::Perturb && self.perturb.is_none() {
                return Err(invalid(&path, "perturb needs a [perturb] block"));
            }
            if t == Task::Twist && self.twist.is_none() {
                return Err(invalid(&path, "twist needs a [twist] block"));
            }
        }
        // Build once so expression and dimension errors surface at load time.
        match (&self.bundle, &self.finsler) {
            (Some(_), _) => {
                self.bundle_spec()?;
            }
            (_, Some(_)) => {
                self.finsler_spec()?;
            }
            _ => {}
        }
        self.grid()?;
        Ok(())
    }

    pub fn search_budget(&self) -> SearchBudget {
        SearchBudget {
            starts: self.budget.starts,
            iterations: self.budget.iterations,
            tol: self.budget.tol,
            seed: self.seed,
        }
    }

    /// Dimension of the sampled chart: the base for a bundle, the
    /// projectivized chart for a Finsler metric.
    pub fn chart_dim(&self) -> usize {
        match (&self.bundle, &self.finsler) {
            (Some(b), _) => b.n,
            (_, Some(f)) => f.n + f.r - 1,
            _ => 0,
        }
    }

    pub fn projectivize_block(&self) -> ProjBlock {
        self.projectivize.clone().unwrap_or_default()
    }

    /// Pivots to use, validated against the rank.
    pub fn pivots(&self, r: usize) -> Result<Vec<usize>, CliError> {
        match self.projectivize_block().pivots {
            None => Ok((0..r).collect()),
            Some(p) if p.is_empty() => Err(invalid("projectivize.pivots", "no pivots given")),
            Some(p) => {
                if let Some(bad) = p.iter().find(|&&k| k >= r) {
                    return Err(invalid(
                        "projectivize.pivots",
                        format!("pivot {bad} out of range for rank {r}"),
                    ));
                }
                Ok(p)
            }
        }
    }

    /// Chart over which a Finsler metric is sampled (first configured pivot).
    pub fn finsler_chart(&self) -> Result<ProjChart, CliError> {
        let f = self
            .finsler
            .as_ref()
            .ok_or_else(|| invalid("finsler", "missing [finsler] block"))?;
        let pivot = self.pivots(f.r)?[0];
        Ok(ProjChart::new(f.n, f.r, pivot, ProjSpace::Hyperplanes)
            .map_err(|e| invalid("projectivize.pivots", e.to_string()))?
            .with_fiber_box(CoordBox::centered(self.projectivize_block().fiber_box)))
    }

    pub fn domain(&self) -> Result<Vec<CoordBox>, CliError> {
        match (&self.bundle, &self.finsler) {
            (Some(b), _) => boxes(&b.domain, b.n, "bundle.domain"),
            (_, Some(f)) => Ok(self.finsler_chart()?.domain(&boxes(&f.domain, f.n, "finsler.domain")?)),
            _ => Ok(vec![]),
        }
    }

    pub fn bundle_spec(&self) -> Result<BundleSpec, CliError> {
        let b = self
            .bundle
            .as_ref()
            .ok_or_else(|| invalid("bundle", "missing [bundle] block"))?;
        let refs: Vec<&str> = b.h.iter().map(String::as_str).collect();
        let mut spec = BundleSpec::parse(b.n, b.r, &refs).map_err(|e| invalid("bundle.h", e.to_string()))?;
        if let Some(om) = &b.omega {
            let exprs = om
                .iter()
                .map(|s| Expression::parse(s, b.n))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid("bundle.omega", e.to_string()))?;
            spec = spec
                .with_omega(exprs)
                .map_err(|e| invalid("bundle.omega", e.to_string()))?;
        }
        spec = spec
            .with_domain(boxes(&b.domain, b.n, "bundle.domain")?)
            .map_err(|e| invalid("bundle.domain", e.to_string()))?;
        for (k, s) in b.sections.iter().enumerate() {
            let path = format!("bundle.sections[{k}]");
            let exprs = s
                .iter()
                .map(|x| Expression::parse(x, b.n))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(&path, e.to_string()))?;
            spec = spec.with_section(exprs).map_err(|e| invalid(&path, e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn finsler_spec(&self) -> Result<FinslerSpec, CliError> {
        let f = self
            .finsler
            .as_ref()
            .ok_or_else(|| invalid("finsler", "missing [finsler] block"))?;
        let domain = boxes(&f.domain, f.n, "finsler.domain")?;
        let spec = FinslerSpec::parse(f.n, f.r, &f.f).map_err(|e| invalid("finsler.f", e.to_string()))?;
        spec.with_domain(domain)
            .map_err(|e| invalid("finsler.domain", e.to_string()))
    }

    pub fn grid(&self) -> Result<SampleGrid, CliError> {
        let domain = self.domain()?;
        let n = self.chart_dim();
        match &self.grid.points {
            Some(pts) => {
                let mut out = Vec::with_capacity(pts.len());
                for (k, p) in pts.iter().enumerate() {
                    if p.len() != n {
                        return Err(invalid(
                            &format!("grid.points[{k}]"),
                            format!("expected {n} coordinates, found {}", p.len()),
                        ));
                    }
                    out.push(p.iter().map(|c| Complex64::new(c[0], c[1])).collect());
                }
                let grid = SampleGrid::Explicit(out);
                grid.checked_points(&domain)
                    .map_err(|e| invalid("grid.points", e.to_string()))?;
                Ok(grid)
            }
            None => Ok(SampleGrid::uniform(&domain, self.grid.count)),
        }
    }
}
