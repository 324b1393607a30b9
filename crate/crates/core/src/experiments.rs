//! Experiment specs, sweep runners and their serialized outputs.
//!
//! Every runner computes its whole result in memory before anything touches
//! the filesystem, so a failing sweep never leaves a partial file behind.
//! Grid points are evaluated on the rayon pool and merged in grid order,
//! which keeps output bytes independent of the worker count.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::interpolation::{
    builtin_targets, fit_interpolant, Domain, InterpolationProblem, Method, Target, TensorWeight,
};
use crate::model::{GridConfig, Spectrum};
use crate::montecarlo::{concentration_check, empirical_risk, McConfig};
use crate::risk::{
    asymptotic_bound, concentration_bound, risk_over_closed, risk_trace_over, risk_trace_under,
    risk_under_closed,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    RiskCurve,
    McRisk,
    Heatmap,
    BoundCheck,
    Interp,
    Concentration,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::RiskCurve => "risk-curve",
            Command::McRisk => "mc-risk",
            Command::Heatmap => "heatmap",
            Command::BoundCheck => "bound-check",
            Command::Interp => "interp",
            Command::Concentration => "concentration",
        }
    }
}

/// How `p` values are generated when no explicit list is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PRule {
    /// Every `p in 1..=n`, then `p = l n` for `l = 2..` up to `D`.
    #[default]
    Standard,
    /// Multiples of `n` up to `D`.
    Aligned,
    /// Every `p in 1..=D`.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QRule {
    /// Use `q_list`.
    #[default]
    Fixed,
    /// `q = r` for every `r`.
    MatchR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Parameter grid. `dim` and `n` are single values unless `n_list` or
/// `tau_multiples` expand them; see [`GridSpec::points`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<usize>>,
    #[serde(default)]
    pub p_rule: PRule,
    /// `p = l n`; takes precedence over `p_rule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_list: Option<Vec<usize>>,
    /// With `l_list`: `D = m l n` for each multiple `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_multiples: Option<Vec<usize>>,
    #[serde(default)]
    pub r_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_list: Option<Vec<f64>>,
    #[serde(default)]
    pub q_rule: QRule,
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub r: f64,
    pub q: f64,
    pub dim: usize,
    pub n: usize,
    pub p: usize,
    pub l: Option<usize>,
}

fn nonempty<T>(field: &str, v: &Option<Vec<T>>) -> Result<()> {
    match v {
        Some(v) if v.is_empty() => Err(Error::InvalidConfiguration(format!("{field}: list is empty"))),
        _ => Ok(()),
    }
}

impl GridSpec {
    fn n_values(&self) -> Result<Vec<usize>> {
        nonempty("grid.n_list", &self.n_list)?;
        match (&self.n_list, self.n) {
            (Some(list), _) => Ok(list.clone()),
            (None, Some(n)) => Ok(vec![n]),
            (None, None) => Err(Error::InvalidConfiguration("grid.n: missing".into())),
        }
    }

    fn q_values(&self, r: f64) -> Result<Vec<f64>> {
        match self.q_rule {
            QRule::MatchR => Ok(vec![r]),
            QRule::Fixed => match &self.q_list {
                Some(l) if !l.is_empty() => Ok(l.clone()),
                _ => Err(Error::InvalidConfiguration(
                    "grid.q_list: required and non-empty when q_rule = \"fixed\"".into(),
                )),
            },
        }
    }

    fn p_values(&self, dim: usize, n: usize) -> Vec<usize> {
        if let Some(list) = &self.p_list {
            return list.clone();
        }
        match self.p_rule {
            PRule::Standard => (1..=n.min(dim))
                .chain((2..).map(|l| l * n).take_while(|&p| p <= dim))
                .collect(),
            PRule::Aligned => (1..).map(|l| l * n).take_while(|&p| p <= dim).collect(),
            PRule::All => (1..=dim).collect(),
        }
    }

    /// Expands the grid in `(r, q, n, D, p)` order and validates each cell.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.r_list.is_empty() {
            return Err(Error::InvalidConfiguration("grid.r_list: list is empty".into()));
        }
        if let Some(r) = self.r_list.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidConfiguration(format!("grid.r_list: invalid decay {r}")));
        }
        if let Some(q) = self.q_list.iter().flatten().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(Error::InvalidConfiguration(format!("grid.q_list: invalid weight {q}")));
        }
        nonempty("grid.p_list", &self.p_list)?;
        nonempty("grid.l_list", &self.l_list)?;
        nonempty("grid.tau_multiples", &self.tau_multiples)?;
        let ns = self.n_values()?;
        if ns.contains(&0) {
            return Err(Error::InvalidConfiguration("grid.n: must be positive".into()));
        }

        // (n, D, p, l) cells shared by every (r, q)
        let mut cells = Vec::new();
        for &n in &ns {
            match (&self.l_list, &self.tau_multiples) {
                (Some(ls), Some(ms)) => {
                    for &l in ls {
                        for &m in ms {
                            if l == 0 || m == 0 {
                                return Err(Error::InvalidConfiguration(
                                    "grid.l_list / grid.tau_multiples: entries must be positive".into(),
                                ));
                            }
                            cells.push((n, m * l * n, l * n, Some(l)));
                        }
                    }
                }
                (None, Some(_)) => {
                    return Err(Error::InvalidConfiguration(
                        "grid.tau_multiples: requires grid.l_list".into(),
                    ))
                }
                (ls, None) => {
                    let dim = self
                        .dim
                        .ok_or_else(|| Error::InvalidConfiguration("grid.dim: missing".into()))?;
                    if dim == 0 || n > dim {
                        return Err(Error::InvalidConfiguration(format!(
                            "grid.dim: need 0 < n <= D, got n={n} D={dim}"
                        )));
                    }
                    let ps: Vec<(usize, Option<usize>)> = match ls {
                        Some(ls) => ls.iter().map(|&l| (l * n, Some(l))).collect(),
                        None => self
                            .p_values(dim, n)
                            .into_iter()
                            .map(|p| (p, (p % n == 0).then_some(p / n)))
                            .collect(),
                    };
                    if ps.is_empty() {
                        return Err(Error::InvalidConfiguration("grid.p_list: no p values".into()));
                    }
                    for (p, l) in ps {
                        if p == 0 || p > dim {
                            return Err(Error::InvalidConfiguration(format!(
                                "grid.p_list: p={p} outside 1..={dim}"
                            )));
                        }
                        cells.push((n, dim, p, l));
                    }
                }
            }
        }
        let mut out = Vec::new();
        for &r in &self.r_list {
            for q in self.q_values(r)? {
                for &(n, dim, p, l) in &cells {
                    out.push(GridPoint { r, q, dim, n, p, l });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpSpec {
    /// Built-in target name; mutually exclusive with `samples_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// CSV of samples on the equispaced grid: optional coordinate columns
    /// followed by the value column, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_axis: Option<usize>,
    pub p_axis: usize,
    pub dim_axis: usize,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub weight: TensorWeight,
    /// Relative to the largest absolute sample; ignored for sample files.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Dense evaluation points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    /// Deviations as multiples of `T_q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_multiples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interp: Option<InterpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfiguration(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfiguration(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Ready-to-run spec for each command.
    pub fn default_for(command: Command) -> Self {
        let mut spec = ExperimentSpec {
            command,
            threads: None,
            grid: GridSpec::default(),
            mc: None,
            interp: None,
            concentration: None,
            output: OutputSpec::default(),
        };
        let g = &mut spec.grid;
        match command {
            Command::RiskCurve => {
                g.dim = Some(1024);
                g.n = Some(64);
                g.r_list = vec![0.5];
                g.q_list = Some(vec![0.5]);
            }
            Command::McRisk => {
                g.dim = Some(256);
                g.n = Some(16);
                g.p_list = Some(vec![4, 8, 16, 32, 64, 128, 256]);
                g.r_list = vec![1.0];
                g.q_rule = QRule::MatchR;
                spec.mc = Some(McConfig::new(500, 0));
            }
            Command::Heatmap => {
                g.dim = Some(256);
                g.n = Some(16);
                g.r_list = (1..=8).map(|i| 0.25 * i as f64).collect();
                g.q_rule = QRule::MatchR;
            }
            Command::BoundCheck => {
                g.n_list = Some(vec![8, 16, 32]);
                g.l_list = Some(vec![2, 4]);
                g.tau_multiples = Some(vec![2, 4]);
                g.r_list = vec![0.6, 0.75, 1.0, 1.5];
                g.q_rule = QRule::MatchR;
            }
            Command::Interp => {
                spec.interp = Some(InterpSpec {
                    target: Some("cos2d".into()),
                    samples_file: None,
                    dimension: None,
                    n_axis: Some(10),
                    p_axis: 41,
                    dim_axis: 100,
                    q: 2.0,
                    methods: None,
                    weight: TensorWeight::Separable,
                    noise_sigma: default_noise(),
                    noise_seed: 0,
                    eval_points: None,
                    domain: None,
                });
            }
            Command::Concentration => {
                g.dim = Some(256);
                g.n = Some(16);
                g.p_list = Some(vec![32]);
                g.r_list = vec![1.0];
                g.q_rule = QRule::MatchR;
                spec.mc = Some(McConfig::new(2000, 0));
                spec.concentration = Some(ConcentrationSpec {
                    t_list: None,
                    t_multiples: Some(vec![0.5, 1.0, 2.0]),
                });
            }
        }
        spec
    }

    /// Output location, falling back to `<command>.<ext>` (a directory for
    /// `interp`).
    pub fn output_path(&self) -> PathBuf {
        self.output.path.clone().unwrap_or_else(|| match self.command {
            Command::Interp => PathBuf::from("interp_out"),
            c => PathBuf::from(format!("{}.{}", c.as_str(), self.output.format.extension())),
        })
    }

    fn mc(&self) -> Result<McConfig> {
        let mc = self
            .mc
            .ok_or_else(|| Error::InvalidConfiguration("mc: section required for this command".into()))?;
        mc.validate()?;
        Ok(mc)
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Str(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => Value::from(*v),
            Cell::Str(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Column-ordered result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("json values serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Files a run will write, plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub files: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    /// Sidecar log for a primary output path.
    pub fn warnings_path(out: &Path) -> PathBuf {
        let mut s = out.as_os_str().to_owned();
        s.push(".warnings.log");
        PathBuf::from(s)
    }

    /// Writes every file; the sidecar log only when there are warnings.
    pub fn write(&self, out: &Path) -> Result<()> {
        for (path, body) in &self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, body)?;
        }
        let log = Self::warnings_path(out);
        if !self.warnings.is_empty() {
            let mut body = self.warnings.join("\n");
            body.push('\n');
            std::fs::write(log, body)?;
        }
        Ok(())
    }
}

fn spectrum_for(pt: &GridPoint) -> Result<(Spectrum, GridConfig)> {
    Ok((Spectrum::new(pt.dim, pt.r)?, GridConfig::classify(pt.dim, pt.n, pt.p)?))
}

/// Theoretical risk of the estimator the regime calls for: least squares
/// below `n`, weighted min-norm from `n` up. Closed forms when the grid is
/// aligned, trace forms otherwise.
pub fn theory_risk(spectrum: &Spectrum, grid: &GridConfig, q: f64) -> Result<f64> {
    if grid.p < grid.n {
        match grid.tau {
            Some(_) => risk_under_closed(spectrum, grid),
            None => risk_trace_under(spectrum, grid),
        }
    } else if grid.aligned().is_some() {
        Ok(risk_over_closed(spectrum, grid, q)?.risk)
    } else {
        Ok(risk_trace_over(spectrum, grid, q)?.risk)
    }
}

/// Evaluates `f` on every point in parallel; results keep grid order and
/// the first failure in grid order is reported.
fn par_rows<T, F>(points: &[GridPoint], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&GridPoint) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = points.par_iter().map(f).collect();
    results.into_iter().collect()
}

fn config_cells(pt: &GridPoint, grid: &GridConfig) -> Vec<Cell> {
    vec![
        Cell::Int(pt.dim as u64),
        Cell::Int(pt.n as u64),
        Cell::Int(pt.p as u64),
        Cell::Float(pt.r),
        Cell::Float(pt.q),
        Cell::Str(grid.regime.as_str().into()),
    ]
}

fn single_table(spec: &ExperimentSpec, table: Table, warnings: Vec<String>) -> RunOutput {
    RunOutput {
        files: vec![(spec.output_path(), table.render(spec.output.format))],
        warnings,
    }
}

pub fn run_risk_curve(spec: &ExperimentSpec) -> Result<RunOutput> {
    let points = spec.grid.points()?;
    let rows = par_rows(&points, |pt| {
        let (s, g) = spectrum_for(pt)?;
        let risk = theory_risk(&s, &g, pt.q)?;
        let mut row = config_cells(pt, &g);
        row.push(Cell::Float(risk));
        Ok(row)
    })?;
    let mut table = Table::new(vec!["D", "n", "p", "r", "q", "regime", "risk_theory"]);
    table.rows = rows;
    Ok(single_table(spec, table, Vec::new()))
}

pub fn run_mc_risk(spec: &ExperimentSpec) -> Result<RunOutput> {
    let points = spec.grid.points()?;
    let mc = spec.mc()?;
    let rows = par_rows(&points, |pt| {
        let (s, g) = spectrum_for(pt)?;
        let risk = theory_risk(&s, &g, pt.q)?;
        let est = empirical_risk(&s, &g, pt.q, &mc)?;
        let mut row = config_cells(pt, &g);
        row.extend([
            Cell::Float(risk),
            Cell::Float(est.mean),
            Cell::Float(est.ci_low),
            Cell::Float(est.ci_high),
        ]);
        Ok(row)
    })?;
    let mut table = Table::new(vec![
        "D",
        "n",
        "p",
        "r",
        "q",
        "regime",
        "risk_theory",
        "risk_mc_mean",
        "ci_low",
        "ci_high",
    ]);
    table.rows = rows;
    Ok(single_table(spec, table, Vec::new()))
}

pub fn run_heatmap(spec: &ExperimentSpec) -> Result<RunOutput> {
    let points = spec.grid.points()?;
    let rows = par_rows(&points, |pt| {
        let (s, g) = spectrum_for(pt)?;
        let risk = theory_risk(&s, &g, pt.q)?;
        Ok(vec![
            Cell::Int(pt.dim as u64),
            Cell::Int(pt.n as u64),
            Cell::Float(pt.r),
            Cell::Float(pt.q),
            Cell::Int(pt.p as u64),
            Cell::Float(risk),
            Cell::Float(risk.log10()),
        ])
    })?;
    let mut table = Table::new(vec!["D", "n", "r", "q", "p", "risk", "log_risk"]);
    table.rows = rows;
    Ok(single_table(spec, table, Vec::new()))
}

pub fn run_bound_check(spec: &ExperimentSpec) -> Result<RunOutput> {
    let points = spec.grid.points()?;
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for pt in points {
        let why = if pt.r <= 0.5 {
            Some("needs r > 1/2".to_string())
        } else if (pt.q - pt.r).abs() > 0.0 {
            Some("needs q = r".to_string())
        } else {
            match pt.l {
                Some(l) if l >= 2 && pt.dim % pt.n == 0 => None,
                _ => Some("needs p = l n with l >= 2 and n | D".to_string()),
            }
        };
        match why {
            Some(why) => warnings.push(format!(
                "skipped D={} n={} p={} r={} q={}: {why}",
                pt.dim, pt.n, pt.p, pt.r, pt.q
            )),
            None => kept.push(pt),
        }
    }
    let rows = par_rows(&kept, |pt| {
        let (s, g) = spectrum_for(pt)?;
        let risk = risk_over_closed(&s, &g, pt.q)?.risk;
        let b = asymptotic_bound(&s, &g)?;
        Ok((*pt, risk, b))
    })?;
    let mut table = Table::new(vec![
        "D",
        "n",
        "p",
        "l",
        "r",
        "q",
        "risk",
        "bound",
        "large_d_bound",
        "slack",
        "valid",
    ]);
    let mut min_slack = f64::INFINITY;
    let mut all_valid = true;
    for (pt, risk, b) in rows {
        let slack = b.bound - risk;
        min_slack = min_slack.min(slack);
        all_valid &= slack >= 0.0;
        table.rows.push(vec![
            Cell::Int(pt.dim as u64),
            Cell::Int(pt.n as u64),
            Cell::Int(pt.p as u64),
            Cell::Int(pt.l.unwrap_or(0) as u64),
            Cell::Float(pt.r),
            Cell::Float(pt.q),
            Cell::Float(risk),
            Cell::Float(b.bound),
            Cell::Float(b.large_d_bound),
            Cell::Float(slack),
            Cell::Bool(slack >= 0.0),
        ]);
    }
    let mut summary = vec![Cell::Str("summary".into())];
    summary.extend(std::iter::repeat_n(Cell::Empty, 8));
    summary.push(if table.rows.is_empty() {
        Cell::Empty
    } else {
        Cell::Float(min_slack)
    });
    summary.push(Cell::Bool(all_valid));
    table.rows.push(summary);
    Ok(single_table(spec, table, warnings))
}

pub fn run_concentration(spec: &ExperimentSpec) -> Result<RunOutput> {
    let points = spec.grid.points()?;
    let mc = spec.mc()?;
    let conc = spec.concentration.clone().unwrap_or_default();
    if conc.t_list.is_some() == conc.t_multiples.is_some() {
        return Err(Error::InvalidConfiguration(
            "concentration: give exactly one of t_list, t_multiples".into(),
        ));
    }
    nonempty("concentration.t_list", &conc.t_list)?;
    nonempty("concentration.t_multiples", &conc.t_multiples)?;
    let rows = par_rows(&points, |pt| {
        let (s, g) = spectrum_for(pt)?;
        let (tq, _) = concentration_bound(pt.r, pt.q, 1.0)?;
        let ts: Vec<f64> = match (&conc.t_list, &conc.t_multiples) {
            (Some(ts), _) => ts.clone(),
            (_, Some(ms)) => ms.iter().map(|m| m * tq).collect(),
            _ => unreachable!(),
        };
        let check = concentration_check(&s, &g, pt.q, &ts, &mc)?;
        Ok(check
            .into_iter()
            .map(|c| {
                vec![
                    Cell::Int(pt.dim as u64),
                    Cell::Int(pt.n as u64),
                    Cell::Int(pt.p as u64),
                    Cell::Float(pt.r),
                    Cell::Float(pt.q),
                    Cell::Float(c.t),
                    Cell::Float(c.t / tq),
                    Cell::Float(c.empirical_tail),
                    Cell::Float(c.bound_tail),
                    Cell::Float(c.std_error),
                    Cell::Bool(c.dominated()),
                ]
            })
            .collect::<Vec<_>>())
    })?;
    let mut table = Table::new(vec![
        "D",
        "n",
        "p",
        "r",
        "q",
        "t",
        "t_over_tq",
        "empirical_tail",
        "bound_tail",
        "std_error",
        "dominated",
    ]);
    table.rows = rows.into_iter().flatten().collect();
    Ok(single_table(spec, table, Vec::new()))
}

/// Samples read from a CSV file, with the domain implied by coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub values: Vec<f64>,
    pub domain: Option<Domain>,
}

/// Reads a sample CSV: an optional header, then rows whose last column is
/// the value and whose leading columns (if any) are coordinates.
pub fn read_samples(path: &Path) -> Result<SampleFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut first_axis = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", path.display())))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(nums) if !nums.is_empty() => {
                if nums.len() > 1 {
                    first_axis.push(nums[0]);
                }
                values.push(*nums.last().unwrap());
            }
            _ if i == 0 => continue, // header
            _ => {
                return Err(Error::InvalidConfiguration(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidConfiguration(format!("{}: no samples", path.display())));
    }
    let domain = if first_axis.is_empty() {
        None
    } else {
        let distinct: BTreeSet<u64> = first_axis.iter().map(|x| x.to_bits()).collect();
        let mut xs: Vec<f64> = distinct.into_iter().map(f64::from_bits).collect();
        xs.sort_by(f64::total_cmp);
        (xs.len() >= 2).then(|| Domain {
            start: xs[0],
            period: (xs[xs.len() - 1] - xs[0]) * xs.len() as f64 / (xs.len() - 1) as f64,
        })
    };
    Ok(SampleFile { values, domain })
}

pub fn run_interp(spec: &ExperimentSpec) -> Result<RunOutput> {
    let is = spec
        .interp
        .clone()
        .ok_or_else(|| Error::InvalidConfiguration("interp: section required".into()))?;
    let (problem, truth) = match (&is.target, &is.samples_file) {
        (Some(name), None) => {
            let t = builtin_targets(name)?;
            let n_axis = is
                .n_axis
                .ok_or_else(|| Error::InvalidConfiguration("interp.n_axis: missing".into()))?;
            let mut p = InterpolationProblem::builtin(t, n_axis, is.p_axis, is.dim_axis, is.q);
            if let Some(d) = is.domain {
                p.domain = d;
            }
            (p, Some(t))
        }
        (None, Some(file)) => {
            let samples = read_samples(file)?;
            let d = is.dimension.unwrap_or(1);
            let n_axis = match is.n_axis {
                Some(n) => n,
                None => (samples.values.len() as f64).powf(1.0 / d as f64).round() as usize,
            };
            let p = InterpolationProblem {
                dimension: d,
                n_axis,
                p_axis: is.p_axis,
                dim_axis: is.dim_axis,
                q: is.q,
                domain: is.domain.or(samples.domain).unwrap_or(Domain::SYMMETRIC),
                target: Target::Samples(samples.values),
                noise_sigma: 0.0,
                noise_seed: 0,
                weight: is.weight,
            };
            (p, None)
        }
        _ => {
            return Err(Error::InvalidConfiguration(
                "interp: give exactly one of target, samples_file".into(),
            ))
        }
    };
    let problem = InterpolationProblem {
        noise_sigma: if truth.is_some() { is.noise_sigma } else { 0.0 },
        noise_seed: is.noise_seed,
        weight: is.weight,
        ..problem
    };
    problem.validate()?;
    let methods = match &is.methods {
        Some(m) if m.is_empty() => {
            return Err(Error::InvalidConfiguration("interp.methods: list is empty".into()))
        }
        Some(m) => m.clone(),
        None if problem.p_axis <= problem.n_axis => {
            vec![Method::LeastSquares, Method::PlainMinNorm, Method::WeightedMinNorm]
        }
        None => vec![Method::PlainMinNorm, Method::WeightedMinNorm],
    };
    let d = problem.dimension;
    let observations = problem.observations();
    // built-in targets are checked on a dense grid, sample files at the samples
    let (points, f_true): (Vec<Vec<f64>>, Vec<f64>) = match truth {
        Some(t) => {
            let m = is.eval_points.unwrap_or(match d {
                1 => 400,
                2 => 60,
                _ => 16,
            });
            let pts = problem.domain.evaluation_grid(m, d);
            let f = pts.iter().map(|x| t.eval(x)).collect();
            (pts, f)
        }
        None => (problem.sample_points(), problem.clean_samples()),
    };
    let weights = problem.weights();
    let fits: Vec<Result<_>> = methods.par_iter().map(|&m| fit_interpolant(&problem, m)).collect();
    let out = spec.output_path();
    let axis_names = ["x", "y", "z"];
    let mut files = Vec::new();
    let mut metrics = Vec::new();
    for fit in fits {
        let fit = fit?;
        let values = fit.evaluate(&points);
        let mut columns: Vec<&'static str> = axis_names[..d].to_vec();
        columns.extend(["f_true", "f_hat"]);
        let mut table = Table::new(columns);
        let mut sq = 0.0;
        for ((x, ft), fh) in points.iter().zip(&f_true).zip(&values) {
            sq += (fh.re - ft).powi(2);
            let mut row: Vec<Cell> = x.iter().map(|&v| Cell::Float(v)).collect();
            row.extend([Cell::Float(*ft), Cell::Float(fh.re)]);
            table.rows.push(row);
        }
        let rmse = (sq / points.len() as f64).sqrt();
        files.push((
            out.join(format!("{}.{}", fit.method.as_str(), spec.output.format.extension())),
            table.render(spec.output.format),
        ));
        let mut m = Map::new();
        m.insert("method".into(), fit.method.as_str().into());
        m.insert("path".into(), serde_json::to_value(fit.path).expect("enum serializes"));
        m.insert("sample_residual".into(), fit.residual.into());
        m.insert("weighted_norm".into(), fit.weighted_norm(&weights, problem.q).into());
        m.insert("plain_norm".into(), fit.plain_norm().into());
        m.insert("rmse".into(), rmse.into());
        metrics.push(Value::Object(m));
    }
    let mut doc = Map::new();
    doc.insert(
        "target".into(),
        match &truth {
            Some(t) => t.name().into(),
            None => "samples".into(),
        },
    );
    doc.insert("dimension".into(), d.into());
    doc.insert("n_axis".into(), problem.n_axis.into());
    doc.insert("p_axis".into(), problem.p_axis.into());
    doc.insert("dim_axis".into(), problem.dim_axis.into());
    doc.insert("q".into(), problem.q.into());
    doc.insert("weight".into(), serde_json::to_value(problem.weight).expect("enum serializes"));
    doc.insert("domain".into(), serde_json::to_value(problem.domain).expect("domain serializes"));
    doc.insert("eval_points".into(), points.len().into());
    doc.insert("methods".into(), Value::Array(metrics));
    doc.insert("samples".into(), observations.into());
    let mut body = serde_json::to_string_pretty(&Value::Object(doc)).expect("json values serialize");
    body.push('\n');
    files.push((out.join("metrics.json"), body));
    Ok(RunOutput {
        files,
        warnings: Vec::new(),
    })
}

/// Runs a spec on a pool of `spec.threads` workers (default: all cores).
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    let go = || match spec.command {
        Command::RiskCurve => run_risk_curve(spec),
        Command::McRisk => run_mc_risk(spec),
        Command::Heatmap => run_heatmap(spec),
        Command::BoundCheck => run_bound_check(spec),
        Command::Interp => run_interp(spec),
        Command::Concentration => run_concentration(spec),
    };
    match spec.threads {
        Some(0) => Err(Error::InvalidConfiguration("threads: must be positive".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidConfiguration(format!("threads: {e}")))?
            .install(go),
        None => go(),
    }
}

/// Human-readable summary of a finished run.
pub fn describe(spec: &ExperimentSpec, out: &RunOutput) -> String {
    let mut s = String::new();
    for (path, _) in &out.files {
        let _ = writeln!(s, "{}: wrote {}", spec.command.as_str(), path.display());
    }
    if !out.warnings.is_empty() {
        let _ = writeln!(
            s,
            "{} warning(s) in {}",
            out.warnings.len(),
            RunOutput::warnings_path(&spec.output_path()).display()
        );
    }
    s
}
