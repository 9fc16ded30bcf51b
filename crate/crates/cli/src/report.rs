use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Holds,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Holds => "==",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        i64::try_from(x).map_or_else(|_| Cell::Text(x.to_string()), Cell::Int)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(k) => k.to_string(),
            Cell::Real(x) => format_real(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub quantities: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
    pub tol_scale: f64,
}

impl Report {
    pub fn at_most(&mut self, ctx: &Context, name: &str, measured: f64, tol: f64) {
        let bound = tol * ctx.tol_scale;
        self.checks.push(Check { name: name.into(), measured, bound, relation: Relation::AtMost, passed: measured <= bound });
    }

    pub fn at_least(&mut self, name: &str, measured: f64, bound: f64) {
        self.checks.push(Check { name: name.into(), measured, bound, relation: Relation::AtLeast, passed: measured >= bound });
    }

    pub fn holds(&mut self, name: &str, ok: bool) {
        let v = if ok { 1.0 } else { 0.0 };
        self.checks.push(Check { name: name.into(), measured: v, bound: 1.0, relation: Relation::Holds, passed: ok });
    }

    pub fn quantity(&mut self, name: &str, value: f64) {
        self.quantities.insert(name.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    tol_scale: f64,
    passed: bool,
    checks: &'a [Check],
    quantities: &'a BTreeMap<String, f64>,
    notes: &'a [String],
    artifacts: Vec<String>,
}

/// Write every table and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, experiment: &str, ctx: &Context, report: &Report) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for t in &report.tables {
        written.push(t.write(dir)?);
    }
    let summary = Summary {
        experiment,
        seed: ctx.seed,
        tol_scale: ctx.tol_scale,
        passed: report.passed(),
        checks: &report.checks,
        quantities: &report.quantities,
        notes: &report.notes,
        artifacts: report.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
    };
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// One row per step: `step`, then `re_ij, im_ij` for every entry in row-major order.
pub fn trajectory_table(name: &str, states: &[riqs::DensityMatrix]) -> Table {
    let d = states.first().map_or(0, |s| s.dim());
    let mut header = vec!["step".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    let mut t = Table { name: name.to_string(), header, rows: Vec::new() };
    for (n, s) in states.iter().enumerate() {
        let m = s.matrix();
        let mut row = vec![Cell::from(n)];
        for i in 0..d {
            for j in 0..d {
                row.extend([Cell::Real(m[(i, j)].re), Cell::Real(m[(i, j)].im)]);
            }
        }
        t.push(row);
    }
    t
}
