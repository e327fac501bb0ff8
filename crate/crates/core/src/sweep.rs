//! Rectangular parameter sweeps and their CSV form.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interventions::worst_regular_degree;
use crate::model::{ModelParams, TOL};
use crate::welfare::{poa_costly, poa_frictionless, poa_informed, regular_utility, worst_case_gini};

pub const CSV_HEADER: &str = "q,p,gamma,value,d_or_dminmax";

/// Population size used for the informed optimum in sweeps.
pub const INFORMED_SWEEP_N: usize = 1000;

/// `name=start:stop:step`, values `start + k * step` up to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(name: &str, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !matches!(name, "q" | "p" | "gamma") {
            return Err(Error::Parse(format!("unknown axis '{name}' (expected q, p or gamma)")));
        }
        if !step.is_finite() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::Parse(format!("axis {name} needs start <= stop and step > 0")));
        }
        Ok(Axis { name: name.to_string(), start, stop, step })
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rounded to 12 decimals so accumulated steps print cleanly.
    pub fn value(&self, k: usize) -> f64 {
        ((self.start + k as f64 * self.step) * 1e12).round() / 1e12
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Parses a comma-separated list of axes.
    pub fn parse_list(s: &str) -> Result<Vec<Axis>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, range) = s
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("axis '{s}' is not name=start:stop:step")))?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("axis '{s}': {e}"))))
            .collect::<Result<_>>()?;
        match parts[..] {
            [start, stop, step] => Axis::new(name.trim(), start, stop, step),
            [v] => Axis::new(name.trim(), v, v, 1.0),
            _ => Err(Error::Parse(format!("axis '{s}' is not name=start:stop:step"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.name, self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    PoaFrictionless,
    PoaCostly,
    PoaInformed,
    Gini,
    Friction,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepKind::PoaFrictionless => "poa-frictionless",
            SweepKind::PoaCostly => "poa-costly",
            SweepKind::PoaInformed => "poa-informed",
            SweepKind::Gini => "gini",
            SweepKind::Friction => "friction",
        };
        f.write_str(s)
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poa-frictionless" => Ok(SweepKind::PoaFrictionless),
            "poa-costly" => Ok(SweepKind::PoaCostly),
            "poa-informed" => Ok(SweepKind::PoaInformed),
            "gini" => Ok(SweepKind::Gini),
            "friction" => Ok(SweepKind::Friction),
            other => Err(Error::Parse(format!("unknown sweep kind '{other}'"))),
        }
    }
}

impl SweepKind {
    /// True for grids whose values are prices of anarchy.
    pub fn is_poa(&self) -> bool {
        matches!(self, SweepKind::PoaFrictionless | SweepKind::PoaCostly | SweepKind::PoaInformed)
    }
}

/// Values held fixed across the grid. With `q_complement`, `q = 1 - p`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub q_complement: bool,
}

/// One grid cell; `value` is `None` where the parameters are invalid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub q: f64,
    pub p: f64,
    pub gamma: f64,
    pub value: Option<f64>,
    pub d: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub kind: SweepKind,
    pub axes: Vec<Axis>,
    pub cells: Vec<SweepCell>,
    pub metadata: BTreeMap<String, String>,
}

impl SweepGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    /// Observed range of unmasked values.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        let mut it = self.cells.iter().filter_map(|c| c.value);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let value = c.value.map_or_else(|| "NaN".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", c.q, c.p, c.gamma, value, c.d);
        }
        out
    }

    /// Inverse of [`SweepGrid::to_csv`]; axes and kind come from the header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = BTreeMap::new();
        let mut lines = text.lines();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse(format!("bad metadata '{line}'")))?;
                metadata.insert(k.to_string(), v.to_string());
            } else {
                header = Some(line);
                break;
            }
        }
        if header != Some(CSV_HEADER) {
            return Err(Error::Parse(format!("expected header '{CSV_HEADER}'")));
        }
        let kind: SweepKind = metadata.get("kind").ok_or_else(|| Error::Parse("missing kind".into()))?.parse()?;
        let axes = Axis::parse_list(metadata.get("axes").ok_or_else(|| Error::Parse("missing axes".into()))?)?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
        let cells = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::Parse(format!("row '{l}' has {} fields", f.len())));
                }
                let value = if f[3] == "NaN" { None } else { Some(num(f[3])?) };
                Ok(SweepCell { q: num(f[0])?, p: num(f[1])?, gamma: num(f[2])?, value, d: f[4].to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = SweepGrid { kind, axes, cells, metadata };
        let expected: usize = grid.shape().iter().product();
        if grid.cells.len() != expected {
            return Err(Error::Parse(format!("{} rows for a grid of {expected} cells", grid.cells.len())));
        }
        Ok(grid)
    }
}

/// Coordinates of cell `idx` in row-major order (last axis fastest).
fn cell_params(axes: &[Axis], fixed: &FixedParams, idx: usize) -> (f64, f64, f64) {
    let (mut q, mut p, mut gamma) = (fixed.q, fixed.p, fixed.gamma);
    let mut rem = idx;
    for axis in axes.iter().rev() {
        let v = axis.value(rem % axis.len());
        rem /= axis.len();
        match axis.name.as_str() {
            "q" => q = Some(v),
            "p" => p = Some(v),
            _ => gamma = Some(v),
        }
    }
    let p = p.unwrap_or(f64::NAN);
    let q = if fixed.q_complement && q.is_none() { 1.0 - p } else { q.unwrap_or(f64::NAN) };
    (q, p, gamma.unwrap_or(0.0))
}

/// Value and degree label for one cell; `None` for invalid parameters.
pub fn evaluate_cell(kind: SweepKind, q: f64, p: f64, gamma: f64) -> Result<(Option<f64>, String)> {
    let params = ModelParams::new(q, p, gamma);
    if params.validate().is_err() {
        return Ok((None, String::new()));
    }
    Ok(match kind {
        SweepKind::PoaFrictionless => (Some(poa_frictionless(q, p)), String::new()),
        SweepKind::PoaCostly => {
            let b = poa_costly(q, p, gamma)?;
            (Some(b.lower), b.d_used.to_string())
        }
        SweepKind::PoaInformed => {
            let b = poa_informed(q, p, gamma, INFORMED_SWEEP_N)?;
            (Some(b.lower), b.d_used.to_string())
        }
        SweepKind::Gini if gamma <= 0.0 => (None, String::new()),
        SweepKind::Gini => {
            let g = worst_case_gini(q, p, gamma)?;
            (Some(g.value), format!("{}-{}", g.d_min, g.d_max))
        }
        SweepKind::Friction if gamma <= 0.0 => (None, String::new()),
        SweepKind::Friction => {
            let d = worst_regular_degree(q, p, gamma)?;
            (Some(regular_utility(q, p, gamma, d)), d.to_string())
        }
    })
}

/// Evaluates every cell in parallel; output order is the cell index.
pub fn run_sweep(kind: SweepKind, axes: Vec<Axis>, fixed: FixedParams) -> Result<SweepGrid> {
    let mut names: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parse("repeated axis".into()));
    }
    if kind == SweepKind::PoaFrictionless && fixed.gamma.is_some_and(|g| g.abs() > TOL) {
        return Err(Error::Precondition("frictionless sweep requires gamma = 0".into()));
    }
    let total: usize = axes.iter().map(Axis::len).product();
    let cells = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (q, p, gamma) = cell_params(&axes, &fixed, idx);
            let (value, d) = evaluate_cell(kind, q, p, gamma)?;
            Ok(SweepCell { q, p, gamma, value, d })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = BTreeMap::new();
    metadata.insert("kind".into(), kind.to_string());
    metadata.insert("axes".into(), axes.iter().map(Axis::to_string).collect::<Vec<_>>().join(","));
    if let Some(q) = fixed.q {
        metadata.insert("q".into(), q.to_string());
    }
    if let Some(p) = fixed.p {
        metadata.insert("p".into(), p.to_string());
    }
    if let Some(g) = fixed.gamma {
        metadata.insert("gamma".into(), g.to_string());
    }
    if fixed.q_complement {
        metadata.insert("q_complement".into(), "true".into());
    }
    metadata.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    Ok(SweepGrid { kind, axes, cells, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a: Axis = "q=0:1:0.25".parse().unwrap();
        assert_eq!(a.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("x=0:1:0.1".parse::<Axis>().is_err());
        assert!("p=1:0:0.1".parse::<Axis>().is_err());
        assert!("p=0:1:0".parse::<Axis>().is_err());
        assert_eq!(Axis::parse_list("q=0.01:0.99:0.01,p=0.01:0.99:0.01").unwrap()[0].len(), 99);
    }

    #[test]
    fn frictionless_cell_identity_and_mask() {
        let axes = Axis::parse_list("q=0.25:0.75:0.25,p=0.25:0.75:0.25").unwrap();
        let grid = run_sweep(SweepKind::PoaFrictionless, axes, FixedParams::default()).unwrap();
        assert_eq!(grid.cells.len(), 9);
        let mid = grid.cells.iter().find(|c| c.q == 0.5 && c.p == 0.5).unwrap();
        assert_eq!(mid.value, Some(poa_frictionless(0.5, 0.5)));
        let out = grid.cells.iter().find(|c| c.q == 0.75 && c.p == 0.75).unwrap();
        assert_eq!(out.value, None);
    }

    #[test]
    fn csv_round_trip() {
        let axes = Axis::parse_list("p=0.05:0.95:0.05,gamma=0.001:0.2:0.01").unwrap();
        let fixed = FixedParams { q_complement: true, ..FixedParams::default() };
        for kind in [SweepKind::PoaCostly, SweepKind::Gini] {
            let grid = run_sweep(kind, axes.clone(), fixed).unwrap();
            let back = SweepGrid::from_csv(&grid.to_csv()).unwrap();
            assert_eq!(back, grid);
        }
    }

    #[test]
    fn costly_cells_at_least_one() {
        let axes = Axis::parse_list("p=0.01:0.99:0.07,gamma=0.0001:0.25:0.01").unwrap();
        let fixed = FixedParams { q_complement: true, ..FixedParams::default() };
        let grid = run_sweep(SweepKind::PoaCostly, axes, fixed).unwrap();
        assert!(grid.cells.iter().filter_map(|c| c.value).all(|v| v >= 1.0));
    }
}
