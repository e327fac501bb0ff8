//! Shared vocabulary: parameters, networks, exogenous opportunity
//! distributions and utility vectors.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for probability comparisons.
pub const TOL: f64 = 1e-12;

/// How surplus opportunities are routed to neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferModel {
    /// Surplus goes to a uniformly random neighbour.
    #[default]
    Uninformed,
    /// Surplus goes to a uniformly random neighbour whose own draw was zero.
    Informed,
}

impl fmt::Display for TransferModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferModel::Uninformed => f.write_str("uninformed"),
            TransferModel::Informed => f.write_str("informed"),
        }
    }
}

impl std::str::FromStr for TransferModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uninformed" => Ok(TransferModel::Uninformed),
            "informed" => Ok(TransferModel::Informed),
            other => Err(Error::Parse(format!("unknown transfer model '{other}'"))),
        }
    }
}

/// Non-fatal findings from [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamWarning {
    /// The surplus probability exceeds the deficiency probability.
    SurplusExceedsDeficiency { p: f64, q: f64 },
}

impl fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamWarning::SurplusExceedsDeficiency { p, q } => {
                write!(f, "p = {p} exceeds q = {q}")
            }
        }
    }
}

/// Deficiency probability `q`, surplus probability `p`, per-edge cost
/// `gamma` and the transfer model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub p: f64,
    pub gamma: f64,
    #[serde(default)]
    pub model: TransferModel,
}

impl ModelParams {
    pub fn new(q: f64, p: f64, gamma: f64) -> Self {
        ModelParams { q, p, gamma, model: TransferModel::Uninformed }
    }

    pub fn informed(q: f64, p: f64, gamma: f64) -> Self {
        ModelParams { q, p, gamma, model: TransferModel::Informed }
    }

    pub fn with_model(mut self, model: TransferModel) -> Self {
        self.model = model;
        self
    }

    /// Checks the hard invariants. `p > q` is accepted but reported.
    pub fn validate(&self) -> Result<Option<ParamWarning>> {
        let ModelParams { q, p, gamma, .. } = *self;
        if !q.is_finite() || !p.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if q <= 0.0 || q >= 1.0 {
            return Err(Error::InvalidParams(format!("q = {q} must lie in (0, 1)")));
        }
        if p <= 0.0 {
            return Err(Error::InvalidParams(format!("p = {p} must be positive")));
        }
        if p + q > 1.0 + TOL {
            return Err(Error::InvalidParams(format!("p + q = {} exceeds 1", p + q)));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidParams(format!("gamma = {gamma} must be nonnegative")));
        }
        if p > q {
            return Ok(Some(ParamWarning::SurplusExceedsDeficiency { p, q }));
        }
        Ok(None)
    }

    /// Probability of exactly one exogenous opportunity.
    pub fn one_prob(&self) -> f64 {
        (1.0 - self.p - self.q).max(0.0)
    }

    /// `q * p`, the marginal value of a first connection.
    pub fn qp(&self) -> f64 {
        self.q * self.p
    }
}

/// Simple undirected graph on individuals `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Network {
    adj: Vec<BTreeSet<usize>>,
    edge_count: usize,
}

impl Network {
    pub fn empty(n: usize) -> Self {
        Network { adj: vec![BTreeSet::new(); n], edge_count: 0 }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut net = Network::empty(n);
        for (i, j) in edges {
            net.add_edge(i, j)?;
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            Err(Error::NodeOutOfRange { node: i, n: self.n() })
        } else {
            Ok(())
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        if !self.adj[i].insert(j) {
            return Err(Error::EdgePresent(i.min(j), i.max(j)));
        }
        self.adj[j].insert(i);
        self.edge_count += 1;
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        if !self.adj[i].remove(&j) {
            return Err(Error::EdgeAbsent(i.min(j), i.max(j)));
        }
        self.adj[j].remove(&i);
        self.edge_count -= 1;
        Ok(())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj.get(i).is_some_and(|s| s.contains(&j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(BTreeSet::len).collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied()
    }

    pub fn neighbor_set(&self, i: usize) -> &BTreeSet<usize> {
        &self.adj[i]
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.range(i + 1..).map(move |&j| (i, j)))
    }

    /// Unordered non-adjacent pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn non_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).filter(move |&j| !self.adj[i].contains(&j)).map(move |j| (i, j)))
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Node `i`, its neighbours and their neighbours, sorted.
    pub fn ball2(&self, i: usize) -> Vec<usize> {
        let mut ball = BTreeSet::new();
        ball.insert(i);
        for j in self.neighbors(i) {
            ball.insert(j);
            ball.extend(self.neighbors(j));
        }
        ball.into_iter().collect()
    }

    /// True when `i` lies on a triangle or a 4-cycle.
    pub fn on_short_cycle(&self, i: usize) -> bool {
        let mut seen = BTreeSet::new();
        for j in self.neighbors(i) {
            for k in self.neighbors(j) {
                if k == i {
                    continue;
                }
                // k adjacent to i closes a triangle; k reached twice closes a 4-cycle
                if self.adj[i].contains(&k) || !seen.insert(k) {
                    return true;
                }
            }
        }
        false
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { n: self.n(), edges: self.edges().map(|(i, j)| [i, j]).collect() }
    }
}

/// On-disk graph layout: `{"n": int, "edges": [[i, j], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for Network {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        Network::from_edges(file.n, file.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

impl Serialize for Network {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = GraphFile::deserialize(d)?;
        Network::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Probability mass function over the number of exogenous opportunities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        Self::check(&masses).map_err(|reason| Error::InvalidDistribution { row: 0, reason })?;
        Ok(Pmf(masses))
    }

    fn check(masses: &[f64]) -> std::result::Result<(), String> {
        if masses.is_empty() {
            return Err("empty pmf".into());
        }
        if let Some(x) = masses.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(format!("entry {x} is negative or not finite"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(format!("masses sum to {total}"));
        }
        Ok(())
    }

    /// The three-point law `(q, 1 - p - q, p)`.
    pub fn three_point(params: &ModelParams) -> Self {
        Pmf(vec![params.q, params.one_prob(), params.p])
    }

    /// Point mass at `k` opportunities.
    pub fn point(k: usize) -> Self {
        let mut masses = vec![0.0; k + 1];
        masses[k] = 1.0;
        Pmf(masses)
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    /// `P(X = k)`, zero beyond the support.
    pub fn mass(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    /// Largest count with an explicit entry.
    pub fn max_count(&self) -> usize {
        self.0.len() - 1
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        Pmf::check(&v)?;
        Ok(Pmf(v))
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.0
    }
}

/// One pmf per individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousDistribution {
    rows: Vec<Pmf>,
}

impl ExogenousDistribution {
    pub fn new(rows: Vec<Pmf>) -> Self {
        ExogenousDistribution { rows }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(row, masses)| {
                Pmf::check(&masses).map_err(|reason| Error::InvalidDistribution { row, reason })?;
                Ok(Pmf(masses))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExogenousDistribution { rows })
    }

    pub fn uniform(n: usize, pmf: Pmf) -> Self {
        ExogenousDistribution { rows: vec![pmf; n] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &Pmf {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Pmf] {
        &self.rows
    }
}

/// The base three-point law replicated over `n` individuals.
pub fn base_distribution(params: &ModelParams, n: usize) -> Result<ExogenousDistribution> {
    params.validate()?;
    Ok(ExogenousDistribution::uniform(n, Pmf::three_point(params)))
}

/// Expected utilities, one per individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector(pub Vec<f64>);

impl UtilityVector {
    pub fn welfare(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn per_capita(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.welfare() / self.0.len() as f64
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
