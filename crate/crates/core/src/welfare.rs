//! Price of anarchy, optimal welfare, Gini inequality, homophily checks and
//! brute-force oracles over small graphs.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{mu, social_welfare};
use crate::equilibrium::{is_dfpne, largest_d_dregval, regular_equilibrium_degrees};
use crate::error::{Error, Result};
use crate::model::{ExogenousDistribution, ModelParams, Network, TransferModel, UtilityVector, TOL};

/// Largest population for exhaustive graph enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 6;

/// Interior points per axis when scanning the bounding offsets.
const DELTA_GRID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Frictionless,
    Costly,
    InformedFrictionless,
    InformedCostly,
    Trivial,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Frictionless => "frictionless",
            Regime::Costly => "costly",
            Regime::InformedFrictionless => "informed-frictionless",
            Regime::InformedCostly => "informed-costly",
            Regime::Trivial => "trivial",
        };
        f.write_str(s)
    }
}

/// Price-of-anarchy bracket. `lower` is the value with both bounding
/// offsets at zero; `upper` is the largest value over the offset square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoABounds {
    pub lower: f64,
    pub upper: f64,
    pub d_used: usize,
    pub regime: Regime,
}

impl PoABounds {
    fn trivial() -> Self {
        PoABounds { lower: 1.0, upper: 1.0, d_used: 0, regime: Regime::Trivial }
    }
}

/// `(1 - q(1 - p)) / (1 - q e^{-p})`.
pub fn poa_frictionless(q: f64, p: f64) -> f64 {
    (1.0 - q * (1.0 - p)) / (1.0 - q * (-p).exp())
}

/// Evaluates `num / den(d1, d2)` over the offset square `[0, 1]^2`.
fn delta_bracket(num: f64, den: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let lower = num / den(0.0, 0.0);
    let mut upper = lower;
    for a in 0..=DELTA_GRID {
        for b in 0..=DELTA_GRID {
            let (d1, d2) = (a as f64 / DELTA_GRID as f64, b as f64 / DELTA_GRID as f64);
            upper = upper.max(num / den(d1, d2));
        }
    }
    (lower, upper)
}

pub fn poa_costly(q: f64, p: f64, gamma: f64) -> Result<PoABounds> {
    let params = ModelParams::new(q, p, gamma);
    params.validate()?;
    if gamma == 0.0 {
        let v = poa_frictionless(q, p);
        return Ok(PoABounds { lower: v, upper: v, d_used: 0, regime: Regime::Frictionless });
    }
    if gamma > params.qp() {
        return Ok(PoABounds::trivial());
    }
    let d = largest_d_dregval(&params)?;
    let df = d as f64;
    let num = 1.0 - q * (1.0 - p) - gamma;
    let (lower, upper) =
        delta_bracket(num, |d1, d2| 1.0 - q * (1.0 - p / (df + d1 + d2)).powf(df + d1) - gamma * (df + d1));
    Ok(PoABounds { lower, upper, d_used: d, regime: Regime::Costly })
}

/// Per-capita optimum in the uninformed game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalWelfare {
    /// Per-capita welfare of the asymptotic optimum.
    pub per_capita: f64,
    /// True when the optimum is a perfect matching, false for the empty graph.
    pub matching: bool,
    /// Exact per-capita welfare of a maximal matching on `n` individuals
    /// minus `per_capita`; nonzero only for odd `n`.
    pub odd_correction: f64,
}

pub fn optimal_welfare_png(q: f64, p: f64, gamma: f64, n: usize) -> Result<OptimalWelfare> {
    ModelParams::new(q, p, gamma).validate()?;
    if gamma > q * p {
        return Ok(OptimalWelfare { per_capita: 1.0 - q, matching: false, odd_correction: 0.0 });
    }
    let pair = 1.0 - q * (1.0 - p) - gamma;
    let odd_correction = if n % 2 == 1 {
        ((n - 1) as f64 * pair + (1.0 - q)) / n as f64 - pair
    } else {
        0.0
    };
    Ok(OptimalWelfare { per_capita: pair, matching: true, odd_correction })
}

/// Per-capita welfare of a girth-5 `d`-regular network in the informed game.
pub fn informed_regular_welfare(q: f64, p: f64, gamma: f64, d: f64) -> f64 {
    if d == 0.0 {
        return 1.0 - q;
    }
    let h = p / q * (1.0 - (1.0 - q).powf(d)) / d;
    1.0 - q * (1.0 - h).powf(d) - gamma * d
}

/// Degree in `0..=n` maximising [`informed_regular_welfare`], smallest on ties.
pub fn optimal_degree_informed(q: f64, p: f64, gamma: f64, n: usize) -> Result<(usize, f64)> {
    ModelParams::new(q, p, gamma).validate()?;
    let mut best = (0, 1.0 - q);
    for d in 1..=n {
        let w = informed_regular_welfare(q, p, gamma, d as f64);
        if w > best.1 {
            best = (d, w);
        }
    }
    Ok(best)
}

pub fn poa_informed(q: f64, p: f64, gamma: f64, n: usize) -> Result<PoABounds> {
    let params = ModelParams::informed(q, p, gamma);
    params.validate()?;
    if gamma > params.qp() {
        return Ok(PoABounds::trivial());
    }
    let (d_opt, num) = optimal_degree_informed(q, p, gamma, n)?;
    if gamma == 0.0 {
        let v = num / (1.0 - q * (-p / q).exp());
        return Ok(PoABounds { lower: v, upper: v, d_used: d_opt, regime: Regime::InformedFrictionless });
    }
    let d = largest_d_dregval(&params)?;
    let df = d as f64;
    let (lower, upper) = delta_bracket(num, |d1, d2| {
        let x = df + d1 + d2;
        let h = p / q * (1.0 - (1.0 - q).powf(x)) / x;
        1.0 - q * (1.0 - h).powf(df + d1) - gamma * (df + d1)
    });
    Ok(PoABounds { lower, upper, d_used: d, regime: Regime::InformedCostly })
}

/// `sum_{i,j} |u_i - u_j| / (2 n sum_i u_i)`, via the sorted form.
pub fn gini(u: &[f64]) -> Result<f64> {
    let total: f64 = u.iter().sum();
    if total <= 0.0 || u.is_empty() {
        return Err(Error::NonPositiveWelfare(total));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(k, &x)| (2.0 * k as f64 - n + 1.0) * x).sum();
    Ok(weighted / (n * total))
}

pub fn gini_of(u: &UtilityVector) -> Result<f64> {
    gini(u.as_slice())
}

/// Gini of a population with fraction `lambda` at `u_max` and the rest at
/// `u_min`.
pub fn two_block_gini(lambda: f64, u_max: f64, u_min: f64) -> f64 {
    lambda * (1.0 - lambda) * (u_max - u_min) / (lambda * u_max + (1.0 - lambda) * u_min)
}

/// Fraction at `u_max` maximising [`two_block_gini`].
pub fn worst_lambda(u_max: f64, u_min: f64) -> f64 {
    ((u_max * u_min).sqrt() - u_min) / (u_max - u_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniResult {
    pub value: f64,
    pub lambda: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub d_min: usize,
    pub d_max: usize,
}

/// Per-capita uninformed welfare of a `d`-regular network.
pub fn regular_utility(q: f64, p: f64, gamma: f64, d: usize) -> f64 {
    if d == 0 {
        return 1.0 - q;
    }
    let df = d as f64;
    1.0 - q * (1.0 - p / df).powi(d as i32) - gamma * df
}

/// Worst-case Gini over mixtures of the smallest- and largest-degree
/// regular equilibria.
pub fn worst_case_gini(q: f64, p: f64, gamma: f64) -> Result<GiniResult> {
    let set = regular_equilibrium_degrees(&ModelParams::new(q, p, gamma))?;
    let (d_min, d_max) = (set.d_min, set.d_max);
    let (a, b) = (regular_utility(q, p, gamma, d_min), regular_utility(q, p, gamma, d_max));
    let (u_max, u_min) = (a.max(b), a.min(b));
    if d_min == d_max || u_max - u_min <= TOL {
        return Ok(GiniResult { value: 0.0, lambda: 0.0, u_max, u_min, d_min, d_max });
    }
    let lambda = worst_lambda(u_max, u_min);
    Ok(GiniResult { value: two_block_gini(lambda, u_max, u_min), lambda, u_max, u_min, d_min, d_max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRangeWitness {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub degrees: Vec<usize>,
}

/// Finds `p` with `q = 1 - p` and `gamma = q(1 - p) / 2` whose regular
/// equilibria include degree 1 and some degree above `k`.
pub fn degree_range_witness(k: usize) -> Result<DegreeRangeWitness> {
    let at = |p: f64| -> Result<DegreeRangeWitness> {
        let q = 1.0 - p;
        let gamma = q * (1.0 - p) / 2.0;
        let degrees = regular_equilibrium_degrees(&ModelParams::new(q, p, gamma))?.degrees;
        Ok(DegreeRangeWitness { p, q, gamma, degrees })
    };
    let ok = |w: &DegreeRangeWitness| k == 0 || (w.degrees.contains(&1) && w.degrees.iter().any(|&d| d > k));
    for step in [1e-2, 1e-3, 1e-4, 1e-5] {
        let count = ((2.0 / 3.0) / step) as usize;
        for m in 1..count {
            let p = 1.0 / 3.0 + m as f64 * step;
            if p >= 1.0 {
                break;
            }
            let w = at(p)?;
            if ok(&w) {
                return Ok(w);
            }
        }
    }
    Err(Error::SearchFailed(format!("no p in (1/3, 1) yields a degree range of {k}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    /// Individuals with a neighbour whose degree differs by more than `k`.
    pub violators: Vec<usize>,
    /// Individuals on a triangle or 4-cycle (informed model only).
    pub short_cycle: Vec<usize>,
    pub bound: f64,
    pub within_bound: bool,
}

pub fn homophily_report(net: &Network, params: &ModelParams, k: usize) -> HomophilyReport {
    let violators: Vec<usize> = (0..net.n())
        .filter(|&i| net.neighbors(i).any(|j| net.degree(i).abs_diff(net.degree(j)) > k))
        .collect();
    let (short_cycle, bound) = match params.model {
        TransferModel::Uninformed => {
            let r = params.qp() / params.gamma;
            (Vec::new(), r * r * (1.0 + r))
        }
        TransferModel::Informed => {
            let r = params.p / params.gamma;
            ((0..net.n()).filter(|&i| net.on_short_cycle(i)).collect(), r * r * (1.0 + r.powi(3)))
        }
    };
    let flagged: BTreeSet<usize> = violators.iter().chain(&short_cycle).copied().collect();
    let within_bound = flagged.len() as f64 <= bound;
    HomophilyReport { violators, short_cycle, bound, within_bound }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusHomophilyReport {
    pub violators: Vec<usize>,
    pub bound: f64,
    pub within_bound: bool,
}

fn grid_floor(x: f64, eps: f64) -> f64 {
    (x / eps + 1e-9).floor() * eps
}

/// Individuals with a neighbour whose per-contact transfer probability
/// `mu_j(d_j) / d_j` falls below their own, up to the `eps` grid and one
/// extra contact.
pub fn status_homophily_report(
    net: &Network,
    dists: &ExogenousDistribution,
    gamma: f64,
    eps: f64,
) -> Result<StatusHomophilyReport> {
    if gamma <= 0.0 || eps <= 0.0 {
        return Err(Error::Precondition("status homophily needs gamma > 0 and eps > 0".into()));
    }
    if dists.len() != net.n() {
        return Err(Error::Precondition(format!("{} rows for {} individuals", dists.len(), net.n())));
    }
    let mut violators = Vec::new();
    for i in 0..net.n() {
        let di = net.degree(i);
        if di == 0 {
            continue;
        }
        let own = mu(dists.row(i), di)? / di as f64;
        let own_next = grid_floor(mu(dists.row(i), di + 1)?, eps) / (di + 1) as f64;
        let mut bad = false;
        for j in net.neighbors(i) {
            let dj = net.degree(j);
            let theirs = mu(dists.row(j), dj)? / dj as f64;
            let theirs_next = grid_floor(mu(dists.row(j), dj + 1)?, eps) / (dj + 1) as f64;
            if own_next > theirs + TOL || theirs_next > own + TOL {
                bad = true;
                break;
            }
        }
        if bad {
            violators.push(i);
        }
    }
    let bound = gamma.powi(-3) * (1.0 + 1.0 / gamma) / eps;
    let within_bound = violators.len() as f64 <= bound;
    Ok(StatusHomophilyReport { violators, bound, within_bound })
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn graph_from_mask(n: usize, pairs: &[(usize, usize)], mask: u64) -> Network {
    let edges = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e);
    Network::from_edges(n, edges.collect::<Vec<_>>()).expect("distinct pairs")
}

fn check_brute_force_size(n: usize) -> Result<Vec<(usize, usize)>> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    Ok(all_pairs(n))
}

/// Every equilibrium edge set on `n <= 6` labelled individuals.
pub fn brute_force_equilibria(n: usize, params: &ModelParams) -> Result<Vec<Network>> {
    let pairs = check_brute_force_size(n)?;
    let found: Vec<Option<Network>> = (0..1u64 << pairs.len())
        .into_par_iter()
        .map(|mask| {
            let g = graph_from_mask(n, &pairs, mask);
            Ok(is_dfpne(&g, params)?.is_equilibrium.then_some(g))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Largest social welfare on `n <= 6` labelled individuals and every graph
/// attaining it within `TOL`.
pub fn brute_force_optimum(n: usize, params: &ModelParams) -> Result<(f64, Vec<Network>)> {
    let pairs = check_brute_force_size(n)?;
    let welfare: Vec<f64> = (0..1u64 << pairs.len())
        .into_par_iter()
        .map(|mask| social_welfare(&graph_from_mask(n, &pairs, mask), params))
        .collect::<Result<_>>()?;
    let best = welfare.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners = welfare
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= best - TOL)
        .map(|(mask, _)| graph_from_mask(n, &pairs, mask as u64))
        .collect();
    Ok((best, winners))
}
