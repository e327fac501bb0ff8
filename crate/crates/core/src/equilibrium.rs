//! Defection-free pairwise Nash equilibria: deviation gains, the checker,
//! best-response dynamics and regular-equilibrium intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::utility;
use crate::construct::circulant;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Network, TransferModel, TOL};

/// Largest degree for which exhaustive drop-subset search is attempted.
const SUBSET_DEGREE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Move {
    /// `by` removes its edge to `other`.
    Sever { by: usize, other: usize },
    /// `i` and `j` connect while each drops some of its own edges.
    PairAdd { i: usize, j: usize, drop_i: Vec<usize>, drop_j: Vec<usize> },
}

/// A move with the utility change of each party. For a sever, `gain_i`
/// belongs to the severing individual and `gain_j` to the other endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    #[serde(flatten)]
    pub kind: Move,
    pub gain_i: f64,
    pub gain_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    pub witness: Option<Deviation>,
    pub checked_moves: usize,
}

/// Utility change for each endpoint when the edge `(i, j)` is severed.
pub fn sever_gain(net: &Network, params: &ModelParams, i: usize, j: usize) -> Result<(f64, f64)> {
    if !net.has_edge(i, j) {
        return Err(Error::EdgeAbsent(i.min(j), i.max(j)));
    }
    match params.model {
        TransferModel::Uninformed => Ok((sever_gain_png(net, params, i, j), sever_gain_png(net, params, j, i))),
        TransferModel::Informed => {
            let mut cut = net.clone();
            cut.remove_edge(i, j)?;
            let gi = utility(&cut, params, i)? - utility(net, params, i)?;
            let gj = utility(&cut, params, j)? - utility(net, params, j)?;
            Ok((gi, gj))
        }
    }
}

/// `gamma - (q p / d_j) prod_{l in N_i \ j} (1 - p / d_l)`.
fn sever_gain_png(net: &Network, params: &ModelParams, i: usize, j: usize) -> f64 {
    let rest: f64 = net.neighbors(i).filter(|&l| l != j).map(|l| 1.0 - params.p / net.degree(l) as f64).product();
    params.gamma - params.qp() / net.degree(j) as f64 * rest
}

/// Best gain for `i` from linking to `j` while dropping some of its own
/// edges, with the drop set achieving it.
pub fn best_add_gain(net: &Network, params: &ModelParams, i: usize, j: usize) -> Result<(f64, Vec<usize>)> {
    match params.model {
        TransferModel::Uninformed => Ok(best_add_gain_greedy(net, params, i, j)),
        TransferModel::Informed => best_add_gain_exhaustive(net, params, i, j),
    }
}

/// Greedy reduction: the best drop set of size `m` removes the `m`
/// highest-degree neighbours (largest factors `1 - p / d_l`), ties broken by
/// index.
fn best_add_gain_greedy(net: &Network, params: &ModelParams, i: usize, j: usize) -> (f64, Vec<usize>) {
    let (q, p, gamma) = (params.q, params.p, params.gamma);
    let mut nbrs: Vec<usize> = net.neighbors(i).collect();
    nbrs.sort_by(|&a, &b| net.degree(b).cmp(&net.degree(a)).then(a.cmp(&b)));
    let factor = |l: usize| 1.0 - p / net.degree(l) as f64;
    let full: f64 = nbrs.iter().map(|&l| factor(l)).product();
    let new = 1.0 - p / (net.degree(j) + 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0);
    for m in 0..=nbrs.len() {
        let kept: f64 = nbrs[m..].iter().map(|&l| factor(l)).product();
        let gain = q * (full - new * kept) - gamma * (1.0 - m as f64);
        if gain > best.0 {
            best = (gain, m);
        }
    }
    let mut drops = nbrs[..best.1].to_vec();
    drops.sort_unstable();
    (best.0, drops)
}

/// Exhaustive search over drop subsets with exact utilities.
fn best_add_gain_exhaustive(net: &Network, params: &ModelParams, i: usize, j: usize) -> Result<(f64, Vec<usize>)> {
    let nbrs: Vec<usize> = net.neighbors(i).collect();
    if nbrs.len() > SUBSET_DEGREE_CAP {
        return Err(Error::TooLarge { n: nbrs.len(), limit: SUBSET_DEGREE_CAP });
    }
    let base = utility(net, params, i)?;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 0u32..(1 << nbrs.len()) {
        let drops: Vec<usize> = subset(&nbrs, mask);
        let mut g = net.clone();
        for &l in &drops {
            g.remove_edge(i, l)?;
        }
        g.add_edge(i, j)?;
        let gain = utility(&g, params, i)? - base;
        if gain > best.0 {
            best = (gain, drops);
        }
    }
    Ok(best)
}

fn subset(items: &[usize], mask: u32) -> Vec<usize> {
    items.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &x)| x).collect()
}

/// The pair-add deviation for the non-edge `(i, j)` when both endpoints
/// strictly gain under their own best drop sets.
pub fn best_pair_add(net: &Network, params: &ModelParams, i: usize, j: usize) -> Result<Option<Deviation>> {
    if net.has_edge(i, j) {
        return Err(Error::EdgePresent(i.min(j), i.max(j)));
    }
    if i == j {
        return Err(Error::SelfLoop(i));
    }
    let (gain_i, drop_i) = best_add_gain(net, params, i, j)?;
    if gain_i <= TOL {
        return Ok(None);
    }
    let (gain_j, drop_j) = best_add_gain(net, params, j, i)?;
    if gain_j <= TOL {
        return Ok(None);
    }
    Ok(Some(Deviation { kind: Move::PairAdd { i, j, drop_i, drop_j }, gain_i, gain_j }))
}

/// Profitable severances of edge `(i, j)`, `i` first.
fn sever_moves(net: &Network, params: &ModelParams, i: usize, j: usize) -> Result<Vec<Deviation>> {
    let (gi, gj) = sever_gain(net, params, i, j)?;
    let mut out = Vec::new();
    if gi > TOL {
        out.push(Deviation { kind: Move::Sever { by: i, other: j }, gain_i: gi, gain_j: gj });
    }
    if gj > TOL {
        out.push(Deviation { kind: Move::Sever { by: j, other: i }, gain_i: gj, gain_j: gi });
    }
    Ok(out)
}

/// Checks every edge (canonical order) and then every non-edge; the first
/// profitable move found is the witness.
pub fn is_dfpne(net: &Network, params: &ModelParams) -> Result<EquilibriumReport> {
    let mut checked = 0;
    for (i, j) in net.edges() {
        checked += 1;
        if let Some(dev) = sever_moves(net, params, i, j)?.into_iter().next() {
            return Ok(EquilibriumReport { is_equilibrium: false, witness: Some(dev), checked_moves: checked });
        }
    }
    for (i, j) in net.non_edges() {
        checked += 1;
        if let Some(dev) = best_pair_add(net, params, i, j)? {
            return Ok(EquilibriumReport { is_equilibrium: false, witness: Some(dev), checked_moves: checked });
        }
    }
    Ok(EquilibriumReport { is_equilibrium: true, witness: None, checked_moves: checked })
}

/// All profitable moves, in checker order.
pub fn profitable_moves(net: &Network, params: &ModelParams) -> Result<Vec<Deviation>> {
    let edges: Vec<(usize, usize)> = net.edges().collect();
    let non_edges: Vec<(usize, usize)> = net.non_edges().collect();
    let severs: Vec<Vec<Deviation>> =
        edges.par_iter().map(|&(i, j)| sever_moves(net, params, i, j)).collect::<Result<_>>()?;
    let adds: Vec<Option<Deviation>> =
        non_edges.par_iter().map(|&(i, j)| best_pair_add(net, params, i, j)).collect::<Result<_>>()?;
    Ok(severs.into_iter().flatten().chain(adds.into_iter().flatten()).collect())
}

/// Applies a move to a copy of `net`.
pub fn apply(net: &Network, mv: &Move) -> Result<Network> {
    let mut g = net.clone();
    match mv {
        Move::Sever { by, other } => g.remove_edge(*by, *other)?,
        Move::PairAdd { i, j, drop_i, drop_j } => {
            for &l in drop_i {
                g.remove_edge(*i, l)?;
            }
            for &l in drop_j {
                g.remove_edge(*j, l)?;
            }
            g.add_edge(*i, *j)?;
        }
    }
    Ok(g)
}

/// Confirms that `i` has a profitable multi-edge severance exactly when it
/// has a profitable single-edge one.
pub fn multi_sever_equivalence_check(net: &Network, params: &ModelParams, i: usize) -> Result<bool> {
    let nbrs: Vec<usize> = net.neighbors(i).collect();
    if nbrs.len() > SUBSET_DEGREE_CAP {
        return Err(Error::TooLarge { n: nbrs.len(), limit: SUBSET_DEGREE_CAP });
    }
    let base = utility(net, params, i)?;
    let mut single = false;
    let mut multi = false;
    for mask in 1u32..(1 << nbrs.len()) {
        let mut g = net.clone();
        for &l in &subset(&nbrs, mask) {
            g.remove_edge(i, l)?;
        }
        if utility(&g, params, i)? - base > TOL {
            if mask.count_ones() == 1 {
                single = true;
            } else {
                multi = true;
            }
        }
    }
    Ok(!multi || single)
}

/// Degrees `d` for which a `d`-regular network is an equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularEquilibria {
    pub degrees: Vec<usize>,
    pub d_min: usize,
    pub d_max: usize,
}

/// `h(d) = (p / q)(1 - (1 - q)^d) / d`, the informed per-neighbour transfer
/// probability.
fn informed_h(d: usize, q: f64, p: f64) -> f64 {
    p / q * (1.0 - (1.0 - q).powi(d as i32)) / d as f64
}

/// Range of `gamma` for which a `d`-regular network is an equilibrium.
/// For `d = 0` the range is `[qp, inf)`.
pub fn regular_gamma_interval(d: usize, params: &ModelParams) -> (f64, f64) {
    let (q, p) = (params.q, params.p);
    if d == 0 {
        return (params.qp(), f64::INFINITY);
    }
    let df = d as f64;
    match params.model {
        TransferModel::Uninformed => {
            let lo = (1.0 - p / df).powi(d as i32) / (df + 1.0);
            let hi = (1.0 - p / df).powi(d as i32 - 1) / df;
            (params.qp() * lo, params.qp() * hi)
        }
        TransferModel::Informed => {
            let miss = 1.0 - informed_h(d, q, p);
            let lo = (1.0 - (1.0 - q).powi(d as i32 + 1)) / (df + 1.0) * miss.powi(d as i32);
            let hi = (1.0 - (1.0 - q).powi(d as i32)) / df * miss.powi(d as i32 - 1);
            (p * lo, p * hi)
        }
    }
}

/// Largest degree worth scanning: every interval with `d` beyond this lies
/// strictly below `gamma`.
fn degree_scan_limit(params: &ModelParams) -> usize {
    let scale = match params.model {
        TransferModel::Uninformed => params.qp(),
        TransferModel::Informed => params.p,
    };
    (scale / params.gamma).floor() as usize + 1
}

pub fn regular_equilibrium_degrees(params: &ModelParams) -> Result<RegularEquilibria> {
    params.validate()?;
    if params.gamma <= 0.0 {
        return Err(Error::Precondition("regular equilibrium intervals need gamma > 0".into()));
    }
    let g = params.gamma;
    let degrees: Vec<usize> = (0..=degree_scan_limit(params))
        .filter(|&d| {
            let (lo, hi) = regular_gamma_interval(d, params);
            g >= lo - TOL && g <= hi + TOL
        })
        .collect();
    match (degrees.first(), degrees.last()) {
        (Some(&d_min), Some(&d_max)) => Ok(RegularEquilibria { d_min, d_max, degrees }),
        _ => Err(Error::InvariantBreach(format!("no regular equilibrium at gamma = {g}"))),
    }
}

/// Largest `d` whose severance condition `gamma <= upper_d` holds; requires
/// `0 < gamma <= qp`.
pub fn largest_d_dregval(params: &ModelParams) -> Result<usize> {
    params.validate()?;
    if params.gamma <= 0.0 || params.gamma > params.qp() + TOL {
        return Err(Error::Precondition(format!(
            "gamma = {} must lie in (0, qp = {}]",
            params.gamma,
            params.qp()
        )));
    }
    (1..=degree_scan_limit(params))
        .filter(|&d| params.gamma <= regular_gamma_interval(d, params).1 + TOL)
        .max()
        .ok_or_else(|| Error::InvariantBreach("no degree satisfies the severance condition".into()))
}

/// Equilibrium on `n` individuals built around a `d`-regular graph. For odd
/// `n`, a circulant on `n - 1` individuals is extended by rewiring
/// `floor(d / 2)` or `ceil(d / 2)` disjoint edges to the last individual,
/// and whichever variant passes the checker is returned.
pub fn near_regular_odd_construction(n: usize, d: usize, params: &ModelParams) -> Result<Network> {
    if n.is_multiple_of(2) {
        let g = circulant(n, d)?;
        return if is_dfpne(&g, params)?.is_equilibrium {
            Ok(g)
        } else {
            Err(Error::SearchFailed(format!("{d}-regular circulant on {n} is not an equilibrium")))
        };
    }
    let base = circulant(n - 1, d)?;
    let v = n - 1;
    for k in [d / 2, d.div_ceil(2)] {
        let mut picked: Vec<(usize, usize)> = Vec::new();
        let mut used = vec![false; n];
        for (a, b) in base.edges() {
            if picked.len() == k {
                break;
            }
            if !used[a] && !used[b] {
                used[a] = true;
                used[b] = true;
                picked.push((a, b));
            }
        }
        if picked.len() < k {
            continue;
        }
        let mut g = Network::from_edges(n, base.edges().collect::<Vec<_>>())?;
        for &(a, b) in &picked {
            g.remove_edge(a, b)?;
            g.add_edge(a, v)?;
            g.add_edge(b, v)?;
        }
        if is_dfpne(&g, params)?.is_equilibrium {
            return Ok(g);
        }
    }
    Err(Error::SearchFailed(format!("neither rewiring of the {d}-regular circulant on {} is an equilibrium", n - 1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsResult {
    pub network: Network,
    pub trace: Vec<Deviation>,
    pub converged: bool,
}

/// Default move cap for [`best_response_dynamics`].
pub fn default_max_moves(n: usize) -> usize {
    10 * n * n
}

/// From the empty graph, applies a uniformly random profitable move until
/// none remains or `max_moves` moves have been made.
pub fn best_response_dynamics(n: usize, params: &ModelParams, seed: u64, max_moves: usize) -> Result<DynamicsResult> {
    if max_moves == 0 {
        return Err(Error::Precondition("max_moves must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::empty(n);
    let mut trace = Vec::new();
    loop {
        let moves = profitable_moves(&net, params)?;
        if moves.is_empty() {
            return Ok(DynamicsResult { network: net, trace, converged: true });
        }
        if trace.len() == max_moves {
            log::info!("dynamics stopped after {max_moves} moves without converging");
            return Ok(DynamicsResult { network: net, trace, converged: false });
        }
        let pick = moves[rng.gen_range(0..moves.len())].clone();
        net = apply(&net, &pick.kind)?;
        trace.push(pick);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{complete, matching};
    use approx::assert_abs_diff_eq;

    fn k3() -> Network {
        complete(3)
    }

    #[test]
    fn sever_gain_examples() {
        let pair = matching(2);
        let p0 = ModelParams::new(0.5, 0.3, 0.0);
        let (a, b) = sever_gain(&pair, &p0, 0, 1).unwrap();
        assert_abs_diff_eq!(a, -0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -0.15, epsilon = 1e-15);
        let costly = ModelParams::new(0.5, 0.3, 0.2);
        let (a, b) = sever_gain(&pair, &costly, 0, 1).unwrap();
        assert!(a > 0.0 && b > 0.0);
        let p7 = ModelParams::new(0.5, 0.3, 0.07);
        let (a, _) = sever_gain(&k3(), &p7, 0, 1).unwrap();
        assert_abs_diff_eq!(a, 0.00625, epsilon = 1e-15);
        assert!(!is_dfpne(&k3(), &p7).unwrap().is_equilibrium);
        assert!(matches!(sever_gain(&Network::empty(2), &p0, 0, 1), Err(Error::EdgeAbsent(0, 1))));
    }

    #[test]
    fn sever_gain_matches_utility_difference() {
        let g = Network::from_edges(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (1, 5)]).unwrap();
        let params = ModelParams::new(0.45, 0.35, 0.03);
        for (i, j) in g.edges() {
            let (gi, gj) = sever_gain(&g, &params, i, j).unwrap();
            let mut cut = g.clone();
            cut.remove_edge(i, j).unwrap();
            assert_abs_diff_eq!(gi, utility(&cut, &params, i).unwrap() - utility(&g, &params, i).unwrap(), epsilon = 1e-14);
            assert_abs_diff_eq!(gj, utility(&cut, &params, j).unwrap() - utility(&g, &params, j).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn isolated_pair_adds() {
        let params = ModelParams::new(0.5, 0.3, 0.05);
        let dev = best_pair_add(&Network::empty(2), &params, 0, 1).unwrap().unwrap();
        assert_abs_diff_eq!(dev.gain_i, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(dev.gain_j, 0.1, epsilon = 1e-15);
        assert_eq!(dev.kind, Move::PairAdd { i: 0, j: 1, drop_i: vec![], drop_j: vec![] });
    }

    #[test]
    fn frictionless_checker_examples() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        for n in 2..7 {
            assert!(is_dfpne(&complete(n), &params).unwrap().is_equilibrium);
        }
        let report = is_dfpne(&matching(4), &params).unwrap();
        assert!(!report.is_equilibrium);
        assert!(matches!(report.witness.unwrap().kind, Move::PairAdd { i: 0, j: 2, .. }));
        let costly = ModelParams::new(0.5, 0.3, 0.2);
        assert!(is_dfpne(&Network::empty(5), &costly).unwrap().is_equilibrium);
    }

    #[test]
    fn regular_degrees_example() {
        let params = ModelParams::new(0.5, 0.5, 0.07);
        let set = regular_equilibrium_degrees(&params).unwrap();
        assert_eq!(set.degrees, vec![1, 2]);
        assert_eq!(largest_d_dregval(&params).unwrap(), 2);
        let trivial = ModelParams::new(0.5, 0.5, 0.3);
        assert_eq!(regular_equilibrium_degrees(&trivial).unwrap().degrees, vec![0]);
        let boundary = ModelParams::new(0.5, 0.5, 0.25);
        assert_eq!(largest_d_dregval(&boundary).unwrap(), 1);
    }

    #[test]
    fn small_gamma_degree_asymptotics() {
        let params = ModelParams::new(0.5, 0.3, 1e-4);
        let d = largest_d_dregval(&params).unwrap() as f64;
        let approx = params.qp() * (-params.p).exp() / params.gamma;
        assert!((d / approx - 1.0).abs() < 0.1);
    }

    #[test]
    fn odd_construction() {
        let params = ModelParams::new(0.5, 0.5, 0.07);
        let g = near_regular_odd_construction(7, 2, &params).unwrap();
        assert!(is_dfpne(&g, &params).unwrap().is_equilibrium);
        assert_eq!(g.n(), 7);
    }

    #[test]
    fn dynamics_frictionless_reaches_complete() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        let res = best_response_dynamics(6, &params, 1, default_max_moves(6)).unwrap();
        assert!(res.converged);
        assert_eq!(res.network, complete(6));
    }

    #[test]
    fn dynamics_costly_stays_empty() {
        let params = ModelParams::new(0.5, 0.3, 0.2);
        let res = best_response_dynamics(6, &params, 1, 10).unwrap();
        assert!(res.converged && res.trace.is_empty());
    }

    #[test]
    fn multi_sever_k3() {
        let params = ModelParams::new(0.5, 0.3, 0.07);
        for i in 0..3 {
            assert!(multi_sever_equivalence_check(&k3(), &params, i).unwrap());
        }
    }

    #[test]
    fn informed_checker_uses_exact_utilities() {
        let params = ModelParams::informed(0.5, 0.3, 0.0);
        assert!(is_dfpne(&complete(4), &params).unwrap().is_equilibrium);
        assert!(!is_dfpne(&matching(4), &params).unwrap().is_equilibrium);
    }
}
