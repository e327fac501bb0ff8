//! Independent oracles for expected utility: seeded Monte Carlo over
//! transfer rounds, and exact enumeration of informed transfers on the
//! radius-2 ball around an individual.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExogenousDistribution, ModelParams, Network, TransferModel};

/// Default cap on the radius-2 ball size for exact enumeration.
pub const DEFAULT_BALL_CAP: usize = 16;

/// Rounds per parallel work unit. Fixed so that results do not depend on
/// the number of worker threads.
const CHUNK: u64 = 4096;

/// Realised outcome of one transfer round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub utility: Vec<f64>,
    /// Total exogenous opportunities drawn.
    pub drawn: usize,
    /// Opportunities actually used (at most one per individual).
    pub consumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_utility: Vec<f64>,
    pub std_error: Vec<f64>,
    pub rounds: u64,
    pub seed: u64,
}

impl SimResult {
    pub fn welfare(&self) -> f64 {
        self.mean_utility.iter().sum()
    }
}

/// Precomputed adjacency and sampling tables for repeated rounds.
struct Sampler {
    adj: Vec<Vec<usize>>,
    cdf: Vec<Vec<f64>>,
    cost: Vec<f64>,
    model: TransferModel,
}

struct Scratch {
    x: Vec<usize>,
    received: Vec<usize>,
    needy: Vec<usize>,
}

impl Sampler {
    fn new(net: &Network, dists: &ExogenousDistribution, gamma: f64, model: TransferModel) -> Result<Self> {
        if dists.len() != net.n() {
            return Err(Error::Precondition(format!(
                "distribution has {} rows for {} individuals",
                dists.len(),
                net.n()
            )));
        }
        let adj: Vec<Vec<usize>> = (0..net.n()).map(|i| net.neighbors(i).collect()).collect();
        let cdf = dists
            .rows()
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.masses()
                    .iter()
                    .map(|m| {
                        acc += m;
                        acc
                    })
                    .collect()
            })
            .collect();
        let cost = adj.iter().map(|a| gamma * a.len() as f64).collect();
        Ok(Sampler { adj, cdf, cost, model })
    }

    fn scratch(&self) -> Scratch {
        let n = self.adj.len();
        Scratch { x: vec![0; n], received: vec![0; n], needy: Vec::new() }
    }

    fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }

    /// Runs one round, leaving draws and receipts in `s`.
    fn round<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Scratch) {
        for (x, cdf) in s.x.iter_mut().zip(&self.cdf) {
            *x = Self::draw(cdf, rng);
        }
        s.received.iter_mut().for_each(|r| *r = 0);
        for (i, nbrs) in self.adj.iter().enumerate() {
            let surplus = s.x[i].saturating_sub(1);
            if surplus == 0 || nbrs.is_empty() {
                continue;
            }
            let pool: &[usize] = match self.model {
                TransferModel::Uninformed => nbrs,
                TransferModel::Informed => {
                    s.needy.clear();
                    s.needy.extend(nbrs.iter().copied().filter(|&j| s.x[j] == 0));
                    &s.needy
                }
            };
            let k = surplus.min(pool.len());
            if k == 0 {
                continue;
            }
            if k == 1 {
                s.received[pool[rng.gen_range(0..pool.len())]] += 1;
            } else {
                for idx in index::sample(rng, pool.len(), k) {
                    s.received[pool[idx]] += 1;
                }
            }
        }
    }

    fn used(&self, s: &Scratch, i: usize) -> usize {
        (s.x[i] + s.received[i]).min(1)
    }
}

/// Draws one round of exogenous opportunities and transfers.
///
/// Each individual with surplus `s = X - 1 > 0` hands opportunities to
/// `min(s, pool)` distinct neighbours drawn uniformly from the pool: all
/// neighbours (uninformed) or neighbours whose own draw was zero (informed).
pub fn sample_round<R: Rng + ?Sized>(
    net: &Network,
    dists: &ExogenousDistribution,
    gamma: f64,
    model: TransferModel,
    rng: &mut R,
) -> Result<RoundOutcome> {
    let sampler = Sampler::new(net, dists, gamma, model)?;
    let mut s = sampler.scratch();
    sampler.round(rng, &mut s);
    let utility = (0..net.n()).map(|i| sampler.used(&s, i) as f64 - sampler.cost[i]).collect();
    let consumed = (0..net.n()).map(|i| sampler.used(&s, i)).sum();
    Ok(RoundOutcome { utility, drawn: s.x.iter().sum(), consumed })
}

/// RNG for round `round` of a run seeded with `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Monte Carlo estimate of expected utilities.
///
/// Each block of rounds draws from its own ChaCha stream, and blocks are
/// reduced in index order, so output is bit-identical for a given seed
/// regardless of thread count.
pub fn estimate_utilities(
    net: &Network,
    dists: &ExogenousDistribution,
    gamma: f64,
    model: TransferModel,
    rounds: u64,
    seed: u64,
) -> Result<SimResult> {
    if rounds == 0 {
        return Err(Error::Precondition("rounds must be at least 1".into()));
    }
    let sampler = Sampler::new(net, dists, gamma, model)?;
    let n = net.n();
    let chunks = rounds.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = round_rng(seed, c);
            let mut s = sampler.scratch();
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            let len = CHUNK.min(rounds - c * CHUNK);
            for _ in 0..len {
                sampler.round(&mut rng, &mut s);
                for i in 0..n {
                    let y = sampler.used(&s, i) as f64 - sampler.cost[i];
                    sum[i] += y;
                    sq[i] += y * y;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (s, q) in &partials {
        for i in 0..n {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let r = rounds as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let std_error = (0..n)
        .map(|i| {
            if rounds < 2 {
                return 0.0;
            }
            let var = ((sq[i] - sum[i] * mean[i]) / (r - 1.0)).max(0.0);
            (var / r).sqrt()
        })
        .collect();
    Ok(SimResult { mean_utility: mean, std_error, rounds, seed })
}

/// [`estimate_utilities`] with the base three-point law.
pub fn estimate_utilities_params(net: &Network, params: &ModelParams, rounds: u64, seed: u64) -> Result<SimResult> {
    let dists = crate::model::base_distribution(params, net.n())?;
    estimate_utilities(net, &dists, params.gamma, params.model, rounds, seed)
}

/// Exact informed-model utility of `i` with the default ball cap.
pub fn exact_utility_ipng(net: &Network, params: &ModelParams, i: usize) -> Result<f64> {
    exact_utility_ipng_with_cap(net, params, i, DEFAULT_BALL_CAP)
}

/// Exact informed-model utility of `i` by enumerating exogenous draws on
/// the radius-2 ball.
///
/// Given `X_i = 0`, neighbour `j` reaches `i` with probability
/// `1{X_j = 2} / needy_j`, where `needy_j` counts neighbours of `j` with a
/// zero draw (including `i`), independently across `j` once all draws are
/// fixed. Second-shell individuals only affect `needy_j`, so a binary state
/// (zero / nonzero) suffices for them.
pub fn exact_utility_ipng_with_cap(net: &Network, params: &ModelParams, i: usize, cap: usize) -> Result<f64> {
    if i >= net.n() {
        return Err(Error::NodeOutOfRange { node: i, n: net.n() });
    }
    let ball = net.ball2(i);
    if ball.len() > cap {
        return Err(Error::BallTooLarge { node: i, size: ball.len(), cap });
    }
    let first: Vec<usize> = net.neighbors(i).collect();
    let second: Vec<usize> = ball.iter().copied().filter(|&k| k != i && !net.has_edge(i, k)).collect();

    // local index: first shell 0..f, second shell f..f+s
    let f = first.len();
    let local = |v: usize| -> Option<usize> {
        first.iter().position(|&x| x == v).or_else(|| second.iter().position(|&x| x == v).map(|k| f + k))
    };
    // neighbours of each first-shell node, excluding i, as local indices
    let nbr_local: Vec<Vec<usize>> = first
        .iter()
        .map(|&j| net.neighbors(j).filter(|&k| k != i).map(|k| local(k).expect("ball closed")).collect())
        .collect();

    let q = params.q;
    let one = params.one_prob();
    let p = params.p;
    let total = f + second.len();
    // states: first shell 0 = zero, 1 = one, 2 = two; second shell 0 = zero, 1 = nonzero
    let radix: Vec<usize> = (0..total).map(|k| if k < f { 3 } else { 2 }).collect();
    let mut state = vec![0usize; total];
    let mut miss = 0.0;
    loop {
        let mut weight = 1.0;
        for (k, &st) in state.iter().enumerate() {
            weight *= match (k < f, st) {
                (_, 0) => q,
                (true, 1) => one,
                (true, _) => p,
                (false, _) => 1.0 - q,
            };
        }
        if weight > 0.0 {
            let mut none = 1.0;
            for (a, nbrs) in nbr_local.iter().enumerate() {
                if state[a] == 2 {
                    let needy = 1 + nbrs.iter().filter(|&&k| state[k] == 0).count();
                    none *= 1.0 - 1.0 / needy as f64;
                }
            }
            miss += weight * none;
        }
        // advance the mixed-radix counter
        let mut k = 0;
        while k < total {
            state[k] += 1;
            if state[k] < radix[k] {
                break;
            }
            state[k] = 0;
            k += 1;
        }
        if k == total {
            break;
        }
    }
    Ok(1.0 - q * miss - params.gamma * f as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{utility_ipng_girth5, utility_png};
    use crate::model::Pmf;
    use approx::assert_abs_diff_eq;

    fn cycle(n: usize) -> Network {
        Network::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    fn k3() -> Network {
        Network::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn forced_single_draws_mean_no_transfers() {
        let g = cycle(5);
        let dists = ExogenousDistribution::uniform(5, Pmf::new(vec![0.0, 1.0, 0.0]).unwrap());
        let out = sample_round(&g, &dists, 0.1, TransferModel::Uninformed, &mut round_rng(1, 0)).unwrap();
        assert!(out.utility.iter().all(|&u| (u - 0.8).abs() < 1e-15));
    }

    #[test]
    fn matched_pair_transfer_reaches_partner() {
        let g = Network::from_edges(2, [(0, 1)]).unwrap();
        let dists = ExogenousDistribution::new(vec![Pmf::point(2), Pmf::point(0)]);
        for model in [TransferModel::Uninformed, TransferModel::Informed] {
            let out = sample_round(&g, &dists, 0.05, model, &mut round_rng(3, 0)).unwrap();
            assert_abs_diff_eq!(out.utility[1], 0.95, epsilon = 1e-15);
        }
    }

    #[test]
    fn informed_path_targets_only_needy() {
        let g = Network::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let dists = ExogenousDistribution::new(vec![Pmf::point(1), Pmf::point(2), Pmf::point(0)]);
        for r in 0..50 {
            let out = sample_round(&g, &dists, 0.0, TransferModel::Informed, &mut round_rng(9, r)).unwrap();
            assert_eq!(out.utility[2], 1.0);
        }
    }

    #[test]
    fn conservation() {
        let g = Network::from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (1, 4)]).unwrap();
        let dists = ExogenousDistribution::uniform(6, Pmf::new(vec![0.4, 0.1, 0.2, 0.3]).unwrap());
        for model in [TransferModel::Uninformed, TransferModel::Informed] {
            for r in 0..500 {
                let out = sample_round(&g, &dists, 0.0, model, &mut round_rng(5, r)).unwrap();
                assert!(out.consumed <= out.drawn);
            }
        }
    }

    #[test]
    fn empty_graph_mean() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        let res = estimate_utilities_params(&Network::empty(3), &params, 20_000, 11).unwrap();
        for (m, se) in res.mean_utility.iter().zip(&res.std_error) {
            assert!((m - 0.5).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn k3_matches_closed_form() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        let res = estimate_utilities_params(&k3(), &params, 100_000, 42).unwrap();
        for (m, se) in res.mean_utility.iter().zip(&res.std_error) {
            assert!((m - 0.63875).abs() <= 4.0 * se, "{m} vs 0.63875 (se {se})");
        }
    }

    #[test]
    fn informed_cycle_matches_product_form() {
        let params = ModelParams::informed(0.5, 0.3, 0.0);
        let res = estimate_utilities_params(&cycle(5), &params, 100_000, 42).unwrap();
        for (m, se) in res.mean_utility.iter().zip(&res.std_error) {
            assert!((m - 0.6996875).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn estimates_are_deterministic() {
        let params = ModelParams::new(0.45, 0.35, 0.01);
        let a = estimate_utilities_params(&cycle(6), &params, 10_000, 7).unwrap();
        let b = estimate_utilities_params(&cycle(6), &params, 10_000, 7).unwrap();
        assert_eq!(a, b);
        let c = estimate_utilities_params(&cycle(6), &params, 10_000, 8).unwrap();
        assert_ne!(a.mean_utility, c.mean_utility);
    }

    #[test]
    fn zero_rounds_rejected() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        assert!(estimate_utilities_params(&k3(), &params, 0, 1).is_err());
    }

    #[test]
    fn exact_matched_pair() {
        let params = ModelParams::informed(0.5, 0.3, 0.04);
        let g = Network::from_edges(2, [(0, 1)]).unwrap();
        assert_abs_diff_eq!(exact_utility_ipng(&g, &params, 0).unwrap(), 1.0 - 0.5 * 0.7 - 0.04, epsilon = 1e-15);
    }

    #[test]
    fn exact_k3_beats_uninformed() {
        let params = ModelParams::informed(0.5, 0.3, 0.0);
        let u = exact_utility_ipng(&k3(), &params, 0).unwrap();
        // hand enumeration over the two other nodes' draws
        let (q, one, p) = (0.5, 0.2, 0.3);
        let mut miss = 0.0;
        let states = [(0, q), (1, one), (2, p)];
        for &(a, wa) in &states {
            for &(b, wb) in &states {
                let mut none = 1.0;
                if a == 2 {
                    none *= 1.0 - 1.0 / (1 + (b == 0) as usize) as f64;
                }
                if b == 2 {
                    none *= 1.0 - 1.0 / (1 + (a == 0) as usize) as f64;
                }
                miss += wa * wb * none;
            }
        }
        assert_abs_diff_eq!(u, 1.0 - q * miss, epsilon = 1e-15);
        assert!(u > utility_png(&k3(), &params, 0));
    }

    #[test]
    fn exact_matches_product_form_on_cycles() {
        let params = ModelParams::informed(0.45, 0.3, 0.02);
        for n in 5..9 {
            let g = cycle(n);
            assert_abs_diff_eq!(
                exact_utility_ipng(&g, &params, 0).unwrap(),
                utility_ipng_girth5(&g, &params, 0).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ball_cap_enforced() {
        let star = Network::from_edges(20, (1..20).map(|k| (0, k))).unwrap();
        let params = ModelParams::informed(0.5, 0.3, 0.0);
        assert!(matches!(
            exact_utility_ipng(&star, &params, 1),
            Err(Error::BallTooLarge { size: 20, cap: 16, .. })
        ));
    }
}
