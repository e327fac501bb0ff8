//! Deterministic constructors for the special graphs used in the analysis,
//! each followed by an audit of its defining property.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Network;

/// Restart cap for the randomized girth-5 search.
pub const GIRTH_RETRY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionSpec {
    Empty { n: usize },
    /// Perfect matching for even `n`, maximal matching otherwise.
    Matching { n: usize },
    Complete { n: usize },
    /// Circulant `d`-regular graph.
    Regular { n: usize, d: usize },
    Girth5Regular {
        n: usize,
        d: usize,
        #[serde(default)]
        seed: u64,
    },
    /// A `d1`-regular part on `floor(lambda * n)` individuals (one fewer if
    /// parity forbids it) and a `d2`-regular part on the rest.
    TwoComponent { n: usize, d1: usize, d2: usize, lambda: f64 },
    Path { n: usize },
    Cycle { n: usize },
    /// Centre 0 joined to every other individual.
    Star { n: usize },
}

/// Builds and audits the network described by `spec`.
pub fn build(spec: &ConstructionSpec) -> Result<Network> {
    let net = match *spec {
        ConstructionSpec::Empty { n } => Network::empty(n),
        ConstructionSpec::Matching { n } => matching(n),
        ConstructionSpec::Complete { n } => complete(n),
        ConstructionSpec::Regular { n, d } => circulant(n, d)?,
        ConstructionSpec::Girth5Regular { n, d, seed } => girth5_regular(n, d, seed)?,
        ConstructionSpec::TwoComponent { n, d1, d2, lambda } => two_component(n, d1, d2, lambda)?.0,
        ConstructionSpec::Path { n } => path(n),
        ConstructionSpec::Cycle { n } => cycle(n)?,
        ConstructionSpec::Star { n } => star(n)?,
    };
    audit(spec, &net)?;
    Ok(net)
}

fn audit(spec: &ConstructionSpec, net: &Network) -> Result<()> {
    let fail = |what: String| Err(Error::InvariantBreach(format!("construction audit: {what}")));
    let degrees = net.degrees();
    match *spec {
        ConstructionSpec::Empty { .. } if net.edge_count() != 0 => fail("empty graph has edges".into()),
        ConstructionSpec::Matching { n } => {
            let ones = degrees.iter().filter(|&&d| d == 1).count();
            if ones != n - n % 2 || degrees.iter().any(|&d| d > 1) {
                fail("matching is not maximal".into())
            } else {
                Ok(())
            }
        }
        ConstructionSpec::Complete { n } if net.edge_count() != n * n.saturating_sub(1) / 2 => {
            fail("complete graph is missing edges".into())
        }
        ConstructionSpec::Regular { d, .. } if degrees.iter().any(|&x| x != d) => {
            fail(format!("circulant is not {d}-regular"))
        }
        ConstructionSpec::Girth5Regular { d, .. } => {
            if degrees.iter().any(|&x| x != d) {
                fail(format!("graph is not {d}-regular"))
            } else if girth(net).is_some_and(|g| g < 5) {
                fail("girth below 5".into())
            } else {
                Ok(())
            }
        }
        ConstructionSpec::TwoComponent { n, d1, d2, lambda } => {
            let size1 = two_component_split(n, d1, lambda);
            if degrees[..size1].iter().any(|&x| x != d1) || degrees[size1..].iter().any(|&x| x != d2) {
                return fail("component degrees".into());
            }
            let crossing = net.edges().any(|(i, j)| i < size1 && j >= size1);
            if crossing {
                fail("edge between components".into())
            } else {
                Ok(())
            }
        }
        ConstructionSpec::Cycle { .. } if degrees.iter().any(|&x| x != 2) => fail("cycle is not 2-regular".into()),
        ConstructionSpec::Star { n } if degrees[0] != n - 1 => fail("star centre degree".into()),
        _ => Ok(()),
    }
}

pub fn matching(n: usize) -> Network {
    Network::from_edges(n, (0..n / 2).map(|k| (2 * k, 2 * k + 1))).expect("disjoint pairs")
}

pub fn complete(n: usize) -> Network {
    Network::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("simple")
}

pub fn path(n: usize) -> Network {
    Network::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("simple")
}

pub fn cycle(n: usize) -> Result<Network> {
    if n < 3 {
        return Err(Error::Infeasible(format!("cycle needs n >= 3 (got {n})")));
    }
    Network::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn star(n: usize) -> Result<Network> {
    if n == 0 {
        return Err(Error::Infeasible("star needs at least one individual".into()));
    }
    Network::from_edges(n, (1..n).map(|k| (0, k)))
}

/// Circulant `d`-regular graph: offsets `1..=d/2`, plus the antipodal chord
/// when `d` is odd.
pub fn circulant(n: usize, d: usize) -> Result<Network> {
    if d == 0 {
        return Ok(Network::empty(n));
    }
    if n <= d {
        return Err(Error::Infeasible(format!("regular graph needs n > d (n = {n}, d = {d})")));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::Infeasible(format!("regular graph needs n * d even (n = {n}, d = {d})")));
    }
    let mut net = Network::empty(n);
    for i in 0..n {
        for off in 1..=d / 2 {
            let j = (i + off) % n;
            if !net.has_edge(i, j) {
                net.add_edge(i, j)?;
            }
        }
        if d % 2 == 1 && i < n / 2 {
            net.add_edge(i, i + n / 2)?;
        }
    }
    Ok(net)
}

pub fn petersen() -> Network {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, i + 5));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    Network::from_edges(10, outer.chain(spokes).chain(inner)).expect("simple")
}

/// `d`-regular graph of girth at least 5.
pub fn girth5_regular(n: usize, d: usize, seed: u64) -> Result<Network> {
    match d {
        0 => return Ok(Network::empty(n)),
        1 if n.is_multiple_of(2) => return Ok(matching(n)),
        1 => return Err(Error::Infeasible(format!("1-regular graph needs even n (got {n})"))),
        2 if n >= 5 => return cycle(n),
        2 => return Err(Error::Infeasible(format!("2-regular girth-5 graph needs n >= 5 (got {n})"))),
        3 if n.is_multiple_of(10) => {
            let p = petersen();
            let edges: Vec<_> = (0..n / 10).flat_map(|c| p.edges().map(move |(i, j)| (10 * c + i, 10 * c + j))).collect();
            return Network::from_edges(n, edges);
        }
        _ => {}
    }
    if (n * d) % 2 == 1 {
        return Err(Error::Infeasible(format!("regular graph needs n * d even (n = {n}, d = {d})")));
    }
    // Moore bound for girth 5
    if n < d * d + 1 {
        return Err(Error::Infeasible(format!("girth-5 {d}-regular graph needs n >= {} (got {n})", d * d + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GIRTH_RETRY_CAP {
        if let Some(net) = greedy_girth5(n, d, &mut rng) {
            return Ok(net);
        }
    }
    Err(Error::GirthRetryExhausted { attempts: GIRTH_RETRY_CAP })
}

/// One randomized attempt: repeatedly join two deficient individuals at
/// distance at least 4, so no cycle shorter than 5 ever closes.
fn greedy_girth5<R: Rng>(n: usize, d: usize, rng: &mut R) -> Option<Network> {
    let mut net = Network::empty(n);
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        order.retain(|&v| net.degree(v) < d);
        if order.is_empty() {
            return Some(net);
        }
        order.shuffle(rng);
        let u = order[0];
        let near = within(&net, u, 3);
        let candidates: Vec<usize> = order[1..].iter().copied().filter(|&v| !near[v]).collect();
        let &v = candidates.choose(rng)?;
        net.add_edge(u, v).ok()?;
    }
}

/// Marks individuals within `radius` hops of `src`.
fn within(net: &Network, src: usize, radius: usize) -> Vec<bool> {
    let mut dist = vec![usize::MAX; net.n()];
    let mut seen = vec![false; net.n()];
    dist[src] = 0;
    seen[src] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for v in net.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Size of the `d1` part: `floor(lambda * n)`, lowered by one when a
/// `d1`-regular graph on that many individuals cannot exist.
pub fn two_component_split(n: usize, d1: usize, lambda: f64) -> usize {
    let mut size1 = ((lambda * n as f64) + 1e-9).floor() as usize;
    size1 = size1.min(n);
    if (size1 * d1) % 2 == 1 {
        size1 -= 1;
    }
    size1
}

/// Builds the two-part network, returning it with the size of the `d1` part
/// (individuals `0..size1`).
pub fn two_component(n: usize, d1: usize, d2: usize, lambda: f64) -> Result<(Network, usize)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Infeasible(format!("lambda = {lambda} must lie in [0, 1]")));
    }
    let size1 = two_component_split(n, d1, lambda);
    let size2 = n - size1;
    let part1 = if size1 == 0 { Network::empty(0) } else { circulant(size1, d1)? };
    let part2 = if size2 == 0 { Network::empty(0) } else { circulant(size2, d2)? };
    let edges = part1.edges().chain(part2.edges().map(|(i, j)| (i + size1, j + size1)));
    Ok((Network::from_edges(n, edges.collect::<Vec<_>>())?, size1))
}

/// Length of the shortest cycle, `None` for forests.
pub fn girth(net: &Network) -> Option<usize> {
    let n = net.n();
    let mut best: Option<usize> = None;
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        dist[root] = 0;
        parent[root] = usize::MAX;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            if best.is_some_and(|b| 2 * dist[u] + 1 >= b) {
                break;
            }
            for v in net.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

/// G(n, prob) random graph.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, prob: f64, rng: &mut R) -> Network {
    let mut net = Network::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < prob {
                net.add_edge(i, j).expect("fresh pair");
            }
        }
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_six() {
        let g = build(&ConstructionSpec::Matching { n: 6 }).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.degrees().iter().all(|&d| d == 1));
        let odd = build(&ConstructionSpec::Matching { n: 7 }).unwrap();
        assert_eq!(odd.edge_count(), 3);
    }

    #[test]
    fn girth_examples() {
        assert_eq!(girth(&path(6)), None);
        assert_eq!(girth(&complete(3)), Some(3));
        assert_eq!(girth(&complete(5)), Some(3));
        assert_eq!(girth(&petersen()), Some(5));
        assert_eq!(girth(&cycle(7).unwrap()), Some(7));
        let c4_tail = Network::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 0), (3, 4), (4, 5)]).unwrap();
        assert_eq!(girth(&c4_tail), Some(4));
    }

    #[test]
    fn petersen_spec() {
        let g = build(&ConstructionSpec::Girth5Regular { n: 10, d: 3, seed: 0 }).unwrap();
        assert_eq!(g, petersen());
        assert!((0..10).all(|i| !g.on_short_cycle(i)));
    }

    #[test]
    fn randomized_girth5() {
        for (n, d) in [(16, 3), (24, 3), (30, 4)] {
            let g = build(&ConstructionSpec::Girth5Regular { n, d, seed: 3 }).unwrap();
            assert!(girth(&g).is_none_or(|x| x >= 5));
            assert!((0..n).all(|i| !g.on_short_cycle(i)));
        }
    }

    #[test]
    fn circulant_regular() {
        for (n, d) in [(8, 3), (9, 4), (24, 5), (24, 11), (12, 1)] {
            let g = build(&ConstructionSpec::Regular { n, d }).unwrap();
            assert!(g.degrees().iter().all(|&x| x == d));
        }
        assert!(matches!(circulant(7, 3), Err(Error::Infeasible(_))));
        assert!(matches!(circulant(4, 4), Err(Error::Infeasible(_))));
    }

    #[test]
    fn two_component_sizes() {
        let lambda = 6f64.sqrt() - 2.0;
        let (g, size1) = two_component(1000, 1, 2, lambda).unwrap();
        assert_eq!(size1, 448);
        assert_eq!(g.degrees().iter().filter(|&&d| d == 1).count(), 448);
        build(&ConstructionSpec::TwoComponent { n: 1000, d1: 1, d2: 2, lambda }).unwrap();
    }

    #[test]
    fn star_and_cycle() {
        let s = build(&ConstructionSpec::Star { n: 6 }).unwrap();
        assert_eq!(s.degree(0), 5);
        assert!(build(&ConstructionSpec::Cycle { n: 2 }).is_err());
    }

    #[test]
    fn spec_json() {
        let spec: ConstructionSpec = serde_json::from_str(r#"{"kind":"girth5_regular","n":10,"d":3}"#).unwrap();
        assert_eq!(spec, ConstructionSpec::Girth5Regular { n: 10, d: 3, seed: 0 });
    }
}
