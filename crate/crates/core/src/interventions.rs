//! Platform levers: connection friction and information about who needs an
//! opportunity.

use serde::{Deserialize, Serialize};

use crate::closed_form::utility_png;
use crate::construct::{cycle, matching};
use crate::equilibrium::{is_dfpne, largest_d_dregval, regular_equilibrium_degrees, regular_gamma_interval};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Network, TOL};
use crate::transfer_sim::exact_utility_ipng;
use crate::welfare::{informed_regular_welfare, regular_utility};

/// Resolution of transition points along the friction axis.
pub const TRANSITION_TOL: f64 = 1e-9;

/// A change in the largest regular-equilibrium degree between `from_d`
/// (just below `gamma`) and `to_d` (just above).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub gamma: f64,
    pub from_d: usize,
    pub to_d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionCurve {
    pub q: f64,
    pub p: f64,
    pub gammas: Vec<f64>,
    pub largest_degree: Vec<usize>,
    pub worst_regular_utility: Vec<f64>,
    pub transitions: Vec<Transition>,
}

/// Largest regular-equilibrium degree at cost `gamma`, 0 above `qp`.
pub fn worst_regular_degree(q: f64, p: f64, gamma: f64) -> Result<usize> {
    if gamma > q * p {
        return Ok(0);
    }
    largest_d_dregval(&ModelParams::new(q, p, gamma))
}

/// Per-capita welfare of the worst-case regular equilibrium.
pub fn worst_regular_welfare(q: f64, p: f64, gamma: f64) -> Result<f64> {
    Ok(regular_utility(q, p, gamma, worst_regular_degree(q, p, gamma)?))
}

/// Worst-case regular-equilibrium welfare over `gamma = start + k * step`
/// (nonpositive costs skipped), with every change of the largest degree
/// located by bisection.
pub fn friction_sweep(q: f64, p: f64, start: f64, stop: f64, step: f64) -> Result<FrictionCurve> {
    ModelParams::new(q, p, 0.0).validate()?;
    if step <= 0.0 || stop < start {
        return Err(Error::Precondition(format!("bad friction range {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let gammas: Vec<f64> = (0..count).map(|k| start + k as f64 * step).filter(|&g| g > 0.0).collect();
    let largest_degree = gammas.iter().map(|&g| worst_regular_degree(q, p, g)).collect::<Result<Vec<_>>>()?;
    let worst_regular_utility =
        gammas.iter().zip(&largest_degree).map(|(&g, &d)| regular_utility(q, p, g, d)).collect();
    let mut transitions = Vec::new();
    for k in 1..gammas.len() {
        if largest_degree[k - 1] != largest_degree[k] {
            locate(q, p, (gammas[k - 1], largest_degree[k - 1]), (gammas[k], largest_degree[k]), &mut transitions)?;
        }
    }
    Ok(FrictionCurve { q, p, gammas, largest_degree, worst_regular_utility, transitions })
}

fn locate(q: f64, p: f64, lo: (f64, usize), hi: (f64, usize), out: &mut Vec<Transition>) -> Result<()> {
    if hi.0 - lo.0 < TRANSITION_TOL {
        out.push(Transition { gamma: 0.5 * (lo.0 + hi.0), from_d: lo.1, to_d: hi.1 });
        return Ok(());
    }
    let g = 0.5 * (lo.0 + hi.0);
    let mid = (g, worst_regular_degree(q, p, g)?);
    if mid.1 != lo.1 {
        locate(q, p, lo, mid, out)?;
    }
    if mid.1 != hi.1 {
        locate(q, p, mid, hi, out)?;
    }
    Ok(())
}

/// Evidence that lowering friction can lower welfare: just below the
/// boundary `gamma` a `d`-regular equilibrium exists, just above it does
/// not, and the sparser worst case above is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionWitness {
    pub d: usize,
    pub gamma: f64,
    pub eps_bar: f64,
    /// Welfare at `gamma - eps` for `eps` in `{0, eps_bar / 1000, eps_bar}`.
    pub below: Vec<f64>,
    /// Welfare at `gamma + eps'` for `eps'` in `{eps_bar / 1000, eps_bar}`.
    pub above: Vec<f64>,
    /// Whether `gamma <= qp(1 - p)`, the range where the argument applies.
    pub within_hypothesis: bool,
    pub verified: bool,
}

/// Checks the welfare reversal at the boundary where `d`-regular
/// equilibria stop existing, `gamma = (qp / d)(1 - p / d)^(d - 1)`.
pub fn friction_nonmonotonicity_witness(q: f64, p: f64, d: usize) -> Result<FrictionWitness> {
    let params = ModelParams::new(q, p, 0.0);
    params.validate()?;
    if d == 0 {
        return Err(Error::Precondition("boundary degree must be at least 1".into()));
    }
    let gamma = regular_gamma_interval(d, &params).1;
    let eps_bar = gamma / (2 * d + 1) as f64 * (1.0 - 1e-6);
    let below = [0.0, eps_bar * 1e-3, eps_bar]
        .iter()
        .map(|e| worst_regular_welfare(q, p, gamma - e))
        .collect::<Result<Vec<_>>>()?;
    let above = [eps_bar * 1e-3, eps_bar]
        .iter()
        .map(|e| worst_regular_welfare(q, p, gamma + e))
        .collect::<Result<Vec<_>>>()?;
    let verified = below.iter().all(|b| above.iter().all(|a| b < a));
    let within_hypothesis = gamma <= params.qp() * (1.0 - p) + TOL;
    Ok(FrictionWitness { d, gamma, eps_bar, below, above, within_hypothesis, verified })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeComparison {
    pub node: usize,
    pub u_uninformed: f64,
    pub u_informed: f64,
    pub strict: bool,
    /// Whether some neighbour has degree at least 2.
    pub expect_strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedCompare {
    pub nodes: Vec<NodeComparison>,
    /// Informed utility is never lower, and strictly higher exactly where
    /// some neighbour has degree at least 2.
    pub holds: bool,
}

/// Per-node utilities on a fixed network under both transfer models.
pub fn information_fixed_compare(net: &Network, params: &ModelParams) -> Result<FixedCompare> {
    let nodes = (0..net.n())
        .map(|i| {
            let u_uninformed = utility_png(net, params, i);
            let u_informed = exact_utility_ipng(net, params, i)?;
            Ok(NodeComparison {
                node: i,
                u_uninformed,
                u_informed,
                strict: u_informed > u_uninformed + TOL,
                expect_strict: net.neighbors(i).any(|j| net.degree(j) >= 2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let holds = nodes.iter().all(|c| c.u_informed >= c.u_uninformed - TOL && c.strict == c.expect_strict);
    Ok(FixedCompare { nodes, holds })
}

/// A welfare comparison `informed` vs `uninformed` (per capita).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfarePair {
    pub gamma: f64,
    pub uninformed: f64,
    pub informed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoEquilibriumReport {
    pub p: f64,
    pub q: f64,
    /// Frictionless: complete-network limits.
    pub item1: WelfarePair,
    pub item1_holds: bool,
    /// Both games admit 2-regular equilibria; informed welfare is higher.
    pub item2: WelfarePair,
    pub item2_degrees_uninformed: Vec<usize>,
    pub item2_degrees_informed: Vec<usize>,
    pub item2_holds: bool,
    /// Largest regular degree is 1 uninformed and 2 informed; the sparse
    /// uninformed equilibrium has higher welfare.
    pub item3: WelfarePair,
    pub item3_largest_uninformed: usize,
    pub item3_largest_informed: usize,
    pub item3_holds: bool,
    /// Smallest of the three strict margins.
    pub min_margin: f64,
    /// Checker verdicts on explicit realisations: item 2 cycles in both
    /// games, item 3 matching (uninformed) and cycle (informed).
    pub realized: Vec<(String, bool)>,
}

/// Individuals in the explicit realisations.
const REALIZATION_N: usize = 10;

/// Compares equilibrium welfare with and without information, for
/// `q = 1 - p`.
pub fn information_equilibrium_compare(p: f64) -> Result<InfoEquilibriumReport> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Precondition(format!("p = {p} must lie in (0, 1/2)")));
    }
    let q = 1.0 - p;

    let item1 = WelfarePair { gamma: 0.0, uninformed: 1.0 - q * (-p).exp(), informed: 1.0 - q * (-p / q).exp() };
    let margin1 = item1.informed - item1.uninformed;

    let g2 = q * p * (1.0 - p / 2.0) / 2.0;
    let item2 = WelfarePair {
        gamma: g2,
        uninformed: regular_utility(q, p, g2, 2),
        informed: informed_regular_welfare(q, p, g2, 2.0),
    };
    let deg2_u = regular_equilibrium_degrees(&ModelParams::new(q, p, g2))?.degrees;
    let deg2_i = regular_equilibrium_degrees(&ModelParams::informed(q, p, g2))?.degrees;
    let margin2 = item2.informed - item2.uninformed;

    // upper end of the informed 2-regular interval
    let g3 = p * (2.0 + p) * (1.0 - p).powi(2) * (1.0 + p) / 4.0;
    let item3 = WelfarePair {
        gamma: g3,
        uninformed: regular_utility(q, p, g3, 1),
        informed: informed_regular_welfare(q, p, g3, 2.0),
    };
    let largest_u = regular_equilibrium_degrees(&ModelParams::new(q, p, g3))?.d_max;
    let largest_i = regular_equilibrium_degrees(&ModelParams::informed(q, p, g3))?.d_max;
    let margin3 = item3.uninformed - item3.informed;

    let ring = cycle(REALIZATION_N)?;
    let pairs = matching(REALIZATION_N);
    let realized = vec![
        ("item2-uninformed-cycle".to_string(), is_dfpne(&ring, &ModelParams::new(q, p, g2))?.is_equilibrium),
        ("item2-informed-cycle".to_string(), is_dfpne(&ring, &ModelParams::informed(q, p, g2))?.is_equilibrium),
        ("item3-uninformed-matching".to_string(), is_dfpne(&pairs, &ModelParams::new(q, p, g3))?.is_equilibrium),
        ("item3-informed-cycle".to_string(), is_dfpne(&ring, &ModelParams::informed(q, p, g3))?.is_equilibrium),
    ];

    Ok(InfoEquilibriumReport {
        p,
        q,
        item1,
        item1_holds: margin1 > 0.0,
        item2,
        item2_holds: margin2 > 0.0 && deg2_u.contains(&2) && deg2_i.contains(&2),
        item2_degrees_uninformed: deg2_u,
        item2_degrees_informed: deg2_i,
        item3,
        item3_largest_uninformed: largest_u,
        item3_largest_informed: largest_i,
        item3_holds: margin3 > 0.0 && largest_u == 1 && largest_i == 2,
        min_margin: margin1.min(margin2).min(margin3),
        realized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::path;
    use approx::assert_abs_diff_eq;

    #[test]
    fn transitions_hit_interval_endpoints() {
        let curve = friction_sweep(0.5, 0.5, 0.0, 0.3, 0.001).unwrap();
        assert!(!curve.transitions.is_empty());
        let params = ModelParams::new(0.5, 0.5, 0.0);
        for t in &curve.transitions {
            assert_eq!(t.from_d, t.to_d + 1);
            let edge = regular_gamma_interval(t.from_d, &params).1;
            assert!((t.gamma - edge).abs() < 1e-8, "{t:?} vs {edge}");
        }
        assert!(curve.transitions.iter().any(|t| (t.gamma - 0.25).abs() < 1e-8 && t.to_d == 0));
    }

    #[test]
    fn segments_strictly_decrease() {
        let c = friction_sweep(0.5, 0.5, 0.0, 0.2, 0.0005).unwrap();
        for k in 1..c.gammas.len() {
            if c.largest_degree[k] == c.largest_degree[k - 1] && c.largest_degree[k] > 0 {
                assert!(c.worst_regular_utility[k] < c.worst_regular_utility[k - 1]);
            }
        }
    }

    #[test]
    fn witness_boundaries() {
        let w2 = friction_nonmonotonicity_witness(0.5, 0.5, 2).unwrap();
        assert_abs_diff_eq!(w2.gamma, 0.09375, epsilon = 1e-15);
        assert!(w2.verified && w2.within_hypothesis);
        let w1 = friction_nonmonotonicity_witness(0.5, 0.5, 1).unwrap();
        assert_abs_diff_eq!(w1.gamma, 0.25, epsilon = 1e-15);
        assert!(!w1.within_hypothesis);
    }

    #[test]
    fn fixed_compare_examples() {
        let params = ModelParams::new(0.5, 0.3, 0.0);
        let m = information_fixed_compare(&matching(4), &params).unwrap();
        assert!(m.holds && m.nodes.iter().all(|c| !c.strict));
        let p3 = information_fixed_compare(&path(3), &params).unwrap();
        assert!(p3.holds && p3.nodes[0].strict && p3.nodes[2].strict);
    }

    #[test]
    fn info_equilibrium_quarter() {
        let r = information_equilibrium_compare(0.25).unwrap();
        assert!(r.item1_holds && r.item2_holds && r.item3_holds);
        assert!((r.item2.uninformed - 0.26172).abs() < 1e-4);
        assert!((r.item2.informed - 0.302).abs() < 1e-3);
        assert!(information_equilibrium_compare(0.6).is_err());
    }
}
