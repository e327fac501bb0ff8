//! Exact expected utilities.
//!
//! Uninformed transfers give independent per-neighbour events, so the
//! probability that a needy individual receives nothing is a product over
//! neighbours. The same product form holds for informed transfers when no
//! two neighbours of the individual interact, i.e. the individual is on no
//! triangle or 4-cycle.

use crate::error::{Error, Result};
use crate::model::{ExogenousDistribution, ModelParams, Network, Pmf, TransferModel, UtilityVector};
use crate::transfer_sim;

/// Expected utility of `i` under uninformed transfers:
/// `1 - q * prod_j (1 - p / d_j) - gamma * d_i`.
pub fn utility_png(net: &Network, params: &ModelParams, i: usize) -> f64 {
    let miss: f64 = net.neighbors(i).map(|j| 1.0 - params.p / net.degree(j) as f64).product();
    1.0 - params.q * miss - params.gamma * net.degree(i) as f64
}

/// Expected surplus mass an individual of degree `d` spreads over its
/// contacts: `E[min(X, d + 1)] - 1 + P(X = 0)`.
pub fn mu(pmf: &Pmf, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::ZeroDegree(d));
    }
    let truncated: f64 = pmf
        .masses()
        .iter()
        .enumerate()
        .map(|(k, &pk)| k.min(d + 1) as f64 * pk)
        .sum();
    Ok(truncated - 1.0 + pmf.mass(0))
}

/// Expected utility of `i` with heterogeneous exogenous distributions.
pub fn utility_gpng(net: &Network, dists: &ExogenousDistribution, gamma: f64, i: usize) -> Result<f64> {
    let mut miss = 1.0;
    for j in net.neighbors(i) {
        let dj = net.degree(j);
        miss *= 1.0 - mu(dists.row(j), dj)? / dj as f64;
    }
    Ok(1.0 - dists.row(i).mass(0) * miss - gamma * net.degree(i) as f64)
}

/// `P(j sends nothing to i | X_i = 0)` under informed transfers, for a
/// neighbour `j` of degree `d_j` whose other contacts draw independently:
/// `1 - (p / q) (1 - (1 - q)^d_j) / d_j`.
pub fn informed_no_transfer_prob(d_j: usize, params: &ModelParams) -> Result<f64> {
    if d_j == 0 {
        return Err(Error::ZeroDegree(d_j));
    }
    let d = d_j as f64;
    Ok(1.0 - params.p / params.q * (1.0 - (1.0 - params.q).powi(d_j as i32)) / d)
}

/// Informed-model utility of `i` via the product form. Fails when `i` lies
/// on a triangle or 4-cycle.
pub fn utility_ipng_girth5(net: &Network, params: &ModelParams, i: usize) -> Result<f64> {
    if net.on_short_cycle(i) {
        return Err(Error::ShortCycle { node: i });
    }
    let mut miss = 1.0;
    for j in net.neighbors(i) {
        miss *= informed_no_transfer_prob(net.degree(j), params)?;
    }
    Ok(1.0 - params.q * miss - params.gamma * net.degree(i) as f64)
}

/// Expected utility of `i` under `params.model`. Informed utilities use the
/// product form when it is exact and full enumeration otherwise.
pub fn utility(net: &Network, params: &ModelParams, i: usize) -> Result<f64> {
    match params.model {
        TransferModel::Uninformed => Ok(utility_png(net, params, i)),
        TransferModel::Informed => {
            if net.on_short_cycle(i) {
                transfer_sim::exact_utility_ipng(net, params, i)
            } else {
                utility_ipng_girth5(net, params, i)
            }
        }
    }
}

pub fn utilities(net: &Network, params: &ModelParams) -> Result<UtilityVector> {
    (0..net.n()).map(|i| utility(net, params, i)).collect::<Result<Vec<_>>>().map(UtilityVector)
}

pub fn utilities_gpng(net: &Network, dists: &ExogenousDistribution, gamma: f64) -> Result<UtilityVector> {
    if dists.len() != net.n() {
        return Err(Error::Precondition(format!(
            "distribution has {} rows for {} individuals",
            dists.len(),
            net.n()
        )));
    }
    (0..net.n())
        .map(|i| utility_gpng(net, dists, gamma, i))
        .collect::<Result<Vec<_>>>()
        .map(UtilityVector)
}

/// Sum of expected utilities under `params.model`.
pub fn social_welfare(net: &Network, params: &ModelParams) -> Result<f64> {
    Ok(utilities(net, params)?.welfare())
}

pub fn social_welfare_gpng(net: &Network, dists: &ExogenousDistribution, gamma: f64) -> Result<f64> {
    Ok(utilities_gpng(net, dists, gamma)?.welfare())
}
