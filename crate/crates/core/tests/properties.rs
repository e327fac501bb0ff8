use netopp::closed_form::{utility, utility_png};
use netopp::equilibrium::{regular_gamma_interval, regular_equilibrium_degrees};
use netopp::sweep::SweepGrid;
use netopp::welfare::{gini, poa_costly, poa_frictionless};
use netopp::{ModelParams, Network, TOL};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = Network> {
    (2usize..14).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |pairs| {
            let mut g = Network::empty(n);
            for (a, b) in pairs {
                if a != b && !g.has_edge(a, b) {
                    g.add_edge(a, b).unwrap();
                }
            }
            g
        })
    })
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..0.9, 0.0f64..1.0, 0.0f64..0.2).prop_map(|(q, t, gamma)| ModelParams::new(q, 0.01 + t * (0.98 - q), gamma))
}

proptest! {
    #[test]
    fn degree_sum_is_twice_edges(g in graph()) {
        prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.edge_count());
        for (i, j) in g.edges() {
            prop_assert!(g.has_edge(j, i) && i < j);
        }
    }

    #[test]
    fn add_remove_round_trip(g in graph(), a in 0usize..14, b in 0usize..14) {
        let (a, b) = (a % g.n(), b % g.n());
        prop_assume!(a != b && !g.has_edge(a, b));
        let mut h = g.clone();
        h.add_edge(a, b).unwrap();
        prop_assert_eq!(h.edge_count(), g.edge_count() + 1);
        prop_assert!(h.add_edge(a, b).is_err());
        h.remove_edge(b, a).unwrap();
        prop_assert_eq!(h, g);
    }

    #[test]
    fn network_json_round_trip(g in graph()) {
        let s = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<Network>(&s).unwrap(), g);
    }

    #[test]
    fn params_json_round_trip(p in params()) {
        let s = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<ModelParams>(&s).unwrap(), p);
    }

    #[test]
    fn gini_scale_invariant_and_matches_pairs(u in proptest::collection::vec(0.01f64..10.0, 1..40), c in 0.1f64..100.0) {
        let g = gini(&u).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * c).collect();
        prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-12);
        let pairs: f64 = u.iter().flat_map(|a| u.iter().map(move |b| (a - b).abs())).sum::<f64>()
            / (2.0 * u.len() as f64 * u.iter().sum::<f64>());
        prop_assert!((g - pairs).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&g));
    }

    #[test]
    fn poa_at_least_one(q in 0.01f64..0.99, t in 0.01f64..0.99, s in 0.0f64..1.5) {
        let p = t * (1.0 - q);
        prop_assert!(poa_frictionless(q, p) >= 1.0);
        let b = poa_costly(q, p, s * q * p).unwrap();
        prop_assert!(b.lower >= 1.0 - TOL && b.upper >= b.lower);
    }

    #[test]
    fn busier_neighbours_lower_utility(g in graph(), pr in params(), i in 0usize..14) {
        // raising a neighbour's degree never helps
        let i = i % g.n();
        let nbrs: Vec<usize> = g.neighbors(i).collect();
        prop_assume!(!nbrs.is_empty());
        let j = nbrs[0];
        let Some(k) = (0..g.n()).find(|&k| k != i && k != j && !g.has_edge(j, k) && !g.has_edge(i, k)) else {
            return Ok(());
        };
        let mut h = g.clone();
        h.add_edge(j, k).unwrap();
        prop_assert!(utility_png(&h, &pr, i) <= utility_png(&g, &pr, i) + 1e-15);
    }

    #[test]
    fn informed_dominates_uninformed(g in graph(), pr in params()) {
        prop_assume!((0..g.n()).all(|i| g.ball2(i).len() <= 16));
        let inf = ModelParams::informed(pr.q, pr.p, pr.gamma);
        for i in 0..g.n() {
            prop_assert!(utility(&g, &inf, i).unwrap() >= utility(&g, &pr, i).unwrap() - 1e-12);
        }
    }

    #[test]
    fn returned_degrees_lie_in_their_intervals(pr in params(), s in 0.001f64..1.0) {
        let pr = ModelParams { gamma: s * pr.qp(), ..pr };
        let set = regular_equilibrium_degrees(&pr).unwrap();
        prop_assert!(!set.degrees.is_empty());
        for d in set.degrees {
            let (lo, hi) = regular_gamma_interval(d, &pr);
            prop_assert!(lo <= hi && pr.gamma >= lo - TOL && pr.gamma <= hi + TOL);
        }
    }

    #[test]
    fn sweep_csv_round_trip(q in 0.1f64..0.5, n in 1usize..6) {
        let axes = vec![format!("p=0.05:{}:0.05", 0.05 * n as f64).parse().unwrap()];
        let fixed = netopp::sweep::FixedParams { q: Some(q), p: None, gamma: Some(0.0), q_complement: false };
        let grid = netopp::sweep::run_sweep(netopp::sweep::SweepKind::PoaFrictionless, axes, fixed).unwrap();
        let back = SweepGrid::from_csv(&grid.to_csv()).unwrap();
        prop_assert_eq!(back.to_csv(), grid.to_csv());
    }
}
