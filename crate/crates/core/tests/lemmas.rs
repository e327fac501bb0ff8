//! Monotonicity facts about `(1 - p / d)` powers that the equilibrium
//! analysis relies on, checked over d in [1, 200] and 50 values of p.

fn p_grid() -> impl Iterator<Item = f64> {
    (0..50).map(|k| 0.01 + 0.98 * k as f64 / 49.0)
}

fn pow(p: f64, denom: f64, exp: f64) -> f64 {
    (1.0 - p / denom).powf(exp)
}

#[test]
fn power_d_increasing() {
    for p in p_grid() {
        for d in 1..200 {
            let (a, b) = (pow(p, d as f64, d as f64), pow(p, (d + 1) as f64, (d + 1) as f64));
            assert!(b >= a, "p={p} d={d}");
        }
    }
}

#[test]
fn power_d_minus_one_decreasing() {
    for p in p_grid() {
        for d in 1..200 {
            let (a, b) = (pow(p, d as f64, (d - 1) as f64), pow(p, (d + 1) as f64, d as f64));
            assert!(b <= a, "p={p} d={d}");
        }
    }
}

#[test]
fn shifted_denominator_increasing() {
    for p in p_grid() {
        for d in 2..200 {
            let (a, b) = (pow(p, (d - 1) as f64, d as f64), pow(p, d as f64, (d + 1) as f64));
            assert!(b >= a, "p={p} d={d}");
        }
    }
}

#[test]
fn shifted_power_convex() {
    for p in p_grid() {
        let f = |d: usize| pow(p, (d + 1) as f64, d as f64);
        for d in 2..200 {
            assert!(f(d + 1) - 2.0 * f(d) + f(d - 1) >= -1e-15, "p={p} d={d}");
        }
    }
}
