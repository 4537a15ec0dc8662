mod common;

use common::{grid_optimum, random_scenario, single_link, sixnode};
use proxbp::backpressure::{default_alpha, AlphaMode};
use proxbp::net::{parse_scenario, residuals, DecisionVector};
use proxbp::oracle::{
    compute_zeta, solve_centralized, tighten_to_equality, total_utility, ORACLE_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sixnode_optimum_is_the_analytic_split() {
    let sc = sixnode();
    let sol = solve_centralized(&sc, ORACLE_TOL).unwrap();
    assert!(sol.duality_gap <= ORACLE_TOL);
    assert!((sol.y_star.x[0] - 1.2).abs() < 1e-5, "{:?}", sol.y_star.x);
    assert!((sol.y_star.x[1] - 1.8).abs() < 1e-5, "{:?}", sol.y_star.x);
    let u = 1.2f64.ln() + 1.5 * 1.8f64.ln();
    assert!((sol.u_star - u).abs() < 1e-5);
    // The shared bottleneck prices both sources at w / x.
    assert!((sol.lambda_star.get(0, 0) - 1.0 / 1.2).abs() < 1e-3);
    assert!((sol.lambda_star.get(1, 2) - 1.5 / 1.8).abs() < 1e-3);
    assert!(sol.max_violation <= 1e-9);
}

#[test]
fn oracle_agrees_with_lp_grid_search() {
    for sc in [single_link(), sixnode()] {
        let sol = solve_centralized(&sc, ORACLE_TOL).unwrap();
        let grid = grid_optimum(&sc);
        assert!(grid <= sol.u_star + ORACLE_TOL);
        assert!(
            sol.u_star - grid <= 2e-2,
            "oracle {} grid {grid}",
            sol.u_star
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let sc = random_scenario(&mut rng, 5, 4, 2);
        let sol = solve_centralized(&sc, ORACLE_TOL).unwrap();
        assert!(sol.duality_gap <= ORACLE_TOL);
        let grid = grid_optimum(&sc);
        assert!(grid <= sol.u_star + ORACLE_TOL);
        assert!(
            sol.u_star - grid <= 2e-2,
            "oracle {} grid {grid}",
            sol.u_star
        );
    }
}

#[test]
fn zeta_on_the_single_link() {
    let sc = single_link();
    let sol = solve_centralized(&sc, ORACLE_TOL).unwrap();
    let alpha = default_alpha::<f64, f64>(sc.network(), AlphaMode::UtilityGap);
    // α = 1 at both nodes; y* = (x, μ) = (1, 1) is counted at the source
    // and μ again at the destination.
    assert!((compute_zeta(&sc, &sol.y_star, &alpha) - 3.0).abs() < 1e-4);
}

#[test]
fn tightening_random_lines() {
    let sc = parse_scenario::<f64>(
        "nodes 4\nlink 0 1 1\nlink 1 2 1\nlink 2 3 1\nsession 0 0 3 wlog 1\n",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        // Nondecreasing rates along the line leave slack at every relay.
        let mut y = DecisionVector::zeros(&sc);
        y.x[0] = rng.gen_range(0.0..1.0);
        let mut level = y.x[0];
        for l in 0..3 {
            level = rng.gen_range(level..=1.0);
            y.mu[l][0] = level;
        }
        let tight = tighten_to_equality(&sc, &y);
        assert_eq!(tight.x, y.x);
        let before = total_utility(&sc, &y.x).unwrap();
        let after = total_utility(&sc, &tight.x).unwrap();
        assert!((before - after).abs() <= 1e-12);
        for (_, _, g) in residuals(&sc, &tight).active() {
            assert!(g.abs() <= 1e-9);
        }
    }
}

#[test]
fn oracle_output_is_tight() {
    for sc in [single_link(), sixnode()] {
        let sol = solve_centralized(&sc, ORACLE_TOL).unwrap();
        for (_, _, g) in residuals(&sc, &sol.y_star).active() {
            assert!(g.abs() <= 1e-9);
        }
    }
}
