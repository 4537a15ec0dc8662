#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proxbp::net::{parse_scenario, DecisionVector, Link, Network, Scenario, Session, Utility};
use proxbp::oracle::total_utility;
use proxbp::ScenarioF64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sixnode() -> ScenarioF64 {
    parse_scenario(proxbp::scenarios::SIXNODE).unwrap()
}

pub fn single_link() -> ScenarioF64 {
    parse_scenario(proxbp::scenarios::SINGLE_LINK).unwrap()
}

/// Random network on `nodes` nodes with a backbone path 0 → 1 → … so every
/// session from a lower to a higher node is routable, plus `extra` random
/// links in either direction.
pub fn random_scenario(
    rng: &mut ChaCha8Rng,
    nodes: usize,
    extra: usize,
    sessions: usize,
) -> ScenarioF64 {
    let mut links: Vec<Link<f64>> = (0..nodes - 1)
        .map(|i| Link {
            tail: i,
            head: i + 1,
            capacity: rng.gen_range(0.5..2.0),
        })
        .collect();
    for _ in 0..extra {
        let tail = rng.gen_range(0..nodes);
        let mut head = rng.gen_range(0..nodes);
        if head == tail {
            head = (tail + 1) % nodes;
        }
        links.push(Link {
            tail,
            head,
            capacity: rng.gen_range(0.5..2.0),
        });
    }
    let net = Network::new(nodes, links).unwrap();
    let sessions = (0..sessions)
        .map(|id| {
            let src = rng.gen_range(0..nodes - 1);
            let dst = rng.gen_range(src + 1..nodes);
            Session {
                id,
                src,
                dst,
                utility: Utility::weighted_log(rng.gen_range(0.5..2.0)).unwrap(),
            }
        })
        .collect();
    let links = net.link_count();
    Scenario::new(net, sessions, vec![None; links]).unwrap()
}

/// Random decisions with entries in [0, 2) on allowed pairs.
pub fn random_decisions(rng: &mut ChaCha8Rng, sc: &ScenarioF64) -> DecisionVector<f64> {
    let mut y = DecisionVector::zeros(sc);
    for x in &mut y.x {
        *x = rng.gen_range(0.0..2.0);
    }
    for l in 0..sc.link_count() {
        for &f in sc.allowed(l) {
            y.mu[l][f] = rng.gen_range(0.0..2.0);
        }
    }
    y
}

/// Largest x_target such that the rates in `fixed` plus x_target are
/// routable, by linear programming over per-session link rates.
pub fn max_routable(sc: &ScenarioF64, fixed: &[(usize, f64)], target: usize) -> Option<f64> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let x: Vec<_> = (0..sc.session_count())
        .map(|f| {
            if f == target {
                lp.add_var(1.0, (0.0, f64::INFINITY))
            } else {
                let v = fixed
                    .iter()
                    .find(|&&(g, _)| g == f)
                    .map_or(0.0, |&(_, v)| v);
                lp.add_var(0.0, (v, v))
            }
        })
        .collect();
    let net = sc.network();
    let mu: Vec<Vec<_>> = (0..net.link_count())
        .map(|l| {
            (0..sc.session_count())
                .map(|f| {
                    sc.is_allowed(l, f)
                        .then(|| lp.add_var(0.0, (0.0, f64::INFINITY)))
                })
                .collect()
        })
        .collect();
    for (f, s) in sc.sessions().iter().enumerate() {
        for n in 0..net.node_count() {
            if n == s.dst {
                continue;
            }
            let mut expr = Vec::new();
            if n == s.src {
                expr.push((x[f], 1.0));
            }
            expr.extend(
                net.incoming(n)
                    .iter()
                    .filter_map(|&l| mu[l][f].map(|v| (v, 1.0))),
            );
            expr.extend(
                net.outgoing(n)
                    .iter()
                    .filter_map(|&l| mu[l][f].map(|v| (v, -1.0))),
            );
            if !expr.is_empty() {
                lp.add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0);
            }
        }
    }
    for (l, link) in net.links().iter().enumerate() {
        let expr: Vec<_> = mu[l].iter().flatten().map(|&v| (v, 1.0)).collect();
        if !expr.is_empty() {
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, link.capacity);
        }
    }
    lp.solve().ok().map(|s| s.objective())
}

/// Best utility over a 1e-2 grid of the first session's rate, with the
/// second (if any) at its largest routable rate.
pub fn grid_optimum(sc: &ScenarioF64) -> f64 {
    assert!(sc.session_count() <= 2);
    let ceiling = max_routable(sc, &[], 0).unwrap();
    if sc.session_count() == 1 {
        return total_utility(sc, &[ceiling]).unwrap();
    }
    let mut best = f64::NEG_INFINITY;
    let mut x0 = 1e-2;
    while x0 <= ceiling {
        if let Some(x1) = max_routable(sc, &[(0, x0)], 1) {
            if x1 > 0.0 {
                best = best.max(total_utility(sc, &[x0, x1]).unwrap());
            }
        }
        x0 += 1e-2;
    }
    best
}
