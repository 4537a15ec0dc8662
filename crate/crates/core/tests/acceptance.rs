//! Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned
//! below. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{grid_optimum, single_link, sixnode};
use num_rational::Rational64;
use proxbp::backpressure::{compute_weights, slot_update, AlgConfig, AlphaMode, BpState};
use proxbp::net::{residuals, source_injection, DecisionVector, Utility};
use proxbp::oracle::{solve_centralized, tighten_to_equality, total_utility, ORACLE_TOL};
use proxbp::proj::{kkt_residual, project_bisect, project_sorted, ProjectionInstance, BISECT_TOL};
use proxbp::queues::QueueTriple;
use proxbp::rate::{closed_form_wlog, solve_rate, RateProblem};
use proxbp::sim::{gen_appendix_b, run, run_appendix_b, RunConfig, RunOutput};
use proxbp::{OracleSolutionF64, ScenarioF64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KKT_TOL: f64 = 1e-9;
const PROJ_AGREE_TOL: f64 = 1e-8;
const GRID_STEP_PROJ: f64 = 1e-2;
const ROOT_TOL: f64 = 1e-9;
const RATE_AGREE_TOL: f64 = 1e-8;
const GRID_STEP_RATE: f64 = 1e-4;
const GAP_SLACK: f64 = 2e-5;
const DECAY_FACTOR: f64 = 5.0;
const DRIFT_TOL: f64 = 1e-9;
const WEIGHT_TOL: f64 = 1e-12;
const ORACLE_GAP_TOL: f64 = 1e-5;
const ORACLE_GRID_TOL: f64 = 2e-2;
const TIGHT_OBJ_TOL: f64 = 1e-12;
const TIGHT_RESIDUAL_TOL: f64 = 1e-9;
const GAP_SLOTS: u64 = 10_000;
const SOAK_SLOTS: u64 = 100_000;

struct Verdict {
    name: &'static str,
    ok: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(
    name: &'static str,
    limit: Option<Duration>,
    body: impl FnOnce() -> (bool, String),
) -> Verdict {
    let start = Instant::now();
    let (mut ok, mut detail) = body();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            ok = false;
            detail.push_str(&format!(" over time limit {limit:?}"));
        }
    }
    Verdict {
        name,
        ok,
        detail,
        elapsed,
    }
}

fn projection_correctness() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_kkt: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=16);
        let a = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let inst = ProjectionInstance::new(a, rng.gen_range(0.0..4.0)).unwrap();
        let p = project_sorted(&inst);
        worst_kkt = worst_kkt.max(kkt_residual(&inst, &p.z, p.theta));
        let q = project_bisect(&inst, BISECT_TOL).unwrap();
        for (u, v) in p.z.iter().zip(&q.z) {
            worst_agree = worst_agree.max((u - v).abs());
        }
    }
    let mut grid_beats = 0;
    for _ in 0..200 {
        let k = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(0.0..3.0);
        let inst = ProjectionInstance::new(a.clone(), b).unwrap();
        let z = project_sorted(&inst).z;
        let dist = |g: &[f64]| a.iter().zip(g).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        let best = dist(&z);
        let base: Vec<i64> = z
            .iter()
            .map(|v| (v / GRID_STEP_PROJ).round() as i64)
            .collect();
        let mut visit = |g: &[f64]| {
            if g.iter().all(|&v| v >= 0.0)
                && g.iter().sum::<f64>() <= b + 1e-12
                && dist(g) < best - 1e-12
            {
                grid_beats += 1;
            }
        };
        for c in 0..5usize.pow(k as u32) {
            let mut rest = c;
            let g: Vec<f64> = base
                .iter()
                .map(|&b0| {
                    let off = (rest % 5) as i64 - 2;
                    rest /= 5;
                    (b0 + off) as f64 * GRID_STEP_PROJ
                })
                .collect();
            visit(&g);
        }
        let cells = (b / GRID_STEP_PROJ).floor() as i64;
        for _ in 0..500 {
            let g: Vec<f64> = (0..k)
                .map(|_| rng.gen_range(0..=cells) as f64 * GRID_STEP_PROJ)
                .collect();
            visit(&g);
        }
    }
    (
        worst_kkt <= KKT_TOL && worst_agree <= PROJ_AGREE_TOL && grid_beats == 0,
        format!(
            "kkt={worst_kkt:.2e}<={KKT_TOL:e} bisect_diff={worst_agree:.2e}<={PROJ_AGREE_TOL:e} \
             grid_points_closer={grid_beats}"
        ),
    )
}

/// Upper end of the rate search interval: max(1, 2·x_prev) doubled until
/// the optimality condition turns negative.
fn rate_bracket(p: &RateProblem<f64>) -> f64 {
    let mut hi = (2.0 * p.x_prev).max(1.0);
    while p.slope(hi).unwrap() >= 0.0 {
        hi *= 2.0;
    }
    hi
}

fn rate_correctness() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_root: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    let mut grid_wins = 0;
    for _ in 0..1000 {
        let u = Utility::weighted_log(rng.gen_range(0.1..5.0)).unwrap();
        let p: RateProblem<f64> = RateProblem::new(
            u,
            rng.gen_range(-10.0..10.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.1..20.0),
        )
        .unwrap();
        let x = closed_form_wlog(&p).unwrap();
        worst_root = worst_root.max(p.slope(x).unwrap().abs());
        let xb: f64 = solve_rate(&p, 1e-12).unwrap();
        worst_agree = worst_agree.max((x - xb).abs());
        let best = p.objective(x).unwrap();
        let hi = rate_bracket(&p);
        for i in 1..=(hi / GRID_STEP_RATE) as usize {
            if p.objective(i as f64 * GRID_STEP_RATE).unwrap() > best + 1e-12 {
                grid_wins += 1;
            }
        }
    }
    (
        worst_root <= ROOT_TOL && worst_agree <= RATE_AGREE_TOL && grid_wins == 0,
        format!(
            "root_residual={worst_root:.2e}<={ROOT_TOL:e} bisect_diff={worst_agree:.2e}<={RATE_AGREE_TOL:e} \
             grid_points_better={grid_wins}"
        ),
    )
}

fn appendix_b_divergence() -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [2usize, 5, 10] {
        let ex = gen_appendix_b::<Rational64>(k).unwrap();
        let rows = run_appendix_b(&ex, 3 * k as u64);
        let zero = Rational64::from_integer(0);
        let y_empty = rows.iter().all(|r| r.max_y == zero);
        let last = rows.last().unwrap();
        let hit =
            last.slot == 3 * k as u64 && last.z_merge == Rational64::from_integer(k as i64 + 1);
        ok &= y_empty && hit;
        detail.push(format!(
            "k={k}:z_node0@{}={} max_y=0:{y_empty}",
            last.slot, last.z_merge
        ));
    }
    (ok, detail.join(" "))
}

/// Σ_{f, n ≠ dst} α_n (x_f² at the source + Σ_{in ∪ out} μ²)
/// + Σ_f α_dst Σ_{in(dst)} μ².
#[allow(clippy::needless_range_loop)]
fn zeta(sc: &ScenarioF64, y: &DecisionVector<f64>, alpha: &[f64]) -> f64 {
    let net = sc.network();
    let mut total = 0.0;
    for (f, s) in sc.sessions().iter().enumerate() {
        for n in 0..net.node_count() {
            let mut sq: f64 = net.incoming(n).iter().map(|&l| y.mu[l][f].powi(2)).sum();
            if n != s.dst {
                sq += net
                    .outgoing(n)
                    .iter()
                    .map(|&l| y.mu[l][f].powi(2))
                    .sum::<f64>();
                if n == s.src {
                    sq += y.x[f].powi(2);
                }
            }
            total += alpha[n] * sq;
        }
    }
    total
}

fn gap_alpha(sc: &ScenarioF64) -> Vec<f64> {
    (0..sc.node_count())
        .map(|n| 0.5 * (sc.network().degree(n) as f64 + 1.0))
        .collect()
}

fn bound_alpha(sc: &ScenarioF64) -> Vec<f64> {
    gap_alpha(sc).iter().map(|a| 2.0 * a * a).collect()
}

struct Shipped {
    name: &'static str,
    sc: ScenarioF64,
    u_star: f64,
    y_star: DecisionVector<f64>,
    oracle: OracleSolutionF64,
}

fn shipped() -> Vec<Shipped> {
    let one = single_link();
    let one_oracle = solve_centralized(&one, ORACLE_TOL).unwrap();
    let mut one_star = DecisionVector::zeros(&one);
    one_star.x[0] = 1.0;
    one_star.mu[0][0] = 1.0;
    let six = sixnode();
    let six_oracle = solve_centralized(&six, ORACLE_TOL).unwrap();
    vec![
        Shipped {
            name: "single_link",
            sc: one,
            u_star: 0.0,
            y_star: one_star,
            oracle: one_oracle,
        },
        Shipped {
            name: "sixnode",
            u_star: six_oracle.u_star,
            y_star: six_oracle.y_star.clone(),
            sc: six,
            oracle: six_oracle,
        },
    ]
}

fn gap_bound(cases: &[Shipped], runs: &mut Vec<RunOutput<f64>>) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for case in cases {
        let sc = &case.sc;
        let alpha = gap_alpha(sc);
        let z = zeta(sc, &case.y_star, &alpha);
        let cfg = RunConfig::new_alg(sc, AlphaMode::UtilityGap, 1.0, GAP_SLOTS).unwrap();
        let out = run(sc, &cfg, Some(&case.oracle)).unwrap();
        let mut sum = 0.0;
        let mut xsum = vec![0.0; sc.session_count()];
        let mut worst: f64 = f64::NEG_INFINITY;
        let mut gaps_avg = Vec::new();
        let mut gaps_jensen = Vec::new();
        for (i, row) in out.trace.rows.iter().enumerate() {
            let t = (i + 1) as f64;
            sum += total_utility(sc, &row.x).unwrap();
            for (s, x) in xsum.iter_mut().zip(&row.x) {
                *s += x;
            }
            let xbar: Vec<f64> = xsum.iter().map(|s| s / t).collect();
            let ga = case.u_star - sum / t;
            let gj = case.u_star - total_utility(sc, &xbar).unwrap();
            let allowed = z / t + GAP_SLACK;
            worst = worst.max(ga - allowed).max(gj - allowed);
            gaps_avg.push(ga);
            gaps_jensen.push(gj);
        }
        let decay = |g: &[f64]| g[GAP_SLOTS as usize - 1] <= g[999] / DECAY_FACTOR;
        let decays = decay(&gaps_avg) && decay(&gaps_jensen);
        ok &= worst <= 0.0 && decays;
        detail.push(format!(
            "{}:zeta={z:.4} worst_excess={worst:.2e} gap@1e3={:.3e} gap@1e4={:.3e} decay:{decays}",
            case.name,
            gaps_avg[999],
            gaps_avg[GAP_SLOTS as usize - 1]
        ));
        runs.push(out);
    }
    (ok, format!("slack={GAP_SLACK:e} {}", detail.join(" ")))
}

#[derive(Default)]
struct IdentityTally {
    slots: u64,
    worst_drift: f64,
    worst_weight: f64,
}

/// Runs the new algorithm with queue-bound α, stepping the three queue
/// families alongside, and checks both queue bounds node by node.
fn queue_bounds(cases: &[Shipped], tally: &mut IdentityTally) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for case in cases {
        let sc = &case.sc;
        let alpha = bound_alpha(sc);
        let z = zeta(sc, &case.y_star, &alpha);
        let lambda = case.oracle.lambda_star.norm();
        let q_bound = 2.0 * lambda + (2.0 * z).sqrt();
        let cfg = AlgConfig::new(alpha).unwrap();
        let mut state = BpState::new(sc);
        let mut queues = QueueTriple::zeros(sc);
        let mut prev_q = state.q().clone();
        let (mut max_q, mut worst_z): (f64, f64) = (0.0, f64::NEG_INFINITY);
        for t in 0..SOAK_SLOTS {
            let w = compute_weights(&state, sc);
            if t >= 1 {
                for (f, n, wv) in w.active() {
                    let e = (wv - (2.0 * state.q().get(f, n) - prev_q.get(f, n))).abs();
                    tally.worst_weight = tally.worst_weight.max(e);
                }
            }
            let (out, next) = slot_update(&state, sc, &cfg).unwrap();
            let g = residuals(sc, &out.y);
            let mut delta = 0.0;
            let mut predicted = 0.0;
            for (f, n, q) in state.q().active() {
                let gv = g.get(f, n);
                let qn = q + gv;
                delta += 0.5 * (qn - q) * (qn + q);
                predicted += q * gv + 0.5 * gv * gv;
            }
            tally.worst_drift = tally.worst_drift.max((delta - predicted).abs());
            tally.slots += 1;
            queues.advance(sc, &source_injection(sc, &out.y.x), &out.y.mu);
            max_q = max_q.max(queues.q.max_abs());
            for (_, n, zv) in queues.z.active() {
                let bound = 2.0 * q_bound + sc.network().out_capacity(n);
                worst_z = worst_z.max(zv - bound);
            }
            prev_q = state.q().clone();
            state = next;
        }
        let case_ok = max_q <= q_bound && worst_z <= 0.0;
        ok &= case_ok;
        detail.push(format!(
            "{}:max|Q|={max_q:.3}<={q_bound:.3} worst_Z_excess={worst_z:.3}",
            case.name
        ));
    }
    (ok, detail.join(" "))
}

fn identities(runs: &[RunOutput<f64>], tally: &IdentityTally) -> (bool, String) {
    let mut ok = tally.worst_drift <= DRIFT_TOL && tally.worst_weight <= WEIGHT_TOL;
    let mut failing = Vec::new();
    for out in runs {
        for name in ["drift_identity", "weight_identity"] {
            if let Some(check) = out.summary.check(name) {
                if check.failures > 0 {
                    ok = false;
                    failing.push(format!("{}:{name}", out.trace.tag));
                }
            }
        }
    }
    (
        ok,
        format!(
            "soak_slots={} drift={:.2e}<={DRIFT_TOL:e} weight={:.2e}<={WEIGHT_TOL:e} runs={} failing=[{}]",
            tally.slots,
            tally.worst_drift,
            tally.worst_weight,
            runs.len(),
            failing.join(",")
        ),
    )
}

/// Terminal gaps are compared in magnitude: the baseline's running average
/// can overshoot U* while its queues are still filling.
fn baseline_contrast(six: &Shipped, runs: &mut Vec<RunOutput<f64>>) -> (bool, String) {
    let sc = &six.sc;
    let go = |cfg: RunConfig<f64>| run(sc, &cfg, Some(&six.oracle)).unwrap();
    let new = go(RunConfig::new_alg(sc, AlphaMode::UtilityGap, 1.0, GAP_SLOTS).unwrap());
    let dpp: Vec<RunOutput<f64>> = [10.0, 100.0, 500.0]
        .iter()
        .map(|&v| go(RunConfig::dpp(sc, v, GAP_SLOTS).unwrap()))
        .collect();
    let gap = |o: &RunOutput<f64>| o.trace.last().gap.unwrap();
    let backlog = |o: &RunOutput<f64>| o.final_queues.z.sum_active();
    let (b10, b100, b500) = (backlog(&dpp[0]), backlog(&dpp[1]), backlog(&dpp[2]));
    let ok =
        gap(&new).abs() < gap(&dpp[2]).abs() && b500 > b100 && b100 > b10 && backlog(&new) < b10;
    let detail = format!(
        "|gap| new={:.3e} dpp500={:.3e}; backlog new={:.3} dpp10={b10:.3} dpp100={b100:.3} dpp500={b500:.3}",
        gap(&new).abs(),
        gap(&dpp[2]).abs(),
        backlog(&new)
    );
    runs.push(new);
    runs.extend(dpp);
    (ok, detail)
}

fn oracle_certification(cases: &[Shipped]) -> (bool, String) {
    let mut ok = true;
    let mut detail = Vec::new();
    for case in cases {
        let grid = grid_optimum(&case.sc);
        let diff = case.oracle.u_star - grid;
        let case_ok = case.oracle.duality_gap <= ORACLE_GAP_TOL && diff.abs() <= ORACLE_GRID_TOL;
        ok &= case_ok;
        detail.push(format!(
            "{}:gap={:.2e} oracle-grid={diff:.2e}",
            case.name, case.oracle.duality_gap
        ));
    }
    let line = proxbp::net::parse_scenario::<f64>(
        "nodes 4\nlink 0 1 1\nlink 1 2 1\nlink 2 3 1\nsession 0 0 3 wlog 1\n",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_obj, mut worst_res): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let mut y = DecisionVector::zeros(&line);
        y.x[0] = rng.gen_range(1e-3..1.0);
        let mut level = y.x[0];
        for l in 0..3 {
            level = rng.gen_range(level..=1.0);
            y.mu[l][0] = level;
        }
        let tight = tighten_to_equality(&line, &y);
        let du = total_utility(&line, &tight.x).unwrap() - total_utility(&line, &y.x).unwrap();
        worst_obj = worst_obj.max(du.abs());
        for (_, _, g) in residuals(&line, &tight).active() {
            worst_res = worst_res.max(g.abs());
        }
    }
    ok &= worst_obj <= TIGHT_OBJ_TOL && worst_res <= TIGHT_RESIDUAL_TOL;
    detail.push(format!(
        "tighten:obj_change={worst_obj:.1e}<={TIGHT_OBJ_TOL:e} residual={worst_res:.1e}<={TIGHT_RESIDUAL_TOL:e}"
    ));
    (
        ok,
        format!(
            "gap<={ORACLE_GAP_TOL:e} grid<={ORACLE_GRID_TOL:e} {}",
            detail.join(" ")
        ),
    )
}

fn main() -> ExitCode {
    let cases = shipped();
    let mut runs = Vec::new();
    let mut tally = IdentityTally::default();
    let secs = Duration::from_secs;
    let verdicts = [
        timed(
            "projection_correctness",
            Some(secs(5)),
            projection_correctness,
        ),
        timed("rate_solver_correctness", Some(secs(5)), rate_correctness),
        timed(
            "chain_backlog_divergence",
            Some(secs(1)),
            appendix_b_divergence,
        ),
        timed("utility_gap_bound", Some(secs(60)), || {
            gap_bound(&cases, &mut runs)
        }),
        timed("queue_bounds", Some(secs(300)), || {
            queue_bounds(&cases, &mut tally)
        }),
        timed("baseline_contrast", None, || {
            baseline_contrast(&cases[1], &mut runs)
        }),
        timed("oracle_certification", None, || {
            oracle_certification(&cases)
        }),
    ];
    let identity = timed("drift_and_weight_identities", None, || {
        identities(&runs, &tally)
    });
    let mut all_ok = true;
    for v in verdicts.iter().chain([&identity]) {
        all_ok &= v.ok;
        println!(
            "{} {} {} ({:.2}s)",
            if v.ok { "PASS" } else { "FAIL" },
            v.name,
            v.detail,
            v.elapsed.as_secs_f64()
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
