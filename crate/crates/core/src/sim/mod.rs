//! Slot simulator: drives an algorithm, steps all three queue families under
//! its decisions, records per-slot metrics and checks invariants inline.

pub mod appendix_b;
mod compare;
mod csv;

use crate::backpressure::{
    drift, lyapunov, lyapunov_change, slot_update, slot_update_parallel, AlgConfig, AlphaMode,
    BpState,
};
use crate::dpp::{dpp_slot_update, DppConfig};
use crate::error::{Error, Result};
use crate::net::{net_change, source_injection, DecisionVector, Scenario};
use crate::oracle::{compute_zeta, total_utility, OracleSolution, ORACLE_TOL};
use crate::queues::{QueueMaxima, QueueTriple};
use crate::scalar::{lit, wide, Real};

pub use self::appendix_b::{gen_appendix_b, run_appendix_b, AppendixB, AppendixBRow};
pub use self::compare::{compare, parse_compare_spec, CompareEntry, CompareOutcome, CompareSpec};
pub use self::csv::{read_trace_csv, write_trace_csv, CSV_HEADER};

/// Tolerance of the one-slot Lyapunov drift identity.
pub const DRIFT_TOL: f64 = 1e-9;
/// Tolerance of W[t] = 2Q[t] − Q[t−1].
pub const WEIGHT_TOL: f64 = 1e-12;
/// Per-slot tolerance of Q[t] = Σ_{τ<t} g(y[τ]); scaled by t.
pub const TELESCOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm<T> {
    New(AlgConfig<T>),
    Dpp(DppConfig<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    /// Label written to the `alg` column.
    pub tag: String,
    pub algorithm: Algorithm<T>,
    pub slots: u64,
    /// Solve sources and links on the rayon pool (new algorithm only).
    pub parallel: bool,
}

impl<T: Real> RunConfig<T> {
    /// New algorithm with degree-based α, tagged `new-<mode>` (plus the scale
    /// when it is not 1).
    pub fn new_alg(scenario: &Scenario<T>, mode: AlphaMode, scale: T, slots: u64) -> Result<Self> {
        let tag = if scale == T::one() {
            format!("new-{}", mode.token())
        } else {
            format!("new-{}-x{}", mode.token(), wide(scale))
        };
        Ok(RunConfig {
            tag,
            algorithm: Algorithm::New(AlgConfig::from_mode(scenario.network(), mode, scale)?),
            slots,
            parallel: false,
        })
    }

    /// Drift-plus-penalty with default rate caps, tagged `dpp-V<v>`.
    pub fn dpp(scenario: &Scenario<T>, v: T, slots: u64) -> Result<Self> {
        Ok(RunConfig {
            tag: format!("dpp-V{}", wide(v)),
            algorithm: Algorithm::Dpp(DppConfig::with_default_caps(scenario, v)?),
            slots,
            parallel: false,
        })
    }
}

/// Metrics after slot `slot` (0-based). Averages cover slots 0..=slot, so the
/// averaging horizon is t = slot + 1; queue columns are the values after the
/// slot's update, i.e. at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics<T> {
    pub slot: u64,
    pub x: Vec<T>,
    pub xbar: Vec<T>,
    pub util_inst: T,
    pub util_avg: T,
    pub util_jensen: T,
    /// U* − util_avg, present when an oracle is attached.
    pub gap: Option<T>,
    pub max_q: T,
    pub max_z: T,
    pub max_y: T,
    pub lyapunov: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub tag: String,
    /// External session ids, in session order.
    pub session_ids: Vec<usize>,
    pub rows: Vec<SlotMetrics<T>>,
}

impl<T: Real> Trace<T> {
    pub fn last(&self) -> &SlotMetrics<T> {
        self.rows.last().expect("traces have at least one slot")
    }
}

/// Tally of one inline invariant over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub evaluated: u64,
    pub failures: u64,
    /// Largest observed excess over the allowed value (≤ 0 when passing).
    pub worst: f64,
    pub first_failure: Option<u64>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            evaluated: 0,
            failures: 0,
            worst: f64::NEG_INFINITY,
            first_failure: None,
        }
    }

    /// Records `excess` = observed − allowed at `slot`.
    fn record(&mut self, slot: u64, excess: f64) {
        self.evaluated += 1;
        self.worst = self.worst.max(excess);
        if !(excess <= 0.0) {
            self.failures += 1;
            self.first_failure.get_or_insert(slot);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{} {} evaluated={} failures={} worst_excess={:e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.evaluated,
                c.failures,
                c.worst
            )?;
            if let Some(s) = c.first_failure {
                write!(f, " first_failure_slot={s}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub trace: Trace<T>,
    pub summary: RunSummary,
    pub final_queues: QueueTriple<T>,
}

/// Names of the inline checks.
pub mod checks {
    pub const DRIFT: &str = "drift_identity";
    pub const WEIGHT: &str = "weight_identity";
    pub const TELESCOPE: &str = "telescoping";
    pub const BOUND_TRANSFER: &str = "queue_bound_transfer";
    pub const GAP_AVG: &str = "gap_average";
    pub const GAP_JENSEN: &str = "gap_jensen";
    pub const VIRTUAL_QUEUE: &str = "virtual_queue_bound";
    pub const BACKLOG: &str = "backlog_bound";
}

/// Runs `config.slots` slots. When an oracle is attached the gap column is
/// filled and, if α is large enough, the utility-gap and queue bounds are
/// checked every slot.
pub fn run<T: Real>(
    scenario: &Scenario<T>,
    config: &RunConfig<T>,
    oracle: Option<&OracleSolution<T>>,
) -> Result<RunOutput<T>> {
    if config.slots == 0 {
        return Err(Error::Contract("a run needs at least one slot".into()));
    }
    let f_count = scenario.session_count();
    let mut queues = QueueTriple::zeros(scenario);
    let mut maxima = QueueMaxima::new(scenario);
    let mut bp = BpState::new(scenario);
    let mut cumulative = DecisionVector::<T>::zeros(scenario);
    let mut x_sum = vec![T::zero(); f_count];
    let mut util_sum = T::zero();
    let mut prev_q = queues.q.clone();
    let mut rows = Vec::with_capacity(config.slots as usize);

    let mut drift_check = Check::new(checks::DRIFT);
    let mut weight_check = Check::new(checks::WEIGHT);
    let mut telescope_check = Check::new(checks::TELESCOPE);
    let mut gap_avg = Check::new(checks::GAP_AVG);
    let mut gap_jensen = Check::new(checks::GAP_JENSEN);
    let mut vq_check = Check::new(checks::VIRTUAL_QUEUE);
    let mut backlog_check = Check::new(checks::BACKLOG);

    // Bound constants for this run, if α is large enough.
    let (gap_zeta, bound_consts) = match (&config.algorithm, oracle) {
        (Algorithm::New(cfg), Some(sol)) => {
            let zeta = compute_zeta(scenario, &sol.y_star, cfg.alpha());
            let gap_zeta = cfg
                .meets(scenario.network(), AlphaMode::UtilityGap)
                .then_some(zeta);
            let bounds = cfg
                .meets(scenario.network(), AlphaMode::QueueBound)
                .then(|| (sol.queue_bound(zeta), zeta));
            (gap_zeta, bounds)
        }
        _ => (None, None),
    };
    let oracle_slack = lit::<T>(2.0 * ORACLE_TOL);

    for slot in 0..config.slots {
        let y = match &config.algorithm {
            Algorithm::New(cfg) => {
                let (outcome, next) = if config.parallel {
                    slot_update_parallel(&bp, scenario, cfg)?
                } else {
                    slot_update(&bp, scenario, cfg)?
                };
                if slot >= 1 {
                    for (f, n, w) in outcome.weights.active() {
                        let expect = lit::<T>(2.0) * bp.q().get(f, n) - prev_q.get(f, n);
                        weight_check.record(slot, wide((w - expect).abs()) - WEIGHT_TOL);
                    }
                }
                prev_q = bp.q().clone();
                bp = next;
                outcome.y
            }
            Algorithm::Dpp(cfg) => {
                dpp_slot_update(&queues.y, scenario, cfg).map_err(|e| e.at_slot(slot))?
            }
        };

        let injection = source_injection(scenario, &y.x);
        let g = net_change(scenario, &injection, &y.mu);
        let q_before = queues.q.clone();
        let predicted = drift(&queues.q, &g);
        queues.advance(scenario, &injection, &y.mu);
        let l_after = lyapunov(&queues.q);
        let measured = lyapunov_change(&q_before, &queues.q);
        drift_check.record(slot, wide((measured - predicted).abs()) - DRIFT_TOL);

        if let Algorithm::New(_) = config.algorithm {
            if bp.q() != &queues.q {
                return Err(Error::Numeric(format!(
                    "slot {slot}: algorithm queues diverged from the tracked virtual queues"
                )));
            }
        }
        cumulative = cumulative.add(&y);
        let t = slot + 1;
        let telescoped = net_change(
            scenario,
            &source_injection(scenario, &cumulative.x),
            &cumulative.mu,
        );
        let worst_tele = queues
            .q
            .active()
            .map(|(f, n, q)| wide((q - telescoped.get(f, n)).abs()))
            .fold(0.0, f64::max);
        telescope_check.record(slot, worst_tele - TELESCOPE_TOL * t as f64);

        maxima.observe(t, &queues);

        let t_real = T::from_u64(t).expect("slot count fits scalar");
        for (s, &v) in x_sum.iter_mut().zip(&y.x) {
            *s = *s + v;
        }
        let xbar: Vec<T> = x_sum.iter().map(|&s| s / t_real).collect();
        let util_inst = total_utility(scenario, &y.x).map_err(|e| e.at_slot(slot))?;
        util_sum = util_sum + util_inst;
        let util_avg = util_sum / t_real;
        let util_jensen = total_utility(scenario, &xbar).map_err(|e| e.at_slot(slot))?;
        let gap = oracle.map(|o| o.u_star - util_avg);

        if let (Some(zeta), Some(sol)) = (gap_zeta, oracle) {
            let allowed = zeta / t_real + oracle_slack;
            gap_avg.record(slot, wide(sol.u_star - util_avg - allowed));
            gap_jensen.record(slot, wide(sol.u_star - util_jensen - allowed));
        }
        if let (Some((qb, zeta)), Some(sol)) = (bound_consts, oracle) {
            vq_check.record(slot, wide(queues.q.max_abs() - qb));
            let worst = queues
                .z
                .active()
                .map(|(_, n, z)| wide(z - sol.backlog_bound(scenario, zeta, n)))
                .fold(f64::NEG_INFINITY, f64::max);
            backlog_check.record(slot, worst);
        }

        rows.push(SlotMetrics {
            slot,
            x: y.x.clone(),
            xbar,
            util_inst,
            util_avg,
            util_jensen,
            gap,
            max_q: queues.q.max_abs(),
            max_z: queues.z.max_abs(),
            max_y: queues.y.max_abs(),
            lyapunov: l_after,
        });
    }

    let mut transfer = Check::new(checks::BOUND_TRANSFER);
    let violations = maxima.check_bound_transfer(maxima.max_abs_q(), scenario);
    transfer.evaluated = 1;
    transfer.worst = violations
        .iter()
        .map(|v| wide(v.value - v.bound))
        .fold(0.0, f64::max);
    if let Some(v) = violations.first() {
        transfer.failures = violations.len() as u64;
        transfer.first_failure = Some(v.slot);
    }

    let mut all = vec![drift_check, telescope_check];
    if matches!(config.algorithm, Algorithm::New(_)) {
        all.push(weight_check);
    }
    all.push(transfer);
    if gap_zeta.is_some() {
        all.push(gap_avg);
        all.push(gap_jensen);
    }
    if bound_consts.is_some() {
        all.push(vq_check);
        all.push(backlog_check);
    }
    Ok(RunOutput {
        trace: Trace {
            tag: config.tag.clone(),
            session_ids: scenario.sessions().iter().map(|s| s.id).collect(),
            rows,
        },
        summary: RunSummary { checks: all },
        final_queues: queues,
    })
}
