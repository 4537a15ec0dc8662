//! Chain example where instant-forwarding queues stay empty while the actual
//! backlog at a merge node grows linearly in the chain length k.
//!
//! Node layout (all links capacity 1):
//! * node 0, the merge point;
//! * relays 1..=k, a delay line into node 0;
//! * a_i = k + i, a chain a_1 → … → a_k → relay 1;
//! * b_i = 2k + i, a chain b_1 → … → b_k → node 0;
//! * sink = 3k + 1, reached by the single link 0 → sink.
//!
//! The sink makes node 0's one-packet-per-slot output explicit: node 0 is an
//! ordinary relay and its backlog is a Z queue like any other. One unit
//! packet arrives per slot, at a_1, …, a_k and then b_1, …, b_k, repeating
//! with period 2k.
//!
//! Two rate schedules share those arrivals. `instant` moves each packet along
//! its whole path in its arrival slot (μ = 1 on exactly those links) and
//! drives Y. `store_forward` offers μ = 1 on every link every slot and drives
//! Z, where each node can only forward what it held at the start of the slot.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::net::{Link, Network, Scenario, Session, SessionNodeMap, Utility};
use crate::queues::{step_y, step_z, ScriptedPolicy};
use crate::scalar::{fmax, Fluid};

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixB<T> {
    pub k: usize,
    pub scenario: Scenario<T>,
    pub instant: ScriptedPolicy<T>,
    pub store_forward: ScriptedPolicy<T>,
}

impl<T> AppendixB<T> {
    pub fn relay(&self, i: usize) -> usize {
        i
    }

    pub fn a(&self, i: usize) -> usize {
        self.k + i
    }

    pub fn b(&self, i: usize) -> usize {
        2 * self.k + i
    }

    pub fn sink(&self) -> usize {
        3 * self.k + 1
    }
}

pub fn gen_appendix_b<T: Fluid>(k: usize) -> Result<AppendixB<T>> {
    if k == 0 {
        return Err(Error::Contract(
            "the chain length k must be at least 1".into(),
        ));
    }
    let relay = |i: usize| i;
    let a = |i: usize| k + i;
    let b = |i: usize| 2 * k + i;
    let sink = 3 * k + 1;
    let mut links = Vec::new();
    let mut link = |tail, head| {
        links.push(Link {
            tail,
            head,
            capacity: T::one(),
        });
        links.len() - 1
    };
    let a_links: Vec<usize> = (1..=k)
        .map(|i| link(a(i), if i < k { a(i + 1) } else { relay(1) }))
        .collect();
    let relay_links: Vec<usize> = (1..=k)
        .map(|i| link(relay(i), if i < k { relay(i + 1) } else { 0 }))
        .collect();
    let b_links: Vec<usize> = (1..=k)
        .map(|i| link(b(i), if i < k { b(i + 1) } else { 0 }))
        .collect();
    let out = link(0, sink);
    let link_count = links.len();

    let network = Network::new(3 * k + 2, links)?;
    let session = Session {
        id: 0,
        src: a(1),
        dst: sink,
        utility: Utility::weighted_log(T::one())?,
    };
    let scenario = Scenario::new(
        network,
        vec![session],
        vec![None::<BTreeSet<usize>>; link_count],
    )?;

    let mut arrivals = Vec::with_capacity(2 * k);
    let mut instant = Vec::with_capacity(2 * k);
    for i in 0..2 * k {
        let mut arr = SessionNodeMap::zeros(&scenario);
        let mut mu = vec![vec![T::zero()]; link_count];
        let path: Vec<usize> = if i < k {
            arr.set(0, a(i + 1), T::one());
            a_links[i..].iter().chain(&relay_links).copied().collect()
        } else {
            arr.set(0, b(i - k + 1), T::one());
            b_links[i - k..].to_vec()
        };
        for l in path.into_iter().chain([out]) {
            mu[l][0] = T::one();
        }
        arrivals.push(arr);
        instant.push(mu);
    }
    let all_on = vec![vec![vec![T::one()]; link_count]; 2 * k];
    let instant = ScriptedPolicy::new(arrivals.clone(), instant)?;
    let store_forward = ScriptedPolicy::new(arrivals, all_on)?;
    Ok(AppendixB {
        k,
        scenario,
        instant,
        store_forward,
    })
}

/// Queue state after slot `slot` (1-based, as in the arrival timeline).
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixBRow<T> {
    pub slot: u64,
    /// Largest Y over all nodes under the instant schedule.
    pub max_y: T,
    /// Z at node 0 under the store-and-forward schedule.
    pub z_merge: T,
    pub max_z: T,
}

pub fn run_appendix_b<T: Fluid>(ex: &AppendixB<T>, slots: u64) -> Vec<AppendixBRow<T>> {
    let sc = &ex.scenario;
    let mut y = SessionNodeMap::zeros(sc);
    let mut z = SessionNodeMap::zeros(sc);
    let mut rows = Vec::with_capacity(slots as usize);
    for t in 0..slots {
        y = step_y(&y, ex.instant.arrivals(t), ex.instant.mu(t), sc);
        z = step_z(&z, ex.store_forward.arrivals(t), ex.store_forward.mu(t), sc).0;
        let max = |m: &SessionNodeMap<T>| m.active().fold(T::zero(), |acc, (_, _, v)| fmax(acc, v));
        rows.push(AppendixBRow {
            slot: t + 1,
            max_y: max(&y),
            z_merge: z.get(0, 0),
            max_z: max(&z),
        });
    }
    rows
}

/// Text listing of both schedules, one entry per slot of the period.
pub fn format_policies<T: Fluid + std::fmt::Display>(ex: &AppendixB<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "period {}", ex.instant.period());
    for (name, policy) in [
        ("instant", &ex.instant),
        ("store_forward", &ex.store_forward),
    ] {
        let _ = writeln!(out, "policy {name}");
        for i in 0..policy.period() as u64 {
            for (_, n, v) in policy
                .arrivals(i)
                .active()
                .filter(|&(_, _, v)| v != T::zero())
            {
                let _ = writeln!(out, "arrive {} {n} {v}", i + 1);
            }
            for (l, row) in policy.mu(i).iter().enumerate() {
                if row[0] != T::zero() {
                    let _ = writeln!(out, "rate {} {l} {}", i + 1, row[0]);
                }
            }
        }
    }
    out
}
