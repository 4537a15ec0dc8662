//! Line-oriented scenario format.
//!
//! ```text
//! # comment
//! nodes <N>
//! link <tail> <head> <capacity>
//! session <id> <src> <dst> <wlog|wlog1p> <weight>
//! allow <link_index> <session_id>
//! allow <link_index> none
//! ```
//!
//! Links are indexed 0.. in file order. A link without `allow` lines is open
//! to every session; any `allow` line for a link replaces that default. The
//! `none` form marks a link closed to all sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Link, Network, Scenario, Session, Utility, UtilityKind};
use crate::error::{Error, Result};
use crate::scalar::{wide, Real};

enum AllowEntry {
    Session(usize),
    None,
}

pub fn parse_scenario<T: Real>(text: &str) -> Result<Scenario<T>> {
    let mut nodes: Option<usize> = None;
    let mut links = Vec::new();
    let mut sessions: Vec<(usize, Session<T>)> = Vec::new();
    let mut allows: BTreeMap<usize, Vec<(usize, AllowEntry)>> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let arity = |n: usize| -> Result<()> {
            if toks.len() == n {
                Ok(())
            } else {
                Err(Error::parse(
                    lineno,
                    format!(
                        "`{}` expects {} fields, found {}",
                        toks[0],
                        n - 1,
                        toks.len() - 1
                    ),
                ))
            }
        };
        match toks[0] {
            "nodes" => {
                arity(2)?;
                if nodes.is_some() {
                    return Err(Error::parse(lineno, "duplicate `nodes` line"));
                }
                nodes = Some(uint(lineno, toks[1])?);
            }
            "link" => {
                arity(4)?;
                links.push(Link {
                    tail: uint(lineno, toks[1])?,
                    head: uint(lineno, toks[2])?,
                    capacity: real(lineno, toks[3])?,
                });
            }
            "session" => {
                arity(6)?;
                let kind = UtilityKind::from_token(toks[4]).ok_or_else(|| {
                    Error::parse(lineno, format!("unknown utility kind `{}`", toks[4]))
                })?;
                let weight: T = real(lineno, toks[5])?;
                let utility = Utility::new(kind, weight)?;
                sessions.push((
                    lineno,
                    Session {
                        id: uint(lineno, toks[1])?,
                        src: uint(lineno, toks[2])?,
                        dst: uint(lineno, toks[3])?,
                        utility,
                    },
                ));
            }
            "allow" => {
                arity(3)?;
                let l = uint(lineno, toks[1])?;
                let entry = if toks[2] == "none" {
                    AllowEntry::None
                } else {
                    AllowEntry::Session(uint(lineno, toks[2])?)
                };
                allows.entry(l).or_default().push((lineno, entry));
            }
            other => {
                return Err(Error::parse(lineno, format!("unknown keyword `{other}`")));
            }
        }
    }

    let node_count = nodes.ok_or_else(|| Error::Validation("missing `nodes` line".into()))?;
    let network = Network::new(node_count, links)?;
    let sessions: Vec<Session<T>> = sessions.into_iter().map(|(_, s)| s).collect();

    let mut allowed: Vec<Option<BTreeSet<usize>>> = vec![None; network.link_count()];
    for (l, entries) in allows {
        if l >= network.link_count() {
            let line = entries.first().map(|(n, _)| *n).unwrap_or(0);
            return Err(Error::Validation(format!(
                "line {line}: allow references link {l}, but only {} links exist",
                network.link_count()
            )));
        }
        let mut set = BTreeSet::new();
        for (lineno, entry) in entries {
            if let AllowEntry::Session(id) = entry {
                let f = sessions.iter().position(|s| s.id == id).ok_or_else(|| {
                    Error::Validation(format!(
                        "line {lineno}: allow references unknown session {id}"
                    ))
                })?;
                set.insert(f);
            }
        }
        allowed[l] = Some(set);
    }
    Scenario::new(network, sessions, allowed)
}

/// Writes `scenario` in the format accepted by [`parse_scenario`]. Allow lines
/// are emitted only for links whose set differs from "all sessions".
pub fn serialize_scenario<T: Real>(scenario: &Scenario<T>) -> String {
    let mut out = String::new();
    let net = scenario.network();
    let _ = writeln!(out, "nodes {}", net.node_count());
    for link in net.links() {
        let _ = writeln!(
            out,
            "link {} {} {}",
            link.tail,
            link.head,
            wide(link.capacity)
        );
    }
    for s in scenario.sessions() {
        let _ = writeln!(
            out,
            "session {} {} {} {} {}",
            s.id,
            s.src,
            s.dst,
            s.utility.kind.token(),
            wide(s.utility.weight)
        );
    }
    let all = scenario.session_count();
    for l in 0..net.link_count() {
        let set = scenario.allowed(l);
        if set.len() == all {
            continue;
        }
        if set.is_empty() {
            let _ = writeln!(out, "allow {l} none");
        }
        for &f in set {
            let _ = writeln!(out, "allow {l} {}", scenario.session(f).id);
        }
    }
    out
}

fn uint(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| {
        Error::parse(
            line,
            format!("expected a nonnegative integer, found `{tok}`"),
        )
    })
}

fn real<T: Real>(line: usize, tok: &str) -> Result<T> {
    let v: T = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}
