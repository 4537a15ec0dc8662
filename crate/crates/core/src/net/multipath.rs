//! Predetermined multi-path sessions as a plain data transform.
//!
//! Each path j of session f becomes its own sub-session, allowed only on the
//! links of that path. The coupled utility U_f(Σ_j x_{f,j}) is not solved
//! here; the parent map lets callers aggregate.

use std::collections::BTreeSet;

use super::{Scenario, Session};
use crate::error::{Error, Result};
use crate::scalar::Fluid;

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathExpansion<T> {
    pub scenario: Scenario<T>,
    /// `parent[k]` is the base-session index of sub-session k.
    pub parent: Vec<usize>,
    /// `path_index[k]` is j for sub-session k.
    pub path_index: Vec<usize>,
}

/// `paths[f]` lists the paths of base session f, each a sequence of link
/// indices forming a directed walk from Src(f) to Dst(f).
pub fn multipath_expand<T: Fluid>(
    base: &Scenario<T>,
    paths: &[Vec<Vec<usize>>],
) -> Result<MultipathExpansion<T>> {
    if paths.len() != base.session_count() {
        return Err(Error::Validation(format!(
            "{} path lists for {} sessions",
            paths.len(),
            base.session_count()
        )));
    }
    let net = base.network();
    let mut sessions = Vec::new();
    let mut parent = Vec::new();
    let mut path_index = Vec::new();
    let mut allowed = vec![BTreeSet::new(); net.link_count()];

    for (f, session_paths) in paths.iter().enumerate() {
        let s = base.session(f);
        for (j, path) in session_paths.iter().enumerate() {
            check_walk(base, f, j, path)?;
            let k = sessions.len();
            for &l in path {
                allowed[l].insert(k);
            }
            sessions.push(Session {
                id: k,
                src: s.src,
                dst: s.dst,
                utility: s.utility,
            });
            parent.push(f);
            path_index.push(j);
        }
    }
    let scenario = Scenario::new(
        net.clone(),
        sessions,
        allowed.into_iter().map(Some).collect(),
    )?;
    Ok(MultipathExpansion {
        scenario,
        parent,
        path_index,
    })
}

fn check_walk<T: Fluid>(base: &Scenario<T>, f: usize, j: usize, path: &[usize]) -> Result<()> {
    let net = base.network();
    let s = base.session(f);
    let bad = |why: String| Error::Validation(format!("session {} path {j}: {why}", s.id));
    if path.is_empty() {
        return Err(bad("empty path".into()));
    }
    let mut at = s.src;
    for &l in path {
        if l >= net.link_count() {
            return Err(bad(format!("unknown link {l}")));
        }
        if !base.is_allowed(l, f) {
            return Err(bad(format!("link {l} is forbidden for the session")));
        }
        let link = net.link(l);
        if link.tail != at {
            return Err(bad(format!(
                "link {l} starts at node {} but the walk is at node {at}",
                link.tail
            )));
        }
        at = link.head;
    }
    if at != s.dst {
        return Err(bad(format!(
            "walk ends at node {at}, not at the destination {}",
            s.dst
        )));
    }
    Ok(())
}
