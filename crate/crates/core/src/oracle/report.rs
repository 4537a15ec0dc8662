//! Key-value text form of an [`OracleSolution`].
//!
//! ```text
//! u_star <value>
//! duality_gap <value>
//! max_violation <value>
//! lambda_norm <value>
//! zeta_gap <value>
//! zeta_bound <value>
//! x <session_id> <value>
//! mu <link> <session_id> <value>
//! lambda <session_id> <node> <value>
//! ```
//!
//! `lambda_norm` and the two ζ lines (for the utility-gap and queue-bound α)
//! are informational; parsing recomputes anything derived from y* and λ*.

use std::fmt::Write as _;

use super::OracleSolution;
use crate::backpressure::{default_alpha, AlphaMode};
use crate::error::{Error, Result};
use crate::net::{DecisionVector, Scenario, SessionNodeMap};
use crate::scalar::{wide, Real};

pub fn format_report<T: Real>(scenario: &Scenario<T>, sol: &OracleSolution<T>) -> String {
    let mut out = String::new();
    let zeta = |mode| wide(sol.zeta(scenario, &default_alpha::<T, T>(scenario.network(), mode)));
    let _ = writeln!(out, "u_star {}", wide(sol.u_star));
    let _ = writeln!(out, "duality_gap {}", wide(sol.duality_gap));
    let _ = writeln!(out, "max_violation {}", wide(sol.max_violation));
    let _ = writeln!(out, "lambda_norm {}", wide(sol.lambda_norm()));
    let _ = writeln!(out, "zeta_gap {}", zeta(AlphaMode::UtilityGap));
    let _ = writeln!(out, "zeta_bound {}", zeta(AlphaMode::QueueBound));
    for (f, s) in scenario.sessions().iter().enumerate() {
        let _ = writeln!(out, "x {} {}", s.id, wide(sol.y_star.x[f]));
    }
    for (l, row) in sol.y_star.mu.iter().enumerate() {
        for &f in scenario.allowed(l) {
            let _ = writeln!(out, "mu {l} {} {}", scenario.session(f).id, wide(row[f]));
        }
    }
    for (f, n, v) in sol.lambda_star.active() {
        let _ = writeln!(out, "lambda {} {n} {}", scenario.session(f).id, wide(v));
    }
    out
}

pub fn parse_report<T: Real>(text: &str, scenario: &Scenario<T>) -> Result<OracleSolution<T>> {
    let mut y = DecisionVector::zeros(scenario);
    let mut lambda = SessionNodeMap::zeros(scenario);
    let mut u_star = None;
    let mut gap = None;
    let mut violation = None;
    let mut seen_x = vec![false; scenario.session_count()];

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let num = |tok: &str| -> Result<T> {
            tok.parse()
                .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))
        };
        let index = |tok: &str| -> Result<usize> {
            tok.parse()
                .map_err(|_| Error::parse(line, format!("expected an index, found `{tok}`")))
        };
        let session = |tok: &str| -> Result<usize> {
            let id = index(tok)?;
            scenario
                .session_index(id)
                .ok_or_else(|| Error::parse(line, format!("unknown session {id}")))
        };
        let arity = |n: usize| -> Result<()> {
            if toks.len() == n {
                Ok(())
            } else {
                Err(Error::parse(
                    line,
                    format!("`{}` expects {} fields", toks[0], n - 1),
                ))
            }
        };
        match toks[0] {
            "u_star" => {
                arity(2)?;
                u_star = Some(num(toks[1])?);
            }
            "duality_gap" => {
                arity(2)?;
                gap = Some(num(toks[1])?);
            }
            "max_violation" => {
                arity(2)?;
                violation = Some(num(toks[1])?);
            }
            "lambda_norm" | "zeta_gap" | "zeta_bound" => arity(2)?,
            "x" => {
                arity(3)?;
                let f = session(toks[1])?;
                y.x[f] = num(toks[2])?;
                seen_x[f] = true;
            }
            "mu" => {
                arity(4)?;
                let l = index(toks[1])?;
                if l >= scenario.link_count() {
                    return Err(Error::parse(line, format!("unknown link {l}")));
                }
                let f = session(toks[2])?;
                y.mu[l][f] = num(toks[3])?;
            }
            "lambda" => {
                arity(4)?;
                let f = session(toks[1])?;
                let n = index(toks[2])?;
                if n >= scenario.node_count() || n == scenario.session(f).dst {
                    return Err(Error::parse(line, format!("no multiplier for node {n}")));
                }
                lambda.set(f, n, num(toks[3])?);
            }
            other => return Err(Error::parse(line, format!("unknown key `{other}`"))),
        }
    }
    let missing = |key: &str| Error::Validation(format!("oracle report lacks `{key}`"));
    if let Some(f) = seen_x.iter().position(|s| !s) {
        return Err(Error::Validation(format!(
            "oracle report lacks the rate of session {}",
            scenario.session(f).id
        )));
    }
    Ok(OracleSolution {
        y_star: y,
        u_star: u_star.ok_or_else(|| missing("u_star"))?,
        lambda_star: lambda,
        duality_gap: gap.ok_or_else(|| missing("duality_gap"))?,
        max_violation: violation.ok_or_else(|| missing("max_violation"))?,
    })
}
