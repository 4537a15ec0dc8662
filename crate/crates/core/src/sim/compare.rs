//! Several runs on one scenario against a shared oracle.
//!
//! Spec file lines:
//! ```text
//! slots <T>
//! new <gap|bound> [scale]
//! dpp <V>
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{run, RunConfig, RunOutput};
use crate::backpressure::AlphaMode;
use crate::error::{Error, Result};
use crate::net::Scenario;
use crate::oracle::OracleSolution;
use crate::scalar::{wide, Real};

#[derive(Debug, Clone, PartialEq)]
pub enum CompareEntry<T> {
    New { mode: AlphaMode, scale: T },
    Dpp { v: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec<T> {
    pub slots: u64,
    pub entries: Vec<CompareEntry<T>>,
}

pub fn parse_compare_spec<T: Real>(text: &str) -> Result<CompareSpec<T>> {
    let mut slots = None;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let num = |tok: &str| -> Result<T> {
            let v: T = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("expected a number, found `{tok}`")))?;
            if v > T::zero() && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(
                    line,
                    format!("expected a positive number, found `{tok}`"),
                ))
            }
        };
        match (toks[0], toks.len()) {
            ("slots", 2) => {
                slots = Some(
                    toks[1]
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad slot count `{}`", toks[1])))?,
                )
            }
            ("new", 2 | 3) => {
                let mode = AlphaMode::from_token(toks[1]).ok_or_else(|| {
                    Error::parse(line, format!("unknown alpha mode `{}`", toks[1]))
                })?;
                let scale = toks
                    .get(2)
                    .map(|t| num(t))
                    .transpose()?
                    .unwrap_or_else(T::one);
                entries.push(CompareEntry::New { mode, scale });
            }
            ("dpp", 2) => entries.push(CompareEntry::Dpp { v: num(toks[1])? }),
            _ => return Err(Error::parse(line, format!("unrecognized line `{body}`"))),
        }
    }
    let slots = slots.ok_or_else(|| Error::Validation("compare spec lacks `slots`".into()))?;
    if slots == 0 || entries.is_empty() {
        return Err(Error::Validation(
            "compare spec needs slots >= 1 and at least one run".into(),
        ));
    }
    Ok(CompareSpec { slots, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome<T> {
    pub runs: Vec<RunOutput<T>>,
}

impl<T: Real> CompareOutcome<T> {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(|r| r.summary.passed())
    }

    pub fn by_tag(&self, tag: &str) -> Option<&RunOutput<T>> {
        self.runs.iter().find(|r| r.trace.tag == tag)
    }

    /// One block per run: terminal gap, utilities, total actual backlog and
    /// the inline checks.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.runs {
            let last = r.trace.last();
            let _ = writeln!(out, "run {}", r.trace.tag);
            let _ = writeln!(out, "  slots {}", r.trace.rows.len());
            if let Some(g) = last.gap {
                let _ = writeln!(out, "  terminal_gap {}", wide(g));
            }
            let _ = writeln!(out, "  util_avg {}", wide(last.util_avg));
            let _ = writeln!(out, "  util_jensen {}", wide(last.util_jensen));
            let _ = writeln!(
                out,
                "  total_backlog {}",
                wide(r.final_queues.z.sum_active())
            );
            let _ = writeln!(out, "  max_backlog {}", wide(last.max_z));
            for line in r.summary.to_string().lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        out
    }
}

/// Runs every entry of `spec` (in parallel) with the shared oracle.
pub fn compare<T: Real>(
    scenario: &Scenario<T>,
    spec: &CompareSpec<T>,
    oracle: &OracleSolution<T>,
) -> Result<CompareOutcome<T>> {
    let configs = spec
        .entries
        .iter()
        .map(|e| match *e {
            CompareEntry::New { mode, scale } => {
                RunConfig::new_alg(scenario, mode, scale, spec.slots)
            }
            CompareEntry::Dpp { v } => RunConfig::dpp(scenario, v, spec.slots),
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = configs
        .par_iter()
        .map(|cfg| run(scenario, cfg, Some(oracle)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareOutcome { runs })
}
