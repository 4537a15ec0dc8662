//! CSV form of traces: one row per slot and session, scalar columns repeated.

use std::io::{Read, Write};

use super::{SlotMetrics, Trace};
use crate::error::{Error, Result};
use crate::scalar::{wide, Real};

pub const CSV_HEADER: [&str; 13] = [
    "slot",
    "alg",
    "session",
    "x",
    "xbar",
    "util_inst",
    "util_avg",
    "util_jensen",
    "gap",
    "maxQ",
    "maxZ",
    "maxY",
    "lyapunov",
];

/// Writes the header followed by every trace, in order.
pub fn write_trace_csv<T: Real, W: Write>(out: W, traces: &[&Trace<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for trace in traces {
        for row in &trace.rows {
            let gap = row.gap.map(|g| wide(g).to_string()).unwrap_or_default();
            for (f, id) in trace.session_ids.iter().enumerate() {
                w.write_record([
                    row.slot.to_string(),
                    trace.tag.clone(),
                    id.to_string(),
                    wide(row.x[f]).to_string(),
                    wide(row.xbar[f]).to_string(),
                    wide(row.util_inst).to_string(),
                    wide(row.util_avg).to_string(),
                    wide(row.util_jensen).to_string(),
                    gap.clone(),
                    wide(row.max_q).to_string(),
                    wide(row.max_z).to_string(),
                    wide(row.max_y).to_string(),
                    wide(row.lyapunov).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads traces back, grouped by the `alg` column in order of first
/// appearance.
pub fn read_trace_csv<T: Real, R: Read>(input: R) -> Result<Vec<Trace<T>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::parse(1, "unexpected trace header"));
    }
    let mut traces: Vec<Trace<T>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<T> {
            rec[k].parse().map_err(|_| {
                Error::parse(
                    line,
                    format!("bad number `{}` in column {}", &rec[k], CSV_HEADER[k]),
                )
            })
        };
        let int = |k: usize| -> Result<u64> {
            rec[k].parse().map_err(|_| {
                Error::parse(
                    line,
                    format!("bad integer `{}` in column {}", &rec[k], CSV_HEADER[k]),
                )
            })
        };
        let slot = int(0)?;
        let tag = &rec[1];
        let session = int(2)? as usize;
        let idx = match traces.iter().position(|t| t.tag == tag) {
            Some(i) => i,
            None => {
                traces.push(Trace {
                    tag: tag.to_string(),
                    session_ids: Vec::new(),
                    rows: Vec::new(),
                });
                traces.len() - 1
            }
        };
        let trace = &mut traces[idx];
        let new_slot = trace.rows.last().is_none_or(|r| r.slot != slot);
        if new_slot {
            if trace.rows.last().is_some_and(|r| r.slot >= slot) {
                return Err(Error::parse(line, "slots must increase within a trace"));
            }
            trace.rows.push(SlotMetrics {
                slot,
                x: Vec::new(),
                xbar: Vec::new(),
                util_inst: num(5)?,
                util_avg: num(6)?,
                util_jensen: num(7)?,
                gap: if rec[8].is_empty() {
                    None
                } else {
                    Some(num(8)?)
                },
                max_q: num(9)?,
                max_z: num(10)?,
                max_y: num(11)?,
                lyapunov: num(12)?,
            });
        }
        let first_slot = trace.rows.len() == 1;
        let row = trace.rows.last_mut().expect("row just ensured");
        if first_slot {
            trace.session_ids.push(session);
        } else if trace.session_ids.get(row.x.len()) != Some(&session) {
            return Err(Error::parse(line, format!("unexpected session {session}")));
        }
        row.x.push(num(3)?);
        row.xbar.push(num(4)?);
    }
    Ok(traces)
}
