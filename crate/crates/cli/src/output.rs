//! CSV writers. Floats use Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::Write;

use crate::metrics::RmsePoint;
use crate::runner::RunRecord;

pub const RECORD_HEADER: [&str; 10] = [
    "run",
    "slot",
    "agent",
    "alg",
    "true_x",
    "true_y",
    "est_x",
    "est_y",
    "err",
    "neighbors",
];
pub const SUMMARY_HEADER: [&str; 5] = ["group_key", "alg", "rmse", "ci95", "n"];

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.run.to_string(),
            r.slot.to_string(),
            r.agent.to_string(),
            r.alg.to_string(),
            r.truth.x.to_string(),
            r.truth.y.to_string(),
            r.estimate.x.to_string(),
            r.estimate.y.to_string(),
            r.error().to_string(),
            r.neighbors.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, points: &[RmsePoint]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for p in points {
        w.write_record([
            p.group_key.clone(),
            p.alg.to_string(),
            p.rmse.to_string(),
            p.ci95.to_string(),
            p.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
