//! CSV output. Fields never contain commas or quotes, so no escaping is needed.

use std::io::Write;

use crate::runner::{ResultRow, Stat, SummaryRow};

pub const ROWS_HEADER: &str = "method,m,ks,levels,seed,mae,mre,mse,total_bits";
pub const SUMMARY_HEADER: &str =
    "method,m,levels,ks,count,mae_mean,mae_std,mre_mean,mre_std,mse_mean,mse_std,total_bits";

const INFEASIBLE: &str = "infeasible";
const UNDEFINED: &str = "undefined";

pub fn write_rows<W: Write>(rows: &[ResultRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ROWS_HEADER}")?;
    for r in rows {
        let method = r.method.tag();
        match &r.outcome {
            Some(c) => {
                let mre = c.mre.map_or(UNDEFINED.to_string(), |v| v.to_string());
                writeln!(
                    out,
                    "{method},{},{},{},{},{},{mre},{},{}",
                    r.m, c.ks, r.levels, r.seed, c.mae, c.mse, c.total_bits
                )?;
            }
            None => writeln!(
                out,
                "{method},{},{INFEASIBLE},{},{},{INFEASIBLE},{INFEASIBLE},{INFEASIBLE},{INFEASIBLE}",
                r.m, r.levels, r.seed
            )?,
        }
    }
    Ok(())
}

fn stat_fields(s: Option<Stat>, missing: &str) -> String {
    match s {
        Some(s) => format!("{},{}", s.mean, s.std),
        None => format!("{missing},{missing}"),
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in rows {
        let missing = if s.count == 0 { INFEASIBLE } else { UNDEFINED };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.method.tag(),
            s.m,
            s.levels,
            s.ks.map_or(INFEASIBLE.to_string(), |v| v.to_string()),
            s.count,
            stat_fields(s.mae, INFEASIBLE),
            stat_fields(s.mre, missing),
            stat_fields(s.mse, INFEASIBLE),
            s.total_bits.map_or(INFEASIBLE.to_string(), |v| v.to_string()),
        )?;
    }
    Ok(())
}
