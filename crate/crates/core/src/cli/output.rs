//! File outputs: schema-stable CSV, JSON reports, atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::moments::{MomentTrajectory, TrajectorySample};

pub const TRAJECTORY_HEADER: &str = "u,r2,w2,Q,K,V,U,H0,MI4,invR";

/// 17 significant digits, exact for f64; `NaN` for missing values.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    num(v.unwrap_or(f64::NAN))
}

fn trajectory_row(s: &TrajectorySample) -> String {
    [
        num(s.u),
        num(s.r2),
        num(s.w2),
        num(s.q),
        opt_num(s.k_exp),
        opt_num(s.v_exp),
        num(s.u_exp),
        num(s.h0),
        num(s.mi4),
        num(s.inv_r),
    ]
    .join(",")
}

pub fn trajectory_csv(t: &MomentTrajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in t.samples() {
        out.push_str(&trajectory_row(s));
        out.push('\n');
    }
    out
}

/// CSV from a header and rows of numbers.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
