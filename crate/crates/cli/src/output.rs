use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use pucci_core::classify::SweepRow;
use pucci_core::flow::Trajectory;
use pucci_core::radial::RadialSolution;
use serde::Serialize;

use crate::commands::CliError;

/// Seventeen significant digits, the same bytes on every run.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,X,Z,region\n");
    for q in &traj.samples {
        let _ = writeln!(s, "{},{},{},{}", num(q.t), num(q.point.x), num(q.point.z), q.region.name());
    }
    s
}

#[derive(Debug, Serialize)]
pub struct EventRecord<'a> {
    pub kind: &'static str,
    pub t: f64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub detail: Option<&'a str>,
}

pub fn events_json(traj: &Trajectory) -> String {
    let records: Vec<EventRecord> = traj
        .events
        .iter()
        .map(|e| EventRecord {
            kind: e.kind.name(),
            t: e.t,
            x: e.point.x,
            z: e.point.z,
            detail: e.detail.as_deref(),
        })
        .collect();
    json(&records)
}

pub fn radial_csv(sol: &RadialSolution) -> String {
    let mut s = String::from("r,u,du,ddu\n");
    for q in &sol.samples {
        let _ = writeln!(s, "{},{},{},{}", num(q.r), num(q.u), num(q.du), num(q.ddu));
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("p,class,detail\n");
    for r in rows {
        let class = r.class.map_or("Unresolved", |c| c.name());
        let _ = writeln!(s, "{},{},{}", num(r.p), class, r.detail.replace([',', '\n'], ";"));
    }
    s
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout when no path (or `-`) is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Usage(format!("stdout: {e}")))
        }
    }
}
