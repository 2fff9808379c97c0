use std::io::{Read, Write};

use super::{HybridTrajectory, SimError};
use crate::lpv::LpvSystem;

fn csv_err(e: impl std::fmt::Display) -> SimError {
    SimError::Csv(e.to_string())
}

/// Writes one row per sample: `time, x1.., u1.., <params>.., [V,] post_jump`.
pub fn write_csv<W: Write>(
    w: W,
    sys: &LpvSystem,
    traj: &HybridTrajectory,
    lyapunov: Option<&[f64]>,
) -> Result<(), SimError> {
    if lyapunov.is_some_and(|v| v.len() != traj.len()) {
        return Err(SimError::Dimension("Lyapunov values do not match the trajectory length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["time".to_string()];
    header.extend((1..=sys.n).map(|i| format!("x{i}")));
    header.extend((1..=sys.m).map(|i| format!("u{i}")));
    header.extend(sys.env.params().iter().map(|v| sys.env.name(v.index).to_string()));
    if lyapunov.is_some() {
        header.push("V".into());
    }
    header.push("post_jump".into());
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i].to_string()];
        row.extend(traj.states[i].iter().map(f64::to_string));
        row.extend(traj.inputs[i].iter().map(f64::to_string));
        row.extend(traj.params[i].iter().map(f64::to_string));
        if let Some(v) = lyapunov {
            row.push(v[i].to_string());
        }
        row.push(u8::from(traj.is_post_jump(i)).to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

/// Column-oriented view of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTrajectory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_csv<R: Read>(r: R) -> Result<CsvTrajectory, SimError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| SimError::Csv(format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvTrajectory { headers, rows })
}
