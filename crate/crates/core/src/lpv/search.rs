use crate::sdp::{SdpStatus, SolverOptions};

use super::{build_analysis_program, build_synthesis_program, BuildOptions, Certificate, LpvError, LpvSystem, Mode};

/// Which dwell-time program is bisected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwellSearch {
    MinDwell,
    SynthCt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub dwell: f64,
    pub status: SdpStatus,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectResult {
    /// Smallest probed dwell time with a feasible program.
    pub estimate: f64,
    pub certificate: Certificate,
    /// Every probe in evaluation order.
    pub probes: Vec<Probe>,
    pub warnings: Vec<String>,
}

/// Bisects the dwell time on `[lo, hi]` down to width `tol`. Feasibility is
/// assumed monotone in the dwell time; probes contradicting that are reported
/// in `warnings`. Numerical failures count as infeasible.
pub fn bisect_dwell_time(
    sys: &LpvSystem,
    search: DwellSearch,
    opts: BuildOptions,
    lo: f64,
    hi: f64,
    tol: f64,
    solver: &SolverOptions,
) -> Result<BisectResult, LpvError> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(LpvError::InvalidMode(format!("bisection needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(LpvError::InvalidMode(format!("bisection tolerance must be positive, got {tol}")));
    }
    let mut probes = Vec::new();
    let mut probe = |dwell: f64| -> Result<Option<Certificate>, LpvError> {
        let solved = match search {
            DwellSearch::MinDwell => build_analysis_program(sys, Mode::MinDwell { dwell }, opts)?.solve(solver)?,
            DwellSearch::SynthCt => build_synthesis_program(sys, Mode::SynthCt { dwell }, opts)?.solve(solver)?,
        };
        probes.push(Probe { dwell, status: solved.status, margin: solved.margin });
        Ok(solved.certificate)
    };

    let Some(mut best) = probe(hi)? else {
        return Err(LpvError::NoCertificate { lo, hi });
    };
    let (mut a, mut b) = (lo, hi);
    if let Some(c) = probe(lo)? {
        best = c;
        b = lo;
    } else {
        while b - a > tol {
            let mid = 0.5 * (a + b);
            match probe(mid)? {
                Some(c) => {
                    best = c;
                    b = mid;
                }
                None => a = mid,
            }
        }
    }
    let warnings = monotonicity_warnings(&probes);
    Ok(BisectResult { estimate: b, certificate: best, probes, warnings })
}

fn monotonicity_warnings(probes: &[Probe]) -> Vec<String> {
    let mut out = Vec::new();
    for p in probes.iter().filter(|p| p.status != SdpStatus::Feasible) {
        if let Some(q) = probes.iter().find(|q| q.status == SdpStatus::Feasible && q.dwell < p.dwell) {
            out.push(format!(
                "non-monotone feasibility: {} at dwell {} but feasible at smaller dwell {}",
                p.status.as_str(),
                p.dwell,
                q.dwell
            ));
        }
    }
    out
}
