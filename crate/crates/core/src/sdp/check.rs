use nalgebra::DMatrix;

use super::linalg::{frob_inner, min_eigenvalue};
use super::{BlockEntry, Objective, SdpProblem, SdpSolution};

/// Independent re-evaluation of a solution against the original problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `|A(X) + F y - b| / (1 + |b|)`.
    pub primal: f64,
    /// Relative violation of the dual equality constraints.
    pub dual: f64,
    /// Complementarity `<X, Z>` relative to the objective magnitudes.
    pub gap: f64,
    pub min_eig: Vec<f64>,
}

impl ResidualReport {
    pub fn worst_min_eig(&self) -> f64 {
        self.min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn entry_inner(e: &BlockEntry, x: &[DMatrix<f64>]) -> f64 {
    let v = x[e.block][(e.i, e.j)];
    if e.i == e.j {
        e.value * v
    } else {
        2.0 * e.value * v
    }
}

fn add_entry(out: &mut [DMatrix<f64>], e: &BlockEntry, s: f64) {
    out[e.block][(e.i, e.j)] += s * e.value;
    if e.i != e.j {
        out[e.block][(e.j, e.i)] += s * e.value;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// For feasibility problems the dual is that of the margin formulation:
/// `Z_j = -(A^T z)_j - w_j I`, `F^T z = 0`, `sum_i z_i tr(A_i) + sum_j w_j n_j = -1`,
/// where `w_j` are [`SdpSolution::trace_duals`].
pub fn check_solution(p: &SdpProblem, s: &SdpSolution) -> ResidualReport {
    let nb = p.blocks.len();
    let zero_blocks = || -> Vec<DMatrix<f64>> { p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect() };

    let b: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();
    let rp: Vec<f64> = p
        .rows
        .iter()
        .map(|row| {
            let ax: f64 = row.entries.iter().map(|e| entry_inner(e, &s.blocks)).sum();
            let fy: f64 = row.free.iter().map(|(k, v)| v * s.free.get(*k).copied().unwrap_or(0.0)).sum();
            ax + fy - row.rhs
        })
        .collect();
    let primal = norm(&rp) / (1.0 + norm(&b));

    let mut atz = zero_blocks();
    let mut ftz = vec![0.0; p.n_free];
    for (row, &zi) in p.rows.iter().zip(&s.dual) {
        for e in &row.entries {
            add_entry(&mut atz, e, zi);
        }
        for (k, v) in &row.free {
            ftz[*k] += v * zi;
        }
    }

    let min_eig: Vec<f64> = s.blocks.iter().map(min_eigenvalue).collect();
    let slack = |j: usize| -> DMatrix<f64> {
        s.dual_slack.get(j).cloned().unwrap_or_else(|| DMatrix::zeros(p.blocks[j], p.blocks[j]))
    };

    match &p.objective {
        Objective::Minimize { blocks, free } => {
            let mut c = zero_blocks();
            for e in blocks {
                add_entry(&mut c, e, 1.0);
            }
            let mut cf = vec![0.0; p.n_free];
            for (k, v) in free {
                cf[*k] += v;
            }
            let mut dres = 0.0;
            for j in 0..nb {
                dres += (&c[j] - &atz[j] - slack(j)).norm_squared();
            }
            let rf: Vec<f64> = cf.iter().zip(&ftz).map(|(a, b)| a - b).collect();
            let c_norm = c.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() + norm(&cf);
            let dual = (dres.sqrt() + norm(&rf)) / (1.0 + c_norm);
            let pobj: f64 = blocks.iter().map(|e| entry_inner(e, &s.blocks)).sum::<f64>()
                + free.iter().map(|(k, v)| v * s.free[*k]).sum::<f64>();
            let dobj: f64 = b.iter().zip(&s.dual).map(|(a, z)| a * z).sum();
            let xz: f64 = (0..nb).map(|j| frob_inner(&s.blocks[j], &slack(j))).sum();
            let gap = xz.abs() / (1.0 + pobj.abs() + dobj.abs());
            ResidualReport { primal, dual, gap, min_eig }
        }
        Objective::Feasibility => {
            let lambda = if s.margin.is_finite() { s.margin } else { 0.0 };
            let w = |j: usize| s.trace_duals.get(j).copied().unwrap_or(0.0);
            let mut dres = 0.0;
            let mut lam_row = 1.0;
            for j in 0..nb {
                let n = p.blocks[j];
                let mut r = &atz[j] + slack(j);
                for i in 0..n {
                    r[(i, i)] += w(j);
                }
                dres += r.norm_squared();
                lam_row += w(j) * n as f64;
                dres += w(j).max(0.0).powi(2);
            }
            for (row, &zi) in p.rows.iter().zip(&s.dual) {
                lam_row += zi * row.entries.iter().filter(|e| e.i == e.j).map(|e| e.value).sum::<f64>();
            }
            let dual = (dres.sqrt() + norm(&ftz) + lam_row.abs()) / 2.0;
            let xz: f64 = (0..nb)
                .map(|j| {
                    let n = p.blocks[j];
                    let shifted = &s.blocks[j] - DMatrix::<f64>::identity(n, n) * lambda;
                    frob_inner(&shifted, &slack(j))
                })
                .sum();
            let gap = xz.abs() / (1.0 + lambda.abs() + s.dual_obj.abs());
            ResidualReport { primal, dual, gap, min_eig }
        }
    }
}
