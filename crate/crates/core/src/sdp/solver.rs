//! Infeasible primal-dual interior-point method with Nesterov-Todd scaling and
//! Mehrotra predictor-corrector steps.
//!
//! Free variables are kept free: the Newton system is solved as a saddle-point
//! system whose Schur block is block-diagonal over groups of rows that share
//! PSD blocks.

use nalgebra::DMatrix;

use super::linalg::{
    backward_solve, cholesky_perturbed, forward_solve, frob_inner, independent_columns, lower_inverse, max_step,
    min_eigenvalue, symmetrize,
};
use super::{
    IterStats, Objective, Residuals, SdpError, SdpProblem, SdpSolution, SdpStatus, SolverOptions,
};

#[derive(Debug, Clone, Copy)]
struct Ent {
    p: usize,
    q: usize,
    v: f64,
}

/// Internal standard form.
struct Std {
    dims: Vec<usize>,
    row_entries: Vec<Vec<(usize, Ent)>>,
    row_free: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<DMatrix<f64>>,
    cf: Vec<f64>,
    n_free: usize,
}

impl Std {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn a_op(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.row_entries
            .iter()
            .map(|es| es.iter().map(|(b, e)| e.v * x[*b][(e.p, e.q)] * if e.p == e.q { 1.0 } else { 2.0 }).sum())
            .collect()
    }

    fn at_op(&self, z: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (r, es) in self.row_entries.iter().enumerate() {
            if z[r] == 0.0 {
                continue;
            }
            for (b, e) in es {
                out[*b][(e.p, e.q)] += z[r] * e.v;
                if e.p != e.q {
                    out[*b][(e.q, e.p)] += z[r] * e.v;
                }
            }
        }
        out
    }

    fn f_op(&self, y: &[f64]) -> Vec<f64> {
        self.row_free.iter().map(|fs| fs.iter().map(|(k, v)| v * y[*k]).sum()).collect()
    }

    fn ft_op(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (r, fs) in self.row_free.iter().enumerate() {
            for (k, v) in fs {
                out[*k] += v * z[r];
            }
        }
        out
    }
}

/// How the margin variable is represented in the standard form.
#[derive(Debug, Clone, Copy)]
enum Margin {
    None,
    Free(usize),
    Split(usize, usize),
}

impl Margin {
    fn value(&self, x: &[DMatrix<f64>], y: &[f64]) -> f64 {
        match *self {
            Margin::None => f64::NAN,
            Margin::Free(k) => y[k],
            Margin::Split(a, b) => x[a][(0, 0)] - x[b][(0, 0)],
        }
    }
}

/// Recovery information from the standard form back to the user's problem.
struct Prepared {
    std: Std,
    margin: Margin,
    n_orig_blocks: usize,
    /// For each original free variable: std free column, or split block pair, or dropped.
    free_map: Vec<FreeSlot>,
    /// Original row index of each std row (None for trace rows).
    row_origin: Vec<Option<usize>>,
    row_scale: Vec<f64>,
    n_orig_rows: usize,
}

#[derive(Debug, Clone, Copy)]
enum FreeSlot {
    Col(usize),
    Split(usize, usize),
    Dropped,
}

enum Presolve {
    Ready(Prepared),
    Infeasible(String),
}

/// Solves `problem`; see the module docs for the two objective modes.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let prep = match presolve(problem, opts) {
        Presolve::Ready(p) => p,
        Presolve::Infeasible(msg) => return Ok(presolve_infeasible(problem, msg)),
    };
    let run = ipm(&prep.std, prep.margin, opts);
    Ok(recover(&prep, run))
}

fn presolve_infeasible(problem: &SdpProblem, msg: String) -> SdpSolution {
    SdpSolution {
        status: SdpStatus::Infeasible,
        margin: f64::NEG_INFINITY,
        blocks: problem.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        free: vec![0.0; problem.n_free],
        dual: vec![0.0; problem.rows.len()],
        dual_slack: problem.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        trace_duals: Vec::new(),
        primal_obj: f64::NAN,
        dual_obj: f64::NAN,
        residuals: Residuals { primal: f64::INFINITY, dual: f64::NAN, gap: f64::NAN },
        iterations: 0,
        history: Vec::new(),
        message: format!("presolve: {msg}"),
    }
}

fn default_trace_bound(problem: &SdpProblem) -> f64 {
    let bmax = problem.rows.iter().fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    100.0 * bmax.max(1.0)
}

fn presolve(problem: &SdpProblem, opts: &SolverOptions) -> Presolve {
    let feas = matches!(problem.objective, Objective::Feasibility);
    let nb = problem.blocks.len();

    // Dependent free columns carry no information; fix them at zero.
    let kept_free = independent_free_columns(problem);
    let mut free_map = vec![FreeSlot::Dropped; problem.n_free];
    for (col, &k) in kept_free.iter().enumerate() {
        free_map[k] = FreeSlot::Col(col);
    }

    let mut dims = problem.blocks.clone();
    let mut row_entries: Vec<Vec<(usize, Ent)>> = Vec::new();
    let mut row_free: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    let mut row_origin = Vec::new();
    let n_kept = kept_free.len();
    let lambda_col = n_kept;

    for (r, row) in problem.rows.iter().enumerate() {
        let es: Vec<(usize, Ent)> =
            row.entries.iter().map(|e| (e.block, Ent { p: e.i, q: e.j, v: e.value })).collect();
        let mut fs: Vec<(usize, f64)> = row
            .free
            .iter()
            .filter_map(|(k, v)| match free_map[*k] {
                FreeSlot::Col(c) => Some((c, *v)),
                _ => None,
            })
            .collect();
        if feas {
            let tr: f64 = row.entries.iter().filter(|e| e.i == e.j).map(|e| e.value).sum();
            if tr != 0.0 {
                fs.push((lambda_col, tr));
            }
        }
        if es.is_empty() && fs.is_empty() {
            if row.rhs != 0.0 {
                return Presolve::Infeasible(format!("row {r} reads 0 = {}", row.rhs));
            }
            continue;
        }
        row_entries.push(es);
        row_free.push(fs);
        b.push(row.rhs);
        row_origin.push(Some(r));
    }

    let mut n_free = n_kept;
    let mut cf = vec![0.0; n_kept];
    let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    if feas {
        n_free += 1;
        cf.push(-1.0);
        let beta = opts.trace_bound.unwrap_or_else(|| default_trace_bound(problem));
        for j in 0..nb {
            let n = dims[j];
            let slack = dims.len();
            dims.push(1);
            c.push(DMatrix::zeros(1, 1));
            let mut es: Vec<(usize, Ent)> = (0..n).map(|i| (j, Ent { p: i, q: i, v: 1.0 })).collect();
            es.push((slack, Ent { p: 0, q: 0, v: 1.0 }));
            row_entries.push(es);
            row_free.push(vec![(lambda_col, n as f64)]);
            b.push(beta * n as f64);
            row_origin.push(None);
        }
    } else if let Objective::Minimize { blocks, free } = &problem.objective {
        for e in blocks {
            c[e.block][(e.i, e.j)] += e.value;
            if e.i != e.j {
                c[e.block][(e.j, e.i)] += e.value;
            }
        }
        for (k, v) in free {
            match free_map[*k] {
                FreeSlot::Col(col) => cf[col] += v,
                _ => {
                    // A dropped column is a combination of kept ones; its cost
                    // must be consistent with that combination or the problem is unbounded.
                    if let Some(msg) = dropped_cost_conflict(problem, &kept_free, *k) {
                        return Presolve::Infeasible(msg);
                    }
                }
            }
        }
    }

    let mut std = Std { dims, row_entries, row_free, b, c, cf, n_free };

    // Linearly dependent rows: keep an independent subset if consistent.
    match dependent_rows(&std) {
        Ok(drop) if !drop.is_empty() => {
            let keep: Vec<bool> = {
                let mut k = vec![true; std.m()];
                for d in drop {
                    k[d] = false;
                }
                k
            };
            fn filt<T>(v: Vec<T>, keep: &[bool]) -> Vec<T> {
                v.into_iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| x).collect()
            }
            std.row_entries = filt(std.row_entries, &keep);
            std.row_free = filt(std.row_free, &keep);
            std.b = filt(std.b, &keep);
            row_origin = filt(row_origin, &keep);
        }
        Ok(_) => {}
        Err(msg) => return Presolve::Infeasible(msg),
    }

    let mut margin = if feas { Margin::Free(lambda_col) } else { Margin::None };

    // Rows without any PSD entry make the Schur block singular; fall back to
    // splitting every free variable into a difference of nonnegative scalars.
    if std.n_free > 0 && std.row_entries.iter().any(|es| es.is_empty()) {
        let mut pair = Vec::with_capacity(std.n_free);
        for _ in 0..std.n_free {
            let plus = std.dims.len();
            std.dims.extend([1, 1]);
            std.c.push(DMatrix::zeros(1, 1));
            std.c.push(DMatrix::zeros(1, 1));
            pair.push((plus, plus + 1));
        }
        for (r, fs) in std.row_free.iter_mut().enumerate() {
            for (k, v) in fs.drain(..) {
                let (p, m) = pair[k];
                std.row_entries[r].push((p, Ent { p: 0, q: 0, v }));
                std.row_entries[r].push((m, Ent { p: 0, q: 0, v: -v }));
            }
        }
        for (k, &cost) in std.cf.iter().enumerate() {
            let (p, m) = pair[k];
            std.c[p][(0, 0)] = cost;
            std.c[m][(0, 0)] = -cost;
        }
        for slot in free_map.iter_mut() {
            if let FreeSlot::Col(col) = *slot {
                *slot = FreeSlot::Split(pair[col].0, pair[col].1);
            }
        }
        if let Margin::Free(col) = margin {
            margin = Margin::Split(pair[col].0, pair[col].1);
        }
        std.cf.clear();
        std.n_free = 0;
    }

    // Unit infinity-norm rows.
    let mut row_scale = Vec::with_capacity(std.m());
    for r in 0..std.m() {
        let mx = std.row_entries[r]
            .iter()
            .map(|(_, e)| e.v.abs())
            .chain(std.row_free[r].iter().map(|(_, v)| v.abs()))
            .fold(0.0f64, f64::max);
        let s = 1.0 / mx;
        for (_, e) in std.row_entries[r].iter_mut() {
            e.v *= s;
        }
        for (_, v) in std.row_free[r].iter_mut() {
            *v *= s;
        }
        std.b[r] *= s;
        row_scale.push(s);
    }

    Presolve::Ready(Prepared {
        std,
        margin,
        n_orig_blocks: nb,
        free_map,
        row_origin,
        row_scale,
        n_orig_rows: problem.rows.len(),
    })
}

fn free_gram(problem: &SdpProblem) -> DMatrix<f64> {
    let p = problem.n_free;
    let mut g = DMatrix::zeros(p, p);
    for row in &problem.rows {
        for (a, va) in &row.free {
            for (b, vb) in &row.free {
                g[(*a, *b)] += va * vb;
            }
        }
    }
    g
}

fn independent_free_columns(problem: &SdpProblem) -> Vec<usize> {
    if problem.n_free == 0 {
        return Vec::new();
    }
    let mut kept = independent_columns(&free_gram(problem), 1e-10);
    kept.sort_unstable();
    kept
}

fn dropped_cost_conflict(problem: &SdpProblem, kept: &[usize], k: usize) -> Option<String> {
    let g = free_gram(problem);
    let gkk = DMatrix::from_fn(kept.len(), kept.len(), |a, b| g[(kept[a], kept[b])]);
    let gk = nalgebra::DVector::from_fn(kept.len(), |a, _| g[(kept[a], k)]);
    let coef = gkk.cholesky()?.solve(&gk);
    let Objective::Minimize { free, .. } = &problem.objective else { return None };
    let cost = |i: usize| free.iter().find(|(j, _)| *j == i).map(|(_, v)| *v).unwrap_or(0.0);
    let implied: f64 = kept.iter().zip(coef.iter()).map(|(&i, c)| c * cost(i)).sum();
    if (implied - cost(k)).abs() > 1e-9 * (1.0 + cost(k).abs()) {
        Some(format!("free variable {k} is a redundant direction with nonzero cost"))
    } else {
        None
    }
}

/// Rows that are linear combinations of others. Rows owning a column no other
/// remaining row touches are peeled off first; whatever is left is checked densely.
fn dependent_rows(std: &Std) -> Result<Vec<usize>, String> {
    use std::collections::HashMap;
    let m = std.m();
    let mut col_id: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut row_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for r in 0..m {
        let mut cols = Vec::new();
        for (b, e) in &std.row_entries[r] {
            let next = col_id.len();
            let id = *col_id.entry((0, *b, e.p * std.dims[*b] + e.q)).or_insert(next);
            cols.push((id, e.v * if e.p == e.q { 1.0 } else { std::f64::consts::SQRT_2 }));
        }
        for (k, v) in &std.row_free[r] {
            let next = col_id.len();
            let id = *col_id.entry((1, *k, 0)).or_insert(next);
            cols.push((id, *v));
        }
        row_cols.push(cols);
    }
    let ncols = col_id.len();
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); ncols];
    for (r, cols) in row_cols.iter().enumerate() {
        for (c, _) in cols {
            col_rows[*c].push(r);
        }
    }
    let mut count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
    let mut alive = vec![true; m];
    let mut stack: Vec<usize> = (0..ncols).filter(|&c| count[c] == 1).collect();
    while let Some(c) = stack.pop() {
        if count[c] != 1 {
            continue;
        }
        let Some(&r) = col_rows[c].iter().find(|&&r| alive[r]) else { continue };
        alive[r] = false;
        for (c2, _) in &row_cols[r] {
            count[*c2] -= 1;
            if count[*c2] == 1 {
                stack.push(*c2);
            }
        }
    }
    let rest: Vec<usize> = (0..m).filter(|&r| alive[r]).collect();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    // Dense check on the remaining rows.
    let dense: Vec<HashMap<usize, f64>> = rest.iter().map(|&r| row_cols[r].iter().copied().collect()).collect();
    let u = rest.len();
    let mut gram = DMatrix::zeros(u, u);
    for a in 0..u {
        for b in a..u {
            let (small, large) = if dense[a].len() <= dense[b].len() { (&dense[a], &dense[b]) } else { (&dense[b], &dense[a]) };
            let v: f64 = small.iter().filter_map(|(c, x)| large.get(c).map(|y| x * y)).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let mut kept = independent_columns(&gram, 1e-12);
    kept.sort_unstable();
    if kept.len() == u {
        return Ok(Vec::new());
    }
    let gkk = DMatrix::from_fn(kept.len(), kept.len(), |a, b| gram[(kept[a], kept[b])]);
    let chol = gkk.cholesky();
    let mut dropped = Vec::new();
    for d in 0..u {
        if kept.binary_search(&d).is_ok() {
            continue;
        }
        let gk = nalgebra::DVector::from_fn(kept.len(), |a, _| gram[(kept[a], d)]);
        let coef = match &chol {
            Some(c) if !kept.is_empty() => c.solve(&gk),
            _ => nalgebra::DVector::zeros(kept.len()),
        };
        let implied: f64 = kept.iter().zip(coef.iter()).map(|(&k, c)| c * std.b[rest[k]]).sum();
        let bd = std.b[rest[d]];
        let scale = 1.0 + bd.abs() + kept.iter().zip(coef.iter()).map(|(&k, c)| (c * std.b[rest[k]]).abs()).sum::<f64>();
        if (implied - bd).abs() > 1e-9 * scale {
            return Err(format!("equality rows are inconsistent (row {} contradicts a combination of others)", rest[d]));
        }
        dropped.push(rest[d]);
    }
    Ok(dropped)
}

/// Rows grouped by shared PSD blocks; the Schur matrix is block-diagonal over groups.
struct Components {
    groups: Vec<Vec<usize>>,
    local: Vec<usize>,
    /// For each block: rows touching it with their entries in that block.
    block_rows: Vec<Vec<(usize, Vec<Ent>)>>,
    block_group: Vec<Option<usize>>,
    /// Free columns touched by each group.
    group_free: Vec<Vec<usize>>,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn components(std: &Std) -> Components {
    let m = std.m();
    let nb = std.dims.len();
    let mut parent: Vec<usize> = (0..m + nb).collect();
    for (r, es) in std.row_entries.iter().enumerate() {
        for (b, _) in es {
            let (x, y) = (find(&mut parent, r), find(&mut parent, m + b));
            if x != y {
                parent[x] = y;
            }
        }
    }
    let mut root_group: std::collections::HashMap<usize, usize> = Default::default();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut local = vec![0; m];
    let mut group_of_row = vec![0; m];
    for r in 0..m {
        let root = find(&mut parent, r);
        let g = *root_group.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        local[r] = groups[g].len();
        group_of_row[r] = g;
        groups[g].push(r);
    }
    let mut block_rows: Vec<Vec<(usize, Vec<Ent>)>> = vec![Vec::new(); nb];
    for (r, es) in std.row_entries.iter().enumerate() {
        let mut i = 0;
        while i < es.len() {
            let b = es[i].0;
            let mut list = Vec::new();
            while i < es.len() && es[i].0 == b {
                list.push(es[i].1);
                i += 1;
            }
            // Entries of one row may list a block more than once if unsorted; merge by block.
            if let Some(last) = block_rows[b].last_mut().filter(|(rr, _)| *rr == r) {
                last.1.extend(list);
            } else {
                block_rows[b].push((r, list));
            }
        }
    }
    let block_group = block_rows.iter().map(|rows| rows.first().map(|(r, _)| group_of_row[*r])).collect();
    let mut group_free: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
    for (r, fs) in std.row_free.iter().enumerate() {
        for (k, _) in fs {
            group_free[group_of_row[r]].push(*k);
        }
    }
    for gf in &mut group_free {
        gf.sort_unstable();
        gf.dedup();
    }
    Components { groups, local, block_rows, block_group, group_free }
}

/// NT scaling data of one block.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: Vec<f64>,
    lx_inv: DMatrix<f64>,
    lz_inv: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let lx = super::linalg::cholesky(x.clone())?;
    let lz = super::linalg::cholesky(z.clone())?;
    let svd = (lz.transpose() * &lx).svd(true, true);
    let u_t = svd.v_t?;
    let v = u_t.transpose();
    let d: Vec<f64> = svd.singular_values.iter().copied().collect();
    if d.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let n = x.nrows();
    let lx_inv = lower_inverse(&lx);
    let lz_inv = lower_inverse(&lz);
    let mut g = &lx * &v;
    let mut g_inv = v.transpose() * &lx_inv;
    for j in 0..n {
        let s = d[j].sqrt();
        for i in 0..n {
            g[(i, j)] /= s;
            g_inv[(j, i)] *= s;
        }
    }
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling { g, g_inv, w, d, lx_inv, lz_inv })
}

/// Factorized saddle system `[[M, F], [F^T, 0]]`.
struct Factor {
    chol: Vec<DMatrix<f64>>,
    /// `L_g^{-1} F_g` restricted to the group's free columns.
    v: Vec<DMatrix<f64>>,
    k_chol: Option<DMatrix<f64>>,
    /// Unshifted Schur blocks, used to check and refine solves.
    ms: Vec<DMatrix<f64>>,
}

fn lower_solve_matrix(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    const NB: usize = 64;
    let n = l.nrows();
    let cols = b.ncols();
    let mut k = 0;
    while k < n {
        let nb = NB.min(n - k);
        if k > 0 {
            let upd = l.view((k, 0), (nb, k)) * b.view((0, 0), (k, cols));
            let mut dst = b.view_mut((k, 0), (nb, cols));
            dst -= upd;
        }
        for c in 0..cols {
            for i in k..k + nb {
                let mut s = b[(i, c)];
                for p in k..i {
                    s -= l[(i, p)] * b[(p, c)];
                }
                b[(i, c)] = s / l[(i, i)];
            }
        }
        k += nb;
    }
}

fn build_schur(comps: &Components, scal: &[Scaling]) -> Vec<DMatrix<f64>> {
    let mut ms: Vec<DMatrix<f64>> = comps.groups.iter().map(|g| DMatrix::zeros(g.len(), g.len())).collect();
    for (b, rows) in comps.block_rows.iter().enumerate() {
        let Some(g) = comps.block_group[b] else { continue };
        let w = &scal[b].w;
        let m = &mut ms[g];
        for (ia, (ra, ea)) in rows.iter().enumerate() {
            let la = comps.local[*ra];
            for (rb, eb) in &rows[ia..] {
                let lb = comps.local[*rb];
                let mut acc = 0.0;
                for e in ea {
                    for f in eb {
                        // tr(S_f W S_e W) for symmetric unit matrices S.
                        let base = w[(f.q, e.p)] * w[(e.q, f.p)] + w[(f.q, e.q)] * w[(e.p, f.p)];
                        let off = (e.p != e.q) as i32 + (f.p != f.q) as i32;
                        let c = match off {
                            0 => 0.5,
                            1 => 1.0,
                            _ => 2.0,
                        };
                        acc += e.v * f.v * c * base;
                    }
                }
                m[(la, lb)] += acc;
                if la != lb {
                    m[(lb, la)] += acc;
                }
            }
        }
    }
    ms
}

fn factorize(std: &Std, comps: &Components, ms: Vec<DMatrix<f64>>) -> Option<Factor> {
    let mut chol = Vec::with_capacity(ms.len());
    let mut vs = Vec::with_capacity(ms.len());
    let p = std.n_free;
    let mut k = DMatrix::<f64>::zeros(p, p);
    for (g, m) in ms.iter().enumerate() {
        let (l, _) = cholesky_perturbed(m)?;
        let cols = &comps.group_free[g];
        let mut f = DMatrix::<f64>::zeros(comps.groups[g].len(), cols.len());
        for (li, &r) in comps.groups[g].iter().enumerate() {
            for (kcol, v) in &std.row_free[r] {
                let c = cols.binary_search(kcol).expect("column listed for group");
                f[(li, c)] += v;
            }
        }
        if !cols.is_empty() {
            lower_solve_matrix(&l, &mut f);
            let vtv = f.transpose() * &f;
            for (a, &ca) in cols.iter().enumerate() {
                for (b, &cb) in cols.iter().enumerate() {
                    k[(ca, cb)] += vtv[(a, b)];
                }
            }
        }
        chol.push(l);
        vs.push(f);
    }
    let k_chol = if p > 0 {
        symmetrize(&mut k);
        let (l, _) = cholesky_perturbed(&k)?;
        Some(l)
    } else {
        None
    };
    Some(Factor { chol, v: vs, k_chol, ms })
}

/// [`saddle_solve`] followed by iterative refinement against the unshifted
/// system. Near-singular Schur blocks can factor without a shift and still
/// give a poor solve, so the residual is always checked.
fn saddle_solve_refined(
    std: &Std,
    comps: &Components,
    fac: &Factor,
    h: &[f64],
    rf: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (mut dz, mut dy) = saddle_solve(std, comps, fac, h, rf);
    let ms = &fac.ms;
    let residual = |dz: &[f64], dy: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let fy = std.f_op(dy);
        let mut r1: Vec<f64> = h.iter().zip(&fy).map(|(a, b)| a - b).collect();
        for (g, rows) in comps.groups.iter().enumerate() {
            let zg = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&r| dz[r]));
            let mz = &ms[g] * zg;
            for (li, &r) in rows.iter().enumerate() {
                r1[r] -= mz[li];
            }
        }
        let ftz = std.ft_op(dz);
        let r2: Vec<f64> = rf.iter().zip(&ftz).map(|(a, b)| a - b).collect();
        let n = norm(&r1) + norm(&r2);
        (r1, r2, n)
    };
    let scale = 1.0 + norm(h) + norm(rf);
    let (mut r1, mut r2, mut res) = residual(&dz, &dy);
    for _ in 0..5 {
        if res <= 1e-15 * scale {
            break;
        }
        let (ez, ey) = saddle_solve(std, comps, fac, &r1, &r2);
        let cz: Vec<f64> = dz.iter().zip(&ez).map(|(a, b)| a + b).collect();
        let cy: Vec<f64> = dy.iter().zip(&ey).map(|(a, b)| a + b).collect();
        let (n1, n2, nres) = residual(&cz, &cy);
        if !(nres < res) {
            break;
        }
        (dz, dy, r1, r2, res) = (cz, cy, n1, n2, nres);
    }
    if res > 1e-10 * scale && std.m() + std.n_free <= DENSE_SADDLE_MAX {
        if let Some(sol) = saddle_solve_dense(std, comps, ms, h, rf) {
            let (_, _, dres) = residual(&sol.0, &sol.1);
            if dres < res {
                return sol;
            }
        }
    }
    (dz, dy)
}

/// Largest saddle system that [`saddle_solve_refined`] will solve densely
/// when refinement stalls.
const DENSE_SADDLE_MAX: usize = 1500;

/// Dense full-pivot LU solve of `[[M, F], [F^T, 0]] (dz, dy) = (h, rf)`.
fn saddle_solve_dense(
    std: &Std,
    comps: &Components,
    ms: &[DMatrix<f64>],
    h: &[f64],
    rf: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let (m, p) = (std.m(), std.n_free);
    let mut a = DMatrix::<f64>::zeros(m + p, m + p);
    for (g, rows) in comps.groups.iter().enumerate() {
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &rj) in rows.iter().enumerate() {
                a[(ri, rj)] = ms[g][(i, j)];
            }
        }
    }
    for (r, fs) in std.row_free.iter().enumerate() {
        for &(k, v) in fs {
            a[(r, m + k)] += v;
            a[(m + k, r)] += v;
        }
    }
    let rhs = nalgebra::DVector::from_iterator(m + p, h.iter().chain(rf).copied());
    let sol = a.full_piv_lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, m).iter().copied().collect(), sol.rows(m, p).iter().copied().collect()))
}

/// Solves `M dz + F dy = h`, `F^T dz = rf`.
fn saddle_solve(std: &Std, comps: &Components, fac: &Factor, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(comps.groups.len());
    let mut t = vec![0.0; std.n_free];
    for (g, rows) in comps.groups.iter().enumerate() {
        let mut u: Vec<f64> = rows.iter().map(|&r| h[r]).collect();
        forward_solve(&fac.chol[g], &mut u);
        let cols = &comps.group_free[g];
        if !cols.is_empty() {
            let vt_u = fac.v[g].tr_mul(&nalgebra::DVector::from_column_slice(&u));
            for (a, &c) in cols.iter().enumerate() {
                t[c] += vt_u[a];
            }
        }
        us.push(u);
    }
    let dy = match &fac.k_chol {
        Some(kl) => {
            let mut rhs: Vec<f64> = t.iter().zip(rf).map(|(a, b)| a - b).collect();
            forward_solve(kl, &mut rhs);
            backward_solve(kl, &mut rhs);
            rhs
        }
        None => Vec::new(),
    };
    let mut dz = vec![0.0; std.m()];
    for (g, rows) in comps.groups.iter().enumerate() {
        let mut u = std::mem::take(&mut us[g]);
        let cols = &comps.group_free[g];
        if !cols.is_empty() {
            let dyg = nalgebra::DVector::from_iterator(cols.len(), cols.iter().map(|&c| dy[c]));
            let vdy = &fac.v[g] * dyg;
            for (i, x) in u.iter_mut().enumerate() {
                *x -= vdy[i];
            }
        }
        backward_solve(&fac.chol[g], &mut u);
        for (li, &r) in rows.iter().enumerate() {
            dz[r] = u[li];
        }
    }
    (dz, dy)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dzs: Vec<DMatrix<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    std: &Std,
    comps: &Components,
    fac: &Factor,
    scal: &[Scaling],
    rp: &[f64],
    rd: &[DMatrix<f64>],
    rf: &[f64],
    rc: &[DMatrix<f64>],
) -> Direction {
    let tmp: Vec<DMatrix<f64>> =
        (0..std.dims.len()).map(|j| &rc[j] - &scal[j].w * &rd[j] * &scal[j].w).collect();
    let at = std.a_op(&tmp);
    let h: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a - b).collect();
    let (dz, dy) = saddle_solve_refined(std, comps, fac, &h, rf);
    let atdz = std.at_op(&dz);
    let dzs: Vec<DMatrix<f64>> = rd.iter().zip(&atdz).map(|(r, a)| r - a).collect();
    let dx: Vec<DMatrix<f64>> = (0..std.dims.len())
        .map(|j| {
            let mut m = &rc[j] - &scal[j].w * &dzs[j] * &scal[j].w;
            symmetrize(&mut m);
            m
        })
        .collect();
    Direction { dx, dy, dz, dzs }
}

fn step_lengths(scal: &[Scaling], dir: &Direction) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (j, s) in scal.iter().enumerate() {
        ap = ap.min(max_step(&s.lx_inv, &dir.dx[j]));
        ad = ad.min(max_step(&s.lz_inv, &dir.dzs[j]));
    }
    (ap, ad)
}

/// Raw outcome of the interior-point iterations on the standard form.
struct Run {
    x: Vec<DMatrix<f64>>,
    y: Vec<f64>,
    z: Vec<f64>,
    zs: Vec<DMatrix<f64>>,
    status: SdpStatus,
    margin: f64,
    primal_obj: f64,
    dual_obj: f64,
    residuals: Residuals,
    iterations: usize,
    history: Vec<IterStats>,
    message: String,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mats_norm(m: &[DMatrix<f64>]) -> f64 {
    m.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn ipm(std: &Std, margin: Margin, opts: &SolverOptions) -> Run {
    let nb = std.dims.len();
    let m = std.m();
    let ntot: usize = std.dims.iter().sum();
    let comps = components(std);

    // Starting point.
    let b_norm = norm(&std.b);
    let c_norm = mats_norm(&std.c) + norm(&std.cf);
    let mut a_norm_block = vec![0.0f64; nb];
    let mut xi_ratio = vec![0.0f64; nb];
    for (b, rows) in comps.block_rows.iter().enumerate() {
        for (r, es) in rows {
            let fro = es.iter().map(|e| e.v * e.v * if e.p == e.q { 1.0 } else { 2.0 }).sum::<f64>().sqrt();
            a_norm_block[b] = a_norm_block[b].max(fro);
            xi_ratio[b] = xi_ratio[b].max((1.0 + std.b[*r].abs()) / (1.0 + fro));
        }
    }
    let mut x: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    let mut zs: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let n = std.dims[j] as f64;
        let xi = 10f64.max(n.sqrt()).max(n * xi_ratio[j]);
        let eta = 10f64.max(n.sqrt()).max(a_norm_block[j].max(std.c[j].norm()));
        x.push(DMatrix::identity(std.dims[j], std.dims[j]) * xi);
        zs.push(DMatrix::identity(std.dims[j], std.dims[j]) * eta);
    }
    let mut y = vec![0.0; std.n_free];
    let mut z = vec![0.0; m];

    let mut history = Vec::new();
    let mut stalls = 0;
    let thr = opts.margin_threshold;
    let mut last = (f64::NAN, f64::NAN, Residuals::default());
    let mut message = String::new();
    let mut status = None;
    let mut iterations = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = std.a_op(&x);
        let fy = std.f_op(&y);
        let rp: Vec<f64> = (0..m).map(|i| std.b[i] - ax[i] - fy[i]).collect();
        let atz = std.at_op(&z);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|j| &std.c[j] - &atz[j] - &zs[j]).collect();
        let ftz = std.ft_op(&z);
        let rf: Vec<f64> = (0..std.n_free).map(|k| std.cf[k] - ftz[k]).collect();
        let pobj: f64 = (0..nb).map(|j| frob_inner(&std.c[j], &x[j])).sum::<f64>()
            + std.cf.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let dobj: f64 = std.b.iter().zip(&z).map(|(a, b)| a * b).sum();
        let xz: f64 = (0..nb).map(|j| frob_inner(&x[j], &zs[j])).sum();
        let mu = xz / ntot.max(1) as f64;
        let res = Residuals {
            primal: norm(&rp) / (1.0 + b_norm),
            dual: (mats_norm(&rd) + norm(&rf)) / (1.0 + c_norm),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };
        last = (pobj, dobj, res);
        let (sp, sd) = history.last().map(|h: &IterStats| (h.step_primal, h.step_dual)).unwrap_or((0.0, 0.0));
        history.push(IterStats {
            iter,
            mu,
            primal_obj: pobj,
            dual_obj: dobj,
            residuals: res,
            step_primal: sp,
            step_dual: sd,
        });
        if opts.verbose {
            eprintln!(
                "{iter:3} mu={mu:9.2e} pobj={pobj:12.5e} dobj={dobj:12.5e} pinf={:8.1e} dinf={:8.1e} gap={:8.1e}",
                res.primal, res.dual, res.gap
            );
        }
        if !(mu.is_finite() && pobj.is_finite() && dobj.is_finite()) {
            message = "non-finite iterate".into();
            break;
        }
        let converged = res.primal <= opts.tol && res.dual <= opts.tol && res.gap <= opts.tol;
        let lam = margin.value(&x, &y);
        if !matches!(margin, Margin::None) {
            let cert_feasible = res.primal <= opts.tol && lam > thr;
            let cert_infeasible = res.dual <= opts.tol && -dobj < -thr;
            if converged || (opts.early_exit && (cert_feasible || cert_infeasible)) {
                status = Some(if cert_feasible {
                    SdpStatus::Feasible
                } else if cert_infeasible {
                    SdpStatus::Infeasible
                } else {
                    SdpStatus::Marginal
                });
                break;
            }
        } else if converged {
            status = Some(SdpStatus::Feasible);
            break;
        }
        if iter == opts.max_iter {
            message = format!("iteration limit {} reached", opts.max_iter);
            break;
        }

        let Some(scal) = (0..nb).map(|j| nt_scaling(&x[j], &zs[j])).collect::<Option<Vec<_>>>() else {
            message = "iterate left the cone".into();
            break;
        };
        let ms = build_schur(&comps, &scal);
        let Some(fac) = factorize(std, &comps, ms) else {
            message = "Schur complement factorization failed".into();
            break;
        };

        // Predictor.
        let rc_pred: Vec<DMatrix<f64>> = x.iter().map(|xj| -xj).collect();
        let pred = newton_direction(std, &comps, &fac, &scal, &rp, &rd, &rf, &rc_pred);
        let (ap, ad) = step_lengths(&scal, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let xz_aff: f64 = (0..nb)
            .map(|j| frob_inner(&(&x[j] + &pred.dx[j] * ap), &(&zs[j] + &pred.dzs[j] * ad)))
            .sum();
        let mu_aff = xz_aff / ntot.max(1) as f64;
        let expon = 1f64.max(3.0 * ap.min(ad).powi(2));
        let sigma = (mu_aff / mu).max(0.0).powf(expon).min(1.0);

        // Corrector.
        let rc_corr: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| {
                let s = &scal[j];
                let dxt = &s.g_inv * &pred.dx[j] * s.g_inv.transpose();
                let dzt = s.g.transpose() * &pred.dzs[j] * &s.g;
                let prod = &dxt * &dzt;
                let n = std.dims[j];
                let mut rt = DMatrix::zeros(n, n);
                for a in 0..n {
                    for c in 0..n {
                        let mut h = -0.5 * (prod[(a, c)] + prod[(c, a)]);
                        if a == c {
                            h += sigma * mu - s.d[a] * s.d[a];
                        }
                        rt[(a, c)] = 2.0 * h / (s.d[a] + s.d[c]);
                    }
                }
                let mut rc = &s.g * rt * s.g.transpose();
                symmetrize(&mut rc);
                rc
            })
            .collect();
        let dir = newton_direction(std, &comps, &fac, &scal, &rp, &rd, &rf, &rc_corr);
        let (ap_max, ad_max) = step_lengths(&scal, &dir);
        let ap = (opts.step_fraction * ap_max).min(1.0);
        let ad = (opts.step_fraction * ad_max).min(1.0);
        if let Some(h) = history.last_mut() {
            h.step_primal = ap;
            h.step_dual = ad;
        }
        for j in 0..nb {
            x[j] += &dir.dx[j] * ap;
            zs[j] += &dir.dzs[j] * ad;
            symmetrize(&mut x[j]);
            symmetrize(&mut zs[j]);
        }
        for (yk, d) in y.iter_mut().zip(&dir.dy) {
            *yk += ap * d;
        }
        for (zk, d) in z.iter_mut().zip(&dir.dz) {
            *zk += ad * d;
        }
        if ap < 1e-7 && ad < 1e-7 {
            stalls += 1;
            if stalls >= 5 {
                message = "steps stalled".into();
                iterations = iter + 1;
                break;
            }
        } else {
            stalls = 0;
        }
    }

    let (pobj, dobj, res) = last;
    let lam = margin.value(&x, &y);
    let status = status.unwrap_or_else(|| {
        // Accept whichever sign certificate is available at exit.
        if !matches!(margin, Margin::None) && res.primal <= opts.tol && lam > thr {
            SdpStatus::Feasible
        } else if !matches!(margin, Margin::None) && res.dual <= opts.tol && -dobj < -thr {
            SdpStatus::Infeasible
        } else {
            SdpStatus::NumericalFailure
        }
    });
    let margin_value = match (margin, status) {
        (Margin::None, _) => x.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
        (_, SdpStatus::Infeasible) => lam.min(-dobj),
        _ => lam,
    };
    Run {
        x,
        y,
        z,
        zs,
        status,
        margin: margin_value,
        primal_obj: pobj,
        dual_obj: dobj,
        residuals: res,
        iterations,
        history,
        message,
    }
}

fn recover(prep: &Prepared, run: Run) -> SdpSolution {
    let nb = prep.n_orig_blocks;
    let shift = match prep.margin {
        Margin::None => 0.0,
        m => m.value(&run.x, &run.y),
    };
    let blocks: Vec<DMatrix<f64>> = (0..nb)
        .map(|j| {
            let n = run.x[j].nrows();
            &run.x[j] + DMatrix::<f64>::identity(n, n) * shift
        })
        .collect();
    let free = prep
        .free_map
        .iter()
        .map(|slot| match *slot {
            FreeSlot::Col(c) => run.y[c],
            FreeSlot::Split(a, b) => run.x[a][(0, 0)] - run.x[b][(0, 0)],
            FreeSlot::Dropped => 0.0,
        })
        .collect();
    let mut dual = vec![0.0; prep.n_orig_rows];
    let mut trace_duals = Vec::new();
    for (r, origin) in prep.row_origin.iter().enumerate() {
        let v = run.z[r] * prep.row_scale[r];
        match origin {
            Some(o) => dual[*o] = v,
            None => trace_duals.push(v),
        }
    }
    SdpSolution {
        status: run.status,
        margin: run.margin,
        blocks,
        free,
        dual,
        dual_slack: run.zs[..nb].to_vec(),
        trace_duals,
        primal_obj: run.primal_obj,
        dual_obj: run.dual_obj,
        residuals: run.residuals,
        iterations: run.iterations,
        history: run.history,
        message: run.message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{check_solution, BlockEntry};

    fn full() -> SolverOptions {
        SolverOptions { early_exit: false, ..Default::default() }
    }

    #[test]
    fn identity_margin_is_one() {
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 1, 1, 1.0)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 0, 1, 1.0)], vec![], 0.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{}", s.message);
        assert!((s.margin - 1.0).abs() < 1e-6, "margin {}", s.margin);
        assert!((&s.blocks[0] - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
        let r = check_solution(&p, &s);
        assert!(r.primal <= 1e-8 && r.dual <= 1e-8 && r.gap <= 1e-8, "{r:?}");
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, SdpStatus::Feasible);
    }

    #[test]
    fn negative_scalar_is_infeasible() {
        let mut p = SdpProblem::new(vec![1], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], -1.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible, "{}", s.message);
        assert!((s.margin + 1.0).abs() < 1e-6, "margin {}", s.margin);
        let fast = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(fast.status, SdpStatus::Infeasible);
        assert!(fast.margin < -1e-7);
    }

    #[test]
    fn schur_complement_optimum() {
        // minimize x11 s.t. x12 = 1, x22 = 1 on a 2x2 PSD block.
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 1, 0.5)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 1, 1, 1.0)], vec![], 1.0);
        p.objective = Objective::minimize(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![]);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{}", s.message);
        assert!((s.blocks[0][(0, 0)] - 1.0).abs() < 1e-6);
        assert!((s.primal_obj - 1.0).abs() < 1e-6);
        let r = check_solution(&p, &s);
        assert!(r.primal <= 1e-8 && r.dual <= 1e-8 && r.gap <= 1e-7, "{r:?}");
    }

    #[test]
    fn free_variables_and_redundant_columns() {
        // X - y1 - y2 = 0 and y1 + y2 = 2 on a 1x1 block: X = 2 feasible, y1,y2 dependent.
        let mut p = SdpProblem::new(vec![1], 2);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![(0, -1.0), (1, -1.0)], 0.0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], 2.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{}", s.message);
        assert!((s.blocks[0][(0, 0)] - 2.0).abs() < 1e-6);
        assert!((s.free[0] + s.free[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn inconsistent_rows_fail_in_presolve() {
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 1, 1.0)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 0, 1, 2.0)], vec![], 3.0);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
        assert!(s.message.starts_with("presolve"), "{}", s.message);
        let mut q = SdpProblem::new(vec![1], 1);
        q.add_row(vec![], vec![], 1.0);
        assert_eq!(solve(&q, &SolverOptions::default()).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn consistent_duplicate_rows_are_dropped() {
        let mut p = SdpProblem::new(vec![2], 0);
        // 2 x12 = 0.5 twice over, so X = [[1, 0.25], [0.25, 1]].
        p.add_row(vec![BlockEntry::new(0, 0, 1, 1.0)], vec![], 0.5);
        p.add_row(vec![BlockEntry::new(0, 0, 1, 2.0)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], 1.0);
        p.add_row(vec![BlockEntry::new(0, 1, 1, 1.0)], vec![], 1.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{}", s.message);
        assert!((s.margin - 0.75).abs() < 1e-6, "margin {}", s.margin);
    }

    #[test]
    fn pure_free_rows_use_split_fallback() {
        let mut p = SdpProblem::new(vec![1], 1);
        p.add_row(vec![], vec![(0, 1.0)], 3.0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![(0, -1.0)], -1.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Feasible, "{}", s.message);
        assert!((s.free[0] - 3.0).abs() < 1e-6);
        assert!((s.blocks[0][(0, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_margin_is_marginal() {
        // x11 = 0 forces the largest shift to be exactly zero.
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], 0.0);
        let s = solve(&p, &full()).unwrap();
        assert_eq!(s.status, SdpStatus::Marginal, "margin {} {}", s.margin, s.message);
    }

    #[test]
    fn iteration_cap_reports_numerical_failure() {
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_row(vec![BlockEntry::new(0, 0, 0, 1.0)], vec![], 1.0);
        let s = solve(&p, &SolverOptions { max_iter: 1, early_exit: false, ..Default::default() }).unwrap();
        assert_eq!(s.status, SdpStatus::NumericalFailure);
    }
}
