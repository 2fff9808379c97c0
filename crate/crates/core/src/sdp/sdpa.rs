//! SDPA sparse format (`.dat-s`).
//!
//! The problem maps onto the SDPA dual form `max <F0, Y>` s.t. `<F_i, Y> = c_i`:
//! `F_i = A_i`, `c = b` and `F0 = -C`. Free variables `y` are written as a
//! trailing diagonal block of size `2p` holding `(y+, y-)` with `y = y+ - y-`.
//! On import, a trailing diagonal block with that paired structure is read back
//! as free variables; any other diagonal block becomes `1 x 1` PSD blocks.

use std::fmt::Write as _;

use super::{merge_entries, BlockEntry, EqRow, Objective, SdpError, SdpProblem};

fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn export_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    let nb = p.blocks.len();
    let np = p.n_free;
    let _ = writeln!(out, "{}", p.rows.len());
    let _ = writeln!(out, "{}", nb + usize::from(np > 0));
    let mut sizes: Vec<String> = p.blocks.iter().map(|d| d.to_string()).collect();
    if np > 0 {
        sizes.push(format!("-{}", 2 * np));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = p.rows.iter().map(|r| fmt_num(r.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let mut emit = |matno: usize, entries: &[BlockEntry], free: &[(usize, f64)], sign: f64| {
        for e in merge_entries(entries.to_vec()) {
            let _ = writeln!(out, "{matno} {} {} {} {}", e.block + 1, e.i + 1, e.j + 1, fmt_num(sign * e.value));
        }
        let mut free = free.to_vec();
        free.sort_by_key(|(k, _)| *k);
        for (k, v) in &free {
            let _ = writeln!(out, "{matno} {} {} {} {}", nb + 1, k + 1, k + 1, fmt_num(sign * v));
        }
        for (k, v) in &free {
            let idx = np + k + 1;
            let _ = writeln!(out, "{matno} {} {idx} {idx} {}", nb + 1, fmt_num(-sign * v));
        }
    };
    if let Objective::Minimize { blocks, free } = &p.objective {
        emit(0, blocks, free, -1.0);
    }
    for (i, row) in p.rows.iter().enumerate() {
        emit(i + 1, &row.entries, &row.free, 1.0);
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> SdpError {
    SdpError::Parse { line, msg: msg.into() }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || ",{}()".contains(c)).filter(|t| !t.is_empty())
}

pub fn import_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .skip_while(|(_, l)| l.starts_with('"') || l.starts_with('*'));

    let mut header = |what: &str| lines.next().ok_or_else(|| perr(text.lines().count() + 1, format!("missing {what}")));

    let (ln, l) = header("constraint count")?;
    let m: usize = tokens(l)
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(ln, "expected constraint count"))?;
    let (ln, l) = header("block count")?;
    let nblocks: usize =
        tokens(l).next().and_then(|t| t.parse().ok()).ok_or_else(|| perr(ln, "expected block count"))?;
    let (ln, l) = header("block sizes")?;
    let sizes: Vec<i64> = tokens(l)
        .take(nblocks)
        .map(|t| t.parse::<i64>().map_err(|_| perr(ln, format!("bad block size `{t}`"))))
        .collect::<Result<_, _>>()?;
    if sizes.len() != nblocks || sizes.contains(&0) {
        return Err(perr(ln, format!("expected {nblocks} nonzero block sizes")));
    }
    let (ln, l) = header("objective vector")?;
    let c: Vec<f64> = tokens(l)
        .take(m)
        .map(|t| t.parse::<f64>().map_err(|_| perr(ln, format!("bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if c.len() != m {
        return Err(perr(ln, format!("expected {m} objective entries, found {}", c.len())));
    }

    // (matno, block, i, j, value), zero-based block/i/j.
    let mut raw: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (ln, l) in lines {
        let t: Vec<&str> = tokens(l).collect();
        if t.len() < 5 {
            return Err(perr(ln, "expected `matno blkno i j value`"));
        }
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| perr(ln, format!("bad {what} `{s}`")));
        let matno = int(t[0], "matrix number")?;
        let blk = int(t[1], "block number")?;
        let (i, j) = (int(t[2], "row index")?, int(t[3], "column index")?);
        let v: f64 = t[4].parse().map_err(|_| perr(ln, format!("bad value `{}`", t[4])))?;
        if matno > m {
            return Err(perr(ln, format!("matrix number {matno} exceeds {m}")));
        }
        if blk == 0 || blk > nblocks {
            return Err(perr(ln, format!("block number {blk} out of range")));
        }
        let dim = sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(perr(ln, format!("index ({i}, {j}) outside block {blk} of size {dim}")));
        }
        if sizes[blk - 1] < 0 && i != j {
            return Err(perr(ln, format!("off-diagonal entry in diagonal block {blk}")));
        }
        raw.push((matno, blk - 1, i - 1, j - 1, v));
    }

    // A trailing even diagonal block whose halves are exact negatives encodes free variables.
    let last = nblocks.checked_sub(1);
    let free_block = last.filter(|&b| {
        let s = sizes[b];
        if s >= 0 || s % 2 != 0 {
            return false;
        }
        let half = (s.unsigned_abs() / 2) as usize;
        let mut map = std::collections::BTreeMap::new();
        for &(mt, bb, i, _, v) in &raw {
            if bb == b {
                *map.entry((mt, i)).or_insert(0.0) += v;
            }
        }
        map.iter().all(|(&(mt, i), &v)| {
            let partner = if i < half { i + half } else { i - half };
            map.get(&(mt, partner)).map_or(false, |&w| w == -v)
        })
    });

    let mut blocks = Vec::new();
    let mut block_map: Vec<Vec<usize>> = Vec::with_capacity(nblocks);
    for (b, &s) in sizes.iter().enumerate() {
        if Some(b) == free_block {
            block_map.push(Vec::new());
        } else if s > 0 {
            block_map.push(vec![blocks.len()]);
            blocks.push(s as usize);
        } else {
            let ids = (0..s.unsigned_abs() as usize).map(|k| blocks.len() + k).collect();
            blocks.extend(std::iter::repeat(1).take(s.unsigned_abs() as usize));
            block_map.push(ids);
        }
    }
    let n_free = free_block.map_or(0, |b| (sizes[b].unsigned_abs() / 2) as usize);

    let mut rows: Vec<EqRow> = c.iter().map(|&rhs| EqRow { entries: vec![], free: vec![], rhs }).collect();
    let mut obj_entries = Vec::new();
    let mut obj_free = Vec::new();
    for (matno, b, i, j, v) in raw {
        let sign = if matno == 0 { -1.0 } else { 1.0 };
        let (entries, free) = if matno == 0 {
            (&mut obj_entries, &mut obj_free)
        } else {
            let r = &mut rows[matno - 1];
            (&mut r.entries, &mut r.free)
        };
        if Some(b) == free_block {
            if i < n_free {
                free.push((i, sign * v));
            }
        } else if sizes[b] > 0 {
            entries.push(BlockEntry::new(block_map[b][0], i, j, sign * v));
        } else {
            entries.push(BlockEntry::new(block_map[b][i], 0, 0, sign * v));
        }
    }
    let mut p = SdpProblem { blocks, n_free, rows, objective: Objective::minimize(obj_entries, obj_free) };
    p.canonicalize();
    p.validate()?;
    Ok(p)
}
