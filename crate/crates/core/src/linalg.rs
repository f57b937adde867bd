//! Sparse matrices over `Scalar` and exact rational elimination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::error::Error;
use crate::scalar::{parse_q, Scalar, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Scalar>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SparseMatrix::new(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = SparseMatrix::new(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, Scalar::from_int(*v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.entries.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        if v.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), v);
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: &Scalar) {
        let cur = self.get(i, j);
        self.set(i, j, &cur + v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Scalar)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// self * rhs
    pub fn mul(&self, rhs: &SparseMatrix) -> Result<SparseMatrix, Error> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut by_row: Vec<Vec<(usize, &Scalar)>> = vec![Vec::new(); rhs.rows];
        for ((i, j), v) in &rhs.entries {
            by_row[*i].push((*j, v));
        }
        let mut out = SparseMatrix::new(self.rows, rhs.cols);
        let mut acc: BTreeMap<(usize, usize), Scalar> = BTreeMap::new();
        for ((i, k), a) in &self.entries {
            for (j, b) in &by_row[*k] {
                let e = acc.entry((*i, *j)).or_default();
                *e += &(a * *b);
            }
        }
        for (k, v) in acc {
            if !v.is_zero() {
                out.entries.insert(k, v);
            }
        }
        Ok(out)
    }

    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> SparseMatrix {
        let mut out = SparseMatrix::new(self.rows, self.cols);
        for ((i, j), v) in &self.entries {
            out.entries.insert((row_perm[*i], col_perm[*j]), v.clone());
        }
        out
    }

    fn rational_rows(&self) -> Result<Vec<Vec<(usize, Q)>>, Error> {
        let mut rows: Vec<Vec<(usize, Q)>> = vec![Vec::new(); self.rows];
        for ((i, j), v) in &self.entries {
            let x = v.as_q().ok_or(Error::SymbolicRank(*i, *j))?;
            rows[*i].push((*j, x));
        }
        Ok(rows)
    }

    /// Apply to a column vector.
    pub fn apply(&self, v: &[Q]) -> Result<Vec<Q>, Error> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!("vector of length {} for {} columns", v.len(), self.cols)));
        }
        let mut out = vec![Q::zero(); self.rows];
        for ((i, j), x) in &self.entries {
            let x = x.as_q().ok_or(Error::SymbolicRank(*i, *j))?;
            out[*i] += x * &v[*j];
        }
        Ok(out)
    }

    /// SMS text: header "rows cols M", 1-based triplets, terminator "0 0 0".
    pub fn to_sms(&self) -> String {
        let mut s = format!("{} {} M\n", self.rows, self.cols);
        for ((i, j), v) in &self.entries {
            writeln!(s, "{} {} {}", i + 1, j + 1, v).unwrap();
        }
        s.push_str("0 0 0\n");
        s
    }

    pub fn from_sms(text: &str) -> Result<SparseMatrix, Error> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty SMS input".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[2] != "M" {
            return Err(Error::Parse(format!("line 1: bad SMS header '{header}'")));
        }
        let rows: usize = h[0].parse().map_err(|_| Error::Parse("line 1: bad row count".into()))?;
        let cols: usize = h[1].parse().map_err(|_| Error::Parse("line 1: bad column count".into()))?;
        let mut m = SparseMatrix::new(rows, cols);
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 'i j value'", ln + 1)));
            }
            let i: usize = t[0].parse().map_err(|_| Error::Parse(format!("line {}: bad row", ln + 1)))?;
            let j: usize = t[1].parse().map_err(|_| Error::Parse(format!("line {}: bad column", ln + 1)))?;
            if i == 0 && j == 0 {
                return Ok(m);
            }
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(Error::Parse(format!("line {}: index out of range", ln + 1)));
            }
            let v = parse_q(t[2]).map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            m.set(i - 1, j - 1, Scalar::from_q(v));
        }
        Err(Error::Parse("missing SMS terminator '0 0 0'".into()))
    }
}

fn axpy_row(target: &[(usize, Q)], f: &Q, src: &[(usize, Q)]) -> Vec<(usize, Q)> {
    // target - f * src
    let mut out = Vec::with_capacity(target.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() || j < src.len() {
        if j == src.len() || (i < target.len() && target[i].0 < src[j].0) {
            out.push(target[i].clone());
            i += 1;
        } else if i == target.len() || src[j].0 < target[i].0 {
            out.push((src[j].0, -(f * &src[j].1)));
            j += 1;
        } else {
            let v = &target[i].1 - f * &src[j].1;
            if !v.is_zero() {
                out.push((target[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

struct Elimination {
    rows: Vec<Vec<(usize, Q)>>,
    pivots: Vec<(usize, usize)>,
}

/// Gaussian elimination with a Markowitz-style pivot rule: take a shortest
/// active row, and in it the column with the fewest active entries.
/// With `full`, pivot columns are cleared from every row (reduced echelon form).
fn eliminate(mut rows: Vec<Vec<(usize, Q)>>, ncols: usize, full: bool) -> Elimination {
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncols];
    let mut active: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, _) in r {
            col_rows[*j].insert(i);
        }
        if !r.is_empty() {
            active.insert((r.len(), i));
        }
    }
    let mut is_pivot_row = vec![false; rows.len()];
    let mut pivots = Vec::new();
    while let Some(&(len, pr)) = active.iter().next() {
        active.remove(&(len, pr));
        let pc = rows[pr]
            .iter()
            .map(|(j, _)| *j)
            .min_by_key(|j| (col_rows[*j].iter().filter(|r| !is_pivot_row[**r]).count(), *j))
            .unwrap();
        is_pivot_row[pr] = true;
        let pv = rows[pr].iter().find(|(j, _)| *j == pc).unwrap().1.clone();
        if full {
            let inv = Q::one() / &pv;
            for e in rows[pr].iter_mut() {
                e.1 = &e.1 * &inv;
            }
        }
        let prow = rows[pr].clone();
        let pval = prow.iter().find(|(j, _)| *j == pc).unwrap().1.clone();
        let targets: Vec<usize> = col_rows[pc].iter().copied().filter(|r| *r != pr).collect();
        for t in targets {
            if !full && is_pivot_row[t] {
                continue;
            }
            let tv = rows[t].iter().find(|(j, _)| *j == pc).unwrap().1.clone();
            let f = &tv / &pval;
            let old_len = rows[t].len();
            for (j, _) in &rows[t] {
                col_rows[*j].remove(&t);
            }
            let new = axpy_row(&rows[t], &f, &prow);
            for (j, _) in &new {
                col_rows[*j].insert(t);
            }
            if !is_pivot_row[t] {
                active.remove(&(old_len, t));
                if !new.is_empty() {
                    active.insert((new.len(), t));
                }
            }
            rows[t] = new;
        }
        pivots.push((pr, pc));
    }
    Elimination { rows, pivots }
}

pub fn rank(m: &SparseMatrix) -> Result<usize, Error> {
    let rows = m.rational_rows()?;
    Ok(eliminate(rows, m.cols, false).pivots.len())
}

/// Rank and a kernel basis; checks rank-nullity and that each kernel vector is annihilated.
pub fn rank_and_kernel(m: &SparseMatrix) -> Result<(usize, Vec<Vec<Q>>), Error> {
    let rows = m.rational_rows()?;
    let el = eliminate(rows, m.cols, true);
    let pivot_cols: BTreeMap<usize, usize> = el.pivots.iter().map(|(r, c)| (*c, *r)).collect();
    let mut kernel = Vec::new();
    for f in 0..m.cols {
        if pivot_cols.contains_key(&f) {
            continue;
        }
        let mut v = vec![Q::zero(); m.cols];
        v[f] = Q::one();
        for (c, r) in &pivot_cols {
            if let Some((_, x)) = el.rows[*r].iter().find(|(j, _)| *j == f) {
                v[*c] = -x.clone();
            }
        }
        kernel.push(v);
    }
    let rank = el.pivots.len();
    debug_assert_eq!(rank + kernel.len(), m.cols);
    for v in &kernel {
        if m.apply(v)?.iter().any(|x| !x.is_zero()) {
            return Err(Error::Invalid("kernel vector not annihilated".into()));
        }
    }
    Ok((rank, kernel))
}

/// dim ker(d_out) - rank(d_in) for V --d_out--> and --d_in--> V.
pub fn betti_dims(d_in: &SparseMatrix, d_out: &SparseMatrix) -> Result<usize, Error> {
    if d_in.rows != d_out.cols {
        return Err(Error::Dimension(format!(
            "d_in has {} rows but d_out has {} columns",
            d_in.rows, d_out.cols
        )));
    }
    let comp = d_out.mul(d_in)?;
    if let Some(((_, j), _)) = comp.entries().next() {
        return Err(Error::NotAComplex(*j));
    }
    let r_out = rank(d_out)?;
    let r_in = rank(d_in)?;
    Ok(d_out.cols - r_out - r_in)
}
