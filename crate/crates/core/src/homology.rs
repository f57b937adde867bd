//! Finite windows of chain complexes: matrix assembly, d² checks and cohomology tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::Error;
use crate::graph::LinComb;
use crate::linalg::{rank, SparseMatrix};
use crate::scalar::Scalar;
use crate::Result;

pub struct ComplexWindow<K: Ord + Clone> {
    pub label: String,
    /// +1 for cohomological differentials, -1 for homological ones.
    pub step: i32,
    pub bases: BTreeMap<i32, Vec<K>>,
    /// d restricted to degree D, as a matrix from basis D to basis D + step.
    pub matrices: BTreeMap<i32, SparseMatrix>,
    /// Degrees whose differential leaves the enumerated window.
    pub truncated: BTreeSet<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dim {
    Exact(usize),
    /// Window not closed at this degree: lower and upper bound.
    Bounds(usize, usize),
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Exact(d) => write!(f, "{d}"),
            Dim::Bounds(a, b) => write!(f, "[{a}, {b}]"),
        }
    }
}

/// First basis element whose image under d∘d is nonzero, with that image.
pub fn d_squared_witness<K, F>(basis: &[K], d: F) -> Option<(K, LinComb<K>)>
where
    K: Ord + Clone + Send + Sync,
    F: Fn(&LinComb<K>) -> LinComb<K> + Sync,
{
    basis
        .par_iter()
        .map(|k| {
            let x = LinComb::single(k.clone(), Scalar::one());
            let dd = d(&d(&x));
            (k, dd)
        })
        .find_first(|(_, dd)| !dd.is_zero())
        .map(|(k, dd)| (k.clone(), dd))
}

/// Build the matrices of `d` on the given bases and verify d² = 0 between
/// consecutive windowed degrees.
pub fn assemble_complex<K, F>(label: &str, step: i32, bases: BTreeMap<i32, Vec<K>>, d: F) -> Result<ComplexWindow<K>>
where
    K: Ord + Clone + Send + Sync + fmt::Debug,
    F: Fn(&K) -> LinComb<K> + Sync,
{
    let mut matrices = BTreeMap::new();
    let mut truncated = BTreeSet::new();
    for (&deg, basis) in &bases {
        let target = bases.get(&(deg + step));
        let index: BTreeMap<&K, usize> =
            target.map(|t| t.iter().enumerate().map(|(i, k)| (k, i)).collect()).unwrap_or_default();
        let images: Vec<LinComb<K>> = basis.par_iter().map(&d).collect();
        let mut m = SparseMatrix::new(target.map_or(0, |t| t.len()), basis.len());
        for (col, img) in images.iter().enumerate() {
            for (k, c) in img.iter() {
                match index.get(k) {
                    Some(&row) => m.set(row, col, c.clone()),
                    None => {
                        truncated.insert(deg);
                    }
                }
            }
        }
        matrices.insert(deg, m);
    }
    for (&deg, m) in &matrices {
        if truncated.contains(&deg) {
            continue;
        }
        if let Some(next) = matrices.get(&(deg + step)) {
            if truncated.contains(&(deg + step)) {
                continue;
            }
            let prod = next.mul(m)?;
            let bad = prod.entries().next().map(|((_, col), _)| *col);
            if let Some(col) = bad {
                return Err(Error::DSquared(format!("{label}: witness {:?}", bases[&deg][col])));
            }
        }
    }
    Ok(ComplexWindow { label: label.to_string(), step, bases, matrices, truncated })
}

impl<K: Ord + Clone> ComplexWindow<K> {
    pub fn dim(&self, deg: i32) -> usize {
        self.bases.get(&deg).map_or(0, |b| b.len())
    }

    /// Cohomology per degree. Degrees whose neighbors are missing from the window or
    /// whose differential is truncated get bounds.
    pub fn cohomology_table(&self) -> Result<BTreeMap<i32, Dim>> {
        let mut out = BTreeMap::new();
        for &deg in self.bases.keys() {
            let dim = self.dim(deg);
            let out_rank = match self.matrices.get(&deg) {
                Some(m) if !self.truncated.contains(&deg) && self.bases.contains_key(&(deg + self.step)) => {
                    Some(rank(m)?)
                }
                _ => None,
            };
            let prev = deg - self.step;
            let in_rank = match self.matrices.get(&prev) {
                Some(m) if !self.truncated.contains(&prev) => Some(rank(m)?),
                _ => None,
            };
            let d = match (out_rank, in_rank) {
                (Some(o), Some(i)) => Dim::Exact(dim - o - i),
                // unknown ranks: cohomology lies between 0 and what the known ranks allow
                (o, i) => match dim - o.unwrap_or(0) - i.unwrap_or(0) {
                    0 => Dim::Exact(0),
                    hi => Dim::Bounds(0, hi),
                },
            };
            out.insert(deg, d);
        }
        Ok(out)
    }

    pub fn is_closed(&self) -> bool {
        self.truncated.is_empty()
    }
}

/// Render a table as aligned text.
pub fn format_table(t: &BTreeMap<i32, Dim>) -> String {
    let mut s = String::from("degree  dim\n");
    for (d, v) in t {
        s.push_str(&format!("{d:>6}  {v}\n"));
    }
    s
}

pub fn table_json(t: &BTreeMap<i32, Dim>) -> serde_json::Value {
    let m: serde_json::Map<String, serde_json::Value> = t
        .iter()
        .map(|(d, v)| {
            let val = match v {
                Dim::Exact(x) => serde_json::json!(x),
                Dim::Bounds(a, b) => serde_json::json!({"lower": a, "upper": b}),
            };
            (d.to_string(), val)
        })
        .collect();
    serde_json::Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn koszul_pair_is_acyclic() {
        // degree 0: a, degree 1: b, d a = b
        let mut bases = BTreeMap::new();
        bases.insert(0, vec!["a"]);
        bases.insert(1, vec!["b"]);
        let w = assemble_complex("pair", 1, bases, |k: &&str| {
            if *k == "a" {
                LinComb::single("b", Scalar::one())
            } else {
                LinComb::new()
            }
        })
        .unwrap();
        let t = w.cohomology_table().unwrap();
        assert_eq!(t[&0], Dim::Exact(0));
        assert_eq!(t[&1], Dim::Exact(0));
    }

    #[test]
    fn detects_nonzero_square() {
        let mut bases = BTreeMap::new();
        bases.insert(0, vec![0]);
        bases.insert(1, vec![1]);
        bases.insert(2, vec![2]);
        let r = assemble_complex("bad", 1, bases, |k: &i32| {
            if *k < 2 {
                LinComb::single(k + 1, Scalar::one())
            } else {
                LinComb::new()
            }
        });
        assert!(matches!(r, Err(Error::DSquared(_))));
        let w = d_squared_witness(&[0, 1, 2], |x: &LinComb<i32>| {
            x.iter().filter(|(k, _)| **k < 2).map(|(k, c)| (k + 1, c.clone())).collect()
        });
        assert_eq!(w.map(|(k, _)| k), Some(0));
    }
}
