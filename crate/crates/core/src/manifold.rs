//! Poincaré-duality models of H(M), the comodule Graphs_M and the fiberwise cooperad
//! Graphs_n^M.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graph::{
    canonical_form, front_sign, koszul_sign, Color, Deco, Edge, Graph, GraphComb, GraphJson, LinComb,
    TGraph, Tagger, Word,
};
use crate::kontsevich::{add_pair, collapse_terms, contraction_terms, GraphPair};
use crate::scalar::{parse_q, q, Scalar, Q};
use crate::Result;

/// A decoration multiset (as an ordered list) with a coefficient.
pub type DecoTerm = (Vec<Deco>, Q);

#[derive(Clone, Debug)]
pub struct PDModel {
    pub name: String,
    pub n: i32,
    pub names: Vec<String>,
    pub degrees: Vec<i32>,
    pub unit: usize,
    /// mult[i][j] = e_i · e_j in the basis.
    pub mult: Vec<Vec<Vec<Q>>>,
    pub integral: Vec<Q>,
    /// dual[i] = e_i* in the basis.
    pub dual: Vec<Vec<Q>>,
    /// Δ = Σ c · e_i ⊗ e_j.
    pub diagonal: Vec<(usize, usize, Q)>,
    /// Euler representative as decorations of a single vertex.
    pub euler: Vec<DecoTerm>,
    /// The same class multiplied out in H(M): at most one decoration per term.
    pub euler_h: Vec<DecoTerm>,
    /// Representatives of H(BG) generators: name -> (degree, Graphs_M(1) element).
    pub classes: BTreeMap<String, (i32, GraphComb)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassJson {
    pub degree: i32,
    #[serde(default)]
    pub representative: Vec<GraphJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PDModelJson {
    #[serde(default)]
    pub name: String,
    pub n: i32,
    /// (symbol, degree); the degree-0 entry is the unit.
    pub basis: Vec<(String, i32)>,
    /// [a, b, c, coefficient]: a·b contains coefficient·c. Products with the unit are implied.
    #[serde(default)]
    pub product: Vec<(String, String, String, String)>,
    pub integral: BTreeMap<String, String>,
    #[serde(default)]
    pub classes: BTreeMap<String, ClassJson>,
}

fn sign(x: i32) -> Q {
    if x.rem_euclid(2) == 0 {
        Q::one()
    } else {
        -Q::one()
    }
}

fn invert(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        let inv = Q::one() / a[col][col].clone();
        for x in a[col].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot) {
                    *x = x.clone() - f.clone() * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

impl PDModel {
    pub fn from_json_str(text: &str) -> Result<PDModel> {
        let j: PDModelJson = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e)))?;
        PDModel::build(&j)
    }

    pub fn build(j: &PDModelJson) -> Result<PDModel> {
        let names: Vec<String> = j.basis.iter().map(|b| b.0.clone()).collect();
        let degrees: Vec<i32> = j.basis.iter().map(|b| b.1).collect();
        let dim = names.len();
        let idx = |s: &str| {
            names.iter().position(|x| x == s).ok_or_else(|| Error::UnknownDecoration(s.to_string()))
        };
        let units: Vec<usize> = (0..dim).filter(|&i| degrees[i] == 0).collect();
        if units.len() != 1 {
            return Err(Error::Invalid("basis needs exactly one degree-0 element".into()));
        }
        let unit = units[0];
        let mut mult = vec![vec![vec![Q::zero(); dim]; dim]; dim];
        for i in 0..dim {
            mult[unit][i][i] = Q::one();
            mult[i][unit][i] = Q::one();
        }
        for (a, b, c, v) in &j.product {
            let (a, b, c) = (idx(a)?, idx(b)?, idx(c)?);
            if degrees[a] + degrees[b] != degrees[c] {
                return Err(Error::DegreeMismatch(format!("{} * {} -> {}", names[a], names[b], names[c])));
            }
            mult[a][b][c] = parse_q(v)?;
        }
        let mut integral = vec![Q::zero(); dim];
        for (s, v) in &j.integral {
            let i = idx(s)?;
            if degrees[i] != j.n {
                return Err(Error::DegreeMismatch(format!("integral of {} (degree {})", s, degrees[i])));
            }
            integral[i] = parse_q(v)?;
        }
        let mut pd = PDModel {
            name: j.name.clone(),
            n: j.n,
            names,
            degrees,
            unit,
            mult,
            integral,
            dual: vec![],
            diagonal: vec![],
            euler: vec![],
            euler_h: vec![],
            classes: BTreeMap::new(),
        };
        pd.check_algebra()?;
        let pairing: Vec<Vec<Q>> =
            (0..dim).map(|i| (0..dim).map(|k| pd.integrate(&pd.product(&pd.basis_vec(i), &pd.basis_vec(k)))).collect()).collect();
        // ∫ e_i e_j* = δ_ij with e_j* = Σ_k X_kj e_k, so X = P^{-1}
        let x = invert(&pairing).ok_or(Error::DegeneratePairing)?;
        pd.dual = (0..dim).map(|j| (0..dim).map(|k| x[k][j].clone()).collect()).collect();
        for i in 0..dim {
            for k in 0..dim {
                let c = sign(pd.degrees[i]) * pd.dual[i][k].clone();
                if !c.is_zero() {
                    pd.diagonal.push((i, k, c));
                }
            }
        }
        if pd.n % 2 == 0 {
            let mut e: BTreeMap<Vec<Deco>, Q> = BTreeMap::new();
            for (i, k, c) in &pd.diagonal {
                let ds: Vec<Deco> = [*i, *k].iter().filter(|&&t| t != unit).map(|&t| pd.deco(t)).collect();
                // collect through the canonical ordering of a one-vertex graph
                let g = Graph { n: pd.n, ext: 1, int: 0, edges: vec![], decos: vec![ds] };
                let (cg, s) = canonical_form(&g);
                if s != 0 {
                    *e.entry(cg.decos[0].clone()).or_insert_with(Q::zero) += c.clone() * q(s as i64);
                }
            }
            pd.euler = e.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            let mut h = vec![Q::zero(); dim];
            for (ds, c) in &pd.euler {
                for (k, x) in pd.multiply_decos(ds).into_iter().enumerate() {
                    h[k] += c.clone() * x;
                }
            }
            pd.euler_h = pd.vector_terms(&h);
        }
        for (name, cj) in &j.classes {
            if cj.degree <= 0 || cj.degree % 2 != 0 {
                return Err(Error::DegreeMismatch(format!("class {name} has degree {}", cj.degree)));
            }
            let mut rep = GraphComb::new();
            for gj in &cj.representative {
                let (g, c) = gj.to_graph(&|s| pd.deco_by_name(s))?;
                if g.ext != 1 || g.n != pd.n {
                    return Err(Error::Invalid(format!("representative of {name} must be a one-external graph")));
                }
                if g.degree() != cj.degree {
                    return Err(Error::DegreeMismatch(format!("representative of {name}")));
                }
                rep.add_graph(&g, 1, &c);
            }
            pd.classes.insert(name.clone(), (cj.degree, rep));
        }
        Ok(pd)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.dim()];
        v[i] = Q::one();
        v
    }

    pub fn product(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.dim()];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                for (k, c) in self.mult[i][j].iter().enumerate() {
                    if !c.is_zero() {
                        out[k] += x.clone() * y.clone() * c.clone();
                    }
                }
            }
        }
        out
    }

    pub fn integrate(&self, a: &[Q]) -> Q {
        a.iter().zip(&self.integral).map(|(x, y)| x.clone() * y.clone()).sum()
    }

    fn check_algebra(&self) -> Result<()> {
        let d = self.dim();
        for a in 0..d {
            for b in 0..d {
                let ab = self.product(&self.basis_vec(a), &self.basis_vec(b));
                let ba = self.product(&self.basis_vec(b), &self.basis_vec(a));
                let s = sign(self.degrees[a] * self.degrees[b]);
                if ab != ba.iter().map(|x| x.clone() * s.clone()).collect::<Vec<_>>() {
                    return Err(Error::NotCommutative(self.names[a].clone(), self.names[b].clone()));
                }
                for c in 0..d {
                    let l = self.product(&ab, &self.basis_vec(c));
                    let r = self.product(&self.basis_vec(a), &self.product(&self.basis_vec(b), &self.basis_vec(c)));
                    if l != r {
                        return Err(Error::NotAssociative(
                            self.names[a].clone(),
                            self.names[b].clone(),
                            self.names[c].clone(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn deco(&self, i: usize) -> Deco {
        Deco { id: i as u16, deg: self.degrees[i] as i16 }
    }

    pub fn deco_by_name(&self, s: &str) -> Result<Deco> {
        match self.names.iter().position(|x| x == s) {
            Some(i) if i != self.unit => Ok(self.deco(i)),
            _ => Err(Error::UnknownDecoration(s.to_string())),
        }
    }

    pub fn deco_name(&self, d: Deco) -> String {
        self.names[d.id as usize].clone()
    }

    /// Euler characteristic: ∫ of E evaluated in H(M).
    pub fn euler_characteristic(&self) -> Q {
        self.euler.iter().map(|(ds, c)| c.clone() * self.integrate_decos(ds)).sum()
    }

    /// Graphs with tadpoles are excluded from windows when χ != 0.
    pub fn tadpole_free(&self) -> bool {
        !self.euler_characteristic().is_zero()
    }

    /// Ordered product of decorations in H(M).
    pub fn multiply_decos(&self, ds: &[Deco]) -> Vec<Q> {
        let mut v = self.basis_vec(self.unit);
        for d in ds {
            v = self.product(&v, &self.basis_vec(d.id as usize));
        }
        v
    }

    /// A vector of H(M) as decoration terms; the unit becomes the empty decoration.
    pub fn vector_terms(&self, v: &[Q]) -> Vec<DecoTerm> {
        v.iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (if k == self.unit { vec![] } else { vec![self.deco(k)] }, c.clone()))
            .collect()
    }

    /// ∫ of the ordered product of decorations.
    pub fn integrate_decos(&self, ds: &[Deco]) -> Q {
        self.integrate(&self.multiply_decos(ds))
    }

    /// The Euler representative as a Graphs_M(1) element.
    pub fn euler_graph(&self) -> GraphComb {
        let mut out = GraphComb::new();
        for (ds, c) in &self.euler {
            let g = Graph { n: self.n, ext: 1, int: 0, edges: vec![], decos: vec![ds.clone()] };
            out.add_graph(&g, 1, &Scalar::from_q(c.clone()));
        }
        out
    }

    pub fn graph_from_json(&self, v: &serde_json::Value) -> Result<GraphComb> {
        crate::graph::graph_comb_from_json(v, &|s| self.deco_by_name(s))
    }

    pub fn graph_to_json(&self, x: &GraphComb) -> serde_json::Value {
        crate::graph::graph_comb_to_json(x, &|d| self.deco_name(d))
    }
}

// ---------------------------------------------------------------------------
// Partition functions

/// Values on internal-only connected graphs. Graphs absent from `table` use the naive
/// rule: a single vertex evaluates to the integral of its decorations, anything else to 0.
#[derive(Clone, Debug, Default)]
pub struct PartitionFunction {
    pub table: BTreeMap<Graph, Scalar>,
}

pub fn default_z() -> PartitionFunction {
    PartitionFunction::default()
}

impl PartitionFunction {
    /// Evaluate a graph given in canonical form.
    pub fn eval(&self, pd: &PDModel, g: &Graph) -> Scalar {
        if let Some(v) = self.table.get(g) {
            return v.clone();
        }
        if g.degree() != 0 {
            return Scalar::zero();
        }
        if g.int == 1 && g.edges.is_empty() {
            return Scalar::from_q(pd.integrate_decos(&g.decos[0]));
        }
        Scalar::zero()
    }
}

/// Replace internal-only components by scalars; the remaining graph and the signed factor.
fn evaluate_components(
    g: &Graph,
    eval: &dyn Fn(&Graph) -> Option<Scalar>,
) -> Option<(Graph, Scalar)> {
    let comps = g.internal_components();
    if comps.is_empty() {
        return Some((g.clone(), Scalar::one()));
    }
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    let mut target: Word = Vec::new();
    let mut factor = Scalar::one();
    let mut used_v = vec![false; g.nv()];
    let mut used_e = vec![false; g.edges.len()];
    for comp in &comps {
        let edges: Vec<usize> =
            (0..g.edges.len()).filter(|&j| comp.contains(&(g.edges[j].a as usize))).collect();
        let piece = tg.restrict(&[], comp, &edges);
        target.extend(piece.word());
        let (c, s) = canonical_form(&piece.g);
        if s == 0 {
            return None;
        }
        let z = eval(&c)?;
        factor = &factor * &z.scale(&q(s as i64));
        for v in comp {
            used_v[*v] = true;
        }
        for j in edges {
            used_e[j] = true;
        }
    }
    let ext: Vec<usize> = (0..g.ext).collect();
    let int: Vec<usize> = (g.ext..g.nv()).filter(|v| !used_v[*v]).collect();
    let edges: Vec<usize> = (0..g.edges.len()).filter(|j| !used_e[*j]).collect();
    let rest = tg.restrict(&ext, &int, &edges);
    target.extend(rest.word());
    let s = koszul_sign(&word, &target);
    Some((rest.g, factor.scale(&q(s as i64))))
}

// ---------------------------------------------------------------------------
// Graphs_M

/// Sign of edge-removing terms (cut, ET·) relative to contraction; pinned by
/// d(dead end) = 0.
pub fn removal_sign(n: i32) -> i32 {
    if n % 2 == 0 {
        -1
    } else {
        1
    }
}

/// δ_cut terms: each edge replaced by diagonal decorations on its endpoints.
pub fn cut_terms(pd: &PDModel, g: &Graph) -> Vec<(Graph, Q)> {
    let mut out = Vec::new();
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    for (j, e) in g.edges.iter().enumerate() {
        let (s1, front) = front_sign(&word, &[tg.et[j]]);
        for (a, b, c) in &pd.diagonal {
            let mut h = tg.clone();
            h.remove_edge(j);
            let mut new: Word = Vec::new();
            let mut t = tagger.0 + 1;
            for (v, d) in [(e.a as usize, *a), (e.b as usize, *b)] {
                if d != pd.unit {
                    t += 1;
                    h.push_deco(v, pd.deco(d), t);
                    new.push((t, pd.degrees[d] % 2 != 0));
                }
            }
            new.extend_from_slice(&front[1..]);
            let s = s1 * koszul_sign(&new, &h.word()) * removal_sign(g.n);
            out.push((h.g, c.clone() * q(s as i64)));
        }
    }
    out
}

/// δ_contr + δ_cut on one graph, with internal components evaluated by `z`.
pub fn differential_graph_m(pd: &PDModel, z: &PartitionFunction, g: &Graph) -> GraphComb {
    let mut out = GraphComb::new();
    let eval = |c: &Graph| Some(z.eval(pd, c));
    let mut push = |h: &Graph, c: Scalar| {
        if let Some((r, f)) = evaluate_components(h, &eval) {
            out.add_graph(&r, 1, &(&f * &c));
        }
    };
    for (h, s) in contraction_terms(g, false, &|c| c == Color::Plain) {
        push(&h, Scalar::from_int(s as i64));
    }
    for (h, c) in cut_terms(pd, g) {
        push(&h, Scalar::from_q(c));
    }
    out
}

pub fn differential_graphs_m(pd: &PDModel, z: &PartitionFunction, x: &GraphComb) -> Result<GraphComb> {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        check_decorations(pd, g)?;
        out.add_comb(&differential_graph_m(pd, z, g), c);
    }
    Ok(out)
}

fn check_decorations(pd: &PDModel, g: &Graph) -> Result<()> {
    for d in g.decos.iter().flatten() {
        let i = d.id as usize;
        if i >= pd.dim() || i == pd.unit || pd.degrees[i] != d.deg as i32 {
            return Err(Error::UnknownDecoration(format!("d{}", d.id)));
        }
    }
    if g.n != pd.n {
        return Err(Error::Dimension(format!("graph n = {} vs model n = {}", g.n, pd.n)));
    }
    Ok(())
}

/// All decoration multisets (sorted) of reduced basis elements with total degree ≤ max.
pub fn deco_multisets(pd: &PDModel, max: i32) -> Vec<Vec<Deco>> {
    let reduced: Vec<usize> = (0..pd.dim()).filter(|&i| i != pd.unit).collect();
    let mut out = Vec::new();
    fn rec(pd: &PDModel, red: &[usize], from: usize, left: i32, cur: &mut Vec<Deco>, out: &mut Vec<Vec<Deco>>) {
        out.push(cur.clone());
        for k in from..red.len() {
            let d = pd.deco(red[k]);
            if d.deg as i32 > left || d.deg <= 0 {
                continue;
            }
            // odd decorations cannot repeat
            let next = if d.deg % 2 != 0 { k + 1 } else { k };
            cur.push(d);
            rec(pd, red, next, left - d.deg as i32, cur, out);
            cur.pop();
        }
    }
    rec(pd, &reduced, 0, max, &mut Vec::new(), &mut out);
    out
}

/// Basis of Graphs_M(k) with given edge count, at most `max_int` internal vertices and
/// total decoration degree ≤ `max_deco`.
pub fn graphs_m_basis(pd: &PDModel, k: usize, edges: usize, max_int: usize, max_deco: i32) -> Vec<Graph> {
    let mut out = std::collections::BTreeSet::new();
    let loops = !pd.tadpole_free();
    let ms = deco_multisets(pd, max_deco);
    for m in 0..=max_int {
        let prune = crate::graph::prune_internal_components;
        for shape in crate::graph::enumerate_shapes(pd.n, k, m, edges, &[Color::Plain], loops, &prune) {
            // internal-only components are evaluated away by Z
            if shape.has_internal_component() {
                continue;
            }
            decorate_all(pd, &shape, &ms, max_deco, 0, &mut shape.clone(), &mut out);
        }
    }
    out.into_iter().collect()
}

/// Graphs_M(k) with at most `max_edges` edges. Without a decoration bound the window is
/// infinite as soon as some reduced class has even degree.
pub fn graphs_m_window(pd: &PDModel, k: usize, max_edges: usize, max_int: usize, max_deco: Option<i32>) -> Result<Vec<Graph>> {
    let bound = match max_deco {
        Some(d) => d,
        None => {
            if (0..pd.dim()).any(|i| i != pd.unit && pd.degrees[i] % 2 == 0) {
                return Err(Error::Unbounded(format!("{} has even classes; give a decoration bound", pd.name)));
            }
            (0..pd.dim()).map(|i| pd.degrees[i]).sum()
        }
    };
    let mut out = Vec::new();
    for e in 0..=max_edges {
        out.extend(graphs_m_basis(pd, k, e, max_int, bound));
    }
    Ok(out)
}

fn decorate_all(
    pd: &PDModel,
    shape: &Graph,
    ms: &[Vec<Deco>],
    left: i32,
    v: usize,
    cur: &mut Graph,
    out: &mut std::collections::BTreeSet<Graph>,
) {
    if v == shape.nv() {
        let (c, s) = canonical_form(cur);
        if s != 0 {
            out.insert(c);
        }
        return;
    }
    for m in ms {
        let deg: i32 = m.iter().map(|d| d.deg as i32).sum();
        if deg > left {
            continue;
        }
        cur.decos[v] = m.clone();
        decorate_all(pd, shape, ms, left - deg, v + 1, cur, out);
    }
    cur.decos[v] = Vec::new();
    let _ = pd;
}

/// Glue the one-external graphs a_j at external j (a Graphs_M(k) element).
pub fn external_decorate(pd: &PDModel, slots: &[GraphComb]) -> Result<GraphComb> {
    let k = slots.len();
    let mut acc = GraphComb::from_graph(&Graph::empty(pd.n, k));
    for (j, a) in slots.iter().enumerate() {
        let mut lifted = GraphComb::new();
        for (g, c) in a.iter() {
            if g.ext != 1 {
                return Err(Error::Dimension(format!("slot {} holds an arity-{} graph", j + 1, g.ext)));
            }
            lifted.add_graph(&lift_to_slot(g, k, j), 1, c);
        }
        acc = crate::kontsevich::glue_product(&acc, &lifted)?;
    }
    Ok(acc)
}

/// View a one-external graph as an arity-k graph living at external j.
pub fn lift_to_slot(g: &Graph, k: usize, j: usize) -> Graph {
    let map = |v: u8| if v == 0 { j as u8 } else { v - 1 + k as u8 };
    let mut decos = vec![Vec::new(); k + g.int];
    decos[j] = g.decos[0].clone();
    for i in 0..g.int {
        decos[k + i] = g.decos[1 + i].clone();
    }
    Graph {
        n: g.n,
        ext: k,
        int: g.int,
        edges: g.edges.iter().map(|e| Edge { a: map(e.a), b: map(e.b), color: e.color }).collect(),
        decos,
    }
}

// ---------------------------------------------------------------------------
// Fiberwise model Graphs_n^M(r) = A ⊗ Graphs_n(r) with A = H(M)
//
// Encoded as a graph with r+1 externals: external 0 is the A-slot and carries at most
// one decoration (a basis element of H(M), none for the unit); externals 1..=r are the
// external vertices of the Graphs_n factor.

pub fn fiberwise(a: &[Deco], g: &Graph) -> Graph {
    let mut h = Graph::empty(g.n, g.ext + 1);
    h.int = g.int;
    h.decos = vec![Vec::new(); g.ext + 1 + g.int];
    h.decos[0] = a.to_vec();
    h.edges = g.edges.iter().map(|e| Edge { a: e.a + 1, b: e.b + 1, color: e.color }).collect();
    h
}

/// Multiply out the decorations at vertex v in H(M). They are contiguous in the
/// orientation word and keep their total parity, so no sign arises.
fn reduce_vertex(pd: &PDModel, g: &Graph, v: usize) -> Vec<(Graph, Q)> {
    pd.vector_terms(&pd.multiply_decos(&g.decos[v]))
        .into_iter()
        .map(|(ds, c)| {
            let mut h = g.clone();
            h.decos[v] = ds;
            (h, c)
        })
        .collect()
}

/// Replace the objects `sel` (moved to the front of the word of `tg`) by decorations
/// `new` at vertex `at`; returns the new tagged graph and sign.
fn replace_with_decos(
    tg: &TGraph,
    word: &[(u32, bool)],
    sel: &[u32],
    at: usize,
    new: &[Deco],
    tag0: u32,
    apply: &dyn Fn(&mut TGraph),
) -> (TGraph, i32) {
    let (s1, front) = front_sign(word, sel);
    let mut h = tg.clone();
    apply(&mut h);
    let mut from: Word = Vec::new();
    for (k, d) in new.iter().enumerate() {
        let t = tag0 + k as u32 + 1;
        h.push_deco(at, *d, t);
        from.push((t, d.deg % 2 != 0));
    }
    from.extend_from_slice(&front[sel.len()..]);
    let s = s1 * koszul_sign(&from, &h.word());
    (h, s)
}

/// The T· action: remove one non-loop edge, with its sign, as tagged graphs.
fn tadpole_terms(tg: &TGraph, word: &[(u32, bool)], at: usize, e: &[Deco]) -> Vec<(TGraph, i32)> {
    let mut out = Vec::new();
    for (j, edge) in tg.g.edges.iter().enumerate() {
        if edge.is_loop() {
            continue;
        }
        let (h, s) = replace_with_decos(tg, word, &[tg.et[j]], at, e, 60_000, &|h| {
            h.remove_edge(j);
        });
        out.push((h, s * removal_sign(tg.g.n)));
    }
    out
}

/// d_A + δ_contr + ET· on one encoded fiberwise element (d_A = 0).
pub fn differential_fiberwise_graph(pd: &PDModel, g: &Graph) -> GraphComb {
    let mut out = GraphComb::new();
    for (h, s) in contraction_terms(g, true, &|c| c == Color::Plain) {
        push_fiberwise(pd, &h, &Scalar::from_int(s as i64), &mut out);
    }
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    for (ds, c) in &pd.euler_h {
        for (h, s) in tadpole_terms(&tg, &word, 0, ds) {
            push_fiberwise(pd, &h.g, &Scalar::from_q(c.clone() * q(s as i64)), &mut out);
        }
    }
    out
}

/// Add a raw fiberwise term: reduce the A-slot and apply z to internal-only components
/// (a tadpole becomes E in the A-slot, every other component vanishes).
fn push_fiberwise(pd: &PDModel, h: &Graph, c: &Scalar, out: &mut GraphComb) {
    let comps = h.internal_components();
    if comps.is_empty() {
        for (r, x) in reduce_vertex(pd, h, 0) {
            out.add_graph(&r, 1, &c.scale(&x));
        }
        return;
    }
    let comp = &comps[0];
    let edges: Vec<usize> = (0..h.edges.len()).filter(|&j| comp.contains(&(h.edges[j].a as usize))).collect();
    if comp.len() != 1 || edges.len() != 1 || !h.decos[comp[0]].is_empty() {
        return;
    }
    let mut tagger = Tagger::new();
    let tg = TGraph::new(h, &mut tagger);
    let word = tg.word();
    let v = comp[0];
    let sel = [tg.et[edges[0]], tg.vertex_tag(v)];
    for (ds, e) in &pd.euler_h {
        let (r, s) = replace_with_decos(&tg, &word, &sel, 0, ds, 10_000, &|t| {
            t.remove_edge(edges[0]);
            t.delete_internal(v, None);
        });
        push_fiberwise(pd, &r.g, &c.scale(&(e.clone() * q(s as i64))), out);
    }
}

pub fn differential_fiberwise(pd: &PDModel, x: &GraphComb) -> Result<GraphComb> {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        let bad_slot = g.ext == 0 || g.decos[0].len() > 1 || g.edges.iter().any(|e| e.a == 0 || e.b == 0);
        if bad_slot || (1..g.nv()).any(|v| !g.decos[v].is_empty()) {
            return Err(Error::Invalid("fiberwise element must carry one H(M) element in its A-slot".into()));
        }
        out.add_comb(&differential_fiberwise_graph(pd, g), c);
    }
    Ok(out)
}

/// z on an internal-only connected graph: E for the tadpole, 0 otherwise.
pub fn z_partition(pd: &PDModel, g: &Graph) -> GraphComb {
    let t = crate::kontsevich::tadpole(pd.n);
    let mut out = GraphComb::new();
    if g.ext == 0 && canonical_form(g).0 == t && !g.has_decorations() {
        for (ds, c) in &pd.euler_h {
            let v = Graph { n: pd.n, ext: 1, int: 0, edges: vec![], decos: vec![ds.clone()] };
            out.add_graph(&v, 1, &Scalar::from_q(c.clone()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Coaction Graphs_M(r+s-1) -> Graphs_M(r) ⊗_A Graphs_n^M(s)
//
// The A-factor of the right side is routed to external i of the left factor, so the
// result is a combination of pairs (Graphs_M(r) graph, Graphs_n(s) graph).

pub fn coact_fiberwise(pd: &PDModel, x: &GraphComb, i: usize, s: usize) -> Result<LinComb<GraphPair>> {
    let mut out = LinComb::new();
    for (g, c) in x.iter() {
        check_decorations(pd, g)?;
        if s == 0 || i + s > g.ext {
            return Err(Error::Invalid(format!("slot {} with block size {} in arity {}", i + 1, s, g.ext)));
        }
        for (a, b, sg) in collapse_terms(g, i, s, true) {
            // uncollapsed edges inside the block become tadpoles, absent when χ != 0
            if pd.tadpole_free() && a.has_loop() {
                continue;
            }
            add_pair(&mut out, &a, &b, sg, c);
        }
    }
    Ok(out)
}

/// Cocomposition of the Graphs_n factor; tadpoles are projected away when χ != 0.
pub fn fiber_cocompose(pd: &PDModel, x: &GraphComb, i: usize, s: usize) -> Result<LinComb<GraphPair>> {
    let mut out = crate::kontsevich::cocompose(x, i, s)?;
    if pd.tadpole_free() {
        out.retain(|(a, b), _| !a.has_loop() && !b.has_loop());
    }
    Ok(out)
}

/// The differential on Graphs_M(r) ⊗_A Graphs_n^M(s) in the routed encoding, with the
/// A-slot of the right factor identified with external `i` of the left one.
pub fn pair_differential(pd: &PDModel, z: &PartitionFunction, x: &LinComb<GraphPair>, i: usize) -> LinComb<GraphPair> {
    let mut out = LinComb::new();
    for ((l, r), c) in x.iter() {
        for (dl, cd) in differential_graph_m(pd, z, l).iter() {
            out.add((dl.clone(), r.clone()), &(c * cd));
        }
        let sl = if l.degree() % 2 == 0 { 1 } else { -1 };
        for (h, s) in contraction_terms(r, true, &|col| col == Color::Plain) {
            add_pair(&mut out, l, &h, sl * s, c);
        }
        // ET·: E goes to external i on the left
        let mut tagger = Tagger::new();
        let tl = TGraph::new(l, &mut tagger);
        let tr = TGraph::new(r, &mut tagger);
        let word_r = tr.word();
        let sl_n = if l.degree() % 2 == 0 { 1 } else { -1 };
        for (ds, ec) in &pd.euler_h {
            for (nr, s) in tadpole_terms(&tr, &word_r, 0, &[]) {
                if nr.g.has_internal_component() {
                    continue;
                }
                // E is even: moving it in front of L costs nothing
                let mut nl = tl.clone();
                for (k, d) in ds.iter().enumerate() {
                    nl.push_deco(i, *d, 70_000 + k as u32);
                }
                let mut from: Word = ds.iter().enumerate().map(|(k, d)| (70_000 + k as u32, d.deg % 2 != 0)).collect();
                from.extend(tl.word());
                let s2 = koszul_sign(&from, &nl.word());
                add_pair(&mut out, &nl.g, &nr.g, sl_n * s * s2, &(c * &Scalar::from_q(ec.clone())));
            }
        }
    }
    out
}

pub fn graph_to_json(pd: &PDModel, g: &Graph) -> GraphJson {
    GraphJson::from_graph(g, &Scalar::one(), &|d| pd.deco_name(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn sphere(n: i32) -> PDModel {
        let text = format!(
            r#"{{"name":"S{n}","n":{n},"basis":[["1",0],["v",{n}]],"integral":{{"v":"1"}}}}"#
        );
        PDModel::from_json_str(&text).unwrap()
    }

    #[test]
    fn sphere_diagonal_and_euler() {
        for n in 2..6 {
            let pd = sphere(n);
            let mut d = pd.diagonal.clone();
            d.sort();
            // Δ = 1⊗v + (-1)^n v⊗1
            assert_eq!(d, vec![(0, 1, q(1)), (1, 0, sign(n))]);
            if n % 2 == 0 {
                assert_eq!(pd.euler, vec![(vec![pd.deco(1)], q(2))]);
            } else {
                assert!(pd.euler.is_empty());
            }
        }
    }

    #[test]
    fn degenerate_and_nonassociative_inputs() {
        let bad = r#"{"n":2,"basis":[["1",0],["v",2]],"integral":{}}"#;
        assert_eq!(PDModel::from_json_str(bad).unwrap_err(), Error::DegeneratePairing);
        let text = r#"{"n":2,"basis":[["1",0],["a",1],["b",1],["v",2]],
            "product":[["a","b","v","1"],["b","a","v","1"]],"integral":{"v":"1"}}"#;
        assert!(matches!(PDModel::from_json_str(text), Err(Error::NotCommutative(_, _))));
        let garbled = r#"{"n":2,"basis":[["1",0]"#;
        assert!(matches!(PDModel::from_json_str(garbled), Err(Error::Parse(_))));
    }

    #[test]
    fn naive_partition_function() {
        let pd = sphere(2);
        let z = default_z();
        let v = Graph { n: 2, ext: 0, int: 1, edges: vec![], decos: vec![vec![pd.deco(1)]] };
        assert_eq!(z.eval(&pd, &v), Scalar::one());
        let bare = Graph { n: 2, ext: 0, int: 1, edges: vec![], decos: vec![vec![]] };
        assert!(z.eval(&pd, &bare).is_zero());
        assert!(z.eval(&pd, &crate::kontsevich::theta(2, 3)).is_zero());
    }

    #[test]
    fn cut_of_an_edge_over_s2() {
        let pd = sphere(2);
        let e = GraphComb::from_graph(&Graph::new(2, 2, 0, &[(0, 1)]));
        let d = differential_graphs_m(&pd, &default_z(), &e).unwrap();
        let v = pd.deco(1);
        // Δ = 1⊗v + v⊗1, with the removal sign -1 for n even
        let mut want = GraphComb::new();
        want.add_graph(&Graph::empty(2, 2).with_deco(1, v), 1, &Scalar::from_int(-1));
        want.add_graph(&Graph::empty(2, 2).with_deco(0, v), 1, &Scalar::from_int(-1));
        assert_eq!(d, want);
    }

    #[test]
    fn cut_of_a_tadpole_is_euler() {
        let pd = sphere(2);
        let t = GraphComb::from_graph(&Graph::new(2, 1, 0, &[(0, 0)]));
        let d = differential_graphs_m(&pd, &default_z(), &t).unwrap();
        let e = pd.euler_graph();
        assert!(d == e || d == e.scale(&Scalar::from_int(-1)));
        assert!(!d.is_zero());
    }

    #[test]
    fn dead_end_contracts_in_graphs_m() {
        let pd = sphere(2);
        let v = pd.deco(1);
        let g = Graph::new(2, 1, 1, &[(0, 1)]).with_deco(1, v);
        let contr = contraction_terms(&g, false, &|_| true);
        assert_eq!(contr.len(), 1);
        let at1 = Graph::empty(2, 1).with_deco(0, v);
        assert_eq!(canonical_form(&contr[0].0).0, canonical_form(&at1).0);
        // the cut term v(x)·∫v cancels the contraction over S²
        let d = differential_graphs_m(&pd, &default_z(), &GraphComb::from_graph(&g)).unwrap();
        assert!(d.is_zero());
        // without decoration the cut term Z(•{v}) = 1 cancels the contraction to the bare vertex
        let bare = Graph::new(2, 1, 1, &[(0, 1)]);
        assert!(differential_graphs_m(&pd, &default_z(), &GraphComb::from_graph(&bare)).unwrap().is_zero());
    }

    #[test]
    fn fiberwise_edge_removal() {
        let pd = sphere(2);
        let x = GraphComb::from_graph(&fiberwise(&[], &Graph::new(2, 2, 0, &[(0, 1)])));
        let d = differential_fiberwise(&pd, &x).unwrap();
        let want = GraphComb::from_graph(&fiberwise(&[pd.deco(1)], &Graph::empty(2, 2)));
        assert_eq!(d, want.scale(&Scalar::from_int(-2)));
        let pd3 = sphere(3);
        let x = GraphComb::from_graph(&fiberwise(&[], &Graph::new(3, 2, 0, &[(0, 1)])));
        assert!(differential_fiberwise(&pd3, &x).unwrap().is_zero());
    }

    #[test]
    fn z_on_small_graphs() {
        let pd = sphere(2);
        assert_eq!(z_partition(&pd, &crate::kontsevich::tadpole(2)), pd.euler_graph());
        assert!(z_partition(&pd, &crate::kontsevich::theta(2, 3)).is_zero());
        assert!(z_partition(&pd, &crate::kontsevich::single_vertex(2)).is_zero());
    }

    #[test]
    fn external_decorate_slots() {
        let pd = sphere(2);
        let unit = GraphComb::from_graph(&Graph::empty(2, 1));
        assert_eq!(external_decorate(&pd, &[unit.clone(), unit.clone()]).unwrap(), GraphComb::from_graph(&Graph::empty(2, 2)));
        let v = GraphComb::from_graph(&Graph::empty(2, 1).with_deco(0, pd.deco(1)));
        let got = external_decorate(&pd, &[v, unit]).unwrap();
        assert_eq!(got, GraphComb::from_graph(&Graph::empty(2, 2).with_deco(0, pd.deco(1))));
    }
}
