//! Graphs with external/internal vertices, colored edges and decorations,
//! their orientation signs and canonical forms.
//!
//! Orientation convention: an oriented graph is the ordered word
//! [internal vertices by index][edges in order][decorations, vertex by vertex]
//! of graded objects, plus a direction per edge. Internal vertices have degree
//! -n, plain/u/ũ edges n-1, v edges n-2, a decoration its class degree.
//! Reordering the word costs the Koszul sign; reversing an edge costs (-1)^n.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::{parse_q, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Plain,
    U,
    Ut,
    V,
}

impl Color {
    pub fn name(self) -> &'static str {
        match self {
            Color::Plain => "plain",
            Color::U => "u",
            Color::Ut => "ut",
            Color::V => "v",
        }
    }

    pub fn parse(s: &str) -> Result<Color, Error> {
        match s {
            "plain" => Ok(Color::Plain),
            "u" => Ok(Color::U),
            "ut" | "ũ" => Ok(Color::Ut),
            "v" => Ok(Color::V),
            _ => Err(Error::Parse(format!("unknown edge color '{s}'"))),
        }
    }

    pub fn degree(self, n: i32) -> i32 {
        match self {
            Color::V => n - 2,
            _ => n - 1,
        }
    }
}

/// A decoration: index into a PD model basis together with its degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Deco {
    pub id: u16,
    pub deg: i16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: u8,
    pub b: u8,
    pub color: Color,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Edge {
        Edge { a: a as u8, b: b as u8, color: Color::Plain }
    }

    pub fn colored(a: usize, b: usize, color: Color) -> Edge {
        Edge { a: a as u8, b: b as u8, color }
    }

    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    pub n: i32,
    pub ext: usize,
    pub int: usize,
    pub edges: Vec<Edge>,
    pub decos: Vec<Vec<Deco>>,
}

fn odd(x: i32) -> bool {
    x.rem_euclid(2) == 1
}

impl Graph {
    pub fn empty(n: i32, ext: usize) -> Graph {
        Graph { n, ext, int: 0, edges: Vec::new(), decos: vec![Vec::new(); ext] }
    }

    pub fn new(n: i32, ext: usize, int: usize, edges: &[(usize, usize)]) -> Graph {
        Graph {
            n,
            ext,
            int,
            edges: edges.iter().map(|&(a, b)| Edge::new(a, b)).collect(),
            decos: vec![Vec::new(); ext + int],
        }
    }

    pub fn nv(&self) -> usize {
        self.ext + self.int
    }

    pub fn is_internal(&self, v: usize) -> bool {
        v >= self.ext
    }

    pub fn with_deco(mut self, v: usize, d: Deco) -> Graph {
        self.decos[v].push(d);
        self
    }

    pub fn deco_degree(&self) -> i32 {
        self.decos.iter().flatten().map(|d| d.deg as i32).sum()
    }

    pub fn has_decorations(&self) -> bool {
        self.decos.iter().any(|d| !d.is_empty())
    }

    pub fn degree(&self) -> i32 {
        self.edges.iter().map(|e| e.color.degree(self.n)).sum::<i32>() - self.n * self.int as i32
            + self.deco_degree()
    }

    /// Valence counting both ends of a loop.
    pub fn valence(&self, v: usize) -> usize {
        self.edges.iter().map(|e| (e.a as usize == v) as usize + (e.b as usize == v) as usize).sum()
    }

    pub fn has_loop(&self) -> bool {
        self.edges.iter().any(|e| e.is_loop())
    }

    /// Component index per vertex.
    pub fn components(&self) -> Vec<usize> {
        let nv = self.nv();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.a as usize), find(&mut parent, e.b as usize));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = BTreeMap::new();
        (0..nv)
            .map(|v| {
                let r = find(&mut parent, v);
                let l = label.len();
                *label.entry(r).or_insert(l)
            })
            .collect()
    }

    pub fn num_components(&self) -> usize {
        self.components().iter().copied().collect::<BTreeSet<_>>().len()
    }

    pub fn is_connected(&self) -> bool {
        self.nv() <= 1 || self.num_components() == 1
    }

    /// Components that contain no external vertex, as sorted vertex lists.
    pub fn internal_components(&self) -> Vec<Vec<usize>> {
        let comp = self.components();
        let with_ext: BTreeSet<usize> = (0..self.ext).map(|v| comp[v]).collect();
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in self.ext..self.nv() {
            if !with_ext.contains(&comp[v]) {
                groups.entry(comp[v]).or_default().push(v);
            }
        }
        groups.into_values().collect()
    }

    pub fn has_internal_component(&self) -> bool {
        if self.int == 0 {
            return false;
        }
        let mut reach = vec![false; self.nv()];
        reach[..self.ext].fill(true);
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.edges {
                let (a, b) = (e.a as usize, e.b as usize);
                if reach[a] != reach[b] {
                    reach[a] = true;
                    reach[b] = true;
                    changed = true;
                }
            }
        }
        reach.contains(&false)
    }

    /// #edges - #internals - #externals + #components (external vertices included).
    pub fn loop_order(&self) -> i32 {
        self.edges.len() as i32 - self.nv() as i32 + self.num_components() as i32
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |v: u8| {
            let v = v as usize;
            if v < self.ext {
                format!("e{}", v + 1)
            } else {
                format!("i{}", v - self.ext + 1)
            }
        };
        write!(f, "[n={} ext={} int={}", self.n, self.ext, self.int)?;
        for e in &self.edges {
            let c = match e.color {
                Color::Plain => "",
                Color::U => ":u",
                Color::Ut => ":ut",
                Color::V => ":v",
            };
            write!(f, " {}-{}{}", name(e.a), name(e.b), c)?;
        }
        for (v, ds) in self.decos.iter().enumerate() {
            if !ds.is_empty() {
                let ids: Vec<String> = ds.iter().map(|d| format!("d{}", d.id)).collect();
                write!(f, " {}{{{}}}", name(v as u8), ids.join(","))?;
            }
        }
        write!(f, "]")
    }
}

// ---------------------------------------------------------------------------
// Orientation words

pub type Word = Vec<(u32, bool)>;

/// Koszul sign (+1/-1) of the permutation taking `from` to `to`; both contain the same tags.
pub fn koszul_sign(from: &[(u32, bool)], to: &[(u32, bool)]) -> i32 {
    debug_assert_eq!(from.len(), to.len());
    let pos: BTreeMap<u32, usize> = to.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let odd_pos: Vec<usize> = from.iter().filter(|(_, o)| *o).map(|(t, _)| pos[t]).collect();
    let mut inv = 0usize;
    for i in 0..odd_pos.len() {
        for j in i + 1..odd_pos.len() {
            if odd_pos[i] > odd_pos[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of moving the tagged objects `sel` (in this order) to the front of `word`.
pub fn front_sign(word: &[(u32, bool)], sel: &[u32]) -> (i32, Word) {
    let set: BTreeSet<u32> = sel.iter().copied().collect();
    let lookup: BTreeMap<u32, bool> = word.iter().copied().collect();
    let mut target: Word = sel.iter().map(|t| (*t, lookup[t])).collect();
    target.extend(word.iter().filter(|(t, _)| !set.contains(t)).copied());
    (koszul_sign(word, &target), target)
}

/// A graph whose objects carry tags, for tracking signs through constructions.
#[derive(Clone, Debug)]
pub struct TGraph {
    pub g: Graph,
    pub vt: Vec<u32>,
    pub et: Vec<u32>,
    pub dt: Vec<Vec<u32>>,
}

pub struct Tagger(pub u32);

impl Tagger {
    pub fn new() -> Self {
        Tagger(0)
    }
    pub fn next(&mut self) -> u32 {
        self.0 += 1;
        self.0
    }
}

impl Default for Tagger {
    fn default() -> Self {
        Tagger::new()
    }
}

impl TGraph {
    pub fn new(g: &Graph, tg: &mut Tagger) -> TGraph {
        let vt = (0..g.int).map(|_| tg.next()).collect();
        let et = (0..g.edges.len()).map(|_| tg.next()).collect();
        let dt = g.decos.iter().map(|ds| ds.iter().map(|_| tg.next()).collect()).collect();
        TGraph { g: g.clone(), vt, et, dt }
    }

    pub fn word(&self) -> Word {
        let n = self.g.n;
        let mut w = Vec::with_capacity(self.vt.len() + self.et.len() + 4);
        for t in &self.vt {
            w.push((*t, odd(n)));
        }
        for (t, e) in self.et.iter().zip(&self.g.edges) {
            w.push((*t, odd(e.color.degree(n))));
        }
        for (ts, ds) in self.dt.iter().zip(&self.g.decos) {
            for (t, d) in ts.iter().zip(ds) {
                w.push((*t, odd(d.deg as i32)));
            }
        }
        w
    }

    pub fn vertex_tag(&self, v: usize) -> u32 {
        self.vt[v - self.g.ext]
    }

    pub fn remove_edge(&mut self, i: usize) -> (Edge, u32) {
        (self.g.edges.remove(i), self.et.remove(i))
    }

    pub fn push_edge(&mut self, e: Edge, tag: u32) {
        self.g.edges.push(e);
        self.et.push(tag);
    }

    pub fn push_deco(&mut self, v: usize, d: Deco, tag: u32) {
        self.g.decos[v].push(d);
        self.dt[v].push(tag);
    }

    pub fn add_internal(&mut self, tag: u32) -> usize {
        self.g.int += 1;
        self.g.decos.push(Vec::new());
        self.dt.push(Vec::new());
        self.vt.push(tag);
        self.g.nv() - 1
    }

    /// Delete internal vertex `v`; its edges must already be gone. Decorations move to `heir` if given.
    pub fn delete_internal(&mut self, v: usize, heir: Option<usize>) {
        assert!(self.g.is_internal(v));
        let ds = std::mem::take(&mut self.g.decos[v]);
        let ts = std::mem::take(&mut self.dt[v]);
        if let Some(h) = heir {
            self.g.decos[h].extend(ds);
            self.dt[h].extend(ts);
        } else {
            assert!(ds.is_empty(), "deleting a decorated vertex");
        }
        self.g.decos.remove(v);
        self.dt.remove(v);
        self.vt.remove(v - self.g.ext);
        self.g.int -= 1;
        for e in self.g.edges.iter_mut() {
            assert!(e.a as usize != v && e.b as usize != v);
            if e.a as usize > v {
                e.a -= 1;
            }
            if e.b as usize > v {
                e.b -= 1;
            }
        }
    }

    /// Identify internal vertex `rem` with `keep`: edges and decorations of `rem` move to `keep`.
    pub fn merge_into(&mut self, keep: usize, rem: usize) {
        assert!(keep != rem);
        for e in self.g.edges.iter_mut() {
            if e.a as usize == rem {
                e.a = keep as u8;
            }
            if e.b as usize == rem {
                e.b = keep as u8;
            }
        }
        self.delete_internal(rem, Some(keep));
    }

    /// Keep only the listed vertices (externals stay in front in given order); used to split off pieces.
    pub fn restrict(&self, ext: &[usize], int: &[usize], edges: &[usize]) -> TGraph {
        let mut map = BTreeMap::new();
        for (i, v) in ext.iter().chain(int.iter()).enumerate() {
            map.insert(*v, i);
        }
        let g = Graph {
            n: self.g.n,
            ext: ext.len(),
            int: int.len(),
            edges: edges
                .iter()
                .map(|&i| {
                    let e = self.g.edges[i];
                    Edge { a: map[&(e.a as usize)] as u8, b: map[&(e.b as usize)] as u8, color: e.color }
                })
                .collect(),
            decos: ext.iter().chain(int.iter()).map(|v| self.g.decos[*v].clone()).collect(),
        };
        TGraph {
            vt: int.iter().map(|v| self.vertex_tag(*v)).collect(),
            et: edges.iter().map(|i| self.et[*i]).collect(),
            dt: ext.iter().chain(int.iter()).map(|v| self.dt[*v].clone()).collect(),
            g,
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical forms

fn perm_sign_odd(items: &[(usize, bool)]) -> i32 {
    // items: (target position, odd); sign of sorting among odd ones
    let odd_pos: Vec<usize> = items.iter().filter(|(_, o)| *o).map(|(p, _)| *p).collect();
    let mut inv = 0;
    for i in 0..odd_pos.len() {
        for j in i + 1..odd_pos.len() {
            if odd_pos[i] > odd_pos[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Apply an internal relabeling `perm` (old internal index -> new internal index) and
/// normalize edges/decorations. Returns the representative and its sign (0 if a local
/// symmetry forces the graph to vanish).
fn relabeled(g: &Graph, perm: &[usize]) -> (Graph, i32) {
    let n = g.n;
    let mut sign = 1;
    let vmap = |v: usize| if v < g.ext { v } else { g.ext + perm[v - g.ext] };
    if odd(n) {
        let items: Vec<(usize, bool)> = perm.iter().map(|p| (*p, true)).collect();
        sign *= perm_sign_odd(&items);
    }
    // decoration blocks move with their vertices
    let mut decos = vec![Vec::new(); g.nv()];
    let block_items: Vec<(usize, bool)> = (0..g.nv())
        .map(|v| (vmap(v), odd(g.decos[v].iter().map(|d| d.deg as i32).sum())))
        .collect();
    sign *= perm_sign_odd(&block_items);
    for v in 0..g.nv() {
        let mut ds: Vec<(Deco, usize)> = g.decos[v].iter().copied().zip(0..).collect();
        ds.sort();
        let items: Vec<(usize, bool)> = {
            let mut pos = vec![0; ds.len()];
            for (new, (_, old)) in ds.iter().enumerate() {
                pos[*old] = new;
            }
            g.decos[v].iter().enumerate().map(|(i, d)| (pos[i], odd(d.deg as i32))).collect()
        };
        sign *= perm_sign_odd(&items);
        for w in ds.windows(2) {
            if w[0].0 == w[1].0 && odd(w[0].0.deg as i32) {
                sign = 0;
            }
        }
        decos[vmap(v)] = ds.into_iter().map(|(d, _)| d).collect();
    }
    let mut es: Vec<(Edge, usize)> = Vec::with_capacity(g.edges.len());
    for (i, e) in g.edges.iter().enumerate() {
        let (a, b) = (vmap(e.a as usize) as u8, vmap(e.b as usize) as u8);
        if a == b && odd(n) {
            sign = 0;
        }
        if a > b {
            if odd(n) {
                sign = -sign;
            }
            es.push((Edge { a: b, b: a, color: e.color }, i));
        } else {
            es.push((Edge { a, b, color: e.color }, i));
        }
    }
    es.sort();
    let mut pos = vec![0; es.len()];
    for (new, (_, old)) in es.iter().enumerate() {
        pos[*old] = new;
    }
    let items: Vec<(usize, bool)> =
        g.edges.iter().enumerate().map(|(i, e)| (pos[i], odd(e.color.degree(n)))).collect();
    sign *= perm_sign_odd(&items);
    for w in es.windows(2) {
        if w[0].0 == w[1].0 && odd(w[0].0.color.degree(n)) {
            sign = 0;
        }
    }
    (
        Graph { n, ext: g.ext, int: g.int, edges: es.into_iter().map(|(e, _)| e).collect(), decos },
        sign,
    )
}

/// Color refinement on vertices; returns an isomorphism-invariant color per vertex.
fn refine(g: &Graph) -> Vec<u64> {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};
    let nv = g.nv();
    let h = |x: &dyn Fn(&mut DefaultHasher)| {
        let mut s = DefaultHasher::new();
        x(&mut s);
        s.finish()
    };
    let mut col: Vec<u64> = (0..nv)
        .map(|v| {
            let mut ds = g.decos[v].clone();
            ds.sort();
            let loops: Vec<Color> =
                g.edges.iter().filter(|e| e.is_loop() && e.a as usize == v).map(|e| e.color).collect();
            let ext_id = if v < g.ext { v as i64 } else { -1 };
            h(&|s| (ext_id, &ds, g.valence(v), &loops).hash(s))
        })
        .collect();
    let mut classes = col.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut nb: Vec<Vec<(u64, Color)>> = vec![Vec::new(); nv];
        for e in &g.edges {
            if !e.is_loop() {
                nb[e.a as usize].push((col[e.b as usize], e.color));
                nb[e.b as usize].push((col[e.a as usize], e.color));
            }
        }
        let new: Vec<u64> = (0..nv)
            .map(|v| {
                nb[v].sort();
                h(&|s| (col[v], &nb[v]).hash(s))
            })
            .collect();
        let c = new.iter().collect::<BTreeSet<_>>().len();
        col = new;
        if c == classes {
            break;
        }
        classes = c;
    }
    col
}

fn for_each_perm(items: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_perm(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Canonical representative and sign. The representative is returned even when the
/// sign is 0 (graph equal to minus itself).
pub fn canonical_form(g: &Graph) -> (Graph, i32) {
    if g.int == 0 {
        return relabeled(g, &[]);
    }
    // cocomposition and differentials canonicalize the same small graphs over and over
    const CACHE_LIMIT: usize = 1 << 18;
    thread_local! {
        static CACHE: std::cell::RefCell<rustc_hash::FxHashMap<Graph, (Graph, i32)>> = Default::default();
    }
    if let Some(hit) = CACHE.with(|c| c.borrow().get(g).cloned()) {
        return hit;
    }
    let res = canonical_form_uncached(g);
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= CACHE_LIMIT {
            c.clear();
        }
        c.insert(g.clone(), res.clone());
    });
    res
}

fn canonical_form_uncached(g: &Graph) -> (Graph, i32) {
    let col = refine(g);
    // internal vertices grouped into classes ordered by color
    let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for v in g.ext..g.nv() {
        classes.entry(col[v]).or_default().push(v - g.ext);
    }
    let groups: Vec<Vec<usize>> = classes.into_values().collect();
    let mut best: Option<(Graph, i32)> = None;
    let mut conflict = false;
    let mut perm = vec![0usize; g.int];
    fn rec(
        gi: usize,
        groups: &[Vec<usize>],
        start: usize,
        perm: &mut Vec<usize>,
        g: &Graph,
        best: &mut Option<(Graph, i32)>,
        conflict: &mut bool,
    ) {
        if gi == groups.len() {
            let (r, s) = relabeled(g, perm);
            match best {
                None => *best = Some((r, s)),
                Some((b, bs)) => match r.cmp(b) {
                    std::cmp::Ordering::Less => {
                        *best = Some((r, s));
                        *conflict = false;
                    }
                    std::cmp::Ordering::Equal => {
                        if s != *bs {
                            *conflict = true;
                        }
                    }
                    std::cmp::Ordering::Greater => {}
                },
            }
            return;
        }
        let mut members = groups[gi].clone();
        let len = members.len();
        for_each_perm(&mut members, 0, &mut |order: &[usize]| {
            for (k, old) in order.iter().enumerate() {
                perm[*old] = start + k;
            }
            rec(gi + 1, groups, start + len, perm, g, best, conflict);
        });
    }
    rec(0, &groups, 0, &mut perm, g, &mut best, &mut conflict);
    let (r, s) = best.unwrap();
    (r, if conflict { 0 } else { s })
}

// ---------------------------------------------------------------------------
// Linear combinations

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinComb<K: Ord + Clone> {
    terms: BTreeMap<K, Scalar>,
}

impl<K: Ord + Clone> Default for LinComb<K> {
    fn default() -> Self {
        LinComb { terms: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> LinComb<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(k: K, c: Scalar) -> Self {
        let mut l = Self::new();
        l.add(k, &c);
        l
    }

    pub fn add(&mut self, k: K, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c.clone());
            }
        }
    }

    pub fn add_comb(&mut self, other: &LinComb<K>, c: &Scalar) {
        for (k, v) in &other.terms {
            self.add(k.clone(), &(v * c));
        }
    }

    pub fn scale(&self, c: &Scalar) -> LinComb<K> {
        let mut out = LinComb::new();
        out.add_comb(self, c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, k: &K) -> Scalar {
        self.terms.get(k).cloned().unwrap_or_default()
    }

    pub fn retain(&mut self, f: impl Fn(&K, &Scalar) -> bool) {
        self.terms.retain(|k, v| f(k, v));
    }

    pub fn map_coeffs(&self, f: impl Fn(&Scalar) -> Scalar) -> LinComb<K> {
        let mut out = LinComb::new();
        for (k, v) in &self.terms {
            out.add(k.clone(), &f(v));
        }
        out
    }

    pub fn sub(&self, other: &LinComb<K>) -> LinComb<K> {
        let mut out = self.clone();
        out.add_comb(other, &Scalar::from_int(-1));
        out
    }
}

impl<K: Ord + Clone> FromIterator<(K, Scalar)> for LinComb<K> {
    fn from_iter<T: IntoIterator<Item = (K, Scalar)>>(iter: T) -> Self {
        let mut l = LinComb::new();
        for (k, c) in iter {
            l.add(k, &c);
        }
        l
    }
}

pub type GraphComb = LinComb<Graph>;

impl GraphComb {
    /// Add `sign * c * g`, canonicalizing `g` first.
    pub fn add_graph(&mut self, g: &Graph, sign: i32, c: &Scalar) {
        if sign == 0 {
            return;
        }
        let (r, s) = canonical_form(g);
        let s = s * sign;
        if s == 0 {
            return;
        }
        self.add(r, &c.scale(&crate::scalar::q(s as i64)));
    }

    pub fn from_graph(g: &Graph) -> GraphComb {
        let mut l = GraphComb::new();
        l.add_graph(g, 1, &Scalar::one());
        l
    }
}

impl<K: Ord + Clone + fmt::Display> fmt::Display for LinComb<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(k, c)| format!("({c}) {k}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Canonicalize and return `None` for graphs equal to minus themselves.
pub fn canonicalize(g: &Graph) -> (Graph, i32) {
    canonical_form(g)
}

// ---------------------------------------------------------------------------
// Enumeration

/// All canonical shapes (signs ignored) with the given vertex counts and exactly
/// `edges` edges, built by adding one edge at a time. `prune` may reject partial graphs
/// given the number of edges still to add.
pub fn enumerate_shapes(
    n: i32,
    ext: usize,
    int: usize,
    edges: usize,
    colors: &[Color],
    allow_loops: bool,
    prune: &dyn Fn(&Graph, usize) -> bool,
) -> Vec<Graph> {
    let nv = ext + int;
    let mut layer: BTreeSet<Graph> = BTreeSet::new();
    let start = Graph { n, ext, int, edges: vec![], decos: vec![Vec::new(); nv] };
    if prune(&start, edges) {
        layer.insert(canonical_form(&start).0);
    }
    for step in 0..edges {
        let remaining = edges - step - 1;
        let mut next = BTreeSet::new();
        for g in &layer {
            for a in 0..nv {
                for b in a..nv {
                    if a == b && !allow_loops {
                        continue;
                    }
                    for &c in colors {
                        let mut h = g.clone();
                        h.edges.push(Edge::colored(a, b, c));
                        if !prune(&h, remaining) {
                            continue;
                        }
                        next.insert(canonical_form(&h).0);
                    }
                }
            }
        }
        layer = next;
    }
    layer.into_iter().collect()
}

/// Pruning rule: components without externals need at least one more edge each.
pub fn prune_internal_components(g: &Graph, remaining: usize) -> bool {
    g.internal_components().len() <= remaining
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: i32,
    pub externals: usize,
    #[serde(default)]
    pub internals: usize,
    #[serde(default)]
    pub edges: Vec<(String, String, String)>,
    #[serde(default)]
    pub decorations: BTreeMap<String, Vec<String>>,
    #[serde(default = "one_str")]
    pub coefficient: String,
}

fn one_str() -> String {
    "1".into()
}

fn parse_vertex(s: &str, ext: usize, int: usize) -> Result<usize, Error> {
    let bad = || Error::Parse(format!("bad vertex name '{s}'"));
    let (kind, num) = s.split_at(1);
    let k: usize = num.parse().map_err(|_| bad())?;
    match kind {
        "e" if k >= 1 && k <= ext => Ok(k - 1),
        "i" if k >= 1 && k <= int => Ok(ext + k - 1),
        _ => Err(bad()),
    }
}

pub fn vertex_name(g: &Graph, v: usize) -> String {
    if v < g.ext {
        format!("e{}", v + 1)
    } else {
        format!("i{}", v - g.ext + 1)
    }
}

impl GraphJson {
    pub fn to_graph(
        &self,
        deco: &dyn Fn(&str) -> Result<Deco, Error>,
    ) -> Result<(Graph, Scalar), Error> {
        if self.n < 2 {
            return Err(Error::Parse(format!("n = {} < 2", self.n)));
        }
        let mut g = Graph::empty(self.n, self.externals);
        g.int = self.internals;
        g.decos = vec![Vec::new(); self.externals + self.internals];
        if g.nv() > 250 {
            return Err(Error::Parse("too many vertices".into()));
        }
        for (a, b, c) in &self.edges {
            let a = parse_vertex(a, g.ext, g.int)?;
            let b = parse_vertex(b, g.ext, g.int)?;
            g.edges.push(Edge::colored(a, b, Color::parse(c)?));
        }
        for (v, ds) in &self.decorations {
            let v = parse_vertex(v, g.ext, g.int)?;
            for d in ds {
                g.decos[v].push(deco(d)?);
            }
        }
        let c = Scalar::from_q(parse_q(&self.coefficient)?);
        Ok((g, c))
    }

    pub fn from_graph(g: &Graph, c: &Scalar, name: &dyn Fn(Deco) -> String) -> GraphJson {
        let mut decorations = BTreeMap::new();
        for (v, ds) in g.decos.iter().enumerate() {
            if !ds.is_empty() {
                decorations.insert(vertex_name(g, v), ds.iter().map(|d| name(*d)).collect());
            }
        }
        GraphJson {
            n: g.n,
            externals: g.ext,
            internals: g.int,
            edges: g
                .edges
                .iter()
                .map(|e| (vertex_name(g, e.a as usize), vertex_name(g, e.b as usize), e.color.name().to_string()))
                .collect(),
            decorations,
            coefficient: c.to_string(),
        }
    }
}

pub fn no_decorations(s: &str) -> Result<Deco, Error> {
    Err(Error::UnknownDecoration(s.to_string()))
}

pub fn graph_comb_from_json(
    v: &serde_json::Value,
    deco: &dyn Fn(&str) -> Result<Deco, Error>,
) -> Result<GraphComb, Error> {
    let items: Vec<GraphJson> = if v.is_array() {
        serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?
    } else {
        vec![serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?]
    };
    let mut out = GraphComb::new();
    for j in items {
        let (g, c) = j.to_graph(deco)?;
        out.add_graph(&g, 1, &c);
    }
    Ok(out)
}

pub fn graph_comb_to_json(x: &GraphComb, name: &dyn Fn(Deco) -> String) -> serde_json::Value {
    serde_json::to_value(x.iter().map(|(g, c)| GraphJson::from_graph(g, c, name)).collect::<Vec<_>>()).unwrap()
}
