//! The Hopf cooperad Graphs_n and the graph complex GC_n.

use std::collections::BTreeSet;

use crate::error::Error;
use crate::graph::{
    canonical_form, enumerate_shapes, front_sign, koszul_sign, Color, Edge, Graph, GraphComb, LinComb,
    TGraph, Tagger, Word,
};
use crate::scalar::{qf, Monomial, Scalar};
use crate::Result;

// ---------------------------------------------------------------------------
// Edge contraction

/// Raw signed terms of contracting single edges at internal vertices.
/// `contractible` filters by color; dead ends are skipped when `skip_dead_ends`.
pub fn contraction_terms(
    g: &Graph,
    skip_dead_ends: bool,
    contractible: &dyn Fn(Color) -> bool,
) -> Vec<(Graph, i32)> {
    let mut out = Vec::new();
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    for (i, e) in g.edges.iter().enumerate() {
        if e.is_loop() || !contractible(e.color) {
            continue;
        }
        let (a, b) = (e.a as usize, e.b as usize);
        if !g.is_internal(a) && !g.is_internal(b) {
            continue;
        }
        if skip_dead_ends
            && ((g.is_internal(a) && g.valence(a) == 1) || (g.is_internal(b) && g.valence(b) == 1))
        {
            continue;
        }
        // remove y, keep x
        let (x, y) = if g.is_internal(a) && g.is_internal(b) {
            (a.min(b), a.max(b))
        } else if g.is_internal(b) {
            (a, b)
        } else {
            (b, a)
        };
        let (s1, front) = front_sign(&word, &[tg.et[i], tg.vertex_tag(y)]);
        let mut h = tg.clone();
        h.remove_edge(i);
        h.merge_into(x, y);
        let mut sign = s1 * koszul_sign(&front[2..], &h.word());
        if a == y && g.n % 2 == 1 {
            sign = -sign;
        }
        out.push((h.g, sign));
    }
    out
}

fn plain(c: Color) -> bool {
    c == Color::Plain
}

pub fn contract_graph(g: &Graph) -> GraphComb {
    let mut out = GraphComb::new();
    for (h, s) in contraction_terms(g, true, &plain) {
        if !h.has_internal_component() {
            out.add_graph(&h, s, &Scalar::one());
        }
    }
    out
}

/// δ_contr on Graphs_n.
pub fn differential_graphs_n(x: &GraphComb) -> Result<GraphComb> {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        if g.has_decorations() {
            return Err(Error::Invalid("decorated graph passed to the Graphs_n differential".into()));
        }
        out.add_comb(&contract_graph(g), c);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Product

/// Glue two graphs along their external vertices; returns the raw union and sign.
pub fn glue_raw(x: &Graph, y: &Graph) -> (Graph, i32) {
    assert_eq!(x.ext, y.ext);
    let mut tagger = Tagger::new();
    let tx = TGraph::new(x, &mut tagger);
    let ty = TGraph::new(y, &mut tagger);
    let mut from = tx.word();
    from.extend(ty.word());
    let mut r = tx.clone();
    let shift = x.int;
    let vmap = |v: u8| if (v as usize) < y.ext { v } else { v + shift as u8 };
    // internals of y go after internals of x
    for (k, t) in ty.vt.iter().enumerate() {
        let idx = r.add_internal(*t);
        debug_assert_eq!(idx, y.ext + shift + k);
    }
    for (k, e) in y.edges.iter().enumerate() {
        r.push_edge(Edge { a: vmap(e.a), b: vmap(e.b), color: e.color }, ty.et[k]);
    }
    for v in 0..y.nv() {
        let target = vmap(v as u8) as usize;
        for (d, t) in y.decos[v].iter().zip(&ty.dt[v]) {
            r.push_deco(target, *d, *t);
        }
    }
    let s = koszul_sign(&from, &r.word());
    (r.g, s)
}

pub fn glue_product(x: &GraphComb, y: &GraphComb) -> Result<GraphComb> {
    let mut out = GraphComb::new();
    for (a, ca) in x.iter() {
        for (b, cb) in y.iter() {
            if a.ext != b.ext || a.n != b.n {
                return Err(Error::Dimension(format!("arity {} vs {}", a.ext, b.ext)));
            }
            let (g, s) = glue_raw(a, b);
            out.add_graph(&g, s, &(ca * cb));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cocomposition

pub type GraphPair = (Graph, Graph);

/// Raw collapse terms: the block of externals i..i+s collapses into external i of the
/// outer graph. Decorations of collapsed vertices stay on the inner graph unless
/// `decos_outward`, in which case they move to vertex i of the outer graph. Edges inside
/// the collapsed set may stay behind as tadpoles at i.
pub fn collapse_terms(g: &Graph, i: usize, s: usize, decos_outward: bool) -> Vec<(Graph, Graph, i32)> {
    let k = g.ext + 1 - s;
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    let block: Vec<usize> = (i..i + s).collect();
    let internals: Vec<usize> = (g.ext..g.nv()).collect();
    let mut out = Vec::new();
    // vertices reachable from `seed` along the edges in `emask` (bitmasks, small graphs only)
    let small = g.nv() < 64 && g.edges.len() < 64;
    let reach = |seed: u64, emask: u64| -> u64 {
        let mut r = seed;
        loop {
            let mut next = r;
            for (j, e) in g.edges.iter().enumerate() {
                if emask >> j & 1 == 1 && (r >> e.a & 1 == 1 || r >> e.b & 1 == 1) {
                    next |= 1 << e.a | 1 << e.b;
                }
            }
            if next == r {
                return r;
            }
            r = next;
        }
    };
    let ext_mask: u64 = if small { (1u64 << g.ext) - 1 } else { 0 };
    let block_mask: u64 = if small { ((1u64 << s) - 1) << i } else { 0 };
    let all_edges: u64 = if small { (1u64 << g.edges.len()) - 1 } else { 0 };
    for smask in 0u32..(1 << internals.len()) {
        let sset: Vec<usize> =
            internals.iter().enumerate().filter(|(b, _)| smask >> b & 1 == 1).map(|(_, v)| *v).collect();
        let inside = |v: usize| (i..i + s).contains(&v) || sset.contains(&v);
        let candidates: Vec<usize> = (0..g.edges.len())
            .filter(|&j| inside(g.edges[j].a as usize) && inside(g.edges[j].b as usize))
            .collect();
        let rest_int: Vec<usize> = internals.iter().copied().filter(|v| !sset.contains(v)).collect();
        for fmask in 0u32..(1 << candidates.len()) {
            let fset: Vec<usize> =
                candidates.iter().enumerate().filter(|(b, _)| fmask >> b & 1 == 1).map(|(_, j)| *j).collect();
            if small {
                let smask64 = (smask as u64) << g.ext;
                let femask: u64 = fset.iter().map(|j| 1u64 << j).sum();
                if reach(block_mask, femask) & smask64 != smask64 {
                    continue;
                }
                let int_mask = ((1u64 << internals.len()) - 1) << g.ext;
                let rest = int_mask & !smask64;
                if reach(ext_mask | smask64, all_edges & !femask) & rest != rest {
                    continue;
                }
            }
            let mut inner = tg.restrict(&block, &sset, &fset);
            if inner.g.has_internal_component() {
                continue;
            }
            // outer: externals 0..i, collapsed i, then the rest; internals not in S
            let outer_ext: Vec<usize> = (0..i).chain(std::iter::once(i)).chain(i + s..g.ext).collect();
            let other_edges: Vec<usize> = (0..g.edges.len()).filter(|j| !fset.contains(j)).collect();
            let mut map = vec![usize::MAX; g.nv()];
            for (new, v) in outer_ext.iter().enumerate() {
                map[*v] = new;
            }
            for v in i..i + s {
                map[v] = i;
            }
            for v in &sset {
                map[*v] = i;
            }
            for (new, v) in rest_int.iter().enumerate() {
                map[*v] = k + new;
            }
            let mut outer = TGraph {
                g: Graph {
                    n: g.n,
                    ext: k,
                    int: rest_int.len(),
                    edges: other_edges
                        .iter()
                        .map(|&j| {
                            let e = g.edges[j];
                            Edge { a: map[e.a as usize] as u8, b: map[e.b as usize] as u8, color: e.color }
                        })
                        .collect(),
                    decos: vec![Vec::new(); k + rest_int.len()],
                },
                vt: rest_int.iter().map(|v| tg.vertex_tag(*v)).collect(),
                et: other_edges.iter().map(|j| tg.et[*j]).collect(),
                dt: vec![Vec::new(); k + rest_int.len()],
            };
            for v in 0..g.nv() {
                if inside(v) {
                    continue;
                }
                outer.g.decos[map[v]] = g.decos[v].clone();
                outer.dt[map[v]] = tg.dt[v].clone();
            }
            if decos_outward {
                for v in 0..inner.g.nv() {
                    let ds = std::mem::take(&mut inner.g.decos[v]);
                    let ts = std::mem::take(&mut inner.dt[v]);
                    outer.g.decos[i].extend(ds);
                    outer.dt[i].extend(ts);
                }
            }
            if outer.g.has_internal_component() {
                continue;
            }
            let mut to = outer.word();
            to.extend(inner.word());
            let sign = koszul_sign(&word, &to);
            out.push((outer.g, inner.g, sign));
        }
    }
    out
}

pub fn add_pair(out: &mut LinComb<GraphPair>, a: &Graph, b: &Graph, sign: i32, c: &Scalar) {
    let (ca, sa) = canonical_form(a);
    let (cb, sb) = canonical_form(b);
    match sign * sa * sb {
        0 => {}
        1 => out.add((ca, cb), c),
        s => out.add((ca, cb), &c.scale(&crate::scalar::q(s as i64))),
    }
}

/// Cocomposition Graphs_n(k+s-1) -> Graphs_n(k) ⊗ Graphs_n(s) collapsing externals
/// i..i+s (0-based) into external i.
pub fn cocompose(x: &GraphComb, i: usize, s: usize) -> Result<LinComb<GraphPair>> {
    let mut out = LinComb::new();
    for (g, c) in x.iter() {
        if s == 0 || i + s > g.ext {
            return Err(Error::Invalid(format!("slot {} with block size {} in arity {}", i + 1, s, g.ext)));
        }
        for (a, b, sg) in collapse_terms(g, i, s, false) {
            add_pair(&mut out, &a, &b, sg, c);
        }
    }
    Ok(out)
}

/// (d ⊗ 1 + 1 ⊗ d) on a tensor of graph combinations; `d` acts on one graph.
pub fn tensor_differential(
    x: &LinComb<GraphPair>,
    d_left: &dyn Fn(&Graph) -> GraphComb,
    d_right: &dyn Fn(&Graph) -> GraphComb,
    left_degree: &dyn Fn(&Graph) -> i32,
) -> LinComb<GraphPair> {
    let mut out = LinComb::new();
    for ((a, b), c) in x.iter() {
        for (da, cd) in d_left(a).iter() {
            out.add((da.clone(), b.clone()), &(c * cd));
        }
        let sign = if left_degree(a) % 2 == 0 { 1 } else { -1 };
        for (db, cd) in d_right(b).iter() {
            out.add((a.clone(), db.clone()), &(c * cd).scale(&crate::scalar::q(sign)));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Arnold algebra

pub type ArnoldMono = Vec<(u8, u8)>;
pub type ArnoldElement = LinComb<ArnoldMono>;

/// Normal form of the ordered product of generators ω_{ab} (0-based indices) times `c`.
pub fn arnold_reduce_into(n: i32, gens: &[(u8, u8)], c: &Scalar, out: &mut ArnoldElement) {
    let odd = n % 2 == 0; // generators have degree n-1
    let mut sign = 1;
    let mut gs: Vec<(u8, u8)> = Vec::with_capacity(gens.len());
    for &(a, b) in gens {
        if a == b {
            return;
        }
        if a > b {
            if n % 2 == 1 {
                sign = -sign;
            }
            gs.push((b, a));
        } else {
            gs.push((a, b));
        }
    }
    // sort by (larger index, smaller index)
    let key = |p: &(u8, u8)| (p.1, p.0);
    if odd {
        let mut inv = 0;
        for x in 0..gs.len() {
            for y in x + 1..gs.len() {
                if key(&gs[x]) > key(&gs[y]) {
                    inv += 1;
                }
            }
        }
        if inv % 2 == 1 {
            sign = -sign;
        }
    }
    gs.sort_by_key(key);
    for w in gs.windows(2) {
        if w[0] == w[1] {
            return;
        }
    }
    let c = c.scale(&crate::scalar::q(sign));
    for p in 0..gs.len().saturating_sub(1) {
        if gs[p].1 == gs[p + 1].1 {
            // ω_ik ω_jk = ω_ij ω_jk − ω_ij ω_ik
            let (i, j, k) = (gs[p].0, gs[p + 1].0, gs[p].1);
            let mut first = gs.clone();
            first[p] = (i, j);
            first[p + 1] = (j, k);
            arnold_reduce_into(n, &first, &c, out);
            let mut second = gs.clone();
            second[p] = (i, j);
            second[p + 1] = (i, k);
            arnold_reduce_into(n, &second, &-&c, out);
            return;
        }
    }
    out.add(gs, &c);
}

pub fn arnold_reduce(n: i32, x: &LinComb<ArnoldMono>) -> ArnoldElement {
    let mut out = ArnoldElement::new();
    for (m, c) in x.iter() {
        arnold_reduce_into(n, m, c, &mut out);
    }
    out
}

/// Send graphs with internal vertices to zero and an edge i–j to ω_ij.
pub fn project_arnold(x: &GraphComb) -> ArnoldElement {
    let mut out = ArnoldElement::new();
    for (g, c) in x.iter() {
        if g.int > 0 || g.has_decorations() {
            continue;
        }
        let gens: Vec<(u8, u8)> = g.edges.iter().map(|e| (e.a, e.b)).collect();
        arnold_reduce_into(g.n, &gens, c, &mut out);
    }
    out
}

/// Normal-form Arnold monomials with r generators in arity k.
pub fn arnold_basis(k: usize, r: usize) -> Vec<ArnoldMono> {
    // choose r distinct larger indices, each with a smaller partner
    fn rec(k: usize, r: usize, from: usize, cur: &mut ArnoldMono, out: &mut Vec<ArnoldMono>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for j in from..k {
            for i in 0..j {
                cur.push((i as u8, j as u8));
                rec(k, r, j + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(k, r, 1, &mut Vec::new(), &mut out);
    out
}

/// Coefficients of ∏_{j=1}^{k-1} (1 + j t).
pub fn arnold_poincare(k: usize) -> Vec<u64> {
    let mut p = vec![1u64];
    for j in 1..k as u64 {
        let mut q = vec![0u64; p.len() + 1];
        for (d, c) in p.iter().enumerate() {
            q[d] += c;
            q[d + 1] += c * j;
        }
        p = q;
    }
    p
}

// ---------------------------------------------------------------------------
// Enumeration of Graphs_n

/// Basis of Graphs_n(k) in the given loop order and degree.
pub fn graphs_n_basis(n: i32, k: usize, loop_order: i32, degree: i32) -> Vec<Graph> {
    let mut out = Vec::new();
    for c in 1..=k.max(1) as i32 {
        let m = (n - 1) * (loop_order + k as i32 - c) - degree;
        if m < 0 {
            continue;
        }
        let e = loop_order + m + k as i32 - c;
        if e < 0 {
            continue;
        }
        let nv = k as i32 + m;
        let prune = |g: &Graph, rem: usize| {
            let comps = g.num_components() as i32;
            let lo = g.edges.len() as i32 - nv + comps;
            lo <= loop_order && comps - rem as i32 <= c && prune_ok(g, rem)
        };
        for g in enumerate_shapes(n, k, m as usize, e as usize, &[Color::Plain], true, &prune) {
            if g.num_components() as i32 == c && !g.has_internal_component() && canonical_form(&g).1 != 0 {
                out.push(g);
            }
        }
    }
    out.sort();
    out
}

/// All basis graphs of Graphs_n(k) with exactly `edges` edges and `internals` internal vertices.
pub fn graphs_n_by_size(n: i32, k: usize, edges: usize, internals: usize) -> Vec<Graph> {
    let prune = |g: &Graph, rem: usize| prune_ok(g, rem);
    let mut out: Vec<Graph> = enumerate_shapes(n, k, internals, edges, &[Color::Plain], true, &prune)
        .into_iter()
        .filter(|g| !g.has_internal_component() && canonical_form(g).1 != 0)
        .collect();
    out.sort();
    out
}

fn prune_ok(g: &Graph, rem: usize) -> bool {
    g.internal_components().len() <= rem
}

// ---------------------------------------------------------------------------
// GC_n

/// Homological GC_n degree: e(n-1) - vn + n.
pub fn gc_degree(g: &Graph) -> i32 {
    g.degree() + g.n
}

pub fn stick(n: i32) -> Graph {
    Graph::new(n, 0, 2, &[(0, 1)])
}

pub fn tadpole(n: i32) -> Graph {
    Graph::new(n, 0, 1, &[(0, 0)])
}

pub fn theta(n: i32, edges: usize) -> Graph {
    Graph::new(n, 0, 2, &vec![(0, 1); edges])
}

pub fn single_vertex(n: i32) -> Graph {
    Graph::new(n, 0, 1, &[])
}

/// Insert `a` at vertex `v` of `b` (both internal-only), reattaching the half-edges at v
/// to the vertices of `a` in all ways. With `proper`, every vertex of `a` must receive
/// at least one half-edge.
pub fn insert_at(a: &Graph, b: &Graph, v: usize, proper: bool) -> Vec<(Graph, i32)> {
    assert!(a.ext == 0 && b.ext == 0);
    let mut tagger = Tagger::new();
    let ta = TGraph::new(a, &mut tagger);
    let tb = TGraph::new(b, &mut tagger);
    let (s1, front) = front_sign(&tb.word(), &[tb.vt[v]]);
    let mut base: Word = ta.word();
    base.extend_from_slice(&front[1..]);
    // result layout: a's vertices, then b's vertices without v
    let bmap = |w: usize| if w < v { a.int + w } else { a.int + w - 1 };
    let mut halves: Vec<(usize, bool)> = Vec::new();
    for (j, e) in b.edges.iter().enumerate() {
        if e.a as usize == v {
            halves.push((j, false));
        }
        if e.b as usize == v {
            halves.push((j, true));
        }
    }
    let mut r = TGraph {
        g: Graph { n: a.n, ext: 0, int: a.int + b.int - 1, edges: a.edges.clone(), decos: vec![] },
        vt: ta.vt.clone(),
        et: ta.et.clone(),
        dt: vec![],
    };
    r.vt.extend(tb.vt.iter().enumerate().filter(|(w, _)| *w != v).map(|(_, t)| *t));
    r.et.extend(tb.et.iter().copied());
    r.g.decos = vec![Vec::new(); r.g.int];
    r.dt = vec![Vec::new(); r.g.int];
    for e in &b.edges {
        let m = |w: u8| if w as usize == v { u8::MAX } else { bmap(w as usize) as u8 };
        r.g.edges.push(Edge { a: m(e.a), b: m(e.b), color: e.color });
    }
    let sign = s1 * koszul_sign(&base, &r.word());
    let mut out = Vec::new();
    let h = halves.len();
    let total = (a.int as u64).pow(h as u32);
    for code in 0..total {
        let mut c = code;
        let mut g = r.g.clone();
        let mut used = vec![false; a.int];
        for &(j, end) in &halves {
            let target = (c % a.int as u64) as u8;
            c /= a.int as u64;
            used[target as usize] = true;
            let e = &mut g.edges[a.edges.len() + j];
            if end {
                e.b = target;
            } else {
                e.a = target;
            }
        }
        if proper && used.iter().any(|u| !u) {
            continue;
        }
        out.push((g, sign));
    }
    out
}

/// Pre-Lie insertion a ▹ b.
pub fn pre_lie(a: &GraphComb, b: &GraphComb) -> GraphComb {
    let mut out = GraphComb::new();
    for (ga, ca) in a.iter() {
        for (gb, cb) in b.iter() {
            let c = ca * cb;
            for v in 0..gb.int {
                for (g, s) in insert_at(ga, gb, v, false) {
                    out.add_graph(&g, s, &c);
                }
            }
        }
    }
    out
}

fn parity_sign(x: i32) -> i64 {
    if x.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// [a, b] = a▹b − (−1)^{|a||b|} b▹a, extended bilinearly over homogeneous terms.
pub fn gc_bracket(a: &GraphComb, b: &GraphComb) -> GraphComb {
    let mut out = GraphComb::new();
    for (ga, ca) in a.iter() {
        for (gb, cb) in b.iter() {
            let la = GraphComb::single(ga.clone(), ca.clone());
            let lb = GraphComb::single(gb.clone(), cb.clone());
            out.add_comb(&pre_lie(&la, &lb), &Scalar::one());
            let s = -parity_sign(gc_degree(ga) * gc_degree(gb));
            out.add_comb(&pre_lie(&lb, &la), &Scalar::from_int(s));
        }
    }
    out
}

/// Vertex splitting: each vertex is replaced by a stick, both new vertices receiving at
/// least one of the old half-edges. Agrees with [stick, −] on graphs with an edge.
pub fn gc_differential(x: &GraphComb) -> GraphComb {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        let s = stick(g.n);
        for v in 0..g.int {
            for (h, sg) in insert_at(&s, g, v, true) {
                out.add_graph(&h, sg, c);
            }
        }
    }
    out
}

/// The Maurer–Cartan element: E·tadpole for n even, the truncated θ-series for n odd
/// (top Pontryagin class named `p`, terms with j ≤ jmax). The series coefficients
/// p^j/4^j · 1/(2(2j+1)!) refer to θ-graphs read as the sum of their distinct
/// labelings, which is 2^(2j+1) times the canonical basis element.
pub fn mc_element(n: i32, jmax: u32) -> GraphComb {
    let mut m = GraphComb::new();
    if n % 2 == 0 {
        m.add_graph(&tadpole(n), 1, &Scalar::param("E"));
    } else {
        for j in 1..=jmax {
            let e = 2 * j as i64 + 1;
            let fact: i64 = (1..=e).product();
            let c = qf(1, 4i64.pow(j) * 2 * fact) * crate::scalar::q(labelings(&theta(n, e as usize)));
            m.add_graph(&theta(n, e as usize), 1, &Scalar::term(Monomial(vec![("p".into(), j)]), c));
        }
    }
    m
}

/// Number of distinct labelings of an internal-only graph: v!·e!·2^e / |Aut|, where
/// automorphisms are counted on vertices, edges and edge directions.
pub fn labelings(g: &Graph) -> i64 {
    let fact = |k: usize| (1..=k as i64).product::<i64>();
    let total = fact(g.int) * fact(g.edges.len()) * (1i64 << g.edges.len());
    total / automorphisms(g)
}

/// Order of the automorphism group acting on half-edges (vertex permutations
/// combined with edge permutations and flips).
pub fn automorphisms(g: &Graph) -> i64 {
    let v = g.nv();
    let mut count = 0i64;
    let mut perm: Vec<usize> = (0..v).collect();
    let fixed = g.ext;
    fn heap(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k <= 1 {
            f(p);
            return;
        }
        for i in 0..k {
            heap(k - 1, p, f);
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    let mut internals: Vec<usize> = (fixed..v).collect();
    let len = internals.len();
    heap(len, &mut internals, &mut |order: &[usize]| {
        for (k, w) in order.iter().enumerate() {
            perm[fixed + k] = *w;
        }
        // multiset of unordered edges must be preserved; count edge bijections
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut orig: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
        for e in &g.edges {
            *orig.entry(key(e.a as usize, e.b as usize)).or_default() += 1;
        }
        let mut img: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
        for e in &g.edges {
            *img.entry(key(perm[e.a as usize], perm[e.b as usize])).or_default() += 1;
        }
        let same_decos = (0..v).all(|w| {
            let mut a = g.decos[w].clone();
            let mut b = g.decos[perm[w]].clone();
            a.sort();
            b.sort();
            a == b
        });
        if orig == img && same_decos {
            let mut c = 1i64;
            for ((a, b), m) in &orig {
                c *= (1..=*m as i64).product::<i64>();
                if a == b {
                    c *= 1i64 << m;
                }
            }
            count += c;
        }
    });
    count
}

/// dm + ½[m, m], truncated to parameter degree ≤ `max_power` in `param` when given.
pub fn mc_residual(m: &GraphComb, truncate: Option<(&str, u32)>) -> GraphComb {
    let mut r = gc_differential(m);
    r.add_comb(&gc_bracket(m, m), &Scalar::from_q(qf(1, 2)));
    match truncate {
        Some((p, k)) => r.map_coeffs(|c| c.truncate(p, k)),
        None => r,
    }
}

/// Connected internal-only graphs with the given loop order and vertex count.
pub fn gc_basis(n: i32, loop_order: i32, vertices: usize) -> Vec<Graph> {
    let e = loop_order + vertices as i32 - 1;
    if e < 0 || vertices == 0 {
        return vec![];
    }
    let prune = |g: &Graph, rem: usize| {
        let comps = g.num_components() as i32;
        let lo = g.edges.len() as i32 - vertices as i32 + comps;
        lo <= loop_order && comps - rem as i32 <= 1
    };
    let mut out: Vec<Graph> = enumerate_shapes(n, 0, vertices, e as usize, &[Color::Plain], true, &prune)
        .into_iter()
        .filter(|g| g.is_connected() && canonical_form(g).1 != 0)
        .collect();
    out.sort();
    out
}

/// Distinct canonical graphs appearing in a combination.
pub fn support(x: &GraphComb) -> BTreeSet<Graph> {
    x.iter().map(|(g, _)| g.clone()).collect()
}
