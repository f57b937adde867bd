//! The word coalgebra Ĥ(G), the Koszul complex K_G, the framed comodule Graphs_M^fr
//! with its Graphs_n-coaction, and framing changes.

use std::collections::BTreeMap;

use num_traits::One;

use crate::error::Error;
use crate::graph::{canonical_form, front_sign, koszul_sign, Color, Graph, GraphComb, LinComb, TGraph, Tagger, Word};
use crate::kontsevich::{collapse_terms, glue_product};
use crate::manifold::{differential_graph_m, lift_to_slot, removal_sign, PDModel, PartitionFunction};
use crate::scalar::{q, Scalar, Q};
use crate::Result;

/// Generators of H(BG) with their (even) degrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HBGPresentation {
    pub gens: Vec<(String, i32)>,
}

impl HBGPresentation {
    /// Pontryagin classes p1, p2, … of degree 4i, plus the Euler class E of degree n for
    /// n even.
    pub fn for_dimension(n: i32) -> HBGPresentation {
        let mut gens = Vec::new();
        let m = n / 2;
        let top = if n % 2 == 0 { m - 1 } else { m };
        for i in 1..=top {
            gens.push((format!("p{i}"), 4 * i));
        }
        if n % 2 == 0 {
            gens.push(("E".to_string(), n));
        }
        HBGPresentation { gens }
    }

    pub fn new(gens: Vec<(String, i32)>) -> Result<HBGPresentation> {
        for (g, d) in &gens {
            if *d <= 0 || d % 2 != 0 {
                return Err(Error::DegreeMismatch(format!("generator {g} has degree {d}")));
            }
        }
        Ok(HBGPresentation { gens })
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|(g, _)| g == name)
    }

    /// A letter consisting of a single generator.
    pub fn letter(&self, name: &str) -> Letter {
        let mut l = vec![0; self.gens.len()];
        l[self.index(name).expect("known generator")] = 1;
        l
    }

    /// Degree of a monomial in H(BG).
    pub fn monomial_degree(&self, l: &Letter) -> i32 {
        l.iter().zip(&self.gens).map(|(e, (_, d))| *e as i32 * d).sum()
    }

    /// Letters live in H(BG)[-1]: monomial degree minus one, always odd.
    pub fn letter_degree(&self, l: &Letter) -> i32 {
        self.monomial_degree(l) - 1
    }

    pub fn word_degree(&self, w: &HWord) -> i32 {
        w.iter().map(|l| self.letter_degree(l)).sum()
    }

    /// All nonzero monomials of degree ≤ max.
    pub fn monomials(&self, max: i32) -> Vec<Letter> {
        let mut out = Vec::new();
        fn rec(p: &HBGPresentation, k: usize, left: i32, cur: &mut Letter, out: &mut Vec<Letter>) {
            if k == p.gens.len() {
                if cur.iter().any(|e| *e > 0) {
                    out.push(cur.clone());
                }
                return;
            }
            let d = p.gens[k].1;
            let mut e = 0;
            while e * d <= left {
                cur[k] = e as u32;
                rec(p, k + 1, left - e * d, cur, out);
                e += 1;
            }
            cur[k] = 0;
        }
        rec(self, 0, max, &mut vec![0; self.gens.len()], &mut out);
        out
    }

    /// All words with at most `letters` letters whose monomials have degree ≤ max.
    pub fn words(&self, letters: usize, max: i32) -> Vec<HWord> {
        let ms = self.monomials(max);
        let mut out = vec![vec![]];
        let mut layer: Vec<HWord> = vec![vec![]];
        for _ in 0..letters {
            let mut next = Vec::new();
            for w in &layer {
                for m in &ms {
                    let mut v = w.clone();
                    v.push(m.clone());
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    pub fn letter_name(&self, l: &Letter) -> String {
        let parts: Vec<String> = l
            .iter()
            .zip(&self.gens)
            .filter(|(e, _)| **e > 0)
            .map(|(e, (g, _))| if *e == 1 { g.clone() } else { format!("{g}^{e}") })
            .collect();
        parts.join("*")
    }

    pub fn word_name(&self, w: &HWord) -> String {
        let parts: Vec<String> = w.iter().map(|l| format!("({})", self.letter_name(l))).collect();
        parts.join("")
    }

    /// Parse a letter written as `p1*E^2`.
    pub fn parse_letter(&self, s: &str) -> Result<Letter> {
        let mut l = vec![0; self.gens.len()];
        for part in s.split('*') {
            let (g, e) = match part.trim().split_once('^') {
                Some((g, e)) => (g, e.parse::<u32>().map_err(|_| Error::Parse(format!("exponent in '{part}'")))?),
                None => (part.trim(), 1),
            };
            let i = self.index(g).ok_or_else(|| Error::Parse(format!("unknown generator '{g}'")))?;
            l[i] += e;
        }
        if l.iter().all(|e| *e == 0) {
            return Err(Error::Parse(format!("empty letter '{s}'")));
        }
        Ok(l)
    }
}

/// A nonempty monomial of H(BG), as an exponent vector.
pub type Letter = Vec<u32>;
pub type HWord = Vec<Letter>;
pub type WordComb = LinComb<HWord>;

fn parity(x: i32) -> i32 {
    if x.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Signed shuffles of two words; every letter is odd.
pub fn shuffles<L: Clone>(a: &[L], b: &[L]) -> Vec<(Vec<L>, i32)> {
    let mut out = Vec::new();
    fn rec<L: Clone>(a: &[L], b: &[L], cur: &mut Vec<L>, sign: i32, out: &mut Vec<(Vec<L>, i32)>) {
        if a.is_empty() && b.is_empty() {
            out.push((cur.clone(), sign));
            return;
        }
        if let Some((x, rest)) = a.split_first() {
            cur.push(x.clone());
            rec(rest, b, cur, sign, out);
            cur.pop();
        }
        if let Some((y, rest)) = b.split_first() {
            // y jumps over the remaining letters of a
            cur.push(y.clone());
            rec(a, rest, cur, sign * parity(a.len() as i32), out);
            cur.pop();
        }
    }
    rec(a, b, &mut Vec::new(), 1, &mut out);
    out
}

pub fn word_product(a: &WordComb, b: &WordComb) -> WordComb {
    let mut out = WordComb::new();
    for (x, cx) in a.iter() {
        for (y, cy) in b.iter() {
            let c = cx * cy;
            for (w, s) in shuffles(x, y) {
                out.add(w, &c.scale(&q(s as i64)));
            }
        }
    }
    out
}

/// Merge of adjacent letters i, i+1 (0-based) with sign (-1)^(i+1).
pub fn word_differential_terms(w: &HWord) -> Vec<(HWord, i32)> {
    let mut out = Vec::new();
    for i in 0..w.len().saturating_sub(1) {
        let mut v: HWord = w[..i].to_vec();
        v.push(w[i].iter().zip(&w[i + 1]).map(|(a, b)| a + b).collect());
        v.extend_from_slice(&w[i + 2..]);
        out.push((v, parity(i as i32 + 1)));
    }
    out
}

pub fn word_differential(x: &WordComb) -> WordComb {
    let mut out = WordComb::new();
    for (w, c) in x.iter() {
        for (v, s) in word_differential_terms(w) {
            out.add(v, &c.scale(&q(s as i64)));
        }
    }
    out
}

/// Deconcatenation coproduct.
pub fn word_coproduct(w: &HWord) -> Vec<(HWord, HWord)> {
    (0..=w.len()).map(|k| (w[..k].to_vec(), w[k..].to_vec())).collect()
}

// ---------------------------------------------------------------------------
// Koszul complex K_G = (H(BG) ⊗ Λ(β), d_κ β_i = α_i)

/// α exponents and the set of β's present (sorted by generator index).
pub type KMono = (Vec<u32>, Vec<bool>);
pub type KComb = LinComb<KMono>;

pub struct KoszulComplex {
    pub pres: HBGPresentation,
}

impl KoszulComplex {
    pub fn new(pres: HBGPresentation) -> KoszulComplex {
        KoszulComplex { pres }
    }

    pub fn degree(&self, m: &KMono) -> i32 {
        let a: i32 = m.0.iter().zip(&self.pres.gens).map(|(e, (_, d))| *e as i32 * d).sum();
        let b: i32 = m.1.iter().zip(&self.pres.gens).filter(|(x, _)| **x).map(|(_, (_, d))| d - 1).sum();
        a + b
    }

    fn weight(m: &KMono) -> u32 {
        m.0.iter().sum::<u32>() + m.1.iter().filter(|x| **x).count() as u32
    }

    /// d_κ: odd derivation sending β_i to α_i.
    pub fn d(&self, x: &KComb) -> KComb {
        let mut out = KComb::new();
        for ((a, b), c) in x.iter() {
            for i in 0..b.len() {
                if !b[i] {
                    continue;
                }
                let before = b[..i].iter().filter(|x| **x).count() as i32;
                let mut a2 = a.clone();
                a2[i] += 1;
                let mut b2 = b.clone();
                b2[i] = false;
                out.add((a2, b2), &c.scale(&q(parity(before) as i64)));
            }
        }
        out
    }

    /// h_κ = (1/w) Σ β_i ∂/∂α_i on monomials of weight w > 0, extending h_κ(α_i) = β_i.
    pub fn h(&self, x: &KComb) -> KComb {
        let mut out = KComb::new();
        for (m, c) in x.iter() {
            let w = Self::weight(m);
            if w == 0 {
                continue;
            }
            let (a, b) = m;
            for i in 0..a.len() {
                if a[i] == 0 || b[i] {
                    continue;
                }
                let before = b[..i].iter().filter(|x| **x).count() as i32;
                let mut a2 = a.clone();
                a2[i] -= 1;
                let mut b2 = b.clone();
                b2[i] = true;
                let f = crate::scalar::qf(a[i] as i64 * parity(before) as i64, w as i64);
                out.add((a2, b2), &c.scale(&f));
            }
        }
        out
    }

    pub fn monomials(&self, max_degree: i32) -> Vec<KMono> {
        let r = self.pres.gens.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << r) {
            let b: Vec<bool> = (0..r).map(|i| mask >> i & 1 == 1).collect();
            let bdeg: i32 = (0..r).filter(|&i| b[i]).map(|i| self.pres.gens[i].1 - 1).sum();
            if bdeg > max_degree {
                continue;
            }
            for a in self.pres.monomials(max_degree - bdeg).into_iter().chain(std::iter::once(vec![0; r])) {
                out.push((a, b.clone()));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Verify d_κ² = 0 and d_κh_κ + h_κd_κ = id - ε on all monomials up to a degree bound;
/// returns the first failing monomial.
pub fn koszul_check(k: &KoszulComplex, max_degree: i32) -> std::result::Result<usize, KMono> {
    let ms = k.monomials(max_degree);
    for m in &ms {
        let x = KComb::single(m.clone(), Scalar::one());
        if !k.d(&k.d(&x)).is_zero() {
            return Err(m.clone());
        }
        let mut lhs = k.d(&k.h(&x));
        lhs.add_comb(&k.h(&k.d(&x)), &Scalar::one());
        let mut rhs = x.clone();
        if KoszulComplex::weight(m) == 0 {
            rhs = KComb::new();
        }
        if !lhs.sub(&rhs).is_zero() {
            return Err(m.clone());
        }
    }
    Ok(ms.len())
}

// ---------------------------------------------------------------------------
// Graphs_M^fr: a Graphs_M graph with a word at each external vertex

pub type FramedKey = (Graph, Vec<HWord>);
pub type FramedComb = LinComb<FramedKey>;

pub fn framed_degree(pres: &HBGPresentation, x: &FramedKey) -> i32 {
    x.0.degree() + x.1.iter().map(|w| pres.word_degree(w)).sum::<i32>()
}

/// Add a framed term, canonicalizing its graph (externals and their words stay put).
pub fn add_framed(out: &mut FramedComb, g: &Graph, words: Vec<HWord>, c: &Scalar) {
    let (cg, s) = canonical_form(g);
    if s != 0 {
        out.add((cg, words), &c.scale(&q(s as i64)));
    }
}

/// Representatives of H(BG) generators in Graphs_M(1), read from the model's classes.
pub struct ClassMap {
    pub reps: Vec<Option<GraphComb>>,
    pub names: Vec<String>,
}

impl ClassMap {
    pub fn new(pd: &PDModel, pres: &HBGPresentation) -> Result<ClassMap> {
        let mut reps = Vec::new();
        for (name, deg) in &pres.gens {
            match pd.classes.get(name) {
                Some((d, rep)) => {
                    if d != deg {
                        return Err(Error::DegreeMismatch(format!("class {name}: {d} vs {deg}")));
                    }
                    let z = crate::manifold::default_z();
                    let dr = crate::manifold::differential_graphs_m(pd, &z, rep)?;
                    if !dr.is_zero() {
                        return Err(Error::Invalid(format!("representative of {name} is not closed")));
                    }
                    reps.push(Some(rep.clone()));
                }
                None => reps.push(None),
            }
        }
        Ok(ClassMap { reps, names: pres.gens.iter().map(|g| g.0.clone()).collect() })
    }

    /// Image of a monomial, as a Graphs_M(k) element living at external j.
    pub fn image(&self, l: &Letter, n: i32, k: usize, j: usize) -> Result<GraphComb> {
        let mut acc = GraphComb::from_graph(&Graph::empty(n, k));
        for (i, e) in l.iter().enumerate() {
            if *e == 0 {
                continue;
            }
            let rep = self.reps[i].as_ref().ok_or_else(|| Error::MissingRepresentative(self.names[i].clone()))?;
            let mut lifted = GraphComb::new();
            for (g, c) in rep.iter() {
                lifted.add_graph(&lift_to_slot(g, k, j), 1, c);
            }
            for _ in 0..*e {
                acc = glue_product(&acc, &lifted)?;
            }
        }
        Ok(acc)
    }
}

/// Differential of Graphs_M^fr: d on the graph, the merge differential on each word and
/// the linking term attaching the image of a word's first letter to its vertex.
pub fn fr_differential(
    pd: &PDModel,
    z: &PartitionFunction,
    pres: &HBGPresentation,
    classes: &ClassMap,
    x: &FramedComb,
) -> Result<FramedComb> {
    let mut out = FramedComb::new();
    for ((g, words), c) in x.iter() {
        if words.len() != g.ext {
            return Err(Error::Dimension(format!("{} words for arity {}", words.len(), g.ext)));
        }
        for (h, ch) in differential_graph_m(pd, z, g).iter() {
            out.add((h.clone(), words.clone()), &(c * ch));
        }
        let mut prefix = g.degree();
        for j in 0..words.len() {
            let s = parity(prefix);
            for (v, sv) in word_differential_terms(&words[j]) {
                let mut ws = words.clone();
                ws[j] = v;
                out.add((g.clone(), ws), &c.scale(&q((s * sv) as i64)));
            }
            if let Some(first) = words[j].first() {
                let img = classes.image(first, g.n, g.ext, j)?;
                let mut ws = words.clone();
                ws[j] = words[j][1..].to_vec();
                let prod = glue_product(&img, &GraphComb::from_graph(g))?;
                for (h, ch) in prod.iter() {
                    out.add((h.clone(), ws.clone()), &(&(c * ch)).scale(&q(s as i64)));
                }
            }
            prefix += pres.word_degree(&words[j]);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ĥ(G)-coaction on Graphs_n through the MC element

/// T·: remove a non-loop edge.
pub fn tadpole_action(g: &Graph) -> Vec<(Graph, i32)> {
    tadpole_action_on(g, &|_| true)
}

/// Tadpole action removing only edges whose color passes `removable`.
pub fn tadpole_action_on(g: &Graph, removable: &dyn Fn(Color) -> bool) -> Vec<(Graph, i32)> {
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    let mut out = Vec::new();
    for (j, e) in g.edges.iter().enumerate() {
        if e.is_loop() || !removable(e.color) {
            continue;
        }
        let (s1, front) = front_sign(&word, &[tg.et[j]]);
        let mut h = tg.clone();
        h.remove_edge(j);
        let s = s1 * koszul_sign(&front[1..], &h.word()) * removal_sign(g.n);
        out.push((h.g, s));
    }
    out
}

/// θ_k·, dual to the action of the θ-graph on the Graphs operad: remove an internal
/// vertex of valence k (no loops) with its edges, minus the contraction of every pair of
/// vertices joined by exactly k edges. Terms common to both sums cancel and are skipped.
pub fn theta_action(g: &Graph, k: usize) -> Vec<(Graph, i32)> {
    theta_action_on(g, k, &|_| true)
}

/// θ_k· where every removed edge must pass `removable`.
pub fn theta_action_on(g: &Graph, k: usize, removable: &dyn Fn(Color) -> bool) -> Vec<(Graph, i32)> {
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let word = tg.word();
    let mut out = Vec::new();
    let incident = |x: usize| -> Vec<usize> {
        (0..g.edges.len()).filter(|&j| g.edges[j].a as usize == x || g.edges[j].b as usize == x).collect()
    };
    let other = |j: usize, x: usize| {
        let e = g.edges[j];
        if e.a as usize == x {
            e.b as usize
        } else {
            e.a as usize
        }
    };
    // edges are read as pointing into the removed vertex
    let flips = |es: &[usize], y: usize| -> i32 {
        es.iter().map(|&j| if g.edges[j].a as usize == y { parity(g.n) } else { 1 }).product()
    };
    for y in g.ext..g.nv() {
        if !g.decos[y].is_empty() {
            continue;
        }
        let inc = incident(y);
        if inc.iter().any(|&j| g.edges[j].is_loop()) {
            continue;
        }
        // removal of a k-valent vertex
        let ok = |es: &[usize]| es.iter().all(|&j| removable(g.edges[j].color));
        if inc.len() == k && inc.iter().any(|&j| other(j, y) != other(inc[0], y)) && ok(&inc) {
            let mut sel = vec![tg.vertex_tag(y)];
            sel.extend(inc.iter().map(|&j| tg.et[j]));
            let (s1, front) = front_sign(&word, &sel);
            let mut h = tg.clone();
            for &j in inc.iter().rev() {
                h.remove_edge(j);
            }
            h.delete_internal(y, None);
            out.push((h.g.clone(), flips(&inc, y) * s1 * koszul_sign(&front[sel.len()..], &h.word())));
        }
        // contraction of y into a partner a joined by exactly k edges
        let mut partners: Vec<usize> = inc.iter().map(|&j| other(j, y)).collect();
        partners.sort();
        partners.dedup();
        for a in partners {
            if a > y && g.is_internal(a) {
                continue;
            }
            let between: Vec<usize> = inc.iter().copied().filter(|&j| other(j, y) == a).collect();
            if between.len() != k || inc.len() == k || !ok(&between) {
                continue;
            }
            if g.is_internal(a) && incident(a).len() == k {
                continue;
            }
            let mut sel = vec![tg.vertex_tag(y)];
            sel.extend(between.iter().map(|&j| tg.et[j]));
            let (s1, front) = front_sign(&word, &sel);
            let mut h = tg.clone();
            for &j in between.iter().rev() {
                h.remove_edge(j);
            }
            h.merge_into(a, y);
            out.push((h.g.clone(), -flips(&between, y) * s1 * koszul_sign(&front[sel.len()..], &h.word())));
        }
    }
    out
}

/// One letter of the coaction: the monomial and the operator it carries.
#[derive(Clone, Debug)]
pub struct CoactionLetter {
    pub letter: Letter,
    pub coeff: Q,
    /// 0 for the tadpole, k for θ_k.
    pub theta_edges: usize,
}

/// Letters of the gauge-normalized MC element: E·T for n even, p_top^j·θ_{2j+1} for n
/// odd (j ≤ jmax). In the normalization of `theta_action` the canonical θ_k acts as
/// -k!·θ_k·, which turns the coefficients p^j/(2j+1)! into -p^j.
pub fn coaction_letters(n: i32, pres: &HBGPresentation, jmax: u32) -> Vec<CoactionLetter> {
    if n % 2 == 0 {
        return vec![CoactionLetter { letter: pres.letter("E"), coeff: Q::one(), theta_edges: 0 }];
    }
    let top = pres.gens.len() - 1;
    (1..=jmax)
        .map(|j| {
            let mut letter = vec![0; pres.gens.len()];
            letter[top] = j;
            CoactionLetter { letter, coeff: -Q::one(), theta_edges: 2 * j as usize + 1 }
        })
        .collect()
}

fn apply_letter(l: &CoactionLetter, g: &Graph) -> Vec<(Graph, i32)> {
    apply_letter_on(l, g, &|_| true)
}

/// The operator carried by a letter, restricted to removable edge colors.
pub fn apply_letter_on(l: &CoactionLetter, g: &Graph, removable: &dyn Fn(Color) -> bool) -> Vec<(Graph, i32)> {
    if l.theta_edges == 0 {
        tadpole_action_on(g, removable)
    } else {
        theta_action_on(g, l.theta_edges, removable)
    }
}

impl CoactionLetter {
    /// Cohomological degree of the operator on Graphs_n.
    pub fn op_degree(&self, n: i32) -> i32 {
        if self.theta_edges == 0 {
            1 - n
        } else {
            n - self.theta_edges as i32 * (n - 1)
        }
    }

    /// Loop order of the graph carrying the operator.
    pub fn loop_order(&self) -> u32 {
        if self.theta_edges == 0 {
            1
        } else {
            self.theta_edges as u32 - 1
        }
    }
}

/// Γ ↦ Σ [x_1|…|x_k] ⊗ a_{x_1}(…a_{x_k}(Γ)), words up to `max_letters`; results with
/// internal-only components vanish.
pub fn hg_coaction(letters: &[CoactionLetter], g: &Graph, max_letters: usize) -> LinComb<(HWord, Graph)> {
    let mut out = LinComb::new();
    let mut layer: Vec<(HWord, Graph, Q)> = vec![(vec![], g.clone(), Q::one())];
    for depth in 0..=max_letters {
        let mut next = Vec::new();
        for (w, h, c) in &layer {
            let (ch, s) = canonical_form(h);
            if s != 0 && !h.has_internal_component() {
                out.add((w.clone(), ch), &Scalar::from_q(c.clone() * q(s as i64)));
            }
            if depth == max_letters {
                continue;
            }
            for l in letters {
                for (r, s) in apply_letter(l, h) {
                    // the new letter is applied innermost, so it goes last in the word
                    let mut v = w.clone();
                    v.push(l.letter.clone());
                    next.push((v, r, c.clone() * l.coeff.clone() * q(s as i64)));
                }
            }
        }
        layer = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Graphs_n-coaction on Graphs_M^fr

pub type FramedPair = (FramedKey, Graph);

/// Collapse externals i..i+s: coact_fiberwise on the graph, the Ĥ(G)-coaction on the
/// collapsed Graphs_n factor, and multiplication of the block words and the extracted
/// word into the word at the new vertex i.
pub fn framed_coaction(
    pd: &PDModel,
    pres: &HBGPresentation,
    letters: &[CoactionLetter],
    x: &FramedComb,
    i: usize,
    s: usize,
    max_letters: usize,
) -> Result<LinComb<FramedPair>> {
    let mut out = LinComb::new();
    for ((g, words), c) in x.iter() {
        if s == 0 || i + s > g.ext || words.len() != g.ext {
            return Err(Error::Invalid(format!("slot {} with block size {} in arity {}", i + 1, s, g.ext)));
        }
        let wdeg: Vec<i32> = words.iter().map(|w| pres.word_degree(w)).collect();
        let total: i32 = wdeg.iter().sum();
        let after: i32 = wdeg[i + s..].iter().sum();
        // shuffle the block words together
        let mut block = WordComb::single(vec![], Scalar::one());
        for w in &words[i..i + s] {
            block = word_product(&block, &WordComb::single(w.clone(), Scalar::one()));
        }
        for (l, r, sg) in collapse_terms(g, i, s, true) {
            if pd.tadpole_free() && l.has_loop() {
                continue;
            }
            let (cl, sl) = canonical_form(&l);
            if sl == 0 {
                continue;
            }
            // words move past the inner graph
            let s0 = sg * sl * parity(r.degree() * total);
            for ((b, r2), cb) in hg_coaction(letters, &r, max_letters).iter() {
                // b moves left past the words after the block
                let s1 = s0 * parity(pres.word_degree(b) * after);
                let prod = word_product(&block, &WordComb::single(b.clone(), Scalar::one()));
                for (w, cw) in prod.iter() {
                    let mut ws: Vec<HWord> = words[..i].to_vec();
                    ws.push(w.clone());
                    ws.extend_from_slice(&words[i + s..]);
                    let coeff = &(c * cb) * cw;
                    out.add(((cl.clone(), ws), r2.clone()), &coeff.scale(&q(s1 as i64)));
                }
            }
        }
    }
    Ok(out)
}

/// Target differential for framed_coaction: fr_differential on the left factor and
/// δ_contr on the right one.
pub fn framed_pair_differential(
    pd: &PDModel,
    z: &PartitionFunction,
    pres: &HBGPresentation,
    classes: &ClassMap,
    x: &LinComb<FramedPair>,
) -> Result<LinComb<FramedPair>> {
    let mut out = LinComb::new();
    for ((l, r), c) in x.iter() {
        let dl = fr_differential(pd, z, pres, classes, &FramedComb::single(l.clone(), Scalar::one()))?;
        for (k, ck) in dl.iter() {
            out.add((k.clone(), r.clone()), &(c * ck));
        }
        let sl = parity(framed_degree(pres, l));
        for (h, s) in crate::kontsevich::contraction_terms(r, true, &|col| col == crate::graph::Color::Plain) {
            let (ch, s2) = canonical_form(&h);
            if s2 != 0 {
                out.add((l.clone(), ch), &c.scale(&q((sl * s * s2) as i64)));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Framing change

/// σ on generators: images in H(M) given as one-vertex decorated graphs.
pub type Sigma = BTreeMap<String, GraphComb>;

pub fn parse_sigma(pd: &PDModel, v: &serde_json::Value) -> Result<Sigma> {
    let obj = v.as_object().ok_or_else(|| Error::Parse("σ must be an object".into()))?;
    let mut out = Sigma::new();
    for (k, g) in obj {
        out.insert(k.clone(), pd.graph_from_json(g)?);
    }
    Ok(out)
}

/// The single twisting term of f_σ: (generator, operator). None when f_σ is the identity
/// by degree or because σ vanishes on the relevant generator.
fn framing_term(pd: &PDModel, pres: &HBGPresentation, sigma: &Sigma) -> Result<Option<(GraphComb, usize)>> {
    for (name, a) in sigma {
        let i = pres.index(name).ok_or_else(|| Error::Invalid(format!("σ names unknown generator {name}")))?;
        for (g, _) in a.iter() {
            if g.ext != 1 || !g.edges.is_empty() || g.int != 0 || g.n != pd.n {
                return Err(Error::Invalid(format!("σ({name}) must be an element of H(M)")));
            }
            if g.degree() != pres.gens[i].1 - 1 {
                return Err(Error::DegreeMismatch(format!(
                    "σ({name}) has degree {}, expected {}",
                    g.degree(),
                    pres.gens[i].1 - 1
                )));
            }
        }
    }
    let (name, op) = if pd.n % 2 == 0 {
        ("E".to_string(), 0)
    } else {
        let top = pres.gens.last().map(|g| g.0.clone()).unwrap_or_default();
        (top, 3)
    };
    Ok(sigma.get(&name).filter(|a| !a.is_zero()).map(|a| (a.clone(), op)))
}

/// The Graphs_n-coaction on Graphs_M twisted by f_σ: for each collapse term (Γ', γ),
/// add σ(E)·Γ' ⊗ T·γ (n even) or σ(p_top)·Γ' ⊗ θ·γ (n odd).
pub fn framing_change(
    pd: &PDModel,
    pres: &HBGPresentation,
    sigma: &Sigma,
    x: &GraphComb,
    i: usize,
    s: usize,
) -> Result<LinComb<crate::kontsevich::GraphPair>> {
    let base = crate::manifold::coact_fiberwise(pd, x, i, s)?;
    let Some((a, op)) = framing_term(pd, pres, sigma)? else {
        return Ok(base);
    };
    let op_degree = if op == 0 { 1 - pd.n } else { pd.n - op as i32 * (pd.n - 1) };
    let mut out = base.clone();
    for ((l, r), c) in base.iter() {
        let terms = if op == 0 { tadpole_action(r) } else { theta_action(r, op) };
        for (r2, sr) in terms {
            if r2.has_internal_component() {
                continue;
            }
            for (ag, ca) in a.iter() {
                // σ sits between the factors; move it into vertex i of the left one
                let mut tagger = Tagger::new();
                let tl = TGraph::new(l, &mut tagger);
                let mut nl = tl.clone();
                let mut from: Word = Vec::new();
                for (k, d) in ag.decos[0].iter().enumerate() {
                    let t = 80_000 + k as u32;
                    nl.push_deco(i, *d, t);
                    from.push((t, d.deg % 2 != 0));
                }
                from.extend(tl.word());
                // the operator passes L on its way to the right factor
                let sg = koszul_sign(&from, &nl.word()) * sr * parity(l.degree() * op_degree);
                crate::kontsevich::add_pair(&mut out, &nl.g, &r2, sg, &(c * ca));
            }
        }
    }
    Ok(out)
}

/// Differential on Graphs_M ⊗ Graphs_n for a framed M: d_M on the left, δ_contr on the
/// right.
pub fn framed_target_differential(
    pd: &PDModel,
    z: &PartitionFunction,
    x: &LinComb<crate::kontsevich::GraphPair>,
) -> LinComb<crate::kontsevich::GraphPair> {
    crate::manifold::pair_differential(pd, z, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pres2() -> HBGPresentation {
        HBGPresentation::new(vec![("p4".into(), 4), ("p8".into(), 8)]).unwrap()
    }

    #[test]
    fn presentations() {
        assert_eq!(HBGPresentation::for_dimension(2).gens, vec![("E".to_string(), 2)]);
        assert_eq!(HBGPresentation::for_dimension(3).gens, vec![("p1".to_string(), 4)]);
        assert_eq!(HBGPresentation::for_dimension(4).gens, vec![("p1".to_string(), 4), ("E".to_string(), 4)]);
        assert_eq!(HBGPresentation::for_dimension(5).gens.last().unwrap().1, 8);
        assert!(HBGPresentation::new(vec![("x".into(), 3)]).is_err());
    }

    #[test]
    fn two_letter_shuffle() {
        let p = pres2();
        let a = vec![p.letter("p4")];
        let b = vec![p.letter("p8")];
        let got = word_product(&WordComb::single(a.clone(), Scalar::one()), &WordComb::single(b.clone(), Scalar::one()));
        let mut want = WordComb::new();
        want.add(vec![a[0].clone(), b[0].clone()], &Scalar::one());
        want.add(vec![b[0].clone(), a[0].clone()], &Scalar::from_int(-1));
        assert_eq!(got, want);
        let unit = WordComb::single(vec![], Scalar::one());
        assert_eq!(word_product(&unit, &WordComb::single(a.clone(), Scalar::one())), WordComb::single(a, Scalar::one()));
    }

    #[test]
    fn merge_of_two_letters() {
        let p = pres2();
        let w = vec![p.letter("p4"), p.letter("p8")];
        let d = word_differential(&WordComb::single(w, Scalar::one()));
        assert_eq!(d, WordComb::single(vec![vec![1, 1]], Scalar::from_int(-1)));
        assert!(word_differential(&WordComb::single(vec![p.letter("p4")], Scalar::one())).is_zero());
    }

    #[test]
    fn koszul_homotopy() {
        assert_eq!(koszul_check(&KoszulComplex::new(HBGPresentation { gens: vec![] }), 10), Ok(1));
        let k = KoszulComplex::new(pres2());
        assert!(koszul_check(&k, 24).unwrap() > 10);
        // h(α_1) = β_1
        let a1 = KComb::single((vec![1, 0], vec![false, false]), Scalar::one());
        assert_eq!(k.h(&a1), KComb::single((vec![0, 0], vec![true, false]), Scalar::one()));
    }

    #[test]
    fn tadpole_action_on_an_edge() {
        let g = Graph::new(2, 2, 0, &[(0, 1)]);
        let t = tadpole_action(&g);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].0, Graph::empty(2, 2));
        assert!(tadpole_action(&Graph::new(2, 1, 0, &[(0, 0)])).is_empty());
    }

    #[test]
    fn theta_action_needs_a_theta() {
        // a trivalent vertex with all edges to one vertex is the cancelling case
        assert!(theta_action(&Graph::new(3, 1, 1, &[(0, 1), (0, 1), (0, 1)]), 3).is_empty());
        let t = theta_action(&Graph::new(3, 2, 1, &[(0, 2), (1, 2), (0, 2)]), 3);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].0, Graph::empty(3, 2));
        let t = theta_action(&Graph::new(3, 2, 1, &[(0, 2), (0, 2), (0, 2), (1, 2)]), 3);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].0, Graph::new(3, 2, 0, &[(1, 0)]));
    }
}
