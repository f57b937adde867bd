use confmodels::framed::*;
use confmodels::kontsevich::{cocompose, contraction_terms, graphs_n_by_size};
use confmodels::manifold::*;
use confmodels::scalar::q;
use confmodels::{canonical_form, Color, Graph, GraphComb, LinComb, Scalar};

fn fixture(name: &str) -> PDModel {
    let path = format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    PDModel::from_json_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn one(w: &HWord) -> WordComb {
    WordComb::single(w.clone(), Scalar::one())
}

fn sign_of(deg: i32) -> i64 {
    if deg % 2 == 0 {
        1
    } else {
        -1
    }
}

fn two_generator_words() -> (HBGPresentation, Vec<HWord>) {
    let p = HBGPresentation::new(vec![("p4".into(), 4), ("p8".into(), 8)]).unwrap();
    let ws = p.words(3, 8);
    (p, ws)
}

#[test]
fn shuffle_is_associative_and_commutative() {
    let (p, ws) = two_generator_words();
    let short: Vec<&HWord> = ws.iter().filter(|w| w.len() <= 2).collect();
    for a in &short {
        for b in &short {
            let ab = word_product(&one(a), &one(b));
            let ba = word_product(&one(b), &one(a));
            let s = sign_of(p.word_degree(a) * p.word_degree(b));
            assert_eq!(ab, ba.scale(&Scalar::from_int(s)), "{a:?} {b:?}");
            for c in &short {
                if a.len() + b.len() + c.len() > 3 {
                    continue;
                }
                let l = word_product(&ab, &one(c));
                let r = word_product(&one(a), &word_product(&one(b), &one(c)));
                assert_eq!(l, r);
            }
        }
    }
}

#[test]
fn merge_differential_squares_to_zero_and_is_a_derivation() {
    let (p, _) = two_generator_words();
    for w in p.words(4, 8) {
        assert!(word_differential(&word_differential(&one(&w))).is_zero(), "{w:?}");
    }
    let ws = p.words(3, 8);
    for a in &ws {
        for b in &ws {
            if a.len() + b.len() > 3 {
                continue;
            }
            let l = word_differential(&word_product(&one(a), &one(b)));
            let mut r = word_product(&word_differential(&one(a)), &one(b));
            r.add_comb(
                &word_product(&one(a), &word_differential(&one(b))),
                &Scalar::from_int(sign_of(p.word_degree(a))),
            );
            assert_eq!(l, r, "{a:?} {b:?}");
        }
    }
}

#[test]
fn deconcatenation_is_coassociative_and_compatible_with_merging() {
    let (p, ws) = two_generator_words();
    for w in &ws {
        let mut l = Vec::new();
        for (a, bc) in word_coproduct(w) {
            for (b, c) in word_coproduct(&bc) {
                l.push((a.clone(), b, c));
            }
        }
        let mut r = Vec::new();
        for (ab, c) in word_coproduct(w) {
            for (a, b) in word_coproduct(&ab) {
                r.push((a, b, c.clone()));
            }
        }
        l.sort();
        r.sort();
        assert_eq!(l, r);
        // Δd = (d⊗1 + (-1)^|a| 1⊗d)Δ
        let mut lhs: LinComb<(HWord, HWord)> = LinComb::new();
        for (v, s) in word_differential_terms(w) {
            for (a, b) in word_coproduct(&v) {
                lhs.add((a, b), &Scalar::from_int(s as i64));
            }
        }
        let mut rhs: LinComb<(HWord, HWord)> = LinComb::new();
        for (a, b) in word_coproduct(w) {
            for (v, s) in word_differential_terms(&a) {
                rhs.add((v, b.clone()), &Scalar::from_int(s as i64));
            }
            for (v, s) in word_differential_terms(&b) {
                rhs.add((a.clone(), v), &Scalar::from_int(s as i64 * sign_of(p.word_degree(&a))));
            }
        }
        assert_eq!(lhs, rhs, "{w:?}");
    }
}

#[test]
fn koszul_complex_is_acyclic() {
    for n in 2..=6 {
        let k = KoszulComplex::new(HBGPresentation::for_dimension(n));
        assert!(koszul_check(&k, 16).is_ok(), "n = {n}");
    }
    let k = KoszulComplex::new(HBGPresentation::new(vec![("a".into(), 2), ("b".into(), 2)]).unwrap());
    assert!(koszul_check(&k, 12).is_ok());
}

fn canon_terms(terms: Vec<(Graph, i32)>, c: &Scalar, out: &mut GraphComb) {
    for (h, s) in terms {
        if h.has_internal_component() {
            continue;
        }
        out.add_graph(&h, s, c);
    }
}

fn apply(x: &GraphComb, f: &dyn Fn(&Graph) -> Vec<(Graph, i32)>) -> GraphComb {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        canon_terms(f(g), c, &mut out);
    }
    out
}

#[test]
fn tadpole_and_theta_actions_anticommute_with_contraction() {
    let d = |g: &Graph| contraction_terms(g, true, &|c| c == Color::Plain);
    for (n, op) in [(2, 0usize), (4, 0), (3, 3), (3, 5)] {
        let act = move |g: &Graph| if op == 0 { tadpole_action(g) } else { theta_action(g, op) };
        let mut seen = 0;
        for r in 1..=3 {
            for e in 0..=6 {
                for m in 0..=2 {
                    for g in graphs_n_by_size(n, r, e, m) {
                        let x = GraphComb::from_graph(&g);
                        let mut s = apply(&apply(&x, &act), &d);
                        s.add_comb(&apply(&apply(&x, &d), &act), &Scalar::one());
                        if op == 5 {
                            // θ5 is not closed: dθ5 is proportional to [θ3, θ3]
                            let t3 = |h: &Graph| theta_action(h, 3);
                            s = s.sub(&apply(&apply(&x, &t3), &t3));
                        }
                        assert!(s.is_zero(), "n = {n}, op {op}: {g}");
                        seen += 1;
                    }
                }
            }
        }
        assert!(seen > 100);
    }
}

/// (d_words ± δ_contr)ρ = ρ δ_contr for the Ĥ(G)-coaction on Graphs_n.
fn twisting_defect(pres: &HBGPresentation, letters: &[CoactionLetter], g: &Graph, max: usize) -> LinComb<(HWord, Graph)> {
    let rho = hg_coaction(letters, g, max);
    let mut lhs: LinComb<(HWord, Graph)> = LinComb::new();
    for ((w, h), c) in rho.iter() {
        for (v, s) in word_differential_terms(w) {
            lhs.add((v, h.clone()), &c.scale(&q(s as i64)));
        }
        let sw = sign_of(pres.word_degree(w));
        for (h2, s) in contraction_terms(h, true, &|c| c == Color::Plain) {
            let (ch, s2) = canonical_form(&h2);
            if s2 != 0 {
                lhs.add((w.clone(), ch), &c.scale(&q(sw * (s * s2) as i64)));
            }
        }
    }
    for (h2, s) in contraction_terms(g, true, &|c| c == Color::Plain) {
        let (ch, s2) = canonical_form(&h2);
        if s2 == 0 {
            continue;
        }
        for (k, c) in hg_coaction(letters, &ch, max).iter() {
            lhs.add(k.clone(), &c.scale(&q(-(s * s2) as i64)));
        }
    }
    lhs
}

#[test]
fn word_coaction_on_graphs_n_is_a_chain_map() {
    for n in [2, 3] {
        let pres = HBGPresentation::for_dimension(n);
        let letters = coaction_letters(n, &pres, 2);
        let mut nontrivial = 0;
        for r in 1..=2 {
            for e in 0..=7 {
                for m in 0..=3 {
                    if e + m > 9 {
                        continue;
                    }
                    for g in graphs_n_by_size(n, r, e, m) {
                        if hg_coaction(&letters, &g, 2).len() > 1 {
                            nontrivial += 1;
                        }
                        let d = twisting_defect(&pres, &letters, &g, 2);
                        assert!(d.is_zero(), "n = {n}: {g}: {:?}", d.iter().next());
                    }
                }
            }
        }
        assert!(nontrivial > 50, "n = {n}: {nontrivial}");
    }
}

// ---------------------------------------------------------------------------
// Graphs_M^fr

fn window(pd: &PDModel, k: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    for e in 0..=3 {
        out.extend(graphs_m_basis(pd, k, e, 2, pd.n));
    }
    out
}

/// Word assignments for k externals with at most `letters` letters in total.
fn word_assignments(pres: &HBGPresentation, k: usize, letters: usize) -> Vec<Vec<HWord>> {
    let ws = pres.words(letters, 2 * pres.gens.iter().map(|g| g.1).max().unwrap_or(0));
    let mut out = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for a in &out {
            let used: usize = a.iter().map(|w: &HWord| w.len()).sum();
            for w in &ws {
                if used + w.len() <= letters {
                    let mut b = a.clone();
                    b.push(w.clone());
                    next.push(b);
                }
            }
        }
        out = next;
    }
    out
}

fn framed_window(pd: &PDModel, pres: &HBGPresentation, k: usize, letters: usize) -> Vec<FramedKey> {
    let mut out = Vec::new();
    let ws = word_assignments(pres, k, letters);
    for g in window(pd, k) {
        for w in &ws {
            out.push((g.clone(), w.clone()));
        }
    }
    out
}

fn setup(name: &str) -> (PDModel, HBGPresentation, ClassMap) {
    let pd = fixture(name);
    let pres = HBGPresentation::for_dimension(pd.n);
    let classes = ClassMap::new(&pd, &pres).unwrap();
    (pd, pres, classes)
}

#[test]
fn framed_differential_squares_to_zero() {
    let z = default_z();
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let (pd, pres, classes) = setup(name);
        for k in 1..=2 {
            let basis = framed_window(&pd, &pres, k, 2);
            assert!(!basis.is_empty());
            for key in basis {
                let x = FramedComb::single(key.clone(), Scalar::one());
                let d = fr_differential(&pd, &z, &pres, &classes, &x).unwrap();
                let dd = fr_differential(&pd, &z, &pres, &classes, &d).unwrap();
                assert!(dd.is_zero(), "{name}: {key:?}: {:?}", dd.iter().next());
            }
        }
    }
}

#[test]
fn linking_attaches_the_euler_representative() {
    let (pd, pres, classes) = setup("s2");
    let z = default_z();
    let x = FramedComb::single((Graph::empty(2, 1), vec![vec![pres.letter("E")]]), Scalar::one());
    let d = fr_differential(&pd, &z, &pres, &classes, &x).unwrap();
    let mut want = FramedComb::new();
    for (g, c) in pd.classes["E"].1.iter() {
        want.add((canonical_form(g).0, vec![vec![]]), c);
    }
    assert!(d == want || d == want.scale(&Scalar::from_int(-1)), "{d:?}");
    assert!(!d.is_zero());
    // bare graphs with empty words see only the Graphs_M differential
    for g in window(&pd, 2).into_iter().take(40) {
        let d = fr_differential(&pd, &z, &pres, &classes, &FramedComb::single((g.clone(), vec![vec![], vec![]]), Scalar::one()))
            .unwrap();
        let dm = differential_graph_m(&pd, &z, &g);
        let lifted: FramedComb = dm.iter().map(|(h, c)| ((h.clone(), vec![vec![], vec![]]), c.clone())).collect();
        assert_eq!(d, lifted);
    }
}

#[test]
fn missing_representative_is_reported() {
    let pd = fixture("s2");
    let pres = HBGPresentation::new(vec![("E".into(), 2), ("p1".into(), 4)]).unwrap();
    let classes = ClassMap::new(&pd, &pres).unwrap();
    let x = FramedComb::single((Graph::empty(2, 1), vec![vec![pres.letter("p1")]]), Scalar::one());
    let r = fr_differential(&pd, &default_z(), &pres, &classes, &x);
    assert!(matches!(r, Err(confmodels::Error::MissingRepresentative(ref g)) if g == "p1"));
}

#[test]
fn framed_coaction_commutes_with_differentials() {
    let z = default_z();
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let (pd, pres, classes) = setup(name);
        let letters = coaction_letters(pd.n, &pres, 2);
        for (k, i, s) in [(2, 0, 2), (3, 0, 2), (3, 1, 2), (2, 1, 1)] {
            for key in framed_window(&pd, &pres, k, 1) {
                let x = FramedComb::single(key.clone(), Scalar::one());
                let dx = fr_differential(&pd, &z, &pres, &classes, &x).unwrap();
                let lhs = framed_coaction(&pd, &pres, &letters, &dx, i, s, 2).unwrap();
                let rho = framed_coaction(&pd, &pres, &letters, &x, i, s, 2).unwrap();
                let rhs = framed_pair_differential(&pd, &z, &pres, &classes, &rho).unwrap();
                let diff = lhs.sub(&rhs);
                assert!(diff.is_zero(), "{name} ({i},{s}): {key:?}: {:?}", diff.iter().next());
            }
        }
    }
}

type FTriple = (FramedKey, Graph, Graph);

#[test]
fn framed_coaction_is_coassociative() {
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let (pd, pres, _) = setup(name);
        let letters = coaction_letters(pd.n, &pres, 2);
        for key in framed_window(&pd, &pres, 3, 1) {
            let x = FramedComb::single(key.clone(), Scalar::one());
            let mut left: LinComb<FTriple> = LinComb::new();
            for ((l, r), c) in framed_coaction(&pd, &pres, &letters, &x, 0, 3, 2).unwrap().iter() {
                for ((a, b), c2) in cocompose(&GraphComb::from_graph(r), 0, 2).unwrap().iter() {
                    if pd.tadpole_free() && (a.has_loop() || b.has_loop()) {
                        continue;
                    }
                    left.add((l.clone(), a.clone(), b.clone()), &(c * c2));
                }
            }
            let mut right: LinComb<FTriple> = LinComb::new();
            for ((l, b), c) in framed_coaction(&pd, &pres, &letters, &x, 0, 2, 2).unwrap().iter() {
                let y = FramedComb::single(l.clone(), Scalar::one());
                for ((l2, a), c2) in framed_coaction(&pd, &pres, &letters, &y, 0, 2, 2).unwrap().iter() {
                    right.add((l2.clone(), a.clone(), b.clone()), &(c * c2));
                }
            }
            let diff = left.sub(&right);
            assert!(diff.is_zero(), "{name}: {key:?}: {:?}", diff.iter().next());
        }
    }
}

// ---------------------------------------------------------------------------
// framing change

fn sigma_of(pd: &PDModel, gen: &str, deco: &str, c: Scalar) -> Sigma {
    let g = Graph::empty(pd.n, 1).with_deco(0, pd.deco_by_name(deco).unwrap());
    let mut s = Sigma::new();
    s.insert(gen.to_string(), GraphComb::single(g, c));
    s
}

fn s2_times_s3() -> PDModel {
    let text = r#"{
        "name": "S2xS3", "n": 5,
        "basis": [["1", 0], ["x", 2], ["y", 3], ["xy", 5]],
        "product": [["x", "y", "xy", "1"], ["y", "x", "xy", "1"]],
        "integral": {"xy": "1"},
        "classes": {}
    }"#;
    PDModel::from_json_str(text).unwrap()
}

#[test]
fn trivial_framing_change_is_the_identity() {
    for name in ["s2", "t2", "s3"] {
        let (pd, pres, _) = setup(name);
        let zero = Sigma::new();
        for g in window(&pd, 2) {
            let x = GraphComb::from_graph(&g);
            let f = framing_change(&pd, &pres, &zero, &x, 0, 2).unwrap();
            assert_eq!(f, coact_fiberwise(&pd, &x, 0, 2).unwrap());
        }
    }
}

#[test]
fn framing_does_not_enter_in_dimension_five() {
    let pd = s2_times_s3();
    let pres = HBGPresentation::for_dimension(5);
    let sigma = sigma_of(&pd, "p1", "y", Scalar::param("c"));
    let mut edge = Graph::new(5, 2, 0, &[(0, 1)]);
    let mut count = 0;
    for g in [Graph::empty(5, 2), edge.clone(), Graph::new(5, 2, 1, &[(0, 2), (1, 2)])] {
        let x = GraphComb::from_graph(&g);
        let f = framing_change(&pd, &pres, &sigma, &x, 0, 2).unwrap();
        assert_eq!(f, coact_fiberwise(&pd, &x, 0, 2).unwrap());
        count += 1;
    }
    assert_eq!(count, 3);
    // the top class would need a degree 7 image
    edge.decos[0].push(pd.deco_by_name("xy").unwrap());
    let bad = sigma_of(&pd, "p2", "xy", Scalar::one());
    let r = framing_change(&pd, &pres, &bad, &GraphComb::from_graph(&edge), 0, 2);
    assert!(matches!(r, Err(confmodels::Error::DegreeMismatch(_))));
}

#[test]
fn framing_change_rejects_degree_mismatch() {
    // a top class cannot be the image of the Euler class on a surface
    let (pd, pres, _) = setup("s2");
    let sigma = sigma_of(&pd, "E", "v", Scalar::param("c"));
    let x = GraphComb::from_graph(&Graph::new(2, 2, 0, &[(0, 1)]));
    assert!(matches!(framing_change(&pd, &pres, &sigma, &x, 0, 2), Err(confmodels::Error::DegreeMismatch(_))));
}

#[test]
fn framing_change_on_an_edge_of_the_torus() {
    let (pd, pres, _) = setup("t2");
    let sigma = sigma_of(&pd, "E", "a", Scalar::param("c"));
    let x = GraphComb::from_graph(&Graph::new(2, 2, 0, &[(0, 1)]));
    let f = framing_change(&pd, &pres, &sigma, &x, 0, 2).unwrap();
    let base = coact_fiberwise(&pd, &x, 0, 2).unwrap();
    let extra = f.sub(&base);
    let a = Graph::empty(2, 1).with_deco(0, pd.deco_by_name("a").unwrap());
    let key = (canonical_form(&a).0, Graph::empty(2, 2));
    assert_eq!(extra.len(), 1);
    let c = extra.coeff(&key);
    assert!(c == Scalar::param("c") || c == -&Scalar::param("c"), "{c}");
}

#[test]
fn framing_change_is_a_chain_map() {
    let z = default_z();
    for (name, gen, deco) in [("t2", "E", "a"), ("t2", "E", "b"), ("s3", "p1", "v"), ("s1xs2", "p1", "ab")] {
        let (pd, pres, _) = setup(name);
        let sigma = sigma_of(&pd, gen, deco, Scalar::param("c"));
        let mut nontrivial = 0;
        for (k, i, s) in [(2, 0, 2), (3, 0, 2), (3, 1, 2), (3, 0, 3)] {
            for g in window(&pd, k) {
                let x = GraphComb::from_graph(&g);
                let f = framing_change(&pd, &pres, &sigma, &x, i, s).unwrap();
                if f != coact_fiberwise(&pd, &x, i, s).unwrap() {
                    nontrivial += 1;
                }
                let dx = differential_graphs_m(&pd, &z, &x).unwrap();
                let lhs = framing_change(&pd, &pres, &sigma, &dx, i, s).unwrap();
                let rhs = pair_differential(&pd, &z, &f, i);
                let diff = lhs.sub(&rhs);
                assert!(diff.is_zero(), "{name} ({i},{s}): {g}: {:?}", diff.iter().next());
            }
        }
        assert!(nontrivial > 0, "{name}");
    }
}
