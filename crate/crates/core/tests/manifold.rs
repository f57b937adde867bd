use confmodels::kontsevich::graphs_n_by_size;
use confmodels::manifold::*;
use confmodels::{canonical_form, Graph, GraphComb, LinComb, Scalar};

fn fixture(name: &str) -> PDModel {
    let path = format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    PDModel::from_json_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn window(pd: &PDModel, k: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    for e in 0..=3 {
        out.extend(graphs_m_basis(pd, k, e, 2, pd.n));
    }
    out
}

#[test]
fn graphs_m_d_squared() {
    let z = default_z();
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let pd = fixture(name);
        for k in 1..=2 {
            let basis = window(&pd, k);
            assert!(!basis.is_empty());
            for g in &basis {
                let x = GraphComb::from_graph(g);
                let d = differential_graphs_m(&pd, &z, &x).unwrap();
                let dd = differential_graphs_m(&pd, &z, &d).unwrap();
                assert!(dd.is_zero(), "{name}: d² {g} = {dd}");
            }
        }
    }
}

fn fiber_window(pd: &PDModel, r: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    let mut ms = vec![vec![]];
    ms.extend((0..pd.dim()).filter(|&k| k != pd.unit).map(|k| vec![pd.deco(k)]));
    for e in 0..=3 {
        for m in 0..=2 {
            for g in graphs_n_by_size(pd.n, r, e, m) {
                if pd.tadpole_free() && g.has_loop() {
                    continue;
                }
                for a in &ms {
                    let h = fiberwise(a, &g);
                    let (c, s) = canonical_form(&h);
                    if s != 0 {
                        out.push(c);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[test]
fn fiberwise_d_squared() {
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let pd = fixture(name);
        for r in 1..=2 {
            for g in fiber_window(&pd, r) {
                let x = GraphComb::from_graph(&g);
                let dd = differential_fiberwise(&pd, &differential_fiberwise(&pd, &x).unwrap()).unwrap();
                assert!(dd.is_zero(), "{name}: d² {g} = {dd}");
            }
        }
    }
}

#[test]
fn coaction_commutes_with_differentials() {
    let z = default_z();
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let pd = fixture(name);
        for (k, i, s) in [(2, 0, 2), (3, 0, 2), (3, 1, 2), (3, 0, 3), (2, 1, 1)] {
            for g in &window(&pd, k) {
                let x = GraphComb::from_graph(g);
                let dx = differential_graphs_m(&pd, &z, &x).unwrap();
                let lhs = coact_fiberwise(&pd, &dx, i, s).unwrap();
                let rhs = pair_differential(&pd, &z, &coact_fiberwise(&pd, &x, i, s).unwrap(), i);
                let diff = lhs.sub(&rhs);
                assert!(diff.is_zero(), "{name} ({i},{s}): {g}: {:?}", diff.iter().next());
            }
        }
    }
}

type Triple = (Graph, Graph, Graph);

fn add_triple(out: &mut LinComb<Triple>, a: &Graph, b: &Graph, c: &Graph, s: i32, coeff: &Scalar) {
    let (ca, sa) = canonical_form(a);
    let (cb, sb) = canonical_form(b);
    let (cc, sc) = canonical_form(c);
    let t = s * sa * sb * sc;
    if t != 0 {
        out.add((ca, cb, cc), &coeff.scale(&confmodels::scalar::q(t as i64)));
    }
}

#[test]
fn coaction_is_coassociative() {
    for name in ["s2", "t2", "s3", "s1xs2"] {
        let pd = fixture(name);
        for g in window(&pd, 3) {
            let x = GraphComb::from_graph(&g);
            // M(3) -> M(1) ⊗ C(3) -> M(1) ⊗ C(2) ⊗ C(2)
            let mut left = LinComb::new();
            for ((l, r), c) in coact_fiberwise(&pd, &x, 0, 3).unwrap().iter() {
                for ((a, b), c2) in fiber_cocompose(&pd, &GraphComb::from_graph(r), 0, 2).unwrap().iter() {
                    add_triple(&mut left, l, a, b, 1, &(c * c2));
                }
            }
            // M(3) -> M(2) ⊗ C(2) -> M(1) ⊗ C(2) ⊗ C(2)
            let mut right = LinComb::new();
            for ((l, b), c) in coact_fiberwise(&pd, &x, 0, 2).unwrap().iter() {
                for ((l2, a), c2) in coact_fiberwise(&pd, &GraphComb::from_graph(l), 0, 2).unwrap().iter() {
                    add_triple(&mut right, l2, a, b, 1, &(c * c2));
                }
            }
            assert!(left.sub(&right).is_zero(), "{name}: {g}");
        }
    }
}
