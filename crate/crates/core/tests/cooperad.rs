use confmodels::graph::LinComb;
use confmodels::kontsevich::*;
use confmodels::{Graph, GraphComb, Scalar};

type Triple = (Graph, Graph, Graph);

fn one(g: &Graph) -> GraphComb {
    GraphComb::from_graph(g)
}

fn window(n: i32, k: usize, max_e: usize) -> Vec<Graph> {
    let mut out = Vec::new();
    for e in 0..=max_e {
        for m in 0..=e.min(2) {
            out.extend(graphs_n_by_size(n, k, e, m));
        }
    }
    out
}

fn sgn(x: i32) -> i64 {
    if x.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

#[test]
fn counit_both_sides() {
    for n in 2..4 {
        for g in window(n, 3, 4) {
            let x = one(&g);
            for i in 0..3 {
                let c = cocompose(&x, i, 1).unwrap();
                let unit = Graph::empty(n, 1);
                let back: GraphComb = c.iter().filter(|((_, b), _)| *b == unit).map(|((a, _), c)| (a.clone(), c.clone())).collect();
                assert_eq!(back, x, "{g} slot {i}");
            }
            let c = cocompose(&x, 0, 3).unwrap();
            let unit = Graph::empty(n, 1);
            let back: GraphComb = c.iter().filter(|((a, _), _)| *a == unit).map(|((_, b), c)| (b.clone(), c.clone())).collect();
            assert_eq!(back, x);
        }
    }
}

fn nested_left(x: &GraphComb, i: usize, s: usize, j: usize, t: usize) -> LinComb<Triple> {
    let mut out = LinComb::new();
    for ((a, b), c) in cocompose(x, i, s).unwrap().iter() {
        for ((b1, b2), c2) in cocompose(&one(b), j, t).unwrap().iter() {
            out.add((a.clone(), b1.clone(), b2.clone()), &(c * c2));
        }
    }
    out
}

fn nested_right(x: &GraphComb, i: usize, s: usize, j: usize, t: usize) -> LinComb<Triple> {
    let mut out = LinComb::new();
    for ((a, b2), c) in cocompose(x, i + j, t).unwrap().iter() {
        for ((a1, b1), c2) in cocompose(&one(a), i, s - t + 1).unwrap().iter() {
            out.add((a1.clone(), b1.clone(), b2.clone()), &(c * c2));
        }
    }
    out
}

#[test]
fn nested_coassociativity() {
    for n in 2..4 {
        for g in window(n, 4, 4) {
            let x = one(&g);
            for (i, s, j, t) in [(0, 3, 0, 2), (0, 3, 1, 2), (1, 3, 0, 2), (0, 4, 1, 2), (0, 4, 0, 3), (0, 2, 0, 2)] {
                assert_eq!(nested_left(&x, i, s, j, t), nested_right(&x, i, s, j, t), "{g} {i} {s} {j} {t}");
            }
        }
    }
}

#[test]
fn parallel_coassociativity() {
    for n in 2..4 {
        for g in window(n, 4, 4) {
            let x = one(&g);
            // blocks {1,2} and {3,4}
            let mut left = LinComb::<Triple>::new();
            for ((a, b1), c) in cocompose(&x, 0, 2).unwrap().iter() {
                for ((a2, b2), c2) in cocompose(&one(a), 1, 2).unwrap().iter() {
                    left.add((a2.clone(), b1.clone(), b2.clone()), &(c * c2));
                }
            }
            let mut right = LinComb::<Triple>::new();
            for ((a, b2), c) in cocompose(&x, 2, 2).unwrap().iter() {
                for ((a2, b1), c2) in cocompose(&one(a), 0, 2).unwrap().iter() {
                    let s = sgn(b1.degree() * b2.degree());
                    right.add((a2.clone(), b1.clone(), b2.clone()), &(c * c2).scale(&confmodels::scalar::q(s)));
                }
            }
            assert_eq!(left, right, "{g}");
        }
    }
}

#[test]
fn cocomposition_commutes_with_differential() {
    for n in 2..4 {
        for g in window(n, 3, 5) {
            let x = one(&g);
            for (i, s) in [(0, 2), (1, 2), (0, 3), (0, 1)] {
                let lhs = cocompose(&differential_graphs_n(&x).unwrap(), i, s).unwrap();
                let rhs = tensor_differential(&cocompose(&x, i, s).unwrap(), &contract_graph, &contract_graph, &|a| a.degree());
                assert_eq!(lhs, rhs, "{g} {i} {s}");
            }
        }
    }
}

#[test]
fn leibniz_for_product() {
    for n in 2..4 {
        let w = window(n, 3, 3);
        for a in w.iter().step_by(3) {
            for b in w.iter().step_by(5) {
                let (x, y) = (one(a), one(b));
                let lhs = differential_graphs_n(&glue_product(&x, &y).unwrap()).unwrap();
                let mut rhs = glue_product(&differential_graphs_n(&x).unwrap(), &y).unwrap();
                rhs.add_comb(&glue_product(&x, &differential_graphs_n(&y).unwrap()).unwrap(), &Scalar::from_int(sgn(a.degree())));
                assert_eq!(lhs, rhs, "{a} {b}");
            }
        }
    }
}

#[test]
fn product_is_graded_commutative() {
    for n in 2..4 {
        let w = window(n, 3, 2);
        for a in &w {
            for b in &w {
                let ab = glue_product(&one(a), &one(b)).unwrap();
                let ba = glue_product(&one(b), &one(a)).unwrap();
                assert_eq!(ab, ba.scale(&Scalar::from_int(sgn(a.degree() * b.degree()))));
            }
        }
    }
}

#[test]
fn arnold_projection_is_a_chain_map() {
    for n in 2..4 {
        for g in window(n, 3, 4) {
            let d = differential_graphs_n(&one(&g)).unwrap();
            assert!(project_arnold(&d).is_zero(), "{g}");
        }
    }
}

#[test]
fn arnold_projection_is_multiplicative() {
    for n in 2..4 {
        let w: Vec<Graph> = window(n, 3, 2).into_iter().filter(|g| g.int == 0).collect();
        for a in &w {
            for b in &w {
                let p = project_arnold(&glue_product(&one(a), &one(b)).unwrap());
                // product of normal forms, re-reduced
                let mut q = LinComb::new();
                for (ma, ca) in project_arnold(&one(a)).iter() {
                    for (mb, cb) in project_arnold(&one(b)).iter() {
                        let mut gens = ma.clone();
                        gens.extend(mb.iter().copied());
                        arnold_reduce_into(n, &gens, &(ca * cb), &mut q);
                    }
                }
                assert_eq!(p, q, "{a} {b}");
            }
        }
    }
}
