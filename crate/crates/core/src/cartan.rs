//! Equivariant forms on spheres, the Cartan model Car of the interval, iterated
//! integrals, bicolored graphs and truncated gauge transport.

use std::fmt;

use crate::framed::{apply_letter_on, coaction_letters, shuffles, CoactionLetter, HBGPresentation, Letter};
use crate::graph::{canonical_form, front_sign, koszul_sign, Color, Edge, Graph, GraphComb, LinComb, TGraph, Tagger};
use crate::kontsevich::{contraction_terms, insert_at};
use crate::scalar::{q, qf, Scalar, Q};

// ---------------------------------------------------------------------------
// Graded-commutative polynomials

/// Variables are 1-based; `U(i, j)`, `Ut(i, j)` and `V(i, j)` always have i < j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(u8),
    Dx(u8),
    U(u8, u8),
    Ut(u8, u8),
    V(u8, u8),
    T(u8),
    Dt(u8),
}

impl Var {
    pub fn degree(self) -> i32 {
        match self {
            Var::X(_) | Var::T(_) => 0,
            Var::Dx(_) | Var::V(..) | Var::Dt(_) => 1,
            Var::U(..) | Var::Ut(..) => 2,
        }
    }

    pub fn is_odd(self) -> bool {
        self.degree() % 2 == 1
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{i}"),
            Var::Dx(i) => write!(f, "dx{i}"),
            Var::U(i, j) => write!(f, "u{i}{j}"),
            Var::Ut(i, j) => write!(f, "ut{i}{j}"),
            Var::V(i, j) => write!(f, "v{i}{j}"),
            Var::T(i) => write!(f, "t{i}"),
            Var::Dt(i) => write!(f, "dt{i}"),
        }
    }
}

/// Even variables with positive exponents and a strictly increasing list of odd ones.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub even: Vec<(Var, u32)>,
    pub odd: Vec<Var>,
}

impl Mono {
    pub fn one() -> Mono {
        Mono::default()
    }

    pub fn var(v: Var) -> Mono {
        if v.is_odd() {
            Mono { even: vec![], odd: vec![v] }
        } else {
            Mono { even: vec![(v, 1)], odd: vec![] }
        }
    }

    pub fn degree(&self) -> i32 {
        self.even.iter().map(|(v, e)| v.degree() * *e as i32).sum::<i32>() + self.odd.len() as i32
    }

    pub fn is_odd(&self) -> bool {
        self.odd.len() % 2 == 1
    }

    pub fn exponent(&self, v: Var) -> u32 {
        if v.is_odd() {
            return self.odd.contains(&v) as u32;
        }
        self.even.iter().find(|(w, _)| *w == v).map_or(0, |(_, e)| *e)
    }

    fn with_exponent(&self, v: Var, e: u32) -> Mono {
        let mut m = self.clone();
        m.even.retain(|(w, _)| *w != v);
        if e > 0 {
            let pos = m.even.partition_point(|(w, _)| *w < v);
            m.even.insert(pos, (v, e));
        }
        m
    }

    /// Product with its Koszul sign; `None` when an odd variable repeats.
    pub fn mul(&self, o: &Mono) -> Option<(Mono, i32)> {
        let mut inv = 0;
        for a in &self.odd {
            for b in &o.odd {
                if a == b {
                    return None;
                }
                if a > b {
                    inv += 1;
                }
            }
        }
        let mut m = self.clone();
        for &(v, e) in &o.even {
            m = m.with_exponent(v, m.exponent(v) + e);
        }
        m.odd.extend(o.odd.iter().copied());
        m.odd.sort();
        Some((m, if inv % 2 == 0 { 1 } else { -1 }))
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> =
            self.even.iter().map(|(v, e)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") }).collect();
        parts.extend(self.odd.iter().map(|v| v.to_string()));
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Elements of the free graded-commutative algebra on `Var`: equivariant forms, Car and
/// Car[t, dt].
pub type EqForm = LinComb<Mono>;

pub fn constant(c: Scalar) -> EqForm {
    EqForm::single(Mono::one(), c)
}

pub fn one() -> EqForm {
    constant(Scalar::one())
}

pub fn var(v: Var) -> EqForm {
    EqForm::single(Mono::var(v), Scalar::one())
}

fn antisym(i: u8, j: u8, f: fn(u8, u8) -> Var) -> EqForm {
    use std::cmp::Ordering::*;
    match i.cmp(&j) {
        Less => var(f(i, j)),
        Greater => var(f(j, i)).scale(&Scalar::from_int(-1)),
        Equal => EqForm::new(),
    }
}

/// u_ij with u_ji = −u_ij.
pub fn u(i: u8, j: u8) -> EqForm {
    antisym(i, j, Var::U)
}

pub fn ut(i: u8, j: u8) -> EqForm {
    antisym(i, j, Var::Ut)
}

pub fn v(i: u8, j: u8) -> EqForm {
    antisym(i, j, Var::V)
}

pub fn mul(a: &EqForm, b: &EqForm) -> EqForm {
    let mut out = EqForm::new();
    for (x, cx) in a.iter() {
        for (y, cy) in b.iter() {
            if let Some((m, s)) = x.mul(y) {
                out.add(m, &(cx * cy).scale(&q(s as i64)));
            }
        }
    }
    out
}

pub fn pow(a: &EqForm, e: u32) -> EqForm {
    (0..e).fold(one(), |acc, _| mul(&acc, a))
}

pub fn add(a: &EqForm, b: &EqForm) -> EqForm {
    let mut out = a.clone();
    out.add_comb(b, &Scalar::one());
    out
}

fn mono_form(m: Mono) -> EqForm {
    EqForm::single(m, Scalar::one())
}

/// The graded derivation (odd or even) with the given values on variables.
pub fn derivation(f: &EqForm, odd: bool, on: &dyn Fn(Var) -> EqForm) -> EqForm {
    let mut out = EqForm::new();
    for (m, c) in f.iter() {
        let odd_part = mono_form(Mono { even: vec![], odd: m.odd.clone() });
        for &(x, e) in &m.even {
            let img = on(x);
            if img.is_zero() {
                continue;
            }
            let rest = Mono { even: m.with_exponent(x, e - 1).even, odd: vec![] };
            let t = mul(&mul(&mono_form(rest), &img), &odd_part);
            out.add_comb(&t, &c.scale(&q(e as i64)));
        }
        for (idx, &x) in m.odd.iter().enumerate() {
            let img = on(x);
            if img.is_zero() {
                continue;
            }
            let sign = if odd && idx % 2 == 1 { -1 } else { 1 };
            let left = Mono { even: m.even.clone(), odd: m.odd[..idx].to_vec() };
            let right = Mono { even: vec![], odd: m.odd[idx + 1..].to_vec() };
            let t = mul(&mul(&mono_form(left), &img), &mono_form(right));
            out.add_comb(&t, &c.scale(&q(sign)));
        }
    }
    out
}

/// Algebra map given by its values on variables; `None` keeps the variable.
pub fn substitute(f: &EqForm, on: &dyn Fn(Var) -> Option<EqForm>) -> EqForm {
    let image = |x: Var| on(x).unwrap_or_else(|| var(x));
    let mut out = EqForm::new();
    for (m, c) in f.iter() {
        let mut t = one();
        for &(x, e) in &m.even {
            t = mul(&t, &pow(&image(x), e));
        }
        for &x in &m.odd {
            t = mul(&t, &image(x));
        }
        out.add_comb(&t, c);
    }
    out
}

/// de Rham differential together with dv_ij = u_ij − ũ_ij and d t = dt.
pub fn d(f: &EqForm) -> EqForm {
    derivation(f, true, &|x| match x {
        Var::X(i) => var(Var::Dx(i)),
        Var::V(i, j) => add(&var(Var::U(i, j)), &var(Var::Ut(i, j)).scale(&Scalar::from_int(-1))),
        Var::T(l) => var(Var::Dt(l)),
        _ => EqForm::new(),
    })
}

/// Contraction with ∂/∂x_j.
pub fn iota(f: &EqForm, j: u8) -> EqForm {
    derivation(f, true, &|x| if x == Var::Dx(j) { one() } else { EqForm::new() })
}

/// Contraction with the Euler vector field.
pub fn iota_euler(f: &EqForm, n: u8) -> EqForm {
    let mut out = EqForm::new();
    for j in 1..=n {
        out.add_comb(&mul(&var(Var::X(j)), &iota(f, j)), &Scalar::one());
    }
    out
}

/// I = Σ_{i<j} u_ij ι_i ι_j.
pub fn op_i(f: &EqForm, n: u8) -> EqForm {
    let mut out = EqForm::new();
    for i in 1..=n {
        for j in i + 1..=n {
            out.add_comb(&mul(&u(i, j), &iota(&iota(f, j), i)), &Scalar::one());
        }
    }
    out
}

/// Σ_{i,j} u_ij x_i ι_j.
pub fn twist(f: &EqForm, n: u8) -> EqForm {
    let mut out = EqForm::new();
    for j in 1..=n {
        let ij = iota(f, j);
        if ij.is_zero() {
            continue;
        }
        for i in 1..=n {
            out.add_comb(&mul(&mul(&u(i, j), &var(Var::X(i))), &ij), &Scalar::one());
        }
    }
    out
}

/// d_u = d + Σ u_ij x_i ι_j.
pub fn equivariant_differential(f: &EqForm, n: u8) -> EqForm {
    add(&d(f), &twist(f, n))
}

pub fn volume(n: u8) -> EqForm {
    mono_form(Mono { even: vec![], odd: (1..=n).map(Var::Dx).collect() })
}

/// k!! with (−1)!! = 0!! = 1.
pub fn double_factorial(k: i64) -> i64 {
    if k <= 0 {
        1
    } else {
        k * double_factorial(k - 2)
    }
}

/// The normalizing constant, kept as the parameter `C`.
pub fn c_n() -> Scalar {
    Scalar::param("C")
}

fn factorial(k: u32) -> i64 {
    (1..=k as i64).product()
}

/// Σ over the given k of c_k I^k(dx_1⋯dx_n).
fn i_series(n: u8, ks: impl Iterator<Item = u32>, coeff: impl Fn(u32) -> Q) -> EqForm {
    let mut out = EqForm::new();
    let mut cur = volume(n);
    let mut k = 0;
    for target in ks {
        while k < target {
            cur = op_i(&cur, n);
            k += 1;
        }
        out.add_comb(&cur, &Scalar::from_q(coeff(k)));
    }
    out
}

fn below(bound: u32) -> impl Iterator<Item = u32> {
    (0..).take_while(move |k| 2 * k < bound)
}

/// Ω = C_n ι_E Σ_{0≤k<n/2} (n−2k−2)!! I^k/k! (dx_1⋯dx_n). The divided powers are needed
/// from n = 4 on; see [`equivariant_volume_form_undivided`].
pub fn equivariant_volume_form(n: u8) -> EqForm {
    assert!(n >= 2);
    let ni = n as i64;
    let s = i_series(n, below(n as u32), |k| qf(double_factorial(ni - 2 * k as i64 - 2), factorial(k)));
    iota_euler(&s, n).scale(&c_n())
}

/// The same series with plain powers I^k. Agrees with the divided version for n ≤ 3;
/// for n ≥ 4 its equivariant differential is not a multiple of I^{n/2}(vol) on the sphere.
pub fn equivariant_volume_form_undivided(n: u8) -> EqForm {
    assert!(n >= 2);
    let ni = n as i64;
    let s = i_series(n, below(n as u32), |k| q(double_factorial(ni - 2 * k as i64 - 2)));
    iota_euler(&s, n).scale(&c_n())
}

/// d_uΩ expected on the sphere: 0 for n odd, −C_n I^{n/2}/(n/2)! (dx_1⋯dx_n) for n even.
pub fn expected_equivariant_differential(n: u8) -> EqForm {
    if n % 2 == 1 {
        return EqForm::new();
    }
    let h = n as u32 / 2;
    i_series(n, std::iter::once(h), |_| qf(-1, factorial(h))).scale(&c_n())
}

/// Reduce coefficients modulo x_1² + ⋯ + x_n² − 1 (x_n² is eliminated).
pub fn reduce_radius(f: &EqForm, n: u8) -> EqForm {
    let xn = Var::X(n);
    let mut cur = f.clone();
    loop {
        let mut next = EqForm::new();
        let mut changed = false;
        for (m, c) in cur.iter() {
            let e = m.exponent(xn);
            if e < 2 {
                next.add(m.clone(), c);
                continue;
            }
            changed = true;
            let base = m.with_exponent(xn, e - 2);
            next.add(base.clone(), c);
            for i in 1..n {
                let x = Var::X(i);
                next.add(base.with_exponent(x, base.exponent(x) + 2), &c.scale(&q(-1)));
            }
        }
        cur = next;
        if !changed {
            return cur;
        }
    }
}

/// Normal form of the restriction to the unit sphere: the tangential part ι_E(ρ ∧ f),
/// ρ = Σ x_i dx_i, with coefficients reduced by the radius relation. Two forms restrict
/// to the same form on the sphere iff their normal forms agree.
pub fn restrict_to_sphere(f: &EqForm, n: u8) -> EqForm {
    let mut rho = EqForm::new();
    for i in 1..=n {
        rho.add(Mono { even: vec![(Var::X(i), 1)], odd: vec![Var::Dx(i)] }, &Scalar::one());
    }
    reduce_radius(&iota_euler(&mul(&rho, f), n), n)
}

pub struct PropagatorCheck {
    pub omega: EqForm,
    /// dΩ = C_n Σ_{1≤k<n/2} (n−2k)!! I^k/k! (vol) on the sphere.
    pub d_omega_matches: bool,
    /// Σ u_ij x_i ι_j Ω = −C_n Σ_{1≤k<n/2+1} (n−2k)!! I^k/k! (vol) on the sphere.
    pub twist_matches: bool,
    /// d_uΩ minus [`expected_equivariant_differential`], restricted to the sphere.
    pub residual: EqForm,
}

impl PropagatorCheck {
    pub fn passed(&self) -> bool {
        self.d_omega_matches && self.twist_matches && self.residual.is_zero()
    }
}

pub fn verify_propagator(n: u8) -> PropagatorCheck {
    check_propagator(n, &equivariant_volume_form(n))
}

/// The checks of [`verify_propagator`] for an arbitrary candidate Ω.
pub fn check_propagator(n: u8, omega: &EqForm) -> PropagatorCheck {
    let ni = n as i64;
    let sph = |f: &EqForm| restrict_to_sphere(f, n);
    let coeff = |k: u32| qf(double_factorial(ni - 2 * k as i64), factorial(k));
    let d_expected = i_series(n, below(n as u32).skip(1), coeff).scale(&c_n());
    let t_expected = i_series(n, below(n as u32 + 2).skip(1), coeff).scale(&c_n().scale(&q(-1)));
    let d_omega_matches = sph(&d(omega)).sub(&sph(&d_expected)).is_zero();
    let twist_matches = sph(&twist(omega, n)).sub(&sph(&t_expected)).is_zero();
    let residual = sph(&equivariant_differential(omega, n).sub(&expected_equivariant_differential(n)));
    PropagatorCheck { omega: omega.clone(), d_omega_matches, twist_matches, residual }
}

pub fn form_to_json(f: &EqForm) -> serde_json::Value {
    serde_json::Value::Array(
        f.iter().map(|(m, c)| serde_json::json!({"monomial": m.to_string(), "coeff": c.to_string()})).collect(),
    )
}

// ---------------------------------------------------------------------------
// Car and iterated integrals

/// x_{ij,t} = (1−t)u_ij + t ũ_ij − dt v_ij for the parameter t_l.
pub fn path_variable(i: u8, j: u8, l: u8) -> EqForm {
    let t = var(Var::T(l));
    let mut x = u(i, j);
    x.add_comb(&mul(&t, &u(i, j)), &Scalar::from_int(-1));
    x.add_comb(&mul(&t, &ut(i, j)), &Scalar::one());
    x.add_comb(&mul(&var(Var::Dt(l)), &v(i, j)), &Scalar::from_int(-1));
    x
}

/// Substitute x_{ij,t_l} for every u_ij.
pub fn along_path(f: &EqForm, l: u8) -> EqForm {
    substitute(f, &|x| match x {
        Var::U(i, j) => Some(path_variable(i, j, l)),
        _ => None,
    })
}

/// f(ũ): every u_ij replaced by ũ_ij.
pub fn at_ut(f: &EqForm) -> EqForm {
    substitute(f, &|x| match x {
        Var::U(i, j) => Some(var(Var::Ut(i, j))),
        _ => None,
    })
}

/// Coefficient of dt_k⋯dt_1 (moved to the front in this order), integrated over
/// 0 ≤ t_1 ≤ ⋯ ≤ t_k ≤ 1.
pub fn integrate_simplex(f: &EqForm, k: u8) -> EqForm {
    let dts: Vec<Var> = (1..=k).map(Var::Dt).collect();
    let mut out = EqForm::new();
    for (m, c) in f.iter() {
        if m.odd.iter().filter(|x| matches!(x, Var::Dt(_))).count() != k as usize
            || !dts.iter().all(|x| m.odd.contains(x))
        {
            continue;
        }
        let rest: Vec<Var> = m.odd.iter().filter(|x| !matches!(x, Var::Dt(_))).copied().collect();
        // each dt jumps over the non-dt odd variables sorted before it
        let inv: usize = m
            .odd
            .iter()
            .enumerate()
            .filter(|(_, x)| matches!(x, Var::Dt(_)))
            .map(|(p, _)| m.odd[..p].iter().filter(|y| !matches!(y, Var::Dt(_))).count())
            .sum();
        let mut carry = 0u32;
        let mut factor = Scalar::one();
        let mut even = Vec::new();
        for &(x, e) in &m.even {
            if !matches!(x, Var::T(_)) {
                even.push((x, e));
            }
        }
        for l in 1..=k {
            let a = m.exponent(Var::T(l)) + carry + 1;
            factor = factor.scale(&qf(1, a as i64));
            carry = a;
        }
        let reversal = k as usize * (k as usize).saturating_sub(1) / 2;
        let sign = if (inv + reversal) % 2 == 0 { 1 } else { -1 };
        out.add(Mono { even, odd: rest }, &(c * &factor).scale(&q(sign)));
    }
    out
}

/// ∫ f_1(x_{t_1}) ⋯ f_k(x_{t_k}) over the simplex; empty word ↦ 1.
pub fn iterated_integral_map(word: &[EqForm]) -> EqForm {
    let mut integrand = one();
    for (l, h) in word.iter().enumerate() {
        integrand = mul(&integrand, &along_path(h, l as u8 + 1));
    }
    integrate_simplex(&integrand, word.len() as u8)
}

/// f ⊗ [h_1|…|h_k] ⊗ g with letters and end factors monomials in u.
pub type CobarKey = (Mono, Vec<Mono>, Mono);

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    a.mul(b).expect("even monomials").0
}

/// Two-sided cobar differential: merging adjacent letters with sign (−1)^i at
/// position i, the first letter moving to the left factor with sign −1 and the last
/// to the right factor with sign (−1)^(k+1).
pub fn cobar_differential(x: &LinComb<CobarKey>) -> LinComb<CobarKey> {
    let mut out = LinComb::new();
    for ((f, w, g), c) in x.iter() {
        let k = w.len();
        for i in 0..k.saturating_sub(1) {
            let mut nw = w[..i].to_vec();
            nw.push(mono_mul(&w[i], &w[i + 1]));
            nw.extend_from_slice(&w[i + 2..]);
            out.add((f.clone(), nw, g.clone()), &c.scale(&q(if i % 2 == 0 { 1 } else { -1 })));
        }
        if k > 0 {
            out.add((mono_mul(f, &w[0]), w[1..].to_vec(), g.clone()), &c.scale(&q(-1)));
            let s = if k % 2 == 1 { 1 } else { -1 };
            out.add((f.clone(), w[..k - 1].to_vec(), mono_mul(&w[k - 1], g)), &c.scale(&q(s)));
        }
    }
    out
}

/// f(u) · ∫w · g(ũ).
pub fn cobar_to_car(x: &LinComb<CobarKey>) -> EqForm {
    let mut out = EqForm::new();
    for ((f, w, g), c) in x.iter() {
        let letters: Vec<EqForm> = w.iter().map(|h| mono_form(h.clone())).collect();
        let t = mul(&mul(&mono_form(f.clone()), &iterated_integral_map(&letters)), &at_ut(&mono_form(g.clone())));
        out.add_comb(&t, c);
    }
    out
}

#[derive(Debug, Default)]
pub struct CobarReport {
    pub checked: usize,
    pub failures: Vec<CobarKey>,
}

/// Monomials in u_ij (i < j ≤ n) of degree 2..=max_degree.
pub fn u_monomials(n: u8, max_degree: i32) -> Vec<Mono> {
    let vars: Vec<Var> = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| Var::U(i, j))).collect();
    let mut out = vec![Mono::one()];
    for x in vars {
        let mut next = Vec::new();
        for m in &out {
            let mut e = 0;
            while m.degree() + 2 * e <= max_degree {
                next.push(m.with_exponent(x, e as u32));
                e += 1;
            }
        }
        out = next;
    }
    out.retain(|m| m.degree() > 0);
    out.sort();
    out
}

/// Check d∘Φ = Φ∘D on every f ⊗ w ⊗ g with end factors in {1} ∪ `letters`, words of at
/// most `max_letters` letters.
pub fn two_sided_cobar_check(letters: &[Mono], max_letters: usize) -> CobarReport {
    let mut ends = vec![Mono::one()];
    ends.extend(letters.iter().cloned());
    let mut words: Vec<Vec<Mono>> = vec![vec![]];
    let mut layer: Vec<Vec<Mono>> = vec![vec![]];
    for _ in 0..max_letters {
        layer = layer
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |h| {
                    let mut v = w.clone();
                    v.push(h.clone());
                    v
                })
            })
            .collect();
        words.extend(layer.iter().cloned());
    }
    let mut report = CobarReport::default();
    for f in &ends {
        for g in &ends {
            for w in &words {
                let key = (f.clone(), w.clone(), g.clone());
                let x = LinComb::single(key.clone(), Scalar::one());
                let lhs = d(&cobar_to_car(&x));
                let rhs = cobar_to_car(&cobar_differential(&x));
                report.checked += 1;
                if !lhs.sub(&rhs).is_zero() {
                    report.failures.push(key);
                }
            }
        }
    }
    report
}

/// Φ(w_1)·Φ(w_2) − Φ(w_1 ⧢ w_2).
pub fn shuffle_defect(w1: &[EqForm], w2: &[EqForm]) -> EqForm {
    let mut out = mul(&iterated_integral_map(w1), &iterated_integral_map(w2));
    let idx1: Vec<usize> = (0..w1.len()).collect();
    let idx2: Vec<usize> = (w1.len()..w1.len() + w2.len()).collect();
    let all: Vec<&EqForm> = w1.iter().chain(w2.iter()).collect();
    for (w, s) in shuffles(&idx1, &idx2) {
        let word: Vec<EqForm> = w.iter().map(|&i| all[i].clone()).collect();
        out.add_comb(&iterated_integral_map(&word), &Scalar::from_int(-s as i64));
    }
    out
}

// ---------------------------------------------------------------------------
// Bicolored graphs

pub fn is_solid(c: Color) -> bool {
    c == Color::U || c == Color::Ut
}

/// Change the color of edge j, with the sign of acting on it from the front.
fn recolor_term(g: &Graph, j: usize, to: Color) -> (Graph, i32) {
    let mut tagger = Tagger::new();
    let tg = TGraph::new(g, &mut tagger);
    let (s1, mut front) = front_sign(&tg.word(), &[tg.et[j]]);
    let mut h = tg.clone();
    h.g.edges[j].color = to;
    front[0].1 = to.degree(g.n) % 2 != 0;
    (h.g.clone(), s1 * koszul_sign(&front, &h.word()))
}

/// v-edge ↦ u-edge − ũ-edge.
pub fn color_resolution_terms(g: &Graph) -> Vec<(Graph, i32)> {
    let mut out = Vec::new();
    for (j, e) in g.edges.iter().enumerate() {
        if e.color == Color::V {
            out.push(recolor_term(g, j, Color::U));
            let (h, s) = recolor_term(g, j, Color::Ut);
            out.push((h, -s));
        }
    }
    out
}

fn bi_terms(g: &Graph) -> Vec<(Graph, i32)> {
    let mut t = color_resolution_terms(g);
    t.extend(contraction_terms(g, true, &is_solid));
    t
}

/// Differential on Graphs^bi_n: color resolution of v-edges plus contraction of u/ũ edges.
pub fn bicolored_differential(x: &GraphComb) -> GraphComb {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        for (h, s) in bi_terms(g) {
            if !h.has_internal_component() {
                out.add_graph(&h, s, c);
            }
        }
    }
    out
}

fn colored_stick(n: i32, c: Color) -> Graph {
    let mut g = Graph::new(n, 0, 2, &[(0, 1)]);
    g.edges[0].color = c;
    g
}

/// Differential on GC^bi_n, dual to the one on Graphs^bi_n: u-edge ↦ v-edge,
/// ũ-edge ↦ −v-edge, plus splitting of vertices along a new u- or ũ-edge.
pub fn gc_bi_differential(x: &GraphComb) -> GraphComb {
    let mut out = GraphComb::new();
    for (g, c) in x.iter() {
        for (j, e) in g.edges.iter().enumerate() {
            if is_solid(e.color) {
                let (h, s) = recolor_term(g, j, Color::V);
                out.add_graph(&h, if e.color == Color::U { s } else { -s }, c);
            }
        }
        for col in [Color::U, Color::Ut] {
            let st = colored_stick(g.n, col);
            for w in 0..g.int {
                for (h, s) in insert_at(&st, g, w, true) {
                    out.add_graph(&h, s, c);
                }
            }
        }
    }
    out
}

fn map_colors(x: &GraphComb, f: &dyn Fn(Color) -> Option<Color>) -> GraphComb {
    let mut out = GraphComb::new();
    'graphs: for (g, c) in x.iter() {
        let mut h = g.clone();
        for e in h.edges.iter_mut() {
            match f(e.color) {
                Some(col) => e.color = col,
                None => continue 'graphs,
            }
        }
        out.add_graph(&h, 1, c);
    }
    out
}

/// φ₀: every edge colored u.
pub fn phi0(x: &GraphComb) -> GraphComb {
    map_colors(x, &|_| Some(Color::U))
}

/// φ₁: every edge colored ũ.
pub fn phi1(x: &GraphComb) -> GraphComb {
    map_colors(x, &|_| Some(Color::Ut))
}

/// u, ũ ↦ plain, v ↦ 0.
pub fn forget(x: &GraphComb) -> GraphComb {
    map_colors(x, &|c| if c == Color::V { None } else { Some(Color::Plain) })
}

/// All colorings of a graph with the given palette.
pub fn colorings(g: &Graph, palette: &[Color]) -> GraphComb {
    let mut out = GraphComb::new();
    let e = g.edges.len() as u32;
    for code in 0..(palette.len() as u64).pow(e) {
        let mut h = g.clone();
        let mut c = code;
        for edge in h.edges.iter_mut() {
            edge.color = palette[(c % palette.len() as u64) as usize];
            c /= palette.len() as u64;
        }
        let (r, s) = canonical_form(&h);
        if s != 0 {
            out.add(r, &Scalar::one());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Truncated gauge transport

/// Invariant polynomial realizing an H(BG) generator: E ↦ Pfaffian of (u_ij),
/// p_k ↦ (−1)^k tr(U^{2k})/2 (power-sum stand-in, p_1 = Σ u_ij²).
pub fn realize_generator(n: u8, name: &str) -> Option<EqForm> {
    if name == "E" {
        return (n % 2 == 0).then(|| pfaffian(&(1..=n).collect::<Vec<_>>()));
    }
    let k: u32 = name.strip_prefix('p')?.parse().ok()?;
    let mut tr = EqForm::new();
    // closed walks i_0 → i_1 → … → i_0 of length 2k in the matrix U
    let len = 2 * k as usize;
    let mut walks: Vec<(Vec<u8>, EqForm)> = (1..=n).map(|i| (vec![i], one())).collect();
    for step in 0..len {
        let mut next = Vec::new();
        for (w, f) in &walks {
            let last = *w.last().unwrap();
            let targets: Vec<u8> = if step + 1 == len { vec![w[0]] } else { (1..=n).collect() };
            for j in targets {
                let e = u(last, j);
                if e.is_zero() {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(j);
                next.push((w2, mul(f, &e)));
            }
        }
        walks = next;
    }
    for (_, f) in walks {
        tr.add_comb(&f, &Scalar::one());
    }
    let sign = if k % 2 == 0 { 1 } else { -1 };
    Some(tr.scale(&Scalar::from_q(qf(sign, 2))))
}

fn pfaffian(idx: &[u8]) -> EqForm {
    if idx.is_empty() {
        return one();
    }
    let mut out = EqForm::new();
    for p in 1..idx.len() {
        let rest: Vec<u8> = idx.iter().enumerate().filter(|(i, _)| *i != 0 && *i != p).map(|(_, x)| *x).collect();
        let sign = if p % 2 == 1 { 1 } else { -1 };
        out.add_comb(&mul(&u(idx[0], idx[p]), &pfaffian(&rest)), &Scalar::from_int(sign));
    }
    out
}

pub fn realize_letter(n: u8, pres: &HBGPresentation, l: &Letter) -> EqForm {
    let mut f = one();
    for (i, e) in l.iter().enumerate() {
        let g = realize_generator(n, &pres.gens[i].0).expect("generator without realization");
        f = mul(&f, &pow(&g, *e));
    }
    f
}

/// The family m(x_t) = Σ_l f_l(x_t) ⊗ D_l over Car[t, dt] (t = t1), one coefficient per
/// operator letter.
#[derive(Clone, Debug)]
pub struct McFamily {
    pub n: i32,
    pub letters: Vec<CoactionLetter>,
    pub coeffs: Vec<EqForm>,
}

impl McFamily {
    /// The MC element of Graphs_n with its letters realized in u and transported along x_t.
    pub fn standard(n: i32, jmax: u32) -> McFamily {
        let pres = HBGPresentation::for_dimension(n);
        let letters = coaction_letters(n, &pres, jmax);
        let coeffs = letters
            .iter()
            .map(|l| along_path(&realize_letter(n as u8, &pres, &l.letter), 1).scale(&Scalar::from_q(l.coeff.clone())))
            .collect();
        McFamily { n, letters, coeffs }
    }

    /// Coefficients at t = 0 (in u) or t = 1 (in ũ).
    pub fn endpoint(&self, t: i64) -> Vec<EqForm> {
        self.coeffs
            .iter()
            .map(|f| {
                substitute(f, &|x| match x {
                    Var::T(1) => Some(constant(Scalar::from_int(t))),
                    Var::Dt(1) => Some(EqForm::new()),
                    _ => None,
                })
            })
            .collect()
    }

    /// h_t: the dt-components, dt moved to the front.
    pub fn velocity(&self) -> Vec<EqForm> {
        self.coeffs
            .iter()
            .map(|f| {
                let mut out = EqForm::new();
                for (m, c) in f.iter() {
                    if let Some(p) = m.odd.iter().position(|x| *x == Var::Dt(1)) {
                        let mut r = m.clone();
                        r.odd.remove(p);
                        out.add(r, &c.scale(&q(if p % 2 == 0 { 1 } else { -1 })));
                    }
                }
                out
            })
            .collect()
    }
}

/// Composite operator D_{w_0} ∘ ⋯ ∘ D_{w_last} (letter indices).
pub type OpWord = Vec<usize>;

/// Σ a_w(t) D_w truncated at loop order L.
#[derive(Clone, Debug)]
pub struct GaugeTransport {
    pub loop_order: u32,
    pub terms: LinComb<(OpWord, Mono)>,
}

fn word_loops(letters: &[CoactionLetter], w: &[usize]) -> u32 {
    w.iter().map(|&i| letters[i].loop_order()).sum()
}

fn word_degree(letters: &[CoactionLetter], n: i32, w: &[usize]) -> i32 {
    w.iter().map(|&i| letters[i].op_degree(n)).sum()
}

/// Solve d/dt A_t = −h_t A_t, A_0 = 1, by Picard iteration with exact integration in t.
/// The sign makes (d + m₁)A₁ = A₁(d + m₀).
pub fn gauge_transport(fam: &McFamily, loop_order: u32) -> GaugeTransport {
    let h = fam.velocity();
    let mut a: LinComb<(OpWord, Mono)> = LinComb::single((vec![], Mono::one()), Scalar::one());
    loop {
        let mut next: LinComb<(OpWord, Mono)> = LinComb::single((vec![], Mono::one()), Scalar::one());
        for (l, hl) in h.iter().enumerate() {
            let dl = fam.letters[l].op_degree(fam.n);
            for ((w, m), c) in a.iter() {
                let mut nw = vec![l];
                nw.extend_from_slice(w);
                if word_loops(&fam.letters, &nw) > loop_order {
                    continue;
                }
                let s = if dl % 2 != 0 && m.is_odd() { 1 } else { -1 };
                for (hm, hc) in hl.iter() {
                    let Some((pm, ps)) = hm.mul(m) else { continue };
                    // ∫_0^t s^a ds = t^(a+1)/(a+1)
                    let e = pm.exponent(Var::T(1));
                    let im = pm.with_exponent(Var::T(1), e + 1);
                    let coeff = (hc * c).scale(&(qf(1, e as i64 + 1) * q((s * ps) as i64)));
                    next.add((nw.clone(), im), &coeff);
                }
            }
        }
        if next == a {
            return GaugeTransport { loop_order, terms: a };
        }
        a = next;
    }
}

impl GaugeTransport {
    /// A_1.
    pub fn at_one(&self) -> LinComb<(OpWord, Mono)> {
        let mut out = LinComb::new();
        for ((w, m), c) in self.terms.iter() {
            out.add((w.clone(), m.with_exponent(Var::T(1), 0)), c);
        }
        out
    }
}

/// Car ⊗ Graphs elements, each term tagged by the loop order of the operators applied.
pub type CarGraphs = LinComb<(u32, Mono, Graph)>;

fn push(out: &mut CarGraphs, tag: u32, m: Mono, g: &Graph, sign: i32, c: &Scalar) {
    if g.has_internal_component() {
        return;
    }
    let (r, s) = canonical_form(g);
    if s * sign != 0 {
        out.add((tag, m, r), &c.scale(&q((s * sign) as i64)));
    }
}

pub fn car_graphs(x: &GraphComb) -> CarGraphs {
    let mut out = CarGraphs::new();
    for (g, c) in x.iter() {
        push(&mut out, 0, Mono::one(), g, 1, c);
    }
    out
}

/// d_Car ⊗ 1 + (−1)^{|μ|} 1 ⊗ δ, with δ = δ_contr on plain graphs and the bicolored
/// differential on colored ones.
pub fn car_graphs_differential(x: &CarGraphs) -> CarGraphs {
    let mut out = CarGraphs::new();
    for ((tag, m, g), c) in x.iter() {
        for (dm, dc) in d(&mono_form(m.clone())).iter() {
            push(&mut out, *tag, dm.clone(), g, 1, &(c * dc));
        }
        let bi = g.edges.iter().any(|e| e.color != Color::Plain);
        let terms =
            if bi { bi_terms(g) } else { contraction_terms(g, true, &|col: Color| col == Color::Plain) };
        let s = if m.is_odd() { -1 } else { 1 };
        for (h, sh) in terms {
            push(&mut out, *tag, m.clone(), &h, s * sh, c);
        }
    }
    out
}

/// Apply Σ a_w D_w; operators on colored graphs remove only edges passing `removable`.
fn apply_ops(
    letters: &[CoactionLetter],
    n: i32,
    ops: &LinComb<(OpWord, Mono)>,
    x: &CarGraphs,
    max_tag: u32,
    removable: &dyn Fn(Color) -> bool,
) -> CarGraphs {
    let mut out = CarGraphs::new();
    for ((w, a), ca) in ops.iter() {
        let loops = word_loops(letters, w);
        let dw = word_degree(letters, n, w);
        for ((tag, m, g), c) in x.iter() {
            if tag + loops > max_tag {
                continue;
            }
            let Some((am, s0)) = a.mul(m) else { continue };
            let s1 = if dw % 2 != 0 && m.is_odd() { -1 } else { 1 };
            let mut graphs: Vec<(Graph, i32)> = vec![(g.clone(), 1)];
            for &l in w.iter().rev() {
                graphs = graphs
                    .iter()
                    .flat_map(|(h, s)| {
                        apply_letter_on(&letters[l], h, removable).into_iter().map(move |(k, t)| (k, s * t))
                    })
                    .collect();
            }
            let coeff = ca * c;
            for (h, s) in graphs {
                push(&mut out, tag + loops, am.clone(), &h, s0 * s1 * s, &coeff);
            }
        }
    }
    out
}

/// m· for the coefficients `coeffs` (one per letter).
pub fn twist_action(
    fam: &McFamily,
    coeffs: &[EqForm],
    x: &CarGraphs,
    max_tag: u32,
    removable: &dyn Fn(Color) -> bool,
) -> CarGraphs {
    let mut ops = LinComb::new();
    for (l, f) in coeffs.iter().enumerate() {
        for (m, c) in f.iter() {
            ops.add((vec![l], m.clone()), c);
        }
    }
    apply_ops(&fam.letters, fam.n, &ops, x, max_tag, removable)
}

pub fn apply_gauge(fam: &McFamily, a: &GaugeTransport, x: &CarGraphs) -> CarGraphs {
    apply_ops(&fam.letters, fam.n, &a.at_one(), x, a.loop_order, &|_| true)
}

fn truncate(x: &CarGraphs, max_tag: u32) -> CarGraphs {
    let mut y = x.clone();
    y.retain(|(t, _, _), _| *t <= max_tag);
    y
}

/// (d + m₁·)A₁Γ − A₁(d + m₀·)Γ in the truncation.
pub fn gauge_defect(fam: &McFamily, a: &GaugeTransport, g: &Graph) -> CarGraphs {
    let l = a.loop_order;
    let x = car_graphs(&GraphComb::from_graph(g));
    let (m0, m1) = (fam.endpoint(0), fam.endpoint(1));
    let ax = apply_gauge(fam, a, &x);
    let mut lhs = car_graphs_differential(&ax);
    lhs.add_comb(&twist_action(fam, &m1, &ax, l, &|_| true), &Scalar::one());
    let mut dx = car_graphs_differential(&x);
    dx.add_comb(&twist_action(fam, &m0, &x, l, &|_| true), &Scalar::one());
    let rhs = apply_gauge(fam, a, &dx);
    truncate(&lhs.sub(&rhs), l)
}

fn recolor_car(x: &CarGraphs, col: Color) -> CarGraphs {
    let mut out = CarGraphs::new();
    for ((t, m, g), c) in x.iter() {
        let mut h = g.clone();
        for e in h.edges.iter_mut() {
            e.color = col;
        }
        push(&mut out, *t, m.clone(), &h, 1, c);
    }
    out
}

/// F₀ = φ₀ (which = 0) or F₁ = φ₁∘A₁ (which = 1).
pub fn homotopy_map_f(fam: &McFamily, a: &GaugeTransport, x: &CarGraphs, which: u8) -> CarGraphs {
    match which {
        0 => recolor_car(x, Color::U),
        _ => recolor_car(&apply_gauge(fam, a, x), Color::Ut),
    }
}

/// F_i((d + m₀)Γ) − (d + d_bi + m_i^bi)F_i(Γ), where m^bi removes u- or ũ-edges and
/// carries the coefficients m₀ = m(u) for F₀, m₁ = m(ũ) for F₁.
pub fn homotopy_map_defect(fam: &McFamily, a: &GaugeTransport, g: &Graph, which: u8) -> CarGraphs {
    let l = a.loop_order;
    let x = car_graphs(&GraphComb::from_graph(g));
    let mut dx = car_graphs_differential(&x);
    dx.add_comb(&twist_action(fam, &fam.endpoint(0), &x, l, &|_| true), &Scalar::one());
    let lhs = homotopy_map_f(fam, a, &dx, which);
    let fx = homotopy_map_f(fam, a, &x, which);
    let mut rhs = car_graphs_differential(&fx);
    rhs.add_comb(&twist_action(fam, &fam.endpoint(which as i64), &fx, l, &is_solid), &Scalar::one());
    truncate(&lhs.sub(&rhs), l)
}

/// Car → H(BG) (v ↦ 0, ũ ↦ u) together with forgetting colors.
pub fn project(x: &CarGraphs) -> CarGraphs {
    let mut out = CarGraphs::new();
    for ((t, m, g), c) in x.iter() {
        if m.odd.iter().any(|v| matches!(v, Var::V(..))) {
            continue;
        }
        let f = substitute(&mono_form(m.clone()), &|x| match x {
            Var::Ut(i, j) => Some(var(Var::U(i, j))),
            _ => None,
        });
        let h = forget(&GraphComb::from_graph(g));
        for (k, ck) in h.iter() {
            for (fm, fc) in f.iter() {
                out.add((*t, fm.clone(), k.clone()), &(c * &(ck * fc)));
            }
        }
    }
    out
}

/// Externals-only edge between 1 and 2 of the given color (for examples and tests).
pub fn colored_edge(n: i32, col: Color) -> Graph {
    let mut g = Graph::new(n, 2, 0, &[]);
    g.edges.push(Edge::colored(0, 1, col));
    g
}
