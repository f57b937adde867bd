//! Command-line front end: enumerate bases, apply differentials, check identities and
//! compute cohomology windows. Exit status 0 when every asserted identity holds, 1 on an
//! identity failure (with a witness), 2 on malformed input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use serde_json::{json, Value};

use confmodels::cartan;
use confmodels::framed::{self, ClassMap, FramedComb, FramedKey, HBGPresentation, HWord};
use confmodels::homology::{assemble_complex, d_squared_witness, format_table, table_json, ComplexWindow};
use confmodels::kontsevich as kv;
use confmodels::manifold::{self as mf, PDModel};
use confmodels::{Error, Graph, GraphComb, LinComb};

const DEFAULT_SEED: u64 = 0x5eed_c0de;

#[derive(Parser)]
#[command(name = "confmodels", version, about = "Exact graph-complex models of configuration spaces")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "CONFMODELS_THREADS", default_value_t = 0, global = true)]
    threads: usize,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = DEFAULT_SEED, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Debug)]
enum Family {
    /// Kontsevich graphs Graphs_n(k)
    GraphsN,
    /// Kontsevich graph complex GC_n
    Gc,
    /// decorated graphs Graphs_M(k) over a Poincaré duality model
    GraphsM,
    /// fiberwise graphs Graphs_n^M(k)
    #[value(name = "graphs-n-m")]
    GraphsNM,
    /// framed graphs Graphs_M^fr(k)
    Framed,
    /// bicolored graphs Graphs^bi_n(k)
    Bi,
}

#[derive(Args, Clone)]
struct Window {
    #[arg(long, value_enum, default_value_t = Family::GraphsN)]
    family: Family,
    /// Dimension n (taken from the model when --pd is given).
    #[arg(long)]
    n: Option<i32>,
    /// Number of external vertices.
    #[arg(long, default_value_t = 2)]
    arity: usize,
    #[arg(long, default_value_t = 4)]
    max_edges: usize,
    #[arg(long, default_value_t = 2)]
    max_internal: usize,
    /// Fix the loop order (GC_n: required; Graphs_n: optional filter).
    #[arg(long)]
    loop_order: Option<i32>,
    /// GC_n vertex bound.
    #[arg(long, default_value_t = 4)]
    max_vertices: usize,
    /// Poincaré duality model (JSON).
    #[arg(long)]
    pd: Option<PathBuf>,
    /// Bound on the total decoration degree; "none" for no bound.
    #[arg(long)]
    max_deco: Option<String>,
    /// Letters per framed basis element.
    #[arg(long, default_value_t = 1)]
    max_letters: usize,
}

#[derive(Subcommand)]
enum Command {
    /// List a basis window.
    Basis(Window),
    /// Apply the differential of a family to a graph given as JSON.
    Diff {
        #[command(flatten)]
        window: Window,
        /// Graph JSON file, or inline JSON.
        #[arg(long)]
        graph: String,
    },
    /// Check d² = 0 on every basis element of a window.
    D2check {
        #[command(flatten)]
        window: Window,
        /// Check only this many basis elements, drawn with --seed.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Cohomology table of a window.
    Cohomology {
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        min_degree: i32,
        #[arg(long, allow_negative_numbers = true)]
        max_degree: i32,
        /// Graphs_n: sum loop orders 0..=L.
        #[arg(long, default_value_t = 0)]
        max_loop_order: i32,
    },
    /// Compare the cohomology of Graphs_n(k) with the Arnold algebra.
    ArnoldCheck {
        #[arg(long)]
        n: i32,
        #[arg(long)]
        arity: usize,
    },
    /// Check dm + ½[m,m] = 0 for the Maurer-Cartan element.
    McCheck {
        #[arg(long)]
        n: i32,
        /// Odd n: terms θ_{2j+1} with j ≤ jmax.
        #[arg(long, default_value_t = 2)]
        jmax: u32,
    },
    /// Check the equivariant propagator identity.
    PropagatorVerify {
        #[arg(long)]
        n: u8,
        /// Use plain powers I^k instead of I^k/k!.
        #[arg(long)]
        undivided: bool,
    },
    /// Shuffle and two-sided cobar checks for iterated integrals, and gauge transport.
    IteratedIntegralCheck {
        #[arg(long)]
        n: u8,
        #[arg(long, default_value_t = 2)]
        max_letters: usize,
        /// Bound on the degree of each letter.
        #[arg(long, default_value_t = 4)]
        max_degree: i32,
        /// Also check gauge transport up to this loop order.
        #[arg(long)]
        loop_order: Option<u32>,
    },
    /// Apply or check a framing change.
    FramingChange {
        #[command(flatten)]
        window: Window,
        /// σ as JSON (generator name → graph).
        #[arg(long)]
        sigma: PathBuf,
        /// Apply to this graph instead of checking the chain-map law on the window.
        #[arg(long)]
        graph: Option<String>,
        /// First collapsed external (1-based).
        #[arg(long, default_value_t = 1)]
        slot: usize,
        /// Number of collapsed externals.
        #[arg(long, default_value_t = 2)]
        block: usize,
    },
    /// Cocomposition (Graphs_n) or coaction (Graphs_M, Graphs_M^fr) of a graph.
    Coact {
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        graph: String,
        /// Words at the externals for Graphs_M^fr, e.g. "E|E;" (letters separated by |,
        /// vertices by ;).
        #[arg(long)]
        words: Option<String>,
        #[arg(long, default_value_t = 1)]
        slot: usize,
        #[arg(long, default_value_t = 2)]
        block: usize,
    },
    /// Export the differential from one degree as an SMS matrix.
    ExportMatrix {
        #[command(flatten)]
        window: Window,
        #[arg(long, allow_negative_numbers = true)]
        degree: i32,
    },
}

struct Report {
    ok: bool,
    text: String,
    json: Value,
}

impl Report {
    fn pass(text: String, json: Value) -> Report {
        Report { ok: true, text, json }
    }
}

type Outcome = Result<Report, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // an already initialized pool keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = run(&cli);
    match result {
        Ok(r) => {
            let mut body = match cli.format {
                Format::Text => r.text,
                Format::Json => serde_json::to_string_pretty(&json!({"ok": r.ok, "report": r.json})).unwrap(),
            };
            if !body.ends_with('\n') {
                body.push('\n');
            }
            match &cli.output {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, body) {
                        eprintln!("error: cannot write {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{body}"),
            }
            if r.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::DSquared(_) | Error::NotAComplex(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Basis(w) => basis(w),
        Command::Diff { window, graph } => diff(window, graph),
        Command::D2check { window, sample } => d2check(window, *sample, cli.seed),
        Command::Cohomology { window, min_degree, max_degree, max_loop_order } => {
            cohomology(window, *min_degree, *max_degree, *max_loop_order)
        }
        Command::ArnoldCheck { n, arity } => arnold_check(*n, *arity),
        Command::McCheck { n, jmax } => mc_check(*n, *jmax),
        Command::PropagatorVerify { n, undivided } => propagator_verify(*n, *undivided),
        Command::IteratedIntegralCheck { n, max_letters, max_degree, loop_order } => {
            iterated_integral_check(*n, *max_letters, *max_degree, *loop_order)
        }
        Command::FramingChange { window, sigma, graph, slot, block } => {
            framing_change(window, sigma, graph.as_deref(), *slot, *block)
        }
        Command::Coact { window, graph, words, slot, block } => coact(window, graph, words.as_deref(), *slot, *block),
        Command::ExportMatrix { window, degree } => export_matrix(window, *degree),
    }
}

// ---------------------------------------------------------------------------
// inputs

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_pd(path: &Path) -> Result<PDModel, Error> {
    let text = read_text(path)?;
    PDModel::from_json_str(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Inline JSON or a path to a JSON file.
fn json_arg(s: &str) -> Result<Value, Error> {
    let t = s.trim_start();
    let (text, origin) = if t.starts_with('{') || t.starts_with('[') {
        (s.to_string(), "inline JSON".to_string())
    } else {
        (read_text(Path::new(s))?, s.to_string())
    };
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{origin}: line {}, column {}: {e}", e.line(), e.column())))
}

struct Ctx {
    n: i32,
    pd: Option<PDModel>,
}

impl Ctx {
    fn new(w: &Window) -> Result<Ctx, Error> {
        let pd = w.pd.as_deref().map(load_pd).transpose()?;
        let n = match (&pd, w.n) {
            (Some(p), Some(n)) if p.n != n => {
                return Err(Error::Dimension(format!("--n {n} but the model has n = {}", p.n)))
            }
            (Some(p), _) => p.n,
            (None, Some(n)) => n,
            (None, None) => return Err(Error::Invalid("give --n or --pd".into())),
        };
        if n < 2 {
            return Err(Error::Invalid(format!("n = {n} < 2")));
        }
        if matches!(w.family, Family::GraphsM | Family::GraphsNM | Family::Framed) && pd.is_none() {
            return Err(Error::Invalid(format!("family {:?} needs --pd", w.family)));
        }
        Ok(Ctx { n, pd })
    }

    fn pd(&self) -> &PDModel {
        self.pd.as_ref().expect("checked in Ctx::new")
    }

    fn max_deco(&self, w: &Window) -> Result<Option<i32>, Error> {
        match w.max_deco.as_deref() {
            None => Ok(Some(self.n)),
            Some("none") => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| Error::Parse(format!("--max-deco '{s}'"))),
        }
    }

    fn graph(&self, s: &str) -> Result<GraphComb, Error> {
        let v = json_arg(s)?;
        let x = match &self.pd {
            Some(pd) => pd.graph_from_json(&v)?,
            None => confmodels::graph::graph_comb_from_json(&v, &confmodels::graph::no_decorations)?,
        };
        if let Some((g, _)) = x.iter().find(|(g, _)| g.n != self.n) {
            return Err(Error::Dimension(format!("graph has n = {}, expected {}", g.n, self.n)));
        }
        Ok(x)
    }

    fn to_json(&self, x: &GraphComb) -> Value {
        match &self.pd {
            Some(pd) => pd.graph_to_json(x),
            None => confmodels::graph::graph_comb_to_json(x, &|d| format!("d{}", d.id)),
        }
    }

    fn frame(&self) -> Result<(HBGPresentation, ClassMap), Error> {
        let pres = HBGPresentation::for_dimension(self.n);
        let classes = ClassMap::new(self.pd(), &pres)?;
        Ok((pres, classes))
    }
}

// ---------------------------------------------------------------------------
// windows of graph families

fn graph_window(ctx: &Ctx, w: &Window) -> Result<Vec<Graph>, Error> {
    let n = ctx.n;
    let out = match w.family {
        Family::GraphsN => {
            let mut out = Vec::new();
            for e in 0..=w.max_edges {
                for m in 0..=w.max_internal {
                    out.extend(kv::graphs_n_by_size(n, w.arity, e, m));
                }
            }
            out.retain(|g| w.loop_order.is_none_or(|l| g.loop_order() == l));
            out
        }
        Family::Gc => {
            let lo = w.loop_order.ok_or_else(|| Error::Invalid("GC_n needs --loop-order".into()))?;
            (1..=w.max_vertices).flat_map(|v| kv::gc_basis(n, lo, v)).collect()
        }
        Family::GraphsM => mf::graphs_m_window(ctx.pd(), w.arity, w.max_edges, w.max_internal, ctx.max_deco(w)?)?,
        Family::GraphsNM => fiber_window(ctx.pd(), w),
        Family::Bi => {
            let mut out = std::collections::BTreeSet::new();
            for e in 0..=w.max_edges {
                for m in 0..=w.max_internal {
                    for g in kv::graphs_n_by_size(n, w.arity, e, m) {
                        let palette = [confmodels::Color::U, confmodels::Color::Ut, confmodels::Color::V];
                        for (h, _) in cartan::colorings(&g, &palette).iter() {
                            out.insert(h.clone());
                        }
                    }
                }
            }
            out.into_iter().collect()
        }
        Family::Framed => return Err(Error::Invalid("framed windows carry words; use framed_window".into())),
    };
    Ok(out)
}

fn fiber_window(pd: &PDModel, w: &Window) -> Vec<Graph> {
    let mut ms = vec![vec![]];
    ms.extend((0..pd.dim()).filter(|&k| k != pd.unit).map(|k| vec![pd.deco(k)]));
    let mut out = std::collections::BTreeSet::new();
    for e in 0..=w.max_edges {
        for m in 0..=w.max_internal {
            for g in kv::graphs_n_by_size(pd.n, w.arity, e, m) {
                if pd.tadpole_free() && g.has_loop() {
                    continue;
                }
                for a in &ms {
                    let (c, s) = confmodels::canonical_form(&mf::fiberwise(a, &g));
                    if s != 0 {
                        out.insert(c);
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

fn framed_window(ctx: &Ctx, w: &Window, pres: &HBGPresentation) -> Result<Vec<FramedKey>, Error> {
    let pd = ctx.pd();
    let max = 2 * pres.gens.iter().map(|g| g.1).max().unwrap_or(0);
    let ws = pres.words(w.max_letters, max);
    let mut assignments: Vec<Vec<HWord>> = vec![vec![]];
    for _ in 0..w.arity {
        let mut next = Vec::new();
        for a in &assignments {
            let used: usize = a.iter().map(|x: &HWord| x.len()).sum();
            for word in ws.iter().filter(|word| used + word.len() <= w.max_letters) {
                let mut b = a.clone();
                b.push(word.clone());
                next.push(b);
            }
        }
        assignments = next;
    }
    let graphs = mf::graphs_m_window(pd, w.arity, w.max_edges, w.max_internal, ctx.max_deco(w)?)?;
    Ok(graphs.iter().flat_map(|g| assignments.iter().map(move |a| (g.clone(), a.clone()))).collect())
}

type GraphD<'a> = Box<dyn Fn(&GraphComb) -> GraphComb + Sync + 'a>;

fn graph_differential<'a>(ctx: &'a Ctx, family: Family) -> GraphD<'a> {
    match family {
        Family::GraphsN => Box::new(|x| kv::differential_graphs_n(x).unwrap()),
        Family::Gc => Box::new(kv::gc_differential),
        Family::GraphsM => {
            let z = mf::default_z();
            Box::new(move |x| mf::differential_graphs_m(ctx.pd(), &z, x).unwrap())
        }
        Family::GraphsNM => Box::new(|x| mf::differential_fiberwise(ctx.pd(), x).unwrap()),
        Family::Bi => Box::new(cartan::bicolored_differential),
        Family::Framed => unreachable!("framed keys are not graphs"),
    }
}

fn degree_of(family: Family, g: &Graph) -> i32 {
    match family {
        Family::Gc => kv::gc_degree(g),
        _ => g.degree(),
    }
}

fn step_of(family: Family) -> i32 {
    match family {
        Family::Gc => -1,
        _ => 1,
    }
}

fn graph_text(ctx: &Ctx, g: &Graph) -> String {
    match &ctx.pd {
        Some(pd) => format_graph(g, &|d| pd.deco_name(d)),
        None => g.to_string(),
    }
}

fn format_graph(g: &Graph, name: &dyn Fn(confmodels::Deco) -> String) -> String {
    let mut s = format!("[ext={} int={}", g.ext, g.int);
    for e in &g.edges {
        s.push_str(&format!(" {}-{}", e.a + 1, e.b + 1));
        if e.color != confmodels::Color::Plain {
            s.push_str(&format!(":{}", e.color.name()));
        }
    }
    for (v, ds) in g.decos.iter().enumerate() {
        if !ds.is_empty() {
            let names: Vec<String> = ds.iter().map(|d| name(*d)).collect();
            s.push_str(&format!(" {}{{{}}}", v + 1, names.join(",")));
        }
    }
    s.push(']');
    s
}

fn comb_text(ctx: &Ctx, x: &GraphComb) -> String {
    if x.is_zero() {
        return "0".into();
    }
    x.iter().map(|(g, c)| format!("({c}) {}", graph_text(ctx, g))).collect::<Vec<_>>().join("\n")
}

fn framed_text(ctx: &Ctx, pres: &HBGPresentation, k: &FramedKey) -> String {
    let words: Vec<String> = k.1.iter().map(|w| pres.word_name(w)).collect();
    format!("{} ⊗ ({})", graph_text(ctx, &k.0), words.join(", "))
}

// ---------------------------------------------------------------------------
// commands

fn basis(w: &Window) -> Outcome {
    let ctx = Ctx::new(w)?;
    if w.family == Family::Framed {
        let (pres, _) = ctx.frame()?;
        let keys = framed_window(&ctx, w, &pres)?;
        let text = keys.iter().map(|k| framed_text(&ctx, &pres, k)).collect::<Vec<_>>().join("\n");
        let json: Vec<Value> = keys
            .iter()
            .map(|k| {
                json!({
                    "graph": ctx.to_json(&GraphComb::from_graph(&k.0))[0],
                    "words": k.1.iter().map(|x| pres.word_name(x)).collect::<Vec<_>>(),
                    "degree": framed::framed_degree(&pres, k),
                })
            })
            .collect();
        return Ok(Report::pass(format!("{} elements\n{text}", keys.len()), json!(json)));
    }
    let gs = graph_window(&ctx, w)?;
    let mut text = format!("{} elements\n", gs.len());
    let mut items = Vec::new();
    for g in &gs {
        let deg = degree_of(w.family, g);
        text.push_str(&format!("deg {deg:>3}  {}\n", graph_text(&ctx, g)));
        items.push(json!({"degree": deg, "graph": ctx.to_json(&GraphComb::from_graph(g))[0]}));
    }
    Ok(Report::pass(text, json!(items)))
}

fn diff(w: &Window, graph: &str) -> Outcome {
    let ctx = Ctx::new(w)?;
    if w.family == Family::Framed {
        return Err(Error::Invalid("diff on framed graphs: use d2check or coact".into()));
    }
    let x = ctx.graph(graph)?;
    let d = graph_differential(&ctx, w.family);
    let dx = d(&x);
    Ok(Report::pass(comb_text(&ctx, &dx), ctx.to_json(&dx)))
}

fn d2check(w: &Window, sample: Option<usize>, seed: u64) -> Outcome {
    let ctx = Ctx::new(w)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut pick = |len: usize| -> Vec<usize> {
        let idx: Vec<usize> = (0..len).collect();
        match sample {
            Some(k) if k < len => {
                let mut v: Vec<usize> = idx.choose_multiple(&mut rng, k).copied().collect();
                v.sort();
                v
            }
            _ => idx,
        }
    };
    let (checked, witness) = if w.family == Family::Framed {
        let (pres, classes) = ctx.frame()?;
        let keys = framed_window(&ctx, w, &pres)?;
        let chosen: Vec<FramedKey> = pick(keys.len()).into_iter().map(|i| keys[i].clone()).collect();
        let z = mf::default_z();
        let pd = ctx.pd();
        let wit = d_squared_witness(&chosen, |x: &FramedComb| framed::fr_differential(pd, &z, &pres, &classes, x).unwrap());
        (chosen.len(), wit.map(|(k, dd)| (framed_text(&ctx, &pres, &k), format!("{} terms", dd.len()))))
    } else {
        let gs = graph_window(&ctx, w)?;
        let chosen: Vec<Graph> = pick(gs.len()).into_iter().map(|i| gs[i].clone()).collect();
        let d = graph_differential(&ctx, w.family);
        let wit = d_squared_witness(&chosen, |x| d(x));
        (chosen.len(), wit.map(|(g, dd)| (graph_text(&ctx, &g), comb_text(&ctx, &dd))))
    };
    match witness {
        None => Ok(Report::pass(
            format!("d² = 0 on {checked} basis elements"),
            json!({"checked": checked, "d_squared_zero": true}),
        )),
        Some((g, dd)) => Ok(Report {
            ok: false,
            text: format!("d² ≠ 0 on {g}:\n{dd}"),
            json: json!({"checked": checked, "d_squared_zero": false, "witness": g, "image": dd}),
        }),
    }
}

fn graphs_n_complex(n: i32, k: usize, lo: i32, min: i32, max: i32) -> Result<ComplexWindow<Graph>, Error> {
    let mut bases = BTreeMap::new();
    for deg in min - 1..=max + 1 {
        bases.insert(deg, kv::graphs_n_basis(n, k, lo, deg));
    }
    assemble_complex(&format!("Graphs_{n}({k}) loop order {lo}"), 1, bases, kv::contract_graph)
}

fn cohomology(w: &Window, min: i32, max: i32, max_lo: i32) -> Outcome {
    let ctx = Ctx::new(w)?;
    if min > max {
        return Err(Error::Invalid(format!("degree range {min}..{max}")));
    }
    let mut total: BTreeMap<i32, confmodels::homology::Dim> = BTreeMap::new();
    let mut closed = true;
    let mut add = |t: BTreeMap<i32, confmodels::homology::Dim>| {
        use confmodels::homology::Dim;
        for deg in min..=max {
            let d = t.get(&deg).cloned().unwrap_or(Dim::Exact(0));
            let cur = total.remove(&deg).unwrap_or(Dim::Exact(0));
            let sum = match (cur, d) {
                (Dim::Exact(a), Dim::Exact(b)) => Dim::Exact(a + b),
                (Dim::Exact(a), Dim::Bounds(l, h)) | (Dim::Bounds(l, h), Dim::Exact(a)) => Dim::Bounds(l + a, h + a),
                (Dim::Bounds(a, b), Dim::Bounds(c, e)) => Dim::Bounds(a + c, b + e),
            };
            total.insert(deg, sum);
        }
    };
    match w.family {
        Family::GraphsN => {
            for lo in 0..=max_lo {
                let cw = graphs_n_complex(ctx.n, w.arity, lo, min, max)?;
                add(cw.cohomology_table()?);
            }
        }
        Family::Framed => return Err(Error::Invalid("cohomology of framed windows is not supported".into())),
        fam => {
            let gs = graph_window(&ctx, w)?;
            let mut bases: BTreeMap<i32, Vec<Graph>> = BTreeMap::new();
            for g in gs {
                bases.entry(degree_of(fam, &g)).or_default().push(g);
            }
            let d = graph_differential(&ctx, fam);
            let cw = assemble_complex(&format!("{fam:?}"), step_of(fam), bases, |g: &Graph| d(&GraphComb::from_graph(g)))?;
            closed = cw.is_closed();
            add(cw.cohomology_table()?);
        }
    }
    let mut text = format_table(&total);
    if !closed {
        text.push_str("window not closed: bounds reported where the differential leaves it\n");
    }
    Ok(Report::pass(text, json!({"closed": closed, "dimensions": table_json(&total)})))
}

fn arnold_check(n: i32, k: usize) -> Outcome {
    if n < 2 || k == 0 {
        return Err(Error::Invalid(format!("n = {n}, arity = {k}")));
    }
    let top = (k as i32 - 1) * (n - 1);
    let cw = graphs_n_complex(n, k, 0, 0, top)?;
    let t = cw.cohomology_table()?;
    let poly = kv::arnold_poincare(k);
    let mut rows = Vec::new();
    let mut ok = true;
    for deg in 0..=top {
        let want = if deg % (n - 1) == 0 { poly[(deg / (n - 1)) as usize] as usize } else { 0 };
        let got = &t[&deg];
        let same = *got == confmodels::homology::Dim::Exact(want);
        ok &= same;
        rows.push((deg, got.to_string(), want, same));
    }
    let text = rows
        .iter()
        .map(|(d, g, w, s)| format!("{d:>6}  {g:>6}  {w:>6}  {}", if *s { "ok" } else { "MISMATCH" }))
        .collect::<Vec<_>>()
        .join("\n");
    let json = rows.iter().map(|(d, g, w, s)| json!({"degree": d, "graphs": g, "arnold": w, "ok": s})).collect::<Vec<_>>();
    Ok(Report { ok, text: format!("degree  graphs  arnold\n{text}"), json: json!(json) })
}

fn mc_check(n: i32, jmax: u32) -> Outcome {
    if n < 2 {
        return Err(Error::Invalid(format!("n = {n}")));
    }
    let m = kv::mc_element(n, jmax);
    let r = if n % 2 == 0 { kv::mc_residual(&m, None) } else { kv::mc_residual(&m, Some(("p", jmax))) };
    let name = |g: &Graph| g.to_string();
    let m_json: Vec<Value> = m.iter().map(|(g, c)| json!({"graph": name(g), "coefficient": c.to_string()})).collect();
    let r_json: Vec<Value> = r.iter().map(|(g, c)| json!({"graph": name(g), "coefficient": c.to_string()})).collect();
    Ok(Report {
        ok: r.is_zero(),
        text: format!("m = {m}\ndm + ½[m,m] = {}", if r.is_zero() { "0".to_string() } else { r.to_string() }),
        json: json!({"m": m_json, "residual": r_json}),
    })
}

fn propagator_verify(n: u8, undivided: bool) -> Outcome {
    if !(2..=8).contains(&n) {
        return Err(Error::Invalid(format!("n = {n} outside 2..=8")));
    }
    let omega = if undivided { cartan::equivariant_volume_form_undivided(n) } else { cartan::equivariant_volume_form(n) };
    let c = cartan::check_propagator(n, &omega);
    let residual = if c.residual.is_zero() { "0".to_string() } else { c.residual.to_string() };
    Ok(Report {
        ok: c.passed(),
        text: format!(
            "Ω = {}\nd_uΩ matches: {}\ntwist matches: {}\nresidual: {residual}",
            c.omega, c.d_omega_matches, c.twist_matches
        ),
        json: json!({
            "n": n,
            "omega": cartan::form_to_json(&c.omega),
            "d_omega_matches": c.d_omega_matches,
            "twist_matches": c.twist_matches,
            "residual": residual,
        }),
    })
}

fn iterated_integral_check(n: u8, max_letters: usize, max_degree: i32, loop_order: Option<u32>) -> Outcome {
    if !(2..=4).contains(&n) {
        return Err(Error::Invalid(format!("n = {n} outside 2..=4")));
    }
    let monos = cartan::u_monomials(n, max_degree);
    let cobar = cartan::two_sided_cobar_check(&monos, max_letters);
    let letters: Vec<cartan::EqForm> = monos.iter().map(|m| cartan::EqForm::single(m.clone(), confmodels::Scalar::one())).collect();
    let mut shuffle_failures = 0;
    let mut shuffle_checked = 0;
    for a in &letters {
        for b in &letters {
            shuffle_checked += 1;
            if !cartan::shuffle_defect(std::slice::from_ref(a), std::slice::from_ref(b)).is_zero() {
                shuffle_failures += 1;
            }
        }
    }
    let mut gauge = json!(null);
    let mut gauge_ok = true;
    let mut gauge_text = String::new();
    if let Some(l) = loop_order {
        let fam = cartan::McFamily::standard(n as i32, 1);
        let a = cartan::gauge_transport(&fam, l);
        let mut bad = Vec::new();
        let mut count = 0;
        for e in 0..=4 {
            for m in 0..=2 {
                for g in kv::graphs_n_by_size(n as i32, 2, e, m) {
                    count += 1;
                    if !cartan::gauge_defect(&fam, &a, &g).is_zero() {
                        bad.push(g.to_string());
                    }
                }
            }
        }
        gauge_ok = bad.is_empty();
        gauge_text = format!("\ngauge transport (loop order ≤ {l}): {count} graphs, {} failures", bad.len());
        gauge = json!({"loop_order": l, "checked": count, "failures": bad});
    }
    let ok = cobar.failures.is_empty() && shuffle_failures == 0 && gauge_ok;
    let failures: Vec<String> = cobar.failures.iter().take(5).map(|f| format!("{f:?}")).collect();
    Ok(Report {
        ok,
        text: format!(
            "two-sided cobar: {} elements, {} failures\nshuffle: {shuffle_checked} pairs, {shuffle_failures} failures{gauge_text}",
            cobar.checked,
            cobar.failures.len()
        ),
        json: json!({
            "cobar": {"checked": cobar.checked, "failures": failures},
            "shuffle": {"checked": shuffle_checked, "failures": shuffle_failures},
            "gauge": gauge,
        }),
    })
}

fn pairs_json(ctx: &Ctx, x: &LinComb<kv::GraphPair>) -> Value {
    let items: Vec<Value> = x
        .iter()
        .map(|((a, b), c)| {
            json!({
                "left": ctx.to_json(&GraphComb::from_graph(a))[0],
                "right": confmodels::graph::graph_comb_to_json(&GraphComb::from_graph(b), &|d| format!("d{}", d.id))[0],
                "coefficient": c.to_string(),
            })
        })
        .collect();
    json!(items)
}

fn pairs_text(ctx: &Ctx, x: &LinComb<kv::GraphPair>) -> String {
    if x.is_zero() {
        return "0".into();
    }
    x.iter().map(|((a, b), c)| format!("({c}) {} ⊗ {}", graph_text(ctx, a), b)).collect::<Vec<_>>().join("\n")
}

fn block_bounds(slot: usize, block: usize, arity: usize) -> Result<usize, Error> {
    if slot == 0 || block == 0 || slot - 1 + block > arity {
        return Err(Error::Invalid(format!("slot {slot} with block {block} in arity {arity}")));
    }
    Ok(slot - 1)
}

fn framing_change(w: &Window, sigma: &Path, graph: Option<&str>, slot: usize, block: usize) -> Outcome {
    let ctx = Ctx::new(w)?;
    let pd = ctx.pd.as_ref().ok_or_else(|| Error::Invalid("framing-change needs --pd".into()))?;
    let pres = HBGPresentation::for_dimension(ctx.n);
    let sigma = framed::parse_sigma(pd, &json_arg(&sigma.to_string_lossy())?)?;
    if let Some(gs) = graph {
        let x = ctx.graph(gs)?;
        let arity = x.iter().next().map_or(0, |(g, _)| g.ext);
        let i = block_bounds(slot, block, arity)?;
        let f = framed::framing_change(pd, &pres, &sigma, &x, i, block)?;
        return Ok(Report::pass(pairs_text(&ctx, &f), pairs_json(&ctx, &f)));
    }
    let i = block_bounds(slot, block, w.arity)?;
    let z = mf::default_z();
    let window = mf::graphs_m_window(pd, w.arity, w.max_edges, w.max_internal, ctx.max_deco(w)?)?;
    let mut nontrivial = 0;
    for g in &window {
        let x = GraphComb::from_graph(g);
        let f = framed::framing_change(pd, &pres, &sigma, &x, i, block)?;
        if f != mf::coact_fiberwise(pd, &x, i, block)? {
            nontrivial += 1;
        }
        let dx = mf::differential_graphs_m(pd, &z, &x)?;
        let lhs = framed::framing_change(pd, &pres, &sigma, &dx, i, block)?;
        let diff = lhs.sub(&mf::pair_differential(pd, &z, &f, i));
        if !diff.is_zero() {
            return Ok(Report {
                ok: false,
                text: format!("not a chain map on {}:\n{}", graph_text(&ctx, g), pairs_text(&ctx, &diff)),
                json: json!({"chain_map": false, "witness": ctx.to_json(&x), "defect": pairs_json(&ctx, &diff)}),
            });
        }
    }
    Ok(Report::pass(
        format!("chain map on {} graphs ({nontrivial} changed by σ)", window.len()),
        json!({"chain_map": true, "checked": window.len(), "nontrivial": nontrivial}),
    ))
}

fn parse_words(pres: &HBGPresentation, s: &str, arity: usize) -> Result<Vec<HWord>, Error> {
    let parts: Vec<&str> = s.split(';').collect();
    if parts.len() != arity {
        return Err(Error::Parse(format!("--words has {} vertices, graph has {arity}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            let p = p.trim();
            if p.is_empty() {
                Ok(vec![])
            } else {
                p.split('|').map(|l| pres.parse_letter(l.trim())).collect()
            }
        })
        .collect()
}

fn coact(w: &Window, graph: &str, words: Option<&str>, slot: usize, block: usize) -> Outcome {
    let ctx = Ctx::new(w)?;
    let x = ctx.graph(graph)?;
    let arity = x.iter().next().map_or(0, |(g, _)| g.ext);
    let i = block_bounds(slot, block, arity)?;
    match w.family {
        Family::GraphsN => {
            let c = kv::cocompose(&x, i, block)?;
            Ok(Report::pass(pairs_text(&ctx, &c), pairs_json(&ctx, &c)))
        }
        Family::GraphsM => {
            let c = mf::coact_fiberwise(ctx.pd(), &x, i, block)?;
            Ok(Report::pass(pairs_text(&ctx, &c), pairs_json(&ctx, &c)))
        }
        Family::Framed => {
            let (pres, _) = ctx.frame()?;
            let ws = match words {
                Some(s) => parse_words(&pres, s, arity)?,
                None => vec![vec![]; arity],
            };
            let mut fx = FramedComb::new();
            for (g, c) in x.iter() {
                framed::add_framed(&mut fx, g, ws.clone(), c);
            }
            let letters = framed::coaction_letters(ctx.n, &pres, 2);
            let r = framed::framed_coaction(ctx.pd(), &pres, &letters, &fx, i, block, w.max_letters.max(2))?;
            let text = if r.is_zero() {
                "0".to_string()
            } else {
                r.iter().map(|((k, b), c)| format!("({c}) {} ⊗ {b}", framed_text(&ctx, &pres, k))).collect::<Vec<_>>().join("\n")
            };
            let json: Vec<Value> = r
                .iter()
                .map(|((k, b), c)| {
                    json!({
                        "left": ctx.to_json(&GraphComb::from_graph(&k.0))[0],
                        "words": k.1.iter().map(|x| pres.word_name(x)).collect::<Vec<_>>(),
                        "right": b.to_string(),
                        "coefficient": c.to_string(),
                    })
                })
                .collect();
            Ok(Report::pass(text, json!(json)))
        }
        f => Err(Error::Invalid(format!("coact is defined for graphs-n, graphs-m and framed, not {f:?}"))),
    }
}

fn export_matrix(w: &Window, degree: i32) -> Outcome {
    let ctx = Ctx::new(w)?;
    let (src, dst, d): (Vec<Graph>, Vec<Graph>, GraphD) = match (w.family, w.loop_order) {
        (Family::GraphsN, Some(lo)) => (
            kv::graphs_n_basis(ctx.n, w.arity, lo, degree),
            kv::graphs_n_basis(ctx.n, w.arity, lo, degree + 1),
            graph_differential(&ctx, Family::GraphsN),
        ),
        (Family::Framed, _) => return Err(Error::Invalid("export-matrix on framed windows is not supported".into())),
        (fam, _) => {
            let gs = graph_window(&ctx, w)?;
            let step = step_of(fam);
            let src = gs.iter().filter(|g| degree_of(fam, g) == degree).cloned().collect();
            let dst = gs.iter().filter(|g| degree_of(fam, g) == degree + step).cloned().collect();
            (src, dst, graph_differential(&ctx, fam))
        }
    };
    let mut bases = BTreeMap::new();
    bases.insert(0, src);
    bases.insert(1, dst);
    let cw = assemble_complex("export", 1, bases, |g: &Graph| d(&GraphComb::from_graph(g)))?;
    let m = &cw.matrices[&0];
    let closed = cw.is_closed();
    let mut text = m.to_sms();
    if !closed {
        eprintln!("warning: the image leaves the enumerated target basis; entries outside it are dropped");
    }
    if text.ends_with('\n') {
        text.pop();
    }
    Ok(Report::pass(
        text.clone(),
        json!({"rows": m.rows(), "cols": m.cols(), "closed": closed, "sms": text}),
    ))
}
