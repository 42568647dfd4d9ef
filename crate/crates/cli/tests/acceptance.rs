//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::HashSet;
use std::path::Path;
use std::time::{Duration, Instant};

use eqopt::model::load_model;
use eqopt::StdClock;
use eqopt_core::egraph::{default_ruleset, saturate, EClassId, EGraph, ENode, NoClock, Pattern, SaturationLimits, StopReason};
use eqopt_core::eqn::{parse_eqn, write_eqn};
use eqopt_core::equiv::{check_equiv, EquivConfig, Verdict};
use eqopt_core::extract::{compute_feasible, draw_rng, extract_greedy, LocalCost, PoolConfig};
use eqopt_core::features::{extract_features, FeatureVector};
use eqopt_core::fuzz::{random_circuit, FuzzConfig};
use eqopt_core::pipeline::{cost_model, optimize, optimize_all, pool_sweep, OptimizeConfig, Optimized, Selector};
use eqopt_core::sexpr::{sexpr_to_term, term_to_sexpr};
use eqopt_core::{Circuit, Op, TermId, TermStore};

const CORPUS: usize = 500;
const CORPUS_SEED: u64 = 2024;
const SWEEP: [usize; 5] = [2, 10, 50, 100, 150];

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn report(&mut self, name: &'static str, ok: bool, detail: String, took: Duration) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict}  {name:<28} {detail} [{:.2}s]", took.as_secs_f64());
        if !ok {
            self.failed.push(name);
        }
    }
}

fn corpus() -> Vec<Circuit> {
    (0..CORPUS).map(|i| random_circuit(&mut draw_rng(CORPUS_SEED, i), &FuzzConfig::default())).collect()
}

fn desk(pool_size: usize) -> OptimizeConfig {
    OptimizeConfig {
        limits: SaturationLimits::desk(),
        pool: PoolConfig { pool_size, ..PoolConfig::default() },
        equiv: EquivConfig::default(),
    }
}

fn selectors() -> [Selector; 3] {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("models");
    let delay = load_model(&dir.join("delay.json")).expect("toy delay model");
    let area = load_model(&dir.join("area.json")).expect("toy area model");
    [Selector::Ensemble(delay.clone()), Selector::Ensemble(area.clone()), Selector::Balanced { delay, area }]
}

// Pattern semantics written out again, apart from the library's evaluator.
fn eval_pattern(p: &Pattern, env: &[bool]) -> bool {
    match p {
        Pattern::Var(v) => env[v.0 as usize],
        Pattern::Node(op, k) => match op {
            Op::Const(b) => *b,
            Op::Not => !eval_pattern(&k[0], env),
            Op::And => eval_pattern(&k[0], env) && eval_pattern(&k[1], env),
            Op::Or => eval_pattern(&k[0], env) || eval_pattern(&k[1], env),
            other => panic!("no semantics for {other}"),
        },
    }
}

fn rule_soundness(t: &mut Tally) {
    let start = Instant::now();
    let rules = default_ruleset();
    let mut bad = Vec::new();
    let mut rows = 0;
    for r in &rules {
        let mut vars = r.lhs.vars();
        vars.extend(r.rhs.vars());
        let n = vars.iter().map(|v| v.0 as usize + 1).max().unwrap_or(0);
        for row in 0..1u32 << n {
            let env: Vec<bool> = (0..4).map(|i| row >> i & 1 == 1).collect();
            rows += 1;
            if eval_pattern(&r.lhs, &env) != eval_pattern(&r.rhs, &env) {
                bad.push(r.name.clone());
                break;
            }
        }
    }
    let took = start.elapsed();
    let ok = bad.is_empty() && rules.len() == 23 && took < Duration::from_secs(1);
    t.report("rule soundness", ok, format!("{} rules, {rows} rows, unsound: {bad:?}", rules.len()), took);
}

// Truth table of every output by direct recursive evaluation.
fn truth_table(c: &Circuit) -> Vec<Vec<bool>> {
    let n = c.inputs().len();
    (0..1u32 << n)
        .map(|row| {
            let env = |name: &eqopt_core::Name| c.inputs().iter().position(|i| i == name).map(|k| row >> k & 1 == 1);
            c.outputs().iter().map(|(_, r)| eval_term(&c.store, *r, &env)).collect()
        })
        .collect()
}

fn eval_term(s: &TermStore, t: TermId, env: &dyn Fn(&eqopt_core::Name) -> Option<bool>) -> bool {
    let k = s.children(t);
    match s.op(t) {
        Op::Var(n) => env(n).expect("bound input"),
        Op::Const(b) => *b,
        Op::Not => !eval_term(s, k[0], env),
        Op::And => eval_term(s, k[0], env) && eval_term(s, k[1], env),
        Op::Or => eval_term(s, k[0], env) || eval_term(s, k[1], env),
        Op::Concat => unreachable!("outputs are not bundles"),
    }
}

struct Runs {
    // Per circuit, one run per selector.
    runs: Vec<Vec<Optimized>>,
    selectors: [Selector; 3],
    took: Duration,
}

fn semantic_preservation(t: &mut Tally, corpus: &[Circuit]) -> Runs {
    let start = Instant::now();
    let selectors = selectors();
    let cfg = desk(*SWEEP.last().unwrap());
    let mut runs = Vec::new();
    let (mut equivalent, mut table_agree, mut errors) = (0, 0, Vec::new());
    for (i, c) in corpus.iter().enumerate() {
        match optimize_all(c, &selectors, &cfg, &StdClock::start()) {
            Ok(rs) => {
                let want = truth_table(c);
                for r in &rs {
                    equivalent += usize::from(r.equiv.verdict == Verdict::Equivalent);
                    table_agree += usize::from(truth_table(&r.circuit) == want);
                }
                runs.push(rs);
            }
            Err(e) => errors.push(format!("#{i}: {e}")),
        }
    }
    let took = start.elapsed();
    let total = corpus.len() * selectors.len();
    let ok = errors.is_empty() && equivalent == total && table_agree == total;
    t.report(
        "semantic preservation",
        ok,
        format!(
            "{equivalent}/{total} CEC equivalent, {table_agree}/{total} truth tables equal, errors {errors:?}; \
             target <300s {}",
            if took < Duration::from_secs(300) { "met" } else { "missed" }
        ),
        took,
    );
    Runs { runs, selectors, took }
}

/// Least tree size per class by size-indexed reachability: class c has a
/// term of size k iff some node builds one from children of sizes summing
/// to k - 1.
fn brute_min_size(g: &EGraph, root: EClassId, max: usize) -> Option<usize> {
    let ids: Vec<EClassId> = g.classes().map(|c| c.id).collect();
    let slot = |id: EClassId| ids.iter().position(|&c| c == g.find(id)).unwrap();
    let mut has = vec![vec![false; ids.len()]; max + 1];
    for k in 1..=max {
        for (ci, &c) in ids.iter().enumerate() {
            has[k][ci] = g.class(c).nodes.iter().any(|n| match n.children.as_slice() {
                [] => k == 1,
                [a] => k >= 2 && has[k - 1][slot(*a)],
                [a, b] => (1..k.saturating_sub(1)).any(|i| has[i][slot(*a)] && has[k - 1 - i][slot(*b)]),
                _ => false,
            });
        }
        if has[k][slot(root)] {
            return Some(k);
        }
    }
    None
}

fn term_size(s: &TermStore, t: TermId) -> usize {
    1 + s.children(t).iter().map(|&k| term_size(s, k)).sum::<usize>()
}

fn factoring(t: &mut Tally) {
    let start = Instant::now();
    let c = parse_eqn("INORDER = x y z;\nOUTORDER = f;\nf = x*y + x*z;\n").unwrap();
    let root = c.outputs()[0].1;
    let input_size = term_size(&c.store, root);
    let mut g = EGraph::new();
    let r = g.add_term(&c.store, root).unwrap();
    saturate(&mut g, &default_ruleset(), &SaturationLimits::desk(), &NoClock);
    let leaf = |n: &str| g.lookup(&ENode::leaf(Op::Var(n.into()))).unwrap();
    let shape = g
        .lookup(&ENode::new(Op::Or, &[leaf("y"), leaf("z")]))
        .and_then(|yz| g.lookup(&ENode::new(Op::And, &[leaf("x"), yz])));
    let in_root = shape == Some(g.find(r));
    let table = compute_feasible(&g, r, LocalCost::AstSize).unwrap();
    let mut out = TermStore::new();
    let best = extract_greedy(&g, &table, &mut out).unwrap();
    let size = term_size(&out, best);
    let oracle = brute_min_size(&g, r, 16);
    let ok = in_root && input_size == 7 && size == 5 && oracle == Some(5);
    let took = start.elapsed();
    t.report(
        "factoring example",
        ok && took < Duration::from_secs(1),
        format!("x*(y+z) in root class: {in_root}; size {input_size} -> {size} ({}), oracle {oracle:?}", term_to_sexpr(&out, best)),
        took,
    );
}

fn greedy_optimality(t: &mut Tally) {
    let start = Instant::now();
    let fuzz = FuzzConfig { max_inputs: 3, max_nodes: 7, max_outputs: 1 };
    let limits = SaturationLimits { node_limit: 400, iter_limit: 3, ..SaturationLimits::desk() };
    let (mut graphs, mut agree, mut tried) = (0, 0, 0);
    let mut mismatches = Vec::new();
    while graphs < 200 && tried < 20_000 {
        let seed = tried;
        tried += 1;
        let mut c = random_circuit(&mut draw_rng(77, seed), &fuzz);
        let root = c.root().unwrap();
        let mut g = EGraph::new();
        let r = g.add_term(&c.store, root).unwrap();
        saturate(&mut g, &default_ruleset(), &limits, &NoClock);
        if g.class_count() > 12 || g.class_count() < 3 {
            continue;
        }
        graphs += 1;
        let table = compute_feasible(&g, r, LocalCost::AstSize).unwrap();
        let mut out = TermStore::new();
        let term = extract_greedy(&g, &table, &mut out).unwrap();
        let got = term_size(&out, term);
        let want = brute_min_size(&g, r, 64);
        if want == Some(got) {
            agree += 1;
        } else {
            mismatches.push((seed, got, want));
        }
    }
    let ok = graphs >= 100 && agree == graphs;
    t.report(
        "greedy vs brute force",
        ok,
        format!("{agree}/{graphs} e-graphs with <=12 classes agree; mismatches {mismatches:?}"),
        start.elapsed(),
    );
}

fn pool_dominance(t: &mut Tally, runs: &Runs) {
    let start = Instant::now();
    let (mut total, mut dominated, mut strict) = (0, 0, 0);
    let mut bad = Vec::new();
    for (i, rs) in runs.runs.iter().enumerate() {
        for (r, selector) in rs.iter().zip(&runs.selectors) {
            let model = cost_model(selector, &r.pool).unwrap();
            let seed = |k: usize| model.cost(&r.pool.store, r.pool.candidates[k].term).unwrap();
            let greedy = seed(r.pool.min_size).min(seed(r.pool.min_depth));
            total += 1;
            if r.selected_cost <= greedy {
                dominated += 1;
                strict += usize::from(r.selected_cost < greedy);
            } else {
                bad.push(i);
            }
        }
    }
    let pct = 100.0 * strict as f64 / total.max(1) as f64;
    t.report(
        "pool dominance",
        total > 0 && dominated == total,
        format!("{dominated}/{total} runs pool <= greedy; strict improvement on {strict} ({pct:.1}%, reported only); failing circuits {bad:?}"),
        start.elapsed(),
    );
}

fn pool_monotonicity(t: &mut Tally, runs: &Runs) {
    let start = Instant::now();
    let (mut total, mut monotone) = (0, 0);
    let mut bad = Vec::new();
    for (i, rs) in runs.runs.iter().enumerate() {
        for (r, selector) in rs.iter().zip(&runs.selectors) {
            let model = cost_model(selector, &r.pool).unwrap();
            let sweep = pool_sweep(&r.pool, &model, &SWEEP).unwrap();
            total += 1;
            if sweep.windows(2).all(|w| w[1] <= w[0]) && sweep[SWEEP.len() - 1] == r.selected_cost {
                monotone += 1;
            } else {
                bad.push((i, sweep));
            }
        }
    }
    t.report(
        "pool-size monotonicity",
        total > 0 && monotone == total,
        format!("{monotone}/{total} sweeps over {SWEEP:?} non-increasing; failing {bad:?}"),
        start.elapsed(),
    );
}

fn limits_honored(t: &mut Tally) {
    let start = Instant::now();
    let big = FuzzConfig { max_inputs: 16, max_nodes: 200, max_outputs: 1 };
    let mut c = random_circuit(&mut draw_rng(5, 0), &big);
    let root = c.root().unwrap();

    let mut g = EGraph::new();
    g.add_term(&c.store, root).unwrap();
    let nodes = SaturationLimits { node_limit: 1_000, ..SaturationLimits::desk() };
    let r = saturate(&mut g, &default_ruleset(), &nodes, &NoClock);
    // One batch may overshoot by a single right-hand side instantiation.
    let node_ok = r.stop_reason == StopReason::Nodes && r.enodes <= 1_000 + 8;

    let mut g = EGraph::new();
    g.add_term(&c.store, root).unwrap();
    let timed = SaturationLimits { time_limit: Duration::from_secs(1), node_limit: usize::MAX, iter_limit: usize::MAX };
    let wall = Instant::now();
    let rt = saturate(&mut g, &default_ruleset(), &timed, &StdClock::start());
    let wall = wall.elapsed();
    let time_ok = rt.stop_reason == StopReason::Time && wall <= Duration::from_millis(1500);
    t.report(
        "saturation limits",
        node_ok && time_ok,
        format!(
            "node_limit 1000: {} at {} e-nodes; time_limit 1s: {} after {:.3}s wall",
            r.stop_reason.as_str(),
            r.enodes,
            rt.stop_reason.as_str(),
            wall.as_secs_f64()
        ),
        start.elapsed(),
    );
}

fn pool_fingerprint(r: &Optimized) -> Vec<(String, &'static str, Option<usize>)> {
    r.pool
        .candidates
        .iter()
        .map(|c| (term_to_sexpr(&r.pool.store, c.term), c.provenance.as_str(), c.draw))
        .collect()
}

fn determinism(t: &mut Tally, corpus: &[Circuit]) {
    let start = Instant::now();
    let [delay, _, balanced] = selectors();
    let cfg = OptimizeConfig { pool: PoolConfig { seed: 99, ..PoolConfig::default() }, ..desk(122) };
    let (mut same, mut total) = (0, 0);
    for c in corpus.iter().take(12) {
        for s in [&delay, &balanced] {
            // Iteration and node limits only, so timing cannot differ.
            let a = optimize(c, s, &cfg, &NoClock).unwrap();
            let b = optimize(c, s, &cfg, &NoClock).unwrap();
            total += 1;
            if write_eqn(&a.circuit) == write_eqn(&b.circuit) && pool_fingerprint(&a) == pool_fingerprint(&b) {
                same += 1;
            }
        }
    }
    t.report("determinism", same == total, format!("{same}/{total} repeated runs byte-identical (eqn and pool)"), start.elapsed());
}

fn round_trips(t: &mut Tally, corpus: &[Circuit]) {
    let start = Instant::now();
    let (mut eqn_ok, mut sexpr_ok) = (0, 0);
    for c in corpus {
        let text = write_eqn(c);
        if let Ok(back) = parse_eqn(&text) {
            let same = check_equiv(c, &back, &EquivConfig::default()).map(|r| r.verdict == Verdict::Equivalent);
            eqn_ok += usize::from(same == Ok(true) && write_eqn(&back) == text);
        }
        let mut c = c.clone();
        let root = c.root().unwrap();
        let printed = term_to_sexpr(&c.store, root);
        let mut fresh = TermStore::new();
        let ok = sexpr_to_term(&mut fresh, &printed).is_ok_and(|t| term_to_sexpr(&fresh, t) == printed)
            && sexpr_to_term(&mut c.store, &printed) == Ok(root);
        sexpr_ok += usize::from(ok);
    }
    let n = corpus.len();
    t.report(
        "format round trips",
        eqn_ok == n && sexpr_ok == n,
        format!("eqn {eqn_ok}/{n}, s-expression {sexpr_ok}/{n}"),
        start.elapsed(),
    );
}

/// Features by a plain recursive walk over the shared DAG.
fn naive_features(s: &TermStore, root: TermId) -> FeatureVector {
    fn walk(s: &TermStore, t: TermId, seen: &mut HashSet<TermId>, edges: &mut HashSet<(TermId, TermId)>, depth: &mut std::collections::HashMap<TermId, usize>) -> usize {
        if let Some(&d) = depth.get(&t) {
            return d;
        }
        seen.insert(t);
        let mut d = 0;
        for &k in s.children(t) {
            edges.insert((t, k));
            d = d.max(walk(s, k, seen, edges, depth));
        }
        depth.insert(t, d + 1);
        d + 1
    }
    let (mut seen, mut edges, mut depth) = (HashSet::new(), HashSet::new(), Default::default());
    let d = walk(s, root, &mut seen, &mut edges, &mut depth);
    let count = |op: Op| seen.iter().filter(|&&t| *s.op(t) == op).count();
    let n = seen.len();
    FeatureVector {
        and_count: count(Op::And),
        or_count: count(Op::Or),
        not_count: count(Op::Not),
        node_count: n,
        depth: d,
        density: if n > 1 { edges.len() as f64 / (n * (n - 1)) as f64 } else { 0.0 },
        edge_sum: edges.len(),
    }
}

fn feature_correctness(t: &mut Tally, corpus: &[Circuit]) {
    let start = Instant::now();
    let mut agree = 0;
    for c in corpus {
        let mut c = c.clone();
        let root = c.root().unwrap();
        agree += usize::from(extract_features(&c.store, root) == naive_features(&c.store, root));
    }
    let mut factor = parse_eqn("INORDER = x y z;\nOUTORDER = f;\nf = x*y + x*z;\n").unwrap();
    let root = factor.root().unwrap();
    let f = extract_features(&factor.store, root);
    let factor_ok = f.to_string() == "2,1,0,6,3,0.2,6" && f == naive_features(&factor.store, root);
    t.report(
        "feature correctness",
        agree == corpus.len() && factor_ok,
        format!("{agree}/{} match the reference walk; factoring example ({f}) ok: {factor_ok}", corpus.len()),
        start.elapsed(),
    );
}

fn main() {
    let mut t = Tally { failed: Vec::new() };
    let corpus = corpus();
    println!("acceptance: {} fuzz circuits (<=10 inputs, <=60 nodes), desk limits 5s / 50,000 e-nodes", corpus.len());
    rule_soundness(&mut t);
    factoring(&mut t);
    greedy_optimality(&mut t);
    feature_correctness(&mut t, &corpus);
    round_trips(&mut t, &corpus);
    limits_honored(&mut t);
    determinism(&mut t, &corpus);
    let runs = semantic_preservation(&mut t, &corpus);
    pool_dominance(&mut t, &runs);
    pool_monotonicity(&mut t, &runs);
    println!("corpus optimize time {:.1}s", runs.took.as_secs_f64());
    if t.failed.is_empty() {
        println!("acceptance: all criteria PASS");
    } else {
        println!("acceptance: FAILED {:?}", t.failed);
        std::process::exit(1);
    }
}
