use alloc::vec::Vec;
use core::time::Duration;

use hashbrown::HashSet;

use super::pattern::{Budget, Halt, Matcher, Pattern, Subst};
use super::rules::RewriteRule;
use super::{EClassId, EGraph};
use crate::FxBuild;

/// Elapsed-time source for the time limit. The core crate has no clock of
/// its own.
pub trait Clock {
    /// Time since the clock was started.
    fn elapsed(&self) -> Duration;
}

/// A clock that never advances; only the node and iteration limits apply.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&self) -> Duration {
        Duration::ZERO
    }
}

impl<F: Fn() -> Duration> Clock for F {
    fn elapsed(&self) -> Duration {
        self()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaturationLimits {
    pub time_limit: Duration,
    pub node_limit: usize,
    pub iter_limit: usize,
}

impl Default for SaturationLimits {
    fn default() -> Self {
        SaturationLimits { time_limit: Duration::from_secs(300), node_limit: 2_500_000, iter_limit: 30 }
    }
}

impl SaturationLimits {
    /// 5 s and 50,000 e-nodes, for test suites and quick runs.
    pub fn desk() -> Self {
        SaturationLimits { time_limit: Duration::from_secs(5), node_limit: 50_000, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StopReason {
    Saturated,
    Time,
    Nodes,
    Iterations,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Saturated => "saturated",
            StopReason::Time => "time",
            StopReason::Nodes => "nodes",
            StopReason::Iterations => "iterations",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaturationReport {
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub enodes: usize,
    pub classes: usize,
    pub wall_time: Duration,
}

// Clock reads are cheap but not free; poll every this many work items.
const POLL: usize = 256;

// Smallest match batch before a search is cut short.
const MIN_BATCH: usize = 4096;

/// Runs equality saturation on `g`.
///
/// Each iteration searches every directed rewrite against a frozen graph,
/// applies the matches not applied before, then rebuilds once. A search
/// stops collecting once it holds `node_limit` new matches, and a single
/// class contributes at most that many; the remainder is found again by the
/// next iteration. Stops when a complete iteration changes
/// nothing or a limit is hit. Limit checks also run inside the search and
/// apply phases, so the graph overshoots the node limit by at most one
/// e-node instantiation before the final rebuild.
pub fn saturate<C: Clock + ?Sized>(
    g: &mut EGraph,
    rules: &[RewriteRule],
    limits: &SaturationLimits,
    clock: &C,
) -> SaturationReport {
    let start = clock.elapsed();
    let elapsed = || clock.elapsed().saturating_sub(start);
    let rewrites: Vec<(&Pattern, &Pattern)> = rules.iter().flat_map(|r| r.directions()).collect();
    let mut applied: HashSet<(usize, EClassId, Subst), FxBuild> = HashSet::default();

    g.rebuild();
    let mut iterations = 0;
    let reason = loop {
        if iterations >= limits.iter_limit {
            break StopReason::Iterations;
        }
        if elapsed() >= limits.time_limit {
            break StopReason::Time;
        }
        if g.total_nodes() > limits.node_limit {
            break StopReason::Nodes;
        }

        let mut stop = None;
        let mut truncated = false;
        let mut matches: Vec<(usize, EClassId, Subst)> = Vec::new();
        {
            let batch = limits.node_limit.max(MIN_BATCH);
            let mut out_of_time = || elapsed() >= limits.time_limit;
            let mut matcher = Matcher::new(g, Budget::new(batch, &mut out_of_time));
            let mut found = Vec::new();
            'search: for (k, (lhs, _)) in rewrites.iter().enumerate() {
                for class in g.classes() {
                    found.clear();
                    match matcher.match_class(lhs, class.id, &mut found) {
                        Ok(()) => {}
                        // Keep what was found and skip the rest of this class.
                        Err(Halt::Full) => truncated = true,
                        Err(Halt::Time) => {
                            stop = Some(StopReason::Time);
                            break 'search;
                        }
                    }
                    matches.extend(found.iter().map(|&s| (k, class.id, s)).filter(|m| !applied.contains(m)));
                    if matches.len() >= batch {
                        truncated = true;
                        break 'search;
                    }
                }
            }
        }

        let mut changed = 0usize;
        if stop.is_none() {
            for (n, (k, class, subst)) in matches.into_iter().enumerate() {
                applied.insert((k, class, subst));
                let (rhs_class, fresh) = rewrites[k].1.instantiate(g, &subst);
                changed += fresh;
                if g.union(class, rhs_class).1 {
                    changed += 1;
                }
                if g.total_nodes() > limits.node_limit {
                    stop = Some(StopReason::Nodes);
                    break;
                }
                if n % POLL == 0 && elapsed() >= limits.time_limit {
                    stop = Some(StopReason::Time);
                    break;
                }
            }
        }
        changed += g.rebuild();
        iterations += 1;

        if let Some(reason) = stop {
            break reason;
        }
        if changed == 0 && !truncated {
            break StopReason::Saturated;
        }
    };

    SaturationReport {
        stop_reason: reason,
        iterations,
        enodes: g.total_nodes(),
        classes: g.class_count(),
        wall_time: elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egraph::default_ruleset;
    use crate::egraph::ENode;
    use crate::expr::{Op, TermStore};

    fn run(g: &mut EGraph) -> SaturationReport {
        saturate(g, &default_ruleset(), &SaturationLimits::default(), &NoClock)
    }

    #[test]
    fn bare_variable_saturates_immediately() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let mut g = EGraph::new();
        g.add_term(&s, a).unwrap();
        let r = run(&mut g);
        assert_eq!(r.stop_reason, StopReason::Saturated);
        assert!(r.iterations <= 1);
        assert_eq!(r.enodes, 1);
    }

    #[test]
    fn factoring_appears_in_root_class() {
        let mut s = TermStore::new();
        let x = s.var("x");
        let y = s.var("y");
        let z = s.var("z");
        let xy = s.and(x, y);
        let xz = s.and(x, z);
        let root = s.or(xy, xz);
        let mut g = EGraph::new();
        let r = g.add_term(&s, root).unwrap();
        let report = run(&mut g);
        assert_eq!(report.stop_reason, StopReason::Saturated);
        let (cx, cy, cz) = (
            g.lookup(&ENode::leaf(Op::Var("x".into()))).unwrap(),
            g.lookup(&ENode::leaf(Op::Var("y".into()))).unwrap(),
            g.lookup(&ENode::leaf(Op::Var("z".into()))).unwrap(),
        );
        let y_or_z = g.lookup(&ENode::new(Op::Or, &[cy, cz])).expect("y + z is present");
        let factored = ENode::new(Op::And, &[cx, y_or_z]);
        assert_eq!(g.lookup(&factored), Some(g.find(r)));
    }

    #[test]
    fn complement_folds_to_zero() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let na = s.not(a);
        let t = s.and(a, na);
        let mut g = EGraph::new();
        let r = g.add_term(&s, t).unwrap();
        run(&mut g);
        assert_eq!(g.lookup(&ENode::leaf(Op::Const(false))), Some(g.find(r)));
    }

    #[test]
    fn iteration_limit() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let b = s.var("b");
        let c = s.var("c");
        let ab = s.and(a, b);
        let t = s.or(ab, c);
        let mut g = EGraph::new();
        g.add_term(&s, t).unwrap();
        let limits = SaturationLimits { iter_limit: 1, ..Default::default() };
        let r = saturate(&mut g, &default_ruleset(), &limits, &NoClock);
        assert_eq!(r.stop_reason, StopReason::Iterations);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn closure_clock_drives_time_limit() {
        let mut s = TermStore::new();
        let a = s.var("a");
        let mut g = EGraph::new();
        g.add_term(&s, a).unwrap();
        let limits = SaturationLimits { time_limit: Duration::from_secs(1), ..Default::default() };
        let t = core::cell::Cell::new(0u64);
        let ticking = || {
            t.set(t.get() + 2);
            Duration::from_secs(t.get())
        };
        let r = saturate(&mut g, &default_ruleset(), &limits, &ticking);
        assert_eq!(r.stop_reason, StopReason::Time);
        assert_eq!(r.iterations, 0);
    }
}
