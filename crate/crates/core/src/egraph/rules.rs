use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use super::pattern::{Pattern, MAX_PATTERN_VARS};
use crate::eqn::parse_eqn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule {rule}: cannot parse `{text}`")]
    Syntax { rule: String, text: String },
    #[error("rule {rule}: right-hand side uses a variable the left-hand side does not bind")]
    UnboundVariable { rule: String },
}

/// A named rewrite `lhs => rhs`, or `lhs <=> rhs` when bidirectional.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub bidirectional: bool,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = if self.bidirectional { "<=>" } else { "=>" };
        write!(f, "{}: {} {arrow} {}", self.name, self.lhs, self.rhs)
    }
}

fn parse_pattern(rule: &str, text: &str) -> Result<Pattern, RuleError> {
    let err = || RuleError::Syntax { rule: rule.into(), text: text.into() };
    let circuit = parse_eqn(&format!("INORDER = a b c d; OUTORDER = p; p = {text};")).map_err(|_| err())?;
    Pattern::from_term(&circuit.store, circuit.outputs()[0].1).ok_or_else(err)
}

impl RewriteRule {
    /// Builds a rule from two expressions in equation syntax over the
    /// variables `a`..`d`, e.g. `RewriteRule::parse("and-one", "a * 1", "a", false)`.
    pub fn parse(name: &str, lhs: &str, rhs: &str, bidirectional: bool) -> Result<Self, RuleError> {
        let lhs = parse_pattern(name, lhs)?;
        let rhs = parse_pattern(name, rhs)?;
        let (lv, rv) = (lhs.vars(), rhs.vars());
        let covered = |outer: &[_], inner: &[_]| inner.iter().all(|v| outer.contains(v));
        if !covered(&lv, &rv) || (bidirectional && !covered(&rv, &lv)) {
            return Err(RuleError::UnboundVariable { rule: name.into() });
        }
        Ok(RewriteRule { name: name.into(), lhs, rhs, bidirectional })
    }

    /// The directed rewrites this rule contributes to saturation.
    pub fn directions(&self) -> impl Iterator<Item = (&Pattern, &Pattern)> {
        let back = self.bidirectional.then_some((&self.rhs, &self.lhs));
        core::iter::once((&self.lhs, &self.rhs)).chain(back)
    }

    /// Exhaustively compares both sides over every assignment of their
    /// variables.
    pub fn is_sound(&self) -> bool {
        (0..1u32 << MAX_PATTERN_VARS).all(|row| {
            let env = core::array::from_fn(|i| row >> i & 1 == 1);
            self.lhs.eval(&env) == self.rhs.eval(&env)
        })
    }
}

const TABLE: &[(&str, &str, &str, bool)] = &[
    ("and-one", "a * 1", "a", false),
    ("and-zero", "a * 0", "0", false),
    ("or-one", "a + 1", "1", false),
    ("and-complement", "!a * a", "0", false),
    ("or-complement", "!a + a", "1", false),
    ("and-covering", "a * (a + b)", "a", false),
    ("or-covering", "a + a * b", "a", false),
    ("or-combining", "a * b + a * !b", "a", false),
    ("and-combining", "(a + b) * (a + !b)", "a", false),
    ("and-idempotent", "a * a", "a", false),
    ("or-idempotent", "a + a", "a", false),
    ("and-commute", "a * b", "b * a", true),
    ("or-commute", "a + b", "b + a", true),
    ("and-assoc", "(a * b) * c", "a * (b * c)", true),
    ("or-assoc", "(a + b) + c", "a + (b + c)", true),
    ("and-distribute", "a * (b + c)", "a * b + a * c", false),
    ("or-distribute", "(a + b) * (a + c)", "a + b * c", false),
    ("and-factor", "a * b + a * c", "a * (b + c)", false),
    ("or-consensus", "a * b + !a * c + b * c", "a * b + !a * c", false),
    ("and-consensus", "(a + b) * (!a + c) * (b + c)", "(a + b) * (!a + c)", false),
    ("demorgan-and", "!(a * b)", "!a + !b", false),
    ("demorgan-or", "!(a + b)", "!a * !b", false),
];

/// The Boolean algebra rule table: complements, covering, combining,
/// idempotency, commutativity, associativity, distributivity, consensus and
/// De Morgan, 22 rules.
pub fn table_rules() -> Vec<RewriteRule> {
    ruleset(false)
}

/// [`table_rules`] plus double negation (`!!a => a`).
pub fn default_ruleset() -> Vec<RewriteRule> {
    ruleset(true)
}

pub fn ruleset(double_negation: bool) -> Vec<RewriteRule> {
    let extra = double_negation.then_some(("double-negation", "!!a", "a", false));
    TABLE
        .iter()
        .copied()
        .chain(extra)
        .map(|(name, l, r, bi)| RewriteRule::parse(name, l, r, bi).expect("built-in rules parse"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Op;

    // Independent evaluator over the pattern tree.
    fn truth(p: &Pattern, env: u32) -> bool {
        match p {
            Pattern::Var(v) => env >> v.0 & 1 == 1,
            Pattern::Node(Op::Const(b), _) => *b,
            Pattern::Node(Op::Not, k) => !truth(&k[0], env),
            Pattern::Node(Op::And, k) => truth(&k[0], env) && truth(&k[1], env),
            Pattern::Node(Op::Or, k) => truth(&k[0], env) || truth(&k[1], env),
            Pattern::Node(op, _) => panic!("unexpected {op}"),
        }
    }

    #[test]
    fn table_has_22_rules_with_table_directions() {
        let rules = table_rules();
        assert_eq!(rules.len(), 22);
        let bidi: Vec<_> = rules.iter().filter(|r| r.bidirectional).map(|r| r.name.as_str()).collect();
        assert_eq!(bidi, ["and-commute", "or-commute", "and-assoc", "or-assoc"]);
        assert_eq!(default_ruleset().len(), 23);
        assert_eq!(default_ruleset().last().unwrap().name, "double-negation");
    }

    #[test]
    fn every_rule_is_truth_table_sound() {
        for rule in default_ruleset() {
            let n = rule.lhs.vars().len().max(rule.rhs.vars().len());
            assert!(n <= 3, "{rule}");
            for env in 0..1u32 << 3 {
                assert_eq!(truth(&rule.lhs, env), truth(&rule.rhs, env), "{rule} row {env}");
            }
            assert!(rule.is_sound());
        }
    }

    #[test]
    fn and_one_is_directed() {
        let rules = table_rules();
        let r = rules.iter().find(|r| r.name == "and-one").unwrap();
        assert_eq!(r.to_string(), "and-one: (& a 1) => a");
        assert_eq!(r.directions().count(), 1);
        let c = rules.iter().find(|r| r.name == "and-commute").unwrap();
        assert_eq!(c.to_string(), "and-commute: (& a b) <=> (& b a)");
        assert_eq!(c.directions().count(), 2);
    }

    #[test]
    fn consensus_associates_left() {
        let rules = table_rules();
        let r = rules.iter().find(|r| r.name == "or-consensus").unwrap();
        assert_eq!(r.lhs.to_string(), "(| (| (& a b) (& (! a) c)) (& b c))");
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(matches!(RewriteRule::parse("x", "a", "a * b", false), Err(RuleError::UnboundVariable { .. })));
        assert!(matches!(RewriteRule::parse("x", "a * b", "a", true), Err(RuleError::UnboundVariable { .. })));
        assert!(matches!(RewriteRule::parse("x", "a *", "a", false), Err(RuleError::Syntax { .. })));
        assert!(matches!(RewriteRule::parse("x", "q", "q", false), Err(RuleError::Syntax { .. })));
        assert!(!RewriteRule::parse("bogus", "a * b", "a + b", true).unwrap().is_sound());
    }
}
