//! Bottom-up chart parser. Analyses a token sequence with a unilingual
//! grammar and lexicon and returns, per complete parse, the bag of
//! *instantiated* leaf signs: fresh copies of the lexical entries enriched
//! with every binding the derivation established (mutual agreement,
//! determiner indices, verb argument indices, ...).
//!
//! After a parse completes, every variable still unbound in the derivation is
//! grounded to a fresh atom (`i1`, `i2`, ...). The parse established which
//! positions co-vary by unifying them; grounding freezes those equalities as
//! atom equality, so downstream transfer and generation cannot accidentally
//! merge two indices the parse kept distinct.

use crate::avm::{NodeId, Store, Template};
use crate::grammar::{quick_reject, Grammar, Lexicon};
use std::collections::{HashMap, HashSet};

/// One complete analysis: the derivation and the bag of its leaves.
#[derive(Debug, Clone)]
pub struct Parse {
    pub derivation: Derivation,
    pub bag: SignBag,
}

/// The sentence sign plus the instantiated lexical signs, left to right.
/// Snapshotted from one shared namespace, so structure sharing between the
/// root and the leaves is visible in the templates.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub root: Template,
    pub leaves: Vec<Template>,
}

/// A multiset of signs — the currency the pipeline stages trade in.
#[derive(Debug, Clone)]
pub struct SignBag {
    pub signs: Vec<Template>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("unknown word: {0}")]
    UnknownWord(String),
    #[error("empty input")]
    EmptyInput,
    #[error("unary rule closure did not converge within {0} passes")]
    UnaryDivergence(usize),
}

/// Whitespace tokenization, lowercase-normalized.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(|t| t.to_lowercase()).collect()
}

const UNARY_PASS_CAP: usize = 64;

#[derive(Clone)]
enum Prod {
    Lex { entry: usize },
    Apply { rule: usize, daughters: Vec<usize> },
}

struct Edge {
    node: NodeId,
    prod: Prod,
}

/// Parse `tokens` and return all complete parses (empty vector for a
/// grammatical dead end), each with the bag of its instantiated leaves.
/// Enumeration order is deterministic: chart completion order, leftmost
/// constituents first.
pub fn parse_to_bag(
    grammar: &Grammar,
    lexicon: &Lexicon,
    goal: &Template,
    tokens: &[String],
) -> Result<Vec<Parse>, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    for t in tokens {
        if !lexicon.contains(t) {
            return Err(ParseError::UnknownWord(t.clone()));
        }
    }

    let n = tokens.len();
    let mut store = Store::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut spans: HashMap<(usize, usize), Vec<usize>> = HashMap::new();

    let unary_rules: Vec<usize> = (0..grammar.rules.len())
        .filter(|&r| grammar.rules[r].daughters.len() == 1)
        .collect();

    let try_apply = |store: &mut Store,
                         edges: &mut Vec<Edge>,
                         spans: &mut HashMap<(usize, usize), Vec<usize>>,
                         rule_idx: usize,
                         daughters: &[usize],
                         span: (usize, usize)|
     -> bool {
        let rule = &grammar.rules[rule_idx];
        let nodes: Vec<NodeId> = daughters.iter().map(|&e| edges[e].node).collect();
        if quick_reject(store, rule, &nodes) {
            return false;
        }
        let mark = store.mark();
        // Copy the daughters jointly so the application cannot bind anything
        // inside existing edges; failed attempts are reclaimed wholesale.
        let copies = store.fresh_variant_many(&nodes);
        match grammar.apply_rule_ordered(store, rule, &copies) {
            Some(mother) => {
                let idx = edges.len();
                edges.push(Edge {
                    node: mother,
                    prod: Prod::Apply { rule: rule_idx, daughters: daughters.to_vec() },
                });
                spans.entry(span).or_default().push(idx);
                true
            }
            None => {
                store.undo_to(mark);
                false
            }
        }
    };

    for width in 1..=n {
        for from in 0..=(n - width) {
            let to = from + width;

            if width == 1 {
                for &entry in lexicon.entry_indices(&tokens[from]) {
                    let node = store.instantiate_fresh(&lexicon.entries()[entry].sign);
                    let idx = edges.len();
                    edges.push(Edge { node, prod: Prod::Lex { entry } });
                    spans.entry((from, to)).or_default().push(idx);
                }
            } else {
                for (rule_idx, rule) in grammar.rules.iter().enumerate() {
                    match rule.daughters.len() {
                        2 => {
                            for mid in from + 1..to {
                                let left = spans.get(&(from, mid)).cloned().unwrap_or_default();
                                let right = spans.get(&(mid, to)).cloned().unwrap_or_default();
                                for &a in &left {
                                    for &b in &right {
                                        try_apply(
                                            &mut store, &mut edges, &mut spans,
                                            rule_idx, &[a, b], (from, to),
                                        );
                                    }
                                }
                            }
                        }
                        3 => {
                            for m1 in from + 1..to.saturating_sub(1) {
                                for m2 in m1 + 1..to {
                                    let d1 = spans.get(&(from, m1)).cloned().unwrap_or_default();
                                    let d2 = spans.get(&(m1, m2)).cloned().unwrap_or_default();
                                    let d3 = spans.get(&(m2, to)).cloned().unwrap_or_default();
                                    for &a in &d1 {
                                        for &b in &d2 {
                                            for &c in &d3 {
                                                try_apply(
                                                    &mut store, &mut edges, &mut spans,
                                                    rule_idx, &[a, b, c], (from, to),
                                                );
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }

            // Unary closure over this span: keep applying unary rules to new
            // edges (each rule at most once per edge) until nothing changes.
            let mut attempted: HashSet<(usize, usize)> = HashSet::new();
            let mut passes = 0;
            loop {
                let snapshot = spans.get(&(from, to)).cloned().unwrap_or_default();
                let mut grew = false;
                for &edge in &snapshot {
                    for &rule_idx in &unary_rules {
                        if !attempted.insert((rule_idx, edge)) {
                            continue;
                        }
                        grew |= try_apply(
                            &mut store, &mut edges, &mut spans,
                            rule_idx, &[edge], (from, to),
                        );
                    }
                }
                if !grew {
                    break;
                }
                passes += 1;
                if passes > UNARY_PASS_CAP {
                    return Err(ParseError::UnaryDivergence(UNARY_PASS_CAP));
                }
            }
        }
    }

    // Complete parses: spanning edges whose sign unifies with the goal. The
    // check is bracketed so the chart stays pristine for later roots.
    let mut parses = Vec::new();
    for &edge in spans.get(&(0, n)).map(Vec::as_slice).unwrap_or(&[]) {
        let mark = store.mark();
        let goal_node = store.instantiate_fresh(goal);
        let is_root = store.unify(goal_node, edges[edge].node);
        store.undo_to(mark);
        if is_root {
            parses.push(extract(grammar, lexicon, &edges, edge));
        }
    }
    Ok(parses)
}

/// Rebuild one derivation in a private store by replaying its rule
/// applications, then ground residual variables and snapshot.
fn extract(grammar: &Grammar, lexicon: &Lexicon, edges: &[Edge], root: usize) -> Parse {
    let mut out = Store::new();
    let mut leaves = Vec::new();
    let root_node = replay(grammar, lexicon, edges, root, &mut out, &mut leaves);

    let mut counter = 0;
    let mut visited = HashSet::new();
    for node in std::iter::once(root_node).chain(leaves.iter().copied()) {
        ground(&mut out, node, &mut counter, &mut visited);
    }

    let mut all = vec![root_node];
    all.extend(&leaves);
    let mut templates = out.snapshot_many(&all);
    let root_t = templates.remove(0);
    Parse {
        derivation: Derivation { root: root_t, leaves: templates.clone() },
        bag: SignBag { signs: templates },
    }
}

fn replay(
    grammar: &Grammar,
    lexicon: &Lexicon,
    edges: &[Edge],
    edge: usize,
    out: &mut Store,
    leaves: &mut Vec<NodeId>,
) -> NodeId {
    match &edges[edge].prod {
        Prod::Lex { entry } => {
            let node = out.instantiate_fresh(&lexicon.entries()[*entry].sign);
            leaves.push(node);
            node
        }
        Prod::Apply { rule, daughters } => {
            let nodes: Vec<NodeId> = daughters
                .iter()
                .map(|&d| replay(grammar, lexicon, edges, d, out, leaves))
                .collect();
            grammar
                .apply_rule_ordered(out, &grammar.rules[*rule], &nodes)
                .expect("replaying a derivation the chart already accepted")
        }
    }
}

/// Bind every unbound variable reachable from `id` to a fresh atom `iK`,
/// numbering in canonical traversal order (sorted features).
fn ground(store: &mut Store, id: NodeId, counter: &mut usize, visited: &mut HashSet<NodeId>) {
    let d = store.deref(id);
    if !visited.insert(d) {
        return;
    }
    if store.is_var(d) {
        *counter += 1;
        let atom = store.atom_str(&format!("i{counter}"));
        let bound = store.unify(d, atom);
        debug_assert!(bound);
        return;
    }
    if let Some(items) = store.as_list(d) {
        for item in items {
            ground(store, item, counter, visited);
        }
    } else if let Some(mut entries) = store.record_features(d) {
        entries.sort_by_key(|(f, _)| f.as_str());
        for (_, value) in entries {
            ground(store, value, counter, visited);
        }
    }
}
