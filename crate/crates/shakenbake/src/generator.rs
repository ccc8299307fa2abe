//! Shift-reduce bag generation, naive and memoized.
//!
//! Generation searches depth-first over states `(stack, remaining bag)`:
//!
//! 1. **Yield** — bag empty, stack a single sign unifying with the goal:
//!    emit the sign's phon as a sentence, then keep searching.
//! 2. **Reduce** — fix the stack top as the head candidate `First`, choose
//!    `i − 1` further signs from the rest of the stack (every subset, for
//!    `i = 1 ..= min(max_branching, |stack|)`), and ask the unordered-rule
//!    operation for every mother the grammar licenses over that daughter
//!    *set*. Each mother becomes the new stack top.
//! 3. **Shift** — move the next bag sign onto the stack.
//!
//! Reductions are tried before the shift, and subsets in lexicographic
//! position order, so the enumeration order is fixed and reproducible.
//!
//! The unordered-rule operation tries all daughter permutations against all
//! rules of matching arity. Its memoized variant keys the *set* of daughter
//! tags — small integers unique per sign token — either as the integer
//! `Σ 2^(tag−1)` or as the sorted tag list, and stores the complete outcome
//! (every mother, or an explicit failure) so any later call on the same set,
//! in any order, from any derivation path, replays the stored result.
//!
//! Signs entering the generator are frozen: every attempt works on fresh
//! copies, so a tag always denotes the same unmutated sign — the soundness
//! precondition for tag-set keys. Termination is the grammar's business:
//! a unary rule whose mother matches its own daughter pattern would recurse
//! forever (the fixture grammars' unary rules all flip `lex: plus` to
//! `minus`, so they cannot).

use crate::avm::{NodeId, Store, Template};
use crate::grammar::{quick_reject, Grammar};
use crate::parser::SignBag;
use num_bigint::BigUint;
use std::collections::HashMap;
use std::ops::ControlFlow;

/// A sign's tag: a positive integer unique within a generation session.
pub type Tag = u32;

/// A sign paired with its session-unique tag (token identity: two bag signs
/// for the same word carry different tags).
#[derive(Debug, Clone)]
pub struct TaggedSign {
    pub tag: Tag,
    pub sign: Template,
}

/// Tag a bag's signs 1..N in bag order.
pub fn tag_bag(bag: &SignBag) -> Vec<TaggedSign> {
    bag.signs
        .iter()
        .enumerate()
        .map(|(i, sign)| TaggedSign { tag: i as Tag + 1, sign: sign.clone() })
        .collect()
}

/// The set-to-integer key: `Σ 2^(tag−1)` over the tags. Order-independent,
/// injective on sets, `0` for the empty sequence. Arbitrary precision, so
/// there is no cap on session size.
pub fn calc_index(tags: &[Tag]) -> BigUint {
    let mut value = BigUint::ZERO;
    for &t in tags {
        assert!(t > 0, "tags are positive");
        value |= BigUint::from(1u8) << (t - 1);
    }
    value
}

/// How the memo table keys a daughter tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    /// The Eq.-2 style integer `Σ 2^(tag−1)`.
    IntegerIndex,
    /// The sorted tag list itself.
    TagList,
}

/// Generation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Naive,
    Memo(KeyMode),
}

/// A memo-table key. Two tag sets produce equal keys iff the sets are equal,
/// in both modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MemoKey {
    Index(BigUint),
    Tags(Vec<Tag>),
}

impl MemoKey {
    /// Canonical key for a tag multiset under the given mode.
    pub fn for_tags(mode: KeyMode, tags: &[Tag]) -> MemoKey {
        let mut sorted = tags.to_vec();
        sorted.sort_unstable();
        match mode {
            KeyMode::IntegerIndex => MemoKey::Index(calc_index(&sorted)),
            KeyMode::TagList => MemoKey::Tags(sorted),
        }
    }
}

#[derive(Debug, Clone)]
struct StoredMother {
    tag: Tag,
    sign: Template,
}

#[derive(Debug, Clone)]
enum Outcome {
    Failed,
    Mothers(Vec<StoredMother>),
}

#[derive(Debug, Clone)]
struct MemoEntry {
    epoch: u32,
    outcome: Outcome,
}

/// The memo table: tag-set key → complete stored outcome, plus counters.
/// Entries are immutable once written. The `epoch` is bumped between bags in
/// shared-memo mode so hits on entries written during an earlier bag can be
/// told apart (they prove cross-bag reuse).
#[derive(Debug, Clone, Default)]
pub struct MemoTable {
    entries: HashMap<MemoKey, MemoEntry>,
    hits: u64,
    misses: u64,
    cross_epoch_hits: u64,
    epoch: u32,
}

impl MemoTable {
    pub fn new() -> MemoTable {
        MemoTable::default()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Number of stored outcomes.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Hits on entries stored during an earlier epoch (i.e. an earlier bag
    /// in shared-memo mode).
    pub fn cross_epoch_hits(&self) -> u64 {
        self.cross_epoch_hits
    }

    /// Start a new epoch; call between bags when sharing the table.
    pub fn next_epoch(&mut self) {
        self.epoch += 1;
    }
}

/// Hit/miss counters in report form.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MemoStats {
    pub hits: u64,
    pub misses: u64,
    pub calls: u64,
    pub hit_ratio: f64,
}

/// `calls = hits + misses`; `hit_ratio = hits / calls` (0 when idle).
pub fn memo_stats(memo: &MemoTable) -> MemoStats {
    let calls = memo.hits + memo.misses;
    let hit_ratio = if calls == 0 { 0.0 } else { memo.hits as f64 / calls as f64 };
    MemoStats { hits: memo.hits, misses: memo.misses, calls, hit_ratio }
}

/// Enumerate all `C(|items|, k)` ways to select `k` items, as
/// `(chosen, rest)` pairs. Position subsets come in lexicographic order and
/// `rest` preserves relative order.
pub fn difference_select<T: Clone>(items: &[T], k: usize) -> Vec<(Vec<T>, Vec<T>)> {
    let mut out = Vec::new();
    for subset in position_subsets(items.len(), k) {
        let chosen: Vec<T> = subset.iter().map(|&i| items[i].clone()).collect();
        let rest: Vec<T> = (0..items.len())
            .filter(|i| !subset.contains(i))
            .map(|i| items[i].clone())
            .collect();
        out.push((chosen, rest));
    }
    out
}

/// All k-subsets of 0..n in lexicographic order.
fn position_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let needed = k - cur.len();
        for i in from..=n.saturating_sub(needed) {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// All permutations of 0..n in lexicographic order.
fn index_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out
}

/// One generated result: the sentence (the root's phon) and the root sign.
#[derive(Debug, Clone)]
pub struct GenOutcome {
    pub sentence: Vec<String>,
    pub root: Template,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("cannot generate from an empty bag")]
    EmptyBag,
    #[error("bad sign tag: {0}")]
    BadTag(String),
}

/// In-session handle on a tagged sign: the tag plus its frozen node.
#[derive(Clone, Copy)]
struct Ts {
    tag: Tag,
    node: NodeId,
}

/// A generation session: grammar + store + mode + memo table + counters.
/// One session is strictly sequential and owns its memo table; shared-memo
/// mode runs several bags through one session, calling
/// [`Generator::next_epoch`] between them.
pub struct Generator<'g> {
    grammar: &'g Grammar,
    mode: Mode,
    store: Store,
    memo: MemoTable,
    next_tag: Tag,
    rule_calls: u64,
    audit_hits: bool,
    audit_errors: Vec<String>,
}

impl<'g> Generator<'g> {
    pub fn new(grammar: &'g Grammar, mode: Mode) -> Generator<'g> {
        Generator {
            grammar,
            mode,
            store: Store::new(),
            memo: MemoTable::new(),
            next_tag: 1,
            rule_calls: 0,
            audit_hits: false,
            audit_errors: Vec::new(),
        }
    }

    /// When set, every memo hit re-runs the naive search on the same
    /// daughters and records a diagnostic if the stored outcome is not an
    /// alphabetic variant of the recomputation (canonical renderings
    /// compared). Counters are unaffected. Expensive; for verification.
    pub fn set_audit_hits(&mut self, on: bool) {
        self.audit_hits = on;
    }

    /// Diagnostics collected by the hit audit (empty = every hit pure).
    pub fn audit_errors(&self) -> &[String] {
        &self.audit_errors
    }

    pub fn memo(&self) -> &MemoTable {
        &self.memo
    }

    /// Unordered-rule invocations made so far, across all modes.
    pub fn rule_calls(&self) -> u64 {
        self.rule_calls
    }

    /// Start a new memo epoch (between bags in shared-memo mode).
    pub fn next_epoch(&mut self) {
        self.memo.next_epoch();
    }

    /// Generate from a tagged bag. Yields every derivation's sentence in
    /// the fixed search order, stopping after `max_results` if given (the
    /// first result never requires exhausting the search). The bag's tags
    /// must be positive and pairwise distinct; the session's tag counter
    /// starts above them, so mothers never collide with bag tags.
    pub fn generate(
        &mut self,
        bag: &[TaggedSign],
        goal: &Template,
        max_results: Option<usize>,
    ) -> Result<Vec<GenOutcome>, GenError> {
        if bag.is_empty() {
            return Err(GenError::EmptyBag);
        }
        let mut seen = bag.iter().map(|b| b.tag).collect::<Vec<_>>();
        seen.sort_unstable();
        if seen[0] == 0 {
            return Err(GenError::BadTag("tag 0 (tags are positive)".into()));
        }
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(GenError::BadTag("duplicate tag in bag".into()));
        }
        self.next_tag = self.next_tag.max(seen[seen.len() - 1] + 1);

        // The whole run is bracketed: sentences and memo entries leave as
        // store-independent templates, so the arena is reclaimed afterwards.
        let run_mark = self.store.mark();
        let templates: Vec<Template> = bag.iter().map(|b| b.sign.clone()).collect();
        let mut vars = HashMap::new();
        let nodes = self.store.instantiate_many(&templates, &mut vars);
        let tagged: Vec<Ts> =
            bag.iter().zip(&nodes).map(|(b, &node)| Ts { tag: b.tag, node }).collect();

        let mut outcomes = Vec::new();
        let mut sink = |o: GenOutcome| {
            outcomes.push(o);
            match max_results {
                Some(cap) if outcomes.len() >= cap => ControlFlow::Break(()),
                _ => ControlFlow::Continue(()),
            }
        };
        let _ = self.dfs(&[], &tagged, 0, goal, &mut sink);
        self.store.undo_to(run_mark);
        Ok(outcomes)
    }

    /// One DFS state. `stack[0]` is the top; `bag[pos..]` remains to shift.
    fn dfs(
        &mut self,
        stack: &[Ts],
        bag: &[Ts],
        pos: usize,
        goal: &Template,
        sink: &mut dyn FnMut(GenOutcome) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        // Yield clause: bag consumed, single stack sign, goal satisfied.
        if pos == bag.len() && stack.len() == 1 {
            let mark = self.store.mark();
            let goal_node = self.store.instantiate_fresh(goal);
            let flow = if self.store.unify(goal_node, stack[0].node) {
                let root = self.store.snapshot(stack[0].node);
                let sentence = phon_tokens(&root);
                sink(GenOutcome { sentence, root })
            } else {
                ControlFlow::Continue(())
            };
            self.store.undo_to(mark);
            flow?;
        }

        // Reduce clause: top + every (i−1)-subset of the rest, i ascending.
        let top_arity = self.grammar.max_branching.min(stack.len());
        for i in 1..=top_arity {
            for (others, rest) in difference_select(&stack[1..], i - 1) {
                let mut daughters = Vec::with_capacity(i);
                daughters.push(stack[0]);
                daughters.extend(others);
                self.rule_calls += 1;
                for (sign, tag) in self.unordered_rule(&daughters) {
                    let mark = self.store.mark();
                    let node = self.store.instantiate_fresh(&sign);
                    let mut new_stack = Vec::with_capacity(rest.len() + 1);
                    new_stack.push(Ts { tag, node });
                    new_stack.extend_from_slice(&rest);
                    let flow = self.dfs(&new_stack, bag, pos, goal, sink);
                    self.store.undo_to(mark);
                    flow?;
                }
            }
        }

        // Shift clause.
        if pos < bag.len() {
            let mut new_stack = Vec::with_capacity(stack.len() + 1);
            new_stack.push(bag[pos]);
            new_stack.extend_from_slice(stack);
            self.dfs(&new_stack, bag, pos + 1, goal, sink)?;
        }
        ControlFlow::Continue(())
    }

    /// Per-mode unordered-rule dispatch. Every mother comes back with its
    /// tag: fresh in naive mode, stored-or-fresh in memo mode.
    fn unordered_rule(&mut self, daughters: &[Ts]) -> Vec<(Template, Tag)> {
        match self.mode {
            Mode::Naive => naive_core(&mut self.store, self.grammar, daughters)
                .into_iter()
                .map(|sign| {
                    let tag = self.next_tag;
                    self.next_tag += 1;
                    (sign, tag)
                })
                .collect(),
            Mode::Memo(key_mode) => memo_core(
                &mut self.store,
                self.grammar,
                &mut self.memo,
                key_mode,
                daughters,
                &mut self.next_tag,
                self.audit_hits.then_some(&mut self.audit_errors),
            ),
        }
    }
}

/// The naive unordered-rule search over an explicit daughter set. Daughters
/// are canonicalized by ascending tag, then every rule of matching arity is
/// tried against every permutation (rules in grammar order, permutations
/// lexicographic). Attempts run on jointly fresh copies and are fully
/// undone, so the store comes back unchanged and an enumeration for a given
/// tag set is identical at every call site — which is what lets the memo
/// replay outcomes.
fn naive_core(store: &mut Store, grammar: &Grammar, daughters: &[Ts]) -> Vec<Template> {
    let mut sorted = daughters.to_vec();
    sorted.sort_by_key(|d| d.tag);
    let nodes: Vec<NodeId> = sorted.iter().map(|d| d.node).collect();

    let mut mothers = Vec::new();
    for rule in &grammar.rules {
        if rule.daughters.len() != nodes.len() {
            continue;
        }
        for perm in index_permutations(nodes.len()) {
            let ordered: Vec<NodeId> = perm.iter().map(|&i| nodes[i]).collect();
            if quick_reject(store, rule, &ordered) {
                continue;
            }
            let mark = store.mark();
            let copies = store.fresh_variant_many(&ordered);
            if let Some(mother) = grammar.apply_rule_ordered(store, rule, &copies) {
                mothers.push(store.snapshot(mother));
            }
            store.undo_to(mark);
        }
    }
    mothers
}

/// The memoized unordered-rule operation. Key: the daughter tag *set*. Hit:
/// replay the stored outcome (fresh variants, stored tags). Miss: run the
/// naive search to exhaustion, tag each mother, store the complete outcome
/// (or an explicit failure), then yield from it.
fn memo_core(
    store: &mut Store,
    grammar: &Grammar,
    memo: &mut MemoTable,
    key_mode: KeyMode,
    daughters: &[Ts],
    next_tag: &mut Tag,
    audit: Option<&mut Vec<String>>,
) -> Vec<(Template, Tag)> {
    let tags: Vec<Tag> = daughters.iter().map(|d| d.tag).collect();
    let key = MemoKey::for_tags(key_mode, &tags);

    if let Some(entry) = memo.entries.get(&key) {
        memo.hits += 1;
        if entry.epoch != memo.epoch {
            memo.cross_epoch_hits += 1;
        }
        let replayed: Vec<(Template, Tag)> = match &entry.outcome {
            Outcome::Failed => Vec::new(),
            Outcome::Mothers(ms) => ms.iter().map(|m| (m.sign.clone(), m.tag)).collect(),
        };
        if let Some(errors) = audit {
            let recomputed: Vec<String> =
                naive_core(store, grammar, daughters).iter().map(Template::render).collect();
            let stored: Vec<String> = replayed.iter().map(|(s, _)| s.render()).collect();
            if stored != recomputed {
                errors.push(format!(
                    "memo hit on tags {tags:?} diverges: stored {stored:?} vs recomputed {recomputed:?}"
                ));
            }
        }
        return replayed;
    }

    memo.misses += 1;
    let stored: Vec<StoredMother> = naive_core(store, grammar, daughters)
        .into_iter()
        .map(|sign| {
            let tag = *next_tag;
            *next_tag += 1;
            StoredMother { tag, sign }
        })
        .collect();
    let replayed: Vec<(Template, Tag)> =
        stored.iter().map(|m| (m.sign.clone(), m.tag)).collect();
    let outcome = if stored.is_empty() { Outcome::Failed } else { Outcome::Mothers(stored) };
    memo.entries.insert(key, MemoEntry { epoch: memo.epoch, outcome });
    replayed
}

/// Naive unordered-rule application on portable signs: every mother the
/// grammar licenses over the daughter set, in canonical order.
pub fn unordered_rule_naive(
    store: &mut Store,
    grammar: &Grammar,
    daughters: &[TaggedSign],
) -> Vec<Template> {
    let ts = intern(store, daughters);
    let out = naive_core(store, grammar, &ts);
    out
}

/// Memoized unordered-rule application on portable signs. `next_tag` is the
/// session's tag allocator and must exceed every tag in use.
pub fn unordered_rule_memo(
    store: &mut Store,
    grammar: &Grammar,
    memo: &mut MemoTable,
    key_mode: KeyMode,
    daughters: &[TaggedSign],
    next_tag: &mut Tag,
) -> Vec<(Template, Tag)> {
    let ts = intern(store, daughters);
    memo_core(store, grammar, memo, key_mode, &ts, next_tag, None)
}

fn intern(store: &mut Store, daughters: &[TaggedSign]) -> Vec<Ts> {
    let templates: Vec<Template> = daughters.iter().map(|d| d.sign.clone()).collect();
    let mut vars = HashMap::new();
    let nodes = store.instantiate_many(&templates, &mut vars);
    daughters.iter().zip(nodes).map(|(d, node)| Ts { tag: d.tag, node }).collect()
}

/// Run only the reduction phase of one generation state (stack as given, no
/// recursion, no shift) to exhaustion and return the number of
/// unordered-rule invocations made: `Σ_{i=1..min(n,s)} C(s−1, i−1)` attempts
/// are dispatched whether or not any rule matches. This is the measurable
/// quantity behind the benchmark's predicted-calls formula.
pub fn probe_reduction_calls(grammar: &Grammar, stack: &[TaggedSign], mode: Mode) -> u64 {
    let mut store = Store::new();
    let mut memo = MemoTable::new();
    let ts = intern(&mut store, stack);
    let mut next_tag: Tag = stack.iter().map(|s| s.tag).max().unwrap_or(0) + 1;
    let mut calls = 0u64;
    if ts.is_empty() {
        return 0;
    }
    for i in 1..=grammar.max_branching.min(ts.len()) {
        for (others, _rest) in difference_select(&ts[1..], i - 1) {
            let mut daughters = Vec::with_capacity(i);
            daughters.push(ts[0]);
            daughters.extend(others);
            calls += 1;
            match mode {
                Mode::Naive => {
                    naive_core(&mut store, grammar, &daughters);
                }
                Mode::Memo(km) => {
                    memo_core(&mut store, grammar, &mut memo, km, &daughters, &mut next_tag, None);
                }
            }
        }
    }
    calls
}

/// A one-shot generation run and its counters.
#[derive(Debug, Clone)]
pub struct GenRun {
    pub outcomes: Vec<GenOutcome>,
    pub stats: MemoStats,
    pub rule_calls: u64,
}

/// Generate from a bag: tag it 1..N, run a fresh session, return outcomes
/// plus counters. `max_results` caps enumeration (`Some(1)` = first only).
pub fn shake_generate(
    grammar: &Grammar,
    bag: &SignBag,
    goal: &Template,
    mode: Mode,
    max_results: Option<usize>,
) -> Result<GenRun, GenError> {
    let mut session = Generator::new(grammar, mode);
    let tagged = tag_bag(bag);
    let outcomes = session.generate(&tagged, goal, max_results)?;
    Ok(GenRun {
        outcomes,
        stats: memo_stats(session.memo()),
        rule_calls: session.rule_calls(),
    })
}

/// The token sequence of a sign: its phon list's atoms.
fn phon_tokens(root: &Template) -> Vec<String> {
    match root.get(&["phon"]) {
        Some(Template::List(items)) => items
            .iter()
            .map(|t| match t {
                Template::Atom(s) => s.as_str().to_owned(),
                other => other.render(),
            })
            .collect(),
        _ => Vec::new(),
    }
}
