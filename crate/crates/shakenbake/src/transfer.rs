//! Bilingual lexicon and bag transfer.
//!
//! A bilingual entry links a set of source words to a set of target words
//! through constraint expressions over their signs — path equations such as
//! "my `sem.index` equals variable X". Transfer covers the source bag with
//! entries so every sign is used exactly once, and for each exact cover emits
//! a target bag of freshly instantiated target signs with the equations
//! applied, so the semantic indices the source parse established flow into
//! the target signs.
//!
//! Statement format (one per `.`-terminated statement, `%` comments):
//!
//! ```text
//! w1 [w2 ...] entry <cexpr> [& <cexpr>]* <==> v1 [v2 ...] entry <cexpr> [& <cexpr>]*.
//! ```
//!
//! Constraint expressions: `@semindex(X)` (the sign's `sem.index` equals X),
//! `@cont_args(Args)` (its `sem.args` equals Args), `@prep` (its `head.cat`
//! is `prep`). Variables are capitalized; a variable shared across `<==>`
//! threads a value from a matched source sign into the target signs. The
//! conjunction is applied to the side's first word; any further words are
//! translated without equations of their own.

use crate::avm::canon::{Cursor, SyntaxError};
use crate::avm::{NodeId, Store, Template};
use crate::grammar::{GrammarError, Lexicon};
use crate::parser::SignBag;
use std::collections::HashMap;

/// One constraint expression over a sign. The string is a variable name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintExpr {
    /// `@semindex(X)`: the sign's `sem.index` equals X.
    SemIndex(String),
    /// `@cont_args(Args)`: the sign's `sem.args` equals Args.
    ContArgs(String),
    /// `@prep`: the sign's `head.cat` is the atom `prep`.
    Prep,
}

impl ConstraintExpr {
    fn var(&self) -> Option<&str> {
        match self {
            ConstraintExpr::SemIndex(v) | ConstraintExpr::ContArgs(v) => Some(v),
            ConstraintExpr::Prep => None,
        }
    }
}

/// One word of an entry side, with the constraints applied to its sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideWord {
    pub word: String,
    pub constraints: Vec<ConstraintExpr>,
}

/// A compiled bilingual entry: source word set `<==>` target word set, linked
/// by the shared variables of their constraint expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilingualEntry {
    pub source: Vec<SideWord>,
    pub target: Vec<SideWord>,
    pub line: usize,
}

/// A compiled bilingual lexicon. Entries keep file order, which fixes the
/// enumeration order of covers.
#[derive(Debug, Clone)]
pub struct BilingualLexicon {
    label: String,
    entries: Vec<BilingualEntry>,
    warnings: Vec<String>,
}

impl BilingualLexicon {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entries(&self) -> &[BilingualEntry] {
        &self.entries
    }

    /// Compile-time diagnostics: target-side variables with no source-side
    /// occurrence (legal, but they stay unbound through transfer).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Compile a bilingual lexicon file. `file` labels error messages.
pub fn compile_bilingual(file: &str, text: &str) -> Result<BilingualLexicon, GrammarError> {
    let mut lex = BilingualLexicon {
        label: file.into(),
        entries: Vec::new(),
        warnings: Vec::new(),
    };
    for (line, stmt) in crate::grammar::statements(file, text)? {
        let mut cur = Cursor::new(&stmt);
        let entry = parse_entry(&mut cur, line)
            .map_err(|e| crate::grammar::located(file, line, &stmt, e))?;
        let source_vars: Vec<&str> =
            entry.source.iter().flat_map(|sw| &sw.constraints).filter_map(|c| c.var()).collect();
        for sw in &entry.target {
            for c in &sw.constraints {
                if let Some(v) = c.var() {
                    if !source_vars.contains(&v) {
                        lex.warnings.push(format!(
                            "{file}:{line}: target variable '{v}' is not linked to the source side"
                        ));
                    }
                }
            }
        }
        lex.entries.push(entry);
    }
    Ok(lex)
}

fn parse_entry(cur: &mut Cursor, line: usize) -> Result<BilingualEntry, SyntaxError> {
    let source = parse_side(cur)?;
    cur.skip_ws();
    for c in "<==>".chars() {
        cur.expect(c)?;
    }
    let target = parse_side(cur)?;
    if !cur.at_end() {
        return Err(cur.err("unexpected text after target side"));
    }
    Ok(BilingualEntry { source, target, line })
}

fn parse_side(cur: &mut Cursor) -> Result<Vec<SideWord>, SyntaxError> {
    let mut words: Vec<String> = Vec::new();
    loop {
        let w = cur.ident()?;
        if w == "entry" {
            break;
        }
        words.push(w);
    }
    if words.is_empty() {
        return Err(cur.err("expected at least one surface word before 'entry'"));
    }
    let mut constraints = vec![parse_cexpr(cur)?];
    while cur.eat('&') {
        constraints.push(parse_cexpr(cur)?);
    }
    let mut side: Vec<SideWord> =
        words.into_iter().map(|word| SideWord { word, constraints: Vec::new() }).collect();
    side[0].constraints = constraints;
    Ok(side)
}

fn parse_cexpr(cur: &mut Cursor) -> Result<ConstraintExpr, SyntaxError> {
    cur.expect('@')?;
    let name = cur.ident()?;
    let one_var = |cur: &mut Cursor| -> Result<String, SyntaxError> {
        cur.expect('(')?;
        let v = cur.var_name()?;
        cur.expect(')')?;
        Ok(v)
    };
    match name.as_str() {
        "semindex" => Ok(ConstraintExpr::SemIndex(one_var(cur)?)),
        "cont_args" => Ok(ConstraintExpr::ContArgs(one_var(cur)?)),
        "prep" => {
            if cur.eat('(') {
                return Err(cur.err("constraint '@prep' takes no arguments"));
            }
            Ok(ConstraintExpr::Prep)
        }
        other => Err(cur.err(format!("unknown constraint macro '@{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// Transfer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransferError {
    #[error("no bilingual entry covers '{0}'")]
    Uncovered(String),
    #[error("bilingual entry at line {line} targets '{word}', which is not in the target lexicon")]
    MissingTargetWord { word: String, line: usize },
}

/// One successful instantiation of an entry against concrete bag signs:
/// which source positions it consumed and the resulting target signs.
/// `signs` share one variable namespace (they were snapshotted jointly), so
/// structure sharing between an entry's target signs is preserved.
#[derive(Debug, Clone)]
pub struct Match {
    pub entry_idx: usize,
    pub line: usize,
    pub source_positions: Vec<usize>,
    pub source_words: Vec<String>,
    pub target_words: Vec<String>,
    pub signs: Vec<Template>,
}

/// All exact covers of a source bag. Each cover is a list of match indices;
/// [`TransferResult::bag`] turns one into a target-language [`SignBag`].
#[derive(Debug, Clone)]
pub struct TransferResult {
    matches: Vec<Match>,
    covers: Vec<Vec<usize>>,
    /// Global tag of a match's first sign minus one; sign `k` of match `m`
    /// carries tag `tag_base[m] + k + 1`. Tags are global per transfer
    /// result, so a sign token shared by two covers keeps its tag in both.
    tag_base: Vec<u32>,
    source_words: Vec<String>,
}

impl TransferResult {
    /// Number of target bags (exact covers).
    pub fn len(&self) -> usize {
        self.covers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covers.is_empty()
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    pub fn covers(&self) -> &[Vec<usize>] {
        &self.covers
    }

    pub fn source_words(&self) -> &[String] {
        &self.source_words
    }

    /// The `i`-th target bag. Matches keep cover order (anchored leftmost in
    /// the source bag); variables are renumbered into one bag-wide namespace.
    pub fn bag(&self, i: usize) -> SignBag {
        SignBag { signs: self.tagged_bag(i).into_iter().map(|(_, t)| t).collect() }
    }

    /// The `i`-th target bag with its global sign tags. A sign token common
    /// to several covers carries the same tag in each, which is what lets a
    /// memo table be shared soundly across the bags of one transfer result.
    pub fn tagged_bag(&self, i: usize) -> Vec<(u32, Template)> {
        let mut out = Vec::new();
        let mut offset = 0u32;
        for &mid in &self.covers[i] {
            let m = &self.matches[mid];
            for (k, t) in m.signs.iter().enumerate() {
                out.push((self.tag_base[mid] + k as u32 + 1, t.shift_vars(offset)));
            }
            offset += m.signs.iter().filter_map(Template::max_var).map(|v| v + 1).max().unwrap_or(0);
        }
        out
    }

    /// Largest tag any [`TransferResult::tagged_bag`] can carry.
    pub fn max_global_tag(&self) -> u32 {
        self.matches.len().checked_sub(1).map_or(0, |last| {
            self.tag_base[last] + self.matches[last].signs.len() as u32
        })
    }
}

/// Cover the source bag with bilingual entries and enumerate every exact
/// cover as a target bag. Deterministic: matches are discovered entries-in-
/// file-order and covers anchored at the leftmost uncovered source sign, so
/// covers come out in lexicographic order of entry choice.
pub fn transfer_bags(
    bilingual: &BilingualLexicon,
    source_bag: &SignBag,
    target_lexicon: &Lexicon,
) -> Result<TransferResult, TransferError> {
    for entry in bilingual.entries() {
        for sw in &entry.target {
            if !target_lexicon.contains(&sw.word) {
                return Err(TransferError::MissingTargetWord {
                    word: sw.word.clone(),
                    line: entry.line,
                });
            }
        }
    }

    let source_words: Vec<String> = source_bag.signs.iter().map(phon_word).collect();
    let mut store = Store::new();
    let bag_nodes: Vec<NodeId> =
        source_bag.signs.iter().map(|t| store.instantiate_fresh(t)).collect();

    // Every way any entry can match concrete bag positions, file order first.
    let mut matches: Vec<Match> = Vec::new();
    for (entry_idx, entry) in bilingual.entries().iter().enumerate() {
        for positions in assignments(&entry.source, &source_words) {
            try_match(
                &mut store, &bag_nodes, target_lexicon, entry, entry_idx, &positions,
                &mut matches,
            );
        }
    }

    for (p, w) in source_words.iter().enumerate() {
        if !matches.iter().any(|m| m.source_positions.contains(&p)) {
            return Err(TransferError::Uncovered(w.clone()));
        }
    }

    let mut covers = Vec::new();
    let mut covered = vec![false; source_words.len()];
    search_covers(&matches, &mut covered, &mut Vec::new(), &mut covers);

    let mut tag_base = Vec::with_capacity(matches.len());
    let mut total = 0u32;
    for m in &matches {
        tag_base.push(total);
        total += m.signs.len() as u32;
    }
    Ok(TransferResult { matches, covers, tag_base, source_words })
}

/// The surface word of a single-word sign (`phon: [w]`); anything else is
/// rendered verbatim, which can never equal a side word, so such signs only
/// show up in "uncovered" errors under a readable name.
fn phon_word(sign: &Template) -> String {
    if let Some(Template::List(items)) = sign.get(&["phon"]) {
        if let [Template::Atom(w)] = items.as_slice() {
            return w.as_str().to_owned();
        }
    }
    sign.get(&["phon"]).map_or_else(|| "<no phon>".into(), Template::render)
}

/// All ways to assign the side's words to distinct bag positions with the
/// right surface words. Positions of equal words are kept ascending so a set
/// of signs is matched once, not once per permutation. Lexicographic order.
fn assignments(side: &[SideWord], bag_words: &[String]) -> Vec<Vec<usize>> {
    fn rec(
        side: &[SideWord],
        bag_words: &[String],
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let k = chosen.len();
        if k == side.len() {
            out.push(chosen.clone());
            return;
        }
        let word = &side[k].word;
        let floor = side[..k]
            .iter()
            .zip(chosen.iter())
            .filter(|(sw, _)| sw.word == *word)
            .map(|(_, &p)| p + 1)
            .max()
            .unwrap_or(0);
        for p in floor..bag_words.len() {
            if bag_words[p] == *word && !chosen.contains(&p) {
                chosen.push(p);
                rec(side, bag_words, chosen, out);
                chosen.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(side, bag_words, &mut Vec::new(), &mut out);
    out
}

/// Attempt one entry against one position assignment; push a [`Match`] per
/// target-homograph combination that satisfies all equations. The store is
/// left exactly as found (everything is done under a mark and undone).
fn try_match(
    store: &mut Store,
    bag_nodes: &[NodeId],
    target_lexicon: &Lexicon,
    entry: &BilingualEntry,
    entry_idx: usize,
    positions: &[usize],
    matches: &mut Vec<Match>,
) {
    let mark = store.mark();

    // Allocate every variable of the entry up front, before any sub-mark, so
    // per-combination undos below cannot reclaim them.
    let mut vars: HashMap<&str, NodeId> = HashMap::new();
    for sw in entry.source.iter().chain(&entry.target) {
        for c in &sw.constraints {
            if let Some(v) = c.var() {
                vars.entry(v).or_insert_with(|| store.new_var());
            }
        }
    }

    let source_ok = entry
        .source
        .iter()
        .zip(positions)
        .all(|(sw, &p)| apply_constraints(store, bag_nodes[p], &sw.constraints, &vars));
    if source_ok {
        let choices: Vec<&[usize]> =
            entry.target.iter().map(|sw| target_lexicon.entry_indices(&sw.word)).collect();
        for combo in product(&choices) {
            let combo_mark = store.mark();
            let mut nodes = Vec::with_capacity(combo.len());
            let ok = entry.target.iter().zip(&combo).all(|(sw, &lex_idx)| {
                let node = store.instantiate_fresh(&target_lexicon.entries()[lex_idx].sign);
                nodes.push(node);
                apply_constraints(store, node, &sw.constraints, &vars)
            });
            if ok {
                matches.push(Match {
                    entry_idx,
                    line: entry.line,
                    source_positions: positions.to_vec(),
                    source_words: entry.source.iter().map(|sw| sw.word.clone()).collect(),
                    target_words: entry.target.iter().map(|sw| sw.word.clone()).collect(),
                    signs: store.snapshot_many(&nodes),
                });
            }
            store.undo_to(combo_mark);
        }
    }
    store.undo_to(mark);
}

/// Apply a conjunction of path equations to one sign. The path must already
/// exist in the sign — `@semindex` selects signs that *have* a `sem.index`,
/// it does not add one to a sign that lacks it (records being open, blind
/// unification would happily extend a verb's `sem` with an `index`).
fn apply_constraints(
    store: &mut Store,
    sign: NodeId,
    constraints: &[ConstraintExpr],
    vars: &HashMap<&str, NodeId>,
) -> bool {
    constraints.iter().all(|c| {
        let (path, rhs): (&[&str], NodeId) = match c {
            ConstraintExpr::SemIndex(v) => (&["sem", "index"], vars[v.as_str()]),
            ConstraintExpr::ContArgs(v) => (&["sem", "args"], vars[v.as_str()]),
            ConstraintExpr::Prep => {
                let prep = store.atom_str("prep");
                (&["head", "cat"], prep)
            }
        };
        match store.get_path_str(sign, path) {
            Some(node) => store.unify(node, rhs),
            None => false,
        }
    })
}

/// Lexicographic product of per-word target-entry choices.
fn product(choices: &[&[usize]]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &options in choices {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for &o in options {
                let mut row = prefix.clone();
                row.push(o);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// Exact-cover search (Algorithm X shape): anchor on the leftmost uncovered
/// position and try every still-applicable match that includes it, in match
/// order. Each partition of the bag is reached exactly once.
fn search_covers(
    matches: &[Match],
    covered: &mut [bool],
    chosen: &mut Vec<usize>,
    covers: &mut Vec<Vec<usize>>,
) {
    let Some(anchor) = covered.iter().position(|c| !c) else {
        covers.push(chosen.clone());
        return;
    };
    for (mid, m) in matches.iter().enumerate() {
        if m.source_positions.contains(&anchor)
            && m.source_positions.iter().all(|&p| !covered[p])
        {
            for &p in &m.source_positions {
                covered[p] = true;
            }
            chosen.push(mid);
            search_covers(matches, covered, chosen, covers);
            chosen.pop();
            for &p in &m.source_positions {
                covered[p] = false;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grammar::{compile_lexicon, compile_rules};
    use crate::parser::{parse_to_bag, tokenize};

    fn english() -> (crate::grammar::Grammar, Lexicon, Template) {
        let lex = compile_lexicon("english.lex", fixtures::ENGLISH_LEX).unwrap();
        let grammar = compile_rules("english.rules", fixtures::ENGLISH_RULES).unwrap();
        let goal = grammar.goal("s").unwrap().clone();
        (grammar, lex, goal)
    }

    fn french_lexicon() -> Lexicon {
        compile_lexicon("french.lex", fixtures::FRENCH_LEX).unwrap()
    }

    fn bilingual() -> BilingualLexicon {
        compile_bilingual("bilingual.lex", fixtures::BILINGUAL_LEX).unwrap()
    }

    fn source_bag(sentence: &str) -> SignBag {
        let (grammar, lex, goal) = english();
        let parses = parse_to_bag(&grammar, &lex, &goal, &tokenize(sentence)).unwrap();
        assert_eq!(parses.len(), 1, "fixture sentences parse uniquely");
        parses.into_iter().next().unwrap().bag
    }

    fn word_of(sign: &Template) -> String {
        phon_word(sign)
    }

    fn find_sign<'a>(bag: &'a SignBag, word: &str) -> &'a Template {
        bag.signs.iter().find(|s| word_of(s) == word).unwrap()
    }

    #[test]
    fn fixture_bilingual_compiles() {
        let bl = bilingual();
        assert_eq!(bl.entries().len(), 19);
        assert!(bl.warnings().is_empty(), "fixture should have no unlinked variables");

        // `to <==> a` carries a conjunction of two constraints per side.
        let to = bl.entries().iter().find(|e| e.source[0].word == "to").unwrap();
        assert_eq!(
            to.source[0].constraints,
            vec![ConstraintExpr::SemIndex("X".into()), ConstraintExpr::Prep]
        );
        assert_eq!(to.target[0].word, "a");
        assert_eq!(to.target[0].constraints.len(), 2);

        // `the` has two distinct entries (le / la).
        let the: Vec<_> =
            bl.entries().iter().filter(|e| e.source[0].word == "the").collect();
        assert_eq!(the.len(), 2);
        assert_eq!(the[0].target[0].word, "le");
        assert_eq!(the[1].target[0].word, "la");
    }

    #[test]
    fn compile_rejects_malformed_entries() {
        let cases = [
            ("john entry @semindexx(X) <==> jean entry @semindex(X).", "unknown constraint"),
            ("john entry @prep(X) <==> jean entry @prep.", "no arguments"),
            ("john entry @semindex(x) <==> jean entry @semindex(X).", "capitalized"),
            ("john entry @semindex(X) jean entry @semindex(X).", "expected '<'"),
            ("entry @semindex(X) <==> jean entry @semindex(X).", "surface word"),
        ];
        for (text, needle) in cases {
            let err = compile_bilingual("t.lex", text).unwrap_err();
            assert!(
                err.to_string().contains(needle),
                "{text:?} should fail with {needle:?}, got: {err}"
            );
        }
    }

    #[test]
    fn unlinked_target_variable_warns() {
        let bl =
            compile_bilingual("t.lex", "john entry @semindex(X) <==> jean entry @semindex(Y).")
                .unwrap();
        assert_eq!(bl.warnings().len(), 1);
        assert!(bl.warnings()[0].contains("'Y'"));
        assert!(bl.warnings()[0].contains("t.lex:1"));
    }

    #[test]
    fn fixture_bag_counts() {
        let bl = bilingual();
        let fr = french_lexicon();
        for (sentence, bags, size) in [
            ("john loves mary", 1, 3),
            ("kim gives the cookie to mary", 2, 6),
            ("mary gives the good cat to the small girl", 16, 9),
        ] {
            let result = transfer_bags(&bl, &source_bag(sentence), &fr).unwrap();
            assert_eq!(result.len(), bags, "bag count for {sentence:?}");
            for i in 0..result.len() {
                assert_eq!(result.bag(i).signs.len(), size, "bag size for {sentence:?}");
            }
        }
    }

    #[test]
    fn covers_partition_source_exactly() {
        let bl = bilingual();
        let fr = french_lexicon();
        for sentence in fixtures::BENCH_SENTENCES {
            let bag = source_bag(sentence);
            let n = bag.signs.len();
            let mut bag_words: Vec<String> = bag.signs.iter().map(word_of).collect();
            bag_words.sort();
            let result = transfer_bags(&bl, &bag, &fr).unwrap();
            for cover in result.covers() {
                let mut positions: Vec<usize> = cover
                    .iter()
                    .flat_map(|&mid| result.matches()[mid].source_positions.clone())
                    .collect();
                positions.sort_unstable();
                assert_eq!(positions, (0..n).collect::<Vec<_>>(), "exact partition");
                let mut used: Vec<String> = cover
                    .iter()
                    .flat_map(|&mid| result.matches()[mid].source_words.clone())
                    .collect();
                used.sort();
                assert_eq!(used, bag_words, "cover word multiset equals the bag's");
            }
        }
    }

    #[test]
    fn index_threading_across_transfer() {
        let bl = bilingual();
        let fr = french_lexicon();
        let src = source_bag("john loves mary");
        let john_index = find_sign(&src, "john").get(&["sem", "index"]).unwrap().clone();
        let mary_index = find_sign(&src, "mary").get(&["sem", "index"]).unwrap().clone();
        assert!(matches!(john_index, Template::Atom(_)), "parse grounds indices");

        let result = transfer_bags(&bl, &src, &fr).unwrap();
        assert_eq!(result.len(), 1);
        let bag = result.bag(0);
        let jean_index = find_sign(&bag, "jean").get(&["sem", "index"]).unwrap();
        let marie_index = find_sign(&bag, "marie").get(&["sem", "index"]).unwrap();
        let aime_args = find_sign(&bag, "aime").get(&["sem", "args"]).unwrap();

        assert_eq!(*jean_index, john_index, "jean inherits john's index");
        assert_eq!(*marie_index, mary_index, "marie inherits mary's index");
        let Template::List(args) = aime_args else { panic!("args is a list") };
        assert_eq!(args[0], john_index, "aime's subject slot shares jean's index");
        assert_eq!(args[1], mary_index, "aime's object slot shares marie's index");
    }

    #[test]
    fn preposition_entry_threads_index() {
        let bl = bilingual();
        let fr = french_lexicon();
        let src = source_bag("kim gives the cookie to mary");
        let mary_index = find_sign(&src, "mary").get(&["sem", "index"]).unwrap().clone();
        let result = transfer_bags(&bl, &src, &fr).unwrap();
        let bag = result.bag(0);
        let a = find_sign(&bag, "a");
        assert_eq!(*a.get(&["sem", "index"]).unwrap(), mary_index);
        assert_eq!(*a.get(&["head", "cat"]).unwrap(), Template::atom("prep"));
        // The preposition is index-transparent, so its NP slot is pinned to
        // marie as well — the equation reaches through the sign.
        let Some(Template::List(slots)) = a.get(&["subcat"]) else { panic!() };
        assert_eq!(*slots[0].get(&["sem", "index"]).unwrap(), mary_index);
    }

    #[test]
    fn le_la_ambiguity_orders_by_file() {
        let bl = bilingual();
        let fr = french_lexicon();
        let result = transfer_bags(&bl, &source_bag("kim gives the cookie to mary"), &fr).unwrap();
        assert_eq!(result.len(), 2);
        let words = |i: usize| -> Vec<String> {
            result.bag(i).signs.iter().map(|s| word_of(s)).collect()
        };
        assert!(words(0).contains(&"le".to_string()), "le entry precedes la in the file");
        assert!(words(1).contains(&"la".to_string()));
        assert!(!words(0).contains(&"la".to_string()));
    }

    #[test]
    fn transfer_is_deterministic() {
        let bl = bilingual();
        let fr = french_lexicon();
        let src = source_bag("mary gives the good cat to the small girl");
        let render_all = |r: &TransferResult| -> Vec<String> {
            (0..r.len())
                .map(|i| {
                    r.bag(i).signs.iter().map(Template::render).collect::<Vec<_>>().join("\n")
                })
                .collect()
        };
        let a = transfer_bags(&bl, &src, &fr).unwrap();
        let b = transfer_bags(&bl, &src, &fr).unwrap();
        assert_eq!(render_all(&a), render_all(&b));
    }

    #[test]
    fn uncovered_sign_is_named() {
        let bl = bilingual();
        let fr = french_lexicon();
        let err = transfer_bags(&bl, &source_bag("the man walks"), &fr).unwrap_err();
        assert_eq!(err, TransferError::Uncovered("man".into()));
        assert!(err.to_string().contains("'man'"));
    }

    #[test]
    fn missing_target_word_is_reported() {
        let bl =
            compile_bilingual("t.lex", "cat entry @semindex(X) <==> gato entry @semindex(X).")
                .unwrap();
        let fr = french_lexicon();
        let src = SignBag {
            signs: vec![Template::record(vec![
                ("phon", Template::list(vec![Template::atom("cat")])),
                ("sem", Template::record(vec![("index", Template::atom("i1"))])),
            ])],
        };
        let err = transfer_bags(&bl, &src, &fr).unwrap_err();
        assert_eq!(err, TransferError::MissingTargetWord { word: "gato".into(), line: 1 });
    }

    #[test]
    fn multi_word_side_matches_by_multiset_inclusion() {
        let bl = compile_bilingual(
            "t.lex",
            "look for entry @semindex(X) <==> cherche entry @semindex(X).",
        )
        .unwrap();
        let noun = |w: &str, idx: &str| {
            Template::record(vec![
                ("phon", Template::list(vec![Template::atom(w)])),
                ("sem", Template::record(vec![("index", Template::atom(idx))])),
            ])
        };
        let target = Lexicon::from_signs(
            "toy.fr",
            vec![(
                "cherche",
                Template::record(vec![
                    ("phon", Template::list(vec![Template::atom("cherche")])),
                    ("sem", Template::record(vec![("index", Template::var(0))])),
                ]),
            )],
            3,
        );
        let src = SignBag { signs: vec![noun("look", "i7"), noun("for", "i8")] };
        let result = transfer_bags(&bl, &src, &target).unwrap();
        assert_eq!(result.len(), 1, "both source signs consumed by the one entry");
        let bag = result.bag(0);
        assert_eq!(bag.signs.len(), 1);
        // The conjunction binds to the side's first word, `look`.
        assert_eq!(*bag.signs[0].get(&["sem", "index"]).unwrap(), Template::atom("i7"));
    }

    #[test]
    fn target_homographs_multiply_matches() {
        let bl = compile_bilingual("t.lex", "dog entry @semindex(X) <==> chien entry @semindex(X).")
            .unwrap();
        let sign = |w: &str, extra: Option<(&str, Template)>| {
            let mut fields = vec![
                ("phon", Template::list(vec![Template::atom(w)])),
                ("sem", Template::record(vec![("index", Template::var(0))])),
            ];
            if let Some(f) = extra {
                fields.push(f);
            }
            Template::record(fields)
        };
        let target = Lexicon::from_signs(
            "toy.fr",
            vec![
                ("chien", sign("chien", Some(("head", Template::atom("a"))))),
                ("chien", sign("chien", Some(("head", Template::atom("b"))))),
            ],
            3,
        );
        let src = SignBag {
            signs: vec![Template::record(vec![
                ("phon", Template::list(vec![Template::atom("dog")])),
                ("sem", Template::record(vec![("index", Template::atom("i1"))])),
            ])],
        };
        let result = transfer_bags(&bl, &src, &target).unwrap();
        assert_eq!(result.matches().len(), 2, "one match per target homograph");
        assert_eq!(result.len(), 2, "and hence two covers");
        assert_eq!(*result.bag(0).signs[0].get(&["head"]).unwrap(), Template::atom("a"));
        assert_eq!(*result.bag(1).signs[0].get(&["head"]).unwrap(), Template::atom("b"));
    }

    #[test]
    fn global_tags_are_stable_across_bags() {
        let bl = bilingual();
        let fr = french_lexicon();
        let result = transfer_bags(&bl, &source_bag("kim gives the cookie to mary"), &fr).unwrap();
        let tagged0 = result.tagged_bag(0);
        let tagged1 = result.tagged_bag(1);
        // The two covers differ only in the le/la match; every other sign
        // token is shared and must carry the same tag in both bags.
        let shared0: HashMap<u32, String> =
            tagged0.iter().map(|(t, s)| (*t, word_of(s))).collect();
        let mut common = 0;
        for (tag, sign) in &tagged1 {
            if let Some(w) = shared0.get(tag) {
                assert_eq!(*w, word_of(sign), "tag {tag} names the same sign token");
                common += 1;
            }
        }
        assert_eq!(common, 5, "five of six matches are shared between the covers");
        // Tags are unique within a bag and bounded by the global maximum.
        let mut tags: Vec<u32> = tagged0.iter().map(|(t, _)| *t).collect();
        tags.sort_unstable();
        tags.dedup();
        assert_eq!(tags.len(), tagged0.len());
        assert!(tags.iter().all(|&t| t >= 1 && t <= result.max_global_tag()));
    }
}
