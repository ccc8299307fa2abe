//! Grammar rules (schemata with a head daughter, a mother pattern and a list
//! of named principle constraints), plus rule application over an ordered
//! daughter sequence. Lexicon compilation lives in [`lexicon`], the rule-file
//! reader in [`rules_file`].

pub mod lexicon;
pub mod rules_file;

pub use lexicon::{compile_lexicon, LexiconEntry, Lexicon, MacroArg, MacroCall};
pub use rules_file::compile_rules;

use crate::avm::{NodeId, Store, Sym, Template};
use once_cell::sync::Lazy;

/// Interned feature names used by the constraint evaluators.
pub(crate) struct CoreSyms {
    pub phon: Sym,
    pub lex: Sym,
    pub head: Sym,
    pub cat: Sym,
    pub vform: Sym,
    pub subcat: Sym,
    pub sem: Sym,
    pub modf: Sym,
}

pub(crate) fn syms() -> &'static CoreSyms {
    static SYMS: Lazy<CoreSyms> = Lazy::new(|| CoreSyms {
        phon: Sym::new("phon"),
        lex: Sym::new("lex"),
        head: Sym::new("head"),
        cat: Sym::new("cat"),
        vform: Sym::new("vform"),
        subcat: Sym::new("subcat"),
        sem: Sym::new("sem"),
        modf: Sym::new("mod"),
    });
    &SYMS
}

/// Error from compiling a lexicon or rule file; always carries file + line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{file}:{line}: {msg}")]
pub struct GrammarError {
    pub file: String,
    pub line: usize,
    pub msg: String,
}

/// The named principles a rule may list. File names in parentheses.
///
/// * `HeadFeature` (`head`): mother shares the head daughter's `head`.
/// * `Semantics` (`sem`): mother shares the head daughter's `sem`.
/// * `SubcatCancel` (`cancel`): the head daughter's trailing subcat slots
///   unify with the non-head daughters in order; the mother's subcat is the
///   remaining prefix. With no non-head daughters this passes the whole
///   subcat list through unchanged.
/// * `SubcatPass` (`pass`): mother shares the head daughter's `subcat`
///   unchanged — for adjunct rules, which consume no slots.
/// * `Modifier` (`mod`): every non-head daughter's `mod` value unifies with
///   the head daughter's whole sign (attachment plus agreement).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    HeadFeature,
    Semantics,
    SubcatCancel,
    SubcatPass,
    Modifier,
}

/// Names accepted in `constraints=[...]`, i.e. the principle registry.
pub const PRINCIPLE_NAMES: &[&str] = &["head", "sem", "cancel", "pass", "mod"];

impl Constraint {
    pub fn from_name(name: &str) -> Option<Constraint> {
        match name {
            "head" => Some(Constraint::HeadFeature),
            "sem" => Some(Constraint::Semantics),
            "cancel" => Some(Constraint::SubcatCancel),
            "pass" => Some(Constraint::SubcatPass),
            "mod" => Some(Constraint::Modifier),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constraint::HeadFeature => "head",
            Constraint::Semantics => "sem",
            Constraint::SubcatCancel => "cancel",
            Constraint::SubcatPass => "pass",
            Constraint::Modifier => "mod",
        }
    }
}

/// A grammar schema: daughter patterns in surface order, one of them the
/// head, a mother pattern, and the constraints to evaluate after the
/// daughters unify with their patterns. Template variables are shared across
/// the mother and all daughter patterns of one rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub mother: Template,
    pub daughters: Vec<Template>,
    /// Index of the head daughter in `daughters` (0-based; rule files write
    /// it 1-based as `head=j`).
    pub head_position: usize,
    pub constraints: Vec<Constraint>,
    pub line: usize,
}

/// A compiled grammar: the rule inventory plus its named goal patterns.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub rules: Vec<Rule>,
    /// Maximum daughter count over all rules (the branching factor n).
    pub max_branching: usize,
    /// The principle registry rules may reference.
    pub principles: &'static [&'static str],
    /// Named goal patterns (`goal s: {...}.`), e.g. the complete-sentence sign.
    pub goals: Vec<(String, Template)>,
    /// Source label (file name) used in error messages.
    pub label: String,
}

impl Grammar {
    /// Build a grammar directly from rules — used by tests that need
    /// synthetic grammars (e.g. always-failing rules of a given arity).
    pub fn from_rules(
        label: &str,
        rules: Vec<Rule>,
        goals: Vec<(String, Template)>,
    ) -> Grammar {
        let max_branching = rules.iter().map(|r| r.daughters.len()).max().unwrap_or(0);
        Grammar { rules, max_branching, principles: PRINCIPLE_NAMES, goals, label: label.into() }
    }

    pub fn goal(&self, name: &str) -> Option<&Template> {
        self.goals.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Apply `rule` to `daughters` in the given order: unify each daughter
    /// with its pattern, evaluate the constraints left to right, and constrain
    /// the mother's phon to the concatenated daughter phons. Returns the
    /// mother on success, with all bindings left in place (the daughters now
    /// share structure with the mother). On failure the store is restored
    /// exactly — callers pass fresh copies when they must keep originals
    /// pristine across a *successful* application.
    ///
    /// A daughter sequence of the wrong length is a caller bug; it is
    /// rejected before any unification, leaving the store untouched.
    pub fn apply_rule_ordered(
        &self,
        store: &mut Store,
        rule: &Rule,
        daughters: &[NodeId],
    ) -> Option<NodeId> {
        if daughters.len() != rule.daughters.len() {
            return None;
        }
        let mark = store.mark();
        let mut vars = std::collections::HashMap::new();
        let patterns = store.instantiate_many(&rule.daughters, &mut vars);
        let mother = store.instantiate(&rule.mother, &mut vars);
        for (&pattern, &daughter) in patterns.iter().zip(daughters) {
            if !store.unify(pattern, daughter) {
                store.undo_to(mark);
                return None;
            }
        }
        for &constraint in &rule.constraints {
            if !eval_constraint(store, constraint, rule, mother, daughters) {
                store.undo_to(mark);
                return None;
            }
        }
        if !concat_phon(store, mother, daughters) {
            store.undo_to(mark);
            return None;
        }
        Some(mother)
    }
}

/// Unify `mother.feat` with `source.feat` (installing the feature on the
/// mother if absent). Fails if `source` lacks the feature.
fn share_feature(store: &mut Store, mother: NodeId, source: NodeId, feat: Sym) -> bool {
    let Some(value) = store.get_path(source, &[feat]) else {
        return false;
    };
    let wrapper = store.record(vec![(feat, value)]);
    store.unify(mother, wrapper)
}

fn eval_constraint(
    store: &mut Store,
    constraint: Constraint,
    rule: &Rule,
    mother: NodeId,
    daughters: &[NodeId],
) -> bool {
    let s = syms();
    let head_d = daughters[rule.head_position];
    match constraint {
        Constraint::HeadFeature => share_feature(store, mother, head_d, s.head),
        Constraint::Semantics => share_feature(store, mother, head_d, s.sem),
        Constraint::SubcatPass => share_feature(store, mother, head_d, s.subcat),
        Constraint::SubcatCancel => {
            let Some(slots) = store
                .get_path(head_d, &[s.subcat])
                .and_then(|n| store.as_list(n))
            else {
                return false;
            };
            let k = daughters.len() - 1;
            if slots.len() < k {
                return false;
            }
            let split = slots.len() - k;
            let non_head = daughters
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != rule.head_position)
                .map(|(_, &d)| d);
            for (&slot, daughter) in slots[split..].iter().zip(non_head) {
                if !store.unify(slot, daughter) {
                    return false;
                }
            }
            let remaining = store.list(slots[..split].to_vec());
            let wrapper = store.record(vec![(s.subcat, remaining)]);
            store.unify(mother, wrapper)
        }
        Constraint::Modifier => {
            for (i, &daughter) in daughters.iter().enumerate() {
                if i == rule.head_position {
                    continue;
                }
                let Some(modifier) = store.get_path(daughter, &[s.modf]) else {
                    return false;
                };
                if !store.unify(modifier, head_d) {
                    return false;
                }
            }
            true
        }
    }
}

/// Constrain `mother.phon` to the in-order concatenation of daughter phons.
fn concat_phon(store: &mut Store, mother: NodeId, daughters: &[NodeId]) -> bool {
    let s = syms();
    let mut words = Vec::new();
    for &daughter in daughters {
        let Some(items) = store
            .get_path(daughter, &[s.phon])
            .and_then(|n| store.as_list(n))
        else {
            return false;
        };
        words.extend(items);
    }
    let list = store.list(words);
    let wrapper = store.record(vec![(s.phon, list)]);
    store.unify(mother, wrapper)
}

/// Cheap pre-unification filter: `true` means the rule cannot possibly apply
/// to these daughters (definite atom clash on lex / head.cat / head.vform, or
/// a subcat length mismatch). `false` promises nothing. Never mutates.
pub fn quick_reject(store: &Store, rule: &Rule, daughters: &[NodeId]) -> bool {
    if daughters.len() != rule.daughters.len() {
        return true;
    }
    let s = syms();
    let atom_paths: [&[Sym]; 3] = [&[s.lex], &[s.head, s.cat], &[s.head, s.vform]];
    for (pattern, &daughter) in rule.daughters.iter().zip(daughters) {
        for path in atom_paths {
            let want = match template_at(pattern, path) {
                Some(Template::Atom(a)) => *a,
                _ => continue,
            };
            if let Some(got) = store.get_path(daughter, path).and_then(|n| store.as_atom(n)) {
                if got != want {
                    return true;
                }
            }
        }
        if let Some(Template::List(want)) = template_at(pattern, &[s.subcat]) {
            if let Some(items) = store
                .get_path(daughter, &[s.subcat])
                .and_then(|n| store.as_list(n))
            {
                if items.len() != want.len() {
                    return true;
                }
            }
        }
    }
    false
}

fn template_at<'t>(t: &'t Template, path: &[Sym]) -> Option<&'t Template> {
    let mut cur = t;
    for feat in path {
        match cur {
            Template::Record(entries) => {
                cur = &entries.iter().find(|(f, _)| f == feat)?.1;
            }
            _ => return None,
        }
    }
    Some(cur)
}

// ---------------------------------------------------------------------------
// Statement scanning shared by the lexicon / rule / bilingual file readers
// ---------------------------------------------------------------------------

/// Split a file into `.`-terminated statements, stripping `%` comments.
/// Returns `(line, text)` pairs where `line` is the 1-based line of the
/// statement's first non-blank character. Reports unterminated trailing text.
pub(crate) fn statements(
    file: &str,
    src: &str,
) -> Result<Vec<(usize, String)>, GrammarError> {
    let mut stripped = String::with_capacity(src.len());
    for line in src.split_inclusive('\n') {
        match line.find('%') {
            Some(i) => {
                stripped.push_str(&line[..i]);
                if line.ends_with('\n') {
                    stripped.push('\n');
                }
            }
            None => stripped.push_str(line),
        }
    }

    let mut out = Vec::new();
    let mut start = 0usize;
    let bytes = stripped.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'.' {
            let text = &stripped[start..i];
            if !text.trim().is_empty() {
                out.push((line_of(&stripped, start, text), text.trim().to_owned()));
            }
            start = i + 1;
        }
    }
    let tail = &stripped[start..];
    if !tail.trim().is_empty() {
        return Err(GrammarError {
            file: file.into(),
            line: line_of(&stripped, start, tail),
            msg: "statement is missing its terminating '.'".into(),
        });
    }
    Ok(out)
}

/// 1-based line number of the first non-whitespace char of `text`, which
/// starts at byte `start` of `src`.
fn line_of(src: &str, start: usize, text: &str) -> usize {
    let lead = text.len() - text.trim_start().len();
    let pos = start + lead;
    src[..pos].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Translate a `SyntaxError` offset inside a statement to a file-level error.
pub(crate) fn located(
    file: &str,
    stmt_line: usize,
    stmt_text: &str,
    err: crate::avm::canon::SyntaxError,
) -> GrammarError {
    let extra = stmt_text[..err.offset.min(stmt_text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count();
    GrammarError { file: file.into(), line: stmt_line + extra, msg: err.msg }
}
