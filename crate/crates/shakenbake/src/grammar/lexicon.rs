//! Unilingual lexicon files: `entry @macro(word[,arg]).` statements plus an
//! optional `branching N.` header, compiled into sign templates through a
//! fixed set of built-in macros.
//!
//! Sign geometry produced by the macros:
//!
//! ```text
//! {phon: [word], lex: plus|minus,
//!  head: {cat: noun|verb|det|adj|prep, agr?, vform?},
//!  subcat: [slot, ...],          % arguments still required, cancelled right to left
//!  sem: {index: i} | {args: [i, ...]},
//!  mod?: sign-pattern}           % what an adjunct attaches to
//! ```
//!
//! Agreement and argument linking are entirely lexical: a common noun's
//! determiner slot shares the noun's `agr` and `index`, an adjective shares
//! its own `index` with the noun it modifies (via `mod`), a preposition's
//! `index` is transparent to its NP complement, and a verb's `sem.args` lists
//! its subcat slots' indices in order.

use super::GrammarError;
use crate::avm::canon::Cursor;
use crate::avm::{NodeId, Store, Sym, Template};
use std::collections::HashMap;

/// One argument of a lexicon macro: a plain atom (`masc`) or a reference to
/// an inflection macro (`@fin`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MacroArg {
    Atom(String),
    Ref(String),
}

/// A parsed `@macro(...)` call, kept on the entry for introspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroCall {
    pub name: String,
    pub args: Vec<MacroArg>,
}

/// A compiled lexical entry: the surface word, the macro call it came from,
/// and the expanded sign template.
#[derive(Debug, Clone)]
pub struct LexiconEntry {
    pub word: Sym,
    pub template: MacroCall,
    pub sign: Template,
    pub line: usize,
}

/// A compiled lexicon. Entries keep file order; a word may have several.
#[derive(Debug, Clone)]
pub struct Lexicon {
    label: String,
    entries: Vec<LexiconEntry>,
    by_word: HashMap<Sym, Vec<usize>>,
    /// Declared maximum branching factor (`branching N.` header; default 3).
    pub max_branching: usize,
}

impl Lexicon {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Indices into [`Lexicon::entries`] for a surface word (empty if absent).
    pub fn entry_indices(&self, word: &str) -> &[usize] {
        self.by_word.get(&Sym::new(word)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, word: &str) -> bool {
        !self.entry_indices(word).is_empty()
    }

    /// Fresh sign instances for every entry of `word`, in file order.
    pub fn lexical_signs(&self, store: &mut Store, word: &str) -> Vec<NodeId> {
        self.entry_indices(word)
            .iter()
            .map(|&i| store.instantiate_fresh(&self.entries[i].sign))
            .collect()
    }

    /// Build a lexicon from ready-made sign templates — for synthetic test
    /// grammars that bypass the macro layer.
    pub fn from_signs(label: &str, signs: Vec<(&str, Template)>, max_branching: usize) -> Lexicon {
        let mut lex = Lexicon {
            label: label.into(),
            entries: Vec::new(),
            by_word: HashMap::new(),
            max_branching,
        };
        for (word, sign) in signs {
            let word = Sym::new(word);
            let call = MacroCall { name: "raw".into(), args: vec![] };
            lex.push(LexiconEntry { word, template: call, sign, line: 0 });
        }
        lex
    }

    fn push(&mut self, entry: LexiconEntry) {
        self.by_word.entry(entry.word).or_default().push(self.entries.len());
        self.entries.push(entry);
    }
}

/// Compile a lexicon file. `file` labels error messages.
pub fn compile_lexicon(file: &str, text: &str) -> Result<Lexicon, GrammarError> {
    let mut lex = Lexicon {
        label: file.into(),
        entries: Vec::new(),
        by_word: HashMap::new(),
        max_branching: 3,
    };
    let mut branching_seen = false;
    let mut check = Store::new();

    for (line, stmt) in super::statements(file, text)? {
        let err = |msg: String| GrammarError { file: file.into(), line, msg };
        let mut cur = Cursor::new(&stmt);
        let keyword = cur.ident().map_err(|e| super::located(file, line, &stmt, e))?;
        match keyword.as_str() {
            "branching" => {
                if branching_seen {
                    return Err(err("duplicate 'branching' header".into()));
                }
                branching_seen = true;
                let n = cur.number().map_err(|e| super::located(file, line, &stmt, e))?;
                if n == 0 {
                    return Err(err("branching factor must be at least 1".into()));
                }
                if !cur.at_end() {
                    return Err(err("unexpected text after 'branching N'".into()));
                }
                lex.max_branching = n as usize;
            }
            "entry" => {
                let call = parse_macro_call(&mut cur)
                    .map_err(|e| super::located(file, line, &stmt, e))?;
                if !cur.at_end() {
                    return Err(err("unexpected text after macro call".into()));
                }
                let (word, sign) = expand(&call).map_err(|msg| err(msg))?;

                // Compile-time cyclicity guard: an entry must unify with a
                // fresh variant of itself without building a cyclic term.
                let mark = check.mark();
                let a = check.instantiate_fresh(&sign);
                let b = check.instantiate_fresh(&sign);
                if check.unify_with_occurs_check(a, b).is_err() {
                    return Err(err(format!(
                        "entry for '{word}' would create a cyclic structure"
                    )));
                }
                check.undo_to(mark);

                lex.push(LexiconEntry { word: Sym::new(&word), template: call, sign, line });
            }
            other => {
                return Err(err(format!(
                    "expected 'entry' or 'branching', found '{other}'"
                )));
            }
        }
    }
    Ok(lex)
}

/// Parse `@name` or `@name(arg, ...)` where args are atoms or `@refs`.
pub(crate) fn parse_macro_call(
    cur: &mut Cursor,
) -> Result<MacroCall, crate::avm::canon::SyntaxError> {
    cur.expect('@')?;
    let name = cur.ident()?;
    let mut args = Vec::new();
    if cur.eat('(') {
        loop {
            if cur.eat('@') {
                args.push(MacroArg::Ref(cur.ident()?));
            } else {
                args.push(MacroArg::Atom(cur.ident()?));
            }
            if cur.eat(')') {
                break;
            }
            cur.expect(',')?;
        }
    }
    Ok(MacroCall { name, args })
}

// ---------------------------------------------------------------------------
// Macro expansion
// ---------------------------------------------------------------------------

const MACRO_NAMES: &[&str] =
    &["pn", "cn", "det", "art", "adject", "preposition", "intransv", "transv", "ditransv"];

/// Expand a macro call to `(word, sign template)`.
fn expand(call: &MacroCall) -> Result<(String, Template), String> {
    let name = call.name.as_str();
    let arity_err = |expected: &str| {
        Err(format!(
            "macro '@{name}' expects {expected}, got {} argument(s)",
            call.args.len()
        ))
    };
    let word = match call.args.first() {
        Some(MacroArg::Atom(w)) => w.clone(),
        Some(MacroArg::Ref(r)) => {
            return Err(format!("macro '@{name}' needs a surface word first, not '@{r}'"))
        }
        None => return arity_err("a surface word"),
    };

    let gender = |lex_var: u32| -> Result<Template, String> {
        match call.args.get(1) {
            None => Ok(Template::Var(lex_var)),
            Some(MacroArg::Atom(g)) => Ok(Template::atom(g)),
            Some(MacroArg::Ref(r)) => Err(format!(
                "macro '@{name}' takes a plain gender atom, not '@{r}'"
            )),
        }
    };

    let sign = match name {
        "pn" => {
            if call.args.len() != 1 {
                return arity_err("exactly 1 argument");
            }
            word_sign(
                &word,
                head(vec![("cat", Template::atom("noun")), ("agr", Template::Var(0))]),
                Template::List(vec![]),
                sem_index(Template::Var(1)),
                None,
            )
        }
        "cn" => {
            if call.args.len() > 2 {
                return arity_err("1 or 2 arguments");
            }
            let agr = gender(0)?;
            let index = Template::Var(1);
            // The determiner slot shares the noun's agreement and index, so
            // the article must agree and ends up denoting the same entity.
            let det_slot = Template::record(vec![
                ("head", head(vec![("cat", Template::atom("det")), ("agr", agr.clone())])),
                ("subcat", Template::List(vec![])),
                ("sem", sem_index(index.clone())),
            ]);
            word_sign(
                &word,
                head(vec![("cat", Template::atom("noun")), ("agr", agr)]),
                Template::List(vec![det_slot]),
                sem_index(index),
                None,
            )
        }
        "det" | "art" => {
            if call.args.len() > 2 {
                return arity_err("1 or 2 arguments");
            }
            let agr = gender(0)?;
            word_sign(
                &word,
                head(vec![("cat", Template::atom("det")), ("agr", agr)]),
                Template::List(vec![]),
                sem_index(Template::Var(1)),
                None,
            )
        }
        "adject" => {
            if call.args.len() > 2 {
                return arity_err("1 or 2 arguments");
            }
            let agr = gender(0)?;
            let index = Template::Var(1);
            // `mod` describes the noun this adjective may attach to; sharing
            // the index makes the adjective and the noun co-denote.
            let target = Template::record(vec![
                ("head", head(vec![("cat", Template::atom("noun")), ("agr", agr)])),
                ("sem", sem_index(index.clone())),
            ]);
            word_sign(
                &word,
                head(vec![("cat", Template::atom("adj"))]),
                Template::List(vec![]),
                sem_index(index),
                Some(target),
            )
        }
        "preposition" => {
            if call.args.len() != 1 {
                return arity_err("exactly 1 argument");
            }
            let index = Template::Var(0);
            // Index-transparent: the PP denotes what its NP complement does.
            word_sign(
                &word,
                head(vec![("cat", Template::atom("prep"))]),
                Template::List(vec![np_slot(index.clone())]),
                sem_index(index),
                None,
            )
        }
        "intransv" | "transv" | "ditransv" => {
            if call.args.len() != 2 {
                return arity_err("a word and an inflection marker such as '@fin'");
            }
            let vform = match &call.args[1] {
                MacroArg::Ref(r) if r == "fin" => Template::atom("fin"),
                MacroArg::Ref(r) => return Err(format!("unknown inflection marker '@{r}'")),
                MacroArg::Atom(a) => {
                    return Err(format!(
                        "macro '@{name}' takes an inflection marker like '@fin', not '{a}'"
                    ))
                }
            };
            let indices: Vec<Template> = match name {
                "intransv" => vec![Template::Var(0)],
                "transv" => vec![Template::Var(0), Template::Var(1)],
                _ => vec![Template::Var(0), Template::Var(1), Template::Var(2)],
            };
            let mut slots: Vec<Template> =
                indices.iter().map(|i| np_slot(i.clone())).collect();
            if name == "ditransv" {
                // The third argument is realized as a PP.
                let i = indices[2].clone();
                slots[2] = Template::record(vec![
                    ("head", head(vec![("cat", Template::atom("prep"))])),
                    ("subcat", Template::List(vec![])),
                    ("sem", sem_index(i)),
                ]);
            }
            word_sign(
                &word,
                head(vec![("cat", Template::atom("verb")), ("vform", vform)]),
                Template::List(slots),
                Template::record(vec![("args", Template::List(indices))]),
                None,
            )
        }
        _ => {
            return Err(format!(
                "unknown macro '@{name}' (known: {})",
                MACRO_NAMES.join(", ")
            ))
        }
    };
    Ok((word, sign))
}

fn head(entries: Vec<(&str, Template)>) -> Template {
    Template::record(entries)
}

fn sem_index(index: Template) -> Template {
    Template::record(vec![("index", index)])
}

/// A saturated NP slot with the given index.
fn np_slot(index: Template) -> Template {
    Template::record(vec![
        ("head", head(vec![("cat", Template::atom("noun"))])),
        ("subcat", Template::List(vec![])),
        ("sem", sem_index(index)),
    ])
}

fn word_sign(
    word: &str,
    head: Template,
    subcat: Template,
    sem: Template,
    modifier: Option<Template>,
) -> Template {
    let mut entries = vec![
        ("phon", Template::List(vec![Template::atom(word)])),
        ("lex", Template::atom("plus")),
        ("head", head),
        ("subcat", subcat),
        ("sem", sem),
    ];
    if let Some(m) = modifier {
        entries.push(("mod", m));
    }
    Template::record(entries)
}
