//! The assembled engine: parse → transfer → generate, plus the bag-file
//! format the CLI trades in.
//!
//! An [`Engine`] owns the five compiled resources (source lexicon + rules,
//! target lexicon + rules, bilingual lexicon). Construction compiles
//! everything up front, so a malformed file fails fast with its file name
//! and line, before any sentence is processed.

use crate::avm::canon::parse_template;
use crate::avm::Template;
use crate::generator::{
    memo_stats, shake_generate, tag_bag, GenError, GenOutcome, Generator, KeyMode, MemoStats,
    Mode, Tag, TaggedSign,
};
use crate::grammar::{compile_lexicon, compile_rules, Grammar, GrammarError, Lexicon};
use crate::parser::{parse_to_bag, tokenize, Parse, ParseError, SignBag};
use crate::transfer::{compile_bilingual, transfer_bags, BilingualLexicon, TransferError};
use crate::fixtures;
use std::fmt;
use std::path::{Path, PathBuf};

/// Where a resource file comes from: the embedded fixture or a path.
#[derive(Debug, Clone)]
pub enum FileSource {
    Embedded { label: &'static str, text: &'static str },
    Path(PathBuf),
}

impl FileSource {
    fn load(&self) -> Result<(String, String), BuildError> {
        match self {
            FileSource::Embedded { label, text } => Ok((label.to_string(), text.to_string())),
            FileSource::Path(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BuildError::File {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                Ok((p.display().to_string(), text))
            }
        }
    }
}

/// Configuration for an [`Engine`]: the five resource files and the goal
/// category. Defaults to the embedded English→French fixtures; a directory
/// holding files of the same names can override them.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub source_lexicon: FileSource,
    pub target_lexicon: FileSource,
    pub bilingual_lexicon: FileSource,
    pub source_grammar: FileSource,
    pub target_grammar: FileSource,
    /// Goal category name, looked up in both grammars' goal declarations.
    pub goal: String,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            source_lexicon: FileSource::Embedded {
                label: "english.lex",
                text: fixtures::ENGLISH_LEX,
            },
            target_lexicon: FileSource::Embedded {
                label: "french.lex",
                text: fixtures::FRENCH_LEX,
            },
            bilingual_lexicon: FileSource::Embedded {
                label: "bilingual.lex",
                text: fixtures::BILINGUAL_LEX,
            },
            source_grammar: FileSource::Embedded {
                label: "english.rules",
                text: fixtures::ENGLISH_RULES,
            },
            target_grammar: FileSource::Embedded {
                label: "french.rules",
                text: fixtures::FRENCH_RULES,
            },
            goal: "s".into(),
        }
    }
}

impl EngineConfig {
    /// Expect `english.lex`, `french.lex`, `english.rules`, `french.rules`
    /// and `bilingual.lex` inside `dir`.
    pub fn from_dir(dir: &Path) -> EngineConfig {
        let p = |name: &str| FileSource::Path(dir.join(name));
        EngineConfig {
            source_lexicon: p("english.lex"),
            target_lexicon: p("french.lex"),
            bilingual_lexicon: p("bilingual.lex"),
            source_grammar: p("english.rules"),
            target_grammar: p("french.rules"),
            goal: "s".into(),
        }
    }
}

/// Error while building an engine (reading or compiling resource files).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("file error: {path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Compile(#[from] GrammarError),
    #[error("{file}: rules use up to {rules} daughters but the lexicon declares branching {declared}")]
    Branching { file: String, rules: usize, declared: usize },
    #[error("{file}: no goal named '{goal}'")]
    MissingGoal { file: String, goal: String },
}

/// Error while running a pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("no parse: {0}")]
    NoParse(String),
}

/// Which side of the bilingual pair a grammar/lexicon belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lang {
    Source,
    Target,
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lang::Source => "source",
            Lang::Target => "target",
        })
    }
}

/// The compiled pipeline.
#[derive(Debug)]
pub struct Engine {
    pub source_grammar: Grammar,
    pub source_lexicon: Lexicon,
    pub source_goal: Template,
    pub target_grammar: Grammar,
    pub target_lexicon: Lexicon,
    pub target_goal: Template,
    pub bilingual: BilingualLexicon,
}

impl Engine {
    pub fn new(config: &EngineConfig) -> Result<Engine, BuildError> {
        let compile_side = |lex_src: &FileSource,
                            rules_src: &FileSource|
         -> Result<(Lexicon, Grammar, Template), BuildError> {
            let (lex_label, lex_text) = lex_src.load()?;
            let lexicon = compile_lexicon(&lex_label, &lex_text)?;
            let (rules_label, rules_text) = rules_src.load()?;
            let grammar = compile_rules(&rules_label, &rules_text)?;
            if grammar.max_branching > lexicon.max_branching {
                return Err(BuildError::Branching {
                    file: rules_label,
                    rules: grammar.max_branching,
                    declared: lexicon.max_branching,
                });
            }
            let goal = grammar.goal(&config.goal).cloned().ok_or(BuildError::MissingGoal {
                file: rules_label.clone(),
                goal: config.goal.clone(),
            })?;
            Ok((lexicon, grammar, goal))
        };
        let (source_lexicon, source_grammar, source_goal) =
            compile_side(&config.source_lexicon, &config.source_grammar)?;
        let (target_lexicon, target_grammar, target_goal) =
            compile_side(&config.target_lexicon, &config.target_grammar)?;
        let (bl_label, bl_text) = config.bilingual_lexicon.load()?;
        let bilingual = compile_bilingual(&bl_label, &bl_text)?;
        Ok(Engine {
            source_grammar,
            source_lexicon,
            source_goal,
            target_grammar,
            target_lexicon,
            target_goal,
            bilingual,
        })
    }

    fn side(&self, lang: Lang) -> (&Grammar, &Lexicon, &Template) {
        match lang {
            Lang::Source => (&self.source_grammar, &self.source_lexicon, &self.source_goal),
            Lang::Target => (&self.target_grammar, &self.target_lexicon, &self.target_goal),
        }
    }

    /// Parse a sentence with one side's grammar. `Ok(vec![])` is a
    /// grammatical dead end; errors are lexical (unknown word) or input
    /// problems.
    pub fn parse(&self, lang: Lang, sentence: &str) -> Result<Vec<Parse>, ParseError> {
        let (grammar, lexicon, goal) = self.side(lang);
        parse_to_bag(grammar, lexicon, goal, &tokenize(sentence))
    }

    /// Transfer a source bag into target bags.
    pub fn transfer(
        &self,
        bag: &SignBag,
    ) -> Result<crate::transfer::TransferResult, TransferError> {
        transfer_bags(&self.bilingual, bag, &self.target_lexicon)
    }

    /// Generate from an explicitly tagged bag with one side's grammar.
    pub fn generate(
        &self,
        lang: Lang,
        bag: &[TaggedSign],
        mode: Mode,
        max_results: Option<usize>,
    ) -> Result<GenRunReport, EngineError> {
        let (grammar, _, goal) = self.side(lang);
        let mut session = Generator::new(grammar, mode);
        let outcomes = session.generate(bag, goal, max_results)?;
        Ok(GenRunReport {
            outcomes,
            stats: memo_stats(session.memo()),
            rule_calls: session.rule_calls(),
        })
    }

    /// The full pipeline for one sentence. Bags are numbered globally across
    /// parses (fixture sentences parse uniquely, so numbering equals the
    /// transfer order).
    pub fn translate(
        &self,
        sentence: &str,
        options: &TranslateOptions,
    ) -> Result<Translation, EngineError> {
        let parses = self.parse(Lang::Source, sentence)?;
        if parses.is_empty() {
            return Err(EngineError::NoParse(sentence.to_string()));
        }
        let mut translation = Translation {
            parse_count: parses.len(),
            bags: Vec::new(),
            stats: MemoStats { hits: 0, misses: 0, calls: 0, hit_ratio: 0.0 },
            rule_calls: 0,
            cross_bag_hits: 0,
        };
        for parse in &parses {
            let result = self.transfer(&parse.bag)?;
            if options.share_memo {
                self.run_shared(&result, options, &mut translation)?;
            } else {
                self.run_independent(&result, options, &mut translation)?;
            }
        }
        let calls = translation.stats.hits + translation.stats.misses;
        translation.stats.calls = calls;
        translation.stats.hit_ratio =
            if calls == 0 { 0.0 } else { translation.stats.hits as f64 / calls as f64 };
        Ok(translation)
    }

    /// One fresh session per target bag (tags 1..N per bag).
    fn run_independent(
        &self,
        result: &crate::transfer::TransferResult,
        options: &TranslateOptions,
        translation: &mut Translation,
    ) -> Result<(), EngineError> {
        for i in 0..result.len() {
            let bag = result.bag(i);
            let run = shake_generate(
                &self.target_grammar,
                &bag,
                &self.target_goal,
                options.mode,
                options.max_per_bag,
            )?;
            translation.push_bag(bag.signs, run.outcomes);
            translation.stats.hits += run.stats.hits;
            translation.stats.misses += run.stats.misses;
            translation.rule_calls += run.rule_calls;
        }
        Ok(())
    }

    /// One session spanning all of a transfer result's bags, with the memo
    /// table carried across them. Sound because the transfer result tags
    /// sign tokens globally: a sign shared by two covers keeps its tag.
    fn run_shared(
        &self,
        result: &crate::transfer::TransferResult,
        options: &TranslateOptions,
        translation: &mut Translation,
    ) -> Result<(), EngineError> {
        let mut session = Generator::new(&self.target_grammar, options.mode);
        for i in 0..result.len() {
            if i > 0 {
                session.next_epoch();
            }
            let tagged: Vec<TaggedSign> = result
                .tagged_bag(i)
                .into_iter()
                .map(|(tag, sign)| TaggedSign { tag, sign })
                .collect();
            let signs: Vec<Template> = tagged.iter().map(|t| t.sign.clone()).collect();
            let outcomes = session.generate(&tagged, &self.target_goal, options.max_per_bag)?;
            translation.push_bag(signs, outcomes);
        }
        let stats = memo_stats(session.memo());
        translation.stats.hits += stats.hits;
        translation.stats.misses += stats.misses;
        translation.rule_calls += session.rule_calls();
        translation.cross_bag_hits += session.memo().cross_epoch_hits();
        Ok(())
    }
}

/// Options for [`Engine::translate`].
#[derive(Debug, Clone)]
pub struct TranslateOptions {
    pub mode: Mode,
    /// Carry one memo table across a transfer result's bags.
    pub share_memo: bool,
    /// Cap enumerated results per bag (`None` = exhaustive).
    pub max_per_bag: Option<usize>,
}

impl Default for TranslateOptions {
    fn default() -> TranslateOptions {
        TranslateOptions {
            mode: Mode::Memo(KeyMode::IntegerIndex),
            share_memo: false,
            max_per_bag: None,
        }
    }
}

/// One target bag's outcome within a translation.
#[derive(Debug, Clone)]
pub struct TranslatedBag {
    /// 1-based global bag number.
    pub number: usize,
    pub signs: Vec<Template>,
    pub outcomes: Vec<GenOutcome>,
}

impl TranslatedBag {
    pub fn is_productive(&self) -> bool {
        !self.outcomes.is_empty()
    }
}

/// A full translation: every target bag with its generated sentences, plus
/// session counters aggregated over all bags.
#[derive(Debug, Clone)]
pub struct Translation {
    pub parse_count: usize,
    pub bags: Vec<TranslatedBag>,
    pub stats: MemoStats,
    pub rule_calls: u64,
    /// Memo hits answered from an earlier bag's entries (shared mode only).
    pub cross_bag_hits: u64,
}

impl Translation {
    fn push_bag(&mut self, signs: Vec<Template>, outcomes: Vec<GenOutcome>) {
        let number = self.bags.len() + 1;
        self.bags.push(TranslatedBag { number, signs, outcomes });
    }

    /// Every generated sentence with its bag number, in enumeration order.
    pub fn sentences(&self) -> impl Iterator<Item = (usize, String)> + '_ {
        self.bags.iter().flat_map(|b| {
            b.outcomes.iter().map(move |o| (b.number, o.sentence.join(" ")))
        })
    }

    pub fn productive_bags(&self) -> usize {
        self.bags.iter().filter(|b| b.is_productive()).count()
    }

    pub fn total_sentences(&self) -> usize {
        self.bags.iter().map(|b| b.outcomes.len()).sum()
    }
}

/// A single generation run's outcomes and counters (CLI `generate`).
#[derive(Debug, Clone)]
pub struct GenRunReport {
    pub outcomes: Vec<GenOutcome>,
    pub stats: MemoStats,
    pub rule_calls: u64,
}

// ---------------------------------------------------------------------------
// Bag files
// ---------------------------------------------------------------------------
//
// A bag file is the textual currency between `parse`, `transfer` and
// `generate`:
//
// ```text
// %% bag 1                      <- section header ("%%"): starts a new bag
// tag1: {head: {...}, ...}      <- optional "tagN:" marker, then one
// tag2: {head: {...}, ...}         canonical-serialized sign per line
// % plain comment               <- '%' comments and blank lines are skipped
// ```
//
// Files without section headers hold a single bag. Tags, when present, must
// be positive and unique within a section and present on every sign of the
// section; untagged sections are numbered 1..N in line order. Variables are
// per-line: cross-sign sharing cannot be written in a file, which is
// harmless for parser/transfer output because the indices that link signs
// are ground atoms by then.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bag file line {line}: {message}")]
pub struct BagFileError {
    pub line: usize,
    pub message: String,
}

/// Parse a bag file into one tagged bag per section.
pub fn parse_bag_file(text: &str) -> Result<Vec<Vec<TaggedSign>>, BagFileError> {
    struct Section {
        signs: Vec<(Option<Tag>, Template)>,
        start_line: usize,
    }
    let mut sections: Vec<Section> = Vec::new();
    let mut current: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with("%%") {
            if let Some(s) = current.take() {
                sections.push(s);
            }
            current = Some(Section { signs: Vec::new(), start_line: line_no });
            continue;
        }
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let (tag, body) = match split_tag_marker(line) {
            Ok(parts) => parts,
            Err(message) => return Err(BagFileError { line: line_no, message }),
        };
        let sign = parse_template(body).map_err(|e| BagFileError {
            line: line_no,
            message: format!("bad sign: {e}"),
        })?;
        current
            .get_or_insert_with(|| Section { signs: Vec::new(), start_line: line_no })
            .signs
            .push((tag, sign));
    }
    if let Some(s) = current.take() {
        sections.push(s);
    }

    let mut bags = Vec::with_capacity(sections.len());
    for section in sections {
        let tagged_count = section.signs.iter().filter(|(t, _)| t.is_some()).count();
        if tagged_count != 0 && tagged_count != section.signs.len() {
            return Err(BagFileError {
                line: section.start_line,
                message: "either every sign of a bag carries a tag marker or none does".into(),
            });
        }
        let bag: Vec<TaggedSign> = section
            .signs
            .into_iter()
            .enumerate()
            .map(|(i, (tag, sign))| TaggedSign {
                tag: tag.unwrap_or(i as Tag + 1),
                sign,
            })
            .collect();
        bags.push(bag);
    }
    Ok(bags)
}

/// Split an optional leading `tagN:` marker off a bag-file line.
fn split_tag_marker(line: &str) -> Result<(Option<Tag>, &str), String> {
    let Some(rest) = line.strip_prefix("tag") else {
        return Ok((None, line));
    };
    let Some(colon) = rest.find(':') else {
        return Ok((None, line));
    };
    let digits = &rest[..colon];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Ok((None, line));
    }
    let n: Tag = digits
        .parse()
        .map_err(|_| format!("tag number '{digits}' out of range"))?;
    if n == 0 {
        return Err("tag numbers are positive".into());
    }
    Ok((Some(n), rest[colon + 1..].trim_start()))
}

/// Render one bag as bag-file lines (with tag markers).
pub fn render_bag(tagged: &[TaggedSign]) -> String {
    let mut out = String::new();
    for ts in tagged {
        out.push_str(&format!("tag{}: {}\n", ts.tag, ts.sign.render()));
    }
    out
}

/// Render a whole bag sequence with `%% bag N` section headers.
pub fn render_bag_sections(bags: &[Vec<TaggedSign>]) -> String {
    let mut out = String::new();
    for (i, bag) in bags.iter().enumerate() {
        out.push_str(&format!("%% bag {}\n", i + 1));
        out.push_str(&render_bag(bag));
    }
    out
}

/// Tag a plain bag 1..N (convenience for callers holding a [`SignBag`]).
pub fn tag_plain(bag: &SignBag) -> Vec<TaggedSign> {
    tag_bag(bag)
}
