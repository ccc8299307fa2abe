//! Command-line front end for the translation engine.
//!
//! One subcommand per pipeline stage plus the end-to-end `translate` and the
//! `bench` harness. Stages compose through bag files: `parse` and `transfer`
//! emit them, `generate` consumes them, and `translate <s>` prints the same
//! sentences as `transfer <s>` piped into `generate`.
//!
//! Exit codes: 0 on success; 1 on any error (unknown word, file problems,
//! uncovered signs, malformed bags). `translate` is the exception pinned to
//! its contract: 0 when at least one sentence came out, 2 when the pipeline
//! ran but produced none (including a sentence the source grammar cannot
//! parse), 1 on errors.

use clap::{Parser, Subcommand, ValueEnum};
use shakenbake::bench::{emit_report, run_bench, BenchOptions, ReportFormat};
use shakenbake::generator::{memo_stats, Generator, KeyMode, MemoStats, Mode, TaggedSign};
use shakenbake::pipeline::{
    parse_bag_file, render_bag, Engine, EngineConfig, EngineError, Lang, TranslateOptions,
    Translation,
};
use std::fmt::Display;
use std::path::PathBuf;
use std::process::exit;

#[derive(Parser)]
#[command(
    name = "shakenbake",
    version,
    about = "Bag-based translation: parse, transfer, generate",
    long_about = "Translates by parsing a sentence into a bag of lexical signs, mapping the bag \
                  through a bilingual lexicon, and arranging each target bag into sentences with \
                  a shift-reduce generator. Defaults to the built-in English→French fixtures."
)]
struct Cli {
    /// Directory with english.lex, french.lex, english.rules, french.rules,
    /// bilingual.lex (overrides the built-in fixtures)
    #[arg(long, global = true, env = "SHAKENBAKE_FIXTURES")]
    fixtures: Option<PathBuf>,

    /// Goal category for parsing and generation
    #[arg(long, global = true, default_value = "s")]
    goal: String,

    /// Also emit canonical sign serializations at each stage
    #[arg(long, global = true)]
    dump_signs: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sentence and print each parse's bag of leaf signs
    Parse {
        sentence: String,
        /// Which grammar parses the sentence
        #[arg(long, value_enum, default_value_t = LangArg::Source)]
        lang: LangArg,
    },
    /// Map a source sentence to its candidate target-language bags
    Transfer { sentence: String },
    /// Generate sentences from a bag file (or from a sentence's own bag)
    Generate {
        /// Bag file: one sign per line, optional `tagN:` markers, `%%` section
        /// headers separate bags
        bag_file: Option<PathBuf>,
        /// Parse this sentence and regenerate from its bag instead
        #[arg(long, conflicts_with = "bag_file")]
        from: Option<String>,
        /// Which grammar generates (and parses --from)
        #[arg(long, value_enum, default_value_t = LangArg::Target)]
        lang: LangArg,
        #[arg(long, value_enum, default_value_t = ModeArg::MemoInt)]
        mode: ModeArg,
        /// Stop after the first sentence per bag
        #[arg(long)]
        first: bool,
        /// Drop repeated sentences within a bag
        #[arg(long)]
        distinct: bool,
        /// Carry one memo table across the file's bags
        #[arg(long)]
        share_memo: bool,
        /// Print counter lines after the sentences
        #[arg(long)]
        stats: bool,
    },
    /// Translate a source sentence end to end
    Translate {
        sentence: String,
        #[arg(long, value_enum, default_value_t = ModeArg::MemoInt)]
        mode: ModeArg,
        /// Stop after the first sentence per bag
        #[arg(long)]
        first: bool,
        /// Drop repeated sentences within a bag
        #[arg(long)]
        distinct: bool,
        /// Carry one memo table across the target bags
        #[arg(long)]
        share_memo: bool,
        /// Print counter lines after the sentences
        #[arg(long)]
        stats: bool,
    },
    /// Time the generator on the three built-in benchmark sentences
    Bench {
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Repeats per timing measurement (the median is reported)
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Add one row per target bag after each sentence's headline row
        #[arg(long)]
        per_bag: bool,
        /// Comma-separated mode list
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_values_t = vec![ModeArg::Naive, ModeArg::MemoInt, ModeArg::MemoList]
        )]
        modes: Vec<ModeArg>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LangArg {
    Source,
    Target,
}

impl From<LangArg> for Lang {
    fn from(l: LangArg) -> Lang {
        match l {
            LangArg::Source => Lang::Source,
            LangArg::Target => Lang::Target,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Naive,
    MemoInt,
    MemoList,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Naive => Mode::Naive,
            ModeArg::MemoInt => Mode::Memo(KeyMode::IntegerIndex),
            ModeArg::MemoList => Mode::Memo(KeyMode::TagList),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Tsv,
    Jsonl,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Tsv => ReportFormat::Tsv,
            FormatArg::Jsonl => ReportFormat::JsonLines,
        }
    }
}

/// A failure to report on stderr, with its exit code.
struct Failure {
    message: String,
    code: i32,
}

fn fail(err: impl Display) -> Failure {
    Failure { message: err.to_string(), code: 1 }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => exit(code),
        Err(f) => {
            eprintln!("{}", f.message);
            exit(f.code);
        }
    }
}

fn engine_config(cli: &Cli) -> EngineConfig {
    let mut config = match &cli.fixtures {
        Some(dir) => EngineConfig::from_dir(dir),
        None => EngineConfig::default(),
    };
    config.goal = cli.goal.clone();
    config
}

fn build_engine(cli: &Cli) -> Result<Engine, Failure> {
    Engine::new(&engine_config(cli)).map_err(fail)
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Parse { sentence, lang } => cmd_parse(cli, sentence, (*lang).into()),
        Command::Transfer { sentence } => cmd_transfer(cli, sentence),
        Command::Generate {
            bag_file,
            from,
            lang,
            mode,
            first,
            distinct,
            share_memo,
            stats,
        } => cmd_generate(
            cli,
            bag_file.as_deref(),
            from.as_deref(),
            (*lang).into(),
            (*mode).into(),
            GenFlags {
                first: *first,
                distinct: *distinct,
                share_memo: *share_memo,
                stats: *stats,
            },
        ),
        Command::Translate { sentence, mode, first, distinct, share_memo, stats } => cmd_translate(
            cli,
            sentence,
            (*mode).into(),
            GenFlags {
                first: *first,
                distinct: *distinct,
                share_memo: *share_memo,
                stats: *stats,
            },
        ),
        Command::Bench { format, runs, per_bag, modes } => cmd_bench(
            cli,
            (*format).into(),
            *runs,
            *per_bag,
            modes.iter().map(|&m| m.into()).collect(),
        ),
    }
}

struct GenFlags {
    first: bool,
    distinct: bool,
    share_memo: bool,
    stats: bool,
}

fn cmd_parse(cli: &Cli, sentence: &str, lang: Lang) -> Result<i32, Failure> {
    let engine = build_engine(cli)?;
    let parses = engine.parse(lang, sentence).map_err(fail)?;
    if parses.is_empty() {
        return Err(fail(format!("no parse: {sentence}")));
    }
    for (i, parse) in parses.iter().enumerate() {
        println!("%% parse {}", i + 1);
        print!("{}", render_bag(&shakenbake::generator::tag_bag(&parse.bag)));
    }
    Ok(0)
}

fn cmd_transfer(cli: &Cli, sentence: &str) -> Result<i32, Failure> {
    let engine = build_engine(cli)?;
    let parses = engine.parse(Lang::Source, sentence).map_err(fail)?;
    if parses.is_empty() {
        return Err(fail(format!("no parse: {sentence}")));
    }
    let mut bag_no = 0;
    for parse in &parses {
        let result = engine.transfer(&parse.bag).map_err(fail)?;
        for i in 0..result.len() {
            bag_no += 1;
            println!("%% bag {bag_no}");
            let tagged: Vec<TaggedSign> = result
                .tagged_bag(i)
                .into_iter()
                .map(|(tag, sign)| TaggedSign { tag, sign })
                .collect();
            print!("{}", render_bag(&tagged));
        }
    }
    Ok(0)
}

fn cmd_generate(
    cli: &Cli,
    bag_file: Option<&std::path::Path>,
    from: Option<&str>,
    lang: Lang,
    mode: Mode,
    flags: GenFlags,
) -> Result<i32, Failure> {
    let engine = build_engine(cli)?;
    // Assemble the bags and decide whether output lines carry bag labels:
    // they do whenever the input distinguishes bags (section headers or
    // multiple parses).
    let (bags, labeled) = match (bag_file, from) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                fail(format!("file error: {}: {e}", path.display()))
            })?;
            let bags = parse_bag_file(&text).map_err(fail)?;
            if bags.is_empty() {
                return Err(fail(format!("file error: {}: no signs", path.display())));
            }
            let labeled = text.lines().any(|l| l.trim_start().starts_with("%%"));
            (bags, labeled)
        }
        (None, Some(sentence)) => {
            let parses = engine.parse(lang, sentence).map_err(fail)?;
            if parses.is_empty() {
                return Err(fail(format!("no parse: {sentence}")));
            }
            let bags: Vec<Vec<TaggedSign>> = parses
                .iter()
                .map(|p| shakenbake::generator::tag_bag(&p.bag))
                .collect();
            let labeled = bags.len() > 1;
            (bags, labeled)
        }
        _ => return Err(fail("give a bag file or --from <sentence>")),
    };

    let (grammar, goal) = match lang {
        Lang::Source => (&engine.source_grammar, &engine.source_goal),
        Lang::Target => (&engine.target_grammar, &engine.target_goal),
    };
    let cap = flags.first.then_some(1);
    let mut totals = StatTotals::default();

    let emit = |bag_no: usize, outcomes: &[shakenbake::generator::GenOutcome]| {
        let mut seen = Vec::new();
        for outcome in outcomes {
            let sentence = outcome.sentence.join(" ");
            if flags.distinct && seen.contains(&sentence) {
                continue;
            }
            if labeled {
                println!("bag {bag_no}: {sentence}");
            } else {
                println!("{sentence}");
            }
            if cli.dump_signs {
                println!("% root: {}", outcome.root.render());
            }
            seen.push(sentence);
        }
    };

    if flags.share_memo {
        let mut session = Generator::new(grammar, mode);
        for (i, bag) in bags.iter().enumerate() {
            if i > 0 {
                session.next_epoch();
            }
            let outcomes = session.generate(bag, goal, cap).map_err(fail)?;
            emit(i + 1, &outcomes);
        }
        totals.add(&memo_stats(session.memo()), session.rule_calls());
        totals.cross_bag_hits = Some(session.memo().cross_epoch_hits());
    } else {
        for (i, bag) in bags.iter().enumerate() {
            let run = engine.generate(lang, bag, mode, cap).map_err(fail)?;
            emit(i + 1, &run.outcomes);
            totals.add(&run.stats, run.rule_calls);
        }
    }
    if flags.stats {
        totals.print();
    }
    Ok(0)
}

fn cmd_translate(
    cli: &Cli,
    sentence: &str,
    mode: Mode,
    flags: GenFlags,
) -> Result<i32, Failure> {
    let engine = build_engine(cli)?;
    let options = TranslateOptions {
        mode,
        share_memo: flags.share_memo,
        max_per_bag: flags.first.then_some(1),
    };
    let translation = match engine.translate(sentence, &options) {
        Ok(t) => t,
        Err(e @ EngineError::NoParse(_)) => {
            return Err(Failure { message: e.to_string(), code: 2 })
        }
        Err(e) => return Err(fail(e)),
    };

    if cli.dump_signs {
        dump_translation_signs(&engine, sentence, &translation)?;
    }
    let mut printed = 0usize;
    for bag in &translation.bags {
        let mut seen = Vec::new();
        for outcome in &bag.outcomes {
            let text = outcome.sentence.join(" ");
            if flags.distinct && seen.contains(&text) {
                continue;
            }
            println!("bag {}: {text}", bag.number);
            printed += 1;
            seen.push(text);
        }
    }
    if flags.stats {
        println!("parses: {}", translation.parse_count);
        println!(
            "bags: {} ({} productive)",
            translation.bags.len(),
            translation.productive_bags()
        );
        let mut totals = StatTotals::default();
        totals.add(&translation.stats, translation.rule_calls);
        if flags.share_memo {
            totals.cross_bag_hits = Some(translation.cross_bag_hits);
        }
        totals.print();
    }
    if printed == 0 {
        eprintln!("no output: every target bag is unproductive");
        return Ok(2);
    }
    Ok(0)
}

fn dump_translation_signs(
    engine: &Engine,
    sentence: &str,
    translation: &Translation,
) -> Result<(), Failure> {
    let parses = engine.parse(Lang::Source, sentence).map_err(fail)?;
    for (i, parse) in parses.iter().enumerate() {
        println!("%% source bag {}", i + 1);
        print!("{}", render_bag(&shakenbake::generator::tag_bag(&parse.bag)));
    }
    for bag in &translation.bags {
        println!("%% target bag {}", bag.number);
        let tagged: Vec<TaggedSign> = bag
            .signs
            .iter()
            .enumerate()
            .map(|(i, sign)| TaggedSign { tag: i as u32 + 1, sign: sign.clone() })
            .collect();
        print!("{}", render_bag(&tagged));
    }
    Ok(())
}

fn cmd_bench(
    cli: &Cli,
    format: ReportFormat,
    runs: usize,
    per_bag: bool,
    modes: Vec<Mode>,
) -> Result<i32, Failure> {
    let config = engine_config(cli);
    let sentences = shakenbake::fixtures::BENCH_SENTENCES;
    let report = run_bench(&config, &sentences, &BenchOptions { modes, runs, per_bag })
        .map_err(fail)?;
    print!("{}", emit_report(&report, format));
    if format != ReportFormat::Table {
        // The table embeds the checks; machine formats keep stdout clean and
        // report them on stderr.
        for check in &report.checks {
            let mark = if check.passed { "ok  " } else { "FAIL" };
            eprintln!("{mark} {} ({})", check.name, check.detail);
        }
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}

/// Counter aggregation across bags for `--stats`.
#[derive(Default)]
struct StatTotals {
    hits: u64,
    misses: u64,
    rule_calls: u64,
    cross_bag_hits: Option<u64>,
}

impl StatTotals {
    fn add(&mut self, stats: &MemoStats, rule_calls: u64) {
        self.hits += stats.hits;
        self.misses += stats.misses;
        self.rule_calls += rule_calls;
    }

    fn print(&self) {
        let calls = self.hits + self.misses;
        println!("calls: {calls}");
        println!("hits: {}", self.hits);
        println!("misses: {}", self.misses);
        let ratio = if calls == 0 { 0.0 } else { self.hits as f64 / calls as f64 };
        println!("hit ratio: {ratio:.2}");
        println!("rule calls: {}", self.rule_calls);
        if let Some(cross) = self.cross_bag_hits {
            println!("cross-bag hits: {cross}");
        }
    }
}
