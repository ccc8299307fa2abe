//! Instrumentation and reporting: the closed-form call-count oracle, the
//! benchmark harness over the three fixture sentences, and report emission.
//!
//! The central quantity is the number of `unordered_rule` invocations a
//! single generator state triggers. With a stack of `s` signs and a maximum
//! rule arity of `n`, the top sign participates in every reduction attempt
//! and the remaining `i − 1` daughters are drawn from the other `s − 1`:
//!
//! ```text
//! predicted_calls(s, n) = Σ_{i=1..min(n,s)} C(s−1, i−1)
//! ```
//!
//! The benchmark rows mirror that analysis empirically. Each fixture
//! sentence is parsed, transferred, and its single grammatical target bag is
//! generated exhaustively under every requested mode, with first-sentence
//! and total-enumeration wall times taken as the median of `runs` repeats.
//! Call counts are reported per target bag; the headline row for a sentence
//! is the grammatical bag's run (sentence-level sums are what
//! `translate --stats` prints). With `per_bag` set, every target bag gets
//! its own row after the headline row.

use crate::generator::{tag_bag, KeyMode, Mode};
use crate::parser::SignBag;
use crate::pipeline::{Engine, EngineConfig, GenRunReport, Lang};
use serde::Serialize;
use std::time::Instant;

/// Exact binomial coefficient (panics on overflow of u64, which the bench
/// ranges never approach).
fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial fits in u64")
}

/// Predicted number of reduction calls a generator state issues from a
/// stack of `s` signs under maximum branching `n`.
///
/// Exact integer arithmetic; panics if `s` or `n` is zero.
pub fn predicted_calls(s: usize, n: usize) -> u64 {
    assert!(s >= 1, "stack size must be positive, got {s}");
    assert!(n >= 1, "branching factor must be positive, got {n}");
    (1..=n.min(s)).map(|i| choose(s as u64 - 1, i as u64 - 1)).sum()
}

/// A (stack size, branching factor) point with its predicted call count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CallCountModel {
    pub s: usize,
    pub n: usize,
    pub predicted: u64,
}

impl CallCountModel {
    pub fn new(s: usize, n: usize) -> CallCountModel {
        CallCountModel { s, n, predicted: predicted_calls(s, n) }
    }
}

/// One benchmark row. Timing fields are `None` when the mode was not
/// requested; counters come from the memo runs (zero under naive-only).
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub sentence: String,
    pub bag_size: usize,
    pub calls: u64,
    pub naive_first_s: Option<f64>,
    pub naive_total_s: Option<f64>,
    pub memo_int_first_s: Option<f64>,
    pub memo_int_total_s: Option<f64>,
    pub memo_list_first_s: Option<f64>,
    pub memo_list_total_s: Option<f64>,
    pub hits: u64,
    pub hit_ratio: f64,
    /// naive total time over memo-int total time, when both were run.
    pub speedup: Option<f64>,
}

impl BenchRow {
    /// The row with timing data blanked, for determinism comparisons.
    pub fn without_timings(&self) -> BenchRow {
        BenchRow {
            naive_first_s: None,
            naive_total_s: None,
            memo_int_first_s: None,
            memo_int_total_s: None,
            memo_list_first_s: None,
            memo_list_total_s: None,
            speedup: None,
            ..self.clone()
        }
    }
}

/// A property assertion evaluated during the run.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The benchmark report: one headline row per sentence (the grammatical
/// bag's run), optional per-bag rows, and the evaluated property checks.
#[derive(Debug, Clone, Serialize)]
pub struct GenReport {
    pub rows: Vec<BenchRow>,
    pub checks: Vec<BenchCheck>,
    pub runs: usize,
}

impl GenReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("no modes requested")]
    NoModes,
    #[error("no sentences given")]
    NoSentences,
    #[error(transparent)]
    Build(#[from] crate::pipeline::BuildError),
    #[error("{sentence}: {message}")]
    Stage { sentence: String, message: String },
}

/// Benchmark options beyond the mode list.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub modes: Vec<Mode>,
    /// Repeats per timing measurement; the median is reported.
    pub runs: usize,
    /// Also emit one row per target bag after each sentence's headline row.
    pub per_bag: bool,
}

impl Default for BenchOptions {
    fn default() -> BenchOptions {
        BenchOptions {
            modes: vec![
                Mode::Naive,
                Mode::Memo(KeyMode::IntegerIndex),
                Mode::Memo(KeyMode::TagList),
            ],
            runs: 5,
            per_bag: false,
        }
    }
}

/// A fully measured row plus the per-mode evidence the checks need.
struct RowMeasurement {
    row: BenchRow,
    mode_sentences: Vec<(Mode, Vec<String>)>,
    memo_counters: Vec<(Mode, u64, u64)>,
}

/// Time every mode on one bag. Repeats interleave the modes so a transient
/// load spike on the host penalizes them all evenly; each mode reports the
/// median of its `runs` first-sentence and total-enumeration timings.
fn measure_row(
    engine: &Engine,
    bag: &SignBag,
    id: &str,
    modes: &[Mode],
    runs: usize,
) -> RowMeasurement {
    let mut firsts: Vec<Vec<f64>> = vec![Vec::new(); modes.len()];
    let mut totals: Vec<Vec<f64>> = vec![Vec::new(); modes.len()];
    let mut reference: Vec<Option<GenRunReport>> = modes.iter().map(|_| None).collect();
    for _ in 0..runs {
        for (mi, &mode) in modes.iter().enumerate() {
            let (t, _) =
                generate_once(engine, bag, mode, Some(1)).expect("bag was already generated");
            firsts[mi].push(t);
            let (t, run) =
                generate_once(engine, bag, mode, None).expect("bag was already generated");
            totals[mi].push(t);
            reference[mi] = Some(run);
        }
    }

    let mut row = blank_row(id, bag.signs.len());
    let mut mode_sentences = Vec::new();
    let mut memo_counters = Vec::new();
    for (mi, &mode) in modes.iter().enumerate() {
        let first_s = median(firsts[mi].clone());
        let total_s = median(totals[mi].clone());
        let run = reference[mi].take().expect("runs >= 1");
        match mode {
            Mode::Naive => {
                row.naive_first_s = Some(first_s);
                row.naive_total_s = Some(total_s);
            }
            Mode::Memo(KeyMode::IntegerIndex) => {
                row.memo_int_first_s = Some(first_s);
                row.memo_int_total_s = Some(total_s);
            }
            Mode::Memo(KeyMode::TagList) => {
                row.memo_list_first_s = Some(first_s);
                row.memo_list_total_s = Some(total_s);
            }
        }
        if let Mode::Memo(_) = mode {
            memo_counters.push((mode, run.stats.hits, run.stats.calls));
        }
        mode_sentences.push((mode, run.outcomes.iter().map(|o| o.sentence.join(" ")).collect()));
    }
    if let Some(&(_, hits, calls)) = memo_counters.first() {
        row.hits = hits;
        row.calls = calls;
        row.hit_ratio = if calls == 0 { 0.0 } else { hits as f64 / calls as f64 };
    }
    if let (Some(naive), Some(memo)) = (row.naive_total_s, row.memo_int_total_s) {
        row.speedup = if memo > 0.0 { Some(naive / memo) } else { None };
    }
    RowMeasurement { row, mode_sentences, memo_counters }
}

pub fn run_bench(
    config: &EngineConfig,
    sentences: &[&str],
    options: &BenchOptions,
) -> Result<GenReport, BenchError> {
    if options.modes.is_empty() {
        return Err(BenchError::NoModes);
    }
    if sentences.is_empty() {
        return Err(BenchError::NoSentences);
    }
    let engine = Engine::new(config)?;
    let runs = options.runs.max(1);
    let mut report = GenReport { rows: Vec::new(), checks: Vec::new(), runs };
    let mut headline_rows: Vec<usize> = Vec::new();

    for (si, sentence) in sentences.iter().enumerate() {
        let id = format!("s{}", si + 1);
        let stage_err = |message: String| BenchError::Stage { sentence: id.clone(), message };

        let parses = engine
            .parse(Lang::Source, sentence)
            .map_err(|e| stage_err(e.to_string()))?;
        let parse = parses.first().ok_or_else(|| stage_err(format!("no parse: {sentence}")))?;
        let result = engine.transfer(&parse.bag).map_err(|e| stage_err(e.to_string()))?;

        // Scan every target bag once (first requested mode) to locate the
        // grammatical one.
        let mut productive: Vec<usize> = Vec::new();
        for b in 0..result.len() {
            let bag = result.bag(b);
            let scan = generate_once(&engine, &bag, options.modes[0], None)
                .map_err(|e| stage_err(e.to_string()))?;
            if !scan.1.outcomes.is_empty() {
                productive.push(b);
            }
        }
        report.checks.push(BenchCheck {
            name: format!("{id}: exactly one productive target bag"),
            passed: productive.len() == 1,
            detail: format!("{} of {} bags productive", productive.len(), result.len()),
        });
        let grammatical = productive.first().copied().unwrap_or(0);
        let bag = result.bag(grammatical);

        let RowMeasurement { row, mode_sentences, memo_counters } =
            measure_row(&engine, &bag, &id, &options.modes, runs);

        // Property: all requested modes enumerate the same sentence multiset.
        if let Some((first_mode, reference)) = mode_sentences.first().cloned() {
            let mut sorted_ref = reference;
            sorted_ref.sort();
            let mut agree = true;
            let mut detail = format!("{} sentences", sorted_ref.len());
            for (mode, sents) in &mode_sentences[1..] {
                let mut s = sents.clone();
                s.sort();
                if s != sorted_ref {
                    agree = false;
                    detail = format!("{mode:?} disagrees with {first_mode:?}");
                }
            }
            report.checks.push(BenchCheck {
                name: format!("{id}: modes agree on the sentence multiset"),
                passed: agree,
                detail,
            });
        }
        // Property: key modes count identically.
        if memo_counters.len() == 2 {
            let (_, h0, c0) = memo_counters[0];
            let (_, h1, c1) = memo_counters[1];
            report.checks.push(BenchCheck {
                name: format!("{id}: key modes agree on counters"),
                passed: h0 == h1 && c0 == c1,
                detail: format!("hits {h0}/{h1}, calls {c0}/{c1}"),
            });
        }

        headline_rows.push(report.rows.len());
        report.rows.push(row);

        if options.per_bag {
            for b in 0..result.len() {
                let bag = result.bag(b);
                let bag_id = format!("{id}.b{}", b + 1);
                let m = measure_row(&engine, &bag, &bag_id, &options.modes, runs);
                report.rows.push(m.row);
            }
        }
    }

    // Property: counter law on every headline row that memoized.
    for &ri in &headline_rows {
        let row = &report.rows[ri];
        if row.calls > 0 {
            report.checks.push(BenchCheck {
                name: format!("{}: hit ratio is hits / calls", row.sentence),
                passed: (row.hit_ratio - row.hits as f64 / row.calls as f64).abs() < 1e-12,
                detail: format!("{} / {} = {:.2}", row.hits, row.calls, row.hit_ratio),
            });
        }
    }

    // Property: hit ratio strictly increasing across the headline rows
    // (only meaningful when every headline row memoized).
    let ratios: Vec<(String, f64)> = headline_rows
        .iter()
        .map(|&ri| (report.rows[ri].sentence.clone(), report.rows[ri].hit_ratio))
        .collect();
    if ratios.len() >= 2 && headline_rows.iter().all(|&ri| report.rows[ri].calls > 0) {
        let increasing = ratios.windows(2).all(|w| w[0].1 < w[1].1);
        report.checks.push(BenchCheck {
            name: "hit ratio strictly increasing across sentences".into(),
            passed: increasing,
            detail: ratios
                .iter()
                .map(|(id, r)| format!("{id} {r:.2}"))
                .collect::<Vec<_>>()
                .join(" → "),
        });
    }

    // Property: on the largest bag, memoized total enumeration is at least
    // as fast as naive.
    if let Some(&ri) = headline_rows.iter().max_by_key(|&&ri| report.rows[ri].bag_size) {
        let row = &report.rows[ri];
        if let Some(speedup) = row.speedup {
            report.checks.push(BenchCheck {
                name: format!("{}: memo-int total ≤ naive total on the largest bag", row.sentence),
                passed: speedup >= 1.0,
                detail: format!("speedup {speedup:.2}"),
            });
        }
    }

    Ok(report)
}

fn blank_row(id: &str, bag_size: usize) -> BenchRow {
    BenchRow {
        sentence: id.to_string(),
        bag_size,
        calls: 0,
        naive_first_s: None,
        naive_total_s: None,
        memo_int_first_s: None,
        memo_int_total_s: None,
        memo_list_first_s: None,
        memo_list_total_s: None,
        hits: 0,
        hit_ratio: 0.0,
        speedup: None,
    }
}

fn generate_once(
    engine: &Engine,
    bag: &SignBag,
    mode: Mode,
    cap: Option<usize>,
) -> Result<(f64, GenRunReport), crate::pipeline::EngineError> {
    let tagged = tag_bag(bag);
    let start = Instant::now();
    let run = engine.generate(Lang::Target, &tagged, mode, cap)?;
    Ok((start.elapsed().as_secs_f64(), run))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Tsv,
    JsonLines,
}

const COLUMNS: [&str; 12] = [
    "sentence",
    "bag_size",
    "calls",
    "naive_first_s",
    "naive_total_s",
    "memo_int_first_s",
    "memo_int_total_s",
    "memo_list_first_s",
    "memo_list_total_s",
    "hits",
    "hit_ratio",
    "speedup",
];

fn cells(row: &BenchRow) -> Vec<String> {
    let time = |t: Option<f64>| t.map_or("-".to_string(), |v| format!("{v:.6}"));
    vec![
        row.sentence.clone(),
        row.bag_size.to_string(),
        row.calls.to_string(),
        time(row.naive_first_s),
        time(row.naive_total_s),
        time(row.memo_int_first_s),
        time(row.memo_int_total_s),
        time(row.memo_list_first_s),
        time(row.memo_list_total_s),
        row.hits.to_string(),
        format!("{:.2}", row.hit_ratio),
        row.speedup.map_or("-".to_string(), |v| format!("{v:.2}")),
    ]
}

/// Render the report rows. Column order is fixed; the hit ratio is printed
/// to two decimal places; times are seconds. `Table` appends the property
/// checks; `Tsv` and `JsonLines` emit rows only.
pub fn emit_report(report: &GenReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => {
            let mut out = COLUMNS.join("\t");
            out.push('\n');
            for row in &report.rows {
                out.push_str(&cells(row).join("\t"));
                out.push('\n');
            }
            out
        }
        ReportFormat::JsonLines => {
            let mut out = String::new();
            for row in &report.rows {
                out.push_str(&serde_json::to_string(row).expect("rows serialize"));
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let rows: Vec<Vec<String>> = report.rows.iter().map(cells).collect();
            let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let emit_line = |out: &mut String, cells: &[String]| {
                let line: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}", w = w))
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
            };
            emit_line(&mut out, &COLUMNS.iter().map(|c| c.to_string()).collect::<Vec<_>>());
            for row in &rows {
                emit_line(&mut out, row);
            }
            if !report.checks.is_empty() {
                out.push('\n');
                for check in &report.checks {
                    let mark = if check.passed { "ok  " } else { "FAIL" };
                    out.push_str(&format!("{mark} {} ({})\n", check.name, check.detail));
                }
            }
            out
        }
    }
}
