//! Acceptance suite: one test per release criterion, each printing a single
//! PASS line on success (run with `--nocapture` to see them alongside the
//! per-test result lines).

use shakenbake::bench::{predicted_calls, run_bench, BenchOptions};
use shakenbake::fixtures;
use shakenbake::generator::{
    calc_index, probe_reduction_calls, shake_generate, tag_bag, Generator, KeyMode, Mode, Tag,
    TaggedSign,
};
use shakenbake::grammar::{Grammar, Rule};
use shakenbake::pipeline::{Engine, EngineConfig, TranslateOptions};
use shakenbake::Template;
use num_bigint::BigUint;
use std::collections::HashSet;

fn engine() -> Engine {
    Engine::new(&EngineConfig::default()).expect("fixtures compile")
}

/// All of a sentence's target bags, via parse → transfer.
fn target_bags(engine: &Engine, sentence: &str) -> Vec<Vec<TaggedSign>> {
    let parses = engine.parse(shakenbake::pipeline::Lang::Source, sentence).unwrap();
    assert_eq!(parses.len(), 1, "fixture sentences parse uniquely");
    let result = engine.transfer(&parses[0].bag).unwrap();
    (0..result.len()).map(|i| tag_bag(&result.bag(i))).collect()
}

fn sentences_of(
    grammar: &Grammar,
    goal: &Template,
    bag: &[TaggedSign],
    mode: Mode,
) -> Vec<String> {
    let mut session = Generator::new(grammar, mode);
    let outcomes = session.generate(bag, goal, None).unwrap();
    outcomes.iter().map(|o| o.sentence.join(" ")).collect()
}

#[test]
fn criterion_1_closed_form_call_count_matches_brute_force() {
    // Independent oracle: count the subsets by explicit bitmask enumeration.
    fn oracle(s: usize, n: usize) -> u64 {
        let pool = s - 1;
        let mut count = 0u64;
        for i in 1..=n.min(s) {
            count += (0u32..1 << pool)
                .filter(|m| m.count_ones() as usize == i - 1)
                .count() as u64;
        }
        count
    }
    for s in 1..=12 {
        for n in 1..=6 {
            assert_eq!(predicted_calls(s, n), oracle(s, n), "s={s} n={n}");
        }
    }
    for n in 1..=6 {
        assert_eq!(predicted_calls(1, n), 1, "one call from a singleton stack");
    }
    for n in 2..=6 {
        assert_eq!(predicted_calls(2, n), 2, "two calls from a two-sign stack");
    }
    for n in 3..=6 {
        assert_eq!(predicted_calls(3, n), 4, "four calls from a three-sign stack");
    }
    println!("PASS: criterion 1 — predicted_calls matches brute-force subset enumeration");
}

#[test]
fn criterion_2_per_state_call_counts_obey_the_law() {
    let make_grammar = |n: usize| -> Grammar {
        let rules = (1..=n)
            .map(|arity| Rule {
                id: format!("fail{arity}"),
                mother: Template::record(vec![("head", Template::atom("never"))]),
                daughters: (0..arity)
                    .map(|_| Template::record(vec![("head", Template::atom("nope"))]))
                    .collect(),
                head_position: 0,
                constraints: vec![],
                line: 0,
            })
            .collect();
        Grammar::from_rules("always-fail", rules, vec![("s".into(), Template::atom("x"))])
    };
    for n in [2usize, 3, 4] {
        let grammar = make_grammar(n);
        for s in 1..=8usize {
            let stack: Vec<TaggedSign> = (1..=s)
                .map(|t| TaggedSign {
                    tag: t as Tag,
                    sign: Template::record(vec![("head", Template::atom("sign"))]),
                })
                .collect();
            for mode in [
                Mode::Naive,
                Mode::Memo(KeyMode::IntegerIndex),
                Mode::Memo(KeyMode::TagList),
            ] {
                assert_eq!(
                    probe_reduction_calls(&grammar, &stack, mode),
                    predicted_calls(s, n),
                    "s={s} n={n} mode={mode:?}"
                );
            }
        }
    }
    println!("PASS: criterion 2 — per-state reduction calls equal predicted_calls(s, n)");
}

#[test]
fn criterion_3_subset_index_is_sound() {
    // Exhaustive over {1..12}: permutation-invariant and injective.
    let mut seen: HashSet<BigUint> = HashSet::new();
    for mask in 0u32..(1 << 12) {
        let tags: Vec<Tag> = (1..=12).filter(|t| mask & (1 << (t - 1)) != 0).collect();
        let reversed: Vec<Tag> = tags.iter().rev().copied().collect();
        let index = calc_index(&tags);
        assert_eq!(index, calc_index(&reversed), "order must not matter");
        assert!(seen.insert(index), "distinct sets must get distinct indices");
    }
    assert_eq!(seen.len(), 1 << 12);

    // Random pairs from {1..200}: arbitrary-precision, still injective.
    fn xorshift(state: &mut u64) -> u64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        *state
    }
    fn random_set(state: &mut u64) -> Vec<Tag> {
        let size = (xorshift(state) % 20 + 1) as usize;
        let mut set = HashSet::new();
        while set.len() < size {
            set.insert((xorshift(state) % 200 + 1) as Tag);
        }
        let mut tags: Vec<Tag> = set.into_iter().collect();
        tags.sort_unstable();
        for i in (1..tags.len()).rev() {
            let j = (xorshift(state) % (i as u64 + 1)) as usize;
            tags.swap(i, j);
        }
        tags
    }
    let mut state: u64 = 0x5eed_cafe_f00d_1234;
    for _ in 0..10_000 {
        let a = random_set(&mut state);
        let b = random_set(&mut state);
        let mut sa: Vec<Tag> = a.clone();
        sa.sort_unstable();
        let mut sb: Vec<Tag> = b.clone();
        sb.sort_unstable();
        assert_eq!(calc_index(&a), calc_index(&sa), "permutation invariance");
        assert_eq!(calc_index(&b), calc_index(&sb), "permutation invariance");
        if sa != sb {
            assert_ne!(calc_index(&a), calc_index(&b), "injective on {sa:?} vs {sb:?}");
        } else {
            assert_eq!(calc_index(&a), calc_index(&b));
        }
    }
    println!("PASS: criterion 3 — calc_index is permutation-invariant and injective");
}

#[test]
fn criterion_4_modes_generate_identical_sentence_multisets() {
    let engine = engine();
    let grammar = &engine.target_grammar;
    let goal = &engine.target_goal;
    let expected_bags = [1usize, 2, 16];
    let mut total = 0;
    for (si, sentence) in fixtures::BENCH_SENTENCES.iter().enumerate() {
        let bags = target_bags(&engine, sentence);
        assert_eq!(bags.len(), expected_bags[si], "{sentence}");
        for (bi, bag) in bags.iter().enumerate() {
            let mut naive = sentences_of(grammar, goal, bag, Mode::Naive);
            let mut memo_int =
                sentences_of(grammar, goal, bag, Mode::Memo(KeyMode::IntegerIndex));
            let mut memo_list = sentences_of(grammar, goal, bag, Mode::Memo(KeyMode::TagList));
            naive.sort();
            memo_int.sort();
            memo_list.sort();
            assert_eq!(naive, memo_int, "bag {bi} of '{sentence}'");
            assert_eq!(naive, memo_list, "bag {bi} of '{sentence}'");
            total += 1;
        }
    }
    assert_eq!(total, 19);
    println!("PASS: criterion 4 — naive, memo-int and memo-list agree on all 19 target bags");
}

#[test]
fn criterion_5_end_to_end_translation() {
    let engine = engine();
    let options = TranslateOptions::default();

    let t1 = engine.translate("john loves mary", &options).unwrap();
    let sentences: Vec<(usize, String)> = t1.sentences().collect();
    assert_eq!(sentences, vec![(1, "jean aime marie".to_string())], "exact output");
    assert_eq!(t1.bags.len(), 1);

    let t2 = engine.translate("kim gives the cookie to mary", &options).unwrap();
    assert_eq!(t2.bags.len(), 2, "two target bags");
    assert_eq!(t2.productive_bags(), 1, "exactly one is grammatical");
    assert!(t2.total_sentences() >= 1);

    let t3 = engine
        .translate("mary gives the good cat to the small girl", &options)
        .unwrap();
    assert_eq!(t3.bags.len(), 16, "sixteen target bags");
    assert_eq!(t3.productive_bags(), 1, "exactly one is grammatical");
    assert!(t3.total_sentences() >= 1);
    println!(
        "PASS: criterion 5 — 'john loves mary' → 'jean aime marie'; bag counts 1/2/16 with one productive bag each"
    );
}

#[test]
fn criterion_6_counter_laws_and_rising_hit_ratio() {
    let engine = engine();
    let grammar = &engine.target_grammar;
    let goal = &engine.target_goal;
    let mut ratios = Vec::new();
    for sentence in fixtures::BENCH_SENTENCES {
        let bags = target_bags(&engine, sentence);
        let grammatical = bags
            .iter()
            .find(|bag| {
                !sentences_of(grammar, goal, bag, Mode::Memo(KeyMode::IntegerIndex)).is_empty()
            })
            .expect("one productive bag");
        for mode in [Mode::Memo(KeyMode::IntegerIndex), Mode::Memo(KeyMode::TagList)] {
            let run =
                shake_generate(grammar, &untag(grammatical), goal, mode, None).unwrap();
            assert_eq!(run.stats.calls, run.stats.hits + run.stats.misses, "counter law");
            let printed = format!("{:.2}", run.stats.hit_ratio);
            let reparsed: f64 = printed.parse().unwrap();
            let true_ratio = run.stats.hits as f64 / run.stats.calls as f64;
            assert!(
                (reparsed - true_ratio).abs() <= 0.005 + 1e-12,
                "printed ratio {printed} vs {true_ratio}"
            );
            if mode == Mode::Memo(KeyMode::IntegerIndex) {
                ratios.push(run.stats.hit_ratio);
            }
        }
    }
    assert!(
        ratios.windows(2).all(|w| w[0] < w[1]),
        "hit ratio must rise with bag size: {ratios:?}"
    );
    println!(
        "PASS: criterion 6 — counter laws hold and the hit ratio rises: {:.2} → {:.2} → {:.2}",
        ratios[0], ratios[1], ratios[2]
    );
}

fn untag(bag: &[TaggedSign]) -> shakenbake::parser::SignBag {
    shakenbake::parser::SignBag { signs: bag.iter().map(|t| t.sign.clone()).collect() }
}

#[test]
fn criterion_7_memoization_does_not_lose_on_the_nine_sign_bag() {
    let report = run_bench(
        &EngineConfig::default(),
        &["mary gives the good cat to the small girl"],
        &BenchOptions {
            modes: vec![Mode::Naive, Mode::Memo(KeyMode::IntegerIndex)],
            runs: 5,
            per_bag: false,
        },
    )
    .unwrap();
    let row = &report.rows[0];
    assert_eq!(row.bag_size, 9);
    let speedup = row.speedup.expect("speedup recorded in the report");
    assert!(speedup >= 1.0, "memo-int total must not exceed naive total: {speedup:.3}");
    let check = report
        .checks
        .iter()
        .find(|c| c.name.contains("memo-int total ≤ naive total"))
        .expect("the report records the comparison");
    assert!(check.passed, "{}", check.detail);
    println!(
        "PASS: criterion 7 — memo-int beats naive on the 9-sign bag (speedup {speedup:.2}, recorded in the report)"
    );
}

#[test]
fn criterion_8_every_hit_replays_what_naive_recomputation_builds() {
    let engine = engine();
    let grammar = &engine.target_grammar;
    let goal = &engine.target_goal;
    let mut hits_audited = 0u64;
    for sentence in fixtures::BENCH_SENTENCES {
        for bag in target_bags(&engine, sentence) {
            for key_mode in [KeyMode::IntegerIndex, KeyMode::TagList] {
                let mut session = Generator::new(grammar, Mode::Memo(key_mode));
                session.set_audit_hits(true);
                session.generate(&bag, goal, None).unwrap();
                assert!(
                    session.audit_errors().is_empty(),
                    "impure hit: {:?}",
                    session.audit_errors()
                );
                hits_audited += session.memo().hits();
            }
        }
    }
    assert!(hits_audited > 0, "the audit must actually cover hits");
    println!(
        "PASS: criterion 8 — {hits_audited} memo hits audited against fresh naive recomputation"
    );
}

#[test]
fn criterion_9_carried_memo_table_is_sound_across_bags() {
    let engine = engine();
    let grammar = &engine.target_grammar;
    let goal = &engine.target_goal;
    let parses = engine
        .parse(shakenbake::pipeline::Lang::Source, "kim gives the cookie to mary")
        .unwrap();
    let result = engine.transfer(&parses[0].bag).unwrap();
    assert_eq!(result.len(), 2);
    let as_tagged = |i: usize| -> Vec<TaggedSign> {
        result
            .tagged_bag(i)
            .into_iter()
            .map(|(tag, sign)| TaggedSign { tag, sign })
            .collect()
    };
    let bag1 = as_tagged(0);
    let bag2 = as_tagged(1);

    // Fresh-table reference for bag 2.
    let mut fresh = Generator::new(grammar, Mode::Memo(KeyMode::IntegerIndex));
    let mut fresh_sentences: Vec<String> = fresh
        .generate(&bag2, goal, None)
        .unwrap()
        .iter()
        .map(|o| o.sentence.join(" "))
        .collect();
    fresh_sentences.sort();

    // Carried table: bag 1 first, then bag 2 in a new epoch.
    let mut carried = Generator::new(grammar, Mode::Memo(KeyMode::IntegerIndex));
    let bag1_carried = carried.generate(&bag1, goal, None).unwrap();
    carried.next_epoch();
    let mut carried_sentences: Vec<String> = carried
        .generate(&bag2, goal, None)
        .unwrap()
        .iter()
        .map(|o| o.sentence.join(" "))
        .collect();
    carried_sentences.sort();

    assert_eq!(carried_sentences, fresh_sentences, "same multiset either way");
    let cross = carried.memo().cross_epoch_hits();
    assert!(cross >= 1, "signs shared between the bags must be answered from bag 1's table");

    // The carried run is also consistent for bag 1 itself.
    let mut bag1_fresh = Generator::new(grammar, Mode::Memo(KeyMode::IntegerIndex));
    let sentences = |outcomes: &[shakenbake::generator::GenOutcome]| -> Vec<String> {
        let mut v: Vec<String> = outcomes.iter().map(|o| o.sentence.join(" ")).collect();
        v.sort();
        v
    };
    assert_eq!(
        sentences(&bag1_carried),
        sentences(&bag1_fresh.generate(&bag1, goal, None).unwrap())
    );
    println!(
        "PASS: criterion 9 — carried table reproduces the fresh-table multiset with {cross} cross-bag hits"
    );
}
