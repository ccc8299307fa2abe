//! The five shipped data files (two unilingual lexicons, two rule files, one
//! bilingual lexicon), embedded so the library and its tests work without any
//! filesystem layout assumptions. The CLI can override each with a real path.

pub const ENGLISH_LEX: &str = include_str!("../fixtures/english.lex");
pub const FRENCH_LEX: &str = include_str!("../fixtures/french.lex");
pub const ENGLISH_RULES: &str = include_str!("../fixtures/english.rules");
pub const FRENCH_RULES: &str = include_str!("../fixtures/french.rules");
pub const BILINGUAL_LEX: &str = include_str!("../fixtures/bilingual.lex");

/// The three demo sentences exercised by the benchmark, in size order.
pub const BENCH_SENTENCES: [&str; 3] = [
    "john loves mary",
    "kim gives the cookie to mary",
    "mary gives the good cat to the small girl",
];
