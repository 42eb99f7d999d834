use corefqa::dataset::{Answer, QADataset, QAExample};
use corefqa::metrics::{evaluate, normalize, token_f1, Predictions};
use proptest::prelude::*;

/// Independent oracle: tokens compared by repeated linear search and removal.
fn oracle_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in s.split_whitespace() {
        let lower = raw.to_lowercase();
        let kept: String = lower.chars().filter(|c| c.is_alphanumeric() || !c.is_ascii()).collect();
        // The metric strips a few non-ASCII quotes and dashes too.
        let kept: String = kept
            .chars()
            .filter(|c| {
                !matches!(
                    c,
                    '\u{2018}'
                        | '\u{2019}'
                        | '\u{201C}'
                        | '\u{201D}'
                        | '\u{2013}'
                        | '\u{2014}'
                        | '\u{2026}'
                        | '\u{00AB}'
                        | '\u{00BB}'
                )
            })
            .collect();
        if kept.is_empty() || kept == "a" || kept == "an" || kept == "the" {
            continue;
        }
        out.push(kept);
    }
    out
}

fn oracle_f1(pred: &str, gold: &str) -> f64 {
    let p = oracle_tokens(pred);
    let mut g = oracle_tokens(gold);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let gold_len = g.len() as f64;
    let mut shared = 0.0;
    for t in &p {
        if let Some(i) = g.iter().position(|x| x == t) {
            g.remove(i);
            shared += 1.0;
        }
    }
    if shared == 0.0 {
        return 0.0;
    }
    let precision = shared / p.len() as f64;
    let recall = shared / gold_len;
    2.0 * precision * recall / (precision + recall)
}

const CASES: &[(&str, &str, f64)] = &[
    ("Canadian Hot 100", "Canadian Hot 100", 1.0),
    ("John", "John Frusciante", 2.0 / 3.0),
    ("the chain", "a large chain", 2.0 / 3.0),
    ("My mother", "My mother", 1.0),
    ("mother", "My mother", 2.0 / 3.0),
    ("Bill Clinton", "Mr. Clinton", 0.5),
    ("Al Gore", "his defeated rival", 0.0),
    ("", "Al Gore", 0.0),
    ("Al Gore", "", 0.0),
    ("the", "an", 1.0),
    ("", "", 1.0),
    ("new new york", "new york", 0.8),
    ("york new", "new york", 1.0),
    ("Thelma Wahl", "Thelma", 2.0 / 3.0),
    ("w x y z", "y z u v", 0.5),
    ("a b c d", "c d e f", 4.0 / 7.0),
    ("Diamonds!", "\u{201C}Diamonds\u{201D}", 1.0),
    ("1000 years", "for 1000 years", 0.8),
    ("U.S.", "US", 1.0),
    ("x x x", "x", 0.5),
    ("x", "x x x", 0.5),
    ("Huntingdon, Pennsylvania", "Huntingdon", 2.0 / 3.0),
    ("the the the", "a", 1.0),
    ("Rihanna's single", "Rihanna", 0.0),
    ("it's over", "its over", 1.0),
];

#[test]
fn hand_built_cases_match_oracle() {
    assert!(CASES.len() >= 20);
    for &(pred, gold, expected) in CASES {
        let got = token_f1(pred, &[gold]);
        let oracle = oracle_f1(pred, gold);
        assert!(
            (got - oracle).abs() < 1e-9,
            "{pred:?} vs {gold:?}: {got} != oracle {oracle}"
        );
        assert!(
            (got - expected).abs() < 1e-9,
            "{pred:?} vs {gold:?}: {got} != {expected}"
        );
    }
    assert!((token_f1("John", &["John Frusciante"]) - 0.6667).abs() < 1e-4);
    assert!((token_f1("John", &["John Frusciante"]) - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn max_over_golds() {
    let golds = ["Bill Clinton", "Mr. Clinton", "Clinton"];
    let best = golds.iter().map(|g| oracle_f1("Clinton", g)).fold(0.0, f64::max);
    assert_eq!(token_f1("Clinton", &golds), best);
    assert_eq!(best, 1.0);
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,6}",
        "[a-z]{1,3}[.,!?;:]",
        Just("the".to_string()),
        Just("A".to_string()),
        Just("an".to_string()),
        "[0-9]{1,3}",
    ]
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 0..7).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn articles_never_change_the_score(pred in phrase(), gold in phrase(), pos in 0usize..8, article in prop_oneof![Just("the"), Just("a"), Just("An")]) {
        let mut words: Vec<&str> = pred.split_whitespace().collect();
        let at = pos.min(words.len());
        words.insert(at, article);
        let with_article = words.join(" ");
        prop_assert_eq!(token_f1(&with_article, &[&gold]), token_f1(&pred, &[&gold]));
    }

    #[test]
    fn matches_oracle_bounded_and_symmetric(pred in phrase(), gold in phrase()) {
        let f = token_f1(&pred, &[&gold]);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - oracle_f1(&pred, &gold)).abs() < 1e-12);
        prop_assert!((f - token_f1(&gold, &[&pred])).abs() < 1e-12);
        let mut a = normalize(&pred);
        let mut b = normalize(&gold);
        a.sort();
        b.sort();
        prop_assert_eq!(f == 1.0, a == b);
    }

    #[test]
    fn evaluate_ignores_example_order(seed in 0u64..1000) {
        let answers = ["Ann Lee", "Bo", "the big dog", "Paris France"];
        let preds_src = ["Ann", "Bo", "dog", "Rome"];
        let mut examples: Vec<QAExample> = answers
            .iter()
            .enumerate()
            .map(|(i, a)| QAExample::new(format!("q{i}"), "?", *a, vec![Answer::new(*a, 0)]))
            .collect();
        let preds: Predictions = preds_src.iter().enumerate().map(|(i, p)| (format!("q{i}"), p.to_string())).collect();
        let base = evaluate(&QADataset::new("a", examples.clone()).unwrap(), &preds).unwrap();
        examples.rotate_left((seed % 4) as usize);
        if seed % 2 == 1 {
            examples.reverse();
        }
        let shuffled = evaluate(&QADataset::new("a", examples).unwrap(), &preds).unwrap();
        prop_assert_eq!(base.f1, shuffled.f1);
        prop_assert_eq!(base.em, shuffled.em);
        prop_assert_eq!(base.per_example, shuffled.per_example);
    }
}

#[test]
fn gold_predictions_score_full_marks() {
    let examples: Vec<QAExample> = (0..5)
        .map(|i| QAExample::new(format!("q{i}"), "?", "Ann met Bo.", vec![Answer::new("Bo", 8)]))
        .collect();
    let ds = QADataset::new("t", examples).unwrap();
    let preds: Predictions = ds.iter().map(|e| (e.qid.clone(), e.answers[0].text.clone())).collect();
    let r = evaluate(&ds, &preds).unwrap();
    assert_eq!((r.f1, r.em, r.n), (100.0, 100.0, 5));
}
