#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corefqa::dataset::{write_squad_json, Answer, QADataset, QAExample};

pub const PLANTED_SEMOVERLAP: usize = 60;
pub const PLANTED_FOUND_ELSEWHERE: usize = 10;
pub const PLANTED_RANDOM_NE: usize = 20;
pub const PLANTED_SIZE: usize = 200;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corefqa"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn service_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../service/tests/fixtures")
        .join(name)
}

pub fn cli_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Example `i` of the planted corpus. Every context has three sentences and
/// the question shares words with the "lamp" sentence only, so any
/// similarity scorer picks it.
///
/// - `i < 60`: the answer sits in the lamp sentence.
/// - `60 <= i < 70`: the answer text also occurs in the lamp sentence but the
///   gold span is in the first sentence.
/// - otherwise the answer is absent from the lamp sentence.
fn planted_example(i: usize) -> QAExample {
    let lamp = format!("Mara{i} kept the lamp{i} near the river{i}.");
    let question = format!("Who kept the lamp{i} near the river{i}?");
    let storm = format!("A storm{i} flooded the valley{i} later.");
    let (context, answer) = if i < PLANTED_SEMOVERLAP {
        let barn = format!("Tobin{i} painted a barn{i} yesterday.");
        (format!("{lamp} {barn} {storm}"), format!("Mara{i}"))
    } else if i < PLANTED_SEMOVERLAP + PLANTED_FOUND_ELSEWHERE {
        let barn = format!("Mara{i} painted a barn{i} yesterday.");
        (format!("{barn} {storm} {lamp}"), format!("Mara{i}"))
    } else {
        let barn = format!("Tobin{i} painted a barn{i} yesterday.");
        (format!("{barn} {storm} {lamp}"), format!("Tobin{i}"))
    };
    let start = context.find(&answer).expect("answer in context");
    let start = context[..start].chars().count();
    QAExample::new(
        format!("planted-{i:03}"),
        question,
        context,
        vec![Answer::new(answer, start)],
    )
    .with_tag(format!("doc:planted-{i:03}"))
}

pub fn planted_dataset() -> QADataset {
    QADataset::new("planted", (0..PLANTED_SIZE).map(planted_example).collect()).expect("planted corpus is valid")
}

/// PERSON candidates per qid. The first 20 dropped examples have the gold
/// answer as their only candidate; the next 40 have two wrong ones.
pub fn planted_entities() -> BTreeMap<String, Vec<String>> {
    let first = PLANTED_SEMOVERLAP + PLANTED_FOUND_ELSEWHERE;
    let mut map = BTreeMap::new();
    for i in first..first + PLANTED_RANDOM_NE {
        map.insert(format!("planted-{i:03}"), vec![format!("Tobin{i}")]);
    }
    for i in first + PLANTED_RANDOM_NE..first + 3 * PLANTED_RANDOM_NE {
        map.insert(
            format!("planted-{i:03}"),
            vec![format!("Ilse{i}"), format!("Oren{i} Vale")],
        );
    }
    map
}

pub struct Planted {
    pub dataset: PathBuf,
    pub entities: PathBuf,
}

pub fn write_planted(dir: &Path) -> Planted {
    let dataset = dir.join("planted.json");
    let entities = dir.join("planted_entities.json");
    std::fs::write(&dataset, write_squad_json(&planted_dataset())).unwrap();
    std::fs::write(&entities, serde_json::to_string_pretty(&planted_entities()).unwrap()).unwrap();
    Planted { dataset, entities }
}

/// qid -> first gold answer text.
pub fn gold_predictions(ds: &QADataset) -> BTreeMap<String, String> {
    ds.examples
        .iter()
        .map(|e| (e.qid.clone(), e.answers[0].text.clone()))
        .collect()
}

pub fn write_gold_predictions(dataset: &Path, out: &Path) {
    let ds = corefqa::dataset::read_squad_file(dataset).unwrap();
    std::fs::write(out, serde_json::to_string_pretty(&gold_predictions(&ds)).unwrap()).unwrap();
}
