//! MultiRC (multiple-choice) records into extractive examples.
//!
//! Accepts the original release (`{"data": [{"id", "paragraph": {...}}]}`
//! with `isAnswer` flags) and the SuperGLUE JSONL layout (`passage`,
//! integer `label`). A question survives when at least one of its correct
//! options occurs verbatim in the passage.

use serde::Serialize;
use serde_json::Value;

use super::{Answer, DatasetError, QADataset, QAExample, Result, DOC_TAG};
use crate::text::{char_len, char_slice, find_char, find_char_caseless};

#[derive(Debug, Clone, Copy, Default)]
pub struct MultircOptions {
    pub case_insensitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MultircSummary {
    pub questions: usize,
    pub kept: usize,
    pub dropped: usize,
}

fn malformed(msg: impl Into<String>) -> DatasetError {
    DatasetError::MalformedRecord(msg.into())
}

fn id_string(v: Option<&Value>, fallback: usize) -> String {
    match v {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => fallback.to_string(),
    }
}

fn records(input: &str) -> Result<Vec<Value>> {
    let trimmed = input.trim_start();
    if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(trimmed) {
        return match obj.get("data") {
            Some(Value::Array(items)) => Ok(items.clone()),
            Some(_) => Err(malformed("`data` is not an array")),
            None => Ok(vec![Value::Object(obj)]),
        };
    }
    trimmed
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| malformed(format!("line {}: {e}", i + 1))))
        .collect()
}

fn is_correct(option: &Value) -> Result<bool> {
    match option.get("isAnswer").or_else(|| option.get("label")) {
        Some(Value::Bool(b)) => Ok(*b),
        Some(Value::Number(n)) => Ok(n.as_i64() == Some(1)),
        _ => Err(malformed("answer option without isAnswer/label")),
    }
}

pub fn convert_multirc(input: &str, opts: MultircOptions) -> Result<(QADataset, MultircSummary)> {
    let mut examples = Vec::new();
    let mut summary = MultircSummary {
        questions: 0,
        kept: 0,
        dropped: 0,
    };
    for (ri, record) in records(input)?.iter().enumerate() {
        let passage = record
            .get("paragraph")
            .or_else(|| record.get("passage"))
            .ok_or_else(|| malformed(format!("record {ri}: no paragraph/passage")))?;
        let text = passage
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(format!("record {ri}: passage without text")))?;
        let questions = passage
            .get("questions")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(format!("record {ri}: passage without questions")))?;
        let record_id = id_string(record.get("id").or_else(|| record.get("idx")), ri);

        for (qi, q) in questions.iter().enumerate() {
            summary.questions += 1;
            let question = q
                .get("question")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed(format!("record {record_id}: question {qi} without text")))?;
            let options = q
                .get("answers")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed(format!("record {record_id}: question {qi} without answers")))?;
            let mut answers: Vec<Answer> = Vec::new();
            for opt in options {
                if !is_correct(opt)? {
                    continue;
                }
                let option_text = opt
                    .get("text")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed(format!("record {record_id}: option without text")))?
                    .trim();
                if option_text.is_empty() {
                    continue;
                }
                let found = if opts.case_insensitive {
                    find_char_caseless(text, option_text)
                } else {
                    find_char(text, option_text)
                };
                if let Some(start) = found {
                    let span =
                        char_slice(text, start, start + char_len(option_text)).expect("match lies inside passage");
                    let answer = Answer::new(span, start);
                    if !answers.contains(&answer) {
                        answers.push(answer);
                    }
                }
            }
            if answers.is_empty() {
                summary.dropped += 1;
                continue;
            }
            summary.kept += 1;
            let qid = format!("{record_id}.q{}", id_string(q.get("idx"), qi));
            examples
                .push(QAExample::new(qid, question, text, answers).with_tag(format!("{DOC_TAG}multirc/{record_id}")));
        }
    }
    Ok((QADataset::new("multirc", examples)?, summary))
}
