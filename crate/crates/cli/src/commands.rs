use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use corefqa::conll::{parse_conll, ColumnMap};
use corefqa::convert::{convert, AntecedentPolicy, ConvertOptions, HttpQuestionGenerator, Mode};
use corefqa::curation::{rank_passages, validate_pair, DraftPair, RankOrder};
use corefqa::dataset::{convert_multirc, merge, read_squad_json, split, stats, write_squad_json, MultircOptions};
use corefqa::http::EndpointConfig;
use corefqa::metrics::{evaluate, read_predictions, subset_analysis, Predictions};
use corefqa::probes::{
    bias_report, probe_random_ne, probe_semantic_overlap, random_ne_predictions, score_probe_predictions,
    transform_empty_question, transform_short_context, transform_wh_only, transform_wh_only_default, AttachedEntities,
    BiasFlagSet, BiasTag, Bootstrap, CapitalizationHeuristic, ConllEntities, EmbeddingClient, EntityChain,
    SimilarityScorer, Solved, TfIdfScorer,
};
use corefqa::{Lexicon, QADataset};
use corefqa_service::{Corpus, ScorerConfig, ServiceConfig};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn load_dataset(path: &Path) -> Result<QADataset> {
    Ok(read_squad_json(&read(path)?, &stem(path))?)
}

fn load_predictions(path: &Path) -> Result<Predictions> {
    Ok(read_predictions(&read(path)?)?)
}

fn load_flags(paths: &[PathBuf]) -> Result<BiasFlagSet> {
    let mut flags = BiasFlagSet::new();
    for p in paths {
        flags.merge(BiasFlagSet::from_json(&read(p)?)?);
    }
    Ok(flags)
}

fn parse_tags(tags: &Option<Vec<String>>) -> Result<Vec<BiasTag>> {
    match tags {
        None => Ok(BiasTag::ALL.to_vec()),
        Some(list) => list.iter().map(|t| Ok(t.parse::<BiasTag>()?)).collect(),
    }
}

fn lexicon(args: &LexiconArgs) -> Lexicon {
    match &args.pronouns {
        Some(p) => Lexicon::with_pronouns(p),
        None => Lexicon::default(),
    }
}

fn column_map(layout: LayoutArg) -> ColumnMap {
    match layout {
        LayoutArg::Conll2012 => ColumnMap::conll2012(),
        LayoutArg::Compact => ColumnMap::compact(),
    }
}

fn endpoint(url: &str, args: &EndpointArgs) -> EndpointConfig {
    EndpointConfig {
        timeout_ms: args.timeout_ms,
        retries: args.retries,
        ..EndpointConfig::new(url)
    }
}

fn solved(args: &SolvedArgs) -> Result<Solved> {
    if args.exact {
        return Ok(Solved::Exact);
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!(
            "threshold must lie in [0, 1], got {}",
            args.threshold
        )));
    }
    Ok(Solved::F1(args.threshold))
}

fn solved_meta(s: Solved) -> Value {
    serde_json::to_value(s).expect("serializable")
}

fn scorer(args: &ScorerArgs, ds: &QADataset) -> Result<Box<dyn SimilarityScorer + Send>> {
    Ok(match args.scorer {
        ScorerArg::Tfidf => Box::new(TfIdfScorer::fit_dataset(ds)),
        ScorerArg::Embedding => {
            let url = args
                .embedding_endpoint
                .as_deref()
                .ok_or_else(|| CliError::Usage("--scorer embedding needs --embedding-endpoint".into()))?;
            Box::new(EmbeddingClient::new(endpoint(url, &args.endpoint)))
        }
    })
}

fn scorer_meta(args: &ScorerArgs) -> Value {
    match args.scorer {
        ScorerArg::Tfidf => json!("tfidf"),
        ScorerArg::Embedding => json!({"embedding": args.embedding_endpoint}),
    }
}

/// What a subcommand produced: the main artifact plus a summary with the
/// settings that shaped it.
pub struct Outcome {
    pub artifact: Option<(Option<PathBuf>, String)>,
    pub summary: Value,
}

impl Outcome {
    fn new(out: &OutArg, artifact: String, summary: Value) -> Self {
        Self {
            artifact: Some((out.out.clone(), artifact)),
            summary,
        }
    }

    fn summary_only(summary: Value) -> Self {
        Self {
            artifact: None,
            summary,
        }
    }
}

fn meta(command: &str, fields: Value) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    if let Value::Object(f) = fields {
        m.extend(f);
    }
    Value::Object(m)
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Convert(a) => run_convert(a),
        Command::Transform(a) => run_transform(a),
        Command::Probe(a) => run_probe(a),
        Command::Score(a) => run_score(a),
        Command::Flags(a) => run_flags(a),
        Command::Report(a) => run_report(a),
        Command::Subsets(a) => run_subsets(a),
        Command::Rank(a) => run_rank(a),
        Command::Validate(a) => run_validate(a),
        Command::MultircConvert(a) => run_multirc(a),
        Command::Merge(a) => run_merge(a),
        Command::Split(a) => run_split(a),
        Command::Stats(a) => run_stats(a),
        Command::Serve(_) => unreachable!("serve runs in main"),
    }
}

fn run_convert(a: &ConvertArgs) -> Result<Outcome> {
    let docs = parse_conll(&read(&a.input)?, &column_map(a.layout))?;
    let mode = match a.mode {
        ModeArg::Dec => Mode::Dec,
        ModeArg::Rule => Mode::Rule,
        ModeArg::External => Mode::External,
    };
    let generator = match (mode, &a.qg_endpoint) {
        (Mode::External, Some(url)) => Some(HttpQuestionGenerator::new(endpoint(url, &a.endpoint))),
        (Mode::External, None) => return Err(CliError::Usage("--mode external needs --qg-endpoint".into())),
        _ => None,
    };
    let opts = ConvertOptions {
        lexicon: lexicon(&a.lexicon),
        policy: match a.policy {
            PolicyArg::Earliest => AntecedentPolicy::Earliest,
            PolicyArg::Closest => AntecedentPolicy::Closest,
        },
        generator: generator.as_ref().map(|g| g as _),
    };
    let conversion = convert(&docs, mode, &opts)?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.input));
    let ds = conversion.dataset(name)?;
    let summary = meta(
        "convert",
        json!({
            "mode": mode.as_str(),
            "policy": format!("{:?}", a.policy).to_lowercase(),
            "documents": docs.len(),
            "examples": ds.len(),
            "skipped": conversion.skipped,
        }),
    );
    Ok(Outcome::new(&a.out, write_squad_json(&ds), summary))
}

fn run_transform(a: &TransformArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let (out, extra) = match a.probe {
        TransformArg::Whword => {
            let out = match &a.wh_words {
                Some(words) => {
                    let words: Vec<&str> = words.iter().map(String::as_str).collect();
                    transform_wh_only(&ds, &words)
                }
                None => transform_wh_only_default(&ds),
            };
            (out, json!({}))
        }
        TransformArg::Empty => (transform_empty_question(&ds), json!({})),
        TransformArg::Shortctx => {
            let scorer = scorer(&a.scorer, &ds)?;
            let short = transform_short_context(&ds, scorer.as_ref())?;
            (
                short.dataset,
                json!({"dropped": short.dropped.len(), "dropped_qids": short.dropped, "scorer": scorer_meta(&a.scorer)}),
            )
        }
    };
    let mut fields = json!({
        "probe": format!("{:?}", a.probe).to_lowercase(),
        "input_examples": ds.len(),
        "examples": out.len(),
    });
    if let (Value::Object(f), Value::Object(e)) = (&mut fields, extra) {
        f.extend(e);
    }
    Ok(Outcome::new(&a.out, write_squad_json(&out), meta("transform", fields)))
}

fn run_probe(a: &ProbeArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let solved = solved(&a.solved)?;
    let (flags, fields) = match a.probe {
        ProbeArg::Semoverlap => {
            let scorer = scorer(&a.scorer, &ds)?;
            let flags = probe_semantic_overlap(&ds, scorer.as_ref())?;
            (flags, json!({"probe": "semoverlap", "scorer": scorer_meta(&a.scorer)}))
        }
        ProbeArg::Randomne => {
            let mut chain = EntityChain::new();
            let mut sources = Vec::new();
            if let Some(p) = &a.entities {
                let map: BTreeMap<String, Vec<String>> =
                    serde_json::from_str(&read(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                chain = chain.then(AttachedEntities(map));
                sources.push("attached");
            }
            if let Some(p) = &a.conll {
                let docs = parse_conll(&read(p)?, &column_map(a.layout))?;
                chain = chain.then(ConllEntities::from_documents(&docs, "PERSON"));
                sources.push("conll");
            }
            if !a.no_heuristic {
                chain = chain.then(CapitalizationHeuristic::default());
                sources.push("capitalization");
            }
            if let Some(p) = &a.predictions_out {
                write(p, &pretty(&random_ne_predictions(&ds, &chain, a.seed)))?;
            }
            let flags = probe_random_ne(&ds, &chain, a.seed, solved);
            (
                flags,
                json!({"probe": "randomne", "seed": a.seed, "entity_sources": sources}),
            )
        }
    };
    let mut fields = fields;
    if let Value::Object(f) = &mut fields {
        f.insert("solved".into(), solved_meta(solved));
        f.insert("n".into(), json!(ds.len()));
        f.insert("flagged".into(), json!(flags.qids().count()));
    }
    Ok(Outcome::new(&a.out, flags.to_json(), meta("probe", fields)))
}

fn run_score(a: &ScoreArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let report = evaluate(&ds, &load_predictions(&a.preds)?)?;
    let summary = meta(
        "score",
        json!({"f1": report.f1, "em": report.em, "n": report.n, "missing": report.missing.len()}),
    );
    Ok(Outcome::new(&a.out, pretty(&report), summary))
}

fn run_flags(a: &FlagsArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let tag: BiasTag = a.tag.parse()?;
    let solved = solved(&a.solved)?;
    let mut flags = score_probe_predictions(&ds, &load_predictions(&a.preds)?, solved, tag)?;
    let flagged = flags.count(tag);
    if let Some(p) = &a.merge_into {
        let mut base = BiasFlagSet::from_json(&read(p)?)?;
        base.merge(flags);
        flags = base;
    }
    let summary = meta(
        "flags",
        json!({"tag": tag.as_str(), "solved": solved_meta(solved), "n": ds.len(), "flagged": flagged}),
    );
    Ok(Outcome::new(&a.out, flags.to_json(), summary))
}

fn run_report(a: &ReportArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let flags = load_flags(&a.flags)?;
    let tags = parse_tags(&a.tags)?;
    let bootstrap = a.bootstrap.as_deref().map(str::parse::<Bootstrap>).transpose()?;
    let report = bias_report(&ds, &flags, &tags, bootstrap)?;
    let ratios: Map<String, Value> = report
        .probes
        .iter()
        .map(|p| (p.probe.as_str().to_string(), json!(p.ratio)))
        .collect();
    let summary = meta(
        "report",
        json!({"n": report.n, "bootstrap": report.bootstrap, "ratios": ratios}),
    );
    Ok(Outcome::new(&a.out, pretty(&report), summary))
}

fn run_subsets(a: &SubsetsArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let flags = load_flags(&a.flags)?;
    flags.validate_against(&ds)?;
    let tags = parse_tags(&a.tags)?;
    let deltas = subset_analysis(
        &ds,
        &flags,
        &tags,
        &load_predictions(&a.baseline)?,
        &load_predictions(&a.variant)?,
    )?;
    let summary = meta("subsets", json!({"n": ds.len(), "subsets": deltas.len()}));
    Ok(Outcome::new(&a.out, pretty(&deltas), summary))
}

fn load_passages(path: &Path) -> Result<Corpus> {
    Ok(Corpus::parse(&read(path)?)?)
}

fn rank_order(order: OrderArg) -> RankOrder {
    match order {
        OrderArg::EntitiesFirst => RankOrder::EntitiesFirst,
        OrderArg::PronounsFirst => RankOrder::PronounsFirst,
    }
}

fn run_rank(a: &RankArgs) -> Result<Outcome> {
    let corpus = load_passages(&a.passages)?;
    let scores = rank_passages(corpus.passages(), &lexicon(&a.lexicon), rank_order(a.order));
    let summary = meta(
        "rank",
        json!({"passages": scores.len(), "order": format!("{:?}", a.order).to_lowercase()}),
    );
    Ok(Outcome::new(&a.out, pretty(&scores), summary))
}

#[derive(Serialize)]
struct PairCheck {
    line: usize,
    passage_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<corefqa::curation::ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_validate(a: &ValidateArgs) -> Result<Outcome> {
    let corpus = load_passages(&a.passages)?;
    let lex = lexicon(&a.lexicon);
    let text = read(&a.pairs)?;
    let mut accepted: Vec<DraftPair> = Vec::new();
    let mut checks = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let draft: DraftPair = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", a.pairs.display(), i + 1)))?;
        let mut check = PairCheck {
            line: i + 1,
            passage_id: draft.passage_id.clone(),
            report: None,
            error: None,
        };
        match corpus.get(&draft.passage_id) {
            None => check.error = Some(format!("unknown passage {:?}", draft.passage_id)),
            Some(p) => match validate_pair(&draft, &p.text, &accepted, &lex) {
                Ok(r) => {
                    if r.passed {
                        accepted.push(draft);
                    }
                    check.report = Some(r);
                }
                Err(e) => check.error = Some(e.to_string()),
            },
        }
        checks.push(check);
    }
    let passed = checks
        .iter()
        .filter(|c| c.report.as_ref().is_some_and(|r| r.passed))
        .count();
    let failed = checks.len() - passed;
    let body = json!({"total": checks.len(), "passed": passed, "failed": failed, "results": checks});
    if a.strict && failed > 0 {
        return Err(CliError::Data(format!(
            "{failed} of {} pairs fail the guideline",
            checks.len()
        )));
    }
    let summary = meta(
        "validate",
        json!({"total": checks.len(), "passed": passed, "failed": failed}),
    );
    Ok(Outcome::new(&a.out, pretty(&body), summary))
}

fn run_multirc(a: &MultircArgs) -> Result<Outcome> {
    let (ds, summary) = convert_multirc(
        &read(&a.input)?,
        MultircOptions {
            case_insensitive: a.case_insensitive,
        },
    )?;
    let fields = json!({
        "questions": summary.questions,
        "kept": summary.kept,
        "dropped": summary.dropped,
        "case_insensitive": a.case_insensitive,
    });
    Ok(Outcome::new(
        &a.out,
        write_squad_json(&ds),
        meta("multirc-convert", fields),
    ))
}

fn run_merge(a: &MergeArgs) -> Result<Outcome> {
    let parts = a.inputs.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?;
    let joint = merge(&parts, a.name.clone())?;
    let sizes: Vec<usize> = parts.iter().map(QADataset::len).collect();
    let summary = meta("merge", json!({"inputs": sizes, "examples": joint.len()}));
    Ok(Outcome::new(&a.out, write_squad_json(&joint), summary))
}

fn run_split(a: &SplitArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.input)?;
    let (train, test) = split(&ds, a.fraction, a.seed)?;
    write(&a.train_out, &write_squad_json(&train))?;
    write(&a.test_out, &write_squad_json(&test))?;
    Ok(Outcome::summary_only(meta(
        "split",
        json!({"fraction": a.fraction, "seed": a.seed, "train": train.len(), "test": test.len()}),
    )))
}

fn run_stats(a: &StatsArgs) -> Result<Outcome> {
    let all = a
        .inputs
        .iter()
        .map(|p| load_dataset(p).map(|ds| stats(&ds)))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = all.iter().map(|s| s.example_count).collect();
    Ok(Outcome::new(
        &a.out,
        pretty(&all),
        meta("stats", json!({"examples": counts})),
    ))
}

/// Service settings: the config file (its `serve` section if present) with
/// flags layered on top.
pub fn serve_config(a: &ServeArgs, file: Option<&Map<String, Value>>) -> Result<ServiceConfig> {
    let mut base = match file {
        Some(m) => {
            let section = match m.get("serve") {
                Some(Value::Object(s)) => s.clone(),
                _ => m.clone(),
            };
            let mut section = section;
            if a.corpus.is_some() {
                section.insert("corpus".into(), json!(a.corpus));
            }
            if a.store.is_some() {
                section.insert("store".into(), json!(a.store));
            }
            serde_json::from_value::<ServiceConfig>(Value::Object(section))
                .map_err(|e| CliError::Usage(format!("service config: {e}")))?
        }
        None => match (&a.corpus, &a.store) {
            (Some(c), Some(s)) => ServiceConfig::new(c, s),
            _ => {
                return Err(CliError::Usage(
                    "serve needs --corpus and --store, or a --config file".into(),
                ))
            }
        },
    };
    if let Some(l) = &a.listen {
        base.listen = l.clone();
    }
    if let Some(o) = a.order {
        base.rank_order = rank_order(o);
    }
    match (a.scorer, &a.embedding_endpoint) {
        (Some(ScorerArg::Tfidf), _) => base.scorer = ScorerConfig::Tfidf,
        (Some(ScorerArg::Embedding), Some(url)) => base.scorer = ScorerConfig::Embedding(EndpointConfig::new(url)),
        (Some(ScorerArg::Embedding), None) => {
            if !matches!(base.scorer, ScorerConfig::Embedding(_)) {
                return Err(CliError::Usage("--scorer embedding needs --embedding-endpoint".into()));
            }
        }
        (None, Some(url)) => base.scorer = ScorerConfig::Embedding(EndpointConfig::new(url)),
        (None, None) => {}
    }
    Ok(base)
}
