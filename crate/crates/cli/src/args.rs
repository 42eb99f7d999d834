use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "corefqa",
    version,
    about = "Coreference-to-QA conversion, bias probes, scoring and curation"
)]
pub struct Cli {
    /// Worker threads for per-document and per-example work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON file of flag defaults. Top-level keys apply to every subcommand
    /// that has such a flag; an object under a subcommand's name applies to it alone.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a CoNLL coreference file into a SQuAD-schema dataset.
    Convert(ConvertArgs),
    /// Rewrite a dataset for one of the question/context probes.
    Transform(TransformArgs),
    /// Run a heuristic probe and write a flags file.
    Probe(ProbeArgs),
    /// Score predictions against a dataset.
    Score(ScoreArgs),
    /// Flag the examples a probe model's predictions solve.
    Flags(FlagsArgs),
    /// Bias ratios from one or more flags files.
    Report(ReportArgs),
    /// Baseline vs variant F1 on flagged and unflagged subsets.
    Subsets(SubsetsArgs),
    /// Rank candidate passages by entity and pronoun counts.
    Rank(RankArgs),
    /// Check drafted pairs against the annotation guideline.
    Validate(ValidateArgs),
    /// Convert MultiRC JSON, keeping only extractive answers.
    MultircConvert(MultircArgs),
    /// Concatenate datasets.
    Merge(MergeArgs),
    /// Split a dataset by document into train and test parts.
    Split(SplitArgs),
    /// Dataset statistics.
    Stats(StatsArgs),
    /// Run the annotation HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Dec,
    Rule,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    /// Full CoNLL-2012 columns, coreference last.
    Conll2012,
    /// `word POS NE coref`.
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Earliest,
    Closest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Whword,
    Empty,
    Shortctx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Randomne,
    Semoverlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Tfidf,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    EntitiesFirst,
    PronounsFirst,
}

#[derive(Debug, Clone, Args)]
pub struct OutArg {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
}

#[derive(Debug, Clone, Args)]
pub struct ScorerArgs {
    /// Sentence similarity for the semantic-overlap and short-context probes.
    #[arg(long, value_enum, default_value = "tfidf")]
    pub scorer: ScorerArg,
    /// Embedding service URL, required with `--scorer embedding`.
    #[arg(long)]
    pub embedding_endpoint: Option<String>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolvedArgs {
    /// Token F1 at or above which an example counts as solved.
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Require an exact match instead of the F1 threshold.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LexiconArgs {
    /// Replace the pronoun list (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub pronouns: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long, value_enum, default_value = "conll2012")]
    pub layout: LayoutArg,
    /// Which non-pronominal cluster-mate becomes the answer.
    #[arg(long, value_enum, default_value = "earliest")]
    pub policy: PolicyArg,
    /// Dataset name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Question generation service URL for `--mode external`.
    #[arg(long)]
    pub qg_endpoint: Option<String>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, value_enum)]
    pub probe: TransformArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
    /// Override the interrogative word list for `whword` (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub wh_words: Option<Vec<String>>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub probe: ProbeArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solved: SolvedArgs,
    /// JSON qid -> [PERSON names], preferred over other entity sources.
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// CoNLL file whose PERSON layer supplies entities for converted data.
    #[arg(long)]
    pub conll: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "conll2012")]
    pub layout: LayoutArg,
    /// Do not fall back to capitalised-name detection.
    #[arg(long)]
    pub no_heuristic: bool,
    /// Also write the sampled random-entity predictions here.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub preds: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct FlagsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub preds: PathBuf,
    /// Tag given to solved examples, e.g. wh_word or short_distance.
    #[arg(long)]
    pub tag: String,
    #[command(flatten)]
    pub solved: SolvedArgs,
    /// Existing flags file to add to.
    #[arg(long)]
    pub merge_into: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// One or more flags files; their tags are unioned.
    #[arg(long, required = true)]
    pub flags: Vec<PathBuf>,
    /// `k,s,seed`: mean, min and max over k subsets of s examples.
    #[arg(long)]
    pub bootstrap: Option<String>,
    /// Probes to report (comma separated); all five by default.
    #[arg(long, value_delimiter = ',')]
    pub tags: Option<Vec<String>>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SubsetsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, required = true)]
    pub flags: Vec<PathBuf>,
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub variant: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub tags: Option<Vec<String>>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Passages: JSON array or JSON lines of `{id, text, entities?}`.
    #[arg(long)]
    pub passages: PathBuf,
    #[arg(long, value_enum, default_value = "entities-first")]
    pub order: OrderArg,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Drafts or stored records, one JSON object per line.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub passages: PathBuf,
    /// Exit with a data error when any pair fails.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct MultircArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
    /// Accept answers that match the paragraph only case-insensitively.
    #[arg(long)]
    pub case_insensitive: bool,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "joint")]
    pub name: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Share of documents that go to the test part.
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scorer: Option<ScorerArg>,
    #[arg(long)]
    pub embedding_endpoint: Option<String>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
}
