//! Command-line front end.
//!
//! Every failure prints one line to stderr,
//! `langrank-error code=<exit> kind=<kind> msg=<message>`, and exits with
//! 2 (usage), 3 (data: unreadable, malformed or mismatched input) or 4
//! (internal invariant violation).

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;

use crate::bpe::{learn_bpe, SubwordVocabulary};
use crate::corpus::Corpus;
use crate::dataset::{dataset_to_tsv, join, parse_dataset, FeatureRow, FeatureTable, GoldScores, RankingDataset};
use crate::error::{read_to_string, write_string, Error, Result};
use crate::evaluation::{
    leave_one_out, parse_ranked_lists, plot_data_csv, ranked_lists_to_tsv, run_baselines, summary_tsv, topk_best_ratio,
    topk_curve, EvalReport, RankedList,
};
use crate::features::{extract_features_with_vocabs, pair_feature_row, standard_schema, FeatureSpec, TaskProfile, DEFAULT_BPE_MERGES};
use crate::ranker::{export_trees, feature_importance, gain_importance, train, ExportFormat, GbdtModel, Hyperparams};
use crate::typology::{DistanceKind, LinguisticDistances, PrecomputedDistanceTable, TypologyDatabase, TypologyVectorStore, VectorKind};

#[derive(Debug, Parser)]
#[command(name = "langrank", version, about = "Rank transfer languages for cross-lingual NLP", args_override_self = true)]
pub struct Cli {
    /// key=value file supplying defaults for any flag of the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the pair feature table from corpora and typology files.
    Features(FeaturesArgs),
    /// Join a feature table with gold scores into a ranking dataset.
    Dataset(DatasetArgs),
    /// Train a ranking model on a dataset.
    Train(TrainArgs),
    /// Rank candidate transfer languages with a trained model.
    Rank(RankArgs),
    /// Leave-one-language-out cross validation.
    Loo(LooArgs),
    /// Evaluate the single-feature baselines.
    Baselines(BaselinesArgs),
    /// Normalized feature importance of a trained model.
    Importance(ImportanceArgs),
    /// Render the trees of a trained model.
    ExportTrees(ExportTreesArgs),
    /// Best-score ratio of the top K predicted transfer languages.
    Topk(TopkArgs),
}

#[derive(Debug, Args)]
pub struct OutputArg {
    /// Output file; standard output when omitted.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Corpus of one language, as LANG=PATH. Repeatable.
    #[arg(long, value_name = "LANG=PATH")]
    pub corpus: Vec<String>,
    /// Directory of corpora named <lang>.txt.
    #[arg(long, value_name = "DIR")]
    pub corpus_dir: Option<PathBuf>,
    /// Task languages to produce rows for; all corpus languages when omitted.
    #[arg(long, value_name = "LANG", value_delimiter = ',')]
    pub task: Vec<String>,
    /// Candidate transfer languages; all corpus languages when omitted.
    #[arg(long, value_name = "LANG", value_delimiter = ',')]
    pub transfer: Vec<String>,
    /// Task profile selecting the active features: mt, el, pos, dep or custom.
    #[arg(long, default_value = "mt")]
    pub profile: String,
    /// Features enabled by the custom profile, comma separated.
    #[arg(long, value_name = "FEATURE", value_delimiter = ',')]
    pub enable: Vec<String>,
    /// BPE merge operations per corpus for the subword overlap.
    #[arg(long, default_value_t = DEFAULT_BPE_MERGES)]
    pub bpe_merges: usize,
    /// Syntax vector file.
    #[arg(long, value_name = "FILE")]
    pub syntax: Option<PathBuf>,
    /// Phonology vector file.
    #[arg(long, value_name = "FILE")]
    pub phonology: Option<PathBuf>,
    /// Phoneme inventory vector file.
    #[arg(long, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
    /// Language family membership vector file.
    #[arg(long, value_name = "FILE")]
    pub family: Option<PathBuf>,
    /// Geographic location vector file.
    #[arg(long, value_name = "FILE")]
    pub geography: Option<PathBuf>,
    /// Precomputed genetic distance table.
    #[arg(long, value_name = "FILE")]
    pub genetic_distances: Option<PathBuf>,
    /// Precomputed geographic distance table.
    #[arg(long, value_name = "FILE")]
    pub geographic_distances: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Feature table TSV.
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Gold score TSV: task_lang, transfer_lang, score.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct HyperparamArgs {
    /// Number of boosting rounds.
    #[arg(long, default_value_t = Hyperparams::default().num_trees)]
    pub num_trees: usize,
    /// Maximum leaves per tree.
    #[arg(long, default_value_t = Hyperparams::default().max_leaves)]
    pub max_leaves: usize,
    /// Shrinkage applied to every tree.
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    pub learning_rate: f64,
    /// Minimum rows in each child of a split.
    #[arg(long, default_value_t = Hyperparams::default().min_leaf_count)]
    pub min_leaf_count: usize,
    /// L2 regularization of leaf values.
    #[arg(long, default_value_t = Hyperparams::default().lambda_reg)]
    pub lambda_reg: f64,
    /// Logistic scale of the pairwise loss.
    #[arg(long, default_value_t = Hyperparams::default().sigma)]
    pub sigma: f64,
    /// Relevance label of the best transfer language.
    #[arg(long, default_value_t = Hyperparams::default().gamma_max)]
    pub gamma_max: u32,
    /// NDCG truncation used by the training gradients; gamma-max when omitted.
    #[arg(long)]
    pub train_truncation: Option<usize>,
    /// NDCG truncation used for evaluation.
    #[arg(long, default_value_t = Hyperparams::default().eval_p)]
    pub eval_p: usize,
}

impl HyperparamArgs {
    fn to_hyperparams(&self) -> Result<Hyperparams> {
        let hp = Hyperparams {
            num_trees: self.num_trees,
            max_leaves: self.max_leaves,
            learning_rate: self.learning_rate,
            min_leaf_count: self.min_leaf_count,
            lambda_reg: self.lambda_reg,
            sigma: self.sigma,
            gamma_max: self.gamma_max,
            train_truncation: self.train_truncation,
            eval_p: self.eval_p,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Ranking dataset TSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub hp: HyperparamArgs,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Trained model JSON.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Feature table TSV of the candidates.
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Gold score TSV; adds true ranks to the output.
    #[arg(long, value_name = "FILE")]
    pub gold: Option<PathBuf>,
    /// Restrict output to these task languages.
    #[arg(long, value_name = "LANG", value_delimiter = ',')]
    pub task: Vec<String>,
    /// Output format: tsv or text.
    #[arg(long, default_value = "tsv")]
    pub format: String,
    /// Entries per language in text output.
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Print the human-readable table instead of TSV.
    #[arg(long)]
    pub table: bool,
    /// Write (K, average top-K ratio) CSV to this file.
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,
    /// Largest K in the plot data; the largest candidate count when omitted.
    #[arg(long)]
    pub max_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LooArgs {
    /// Ranking dataset TSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Method label used in the report.
    #[arg(long, default_value = "langrank-all")]
    pub label: String,
    #[command(flatten)]
    pub hp: HyperparamArgs,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    /// Ranking dataset TSV.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Relevance label of the best transfer language.
    #[arg(long, default_value_t = Hyperparams::default().gamma_max)]
    pub gamma_max: u32,
    /// NDCG truncation.
    #[arg(long, default_value_t = Hyperparams::default().eval_p)]
    pub eval_p: usize,
    /// Print only the per-method means.
    #[arg(long)]
    pub summary: bool,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Trained model JSON.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Importance measure: split (split counts) or gain (total gain).
    #[arg(long, default_value = "split")]
    pub kind: String,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct ExportTreesArgs {
    /// Trained model JSON.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Rendering: text or dot.
    #[arg(long, default_value = "text")]
    pub format: String,
    #[command(flatten)]
    pub out: OutputArg,
}

#[derive(Debug, Args)]
pub struct TopkArgs {
    /// Ranked list TSV as written by rank.
    #[arg(long, value_name = "FILE")]
    pub ranking: PathBuf,
    /// Gold score TSV.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Number of top predictions tried.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Write (K, average ratio) CSV for K = 1..max-k to this file.
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,
    /// Largest K in the plot data; the largest candidate count when omitted.
    #[arg(long)]
    pub max_k: Option<usize>,
    #[command(flatten)]
    pub out: OutputArg,
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn error_line(code: i32, kind: &str, msg: &str) -> String {
    let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("langrank-error code={code} kind={kind} msg={msg}")
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let outcome = expand_config(args).and_then(|args| {
        let matches = match Cli::command().try_get_matches_from(args) {
            Ok(m) => m,
            Err(e) => {
                use clap::error::ErrorKind;
                if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                    print!("{e}");
                    return Ok(());
                }
                let text = e.to_string();
                let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
                return Err(usage(first));
            }
        };
        let cli = Cli::from_arg_matches(&matches).map_err(|e| usage(e.to_string()))?;
        run(cli.command)
    });
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", error_line(EXIT_USAGE, "usage", &msg));
            EXIT_USAGE
        }
        Err(Failure::Run(err)) => {
            let code = exit_code(&err);
            eprintln!("{}", error_line(code, err.kind(), &err.to_string()));
            code
        }
    }
}

/// Removes `--config FILE` from the arguments and splices the file's flags
/// right after the subcommand name, so explicit flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config: Option<PathBuf> = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it.next().ok_or_else(|| usage("--config requires a file"))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let Some(sub_pos) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Err(usage("--config needs a subcommand"));
    };
    let sub_name = rest[sub_pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        return Ok(rest);
    };
    let injected = config_args(&read_to_string(&path)?, &path, sub)?;
    rest.splice(sub_pos + 1..sub_pos + 1, injected);
    Ok(rest)
}

fn config_args(text: &str, path: &Path, sub: &clap::Command) -> Result<Vec<OsString>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path.display().to_string(), i + 1, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| usage(format!("unknown config key '{key}' for {}", sub.get_name())))?;
        if matches!(arg.get_action(), clap::ArgAction::SetTrue) {
            match value {
                "true" => out.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => return Err(usage(format!("config key '{key}' expects true or false, found '{other}'"))),
            }
        } else {
            out.push(OsString::from(format!("--{key}")));
            out.push(OsString::from(value));
        }
    }
    Ok(out)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Features(a) => cmd_features(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Loo(a) => cmd_loo(a),
        Command::Baselines(a) => cmd_baselines(a),
        Command::Importance(a) => cmd_importance(a),
        Command::ExportTrees(a) => cmd_export_trees(a),
        Command::Topk(a) => cmd_topk(a),
    }
}

fn emit(out: &OutputArg, text: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => write_string(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn parse_with<T: std::str::FromStr<Err = Error>>(flag: &str, value: &str) -> Result<T, Failure> {
    value.parse().map_err(|e: Error| usage(format!("--{flag}: {e}")))
}

fn collect_corpus_paths(a: &FeaturesArgs) -> Result<BTreeMap<String, PathBuf>, Failure> {
    let mut paths = BTreeMap::new();
    if let Some(dir) = &a.corpus_dir {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    paths.insert(stem.to_owned(), path.clone());
                }
            }
        }
    }
    for spec in &a.corpus {
        let (lang, path) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--corpus expects LANG=PATH, found '{spec}'")))?;
        if lang.is_empty() {
            return Err(usage(format!("--corpus expects LANG=PATH, found '{spec}'")));
        }
        paths.insert(lang.to_owned(), PathBuf::from(path));
    }
    if paths.is_empty() {
        return Err(usage("no corpora given; use --corpus or --corpus-dir"));
    }
    Ok(paths)
}

fn typology_database(a: &FeaturesArgs) -> Result<TypologyDatabase> {
    let mut db = TypologyDatabase::new();
    let stores = [
        (&a.syntax, VectorKind::Syntax),
        (&a.phonology, VectorKind::Phonology),
        (&a.inventory, VectorKind::Inventory),
        (&a.family, VectorKind::Family),
        (&a.geography, VectorKind::Geography),
    ];
    for (path, kind) in stores {
        if let Some(p) = path {
            db.add_store(TypologyVectorStore::load(p, kind)?);
        }
    }
    let tables = [
        (&a.genetic_distances, DistanceKind::Genetic),
        (&a.geographic_distances, DistanceKind::Geographic),
    ];
    for (path, kind) in tables {
        if let Some(p) = path {
            db.add_table(PrecomputedDistanceTable::load(p, kind)?);
        }
    }
    Ok(db)
}

fn cmd_features(a: FeaturesArgs) -> Result<(), Failure> {
    let mut profile: TaskProfile = parse_with("profile", &a.profile)?;
    if matches!(profile, TaskProfile::Custom(_)) {
        if a.enable.is_empty() {
            return Err(usage("--profile custom requires --enable"));
        }
        profile = TaskProfile::custom(a.enable.iter().cloned()).map_err(|e| usage(e.to_string()))?;
    } else if !a.enable.is_empty() {
        return Err(usage("--enable requires --profile custom"));
    }
    let spec = FeatureSpec {
        profile,
        bpe_merges: a.bpe_merges,
    };

    let paths = collect_corpus_paths(&a)?;
    let select = |chosen: &[String], role: &str| -> Result<Vec<String>, Failure> {
        if chosen.is_empty() {
            return Ok(paths.keys().cloned().collect());
        }
        let mut langs = chosen.to_vec();
        langs.sort();
        langs.dedup();
        match langs.iter().find(|l| !paths.contains_key(*l)) {
            Some(l) => Err(usage(format!("{role} language '{l}' has no corpus"))),
            None => Ok(langs),
        }
    };
    let tasks = select(&a.task, "task")?;
    let transfers = select(&a.transfer, "transfer")?;

    let corpora: HashMap<String, Corpus> = paths
        .par_iter()
        .map(|(lang, path)| {
            let c = if spec.profile.uses_gazetteers() {
                Corpus::read_gazetteer(lang.clone(), path)?
            } else {
                Corpus::read(lang.clone(), path)?
            };
            Ok((lang.clone(), c))
        })
        .collect::<Result<_>>()?;
    let vocabs: HashMap<String, SubwordVocabulary> = if spec.profile.is_enabled("o_sw") {
        corpora
            .par_iter()
            .map(|(lang, c)| Ok((lang.clone(), learn_bpe(&[c], spec.bpe_merges)?)))
            .collect::<Result<_>>()?
    } else {
        HashMap::new()
    };
    let db = typology_database(&a)?;

    let pairs: Vec<(&str, &str)> = tasks
        .iter()
        .flat_map(|t| transfers.iter().filter(move |a| *a != t).map(move |a| (t.as_str(), a.as_str())))
        .collect();
    let rows: Vec<FeatureRow> = pairs
        .par_iter()
        .map(|&(t, tf)| {
            let v = match (vocabs.get(tf), vocabs.get(t)) {
                (Some(vtf), Some(vtk)) => Some((vtf, vtk)),
                _ => None,
            };
            let ds = extract_features_with_vocabs(&corpora[t], &corpora[tf], v, &spec)?;
            let dist = if db.is_empty() {
                LinguisticDistances::default()
            } else {
                db.query_distances(t, tf)?
            };
            Ok(pair_feature_row(&ds, &dist, &spec.profile))
        })
        .collect::<Result<_>>()?;

    let mut table = FeatureTable::new(standard_schema());
    for ((t, tf), row) in pairs.into_iter().zip(rows) {
        table.push(t, tf, row)?;
    }
    emit(&a.out, &table.to_tsv())
}

fn cmd_dataset(a: DatasetArgs) -> Result<(), Failure> {
    let features = FeatureTable::load(&a.features)?;
    let gold = GoldScores::load(&a.gold)?;
    let records = join(&features, &gold)?;
    emit(&a.out, &dataset_to_tsv(&features.schema, &records))
}

fn load_dataset(path: &Path, gamma_max: u32) -> Result<RankingDataset> {
    let (schema, records) = parse_dataset(&read_to_string(path)?, &path.display().to_string())?;
    RankingDataset::from_records(schema, records, gamma_max)
}

fn load_model(path: &Path) -> Result<GbdtModel> {
    GbdtModel::from_json(&read_to_string(path)?).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path.display().to_string(), line, message),
        other => other,
    })
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let hp = a.hp.to_hyperparams().map_err(|e| usage(e.to_string()))?;
    let ds = load_dataset(&a.dataset, hp.gamma_max)?;
    let model = train(&ds, &hp)?;
    emit(&a.out, &model.to_json())
}

fn cmd_rank(a: RankArgs) -> Result<(), Failure> {
    let text = match a.format.as_str() {
        "tsv" => false,
        "text" => true,
        other => return Err(usage(format!("--format: unknown format '{other}'"))),
    };
    let model = load_model(&a.model)?;
    let table = FeatureTable::load(&a.features)?;
    model.schema().ensure_same(&table.schema)?;
    let gold = a.gold.as_deref().map(GoldScores::load).transpose()?;

    let mut by_task: BTreeMap<&str, Vec<(String, FeatureRow)>> = BTreeMap::new();
    for r in &table.rows {
        if a.task.is_empty() || a.task.contains(&r.task_lang) {
            by_task
                .entry(r.task_lang.as_str())
                .or_default()
                .push((r.transfer_lang.clone(), r.features.clone()));
        }
    }
    if let Some(missing) = a.task.iter().find(|t| !by_task.contains_key(t.as_str())) {
        return Err(Error::invalid(format!("no candidates for task language '{missing}'")).into());
    }
    let lists = by_task
        .into_iter()
        .map(|(task, cands)| {
            let gold_map = gold.as_ref().map(|g| {
                g.iter()
                    .filter(|(t, _, _)| *t == task)
                    .map(|(_, tf, s)| (tf.to_owned(), s))
                    .collect::<BTreeMap<_, _>>()
            });
            RankedList::from_model(&model, task, cands, gold_map.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let out = if text {
        lists.iter().map(|l| l.render_text(a.top)).collect()
    } else {
        ranked_lists_to_tsv(&lists)
    };
    emit(&a.out, &out)
}

fn max_candidates(report: &EvalReport) -> usize {
    report.per_fold.iter().map(|f| f.gold_scores.len()).max().unwrap_or(1)
}

fn write_plot(path: &Path, report: &EvalReport, max_k: Option<usize>) -> Result<()> {
    let curve = topk_curve(report, max_k.unwrap_or_else(|| max_candidates(report)))?;
    write_string(path, &plot_data_csv(&curve))
}

fn cmd_loo(a: LooArgs) -> Result<(), Failure> {
    let hp = a.hp.to_hyperparams().map_err(|e| usage(e.to_string()))?;
    let ds = load_dataset(&a.dataset, hp.gamma_max)?;
    let report = leave_one_out(&ds, &hp, &a.label)?;
    if let Some(path) = &a.report.plot_data {
        write_plot(path, &report, a.report.max_k)?;
    }
    emit(&a.out, &if a.report.table { report.to_table() } else { report.to_tsv() })
}

fn cmd_baselines(a: BaselinesArgs) -> Result<(), Failure> {
    if a.eval_p < 1 {
        return Err(usage("--eval-p must be at least 1"));
    }
    let ds = load_dataset(&a.dataset, a.gamma_max)?;
    let reports = run_baselines(&ds, a.eval_p)?;
    if let Some(path) = &a.report.plot_data {
        let mut csv = String::from("method,k,avg_ratio\n");
        for r in &reports {
            for (k, v) in topk_curve(r, a.report.max_k.unwrap_or_else(|| max_candidates(r)))? {
                csv.push_str(&format!("{},{k},{v}\n", r.method_label));
            }
        }
        write_string(path, &csv)?;
    }
    let text = if a.summary {
        summary_tsv(&reports)
    } else if a.report.table {
        reports.iter().map(EvalReport::to_table).collect::<Vec<_>>().join("\n")
    } else {
        let mut out = String::new();
        for (i, r) in reports.iter().enumerate() {
            let tsv = r.to_tsv();
            out.push_str(if i == 0 { &tsv } else { tsv.split_once('\n').map_or("", |(_, rest)| rest) });
        }
        out
    };
    emit(&a.out, &text)
}

fn cmd_importance(a: ImportanceArgs) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let imp = match a.kind.as_str() {
        "split" => feature_importance(&model)?,
        "gain" => gain_importance(&model)?,
        other => return Err(usage(format!("--kind: unknown importance '{other}'"))),
    };
    emit(&a.out, &imp.to_tsv())
}

fn cmd_export_trees(a: ExportTreesArgs) -> Result<(), Failure> {
    let format: ExportFormat = parse_with("format", &a.format)?;
    let model = load_model(&a.model)?;
    emit(&a.out, &export_trees(&model, format))
}

fn cmd_topk(a: TopkArgs) -> Result<(), Failure> {
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let lists = parse_ranked_lists(&read_to_string(&a.ranking)?, &a.ranking.display().to_string())?;
    if lists.is_empty() {
        return Err(Error::invalid("ranking file has no rows").into());
    }
    let gold = GoldScores::load(&a.gold)?;
    let per_task: Vec<(Vec<String>, BTreeMap<String, f64>)> = lists
        .iter()
        .map(|l| {
            let ranking: Vec<String> = l.entries.iter().map(|e| e.transfer_lang.clone()).collect();
            let g = ranking
                .iter()
                .map(|tf| {
                    gold.get(&l.task_lang, tf)
                        .map(|s| (tf.clone(), s))
                        .ok_or_else(|| Error::invalid(format!("no gold score for ({}, {tf})", l.task_lang)))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok((ranking, g))
        })
        .collect::<Result<_>>()?;
    let average = |k: usize| -> Result<(Vec<f64>, f64)> {
        let ratios = per_task
            .iter()
            .map(|(r, g)| topk_best_ratio(r, g, k))
            .collect::<Result<Vec<f64>>>()?;
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        Ok((ratios, mean))
    };

    if let Some(path) = &a.plot_data {
        let max_k = a.max_k.unwrap_or_else(|| per_task.iter().map(|(r, _)| r.len()).max().unwrap_or(1));
        let curve = (1..=max_k).map(|k| Ok((k, average(k)?.1))).collect::<Result<Vec<_>>>()?;
        write_string(path, &plot_data_csv(&curve))?;
    }
    let (ratios, mean) = average(a.k)?;
    let mut out = format!("task_lang\ttop{}_ratio\n", a.k);
    for (l, r) in lists.iter().zip(ratios) {
        out.push_str(&format!("{}\t{r}\n", l.task_lang));
    }
    out.push_str(&format!("mean\t{mean}\n"));
    emit(&a.out, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_expands_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# defaults\nnum-trees = 7\ntable=true\n").unwrap();
        let args: Vec<OsString> = ["langrank", "--config", cfg.to_str().unwrap(), "loo", "--dataset", "d.tsv"]
            .iter()
            .map(OsString::from)
            .collect();
        let Ok(expanded) = expand_config(args) else { panic!("expansion failed") };
        let strs: Vec<String> = expanded.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(strs, ["langrank", "loo", "--num-trees", "7", "--table", "--dataset", "d.tsv"]);
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "bogus=1\n").unwrap();
        let code = main_with_args(["langrank", "loo", "--dataset", "x", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn error_line_is_single_line() {
        assert_eq!(error_line(3, "io", "a\nb  c"), "langrank-error code=3 kind=io msg=a b c");
    }
}
