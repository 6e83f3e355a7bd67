use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::Context as _;
use clap::{Args, ValueEnum};
use lambada_core::baselines::{eda_augment, weak_label, SynonymLexicon};
use lambada_core::classify::{accuracy, ClassifierModel, ClassifierSpec};
use lambada_core::condlm::{fit_conditional_lm, NGramModel};
use lambada_core::corpus::{
    load_dataset, split_dataset, tokenize, write_jsonl_parts, write_splits, DataFormat, Dataset,
    LabelMap, SplitManifest, SplitSpec,
};
use lambada_core::eval::{
    emit_report, run_experiment_grid, GridData, GridResults, GridSettings, Method, PlanSettings,
    ReportFormat,
};
use lambada_core::generator::{GeneratorSpec, SentenceGenerator};
use lambada_core::lambada::run_lambada;
use serde::Serialize;

use crate::config::{AugmentMethod, Config, Seeds};
use crate::run_dir::{manifest_name, RunDir};
use crate::{Cli, UsageError};

pub struct Context {
    pub cfg: Config,
    pub run: RunDir,
}

impl Context {
    pub fn new(cli: &Cli, cfg: Config) -> Self {
        let dir = match &cli.out {
            Some(out) => out.clone(),
            None => {
                let root = cli
                    .root
                    .clone()
                    .or_else(|| cfg.run.root.clone())
                    .unwrap_or_else(|| PathBuf::from("runs"));
                let label = cli
                    .run
                    .clone()
                    .or_else(|| cfg.run.label.clone())
                    .unwrap_or_else(|| "default".into());
                root.join(label)
            }
        };
        Self {
            cfg,
            run: RunDir::new(dir, cli.overwrite),
        }
    }

    /// An input path: the explicit one, else `name` inside the run directory.
    fn input(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.run.file(name))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Fails with a usage error naming every missing path.
fn require_exists<'a>(paths: impl IntoIterator<Item = &'a Path>) -> anyhow::Result<()> {
    let missing: Vec<String> = paths
        .into_iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(usage(format!("missing input: {}", missing.join(", "))))
    }
}

fn format_of(path: &Path, explicit: Option<DataFormat>) -> anyhow::Result<DataFormat> {
    explicit.or_else(|| DataFormat::from_path(path)).ok_or_else(|| {
        usage(format!(
            "cannot tell the format of {} (use .csv or .jsonl, or pass --format)",
            path.display()
        ))
    })
}

fn load(path: &Path, labels: Option<LabelMap>) -> anyhow::Result<Dataset> {
    let format = format_of(path, None)?;
    load_dataset(path, format, labels).with_context(|| format!("loading {}", path.display()))
}

/// Prefers the label order recorded by `prepare` when it sits next to the
/// file, so ids stay stable across commands.
fn load_with_manifest(path: &Path) -> anyhow::Result<Dataset> {
    let manifest = path.with_file_name(SplitManifest::FILE_NAME);
    let labels = if manifest.exists() {
        Some(SplitManifest::load(&manifest)?.labels)
    } else {
        None
    };
    load(path, labels)
}

/// One sentence per line; blank lines skipped.
fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

fn read_prior(path: Option<&Path>) -> anyhow::Result<Vec<Vec<String>>> {
    match path {
        Some(p) => Ok(read_lines(p)?.iter().map(|l| tokenize(l)).collect()),
        None => Ok(Vec::new()),
    }
}

fn lexicon(cfg: &Config) -> anyhow::Result<SynonymLexicon> {
    match &cfg.data.lexicon {
        Some(p) => SynonymLexicon::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SynonymLexicon::bundled()),
    }
}

fn generator_spec(cfg: &Config) -> anyhow::Result<GeneratorSpec> {
    Ok(match &cfg.generator.command {
        Some(command) => GeneratorSpec::External {
            command: command.clone(),
            timeout: Duration::from_secs(cfg.generator.timeout_secs),
        },
        None => GeneratorSpec::ngram(cfg.lm, read_prior(cfg.data.prior.as_deref())?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    NaiveBayes,
    Logreg,
}

/// Keeps the configured hyperparameters when the kind matches.
fn override_classifier(spec: &mut ClassifierSpec, kind: Option<ClassifierKind>) {
    let wanted = match kind {
        Some(ClassifierKind::NaiveBayes) => "naive_bayes",
        Some(ClassifierKind::Logreg) => "logreg",
        None => return,
    };
    if spec.name() != wanted {
        *spec = match kind {
            Some(ClassifierKind::Logreg) => ClassifierSpec::logreg(),
            _ => ClassifierSpec::default(),
        };
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

// ---- prepare

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Labeled corpus (CSV with text,label columns or JSONL).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<DataFormat>,
    /// Train, validation and test fractions.
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected three comma-separated fractions".to_owned())
}

fn parse_format(s: &str) -> Result<DataFormat, String> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(DataFormat::Csv),
        "jsonl" => Ok(DataFormat::Jsonl),
        _ => Err(format!("unknown format `{s}` (expected csv or jsonl)")),
    }
}

pub fn prepare(mut ctx: Context, a: PrepareArgs) -> anyhow::Result<()> {
    let data = &mut ctx.cfg.data;
    set(&mut data.input, a.input.map(Some));
    set(&mut data.format, a.format.map(Some));
    set(&mut data.split_seed, a.seed);
    set(&mut data.ratios, a.ratios);
    let input = data.input.clone().ok_or_else(|| usage("prepare needs --in or data.input"))?;
    require_exists([input.as_path()])?;
    let format = format_of(&input, data.format)?;
    let spec = SplitSpec {
        ratios: data.ratios,
        seed: data.split_seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;

    ctx.run.reserve(&[
        "train.jsonl",
        "validation.jsonl",
        "test.jsonl",
        SplitManifest::FILE_NAME,
        &manifest_name("prepare"),
    ])?;
    let d = load_dataset(&input, format, None).with_context(|| format!("loading {}", input.display()))?;
    let splits = split_dataset(&d, &spec)?;
    for w in &splits.warnings {
        log::warn!("{w}");
    }
    let m = write_splits(ctx.run.path(), &splits, &spec)?;
    ctx.run.write_manifest("prepare", &ctx.cfg)?;
    println!(
        "{} classes; train {}, validation {}, test {} -> {}",
        m.labels.len(),
        m.counts[0],
        m.counts[1],
        m.counts[2],
        ctx.run.path().display()
    );
    Ok(())
}

// ---- train-lm

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    /// Unlabeled text, one sentence per line, merged into the counts.
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    prior_weight: Option<f64>,
}

pub fn train_lm(mut ctx: Context, a: TrainLmArgs) -> anyhow::Result<()> {
    set(&mut ctx.cfg.data.train, a.train.map(Some));
    set(&mut ctx.cfg.data.prior, a.prior.map(Some));
    set(&mut ctx.cfg.lm.order, a.order);
    set(&mut ctx.cfg.lm.alpha, a.alpha);
    set(&mut ctx.cfg.lm.prior_weight, a.prior_weight);
    let train = ctx.input(&ctx.cfg.data.train, "train.jsonl");
    require_exists([Some(train.as_path()), ctx.cfg.data.prior.as_deref()].into_iter().flatten())?;
    if ctx.cfg.lm.order == 0 {
        return Err(usage("lm.order must be at least 1"));
    }
    ctx.run.reserve(&["lm.json", &manifest_name("train-lm")])?;

    let d = load_with_manifest(&train)?;
    let prior = read_prior(ctx.cfg.data.prior.as_deref())?;
    let m = fit_conditional_lm(&d, &prior, &ctx.cfg.lm)?;
    m.save(&ctx.run.file("lm.json"))?;
    ctx.run.write_manifest("train-lm", &ctx.cfg)?;
    println!(
        "{}-gram model over {} tokens -> {}",
        m.order(),
        m.vocab().len(),
        ctx.run.file("lm.json").display()
    );
    Ok(())
}

// ---- generate

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Saved model (default: lm.json in the run directory).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Class name to sample; repeatable. Defaults to every class.
    #[arg(long = "class")]
    classes: Vec<String>,
    /// Sentences per class.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct GeneratedRecord<'a> {
    text: &'a str,
    label: &'a str,
    truncated: bool,
    gen_seed: u64,
}

pub fn generate(mut ctx: Context, a: GenerateArgs) -> anyhow::Result<()> {
    let g = &mut ctx.cfg.generation;
    set(&mut g.temperature, a.temperature);
    set(&mut g.top_k, a.top_k.map(Some));
    set(&mut g.max_len, a.max_len);
    set(&mut g.seed, a.seed);
    g.validate().map_err(|e| usage(e.to_string()))?;
    let model_path = ctx.input(&a.model, "lm.json");
    require_exists([model_path.as_path()])?;
    ctx.run.reserve(&["generated.jsonl", &manifest_name("generate")])?;

    let mut model = NGramModel::load(&model_path)?;
    let labels = model.labels().clone();
    let classes = if a.classes.is_empty() {
        labels.ids().collect::<Vec<_>>()
    } else {
        a.classes
            .iter()
            .map(|n| labels.id_of(n).ok_or_else(|| usage(format!("unknown class `{n}`"))))
            .collect::<anyhow::Result<_>>()?
    };
    let params = ctx.cfg.generation;
    let mut out = String::new();
    for class in classes {
        let name = labels.name(class).unwrap_or_default();
        let seed = lambada_core::seed::derive(params.seed, &[u64::from(class)]);
        for s in model.generate(class, a.count, seed, &params)? {
            let rec = GeneratedRecord {
                text: &s.sentence.text,
                label: name,
                truncated: s.truncated,
                gen_seed: s.gen_seed,
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
    }
    let path = ctx.run.write_text("generated.jsonl", &out)?;
    ctx.run.write_manifest("generate", &ctx.cfg)?;
    println!("{} sentences -> {}", out.lines().count(), path.display());
    Ok(())
}

// ---- augment

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<AugmentMethod>,
    /// Sentences to add per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Top every class up to this many sentences instead.
    #[arg(long)]
    balance_to: Option<usize>,
    /// Oversampling factor for the candidate pool.
    #[arg(long)]
    factor: Option<usize>,
    #[arg(long, value_enum)]
    classifier: Option<ClassifierKind>,
    /// EDA fraction of tokens changed per operation.
    #[arg(long)]
    alpha: Option<f64>,
    /// EDA variants per sentence.
    #[arg(long)]
    naug: Option<usize>,
    /// Unlabeled sentences for weak labeling, one per line.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// External generator command line.
    #[arg(long)]
    generator_command: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

const AUGMENTED: &str = "augmented.jsonl";
const REPORT: &str = "report.json";
const POOL: &str = "pool.jsonl";

#[derive(Serialize)]
struct AddedReport {
    method: AugmentMethod,
    original: usize,
    added: usize,
    added_per_class: Vec<(String, usize)>,
}

impl AddedReport {
    fn new(method: AugmentMethod, original: &Dataset, added: &Dataset) -> Self {
        let labels = added.labels();
        Self {
            method,
            original: original.len(),
            added: added.len(),
            added_per_class: labels
                .names()
                .iter()
                .cloned()
                .zip(added.class_counts())
                .collect(),
        }
    }
}

pub fn augment(mut ctx: Context, a: AugmentArgs) -> anyhow::Result<()> {
    let cfg = &mut ctx.cfg;
    set(&mut cfg.data.train, a.train.map(Some));
    set(&mut cfg.data.unlabeled, a.unlabeled.map(Some));
    set(&mut cfg.augment.method, a.method);
    set(&mut cfg.augment.per_class, a.per_class);
    set(&mut cfg.augment.balance_to, a.balance_to.map(Some));
    set(&mut cfg.augment.factor, a.factor);
    set(&mut cfg.augment.seed, a.seed);
    set(&mut cfg.eda.alpha, a.alpha);
    set(&mut cfg.eda.n_aug, a.naug);
    set(&mut cfg.generator.command, a.generator_command.map(Some));
    override_classifier(&mut cfg.classifier, a.classifier);
    let method = cfg.augment.method;

    let train = ctx.input(&ctx.cfg.data.train, "train.jsonl");
    let mut inputs = vec![train.clone()];
    inputs.extend(ctx.cfg.data.lexicon.clone().filter(|_| method == AugmentMethod::Eda));
    inputs.extend(ctx.cfg.data.prior.clone().filter(|_| method == AugmentMethod::Lambada));
    match (method, &ctx.cfg.data.unlabeled) {
        (AugmentMethod::WeakLabel, Some(p)) => inputs.push(p.clone()),
        (AugmentMethod::WeakLabel, None) => {
            return Err(usage("weak-label needs --unlabeled or data.unlabeled"))
        }
        _ => {}
    }
    require_exists(inputs.iter().map(PathBuf::as_path))?;
    match method {
        AugmentMethod::Lambada => {
            ctx.cfg.generation.validate().map_err(|e| usage(e.to_string()))?;
            if ctx.cfg.augment.factor == 0 {
                return Err(usage("augment.factor must be at least 1"));
            }
        }
        AugmentMethod::Eda => ctx.cfg.eda.validate().map_err(|e| usage(e.to_string()))?,
        AugmentMethod::WeakLabel => {}
    }
    let mut outputs = vec![AUGMENTED, REPORT];
    if method == AugmentMethod::Lambada {
        outputs.push(POOL);
    }
    let manifest = manifest_name("augment");
    outputs.push(&manifest);
    ctx.run.reserve(&outputs)?;

    let d = load_with_manifest(&train)?;
    let cfg = &ctx.cfg;
    let tag = method_tag(method);
    let added = match method {
        AugmentMethod::Lambada => {
            let settings = PlanSettings {
                per_class: cfg.augment.per_class,
                balance_to: cfg.augment.balance_to,
                oversample_factor: cfg.augment.factor,
                generation: cfg.generation,
                filter: cfg.augment.filter,
            };
            let plan = settings.plan_for(&d, cfg.augment.seed);
            let outcome = run_lambada(&d, &cfg.classifier, &generator_spec(cfg)?, &plan)?;
            outcome.pool.write_jsonl(&ctx.run.file(POOL))?;
            outcome.report.write_json(&ctx.run.file(REPORT))?;
            for c in outcome.report.classes.iter().filter(|c| c.shortfall > 0) {
                log::warn!("class {}: {} short of target {}", c.class, c.shortfall, c.target);
            }
            outcome.synthesized
        }
        AugmentMethod::Eda => {
            let mut params = cfg.eda.clone();
            params.seed = cfg.augment.seed;
            let out = eda_augment(&d, &lexicon(cfg)?, &params)?.dataset;
            ctx.run.write_json(REPORT, &AddedReport::new(method, &d, &out))?;
            out
        }
        AugmentMethod::WeakLabel => {
            let texts = read_lines(cfg.data.unlabeled.as_deref().expect("checked above"))?;
            let h = cfg.classifier.train(&d)?;
            let out = weak_label(&h, &texts)?.dataset;
            ctx.run.write_json(REPORT, &AddedReport::new(method, &d, &out))?;
            out
        }
    };
    write_jsonl_parts(
        &ctx.run.file(AUGMENTED),
        &[(&d, Some("original")), (&added, Some(tag))],
    )?;
    ctx.run.write_manifest("augment", &ctx.cfg)?;
    println!(
        "{} original + {} {tag} -> {}",
        d.len(),
        added.len(),
        ctx.run.file(AUGMENTED).display()
    );
    Ok(())
}

fn method_tag(m: AugmentMethod) -> &'static str {
    match m {
        AugmentMethod::Lambada => "lambada",
        AugmentMethod::Eda => "eda",
        AugmentMethod::WeakLabel => "weak_label",
    }
}

// ---- train-clf

#[derive(Debug, Args)]
pub struct TrainClfArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    /// Score the model on this labeled set.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum)]
    classifier: Option<ClassifierKind>,
}

#[derive(Serialize)]
struct ClfSummary {
    classifier: &'static str,
    train_size: usize,
    test_size: Option<usize>,
    test_accuracy: Option<f64>,
}

pub fn train_clf(mut ctx: Context, a: TrainClfArgs) -> anyhow::Result<()> {
    set(&mut ctx.cfg.data.train, a.train.map(Some));
    set(&mut ctx.cfg.data.test, a.test.map(Some));
    override_classifier(&mut ctx.cfg.classifier, a.classifier);
    let train = ctx.input(&ctx.cfg.data.train, "train.jsonl");
    require_exists([Some(train.as_path()), ctx.cfg.data.test.as_deref()].into_iter().flatten())?;
    ctx.run.reserve(&["classifier.json", "classifier.summary.json", &manifest_name("train-clf")])?;

    let d = load_with_manifest(&train)?;
    let model: ClassifierModel = ctx.cfg.classifier.train(&d)?;
    model.save(&ctx.run.file("classifier.json"))?;
    let test = match &ctx.cfg.data.test {
        Some(p) => Some(load(p, Some(d.labels().clone()))?),
        None => None,
    };
    let acc = test.as_ref().map(|t| accuracy(&model, t)).transpose()?;
    ctx.run.write_json(
        "classifier.summary.json",
        &ClfSummary {
            classifier: model.kind(),
            train_size: d.len(),
            test_size: test.as_ref().map(Dataset::len),
            test_accuracy: acc,
        },
    )?;
    ctx.run.write_manifest("train-clf", &ctx.cfg)?;
    match acc {
        Some(acc) => println!("{} on {} items: test accuracy {:.4}", model.kind(), d.len(), acc),
        None => println!("{} on {} items", model.kind(), d.len()),
    }
    Ok(())
}

// ---- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pool the per-class training subsamples are drawn from.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Number of seeds; runs seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    samples_per_class: Option<Vec<usize>>,
    /// Summary formats to write: table, csv, json.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    #[arg(long)]
    generator_command: Option<String>,
}

fn extension(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Table => "txt",
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    }
}

fn parse_formats(names: &[String]) -> anyhow::Result<Vec<ReportFormat>> {
    let mut out: Vec<ReportFormat> = Vec::new();
    for n in names {
        let f = ReportFormat::from_str(n).map_err(|e| usage(e.to_string()))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(usage("at least one report format is required"));
    }
    Ok(out)
}

fn grid_settings(cfg: &Config) -> GridSettings {
    GridSettings {
        classifiers: cfg.grid.classifiers.clone(),
        methods: cfg.grid.methods.clone(),
        samples_per_class: cfg.grid.samples_per_class.clone(),
        seeds: cfg.grid.seeds.expand(),
        plan: PlanSettings {
            per_class: cfg.augment.per_class,
            balance_to: cfg.augment.balance_to,
            oversample_factor: cfg.augment.factor,
            generation: cfg.generation,
            filter: cfg.augment.filter,
        },
        eda: cfg.eda.clone(),
        unlabeled_per_class: cfg.grid.unlabeled_per_class,
        significance: cfg.grid.significance,
    }
}

pub fn eval(mut ctx: Context, a: EvalArgs) -> anyhow::Result<()> {
    let cfg = &mut ctx.cfg;
    set(&mut cfg.data.train, a.train.map(Some));
    set(&mut cfg.data.test, a.test.map(Some));
    set(&mut cfg.grid.seeds, a.seeds.map(Seeds::Count));
    set(&mut cfg.grid.samples_per_class, a.samples_per_class);
    set(&mut cfg.report.formats, a.format);
    set(&mut cfg.generator.command, a.generator_command.map(Some));
    if let Some(names) = a.methods {
        cfg.grid.methods = names
            .iter()
            .map(|n| Method::from_str(n).map_err(|e| usage(e.to_string())))
            .collect::<anyhow::Result<_>>()?;
    }
    let formats = parse_formats(&ctx.cfg.report.formats)?;
    let settings = grid_settings(&ctx.cfg);
    let problems = settings.problems();
    if !problems.is_empty() {
        return Err(usage(format!("invalid grid: {}", problems.join("; "))));
    }
    let train = ctx.input(&ctx.cfg.data.train, "train.jsonl");
    let test = ctx.input(&ctx.cfg.data.test, "test.jsonl");
    let wants = |m: Method| settings.methods.contains(&m);
    let optional = [
        ctx.cfg.data.prior.as_deref().filter(|_| wants(Method::Lambada) || wants(Method::GptUnlabeled)),
        ctx.cfg.data.lexicon.as_deref().filter(|_| wants(Method::Eda)),
    ];
    require_exists([train.as_path(), test.as_path()].into_iter().chain(optional.into_iter().flatten()))?;
    let names: Vec<String> = formats
        .iter()
        .map(|f| format!("summary.{}", extension(*f)))
        .chain(["results.json".to_owned(), manifest_name("eval")])
        .collect();
    ctx.run.reserve(&names.iter().map(String::as_str).collect::<Vec<_>>())?;

    let train_pool = load_with_manifest(&train)?;
    let test_set = load(&test, Some(train_pool.labels().clone()))?;
    let data = GridData {
        train_pool,
        test: test_set,
        generator: generator_spec(&ctx.cfg)?,
        lexicon: lexicon(&ctx.cfg)?,
    };
    let results = run_experiment_grid(&data, &settings)?;
    let failed = results.runs.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed; see results.json", results.runs.len());
    }
    ctx.run.write_json("results.json", &results)?;
    for (i, f) in formats.iter().enumerate() {
        let text = emit_report(&results, *f)?;
        ctx.run.write_text(&format!("summary.{}", extension(*f)), &text)?;
        if i == 0 {
            print!("{text}");
        }
    }
    ctx.run.write_manifest("eval", &ctx.cfg)?;
    Ok(())
}

// ---- report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results file from `eval` (default: results.json in the run directory).
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
}

pub fn report(ctx: Context, a: ReportArgs) -> anyhow::Result<()> {
    let format = ReportFormat::from_str(&a.format).map_err(|e| usage(e.to_string()))?;
    let path = ctx.input(&a.results, "results.json");
    require_exists([path.as_path()])?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let results: GridResults =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    print!("{}", emit_report(&results, format)?);
    Ok(())
}
