use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coachqa_core::corpus::{load_labels, load_passages, save_dataset, Dataset, PassageStore};
use coachqa_core::enhance::{
    apply_back_translation, apply_paraphrase, apply_word_substitution, merge_augment, mine_hard_negatives,
    plan_continuous_finetune, RewriteKind, Skipped, SynonymLexicon, TableRewriter,
};
use coachqa_core::eval::{evaluate_pipeline, format_percent, render_table};
use coachqa_core::remote::RemoteRewriter;
use coachqa_core::{export_training_file, relative_improvement, MetricsReport};
use coachqa_service::engine::sparse_index;
use coachqa_service::{AppState, Config, Engine};

#[derive(Parser)]
#[command(name = "coachqa", version, about = "Extractive question answering for health coaching")]
struct Cli {
    /// TOML config file. Environment variables named COACHQA_<KEY> override
    /// its values; --set overrides both.
    #[arg(long, short, global = true, env = "COACHQA_CONFIG")]
    config: Option<PathBuf>,

    /// Override one setting, e.g. --set k=10. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index management.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Retrieve passages without reading them.
    Query(QuestionArgs),
    /// Retrieve and read: the same answer the HTTP service would give.
    Ask(QuestionArgs),
    /// Evaluate the configured system on a label file.
    Eval(EvalArgs),
    /// Produce an enhanced dataset or hard-negative file.
    Enhance(EnhanceArgs),
    /// Order fine-tuning stages from per-dataset evaluation reports.
    Plan(PlanArgs),
    /// Write the fine-tuning hand-off file.
    ExportTrain(ExportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexAction {
    /// Build index snapshots for the configured corpus.
    Build,
}

#[derive(Args)]
struct QuestionArgs {
    question: String,
    #[arg(short)]
    k: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Label file; defaults to `labels` from the config.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(short)]
    k: Option<usize>,
    /// Where to write the metrics report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Name recorded as the system name instead of the generated one.
    #[arg(long)]
    system_name: Option<String>,
    /// Baseline report to compare against.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    HardNegatives,
    WordSub,
    Paraphrase,
    BackTranslate,
    Merge,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input label files. `merge` takes several, the others exactly one.
    #[arg(long, num_args = 1..)]
    labels: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Negatives per question (hard-negatives).
    #[arg(short, default_value_t = 3)]
    n: usize,
    /// Synonym lexicon, a JSON object of word -> [synonyms] (word-sub).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    max_subs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Offline rewrite table, a JSON object of question -> rewrite
    /// (paraphrase); used instead of `paraphrase_url`.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Report of the model before any fine-tuning.
    #[arg(long)]
    baseline: PathBuf,
    /// One report per enhanced dataset, keyed by the report's dataset name.
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Hard-negative file written by `enhance --method hard-negatives`.
    #[arg(long)]
    negatives: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("COACHQA_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::load(cli.config.as_deref())?;
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {item:?}"))?;
        config.set(key.trim(), value).map_err(anyhow::Error::msg)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Index { action: IndexAction::Build } => {
            for path in coachqa_service::engine::build_snapshots(&config)? {
                println!("{}", path.display());
            }
        }
        Command::Query(args) => {
            let engine = Engine::from_config(&config)?;
            let hits = engine.retriever().retrieve(&args.question, args.k.unwrap_or(config.k))?;
            print_json(&hits)?;
        }
        Command::Ask(args) => {
            let engine = Engine::from_config(&config)?;
            let answered = engine.ask(&args.question, args.k.unwrap_or(config.k))?;
            print_json(&answered)?;
        }
        Command::Eval(args) => eval(&config, args)?,
        Command::Enhance(args) => enhance(&config, args)?,
        Command::Plan(args) => {
            let baseline = MetricsReport::load(&args.baseline)?;
            let mut results = BTreeMap::new();
            for path in &args.results {
                let r = MetricsReport::load(path)?;
                if results.insert(r.dataset_name.clone(), r).is_some() {
                    bail!("two reports share the dataset name in {}", path.display());
                }
            }
            let plan = plan_continuous_finetune(&results, &baseline)?;
            if let Some(out) = &args.out {
                plan.save(out)?;
            }
            print_json(&plan)?;
        }
        Command::ExportTrain(args) => {
            let store = load_passages(&config.passages)?;
            let dataset = labels_for(&config, args.labels.as_deref(), &store)?;
            let negatives: BTreeMap<String, Vec<String>> = match &args.negatives {
                Some(p) => read_json(p)?,
                None => BTreeMap::new(),
            };
            let n = export_training_file(&dataset, &negatives, &args.out)?;
            eprintln!("wrote {n} training records to {}", args.out.display());
        }
        Command::Serve(args) => {
            if let Some(h) = args.host {
                config.host = h;
            }
            if let Some(p) = args.port {
                config.port = p;
            }
            serve(config)?;
        }
    }
    Ok(())
}

fn labels_for(config: &Config, explicit: Option<&Path>, store: &PassageStore) -> Result<Dataset> {
    let path = explicit
        .or(config.labels.as_deref())
        .context("no label file given (use --labels or set `labels` in the config)")?;
    Ok(load_labels(path, store)?)
}

fn eval(config: &Config, args: EvalArgs) -> Result<()> {
    let engine = Engine::from_config(config)?;
    let dataset = labels_for(config, args.labels.as_deref(), engine.store())?;
    let mut report = evaluate_pipeline(
        &dataset,
        engine.store(),
        engine.retriever(),
        engine.reader(),
        args.k.unwrap_or(config.k),
    )?;
    if let Some(name) = args.system_name {
        report.system_name = name;
    }
    if let Some(out) = &args.out {
        report.save(out)?;
    }
    print_json(&report)?;
    let mut table = vec![report.clone()];
    if let Some(base_path) = &args.baseline {
        let base = MetricsReport::load(base_path)?;
        let delta = relative_improvement(base.em, report.em)?;
        eprintln!(
            "EM {:.2} vs baseline {:.2}: {} relative",
            report.em,
            base.em,
            format_percent(delta)
        );
        table.insert(0, base);
    }
    eprint!("{}", render_table(&table));
    Ok(())
}

fn enhance(config: &Config, args: EnhanceArgs) -> Result<()> {
    let store = load_passages(&config.passages)?;
    let single = || -> Result<Dataset> {
        match args.labels.as_slice() {
            [] => labels_for(config, None, &store),
            [one] => Ok(load_labels(one, &store)?),
            _ => bail!("this method takes exactly one --labels file"),
        }
    };
    match args.method {
        Method::HardNegatives => {
            let dataset = single()?;
            let index = sparse_index(config, &store)?;
            let negatives = mine_hard_negatives(&dataset, &index, &store, args.n)?;
            write_json(&args.out, &negatives)?;
            eprintln!("mined negatives for {} questions", negatives.len());
        }
        Method::WordSub => {
            let dataset = single()?;
            let lexicon = SynonymLexicon::load(args.lexicon.as_ref().context("word-sub needs --lexicon")?)?;
            let (out, unchanged) = apply_word_substitution(&dataset, &lexicon, args.max_subs, args.seed)?;
            save_dataset(&out, &args.out)?;
            eprintln!("{} records, {} without eligible words", out.len(), unchanged.len());
        }
        Method::Paraphrase => {
            let dataset = single()?;
            let (out, skipped) = match (&args.table, &config.paraphrase_url) {
                (Some(table), _) => {
                    let map: HashMap<String, String> = read_json(table)?;
                    apply_paraphrase(&dataset, &TableRewriter::new("table", RewriteKind::Paraphrase, map))?
                }
                (None, Some(url)) => {
                    apply_paraphrase(&dataset, &RemoteRewriter::paraphraser("paraphraser", config.adapter(url)))?
                }
                (None, None) => bail!("paraphrase needs --table or `paraphrase_url`"),
            };
            finish_rewrite(&args.out, &out, &skipped)?;
        }
        Method::BackTranslate => {
            let dataset = single()?;
            let url = config.translate_url.as_ref().context("back-translate needs `translate_url`")?;
            let forward = RemoteRewriter::translator("translate-forward", config.adapter(url), &config.pivot_lang);
            let backward = RemoteRewriter::translator("translate-back", config.adapter(url), "en");
            let (out, skipped) = apply_back_translation(&dataset, &forward, &backward)?;
            finish_rewrite(&args.out, &out, &skipped)?;
        }
        Method::Merge => {
            if args.labels.is_empty() {
                bail!("merge needs at least one --labels file");
            }
            let datasets = args
                .labels
                .iter()
                .map(|p| load_labels(p, &store))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&Dataset> = datasets.iter().collect();
            let merged = merge_augment(&refs)?;
            save_dataset(&merged, &args.out)?;
            eprintln!("{} records after merging", merged.len());
        }
    }
    Ok(())
}

fn finish_rewrite(out: &Path, dataset: &Dataset, skipped: &[Skipped]) -> Result<()> {
    save_dataset(dataset, out)?;
    for s in skipped {
        tracing::info!(qid = %s.qid, reason = s.reason.code(), "rewrite skipped");
    }
    let sidecar = out.with_extension("skipped.json");
    write_json(&sidecar, &skipped)?;
    eprintln!(
        "{} rewrites kept, {} skipped (see {})",
        dataset.len(),
        skipped.len(),
        sidecar.display()
    );
    Ok(())
}

fn serve(config: Config) -> Result<()> {
    let state = Arc::new(AppState::open(config.clone())?);
    match Engine::from_config(&config) {
        Ok(engine) => state.install(engine),
        // The service still starts so an operator can fix the corpus and
        // trigger a rebuild; asks get 503 meanwhile.
        Err(e) => tracing::error!("no index loaded: {e}"),
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port))
            .await
            .with_context(|| format!("binding {}:{}", config.host, config.port))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        coachqa_service::serve(state, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&body).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}
