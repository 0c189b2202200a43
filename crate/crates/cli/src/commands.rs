use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context};
use crs_core::chat::{chat_respond, ChatTurn};
use crs_core::corpus::{
    build_redial_examples, build_review_examples, build_sequence_examples, build_tag_examples, liked_windows,
    load_examples, mix_and_export, task_file, Hyperparameters, TaskLabel, TrainingExample, TAG_EXAMPLES_PER_MOVIE,
};
use crs_core::eval::{
    bleu, mask_titles, recall_end_to_end, reference_dialogues, run_probe_suite, summary_table, Dialogue, EvalReport,
    SuiteOptions,
};
use crs_core::ingest::{parse_movies, parse_ratings, parse_tag_genome, Catalog, Role};
use crs_core::probes::{generate, generate_all, read_probes, write_probes, ProbeConfig, ProbeFamily};
use crs_core::scoring::{CompositeScorer, CompositeWeights, NgramModel, RemoteConfig, RemoteScorer, SequenceScorer};
use crs_core::stats::{train_mf, MfConfig, PopularityConfig, StatsConfig, StatsStore, StoreInputs, TagIndex, TAG_RELEVANCE_ABOVE};
use crs_core::synth::{SynthConfig, SynthData};
use crs_core::{jsonl, Execution};

use crate::config::Config;
use crate::data::{self, RawData};
use crate::server::{self, AppState};
use crate::*;

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Corpus(CorpusCommand::Build(a)) => corpus_build(&a, &config, exec),
        Command::Stats(StatsCommand::Build(a)) => stats_build(&a, exec),
        Command::Mf(MfCommand::Train(a)) => mf_train(&a, &config),
        Command::Probes(ProbesCommand::Gen(a)) => probes_gen(&a, &config, exec),
        Command::Eval(EvalCommand::Bleu(a)) => eval_bleu(&a),
        Command::Eval(EvalCommand::Recall(a)) => eval_recall(&a),
        Command::Eval(EvalCommand::Probes(a)) => eval_probes(&a, &config, exec),
        Command::Generate(a) => generate_dialogues(&a, &config),
        Command::Serve(a) => serve(&a, &config, exec),
        Command::Chat(a) => chat(&a, &config),
        Command::Synth(a) => synth(&a),
    }
}

pub fn load_store(config: &Config, flag: Option<&Path>) -> anyhow::Result<StatsStore> {
    let path = config.store_path(flag)?;
    StatsStore::load(&path).with_context(|| format!("loading store {}", path.display()))
}

fn ingest(a: &IngestArgs) -> anyhow::Result<()> {
    macro_rules! finish {
        ($parsed:expr) => {{
            let parsed = $parsed;
            let (n, rejected, skipped) = (parsed.records.len(), parsed.errors.len(), parsed.skipped.len());
            for e in parsed.errors.iter().take(10) {
                eprintln!("{}:{}: {}", a.input.display(), e.line, e.message);
            }
            let records = if a.strict { parsed.strict()? } else { parsed.records };
            jsonl::write(&a.out, &records)?;
            println!("{n} records, {rejected} rejected, {skipped} skipped -> {}", a.out.display());
        }};
    }
    let reader = || data::open(&a.input).map(std::io::BufReader::new);
    match a.dataset {
        Dataset::Redial => finish!(crs_core::ingest::parse_redial(reader()?)?),
        Dataset::Ratings => finish!(parse_ratings(reader()?)?),
        Dataset::Movies => finish!(parse_movies(reader()?)?),
        Dataset::Reviews => finish!(crs_core::ingest::parse_reviews(reader()?)?),
        Dataset::Genome => {
            let names = a.names.as_ref().ok_or_else(|| anyhow!("the genome dataset needs --names"))?;
            finish!(parse_tag_genome(reader()?, data::open(names)?)?)
        }
    }
    Ok(())
}

pub fn parse_tasks(spec: &str) -> anyhow::Result<Vec<TaskLabel>> {
    if spec.trim() == "all" {
        return Ok(TaskLabel::ALL.to_vec());
    }
    let mut tasks = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let task = TaskLabel::ALL
            .into_iter()
            .find(|t| t.slug() == part || t.label().trim_end_matches(':') == part)
            .ok_or_else(|| anyhow!("unknown task {part:?}; expected redial, sequences, tags, reviews or all"))?;
        if !tasks.contains(&task) {
            tasks.push(task);
        }
    }
    if tasks.is_empty() {
        bail!("no tasks given");
    }
    Ok(tasks)
}

fn corpus_build(a: &CorpusBuildArgs, config: &Config, exec: Execution) -> anyhow::Result<()> {
    let tasks = parse_tasks(&a.tasks)?;
    let seed = a.seed.unwrap_or(config.seeds.corpus);
    let raw = RawData::load(&a.data)?;
    let catalog = || -> anyhow::Result<Catalog> { Ok(Catalog::new(raw.require(&raw.movies, data::MOVIES)?.to_vec())) };
    let mut corpora: BTreeMap<TaskLabel, Vec<TrainingExample>> = BTreeMap::new();
    for task in tasks {
        let examples = match task {
            TaskLabel::RedialConversation => raw
                .require(&raw.redial, data::REDIAL)?
                .iter()
                .flat_map(build_redial_examples)
                .collect(),
            TaskLabel::MovielensSequence => {
                let catalog = catalog()?;
                let windows = liked_windows(raw.require(&raw.ratings, data::RATINGS)?, Some(&catalog), exec);
                build_sequence_examples(&windows, &catalog, exec)
            }
            TaskLabel::MovielensTags => {
                let tags = TagIndex::from_relevance(raw.require(&raw.genome, data::GENOME_SCORES)?, TAG_RELEVANCE_ABOVE);
                build_tag_examples(&tags, &catalog()?, seed, TAG_EXAMPLES_PER_MOVIE, exec)
            }
            TaskLabel::MovielensReview => build_review_examples(raw.require(&raw.reviews, data::REVIEWS)?, &catalog()?, exec),
        };
        corpora.insert(task, examples);
    }
    let manifest = mix_and_export(&corpora, &Hyperparameters::default(), seed, &a.out)?;
    for (task, count) in &manifest.counts {
        println!("{task:<24} {count:>8}");
    }
    println!("{:<24} {:>8}", "mixed", manifest.mixed_count);
    Ok(())
}

fn stats_build(a: &StatsBuildArgs, exec: Execution) -> anyhow::Result<()> {
    let raw = RawData::load(&a.data)?;
    let inputs = StoreInputs {
        movies: raw.require(&raw.movies, data::MOVIES)?.to_vec(),
        ratings: raw.require(&raw.ratings, data::RATINGS)?.to_vec(),
        tag_relevance: raw.genome.clone().unwrap_or_default(),
        reviews: raw.reviews.clone().unwrap_or_default(),
    };
    let config = StatsConfig {
        popularity: PopularityConfig {
            eligible_above: a.eligible_above,
            ..PopularityConfig::default()
        },
        ranking_k: a.top_k,
        ..StatsConfig::default()
    };
    let store = StatsStore::build(inputs, config, exec);
    store.save(&a.out)?;
    println!(
        "{} movies, {} windows, {} pairs, {} eligible, {} in top decile, {} tags -> {}",
        store.catalog.len(),
        store.windows.len(),
        store.cooccurrence.pair_len(),
        store.popularity.eligible().len(),
        store.popularity.top_decile().len(),
        store.tags.tag_count(),
        a.out.display()
    );
    Ok(())
}

fn mf_train(a: &MfTrainArgs, config: &Config) -> anyhow::Result<()> {
    let path = config.store_path(a.store.as_deref())?;
    let store = StatsStore::load(&path)?;
    let cfg = MfConfig {
        dim: a.dim,
        epochs: a.epochs,
        learning_rate: a.lr,
        regularization: a.reg,
        seed: a.seed.unwrap_or(config.seeds.mf),
        ..MfConfig::default()
    };
    let model = train_mf(&store.liked_pairs(), &cfg)?;
    model.save(&path)?;
    let first = model.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = model.final_loss().unwrap_or(f64::NAN);
    println!(
        "{} users, {} items, dim {}; loss {first:.4} -> {last:.4}",
        model.user_ids.len(),
        model.item_ids.len(),
        model.dim()
    );
    Ok(())
}

fn probes_gen(a: &ProbesGenArgs, config: &Config, exec: Execution) -> anyhow::Result<()> {
    let store = load_store(config, a.store.as_deref())?;
    let cfg = ProbeConfig::with_seed(a.seed.unwrap_or(config.seeds.probes));
    let set = if a.family == "all" {
        generate_all(&store, &cfg, exec)
    } else {
        generate(&store, a.family.parse::<ProbeFamily>()?, &cfg, exec)
    };
    write_probes(&a.out, &set.probes)?;
    let mut counts: BTreeMap<ProbeFamily, usize> = BTreeMap::new();
    for p in &set.probes {
        *counts.entry(p.family).or_default() += 1;
    }
    for (f, n) in counts {
        println!("{f:<16} {n:>8}");
    }
    if set.skipped_no_negative > 0 {
        println!("skipped (no valid negative): {}", set.skipped_no_negative);
    }
    Ok(())
}

pub fn resolve_timestamp(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

fn finish_report(report: &EvalReport, args: &ReportArgs) -> anyhow::Result<()> {
    print!("{}", summary_table(std::slice::from_ref(report)));
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_dialogues(a: &DialogueArgs) -> anyhow::Result<(Vec<Dialogue>, Vec<Dialogue>)> {
    let generated: Vec<Dialogue> = jsonl::read(&a.generated)?;
    let references = reference_dialogues(&data::load_redial(&a.references)?);
    Ok((generated, references))
}

/// Generated and human recommender turns paired by conversation and turn.
pub fn aligned_turns(generated: &[Dialogue], references: &[Dialogue]) -> anyhow::Result<(Vec<String>, Vec<String>)> {
    let by_id: BTreeMap<&str, &Dialogue> = references.iter().map(|d| (d.conversation_id.as_str(), d)).collect();
    let (mut cands, mut refs) = (Vec::new(), Vec::new());
    for g in generated {
        let r = by_id
            .get(g.conversation_id.as_str())
            .ok_or_else(|| anyhow!("conversation {} has no reference", g.conversation_id))?;
        if r.turns.len() != g.turns.len() {
            bail!(
                "conversation {}: {} generated turns but {} reference turns",
                g.conversation_id,
                g.turns.len(),
                r.turns.len()
            );
        }
        for (c, h) in g.turns.iter().zip(&r.turns) {
            cands.push(mask_titles(&c.to_lowercase())?);
            refs.push(mask_titles(h)?);
        }
    }
    Ok((cands, refs))
}

fn eval_bleu(a: &DialogueArgs) -> anyhow::Result<()> {
    let (generated, references) = load_dialogues(a)?;
    let (cands, refs) = aligned_turns(&generated, &references)?;
    let mut report = EvalReport::new("dialogues", a.report.seed.unwrap_or(0), resolve_timestamp(a.report.timestamp));
    report.bleu = Some(bleu(&cands, &refs)?);
    finish_report(&report, &a.report)
}

fn eval_recall(a: &DialogueArgs) -> anyhow::Result<()> {
    let (generated, references) = load_dialogues(a)?;
    let recall = recall_end_to_end(&generated, &references)?;
    if recall.zero_denominator {
        eprintln!("warning: no movie mentions in the generated dialogues");
    }
    let mut report = EvalReport::new("dialogues", a.report.seed.unwrap_or(0), resolve_timestamp(a.report.timestamp));
    report.recall_end_to_end = Some(recall);
    finish_report(&report, &a.report)
}

pub fn parse_weights(s: &str) -> anyhow::Result<CompositeWeights> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("weights {s:?}"))?;
    let [relation, tag, popularity] = parts[..] else {
        bail!("weights take three values: relation,tag,popularity");
    };
    let w = CompositeWeights::new(relation, tag, popularity);
    w.validate()?;
    Ok(w)
}

/// N-gram training pairs: the corpus directory's task files, or the
/// sequence, tag and review tasks rebuilt from the store.
fn ngram_pairs(store: Option<&StatsStore>, corpus: Option<&Path>, seed: u64, exec: Execution) -> anyhow::Result<Vec<(String, String)>> {
    let examples: Vec<TrainingExample> = match (corpus, store) {
        (Some(dir), _) => {
            let mut all = Vec::new();
            for task in TaskLabel::ALL {
                let path = dir.join(task_file(task));
                if path.exists() {
                    all.extend(load_examples(&path)?);
                }
            }
            if all.is_empty() {
                bail!("no task files in {}", dir.display());
            }
            all
        }
        (None, Some(store)) => {
            let mut all = build_sequence_examples(&store.windows, &store.catalog, exec);
            all.extend(build_tag_examples(&store.tags, &store.catalog, seed, TAG_EXAMPLES_PER_MOVIE, exec));
            all.extend(build_review_examples(&store.reviews, &store.catalog, exec));
            all
        }
        (None, None) => bail!("the n-gram backend needs a store or a corpus"),
    };
    Ok(examples.into_iter().map(|e| (e.model_input(), e.target)).collect())
}

pub struct ScorerSpec<'a> {
    pub kind: ScorerKind,
    pub weights: CompositeWeights,
    pub endpoint: Option<&'a str>,
    pub corpus: Option<&'a Path>,
}

/// Builds a scorer. Must run outside any async runtime (the remote client
/// is blocking).
pub fn build_scorer(
    spec: &ScorerSpec<'_>,
    config: &Config,
    store: Option<Arc<StatsStore>>,
    exec: Execution,
) -> anyhow::Result<Arc<dyn SequenceScorer>> {
    Ok(match spec.kind {
        ScorerKind::Composite => {
            let store = store.ok_or_else(|| anyhow!("the composite backend needs a store"))?;
            Arc::new(CompositeScorer::new(store, spec.weights)?)
        }
        ScorerKind::Ngram => {
            let pairs = ngram_pairs(store.as_deref(), spec.corpus, config.seeds.corpus, exec)?;
            Arc::new(NgramModel::train(pairs.iter().map(|(i, t)| (i.as_str(), t.as_str())), config.scorer.ngram)?)
        }
        ScorerKind::Remote => {
            let mut remote: RemoteConfig = config.scorer.remote.clone();
            if let Some(e) = spec.endpoint {
                remote.endpoint = e.to_string();
            }
            Arc::new(RemoteScorer::new(remote)?)
        }
    })
}

fn default_kind(config: &Config) -> ScorerKind {
    match config.scorer.backend {
        crs_core::scoring::Backend::Composite => ScorerKind::Composite,
        crs_core::scoring::Backend::Ngram => ScorerKind::Ngram,
        crs_core::scoring::Backend::Remote => ScorerKind::Remote,
    }
}

fn eval_probes(a: &EvalProbesArgs, config: &Config, exec: Execution) -> anyhow::Result<()> {
    let probes = read_probes(&a.probes)?;
    let kind = a.scorer.unwrap_or_else(|| default_kind(config));
    let store = match kind {
        ScorerKind::Remote => None,
        ScorerKind::Ngram if a.corpus.is_some() || config.corpus.is_some() => None,
        _ => Some(Arc::new(load_store(config, a.store.as_deref())?)),
    };
    let weights = match &a.weights {
        Some(w) => parse_weights(w)?,
        None => config.scorer.weights,
    };
    let spec = ScorerSpec {
        kind,
        weights,
        endpoint: a.endpoint.as_deref(),
        corpus: a.corpus.as_deref().or(config.corpus.as_deref()),
    };
    let scorer = build_scorer(&spec, config, store, exec)?;
    let options = SuiteOptions {
        task_prefix: if a.no_prefix { String::new() } else { SuiteOptions::default().task_prefix },
        exec,
    };
    let suite = run_probe_suite(&probes, scorer.as_ref(), &options)?;
    for (family, err) in &suite.errors {
        eprintln!("warning: {family} probes had scoring errors, first: {err}");
    }
    let report = EvalReport::new(suite.backend_id.clone(), a.report.seed.unwrap_or(config.seeds.probes), resolve_timestamp(a.report.timestamp))
        .with_probes(suite);
    finish_report(&report, &a.report)
}

/// The dialogue so far as chat turns, movie mentions rendered as
/// `@ title @`.
fn history_turns(conversation: &crs_core::ingest::RedialConversation, upto: usize) -> Vec<ChatTurn> {
    conversation.messages[..upto]
        .iter()
        .map(|m| {
            let text = crs_core::corpus::render_mentions(&m.text, &conversation.movie_mentions);
            match m.role {
                Role::Seeker => ChatTurn::user(text),
                Role::Recommender => ChatTurn::assistant(text),
            }
        })
        .filter(|t| !t.text.trim().is_empty())
        .collect()
}

fn generate_dialogues(a: &GenerateArgs, config: &Config) -> anyhow::Result<()> {
    let store = load_store(config, a.store.as_deref())?;
    let conversations = data::load_redial(&a.redial)?;
    let mut out = Vec::with_capacity(conversations.len());
    for c in &conversations {
        let mut turns = Vec::new();
        for (i, m) in c.messages.iter().enumerate() {
            if m.role == Role::Recommender {
                turns.push(chat_respond(&history_turns(c, i), &store, &config.chat)?.reply);
            }
        }
        out.push(Dialogue {
            conversation_id: c.conversation_id.clone(),
            turns,
        });
    }
    jsonl::write(&a.out, &out)?;
    println!("{} dialogues -> {}", out.len(), a.out.display());
    Ok(())
}

fn serve(a: &ServeArgs, config: &Config, exec: Execution) -> anyhow::Result<()> {
    let path = config.store_path(a.store.as_deref())?;
    let store = Arc::new(StatsStore::load(&path).with_context(|| format!("loading store {}", path.display()))?);
    let spec = ScorerSpec {
        kind: a.scorer.unwrap_or_else(|| default_kind(config)),
        weights: config.scorer.weights,
        endpoint: None,
        corpus: config.corpus.as_deref(),
    };
    let scorer = build_scorer(&spec, config, Some(store.clone()), exec)?;
    let state = Arc::new(AppState {
        store,
        chat: config.chat,
        scorer,
    });
    let addr = format!("{}:{}", a.host.as_deref().unwrap_or("127.0.0.1"), a.port.unwrap_or(config.port));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })?;
    // The remote client, if any, is dropped here, outside the runtime.
    Ok(())
}

fn chat(a: &StoreArg, config: &Config) -> anyhow::Result<()> {
    let store = load_store(config, a.store.as_deref())?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut history: Vec<ChatTurn> = Vec::new();
    writeln!(stdout, "{}", chat_respond(&[], &store, &config.chat)?.reply)?;
    writeln!(stdout, "(/reset starts over, /quit or end of input leaves)")?;
    loop {
        write!(stdout, "> ")?;
        stdout.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim();
        match line {
            "" => continue,
            "/quit" | "/exit" => break,
            "/reset" => {
                history.clear();
                continue;
            }
            _ => {}
        }
        history.push(ChatTurn::user(line));
        let reply = chat_respond(&history, &store, &config.chat)?;
        writeln!(stdout, "{}", reply.reply)?;
        for r in &reply.recommendations {
            writeln!(stdout, "    {:<48} {:>9.4}  {:?}", r.title, r.score, r.evidence)?;
        }
        history.push(ChatTurn::assistant(reply.reply));
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SynthConfig {
        seed: a.seed,
        ..SynthConfig::default()
    };
    if let Some(u) = a.users {
        cfg.users = u;
    }
    if let Some(d) = a.dialogues {
        cfg.dialogues = d;
    }
    SynthData::generate(&cfg).write_raw(&a.out)?;
    println!("synthetic dataset -> {}", a.out.display());
    Ok(())
}

