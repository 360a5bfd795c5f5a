//! Stage drivers over a run directory. Each stage reads the artifacts of
//! earlier stages from the run directory, writes its own, and returns a
//! small summary. The command-line front end is a thin layer over these.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{compare, merge, report, AnalyticsError, Comparison, DictionaryMatcher, FrequencyReport, MatchCounts, MergeMap};
use crate::annotation::{
    attach_context, cohen_kappa, sanity_sample, split_and_assign, write_sanity_packet, AnnotationError, AnnotationPair, KappaResult, NoOverlap, RoundStore,
};
use crate::config::{require_path, ConfigError, RunConfig};
use crate::corpus::{admit, ContextIndex, CorpusError, CorpusFormat, FilterPolicy, TweetStream};
use crate::curation::{
    close_round, propose, read_labels, write_labels, write_triplets, CurationError, Dictionary, IterationState, Label, LabeledPair, LabelsError, RoundProposal,
    RoundSummary,
};
use crate::extract::{extract_all, preclean_text, write_mentions, read_mentions, AssetError, EmojiMap, ExtractError, Extractor, Gazetteer, RemoteConfig, RemoteExtractor};
use crate::mapping::{
    elbow, threshold_sweep, top1_all, unit_grid, write_candidates, ConceptInventory, EmbedError, EmbeddingStore, InventoryError, MappingError, Sweep, SweepError,
    TrigramEmbedder, Vectors,
};
use crate::normalize::{frequency_filter, stats, summarize, LemmaTable, Normalizer, RuleError, RuleSet, SuffixLemmatizer, TableError};

/// Dimension of the trigram vectors used when no embedding store is given.
pub const FALLBACK_DIM: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("{path}: {source}")]
    Asset { path: String, source: AssetError },
    #[error("rules: {0}")]
    Rule(#[from] RuleError),
    #[error("lemma table: {0}")]
    Table(#[from] TableError),
    #[error("inventory: {0}")]
    Inventory(#[from] InventoryError),
    #[error("embeddings: {0}")]
    Embed(#[from] EmbedError),
    #[error("mapping: {0}")]
    Mapping(#[from] MappingError),
    #[error("sweep: {0}")]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error("labels: {0}")]
    Labels(#[from] LabelsError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("kappa: {0}")]
    Kappa(#[from] NoOverlap),
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// How a failure maps onto a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Data,
    External,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::External => 3,
        }
    }
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => ErrorKind::Usage,
            PipelineError::Extract(_) => ErrorKind::External,
            PipelineError::Annotation(AnnotationError::Config(_)) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// Opens an artifact an earlier stage should have produced.
fn open_artifact(path: &Path, stage: &str) -> Result<BufReader<File>> {
    if !path.exists() {
        return Err(PipelineError::Usage(format!("{} not found; run `{stage}` first", path.display())));
    }
    open(path)
}

/// Writes a whole file through a temporary sibling and a rename.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("partial");
    let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<T> {
    serde_json::from_reader(open_artifact(path, stage)?).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// File names inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn context(&self) -> PathBuf {
        self.path("context.tsv")
    }
    pub fn ingest_summary(&self) -> PathBuf {
        self.path("ingest.json")
    }
    pub fn mentions(&self) -> PathBuf {
        self.path("mentions.tsv")
    }
    pub fn lemmas_all(&self) -> PathBuf {
        self.path("lemmas-all.tsv")
    }
    pub fn lemmas(&self) -> PathBuf {
        self.path("lemmas.tsv")
    }
    pub fn loop_state(&self) -> PathBuf {
        self.path("loop-state.json")
    }
    pub fn round(&self, round: u32, kind: &str) -> PathBuf {
        self.path(&format!("round-{round}-{kind}"))
    }
    pub fn dictionary(&self) -> PathBuf {
        self.path("dictionary.tsv")
    }
    pub fn annotation_dir(&self) -> PathBuf {
        self.path("annotation")
    }
    pub fn match_counts(&self) -> PathBuf {
        self.path("match-counts.tsv")
    }
    pub fn report(&self) -> PathBuf {
        self.path("report.tsv")
    }
}

pub fn run_dir(cfg: &RunConfig) -> RunDir {
    RunDir::new(&cfg.run_dir)
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub lines: u64,
    pub records: u64,
    pub malformed: u64,
    pub admitted: u64,
}

pub fn load_emoji(cfg: &RunConfig) -> Result<EmojiMap> {
    match &cfg.emoji {
        None => Ok(EmojiMap::default()),
        Some(p) => {
            let p = require_path("--emoji", Some(p))?;
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            EmojiMap::parse(&text).map_err(|source| PipelineError::Asset {
                path: p.display().to_string(),
                source,
            })
        }
    }
}

/// Filters the corpus and writes the pre-cleaned context index.
pub fn ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let path = require_path("--corpus", cfg.corpus.as_ref())?;
    let format = match &cfg.corpus_format {
        Some(f) => f.parse::<CorpusFormat>().map_err(PipelineError::Usage)?,
        None => CorpusFormat::from_path(path),
    };
    let policy = FilterPolicy::new(cfg.langs.iter(), cfg.drop_retweets, cfg.drop_url_tweets)?;
    let emoji = load_emoji(cfg)?;
    let mut stream = TweetStream::new(open(path)?, format);
    let mut kept = Vec::new();
    for t in stream.by_ref() {
        let t = t?;
        if admit(&t, &policy) {
            let text = preclean_text(&t.text, &emoji);
            if !text.is_empty() {
                kept.push((t.id, text));
            }
        }
    }
    let stats = stream.stats();
    let summary = IngestSummary {
        lines: stats.lines,
        records: stats.records,
        malformed: stats.malformed,
        admitted: kept.len() as u64,
    };
    let index = ContextIndex::build(kept)?;
    let rd = run_dir(cfg);
    write_file(&rd.context(), |w| index.write_to(w))?;
    write_json(&rd.ingest_summary(), &summary)?;
    Ok(summary)
}

pub fn load_context(cfg: &RunConfig) -> Result<ContextIndex> {
    Ok(ContextIndex::read_from(open_artifact(&run_dir(cfg).context(), "ingest")?)?)
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub tweets: u64,
    pub tweets_with_mentions: u64,
    pub mentions: u64,
}

/// The remote service when a URL is configured, else the gazetteer.
pub fn make_extractor(cfg: &RunConfig) -> Result<Box<dyn Extractor>> {
    if let Some(url) = &cfg.extractor_url {
        let mut rc = RemoteConfig::new(url.clone());
        rc.timeout = std::time::Duration::from_secs(cfg.extractor_timeout_secs.max(1));
        rc.max_in_flight = cfg.extractor_max_in_flight;
        return Ok(Box::new(RemoteExtractor::new(rc)));
    }
    let p = require_path("--gazetteer", cfg.gazetteer.as_ref())?;
    let text = fs::read_to_string(p).map_err(io_err(p))?;
    let g = Gazetteer::parse(&text).map_err(|source| PipelineError::Asset {
        path: p.display().to_string(),
        source,
    })?;
    Ok(Box::new(g))
}

pub fn extract(cfg: &RunConfig, extractor: &dyn Extractor) -> Result<ExtractSummary> {
    let index = load_context(cfg)?;
    let docs: Vec<(String, String)> = index.iter().map(|(i, t)| (i.to_string(), t.to_string())).collect();
    let parallelism = match cfg.extractor_url {
        Some(_) => cfg.extractor_max_in_flight,
        None => rayon::current_num_threads(),
    };
    let per_tweet = extract_all(&docs, extractor, parallelism)?;
    let summary = ExtractSummary {
        tweets: docs.len() as u64,
        tweets_with_mentions: per_tweet.iter().filter(|m| !m.is_empty()).count() as u64,
        mentions: per_tweet.iter().map(Vec::len).sum::<usize>() as u64,
    };
    write_file(&run_dir(cfg).mentions(), |w| write_mentions(w, per_tweet.iter().flatten()))?;
    Ok(summary)
}

// ---------------------------------------------------------------- normalize

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizeSummary {
    pub mentions: u64,
    pub degenerate: u64,
    pub unique_surfaces: u64,
    pub lemmas: usize,
    pub frequent_lemmas: usize,
    pub stats_text: String,
}

pub fn make_normalizer(cfg: &RunConfig) -> Result<Normalizer> {
    let rules = match &cfg.rules {
        None => RuleSet::default(),
        Some(p) => {
            let p = require_path("--rules", Some(p))?;
            RuleSet::parse(&fs::read_to_string(p).map_err(io_err(p))?)?
        }
    };
    let lemmatizer = match &cfg.lemma_exceptions {
        None => SuffixLemmatizer::new(),
        Some(p) => {
            let p = require_path("--lemma-exceptions", Some(p))?;
            SuffixLemmatizer::with_exceptions(&fs::read_to_string(p).map_err(io_err(p))?)
        }
    };
    Ok(Normalizer::new(rules, Box::new(lemmatizer)))
}

pub fn normalize(cfg: &RunConfig) -> Result<NormalizeSummary> {
    let rd = run_dir(cfg);
    let path = rd.mentions();
    let mentions = read_mentions(open_artifact(&path, "extract")?).map_err(|source| PipelineError::Asset {
        path: path.display().to_string(),
        source,
    })?;
    let normalizer = make_normalizer(cfg)?;
    let (table, ns) = normalizer.build_table(&mentions, cfg.sample_cap, cfg.seed)?;
    let frequent = frequency_filter(&table, cfg.min_lemma_count);
    write_file(&rd.lemmas_all(), |w| table.write_tsv(w))?;
    write_file(&rd.lemmas(), |w| frequent.write_tsv(w))?;
    let (text, tsv) = match summarize(&table.counts()) {
        Ok(all) => {
            let f = summarize(&frequent.counts()).ok();
            (
                stats::render_text(&all, f.as_ref(), cfg.min_lemma_count),
                stats::render_tsv(&all, f.as_ref()),
            )
        }
        Err(_) => ("no lemmas\n".to_string(), String::new()),
    };
    write_file(&rd.path("lemma-stats.txt"), |w| w.write_all(text.as_bytes()))?;
    write_file(&rd.path("lemma-stats.tsv"), |w| w.write_all(tsv.as_bytes()))?;
    Ok(NormalizeSummary {
        mentions: ns.mentions,
        degenerate: ns.degenerate,
        unique_surfaces: ns.unique_surfaces,
        lemmas: table.len(),
        frequent_lemmas: frequent.len(),
        stats_text: text,
    })
}

pub fn load_table(cfg: &RunConfig) -> Result<LemmaTable> {
    Ok(LemmaTable::read_tsv(open_artifact(&run_dir(cfg).lemmas(), "normalize")?, cfg.sample_cap, cfg.seed)?)
}

pub fn load_full_table(cfg: &RunConfig) -> Result<LemmaTable> {
    Ok(LemmaTable::read_tsv(open_artifact(&run_dir(cfg).lemmas_all(), "normalize")?, cfg.sample_cap, cfg.seed)?)
}

// ---------------------------------------------------------------- mapping

pub fn load_inventory(cfg: &RunConfig) -> Result<ConceptInventory> {
    let p = require_path("--inventory", cfg.inventory.as_ref())?;
    Ok(ConceptInventory::read_tsv(open(p)?)?)
}

/// The configured store, or an empty store backed by trigram vectors.
pub fn load_embeddings(cfg: &RunConfig) -> Result<(EmbeddingStore, Option<TrigramEmbedder>)> {
    match &cfg.embeddings {
        Some(p) => {
            let p = require_path("--embeddings", Some(p))?;
            Ok((EmbeddingStore::read(open(p)?)?, None))
        }
        None => {
            log::warn!("no embedding store configured; semantic scores use character-trigram vectors");
            Ok((EmbeddingStore::new(FALLBACK_DIM), Some(TrigramEmbedder { dim: FALLBACK_DIM })))
        }
    }
}

/// Proposal as saved on disk, with the embedding store it was made with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalFile {
    pub proposal: RoundProposal,
    pub embeddings: Option<PathBuf>,
}

pub fn load_state(cfg: &RunConfig) -> Result<IterationState> {
    read_json(&run_dir(cfg).loop_state(), "map")
}

/// Current loop state, starting round 1 from the filtered lemma table when
/// none exists.
pub fn load_or_init_state(cfg: &RunConfig) -> Result<IterationState> {
    let rd = run_dir(cfg);
    if rd.loop_state().exists() {
        let state = load_state(cfg)?;
        if state.config != cfg.loop_config() {
            log::warn!("loop settings differ from the ones saved at round 1; the saved ones apply");
        }
        return Ok(state);
    }
    let table = load_table(cfg)?;
    let state = IterationState::new(&table, cfg.loop_config());
    write_json(&rd.loop_state(), &state)?;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    pub round: u32,
    pub pending: usize,
    pub candidates: usize,
    pub below_tau: usize,
    pub sample: usize,
}

pub fn map(cfg: &RunConfig) -> Result<MapSummary> {
    let rd = run_dir(cfg);
    let state = load_or_init_state(cfg)?;
    if !state.is_open() {
        return Err(PipelineError::Usage(format!("the loop is finished ({:?}); nothing to map", state.status)));
    }
    let inv = load_inventory(cfg)?;
    let (store, fallback) = load_embeddings(cfg)?;
    let vectors = Vectors {
        store: &store,
        fallback: fallback.as_ref().map(|f| f as &dyn crate::mapping::Embedder),
    };
    if state.round > 1 {
        let prev: Option<ProposalFile> = read_json(&rd.round(state.round - 1, "proposal.json"), "map").ok();
        if prev.is_some_and(|p| p.embeddings == cfg.embeddings) {
            log::warn!("round {} reuses the previous round's embedding store", state.round);
        }
    }
    let proposal = propose(&state, &inv, &vectors)?;
    write_file(&rd.round(state.round, "candidates.tsv"), |w| write_candidates(w, &proposal.candidates, &inv, state.round))?;
    write_file(&rd.round(state.round, "sample.tsv"), |w| write_candidates(w, &proposal.sample, &inv, state.round))?;
    let summary = MapSummary {
        round: state.round,
        pending: state.pending.len(),
        candidates: proposal.candidates.len(),
        below_tau: proposal.below_tau.len(),
        sample: proposal.sample.len(),
    };
    write_json(
        &rd.round(state.round, "proposal.json"),
        &ProposalFile {
            proposal,
            embeddings: cfg.embeddings.clone(),
        },
    )?;
    Ok(summary)
}

pub fn load_proposal(cfg: &RunConfig, round: u32) -> Result<RoundProposal> {
    let p: ProposalFile = read_json(&run_dir(cfg).round(round, "proposal.json"), "map")?;
    Ok(p.proposal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub sweep: Sweep,
    pub elbow_semantic: Option<f64>,
    pub elbow_lexical: Option<f64>,
}

/// Threshold curves over the filtered lemma table and their elbows.
pub fn sweep(cfg: &RunConfig) -> Result<SweepSummary> {
    let table = load_table(cfg)?;
    let inv = load_inventory(cfg)?;
    let (store, fallback) = load_embeddings(cfg)?;
    let vectors = Vectors {
        store: &store,
        fallback: fallback.as_ref().map(|f| f as &dyn crate::mapping::Embedder),
    };
    let lemmas: Vec<String> = table.lemmas().map(str::to_string).collect();
    let tops = top1_all(&lemmas, &inv, &vectors)?;
    let taus = unit_grid(cfg.sweep_steps);
    let s = threshold_sweep(&tops, &taus)?;
    let summary = SweepSummary {
        elbow_semantic: elbow(&s.taus, &s.semantic).ok(),
        elbow_lexical: elbow(&s.taus, &s.lexical).ok(),
        sweep: s,
    };
    let tsv = crate::mapping::sweep::render_tsv(&summary.sweep);
    write_file(&run_dir(cfg).path("sweep.tsv"), |w| w.write_all(tsv.as_bytes()))?;
    Ok(summary)
}

// ---------------------------------------------------------------- rounds

fn current_round(cfg: &RunConfig, round: Option<u32>) -> Result<u32> {
    match round {
        Some(r) => Ok(r),
        None => Ok(load_state(cfg)?.round),
    }
}

/// Writes the validation sample of a round and returns its size.
pub fn sample(cfg: &RunConfig, round: Option<u32>) -> Result<(u32, usize)> {
    let round = current_round(cfg, round)?;
    let proposal = load_proposal(cfg, round)?;
    let inv = load_inventory(cfg)?;
    write_file(&run_dir(cfg).round(round, "sample.tsv"), |w| write_candidates(w, &proposal.sample, &inv, round))?;
    Ok((round, proposal.sample.len()))
}

fn read_labels_file(path: &Path) -> Result<Vec<LabeledPair>> {
    Ok(read_labels(open(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportSummary {
    pub round: u32,
    pub imported: usize,
    pub total: usize,
    pub unknown_pairs: usize,
}

/// Merges a labels file into the round's labels; imported rows win.
pub fn labels_import(cfg: &RunConfig, path: &Path, round: Option<u32>) -> Result<ImportSummary> {
    let round = current_round(cfg, round)?;
    let path = require_path("--labels", Some(&path.to_path_buf()))?.to_path_buf();
    let incoming = read_labels_file(&path)?;
    let proposal = load_proposal(cfg, round)?;
    let known: std::collections::BTreeSet<(&str, &str)> = proposal.candidates.iter().map(|c| (c.lemma.as_str(), c.concept_id.as_str())).collect();
    let unknown = incoming.iter().filter(|l| !known.contains(&(l.lemma.as_str(), l.concept_id.as_str()))).count();
    if unknown > 0 {
        log::warn!("{unknown} imported labels are not candidates of round {round} and will be ignored at close");
    }
    let out = run_dir(cfg).round(round, "labels.tsv");
    let mut merged: BTreeMap<(String, String), Label> = BTreeMap::new();
    if out.exists() {
        for l in read_labels_file(&out)? {
            merged.insert((l.lemma, l.concept_id), l.label);
        }
    }
    let mut seen: BTreeMap<(String, String), Label> = BTreeMap::new();
    for l in &incoming {
        let key = (l.lemma.clone(), l.concept_id.clone());
        if let Some(prev) = seen.insert(key.clone(), l.label) {
            if prev != l.label {
                return Err(CurationError::Adjudication {
                    lemma: key.0,
                    concept_id: key.1,
                }
                .into());
            }
        }
        merged.insert(key, l.label);
    }
    let pairs: Vec<LabeledPair> = merged.into_iter().map(|((l, c), label)| LabeledPair::new(&l, &c, label)).collect();
    write_file(&out, |w| write_labels(w, &pairs))?;
    Ok(ImportSummary {
        round,
        imported: incoming.len(),
        total: pairs.len(),
        unknown_pairs: unknown,
    })
}

/// Final labels of a round: the imported file if present, else a closed
/// annotation journal.
pub fn round_labels(cfg: &RunConfig, round: u32) -> Result<Vec<LabeledPair>> {
    let rd = run_dir(cfg);
    let file = rd.round(round, "labels.tsv");
    if file.exists() {
        return read_labels_file(&file);
    }
    let journal = crate::annotation::journal::journal_path(&rd.annotation_dir(), round);
    if journal.exists() {
        let store = RoundStore::open(&rd.annotation_dir(), round)?;
        if !store.state().closed {
            return Err(PipelineError::Usage(format!("annotation round {round} is still open; adjudicate and close it, or import labels")));
        }
        return Ok(store.state().final_labels()?);
    }
    Err(PipelineError::Usage(format!("no labels for round {round}; run `labels-import` or annotate via `serve`")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloseSummary {
    pub summary: RoundSummary,
    pub status: crate::curation::LoopStatus,
    pub conservation: crate::curation::Conservation,
    pub dictionary_lemmas: usize,
    pub dictionary_concepts: usize,
}

pub fn round_close(cfg: &RunConfig) -> Result<CloseSummary> {
    let rd = run_dir(cfg);
    let state = load_state(cfg)?;
    let round = state.round;
    let proposal = load_proposal(cfg, round)?;
    let labels = round_labels(cfg, round)?;
    let table = load_table(cfg)?;
    let inv = load_inventory(cfg)?;
    let (next, outcome) = close_round(&state, &proposal, &labels, &table, &inv)?;
    write_file(&rd.round(round, "triplets.jsonl"), |w| write_triplets(w, &outcome.triplets.triplets))?;
    write_file(&rd.dictionary(), |w| next.dictionary.write_tsv(w))?;
    write_json(&rd.round(round, "state.json"), &next)?;
    write_json(&rd.loop_state(), &next)?;
    let conservation = next.conservation();
    debug_assert!(conservation.holds());
    Ok(CloseSummary {
        summary: next.history.last().cloned().expect("close records a summary"),
        status: next.status,
        conservation,
        dictionary_lemmas: next.dictionary.lemma_count(),
        dictionary_concepts: next.dictionary.concept_count(),
    })
}

// ---------------------------------------------------------------- annotation

/// Opens the annotation journal of a round, creating it from the round's
/// candidates on first use.
pub fn open_annotation(cfg: &RunConfig, round: u32) -> Result<RoundStore> {
    let rd = run_dir(cfg);
    let dir = rd.annotation_dir();
    if crate::annotation::journal::journal_path(&dir, round).exists() {
        return Ok(RoundStore::open(&dir, round)?);
    }
    let proposal = load_proposal(cfg, round)?;
    let inv = load_inventory(cfg)?;
    let pairs: Vec<AnnotationPair> = proposal
        .candidates
        .iter()
        .map(|c| AnnotationPair::new(&c.lemma, &c.concept_id, inv.get(&c.concept_id).map(|x| x.preferred_name.as_str()).unwrap_or("")))
        .collect();
    let mut tasks = split_and_assign(&pairs, &cfg.annotators, cfg.seed ^ u64::from(round))?;
    let table = load_full_table(cfg)?;
    let surfaces = tasks
        .iter()
        .map(|t| {
            let forms = table.get(&t.lemma).map(|r| r.surface_forms.keys().cloned().collect()).unwrap_or_default();
            (t.lemma.clone(), forms)
        })
        .collect();
    attach_context(&mut tasks, &surfaces, &load_context(cfg)?, cfg.seed);
    Ok(RoundStore::create(&dir, round, tasks)?)
}

pub fn kappa_from_files(a: &Path, b: &Path) -> Result<KappaResult> {
    let load = |p: &Path| -> Result<BTreeMap<String, Label>> {
        Ok(read_labels_file(p)?.into_iter().map(|l| (format!("{}\t{}", l.lemma, l.concept_id), l.label)).collect())
    };
    Ok(cohen_kappa(&load(a)?, &load(b)?)?)
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    Ok(Dictionary::read_tsv(open_artifact(path, "round-close")?)?)
}

/// Writes the dictionary to `out`, and a review packet when asked.
pub fn dict_export(cfg: &RunConfig, out: &Path, sanity_packet: Option<&Path>) -> Result<usize> {
    let state = load_state(cfg)?;
    write_file(out, |w| state.dictionary.write_tsv(w))?;
    if let Some(p) = sanity_packet {
        let items = sanity_sample(&state.dictionary, cfg.sanity_size, &load_context(cfg)?, cfg.seed);
        write_file(p, |w| write_sanity_packet(w, &items))?;
    }
    Ok(state.dictionary.lemma_count())
}

// ---------------------------------------------------------------- analytics

/// Counts dictionary concepts over the ingested context index.
pub fn match_stage(cfg: &RunConfig, dictionary: Option<&Path>) -> Result<MatchCounts> {
    let rd = run_dir(cfg);
    let dict_path = dictionary.map(Path::to_path_buf).unwrap_or_else(|| rd.dictionary());
    let dict = load_dictionary(&dict_path)?;
    let index = load_context(cfg)?;
    let texts: Vec<&str> = index.iter().map(|(_, t)| t).collect();
    let counts = DictionaryMatcher::new(&dict)?.match_texts(&texts);
    write_file(&rd.match_counts(), |w| counts.write_tsv(w))?;
    Ok(counts)
}

pub fn load_merge_map(cfg: &RunConfig) -> Result<MergeMap> {
    match &cfg.merge_map {
        None => Ok(MergeMap::bundled()),
        Some(p) => {
            let p = require_path("--merge-map", Some(p))?;
            Ok(MergeMap::read_tsv(open(p)?)?)
        }
    }
}

pub fn report_stage(cfg: &RunConfig) -> Result<FrequencyReport> {
    let rd = run_dir(cfg);
    let counts = MatchCounts::read_tsv(open_artifact(&rd.match_counts(), "match")?)?;
    let merged = merge(&counts.by_name(), &load_merge_map(cfg)?);
    let r = report(&merged, counts.matched_tweets, cfg.min_count)?;
    write_file(&rd.report(), |w| r.write_tsv(w))?;
    write_file(&rd.path("report.txt"), |w| w.write_all(r.render_text().as_bytes()))?;
    Ok(r)
}

/// Reads a two-column alignment file: a symptom name in report B, then the
/// name it corresponds to in report A. `#` lines are comments.
pub fn read_alignment(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((b, a)) = line.split_once('\t') else {
            return Err(AnalyticsError::Parse {
                what: "alignment",
                line: i + 1,
                message: "expected 2 tab-separated columns".into(),
            }
            .into());
        };
        out.insert(crate::util::unescape_field(b), crate::util::unescape_field(a));
    }
    Ok(out)
}

pub fn compare_stage(cfg: &RunConfig, a: &Path, b: &Path, alignment: Option<&Path>, labels: [&str; 2]) -> Result<Comparison> {
    let ra = FrequencyReport::read_tsv(open(require_path("--a", Some(&a.to_path_buf()))?)?)?;
    let rb = FrequencyReport::read_tsv(open(require_path("--b", Some(&b.to_path_buf()))?)?)?;
    let align = match alignment {
        Some(p) => read_alignment(require_path("--alignment", Some(&p.to_path_buf()))?)?,
        None => BTreeMap::new(),
    };
    let c = compare(&ra, &rb, &align, labels);
    write_file(&run_dir(cfg).path("comparison.tsv"), |w| c.write_tsv(w))?;
    Ok(c)
}
