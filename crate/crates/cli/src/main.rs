use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collex::config::{read_layer, require_path, ConfigError, RunConfig, CONFIG_FILE, RUN_DIR_ENV};
use collex::pipeline::{self, ErrorKind, PipelineError};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "collex", version, about = "Colloquial symptom lexicon pipeline")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

/// Flags that override config fields. Unset flags leave the file values alone.
#[derive(Args, Default)]
struct Overrides {
    /// Config file layered over the run directory's saved config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = RUN_DIR_ENV)]
    run_dir: Option<PathBuf>,
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus_format: Option<String>,
    #[arg(long, global = true)]
    inventory: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    #[arg(long, global = true)]
    lemma_exceptions: Option<PathBuf>,
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    emoji: Option<PathBuf>,
    #[arg(long, global = true)]
    merge_map: Option<PathBuf>,
    #[arg(long, global = true)]
    extractor_url: Option<String>,
    #[arg(long, global = true)]
    extractor_timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    extractor_max_in_flight: Option<usize>,
    /// Admitted language code; repeat for several.
    #[arg(long = "lang", global = true)]
    langs: Vec<String>,
    #[arg(long, global = true)]
    drop_retweets: Option<bool>,
    #[arg(long, global = true)]
    drop_url_tweets: Option<bool>,
    #[arg(long, global = true)]
    tau_semantic: Option<f64>,
    #[arg(long, global = true)]
    tau_lexical: Option<f64>,
    #[arg(long, global = true)]
    min_lemma_count: Option<u64>,
    #[arg(long, global = true)]
    min_count: Option<u64>,
    #[arg(long, global = true)]
    exit_accuracy: Option<f64>,
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    #[arg(long, global = true)]
    max_rounds: Option<u32>,
    #[arg(long, global = true)]
    negatives: Option<usize>,
    #[arg(long, global = true)]
    sample_cap: Option<usize>,
    #[arg(long, global = true)]
    sweep_steps: Option<usize>,
    #[arg(long, global = true)]
    sanity_size: Option<usize>,
    /// Annotator id; give exactly three.
    #[arg(long = "annotator", global = true)]
    annotators: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Filter the corpus and build the context index.
    Ingest,
    /// Extract symptom mentions from the admitted tweets.
    Extract,
    /// Build the lemma table and its statistics.
    Normalize,
    /// Propose candidate concepts for the current round.
    Map,
    /// Threshold curves and their elbows.
    Sweep,
    /// Rewrite the validation sample of a round.
    Sample {
        #[arg(long)]
        round: Option<u32>,
    },
    /// Merge a labels TSV into a round.
    LabelsImport {
        labels: PathBuf,
        #[arg(long)]
        round: Option<u32>,
    },
    /// Close the current round and update the dictionary.
    RoundClose,
    /// Run the annotation API and static UI.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "COLLEX_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        round: Option<u32>,
    },
    /// Cohen's kappa between two label files, or per set of an annotation round.
    Kappa {
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, conflicts_with = "a")]
        round: Option<u32>,
    },
    /// Write the dictionary, optionally with a review packet.
    DictExport {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sanity_packet: Option<PathBuf>,
    },
    /// Count dictionary concepts over the ingested tweets.
    Match {
        #[arg(long)]
        dictionary: Option<PathBuf>,
    },
    /// Merge concept counts and write the frequency report.
    Report,
    /// Put two frequency reports side by side.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        alignment: Option<PathBuf>,
        #[arg(long, default_value = "A")]
        label_a: String,
        #[arg(long, default_value = "B")]
        label_b: String,
    },
}

fn abs(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl Overrides {
    fn table(&self) -> toml::Table {
        let mut t = toml::Table::new();
        let mut path = |k: &str, v: &Option<PathBuf>| {
            if let Some(p) = v {
                t.insert(k.into(), toml::Value::String(abs(p).display().to_string()));
            }
        };
        path("run_dir", &self.run_dir);
        path("corpus", &self.corpus);
        path("inventory", &self.inventory);
        path("embeddings", &self.embeddings);
        path("rules", &self.rules);
        path("lemma_exceptions", &self.lemma_exceptions);
        path("gazetteer", &self.gazetteer);
        path("emoji", &self.emoji);
        path("merge_map", &self.merge_map);
        let mut set = |k: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                t.insert(k.into(), v);
            }
        };
        let int = |v: Option<u64>| v.map(|x| toml::Value::Integer(x as i64));
        set("threads", int(self.threads.map(|x| x as u64)));
        set("seed", int(self.seed));
        set("corpus_format", self.corpus_format.clone().map(toml::Value::String));
        set("extractor_url", self.extractor_url.clone().map(toml::Value::String));
        set("extractor_timeout_secs", int(self.extractor_timeout_secs));
        set("extractor_max_in_flight", int(self.extractor_max_in_flight.map(|x| x as u64)));
        set("drop_retweets", self.drop_retweets.map(toml::Value::Boolean));
        set("drop_url_tweets", self.drop_url_tweets.map(toml::Value::Boolean));
        set("tau_semantic", self.tau_semantic.map(toml::Value::Float));
        set("tau_lexical", self.tau_lexical.map(toml::Value::Float));
        set("min_lemma_count", int(self.min_lemma_count));
        set("min_count", int(self.min_count));
        set("exit_accuracy", self.exit_accuracy.map(toml::Value::Float));
        set("sample_size", int(self.sample_size.map(|x| x as u64)));
        set("max_rounds", int(self.max_rounds.map(u64::from)));
        set("negatives", int(self.negatives.map(|x| x as u64)));
        set("sample_cap", int(self.sample_cap.map(|x| x as u64)));
        set("sweep_steps", int(self.sweep_steps.map(|x| x as u64)));
        set("sanity_size", int(self.sanity_size.map(|x| x as u64)));
        let list = |v: &[String]| (!v.is_empty()).then(|| toml::Value::Array(v.iter().cloned().map(toml::Value::String).collect()));
        set("langs", list(&self.langs));
        set("annotators", list(&self.annotators));
        t
    }

    /// Defaults, then the run directory's saved config, then `--config`, then flags.
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let explicit = match &self.config {
            Some(p) => Some((p.display().to_string(), read_layer(require_path("--config", Some(p))?)?)),
            None => None,
        };
        let flags = self.table();
        let run_dir = match (&self.run_dir, explicit.as_ref().and_then(|(_, t)| t.get("run_dir"))) {
            (Some(p), _) => p.clone(),
            (None, Some(toml::Value::String(s))) => PathBuf::from(s),
            _ => RunConfig::default().run_dir,
        };
        let mut layers = Vec::new();
        let saved = run_dir.join(CONFIG_FILE);
        if saved.exists() {
            layers.push((saved.display().to_string(), read_layer(&saved)?));
        }
        layers.extend(explicit);
        let mut flags = flags;
        flags.insert("run_dir".into(), toml::Value::String(abs(&run_dir).display().to_string()));
        layers.push(("flags".into(), flags));
        let cfg = RunConfig::from_layers(&layers)?;
        cfg.validate()?;
        cfg.check_paths()?;
        Ok(cfg)
    }
}

fn to_json<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("summary serializes")
}

fn run(cli: Cli) -> Result<Value, PipelineError> {
    let cfg = cli.opts.resolve()?;
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    // the token is a secret and stays out of the saved config
    let saved = RunConfig { token: None, ..cfg.clone() };
    saved.save().map_err(|source| PipelineError::Io {
        path: cfg.run_dir.join(CONFIG_FILE).display().to_string(),
        source,
    })?;
    Ok(match cli.cmd {
        Command::Ingest => to_json(pipeline::ingest(&cfg)?),
        Command::Extract => {
            let ex = pipeline::make_extractor(&cfg)?;
            to_json(pipeline::extract(&cfg, ex.as_ref())?)
        }
        Command::Normalize => {
            let s = pipeline::normalize(&cfg)?;
            eprint!("{}", s.stats_text);
            to_json(s)
        }
        Command::Map => to_json(pipeline::map(&cfg)?),
        Command::Sweep => {
            let s = pipeline::sweep(&cfg)?;
            json!({ "elbow_semantic": s.elbow_semantic, "elbow_lexical": s.elbow_lexical, "steps": s.sweep.taus.len() })
        }
        Command::Sample { round } => {
            let (round, n) = pipeline::sample(&cfg, round)?;
            json!({ "round": round, "sample": n })
        }
        Command::LabelsImport { labels, round } => to_json(pipeline::labels_import(&cfg, &labels, round)?),
        Command::RoundClose => to_json(pipeline::round_close(&cfg)?),
        Command::Serve { addr, token, static_dir, round } => {
            let token = token.or(cfg.token.clone()).ok_or(ConfigError::Required { flag: "--token" })?;
            let round = match round {
                Some(r) => r,
                None => pipeline::load_state(&cfg)?.round,
            };
            if let Some(d) = &static_dir {
                require_path("--static-dir", Some(d))?;
            }
            let store = pipeline::open_annotation(&cfg, round)?;
            let app = collex_server::AppState::new(store, token);
            let rt = tokio::runtime::Runtime::new().map_err(|source| PipelineError::Io { path: "tokio runtime".into(), source })?;
            rt.block_on(collex_server::serve(addr, app, static_dir))
                .map_err(|source| PipelineError::Io { path: addr.to_string(), source })?;
            json!({ "round": round, "stopped": true })
        }
        Command::Kappa { a: Some(a), b: Some(b), .. } => to_json(pipeline::kappa_from_files(&a, &b)?),
        Command::Kappa { round, .. } => {
            let round = match round {
                Some(r) => r,
                None => pipeline::load_state(&cfg)?.round,
            };
            let rd = pipeline::run_dir(&cfg);
            if !collex::annotation::journal::journal_path(&rd.annotation_dir(), round).exists() {
                return Err(PipelineError::Usage(format!("no annotation journal for round {round}; pass --a and --b label files")));
            }
            let store = collex::annotation::RoundStore::open(&rd.annotation_dir(), round).map_err(PipelineError::from)?;
            to_json(store.state().kappa())
        }
        Command::DictExport { out, sanity_packet } => {
            let n = pipeline::dict_export(&cfg, &out, sanity_packet.as_deref())?;
            json!({ "lemmas": n, "out": out })
        }
        Command::Match { dictionary } => {
            let c = pipeline::match_stage(&cfg, dictionary.as_deref())?;
            json!({ "tweets": c.tweets, "matched_tweets": c.matched_tweets, "concepts": c.by_concept.len() })
        }
        Command::Report => {
            let r = pipeline::report_stage(&cfg)?;
            print!("{}", r.render_text());
            json!({ "total_matched_tweets": r.total_matched_tweets, "rows": r.rows.len() })
        }
        Command::Compare { a, b, alignment, label_a, label_b } => {
            let c = pipeline::compare_stage(&cfg, &a, &b, alignment.as_deref(), [&label_a, &label_b])?;
            print!("{}", c.render_text());
            json!({ "rows": c.rows.len() })
        }
    })
}

fn fail(kind: ErrorKind, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(kind.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return fail(ErrorKind::Usage, &first);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
