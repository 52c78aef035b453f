use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use templm::config::{BackendConfig, PipelineConfig};
use templm::evaluation::PhraseTable;
use templm::io::{read_corpus, read_span_sidecar, to_jsonl, write_atomic};
use templm::lm::LanguageModel;
use templm::pipeline::{self, Decisions, InferLine, TemplateSetFile};
use templm::refinement::{HeuristicChunker, ParseProvider, SidecarParser};

#[derive(Parser)]
#[command(
    name = "templm",
    version,
    about = "Template-based data-to-text generation distilled from a language model"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// n-gram model file, or an http(s) URL of a bridge.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fail on inputs whose cluster has no template (default).
    #[arg(long, global = true, conflicts_with = "fallback")]
    strict: bool,
    /// Use the largest compatible cluster for unseen field combinations.
    #[arg(long, global = true)]
    fallback: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train the reference n-gram backend on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate outputs for every input and collect candidate templates.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the top-K templates per cluster.
    Validate {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ranked templates as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Regenerate ungeneralizable spans of validated templates.
    Refine {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Constituent spans per template id, overriding the chunker.
        #[arg(long)]
        spans: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Realize inputs with a template set.
    Infer {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score outputs for faithfulness, and BLEU/ROUGE-L when references exist.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON lines with `id` and `text`.
        #[arg(long)]
        outputs: PathBuf,
        /// Phrase table; defaults to the bundled restaurant table.
        #[arg(long)]
        phrases: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Approve or reject templates, or list them.
    Review {
        #[arg(long)]
        set: PathBuf,
        /// JSON object mapping template id to approve|reject.
        #[arg(long, required_unless_present = "list")]
        decisions: Option<PathBuf>,
        /// Defaults to overwriting `--set`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        list: bool,
    },
}

impl Global {
    fn load_config(&self) -> anyhow::Result<Option<PipelineConfig>> {
        let Some(path) = &self.config else { return Ok(None) };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| templm::Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Some(config))
    }

    /// Flags win over the file, which wins over `base`.
    fn apply(&self, base: PipelineConfig) -> anyhow::Result<PipelineConfig> {
        let mut config = self.load_config()?.unwrap_or(base);
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(b) = &self.backend {
            config.backend = if b.starts_with("http://") || b.starts_with("https://") {
                BackendConfig::Remote { url: b.clone() }
            } else {
                BackendConfig::Ngram { path: b.clone() }
            };
        }
        if self.fallback {
            config.fallback = true;
        }
        if self.strict {
            config.fallback = false;
        }
        config.validate()?;
        Ok(config)
    }
}

fn backend(config: &PipelineConfig) -> anyhow::Result<Box<dyn LanguageModel>> {
    Ok(pipeline::open_backend(&config.backend, Path::new(""))?)
}

fn load_set(path: &Path, global: &Global) -> anyhow::Result<TemplateSetFile> {
    let mut file = TemplateSetFile::load(path).with_context(|| format!("loading {}", path.display()))?;
    file.config = global.apply(file.config)?;
    Ok(file)
}

fn write_lines<T: serde::Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    write_atomic(path, to_jsonl(items)?.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Train { corpus, out } => {
            let config = g.apply(PipelineConfig::default())?;
            let model = pipeline::train(&read_corpus(&corpus)?, &config)?;
            model.save(&out)?;
            eprintln!("trained order-{} model on {}", model.order(), corpus.display());
        }
        Command::Extract { corpus, out } => {
            let config = g.apply(PipelineConfig::default())?;
            let records = read_corpus(&corpus)?;
            let lm = backend(&config)?;
            let file = pipeline::extract(&records, &config, lm.as_ref())?;
            file.save(&out)?;
            eprintln!(
                "{} candidate templates in {} clusters",
                file.set.len(),
                file.set.clusters.len()
            );
        }
        Command::Validate { set, out, report } => {
            let file = load_set(&set, g)?;
            let lm = backend(&file.config)?;
            let (file, lines) = pipeline::validate(&file, lm.as_ref())?;
            file.save(&out)?;
            if let Some(path) = report {
                write_lines(&path, &lines)?;
            }
            eprintln!("{} templates kept", lines.len());
        }
        Command::Refine {
            set,
            out,
            spans,
            report,
        } => {
            let file = load_set(&set, g)?;
            let lm = backend(&file.config)?;
            let chunker = match &file.config.stop_words {
                Some(words) => HeuristicChunker::new(words),
                None => HeuristicChunker::default(),
            };
            let parser: Box<dyn ParseProvider> = match spans {
                Some(path) => Box::new(SidecarParser::new(read_span_sidecar(&path)?, chunker)),
                None => Box::new(chunker),
            };
            let (file, lines) = pipeline::refine_set(&file, lm.as_ref(), parser.as_ref())?;
            file.save(&out)?;
            let changed = lines.iter().filter(|l| l.before_text != l.after_text).count();
            if let Some(path) = report {
                write_lines(&path, &lines)?;
            }
            eprintln!("{changed} of {} templates refined", lines.len());
        }
        Command::Infer { set, inputs, out } => {
            let file = load_set(&set, g)?;
            let records = read_corpus(&inputs)?;
            let data: Vec<_> = records.into_iter().map(|r| r.data).collect();
            let lm = backend(&file.config)?;
            let results = pipeline::infer(&data, &file, lm.as_ref(), file.config.fallback)?;
            let lines: Vec<InferLine> = data
                .iter()
                .zip(&results)
                .map(|(d, r)| pipeline::infer_line(d, r))
                .collect();
            match out {
                Some(path) => write_lines(&path, &lines)?,
                None => std::io::stdout().write_all(to_jsonl(&lines)?.as_bytes())?,
            }
            let failed: Vec<&templm::Error> = results.iter().filter_map(|r| r.as_ref().err()).collect();
            if let Some(first) = failed.first() {
                eprintln!("{} of {} inputs failed", failed.len(), data.len());
                return Err(Failed(first.kind(), first.to_string()).into());
            }
        }
        Command::Eval {
            corpus,
            outputs,
            phrases,
            report,
        } => {
            let table = match phrases {
                Some(path) => PhraseTable::load(&path)?,
                None => PhraseTable::e2e(),
            };
            let records = read_corpus(&corpus)?;
            let outputs = read_outputs(&outputs)?;
            let (detail, summary) = pipeline::evaluate(&records, &outputs, &table)?;
            if let Some(path) = report {
                let mut text = to_jsonl(&detail.examples)?;
                text.push_str(&to_jsonl([serde_json::json!({ "summary": &summary })])?);
                write_atomic(&path, text.as_bytes())?;
            }
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Review {
            set,
            decisions,
            out,
            list,
        } => {
            let file = load_set(&set, g)?;
            let file = match decisions {
                Some(path) => {
                    let decisions: Decisions =
                        serde_json::from_str(&fs::read_to_string(&path)?).map_err(templm::Error::from)?;
                    let (file, warnings) = pipeline::review(&file, &decisions);
                    for w in warnings {
                        log::warn!("{w}");
                        eprintln!("warning: {w}");
                    }
                    file.save(out.as_deref().unwrap_or(&set))?;
                    file
                }
                None => file,
            };
            if list {
                print!("{}", pipeline::list_templates(&file.set));
            }
        }
    }
    Ok(())
}

fn read_outputs(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    #[derive(serde::Deserialize)]
    struct Line {
        id: String,
        text: Option<String>,
    }
    let mut out = Vec::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(line).map_err(|e| templm::Error::MalformedCorpus {
            line: i + 1,
            reason: e.to_string(),
        })?;
        // Failed inference lines carry no text; score them as empty output.
        out.push((l.id, l.text.map(|t| templm::io::normalize_text(&t)).unwrap_or_default()));
    }
    Ok(out)
}

#[derive(Debug)]
struct Failed(&'static str, String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.0, self.1)
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(f) = e.downcast_ref::<Failed>() {
                eprintln!("error: {f}");
                return ExitCode::from(2);
            }
            match e.chain().find_map(|c| c.downcast_ref::<templm::Error>()) {
                Some(err) => {
                    eprintln!("error: {}: {e:#}", err.kind());
                    ExitCode::from(2)
                }
                None => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
