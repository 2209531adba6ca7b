use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lame_core::charstream::{read_metadata_jsonl, validate_charstream, MetadataRecord};
use lame_core::classifier::{split_by_journal, BoxGeometry};
use lame_core::corpus::{rows_from_jsonl, rows_to_jsonl};
use lame_core::doi::{DoiError, DoiMode};
use lame_core::layout::{box_dump_jsonl, render_svg, LineRecord};
use lame_core::pipeline::{self, page_svg, PipelineConfig};
use lame_core::synth::{self, SyntheticStyle};
use lame_core::{
    build_lines, build_vocab, emit_model_config, evaluate, predict, train, DoiClient, DoiClientConfig, FeatureSpec,
    Model,
};

#[derive(Parser)]
#[command(name = "lame", version, about = "Layout-aware metadata extraction for scholarly first pages")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; single-document commands print to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Never contact the DOI service; read cached fixtures only.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Text lines of one charstream as JSONL.
    Lines { charstream: PathBuf },
    /// Ordered text boxes of one charstream as JSONL.
    Boxes { charstream: PathBuf },
    /// Label the boxes of one charstream against its metadata.
    Label {
        charstream: PathBuf,
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Look up the reference record by DOI instead.
        #[arg(long, conflicts_with = "metadata")]
        doi: Option<String>,
        /// DOI cache directory.
        #[arg(long, requires = "doi")]
        cache: Option<PathBuf>,
    },
    /// Pretraining and fine-tuning corpora for a directory of charstreams.
    Corpus {
        input: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// WordPiece vocabulary from a pretraining text file.
    Vocab {
        pretrain: PathBuf,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Model configuration for a preset (base, small, tiny).
    Config { preset: String },
    /// Train the box classifier on fine-tuning rows.
    Train {
        finetune: PathBuf,
        #[arg(long, value_enum)]
        features: Option<Features>,
        /// Journals to leave out of training (comma separated).
        #[arg(long, value_delimiter = ',')]
        exclude_journals: Vec<String>,
    },
    /// Score a trained model on fine-tuning rows.
    Eval {
        model: PathBuf,
        finetune: PathBuf,
        /// Only evaluate rows of these journals (comma separated).
        #[arg(long, value_delimiter = ',')]
        journals: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// SVG overlay of the boxes of one charstream.
    Render {
        charstream: PathBuf,
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Fetch the metadata record for a DOI.
    Doi {
        doi: String,
        /// Cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with gold labels.
    Synth {
        #[arg(long, default_value_t = 10)]
        docs_per_style: usize,
        /// Style list (JSON array); defaults to the built-in styles.
        #[arg(long)]
        styles: Option<PathBuf>,
        /// Per-glyph substitution rate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Print the built-in styles as JSON and exit.
        #[arg(long)]
        dump_styles: bool,
    },
    /// Boxes, labels, corpora, vocabulary and model configs for a directory.
    Pipeline {
        input: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Text,
    Position,
    Both,
}

impl From<Features> for FeatureSpec {
    fn from(f: Features) -> Self {
        match f {
            Features::Text => FeatureSpec::TEXT,
            Features::Position => FeatureSpec::POSITION,
            Features::Both => FeatureSpec::BOTH,
        }
    }
}

struct Ctx {
    config: PipelineConfig,
    out: Option<PathBuf>,
    offline: bool,
    jobs: usize,
}

impl Ctx {
    /// Writes `content` to `<out>/<name>`, or to stdout without `--out`.
    fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(content.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        match &self.out {
            Some(dir) => Ok(dir),
            None => bail!("--out is required for this command"),
        }
    }

    /// The configured client, or an online one when the config has none.
    fn doi_config(&self, cache: Option<PathBuf>) -> DoiClientConfig {
        let mut config = self.config.doi.clone().unwrap_or_else(|| {
            let defaults = DoiClientConfig::default();
            DoiClientConfig::online(defaults.base_url, defaults.cache_dir)
        });
        if let Some(dir) = cache {
            config.cache_dir = dir;
        }
        if self.offline {
            config.mode = DoiMode::Fixture;
        }
        config.with_env_override()
    }

    fn input(&self, arg: Option<PathBuf>) -> Result<PathBuf> {
        match arg.or_else(|| self.config.input.clone()) {
            Some(p) => Ok(p),
            None => bail!("no input directory given"),
        }
    }

    fn records(&self, arg: Option<PathBuf>) -> Result<HashMap<String, MetadataRecord>> {
        match arg.or_else(|| self.config.metadata.clone()) {
            Some(path) => Ok(pipeline::load_records(&path)?),
            None => Ok(HashMap::new()),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn doc_id_of(charstream: &str) -> Result<String> {
    Ok(validate_charstream(charstream)?.doc_id)
}

fn journal_set(names: &[String]) -> BTreeSet<String> {
    names.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Labels one charstream; records come from a metadata file or a DOI.
fn label_one(
    ctx: &Ctx,
    text: &str,
    metadata: Option<PathBuf>,
    doi: Option<String>,
    cache: Option<PathBuf>,
) -> Result<lame_core::LabeledPage> {
    let doc_id = doc_id_of(text)?;
    let record = match doi {
        Some(doi) => Some(DoiClient::new(ctx.doi_config(cache))?.fetch_metadata(&doi)?),
        None => match metadata.or_else(|| ctx.config.metadata.clone()) {
            Some(path) => read_metadata_jsonl(&read(&path)?)?.into_iter().find(|r| r.doc_id == doc_id),
            None => None,
        },
    };
    let client = match &ctx.config.doi {
        Some(_) => Some(DoiClient::new(ctx.doi_config(None))?),
        None => None,
    };
    Ok(pipeline::process_document(text, record.as_ref(), client.as_ref(), &ctx.config)?)
}

fn load_styles(path: Option<&Path>) -> Result<Vec<SyntheticStyle>> {
    match path {
        Some(p) => {
            let styles: Vec<SyntheticStyle> =
                serde_json::from_str(&read(p)?).with_context(|| format!("parsing styles {}", p.display()))?;
            if styles.is_empty() {
                bail!("style list {} is empty", p.display());
            }
            Ok(styles)
        }
        None => Ok(synth::default_styles()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.offline {
        if let Some(doi) = &mut config.doi {
            doi.mode = DoiMode::Fixture;
        }
    }
    let ctx = Ctx { out: cli.out.or_else(|| config.out.clone()), config, offline: cli.offline, jobs: cli.jobs };

    match cli.command {
        Command::Lines { charstream } => {
            let page = validate_charstream(&read(&charstream)?)?;
            let lines = build_lines(&page, &ctx.config.layout);
            let records: Vec<_> = lines.iter().map(|l| LineRecord::new(&page.doc_id, l)).collect();
            ctx.emit("lines.jsonl", &rows_to_jsonl(&records))
        }
        Command::Boxes { charstream } => {
            let page = validate_charstream(&read(&charstream)?)?;
            let boxes = lame_core::analyze_page(&page, &ctx.config.layout);
            ctx.emit("boxes.jsonl", &box_dump_jsonl(&page.doc_id, &boxes))
        }
        Command::Label { charstream, metadata, doi, cache } => {
            let page = label_one(&ctx, &read(&charstream)?, metadata, doi, cache)?;
            ctx.emit("labeled.jsonl", &page.to_jsonl())
        }
        Command::Render { charstream, metadata } => {
            let text = read(&charstream)?;
            let svg = if metadata.is_some() || ctx.config.metadata.is_some() {
                page_svg(&label_one(&ctx, &text, metadata, None, None)?)
            } else {
                let page = validate_charstream(&text)?;
                let boxes = lame_core::analyze_page(&page, &ctx.config.layout);
                let items: Vec<_> = boxes.iter().map(|b| (b, None)).collect();
                render_svg(page.width, page.height, &items)
            };
            ctx.emit(&format!("{}.svg", doc_id_of(&text)?), &svg)
        }
        Command::Corpus { input, metadata } => {
            let input = ctx.input(input)?;
            let records = ctx.records(metadata)?;
            let pages = pipeline::process_directory(&input, &records, &ctx.config, ctx.jobs)?;
            pipeline::write_corpus_files(&pages, ctx.out_dir()?)?;
            eprintln!("{} documents", pages.len());
            Ok(())
        }
        Command::Vocab { pretrain, size } => {
            let text = read(&pretrain)?;
            let vocab = build_vocab(text.lines(), size.unwrap_or(ctx.config.vocab_size))?;
            ctx.emit("vocab.txt", &vocab.to_file_string())
        }
        Command::Config { preset } => {
            let config = emit_model_config(&preset)?;
            ctx.emit(&format!("config_{preset}.txt"), &config.to_kv())
        }
        Command::Train { finetune, features, exclude_journals } => {
            let rows = rows_from_jsonl(&read(&finetune)?).with_context(|| format!("parsing {}", finetune.display()))?;
            let excluded = journal_set(&exclude_journals);
            let rows = if excluded.is_empty() { rows } else { split_by_journal(&rows, &excluded)?.0 };
            let spec = features.map(FeatureSpec::from).unwrap_or(ctx.config.features);
            let model = train(&rows, spec)?;
            ctx.emit("model.txt", &model.to_file_string())
        }
        Command::Eval { model, finetune, journals, json } => {
            let model = Model::from_file_string(&read(&model)?)?;
            let rows = rows_from_jsonl(&read(&finetune)?).with_context(|| format!("parsing {}", finetune.display()))?;
            let selected = journal_set(&journals);
            let rows: Vec<_> =
                rows.into_iter().filter(|r| selected.is_empty() || selected.contains(&r.journal_id)).collect();
            let mut preds = Vec::with_capacity(rows.len());
            for row in &rows {
                preds.push(predict(&model, &row.text, Some(&BoxGeometry::of_row(row)))?.label.as_str());
            }
            let golds: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
            let split = if selected.is_empty() {
                "all".to_string()
            } else {
                selected.into_iter().collect::<Vec<_>>().join(",")
            };
            let report = evaluate(&preds, &golds)?.with_split(split);
            if json {
                ctx.emit("eval.json", &format!("{}\n", report.to_json()))
            } else {
                ctx.emit("eval.txt", &report.to_table())
            }
        }
        Command::Doi { doi, cache } => {
            let client = DoiClient::new(ctx.doi_config(cache))?;
            let record = client.fetch_metadata(&doi)?;
            ctx.emit("record.json", &format!("{}\n", serde_json::to_string_pretty(&record)?))
        }
        Command::Synth { docs_per_style, styles, noise, dump_styles } => {
            if dump_styles {
                return ctx
                    .emit("styles.json", &format!("{}\n", serde_json::to_string_pretty(&synth::default_styles())?));
            }
            if !(0.0..=1.0).contains(&noise) {
                bail!("--noise must be within [0, 1]");
            }
            let styles = load_styles(styles.as_deref())?;
            let mut docs = synth::generate_synthetic(&styles, docs_per_style, ctx.config.seed);
            if noise > 0.0 {
                for (i, d) in docs.iter_mut().enumerate() {
                    d.page = synth::add_substitution_noise(&d.page, noise, ctx.config.seed ^ (i as u64 + 1));
                }
            }
            let out = ctx.out_dir()?;
            synth::write_corpus(&docs, out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} documents", docs.len());
            Ok(())
        }
        Command::Pipeline { input, metadata } => {
            let input = ctx.input(input)?;
            let records = ctx.records(metadata)?;
            let summary = pipeline::run_pipeline(&input, &records, ctx.out_dir()?, &ctx.config, ctx.jobs)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(())
        }
    }
}

/// 2 for failures of the remote metadata service, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let upstream = err.chain().any(|e| {
        e.downcast_ref::<lame_core::Error>().is_some_and(lame_core::Error::is_upstream)
            || matches!(e.downcast_ref::<DoiError>(), Some(DoiError::Upstream { .. }))
    });
    if upstream {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
