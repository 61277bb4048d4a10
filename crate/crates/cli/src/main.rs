mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};

use misinfo_fusion::corpus::{load_dataset, Dataset, VerdictAliases};
use misinfo_fusion::enrichment::{BotScoreClient, GenderDictionary, HttpScoreTransport};
use misinfo_fusion::evaluation::{render_report, render_seed_summary, run_experiment_matrix, summarize_seeds, ReportFormat};
use misinfo_fusion::features::{assemble_fusion, write_feature_store, FeatureStoreHeader, SocialVectorSchema, SOCIAL_SCHEMA_VERSION};
use misinfo_fusion::models::{BackendFactory, BackendRegistry};
use misinfo_fusion::pipeline::{enrich_dataset, prepare_records, read_enrichments, restrict_dataset, write_enrichments, Adapters};
use misinfo_fusion::propagation::{descriptive_stats, render_propagation_delimited, render_propagation_text};
use misinfo_fusion::synth::{generate_benchmark, BenchmarkConfig};
use misinfo_fusion::textprep::{CachedTranslator, HttpTranslator, IdentityTranslator, StopwordList, Translator};
use misinfo_fusion::vision::{
    BitmapFontOcr, CommandOcr, Detection, EngineFailure, NoOcr, ObjectDetector, OcrEngine, PaletteDetector, RgbImage,
};

use config::{DetectorChoice, OcrChoice, PipelineConfig, TranslatorChoice};

const DATASET_FILE: &str = "dataset.jsonl";
const ENRICHMENT_FILE: &str = "enrichments.jsonl";

#[derive(Parser)]
#[command(name = "misinfo", version, about = "Multimodal misinformation detection pipeline")]
struct Cli {
    /// TOML pipeline config. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the split seeds with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest and store the labeled dataset.
    Ingest {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Derive OCR, object, text and account features for the ingested dataset.
    Enrich {
        /// Skip the bot-score service even if the config enables it.
        #[arg(long)]
        no_bot: bool,
    },
    /// Encode features, run the experiment matrix and write the reports.
    Run {
        /// Run only the named specs.
        #[arg(long = "only")]
        only: Vec<String>,
    },
    /// Write a synthetic benchmark corpus and a matching config.
    Synth {
        #[arg(long, default_value_t = 1273)]
        misinformation: usize,
        #[arg(long, default_value_t = 256)]
        other: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Command::Synth { misinformation, other } = cli.command {
        let out = cli.out.ok_or_else(|| anyhow!("synth needs --out <dir>"))?;
        return cmd_synth(&out, misinformation, other, cli.seed);
    }
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.split.seeds = vec![seed];
    }
    match cli.command {
        Command::Ingest { manifest } => {
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            cmd_ingest(&cfg)
        }
        Command::Enrich { no_bot } => {
            cfg.adapters.bot_client &= !no_bot;
            cmd_enrich(&cfg)
        }
        Command::Run { only } => {
            if !only.is_empty() {
                cfg.matrix.only = only;
            }
            cmd_run(&cfg)
        }
        Command::Synth { .. } => unreachable!(),
    }
}

fn aliases(cfg: &PipelineConfig) -> Result<VerdictAliases> {
    Ok(match &cfg.verdict_aliases {
        Some(p) => VerdictAliases::load(p)?,
        None => VerdictAliases::default(),
    })
}

fn ingested(cfg: &PipelineConfig) -> Result<Dataset> {
    let path = cfg.out_dir.join(DATASET_FILE);
    if !path.exists() {
        bail!("{} not found; run `misinfo ingest` first", path.display());
    }
    Ok(load_dataset(&path, &aliases(cfg)?)?.dataset)
}

fn cmd_ingest(cfg: &PipelineConfig) -> Result<ExitCode> {
    let manifest = cfg.manifest.as_ref().ok_or_else(|| anyhow!("no manifest given (config `manifest` or --manifest)"))?;
    let loaded = load_dataset(manifest, &aliases(cfg)?)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    loaded.dataset.write_manifest(&cfg.out_dir.join(DATASET_FILE))?;
    let (m, o) = loaded.dataset.class_counts();
    println!("{} records ({m} misinformation / {o} other)", loaded.dataset.len());
    if !loaded.rejects.is_empty() {
        println!("{} rejected, see {}", loaded.rejects.len(), misinfo_fusion::corpus::rejects_path(manifest).display());
    }
    Ok(ExitCode::SUCCESS)
}

struct NoDetector;

impl ObjectDetector for NoDetector {
    fn id(&self) -> &str {
        "none"
    }

    fn vocabulary(&self) -> &[String] {
        &[]
    }

    fn detect(&self, _: &RgbImage) -> Result<Vec<Detection>, EngineFailure> {
        Ok(Vec::new())
    }
}

fn cmd_enrich(cfg: &PipelineConfig) -> Result<ExitCode> {
    let registry = BackendRegistry::with_bundled();
    cfg.validate(&registry)?;
    let dataset = ingested(cfg)?;
    let a = &cfg.adapters;
    let timeout = Duration::from_secs(a.timeout_secs);
    let caches = cfg.out_dir.join("cache");
    fs::create_dir_all(&caches)?;

    let ocr: Box<dyn OcrEngine> = match a.ocr {
        OcrChoice::Bitmap => Box::new(BitmapFontOcr::default()),
        OcrChoice::None => Box::new(NoOcr),
        OcrChoice::Command => Box::new(CommandOcr { program: a.ocr_command[0].clone(), args: a.ocr_command[1..].to_vec() }),
    };
    let detector: Box<dyn ObjectDetector> = match a.detector {
        DetectorChoice::Palette => Box::new(PaletteDetector::default()),
        DetectorChoice::None => Box::new(NoDetector),
    };
    let translator: Box<dyn Translator> = match a.translator {
        TranslatorChoice::Identity => Box::new(IdentityTranslator),
        TranslatorChoice::Http => {
            let endpoint = a.translator_endpoint.as_deref().unwrap_or_default();
            let http = HttpTranslator::new(endpoint, a.translator_api_key.clone(), timeout)?;
            Box::new(CachedTranslator::new(Box::new(http)).with_cache_file(&caches.join("translations.tsv"))?)
        }
    };
    let bot = if a.bot_client {
        let transport = HttpScoreTransport::from_env(a.bot_endpoint.as_deref().unwrap_or_default(), timeout)?;
        Some(
            BotScoreClient::new(Box::new(transport))
                .with_ttl(chrono::Duration::days(a.bot_ttl_days))
                .with_rate_cap(a.bot_rate_cap)
                .with_cache_file(&caches.join("bot_scores.tsv"))?,
        )
    } else {
        None
    };
    let gender = match &cfg.gender_dictionary {
        Some(p) => GenderDictionary::load(p)?,
        None => GenderDictionary::bundled(),
    };
    let stopwords = StopwordList::english();
    let similarity = match registry.resolve(&cfg.encoders.text)? {
        BackendFactory::TextEncoder(f) => f(cfg.encoders.text_dim, cfg.encoders.seed),
        _ => unreachable!("validated above"),
    };
    let adapters = Adapters {
        ocr: ocr.as_ref(),
        detector: detector.as_ref(),
        translator: translator.as_ref(),
        bot: bot.as_ref(),
        gender: &gender,
        stopwords: &stopwords,
        similarity_encoder: similarity.as_ref(),
        reference_date: cfg.reference_date,
    };
    let (records, summary) = enrich_dataset(&dataset, &adapters)?;
    let path = cfg.out_dir.join(ENRICHMENT_FILE);
    write_enrichments(&path, &records).with_context(|| format!("writing {}", path.display()))?;
    print!("{}", summary.render());
    Ok(ExitCode::SUCCESS)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(cfg: &PipelineConfig) -> Result<ExitCode> {
    let registry = BackendRegistry::with_bundled();
    cfg.validate(&registry)?;
    let dataset = ingested(cfg)?;
    let enr_path = cfg.out_dir.join(ENRICHMENT_FILE);
    if !enr_path.exists() {
        bail!("{} not found; run `misinfo enrich` first", enr_path.display());
    }
    let enrichments = read_enrichments(&enr_path)?;
    let schema = SocialVectorSchema::standard();
    let stopwords = StopwordList::english();
    let prepared = prepare_records(&dataset, &enrichments, &schema, &stopwords)?;
    let usable = restrict_dataset(&dataset, &prepared);
    if usable.len() < dataset.len() {
        warn!("{} records without usable features", dataset.len() - usable.len());
    }

    write_features(cfg, &registry, &prepared)?;

    let specs = cfg.specs()?;
    let run = run_experiment_matrix(&specs, &usable, &prepared, &cfg.matrix_config(), &registry)?;
    let results = run.results();
    let out = &cfg.out_dir;
    write(&out.join("report.txt"), &render_report(&results, ReportFormat::TableText))?;
    write(&out.join("report.tsv"), &render_report(&results, ReportFormat::Delimited))?;
    if cfg.split.seeds.len() > 1 {
        let summary = summarize_seeds(&results);
        write(&out.join("seed_summary.txt"), &render_seed_summary(&summary, ReportFormat::TableText))?;
        write(&out.join("seed_summary.tsv"), &render_seed_summary(&summary, ReportFormat::Delimited))?;
    }
    let propagation = descriptive_stats(&dataset, &enrichments)?;
    write(&out.join("propagation.txt"), &render_propagation_text(&propagation))?;
    write(&out.join("propagation.tsv"), &render_propagation_delimited(&propagation))?;

    let failures = run.failures();
    println!("{} of {} experiments completed, reports in {}", results.len(), run.entries.len(), out.display());
    for (name, seed, why) in &failures {
        eprintln!("failed: {name} (seed {seed}): {why}");
    }
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Trimodal bundles under the configured default encoders.
fn write_features(cfg: &PipelineConfig, registry: &BackendRegistry, prepared: &[misinfo_fusion::evaluation::PreparedRecord]) -> Result<()> {
    let dims = cfg.dims();
    let (BackendFactory::TextEncoder(t), BackendFactory::ImageEncoder(i)) =
        (registry.resolve(&cfg.encoders.text)?, registry.resolve(&cfg.encoders.image)?)
    else {
        unreachable!("validated above")
    };
    let (text, image) = (t(dims.text, cfg.encoders.seed), i(dims.image, cfg.encoders.seed));
    let mut bundles = Vec::with_capacity(prepared.len());
    for p in prepared {
        let tv = p.text.as_ref().map(|s| text.encode(s)).transpose()?;
        let iv = p.image.as_ref().map(|im| image.encode(im)).transpose()?;
        match assemble_fusion(&p.tweet_id, tv, iv, p.social.clone(), dims) {
            Ok(b) => bundles.push(b),
            Err(e) => warn!("{}: {e}", p.tweet_id),
        }
    }
    let header = FeatureStoreHeader::new(SOCIAL_SCHEMA_VERSION, dims, &cfg.encoders.text, &cfg.encoders.image);
    let path = cfg.out_dir.join("features.jsonl");
    write_feature_store(&path, &header, &bundles)?;
    info!("wrote {} feature bundles to {}", bundles.len(), path.display());
    Ok(())
}

fn cmd_synth(out: &Path, misinformation: usize, other: usize, seed: Option<u64>) -> Result<ExitCode> {
    let mut bc = BenchmarkConfig { misinformation, other, ..BenchmarkConfig::default() };
    if let Some(s) = seed {
        bc.seed = s;
    }
    let corpus = generate_benchmark(&bc);
    let manifest = corpus.write_to(out)?;
    let config = "manifest = \"manifest.jsonl\"\nout_dir = \"out\"\n\n[encoders]\ntext_dim = 64\nimage_dim = 32\n";
    write(&out.join("misinfo.toml"), config)?;
    println!("{} records written to {}", corpus.records.len(), manifest.display());
    Ok(ExitCode::SUCCESS)
}
