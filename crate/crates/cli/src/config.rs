use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use misinfo_fusion::enrichment::default_reference_date;
use misinfo_fusion::evaluation::{default_matrix, MatrixConfig};
use misinfo_fusion::features::{FusionDims, SocialVectorSchema};
use misinfo_fusion::models::{BackendFactory, BackendRegistry, ExperimentSpec, HyperParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub reference_date: NaiveDate,
    /// Tab-separated `alias<TAB>class` file replacing the bundled verdict aliases.
    pub verdict_aliases: Option<PathBuf>,
    /// Tab-separated `name<TAB>gender` file replacing the bundled dictionary.
    pub gender_dictionary: Option<PathBuf>,
    pub adapters: AdapterConfig,
    pub encoders: EncoderConfig,
    pub split: SplitConfig,
    pub hyperparams: HyperParams,
    pub matrix: MatrixSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out_dir: PathBuf::from("out"),
            reference_date: default_reference_date(),
            verdict_aliases: None,
            gender_dictionary: None,
            adapters: AdapterConfig::default(),
            encoders: EncoderConfig::default(),
            split: SplitConfig::default(),
            hyperparams: HyperParams::default(),
            matrix: MatrixSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcrChoice {
    Bitmap,
    Command,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    Palette,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslatorChoice {
    Identity,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub ocr: OcrChoice,
    /// Program and arguments for `ocr = "command"`; `{input}` becomes the image path.
    pub ocr_command: Vec<String>,
    pub detector: DetectorChoice,
    pub translator: TranslatorChoice,
    pub translator_endpoint: Option<String>,
    pub translator_api_key: Option<String>,
    pub bot_client: bool,
    pub bot_endpoint: Option<String>,
    pub bot_rate_cap: f64,
    pub bot_ttl_days: i64,
    pub timeout_secs: u64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            ocr: OcrChoice::Bitmap,
            ocr_command: Vec::new(),
            detector: DetectorChoice::Palette,
            translator: TranslatorChoice::Identity,
            translator_endpoint: None,
            translator_api_key: None,
            bot_client: false,
            bot_endpoint: None,
            bot_rate_cap: 5.0,
            bot_ttl_days: 30,
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub text: String,
    pub image: String,
    pub text_dim: usize,
    pub image_dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let m = MatrixConfig::default();
        Self {
            text: m.default_text_encoder,
            image: m.default_image_encoder,
            text_dim: m.dims.text,
            image_dim: m.dims.image,
            seed: m.encoder_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let m = MatrixConfig::default();
        Self { test_fraction: m.test_fraction, seeds: m.seeds }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixSection {
    /// Names of the specs to run. Empty runs all of them.
    pub only: Vec<String>,
    /// Replaces the built-in fifteen-spec matrix when non-empty.
    pub specs: Vec<ExperimentSpec>,
    pub threads: usize,
}

impl PipelineConfig {
    /// Reads a TOML config. Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&src).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.manifest.as_mut().map(rebase);
        rebase(&mut cfg.out_dir);
        cfg.verdict_aliases.as_mut().map(rebase);
        cfg.gender_dictionary.as_mut().map(rebase);
        Ok(cfg)
    }

    pub fn dims(&self) -> FusionDims {
        FusionDims { text: self.encoders.text_dim, image: self.encoders.image_dim, social: SocialVectorSchema::standard().total_dim() }
    }

    pub fn matrix_config(&self) -> MatrixConfig {
        MatrixConfig {
            test_fraction: self.split.test_fraction,
            seeds: self.split.seeds.clone(),
            dims: self.dims(),
            default_text_encoder: self.encoders.text.clone(),
            default_image_encoder: self.encoders.image.clone(),
            encoder_seed: self.encoders.seed,
            threads: self.matrix.threads,
        }
    }

    /// The specs to run, with the configured hyperparameters applied to the
    /// built-in matrix.
    pub fn specs(&self) -> Result<Vec<ExperimentSpec>> {
        let mut specs = if self.matrix.specs.is_empty() {
            default_matrix()
                .into_iter()
                .map(|mut s| {
                    s.hyperparams = self.hyperparams.clone();
                    s
                })
                .collect()
        } else {
            self.matrix.specs.clone()
        };
        if !self.matrix.only.is_empty() {
            for name in &self.matrix.only {
                if !specs.iter().any(|s| &s.name == name) {
                    bail!("matrix.only names unknown spec {name:?}");
                }
            }
            specs.retain(|s| self.matrix.only.contains(&s.name));
        }
        Ok(specs)
    }

    pub fn validate(&self, registry: &BackendRegistry) -> Result<()> {
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            bail!("split.test_fraction must lie in (0, 1), got {f}");
        }
        if self.split.seeds.is_empty() {
            bail!("split.seeds is empty");
        }
        if self.encoders.text_dim == 0 || self.encoders.image_dim == 0 {
            bail!("encoder dims must be positive");
        }
        match registry.resolve(&self.encoders.text)? {
            BackendFactory::TextEncoder(_) => {}
            other => bail!("encoders.text: {} is a {}", self.encoders.text, other.kind()),
        }
        match registry.resolve(&self.encoders.image)? {
            BackendFactory::ImageEncoder(_) => {}
            other => bail!("encoders.image: {} is a {}", self.encoders.image, other.kind()),
        }
        self.hyperparams.validate().map_err(|e| anyhow::anyhow!("hyperparams: {e}"))?;
        for spec in self.specs()? {
            spec.validate()?;
            registry.resolve_combo(&spec)?;
        }
        if self.adapters.ocr == OcrChoice::Command && self.adapters.ocr_command.is_empty() {
            bail!("adapters.ocr = \"command\" needs adapters.ocr_command");
        }
        if self.adapters.translator == TranslatorChoice::Http && self.adapters.translator_endpoint.is_none() {
            bail!("adapters.translator = \"http\" needs adapters.translator_endpoint");
        }
        if self.adapters.bot_client && self.adapters.bot_endpoint.is_none() {
            bail!("adapters.bot_client needs adapters.bot_endpoint");
        }
        Ok(())
    }
}
