//! Experiment configuration: a flat key-value TOML document whose keys can
//! each be overridden by a command-line flag of the same name.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use dyndepth_core::{CostModel, DddConfig, ModelKind, ModelSpec, StaticTreeTemplate, Strategy};

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "DYNDEPTH_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Static,
    Eagle2,
    Ddd,
    Eagle2Strict,
    DddStrict,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Static,
        StrategyKind::Eagle2,
        StrategyKind::Ddd,
        StrategyKind::Eagle2Strict,
        StrategyKind::DddStrict,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Static => "static",
            StrategyKind::Eagle2 => "eagle2",
            StrategyKind::Ddd => "ddd",
            StrategyKind::Eagle2Strict => "eagle2-strict",
            StrategyKind::DddStrict => "ddd-strict",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .with_context(|| format!("unknown strategy `{s}` (expected one of static, eagle2, ddd, eagle2-strict, ddd-strict)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub vocab_size: usize,
    pub model_kind: ModelKind,
    pub context_order: usize,
    pub seed: u64,
    pub draft_noise: f64,
    /// One prompt per line; takes precedence over `synthetic`.
    pub corpus: Option<PathBuf>,
    /// Number of seeded random prompts when no corpus is given.
    pub synthetic: usize,
    pub prompt_len: usize,
    pub num_tokens: usize,
    pub strategies: Vec<StrategyKind>,
    pub max_steps: usize,
    pub beam_width: usize,
    pub check_steps: BTreeSet<usize>,
    pub ddd_threshold: f64,
    pub eagle2_depth: usize,
    pub static_template: Vec<usize>,
    pub c_target: f64,
    pub c_draft: f64,
    pub c_sync: f64,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ddd = DddConfig::default();
        let cost = CostModel::default();
        ExperimentConfig {
            vocab_size: 64,
            model_kind: ModelKind::HashedLogit,
            context_order: 3,
            seed: 0,
            draft_noise: 2.0,
            corpus: None,
            synthetic: 10,
            prompt_len: 8,
            num_tokens: 256,
            strategies: StrategyKind::ALL.to_vec(),
            max_steps: ddd.max_steps,
            beam_width: ddd.beam_width,
            check_steps: ddd.check_steps,
            ddd_threshold: ddd.threshold,
            eagle2_depth: 6,
            static_template: StaticTreeTemplate::default().children_per_depth,
            c_target: cost.c_target,
            c_draft: cost.c_draft,
            c_sync: cost.c_sync,
            format: OutputFormat::Text,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            vocab_size: self.vocab_size,
            kind: self.model_kind,
            context_order: self.context_order,
            seed: self.seed,
            draft_noise: self.draft_noise,
        }
    }

    pub fn ddd_config(&self) -> DddConfig {
        DddConfig {
            max_steps: self.max_steps,
            beam_width: self.beam_width,
            check_steps: self.check_steps.clone(),
            threshold: self.ddd_threshold,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            c_target: self.c_target,
            c_draft: self.c_draft,
            c_sync: self.c_sync,
        }
    }

    pub fn strategy(&self, kind: StrategyKind) -> Strategy {
        match kind {
            StrategyKind::Static => {
                Strategy::Static(StaticTreeTemplate::new(self.static_template.clone()))
            }
            StrategyKind::Eagle2 => Strategy::Eagle2 {
                width: self.beam_width,
                depth: self.eagle2_depth,
                strict: false,
            },
            StrategyKind::Eagle2Strict => Strategy::Eagle2 {
                width: self.beam_width,
                depth: self.eagle2_depth,
                strict: true,
            },
            StrategyKind::Ddd => Strategy::Ddd(self.ddd_config()),
            StrategyKind::DddStrict => Strategy::Ddd(DddConfig::check_every_step(
                self.max_steps,
                self.beam_width,
                self.ddd_threshold,
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_spec().validate()?;
        if self.strategies.is_empty() {
            bail!("at least one strategy is required");
        }
        if self.num_tokens < 1 {
            bail!("num-tokens must be >= 1");
        }
        if self.corpus.is_none() && self.synthetic < 1 {
            bail!("either a corpus or synthetic >= 1 is required");
        }
        if self.eagle2_depth < 1 {
            bail!("eagle2-depth must be >= 1");
        }
        self.ddd_config().validate()?;
        StaticTreeTemplate::new(self.static_template.clone()).validate()?;
        self.cost_model().validate()?;
        Ok(())
    }
}

/// Parses a comma-separated list; an empty string or `none` gives an empty list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid list item `{}`: {e}", item.trim()))
        })
        .collect()
}

/// Command-line overrides; each flag mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file (flat TOML); falls back to $DYNDEPTH_CONFIG
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// hashed-logit or ngram
    #[arg(long)]
    pub model_kind: Option<ModelKind>,
    #[arg(long)]
    pub context_order: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub draft_noise: Option<f64>,
    /// Prompt file, one prompt per line
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generate N seeded prompts instead of reading a corpus
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub prompt_len: Option<usize>,
    #[arg(long)]
    pub num_tokens: Option<usize>,
    /// Comma-separated: static,eagle2,ddd,eagle2-strict,ddd-strict
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Comma-separated step indices, e.g. 5,7,9 ("none" for no checks)
    #[arg(long)]
    pub check_steps: Option<String>,
    /// Continuation threshold (accepts -inf)
    #[arg(long, allow_hyphen_values = true)]
    pub ddd_threshold: Option<f64>,
    #[arg(long)]
    pub eagle2_depth: Option<usize>,
    /// Comma-separated children per depth, e.g. 4,2,2,1,1,1
    #[arg(long)]
    pub static_template: Option<String>,
    #[arg(long)]
    pub c_target: Option<f64>,
    #[arg(long)]
    pub c_draft: Option<f64>,
    #[arg(long)]
    pub c_sync: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Overrides {
    /// Loads the config file (if any), applies every flag given, validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = v.clone().into(); })*
            };
        }
        set!(
            vocab_size,
            model_kind,
            context_order,
            seed,
            draft_noise,
            synthetic,
            prompt_len,
            num_tokens
        );
        set!(
            max_steps,
            beam_width,
            ddd_threshold,
            eagle2_depth,
            c_target,
            c_draft,
            c_sync,
            format
        );
        if let Some(p) = &self.corpus {
            c.corpus = Some(p.clone());
        }
        if let Some(p) = &self.output {
            c.output = Some(p.clone());
        }
        if let Some(s) = &self.strategies {
            c.strategies = parse_list(s)?;
        }
        if let Some(s) = &self.check_steps {
            c.check_steps = parse_list(s)?.into_iter().collect();
        }
        if let Some(s) = &self.static_template {
            c.static_template = parse_list(s)?;
        }
        c.validate()?;
        Ok(c)
    }
}
