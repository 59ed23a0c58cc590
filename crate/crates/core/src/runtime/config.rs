use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assess::{default_assessment_template, AssessOptions};
use crate::classify::{default_classification_template, RetryPolicy};
use crate::decide::{default_decision_template, DecisionCriteria, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::ingest::{TokenEstimator, DEFAULT_TOKEN_LIMIT};
use crate::llm::{BackendConfig, GenerationParams};
use crate::metrics::EvalConfig;
use crate::prompt::PromptTemplate;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_HUMAN_DECISION_MINUTES: f64 = 22.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionModeSetting {
    /// The CEO agent decides during the run.
    #[default]
    Auto,
    /// The run stops at the shortlist; a human records the decision later.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct StageBackends {
    pub classify: Option<BackendConfig>,
    pub assess: Option<BackendConfig>,
    pub decide: Option<BackendConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TemplatePaths {
    pub classify: Option<PathBuf>,
    pub assess: Option<PathBuf>,
    pub decide: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GoldPaths {
    /// `{"id","grade","summary"}` per line.
    pub assessments: Option<PathBuf>,
    /// `{"id","segment_index","label"}` per line.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ClassifySettings {
    pub generation: GenerationParams,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub token_limit: usize,
    pub top_k: usize,
    pub seed: u64,
    pub store_root: PathBuf,
    pub human_decision_minutes: f64,
    pub estimator: String,
    pub decision_mode: DecisionModeSetting,
    pub criteria: DecisionCriteria,
    pub backend: BackendConfig,
    pub stages: StageBackends,
    pub templates: TemplatePaths,
    pub gold: GoldPaths,
    pub classify: ClassifySettings,
    pub assess: AssessOptions,
    pub decide_generation: GenerationParams,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus"),
            token_limit: DEFAULT_TOKEN_LIMIT,
            top_k: DEFAULT_TOP_K,
            seed: DEFAULT_SEED,
            store_root: PathBuf::from("runs"),
            human_decision_minutes: DEFAULT_HUMAN_DECISION_MINUTES,
            estimator: "chars_div_4".into(),
            decision_mode: DecisionModeSetting::Auto,
            criteria: DecisionCriteria::default(),
            backend: BackendConfig::default(),
            stages: StageBackends::default(),
            templates: TemplatePaths::default(),
            gold: GoldPaths::default(),
            classify: ClassifySettings::default(),
            assess: AssessOptions::default(),
            decide_generation: GenerationParams::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Templates resolved from config paths or the built-in defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub classify: PromptTemplate,
    pub assess: PromptTemplate,
    pub decide: PromptTemplate,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        rebase(base, &mut self.corpus);
        rebase(base, &mut self.store_root);
        for p in [
            &mut self.templates.classify,
            &mut self.templates.assess,
            &mut self.templates.decide,
            &mut self.gold.assessments,
            &mut self.gold.labels,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
        for b in [
            &mut self.stages.classify,
            &mut self.stages.assess,
            &mut self.stages.decide,
        ]
        .into_iter()
        .flatten()
        .chain(std::iter::once(&mut self.backend))
        {
            if let Some(dir) = b.cache_dir.as_mut() {
                rebase(base, dir);
            }
        }
    }

    pub fn token_estimator(&self) -> Result<TokenEstimator> {
        self.estimator.parse()
    }

    pub fn stage_backend(&self, stage: &str) -> &BackendConfig {
        let over = match stage {
            "classify" => &self.stages.classify,
            "assess" => &self.stages.assess,
            "decide" => &self.stages.decide,
            _ => &None,
        };
        over.as_ref().unwrap_or(&self.backend)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.corpus.exists() {
            return Err(Error::Config(format!(
                "corpus {} does not exist",
                self.corpus.display()
            )));
        }
        for (name, p) in [
            ("templates.classify", &self.templates.classify),
            ("templates.assess", &self.templates.assess),
            ("templates.decide", &self.templates.decide),
            ("gold.assessments", &self.gold.assessments),
            ("gold.labels", &self.gold.labels),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!(
                        "{name}: {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if self.token_limit == 0 {
            return Err(Error::Config("token_limit must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.criteria.hires == 0 || self.criteria.hires > self.top_k {
            return Err(Error::Config(format!(
                "criteria.hires must be between 1 and top_k ({})",
                self.top_k
            )));
        }
        if self.human_decision_minutes.is_nan() || self.human_decision_minutes < 0.0 {
            return Err(Error::Config(
                "human_decision_minutes must be non-negative".into(),
            ));
        }
        self.token_estimator()?;
        for stage in ["classify", "assess", "decide"] {
            self.stage_backend(stage).validate()?;
        }
        Ok(())
    }

    pub fn templates(&self) -> Result<Templates> {
        let load = |p: &Option<PathBuf>, default: fn() -> PromptTemplate| match p {
            Some(path) => PromptTemplate::from_file(path),
            None => Ok(default()),
        };
        Ok(Templates {
            classify: load(&self.templates.classify, default_classification_template)?,
            assess: load(&self.templates.assess, default_assessment_template)?,
            decide: load(&self.templates.decide, default_decision_template)?,
        })
    }

    /// Short hex digest of the canonical JSON form.
    pub fn short_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(json)[..4])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_toml() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.token_limit, 4096);
        assert_eq!(cfg.top_k, 10);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.human_decision_minutes, 22.0);
        assert_eq!(cfg.criteria.hires, 1);
        assert_eq!(cfg.assess.generation.max_new_tokens, 200);
    }

    #[test]
    fn stage_override_and_unknown_keys() {
        let cfg = RunConfig::from_toml(
            r#"
            corpus = "x"
            [criteria]
            hires = 3
            role_description = "database development"
            [stages.decide]
            kind = "http_chat"
            model_name = "m"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.stage_backend("decide").model_name, "m");
        assert_eq!(cfg.stage_backend("assess").model_name, "mock");
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn validation_errors_are_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig {
            corpus: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        cfg.validate().unwrap();
        cfg.criteria.hires = 11;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        cfg.criteria.hires = 1;
        cfg.templates.assess = Some(dir.path().join("missing.txt"));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
