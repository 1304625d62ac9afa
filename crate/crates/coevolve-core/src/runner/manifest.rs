//! Case manifests: which grammar/instance files make up each case.

use crate::migrate::llm::PromptConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::RunnerError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub grammar_old_path: PathBuf,
    pub grammar_new_path: PathBuf,
    pub instance1_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance2_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// Optional overrides applied on top of the default prompt configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PromptOverrides {
    #[serde(default)]
    pub hint_grammar_old: Option<String>,
    #[serde(default)]
    pub hint_grammar_new: Option<String>,
    #[serde(default)]
    pub hint_instance: Option<String>,
    #[serde(default)]
    pub final_prompt: Option<String>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
}

impl PromptOverrides {
    pub fn apply(&self, mut config: PromptConfig) -> PromptConfig {
        if let Some(v) = &self.hint_grammar_old {
            config.hint_grammar_old = v.clone();
        }
        if let Some(v) = &self.hint_grammar_new {
            config.hint_grammar_new = v.clone();
        }
        if let Some(v) = &self.hint_instance {
            config.hint_instance = v.clone();
        }
        if let Some(v) = &self.final_prompt {
            config.final_prompt = v.clone();
        }
        if let Some(v) = self.max_output_tokens {
            config.max_output_tokens = v;
        }
        config
    }
}

fn default_repetitions() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseManifest {
    pub cases: Vec<CaseSpec>,
    #[serde(default)]
    pub defaults: Option<PromptOverrides>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

impl CaseManifest {
    /// Loads a manifest, resolving relative paths against the manifest's
    /// directory and checking every referenced file is readable now.
    pub fn load(path: &Path) -> Result<CaseManifest, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Manifest {
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let mut manifest: CaseManifest =
            serde_json::from_str(&text).map_err(|e| RunnerError::Manifest {
                message: format!("invalid manifest {}: {e}", path.display()),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut names = BTreeSet::new();
        for case in &mut manifest.cases {
            if !names.insert(case.name.clone()) {
                return Err(RunnerError::Manifest {
                    message: format!("duplicate case name `{}`", case.name),
                });
            }
            for field in [
                &mut case.grammar_old_path,
                &mut case.grammar_new_path,
                &mut case.instance1_path,
            ] {
                *field = resolve(base, field);
                check_readable(field)?;
            }
            if let Some(instance2) = &mut case.instance2_path {
                *instance2 = resolve(base, instance2);
                check_readable(instance2)?;
            }
        }
        Ok(manifest)
    }

    pub fn prompt_config(&self) -> PromptConfig {
        let base = PromptConfig::default();
        match &self.defaults {
            Some(overrides) => overrides.apply(base),
            None => base,
        }
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn check_readable(path: &Path) -> Result<(), RunnerError> {
    std::fs::File::open(path)
        .map(|_| ())
        .map_err(|e| RunnerError::Manifest {
            message: format!("referenced file {} is not readable: {e}", path.display()),
        })
}
