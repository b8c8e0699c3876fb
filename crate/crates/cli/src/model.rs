//! Trained model files (JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocab;
use crate::error::{CliError, Result};
use crate::scorer::LinearScorer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub tags: Vocab,
    pub tokens: Vocab,
    pub scorer: LinearScorer,
}

impl Model {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let model: Model = serde_json::from_str(&text).map_err(|source| CliError::Model {
            path: path.to_path_buf(),
            source,
        })?;
        model.check().map_err(|m| CliError::format(path.display().to_string(), 1, m))?;
        Ok(model)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let s = &self.scorer;
        let t = self.tags.len();
        if s.num_tags != t || s.vocab_size != self.tokens.len() {
            return Err("scorer dimensions do not match the vocabularies".into());
        }
        if s.emissions.len() != s.vocab_size * t || s.transitions.len() != t * t {
            return Err("scorer tables have the wrong size".into());
        }
        if !s.emissions.iter().chain(&s.transitions).all(|x| x.is_finite()) {
            return Err("scorer tables must be finite".into());
        }
        if let Some(m) = &s.mask {
            if m.num_tags != t || m.transitions.len() != t * t || m.start.len() != t || m.end.len() != t {
                return Err("structural mask has the wrong size".into());
            }
        }
        if s.bos.is_some_and(|b| b >= t) {
            return Err("boundary tag out of range".into());
        }
        Ok(())
    }
}
