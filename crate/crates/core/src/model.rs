//! Model files and CSV logs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaboost::AdaboostModel;
use crate::error::{Error, Result};
use crate::ptree::TreeModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "structure", rename_all = "lowercase")]
pub enum Model {
    Adaboost(AdaboostModel),
    Ptree(TreeModel),
    Matryoshka(TreeModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Adaboost(_) => "adaboost",
            Model::Ptree(_) => "ptree",
            Model::Matryoshka(_) => "matryoshka",
        }
    }

    /// Recorded training bound.
    pub fn bound(&self) -> f64 {
        match self {
            Model::Adaboost(m) => m.bound(),
            Model::Ptree(t) | Model::Matryoshka(t) => t.bound(),
        }
    }
}

/// Training context stored next to the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub learner: String,
    pub dataset_fingerprint: String,
    /// Free-form training parameters, sorted by key.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub version: u32,
    pub metadata: Metadata,
    #[serde(flatten)]
    pub model: Model,
}

impl ModelRecord {
    pub fn new(model: Model, metadata: Metadata) -> Self {
        ModelRecord { version: FORMAT_VERSION, metadata, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text)?;
        if record.version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", record.version)));
        }
        Ok(record)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv_rows<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
