//! Serialized table of precomputed CUT rules.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::cut::CutRule;
use crate::error::{Error, Result};

pub const CUT_TABLE_FORMAT: &str = "polykf-cut-rules";
pub const CUT_TABLE_VERSION: u32 = 1;

static SHIPPED_JSON: &str = include_str!("../../data/cut_rules.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutTable {
    pub format: String,
    pub version: u32,
    pub entries: Vec<CutRule>,
}

impl Default for CutTable {
    fn default() -> Self {
        Self {
            format: CUT_TABLE_FORMAT.to_string(),
            version: CUT_TABLE_VERSION,
            entries: Vec::new(),
        }
    }
}

impl CutTable {
    /// The table compiled into the library.
    pub fn shipped() -> &'static CutTable {
        static TABLE: OnceLock<CutTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CutTable::from_json(SHIPPED_JSON).unwrap_or_else(|e| {
                log::error!("shipped CUT table unreadable: {e}");
                CutTable::default()
            })
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: CutTable =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("CUT table: {e}")))?;
        if table.format != CUT_TABLE_FORMAT {
            return Err(Error::Config(format!("CUT table: unknown format {:?}", table.format)));
        }
        if table.version != CUT_TABLE_VERSION {
            return Err(Error::Config(format!(
                "CUT table: version {} (expected {CUT_TABLE_VERSION})",
                table.version
            )));
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn find(&self, dim: usize, order: usize) -> Option<&CutRule> {
        self.entries
            .iter()
            .find(|r| r.dim == dim && r.order == order)
    }

    pub fn insert(&mut self, rule: CutRule) {
        self.entries.retain(|r| !(r.dim == rule.dim && r.order == rule.order));
        self.entries.push(rule);
        self.entries.sort_by_key(|r| (r.order, r.dim));
    }
}
