use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CostError, ModelSpec};

/// Registry shipped with the crate. Mixture-of-experts widths are stored
/// pre-multiplied by the active expert count.
pub const BUILTIN_REGISTRY: &str = r#"
[models.toy]
hidden_size = 4
num_layers = 2
num_heads = 2
num_kv_heads = 1
vocab_size = 10
ffn_active_dim = 8

[models.qwen3-4b]
hidden_size = 2560
num_layers = 36
num_heads = 32
num_kv_heads = 8
vocab_size = 151936
ffn_active_dim = 9728

# 8 active experts x 768
[models.qwen3-30b-a3b]
hidden_size = 2048
num_layers = 48
num_heads = 32
num_kv_heads = 4
vocab_size = 151936
ffn_active_dim = 6144
"#;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRegistry {
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
}

impl ModelRegistry {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_REGISTRY).expect("builtin registry parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CostError> {
        let reg: ModelRegistry = toml::from_str(text).map_err(|e| CostError::Registry(e.to_string()))?;
        for (name, spec) in &reg.models {
            spec.validate()
                .map_err(|e| CostError::Registry(format!("model `{name}`: {e}")))?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CostError::Registry(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Builtins overlaid with entries from `other`.
    pub fn merged(mut self, other: ModelRegistry) -> Self {
        self.models.extend(other.models);
        self
    }

    pub fn names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    /// Case-insensitive lookup; unknown names report the closest known name.
    pub fn get(&self, name: &str) -> Result<ModelSpec, CostError> {
        let wanted = name.to_ascii_lowercase();
        if let Some((_, spec)) = self.models.iter().find(|(k, _)| k.to_ascii_lowercase() == wanted) {
            return Ok(*spec);
        }
        let suggestion = self
            .models
            .keys()
            .map(|k| (strsim::levenshtein(&k.to_ascii_lowercase(), &wanted), k))
            .filter(|(d, k)| *d <= k.len().max(3) / 2)
            .min()
            .map(|(_, k)| k.clone());
        Err(CostError::UnknownModel {
            name: name.to_string(),
            known: self.names(),
            suggestion,
        })
    }
}
