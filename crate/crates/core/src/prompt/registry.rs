use std::path::Path;

use serde::{Deserialize, Serialize};

use super::template::{PromptTemplate, TemplateSpec};
use super::{PromptError, Result};

/// Registries compiled into the crate, addressable as `builtin:<name>`.
pub const BUILTIN_REGISTRIES: &[(&str, &str)] = &[
    ("violens-generative", include_str!("../../templates/violens-generative.toml")),
    ("violens-masked", include_str!("../../templates/violens-masked.toml")),
    ("violens-main", include_str!("../../templates/violens-main.toml")),
    ("sentnob", include_str!("../../templates/sentnob.toml")),
    ("xlsum", include_str!("../../templates/xlsum.toml")),
];

pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    template: Vec<TemplateSpec>,
}

/// A set of templates with unique ids, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemplateRegistry {
    templates: Vec<PromptTemplate>,
}

impl TemplateRegistry {
    /// Parses a TOML registry document.
    pub fn parse(source: &str) -> Result<Self> {
        let file: RegistryFile =
            toml::from_str(source).map_err(|e| PromptError::Schema(e.message().to_string()))?;
        let mut registry = TemplateRegistry::default();
        for spec in file.template {
            registry.insert(PromptTemplate::from_spec(spec)?)?;
        }
        Ok(registry)
    }

    /// Loads `builtin:<name>` or a registry file path.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(name) = source.strip_prefix(BUILTIN_PREFIX) {
            return Self::builtin(name);
        }
        Self::load_path(Path::new(source))
    }

    pub fn load_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        BUILTIN_REGISTRIES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| PromptError::Schema(format!("no builtin registry named {name:?}")))
            .and_then(|(_, src)| Self::parse(src))
    }

    /// Every shipped template, across all builtin registries.
    pub fn all_builtin() -> Result<Self> {
        let mut all = TemplateRegistry::default();
        for (name, _) in BUILTIN_REGISTRIES {
            all.merge(Self::builtin(name)?)?;
        }
        Ok(all)
    }

    pub fn insert(&mut self, template: PromptTemplate) -> Result<()> {
        if self.get(template.id()).is_some() {
            return Err(PromptError::DuplicateTemplateId(template.id().to_string()));
        }
        self.templates.push(template);
        Ok(())
    }

    pub fn merge(&mut self, other: TemplateRegistry) -> Result<()> {
        other.templates.into_iter().try_for_each(|t| self.insert(t))
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.id() == id)
    }

    pub fn require(&self, id: &str) -> Result<&PromptTemplate> {
        self.get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.id())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Serializes back to the TOML registry format.
    pub fn to_toml(&self) -> String {
        let file = RegistryFile {
            name: None,
            template: self.templates.iter().cloned().map(TemplateSpec::from).collect(),
        };
        toml::to_string(&file).expect("registry serializes")
    }
}
