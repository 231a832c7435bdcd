//! Prompt templates.
//!
//! Templates are versioned text assets under `prompts/`, one per stage per
//! agent kind (five tutors, four functional agents). They are compiled into
//! the binary and can be overridden file by file from a directory, so
//! educators can edit wording without rebuilding.
//!
//! File layout:
//!
//! ```text
//! # name: agent_characters
//! # version: 1
//! [system]
//! ...text with {{placeholders}}...
//! [task]
//! ...
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::model::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    /// Divergent coaching chat.
    Tutor,
    /// Convergent structured generation.
    Functional,
}

/// Placeholders each template kind may use.
pub const TUTOR_PLACEHOLDERS: &[&str] = &["title", "stage", "context"];
pub const AGENT_PLACEHOLDERS: &[&str] =
    &["title", "stage", "context", "count_hint", "style_notes", "schema"];

const BUILTIN: &[(&str, &str)] = &[
    ("tutor_logline", include_str!("../../prompts/tutor_logline.txt")),
    ("tutor_characters", include_str!("../../prompts/tutor_characters.txt")),
    ("tutor_plots", include_str!("../../prompts/tutor_plots.txt")),
    ("tutor_scenes", include_str!("../../prompts/tutor_scenes.txt")),
    ("tutor_dialogues", include_str!("../../prompts/tutor_dialogues.txt")),
    ("agent_characters", include_str!("../../prompts/agent_characters.txt")),
    ("agent_plots", include_str!("../../prompts/agent_plots.txt")),
    ("agent_scenes", include_str!("../../prompts/agent_scenes.txt")),
    ("agent_dialogues", include_str!("../../prompts/agent_dialogues.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {0}: missing `[system]` section")]
    MissingSystem(String),
    #[error("template {name}: unknown placeholder `{{{{{placeholder}}}}}`")]
    UnknownPlaceholder { name: String, placeholder: String },
    #[error("template {name}: unterminated placeholder")]
    Unterminated { name: String },
    #[error("no template for {purpose:?} at stage {stage}")]
    Missing { purpose: Purpose, stage: Stage },
    #[error("cannot read template file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub version: u32,
    pub system: String,
    pub task: String,
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, TemplateError> {
        let mut version = 1;
        let mut declared_name = name.to_string();
        let mut section: Option<&str> = None;
        let mut system = String::new();
        let mut task = String::new();
        for line in text.lines() {
            match line.trim() {
                "[system]" => {
                    section = Some("system");
                    continue;
                }
                "[task]" => {
                    section = Some("task");
                    continue;
                }
                _ => {}
            }
            match section {
                None => {
                    if let Some(v) = line.strip_prefix("# version:") {
                        version = v.trim().parse().unwrap_or(1);
                    } else if let Some(n) = line.strip_prefix("# name:") {
                        declared_name = n.trim().to_string();
                    }
                }
                Some("system") => {
                    system.push_str(line);
                    system.push('\n');
                }
                Some(_) => {
                    task.push_str(line);
                    task.push('\n');
                }
            }
        }
        if system.trim().is_empty() {
            return Err(TemplateError::MissingSystem(name.to_string()));
        }
        let template = PromptTemplate {
            name: declared_name,
            version,
            system: system.trim().to_string(),
            task: task.trim().to_string(),
        };
        let allowed = if name.starts_with("tutor_") {
            TUTOR_PLACEHOLDERS
        } else {
            AGENT_PLACEHOLDERS
        };
        for part in [&template.system, &template.task] {
            for placeholder in placeholders(part, &template.name)? {
                if !allowed.contains(&placeholder.as_str()) {
                    return Err(TemplateError::UnknownPlaceholder {
                        name: template.name.clone(),
                        placeholder,
                    });
                }
            }
        }
        Ok(template)
    }

    pub fn render_system(&self, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        substitute(&self.system, vars, &self.name)
    }

    pub fn render_task(&self, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        substitute(&self.task, vars, &self.name)
    }
}

fn placeholders(text: &str, name: &str) -> Result<Vec<String>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
            name: name.to_string(),
        })?;
        out.push(after[..end].trim().to_string());
        rest = &after[end + 2..];
    }
    Ok(out)
}

/// Replace every `{{key}}` with its value. Keys missing from `vars` are an error.
pub fn substitute(text: &str, vars: &BTreeMap<&str, String>, name: &str) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
            name: name.to_string(),
        })?;
        let key = after[..end].trim();
        let value = vars.get(key).ok_or_else(|| TemplateError::UnknownPlaceholder {
            name: name.to_string(),
            placeholder: key.to_string(),
        })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// The full set of templates in use.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

pub fn template_name(purpose: Purpose, stage: Stage) -> String {
    match purpose {
        Purpose::Tutor => format!("tutor_{stage}"),
        Purpose::Functional => format!("agent_{stage}"),
    }
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, text)| {
                let t = PromptTemplate::parse(name, text).expect("built-in templates are valid");
                (name.to_string(), t)
            })
            .collect();
        PromptLibrary { templates }
    }

    /// Built-in templates, with any `<name>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut lib = Self::builtin();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            lib.templates
                .insert(name.to_string(), PromptTemplate::parse(name, &text)?);
        }
        Ok(lib)
    }

    pub fn get(&self, purpose: Purpose, stage: Stage) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(&template_name(purpose, stage))
            .ok_or(TemplateError::Missing { purpose, stage })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_library_has_five_tutors_and_four_agents() {
        let lib = PromptLibrary::builtin();
        assert_eq!(lib.names().count(), 9);
        for stage in Stage::ALL {
            assert!(lib.get(Purpose::Tutor, stage).is_ok());
        }
        assert!(lib.get(Purpose::Functional, Stage::Logline).is_err());
        for stage in &Stage::ALL[1..] {
            let t = lib.get(Purpose::Functional, *stage).unwrap();
            assert!(t.task.contains("{{schema}}"), "{} lacks schema", t.name);
            assert!(t.version >= 1);
        }
    }

    #[test]
    fn substitution_replaces_and_rejects_unknown() {
        let mut vars = BTreeMap::new();
        vars.insert("title", "The Diary".to_string());
        assert_eq!(substitute("Play: {{ title }}!", &vars, "t").unwrap(), "Play: The Diary!");
        assert!(matches!(
            substitute("{{nope}}", &vars, "t"),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        assert!(matches!(
            substitute("{{title", &vars, "t"),
            Err(TemplateError::Unterminated { .. })
        ));
    }

    #[test]
    fn parse_rejects_placeholders_outside_inventory() {
        let text = "# version: 2\n[system]\nHello {{secret}}\n";
        assert!(matches!(
            PromptTemplate::parse("tutor_plots", text),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
        let ok = PromptTemplate::parse("tutor_plots", "# version: 2\n[system]\nHi {{title}}\n").unwrap();
        assert_eq!(ok.version, 2);
    }

    #[test]
    fn overrides_replace_single_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("tutor_logline.txt"),
            "# name: tutor_logline\n# version: 9\n[system]\nAsk about {{title}}?\n",
        )
        .unwrap();
        let lib = PromptLibrary::with_overrides(dir.path()).unwrap();
        assert_eq!(lib.get(Purpose::Tutor, Stage::Logline).unwrap().version, 9);
        assert_eq!(lib.get(Purpose::Tutor, Stage::Plots).unwrap().version, 1);
    }
}
