//! Functional agents (structured generation, one per stage after the
//! logline) and conversational tutors (coaching chat, one per stage).

pub mod ingest;
pub mod parser;
pub mod prompts;
pub mod provider;
pub mod schema;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::model::{ProjectId, ScriptProject, Stage, StageContent};
pub use parser::{parse_structured_output, Diagnostic, DiagnosticCode};
pub use prompts::{PromptLibrary, Purpose, TemplateError};
pub use provider::{
    CompletionOptions, MockMode, MockProvider, OpenAiConfig, OpenAiProvider, Provider,
    ProviderError,
};
pub use schema::{
    CharacterDraft, ContextDocument, DialogueDraft, PlotDraft, PlotRef, RelationshipDraft, SceneDraft, StageDraft,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_repair_retries: u32,
    pub tutor_temperature: f32,
    pub functional_temperature: f32,
    #[serde(default)]
    pub model: Option<String>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_repair_retries: 2,
            tutor_temperature: 0.8,
            functional_temperature: 0.3,
            model: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Tutor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

/// Chat transcript for one stage of one project. Starts with a user message
/// and alternates; the system priming is not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorSession {
    pub project_id: ProjectId,
    pub stage: Stage,
    pub messages: Vec<ChatMessage>,
}

impl TutorSession {
    pub fn new(project_id: ProjectId, stage: Stage) -> Self {
        TutorSession {
            project_id,
            stage,
            messages: Vec::new(),
        }
    }
}

/// Everything a provider sees for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub purpose: Purpose,
    pub stage: Stage,
    pub system_text: String,
    /// Confirmed upstream content as a [`ContextDocument`] JSON string.
    pub context_text: String,
    pub task_text: String,
    #[serde(default)]
    pub history: Vec<ChatMessage>,
    #[serde(default)]
    pub count_hint: Option<u32>,
}

/// Knobs for a single generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateOptions {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub count_hint: Option<u32>,
    #[serde(default)]
    pub style_notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub elements: StageContent,
    pub raw_text: String,
    pub attempts: u32,
}

/// Provider output that could not be turned into valid elements within the
/// repair budget. Carries the last raw text for debugging.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{code}: {message} (after {attempts} attempts)")]
pub struct SchemaError {
    pub code: String,
    pub message: String,
    pub raw_text: String,
    pub attempts: u32,
    pub diagnostics: Vec<Diagnostic>,
}

/// Example answer shape shown to the provider for each stage.
pub fn schema_example(stage: Stage) -> &'static str {
    match stage {
        Stage::Logline => "",
        Stage::Characters => {
            r#"{"characters": [{"name": "...", "personality": "...", "background": "...", "relationships": [{"with": "<another name>", "description": "..."}]}]}"#
        }
        Stage::Plots => {
            r#"{"plots": [{"ordinal": 1, "title": "...", "summary": "...", "causes": [<earlier ordinals>], "characters": ["<name>"]}]}"#
        }
        Stage::Scenes => {
            r#"{"scenes": [{"ordinal": 1, "setting": "...", "time": "...", "plots": [<plot ordinals>], "participants": ["<name>"]}]}"#
        }
        Stage::Dialogues => {
            r#"{"dialogues": [{"scene": 1, "speaker": "<name>", "line": "...", "delivery": "<optional, short>"}]}"#
        }
    }
}

fn render_error(e: TemplateError) -> Error {
    Error::InvalidRequest(e.to_string())
}

/// Stages 0..k-1 must be confirmed before anything is generated for k.
pub fn require_upstream_confirmed(project: &ScriptProject, stage: Stage) -> Result<()> {
    match stage.upstream().iter().find(|s| !project.is_confirmed(**s)) {
        Some(missing) => Err(Error::StageOrder {
            stage,
            missing: *missing,
        }),
        None => Ok(()),
    }
}

pub fn functional_bundle(
    library: &PromptLibrary,
    project: &ScriptProject,
    stage: Stage,
    options: &GenerateOptions,
) -> Result<PromptBundle> {
    let template = library.get(Purpose::Functional, stage).map_err(render_error)?;
    let context_text = ContextDocument::from_project(project, stage.upstream()).to_prompt_text();
    let mut vars = BTreeMap::new();
    vars.insert("title", project.title.clone());
    vars.insert("stage", stage.to_string());
    vars.insert("context", context_text.clone());
    vars.insert(
        "count_hint",
        options
            .count_hint
            .map_or_else(|| "your choice".to_string(), |n| n.to_string()),
    );
    vars.insert(
        "style_notes",
        options
            .style_notes
            .clone()
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| "none".to_string()),
    );
    vars.insert("schema", schema_example(stage).to_string());
    Ok(PromptBundle {
        purpose: Purpose::Functional,
        stage,
        system_text: template.render_system(&vars).map_err(render_error)?,
        context_text,
        task_text: template.render_task(&vars).map_err(render_error)?,
        history: Vec::new(),
        count_hint: options.count_hint,
    })
}

fn corrective_instruction(diagnostics: &[Diagnostic]) -> String {
    let mut text = String::from(
        "\n\nYour previous answer could not be used. Fix these problems and answer again with one fenced ```json block:\n",
    );
    for d in diagnostics.iter().take(10) {
        text.push_str("- ");
        text.push_str(&d.to_string());
        text.push('\n');
    }
    text
}

/// Run the functional agent for `stage`. Element ids are stamped with
/// `revision`. Failed parses or invalid elements trigger up to
/// `config.max_repair_retries` further attempts, each with a corrective
/// instruction listing what went wrong.
pub fn run_functional_agent(
    provider: &dyn Provider,
    library: &PromptLibrary,
    config: &AgentConfig,
    stage: Stage,
    project: &ScriptProject,
    options: &GenerateOptions,
    revision: u64,
) -> Result<AgentOutcome> {
    if stage == Stage::Logline {
        return Err(Error::InvalidRequest(
            "the logline is written by the user, not generated".into(),
        ));
    }
    require_upstream_confirmed(project, stage)?;
    let mut bundle = functional_bundle(library, project, stage, options)?;
    let completion = CompletionOptions {
        seed: options.seed,
        temperature: config.functional_temperature,
        model: config.model.clone(),
    };
    let max_attempts = 1 + config.max_repair_retries;
    let base_task = bundle.task_text.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let raw_text = provider.complete(&bundle, &completion)?;
        let diagnostics = match parse_structured_output(&raw_text, stage) {
            Ok(draft) => match ingest::ingest(draft, project, revision) {
                Ok(elements) => {
                    return Ok(AgentOutcome {
                        elements,
                        raw_text,
                        attempts,
                    })
                }
                Err(d) => d,
            },
            Err(d) => d,
        };
        tracing::debug!(%stage, attempts, problems = diagnostics.len(), "agent output rejected");
        if attempts >= max_attempts {
            let first = diagnostics.first();
            return Err(Error::Schema(SchemaError {
                code: first.map_or("NO_STRUCTURED_BLOCK".into(), |d| d.code.to_string()),
                message: first.map_or_else(|| "no usable output".into(), |d| d.message.clone()),
                raw_text,
                attempts,
                diagnostics,
            }));
        }
        bundle.task_text = format!("{base_task}{}", corrective_instruction(&diagnostics));
    }
}

pub fn tutor_bundle(
    library: &PromptLibrary,
    project: &ScriptProject,
    session: &TutorSession,
) -> Result<PromptBundle> {
    let stage = session.stage;
    let template = library.get(Purpose::Tutor, stage).map_err(render_error)?;
    let visible: Vec<Stage> = Stage::ALL.iter().copied().filter(|s| *s <= stage).collect();
    let context_text = ContextDocument::from_project(project, &visible).to_prompt_text();
    let mut vars = BTreeMap::new();
    vars.insert("title", project.title.clone());
    vars.insert("stage", stage.to_string());
    vars.insert("context", context_text.clone());
    Ok(PromptBundle {
        purpose: Purpose::Tutor,
        stage,
        system_text: template.render_system(&vars).map_err(render_error)?,
        context_text,
        task_text: String::new(),
        history: session.messages.clone(),
        count_hint: None,
    })
}

/// One round of coaching chat. Returns the reply and the session with both
/// the user message and the reply appended. The project is only read.
#[allow(clippy::too_many_arguments)]
pub fn tutor_reply(
    provider: &dyn Provider,
    library: &PromptLibrary,
    config: &AgentConfig,
    clock: &dyn Clock,
    session: &TutorSession,
    user_message: &str,
    project: &ScriptProject,
    seed: u64,
) -> Result<(String, TutorSession)> {
    if user_message.trim().is_empty() {
        return Err(Error::InvalidRequest("message must not be empty".into()));
    }
    if session.project_id != project.id {
        return Err(Error::InvalidRequest(format!(
            "session belongs to project {}, not {}",
            session.project_id, project.id
        )));
    }
    let mut next = session.clone();
    next.messages.push(ChatMessage {
        role: ChatRole::User,
        text: user_message.to_string(),
        timestamp: clock.now(),
    });
    let bundle = tutor_bundle(library, project, &next)?;
    let completion = CompletionOptions {
        seed,
        temperature: config.tutor_temperature,
        model: config.model.clone(),
    };
    let reply = provider.complete(&bundle, &completion)?;
    next.messages.push(ChatMessage {
        role: ChatRole::Tutor,
        text: reply.clone(),
        timestamp: clock.now(),
    });
    Ok((reply, next))
}
