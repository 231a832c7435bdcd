//! The five-stage state machine: generate, confirm, edit, staleness and
//! cascade regeneration. Every operation takes a project value and returns
//! a new one; callers serialize writers per project.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::agents::{
    self, AgentConfig, AgentOutcome, GenerateOptions, MockProvider, OpenAiConfig, OpenAiProvider,
    PromptLibrary, Provider, TutorSession,
};
use crate::clock::{Clock, SystemClock};
use crate::error::{Error, Result};
use crate::model::{
    upstream_fingerprint, validate_project, Actor, Character, DialogueLine, ElementId, ElementKind,
    PlotElement, RevisionKind, Scene, ScriptProject, Stage, StageContent, StageState,
    StageStatus, ValidationReport, Violation, LOGLINE_ELEMENT_ID,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Freshness {
    Fresh,
    Stale,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub stages: BTreeMap<Stage, Freshness>,
}

impl StalenessReport {
    pub fn get(&self, stage: Stage) -> Freshness {
        self.stages.get(&stage).copied().unwrap_or(Freshness::Empty)
    }

    pub fn stale(&self) -> Vec<Stage> {
        self.stages
            .iter()
            .filter(|(_, f)| **f == Freshness::Stale)
            .map(|(s, _)| *s)
            .collect()
    }
}

/// A stage is stale when the upstream fingerprint recorded at its last
/// generate or confirm no longer matches the upstream content now. The
/// logline has no upstream and is never stale.
pub fn staleness(project: &ScriptProject) -> StalenessReport {
    let stages = Stage::ALL
        .iter()
        .map(|&stage| {
            let status = project.status(stage);
            let freshness = if status.state == StageState::Empty {
                Freshness::Empty
            } else if stage == Stage::Logline
                || status.upstream_fingerprint == upstream_fingerprint(project, stage)
            {
                Freshness::Fresh
            } else {
                Freshness::Stale
            };
            (stage, freshness)
        })
        .collect();
    StalenessReport { stages }
}

/// Violations that block persisting a project. Stale stages may hold
/// references into content that has since been regenerated; those are
/// tolerated because staleness is advisory.
pub fn blocking_violations(project: &ScriptProject) -> ValidationReport {
    let report = staleness(project);
    validate_project(project).restricted_to(|s| report.get(s) != Freshness::Stale)
}

pub fn check_revision(project: &ScriptProject, expected: u64) -> Result<()> {
    if expected == project.revision {
        Ok(())
    } else {
        Err(Error::Conflict {
            expected,
            actual: project.revision,
        })
    }
}

/// Result of a single-stage generation.
#[derive(Debug, Clone)]
pub struct Generated {
    pub outcome: AgentOutcome,
    pub project: ScriptProject,
}

/// A cascade that stopped part way. `project` keeps every stage completed
/// before the failure.
#[derive(Debug)]
pub struct CascadeFailure {
    pub project: ScriptProject,
    pub error: Error,
}

pub struct Engine {
    provider: Arc<dyn Provider>,
    clock: Arc<dyn Clock>,
    prompts: Arc<PromptLibrary>,
    config: AgentConfig,
}

impl Engine {
    pub fn new(provider: Arc<dyn Provider>, clock: Arc<dyn Clock>) -> Self {
        Engine {
            provider,
            clock,
            prompts: Arc::new(PromptLibrary::builtin()),
            config: AgentConfig::default(),
        }
    }

    /// Mock provider and wall clock.
    pub fn mock() -> Self {
        Self::new(Arc::new(MockProvider::new()), Arc::new(SystemClock))
    }

    /// Real provider when `PROVIDER_API_KEY` is set and `force_mock` is off,
    /// otherwise the mock. Templates are read from `COOPERA_PROMPT_DIR` when
    /// it is set.
    pub fn from_env(force_mock: bool) -> Result<Self> {
        let provider: Arc<dyn Provider> = match OpenAiConfig::from_env() {
            Some(config) if !force_mock => Arc::new(OpenAiProvider::new(config)),
            _ => Arc::new(MockProvider::new()),
        };
        let mut engine = Self::new(provider, Arc::new(SystemClock));
        if let Ok(dir) = std::env::var("COOPERA_PROMPT_DIR") {
            engine = engine.with_prompts(
                PromptLibrary::with_overrides(Path::new(&dir))
                    .map_err(|e| Error::InvalidRequest(e.to_string()))?,
            );
        }
        Ok(engine)
    }

    pub fn with_prompts(mut self, prompts: PromptLibrary) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn with_config(mut self, config: AgentConfig) -> Self {
        self.config = config;
        self
    }

    pub fn provider(&self) -> &dyn Provider {
        self.provider.as_ref()
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    /// Run the functional agent for `stage` and store its elements as a
    /// draft, replacing whatever the stage held.
    pub fn generate_stage(
        &self,
        project: &ScriptProject,
        stage: Stage,
        options: &GenerateOptions,
    ) -> Result<Generated> {
        let revision = project.revision + 1;
        let outcome = agents::run_functional_agent(
            self.provider.as_ref(),
            &self.prompts,
            &self.config,
            stage,
            project,
            options,
            revision,
        )?;
        let mut next = project.clone();
        let before = project.content(stage);
        next.set_content(outcome.elements.clone());
        next.set_status(
            stage,
            StageStatus {
                state: StageState::Draft,
                upstream_fingerprint: upstream_fingerprint(&next, stage),
            },
        );
        next.record(
            self.clock.as_ref(),
            Actor::Agent,
            stage,
            RevisionKind::Generate,
            None,
            (!before.is_empty()).then(|| before.snapshot()),
            Some(outcome.elements.snapshot()),
            Some(format!("seed {}, {} attempt(s)", options.seed, outcome.attempts)),
        );
        Ok(Generated {
            outcome,
            project: next,
        })
    }

    /// Confirm a stage. Without a payload the current draft is accepted; a
    /// payload replaces the stage content first (elements with an empty id
    /// get engine ids).
    pub fn confirm_stage(
        &self,
        project: &ScriptProject,
        stage: Stage,
        payload: Option<StageContent>,
    ) -> Result<ScriptProject> {
        agents::require_upstream_confirmed(project, stage)?;
        let mut next = project.clone();
        let revision = project.revision + 1;
        let before = project.content(stage);
        let changed = match payload {
            Some(content) => {
                if content.stage() != stage {
                    return Err(Error::InvalidRequest(format!(
                        "payload holds {} but the stage is {stage}",
                        content.stage()
                    )));
                }
                next.set_content(assign_missing_ids(content, revision));
                true
            }
            None => {
                match project.state(stage) {
                    StageState::Draft => {}
                    StageState::Empty => {
                        return Err(Error::InvalidRequest(format!("{stage} has nothing to confirm")))
                    }
                    StageState::Confirmed => {
                        return Err(Error::InvalidRequest(format!("{stage} is already confirmed")))
                    }
                }
                false
            }
        };
        next.set_status(
            stage,
            StageStatus {
                state: StageState::Confirmed,
                upstream_fingerprint: upstream_fingerprint(&next, stage),
            },
        );
        let local = validate_project(&next).restricted_to(|s| s == stage);
        if !local.is_empty() {
            return Err(Error::Validation(local));
        }
        if stage == Stage::Logline {
            next.logline.confirmed_at = Some(self.clock.now());
        }
        let after = next.content(stage);
        next.record(
            self.clock.as_ref(),
            Actor::User,
            stage,
            RevisionKind::Confirm,
            None,
            (changed && !before.is_empty()).then(|| before.snapshot()),
            Some(after.snapshot()),
            None,
        );
        Ok(next)
    }

    /// Apply a field-level patch to one element. The patch may only name
    /// fields the element has; the id cannot change. The edit is rejected
    /// if it introduces a violation in the element's stage.
    pub fn edit_element(
        &self,
        project: &ScriptProject,
        element_id: &ElementId,
        patch: &Map<String, Value>,
        expected_revision: u64,
    ) -> Result<ScriptProject> {
        check_revision(project, expected_revision)?;
        let stage = project
            .locate(element_id)
            .ok_or_else(|| Error::NotFound(format!("element {element_id}")))?;
        if patch.is_empty() {
            return Err(Error::InvalidRequest("empty patch".into()));
        }
        let mut next = project.clone();
        match stage {
            Stage::Logline => {
                let text = match (patch.get("text"), patch.len()) {
                    (Some(Value::String(t)), 1) => t.clone(),
                    _ => {
                        return Err(Error::InvalidRequest(
                            "a logline patch has exactly one string field, `text`".into(),
                        ))
                    }
                };
                next.logline.text = text;
                if project.state(Stage::Logline) == StageState::Empty && !next.logline.text.trim().is_empty() {
                    next.set_status(
                        Stage::Logline,
                        StageStatus {
                            state: StageState::Draft,
                            upstream_fingerprint: None,
                        },
                    );
                }
            }
            Stage::Characters => patch_in(&mut next.characters, element_id, patch, CHARACTER_FIELDS)?,
            Stage::Plots => patch_in(&mut next.plots, element_id, patch, PLOT_FIELDS)?,
            Stage::Scenes => patch_in(&mut next.scenes, element_id, patch, SCENE_FIELDS)?,
            Stage::Dialogues => patch_in(&mut next.dialogues, element_id, patch, DIALOGUE_FIELDS)?,
        }
        let before = project.element_snapshot(element_id);
        let after = next.element_snapshot(element_id);
        if before == after {
            return Err(Error::InvalidRequest("patch does not change the element".into()));
        }
        next.record(
            self.clock.as_ref(),
            Actor::User,
            stage,
            RevisionKind::Edit,
            Some(element_id.clone()),
            before,
            after,
            None,
        );
        let introduced = new_violations(project, &next, stage);
        if !introduced.is_empty() {
            return Err(Error::Validation(introduced));
        }
        Ok(next)
    }

    /// Regenerate and auto-confirm `from` and every stage after it. The run
    /// is bracketed by two cascade entries in the revision log. On failure
    /// the stages completed so far are kept.
    #[allow(clippy::result_large_err)]
    pub fn regenerate_cascade(
        &self,
        project: &ScriptProject,
        from: Stage,
        options: &GenerateOptions,
    ) -> std::result::Result<ScriptProject, CascadeFailure> {
        let fail = |project: &ScriptProject, error| CascadeFailure {
            project: project.clone(),
            error,
        };
        if from == Stage::Logline {
            return Err(fail(
                project,
                Error::InvalidRequest("a cascade starts at characters or later".into()),
            ));
        }
        if let Err(e) = agents::require_upstream_confirmed(project, from) {
            return Err(fail(project, e));
        }
        let mut current = project.clone();
        current.record(
            self.clock.as_ref(),
            Actor::User,
            from,
            RevisionKind::CascadeRegenerate,
            None,
            None,
            None,
            Some(format!("cascade from {from} started")),
        );
        for &stage in from.and_downstream() {
            let stage_options = GenerateOptions {
                count_hint: if stage == from { options.count_hint } else { None },
                ..options.clone()
            };
            let step = self
                .generate_stage(&current, stage, &stage_options)
                .and_then(|g| self.confirm_stage(&g.project, stage, None));
            match step {
                Ok(next) => current = next,
                Err(error) => {
                    current.record(
                        self.clock.as_ref(),
                        Actor::User,
                        stage,
                        RevisionKind::CascadeRegenerate,
                        None,
                        None,
                        None,
                        Some(format!("cascade from {from} failed at {stage}: {}", error.code())),
                    );
                    return Err(CascadeFailure {
                        project: current,
                        error,
                    });
                }
            }
        }
        current.record(
            self.clock.as_ref(),
            Actor::User,
            Stage::Dialogues,
            RevisionKind::CascadeRegenerate,
            None,
            None,
            None,
            Some(format!("cascade from {from} finished")),
        );
        Ok(current)
    }

    pub fn tutor_reply(
        &self,
        session: &TutorSession,
        message: &str,
        project: &ScriptProject,
        seed: u64,
    ) -> Result<(String, TutorSession)> {
        agents::tutor_reply(
            self.provider.as_ref(),
            &self.prompts,
            &self.config,
            self.clock.as_ref(),
            session,
            message,
            project,
            seed,
        )
    }
}

const CHARACTER_FIELDS: &[&str] = &["id", "name", "personality", "background", "relationships"];
const PLOT_FIELDS: &[&str] = &["id", "ordinal", "title", "summary", "cause_ids", "involved_character_ids"];
const SCENE_FIELDS: &[&str] = &["id", "ordinal", "setting", "time", "plot_ids", "participant_ids"];
const DIALOGUE_FIELDS: &[&str] = &["id", "scene_id", "ordinal", "speaker_id", "line", "delivery_note"];

trait HasId {
    fn id(&self) -> &ElementId;
}

macro_rules! has_id {
    ($($t:ty),*) => {$(
        impl HasId for $t {
            fn id(&self) -> &ElementId {
                &self.id
            }
        }
    )*};
}
has_id!(Character, PlotElement, Scene, DialogueLine);

fn patch_in<T>(items: &mut [T], id: &ElementId, patch: &Map<String, Value>, fields: &[&str]) -> Result<()>
where
    T: HasId + Serialize + serde::de::DeserializeOwned,
{
    let item = items
        .iter_mut()
        .find(|e| e.id() == id)
        .ok_or_else(|| Error::NotFound(format!("element {id}")))?;
    let mut value = serde_json::to_value(&*item).expect("elements serialize");
    let object = value.as_object_mut().expect("elements are objects");
    for (key, v) in patch {
        if !fields.contains(&key.as_str()) {
            return Err(Error::InvalidRequest(format!("unknown field `{key}`")));
        }
        if key == "id" && v.as_str() != Some(id.as_str()) {
            return Err(Error::InvalidRequest("element ids cannot be changed".into()));
        }
        if v.is_null() {
            object.remove(key);
        } else {
            object.insert(key.clone(), v.clone());
        }
    }
    *item = serde_json::from_value(value)
        .map_err(|e| Error::InvalidRequest(format!("patch does not fit the element: {e}")))?;
    Ok(())
}

/// Violations in `stage` after the change that were not there before.
fn new_violations(before: &ScriptProject, after: &ScriptProject, stage: Stage) -> ValidationReport {
    let key = |v: &Violation| (v.code, v.element_id.clone());
    let existing: BTreeSet<_> = validate_project(before)
        .restricted_to(|s| s == stage)
        .violations
        .iter()
        .map(key)
        .collect();
    ValidationReport {
        violations: validate_project(after)
            .restricted_to(|s| s == stage)
            .violations
            .into_iter()
            .filter(|v| !existing.contains(&key(v)))
            .collect(),
    }
}

fn assign_missing_ids(content: StageContent, revision: u64) -> StageContent {
    fn fill<T>(items: &mut [T], kind: ElementKind, revision: u64, get: impl Fn(&mut T) -> &mut ElementId) {
        for (i, item) in items.iter_mut().enumerate() {
            let id = get(item);
            if id.as_str().is_empty() {
                *id = ElementId::new(kind, revision, i + 1);
            }
        }
    }
    match content {
        StageContent::Logline(t) => StageContent::Logline(t),
        StageContent::Characters(mut v) => {
            fill(&mut v, ElementKind::Character, revision, |e| &mut e.id);
            StageContent::Characters(v)
        }
        StageContent::Plots(mut v) => {
            fill(&mut v, ElementKind::Plot, revision, |e| &mut e.id);
            StageContent::Plots(v)
        }
        StageContent::Scenes(mut v) => {
            fill(&mut v, ElementKind::Scene, revision, |e| &mut e.id);
            StageContent::Scenes(v)
        }
        StageContent::Dialogues(mut v) => {
            fill(&mut v, ElementKind::Dialogue, revision, |e| &mut e.id);
            StageContent::Dialogues(v)
        }
    }
}

/// The logline's element id, for edit calls.
pub fn logline_id() -> ElementId {
    ElementId::from(LOGLINE_ELEMENT_ID)
}
