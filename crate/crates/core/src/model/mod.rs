//! Script data model: the five pipeline stages, the dramatic elements each
//! stage produces, and the project aggregate that carries them together with
//! per-stage status and an append-only revision log.

mod canonical;
mod render;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;

pub use canonical::{canonical_json, content_fingerprint, upstream_fingerprint};
pub use render::{render_stage_text, screenplay};
pub use validate::{validate_project, ValidationReport, Violation, ViolationCode};

/// Maximum length, in characters, of a dialogue delivery note.
pub const MAX_DELIVERY_NOTE_CHARS: usize = 80;

/// Element id used for the logline when it is addressed through `edit_element`.
pub const LOGLINE_ELEMENT_ID: &str = "logline";

/// Position in the five-step pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Logline,
    Characters,
    Plots,
    Scenes,
    Dialogues,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Logline,
        Stage::Characters,
        Stage::Plots,
        Stage::Scenes,
        Stage::Dialogues,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Stage> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Logline => "logline",
            Stage::Characters => "characters",
            Stage::Plots => "plots",
            Stage::Scenes => "scenes",
            Stage::Dialogues => "dialogues",
        }
    }

    /// Stages strictly before this one.
    pub fn upstream(self) -> &'static [Stage] {
        &Self::ALL[..self.index()]
    }

    /// This stage and every stage after it.
    pub fn and_downstream(self) -> &'static [Stage] {
        &Self::ALL[self.index()..]
    }

    pub fn next(self) -> Option<Stage> {
        Self::from_index(self.index() + 1)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stage `{0}` (expected logline, characters, plots, scenes or dialogues)")]
pub struct UnknownStage(pub String);

impl FromStr for Stage {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Stage::ALL
            .into_iter()
            .find(|stage| stage.as_str() == lower || stage.as_str().trim_end_matches('s') == lower)
            .ok_or_else(|| UnknownStage(s.to_string()))
    }
}

/// Engine-assigned element identifier.
///
/// Ids have the shape `<kind>-r<revision>-<index>` with zero padding, so they
/// sort lexicographically by kind, then by the revision that created them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub String);

impl ElementId {
    pub fn new(kind: ElementKind, revision: u64, index: usize) -> Self {
        ElementId(format!("{}-r{:08}-{:04}", kind.prefix(), revision, index))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Character,
    Plot,
    Scene,
    Dialogue,
}

impl ElementKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ElementKind::Character => "chr",
            ElementKind::Plot => "plt",
            ElementKind::Scene => "scn",
            ElementKind::Dialogue => "dlg",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            ElementKind::Character => Stage::Characters,
            ElementKind::Plot => Stage::Plots,
            ElementKind::Scene => Stage::Scenes,
            ElementKind::Dialogue => Stage::Dialogues,
        }
    }
}

/// Project identifier; also the file stem of the stored project document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectId(pub String);

impl ProjectId {
    pub fn random() -> Self {
        ProjectId(uuid::Uuid::new_v4().simple().to_string())
    }

    /// True when the id is usable as a file stem: ASCII alphanumerics, `-` and `_`.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty()
            && self.0.len() <= 128
            && self
                .0
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Logline {
    pub text: String,
    #[serde(default)]
    pub confirmed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationship {
    pub target: ElementId,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub id: ElementId,
    pub name: String,
    #[serde(default)]
    pub personality: String,
    #[serde(default)]
    pub background: String,
    #[serde(default)]
    pub relationships: Vec<Relationship>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotElement {
    pub id: ElementId,
    pub ordinal: u32,
    pub title: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub cause_ids: Vec<ElementId>,
    #[serde(default)]
    pub involved_character_ids: Vec<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub id: ElementId,
    pub ordinal: u32,
    pub setting: String,
    #[serde(default)]
    pub time: String,
    pub plot_ids: Vec<ElementId>,
    pub participant_ids: Vec<ElementId>,
}

/// A single speaker-attributed utterance. Narration is not representable;
/// the only stage direction allowed is a short delivery note.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueLine {
    pub id: ElementId,
    pub scene_id: ElementId,
    pub ordinal: u32,
    pub speaker_id: ElementId,
    pub line: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageState {
    Empty,
    Draft,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub state: StageState,
    #[serde(default)]
    pub upstream_fingerprint: Option<String>,
}

impl StageStatus {
    pub fn empty() -> Self {
        StageStatus {
            state: StageState::Empty,
            upstream_fingerprint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    User,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionKind {
    Generate,
    Edit,
    Confirm,
    Delete,
    CascadeRegenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionEntry {
    pub revision: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: Actor,
    pub stage: Stage,
    pub kind: RevisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_id: Option<ElementId>,
    /// Canonical JSON of the element (or stage element set) before the change.
    #[serde(default)]
    pub before_text: Option<String>,
    /// Canonical JSON of the element (or stage element set) after the change.
    #[serde(default)]
    pub after_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The element set of one stage, used for payloads, snapshots and agent output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "elements", rename_all = "lowercase")]
pub enum StageContent {
    Logline(String),
    Characters(Vec<Character>),
    Plots(Vec<PlotElement>),
    Scenes(Vec<Scene>),
    Dialogues(Vec<DialogueLine>),
}

impl StageContent {
    pub fn stage(&self) -> Stage {
        match self {
            StageContent::Logline(_) => Stage::Logline,
            StageContent::Characters(_) => Stage::Characters,
            StageContent::Plots(_) => Stage::Plots,
            StageContent::Scenes(_) => Stage::Scenes,
            StageContent::Dialogues(_) => Stage::Dialogues,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            StageContent::Logline(text) => text.trim().is_empty(),
            StageContent::Characters(v) => v.is_empty(),
            StageContent::Plots(v) => v.is_empty(),
            StageContent::Scenes(v) => v.is_empty(),
            StageContent::Dialogues(v) => v.is_empty(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StageContent::Logline(text) => usize::from(!text.trim().is_empty()),
            StageContent::Characters(v) => v.len(),
            StageContent::Plots(v) => v.len(),
            StageContent::Scenes(v) => v.len(),
            StageContent::Dialogues(v) => v.len(),
        }
    }

    /// Canonical JSON of the element set alone (no stage tag).
    pub fn snapshot(&self) -> String {
        match self {
            StageContent::Logline(text) => canonical_json(text),
            StageContent::Characters(v) => canonical_json(v),
            StageContent::Plots(v) => canonical_json(v),
            StageContent::Scenes(v) => canonical_json(v),
            StageContent::Dialogues(v) => canonical_json(v),
        }
    }

    /// Inverse of [`StageContent::snapshot`].
    pub fn from_snapshot(stage: Stage, text: &str) -> serde_json::Result<Self> {
        Ok(match stage {
            Stage::Logline => StageContent::Logline(serde_json::from_str(text)?),
            Stage::Characters => StageContent::Characters(serde_json::from_str(text)?),
            Stage::Plots => StageContent::Plots(serde_json::from_str(text)?),
            Stage::Scenes => StageContent::Scenes(serde_json::from_str(text)?),
            Stage::Dialogues => StageContent::Dialogues(serde_json::from_str(text)?),
        })
    }
}

/// Root aggregate for one script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptProject {
    pub id: ProjectId,
    pub title: String,
    pub logline: Logline,
    #[serde(default)]
    pub characters: Vec<Character>,
    #[serde(default)]
    pub plots: Vec<PlotElement>,
    #[serde(default)]
    pub scenes: Vec<Scene>,
    #[serde(default)]
    pub dialogues: Vec<DialogueLine>,
    pub stage_status: BTreeMap<Stage, StageStatus>,
    pub revision: u64,
    #[serde(default)]
    pub revision_log: Vec<RevisionEntry>,
}

impl ScriptProject {
    /// A fresh project. A non-empty logline draft puts the logline stage in
    /// `Draft`; nothing is logged until the first mutation.
    pub fn new(id: ProjectId, title: impl Into<String>, logline_draft: impl Into<String>) -> Self {
        let text = logline_draft.into();
        let mut stage_status: BTreeMap<Stage, StageStatus> =
            Stage::ALL.iter().map(|s| (*s, StageStatus::empty())).collect();
        if !text.trim().is_empty() {
            stage_status.insert(
                Stage::Logline,
                StageStatus {
                    state: StageState::Draft,
                    upstream_fingerprint: None,
                },
            );
        }
        ScriptProject {
            id,
            title: title.into(),
            logline: Logline {
                text,
                confirmed_at: None,
            },
            characters: Vec::new(),
            plots: Vec::new(),
            scenes: Vec::new(),
            dialogues: Vec::new(),
            stage_status,
            revision: 0,
            revision_log: Vec::new(),
        }
    }

    pub fn state(&self, stage: Stage) -> StageState {
        self.stage_status
            .get(&stage)
            .map(|s| s.state)
            .unwrap_or(StageState::Empty)
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.stage_status
            .get(&stage)
            .cloned()
            .unwrap_or_else(StageStatus::empty)
    }

    pub fn set_status(&mut self, stage: Stage, status: StageStatus) {
        self.stage_status.insert(stage, status);
    }

    pub fn is_confirmed(&self, stage: Stage) -> bool {
        self.state(stage) == StageState::Confirmed
    }

    pub fn content(&self, stage: Stage) -> StageContent {
        match stage {
            Stage::Logline => StageContent::Logline(self.logline.text.clone()),
            Stage::Characters => StageContent::Characters(self.characters.clone()),
            Stage::Plots => StageContent::Plots(self.plots.clone()),
            Stage::Scenes => StageContent::Scenes(self.scenes.clone()),
            Stage::Dialogues => StageContent::Dialogues(self.dialogues.clone()),
        }
    }

    pub fn set_content(&mut self, content: StageContent) {
        match content {
            StageContent::Logline(text) => self.logline.text = text,
            StageContent::Characters(v) => self.characters = v,
            StageContent::Plots(v) => self.plots = v,
            StageContent::Scenes(v) => self.scenes = v,
            StageContent::Dialogues(v) => self.dialogues = v,
        }
    }

    pub fn character(&self, id: &ElementId) -> Option<&Character> {
        self.characters.iter().find(|c| &c.id == id)
    }

    pub fn plot(&self, id: &ElementId) -> Option<&PlotElement> {
        self.plots.iter().find(|p| &p.id == id)
    }

    pub fn scene(&self, id: &ElementId) -> Option<&Scene> {
        self.scenes.iter().find(|s| &s.id == id)
    }

    /// Stage that owns the element with the given id, if any.
    pub fn locate(&self, id: &ElementId) -> Option<Stage> {
        if id.as_str() == LOGLINE_ELEMENT_ID {
            return Some(Stage::Logline);
        }
        if self.characters.iter().any(|e| &e.id == id) {
            Some(Stage::Characters)
        } else if self.plots.iter().any(|e| &e.id == id) {
            Some(Stage::Plots)
        } else if self.scenes.iter().any(|e| &e.id == id) {
            Some(Stage::Scenes)
        } else if self.dialogues.iter().any(|e| &e.id == id) {
            Some(Stage::Dialogues)
        } else {
            None
        }
    }

    /// Canonical JSON of one element, or `None` if the id is unknown.
    pub fn element_snapshot(&self, id: &ElementId) -> Option<String> {
        match self.locate(id)? {
            Stage::Logline => Some(canonical_json(&self.logline.text)),
            Stage::Characters => self.character(id).map(canonical_json),
            Stage::Plots => self.plot(id).map(canonical_json),
            Stage::Scenes => self.scene(id).map(canonical_json),
            Stage::Dialogues => self
                .dialogues
                .iter()
                .find(|d| &d.id == id)
                .map(canonical_json),
        }
    }

    /// Append a revision entry, bumping the revision by exactly one.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        clock: &dyn Clock,
        actor: Actor,
        stage: Stage,
        kind: RevisionKind,
        element_id: Option<ElementId>,
        before_text: Option<String>,
        after_text: Option<String>,
        note: Option<String>,
    ) -> u64 {
        self.revision += 1;
        self.revision_log.push(RevisionEntry {
            revision: self.revision,
            timestamp: clock.now(),
            actor,
            stage,
            kind,
            element_id,
            before_text,
            after_text,
            note,
        });
        self.revision
    }

    /// Full canonical serialization of the project.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let mut project: ScriptProject = serde_json::from_str(text)?;
        for stage in Stage::ALL {
            project
                .stage_status
                .entry(stage)
                .or_insert_with(StageStatus::empty);
        }
        Ok(project)
    }
}
