//! The provider-facing element schema. Agents exchange elements by name and
//! ordinal; ids exist only inside the engine.

use serde::{Deserialize, Serialize};

use crate::model::{ScriptProject, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipDraft {
    pub with: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterDraft {
    pub name: String,
    #[serde(default)]
    pub personality: String,
    #[serde(default)]
    pub background: String,
    #[serde(default)]
    pub relationships: Vec<RelationshipDraft>,
}

/// Reference to a plot element by 1-based ordinal or by title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlotRef {
    Ordinal(u32),
    Title(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotDraft {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<u32>,
    pub title: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub causes: Vec<PlotRef>,
    #[serde(default)]
    pub characters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDraft {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<u32>,
    pub setting: String,
    #[serde(default)]
    pub time: String,
    pub plots: Vec<PlotRef>,
    pub participants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueDraft {
    pub scene: u32,
    pub speaker: String,
    pub line: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<String>,
}

/// Parsed but not yet ingested agent output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageDraft {
    Logline(String),
    Characters(Vec<CharacterDraft>),
    Plots(Vec<PlotDraft>),
    Scenes(Vec<SceneDraft>),
    Dialogues(Vec<DialogueDraft>),
}

impl StageDraft {
    pub fn stage(&self) -> Stage {
        match self {
            StageDraft::Logline(_) => Stage::Logline,
            StageDraft::Characters(_) => Stage::Characters,
            StageDraft::Plots(_) => Stage::Plots,
            StageDraft::Scenes(_) => Stage::Scenes,
            StageDraft::Dialogues(_) => Stage::Dialogues,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StageDraft::Logline(t) => usize::from(!t.is_empty()),
            StageDraft::Characters(v) => v.len(),
            StageDraft::Plots(v) => v.len(),
            StageDraft::Scenes(v) => v.len(),
            StageDraft::Dialogues(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Confirmed upstream content as handed to agents, in the same schema the
/// agents answer in.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDocument {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characters: Option<Vec<CharacterDraft>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plots: Option<Vec<PlotDraft>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenes: Option<Vec<SceneDraft>>,
}

impl ContextDocument {
    /// Collect confirmed content from the given stages. Unconfirmed stages are
    /// left out entirely, so drafts never reach a prompt.
    pub fn from_project(project: &ScriptProject, stages: &[Stage]) -> Self {
        let include = |s: Stage| stages.contains(&s) && project.is_confirmed(s);
        let name_of = |id: &crate::model::ElementId| {
            project
                .character(id)
                .map_or_else(|| id.to_string(), |c| c.name.clone())
        };
        let plot_ordinal = |id: &crate::model::ElementId| project.plot(id).map(|p| p.ordinal);
        let mut doc = ContextDocument {
            title: project.title.clone(),
            ..Default::default()
        };
        if include(Stage::Logline) {
            doc.logline = Some(project.logline.text.trim().to_string());
        }
        if include(Stage::Characters) {
            doc.characters = Some(
                project
                    .characters
                    .iter()
                    .map(|c| CharacterDraft {
                        name: c.name.clone(),
                        personality: c.personality.clone(),
                        background: c.background.clone(),
                        relationships: c
                            .relationships
                            .iter()
                            .map(|r| RelationshipDraft {
                                with: name_of(&r.target),
                                description: r.description.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            );
        }
        if include(Stage::Plots) {
            let mut plots: Vec<_> = project.plots.iter().collect();
            plots.sort_by_key(|p| p.ordinal);
            doc.plots = Some(
                plots
                    .into_iter()
                    .map(|p| PlotDraft {
                        ordinal: Some(p.ordinal),
                        title: p.title.clone(),
                        summary: p.summary.clone(),
                        causes: p
                            .cause_ids
                            .iter()
                            .filter_map(|id| plot_ordinal(id).map(PlotRef::Ordinal))
                            .collect(),
                        characters: p.involved_character_ids.iter().map(name_of).collect(),
                    })
                    .collect(),
            );
        }
        if include(Stage::Scenes) {
            let mut scenes: Vec<_> = project.scenes.iter().collect();
            scenes.sort_by_key(|s| s.ordinal);
            doc.scenes = Some(
                scenes
                    .into_iter()
                    .map(|s| SceneDraft {
                        ordinal: Some(s.ordinal),
                        setting: s.setting.clone(),
                        time: s.time.clone(),
                        plots: s
                            .plot_ids
                            .iter()
                            .filter_map(|id| plot_ordinal(id).map(PlotRef::Ordinal))
                            .collect(),
                        participants: s.participant_ids.iter().map(name_of).collect(),
                    })
                    .collect(),
            );
        }
        doc
    }

    pub fn to_prompt_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("context document serializes")
    }
}
