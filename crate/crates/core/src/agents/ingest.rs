//! Turning parsed drafts into model elements: engine-assigned ids, name and
//! ordinal resolution against the project, then model validation.

use super::parser::{Diagnostic, DiagnosticCode};
use super::schema::{PlotRef, StageDraft};
use crate::model::{
    validate_project, Character, DialogueLine, ElementId, ElementKind, PlotElement, Relationship,
    Scene, ScriptProject, StageContent, StageState, StageStatus,
};

/// Resolve a character name: exact match first, then a unique
/// case-insensitive match. Anything else fails.
pub fn resolve_name<'a>(name: &str, characters: &'a [Character]) -> Option<&'a Character> {
    let wanted = name.trim();
    if let Some(c) = characters.iter().find(|c| c.name.trim() == wanted) {
        return Some(c);
    }
    let lower = wanted.to_lowercase();
    let mut matches = characters.iter().filter(|c| c.name.trim().to_lowercase() == lower);
    match (matches.next(), matches.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

fn resolve_title<'a>(title: &str, plots: &'a [PlotElement]) -> Option<&'a PlotElement> {
    let wanted = title.trim();
    plots
        .iter()
        .find(|p| p.title.trim() == wanted)
        .or_else(|| {
            let lower = wanted.to_lowercase();
            let mut m = plots.iter().filter(|p| p.title.trim().to_lowercase() == lower);
            match (m.next(), m.next()) {
                (Some(p), None) => Some(p),
                _ => None,
            }
        })
}

fn resolve_plot<'a>(r: &PlotRef, plots: &'a [PlotElement]) -> Option<&'a PlotElement> {
    match r {
        PlotRef::Ordinal(n) => plots.iter().find(|p| p.ordinal == *n),
        PlotRef::Title(t) => resolve_title(t, plots),
    }
}

fn unknown(code: DiagnosticCode, index: usize, field: &str, message: String) -> Diagnostic {
    let mut d = Diagnostic::new(code, message);
    d.index = Some(index);
    d.field = Some(field.to_string());
    d
}

/// Build model elements for `draft`, assigning ids stamped with `revision`.
/// The result is then checked against every model invariant owned by its
/// stage.
pub fn ingest(
    draft: StageDraft,
    project: &ScriptProject,
    revision: u64,
) -> Result<StageContent, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let content = match draft {
        StageDraft::Logline(text) => StageContent::Logline(text),
        StageDraft::Characters(drafts) => {
            let mut cast: Vec<Character> = drafts
                .iter()
                .enumerate()
                .map(|(i, d)| Character {
                    id: ElementId::new(ElementKind::Character, revision, i + 1),
                    name: d.name.trim().to_string(),
                    personality: d.personality.clone(),
                    background: d.background.clone(),
                    relationships: Vec::new(),
                })
                .collect();
            let mut all_relationships = Vec::with_capacity(drafts.len());
            for (i, d) in drafts.iter().enumerate() {
                let mut rels = Vec::new();
                for rel in &d.relationships {
                    match resolve_name(&rel.with, &cast) {
                        Some(target) => rels.push(Relationship {
                            target: target.id.clone(),
                            description: rel.description.clone(),
                        }),
                        None => diags.push(unknown(
                            DiagnosticCode::UnknownCharacter,
                            i,
                            "relationships",
                            format!("relationship names unknown character `{}`", rel.with),
                        )),
                    }
                }
                all_relationships.push(rels);
            }
            for (c, rels) in cast.iter_mut().zip(all_relationships) {
                c.relationships = rels;
            }
            StageContent::Characters(cast)
        }
        StageDraft::Plots(drafts) => {
            let mut plots: Vec<PlotElement> = drafts
                .iter()
                .enumerate()
                .map(|(i, d)| PlotElement {
                    id: ElementId::new(ElementKind::Plot, revision, i + 1),
                    ordinal: (i + 1) as u32,
                    title: d.title.trim().to_string(),
                    summary: d.summary.clone(),
                    cause_ids: Vec::new(),
                    involved_character_ids: Vec::new(),
                })
                .collect();
            let snapshot = plots.clone();
            for (i, (plot, d)) in plots.iter_mut().zip(&drafts).enumerate() {
                for cause in &d.causes {
                    match resolve_plot(cause, &snapshot) {
                        Some(p) => {
                            if !plot.cause_ids.contains(&p.id) {
                                plot.cause_ids.push(p.id.clone());
                            }
                        }
                        None => diags.push(unknown(
                            DiagnosticCode::UnknownPlot,
                            i,
                            "causes",
                            format!("cause {cause:?} does not name a plot element"),
                        )),
                    }
                }
                for name in &d.characters {
                    match resolve_name(name, &project.characters) {
                        Some(c) => {
                            if !plot.involved_character_ids.contains(&c.id) {
                                plot.involved_character_ids.push(c.id.clone());
                            }
                        }
                        None => diags.push(unknown(
                            DiagnosticCode::UnknownCharacter,
                            i,
                            "characters",
                            format!("unknown character `{name}`"),
                        )),
                    }
                }
            }
            StageContent::Plots(plots)
        }
        StageDraft::Scenes(drafts) => {
            let mut scenes = Vec::with_capacity(drafts.len());
            for (i, d) in drafts.iter().enumerate() {
                let mut plot_ids = Vec::new();
                for r in &d.plots {
                    match resolve_plot(r, &project.plots) {
                        Some(p) if !plot_ids.contains(&p.id) => plot_ids.push(p.id.clone()),
                        Some(_) => {}
                        None => diags.push(unknown(
                            DiagnosticCode::UnknownPlot,
                            i,
                            "plots",
                            format!("plot reference {r:?} does not resolve"),
                        )),
                    }
                }
                let mut participant_ids = Vec::new();
                for name in &d.participants {
                    match resolve_name(name, &project.characters) {
                        Some(c) if !participant_ids.contains(&c.id) => participant_ids.push(c.id.clone()),
                        Some(_) => {}
                        None => diags.push(unknown(
                            DiagnosticCode::UnknownCharacter,
                            i,
                            "participants",
                            format!("unknown character `{name}`"),
                        )),
                    }
                }
                scenes.push(Scene {
                    id: ElementId::new(ElementKind::Scene, revision, i + 1),
                    ordinal: (i + 1) as u32,
                    setting: d.setting.trim().to_string(),
                    time: d.time.trim().to_string(),
                    plot_ids,
                    participant_ids,
                });
            }
            StageContent::Scenes(scenes)
        }
        StageDraft::Dialogues(drafts) => {
            let mut lines = Vec::with_capacity(drafts.len());
            let mut per_scene: std::collections::HashMap<ElementId, u32> = Default::default();
            for (i, d) in drafts.iter().enumerate() {
                let scene = project.scenes.iter().find(|s| s.ordinal == d.scene);
                let speaker = resolve_name(&d.speaker, &project.characters);
                let (Some(scene), Some(speaker)) = (scene, speaker) else {
                    if scene.is_none() {
                        diags.push(unknown(
                            DiagnosticCode::UnknownScene,
                            i,
                            "scene",
                            format!("no scene with ordinal {}", d.scene),
                        ));
                    }
                    if speaker.is_none() {
                        diags.push(unknown(
                            DiagnosticCode::UnknownCharacter,
                            i,
                            "speaker",
                            format!("unknown speaker `{}`", d.speaker),
                        ));
                    }
                    continue;
                };
                let ordinal = per_scene.entry(scene.id.clone()).or_insert(0);
                *ordinal += 1;
                lines.push(DialogueLine {
                    id: ElementId::new(ElementKind::Dialogue, revision, i + 1),
                    scene_id: scene.id.clone(),
                    ordinal: *ordinal,
                    speaker_id: speaker.id.clone(),
                    line: d.line.trim().to_string(),
                    delivery_note: d.delivery.as_ref().map(|s| s.trim().to_string()),
                });
            }
            StageContent::Dialogues(lines)
        }
    };
    if !diags.is_empty() {
        return Err(diags);
    }
    let report = validate_candidate(project, &content);
    if report.is_empty() {
        Ok(content)
    } else {
        Err(report
            .violations
            .into_iter()
            .map(|v| {
                let mut d = Diagnostic::new(DiagnosticCode::Invalid(v.code), v.message);
                d.field = v.element_id.map(|id| id.0);
                d
            })
            .collect())
    }
}

/// Stage-local violations of the content once it is placed in a copy of the
/// project as a draft. Problems already present in other stages (for
/// example stale references upstream) are not the candidate's fault.
pub fn validate_candidate(
    project: &ScriptProject,
    content: &StageContent,
) -> crate::model::ValidationReport {
    let stage = content.stage();
    let mut candidate = project.clone();
    candidate.set_content(content.clone());
    candidate.set_status(
        stage,
        StageStatus {
            state: StageState::Draft,
            upstream_fingerprint: None,
        },
    );
    validate_project(&candidate).restricted_to(|s| s == stage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::schema::{CharacterDraft, DialogueDraft, RelationshipDraft};
    use crate::model::{ProjectId, ViolationCode};

    fn character(id: &str, name: &str) -> Character {
        Character {
            id: id.into(),
            name: name.into(),
            personality: String::new(),
            background: String::new(),
            relationships: vec![],
        }
    }

    #[test]
    fn name_resolution_is_exact_then_case_insensitive() {
        let cast = vec![character("a", "Lin"), character("b", "lin wei"), character("c", "LIN WEI")];
        assert_eq!(resolve_name("Lin", &cast).unwrap().id.as_str(), "a");
        assert_eq!(resolve_name("LIN", &cast).unwrap().id.as_str(), "a");
        assert_eq!(resolve_name("LIN WEI", &cast).unwrap().id.as_str(), "c");
        // two case-insensitive candidates: refuse to guess
        assert!(resolve_name("Lin Wei", &cast).is_none());
        assert!(resolve_name("Lina", &cast).is_none());
    }

    #[test]
    fn characters_get_engine_ids_and_resolved_relationships() {
        let project = ScriptProject::new(ProjectId("i".into()), "T", "logline");
        let draft = StageDraft::Characters(vec![
            CharacterDraft {
                name: "Lin".into(),
                personality: "shy".into(),
                background: String::new(),
                relationships: vec![RelationshipDraft {
                    with: "mei".into(),
                    description: "cousin".into(),
                }],
            },
            CharacterDraft {
                name: "Mei".into(),
                personality: String::new(),
                background: String::new(),
                relationships: vec![],
            },
        ]);
        let StageContent::Characters(cast) = ingest(draft, &project, 7).unwrap() else {
            panic!("wrong stage")
        };
        assert_eq!(cast[0].id.as_str(), "chr-r00000007-0001");
        assert_eq!(cast[0].relationships[0].target, cast[1].id);
    }

    #[test]
    fn duplicate_names_fail_validation() {
        let project = ScriptProject::new(ProjectId("i".into()), "T", "logline");
        let dup = |n: &str| CharacterDraft {
            name: n.into(),
            personality: String::new(),
            background: String::new(),
            relationships: vec![],
        };
        let err = ingest(StageDraft::Characters(vec![dup("Lin"), dup("LIN")]), &project, 1).unwrap_err();
        assert_eq!(err[0].code, DiagnosticCode::Invalid(ViolationCode::DuplicateName));
    }

    #[test]
    fn unknown_speaker_is_reported() {
        let mut project = ScriptProject::new(ProjectId("i".into()), "T", "logline");
        project.characters = vec![character("a", "Lin")];
        project.scenes = vec![Scene {
            id: "s".into(),
            ordinal: 1,
            setting: "Hall".into(),
            time: String::new(),
            plot_ids: vec![],
            participant_ids: vec!["a".into()],
        }];
        let draft = StageDraft::Dialogues(vec![DialogueDraft {
            scene: 1,
            speaker: "Ghost".into(),
            line: "Boo.".into(),
            delivery: None,
        }]);
        let err = ingest(draft, &project, 3).unwrap_err();
        assert_eq!(err[0].code, DiagnosticCode::UnknownCharacter);
    }
}
