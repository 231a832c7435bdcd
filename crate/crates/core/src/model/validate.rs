use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    Actor, DialogueLine, ElementId, RevisionKind, Scene, ScriptProject, Stage, StageState,
    MAX_DELIVERY_NOTE_CHARS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptyLogline,
    MissingStageStatus,
    ConfirmedStageEmpty,
    DuplicateId,
    EmptyName,
    DuplicateName,
    UnresolvedReference,
    EmptyTitle,
    DuplicateOrdinal,
    OrdinalGap,
    CauseNotEarlier,
    EmptySetting,
    EmptyPlotRefs,
    EmptyParticipants,
    ParticipantNotInPlot,
    SpeakerNotInScene,
    EmptyLine,
    NarrationInLine,
    DeliveryNoteTooLong,
    RevisionSequence,
    ActorMismatch,
    /// A questionnaire answer outside 1..=5.
    SusOutOfRange,
    /// A questionnaire response without exactly ten answers.
    SusWrongCount,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyLogline => "EMPTY_LOGLINE",
            ViolationCode::MissingStageStatus => "MISSING_STAGE_STATUS",
            ViolationCode::ConfirmedStageEmpty => "CONFIRMED_STAGE_EMPTY",
            ViolationCode::DuplicateId => "DUPLICATE_ID",
            ViolationCode::EmptyName => "EMPTY_NAME",
            ViolationCode::DuplicateName => "DUPLICATE_NAME",
            ViolationCode::UnresolvedReference => "UNRESOLVED_REFERENCE",
            ViolationCode::EmptyTitle => "EMPTY_TITLE",
            ViolationCode::DuplicateOrdinal => "DUPLICATE_ORDINAL",
            ViolationCode::OrdinalGap => "ORDINAL_GAP",
            ViolationCode::CauseNotEarlier => "CAUSE_NOT_EARLIER",
            ViolationCode::EmptySetting => "EMPTY_SETTING",
            ViolationCode::EmptyPlotRefs => "EMPTY_PLOT_REFS",
            ViolationCode::EmptyParticipants => "EMPTY_PARTICIPANTS",
            ViolationCode::ParticipantNotInPlot => "PARTICIPANT_NOT_IN_PLOT",
            ViolationCode::SpeakerNotInScene => "SPEAKER_NOT_IN_SCENE",
            ViolationCode::EmptyLine => "EMPTY_LINE",
            ViolationCode::NarrationInLine => "NARRATION_IN_LINE",
            ViolationCode::DeliveryNoteTooLong => "DELIVERY_NOTE_TOO_LONG",
            ViolationCode::RevisionSequence => "REVISION_SEQUENCE",
            ViolationCode::ActorMismatch => "ACTOR_MISMATCH",
            ViolationCode::SusOutOfRange => "SUS_OUT_OF_RANGE",
            ViolationCode::SusWrongCount => "SUS_WRONG_COUNT",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One broken invariant. `stage` is the stage owning the offending element;
/// `None` for project-level bookkeeping (revision log).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub stage: Option<Stage>,
    pub element_id: Option<ElementId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn contains(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    /// Keep project-level violations and those owned by the given stages.
    pub fn restricted_to(&self, keep: impl Fn(Stage) -> bool) -> ValidationReport {
        ValidationReport {
            violations: self
                .violations
                .iter()
                .filter(|v| v.stage.is_none_or(&keep))
                .cloned()
                .collect(),
        }
    }

    /// Violations relevant when writing `stage`: that stage and its upstream.
    pub fn up_to(&self, stage: Stage) -> ValidationReport {
        self.restricted_to(|s| s <= stage)
    }

    fn push(
        &mut self,
        code: ViolationCode,
        stage: Option<Stage>,
        element_id: Option<&ElementId>,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            code,
            stage,
            element_id: element_id.cloned(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", v.code)?;
            if let Some(id) = &v.element_id {
                write!(f, " [{id}]")?;
            }
            write!(f, ": {}", v.message)?;
        }
        Ok(())
    }
}

/// Check every model invariant. Never fails; problems are reported.
pub fn validate_project(project: &ScriptProject) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_status(project, &mut report);
    check_ids(project, &mut report);
    check_characters(project, &mut report);
    check_plots(project, &mut report);
    check_scenes(project, &mut report);
    check_dialogues(project, &mut report);
    check_revision_log(project, &mut report);
    report
}

fn check_status(project: &ScriptProject, report: &mut ValidationReport) {
    for stage in Stage::ALL {
        let Some(status) = project.stage_status.get(&stage) else {
            report.push(
                ViolationCode::MissingStageStatus,
                Some(stage),
                None,
                format!("no status entry for stage {stage}"),
            );
            continue;
        };
        if status.state == StageState::Confirmed && project.content(stage).is_empty() {
            if stage == Stage::Logline {
                report.push(
                    ViolationCode::EmptyLogline,
                    Some(stage),
                    None,
                    "confirmed logline is empty",
                );
            } else {
                report.push(
                    ViolationCode::ConfirmedStageEmpty,
                    Some(stage),
                    None,
                    format!("stage {stage} is confirmed with no elements"),
                );
            }
        }
    }
}

fn check_ids(project: &ScriptProject, report: &mut ValidationReport) {
    let mut seen: HashSet<&ElementId> = HashSet::new();
    let all = project
        .characters
        .iter()
        .map(|e| (&e.id, Stage::Characters))
        .chain(project.plots.iter().map(|e| (&e.id, Stage::Plots)))
        .chain(project.scenes.iter().map(|e| (&e.id, Stage::Scenes)))
        .chain(project.dialogues.iter().map(|e| (&e.id, Stage::Dialogues)));
    for (id, stage) in all {
        if !seen.insert(id) {
            report.push(
                ViolationCode::DuplicateId,
                Some(stage),
                Some(id),
                format!("element id {id} is used more than once"),
            );
        }
    }
}

fn check_characters(project: &ScriptProject, report: &mut ValidationReport) {
    let stage = Some(Stage::Characters);
    let mut names: HashMap<String, &ElementId> = HashMap::new();
    for c in &project.characters {
        let name = c.name.trim();
        if name.is_empty() {
            report.push(ViolationCode::EmptyName, stage, Some(&c.id), "character name is empty");
        } else if let Some(first) = names.insert(name.to_lowercase(), &c.id) {
            report.push(
                ViolationCode::DuplicateName,
                stage,
                Some(&c.id),
                format!("name `{name}` is already used by {first}"),
            );
        }
        for rel in &c.relationships {
            if project.character(&rel.target).is_none() {
                report.push(
                    ViolationCode::UnresolvedReference,
                    stage,
                    Some(&c.id),
                    format!("relationship target {} is not a character", rel.target),
                );
            }
        }
    }
}

/// Report duplicate ordinals (one per repeat) and, over the distinct values,
/// any departure from the contiguous range 1..=k.
fn check_ordinals<'a>(
    items: impl Iterator<Item = (u32, &'a ElementId)>,
    stage: Stage,
    what: &str,
    report: &mut ValidationReport,
) {
    let mut seen: BTreeMap<u32, &ElementId> = BTreeMap::new();
    for (ordinal, id) in items {
        if let Some(first) = seen.get(&ordinal) {
            report.push(
                ViolationCode::DuplicateOrdinal,
                Some(stage),
                Some(id),
                format!("{what} ordinal {ordinal} already used by {first}"),
            );
        } else {
            seen.insert(ordinal, id);
        }
    }
    for (expected, (ordinal, id)) in (1u32..).zip(seen.iter()) {
        if *ordinal != expected {
            report.push(
                ViolationCode::OrdinalGap,
                Some(stage),
                Some(id),
                format!("{what} ordinals are not contiguous: expected {expected}, found {ordinal}"),
            );
            break;
        }
    }
}

fn check_plots(project: &ScriptProject, report: &mut ValidationReport) {
    let stage = Some(Stage::Plots);
    check_ordinals(
        project.plots.iter().map(|p| (p.ordinal, &p.id)),
        Stage::Plots,
        "plot",
        report,
    );
    for p in &project.plots {
        if p.title.trim().is_empty() {
            report.push(ViolationCode::EmptyTitle, stage, Some(&p.id), "plot title is empty");
        }
        for cause in &p.cause_ids {
            match project.plot(cause) {
                None => report.push(
                    ViolationCode::UnresolvedReference,
                    stage,
                    Some(&p.id),
                    format!("cause {cause} is not a plot element"),
                ),
                Some(earlier) if earlier.ordinal >= p.ordinal => report.push(
                    ViolationCode::CauseNotEarlier,
                    stage,
                    Some(&p.id),
                    format!(
                        "cause {cause} has ordinal {} which is not before {}",
                        earlier.ordinal, p.ordinal
                    ),
                ),
                Some(_) => {}
            }
        }
        for who in &p.involved_character_ids {
            if project.character(who).is_none() {
                report.push(
                    ViolationCode::UnresolvedReference,
                    stage,
                    Some(&p.id),
                    format!("involved character {who} does not exist"),
                );
            }
        }
    }
}

/// (scene id, participant id) pairs a user explicitly added through an edit.
fn user_added_participants(project: &ScriptProject) -> HashSet<(ElementId, ElementId)> {
    let mut added = HashSet::new();
    for entry in &project.revision_log {
        if entry.kind != RevisionKind::Edit
            || entry.actor != Actor::User
            || entry.stage != Stage::Scenes
        {
            continue;
        }
        let Some(after) = entry.after_text.as_deref() else {
            continue;
        };
        let Ok(after) = serde_json::from_str::<Scene>(after) else {
            continue;
        };
        let before: Vec<ElementId> = entry
            .before_text
            .as_deref()
            .and_then(|t| serde_json::from_str::<Scene>(t).ok())
            .map(|s| s.participant_ids)
            .unwrap_or_default();
        for who in after.participant_ids {
            if !before.contains(&who) {
                added.insert((after.id.clone(), who));
            }
        }
    }
    added
}

fn check_scenes(project: &ScriptProject, report: &mut ValidationReport) {
    let stage = Some(Stage::Scenes);
    check_ordinals(
        project.scenes.iter().map(|s| (s.ordinal, &s.id)),
        Stage::Scenes,
        "scene",
        report,
    );
    let overrides = user_added_participants(project);
    for s in &project.scenes {
        if s.setting.trim().is_empty() {
            report.push(ViolationCode::EmptySetting, stage, Some(&s.id), "scene setting is empty");
        }
        if s.plot_ids.is_empty() {
            report.push(
                ViolationCode::EmptyPlotRefs,
                stage,
                Some(&s.id),
                "scene realizes no plot element",
            );
        }
        if s.participant_ids.is_empty() {
            report.push(
                ViolationCode::EmptyParticipants,
                stage,
                Some(&s.id),
                "scene has no participants",
            );
        }
        let mut involved: HashSet<&ElementId> = HashSet::new();
        for plot_id in &s.plot_ids {
            match project.plot(plot_id) {
                Some(plot) => involved.extend(plot.involved_character_ids.iter()),
                None => report.push(
                    ViolationCode::UnresolvedReference,
                    stage,
                    Some(&s.id),
                    format!("plot {plot_id} does not exist"),
                ),
            }
        }
        for who in &s.participant_ids {
            if project.character(who).is_none() {
                report.push(
                    ViolationCode::UnresolvedReference,
                    stage,
                    Some(&s.id),
                    format!("participant {who} does not exist"),
                );
            } else if !involved.contains(who)
                && !overrides.contains(&(s.id.clone(), who.clone()))
            {
                report.push(
                    ViolationCode::ParticipantNotInPlot,
                    stage,
                    Some(&s.id),
                    format!("participant {who} is not involved in any plot this scene realizes"),
                );
            }
        }
    }
}

/// Markers of narration or stage business inside a spoken line.
fn contains_narration(line: &str) -> bool {
    const MARKERS: [char; 8] = ['(', ')', '[', ']', '（', '）', '【', '】'];
    if line.contains(MARKERS) || line.contains('\n') || line.contains('\r') {
        return true;
    }
    // *crosses the room*
    line.matches('*').count() >= 2
}

fn check_dialogues(project: &ScriptProject, report: &mut ValidationReport) {
    let stage = Some(Stage::Dialogues);
    let mut by_scene: BTreeMap<&ElementId, Vec<&DialogueLine>> = BTreeMap::new();
    for d in &project.dialogues {
        by_scene.entry(&d.scene_id).or_default().push(d);
    }
    for lines in by_scene.values() {
        check_ordinals(
            lines.iter().map(|d| (d.ordinal, &d.id)),
            Stage::Dialogues,
            "dialogue",
            report,
        );
    }
    for d in &project.dialogues {
        let scene = project.scene(&d.scene_id);
        if scene.is_none() {
            report.push(
                ViolationCode::UnresolvedReference,
                stage,
                Some(&d.id),
                format!("scene {} does not exist", d.scene_id),
            );
        }
        if project.character(&d.speaker_id).is_none() {
            report.push(
                ViolationCode::UnresolvedReference,
                stage,
                Some(&d.id),
                format!("speaker {} does not exist", d.speaker_id),
            );
        } else if let Some(scene) = scene {
            if !scene.participant_ids.contains(&d.speaker_id) {
                report.push(
                    ViolationCode::SpeakerNotInScene,
                    stage,
                    Some(&d.id),
                    format!(
                        "speaker {} is not a participant of scene {}",
                        d.speaker_id, scene.id
                    ),
                );
            }
        }
        if d.line.trim().is_empty() {
            report.push(ViolationCode::EmptyLine, stage, Some(&d.id), "dialogue line is empty");
        } else if contains_narration(&d.line) {
            report.push(
                ViolationCode::NarrationInLine,
                stage,
                Some(&d.id),
                "line contains narration or stage directions; only spoken text is allowed",
            );
        }
        if let Some(note) = &d.delivery_note {
            let chars = note.chars().count();
            if chars > MAX_DELIVERY_NOTE_CHARS || note.contains('\n') {
                report.push(
                    ViolationCode::DeliveryNoteTooLong,
                    stage,
                    Some(&d.id),
                    format!("delivery note has {chars} characters (max {MAX_DELIVERY_NOTE_CHARS}, single line)"),
                );
            }
        }
    }
}

fn check_revision_log(project: &ScriptProject, report: &mut ValidationReport) {
    let expected_last = project.revision_log.last().map_or(0, |e| e.revision);
    let gap_free = project
        .revision_log
        .iter()
        .zip(1u64..)
        .all(|(entry, n)| entry.revision == n);
    if !gap_free || expected_last != project.revision {
        report.push(
            ViolationCode::RevisionSequence,
            None,
            None,
            format!(
                "revision log must number entries 1..={} without gaps",
                project.revision
            ),
        );
    }
    for entry in &project.revision_log {
        let required = match entry.kind {
            RevisionKind::Generate => Some(Actor::Agent),
            RevisionKind::Edit | RevisionKind::Confirm => Some(Actor::User),
            RevisionKind::Delete | RevisionKind::CascadeRegenerate => None,
        };
        if let Some(actor) = required {
            if entry.actor != actor {
                report.push(
                    ViolationCode::ActorMismatch,
                    None,
                    None,
                    format!(
                        "revision {} of kind {:?} must be performed by {:?}",
                        entry.revision, entry.kind, actor
                    ),
                );
            }
        }
    }
}
