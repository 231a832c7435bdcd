//! Revision and usability metrics.

mod distance;
mod jaccard;
pub mod sus;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{render_stage_text, RevisionKind, ScriptProject, Stage, StageContent};
pub use distance::{diff_lengths, edit_distance, levenshtein, normalize};
pub use jaccard::{jaccard, set_jaccard, tokens};
pub use sus::{from_adjusted_item_means, parse_csv, round2, sus_score, Subscale, SusReport, SusResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub absolute_distance: usize,
    pub normalized_distance: f64,
    pub deleted_length: usize,
    pub inserted_length: usize,
    pub jaccard: f64,
}

impl DiffReport {
    pub fn to_table(&self) -> String {
        format!(
            "absolute distance    {}\nnormalized distance  {:.4}\ndeleted length       {}\ninserted length      {}\njaccard              {:.4}\n",
            self.absolute_distance,
            self.normalized_distance,
            self.deleted_length,
            self.inserted_length,
            self.jaccard
        )
    }
}

/// All metrics for an original text and its revision.
pub fn compare(original: &str, revised: &str) -> DiffReport {
    let (absolute_distance, normalized_distance) = edit_distance(original, revised);
    let (deleted_length, inserted_length) = diff_lengths(original, revised);
    DiffReport {
        absolute_distance,
        normalized_distance,
        deleted_length,
        inserted_length,
        jaccard: jaccard(original, revised),
    }
}

/// The two rendered texts a stage diff compares: the agent's most recent
/// generation for the stage and the stage as it stands now.
pub fn stage_diff_texts(project: &ScriptProject, stage: Stage) -> Result<(String, String)> {
    let generated = project
        .revision_log
        .iter()
        .rev()
        .find(|e| e.stage == stage && e.kind == RevisionKind::Generate)
        .ok_or_else(|| Error::NotFound(format!("no generated {stage} in the revision log")))?;
    let snapshot = generated
        .after_text
        .as_deref()
        .ok_or_else(|| Error::NotFound(format!("generation of {stage} has no snapshot")))?;
    let original = StageContent::from_snapshot(stage, snapshot)
        .map_err(|e| Error::InvalidRequest(format!("unreadable {stage} snapshot: {e}")))?;
    Ok((
        render_stage_text(&original, project),
        render_stage_text(&project.content(stage), project),
    ))
}

pub fn project_diff_report(project: &ScriptProject, stage: Stage) -> Result<DiffReport> {
    let (original, current) = stage_diff_texts(project, stage)?;
    Ok(compare(&original, &current))
}
