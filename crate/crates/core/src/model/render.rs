//! Plain-text renderings: the per-stage text used by revision analytics and
//! the screenplay export.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Character, ElementId, ScriptProject, StageContent};

fn name_lookup(characters: &[Character]) -> HashMap<&ElementId, &str> {
    characters.iter().map(|c| (&c.id, c.name.as_str())).collect()
}

fn names(ids: &[ElementId], lookup: &HashMap<&ElementId, &str>) -> String {
    ids.iter()
        .map(|id| lookup.get(id).copied().unwrap_or(id.as_str()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Stable plain-text rendering of one stage's element set.
///
/// Ids never appear in the output when they resolve; references are printed
/// by name (characters), ordinal (plots, scenes). `context` supplies the
/// characters, plots and scenes used to resolve references.
pub fn render_stage_text(content: &StageContent, context: &ScriptProject) -> String {
    let people = name_lookup(&context.characters);
    let mut out = String::new();
    match content {
        StageContent::Logline(text) => out.push_str(text.trim()),
        StageContent::Characters(chars) => {
            let own = name_lookup(chars);
            for (i, c) in chars.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "{}", c.name);
                let _ = writeln!(out, "Personality: {}", c.personality);
                let _ = writeln!(out, "Background: {}", c.background);
                for rel in &c.relationships {
                    let other = own
                        .get(&rel.target)
                        .or_else(|| people.get(&rel.target))
                        .copied()
                        .unwrap_or(rel.target.as_str());
                    let _ = writeln!(out, "Relationship with {}: {}", other, rel.description);
                }
            }
        }
        StageContent::Plots(plots) => {
            let mut sorted: Vec<_> = plots.iter().collect();
            sorted.sort_by_key(|p| p.ordinal);
            let ordinals: HashMap<&ElementId, u32> =
                plots.iter().map(|p| (&p.id, p.ordinal)).collect();
            for (i, p) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "{}. {}", p.ordinal, p.title);
                let _ = writeln!(out, "{}", p.summary);
                if !p.cause_ids.is_empty() {
                    let causes: Vec<String> = p
                        .cause_ids
                        .iter()
                        .map(|id| ordinals.get(id).map_or(id.to_string(), |o| o.to_string()))
                        .collect();
                    let _ = writeln!(out, "Follows from: {}", causes.join(", "));
                }
                if !p.involved_character_ids.is_empty() {
                    let _ = writeln!(out, "Characters: {}", names(&p.involved_character_ids, &people));
                }
            }
        }
        StageContent::Scenes(scenes) => {
            let mut sorted: Vec<_> = scenes.iter().collect();
            sorted.sort_by_key(|s| s.ordinal);
            for (i, s) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "Scene {}. {} - {}", s.ordinal, s.setting, s.time);
                let plots: Vec<String> = s
                    .plot_ids
                    .iter()
                    .map(|id| context.plot(id).map_or(id.to_string(), |p| p.title.clone()))
                    .collect();
                let _ = writeln!(out, "Plots: {}", plots.join(", "));
                let _ = writeln!(out, "Participants: {}", names(&s.participant_ids, &people));
            }
        }
        StageContent::Dialogues(lines) => {
            let scene_ordinal = |id: &ElementId| context.scene(id).map_or(u32::MAX, |s| s.ordinal);
            let mut sorted: Vec<_> = lines.iter().collect();
            sorted.sort_by(|a, b| {
                (scene_ordinal(&a.scene_id), a.scene_id.as_str(), a.ordinal).cmp(&(
                    scene_ordinal(&b.scene_id),
                    b.scene_id.as_str(),
                    b.ordinal,
                ))
            });
            for d in sorted {
                let speaker = people.get(&d.speaker_id).copied().unwrap_or(d.speaker_id.as_str());
                match &d.delivery_note {
                    Some(note) => {
                        let _ = writeln!(out, "{speaker}: ({note}) {}", d.line);
                    }
                    None => {
                        let _ = writeln!(out, "{speaker}: {}", d.line);
                    }
                }
            }
        }
    }
    out
}

/// Screenplay export: title, logline, then each scene with an uppercase
/// heading followed by one `NAME: line` per dialogue line.
pub fn screenplay(project: &ScriptProject) -> String {
    let people = name_lookup(&project.characters);
    let mut out = String::new();
    let _ = writeln!(out, "{}", project.title.trim().to_uppercase());
    if !project.logline.text.trim().is_empty() {
        let _ = writeln!(out, "Logline: {}", project.logline.text.trim());
    }
    if !project.characters.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "CHARACTERS");
        for c in &project.characters {
            if c.personality.is_empty() {
                let _ = writeln!(out, "{}", c.name.to_uppercase());
            } else {
                let _ = writeln!(out, "{}: {}", c.name.to_uppercase(), c.personality);
            }
        }
    }
    let mut scenes: Vec<_> = project.scenes.iter().collect();
    scenes.sort_by_key(|s| s.ordinal);
    for scene in scenes {
        out.push('\n');
        let heading = if scene.time.trim().is_empty() {
            format!("SCENE {}: {}", scene.ordinal, scene.setting.trim())
        } else {
            format!("SCENE {}: {} - {}", scene.ordinal, scene.setting.trim(), scene.time.trim())
        };
        let _ = writeln!(out, "{}", heading.to_uppercase());
        let mut lines: Vec<_> = project
            .dialogues
            .iter()
            .filter(|d| d.scene_id == scene.id)
            .collect();
        lines.sort_by_key(|d| d.ordinal);
        for d in lines {
            let speaker = people
                .get(&d.speaker_id)
                .copied()
                .unwrap_or(d.speaker_id.as_str())
                .to_uppercase();
            match &d.delivery_note {
                Some(note) => {
                    let _ = writeln!(out, "{speaker}: ({note}) {}", d.line);
                }
                None => {
                    let _ = writeln!(out, "{speaker}: {}", d.line);
                }
            }
        }
    }
    out
}
