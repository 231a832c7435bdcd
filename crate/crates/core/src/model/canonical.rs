//! Canonical serialization and content fingerprints.
//!
//! Canonical form is UTF-8 JSON with object keys sorted by byte order and no
//! insignificant whitespace. Fingerprints are SHA-256 over canonical bytes.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ScriptProject, Stage};

/// Serialize any value to canonical JSON.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("model types always serialize");
    let mut out = String::new();
    write_canonical(&value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Hash of the selected stages' content and state.
///
/// Timestamps (the logline's `confirmed_at`, revision log) and revision
/// bookkeeping are excluded, so only text and structure changes move the hash.
pub fn content_fingerprint(project: &ScriptProject, stages: &[Stage]) -> String {
    let mut selected: Vec<Stage> = stages.to_vec();
    selected.sort();
    selected.dedup();
    let mut doc = serde_json::Map::new();
    for stage in selected {
        let content = match stage {
            Stage::Logline => serde_json::to_value(&project.logline.text),
            Stage::Characters => serde_json::to_value(&project.characters),
            Stage::Plots => serde_json::to_value(&project.plots),
            Stage::Scenes => serde_json::to_value(&project.scenes),
            Stage::Dialogues => serde_json::to_value(&project.dialogues),
        }
        .expect("model types always serialize");
        let mut entry = serde_json::Map::new();
        entry.insert("content".into(), content);
        entry.insert(
            "state".into(),
            serde_json::to_value(project.state(stage)).expect("state serializes"),
        );
        doc.insert(stage.as_str().into(), Value::Object(entry));
    }
    let bytes = canonical_json(&Value::Object(doc));
    hex::encode(Sha256::digest(bytes.as_bytes()))
}

/// Fingerprint of every stage upstream of `stage`; `None` for the logline,
/// which has no upstream.
pub fn upstream_fingerprint(project: &ScriptProject, stage: Stage) -> Option<String> {
    let upstream = stage.upstream();
    if upstream.is_empty() {
        None
    } else {
        Some(content_fingerprint(project, upstream))
    }
}
