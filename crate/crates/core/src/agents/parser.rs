//! Extraction of structured element sets from free-form provider text.
//!
//! Providers wrap JSON in prose and code fences, rename fields and leave
//! trailing commas. The parser takes the first well-formed JSON value that
//! holds the stage's collection, maps field aliases through [`ALIAS_TABLE`],
//! ignores unknown fields and reports anything missing as a [`Diagnostic`].
//! It never panics, whatever the input.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};

use super::schema::{
    CharacterDraft, DialogueDraft, PlotDraft, PlotRef, RelationshipDraft, SceneDraft, StageDraft,
};
use crate::model::{Stage, ViolationCode};

/// Upper bound on JSON start positions tried per input.
const MAX_SCAN_ATTEMPTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticCode {
    NoStructuredBlock,
    MalformedBlock,
    WrongShape,
    EmptyCollection,
    MissingField,
    InvalidField,
    UnknownCharacter,
    UnknownPlot,
    UnknownScene,
    /// A model invariant failed once the elements were placed in the project.
    Invalid(ViolationCode),
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::NoStructuredBlock => "NO_STRUCTURED_BLOCK",
            DiagnosticCode::MalformedBlock => "MALFORMED_BLOCK",
            DiagnosticCode::WrongShape => "WRONG_SHAPE",
            DiagnosticCode::EmptyCollection => "EMPTY_COLLECTION",
            DiagnosticCode::MissingField => "MISSING_FIELD",
            DiagnosticCode::InvalidField => "INVALID_FIELD",
            DiagnosticCode::UnknownCharacter => "UNKNOWN_CHARACTER",
            DiagnosticCode::UnknownPlot => "UNKNOWN_PLOT",
            DiagnosticCode::UnknownScene => "UNKNOWN_SCENE",
            DiagnosticCode::Invalid(code) => code.as_str(),
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DiagnosticCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DiagnosticCode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let code = match s.as_str() {
            "NO_STRUCTURED_BLOCK" => DiagnosticCode::NoStructuredBlock,
            "MALFORMED_BLOCK" => DiagnosticCode::MalformedBlock,
            "WRONG_SHAPE" => DiagnosticCode::WrongShape,
            "EMPTY_COLLECTION" => DiagnosticCode::EmptyCollection,
            "MISSING_FIELD" => DiagnosticCode::MissingField,
            "INVALID_FIELD" => DiagnosticCode::InvalidField,
            "UNKNOWN_CHARACTER" => DiagnosticCode::UnknownCharacter,
            "UNKNOWN_PLOT" => DiagnosticCode::UnknownPlot,
            "UNKNOWN_SCENE" => DiagnosticCode::UnknownScene,
            other => DiagnosticCode::Invalid(
                serde_json::from_value(Value::String(other.to_string()))
                    .map_err(serde::de::Error::custom)?,
            ),
        };
        Ok(code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            message: message.into(),
            index: None,
            field: None,
        }
    }

    fn at(mut self, index: usize, field: &str) -> Self {
        self.index = Some(index);
        self.field = Some(field.to_string());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)?;
        if let Some(i) = self.index {
            write!(f, " (element {})", i + 1)?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Published alias table: `(stage, canonical field, accepted keys in priority order)`.
/// Keys are matched after lowercasing and mapping spaces and hyphens to `_`.
/// The `collection` row lists the keys under which the element array may sit.
pub const ALIAS_TABLE: &[(Stage, &str, &[&str])] = &[
    (Stage::Logline, "logline", &["logline", "summary", "text", "story"]),
    (Stage::Characters, "collection", &["characters", "cast", "character_list", "roles"]),
    (Stage::Characters, "name", &["name", "character_name", "character", "full_name"]),
    (Stage::Characters, "personality", &["personality", "traits", "persona", "character_traits", "temperament"]),
    (Stage::Characters, "background", &["background", "backstory", "history", "bio", "description"]),
    (Stage::Characters, "relationships", &["relationships", "relations", "connections"]),
    (Stage::Characters, "relationship.with", &["with", "target", "character", "name", "other", "to"]),
    (Stage::Characters, "relationship.description", &["description", "relation", "relationship", "type", "detail"]),
    (Stage::Plots, "collection", &["plots", "plot", "plot_elements", "storyline", "beats"]),
    (Stage::Plots, "title", &["title", "name", "plot_title", "heading"]),
    (Stage::Plots, "summary", &["summary", "description", "content", "detail", "details"]),
    (Stage::Plots, "causes", &["causes", "cause", "follows_from", "caused_by", "because_of"]),
    (Stage::Plots, "characters", &["characters", "involved_characters", "involved", "character_names", "cast"]),
    (Stage::Scenes, "collection", &["scenes", "scene_list", "scene"]),
    (Stage::Scenes, "setting", &["setting", "place", "location", "where"]),
    (Stage::Scenes, "time", &["time", "when", "time_of_day", "period"]),
    (Stage::Scenes, "plots", &["plots", "plot", "plot_ordinals", "plot_refs", "plot_elements"]),
    (Stage::Scenes, "participants", &["participants", "characters", "cast", "present"]),
    (Stage::Dialogues, "collection", &["dialogues", "dialogue", "lines", "script", "dialogue_lines", "scenes"]),
    (Stage::Dialogues, "scene", &["scene", "scene_ordinal", "scene_number", "scene_no"]),
    (Stage::Dialogues, "speaker", &["speaker", "character", "name", "character_name", "by"]),
    (Stage::Dialogues, "line", &["line", "text", "dialogue", "utterance", "says", "content"]),
    (Stage::Dialogues, "delivery", &["delivery", "parenthetical", "delivery_note", "note", "tone"]),
    (Stage::Dialogues, "nested_lines", &["lines", "dialogue_lines", "dialogues", "dialogue", "exchange"]),
];

fn aliases(stage: Stage, field: &str) -> &'static [&'static str] {
    ALIAS_TABLE
        .iter()
        .find(|(s, f, _)| *s == stage && *f == field)
        .map(|(_, _, a)| *a)
        .unwrap_or(&[])
}

fn normalize_key(key: &str) -> String {
    key.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

fn get<'a>(obj: &'a Map<String, Value>, stage: Stage, field: &str) -> Option<&'a Value> {
    for alias in aliases(stage, field) {
        for (key, value) in obj {
            if normalize_key(key) == *alias && !value.is_null() {
                return Some(value);
            }
        }
    }
    None
}

/// Parse provider text into the element set for `stage`.
pub fn parse_structured_output(raw: &str, stage: Stage) -> Result<StageDraft, Vec<Diagnostic>> {
    let candidates = json_candidates(raw);
    for value in &candidates {
        if let Some(found) = locate(value, stage) {
            return build(found, stage);
        }
    }
    // lenient second pass over blocks that failed to parse as-is
    let mut repaired_any = false;
    let mut broken_fence = false;
    for (text, fenced) in repair_candidates(raw) {
        match serde_json::from_str::<Value>(&text) {
            Ok(value) => {
                repaired_any = true;
                if let Some(found) = locate(&value, stage) {
                    return build(found, stage);
                }
            }
            Err(_) => broken_fence |= fenced && !text.trim().is_empty(),
        }
    }
    // a truncated fence outranks stray fragments that happened to parse
    let diagnostic = if broken_fence {
        Diagnostic::new(
            DiagnosticCode::MalformedBlock,
            "a structured block was started but is not well-formed JSON",
        )
    } else if !candidates.is_empty() || repaired_any {
        Diagnostic::new(
            DiagnosticCode::WrongShape,
            format!("structured block found but it holds no {stage} collection"),
        )
    } else if looks_structured(raw) {
        Diagnostic::new(
            DiagnosticCode::MalformedBlock,
            "a structured block was started but is not well-formed JSON",
        )
    } else {
        Diagnostic::new(DiagnosticCode::NoStructuredBlock, "no structured block in output")
    };
    Err(vec![diagnostic])
}

/// Every well-formed JSON object or array embedded in `raw`, in order of
/// appearance, skipping values nested inside an earlier match.
fn json_candidates(raw: &str) -> Vec<Value> {
    let mut out = Vec::new();
    let mut attempts = 0;
    let mut skip_until = 0usize;
    for (i, ch) in raw.char_indices() {
        if i < skip_until || (ch != '{' && ch != '[') {
            continue;
        }
        attempts += 1;
        if attempts > MAX_SCAN_ATTEMPTS {
            break;
        }
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            skip_until = i + stream.byte_offset();
            out.push(value);
        }
    }
    out
}

/// Texts worth a lenient re-parse: fenced block bodies and the outermost
/// brace span, with trailing commas removed and typographic quotes replaced.
/// The flag marks fenced bodies.
fn repair_candidates(raw: &str) -> Vec<(String, bool)> {
    let mut texts = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map_or(0, |n| n + 1);
        let body = &after[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        texts.push((body[..end].to_string(), true));
        if end >= body.len() {
            break;
        }
        rest = &body[end + 3..];
    }
    if let (Some(open), Some(close)) = (raw.find('{'), raw.rfind('}')) {
        if open < close {
            texts.push((raw[open..=close].to_string(), false));
        }
    }
    texts
        .into_iter()
        .map(|(t, fenced)| (strip_trailing_commas(&t.replace(['\u{201c}', '\u{201d}'], "\"")), fenced))
        .collect()
}

fn strip_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn looks_structured(raw: &str) -> bool {
    if raw.contains("```") {
        return true;
    }
    raw.char_indices().any(|(i, c)| {
        (c == '{' || c == '[')
            && raw[i + c.len_utf8()..]
                .chars()
                .find(|c| !c.is_whitespace())
                .is_some_and(|n| n == '"' || n == '{')
    })
}

/// What a candidate value holds for the stage.
enum Found<'a> {
    Items(&'a [Value]),
    Text(String),
}

fn locate(value: &Value, stage: Stage) -> Option<Found<'_>> {
    if stage == Stage::Logline {
        return match value {
            Value::Object(obj) => get(obj, stage, "logline")
                .and_then(|v| v.as_str())
                .map(|s| Found::Text(s.trim().to_string())),
            _ => None,
        };
    }
    match value {
        Value::Array(items) if items.iter().all(Value::is_object) && !items.is_empty() => {
            Some(Found::Items(items))
        }
        Value::Object(obj) => {
            if let Some(Value::Array(items)) = get(obj, stage, "collection") {
                if items.iter().all(Value::is_object) {
                    return Some(Found::Items(items));
                }
            }
            // one level of wrapping, e.g. {"script": {"characters": [...]}}
            obj.values()
                .filter(|v| v.is_object())
                .find_map(|inner| match inner {
                    Value::Object(o) => match get(o, stage, "collection") {
                        Some(Value::Array(items)) if items.iter().all(Value::is_object) => {
                            Some(Found::Items(items.as_slice()))
                        }
                        _ => None,
                    },
                    _ => None,
                })
        }
        _ => None,
    }
}

fn build(found: Found<'_>, stage: Stage) -> Result<StageDraft, Vec<Diagnostic>> {
    let items = match found {
        Found::Text(text) if text.is_empty() => {
            return Err(vec![Diagnostic::new(DiagnosticCode::EmptyCollection, "logline is empty")])
        }
        Found::Text(text) => return Ok(StageDraft::Logline(text)),
        Found::Items(items) => items,
    };
    if items.is_empty() {
        return Err(vec![Diagnostic::new(
            DiagnosticCode::EmptyCollection,
            format!("{stage} collection is empty"),
        )]);
    }
    let mut diags = Vec::new();
    let draft = match stage {
        Stage::Logline => unreachable!("logline handled above"),
        Stage::Characters => StageDraft::Characters(collect(items, &mut diags, parse_character)),
        Stage::Plots => StageDraft::Plots(collect(items, &mut diags, parse_plot)),
        Stage::Scenes => StageDraft::Scenes(collect(items, &mut diags, parse_scene)),
        Stage::Dialogues => StageDraft::Dialogues(parse_dialogues(items, &mut diags)),
    };
    if diags.is_empty() {
        Ok(draft)
    } else {
        Err(diags)
    }
}

type ItemParser<T> = fn(&Map<String, Value>, usize, &mut Vec<Diagnostic>) -> Option<T>;

fn collect<T>(items: &[Value], diags: &mut Vec<Diagnostic>, parse: ItemParser<T>) -> Vec<T> {
    items
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_object().and_then(|obj| parse(obj, i, diags)))
        .collect()
}

fn text_of(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn required_text(
    obj: &Map<String, Value>,
    stage: Stage,
    field: &str,
    index: usize,
    diags: &mut Vec<Diagnostic>,
) -> Option<String> {
    match get(obj, stage, field) {
        None => {
            diags.push(
                Diagnostic::new(DiagnosticCode::MissingField, format!("missing required field `{field}`"))
                    .at(index, field),
            );
            None
        }
        Some(v) => match text_of(v) {
            Some(s) if !s.is_empty() => Some(s),
            _ => {
                diags.push(
                    Diagnostic::new(DiagnosticCode::InvalidField, format!("field `{field}` must be non-empty text"))
                        .at(index, field),
                );
                None
            }
        },
    }
}

fn optional_text(obj: &Map<String, Value>, stage: Stage, field: &str) -> String {
    get(obj, stage, field).and_then(text_of).unwrap_or_default()
}

fn name_list(value: &Value) -> Option<Vec<String>> {
    match value {
        Value::String(s) => Some(
            s.split([',', ';'])
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        ),
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::Object(obj) => get(obj, Stage::Characters, "name").and_then(text_of),
                other => text_of(other),
            })
            .collect(),
        _ => None,
    }
}

/// Leading ordinal in strings such as "2", "#2", "Plot 2", "Scene 3".
fn ordinal_in(text: &str) -> Option<u32> {
    let lower = text.trim().to_lowercase();
    let stripped = ["plot", "scene", "#", "no.", "number"]
        .iter()
        .fold(lower.as_str(), |acc, p| acc.strip_prefix(p).unwrap_or(acc).trim_start());
    stripped.trim().parse().ok()
}

fn plot_refs(value: &Value) -> Option<Vec<PlotRef>> {
    let one = |v: &Value| -> Option<PlotRef> {
        match v {
            Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()).map(PlotRef::Ordinal),
            Value::String(s) => Some(
                ordinal_in(s).map_or_else(|| PlotRef::Title(s.trim().to_string()), PlotRef::Ordinal),
            ),
            Value::Object(obj) => obj
                .get("ordinal")
                .and_then(|v| v.as_u64())
                .and_then(|n| u32::try_from(n).ok())
                .map(PlotRef::Ordinal)
                .or_else(|| get(obj, Stage::Plots, "title").and_then(text_of).map(PlotRef::Title)),
            _ => None,
        }
    };
    match value {
        Value::Array(items) => items.iter().map(one).collect(),
        other => one(other).map(|r| vec![r]),
    }
}

fn parse_character(
    obj: &Map<String, Value>,
    index: usize,
    diags: &mut Vec<Diagnostic>,
) -> Option<CharacterDraft> {
    let stage = Stage::Characters;
    let name = required_text(obj, stage, "name", index, diags);
    let mut relationships = Vec::new();
    match get(obj, stage, "relationships") {
        None => {}
        Some(Value::Array(items)) => {
            for item in items {
                let rel = match item {
                    Value::Object(r) => get(r, stage, "relationship.with").and_then(text_of).map(|with| {
                        RelationshipDraft {
                            with,
                            description: get(r, stage, "relationship.description")
                                .and_then(text_of)
                                .unwrap_or_default(),
                        }
                    }),
                    _ => None,
                };
                match rel {
                    Some(rel) => relationships.push(rel),
                    None => diags.push(
                        Diagnostic::new(
                            DiagnosticCode::InvalidField,
                            "relationship entries need a target character",
                        )
                        .at(index, "relationships"),
                    ),
                }
            }
        }
        // {"Mei": "younger sister"}
        Some(Value::Object(map)) => {
            for (with, description) in map {
                relationships.push(RelationshipDraft {
                    with: with.trim().to_string(),
                    description: text_of(description).unwrap_or_default(),
                });
            }
        }
        Some(_) => diags.push(
            Diagnostic::new(DiagnosticCode::InvalidField, "relationships must be a list")
                .at(index, "relationships"),
        ),
    }
    Some(CharacterDraft {
        name: name?,
        personality: optional_text(obj, stage, "personality"),
        background: optional_text(obj, stage, "background"),
        relationships,
    })
}

fn parse_plot(obj: &Map<String, Value>, index: usize, diags: &mut Vec<Diagnostic>) -> Option<PlotDraft> {
    let stage = Stage::Plots;
    let title = required_text(obj, stage, "title", index, diags);
    let causes = match get(obj, stage, "causes") {
        None => Vec::new(),
        Some(v) => plot_refs(v).unwrap_or_else(|| {
            diags.push(
                Diagnostic::new(DiagnosticCode::InvalidField, "causes must list plot ordinals or titles")
                    .at(index, "causes"),
            );
            Vec::new()
        }),
    };
    let characters = match get(obj, stage, "characters") {
        None => Vec::new(),
        Some(v) => name_list(v).unwrap_or_else(|| {
            diags.push(
                Diagnostic::new(DiagnosticCode::InvalidField, "characters must list names")
                    .at(index, "characters"),
            );
            Vec::new()
        }),
    };
    Some(PlotDraft {
        ordinal: None,
        title: title?,
        summary: optional_text(obj, stage, "summary"),
        causes,
        characters,
    })
}

fn parse_scene(obj: &Map<String, Value>, index: usize, diags: &mut Vec<Diagnostic>) -> Option<SceneDraft> {
    let stage = Stage::Scenes;
    let setting = required_text(obj, stage, "setting", index, diags);
    let plots = match get(obj, stage, "plots") {
        None => {
            diags.push(
                Diagnostic::new(DiagnosticCode::MissingField, "missing required field `plots`")
                    .at(index, "plots"),
            );
            None
        }
        Some(v) => {
            let refs = plot_refs(v);
            if refs.is_none() {
                diags.push(
                    Diagnostic::new(DiagnosticCode::InvalidField, "plots must list plot ordinals or titles")
                        .at(index, "plots"),
                );
            }
            refs
        }
    };
    let participants = match get(obj, stage, "participants") {
        None => {
            diags.push(
                Diagnostic::new(DiagnosticCode::MissingField, "missing required field `participants`")
                    .at(index, "participants"),
            );
            None
        }
        Some(v) => {
            let names = name_list(v);
            if names.is_none() {
                diags.push(
                    Diagnostic::new(DiagnosticCode::InvalidField, "participants must list names")
                        .at(index, "participants"),
                );
            }
            names
        }
    };
    Some(SceneDraft {
        ordinal: None,
        setting: setting?,
        time: optional_text(obj, stage, "time"),
        plots: plots?,
        participants: participants?,
    })
}

fn scene_number(value: &Value) -> Option<u32> {
    match value {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => ordinal_in(s),
        _ => None,
    }
}

fn parse_dialogues(items: &[Value], diags: &mut Vec<Diagnostic>) -> Vec<DialogueDraft> {
    let stage = Stage::Dialogues;
    let mut out = Vec::new();
    let mut index = 0usize;
    for item in items {
        let Some(obj) = item.as_object() else { continue };
        let nested = aliases(stage, "nested_lines").iter().find_map(|alias| {
            obj.iter()
                .find(|(k, v)| normalize_key(k) == *alias && v.is_array())
                .and_then(|(_, v)| v.as_array())
        });
        match nested {
            Some(lines) => {
                let scene = get(obj, stage, "scene").and_then(scene_number);
                for line in lines {
                    if let Some(line_obj) = line.as_object() {
                        if let Some(d) = parse_line(line_obj, scene, index, diags) {
                            out.push(d);
                        }
                        index += 1;
                    }
                }
            }
            None => {
                if let Some(d) = parse_line(obj, None, index, diags) {
                    out.push(d);
                }
                index += 1;
            }
        }
    }
    out
}

fn parse_line(
    obj: &Map<String, Value>,
    inherited_scene: Option<u32>,
    index: usize,
    diags: &mut Vec<Diagnostic>,
) -> Option<DialogueDraft> {
    let stage = Stage::Dialogues;
    let scene = match get(obj, stage, "scene").map(scene_number) {
        Some(Some(n)) => Some(n),
        Some(None) => {
            diags.push(
                Diagnostic::new(DiagnosticCode::InvalidField, "scene must be a scene ordinal").at(index, "scene"),
            );
            None
        }
        None => match inherited_scene {
            Some(n) => Some(n),
            None => {
                diags.push(
                    Diagnostic::new(DiagnosticCode::MissingField, "missing required field `scene`")
                        .at(index, "scene"),
                );
                None
            }
        },
    };
    let speaker = required_text(obj, stage, "speaker", index, diags);
    let line = required_text(obj, stage, "line", index, diags);
    let delivery = get(obj, stage, "delivery").and_then(text_of).filter(|s| !s.is_empty());
    Some(DialogueDraft {
        scene: scene?,
        speaker: speaker?,
        line: line?,
        delivery,
    })
}
