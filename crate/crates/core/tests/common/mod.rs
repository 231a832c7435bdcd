#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use coopera::agents::{GenerateOptions, MockProvider};
use coopera::clock::LogicalClock;
use coopera::model::{ElementId, ProjectId, ScriptProject, Stage, StageState};
use coopera::pipeline::{blocking_violations, logline_id, staleness, Engine, Freshness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

// ---------------------------------------------------------------- oracles

/// Textbook recursive Levenshtein, no memoisation.
pub fn naive_levenshtein(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                naive_levenshtein(ra, rb)
            } else {
                1 + naive_levenshtein(ra, b)
                    .min(naive_levenshtein(a, rb))
                    .min(naive_levenshtein(ra, rb))
            }
        }
    }
}

/// Every alignment of `a` into `b`, as (cost, deleted, inserted) with a
/// substitution counted on both sides.
pub fn all_alignments(a: &[char], b: &[char]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    fn walk(a: &[char], b: &[char], acc: (usize, usize, usize), out: &mut Vec<(usize, usize, usize)>) {
        let (c, d, i) = acc;
        if a.is_empty() && b.is_empty() {
            out.push(acc);
            return;
        }
        if !a.is_empty() && !b.is_empty() {
            if a[0] == b[0] {
                walk(&a[1..], &b[1..], acc, out);
            } else {
                walk(&a[1..], &b[1..], (c + 1, d + 1, i + 1), out);
            }
        }
        if !a.is_empty() {
            walk(&a[1..], b, (c + 1, d + 1, i), out);
        }
        if !b.is_empty() {
            walk(a, &b[1..], (c + 1, d, i + 1), out);
        }
    }
    walk(a, b, (0, 0, 0), &mut out);
    out
}

/// Minimum alignment cost and the (deleted, inserted) pairs that reach it.
pub fn optimal_lengths(a: &str, b: &str) -> (usize, BTreeSet<(usize, usize)>) {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let all = all_alignments(&a, &b);
    let best = all.iter().map(|x| x.0).min().unwrap_or(0);
    let pairs = all.iter().filter(|x| x.0 == best).map(|x| (x.1, x.2)).collect();
    (best, pairs)
}

/// All strings over `alphabet` with length at most `max_len`.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let next: Vec<String> = layer
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}")))
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub fn random_string(rng: &mut impl Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

// ---------------------------------------------------------------- projects

pub const LOGLINE: &str = "A shy student discovers an old diary that reveals a secret about the school's founder.";

pub fn engine() -> Engine {
    Engine::new(Arc::new(MockProvider::new()), Arc::new(LogicalClock::default()))
}

pub fn fresh_project(id: &str) -> ScriptProject {
    ScriptProject::new(ProjectId(id.to_string()), "The Diary", LOGLINE)
}

pub fn seeded(seed: u64) -> GenerateOptions {
    GenerateOptions {
        seed,
        ..Default::default()
    }
}

/// Logline confirmed and every later stage generated and confirmed.
pub fn full_project(engine: &Engine, id: &str, seed: u64) -> ScriptProject {
    let p = engine
        .confirm_stage(&fresh_project(id), Stage::Logline, None)
        .expect("logline confirms");
    engine
        .regenerate_cascade(&p, Stage::Characters, &seeded(seed))
        .expect("cascade over the mock succeeds")
}

pub fn text_patch(field: &str, value: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(field.to_string(), json!(value));
    m
}

/// The free-text field edited for each stage, and the element ids present.
pub fn editable(project: &ScriptProject, stage: Stage) -> (&'static str, Vec<(ElementId, String)>) {
    match stage {
        Stage::Logline => ("text", vec![(logline_id(), project.logline.text.clone())]),
        Stage::Characters => (
            "personality",
            project.characters.iter().map(|c| (c.id.clone(), c.personality.clone())).collect(),
        ),
        Stage::Plots => ("summary", project.plots.iter().map(|p| (p.id.clone(), p.summary.clone())).collect()),
        Stage::Scenes => ("time", project.scenes.iter().map(|s| (s.id.clone(), s.time.clone())).collect()),
        Stage::Dialogues => ("line", project.dialogues.iter().map(|d| (d.id.clone(), d.line.clone())).collect()),
    }
}

// ---------------------------------------------------------------- op driver

#[derive(Debug, Clone)]
pub enum Op {
    Generate(Stage, u64),
    Confirm(Stage),
    Edit(Stage, usize),
    StaleEdit(Stage, usize),
    Cascade(Stage, u64),
}

pub fn stage_at(i: usize) -> Stage {
    Stage::ALL[i % Stage::ALL.len()]
}

pub fn random_ops(rng: &mut impl Rng, len: usize) -> Vec<Op> {
    (0..len)
        .map(|_| {
            let stage = stage_at(rng.gen_range(0..5));
            match rng.gen_range(0..100) {
                0..=34 => Op::Generate(stage, rng.gen_range(0..1000)),
                35..=64 => Op::Confirm(stage),
                65..=84 => Op::Edit(stage, rng.gen_range(0..8)),
                85..=89 => Op::StaleEdit(stage, rng.gen_range(0..8)),
                _ => Op::Cascade(stage, rng.gen_range(0..1000)),
            }
        })
        .collect()
}

pub fn random_sequence(seed: u64, len: usize) -> Vec<Op> {
    random_ops(&mut ChaCha8Rng::seed_from_u64(seed), len)
}

/// Content and state of every stage before `stage`, serialised without the
/// engine's fingerprint code.
fn upstream_view(project: &ScriptProject, stage: Stage) -> String {
    let view: Vec<Value> = Stage::ALL[..stage.index()]
        .iter()
        .map(|s| json!([serde_json::to_value(project.content(*s)).unwrap(), project.state(*s)]))
        .collect();
    serde_json::to_string(&view).unwrap()
}

fn all_confirmed_before(project: &ScriptProject, stage: Stage) -> bool {
    Stage::ALL[..stage.index()].iter().all(|s| project.is_confirmed(*s))
}

/// Whether every stage before `stage` is confirmed and, by the driver's own
/// record, built on the upstream it currently has.
fn consistent_before(basis: &BTreeMap<Stage, String>, project: &ScriptProject, stage: Stage) -> bool {
    Stage::ALL[..stage.index()].iter().all(|s| {
        project.is_confirmed(*s)
            && (*s == Stage::Logline || basis.get(s) == Some(&upstream_view(project, *s)))
    })
}

/// Applies operations while keeping its own record of what upstream each
/// stage was last built against, and checks the engine against it.
pub struct Driver {
    pub engine: Engine,
    pub project: ScriptProject,
    basis: BTreeMap<Stage, String>,
    edits: u64,
}

impl Driver {
    pub fn new(id: &str) -> Self {
        Driver {
            engine: engine(),
            project: fresh_project(id),
            basis: BTreeMap::new(),
            edits: 0,
        }
    }

    fn expect_code(&self, result: &Result<ScriptProject, String>, code: &str, op: &Op) -> Result<(), String> {
        match result {
            Err(c) if c == code => Ok(()),
            other => Err(format!("{op:?}: expected {code}, got {other:?}")),
        }
    }

    pub fn apply(&mut self, op: &Op) -> Result<(), String> {
        let before = self.project.clone();
        let p = &before;
        let result: Result<ScriptProject, String> = match op {
            Op::Generate(stage, seed) => {
                let r = self
                    .engine
                    .generate_stage(p, *stage, &seeded(*seed))
                    .map(|g| g.project)
                    .map_err(|e| e.code().to_string());
                if *stage == Stage::Logline {
                    self.expect_code(&r, "INVALID_REQUEST", op)?;
                } else if !all_confirmed_before(p, *stage) {
                    self.expect_code(&r, "STAGE_ORDER", op)?;
                } else {
                    match &r {
                        Ok(next) => {
                            if next.state(*stage) != StageState::Draft {
                                return Err(format!("{op:?}: stage not in draft"));
                            }
                            self.basis.insert(*stage, upstream_view(next, *stage));
                        }
                        // stale upstream content may not resolve
                        Err(c) if c == "SCHEMA" && !consistent_before(&self.basis, p, *stage) => {}
                        Err(c) => return Err(format!("{op:?} failed with {c}")),
                    }
                }
                r
            }
            Op::Confirm(stage) => {
                let r = self
                    .engine
                    .confirm_stage(p, *stage, None)
                    .map_err(|e| e.code().to_string());
                if !all_confirmed_before(p, *stage) {
                    self.expect_code(&r, "STAGE_ORDER", op)?;
                } else if p.state(*stage) != StageState::Draft {
                    self.expect_code(&r, "INVALID_REQUEST", op)?;
                } else {
                    let fresh = *stage == Stage::Logline
                        || self.basis.get(stage) == Some(&upstream_view(p, *stage));
                    match &r {
                        Ok(next) => {
                            self.basis.insert(*stage, upstream_view(next, *stage));
                        }
                        // a draft built on an older upstream may no longer resolve
                        Err(c) if c == "VALIDATION" && !fresh => {}
                        Err(c) => return Err(format!("{op:?}: fresh draft failed to confirm: {c}")),
                    }
                }
                r
            }
            Op::Edit(stage, k) | Op::StaleEdit(stage, k) => {
                let (field, elements) = editable(p, *stage);
                if elements.is_empty() || (*stage == Stage::Logline && p.state(Stage::Logline) == StageState::Empty) {
                    return Ok(());
                }
                let (id, old) = &elements[k % elements.len()];
                self.edits += 1;
                let patch = text_patch(field, &format!("{old} v{}", self.edits));
                let stale_rev = matches!(op, Op::StaleEdit(..));
                let expected = if stale_rev { p.revision.wrapping_sub(1) } else { p.revision };
                let r = self
                    .engine
                    .edit_element(p, id, &patch, expected)
                    .map_err(|e| e.code().to_string());
                if stale_rev {
                    self.expect_code(&r, "CONFLICT", op)?;
                } else if let Err(c) = &r {
                    return Err(format!("{op:?}: edit failed with {c}"));
                }
                r
            }
            Op::Cascade(from, seed) => {
                let (r, partial) = match self.engine.regenerate_cascade(p, *from, &seeded(*seed)) {
                    Ok(next) => (Ok(next), None),
                    Err(f) => (Err(f.error.code().to_string()), Some(f.project)),
                };
                if *from == Stage::Logline {
                    self.expect_code(&r, "INVALID_REQUEST", op)?;
                } else if !all_confirmed_before(p, *from) {
                    self.expect_code(&r, "STAGE_ORDER", op)?;
                } else {
                    match (&r, partial) {
                        (Ok(next), _) => {
                            for s in from.and_downstream() {
                                if !next.is_confirmed(*s) {
                                    return Err(format!("{op:?}: {s} not confirmed after cascade"));
                                }
                                self.basis.insert(*s, upstream_view(next, *s));
                            }
                        }
                        (Err(c), Some(partial)) if c == "SCHEMA" && !consistent_before(&self.basis, p, *from) => {
                            // stages finished before the failure are kept
                            for s in from.and_downstream() {
                                if partial.content(*s) != p.content(*s) || partial.status(*s) != p.status(*s) {
                                    if !partial.is_confirmed(*s) {
                                        return Err(format!("{op:?}: kept {s} is not confirmed"));
                                    }
                                    self.basis.insert(*s, upstream_view(&partial, *s));
                                }
                            }
                            if partial.revision <= p.revision {
                                return Err(format!("{op:?}: failed cascade left no trace in the log"));
                            }
                            self.project = partial;
                            return self.check().map_err(|e| format!("after {op:?}: {e}"));
                        }
                        (Err(c), _) => return Err(format!("{op:?} failed with {c}")),
                    }
                }
                r
            }
        };
        match result {
            Ok(next) => {
                if next.revision <= before.revision {
                    return Err(format!("{op:?}: revision did not advance"));
                }
                self.project = next;
            }
            Err(_) => self.project = before,
        }
        self.check().map_err(|e| format!("after {op:?}: {e}"))
    }

    /// Ordering, staleness soundness and completeness, log shape, validity
    /// of non-stale stages and serialisation round trip.
    pub fn check(&self) -> Result<(), String> {
        let p = &self.project;
        let report = staleness(p);
        for stage in Stage::ALL {
            let state = p.state(stage);
            let fresh = report.get(stage);
            if state == StageState::Empty {
                if fresh != Freshness::Empty {
                    return Err(format!("{stage} is empty but reported {fresh:?}"));
                }
                continue;
            }
            if Stage::ALL[..stage.index()].iter().any(|s| p.state(*s) == StageState::Empty) {
                return Err(format!("{stage} holds content while an upstream stage is empty"));
            }
            let expected = if stage == Stage::Logline
                || self.basis.get(&stage) == Some(&upstream_view(p, stage))
            {
                Freshness::Fresh
            } else {
                Freshness::Stale
            };
            if fresh != expected {
                return Err(format!("{stage} reported {fresh:?}, oracle says {expected:?}"));
            }
            if fresh == Freshness::Fresh && !all_confirmed_before(p, stage) {
                return Err(format!("{stage} fresh with an unconfirmed upstream"));
            }
        }
        let revisions: Vec<u64> = p.revision_log.iter().map(|e| e.revision).collect();
        if revisions != (1..=p.revision).collect::<Vec<_>>() {
            return Err(format!("revision log {revisions:?} does not count up to {}", p.revision));
        }
        let blocking = blocking_violations(p);
        if !blocking.is_empty() {
            return Err(format!("violations outside stale stages: {blocking}"));
        }
        let back = ScriptProject::from_json(&p.to_canonical_json()).map_err(|e| e.to_string())?;
        if &back != p {
            return Err("canonical JSON does not round-trip".into());
        }
        Ok(())
    }
}

pub fn run_ops(id: &str, ops: &[Op]) -> Result<ScriptProject, String> {
    let mut driver = Driver::new(id);
    for op in ops {
        driver.apply(op)?;
    }
    Ok(driver.project)
}

// ---------------------------------------------------------------- parser corpus

pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/malformed");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Parsed(usize),
    Diagnostic(&'static str),
}

/// File, stage it is parsed for, and the expected result, worked out by
/// reading each file.
pub const CORPUS: [(&str, Stage, Expect); 20] = [
    ("01_fenced_exact.txt", Stage::Characters, Expect::Parsed(2)),
    ("02_trailing_commentary.txt", Stage::Characters, Expect::Parsed(3)),
    ("03_pure_prose.txt", Stage::Characters, Expect::Diagnostic("NO_STRUCTURED_BLOCK")),
    ("04_unterminated_fence.txt", Stage::Plots, Expect::Diagnostic("MALFORMED_BLOCK")),
    ("05_trailing_commas.txt", Stage::Plots, Expect::Parsed(2)),
    ("06_smart_quotes.txt", Stage::Characters, Expect::Parsed(1)),
    ("07_alias_keys.txt", Stage::Characters, Expect::Parsed(1)),
    ("08_wrapper_object.txt", Stage::Scenes, Expect::Parsed(1)),
    ("09_bare_array.txt", Stage::Plots, Expect::Parsed(2)),
    ("10_missing_setting.txt", Stage::Scenes, Expect::Diagnostic("MISSING_FIELD")),
    ("11_wrong_stage_collection.txt", Stage::Dialogues, Expect::Diagnostic("WRONG_SHAPE")),
    ("12_empty_collection.txt", Stage::Characters, Expect::Diagnostic("EMPTY_COLLECTION")),
    ("13_nested_lines.txt", Stage::Dialogues, Expect::Parsed(3)),
    ("14_two_blocks_first_irrelevant.txt", Stage::Plots, Expect::Parsed(2)),
    ("15_inline_json_in_prose.txt", Stage::Characters, Expect::Parsed(2)),
    ("16_html_noise.txt", Stage::Characters, Expect::Parsed(1)),
    ("17_cjk_content.txt", Stage::Characters, Expect::Parsed(2)),
    ("18_empty_output.txt", Stage::Characters, Expect::Diagnostic("NO_STRUCTURED_BLOCK")),
    ("19_invalid_scene_number.txt", Stage::Dialogues, Expect::Diagnostic("INVALID_FIELD")),
    ("20_braces_in_prose.txt", Stage::Plots, Expect::Diagnostic("NO_STRUCTURED_BLOCK")),
];

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURE_DIR}/{name}")).expect("fixture readable")
}

/// What the parser actually produced for a fixture.
pub fn observe(raw: &str, stage: Stage) -> Expect {
    match coopera::agents::parse_structured_output(raw, stage) {
        Ok(draft) => Expect::Parsed(draft.len()),
        Err(diags) => Expect::Diagnostic(diags.first().map(|d| d.code.as_str()).unwrap_or("NONE")),
    }
}

/// Random text biased towards the characters JSON extraction cares about.
pub fn fuzz_input(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "{", "}", "[", "]", "\"", ":", ",", "```", "```json\n", "\n", " ", "\\", "“", "”",
        "\"characters\"", "\"plots\"", "\"scenes\"", "\"dialogues\"", "\"lines\"", "\"name\"", "\"title\"",
        "\"setting\"", "\"speaker\"", "\"line\"", "\"scene\"", "1", "-3", "1e400", "null", "true", "学生", "é",
    ];
    let len = rng.gen_range(0..80);
    let mut s = String::new();
    for _ in 0..len {
        if rng.gen_bool(0.6) {
            s.push_str(PIECES[rng.gen_range(0..PIECES.len())]);
        } else {
            s.push(rng.gen::<char>());
        }
    }
    s
}
