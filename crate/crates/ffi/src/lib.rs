//! C interface to the coopera engine.
//!
//! Projects and engines are opaque handles. Every fallible call returns a
//! [`CooperaStatus`]; on failure the message and the engine's error code are
//! available from [`coopera_last_error_message`] and
//! [`coopera_last_error_code`] on the same thread. Strings handed out by the
//! library are freed with [`coopera_string_free`]. Stages are passed as
//! `COOPERA_STAGE_*` indices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coopera::agents::GenerateOptions;
use coopera::analytics::{self, SusResponse};
use coopera::model::{canonical_json, screenplay, validate_project, ElementId, ProjectId, ScriptProject, Stage, StageContent, StageState};
use coopera::pipeline::{staleness, Engine};
use coopera::Error;
use serde_json::Value;

pub const COOPERA_STAGE_LOGLINE: u32 = 0;
pub const COOPERA_STAGE_CHARACTERS: u32 = 1;
pub const COOPERA_STAGE_PLOTS: u32 = 2;
pub const COOPERA_STAGE_SCENES: u32 = 3;
pub const COOPERA_STAGE_DIALOGUES: u32 = 4;

/// Result of a call. The first six values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CooperaStatus {
    Ok = 0,
    Other = 1,
    Validation = 2,
    StageOrder = 3,
    Provider = 4,
    Storage = 5,
    NullPointer = 6,
    InvalidUtf8 = 7,
    NotFound = 8,
    Conflict = 9,
    Schema = 10,
    InvalidArgument = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CooperaStageState {
    Empty = 0,
    Draft = 1,
    Confirmed = 2,
}

/// Opaque project handle.
pub struct CooperaProject(ScriptProject);

/// Opaque engine handle (provider, clock, prompt library).
pub struct CooperaEngine(Engine);

thread_local! {
    static LAST_ERROR: RefCell<Option<(CString, CString)>> = const { RefCell::new(None) };
}

struct Failure {
    status: CooperaStatus,
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(status: CooperaStatus, code: &'static str, message: impl Into<String>) -> Self {
        Failure {
            status,
            code,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(CooperaStatus::NullPointer, "NULL_POINTER", format!("{what} is null"))
    }

    fn argument(message: impl Into<String>) -> Self {
        Self::new(CooperaStatus::InvalidArgument, "INVALID_REQUEST", message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) => CooperaStatus::Validation,
            Error::StageOrder { .. } => CooperaStatus::StageOrder,
            Error::Provider(_) => CooperaStatus::Provider,
            Error::Schema(_) => CooperaStatus::Schema,
            Error::Storage(_) => CooperaStatus::Storage,
            Error::NotFound(_) => CooperaStatus::NotFound,
            Error::Conflict { .. } => CooperaStatus::Conflict,
            Error::InvalidRequest(_) => CooperaStatus::InvalidArgument,
        };
        Failure::new(status, e.code(), e.to_string())
    }
}

fn cstring(text: &str) -> CString {
    CString::new(text.replace('\0', "\u{FFFD}")).expect("nul bytes replaced")
}

fn set_error(code: &str, message: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some((cstring(code), cstring(message))));
}

/// Run `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CooperaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CooperaStatus::Ok,
        Ok(Err(failure)) => {
            set_error(failure.code, &failure.message);
            failure.status
        }
        Err(_) => {
            set_error("INTERNAL", "panic inside the library");
            CooperaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CooperaStatus::InvalidUtf8, "INVALID_REQUEST", format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, value: &str) -> Result<(), Failure> {
    put(out, cstring(value).into_raw(), "out")
}

unsafe fn project_mut<'a>(p: *mut CooperaProject) -> Result<&'a mut ScriptProject, Failure> {
    p.as_mut().map(|p| &mut p.0).ok_or_else(|| Failure::null("project"))
}

unsafe fn project_ref<'a>(p: *const CooperaProject) -> Result<&'a ScriptProject, Failure> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| Failure::null("project"))
}

unsafe fn engine_ref<'a>(e: *const CooperaEngine) -> Result<&'a Engine, Failure> {
    e.as_ref().map(|e| &e.0).ok_or_else(|| Failure::null("engine"))
}

fn stage(index: u32) -> Result<Stage, Failure> {
    Stage::from_index(index as usize).ok_or_else(|| Failure::argument(format!("no stage with index {index}")))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn coopera_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn coopera_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |(_, m)| m.as_ptr()))
}

/// Engine error code (e.g. `STAGE_ORDER`) of the last failed call, or null.
#[no_mangle]
pub extern "C" fn coopera_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |(c, _)| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn coopera_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_new(
    id: *const c_char,
    title: *const c_char,
    logline: *const c_char,
    out: *mut *mut CooperaProject,
) -> CooperaStatus {
    guard(|| {
        let id = ProjectId(text(id, "id")?.to_string());
        if !id.is_well_formed() {
            return Err(Failure::argument(format!("malformed project id {:?}", id.0)));
        }
        let project = ScriptProject::new(id, text(title, "title")?, text(logline, "logline")?);
        put(out, Box::into_raw(Box::new(CooperaProject(project))), "out")
    })
}

/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_from_json(json: *const c_char, out: *mut *mut CooperaProject) -> CooperaStatus {
    guard(|| {
        let project = ScriptProject::from_json(text(json, "json")?)
            .map_err(|e| Failure::argument(format!("not a project document: {e}")))?;
        put(out, Box::into_raw(Box::new(CooperaProject(project))), "out")
    })
}

/// Canonical JSON of the project.
///
/// # Safety
/// `project` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_to_json(project: *const CooperaProject, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| put_string(out, &project_ref(project)?.to_canonical_json()))
}

/// # Safety
/// `project` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_screenplay(project: *const CooperaProject, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| put_string(out, &screenplay(project_ref(project)?)))
}

/// # Safety
/// `project` must be a live handle or null (null gives 0).
#[no_mangle]
pub unsafe extern "C" fn coopera_project_revision(project: *const CooperaProject) -> u64 {
    project.as_ref().map_or(0, |p| p.0.revision)
}

/// # Safety
/// `project` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_stage_state(
    project: *const CooperaProject,
    stage_index: u32,
    out: *mut CooperaStageState,
) -> CooperaStatus {
    guard(|| {
        let state = match project_ref(project)?.state(stage(stage_index)?) {
            StageState::Empty => CooperaStageState::Empty,
            StageState::Draft => CooperaStageState::Draft,
            StageState::Confirmed => CooperaStageState::Confirmed,
        };
        put(out, state, "out")
    })
}

/// JSON array of model invariant violations (empty when valid).
///
/// # Safety
/// `project` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_validate(project: *const CooperaProject, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| put_string(out, &canonical_json(&validate_project(project_ref(project)?).violations)))
}

/// JSON object mapping stage name to `fresh`, `stale` or `empty`.
///
/// # Safety
/// `project` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_staleness(project: *const CooperaProject, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| put_string(out, &canonical_json(&staleness(project_ref(project)?).stages)))
}

/// # Safety
/// `project` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn coopera_project_free(project: *mut CooperaProject) {
    if !project.is_null() {
        drop(Box::from_raw(project));
    }
}

/// Engine backed by the offline mock provider.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_engine_new_mock(out: *mut *mut CooperaEngine) -> CooperaStatus {
    guard(|| put(out, Box::into_raw(Box::new(CooperaEngine(Engine::mock()))), "out"))
}

/// Engine configured from `PROVIDER_*` variables, falling back to the mock.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_engine_from_env(force_mock: bool, out: *mut *mut CooperaEngine) -> CooperaStatus {
    guard(|| {
        let engine = Engine::from_env(force_mock)?;
        put(out, Box::into_raw(Box::new(CooperaEngine(engine))), "out")
    })
}

/// # Safety
/// `engine` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn coopera_engine_free(engine: *mut CooperaEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Generate a stage draft. On success the project is updated in place; on
/// failure it is unchanged.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn coopera_generate(
    engine: *const CooperaEngine,
    project: *mut CooperaProject,
    stage_index: u32,
    seed: u64,
) -> CooperaStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let project = project_mut(project)?;
        let options = GenerateOptions {
            seed,
            ..Default::default()
        };
        *project = engine.generate_stage(project, stage(stage_index)?, &options)?.project;
        Ok(())
    })
}

/// Confirm a stage's current draft, or replace it with `elements_json` (an
/// element array, or a JSON string for the logline) when that is not null.
///
/// # Safety
/// Handles must be live; `elements_json` is null or a valid string.
#[no_mangle]
pub unsafe extern "C" fn coopera_confirm(
    engine: *const CooperaEngine,
    project: *mut CooperaProject,
    stage_index: u32,
    elements_json: *const c_char,
) -> CooperaStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let project = project_mut(project)?;
        let stage = stage(stage_index)?;
        let payload = if elements_json.is_null() {
            None
        } else {
            Some(
                StageContent::from_snapshot(stage, text(elements_json, "elements_json")?)
                    .map_err(|e| Failure::argument(format!("elements do not fit {stage}: {e}")))?,
            )
        };
        *project = engine.confirm_stage(project, stage, payload)?;
        Ok(())
    })
}

/// Patch one element with a JSON object of field changes.
///
/// # Safety
/// Handles must be live; strings valid.
#[no_mangle]
pub unsafe extern "C" fn coopera_edit(
    engine: *const CooperaEngine,
    project: *mut CooperaProject,
    element_id: *const c_char,
    patch_json: *const c_char,
    expected_revision: u64,
) -> CooperaStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let project = project_mut(project)?;
        let id = ElementId::from(text(element_id, "element_id")?);
        let patch: serde_json::Map<String, Value> = serde_json::from_str(text(patch_json, "patch_json")?)
            .map_err(|e| Failure::argument(format!("patch must be a JSON object: {e}")))?;
        *project = engine.edit_element(project, &id, &patch, expected_revision)?;
        Ok(())
    })
}

/// Regenerate and confirm `from` and every later stage. Stages finished
/// before a failure are kept in the project.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn coopera_cascade(
    engine: *const CooperaEngine,
    project: *mut CooperaProject,
    from_stage: u32,
    seed: u64,
) -> CooperaStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let project = project_mut(project)?;
        let options = GenerateOptions {
            seed,
            ..Default::default()
        };
        match engine.regenerate_cascade(project, stage(from_stage)?, &options) {
            Ok(done) => {
                *project = done;
                Ok(())
            }
            Err(failure) => {
                *project = failure.project;
                Err(failure.error.into())
            }
        }
    })
}

/// Diff report (JSON) between a stage's last generation and its current text.
///
/// # Safety
/// `project` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_diff_report(
    project: *const CooperaProject,
    stage_index: u32,
    out: *mut *mut c_char,
) -> CooperaStatus {
    guard(|| {
        let report = analytics::project_diff_report(project_ref(project)?, stage(stage_index)?)?;
        put_string(out, &canonical_json(&report))
    })
}

/// Character-level Levenshtein distance and the distance over the longer length.
///
/// # Safety
/// Strings valid; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_edit_distance(
    a: *const c_char,
    b: *const c_char,
    out_distance: *mut usize,
    out_normalized: *mut f64,
) -> CooperaStatus {
    guard(|| {
        let (d, n) = analytics::edit_distance(text(a, "a")?, text(b, "b")?);
        put(out_distance, d, "out_distance")?;
        put(out_normalized, n, "out_normalized")
    })
}

/// Deleted and inserted character counts of a minimal alignment.
///
/// # Safety
/// Strings valid; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_diff_lengths(
    original: *const c_char,
    revised: *const c_char,
    out_deleted: *mut usize,
    out_inserted: *mut usize,
) -> CooperaStatus {
    guard(|| {
        let (d, i) = analytics::diff_lengths(text(original, "original")?, text(revised, "revised")?);
        put(out_deleted, d, "out_deleted")?;
        put(out_inserted, i, "out_inserted")
    })
}

/// # Safety
/// Strings valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_jaccard(a: *const c_char, b: *const c_char, out: *mut f64) -> CooperaStatus {
    guard(|| put(out, analytics::jaccard(text(a, "a")?, text(b, "b")?), "out"))
}

/// Score questionnaires. Input is `{"responses": [{"respondent_id", "raw"}]}`
/// or `{"adjusted_item_means": [ten numbers]}`; output is the report JSON.
///
/// # Safety
/// `input_json` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_sus_score_json(input_json: *const c_char, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| {
        let input: Value = serde_json::from_str(text(input_json, "input_json")?)
            .map_err(|e| Failure::argument(format!("input is not JSON: {e}")))?;
        let report = if let Some(rows) = input.get("responses").and_then(Value::as_array) {
            let mut responses = Vec::with_capacity(rows.len());
            for row in rows {
                let id = row.get("respondent_id").and_then(Value::as_str).unwrap_or_default();
                let raw: Vec<i64> = serde_json::from_value(row.get("raw").cloned().unwrap_or(Value::Null))
                    .map_err(|e| Failure::argument(format!("raw answers: {e}")))?;
                responses.push(SusResponse::new(id, &raw)?);
            }
            analytics::sus_score(&responses)?
        } else if let Some(means) = input.get("adjusted_item_means") {
            let means: [f64; 10] = serde_json::from_value(means.clone())
                .map_err(|e| Failure::argument(format!("adjusted_item_means needs ten numbers: {e}")))?;
            analytics::from_adjusted_item_means(means)
        } else {
            return Err(Failure::argument("give responses or adjusted_item_means"));
        };
        put_string(out, &canonical_json(&report))
    })
}

/// Screenplay of the offline demo for `seed`.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coopera_demo(seed: u64, out: *mut *mut c_char) -> CooperaStatus {
    guard(|| put_string(out, &screenplay(&coopera::cli::demo_project(seed)?)))
}
