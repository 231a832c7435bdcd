//! Command-line driver. `main.rs` only forwards to [`main_with`], so the
//! whole command surface can be exercised in-process.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::agents::{GenerateOptions, MockProvider, TutorSession};
use crate::analytics;
use crate::clock::LogicalClock;
use crate::error::{Error, Result};
use crate::model::{
    render_stage_text, screenplay, validate_project, ElementId, ProjectId, ScriptProject, Stage,
    StageContent,
};
use crate::pipeline::{staleness, Engine};
use crate::store::{Store, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "coopera", version, about = "Staged human-AI playwriting engine")]
pub struct Cli {
    /// Use the offline mock provider even if PROVIDER_API_KEY is set.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Project directory.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Json,
    Screenplay,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project from a logline draft and print its id.
    New {
        #[arg(long)]
        logline: String,
        #[arg(long, default_value = "Untitled")]
        title: String,
    },
    /// Run the functional agent for a stage; the result is a draft.
    Generate {
        #[arg(long)]
        project: String,
        #[arg(long)]
        stage: Stage,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        count: Option<u32>,
        #[arg(long)]
        style: Option<String>,
    },
    /// Confirm a stage, optionally replacing its content from a JSON file.
    Confirm {
        #[arg(long)]
        project: String,
        #[arg(long)]
        stage: Stage,
        /// JSON file with the element array (or a string for the logline).
        #[arg(long)]
        payload: Option<PathBuf>,
        #[arg(long)]
        expected_revision: Option<u64>,
    },
    /// Regenerate and confirm a stage and everything after it.
    Cascade {
        #[arg(long)]
        project: String,
        #[arg(long)]
        from: Stage,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Patch one element with a JSON object of field changes.
    Edit {
        #[arg(long)]
        project: String,
        #[arg(long)]
        element: String,
        #[arg(long)]
        patch: String,
        #[arg(long)]
        expected_revision: u64,
    },
    /// Print the project as canonical JSON or as a screenplay.
    Export {
        #[arg(long)]
        project: String,
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
    },
    /// Compare a stage's last generated version with its current text.
    Diff {
        #[arg(long)]
        project: String,
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        json: bool,
    },
    /// Per-stage freshness.
    Staleness {
        #[arg(long)]
        project: String,
    },
    /// List model invariant violations; exits 2 if there are any.
    Validate {
        #[arg(long)]
        project: String,
    },
    /// Ask a stage tutor one question (the transcript is not kept).
    Tutor {
        #[arg(long)]
        project: String,
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        message: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a questionnaire CSV with columns id,Q1..Q10.
    Sus {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run all five stages offline with the mock provider and print the screenplay.
    Demo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Seconds a generation may take before the request returns 202.
        #[arg(long, default_value_t = 10)]
        job_threshold: u64,
    },
}

pub const DEMO_LOGLINES: &[(&str, &str)] = &[
    ("The Diary", "A shy student discovers an old diary that reveals a secret about the school's founder."),
    ("The Last Bus", "Two rival classmates stranded after the last bus must cross the city together before dawn."),
    ("Garden Wars", "Neighbours fighting over a community garden are forced to cooperate when a storm hits."),
    ("The Science Fair", "A student tempted to copy a winning project must choose between a prize and a friendship."),
    ("Grandmother's Recipe", "A boy recreating his late grandmother's recipe uncovers the story of her journey."),
];

/// Build the demo project: every stage generated by the mock provider and
/// confirmed, with a logical clock so the output depends only on `seed`.
pub fn demo_project(seed: u64) -> Result<ScriptProject> {
    let engine = Engine::new(Arc::new(MockProvider::new()), Arc::new(LogicalClock::default()));
    let (title, logline) = DEMO_LOGLINES[(seed % DEMO_LOGLINES.len() as u64) as usize];
    let project = ScriptProject::new(ProjectId(format!("demo-{seed}")), title, logline);
    let project = engine.confirm_stage(&project, Stage::Logline, None)?;
    let options = GenerateOptions {
        seed,
        ..Default::default()
    };
    let project = engine
        .regenerate_cascade(&project, Stage::Characters, &options)
        .map_err(|f| f.error)?;
    let report = validate_project(&project);
    if !report.is_empty() {
        return Err(Error::Validation(report));
    }
    Ok(project)
}

fn read_payload(stage: Stage, path: &PathBuf) -> Result<StageContent> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidRequest(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidRequest(format!("{} is not JSON: {e}", path.display())))?;
    let elements = match value {
        Value::Object(mut o) if o.contains_key("elements") => o.remove("elements").unwrap_or(Value::Null),
        Value::Object(mut o) if stage == Stage::Logline && o.contains_key("text") => {
            o.remove("text").unwrap_or(Value::Null)
        }
        other => other,
    };
    serde_json::from_value(serde_json::json!({ "stage": stage, "elements": elements }))
        .map_err(|e| Error::InvalidRequest(format!("payload does not fit {stage}: {e}")))
}

fn engine(cli: &Cli) -> Result<Engine> {
    Engine::from_env(cli.mock)
}

fn write(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::InvalidRequest(format!("cannot write output: {e}")))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let open_store = || Store::open(&cli.data_dir);
    let pid = |s: &str| ProjectId(s.to_string());
    match &cli.command {
        Command::New { logline, title } => {
            let store = open_store()?;
            let project = ScriptProject::new(ProjectId::random(), title.clone(), logline.clone());
            store.save(&project)?;
            write(out, &format!("{}\n", project.id))
        }
        Command::Generate {
            project,
            stage,
            seed,
            count,
            style,
        } => {
            let store = open_store()?;
            let current = store.load(&pid(project))?;
            let options = GenerateOptions {
                seed: *seed,
                count_hint: *count,
                style_notes: style.clone(),
            };
            let generated = engine(&cli)?.generate_stage(&current, *stage, &options)?;
            store.save(&generated.project)?;
            write(
                out,
                &format!(
                    "{stage}: {} element(s) drafted in {} attempt(s), revision {}\n\n{}\n",
                    generated.outcome.elements.len(),
                    generated.outcome.attempts,
                    generated.project.revision,
                    render_stage_text(&generated.outcome.elements, &generated.project)
                ),
            )
        }
        Command::Confirm {
            project,
            stage,
            payload,
            expected_revision,
        } => {
            let store = open_store()?;
            let current = store.load(&pid(project))?;
            if let Some(expected) = expected_revision {
                crate::pipeline::check_revision(&current, *expected)?;
            }
            let payload = payload.as_ref().map(|p| read_payload(*stage, p)).transpose()?;
            let next = engine(&cli)?.confirm_stage(&current, *stage, payload)?;
            store.save(&next)?;
            write(out, &format!("{stage} confirmed, revision {}\n", next.revision))
        }
        Command::Cascade { project, from, seed } => {
            let store = open_store()?;
            let current = store.load(&pid(project))?;
            let options = GenerateOptions {
                seed: *seed,
                ..Default::default()
            };
            match engine(&cli)?.regenerate_cascade(&current, *from, &options) {
                Ok(next) => {
                    store.save(&next)?;
                    write(out, &format!("cascade from {from} done, revision {}\n", next.revision))
                }
                Err(failure) => {
                    if failure.project.revision != current.revision {
                        store.save(&failure.project)?;
                    }
                    Err(failure.error)
                }
            }
        }
        Command::Edit {
            project,
            element,
            patch,
            expected_revision,
        } => {
            let store = open_store()?;
            let current = store.load(&pid(project))?;
            let patch: Map<String, Value> = serde_json::from_str(patch)
                .map_err(|e| Error::InvalidRequest(format!("patch must be a JSON object: {e}")))?;
            let next = engine(&cli)?.edit_element(
                &current,
                &ElementId::from(element.as_str()),
                &patch,
                *expected_revision,
            )?;
            store.save(&next)?;
            write(out, &format!("{element} updated, revision {}\n", next.revision))
        }
        Command::Export { project, format } => {
            let project = open_store()?.load(&pid(project))?;
            match format {
                ExportFormat::Json => write(out, &project.to_canonical_json()),
                ExportFormat::Screenplay => write(out, &screenplay(&project)),
            }
        }
        Command::Diff { project, stage, json } => {
            let project = open_store()?.load(&pid(project))?;
            let report = analytics::project_diff_report(&project, *stage)?;
            if *json {
                write(out, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializes")))
            } else {
                write(out, &report.to_table())
            }
        }
        Command::Staleness { project } => {
            let project = open_store()?.load(&pid(project))?;
            let mut text = String::new();
            for (stage, freshness) in staleness(&project).stages {
                text.push_str(&format!("{stage:<10} {}\n", serde_json::to_value(freshness).expect("serializes").as_str().unwrap_or("")));
            }
            write(out, &text)
        }
        Command::Validate { project } => {
            let project = open_store()?.load(&pid(project))?;
            let report = validate_project(&project);
            if report.is_empty() {
                write(out, "no violations\n")
            } else {
                Err(Error::Validation(report))
            }
        }
        Command::Tutor {
            project,
            stage,
            message,
            seed,
        } => {
            let project = open_store()?.load(&pid(project))?;
            let session = TutorSession::new(project.id.clone(), *stage);
            let (reply, _) = engine(&cli)?.tutor_reply(&session, message, &project, *seed)?;
            write(out, &format!("{reply}\n"))
        }
        Command::Sus { csv, json } => {
            let file = std::fs::File::open(csv)
                .map_err(|e| Error::InvalidRequest(format!("cannot read {}: {e}", csv.display())))?;
            let report = analytics::sus_score(&analytics::parse_csv(file)?)?;
            if *json {
                write(out, &format!("{}\n", serde_json::to_string_pretty(&report).expect("serializes")))
            } else {
                write(out, &report.to_table())
            }
        }
        Command::Demo { seed } => write(out, &screenplay(&demo_project(*seed)?)),
        Command::Serve { bind, job_threshold } => {
            let state = crate::api::AppState::with_job_threshold(
                engine(&cli)?,
                open_store()?,
                Duration::from_secs(*job_threshold),
            );
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| Error::InvalidRequest(format!("cannot start runtime: {e}")))?;
            runtime
                .block_on(crate::api::serve(*bind, state))
                .map_err(|e| Error::InvalidRequest(format!("cannot serve on {bind}: {e}")))
        }
    }
}

/// Parse arguments, run, and return the process exit code. Errors go to
/// `err` as `error[CODE]: message`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
