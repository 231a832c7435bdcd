//! System Usability Scale scoring.
//!
//! Odd items are positively worded and score `raw - 1`; even items are
//! negatively worded and score `5 - raw`. A respondent's composite is
//! 2.5 times the sum of adjusted items, giving 0..=100.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElementId, ValidationReport, Violation, ViolationCode};

pub const ITEMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SusResponse {
    pub respondent_id: String,
    pub raw: [u8; ITEMS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subscale {
    Willingness,
    Usable,
    FunctionalCohesion,
    Learnable,
    CognitiveEfficiency,
}

impl Subscale {
    pub const ALL: [Subscale; 5] = [
        Subscale::Willingness,
        Subscale::Usable,
        Subscale::FunctionalCohesion,
        Subscale::Learnable,
        Subscale::CognitiveEfficiency,
    ];

    /// Zero-based item indices (Q1 is 0).
    pub fn items(self) -> [usize; 2] {
        let first = 2 * self as usize;
        [first, first + 1]
    }

    pub fn label(self) -> &'static str {
        match self {
            Subscale::Willingness => "Willingness",
            Subscale::Usable => "Usable",
            Subscale::FunctionalCohesion => "Functional Cohesion",
            Subscale::Learnable => "Learnable",
            Subscale::CognitiveEfficiency => "Cognitive Efficiency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusReport {
    pub respondents: usize,
    pub per_item_adjusted_means: Vec<f64>,
    pub subscale_means: BTreeMap<Subscale, f64>,
    pub composite_mean: f64,
    /// Sample standard deviation of respondent composites; absent when the
    /// report was built from item means alone.
    pub composite_sd: Option<f64>,
}

fn violation(code: ViolationCode, id: &str, message: String) -> Violation {
    Violation {
        code,
        stage: None,
        element_id: Some(ElementId::from(id)),
        message,
    }
}

impl SusResponse {
    /// Check the answer count and range.
    pub fn new(respondent_id: impl Into<String>, answers: &[i64]) -> Result<Self> {
        let respondent_id = respondent_id.into();
        let mut report = ValidationReport::default();
        if answers.len() != ITEMS {
            report.violations.push(violation(
                ViolationCode::SusWrongCount,
                &respondent_id,
                format!("expected {ITEMS} answers, got {}", answers.len()),
            ));
        }
        for (i, a) in answers.iter().enumerate() {
            if !(1..=5).contains(a) {
                report.violations.push(violation(
                    ViolationCode::SusOutOfRange,
                    &respondent_id,
                    format!("Q{} = {a} is outside 1..=5", i + 1),
                ));
            }
        }
        if !report.is_empty() {
            return Err(Error::Validation(report));
        }
        let mut raw = [0u8; ITEMS];
        for (slot, a) in raw.iter_mut().zip(answers) {
            *slot = *a as u8;
        }
        Ok(SusResponse { respondent_id, raw })
    }

    pub fn adjusted(&self) -> [f64; ITEMS] {
        let mut out = [0.0; ITEMS];
        for (i, raw) in self.raw.iter().enumerate() {
            let raw = f64::from(*raw);
            // index 0 is Q1, a positively worded item
            out[i] = if i % 2 == 0 { raw - 1.0 } else { 5.0 - raw };
        }
        out
    }

    pub fn composite(&self) -> f64 {
        2.5 * self.adjusted().iter().sum::<f64>()
    }
}

fn subscale_means(item_means: &[f64]) -> BTreeMap<Subscale, f64> {
    Subscale::ALL
        .iter()
        .map(|s| {
            let [a, b] = s.items();
            (*s, (item_means[a] + item_means[b]) / 2.0)
        })
        .collect()
}

pub fn sus_score(responses: &[SusResponse]) -> Result<SusReport> {
    if responses.is_empty() {
        return Err(Error::InvalidRequest("no questionnaire responses".into()));
    }
    let mut report = ValidationReport::default();
    for r in responses {
        for (i, a) in r.raw.iter().enumerate() {
            if !(1..=5).contains(a) {
                report.violations.push(violation(
                    ViolationCode::SusOutOfRange,
                    &r.respondent_id,
                    format!("Q{} = {a} is outside 1..=5", i + 1),
                ));
            }
        }
    }
    if !report.is_empty() {
        return Err(Error::Validation(report));
    }
    let n = responses.len() as f64;
    let mut item_means = vec![0.0; ITEMS];
    for r in responses {
        for (m, a) in item_means.iter_mut().zip(r.adjusted()) {
            *m += a;
        }
    }
    for m in &mut item_means {
        *m /= n;
    }
    let composites: Vec<f64> = responses.iter().map(SusResponse::composite).collect();
    let mean = composites.iter().sum::<f64>() / n;
    let sd = if responses.len() < 2 {
        0.0
    } else {
        (composites.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(SusReport {
        respondents: responses.len(),
        subscale_means: subscale_means(&item_means),
        per_item_adjusted_means: item_means,
        composite_mean: mean,
        composite_sd: Some(sd),
    })
}

/// Report built from already adjusted item means (no respondent data).
pub fn from_adjusted_item_means(means: [f64; ITEMS]) -> SusReport {
    SusReport {
        respondents: 0,
        subscale_means: subscale_means(&means),
        composite_mean: 2.5 * means.iter().sum::<f64>(),
        per_item_adjusted_means: means.to_vec(),
        composite_sd: None,
    }
}

/// Round half away from zero to two decimals, judged on the exact value
/// the float holds: 3.295 is stored just below 3.295 and becomes 3.29, while
/// 3.125 is exact and becomes 3.13. (`(x * 100.0).round()` would see 329.5.)
pub fn round2(x: f64) -> f64 {
    if !x.is_finite() || x.abs() >= 1e15 {
        return x;
    }
    // enough digits to print any f64 exactly
    let exact = format!("{:.1100}", x.abs());
    let (whole, frac) = exact.split_once('.').unwrap_or((&exact, ""));
    let digits = |range: std::ops::Range<usize>| frac.get(range).unwrap_or("0");
    let mut cents: u64 = whole.parse::<u64>().unwrap_or(0) * 100 + digits(0..2).parse::<u64>().unwrap_or(0);
    if digits(2..3) >= "5" {
        cents += 1;
    }
    (cents as f64 / 100.0).copysign(x)
}

/// Read `id,Q1,...,Q10` rows. The header row is required; column names are
/// matched case-insensitively and may appear in any order.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<SusResponse>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidRequest(format!("unreadable csv header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = find("id").or_else(|| find("respondent_id"));
    let item_cols: Vec<Option<usize>> = (1..=ITEMS).map(|q| find(&format!("q{q}"))).collect();
    if item_cols.iter().any(Option::is_none) {
        return Err(Error::InvalidRequest("csv header must name columns Q1..Q10".into()));
    }
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidRequest(format!("csv row {}: {e}", row + 1)))?;
        let id = id_col
            .and_then(|c| record.get(c))
            .map_or_else(|| format!("r{}", row + 1), str::to_string);
        let mut answers = Vec::with_capacity(ITEMS);
        for col in item_cols.iter().flatten() {
            if let Some(v) = record.get(*col).filter(|v| !v.is_empty()) {
                answers.push(v.parse::<i64>().map_err(|_| {
                    Error::InvalidRequest(format!("respondent {id}: `{v}` is not an integer"))
                })?);
            }
        }
        out.push(SusResponse::new(id, &answers)?);
    }
    Ok(out)
}

impl SusReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<21} {}\n", "respondents", self.respondents));
        for (i, m) in self.per_item_adjusted_means.iter().enumerate() {
            out.push_str(&format!("{:<21} {:.2}\n", format!("Q{}", i + 1), m));
        }
        for (s, m) in &self.subscale_means {
            out.push_str(&format!("{:<21} {:.2}\n", s.label(), round2(*m)));
        }
        out.push_str(&format!("{:<21} {:.3}\n", "composite mean", self.composite_mean));
        if let Some(sd) = self.composite_sd {
            out.push_str(&format!("{:<21} {sd:.2}\n", "composite sd"));
        }
        out
    }
}
