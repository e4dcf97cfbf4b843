//! Run reports and their CSV/JSON forms.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use maxlab_core::checks::{CoherenceRow, LambdaSearchResult, RefinementPoint};
use maxlab_core::ext_float::format_f64;
use maxlab_core::{CheckReport, ConstantEstimate, Status};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};

pub const CSV_HEADER: [&str; 10] = [
    "check",
    "anchor",
    "status",
    "worst_violation",
    "witness",
    "param_p",
    "param_delta",
    "param_lambda",
    "N",
    "L",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Check(CheckReport),
    Estimate(ConstantEstimate),
    LambdaSearch(LambdaSearchResult),
    Coherence(Box<CoherenceRow>),
    /// A requested item that could not be evaluated (size or parameter
    /// error). Counts as a failure.
    Error {
        name: String,
        message: String,
    },
}

impl Item {
    pub fn name(&self) -> String {
        match self {
            Item::Check(c) => c.check.clone(),
            Item::Estimate(e) => e.estimator.clone(),
            Item::LambdaSearch(_) => "search_lambda0".into(),
            Item::Coherence(r) => format!("coherence[{}]", r.weight),
            Item::Error { name, .. } => name.clone(),
        }
    }

    /// True for a pass-mode failure or an evaluation error.
    pub fn is_failure(&self) -> bool {
        match self {
            Item::Check(c) => c.assertive && c.status == Status::Fail,
            Item::Estimate(_) => false,
            Item::LambdaSearch(s) => s.to_report().is_fail(),
            Item::Coherence(r) => r.to_report().is_fail(),
            Item::Error { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<RefinementPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub item: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: ExperimentConfig,
    pub items: Vec<Item>,
    pub plots: Vec<PlotSeries>,
    pub timing: Vec<Timing>,
    pub status: Status,
}

impl RunReport {
    pub fn new(command: &str, config: ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            config,
            items: Vec::new(),
            plots: Vec::new(),
            timing: Vec::new(),
            status: Status::Pass,
        }
    }

    /// Overall status: fail iff any pass-mode item failed.
    pub fn finish(&mut self) {
        self.status = if self.items.iter().any(Item::is_failure) {
            Status::Fail
        } else {
            Status::Pass
        };
    }

    /// CSV rows in item order (timing is deliberately excluded so that
    /// bodies are reproducible).
    pub fn csv_rows(&self) -> Vec<[String; 10]> {
        let mut rows = Vec::new();
        for item in &self.items {
            match item {
                Item::Check(c) => rows.push(check_row(c)),
                Item::Estimate(e) => rows.push(estimate_row(e)),
                Item::LambdaSearch(s) => rows.push(check_row(&s.to_report())),
                Item::Coherence(r) => {
                    rows.push(check_row(&r.to_report()));
                    for sub in [&r.ap_stability, &r.cp_stability, &r.doubling_step] {
                        let mut sub = sub.clone();
                        sub.check = format!("coherence.{}", sub.check);
                        rows.push(check_row(&sub));
                    }
                    let mut s = r.search.to_report();
                    s.check = "coherence.search_lambda0".into();
                    rows.push(check_row(&s));
                    for e in r.ap.iter().chain(&r.cp).chain(std::iter::once(&r.doubling)) {
                        rows.push(estimate_row(e));
                    }
                }
                Item::Error { name, message } => rows.push([
                    name.clone(),
                    String::new(),
                    "error".into(),
                    String::new(),
                    message.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]),
            }
        }
        rows
    }

    pub fn to_csv(&self) -> io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for row in self.csv_rows() {
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| io::Error::other(e.to_string()))?;
        String::from_utf8(bytes).map_err(io::Error::other)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn check_row(c: &CheckReport) -> [String; 10] {
    let mut witness = c
        .witness
        .as_ref()
        .map(|w| w.to_string())
        .unwrap_or_default();
    if let Some(v) = c.recorded {
        witness = if witness.is_empty() {
            format!("value={}", format_f64(v))
        } else {
            format!("value={};{witness}", format_f64(v))
        };
    }
    [
        c.check.clone(),
        c.anchor.clone(),
        c.status.to_string(),
        if c.assertive {
            format_f64(c.worst_violation)
        } else {
            String::new()
        },
        witness,
        opt(c.params.p),
        opt(c.params.delta),
        opt(c.params.lambda),
        c.cells.to_string(),
        format_f64(c.radius),
    ]
}

fn estimator_anchor(name: &str) -> &'static str {
    match name {
        "ap_constant" => "sup_Q avg_Q(w) avg_Q(sigma)^(p-1)",
        "am_functional" => "sup_Q avg_Q(w)^(1/p) avg_Q(sigma)^(1/p')",
        "ainfty_estimate" => "sup w(E)/w(Q) over (|E|/|Q|)^delta",
        "cp_estimate" => "sup w(E) over (|E|/|Q|)^delta int (M chi_Q)^p w",
        "doubling_constant" => "sup_Q w(2Q)/w(Q)",
        "np_integral" => "int w/(1+|x|)^(np)",
        _ => "",
    }
}

fn estimate_row(e: &ConstantEstimate) -> [String; 10] {
    let mut witness = format!("value={}", format_f64(e.value));
    if let Some(q) = e.witness {
        witness.push_str(&format!(";Q={q}"));
    }
    if let Some(s) = &e.witness_set {
        witness.push_str(&format!(";|E|={}", s.len()));
    }
    [
        e.estimator.clone(),
        estimator_anchor(&e.estimator).into(),
        Status::Pass.to_string(),
        String::new(),
        witness,
        opt(e.p),
        opt(e.delta),
        String::new(),
        e.cells.to_string(),
        format_f64(e.radius),
    ]
}

/// Writes `report.csv` or `report.json` into `dir`, plus one `N,value`
/// CSV per plot series. Returns the paths written.
pub fn emit_report(report: &RunReport, dir: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let main = match format {
        Format::Csv => {
            let p = dir.join("report.csv");
            fs::write(&p, report.to_csv()?)?;
            p
        }
        Format::Json => {
            let p = dir.join("report.json");
            fs::write(&p, report.to_json().map_err(io::Error::other)?)?;
            p
        }
    };
    written.push(main);
    for series in &report.plots {
        let p = dir.join(format!("plot_{}.csv", series.name));
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["N", "value"])?;
        for pt in &series.points {
            w.write_record([pt.cells.to_string(), format_f64(pt.value)])?;
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}
