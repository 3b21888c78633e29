//! Report assembly for the three subcommands.

use std::str::FromStr;

use clap::ValueEnum;
use msbell::bellineq::{Family, InequalitySpec};
use msbell::criteria::{self, CriterionId, CriterionResult, Method, Options};
use msbell::{compute_tensor, CriterionFrames, Error, StateSpec};
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Generalized GHZ angle alpha.
    Ghz,
    /// Number of qubits of the W state.
    W,
    /// White-noise visibility of `--state`.
    Noise,
}

/// A criterion as selected on the command line; `c442a` is the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionChoice {
    Id(CriterionId),
    C442Analytic,
}

impl FromStr for CriterionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "c442a" => Ok(CriterionChoice::C442Analytic),
            other => other.parse().map(CriterionChoice::Id),
        }
    }
}

impl CriterionChoice {
    fn evaluate(&self, t: &msbell::CorrelationTensor, opts: &Options) -> Result<CriterionResult, Error> {
        match self {
            CriterionChoice::Id(id) => criteria::evaluate(*id, t, opts),
            CriterionChoice::C442Analytic => criteria::condition_442_analytic(t),
        }
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round12(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report is serializable");
    round_numbers(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("json value");
    text.push('\n');
    text
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn num(x: f64) -> String {
    round12(x).to_string()
}

#[derive(Serialize)]
struct ReportRow {
    state_spec: String,
    criterion_id: CriterionId,
    max_value: f64,
    violation_factor: f64,
    threshold: f64,
    method: Method,
    restarts_used: usize,
    spread: f64,
    converged: bool,
    frames: CriterionFrames,
}

impl ReportRow {
    fn new(state_spec: String, r: CriterionResult) -> Self {
        Self {
            state_spec,
            criterion_id: r.criterion_id,
            max_value: r.max_value,
            violation_factor: r.violation_factor,
            threshold: r.threshold,
            method: r.method,
            restarts_used: r.restarts_used,
            spread: r.spread,
            converged: r.converged,
            frames: r.frames,
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.state_spec.clone(),
            self.criterion_id.to_string(),
            num(self.max_value),
            num(self.violation_factor),
            num(self.threshold),
            method_name(self.method).to_string(),
        ]
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Analytic => "analytic",
        Method::Numeric => "numeric",
    }
}

const ROW_HEADER: [&str; 6] = ["state_spec", "criterion_id", "max_value", "violation_factor", "threshold", "method"];

#[derive(Serialize)]
struct AnalyzeReport {
    state_spec: String,
    n_qubits: usize,
    seed: u64,
    restarts: usize,
    results: Vec<ReportRow>,
}

fn rows_for(spec: &StateSpec, choices: &[CriterionChoice], opts: &Options) -> Result<Vec<ReportRow>, Error> {
    let t = compute_tensor(&spec.build()?)?;
    choices
        .iter()
        .map(|c| Ok(ReportRow::new(spec.to_string(), c.evaluate(&t, opts)?)))
        .collect()
}

pub fn analyze(state: &str, choices: &[CriterionChoice], opts: &Options, format: Format) -> Result<String, Error> {
    let spec: StateSpec = state.parse()?;
    let results = rows_for(&spec, choices, opts)?;
    Ok(match format {
        Format::Json => to_json(&AnalyzeReport {
            state_spec: spec.to_string(),
            n_qubits: spec.n_qubits(),
            seed: opts.seed,
            restarts: opts.restarts,
            results,
        }),
        Format::Csv => csv_text(&ROW_HEADER, results.iter().map(ReportRow::csv_fields).collect()),
    })
}

pub struct SweepGrid {
    pub kind: SweepKind,
    pub inner: Option<String>,
    pub n: Option<usize>,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl SweepGrid {
    fn params(&self) -> Vec<f64> {
        if !(self.from <= self.to) {
            return vec![];
        }
        match self.kind {
            SweepKind::W => {
                let (lo, hi) = (self.from.ceil() as i64, self.to.floor() as i64);
                (lo..=hi).map(|k| k as f64).collect()
            }
            _ => match self.points {
                0 => vec![],
                1 => vec![self.from],
                p => (0..p)
                    .map(|k| self.from + (self.to - self.from) * k as f64 / (p - 1) as f64)
                    .collect(),
            },
        }
    }

    fn states(&self) -> Result<Vec<(f64, StateSpec)>, Error> {
        let inner = match (self.kind, &self.inner) {
            (SweepKind::Noise, Some(s)) => Some(s.parse::<StateSpec>()?),
            (SweepKind::Noise, None) => {
                return Err(Error::Parse { spec: String::new(), reason: "a noise sweep needs --state".into() })
            }
            _ => None,
        };
        self.params()
            .into_iter()
            .map(|p| {
                let spec = match self.kind {
                    SweepKind::Ghz => StateSpec::Ghz { n: self.n.unwrap_or(3), alpha: p },
                    SweepKind::W => {
                        if p < 0.0 {
                            return Err(Error::Domain(format!("W state size {p} is negative")));
                        }
                        StateSpec::W { n: p as usize }
                    }
                    SweepKind::Noise => StateSpec::Noise {
                        v: p,
                        inner: Box::new(inner.clone().expect("checked above")),
                    },
                };
                Ok((p, spec))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct SweepRow {
    param: f64,
    state_spec: String,
    criterion_id: CriterionId,
    max_value: f64,
    violation_factor: f64,
    threshold: f64,
    method: Method,
}

#[derive(Serialize)]
struct SweepReport {
    sweep: &'static str,
    seed: u64,
    restarts: usize,
    rows: Vec<SweepRow>,
}

pub fn sweep(grid: &SweepGrid, choices: &[CriterionChoice], opts: &Options, format: Format) -> Result<String, Error> {
    let mut rows = Vec::new();
    for (param, spec) in grid.states()? {
        for r in rows_for(&spec, choices, opts)? {
            rows.push(SweepRow {
                param,
                state_spec: r.state_spec,
                criterion_id: r.criterion_id,
                max_value: r.max_value,
                violation_factor: r.violation_factor,
                threshold: r.threshold,
                method: r.method,
            });
        }
    }
    Ok(match format {
        Format::Json => to_json(&SweepReport {
            sweep: match grid.kind {
                SweepKind::Ghz => "ghz",
                SweepKind::W => "w",
                SweepKind::Noise => "noise",
            },
            seed: opts.seed,
            restarts: opts.restarts,
            rows,
        }),
        Format::Csv => csv_text(
            &["param", "state_spec", "criterion_id", "max_value", "violation_factor", "threshold"],
            rows.iter()
                .map(|r| {
                    vec![
                        num(r.param),
                        r.state_spec.clone(),
                        r.criterion_id.to_string(),
                        num(r.max_value),
                        num(r.violation_factor),
                        num(r.threshold),
                    ]
                })
                .collect(),
        ),
    })
}

#[derive(Serialize)]
struct BoundReport {
    family: Family,
    n_parties: usize,
    settings_per_party: Vec<usize>,
    classical_bound: f64,
}

pub fn bound(family: Family, n: usize, format: Format) -> Result<String, Error> {
    let spec = InequalitySpec::for_family(family, n)?;
    let value = msbell::lhv::classical_bound(&spec)?;
    let report = BoundReport {
        family,
        n_parties: spec.n_parties,
        settings_per_party: spec.settings_per_party,
        classical_bound: value,
    };
    Ok(match format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(
            &["family", "n_parties", "classical_bound"],
            vec![vec![family.to_string(), report.n_parties.to_string(), num(value)]],
        ),
    })
}
