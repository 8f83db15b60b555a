use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bench::{mean, sample_std};
use crate::error::{Error, Result};

/// Outcome of one (design, scheme) run as stored in `cells.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub design: String,
    pub scheme: String,
    pub scheme_spec: String,
    pub overhead_evals: Option<u64>,
    pub initial_db: Option<f64>,
    pub final_db: Option<f64>,
    pub evaluations: usize,
    pub jacobian_builds: Option<usize>,
    pub accepted: Option<usize>,
    pub termination: Option<String>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.final_db.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeColumn {
    pub label: String,
    pub spec: String,
    pub overhead_evals: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeAggregate {
    pub label: String,
    pub mean_db: Option<f64>,
    pub std_db: Option<f64>,
    pub mean_evals: Option<f64>,
    pub std_evals: Option<f64>,
    pub included: usize,
    pub excluded: usize,
    pub overhead_evals: Option<u64>,
}

/// Cells laid out as designs × schemes, in plan order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub designs: Vec<String>,
    pub schemes: Vec<SchemeColumn>,
    pub cells: Vec<CellRecord>,
}

pub const CELLS_HEADER: [&str; 11] = [
    "design",
    "scheme",
    "scheme_spec",
    "overhead_evals",
    "initial_db",
    "final_db",
    "evaluations",
    "jacobian_builds",
    "accepted",
    "termination",
    "error",
];

impl SweepTable {
    /// Rows and columns follow the order of first appearance.
    pub fn from_cells(cells: Vec<CellRecord>) -> Self {
        let mut designs: Vec<String> = Vec::new();
        let mut schemes: Vec<SchemeColumn> = Vec::new();
        for c in &cells {
            if !designs.contains(&c.design) {
                designs.push(c.design.clone());
            }
            if !schemes.iter().any(|s| s.label == c.scheme) {
                schemes.push(SchemeColumn {
                    label: c.scheme.clone(),
                    spec: c.scheme_spec.clone(),
                    overhead_evals: c.overhead_evals,
                });
            }
        }
        Self {
            designs,
            schemes,
            cells,
        }
    }

    pub fn cell(&self, design: &str, scheme: &str) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.design == design && c.scheme == scheme)
    }

    /// Per-scheme mean and sample standard deviation over the cells that
    /// finished; failed cells are only counted.
    pub fn aggregates(&self) -> Vec<SchemeAggregate> {
        self.schemes
            .iter()
            .map(|s| {
                let cells: Vec<&CellRecord> =
                    self.cells.iter().filter(|c| c.scheme == s.label).collect();
                let ok: Vec<&CellRecord> = cells.iter().copied().filter(|c| !c.failed()).collect();
                let u: Vec<f64> = ok.iter().filter_map(|c| c.final_db).collect();
                let n: Vec<f64> = ok.iter().map(|c| c.evaluations as f64).collect();
                SchemeAggregate {
                    label: s.label.clone(),
                    mean_db: mean(&u),
                    std_db: sample_std(&u),
                    mean_evals: mean(&n),
                    std_evals: sample_std(&n),
                    included: ok.len(),
                    excluded: cells.len() - ok.len(),
                    overhead_evals: s.overhead_evals,
                }
            })
            .collect()
    }

    pub fn excluded(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }

    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CELLS_HEADER)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.design.clone(),
                c.scheme.clone(),
                c.scheme_spec.clone(),
                opt(c.overhead_evals.map(|v| v.to_string())),
                opt(c.initial_db.map(|v| v.to_string())),
                opt(c.final_db.map(|v| v.to_string())),
                c.evaluations.to_string(),
                opt(c.jacobian_builds.map(|v| v.to_string())),
                opt(c.accepted.map(|v| v.to_string())),
                opt(c.termination.clone()),
                opt(c.error.clone()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cells_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CELLS_HEADER {
            return Err(Error::Config(format!(
                "unexpected cells header `{}`",
                header.join(",")
            )));
        }
        let mut cells = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Config(format!("cells row {}: invalid {what}", line + 1));
            let text = |k: usize| rec.get(k).unwrap_or("").to_string();
            let opt_text = |k: usize| Some(text(k)).filter(|s| !s.is_empty());
            fn parse<T: std::str::FromStr>(s: Option<String>, e: Error) -> Result<Option<T>> {
                s.map(|v| v.parse().map_err(|_| e)).transpose()
            }
            cells.push(CellRecord {
                design: text(0),
                scheme: text(1),
                scheme_spec: text(2),
                overhead_evals: parse(opt_text(3), bad("overhead_evals"))?,
                initial_db: parse(opt_text(4), bad("initial_db"))?,
                final_db: parse(opt_text(5), bad("final_db"))?,
                evaluations: text(6).parse().map_err(|_| bad("evaluations"))?,
                jacobian_builds: parse(opt_text(7), bad("jacobian_builds"))?,
                accepted: parse(opt_text(8), bad("accepted"))?,
                termination: opt_text(9),
                error: opt_text(10),
            });
        }
        Ok(Self::from_cells(cells))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(Error::config(format!("unknown table format `{other}`"))),
        }
    }
}

const MISSING: &str = "-";

fn db(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.1}"))
}

fn count(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.0}"))
}

/// Table rows as plain strings: header, one row per design, then the footer.
fn grid(t: &SweepTable) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut header = vec!["design".to_string()];
    for s in &t.schemes {
        header.push(format!("{}_u_db", s.label));
        header.push(format!("{}_evals", s.label));
    }
    rows.push(header);
    for d in &t.designs {
        let mut row = vec![d.clone()];
        for s in &t.schemes {
            match t.cell(d, &s.label) {
                Some(c) if !c.failed() => {
                    row.push(db(c.final_db));
                    row.push(c.evaluations.to_string());
                }
                _ => {
                    row.push(MISSING.into());
                    row.push(MISSING.into());
                }
            }
        }
        rows.push(row);
    }
    let agg = t.aggregates();
    let footer = |name: &str, f: &dyn Fn(&SchemeAggregate) -> [String; 2]| {
        let mut row = vec![name.to_string()];
        for a in &agg {
            row.extend(f(a));
        }
        row
    };
    rows.push(footer("E^s", &|a| [db(a.mean_db), count(a.mean_evals)]));
    rows.push(footer("σ^s", &|a| {
        [
            a.std_db
                .map_or_else(|| MISSING.to_string(), |v| format!("{v:.2}")),
            count(a.std_evals),
        ]
    }));
    if agg.iter().any(|a| a.overhead_evals.is_some()) {
        rows.push(footer("overhead", &|a| {
            [
                MISSING.to_string(),
                a.overhead_evals
                    .map_or_else(|| MISSING.to_string(), |v| v.to_string()),
            ]
        }));
    }
    if agg.iter().any(|a| a.excluded > 0) {
        rows.push(footer("excluded", &|a| {
            [a.excluded.to_string(), MISSING.to_string()]
        }));
    }
    rows
}

/// Designs as rows, a (final objective, evaluations) column pair per scheme,
/// then `E^s` / `σ^s` footer rows. dB values use one decimal, standard
/// deviations of dB two, counts none; missing values render as `-`.
pub fn render_table(t: &SweepTable, format: TableFormat) -> String {
    let rows = grid(t);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.write_record(row).expect("writing to memory");
            }
            String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            for (k, row) in rows.iter().enumerate() {
                out.push_str("| ");
                out.push_str(&row.join(" | "));
                out.push_str(" |\n");
                if k == 0 {
                    out.push('|');
                    out.push_str(&"---|".repeat(row.len()));
                    out.push('\n');
                }
            }
            out
        }
    }
}
