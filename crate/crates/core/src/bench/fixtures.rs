//! Published timing tables, shipped as reference data for the statistics
//! oracles. Never used as benchmark output.

use std::collections::BTreeMap;

use serde_json::json;

use super::stats::{decrease_pct_raw, mean, round_half_up, sigma};
use super::Case;
use crate::Mode;

pub const TABLE1_CSV: &str = include_str!("../../fixtures/table1.csv");
pub const TABLE2_CSV: &str = include_str!("../../fixtures/table2.csv");

pub const SIGMA_TOLERANCE: f64 = 0.5;
pub const DECREASE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRow {
    pub case: Case,
    pub records: u64,
    pub t1: f64,
    pub t2: f64,
    /// As printed: unsigned, and blank for some rows.
    pub decrease_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table1 {
    pub rows: Vec<FixtureRow>,
    pub averages: BTreeMap<Case, f64>,
}

impl Table1 {
    pub fn rows_for(&self, case: Case) -> impl Iterator<Item = &FixtureRow> {
        self.rows.iter().filter(move |r| r.case == case)
    }

    pub fn column(&self, case: Case, mode: Mode) -> Vec<f64> {
        self.rows_for(case)
            .map(|r| if mode == Mode::Dmvc { r.t1 } else { r.t2 })
            .collect()
    }
}

/// Published sigma per (case, architecture).
pub type Table2 = BTreeMap<(Case, Mode), f64>;

fn opt_f64(s: &str) -> Result<Option<f64>, String> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    s.trim().parse().map(Some).map_err(|e| format!("bad number {s:?}: {e}"))
}

fn req_f64(s: &str) -> Result<f64, String> {
    opt_f64(s)?.ok_or_else(|| "missing number".to_owned())
}

pub fn parse_table1(text: &str) -> Result<Table1, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut table = Table1::default();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let case: Case = field(0).parse()?;
        if field(1) == "average" {
            table.averages.insert(case, req_f64(field(4))?);
            continue;
        }
        table.rows.push(FixtureRow {
            case,
            records: field(1).parse().map_err(|e| format!("bad record count: {e}"))?,
            t1: req_f64(field(2))?,
            t2: req_f64(field(3))?,
            decrease_pct: opt_f64(field(4))?,
        });
    }
    Ok(table)
}

pub fn parse_table2(text: &str) -> Result<Table2, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut table = Table2::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let case: Case = rec.get(0).unwrap_or("").parse()?;
        let mode: Mode = rec.get(1).unwrap_or("").parse()?;
        table.insert((case, mode), req_f64(rec.get(2).unwrap_or(""))?);
    }
    Ok(table)
}

pub fn table1() -> Table1 {
    parse_table1(TABLE1_CSV).expect("shipped table 1 fixture parses")
}

pub fn table2() -> Table2 {
    parse_table2(TABLE2_CSV).expect("shipped table 2 fixture parses")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "name": self.name, "passed": self.passed, "detail": self.detail })
    }
}

/// Recomputes sigma, per-row decrease and the average decrease from the
/// raw timings and compares each against the printed values.
pub fn verify_fixtures() -> Vec<Check> {
    verify(&table1(), &table2())
}

pub fn verify(t1: &Table1, t2: &Table2) -> Vec<Check> {
    let mut checks = Vec::new();
    for ((case, mode), expected) in t2 {
        let name = format!("sigma {case} {mode}");
        let check = match sigma(&t1.column(*case, *mode)) {
            Some(got) => Check {
                passed: (got - expected).abs() <= SIGMA_TOLERANCE,
                detail: format!("computed {got:.3}, published {expected:.2}, tolerance {SIGMA_TOLERANCE}"),
                name,
            },
            None => Check {
                name,
                passed: false,
                detail: "fewer than two samples".into(),
            },
        };
        checks.push(check);
    }

    for case in Case::ALL {
        let mut compared = 0;
        let mut bad = Vec::new();
        let mut signed = Vec::new();
        for row in t1.rows_for(case) {
            let Some(printed) = row.decrease_pct else { continue };
            let Some(raw) = decrease_pct_raw(row.t1, row.t2) else {
                bad.push(format!("{} (t1 = 0)", row.records));
                continue;
            };
            compared += 1;
            signed.push(raw);
            // The printed column drops the sign; compare magnitudes.
            let got = round_half_up(raw, 2).abs();
            if (got - printed).abs() > DECREASE_TOLERANCE + 1e-9 {
                bad.push(format!("{}: computed {got:.2} printed {printed:.2}", row.records));
            }
        }
        checks.push(Check {
            name: format!("decrease {case}"),
            passed: bad.is_empty() && compared > 0,
            detail: if bad.is_empty() {
                format!("{compared} non-blank cells within {DECREASE_TOLERANCE}")
            } else {
                format!("{} of {compared} cells off: {}", bad.len(), bad.join("; "))
            },
        });

        if let Some(published) = t1.averages.get(&case) {
            let name = format!("average decrease {case}");
            checks.push(match mean(&signed) {
                Some(m) => {
                    let got = round_half_up(m, 2);
                    Check {
                        passed: (got - published).abs() <= DECREASE_TOLERANCE + 1e-9,
                        detail: format!(
                            "signed mean over {} rows {got:.2}, published {published:.2}",
                            signed.len()
                        ),
                        name,
                    }
                }
                None => Check {
                    name,
                    passed: false,
                    detail: "no rows to average".into(),
                },
            });
        }
    }
    checks
}
