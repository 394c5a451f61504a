//! Reading and writing of grid cases in the MATPOWER `.m` case format.
//!
//! Only the restricted subset used by the public benchmark corpus is
//! supported: `mpc.<field> = <scalar|matrix>;` assignments, `%` line
//! comments and an optional `function mpc = <name>` header. A structured
//! JSON mirror of the same tables is accepted wherever a `.m` file is,
//! selected by file extension.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bus table column indices (0-based).
pub mod bus_col {
    pub const BUS_I: usize = 0;
    pub const BUS_TYPE: usize = 1;
    pub const PD: usize = 2;
    pub const QD: usize = 3;
    pub const GS: usize = 4;
    pub const BS: usize = 5;
    pub const AREA: usize = 6;
    pub const VM: usize = 7;
    pub const VA: usize = 8;
    pub const BASE_KV: usize = 9;
    pub const ZONE: usize = 10;
    pub const VMAX: usize = 11;
    pub const VMIN: usize = 12;
}

/// Generator table column indices (0-based).
pub mod gen_col {
    pub const GEN_BUS: usize = 0;
    pub const PG: usize = 1;
    pub const QG: usize = 2;
    pub const QMAX: usize = 3;
    pub const QMIN: usize = 4;
    pub const VG: usize = 5;
    pub const MBASE: usize = 6;
    pub const GEN_STATUS: usize = 7;
    pub const PMAX: usize = 8;
    pub const PMIN: usize = 9;
}

/// Branch table column indices (0-based).
pub mod branch_col {
    pub const F_BUS: usize = 0;
    pub const T_BUS: usize = 1;
    pub const BR_R: usize = 2;
    pub const BR_X: usize = 3;
    pub const BR_B: usize = 4;
    pub const RATE_A: usize = 5;
    pub const RATE_B: usize = 6;
    pub const RATE_C: usize = 7;
    pub const TAP: usize = 8;
    pub const SHIFT: usize = 9;
    pub const BR_STATUS: usize = 10;
    pub const ANGMIN: usize = 11;
    pub const ANGMAX: usize = 12;
}

/// Generator cost table column indices (0-based).
pub mod cost_col {
    pub const MODEL: usize = 0;
    pub const STARTUP: usize = 1;
    pub const SHUTDOWN: usize = 2;
    pub const NCOST: usize = 3;
    pub const COST: usize = 4;

    pub const PW_LINEAR: f64 = 1.0;
    pub const POLYNOMIAL: f64 = 2.0;
}

pub const MIN_BUS_COLS: usize = 13;
pub const MIN_GEN_COLS: usize = 10;
pub const MIN_BRANCH_COLS: usize = 13;
pub const MIN_GENCOST_COLS: usize = 4;

/// Raw case tables as stored in the file, before any validation or
/// per-unit conversion. Extra columns beyond the documented schema are
/// retained verbatim so a parse/write round trip is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    #[serde(default = "default_case_name")]
    pub name: String,
    #[serde(rename = "baseMVA")]
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
    #[serde(default)]
    pub gencost: Vec<Vec<f64>>,
}

fn default_case_name() -> String {
    "case".to_string()
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("malformed matrix `{table}`: {detail}")]
    MalformedMatrix { table: String, detail: String },
    #[error("missing required table `{0}`")]
    MissingTable(&'static str),
    #[error("invalid number `{token}` in `{table}`")]
    NumericParse { table: String, token: String },
    #[error("invalid mirror document: {0}")]
    Mirror(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CaseData {
    /// Reads a case from disk, dispatching on the file extension:
    /// `.json` selects the structured mirror format, anything else is
    /// parsed as a MATPOWER `.m` file.
    pub fn read(path: impl AsRef<Path>) -> Result<CaseData, CaseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(default_case_name);
        if path.extension().is_some_and(|e| e == "json") {
            let mut case: CaseData =
                serde_json::from_str(&text).map_err(|e| CaseError::Mirror(e.to_string()))?;
            if case.name == default_case_name() {
                case.name = stem;
            }
            case.validate()?;
            Ok(case)
        } else {
            let mut case = parse_case(&text)?;
            if case.name == default_case_name() {
                case.name = stem;
            }
            Ok(case)
        }
    }

    /// Serializes to the structured JSON mirror.
    pub fn to_mirror(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialization cannot fail")
    }

    fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) {
            return Err(CaseError::MalformedMatrix {
                table: "baseMVA".into(),
                detail: format!("baseMVA must be positive, got {}", self.base_mva),
            });
        }
        check_table("bus", &self.bus, MIN_BUS_COLS)?;
        check_table("gen", &self.gen, MIN_GEN_COLS)?;
        check_table("branch", &self.branch, MIN_BRANCH_COLS)?;
        // gencost rows may legitimately differ in length (NCOST varies)
        for (i, row) in self.gencost.iter().enumerate() {
            if row.len() < MIN_GENCOST_COLS {
                return Err(CaseError::MalformedMatrix {
                    table: "gencost".into(),
                    detail: format!("row {} has {} columns, need {}", i, row.len(), MIN_GENCOST_COLS),
                });
            }
        }
        let mut seen = HashSet::new();
        for row in &self.bus {
            let id = row[bus_col::BUS_I];
            if !seen.insert(id.to_bits()) {
                return Err(CaseError::MalformedMatrix {
                    table: "bus".into(),
                    detail: format!("duplicate bus id {id}"),
                });
            }
        }
        Ok(())
    }
}

fn check_table(name: &'static str, rows: &[Vec<f64>], min_cols: usize) -> Result<(), CaseError> {
    if rows.is_empty() {
        return Err(CaseError::MissingTable(name));
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(CaseError::MalformedMatrix {
                table: name.into(),
                detail: format!("ragged row {}: {} columns, expected {}", i, row.len(), width),
            });
        }
    }
    if width < min_cols {
        return Err(CaseError::MalformedMatrix {
            table: name.into(),
            detail: format!("{width} columns, need at least {min_cols}"),
        });
    }
    Ok(())
}

/// Parses MATPOWER `.m` case text into raw tables.
///
/// Unknown assignments are skipped; `%` comments run to end of line;
/// matrix rows are separated by `;` or newlines.
pub fn parse_case(text: &str) -> Result<CaseData, CaseError> {
    let mut name = default_case_name();
    let mut base_mva: Option<f64> = None;
    let mut bus = None;
    let mut gen = None;
    let mut branch = None;
    let mut gencost = None;

    let mut scanner = Scanner::new(text);
    while let Some(stmt) = scanner.next_statement()? {
        match stmt {
            Statement::Function(fn_name) => name = fn_name,
            Statement::Scalar(field, value) => {
                if field == "baseMVA" {
                    base_mva = Some(value);
                }
            }
            Statement::Matrix(field, rows) => match field.as_str() {
                "bus" => bus = Some(rows),
                "gen" => gen = Some(rows),
                "branch" => branch = Some(rows),
                "gencost" => gencost = Some(rows),
                _ => {}
            },
            Statement::Ignored => {}
        }
    }

    let case = CaseData {
        name,
        base_mva: base_mva.ok_or(CaseError::MissingTable("baseMVA"))?,
        bus: bus.ok_or(CaseError::MissingTable("bus"))?,
        gen: gen.ok_or(CaseError::MissingTable("gen"))?,
        branch: branch.ok_or(CaseError::MissingTable("branch"))?,
        gencost: gencost.unwrap_or_default(),
    };
    case.validate()?;
    Ok(case)
}

/// Emits MATPOWER `.m` case text. Values print in shortest form that
/// parses back to the identical `f64`, so `parse_case(write_case(c)) == c`.
pub fn write_case(case: &CaseData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {}", case.name);
    out.push_str("mpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {};", fmt_num(case.base_mva));
    write_table(&mut out, "bus", &case.bus);
    write_table(&mut out, "gen", &case.gen);
    write_table(&mut out, "branch", &case.branch);
    if !case.gencost.is_empty() {
        write_table(&mut out, "gencost", &case.gencost);
    }
    out
}

fn write_table(out: &mut String, field: &str, rows: &[Vec<f64>]) {
    let _ = writeln!(out, "mpc.{field} = [");
    for row in rows {
        out.push('\t');
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            out.push_str(&fmt_num(*v));
        }
        out.push_str(";\n");
    }
    out.push_str("];\n");
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // LowerExp prints the shortest mantissa that round-trips
        format!("{v:e}")
    }
}

enum Statement {
    Function(String),
    Scalar(String, f64),
    Matrix(String, Vec<Vec<f64>>),
    Ignored,
}

struct Scanner<'a> {
    rest: &'a str,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner { rest: text }
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            self.rest = self.rest.trim_start();
            if let Some(after) = self.rest.strip_prefix('%') {
                self.rest = after.split_once('\n').map_or("", |(_, tail)| tail);
            } else {
                return;
            }
        }
    }

    fn next_statement(&mut self) -> Result<Option<Statement>, CaseError> {
        self.skip_ws_and_comments();
        if self.rest.is_empty() {
            return Ok(None);
        }
        if let Some(after) = self.rest.strip_prefix("function") {
            let line = after.split_once('\n').map_or(after, |(head, _)| head);
            self.rest = &self.rest[("function".len() + line.len()).min(self.rest.len())..];
            let fn_name = line.rsplit('=').next().unwrap_or("").trim();
            if fn_name.is_empty() {
                return Ok(Some(Statement::Ignored));
            }
            return Ok(Some(Statement::Function(fn_name.to_string())));
        }

        // <ident>.<field> = <value>; -- the struct variable name is not checked
        let field = self.read_lhs()?;
        self.skip_ws_and_comments();
        let Some(after_eq) = self.rest.strip_prefix('=') else {
            return Err(CaseError::MalformedMatrix {
                table: field,
                detail: "expected `=`".into(),
            });
        };
        self.rest = after_eq;
        self.skip_ws_and_comments();

        if self.rest.starts_with('[') {
            let rows = self.read_matrix(&field)?;
            self.expect_semicolon();
            return Ok(Some(Statement::Matrix(field, rows)));
        }
        if self.rest.starts_with('\'') {
            // string scalar (e.g. mpc.version); skip to closing quote
            let close = self.rest[1..].find('\'').map(|i| i + 1).ok_or_else(|| {
                CaseError::MalformedMatrix {
                    table: field.clone(),
                    detail: "unterminated string".into(),
                }
            })?;
            self.rest = &self.rest[close + 1..];
            self.expect_semicolon();
            return Ok(Some(Statement::Ignored));
        }
        let token = self.read_number_token(&field)?;
        let value = parse_number(&field, token)?;
        self.expect_semicolon();
        Ok(Some(Statement::Scalar(field, value)))
    }

    fn read_lhs(&mut self) -> Result<String, CaseError> {
        let ident_end = self
            .rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.'))
            .unwrap_or(self.rest.len());
        let lhs = &self.rest[..ident_end];
        self.rest = &self.rest[ident_end..];
        if lhs.is_empty() {
            return Err(CaseError::MalformedMatrix {
                table: truncate(self.rest),
                detail: "expected assignment".into(),
            });
        }
        // take the field after the last dot; a bare name assigns itself
        Ok(lhs.rsplit('.').next().unwrap_or(lhs).to_string())
    }

    fn read_matrix(&mut self, table: &str) -> Result<Vec<Vec<f64>>, CaseError> {
        debug_assert!(self.rest.starts_with('['));
        self.rest = &self.rest[1..];
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut row: Vec<f64> = Vec::new();
        loop {
            // comments inside a matrix body are legal (column header lines)
            loop {
                self.rest = self.rest.trim_start_matches([' ', '\t', '\r', ',']);
                if let Some(after) = self.rest.strip_prefix('%') {
                    self.rest = after.split_once('\n').map_or("", |(_, tail)| tail);
                } else {
                    break;
                }
            }
            match self.rest.chars().next() {
                None => {
                    return Err(CaseError::MalformedMatrix {
                        table: table.into(),
                        detail: "unbalanced brackets".into(),
                    })
                }
                Some(']') => {
                    self.rest = &self.rest[1..];
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                    return Ok(rows);
                }
                Some(';') | Some('\n') => {
                    self.rest = &self.rest[1..];
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                }
                Some('[') => {
                    return Err(CaseError::MalformedMatrix {
                        table: table.into(),
                        detail: "nested brackets".into(),
                    })
                }
                Some(_) => {
                    let token = self.read_number_token(table)?;
                    row.push(parse_number(table, token)?);
                }
            }
        }
    }

    fn read_number_token(&mut self, table: &str) -> Result<&'a str, CaseError> {
        let end = self
            .rest
            .find(|c: char| {
                !(c.is_ascii_digit()
                    || c == '.'
                    || c == '+'
                    || c == '-'
                    || c == 'e'
                    || c == 'E'
                    || c.is_ascii_alphabetic())
            })
            .unwrap_or(self.rest.len());
        // '+'/'-' may only lead the token or follow an exponent marker
        let mut cut = end;
        for (i, c) in self.rest[..end].char_indices() {
            if (c == '+' || c == '-') && i > 0 {
                let prev = self.rest.as_bytes()[i - 1];
                if prev != b'e' && prev != b'E' {
                    cut = i;
                    break;
                }
            }
        }
        let token = &self.rest[..cut];
        self.rest = &self.rest[cut..];
        if token.is_empty() {
            let bad = truncate(self.rest);
            self.rest = "";
            return Err(CaseError::NumericParse {
                table: table.into(),
                token: bad,
            });
        }
        Ok(token)
    }

    fn expect_semicolon(&mut self) {
        self.skip_ws_and_comments();
        if let Some(after) = self.rest.strip_prefix(';') {
            self.rest = after;
        }
    }
}

fn parse_number(table: &str, token: &str) -> Result<f64, CaseError> {
    let v: f64 = token.parse().map_err(|_| CaseError::NumericParse {
        table: table.into(),
        token: token.into(),
    })?;
    if !v.is_finite() {
        return Err(CaseError::NumericParse {
            table: table.into(),
            token: token.into(),
        });
    }
    Ok(v)
}

fn truncate(s: &str) -> String {
    s.chars().take(12).collect()
}
