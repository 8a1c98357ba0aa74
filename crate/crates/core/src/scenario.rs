//! Line-oriented scenario configuration files.
//!
//! The format is plain text so fixtures diff cleanly and round-trip
//! bit-exactly (floats are written in Rust's shortest round-trip form):
//!
//! ```text
//! # comment
//! name market5
//! matrix A 5 5        # then 5 rows of 5 whitespace-separated numbers
//! ...
//! end
//! bounds x0 5         # two rows: lower then upper
//! ...
//! end
//! budget <epsilon> <delta> <rho>
//! horizon 100
//! seed 0
//! output_blocks 1 1 1 1 1
//! gain 5 5            # optional fixture gain, rows like `matrix`
//! ...
//! end
//! alpha 1.364
//! ```
//!
//! Required blocks: matrices A, C, W, V, Gamma and bounds x0, w, v.
//! `budget`, `gain`, `alpha`, `name`, `output_blocks` are optional;
//! horizon defaults to 100 and seed to 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::matops::Matrix;
use crate::plant::{IntervalVector, PlantError, PlantModel, PrivacyBudget};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{field}: {source}")]
    Invariant {
        field: String,
        #[source]
        source: PlantError,
    },
    #[error("{0} required")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Execution defaults carried by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: usize,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: 100,
            seed: 0,
        }
    }
}

/// An optional fixture gain block: paper-reported gains are loaded rather
/// than re-synthesized.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBlock {
    pub l: Matrix,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub plant: PlantModel,
    pub budget: Option<PrivacyBudget>,
    pub options: RunOptions,
    pub gain: Option<GainBlock>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

struct LineReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let no_comment = match l.find('#') {
                    Some(idx) => &l[..idx],
                    None => l,
                };
                (i + 1, no_comment.trim())
            })
            .filter(|(_, l)| !l.is_empty())
            .collect();
        LineReader { lines, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        if item.is_some() {
            self.pos += 1;
        }
        item
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, token: &str) -> Result<f64, ScenarioError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, got '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

fn parse_row(line: usize, text: &str, expected: usize) -> Result<Vec<f64>, ScenarioError> {
    let vals: Result<Vec<f64>, _> = text
        .split_whitespace()
        .map(|t| parse_f64(line, t))
        .collect();
    let vals = vals?;
    if vals.len() != expected {
        return Err(parse_err(
            line,
            format!("expected {expected} values, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn parse_matrix_body(
    reader: &mut LineReader,
    header_line: usize,
    rows: usize,
    cols: usize,
) -> Result<Matrix, ScenarioError> {
    let mut body = Vec::with_capacity(rows);
    for _ in 0..rows {
        let (line, text) = reader
            .next()
            .ok_or_else(|| parse_err(header_line, "unexpected end of file in matrix block"))?;
        if text == "end" {
            return Err(parse_err(line, "matrix block ended early"));
        }
        body.push(parse_row(line, text, cols)?);
    }
    match reader.next() {
        Some((_, "end")) => Ok(Matrix::from_rows(&body)),
        Some((line, other)) => Err(parse_err(line, format!("expected 'end', got '{other}'"))),
        None => Err(parse_err(header_line, "matrix block missing 'end'")),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut reader = LineReader::new(text);
    let mut name = None;
    let mut matrices: BTreeMap<String, Matrix> = BTreeMap::new();
    let mut bounds: BTreeMap<String, IntervalVector> = BTreeMap::new();
    let mut budget = None;
    let mut options = RunOptions::default();
    let mut output_blocks: Option<Vec<usize>> = None;
    let mut gain_l: Option<Matrix> = None;
    let mut alpha: Option<f64> = None;

    while let Some((line, text)) = reader.next() {
        let mut tokens = text.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "name" => {
                name = Some(tokens.collect::<Vec<_>>().join(" "));
            }
            "matrix" => {
                let which = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, "matrix needs a name"))?;
                let rows: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "matrix needs a row count"))?;
                let cols: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "matrix needs a column count"))?;
                if rows == 0 || cols == 0 {
                    return Err(parse_err(line, "matrix dimensions must be positive"));
                }
                let m = parse_matrix_body(&mut reader, line, rows, cols)?;
                if matrices.insert(which.to_string(), m).is_some() {
                    return Err(parse_err(line, format!("duplicate matrix {which}")));
                }
            }
            "bounds" => {
                let which = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, "bounds needs a name"))?;
                let len: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "bounds needs a length"))?;
                let (lo_line, lo_text) = reader
                    .next()
                    .ok_or_else(|| parse_err(line, "bounds block needs a lower row"))?;
                let lo = parse_row(lo_line, lo_text, len)?;
                let (hi_line, hi_text) = reader
                    .next()
                    .ok_or_else(|| parse_err(line, "bounds block needs an upper row"))?;
                let hi = parse_row(hi_line, hi_text, len)?;
                match reader.next() {
                    Some((_, "end")) => {}
                    Some((l, other)) => {
                        return Err(parse_err(l, format!("expected 'end', got '{other}'")))
                    }
                    None => return Err(parse_err(line, "bounds block missing 'end'")),
                }
                let iv =
                    IntervalVector::new(lo, hi).map_err(|source| ScenarioError::Invariant {
                        field: format!("bounds {which}"),
                        source,
                    })?;
                if bounds.insert(which.to_string(), iv).is_some() {
                    return Err(parse_err(line, format!("duplicate bounds {which}")));
                }
            }
            "budget" => {
                let vals: Vec<&str> = tokens.collect();
                if vals.len() != 3 {
                    return Err(parse_err(line, "budget needs epsilon delta rho"));
                }
                let epsilon = parse_f64(line, vals[0])?;
                let delta = parse_f64(line, vals[1])?;
                let rho = parse_f64(line, vals[2])?;
                budget = Some(PrivacyBudget::new(epsilon, delta, rho).map_err(|source| {
                    ScenarioError::Invariant {
                        field: "budget".into(),
                        source,
                    }
                })?);
            }
            "horizon" => {
                options.horizon = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "horizon needs a nonnegative integer"))?;
            }
            "seed" => {
                options.seed = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "seed needs a nonnegative integer"))?;
            }
            "output_blocks" => {
                let blocks: Result<Vec<usize>, _> = tokens
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| parse_err(line, format!("bad block size '{t}'")))
                    })
                    .collect();
                output_blocks = Some(blocks?);
            }
            "gain" => {
                let rows: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "gain needs a row count"))?;
                let cols: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "gain needs a column count"))?;
                gain_l = Some(parse_matrix_body(&mut reader, line, rows, cols)?);
            }
            "alpha" => {
                let v = parse_f64(
                    line,
                    tokens
                        .next()
                        .ok_or_else(|| parse_err(line, "alpha needs a value"))?,
                )?;
                if v <= 0.0 {
                    return Err(parse_err(line, format!("alpha must be positive, got {v}")));
                }
                alpha = Some(v);
            }
            other => {
                return Err(parse_err(line, format!("unknown keyword '{other}'")));
            }
        }
    }

    let take_matrix = |matrices: &mut BTreeMap<String, Matrix>,
                       key: &str,
                       missing: &'static str|
     -> Result<Matrix, ScenarioError> {
        matrices.remove(key).ok_or(ScenarioError::Missing(missing))
    };
    let a = take_matrix(&mut matrices, "A", "matrix A")?;
    let c = take_matrix(&mut matrices, "C", "matrix C")?;
    let w = take_matrix(&mut matrices, "W", "matrix W")?;
    let v = take_matrix(&mut matrices, "V", "matrix V")?;
    let gamma = take_matrix(&mut matrices, "Gamma", "Gamma")?;
    if let Some(extra) = matrices.keys().next() {
        return Err(parse_err(0, format!("unknown matrix '{extra}'")));
    }
    let x0 = bounds
        .remove("x0")
        .ok_or(ScenarioError::Missing("bounds x0"))?;
    let w_bounds = bounds
        .remove("w")
        .ok_or(ScenarioError::Missing("bounds w"))?;
    let v_bounds = bounds
        .remove("v")
        .ok_or(ScenarioError::Missing("bounds v"))?;
    if let Some(extra) = bounds.keys().next() {
        return Err(parse_err(0, format!("unknown bounds '{extra}'")));
    }

    let m = c.rows();
    let plant = PlantModel {
        a,
        c,
        w,
        v,
        gamma,
        x0,
        w_bounds,
        v_bounds,
        output_blocks: output_blocks.unwrap_or_else(|| vec![m]),
    };
    plant
        .validate()
        .map_err(|source| ScenarioError::Invariant {
            field: "plant".into(),
            source,
        })?;

    let gain = match gain_l {
        Some(l) => {
            if l.rows() != plant.n() || l.cols() != plant.m() {
                return Err(ScenarioError::Invariant {
                    field: "gain".into(),
                    source: PlantError::AgentDimension {
                        agent: 0,
                        what: "gain".into(),
                        expected: format!("{}x{}", plant.n(), plant.m()),
                        got: format!("{}x{}", l.rows(), l.cols()),
                    },
                });
            }
            Some(GainBlock {
                l,
                alpha: alpha.unwrap_or(1.0),
            })
        }
        None => None,
    };

    Ok(Scenario {
        name,
        plant,
        budget,
        options,
        gain,
    })
}

fn write_matrix(out: &mut String, keyword: &str, name: &str, m: &Matrix) {
    if name.is_empty() {
        let _ = writeln!(out, "{keyword} {} {}", m.rows(), m.cols());
    } else {
        let _ = writeln!(out, "{keyword} {name} {} {}", m.rows(), m.cols());
    }
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let _ = writeln!(out, "end");
}

fn write_row(out: &mut String, v: &[f64]) {
    let row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    let _ = writeln!(out, "{}", row.join(" "));
}

/// Serialize a scenario in canonical block order. Reloading the output
/// reproduces every matrix bit-identically (shortest round-trip floats).
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    if let Some(name) = &s.name {
        let _ = writeln!(out, "name {name}");
    }
    write_matrix(&mut out, "matrix", "A", &s.plant.a);
    write_matrix(&mut out, "matrix", "C", &s.plant.c);
    write_matrix(&mut out, "matrix", "W", &s.plant.w);
    write_matrix(&mut out, "matrix", "V", &s.plant.v);
    write_matrix(&mut out, "matrix", "Gamma", &s.plant.gamma);
    for (name, iv) in [
        ("x0", &s.plant.x0),
        ("w", &s.plant.w_bounds),
        ("v", &s.plant.v_bounds),
    ] {
        let _ = writeln!(out, "bounds {name} {}", iv.len());
        write_row(&mut out, iv.lo());
        write_row(&mut out, iv.hi());
        let _ = writeln!(out, "end");
    }
    if let Some(b) = &s.budget {
        let _ = writeln!(out, "budget {} {} {}", b.epsilon, b.delta, b.rho);
    }
    let _ = writeln!(out, "horizon {}", s.options.horizon);
    let _ = writeln!(out, "seed {}", s.options.seed);
    let blocks: Vec<String> = s
        .plant
        .output_blocks
        .iter()
        .map(|b| b.to_string())
        .collect();
    let _ = writeln!(out, "output_blocks {}", blocks.join(" "));
    if let Some(gain) = &s.gain {
        write_matrix(&mut out, "gain", "", &gain.l);
        let _ = writeln!(out, "alpha {}", gain.alpha);
    }
    out
}

/// Serialize just a gain block (the format cmd-synth writes); the result
/// parses with [`parse_gain_file`].
pub fn serialize_gain_block(gain: &GainBlock) -> String {
    let mut out = String::new();
    write_matrix(&mut out, "gain", "", &gain.l);
    let _ = writeln!(out, "alpha {}", gain.alpha);
    out
}

/// Parse a standalone gain-block file.
pub fn parse_gain_file(text: &str) -> Result<GainBlock, ScenarioError> {
    let mut reader = LineReader::new(text);
    let mut l = None;
    let mut alpha = None;
    while let Some((line, text)) = reader.next() {
        let mut tokens = text.split_whitespace();
        match tokens.next().unwrap() {
            "gain" => {
                let rows: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "gain needs a row count"))?;
                let cols: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line, "gain needs a column count"))?;
                l = Some(parse_matrix_body(&mut reader, line, rows, cols)?);
            }
            "alpha" => {
                alpha = Some(parse_f64(
                    line,
                    tokens
                        .next()
                        .ok_or_else(|| parse_err(line, "alpha needs a value"))?,
                )?);
            }
            other => return Err(parse_err(line, format!("unknown keyword '{other}'"))),
        }
    }
    Ok(GainBlock {
        l: l.ok_or(ScenarioError::Missing("gain"))?,
        alpha: alpha.unwrap_or(1.0),
    })
}
