//! Line-oriented text formats for models, stationary policies, value
//! functions and state distributions.
//!
//! ```text
//! mdpt 1 positive            policy 1         value 1 beta=1     dist 1
//! state p(1)                 p(1) continue    p(1) 1.9375        p(1) 0.5
//! state t                    t stay           t 0                p(2) 0.5
//! action p(1) continue
//!   -> p(2) 0.5 0
//!   -> t 0.5 0
//! ```
//!
//! `#` starts a comment that runs to the end of the line; blank lines are
//! ignored. Serialization is canonical: states, actions and transitions in
//! index order, numbers as the shortest decimal that parses back exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::{StateDistribution, ValueFunction};
use crate::model::{is_valid_label, ActionId, Model, ModelBuilder, Regime, StateId, ValidationReport};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;

pub const VERSION: &str = "1";

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: model is invalid: {report}")]
    Validation { line: usize, report: String },
    #[error("line {line}: unknown state {label}")]
    UnknownState { line: usize, label: String },
    #[error("line {line}: state {state} has no action {action}")]
    UnknownAction {
        line: usize,
        state: String,
        action: String,
    },
    #[error("line {line}: no entry for state {label}")]
    MissingState { line: usize, label: String },
    #[error("line {line}: bad probability mass: {message}")]
    BadMass { line: usize, message: String },
}

impl TextError {
    pub fn line(&self) -> usize {
        match self {
            TextError::Parse { line, .. }
            | TextError::Validation { line, .. }
            | TextError::UnknownState { line, .. }
            | TextError::UnknownAction { line, .. }
            | TextError::MissingState { line, .. }
            | TextError::BadMass { line, .. } => *line,
        }
    }
}

pub type TextResult<X> = std::result::Result<X, TextError>;

/// An action block being read: owner, label and `(target, p, r)` entries.
type PendingRow<'a, T> = (StateId, &'a str, Vec<(StateId, T, T)>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocumentKind {
    Model,
    Policy,
    Value,
    Dist,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Document<T> {
    Model(Model<T>),
    Policy(StationaryPolicy),
    Value(ValueFunction<T>),
    Dist(StateDistribution<T>),
}

impl<T: Scalar> Document<T> {
    pub fn kind(&self) -> DocumentKind {
        match self {
            Document::Model(_) => DocumentKind::Model,
            Document::Policy(_) => DocumentKind::Policy,
            Document::Value(_) => DocumentKind::Value,
            Document::Dist(_) => DocumentKind::Dist,
        }
    }

    pub fn serialize(&self, model: Option<&Model<T>>) -> String {
        match (self, model) {
            (Document::Model(m), _) => serialize_model(m),
            (Document::Policy(f), Some(m)) => serialize_policy(f, m),
            (Document::Value(v), Some(m)) => serialize_value(v, m),
            (Document::Dist(d), Some(m)) => serialize_dist(d, m),
            _ => panic!("policy, value and dist documents need their model to serialize"),
        }
    }
}

/// Parses any document kind; all but models need the model they refer to.
pub fn parse_document<T: Scalar>(text: &str, model: Option<&Model<T>>) -> TextResult<Document<T>> {
    let kind = document_kind(text)?;
    let need = || TextError::Parse {
        line: 1,
        column: 1,
        message: "document refers to a model that was not supplied".into(),
    };
    Ok(match kind {
        DocumentKind::Model => Document::Model(parse_model(text)?),
        DocumentKind::Policy => Document::Policy(parse_policy(text, model.ok_or_else(need)?)?),
        DocumentKind::Value => Document::Value(parse_value(text, model.ok_or_else(need)?)?),
        DocumentKind::Dist => Document::Dist(parse_dist(text, model.ok_or_else(need)?)?),
    })
}

pub fn document_kind(text: &str) -> TextResult<DocumentKind> {
    let mut lines = Lines::new(text);
    let header = lines.next().ok_or_else(|| empty_input(&lines))?;
    let (col, word) = header.tokens[0];
    match word {
        "mdpt" => Ok(DocumentKind::Model),
        "policy" => Ok(DocumentKind::Policy),
        "value" => Ok(DocumentKind::Value),
        "dist" => Ok(DocumentKind::Dist),
        other => Err(header.error(col, format!("unknown document kind {other:?}"))),
    }
}

struct Line<'a> {
    number: usize,
    tokens: Vec<(usize, &'a str)>,
}

impl<'a> Line<'a> {
    fn error(&self, column: usize, message: impl Into<String>) -> TextError {
        TextError::Parse {
            line: self.number,
            column,
            message: message.into(),
        }
    }

    fn expect_len(&self, n: usize, form: &str) -> TextResult<()> {
        if self.tokens.len() == n {
            Ok(())
        } else {
            let col = self.tokens.get(n).map_or(self.tokens[0].0, |t| t.0);
            Err(self.error(col, format!("expected `{form}`")))
        }
    }

    fn number<T: Scalar>(&self, idx: usize) -> TextResult<T> {
        let (col, word) = self.tokens[idx];
        word.parse::<T>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.error(col, format!("invalid number {word:?}")))
    }

    fn label(&self, idx: usize) -> TextResult<&'a str> {
        let (col, word) = self.tokens[idx];
        if is_valid_label(word) {
            Ok(word)
        } else {
            Err(self.error(col, format!("invalid label {word:?}")))
        }
    }
}

/// Non-blank lines with comments stripped, split into tokens with their
/// 1-based columns.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = Line<'a>;

    fn next(&mut self) -> Option<Line<'a>> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut start = None;
            for (pos, ch) in content.char_indices() {
                match (ch.is_whitespace(), start) {
                    (false, None) => start = Some(pos),
                    (true, Some(s)) => {
                        tokens.push((s + 1, &content[s..pos]));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                tokens.push((s + 1, &content[s..]));
            }
            if !tokens.is_empty() {
                return Some(Line {
                    number: i + 1,
                    tokens,
                });
            }
        }
        None
    }
}

fn empty_input(lines: &Lines<'_>) -> TextError {
    TextError::Parse {
        line: lines.last.max(1),
        column: 1,
        message: "missing header".into(),
    }
}

fn check_header(line: &Line<'_>, kind: &str, form: &str, len: usize) -> TextResult<()> {
    let (col, word) = line.tokens[0];
    if word != kind {
        return Err(line.error(col, format!("expected a {kind} header, found {word:?}")));
    }
    line.expect_len(len, form)?;
    let (col, version) = line.tokens[1];
    if version != VERSION {
        return Err(line.error(col, format!("unsupported version {version:?}")));
    }
    Ok(())
}

pub fn parse_model<T: Scalar>(text: &str) -> TextResult<Model<T>> {
    let mut lines = Lines::new(text);
    let header = lines.next().ok_or_else(|| empty_input(&lines))?;
    check_header(&header, "mdpt", "mdpt 1 positive|signed", 3)?;
    let regime = match header.tokens[2] {
        (_, "positive") => Regime::Positive,
        (_, "signed") => Regime::Signed,
        (col, other) => return Err(header.error(col, format!("unknown regime {other:?}"))),
    };

    let mut builder = ModelBuilder::<T>::new(regime);
    let mut index: HashMap<&str, StateId> = HashMap::new();
    let mut action_labels: HashMap<(StateId, &str), ()> = HashMap::new();
    let mut rows: Vec<PendingRow<'_, T>> = Vec::new();
    let resolve = |index: &HashMap<&str, StateId>, line: &Line<'_>, idx: usize| {
        let (col, label) = line.tokens[idx];
        index
            .get(label)
            .copied()
            .ok_or_else(|| line.error(col, format!("unknown state {label}")))
    };

    for line in lines.by_ref() {
        let (col, word) = line.tokens[0];
        match word {
            "state" => {
                line.expect_len(2, "state <label>")?;
                let label = line.label(1)?;
                if index.contains_key(label) {
                    return Err(line.error(line.tokens[1].0, format!("duplicate state label {label}")));
                }
                let id = builder.add_state(label);
                index.insert(label, id);
            }
            "action" => {
                line.expect_len(3, "action <state> <action>")?;
                let state = resolve(&index, &line, 1)?;
                let label = line.label(2)?;
                if action_labels.insert((state, label), ()).is_some() {
                    return Err(line.error(
                        line.tokens[2].0,
                        format!("duplicate action {label} at state {}", line.tokens[1].1),
                    ));
                }
                rows.push((state, label, Vec::new()));
            }
            "->" => {
                line.expect_len(4, "-> <state> <probability> <reward>")?;
                let target = resolve(&index, &line, 1)?;
                let prob = line.number::<T>(2)?;
                let reward = line.number::<T>(3)?;
                match rows.last_mut() {
                    Some((_, _, row)) => row.push((target, prob, reward)),
                    None => return Err(line.error(col, "transition outside an action block")),
                }
            }
            other => return Err(line.error(col, format!("unexpected keyword {other:?}"))),
        }
    }
    let end = lines.last.max(1);
    for (state, label, row) in rows {
        builder.add_action(state, label, row);
    }
    let model = builder.build();
    let report: ValidationReport<T> = model.validate();
    if !report.ok {
        return Err(TextError::Validation {
            line: end,
            report: report.to_string(),
        });
    }
    Ok(model)
}

pub fn serialize_model<T: Scalar>(model: &Model<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mdpt {VERSION} {}", model.regime().as_str());
    for s in model.states() {
        let _ = writeln!(out, "state {}", model.label(s));
    }
    for s in model.states() {
        for act in model.actions(s) {
            let _ = writeln!(out, "action {} {}", model.label(s), act.label);
            for t in &act.row {
                let _ = writeln!(
                    out,
                    "  -> {} {} {}",
                    model.label(t.target),
                    t.probability.to_canonical_string(),
                    t.reward.to_canonical_string()
                );
            }
        }
    }
    out
}

/// Reads `<state> <token>` lines after a header into a per-state table.
fn state_table<'a, T: Scalar>(
    lines: &mut Lines<'a>,
    model: &Model<T>,
    form: &str,
) -> TextResult<Vec<Option<(usize, &'a str)>>> {
    let mut table: Vec<Option<(usize, &'a str)>> = vec![None; model.num_states()];
    for line in lines.by_ref() {
        line.expect_len(2, form)?;
        let (col, label) = line.tokens[0];
        let state = model.state_by_label(label).ok_or_else(|| TextError::UnknownState {
            line: line.number,
            label: label.to_string(),
        })?;
        if table[state.0].is_some() {
            return Err(line.error(col, format!("state {label} listed twice")));
        }
        table[state.0] = Some((line.number, line.tokens[1].1));
    }
    Ok(table)
}

fn require_total<'a, T: Scalar>(
    table: Vec<Option<(usize, &'a str)>>,
    model: &Model<T>,
    end: usize,
) -> TextResult<Vec<(usize, &'a str)>> {
    table
        .into_iter()
        .enumerate()
        .map(|(s, entry)| {
            entry.ok_or_else(|| TextError::MissingState {
                line: end,
                label: model.label(StateId(s)).to_string(),
            })
        })
        .collect()
}

pub fn parse_policy<T: Scalar>(text: &str, model: &Model<T>) -> TextResult<StationaryPolicy> {
    let mut lines = Lines::new(text);
    let header = lines.next().ok_or_else(|| empty_input(&lines))?;
    check_header(&header, "policy", "policy 1", 2)?;
    let table = state_table(&mut lines, model, "<state> <action>")?;
    let end = lines.last.max(1);
    let choice = require_total(table, model, end)?
        .into_iter()
        .enumerate()
        .map(|(s, (line, label))| {
            model
                .action_by_label(StateId(s), label)
                .ok_or_else(|| TextError::UnknownAction {
                    line,
                    state: model.label(StateId(s)).to_string(),
                    action: label.to_string(),
                })
        })
        .collect::<TextResult<Vec<ActionId>>>()?;
    Ok(StationaryPolicy::from_choices_unchecked(choice))
}

pub fn serialize_policy<T: Scalar>(f: &StationaryPolicy, model: &Model<T>) -> String {
    let mut out = format!("policy {VERSION}\n");
    for s in model.states() {
        let _ = writeln!(out, "{} {}", model.label(s), model.action_label(s, f.action(s)));
    }
    out
}

fn parse_real<T: Scalar>(line: usize, word: &str) -> TextResult<T> {
    word.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| TextError::Parse {
            line,
            column: 1,
            message: format!("invalid number {word:?}"),
        })
}

pub fn parse_value<T: Scalar>(text: &str, model: &Model<T>) -> TextResult<ValueFunction<T>> {
    let mut lines = Lines::new(text);
    let header = lines.next().ok_or_else(|| empty_input(&lines))?;
    check_header(&header, "value", "value 1 beta=<real>", 3)?;
    let (col, beta_token) = header.tokens[2];
    let beta = beta_token
        .strip_prefix("beta=")
        .and_then(|b| b.parse::<T>().ok())
        .filter(|b| *b >= T::zero() && *b <= T::one())
        .ok_or_else(|| header.error(col, format!("expected beta=<real in [0, 1]>, found {beta_token:?}")))?;
    let table = state_table(&mut lines, model, "<state> <real>")?;
    let end = lines.last.max(1);
    let values = require_total(table, model, end)?
        .into_iter()
        .map(|(line, word)| parse_real(line, word))
        .collect::<TextResult<Vec<T>>>()?;
    Ok(ValueFunction::new(values, beta))
}

pub fn serialize_value<T: Scalar>(v: &ValueFunction<T>, model: &Model<T>) -> String {
    let mut out = format!("value {VERSION} beta={}\n", v.beta.to_canonical_string());
    for s in model.states() {
        let _ = writeln!(out, "{} {}", model.label(s), v.get(s).to_canonical_string());
    }
    out
}

pub fn parse_dist<T: Scalar>(text: &str, model: &Model<T>) -> TextResult<StateDistribution<T>> {
    let mut lines = Lines::new(text);
    let header = lines.next().ok_or_else(|| empty_input(&lines))?;
    check_header(&header, "dist", "dist 1", 2)?;
    let table = state_table(&mut lines, model, "<state> <real>")?;
    let end = lines.last.max(1);
    let mut mass = Vec::new();
    let mut total = T::zero();
    for (s, entry) in table.into_iter().enumerate() {
        if let Some((line, word)) = entry {
            let m = parse_real::<T>(line, word)?;
            if !(m > T::zero() && m <= T::one()) {
                return Err(TextError::BadMass {
                    line,
                    message: format!("mass {m} outside (0, 1]"),
                });
            }
            total += m;
            mass.push((StateId(s), m));
        }
    }
    if mass.is_empty() || !((total - T::one()).abs() <= T::lit(T::ROW_TOLERANCE)) {
        return Err(TextError::BadMass {
            line: end,
            message: format!("masses sum to {total}"),
        });
    }
    StateDistribution::new(model, mass).map_err(|e| TextError::BadMass {
        line: end,
        message: e.to_string(),
    })
}

pub fn serialize_dist<T: Scalar>(d: &StateDistribution<T>, model: &Model<T>) -> String {
    let mut out = format!("dist {VERSION}\n");
    for &(s, m) in d.entries() {
        let _ = writeln!(out, "{} {}", model.label(s), m.to_canonical_string());
    }
    out
}
