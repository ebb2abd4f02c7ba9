//! GUI action model and the line-delimited JSON record format.
//!
//! One record per line:
//!
//! ```text
//! {"image": "a.pgm", "task_id": "t1",
//!  "predicted": {"type": "click", "points": [[10, 20]]},
//!  "target":    {"type": "click", "points": [[12, 22]]}}
//! ```
//!
//! `predicted` may be omitted (suite index files carry only targets).
//! Unknown fields are ignored.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::Point;

/// Interaction action type. `Other` names are lowercase and nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionType {
    Click,
    Drag,
    Scroll,
    TypeText,
    Other(String),
}

impl ActionType {
    /// Parse a type tag, case-insensitively. Returns `None` for an empty name.
    pub fn parse(name: &str) -> Option<Self> {
        let norm = name.trim().to_lowercase();
        Some(match norm.as_str() {
            "" => return None,
            "click" => ActionType::Click,
            "drag" => ActionType::Drag,
            "scroll" => ActionType::Scroll,
            "type" => ActionType::TypeText,
            _ => ActionType::Other(norm),
        })
    }

    pub fn as_str(&self) -> &str {
        match self {
            ActionType::Click => "click",
            ActionType::Drag => "drag",
            ActionType::Scroll => "scroll",
            ActionType::TypeText => "type",
            ActionType::Other(name) => name,
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ActionType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ActionType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ActionType::parse(&name).ok_or_else(|| serde::de::Error::custom("action type must be nonempty"))
    }
}

/// An action type with its ordered operation coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub kind: ActionType,
    pub points: Vec<Point>,
}

impl Action {
    pub fn new(kind: ActionType, points: Vec<Point>) -> Self {
        Self { kind, points }
    }

    pub fn click(x: f64, y: f64) -> Self {
        Self::new(ActionType::Click, vec![Point::new(x, y)])
    }

    pub fn drag(from: Point, to: Point) -> Self {
        Self::new(ActionType::Drag, vec![from, to])
    }

    pub fn primary_point(&self) -> Option<&Point> {
        self.points.first()
    }

    /// Copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.kind.clone(), self.points.iter().map(|p| p.scaled(factor)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct WireAction {
    #[serde(rename = "type")]
    kind: ActionType,
    #[serde(default)]
    points: Vec<Vec<f64>>,
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireAction {
            kind: self.kind.clone(),
            points: self.points.iter().map(|p| vec![p.x, p.y]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = WireAction::deserialize(d)?;
        let points = wire
            .points
            .into_iter()
            .map(|p| match p.as_slice() {
                [x, y] => Ok(Point::new(*x, *y)),
                _ => Err(serde::de::Error::custom("point must have 2 coordinates")),
            })
            .collect::<Result<_, _>>()?;
        Ok(Action::new(wire.kind, points))
    }
}

/// Arity or range problem found by [`validate_action`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Arity { kind: ActionType, expected: &'static str, found: usize },
    PointOutOfRange { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Arity { kind, expected, found } => {
                write!(f, "{kind} requires {expected} (found {found})")
            }
            Violation::PointOutOfRange { index } => write!(f, "point out of range (index {index})"),
        }
    }
}

/// Every arity and coordinate-range violation of `action`.
pub fn validate_action(action: &Action) -> Vec<Violation> {
    let k = action.points.len();
    let arity = match action.kind {
        ActionType::Click | ActionType::Scroll if k != 1 => Some("1 point"),
        ActionType::Drag if k != 2 => Some("2 points"),
        ActionType::TypeText if k > 1 => Some("at most 1 point"),
        _ => None,
    };
    let mut out: Vec<Violation> = arity
        .map(|expected| Violation::Arity {
            kind: action.kind.clone(),
            expected,
            found: k,
        })
        .into_iter()
        .collect();
    out.extend(
        action
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| !(p.is_finite() && p.x >= 0.0 && p.y >= 0.0))
            .map(|(index, _)| Violation::PointOutOfRange { index }),
    );
    out
}

/// One interaction step: screenshot reference plus predicted and target actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Action>,
    pub target: Action,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Json { line, .. } | ParseError::Schema { line, .. } => *line,
        }
    }
}

/// Parse one line (1-based `line` number for diagnostics).
pub fn parse_record_line(text: &str, line: usize) -> Result<StepRecord, ParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line,
        message: e.to_string(),
    })?;
    serde_json::from_value(value).map_err(|e| ParseError::Schema {
        line,
        message: e.to_string(),
    })
}

/// Parse a JSONL stream, skipping blank lines. Each record carries the line
/// it came from. Fails on the first bad line.
pub fn parse_records(stream: &str) -> Result<Vec<(usize, StepRecord)>, ParseError> {
    nonblank_lines(stream)
        .map(|(line, text)| parse_record_line(text, line).map(|r| (line, r)))
        .collect()
}

/// `(1-based line number, text)` for every nonblank line.
pub fn nonblank_lines(stream: &str) -> impl Iterator<Item = (usize, &str)> {
    stream
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

pub fn serialize_records(records: &[StepRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}
