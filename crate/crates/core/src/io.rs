//! Model lookup by name and JSON files for joint states.
//!
//! Joint state layout:
//!
//! ```json
//! { "model_A": "polygon:7", "model_B": "polygon:7", "matrix": [[1, 0, 0], ...] }
//! ```
//!
//! Models are given by name (`polygon:N`, `classical:N`, `house`) or inline.
//! Matrix entries are numbers or `[numerator, denominator]` pairs.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bipartite::JointState;
use crate::error::{GptError, Result};
use crate::gpt::ModelSpec;
use crate::{house, polygon};

/// Built-in model from its name, if it is one.
pub fn builtin_model(name: &str) -> Result<Option<ModelSpec>> {
    let parse_n = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| GptError::InvalidParameter(format!("bad size in model name `{name}`")))
    };
    if name == "house" {
        Ok(Some(house::house_model()))
    } else if let Some(n) = name.strip_prefix("polygon:") {
        polygon::polygon(parse_n(n)?).map(Some)
    } else if let Some(n) = name.strip_prefix("classical:") {
        ModelSpec::classical(parse_n(n)?).map(Some)
    } else {
        Ok(None)
    }
}

/// Built-in model name, or else a path to a model JSON file.
pub fn resolve_model(spec: &str) -> Result<ModelSpec> {
    if let Some(m) = builtin_model(spec)? {
        return Ok(m);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| GptError::Io(format!("{spec}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| GptError::Io(format!("{spec}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ModelRef {
    Name(String),
    Inline(ModelSpec),
}

impl ModelRef {
    fn resolve(self) -> Result<ModelSpec> {
        match self {
            ModelRef::Name(n) => builtin_model(&n)?.ok_or_else(|| GptError::Io(format!("unknown model `{n}`"))),
            ModelRef::Inline(m) => Ok(m),
        }
    }

    fn for_model(m: &ModelSpec) -> Self {
        match builtin_model(m.name()) {
            Ok(Some(b)) if &b == m => ModelRef::Name(m.name().to_string()),
            _ => ModelRef::Inline(m.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Float(f64),
    Rational([i64; 2]),
}

impl Entry {
    fn value(self) -> Result<f64> {
        match self {
            Entry::Float(x) => Ok(x),
            Entry::Rational([_, 0]) => Err(GptError::Io("zero denominator".into())),
            Entry::Rational([p, q]) => Ok(p as f64 / q as f64),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JointStateFile {
    #[serde(rename = "model_A")]
    model_a: ModelRef,
    #[serde(rename = "model_B")]
    model_b: ModelRef,
    matrix: Vec<Vec<Entry>>,
}

pub fn parse_joint_state(text: &str) -> Result<JointState> {
    let f: JointStateFile = serde_json::from_str(text).map_err(|e| GptError::Io(e.to_string()))?;
    let rows: Vec<Vec<f64>> = f
        .matrix
        .into_iter()
        .map(|r| r.into_iter().map(Entry::value).collect())
        .collect::<Result<_>>()?;
    let matrix = crate::linalg::matrix_from_rows(&rows).ok_or_else(|| GptError::Io("ragged or empty matrix".into()))?;
    let model_a = Arc::new(f.model_a.resolve()?);
    let model_b = if let ModelRef::Name(_) = &f.model_b {
        let m = f.model_b.resolve()?;
        if m == *model_a {
            model_a.clone()
        } else {
            Arc::new(m)
        }
    } else {
        Arc::new(f.model_b.resolve()?)
    };
    JointState::new(matrix, model_a, model_b)
}

pub fn joint_state_to_json(state: &JointState) -> String {
    let f = JointStateFile {
        model_a: ModelRef::for_model(state.model_a()),
        model_b: ModelRef::for_model(state.model_b()),
        matrix: crate::linalg::matrix_to_rows(state.matrix())
            .into_iter()
            .map(|r| r.into_iter().map(Entry::Float).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&f).expect("plain data serializes")
}

pub fn load_joint_state(path: impl AsRef<Path>) -> Result<JointState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GptError::Io(format!("{}: {e}", path.display())))?;
    parse_joint_state(&text)
}

pub fn save_joint_state(state: &JointState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, joint_state_to_json(state)).map_err(|e| GptError::Io(format!("{}: {e}", path.display())))
}
