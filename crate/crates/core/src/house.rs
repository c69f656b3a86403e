//! The house-shaped model: five pure states forming a square topped by a
//! triangular roof. It is strongly self-dual, with an extremal joint state that is
//! not an inner product state and violates the quadratic bound of Q1.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use serde::Serialize;

use crate::bipartite::JointState;
use crate::correlations::{self, correlations_from_state, CorrelationTable};
use crate::error::{GptError, Result};
use crate::gpt::{Measurement, ModelSpec, Vector};
use crate::io;
use crate::q1::{self, ConditionReport};
use crate::DEFAULT_TOL;

const HOUSE_STATE_JSON: &str = include_str!("../assets/house_joint_state.json");

const STATES: [[f64; 3]; 5] = [
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [-1.0, 0.0, 1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
];

pub fn house_model() -> ModelSpec {
    let states: Vec<Vector> = STATES.iter().map(|s| Vector::from_slice(s)).collect();
    let effects: Vec<Vector> = states
        .iter()
        .enumerate()
        .map(|(i, w)| w.scale(if i < 3 { 0.5 } else { 1.0 / 3.0 }))
        .collect();
    ModelSpec::new("house", states, effects, vec![true; 5], Vector::from_slice(&[0.0, 0.0, 1.0]))
        .expect("fixed shapes")
}

/// The extremal, non-inner-product joint state of two house systems.
pub fn house_joint_state() -> JointState {
    io::parse_joint_state(HOUSE_STATE_JSON).expect("bundled asset is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HouseDemo {
    pub uffink: f64,
    pub chsh: f64,
    pub conditions: ConditionReport,
    pub table: CorrelationTable,
}

/// Settings `x: {e_5, e_3}`, `y: {e_2, e_3}` on the house joint state.
pub fn house_uffink_demo() -> Result<HouseDemo> {
    let state = house_joint_state();
    let m: Arc<ModelSpec> = state.model_a().clone();
    let e = m.extremal_effects();
    let dich = |k: usize| Measurement::dichotomic(&e[k - 1], &m);
    let alice = [dich(5)?, dich(3)?];
    let bob = [dich(2)?, dich(3)?];
    let table = correlations_from_state(&state, &alice, &bob, DEFAULT_TOL)?;
    let uffink = correlations::uffink(&table)?;
    if (uffink - 17.0 / 4.0).abs() > 1e-10 {
        return Err(GptError::Consistency(format!("quadratic functional is {uffink}, expected 17/4")));
    }
    let chsh = correlations::chsh_max_over_relabellings(&table)?;
    if chsh > 2.0 * SQRT_2 + 1e-10 {
        return Err(GptError::Consistency(format!("CHSH value {chsh} exceeds 2√2")));
    }
    let conditions = q1::q1_necessary_conditions(&table, DEFAULT_TOL)?;
    Ok(HouseDemo { uffink, chsh, conditions, table })
}
