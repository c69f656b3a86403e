//! Single systems: vectors, models, measurements.
//!
//! States and effects share the [`Vector`] type. Which role a vector plays is
//! decided by context; the pairing `e(ω)` is always the Euclidean inner
//! product.

use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GptError, Result};
use crate::linalg;
use crate::DEFAULT_TOL;

/// Element of a finite-dimensional real vector space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GptError::InvalidParameter("vector must be non-empty".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(GptError::NonFinite(i));
        }
        Ok(Self(coords))
    }

    /// Build from literal coordinates. Panics on empty or non-finite input.
    pub fn from_slice(coords: &[f64]) -> Self {
        Self::new(coords.to_vec()).expect("finite, non-empty coordinates")
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|c| a * c).collect())
    }

    pub fn max_abs_diff(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Vector, tol: f64) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = GptError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GptError::DimensionMismatch { expected, found })
    }
}

/// Outcome probability `e(ω)`.
pub fn probability(e: &Vector, omega: &Vector) -> Result<f64> {
    e.dot(omega)
}

/// A single-system model: extremal states, extremal effects and the unit effect.
///
/// `ray_extremal[k]` records whether `extremal_effects[k]` lies on an extremal
/// ray of the effect cone. Effects that are extremal in the set of proper
/// effects without being ray-extremal (the complements `u - e_i` of odd
/// polygons) carry `false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecFile", into = "ModelSpecFile")]
pub struct ModelSpec {
    name: String,
    dim: usize,
    extremal_states: Vec<Vector>,
    extremal_effects: Vec<Vector>,
    ray_extremal: Vec<bool>,
    unit_effect: Vector,
    state_labels: Vec<String>,
    effect_labels: Vec<String>,
}

/// JSON layout of a [`ModelSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecFile {
    name: String,
    dim: usize,
    extremal_states: Vec<Vector>,
    extremal_effects: Vec<Vector>,
    unit_effect: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ray_extremal: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effect_labels: Option<Vec<String>>,
}

impl TryFrom<ModelSpecFile> for ModelSpec {
    type Error = GptError;

    fn try_from(f: ModelSpecFile) -> Result<Self> {
        let n_eff = f.extremal_effects.len();
        let mut m = ModelSpec::new(
            f.name,
            f.extremal_states,
            f.extremal_effects,
            f.ray_extremal.unwrap_or_else(|| vec![true; n_eff]),
            f.unit_effect,
        )?;
        check_dims(f.dim, m.dim)?;
        if let Some(labels) = f.state_labels {
            check_dims(m.extremal_states.len(), labels.len())?;
            m.state_labels = labels;
        }
        if let Some(labels) = f.effect_labels {
            check_dims(m.extremal_effects.len(), labels.len())?;
            m.effect_labels = labels;
        }
        Ok(m)
    }
}

impl From<ModelSpec> for ModelSpecFile {
    fn from(m: ModelSpec) -> Self {
        let all_ray = m.ray_extremal.iter().all(|&r| r);
        ModelSpecFile {
            name: m.name,
            dim: m.dim,
            extremal_states: m.extremal_states,
            extremal_effects: m.extremal_effects,
            unit_effect: m.unit_effect,
            ray_extremal: (!all_ray).then_some(m.ray_extremal),
            state_labels: Some(m.state_labels),
            effect_labels: Some(m.effect_labels),
        }
    }
}

impl ModelSpec {
    /// Assemble a model. Only shapes are checked here; use [`ModelSpec::validate`]
    /// for the probabilistic invariants.
    pub fn new(
        name: impl Into<String>,
        extremal_states: Vec<Vector>,
        extremal_effects: Vec<Vector>,
        ray_extremal: Vec<bool>,
        unit_effect: Vector,
    ) -> Result<Self> {
        let dim = unit_effect.dim();
        if extremal_states.is_empty() {
            return Err(GptError::InvalidParameter("model needs at least one state".into()));
        }
        for v in extremal_states.iter().chain(&extremal_effects) {
            check_dims(dim, v.dim())?;
        }
        check_dims(extremal_effects.len(), ray_extremal.len())?;
        let state_labels = (1..=extremal_states.len()).map(|i| format!("w{i}")).collect();
        let effect_labels = (1..=extremal_effects.len()).map(|i| format!("e{i}")).collect();
        Ok(Self {
            name: name.into(),
            dim,
            extremal_states,
            extremal_effects,
            ray_extremal,
            unit_effect,
            state_labels,
            effect_labels,
        })
    }

    pub(crate) fn with_labels(mut self, states: Vec<String>, effects: Vec<String>) -> Self {
        debug_assert_eq!(states.len(), self.extremal_states.len());
        debug_assert_eq!(effects.len(), self.extremal_effects.len());
        self.state_labels = states;
        self.effect_labels = effects;
        self
    }

    /// Classical system with `n` perfectly distinguishable pure states: the
    /// simplex, with the indicator functions as extremal effects.
    pub fn classical(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GptError::InvalidParameter("classical system needs n >= 1".into()));
        }
        let basis: Vec<Vector> = (0..n)
            .map(|i| {
                let mut c = vec![0.0; n];
                c[i] = 1.0;
                Vector(c)
            })
            .collect();
        Self::new(format!("classical:{n}"), basis.clone(), basis, vec![true; n], Vector(vec![1.0; n]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extremal_states(&self) -> &[Vector] {
        &self.extremal_states
    }

    pub fn extremal_effects(&self) -> &[Vector] {
        &self.extremal_effects
    }

    pub fn ray_extremal_flags(&self) -> &[bool] {
        &self.ray_extremal
    }

    /// Extremal effects that also lie on extremal rays of the effect cone.
    pub fn ray_extremal_effects(&self) -> Vec<&Vector> {
        self.extremal_effects
            .iter()
            .zip(&self.ray_extremal)
            .filter_map(|(e, &r)| r.then_some(e))
            .collect()
    }

    pub fn unit_effect(&self) -> &Vector {
        &self.unit_effect
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn effect_labels(&self) -> &[String] {
        &self.effect_labels
    }

    /// `0 - tol <= e(ω) <= 1 + tol` for every extremal state.
    pub fn is_proper_effect(&self, e: &Vector, tol: f64) -> Result<bool> {
        check_dims(self.dim, e.dim())?;
        Ok(self.extremal_states.iter().all(|w| {
            let p = e.dot(w).expect("dims checked");
            (-tol..=1.0 + tol).contains(&p)
        }))
    }

    /// Vector lies in the state cone: nonnegative on every extremal effect.
    pub fn in_state_cone(&self, v: &Vector, tol: f64) -> Result<bool> {
        check_dims(self.dim, v.dim())?;
        Ok(self
            .extremal_effects
            .iter()
            .all(|e| e.dot(v).expect("dims checked") >= -tol))
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(DEFAULT_TOL)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let mut issues = Vec::new();
        for (i, w) in self.extremal_states.iter().enumerate() {
            let norm = self.unit_effect.dot(w).expect("dims checked at construction");
            if (norm - 1.0).abs() > tol {
                issues.push(ValidationIssue::StateNotNormalized { state: i, value: norm });
            }
        }
        for (k, e) in self.extremal_effects.iter().enumerate() {
            for (i, w) in self.extremal_states.iter().enumerate() {
                let p = e.dot(w).expect("dims checked at construction");
                if !(-tol..=1.0 + tol).contains(&p) {
                    issues.push(ValidationIssue::EffectOutOfRange { effect: k, state: i, value: p });
                }
            }
        }
        let states = DMatrix::from_fn(self.extremal_states.len(), self.dim, |i, j| {
            self.extremal_states[i].coords()[j]
        });
        let r = linalg::rank(&states, 1e-8);
        if r != self.dim {
            issues.push(ValidationIssue::NotFullDimensional { rank: r, dim: self.dim });
        }
        ValidationReport { issues }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    StateNotNormalized { state: usize, value: f64 },
    EffectOutOfRange { effect: usize, state: usize, value: f64 },
    /// Linear span of the extremal states is smaller than the ambient space.
    NotFullDimensional { rank: usize, dim: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StateNotNormalized { state, value } => {
                write!(f, "state {} has u(w) = {value}", state + 1)
            }
            Self::EffectOutOfRange { effect, state, value } => {
                write!(f, "effect {} on state {} gives probability {value}", effect + 1, state + 1)
            }
            Self::NotFullDimensional { rank, dim } => {
                write!(f, "extremal states span rank {rank} in dimension {dim}")
            }
        }
    }
}

/// Every violated model invariant. Empty iff the model is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// A set of effects summing to the unit effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    effects: Vec<Vector>,
}

impl Measurement {
    pub fn new(effects: Vec<Vector>, model: &ModelSpec) -> Result<Self> {
        Self::new_with_tol(effects, model, DEFAULT_TOL)
    }

    pub fn new_with_tol(effects: Vec<Vector>, model: &ModelSpec, tol: f64) -> Result<Self> {
        let m = Self { effects };
        m.validate_against(model, tol)?;
        Ok(m)
    }

    /// `{e, u - e}`.
    pub fn dichotomic(e: &Vector, model: &ModelSpec) -> Result<Self> {
        check_dims(model.dim(), e.dim())?;
        Self::new(vec![e.clone(), model.unit_effect() - e], model)
    }

    /// Trivial one-outcome measurement `{u}`.
    pub fn trivial(model: &ModelSpec) -> Self {
        Self { effects: vec![model.unit_effect().clone()] }
    }

    pub fn effects(&self) -> &[Vector] {
        &self.effects
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn validate_against(&self, model: &ModelSpec, tol: f64) -> Result<()> {
        if self.effects.is_empty() {
            return Err(GptError::InvalidMeasurement("no effects".into()));
        }
        let mut sum = Vector::zeros(model.dim());
        for (k, e) in self.effects.iter().enumerate() {
            check_dims(model.dim(), e.dim())?;
            if !model.is_proper_effect(e, tol)? {
                return Err(GptError::InvalidMeasurement(format!(
                    "effect {} is not proper for `{}`",
                    k + 1,
                    model.name()
                )));
            }
            sum = &sum + e;
        }
        if !sum.approx_eq(model.unit_effect(), tol) {
            return Err(GptError::InvalidMeasurement(format!(
                "effects sum to {:?}, not the unit effect",
                sum.coords()
            )));
        }
        Ok(())
    }

    pub fn outcome_probabilities(&self, omega: &Vector) -> Result<Vec<f64>> {
        self.effects.iter().map(|e| e.dot(omega)).collect()
    }

    /// Apply a linear map to every effect (used for adjoint pullbacks).
    pub(crate) fn map_effects(&self, f: impl Fn(&Vector) -> Vector) -> Self {
        Self { effects: self.effects.iter().map(f).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::polygon;
    use proptest::prelude::*;

    #[test]
    fn unit_effect_on_normalized_state_is_one() {
        let m = polygon(6).unwrap();
        for w in m.extremal_states() {
            assert!((probability(m.unit_effect(), w).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_effect_gives_zero() {
        let m = polygon(5).unwrap();
        assert_eq!(probability(&Vector::zeros(3), &m.extremal_states()[2]).unwrap(), 0.0);
    }

    #[test]
    fn triangle_effect_certain_on_its_state() {
        // (1/3)(1 + r_3^2 cos 0) with r_3^2 = 2.
        let m = polygon(3).unwrap();
        let p = probability(&m.extremal_effects()[0], &m.extremal_states()[0]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Vector::from_slice(&[1.0, 0.0]);
        let b = Vector::from_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(
            probability(&a, &b),
            Err(GptError::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(Vector::new(vec![0.0, f64::NAN]), Err(GptError::NonFinite(1)));
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    #[test]
    fn scaled_effect_flagged_out_of_range() {
        let m = polygon(4).unwrap();
        let mut effects = m.extremal_effects().to_vec();
        effects[0] = effects[0].scale(2.0);
        let bad = ModelSpec::new("bad", m.extremal_states().to_vec(), effects, vec![true; 4], m.unit_effect().clone())
            .unwrap();
        let report = bad.validate();
        assert!(!report.is_valid());
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::EffectOutOfRange { effect: 0, .. })));
    }

    #[test]
    fn degenerate_state_space_flagged() {
        let w = Vector::from_slice(&[0.0, 0.0, 1.0]);
        let m = ModelSpec::new("point", vec![w.clone(), w], vec![], vec![], Vector::from_slice(&[0.0, 0.0, 1.0]))
            .unwrap();
        assert!(m
            .validate()
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NotFullDimensional { rank: 1, dim: 3 })));
    }

    #[test]
    fn proper_effects() {
        let m = polygon(5).unwrap();
        let e1 = &m.extremal_effects()[0];
        let bar = m.unit_effect() - e1;
        assert!(m.is_proper_effect(&bar, DEFAULT_TOL).unwrap());
        assert!(!m.is_proper_effect(&m.unit_effect().scale(1.5), DEFAULT_TOL).unwrap());
        assert!(!m.is_proper_effect(&e1.scale(-1.0), DEFAULT_TOL).unwrap());
        assert!(m.is_proper_effect(&Vector::zeros(2), DEFAULT_TOL).is_err());
    }

    #[test]
    fn measurement_must_sum_to_unit() {
        let m = polygon(4).unwrap();
        let e = m.extremal_effects();
        assert!(Measurement::new(vec![e[0].clone(), e[1].clone()], &m).is_err());
        assert!(Measurement::new(vec![e[0].clone(), e[2].clone()], &m).is_ok());
        assert!(Measurement::new(vec![], &m).is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        let m = polygon(5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.state_labels()[0], "w1");
    }

    #[test]
    fn classical_model_is_valid() {
        for n in 1..6 {
            assert!(ModelSpec::classical(n).unwrap().validate().is_valid());
        }
    }

    proptest! {
        #[test]
        fn probability_is_bilinear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            e in prop::array::uniform3(-1.0f64..1.0),
            f in prop::array::uniform3(-1.0f64..1.0),
            w in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let (e, f, w) = (Vector::from_slice(&e), Vector::from_slice(&f), Vector::from_slice(&w));
            let lhs = probability(&(&e.scale(a) + &f.scale(b)), &w).unwrap();
            let rhs = a * probability(&e, &w).unwrap() + b * probability(&f, &w).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn measurement_probabilities_sum_to_one(n in 3usize..20, i in 0usize..20, mix in 0.0f64..1.0, s in 0usize..20) {
            let m = polygon(n).unwrap();
            let e = &m.extremal_effects()[i % n];
            let meas = Measurement::dichotomic(e, &m).unwrap();
            let w = &m.extremal_states()[s % n].scale(mix) + &m.extremal_states()[(s + 1) % n].scale(1.0 - mix);
            let probs = meas.outcome_probabilities(&w).unwrap();
            prop_assert!(probs.iter().all(|p| (-DEFAULT_TOL..=1.0 + DEFAULT_TOL).contains(p)));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
