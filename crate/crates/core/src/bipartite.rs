//! Joint states of two systems as `d_A x d_B` matrices.
//!
//! Rows index system A and columns system B, so the probability of outcomes
//! `e` on A and `f` on B is `eᵀ M f`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GptError, Result};
use crate::gpt::{check_dims, Measurement, ModelSpec, Vector};
use crate::linalg;

/// Singular values below this fraction of the largest count as zero in the
/// active-constraint rank test.
pub const EXTREMALITY_RANK_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct JointState {
    matrix: DMatrix<f64>,
    model_a: Arc<ModelSpec>,
    model_b: Arc<ModelSpec>,
}

impl JointState {
    /// Only shapes are checked; see [`JointState::in_max_tensor_product`].
    pub fn new(matrix: DMatrix<f64>, model_a: Arc<ModelSpec>, model_b: Arc<ModelSpec>) -> Result<Self> {
        check_dims(model_a.dim(), matrix.nrows())?;
        check_dims(model_b.dim(), matrix.ncols())?;
        if let Some(i) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(GptError::NonFinite(i));
        }
        Ok(Self { matrix, model_a, model_b })
    }

    /// `ω_A ⊗ ω_B`.
    pub fn product(wa: &Vector, wb: &Vector, model_a: Arc<ModelSpec>, model_b: Arc<ModelSpec>) -> Result<Self> {
        let m = wa.to_dvector() * wb.to_dvector().transpose();
        Self::new(m, model_a, model_b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn model_a(&self) -> &Arc<ModelSpec> {
        &self.model_a
    }

    pub fn model_b(&self) -> &Arc<ModelSpec> {
        &self.model_b
    }

    /// `(e ⊗ f)(ω) = eᵀ M f`.
    pub fn joint_probability(&self, e: &Vector, f: &Vector) -> Result<f64> {
        check_dims(self.matrix.nrows(), e.dim())?;
        check_dims(self.matrix.ncols(), f.dim())?;
        Ok(e.to_dvector().dot(&(&self.matrix * f.to_dvector())))
    }

    pub fn normalization(&self) -> f64 {
        self.joint_probability(self.model_a.unit_effect(), self.model_b.unit_effect())
            .expect("unit effects match the models")
    }

    /// Smallest `eᵀ M f` over pairs of extremal effects.
    pub fn min_local_positivity(&self) -> f64 {
        let mut min = f64::INFINITY;
        for e in self.model_a.extremal_effects() {
            let row = e.to_dvector().transpose() * &self.matrix;
            for f in self.model_b.extremal_effects() {
                min = min.min(row.dot(&f.to_dvector().transpose()));
            }
        }
        min
    }

    /// Normalized and nonnegative on every pair of extremal effects. Effects
    /// are convex combinations of extremal ones and the zero / unit effect, so
    /// the finite check is sufficient.
    pub fn in_max_tensor_product(&self, tol: f64) -> bool {
        (self.normalization() - 1.0).abs() <= tol && self.min_local_positivity() >= -tol
    }

    fn active_constraint_rows(&self, tol: f64) -> Vec<DVector<f64>> {
        let mut rows = Vec::new();
        for e in self.model_a.extremal_effects() {
            for f in self.model_b.extremal_effects() {
                let p = self.joint_probability(e, f).expect("dims checked");
                if p <= tol {
                    rows.push(linalg::kron(e.coords(), f.coords()));
                }
            }
        }
        rows.push(linalg::kron(
            self.model_a.unit_effect().coords(),
            self.model_b.unit_effect().coords(),
        ));
        rows
    }

    /// Rank of `{e ⊗ f : eᵀ M f <= tol} ∪ {u ⊗ u}`.
    pub fn active_constraint_rank(&self, tol: f64) -> usize {
        let rows = self.active_constraint_rows(tol);
        let ncols = self.matrix.nrows() * self.matrix.ncols();
        linalg::rank(&linalg::rows_to_matrix(&rows, ncols), EXTREMALITY_RANK_CUTOFF)
    }

    /// A member of the maximal tensor product is extremal iff its active
    /// constraints pin it down uniquely, i.e. they span `R^{d_A d_B}`.
    pub fn is_extremal(&self, tol: f64) -> Result<bool> {
        if !self.in_max_tensor_product(tol) {
            return Err(GptError::NotInMaxTensorProduct);
        }
        Ok(self.active_constraint_rank(tol) == self.matrix.nrows() * self.matrix.ncols())
    }

    pub fn is_inner_product_state(&self, tol: f64) -> Result<InnerProductReport> {
        if self.model_a != self.model_b {
            return Err(GptError::DissimilarModels(
                self.model_a.name().to_string(),
                self.model_b.name().to_string(),
            ));
        }
        let asymmetry = linalg::asymmetry(&self.matrix);
        let min_eigenvalue = linalg::symmetric_eigenvalues(&self.matrix)[0];
        let scale = self.matrix.norm();
        Ok(InnerProductReport {
            symmetric: asymmetry <= tol,
            psd: min_eigenvalue >= -tol * scale,
            asymmetry,
            min_eigenvalue,
        })
    }

    /// Alice's reduced state `e ↦ (e ⊗ u)(ω)`.
    pub fn marginal_a(&self) -> Vector {
        Vector::from_dvector(&(&self.matrix * self.model_b.unit_effect().to_dvector())).expect("finite")
    }

    /// Bob's reduced state `f ↦ (u ⊗ f)(ω)`.
    pub fn marginal_b(&self) -> Vector {
        Vector::from_dvector(&(self.matrix.transpose() * self.model_a.unit_effect().to_dvector())).expect("finite")
    }

    /// Bob's unnormalized state conditioned on Alice's outcome `e`.
    pub fn conditional_state_b(&self, e: &Vector) -> Result<Vector> {
        check_dims(self.matrix.nrows(), e.dim())?;
        Vector::from_dvector(&(self.matrix.transpose() * e.to_dvector()))
    }

    /// `λ·self + (1-λ)·other`.
    pub fn mix(&self, other: &JointState, lambda: f64) -> Result<JointState> {
        if self.model_a != other.model_a || self.model_b != other.model_b {
            return Err(GptError::DissimilarModels(
                self.model_a.name().to_string(),
                other.model_a.name().to_string(),
            ));
        }
        JointState::new(
            &self.matrix * lambda + &other.matrix * (1.0 - lambda),
            self.model_a.clone(),
            self.model_b.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerProductReport {
    pub symmetric: bool,
    pub psd: bool,
    /// `max |M_ij - M_ji|`.
    pub asymmetry: f64,
    /// Smallest eigenvalue of `(M + Mᵀ)/2`.
    pub min_eigenvalue: f64,
}

impl InnerProductReport {
    pub fn is_inner_product(&self) -> bool {
        self.symmetric && self.psd
    }
}

/// A linear map `τ: V_B -> V_B`, acting on Bob's side of a joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    matrix: DMatrix<f64>,
}

impl LocalMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_dims(matrix.nrows(), matrix.ncols())?;
        if let Some(i) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(GptError::NonFinite(i));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    /// Discard the input and prepare `state`: `τ = ω uᵀ`.
    pub fn prepare(state: &Vector, model: &ModelSpec) -> Self {
        Self { matrix: state.to_dvector() * model.unit_effect().to_dvector().transpose() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `τ(ω)`.
    pub fn apply(&self, omega: &Vector) -> Result<Vector> {
        check_dims(self.dim(), omega.dim())?;
        Vector::from_dvector(&(&self.matrix * omega.to_dvector()))
    }

    /// `τ†(e) = τᵀ e`, so that `τ†(e)(ω) = e(τ(ω))`.
    pub fn adjoint(&self, e: &Vector) -> Result<Vector> {
        check_dims(self.dim(), e.dim())?;
        Vector::from_dvector(&(self.matrix.transpose() * e.to_dvector()))
    }

    /// Measurement with outcomes `τ†(f_1), ..., τ†(f_r)`.
    pub fn pull_back(&self, m: &Measurement) -> Result<Measurement> {
        for f in m.effects() {
            check_dims(self.dim(), f.dim())?;
        }
        Ok(m.map_effects(|f| self.adjoint(f).expect("dims checked")))
    }

    /// Maps the state cone into itself and normalized states to normalized
    /// states, checked on the extremal states of `model`.
    pub fn check(&self, model: &ModelSpec, tol: f64) -> Result<()> {
        check_dims(model.dim(), self.dim())?;
        for (i, w) in model.extremal_states().iter().enumerate() {
            let image = self.apply(w)?;
            let norm = model.unit_effect().dot(&image)?;
            if (norm - 1.0).abs() > tol {
                return Err(GptError::InvalidLocalMap(format!(
                    "state {} maps to normalization {norm}",
                    i + 1
                )));
            }
            if !model.in_state_cone(&image, tol)? {
                return Err(GptError::InvalidLocalMap(format!(
                    "state {} leaves the state cone",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// `(1 ⊗ τ)(ω)` without validating `τ`.
    pub fn apply_to_joint_unchecked(&self, omega: &JointState) -> Result<JointState> {
        check_dims(omega.matrix().ncols(), self.dim())?;
        JointState::new(
            omega.matrix() * self.matrix.transpose(),
            omega.model_a().clone(),
            omega.model_b().clone(),
        )
    }
}

/// `(1 ⊗ τ)(σ)`, i.e. matrix `σ τᵀ`. `τ` must be a valid local map on Bob's
/// system.
pub fn push_local_map(sigma: &JointState, tau: &LocalMap, tol: f64) -> Result<JointState> {
    tau.check(sigma.model_b(), tol)?;
    tau.apply_to_joint_unchecked(sigma)
}
