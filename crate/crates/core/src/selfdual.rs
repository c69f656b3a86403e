//! Linear isomorphisms from the effect cone onto the state cone, and the
//! joint states they induce.
//!
//! A linear bijection `T` maps the effect cone onto the state cone iff it
//! sends each extremal effect ray onto an extremal state ray, bijectively.
//! Returned maps are normalized to `u·T(u) = 1`.

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bipartite::JointState;
use crate::correlations::{self, CorrelationTable};
use crate::error::{GptError, Result};
use crate::gpt::{Measurement, ModelSpec, Vector};
use crate::linalg;

/// Models with at most this many extremal rays are searched exhaustively;
/// larger ones only try rotations and reflections about the `z` axis.
pub const EXHAUSTIVE_RAY_CAP: usize = 16;

const RAY_TOL: f64 = 1e-9;

fn unit_rays(vs: &[&Vector]) -> Vec<DVector<f64>> {
    vs.iter().map(|v| v.to_dvector().normalize()).collect()
}

/// Index of the state ray that `v` lies on with a positive coefficient.
fn matching_ray(v: &DVector<f64>, rays: &[DVector<f64>]) -> Option<usize> {
    let norm = v.norm();
    if norm <= RAY_TOL {
        return None;
    }
    let v = v / norm;
    rays.iter().position(|r| (&v - r).amax() <= 1e-7)
}

/// `T` maps every effect ray onto a distinct state ray and is invertible.
fn is_cone_isomorphism(t: &DMatrix<f64>, effects: &[DVector<f64>], states: &[DVector<f64>]) -> bool {
    if linalg::rank(t, 1e-10) < t.nrows() {
        return false;
    }
    let mut used = vec![false; states.len()];
    for e in effects {
        match matching_ray(&(t * e), states) {
            Some(k) if !used[k] => used[k] = true,
            _ => return false,
        }
    }
    true
}

fn normalize(t: DMatrix<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
    let c = u.dot(&(&t * u));
    (c > RAY_TOL).then(|| t / c)
}

/// `d` effects forming a basis plus one more effect with no zero coordinate in
/// that basis. Returns the inverse basis matrix and those coordinates.
fn general_position_anchors(effects: &[DVector<f64>], d: usize) -> Option<(DMatrix<f64>, DVector<f64>)> {
    for anchors in (0..effects.len()).combinations(d) {
        let e = DMatrix::from_columns(&anchors.iter().map(|&i| effects[i].clone()).collect::<Vec<_>>());
        let Some(e_inv) = e.clone().try_inverse() else { continue };
        if linalg::rank(&e, 1e-10) < d {
            continue;
        }
        for extra in (0..effects.len()).filter(|k| !anchors.contains(k)) {
            let c = &e_inv * &effects[extra];
            if c.iter().all(|x| x.abs() > 1e-9) {
                return Some((e_inv, c));
            }
        }
    }
    None
}

fn sort_dedup(mut found: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    let key = |m: &DMatrix<f64>| m.transpose().iter().map(|x| (x * 1e8).round() as i64).collect::<Vec<_>>();
    found.sort_by_key(key);
    found.dedup_by(|a, b| (&*a - &*b).amax() <= RAY_TOL);
    found
}

fn exhaustive(effects: &[DVector<f64>], states: &[DVector<f64>], u: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let d = u.len();
    let k = effects.len();
    if k == d {
        // Simplicial cones: every ray bijection extends, with free positive
        // scales; fix them by sending each effect to its normalized state.
        let e_inv = match DMatrix::from_columns(effects).try_inverse() {
            Some(m) => m,
            None => return Vec::new(),
        };
        return (0..k)
            .permutations(k)
            .filter_map(|perm| {
                let s = DMatrix::from_columns(&perm.iter().map(|&p| states[p].clone()).collect::<Vec<_>>());
                normalize(s * &e_inv, u)
            })
            .filter(|t| is_cone_isomorphism(t, effects, states))
            .collect();
    }
    let Some((e_inv, c)) = general_position_anchors(effects, d) else {
        return Vec::new();
    };
    let found: Vec<DMatrix<f64>> = (0..k)
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut out = Vec::new();
            for rest in (0..k).filter(|&j| j != first).permutations(d) {
                let targets: Vec<usize> = std::iter::once(first).chain(rest).collect();
                let s = DMatrix::from_columns(&targets[..d].iter().map(|&p| states[p].clone()).collect::<Vec<_>>());
                let Some(s_inv) = s.clone().try_inverse() else { continue };
                let coeffs = s_inv * &states[targets[d]];
                let lambda = coeffs.component_div(&c);
                if lambda.iter().any(|&l| l <= RAY_TOL) {
                    continue;
                }
                let t = s * DMatrix::from_diagonal(&lambda) * &e_inv;
                if let Some(t) = normalize(t, u) {
                    if is_cone_isomorphism(&t, effects, states) {
                        out.push(t);
                    }
                }
            }
            out
        })
        .collect();
    found
}

fn dihedral(effects: &[DVector<f64>], states: &[DVector<f64>], u: &DVector<f64>) -> Vec<DMatrix<f64>> {
    if u.len() != 3 {
        return Vec::new();
    }
    let k = effects.len();
    let step = std::f64::consts::PI / k as f64;
    (0..2 * k)
        .flat_map(|m| {
            let r = linalg::rotation_z(m as f64 * step);
            let rf = &r * linalg::reflection_y();
            [r, rf]
        })
        .filter_map(|t| normalize(t, u))
        .filter(|t| is_cone_isomorphism(t, effects, states))
        .collect()
}

/// All cone isomorphisms `T` (effect cone onto state cone), normalized to
/// `u·T(u) = 1`, in a deterministic order.
pub fn find_cone_isomorphisms(m: &ModelSpec) -> Vec<DMatrix<f64>> {
    let effects = unit_rays(&m.ray_extremal_effects());
    let states = unit_rays(&m.extremal_states().iter().collect::<Vec<_>>());
    if effects.len() != states.len() || effects.len() < m.dim() {
        return Vec::new();
    }
    let u = m.unit_effect().to_dvector();
    let found = if effects.len() <= EXHAUSTIVE_RAY_CAP {
        exhaustive(&effects, &states, &u)
    } else {
        dihedral(&effects, &states, &u)
    };
    sort_dedup(found)
}

pub fn is_symmetric_psd(t: &DMatrix<f64>, tol: f64) -> bool {
    linalg::asymmetry(t) <= tol && linalg::symmetric_eigenvalues(t)[0] >= -tol
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfDuality {
    pub weak: bool,
    pub strong: bool,
    #[serde(serialize_with = "serialize_matrices")]
    pub witnesses: Vec<DMatrix<f64>>,
    /// Index into `witnesses` of the first symmetric PSD map.
    pub strong_witness: Option<usize>,
}

fn serialize_matrices<S: serde::Serializer>(ms: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(ms.iter().map(linalg::matrix_to_rows))
}

pub fn classify(m: &ModelSpec, tol: f64) -> SelfDuality {
    let witnesses = find_cone_isomorphisms(m);
    let strong_witness = witnesses.iter().position(|t| is_symmetric_psd(t, tol));
    SelfDuality { weak: !witnesses.is_empty(), strong: strong_witness.is_some(), witnesses, strong_witness }
}

/// First symmetric positive semi-definite cone isomorphism, if any.
pub fn is_strongly_self_dual(m: &ModelSpec, tol: f64) -> (bool, Option<DMatrix<f64>>) {
    let c = classify(m, tol);
    let w = c.strong_witness.map(|i| c.witnesses[i].clone());
    (w.is_some(), w)
}

/// `ω_T` with `(e ⊗ f)(ω_T) = f·T(e) / u·T(u)`, i.e. matrix `Tᵀ / (u·T u)`.
pub fn state_from_isomorphism(t: &DMatrix<f64>, m: &Arc<ModelSpec>, tol: f64) -> Result<JointState> {
    if t.nrows() != m.dim() || t.ncols() != m.dim() {
        return Err(GptError::DimensionMismatch { expected: m.dim(), found: t.nrows() });
    }
    let u = m.unit_effect().to_dvector();
    let c = u.dot(&(t * &u));
    if c <= 0.0 {
        return Err(GptError::InvalidParameter(format!("u·T(u) = {c} is not positive")));
    }
    let state = JointState::new(t.transpose() / c, m.clone(), m.clone())?;
    if !state.in_max_tensor_product(tol) {
        return Err(GptError::Consistency("induced state is not in the maximal tensor product".into()));
    }
    Ok(state)
}

/// For each ray-extremal effect, the number of extremal states on which it
/// takes the value 1.
pub fn certain_state_counts(m: &ModelSpec, tol: f64) -> Vec<usize> {
    m.ray_extremal_effects()
        .iter()
        .map(|e| {
            m.extremal_states()
                .iter()
                .filter(|w| e.dot(w).is_ok_and(|p| p >= 1.0 - tol))
                .count()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub samples: usize,
    pub vertices_found: usize,
    pub max_chsh: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub argmax_state: DMatrix<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(linalg::matrix_to_rows(m))
}

/// Vertex of the maximal tensor product maximizing a linear objective.
fn lp_vertex(m: &ModelSpec, objective: &[f64]) -> Option<DMatrix<f64>> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let d = m.dim();
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = objective.iter().map(|&c| p.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let row = |e: &Vector, f: &Vector| -> Vec<(minilp::Variable, f64)> {
        let k = linalg::kron(e.coords(), f.coords());
        vars.iter().copied().zip(k.iter().copied()).collect()
    };
    for e in m.ray_extremal_effects() {
        for f in m.ray_extremal_effects() {
            p.add_constraint(row(e, f), ComparisonOp::Ge, 0.0);
        }
    }
    p.add_constraint(row(m.unit_effect(), m.unit_effect()), ComparisonOp::Eq, 1.0);
    let sol = p.solve().ok()?;
    Some(DMatrix::from_row_iterator(d, d, vars.iter().map(|&v| sol[v])))
}

/// Largest CHSH value of `state` over dichotomic ray-extremal settings.
pub fn max_chsh_over_ray_settings(state: &JointState) -> Result<f64> {
    let m = state.model_a();
    let meas: Vec<Measurement> = m
        .ray_extremal_effects()
        .into_iter()
        .map(|e| Measurement::dichotomic(e, m))
        .collect::<Result<_>>()?;
    let t: CorrelationTable = correlations::correlations_from_state(state, &meas, &meas, 1e-7)?;
    let k = meas.len();
    let mut best: f64 = 0.0;
    for (x0, x1, y0, y1) in itertools::iproduct!(0..k, 0..k, 0..k, 0..k) {
        best = best.max(correlations::chsh(&t, x0, x1, y0, y1)?);
    }
    Ok(best)
}

/// Falsification harness: sample vertices of the maximal tensor product of `m`
/// with random objectives and record the largest CHSH value found. Nothing is
/// asserted about the outcome.
pub fn tsirelson_scan(m: &Arc<ModelSpec>, samples: usize, seed: u64) -> Result<ScanReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = m.dim() * m.dim();
    let mut vertices: Vec<DMatrix<f64>> = Vec::new();
    for _ in 0..samples {
        let objective: Vec<f64> = (0..d2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(v) = lp_vertex(m, &objective) {
            if !vertices.iter().any(|w| (w - &v).amax() < 1e-7) {
                vertices.push(v);
            }
        }
    }
    let mut report = ScanReport { samples, vertices_found: vertices.len(), max_chsh: 0.0, argmax_state: DMatrix::zeros(m.dim(), m.dim()) };
    for v in vertices {
        let s = max_chsh_over_ray_settings(&JointState::new(v.clone(), m.clone(), m.clone())?)?;
        if s > report.max_chsh {
            report.max_chsh = s;
            report.argmax_state = v;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{reflection_y, rotation_z};
    use crate::polygon::{max_entangled_matrix, polygon};
    use crate::DEFAULT_TOL;
    use std::f64::consts::PI;

    fn contains(list: &[DMatrix<f64>], t: &DMatrix<f64>) -> bool {
        list.iter().any(|m| (m - t).amax() < 1e-9)
    }

    #[test]
    fn pentagon_rotations() {
        let found = find_cone_isomorphisms(&polygon(5).unwrap());
        assert_eq!(found.len(), 10);
        for k in 0..5 {
            assert!(contains(&found, &rotation_z(2.0 * PI * k as f64 / 5.0)));
        }
    }

    #[test]
    fn square_half_step_rotations() {
        let found = find_cone_isomorphisms(&polygon(4).unwrap());
        assert_eq!(found.len(), 8);
        for k in 0..4 {
            assert!(contains(&found, &rotation_z((1 + 2 * k) as f64 * PI / 4.0)));
        }
        assert!(!contains(&found, &DMatrix::identity(3, 3)));
    }

    #[test]
    fn strong_self_duality_by_parity() {
        for n in 3..=12 {
            let (strong, w) = is_strongly_self_dual(&polygon(n).unwrap(), DEFAULT_TOL);
            assert_eq!(strong, n % 2 == 1, "n = {n}");
            if let Some(w) = w {
                assert!((w - DMatrix::identity(3, 3)).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn dihedral_fallback_for_large_polygons() {
        let found = find_cone_isomorphisms(&polygon(21).unwrap());
        assert_eq!(found.len(), 42);
        assert!(contains(&found, &DMatrix::identity(3, 3)));
        assert!(!is_strongly_self_dual(&polygon(22).unwrap(), DEFAULT_TOL).0);
    }

    #[test]
    fn induced_states() {
        let m = Arc::new(polygon(5).unwrap());
        let s = state_from_isomorphism(&DMatrix::identity(3, 3), &m, DEFAULT_TOL).unwrap();
        assert!((s.matrix() - max_entangled_matrix(5).unwrap()).amax() < 1e-15);

        let m4 = Arc::new(polygon(4).unwrap());
        let s = state_from_isomorphism(&rotation_z(PI / 4.0), &m4, DEFAULT_TOL).unwrap();
        assert!((s.matrix() - max_entangled_matrix(4).unwrap()).amax() < 1e-15);

        assert!(state_from_isomorphism(&(-DMatrix::identity(3, 3)), &m, DEFAULT_TOL).is_err());
    }

    #[test]
    fn witnesses_induce_valid_states() {
        for n in 3..=9 {
            let m = Arc::new(polygon(n).unwrap());
            for t in find_cone_isomorphisms(&m) {
                let s = state_from_isomorphism(&t, &m, DEFAULT_TOL).unwrap();
                let ip = s.is_inner_product_state(DEFAULT_TOL).unwrap().is_inner_product();
                assert_eq!(ip, is_symmetric_psd(&t, DEFAULT_TOL));
            }
        }
    }

    #[test]
    fn symmetry_composition_closure() {
        for n in 3..=12 {
            let m = polygon(n).unwrap();
            let found = find_cone_isomorphisms(&m);
            let k = n as f64;
            for t in &found {
                for j in 0..n {
                    let r = rotation_z(2.0 * PI * j as f64 / k);
                    assert!(contains(&found, &(&r * t)));
                    assert!(contains(&found, &(t * &r)));
                    let rr = &r * reflection_y();
                    assert!(contains(&found, &(&rr * t)));
                }
            }
            if n % 2 == 1 {
                for a in &found {
                    for b in &found {
                        assert!(contains(&found, &(a * b)));
                    }
                }
            }
        }
    }

    #[test]
    fn classical_simplex_is_self_dual() {
        let c = classify(&ModelSpec::classical(3).unwrap(), DEFAULT_TOL);
        assert!(c.strong);
        assert_eq!(c.witnesses.len(), 6);
    }

    #[test]
    fn mismatched_counts_give_nothing() {
        let m = polygon(5).unwrap();
        let states: Vec<Vector> = m.extremal_states()[..4].to_vec();
        let m2 = ModelSpec::new("cut", states, m.extremal_effects().to_vec(), m.ray_extremal_flags().to_vec(), m.unit_effect().clone()).unwrap();
        assert!(find_cone_isomorphisms(&m2).is_empty());
    }

    #[test]
    fn certain_states_on_polygons() {
        assert!(certain_state_counts(&polygon(4).unwrap(), 1e-9).iter().all(|&c| c == 2));
        assert!(certain_state_counts(&polygon(5).unwrap(), 1e-9).iter().all(|&c| c == 1));
    }
}
