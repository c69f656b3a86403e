//! Regular `n`-gon state spaces embedded in `R^3` and their maximally
//! entangled joint state.
//!
//! Labels follow the 1-based convention `i = 1..n`; storage is zero-based, so
//! `extremal_states()[k]` is `ω_{k+1}`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bipartite::JointState;
use crate::error::{GptError, Result};
use crate::gpt::{ModelSpec, Vector};

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        Err(GptError::InvalidParameter(format!("polygon needs n >= 3, got {n}")))
    } else {
        Ok(())
    }
}

/// `r_n = sqrt(sec(π/n))`.
pub fn radius(n: usize) -> f64 {
    (1.0 / (PI / n as f64).cos()).sqrt()
}

/// Polar angle of the pure state `ω_i` (1-based `i`).
pub fn state_angle(n: usize, i: usize) -> f64 {
    2.0 * PI * i as f64 / n as f64
}

/// Polar angle of the ray-extremal effect `e_i` (1-based `i`).
pub fn effect_angle(n: usize, i: usize) -> f64 {
    if n % 2 == 0 {
        (2 * i - 1) as f64 * PI / n as f64
    } else {
        state_angle(n, i)
    }
}

/// Prefactor of the ray-extremal effects: `1/2` for even `n`, `1/(1+r_n^2)` for odd `n`.
pub fn effect_scale(n: usize) -> f64 {
    if n % 2 == 0 {
        0.5
    } else {
        let r = radius(n);
        1.0 / (1.0 + r * r)
    }
}

fn on_circle(r: f64, angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [r * c, r * s, 1.0]
}

/// The `n`-vertex polygon model.
///
/// Even `n`: `n` ray-extremal effects. Odd `n`: the `n` ray-extremal effects
/// followed by their complements `u - e_i`, flagged as not ray-extremal.
pub fn polygon(n: usize) -> Result<ModelSpec> {
    check_n(n)?;
    let r = radius(n);
    let unit = Vector::from_slice(&[0.0, 0.0, 1.0]);
    let states: Vec<Vector> = (1..=n).map(|i| Vector::from_slice(&on_circle(r, state_angle(n, i)))).collect();
    let scale = effect_scale(n);
    let mut effects: Vec<Vector> = (1..=n)
        .map(|i| Vector::from_slice(&on_circle(r, effect_angle(n, i))).scale(scale))
        .collect();
    let mut ray = vec![true; n];
    let mut effect_labels: Vec<String> = (1..=n).map(|i| format!("e{i}")).collect();
    if n % 2 == 1 {
        let bars: Vec<Vector> = effects.iter().map(|e| &unit - e).collect();
        effects.extend(bars);
        ray.extend(std::iter::repeat_n(false, n));
        effect_labels.extend((1..=n).map(|i| format!("ebar{i}")));
    }
    let state_labels = (1..=n).map(|i| format!("w{i}")).collect();
    Ok(ModelSpec::new(format!("polygon:{n}"), states, effects, ray, unit)?.with_labels(state_labels, effect_labels))
}

/// `u - e`, after checking that `e` is a proper effect of `m`.
pub fn complement_effect(e: &Vector, m: &ModelSpec, tol: f64) -> Result<Vector> {
    if !m.is_proper_effect(e, tol)? {
        return Err(GptError::ImproperEffect { model: m.name().to_string() });
    }
    Ok(m.unit_effect() - e)
}

/// Zero-based index `j` with `u - e_{i} = e_{j}` for even polygons.
pub fn even_complement_index(n: usize, k: usize) -> Option<usize> {
    (n % 2 == 0).then_some((k + n / 2) % n)
}

/// Matrix of the maximally entangled state: identity for odd `n`, the
/// rotation block by `π/n` for even `n`.
pub fn max_entangled_matrix(n: usize) -> Result<DMatrix<f64>> {
    check_n(n)?;
    if n % 2 == 1 {
        return Ok(DMatrix::identity(3, 3));
    }
    let (s, c) = (PI / n as f64).sin_cos();
    Ok(DMatrix::from_row_slice(3, 3, &[c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0]))
}

/// Maximally entangled state of two `n`-gon systems.
pub fn max_entangled(n: usize) -> Result<JointState> {
    let model = Arc::new(polygon(n)?);
    JointState::new(max_entangled_matrix(n)?, model.clone(), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_TOL;

    #[test]
    fn rejects_small_n() {
        assert!(polygon(2).is_err());
        assert!(max_entangled(1).is_err());
    }

    #[test]
    fn triangle_effects_form_a_measurement() {
        let m = polygon(3).unwrap();
        let e = m.extremal_effects();
        let sum = &(&e[0] + &e[1]) + &e[2];
        assert!(sum.approx_eq(m.unit_effect(), 1e-12));
    }

    #[test]
    fn square_first_state() {
        let m = polygon(4).unwrap();
        let expected = Vector::from_slice(&[0.0, 2f64.powf(0.25), 1.0]);
        assert!(m.extremal_states()[0].approx_eq(&expected, 1e-12));
    }

    #[test]
    fn all_states_normalized_and_models_valid() {
        for n in 3..=64 {
            let m = polygon(n).unwrap();
            for w in m.extremal_states() {
                assert!((m.unit_effect().dot(w).unwrap() - 1.0).abs() < 1e-15);
            }
            assert!(m.validate().is_valid(), "polygon({n}): {}", m.validate());
        }
    }

    #[test]
    fn even_complements_are_effects() {
        let m = polygon(4).unwrap();
        let e = m.extremal_effects();
        let bar = complement_effect(&e[0], &m, DEFAULT_TOL).unwrap();
        assert!(bar.approx_eq(&e[even_complement_index(4, 0).unwrap()], 1e-12));
        assert!(bar.approx_eq(&e[2], 1e-12));
        for n in (4..=32).step_by(2) {
            let m = polygon(n).unwrap();
            for k in 0..n {
                let bar = m.unit_effect() - &m.extremal_effects()[k];
                let j = even_complement_index(n, k).unwrap();
                assert!(bar.approx_eq(&m.extremal_effects()[j], 1e-12));
            }
        }
    }

    #[test]
    fn odd_complements_are_new_effects() {
        let m = polygon(5).unwrap();
        let bar = complement_effect(&m.extremal_effects()[0], &m, DEFAULT_TOL).unwrap();
        assert!(m.is_proper_effect(&bar, DEFAULT_TOL).unwrap());
        assert!(m.ray_extremal_effects().iter().all(|e| !e.approx_eq(&bar, 1e-6)));
        assert_eq!(m.extremal_effects().len(), 10);
        assert_eq!(m.ray_extremal_effects().len(), 5);
    }

    #[test]
    fn complement_of_unit_is_zero() {
        let m = polygon(6).unwrap();
        let z = complement_effect(m.unit_effect(), &m, DEFAULT_TOL).unwrap();
        assert!(z.approx_eq(&Vector::zeros(3), 0.0));
        assert!(complement_effect(&m.unit_effect().scale(2.0), &m, DEFAULT_TOL).is_err());
    }

    #[test]
    fn odd_effects_lie_on_state_rays() {
        for n in (3..=63).step_by(2) {
            let m = polygon(n).unwrap();
            let r = radius(n);
            for (e, w) in m.ray_extremal_effects().iter().zip(m.extremal_states()) {
                assert!(e.approx_eq(&w.scale(1.0 / (1.0 + r * r)), 1e-14));
            }
        }
    }

    #[test]
    fn even_effect_rays_offset_by_pi_over_n() {
        for n in (4..=64).step_by(2) {
            let m = polygon(n).unwrap();
            let mut min_angle = f64::INFINITY;
            for e in m.ray_extremal_effects() {
                for w in m.extremal_states() {
                    let (ec, wc) = (e.coords(), w.coords());
                    let a = (ec[1].atan2(ec[0]) - wc[1].atan2(wc[0])).rem_euclid(2.0 * PI);
                    min_angle = min_angle.min(a.min(2.0 * PI - a));
                }
            }
            assert!((min_angle - PI / n as f64).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn max_entangled_matrices() {
        assert_eq!(max_entangled_matrix(5).unwrap(), DMatrix::identity(3, 3));
        let m = max_entangled_matrix(4).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DMatrix::from_row_slice(3, 3, &[h, h, 0.0, -h, h, 0.0, 0.0, 0.0, 1.0]);
        assert!((m - expected).amax() < 1e-15);
    }

    #[test]
    fn triangle_state_is_mixture_of_products() {
        let m = polygon(3).unwrap();
        let mut sum = DMatrix::zeros(3, 3);
        for w in m.extremal_states() {
            let v = w.to_dvector();
            sum += &v * v.transpose() / 3.0;
        }
        assert!((sum - max_entangled_matrix(3).unwrap()).amax() < 1e-12);
    }
}
