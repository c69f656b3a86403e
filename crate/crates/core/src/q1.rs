//! First-level moment matrices and their constructive certificates.
//!
//! Outcomes are flattened per party: the `k` outcomes of setting 0 come first,
//! then setting 1, and so on. The moment matrix is indexed by
//! `(1, A-outcomes, B-outcomes)`:
//!
//! ```text
//!     [ 1    P_Aᵀ  P_Bᵀ ]
//! γ = [ P_A  Q     P    ]
//!     [ P_B  Pᵀ    R    ]
//! ```
//!
//! `Q` and `R` carry the marginals on the diagonal and zeros between distinct
//! outcomes of one measurement; their remaining entries are free.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bipartite::{push_local_map, JointState, LocalMap};
use crate::correlations::{self, correlations_from_state, CorrelationTable};
use crate::error::{GptError, Result};
use crate::gpt::{Measurement, Vector};
use crate::linalg;

/// Relative eigenvalue tolerance for positive semi-definiteness.
pub const PSD_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    #[serde(rename = "in-Q1")]
    InQ1,
    #[serde(rename = "not-in-Q1")]
    NotInQ1,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::InQ1 => "in Q1",
            Verdict::NotInQ1 => "not in Q1",
            Verdict::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeEntrySource {
    /// Free entries copied from the state's moment matrix.
    FromState,
    Supplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Q1Certificate {
    pub gamma: DMatrix<f64>,
    /// Moment matrix before the diagonal-block overrides, when built from a state.
    pub gamma_tilde: Option<DMatrix<f64>>,
    /// Eigenvalues of `gamma`, ascending.
    pub spectrum: Vec<f64>,
    pub source: FreeEntrySource,
    pub table: CorrelationTable,
}

impl Q1Certificate {
    /// Certificate from a supplied moment matrix; the fixed entries must match `table`.
    pub fn from_gamma(gamma: DMatrix<f64>, table: CorrelationTable, tol: f64) -> Result<Self> {
        check_structure(&gamma, &table, tol)?;
        let spectrum = linalg::symmetric_eigenvalues(&gamma);
        Ok(Self { gamma, gamma_tilde: None, spectrum, source: FreeEntrySource::Supplied, table })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum[0]
    }

    pub fn is_psd(&self) -> bool {
        is_psd_spectrum(&self.spectrum)
    }

    pub fn verdict(&self) -> Verdict {
        if self.is_psd() {
            Verdict::InQ1
        } else {
            Verdict::Undetermined
        }
    }
}

fn is_psd_spectrum(spectrum: &[f64]) -> bool {
    let scale = spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    spectrum.first().is_none_or(|&min| min >= -PSD_REL_TOL * scale)
}

/// Check that `gamma` is symmetric and carries the fixed entries dictated by `table`.
pub fn check_structure(gamma: &DMatrix<f64>, t: &CorrelationTable, tol: f64) -> Result<()> {
    let (na, nb) = (t.flat_len_a(), t.flat_len_b());
    let size = 1 + na + nb;
    if gamma.nrows() != size || gamma.ncols() != size {
        return Err(GptError::DimensionMismatch { expected: size, found: gamma.nrows() });
    }
    let fail = |what: String| Err(GptError::Certificate(what));
    if linalg::asymmetry(gamma) > tol {
        return fail("matrix is not symmetric".into());
    }
    if (gamma[(0, 0)] - 1.0).abs() > tol {
        return fail("top-left entry is not 1".into());
    }
    for i in 0..na {
        let pa = t.flat_marginal_a(i);
        if (gamma[(0, 1 + i)] - pa).abs() > tol || (gamma[(1 + i, 1 + i)] - pa).abs() > tol {
            return fail(format!("Alice marginal entry {i} mismatch"));
        }
        for i2 in 0..na {
            if i2 != i && t.setting_of_a(i).0 == t.setting_of_a(i2).0 && gamma[(1 + i, 1 + i2)].abs() > tol {
                return fail(format!("entry ({i}, {i2}) of Alice's block must vanish"));
            }
        }
        for j in 0..nb {
            if (gamma[(1 + i, 1 + na + j)] - t.flat_prob(i, j)).abs() > tol {
                return fail(format!("joint entry ({i}, {j}) mismatch"));
            }
        }
    }
    for j in 0..nb {
        let pb = t.flat_marginal_b(j);
        let k = 1 + na + j;
        if (gamma[(0, k)] - pb).abs() > tol || (gamma[(k, k)] - pb).abs() > tol {
            return fail(format!("Bob marginal entry {j} mismatch"));
        }
        for j2 in 0..nb {
            if j2 != j && t.setting_of_b(j).0 == t.setting_of_b(j2).0 && gamma[(k, 1 + na + j2)].abs() > tol {
                return fail(format!("entry ({j}, {j2}) of Bob's block must vanish"));
            }
        }
    }
    Ok(())
}

fn require_inner_product(omega: &JointState, tol: f64) -> Result<()> {
    let report = omega.is_inner_product_state(tol)?;
    if !report.is_inner_product() {
        return Err(GptError::NotInnerProductState(format!(
            "asymmetry {:e}, min eigenvalue {:e}",
            report.asymmetry, report.min_eigenvalue
        )));
    }
    Ok(())
}

/// `γ̃_kl = (g_k ⊗ g_l)(ω)` over `g = (u, e_1, ..., f_1, ...)`.
pub fn moment_matrix(omega: &JointState, meas_a: &[Measurement], meas_b: &[Measurement]) -> DMatrix<f64> {
    let mut g: Vec<&Vector> = vec![omega.model_a().unit_effect()];
    g.extend(meas_a.iter().flat_map(|m| m.effects()));
    g.extend(meas_b.iter().flat_map(|m| m.effects()));
    let cols: Vec<_> = g.iter().map(|v| v.to_dvector()).collect();
    let gm = DMatrix::from_columns(&cols);
    gm.transpose() * omega.matrix() * gm
}

/// Certificate for the correlations of an inner product state: the moment
/// matrix with the marginals placed on the diagonal of the local blocks and
/// zeros between outcomes of the same measurement.
pub fn certificate_from_inner_product_state(
    omega: &JointState,
    meas_a: &[Measurement],
    meas_b: &[Measurement],
    tol: f64,
) -> Result<Q1Certificate> {
    require_inner_product(omega, tol)?;
    let table = correlations_from_state(omega, meas_a, meas_b, tol)?;
    let gamma_tilde = moment_matrix(omega, meas_a, meas_b);
    let mut gamma = linalg::symmetrize(&gamma_tilde);
    let na = table.flat_len_a();
    for i in 0..na {
        for i2 in 0..na {
            if i == i2 {
                gamma[(1 + i, 1 + i)] = table.flat_marginal_a(i);
            } else if table.setting_of_a(i).0 == table.setting_of_a(i2).0 {
                gamma[(1 + i, 1 + i2)] = 0.0;
            }
        }
    }
    for j in 0..table.flat_len_b() {
        for j2 in 0..table.flat_len_b() {
            let (k, k2) = (1 + na + j, 1 + na + j2);
            if j == j2 {
                gamma[(k, k)] = table.flat_marginal_b(j);
            } else if table.setting_of_b(j).0 == table.setting_of_b(j2).0 {
                gamma[(k, k2)] = 0.0;
            }
        }
    }
    check_structure(&gamma, &table, 1e-10)?;
    let spectrum = linalg::symmetric_eigenvalues(&gamma);
    if !is_psd_spectrum(&spectrum) {
        return Err(GptError::Certificate(format!("moment matrix has eigenvalue {:e}", spectrum[0])));
    }
    Ok(Q1Certificate {
        gamma,
        gamma_tilde: Some(gamma_tilde),
        spectrum,
        source: FreeEntrySource::FromState,
        table,
    })
}

/// Per-measurement block of `γ - γ̃` and its split into two-outcome pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDecomposition {
    pub block: DMatrix<f64>,
    /// `((m, n), M^{mn})` for `m < n`.
    pub pieces: Vec<((usize, usize), DMatrix<f64>)>,
}

impl DeltaDecomposition {
    pub fn residual(&self) -> f64 {
        let mut sum = DMatrix::zeros(self.block.nrows(), self.block.ncols());
        for (_, p) in &self.pieces {
            sum += p;
        }
        (&self.block - sum).amax()
    }

    /// Pieces are PSD up to `1e-12`; they often vanish up to rounding, so a
    /// relative test would be meaningless.
    pub fn pieces_psd(&self) -> bool {
        self.pieces.iter().all(|(_, p)| linalg::symmetric_eigenvalues(p)[0] >= -1e-12)
    }
}

/// Split the correction block of one measurement into the matrices with
/// `(e_m ⊗ e_n)(ω)` at `(m, m)` and `(n, n)` and its negative at `(m, n)`, `(n, m)`.
pub fn delta_decomposition(omega: &JointState, meas: &Measurement, tol: f64) -> Result<DeltaDecomposition> {
    require_inner_product(omega, tol)?;
    meas.validate_against(omega.model_a(), tol)?;
    let e = meas.effects();
    let u = omega.model_b().unit_effect();
    let r = e.len();
    let p = |a: &Vector, b: &Vector| omega.joint_probability(a, b).expect("validated");
    let block = DMatrix::from_fn(r, r, |m, n| if m == n { p(&e[m], u) - p(&e[m], &e[m]) } else { -p(&e[m], &e[n]) });
    let mut pieces = Vec::with_capacity(r * (r - 1) / 2);
    for m in 0..r {
        for n in m + 1..r {
            let w = p(&e[m], &e[n]);
            let mut piece = DMatrix::zeros(r, r);
            piece[(m, m)] = w;
            piece[(n, n)] = w;
            piece[(m, n)] = -w;
            piece[(n, m)] = -w;
            pieces.push(((m, n), piece));
        }
    }
    Ok(DeltaDecomposition { block, pieces })
}

/// The correction block equals the sum of its pieces within `1e-12` and every piece is PSD.
pub fn verify_delta_decomposition(omega: &JointState, meas: &Measurement, tol: f64) -> Result<bool> {
    let d = delta_decomposition(omega, meas, tol)?;
    Ok(d.residual() <= 1e-12 && d.pieces_psd())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub chsh_max: f64,
    pub chsh_ok: bool,
    pub uffink_max: f64,
    pub uffink_ok: bool,
    pub verdict: Verdict,
}

/// Tsirelson's bound and the quadratic bound `4`, each maximized over relabellings.
/// A violation proves the table is outside Q1; passing both proves nothing.
pub fn q1_necessary_conditions(t: &CorrelationTable, tol: f64) -> Result<ConditionReport> {
    let chsh_max = correlations::chsh_max_over_relabellings(t)?;
    let uffink_max = correlations::uffink_max_over_relabellings(t)?;
    let chsh_ok = chsh_max <= 2.0 * SQRT_2 + tol;
    let uffink_ok = uffink_max <= 4.0 + tol;
    let verdict = if chsh_ok && uffink_ok { Verdict::Undetermined } else { Verdict::NotInQ1 };
    Ok(ConditionReport { chsh_max, chsh_ok, uffink_max, uffink_ok, verdict })
}

/// Combine the necessary conditions with an optional certificate.
pub fn classify(t: &CorrelationTable, certificate: Option<&Q1Certificate>, tol: f64) -> Result<Verdict> {
    if t.n_settings_a() == 2 && t.n_settings_b() == 2 && t.is_dichotomic() {
        let report = q1_necessary_conditions(t, tol)?;
        if report.verdict == Verdict::NotInQ1 {
            return Ok(Verdict::NotInQ1);
        }
    }
    match certificate {
        Some(c) if c.is_psd() && c.table.max_abs_diff(t) <= tol && check_structure(&c.gamma, t, tol).is_ok() => {
            Ok(Verdict::InQ1)
        }
        _ => Ok(Verdict::Undetermined),
    }
}

/// Certificate for the correlations of `(1 ⊗ τ)(σ)`: Bob's measurements are
/// pulled back through `τ†` and `σ` is certified with them.
pub fn certificate_via_pushforward(
    sigma: &JointState,
    tau: &LocalMap,
    meas_a: &[Measurement],
    meas_b: &[Measurement],
    tol: f64,
) -> Result<Q1Certificate> {
    let omega = push_local_map(sigma, tau, tol)?;
    let pulled: Vec<Measurement> = meas_b.iter().map(|m| tau.pull_back(m)).collect::<Result<_>>()?;
    let cert = certificate_from_inner_product_state(sigma, meas_a, &pulled, tol)?;
    let direct = correlations_from_state(&omega, meas_a, meas_b, tol)?;
    let err = direct.max_abs_diff(&cert.table);
    if err > 1e-12 {
        return Err(GptError::Certificate(format!("pushed-forward correlations differ by {err:e}")));
    }
    Ok(cert)
}
