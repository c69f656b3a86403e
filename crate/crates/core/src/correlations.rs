//! Correlation tables `P(a,b|x,y)` and the Bell functionals evaluated on them.
//!
//! Outcome `0` counts as `+1` and outcome `1` as `-1` in correlators
//! `E_{x,y} = P(0,0) + P(1,1) - P(0,1) - P(1,0)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::bipartite::JointState;
use crate::error::{GptError, Result};
use crate::gpt::Measurement;
use crate::polygon::{self, max_entangled};
use crate::DEFAULT_TOL;

/// Two brute-force candidates closer than this are treated as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    outcomes_a: Vec<usize>,
    outcomes_b: Vec<usize>,
    /// Block `x * n_b + y` holds `P(a,b|x,y)` with `a` on rows.
    blocks: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableReport {
    /// `max |Σ_{a,b} P(a,b|x,y) - 1|`.
    pub normalization_error: f64,
    pub min_entry: f64,
    /// Largest change of an A-marginal across Bob's settings.
    pub signalling_a: f64,
    /// Largest change of a B-marginal across Alice's settings.
    pub signalling_b: f64,
}

impl TableReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.normalization_error <= 1e-10
            && self.min_entry >= -tol
            && self.signalling_a <= 1e-10
            && self.signalling_b <= 1e-10
    }
}

impl CorrelationTable {
    pub fn from_fn(
        outcomes_a: Vec<usize>,
        outcomes_b: Vec<usize>,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        if outcomes_a.is_empty() || outcomes_b.is_empty() || outcomes_a.iter().chain(&outcomes_b).any(|&k| k == 0) {
            return Err(GptError::Scenario("every party needs a setting with at least one outcome".into()));
        }
        let mut blocks = Vec::with_capacity(outcomes_a.len() * outcomes_b.len());
        for (x, &ka) in outcomes_a.iter().enumerate() {
            for (y, &kb) in outcomes_b.iter().enumerate() {
                blocks.push(DMatrix::from_fn(ka, kb, |a, b| f(a, b, x, y)));
            }
        }
        Ok(Self { outcomes_a, outcomes_b, blocks })
    }

    /// Binary-outcome table with `n_a` and `n_b` settings.
    pub fn dichotomic(n_a: usize, n_b: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(vec![2; n_a], vec![2; n_b], f)
    }

    /// `P = 1/2` if `a ⊕ b = rule(x, y)`, else `0`.
    pub fn xor_box(n_a: usize, n_b: usize, rule: impl Fn(usize, usize) -> usize) -> Result<Self> {
        Self::dichotomic(n_a, n_b, |a, b, x, y| if (a ^ b) == rule(x, y) % 2 { 0.5 } else { 0.0 })
    }

    /// PR box: `a ⊕ b = xy`.
    pub fn pr_box() -> Self {
        Self::xor_box(2, 2, |x, y| x * y).expect("valid shape")
    }

    /// Perfectly correlated local table: `a ⊕ b = 0`.
    pub fn perfectly_correlated() -> Self {
        Self::xor_box(2, 2, |_, _| 0).expect("valid shape")
    }

    pub fn uniform(n_a: usize, n_b: usize) -> Result<Self> {
        Self::dichotomic(n_a, n_b, |_, _, _, _| 0.25)
    }

    /// Local deterministic strategy: Alice answers `alice[x]`, Bob `bob[y]`.
    pub fn deterministic(alice: &[usize], bob: &[usize]) -> Result<Self> {
        Self::dichotomic(alice.len(), bob.len(), |a, b, x, y| {
            if a == alice[x] && b == bob[y] {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn n_settings_a(&self) -> usize {
        self.outcomes_a.len()
    }

    pub fn n_settings_b(&self) -> usize {
        self.outcomes_b.len()
    }

    pub fn outcomes_a(&self) -> &[usize] {
        &self.outcomes_a
    }

    pub fn outcomes_b(&self) -> &[usize] {
        &self.outcomes_b
    }

    pub fn block(&self, x: usize, y: usize) -> &DMatrix<f64> {
        &self.blocks[x * self.outcomes_b.len() + y]
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.block(x, y)[(a, b)]
    }

    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        self.block(x, y).row(a).sum()
    }

    pub fn marginal_b(&self, b: usize, x: usize, y: usize) -> f64 {
        self.block(x, y).column(b).sum()
    }

    pub fn is_dichotomic(&self) -> bool {
        self.outcomes_a.iter().chain(&self.outcomes_b).all(|&k| k == 2)
    }

    pub fn report(&self) -> TableReport {
        let mut r = TableReport { normalization_error: 0.0, min_entry: f64::INFINITY, signalling_a: 0.0, signalling_b: 0.0 };
        for block in &self.blocks {
            r.normalization_error = r.normalization_error.max((block.sum() - 1.0).abs());
            r.min_entry = r.min_entry.min(block.min());
        }
        for (x, &ka) in self.outcomes_a.iter().enumerate() {
            for a in 0..ka {
                let m0 = self.marginal_a(a, x, 0);
                for y in 1..self.n_settings_b() {
                    r.signalling_a = r.signalling_a.max((self.marginal_a(a, x, y) - m0).abs());
                }
            }
        }
        for (y, &kb) in self.outcomes_b.iter().enumerate() {
            for b in 0..kb {
                let m0 = self.marginal_b(b, 0, y);
                for x in 1..self.n_settings_a() {
                    r.signalling_b = r.signalling_b.max((self.marginal_b(b, x, y) - m0).abs());
                }
            }
        }
        r
    }

    fn check_setting(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.n_settings_a() || y >= self.n_settings_b() {
            return Err(GptError::Scenario(format!("setting ({x}, {y}) out of range")));
        }
        Ok(())
    }

    /// `E_{x,y}` for a pair of binary-outcome settings.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        self.check_setting(x, y)?;
        if self.outcomes_a[x] != 2 || self.outcomes_b[y] != 2 {
            return Err(GptError::Scenario(format!("setting ({x}, {y}) is not dichotomic")));
        }
        let p = self.block(x, y);
        Ok(p[(0, 0)] + p[(1, 1)] - p[(0, 1)] - p[(1, 0)])
    }

    /// Sub-table keeping the listed settings, in the listed order.
    pub fn select(&self, xs: &[usize], ys: &[usize]) -> Result<Self> {
        for &x in xs {
            for &y in ys {
                self.check_setting(x, y)?;
            }
        }
        let outcomes_a = xs.iter().map(|&x| self.outcomes_a[x]).collect();
        let outcomes_b = ys.iter().map(|&y| self.outcomes_b[y]).collect();
        Self::from_fn(outcomes_a, outcomes_b, |a, b, x, y| self.prob(a, b, xs[x], ys[y]))
    }

    /// Swap the two outcomes of Alice's setting `x`.
    pub fn flip_outcomes_a(&self, x: usize) -> Result<Self> {
        if self.outcomes_a.get(x) != Some(&2) {
            return Err(GptError::Scenario(format!("Alice setting {x} is not dichotomic")));
        }
        Self::from_fn(self.outcomes_a.clone(), self.outcomes_b.clone(), |a, b, xx, y| {
            let a = if xx == x { 1 - a } else { a };
            self.prob(a, b, xx, y)
        })
    }

    /// Swap the two outcomes of Bob's setting `y`.
    pub fn flip_outcomes_b(&self, y: usize) -> Result<Self> {
        if self.outcomes_b.get(y) != Some(&2) {
            return Err(GptError::Scenario(format!("Bob setting {y} is not dichotomic")));
        }
        Self::from_fn(self.outcomes_a.clone(), self.outcomes_b.clone(), |a, b, x, yy| {
            let b = if yy == y { 1 - b } else { b };
            self.prob(a, b, x, yy)
        })
    }

    /// `w·self + (1-w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.outcomes_a != other.outcomes_a || self.outcomes_b != other.outcomes_b {
            return Err(GptError::Scenario("tables have different shapes".into()));
        }
        Self::from_fn(self.outcomes_a.clone(), self.outcomes_b.clone(), |a, b, x, y| {
            w * self.prob(a, b, x, y) + (1.0 - w) * other.prob(a, b, x, y)
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.outcomes_a, other.outcomes_a);
        assert_eq!(self.outcomes_b, other.outcomes_b);
        self.blocks.iter().zip(&other.blocks).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max)
    }

    /// Number of flattened Alice outcome labels `i` (all outcomes of all settings).
    pub fn flat_len_a(&self) -> usize {
        self.outcomes_a.iter().sum()
    }

    pub fn flat_len_b(&self) -> usize {
        self.outcomes_b.iter().sum()
    }

    /// Zero-based flat label of Alice's outcome `a` of setting `x`; outcomes of
    /// setting 0 come first, then setting 1, and so on.
    pub fn flat_index_a(&self, x: usize, a: usize) -> usize {
        self.outcomes_a[..x].iter().sum::<usize>() + a
    }

    pub fn flat_index_b(&self, y: usize, b: usize) -> usize {
        self.outcomes_b[..y].iter().sum::<usize>() + b
    }

    /// Inverse of [`Self::flat_index_a`]: `(x(i), a)`.
    pub fn setting_of_a(&self, i: usize) -> (usize, usize) {
        unflatten(&self.outcomes_a, i)
    }

    pub fn setting_of_b(&self, j: usize) -> (usize, usize) {
        unflatten(&self.outcomes_b, j)
    }

    /// `P(i, j)` in flat labels.
    pub fn flat_prob(&self, i: usize, j: usize) -> f64 {
        let (x, a) = self.setting_of_a(i);
        let (y, b) = self.setting_of_b(j);
        self.prob(a, b, x, y)
    }

    /// `P_A(i)`, read with Bob's first setting.
    pub fn flat_marginal_a(&self, i: usize) -> f64 {
        let (x, a) = self.setting_of_a(i);
        self.marginal_a(a, x, 0)
    }

    pub fn flat_marginal_b(&self, j: usize) -> f64 {
        let (y, b) = self.setting_of_b(j);
        self.marginal_b(b, 0, y)
    }

    /// `probs[x][y][a][b]`.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.n_settings_a())
            .map(|x| {
                (0..self.n_settings_b())
                    .map(|y| crate::linalg::matrix_to_rows(self.block(x, y)))
                    .collect()
            })
            .collect()
    }
}

fn unflatten(outcomes: &[usize], mut i: usize) -> (usize, usize) {
    for (x, &k) in outcomes.iter().enumerate() {
        if i < k {
            return (x, i);
        }
        i -= k;
    }
    panic!("flat outcome label out of range");
}

impl Serialize for CorrelationTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Layout<'a> {
            outcomes_a: &'a [usize],
            outcomes_b: &'a [usize],
            /// `probs[x][y][a][b]`
            probs: Vec<Vec<Vec<Vec<f64>>>>,
        }
        Layout { outcomes_a: &self.outcomes_a, outcomes_b: &self.outcomes_b, probs: self.to_nested() }.serialize(s)
    }
}

/// Table of `(e ⊗ f)(ω)` over the given measurements.
pub fn correlations_from_state(
    omega: &JointState,
    meas_a: &[Measurement],
    meas_b: &[Measurement],
    tol: f64,
) -> Result<CorrelationTable> {
    for m in meas_a {
        m.validate_against(omega.model_a(), tol)?;
    }
    for m in meas_b {
        m.validate_against(omega.model_b(), tol)?;
    }
    let outcomes_a = meas_a.iter().map(Measurement::num_outcomes).collect();
    let outcomes_b = meas_b.iter().map(Measurement::num_outcomes).collect();
    CorrelationTable::from_fn(outcomes_a, outcomes_b, |a, b, x, y| {
        omega
            .joint_probability(&meas_a[x].effects()[a], &meas_b[y].effects()[b])
            .expect("measurements validated against the models")
    })
}

/// `S = |E_{x0,y0} + E_{x0,y1} + E_{x1,y0} - E_{x1,y1}|`.
pub fn chsh(t: &CorrelationTable, x0: usize, x1: usize, y0: usize, y1: usize) -> Result<f64> {
    Ok((t.correlator(x0, y0)? + t.correlator(x0, y1)? + t.correlator(x1, y0)? - t.correlator(x1, y1)?).abs())
}

fn check_2x2(t: &CorrelationTable) -> Result<[[f64; 2]; 2]> {
    if t.n_settings_a() != 2 || t.n_settings_b() != 2 || !t.is_dichotomic() {
        return Err(GptError::Scenario("expected two binary settings per party".into()));
    }
    Ok([
        [t.correlator(0, 0)?, t.correlator(0, 1)?],
        [t.correlator(1, 0)?, t.correlator(1, 1)?],
    ])
}

/// Largest CHSH value over the eight relabellings of a 2x2 binary table (the
/// minus sign on each of the four correlators, with the absolute value
/// covering the global sign).
pub fn chsh_max_over_relabellings(t: &CorrelationTable) -> Result<f64> {
    let e = check_2x2(t)?;
    let total: f64 = e.iter().flatten().sum();
    Ok(e.iter().flatten().map(|&c| (total - 2.0 * c).abs()).fold(0.0, f64::max))
}

/// `(E_{0,0} + E_{1,0})^2 + (E_{0,1} - E_{1,1})^2`.
pub fn uffink(t: &CorrelationTable) -> Result<f64> {
    let e = check_2x2(t)?;
    Ok((e[0][0] + e[1][0]).powi(2) + (e[0][1] - e[1][1]).powi(2))
}

/// The four sign patterns of the quadratic functional: which party carries the
/// paired sum, and which of the two pairs gets the minus sign.
pub fn uffink_variants(t: &CorrelationTable) -> Result<[f64; 4]> {
    let e = check_2x2(t)?;
    Ok([
        (e[0][0] + e[1][0]).powi(2) + (e[0][1] - e[1][1]).powi(2),
        (e[0][0] - e[1][0]).powi(2) + (e[0][1] + e[1][1]).powi(2),
        (e[0][0] + e[0][1]).powi(2) + (e[1][0] - e[1][1]).powi(2),
        (e[0][0] - e[0][1]).powi(2) + (e[1][0] + e[1][1]).powi(2),
    ])
}

pub fn uffink_max_over_relabellings(t: &CorrelationTable) -> Result<f64> {
    Ok(uffink_variants(t)?.into_iter().fold(0.0, f64::max))
}

/// Chained functional on the first `n_settings` settings of each party:
/// `|Σ_{j<N} (E_{j,j} + E_{j,j+1}) + E_{N,N} - E_{N,1}|` (1-based).
pub fn chained(t: &CorrelationTable, n_settings: usize) -> Result<f64> {
    if n_settings < 2 || t.n_settings_a() < n_settings || t.n_settings_b() < n_settings {
        return Err(GptError::Scenario(format!(
            "chained functional with N = {n_settings} needs at least N >= 2 settings per party"
        )));
    }
    let last = n_settings - 1;
    let mut s = 0.0;
    for j in 0..last {
        s += t.correlator(j, j)? + t.correlator(j, j + 1)?;
    }
    s += t.correlator(last, last)? - t.correlator(last, 0)?;
    Ok(s.abs())
}

/// Largest local weight `1 - q` compatible with a chained value `s` when the
/// nonlocal part can reach at most `2N` and the local part at most `2N - 2`.
pub fn max_local_fraction(s: f64, n_settings: usize) -> f64 {
    ((2.0 * n_settings as f64 - s) / 2.0).clamp(0.0, 1.0)
}

/// Dichotomic measurements `{e_i, u - e_i}` for the listed zero-based
/// ray-extremal effect indices of `polygon(n)`.
pub fn polygon_settings(n: usize, indices: &[usize]) -> Result<Vec<Measurement>> {
    let model = polygon::polygon(n)?;
    let rays = model.ray_extremal_effects();
    indices
        .iter()
        .map(|&k| {
            let e = rays.get(k).ok_or_else(|| GptError::InvalidParameter(format!("effect index {k} out of range")))?;
            Measurement::dichotomic(e, &model)
        })
        .collect()
}

/// Maximally entangled `2N`-gon state measured with `x = i: {e_i, ē_i}`,
/// `y = j: {e_j, ē_j}` for `i, j = 1..N`.
pub fn canonical_chained_table(n_settings: usize) -> Result<CorrelationTable> {
    if n_settings < 2 {
        return Err(GptError::InvalidParameter("N must be at least 2".into()));
    }
    let n = 2 * n_settings;
    let settings = polygon_settings(n, &(0..n_settings).collect::<Vec<_>>())?;
    correlations_from_state(&max_entangled(n)?, &settings, &settings, DEFAULT_TOL)
}

/// Correlators `E[i][j]` of the dichotomic measurements `{e_i, ē_i}`,
/// `{e_j, ē_j}` on the maximally entangled `n`-gon state.
pub fn polygon_correlators(n: usize) -> Result<DMatrix<f64>> {
    let phi = max_entangled(n)?;
    let model = phi.model_a().clone();
    let u = model.unit_effect();
    let rays = model.ray_extremal_effects();
    let p = |e: &crate::Vector, f: &crate::Vector| phi.joint_probability(e, f).expect("dims match");
    Ok(DMatrix::from_fn(rays.len(), rays.len(), |i, j| {
        let (e, f) = (rays[i], rays[j]);
        let (eb, fb) = (u - e, u - f);
        p(e, f) + p(&eb, &fb) - p(e, &fb) - p(&eb, f)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshOptimum {
    pub value: f64,
    /// Zero-based ray-extremal effect indices of Alice's settings `x = 0, 1`.
    pub alice: [usize; 2],
    /// Zero-based ray-extremal effect indices of Bob's settings `y = 0, 1`.
    pub bob: [usize; 2],
}

impl ChshOptimum {
    /// `(i0, i1, j0, j1)` with the 1-based effect labels.
    pub fn labels(&self) -> [usize; 4] {
        [self.alice[0] + 1, self.alice[1] + 1, self.bob[0] + 1, self.bob[1] + 1]
    }

    fn better_than(&self, other: &ChshOptimum) -> bool {
        self.value > other.value + TIE_TOL
    }
}

/// Exhaustive CHSH maximum for the maximally entangled `n`-gon state over all
/// dichotomic ray-extremal settings. Ties within `1e-12` resolve to the
/// lexicographically smallest `(i0, i1, j0, j1)`.
pub fn chsh_max_bruteforce(n: usize) -> Result<ChshOptimum> {
    let c = polygon_correlators(n)?;
    let k = c.nrows();
    let per_i0: Vec<ChshOptimum> = (0..k)
        .into_par_iter()
        .map(|i0| {
            let mut best = ChshOptimum { value: f64::NEG_INFINITY, alice: [i0, 0], bob: [0, 0] };
            for i1 in 0..k {
                for j0 in 0..k {
                    let partial = c[(i0, j0)] + c[(i1, j0)];
                    for j1 in 0..k {
                        let cand = ChshOptimum {
                            value: (partial + c[(i0, j1)] - c[(i1, j1)]).abs(),
                            alice: [i0, i1],
                            bob: [j0, j1],
                        };
                        if cand.better_than(&best) {
                            best = cand;
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut best = per_i0[0];
    for cand in &per_i0[1..] {
        if cand.better_than(&best) {
            best = *cand;
        }
    }
    Ok(best)
}

/// CHSH value of the maximally entangled `n`-gon state for settings at the
/// given polar angles (Alice's effect angles `alpha`, Bob's `beta`).
pub fn chsh_at_angles(n: usize, alpha: [f64; 2], beta: [f64; 2]) -> f64 {
    let r2 = polygon::radius(n).powi(2);
    let mut sum = 0.0;
    for (x, a) in alpha.iter().enumerate() {
        for (y, b) in beta.iter().enumerate() {
            let sign = if x * y == 1 { -1.0 } else { 1.0 };
            sum += sign * (a - b).cos();
        }
    }
    if n % 2 == 0 {
        (r2 * sum).abs()
    } else {
        2.0 / (1.0 + r2).powi(2) * ((r2 - 1.0).powi(2) + 2.0 * r2 * sum).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AngleSet {
    /// `α* = (0, π/2)`, `β* = (π/4, -π/4)`.
    One,
    /// `α* = (0, π/2)`, `β* = (-3π/4, 3π/4)`.
    Two,
}

impl AngleSet {
    fn base(self) -> ([f64; 2], [f64; 2]) {
        match self {
            AngleSet::One => ([0.0, FRAC_PI_2], [FRAC_PI_4, -FRAC_PI_4]),
            AngleSet::Two => ([0.0, FRAC_PI_2], [-3.0 * FRAC_PI_4, 3.0 * FRAC_PI_4]),
        }
    }
}

/// Angle set expected to be closest to the available effects for `n`:
/// set two for `n mod 8 ∈ {3, 5}`, set one otherwise.
pub fn prescribed_angle_set(n: usize) -> AngleSet {
    match n % 8 {
        3 | 5 => AngleSet::Two,
        _ => AngleSet::One,
    }
}

/// Offsets `(Δα_1, Δβ_0, Δβ_1)` in units of `π/n`, keyed by `n mod 8`.
fn angle_offsets(residue: usize) -> [f64; 3] {
    match residue {
        0 => [0.0, 1.0, 1.0],
        1 | 5 => [-0.5, -0.25, 0.25],
        2 => [1.0, 0.5, -0.5],
        3 | 7 => [0.5, 0.25, -0.25],
        4 => [0.0, 0.0, 0.0],
        6 => [1.0, -0.5, 0.5],
        _ => unreachable!("residue is taken mod 8"),
    }
}

/// Whether `angle` sits on the lattice `offset + k·step` for some integer `k`.
fn on_lattice(angle: f64, offset: f64, step: f64) -> bool {
    let k = (angle - offset) / step;
    (k - k.round()).abs() < 1e-9
}

/// Angles realized by actual extremal effects of the `n`-gon.
fn admissible(n: usize, alpha: [f64; 2], beta: [f64; 2]) -> bool {
    let step = 2.0 * PI / n as f64;
    let beta_offset = if n % 2 == 0 { PI / n as f64 } else { 0.0 };
    alpha.iter().all(|&a| on_lattice(a, 0.0, step)) && beta.iter().all(|&b| on_lattice(b, beta_offset, step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticChsh {
    pub value: f64,
    pub residue: usize,
    pub prescribed_set: AngleSet,
    pub chosen_set: AngleSet,
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
}

/// Maximal CHSH value from the optimal-angle analysis: both optimal angle sets
/// are shifted by the residue-class offsets, candidates that do not land on
/// extremal effects are discarded, and the larger admissible value wins (ties
/// go to the prescribed set).
pub fn chsh_max_analytic(n: usize) -> Result<AnalyticChsh> {
    if n < 3 {
        return Err(GptError::InvalidParameter(format!("polygon needs n >= 3, got {n}")));
    }
    let residue = n % 8;
    let unit = PI / n as f64;
    let [da1, db0, db1] = angle_offsets(residue);
    let prescribed = prescribed_angle_set(n);
    let mut best: Option<AnalyticChsh> = None;
    for set in [prescribed, if prescribed == AngleSet::One { AngleSet::Two } else { AngleSet::One }] {
        let (a, b) = set.base();
        let alpha = [a[0], a[1] + da1 * unit];
        let beta = [b[0] + db0 * unit, b[1] + db1 * unit];
        if !admissible(n, alpha, beta) {
            continue;
        }
        let value = chsh_at_angles(n, alpha, beta);
        if best.is_none_or(|b| value > b.value + TIE_TOL) {
            best = Some(AnalyticChsh {
                value,
                residue,
                prescribed_set: prescribed,
                chosen_set: set,
                alice_angles: alpha,
                bob_angles: beta,
            });
        }
    }
    best.ok_or_else(|| GptError::Consistency(format!("no admissible optimal angle set for n = {n}")))
}

/// Closed-form maximal CHSH value by residue class `n mod 8`.
pub fn chsh_closed_form(n: usize) -> f64 {
    let nf = n as f64;
    let s = 1.0 / (PI / nf).cos();
    let ang = |k: f64| (nf + k) / (4.0 * nf) * PI;
    let odd_pref = 2.0 / (1.0 + s).powi(2);
    match n % 8 {
        0 => 2.0 * 2f64.sqrt(),
        1 => odd_pref * (1.0 + s * (2.0 * ang(3.0).cos() + 6.0 * ang(1.0).sin() + s - 2.0)),
        2 => s * (3.0 * ang(2.0).cos() + ang(6.0).sin()),
        3 => -odd_pref * (1.0 - s * (6.0 * ang(1.0).cos() + 2.0 * ang(3.0).sin() - s + 2.0)),
        4 => 2.0 * 2f64.sqrt() * s,
        5 => -odd_pref * (1.0 - s * (6.0 * ang(1.0).sin() + 2.0 * ang(3.0).cos() - s + 2.0)),
        6 => s * (ang(6.0).cos() + 3.0 * ang(2.0).sin()),
        7 => odd_pref * (1.0 + s * (2.0 * ang(3.0).sin() + 6.0 * ang(1.0).cos() + s - 2.0)),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distillation {
    pub n: usize,
    pub epsilon: f64,
    /// `E_{1,0}` of the measured table.
    pub e10: f64,
    pub table: CorrelationTable,
    /// `a ⊕ b = x(y ⊕ 1)`.
    pub pr_part: CorrelationTable,
    /// `a ⊕ b = 0`.
    pub local_part: CorrelationTable,
}

/// Split the even-`n` table measured with `{e_1, ē_1}, {e_2, ē_2}` on both
/// sides into `ε P_PR + (1 - ε) P_L` with `ε = 1 - cos(2π/n)`.
pub fn distill_decompose(n: usize) -> Result<Distillation> {
    if n < 4 || n % 2 == 1 {
        return Err(GptError::InvalidParameter(format!("distillation needs even n >= 4, got {n}")));
    }
    let settings = polygon_settings(n, &[0, 1])?;
    let table = correlations_from_state(&max_entangled(n)?, &settings, &settings, DEFAULT_TOL)?;
    let c = (2.0 * PI / n as f64).cos();
    let epsilon = 1.0 - c;
    let pr_part = CorrelationTable::xor_box(2, 2, |x, y| x * (y ^ 1))?;
    let local_part = CorrelationTable::perfectly_correlated();
    let mixture = pr_part.mix(&local_part, epsilon)?;
    let err = table.max_abs_diff(&mixture);
    if err > 1e-10 {
        return Err(GptError::Consistency(format!("decomposition residual {err:e}")));
    }
    let e10 = table.correlator(1, 0)?;
    if (e10 - (2.0 * c - 1.0)).abs() > 1e-12 {
        return Err(GptError::Consistency(format!("E_10 = {e10}, expected {}", 2.0 * c - 1.0)));
    }
    Ok(Distillation { n, epsilon, e10, table, pr_part, local_part })
}
