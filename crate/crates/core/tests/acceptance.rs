//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polybox::bipartite::{push_local_map, JointState, LocalMap};
use polybox::correlations::{
    canonical_chained_table, chained, chsh_max_analytic, chsh_max_bruteforce, correlations_from_state,
    distill_decompose,
};
use polybox::gpt::{Measurement, ModelSpec};
use polybox::house::{house_joint_state, house_model, house_uffink_demo};
use polybox::linalg::{reflection_y, rotation_z};
use polybox::polygon::{max_entangled, max_entangled_matrix, polygon};
use polybox::q1::{certificate_from_inner_product_state, q1_necessary_conditions, verify_delta_decomposition, Verdict};
use polybox::selfdual::{classify, is_symmetric_psd, state_from_isomorphism, EXHAUSTIVE_RAY_CAP};
use polybox::DEFAULT_TOL;

const TSIRELSON: f64 = 2.0 * SQRT_2;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let values: Vec<(usize, f64)> = (3..=32).map(|n| (n, chsh_max_bruteforce(n).unwrap().value)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    for &(n, s) in &values {
        if n % 2 == 1 {
            ensure(s <= TSIRELSON + 1e-9, || format!("n = {n}: S = {s} above 2√2"))?;
        } else {
            ensure(s >= TSIRELSON - 1e-9, || format!("n = {n}: S = {s} below 2√2"))?;
        }
    }
    ensure((values[1].1 - 4.0).abs() <= 1e-12, || format!("n = 4: S = {}", values[1].1))?;
    ensure((values[5].1 - TSIRELSON).abs() <= 1e-9, || format!("n = 8: S = {}", values[5].1))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("n = 3..32, odd <= 2√2 <= even, S(4) = 4, S(8) = 2√2, {elapsed:.2} s"))
}

fn ac2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut per_class = [0usize; 8];
    for n in 3..=32 {
        let a = chsh_max_analytic(n).map_err(|e| format!("n = {n}: {e}"))?.value;
        let b = chsh_max_bruteforce(n).unwrap().value;
        ensure((a - b).abs() <= 1e-9, || format!("n = {n}: analytic {a} vs brute force {b}"))?;
        worst = worst.max((a - b).abs());
        per_class[n % 8] += 1;
    }
    ensure(per_class.iter().all(|&c| c >= 3), || format!("class coverage {per_class:?}"))?;
    Ok(format!("n = 3..32, max deviation {worst:.1e}, classes covered {per_class:?}"))
}

fn ac3() -> Outcome {
    for big_n in 2..=6 {
        let t = canonical_chained_table(big_n).map_err(|e| e.to_string())?;
        let s = chained(&t, big_n).map_err(|e| e.to_string())?;
        ensure((s - 2.0 * big_n as f64).abs() <= 1e-10, || format!("N = {big_n}: S = {s}"))?;
    }
    Ok("S_N = 2N for N = 2..6".into())
}

fn ac4() -> Outcome {
    for n in (4..=32).step_by(2) {
        let d = distill_decompose(n).map_err(|e| format!("n = {n}: {e}"))?;
        let c = (2.0 * PI / n as f64).cos();
        ensure((d.epsilon - (1.0 - c)).abs() <= 1e-15, || format!("n = {n}: ε = {}", d.epsilon))?;
        let mix = d.pr_part.mix(&d.local_part, d.epsilon).unwrap();
        let err = d.table.max_abs_diff(&mix);
        ensure(err <= 1e-10, || format!("n = {n}: residual {err:e}"))?;
        ensure((d.e10 - (2.0 * c - 1.0)).abs() <= 1e-12, || format!("n = {n}: E10 = {}", d.e10))?;
    }
    Ok("even n = 4..32 split into ε PR + (1-ε) local".into())
}

fn ac5() -> Outcome {
    for n in 3..=32 {
        let ip = max_entangled(n).unwrap().is_inner_product_state(DEFAULT_TOL).unwrap().is_inner_product();
        ensure(ip == (n % 2 == 1), || format!("n = {n}: inner product = {ip}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 2..=6 {
        let m = Arc::new(ModelSpec::classical(k).unwrap());
        for _ in 0..20 {
            let q: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = q.iter().sum();
            let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, q.iter().map(|x| x / total)));
            let s = JointState::new(diag, m.clone(), m.clone()).unwrap();
            ensure(s.is_inner_product_state(DEFAULT_TOL).unwrap().is_inner_product(), || format!("classical k = {k} rejected"))?;
        }
    }
    Ok("φ(n) inner product iff n odd (3..32); 100 diagonal classical states pass".into())
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    let mut worst: f64 = f64::INFINITY;
    for n in (3..=15).step_by(2) {
        let phi = max_entangled(n).unwrap();
        let m = phi.model_a().clone();
        let meas: Vec<Measurement> = m.ray_extremal_effects().iter().map(|e| Measurement::dichotomic(e, &m).unwrap()).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for &(a0, a1) in &pairs {
            for &(b0, b1) in &pairs {
                let ma = [meas[a0].clone(), meas[a1].clone()];
                let mb = [meas[b0].clone(), meas[b1].clone()];
                let cert = certificate_from_inner_product_state(&phi, &ma, &mb, DEFAULT_TOL)
                    .map_err(|e| format!("n = {n}, settings {a0},{a1} / {b0},{b1}: {e}"))?;
                let max = cert.spectrum.iter().fold(0.0f64, |x, y| x.max(y.abs()));
                ensure(cert.min_eigenvalue() >= -1e-9 * max, || format!("n = {n}: min eigenvalue {}", cert.min_eigenvalue()))?;
                worst = worst.min(cert.min_eigenvalue() / max);
                count += 1;
            }
        }
        for e in m.ray_extremal_effects() {
            let dich = Measurement::dichotomic(e, &m).unwrap();
            ensure(verify_delta_decomposition(&phi, &dich, DEFAULT_TOL).unwrap(), || format!("n = {n}: r = 2 decomposition"))?;
        }
    }
    let tri = max_entangled(3).unwrap();
    let trine_effects: Vec<_> = tri.model_a().ray_extremal_effects().into_iter().cloned().collect();
    let trine = Measurement::new(trine_effects, tri.model_a()).map_err(|e| e.to_string())?;
    ensure(verify_delta_decomposition(&tri, &trine, DEFAULT_TOL).unwrap(), || "r = 3 trine decomposition".into())?;
    let cl = Arc::new(ModelSpec::classical(3).unwrap());
    let trits = JointState::new(DMatrix::identity(3, 3) / 3.0, cl.clone(), cl.clone()).unwrap();
    let readout = Measurement::new(cl.extremal_effects().to_vec(), &cl).unwrap();
    ensure(verify_delta_decomposition(&trits, &readout, DEFAULT_TOL).unwrap(), || "r = 3 trit decomposition".into())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 30.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("{count} certificates PSD (worst min/max eigenvalue {worst:.1e}), δ splits for r = 2, 3, {elapsed:.2} s"))
}

/// Random local map on a polygon: a dihedral symmetry mixed with a preparation.
fn random_local_map(n: usize, m: &ModelSpec, rng: &mut ChaCha8Rng) -> LocalMap {
    let step = 2.0 * PI / n as f64;
    let mut sym = rotation_z(step * rng.gen_range(0..n) as f64);
    if rng.gen_bool(0.5) {
        sym = sym * reflection_y();
    }
    let w = &m.extremal_states()[rng.gen_range(0..n)];
    let prep = LocalMap::prepare(w, m);
    let lambda: f64 = rng.gen_range(0.0..=1.0);
    LocalMap::new(sym * lambda + prep.matrix() * (1.0 - lambda)).unwrap()
}

/// Random inner product state: a mixture of `φ(n)` (odd `n`) and symmetric products.
fn random_inner_product_state(n: usize, m: &Arc<ModelSpec>, rng: &mut ChaCha8Rng) -> JointState {
    let w = &m.extremal_states()[rng.gen_range(0..n)];
    let product = JointState::product(w, w, m.clone(), m.clone()).unwrap();
    if n % 2 == 1 {
        let phi = JointState::new(max_entangled_matrix(n).unwrap(), m.clone(), m.clone()).unwrap();
        phi.mix(&product, rng.gen_range(0.0..=1.0)).unwrap()
    } else {
        product
    }
}

fn random_measurement(m: &ModelSpec, rng: &mut ChaCha8Rng) -> Measurement {
    let effects = m.extremal_effects();
    let e = effects[rng.gen_range(0..effects.len())].scale(rng.gen_range(0.0..=1.0));
    Measurement::dichotomic(&e, m).unwrap()
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(3..=12);
        let m = Arc::new(polygon(n).unwrap());
        let sigma = random_inner_product_state(n, &m, &mut rng);
        let tau = random_local_map(n, &m, &mut rng);
        let omega = push_local_map(&sigma, &tau, DEFAULT_TOL).map_err(|e| format!("n = {n}: {e}"))?;
        let ma: Vec<Measurement> = (0..2).map(|_| random_measurement(&m, &mut rng)).collect();
        let mb: Vec<Measurement> = (0..2).map(|_| random_measurement(&m, &mut rng)).collect();
        let pulled: Vec<Measurement> = mb.iter().map(|x| tau.pull_back(x).unwrap()).collect();
        let direct = correlations_from_state(&omega, &ma, &mb, DEFAULT_TOL).map_err(|e| e.to_string())?;
        let via = correlations_from_state(&sigma, &ma, &pulled, DEFAULT_TOL).map_err(|e| e.to_string())?;
        let err = direct.max_abs_diff(&via);
        ensure(err <= 1e-12, || format!("n = {n}: mismatch {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("100 random instances, max deviation {worst:.1e}"))
}

fn ac8() -> Outcome {
    let check_witnesses = |m: &ModelSpec| -> Result<(bool, usize), String> {
        let c = classify(m, DEFAULT_TOL);
        let shared = Arc::new(m.clone());
        for t in &c.witnesses {
            let s = state_from_isomorphism(t, &shared, DEFAULT_TOL).map_err(|e| format!("{}: {e}", m.name()))?;
            let ip = s.is_inner_product_state(DEFAULT_TOL).unwrap().is_inner_product();
            ensure(ip == is_symmetric_psd(t, DEFAULT_TOL), || format!("{}: witness/state mismatch", m.name()))?;
        }
        Ok((c.strong, c.witnesses.len()))
    };
    for n in 3..=32 {
        let (strong, count) = check_witnesses(&polygon(n).unwrap())?;
        ensure(count > 0, || format!("n = {n}: no isomorphism found"))?;
        ensure(strong == (n % 2 == 1), || format!("n = {n}: strong = {strong}"))?;
    }
    let (strong, _) = check_witnesses(&house_model())?;
    ensure(strong, || "house not strongly self-dual".into())?;
    Ok(format!(
        "polygon(n) strong iff odd, n = 3..32 (exhaustive up to {EXHAUSTIVE_RAY_CAP} rays); house strong; witnesses consistent"
    ))
}

fn ac9() -> Outcome {
    let demo = house_uffink_demo().map_err(|e| e.to_string())?;
    ensure((demo.uffink - 17.0 / 4.0).abs() <= 1e-10, || format!("Uffink value {}", demo.uffink))?;
    let report = q1_necessary_conditions(&demo.table, DEFAULT_TOL).unwrap();
    ensure(report.verdict == Verdict::NotInQ1, || "not flagged outside Q1".into())?;
    let state = house_joint_state();
    let rank = state.active_constraint_rank(DEFAULT_TOL);
    ensure(state.is_extremal(DEFAULT_TOL) == Ok(true) && rank == 9, || format!("rank {rank}"))?;
    ensure(demo.chsh <= TSIRELSON, || format!("CHSH {}", demo.chsh))?;
    Ok(format!("Uffink = {}, not in Q1, rank {rank}, CHSH = {}", demo.uffink, demo.chsh))
}

fn ac10() -> Outcome {
    let m = polygon(3).unwrap();
    let mut sum = DMatrix::zeros(3, 3);
    for w in m.extremal_states() {
        let v = w.to_dvector();
        sum += &v * v.transpose() / 3.0;
    }
    let err = (sum - max_entangled_matrix(3).unwrap()).amax();
    ensure(err <= 1e-12, || format!("separable decomposition off by {err:e}"))?;
    let s = chsh_max_bruteforce(3).unwrap().value;
    ensure(s <= 2.0 + 1e-9, || format!("S = {s}"))?;
    Ok(format!("φ(3) = (1/3)Σ ω_i⊗ω_i (err {err:.1e}), S = {s}"))
}

fn main() -> ExitCode {
    let checks: [(&str, &str, fn() -> Outcome); 10] = [
        ("AC1", "CHSH ceiling/floor", ac1),
        ("AC2", "analytic CHSH agreement", ac2),
        ("AC3", "chained maximum", ac3),
        ("AC4", "distillation decomposition", ac4),
        ("AC5", "inner product classification", ac5),
        ("AC6", "Q1 certificates", ac6),
        ("AC7", "pushforward equivalence", ac7),
        ("AC8", "self-duality classification", ac8),
        ("AC9", "house counterexample", ac9),
        ("AC10", "separability at n = 3", ac10),
    ];
    let mut failed = 0;
    for (id, name, f) in checks {
        match f() {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
