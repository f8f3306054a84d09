//! End-to-end acceptance checks, one line per criterion.

// A NaN must fail a check, so conditions are negated as written.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::RngExt;

use common::*;
use icolab_core::bell::{self, SeesawOptions};
use icolab_core::causal::{self, AuditMode, CausalVerdict, LambdaModel, LambdaValue};
use icolab_core::process::{
    self, born_probabilities, born_probabilities_with_future, mix, ordered_process, quantum_switch_process,
    separability_heuristic, validate_process, Channel, Instrument, PostHandling, SeparabilityOptions,
    SeparabilityOutcome,
};
use icolab_core::scenario::{builtin_scenario, run_scenario};
use icolab_core::switch::{self, ControlAmplitudes, ControlMeasurement, SwitchOps, SwitchSpec};
use icolab_core::tensor::{c, gates};
use icolab_core::{BehaviorTable, ComplexMatrix, DensityOperator, Order, SpaceLayout};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn two_qubit(m: &M) -> DensityOperator {
    DensityOperator::new(to_lib(m), SpaceLayout::new([("t1", 2), ("t2", 2)]).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let ops = SwitchOps::without_free_evolution(gates::x(), gates::z(), ComplexMatrix::basis(2, 0)).unwrap();
    let spec = SwitchSpec::new(ops, ControlAmplitudes::balanced()).unwrap();
    let out = switch::switch_output(&spec).unwrap();
    let outcomes = switch::measure_control(&out, &ControlMeasurement::plus_minus()).unwrap();
    let p_minus = outcomes.iter().find(|o| o.label == "-").unwrap().probability;
    ensure!((p_minus - 1.0).abs() <= 1e-12, "state-level P(-) = {p_minus}");

    // Same experiment through the switch process, future control measured in ±.
    let w = quantum_switch_process(ControlAmplitudes::balanced(), &ComplexMatrix::basis(2, 0)).unwrap();
    let a = Instrument::unitaries(&[gates::x()]).unwrap();
    let b = Instrument::unitaries(&[gates::z()]).unwrap();
    let effect = icolab_core::tensor::tensor(&gates::minus().projector(), &ComplexMatrix::identity(2)).unwrap();
    let t = born_probabilities_with_future(&w, &a, &b, Some(&effect)).unwrap();
    let p_process = t.p(0, 0, 0, 0);
    ensure!((p_process - 1.0).abs() <= 1e-12, "process-level P(-) = {p_process}");
    Ok(format!("P(-) = {p_minus:.15} (state), {p_process:.15} (process)"))
}

fn criterion_2() -> Outcome {
    let r = run_scenario(&builtin_scenario("double-switch-coherent").unwrap()).unwrap();
    let s = r.chsh.result.value;
    let n = r.state.negativity;
    ensure!((s - 2.0 * SQRT_2).abs() <= 1e-6, "S = {s}");
    ensure!((n - 0.5).abs() <= 1e-9, "negativity = {n}");
    // Hand-derived conditioned targets: (|−−⟩ + |++⟩)/√2.
    let plus = ket(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
    let minus = ket(&[c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]);
    let psi = (kron(&minus, &minus) + kron(&plus, &plus)) / c(SQRT_2, 0.0);
    let oracle_s = max_chsh(&(&psi * psi.adjoint()));
    let oracle_n = pure_negativity(&psi);
    ensure!((oracle_s - s).abs() <= 1e-6, "oracle S = {oracle_s}, optimizer S = {s}");
    ensure!((oracle_n - n).abs() <= 1e-9, "oracle negativity = {oracle_n}");
    Ok(format!("S = {s:.12}, negativity = {n:.12}"))
}

fn criterion_3() -> Outcome {
    let r = run_scenario(&builtin_scenario("classical-order-baseline").unwrap()).unwrap();
    let s = r.chsh.result.value;
    ensure!(s <= 2.0 + 1e-9, "S = {s}");
    let CausalVerdict::Causal(d) = &r.causal_membership.verdict else {
        return Err(format!("verdict {:?}", r.causal_membership.verdict));
    };
    ensure!((d.q - 0.3).abs() <= 1e-6, "recovered q = {}", d.q);
    let recon = d.component_ab.mix(&d.component_ba, d.q).unwrap();
    let err = recon.max_abs_diff(&r.causal_membership.behavior);
    ensure!(err <= 1e-8, "decomposition misses the table by {err:e}");
    let ab = causal::signaling_directions(&d.component_ab, 1e-8).unwrap();
    let ba = causal::signaling_directions(&d.component_ba, 1e-8).unwrap();
    ensure!(!ab.b_to_a && !ba.a_to_b, "components signal backwards: {ab:?} {ba:?}");
    Ok(format!("S = {s:.12}, q = {:.9}", d.q))
}

fn criterion_4() -> Outcome {
    let r = run_scenario(&builtin_scenario("a5-violated-definite-order").unwrap()).unwrap();
    let (n, s, audit) = (r.state.negativity, r.chsh.result.value, &r.temporal_locality);
    ensure!(n > 0.0, "negativity = {n}");
    ensure!(s > 2.1, "S = {s}");
    ensure!(audit.mode == AuditMode::Strict, "audit mode {:?}", audit.mode);
    ensure!(audit.pass, "audit failed with deviation {}", audit.max_deviation);
    Ok(format!("negativity = {n:.6}, S = {s:.9}, strict audit max deviation = {:e}", audit.max_deviation))
}

fn criterion_5() -> Outcome {
    let opts = SeesawOptions::default();
    let mut worst_q: f64 = 0.0;
    let mut worst_sep: f64 = 0.0;
    for seed in 0..200 {
        let mut r = rng(5_000 + seed);
        let rho = if seed % 2 == 0 {
            let v = random_ket(&mut r, 4);
            &v * v.adjoint()
        } else {
            random_density(&mut r, 4)
        };
        let s = bell::optimize_chsh(&two_qubit(&rho), &opts, None).unwrap().value;
        ensure!(s <= 2.0 * SQRT_2 + 1e-9, "seed {seed}: S = {s}");
        let oracle = max_chsh(&rho);
        ensure!(s <= oracle + 1e-9, "seed {seed}: S = {s} above the closed-form maximum {oracle}");
        worst_q = worst_q.max(s);

        let sep = random_separable(&mut r, 1 + (seed as usize % 4));
        let s = bell::optimize_chsh(&two_qubit(&sep), &opts, None).unwrap().value;
        ensure!(s <= 2.0 + 1e-9, "separable seed {seed}: S = {s}");
        worst_sep = worst_sep.max(s);
    }
    Ok(format!("max S over 200 random states = {worst_q:.9}, over 200 separable states = {worst_sep:.9}"))
}

fn lib_instrument(k: &[Vec<M>]) -> Instrument {
    let kraus: Vec<Vec<Vec<ComplexMatrix>>> = k.iter().map(|row| row.iter().map(|m| vec![to_lib(m)]).collect()).collect();
    Instrument::from_kraus(&kraus).unwrap()
}

fn random_ordered(r: &mut rand_chacha::ChaCha8Rng, order: Order, post: PostHandling) -> (process::ProcessMatrix, M, Vec<M>) {
    let rho = random_density(r, 2);
    let mid = random_channel(r, 2, 2, 2);
    let kraus: Vec<ComplexMatrix> = mid.iter().map(to_lib).collect();
    let w = ordered_process(order, &to_lib(&rho), &Channel::from_kraus(&kraus).unwrap(), post).unwrap();
    (w, rho, mid)
}

fn criterion_6() -> Outcome {
    // Normalization over 200 seeded (process, instruments) pairs.
    let mut worst_norm: f64 = 0.0;
    for seed in 0..200u64 {
        let mut r = rng(6_000 + seed);
        let w = match seed % 4 {
            0 => random_ordered(&mut r, Order::AB, PostHandling::Discard(2)).0,
            1 => random_ordered(&mut r, Order::BA, PostHandling::Future(2)).0,
            2 => {
                let q: f64 = r.random();
                let a = random_ordered(&mut r, Order::AB, PostHandling::Discard(2)).0;
                let b = random_ordered(&mut r, Order::BA, PostHandling::Discard(2)).0;
                mix(&a, &b, q).unwrap()
            }
            _ => {
                let amp = random_ket(&mut r, 2);
                let control = ControlAmplitudes::new(amp[(0, 0)], amp[(1, 0)]).unwrap();
                quantum_switch_process(control, &to_lib(&random_ket(&mut r, 2))).unwrap()
            }
        };
        let a = lib_instrument(&random_instrument(&mut r, 2, 2, 2, 2));
        let b = lib_instrument(&random_instrument(&mut r, 2, 2, 2, 2));
        let t = born_probabilities(&w, &a, &b).map_err(|e| format!("seed {seed}: {e}"))?;
        for x in 0..2 {
            for y in 0..2 {
                worst_norm = worst_norm.max((t.block_sum(x, y) - 1.0).abs());
            }
        }
        ensure!(t.probs().iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)), "seed {seed}: probability out of range");
    }
    ensure!(worst_norm <= 1e-10, "normalization error {worst_norm:e}");

    // Definite-order processes against direct sequential simulation.
    let mut worst_circuit: f64 = 0.0;
    for seed in 0..50u64 {
        let mut r = rng(6_500 + seed);
        let order = if seed % 2 == 0 { Order::AB } else { Order::BA };
        let (w, rho, mid) = random_ordered(&mut r, order, PostHandling::Discard(2));
        let ka = random_instrument(&mut r, 2, 2, 2, 2);
        let kb = random_instrument(&mut r, 2, 2, 2, 2);
        let t = born_probabilities(&w, &lib_instrument(&ka), &lib_instrument(&kb)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for oa in 0..2 {
                    for ob in 0..2 {
                        let direct = match order {
                            Order::AB => sequential_probability(&rho, &ka[x][oa], &mid, &kb[y][ob]),
                            Order::BA => sequential_probability(&rho, &kb[y][ob], &mid, &ka[x][oa]),
                        };
                        worst_circuit = worst_circuit.max((direct - t.p(oa, ob, x, y)).abs());
                    }
                }
            }
        }
    }
    ensure!(worst_circuit <= 1e-10, "circuit mismatch {worst_circuit:e}");

    let wqs = quantum_switch_process(ControlAmplitudes::balanced(), &ComplexMatrix::basis(2, 0)).unwrap();
    let v = validate_process(&wqs).unwrap();
    ensure!(v.valid, "switch process invalid: {v:?}");

    let opts = SeparabilityOptions::default();
    let mut worst_q: f64 = 0.0;
    for seed in 0..6u64 {
        let mut r = rng(6_900 + seed);
        let post = if seed == 0 { PostHandling::Discard(2) } else { PostHandling::Future(2) };
        let a = random_ordered(&mut r, Order::AB, post).0;
        let b = random_ordered(&mut r, Order::BA, post).0;
        let m = mix(&a, &b, 0.3).unwrap();
        match separability_heuristic(&m, &opts).unwrap() {
            SeparabilityOutcome::Separable(cert) => worst_q = worst_q.max((cert.q - 0.3).abs()),
            SeparabilityOutcome::Inconclusive { residual, .. } => {
                return Err(format!("mixture seed {seed}: no certificate (residual {residual:e})"))
            }
        }
    }
    ensure!(worst_q <= 1e-4, "q recovery error {worst_q:e}");
    let residual = match separability_heuristic(&wqs, &opts).unwrap() {
        SeparabilityOutcome::Separable(c) => return Err(format!("switch process certified separable with q = {}", c.q)),
        SeparabilityOutcome::Inconclusive { residual, .. } => residual,
    };
    ensure!(residual > 1e-3, "switch residual {residual:e}");
    Ok(format!(
        "normalization error {worst_norm:.1e}, circuit mismatch {worst_circuit:.1e}, q error {worst_q:.1e}, switch residual {residual:.3e}"
    ))
}

fn random_table(r: &mut rand_chacha::ChaCha8Rng, verts: &[Vec<f64>]) -> Vec<f64> {
    let causal_sample = |r: &mut rand_chacha::ChaCha8Rng| {
        let k = 1 + r.random_range(0..6);
        let mut t = [0.0; 16];
        let mut total = 0.0;
        for _ in 0..k {
            let v = &verts[r.random_range(0..verts.len())];
            let w: f64 = r.random::<f64>() + 1e-2;
            total += w;
            for (ti, vi) in t.iter_mut().zip(v) {
                *ti += w * vi;
            }
        }
        t.iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    match r.random_range(0..3) {
        0 => causal_sample(r),
        1 => {
            let f = r.random_range(0..16usize);
            let g = r.random_range(0..16usize);
            let mut two_way = [0.0; 16];
            for x in 0..2 {
                for y in 0..2 {
                    let (a, b) = ((f >> (2 * x + y)) & 1, (g >> (2 * x + y)) & 1);
                    two_way[((x * 2 + y) * 2 + a) * 2 + b] = 1.0;
                }
            }
            let w: f64 = r.random();
            let base = causal_sample(r);
            two_way.iter().zip(base).map(|(t, b)| w * t + (1.0 - w) * b).collect()
        }
        _ => {
            let mut t = vec![0.0; 16];
            for block in t.chunks_mut(4) {
                let raw: Vec<f64> = (0..4).map(|_| r.random::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                for (ti, ri) in block.iter_mut().zip(raw) {
                    *ti = ri / s;
                }
            }
            t
        }
    }
}

fn criterion_7() -> Outcome {
    let verts = causal_vertices();
    let mut r = rng(7_000);
    let (mut disagreements, mut n_causal) = (0, 0);
    for k in 0..200 {
        let p = random_table(&mut r, &verts);
        let table = BehaviorTable::new((2, 2), (2, 2), p.clone()).unwrap();
        let oracle = causal_hull_distance(&p) <= 1e-7;
        let lp = causal::causal_membership(&table, causal::DEFAULT_CAUSAL_TOL).unwrap().is_causal();
        if oracle != lp {
            disagreements += 1;
            eprintln!("table {k}: oracle {oracle}, lp {lp}");
        }
        n_causal += usize::from(oracle);
    }
    ensure!(disagreements == 0, "{disagreements} disagreements");
    let two_way = BehaviorTable::deterministic((2, 2), (2, 2), |_, y| y, |x, _| x).unwrap();
    let margin = match causal::causal_membership(&two_way, causal::DEFAULT_CAUSAL_TOL).unwrap() {
        CausalVerdict::NotCausal { violation_margin } => violation_margin,
        CausalVerdict::Causal(_) => return Err("two-way table accepted".into()),
    };
    ensure!(margin > 0.0, "margin {margin}");
    Ok(format!("0 disagreements over 200 tables ({n_causal} causal), two-way margin {margin:.6}"))
}

fn lambda_values(n: usize) -> Vec<LambdaValue> {
    (0..n).map(|k| LambdaValue { label: format!("l{k}"), weight: 1.0 / n as f64 }).collect()
}

/// Model with binary settings and outcomes from closures over (a, b, λa, λb, i, j).
fn model(
    nl: (usize, usize),
    joint: impl Fn(usize, usize, usize, usize, usize, usize) -> f64,
    mi: impl Fn(usize, usize, usize) -> f64,
    mj: impl Fn(usize, usize, usize) -> f64,
) -> LambdaModel {
    let mut j = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for la in 0..nl.0 {
                for lb in 0..nl.1 {
                    for i in 0..2 {
                        for jj in 0..2 {
                            j.push(joint(a, b, la, lb, i, jj));
                        }
                    }
                }
            }
        }
    }
    let flat = |n: usize, f: &dyn Fn(usize, usize, usize) -> f64| -> Vec<f64> {
        (0..2).flat_map(|s| (0..n).flat_map(move |l| (0..2).map(move |o| (s, l, o)))).map(|(s, l, o)| f(s, l, o)).collect()
    };
    LambdaModel {
        mode: AuditMode::Strict,
        settings: [2, 2],
        outcomes: [2, 2],
        lambda_a: lambda_values(nl.0),
        lambda_b: lambda_values(nl.1),
        joint: j,
        marginal_i: Some(flat(nl.0, &mi)),
        marginal_j: Some(flat(nl.1, &mj)),
        gamma: None,
    }
}

fn criterion_8() -> Outcome {
    let mut r = rng(8_000);
    let pa: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
    let pb: Vec<f64> = (0..6).map(|_| r.random::<f64>()).collect();
    let bern = |p: f64, o: usize| if o == 0 { p } else { 1.0 - p };
    let mi = |a: usize, la: usize, i: usize| bern(pa[a * 3 + la], i);
    let mj = |b: usize, lb: usize, j: usize| bern(pb[b * 3 + lb], j);
    let product = model((3, 3), |a, b, la, lb, i, j| mi(a, la, i) * mj(b, lb, j), mi, mj);
    let rep = causal::temporal_locality_audit(&product, 1e-12).unwrap();
    ensure!(rep.pass && rep.max_deviation <= 1e-12, "factorized model: {rep:?}");

    let delta = |x: bool| if x { 1.0 } else { 0.0 };
    let flip = model(
        (1, 1),
        |a, b, _, _, i, j| delta(i == a ^ b) * delta(j == 0),
        |a, _, i| delta(i == a),
        |_, _, j| delta(j == 0),
    );
    let rep_flip = causal::temporal_locality_audit(&flip, 1e-12).unwrap();
    ensure!(!rep_flip.pass && (rep_flip.max_deviation - 1.0).abs() <= 1e-12, "flip model: {rep_flip:?}");
    ensure!(rep_flip.worst_case.as_ref().is_some_and(|w| w.b == 1), "worst case {:?}", rep_flip.worst_case);

    let shared = model(
        (2, 2),
        |_, _, la, lb, i, j| delta(la == lb && i == la && j == lb),
        |_, la, i| delta(i == la),
        |_, lb, j| delta(j == lb),
    );
    let rep_shared = causal::temporal_locality_audit(&shared, 1e-12).unwrap();
    ensure!(rep_shared.pass && rep_shared.max_deviation <= 1e-12, "shared-λ model: {rep_shared:?}");
    Ok(format!(
        "factorized {:.1e}, i = a xor b {:.12} (fails), shared λ {:.1e}",
        rep.max_deviation, rep_flip.max_deviation, rep_shared.max_deviation
    ))
}

fn criterion_9() -> Outcome {
    let config = builtin_scenario("classical-order-baseline").unwrap();
    let first = run_scenario(&config).unwrap().to_json().unwrap();
    let second = run_scenario(&config).unwrap().to_json().unwrap();
    ensure!(first == second, "reports differ");
    Ok(format!("two runs produced identical {}-byte reports", first.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("switch correctness", criterion_1),
        ("double-switch violation", criterion_2),
        ("classical-order baseline", criterion_3),
        ("definite-order dichotomy", criterion_4),
        ("Tsirelson and separable bounds", criterion_5),
        ("process-matrix soundness", criterion_6),
        ("causal polytope", criterion_7),
        ("temporal-locality audit", criterion_8),
        ("reproducibility", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
