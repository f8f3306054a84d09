//! Behavior tables from two-qubit states, the CHSH functional, its classical
//! bound, and a seesaw optimizer over ±1-valued qubit observables.
//!
//! For traceless observables `A = a·σ`, `B = b·σ` the correlator is
//! `E = aᵀ T b` with `T_ij = tr[ρ σ_i ⊗ σ_j]`. Fixing one party's pair of
//! directions, the other party's optimum is closed-form: each of its vectors is
//! the unit direction of the corresponding combination of correlation vectors.
//! Alternating these updates never decreases S.

use nalgebra::{Matrix3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorTable;
use crate::error::{Error, Result};
use crate::state::DensityOperator;
use crate::switch::{condition_on_control, ControlMeasurement};
use crate::tensor::{self, ComplexMatrix};

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_CONVERGENCE: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 0x5EE5_A3C4_15D0_0001;

/// Bloch direction (θ, φ) of a ±1 qubit observable n·σ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let n = v.norm();
        let z = if n > 0.0 { (v.z / n).clamp(-1.0, 1.0) } else { 1.0 };
        Self { theta: z.acos(), phi: v.y.atan2(v.x) }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }

    /// n·σ as a 2×2 matrix.
    pub fn observable(&self) -> ComplexMatrix {
        let n = self.vector();
        let m = [
            tensor::re(n.z),
            tensor::c(n.x, -n.y),
            tensor::c(n.x, n.y),
            tensor::re(-n.z),
        ];
        ComplexMatrix::from_row_major(2, 2, &m).expect("2x2")
    }

    /// Projector onto the eigenvalue `+1` (outcome 0) or `-1` (outcome 1).
    pub fn projector(&self, outcome: usize) -> ComplexMatrix {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        (&ComplexMatrix::identity(2) + &self.observable().scale_re(sign)).scale_re(0.5)
    }
}

/// One observable per classical input of a measuring party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub observables: Vec<BlochAngles>,
}

impl MeasurementSetting {
    pub fn new(observables: Vec<BlochAngles>) -> Result<Self> {
        if observables.is_empty() {
            return Err(Error::InvalidParameter("a setting needs at least one input".into()));
        }
        Ok(Self { observables })
    }

    /// Z on every input.
    pub fn z_basis(inputs: usize) -> Self {
        Self { observables: vec![BlochAngles::new(0.0, 0.0); inputs] }
    }

    /// Equatorial observables at the given azimuths.
    pub fn equatorial(phis: &[f64]) -> Self {
        Self {
            observables: phis
                .iter()
                .map(|&p| BlochAngles::new(std::f64::consts::FRAC_PI_2, p))
                .collect(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.observables.len()
    }
}

fn two_qubit_check(rho: &DensityOperator) -> Result<()> {
    if rho.layout().dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "expected a two-qubit state, got factor dims {:?}",
            rho.layout().dims()
        )));
    }
    Ok(())
}

/// Born-rule table p(a,b|x,y) = tr[ρ (P_a^x ⊗ P_b^y)].
pub fn behavior(rho: &DensityOperator, c1: &MeasurementSetting, c2: &MeasurementSetting) -> Result<BehaviorTable> {
    two_qubit_check(rho)?;
    let proj1: Vec<[ComplexMatrix; 2]> = c1.observables.iter().map(|o| [o.projector(0), o.projector(1)]).collect();
    let proj2: Vec<[ComplexMatrix; 2]> = c2.observables.iter().map(|o| [o.projector(0), o.projector(1)]).collect();
    let mut probs = Vec::with_capacity(c1.inputs() * c2.inputs() * 4);
    for p1 in &proj1 {
        for p2 in &proj2 {
            for pa in p1 {
                for pb in p2 {
                    let e = tensor::tensor(pa, pb)?;
                    probs.push((rho.matrix() * &e).trace().re.clamp(0.0, 1.0));
                }
            }
        }
    }
    BehaviorTable::new((c1.inputs(), c2.inputs()), (2, 2), probs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// S = E(0,0) + E(0,1) + E(1,0) − E(1,1).
    pub value: f64,
    /// `correlators[x][y]` = E(x, y).
    pub correlators: [[f64; 2]; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settings: Option<(MeasurementSetting, MeasurementSetting)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn chsh(table: &BehaviorTable) -> Result<ChshResult> {
    if table.inputs() != (2, 2) || table.outputs() != (2, 2) {
        return Err(Error::InvalidTable(format!(
            "CHSH needs binary inputs and outputs, got inputs {:?} outputs {:?}",
            table.inputs(),
            table.outputs()
        )));
    }
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, slot) in row.iter_mut().enumerate() {
            *slot = table.p(0, 0, x, y) + table.p(1, 1, x, y) - table.p(0, 1, x, y) - table.p(1, 0, x, y);
        }
    }
    Ok(ChshResult {
        value: e[0][0] + e[0][1] + e[1][0] - e[1][1],
        correlators: e,
        settings: None,
        seed: None,
    })
}

/// S for every deterministic local strategy (a₀, a₁, b₀, b₁) ∈ {±1}⁴.
pub fn deterministic_chsh_values() -> Vec<f64> {
    let signs = [1.0, -1.0];
    let mut out = Vec::with_capacity(16);
    for a0 in signs {
        for a1 in signs {
            for b0 in signs {
                for b1 in signs {
                    out.push(a0 * b0 + a0 * b1 + a1 * b0 - a1 * b1);
                }
            }
        }
    }
    out
}

/// Largest CHSH value over deterministic local strategies.
pub fn classical_chsh_bound() -> f64 {
    deterministic_chsh_values().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Real correlation matrix `T_ij = tr[ρ σ_i ⊗ σ_j]` of a two-qubit state.
pub fn correlation_matrix(rho: &DensityOperator) -> Result<Matrix3<f64>> {
    two_qubit_check(rho)?;
    let paulis = [tensor::gates::x(), tensor::gates::y(), tensor::gates::z()];
    let mut t = Matrix3::zeros();
    for (i, si) in paulis.iter().enumerate() {
        for (j, sj) in paulis.iter().enumerate() {
            t[(i, j)] = (rho.matrix() * &tensor::tensor(si, sj)?).trace().re;
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeesawOptions {
    pub restarts: usize,
    /// Convergence threshold on the per-iteration gain in S.
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            tol: DEFAULT_CONVERGENCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: DEFAULT_SEED,
        }
    }
}

/// One seesaw run from a given starting pair for party 2.
#[derive(Clone, Debug)]
pub struct SeesawRun {
    /// S after each full (party 1, party 2) update.
    pub history: Vec<f64>,
    pub a: [Vector3<f64>; 2],
    pub b: [Vector3<f64>; 2],
}

impl SeesawRun {
    pub fn value(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

fn unit_or(v: Vector3<f64>, fallback: &Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n > 1e-14 {
        v / n
    } else {
        *fallback
    }
}

fn chsh_value(t: &Matrix3<f64>, a: &[Vector3<f64>; 2], b: &[Vector3<f64>; 2]) -> f64 {
    a[0].dot(&(t * (b[0] + b[1]))) + a[1].dot(&(t * (b[0] - b[1])))
}

pub fn run_seesaw(t: &Matrix3<f64>, b_start: [Vector3<f64>; 2], max_iterations: usize, tol: f64) -> SeesawRun {
    let tt = t.transpose();
    let mut b = b_start;
    let mut a = [Vector3::z(), Vector3::x()];
    let mut history = Vec::new();
    for _ in 0..max_iterations.max(1) {
        a = [unit_or(t * (b[0] + b[1]), &a[0]), unit_or(t * (b[0] - b[1]), &a[1])];
        b = [unit_or(tt * (a[0] + a[1]), &b[0]), unit_or(tt * (a[0] - a[1]), &b[1])];
        let s = chsh_value(t, &a, &b);
        let done = history.last().is_some_and(|&prev: &f64| s - prev < tol);
        history.push(s);
        if done {
            break;
        }
    }
    SeesawRun { history, a, b }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Best CHSH value over qubit observables found by multi-start seesaw.
///
/// With `conditioning`, `rho` must have the control as its first factor; the
/// control is projected onto the chosen outcome before optimizing.
pub fn optimize_chsh(
    rho: &DensityOperator,
    opts: &SeesawOptions,
    conditioning: Option<(&ControlMeasurement, usize)>,
) -> Result<ChshResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let conditioned;
    let rho = match conditioning {
        Some((m, k)) => {
            conditioned = condition_on_control(rho, m, k)?.1;
            &conditioned
        }
        None => rho,
    };
    let t = correlation_matrix(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<SeesawRun> = None;
    for _ in 0..opts.restarts {
        let start = [random_unit(&mut rng), random_unit(&mut rng)];
        let run = run_seesaw(&t, start, opts.max_iterations, opts.tol);
        if best.as_ref().is_none_or(|b| run.value() > b.value()) {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");
    let s1 = MeasurementSetting { observables: best.a.iter().map(BlochAngles::from_vector).collect() };
    let s2 = MeasurementSetting { observables: best.b.iter().map(BlochAngles::from_vector).collect() };
    let table = behavior(rho, &s1, &s2)?;
    let mut result = chsh(&table)?;
    result.settings = Some((s1, s2));
    result.seed = Some(opts.seed);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{re, SpaceLayout};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn two_qubits(m: ComplexMatrix) -> DensityOperator {
        DensityOperator::new(m, SpaceLayout::new([("t1", 2), ("t2", 2)]).unwrap()).unwrap()
    }

    fn phi_plus() -> DensityOperator {
        two_qubits(ComplexMatrix::ket(&[re(FRAC_1_SQRT_2), re(0.0), re(0.0), re(FRAC_1_SQRT_2)]).projector())
    }

    #[test]
    fn eigenstate_table() {
        let rho = two_qubits(ComplexMatrix::basis(4, 0).projector());
        let t = behavior(&rho, &MeasurementSetting::z_basis(2), &MeasurementSetting::z_basis(2)).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((t.p(0, 0, x, y) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn maximally_mixed_table_is_uniform() {
        let rho = two_qubits(ComplexMatrix::identity(4).scale_re(0.25));
        let s = MeasurementSetting::equatorial(&[0.0, 1.0]);
        let t = behavior(&rho, &s, &s).unwrap();
        assert!(t.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!(chsh(&t).unwrap().value.abs() < 1e-15);
    }

    /// Independent oracle: build A_x ⊗ B_y by hand from explicit 2×2 matrices
    /// and take tr[ρ A⊗B] directly.
    fn oracle_correlator(rho: &ComplexMatrix, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        let mut s = re(0.0);
        for i in 0..4 {
            for j in 0..4 {
                let op = a.get(i / 2, j / 2) * b.get(i % 2, j % 2);
                s += rho.get(j, i) * op;
            }
        }
        s.re
    }

    #[test]
    fn tsirelson_angles_on_phi_plus() {
        let rho = phi_plus();
        // A: X (φ=0), Y (φ=π/2). B: (φ=π/4), (φ=−π/4) on the equator.
        // For |Φ+⟩, E = cos(φa + φb): cos(π/4)=cos(−π/4)=√2/2, cos(3π/4)=−√2/2, cos(π/4)=√2/2.
        // Relabel so the minus sign lands on E(1,1): use B = (−π/4, π/4).
        let s1 = MeasurementSetting::equatorial(&[0.0, FRAC_PI_2]);
        let s2 = MeasurementSetting::equatorial(&[-FRAC_PI_4, FRAC_PI_4]);
        let table = behavior(&rho, &s1, &s2).unwrap();
        let r = chsh(&table).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let ax = s1.observables[x].observable();
                let by = s2.observables[y].observable();
                let e = oracle_correlator(rho.matrix(), &ax, &by);
                assert!((r.correlators[x][y] - e).abs() < 1e-12);
            }
        }
        assert!((r.value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn chsh_examples() {
        let det = BehaviorTable::deterministic((2, 2), (2, 2), |_, _| 0, |_, _| 0).unwrap();
        assert!((chsh(&det).unwrap().value - 2.0).abs() < 1e-15);
        let uni = BehaviorTable::uniform((2, 2), (2, 2));
        assert_eq!(chsh(&uni).unwrap().value, 0.0);
        let big = BehaviorTable::uniform((3, 2), (2, 2));
        assert!(matches!(chsh(&big), Err(Error::InvalidTable(_))));
    }

    #[test]
    fn classical_bound_by_enumeration() {
        let values = deterministic_chsh_values();
        assert_eq!(values.len(), 16);
        assert!(values.iter().all(|v| (v.abs() - 2.0).abs() < 1e-15));
        assert_eq!(classical_chsh_bound(), 2.0);
        assert_eq!(values.iter().cloned().fold(f64::INFINITY, f64::min), -2.0);
    }

    #[test]
    fn seesaw_is_monotone() {
        let t = Matrix3::new(0.3, 0.1, -0.2, 0.05, -0.6, 0.1, 0.2, 0.0, 0.4);
        let run = run_seesaw(&t, [Vector3::x(), Vector3::y()], 200, 0.0);
        for w in run.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn optimize_phi_plus_reaches_tsirelson() {
        let r = optimize_chsh(&phi_plus(), &SeesawOptions::default(), None).unwrap();
        assert!((r.value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(r.seed, Some(DEFAULT_SEED));
    }

    #[test]
    fn werner_half_visibility_gives_sqrt_two() {
        let phi = phi_plus();
        let m = &phi.matrix().scale_re(0.5) + &ComplexMatrix::identity(4).scale_re(0.125);
        let r = optimize_chsh(&two_qubits(m), &SeesawOptions::default(), None).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn zero_restarts_rejected() {
        let opts = SeesawOptions { restarts: 0, ..Default::default() };
        assert!(optimize_chsh(&phi_plus(), &opts, None).is_err());
    }

    #[test]
    fn wrong_dims_rejected() {
        let rho = DensityOperator::new(
            ComplexMatrix::identity(8).scale_re(0.125),
            SpaceLayout::new([("a", 2), ("b", 4)]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            optimize_chsh(&rho, &SeesawOptions::default(), None),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
