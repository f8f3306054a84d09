//! Quantum-switch output states, the entangled double switch, event-input
//! states and the control measurement performed by party Z.
//!
//! Layout labels: the single switch lives on `control ⊗ target`, the double
//! switch on `control ⊗ target1 ⊗ target2`. Control bit 0 means "A before B"
//! and selects the free evolution `v0`; bit 1 means "B before A" and selects
//! `v1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DensityOperator, StateVector, NORM_TOL};
use crate::tensor::{self, ComplexMatrix, SpaceLayout, C64};

/// Unitarity tolerance for party operations and free evolutions.
pub const UNITARY_TOL: f64 = 1e-9;
/// Completeness tolerance for control-measurement bases.
pub const BASIS_TOL: f64 = 1e-10;
/// Post-measurement states are only produced above this probability.
pub const MIN_BRANCH_PROB: f64 = 1e-12;

pub const CONTROL: &str = "control";
pub const TARGET: &str = "target";
pub const TARGET1: &str = "target1";
pub const TARGET2: &str = "target2";

/// Amplitudes (α, β) of α|0_c⟩ + β|1_c⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlAmplitudes {
    pub alpha: C64,
    pub beta: C64,
}

impl ControlAmplitudes {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(format!("|α|²+|β|² = {n}")));
        }
        Ok(Self { alpha, beta })
    }

    /// α = β = 1/√2.
    pub fn balanced() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self { alpha: tensor::re(s), beta: tensor::re(s) }
    }

    /// Definite control |0_c⟩.
    pub fn zero() -> Self {
        Self { alpha: tensor::re(1.0), beta: tensor::re(0.0) }
    }

    pub fn one() -> Self {
        Self { alpha: tensor::re(0.0), beta: tensor::re(1.0) }
    }

    pub fn ket(&self) -> ComplexMatrix {
        ComplexMatrix::ket(&[self.alpha, self.beta])
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.alpha.norm_sqr(), self.beta.norm_sqr())
    }
}

impl Default for ControlAmplitudes {
    fn default() -> Self {
        Self::balanced()
    }
}

/// The per-switch content: party operations, free evolutions, input state.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchOps {
    pub u_a: ComplexMatrix,
    pub u_b: ComplexMatrix,
    pub v0: ComplexMatrix,
    pub v1: ComplexMatrix,
    pub psi: ComplexMatrix,
}

impl SwitchOps {
    pub fn new(
        u_a: ComplexMatrix,
        u_b: ComplexMatrix,
        v0: ComplexMatrix,
        v1: ComplexMatrix,
        psi: ComplexMatrix,
    ) -> Result<Self> {
        let ops = Self { u_a, u_b, v0, v1, psi };
        ops.validate()?;
        Ok(ops)
    }

    /// No free evolution (`v0 = v1 = I`).
    pub fn without_free_evolution(u_a: ComplexMatrix, u_b: ComplexMatrix, psi: ComplexMatrix) -> Result<Self> {
        let d = psi.rows();
        Self::new(u_a, u_b, ComplexMatrix::identity(d), ComplexMatrix::identity(d), psi)
    }

    pub fn target_dim(&self) -> usize {
        self.psi.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.psi.rows();
        if self.psi.cols() != 1 || d == 0 {
            return Err(Error::DimensionMismatch("target state must be a column vector".into()));
        }
        if (self.psi.norm() - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(format!("target state norm {}", self.psi.norm())));
        }
        for (name, op) in [("u_a", &self.u_a), ("u_b", &self.u_b), ("v0", &self.v0), ("v1", &self.v1)] {
            if op.rows() != d || op.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{} but the target has dimension {d}",
                    op.rows(),
                    op.cols()
                )));
            }
            let deviation = op.unitary_deviation();
            if deviation > UNITARY_TOL {
                return Err(Error::NotUnitary { name: name.into(), deviation });
            }
        }
        Ok(())
    }

    /// U_B V U_A |ψ⟩ (A first).
    pub fn a_then_b(&self, v: &ComplexMatrix) -> ComplexMatrix {
        &(&(&self.u_b * v) * &self.u_a) * &self.psi
    }

    /// U_A V U_B |ψ⟩ (B first).
    pub fn b_then_a(&self, v: &ComplexMatrix) -> ComplexMatrix {
        &(&(&self.u_a * v) * &self.u_b) * &self.psi
    }

    /// Whether `v0 = v1` entrywise.
    pub fn free_evolution_uncorrelated(&self) -> bool {
        self.v0.max_abs_diff(&self.v1) == 0.0
    }
}

/// Single switch: operations plus control amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchSpec {
    pub ops: SwitchOps,
    pub control: ControlAmplitudes,
}

impl SwitchSpec {
    pub fn new(ops: SwitchOps, control: ControlAmplitudes) -> Result<Self> {
        ops.validate()?;
        Ok(Self { ops, control })
    }

    pub fn target_dim(&self) -> usize {
        self.ops.target_dim()
    }
}

fn control_target_layout(target_dim: usize) -> Result<SpaceLayout> {
    SpaceLayout::new([(CONTROL, 2), (TARGET, target_dim)])
}

fn double_layout(d1: usize, d2: usize) -> Result<SpaceLayout> {
    SpaceLayout::new([(CONTROL, 2), (TARGET1, d1), (TARGET2, d2)])
}

/// α|0_c⟩⊗U_B V₀ U_A|ψ⟩ + β|1_c⟩⊗U_A V₁ U_B|ψ⟩.
pub fn switch_output(spec: &SwitchSpec) -> Result<StateVector> {
    spec.ops.validate()?;
    let ops = &spec.ops;
    let zero = tensor::tensor(&ComplexMatrix::basis(2, 0), &ops.a_then_b(&ops.v0))?;
    let one = tensor::tensor(&ComplexMatrix::basis(2, 1), &ops.b_then_a(&ops.v1))?;
    let v = &zero.scale(spec.control.alpha) + &one.scale(spec.control.beta);
    StateVector::new(v, control_target_layout(ops.target_dim())?)
}

/// Which operation slot of the switch a state is taken before.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    /// The first operation to act on the target.
    E1,
    /// The second operation to act on the target.
    E2,
}

/// Branch-weighted target state immediately before the given event.
pub fn event_input_state(spec: &SwitchSpec, event: Event) -> Result<DensityOperator> {
    spec.ops.validate()?;
    let ops = &spec.ops;
    let (wa, wb) = spec.control.weights();
    let layout = SpaceLayout::new([(TARGET, ops.target_dim())])?;
    let m = match event {
        Event::E1 => {
            let p = ops.psi.projector();
            &p.scale_re(wa) + &p.scale_re(wb)
        }
        Event::E2 => {
            let after_a = &(&ops.v0 * &ops.u_a) * &ops.psi;
            let after_b = &(&ops.v1 * &ops.u_b) * &ops.psi;
            &after_a.projector().scale_re(wa) + &after_b.projector().scale_re(wb)
        }
    };
    DensityOperator::new(m, layout)
}

/// Projective measurement of the control in an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlMeasurement {
    basis: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl ControlMeasurement {
    pub fn new(basis: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if basis.is_empty() || basis.len() != labels.len() {
            return Err(Error::InvalidParameter("one label per basis vector required".into()));
        }
        let d = basis[0].rows();
        if basis.iter().any(|b| b.rows() != d || b.cols() != 1) {
            return Err(Error::DimensionMismatch("basis vectors differ in shape".into()));
        }
        let sum = basis
            .iter()
            .fold(ComplexMatrix::zeros(d, d), |acc, b| &acc + &b.projector());
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
        if dev > BASIS_TOL {
            return Err(Error::InvalidParameter(format!(
                "incomplete control basis (projector sum deviates by {dev:e})"
            )));
        }
        Ok(Self { basis, labels })
    }

    /// {|0⟩, |1⟩} with labels "0", "1".
    pub fn computational() -> Self {
        Self {
            basis: vec![ComplexMatrix::basis(2, 0), ComplexMatrix::basis(2, 1)],
            labels: vec!["0".into(), "1".into()],
        }
    }

    /// {|+⟩, |−⟩} with labels "+", "-".
    pub fn plus_minus() -> Self {
        Self {
            basis: vec![tensor::gates::plus(), tensor::gates::minus()],
            labels: vec!["+".into(), "-".into()],
        }
    }

    /// Qubit basis {|n⟩, |−n⟩} for the Bloch direction (θ, φ); labels "+", "-".
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
        let e = C64::from_polar(1.0, phi);
        let up = ComplexMatrix::ket(&[tensor::re(c), e * s]);
        let down = ComplexMatrix::ket(&[tensor::re(-s), e * c]);
        Self { basis: vec![up, down], labels: vec!["+".into(), "-".into()] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn outcome_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown control outcome `{label}`")))
    }
}

/// One outcome of a control measurement.
#[derive(Clone, Debug)]
pub struct ControlOutcome {
    pub label: String,
    pub probability: f64,
    /// Normalized state of the remaining factors; `None` below [`MIN_BRANCH_PROB`].
    pub post_state: Option<StateVector>,
}

/// (⟨b| ⊗ I) applied to a vector whose first factor is the control.
fn contract_control(v: &ComplexMatrix, layout: &SpaceLayout, b: &ComplexMatrix) -> Result<(ComplexMatrix, SpaceLayout)> {
    if layout.labels().first().map(String::as_str) != Some(CONTROL) {
        return Err(Error::InvalidLayout("the control must be the first factor".into()));
    }
    let dc = layout.dims()[0];
    if b.rows() != dc {
        return Err(Error::DimensionMismatch("basis vector does not match control".into()));
    }
    let rest_dim = layout.dim() / dc;
    let rest = SpaceLayout::new(
        layout.labels()[1..]
            .iter()
            .cloned()
            .zip(layout.dims()[1..].iter().copied()),
    )?;
    let mut out = vec![tensor::re(0.0); rest_dim];
    for (k, slot) in out.iter_mut().enumerate() {
        for cidx in 0..dc {
            *slot += b.get(cidx, 0).conj() * v.get(cidx * rest_dim + k, 0);
        }
    }
    Ok((ComplexMatrix::ket(&out), rest))
}

pub fn measure_control(state: &StateVector, m: &ControlMeasurement) -> Result<Vec<ControlOutcome>> {
    let mut outcomes = Vec::with_capacity(m.basis.len());
    for (b, label) in m.basis.iter().zip(&m.labels) {
        let (v, rest) = contract_control(state.amplitudes(), state.layout(), b)?;
        let p = v.norm().powi(2);
        let post_state = if p > MIN_BRANCH_PROB {
            Some(StateVector::new(v.scale_re(1.0 / p.sqrt()), rest)?)
        } else {
            None
        };
        outcomes.push(ControlOutcome { label: label.clone(), probability: p, post_state });
    }
    Ok(outcomes)
}

/// Probability of control outcome `k` and the normalized conditional state of
/// the remaining factors, for a mixed control-first state.
pub fn condition_on_control(
    rho: &DensityOperator,
    m: &ControlMeasurement,
    k: usize,
) -> Result<(f64, DensityOperator)> {
    let layout = rho.layout();
    if layout.labels().first().map(String::as_str) != Some(CONTROL) {
        return Err(Error::InvalidLayout("the control must be the first factor".into()));
    }
    let b = m
        .basis
        .get(k)
        .ok_or_else(|| Error::InvalidParameter(format!("control outcome index {k} out of range")))?;
    let dc = layout.dims()[0];
    let rest_dim = layout.dim() / dc;
    let mat = rho.matrix();
    let mut out = ComplexMatrix::zeros(rest_dim, rest_dim);
    for r in 0..rest_dim {
        for col in 0..rest_dim {
            let mut s = tensor::re(0.0);
            for i in 0..dc {
                for j in 0..dc {
                    s += b.get(i, 0).conj() * mat.get(i * rest_dim + r, j * rest_dim + col) * b.get(j, 0);
                }
            }
            out.set(r, col, s);
        }
    }
    let p = out.trace().re;
    if p <= MIN_BRANCH_PROB {
        return Err(Error::Numerical(format!(
            "control outcome `{}` has probability {p:e}; conditional state undefined",
            m.labels[k]
        )));
    }
    let rest = SpaceLayout::new(
        layout.labels()[1..]
            .iter()
            .cloned()
            .zip(layout.dims()[1..].iter().copied()),
    )?;
    Ok((p, DensityOperator::new(out.scale_re(1.0 / p), rest)?))
}

/// Causal order between the two parties of a switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    #[serde(rename = "A<B")]
    AB,
    #[serde(rename = "B<A")]
    BA,
}

/// How the order of each switch is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OrderMode {
    /// Order entangled with the control (the switch proper).
    Coherent,
    /// A classical variable picks A≺B with probability `q`, else B≺A.
    ClassicalMixture { q: f64 },
    /// Both switches run in the given order; the control only selects the
    /// free evolution.
    Definite { order: Order },
}

/// Two switches sharing one control, as in the temporal Bell setup.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleSwitchSpec {
    pub switch1: SwitchOps,
    pub switch2: SwitchOps,
    pub control: ControlAmplitudes,
    pub a5_satisfied: bool,
    pub order_mode: OrderMode,
    /// Coherence η ∈ [0, 1] of the control off-diagonal block (coherent mode).
    pub visibility: f64,
}

impl DoubleSwitchSpec {
    /// Builds and validates a spec. With `a5_satisfied`, each switch's `v1` is
    /// overwritten by its `v0` so the free evolution cannot depend on the control.
    pub fn new(
        mut switch1: SwitchOps,
        mut switch2: SwitchOps,
        control: ControlAmplitudes,
        a5_satisfied: bool,
        order_mode: OrderMode,
        visibility: f64,
    ) -> Result<Self> {
        if a5_satisfied {
            switch1.v1 = switch1.v0.clone();
            switch2.v1 = switch2.v0.clone();
        }
        let spec = Self { switch1, switch2, control, a5_satisfied, order_mode, visibility };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.switch1.validate()?;
        self.switch2.validate()?;
        if let OrderMode::ClassicalMixture { q } = self.order_mode {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter(format!("mixture weight q = {q} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidParameter(format!("visibility η = {} outside [0, 1]", self.visibility)));
        }
        if self.a5_satisfied
            && !(self.switch1.free_evolution_uncorrelated() && self.switch2.free_evolution_uncorrelated())
        {
            return Err(Error::InvalidParameter("a5_satisfied requires v0 = v1 in both switches".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        double_layout(self.switch1.target_dim(), self.switch2.target_dim())
    }

    /// Joint target vector of the branch with control bit `bit` and the given order.
    fn branch(&self, bit: usize, order: Order) -> Result<ComplexMatrix> {
        let pick = |ops: &SwitchOps| {
            let v = if bit == 0 { &ops.v0 } else { &ops.v1 };
            match order {
                Order::AB => ops.a_then_b(v),
                Order::BA => ops.b_then_a(v),
            }
        };
        tensor::tensor(&pick(&self.switch1), &pick(&self.switch2))
    }

    /// Target vectors of the control-0 and control-1 branches.
    pub fn branch_states(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        match self.order_mode {
            OrderMode::Coherent | OrderMode::ClassicalMixture { .. } => {
                Ok((self.branch(0, Order::AB)?, self.branch(1, Order::BA)?))
            }
            OrderMode::Definite { order } => Ok((self.branch(0, order)?, self.branch(1, order)?)),
        }
    }
}

/// Output of [`double_switch_output`].
#[derive(Clone, Debug)]
pub enum DoubleSwitchState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl DoubleSwitchState {
    pub fn to_density(&self) -> DensityOperator {
        match self {
            Self::Pure(v) => v.to_density(),
            Self::Mixed(m) => m.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&StateVector> {
        match self {
            Self::Pure(v) => Some(v),
            Self::Mixed(_) => None,
        }
    }
}

pub fn double_switch_output(spec: &DoubleSwitchSpec) -> Result<DoubleSwitchState> {
    spec.validate()?;
    let layout = spec.layout()?;
    let (a, b) = spec.branch_states()?;
    let k0 = ComplexMatrix::basis(2, 0);
    let k1 = ComplexMatrix::basis(2, 1);
    let (alpha, beta) = (spec.control.alpha, spec.control.beta);
    match spec.order_mode {
        OrderMode::Coherent if spec.visibility < 1.0 => {
            let eta = spec.visibility;
            let (wa, wb) = spec.control.weights();
            let diag = &tensor::tensor(&k0.projector(), &a.projector())?.scale_re(wa)
                + &tensor::tensor(&k1.projector(), &b.projector())?.scale_re(wb);
            let off = tensor::tensor(&(&k0 * &k1.dagger()), &(&a * &b.dagger()))?.scale(alpha * beta.conj() * eta);
            let m = &(&diag + &off) + &off.dagger();
            Ok(DoubleSwitchState::Mixed(DensityOperator::new(m, layout)?))
        }
        OrderMode::Coherent | OrderMode::Definite { .. } => {
            let v = &tensor::tensor(&k0, &a)?.scale(alpha) + &tensor::tensor(&k1, &b)?.scale(beta);
            Ok(DoubleSwitchState::Pure(StateVector::new(v, layout)?))
        }
        OrderMode::ClassicalMixture { q } => {
            let m = &tensor::tensor(&k0.projector(), &a.projector())?.scale_re(q)
                + &tensor::tensor(&k1.projector(), &b.projector())?.scale_re(1.0 - q);
            Ok(DoubleSwitchState::Mixed(DensityOperator::new(m, layout)?))
        }
    }
}

/// Negativity (‖ρ^{T₁}‖₁ − 1)/2 across the first factor of a bipartite state.
pub fn target_entanglement(rho: &DensityOperator) -> Result<f64> {
    rho.validate(1e-9)?;
    let layout = rho.layout();
    if layout.len() != 2 {
        return Err(Error::InvalidLayout("negativity needs exactly two factors".into()));
    }
    let first = layout.labels()[0].clone();
    let pt = tensor::partial_transpose(rho.matrix(), layout, &[first.as_str()])?;
    let norm = tensor::trace_norm_hermitian(&pt)?;
    Ok(((norm - 1.0) / 2.0).max(0.0))
}

/// Target state on `target1 ⊗ target2`, optionally conditioned on a control outcome.
pub fn target_state(
    state: &DoubleSwitchState,
    conditioning: Option<(&ControlMeasurement, usize)>,
) -> Result<(f64, DensityOperator)> {
    let rho = state.to_density();
    match conditioning {
        Some((m, k)) => condition_on_control(&rho, m, k),
        None => Ok((1.0, rho.reduced(&[TARGET1, TARGET2])?)),
    }
}
