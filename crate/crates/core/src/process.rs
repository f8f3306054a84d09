//! Bipartite process matrices with an optional global future.
//!
//! # Conventions
//!
//! Factor order is `A_I ⊗ A_O ⊗ B_I ⊗ B_O ⊗ F…`, where every factor after the
//! two parties is an input-only "future" system (`F_C`, `F_T` for the switch).
//!
//! The Choi matrix of a CP map `M: X → Y` is
//! `J = Σ_{ij} |i⟩⟨j| ⊗ M(|i⟩⟨j|)`, so a unitary has `J = |u⟩⟩⟨⟨u|` with the
//! column-stacking vector `|u⟩⟩ = Σ_j |j⟩ ⊗ u|j⟩`, and `M(ρ) = tr_X[(ρᵀ ⊗ I) J]`.
//!
//! Process matrices are stored in link-product form: the ordered process
//! "prepare ρ for A, send A's output through channel C to B, discard B's output"
//! is `W = ρ ⊗ J_C ⊗ I`. Outcome probabilities are
//! `p = tr[W · (M_A ⊗ M_B ⊗ E_Fᵀ)ᵀ] = Σ_{ij} W_ij (M_A ⊗ M_B ⊗ E_Fᵀ)_ij`
//! with `M_A`, `M_B` instrument Choi matrices and `E_F` a measurement effect on
//! the future (its Choi matrix is `E_Fᵀ`; `E_F = I` discards the future).
//!
//! Worked qubit example: W = |0⟩⟨0| ⊗ |1⟩⟩⟨⟨1| ⊗ I (A≺B, identity channel),
//! A applies X (`M_A = |X⟩⟩⟨⟨X|`), B measures Z with effect |1⟩⟨1|, so
//! `M_B = Σ_{ij}|i⟩⟨j| ⊗ ⟨1|i⟩⟨j|1⟩ = |1⟩⟨1| ⊗ 1` on B_I ⊗ B_O (B_O of dim 1
//! here). The sum `Σ W_ij (M_A ⊗ M_B)_ij` contracts |0⟩ into X, the identity
//! channel forwards X|0⟩ = |1⟩, and B's effect returns p = 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorTable;
use crate::error::{Error, Result};
use crate::switch::{ControlAmplitudes, Order};
use crate::tensor::{self, ComplexMatrix, SpaceLayout, TraceReplace, C64};

pub const A_IN: &str = "A_I";
pub const A_OUT: &str = "A_O";
pub const B_IN: &str = "B_I";
pub const B_OUT: &str = "B_O";
pub const F_CONTROL: &str = "F_C";
pub const F_TARGET: &str = "F_T";

pub const PSD_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-8;
pub const SUBSPACE_TOL: f64 = 1e-8;
/// Tolerance on instrument trace preservation and Choi positivity.
pub const INSTRUMENT_TOL: f64 = 1e-9;

/// Local dimensions of a bipartite process plus its future factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDims {
    pub a_in: usize,
    pub a_out: usize,
    pub b_in: usize,
    pub b_out: usize,
    pub future: Vec<(String, usize)>,
}

impl ProcessDims {
    pub fn bipartite(a_in: usize, a_out: usize, b_in: usize, b_out: usize) -> Self {
        Self { a_in, a_out, b_in, b_out, future: Vec::new() }
    }

    pub fn qubits() -> Self {
        Self::bipartite(2, 2, 2, 2)
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        let mut factors = vec![
            (A_IN.to_string(), self.a_in),
            (A_OUT.to_string(), self.a_out),
            (B_IN.to_string(), self.b_in),
            (B_OUT.to_string(), self.b_out),
        ];
        factors.extend(self.future.iter().cloned());
        SpaceLayout::new(factors)
    }

    /// d_{A_O} · d_{B_O}, the trace of every valid process.
    pub fn normalization(&self) -> f64 {
        (self.a_out * self.b_out) as f64
    }

    fn future_labels(&self) -> Vec<&str> {
        self.future.iter().map(|(l, _)| l.as_str()).collect()
    }

    fn from_layout(layout: &SpaceLayout) -> Result<Self> {
        let labels = layout.labels();
        let expected = [A_IN, A_OUT, B_IN, B_OUT];
        if labels.len() < 4 || labels[..4].iter().zip(expected).any(|(l, e)| l != e) {
            return Err(Error::InvalidLayout(format!(
                "process factors must start with {expected:?}, got {labels:?}"
            )));
        }
        let d = layout.dims();
        Ok(Self {
            a_in: d[0],
            a_out: d[1],
            b_in: d[2],
            b_out: d[3],
            future: labels[4..].iter().cloned().zip(d[4..].iter().copied()).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    w: ComplexMatrix,
    dims: ProcessDims,
    layout: SpaceLayout,
}

impl ProcessMatrix {
    /// Wraps a matrix after a shape check; physical validity is reported by
    /// [`validate_process`].
    pub fn new(w: ComplexMatrix, dims: ProcessDims) -> Result<Self> {
        let layout = dims.layout()?;
        if !w.is_square() || w.rows() != layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a process of dimension {}",
                w.rows(),
                w.cols(),
                layout.dim()
            )));
        }
        Ok(Self { w, dims, layout })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn dims(&self) -> &ProcessDims {
        &self.dims
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn with_matrix(&self, w: ComplexMatrix) -> Self {
        Self { w, dims: self.dims.clone(), layout: self.layout.clone() }
    }
}

/// |u⟩⟩⟨⟨u| with |u⟩⟩ = Σ_j |j⟩ ⊗ u|j⟩.
pub fn choi_of_unitary(u: &ComplexMatrix) -> Result<ComplexMatrix> {
    let deviation = u.unitary_deviation();
    if deviation > crate::switch::UNITARY_TOL {
        return Err(Error::NotUnitary { name: "u".into(), deviation });
    }
    choi_of_kraus(std::slice::from_ref(u))
}

/// Σ_k |K_k⟩⟩⟨⟨K_k| for Kraus operators `K_k: X → Y` (Y×X matrices).
pub fn choi_of_kraus(kraus: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one Kraus operator required".into()))?;
    let (dy, dx) = (first.rows(), first.cols());
    let mut j = ComplexMatrix::zeros(dx * dy, dx * dy);
    for k in kraus {
        if k.rows() != dy || k.cols() != dx {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let mut v = Vec::with_capacity(dx * dy);
        for col in 0..dx {
            for r in 0..dy {
                v.push(k.get(r, col));
            }
        }
        j = &j + &ComplexMatrix::ket(&v).projector();
    }
    Ok(j)
}

/// A CP map given by its Choi matrix on `in ⊗ out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub choi: ComplexMatrix,
    pub d_in: usize,
    pub d_out: usize,
}

impl Channel {
    pub fn from_choi(choi: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if choi.rows() != d_in * d_out || !choi.is_square() {
            return Err(Error::DimensionMismatch("Choi matrix does not match channel dims".into()));
        }
        Ok(Self { choi, d_in, d_out })
    }

    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let j = choi_of_kraus(kraus)?;
        Self::from_choi(j, kraus[0].cols(), kraus[0].rows())
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(&[ComplexMatrix::identity(d)]).expect("identity channel")
    }

    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        Self::from_choi(choi_of_unitary(u)?, u.cols(), u.rows())
    }

    /// ρ ↦ (1 − p)ρ + p·tr(ρ)·I/d.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing strength {p} outside [0, 1]")));
        }
        let id = Self::identity(d).choi;
        let full = ComplexMatrix::identity(d * d).scale_re(1.0 / d as f64);
        Self::from_choi(&id.scale_re(1.0 - p) + &full.scale_re(p), d, d)
    }

    /// M(ρ) = tr_in[(ρᵀ ⊗ I) J].
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.d_in {
            return Err(Error::DimensionMismatch("state does not match channel input".into()));
        }
        let layout = SpaceLayout::new([("in", self.d_in), ("out", self.d_out)])?;
        let m = &tensor::tensor(&rho.transpose(), &ComplexMatrix::identity(self.d_out))? * &self.choi;
        tensor::partial_trace(&m, &layout, &["out"])
    }

    /// Deviation of tr_out J from the identity on the input.
    pub fn trace_preservation_error(&self) -> Result<f64> {
        let layout = SpaceLayout::new([("in", self.d_in), ("out", self.d_out)])?;
        let r = tensor::partial_trace(&self.choi, &layout, &["in"])?;
        Ok(r.max_abs_diff(&ComplexMatrix::identity(self.d_in)))
    }
}

/// Quantum instrument: per classical input, one Choi matrix per outcome on
/// `in ⊗ out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    d_in: usize,
    d_out: usize,
    elements: Vec<Vec<ComplexMatrix>>,
}

impl Instrument {
    pub fn new(d_in: usize, d_out: usize, elements: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if elements.is_empty() || elements.iter().any(|e| e.is_empty()) {
            return Err(Error::InvalidInstrument("every input needs at least one outcome".into()));
        }
        let n_out = elements[0].len();
        if elements.iter().any(|e| e.len() != n_out) {
            return Err(Error::InvalidInstrument("inputs must share one outcome alphabet".into()));
        }
        let layout = SpaceLayout::new([("in", d_in), ("out", d_out)])?;
        for (x, row) in elements.iter().enumerate() {
            let mut sum = ComplexMatrix::zeros(d_in * d_out, d_in * d_out);
            for (o, m) in row.iter().enumerate() {
                if m.rows() != d_in * d_out || !m.is_square() {
                    return Err(Error::InvalidInstrument(format!("element ({x},{o}) has the wrong shape")));
                }
                let min = tensor::min_eigenvalue(m)
                    .map_err(|e| Error::InvalidInstrument(format!("element ({x},{o}): {e}")))?;
                if min < -INSTRUMENT_TOL {
                    return Err(Error::InvalidInstrument(format!(
                        "element ({x},{o}) is not completely positive (eigenvalue {min:e})"
                    )));
                }
                sum = &sum + m;
            }
            let reduced = tensor::partial_trace(&sum, &layout, &["in"])?;
            let dev = reduced.max_abs_diff(&ComplexMatrix::identity(d_in));
            if dev > INSTRUMENT_TOL {
                return Err(Error::InvalidInstrument(format!(
                    "input {x} is not trace preserving (deviation {dev:e})"
                )));
            }
        }
        Ok(Self { d_in, d_out, elements })
    }

    /// `kraus[x][o]` lists the Kraus operators of outcome `o` under input `x`.
    pub fn from_kraus(kraus: &[Vec<Vec<ComplexMatrix>>]) -> Result<Self> {
        let k0 = kraus
            .first()
            .and_then(|r| r.first())
            .and_then(|o| o.first())
            .ok_or_else(|| Error::InvalidInstrument("empty Kraus specification".into()))?;
        let (d_out, d_in) = (k0.rows(), k0.cols());
        let elements = kraus
            .iter()
            .map(|row| row.iter().map(|ks| choi_of_kraus(ks)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(d_in, d_out, elements)
    }

    /// Input `x` applies `us[x]`; one outcome.
    pub fn unitaries(us: &[ComplexMatrix]) -> Result<Self> {
        let d = us
            .first()
            .ok_or_else(|| Error::InvalidInstrument("no unitaries".into()))?
            .rows();
        let elements = us.iter().map(|u| Ok(vec![choi_of_unitary(u)?])).collect::<Result<Vec<_>>>()?;
        Self::new(d, d, elements)
    }

    /// Measures in the computational basis of `d_in` and prepares `prep(x, o)`.
    pub fn measure_and_prepare(
        d_in: usize,
        inputs: usize,
        prep: impl Fn(usize, usize) -> ComplexMatrix,
    ) -> Result<Self> {
        let kraus: Vec<Vec<Vec<ComplexMatrix>>> = (0..inputs)
            .map(|x| {
                (0..d_in)
                    .map(|o| vec![&prep(x, o) * &ComplexMatrix::basis(d_in, o).dagger()])
                    .collect()
            })
            .collect();
        Self::from_kraus(&kraus)
    }

    /// Discards the input and prepares the pure state `state` (a ket): one input, one outcome.
    pub fn discard_and_prepare(d_in: usize, state: &ComplexMatrix) -> Result<Self> {
        let kraus: Vec<Vec<ComplexMatrix>> = (0..d_in)
            .map(|j| vec![state * &ComplexMatrix::basis(d_in, j).dagger()])
            .collect();
        Self::from_kraus(&[vec![kraus.into_iter().flatten().collect()]])
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn inputs(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self) -> usize {
        self.elements[0].len()
    }

    pub fn element(&self, x: usize, o: usize) -> &ComplexMatrix {
        &self.elements[x][o]
    }
}

/// Σ_ij W_ij X_ij, i.e. tr[W Xᵀ].
fn pair(w: &ComplexMatrix, x: &ComplexMatrix) -> C64 {
    w.inner()
        .iter()
        .zip(x.inner().iter())
        .map(|(a, b)| a * b)
        .sum()
}

fn future_choi(dims: &ProcessDims, effect: Option<&ComplexMatrix>) -> Result<ComplexMatrix> {
    let df: usize = dims.future.iter().map(|(_, d)| d).product();
    match effect {
        Some(e) => {
            if e.rows() != df || !e.is_square() {
                return Err(Error::DimensionMismatch(format!("future effect must be {df}x{df}")));
            }
            Ok(e.transpose())
        }
        None => Ok(ComplexMatrix::identity(df)),
    }
}

/// Probability of one pair of instrument elements and a future effect.
pub fn born_probability(
    w: &ProcessMatrix,
    m_a: &ComplexMatrix,
    m_b: &ComplexMatrix,
    future_effect: Option<&ComplexMatrix>,
) -> Result<f64> {
    let d = &w.dims;
    if m_a.rows() != d.a_in * d.a_out || m_b.rows() != d.b_in * d.b_out {
        return Err(Error::DimensionMismatch("instrument element does not match process".into()));
    }
    let x = tensor::tensor_all([m_a, m_b, &future_choi(d, future_effect)?])?;
    Ok(pair(&w.w, &x).re)
}

/// Table p(o_a, o_b | i_a, i_b) with the future discarded.
pub fn born_probabilities(w: &ProcessMatrix, a: &Instrument, b: &Instrument) -> Result<BehaviorTable> {
    born_probabilities_with_future(w, a, b, None)
}

/// Table p(o_a, o_b, k | i_a, i_b) / p(k | i_a, i_b)-free variant: with an
/// effect `E_k` on the future, returns the joint p(o_a, o_b, k | i_a, i_b) as an
/// unnormalized table; with `None` the normalized A/B table.
pub fn born_probabilities_with_future(
    w: &ProcessMatrix,
    a: &Instrument,
    b: &Instrument,
    future_effect: Option<&ComplexMatrix>,
) -> Result<BehaviorTable> {
    let d = &w.dims;
    if a.d_in != d.a_in || a.d_out != d.a_out || b.d_in != d.b_in || b.d_out != d.b_out {
        return Err(Error::DimensionMismatch("instrument dims do not match the process".into()));
    }
    let fut = future_choi(d, future_effect)?;
    let mut probs = Vec::with_capacity(a.inputs() * b.inputs() * a.outcomes() * b.outcomes());
    for x in 0..a.inputs() {
        for y in 0..b.inputs() {
            for oa in 0..a.outcomes() {
                for ob in 0..b.outcomes() {
                    let m = tensor::tensor_all([a.element(x, oa), b.element(y, ob), &fut])?;
                    probs.push(pair(&w.w, &m).re);
                }
            }
        }
    }
    let shape = ((a.inputs(), b.inputs()), (a.outcomes(), b.outcomes()));
    if future_effect.is_some() {
        return BehaviorTable::unchecked(shape.0, shape.1, probs);
    }
    BehaviorTable::new(shape.0, shape.1, probs)
        .map_err(|e| Error::InvalidProcess(format!("statistics are not a valid behavior: {e}")))
}

/// The four linear maps that characterize a bipartite-plus-future process.
struct Geometry {
    layout: SpaceLayout,
    a_in: String,
    a_out: String,
    b_in: String,
    b_out: String,
    future: Vec<String>,
}

impl Geometry {
    fn of(w: &ProcessMatrix) -> Self {
        Self {
            layout: w.layout.clone(),
            a_in: A_IN.into(),
            a_out: A_OUT.into(),
            b_in: B_IN.into(),
            b_out: B_OUT.into(),
            future: w.dims.future_labels().iter().map(|s| s.to_string()).collect(),
        }
    }

    fn tr(&self, m: &ComplexMatrix, labels: &[&str]) -> ComplexMatrix {
        if labels.is_empty() {
            return m.clone();
        }
        TraceReplace::new(&self.layout, labels)
            .expect("labels come from the layout")
            .call(m)
    }

    fn future_refs(&self) -> Vec<&str> {
        self.future.iter().map(String::as_str).collect()
    }

    /// Projector onto the valid-process subspace (trace not fixed).
    fn valid(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let fut = self.future_refs();
        // Π0_F, then sum over (σ_A, σ_B) ∈ {0, V}² \ {(0, 0)}.
        let base = self.tr(w, &fut);
        let pi0 = |m: &ComplexMatrix, i: &str, o: &str| self.tr(m, &[i, o]);
        let piv = |m: &ComplexMatrix, o: &str| m - &self.tr(m, &[o]);
        let (ai, ao, bi, bo) = (self.a_in.as_str(), self.a_out.as_str(), self.b_in.as_str(), self.b_out.as_str());
        let v0 = pi0(&piv(&base, ao), bi, bo);
        let zv = piv(&pi0(&base, ai, ao), bo);
        let vv = piv(&piv(&base, ao), bo);
        let forbidden = &(&v0 + &zv) + &vv;
        w - &forbidden
    }

    /// Projector onto the span of processes ordered `first ≺ second ≺ future`.
    fn ordered(&self, w: &ComplexMatrix, order: Order) -> ComplexMatrix {
        let (first_out, second_in, second_out) = match order {
            Order::AB => (self.a_out.as_str(), self.b_in.as_str(), self.b_out.as_str()),
            Order::BA => (self.b_out.as_str(), self.a_in.as_str(), self.a_out.as_str()),
        };
        let fut = self.future_refs();
        let mut labels = fut.clone();
        let t_f = self.tr(w, &labels);
        labels.push(second_out);
        let t_fo = self.tr(w, &labels);
        labels.push(second_in);
        let t_foi = self.tr(w, &labels);
        labels.push(first_out);
        let t_foio = self.tr(w, &labels);
        &(&(&(w - &t_f) + &t_fo) - &t_foi) + &t_foio
    }
}

/// Raw margins and verdict of [`validate_process`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub hermitian_deviation: f64,
    /// Minimum eigenvalue of (the Hermitian part of) W.
    pub psd_margin: f64,
    /// |tr W − d_{A_O} d_{B_O}|.
    pub trace_error: f64,
    /// ‖W − L_V(W)‖_F.
    pub subspace_residual: f64,
    pub valid: bool,
}

/// Tolerances used by [`validate_process_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityTolerances {
    pub psd: f64,
    pub trace: f64,
    pub subspace: f64,
}

impl Default for ValidityTolerances {
    fn default() -> Self {
        Self { psd: PSD_TOL, trace: TRACE_TOL, subspace: SUBSPACE_TOL }
    }
}

pub fn validate_process(w: &ProcessMatrix) -> Result<ValidityReport> {
    validate_process_with(w, ValidityTolerances::default())
}

pub fn validate_process_with(w: &ProcessMatrix, tol: ValidityTolerances) -> Result<ValidityReport> {
    let hermitian_deviation = w.w.hermitian_deviation();
    let h = w.w.hermitian_part();
    let psd_margin = tensor::min_eigenvalue(&h)?;
    let trace_error = (w.w.trace() - tensor::re(w.dims.normalization())).norm();
    let subspace_residual = (&h - &Geometry::of(w).valid(&h)).frobenius_norm();
    let valid = hermitian_deviation <= tensor::HERMITIAN_TOL
        && psd_margin >= -tol.psd
        && trace_error <= tol.trace
        && subspace_residual <= tol.subspace;
    Ok(ValidityReport { hermitian_deviation, psd_margin, trace_error, subspace_residual, valid })
}

/// ‖W − P_order(W)‖_F: distance from the span of processes with the given order.
pub fn ordered_residual(w: &ProcessMatrix, order: Order) -> f64 {
    (&w.w - &Geometry::of(w).ordered(&w.w, order)).frobenius_norm()
}

/// What happens to the second party's output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostHandling {
    /// Traced out; the argument is the second party's output dimension.
    Discard(usize),
    /// Forwarded unchanged to a future factor `F_T` of this dimension.
    Future(usize),
}

/// Fixed-order process: `initial` enters the first party, `mid` connects the
/// first party's output to the second party's input.
pub fn ordered_process(order: Order, initial: &ComplexMatrix, mid: &Channel, post: PostHandling) -> Result<ProcessMatrix> {
    if !initial.is_square() {
        return Err(Error::DimensionMismatch("initial state must be a density matrix".into()));
    }
    let (second_out, tail, future) = match post {
        PostHandling::Discard(d) => (d, ComplexMatrix::identity(d), vec![]),
        PostHandling::Future(d) => (d, Channel::identity(d).choi, vec![(F_TARGET.to_string(), d)]),
    };
    let w_local = tensor::tensor_all([initial, &mid.choi, &tail])?;
    let (d1_in, d1_out, d2_in) = (initial.rows(), mid.d_in, mid.d_out);
    let (first_in, first_out, second_in, second_out_label) = match order {
        Order::AB => (A_IN, A_OUT, B_IN, B_OUT),
        Order::BA => (B_IN, B_OUT, A_IN, A_OUT),
    };
    let mut factors = vec![
        (first_in.to_string(), d1_in),
        (first_out.to_string(), d1_out),
        (second_in.to_string(), d2_in),
        (second_out_label.to_string(), second_out),
    ];
    factors.extend(future.iter().cloned());
    let local_layout = SpaceLayout::new(factors)?;
    let mut canonical = vec![A_IN, A_OUT, B_IN, B_OUT];
    canonical.extend(future.iter().map(|(l, _)| l.as_str()));
    let (w, layout) = tensor::permute_factors(&w_local, &local_layout, &canonical)?;
    ProcessMatrix::new(w, ProcessDims::from_layout(&layout)?)
}

/// `q·w1 + (1 − q)·w2`.
pub fn mix(w1: &ProcessMatrix, w2: &ProcessMatrix, q: f64) -> Result<ProcessMatrix> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("mixing weight {q} outside [0, 1]")));
    }
    if w1.dims != w2.dims {
        return Err(Error::DimensionMismatch("mixing processes with different layouts".into()));
    }
    Ok(w1.with_matrix(&w1.w.scale_re(q) + &w2.w.scale_re(1.0 - q)))
}

/// Pure switch process |w⟩⟨w| on A_I A_O B_I B_O F_C F_T with target input `psi`:
/// |w⟩ = α |ψ⟩_{A_I}|1⟩⟩_{A_O B_I}|1⟩⟩_{B_O F_T}|0⟩_{F_C} + β |ψ⟩_{B_I}|1⟩⟩_{B_O A_I}|1⟩⟩_{A_O F_T}|1⟩_{F_C}.
pub fn quantum_switch_process(control: ControlAmplitudes, psi: &ComplexMatrix) -> Result<ProcessMatrix> {
    let d = psi.rows();
    if psi.cols() != 1 || (psi.norm() - 1.0).abs() > crate::state::NORM_TOL {
        return Err(Error::NotNormalized("switch target state must be a unit vector".into()));
    }
    let dims = ProcessDims {
        a_in: d,
        a_out: d,
        b_in: d,
        b_out: d,
        future: vec![(F_CONTROL.to_string(), 2), (F_TARGET.to_string(), d)],
    };
    let layout = dims.layout()?;
    let mut v = vec![tensor::re(0.0); layout.dim()];
    // Index (ai, ao, bi, bo, c, t) big-endian.
    let idx = |ai: usize, ao: usize, bi: usize, bo: usize, cb: usize, t: usize| {
        ((((ai * d + ao) * d + bi) * d + bo) * 2 + cb) * d + t
    };
    for s in 0..d {
        for m in 0..d {
            for t in 0..d {
                // A first: ψ into A_I, A_O → B_I (index m), B_O → F_T (index t).
                v[idx(s, m, m, t, 0, t)] += control.alpha * psi.get(s, 0);
                // B first: ψ into B_I, B_O → A_I (index m), A_O → F_T (index t).
                v[idx(m, t, s, m, 1, t)] += control.beta * psi.get(s, 0);
            }
        }
    }
    ProcessMatrix::new(ComplexMatrix::ket(&v).projector(), dims)
}

/// Switch process whose control coherence in the future is damped by `eta`:
/// blocks of W off-diagonal in `F_C` are scaled by η. η = 0 is the classical
/// mixture |α|²·W_{A≺B} ⊗ |0⟩⟨0| + |β|²·W_{B≺A} ⊗ |1⟩⟨1|.
pub fn switch_process_with_visibility(control: ControlAmplitudes, psi: &ComplexMatrix, eta: f64) -> Result<ProcessMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("visibility η = {eta} outside [0, 1]")));
    }
    let mut w = quantum_switch_process(control, psi)?;
    if eta < 1.0 {
        let d = psi.rows();
        let n = w.w.rows();
        let control_bit = |k: usize| (k / d) % 2;
        for r in 0..n {
            for col in 0..n {
                if control_bit(r) != control_bit(col) {
                    let z = w.w.get(r, col);
                    w.w.set(r, col, z * eta);
                }
            }
        }
    }
    Ok(w)
}

/// tr(S·W) for a Hermitian witness S.
pub fn witness_value(w: &ProcessMatrix, s: &ComplexMatrix) -> Result<f64> {
    if s.rows() != w.w.rows() || !s.is_square() {
        return Err(Error::DimensionMismatch("witness does not match process".into()));
    }
    let deviation = s.hermitian_deviation();
    if deviation > tensor::HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok((s * &w.w).trace().re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparabilityOptions {
    pub iterations: usize,
    /// Tolerance used when re-validating a candidate decomposition.
    pub tol: f64,
}

pub const DEFAULT_SEPARABILITY_ITERATIONS: usize = 2000;
pub const DEFAULT_SEPARABILITY_TOL: f64 = 1e-6;

impl Default for SeparabilityOptions {
    fn default() -> Self {
        Self { iterations: DEFAULT_SEPARABILITY_ITERATIONS, tol: DEFAULT_SEPARABILITY_TOL }
    }
}

/// A decomposition `W = q·W_ab + (1 − q)·W_ba` that passed re-validation.
#[derive(Clone, Debug)]
pub struct SeparabilityCertificate {
    pub q: f64,
    /// Normalized A≺B component; `None` when its weight is below tolerance.
    pub w_ab: Option<ProcessMatrix>,
    pub w_ba: Option<ProcessMatrix>,
    /// ‖q·W_ab + (1 − q)·W_ba − W‖_F.
    pub reconstruction_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum SeparabilityOutcome {
    /// Proof of causal separability (within the stated tolerance).
    Separable(SeparabilityCertificate),
    /// No decomposition found. Evidence of nonseparability, not a proof.
    Inconclusive { residual: f64, iterations: usize },
}

impl SeparabilityOutcome {
    pub fn certificate(&self) -> Option<&SeparabilityCertificate> {
        match self {
            Self::Separable(c) => Some(c),
            Self::Inconclusive { .. } => None,
        }
    }
}

struct Split {
    x: ComplexMatrix,
    y: ComplexMatrix,
}

/// Relaxed alternating projections between {X + Y = W, X ∈ S_{A≺B}, Y ∈ S_{B≺A}}
/// and {X ⪰ 0, Y ⪰ 0}. Once the iterate is close, low-rank Levenberg-Marquardt
/// steps on X = L L†, Y = M M† try to close the remaining gap. A candidate is
/// accepted only after [`check_certificate`] re-validates it.
pub fn separability_heuristic(w: &ProcessMatrix, opts: &SeparabilityOptions) -> Result<SeparabilityOutcome> {
    let report = validate_process(w)?;
    if !report.valid {
        return Err(Error::InvalidProcess(format!(
            "input is not a valid process (psd margin {:e}, trace error {:e}, subspace residual {:e})",
            report.psd_margin, report.trace_error, report.subspace_residual
        )));
    }
    let g = Geometry::of(w);
    let wm = w.w.hermitian_part();
    let p_ab = |m: &ComplexMatrix| g.ordered(m, Order::AB);
    let p_ba = |m: &ComplexMatrix| g.ordered(m, Order::BA);

    // (1 − P_ab)(1 − P_ba)W is the part no split can reproduce.
    let not_ba = &wm - &p_ba(&wm);
    let outside = &not_ba - &p_ab(&not_ba);
    let affine_gap = outside.frobenius_norm();
    if affine_gap > opts.tol {
        return Ok(SeparabilityOutcome::Inconclusive { residual: affine_gap, iterations: 0 });
    }
    let base = p_ab(&not_ba);

    let project_affine = |s: &Split| -> Split {
        let mid = (&(&s.x + &wm) - &s.y).scale_re(0.5);
        let x = &base + &p_ab(&p_ba(&mid));
        let y = &wm - &x;
        Split { x, y }
    };

    let mut cur = Split { x: wm.scale_re(0.5), y: wm.scale_re(0.5) };
    let mut residual = f64::INFINITY;
    for it in 1..=opts.iterations {
        let aff = project_affine(&cur);
        let ex = tensor::eig_hermitian(&aff.x.hermitian_part())?;
        let ey = tensor::eig_hermitian(&aff.y.hermitian_part())?;
        let neg = |v: &[f64]| v.iter().filter(|&&l| l < 0.0).map(|l| l * l).sum::<f64>();
        residual = (neg(&ex.values) + neg(&ey.values)).sqrt();
        let min_x = ex.values.last().copied().unwrap_or(0.0);
        let min_y = ey.values.last().copied().unwrap_or(0.0);
        if min_x >= -opts.tol && min_y >= -opts.tol {
            if let Some(cert) = check_certificate(w, &aff.x, &aff.y, opts.tol, it)? {
                return Ok(SeparabilityOutcome::Separable(cert));
            }
        }
        if residual < POLISH_START && it % POLISH_EVERY == 0 {
            let res = AffineResidual { wm: &wm, p_ab: &p_ab, p_ba: &p_ba };
            for (x, y) in polish_candidates(&res, &ex, &ey) {
                if let Some(cert) = check_certificate(w, &x, &y, opts.tol, it)? {
                    return Ok(SeparabilityOutcome::Separable(cert));
                }
            }
        }
        let px = ex.map_values(|l| l.max(0.0));
        let py = ey.map_values(|l| l.max(0.0));
        cur = Split {
            x: &aff.x + &(&px - &aff.x).scale_re(RELAXATION),
            y: &aff.y + &(&py - &aff.y).scale_re(RELAXATION),
        };
    }
    Ok(SeparabilityOutcome::Inconclusive { residual, iterations: opts.iterations })
}

const RELAXATION: f64 = 1.9;
const POLISH_START: f64 = 1e-2;
const POLISH_EVERY: usize = 100;
const POLISH_CUTOFF: f64 = 1e-2;
const POLISH_GAP: f64 = 10.0;
const POLISH_FLOOR: f64 = 1e-8;
const POLISH_MAX_PARAMS: usize = 768;
const POLISH_STEPS: usize = 30;

/// Stacks the affine constraint residuals of (X, Y) as real numbers.
struct AffineResidual<'a> {
    wm: &'a ComplexMatrix,
    p_ab: &'a dyn Fn(&ComplexMatrix) -> ComplexMatrix,
    p_ba: &'a dyn Fn(&ComplexMatrix) -> ComplexMatrix,
}

impl AffineResidual<'_> {
    fn n(&self) -> usize {
        self.wm.rows()
    }

    fn len(&self) -> usize {
        3 * self.n() * self.n()
    }

    /// Writes the upper triangle of a Hermitian block: diagonal reals, then re/im pairs.
    fn push(&self, out: &mut [f64], block: usize, m: &ComplexMatrix) {
        let n = self.n();
        let mut k = block * n * n;
        for r in 0..n {
            out[k] = m.get(r, r).re;
            k += 1;
            for c in r + 1..n {
                let z = m.get(r, c);
                out[k] = z.re;
                out[k + 1] = z.im;
                k += 2;
            }
        }
    }

    /// Linear part applied to a perturbation (dX, dY).
    fn linear(&self, dx: Option<&ComplexMatrix>, dy: Option<&ComplexMatrix>) -> DVector<f64> {
        let n = self.n();
        let mut out = vec![0.0; self.len()];
        let sum = match (dx, dy) {
            (Some(x), Some(y)) => x + y,
            (Some(x), None) => x.clone(),
            (None, Some(y)) => y.clone(),
            (None, None) => ComplexMatrix::zeros(n, n),
        };
        self.push(&mut out, 0, &sum);
        if let Some(x) = dx {
            self.push(&mut out, 1, &(x - &(self.p_ab)(x)));
        }
        if let Some(y) = dy {
            self.push(&mut out, 2, &(y - &(self.p_ba)(y)));
        }
        DVector::from_vec(out)
    }

    fn value(&self, x: &ComplexMatrix, y: &ComplexMatrix) -> DVector<f64> {
        let mut f = self.linear(Some(x), Some(y));
        let mut w = vec![0.0; self.len()];
        self.push(&mut w, 0, self.wm);
        f -= DVector::from_vec(w);
        f
    }
}

/// Leading `r` eigenvectors scaled by the square roots of their eigenvalues.
fn leading_factor(e: &tensor::Eigen, r: usize) -> ComplexMatrix {
    let n = e.vectors.rows();
    let mut f = ComplexMatrix::zeros(n, r);
    for k in 0..r {
        let s = e.values[k].max(0.0).sqrt();
        for i in 0..n {
            f.set(i, k, e.vectors.get(i, k) * s);
        }
    }
    f
}

/// Levenberg-Marquardt on low-rank factors X = L L†, Y = M M† so that the
/// split satisfies the affine constraints while staying PSD by construction.
fn low_rank_refine(res: &AffineResidual, mut l: ComplexMatrix, mut m: ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let gram = |f: &ComplexMatrix| f * &f.dagger();
    let n = res.n();
    let params = 2 * n * (l.cols() + m.cols());
    let mut f = res.value(&gram(&l), &gram(&m));
    let mut mu = 1e-6;
    for _ in 0..POLISH_STEPS {
        if f.norm() <= 1e-14 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(res.len(), params);
        let mut col = 0;
        for (which, fac) in [(0, &l), (1, &m)] {
            for j in 0..fac.cols() {
                for i in 0..n {
                    for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                        let mut d = ComplexMatrix::zeros(n, fac.cols());
                        d.set(i, j, unit);
                        let half = &d * &fac.dagger();
                        let dg = &half + &half.dagger();
                        let v = if which == 0 { res.linear(Some(&dg), None) } else { res.linear(None, Some(&dg)) };
                        jac.set_column(col, &v);
                        col += 1;
                    }
                }
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &f;
        let mut accepted = false;
        for _ in 0..8 {
            let mut a = jtj.clone();
            for k in 0..params {
                a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let (mut nl, mut nm) = (l.clone(), m.clone());
            let mut k = 0;
            for fac in [&mut nl, &mut nm] {
                for j in 0..fac.cols() {
                    for i in 0..n {
                        let z = fac.get(i, j) + C64::new(step[k], step[k + 1]);
                        fac.set(i, j, z);
                        k += 2;
                    }
                }
            }
            let nf = res.value(&gram(&nl), &gram(&nm));
            if nf.norm() < f.norm() {
                (l, m, f) = (nl, nm, nf);
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (gram(&l), gram(&m))
}

/// Ranks at which the spectrum drops by at least `POLISH_GAP`, largest first,
/// followed by the relative-cutoff rank.
fn rank_candidates(e: &tensor::Eigen) -> Vec<usize> {
    let top = e.values.first().copied().unwrap_or(0.0);
    let mut out: Vec<usize> = (1..e.values.len())
        .rev()
        .filter(|&r| e.values[r - 1] > POLISH_FLOOR * top && e.values[r - 1] >= POLISH_GAP * e.values[r].max(0.0))
        .collect();
    out.push(e.values.iter().filter(|&&l| l > POLISH_CUTOFF * top).count().max(1));
    out.dedup();
    out
}

/// Candidate splits from low-rank refinement of the current iterate.
fn polish_candidates(res: &AffineResidual, ex: &tensor::Eigen, ey: &tensor::Eigen) -> Vec<(ComplexMatrix, ComplexMatrix)> {
    let fits = |rx: usize, ry: usize| 2 * res.n() * (rx + ry) <= POLISH_MAX_PARAMS;
    let (cx, cy) = (rank_candidates(ex), rank_candidates(ey));
    let mut ranks = Vec::new();
    if let Some(pair) = cx.iter().flat_map(|&rx| cy.iter().map(move |&ry| (rx, ry))).find(|&(rx, ry)| fits(rx, ry)) {
        ranks.push(pair);
    }
    let last = (*cx.last().unwrap_or(&1), *cy.last().unwrap_or(&1));
    if !ranks.contains(&last) && fits(last.0, last.1) {
        ranks.push(last);
    }
    ranks.into_iter().map(|(rx, ry)| low_rank_refine(res, leading_factor(ex, rx), leading_factor(ey, ry))).collect()
}

/// Re-validates a candidate split `W = X + Y` from scratch.
pub fn check_certificate(
    w: &ProcessMatrix,
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    tol: f64,
    iterations: usize,
) -> Result<Option<SeparabilityCertificate>> {
    let norm = w.dims.normalization();
    let q = (x.trace().re / norm).clamp(0.0, 1.0);
    let reconstruction_error = (&(x + y) - &w.w).frobenius_norm();
    if reconstruction_error > tol {
        return Ok(None);
    }
    let vt = ValidityTolerances { psd: tol, trace: tol, subspace: tol };
    let component = |m: &ComplexMatrix, weight: f64, order: Order| -> Result<Option<Option<ProcessMatrix>>> {
        if weight <= tol {
            // Negligible component: it must also be negligible as a matrix.
            return Ok((m.frobenius_norm() <= tol * norm).then_some(None));
        }
        let c = w.with_matrix(m.scale_re(1.0 / weight));
        let ok = validate_process_with(&c, vt)?.valid && ordered_residual(&c, order) <= tol;
        Ok(ok.then_some(Some(c)))
    };
    let Some(w_ab) = component(x, q, Order::AB)? else { return Ok(None) };
    let Some(w_ba) = component(y, 1.0 - q, Order::BA)? else { return Ok(None) };
    Ok(Some(SeparabilityCertificate { q, w_ab, w_ba, reconstruction_error, iterations }))
}

/// JSON form of a process matrix.
#[derive(Serialize, Deserialize)]
struct ProcessJson {
    format: String,
    version: u32,
    factors: Vec<FactorJson>,
    /// Row-major (re, im) pairs.
    entries: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct FactorJson {
    label: String,
    dim: usize,
}

pub const PROCESS_FORMAT: &str = "icolab-process-matrix";

impl Serialize for ProcessMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProcessJson {
            format: PROCESS_FORMAT.into(),
            version: 1,
            factors: self
                .layout
                .labels()
                .iter()
                .zip(self.layout.dims())
                .map(|(l, &d)| FactorJson { label: l.clone(), dim: d })
                .collect(),
            entries: self.w.to_row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProcessMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ProcessJson::deserialize(d)?;
        if j.format != PROCESS_FORMAT || j.version != 1 {
            return Err(D::Error::custom(format!("unsupported format {} v{}", j.format, j.version)));
        }
        let layout = SpaceLayout::new(j.factors.iter().map(|f| (f.label.clone(), f.dim))).map_err(D::Error::custom)?;
        let dims = ProcessDims::from_layout(&layout).map_err(D::Error::custom)?;
        let n = layout.dim();
        let entries: Vec<C64> = j.entries.iter().map(|[r, i]| tensor::c(*r, *i)).collect();
        let w = ComplexMatrix::from_row_major(n, n, &entries).map_err(D::Error::custom)?;
        ProcessMatrix::new(w, dims).map_err(D::Error::custom)
    }
}
