//! Correlation-level causal analysis: signaling directions, membership in the
//! causal (definite-order) polytope, and the temporal-locality audit.

use std::io::Write;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::bell::{self, MeasurementSetting};
use crate::behavior::{BehaviorTable, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::process::{self, Instrument, ProcessMatrix};
use crate::switch::{self, ControlAmplitudes, ControlMeasurement, DoubleSwitchSpec, Order, OrderMode};
use crate::tensor::{self, ComplexMatrix};

/// Default feasibility tolerance of [`causal_membership`].
pub const DEFAULT_CAUSAL_TOL: f64 = 1e-9;
/// Largest input or output alphabet accepted by [`causal_membership`].
pub const MAX_ALPHABET: usize = 4;
/// Conditioning cells at or below this probability are skipped by the audit.
pub const CONDITIONING_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalingDirections {
    pub a_to_b: bool,
    pub b_to_a: bool,
}

/// Largest change of party 2's marginal under a change of party 1's input,
/// and vice versa.
fn signaling_strength(t: &BehaviorTable) -> (f64, f64) {
    let ((nx, ny), (na, nb)) = (t.inputs(), t.outputs());
    let mut to_b: f64 = 0.0;
    for y in 0..ny {
        for b in 0..nb {
            let base = t.marginal_2(b, 0, y);
            for x in 1..nx {
                to_b = to_b.max((t.marginal_2(b, x, y) - base).abs());
            }
        }
    }
    let mut to_a: f64 = 0.0;
    for x in 0..nx {
        for a in 0..na {
            let base = t.marginal_1(a, x, 0);
            for y in 1..ny {
                to_a = to_a.max((t.marginal_1(a, x, y) - base).abs());
            }
        }
    }
    (to_b, to_a)
}

pub fn signaling_directions(t: &BehaviorTable, tol: f64) -> Result<SignalingDirections> {
    t.validate(NORMALIZATION_TOL)?;
    let (to_b, to_a) = signaling_strength(t);
    Ok(SignalingDirections { a_to_b: to_b > tol, b_to_a: to_a > tol })
}

/// `t = q·component_ab + (1 − q)·component_ba`, with `component_ab` at most
/// one-way signaling from party 1 to party 2 and `component_ba` the mirror.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalDecomposition {
    pub q: f64,
    pub component_ab: BehaviorTable,
    pub component_ba: BehaviorTable,
    /// Entrywise max |q·ab + (1 − q)·ba − t|.
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum CausalVerdict {
    Causal(CausalDecomposition),
    /// `violation_margin` is the smallest entrywise (L∞) distance from the
    /// table to the causal polytope, as certified by the LP optimum.
    NotCausal { violation_margin: f64 },
}

impl CausalVerdict {
    pub fn is_causal(&self) -> bool {
        matches!(self, Self::Causal(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Causal(_) => "causal",
            Self::NotCausal { .. } => "not-causal",
        }
    }
}

struct MembershipLp {
    problem: Problem,
    r1: Vec<microlp::Variable>,
    r2: Vec<microlp::Variable>,
}

fn expr(terms: impl IntoIterator<Item = (microlp::Variable, f64)>) -> LinearExpr {
    let mut e = LinearExpr::empty();
    for (v, c) in terms {
        e.add(v, c);
    }
    e
}

/// Builds the subnormalized-component LP. With `slack = None` an ε variable
/// bounds the entrywise mismatch; with `Some(s)` the mismatch is capped at `s`.
fn membership_lp(
    t: &BehaviorTable,
    direction: OptimizationDirection,
    slack: Option<f64>,
) -> (MembershipLp, Option<microlp::Variable>) {
    let ((nx, ny), (na, nb)) = (t.inputs(), t.outputs());
    let n = t.probs().len();
    let mut problem = Problem::new(direction);
    let maximize_q = slack.is_some();
    let mut r1 = Vec::with_capacity(n);
    for x in 0..nx {
        for y in 0..ny {
            for _ in 0..na * nb {
                // Stage 2 maximizes the A≺B weight, read off block (0, 0).
                let obj = if maximize_q && x == 0 && y == 0 { 1.0 } else { 0.0 };
                r1.push(problem.add_var(obj, (0.0, f64::INFINITY)));
            }
        }
    }
    let r2: Vec<_> = (0..n).map(|_| problem.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let eps = slack.is_none().then(|| problem.add_var(1.0, (0.0, f64::INFINITY)));

    for (k, &p) in t.probs().iter().enumerate() {
        match (eps, slack) {
            (Some(e), _) => {
                problem.add_constraint(expr([(r1[k], 1.0), (r2[k], 1.0), (e, -1.0)]), ComparisonOp::Le, p);
                problem.add_constraint(expr([(r1[k], 1.0), (r2[k], 1.0), (e, 1.0)]), ComparisonOp::Ge, p);
            }
            (None, Some(s)) => {
                problem.add_constraint(expr([(r1[k], 1.0), (r2[k], 1.0)]), ComparisonOp::Le, p + s);
                problem.add_constraint(expr([(r1[k], 1.0), (r2[k], 1.0)]), ComparisonOp::Ge, p - s);
            }
            (None, None) => unreachable!(),
        }
    }

    let block = |r: &[microlp::Variable], x: usize, y: usize| -> Vec<(microlp::Variable, f64)> {
        let start = t.index(0, 0, x, y);
        r[start..start + na * nb].iter().map(|&v| (v, 1.0)).collect()
    };
    // Equal total weight in every input block.
    for r in [&r1, &r2] {
        let first = block(r, 0, 0);
        for x in 0..nx {
            for y in 0..ny {
                if (x, y) == (0, 0) {
                    continue;
                }
                let mut terms = block(r, x, y);
                terms.extend(first.iter().map(|&(v, _)| (v, -1.0)));
                problem.add_constraint(expr(terms), ComparisonOp::Eq, 0.0);
            }
        }
    }
    // r1: party 1's marginal does not depend on y.
    for x in 0..nx {
        for a in 0..na {
            for y in 1..ny {
                let terms = (0..nb)
                    .map(|b| (r1[t.index(a, b, x, y)], 1.0))
                    .chain((0..nb).map(|b| (r1[t.index(a, b, x, 0)], -1.0)));
                problem.add_constraint(expr(terms), ComparisonOp::Eq, 0.0);
            }
        }
    }
    // r2: party 2's marginal does not depend on x.
    for y in 0..ny {
        for b in 0..nb {
            for x in 1..nx {
                let terms = (0..na)
                    .map(|a| (r2[t.index(a, b, x, y)], 1.0))
                    .chain((0..na).map(|a| (r2[t.index(a, b, 0, y)], -1.0)));
                problem.add_constraint(expr(terms), ComparisonOp::Eq, 0.0);
            }
        }
    }
    (MembershipLp { problem, r1, r2 }, eps)
}

fn solve(problem: &Problem) -> Result<microlp::Solution> {
    problem
        .solve()
        .map_err(|e| Error::Solver(format!("{e:?}")))?
        .into_solution()
        .map_err(|e| Error::Solver(format!("interrupted: {:?}", e.termination_reason())))
}

/// Normalizes a subnormalized component block by block; near-zero blocks
/// become uniform.
fn normalize_component(t: &BehaviorTable, raw: Vec<f64>, weight: f64, tol: f64) -> Result<BehaviorTable> {
    if weight <= tol {
        return Ok(BehaviorTable::uniform(t.inputs(), t.outputs()));
    }
    let (nx, ny) = t.inputs();
    let block_len = t.outputs().0 * t.outputs().1;
    let mut probs: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
    for x in 0..nx {
        for y in 0..ny {
            let start = t.index(0, 0, x, y);
            let s: f64 = probs[start..start + block_len].iter().sum();
            for p in &mut probs[start..start + block_len] {
                *p /= s;
            }
        }
    }
    BehaviorTable::unchecked(t.inputs(), t.outputs(), probs)
}

/// Tests whether `t` is a convex mixture of a table with no signaling from
/// party 2 to party 1 and one with no signaling from party 1 to party 2.
///
/// Among all decompositions, the one with the largest party-1-first weight
/// `q` is returned. Every decomposition is re-validated before return.
pub fn causal_membership(t: &BehaviorTable, tol: f64) -> Result<CausalVerdict> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let ((nx, ny), (na, nb)) = (t.inputs(), t.outputs());
    if [nx, ny, na, nb].iter().any(|&s| s > MAX_ALPHABET) {
        return Err(Error::Capacity(format!(
            "alphabets {:?}/{:?} exceed the supported size {MAX_ALPHABET}",
            t.inputs(),
            t.outputs()
        )));
    }
    t.validate(NORMALIZATION_TOL)?;

    let (lp, eps) = membership_lp(t, OptimizationDirection::Minimize, None);
    let sol = solve(&lp.problem)?;
    let margin = sol.var_value(eps.expect("stage 1 has ε")).max(0.0);
    if margin > tol {
        return Ok(CausalVerdict::NotCausal { violation_margin: margin });
    }

    let (lp, _) = membership_lp(t, OptimizationDirection::Maximize, Some(tol));
    let sol = solve(&lp.problem)?;
    let r1: Vec<f64> = lp.r1.iter().map(|&v| sol.var_value(v)).collect();
    let r2: Vec<f64> = lp.r2.iter().map(|&v| sol.var_value(v)).collect();
    let blocks = (nx * ny) as f64;
    let q = ((0..nx)
        .flat_map(|x| (0..ny).map(move |y| (x, y)))
        .map(|(x, y)| {
            let start = t.index(0, 0, x, y);
            r1[start..start + na * nb].iter().sum::<f64>()
        })
        .sum::<f64>()
        / blocks)
        .clamp(0.0, 1.0);
    let component_ab = normalize_component(t, r1, q, tol)?;
    let component_ba = normalize_component(t, r2, 1.0 - q, tol)?;
    let recon = component_ab.mix(&component_ba, q)?;
    let reconstruction_error = recon.max_abs_diff(t);

    let check = 10.0 * tol;
    let (_, ab_to_a) = signaling_strength(&component_ab);
    let (ba_to_b, _) = signaling_strength(&component_ba);
    if reconstruction_error > check
        || component_ab.validate(check).is_err()
        || component_ba.validate(check).is_err()
        || ab_to_a > check
        || ba_to_b > check
    {
        return Err(Error::Solver(format!(
            "decomposition failed re-validation (reconstruction error {reconstruction_error:e}, \
             backward signaling {ab_to_a:e}/{ba_to_b:e})"
        )));
    }
    Ok(CausalVerdict::Causal(CausalDecomposition { q, component_ab, component_ba, reconstruction_error }))
}

/// Born table of the two target qubits of a double switch.
pub fn behavior_from_switch_scenario(
    spec: &DoubleSwitchSpec,
    settings: (&MeasurementSetting, &MeasurementSetting),
    conditioning: Option<(&ControlMeasurement, usize)>,
) -> Result<BehaviorTable> {
    let state = switch::double_switch_output(spec)?;
    let (_, rho) = switch::target_state(&state, conditioning)?;
    bell::behavior(&rho, settings.0, settings.1)
}

/// Process describing how the order of A and B is fixed in `spec`.
///
/// All three modes share the switch form with the control kept in the
/// future: coherent mode uses the configured amplitudes and visibility, a
/// classical mixture is the fully dephased switch with weights (q, 1 − q),
/// and a definite order is a single branch.
pub fn order_model_process(spec: &DoubleSwitchSpec) -> Result<ProcessMatrix> {
    let psi = &spec.switch1.psi;
    let sq = |w: f64| tensor::re(w.sqrt());
    let (control, eta) = match spec.order_mode {
        OrderMode::Coherent => (spec.control, spec.visibility),
        OrderMode::ClassicalMixture { q } => (ControlAmplitudes::new(sq(q), sq(1.0 - q))?, 0.0),
        OrderMode::Definite { order: Order::AB } => (ControlAmplitudes::zero(), 1.0),
        OrderMode::Definite { order: Order::BA } => (ControlAmplitudes::one(), 1.0),
    };
    process::switch_process_with_visibility(control, psi, eta)
}

/// Measure-and-reprepare instrument: outcome = computational-basis result,
/// input `x` prepares `|x⟩`.
pub fn probe_instrument(d: usize) -> Result<Instrument> {
    Instrument::measure_and_prepare(d, 2.min(d), |x, _| ComplexMatrix::basis(d, x))
}

/// Party A/B statistics of the order model under [`probe_instrument`]s, with
/// the future discarded.
pub fn order_probe_table(spec: &DoubleSwitchSpec) -> Result<BehaviorTable> {
    let w = order_model_process(spec)?;
    let d = spec.switch1.target_dim();
    let probe = probe_instrument(d)?;
    process::born_probabilities(&w, &probe, &probe)
}

/// Reading of λ(t_b) a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditMode {
    /// λ(t_b) is the state of the world immediately before party 2 acts.
    Strict,
    /// λ′(t_b) is an earlier-time description supplied by the caller.
    Relaxed,
}

/// Classical order variable γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalRelation {
    #[serde(rename = "A<B")]
    AB,
    #[serde(rename = "B<A")]
    BA,
    #[serde(rename = "A||B")]
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    pub label: String,
    pub weight: f64,
}

/// Finite hidden-variable model for the temporal-locality audit.
///
/// Flat tables, leftmost index most significant:
/// `joint[a][b][λa][λb][i][j]`, `marginal_i[a][λa][i]`, `marginal_j[b][λb][j]`,
/// `gamma[λa][λb]`. A `(a, b, λa, λb)` block that is identically zero marks
/// an impossible combination and is skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaModel {
    pub mode: AuditMode,
    /// Number of settings `a` and `b`.
    pub settings: [usize; 2],
    /// Number of outcomes `i` and `j`.
    pub outcomes: [usize; 2],
    pub lambda_a: Vec<LambdaValue>,
    pub lambda_b: Vec<LambdaValue>,
    pub joint: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_i: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_j: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<CausalRelation>>,
}

impl LambdaModel {
    fn shape(&self) -> (usize, usize, usize, usize, usize, usize) {
        (
            self.settings[0],
            self.settings[1],
            self.lambda_a.len(),
            self.lambda_b.len(),
            self.outcomes[0],
            self.outcomes[1],
        )
    }

    pub fn joint_index(&self, a: usize, b: usize, la: usize, lb: usize, i: usize, j: usize) -> usize {
        let (_, nb, nla, nlb, ni, nj) = self.shape();
        ((((a * nb + b) * nla + la) * nlb + lb) * ni + i) * nj + j
    }

    pub fn joint(&self, a: usize, b: usize, la: usize, lb: usize, i: usize, j: usize) -> f64 {
        self.joint[self.joint_index(a, b, la, lb, i, j)]
    }

    fn block(&self, a: usize, b: usize, la: usize, lb: usize) -> &[f64] {
        let start = self.joint_index(a, b, la, lb, 0, 0);
        &self.joint[start..start + self.outcomes[0] * self.outcomes[1]]
    }

    pub fn validate(&self) -> Result<()> {
        let (na, nb, nla, nlb, ni, nj) = self.shape();
        if [na, nb, nla, nlb, ni, nj].contains(&0) {
            return Err(Error::InvalidTable("empty alphabet in λ model".into()));
        }
        for (name, ws) in [("lambda_a", &self.lambda_a), ("lambda_b", &self.lambda_b)] {
            let s: f64 = ws.iter().map(|w| w.weight).sum();
            if ws.iter().any(|w| w.weight < 0.0) || (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidTable(format!("{name} weights sum to {s}")));
            }
        }
        if self.joint.len() != na * nb * nla * nlb * ni * nj {
            return Err(Error::InvalidTable(format!("joint has {} entries", self.joint.len())));
        }
        let bad = |p: &f64| !p.is_finite() || *p < -NORMALIZATION_TOL || *p > 1.0 + NORMALIZATION_TOL;
        if self.joint.iter().any(bad) {
            return Err(Error::InvalidTable("joint entry outside [0, 1]".into()));
        }
        for a in 0..na {
            for b in 0..nb {
                for la in 0..nla {
                    for lb in 0..nlb {
                        let s: f64 = self.block(a, b, la, lb).iter().sum();
                        if s != 0.0 && (s - 1.0).abs() > NORMALIZATION_TOL {
                            return Err(Error::InvalidTable(format!(
                                "p(i,j|a={a},b={b},λa={la},λb={lb}) sums to {s}"
                            )));
                        }
                    }
                }
            }
        }
        let check_marginal = |m: &Option<Vec<f64>>, settings: usize, lambdas: usize, outs: usize, name: &str| {
            if let Some(m) = m {
                if m.len() != settings * lambdas * outs || m.iter().any(bad) {
                    return Err(Error::InvalidTable(format!("{name} has the wrong shape or range")));
                }
                for block in m.chunks(outs) {
                    let s: f64 = block.iter().sum();
                    if (s - 1.0).abs() > NORMALIZATION_TOL {
                        return Err(Error::InvalidTable(format!("{name} block sums to {s}")));
                    }
                }
            }
            Ok(())
        };
        check_marginal(&self.marginal_i, na, nla, ni, "marginal_i")?;
        check_marginal(&self.marginal_j, nb, nlb, nj, "marginal_j")?;
        if let Some(g) = &self.gamma {
            if g.len() != nla * nlb {
                return Err(Error::InvalidTable("gamma must have one entry per (λa, λb)".into()));
            }
        }
        Ok(())
    }
}

/// Which conditional a deviation row refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEquation {
    /// p(i | a, b, λa, λb, j) against p(i | a, λa).
    FirstOutcome,
    /// p(j | a, b, λa, λb, i) against p(j | b, λb).
    SecondOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub a: usize,
    pub b: usize,
    pub lambda_a: String,
    pub lambda_b: String,
    pub i: usize,
    pub j: usize,
    pub equation: AuditEquation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<CausalRelation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub cell: AuditCell,
    pub conditional: f64,
    pub declared: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: AuditMode,
    pub pass: bool,
    pub tol: f64,
    pub max_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case: Option<AuditCell>,
    /// max |p(i,j|a,b,λa,λb) − p(i|a,λa)·p(j|b,λb)| over possible blocks.
    pub product_residual: f64,
    pub checked_cells: usize,
    pub skipped_cells: usize,
    pub conditioning_threshold: f64,
}

/// Every conditional compared by the audit, in table order.
pub fn audit_deviations(m: &LambdaModel) -> Result<(Vec<DeviationRow>, usize)> {
    m.validate()?;
    let (Some(mi), Some(mj)) = (&m.marginal_i, &m.marginal_j) else {
        return Err(Error::UndeclaredMarginals(
            "both p(i|a,λa) and p(j|b,λb) must be declared".into(),
        ));
    };
    let (na, nb, nla, nlb, ni, nj) = m.shape();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for a in 0..na {
        for b in 0..nb {
            for la in 0..nla {
                for lb in 0..nlb {
                    let block = m.block(a, b, la, lb);
                    if block.iter().all(|&p| p == 0.0) {
                        continue;
                    }
                    let prior = m.lambda_a[la].weight * m.lambda_b[lb].weight;
                    let gamma = m.gamma.as_ref().map(|g| g[la * nlb + lb]);
                    let cell = |i: usize, j: usize, equation| AuditCell {
                        a,
                        b,
                        lambda_a: m.lambda_a[la].label.clone(),
                        lambda_b: m.lambda_b[lb].label.clone(),
                        i,
                        j,
                        equation,
                        gamma,
                    };
                    for j in 0..nj {
                        let pj: f64 = (0..ni).map(|i| block[i * nj + j]).sum();
                        if prior * pj <= CONDITIONING_THRESHOLD {
                            skipped += 1;
                            continue;
                        }
                        for i in 0..ni {
                            let conditional = block[i * nj + j] / pj;
                            let declared = mi[(a * nla + la) * ni + i];
                            rows.push(DeviationRow {
                                cell: cell(i, j, AuditEquation::FirstOutcome),
                                conditional,
                                declared,
                                deviation: (conditional - declared).abs(),
                            });
                        }
                    }
                    for i in 0..ni {
                        let pi: f64 = block[i * nj..(i + 1) * nj].iter().sum();
                        if prior * pi <= CONDITIONING_THRESHOLD {
                            skipped += 1;
                            continue;
                        }
                        for j in 0..nj {
                            let conditional = block[i * nj + j] / pi;
                            let declared = mj[(b * nlb + lb) * nj + j];
                            rows.push(DeviationRow {
                                cell: cell(i, j, AuditEquation::SecondOutcome),
                                conditional,
                                declared,
                                deviation: (conditional - declared).abs(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok((rows, skipped))
}

pub fn temporal_locality_audit(m: &LambdaModel, tol: f64) -> Result<AuditReport> {
    let (rows, skipped_cells) = audit_deviations(m)?;
    let worst = rows
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.deviation.total_cmp(&b.deviation).then(ib.cmp(ia)));
    let max_deviation = worst.map_or(0.0, |(_, r)| r.deviation);
    let mi = m.marginal_i.as_ref().expect("checked by audit_deviations");
    let mj = m.marginal_j.as_ref().expect("checked by audit_deviations");
    let (na, nb, nla, nlb, ni, nj) = m.shape();
    let mut product_residual: f64 = 0.0;
    for a in 0..na {
        for b in 0..nb {
            for la in 0..nla {
                for lb in 0..nlb {
                    let block = m.block(a, b, la, lb);
                    if block.iter().all(|&p| p == 0.0) {
                        continue;
                    }
                    for i in 0..ni {
                        for j in 0..nj {
                            let prod = mi[(a * nla + la) * ni + i] * mj[(b * nlb + lb) * nj + j];
                            product_residual = product_residual.max((block[i * nj + j] - prod).abs());
                        }
                    }
                }
            }
        }
    }
    Ok(AuditReport {
        mode: m.mode,
        pass: max_deviation <= tol,
        tol,
        max_deviation,
        worst_case: worst.map(|(_, r)| r.cell.clone()),
        product_residual,
        checked_cells: rows.len(),
        skipped_cells,
        conditioning_threshold: CONDITIONING_THRESHOLD,
    })
}

/// Writes deviation rows as CSV with a header row.
pub fn write_deviations_csv<W: Write>(rows: &[DeviationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "lambda_a", "lambda_b", "i", "j", "equation", "conditional", "declared", "deviation"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        let eq = match r.cell.equation {
            AuditEquation::FirstOutcome => "first_outcome",
            AuditEquation::SecondOutcome => "second_outcome",
        };
        w.write_record([
            r.cell.a.to_string(),
            r.cell.b.to_string(),
            r.cell.lambda_a.clone(),
            r.cell.lambda_b.clone(),
            r.cell.i.to_string(),
            r.cell.j.to_string(),
            eq.to_string(),
            r.conditional.to_string(),
            r.declared.to_string(),
            r.deviation.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
