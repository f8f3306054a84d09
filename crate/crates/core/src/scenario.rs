//! Config-driven scenarios: build a double switch, evaluate CHSH, entanglement,
//! order-level causality and the temporal-locality audit, and emit a report.

use serde::{Deserialize, Serialize};

use crate::bell::{self, ChshResult, MeasurementSetting, SeesawOptions};
use crate::behavior::BehaviorTable;
use crate::causal::{
    self, AuditMode, AuditReport, CausalRelation, CausalVerdict, LambdaModel, LambdaValue,
};
use crate::error::{Error, Result};
use crate::process::{self, SeparabilityOptions, SeparabilityOutcome, ValidityReport};
use crate::state::DensityOperator;
use crate::switch::{self, ControlAmplitudes, ControlMeasurement, DoubleSwitchSpec, OrderMode, SwitchOps};
use crate::tensor::{self, gates, ComplexMatrix, C64};

pub const REPORT_SCHEMA: &str = "icolab.run-report/1";
pub const CONFIG_SCHEMA: &str = "icolab.scenario/1";

/// Unitary given by name (`I`, `X`, `Y`, `Z`, `H`) or as explicit rows of
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl OperatorSpec {
    fn named(s: &str) -> Self {
        Self::Named(s.into())
    }

    pub fn resolve(&self) -> Result<ComplexMatrix> {
        match self {
            Self::Named(n) => gates::by_name(n).ok_or_else(|| Error::Config(format!("unknown unitary `{n}`"))),
            Self::Matrix(rows) => matrix_from_pairs(rows),
        }
    }
}

fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("explicit matrices must be square and non-empty".into()));
    }
    let entries: Vec<C64> = rows.iter().flatten().map(|[r, i]| tensor::c(*r, *i)).collect();
    ComplexMatrix::from_row_major(n, n, &entries).map_err(|e| Error::Config(e.to_string()))
}

/// Target input state by name (`0`, `1`, `+`, `-`) or as `[re, im]` amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

impl StateSpec {
    pub fn resolve(&self) -> Result<ComplexMatrix> {
        match self {
            Self::Named(n) => match n.as_str() {
                "0" => Ok(ComplexMatrix::basis(2, 0)),
                "1" => Ok(ComplexMatrix::basis(2, 1)),
                "+" => Ok(gates::plus()),
                "-" => Ok(gates::minus()),
                _ => Err(Error::Config(format!("unknown state `{n}`"))),
            },
            Self::Amplitudes(a) => {
                let v: Vec<C64> = a.iter().map(|[r, i]| tensor::c(*r, *i)).collect();
                Ok(ComplexMatrix::ket(&v))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub u_a: OperatorSpec,
    pub u_b: OperatorSpec,
    #[serde(default = "identity_op")]
    pub v0: OperatorSpec,
    #[serde(default = "identity_op")]
    pub v1: OperatorSpec,
    #[serde(default = "zero_state")]
    pub psi: StateSpec,
}

fn identity_op() -> OperatorSpec {
    OperatorSpec::named("I")
}

fn zero_state() -> StateSpec {
    StateSpec::Named("0".into())
}

impl SwitchConfig {
    fn resolve(&self) -> Result<SwitchOps> {
        SwitchOps::new(self.u_a.resolve()?, self.u_b.resolve()?, self.v0.resolve()?, self.v1.resolve()?, self.psi.resolve()?)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

impl Default for ControlConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { alpha: [h, 0.0], beta: [h, 0.0] }
    }
}

/// Either `"optimize"` or explicit observables per party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SettingsConfig {
    Keyword(String),
    Explicit { party1: MeasurementSetting, party2: MeasurementSetting },
}

impl Default for SettingsConfig {
    fn default() -> Self {
        Self::Keyword("optimize".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlBasis {
    PlusMinus,
    Computational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningConfig {
    pub basis: ControlBasis,
    pub outcome: String,
}

impl ConditioningConfig {
    fn measurement(&self) -> Result<(ControlMeasurement, usize)> {
        let m = match self.basis {
            ControlBasis::PlusMinus => ControlMeasurement::plus_minus(),
            ControlBasis::Computational => ControlMeasurement::computational(),
        };
        let k = m.outcome_index(&self.outcome).map_err(|e| Error::Config(e.to_string()))?;
        Ok((m, k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_causal_tol")]
    pub causal: f64,
    #[serde(default = "default_audit_tol")]
    pub audit: f64,
    #[serde(default = "default_separability_tol")]
    pub separability: f64,
}

fn default_causal_tol() -> f64 {
    causal::DEFAULT_CAUSAL_TOL
}

fn default_audit_tol() -> f64 {
    1e-12
}

fn default_separability_tol() -> f64 {
    process::DEFAULT_SEPARABILITY_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { causal: default_causal_tol(), audit: default_audit_tol(), separability: default_separability_tol() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeesawConfig {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_convergence")]
    pub tol: f64,
}

fn default_restarts() -> usize {
    bell::DEFAULT_RESTARTS
}

fn default_max_iterations() -> usize {
    bell::DEFAULT_MAX_ITERATIONS
}

fn default_convergence() -> f64 {
    bell::DEFAULT_CONVERGENCE
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self { restarts: default_restarts(), max_iterations: default_max_iterations(), tol: default_convergence() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_csv: Option<String>,
}

fn default_seed() -> u64 {
    bell::DEFAULT_SEED
}

fn default_visibility() -> f64 {
    1.0
}

fn default_audit_mode() -> AuditMode {
    AuditMode::Strict
}

fn default_separability_iterations() -> usize {
    process::DEFAULT_SEPARABILITY_ITERATIONS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub switch1: SwitchConfig,
    pub switch2: SwitchConfig,
    #[serde(default)]
    pub control: ControlConfig,
    pub order_mode: OrderMode,
    pub a5_satisfied: bool,
    #[serde(default = "default_visibility")]
    pub visibility: f64,
    #[serde(default)]
    pub settings: SettingsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ConditioningConfig>,
    #[serde(default = "default_audit_mode")]
    pub audit_mode: AuditMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seesaw: SeesawConfig,
    #[serde(default = "default_separability_iterations")]
    pub separability_iterations: usize,
    /// Adds a wall-clock `duration_ms` to the report (makes it nondeterministic).
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        if [t.causal, t.audit, t.separability, self.seesaw.tol].iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.seesaw.restarts == 0 || self.seesaw.max_iterations == 0 {
            return Err(Error::Config("seesaw restarts and iterations must be positive".into()));
        }
        if let SettingsConfig::Keyword(k) = &self.settings {
            if k != "optimize" {
                return Err(Error::Config(format!("settings must be \"optimize\" or explicit, got `{k}`")));
            }
        }
        if let Some(c) = &self.conditioning {
            c.measurement()?;
        }
        self.double_switch()?;
        Ok(())
    }

    pub fn double_switch(&self) -> Result<DoubleSwitchSpec> {
        let [ar, ai] = self.control.alpha;
        let [br, bi] = self.control.beta;
        let control = ControlAmplitudes::new(tensor::c(ar, ai), tensor::c(br, bi)).map_err(|e| Error::Config(e.to_string()))?;
        DoubleSwitchSpec::new(
            self.switch1.resolve()?,
            self.switch2.resolve()?,
            control,
            self.a5_satisfied,
            self.order_mode,
            self.visibility,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    fn seesaw_options(&self) -> SeesawOptions {
        SeesawOptions {
            restarts: self.seesaw.restarts,
            tol: self.seesaw.tol,
            max_iterations: self.seesaw.max_iterations,
            seed: self.seed,
        }
    }
}

fn hz_switch() -> SwitchConfig {
    SwitchConfig {
        u_a: OperatorSpec::named("H"),
        u_b: OperatorSpec::named("Z"),
        v0: identity_op(),
        v1: identity_op(),
        psi: zero_state(),
    }
}

fn condition_plus() -> Option<ConditioningConfig> {
    Some(ConditioningConfig { basis: ControlBasis::PlusMinus, outcome: "+".into() })
}

fn base_config(name: &str, description: &str, order_mode: OrderMode, a5: bool) -> ScenarioConfig {
    ScenarioConfig {
        scenario: name.into(),
        description: description.into(),
        switch1: hz_switch(),
        switch2: hz_switch(),
        control: ControlConfig::default(),
        order_mode,
        a5_satisfied: a5,
        visibility: 1.0,
        settings: SettingsConfig::default(),
        conditioning: condition_plus(),
        audit_mode: AuditMode::Strict,
        seed: default_seed(),
        tolerances: Tolerances::default(),
        seesaw: SeesawConfig::default(),
        separability_iterations: default_separability_iterations(),
        record_timing: false,
        output: OutputConfig::default(),
    }
}

/// Built-in scenarios in a stable order: (name, one-line description).
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "double-switch-coherent",
            "Two H/Z switches sharing a coherent control, conditioned on control outcome +",
        ),
        (
            "classical-order-baseline",
            "H/Z switches whose order is a classical mixture (q = 0.3), free evolution independent of the control",
        ),
        (
            "a5-violated-definite-order",
            "Definite order A<B with control-dependent free evolution V0 = I, V1 = Z between the parties",
        ),
    ]
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let description = list_scenarios()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| d)
        .ok_or_else(|| Error::Config(format!("unknown built-in scenario `{name}`")))?;
    Ok(match name {
        "double-switch-coherent" => base_config(name, description, OrderMode::Coherent, true),
        "classical-order-baseline" => base_config(name, description, OrderMode::ClassicalMixture { q: 0.3 }, true),
        _ => {
            let sw = SwitchConfig {
                u_a: OperatorSpec::named("H"),
                u_b: OperatorSpec::named("I"),
                v0: identity_op(),
                v1: OperatorSpec::named("Z"),
                psi: zero_state(),
            };
            let mut c = base_config(
                name,
                description,
                OrderMode::Definite { order: switch::Order::AB },
                false,
            );
            c.switch1 = sw.clone();
            c.switch2 = sw;
            c
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub order_mode: OrderMode,
    /// Free evolution independent of the control in both switches.
    pub a5_satisfied: bool,
    pub visibility: f64,
    pub audit_mode: AuditMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningSummary {
    pub basis: ControlBasis,
    pub outcome: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub trace: f64,
    pub purity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ConditioningSummary>,
    pub target_purity: f64,
    pub negativity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSummary {
    #[serde(flatten)]
    pub result: ChshResult,
    pub classical_bound: f64,
    pub violates_classical_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalSummary {
    /// The table the verdict refers to.
    pub table: String,
    pub behavior: BehaviorTable,
    #[serde(flatten)]
    pub verdict: CausalVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum SeparabilitySummary {
    Separable { q: f64, reconstruction_error: f64, iterations: usize },
    Inconclusive { residual: f64, iterations: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessSummary {
    pub validity: ValidityReport,
    pub separability: SeparabilitySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub assumptions: Assumptions,
    pub state: StateSummary,
    pub chsh: ChshSummary,
    pub causal_membership: CausalSummary,
    pub order_process: ProcessSummary,
    pub temporal_locality: AuditReport,
    /// Plain-language links from the assumption toggles to the verdicts.
    pub findings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// Quantities shared by `run` and each `sweep` row.
struct Core {
    rho: DensityOperator,
    conditioning: Option<ConditioningSummary>,
    full_trace: f64,
    full_purity: f64,
    negativity: f64,
    chsh: ChshResult,
    settings: (MeasurementSetting, MeasurementSetting),
    probe: BehaviorTable,
    verdict: CausalVerdict,
}

fn evaluate(config: &ScenarioConfig, spec: &DoubleSwitchSpec) -> Result<Core> {
    let state = switch::double_switch_output(spec)?;
    let full = state.to_density();
    let cond = config.conditioning.as_ref().map(|c| c.measurement()).transpose()?;
    let (prob, rho) = switch::target_state(&state, cond.as_ref().map(|(m, k)| (m, *k)))?;
    let negativity = switch::target_entanglement(&rho)?;
    let (chsh, settings) = match &config.settings {
        SettingsConfig::Explicit { party1, party2 } => {
            let t = bell::behavior(&rho, party1, party2)?;
            (bell::chsh(&t)?, (party1.clone(), party2.clone()))
        }
        SettingsConfig::Keyword(_) => {
            let r = bell::optimize_chsh(&rho, &config.seesaw_options(), None)?;
            let s = r.settings.clone().ok_or_else(|| Error::Numerical("optimizer returned no settings".into()))?;
            (r, s)
        }
    };
    let probe = causal::order_probe_table(spec)?;
    let verdict = causal::causal_membership(&probe, config.tolerances.causal)?;
    Ok(Core {
        conditioning: config.conditioning.as_ref().map(|c| ConditioningSummary {
            basis: c.basis,
            outcome: c.outcome.clone(),
            probability: prob,
        }),
        full_trace: full.trace().re,
        full_purity: full.purity(),
        negativity,
        chsh,
        settings,
        probe,
        verdict,
        rho,
    })
}

/// Finite λ model of the two-target measurement: party 1 measures target 1
/// with setting `a`, then party 2 measures target 2 with setting `b`.
///
/// λ(t_a) is the pre-measurement state together with an assignment of
/// party 1's outcome to each of its settings. In strict mode λ(t_b) is the
/// post-measurement state of target 2 given party 1's (setting, outcome)
/// together with an assignment of party 2's outcomes. In relaxed mode λ′(t_b)
/// is λ(t_a) itself, with party 2's declared marginal taken from that
/// earlier state.
pub fn sequential_lambda_model(
    rho: &DensityOperator,
    s1: &MeasurementSetting,
    s2: &MeasurementSetting,
    mode: AuditMode,
) -> Result<LambdaModel> {
    let (na, nb) = (s1.inputs(), s2.inputs());
    let layout = rho.layout().clone();
    let labels: Vec<&str> = layout.labels().iter().map(String::as_str).collect();
    if labels.len() != 2 {
        return Err(Error::DimensionMismatch("sequential model needs a bipartite target".into()));
    }
    let id = ComplexMatrix::identity(2);
    // p(i|a) and the normalized state of target 2 after outcome i of setting a.
    let mut p1 = vec![[0.0; 2]; na];
    let mut post = vec![vec![None; 2]; na];
    for a in 0..na {
        for i in 0..2 {
            let proj = tensor::tensor(&s1.observables[a].projector(i), &id)?;
            let m = &(&proj * rho.matrix()) * &proj;
            let p = m.trace().re.max(0.0);
            p1[a][i] = p;
            if p > causal::CONDITIONING_THRESHOLD {
                let reduced = tensor::partial_trace(&m, &layout, &[labels[1]])?.scale_re(1.0 / p);
                post[a][i] = Some(reduced);
            }
        }
    }
    let born2 = |sigma: &ComplexMatrix, b: usize, j: usize| -> f64 {
        (sigma * &s2.observables[b].projector(j)).trace().re.clamp(0.0, 1.0)
    };
    let rho2 = tensor::partial_trace(rho.matrix(), &layout, &[labels[1]])?;

    let assignments = |n: usize| -> Vec<Vec<usize>> {
        (0..(1usize << n)).map(|m| (0..n).map(|k| (m >> (n - 1 - k)) & 1).collect()).collect()
    };
    let bits = |v: &[usize]| v.iter().map(|b| b.to_string()).collect::<String>();
    let hs = assignments(na);
    let lambda_a: Vec<LambdaValue> = hs
        .iter()
        .map(|h| LambdaValue {
            label: format!("rho|i={}", bits(h)),
            weight: h.iter().enumerate().map(|(a, &i)| p1[a][i]).product(),
        })
        .collect();
    let marginal_i: Vec<f64> = (0..na)
        .flat_map(|a| hs.iter().flat_map(move |h| (0..2).map(move |i| if h[a] == i { 1.0 } else { 0.0 })))
        .collect();

    let gs = assignments(nb);
    let mut model = match mode {
        AuditMode::Strict => {
            // λ(t_b) = (a', i', g): post-measurement state of target 2 plus outcome assignment g.
            let mut lambda_b = Vec::new();
            let mut keys = Vec::new();
            for a in 0..na {
                for i in 0..2 {
                    let Some(sigma) = &post[a][i] else { continue };
                    for g in &gs {
                        let w: f64 = g.iter().enumerate().map(|(b, &j)| born2(sigma, b, j)).product();
                        lambda_b.push(LambdaValue {
                            label: format!("sigma[a={a},i={i}]|j={}", bits(g)),
                            weight: w * p1[a][i] / na as f64,
                        });
                        keys.push((a, i, g.clone()));
                    }
                }
            }
            let marginal_j: Vec<f64> = (0..nb)
                .flat_map(|b| keys.iter().flat_map(move |(_, _, g)| (0..2).map(move |j| if g[b] == j { 1.0 } else { 0.0 })))
                .collect();
            let mut joint = Vec::new();
            for a in 0..na {
                for b in 0..nb {
                    for h in &hs {
                        for (ka, ki, g) in &keys {
                            let possible = *ka == a && *ki == h[a];
                            for i in 0..2 {
                                for j in 0..2 {
                                    joint.push(if possible && i == h[a] && j == g[b] { 1.0 } else { 0.0 });
                                }
                            }
                        }
                    }
                }
            }
            LambdaModel {
                mode,
                settings: [na, nb],
                outcomes: [2, 2],
                lambda_a: lambda_a.clone(),
                lambda_b,
                joint,
                marginal_i: Some(marginal_i),
                marginal_j: Some(marginal_j),
                gamma: None,
            }
        }
        AuditMode::Relaxed => {
            let marginal_j: Vec<f64> = (0..nb)
                .flat_map(|b| {
                    let rho2 = &rho2;
                    hs.iter().flat_map(move |_| (0..2).map(move |j| born2(rho2, b, j)))
                })
                .collect();
            let mut joint = Vec::new();
            for a in 0..na {
                for b in 0..nb {
                    for (la, h) in hs.iter().enumerate() {
                        for lb in 0..hs.len() {
                            for i in 0..2 {
                                for j in 0..2 {
                                    let p = match &post[a][h[a]] {
                                        Some(sigma) if la == lb && i == h[a] => born2(sigma, b, j),
                                        _ => 0.0,
                                    };
                                    joint.push(p);
                                }
                            }
                        }
                    }
                }
            }
            LambdaModel {
                mode,
                settings: [na, nb],
                outcomes: [2, 2],
                lambda_a: lambda_a.clone(),
                lambda_b: lambda_a,
                joint,
                marginal_i: Some(marginal_i),
                marginal_j: Some(marginal_j),
                gamma: None,
            }
        }
    };
    let n = model.lambda_a.len() * model.lambda_b.len();
    model.gamma = Some(vec![CausalRelation::AB; n]);
    renormalize_weights(&mut model.lambda_a);
    renormalize_weights(&mut model.lambda_b);
    Ok(model)
}

/// Removes floating-point drift so weights sum to 1 exactly enough for validation.
fn renormalize_weights(ws: &mut [LambdaValue]) {
    let s: f64 = ws.iter().map(|w| w.weight).sum();
    if s > 0.0 {
        for w in ws {
            w.weight /= s;
        }
    }
}

fn findings(spec: &DoubleSwitchSpec, core: &Core, audit: &AuditReport, sep: &SeparabilitySummary) -> Vec<String> {
    let mut out = Vec::new();
    let order = match spec.order_mode {
        OrderMode::Coherent => "order entangled with the control".to_string(),
        OrderMode::ClassicalMixture { q } => format!("classical mixture of orders (q = {q})"),
        OrderMode::Definite { order } => format!("definite order {}", serde_json::to_value(order).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()),
    };
    out.push(format!(
        "order: {order}; free evolution {} the control",
        if spec.a5_satisfied { "independent of" } else { "correlated with" }
    ));
    out.push(format!(
        "targets: negativity {:.6}, optimized CHSH S = {:.9} ({} the classical bound 2)",
        core.negativity,
        core.chsh.value,
        if core.chsh.value > 2.0 + 1e-9 { "violates" } else { "within" }
    ));
    out.push(match &core.verdict {
        CausalVerdict::Causal(d) => format!("order-probe statistics are a mixture of definite orders (q = {:.9})", d.q),
        CausalVerdict::NotCausal { violation_margin } => {
            format!("order-probe statistics are not a mixture of definite orders (margin {violation_margin:e})")
        }
    });
    out.push(match sep {
        SeparabilitySummary::Separable { q, .. } => format!("order process decomposes into definite orders (q = {q:.9})"),
        SeparabilitySummary::Inconclusive { residual, .. } => format!(
            "no definite-order decomposition of the order process found (residual {residual:e}); evidence of indefinite order, not a proof"
        ),
    });
    out.push(format!(
        "temporal locality ({} λ): {} (max deviation {:e})",
        match audit.mode {
            AuditMode::Strict => "strict",
            AuditMode::Relaxed => "relaxed",
        },
        if audit.pass { "holds" } else { "violated" },
        audit.max_deviation
    ));
    out
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    let start = std::time::Instant::now();
    let spec = config.double_switch()?;
    let core = evaluate(config, &spec)?;

    let w = causal::order_model_process(&spec)?;
    let validity = process::validate_process(&w)?;
    let opts = SeparabilityOptions { iterations: config.separability_iterations, tol: config.tolerances.separability };
    let separability = match process::separability_heuristic(&w, &opts)? {
        SeparabilityOutcome::Separable(c) => SeparabilitySummary::Separable {
            q: c.q,
            reconstruction_error: c.reconstruction_error,
            iterations: c.iterations,
        },
        SeparabilityOutcome::Inconclusive { residual, iterations } => {
            SeparabilitySummary::Inconclusive { residual, iterations }
        }
    };

    let model = sequential_lambda_model(&core.rho, &core.settings.0, &core.settings.1, config.audit_mode)?;
    let audit = causal::temporal_locality_audit(&model, config.tolerances.audit)?;
    if let Some(path) = &config.output.audit_csv {
        let (rows, _) = causal::audit_deviations(&model)?;
        let f = std::fs::File::create(path)?;
        causal::write_deviations_csv(&rows, f)?;
    }

    let findings = findings(&spec, &core, &audit, &separability);
    let target_purity = core.rho.purity();
    let mut chsh = core.chsh.clone();
    chsh.seed = Some(config.seed);
    Ok(RunReport {
        schema: REPORT_SCHEMA.into(),
        scenario: config.scenario.clone(),
        seed: config.seed,
        config: config.clone(),
        assumptions: Assumptions {
            order_mode: spec.order_mode,
            a5_satisfied: spec.a5_satisfied,
            visibility: spec.visibility,
            audit_mode: config.audit_mode,
        },
        state: StateSummary {
            trace: core.full_trace,
            purity: core.full_purity,
            conditioning: core.conditioning.clone(),
            target_purity,
            negativity: core.negativity,
        },
        chsh: ChshSummary {
            violates_classical_bound: chsh.value > bell::classical_chsh_bound() + 1e-9,
            result: chsh,
            classical_bound: bell::classical_chsh_bound(),
        },
        causal_membership: CausalSummary {
            table: "order-probe".into(),
            behavior: core.probe.clone(),
            verdict: core.verdict.clone(),
        },
        order_process: ProcessSummary { validity, separability },
        temporal_locality: audit,
        findings,
        duration_ms: config.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Eta,
    Q,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(Self::Eta),
            "q" => Ok(Self::Q),
            _ => Err(Error::Config(format!("unknown sweep parameter `{s}` (expected eta or q)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub s_opt: f64,
    pub negativity: f64,
    pub causal_verdict: String,
}

/// Parses a comma-separated grid such as `1.0,0.5,0`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("invalid grid value `{t}`"))))
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    Ok(grid)
}

/// Config with the swept parameter set to `value`.
pub fn with_param(config: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    match (param, &mut c.order_mode) {
        (SweepParam::Eta, OrderMode::Coherent) => c.visibility = value,
        (SweepParam::Q, OrderMode::ClassicalMixture { q }) => *q = value,
        (SweepParam::Eta, _) => return Err(Error::Config("eta applies only to coherent order mode".into())),
        (SweepParam::Q, _) => return Err(Error::Config("q applies only to classical-mixture order mode".into())),
    }
    c.double_switch()?;
    Ok(c)
}

pub fn sweep(config: &ScenarioConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let configs = grid.iter().map(|&v| with_param(config, param, v)).collect::<Result<Vec<_>>>()?;
    configs
        .iter()
        .zip(grid)
        .map(|(c, &v)| {
            let core = evaluate(c, &c.double_switch()?)?;
            Ok(SweepRow {
                param: v,
                s_opt: core.chsh.value,
                negativity: core.negativity,
                causal_verdict: core.verdict.label().into(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "S_opt", "negativity", "causal_verdict"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([r.param.to_string(), r.s_opt.to_string(), r.negativity.to_string(), r.causal_verdict.clone()])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_and_round_trip() {
        for (name, _) in list_scenarios() {
            let c = builtin_scenario(name).unwrap();
            c.validate().unwrap();
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(ScenarioConfig::from_json(&s).unwrap(), c);
        }
        assert!(builtin_scenario("nope").unwrap_err().is_config());
    }

    #[test]
    fn config_errors_are_config_errors() {
        let mut c = builtin_scenario("double-switch-coherent").unwrap();
        c.switch1.u_a = OperatorSpec::named("Q");
        assert!(c.validate().unwrap_err().is_config());
        let mut c = builtin_scenario("double-switch-coherent").unwrap();
        c.tolerances.causal = 0.0;
        assert!(c.validate().unwrap_err().is_config());
        assert!(ScenarioConfig::from_json("{").unwrap_err().is_config());
    }

    #[test]
    fn explicit_matrix_and_state() {
        let m = OperatorSpec::Matrix(vec![vec![[0.0, 0.0], [1.0, 0.0]], vec![[1.0, 0.0], [0.0, 0.0]]]);
        assert_eq!(m.resolve().unwrap(), gates::x());
        let s = StateSpec::Amplitudes(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(s.resolve().unwrap(), ComplexMatrix::basis(2, 1));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1.0, 0.5,0").unwrap(), vec![1.0, 0.5, 0.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn sweep_param_must_fit_mode() {
        let c = builtin_scenario("classical-order-baseline").unwrap();
        assert!(with_param(&c, SweepParam::Eta, 0.5).is_err());
        assert!(with_param(&c, SweepParam::Q, 0.5).is_ok());
    }
}
