//! Simulation and analysis of indefinite causal order.
//!
//! The crate builds quantum-switch states, evaluates Bell/CHSH statistics with
//! optimized settings, represents and validates process matrices, tests causal
//! separability at the process and correlation level, and audits probability
//! models against the temporal-locality factorization.

pub mod behavior;
pub mod bell;
pub mod causal;
pub mod error;
pub mod process;
pub mod scenario;
pub mod state;
pub mod switch;
pub mod tensor;

pub use behavior::BehaviorTable;
pub use bell::{ChshResult, MeasurementSetting, SeesawOptions};
pub use causal::{AuditMode, AuditReport, CausalDecomposition, CausalVerdict, LambdaModel};
pub use error::{Error, Result};
pub use process::{Channel, Instrument, ProcessDims, ProcessMatrix, ValidityReport};
pub use scenario::{RunReport, ScenarioConfig, SweepParam, SweepRow};
pub use state::{DensityOperator, StateVector};
pub use switch::{ControlAmplitudes, ControlMeasurement, DoubleSwitchSpec, Order, OrderMode, SwitchOps, SwitchSpec};
pub use tensor::{ComplexMatrix, SpaceLayout, C64};
