//! Credit-cycle dynamics of a loan/default interest-rate map: simulation,
//! regime classification, systemic-risk distances and scheduled scenarios.

pub mod error;
pub mod io;
pub mod model;
pub mod regime;
pub mod risk;
pub mod scenario;

pub use error::{ModelError, Result};
pub use model::{Guards, MarketState, ParamName, Params};
pub use regime::{classify, CriticalParamSelector, CriticalValue, Regime, RegimeKind};
pub use risk::{risk_report, DistanceMode, RiskReport, SelectorRisk};
pub use scenario::{detect_phases, preset, run_scenario, Phase, PresetName, Scenario, Trajectory};
