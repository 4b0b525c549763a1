//! Calculability diagnosis and exact reconstruction of traffic flows on
//! road networks with monitored intersections.

pub mod api;
pub mod conditions;
pub mod document;
pub mod fixtures;
pub mod flow_system;
pub mod linalg;
pub mod monitoring;
pub mod network;
pub mod rational;
pub mod scenario;
pub mod tree_solver;

pub use conditions::{diagnose, diagnose_with, DiagnoseOptions, DiagnosisReport, Verdict, VerdictRule};
pub use document::{FlowDocument, NetworkDocument};
pub use monitoring::{unmonitored_components, Placement};
pub use network::{ArcId, FlowState, RoadNetwork, VertexId};
pub use rational::Rational;
