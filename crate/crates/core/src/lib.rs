//! Timeline-based planning and execution.

pub mod executor;
pub mod model;
pub mod parser;
pub mod plan;
pub mod plandb;
pub mod relation;
pub mod solver;
pub mod stn;
pub mod validator;
pub mod time;

pub use relation::{Interval, PointKind, Primitive, PrimitiveKind, Relation, RelationKind};
pub use stn::{PointId, TemporalNetwork, ORIGIN};
pub use time::{Bound, TimeValue};
