//! Policy-based route orchestration over multi-operator satellite networks.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linkbudget;
pub mod orchestration;
pub mod policy;
pub mod routing;
pub mod scenario;
pub mod topology;

pub use error::{Error, Result};
