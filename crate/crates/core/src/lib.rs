//! Two-stage stochastic MILP toolkit: scenario reduction, a cutting-plane
//! root solve on the reduced problem, and tight-cut warm starting of the
//! full-scenario branch-and-cut. Ships adapters for a stochastic capacitated
//! vehicle routing problem and a two-stage stochastic Steiner forest
//! packing problem.

pub mod bnc;
pub mod driver;
pub mod error;
pub mod flow;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod reduce;
pub mod scvrp;
pub mod ssfp;

pub use error::Error;
