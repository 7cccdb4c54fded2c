//! Popularity prediction from user-post sequences with temporal context
//! networks.

pub mod context;
pub mod dataset;
pub mod dtcn;
pub mod metrics;
pub mod numerics;
pub mod run;
pub mod timebase;
