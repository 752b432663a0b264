pub mod autodiff;
pub mod bench;
pub mod deep;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod leiden;
pub mod mcl;
pub mod metrics;
pub mod numerics;
pub mod sbm;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Graph, Partition};
