//! Clustering evaluation: supervised agreement scores and structural quality.

mod hungarian;
mod report;
mod structural;
mod supervised;

pub use hungarian::max_weight_assignment;
pub use report::{evaluate, MetricsReport, CSV_HEADER};
pub use structural::{conductance, conductance_mean, cpm, cut, internal_density, modularity, volume};
pub use supervised::{accuracy_matched, ari, nmi, AccMode, ContingencyTable, Score};
