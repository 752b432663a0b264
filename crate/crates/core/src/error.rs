use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {node} out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("node {0} is isolated; normalized matrix views are undefined for it")]
    IsolatedNode(usize),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular (pivot {0} below tolerance)")]
    Singular(usize),

    #[error("graph is disconnected into {} components: {}", .0.len(), summarize_components(.0))]
    Disconnected(Vec<Vec<usize>>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("eigensolver failed to converge for eigenvalue {0}")]
    NoConvergence(usize),

    #[error("dataset `{name}` not found; looked in: {}", .searched.join(", "))]
    DatasetNotFound { name: String, searched: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

fn summarize_components(components: &[Vec<usize>]) -> String {
    let shown: Vec<String> = components
        .iter()
        .take(8)
        .map(|c| {
            if c.len() <= 6 {
                format!("{c:?}")
            } else {
                format!("[{}, {}, ... ({} nodes)]", c[0], c[1], c.len())
            }
        })
        .collect();
    let mut s = shown.join(", ");
    if components.len() > 8 {
        s.push_str(&format!(", ... {} more", components.len() - 8));
    }
    s
}
