//! Deep graph clustering: GCN encoders trained as a graph autoencoder (GAE),
//! an adversarially regularised autoencoder (ARGA) or a contrastive
//! multi-view model (MVGRL), followed by k-means on the embeddings.

mod autoencoder;
mod gcn;
mod mvgrl;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use autoencoder::{arga_train, gae_train, Discriminator};
pub use gcn::{gcn_forward, normalize_rows_l2, ppr_diffusion, propagation_matrix, GcnEncoder};
pub use mvgrl::{mvgrl_train, MvgrlHeads};

use crate::error::{invalid, Error, Result};
use crate::graph::Partition;
use crate::ingest::Dataset;
use crate::numerics::{kmeans_restarts, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeepModel {
    Gae,
    Arga,
    Mvgrl,
}

impl fmt::Display for DeepModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeepModel::Gae => "gae",
            DeepModel::Arga => "arga",
            DeepModel::Mvgrl => "mvgrl",
        })
    }
}

impl FromStr for DeepModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gae" => Ok(DeepModel::Gae),
            "arga" => Ok(DeepModel::Arga),
            "mvgrl" => Ok(DeepModel::Mvgrl),
            other => invalid(format!("unknown deep model {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepHyper {
    pub model: DeepModel,
    pub lr: f64,
    /// Width of every GCN layer.
    pub hidden_dim: usize,
    pub epochs: usize,
    pub gcn_layers: usize,
    /// Discriminator steps per epoch (ARGA).
    pub disc_iters: usize,
    /// Hidden width of the ARGA discriminator.
    pub disc_hidden: usize,
    /// PPR teleport probability for the MVGRL diffusion view.
    pub ppr_alpha: f64,
    /// Weight on positive pairs in the reconstruction loss; 1 is unweighted.
    pub pos_weight: f64,
    /// Use the literal saturating generator loss for ARGA.
    pub saturating_generator: bool,
    pub normalize_features: bool,
    pub seed: u64,
}

impl DeepHyper {
    pub fn defaults(model: DeepModel, seed: u64) -> Self {
        let (hidden_dim, epochs) = match model {
            DeepModel::Gae | DeepModel::Arga => (32, 50),
            DeepModel::Mvgrl => (128, 40),
        };
        Self {
            model,
            lr: 0.001,
            hidden_dim,
            epochs,
            gcn_layers: 2,
            disc_iters: 5,
            disc_hidden: 64,
            ppr_alpha: 0.2,
            pos_weight: 1.0,
            saturating_generator: false,
            normalize_features: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.hidden_dim == 0 || self.gcn_layers == 0 || self.disc_hidden == 0 {
            return invalid("learning rate, widths and layer count must be positive");
        }
        if self.model == DeepModel::Arga && self.disc_iters == 0 {
            return invalid("ARGA needs at least one discriminator step per epoch");
        }
        if !(self.ppr_alpha > 0.0 && self.ppr_alpha < 1.0) {
            return invalid(format!("PPR alpha must lie in (0, 1), got {}", self.ppr_alpha));
        }
        if !(self.pos_weight > 0.0) {
            return invalid("positive weight must be positive");
        }
        Ok(())
    }

    pub(crate) fn layer_dims(&self, input: usize) -> Vec<usize> {
        std::iter::once(input).chain(std::iter::repeat_n(self.hidden_dim, self.gcn_layers)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: DeepModel,
    /// One encoder for GAE and ARGA; the adjacency-view then diffusion-view
    /// encoder for MVGRL.
    pub encoders: Vec<GcnEncoder>,
    /// Final node embeddings, one row per node.
    pub embedding: DenseMatrix,
    /// Training loss per epoch, evaluated before that epoch's update. For
    /// ARGA this is the reconstruction term alone.
    pub loss_trace: Vec<f64>,
    /// Entries clamped by `log` over the whole run.
    pub faults: usize,
    pub mvgrl_heads: Option<MvgrlHeads>,
}

pub(crate) fn prepared_features(ds: &Dataset, hyper: &DeepHyper) -> DenseMatrix {
    if hyper.normalize_features {
        normalize_rows_l2(&ds.features)
    } else {
        ds.features.clone()
    }
}

pub(crate) fn at_epoch<T>(epoch: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NumericFault(msg) => Error::NumericFault(format!("epoch {epoch}: {msg}")),
        other => other,
    })
}

pub fn train(ds: &Dataset, hyper: &DeepHyper) -> Result<TrainedModel> {
    match hyper.model {
        DeepModel::Gae => gae_train(ds, hyper),
        DeepModel::Arga => arga_train(ds, hyper),
        DeepModel::Mvgrl => mvgrl_train(ds, hyper),
    }
}

/// k-means with 10 restarts on the trained embedding.
pub fn encode_and_cluster(model: &TrainedModel, k: usize, seed: u64) -> Result<(Partition, DenseMatrix)> {
    let km = kmeans_restarts(&model.embedding, k, seed, 10, 300)?;
    Ok((km.partition, model.embedding.clone()))
}
