use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{at_epoch, gcn_forward, prepared_features, propagation_matrix, DeepHyper, DeepModel, GcnEncoder, TrainedModel};
use crate::autodiff::{glorot_uniform, Adam, Tape, Var};
use crate::error::{invalid, Result};
use crate::graph::{matrix_view, MatrixKind};
use crate::ingest::Dataset;
use crate::numerics::DenseMatrix;

/// Two-layer MLP scoring latent codes, `d → hidden (ReLU) → 1`; outputs are
/// logits and the probability is their sigmoid.
#[derive(Clone, Debug)]
pub struct Discriminator {
    /// `W₁, b₁, W₂, b₂`.
    pub weights: Vec<DenseMatrix>,
    adam: Adam,
}

impl Discriminator {
    pub fn new<R: Rng>(input: usize, hidden: usize, lr: f64, rng: &mut R) -> Self {
        let weights = vec![
            glorot_uniform(input, hidden, rng),
            DenseMatrix::zeros(1, hidden),
            glorot_uniform(hidden, 1, rng),
            DenseMatrix::zeros(1, 1),
        ];
        let adam = Adam::new(lr, &weights);
        Self { weights, adam }
    }

    fn logits_tape(tape: &mut Tape, w: &[Var], z: Var) -> Result<Var> {
        let h = tape.matmul(z, w[0])?;
        let h = tape.add_row_broadcast(h, w[1])?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, w[2])?;
        tape.add_row_broadcast(o, w[3])
    }

    pub fn logits(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let mut t = Tape::new();
        let w: Vec<Var> = self.weights.iter().map(|m| t.constant(m.clone())).collect();
        let zv = t.constant(z.clone());
        let out = Self::logits_tape(&mut t, &w, zv)?;
        Ok(t.value(out).clone())
    }

    /// One Adam step on `BCE(D(real), 1) + BCE(D(fake), 0)`; returns the loss
    /// before the update.
    pub fn step(&mut self, real: &DenseMatrix, fake: &DenseMatrix) -> Result<f64> {
        let mut t = Tape::new();
        let w: Vec<Var> = self.weights.iter().map(|m| t.param(m.clone())).collect();
        let rv = t.constant(real.clone());
        let fv = t.constant(fake.clone());
        let lr = Self::logits_tape(&mut t, &w, rv)?;
        let lf = Self::logits_tape(&mut t, &w, fv)?;
        let ones = Arc::new(DenseMatrix::filled(real.rows(), 1, 1.0));
        let zeros = Arc::new(DenseMatrix::zeros(fake.rows(), 1));
        let a = t.bce_with_logits(lr, ones, 1.0)?;
        let b = t.bce_with_logits(lf, zeros, 1.0)?;
        let loss = t.add(a, b)?;
        t.backward(loss)?;
        let grads: Vec<Option<&DenseMatrix>> = w.iter().map(|&v| t.grad(v)).collect();
        self.adam.step(&mut self.weights, &grads)?;
        Ok(t.scalar(loss))
    }
}

struct Inputs {
    x: Arc<DenseMatrix>,
    prop: Arc<DenseMatrix>,
    target: Arc<DenseMatrix>,
}

/// Reconstruction loss `BCE(σ(Z Zᵀ), A)` over all `n²` pairs.
fn reconstruction(tape: &mut Tape, z: Var, target: &Arc<DenseMatrix>, pos_weight: f64) -> Result<Var> {
    let zt = tape.transpose(z)?;
    let logits = tape.matmul(z, zt)?;
    tape.bce_with_logits(logits, target.clone(), pos_weight)
}

fn encoder_step(
    enc: &mut GcnEncoder,
    adam: &mut Adam,
    inputs: &Inputs,
    hyper: &DeepHyper,
    disc: Option<&Discriminator>,
) -> Result<(f64, usize)> {
    let mut t = Tape::new();
    let w = enc.bind(&mut t);
    let x = t.constant_shared(inputs.x.clone());
    let p = t.constant_shared(inputs.prop.clone());
    let z = *GcnEncoder::forward_tape(&mut t, &w, x, p)?.last().expect("at least one layer");
    let recon = reconstruction(&mut t, z, &inputs.target, hyper.pos_weight)?;
    let mut loss = recon;
    if let Some(d) = disc {
        let dw: Vec<Var> = d.weights.iter().map(|m| t.constant(m.clone())).collect();
        let dl = Discriminator::logits_tape(&mut t, &dw, z)?;
        let n = t.value(dl).rows();
        let gen = if hyper.saturating_generator {
            let fake = t.bce_with_logits(dl, Arc::new(DenseMatrix::zeros(n, 1)), 1.0)?;
            t.scalar_mul(fake, -1.0)?
        } else {
            t.bce_with_logits(dl, Arc::new(DenseMatrix::filled(n, 1, 1.0)), 1.0)?
        };
        loss = t.add(recon, gen)?;
    }
    t.backward(loss)?;
    let grads: Vec<Option<&DenseMatrix>> = w.iter().map(|&v| t.grad(v)).collect();
    adam.step(&mut enc.weights, &grads)?;
    Ok((t.scalar(recon), t.faults()))
}

fn autoencoder_train(ds: &Dataset, hyper: &DeepHyper, adversarial: bool) -> Result<TrainedModel> {
    hyper.validate()?;
    let inputs = Inputs {
        x: Arc::new(prepared_features(ds, hyper)),
        prop: Arc::new(propagation_matrix(&ds.graph)?),
        target: Arc::new(matrix_view(&ds.graph, MatrixKind::Adjacency)?),
    };
    let n = ds.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut enc = GcnEncoder::glorot(&hyper.layer_dims(inputs.x.cols()), &mut rng);
    let mut disc = adversarial.then(|| Discriminator::new(hyper.hidden_dim, hyper.disc_hidden, hyper.lr, &mut rng));
    let mut adam = Adam::new(hyper.lr, &enc.weights);
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    let mut faults = 0;

    for epoch in 0..hyper.epochs {
        if let Some(d) = disc.as_mut() {
            let z = at_epoch(epoch, gcn_forward(&enc, &inputs.x, &inputs.prop))?;
            for _ in 0..hyper.disc_iters {
                let prior = DenseMatrix::from_fn(n, hyper.hidden_dim, |_, _| rng.sample(StandardNormal));
                at_epoch(epoch, d.step(&prior, &z))?;
            }
        }
        let (loss, f) = at_epoch(epoch, encoder_step(&mut enc, &mut adam, &inputs, hyper, disc.as_ref()))?;
        loss_trace.push(loss);
        faults += f;
    }

    let embedding = gcn_forward(&enc, &inputs.x, &inputs.prop)?;
    Ok(TrainedModel {
        model: hyper.model,
        encoders: vec![enc],
        embedding,
        loss_trace,
        faults,
        mvgrl_heads: None,
    })
}

pub fn gae_train(ds: &Dataset, hyper: &DeepHyper) -> Result<TrainedModel> {
    if hyper.model != DeepModel::Gae {
        return invalid(format!("gae_train called with {} hyperparameters", hyper.model));
    }
    autoencoder_train(ds, hyper, false)
}

pub fn arga_train(ds: &Dataset, hyper: &DeepHyper) -> Result<TrainedModel> {
    if hyper.model != DeepModel::Arga {
        return invalid(format!("arga_train called with {} hyperparameters", hyper.model));
    }
    autoencoder_train(ds, hyper, true)
}
