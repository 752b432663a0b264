use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gcn::ppr_diffusion_self_loops;
use super::{at_epoch, gcn_forward, ppr_diffusion, prepared_features, propagation_matrix, DeepHyper, DeepModel, GcnEncoder, TrainedModel};
use crate::autodiff::{glorot_uniform, Adam, Tape, Var};
use crate::error::{invalid, Result};
use crate::ingest::Dataset;
use crate::numerics::DenseMatrix;

/// Parameters shared by both views.
#[derive(Clone, Debug, PartialEq)]
pub struct MvgrlHeads {
    /// Linear projection applied to node embeddings of either view.
    pub projection: DenseMatrix,
    /// Readout `(L·d) → d` over concatenated per-layer means.
    pub pool: DenseMatrix,
    pub bilinear: DenseMatrix,
    pub bias: DenseMatrix,
}

impl MvgrlHeads {
    fn weights(&self) -> [&DenseMatrix; 4] {
        [&self.projection, &self.pool, &self.bilinear, &self.bias]
    }
}

struct View {
    prop: Arc<DenseMatrix>,
}

/// Graph summary `σ([mean(H₁) ‖ … ‖ mean(H_L)] W)`.
fn readout(t: &mut Tape, layers: &[Var], pool: Var) -> Result<Var> {
    let mut cat = t.mean_rows(layers[0])?;
    for &h in &layers[1..] {
        let m = t.mean_rows(h)?;
        cat = t.concat_cols(cat, m)?;
    }
    let s = t.matmul(cat, pool)?;
    t.sigmoid(s)
}

fn score(t: &mut Tape, h: Var, proj: Var, w: Var, b: Var, summary: Var) -> Result<Var> {
    let hp = t.matmul(h, proj)?;
    let s = t.bilinear(hp, w, summary)?;
    t.add_row_broadcast(s, b)
}

/// Forward pass and contrastive loss: real nodes of one view against the
/// other view's summary are positives, shuffled-feature nodes negatives.
fn mvgrl_loss(
    t: &mut Tape,
    enc_vars: [&[Var]; 2],
    head_vars: &[Var],
    x: Var,
    xc: Var,
    props: [Var; 2],
) -> Result<Var> {
    let real_a = GcnEncoder::forward_tape(t, enc_vars[0], x, props[0])?;
    let real_b = GcnEncoder::forward_tape(t, enc_vars[1], x, props[1])?;
    let fake_a = GcnEncoder::forward_tape(t, enc_vars[0], xc, props[0])?;
    let fake_b = GcnEncoder::forward_tape(t, enc_vars[1], xc, props[1])?;
    let [proj, pool, w, b] = [head_vars[0], head_vars[1], head_vars[2], head_vars[3]];
    let sum_a = readout(t, &real_a, pool)?;
    let sum_b = readout(t, &real_b, pool)?;
    let last = |v: &Vec<Var>| *v.last().expect("at least one layer");
    let n = t.value(x).rows();
    let ones = Arc::new(DenseMatrix::filled(n, 1, 1.0));
    let zeros = Arc::new(DenseMatrix::zeros(n, 1));
    let pairs = [
        (last(&real_a), sum_b, &ones),
        (last(&real_b), sum_a, &ones),
        (last(&fake_a), sum_b, &zeros),
        (last(&fake_b), sum_a, &zeros),
    ];
    let mut total: Option<Var> = None;
    for (h, s, target) in pairs {
        let logits = score(t, h, proj, w, b, s)?;
        let l = t.bce_with_logits(logits, (*target).clone(), 1.0)?;
        total = Some(match total {
            Some(acc) => t.add(acc, l)?,
            None => l,
        });
    }
    t.scalar_mul(total.expect("four terms"), 0.25)
}

/// Plain PPR when every node has a neighbour, otherwise PPR over the
/// self-loop normalised adjacency so isolated nodes keep their own signal.
fn diffusion_view(ds: &Dataset, alpha: f64) -> Result<DenseMatrix> {
    if ds.graph.isolated_nodes().is_empty() {
        ppr_diffusion(&ds.graph, alpha)
    } else {
        ppr_diffusion_self_loops(&ds.graph, alpha)
    }
}

pub fn mvgrl_train(ds: &Dataset, hyper: &DeepHyper) -> Result<TrainedModel> {
    if hyper.model != DeepModel::Mvgrl {
        return invalid(format!("mvgrl_train called with {} hyperparameters", hyper.model));
    }
    hyper.validate()?;
    let x = Arc::new(prepared_features(ds, hyper));
    let views = [
        View {
            prop: Arc::new(propagation_matrix(&ds.graph)?),
        },
        View {
            prop: Arc::new(diffusion_view(ds, hyper.ppr_alpha)?),
        },
    ];
    let n = ds.num_nodes();
    let d = hyper.hidden_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let dims = hyper.layer_dims(x.cols());
    let mut encoders = [GcnEncoder::glorot(&dims, &mut rng), GcnEncoder::glorot(&dims, &mut rng)];
    let heads = MvgrlHeads {
        projection: glorot_uniform(d, d, &mut rng),
        pool: glorot_uniform(hyper.gcn_layers * d, d, &mut rng),
        bilinear: glorot_uniform(d, d, &mut rng),
        bias: DenseMatrix::zeros(1, 1),
    };
    let mut adams = [Adam::new(hyper.lr, &encoders[0].weights), Adam::new(hyper.lr, &encoders[1].weights)];
    let mut head_params: Vec<DenseMatrix> = heads.weights().into_iter().cloned().collect();
    let mut head_adam = Adam::new(hyper.lr, &head_params);
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    let mut faults = 0;
    let mut perm: Vec<usize> = (0..n).collect();

    for epoch in 0..hyper.epochs {
        perm.shuffle(&mut rng);
        let xc = x.select_rows(&perm);
        let step = || -> Result<(f64, usize, Vec<Vec<DenseMatrix>>)> {
            let mut t = Tape::new();
            let ea = encoders[0].bind(&mut t);
            let eb = encoders[1].bind(&mut t);
            let hv: Vec<Var> = head_params.iter().map(|m| t.param(m.clone())).collect();
            let xv = t.constant_shared(x.clone());
            let xcv = t.constant(xc.clone());
            let pa = t.constant_shared(views[0].prop.clone());
            let pb = t.constant_shared(views[1].prop.clone());
            let loss = mvgrl_loss(&mut t, [&ea, &eb], &hv, xv, xcv, [pa, pb])?;
            t.backward(loss)?;
            let grab = |vs: &[Var]| -> Vec<DenseMatrix> {
                vs.iter()
                    .map(|&v| t.grad(v).cloned().unwrap_or_else(|| DenseMatrix::zeros(t.value(v).rows(), t.value(v).cols())))
                    .collect()
            };
            Ok((t.scalar(loss), t.faults(), vec![grab(&ea), grab(&eb), grab(&hv)]))
        };
        let (loss, f, grads) = at_epoch(epoch, step())?;
        for (k, enc) in encoders.iter_mut().enumerate() {
            let g: Vec<Option<&DenseMatrix>> = grads[k].iter().map(Some).collect();
            adams[k].step(&mut enc.weights, &g)?;
        }
        let g: Vec<Option<&DenseMatrix>> = grads[2].iter().map(Some).collect();
        head_adam.step(&mut head_params, &g)?;
        loss_trace.push(loss);
        faults += f;
    }

    let [projection, pool, bilinear, bias]: [DenseMatrix; 4] = head_params.try_into().expect("four head tensors");
    let heads = MvgrlHeads {
        projection,
        pool,
        bilinear,
        bias,
    };
    let za = gcn_forward(&encoders[0], &x, &views[0].prop)?;
    let zb = gcn_forward(&encoders[1], &x, &views[1].prop)?;
    let embedding = za.add(&zb)?;
    let [a, b] = encoders;
    Ok(TrainedModel {
        model: DeepModel::Mvgrl,
        encoders: vec![a, b],
        embedding,
        loss_trace,
        faults,
        mvgrl_heads: Some(heads),
    })
}
