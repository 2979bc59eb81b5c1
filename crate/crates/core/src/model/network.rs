//! Forward pass, loss and reverse-mode gradients.
//!
//! Pre-norm encoder blocks: `x += attn(ln1(x)); x += ffn(ln2(x))`, followed
//! by a final layer norm whose output rows are the token vectors `v_i`.
//! Pad positions are never computed; only the non-pad prefix of the input
//! enters the network.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::encode::EncodedInstance;
use super::params::ModelParams;
use super::vocab::PAD_ID;
use super::ModelConfig;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Final token vectors, one row per non-pad position.
    pub vectors: Array2<f64>,
    pub start_logits: Array1<f64>,
    pub end_logits: Array1<f64>,
    /// Distributions over every position of the padded input; zero at pads.
    pub start_probs: Vec<f64>,
    pub end_probs: Vec<f64>,
    pub possible_logit: Option<f64>,
    pub possible_prob: Option<f64>,
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

struct LayerCache {
    ln1: LnCache,
    n1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o: Array2<f64>,
    ln2: LnCache,
    n2: Array2<f64>,
    h: Array2<f64>,
    g: Array2<f64>,
}

struct Cache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    z: Array2<f64>,
    start_logits: Array1<f64>,
    end_logits: Array1<f64>,
    possible_logit: Option<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let mean = x.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).unwrap();
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = &centered * &rstd.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    g: &Array1<f64>,
    cache: &LnCache,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let m1 = dxhat.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
    let m2 = (&dxhat * &cache.xhat).mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
    (&dxhat - &m1 - &cache.xhat * &m2) * cache.rstd.view().insert_axis(Axis(1))
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

fn log_softmax_at(logits: &Array1<f64>, i: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    logits[i] - lse
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Number of positions before the first `[PAD]`.
fn non_pad_len(token_ids: &[u32]) -> usize {
    token_ids.iter().position(|&t| t == PAD_ID).unwrap_or(token_ids.len())
}

fn run(params: &ModelParams, token_ids: &[u32], config: &ModelConfig) -> Result<Cache> {
    let t = non_pad_len(token_ids);
    if t == 0 {
        return Err(Error::InvalidConfig("input has no non-pad positions".into()));
    }
    if t > params.pos_emb.nrows() {
        return Err(Error::InvalidConfig(format!("input of {t} positions exceeds max_seq {}", params.pos_emb.nrows())));
    }
    let vocab = params.tok_emb.nrows();
    let ids: Vec<usize> = token_ids[..t]
        .iter()
        .map(|&id| if (id as usize) < vocab { Ok(id as usize) } else { Err(Error::InvalidConfig(format!("token id {id} outside vocabulary of {vocab}"))) })
        .collect::<Result<_>>()?;

    let d = config.hidden_dim;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = params.pos_emb.slice(s![..t, ..]).to_owned();
    for (row, &id) in ids.iter().enumerate() {
        let mut r = x.row_mut(row);
        r += &params.tok_emb.row(id);
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (n1, ln1) = layer_norm(&x, &lp.ln1_g, &lp.ln1_b);
        let q = n1.dot(&lp.wq) + &lp.bq;
        let k = n1.dot(&lp.wk) + &lp.bk;
        let v = n1.dot(&lp.wv) + &lp.bv;
        let mut o = Array2::zeros((t, d));
        let mut probs = Vec::with_capacity(config.heads);
        for h in 0..config.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            o.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        x = x + o.dot(&lp.wo) + &lp.bo;
        let (n2, ln2) = layer_norm(&x, &lp.ln2_g, &lp.ln2_b);
        let h = n2.dot(&lp.w1) + &lp.b1;
        let g = h.mapv(gelu);
        x = x + g.dot(&lp.w2) + &lp.b2;
        layers.push(LayerCache { ln1, n1, q, k, v, probs, o, ln2, n2, h, g });
    }
    let (z, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);
    let start_logits = z.dot(&params.w_start) + params.b_start[0];
    let end_logits = z.dot(&params.w_end) + params.b_end[0];
    let possible_logit = params.answerability.as_ref().map(|h| z.row(0).dot(&h.w_cls) + h.b_cls[0]);

    let finite = start_logits.iter().chain(end_logits.iter()).chain(possible_logit.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("forward activations".into()));
    }
    Ok(Cache { ids, layers, lnf, z, start_logits, end_logits, possible_logit })
}

pub fn forward(params: &ModelParams, encoded: &EncodedInstance, config: &ModelConfig) -> Result<ForwardOutput> {
    let cache = run(params, &encoded.token_ids, config)?;
    let padded = |p: Array1<f64>| {
        let mut v = p.to_vec();
        v.resize(encoded.token_ids.len().max(v.len()), 0.0);
        v
    };
    Ok(ForwardOutput {
        start_probs: padded(softmax(&cache.start_logits)),
        end_probs: padded(softmax(&cache.end_logits)),
        possible_prob: cache.possible_logit.map(sigmoid),
        possible_logit: cache.possible_logit,
        start_logits: cache.start_logits,
        end_logits: cache.end_logits,
        vectors: cache.z,
    })
}

fn check_targets(encoded: &EncodedInstance, len: usize) -> Result<()> {
    for t in [encoded.start_target, encoded.end_target] {
        if t >= len {
            return Err(Error::TargetAtPad(t));
        }
    }
    Ok(())
}

/// Mean of start and end cross entropy, plus the answerability binary cross
/// entropy when the head is enabled.
pub fn compute_loss(output: &ForwardOutput, encoded: &EncodedInstance, config: &ModelConfig) -> Result<f64> {
    check_targets(encoded, output.start_logits.len())?;
    let span = -0.5
        * (log_softmax_at(&output.start_logits, encoded.start_target)
            + log_softmax_at(&output.end_logits, encoded.end_target));
    let cls = match (config.answerability, output.possible_logit) {
        (true, Some(x)) => answerability_loss(x, encoded.possible_target),
        _ => 0.0,
    };
    Ok(span + cls)
}

fn answerability_loss(logit: f64, possible: bool) -> f64 {
    if possible {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// Adds `scale` times the gradient of one instance's loss into `grads` and
/// returns the unscaled loss.
fn accumulate(
    params: &ModelParams,
    encoded: &EncodedInstance,
    config: &ModelConfig,
    grads: &mut ModelParams,
    scale: f64,
) -> Result<f64> {
    let c = run(params, &encoded.token_ids, config)?;
    let t = c.ids.len();
    check_targets(encoded, t)?;

    let mut loss = -0.5
        * (log_softmax_at(&c.start_logits, encoded.start_target) + log_softmax_at(&c.end_logits, encoded.end_target));

    let mut ds = softmax(&c.start_logits);
    ds[encoded.start_target] -= 1.0;
    ds *= 0.5 * scale;
    let mut de = softmax(&c.end_logits);
    de[encoded.end_target] -= 1.0;
    de *= 0.5 * scale;

    grads.w_start += &c.z.t().dot(&ds);
    grads.b_start[0] += ds.sum();
    grads.w_end += &c.z.t().dot(&de);
    grads.b_end[0] += de.sum();
    let mut dz = ds.view().insert_axis(Axis(1)).dot(&params.w_start.view().insert_axis(Axis(0)))
        + de.view().insert_axis(Axis(1)).dot(&params.w_end.view().insert_axis(Axis(0)));

    if let (Some(head), Some(ghead), Some(x)) = (&params.answerability, &mut grads.answerability, c.possible_logit) {
        if config.answerability {
            loss += answerability_loss(x, encoded.possible_target);
            let y = if encoded.possible_target { 1.0 } else { 0.0 };
            let dx = (sigmoid(x) - y) * scale;
            ghead.w_cls.scaled_add(dx, &c.z.row(0));
            ghead.b_cls[0] += dx;
            dz.row_mut(0).scaled_add(dx, &head.w_cls);
        }
    }

    let mut dx = layer_norm_backward(&dz, &params.lnf_g, &c.lnf, &mut grads.lnf_g, &mut grads.lnf_b);

    let dh = config.head_dim();
    let attn_scale = 1.0 / (dh as f64).sqrt();
    for ((lp, gl), lc) in params.layers.iter().zip(grads.layers.iter_mut()).zip(&c.layers).rev() {
        // feed-forward
        gl.w2 += &lc.g.t().dot(&dx);
        gl.b2 += &dx.sum_axis(Axis(0));
        let dg = dx.dot(&lp.w2.t());
        let dhid = &dg * &lc.h.mapv(gelu_grad);
        gl.w1 += &lc.n2.t().dot(&dhid);
        gl.b1 += &dhid.sum_axis(Axis(0));
        let dn2 = dhid.dot(&lp.w1.t());
        dx += &layer_norm_backward(&dn2, &lp.ln2_g, &lc.ln2, &mut gl.ln2_g, &mut gl.ln2_b);

        // attention
        gl.wo += &lc.o.t().dot(&dx);
        gl.bo += &dx.sum_axis(Axis(0));
        let d_o = dx.dot(&lp.wo.t());
        let mut dq = Array2::zeros((t, config.hidden_dim));
        let mut dk = Array2::zeros((t, config.hidden_dim));
        let mut dv = Array2::zeros((t, config.hidden_dim));
        for (h, p) in lc.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let doh: ArrayView2<f64> = d_o.slice(cols);
            let dp = doh.dot(&lc.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&doh));
            let row_dot = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
            let dscore = (p * &(&dp - &row_dot)) * attn_scale;
            dq.slice_mut(cols).assign(&dscore.dot(&lc.k.slice(cols)));
            dk.slice_mut(cols).assign(&dscore.t().dot(&lc.q.slice(cols)));
        }
        gl.wq += &lc.n1.t().dot(&dq);
        gl.bq += &dq.sum_axis(Axis(0));
        gl.wk += &lc.n1.t().dot(&dk);
        gl.bk += &dk.sum_axis(Axis(0));
        gl.wv += &lc.n1.t().dot(&dv);
        gl.bv += &dv.sum_axis(Axis(0));
        let dn1 = dq.dot(&lp.wq.t()) + dk.dot(&lp.wk.t()) + dv.dot(&lp.wv.t());
        dx += &layer_norm_backward(&dn1, &lp.ln1_g, &lc.ln1, &mut gl.ln1_g, &mut gl.ln1_b);
    }

    for (row, &id) in c.ids.iter().enumerate() {
        let r = dx.row(row);
        let mut te = grads.tok_emb.row_mut(id);
        te += &r;
        let mut pe = grads.pos_emb.row_mut(row);
        pe += &r;
    }
    Ok(loss)
}

/// Mean loss over `batch` and its exact gradient.
///
/// Per-instance gradients may be computed on several threads; they are
/// always summed in batch order, so the result does not depend on the
/// thread count.
pub fn batch_loss_and_gradients(
    params: &ModelParams,
    batch: &[EncodedInstance],
    config: &ModelConfig,
) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<Result<(f64, ModelParams)>> = batch
        .par_iter()
        .map(|enc| {
            let mut g = params.zeros_like();
            accumulate(params, enc, config, &mut g, scale).map(|loss| (loss, g))
        })
        .collect();
    let mut total = 0.0;
    for part in parts {
        let (loss, g) = part?;
        total += loss;
        grads.add_scaled(&g, 1.0);
    }
    Ok((total * scale, grads))
}

/// Gradient of the mean batch loss with respect to every parameter.
pub fn backward(params: &ModelParams, batch: &[EncodedInstance], config: &ModelConfig) -> Result<ModelParams> {
    batch_loss_and_gradients(params, batch, config).map(|(_, g)| g)
}

/// Mean loss over `batch` from the forward pass alone.
pub fn batch_loss(params: &ModelParams, batch: &[EncodedInstance], config: &ModelConfig) -> Result<f64> {
    let mut total = 0.0;
    for enc in batch {
        total += compute_loss(&forward(params, enc, config)?, enc, config)?;
    }
    Ok(total / batch.len().max(1) as f64)
}
