use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerabilityHead {
    pub w_cls: Array1<f64>,
    /// Length-1 vector holding the bias.
    pub b_cls: Array1<f64>,
}

/// Encoder weights and heads. The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
    pub w_start: Array1<f64>,
    pub b_start: Array1<f64>,
    pub w_end: Array1<f64>,
    pub b_end: Array1<f64>,
    pub answerability: Option<AnswerabilityHead>,
}

impl ModelParams {
    /// All-zero parameters, except layer-norm gains which are one.
    pub fn new(config: &ModelConfig, vocab_size: usize) -> Self {
        let d = config.hidden_dim;
        let f = config.ffn_dim;
        let layer = || LayerParams {
            ln1_g: Array1::ones(d),
            ln1_b: Array1::zeros(d),
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln2_g: Array1::ones(d),
            ln2_b: Array1::zeros(d),
            w1: Array2::zeros((d, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, d)),
            b2: Array1::zeros(d),
        };
        ModelParams {
            tok_emb: Array2::zeros((vocab_size, d)),
            pos_emb: Array2::zeros((config.max_seq, d)),
            layers: (0..config.layers).map(|_| layer()).collect(),
            lnf_g: Array1::ones(d),
            lnf_b: Array1::zeros(d),
            w_start: Array1::zeros(d),
            b_start: Array1::zeros(1),
            w_end: Array1::zeros(d),
            b_end: Array1::zeros(1),
            answerability: config
                .answerability
                .then(|| AnswerabilityHead { w_cls: Array1::zeros(d), b_cls: Array1::zeros(1) }),
        }
    }

    /// Normal(0, init_std) weight matrices and head vectors; zero biases,
    /// unit layer-norm gains.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, vocab_size: usize, rng: &mut R) -> Self {
        let mut p = Self::new(config, vocab_size);
        let normal = Normal::new(0.0, config.init_std).expect("validated init_std");
        let mut fill = |a: &mut [f64]| a.iter_mut().for_each(|x| *x = normal.sample(rng));
        for (name, t) in p.tensors_mut() {
            let is_weight = name.starts_with("w") || name.ends_with("emb") || name.contains(".w");
            if is_weight {
                fill(t);
            }
        }
        p
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named flat views of every tensor in a fixed declaration order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("tok_emb".into(), self.tok_emb.as_slice().unwrap()),
            ("pos_emb".into(), self.pos_emb.as_slice().unwrap()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in [
                ("ln1_g", l.ln1_g.as_slice().unwrap()),
                ("ln1_b", l.ln1_b.as_slice().unwrap()),
                ("wq", l.wq.as_slice().unwrap()),
                ("bq", l.bq.as_slice().unwrap()),
                ("wk", l.wk.as_slice().unwrap()),
                ("bk", l.bk.as_slice().unwrap()),
                ("wv", l.wv.as_slice().unwrap()),
                ("bv", l.bv.as_slice().unwrap()),
                ("wo", l.wo.as_slice().unwrap()),
                ("bo", l.bo.as_slice().unwrap()),
                ("ln2_g", l.ln2_g.as_slice().unwrap()),
                ("ln2_b", l.ln2_b.as_slice().unwrap()),
                ("w1", l.w1.as_slice().unwrap()),
                ("b1", l.b1.as_slice().unwrap()),
                ("w2", l.w2.as_slice().unwrap()),
                ("b2", l.b2.as_slice().unwrap()),
            ] {
                out.push((format!("layer{i}.{n}"), t));
            }
        }
        out.push(("lnf_g".into(), self.lnf_g.as_slice().unwrap()));
        out.push(("lnf_b".into(), self.lnf_b.as_slice().unwrap()));
        out.push(("w_start".into(), self.w_start.as_slice().unwrap()));
        out.push(("b_start".into(), self.b_start.as_slice().unwrap()));
        out.push(("w_end".into(), self.w_end.as_slice().unwrap()));
        out.push(("b_end".into(), self.b_end.as_slice().unwrap()));
        if let Some(h) = &self.answerability {
            out.push(("w_cls".into(), h.w_cls.as_slice().unwrap()));
            out.push(("b_cls".into(), h.b_cls.as_slice().unwrap()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("tok_emb".into(), self.tok_emb.as_slice_mut().unwrap()),
            ("pos_emb".into(), self.pos_emb.as_slice_mut().unwrap()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (n, t) in [
                ("ln1_g", l.ln1_g.as_slice_mut().unwrap()),
                ("ln1_b", l.ln1_b.as_slice_mut().unwrap()),
                ("wq", l.wq.as_slice_mut().unwrap()),
                ("bq", l.bq.as_slice_mut().unwrap()),
                ("wk", l.wk.as_slice_mut().unwrap()),
                ("bk", l.bk.as_slice_mut().unwrap()),
                ("wv", l.wv.as_slice_mut().unwrap()),
                ("bv", l.bv.as_slice_mut().unwrap()),
                ("wo", l.wo.as_slice_mut().unwrap()),
                ("bo", l.bo.as_slice_mut().unwrap()),
                ("ln2_g", l.ln2_g.as_slice_mut().unwrap()),
                ("ln2_b", l.ln2_b.as_slice_mut().unwrap()),
                ("w1", l.w1.as_slice_mut().unwrap()),
                ("b1", l.b1.as_slice_mut().unwrap()),
                ("w2", l.w2.as_slice_mut().unwrap()),
                ("b2", l.b2.as_slice_mut().unwrap()),
            ] {
                out.push((format!("layer{i}.{n}"), t));
            }
        }
        out.push(("lnf_g".into(), self.lnf_g.as_slice_mut().unwrap()));
        out.push(("lnf_b".into(), self.lnf_b.as_slice_mut().unwrap()));
        out.push(("w_start".into(), self.w_start.as_slice_mut().unwrap()));
        out.push(("b_start".into(), self.b_start.as_slice_mut().unwrap()));
        out.push(("w_end".into(), self.w_end.as_slice_mut().unwrap()));
        out.push(("b_end".into(), self.b_end.as_slice_mut().unwrap()));
        if let Some(h) = &mut self.answerability {
            out.push(("w_cls".into(), h.w_cls.as_slice_mut().unwrap()));
            out.push(("b_cls".into(), h.b_cls.as_slice_mut().unwrap()));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }

    /// SHA-256 over names and little-endian values of every tensor.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.tensors() {
            h.update(name.as_bytes());
            for x in t {
                h.update(x.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig { hidden_dim: 8, layers: 1, heads: 2, ffn_dim: 16, max_seq: 12, answerability: true, ..Default::default() };
        let p = ModelParams::init(&cfg, 20, &mut ChaCha8Rng::seed_from_u64(0));
        let expected = 20 * 8 + 12 * 8 + (4 * (8 * 8 + 8) + 4 * 8 + 8 * 16 + 16 + 16 * 8 + 8) + 2 * 8 + 2 * (8 + 1) + 9;
        assert_eq!(p.parameter_count(), expected);
        assert!(p.all_finite());
        assert!(p.layers[0].ln1_g.iter().all(|&g| g == 1.0));
        assert!(p.layers[0].bq.iter().all(|&b| b == 0.0));
        assert!(p.layers[0].wq.iter().any(|&w| w != 0.0));
        assert!(p.answerability.as_ref().unwrap().w_cls.iter().any(|&w| w != 0.0));
        let names: Vec<_> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.last().unwrap(), "b_cls");
    }

    #[test]
    fn digest_tracks_values() {
        let cfg = ModelConfig { hidden_dim: 4, layers: 1, heads: 1, ffn_dim: 4, max_seq: 8, ..Default::default() };
        let a = ModelParams::init(&cfg, 6, &mut ChaCha8Rng::seed_from_u64(1));
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.w_end[0] += 1e-12;
        assert_ne!(a.digest(), b.digest());
    }
}
