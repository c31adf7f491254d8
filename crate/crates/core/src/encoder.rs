//! Knowledge-status encoder: per-feature present/absent embeddings, an
//! induced-set-attention stack, sum pooling, an output perceptron, and L2
//! normalization onto the conditioning sphere.
//!
//! The tape path processes `R` masks at once by stacking their token
//! matrices into an (R·M)×d block; all projections and feed-forwards then
//! run as single large matmuls, and only the attention-score products remain
//! per sample. The no-grad path reuses the same kernels in the same order,
//! so its outputs are bit-identical to the recorded forward.

use rand::Rng;
use thiserror::Error;

use crate::autodiff::kernels;
use crate::autodiff::{Tape, TensorId};
use crate::data::KnowledgeStatus;
use crate::params::{self, Binding, ParamId, ParamStore};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("degenerate encoding: ||z|| = {norm:.3e} is below 1e-12 (encoder collapse)")]
    Degenerate { norm: f64 },
}

pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EncoderConfig {
    pub num_features: usize,
    pub token_dim: usize,
    pub cond_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub num_inducing: usize,
}

impl EncoderConfig {
    pub fn new(num_features: usize) -> Self {
        Self {
            num_features,
            token_dim: 32,
            cond_dim: 64,
            num_blocks: 2,
            num_heads: 4,
            num_inducing: 16,
        }
    }

    pub fn validate(&self) {
        assert!(self.num_inducing >= 1, "need at least one inducing point");
        assert!(
            self.token_dim % self.num_heads == 0,
            "token dim {} not divisible by {} heads",
            self.token_dim,
            self.num_heads
        );
    }
}

/// One attention block: multihead attention with residual + layer norm,
/// then a relu feed-forward with residual + layer norm.
#[derive(Debug, Clone)]
pub struct MabParams {
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub ff_w1: ParamId,
    pub ff_b1: ParamId,
    pub ff_w2: ParamId,
    pub ff_b2: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
}

impl MabParams {
    fn init<R: Rng>(prefix: &str, d: usize, store: &mut ParamStore, rng: &mut R) -> Self {
        let mut mat = |name: &str| -> ParamId {
            store.add(format!("{prefix}.{name}"), d, d, params::xavier(d, d, rng))
        };
        let wq = mat("wq");
        let wk = mat("wk");
        let wv = mat("wv");
        let wo = mat("wo");
        let ff_w1 = mat("ff_w1");
        let ff_w2 = mat("ff_w2");
        let mut vecp = |name: &str, fill: Vec<f64>| store.add(format!("{prefix}.{name}"), 1, d, fill);
        let bq = vecp("bq", params::zeros(d));
        let bk = vecp("bk", params::zeros(d));
        let bv = vecp("bv", params::zeros(d));
        let bo = vecp("bo", params::zeros(d));
        let ff_b1 = vecp("ff_b1", params::zeros(d));
        let ff_b2 = vecp("ff_b2", params::zeros(d));
        let ln1_gain = vecp("ln1_gain", params::ones(d));
        let ln1_bias = vecp("ln1_bias", params::zeros(d));
        let ln2_gain = vecp("ln2_gain", params::ones(d));
        let ln2_bias = vecp("ln2_bias", params::zeros(d));
        Self {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln1_gain,
            ln1_bias,
            ff_w1,
            ff_b1,
            ff_w2,
            ff_b2,
            ln2_gain,
            ln2_bias,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IsabBlockParams {
    pub inducing: ParamId,
    pub mab1: MabParams,
    pub mab2: MabParams,
}

/// Encoder parameters: embedding tables, attention blocks, output transform.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub emb_present: ParamId,
    pub emb_absent: ParamId,
    pub blocks: Vec<IsabBlockParams>,
    pub rho_w1: ParamId,
    pub rho_b1: ParamId,
    pub rho_w2: ParamId,
    pub rho_b2: ParamId,
}

impl EncoderParams {
    /// Present and absent embeddings are drawn from the same N(0,1)
    /// initializer so their per-coordinate variances match.
    pub fn init<R: Rng>(cfg: &EncoderConfig, store: &mut ParamStore, rng: &mut R) -> Self {
        cfg.validate();
        let (m, d) = (cfg.num_features, cfg.token_dim);
        let emb_present = store.add("enc.emb_present", m, d, params::normal(m * d, 1.0, rng));
        let emb_absent = store.add("enc.emb_absent", m, d, params::normal(m * d, 1.0, rng));
        let blocks = (0..cfg.num_blocks)
            .map(|b| IsabBlockParams {
                inducing: store.add(
                    format!("enc.b{b}.inducing"),
                    cfg.num_inducing,
                    d,
                    params::xavier(cfg.num_inducing, d, rng),
                ),
                mab1: MabParams::init(&format!("enc.b{b}.mab1"), d, store, rng),
                mab2: MabParams::init(&format!("enc.b{b}.mab2"), d, store, rng),
            })
            .collect();
        let rho_w1 = store.add("enc.rho_w1", d, d, params::xavier(d, d, rng));
        let rho_b1 = store.add("enc.rho_b1", 1, d, params::zeros(d));
        let rho_w2 = store.add("enc.rho_w2", d, cfg.cond_dim, params::xavier(d, cfg.cond_dim, rng));
        let rho_b2 = store.add("enc.rho_b2", 1, cfg.cond_dim, params::zeros(cfg.cond_dim));
        Self {
            emb_present,
            emb_absent,
            blocks,
            rho_w1,
            rho_b1,
            rho_w2,
            rho_b2,
        }
    }
}

fn affine(tape: &mut Tape, x: TensorId, w: TensorId, b: TensorId) -> TensorId {
    let xw = tape.matmul(x, w);
    tape.add(xw, b)
}

/// Multihead attention block over R stacked samples: queries are (R·n)×d,
/// keys/values (R·k)×d. Projections and feed-forward run stacked; only the
/// score products are per sample and head.
#[allow(clippy::too_many_arguments)]
fn mab_stacked(
    tape: &mut Tape,
    bound: &Binding,
    p: &MabParams,
    cfg: &EncoderConfig,
    x: TensorId,
    y: TensorId,
    r_count: usize,
    n: usize,
    k: usize,
) -> TensorId {
    let d = cfg.token_dim;
    let dh = d / cfg.num_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = affine(tape, x, bound.get(p.wq), bound.get(p.bq));
    let key = affine(tape, y, bound.get(p.wk), bound.get(p.bk));
    let val = affine(tape, y, bound.get(p.wv), bound.get(p.bv));
    let mut outs = Vec::with_capacity(r_count);
    for r in 0..r_count {
        let qr = tape.slice_rows(q, r * n, (r + 1) * n);
        let kr = tape.slice_rows(key, r * k, (r + 1) * k);
        let vr = tape.slice_rows(val, r * k, (r + 1) * k);
        let mut heads = Vec::with_capacity(cfg.num_heads);
        for h in 0..cfg.num_heads {
            let qh = tape.slice_cols(qr, h * dh, (h + 1) * dh);
            let kh = tape.slice_cols(kr, h * dh, (h + 1) * dh);
            let vh = tape.slice_cols(vr, h * dh, (h + 1) * dh);
            let kt = tape.transpose(kh);
            let raw = tape.matmul(qh, kt);
            let scaled = tape.scale(raw, scale);
            let att = tape.softmax(scaled);
            heads.push(tape.matmul(att, vh));
        }
        let mut cat = heads[0];
        for &h in &heads[1..] {
            cat = tape.concat_cols(cat, h);
        }
        outs.push(cat);
    }
    let o = tape.concat_rows(&outs);
    let mh = affine(tape, o, bound.get(p.wo), bound.get(p.bo));
    let res1 = tape.add(x, mh);
    let h1 = tape.layer_norm(res1, bound.get(p.ln1_gain), bound.get(p.ln1_bias));
    let ff_pre = affine(tape, h1, bound.get(p.ff_w1), bound.get(p.ff_b1));
    let ff_act = tape.relu(ff_pre);
    let ff = affine(tape, ff_act, bound.get(p.ff_w2), bound.get(p.ff_b2));
    let res2 = tape.add(h1, ff);
    tape.layer_norm(res2, bound.get(p.ln2_gain), bound.get(p.ln2_bias))
}

/// Induced-set-attention stack over R stacked token matrices.
pub fn isab_forward_stacked(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    tokens: TensorId,
    r_count: usize,
) -> TensorId {
    let m = cfg.num_features;
    let mi = cfg.num_inducing;
    let mut t = tokens;
    for block in &enc.blocks {
        let ind = bound.get(block.inducing);
        let ind_tiled = if r_count == 1 {
            ind
        } else {
            tape.concat_rows(&vec![ind; r_count])
        };
        let h = mab_stacked(tape, bound, &block.mab1, cfg, ind_tiled, t, r_count, mi, m);
        t = mab_stacked(tape, bound, &block.mab2, cfg, t, h, r_count, m, mi);
    }
    t
}

/// Single-mask attention stack (the R = 1 case).
pub fn isab_forward(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    tokens: TensorId,
) -> TensorId {
    isab_forward_stacked(tape, bound, enc, cfg, tokens, 1)
}

/// Token matrix whose i-th row selects the present embedding when feature i
/// is observed and the absent embedding otherwise. `mask_col` is (R·M)×1 and
/// may itself carry gradients (acquisition training differentiates it).
pub fn build_token_matrix_stacked(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    mask_col: TensorId,
    r_count: usize,
) -> TensorId {
    let (rows, cols) = tape.shape(mask_col);
    assert_eq!(
        (rows, cols),
        (r_count * cfg.num_features, 1),
        "token matrix: mask column is {rows}x{cols}, expected {}x1",
        r_count * cfg.num_features
    );
    let e1 = bound.get(enc.emb_present);
    let e0 = bound.get(enc.emb_absent);
    let (e1t, e0t) = if r_count == 1 {
        (e1, e0)
    } else {
        (
            tape.concat_rows(&vec![e1; r_count]),
            tape.concat_rows(&vec![e0; r_count]),
        )
    };
    let neg = tape.scale(mask_col, -1.0);
    let inv_mask = tape.add_const(neg, 1.0);
    let present = tape.mul_col(e1t, mask_col);
    let absent = tape.mul_col(e0t, inv_mask);
    tape.add(present, absent)
}

/// Single-mask token matrix from a concrete knowledge status.
pub fn build_token_matrix(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    status: &KnowledgeStatus,
) -> TensorId {
    assert_eq!(
        status.len(),
        cfg.num_features,
        "token matrix: status has {} features, encoder expects {}",
        status.len(),
        cfg.num_features
    );
    let mask_col = tape.constant(cfg.num_features, 1, status.as_f64());
    build_token_matrix_stacked(tape, bound, enc, cfg, mask_col, 1)
}

/// Raw and unit-norm conditioning vectors for R stacked masks.
pub struct BatchEncoding {
    /// R×d' pre-normalization encodings (noise already added in the
    /// stochastic variant).
    pub raw: TensorId,
    /// R×d' unit-norm rows.
    pub unit: TensorId,
}

/// Encodes R masks given as an (R·M)×1 column tensor. `noise` rows, when
/// present, are added to the raw encoding before normalization.
pub fn encode_stacked(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    mask_col: TensorId,
    r_count: usize,
    noise: Option<&[f64]>,
) -> Result<BatchEncoding, EncodeError> {
    let tokens = build_token_matrix_stacked(tape, bound, enc, cfg, mask_col, r_count);
    let encoded = isab_forward_stacked(tape, bound, enc, cfg, tokens, r_count);
    let m = cfg.num_features;
    let pooled_parts: Vec<TensorId> = (0..r_count)
        .map(|r| {
            let rows = tape.slice_rows(encoded, r * m, (r + 1) * m);
            tape.sum_axis0(rows)
        })
        .collect();
    let pooled = tape.concat_rows(&pooled_parts);
    let hidden = affine(tape, pooled, bound.get(enc.rho_w1), bound.get(enc.rho_b1));
    let hidden = tape.tanh(hidden);
    let z = affine(tape, hidden, bound.get(enc.rho_w2), bound.get(enc.rho_b2));
    let z = match noise {
        Some(eps) => {
            assert_eq!(eps.len(), r_count * cfg.cond_dim, "noise shape mismatch");
            let eps = tape.constant(r_count, cfg.cond_dim, eps.to_vec());
            tape.add(z, eps)
        }
        None => z,
    };
    let sq = tape.square(z);
    let row_sumsq = tape.sum_axis1(sq);
    let norms = tape.sqrt(row_sumsq);
    for &n in tape.value(norms) {
        if n < DEGENERATE_NORM {
            return Err(EncodeError::Degenerate { norm: n });
        }
    }
    let ones = tape.constant(r_count, 1, vec![1.0; r_count]);
    let inv = tape.div(ones, norms);
    let unit = tape.mul_col(z, inv);
    Ok(BatchEncoding { raw: z, unit })
}

/// Deterministic single-mask encoding.
pub fn encode(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    status: &KnowledgeStatus,
) -> Result<BatchEncoding, EncodeError> {
    let mask_col = tape.constant(cfg.num_features, 1, status.as_f64());
    encode_stacked(tape, bound, enc, cfg, mask_col, 1, None)
}

/// Training-time stochastic encoding: z* = z + eps, eps ~ N(0, sigma² I),
/// renormalized. sigma = 0 reduces exactly to [`encode`].
pub fn encode_stochastic<R: Rng>(
    tape: &mut Tape,
    bound: &Binding,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    status: &KnowledgeStatus,
    sigma: f64,
    rng: &mut R,
) -> Result<BatchEncoding, EncodeError> {
    assert!(sigma >= 0.0, "noise sigma must be non-negative");
    let mask_col = tape.constant(cfg.num_features, 1, status.as_f64());
    if sigma == 0.0 {
        return encode_stacked(tape, bound, enc, cfg, mask_col, 1, None);
    }
    let eps = params::normal(cfg.cond_dim, sigma, rng);
    encode_stacked(tape, bound, enc, cfg, mask_col, 1, Some(&eps))
}

// ── No-grad forward (bit-identical to the tape path) ─────────────────

/// Plain-value encoder forward; returns the unit-norm conditioning row.
pub fn encode_values(
    store: &ParamStore,
    enc: &EncoderParams,
    cfg: &EncoderConfig,
    status: &KnowledgeStatus,
) -> Result<Vec<f64>, EncodeError> {
    let m = cfg.num_features;
    let d = cfg.token_dim;
    assert_eq!(status.len(), m);
    let e1 = store.value(enc.emb_present);
    let e0 = store.value(enc.emb_absent);
    let mask = status.as_f64();
    let mut tokens = vec![0.0; m * d];
    for i in 0..m {
        let w1 = mask[i];
        let w0 = 1.0 - w1;
        for j in 0..d {
            tokens[i * d + j] = e1[i * d + j] * w1 + e0[i * d + j] * w0;
        }
    }
    for block in &enc.blocks {
        let ind = store.value(block.inducing).to_vec();
        let h = mab_values(store, &block.mab1, cfg, &ind, &tokens, cfg.num_inducing, m);
        tokens = mab_values(store, &block.mab2, cfg, &tokens, &h, m, cfg.num_inducing);
    }
    // sum-pool over tokens
    let mut pooled = vec![0.0; d];
    for i in 0..m {
        for j in 0..d {
            pooled[j] += tokens[i * d + j];
        }
    }
    let hidden = affine_values(store, &pooled, 1, enc.rho_w1, enc.rho_b1);
    let hidden: Vec<f64> = hidden.iter().map(|v| v.tanh()).collect();
    let z = affine_values(store, &hidden, 1, enc.rho_w2, enc.rho_b2);
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < DEGENERATE_NORM {
        return Err(EncodeError::Degenerate { norm });
    }
    let inv = 1.0 / norm;
    Ok(z.iter().map(|v| v * inv).collect())
}

pub(crate) fn affine_values(store: &ParamStore, x: &[f64], rows: usize, w: ParamId, b: ParamId) -> Vec<f64> {
    let wp = store.param(w);
    let bv = store.value(b);
    let mut out = kernels::matmul_nn(x, &wp.value, rows, wp.rows, wp.cols);
    for r in 0..rows {
        for c in 0..wp.cols {
            out[r * wp.cols + c] += bv[c];
        }
    }
    out
}

fn mab_values(
    store: &ParamStore,
    p: &MabParams,
    cfg: &EncoderConfig,
    x: &[f64],
    y: &[f64],
    n: usize,
    k: usize,
) -> Vec<f64> {
    let d = cfg.token_dim;
    let dh = d / cfg.num_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = affine_values(store, x, n, p.wq, p.bq);
    let key = affine_values(store, y, k, p.wk, p.bk);
    let val = affine_values(store, y, k, p.wv, p.bv);
    let mut o = vec![0.0; n * d];
    let mut scores = vec![0.0; n * k];
    let mut att = vec![0.0; n * k];
    for h in 0..cfg.num_heads {
        let c0 = h * dh;
        scores.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for j in 0..k {
                let mut acc = 0.0;
                for c in 0..dh {
                    acc = kernels::fmadd(q[i * d + c0 + c], key[j * d + c0 + c], acc);
                }
                scores[i * k + j] = acc * scale;
            }
        }
        kernels::softmax_rows(&scores, n, k, &mut att).expect("attention softmax");
        for i in 0..n {
            for j in 0..k {
                let a = att[i * k + j];
                for c in 0..dh {
                    o[i * d + c0 + c] = kernels::fmadd(a, val[j * d + c0 + c], o[i * d + c0 + c]);
                }
            }
        }
    }
    let mh = affine_values(store, &o, n, p.wo, p.bo);
    let res1: Vec<f64> = x.iter().zip(mh.iter()).map(|(a, b)| a + b).collect();
    let mut h1 = vec![0.0; n * d];
    kernels::layer_norm_rows(
        &res1,
        store.value(p.ln1_gain),
        store.value(p.ln1_bias),
        n,
        d,
        &mut h1,
    );
    let ff = affine_values(store, &h1, n, p.ff_w1, p.ff_b1);
    let ff: Vec<f64> = ff.iter().map(|v| v.max(0.0)).collect();
    let ff = affine_values(store, &ff, n, p.ff_w2, p.ff_b2);
    let res2: Vec<f64> = h1.iter().zip(ff.iter()).map(|(a, b)| a + b).collect();
    let mut out = vec![0.0; n * d];
    kernels::layer_norm_rows(
        &res2,
        store.value(p.ln2_gain),
        store.value(p.ln2_bias),
        n,
        d,
        &mut out,
    );
    out
}
