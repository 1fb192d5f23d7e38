//! Pre-norm transformer encoder with a max-pooled logistic head, and its
//! exact reverse-mode gradient.

use rand::Rng;

use super::linalg::{
    add_bias, colsum_acc, gelu, gelu_grad, layer_norm, layer_norm_backward, matmul,
    matmul_nt_acc, matmul_tn_acc, sigmoid, NormCache,
};
use super::params::*;
use super::vocab::PAD;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower clamp applied to log arguments in the loss.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// Final hidden states, `len × d_model`, row-major.
    pub hidden: Vec<T>,
    /// Elementwise max of the hidden states over non-pad positions.
    pub pooled: Vec<T>,
    pub logit: T,
    pub prob: T,
}

/// Elementwise max over the rows of `hidden` whose `valid` flag is set.
/// Returns the pooled vector and, per column, the winning row.
pub fn max_pool<T: Scalar>(hidden: &[T], d: usize, valid: &[bool]) -> (Vec<T>, Vec<usize>) {
    let mut pooled = vec![T::neg_infinity(); d];
    let mut argmax = vec![0; d];
    for (i, row) in hidden.chunks(d).enumerate() {
        if !valid[i] {
            continue;
        }
        for j in 0..d {
            if row[j] > pooled[j] {
                pooled[j] = row[j];
                argmax[j] = i;
            }
        }
    }
    (pooled, argmax)
}

/// `(w·m + b, sigmoid(w·m + b))`.
pub fn head_probability<T: Scalar>(w: &[T], b: T, pooled: &[T]) -> (T, T) {
    let z = w.iter().zip(pooled).fold(b, |s, (&wi, &mi)| s + wi * mi);
    (z, sigmoid(z))
}

struct LayerCache<T> {
    ln1: NormCache<T>,
    a: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// Attention weights, `heads × n × n`.
    probs: Vec<T>,
    ctx: Vec<T>,
    drop_attn: Option<Vec<T>>,
    ln2: NormCache<T>,
    c: Vec<T>,
    u: Vec<T>,
    g: Vec<T>,
    drop_ffn: Option<Vec<T>>,
}

pub(crate) struct Cache<T> {
    tokens: Vec<u32>,
    valid: Vec<bool>,
    layers: Vec<LayerCache<T>>,
    final_ln: NormCache<T>,
    argmax: Vec<usize>,
    pub(crate) out: ForwardOutput<T>,
}

fn dropout_mask<T: Scalar, R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

fn check_tokens<T: Scalar>(params: &ModelParams<T>, tokens: &[u32]) -> Result<Vec<bool>> {
    let cfg = &params.config;
    if tokens.is_empty() || tokens.len() > cfg.max_len {
        return Err(Error::validation(format!(
            "input length {} outside [1, {}]",
            tokens.len(),
            cfg.max_len
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::validation(format!(
            "token id {bad} outside vocabulary of {}",
            cfg.vocab_size
        )));
    }
    let valid: Vec<bool> = tokens.iter().map(|&t| t != PAD).collect();
    if !valid.iter().any(|&v| v) {
        return Err(Error::validation("input contains only padding"));
    }
    Ok(valid)
}

pub(crate) fn forward_cached<T: Scalar, R: Rng>(
    params: &ModelParams<T>,
    tokens: &[u32],
    mut dropout_rng: Option<&mut R>,
) -> Result<Cache<T>> {
    let valid = check_tokens(params, tokens)?;
    let cfg = &params.config;
    let (n, d, f, heads, dh) = (tokens.len(), cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let scale = T::one() / T::of(dh as f64).sqrt();
    let rate = cfg.dropout;

    let mut x = vec![T::zero(); n * d];
    let (tok, pos) = (params.get(TOK), params.get(POS));
    for (i, &t) in tokens.iter().enumerate() {
        let (t, row) = (t as usize, &mut x[i * d..(i + 1) * d]);
        for j in 0..d {
            row[j] = tok[t * d + j] + pos[i * d + j];
        }
    }

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let base = ModelParams::<T>::layer_base(l);
        let p = |o: usize| params.get(base + o);

        let (a, ln1) = layer_norm(&x, p(LN1_G), p(LN1_B));
        let mut q = matmul(&a, p(WQ), n, d, d);
        add_bias(&mut q, p(BQ));
        let mut k = matmul(&a, p(WK), n, d, d);
        add_bias(&mut k, p(BK));
        let mut v = matmul(&a, p(WV), n, d, d);
        add_bias(&mut v, p(BV));

        let mut probs = vec![T::zero(); heads * n * n];
        let mut ctx = vec![T::zero(); n * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..n {
                let row = &mut probs[(h * n + i) * n..(h * n + i + 1) * n];
                let qi = &q[i * d + off..i * d + off + dh];
                let mut max = T::neg_infinity();
                for j in 0..n {
                    if !valid[j] {
                        continue;
                    }
                    let kj = &k[j * d + off..j * d + off + dh];
                    let s = qi.iter().zip(kj).fold(T::zero(), |s, (&a, &b)| s + a * b) * scale;
                    row[j] = s;
                    if s > max {
                        max = s;
                    }
                }
                let mut total = T::zero();
                for j in 0..n {
                    if valid[j] {
                        row[j] = (row[j] - max).exp();
                        total = total + row[j];
                    }
                }
                for j in 0..n {
                    if valid[j] {
                        row[j] = row[j] / total;
                        let w = row[j];
                        for c in 0..dh {
                            ctx[i * d + off + c] = ctx[i * d + off + c] + w * v[j * d + off + c];
                        }
                    }
                }
            }
        }
        let mut o = matmul(&ctx, p(WO), n, d, d);
        add_bias(&mut o, p(BO));
        let drop_attn = match (&mut dropout_rng, rate > 0.0) {
            (Some(rng), true) => {
                let m = dropout_mask::<T, R>(n * d, rate, rng);
                o.iter_mut().zip(&m).for_each(|(v, &k)| *v = *v * k);
                Some(m)
            }
            _ => None,
        };
        for (xv, ov) in x.iter_mut().zip(&o) {
            *xv = *xv + *ov;
        }

        let (c, ln2) = layer_norm(&x, p(LN2_G), p(LN2_B));
        let mut u = matmul(&c, p(W1), n, d, f);
        add_bias(&mut u, p(B1));
        let g: Vec<T> = u.iter().map(|&v| gelu(v)).collect();
        let mut out = matmul(&g, p(W2), n, f, d);
        add_bias(&mut out, p(B2));
        let drop_ffn = match (&mut dropout_rng, rate > 0.0) {
            (Some(rng), true) => {
                let m = dropout_mask::<T, R>(n * d, rate, rng);
                out.iter_mut().zip(&m).for_each(|(v, &k)| *v = *v * k);
                Some(m)
            }
            _ => None,
        };
        for (xv, ov) in x.iter_mut().zip(&out) {
            *xv = *xv + *ov;
        }

        layers.push(LayerCache { ln1, a, q, k, v, probs, ctx, drop_attn, ln2, c, u, g, drop_ffn });
    }

    let fb = params.final_base();
    let (hidden, final_ln) = layer_norm(&x, params.get(fb), params.get(fb + 1));
    let (pooled, argmax) = max_pool(&hidden, d, &valid);
    let (logit, prob) = head_probability(params.get(fb + 2), params.get(fb + 3)[0], &pooled);
    Ok(Cache {
        tokens: tokens.to_vec(),
        valid,
        layers,
        final_ln,
        argmax,
        out: ForwardOutput { hidden, pooled, logit, prob },
    })
}

/// Inference pass (no dropout).
pub fn forward<T: Scalar>(params: &ModelParams<T>, tokens: &[u32]) -> Result<ForwardOutput<T>> {
    forward_cached::<T, rand_chacha::ChaCha8Rng>(params, tokens, None).map(|c| c.out)
}

/// Accumulates `dlogit`-scaled gradients of one forward pass into `grads`.
pub(crate) fn backward<T: Scalar>(
    params: &ModelParams<T>,
    cache: &Cache<T>,
    dlogit: T,
    grads: &mut ModelParams<T>,
) {
    let cfg = &params.config;
    let (n, d, f, heads, dh) = (cache.tokens.len(), cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let scale = T::one() / T::of(dh as f64).sqrt();
    let fb = params.final_base();

    // Head and pooling.
    let w = params.get(fb + 2);
    for (gw, &m) in grads.get_mut(fb + 2).iter_mut().zip(&cache.out.pooled) {
        *gw = *gw + dlogit * m;
    }
    grads.get_mut(fb + 3)[0] = grads.get_mut(fb + 3)[0] + dlogit;
    let mut dh_final = vec![T::zero(); n * d];
    for j in 0..d {
        let i = cache.argmax[j];
        dh_final[i * d + j] = dh_final[i * d + j] + dlogit * w[j];
    }
    let mut dx = {
        let (g_gain, g_rest) = grads.tensors.split_at_mut(fb + 1);
        layer_norm_backward(
            &dh_final,
            &cache.final_ln,
            params.get(fb),
            &mut g_gain[fb].data,
            &mut g_rest[0].data,
        )
    };

    for l in (0..cfg.n_layers).rev() {
        let lc = &cache.layers[l];
        let base = ModelParams::<T>::layer_base(l);
        let p = |o: usize| params.get(base + o);

        // Feed-forward branch.
        let mut dout = dx.clone();
        if let Some(m) = &lc.drop_ffn {
            dout.iter_mut().zip(m).for_each(|(v, &k)| *v = *v * k);
        }
        matmul_tn_acc(&lc.g, &dout, n, f, d, grads.get_mut(base + W2));
        colsum_acc(&dout, grads.get_mut(base + B2));
        let mut du = vec![T::zero(); n * f];
        matmul_nt_acc(&dout, p(W2), n, d, f, &mut du);
        for (g, &u) in du.iter_mut().zip(&lc.u) {
            *g = *g * gelu_grad(u);
        }
        matmul_tn_acc(&lc.c, &du, n, d, f, grads.get_mut(base + W1));
        colsum_acc(&du, grads.get_mut(base + B1));
        let mut dc = vec![T::zero(); n * d];
        matmul_nt_acc(&du, p(W1), n, f, d, &mut dc);
        let dx_ln2 = {
            let (lo, hi) = grads.tensors.split_at_mut(base + LN2_B);
            layer_norm_backward(&dc, &lc.ln2, p(LN2_G), &mut lo[base + LN2_G].data, &mut hi[0].data)
        };
        for (a, b) in dx.iter_mut().zip(&dx_ln2) {
            *a = *a + *b;
        }

        // Attention branch.
        let mut dout = dx.clone();
        if let Some(m) = &lc.drop_attn {
            dout.iter_mut().zip(m).for_each(|(v, &k)| *v = *v * k);
        }
        matmul_tn_acc(&lc.ctx, &dout, n, d, d, grads.get_mut(base + WO));
        colsum_acc(&dout, grads.get_mut(base + BO));
        let mut dctx = vec![T::zero(); n * d];
        matmul_nt_acc(&dout, p(WO), n, d, d, &mut dctx);

        let mut dq = vec![T::zero(); n * d];
        let mut dk = vec![T::zero(); n * d];
        let mut dv = vec![T::zero(); n * d];
        let mut dp = vec![T::zero(); n];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..n {
                let prow = &lc.probs[(h * n + i) * n..(h * n + i + 1) * n];
                let dci = &dctx[i * d + off..i * d + off + dh];
                let mut dot = T::zero();
                for j in 0..n {
                    if !cache.valid[j] {
                        dp[j] = T::zero();
                        continue;
                    }
                    let vj = &lc.v[j * d + off..j * d + off + dh];
                    dp[j] = dci.iter().zip(vj).fold(T::zero(), |s, (&a, &b)| s + a * b);
                    dot = dot + prow[j] * dp[j];
                    for c in 0..dh {
                        dv[j * d + off + c] = dv[j * d + off + c] + prow[j] * dci[c];
                    }
                }
                for j in 0..n {
                    if !cache.valid[j] {
                        continue;
                    }
                    let ds = prow[j] * (dp[j] - dot) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    for c in 0..dh {
                        dq[i * d + off + c] = dq[i * d + off + c] + ds * lc.k[j * d + off + c];
                        dk[j * d + off + c] = dk[j * d + off + c] + ds * lc.q[i * d + off + c];
                    }
                }
            }
        }
        let mut da = vec![T::zero(); n * d];
        for (dmat, wi, bi) in [(&dq, WQ, BQ), (&dk, WK, BK), (&dv, WV, BV)] {
            matmul_tn_acc(&lc.a, dmat, n, d, d, grads.get_mut(base + wi));
            colsum_acc(dmat, grads.get_mut(base + bi));
            matmul_nt_acc(dmat, p(wi), n, d, d, &mut da);
        }
        let dx_ln1 = {
            let (lo, hi) = grads.tensors.split_at_mut(base + LN1_B);
            layer_norm_backward(&da, &lc.ln1, p(LN1_G), &mut lo[base + LN1_G].data, &mut hi[0].data)
        };
        for (a, b) in dx.iter_mut().zip(&dx_ln1) {
            *a = *a + *b;
        }
    }

    for (i, &t) in cache.tokens.iter().enumerate() {
        let row = &dx[i * d..(i + 1) * d];
        let t = t as usize;
        let tok = grads.get_mut(TOK);
        for j in 0..d {
            tok[t * d + j] = tok[t * d + j] + row[j];
        }
        let pos = grads.get_mut(POS);
        for j in 0..d {
            pos[i * d + j] = pos[i * d + j] + row[j];
        }
    }
}

/// Clamped binary cross-entropy of one prediction and its logit gradient.
pub fn bce<T: Scalar>(prob: T, label: bool) -> (T, T) {
    let clamp = T::of(LOG_CLAMP);
    let one = T::one();
    if label {
        let loss = -prob.max(clamp).ln();
        let grad = if prob > clamp { prob - one } else { T::zero() };
        (loss, grad)
    } else {
        let loss = -(one - prob).max(clamp).ln();
        let grad = if one - prob > clamp { prob } else { T::zero() };
        (loss, grad)
    }
}

/// Forward, loss and backward for one example, with gradients scaled by
/// `weight` and added into `grads`. Returns the unweighted loss.
pub(crate) fn accumulate_example<T: Scalar, R: Rng>(
    params: &ModelParams<T>,
    tokens: &[u32],
    label: bool,
    weight: T,
    grads: &mut ModelParams<T>,
    rng: Option<&mut R>,
) -> Result<T> {
    let cache = forward_cached(params, tokens, rng)?;
    let (loss, dlogit) = bce(cache.out.prob, label);
    backward(params, &cache, dlogit * weight, grads);
    Ok(loss)
}

/// Mean clamped BCE over `batch` and its exact gradient.
pub fn loss_and_grad<T: Scalar>(
    params: &ModelParams<T>,
    batch: &[(Vec<u32>, bool)],
) -> Result<(T, ModelParams<T>)> {
    if batch.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    let mut grads = params.zeros_like();
    let weight = T::one() / T::of(batch.len() as f64);
    let mut total = T::zero();
    for (index, (tokens, label)) in batch.iter().enumerate() {
        let loss = accumulate_example::<T, rand_chacha::ChaCha8Rng>(
            params, tokens, *label, weight, &mut grads, None,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index });
        }
        total = total + loss;
    }
    Ok((total * weight, grads))
}

/// Mean clamped BCE over `batch` without gradients.
pub fn batch_loss<T: Scalar>(params: &ModelParams<T>, batch: &[(Vec<u32>, bool)]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    let mut total = T::zero();
    for (tokens, label) in batch {
        total = total + bce(forward(params, tokens)?.prob, *label).0;
    }
    Ok(total / T::of(batch.len() as f64))
}
