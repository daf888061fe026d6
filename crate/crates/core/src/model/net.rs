//! Forward and backward passes, written out by hand in f64.
//!
//! Everything operates on one sequence at a time in flat row-major buffers
//! (`[t * dim + j]`), which keeps the gradient path short enough to audit
//! line by line against the finite-difference checks. Layers are pre-norm:
//! `x + sublayer(layernorm(x))`, with one extra layernorm closing each
//! stack — the friendliest arrangement for plain SGD.

use super::{AttnParams, LnParams, ModelConfig, ParamSet};

const LN_EPS: f64 = 1e-5;

// ---------------------------------------------------------------- layernorm

pub(crate) struct LnCache {
    pub x: Vec<f64>,
    mean: Vec<f64>,
    rstd: Vec<f64>,
    pub out: Vec<f64>,
}

fn ln_fwd(x: Vec<f64>, t: usize, d: usize, p: &LnParams) -> LnCache {
    let mut out = vec![0.0; t * d];
    let mut mean = vec![0.0; t];
    let mut rstd = vec![0.0; t];
    for i in 0..t {
        let row = &x[i * d..(i + 1) * d];
        let mu = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        mean[i] = mu;
        rstd[i] = rs;
        for j in 0..d {
            out[i * d + j] = (row[j] - mu) * rs * p.gain[j] + p.bias[j];
        }
    }
    LnCache { x, mean, rstd, out }
}

fn ln_bwd(
    dout: &[f64],
    cache: &LnCache,
    t: usize,
    d: usize,
    p: &LnParams,
    gp: &mut LnParams,
    dx: &mut [f64],
) {
    for i in 0..t {
        let row = &cache.x[i * d..(i + 1) * d];
        let (mu, rs) = (cache.mean[i], cache.rstd[i]);
        let mut dxhat_sum = 0.0;
        let mut dxhat_xhat_sum = 0.0;
        for j in 0..d {
            let xhat = (row[j] - mu) * rs;
            let g = dout[i * d + j];
            gp.gain[j] += g * xhat;
            gp.bias[j] += g;
            let dxhat = g * p.gain[j];
            dxhat_sum += dxhat;
            dxhat_xhat_sum += dxhat * xhat;
        }
        for j in 0..d {
            let xhat = (row[j] - mu) * rs;
            let dxhat = dout[i * d + j] * p.gain[j];
            dx[i * d + j] +=
                rs * (dxhat - dxhat_sum / d as f64 - xhat * dxhat_xhat_sum / d as f64);
        }
    }
}

// ------------------------------------------------------------------- linear

/// out[t, n] = x[t, m] · w[m, n] (+ b)
fn linear(x: &[f64], t: usize, m: usize, w: &[f64], n: usize, b: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; t * n];
    for i in 0..t {
        let xr = &x[i * m..(i + 1) * m];
        let or = &mut out[i * n..(i + 1) * n];
        if let Some(b) = b {
            or.copy_from_slice(b);
        }
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[k * n..(k + 1) * n];
            for j in 0..n {
                or[j] += xv * wr[j];
            }
        }
    }
    out
}

/// dw += xᵀ·dout, db += Σ dout, dx += dout·wᵀ
fn linear_bwd(
    x: &[f64],
    dout: &[f64],
    t: usize,
    m: usize,
    n: usize,
    w: &[f64],
    dw: &mut [f64],
    mut db: Option<&mut [f64]>,
    dx: &mut [f64],
) {
    for i in 0..t {
        let xr = &x[i * m..(i + 1) * m];
        let dr = &dout[i * n..(i + 1) * n];
        if let Some(db) = db.as_deref_mut() {
            for j in 0..n {
                db[j] += dr[j];
            }
        }
        for k in 0..m {
            let xv = xr[k];
            let wr = &w[k * n..(k + 1) * n];
            let dwr = &mut dw[k * n..(k + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                dwr[j] += xv * dr[j];
                acc += wr[j] * dr[j];
            }
            dx[i * m + k] += acc;
        }
    }
}

// ---------------------------------------------------------------- attention

pub(crate) struct AttnCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// [head, tq, tk] attention weights after softmax.
    att: Vec<f64>,
    ctx: Vec<f64>,
}

/// Multi-head scaled dot-product attention; `causal` restricts position i to
/// keys j ≤ i (requires tq == tk).
fn attn_fwd(
    q_in: &[f64],
    tq: usize,
    kv_in: &[f64],
    tk: usize,
    d: usize,
    heads: usize,
    causal: bool,
    p: &AttnParams,
) -> (Vec<f64>, AttnCache) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(q_in, tq, d, &p.wq, d, None);
    let k = linear(kv_in, tk, d, &p.wk, d, None);
    let v = linear(kv_in, tk, d, &p.wv, d, None);
    let mut att = vec![0.0; heads * tq * tk];
    let mut ctx = vec![0.0; tq * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..tq {
            let limit = if causal { i + 1 } else { tk };
            let a = &mut att[h * tq * tk + i * tk..h * tq * tk + i * tk + tk];
            let qi = &q[i * d + off..i * d + off + dh];
            let mut max = f64::NEG_INFINITY;
            for j in 0..limit {
                let kj = &k[j * d + off..j * d + off + dh];
                let s: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                a[j] = s;
                max = max.max(s);
            }
            let mut z = 0.0;
            for j in 0..limit {
                a[j] = (a[j] - max).exp();
                z += a[j];
            }
            for j in 0..limit {
                a[j] /= z;
            }
            let cr = &mut ctx[i * d + off..i * d + off + dh];
            for j in 0..limit {
                let w = a[j];
                if w == 0.0 {
                    continue;
                }
                let vj = &v[j * d + off..j * d + off + dh];
                for (c, &vv) in cr.iter_mut().zip(vj) {
                    *c += w * vv;
                }
            }
        }
    }
    let out = linear(&ctx, tq, d, &p.wo, d, None);
    (out, AttnCache { q, k, v, att, ctx })
}

/// Backward of attn_fwd. Produces fresh gradients for the two inputs; the
/// caller folds them into the right residual streams (they alias for
/// self-attention).
#[allow(clippy::too_many_arguments)]
fn attn_bwd(
    dout: &[f64],
    cache: &AttnCache,
    q_in: &[f64],
    tq: usize,
    kv_in: &[f64],
    tk: usize,
    d: usize,
    heads: usize,
    causal: bool,
    p: &AttnParams,
    gp: &mut AttnParams,
) -> (Vec<f64>, Vec<f64>) {
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dctx = vec![0.0; tq * d];
    linear_bwd(
        &cache.ctx,
        dout,
        tq,
        d,
        d,
        &p.wo,
        &mut gp.wo,
        None,
        &mut dctx,
    );
    let mut dq = vec![0.0; tq * d];
    let mut dk = vec![0.0; tk * d];
    let mut dv = vec![0.0; tk * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..tq {
            let limit = if causal { i + 1 } else { tk };
            let a = &cache.att[h * tq * tk + i * tk..h * tq * tk + i * tk + tk];
            let dc = &dctx[i * d + off..i * d + off + dh];
            // datt and softmax backward.
            let mut datt = vec![0.0; limit];
            let mut inner = 0.0;
            for (j, da) in datt.iter_mut().enumerate() {
                let vj = &cache.v[j * d + off..j * d + off + dh];
                *da = dc.iter().zip(vj).map(|(a, b)| a * b).sum();
                inner += *da * a[j];
            }
            for j in 0..limit {
                let ds = a[j] * (datt[j] - inner) * scale;
                if ds == 0.0 && a[j] == 0.0 {
                    continue;
                }
                let qi = &cache.q[i * d + off..i * d + off + dh];
                let kj = &cache.k[j * d + off..j * d + off + dh];
                for x in 0..dh {
                    dq[i * d + off + x] += ds * kj[x];
                    dk[j * d + off + x] += ds * qi[x];
                }
                // dv_j += att_ij * dctx_i
                let w = a[j];
                for x in 0..dh {
                    dv[j * d + off + x] += w * dc[x];
                }
            }
        }
    }
    let mut dq_in = vec![0.0; tq * d];
    let mut dkv_in = vec![0.0; tk * d];
    linear_bwd(q_in, &dq, tq, d, d, &p.wq, &mut gp.wq, None, &mut dq_in);
    linear_bwd(kv_in, &dk, tk, d, d, &p.wk, &mut gp.wk, None, &mut dkv_in);
    linear_bwd(kv_in, &dv, tk, d, d, &p.wv, &mut gp.wv, None, &mut dkv_in);
    (dq_in, dkv_in)
}

// ------------------------------------------------------------- feed-forward

pub(crate) struct FfnCache {
    /// Post-ReLU hidden activations [t, hidden].
    h: Vec<f64>,
}

fn ffn_fwd(
    x: &[f64],
    t: usize,
    d: usize,
    f: usize,
    w1: &[f64],
    b1: &[f64],
    w2: &[f64],
    b2: &[f64],
) -> (Vec<f64>, FfnCache) {
    let mut h = linear(x, t, d, w1, f, Some(b1));
    for v in h.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let out = linear(&h, t, f, w2, d, Some(b2));
    (out, FfnCache { h })
}

#[allow(clippy::too_many_arguments)]
fn ffn_bwd(
    dout: &[f64],
    cache: &FfnCache,
    x: &[f64],
    t: usize,
    d: usize,
    f: usize,
    w1: &[f64],
    w2: &[f64],
    dw1: &mut [f64],
    db1: &mut [f64],
    dw2: &mut [f64],
    db2: &mut [f64],
    dx: &mut [f64],
) {
    let mut dh = vec![0.0; t * f];
    linear_bwd(&cache.h, dout, t, f, d, w2, dw2, Some(db2), &mut dh);
    for (dv, &hv) in dh.iter_mut().zip(&cache.h) {
        if hv <= 0.0 {
            *dv = 0.0;
        }
    }
    linear_bwd(x, &dh, t, d, f, w1, dw1, Some(db1), dx);
}

// ----------------------------------------------------------------- embedding

/// x0[t] = token + position + language embedding.
pub(crate) fn embed(p: &ParamSet, cfg: &ModelConfig, ids: &[usize], lang: usize) -> Vec<f64> {
    let d = cfg.embed_dim;
    let mut x = vec![0.0; ids.len() * d];
    for (t, &id) in ids.iter().enumerate() {
        let tok = &p.tok[id * d..(id + 1) * d];
        let pos = &p.pos[t * d..(t + 1) * d];
        let lv = &p.lang[lang * d..(lang + 1) * d];
        let row = &mut x[t * d..(t + 1) * d];
        for j in 0..d {
            row[j] = tok[j] + pos[j] + lv[j];
        }
    }
    x
}

fn embed_bwd(dx: &[f64], ids: &[usize], lang: usize, d: usize, g: &mut ParamSet) {
    for (t, &id) in ids.iter().enumerate() {
        let row = &dx[t * d..(t + 1) * d];
        for j in 0..d {
            g.tok[id * d + j] += row[j];
            g.pos[t * d + j] += row[j];
            g.lang[lang * d + j] += row[j];
        }
    }
}

// ------------------------------------------------------------------ encoder

pub(crate) struct EncLayerCache {
    ln1: LnCache,
    attn: AttnCache,
    ln2: LnCache,
    ffn: FfnCache,
}

pub(crate) struct EncCache {
    pub layers: Vec<EncLayerCache>,
    pub final_ln: LnCache,
}

/// Runs the encoder; returns the normalized output [t, d] and caches.
pub(crate) fn encode(
    p: &ParamSet,
    cfg: &ModelConfig,
    ids: &[usize],
    lang: usize,
) -> (Vec<f64>, EncCache) {
    let (t, d, f, h) = (ids.len(), cfg.embed_dim, cfg.hidden_dim, cfg.num_heads);
    let mut x = embed(p, cfg, ids, lang);
    let mut layers = Vec::with_capacity(p.enc.len());
    for lp in &p.enc {
        let ln1 = ln_fwd(x, t, d, &lp.ln1);
        let (a, attn) = attn_fwd(&ln1.out, t, &ln1.out, t, d, h, false, &lp.attn);
        let mut x2 = ln1.x.clone();
        for (xv, av) in x2.iter_mut().zip(&a) {
            *xv += av;
        }
        let ln2 = ln_fwd(x2, t, d, &lp.ln2);
        let (fo, ffn) = ffn_fwd(&ln2.out, t, d, f, &lp.w1, &lp.b1, &lp.w2, &lp.b2);
        let mut out = ln2.x.clone();
        for (xv, fv) in out.iter_mut().zip(&fo) {
            *xv += fv;
        }
        layers.push(EncLayerCache { ln1, attn, ln2, ffn });
        x = out;
    }
    let final_ln = ln_fwd(x, t, d, &p.enc_ln);
    (final_ln.out.clone(), EncCache { layers, final_ln })
}

/// Backward through the encoder given the gradient at its normalized
/// output; accumulates parameter gradients and the embedding-table rows.
pub(crate) fn encode_bwd(
    denc: &[f64],
    cache: &EncCache,
    p: &ParamSet,
    cfg: &ModelConfig,
    ids: &[usize],
    lang: usize,
    g: &mut ParamSet,
) {
    let (t, d, f, h) = (ids.len(), cfg.embed_dim, cfg.hidden_dim, cfg.num_heads);
    let mut dx = vec![0.0; t * d];
    ln_bwd(denc, &cache.final_ln, t, d, &p.enc_ln, &mut g.enc_ln, &mut dx);
    for (li, lp) in p.enc.iter().enumerate().rev() {
        let lc = &cache.layers[li];
        let gl = &mut g.enc[li];
        // out = x2 + ffn(ln2(x2))
        let mut dffn_in = vec![0.0; t * d];
        ffn_bwd(
            &dx, &lc.ffn, &lc.ln2.out, t, d, f, &lp.w1, &lp.w2, &mut gl.w1, &mut gl.b1,
            &mut gl.w2, &mut gl.b2, &mut dffn_in,
        );
        // dx stays as the residual gradient for x2; add the ln2 path.
        ln_bwd(&dffn_in, &lc.ln2, t, d, &lp.ln2, &mut gl.ln2, &mut dx);
        // x2 = x + attn(ln1(x))
        let (dq_in, dkv_in) = attn_bwd(
            &dx, &lc.attn, &lc.ln1.out, t, &lc.ln1.out, t, d, h, false, &lp.attn, &mut gl.attn,
        );
        let mut dln1_out = dq_in;
        for (a, b) in dln1_out.iter_mut().zip(&dkv_in) {
            *a += b;
        }
        ln_bwd(&dln1_out, &lc.ln1, t, d, &lp.ln1, &mut gl.ln1, &mut dx);
    }
    embed_bwd(&dx, ids, lang, d, g);
}

// ------------------------------------------------------------------ decoder

pub(crate) struct DecLayerCache {
    ln1: LnCache,
    self_attn: AttnCache,
    ln2: LnCache,
    cross: AttnCache,
    ln3: LnCache,
    ffn: FfnCache,
}

pub(crate) struct DecCache {
    pub layers: Vec<DecLayerCache>,
    pub final_ln: LnCache,
}

/// Runs the decoder over `dec_ids` (causal self-attention) attending to the
/// encoder output; returns normalized states [t_dec, d] and caches.
pub(crate) fn decode_states(
    p: &ParamSet,
    cfg: &ModelConfig,
    enc_out: &[f64],
    t_src: usize,
    dec_ids: &[usize],
    lang: usize,
) -> (Vec<f64>, DecCache) {
    let (t, d, f, h) = (dec_ids.len(), cfg.embed_dim, cfg.hidden_dim, cfg.num_heads);
    let mut x = embed(p, cfg, dec_ids, lang);
    let mut layers = Vec::with_capacity(p.dec.len());
    for lp in &p.dec {
        let ln1 = ln_fwd(x, t, d, &lp.ln1);
        let (a, self_attn) = attn_fwd(&ln1.out, t, &ln1.out, t, d, h, true, &lp.self_attn);
        let mut x2 = ln1.x.clone();
        for (xv, av) in x2.iter_mut().zip(&a) {
            *xv += av;
        }
        let ln2 = ln_fwd(x2, t, d, &lp.ln2);
        let (c, cross) = attn_fwd(&ln2.out, t, enc_out, t_src, d, h, false, &lp.cross_attn);
        let mut x4 = ln2.x.clone();
        for (xv, cv) in x4.iter_mut().zip(&c) {
            *xv += cv;
        }
        let ln3 = ln_fwd(x4, t, d, &lp.ln3);
        let (fo, ffn) = ffn_fwd(&ln3.out, t, d, f, &lp.w1, &lp.b1, &lp.w2, &lp.b2);
        let mut out = ln3.x.clone();
        for (xv, fv) in out.iter_mut().zip(&fo) {
            *xv += fv;
        }
        layers.push(DecLayerCache {
            ln1,
            self_attn,
            ln2,
            cross,
            ln3,
            ffn,
        });
        x = out;
    }
    let final_ln = ln_fwd(x, t, d, &p.dec_ln);
    (final_ln.out.clone(), DecCache { layers, final_ln })
}

/// Backward through the decoder. Returns the gradient w.r.t. the encoder
/// output (summed over the cross-attention of every layer).
#[allow(clippy::too_many_arguments)]
pub(crate) fn decode_bwd(
    ddec: &[f64],
    cache: &DecCache,
    p: &ParamSet,
    cfg: &ModelConfig,
    enc_out: &[f64],
    t_src: usize,
    dec_ids: &[usize],
    lang: usize,
    g: &mut ParamSet,
) -> Vec<f64> {
    let (t, d, f, h) = (dec_ids.len(), cfg.embed_dim, cfg.hidden_dim, cfg.num_heads);
    let mut denc = vec![0.0; t_src * d];
    let mut dx = vec![0.0; t * d];
    ln_bwd(ddec, &cache.final_ln, t, d, &p.dec_ln, &mut g.dec_ln, &mut dx);
    for (li, lp) in p.dec.iter().enumerate().rev() {
        let lc = &cache.layers[li];
        let gl = &mut g.dec[li];
        let mut dffn_in = vec![0.0; t * d];
        ffn_bwd(
            &dx, &lc.ffn, &lc.ln3.out, t, d, f, &lp.w1, &lp.w2, &mut gl.w1, &mut gl.b1,
            &mut gl.w2, &mut gl.b2, &mut dffn_in,
        );
        ln_bwd(&dffn_in, &lc.ln3, t, d, &lp.ln3, &mut gl.ln3, &mut dx);
        let (dq_in, dkv) = attn_bwd(
            &dx, &lc.cross, &lc.ln2.out, t, enc_out, t_src, d, h, false, &lp.cross_attn,
            &mut gl.cross_attn,
        );
        for (a, b) in denc.iter_mut().zip(&dkv) {
            *a += b;
        }
        ln_bwd(&dq_in, &lc.ln2, t, d, &lp.ln2, &mut gl.ln2, &mut dx);
        let (dq_in, dkv_in) = attn_bwd(
            &dx, &lc.self_attn, &lc.ln1.out, t, &lc.ln1.out, t, d, h, true, &lp.self_attn,
            &mut gl.self_attn,
        );
        let mut dln1_out = dq_in;
        for (a, b) in dln1_out.iter_mut().zip(&dkv_in) {
            *a += b;
        }
        ln_bwd(&dln1_out, &lc.ln1, t, d, &lp.ln1, &mut gl.ln1, &mut dx);
    }
    embed_bwd(&dx, dec_ids, lang, d, g);
    denc
}

// ----------------------------------------------------------- output softmax

/// −log softmax(logits)[target] per requested row, plus dlogits scaled by
/// `scale` for the backward pass. Rows not listed contribute nothing.
pub(crate) fn nll_rows(
    states: &[f64],
    t: usize,
    d: usize,
    out_w: &[f64],
    out_b: &[f64],
    vocab: usize,
    targets: &[(usize, usize)], // (row, target id)
    scale: f64,
) -> (f64, Vec<f64>) {
    let logits = linear(states, t, d, out_w, vocab, Some(out_b));
    let mut dlogits = vec![0.0; t * vocab];
    let mut loss = 0.0;
    for &(row, target) in targets {
        let lr = &logits[row * vocab..(row + 1) * vocab];
        let max = lr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lr.iter().map(|v| (v - max).exp()).sum();
        let log_z = z.ln() + max;
        loss += log_z - lr[target];
        let dr = &mut dlogits[row * vocab..(row + 1) * vocab];
        for j in 0..vocab {
            dr[j] = ((lr[j] - max).exp() / z) * scale;
        }
        dr[target] -= scale;
    }
    (loss, dlogits)
}

/// Folds dlogits back through the output projection.
pub(crate) fn out_proj_bwd(
    states: &[f64],
    dlogits: &[f64],
    t: usize,
    d: usize,
    vocab: usize,
    out_w: &[f64],
    g_out_w: &mut [f64],
    g_out_b: &mut [f64],
    dstates: &mut [f64],
) {
    linear_bwd(
        states,
        dlogits,
        t,
        d,
        vocab,
        out_w,
        g_out_w,
        Some(g_out_b),
        dstates,
    );
}

/// Logits of the final row only (for greedy decoding).
pub(crate) fn last_row_logits(
    states: &[f64],
    t: usize,
    d: usize,
    out_w: &[f64],
    out_b: &[f64],
    vocab: usize,
) -> Vec<f64> {
    let row = &states[(t - 1) * d..t * d];
    let mut logits = out_b.to_vec();
    for (k, &xv) in row.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let wr = &out_w[k * vocab..(k + 1) * vocab];
        for j in 0..vocab {
            logits[j] += xv * wr[j];
        }
    }
    logits
}
