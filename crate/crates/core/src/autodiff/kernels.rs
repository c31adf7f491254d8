//! Dense f64 kernels shared by the tape ops and the no-grad inference path.
//!
//! Keeping forward and backward on the same kernels is what makes the raw
//! inference path bit-identical to the recorded one.

/// Fused multiply-add when the target has hardware FMA, plain mul+add
/// otherwise (software fma is orders of magnitude slower).
#[inline(always)]
pub fn fmadd(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// C += A·B with A: m×k, B: k×n (row-major).
pub fn matmul_nn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in crow.iter_mut().zip(brow.iter()) {
                *cj = fmadd(aip, bj, *cj);
            }
        }
    }
}

/// C = A·B.
pub fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    matmul_nn_acc(a, b, &mut c, m, k, n);
    c
}

/// C += A·Bᵀ with A: m×k, B: n×k. Row-dot form, both operands streamed.
pub fn matmul_nt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&x, &y) in arow.iter().zip(brow.iter()) {
                acc = fmadd(x, y, acc);
            }
            c[i * n + j] += acc;
        }
    }
}

/// C += Aᵀ·G with A: m×k, G: m×n, C: k×n.
pub fn matmul_tn_acc(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let grow = &g[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cj, &gj) in crow.iter_mut().zip(grow.iter()) {
                *cj = fmadd(aip, gj, *cj);
            }
        }
    }
}

/// Numerically stabilized softmax over each row; -inf inputs map to exact 0.
/// Returns an error description if some row is entirely -inf.
pub fn softmax_rows(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) -> Result<(), String> {
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(format!("softmax: row {r} has all entries -inf (degenerate distribution)"));
        }
        let orow = &mut out[r * cols..(r + 1) * cols];
        let mut sum = 0.0;
        for (o, &v) in orow.iter_mut().zip(row.iter()) {
            // exp(-inf) == 0 exactly
            *o = (v - max).exp();
            sum += *o;
        }
        let inv = 1.0 / sum;
        for o in orow.iter_mut() {
            *o *= inv;
        }
    }
    Ok(())
}

/// Per-row mean/variance statistics used by layer_norm forward and backward.
pub fn row_mean_var(x: &[f64], cols: usize) -> (f64, f64) {
    let n = cols as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// out[r] = (x[r] - mean)/sqrt(var + eps) * gain + bias, per row.
pub fn layer_norm_rows(
    x: &[f64],
    gain: &[f64],
    bias: &[f64],
    rows: usize,
    cols: usize,
    out: &mut [f64],
) {
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let (mean, var) = row_mean_var(row, cols);
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let orow = &mut out[r * cols..(r + 1) * cols];
        for j in 0..cols {
            orow[j] = fmadd((row[j] - mean) * inv, gain[j], bias[j]);
        }
    }
}

/// Mean negative log-softmax probability of the true class.
/// Also writes the row-wise softmax into `probs` for reuse in backward.
pub fn cross_entropy_forward(
    logits: &[f64],
    labels: &[usize],
    rows: usize,
    cols: usize,
    probs: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        assert!(
            label < cols,
            "cross_entropy: label {label} out of range for {cols} classes (row {r})"
        );
        let row = &logits[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let prow = &mut probs[r * cols..(r + 1) * cols];
        for (p, &v) in prow.iter_mut().zip(row.iter()) {
            *p = (v - max).exp();
            sum += *p;
        }
        let inv = 1.0 / sum;
        for p in prow.iter_mut() {
            *p *= inv;
        }
        total += sum.ln() + max - row[label];
    }
    total / rows as f64
}
