//! Finite-difference verification of recorded gradients.

use super::{Tape, TensorId};

/// Max over coordinates of |analytic − central difference| / (|analytic| + 1e-8).
///
/// `f` must rebuild the same scalar-valued graph for every call and be
/// deterministic; the checker evaluates it twice at the unperturbed point and
/// panics on a value mismatch.
pub fn finite_diff_check<F>(f: F, rows: usize, cols: usize, x: &[f64], step: f64) -> f64
where
    F: Fn(&mut Tape, TensorId) -> TensorId,
{
    assert_eq!(x.len(), rows * cols, "finite_diff_check: data/shape mismatch");
    let eval = |data: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let leaf = tape.leaf(rows, cols, data.to_vec(), true);
        let out = f(&mut tape, leaf);
        tape.value(out)[0]
    };
    let v0 = eval(x);
    let v1 = eval(x);
    assert!(
        v0.to_bits() == v1.to_bits(),
        "finite_diff_check: f is non-deterministic ({v0} vs {v1} on repeated evaluation)"
    );

    let mut tape = Tape::new();
    let leaf = tape.leaf(rows, cols, x.to_vec(), true);
    let loss = f(&mut tape, leaf);
    let (lr, lc) = tape.shape(loss);
    assert!(lr == 1 && lc == 1, "finite_diff_check: f must be scalar-valued");
    tape.backward(loss);
    let analytic = tape
        .grad(leaf)
        .expect("finite_diff_check: no gradient reached the probed leaf")
        .to_vec();

    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = eval(&probe);
        probe[i] = orig - step;
        let minus = eval(&probe);
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + 1e-8);
        worst = worst.max(rel);
    }
    worst
}
