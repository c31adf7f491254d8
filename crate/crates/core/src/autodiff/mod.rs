//! Minimal dense-tensor reverse-mode automatic differentiation.
//!
//! A [`Tape`] records rank-2 f64 tensors (vectors are 1×n, scalars 1×1) as an
//! append-only arena; every op computes its value eagerly and stores a
//! backward rule. One [`Tape::backward`] sweep walks the arena in reverse,
//! visiting each node exactly once, and accumulates gradients into every
//! `requires_grad` leaf. The graph is rebuilt per forward pass, so
//! data-dependent control flow (variable-length acquisition trajectories)
//! needs no special casing.
//!
//! Contract violations (shape mismatches, numeric-domain violations such as
//! log of a non-positive value, backward on a non-scalar) panic with a
//! message naming the offending shapes, mirroring how dense-array crates
//! treat dimension errors.

pub mod check;
pub mod kernels;

pub use check::finite_diff_check;

use kernels::*;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// rhs is 1×n, broadcast across rows of an m×n lhs.
    Row,
    /// rhs is 1×1.
    Scalar,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(TensorId, TensorId, Broadcast),
    Sub(TensorId, TensorId, Broadcast),
    Mul(TensorId, TensorId, Broadcast),
    Div(TensorId, TensorId, Broadcast),
    /// m×n ⊙ broadcast of an m×1 column.
    MulCol(TensorId, TensorId),
    Scale(TensorId, f64),
    AddConst(TensorId, f64),
    Exp(TensorId),
    Log(TensorId),
    Tanh(TensorId),
    Relu(TensorId),
    Square(TensorId),
    Sqrt(TensorId),
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Softmax(TensorId),
    LayerNorm {
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
    },
    CrossEntropy {
        logits: TensorId,
        labels: Vec<usize>,
        /// row-wise softmax cached at forward time for the backward rule
        probs: Vec<f64>,
    },
    Sum(TensorId),
    SumAxis0(TensorId),
    SumAxis1(TensorId),
    ConcatCols(TensorId, TensorId),
    ConcatRows(Vec<TensorId>),
    SliceRows(TensorId, usize, usize),
    SliceCols(TensorId, usize, usize),
    /// Window of the operand's flat row-major data, reinterpreted as
    /// rows×cols. `offset + rows*cols` must not exceed the operand length.
    SliceReshape {
        src: TensorId,
        offset: usize,
    },
    /// Forward takes the stored hard values; backward passes the upstream
    /// gradient to `soft` unchanged.
    StraightThrough {
        soft: TensorId,
    },
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

/// Append-only computation record. See module docs.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, t: TensorId) -> (usize, usize) {
        let n = &self.nodes[t.0 as usize];
        (n.rows, n.cols)
    }

    pub fn value(&self, t: TensorId) -> &[f64] {
        &self.nodes[t.0 as usize].value
    }

    /// Accumulated gradient of the last `backward` sweeps, if any reached `t`.
    pub fn grad(&self, t: TensorId) -> Option<&[f64]> {
        self.nodes[t.0 as usize].grad.as_deref()
    }

    /// Clears accumulated gradients; the tape accepts further `backward`
    /// calls either way, accumulating until reset.
    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>, requires_grad: bool) -> TensorId {
        debug_assert_eq!(value.len(), rows * cols);
        let id = TensorId(self.nodes.len() as u32);
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            grad: None,
            requires_grad,
        });
        id
    }

    fn needs(&self, t: TensorId) -> bool {
        self.nodes[t.0 as usize].requires_grad
    }

    // ── Construction ─────────────────────────────────────────────────

    pub fn leaf(&mut self, rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool) -> TensorId {
        assert_eq!(
            data.len(),
            rows * cols,
            "leaf: data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        self.push(Op::Leaf, rows, cols, data, requires_grad)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> TensorId {
        self.leaf(rows, cols, data, false)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.constant(1, 1, vec![v])
    }

    fn broadcast_of(&self, a: TensorId, b: TensorId, op: &str) -> Broadcast {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if (ar, ac) == (br, bc) {
            Broadcast::Same
        } else if (br, bc) == (1, 1) {
            Broadcast::Scalar
        } else if br == 1 && bc == ac {
            Broadcast::Row
        } else {
            panic!("{op}: incompatible shapes {ar}x{ac} vs {br}x{bc}");
        }
    }

    fn binary_pointwise(
        &mut self,
        a: TensorId,
        b: TensorId,
        op_name: &str,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(Broadcast) -> Op,
    ) -> TensorId {
        let bc_mode = self.broadcast_of(a, b, op_name);
        let (rows, cols) = self.shape(a);
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Vec::with_capacity(rows * cols);
        match bc_mode {
            Broadcast::Same => {
                out.extend(av.iter().zip(bv.iter()).map(|(&x, &y)| f(x, y)));
            }
            Broadcast::Scalar => {
                let s = bv[0];
                out.extend(av.iter().map(|&x| f(x, s)));
            }
            Broadcast::Row => {
                for r in 0..rows {
                    for c in 0..cols {
                        out.push(f(av[r * cols + c], bv[c]));
                    }
                }
            }
        }
        let rg = self.needs(a) || self.needs(b);
        self.push(make(bc_mode), rows, cols, out, rg)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_pointwise(a, b, "add", |x, y| x + y, |m| Op::Add(a, b, m))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_pointwise(a, b, "sub", |x, y| x - y, |m| Op::Sub(a, b, m))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary_pointwise(a, b, "mul", |x, y| x * y, |m| Op::Mul(a, b, m))
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let mode = self.broadcast_of(a, b, "div");
        for &d in self.value(b) {
            assert!(d != 0.0, "div: division by zero (numeric-domain error)");
        }
        match mode {
            Broadcast::Same | Broadcast::Scalar => {}
            Broadcast::Row => panic!("div: row broadcast not supported"),
        }
        self.binary_pointwise(a, b, "div", |x, y| x / y, |m| Op::Div(a, b, m))
    }

    /// m×n ⊙ column broadcast of an m×1 vector.
    pub fn mul_col(&mut self, a: TensorId, col: TensorId) -> TensorId {
        let (rows, cols) = self.shape(a);
        let (cr, cc) = self.shape(col);
        assert!(
            cr == rows && cc == 1,
            "mul_col: expected column {rows}x1, got {cr}x{cc} against {rows}x{cols}"
        );
        let av = self.value(a);
        let cv = self.value(col);
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let s = cv[r];
            out.extend(av[r * cols..(r + 1) * cols].iter().map(|&x| x * s));
        }
        let rg = self.needs(a) || self.needs(col);
        self.push(Op::MulCol(a, col), rows, cols, out, rg)
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let (rows, cols) = self.shape(a);
        let out: Vec<f64> = self.value(a).iter().map(|&x| x * c).collect();
        let rg = self.needs(a);
        self.push(Op::Scale(a, c), rows, cols, out, rg)
    }

    pub fn add_const(&mut self, a: TensorId, c: f64) -> TensorId {
        let (rows, cols) = self.shape(a);
        let out: Vec<f64> = self.value(a).iter().map(|&x| x + c).collect();
        let rg = self.needs(a);
        self.push(Op::AddConst(a, c), rows, cols, out, rg)
    }

    fn unary(
        &mut self,
        a: TensorId,
        op_name: &str,
        f: impl Fn(f64) -> f64,
        domain: impl Fn(f64) -> bool,
        make: Op,
    ) -> TensorId {
        let (rows, cols) = self.shape(a);
        let mut out = Vec::with_capacity(rows * cols);
        for &x in self.value(a) {
            assert!(domain(x), "{op_name}: operand {x} outside valid domain (numeric-domain error)");
            out.push(f(x));
        }
        let rg = self.needs(a);
        self.push(make, rows, cols, out, rg)
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "exp", f64::exp, |_| true, Op::Exp(a))
    }

    pub fn log(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "log", f64::ln, |x| x > 0.0, Op::Log(a))
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "tanh", f64::tanh, |_| true, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "relu", |x| x.max(0.0), |_| true, Op::Relu(a))
    }

    pub fn square(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "square", |x| x * x, |_| true, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: TensorId) -> TensorId {
        self.unary(a, "sqrt", f64::sqrt, |x| x >= 0.0, Op::Sqrt(a))
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(
            k, k2,
            "matmul: inner dimensions disagree: {m}x{k} · {k2}x{n}"
        );
        let out = matmul_nn(self.value(a), self.value(b), m, k, n);
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::Matmul(a, b), m, n, out, rg)
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let (rows, cols) = self.shape(a);
        let av = self.value(a);
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = av[r * cols + c];
            }
        }
        let rg = self.needs(a);
        self.push(Op::Transpose(a), cols, rows, out, rg)
    }

    /// Softmax along the last axis (each row). Entries of -inf map to exact
    /// zero probability; a row of only -inf is a degenerate distribution and
    /// panics.
    pub fn softmax(&mut self, a: TensorId) -> TensorId {
        let (rows, cols) = self.shape(a);
        let mut out = vec![0.0; rows * cols];
        softmax_rows(self.value(a), rows, cols, &mut out).unwrap_or_else(|e| panic!("{e}"));
        let rg = self.needs(a);
        self.push(Op::Softmax(a), rows, cols, out, rg)
    }

    /// Per-row standardization (ε = 1e-5) followed by a learned affine map.
    pub fn layer_norm(&mut self, x: TensorId, gain: TensorId, bias: TensorId) -> TensorId {
        let (rows, cols) = self.shape(x);
        let (gr, gc) = self.shape(gain);
        let (br, bc) = self.shape(bias);
        assert!(
            gr == 1 && gc == cols && br == 1 && bc == cols,
            "layer_norm: gain/bias must be 1x{cols}, got {gr}x{gc} and {br}x{bc}"
        );
        let mut out = vec![0.0; rows * cols];
        layer_norm_rows(self.value(x), self.value(gain), self.value(bias), rows, cols, &mut out);
        let rg = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(Op::LayerNorm { x, gain, bias }, rows, cols, out, rg)
    }

    /// Mean negative log-softmax probability of the true class, a 1×1 tensor.
    pub fn cross_entropy(&mut self, logits: TensorId, labels: &[usize]) -> TensorId {
        let (rows, cols) = self.shape(logits);
        assert!(rows > 0, "cross_entropy: empty batch");
        assert_eq!(
            labels.len(),
            rows,
            "cross_entropy: {} labels for {} rows",
            labels.len(),
            rows
        );
        let mut probs = vec![0.0; rows * cols];
        let loss = cross_entropy_forward(self.value(logits), labels, rows, cols, &mut probs);
        let rg = self.needs(logits);
        self.push(
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            1,
            1,
            vec![loss],
            rg,
        )
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).iter().sum();
        let rg = self.needs(a);
        self.push(Op::Sum(a), 1, 1, vec![v], rg)
    }

    /// Column sums: m×n → 1×n.
    pub fn sum_axis0(&mut self, a: TensorId) -> TensorId {
        let (rows, cols) = self.shape(a);
        let av = self.value(a);
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c] += av[r * cols + c];
            }
        }
        let rg = self.needs(a);
        self.push(Op::SumAxis0(a), 1, cols, out, rg)
    }

    /// Row sums: m×n → m×1.
    pub fn sum_axis1(&mut self, a: TensorId) -> TensorId {
        let (rows, cols) = self.shape(a);
        let av = self.value(a);
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            out.push(av[r * cols..(r + 1) * cols].iter().sum());
        }
        let rg = self.needs(a);
        self.push(Op::SumAxis1(a), rows, 1, out, rg)
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!(ar, br, "concat_cols: row mismatch {ar}x{ac} vs {br}x{bc}");
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Vec::with_capacity(ar * (ac + bc));
        for r in 0..ar {
            out.extend_from_slice(&av[r * ac..(r + 1) * ac]);
            out.extend_from_slice(&bv[r * bc..(r + 1) * bc]);
        }
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::ConcatCols(a, b), ar, ac + bc, out, rg)
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty(), "concat_rows: empty part list");
        let (_, cols) = self.shape(parts[0]);
        let mut rows = 0;
        let mut out = Vec::new();
        let mut rg = false;
        for &p in parts {
            let (pr, pc) = self.shape(p);
            assert_eq!(pc, cols, "concat_rows: column mismatch {pc} vs {cols}");
            rows += pr;
            out.extend_from_slice(self.value(p));
            rg |= self.needs(p);
        }
        self.push(Op::ConcatRows(parts.to_vec()), rows, cols, out, rg)
    }

    pub fn slice_rows(&mut self, a: TensorId, from: usize, to: usize) -> TensorId {
        let (rows, cols) = self.shape(a);
        assert!(from < to && to <= rows, "slice_rows: range {from}..{to} out of {rows} rows");
        let out = self.value(a)[from * cols..to * cols].to_vec();
        let rg = self.needs(a);
        self.push(Op::SliceRows(a, from, to), to - from, cols, out, rg)
    }

    pub fn slice_cols(&mut self, a: TensorId, from: usize, to: usize) -> TensorId {
        let (rows, cols) = self.shape(a);
        assert!(from < to && to <= cols, "slice_cols: range {from}..{to} out of {cols} cols");
        let av = self.value(a);
        let w = to - from;
        let mut out = Vec::with_capacity(rows * w);
        for r in 0..rows {
            out.extend_from_slice(&av[r * cols + from..r * cols + to]);
        }
        let rg = self.needs(a);
        self.push(Op::SliceCols(a, from, to), rows, w, out, rg)
    }

    /// Contiguous window of the operand's flat data, viewed as rows×cols.
    pub fn slice_reshape(&mut self, src: TensorId, offset: usize, rows: usize, cols: usize) -> TensorId {
        let (sr, sc) = self.shape(src);
        assert!(
            offset + rows * cols <= sr * sc,
            "slice_reshape: window {offset}+{rows}x{cols} exceeds {sr}x{sc} source"
        );
        let out = self.value(src)[offset..offset + rows * cols].to_vec();
        let rg = self.needs(src);
        self.push(Op::SliceReshape { src, offset }, rows, cols, out, rg)
    }

    /// Straight-through estimator: forward emits `hard`, backward routes the
    /// upstream gradient to `soft` unchanged.
    pub fn straight_through(&mut self, soft: TensorId, hard: Vec<f64>) -> TensorId {
        let (rows, cols) = self.shape(soft);
        assert_eq!(
            hard.len(),
            rows * cols,
            "straight_through: hard values length {} vs shape {rows}x{cols}",
            hard.len()
        );
        let rg = self.needs(soft);
        self.push(Op::StraightThrough { soft }, rows, cols, hard, rg)
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Gradients accumulate into every
    /// `requires_grad` node across repeated calls; `reset_grads` restores a
    /// clean slate.
    pub fn backward(&mut self, loss: TensorId) {
        let (r, c) = self.shape(loss);
        assert!(r == 1 && c == 1, "backward: loss must be scalar, got {r}x{c}");
        assert!(
            self.needs(loss),
            "backward: loss does not depend on any requires_grad leaf"
        );
        let n = loss.0 as usize;
        // Per-sweep buffers: repeated backward calls must each propagate an
        // independent unit seed, then fold into the persistent grads.
        let mut sweep: Vec<Option<Vec<f64>>> = (0..=n).map(|_| None).collect();
        sweep[n] = Some(vec![1.0]);
        for i in (0..=n).rev() {
            let Some(g) = sweep[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut sweep);
            match &mut self.nodes[i].grad {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(g.iter()) {
                        *a += b;
                    }
                }
                slot => *slot = Some(g),
            }
        }
    }

    /// Folds an upstream gradient into `b`'s slot, undoing whatever
    /// broadcast `b` underwent in the forward op. `sign` is +1 for add, -1
    /// for sub.
    fn reduce_broadcast(
        &self,
        sweep: &mut [Option<Vec<f64>>],
        b: TensorId,
        g: &[f64],
        rows: usize,
        cols: usize,
        mode: Broadcast,
        sign: f64,
    ) {
        self.accumulate(sweep, b, |gb| match mode {
            Broadcast::Same => {
                for (x, y) in gb.iter_mut().zip(g.iter()) {
                    *x = fmadd(sign, *y, *x);
                }
            }
            Broadcast::Scalar => {
                gb[0] = fmadd(sign, g.iter().sum::<f64>(), gb[0]);
            }
            Broadcast::Row => {
                for r in 0..rows {
                    for c in 0..cols {
                        gb[c] = fmadd(sign, g[r * cols + c], gb[c]);
                    }
                }
            }
        });
    }

    fn accumulate(
        &self,
        sweep: &mut [Option<Vec<f64>>],
        t: TensorId,
        f: impl FnOnce(&mut [f64]),
    ) {
        let idx = t.0 as usize;
        if !self.nodes[idx].requires_grad {
            return;
        }
        let buf = sweep[idx].get_or_insert_with(|| vec![0.0; self.nodes[idx].value.len()]);
        f(buf);
    }

    fn propagate(&self, i: usize, g: &[f64], sweep: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b, mode) => {
                self.accumulate(sweep, *a, |ga| {
                    for (x, y) in ga.iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
                self.reduce_broadcast(sweep, *b, g, rows, cols, *mode, 1.0);
            }
            Op::Sub(a, b, mode) => {
                self.accumulate(sweep, *a, |ga| {
                    for (x, y) in ga.iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
                self.reduce_broadcast(sweep, *b, g, rows, cols, *mode, -1.0);
            }
            Op::Mul(a, b, mode) => {
                let bv = self.value(*b);
                self.accumulate(sweep, *a, |ga| match mode {
                    Broadcast::Same => {
                        for ((x, y), z) in ga.iter_mut().zip(g.iter()).zip(bv.iter()) {
                            *x = fmadd(*y, *z, *x);
                        }
                    }
                    Broadcast::Scalar => {
                        let s = bv[0];
                        for (x, y) in ga.iter_mut().zip(g.iter()) {
                            *x = fmadd(*y, s, *x);
                        }
                    }
                    Broadcast::Row => {
                        for r in 0..rows {
                            for c in 0..cols {
                                ga[r * cols + c] = fmadd(g[r * cols + c], bv[c], ga[r * cols + c]);
                            }
                        }
                    }
                });
                let av = self.value(*a);
                self.accumulate(sweep, *b, |gb| match mode {
                    Broadcast::Same => {
                        for ((x, y), z) in gb.iter_mut().zip(g.iter()).zip(av.iter()) {
                            *x = fmadd(*y, *z, *x);
                        }
                    }
                    Broadcast::Scalar => {
                        let mut acc = 0.0;
                        for (y, z) in g.iter().zip(av.iter()) {
                            acc = fmadd(*y, *z, acc);
                        }
                        gb[0] += acc;
                    }
                    Broadcast::Row => {
                        for r in 0..rows {
                            for c in 0..cols {
                                gb[c] = fmadd(g[r * cols + c], av[r * cols + c], gb[c]);
                            }
                        }
                    }
                });
            }
            Op::Div(a, b, mode) => {
                let bv = self.value(*b);
                self.accumulate(sweep, *a, |ga| match mode {
                    Broadcast::Same => {
                        for ((x, y), z) in ga.iter_mut().zip(g.iter()).zip(bv.iter()) {
                            *x += y / z;
                        }
                    }
                    Broadcast::Scalar => {
                        let inv = 1.0 / bv[0];
                        for (x, y) in ga.iter_mut().zip(g.iter()) {
                            *x = fmadd(*y, inv, *x);
                        }
                    }
                    Broadcast::Row => unreachable!(),
                });
                let av = self.value(*a);
                self.accumulate(sweep, *b, |gb| match mode {
                    Broadcast::Same => {
                        for i in 0..av.len() {
                            gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
                        }
                    }
                    Broadcast::Scalar => {
                        let inv2 = 1.0 / (bv[0] * bv[0]);
                        let mut acc = 0.0;
                        for (y, z) in g.iter().zip(av.iter()) {
                            acc = fmadd(*y, *z, acc);
                        }
                        gb[0] -= acc * inv2;
                    }
                    Broadcast::Row => unreachable!(),
                });
            }
            Op::MulCol(a, col) => {
                let cv = self.value(*col);
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..rows {
                        let s = cv[r];
                        for c in 0..cols {
                            ga[r * cols + c] = fmadd(g[r * cols + c], s, ga[r * cols + c]);
                        }
                    }
                });
                let av = self.value(*a);
                self.accumulate(sweep, *col, |gc| {
                    for r in 0..rows {
                        let mut acc = 0.0;
                        for c in 0..cols {
                            acc = fmadd(g[r * cols + c], av[r * cols + c], acc);
                        }
                        gc[r] += acc;
                    }
                });
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.accumulate(sweep, *a, |ga| {
                    for (x, y) in ga.iter_mut().zip(g.iter()) {
                        *x = fmadd(*y, s, *x);
                    }
                });
            }
            Op::AddConst(a, _) => {
                self.accumulate(sweep, *a, |ga| {
                    for (x, y) in ga.iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
            }
            Op::Exp(a) => {
                let out = &node.value;
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g.iter()).zip(out.iter()) {
                        *x = fmadd(*y, *o, *x);
                    }
                });
            }
            Op::Log(a) => {
                let av = self.value(*a);
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), v) in ga.iter_mut().zip(g.iter()).zip(av.iter()) {
                        *x += y / v;
                    }
                });
            }
            Op::Tanh(a) => {
                let out = &node.value;
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g.iter()).zip(out.iter()) {
                        *x = fmadd(*y, 1.0 - o * o, *x);
                    }
                });
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), v) in ga.iter_mut().zip(g.iter()).zip(av.iter()) {
                        if *v > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            Op::Square(a) => {
                let av = self.value(*a);
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), v) in ga.iter_mut().zip(g.iter()).zip(av.iter()) {
                        *x = fmadd(*y, 2.0 * v, *x);
                    }
                });
            }
            Op::Sqrt(a) => {
                let out = &node.value;
                self.accumulate(sweep, *a, |ga| {
                    for ((x, y), o) in ga.iter_mut().zip(g.iter()).zip(out.iter()) {
                        *x += y / (2.0 * o);
                    }
                });
            }
            Op::Matmul(a, b) => {
                let (m, k) = self.shape(*a);
                let (_, n) = self.shape(*b);
                let bv = self.value(*b);
                self.accumulate(sweep, *a, |ga| {
                    matmul_nt_acc(g, bv, ga, m, n, k);
                });
                let av = self.value(*a);
                self.accumulate(sweep, *b, |gb| {
                    matmul_tn_acc(av, g, gb, m, k, n);
                });
            }
            Op::Transpose(a) => {
                self.accumulate(sweep, *a, |ga| {
                    // node is cols(a) x rows(a); g has node's layout
                    for r in 0..rows {
                        for c in 0..cols {
                            ga[c * rows + r] += g[r * cols + c];
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let p = &node.value;
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..rows {
                        let prow = &p[r * cols..(r + 1) * cols];
                        let grow = &g[r * cols..(r + 1) * cols];
                        let mut dot = 0.0;
                        for (x, y) in grow.iter().zip(prow.iter()) {
                            dot = fmadd(*x, *y, dot);
                        }
                        let garow = &mut ga[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            garow[c] = fmadd(prow[c], grow[c] - dot, garow[c]);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias } => {
                let xv = self.value(*x);
                let gv = self.value(*gain);
                let n = cols as f64;
                self.accumulate(sweep, *x, |gx| {
                    for r in 0..rows {
                        let xrow = &xv[r * cols..(r + 1) * cols];
                        let (mean, var) = row_mean_var(xrow, cols);
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let grow = &g[r * cols..(r + 1) * cols];
                        let mut mean_gy = 0.0;
                        let mut mean_gyx = 0.0;
                        for c in 0..cols {
                            let xhat = (xrow[c] - mean) * inv;
                            let gy = grow[c] * gv[c];
                            mean_gy += gy;
                            mean_gyx = fmadd(gy, xhat, mean_gyx);
                        }
                        mean_gy /= n;
                        mean_gyx /= n;
                        let gxrow = &mut gx[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            let xhat = (xrow[c] - mean) * inv;
                            let gy = grow[c] * gv[c];
                            gxrow[c] = fmadd(inv, gy - mean_gy - xhat * mean_gyx, gxrow[c]);
                        }
                    }
                });
                self.accumulate(sweep, *gain, |gg| {
                    for r in 0..rows {
                        let xrow = &xv[r * cols..(r + 1) * cols];
                        let (mean, var) = row_mean_var(xrow, cols);
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        for c in 0..cols {
                            let xhat = (xrow[c] - mean) * inv;
                            gg[c] = fmadd(g[r * cols + c], xhat, gg[c]);
                        }
                    }
                });
                self.accumulate(sweep, *bias, |gb| {
                    for r in 0..rows {
                        for c in 0..cols {
                            gb[c] += g[r * cols + c];
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let (b, c) = self.shape(*logits);
                let scale = g[0] / b as f64;
                self.accumulate(sweep, *logits, |gl| {
                    for r in 0..b {
                        for j in 0..c {
                            let onehot = if labels[r] == j { 1.0 } else { 0.0 };
                            gl[r * c + j] = fmadd(scale, probs[r * c + j] - onehot, gl[r * c + j]);
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let s = g[0];
                self.accumulate(sweep, *a, |ga| {
                    for x in ga.iter_mut() {
                        *x += s;
                    }
                });
            }
            Op::SumAxis0(a) => {
                let (arows, acols) = self.shape(*a);
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..arows {
                        for c in 0..acols {
                            ga[r * acols + c] += g[c];
                        }
                    }
                });
            }
            Op::SumAxis1(a) => {
                let (arows, acols) = self.shape(*a);
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..arows {
                        let s = g[r];
                        for c in 0..acols {
                            ga[r * acols + c] += s;
                        }
                    }
                });
            }
            Op::ConcatCols(a, b) => {
                let (_, ac) = self.shape(*a);
                let (_, bc) = self.shape(*b);
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..rows {
                        for c in 0..ac {
                            ga[r * ac + c] += g[r * cols + c];
                        }
                    }
                });
                self.accumulate(sweep, *b, |gb| {
                    for r in 0..rows {
                        for c in 0..bc {
                            gb[r * bc + c] += g[r * cols + ac + c];
                        }
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut row0 = 0;
                for &p in parts.iter() {
                    let (pr, _) = self.shape(p);
                    self.accumulate(sweep, p, |gp| {
                        for (x, y) in gp.iter_mut().zip(g[row0 * cols..(row0 + pr) * cols].iter()) {
                            *x += y;
                        }
                    });
                    row0 += pr;
                }
            }
            Op::SliceRows(a, from, _) => {
                let (_, acols) = self.shape(*a);
                let from = *from;
                self.accumulate(sweep, *a, |ga| {
                    for (x, y) in ga[from * acols..].iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
            }
            Op::SliceCols(a, from, to) => {
                let (arows, acols) = self.shape(*a);
                let (from, to) = (*from, *to);
                let w = to - from;
                self.accumulate(sweep, *a, |ga| {
                    for r in 0..arows {
                        for c in 0..w {
                            ga[r * acols + from + c] += g[r * w + c];
                        }
                    }
                });
            }
            Op::SliceReshape { src, offset } => {
                let offset = *offset;
                self.accumulate(sweep, *src, |gs| {
                    for (x, y) in gs[offset..].iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
            }
            Op::StraightThrough { soft } => {
                self.accumulate(sweep, *soft, |gs| {
                    for (x, y) in gs.iter_mut().zip(g.iter()) {
                        *x += y;
                    }
                });
            }
        }
    }
}
