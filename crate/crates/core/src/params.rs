//! Named parameter tensors with persistent values, plus per-tape bindings.
//!
//! Parameters live outside any tape; each training step binds them as leaves
//! on a fresh tape, runs forward/backward, and reads the gradients back out.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Tape, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, value: Vec<f64>) -> ParamId {
        assert_eq!(value.len(), rows * cols);
        let name = name.into();
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name,
            rows,
            cols,
            value,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn total_len(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Creates one `requires_grad` leaf per parameter on the tape.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        let ids = self
            .params
            .iter()
            .map(|p| tape.leaf(p.rows, p.cols, p.value.clone(), true))
            .collect();
        Binding { ids }
    }

    /// Binds every parameter except `probe_id`, which is mapped to an
    /// existing tape tensor instead. This is how finite-difference checks
    /// route their perturbed leaf into a full model forward.
    pub fn bind_with_probe(&self, tape: &mut Tape, probe_id: ParamId, probe: TensorId) -> Binding {
        let ids = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if ParamId(i) == probe_id {
                    let (rows, cols) = tape.shape(probe);
                    assert_eq!((rows, cols), (p.rows, p.cols), "probe shape mismatch for {}", p.name);
                    probe
                } else {
                    tape.leaf(p.rows, p.cols, p.value.clone(), false)
                }
            })
            .collect();
        Binding { ids }
    }

    /// Snapshot of every value, used by early stopping.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, s) in self.params.iter_mut().zip(snapshot.iter()) {
            p.value.copy_from_slice(s);
        }
    }
}

/// Tape leaves for every parameter of a store, in store order.
pub struct Binding {
    ids: Vec<TensorId>,
}

impl Binding {
    pub fn get(&self, id: ParamId) -> TensorId {
        self.ids[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, TensorId)> + '_ {
        self.ids.iter().enumerate().map(|(i, &t)| (ParamId(i), t))
    }
}

/// N(0, 1/fan_in) weight initialization for a fan_in x fan_out matrix.
pub fn xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let std = (1.0 / rows as f64).sqrt();
    (0..rows * cols)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn normal<R: Rng>(len: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn zeros(len: usize) -> Vec<f64> {
    vec![0.0; len]
}

pub fn ones(len: usize) -> Vec<f64> {
    vec![1.0; len]
}
