//! Dataset representation, mean imputation, subset sampling, fold splitting,
//! and per-fold standardization.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing `label` column in header")]
    MissingLabelColumn,
    #[error("row {row}: non-numeric or missing value in column {column}")]
    BadValue { row: usize, column: String },
    #[error("row {row}: label {value} is not a non-negative integer")]
    BadLabel { row: usize, value: String },
    #[error("dataset is empty")]
    Empty,
    #[error("feature means not fitted; call fit_means or standardize first")]
    MeansNotFitted,
    #[error("class {class} has {count} members, fewer than {k} folds")]
    Stratification { class: usize, count: usize, k: usize },
}

/// Binary mask over the M features recording which are observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KnowledgeStatus {
    mask: Vec<bool>,
    cardinality: usize,
}

impl KnowledgeStatus {
    pub fn empty(m: usize) -> Self {
        Self {
            mask: vec![false; m],
            cardinality: 0,
        }
    }

    pub fn full(m: usize) -> Self {
        Self {
            mask: vec![true; m],
            cardinality: m,
        }
    }

    pub fn from_indices(m: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(m);
        for &i in indices {
            assert!(i < m, "feature index {i} out of range for M={m}");
            s.observe(i);
        }
        s
    }

    pub fn from_bits(mask: Vec<bool>) -> Self {
        let cardinality = mask.iter().filter(|&&b| b).count();
        Self { mask, cardinality }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality == 0
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// Marks feature `i` observed; idempotent.
    pub fn observe(&mut self, i: usize) {
        if !self.mask[i] {
            self.mask[i] = true;
            self.cardinality += 1;
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.mask
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Compact bit words, used as a hash key for mask-set audits.
    pub fn key(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.mask.len().div_ceil(64)];
        for (i, &b) in self.mask.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        words
    }
}

impl fmt::Display for KnowledgeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.mask {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Tabular classification dataset. Row-major features, class-index labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    pub num_features: usize,
    pub num_classes: usize,
    pub feature_names: Vec<String>,
    /// Per-feature means, fitted from a training split only.
    pub feature_means: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<usize>, num_features: usize, num_classes: usize) -> Self {
        assert_eq!(x.len(), y.len() * num_features, "feature matrix/label length mismatch");
        assert!(y.iter().all(|&c| c < num_classes), "label out of range");
        assert!(x.iter().all(|v| v.is_finite()), "non-finite feature value");
        let feature_names = (1..=num_features).map(|i| format!("x{i}")).collect();
        Self {
            x,
            y,
            num_features,
            num_classes,
            feature_names,
            feature_means: None,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.num_features..(i + 1) * self.num_features]
    }

    /// Fits per-feature means from the given row indices (a training split).
    pub fn fit_means(&mut self, train_rows: &[usize]) {
        let m = self.num_features;
        let mut means = vec![0.0; m];
        for &r in train_rows {
            for (j, v) in self.row(r).iter().enumerate() {
                means[j] += v;
            }
        }
        let n = train_rows.len().max(1) as f64;
        for v in &mut means {
            *v /= n;
        }
        self.feature_means = Some(means);
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let m = self.num_features;
        let mut x = Vec::with_capacity(rows.len() * m);
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            x.extend_from_slice(self.row(r));
            y.push(self.y[r]);
        }
        Dataset {
            x,
            y,
            num_features: m,
            num_classes: self.num_classes,
            feature_names: self.feature_names.clone(),
            feature_means: self.feature_means.clone(),
        }
    }

    /// Reads the CSV interchange format: header row, numeric feature columns,
    /// one non-negative integer column named `label`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_idx = headers
            .iter()
            .position(|h| h == "label")
            .ok_or(DataError::MissingLabelColumn)?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.to_string())
            .collect();
        let m = feature_names.len();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                if i == label_idx {
                    let label: usize = field.parse().map_err(|_| DataError::BadLabel {
                        row,
                        value: field.to_string(),
                    })?;
                    y.push(label);
                } else {
                    let v: f64 = field.parse().map_err(|_| DataError::BadValue {
                        row,
                        column: headers[i].to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(DataError::BadValue {
                            row,
                            column: headers[i].to_string(),
                        });
                    }
                    x.push(v);
                }
            }
        }
        if y.is_empty() {
            return Err(DataError::Empty);
        }
        let num_classes = y.iter().max().unwrap() + 1;
        let mut ds = Dataset::new(x, y, m, num_classes);
        ds.feature_names = feature_names;
        Ok(ds)
    }

    pub fn read_csv_path(path: &Path) -> Result<Dataset, DataError> {
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the CSV interchange format with full round-trip precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},label", self.feature_names.join(","))?;
        for i in 0..self.len() {
            let mut line = String::new();
            for v in self.row(i) {
                line.push_str(&format!("{v}"));
                line.push(',');
            }
            line.push_str(&format!("{}", self.y[i]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Replaces unobserved coordinates with their training-split means.
pub fn impute_mean(x: &[f64], status: &KnowledgeStatus, means: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), status.len(), "impute_mean: row/mask length mismatch");
    assert_eq!(x.len(), means.len(), "impute_mean: row/means length mismatch");
    x.iter()
        .zip(status.bits())
        .zip(means.iter())
        .map(|((&v, &seen), &mu)| if seen { v } else { mu })
        .collect()
}

/// Cardinality-first subset sampling: k uniform on {1..M}, then a uniform
/// k-subset via partial Fisher-Yates.
pub fn sample_subset<R: Rng>(m: usize, rng: &mut R) -> KnowledgeStatus {
    assert!(m >= 1, "sample_subset: M must be positive");
    let k = rng.gen_range(1..=m);
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = rng.gen_range(i..m);
        pool.swap(i, j);
    }
    KnowledgeStatus::from_indices(m, &pool[..k])
}

/// Like [`sample_subset`], but resamples while the draw lands in `excluded`
/// (used to keep zero-shot evaluation masks out of the training stream).
pub fn sample_subset_excluding<R: Rng>(
    m: usize,
    excluded: &HashSet<Vec<u64>>,
    rng: &mut R,
) -> KnowledgeStatus {
    loop {
        let s = sample_subset(m, rng);
        if !excluded.contains(&s.key()) {
            return s;
        }
    }
}

/// Stratified k-fold assignment.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub stratified: bool,
}

impl FoldSplit {
    pub fn eval_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Stratified fold assignment: class members are shuffled, then dealt
/// round-robin so per-class counts across folds differ by at most one.
pub fn stratified_kfold<R: Rng>(y: &[usize], k: usize, rng: &mut R) -> Result<FoldSplit, DataError> {
    assert!(k >= 2, "stratified_kfold: need at least 2 folds");
    let num_classes = y.iter().max().map_or(0, |&c| c + 1);
    let mut assignments = vec![0usize; y.len()];
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(DataError::Stratification {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(rng);
        // rotate the dealing start per class so small classes don't all
        // overload fold 0
        let start = rng.gen_range(0..k);
        for (i, &row) in members.iter().enumerate() {
            assignments[row] = (start + i) % k;
        }
    }
    Ok(FoldSplit {
        k,
        assignments,
        stratified: true,
    })
}

/// Per-fold standardization statistics (population std, clamped at 1e-8).
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub const STD_CLAMP: f64 = 1e-8;

/// Fits column mean/std on the training matrix and transforms both splits.
/// After standardization the imputation means are exactly zero.
pub fn standardize_fit_transform(
    train_x: &[f64],
    eval_x: &[f64],
    m: usize,
) -> (Vec<f64>, Vec<f64>, Standardizer) {
    assert!(!train_x.is_empty(), "standardize: empty training split");
    assert_eq!(train_x.len() % m, 0);
    assert_eq!(eval_x.len() % m, 0);
    let n = train_x.len() / m;
    let mut means = vec![0.0; m];
    for r in 0..n {
        for j in 0..m {
            means[j] += train_x[r * m + j];
        }
    }
    for v in &mut means {
        *v /= n as f64;
    }
    let mut stds = vec![0.0; m];
    for r in 0..n {
        for j in 0..m {
            let d = train_x[r * m + j] - means[j];
            stds[j] += d * d;
        }
    }
    for v in &mut stds {
        *v = (*v / n as f64).sqrt().max(STD_CLAMP);
    }
    let apply = |src: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(src.len());
        for (i, &v) in src.iter().enumerate() {
            let j = i % m;
            out.push((v - means[j]) / stds[j]);
        }
        out
    };
    let train = apply(train_x);
    let eval = apply(eval_x);
    (train, eval, Standardizer { means, stds })
}

/// One training batch: rows regrouped so that samples sharing a mask are
/// contiguous, plus the mask of each group.
#[derive(Debug, Clone)]
pub struct MaskedBatch {
    /// Row indices into the source matrix, in group order.
    pub rows: Vec<usize>,
    /// `(status, start, end)` half-open row ranges into `rows`.
    pub groups: Vec<(KnowledgeStatus, usize, usize)>,
}

/// Splits shuffled rows into batches and assigns each batch at most
/// `mask_budget` freshly sampled masks, partitioning rows evenly among them.
/// Every sampled mask is appended to `mask_log` for the zero-shot audit.
#[allow(clippy::too_many_arguments)]
pub fn batch_iter<R: Rng>(
    n_rows: usize,
    m: usize,
    batch_size: usize,
    mask_budget: usize,
    excluded: &HashSet<Vec<u64>>,
    mask_log: &mut HashSet<Vec<u64>>,
    rng: &mut R,
) -> Vec<MaskedBatch> {
    assert!(mask_budget >= 1, "batch_iter: mask budget must be at least 1");
    assert!(batch_size >= 1);
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size) {
        let k = mask_budget.min(chunk.len());
        let mut groups = Vec::with_capacity(k);
        let base = chunk.len() / k;
        let extra = chunk.len() % k;
        let mut start = 0;
        for g in 0..k {
            let size = base + usize::from(g < extra);
            let status = sample_subset_excluding(m, excluded, rng);
            mask_log.insert(status.key());
            groups.push((status, start, start + size));
            start += size;
        }
        batches.push(MaskedBatch {
            rows: chunk.to_vec(),
            groups,
        });
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn impute_basics() {
        let means = vec![0.0, 0.0, 0.0];
        let x = vec![1.0, 2.0, 3.0];
        let s = KnowledgeStatus::from_indices(3, &[1]);
        assert_eq!(impute_mean(&x, &s, &means), vec![0.0, 2.0, 0.0]);
        let full = KnowledgeStatus::full(3);
        assert_eq!(impute_mean(&x, &full, &means), x);
        let empty = KnowledgeStatus::empty(3);
        assert_eq!(impute_mean(&x, &empty, &means), means);
    }

    #[test]
    fn impute_is_idempotent_and_touches_only_unobserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = 8;
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let means: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = sample_subset(m, &mut rng);
            let once = impute_mean(&x, &s, &means);
            let twice = impute_mean(&once, &s, &means);
            assert_eq!(once, twice);
            for i in 0..m {
                if s.is_observed(i) {
                    assert_eq!(once[i], x[i]);
                } else {
                    assert_eq!(once[i], means[i]);
                }
            }
        }
    }

    #[test]
    fn sample_subset_m1_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let s = sample_subset(1, &mut rng);
            assert_eq!(s.cardinality(), 1);
            assert!(s.is_observed(0));
        }
    }

    #[test]
    fn sample_subset_m2_cardinalities_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut count1 = 0;
        let n = 20_000;
        for _ in 0..n {
            if sample_subset(2, &mut rng).cardinality() == 1 {
                count1 += 1;
            }
        }
        let freq = count1 as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "P(|S|=1) = {freq}");
    }

    #[test]
    fn sample_subset_cardinality_uniform_and_features_exchangeable() {
        let m = 20;
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut card_counts = vec![0usize; m + 1];
        let mut incl = vec![vec![0usize; m]; m + 1];
        for _ in 0..draws {
            let s = sample_subset(m, &mut rng);
            card_counts[s.cardinality()] += 1;
            for i in s.indices() {
                incl[s.cardinality()][i] += 1;
            }
        }
        assert_eq!(card_counts[0], 0, "cardinality 0 must never appear");
        // chi-square uniformity over {1..M} at alpha = 0.01
        let expected = draws as f64 / m as f64;
        let chi2: f64 = (1..=m)
            .map(|k| {
                let d = card_counts[k] as f64 - expected;
                d * d / expected
            })
            .sum();
        let crit = crate::stats::chi_squared_critical(m as f64 - 1.0, 0.01);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
        // within each cardinality, per-feature inclusion must track k/M;
        // ~380 simultaneous binomial checks, so the band is widened from 3σ
        // to 4.5σ for a family-wise false-alarm rate near zero
        for k in 1..m {
            let n_k = card_counts[k] as f64;
            let p = k as f64 / m as f64;
            let sigma = (n_k * p * (1.0 - p)).sqrt();
            for i in 0..m {
                let dev = (incl[k][i] as f64 - n_k * p).abs();
                assert!(dev <= 4.5 * sigma + 1.0, "cardinality {k} feature {i}: dev {dev} > 4.5σ band {sigma}");
            }
        }
    }

    #[test]
    fn stratified_fold_exact_divisibility() {
        let y: Vec<usize> = std::iter::repeat(0).take(50).chain(std::iter::repeat(1).take(50)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let split = stratified_kfold(&y, 5, &mut rng).unwrap();
        for fold in 0..5 {
            let rows = split.eval_rows(fold);
            let c0 = rows.iter().filter(|&&r| y[r] == 0).count();
            let c1 = rows.iter().filter(|&&r| y[r] == 1).count();
            assert_eq!((c0, c1), (10, 10));
        }
    }

    #[test]
    fn stratified_fold_pigeonhole() {
        let y: Vec<usize> = std::iter::repeat(0).take(7).chain(std::iter::repeat(1).take(7)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let split = stratified_kfold(&y, 5, &mut rng).unwrap();
        for class in 0..2 {
            let mut counts = vec![0usize; 5];
            for (i, &f) in split.assignments.iter().enumerate() {
                if y[i] == class {
                    counts[f] += 1;
                }
            }
            let max = counts.iter().max().unwrap();
            let min = counts.iter().min().unwrap();
            assert!(max - min <= 1, "class {class} counts {counts:?}");
        }
    }

    #[test]
    fn stratified_fold_deterministic_and_partitioning() {
        let y: Vec<usize> = (0..97).map(|i| i % 3).collect();
        let a = stratified_kfold(&y, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = stratified_kfold(&y, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        // union of eval folds covers every sample exactly once
        let mut seen = vec![0usize; y.len()];
        for fold in 0..5 {
            for r in a.eval_rows(fold) {
                seen[r] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn stratified_fold_rejects_small_class() {
        let y = vec![0, 0, 0, 0, 0, 1, 1];
        let err = stratified_kfold(&y, 5, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(DataError::Stratification { class: 1, .. })));
    }

    #[test]
    fn standardize_matches_population_formula() {
        let train = vec![1.0, 2.0, 3.0];
        let eval = vec![2.0];
        let (t, e, stats) = standardize_fit_transform(&train, &eval, 1);
        let expect = 1.224744871391589;
        assert!((t[0] + expect).abs() < 1e-12);
        assert!(t[1].abs() < 1e-12);
        assert!((t[2] - expect).abs() < 1e-12);
        // eval row equal to the train mean maps to zero
        assert!(e[0].abs() < 1e-12);
        assert!((stats.means[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_constant_column_clamped() {
        let train = vec![5.0, 5.0, 5.0, 5.0];
        let (t, _, _) = standardize_fit_transform(&train, &[], 1);
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_train_stats_ignore_eval() {
        let train = vec![0.5, -1.0, 2.0, 0.25];
        let (_, _, a) = standardize_fit_transform(&train, &[9.0, 9.0], 2);
        let (_, _, b) = standardize_fit_transform(&train, &[-3.0, 70.0], 2);
        assert_eq!(a.means, b.means);
        assert_eq!(a.stds, b.stds);
    }

    #[test]
    fn batch_iter_group_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut log = HashSet::new();
        let batches = batch_iter(64, 10, 32, 4, &HashSet::new(), &mut log, &mut rng);
        assert_eq!(batches.len(), 2);
        for b in &batches {
            assert_eq!(b.groups.len(), 4);
            for (_, start, end) in &b.groups {
                assert_eq!(end - start, 8);
            }
            // groups tile the batch contiguously
            assert_eq!(b.groups[0].1, 0);
            assert_eq!(b.groups.last().unwrap().2, b.rows.len());
        }
        assert!(!log.is_empty());
    }

    #[test]
    fn batch_iter_k1_single_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut log = HashSet::new();
        let batches = batch_iter(100, 6, 32, 1, &HashSet::new(), &mut log, &mut rng);
        for b in &batches {
            assert_eq!(b.groups.len(), 1);
            assert_eq!(b.groups[0].2 - b.groups[0].1, b.rows.len());
        }
    }

    #[test]
    fn batch_iter_mask_stream_uniform_cardinalities() {
        // with K=1 the mask stream inherits the cardinality-first law
        let m = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; m + 1];
        let mut total = 0usize;
        for _ in 0..100 {
            let mut log = HashSet::new();
            let batches = batch_iter(320, m, 32, 1, &HashSet::new(), &mut log, &mut rng);
            for b in batches {
                counts[b.groups[0].0.cardinality()] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / m as f64;
        let chi2: f64 = (1..=m)
            .map(|k| {
                let d = counts[k] as f64 - expected;
                d * d / expected
            })
            .sum();
        let crit = crate::stats::chi_squared_critical(m as f64 - 1.0, 0.01);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn batch_iter_respects_exclusions() {
        let m = 4;
        let mut excluded = HashSet::new();
        // exclude every mask of cardinality 1
        for i in 0..m {
            excluded.insert(KnowledgeStatus::from_indices(m, &[i]).key());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut log = HashSet::new();
        let batches = batch_iter(512, m, 8, 2, &excluded, &mut log, &mut rng);
        for b in batches {
            for (s, _, _) in b.groups {
                assert!(s.cardinality() >= 2);
            }
        }
        assert!(log.is_disjoint(&excluded));
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(vec![1.5, -2.25, 0.0, 3.125, 7.5, -0.125], vec![0, 1], 3, 2);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.feature_names, ds.feature_names);
        // byte-stability of the writer
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn csv_requires_label_column() {
        let text = "a,b\n1,2\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes()),
            Err(DataError::MissingLabelColumn)
        ));
    }

    #[test]
    fn csv_rejects_bad_label() {
        let text = "x1,label\n1.0,-3\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes()),
            Err(DataError::BadLabel { .. })
        ));
    }

    #[test]
    fn fold_eval_union_covers_everything_once() {
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let split = stratified_kfold(&y, 4, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for fold in 0..4 {
            for r in split.eval_rows(fold) {
                *counts.entry(r).or_default() += 1;
            }
        }
        assert_eq!(counts.len(), 40);
        assert!(counts.values().all(|&v| v == 1));
    }
}
