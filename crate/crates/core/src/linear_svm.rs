//! One-vs-rest linear SVM, `y = W φ + v`, trained by SGD on the ℓ2-regularized
//! hinge loss.
//!
//! Each class `k` is a binary problem with labels `±1`. At step `t` with
//! `η_t = 1 / (λ (t + t0))`:
//!
//! ```text
//! w_k ← (1 - η_t λ) w_k
//! if y (w_k · x + v_k) < 1:  w_k ← w_k + η_t y x,  v_k ← v_k + η_t y
//! ```
//!
//! The margin is evaluated before the update and the bias is not regularized.
//! The weight decay is kept as a separate scalar per class so that each step
//! only touches `x` when the margin is violated.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl LinearModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weights: Array2::zeros((classes, dim)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::mismatch(
                format!("{} biases", weights.nrows()),
                format!("{} biases", bias.len()),
            ));
        }
        if weights.nrows() == 0 {
            return Err(Error::Empty("model without classes"));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("model weights must be finite".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn class_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// `K x m̃` weight matrix.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Same model with `(W, v)` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: &self.weights * factor,
            bias: &self.bias * factor,
        }
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn rounded_to_f32(&self) -> Self {
        Self {
            weights: self.weights.mapv(|w| w as f32 as f64),
            bias: self.bias.mapv(|w| w as f32 as f64),
        }
    }

    /// Scores for every row of `phis` (`n x m̃`), returned as `n x K`.
    pub fn scores_batch(&self, phis: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if phis.ncols() != self.dim() {
            return Err(Error::mismatch(self.dim(), phis.ncols()));
        }
        Ok(phis.dot(&self.weights.t()) + &self.bias)
    }
}

/// `W φ + v`.
pub fn predict_scores(model: &LinearModel, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != model.dim() {
        return Err(Error::mismatch(model.dim(), phi.len()));
    }
    let phi = ArrayView1::from(phi);
    Ok(model
        .weights
        .outer_iter()
        .zip(&model.bias)
        .map(|(w, b)| w.dot(&phi) + b)
        .collect())
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

pub fn predict_class(model: &LinearModel, phi: &[f64]) -> Result<usize> {
    Ok(argmax(&predict_scores(model, phi)?))
}

/// Dense training set: one feature row per sample plus its class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::mismatch(
                format!("{} labels", features.nrows()),
                format!("{} labels", labels.len()),
            ));
        }
        Ok(Self { features, labels })
    }

    pub fn from_pairs(samples: &[(Vec<f64>, usize)]) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("no training samples"))?;
        let dim = first.0.len();
        if let Some((bad, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
            return Err(Error::mismatch(dim, bad.len()));
        }
        let flat: Vec<f64> = samples.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let features = Array2::from_shape_vec((samples.len(), dim), flat).expect("shape checked");
        Self::new(features, samples.iter().map(|(_, y)| *y).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Learning-rate offset; `None` calibrates it on a subsample.
    pub t0: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 5,
            seed: 0,
            t0: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("at least one epoch is required".into()));
        }
        if let Some(t0) = self.t0 {
            if !(t0 >= 1.0 && t0.is_finite()) {
                return Err(Error::Config(format!("t0 must be >= 1, got {t0}")));
            }
        }
        Ok(())
    }
}

/// Outcome of [`train_with_trace`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Final model, rounded to `f32` storage precision.
    pub model: LinearModel,
    /// Training objective after each epoch.
    pub epoch_objectives: Vec<f64>,
    pub t0: f64,
}

/// Initial step sizes `η_0` probed when calibrating `t0 = 1 / (λ η_0)`.
const ETA0_GRID: [f64; 9] = [10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001];

struct Sgd {
    directions: Array2<f64>,
    scales: Vec<f64>,
    bias: Vec<f64>,
    lambda: f64,
    t0: f64,
    t: u64,
}

impl Sgd {
    fn new(classes: usize, dim: usize, lambda: f64, t0: f64) -> Self {
        Self {
            directions: Array2::zeros((classes, dim)),
            scales: vec![1.0; classes],
            bias: vec![0.0; classes],
            lambda,
            t0,
            t: 0,
        }
    }

    fn step(&mut self, x: ArrayView1<'_, f64>, label: usize) {
        let eta = 1.0 / (self.lambda * (self.t as f64 + self.t0));
        let decay = 1.0 - eta * self.lambda;
        for (k, mut u) in self.directions.outer_iter_mut().enumerate() {
            let y = if k == label { 1.0 } else { -1.0 };
            let margin = y * (self.scales[k] * u.dot(&x) + self.bias[k]);
            if decay <= 0.0 {
                u.fill(0.0);
                self.scales[k] = 1.0;
            } else {
                self.scales[k] *= decay;
                if self.scales[k] < 1e-9 {
                    u *= self.scales[k];
                    self.scales[k] = 1.0;
                }
            }
            if margin < 1.0 {
                u.scaled_add(eta * y / self.scales[k], &x);
                self.bias[k] += eta * y;
            }
        }
        self.t += 1;
    }

    fn epoch(&mut self, set: &TrainingSet, order: &[usize]) {
        for &r in order {
            self.step(set.features.row(r), set.labels[r]);
        }
    }

    fn model(&self) -> LinearModel {
        let mut weights = self.directions.clone();
        for (mut row, s) in weights.outer_iter_mut().zip(&self.scales) {
            row *= *s;
        }
        LinearModel {
            weights,
            bias: Array1::from(self.bias.clone()),
        }
    }
}

fn check_set(set: &TrainingSet, classes: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty("no training samples"));
    }
    if classes == 0 {
        return Err(Error::Config("class count must be positive".into()));
    }
    if let Some(&bad) = set.labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Config(format!("class id {bad} out of range for {classes} classes")));
    }
    Ok(())
}

/// Picks the `t0` whose single epoch over a small subsample reaches the
/// lowest objective. The subsample is 1% of the set but at least
/// `min(len, 500)` samples.
pub fn calibrate_t0(set: &TrainingSet, classes: usize, lambda: f64, seed: u64) -> Result<f64> {
    check_set(set, classes)?;
    let n = set.len();
    let size = n.div_ceil(100).max(n.min(500));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7430_7430);
    let mut rows = index::sample(&mut rng, n, size).into_vec();
    rows.sort_unstable();
    let sub = set.subset(&rows);
    let mut order: Vec<usize> = (0..sub.len()).collect();
    order.shuffle(&mut rng);

    let mut best = (f64::INFINITY, 1.0);
    for eta0 in ETA0_GRID {
        let t0 = (1.0 / (lambda * eta0)).max(1.0);
        let mut sgd = Sgd::new(classes, set.dim(), lambda, t0);
        sgd.epoch(&sub, &order);
        let obj = hinge_objective(&sgd.model(), &sub, lambda)?;
        if obj < best.0 {
            best = (obj, t0);
        }
    }
    Ok(best.1)
}

/// Trains and records the objective after every epoch.
pub fn train_with_trace(set: &TrainingSet, classes: usize, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    check_set(set, classes)?;
    let t0 = match config.t0 {
        Some(t0) => t0,
        None => calibrate_t0(set, classes, config.lambda, config.seed)?,
    };
    let mut sgd = Sgd::new(classes, set.dim(), config.lambda, t0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut epoch_objectives = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        sgd.epoch(set, &order);
        epoch_objectives.push(hinge_objective(&sgd.model(), set, config.lambda)?);
    }
    Ok(TrainReport {
        model: sgd.model().rounded_to_f32(),
        epoch_objectives,
        t0,
    })
}

pub fn train(set: &TrainingSet, classes: usize, config: &TrainConfig) -> Result<LinearModel> {
    Ok(train_with_trace(set, classes, config)?.model)
}

/// Mean over classes and samples of `max(0, 1 - y_k (w_k·x + v_k))`, plus
/// `(λ/2) Σ_k ‖w_k‖²`.
pub fn hinge_objective(model: &LinearModel, set: &TrainingSet, lambda: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("no samples to evaluate"));
    }
    let scores = model.scores_batch(set.features.view())?;
    let mut hinge = 0.0;
    for (row, &label) in scores.outer_iter().zip(&set.labels) {
        for (k, s) in row.iter().enumerate() {
            let y = if k == label { 1.0 } else { -1.0 };
            hinge += (1.0 - y * s).max(0.0);
        }
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    Ok(hinge / (set.len() * model.class_count()) as f64 + 0.5 * lambda * reg)
}

/// Fraction of samples whose predicted class matches the label.
pub fn accuracy(model: &LinearModel, set: &TrainingSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("no samples to evaluate"));
    }
    let scores = model.scores_batch(set.features.view())?;
    let hits = scores
        .outer_iter()
        .zip(&set.labels)
        .filter(|(row, &y)| argmax(row.as_slice().expect("contiguous")) == y)
        .count();
    Ok(hits as f64 / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centers = [[2.0, 0.0, 1.0], [-2.0, 0.5, -1.0]];
        let pairs: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|k| {
                let c = k % 2;
                (centers[c].iter().map(|m| m + noise.sample(&mut rng)).collect(), c)
            })
            .collect();
        TrainingSet::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn separable_blobs() {
        let set = blobs(200, 1);
        let cfg = TrainConfig { lambda: 1e-3, ..Default::default() };
        let report = train_with_trace(&set, 2, &cfg).unwrap();
        assert!(accuracy(&report.model, &set).unwrap() >= 0.99);
        assert!(accuracy(&report.model, &blobs(200, 2)).unwrap() >= 0.95);
        let zero = hinge_objective(&LinearModel::zeros(2, 3), &set, cfg.lambda).unwrap();
        assert_eq!(zero, 1.0);
        assert!(hinge_objective(&report.model, &set, cfg.lambda).unwrap() <= zero);
        // determinism
        assert_eq!(train(&set, 2, &cfg).unwrap(), report.model);
    }

    #[test]
    fn identical_features() {
        let pairs: Vec<_> = (0..100).map(|k| (vec![0.5, 0.5], k % 2)).collect();
        let set = TrainingSet::from_pairs(&pairs).unwrap();
        let model = train(&set, 2, &TrainConfig { lambda: 1e-2, ..Default::default() }).unwrap();
        let acc = accuracy(&model, &set).unwrap();
        assert!((acc - 0.5).abs() < 1e-12, "{acc}");
        let obj = hinge_objective(&model, &set, 1e-2).unwrap();
        assert!((obj - 1.0).abs() < 0.1, "{obj}");
    }

    #[test]
    fn errors() {
        let set = TrainingSet::from_pairs(&[(vec![1.0], 0), (vec![2.0], 3)]).unwrap();
        assert!(train(&set, 2, &TrainConfig::default()).is_err());
        assert!(TrainingSet::from_pairs(&[]).is_err());
        assert!(train(&set, 4, &TrainConfig { lambda: 0.0, ..Default::default() }).is_err());
        assert!(predict_scores(&LinearModel::zeros(2, 3), &[1.0]).is_err());
    }

    #[test]
    fn scoring() {
        assert_eq!(predict_scores(&LinearModel::zeros(3, 4), &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
        let w = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let m = LinearModel::new(w.clone(), Array1::zeros(2)).unwrap();
        assert_eq!(predict_scores(&m, &[0.0, 1.0, 0.0]).unwrap(), vec![2.0, 5.0]);

        let m = LinearModel::new(w, array![0.5, -1.0]).unwrap();
        let phi = [0.3, -0.2, 0.9];
        let brute: Vec<f64> = (0..2)
            .map(|k| (0..3).map(|j| m.weights()[[k, j]] * phi[j]).sum::<f64>() + m.bias()[k])
            .collect();
        let s = predict_scores(&m, &phi).unwrap();
        for (a, b) in s.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(predict_class(&m, &phi).unwrap(), argmax(&brute));
        assert_eq!(predict_class(&m.scaled(3.5), &phi).unwrap(), predict_class(&m, &phi).unwrap());
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn hand_computed_objective() {
        // samples: x1=(1,0) class 0, x2=(0,1) class 1, x3=(1,1) class 0
        // W = [[1, -1], [0, 0.5]], v = [0, -0.25], lambda = 0.1
        // scores: x1 (1, -0.25)  x2 (-1, 0.25)  x3 (0, 0.25)
        // hinge class0: y=(+1,-1,+1): max(0,1-1)=0, max(0,1-1)=0, max(0,1-0)=1
        // hinge class1: y=(-1,+1,-1): 1-0.25=0.75, 1-0.25=0.75, 1+0.25=1.25
        // mean = (0+0+1+0.75+0.75+1.25)/6 = 3.75/6 = 0.625
        // reg = 0.05 * (1 + 1 + 0.25) = 0.1125
        let set = TrainingSet::from_pairs(&[(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1), (vec![1.0, 1.0], 0)]).unwrap();
        let m = LinearModel::new(array![[1.0, -1.0], [0.0, 0.5]], array![0.0, -0.25]).unwrap();
        let obj = hinge_objective(&m, &set, 0.1).unwrap();
        assert!((obj - 0.7375).abs() < 1e-12, "{obj}");
    }

    #[test]
    fn objective_decreases_on_average() {
        let set = blobs(400, 3);
        let mut mean = vec![0.0; 5];
        for seed in 0..10 {
            let cfg = TrainConfig { lambda: 1e-2, seed, ..Default::default() };
            let r = train_with_trace(&set, 2, &cfg).unwrap();
            for (m, o) in mean.iter_mut().zip(&r.epoch_objectives) {
                *m += o / 10.0;
            }
        }
        for w in mean.windows(2) {
            assert!(w[1] <= w[0] * 1.01, "{mean:?}");
        }
    }
}
