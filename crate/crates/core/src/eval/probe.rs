use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::optim::{amsgrad_update, AmsGradConfig};
use crate::rng::{stream, Purpose};

/// Settings for a softmax-regression probe on frozen representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Share of rows used for fitting; the rest measure accuracy.
    pub train_fraction: f64,
    pub iterations: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            iterations: 500,
            lr: 0.05,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

fn with_bias(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::ones((x.nrows(), x.ncols() + 1));
    out.slice_mut(s![.., ..x.ncols()]).assign(&x);
    out
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn accuracy(x: &Array2<f64>, labels: &[usize], w: &Array2<f64>) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let logits = x.dot(&w.t());
    let correct = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &y)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc });
            best.0 == y
        })
        .count();
    correct as f64 / labels.len() as f64
}

/// Fits a multinomial logistic regression (with bias) from `reps` to `labels`
/// on a random subset of rows and reports accuracy on both parts.
pub fn linear_probe(reps: ArrayView2<f64>, labels: &[usize], num_classes: usize, config: &ProbeConfig) -> Result<ProbeReport> {
    if reps.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} rows for {} labels", reps.nrows(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::OutOfRange {
            what: "class",
            index: bad,
            len: num_classes,
        });
    }
    if !(config.train_fraction > 0.0 && config.train_fraction <= 1.0) {
        return Err(Error::Config(format!("train_fraction must lie in (0, 1], got {}", config.train_fraction)));
    }
    let n_train = ((labels.len() as f64) * config.train_fraction).round() as usize;
    if n_train == 0 {
        return Err(Error::Empty("probe training rows"));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut stream(config.seed, Purpose::Probe, 0, 0));
    let (train_rows, test_rows) = order.split_at(n_train);
    let x = with_bias(reps);
    let pick = |rows: &[usize]| (x.select(Axis(0), rows), rows.iter().map(|&r| labels[r]).collect::<Vec<_>>());
    let (x_train, y_train) = pick(train_rows);
    let (x_test, y_test) = pick(test_rows);

    let mut onehot = Array2::<f64>::zeros((n_train, num_classes));
    for (r, &y) in y_train.iter().enumerate() {
        onehot[[r, y]] = 1.0;
    }
    let cfg = AmsGradConfig {
        lr: config.lr,
        ..Default::default()
    };
    let shape = (num_classes, x.ncols());
    let mut w = Array2::<f64>::zeros(shape);
    let (mut m, mut v, mut v_hat) = (Array2::zeros(shape), Array2::zeros(shape), Array2::zeros(shape));
    for _ in 0..config.iterations {
        let mut p = x_train.dot(&w.t());
        softmax_rows(&mut p);
        p -= &onehot;
        let grad = p.t().dot(&x_train) / n_train as f64 + &(&w * config.l2);
        ndarray::Zip::from(&mut w)
            .and(&grad)
            .and(&mut m)
            .and(&mut v)
            .and(&mut v_hat)
            .for_each(|t, &g, m, v, vh| amsgrad_update(t, g, m, v, vh, &cfg));
    }
    Ok(ProbeReport {
        train_accuracy: accuracy(&x_train, &y_train, &w),
        test_accuracy: accuracy(&x_test, &y_test, &w),
    })
}

/// Held-out category accuracy of a probe on the item rows of `item_reps`.
pub fn category_probe(item_reps: ArrayView2<f64>, categories: &[usize], num_categories: usize, config: &ProbeConfig) -> Result<f64> {
    Ok(linear_probe(item_reps, categories, num_categories, config)?.test_accuracy)
}
