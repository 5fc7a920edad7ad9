use ndarray::{Array2, ArrayViewMut1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmsGradConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First moment, second moment and running maximum of the second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub v_hat: Array2<f64>,
}

impl Moments {
    fn zeros(shape: (usize, usize)) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            v_hat: Array2::zeros(shape),
        }
    }
}

/// One AMSGrad update of a single coordinate (no bias correction).
#[inline]
pub fn amsgrad_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, v_hat: &mut f64, cfg: &AmsGradConfig) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    *v_hat = v_hat.max(*v);
    *theta -= cfg.lr * *m / (v_hat.sqrt() + cfg.epsilon);
}

fn update_dense(theta: &mut Array2<f64>, grad: &Array2<f64>, state: &mut Moments, cfg: &AmsGradConfig) {
    Zip::from(theta)
        .and(grad)
        .and(&mut state.m)
        .and(&mut state.v)
        .and(&mut state.v_hat)
        .for_each(|t, &g, m, v, vh| amsgrad_update(t, g, m, v, vh, cfg));
}

fn update_row(
    theta: ArrayViewMut1<f64>,
    grad: ndarray::ArrayView1<f64>,
    m: ArrayViewMut1<f64>,
    v: ArrayViewMut1<f64>,
    v_hat: ArrayViewMut1<f64>,
    cfg: &AmsGradConfig,
) {
    Zip::from(theta)
        .and(grad)
        .and(m)
        .and(v)
        .and(v_hat)
        .for_each(|t, &g, m, v, vh| amsgrad_update(t, g, m, v, vh, cfg));
}

/// AMSGrad over all model tensors. Embedding rows absent from a sparse
/// gradient are left untouched, moments included.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsGrad {
    pub config: AmsGradConfig,
    pub embeddings: Moments,
    pub conv: Vec<Moments>,
    pub classifier: Moments,
    pub steps: u64,
}

impl AmsGrad {
    pub fn new(config: AmsGradConfig, params: &ModelParameters) -> Self {
        Self {
            config,
            embeddings: Moments::zeros(params.embeddings.dim()),
            conv: params.conv.iter().map(|w| Moments::zeros(w.dim())).collect(),
            classifier: Moments::zeros(params.classifier.dim()),
            steps: 0,
        }
    }

    fn check(&self, params: &ModelParameters, grads: &Gradients) -> Result<()> {
        let finite = |name: String, a: &Array2<f64>| {
            if a.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFinite(name))
            }
        };
        let e = &grads.embeddings;
        if e.values.dim() != (e.rows.len(), params.dim()) || e.rows.iter().any(|&r| r >= params.embeddings.nrows()) {
            return Err(Error::Shape("embedding gradient rows do not fit the table".into()));
        }
        finite("embeddings".into(), &e.values)?;
        if grads.conv.len() != params.conv.len() {
            return Err(Error::Shape(format!("{} conv gradients for depth {}", grads.conv.len(), params.depth())));
        }
        for (k, (g, w)) in grads.conv.iter().zip(&params.conv).enumerate() {
            if g.dim() != w.dim() {
                return Err(Error::Shape(format!("conv[{k}] gradient {:?} vs {:?}", g.dim(), w.dim())));
            }
            finite(format!("conv[{k}]"), g)?;
        }
        if grads.classifier.dim() != params.classifier.dim() {
            return Err(Error::Shape("classifier gradient shape".into()));
        }
        finite("classifier".into(), &grads.classifier)
    }

    /// Applies one step. Nothing is modified if any gradient is malformed or non-finite.
    pub fn step(&mut self, params: &mut ModelParameters, grads: &Gradients) -> Result<()> {
        self.check(params, grads)?;
        let cfg = self.config;
        for (r, &row) in grads.embeddings.rows.iter().enumerate() {
            update_row(
                params.embeddings.row_mut(row),
                grads.embeddings.values.row(r),
                self.embeddings.m.row_mut(row),
                self.embeddings.v.row_mut(row),
                self.embeddings.v_hat.row_mut(row),
                &cfg,
            );
        }
        for ((w, g), s) in params.conv.iter_mut().zip(&grads.conv).zip(&mut self.conv) {
            update_dense(w, g, s, &cfg);
        }
        update_dense(&mut params.classifier, &grads.classifier, &mut self.classifier, &cfg);
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseRows;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn scalar_first_step() {
        let cfg = AmsGradConfig::default();
        let (mut t, mut m, mut v, mut vh) = (0.0, 0.0, 0.0, 0.0);
        amsgrad_update(&mut t, 1.0, &mut m, &mut v, &mut vh, &cfg);
        assert!((m - 0.1).abs() < 1e-15);
        assert!((v - 0.001).abs() < 1e-15);
        assert_eq!(vh, v);
        assert!((t - -3.16227e-3).abs() < 1e-8, "{t}");
    }

    #[test]
    fn v_hat_holds_after_zero_gradient() {
        let cfg = AmsGradConfig::default();
        let (mut t, mut m, mut v, mut vh) = (0.0, 0.0, 0.0, 0.0);
        amsgrad_update(&mut t, 1.0, &mut m, &mut v, &mut vh, &cfg);
        let after_first = vh;
        amsgrad_update(&mut t, 0.0, &mut m, &mut v, &mut vh, &cfg);
        assert_eq!(vh, after_first);
        assert!(v < vh);
    }

    fn zero_grads(p: &ModelParameters, rows: Vec<usize>) -> Gradients {
        Gradients {
            embeddings: SparseRows {
                values: Array2::zeros((rows.len(), p.dim())),
                rows,
            },
            conv: p.conv.iter().map(|w| Array2::zeros(w.dim())).collect(),
            classifier: Array2::zeros(p.classifier.dim()),
        }
    }

    #[test]
    fn zero_gradient_on_fresh_state_is_noop() {
        let mut p = ModelParameters::init(2, 3, 2, 4, 2, &mut seeded(0)).unwrap();
        let before = p.clone();
        let mut opt = AmsGrad::new(AmsGradConfig::default(), &p);
        let g = zero_grads(&p, vec![0, 3]);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn untouched_rows_are_skipped() {
        let mut p = ModelParameters::init(2, 3, 2, 4, 1, &mut seeded(0)).unwrap();
        let before = p.clone();
        let mut opt = AmsGrad::new(AmsGradConfig::default(), &p);
        let mut g = zero_grads(&p, vec![1]);
        g.embeddings.values.fill(1.0);
        opt.step(&mut p, &g).unwrap();
        for r in 0..5 {
            assert_eq!(p.embeddings.row(r) == before.embeddings.row(r), r != 1, "row {r}");
        }
        assert!(opt.embeddings.m.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = ModelParameters::init(1, 1, 1, 2, 2, &mut seeded(0)).unwrap();
        let before = p.clone();
        let mut opt = AmsGrad::new(AmsGradConfig::default(), &p);
        let mut g = zero_grads(&p, vec![0]);
        g.embeddings.values.fill(1.0);
        g.conv[1][[0, 1]] = f64::INFINITY;
        match opt.step(&mut p, &g) {
            Err(Error::NonFinite(name)) => assert_eq!(name, "conv[1]"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p, before);
    }

    proptest! {
        #[test]
        fn v_hat_dominates_and_grows(gs in prop::collection::vec(-5.0..5.0f64, 1..50)) {
            let cfg = AmsGradConfig::default();
            let (mut t, mut m, mut v, mut vh) = (0.0, 0.0, 0.0, 0.0);
            for g in gs {
                let prev = vh;
                amsgrad_update(&mut t, g, &mut m, &mut v, &mut vh, &cfg);
                prop_assert!(vh >= v && vh >= prev);
            }
        }
    }
}
