use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

pub const EMBEDDING_INIT_BOUND: f64 = 0.05;

/// Embedding table (users first, then items), one `d x d` matrix per graph
/// convolution, and the `categories x d` adversarial classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    num_users: usize,
    pub embeddings: Array2<f64>,
    pub conv: Vec<Array2<f64>>,
    pub classifier: Array2<f64>,
}

impl ModelParameters {
    pub fn from_parts(
        num_users: usize,
        embeddings: Array2<f64>,
        conv: Vec<Array2<f64>>,
        classifier: Array2<f64>,
    ) -> Result<Self> {
        let params = Self {
            num_users,
            embeddings,
            conv,
            classifier,
        };
        params.validate()?;
        Ok(params)
    }

    /// Embeddings ~ U(-0.05, 0.05); conv and classifier ~ U(-1/sqrt(d), 1/sqrt(d)).
    pub fn init<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        num_categories: usize,
        dim: usize,
        depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || depth == 0 || num_categories == 0 {
            return Err(Error::Config("dim, depth and category count must be positive".into()));
        }
        let emb = Uniform::new(-EMBEDDING_INIT_BOUND, EMBEDDING_INIT_BOUND).expect("valid bounds");
        let bound = 1.0 / (dim as f64).sqrt();
        let dense = Uniform::new(-bound, bound).expect("valid bounds");
        let mut fill = |rows, cols, dist: &Uniform<f64>| Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng));
        let embeddings = fill(num_users + num_items, dim, &emb);
        let conv = (0..depth).map(|_| fill(dim, dim, &dense)).collect();
        let classifier = fill(num_categories, dim, &dense);
        Self::from_parts(num_users, embeddings, conv, classifier)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.embeddings.nrows() - self.num_users
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn depth(&self) -> usize {
        self.conv.len()
    }

    pub fn num_categories(&self) -> usize {
        self.classifier.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.num_users > self.embeddings.nrows() {
            return Err(Error::Shape("more users than embedding rows".into()));
        }
        if self.conv.is_empty() {
            return Err(Error::Shape("model needs at least one convolution".into()));
        }
        if let Some(w) = self.conv.iter().find(|w| w.dim() != (d, d)) {
            return Err(Error::Shape(format!("conv weight {:?}, expected ({d}, {d})", w.dim())));
        }
        if self.classifier.ncols() != d || self.classifier.nrows() == 0 {
            return Err(Error::Shape(format!("classifier {:?} with dim {d}", self.classifier.dim())));
        }
        let finite = |a: &Array2<f64>| a.iter().all(|x| x.is_finite());
        if !finite(&self.embeddings) || !self.conv.iter().all(finite) || !finite(&self.classifier) {
            return Err(Error::Shape("parameters contain non-finite entries".into()));
        }
        Ok(())
    }
}
