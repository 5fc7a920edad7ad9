use ndarray::{Array2, ArrayViewMut1, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::NodeFlow;

use super::ModelParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One graph convolution: `hidden = tanh(aggregated · Wᵀ)`, optionally followed by
/// an inverted-dropout mask (entries `0` or `1 / (1 - p)`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub aggregated: Array2<f64>,
    pub hidden: Array2<f64>,
    pub mask: Option<Array2<f64>>,
}

impl LayerTrace {
    /// What the next layer sees.
    pub fn output(&self) -> Array2<f64> {
        match &self.mask {
            Some(mask) => &self.hidden * mask,
            None => self.hidden.clone(),
        }
    }
}

/// Activations of every layer for one node flow.
///
/// Layer `k` (1-based) computes representations for `hop(K - k)` from those of
/// `hop(K - k + 1)` using `block(K - k + 1)`; `input` holds the embedding rows of
/// `hop(K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub mode: Mode,
    pub input: Array2<f64>,
    pub layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    /// Final representations, rows aligned with the node flow seeds.
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("at least one layer").hidden
    }

    pub fn masks(&self) -> Vec<Option<Array2<f64>>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }
}

pub(crate) fn mean_aggregate(lists: &[Vec<usize>], input: &Array2<f64>) -> Array2<f64> {
    let mut agg = Array2::zeros((lists.len(), input.ncols()));
    for (mut row, list) in agg.rows_mut().into_iter().zip(lists) {
        for &q in list {
            row += &input.row(q);
        }
        row /= list.len() as f64;
    }
    agg
}

pub(crate) fn convolve(aggregated: &Array2<f64>, weight: &Array2<f64>) -> Array2<f64> {
    aggregated.dot(&weight.t()).mapv_into(f64::tanh)
}

fn run(
    nodeflow: &NodeFlow,
    params: &ModelParameters,
    mode: Mode,
    mut mask_for: impl FnMut(usize, (usize, usize)) -> Result<Option<Array2<f64>>>,
) -> Result<ForwardTrace> {
    let depth = params.depth();
    if nodeflow.depth() != depth {
        return Err(Error::Shape(format!(
            "node flow depth {} does not match model depth {depth}",
            nodeflow.depth()
        )));
    }
    let rows = nodeflow.hop(depth);
    if let Some(&bad) = rows.iter().find(|&&v| v >= params.embeddings.nrows()) {
        return Err(Error::UnknownNode(bad));
    }
    let input = params.embeddings.select(ndarray::Axis(0), rows);
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(depth);
    for k in 1..=depth {
        let aggregated = {
            let current = layers.last().map(LayerTrace::output);
            mean_aggregate(nodeflow.block(depth - k + 1), current.as_ref().unwrap_or(&input))
        };
        let hidden = convolve(&aggregated, &params.conv[k - 1]);
        let mask = if k < depth { mask_for(k, hidden.dim())? } else { None };
        layers.push(LayerTrace {
            aggregated,
            hidden,
            mask,
        });
    }
    Ok(ForwardTrace { mode, input, layers })
}

/// Forward pass. Train mode drops intermediate representations between
/// consecutive convolutions with probability `dropout`; eval mode is deterministic.
pub fn forward<R: Rng + ?Sized>(
    nodeflow: &NodeFlow,
    params: &ModelParameters,
    dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardTrace> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Config(format!("dropout probability must lie in [0, 1), got {dropout}")));
    }
    run(nodeflow, params, mode, |_, shape| {
        if mode == Mode::Eval || dropout == 0.0 {
            return Ok(None);
        }
        let scale = 1.0 / (1.0 - dropout);
        Ok(Some(Array2::from_shape_simple_fn(shape, || {
            if rng.random::<f64>() < dropout {
                0.0
            } else {
                scale
            }
        })))
    })
}

/// Forward pass reusing the dropout masks of an earlier trace.
pub fn forward_with_masks(
    nodeflow: &NodeFlow,
    params: &ModelParameters,
    masks: &[Option<Array2<f64>>],
) -> Result<ForwardTrace> {
    if masks.len() != params.depth() {
        return Err(Error::Shape(format!("{} masks for depth {}", masks.len(), params.depth())));
    }
    let mode = if masks.iter().any(Option::is_some) { Mode::Train } else { Mode::Eval };
    run(nodeflow, params, mode, |k, shape| match &masks[k - 1] {
        Some(m) if m.dim() != shape => Err(Error::Shape(format!("mask {:?}, expected {shape:?}", m.dim()))),
        other => Ok(other.clone()),
    })
}

/// `row *= 1 - hidden²`, the tanh derivative expressed through its output.
pub(crate) fn tanh_backward(mut grad: ArrayViewMut1<f64>, hidden: ndarray::ArrayView1<f64>) {
    Zip::from(&mut grad).and(&hidden).for_each(|g, &h| *g *= 1.0 - h * h);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BipartiteGraph, ItemCategoryTable};
    use crate::rng::seeded;
    use crate::sampling::discover_neighbors;
    use ndarray::array;

    fn one_edge() -> (BipartiteGraph, NodeFlow) {
        let g = BipartiteGraph::from_edges(1, 1, [(0, 0)]);
        let nf = NodeFlow::full(&g, &[0], 1).unwrap();
        (g, nf)
    }

    #[test]
    fn hand_computed_single_layer() {
        let (_, nf) = one_edge();
        let params = ModelParameters::from_parts(
            1,
            array![[0.0, 0.0], [2.0, 0.0]],
            vec![Array2::eye(2)],
            Array2::zeros((1, 2)),
        )
        .unwrap();
        let trace = forward(&nf, &params, 0.0, Mode::Eval, &mut seeded(0)).unwrap();
        assert_eq!(trace.layers[0].aggregated, array![[1.0, 0.0]]);
        assert!((trace.output()[[0, 0]] - 0.761594).abs() < 1e-6);
        assert_eq!(trace.output()[[0, 1]], 0.0);
    }

    #[test]
    fn isolated_zero_embedding_stays_zero() {
        let g = BipartiteGraph::from_edges(2, 1, [(0, 0)]);
        let nf = NodeFlow::full(&g, &[1], 2).unwrap();
        let mut params = ModelParameters::init(2, 1, 1, 3, 2, &mut seeded(1)).unwrap();
        params.embeddings.row_mut(1).fill(0.0);
        let trace = forward(&nf, &params, 0.0, Mode::Eval, &mut seeded(0)).unwrap();
        assert!(trace.output().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn eval_is_deterministic_and_unmasked() {
        let g = BipartiteGraph::from_edges(3, 4, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 0)]);
        let t = ItemCategoryTable::new(vec![0, 1, 0, 1], 2).unwrap();
        let nf = discover_neighbors(&g, &[0, 1, 4], 2, 2, &t, 1.0, &mut seeded(2)).unwrap();
        let params = ModelParameters::init(3, 4, 2, 4, 2, &mut seeded(3)).unwrap();
        let a = forward(&nf, &params, 0.5, Mode::Eval, &mut seeded(4)).unwrap();
        let b = forward(&nf, &params, 0.5, Mode::Eval, &mut seeded(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.layers.iter().all(|l| l.mask.is_none()));
        let train = forward(&nf, &params, 0.5, Mode::Train, &mut seeded(4)).unwrap();
        assert!(train.layers[0].mask.is_some() && train.layers[1].mask.is_none());
        for l in a.layers.iter().chain(&train.layers) {
            assert!(l.hidden.iter().all(|x| x.abs() < 1.0));
        }
        let replay = forward_with_masks(&nf, &params, &train.masks()).unwrap();
        assert_eq!(replay, train);
    }

    #[test]
    fn depth_mismatch_rejected() {
        let (_, nf) = one_edge();
        let params = ModelParameters::init(1, 1, 1, 2, 2, &mut seeded(0)).unwrap();
        assert!(matches!(forward(&nf, &params, 0.0, Mode::Eval, &mut seeded(0)), Err(Error::Shape(_))));
    }

    #[test]
    fn dropout_is_unbiased() {
        // averaged over masks, the dropped-and-scaled representation equals the eval one
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 1)]);
        let nf = NodeFlow::full(&g, &[0, 3], 2).unwrap();
        let params = ModelParameters::init(2, 2, 1, 3, 2, &mut seeded(6)).unwrap();
        let p = 0.3;
        let eval = forward(&nf, &params, p, Mode::Eval, &mut seeded(0)).unwrap().layers[0].output();
        let trials = 10_000;
        let mut rng = seeded(8);
        let mut sum = Array2::<f64>::zeros(eval.dim());
        let mut sum_sq = Array2::<f64>::zeros(eval.dim());
        for _ in 0..trials {
            let x = forward(&nf, &params, p, Mode::Train, &mut rng).unwrap().layers[0].output();
            sum_sq += &(&x * &x);
            sum += &x;
        }
        let mean = &sum / trials as f64;
        let var = &sum_sq / trials as f64 - &mean * &mean;
        Zip::from(&mean).and(&var).and(&eval).for_each(|&m, &v, &e| {
            let sigma = (v / trials as f64).sqrt();
            assert!((m - e).abs() <= 3.0 * sigma + 1e-12, "{m} vs {e} (sigma {sigma})");
        });
    }
}
