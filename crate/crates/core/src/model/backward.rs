use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sampling::{NodeFlow, TrainingSample};

use super::forward::tanh_backward;
use super::{cls_loss, grl_backward, rec_loss, ForwardTrace, ModelParameters};

/// Gradient rows for a subset of the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub rows: Vec<usize>,
    pub values: Array2<f64>,
}

impl SparseRows {
    pub fn to_dense(&self, total_rows: usize) -> Array2<f64> {
        let mut out = Array2::zeros((total_rows, self.values.ncols()));
        for (r, &row) in self.rows.iter().enumerate() {
            let mut dst = out.row_mut(row);
            dst += &self.values.row(r);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: SparseRows,
    pub conv: Vec<Array2<f64>>,
    pub classifier: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub loss_r: f64,
    pub loss_c: f64,
    pub samples: usize,
    pub items: usize,
}

/// Loss values and gradients at the top of the GCN, before any reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub loss_r: f64,
    pub loss_c: f64,
    /// dL_r / dh^K, rows aligned with the node flow seeds.
    pub rec: Array2<f64>,
    /// dL_c / dh^K, nonzero only on the batch's item seeds.
    pub cls: Array2<f64>,
    /// dL_c / dW for the classifier.
    pub classifier: Array2<f64>,
    pub samples: usize,
    pub items: usize,
}

/// Recommendation loss averaged over samples and classification loss averaged
/// over the distinct items of the batch, with their gradients.
pub fn head_gradients(
    trace: &ForwardTrace,
    nodeflow: &NodeFlow,
    batch: &[TrainingSample],
    params: &ModelParameters,
) -> Result<HeadGradients> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let out = trace.output();
    if out.nrows() != nodeflow.seeds().len() {
        return Err(Error::Shape("trace does not belong to this node flow".into()));
    }
    let m = params.num_users();
    let position = |node: usize| {
        nodeflow
            .seed_position(node)
            .ok_or_else(|| Error::Shape(format!("batch node {node} is not a seed of the node flow")))
    };

    let mut rec = Array2::zeros(out.dim());
    let mut loss_r = 0.0;
    let scale_r = 1.0 / batch.len() as f64;
    let mut items: Vec<(usize, usize)> = Vec::new();
    let mut seen: HashMap<usize, ()> = HashMap::new();
    for x in batch {
        let pu = position(x.user)?;
        let pi = position(m + x.item)?;
        let logit = out.row(pu).dot(&out.row(pi));
        let (l, g) = rec_loss(logit, x.target());
        loss_r += l * scale_r;
        let g = g * scale_r;
        rec.row_mut(pu).scaled_add(g, &out.row(pi));
        rec.row_mut(pi).scaled_add(g, &out.row(pu));
        if seen.insert(x.item, ()).is_none() {
            items.push((pi, x.category));
        }
    }

    let mut cls = Array2::zeros(out.dim());
    let mut classifier = Array2::zeros(params.classifier.dim());
    let mut loss_c = 0.0;
    let scale_c = 1.0 / items.len() as f64;
    for &(pi, category) in &items {
        let h = out.row(pi);
        let logits = params.classifier.dot(&h);
        let (l, g) = cls_loss(logits.view(), category)?;
        loss_c += l * scale_c;
        let g = g * scale_c;
        for (c, &gc) in g.iter().enumerate() {
            classifier.row_mut(c).scaled_add(gc, &h);
        }
        cls.row_mut(pi).assign(&params.classifier.t().dot(&g));
    }
    Ok(HeadGradients {
        loss_r,
        loss_c,
        rec,
        cls,
        classifier,
        samples: batch.len(),
        items: items.len(),
    })
}

/// Back-propagates a gradient on the seed representations through every graph
/// convolution. Returns the convolution gradients and the embedding rows touched.
pub fn propagate(
    trace: &ForwardTrace,
    nodeflow: &NodeFlow,
    params: &ModelParameters,
    seed_grad: &Array2<f64>,
) -> Result<(Vec<Array2<f64>>, SparseRows)> {
    let depth = params.depth();
    if trace.layers.len() != depth || nodeflow.depth() != depth {
        return Err(Error::Shape("trace, node flow and model depth disagree".into()));
    }
    if seed_grad.dim() != trace.output().dim() {
        return Err(Error::Shape(format!(
            "seed gradient {:?}, expected {:?}",
            seed_grad.dim(),
            trace.output().dim()
        )));
    }
    let mut conv = vec![Array2::zeros((params.dim(), params.dim())); depth];
    let mut upstream = seed_grad.clone();
    for k in (1..=depth).rev() {
        let layer = &trace.layers[k - 1];
        let mut d_pre = match &layer.mask {
            Some(mask) => &upstream * mask,
            None => upstream,
        };
        for (g, h) in d_pre.rows_mut().into_iter().zip(layer.hidden.rows()) {
            tanh_backward(g, h);
        }
        conv[k - 1] = d_pre.t().dot(&layer.aggregated);
        let d_agg = d_pre.dot(&params.conv[k - 1]);
        let lists = nodeflow.block(depth - k + 1);
        let mut d_input = Array2::zeros((nodeflow.hop(depth - k + 1).len(), params.dim()));
        for (list, g) in lists.iter().zip(d_agg.rows()) {
            let share = 1.0 / list.len() as f64;
            for &q in list {
                d_input.row_mut(q).scaled_add(share, &g);
            }
        }
        upstream = d_input;
    }
    let rows = nodeflow.hop(depth).to_vec();
    Ok((conv, SparseRows { rows, values: upstream }))
}

/// Full backward pass for one batch.
///
/// The classifier receives dL_c. The GCN (embeddings and convolutions) receives
/// dL_r plus the classification gradient passed through the reversal layer, so
/// its update descends on `L_r - gamma * L_c`.
pub fn backward(
    trace: &ForwardTrace,
    nodeflow: &NodeFlow,
    batch: &[TrainingSample],
    params: &ModelParameters,
    gamma: f64,
) -> Result<(Gradients, LossReport)> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("adversarial weight must be finite and >= 0, got {gamma}")));
    }
    let head = head_gradients(trace, nodeflow, batch, params)?;
    let seed_grad = head.rec + grl_backward(&head.cls, gamma);
    let (conv, embeddings) = propagate(trace, nodeflow, params, &seed_grad)?;
    Ok((
        Gradients {
            embeddings,
            conv,
            classifier: head.classifier,
        },
        LossReport {
            loss_r: head.loss_r,
            loss_c: head.loss_c,
            samples: head.samples,
            items: head.items,
        },
    ))
}
