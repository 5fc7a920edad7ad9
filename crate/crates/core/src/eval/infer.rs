use ndarray::{s, Array2};

use crate::data::BipartiteGraph;
use crate::error::{Error, Result};
use crate::model::{convolve, mean_aggregate, ModelParameters};

/// Full-graph propagation without sampling, rebalancing or dropout: every node
/// aggregates its complete neighborhood plus itself at every layer.
pub fn infer_all(graph: &BipartiteGraph, params: &ModelParameters) -> Result<(Array2<f64>, Array2<f64>)> {
    if params.num_users() != graph.num_users() || params.num_items() != graph.num_items() {
        return Err(Error::Shape(format!(
            "model has {} users / {} items, graph has {} / {}",
            params.num_users(),
            params.num_items(),
            graph.num_users(),
            graph.num_items()
        )));
    }
    let lists: Vec<Vec<usize>> = (0..graph.num_nodes())
        .map(|v| {
            let mut list = vec![v];
            list.extend(graph.neighbors(v)?);
            Ok(list)
        })
        .collect::<Result<_>>()?;
    let mut h = params.embeddings.clone();
    for w in &params.conv {
        h = convolve(&mean_aggregate(&lists, &h), w);
    }
    let m = graph.num_users();
    Ok((h.slice(s![..m, ..]).to_owned(), h.slice(s![m.., ..]).to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, Mode};
    use crate::rng::seeded;
    use crate::sampling::NodeFlow;
    use ndarray::array;

    #[test]
    fn zero_embeddings_give_zero() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0), (1, 1), (1, 0)]);
        let mut p = ModelParameters::init(2, 2, 1, 3, 2, &mut seeded(0)).unwrap();
        p.embeddings.fill(0.0);
        let (u, i) = infer_all(&g, &p).unwrap();
        assert!(u.iter().chain(i.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn three_node_hand_computation() {
        // path user 0, item 0, user 1 with d = 1 and w = 0.5
        let g = BipartiteGraph::from_edges(2, 1, [(0, 0), (1, 0)]);
        let p = ModelParameters::from_parts(2, array![[1.0], [-1.0], [2.0]], vec![array![[0.5]]], array![[1.0]]).unwrap();
        let (u, i) = infer_all(&g, &p).unwrap();
        assert!((u[[0, 0]] - (0.5f64 * 1.5).tanh()).abs() < 1e-15);
        assert!((u[[1, 0]] - (0.5f64 * 0.5).tanh()).abs() < 1e-15);
        assert!((i[[0, 0]] - (0.5f64 * 2.0 / 3.0).tanh()).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_full_node_flow() {
        let g = BipartiteGraph::from_edges(3, 4, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 0)]);
        let p = ModelParameters::init(3, 4, 2, 4, 2, &mut seeded(9)).unwrap();
        let (u, i) = infer_all(&g, &p).unwrap();
        let seeds: Vec<usize> = (0..7).collect();
        let nf = NodeFlow::full(&g, &seeds, 2).unwrap();
        let out = forward(&nf, &p, 0.0, Mode::Eval, &mut seeded(0)).unwrap();
        assert_eq!(out.output().slice(s![..3, ..]), u);
        assert_eq!(out.output().slice(s![3.., ..]), i);
    }

    #[test]
    fn size_mismatch_rejected() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0)]);
        let p = ModelParameters::init(2, 3, 1, 2, 1, &mut seeded(0)).unwrap();
        assert!(infer_all(&g, &p).is_err());
    }
}
