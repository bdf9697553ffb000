use serde::{Deserialize, Serialize};

use super::{prune_count, Mask};
use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Mlp, ParamLayout, SegmentKind};

/// Whether the sparsity budget is shared across layers or applied per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneScope {
    #[default]
    Global,
    Layerwise,
}

fn check_sparsity(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::invalid(format!("sparsity {s} outside [0, 1]")))
    }
}

/// Prunes the prunable coordinates with the lowest scores. Equal scores are
/// pruned in index order.
pub fn mask_from_scores(scores: &[f64], layout: &ParamLayout, sparsity: f64, scope: PruneScope) -> Result<Mask> {
    check_len(layout.len(), scores.len())?;
    check_sparsity(sparsity)?;
    let mut bits = vec![true; layout.len()];
    let mut prune_lowest = |mut idx: Vec<usize>| {
        let k = prune_count(sparsity, idx.len());
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        for &i in &idx[..k] {
            bits[i] = false;
        }
    };
    match scope {
        PruneScope::Global => {
            let idx = (0..layout.len()).filter(|&i| layout.is_prunable(i)).collect();
            prune_lowest(idx);
        }
        PruneScope::Layerwise => {
            for seg in layout.prunable_segments() {
                prune_lowest(seg.range().collect());
            }
        }
    }
    Mask::from_bits(bits, layout)
}

/// Smallest-magnitude pruning.
pub fn magnitude_mask(params: &[f64], layout: &ParamLayout, sparsity: f64, scope: PruneScope) -> Result<Mask> {
    let scores: Vec<f64> = params.iter().map(|v| v.abs()).collect();
    mask_from_scores(&scores, layout, sparsity, scope)
}

/// Connection-sensitivity pruning: saliency `|w_i * g_i|` from one mini-batch
/// gradient, global scope.
pub fn snip_mask(model: &Mlp, params: &[f64], batch: &Batch, sparsity: f64) -> Result<Mask> {
    let (_, grad) = model.loss_and_grad(params, batch)?;
    snip_from_gradient(params, &grad, model.layout(), sparsity)
}

/// Saliency mask from a precomputed gradient. Falls back to magnitude pruning
/// when every prunable saliency is zero.
pub fn snip_from_gradient(params: &[f64], grad: &[f64], layout: &ParamLayout, sparsity: f64) -> Result<Mask> {
    check_len(params.len(), grad.len())?;
    let saliency: Vec<f64> = params.iter().zip(grad).map(|(w, g)| (w * g).abs()).collect();
    let informative = saliency
        .iter()
        .zip(layout.prunable())
        .any(|(&s, &p)| p && s != 0.0);
    if !informative {
        log::warn!("all saliencies are zero; falling back to magnitude pruning");
        return magnitude_mask(params, layout, sparsity, PruneScope::Global);
    }
    mask_from_scores(&saliency, layout, sparsity, PruneScope::Global)
}

/// Structured pruning of whole weight rows (one output neuron each) by l2
/// norm, shared budget across layers. Rows are removed smallest-norm first
/// until at least `sparsity` of the prunable coordinates are zero.
pub fn row_group_l2(params: &[f64], layout: &ParamLayout, sparsity: f64) -> Result<Mask> {
    check_len(layout.len(), params.len())?;
    check_sparsity(sparsity)?;
    let mut groups = Vec::new();
    for seg in layout.prunable_segments().filter(|s| s.kind == SegmentKind::Weights) {
        for r in 0..seg.rows {
            let range = seg.row(r);
            let norm = params[range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
            groups.push((norm, seg.layer, r, range));
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid("row-group pruning needs a prunable weight matrix"));
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let needed = sparsity * layout.n_prunable() as f64 * (1.0 - 1e-12);
    let mut bits = vec![true; layout.len()];
    let mut pruned = 0usize;
    for (_, _, _, range) in groups {
        if pruned as f64 >= needed {
            break;
        }
        pruned += range.len();
        for i in range {
            bits[i] = false;
        }
    }
    Mask::from_bits(bits, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Segment};

    fn flat_bits(values: &[f64], s: f64) -> Vec<bool> {
        magnitude_mask(values, &ParamLayout::flat(values.len()), s, PruneScope::Global)
            .unwrap()
            .bits()
            .to_vec()
    }

    #[test]
    fn magnitude_examples() {
        assert_eq!(flat_bits(&[3.0, -1.0, 2.0, 0.5], 0.5), vec![true, false, true, false]);
        assert_eq!(flat_bits(&[3.0, -1.0, 2.0, 0.5], 0.0), vec![true; 4]);
        assert_eq!(flat_bits(&[1.0, 1.0, 1.0, 1.0], 0.5), vec![false, false, true, true]);
    }

    #[test]
    fn magnitude_rejects_bad_sparsity() {
        assert!(magnitude_mask(&[1.0], &ParamLayout::flat(1), 1.5, PruneScope::Global).is_err());
    }

    #[test]
    fn non_prunable_coordinates_survive_full_sparsity() {
        let specs = LayerSpec::chain(&[3, 4, 2]);
        let layout = ParamLayout::for_layers(&specs);
        let params = vec![0.0; layout.len()];
        let m = magnitude_mask(&params, &layout, 1.0, PruneScope::Global).unwrap();
        for i in 0..layout.len() {
            assert_eq!(m.get(i), !layout.is_prunable(i));
        }
        assert_eq!(m.sparsity(), 1.0);
    }

    #[test]
    fn layerwise_prunes_each_segment() {
        let specs = vec![LayerSpec::hidden(2, 2), LayerSpec::hidden(2, 2), LayerSpec::output(2, 1)];
        let layout = ParamLayout::for_layers(&specs);
        let mut params = vec![1.0; layout.len()];
        // make the second matrix all large, the first all small
        for i in layout.weights(0).range() {
            params[i] = 0.1 * (i + 1) as f64;
        }
        for i in layout.weights(1).range() {
            params[i] = 10.0 + i as f64;
        }
        let global = magnitude_mask(&params, &layout, 0.5, PruneScope::Global).unwrap();
        let layer = magnitude_mask(&params, &layout, 0.5, PruneScope::Layerwise).unwrap();
        assert!(layout.weights(0).range().all(|i| !global.get(i)));
        assert_eq!(layout.weights(1).range().filter(|&i| !layer.get(i)).count(), 2);
        assert_eq!(layout.weights(0).range().filter(|&i| !layer.get(i)).count(), 2);
    }

    #[test]
    fn snip_keeps_higher_saliency() {
        let layout = ParamLayout::flat(2);
        let m = snip_from_gradient(&[2.0, 1.0], &[0.1, 1.0], &layout, 0.5).unwrap();
        assert_eq!(m.bits(), &[false, true]);
        let all = snip_from_gradient(&[2.0, 1.0], &[0.1, 1.0], &layout, 0.0).unwrap();
        assert_eq!(all.bits(), &[true, true]);
    }

    #[test]
    fn snip_zero_gradient_falls_back_to_magnitude() {
        let layout = ParamLayout::flat(4);
        let params = [3.0, -1.0, 2.0, 0.5];
        let m = snip_from_gradient(&params, &[0.0; 4], &layout, 0.5).unwrap();
        assert_eq!(m, magnitude_mask(&params, &layout, 0.5, PruneScope::Global).unwrap());
    }

    fn two_rows() -> ParamLayout {
        let specs = vec![LayerSpec::hidden(2, 2), LayerSpec::output(2, 1)];
        ParamLayout::for_layers(&specs)
    }

    #[test]
    fn row_group_prunes_weak_row() {
        let layout = two_rows();
        let mut params = vec![0.0; layout.len()];
        params[0..2].copy_from_slice(&[3.0, 4.0]); // norm 5
        params[2..4].copy_from_slice(&[0.1, 0.0]); // norm 0.1
        let m = row_group_l2(&params, &layout, 0.5).unwrap();
        assert_eq!(&m.bits()[0..4], &[true, true, false, false]);
        assert_eq!(row_group_l2(&params, &layout, 0.0).unwrap(), Mask::ones(&layout));
    }

    #[test]
    fn row_group_overshoots_to_whole_rows() {
        let layout = two_rows();
        let params: Vec<f64> = (0..layout.len()).map(|i| i as f64 + 1.0).collect();
        let m = row_group_l2(&params, &layout, 0.3).unwrap();
        assert_eq!(m.sparsity(), 0.5);
    }

    #[test]
    fn row_group_needs_prunable_rows() {
        let layout = ParamLayout::for_layers(&LayerSpec::chain(&[2, 2]));
        assert!(row_group_l2(&vec![1.0; layout.len()], &layout, 0.5).is_err());
    }

    #[test]
    fn segments_cover_layout() {
        let layout = ParamLayout::for_layers(&LayerSpec::chain(&[3, 5, 2]));
        let mut seen = vec![0; layout.len()];
        for s in layout.segments() {
            for i in Segment::range(s) {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
