use serde::{Deserialize, Serialize};

use super::{apply_mask, magnitude_mask, row_group_l2, snip_mask, Mask, PruneScope};
use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Mlp, ParamLayout};

/// A map `C: R^d -> R^d` producing the evaluated point from the dense weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compressor {
    Magnitude(PruneScope),
    Snip,
    RowGroupL2,
    /// `(||x_P||_1 / |P|) * sign(x_P)` on the prunable block; no mask.
    ScaledSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub values: Vec<f64>,
    pub mask: Option<Mask>,
}

/// Applies a compressor. `snip_inputs` supplies the model and mini-batch the
/// saliency criterion needs.
pub fn compress(
    compressor: Compressor,
    params: &[f64],
    layout: &ParamLayout,
    snip_inputs: Option<(&Mlp, &Batch)>,
    sparsity: f64,
) -> Result<Compressed> {
    check_len(layout.len(), params.len())?;
    let mask = match compressor {
        Compressor::Magnitude(scope) => magnitude_mask(params, layout, sparsity, scope)?,
        Compressor::RowGroupL2 => row_group_l2(params, layout, sparsity)?,
        Compressor::Snip => {
            let (model, batch) =
                snip_inputs.ok_or_else(|| Error::invalid("snip compressor needs a model and batch"))?;
            snip_mask(model, params, batch, sparsity)?
        }
        Compressor::ScaledSign => {
            return Ok(Compressed {
                values: scaled_sign(params, layout)?,
                mask: None,
            })
        }
    };
    Ok(Compressed {
        values: apply_mask(params, &mask)?,
        mask: Some(mask),
    })
}

/// Binary quantizer on the prunable block; `sign(0)` is taken as `+1`.
pub fn scaled_sign(params: &[f64], layout: &ParamLayout) -> Result<Vec<f64>> {
    check_len(layout.len(), params.len())?;
    let n = layout.n_prunable();
    if n == 0 {
        return Ok(params.to_vec());
    }
    let l1: f64 = params
        .iter()
        .zip(layout.prunable())
        .filter(|(_, &p)| p)
        .map(|(v, _)| v.abs())
        .sum();
    let scale = l1 / n as f64;
    Ok(params
        .iter()
        .zip(layout.prunable())
        .map(|(&v, &p)| {
            if !p {
                v
            } else if v < 0.0 {
                -scale
            } else {
                scale
            }
        })
        .collect())
}
