//! DPF with whole-neuron (row group) masks, compared with unstructured
//! magnitude masks at the same target.

use dpflab::data::make_blobs;
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{run_training, MaskCriterion, Strategy, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(4, 20, 1000, 0.3, 5)?;
    let model = Mlp::new(LayerSpec::chain(&[20, 64, 64, 4]), 5)?;
    for criterion in [MaskCriterion::Magnitude, MaskCriterion::RowGroupL2] {
        let mut cfg = TrainConfig::standard(Strategy::Dpf, 0.7, 20, data.train.len(), 32)?;
        cfg.criterion = criterion;
        let out = run_training(&model, &data, &cfg)?;
        let acc = model.evaluate(&out.final_sparse, &data.test)?.accuracy;
        let dead_rows = model
            .layout()
            .prunable_segments()
            .map(|seg| (0..seg.rows).filter(|&r| seg.row(r).all(|i| !out.mask.get(i))).count())
            .sum::<usize>();
        println!(
            "{criterion:?}: sparsity {:.3}, removed neurons {dead_rows}, test acc {acc:.4}",
            out.mask.sparsity()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
