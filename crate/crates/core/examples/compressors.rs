//! The compressors side by side on one weight vector: magnitude (global and
//! per layer), structured row groups, SNIP saliency and the scaled sign.

use dpflab::data::make_blobs;
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::pruning::{compress, delta_of, Compressor, PruneScope};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(3, 10, 300, 0.4, 3)?;
    let model = Mlp::new(LayerSpec::chain(&[10, 32, 16, 3]), 3)?;
    let batch = data.train.batch(&(0..32).collect::<Vec<_>>());
    let x = model.params();
    let layout = model.layout();
    let kinds = [
        Compressor::Magnitude(PruneScope::Global),
        Compressor::Magnitude(PruneScope::Layerwise),
        Compressor::RowGroupL2,
        Compressor::Snip,
        Compressor::ScaledSign,
    ];
    println!("{:<22} {:>9} {:>8} {:>9}", "compressor", "sparsity", "delta", "loss");
    for kind in kinds {
        let c = compress(kind, x, layout, Some((&model, &batch)), 0.75)?;
        let sparsity = c.mask.as_ref().map_or(0.0, |m| m.sparsity());
        let loss = model.loss(&c.values, &batch)?;
        println!(
            "{:<22} {:>9.3} {:>8.4} {:>9.4}",
            format!("{kind:?}"),
            sparsity,
            delta_of(x, &c.values)?,
            loss
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
