//! Runs every pruning methodology on the same task and seed and prints a
//! small accuracy table.

use dpflab::data::make_blobs;
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{run_training, Saliency, Strategy, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(4, 20, 1000, 0.3, 1)?;
    let model = Mlp::new(LayerSpec::chain(&[20, 64, 64, 4]), 1)?;
    let strategies = [
        (Strategy::Dense, 0),
        (Strategy::BeforeTraining(Saliency::Magnitude), 0),
        (Strategy::BeforeTraining(Saliency::Snip), 0),
        (Strategy::OneShot, 0),
        (Strategy::OneShot, 4),
        (Strategy::Incremental { monotone: false }, 0),
        (Strategy::Incremental { monotone: true }, 0),
        (Strategy::Dpf, 0),
    ];
    println!("{:<28} {:>9} {:>9} {:>9}", "strategy", "finetune", "test_acc", "sparsity");
    for (strategy, finetune_epochs) in strategies {
        let target = if strategy == Strategy::Dense { 0.0 } else { 0.9 };
        let mut cfg = TrainConfig::standard(strategy, target, 16, data.train.len(), 32)?;
        cfg.finetune_epochs = finetune_epochs;
        let out = run_training(&model, &data, &cfg)?;
        let acc = model.evaluate(&out.final_sparse, &data.test)?.accuracy;
        println!("{:<28} {:>9} {:>9.4} {:>9.3}", strategy.as_str(), finetune_epochs, acc, out.mask.sparsity());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
