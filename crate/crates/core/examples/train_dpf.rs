//! Trains a small MLP on Gaussian blobs with dynamic pruning and feedback,
//! printing the per-epoch metrics and the final dense/sparse accuracies.

use dpflab::data::make_blobs;
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{run_training, Strategy, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(4, 20, 1000, 0.3, 0)?;
    let model = Mlp::new(LayerSpec::chain(&[20, 64, 64, 4]), 0)?;
    let cfg = TrainConfig::standard(Strategy::Dpf, 0.9, 20, data.train.len(), 32)?;
    let out = run_training(&model, &data, &cfg)?;

    println!("epoch  lr      test_acc  sparsity  delta   flips");
    for r in &out.records {
        println!(
            "{:>5}  {:<6}  {:.4}    {:.3}     {:.4}  {}",
            r.epoch, r.lr, r.test_acc, r.sparsity_achieved, r.delta, r.flips_since_last
        );
    }
    let dense = model.evaluate(&out.final_dense, &data.test)?;
    let sparse = model.evaluate(&out.final_sparse, &data.test)?;
    println!("dense test acc {:.4}, pruned test acc {:.4}", dense.accuracy, sparse.accuracy);
    println!("{} mask updates, {} reactivated weights", out.history.len(), out.history.reactivations());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
