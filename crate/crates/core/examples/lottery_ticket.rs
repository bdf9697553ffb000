//! Finds a 90% sparse mask with DPF, then retrains that mask from a fresh
//! initialization and from a fine-tune of the found weights.

use dpflab::data::make_blobs;
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{finetune, lottery_retrain, run_training, Strategy, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(4, 20, 1000, 0.3, 4)?;
    let specs = LayerSpec::chain(&[20, 64, 64, 4]);
    let model = Mlp::new(specs.clone(), 4)?;
    let cfg = TrainConfig::standard(Strategy::Dpf, 0.9, 16, data.train.len(), 32)?;
    let found = run_training(&model, &data, &cfg)?;
    let found_acc = model.evaluate(&found.final_sparse, &data.test)?.accuracy;

    let retrain_cfg = TrainConfig::standard(Strategy::Dense, 0.0, 16, data.train.len(), 32)?;
    let ticket = lottery_retrain(&specs, &found.mask, 99, &data, &retrain_cfg)?;
    let ticket_acc = model.evaluate(&ticket.final_sparse, &data.test)?.accuracy;

    let mut ft_cfg = cfg.clone();
    ft_cfg.finetune_epochs = 4;
    ft_cfg.finetune_lr = Some(0.01);
    let tuned = finetune(&model, &found.final_dense, &found.mask, &data, &ft_cfg)?;
    let tuned_acc = model.evaluate(&tuned, &data.test)?.accuracy;

    println!("mask sparsity {:.3}", found.mask.sparsity());
    println!("found by DPF        test acc {found_acc:.4}");
    println!("fine-tuned          test acc {tuned_acc:.4}");
    println!("retrained from init test acc {ticket_acc:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
