//! Mask instrumentation for a DPF run: flips per mask update, the
//! still-changing curve per epoch, and a CSV of the metrics stream.

use dpflab::data::make_blobs;
use dpflab::metrics::{last_change_curve, write_csv};
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{run_training, Strategy, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = make_blobs(4, 20, 1000, 0.3, 2)?;
    let model = Mlp::new(LayerSpec::chain(&[20, 64, 64, 4]), 2)?;
    let epochs = 24;
    let cfg = TrainConfig::standard(Strategy::Dpf, 0.9, epochs, data.train.len(), 32)?;
    let out = run_training(&model, &data, &cfg)?;

    let flips = out.history.flips_per_event();
    let quarter = out.steps / 4;
    let early: usize = flips.iter().filter(|(t, _)| *t < quarter).map(|f| f.1).sum();
    let late: usize = flips.iter().filter(|(t, _)| *t >= out.steps - quarter).map(|f| f.1).sum();
    println!("flips in the first quarter {early}, in the last quarter {late}");

    println!("epoch  fraction of weights whose mask still changes later");
    for (e, v) in last_change_curve(&out.history, epochs).iter().enumerate().step_by(4) {
        println!("{e:>5}  {v:.4}");
    }

    let mut csv = Vec::new();
    write_csv(&out.records, &mut csv)?;
    println!("\n{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
