//! Writes a tiny IDX image/label pair (the MNIST file format), loads it back
//! and trains on it. Point `DataSpec::Idx` or the CLI `data.kind = "idx"`
//! keys at real files to use MNIST itself.

use dpflab::data::{encode_idx_images, encode_idx_labels, load_idx, DataSplit};
use dpflab::nn::{LayerSpec, Mlp};
use dpflab::train::{run_training, Strategy, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 4x4 images of a bright row (class 0) or a bright column (class 1).
fn synth(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * 16);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let line = rng.random_range(0..4);
        for r in 0..4 {
            for c in 0..4 {
                let on = if label == 0 { r == line } else { c == line };
                let noise: u8 = rng.random_range(0..40);
                pixels.push(if on { 215 + noise } else { noise });
            }
        }
        labels.push(label);
    }
    (pixels, labels)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("dpflab-idx-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut paths = Vec::new();
    for (name, n, seed) in [("train", 400, 0), ("test", 100, 1)] {
        let (pixels, labels) = synth(n, seed);
        let img = dir.join(format!("{name}-images.idx3-ubyte"));
        let lab = dir.join(format!("{name}-labels.idx1-ubyte"));
        std::fs::write(&img, encode_idx_images(4, 4, &pixels))?;
        std::fs::write(&lab, encode_idx_labels(&labels))?;
        paths.push((img, lab));
    }
    let data = DataSplit {
        train: load_idx(&paths[0].0, &paths[0].1, 2)?,
        test: load_idx(&paths[1].0, &paths[1].1, 2)?,
    };
    let _ = std::fs::remove_dir_all(&dir);

    let model = Mlp::new(LayerSpec::chain(&[16, 32, 2]), 0)?;
    let cfg = TrainConfig::standard(Strategy::Dpf, 0.8, 10, data.train.len(), 20)?;
    let out = run_training(&model, &data, &cfg)?;
    let acc = model.evaluate(&out.final_sparse, &data.test)?.accuracy;
    println!("loaded {} train / {} test images of {} pixels", data.train.len(), data.test.len(), data.train.dim());
    println!("DPF at sparsity {:.2}: test acc {acc:.4}", out.mask.sparsity());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
