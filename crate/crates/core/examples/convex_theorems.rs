//! Convergence rates of the error-feedback iteration on synthetic problems:
//! a strongly convex quadratic (decaying steps, sampled iterate) and a
//! coupled double well (constant step tuned to the horizon).

use dpflab::convex::{
    fit_loglog_slope, make_quadratic, median, one_shot_compare, run_theorem1, run_theorem2, ConvexCompressor,
    DoubleWell, LabOptions,
};
use rayon::prelude::*;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // a well-conditioned quadratic keeps the burn-in short
    let horizons = [100u64, 1_000, 10_000];
    let mut pts = Vec::new();
    for &h in &horizons {
        let vals: Vec<f64> = (0..8u64)
            .into_par_iter()
            .map(|s| {
                let p = make_quadratic(20, 1.0, 4.0, s, 1.0).unwrap();
                run_theorem1(&p, &ConvexCompressor::dense(), h, s, &LabOptions::default()).unwrap().result
            })
            .collect();
        let m = median(&vals).unwrap();
        println!("quadratic  T={h:<6} median f(x)-f* = {m:.3e}");
        pts.push((h as f64, m));
    }
    println!("quadratic slope {:.3}", fit_loglog_slope(&pts).unwrap_or(f64::NAN));

    let toy = DoubleWell::new(20, 0.1, 1.0, 1.5)?;
    let mut pts = Vec::new();
    for &h in &horizons {
        let vals: Vec<f64> = (0..8u64)
            .into_par_iter()
            .map(|s| run_theorem2(&toy, &ConvexCompressor::dense(), h, s, &LabOptions::default()).unwrap().result)
            .collect();
        let m = median(&vals).unwrap();
        println!("double well T={h:<6} median mean |grad|^2 = {m:.3e}");
        pts.push((h as f64, m));
    }
    println!("double well slope {:.3}", fit_loglog_slope(&pts).unwrap_or(f64::NAN));

    let p = make_quadratic(20, 1.0, 4.0, 0, 1.0)?;
    let c = one_shot_compare(&p, 0.5, 5_000, 0, &LabOptions::default())?;
    println!(
        "50% sparsity: dpf f-f* {:.3e} (mean delta {:.3}), one-shot f-f* {:.3e} (delta {:.3})",
        c.dpf_final, c.dpf_mean_delta, c.one_shot_final, c.one_shot_delta
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
