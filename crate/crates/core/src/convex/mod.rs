//! Synthetic objectives with known constants for checking the convergence
//! behaviour of the error-feedback iteration: a strongly convex quadratic,
//! a coupled double well, the iterate samplers, and log-log slope fits.

mod double_well;
mod harness;
mod quadratic;
mod sampler;

pub use double_well::DoubleWell;
pub use harness::{
    double_well_start, one_shot_compare, pilot_gradient_bound, run_theorem1, run_theorem2, ConvexCompressor, LabOptions,
    OneShotComparison, TheoremRunResult, TracePoint,
};
pub use quadratic::{make_quadratic, QuadraticProblem};
pub use sampler::{sample_iterate_thm1, sample_uniform, thm1_weight};

/// Least-squares slope of `log10 y` against `log10 x`. `None` when fewer
/// than two distinct abscissae are given or any value is not positive.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log10(), y.log10())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4].iter().map(|&t| (t, 3.0 / t)).collect();
        assert!((fit_loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_has_no_slope() {
        assert_eq!(fit_loglog_slope(&[(100.0, 1.0)]), None);
        assert_eq!(fit_loglog_slope(&[(100.0, 1.0), (1000.0, 0.0)]), None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
