use rand::Rng;

/// Probability of returning iterate `t` out of `0..=T` under the
/// linearly increasing law `2(t+1) / ((T+1)(T+2))`.
pub fn thm1_weight(t: u64, horizon: u64) -> f64 {
    if t > horizon {
        return 0.0;
    }
    2.0 * (t as f64 + 1.0) / ((horizon as f64 + 1.0) * (horizon as f64 + 2.0))
}

/// Cumulative mass of indices `0..=t`: `(t+1)(t+2) / ((T+1)(T+2))`.
fn cdf(t: u64, horizon: u64) -> f64 {
    let t = t as f64;
    let h = horizon as f64;
    (t + 1.0) * (t + 2.0) / ((h + 1.0) * (h + 2.0))
}

/// Draws an iterate index from [`thm1_weight`] by inverting the CDF in
/// closed form.
pub fn sample_iterate_thm1<R: Rng>(horizon: u64, rng: &mut R) -> u64 {
    if horizon == 0 {
        return 0;
    }
    let u: f64 = rng.random();
    let k = u * (horizon as f64 + 1.0) * (horizon as f64 + 2.0);
    // smallest t with (t+1)(t+2) >= k
    let guess = ((k + 0.25).sqrt() - 1.5).ceil().max(0.0) as u64;
    let mut t = guess.min(horizon);
    while t > 0 && cdf(t - 1, horizon) >= u {
        t -= 1;
    }
    while t < horizon && cdf(t, horizon) < u {
        t += 1;
    }
    t
}

/// Uniform index in `0..horizon`.
pub fn sample_uniform<R: Rng>(horizon: u64, rng: &mut R) -> u64 {
    if horizon == 0 {
        0
    } else {
        rng.random_range(0..horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_for_t_equal_one() {
        assert!((thm1_weight(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((thm1_weight(1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one() {
        for h in 1..=100 {
            let s: f64 = (0..=h).map(|t| thm1_weight(t, h)).sum();
            assert!((s - 1.0).abs() < 1e-12, "T={h}: {s}");
        }
    }

    #[test]
    fn zero_horizon_is_index_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| sample_iterate_thm1(0, &mut rng) == 0));
    }

    #[test]
    fn samples_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for h in [1, 2, 7, 1000] {
            for _ in 0..1000 {
                assert!(sample_iterate_thm1(h, &mut rng) <= h);
            }
        }
    }
}
