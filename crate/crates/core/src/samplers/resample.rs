use rand::Rng;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Systematic resampling: one uniform offset in `[0, 1/count)` and `count`
/// evenly spaced pointers walked through the cumulative weights.
///
/// Index `k` is selected either `floor(count * w_k)` or `ceil(count * w_k)`
/// times.
pub fn resample_systematic<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || (total - 1.0).abs() > SUM_TOLERANCE || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::UnnormalizedWeights(total));
    }
    let step = 1.0 / count as f64;
    let offset = rng.random::<f64>() * step;
    let last = weights.len() - 1;
    let mut indices = Vec::with_capacity(count);
    let mut k = 0;
    let mut cumulative = weights[0];
    for m in 0..count {
        let pointer = offset + m as f64 * step;
        while pointer >= cumulative && k < last {
            k += 1;
            cumulative += weights[k];
        }
        indices.push(k);
    }
    Ok(indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(resample_systematic(&[1.0], 5, &mut rng).unwrap(), vec![0; 5]);
    }

    #[test]
    fn uniform_weights_pick_each_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(resample_systematic(&[0.25; 4], 4, &mut rng).unwrap(), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn rejects_unnormalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(resample_systematic(&[0.5, 0.4], 3, &mut rng).is_err());
        assert!(resample_systematic(&[], 3, &mut rng).is_err());
        assert!(resample_systematic(&[1.5, -0.5], 3, &mut rng).is_err());
    }

    #[test]
    fn counts_within_one_of_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = [0.05, 0.31, 0.001, 0.2, 0.139, 0.3];
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        for count in [1, 7, 10, 33, 100] {
            for _ in 0..200 {
                let idx = resample_systematic(&w, count, &mut rng).unwrap();
                let mut hist = vec![0usize; w.len()];
                idx.iter().for_each(|&k| hist[k] += 1);
                for (h, wk) in hist.iter().zip(&w) {
                    assert!((*h as f64 - count as f64 * wk).abs() <= 1.0 + 1e-9);
                }
            }
        }
    }
}
