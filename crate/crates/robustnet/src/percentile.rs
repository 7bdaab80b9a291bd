//! Empirical percentile of a sample set, with gradient routing.
//!
//! The robust objective of this crate is the empirical gamma-percentile of a
//! batch of utility samples. [`empirical_percentile`] ranks the samples and
//! interpolates between the two bracketing order statistics when the target
//! rank is fractional. Because the percentile only depends on the one or two
//! selected samples, its gradient with respect to the sample vector is sparse:
//! [`percentile_gradient`] returns the interpolation weights attached to the
//! selected samples' original positions, and downstream code backpropagates
//! through those realizations only.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Outcome of ranking a sample set at a target percentile.
#[derive(Clone, Debug, PartialEq)]
pub struct PercentileSelection {
    /// Target percentile in percent, in (0, 100).
    pub gamma: f64,
    /// 1-based rank of the lower bracketing order statistic.
    pub rank_low: usize,
    /// 1-based rank of the upper bracketing order statistic.
    pub rank_high: usize,
    /// Original array position of the sample at `rank_low`.
    pub index_low: usize,
    /// Original array position of the sample at `rank_high`.
    pub index_high: usize,
    /// Weight on the upper order statistic, in [0, 1).
    pub interp_weight: f64,
    /// The empirical percentile value.
    pub value: f64,
}

/// Rank `samples` and select the empirical `gamma`-percentile.
///
/// The target fractional rank is `t = L * gamma / 100` (1-based), clamped to
/// `[1, L]`; a fractional `t` interpolates linearly between the `floor(t)`-th
/// and `ceil(t)`-th lowest values. Ties are broken by stable sort order, and
/// the returned indices refer to positions in the original array.
pub fn empirical_percentile(samples: &[f64], gamma: f64) -> Result<PercentileSelection> {
    if samples.is_empty() {
        return Err(Error::Usage("percentile of an empty sample set".into()));
    }
    if !(gamma > 0.0 && gamma < 100.0) {
        return Err(Error::Usage(format!(
            "gamma must lie in (0, 100) percent, got {gamma}"
        )));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical(
            "NaN in utility samples (diverged evaluation)".into(),
        ));
    }

    let l = samples.len();
    let mut order: Vec<usize> = (0..l).collect();
    // sort_by is stable, so equal values keep their original relative order.
    order.sort_by(|&a, &b| samples[a].partial_cmp(&samples[b]).unwrap());

    let t = (l as f64 * gamma / 100.0).clamp(1.0, l as f64);
    let rank_low = t.floor() as usize;
    let rank_high = t.ceil() as usize;
    let interp_weight = t - t.floor();
    let index_low = order[rank_low - 1];
    let index_high = order[rank_high - 1];
    let value = (1.0 - interp_weight) * samples[index_low] + interp_weight * samples[index_high];

    Ok(PercentileSelection {
        gamma,
        rank_low,
        rank_high,
        index_low,
        index_high,
        interp_weight,
        value,
    })
}

/// Gradient of the empirical percentile with respect to the sample vector,
/// as `(original_index, weight)` pairs; all other samples have weight zero.
///
/// The weights form a convex combination: `1` on the selected sample when no
/// interpolation happened, otherwise `1 - interp_weight` and `interp_weight`
/// on the two bracketing samples.
pub fn percentile_gradient(selection: &PercentileSelection) -> Vec<(usize, f64)> {
    if selection.rank_low == selection.rank_high {
        vec![(selection.index_low, 1.0)]
    } else {
        vec![
            (selection.index_low, 1.0 - selection.interp_weight),
            (selection.index_high, selection.interp_weight),
        ]
    }
}

/// Estimate the bias of the empirical percentile against a known quantile.
///
/// Draws `trials` sample sets of size `l` from `sample`, averages the
/// empirical `gamma`-percentile, and returns `mean - true_quantile`.
pub fn percentile_convergence_probe<F>(
    mut sample: F,
    gamma: f64,
    l: usize,
    trials: usize,
    true_quantile: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    if trials == 0 {
        return Err(Error::Usage("probe needs at least one trial".into()));
    }
    let mut acc = 0.0;
    let mut buf = Vec::with_capacity(l);
    for _ in 0..trials {
        buf.clear();
        buf.extend((0..l).map(|_| sample(rng)));
        acc += empirical_percentile(&buf, gamma)?.value;
    }
    Ok(acc / trials as f64 - true_quantile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn integer_rank_selects_exactly() {
        // L = 1000, gamma = 5 -> t = 50, the 50th lowest value, no interpolation.
        let mut rng = stream_rng(11, &[0]);
        let samples: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let sel = empirical_percentile(&samples, 5.0).unwrap();
        assert_eq!(sel.rank_low, 50);
        assert_eq!(sel.rank_high, 50);
        assert_eq!(sel.interp_weight, 0.0);
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sel.value, sorted[49]);
        assert_eq!(samples[sel.index_low], sorted[49]);
    }

    #[test]
    fn single_sample_returns_it() {
        for gamma in [0.5, 5.0, 50.0, 99.0] {
            let sel = empirical_percentile(&[7.0], gamma).unwrap();
            assert_eq!(sel.value, 7.0);
            assert_eq!(sel.index_low, 0);
        }
    }

    #[test]
    fn fractional_rank_interpolates() {
        // Hand oracle: sorted 1..10, t = 10 * 25 / 100 = 2.5,
        // value = 0.5 * 2 + 0.5 * 3 = 2.5.
        let samples: Vec<f64> = (1..=10).rev().map(|v| v as f64).collect();
        let sel = empirical_percentile(&samples, 25.0).unwrap();
        assert_eq!(sel.rank_low, 2);
        assert_eq!(sel.rank_high, 3);
        assert!((sel.interp_weight - 0.5).abs() < 1e-15);
        assert!((sel.value - 2.5).abs() < 1e-15);
        // Original positions: the array is descending 10..1, so value 2 sits
        // at index 8 and value 3 at index 7.
        assert_eq!(sel.index_low, 8);
        assert_eq!(sel.index_high, 7);
    }

    #[test]
    fn sub_one_rank_clamps_to_minimum() {
        let samples = [4.0, -1.0, 3.0, 2.0];
        // t = 4 * 5 / 100 = 0.2 -> clamped to 1 -> minimum.
        let sel = empirical_percentile(&samples, 5.0).unwrap();
        assert_eq!(sel.value, -1.0);
        assert_eq!(sel.index_low, 1);
    }

    #[test]
    fn empty_and_nan_are_errors() {
        assert!(matches!(
            empirical_percentile(&[], 5.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            empirical_percentile(&[1.0, f64::NAN], 5.0),
            Err(Error::Numerical(_))
        ));
        assert!(matches!(
            empirical_percentile(&[1.0], 0.0),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            empirical_percentile(&[1.0], 100.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn ties_use_stable_order() {
        let samples = [5.0, 5.0, 5.0, 5.0];
        // t = 4 * 40 / 100 = 1.6 -> ranks 1 and 2 -> original indices 0 and 1.
        let sel = empirical_percentile(&samples, 40.0).unwrap();
        assert_eq!((sel.index_low, sel.index_high), (0, 1));
    }

    #[test]
    fn gradient_weights_route_to_selection() {
        let samples: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        // No interpolation: t = 10 * 30 / 100 = 3.
        let sel = empirical_percentile(&samples, 30.0).unwrap();
        let w = percentile_gradient(&sel);
        assert_eq!(w, vec![(2, 1.0)]);
        // Interpolation: t = 2.5 -> weights 0.5 / 0.5.
        let sel = empirical_percentile(&samples, 25.0).unwrap();
        let w = percentile_gradient(&sel);
        assert_eq!(w, vec![(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn normal_quantile_probe_is_nearly_unbiased() {
        // Standard normal 5th percentile = -1.6449 (quantile table).
        let mut rng = stream_rng(42, &[1]);
        let bias = percentile_convergence_probe(
            |r| StandardNormal.sample(r),
            5.0,
            100_000,
            50,
            -1.6449,
            &mut rng,
        )
        .unwrap();
        assert!(bias.abs() < 0.02, "bias {bias}");
    }

    #[test]
    fn uniform_median_probe() {
        let mut rng = stream_rng(42, &[2]);
        let bias = percentile_convergence_probe(
            |r| r.gen::<f64>(),
            50.0,
            100_000,
            20,
            0.5,
            &mut rng,
        )
        .unwrap();
        assert!(bias.abs() < 0.01, "bias {bias}");
    }

    #[test]
    fn point_mass_probe_has_zero_bias() {
        let mut rng = stream_rng(42, &[3]);
        let bias =
            percentile_convergence_probe(|_| 3.25, 5.0, 100, 10, 3.25, &mut rng).unwrap();
        assert_eq!(bias, 0.0);
    }

    #[test]
    fn bias_shrinks_with_sample_size() {
        // |E[u_hat] - u| at gamma = 5 for standard normal samples, checked at
        // L in {100, 1000, 100000}. Trial counts keep the estimator noise well
        // below the bias gaps.
        let mut rng = stream_rng(314, &[4]);
        let true_q = -1.6448536269514722;
        let bias = |l: usize, trials: usize, rng: &mut ChaCha8Rng| {
            percentile_convergence_probe(
                |r| StandardNormal.sample(r),
                5.0,
                l,
                trials,
                true_q,
                rng,
            )
            .unwrap()
            .abs()
        };
        let b100 = bias(100, 4000, &mut rng);
        let b1k = bias(1000, 4000, &mut rng);
        let b100k = bias(100_000, 50, &mut rng);
        assert!(
            b100 > b1k && b1k > b100k,
            "bias sequence not shrinking: {b100} {b1k} {b100k}"
        );
    }

    proptest! {
        #[test]
        fn monotone_in_each_sample(
            mut samples in proptest::collection::vec(-100.0f64..100.0, 1..40),
            gamma in 0.5f64..99.5,
            bump in 0.0f64..50.0,
            idx in 0usize..40,
        ) {
            let idx = idx % samples.len();
            let before = empirical_percentile(&samples, gamma).unwrap().value;
            samples[idx] += bump;
            let after = empirical_percentile(&samples, gamma).unwrap().value;
            prop_assert!(after >= before - 1e-12);
        }

        #[test]
        fn scale_shift_equivariance(
            samples in proptest::collection::vec(-100.0f64..100.0, 1..40),
            gamma in 0.5f64..99.5,
            a in 0.01f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let base = empirical_percentile(&samples, gamma).unwrap().value;
            let mapped: Vec<f64> = samples.iter().map(|v| a * v + b).collect();
            let scaled = empirical_percentile(&mapped, gamma).unwrap().value;
            prop_assert!((scaled - (a * base + b)).abs() < 1e-9 * (1.0 + scaled.abs()));
        }

        #[test]
        fn gradient_weights_sum_to_one(
            samples in proptest::collection::vec(-100.0f64..100.0, 1..40),
            gamma in 0.5f64..99.5,
        ) {
            let sel = empirical_percentile(&samples, gamma).unwrap();
            let total: f64 = percentile_gradient(&sel).iter().map(|(_, w)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_selected_sample_perturbation_is_inert() {
        // Perturbing a non-selected sample by less than the gap to its sorted
        // neighbors leaves the percentile value unchanged.
        let mut rng = stream_rng(9, &[5]);
        for _ in 0..200 {
            let samples: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() * 10.0).collect();
            let sel = empirical_percentile(&samples, 13.0).unwrap();
            let selected: Vec<usize> = percentile_gradient(&sel).iter().map(|&(i, _)| i).collect();

            let mut sorted = samples.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let min_gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            if min_gap <= 0.0 {
                continue;
            }

            let victim = (0..samples.len())
                .find(|i| !selected.contains(i))
                .unwrap();
            let mut perturbed = samples.clone();
            perturbed[victim] += 0.49 * min_gap;
            let sel2 = empirical_percentile(&perturbed, 13.0).unwrap();
            assert_eq!(sel.value, sel2.value);
        }
    }
}
