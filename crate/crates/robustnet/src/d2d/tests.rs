use super::*;
use crate::rng::stream_rng;

#[test]
fn settings_match_the_deployment_table() {
    let b = D2dConfig::setting_b();
    assert_eq!(b.links, 10);
    assert_eq!(b.region_size_m, 200.0);
    assert_eq!((b.direct_dist_min_m, b.direct_dist_max_m), (20.0, 30.0));
    let c = D2dConfig::setting_c();
    assert_eq!(c.links, 15);
    assert_eq!(c.region_size_m, 300.0);
    assert_eq!((c.direct_dist_min_m, c.direct_dist_max_m), (10.0, 30.0));
    assert!(D2dConfig::for_setting("a").is_ok());
    assert!(D2dConfig::for_setting("D").is_err());
}

#[test]
fn beam_pattern_piecewise_values() {
    let cfg = D2dConfig::setting_a();
    assert_eq!(beam_gain_db(0.0, &cfg), 9.0);
    assert_eq!(beam_gain_db(7.0, &cfg), 6.0);
    assert_eq!(beam_gain_db(-7.0, &cfg), 6.0);
    assert_eq!(beam_gain_db(10.0, &cfg), 6.0);
    assert_eq!(beam_gain_db(90.0, &cfg), -9.0);
    assert_eq!(beam_gain_db(-180.0, &cfg), -9.0);
}

#[test]
fn pathloss_two_slope_behavior() {
    let cfg = D2dConfig::setting_a();
    // Breakpoint at 4 h^2 / lambda = 750 m for 1.5 m antennas at 25 GHz.
    let lambda = 299_792_458.0 / cfg.carrier_hz;
    let r_bp = 4.0 * cfg.antenna_height_m * cfg.antenna_height_m / lambda;
    assert!((r_bp - 750.0).abs() / 750.0 < 1e-3);

    // 20 log10(2) = 6.0206 dB per doubling below the breakpoint.
    let below = pathloss_db(20.0, &cfg) - pathloss_db(10.0, &cfg);
    assert!((below - 6.0206).abs() < 1e-3, "below-slope {below}");
    // 40 log10(2) = 12.0412 dB per doubling above the breakpoint.
    let above = pathloss_db(4.0 * r_bp, &cfg) - pathloss_db(2.0 * r_bp, &cfg);
    assert!((above - 12.0412).abs() < 1e-3, "above-slope {above}");
    // Continuity at the breakpoint.
    let eps = 1e-9 * r_bp;
    let jump = (pathloss_db(r_bp + eps, &cfg) - pathloss_db(r_bp - eps, &cfg)).abs();
    assert!(jump < 1e-6, "discontinuity {jump}");
    // Monotone nondecreasing.
    let mut last = 0.0;
    for step in 1..200 {
        let d = step as f64 * 10.0;
        let pl = pathloss_db(d, &cfg);
        assert!(pl >= last);
        last = pl;
    }
}

#[test]
fn layout_constraints_hold_in_bulk() {
    // Direct distances within the declared range and all cross tx-rx
    // separations >= 5 m, over 10^4 layouts across the three settings.
    let mut failures = 0;
    for (setting_idx, cfg) in [
        D2dConfig::setting_a(),
        D2dConfig::setting_b(),
        D2dConfig::setting_c(),
    ]
    .iter()
    .enumerate()
    {
        let layouts = if setting_idx == 0 { 4000 } else { 3000 };
        for i in 0..layouts {
            let mut rng = stream_rng(1000 + setting_idx as u64, &[i]);
            let s = sample_layout(cfg, &mut rng).unwrap();
            for k in 0..cfg.links {
                let d = dist(s.tx_pos[k], s.rx_pos[k]);
                if d < cfg.direct_dist_min_m - 1e-9 || d > cfg.direct_dist_max_m + 1e-9 {
                    failures += 1;
                }
                for j in 0..cfg.links {
                    if j != k && dist(s.tx_pos[k], s.rx_pos[j]) < cfg.min_cross_separation_m - 1e-9
                    {
                        failures += 1;
                    }
                }
                // Beam-alignment sanity: direct dominates the row median.
                let median = row_median_offdiag(&s.g_pl, cfg.links, k).unwrap();
                if s.g_pl[k * cfg.links + k] <= median {
                    failures += 1;
                }
            }
        }
    }
    assert_eq!(failures, 0);
}

#[test]
fn exhausted_rejection_budget_is_an_error() {
    // 40 links with 30 m separation in a 60 x 60 m region cannot fit.
    let cfg = D2dConfig {
        links: 40,
        region_size_m: 60.0,
        direct_dist_min_m: 5.0,
        direct_dist_max_m: 15.0,
        min_cross_separation_m: 30.0,
        rejection_budget: 200,
        ..D2dConfig::setting_a()
    };
    let mut rng = stream_rng(2, &[0]);
    assert!(matches!(
        sample_layout(&cfg, &mut rng),
        Err(Error::Config(_))
    ));
}

#[test]
fn no_uncertainty_reproduces_the_measured_gains() {
    let cfg = D2dConfig {
        shadowing_std_db: 0.0,
        fast_fading: false,
        ..D2dConfig::setting_a()
    };
    let mut rng = stream_rng(3, &[0]);
    let s = sample_layout(&cfg, &mut rng).unwrap();
    for r in sample_d2d_realizations(&s, &mut rng, 5) {
        assert_eq!(r.g, s.g_pl);
    }
}

#[test]
fn shadowing_std_is_eight_db() {
    let cfg = D2dConfig {
        fast_fading: false,
        ..D2dConfig::setting_a()
    };
    let mut rng = stream_rng(4, &[0]);
    let s = sample_layout(&cfg, &mut rng).unwrap();
    // 10^4 realizations x 100 entries = 1e6 shadowing draws.
    let realizations = sample_d2d_realizations(&s, &mut rng, 10_000);
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    let mut count = 0usize;
    for r in &realizations {
        for (g, gpl) in r.g.iter().zip(&s.g_pl) {
            let s_db = 10.0 * (g / gpl).log10();
            acc += s_db;
            acc2 += s_db * s_db;
            count += 1;
        }
    }
    let mean = acc / count as f64;
    let std = (acc2 / count as f64 - mean * mean).sqrt();
    assert!((std - 8.0).abs() < 0.05, "shadowing std {std} dB");
    assert!(mean.abs() < 0.05, "shadowing mean {mean} dB");
}

#[test]
fn fast_fading_power_has_unit_mean() {
    let cfg = D2dConfig {
        shadowing_std_db: 0.0,
        ..D2dConfig::setting_a()
    };
    let mut rng = stream_rng(5, &[0]);
    let s = sample_layout(&cfg, &mut rng).unwrap();
    let realizations = sample_d2d_realizations(&s, &mut rng, 10_000);
    let mut acc = 0.0;
    let mut count = 0usize;
    for r in &realizations {
        for (g, gpl) in r.g.iter().zip(&s.g_pl) {
            acc += g / gpl;
            count += 1;
        }
    }
    let mean = acc / count as f64;
    assert!((mean - 1.0).abs() < 0.01, "fading mean {mean}");
}

#[test]
fn shadowing_and_fading_are_uncorrelated() {
    let cfg = D2dConfig::setting_a();
    let mut rng = stream_rng(6, &[0]);
    let mut sum_s = 0.0;
    let mut sum_f = 0.0;
    let mut sum_ss = 0.0;
    let mut sum_ff = 0.0;
    let mut sum_sf = 0.0;
    let n = 1_000_000;
    for _ in 0..n {
        let (shadow, fade) = sample_channel_factors(&cfg, &mut rng);
        let s_db = 10.0 * shadow.log10();
        sum_s += s_db;
        sum_f += fade;
        sum_ss += s_db * s_db;
        sum_ff += fade * fade;
        sum_sf += s_db * fade;
    }
    let nf = n as f64;
    let cov = sum_sf / nf - (sum_s / nf) * (sum_f / nf);
    let var_s = sum_ss / nf - (sum_s / nf).powi(2);
    let var_f = sum_ff / nf - (sum_f / nf).powi(2);
    let corr = cov / (var_s * var_f).sqrt();
    assert!(corr.abs() < 0.01, "correlation {corr}");
}

#[test]
fn zero_power_means_zero_rates() {
    let mut rng = stream_rng(7, &[0]);
    let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
    let r = nominal_realization(&s);
    let rates = d2d_rates(&s, &r, &vec![0.0; 10]).unwrap();
    assert!(rates.iter().all(|&v| v == 0.0));
}

#[test]
fn single_link_rate_is_log2_of_one_plus_snr() {
    // g * p / sigma^2 = 3 with w = 1 -> rate = log2(4) = 2 bits/s.
    let cfg = D2dConfig {
        links: 1,
        bandwidth_hz: 1.0,
        noise_psd_dbm_hz: 30.0, // 1 W over 1 Hz
        max_power_dbm: 30.0,    // 1 W
        shadowing_std_db: 0.0,
        fast_fading: false,
        ..D2dConfig::setting_a()
    };
    let s = D2dScenario::from_parts(cfg, vec![[0.0, 0.0]], vec![[5.0, 0.0]], vec![3.0]).unwrap();
    let rates = d2d_rates(&s, &nominal_realization(&s), &[1.0]).unwrap();
    assert!((rates[0] - 2.0).abs() < 1e-12);
}

#[test]
fn rates_match_straight_line_formula() {
    // Independent oracle: evaluate the SINR rate expression with raw loops.
    let mut rng = stream_rng(8, &[0]);
    let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
    let realization = &sample_d2d_realizations(&s, &mut rng, 1)[0];
    let x: Vec<f64> = (0..10).map(|i| 0.05 + 0.09 * i as f64).collect();
    let got = d2d_rates(&s, realization, &x).unwrap();

    let cfg = &s.config;
    let p = 10f64.powf((cfg.max_power_dbm - 30.0) / 10.0);
    let sigma2 = 10f64.powf((cfg.noise_psd_dbm_hz - 30.0) / 10.0) * cfg.bandwidth_hz;
    let n = cfg.links;
    for i in 0..n {
        let signal = realization.g[i * n + i] * p * x[i];
        let interference: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| realization.g[i * n + j] * p * x[j])
            .sum();
        let expected = cfg.bandwidth_hz * (1.0 + signal / (interference + sigma2)).log2();
        assert!(
            (got[i] - expected).abs() < 1e-9 * expected.abs().max(1.0),
            "link {i}: {} vs {expected}",
            got[i]
        );
    }
}

#[test]
fn box_violations_are_usage_errors() {
    let mut rng = stream_rng(9, &[0]);
    let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
    let r = nominal_realization(&s);
    let mut x = vec![0.5; 10];
    x[3] = 1.5;
    assert!(d2d_rates(&s, &r, &x).is_err());
    x[3] = -0.2;
    assert!(d2d_rates(&s, &r, &x).is_err());
    assert!(d2d_rates(&s, &r, &[0.5; 9]).is_err());
    x[3] = 1.0 + 1e-12;
    assert!(d2d_rates(&s, &r, &x).is_ok());
}

#[test]
fn min_rate_gradient_signs_and_finite_differences() {
    let mut xrng = stream_rng(10, &[0]);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for trial in 0..40u64 {
        let mut rng = stream_rng(10, &[1, trial]);
        let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
        let realization = &sample_d2d_realizations(&s, &mut rng, 1)[0];
        let x: Vec<f64> = (0..10).map(|_| 0.1 + 0.8 * xrng.gen::<f64>()).collect();

        let sys = system_for(&s, realization);
        let mut rates = sys.rates(&x);
        let (argmin, min_rate) = sys.min_rate(&x);
        rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if (rates[1] - rates[0]) / rates[0].max(1.0) < 1e-3 {
            continue;
        }
        checked += 1;

        let grad = d2d_min_rate_gradient(&s, realization, &x).unwrap();
        assert!(grad[argmin] >= 0.0);
        for (j, &g) in grad.iter().enumerate() {
            if j != argmin {
                assert!(g <= 0.0);
            }
        }
        let h = 1e-6;
        for j in 0..10 {
            let mut plus = x.clone();
            plus[j] += h;
            let mut minus = x.clone();
            minus[j] -= h;
            let fd = (d2d_min_rate(&s, realization, &plus).unwrap()
                - d2d_min_rate(&s, realization, &minus).unwrap())
                / (2.0 * h);
            let denom = grad[j].abs().max(fd.abs()).max(1e-6 * min_rate.abs().max(1.0));
            worst = worst.max((grad[j] - fd).abs() / denom);
        }
        if checked == 20 {
            break;
        }
    }
    assert!(checked >= 20, "only {checked} tie-free instances");
    assert!(worst < 1e-5, "max relative FD error {worst}");
}

#[test]
fn rates_invariant_to_common_gain_and_noise_scaling() {
    let mut rng = stream_rng(11, &[0]);
    let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
    let realization = sample_d2d_realizations(&s, &mut rng, 1).remove(0);
    let x: Vec<f64> = (0..10).map(|i| 0.1 + 0.05 * i as f64).collect();
    let base = d2d_rates(&s, &realization, &x).unwrap();

    let factor = 100.0;
    let scaled_cfg = D2dConfig {
        noise_psd_dbm_hz: s.config.noise_psd_dbm_hz + 20.0, // x100
        ..s.config.clone()
    };
    let scaled_scenario = D2dScenario {
        config: scaled_cfg,
        tx_pos: s.tx_pos.clone(),
        rx_pos: s.rx_pos.clone(),
        g_pl: s.g_pl.clone(),
    };
    let scaled_real = D2dRealization {
        g: realization.g.iter().map(|g| g * factor).collect(),
    };
    let scaled = d2d_rates(&scaled_scenario, &scaled_real, &x).unwrap();
    for (a, b) in scaled.iter().zip(&base) {
        assert!((a - b).abs() < 1e-6 * b.max(1.0));
    }
}

#[test]
fn stronger_interference_never_raises_the_min_rate() {
    let mut rng = stream_rng(12, &[0]);
    let s = sample_layout(&D2dConfig::setting_a(), &mut rng).unwrap();
    let realization = sample_d2d_realizations(&s, &mut rng, 1).remove(0);
    let x = vec![1.0; 10];
    let (_, base) = system_for(&s, &realization).min_rate(&x);
    for bump in [1.5, 10.0, 1000.0] {
        let mut g = realization.g.clone();
        g[3 * 10 + 7] *= bump; // one interference path
        let worse = system_for(&s, &D2dRealization { g }).min_rate(&x).1;
        assert!(worse <= base + 1e-9);
    }
}

#[test]
fn normalizer_z_scores_its_own_corpus() {
    let cfg = D2dConfig::setting_a();
    let rows: Vec<Vec<f64>> = (0..1200)
        .map(|i| {
            let mut rng = stream_rng(13, &[i]);
            sample_layout(&cfg, &mut rng).unwrap().log_gains_db()
        })
        .collect();
    let norm = InputNormalizer::fit(&rows).unwrap();
    assert_eq!(norm.dim(), 100);

    let dim = norm.dim();
    let mut mean = vec![0.0; dim];
    let mut var = vec![0.0; dim];
    for row in &rows {
        let z = norm.normalize(row).unwrap();
        for (m, v) in mean.iter_mut().zip(&z) {
            *m += v;
        }
        for (s, v) in var.iter_mut().zip(&z) {
            *s += v * v;
        }
    }
    for i in 0..dim {
        let m = mean[i] / rows.len() as f64;
        let sd = (var[i] / rows.len() as f64 - m * m).sqrt();
        assert!(m.abs() < 1e-6, "entry {i} mean {m}");
        assert!((sd - 1.0).abs() < 1e-3, "entry {i} std {sd}");
    }
}

#[test]
fn constant_corpus_and_empty_corpus_error() {
    let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![1.0, 2.0, 3.0]).collect();
    assert!(matches!(InputNormalizer::fit(&rows), Err(Error::Usage(_))));
    assert!(matches!(InputNormalizer::fit(&[]), Err(Error::Usage(_))));
}

#[test]
fn normalize_round_trips() {
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|i| (0..5).map(|j| (i * 5 + j) as f64 * 0.37 - 3.0 + (i as f64).sin()).collect())
        .collect();
    let norm = InputNormalizer::fit(&rows).unwrap();
    let v: Vec<f64> = vec![0.3, -1.0, 2.5, 7.0, -0.01];
    let back = norm.denormalize(&norm.normalize(&v).unwrap()).unwrap();
    for (a, b) in back.iter().zip(&v) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(norm.normalize(&[1.0]).is_err());
}

#[test]
fn normalizer_text_round_trip() {
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| (0..4).map(|j| ((i + j) as f64).sqrt() + j as f64).collect())
        .collect();
    let norm = InputNormalizer::fit(&rows).unwrap();
    let text = norm.to_text();
    let parsed = InputNormalizer::from_text(&text).unwrap();
    assert_eq!(norm, parsed);
    assert_eq!(parsed.to_text(), text);
}

#[test]
fn fit_from_layouts_enforces_the_corpus_floor() {
    let cfg = D2dConfig::setting_a();
    assert!(matches!(
        InputNormalizer::fit_from_layouts(&cfg, 100, 1),
        Err(Error::Config(_))
    ));
}

#[test]
fn layout_fixture_round_trip() {
    let mut rng = stream_rng(14, &[0]);
    let s = sample_layout(&D2dConfig::setting_b(), &mut rng).unwrap();
    let text = s.to_text();
    let parsed = D2dScenario::from_text(&text).unwrap();
    assert_eq!(parsed.config, s.config);
    assert_eq!(parsed.tx_pos, s.tx_pos);
    assert_eq!(parsed.rx_pos, s.rx_pos);
    for (a, b) in parsed.g_pl.iter().zip(&s.g_pl) {
        assert!((a - b).abs() <= 1e-12 * b.abs());
    }
    assert!(D2dScenario::from_text(&text[..text.len() / 2]).is_err());
}
