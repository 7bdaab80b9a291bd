//! Outage statistics of uniform power loading in the MIMO downlink.
//!
//! Draws a pool of downlink scenarios, allocates equal power to every user,
//! and estimates each scenario's nominal minimum rate and its 5th-percentile
//! minimum rate under channel-estimation uncertainty. No training involved;
//! this is the floor any learned policy should beat on the robust metric.
//!
//! Usage: cargo run --release --example uniform_power_outage [pool] [l_eval]

use rayon::prelude::*;
use robustnet::mimo::{self, MimoConfig};
use robustnet::percentile::empirical_percentile;
use robustnet::rng::stream_rng;
use robustnet::units::MBPS;

fn main() -> robustnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let pool: usize = args.next().map(|a| a.parse().unwrap()).unwrap_or(200);
    let l_eval: usize = args.next().map(|a| a.parse().unwrap()).unwrap_or(500);

    let config = MimoConfig::default();
    let gamma = 5.0;
    let seed = 2024u64;
    let equal = vec![1.0 / config.users as f64; config.users];

    let per_scenario: Vec<(f64, f64)> = (0..pool)
        .into_par_iter()
        .map(|i| {
            let mut srng = stream_rng(seed, &[1, i as u64]);
            let scenario = mimo::sample_scenario(&config, &mut srng)?;
            let nominal =
                mimo::mimo_min_rate(&scenario, &mimo::nominal_realization(&scenario), &equal)?;
            let mut rrng = stream_rng(seed, &[2, i as u64]);
            let realizations = mimo::sample_realizations(&scenario, &mut rrng, l_eval);
            let utilities: Vec<f64> = realizations
                .iter()
                .map(|r| mimo::mimo_min_rate(&scenario, r, &equal))
                .collect::<robustnet::Result<_>>()?;
            let robust = empirical_percentile(&utilities, gamma)?.value;
            Ok((nominal, robust))
        })
        .collect::<robustnet::Result<_>>()?;

    let mean_nominal = per_scenario.iter().map(|p| p.0).sum::<f64>() / pool as f64;
    let mean_robust = per_scenario.iter().map(|p| p.1).sum::<f64>() / pool as f64;

    println!("uniform power loading, M={} K={}", config.antennas, config.users);
    println!("pool {pool} scenarios x {l_eval} realizations, gamma {gamma}%");
    println!("mean nominal min-rate: {:.3} Mbps", mean_nominal / MBPS);
    println!(
        "mean robust {}th-percentile min-rate: {:.3} Mbps",
        gamma, mean_robust / MBPS
    );
    Ok(())
}
