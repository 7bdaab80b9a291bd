//! Multiuser MIMO downlink environment.
//!
//! A scenario is one downlink instance: an estimated channel `H_hat` drawn
//! i.i.d. CN(0,1), regularized zero-forcing beamformers built from it, and
//! the estimated effective channel `H_hat^H B` whose entry magnitudes feed
//! the allocation network. Channel uncertainty enters as an additive
//! estimation error: a true-channel realization is `H = H_hat + E` with
//! `E` i.i.d. CN(0, sigma_e^2).

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::percentile::empirical_percentile;
use crate::rng::stream_rng;
use crate::system::InterferenceSystem;
use crate::units::noise_power_watts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MimoConfig {
    /// Base-station antenna count M.
    pub antennas: usize,
    /// Single-antenna user count K.
    pub users: usize,
    /// Total downlink power budget P, watts.
    pub total_power_watts: f64,
    /// Bandwidth w, Hz.
    pub bandwidth_hz: f64,
    /// Background noise PSD, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Estimation-error variance sigma_e^2 of Eq.-style additive error.
    pub estimation_error_var: f64,
    /// RZF regularization factor alpha.
    pub rzf_alpha: f64,
}

impl Default for MimoConfig {
    fn default() -> Self {
        Self {
            antennas: 4,
            users: 4,
            total_power_watts: 1.0,
            bandwidth_hz: 1e7,
            noise_psd_dbm_hz: -75.0,
            estimation_error_var: 0.075,
            rzf_alpha: 0.2,
        }
    }
}

impl MimoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::Config("antennas and users must be >= 1".into()));
        }
        if !(self.total_power_watts > 0.0)
            || !(self.bandwidth_hz > 0.0)
            || self.estimation_error_var < 0.0
            || self.rzf_alpha < 0.0
        {
            return Err(Error::Config("invalid MIMO physical constants".into()));
        }
        Ok(())
    }

    pub fn noise_watts(&self) -> f64 {
        noise_power_watts(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }
}

/// One downlink problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MimoScenario {
    pub config: MimoConfig,
    /// Estimated channel, M x K.
    pub h_hat: CMat,
    /// Unit-norm beamformer columns, M x K.
    pub beamformers: CMat,
    /// Estimated effective channel `H_hat^H B`, K x K.
    pub h_eff_hat: CMat,
}

/// A true-channel draw conditioned on a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct MimoRealization {
    /// True channel, M x K.
    pub h: CMat,
}

/// One CN(0, var) draw: real and imaginary parts are N(0, var / 2).
fn sample_cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Unnormalized RZF beamformers `B' = H_hat (H_hat^H H_hat + alpha I)^{-1}`.
pub fn rzf_unnormalized(h_hat: &CMat, alpha: f64) -> Result<CMat> {
    let gram = h_hat.hermitian().mul(h_hat).add_scaled_identity(alpha);
    let inv = gram.invert().map_err(|e| {
        Error::Numerical(format!("RZF Gram matrix inversion failed (alpha={alpha}): {e}"))
    })?;
    Ok(h_hat.mul(&inv))
}

/// Column-normalized RZF beamformers.
pub fn rzf_beamformers(h_hat: &CMat, alpha: f64) -> Result<CMat> {
    rzf_unnormalized(h_hat, alpha)?.normalize_columns()
}

impl MimoScenario {
    /// Assemble a scenario from explicit channel and beamformers, validating
    /// the unit-norm invariant and recomputing the effective channel.
    pub fn from_parts(config: MimoConfig, h_hat: CMat, beamformers: CMat) -> Result<Self> {
        config.validate()?;
        let (m, k) = (config.antennas, config.users);
        if h_hat.rows() != m || h_hat.cols() != k {
            return Err(Error::Config(format!(
                "h_hat is {}x{}, expected {m}x{k}",
                h_hat.rows(),
                h_hat.cols()
            )));
        }
        if beamformers.rows() != m || beamformers.cols() != k {
            return Err(Error::Config(format!(
                "beamformers are {}x{}, expected {m}x{k}",
                beamformers.rows(),
                beamformers.cols()
            )));
        }
        for (j, norm) in beamformers.column_norms().iter().enumerate() {
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "beamformer column {j} has norm {norm}, expected 1"
                )));
            }
        }
        let h_eff_hat = h_hat.hermitian().mul(&beamformers);
        Ok(Self {
            config,
            h_hat,
            beamformers,
            h_eff_hat,
        })
    }

    /// Network input: entry magnitudes of the estimated effective channel,
    /// flattened row-major into a length K*K vector.
    pub fn input_features(&self) -> Vec<f64> {
        self.h_eff_hat.entries().iter().map(|c| c.norm()).collect()
    }
}

/// Draw a fresh scenario: `H_hat` i.i.d. CN(0,1), then RZF beamformers and
/// the effective channel.
pub fn sample_scenario(config: &MimoConfig, rng: &mut ChaCha8Rng) -> Result<MimoScenario> {
    config.validate()?;
    let (m, k) = (config.antennas, config.users);
    let mut h_hat = CMat::zeros(m, k);
    for r in 0..m {
        for c in 0..k {
            h_hat.set(r, c, sample_cn(rng, 1.0));
        }
    }
    let beamformers = rzf_beamformers(&h_hat, config.rzf_alpha)?;
    MimoScenario::from_parts(config.clone(), h_hat, beamformers)
}

/// Draw `l` true-channel realizations `H = H_hat + E`, `E` i.i.d.
/// CN(0, sigma_e^2).
pub fn sample_realizations(
    scenario: &MimoScenario,
    rng: &mut ChaCha8Rng,
    l: usize,
) -> Vec<MimoRealization> {
    let (m, k) = (scenario.h_hat.rows(), scenario.h_hat.cols());
    let var = scenario.config.estimation_error_var;
    (0..l)
        .map(|_| {
            let mut h = scenario.h_hat.clone();
            for r in 0..m {
                for c in 0..k {
                    h.set(r, c, h.get(r, c) + sample_cn(rng, var));
                }
            }
            MimoRealization { h }
        })
        .collect()
}

/// The nominal realization `p = q`: the true channel taken to equal the
/// estimate.
pub fn nominal_realization(scenario: &MimoScenario) -> MimoRealization {
    MimoRealization {
        h: scenario.h_hat.clone(),
    }
}

/// Effective power gains `|h_k^H b_j|^2` for a realization, row-major K x K.
pub fn effective_gains(scenario: &MimoScenario, realization: &MimoRealization) -> Vec<f64> {
    let h_eff = realization.h.hermitian().mul(&scenario.beamformers);
    h_eff.entries().iter().map(|c| c.norm_sqr()).collect()
}

/// The interference system induced by a realization: coupling `P |h_k^H b_j|^2`.
pub fn system_for(scenario: &MimoScenario, realization: &MimoRealization) -> InterferenceSystem {
    let k = scenario.config.users;
    let p = scenario.config.total_power_watts;
    let coupling = effective_gains(scenario, realization)
        .into_iter()
        .map(|g| p * g)
        .collect();
    InterferenceSystem::new(
        k,
        coupling,
        scenario.config.noise_watts(),
        scenario.config.bandwidth_hz,
    )
}

/// The nominal interference system (gains from the estimated channel).
pub fn nominal_system(scenario: &MimoScenario) -> InterferenceSystem {
    system_for(scenario, &nominal_realization(scenario))
}

/// Validate a power-loading vector against the total-power simplex
/// (`sum x <= 1`, `x >= 0`, within 1e-9) and return it clamped nonnegative.
fn validated_simplex(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if x.len() != k {
        return Err(Error::Usage(format!(
            "allocation length {} does not match user count {k}",
            x.len()
        )));
    }
    let mut sum = 0.0;
    for &v in x {
        if !v.is_finite() || v < -1e-9 {
            return Err(Error::Usage(format!("allocation entry {v} outside simplex")));
        }
        sum += v;
    }
    if sum > 1.0 + 1e-9 {
        return Err(Error::Usage(format!(
            "allocation sums to {sum}, violating the total-power constraint"
        )));
    }
    Ok(x.iter().map(|&v| v.max(0.0)).collect())
}

/// Per-user rates in bits/s under a realization.
pub fn mimo_rates(
    scenario: &MimoScenario,
    realization: &MimoRealization,
    x: &[f64],
) -> Result<Vec<f64>> {
    let x = validated_simplex(x, scenario.config.users)?;
    Ok(system_for(scenario, realization).rates(&x))
}

/// Minimum user rate in bits/s under a realization.
pub fn mimo_min_rate(
    scenario: &MimoScenario,
    realization: &MimoRealization,
    x: &[f64],
) -> Result<f64> {
    let x = validated_simplex(x, scenario.config.users)?;
    Ok(system_for(scenario, realization).min_rate(&x).1)
}

/// Gradient of the minimum user rate with respect to the power loading.
pub fn mimo_min_rate_gradient(
    scenario: &MimoScenario,
    realization: &MimoRealization,
    x: &[f64],
) -> Result<Vec<f64>> {
    let x = validated_simplex(x, scenario.config.users)?;
    Ok(system_for(scenario, realization).min_rate_gradient(&x))
}

/// Result of the RZF regularization sweep.
#[derive(Clone, Debug)]
pub struct AlphaSelection {
    pub alpha: f64,
    /// `(alpha, median min-rate under uncertainty at equal power)` per grid point.
    pub medians: Vec<(f64, f64)>,
}

/// Select the RZF alpha maximizing the median min-rate under the uncertainty
/// distribution, with equal power allocation across users.
///
/// Scenario and error draws are paired across grid points (common random
/// numbers), so the sweep compares alphas on identical channels.
pub fn select_alpha(
    config: &MimoConfig,
    grid: &[f64],
    n_scenarios: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<AlphaSelection> {
    if grid.is_empty() {
        return Err(Error::Usage("alpha grid must be non-empty".into()));
    }
    config.validate()?;
    let equal = vec![1.0 / config.users as f64; config.users];
    let mut medians = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let cfg = MimoConfig {
            rzf_alpha: alpha,
            ..config.clone()
        };
        let pool: Vec<f64> = (0..n_scenarios)
            .into_par_iter()
            .map(|i| {
                let mut srng = stream_rng(seed, &[0x414c_5048, i as u64]);
                let scenario = sample_scenario(&cfg, &mut srng)?;
                let mut rrng = stream_rng(seed, &[0x414c_5052, i as u64]);
                let realizations = sample_realizations(&scenario, &mut rrng, n_realizations);
                let sys_rates: Vec<f64> = realizations
                    .iter()
                    .map(|r| system_for(&scenario, r).min_rate(&equal).1)
                    .collect();
                Ok(sys_rates)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let median = empirical_percentile(&pool, 50.0)?.value;
        medians.push((alpha, median));
    }
    let best = medians
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok(AlphaSelection {
        alpha: best.0,
        medians,
    })
}

// ---------------------------------------------------------------------------
// Fixture serialization
// ---------------------------------------------------------------------------

const FIXTURE_VERSION: &str = "robustnet-mimo-scenario-v1";

impl MimoScenario {
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{FIXTURE_VERSION}");
        let c = &self.config;
        let _ = writeln!(out, "antennas {}", c.antennas);
        let _ = writeln!(out, "users {}", c.users);
        let _ = writeln!(out, "total_power_watts {}", c.total_power_watts);
        let _ = writeln!(out, "bandwidth_hz {}", c.bandwidth_hz);
        let _ = writeln!(out, "noise_psd_dbm_hz {}", c.noise_psd_dbm_hz);
        let _ = writeln!(out, "estimation_error_var {}", c.estimation_error_var);
        let _ = writeln!(out, "rzf_alpha {}", c.rzf_alpha);
        for (name, m) in [("h_hat", &self.h_hat), ("beamformers", &self.beamformers)] {
            let _ = writeln!(out, "{name}");
            for r in 0..m.rows() {
                let row: Vec<String> = (0..m.cols())
                    .map(|cidx| {
                        let v = m.get(r, cidx);
                        format!("({},{})", v.re, v.im)
                    })
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        let _ = writeln!(out, "end");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| -> Result<&str> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("truncated scenario fixture: expected {what}")))
        };
        let version = next("version")?;
        if version != FIXTURE_VERSION {
            return Err(Error::Format(format!(
                "unsupported scenario fixture version {version:?}"
            )));
        }
        let mut config = MimoConfig::default();
        let mut parse_kv = |key: &str| -> Result<f64> {
            let k = next("key")?;
            if k != key {
                return Err(Error::Format(format!("expected key {key:?}, found {k:?}")));
            }
            let v = next("value")?;
            v.parse()
                .map_err(|_| Error::Format(format!("bad value for {key}: {v:?}")))
        };
        config.antennas = parse_kv("antennas")? as usize;
        config.users = parse_kv("users")? as usize;
        config.total_power_watts = parse_kv("total_power_watts")?;
        config.bandwidth_hz = parse_kv("bandwidth_hz")?;
        config.noise_psd_dbm_hz = parse_kv("noise_psd_dbm_hz")?;
        config.estimation_error_var = parse_kv("estimation_error_var")?;
        config.rzf_alpha = parse_kv("rzf_alpha")?;

        let mut read_matrix = |name: &str, rows: usize, cols: usize| -> Result<CMat> {
            let header = next("matrix header")?;
            if header != name {
                return Err(Error::Format(format!(
                    "expected matrix {name:?}, found {header:?}"
                )));
            }
            let mut m = CMat::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    let tok = next("complex entry")?;
                    let inner = tok
                        .strip_prefix('(')
                        .and_then(|t| t.strip_suffix(')'))
                        .ok_or_else(|| Error::Format(format!("bad complex entry {tok:?}")))?;
                    let (re, im) = inner
                        .split_once(',')
                        .ok_or_else(|| Error::Format(format!("bad complex entry {tok:?}")))?;
                    let re: f64 = re
                        .parse()
                        .map_err(|_| Error::Format(format!("bad real part {re:?}")))?;
                    let im: f64 = im
                        .parse()
                        .map_err(|_| Error::Format(format!("bad imaginary part {im:?}")))?;
                    m.set(r, c, Complex64::new(re, im));
                }
            }
            Ok(m)
        };
        let h_hat = read_matrix("h_hat", config.antennas, config.users)?;
        let beamformers = read_matrix("beamformers", config.antennas, config.users)?;
        if next("end marker")? != "end" {
            return Err(Error::Format("missing end marker".into()));
        }
        MimoScenario::from_parts(config, h_hat, beamformers)
    }
}
