//! Device-to-device network environment.
//!
//! Layouts place N transmitter-receiver pairs in a square region with a
//! minimum separation between devices of different links. The measured
//! quantity is the pathloss-with-beam-gain matrix `G_pl` (two-slope
//! short-range outdoor pathloss at mmWave, piecewise beam pattern at both
//! ends); channel uncertainty multiplies each entry by log-normal shadowing
//! and a unit-mean exponential fast-fading power factor. The allocation
//! network sees only z-scored log-scale `G_pl` entries.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::percentile::empirical_percentile;
use crate::rng::stream_rng;
use crate::system::InterferenceSystem;
use crate::units::{dbm_to_watts, noise_power_watts};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct D2dConfig {
    /// Link count N.
    pub links: usize,
    /// Side length of the square deployment region, meters.
    pub region_size_m: f64,
    /// Direct-link distance range, meters.
    pub direct_dist_min_m: f64,
    pub direct_dist_max_m: f64,
    /// Minimum distance between a transmitter and any other link's receiver.
    pub min_cross_separation_m: f64,
    /// Per-link maximum transmit power, dBm.
    pub max_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_std_db: f64,
    /// Multiply in the unit-mean exponential fast-fading power factor.
    pub fast_fading: bool,
    pub carrier_hz: f64,
    /// Antenna height at both ends for the two-slope breakpoint, meters.
    pub antenna_height_m: f64,
    /// Beam gain on an exactly aligned (direct) path, dB, applied per end.
    pub beam_direct_gain_db: f64,
    /// Main-lobe gain, dB, within the half-width below.
    pub beam_mainlobe_gain_db: f64,
    pub beam_mainlobe_halfwidth_deg: f64,
    /// Side-lobe gain, dB, outside the main lobe.
    pub beam_sidelobe_gain_db: f64,
    /// Placement attempts per link before giving up.
    pub rejection_budget: usize,
}

impl D2dConfig {
    /// Setting A: 10 links, 150 x 150 m, direct distances 5-15 m.
    pub fn setting_a() -> Self {
        Self {
            links: 10,
            region_size_m: 150.0,
            direct_dist_min_m: 5.0,
            direct_dist_max_m: 15.0,
            min_cross_separation_m: 5.0,
            max_power_dbm: 30.0,
            bandwidth_hz: 5e6,
            noise_psd_dbm_hz: -169.0,
            shadowing_std_db: 8.0,
            fast_fading: true,
            carrier_hz: 25e9,
            antenna_height_m: 1.5,
            beam_direct_gain_db: 9.0,
            beam_mainlobe_gain_db: 6.0,
            beam_mainlobe_halfwidth_deg: 10.0,
            beam_sidelobe_gain_db: -9.0,
            rejection_budget: 10_000,
        }
    }

    /// Setting B: 10 links, 200 x 200 m, direct distances 20-30 m.
    pub fn setting_b() -> Self {
        Self {
            region_size_m: 200.0,
            direct_dist_min_m: 20.0,
            direct_dist_max_m: 30.0,
            ..Self::setting_a()
        }
    }

    /// Setting C: 15 links, 300 x 300 m, direct distances 10-30 m.
    pub fn setting_c() -> Self {
        Self {
            links: 15,
            region_size_m: 300.0,
            direct_dist_min_m: 10.0,
            direct_dist_max_m: 30.0,
            ..Self::setting_a()
        }
    }

    pub fn for_setting(name: &str) -> Result<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::setting_a()),
            "B" => Ok(Self::setting_b()),
            "C" => Ok(Self::setting_c()),
            other => Err(Error::Config(format!("unknown D2D setting {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links == 0 {
            return Err(Error::Config("link count must be >= 1".into()));
        }
        if !(self.region_size_m > 0.0)
            || !(self.direct_dist_min_m > 0.0)
            || self.direct_dist_max_m < self.direct_dist_min_m
            || self.min_cross_separation_m < 0.0
            || !(self.bandwidth_hz > 0.0)
            || !(self.carrier_hz > 0.0)
            || !(self.antenna_height_m > 0.0)
            || self.shadowing_std_db < 0.0
        {
            return Err(Error::Config("invalid D2D physical constants".into()));
        }
        if self.direct_dist_max_m > self.region_size_m {
            return Err(Error::Config(
                "direct-link distances cannot exceed the region size".into(),
            ));
        }
        Ok(())
    }

    pub fn max_power_watts(&self) -> f64 {
        dbm_to_watts(self.max_power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        noise_power_watts(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }
}

/// One network layout with its measured pathloss/beam-gain matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct D2dScenario {
    pub config: D2dConfig,
    /// Transmitter positions, meters.
    pub tx_pos: Vec<[f64; 2]>,
    /// Receiver positions, meters.
    pub rx_pos: Vec<[f64; 2]>,
    /// Linear-scale pathloss x beam gains; entry `(i, j)` is tx j -> rx i.
    pub g_pl: Vec<f64>,
}

/// One realized channel-gain matrix (pathloss x shadowing x fading).
#[derive(Clone, Debug, PartialEq)]
pub struct D2dRealization {
    pub g: Vec<f64>,
}

/// Two-slope LoS pathloss in dB: 20 dB/decade below the breakpoint
/// `4 h^2 / lambda`, 40 dB/decade above, continuous at the breakpoint.
pub fn pathloss_db(distance_m: f64, config: &D2dConfig) -> f64 {
    assert!(distance_m > 0.0, "pathloss needs a positive distance");
    let lambda = SPEED_OF_LIGHT / config.carrier_hz;
    let h = config.antenna_height_m;
    let r_bp = 4.0 * h * h / lambda;
    let l_bp = (20.0 * (lambda * lambda / (8.0 * std::f64::consts::PI * h * h)).log10()).abs();
    if distance_m <= r_bp {
        l_bp + 20.0 * (distance_m / r_bp).log10()
    } else {
        l_bp + 40.0 * (distance_m / r_bp).log10()
    }
}

/// Piecewise beam-pattern gain in dB at an angle off boresight (degrees).
///
/// Exactly aligned paths get the direct gain; the main lobe extends to the
/// configured half-width; everything else is side lobe.
pub fn beam_gain_db(angle_off_boresight_deg: f64, config: &D2dConfig) -> f64 {
    let a = angle_off_boresight_deg.abs();
    if a == 0.0 {
        config.beam_direct_gain_db
    } else if a <= config.beam_mainlobe_halfwidth_deg {
        config.beam_mainlobe_gain_db
    } else {
        config.beam_sidelobe_gain_db
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle in degrees between directions `to_a` and `to_b` seen from `origin`.
fn angle_between_deg(origin: [f64; 2], to_a: [f64; 2], to_b: [f64; 2]) -> f64 {
    let u = [to_a[0] - origin[0], to_a[1] - origin[1]];
    let v = [to_b[0] - origin[0], to_b[1] - origin[1]];
    let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let cosine = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
    cosine.acos().to_degrees()
}

fn build_g_pl(config: &D2dConfig, tx: &[[f64; 2]], rx: &[[f64; 2]]) -> Vec<f64> {
    let n = config.links;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = dist(tx[j], rx[i]);
            let pl = pathloss_db(d, config);
            let (gain_tx, gain_rx) = if i == j {
                (beam_gain_db(0.0, config), beam_gain_db(0.0, config))
            } else {
                // Each end's boresight points at its own paired device.
                let theta_tx = angle_between_deg(tx[j], rx[i], rx[j]);
                let theta_rx = angle_between_deg(rx[i], tx[j], tx[i]);
                (
                    beam_gain_db(theta_tx, config),
                    beam_gain_db(theta_rx, config),
                )
            };
            g[i * n + j] = 10f64.powf((-pl + gain_tx + gain_rx) / 10.0);
        }
    }
    g
}

fn row_median_offdiag(g: &[f64], n: usize, i: usize) -> Option<f64> {
    let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| g[i * n + j]).collect();
    if row.is_empty() {
        None
    } else {
        Some(empirical_percentile(&row, 50.0).unwrap().value)
    }
}

impl D2dScenario {
    /// Assemble a scenario from explicit positions and gain matrix,
    /// validating shapes, positivity, and the beam-alignment sanity check
    /// (each direct gain above its row's off-diagonal median).
    pub fn from_parts(
        config: D2dConfig,
        tx_pos: Vec<[f64; 2]>,
        rx_pos: Vec<[f64; 2]>,
        g_pl: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.links;
        if tx_pos.len() != n || rx_pos.len() != n || g_pl.len() != n * n {
            return Err(Error::Config("layout shape mismatch".into()));
        }
        if g_pl.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "gain matrix entries must be strictly positive and finite".into(),
            ));
        }
        for i in 0..n {
            if let Some(median) = row_median_offdiag(&g_pl, n, i) {
                if g_pl[i * n + i] <= median {
                    return Err(Error::Config(format!(
                        "direct gain of link {i} does not dominate its row's interference median"
                    )));
                }
            }
        }
        Ok(Self {
            config,
            tx_pos,
            rx_pos,
            g_pl,
        })
    }

    /// Log-scale (dB) gain entries, flattened row-major; the raw network input.
    pub fn log_gains_db(&self) -> Vec<f64> {
        self.g_pl.iter().map(|g| 10.0 * g.log10()).collect()
    }
}

/// Draw one layout by rejection sampling.
///
/// Transmitters fall uniformly in the region; each receiver is placed at a
/// uniform distance (within the setting's direct range) and uniform angle,
/// re-drawn until it lies inside the region and every cross tx-rx pair of
/// distinct links is at least the configured separation apart.
pub fn sample_layout(config: &D2dConfig, rng: &mut ChaCha8Rng) -> Result<D2dScenario> {
    config.validate()?;
    let n = config.links;
    // A layout whose gain matrix fails the beam-alignment sanity check is
    // redrawn wholesale; this is essentially never needed in the standard
    // settings.
    for _layout_attempt in 0..64 {
        let mut tx: Vec<[f64; 2]> = Vec::with_capacity(n);
        let mut rx: Vec<[f64; 2]> = Vec::with_capacity(n);
        'links: for _ in 0..n {
            for _attempt in 0..config.rejection_budget {
                let t = [
                    rng.gen::<f64>() * config.region_size_m,
                    rng.gen::<f64>() * config.region_size_m,
                ];
                let d = config.direct_dist_min_m
                    + rng.gen::<f64>() * (config.direct_dist_max_m - config.direct_dist_min_m);
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let r = [t[0] + d * theta.cos(), t[1] + d * theta.sin()];
                let in_region = r[0] >= 0.0
                    && r[0] <= config.region_size_m
                    && r[1] >= 0.0
                    && r[1] <= config.region_size_m;
                if !in_region {
                    continue;
                }
                let sep = config.min_cross_separation_m;
                let clear = tx
                    .iter()
                    .zip(&rx)
                    .all(|(&tj, &rj)| dist(t, rj) >= sep && dist(tj, r) >= sep);
                if clear {
                    tx.push(t);
                    rx.push(r);
                    continue 'links;
                }
            }
            return Err(Error::Config(format!(
                "layout rejection budget exhausted after {} attempts per link",
                config.rejection_budget
            )));
        }
        let g_pl = build_g_pl(config, &tx, &rx);
        if let Ok(s) = D2dScenario::from_parts(config.clone(), tx, rx, g_pl) {
            return Ok(s);
        }
    }
    Err(Error::Config(
        "could not sample a layout passing the beam-alignment sanity check".into(),
    ))
}

/// One (shadowing, fading) factor pair for a single matrix entry.
pub(crate) fn sample_channel_factors(config: &D2dConfig, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let shadow = if config.shadowing_std_db > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        10f64.powf(config.shadowing_std_db * z / 10.0)
    } else {
        1.0
    };
    let fade = if config.fast_fading {
        rng.sample::<f64, _>(Exp1)
    } else {
        1.0
    };
    (shadow, fade)
}

/// Draw `l` realized gain matrices `g = g_pl * shadow * fade`, i.i.d. per
/// entry and per realization.
pub fn sample_d2d_realizations(
    scenario: &D2dScenario,
    rng: &mut ChaCha8Rng,
    l: usize,
) -> Vec<D2dRealization> {
    (0..l)
        .map(|_| {
            let g = scenario
                .g_pl
                .iter()
                .map(|&gpl| {
                    let (shadow, fade) = sample_channel_factors(&scenario.config, rng);
                    gpl * shadow * fade
                })
                .collect();
            D2dRealization { g }
        })
        .collect()
}

/// The nominal realization `p = q`: gains equal to the measured pathloss.
pub fn nominal_realization(scenario: &D2dScenario) -> D2dRealization {
    D2dRealization {
        g: scenario.g_pl.clone(),
    }
}

/// The interference system of a realization: coupling `p_max * g_ij`.
pub fn system_for(scenario: &D2dScenario, realization: &D2dRealization) -> InterferenceSystem {
    let p = scenario.config.max_power_watts();
    let coupling = realization.g.iter().map(|&g| p * g).collect();
    InterferenceSystem::new(
        scenario.config.links,
        coupling,
        scenario.config.noise_watts(),
        scenario.config.bandwidth_hz,
    )
}

/// The nominal interference system (gains from the measured matrix).
pub fn nominal_system(scenario: &D2dScenario) -> InterferenceSystem {
    system_for(scenario, &nominal_realization(scenario))
}

/// Validate a power-control vector against the per-link box `[0, 1]^N`
/// (within 1e-9) and return it clamped into the box.
fn validated_box(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n {
        return Err(Error::Usage(format!(
            "allocation length {} does not match link count {n}",
            x.len()
        )));
    }
    for &v in x {
        if !v.is_finite() || v < -1e-9 || v > 1.0 + 1e-9 {
            return Err(Error::Usage(format!(
                "allocation entry {v} outside the [0, 1] box"
            )));
        }
    }
    Ok(x.iter().map(|&v| v.clamp(0.0, 1.0)).collect())
}

/// Per-link rates in bits/s under a realization.
pub fn d2d_rates(
    scenario: &D2dScenario,
    realization: &D2dRealization,
    x: &[f64],
) -> Result<Vec<f64>> {
    let x = validated_box(x, scenario.config.links)?;
    Ok(system_for(scenario, realization).rates(&x))
}

/// Minimum link rate in bits/s under a realization.
pub fn d2d_min_rate(
    scenario: &D2dScenario,
    realization: &D2dRealization,
    x: &[f64],
) -> Result<f64> {
    let x = validated_box(x, scenario.config.links)?;
    Ok(system_for(scenario, realization).min_rate(&x).1)
}

/// Gradient of the minimum link rate with respect to the power controls.
pub fn d2d_min_rate_gradient(
    scenario: &D2dScenario,
    realization: &D2dRealization,
    x: &[f64],
) -> Result<Vec<f64>> {
    let x = validated_box(x, scenario.config.links)?;
    Ok(system_for(scenario, realization).min_rate_gradient(&x))
}

// ---------------------------------------------------------------------------
// Input normalization
// ---------------------------------------------------------------------------

/// Per-entry z-scoring statistics for the N^2 log-scale gain inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct InputNormalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl InputNormalizer {
    /// Fit per-entry mean and standard deviation over a corpus of raw input
    /// rows. An empty corpus or an entry with (near-)zero spread is an error.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let count = rows.len();
        if count == 0 {
            return Err(Error::Usage("cannot fit a normalizer on no data".into()));
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Usage("normalizer corpus rows differ in length".into()));
        }
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = vec![0.0; dim];
        for (s, v) in std.iter_mut().zip(&var) {
            *s = (v / count as f64).sqrt();
        }
        if let Some(pos) = std
            .iter()
            .zip(&mean)
            .position(|(s, m)| *s <= 1e-12 * (1.0 + m.abs()))
        {
            return Err(Error::Usage(format!(
                "input entry {pos} has (near-)zero spread; cannot z-score"
            )));
        }
        Ok(Self { mean, std })
    }

    /// Fit on freshly sampled layouts; the training-time path.
    pub fn fit_from_layouts(config: &D2dConfig, n_layouts: usize, seed: u64) -> Result<Self> {
        if n_layouts < 1000 {
            return Err(Error::Config(format!(
                "normalizer needs at least 1000 training layouts, got {n_layouts}"
            )));
        }
        let rows = (0..n_layouts)
            .map(|i| {
                let mut rng = stream_rng(seed, &[0x4e4f_524d, i as u64]);
                Ok(sample_layout(config, &mut rng)?.log_gains_db())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::fit(&rows)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Z-score a raw log-scale input row.
    pub fn normalize(&self, log_gains_db: &[f64]) -> Result<Vec<f64>> {
        if log_gains_db.len() != self.dim() {
            return Err(Error::Usage(format!(
                "input length {} does not match normalizer dimension {}",
                log_gains_db.len(),
                self.dim()
            )));
        }
        Ok(log_gains_db
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn denormalize(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Usage(format!(
                "input length {} does not match normalizer dimension {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "robustnet-normalizer-v1");
        let _ = writeln!(out, "dim {}", self.dim());
        let mean: Vec<String> = self.mean.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "mean {}", mean.join(" "));
        let std: Vec<String> = self.std.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "std {}", std.join(" "));
        let _ = writeln!(out, "end");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| -> Result<&str> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("truncated normalizer: expected {what}")))
        };
        if next("version")? != "robustnet-normalizer-v1" {
            return Err(Error::Format("unsupported normalizer version".into()));
        }
        if next("dim header")? != "dim" {
            return Err(Error::Format("missing dim header".into()));
        }
        let dim: usize = next("dim value")?
            .parse()
            .map_err(|_| Error::Format("bad normalizer dimension".into()))?;
        let mut read_vec = |name: &str| -> Result<Vec<f64>> {
            if next("vector header")? != name {
                return Err(Error::Format(format!("expected {name} vector")));
            }
            (0..dim)
                .map(|_| {
                    next("value")?
                        .parse()
                        .map_err(|_| Error::Format("bad normalizer value".into()))
                })
                .collect()
        };
        let mean = read_vec("mean")?;
        let std = read_vec("std")?;
        if next("end marker")? != "end" {
            return Err(Error::Format("missing end marker".into()));
        }
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Format("normalizer std entries must be > 0".into()));
        }
        Ok(Self { mean, std })
    }
}

// ---------------------------------------------------------------------------
// Layout fixture serialization
// ---------------------------------------------------------------------------

const FIXTURE_VERSION: &str = "robustnet-d2d-layout-v1";

impl D2dScenario {
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{FIXTURE_VERSION}");
        let _ = writeln!(out, "links {}", c.links);
        let _ = writeln!(out, "region_size_m {}", c.region_size_m);
        let _ = writeln!(out, "direct_dist_min_m {}", c.direct_dist_min_m);
        let _ = writeln!(out, "direct_dist_max_m {}", c.direct_dist_max_m);
        let _ = writeln!(out, "min_cross_separation_m {}", c.min_cross_separation_m);
        let _ = writeln!(out, "max_power_dbm {}", c.max_power_dbm);
        let _ = writeln!(out, "bandwidth_hz {}", c.bandwidth_hz);
        let _ = writeln!(out, "noise_psd_dbm_hz {}", c.noise_psd_dbm_hz);
        let _ = writeln!(out, "shadowing_std_db {}", c.shadowing_std_db);
        let _ = writeln!(out, "fast_fading {}", c.fast_fading);
        let _ = writeln!(out, "carrier_hz {}", c.carrier_hz);
        let _ = writeln!(out, "antenna_height_m {}", c.antenna_height_m);
        let _ = writeln!(out, "beam_direct_gain_db {}", c.beam_direct_gain_db);
        let _ = writeln!(out, "beam_mainlobe_gain_db {}", c.beam_mainlobe_gain_db);
        let _ = writeln!(
            out,
            "beam_mainlobe_halfwidth_deg {}",
            c.beam_mainlobe_halfwidth_deg
        );
        let _ = writeln!(out, "beam_sidelobe_gain_db {}", c.beam_sidelobe_gain_db);
        let _ = writeln!(out, "tx_pos");
        for p in &self.tx_pos {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        let _ = writeln!(out, "rx_pos");
        for p in &self.rx_pos {
            let _ = writeln!(out, "{} {}", p[0], p[1]);
        }
        let _ = writeln!(out, "g_pl_db");
        let n = c.links;
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{}", 10.0 * self.g_pl[i * n + j].log10()))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "end");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| -> Result<&str> {
            tokens
                .next()
                .ok_or_else(|| Error::Format(format!("truncated layout fixture: expected {what}")))
        };
        if next("version")? != FIXTURE_VERSION {
            return Err(Error::Format("unsupported layout fixture version".into()));
        }
        let mut config = D2dConfig::setting_a();
        let mut parse_kv = |key: &str| -> Result<String> {
            let k = next("key")?;
            if k != key {
                return Err(Error::Format(format!("expected key {key:?}, found {k:?}")));
            }
            Ok(next("value")?.to_string())
        };
        let parse_f = |v: String, key: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Format(format!("bad value for {key}")))
        };
        config.links = parse_kv("links")?
            .parse()
            .map_err(|_| Error::Format("bad link count".into()))?;
        config.region_size_m = parse_f(parse_kv("region_size_m")?, "region_size_m")?;
        config.direct_dist_min_m = parse_f(parse_kv("direct_dist_min_m")?, "direct_dist_min_m")?;
        config.direct_dist_max_m = parse_f(parse_kv("direct_dist_max_m")?, "direct_dist_max_m")?;
        config.min_cross_separation_m = parse_f(
            parse_kv("min_cross_separation_m")?,
            "min_cross_separation_m",
        )?;
        config.max_power_dbm = parse_f(parse_kv("max_power_dbm")?, "max_power_dbm")?;
        config.bandwidth_hz = parse_f(parse_kv("bandwidth_hz")?, "bandwidth_hz")?;
        config.noise_psd_dbm_hz = parse_f(parse_kv("noise_psd_dbm_hz")?, "noise_psd_dbm_hz")?;
        config.shadowing_std_db = parse_f(parse_kv("shadowing_std_db")?, "shadowing_std_db")?;
        config.fast_fading = match parse_kv("fast_fading")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Format(format!("bad fast_fading flag {other:?}"))),
        };
        config.carrier_hz = parse_f(parse_kv("carrier_hz")?, "carrier_hz")?;
        config.antenna_height_m = parse_f(parse_kv("antenna_height_m")?, "antenna_height_m")?;
        config.beam_direct_gain_db =
            parse_f(parse_kv("beam_direct_gain_db")?, "beam_direct_gain_db")?;
        config.beam_mainlobe_gain_db =
            parse_f(parse_kv("beam_mainlobe_gain_db")?, "beam_mainlobe_gain_db")?;
        config.beam_mainlobe_halfwidth_deg = parse_f(
            parse_kv("beam_mainlobe_halfwidth_deg")?,
            "beam_mainlobe_halfwidth_deg",
        )?;
        config.beam_sidelobe_gain_db =
            parse_f(parse_kv("beam_sidelobe_gain_db")?, "beam_sidelobe_gain_db")?;

        let n = config.links;
        let mut read_positions = |name: &str| -> Result<Vec<[f64; 2]>> {
            if next("positions header")? != name {
                return Err(Error::Format(format!("expected {name} block")));
            }
            (0..n)
                .map(|_| {
                    let x: f64 = next("x coordinate")?
                        .parse()
                        .map_err(|_| Error::Format("bad coordinate".into()))?;
                    let y: f64 = next("y coordinate")?
                        .parse()
                        .map_err(|_| Error::Format("bad coordinate".into()))?;
                    Ok([x, y])
                })
                .collect()
        };
        let tx_pos = read_positions("tx_pos")?;
        let rx_pos = read_positions("rx_pos")?;
        if next("gain matrix header")? != "g_pl_db" {
            return Err(Error::Format("expected g_pl_db block".into()));
        }
        let mut g_pl = vec![0.0; n * n];
        for v in g_pl.iter_mut() {
            let db: f64 = next("gain entry")?
                .parse()
                .map_err(|_| Error::Format("bad gain entry".into()))?;
            *v = 10f64.powf(db / 10.0);
        }
        if next("end marker")? != "end" {
            return Err(Error::Format("missing end marker".into()));
        }
        D2dScenario::from_parts(config, tx_pos, rx_pos, g_pl)
    }
}

#[cfg(test)]
mod tests;
