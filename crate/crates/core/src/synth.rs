//! Geometric multipath channel generator.
//!
//! Each sample is a sum of discrete paths with random delay, power, phase,
//! departure angles and Doppler shift, seen by a half-wavelength uniform planar
//! array. Optionally the delays are rescaled so the RMS delay spread of every
//! sample hits a target drawn from a window.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSample, Dataset, RandomSeed, SampleShape};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub n_subcarriers: usize,
    pub antenna_grid: (usize, usize),
    pub n_snapshots: usize,
    pub snapshot_rate_hz: f64,
    pub user_speed_mps: f64,
    pub n_samples: usize,
    pub seed: RandomSeed,
    /// Divide every sample by its largest entry magnitude after generation.
    pub normalize_max: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            carrier_freq_hz: 2.16e9,
            bandwidth_hz: 20e6,
            subcarrier_spacing_hz: 60e3,
            n_subcarriers: 52,
            antenna_grid: (8, 8),
            n_snapshots: 1,
            snapshot_rate_hz: 200.0,
            user_speed_mps: 3.0,
            n_samples: 200,
            seed: RandomSeed(0),
            normalize_max: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.carrier_freq_hz,
            self.bandwidth_hz,
            self.subcarrier_spacing_hz,
            self.snapshot_rate_hz,
        ];
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("all frequencies and rates must be positive"));
        }
        if self.n_subcarriers < 2 {
            return Err(Error::invalid("need at least 2 subcarriers"));
        }
        if self.antenna_grid.0 == 0 || self.antenna_grid.1 == 0 || self.n_snapshots == 0 {
            return Err(Error::invalid(
                "antenna grid and snapshot count must be >= 1",
            ));
        }
        if !(self.user_speed_mps >= 0.0 && self.user_speed_mps.is_finite()) {
            return Err(Error::invalid("user speed must be >= 0"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        SampleShape::new(self.antenna_grid, self.n_subcarriers, self.n_snapshots)?;
        Ok(())
    }

    pub fn shape(&self) -> Result<SampleShape> {
        SampleShape::new(self.antenna_grid, self.n_subcarriers, self.n_snapshots)
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }
}

/// Ranges the per-sample path parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRanges {
    pub path_count: (usize, usize),
    pub delay_ns: (f64, f64),
    pub aod_deg: (f64, f64),
    pub zod_deg: (f64, f64),
    /// `(offset, width)`: when set, each sample's RMS delay spread is drawn from
    /// `U[offset, offset + width]` ns and the delays are rescaled to hit it.
    pub rms_ds_window_ns: Option<(f64, f64)>,
    /// Fixed cluster delays and powers replacing the random path count, delays
    /// and powers. Delays are relative; the window sets their scale.
    #[serde(default)]
    pub cluster_profile: Option<Vec<Cluster>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub delay: f64,
    pub power_db: f64,
}

const fn cl(delay: f64, power_db: f64) -> Cluster {
    Cluster { delay, power_db }
}

/// 24-cluster non-line-of-sight delay profile in delay-spread-normalized units.
#[allow(clippy::approx_constant)]
pub const CLUSTER_PROFILE_24: [Cluster; 24] = [
    cl(0.0, -4.4),
    cl(0.2099, -1.2),
    cl(0.2219, -3.5),
    cl(0.2329, -5.2),
    cl(0.2176, -2.5),
    cl(0.6366, 0.0),
    cl(0.6448, -2.2),
    cl(0.6560, -3.9),
    cl(0.6584, -7.4),
    cl(0.7935, -7.1),
    cl(0.8213, -10.7),
    cl(0.9336, -11.1),
    cl(1.2285, -5.1),
    cl(1.3083, -6.8),
    cl(2.1704, -8.7),
    cl(2.7105, -13.2),
    cl(4.2589, -13.9),
    cl(4.6003, -13.9),
    cl(5.4902, -15.8),
    cl(5.6077, -17.1),
    cl(6.3065, -16.0),
    cl(6.6374, -15.7),
    cl(7.0427, -21.6),
    cl(8.6523, -22.8),
];

impl PathRanges {
    pub fn validate(&self) -> Result<()> {
        let (p0, p1) = self.path_count;
        if p0 == 0 || p0 > p1 {
            return Err(Error::invalid(format!(
                "bad path count range {:?}",
                self.path_count
            )));
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.delay_ns) || self.delay_ns.0 < 0.0 {
            return Err(Error::invalid(format!(
                "bad delay range {:?}",
                self.delay_ns
            )));
        }
        if !ordered(self.aod_deg) || self.aod_deg.0 < -90.0 || self.aod_deg.1 > 90.0 {
            return Err(Error::invalid(format!(
                "AOD range {:?} must lie in [-90, 90]",
                self.aod_deg
            )));
        }
        if !ordered(self.zod_deg) || self.zod_deg.0 < 0.0 || self.zod_deg.1 > 180.0 {
            return Err(Error::invalid(format!(
                "ZOD range {:?} must lie in [0, 180]",
                self.zod_deg
            )));
        }
        if let Some((y, w)) = self.rms_ds_window_ns {
            if !(y >= 0.0 && w >= 0.0 && y.is_finite() && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "bad RMS delay spread window ({y}, {w})"
                )));
            }
        }
        if let Some(profile) = &self.cluster_profile {
            if self.rms_ds_window_ns.is_none() {
                return Err(Error::invalid(
                    "a cluster profile needs an RMS delay spread window",
                ));
            }
            if profile
                .iter()
                .any(|c| !(c.delay >= 0.0 && c.delay.is_finite() && c.power_db.is_finite()))
            {
                return Err(Error::invalid(
                    "cluster delays must be finite and >= 0, powers finite",
                ));
            }
            if profile.windows(2).all(|w| w[0].delay == w[1].delay) {
                return Err(Error::invalid(
                    "a cluster profile needs at least two distinct delays",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub delay_s: f64,
    pub power: f64,
    pub phase_rad: f64,
    pub aod_deg: f64,
    pub zod_deg: f64,
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

/// Power-weighted standard deviation of the path delays, in seconds.
pub fn rms_delay_spread(paths: &PathSet) -> f64 {
    let total: f64 = paths.paths.iter().map(|p| p.power).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mean = paths.paths.iter().map(|p| p.power * p.delay_s).sum::<f64>() / total;
    // central form avoids cancellation between the two raw moments
    let var = paths
        .paths
        .iter()
        .map(|p| p.power * (p.delay_s - mean).powi(2))
        .sum::<f64>()
        / total;
    var.max(0.0).sqrt()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draw one set of paths from `ranges`.
pub fn draw_paths<R: Rng + ?Sized>(
    cfg: &SynthConfig,
    ranges: &PathRanges,
    rng: &mut R,
) -> Result<PathSet> {
    ranges.validate()?;
    let target_ns = ranges
        .rms_ds_window_ns
        .map(|(y, w)| uniform(rng, (y, y + w)));

    let (count, mut delays_ns, weights) = match &ranges.cluster_profile {
        Some(profile) => (
            profile.len(),
            profile.iter().map(|c| c.delay).collect::<Vec<_>>(),
            profile
                .iter()
                .map(|c| 10f64.powf(c.power_db / 10.0))
                .collect::<Vec<_>>(),
        ),
        None => {
            let (mut lo, mut hi) = ranges.path_count;
            if target_ns.is_some_and(|t| t > 0.0) && lo < 2 {
                // a positive spread needs at least two paths
                lo = 2;
                hi = hi.max(2);
            }
            let count = rng.random_range(lo..=hi);
            let delays = (0..count).map(|_| uniform(rng, ranges.delay_ns)).collect();
            let weights = (0..count).map(|_| Exp1.sample(rng)).collect();
            (count, delays, weights)
        }
    };
    let total: f64 = weights.iter().sum();
    let powers: Vec<f64> = weights.iter().map(|w| w / total).collect();

    if let Some(target) = target_ns {
        let spread = |d: &[f64]| {
            let mean: f64 = d.iter().zip(&powers).map(|(d, p)| d * p).sum();
            d.iter()
                .zip(&powers)
                .map(|(d, p)| p * (d - mean).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mut attempts = 0;
        while target > 0.0 && !(spread(&delays_ns) > 0.0) {
            // degenerate delay range: fall back to a unit template
            attempts += 1;
            if attempts > 64 {
                return Err(Error::Internal(
                    "could not draw distinct path delays".into(),
                ));
            }
            delays_ns = (0..count).map(|_| rng.random_range(0.0..1.0)).collect();
        }
        let min = delays_ns.iter().copied().fold(f64::INFINITY, f64::min);
        let current = spread(&delays_ns);
        let scale = if target > 0.0 { target / current } else { 0.0 };
        delays_ns.iter_mut().for_each(|d| *d = (*d - min) * scale);
    }

    let lambda = cfg.wavelength_m();
    let paths = (0..count)
        .map(|k| {
            let alpha = rng.random_range(0.0..2.0 * PI);
            Path {
                delay_s: delays_ns[k] * 1e-9,
                power: powers[k],
                phase_rad: rng.random_range(0.0..2.0 * PI),
                aod_deg: uniform(rng, ranges.aod_deg),
                zod_deg: uniform(rng, ranges.zod_deg),
                doppler_hz: cfg.user_speed_mps / lambda * alpha.cos(),
            }
        })
        .collect();
    Ok(PathSet { paths })
}

/// Synthesize the channel tensor of a path set.
pub fn render_sample(cfg: &SynthConfig, paths: &PathSet) -> Result<ChannelSample> {
    let shape = cfg.shape()?;
    let (rows, cols) = cfg.antenna_grid;
    let (n_f, n_t) = (cfg.n_subcarriers, cfg.n_snapshots);
    let mut acc = vec![Complex64::default(); shape.len()];
    let mut freq = vec![Complex64::default(); n_f];
    let mut time = vec![Complex64::default(); n_t];
    let mut array = vec![Complex64::default(); rows * cols];
    for p in &paths.paths {
        let gain = Complex64::from_polar(p.power.sqrt(), p.phase_rad);
        for (k, v) in freq.iter_mut().enumerate() {
            *v = Complex64::cis(-2.0 * PI * k as f64 * cfg.subcarrier_spacing_hz * p.delay_s);
        }
        for (t, v) in time.iter_mut().enumerate() {
            *v = Complex64::cis(2.0 * PI * p.doppler_hz * t as f64 / cfg.snapshot_rate_hz);
        }
        let (aod, zod) = (p.aod_deg.to_radians(), p.zod_deg.to_radians());
        for (a, v) in array.iter_mut().enumerate() {
            let (r, c) = ((a / cols) as f64, (a % cols) as f64);
            *v = gain * Complex64::cis(PI * (r * zod.cos() + c * zod.sin() * aod.sin()));
        }
        let mut idx = 0;
        for s in &array {
            for f in &freq {
                let sf = s * f;
                for t in &time {
                    acc[idx] += sf * t;
                    idx += 1;
                }
            }
        }
    }
    let values = acc
        .iter()
        .map(|v| Complex32::new(v.re as f32, v.im as f32))
        .collect();
    ChannelSample::new(shape, values)
}

pub fn generate_sample<R: Rng + ?Sized>(
    cfg: &SynthConfig,
    ranges: &PathRanges,
    rng: &mut R,
) -> Result<(ChannelSample, PathSet)> {
    let paths = draw_paths(cfg, ranges, rng)?;
    let sample = render_sample(cfg, &paths)?;
    Ok((sample, paths))
}

/// A generated dataset with the achieved per-sample RMS delay spreads (seconds).
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub ranges: PathRanges,
    pub rms_delay_spreads: Vec<f64>,
}

impl Generated {
    pub fn rms_stats_ns(&self) -> (f64, f64, f64) {
        let ns: Vec<f64> = self.rms_delay_spreads.iter().map(|s| s * 1e9).collect();
        let min = ns.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ns.iter().sum::<f64>() / ns.len().max(1) as f64;
        (min, mean, max)
    }
}

/// `cfg.n_samples` independent draws. Sample `i` uses stream `i` of `cfg.seed`,
/// so parallel and serial generation agree.
pub fn generate_dataset(cfg: &SynthConfig, ranges: &PathRanges) -> Result<Generated> {
    cfg.validate()?;
    ranges.validate()?;
    let drawn: Vec<(ChannelSample, f64)> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.seed.stream(i as u64);
            let (sample, paths) = generate_sample(cfg, ranges, &mut rng)?;
            Ok((sample, rms_delay_spread(&paths)))
        })
        .collect::<Result<_>>()?;
    let (samples, rms): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();

    let mut metadata = BTreeMap::new();
    metadata.insert("generator".to_string(), "geometric-multipath".to_string());
    metadata.insert("config".to_string(), serde_json::to_string(cfg)?);
    metadata.insert("ranges".to_string(), serde_json::to_string(ranges)?);
    let mut dataset = Dataset::new(samples, metadata)?;
    if cfg.normalize_max {
        dataset = dataset.normalized_by_max()?;
    }
    Ok(Generated {
        dataset,
        ranges: ranges.clone(),
        rms_delay_spreads: rms,
    })
}

/// Path ranges for the delay-spread-offset corpus: the fixed 24-cluster profile
/// scaled so each sample's RMS delay spread falls in `[offset, offset + width]`.
pub fn appendix_a_ranges(offset_ns: f64, width_ns: f64) -> PathRanges {
    PathRanges {
        path_count: (CLUSTER_PROFILE_24.len(), CLUSTER_PROFILE_24.len()),
        delay_ns: (0.0, 0.0),
        aod_deg: (-90.0, 90.0),
        zod_deg: (0.0, 180.0),
        rms_ds_window_ns: Some((offset_ns, width_ns)),
        cluster_profile: Some(CLUSTER_PROFILE_24.to_vec()),
    }
}

/// Random multipath with every sample's RMS delay spread pinned to `target_ns`.
pub fn delay_spread_ranges(target_ns: f64) -> PathRanges {
    PathRanges {
        path_count: (20, 24),
        delay_ns: (0.0, 1000.0),
        aod_deg: (-90.0, 90.0),
        zod_deg: (0.0, 180.0),
        rms_ds_window_ns: Some((target_ns, 0.0)),
        cluster_profile: None,
    }
}

/// `n` offsets evenly spaced over `[0, 3600]` ns.
pub fn appendix_a_offsets(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|k| 3600.0 * k as f64 / (n - 1) as f64).collect(),
    }
}

/// One dataset per offset; dataset `k` is seeded with `cfg.seed.derive(k)`.
pub fn appendix_a_corpus(
    cfg: &SynthConfig,
    width_ns: f64,
    offsets: &[f64],
) -> Result<Vec<Generated>> {
    if offsets.iter().any(|o| !(*o >= 0.0)) {
        return Err(Error::invalid("offsets must be nonnegative"));
    }
    offsets
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let c = SynthConfig {
                seed: cfg.seed.derive(k as u64),
                ..cfg.clone()
            };
            generate_dataset(&c, &appendix_a_ranges(y, width_ns))
        })
        .collect()
}

const DELAY_WIDTHS_NS: [f64; 5] = [100.0, 200.0, 300.0, 400.0, 1000.0];
const ANGLE_WIDTHS_DEG: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 100.0];

/// Random per-dataset ranges for the augmentation candidate pool.
pub fn appendix_b_ranges<R: Rng + ?Sized>(rng: &mut R) -> PathRanges {
    let np = rng.random_range(1.0..=10.0f64).floor() as usize;
    let path_count = ((np as isize - 2).max(1) as usize, np + 5);

    let nt = rng.random_range(0.0..=2500.0);
    let w = DELAY_WIDTHS_NS[rng.random_range(0..DELAY_WIDTHS_NS.len())];
    let delay_ns = ((nt - w / 2.0).max(0.0), nt + w / 2.0);

    let na = rng.random_range(-90.0..=90.0);
    let w = ANGLE_WIDTHS_DEG[rng.random_range(0..ANGLE_WIDTHS_DEG.len())];
    let aod_deg = ((na - w / 2.0).max(-90.0), (na + w / 2.0).min(90.0));

    let na = rng.random_range(0.0..=180.0);
    let w = ANGLE_WIDTHS_DEG[rng.random_range(0..ANGLE_WIDTHS_DEG.len())];
    let zod_deg = ((na - w / 2.0).max(0.0), (na + w / 2.0).min(180.0));

    PathRanges {
        path_count,
        delay_ns,
        aod_deg,
        zod_deg,
        rms_ds_window_ns: None,
        cluster_profile: None,
    }
}

/// `n_datasets` candidates with independently drawn ranges. Ranges come from
/// `cfg.seed.derive(u64::MAX)`; dataset `k` is seeded with `cfg.seed.derive(k)`.
pub fn appendix_b_candidate_pool(cfg: &SynthConfig, n_datasets: usize) -> Result<Vec<Generated>> {
    let mut rng = cfg.seed.derive(u64::MAX).rng();
    let ranges: Vec<PathRanges> = (0..n_datasets)
        .map(|_| appendix_b_ranges(&mut rng))
        .collect();
    ranges
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let c = SynthConfig {
                seed: cfg.seed.derive(k as u64),
                ..cfg.clone()
            };
            generate_dataset(&c, &r)
        })
        .collect()
}

pub const GRID_PATH_COUNTS: [usize; 7] = [2, 4, 6, 8, 12, 15, 18];
pub const GRID_MAX_DELAYS_NS: [f64; 4] = [200.0, 800.0, 1400.0, 2000.0];
pub const GRID_ANGLE_SPANS_DEG: [f64; 3] = [80.0, 120.0, 160.0];

/// The 7 x 4 x 3 factorial grid of path ranges, path count outermost.
pub fn appendix_c_ranges() -> Vec<PathRanges> {
    let mut out = Vec::with_capacity(84);
    for &np in &GRID_PATH_COUNTS {
        for &nt in &GRID_MAX_DELAYS_NS {
            for &na in &GRID_ANGLE_SPANS_DEG {
                out.push(PathRanges {
                    path_count: (1, np),
                    delay_ns: (0.0, nt),
                    aod_deg: (-na / 2.0, na / 2.0),
                    zod_deg: (90.0 - na / 2.0, 90.0 + na / 2.0),
                    rms_ds_window_ns: None,
                    cluster_profile: None,
                });
            }
        }
    }
    out
}

pub fn appendix_c_grid(cfg: &SynthConfig) -> Result<Vec<Generated>> {
    appendix_c_ranges()
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let c = SynthConfig {
                seed: cfg.seed.derive(k as u64),
                ..cfg.clone()
            };
            generate_dataset(&c, &r)
        })
        .collect()
}

/// Wide ranges spanning the union of the factorial grid, standing in for a
/// mixed urban macro-cell test set.
pub fn uma_proxy_ranges() -> PathRanges {
    PathRanges {
        path_count: (1, 18),
        delay_ns: (0.0, 2000.0),
        aod_deg: (-80.0, 80.0),
        zod_deg: (10.0, 170.0),
        rms_ds_window_ns: None,
        cluster_profile: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_doppler, extract_pdp};

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            antenna_grid: (2, 2),
            n_subcarriers: 16,
            n_samples: 6,
            ..SynthConfig::default()
        }
    }

    fn path(delay_s: f64, power: f64) -> Path {
        Path {
            delay_s,
            power,
            phase_rad: 0.0,
            aod_deg: 0.0,
            zod_deg: 90.0,
            doppler_hz: 0.0,
        }
    }

    #[test]
    fn rms_ds_closed_forms() {
        assert_eq!(
            rms_delay_spread(&PathSet {
                paths: vec![path(3e-7, 1.0)]
            }),
            0.0
        );
        let tau = 4e-7;
        let two = PathSet {
            paths: vec![path(0.0, 0.5), path(2.0 * tau, 0.5)],
        };
        assert!((rms_delay_spread(&two) - tau).abs() < 1e-20);
        let shifted = PathSet {
            paths: two
                .paths
                .iter()
                .map(|p| Path {
                    delay_s: p.delay_s + 1e-6,
                    ..*p
                })
                .collect(),
        };
        assert!((rms_delay_spread(&shifted) - tau).abs() < 1e-18);
    }

    #[test]
    fn window_target_hit_exactly() {
        let cfg = small_cfg();
        let ranges = PathRanges {
            path_count: (1, 6),
            delay_ns: (0.0, 1000.0),
            cluster_profile: None,
            ..appendix_a_ranges(400.0, 2000.0)
        };
        let mut rng = RandomSeed(9).rng();
        for _ in 0..50 {
            let paths = draw_paths(&cfg, &ranges, &mut rng).unwrap();
            assert!(paths.paths.len() >= 2);
            let ds = rms_delay_spread(&paths) * 1e9;
            assert!((400.0 - 1e-6..=2400.0 + 1e-6).contains(&ds), "{ds}");
            let min = paths
                .paths
                .iter()
                .map(|p| p.delay_s)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            assert!((paths.paths.iter().map(|p| p.power).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_target_relative_precision() {
        let cfg = small_cfg();
        let ranges = appendix_a_ranges(777.0, 0.0);
        let mut rng = RandomSeed(2).rng();
        for _ in 0..20 {
            let paths = draw_paths(&cfg, &ranges, &mut rng).unwrap();
            let ds = rms_delay_spread(&paths) * 1e9;
            assert!(((ds - 777.0) / 777.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_on_grid_path_gives_pdp_indicator() {
        let cfg = small_cfg();
        let tap = 3.0;
        let delay = tap / (cfg.n_subcarriers as f64 * cfg.subcarrier_spacing_hz);
        let sample = render_sample(
            &cfg,
            &PathSet {
                paths: vec![path(delay, 1.0)],
            },
        )
        .unwrap();
        let pdp = extract_pdp(&sample).unwrap();
        assert!((pdp[3] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn static_user_has_dc_doppler() {
        let cfg = SynthConfig {
            user_speed_mps: 0.0,
            n_snapshots: 4,
            ..small_cfg()
        };
        let mut rng = RandomSeed(4).rng();
        let (sample, _) = generate_sample(&cfg, &uma_proxy_ranges(), &mut rng).unwrap();
        let dop = extract_doppler(&sample).unwrap().unwrap();
        assert!((dop[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_cfg();
        let a = generate_dataset(&cfg, &uma_proxy_ranges()).unwrap();
        let b = generate_dataset(&cfg, &uma_proxy_ranges()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let other = SynthConfig {
            seed: RandomSeed(1),
            ..cfg
        };
        let c = generate_dataset(&other, &uma_proxy_ranges()).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn serial_matches_parallel() {
        let cfg = small_cfg();
        let ranges = appendix_a_ranges(100.0, 500.0);
        let parallel = generate_dataset(&cfg, &ranges).unwrap();
        for (i, s) in parallel.dataset.samples().iter().enumerate() {
            let mut rng = cfg.seed.stream(i as u64);
            let (serial, _) = generate_sample(&cfg, &ranges, &mut rng).unwrap();
            assert_eq!(&serial, s);
        }
    }

    #[test]
    fn metadata_records_generation() {
        let g = generate_dataset(&small_cfg(), &uma_proxy_ranges()).unwrap();
        let meta = g.dataset.metadata();
        let cfg: SynthConfig = serde_json::from_str(&meta["config"]).unwrap();
        assert_eq!(cfg, small_cfg());
        let ranges: PathRanges = serde_json::from_str(&meta["ranges"]).unwrap();
        assert_eq!(ranges, uma_proxy_ranges());
    }

    #[test]
    fn corpus_sizes() {
        let offsets = appendix_a_offsets(10);
        assert_eq!(offsets.len(), 10);
        assert_eq!(offsets[1], 400.0);
        assert_eq!(offsets[9], 3600.0);
        let cfg = SynthConfig {
            n_samples: 2,
            ..small_cfg()
        };
        let corpus = appendix_a_corpus(&cfg, 2000.0, &offsets).unwrap();
        assert_eq!(corpus.len(), 10);
        assert!(corpus
            .iter()
            .all(|g| g.ranges.rms_ds_window_ns.unwrap().1 == 2000.0));
        assert_eq!(appendix_a_corpus(&cfg, 2000.0, &[0.0]).unwrap().len(), 1);
    }

    #[test]
    fn appendix_b_ranges_within_bounds() {
        let mut rng = RandomSeed(13).rng();
        for _ in 0..500 {
            let r = appendix_b_ranges(&mut rng);
            r.validate().unwrap();
            assert!(r.path_count.0 >= 1 && r.path_count.1 <= 15);
            assert!(r.delay_ns.0 >= 0.0);
            assert!(r.aod_deg.0 >= -90.0 && r.aod_deg.1 <= 90.0);
            assert!(r.zod_deg.0 >= 0.0 && r.zod_deg.1 <= 180.0);
        }
    }

    #[test]
    fn appendix_c_grid_order() {
        let grid = appendix_c_ranges();
        assert_eq!(grid.len(), 84);
        assert_eq!(grid[0].path_count, (1, 2));
        assert_eq!(grid[0].delay_ns, (0.0, 200.0));
        assert_eq!(grid[0].aod_deg, (-40.0, 40.0));
        assert_eq!(grid[1].aod_deg, (-60.0, 60.0));
        assert_eq!(grid[3].delay_ns, (0.0, 800.0));
        assert_eq!(grid[12].path_count, (1, 4));
        assert_eq!(grid[83].zod_deg, (10.0, 170.0));
    }

    #[test]
    fn normalization_option() {
        let cfg = SynthConfig {
            normalize_max: true,
            ..small_cfg()
        };
        let g = generate_dataset(&cfg, &uma_proxy_ranges()).unwrap();
        for s in g.dataset.samples() {
            assert!((s.max_abs() - 1.0).abs() < 1e-6);
        }
    }
}
