//! Ring-of-Gaussians data, noise priors and mode-coverage scoring.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Random generator used throughout the crate.
pub type Prng = ChaCha8Rng;

/// Source of real training samples.
pub trait DataSource<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn sample(&self, rng: &mut Prng, n: usize) -> Array2<T>;
}

/// `modes` isotropic Gaussians with centers evenly spaced on a circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureConfig {
    pub modes: usize,
    pub ring_radius: f64,
    pub cluster_std: f64,
    pub seed: u64,
}

impl Default for GaussianMixtureConfig {
    fn default() -> Self {
        Self {
            modes: 8,
            ring_radius: 2.0,
            cluster_std: 0.1,
            seed: 0,
        }
    }
}

impl GaussianMixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::Config("mixture needs at least one mode".into()));
        }
        if !(self.cluster_std > 0.0) || !self.cluster_std.is_finite() {
            return Err(Error::Config(format!(
                "cluster_std must be positive, got {}",
                self.cluster_std
            )));
        }
        if !self.ring_radius.is_finite() || self.ring_radius < 0.0 {
            return Err(Error::Config(format!(
                "ring_radius must be finite and nonnegative, got {}",
                self.ring_radius
            )));
        }
        Ok(())
    }

    /// Mode `k` sits at angle `2πk/K`.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.modes)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / self.modes as f64;
                [self.ring_radius * angle.cos(), self.ring_radius * angle.sin()]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianMixture {
    cfg: GaussianMixtureConfig,
    centers: Vec<[f64; 2]>,
}

impl GaussianMixture {
    pub fn new(cfg: GaussianMixtureConfig) -> Result<Self> {
        cfg.validate()?;
        let centers = cfg.centers();
        Ok(Self { cfg, centers })
    }

    pub fn config(&self) -> &GaussianMixtureConfig {
        &self.cfg
    }

    /// Samples together with the index of the mode each came from.
    pub fn sample_labeled<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n: usize,
    ) -> (Array2<T>, Vec<usize>) {
        let mut out = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for mut row in out.rows_mut() {
            let k = rng.random_range(0..self.cfg.modes);
            let [cx, cy] = self.centers[k];
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            row[0] = T::of(cx + self.cfg.cluster_std * dx);
            row[1] = T::of(cy + self.cfg.cluster_std * dy);
            labels.push(k);
        }
        (out, labels)
    }
}

impl<T: Scalar> DataSource<T> for GaussianMixture {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, rng: &mut Prng, n: usize) -> Array2<T> {
        self.sample_labeled(rng, n).0
    }
}

/// `n` points from the mixture, seeded by `cfg.seed`.
pub fn sample_real<T: Scalar>(cfg: &GaussianMixtureConfig, n: usize) -> Result<Array2<T>> {
    let mixture = GaussianMixture::new(cfg.clone())?;
    let mut rng = Prng::seed_from_u64(cfg.seed);
    Ok(mixture.sample_labeled(&mut rng, n).0)
}

/// Standard-normal noise from an existing stream.
pub fn noise<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize) -> Array2<T> {
    Array2::from_shape_simple_fn((n, dim), || T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// `n × dim` i.i.d. standard-normal entries from a fresh seeded stream.
pub fn sample_noise<T: Scalar>(dim: usize, n: usize, seed: u64) -> Array2<T> {
    noise(&mut Prng::seed_from_u64(seed), dim, n)
}

/// Thresholds for [`mode_coverage`]: a sample counts toward a mode within
/// `assign_radius_mult · cluster_std` of its center, and a mode is
/// recovered at `min_count` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageThresholds {
    pub assign_radius_mult: f64,
    pub min_count: usize,
}

impl Default for CoverageThresholds {
    fn default() -> Self {
        Self {
            assign_radius_mult: 3.0,
            min_count: 20,
        }
    }
}

impl CoverageThresholds {
    /// Reference sample count the default `min_count` is calibrated for.
    pub const REFERENCE_SAMPLES: usize = 512;

    /// Defaults with `min_count` scaled in proportion to `n`.
    pub fn for_samples(n: usize) -> Self {
        let base = Self::default();
        let scaled = (base.min_count as f64 * n as f64 / Self::REFERENCE_SAMPLES as f64).round();
        Self {
            min_count: (scaled as usize).max(1),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub modes_recovered: usize,
    pub per_mode_counts: Vec<usize>,
    pub high_quality_fraction: f64,
    pub samples: usize,
}

pub fn mode_coverage<T: Scalar>(
    samples: ArrayView2<'_, T>,
    cfg: &GaussianMixtureConfig,
    assign_radius_mult: f64,
    min_count: usize,
) -> Result<CoverageReport> {
    cfg.validate()?;
    if samples.nrows() == 0 {
        return Err(Error::Empty("no samples to score".into()));
    }
    if samples.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "coverage needs 2-D samples, got width {}",
            samples.ncols()
        )));
    }
    let centers = cfg.centers();
    let radius = assign_radius_mult * cfg.cluster_std;
    let mut counts = vec![0usize; cfg.modes];
    for row in samples.rows() {
        let (x, y) = (row[0].as_f64(), row[1].as_f64());
        let (k, dist) = centers
            .iter()
            .enumerate()
            .map(|(k, [cx, cy])| (k, (x - cx).hypot(y - cy)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if dist <= radius {
            counts[k] += 1;
        }
    }
    let assigned: usize = counts.iter().sum();
    Ok(CoverageReport {
        modes_recovered: counts.iter().filter(|&&c| c >= min_count).count(),
        high_quality_fraction: assigned as f64 / samples.nrows() as f64,
        per_mode_counts: counts,
        samples: samples.nrows(),
    })
}

/// CSV with header `x,y` or `x,y,mode`.
pub fn write_samples_csv<T: Scalar, W: Write>(
    mut w: W,
    samples: ArrayView2<'_, T>,
    modes: Option<&[usize]>,
) -> Result<()> {
    if let Some(m) = modes {
        if m.len() != samples.nrows() {
            return Err(Error::Dimension(format!(
                "{} mode labels for {} samples",
                m.len(),
                samples.nrows()
            )));
        }
        writeln!(w, "x,y,mode")?;
    } else {
        writeln!(w, "x,y")?;
    }
    for (i, row) in samples.rows().into_iter().enumerate() {
        match modes {
            Some(m) => writeln!(w, "{:?},{:?},{}", row[0], row[1], m[i])?,
            None => writeln!(w, "{:?},{:?}", row[0], row[1])?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    fn ring(modes: usize) -> GaussianMixtureConfig {
        GaussianMixtureConfig {
            modes,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn tiny_std_lands_on_centers() {
        let cfg = GaussianMixtureConfig {
            cluster_std: 1e-12,
            ..ring(8)
        };
        let centers = cfg.centers();
        let x: Array2<f64> = sample_real(&cfg, 200).unwrap();
        for row in x.rows() {
            let d = centers
                .iter()
                .map(|[cx, cy]| (row[0] - cx).hypot(row[1] - cy))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn per_mode_counts_are_multinomial() {
        let mixture = GaussianMixture::new(ring(8)).unwrap();
        let mut rng = Prng::seed_from_u64(1);
        let n = 80_000;
        let (_, labels) = mixture.sample_labeled::<f64, _>(&mut rng, n);
        let mut counts = [0usize; 8];
        for k in labels {
            counts[k] += 1;
        }
        let p = 1.0 / 8.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn ring_is_centered() {
        let cfg = ring(8);
        let n = 50_000;
        let x: Array2<f64> = sample_real(&cfg, n).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let bound = 3.0 * (cfg.cluster_std / (n as f64).sqrt() + cfg.ring_radius / (n as f64).sqrt());
        assert!(mean[0].abs() <= bound && mean[1].abs() <= bound, "{mean}");
    }

    #[test]
    fn noise_moments_and_determinism() {
        let a: Array2<f64> = sample_noise(2, 100_000, 5);
        let b: Array2<f64> = sample_noise(2, 100_000, 5);
        assert_eq!(a, b);
        for col in a.columns() {
            let mean = col.mean().unwrap();
            let var = col.var(0.0);
            assert!(mean.abs() <= 0.02, "{mean}");
            assert!((0.97..=1.03).contains(&var), "{var}");
        }
    }

    #[test]
    fn coverage_of_exact_centers_and_collapse() {
        let cfg = ring(8);
        let centers = cfg.centers();
        let x = Array2::from_shape_fn((8, 2), |(i, j)| centers[i][j]);
        let r = mode_coverage(x.view(), &cfg, 3.0, 1).unwrap();
        assert_eq!(r.modes_recovered, 8);
        assert_eq!(r.high_quality_fraction, 1.0);

        let x = Array2::from_shape_fn((100, 2), |(_, j)| centers[3][j]);
        let r = mode_coverage(x.view(), &cfg, 3.0, 1).unwrap();
        assert_eq!(r.modes_recovered, 1);
        assert_eq!(r.per_mode_counts[3], 100);
    }

    #[test]
    fn real_data_passes_its_own_metric() {
        for modes in [7, 8, 9] {
            let cfg = ring(modes);
            let x: Array2<f64> = sample_real(&cfg, 5_120).unwrap();
            let th = CoverageThresholds::for_samples(512);
            let r = mode_coverage(x.view(), &cfg, th.assign_radius_mult, th.min_count).unwrap();
            assert_eq!(r.modes_recovered, modes);
            assert!(r.high_quality_fraction >= 0.95);
        }
    }

    #[test]
    fn coverage_is_permutation_invariant_and_monotone() {
        let cfg = ring(8);
        let x: Array2<f64> = sample_real(&cfg, 400).unwrap();
        let base = mode_coverage(x.view(), &cfg, 3.0, 20).unwrap();
        let mut rev = x.clone();
        rev.invert_axis(Axis(0));
        assert_eq!(mode_coverage(rev.view(), &cfg, 3.0, 20).unwrap(), base);
        let mut prev = 0;
        for n in (50..=400).step_by(50) {
            let r = mode_coverage(x.slice(ndarray::s![..n, ..]), &cfg, 3.0, 20).unwrap();
            assert!(r.modes_recovered >= prev);
            prev = r.modes_recovered;
        }
    }

    #[test]
    fn thresholds_scale_with_sample_count() {
        assert_eq!(CoverageThresholds::for_samples(512).min_count, 20);
        assert_eq!(CoverageThresholds::for_samples(5_120).min_count, 200);
        assert_eq!(CoverageThresholds::for_samples(1).min_count, 1);
    }

    #[test]
    fn csv_has_expected_columns() {
        let x = ndarray::array![[1.0f64, 2.0], [3.0, 4.5]];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, x.view(), Some(&[0, 5])).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,mode\n1.0,2.0,0\n3.0,4.5,5\n");
        assert!(write_samples_csv(Vec::new(), x.view(), Some(&[0])).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(GaussianMixture::new(ring(0)).is_err());
        let bad = GaussianMixtureConfig {
            cluster_std: 0.0,
            ..ring(8)
        };
        assert!(bad.validate().is_err());
    }
}
