//! From raw measurements to square-root densities.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::SpherePoint;
use crate::scalar::Real;

/// Right edge padding for automatically chosen ranges.
pub const AUTO_RANGE_PAD: f64 = 1e-12;

/// How the numeric columns of an input file are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// Raw measurements, histogrammed before use.
    Raw,
    /// Precomputed histogram counts.
    Hist,
    /// Points already on the unit sphere.
    Sphere,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Raw => "raw",
            Kind::Hist => "hist",
            Kind::Sphere => "sphere",
        }
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(Kind::Raw),
            "hist" => Ok(Kind::Hist),
            "sphere" => Ok(Kind::Sphere),
            other => Err(Error::InvalidConfig(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub values: Vec<f64>,
    pub id: String,
    pub class_label: Option<i64>,
}

impl RawSample {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self { values, id: id.into(), class_label: None }
    }

    pub fn with_label(mut self, label: i64) -> Self {
        self.class_label = Some(label);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidHistogram(format!("sample {:?} has no values", self.id)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// Bin masses over a regular grid; multi-axis grids are flattened row-major
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: Vec<f64>,
    edges: Vec<Vec<f64>>,
}

impl Histogram {
    /// Wraps precomputed counts on the unit interval grid.
    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        let b = counts.len();
        let edges = (0..=b).map(|i| i as f64 / b.max(1) as f64).collect();
        Self::new(counts, vec![edges])
    }

    pub fn new(counts: Vec<f64>, edges: Vec<Vec<f64>>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidHistogram("no bins".into()));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidHistogram("counts must be finite and nonnegative".into()));
        }
        if !(counts.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidHistogram("total mass is zero".into()));
        }
        let cells: usize = edges.iter().map(|e| e.len().saturating_sub(1)).product();
        if edges.is_empty() || cells != counts.len() {
            return Err(Error::InvalidHistogram("edges do not match the number of bins".into()));
        }
        if edges.iter().any(|e| e.windows(2).any(|w| !(w[0] < w[1]))) {
            return Err(Error::InvalidHistogram("edges must be strictly ascending".into()));
        }
        Ok(Self { counts, edges })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Edges of the first (for 1-D histograms, the only) axis.
    pub fn bin_edges(&self) -> &[f64] {
        &self.edges[0]
    }

    pub fn axis_edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

fn regular_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = hi - lo;
    (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 / bins as f64 })
        .collect()
}

/// Bin of `v` among `bins` right-closed bins over `[lo, hi]`; the first bin
/// also takes `lo`, and out-of-range values fall into the end bins.
fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (v - lo) / (hi - lo) * bins as f64;
    let idx = t.ceil() as i64 - 1;
    idx.clamp(0, bins as i64 - 1) as usize
}

/// `(min, max + AUTO_RANGE_PAD)` of the given values.
pub fn auto_range(values: impl IntoIterator<Item = f64>, bins: usize) -> Result<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite);
    }
    if lo == hi && bins > 1 {
        return Err(Error::EmptyRange { lo, hi });
    }
    Ok((lo, hi + AUTO_RANGE_PAD))
}

fn check_range(lo: f64, hi: f64, bins: usize) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi || (lo == hi && bins > 1) {
        return Err(Error::EmptyRange { lo, hi });
    }
    Ok(())
}

/// Equal-width histogram with `bins` bins over `range` (or the sample's
/// own min/max). Bins are right-closed; every value lands in exactly one.
pub fn histogram(sample: &RawSample, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    histogram_nd(sample, 1, bins, range.map(|r| vec![r]).as_deref())
}

/// Joint histogram of `dims`-component points stored interleaved in
/// `sample.values`, with `bins` bins per axis flattened into `bins^dims`.
pub fn histogram_nd(
    sample: &RawSample,
    dims: usize,
    bins: usize,
    ranges: Option<&[(f64, f64)]>,
) -> Result<Histogram> {
    sample.validate()?;
    if bins == 0 || dims == 0 {
        return Err(Error::InvalidConfig("bins and dims must be positive".into()));
    }
    if !sample.values.len().is_multiple_of(dims) {
        return Err(Error::Dimension { expected: dims, found: sample.values.len() % dims });
    }
    let ranges: Vec<(f64, f64)> = match ranges {
        Some(r) if r.len() == dims => r.to_vec(),
        Some(r) => return Err(Error::Dimension { expected: dims, found: r.len() }),
        None => (0..dims)
            .map(|a| auto_range(sample.values.iter().skip(a).step_by(dims).copied(), bins))
            .collect::<Result<_>>()?,
    };
    for &(lo, hi) in &ranges {
        check_range(lo, hi, bins)?;
    }
    let cells = bins.checked_pow(dims as u32).ok_or_else(|| Error::InvalidConfig("too many bins".into()))?;
    let mut counts = vec![0.0; cells];
    for point in sample.values.chunks(dims) {
        let mut flat = 0;
        for (&v, &(lo, hi)) in point.iter().zip(&ranges) {
            let b = if lo == hi { 0 } else { bin_index(v, lo, hi, bins) };
            flat = flat * bins + b;
        }
        counts[flat] += 1.0;
    }
    let edges = ranges
        .iter()
        .map(|&(lo, hi)| if lo == hi { vec![lo, lo + AUTO_RANGE_PAD] } else { regular_edges(lo, hi, bins) })
        .collect();
    Histogram::new(counts, edges)
}

/// `√(counts / Σ counts)`, optionally with additive smoothing `alpha`.
pub fn to_sqrt_density<T: Real>(h: &Histogram, alpha: f64) -> Result<SpherePoint<T>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing must be nonnegative, got {alpha}")));
    }
    let total: f64 = h.counts.iter().map(|c| c + alpha).sum();
    let coords = DVector::from_iterator(h.counts.len(), h.counts.iter().map(|c| T::lit(((c + alpha) / total).sqrt())));
    SpherePoint::new(coords)
}

/// Converts decibels to a linear power ratio.
pub fn snr_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Adds white Gaussian noise whose variance is the sample's mean power
/// divided by `snr` (a linear power ratio).
pub fn add_noise_snr(sample: &RawSample, snr: f64, seed: u64) -> Result<RawSample> {
    sample.validate()?;
    if !(snr > 0.0) {
        return Err(Error::InvalidConfig(format!("snr must be positive, got {snr}")));
    }
    let power = sample.values.iter().map(|v| v * v).sum::<f64>() / sample.values.len() as f64;
    let std = (power / snr).sqrt();
    let mut out = sample.clone();
    if std == 0.0 || !std.is_finite() {
        return Ok(out);
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut out.values {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Stable per-sample seed from a run seed and a sample id (FNV-1a).
pub fn sample_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn raw(v: &[f64]) -> RawSample {
        RawSample::new("s", v.to_vec())
    }

    #[test]
    fn explicit_range_binning() {
        let h = histogram(&raw(&[0.0, 0.5, 1.0]), 2, Some((0.0, 1.0))).unwrap();
        assert_eq!(h.counts(), &[2.0, 1.0]);
        assert_eq!(h.bin_edges(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn degenerate_auto_range() {
        let err = histogram(&raw(&[5.0, 5.0, 5.0, 5.0]), 3, None).unwrap_err();
        assert!(matches!(err, Error::EmptyRange { .. }));
        let one = histogram(&raw(&[5.0, 5.0]), 1, None).unwrap();
        assert_eq!(one.counts(), &[2.0]);
    }

    #[test]
    fn auto_range_puts_max_in_last_bin() {
        let h = histogram(&raw(&[0.0, 1.0, 2.0, 3.0]), 3, None).unwrap();
        assert_eq!(h.counts(), &[2.0, 1.0, 1.0]);
        assert_eq!(h.total(), 4.0);
    }

    #[test]
    fn uniform_samples_concentrate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = histogram(&raw(&values), 4, Some((0.0, 1.0))).unwrap();
        let bound = 3.0 * (10_000.0f64 * 0.25 * 0.75).sqrt();
        for &c in h.counts() {
            assert!((c - 2500.0).abs() <= bound, "{c}");
        }
    }

    #[test]
    fn two_dimensional_grid() {
        // Points (0,0), (1,1), (1,0) on a 2x2 grid over [0,1]^2.
        let s = raw(&[0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let h = histogram_nd(&s, 2, 2, Some(&[(0.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(h.counts(), &[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(h.axis_edges().len(), 2);
        assert!(histogram_nd(&raw(&[0.0, 1.0, 2.0]), 2, 2, None).is_err());
    }

    #[test]
    fn sqrt_density_examples() {
        let p: SpherePoint<f64> = to_sqrt_density(&Histogram::from_counts(vec![1.0; 4]).unwrap(), 0.0).unwrap();
        assert!(p.coords().iter().all(|&c| c == 0.5));
        let p: SpherePoint<f64> = to_sqrt_density(&Histogram::from_counts(vec![4.0, 0.0]).unwrap(), 0.0).unwrap();
        assert_eq!(p.coords().as_slice(), &[1.0, 0.0]);
        let p: SpherePoint<f64> = to_sqrt_density(&Histogram::from_counts(vec![1.0, 3.0]).unwrap(), 0.0).unwrap();
        assert!((p.coords()[0] - 0.5).abs() <= 1e-15);
        assert!((p.coords()[1] - 0.75f64.sqrt()).abs() <= 1e-15);
        assert!((p.coords()[1] - 0.8660254037844386).abs() <= 1e-15);
    }

    #[test]
    fn smoothing_fills_empty_bins() {
        let h = Histogram::from_counts(vec![4.0, 0.0]).unwrap();
        let p: SpherePoint<f64> = to_sqrt_density(&h, 1.0).unwrap();
        assert!((p.coords()[1] - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_histograms() {
        assert!(Histogram::from_counts(vec![0.0, 0.0]).is_err());
        assert!(Histogram::from_counts(vec![-1.0, 2.0]).is_err());
        assert!(Histogram::new(vec![1.0], vec![vec![1.0, 1.0]]).is_err());
        assert!(Histogram::from_counts(vec![]).is_err());
    }

    #[test]
    fn vanishing_noise() {
        let s = raw(&[1.0, -2.0, 3.0, 0.5]);
        let n = add_noise_snr(&s, 1e12, 9).unwrap();
        for (a, b) in s.values.iter().zip(&n.values) {
            assert!((a - b).abs() <= 1e-4 * a.abs());
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let s = raw(&[1.0, 2.0, 3.0]);
        assert_eq!(add_noise_snr(&s, 2.0, 5).unwrap(), add_noise_snr(&s, 2.0, 5).unwrap());
        assert_ne!(add_noise_snr(&s, 2.0, 5).unwrap(), add_noise_snr(&s, 2.0, 6).unwrap());
        assert!(add_noise_snr(&s, 0.0, 5).is_err());
    }

    #[test]
    fn noise_power_matches_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..100_000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = raw(&values);
        let noisy = add_noise_snr(&s, 1.0, 77).unwrap();
        let signal: f64 = values.iter().map(|v| v * v).sum();
        let noise: f64 = noisy.values.iter().zip(&values).map(|(a, b)| (a - b) * (a - b)).sum();
        let ratio = noise / signal;
        assert!((0.97..=1.03).contains(&ratio), "{ratio}");
    }

    #[test]
    fn decibels() {
        assert!((snr_from_db(10.0) - 10.0).abs() < 1e-12);
        assert!((snr_from_db(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("hist".parse::<Kind>().unwrap(), Kind::Hist);
        assert!("bogus".parse::<Kind>().is_err());
    }

    proptest! {
        #[test]
        fn sqrt_density_invariants(counts in prop::collection::vec(0.0f64..100.0, 1..40)) {
            prop_assume!(counts.iter().sum::<f64>() > 0.0);
            let p: SpherePoint<f64> = to_sqrt_density(&Histogram::from_counts(counts).unwrap(), 0.0).unwrap();
            prop_assert!((p.coords().norm() - 1.0).abs() <= 1e-12);
            prop_assert!(p.coords().iter().all(|&c| c >= 0.0));
        }

        #[test]
        fn histogram_permutation_invariant(
            mut values in prop::collection::vec(-10.0f64..10.0, 2..60),
            bins in 1usize..8,
            seed in any::<u64>(),
        ) {
            let a = histogram(&raw(&values), bins, Some((-10.0, 10.0))).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..values.len()).rev() {
                let j = rng.random_range(0..=i);
                values.swap(i, j);
            }
            let b = histogram(&raw(&values), bins, Some((-10.0, 10.0))).unwrap();
            prop_assert_eq!(a.counts(), b.counts());
            prop_assert_eq!(a.total(), values.len() as f64);
        }
    }
}
