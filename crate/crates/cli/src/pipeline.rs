//! Feature preparation and the clustering, classification and noise
//! pipelines behind the subcommands.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use slrr::classify::{self, LabeledSphereSet};
use slrr::clustering::{self, AffinityRule, ClusterResult};
use slrr::features::{self, Histogram, Kind, RawSample};
use slrr::geometry::{self, SpherePoint};
use slrr::solver::{self, MuRule, Problem, Solution, SolverConfig};

use crate::args::{AffinityArg, ClassifyMethod, ClusterMethod, KindArg};
use crate::error::{invalid, CliError};

pub const DEFAULT_BINS: usize = 16;

/// Every knob that influences a result, as recorded in result files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: KindArg,
    pub bins: Option<usize>,
    pub dims: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub nu: f64,
    pub sigma: f64,
    pub mu_factor: f64,
    pub forbid_diagonal: bool,
    pub eps: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub n_max: usize,
    pub affinity: AffinityArg,
    pub kernel_width: Option<f64>,
    pub neighbors: usize,
    pub split: f64,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for the given input kind.
    pub fn new(kind: Kind) -> Self {
        let s = SolverConfig::<f64>::default();
        Self {
            kind: kind.into(),
            bins: None,
            dims: 1,
            alpha: 0.0,
            lambda: s.lambda,
            nu: s.nu,
            sigma: s.sigma,
            mu_factor: 1.0,
            forbid_diagonal: s.forbid_diagonal,
            eps: s.eps,
            max_iters: s.max_iters,
            rho: s.rho,
            beta0: s.beta0,
            beta_max: s.beta_max,
            n_max: s.n_max,
            affinity: AffinityArg::Abs,
            kernel_width: None,
            neighbors: 1,
            split: 0.8,
            seed: 0,
        }
    }

    pub fn solver(&self) -> SolverConfig<f64> {
        SolverConfig {
            lambda: self.lambda,
            nu: self.nu,
            sigma: self.sigma,
            beta0: self.beta0,
            beta_max: self.beta_max,
            rho: self.rho,
            eps: self.eps,
            max_iters: self.max_iters,
            mu_rule: MuRule::Lipschitz { factor: self.mu_factor },
            forbid_diagonal: self.forbid_diagonal,
            n_max: self.n_max,
            ..SolverConfig::default()
        }
    }

    fn affinity_rule(&self) -> AffinityRule {
        match self.affinity {
            AffinityArg::Abs => AffinityRule::Abs,
            AffinityArg::Wtw => AffinityRule::Wtw,
        }
    }
}

/// Samples in both representations used by the methods.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ids: Vec<String>,
    /// Square-root densities, or the input rows for sphere data.
    pub sphere: Vec<SpherePoint<f64>>,
    /// Densities for histogram data, coordinates for sphere data.
    pub euclid: Vec<DVector<f64>>,
    /// Dense class ids in `0..classes`, if every sample is labelled.
    pub truth: Option<Vec<usize>>,
    pub classes: usize,
}

impl Prepared {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn require_truth(&self) -> Result<&[usize], CliError> {
        self.truth.as_deref().ok_or_else(|| invalid("input has no label column"))
    }
}

/// Maps arbitrary integer labels to `0..classes` in ascending order.
fn compact_labels(samples: &[RawSample]) -> Result<Option<(Vec<usize>, usize)>, CliError> {
    let labelled = samples.iter().filter(|s| s.class_label.is_some()).count();
    if labelled == 0 {
        return Ok(None);
    }
    if labelled != samples.len() {
        return Err(invalid("label column has missing entries"));
    }
    let mut ids: Vec<i64> = samples.iter().filter_map(|s| s.class_label).collect();
    ids.sort_unstable();
    ids.dedup();
    let dense = samples
        .iter()
        .map(|s| ids.binary_search(&s.class_label.expect("checked")).expect("present"))
        .collect();
    Ok(Some((dense, ids.len())))
}

fn histograms(samples: &[RawSample], cfg: &RunConfig) -> Result<Vec<Histogram>, CliError> {
    match cfg.kind {
        KindArg::Hist => samples
            .iter()
            .map(|s| {
                if let Some(b) = cfg.bins {
                    if b != s.values.len() {
                        return Err(invalid(format!("--bins {b} does not match {} histogram columns", s.values.len())));
                    }
                }
                Ok(Histogram::from_counts(s.values.clone())?)
            })
            .collect(),
        KindArg::Raw => {
            let bins = cfg.bins.unwrap_or(DEFAULT_BINS);
            let d = cfg.dims;
            if d == 0 {
                return Err(invalid("--dims must be positive"));
            }
            // One grid for the whole dataset so bins mean the same thing in every sample.
            let ranges = (0..d)
                .map(|axis| {
                    let values = samples.iter().flat_map(|s| s.values.iter().skip(axis).step_by(d).copied());
                    features::auto_range(values, bins)
                })
                .collect::<Result<Vec<_>, _>>()?;
            samples
                .iter()
                .map(|s| Ok(features::histogram_nd(s, d, bins, Some(&ranges))?))
                .collect()
        }
        KindArg::Sphere => unreachable!("sphere rows are not histograms"),
    }
}

/// Builds both representations of the samples.
pub fn prepare(samples: &[RawSample], cfg: &RunConfig) -> Result<Prepared, CliError> {
    if samples.is_empty() {
        return Err(invalid("input has no samples"));
    }
    let width = samples[0].values.len();
    if let Some(s) = samples.iter().find(|s| s.values.len() != width) {
        return Err(invalid(format!("sample {:?} has {} values, expected {width}", s.id, s.values.len())));
    }
    let sphere: Vec<SpherePoint<f64>> = match cfg.kind {
        KindArg::Sphere => samples
            .iter()
            .map(|s| {
                s.validate()?;
                SpherePoint::from_slice(&s.values)
            })
            .collect::<Result<_, _>>()?,
        _ => histograms(samples, cfg)?
            .iter()
            .map(|h| features::to_sqrt_density(h, cfg.alpha))
            .collect::<Result<_, _>>()?,
    };
    let euclid = sphere
        .iter()
        .map(|p| match cfg.kind {
            KindArg::Sphere => p.coords().clone(),
            _ => p.coords().map(|v| v * v),
        })
        .collect();
    let (truth, classes) = match compact_labels(samples)? {
        Some((t, c)) => (Some(t), c),
        None => (None, 0),
    };
    Ok(Prepared { ids: samples.iter().map(|s| s.id.clone()).collect(), sphere, euclid, truth, classes })
}

/// Which objective a representation is solved under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Tangent-space quadratic form with low-rank and geodesic-ℓ1 terms.
    Sphere,
    /// Euclidean differences, unit ℓ1 weights.
    Euclidean,
    /// Tangent-space quadratic form with the geodesic-ℓ1 term only and a
    /// zero diagonal.
    Sparse,
}

pub fn solve(rep: Representation, prep: &Prepared, cfg: &RunConfig) -> Result<Solution<f64>, CliError> {
    let mut config = cfg.solver();
    config.validate()?;
    let problem = match rep {
        Representation::Sphere => Problem::sphere(&prep.sphere, config.sigma, config.n_max)?,
        Representation::Euclidean => Problem::euclidean(&prep.euclid, config.n_max)?,
        Representation::Sparse => {
            config.lambda = 0.0;
            config.forbid_diagonal = true;
            Problem::sphere(&prep.sphere, config.sigma, config.n_max)?
        }
    };
    Ok(solver::solve_problem(&problem, &config)?)
}

fn columns(v: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(v)
}

fn kernel_width(cfg: &RunConfig, n: usize, dist: impl Fn(usize, usize) -> f64) -> Result<f64, CliError> {
    match cfg.kernel_width {
        Some(w) => Ok(w),
        None => clustering::median_pairwise(n, dist)
            .filter(|w| *w > 0.0)
            .ok_or(CliError::Core(slrr::Error::DegenerateAffinity)),
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub result: ClusterResult,
    pub solution: Option<Solution<f64>>,
    /// Kernel width actually used by the kernel baselines.
    pub kernel_width: Option<f64>,
}

impl ClusterOutcome {
    pub fn converged(&self) -> bool {
        self.solution.as_ref().is_none_or(|s| s.converged)
    }
}

pub fn cluster(method: ClusterMethod, prep: &Prepared, k: usize, cfg: &RunConfig) -> Result<ClusterOutcome, CliError> {
    let n = prep.len();
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= {n}, got k = {k}")));
    }
    let rep = match method {
        ClusterMethod::Proposed => Some(Representation::Sphere),
        ClusterMethod::LrrEuclid => Some(Representation::Euclidean),
        ClusterMethod::Sc => Some(Representation::Sparse),
        ClusterMethod::NcutRaw | ClusterMethod::Gncut => None,
    };
    let (affinity, solution, width) = match (rep, method) {
        (Some(rep), _) => {
            let sol = solve(rep, prep, cfg)?;
            (cfg.affinity_rule().apply(&sol.w), Some(sol), None)
        }
        (None, ClusterMethod::Gncut) => {
            let w = kernel_width(cfg, n, |i, j| geometry::geodesic_distance(&prep.sphere[i], &prep.sphere[j]))?;
            (clustering::geodesic_affinity(&prep.sphere, w)?, None, Some(w))
        }
        (None, _) => {
            let w = kernel_width(cfg, n, |i, j| (&prep.euclid[i] - &prep.euclid[j]).norm())?;
            (clustering::gaussian_affinity(&columns(&prep.euclid), w)?, None, Some(w))
        }
    };
    let mut result = clustering::ncut(&affinity, k, cfg.seed)?;
    if let Some(truth) = &prep.truth {
        result = result.score(truth)?;
    }
    Ok(ClusterOutcome { result, solution, kernel_width: width })
}

/// Seeded per-class split: each class contributes `round(frac · size)`
/// training samples, at least one, and at least one test sample when it
/// has two or more members.
pub fn stratified_split(truth: &[usize], frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(invalid(format!("--split must lie strictly between 0 and 1, got {frac}")));
    }
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let size = members.len();
        let mut take = ((frac * size as f64).round() as usize).max(1);
        if size > 1 {
            take = take.min(size - 1);
        }
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOutcome {
    pub method: ClassifyMethod,
    pub accuracy: f64,
    /// Accuracy of predicting the training rows themselves.
    pub train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

pub fn classify(
    method: ClassifyMethod,
    prep: &Prepared,
    train: &[usize],
    test: &[usize],
    cfg: &RunConfig,
) -> Result<ClassifyOutcome, CliError> {
    let truth = prep.require_truth()?;
    if prep.classes < 2 {
        return Err(invalid(format!("classification needs at least 2 classes, found {}", prep.classes)));
    }
    if test.is_empty() {
        return Err(invalid("the split leaves no test samples"));
    }
    let k = cfg.neighbors;
    let train_labels: Vec<usize> = train.iter().map(|&i| truth[i]).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| truth[i]).collect::<Vec<_>>();
    let by_columns = |features: &DMatrix<f64>| -> Result<(Vec<usize>, Vec<usize>), CliError> {
        Ok((
            classify::knn_columns_predict(features, train, &train_labels, test, k)?,
            classify::knn_columns_predict(features, train, &train_labels, train, k)?,
        ))
    };
    let mut converged = None;
    let (pred_test, pred_train) = match method {
        ClassifyMethod::Gknn => {
            let set = LabeledSphereSet::new(train.iter().map(|&i| prep.sphere[i].clone()).collect(), train_labels.clone())?;
            let predict = |idx: &[usize]| {
                idx.iter()
                    .map(|&i| classify::gknn_predict(&set, &prep.sphere[i], k))
                    .collect::<Result<Vec<_>, _>>()
            };
            (predict(test)?, predict(train)?)
        }
        ClassifyMethod::KnnRaw => by_columns(&columns(&prep.euclid))?,
        ClassifyMethod::Proposed | ClassifyMethod::LrrEuclid | ClassifyMethod::Sc => {
            let rep = match method {
                ClassifyMethod::Proposed => Representation::Sphere,
                ClassifyMethod::LrrEuclid => Representation::Euclidean,
                _ => Representation::Sparse,
            };
            let sol = solve(rep, prep, cfg)?;
            converged = Some(sol.converged);
            by_columns(sol.w.as_matrix())?
        }
    };
    Ok(ClassifyOutcome {
        method,
        accuracy: classify::accuracy(&pred_test, &pick(test))?,
        train_accuracy: classify::accuracy(&pred_train, &pick(train))?,
        converged,
    })
}

/// Noise seed for one (snr, trial) cell, shared by every method so they
/// see identical corrupted data.
pub fn noise_seed(seed: u64, snr: f64, trial: usize) -> u64 {
    seed ^ snr.to_bits().wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (trial as u64 + 1).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
}

/// Adds noise to every sample and restores the input kind's invariants:
/// sphere rows are renormalized and histogram counts clipped at zero.
pub fn corrupt(samples: &[RawSample], kind: KindArg, snr: f64, seed: u64) -> Result<Vec<RawSample>, CliError> {
    samples
        .iter()
        .map(|s| {
            let mut noisy = features::add_noise_snr(s, snr, features::sample_seed(seed, &s.id))?;
            match kind {
                KindArg::Sphere => {
                    let norm = noisy.values.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(norm > 0.0) {
                        return Err(invalid(format!("sample {:?} vanished under noise", s.id)));
                    }
                    noisy.values.iter_mut().for_each(|v| *v /= norm);
                }
                KindArg::Hist => noisy.values.iter_mut().for_each(|v| *v = v.max(0.0)),
                KindArg::Raw => {}
            }
            Ok(noisy)
        })
        .collect()
}

/// One line of a noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub snr: f64,
    pub trial: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMethod {
    Cluster(ClusterMethod),
    Classify(ClassifyMethod),
}

impl SweepMethod {
    pub fn name(self) -> String {
        use clap::ValueEnum;
        let value = match self {
            SweepMethod::Cluster(m) => m.to_possible_value(),
            SweepMethod::Classify(m) => m.to_possible_value(),
        };
        value.expect("no skipped variants").get_name().to_string()
    }
}

/// Runs every method on `trials` noisy copies of the data at each SNR.
/// Rows come back sorted by method name, SNR and trial.
pub fn noise_sweep(
    samples: &[RawSample],
    methods: &[SweepMethod],
    snrs: &[f64],
    trials: usize,
    k: Option<usize>,
    cfg: &RunConfig,
) -> Result<Vec<SweepRow>, CliError> {
    if let Some(bad) = snrs.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(invalid(format!("snr values must be positive, got {bad}")));
    }
    if snrs.is_empty() || methods.is_empty() || trials == 0 {
        return Err(invalid("need at least one snr, one method and one trial"));
    }
    let clean = prepare(samples, cfg)?;
    let truth = clean.require_truth()?.to_vec();
    let k = k.unwrap_or(clean.classes);
    let cells: Vec<(f64, usize)> = snrs.iter().flat_map(|&s| (0..trials).map(move |t| (s, t))).collect();
    let split = if methods.iter().any(|m| matches!(m, SweepMethod::Classify(_))) {
        Some(stratified_split(&truth, cfg.split, cfg.seed)?)
    } else {
        None
    };
    let nested: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(snr, trial)| {
            let noisy = corrupt(samples, cfg.kind, snr, noise_seed(cfg.seed, snr, trial))?;
            let prep = prepare(&noisy, cfg)?;
            methods
                .iter()
                .map(|&m| {
                    let accuracy = match m {
                        SweepMethod::Cluster(c) => cluster(c, &prep, k, cfg)?.result.accuracy.expect("labelled"),
                        SweepMethod::Classify(c) => {
                            let (train, test) = split.as_ref().expect("split for classification");
                            classify(c, &prep, train, test, cfg)?.accuracy
                        }
                    };
                    Ok(SweepRow { method: m.name(), snr, trial, accuracy })
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<SweepRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.snr.total_cmp(&b.snr)).then(a.trial.cmp(&b.trial)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(seed: u64) -> Vec<RawSample> {
        let spec = slrr::synth::SynthSpec { k: 2, n_per: 8, m: 4, spread: 0.05, min_sep: 0.8, seed };
        let set = slrr::synth::generate::<f64>(&spec).unwrap();
        set.points()
            .iter()
            .zip(set.labels())
            .enumerate()
            .map(|(i, (p, &l))| RawSample::new(i.to_string(), p.coords().iter().copied().collect()).with_label(l as i64))
            .collect()
    }

    #[test]
    fn labels_are_compacted_in_order() {
        let s = vec![
            RawSample::new("a", vec![1.0]).with_label(7),
            RawSample::new("b", vec![1.0]).with_label(-2),
            RawSample::new("c", vec![1.0]).with_label(7),
        ];
        assert_eq!(compact_labels(&s).unwrap(), Some((vec![1, 0, 1], 2)));
        let partial = vec![s[0].clone(), RawSample::new("d", vec![1.0])];
        assert!(compact_labels(&partial).is_err());
    }

    #[test]
    fn raw_samples_share_one_grid() {
        let s = vec![RawSample::new("a", vec![0.0, 0.0, 1.0]), RawSample::new("b", vec![1.0, 1.0, 1.0])];
        let cfg = RunConfig { bins: Some(2), ..RunConfig::new(Kind::Raw) };
        let prep = prepare(&s, &cfg).unwrap();
        assert_eq!(prep.euclid[0].as_slice(), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(prep.euclid[1].as_slice(), &[0.0, 1.0]);
        assert!(prep.truth.is_none());
    }

    #[test]
    fn sphere_rows_must_be_unit() {
        let s = vec![RawSample::new("a", vec![1.0, 1.0])];
        assert!(matches!(prepare(&s, &RunConfig::new(Kind::Sphere)), Err(CliError::Core(slrr::Error::NotUnit { .. }))));
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let truth: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let (train, test) = stratified_split(&truth, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (16, 4));
        assert_eq!(test.iter().filter(|&&i| truth[i] == 0).count(), 2);
        assert_eq!(stratified_split(&truth, 0.8, 3).unwrap(), (train.clone(), test));
        assert_ne!(stratified_split(&truth, 0.8, 4).unwrap().0, train);
        assert!(stratified_split(&truth, 1.0, 3).is_err());
    }

    #[test]
    fn corruption_keeps_sphere_rows_unit() {
        let noisy = corrupt(&synth(1), KindArg::Sphere, 2.0, 5).unwrap();
        for s in &noisy {
            let norm: f64 = s.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_eq!(noisy, corrupt(&synth(1), KindArg::Sphere, 2.0, 5).unwrap());
    }

    #[test]
    fn sweep_shape_and_order() {
        let cfg = RunConfig::new(Kind::Sphere);
        let methods = [SweepMethod::Cluster(ClusterMethod::Gncut), SweepMethod::Cluster(ClusterMethod::NcutRaw)];
        let rows = noise_sweep(&synth(2), &methods, &[5.0, 1.0], 2, None, &cfg).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].method, "gncut");
        assert_eq!((rows[0].snr, rows[0].trial), (1.0, 0));
        assert_eq!((rows[3].snr, rows[3].trial), (5.0, 1));
        assert!(noise_sweep(&synth(2), &methods, &[0.0], 1, None, &cfg).is_err());
    }

    #[test]
    fn every_cluster_method_runs() {
        let cfg = RunConfig::new(Kind::Sphere);
        let prep = prepare(&synth(3), &cfg).unwrap();
        for m in [
            ClusterMethod::Proposed,
            ClusterMethod::NcutRaw,
            ClusterMethod::LrrEuclid,
            ClusterMethod::Gncut,
            ClusterMethod::Sc,
        ] {
            let out = cluster(m, &prep, 2, &cfg).unwrap();
            assert_eq!(out.result.labels.len(), 16);
            let acc = out.result.accuracy.unwrap();
            assert!((0.5..=1.0).contains(&acc), "{m:?}: {acc}");
        }
        assert!(cluster(ClusterMethod::Gncut, &prep, 17, &cfg).is_err());
    }
}
