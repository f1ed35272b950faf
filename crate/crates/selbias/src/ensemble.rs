//! Coupled-walk ensembles: expected maxima, per-step premium profiles,
//! normalized decay, concentration ratios, and nonasymptotic envelopes.
//!
//! All estimators stream over fixed-size path blocks and merge block
//! accumulators in block order, so results are identical for any worker
//! count. Memory is O(horizon), never O(paths x horizon).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::increments::{Family, IncrementModel};
use crate::isotonic::isotonic_nonincreasing;
use crate::premium::{premium_mc, premium_replica_sums, PremiumEstimate};
use crate::rng::StepKey;

const BLOCK: usize = 4096;

/// Configuration of one coupled-walk ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub model: IncrementModel,
    pub horizon: usize,
    pub paths: usize,
    pub root_seed: u64,
    pub nested_inner_replicas: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(model: IncrementModel, horizon: usize, paths: usize, root_seed: u64) -> Self {
        EnsembleConfig {
            model,
            horizon,
            paths,
            root_seed,
            nested_inner_replicas: None,
        }
    }

    pub fn with_nested(mut self, inner_replicas: usize) -> Self {
        self.nested_inner_replicas = Some(inner_replicas);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.paths < 2 {
            return Err(Error::InvalidConfig("paths must be at least 2".into()));
        }
        Ok(())
    }
}

/// Split `paths` into fixed blocks, run them (possibly in parallel), and
/// merge the block results in block order. Deterministic for any thread
/// count because both the block boundaries and the merge order are fixed.
pub(crate) fn fold_blocks<A, R, M>(paths: usize, run: R, merge: M) -> A
where
    A: Send,
    R: Fn(std::ops::Range<usize>) -> A + Sync,
    M: Fn(A, A) -> A,
{
    let n_blocks = paths.div_ceil(BLOCK);
    let results: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| run(b * BLOCK..((b + 1) * BLOCK).min(paths)))
        .collect();
    results
        .into_iter()
        .reduce(merge)
        .expect("at least one block")
}

/// Running per-step statistics of the ensemble maximum.
#[derive(Debug, Clone)]
pub struct PathSummary {
    pub paths: usize,
    /// Mean of M_i over paths, i = 1..=horizon.
    pub max_mean: Vec<f64>,
    /// Variance of M_i over paths.
    pub max_var: Vec<f64>,
    /// Mean of the per-path differences M_i - M_{i-1} (telescoping premium).
    pub step_mean: Vec<f64>,
    /// Variance of the per-path differences.
    pub step_var: Vec<f64>,
    /// Nested conditional premium estimates, when requested.
    pub nested_mean: Option<Vec<f64>>,
    pub nested_var: Option<Vec<f64>>,
}

struct StepAccumulator {
    sum_m: Vec<f64>,
    sum_m2: Vec<f64>,
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
    sum_nested: Vec<f64>,
    sum_nested2: Vec<f64>,
}

impl StepAccumulator {
    fn new(horizon: usize, nested: bool) -> Self {
        let nested_len = if nested { horizon } else { 0 };
        StepAccumulator {
            sum_m: vec![0.0; horizon],
            sum_m2: vec![0.0; horizon],
            sum_d: vec![0.0; horizon],
            sum_d2: vec![0.0; horizon],
            sum_nested: vec![0.0; nested_len],
            sum_nested2: vec![0.0; nested_len],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        };
        add(&mut self.sum_m, &other.sum_m);
        add(&mut self.sum_m2, &other.sum_m2);
        add(&mut self.sum_d, &other.sum_d);
        add(&mut self.sum_d2, &other.sum_d2);
        add(&mut self.sum_nested, &other.sum_nested);
        add(&mut self.sum_nested2, &other.sum_nested2);
        self
    }
}

/// Simulate the ensemble, returning per-step mean and variance of the
/// maximum, of its increments, and (optionally) nested premium estimates.
pub fn simulate_ensemble(config: &EnsembleConfig) -> Result<PathSummary> {
    config.validate()?;
    let n = config.horizon;
    let k = config.model.arm_count();
    let model = &config.model;
    let root = config.root_seed;
    let nested = config.nested_inner_replicas;
    if let Some(r) = nested {
        if r < 100 {
            return Err(Error::InvalidConfig(
                "nested estimation requires at least 100 inner replicas".into(),
            ));
        }
    }

    let acc = fold_blocks(
        config.paths,
        |range| {
            let mut acc = StepAccumulator::new(n, nested.is_some());
            let mut state = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            let mut centered = vec![0.0_f64; k];
            for path in range {
                state.iter_mut().for_each(|s| *s = 0.0);
                let mut prev_max = 0.0_f64;
                for i in 1..=n {
                    let key = StepKey::new(root, path as u64, i as u64);
                    if let Some(inner) = nested {
                        let top = state.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        for (c, s) in centered.iter_mut().zip(&state) {
                            *c = s - top;
                        }
                        let mut inner_rng = key.replica(1);
                        let (sum, _) =
                            premium_replica_sums(&centered, model, inner, &mut inner_rng);
                        let est = sum / inner as f64;
                        acc.sum_nested[i - 1] += est;
                        acc.sum_nested2[i - 1] += est * est;
                    }
                    let mut rng = key.replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    let mut m = f64::NEG_INFINITY;
                    for (s, &y) in state.iter_mut().zip(buf.iter()) {
                        *s += y;
                        if *s > m {
                            m = *s;
                        }
                    }
                    let d = m - prev_max;
                    acc.sum_m[i - 1] += m;
                    acc.sum_m2[i - 1] += m * m;
                    acc.sum_d[i - 1] += d;
                    acc.sum_d2[i - 1] += d * d;
                    prev_max = m;
                }
            }
            acc
        },
        StepAccumulator::merge,
    );

    let p = config.paths as f64;
    let to_stats = |sum: &[f64], sum2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mean: Vec<f64> = sum.iter().map(|s| s / p).collect();
        let var: Vec<f64> = sum
            .iter()
            .zip(sum2)
            .map(|(s, s2)| ((s2 - s * s / p) / (p - 1.0)).max(0.0))
            .collect();
        (mean, var)
    };
    let (max_mean, max_var) = to_stats(&acc.sum_m, &acc.sum_m2);
    let (step_mean, step_var) = to_stats(&acc.sum_d, &acc.sum_d2);
    let (nested_mean, nested_var) = if nested.is_some() {
        let (m, v) = to_stats(&acc.sum_nested, &acc.sum_nested2);
        (Some(m), Some(v))
    } else {
        (None, None)
    };
    Ok(PathSummary {
        paths: config.paths,
        max_mean,
        max_var,
        step_mean,
        step_var,
        nested_mean,
        nested_var,
    })
}

/// Monte Carlo estimate of the expected maximum at the horizon.
pub fn expected_max(config: &EnsembleConfig) -> Result<PremiumEstimate> {
    let summary = simulate_ensemble(config)?;
    let n = config.horizon;
    Ok(PremiumEstimate {
        value: summary.max_mean[n - 1],
        std_error: (summary.max_var[n - 1] / config.paths as f64).sqrt(),
        replicas: config.paths as u64,
        estimator: crate::premium::Estimator::Mc,
    })
}

/// Normalized per-step profile and decay-time table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormalizedProfile {
    /// premium[i] / premium[1]; first entry is 1 by construction.
    pub psi: Vec<f64>,
    pub psi_se: Vec<f64>,
    /// Isotonic (nonincreasing) smoothing of psi.
    pub psi_smoothed: Vec<f64>,
}

/// Per-step premium report from a single ensemble run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProfileReport {
    pub family: Family,
    pub arm_count: usize,
    pub horizon: usize,
    pub paths: usize,
    /// Telescoping per-step premium estimates.
    pub premium: Vec<f64>,
    pub premium_se: Vec<f64>,
    /// Nested conditional estimates, when inner replicas were requested.
    pub nested: Option<Vec<f64>>,
    pub nested_se: Option<Vec<f64>>,
    /// Cumulative sums of `premium`; the telescoping identity
    /// expected_max[i] - expected_max[i-1] = premium[i] holds exactly.
    pub expected_max: Vec<f64>,
    pub expected_max_se: Vec<f64>,
    pub normalized: Option<NormalizedProfile>,
    /// Requested decay thresholds and the smoothed crossing index, when the
    /// profile crosses within the horizon.
    pub decay_times: Vec<(f64, Option<usize>)>,
}

/// Estimate the per-step premium profile by telescoping (and nested
/// conditional Monte Carlo when the config carries an inner budget).
pub fn premium_profile(config: &EnsembleConfig, alphas: &[f64]) -> Result<ProfileReport> {
    let summary = simulate_ensemble(config)?;
    let p = config.paths as f64;
    let premium = summary.step_mean.clone();
    let premium_se: Vec<f64> = summary.step_var.iter().map(|v| (v / p).sqrt()).collect();
    let nested = summary.nested_mean.clone();
    let nested_se = summary
        .nested_var
        .as_ref()
        .map(|vars| vars.iter().map(|v| (v / p).sqrt()).collect());

    let mut expected_max = Vec::with_capacity(premium.len());
    let mut running = 0.0;
    for &d in &premium {
        running += d;
        expected_max.push(running);
    }
    let expected_max_se: Vec<f64> = summary.max_var.iter().map(|v| (v / p).sqrt()).collect();

    let mut report = ProfileReport {
        family: config.model.family(),
        arm_count: config.model.arm_count(),
        horizon: config.horizon,
        paths: config.paths,
        premium,
        premium_se,
        nested,
        nested_se,
        expected_max,
        expected_max_se,
        normalized: None,
        decay_times: Vec::new(),
    };
    if let Ok(profile) = normalized_profile(&report) {
        report.normalized = Some(profile);
    }
    report.decay_times = alphas
        .iter()
        .map(|&alpha| {
            let tau = decay_time(PsiSource::Empirical(&report), alpha).ok().flatten();
            (alpha, tau)
        })
        .collect();
    Ok(report)
}

/// Per-step premiums via conditional inner Monte Carlo. Requires the
/// config's nested inner budget; this is the non-vacuous verification of
/// the decomposition, since telescoping alone is an identity.
pub fn nested_premium(config: &EnsembleConfig, alphas: &[f64]) -> Result<ProfileReport> {
    if config.nested_inner_replicas.is_none() {
        return Err(Error::InvalidConfig(
            "nested estimation requires an inner replica budget".into(),
        ));
    }
    premium_profile(config, alphas)
}

/// Normalize the per-step profile by its first entry.
pub fn normalized_profile(report: &ProfileReport) -> Result<NormalizedProfile> {
    let first = report.premium[0];
    let first_se = report.premium_se[0];
    if !first.is_finite() || first <= 3.0 * first_se || first <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step-1 premium {first} is not separated from 0 (se {first_se}); \
             cannot normalize"
        )));
    }
    let psi: Vec<f64> = report.premium.iter().map(|&d| d / first).collect();
    let psi_se: Vec<f64> = report
        .premium
        .iter()
        .zip(&report.premium_se)
        .enumerate()
        .map(|(i, (&d, &se))| {
            if i == 0 {
                0.0
            } else {
                let rel_i = se / first;
                let rel_1 = (d / first) * (first_se / first);
                (rel_i * rel_i + rel_1 * rel_1).sqrt()
            }
        })
        .collect();
    let weights: Vec<f64> = psi_se
        .iter()
        .map(|&se| if se > 0.0 { 1.0 / (se * se) } else { 1.0 })
        .collect();
    let psi_smoothed = isotonic_nonincreasing(&psi, &weights);
    Ok(NormalizedProfile {
        psi,
        psi_se,
        psi_smoothed,
    })
}

/// Where a normalized profile comes from when computing decay times.
pub enum PsiSource<'a> {
    /// The square-root profile of Gaussian increments.
    AnalyticGaussian,
    /// An estimated profile; the isotonic-smoothed curve is thresholded.
    Empirical(&'a ProfileReport),
}

/// First step at which the normalized premium drops below `alpha`.
/// `Ok(None)` means the profile does not cross within the horizon.
pub fn decay_time(source: PsiSource<'_>, alpha: f64) -> Result<Option<usize>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    match source {
        PsiSource::AnalyticGaussian => {
            // psi(i) = sqrt(i) - sqrt(i-1) is strictly decreasing to 0
            let mut i = 1usize;
            loop {
                let psi = (i as f64).sqrt() - ((i - 1) as f64).sqrt();
                if psi < alpha {
                    return Ok(Some(i));
                }
                i += 1;
            }
        }
        PsiSource::Empirical(report) => {
            let profile = match &report.normalized {
                Some(p) => p.psi_smoothed.clone(),
                None => normalized_profile(report)?.psi_smoothed,
            };
            Ok(profile.iter().position(|&v| v < alpha).map(|idx| idx + 1))
        }
    }
}

/// Mean and variance of the running maximum at chosen steps, plus its
/// covariance with the final-step maximum.
pub(crate) struct CheckpointStats {
    pub paths: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub cov_with_final: Vec<f64>,
}

/// `checkpoints` must be sorted, nonempty, last entry = horizon.
pub(crate) fn max_at_checkpoints(
    model: &IncrementModel,
    checkpoints: &[usize],
    paths: usize,
    root_seed: u64,
) -> CheckpointStats {
    let k = model.arm_count();
    let n_cp = checkpoints.len();
    let horizon = *checkpoints.last().expect("nonempty checkpoints");

    struct Acc {
        sum: Vec<f64>,
        sum2: Vec<f64>,
        cross: Vec<f64>,
    }
    let acc = fold_blocks(
        paths,
        |range| {
            let mut acc = Acc {
                sum: vec![0.0; n_cp],
                sum2: vec![0.0; n_cp],
                cross: vec![0.0; n_cp],
            };
            let mut state = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            let mut cp_values = vec![0.0_f64; n_cp];
            for path in range {
                state.iter_mut().for_each(|s| *s = 0.0);
                let mut next_cp = 0usize;
                for i in 1..=horizon {
                    let mut rng = StepKey::new(root_seed, path as u64, i as u64).replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    let mut m = f64::NEG_INFINITY;
                    for (s, &y) in state.iter_mut().zip(buf.iter()) {
                        *s += y;
                        if *s > m {
                            m = *s;
                        }
                    }
                    while next_cp < n_cp && checkpoints[next_cp] == i {
                        cp_values[next_cp] = m;
                        next_cp += 1;
                    }
                }
                let final_m = cp_values[n_cp - 1];
                for (j, &m) in cp_values.iter().enumerate() {
                    acc.sum[j] += m;
                    acc.sum2[j] += m * m;
                    acc.cross[j] += m * final_m;
                }
            }
            acc
        },
        |mut a, b| {
            for (x, y) in a.sum.iter_mut().zip(&b.sum) {
                *x += y;
            }
            for (x, y) in a.sum2.iter_mut().zip(&b.sum2) {
                *x += y;
            }
            for (x, y) in a.cross.iter_mut().zip(&b.cross) {
                *x += y;
            }
            a
        },
    );

    let p = paths as f64;
    let mean: Vec<f64> = acc.sum.iter().map(|s| s / p).collect();
    let var: Vec<f64> = acc
        .sum
        .iter()
        .zip(&acc.sum2)
        .map(|(s, s2)| ((s2 - s * s / p) / (p - 1.0)).max(0.0))
        .collect();
    let final_sum = acc.sum[n_cp - 1];
    let cov_with_final: Vec<f64> = acc
        .sum
        .iter()
        .zip(&acc.cross)
        .map(|(s, c)| (c - s * final_sum / p) / (p - 1.0))
        .collect();
    CheckpointStats {
        paths,
        mean,
        var,
        cov_with_final,
    }
}

/// One early-fraction bias ratio with its delta-method standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConcentrationRatio {
    pub alpha: f64,
    /// floor(alpha * n)
    pub early_step: usize,
    pub ratio: f64,
    pub std_error: f64,
}

/// Ratios E[M_floor(alpha n)] / E[M_n] for each requested alpha.
pub fn bias_concentration(
    config: &EnsembleConfig,
    alphas: &[f64],
) -> Result<Vec<ConcentrationRatio>> {
    config.validate()?;
    let n = config.horizon;
    let mut steps = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        let early = (alpha * n as f64).floor() as usize;
        if early < 1 {
            return Err(Error::InvalidConfig(format!(
                "alpha {alpha} gives an empty early window at horizon {n}"
            )));
        }
        steps.push(early);
    }
    let mut checkpoints: Vec<usize> = steps.clone();
    checkpoints.push(n);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let stats = max_at_checkpoints(&config.model, &checkpoints, config.paths, config.root_seed);
    let p = stats.paths as f64;
    let final_idx = checkpoints.len() - 1;
    let (mn, vn) = (stats.mean[final_idx], stats.var[final_idx]);

    let out = alphas
        .iter()
        .zip(&steps)
        .map(|(&alpha, &early)| {
            let idx = checkpoints.binary_search(&early).expect("checkpoint present");
            let (ma, va) = (stats.mean[idx], stats.var[idx]);
            let cov = stats.cov_with_final[idx];
            let ratio = ma / mn;
            let rel_var =
                (va / (ma * ma) + vn / (mn * mn) - 2.0 * cov / (ma * mn)).max(0.0) / p;
            ConcentrationRatio {
                alpha,
                early_step: early,
                ratio,
                std_error: ratio.abs() * rel_var.sqrt(),
            }
        })
        .collect();
    Ok(out)
}

/// Deterministic sub-Gaussian envelope sqrt(2 n lambda_max log K).
pub fn subgaussian_envelope(horizon: usize, arm_count: usize, lambda_max: f64) -> f64 {
    assert!(horizon >= 1 && arm_count >= 1 && lambda_max >= 0.0);
    (2.0 * horizon as f64 * lambda_max * (arm_count as f64).ln()).sqrt()
}

/// The crude bound n * E[max_k Y_k], estimated by Monte Carlo at the tie.
pub fn crude_upper_bound(
    horizon: usize,
    model: &IncrementModel,
    replicas: usize,
    root_seed: u64,
) -> Result<PremiumEstimate> {
    let zero = vec![0.0; model.arm_count()];
    let tie = premium_mc(
        &zero,
        model,
        replicas,
        crate::rng::SeedSpec::with(root_seed, u64::MAX, 0, 0),
    )?;
    Ok(PremiumEstimate {
        value: horizon as f64 * tie.value,
        std_error: horizon as f64 * tie.std_error,
        replicas: tie.replicas,
        estimator: tie.estimator,
    })
}

/// One grid cell of an envelope sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundCell {
    pub family: Family,
    pub arm_count: usize,
    pub horizon: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub envelope: f64,
    pub crude_bound: f64,
    pub crude_bound_se: f64,
    /// envelope - empirical
    pub margin: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub cells: Vec<BoundCell>,
}

/// Empirical expected maxima against the sub-Gaussian envelope over a
/// (family, K, n) grid. One ensemble per (family, K) pair serves every n in
/// the grid via running checkpoints.
pub fn envelope_sweep(
    n_grid: &[usize],
    k_grid: &[usize],
    families: &[Family],
    paths: usize,
    root_seed: u64,
    crude_replicas: usize,
) -> Result<BoundReport> {
    if n_grid.is_empty() || k_grid.is_empty() || families.is_empty() {
        return Err(Error::InvalidConfig("sweep grids must be nonempty".into()));
    }
    if paths < 2 {
        return Err(Error::InvalidConfig("paths must be at least 2".into()));
    }
    let mut checkpoints: Vec<usize> = n_grid.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints[0] < 1 {
        return Err(Error::InvalidConfig("horizons must be at least 1".into()));
    }

    let mut cells = Vec::new();
    for &family in families {
        for &k in k_grid {
            if k < 1 {
                return Err(Error::InvalidConfig("arm counts must be at least 1".into()));
            }
            let model = IncrementModel::iid(family, k, 1.0)?;
            let lambda_max = model.covariance_lambda_max();
            let stats = max_at_checkpoints(&model, &checkpoints, paths, root_seed);
            let crude_tie = premium_mc(
                &vec![0.0; k],
                &model,
                crude_replicas,
                crate::rng::SeedSpec::with(root_seed, u64::MAX, k as u64, 0),
            )?;
            for (idx, &n) in checkpoints.iter().enumerate() {
                cells.push(BoundCell {
                    family,
                    arm_count: k,
                    horizon: n,
                    empirical: stats.mean[idx],
                    std_error: (stats.var[idx] / paths as f64).sqrt(),
                    envelope: subgaussian_envelope(n, k, lambda_max),
                    crude_bound: n as f64 * crude_tie.value,
                    crude_bound_se: n as f64 * crude_tie.std_error,
                    margin: subgaussian_envelope(n, k, lambda_max) - stats.mean[idx],
                });
            }
        }
    }
    Ok(BoundReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::Correlation;
    use crate::premium::g_normal;

    fn rademacher2(horizon: usize, paths: usize, seed: u64) -> EnsembleConfig {
        EnsembleConfig::new(
            IncrementModel::iid(Family::Rademacher, 2, 1.0).unwrap(),
            horizon,
            paths,
            seed,
        )
    }

    #[test]
    fn single_arm_max_is_centered() {
        let config = EnsembleConfig::new(
            IncrementModel::iid(Family::UniformCentered, 1, 1.0).unwrap(),
            20,
            20_000,
            9,
        );
        let summary = simulate_ensemble(&config).unwrap();
        for i in 0..20 {
            let se = (summary.max_var[i] / 20_000.0).sqrt();
            assert!(summary.max_mean[i].abs() <= 3.0 * se, "step {}", i + 1);
        }
    }

    #[test]
    fn rademacher_two_step_enumeration() {
        // M2 over two independent sign walks: P(-2) = 1/16, P(0) = 1/2,
        // P(2) = 7/16, so E[M2] = 0.75
        let summary = simulate_ensemble(&rademacher2(2, 200_000, 12)).unwrap();
        let se = (summary.max_var[1] / 200_000.0).sqrt();
        assert!((summary.max_mean[1] - 0.75).abs() <= 3.0 * se);
    }

    #[test]
    fn rademacher_per_step_premiums() {
        // step premiums (0.5, 0.25) by 16-outcome enumeration
        let report = premium_profile(&rademacher2(2, 200_000, 13), &[]).unwrap();
        assert!((report.premium[0] - 0.5).abs() <= 3.0 * report.premium_se[0]);
        assert!((report.premium[1] - 0.25).abs() <= 3.0 * report.premium_se[1]);
    }

    #[test]
    fn rademacher_single_step_expected_max() {
        let est = expected_max(&rademacher2(1, 100_000, 14)).unwrap();
        assert!((est.value - 0.5).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn telescoping_identity_exact() {
        let report = premium_profile(&rademacher2(10, 5_000, 15), &[]).unwrap();
        let mut acc = 0.0;
        for i in 0..10 {
            acc += report.premium[i];
            assert_eq!(acc, report.expected_max[i]);
        }
    }

    #[test]
    fn gaussian_sqrt_n_scaling() {
        // expected_max(n) / sqrt(n) constant across n
        let model = IncrementModel::iid(Family::Gaussian, 3, 1.0).unwrap();
        let mut ratios = Vec::new();
        for &n in &[25usize, 100, 400] {
            let est = expected_max(&EnsembleConfig::new(model.clone(), n, 40_000, 16)).unwrap();
            ratios.push((est.value / (n as f64).sqrt(), est.std_error / (n as f64).sqrt()));
        }
        for w in ratios.windows(2) {
            let (a, sa) = w[0];
            let (b, sb) = w[1];
            assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt());
        }
    }

    #[test]
    fn nested_agrees_with_telescoping_rademacher() {
        let config = rademacher2(2, 30_000, 17).with_nested(400);
        let report = nested_premium(&config, &[]).unwrap();
        let nested = report.nested.as_ref().unwrap();
        let nested_se = report.nested_se.as_ref().unwrap();
        for i in 0..2 {
            let combined =
                (report.premium_se[i].powi(2) + nested_se[i].powi(2)).sqrt();
            assert!(
                (report.premium[i] - nested[i]).abs() <= 3.0 * combined,
                "step {}: telescoping {} nested {}",
                i + 1,
                report.premium[i],
                nested[i]
            );
        }
        assert!((nested[1] - 0.25).abs() <= 3.0 * nested_se[1]);
    }

    #[test]
    fn nested_requires_budget() {
        assert!(nested_premium(&rademacher2(2, 100, 1), &[]).is_err());
        assert!(simulate_ensemble(&rademacher2(2, 100, 1).with_nested(10)).is_err());
    }

    #[test]
    fn normalized_profile_starts_at_one() {
        let model = IncrementModel::iid(Family::Gaussian, 5, 1.0).unwrap();
        let report =
            premium_profile(&EnsembleConfig::new(model, 30, 50_000, 18), &[0.5]).unwrap();
        let profile = report.normalized.as_ref().unwrap();
        assert_eq!(profile.psi[0], 1.0);
        assert_eq!(profile.psi_se[0], 0.0);
    }

    #[test]
    fn normalized_profile_rejects_single_arm() {
        let model = IncrementModel::iid(Family::Gaussian, 1, 1.0).unwrap();
        let report = premium_profile(&EnsembleConfig::new(model, 10, 5_000, 19), &[]).unwrap();
        assert!(normalized_profile(&report).is_err());
    }

    #[test]
    fn analytic_decay_times() {
        assert_eq!(
            decay_time(PsiSource::AnalyticGaussian, 0.1).unwrap(),
            Some(26)
        );
        assert_eq!(
            decay_time(PsiSource::AnalyticGaussian, 1.0).unwrap(),
            Some(2)
        );
        assert_eq!(
            decay_time(PsiSource::AnalyticGaussian, 0.05).unwrap(),
            Some(101)
        );
        assert!(decay_time(PsiSource::AnalyticGaussian, 0.0).is_err());
        assert!(decay_time(PsiSource::AnalyticGaussian, 1.5).is_err());
    }

    #[test]
    fn concentration_alpha_one_is_exactly_one() {
        let model = IncrementModel::iid(Family::UniformCentered, 4, 1.0).unwrap();
        let config = EnsembleConfig::new(model, 50, 4_000, 20);
        let ratios = bias_concentration(&config, &[1.0]).unwrap();
        assert_eq!(ratios[0].ratio, 1.0);
        assert_eq!(ratios[0].std_error, 0.0);
    }

    #[test]
    fn concentration_rejects_bad_alpha() {
        let model = IncrementModel::iid(Family::UniformCentered, 2, 1.0).unwrap();
        let config = EnsembleConfig::new(model, 50, 1_000, 21);
        assert!(bias_concentration(&config, &[0.0]).is_err());
        assert!(bias_concentration(&config, &[1.5]).is_err());
        assert!(bias_concentration(&config, &[0.001]).is_err()); // empty window
    }

    #[test]
    fn envelope_values() {
        assert_eq!(subgaussian_envelope(100, 1, 1.0), 0.0);
        assert!((subgaussian_envelope(500, 50, 1.0) - (1000.0 * 50.0_f64.ln()).sqrt()).abs() < 1e-12);
        assert!((subgaussian_envelope(100, 2, 2.0) - (400.0 * 2.0_f64.ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn crude_bound_dominates_expected_max() {
        let model = IncrementModel::iid(Family::Rademacher, 2, 1.0).unwrap();
        let crude = crude_upper_bound(20, &model, 100_000, 22).unwrap();
        assert!((crude.value - 20.0 * 0.5).abs() <= 3.0 * crude.std_error);
        let est = expected_max(&EnsembleConfig::new(model, 20, 50_000, 22)).unwrap();
        let combined = (crude.std_error.powi(2) + est.std_error.powi(2)).sqrt();
        assert!(est.value <= crude.value + 3.0 * combined);
    }

    #[test]
    fn gaussian_premium_matches_sqrt_decay() {
        let g3 = g_normal(3, 1e-9).unwrap().value;
        let model = IncrementModel::iid(Family::Gaussian, 3, 1.0).unwrap();
        let report =
            premium_profile(&EnsembleConfig::new(model, 40, 100_000, 23), &[]).unwrap();
        for i in 1..=40usize {
            let expected = g3 * ((i as f64).sqrt() - ((i - 1) as f64).sqrt());
            assert!(
                (report.premium[i - 1] - expected).abs() <= 4.0 * report.premium_se[i - 1],
                "step {i}: {} vs {expected}",
                report.premium[i - 1]
            );
        }
    }

    #[test]
    fn exchangeable_gaussian_profile_is_covariance_free() {
        // psi is sqrt(i) - sqrt(i-1) regardless of rho
        let model = IncrementModel::exchangeable(Family::Gaussian, 4, 1.0, 0.5).unwrap();
        let report =
            premium_profile(&EnsembleConfig::new(model, 25, 100_000, 24), &[]).unwrap();
        let profile = report.normalized.unwrap();
        for i in 2..=25usize {
            let expected = (i as f64).sqrt() - ((i - 1) as f64).sqrt();
            assert!(
                (profile.psi[i - 1] - expected).abs() <= 4.0 * profile.psi_se[i - 1].max(1e-9),
                "step {i}"
            );
        }
    }

    #[test]
    fn correlated_columns_reduce_the_premium() {
        let indep = IncrementModel::iid(Family::Gaussian, 2, 1.0).unwrap();
        let correlated =
            IncrementModel::new(Family::Gaussian, vec![1.0, 1.0], Correlation::Exchangeable(0.9))
                .unwrap();
        let a = expected_max(&EnsembleConfig::new(indep, 30, 30_000, 25)).unwrap();
        let b = expected_max(&EnsembleConfig::new(correlated, 30, 30_000, 25)).unwrap();
        assert!(b.value < a.value);
    }
}
