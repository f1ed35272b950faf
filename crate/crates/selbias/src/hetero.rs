//! Winner's curse under unequal arm means: drift/residual split of the
//! selected maximum, drifted per-step premiums, and per-observation optimism.

use crate::ensemble::{fold_blocks, EnsembleConfig};
use crate::error::{Error, Result};
use crate::premium::{mean_se, premium_replica_sums};
use crate::rng::StepKey;

/// Per-arm means with the derived quantities the drift/residual split needs.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeanVector {
    means: Vec<f64>,
    best_index: usize,
    /// Nonnegative gaps to the best mean.
    gaps: Vec<f64>,
    unique_best: bool,
}

impl MeanVector {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidConfig("means must be nonempty".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("means must be finite".into()));
        }
        let mut best_index = 0;
        for (k, &m) in means.iter().enumerate() {
            if m > means[best_index] {
                best_index = k;
            }
        }
        let best = means[best_index];
        let gaps: Vec<f64> = means.iter().map(|&m| best - m).collect();
        let unique_best = gaps.iter().filter(|&&g| g == 0.0).count() == 1;
        Ok(MeanVector {
            means,
            best_index,
            gaps,
            unique_best,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Index of the best mean (lowest index on ties).
    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn unique_best(&self) -> bool {
        self.unique_best
    }
}

/// Winner's-curse report on common paths: the selected maximum split into the
/// deterministic drift term and the residual selection effect, the drifted
/// per-step premiums that telescope to the residual, and the optimism of the
/// selected arm's sample mean.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurseReport {
    pub horizon: usize,
    pub paths: usize,
    pub means: MeanVector,
    /// n times the best mean.
    pub drift_term: f64,
    /// E[max_k R_{n,k}] where R subtracts each arm's gap per step.
    pub residual_max: f64,
    pub residual_max_se: f64,
    /// drift_term + residual_max; the split is an exact shift per path.
    pub uncentered_max: f64,
    /// Telescoping estimates of the gap-drifted per-step premiums.
    pub drifted_premium: Vec<f64>,
    pub drifted_premium_se: Vec<f64>,
    /// Nested conditional estimates, when inner replicas were requested.
    pub nested: Option<Vec<f64>>,
    pub nested_se: Option<Vec<f64>>,
    /// Cumulative sums of `drifted_premium`.
    pub residual_max_curve: Vec<f64>,
    /// E[S_bar_{n, selected} - mu_selected]: optimism of the reported score.
    pub optimism: f64,
    pub optimism_se: f64,
    /// How often each arm ends up selected.
    pub selected_frequency: Vec<f64>,
}

struct CurseAcc {
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
    sum_nested: Vec<f64>,
    sum_nested2: Vec<f64>,
    sum_r: f64,
    sum_r2: f64,
    sum_opt: f64,
    sum_opt2: f64,
    selected: Vec<u64>,
}

impl CurseAcc {
    fn new(n: usize, k: usize, nested: bool) -> Self {
        let nested_len = if nested { n } else { 0 };
        CurseAcc {
            sum_d: vec![0.0; n],
            sum_d2: vec![0.0; n],
            sum_nested: vec![0.0; nested_len],
            sum_nested2: vec![0.0; nested_len],
            sum_r: 0.0,
            sum_r2: 0.0,
            sum_opt: 0.0,
            sum_opt2: 0.0,
            selected: vec![0; k],
        }
    }

    fn merge(mut self, o: Self) -> Self {
        for (a, b) in self.sum_d.iter_mut().zip(&o.sum_d) {
            *a += b;
        }
        for (a, b) in self.sum_d2.iter_mut().zip(&o.sum_d2) {
            *a += b;
        }
        for (a, b) in self.sum_nested.iter_mut().zip(&o.sum_nested) {
            *a += b;
        }
        for (a, b) in self.sum_nested2.iter_mut().zip(&o.sum_nested2) {
            *a += b;
        }
        self.sum_r += o.sum_r;
        self.sum_r2 += o.sum_r2;
        self.sum_opt += o.sum_opt;
        self.sum_opt2 += o.sum_opt2;
        for (a, b) in self.selected.iter_mut().zip(&o.selected) {
            *a += b;
        }
        self
    }
}

/// Simulate the winner's curse for the model in `config` with per-arm means
/// added on top of the centered increments.
pub fn winners_curse(config: &EnsembleConfig, means: &MeanVector) -> Result<CurseReport> {
    config.validate()?;
    let k = config.model.arm_count();
    if means.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "model has {k} arms but {} means were given",
            means.len()
        )));
    }
    let n = config.horizon;
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
    let gaps = means.gaps();
    let mu = means.means();
    let nf = n as f64;

    let acc = fold_blocks(
        config.paths,
        |range| {
            let mut acc = CurseAcc::new(n, k, nested.is_some());
            let mut resid = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            let mut shifted = vec![0.0_f64; k];
            for path in range {
                resid.iter_mut().for_each(|s| *s = 0.0);
                let mut prev_max = 0.0_f64;
                for i in 1..=n {
                    let key = StepKey::new(root, path as u64, i as u64);
                    if let Some(inner) = nested {
                        // gap-drifted premium at the current residual state:
                        // center on the leader, then shift each arm down by
                        // its gap so the inner draw sees the drifted arms
                        let top = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        for ((c, s), &g) in shifted.iter_mut().zip(&resid).zip(gaps) {
                            *c = s - top - g;
                        }
                        let mut inner_rng = key.replica(1);
                        let (sum, _) =
                            premium_replica_sums(&shifted, model, inner, &mut inner_rng);
                        let est = sum / inner as f64;
                        acc.sum_nested[i - 1] += est;
                        acc.sum_nested2[i - 1] += est * est;
                    }
                    let mut rng = key.replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    let mut m = f64::NEG_INFINITY;
                    for ((s, &y), &g) in resid.iter_mut().zip(buf.iter()).zip(gaps) {
                        *s += y - g;
                        if *s > m {
                            m = *s;
                        }
                    }
                    let d = m - prev_max;
                    acc.sum_d[i - 1] += d;
                    acc.sum_d2[i - 1] += d * d;
                    prev_max = m;
                }
                acc.sum_r += prev_max;
                acc.sum_r2 += prev_max * prev_max;
                // selection happens on the uncentered sums; recover them from
                // the residuals by undoing the gap drift
                let mut best = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                for (idx, (&r, &g)) in resid.iter().zip(gaps).enumerate() {
                    // r + n*g recovers the centered walk; adding n*mu gives
                    // the uncentered sum
                    let val = r + nf * g + nf * mu[idx];
                    if val > best_val {
                        best_val = val;
                        best = idx;
                    }
                }
                acc.selected[best] += 1;
                // optimism: centered walk of the selected arm, per observation
                let centered_selected = resid[best] + nf * gaps[best];
                let opt = centered_selected / nf;
                acc.sum_opt += opt;
                acc.sum_opt2 += opt * opt;
            }
            acc
        },
        CurseAcc::merge,
    );

    let paths = config.paths;
    let p = paths as f64;
    let (residual_max, residual_max_se) = mean_se(acc.sum_r, acc.sum_r2, paths);
    let (optimism, optimism_se) = mean_se(acc.sum_opt, acc.sum_opt2, paths);
    let series = |sum: &[f64], sum2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mean: Vec<f64> = sum.iter().map(|s| s / p).collect();
        let se: Vec<f64> = sum
            .iter()
            .zip(sum2)
            .map(|(s, s2)| (((s2 - s * s / p) / (p - 1.0)).max(0.0) / p).sqrt())
            .collect();
        (mean, se)
    };
    let (drifted_premium, drifted_premium_se) = series(&acc.sum_d, &acc.sum_d2);
    let (nested_mean, nested_se) = if nested.is_some() {
        let (m, s) = series(&acc.sum_nested, &acc.sum_nested2);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let mut residual_max_curve = Vec::with_capacity(n);
    let mut running = 0.0;
    for &d in &drifted_premium {
        running += d;
        residual_max_curve.push(running);
    }
    let drift_term = nf * mu[means.best_index()];
    Ok(CurseReport {
        horizon: n,
        paths,
        means: means.clone(),
        drift_term,
        residual_max,
        residual_max_se,
        uncentered_max: drift_term + residual_max,
        drifted_premium,
        drifted_premium_se,
        nested: nested_mean,
        nested_se,
        residual_max_curve,
        optimism,
        optimism_se,
        selected_frequency: acc.selected.iter().map(|&c| c as f64 / p).collect(),
    })
}

/// Path-wise bound check: the gap-drifted residual maximum never exceeds the
/// equal-means maximum on the same draws.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HeteroBounds {
    pub paths: usize,
    /// Paths where max R exceeded max S; zero when the bound holds.
    pub upper_violations: usize,
    pub residual_mean: f64,
    pub residual_se: f64,
    pub equal_means_mean: f64,
    pub equal_means_se: f64,
}

/// Compare max_k R_{n,k} against max_k S_{n,k} on common random numbers.
pub fn hetero_bounds_check(config: &EnsembleConfig, means: &MeanVector) -> Result<HeteroBounds> {
    config.validate()?;
    let k = config.model.arm_count();
    if means.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "model has {k} arms but {} means were given",
            means.len()
        )));
    }
    let n = config.horizon;
    let model = &config.model;
    let root = config.root_seed;
    let gaps = means.gaps();

    struct Acc {
        violations: usize,
        sum_r: f64,
        sum_r2: f64,
        sum_s: f64,
        sum_s2: f64,
    }
    let acc = fold_blocks(
        config.paths,
        |range| {
            let mut acc = Acc {
                violations: 0,
                sum_r: 0.0,
                sum_r2: 0.0,
                sum_s: 0.0,
                sum_s2: 0.0,
            };
            let mut state = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            for path in range {
                state.iter_mut().for_each(|s| *s = 0.0);
                for i in 1..=n {
                    let mut rng = StepKey::new(root, path as u64, i as u64).replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    for (s, &y) in state.iter_mut().zip(buf.iter()) {
                        *s += y;
                    }
                }
                let mut max_s = f64::NEG_INFINITY;
                let mut max_r = f64::NEG_INFINITY;
                for (&s, &g) in state.iter().zip(gaps) {
                    max_s = max_s.max(s);
                    max_r = max_r.max(s - n as f64 * g);
                }
                if max_r > max_s {
                    acc.violations += 1;
                }
                acc.sum_r += max_r;
                acc.sum_r2 += max_r * max_r;
                acc.sum_s += max_s;
                acc.sum_s2 += max_s * max_s;
            }
            acc
        },
        |mut a, b| {
            a.violations += b.violations;
            a.sum_r += b.sum_r;
            a.sum_r2 += b.sum_r2;
            a.sum_s += b.sum_s;
            a.sum_s2 += b.sum_s2;
            a
        },
    );
    let (residual_mean, residual_se) = mean_se(acc.sum_r, acc.sum_r2, config.paths);
    let (equal_means_mean, equal_means_se) = mean_se(acc.sum_s, acc.sum_s2, config.paths);
    Ok(HeteroBounds {
        paths: config.paths,
        upper_violations: acc.violations,
        residual_mean,
        residual_se,
        equal_means_mean,
        equal_means_se,
    })
}

/// One point of the per-observation selection premium curve.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CurvePoint {
    pub horizon: usize,
    pub value: f64,
    pub std_error: f64,
}

/// E[max_k R_{n,k}] / n over a grid of horizons on one growing ensemble.
/// Requires a unique best mean; with ties the curve does not vanish and the
/// per-observation reading is misleading, so the call is refused.
pub fn per_observation_premium_curve(
    model: &crate::increments::IncrementModel,
    means: &MeanVector,
    n_grid: &[usize],
    paths: usize,
    root_seed: u64,
) -> Result<Vec<CurvePoint>> {
    if !means.unique_best() {
        return Err(Error::InvalidConfig(
            "the per-observation premium curve requires a unique best mean".into(),
        ));
    }
    let k = model.arm_count();
    if means.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "model has {k} arms but {} means were given",
            means.len()
        )));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidConfig(
            "the horizon grid must be positive and strictly increasing".into(),
        ));
    }
    if paths < 2 {
        return Err(Error::InvalidConfig("paths must be at least 2".into()));
    }
    let n_max = *n_grid.last().unwrap();
    let gaps = means.gaps();

    let acc = fold_blocks(
        paths,
        |range| {
            let mut sum = vec![0.0_f64; n_grid.len()];
            let mut sum2 = vec![0.0_f64; n_grid.len()];
            let mut resid = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            for path in range {
                resid.iter_mut().for_each(|s| *s = 0.0);
                let mut next = 0usize;
                for i in 1..=n_max {
                    let mut rng = StepKey::new(root_seed, path as u64, i as u64).replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    for ((s, &y), &g) in resid.iter_mut().zip(buf.iter()).zip(gaps) {
                        *s += y - g;
                    }
                    if i == n_grid[next] {
                        let m = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let v = m / i as f64;
                        sum[next] += v;
                        sum2[next] += v * v;
                        next += 1;
                        if next == n_grid.len() {
                            break;
                        }
                    }
                }
            }
            (sum, sum2)
        },
        |(mut a, mut a2), (b, b2)| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            for (x, y) in a2.iter_mut().zip(&b2) {
                *x += y;
            }
            (a, a2)
        },
    );

    Ok(n_grid
        .iter()
        .zip(acc.0.iter().zip(&acc.1))
        .map(|(&n, (&s, &s2))| {
            let (value, std_error) = mean_se(s, s2, paths);
            CurvePoint {
                horizon: n,
                value,
                std_error,
            }
        })
        .collect())
}
