//! Stopping-time extension of the per-step accounting, the Wald reduction
//! at K = 1, and an exact lattice oracle for Rademacher arms.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::increments::IncrementModel;
use crate::premium::{mean_se, premium_enumerate_rademacher, premium_replica_sums};
use crate::rng::StepKey;

/// Adapted stopping rules. Every rule carries a hard cap so the expected
/// stopping time is certifiably finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop at a fixed horizon.
    Fixed(usize),
    /// Stop at the first step where the running maximum reaches `c`,
    /// else at `cap`.
    Threshold { c: f64, cap: usize },
    /// Stop once the leader's margin over the runner-up reaches `gamma`,
    /// else at `cap`.
    LeaderGap { gamma: f64, cap: usize },
}

impl StoppingRule {
    pub fn cap(&self) -> usize {
        match *self {
            StoppingRule::Fixed(n) => n,
            StoppingRule::Threshold { cap, .. } => cap,
            StoppingRule::LeaderGap { cap, .. } => cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap() == 0 {
            return Err(Error::InvalidConfig(
                "stopping rules require a positive cap".into(),
            ));
        }
        Ok(())
    }

    /// Stop/continue decision after observing the walk prefix up to `step`.
    /// Receives only the current state, so the rule is adapted by
    /// construction.
    pub fn should_stop(&self, step: usize, state: &[f64]) -> bool {
        if step >= self.cap() {
            return true;
        }
        match *self {
            StoppingRule::Fixed(_) => false,
            StoppingRule::Threshold { c, .. } => {
                state.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= c
            }
            StoppingRule::LeaderGap { gamma, .. } => {
                let mut best = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                for &s in state {
                    if s > best {
                        second = best;
                        best = s;
                    } else if s > second {
                        second = s;
                    }
                }
                // a single arm always leads by an unbounded margin
                second == f64::NEG_INFINITY || best - second >= gamma
            }
        }
    }
}

/// Both sides of the stopped identity estimated on common outer paths.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StoppedSummary {
    pub paths: usize,
    pub mean_stop_time: f64,
    pub stop_time_se: f64,
    /// E[M_T], the stopped maximum (left side).
    pub stopped_max: f64,
    pub stopped_max_se: f64,
    /// Sum over steps of the truncated premiums (right side).
    pub rhs_total: f64,
    pub rhs_total_se: f64,
    /// Per-step truncated premium estimates E[premium(S_{i-1}) 1{T >= i}].
    pub rhs_terms: Vec<f64>,
    pub rhs_terms_se: Vec<f64>,
}

struct StoppedAcc {
    sum_t: f64,
    sum_t2: f64,
    sum_m: f64,
    sum_m2: f64,
    sum_rhs: f64,
    sum_rhs2: f64,
    term_sum: Vec<f64>,
    term_sum2: Vec<f64>,
}

impl StoppedAcc {
    fn new(cap: usize) -> Self {
        StoppedAcc {
            sum_t: 0.0,
            sum_t2: 0.0,
            sum_m: 0.0,
            sum_m2: 0.0,
            sum_rhs: 0.0,
            sum_rhs2: 0.0,
            term_sum: vec![0.0; cap],
            term_sum2: vec![0.0; cap],
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.sum_t += o.sum_t;
        self.sum_t2 += o.sum_t2;
        self.sum_m += o.sum_m;
        self.sum_m2 += o.sum_m2;
        self.sum_rhs += o.sum_rhs;
        self.sum_rhs2 += o.sum_rhs2;
        for (a, b) in self.term_sum.iter_mut().zip(&o.term_sum) {
            *a += b;
        }
        for (a, b) in self.term_sum2.iter_mut().zip(&o.term_sum2) {
            *a += b;
        }
        self
    }
}

/// Estimate E[M_T] and the truncated premium series on common outer paths.
/// The inner conditional estimates draw fresh increments (replica stream 1)
/// independent of the path's own step increment (replica stream 0).
pub fn simulate_stopped(
    model: &IncrementModel,
    rule: StoppingRule,
    paths: usize,
    root_seed: u64,
    inner_replicas: usize,
) -> Result<StoppedSummary> {
    rule.validate()?;
    if paths < 2 {
        return Err(Error::InvalidConfig("paths must be at least 2".into()));
    }
    if inner_replicas < 100 {
        return Err(Error::InvalidConfig(
            "the truncated premium series requires at least 100 inner replicas".into(),
        ));
    }
    let cap = rule.cap();
    let k = model.arm_count();

    let acc = crate::ensemble::fold_blocks(
        paths,
        |range| {
            let mut acc = StoppedAcc::new(cap);
            let mut state = vec![0.0_f64; k];
            let mut buf = vec![0.0_f64; k];
            let mut centered = vec![0.0_f64; k];
            for path in range {
                state.iter_mut().for_each(|s| *s = 0.0);
                let mut rhs_path = 0.0;
                let mut stopped_max = 0.0;
                for i in 1..=cap {
                    // T >= i here: the rule has not stopped on any prefix
                    let key = StepKey::new(root_seed, path as u64, i as u64);
                    let top = state.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    for (c, s) in centered.iter_mut().zip(&state) {
                        *c = s - top;
                    }
                    let mut inner_rng = key.replica(1);
                    let (sum, _) =
                        premium_replica_sums(&centered, model, inner_replicas, &mut inner_rng);
                    let est = sum / inner_replicas as f64;
                    rhs_path += est;
                    acc.term_sum[i - 1] += est;
                    acc.term_sum2[i - 1] += est * est;

                    let mut rng = key.replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    let mut m = f64::NEG_INFINITY;
                    for (s, &y) in state.iter_mut().zip(buf.iter()) {
                        *s += y;
                        if *s > m {
                            m = *s;
                        }
                    }
                    if rule.should_stop(i, &state) {
                        acc.sum_t += i as f64;
                        acc.sum_t2 += (i * i) as f64;
                        stopped_max = m;
                        break;
                    }
                    stopped_max = m;
                }
                acc.sum_m += stopped_max;
                acc.sum_m2 += stopped_max * stopped_max;
                acc.sum_rhs += rhs_path;
                acc.sum_rhs2 += rhs_path * rhs_path;
            }
            acc
        },
        StoppedAcc::merge,
    );

    let (mean_stop_time, stop_time_se) = mean_se(acc.sum_t, acc.sum_t2, paths);
    let (stopped_max, stopped_max_se) = mean_se(acc.sum_m, acc.sum_m2, paths);
    let (rhs_total, rhs_total_se) = mean_se(acc.sum_rhs, acc.sum_rhs2, paths);
    let p = paths as f64;
    let rhs_terms: Vec<f64> = acc.term_sum.iter().map(|s| s / p).collect();
    let rhs_terms_se: Vec<f64> = acc
        .term_sum
        .iter()
        .zip(&acc.term_sum2)
        .map(|(s, s2)| (((s2 - s * s / p) / (p - 1.0)).max(0.0) / p).sqrt())
        .collect();
    Ok(StoppedSummary {
        paths,
        mean_stop_time,
        stop_time_se,
        stopped_max,
        stopped_max_se,
        rhs_total,
        rhs_total_se,
        rhs_terms,
        rhs_terms_se,
    })
}

/// Per-path stopping times and stopped maxima (no inner estimation).
pub fn stopped_paths(
    model: &IncrementModel,
    rule: StoppingRule,
    paths: usize,
    root_seed: u64,
) -> Result<Vec<(usize, f64)>> {
    rule.validate()?;
    let cap = rule.cap();
    let k = model.arm_count();
    let mut out = Vec::with_capacity(paths);
    let mut state = vec![0.0_f64; k];
    let mut buf = vec![0.0_f64; k];
    for path in 0..paths {
        state.iter_mut().for_each(|s| *s = 0.0);
        let mut last = (cap, 0.0);
        for i in 1..=cap {
            let mut rng = StepKey::new(root_seed, path as u64, i as u64).replica(0);
            model.fill_increments(&mut rng, &mut buf);
            let mut m = f64::NEG_INFINITY;
            for (s, &y) in state.iter_mut().zip(buf.iter()) {
                *s += y;
                if *s > m {
                    m = *s;
                }
            }
            last = (i, m);
            if rule.should_stop(i, &state) {
                break;
            }
        }
        out.push(last);
    }
    Ok(out)
}

/// Both sides of the Wald comparison for a single drifted walk.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WaldCheck {
    pub paths: usize,
    /// Estimate of E[S_T] for the uncentered walk.
    pub stopped_sum: f64,
    pub stopped_sum_se: f64,
    /// mu times the estimate of E[T].
    pub drift_times_mean_t: f64,
    pub mean_stop_time: f64,
    /// Paired difference S_T - mu T across paths, with its standard error.
    pub difference: f64,
    pub difference_se: f64,
}

/// Check E[S_T] = mu E[T] for a single walk with drifted increments
/// Y + mu. The stopping rule is applied to the uncentered walk.
pub fn wald_check(
    mu: f64,
    rule: StoppingRule,
    model: &IncrementModel,
    paths: usize,
    root_seed: u64,
) -> Result<WaldCheck> {
    rule.validate()?;
    if model.arm_count() != 1 {
        return Err(Error::InvalidConfig(
            "the Wald reduction applies to a single walk (K = 1)".into(),
        ));
    }
    if paths < 2 {
        return Err(Error::InvalidConfig("paths must be at least 2".into()));
    }
    let cap = rule.cap();

    struct Acc {
        sum_s: f64,
        sum_s2: f64,
        sum_t: f64,
        sum_d: f64,
        sum_d2: f64,
    }
    let acc = crate::ensemble::fold_blocks(
        paths,
        |range| {
            let mut acc = Acc {
                sum_s: 0.0,
                sum_s2: 0.0,
                sum_t: 0.0,
                sum_d: 0.0,
                sum_d2: 0.0,
            };
            let mut buf = [0.0_f64; 1];
            for path in range {
                let mut s = 0.0_f64;
                let mut t = cap;
                for i in 1..=cap {
                    let mut rng = StepKey::new(root_seed, path as u64, i as u64).replica(0);
                    model.fill_increments(&mut rng, &mut buf);
                    s += buf[0] + mu;
                    if rule.should_stop(i, &[s]) {
                        t = i;
                        break;
                    }
                }
                let d = s - mu * t as f64;
                acc.sum_s += s;
                acc.sum_s2 += s * s;
                acc.sum_t += t as f64;
                acc.sum_d += d;
                acc.sum_d2 += d * d;
            }
            acc
        },
        |mut a, b| {
            a.sum_s += b.sum_s;
            a.sum_s2 += b.sum_s2;
            a.sum_t += b.sum_t;
            a.sum_d += b.sum_d;
            a.sum_d2 += b.sum_d2;
            a
        },
    );

    let (stopped_sum, stopped_sum_se) = mean_se(acc.sum_s, acc.sum_s2, paths);
    let mean_stop_time = acc.sum_t / paths as f64;
    let (difference, difference_se) = mean_se(acc.sum_d, acc.sum_d2, paths);
    Ok(WaldCheck {
        paths,
        stopped_sum,
        stopped_sum_se,
        drift_times_mean_t: mu * mean_stop_time,
        mean_stop_time,
        difference,
        difference_se,
    })
}

/// Exact stopped-identity values from full lattice enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactStopped {
    /// E[M_T] from the stopped-state distribution.
    pub stopped_max: f64,
    /// Sum of exact truncated premiums.
    pub rhs_total: f64,
    pub mean_stop_time: f64,
}

/// Exact dynamic program over the +/-1 lattice for independent unit
/// Rademacher arms, K <= 2 and cap <= 20. The left side integrates the
/// stopped-state distribution; the right side sums exact premiums over the
/// running-state distribution, so agreement of the two is a machine-precision
/// check of the stopped identity.
pub fn exact_stopped_rademacher(
    arm_count: usize,
    rule: StoppingRule,
) -> Result<ExactStopped> {
    rule.validate()?;
    if !(1..=2).contains(&arm_count) {
        return Err(Error::InvalidConfig(
            "the exact oracle supports K in {1, 2}".into(),
        ));
    }
    if rule.cap() > 20 {
        return Err(Error::InvalidConfig(
            "the exact oracle supports cap <= 20".into(),
        ));
    }
    let cap = rule.cap();
    let scales = vec![1.0; arm_count];
    let mut running: HashMap<(i32, i32), f64> = HashMap::new();
    running.insert((0, 0), 1.0);
    let mut stopped_max = 0.0;
    let mut rhs_total = 0.0;
    let mut mean_stop_time = 0.0;

    for i in 1..=cap {
        // truncated premium at step i over the still-running mass
        for (&(a, b), &mass) in &running {
            let u: Vec<f64> = if arm_count == 1 {
                vec![a as f64]
            } else {
                vec![a as f64, b as f64]
            };
            rhs_total += mass * premium_enumerate_rademacher(&u, &scales)?;
        }
        // evolve one step
        let mut next: HashMap<(i32, i32), f64> = HashMap::with_capacity(running.len() * 4);
        for (&(a, b), &mass) in &running {
            if arm_count == 1 {
                *next.entry((a + 1, 0)).or_insert(0.0) += mass / 2.0;
                *next.entry((a - 1, 0)).or_insert(0.0) += mass / 2.0;
            } else {
                for (da, db) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    *next.entry((a + da, b + db)).or_insert(0.0) += mass / 4.0;
                }
            }
        }
        // split stopped mass out
        running.clear();
        for ((a, b), mass) in next {
            let state: Vec<f64> = if arm_count == 1 {
                vec![a as f64]
            } else {
                vec![a as f64, b as f64]
            };
            let m = state.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if rule.should_stop(i, &state) {
                stopped_max += mass * m;
                mean_stop_time += mass * i as f64;
            } else {
                *running.entry((a, b)).or_insert(0.0) += mass;
            }
        }
        if running.is_empty() {
            break;
        }
    }
    Ok(ExactStopped {
        stopped_max,
        rhs_total,
        mean_stop_time,
    })
}
