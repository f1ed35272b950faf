//! The selection premium: expected gain from picking the best arm after one
//! more shared observation versus committing to the current leader.
//!
//! Three estimators: plain Monte Carlo for any model, Clark's closed form
//! for the bivariate Gaussian maximum, and adaptive quadrature for the
//! i.i.d. standard normal constant E[max of K normals].

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::increments::{cholesky_factor_flat, Correlation, Family, IncrementModel};
use crate::quadrature::integrate;
use crate::rng::{CounterRng, SeedSpec};

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mc,
    ExactClark,
    Quadrature,
}

/// A premium (or Gaussian max constant) value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PremiumEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub estimator: Estimator,
}

impl PremiumEstimate {
    pub fn exact(value: f64, estimator: Estimator) -> Self {
        PremiumEstimate {
            value,
            std_error: 0.0,
            replicas: 0,
            estimator,
        }
    }
}

/// Center a state so its maximum entry is exactly 0. Premium values computed
/// from the centered state are translation invariant bit for bit.
pub(crate) fn center_state(u: &[f64]) -> Vec<f64> {
    let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    u.iter().map(|&x| x - m).collect()
}

/// Sum and sum of squares of per-replica premium values at centered state
/// `w` (max entry 0), drawing from `rng`.
#[inline]
pub(crate) fn premium_replica_sums(
    w: &[f64],
    model: &IncrementModel,
    replicas: usize,
    rng: &mut CounterRng,
) -> (f64, f64) {
    let k = w.len();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    if model.family() == Family::Rademacher
        && matches!(model.correlation(), Correlation::Independent)
        && k <= 64
    {
        // bit-batched hot path: k sign bits per replica
        let scales = model.scales();
        if k <= 4 {
            // the replica value is a function of its k sign bits alone, so a
            // 2^k lookup table replaces the inner max entirely
            let table: Vec<f64> = (0..1usize << k)
                .map(|mask| {
                    let mut m = f64::NEG_INFINITY;
                    for j in 0..k {
                        let y = if mask >> j & 1 == 1 { scales[j] } else { -scales[j] };
                        let v = w[j] + y;
                        if v > m {
                            m = v;
                        }
                    }
                    m
                })
                .collect();
            let sq_table: Vec<f64> = table.iter().map(|m| m * m).collect();
            let per_word = 64 / k;
            let mask = (1u64 << k) - 1;
            // two accumulator pairs to break the add dependency chain
            let (mut s0, mut s1, mut q0, mut q1) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
            let mut done = 0usize;
            while done < replicas {
                let mut word = rand::RngCore::next_u64(rng);
                let take = per_word.min(replicas - done);
                let mut i = 0usize;
                while i + 1 < take {
                    let a = (word & mask) as usize;
                    word >>= k;
                    let b = (word & mask) as usize;
                    word >>= k;
                    s0 += table[a];
                    q0 += sq_table[a];
                    s1 += table[b];
                    q1 += sq_table[b];
                    i += 2;
                }
                if i < take {
                    let a = (word & mask) as usize;
                    s0 += table[a];
                    q0 += sq_table[a];
                }
                done += take;
            }
            sum = s0 + s1;
            sumsq = q0 + q1;
        } else {
            let mut word = 0u64;
            let mut bits = 0usize;
            for _ in 0..replicas {
                if bits < k {
                    word = rand::RngCore::next_u64(rng);
                    bits = 64;
                }
                let mut m = f64::NEG_INFINITY;
                for j in 0..k {
                    let y = if word & 1 == 1 { scales[j] } else { -scales[j] };
                    word >>= 1;
                    let v = w[j] + y;
                    if v > m {
                        m = v;
                    }
                }
                bits -= k;
                sum += m;
                sumsq += m * m;
            }
        }
    } else {
        let mut buf = vec![0.0; k];
        for _ in 0..replicas {
            model.fill_increments(rng, &mut buf);
            let mut m = f64::NEG_INFINITY;
            for j in 0..k {
                let v = w[j] + buf[j];
                if v > m {
                    m = v;
                }
            }
            sum += m;
            sumsq += m * m;
        }
    }
    (sum, sumsq)
}

pub(crate) fn mean_se(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Monte Carlo estimate of the selection premium at state `u`.
pub fn premium_mc(
    u: &[f64],
    model: &IncrementModel,
    replicas: usize,
    seed: SeedSpec,
) -> Result<PremiumEstimate> {
    if u.len() != model.arm_count() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, model has {} arms",
            u.len(),
            model.arm_count()
        )));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("state entries must be finite".into()));
    }
    if replicas < 2 {
        return Err(Error::InvalidConfig("replicas must be at least 2".into()));
    }
    let w = center_state(u);
    let mut rng = CounterRng::new(seed);
    let (sum, sumsq) = premium_replica_sums(&w, model, replicas, &mut rng);
    let (value, std_error) = mean_se(sum, sumsq, replicas);
    Ok(PremiumEstimate {
        value,
        std_error,
        replicas: replicas as u64,
        estimator: Estimator::Mc,
    })
}

/// Clark's closed form for the bivariate Gaussian premium.
///
/// With d = u1 - u2 and theta^2 = s11 + s22 - 2 s12,
/// E[max] = u1 Phi(d/theta) + u2 Phi(-d/theta) + theta phi(d/theta); the
/// theta = 0 limit is max(u1, u2).
pub fn premium_exact_2(u: &[f64], sigma: [[f64; 2]; 2]) -> Result<PremiumEstimate> {
    if u.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "closed form requires K = 2, got {}",
            u.len()
        )));
    }
    let scale = sigma
        .iter()
        .flatten()
        .map(|x| x.abs())
        .fold(1.0_f64, f64::max);
    if (sigma[0][1] - sigma[1][0]).abs() > 1e-10 * scale {
        return Err(Error::InvalidModel("covariance is not symmetric".into()));
    }
    if sigma[0][0] < 0.0
        || sigma[1][1] < 0.0
        || sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0] < -1e-8 * scale * scale
    {
        return Err(Error::NotPositiveSemiDefinite { order: 2 });
    }
    let theta_sq = (sigma[0][0] + sigma[1][1] - 2.0 * sigma[0][1]).max(0.0);
    let top = u[0].max(u[1]);
    if theta_sq == 0.0 {
        return Ok(PremiumEstimate::exact(0.0, Estimator::ExactClark));
    }
    let theta = theta_sq.sqrt();
    let d = (u[0] - u[1]) / theta;
    let expected_max = u[0] * normal_cdf(d) + u[1] * normal_cdf(-d) + theta * normal_pdf(d);
    Ok(PremiumEstimate::exact(
        expected_max - top,
        Estimator::ExactClark,
    ))
}

/// E[max of K i.i.d. standard normals] by adaptive quadrature of
/// K x phi(x) Phi(x)^(K-1).
pub fn g_normal(arm_count: usize, tolerance: f64) -> Result<PremiumEstimate> {
    if arm_count == 0 {
        return Err(Error::InvalidConfig("arm count must be positive".into()));
    }
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    if arm_count == 1 {
        return Ok(PremiumEstimate::exact(0.0, Estimator::Quadrature));
    }
    let kf = arm_count as f64;
    let value = integrate(
        |x| kf * x * normal_pdf(x) * normal_cdf(x).powi(arm_count as i32 - 1),
        -12.0,
        12.0,
        tolerance * 0.1,
    );
    Ok(PremiumEstimate::exact(value, Estimator::Quadrature))
}

/// Exact premium for independent Rademacher arms by enumerating all 2^K
/// sign patterns. Used as an oracle; K is capped at 20.
pub fn premium_enumerate_rademacher(u: &[f64], scales: &[f64]) -> Result<f64> {
    let k = u.len();
    if scales.len() != k {
        return Err(Error::DimensionMismatch(
            "state and scales must have equal length".into(),
        ));
    }
    if k == 0 || k > 20 {
        return Err(Error::InvalidConfig(
            "enumeration supports 1 <= K <= 20".into(),
        ));
    }
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let outcomes = 1u32 << k;
    let mut total = 0.0;
    for pattern in 0..outcomes {
        let mut m = f64::NEG_INFINITY;
        for j in 0..k {
            let y = if pattern >> j & 1 == 1 {
                scales[j]
            } else {
                -scales[j]
            };
            let v = u[j] + y;
            if v > m {
                m = v;
            }
        }
        total += m;
    }
    Ok(total / outcomes as f64 - top)
}

/// Monte Carlo estimate of E[max Z], Z ~ N(0, sigma), row-major K x K.
pub fn g_gaussian_mc(
    sigma: &[f64],
    arm_count: usize,
    replicas: usize,
    seed: SeedSpec,
) -> Result<PremiumEstimate> {
    if sigma.len() != arm_count * arm_count {
        return Err(Error::DimensionMismatch(format!(
            "covariance has {} entries, expected {}",
            sigma.len(),
            arm_count * arm_count
        )));
    }
    if replicas < 2 {
        return Err(Error::InvalidConfig("replicas must be at least 2".into()));
    }
    let l = cholesky_factor_flat(sigma, arm_count)?;
    let mut rng = CounterRng::new(seed);
    let mut z = vec![0.0; arm_count];
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..replicas {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let mut m = f64::NEG_INFINITY;
        for i in 0..arm_count {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[i * arm_count + j] * z[j];
            }
            if acc > m {
                m = acc;
            }
        }
        sum += m;
        sumsq += m * m;
    }
    let (value, std_error) = mean_se(sum, sumsq, replicas);
    Ok(PremiumEstimate {
        value,
        std_error,
        replicas: replicas as u64,
        estimator: Estimator::Mc,
    })
}
