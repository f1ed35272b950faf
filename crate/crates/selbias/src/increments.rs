//! Centered multivariate increment laws and their samplers.
//!
//! Every family is standardized to mean 0, variance 1 per unit scale, then
//! multiplied by the per-arm scale. Cross-arm dependence is either a full
//! Gaussian covariance (sampled through its Cholesky factor) or an
//! exchangeable correlation built from a shared standardized component.

use rand::RngCore;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{CounterRng, SeedSpec};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const T5_SCALE: f64 = 0.774_596_669_241_483_4; // sqrt(3/5), unit variance for t(5)
const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Increment distribution family. All are centered with unit variance at
/// scale 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT5,
    ExponentialCentered,
    UniformCentered,
    Laplace,
    Rademacher,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gaussian,
        Family::StudentT5,
        Family::ExponentialCentered,
        Family::UniformCentered,
        Family::Laplace,
        Family::Rademacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::StudentT5 => "student_t5",
            Family::ExponentialCentered => "exponential_centered",
            Family::UniformCentered => "uniform_centered",
            Family::Laplace => "laplace",
            Family::Rademacher => "rademacher",
        }
    }

    /// Bound on |Y| per unit scale, for the bounded families only.
    pub fn unit_bound(self) -> Option<f64> {
        match self {
            Family::UniformCentered => Some(SQRT_3),
            Family::Rademacher => Some(1.0),
            _ => None,
        }
    }

    /// One standardized draw (mean 0, variance 1).
    #[inline]
    pub fn sample_standard(self, rng: &mut CounterRng) -> f64 {
        match self {
            Family::Gaussian => StandardNormal.sample(rng),
            Family::StudentT5 => {
                let t: f64 = StudentT::new(5.0).unwrap().sample(rng);
                t * T5_SCALE
            }
            Family::ExponentialCentered => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            Family::UniformCentered => (2.0 * rng.next_unit() - 1.0) * SQRT_3,
            Family::Laplace => {
                let u = rng.next_open_unit();
                if u < 0.5 {
                    (2.0 * u).ln() * INV_SQRT_2
                } else {
                    -(2.0 * (1.0 - u)).ln() * INV_SQRT_2
                }
            }
            Family::Rademacher => {
                if rng.next_u64() >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Centering/scaling constants that make a family mean 0, variance 1 per
/// unit scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Standardization {
    /// Additive shift applied to the raw draw.
    pub shift: f64,
    /// Multiplier applied after shifting.
    pub scale: f64,
    /// Support of the standardized law, when bounded on either side.
    pub support: Option<(f64, f64)>,
}

/// Constants turning each family's natural parameterization into a centered
/// unit-variance law.
pub fn standardize(family: Family) -> Standardization {
    match family {
        Family::Gaussian => Standardization {
            shift: 0.0,
            scale: 1.0,
            support: None,
        },
        Family::StudentT5 => Standardization {
            shift: 0.0,
            scale: T5_SCALE,
            support: None,
        },
        Family::ExponentialCentered => Standardization {
            shift: -1.0,
            scale: 1.0,
            support: Some((-1.0, f64::INFINITY)),
        },
        Family::UniformCentered => Standardization {
            shift: 0.0,
            scale: 1.0,
            support: Some((-SQRT_3, SQRT_3)),
        },
        Family::Laplace => Standardization {
            shift: 0.0,
            scale: INV_SQRT_2,
            support: None,
        },
        Family::Rademacher => Standardization {
            shift: 0.0,
            scale: 1.0,
            support: Some((-1.0, 1.0)),
        },
    }
}

/// Cross-arm dependence structure.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Correlation {
    Independent,
    /// Exchangeable correlation rho in [0, 1] via a shared standardized
    /// component: Y_k = sqrt(rho) W + sqrt(1 - rho) V_k. Exact for the
    /// Gaussian family; for other families the mixture approximates the
    /// family itself.
    Exchangeable(f64),
    /// Full covariance, Gaussian family only. Row-major K x K.
    Covariance(Vec<f64>),
}

/// A centered K-dimensional increment law.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IncrementModel {
    family: Family,
    arm_count: usize,
    scales: Vec<f64>,
    correlation: Correlation,
    support_bound: Option<f64>,
    #[serde(skip)]
    chol: Option<Vec<f64>>, // lower triangular, row-major
}

impl IncrementModel {
    pub fn new(family: Family, scales: Vec<f64>, correlation: Correlation) -> Result<Self> {
        let arm_count = scales.len();
        if arm_count == 0 {
            return Err(Error::InvalidModel("arm count must be positive".into()));
        }
        if scales.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::InvalidModel(
                "every scale must be a positive finite real".into(),
            ));
        }
        let mut chol = None;
        match &correlation {
            Correlation::Independent => {}
            Correlation::Exchangeable(rho) => {
                if !(0.0..=1.0).contains(rho) {
                    return Err(Error::InvalidModel(format!(
                        "exchangeable correlation must lie in [0, 1], got {rho}"
                    )));
                }
            }
            Correlation::Covariance(cov) => {
                if family != Family::Gaussian {
                    return Err(Error::InvalidModel(
                        "full covariance is supported for the gaussian family only".into(),
                    ));
                }
                if cov.len() != arm_count * arm_count {
                    return Err(Error::DimensionMismatch(format!(
                        "covariance has {} entries, expected {}",
                        cov.len(),
                        arm_count * arm_count
                    )));
                }
                chol = Some(cholesky_factor_flat(cov, arm_count)?);
            }
        }

        let mut model = IncrementModel {
            family,
            arm_count,
            scales,
            correlation,
            support_bound: None,
            chol,
        };
        // With full covariance the scales are the marginal standard deviations.
        if let Correlation::Covariance(cov) = &model.correlation {
            model.scales = (0..arm_count)
                .map(|k| cov[k * arm_count + k].max(0.0).sqrt())
                .collect();
        }
        model.support_bound = model.compute_support_bound();
        Ok(model)
    }

    /// Independent arms with a common scale.
    pub fn iid(family: Family, arm_count: usize, sigma: f64) -> Result<Self> {
        IncrementModel::new(family, vec![sigma; arm_count], Correlation::Independent)
    }

    /// Exchangeable correlation with a common scale.
    pub fn exchangeable(family: Family, arm_count: usize, sigma: f64, rho: f64) -> Result<Self> {
        if rho == 0.0 {
            return IncrementModel::iid(family, arm_count, sigma);
        }
        IncrementModel::new(
            family,
            vec![sigma; arm_count],
            Correlation::Exchangeable(rho),
        )
    }

    /// Gaussian with full covariance (row-major K x K).
    pub fn gaussian_cov(cov: Vec<f64>, arm_count: usize) -> Result<Self> {
        IncrementModel::new(
            Family::Gaussian,
            vec![1.0; arm_count],
            Correlation::Covariance(cov),
        )
    }

    fn compute_support_bound(&self) -> Option<f64> {
        let unit = self.family.unit_bound()?;
        let max_scale = self.scales.iter().cloned().fold(0.0_f64, f64::max);
        let widening = match self.correlation {
            Correlation::Exchangeable(rho) => rho.sqrt() + (1.0 - rho).sqrt(),
            _ => 1.0,
        };
        Some(unit * max_scale * widening)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn correlation(&self) -> &Correlation {
        &self.correlation
    }

    /// Bound b with |Y_k| <= b for bounded families, None otherwise.
    pub fn support_bound(&self) -> Option<f64> {
        self.support_bound
    }

    /// Marginal covariance of the increment vector.
    pub fn covariance(&self) -> Vec<f64> {
        let k = self.arm_count;
        match &self.correlation {
            Correlation::Covariance(cov) => cov.clone(),
            Correlation::Independent => {
                let mut cov = vec![0.0; k * k];
                for i in 0..k {
                    cov[i * k + i] = self.scales[i] * self.scales[i];
                }
                cov
            }
            Correlation::Exchangeable(rho) => {
                let mut cov = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        let c = if i == j { 1.0 } else { *rho };
                        cov[i * k + j] = c * self.scales[i] * self.scales[j];
                    }
                }
                cov
            }
        }
    }

    /// Largest eigenvalue of the marginal covariance (power iteration).
    pub fn covariance_lambda_max(&self) -> f64 {
        let k = self.arm_count;
        match &self.correlation {
            Correlation::Independent => self
                .scales
                .iter()
                .map(|s| s * s)
                .fold(0.0_f64, f64::max),
            _ => {
                let cov = self.covariance();
                let mut v = vec![1.0 / (k as f64).sqrt(); k];
                let mut lambda = 0.0;
                for _ in 0..200 {
                    let mut w = vec![0.0; k];
                    for i in 0..k {
                        let mut acc = 0.0;
                        for j in 0..k {
                            acc += cov[i * k + j] * v[j];
                        }
                        w[i] = acc;
                    }
                    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return 0.0;
                    }
                    let next = norm;
                    for x in &mut w {
                        *x /= norm;
                    }
                    if (next - lambda).abs() <= 1e-13 * next.max(1.0) {
                        return next;
                    }
                    lambda = next;
                    v = w;
                }
                lambda
            }
        }
    }

    /// Fill `out` (length K) with one draw of the increment vector.
    #[inline]
    pub fn fill_increments(&self, rng: &mut CounterRng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.arm_count);
        match &self.correlation {
            Correlation::Independent => {
                if self.family == Family::Rademacher {
                    self.fill_rademacher_independent(rng, out);
                } else {
                    for (y, &s) in out.iter_mut().zip(&self.scales) {
                        *y = s * self.family.sample_standard(rng);
                    }
                }
            }
            Correlation::Exchangeable(rho) => {
                let sr = rho.sqrt();
                let s1 = (1.0 - rho).sqrt();
                let shared = self.family.sample_standard(rng);
                for (y, &s) in out.iter_mut().zip(&self.scales) {
                    *y = s * (sr * shared + s1 * self.family.sample_standard(rng));
                }
            }
            Correlation::Covariance(_) => {
                let l = self.chol.as_ref().expect("factor computed at construction");
                let k = self.arm_count;
                // y = L z without scratch: accumulate row by row over fresh z,
                // reusing out as the z buffer would alias, so draw z first.
                let mut z = [0.0_f64; 64];
                if k <= 64 {
                    for zi in z[..k].iter_mut() {
                        *zi = StandardNormal.sample(rng);
                    }
                    for i in 0..k {
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += l[i * k + j] * z[j];
                        }
                        out[i] = acc;
                    }
                } else {
                    let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
                    for i in 0..k {
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += l[i * k + j] * z[j];
                        }
                        out[i] = acc;
                    }
                }
            }
        }
    }

    /// Bit-batched draw for independent Rademacher arms (hot path).
    #[inline]
    fn fill_rademacher_independent(&self, rng: &mut CounterRng, out: &mut [f64]) {
        let mut word = 0u64;
        for (k, (y, &s)) in out.iter_mut().zip(&self.scales).enumerate() {
            if k % 64 == 0 {
                word = rng.next_u64();
            }
            *y = if word & 1 == 1 { s } else { -s };
            word >>= 1;
        }
    }
}

/// Rectangular batch of increment draws: rows are replicas, columns arms.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawBatch {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DrawBatch {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column_mean(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.row(r)[c]).sum::<f64>() / self.rows as f64
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Draw `count` i.i.d. increment vectors from one stream.
pub fn sample_increments(
    model: &IncrementModel,
    seed: SeedSpec,
    count: usize,
) -> Result<DrawBatch> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be positive".into()));
    }
    let k = model.arm_count();
    let mut rng = CounterRng::new(seed);
    let mut data = vec![0.0; count * k];
    for row in data.chunks_exact_mut(k) {
        model.fill_increments(&mut rng, row);
    }
    Ok(DrawBatch {
        data,
        rows: count,
        cols: k,
    })
}

/// Cholesky factorization with PSD (zero-eigenvalue) handling.
///
/// Returns the lower-triangular L with L L^T = sigma. A pivot below
/// -1e-8 is reported as a non-PSD error naming the leading minor; pivots in
/// [-1e-8, 0] are clamped to zero and their columns zeroed.
pub fn cholesky_factor(sigma: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = sigma.len();
    let mut flat = vec![0.0; k * k];
    for (i, row) in sigma.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "covariance row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        flat[i * k..(i + 1) * k].copy_from_slice(row);
    }
    let l = cholesky_factor_flat(&flat, k)?;
    Ok((0..k)
        .map(|i| l[i * k..(i + 1) * k].to_vec())
        .collect())
}

pub(crate) fn cholesky_factor_flat(sigma: &[f64], k: usize) -> Result<Vec<f64>> {
    let scale = sigma
        .iter()
        .map(|x| x.abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for i in 0..k {
        for j in 0..i {
            if (sigma[i * k + j] - sigma[j * k + i]).abs() > 1e-10 * scale {
                return Err(Error::InvalidModel(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = sigma[j * k + j];
        for p in 0..j {
            d -= l[j * k + p] * l[j * k + p];
        }
        if d < -1e-8 * scale {
            return Err(Error::NotPositiveSemiDefinite { order: j + 1 });
        }
        if d <= 1e-12 * scale {
            // semi-definite pivot: zero the column
            l[j * k + j] = 0.0;
            continue;
        }
        let dj = d.sqrt();
        l[j * k + j] = dj;
        for i in (j + 1)..k {
            let mut s = sigma[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = s / dj;
        }
    }
    Ok(l)
}
