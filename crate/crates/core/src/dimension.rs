//! Finite-depth box-dimension estimates of slices and the matrix-vs-geometry
//! verification harness.

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carpet::MoranSequence;
use crate::error::{Error, Result};
use crate::scalar::{ln_count, ExactInt, Real};
use crate::slicing::{greedy_expand, oracle_counts, Intercept, Slope};
use crate::transfer::{matrix_counts, TransferSet};

/// Default cap on child cells tested by the geometric oracle.
pub const DEFAULT_CELL_BUDGET: u128 = 10_000_000;

/// How counts are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Matrix,
    Oracle,
    Both,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(Method::Matrix),
            "oracle" => Ok(Method::Oracle),
            "both" => Ok(Method::Both),
            _ => Err(Error::parse("method", s, "expected matrix, oracle or both")),
        }
    }
}

/// Counts and `log N_k / (n_0(k) log 3 + n_1(k) log 4)` for `k = 1..`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate<F> {
    pub depths: Vec<usize>,
    pub counts: Vec<BigUint>,
    /// Geometric counts, when the oracle ran (possibly over fewer depths).
    pub oracle_counts: Option<Vec<BigUint>>,
    pub estimates: Vec<F>,
    /// Depth from which matrix counts carry the boundary warning.
    pub first_boundary: Option<usize>,
    /// Set when the oracle stopped early on its cell budget.
    pub oracle_capped: bool,
}

impl<F: Real> DimensionEstimate<F> {
    /// `(min, max)` of the estimates over the last `window` depths: finite
    /// stand-ins for the lower and upper limits.
    pub fn tail_bounds(&self, window: usize) -> Result<(F, F)> {
        tail_bounds(&self.estimates, window)
    }
}

/// `(min, max)` over the trailing `window` values.
pub fn tail_bounds<F: Real>(estimates: &[F], window: usize) -> Result<(F, F)> {
    if window == 0 || window > estimates.len() {
        return Err(Error::WindowTooLarge {
            window,
            available: estimates.len(),
        });
    }
    let tail = &estimates[estimates.len() - window..];
    let lo = tail.iter().copied().fold(F::infinity(), F::min);
    let hi = tail.iter().copied().fold(F::neg_infinity(), F::max);
    Ok((lo, hi))
}

fn estimate<F: Real>(count: &BigUint, sigma: &MoranSequence, k: usize) -> F {
    ln_count::<F>(count) / sigma.log_scale::<F>(k)
}

/// Estimates for depths `1..=max_depth`. With [`Method::Both`] the two count
/// sequences must agree wherever the matrix count is not boundary-flagged.
pub fn box_dim_sequence<I: ExactInt, F: Real>(
    a: &Intercept<I>,
    sigma: &MoranSequence,
    slope: &Slope,
    max_depth: usize,
    method: Method,
    cell_budget: u128,
) -> Result<DimensionEstimate<F>> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let matrix = (method != Method::Oracle)
        .then(|| matrix_counts(a, sigma, &TransferSet::semantic(slope), max_depth));
    let oracle = (method != Method::Matrix)
        .then(|| oracle_counts(a, sigma, slope, max_depth, cell_budget));

    if let (Some(m), Some(o)) = (&matrix, &oracle) {
        for depth in 1..o.counts.len() {
            if m.counts[depth] != o.counts[depth] && !m.flagged_at(depth) {
                return Err(Error::VerificationFailure {
                    depth,
                    matrix: m.counts[depth].clone(),
                    oracle: o.counts[depth].clone(),
                });
            }
        }
    }

    let counts: Vec<BigUint> = match (&matrix, &oracle) {
        (Some(m), _) => m.counts[1..].to_vec(),
        (None, Some(o)) => o.counts[1..].to_vec(),
        (None, None) => unreachable!("every method computes at least one route"),
    };
    let depths: Vec<usize> = (1..=counts.len()).collect();
    let estimates = depths
        .iter()
        .zip(&counts)
        .map(|(&k, c)| estimate(c, sigma, k))
        .collect();
    let first_boundary = match &matrix {
        Some(m) => m.first_boundary,
        None => greedy_expand(a, sigma, slope, max_depth).first_boundary,
    };
    Ok(DimensionEstimate {
        depths,
        counts,
        oracle_counts: oracle.as_ref().map(|o| o.counts[1..].to_vec()),
        estimates,
        first_boundary,
        oracle_capped: oracle.is_some_and(|o| o.capped),
    })
}

/// Inputs to a matrix-vs-oracle comparison run.
#[derive(Debug, Clone)]
pub struct VerificationSuite {
    pub slopes: Vec<Slope>,
    pub sigmas: Vec<MoranSequence>,
    /// Fixed intercepts, tried against every slope whose range contains them.
    pub intercepts: Vec<Ratio<BigInt>>,
    /// Random non-boundary intercepts per (slope, sequence) pair.
    pub samples: usize,
    pub seed: u64,
    pub depth_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Pass,
    Mismatch,
    /// Boundary intercept: counts reported, equality not required.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleReport {
    pub id: usize,
    pub slope: String,
    pub sigma: String,
    pub a: String,
    pub random: bool,
    pub first_boundary: Option<usize>,
    pub matrix: Vec<BigUint>,
    pub oracle: Vec<BigUint>,
    pub status: SampleStatus,
    pub first_mismatch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerificationReport {
    pub samples: Vec<SampleReport>,
}

impl VerificationReport {
    pub fn count(&self, status: SampleStatus) -> usize {
        self.samples.iter().filter(|s| s.status == status).count()
    }

    pub fn passed(&self) -> bool {
        self.count(SampleStatus::Mismatch) == 0
    }
}

/// Uniform rational in the open interval `(-M/N, 1)` with a prime
/// denominator coprime to `6N`, so no greedy remainder can vanish.
pub fn sample_intercept<R: Rng>(rng: &mut R, slope: &Slope) -> Ratio<BigInt> {
    const PRIMES: [i64; 12] = [7, 11, 13, 17, 19, 23, 101, 211, 331, 1009, 7919, 104_729];
    let n = slope.run() as i64;
    let m = slope.rise() as i64;
    loop {
        let q = PRIMES[rng.gen_range(0..PRIMES.len())];
        if n % q == 0 {
            continue;
        }
        // p/q > -M/N  <=>  p N > -M q
        let lo = (-m * q).div_euclid(n) + 1;
        let p = rng.gen_range(lo..q);
        if p != 0 {
            return Ratio::new(BigInt::from(p), BigInt::from(q));
        }
    }
}

struct Job {
    slope: Slope,
    sigma: MoranSequence,
    a: Ratio<BigInt>,
    random: bool,
}

fn run_job(id: usize, job: &Job, depth: usize) -> SampleReport {
    let a = Intercept::new(job.a.clone(), &job.slope).expect("jobs are range-checked");
    let m = matrix_counts(&a, &job.sigma, &TransferSet::semantic(&job.slope), depth);
    let o = oracle_counts(&a, &job.sigma, &job.slope, depth, u128::MAX);
    let first_mismatch = (1..=depth).find(|&k| m.counts[k] != o.counts[k]);
    let status = if m.first_boundary.is_some() {
        SampleStatus::Skipped
    } else if first_mismatch.is_some() {
        SampleStatus::Mismatch
    } else {
        SampleStatus::Pass
    };
    SampleReport {
        id,
        slope: job.slope.to_string(),
        sigma: job.sigma.to_string(),
        a: job.a.to_string(),
        random: job.random,
        first_boundary: m.first_boundary,
        matrix: m.counts[1..].to_vec(),
        oracle: o.counts[1..].to_vec(),
        status,
        first_mismatch,
    }
}

/// Compares matrix-product counts with geometric counts at every depth up to
/// the cap. Identical suites give identical reports.
pub fn verify_matrix_counts(suite: &VerificationSuite) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let mut jobs = Vec::new();
    for slope in &suite.slopes {
        for sigma in &suite.sigmas {
            for a in suite.intercepts.iter().filter(|a| slope.contains(*a)) {
                jobs.push(Job {
                    slope: *slope,
                    sigma: sigma.clone(),
                    a: a.clone(),
                    random: false,
                });
            }
            let mut drawn = 0;
            while drawn < suite.samples {
                let a = sample_intercept(&mut rng, slope);
                let icpt = Intercept::new(a.clone(), slope).expect("sampler stays in range");
                if greedy_expand(&icpt, sigma, slope, suite.depth_cap).boundary_flag() {
                    continue;
                }
                jobs.push(Job {
                    slope: *slope,
                    sigma: sigma.clone(),
                    a,
                    random: true,
                });
                drawn += 1;
            }
        }
    }
    let samples = jobs
        .par_iter()
        .enumerate()
        .map(|(id, job)| run_job(id, job, suite.depth_cap))
        .collect();
    VerificationReport { samples }
}
