//! Exact recording-attack and next-challenge analysis.
//!
//! An attacker who has logged `k` challenge-response pairs knows some number
//! `X` of distinct password positions. [`recording_distribution`] gives the
//! law of `X` for both challenge sampling scenarios, evaluated bottom-up in
//! exact integer arithmetic: after `k` steps every probability shares the
//! denominator `D^k`, where `D` is the number of equiprobable challenges, so
//! the table only ever holds integer numerators.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{sum_rational, CoefficientCache, ExactProbability};
use crate::error::{ModelError, ParamsError};

/// Default step cap for [`threshold_k`].
pub const DEFAULT_STEP_CAP: u64 = 10_000;

/// How the server draws the `m` positions of a challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SamplingScenario {
    /// Scenario A: `m` distinct positions, uniform over the `C(n, m)` subsets.
    WithoutReplacement,
    /// Scenario B: positions may repeat, uniform over the size-`m` multisets.
    WithReplacement,
}

impl SamplingScenario {
    pub const ALL: [SamplingScenario; 2] = [Self::WithoutReplacement, Self::WithReplacement];

    /// Short label used in reports: `A` or `B`.
    pub fn label(self) -> &'static str {
        match self {
            Self::WithoutReplacement => "A",
            Self::WithReplacement => "B",
        }
    }
}

impl fmt::Display for SamplingScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplingScenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "without-replacement" | "without_replacement" => Ok(Self::WithoutReplacement),
            "b" | "with-replacement" | "with_replacement" => Ok(Self::WithReplacement),
            other => Err(format!("unknown scenario {other:?} (expected A or B)")),
        }
    }
}

/// Password length `n` and challenge size `m`, with `1 <= m <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SchemeParams {
    n: usize,
    m: usize,
}

#[derive(Deserialize)]
struct RawParams {
    n: usize,
    m: usize,
}

impl TryFrom<RawParams> for SchemeParams {
    type Error = ParamsError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        SchemeParams::new(raw.n, raw.m)
    }
}

impl SchemeParams {
    pub fn new(n: usize, m: usize) -> Result<Self, ParamsError> {
        if n == 0 || m == 0 || m > n {
            return Err(ParamsError::Invalid { n, m });
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of equiprobable challenges under `scenario`.
    pub fn challenge_count(&self, scenario: SamplingScenario) -> BigUint {
        match scenario {
            SamplingScenario::WithoutReplacement => {
                crate::combinatorics::binom(self.n as u64, self.m as u64)
            }
            SamplingScenario::WithReplacement => {
                crate::combinatorics::multiset_coeff(self.n as u64, self.m as u64)
            }
        }
    }
}

/// Law of the number of distinct known positions after `k` recorded pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeDistribution {
    pub scenario: SamplingScenario,
    pub params: SchemeParams,
    pub k: u64,
    /// `probs[i] = P(X = i)` for `i = 0..=n`.
    pub probs: Vec<ExactProbability>,
}

impl KnowledgeDistribution {
    pub fn prob(&self, i: usize) -> &ExactProbability {
        &self.probs[i]
    }

    /// Probability that every position is known.
    pub fn full_reconstruction(&self) -> &ExactProbability {
        &self.probs[self.params.n]
    }

    /// Exact sum of all entries; one for a well-formed distribution.
    pub fn total(&self) -> BigRational {
        sum_rational(&self.probs)
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one()
    }

    /// Smallest and largest `i` with non-zero mass.
    pub fn support(&self) -> Option<(usize, usize)> {
        let lo = self.probs.iter().position(|p| !p.is_zero())?;
        let hi = self.probs.iter().rposition(|p| !p.is_zero())?;
        Some((lo, hi))
    }

    /// Half the L1 distance to `other`, as a float.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(other.iter().chain(std::iter::repeat(&0.0)))
            .map(|(p, q)| (p.to_f64() - q).abs())
            .sum::<f64>()
    }
}

/// Bottom-up evaluator of the recording recursion.
///
/// Holds the numerators of `p_k(X = i)` over the shared denominator `D^k`.
/// Each call to [`RecordingRecursion::step`] advances `k` by one.
#[derive(Debug)]
pub struct RecordingRecursion {
    scenario: SamplingScenario,
    params: SchemeParams,
    cache: CoefficientCache,
    // transition[prev][j]: weight of moving from `prev` known positions to
    // `prev + j`, i.e. the coefficient multiplying p_{k-1}(X = i - j).
    transition: Vec<Vec<BigUint>>,
    challenges: BigUint,
    numerators: Vec<BigUint>,
    denominator: BigUint,
    k: u64,
}

impl RecordingRecursion {
    pub fn new(scenario: SamplingScenario, params: SchemeParams) -> Self {
        let cache = CoefficientCache::new();
        let (n, m) = (params.n as i64, params.m as i64);
        let challenges = params.challenge_count(scenario);
        let transition = (0..=n)
            .map(|prev| {
                (0..=m)
                    .map(|j| {
                        let i = prev + j;
                        // picking exactly j of the n - prev unseen positions
                        let fresh = cache.binom(n - prev, j);
                        // the remaining m - j slots come from what is known
                        let known = match scenario {
                            SamplingScenario::WithoutReplacement => cache.binom(prev, m - j),
                            SamplingScenario::WithReplacement => cache.multiset(i, m - j),
                        };
                        fresh * known
                    })
                    .collect()
            })
            .collect();
        let mut numerators = vec![BigUint::zero(); params.n + 1];
        numerators[0] = BigUint::one();
        Self {
            scenario,
            params,
            cache,
            transition,
            challenges,
            numerators,
            denominator: BigUint::one(),
            k: 0,
        }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn step(&mut self) {
        let n = self.params.n;
        let m = self.params.m;
        let mut next = vec![BigUint::zero(); n + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = BigUint::zero();
            for j in 0..=m.min(i) {
                let prev = i - j;
                let w = &self.transition[prev][j];
                if w.is_zero() || self.numerators[prev].is_zero() {
                    continue;
                }
                acc += w * &self.numerators[prev];
            }
            *slot = acc;
        }
        self.numerators = next;
        self.denominator *= &self.challenges;
        self.k += 1;
    }

    /// Exact `P(X = i)` at the current step.
    pub fn prob(&self, i: usize) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerators[i].clone()),
            BigInt::from(self.denominator.clone()),
        )
    }

    pub fn distribution(&self) -> KnowledgeDistribution {
        let probs = (0..=self.params.n)
            .map(|i| {
                // Numerators are sums of non-negative terms, and the
                // transition weights out of any state sum to D, so each
                // entry stays within [0, 1].
                ExactProbability::from_rational(self.prob(i))
                    .unwrap_or_else(|_| ExactProbability::one())
            })
            .collect();
        KnowledgeDistribution {
            scenario: self.scenario,
            params: self.params,
            k: self.k,
            probs,
        }
    }

    /// Exact value of `Σ_i p_k(X = i) · q(i)` where `q` is the
    /// next-challenge probability, with the summation range starting at
    /// `m` (without replacement) or `1` (with replacement).
    pub fn expected_success(&self) -> ExactProbability {
        let n = self.params.n;
        let m = self.params.m as i64;
        let lo = match self.scenario {
            SamplingScenario::WithoutReplacement => self.params.m,
            SamplingScenario::WithReplacement => 1,
        };
        let mut acc = BigUint::zero();
        for i in lo..=n {
            let good = match self.scenario {
                SamplingScenario::WithoutReplacement => self.cache.binom(i as i64, m),
                SamplingScenario::WithReplacement => self.cache.multiset(i as i64, m),
            };
            acc += &self.numerators[i] * good;
        }
        let den = &self.denominator * &self.challenges;
        ExactProbability::from_rational(BigRational::new(BigInt::from(acc), BigInt::from(den)))
            .unwrap_or_else(|_| ExactProbability::one())
    }
}

/// Exact distribution of `X` after `k` recorded pairs.
pub fn recording_distribution(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
) -> KnowledgeDistribution {
    let mut rec = RecordingRecursion::new(scenario, params);
    for _ in 0..k {
        rec.step();
    }
    rec.distribution()
}

/// Distributions for every `k` in `0..=k_max`.
pub fn recording_series(
    scenario: SamplingScenario,
    params: SchemeParams,
    k_max: u64,
) -> Vec<KnowledgeDistribution> {
    let mut rec = RecordingRecursion::new(scenario, params);
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(rec.distribution());
    for _ in 0..k_max {
        rec.step();
        out.push(rec.distribution());
    }
    out
}

/// Probability that a fresh challenge only touches `i` already-known positions.
pub fn next_challenge_prob(
    scenario: SamplingScenario,
    params: SchemeParams,
    i: usize,
) -> Result<ExactProbability, ModelError> {
    if i > params.n {
        return Err(ModelError::KnownPositionsOutOfRange { i, n: params.n });
    }
    let m = params.m as u64;
    let good = match scenario {
        SamplingScenario::WithoutReplacement => crate::combinatorics::binom(i as u64, m),
        SamplingScenario::WithReplacement => crate::combinatorics::multiset_coeff(i as u64, m),
    };
    ExactProbability::new(good, params.challenge_count(scenario))
        .map_err(|_| ModelError::KnownPositionsOutOfRange { i, n: params.n })
}

/// Expected probability of answering the next challenge after `k` pairs.
///
/// Reports sometimes call this the expected number of tuples learned; the
/// value is a probability in `[0, 1]`.
pub fn expected_success(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
) -> ExactProbability {
    let mut rec = RecordingRecursion::new(scenario, params);
    for _ in 0..k {
        rec.step();
    }
    rec.expected_success()
}

pub fn expected_success_series(
    scenario: SamplingScenario,
    params: SchemeParams,
    k_max: u64,
) -> Vec<ExactProbability> {
    let mut rec = RecordingRecursion::new(scenario, params);
    let mut out = vec![rec.expected_success()];
    for _ in 0..k_max {
        rec.step();
        out.push(rec.expected_success());
    }
    out
}

/// Which curve [`threshold_k`] inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMetric {
    /// `P(X = n)`.
    FullReconstruction,
    /// [`expected_success`].
    NextChallenge,
}

impl FromStr for ThresholdMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" | "full-reconstruction" | "reconstruction" => Ok(Self::FullReconstruction),
            "next" | "next-challenge" => Ok(Self::NextChallenge),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Smallest `k` at which `metric` reaches `target`, capped at
/// [`DEFAULT_STEP_CAP`] steps.
pub fn threshold_k(
    scenario: SamplingScenario,
    params: SchemeParams,
    target: &ExactProbability,
    metric: ThresholdMetric,
) -> Result<u64, ModelError> {
    threshold_k_capped(scenario, params, target, metric, DEFAULT_STEP_CAP)
}

pub fn threshold_k_capped(
    scenario: SamplingScenario,
    params: SchemeParams,
    target: &ExactProbability,
    metric: ThresholdMetric,
    cap: u64,
) -> Result<u64, ModelError> {
    if target.is_zero() || target.is_one() {
        return Err(ModelError::TargetOutOfRange(target.clone()));
    }
    let mut rec = RecordingRecursion::new(scenario, params);
    let value = |rec: &RecordingRecursion| -> ExactProbability {
        match metric {
            ThresholdMetric::FullReconstruction => {
                ExactProbability::from_rational(rec.prob(params.n))
                    .unwrap_or_else(|_| ExactProbability::one())
            }
            ThresholdMetric::NextChallenge => rec.expected_success(),
        }
    };
    loop {
        let v = value(&rec);
        if &v >= target {
            return Ok(rec.k());
        }
        if rec.k() >= cap {
            return Err(ModelError::DidNotReachTarget {
                steps: rec.k(),
                last: v,
            });
        }
        rec.step();
    }
}
