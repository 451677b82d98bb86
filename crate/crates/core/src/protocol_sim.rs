//! Executable model of the partial-password login protocol.
//!
//! Also hosts two oracles for [`crate::attack_model`]: an exhaustive
//! enumerator over every challenge sequence and a seeded Monte Carlo
//! simulator. Positions are 0-based throughout this module.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack_model::{KnowledgeDistribution, SamplingScenario, SchemeParams};
use crate::combinatorics::ExactProbability;
use crate::error::ProtocolError;

/// Default cap on the number of sequences [`enumerate_exact`] will visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// The generator behind every randomized routine in this crate.
pub type SimRng = ChaCha8Rng;

/// Generator for trial `trial` of a run seeded with `seed`.
///
/// Every trial gets its own ChaCha stream under the same key, so results do
/// not depend on how trials are spread over workers.
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self, ProtocolError> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(ProtocolError::InvalidAlphabet);
        }
        let mut seen = std::collections::HashSet::new();
        if !symbols.iter().all(|c| seen.insert(*c)) {
            return Err(ProtocolError::InvalidAlphabet);
        }
        Ok(Self { symbols })
    }

    /// PIN alphabet, size 10.
    pub fn numeric() -> Self {
        Self {
            symbols: ('0'..='9').collect(),
        }
    }

    /// Digits and lowercase letters, size 36.
    pub fn alphanumeric() -> Self {
        Self {
            symbols: ('0'..='9').chain('a'..='z').collect(),
        }
    }

    /// Printable ASCII including space, size 95.
    pub fn printable_ascii() -> Self {
        Self {
            symbols: (' '..='~').collect(),
        }
    }

    pub fn contains(&self, c: char) -> bool {
        self.symbols.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }
}

impl TryFrom<String> for Alphabet {
    type Error = ProtocolError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Alphabet::new(s.chars())
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.symbols.into_iter().collect()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbols.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// A shared secret over a declared alphabet.
#[derive(Clone, PartialEq, Eq)]
pub struct Password {
    chars: Vec<char>,
    alphabet: Alphabet,
}

impl Password {
    pub fn new(text: &str, alphabet: &Alphabet) -> Result<Self, ProtocolError> {
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return Err(ProtocolError::EmptyPassword);
        }
        if let Some(&c) = chars.iter().find(|c| !alphabet.contains(**c)) {
            return Err(ProtocolError::NotInAlphabet(c));
        }
        Ok(Self {
            chars,
            alphabet: alphabet.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

// Keep secrets out of debug output.
impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Password(len={})", self.chars.len())
    }
}

/// Positions requested by the server, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Challenge {
    scenario: SamplingScenario,
    positions: Vec<usize>,
}

impl Challenge {
    pub fn new(
        scenario: SamplingScenario,
        params: SchemeParams,
        mut positions: Vec<usize>,
    ) -> Result<Self, ProtocolError> {
        if positions.len() != params.m() {
            return Err(ProtocolError::WrongChallengeSize {
                expected: params.m(),
                got: positions.len(),
            });
        }
        if let Some(&p) = positions.iter().find(|&&p| p >= params.n()) {
            return Err(ProtocolError::PositionOutOfRange {
                position: p,
                n: params.n(),
            });
        }
        positions.sort_unstable();
        if scenario == SamplingScenario::WithoutReplacement {
            if let Some(w) = positions.windows(2).find(|w| w[0] == w[1]) {
                return Err(ProtocolError::RepeatedPosition(w[0]));
            }
        }
        Ok(Self {
            scenario,
            positions,
        })
    }

    pub fn scenario(&self) -> SamplingScenario {
        self.scenario
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn has_repeats(&self) -> bool {
        self.positions.windows(2).any(|w| w[0] == w[1])
    }

    pub fn canonicalize(mut self) -> Self {
        self.positions.sort_unstable();
        self
    }

    /// 1-based positions, for display.
    pub fn one_based(&self) -> Vec<usize> {
        self.positions.iter().map(|p| p + 1).collect()
    }
}

/// Characters answering a challenge, aligned with its positions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Response(Vec<char>);

impl Response {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Self {
        Self(chars.into_iter().collect())
    }

    /// Builds a response and checks it against the challenge shape.
    pub fn for_challenge(
        challenge: &Challenge,
        chars: impl IntoIterator<Item = char>,
    ) -> Result<Self, ProtocolError> {
        let r = Self::new(chars);
        if r.0.len() != challenge.len() {
            return Err(ProtocolError::LengthMismatch {
                challenge: challenge.len(),
                response: r.0.len(),
            });
        }
        for (i, w) in challenge.positions.windows(2).enumerate() {
            if w[0] == w[1] && r.0[i] != r.0[i + 1] {
                return Err(ProtocolError::InconsistentResponse(w[0]));
            }
        }
        Ok(r)
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Response(len={})", self.0.len())
    }
}

/// Outcome of checking a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        })
    }
}

/// What an honest user types for `challenge`.
pub fn respond(password: &Password, challenge: &Challenge) -> Response {
    Response(challenge.positions.iter().map(|&p| password.chars[p]).collect())
}

/// Accepts iff every character matches the password at its position.
pub fn verify_response(
    password: &Password,
    challenge: &Challenge,
    response: &Response,
) -> Result<Verdict, ProtocolError> {
    if response.len() != challenge.len() {
        return Err(ProtocolError::LengthMismatch {
            challenge: challenge.len(),
            response: response.len(),
        });
    }
    let ok = challenge
        .positions
        .iter()
        .zip(&response.0)
        .all(|(&p, &c)| password.chars.get(p) == Some(&c));
    Ok(Verdict::from_bool(ok))
}

/// How with-replacement challenges are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MultisetSampling {
    /// Uniform over the size-`m` multisets; the law the exact recursion assumes.
    #[default]
    UniformMultiset,
    /// Each position drawn independently and uniformly.
    ///
    /// model-mismatch: multisets are NOT equiprobable here, so results do
    /// not follow the exact recording distribution. Experimental only.
    IidPositions,
}

/// Draws a challenge; with-replacement challenges are uniform multisets.
pub fn generate_challenge<R: Rng + ?Sized>(
    scenario: SamplingScenario,
    params: SchemeParams,
    rng: &mut R,
) -> Challenge {
    generate_challenge_with(scenario, params, MultisetSampling::UniformMultiset, rng)
}

pub fn generate_challenge_with<R: Rng + ?Sized>(
    scenario: SamplingScenario,
    params: SchemeParams,
    mode: MultisetSampling,
    rng: &mut R,
) -> Challenge {
    let (n, m) = (params.n(), params.m());
    let mut positions: Vec<usize> = match (scenario, mode) {
        (SamplingScenario::WithoutReplacement, _) => index::sample(rng, n, m).into_vec(),
        (SamplingScenario::WithReplacement, MultisetSampling::UniformMultiset) => {
            // Stars and bars: a sorted m-subset s_0 < ... < s_{m-1} of
            // {0, .., n+m-2} maps to the multiset {s_j - j}.
            let mut s = index::sample(rng, n + m - 1, m).into_vec();
            s.sort_unstable();
            s.into_iter().enumerate().map(|(j, v)| v - j).collect()
        }
        (SamplingScenario::WithReplacement, MultisetSampling::IidPositions) => {
            (0..m).map(|_| rng.gen_range(0..n)).collect()
        }
    };
    positions.sort_unstable();
    Challenge {
        scenario,
        positions,
    }
}

/// Every challenge the server could issue, in lexicographic order.
pub fn all_challenges(scenario: SamplingScenario, params: SchemeParams) -> Vec<Challenge> {
    let (n, m) = (params.n(), params.m());
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fn go(
        start: usize,
        n: usize,
        m: usize,
        repeat: bool,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for p in start..n {
            cur.push(p);
            go(if repeat { p } else { p + 1 }, n, m, repeat, cur, out);
            cur.pop();
        }
    }
    let repeat = scenario == SamplingScenario::WithReplacement;
    go(0, n, m, repeat, &mut cur, &mut out);
    out.into_iter()
        .map(|positions| Challenge {
            scenario,
            positions,
        })
        .collect()
}

/// Positions and characters an eavesdropper has collected.
#[derive(Debug, Clone, Default)]
pub struct AttackerKnowledge {
    known: BTreeMap<usize, char>,
    pair_log: Vec<(Challenge, Response)>,
}

impl AttackerKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, challenge: Challenge, response: Response) {
        for (&p, &c) in challenge.positions.iter().zip(&response.0) {
            self.known.insert(p, c);
        }
        self.pair_log.push((challenge, response));
    }

    /// `X`, the number of distinct positions seen so far.
    pub fn known_count(&self) -> usize {
        self.known.len()
    }

    pub fn known(&self) -> &BTreeMap<usize, char> {
        &self.known
    }

    pub fn pairs(&self) -> &[(Challenge, Response)] {
        &self.pair_log
    }

    /// A response built from recorded characters, if every position is known.
    pub fn answer(&self, challenge: &Challenge) -> Option<Response> {
        challenge
            .positions
            .iter()
            .map(|p| self.known.get(p).copied())
            .collect::<Option<Vec<char>>>()
            .map(Response)
    }
}

/// What the server does after a failed attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RetryPolicy {
    /// Draw a new challenge.
    #[default]
    FreshChallenge,
    /// Present the same challenge again until it is answered.
    RepeatChallenge,
}

/// A login server holding one password.
#[derive(Debug)]
pub struct Server {
    password: Password,
    params: SchemeParams,
    scenario: SamplingScenario,
    policy: RetryPolicy,
    sampling: MultisetSampling,
    rng: SimRng,
    pending: Option<Challenge>,
}

impl Server {
    pub fn new(
        password: Password,
        scenario: SamplingScenario,
        m: usize,
        policy: RetryPolicy,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        let params = SchemeParams::new(password.len(), m)?;
        Ok(Self {
            password,
            params,
            scenario,
            policy,
            sampling: MultisetSampling::UniformMultiset,
            rng: SimRng::seed_from_u64(seed),
            pending: None,
        })
    }

    pub fn with_sampling(mut self, sampling: MultisetSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn params(&self) -> SchemeParams {
        self.params
    }

    /// The challenge for the current attempt.
    pub fn challenge(&mut self) -> Challenge {
        if let Some(c) = &self.pending {
            return c.clone();
        }
        let c = generate_challenge_with(self.scenario, self.params, self.sampling, &mut self.rng);
        self.pending = Some(c.clone());
        c
    }

    /// Checks `response` against the outstanding challenge.
    pub fn submit(&mut self, response: &Response) -> Result<Verdict, ProtocolError> {
        let challenge = self.challenge();
        let verdict = verify_response(&self.password, &challenge, response)?;
        if verdict.is_accept() || self.policy == RetryPolicy::FreshChallenge {
            self.pending = None;
        }
        Ok(verdict)
    }
}

/// Options for [`simulate_recording_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    pub sampling: MultisetSampling,
    pub parallel: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            sampling: MultisetSampling::UniformMultiset,
            parallel: true,
        }
    }
}

/// Monte Carlo estimate of the recording distribution.
///
/// The returned probabilities are exact ratios `count / trials`.
pub fn simulate_recording(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
    trials: u64,
    seed: u64,
) -> Result<KnowledgeDistribution, ProtocolError> {
    simulate_recording_with(scenario, params, k, trials, seed, SimulationOptions::default())
}

pub fn simulate_recording_with(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
    trials: u64,
    seed: u64,
    opts: SimulationOptions,
) -> Result<KnowledgeDistribution, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::NoTrials);
    }
    let n = params.n();
    let one_trial = |t: u64| -> usize {
        let mut rng = trial_rng(seed, t);
        let mut seen = vec![false; n];
        for _ in 0..k {
            let c = generate_challenge_with(scenario, params, opts.sampling, &mut rng);
            for &p in c.positions() {
                seen[p] = true;
            }
        }
        seen.iter().filter(|s| **s).count()
    };
    let tally = |mut acc: Vec<u64>, x: usize| {
        acc[x] += 1;
        acc
    };
    let counts: Vec<u64> = if opts.parallel {
        (0..trials)
            .into_par_iter()
            .map(one_trial)
            .fold(|| vec![0u64; n + 1], tally)
            .reduce(
                || vec![0u64; n + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    } else {
        (0..trials).map(one_trial).fold(vec![0u64; n + 1], tally)
    };
    Ok(counts_to_distribution(scenario, params, k, &counts, trials))
}

fn counts_to_distribution(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
    counts: &[u64],
    total: u64,
) -> KnowledgeDistribution {
    KnowledgeDistribution {
        scenario,
        params,
        k,
        probs: counts
            .iter()
            .map(|&c| ExactProbability::new(c, total).expect("count never exceeds total"))
            .collect(),
    }
}

/// Exact distribution of `X` by visiting every equally likely sequence of
/// `k` challenges, using [`DEFAULT_ENUMERATION_BUDGET`].
pub fn enumerate_exact(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
) -> Result<KnowledgeDistribution, ProtocolError> {
    enumerate_exact_with_budget(scenario, params, k, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_exact_with_budget(
    scenario: SamplingScenario,
    params: SchemeParams,
    k: u64,
    budget: u64,
) -> Result<KnowledgeDistribution, ProtocolError> {
    let challenges = all_challenges(scenario, params);
    let needed = BigUint::from(challenges.len()).pow(k as u32);
    if needed > BigUint::from(budget) {
        return Err(ProtocolError::BudgetExceeded {
            needed: needed.to_string(),
            budget,
        });
    }
    let n = params.n();
    let words = n.div_ceil(64);
    let masks: Vec<Vec<u64>> = challenges
        .iter()
        .map(|c| {
            let mut w = vec![0u64; words];
            for &p in c.positions() {
                w[p / 64] |= 1 << (p % 64);
            }
            w
        })
        .collect();

    fn visit(state: &[u64], depth: u64, masks: &[Vec<u64>], counts: &mut [u64]) {
        if depth == 0 {
            let x: u32 = state.iter().map(|w| w.count_ones()).sum();
            counts[x as usize] += 1;
            return;
        }
        let mut next = state.to_vec();
        for mask in masks {
            for ((dst, a), b) in next.iter_mut().zip(state).zip(mask) {
                *dst = a | b;
            }
            visit(&next, depth - 1, masks, counts);
        }
    }

    let mut counts = vec![0u64; n + 1];
    visit(&vec![0u64; words], k, &masks, &mut counts);
    let total = needed.to_u64().unwrap_or(u64::MAX);
    debug_assert_eq!(counts.iter().sum::<u64>(), total);
    Ok(counts_to_distribution(scenario, params, k, &counts, total))
}
