//! Security analysis of partial-password authentication.
//!
//! A partial-password server asks for `m` characters at chosen positions of
//! an `n`-character secret instead of the whole secret. This crate provides:
//!
//! - [`combinatorics`]: exact binomial and multiset coefficients and an
//!   exact probability type.
//! - [`attack_model`]: the exact law of how many positions an eavesdropper
//!   knows after `k` recorded logins, the chance of answering the next
//!   challenge, and threshold search over both.
//! - [`protocol_sim`]: the login protocol itself, plus an exhaustive
//!   enumerator and a seeded Monte Carlo simulator used as oracles.
//! - [`credential_store`]: plaintext, hash-per-combination and
//!   key-service-encrypted server-side storage.
//! - [`dict_attack`]: wordlist filtering from leaked characters.
//! - [`cli`]: the `ppass` command-line front end.

pub mod attack_model;
pub mod cli;
pub mod combinatorics;
pub mod credential_store;
pub mod dict_attack;
pub mod error;
pub mod protocol_sim;

pub use attack_model::{
    expected_success, next_challenge_prob, recording_distribution, threshold_k,
    KnowledgeDistribution, SamplingScenario, SchemeParams, ThresholdMetric,
};
pub use combinatorics::{binom, multiset_coeff, ExactProbability};
pub use protocol_sim::{
    enumerate_exact, generate_challenge, simulate_recording, verify_response, Alphabet,
    AttackerKnowledge, Challenge, Password, Response, Verdict,
};
