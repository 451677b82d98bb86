use thiserror::Error;

use crate::combinatorics::ExactProbability;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {0} is outside [0, 1]")]
    OutOfUnitInterval(String),
    #[error("cannot parse {0:?} as an exact probability")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("invalid scheme parameters n={n}, m={m}: need 1 <= m <= n")]
    Invalid { n: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("known-position count {i} exceeds password length {n}")]
    KnownPositionsOutOfRange { i: usize, n: usize },
    #[error("target {0} must lie strictly between 0 and 1")]
    TargetOutOfRange(ExactProbability),
    #[error("did not reach target after {steps} steps (last value {last})")]
    DidNotReachTarget { steps: u64, last: ExactProbability },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("alphabet must be non-empty with distinct symbols")]
    InvalidAlphabet,
    #[error("password must contain at least one character")]
    EmptyPassword,
    #[error("character {0:?} is not in the alphabet")]
    NotInAlphabet(char),
    #[error("response has {response} characters but the challenge has {challenge} positions")]
    LengthMismatch { challenge: usize, response: usize },
    #[error("position {position} is out of range for length {n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("challenge has {got} positions, expected {expected}")]
    WrongChallengeSize { expected: usize, got: usize },
    #[error("without-replacement challenge repeats position {0}")]
    RepeatedPosition(usize),
    #[error("repeated position {0} answered with different characters")]
    InconsistentResponse(usize),
    #[error("enumeration needs {needed} sequences, budget is {budget}")]
    BudgetExceeded { needed: String, budget: u64 },
    #[error("trial count must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("password has {got} characters, scheme expects {expected}")]
    PasswordLength { expected: usize, got: usize },
    #[error("challenge does not fit the record's scheme: {0}")]
    ChallengeShape(String),
    #[error("hash-per-combination records only answer distinct-position challenges")]
    UnsupportedChallenge,
    #[error("record integrity check failed: {0}")]
    Integrity(String),
    #[error("encrypted backend needs a key service")]
    MissingKeyService,
    #[error("key service has no key {0:?}")]
    UnknownKey(String),
    #[error("unknown digest algorithm {0:?}")]
    UnknownDigest(String),
    #[error("{0} combinations exceed the per-record limit")]
    TooManyCombinations(String),
    #[error("positions are encoded as one octet; n={0} is too long")]
    PositionEncoding(usize),
    #[error("record format error: {0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum DictError {
    #[error("reading wordlist failed after {lines_read} lines ({entries} entries kept): {source}")]
    Io {
        lines_read: u64,
        entries: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed query: {0}")]
    Query(String),
}
