//! The `ppass` command line.
//!
//! Everything lives here so the binary stays a one-liner and the commands
//! can be driven in-process from tests. Output formats:
//!
//! * `recording`: CSV `scenario,n,m,k,i,probability,probability_exact`,
//!   one row per non-zero `P(X = i)`, sorted by scenario, `k`, `i`.
//! * `next-challenge`: CSV `scenario,n,m,k,expected_success,expected_success_exact`.
//! * `threshold`: CSV `scenario,n,m,metric,target,k,value,value_exact`.
//! * `simulate`, `dict-filter` summaries: pretty-printed JSON.
//!
//! Decimal columns carry 12 significant digits in positional notation
//! (`0.722404806948`, `1.00000000000`); exact zero prints as `0`.
//!
//! Exit codes: 0 success, 1 verification or assertion failure, 2 usage
//! error, 3 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::attack_model::{
    expected_success_series, recording_series, threshold_k, SamplingScenario, SchemeParams,
    ThresholdMetric,
};
use crate::combinatorics::ExactProbability;
use crate::credential_store::{
    CredentialRecord, CredentialStore, DigestAlgorithm, KeyService, StorageBackend,
};
use crate::dict_attack::{
    filter_with, load_dictionary_file, sample_known_positions, CharsetMatch, Experiment,
    FilterQuery, FilterReport, ScanMode,
};
use crate::protocol_sim::{
    simulate_recording_with, Alphabet, Challenge, MultisetSampling, Password, Response, SimRng,
    SimulationOptions,
};
use crate::recording_distribution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Default environment variable holding the password for `enroll`,
/// `verify` and `dict-filter`.
pub const PASSWORD_ENV: &str = "PPASS_PASSWORD";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Failure(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ppass", version, about = "Partial-password security analysis")]
pub struct Cli {
    /// TOML file with default values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Read and print positions 0-based instead of 1-based.
    #[arg(long, global = true)]
    pub zero_based: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact distribution of known positions after k recorded pairs.
    Recording(RecordingArgs),
    /// Expected next-challenge success for both scenarios.
    NextChallenge(NextChallengeArgs),
    /// Smallest k reaching a target probability.
    Threshold(ThresholdArgs),
    /// Monte Carlo recording simulation compared with the exact law.
    Simulate(SimulateArgs),
    /// Create a credential record.
    Enroll(EnrollArgs),
    /// Check a response against a credential record.
    Verify(VerifyArgs),
    /// Filter a wordlist with leaked characters.
    DictFilter(DictFilterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ScenarioChoice {
    A,
    B,
    Both,
}

impl ScenarioChoice {
    fn scenarios(self) -> Vec<SamplingScenario> {
        match self {
            ScenarioChoice::A => vec![SamplingScenario::WithoutReplacement],
            ScenarioChoice::B => vec![SamplingScenario::WithReplacement],
            ScenarioChoice::Both => SamplingScenario::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Password length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Positions per challenge.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecordingArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub kmax: Option<u64>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioChoice>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct NextChallengeArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub kmax: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Full,
    Next,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Target probability, decimal or fraction (`0.70`, `7/10`).
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value = "full")]
    pub metric: MetricChoice,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioChoice>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub k: u64,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioChoice>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 1 if the total variation distance exceeds this.
    #[arg(long)]
    pub assert_tvd: Option<f64>,
    /// model-mismatch: draw with-replacement positions independently.
    #[arg(long)]
    pub iid_positions: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PasswordSource {
    /// Environment variable holding the password; falls back to one line
    /// from standard input when unset.
    #[arg(long, default_value = PASSWORD_ENV)]
    pub password_env: String,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// Record file to write.
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long, default_value = "hash-per-combination")]
    pub backend: StorageBackend,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// `printable`, `alphanumeric`, `numeric`, or a literal symbol list.
    #[arg(long, default_value = "printable")]
    pub alphabet: String,
    #[arg(long, default_value = "sha256")]
    pub digest: String,
    /// Key-service state file; created when absent.
    #[arg(long)]
    pub keystore: Option<PathBuf>,
    /// Seed for salts, nonces and keys; fresh entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub password: PasswordSource,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub record: PathBuf,
    /// Comma-separated positions, 1-based unless --zero-based.
    #[arg(long)]
    pub challenge: String,
    #[arg(long)]
    pub response: String,
    #[arg(long)]
    pub keystore: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentChoice {
    A,
    B,
    C,
    All,
}

#[derive(Debug, Args)]
pub struct DictFilterArgs {
    #[arg(long)]
    pub wordlist: PathBuf,
    #[arg(long, value_enum, default_value = "b")]
    pub experiment: ExperimentChoice,
    /// Derive the query from the password in this environment variable.
    #[arg(long, conflicts_with_all = ["charset", "length", "known"])]
    pub password_env: Option<String>,
    /// Leaked characters.
    #[arg(long)]
    pub charset: Option<String>,
    #[arg(long)]
    pub length: Option<usize>,
    /// Known characters as `pos:char` pairs, comma separated.
    #[arg(long)]
    pub known: Option<String>,
    /// How many positions to sample when deriving from a password.
    #[arg(long, default_value_t = 2)]
    pub positions: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tolerance: Option<usize>,
    /// Require the candidate charset to equal the leaked one. Experimental.
    #[arg(long)]
    pub charset_equal: bool,
    /// Worker threads; 1 scans sequentially.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Survivor list destination (default standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary document destination.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Include wall-clock timing in the summary (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub kmax: Option<u64>,
    pub scenario: Option<ScenarioChoice>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub tolerance: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

struct Ctx<'a> {
    config: FileConfig,
    zero_based: bool,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    stdin: &'a mut dyn BufRead,
}

impl Ctx<'_> {
    fn params(&self, s: &SchemeArgs) -> Result<SchemeParams, CliError> {
        let n = s.n.or(self.config.n).ok_or_else(|| usage("--n is required"))?;
        let m = s.m.or(self.config.m).ok_or_else(|| usage("--m is required"))?;
        SchemeParams::new(n, m).map_err(usage)
    }

    fn emit(&mut self, out: Option<&Path>, text: &str) -> Result<(), CliError> {
        match out {
            Some(path) => fs::write(path, text).map_err(|e| io_err(format!("{}: {e}", path.display()))),
            None => self.stdout.write_all(text.as_bytes()).map_err(io_err),
        }
    }

    fn read_password(&mut self, var: &str) -> Result<String, CliError> {
        if let Ok(v) = std::env::var(var) {
            return Ok(v);
        }
        writeln!(self.stderr, "password ({var} unset), reading one line from stdin:").map_err(io_err)?;
        let mut line = String::new();
        self.stdin.read_line(&mut line).map_err(io_err)?;
        let line = line.trim_end_matches(['\n', '\r']).to_string();
        if line.is_empty() {
            return Err(usage(format!("no password in ${var} or on stdin")));
        }
        Ok(line)
    }

    fn to_display(&self, p: usize) -> usize {
        if self.zero_based {
            p
        } else {
            p + 1
        }
    }

    fn parse_display(&self, p: usize) -> Result<usize, CliError> {
        if self.zero_based {
            Ok(p)
        } else {
            p.checked_sub(1).ok_or_else(|| usage("positions are 1-based; 0 is invalid"))
        }
    }
}

/// Formats a probability with 12 significant digits.
pub fn decimal12(p: &ExactProbability) -> String {
    let x = p.to_f64();
    if p.is_zero() {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(
    args: I,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    stdin: &mut dyn BufRead,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let config = match cli.config.as_deref().map(FileConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            return e.code();
        }
    };
    let mut ctx = Ctx {
        config,
        zero_based: cli.zero_based,
        stdout,
        stderr,
        stdin,
    };
    let result = match &cli.command {
        Command::Recording(a) => cmd_recording(&mut ctx, a),
        Command::NextChallenge(a) => cmd_next_challenge(&mut ctx, a),
        Command::Threshold(a) => cmd_threshold(&mut ctx, a),
        Command::Simulate(a) => cmd_simulate(&mut ctx, a),
        Command::Enroll(a) => cmd_enroll(&mut ctx, a),
        Command::Verify(a) => cmd_verify(&mut ctx, a),
        Command::DictFilter(a) => cmd_dict_filter(&mut ctx, a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {}", e.message());
            e.code()
        }
    }
}

/// Entry point for the binary.
pub fn main_with_env() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let stdin = io::stdin();
    run(
        std::env::args_os(),
        &mut stdout.lock(),
        &mut stderr.lock(),
        &mut stdin.lock(),
    )
}

fn cmd_recording(ctx: &mut Ctx<'_>, a: &RecordingArgs) -> Result<(), CliError> {
    let params = ctx.params(&a.scheme)?;
    let kmax = a.kmax.or(ctx.config.kmax).unwrap_or(20);
    let choice = a.scenario.or(ctx.config.scenario).unwrap_or(ScenarioChoice::A);
    let mut out = String::from("scenario,n,m,k,i,probability,probability_exact\n");
    for scenario in choice.scenarios() {
        for dist in recording_series(scenario, params, kmax) {
            for (i, p) in dist.probs.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    scenario,
                    params.n(),
                    params.m(),
                    dist.k,
                    i,
                    decimal12(p),
                    p
                ));
            }
        }
    }
    ctx.emit(a.output.out.as_deref(), &out)
}

fn cmd_next_challenge(ctx: &mut Ctx<'_>, a: &NextChallengeArgs) -> Result<(), CliError> {
    let params = ctx.params(&a.scheme)?;
    let kmax = a.kmax.or(ctx.config.kmax).unwrap_or(20);
    let mut out = String::from("scenario,n,m,k,expected_success,expected_success_exact\n");
    for scenario in SamplingScenario::ALL {
        for (k, v) in expected_success_series(scenario, params, kmax).iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                scenario,
                params.n(),
                params.m(),
                k,
                decimal12(v),
                v
            ));
        }
    }
    ctx.emit(a.output.out.as_deref(), &out)
}

fn cmd_threshold(ctx: &mut Ctx<'_>, a: &ThresholdArgs) -> Result<(), CliError> {
    let params = ctx.params(&a.scheme)?;
    let target = ExactProbability::parse(&a.target).map_err(usage)?;
    let metric = match a.metric {
        MetricChoice::Full => ThresholdMetric::FullReconstruction,
        MetricChoice::Next => ThresholdMetric::NextChallenge,
    };
    let choice = a.scenario.or(ctx.config.scenario).unwrap_or(ScenarioChoice::Both);
    let mut out = String::from("scenario,n,m,metric,target,k,value,value_exact\n");
    for scenario in choice.scenarios() {
        let k = threshold_k(scenario, params, &target, metric).map_err(|e| match e {
            crate::error::ModelError::DidNotReachTarget { .. } => CliError::Failure(e.to_string()),
            other => usage(other),
        })?;
        let value = match metric {
            ThresholdMetric::FullReconstruction => {
                recording_distribution(scenario, params, k).full_reconstruction().clone()
            }
            ThresholdMetric::NextChallenge => crate::expected_success(scenario, params, k),
        };
        let metric_name = match metric {
            ThresholdMetric::FullReconstruction => "full",
            ThresholdMetric::NextChallenge => "next",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            scenario,
            params.n(),
            params.m(),
            metric_name,
            target,
            k,
            decimal12(&value),
            value
        ));
    }
    ctx.emit(a.output.out.as_deref(), &out)
}

#[derive(Debug, Serialize)]
struct SimulationRow {
    i: usize,
    count: String,
    empirical: f64,
    exact: String,
    exact_decimal: f64,
}

#[derive(Debug, Serialize)]
struct SimulationReport {
    scenario: String,
    n: usize,
    m: usize,
    k: u64,
    trials: u64,
    seed: u64,
    sampling: MultisetSampling,
    total_variation_distance: f64,
    tvd_threshold: Option<f64>,
    tvd_within_threshold: Option<bool>,
    distribution: Vec<SimulationRow>,
}

fn cmd_simulate(ctx: &mut Ctx<'_>, a: &SimulateArgs) -> Result<(), CliError> {
    let params = ctx.params(&a.scheme)?;
    let scenario = match a.scenario.or(ctx.config.scenario).unwrap_or(ScenarioChoice::A) {
        ScenarioChoice::A => SamplingScenario::WithoutReplacement,
        ScenarioChoice::B => SamplingScenario::WithReplacement,
        ScenarioChoice::Both => return Err(usage("simulate takes a single scenario")),
    };
    let trials = a.trials.or(ctx.config.trials).unwrap_or(100_000);
    let seed = a.seed.or(ctx.config.seed).unwrap_or(0);
    let sampling = if a.iid_positions {
        MultisetSampling::IidPositions
    } else {
        MultisetSampling::UniformMultiset
    };
    let empirical = simulate_recording_with(
        scenario,
        params,
        a.k,
        trials,
        seed,
        SimulationOptions {
            sampling,
            parallel: true,
        },
    )
    .map_err(usage)?;
    let exact = recording_distribution(scenario, params, a.k);
    let freqs: Vec<f64> = empirical.probs.iter().map(|p| p.to_f64()).collect();
    let tvd = exact.total_variation(&freqs);
    let within = a.assert_tvd.map(|t| tvd <= t);
    let report = SimulationReport {
        scenario: scenario.label().to_string(),
        n: params.n(),
        m: params.m(),
        k: a.k,
        trials,
        seed,
        sampling,
        total_variation_distance: tvd,
        tvd_threshold: a.assert_tvd,
        tvd_within_threshold: within,
        distribution: empirical
            .probs
            .iter()
            .zip(&exact.probs)
            .enumerate()
            .map(|(i, (e, x))| SimulationRow {
                i,
                count: (e.as_rational() * num_rational::BigRational::from_integer(trials.into()))
                    .to_integer()
                    .to_string(),
                empirical: e.to_f64(),
                exact: x.to_string(),
                exact_decimal: x.to_f64(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(io_err)? + "\n";
    ctx.emit(a.output.out.as_deref(), &text)?;
    if within == Some(false) {
        return Err(CliError::Failure(format!(
            "total variation distance {tvd} exceeds {}",
            a.assert_tvd.unwrap_or_default()
        )));
    }
    Ok(())
}

fn parse_alphabet(spec: &str) -> Result<Alphabet, CliError> {
    match spec {
        "printable" => Ok(Alphabet::printable_ascii()),
        "alphanumeric" => Ok(Alphabet::alphanumeric()),
        "numeric" => Ok(Alphabet::numeric()),
        literal => Alphabet::new(literal.chars()).map_err(usage),
    }
}

fn open_keystore(path: Option<&Path>, rng: &mut SimRng, create: bool) -> Result<KeyService, CliError> {
    let path = path.ok_or_else(|| usage("--keystore is required for the encrypted backend"))?;
    match fs::read_to_string(path) {
        Ok(text) => KeyService::load_state(&text).map_err(usage),
        Err(e) if e.kind() == io::ErrorKind::NotFound && create => {
            let ks = KeyService::generate(rng);
            fs::write(path, ks.save_state()).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            Ok(ks)
        }
        Err(e) => Err(io_err(format!("{}: {e}", path.display()))),
    }
}

fn cmd_enroll(ctx: &mut Ctx<'_>, a: &EnrollArgs) -> Result<(), CliError> {
    let text = ctx.read_password(&a.password.password_env)?;
    let alphabet = parse_alphabet(&a.alphabet)?;
    let password = Password::new(&text, &alphabet).map_err(usage)?;
    let n = a.scheme.n.or(ctx.config.n).unwrap_or(password.len());
    let m = a.scheme.m.or(ctx.config.m).ok_or_else(|| usage("--m is required"))?;
    let params = SchemeParams::new(n, m).map_err(usage)?;
    let mut rng = match a.seed.or(ctx.config.seed) {
        Some(seed) => SimRng::seed_from_u64(seed),
        None => SimRng::from_entropy(),
    };
    let digest = DigestAlgorithm::from_name(&a.digest).map_err(usage)?;
    let keystore = if a.backend == StorageBackend::EncryptedWithKeyService {
        Some(open_keystore(a.keystore.as_deref(), &mut rng, true)?)
    } else {
        None
    };
    let mut store = CredentialStore::new().with_digest(digest);
    if let Some(ks) = &keystore {
        store = store.with_key_service(ks);
    }
    let record = store
        .enroll(&password, params, a.backend, &mut rng)
        .map_err(usage)?;
    fs::write(&a.record, record.to_document())
        .map_err(|e| io_err(format!("{}: {e}", a.record.display())))?;
    writeln!(
        ctx.stderr,
        "enrolled {} record (n={}, m={}) to {}",
        a.backend,
        params.n(),
        params.m(),
        a.record.display()
    )
    .map_err(io_err)
}

fn cmd_verify(ctx: &mut Ctx<'_>, a: &VerifyArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.record)
        .map_err(|e| io_err(format!("{}: {e}", a.record.display())))?;
    let record = CredentialRecord::from_document(&text).map_err(usage)?;
    let positions = a
        .challenge
        .split(',')
        .map(|s| {
            let p: usize = s.trim().parse().map_err(|_| usage(format!("bad position {s:?}")))?;
            ctx.parse_display(p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut sorted = positions.clone();
    sorted.sort_unstable();
    let scenario = if sorted.windows(2).any(|w| w[0] == w[1]) {
        SamplingScenario::WithReplacement
    } else {
        SamplingScenario::WithoutReplacement
    };
    // align response characters with the sorted challenge
    let chars: Vec<char> = a.response.chars().collect();
    if chars.len() != positions.len() {
        return Err(usage(format!(
            "response has {} characters for {} positions",
            chars.len(),
            positions.len()
        )));
    }
    let mut pairs: Vec<(usize, char)> = positions.into_iter().zip(chars).collect();
    pairs.sort_by_key(|&(p, _)| p);
    let challenge = Challenge::new(scenario, record.params, pairs.iter().map(|p| p.0).collect())
        .map_err(usage)?;
    let response = Response::for_challenge(&challenge, pairs.iter().map(|p| p.1))
        .map_err(|e| CliError::Failure(e.to_string()));
    let verdict = match response {
        Ok(response) => {
            let keystore = if record.backend() == StorageBackend::EncryptedWithKeyService {
                let mut rng = SimRng::seed_from_u64(0);
                Some(open_keystore(a.keystore.as_deref(), &mut rng, false)?)
            } else {
                None
            };
            let mut store = CredentialStore::new();
            if let Some(ks) = &keystore {
                store = store.with_key_service(ks);
            }
            store.verify(&record, &challenge, &response).map_err(usage)?
        }
        // inconsistent answers to a repeated position can never be right
        Err(_) => crate::protocol_sim::Verdict::Reject,
    };
    writeln!(ctx.stdout, "{verdict}").map_err(io_err)?;
    if verdict.is_accept() {
        Ok(())
    } else {
        Err(CliError::Failure("response rejected".into()))
    }
}

#[derive(Debug, Serialize)]
struct WordlistSummary {
    path: String,
    lines: u64,
    entries: usize,
    skipped_undecodable: u64,
    duplicates: u64,
    empty: u64,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary {
    experiment: Experiment,
    survivors: usize,
    input: usize,
    reduction_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries_per_second: Option<f64>,
}

#[derive(Debug, Serialize)]
struct QuerySummary {
    charset: String,
    length: Option<usize>,
    tolerance: usize,
    known_positions: Vec<(usize, char)>,
    position_base: u8,
    charset_match: CharsetMatch,
}

#[derive(Debug, Serialize)]
struct DictSummary {
    seed: Option<u64>,
    workers: Option<usize>,
    sampled_positions: Option<Vec<usize>>,
    query: QuerySummary,
    wordlist: WordlistSummary,
    experiments: Vec<ExperimentSummary>,
}

fn parse_known(ctx: &Ctx<'_>, spec: &str) -> Result<Vec<(usize, char)>, CliError> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (pos, ch) = item
                .split_once(':')
                .ok_or_else(|| usage(format!("known position {item:?} must be pos:char")))?;
            let pos: usize = pos.trim().parse().map_err(|_| usage(format!("bad position {pos:?}")))?;
            let mut chars = ch.chars();
            let c = chars.next().ok_or_else(|| usage("missing known character"))?;
            if chars.next().is_some() {
                return Err(usage(format!("{ch:?} is not a single character")));
            }
            Ok((ctx.parse_display(pos)?, c))
        })
        .collect()
}

fn cmd_dict_filter(ctx: &mut Ctx<'_>, a: &DictFilterArgs) -> Result<(), CliError> {
    let tolerance = a.tolerance.or(ctx.config.tolerance).unwrap_or(0);
    let seed = a.seed.or(ctx.config.seed);
    let experiments: Vec<Experiment> = match a.experiment {
        ExperimentChoice::A => vec![Experiment::A],
        ExperimentChoice::B => vec![Experiment::B],
        ExperimentChoice::C => vec![Experiment::C],
        ExperimentChoice::All => Experiment::ALL.to_vec(),
    };
    let mode = match a.workers {
        Some(1) => ScanMode::Sequential,
        _ => ScanMode::Parallel,
    };
    let charset_match = if a.charset_equal {
        CharsetMatch::Equal
    } else {
        CharsetMatch::Subset
    };

    let dict = load_dictionary_file(&a.wordlist).map_err(io_err)?;

    let pool = match a.workers {
        Some(w) if w > 1 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(io_err)?,
        ),
        _ => None,
    };
    let run_query = |q: &FilterQuery| -> FilterReport {
        let q = q.clone().with_charset_match(charset_match);
        match &pool {
            Some(pool) => pool.install(|| filter_with(&q, &dict, mode)),
            None => filter_with(&q, &dict, mode),
        }
    };

    let (reports, sampled, query_summary) = if let Some(var) = &a.password_env {
        let password = std::env::var(var)
            .map_err(|_| usage(format!("environment variable {var} is not set")))?;
        let len = password.chars().count();
        let needs_positions = experiments.iter().any(|e| *e != Experiment::B);
        let positions = if needs_positions {
            let seed = seed.ok_or_else(|| usage("--seed is required to sample known positions"))?;
            let mut rng = SimRng::seed_from_u64(seed);
            sample_known_positions(len, a.positions, &mut rng).map_err(usage)?
        } else {
            Vec::new()
        };
        let chars: Vec<char> = password.chars().collect();
        let mut reports = Vec::new();
        for &e in &experiments {
            let q = FilterQuery::from_password(e, &password, &positions, tolerance).map_err(usage)?;
            reports.push(run_query(&q));
        }
        let charset: String = crate::dict_attack::charset_of(&password).into_iter().collect();
        let known = positions.iter().map(|&p| (ctx.to_display(p), chars[p])).collect();
        (
            reports,
            needs_positions.then(|| positions.iter().map(|&p| ctx.to_display(p)).collect()),
            QuerySummary {
                charset,
                length: Some(len),
                tolerance,
                known_positions: known,
                position_base: if ctx.zero_based { 0 } else { 1 },
                charset_match,
            },
        )
    } else {
        let charset = a
            .charset
            .clone()
            .ok_or_else(|| usage("give --password-env or --charset"))?;
        let known = a.known.as_deref().map(|k| parse_known(ctx, k)).transpose()?.unwrap_or_default();
        let mut reports = Vec::new();
        for &e in &experiments {
            let positions = if e == Experiment::B { Vec::new() } else { known.clone() };
            let q = FilterQuery::new(e, charset.chars(), positions, a.length, tolerance).map_err(usage)?;
            reports.push(run_query(&q));
        }
        let set: String = crate::dict_attack::charset_of(&charset).into_iter().collect();
        (
            reports,
            None,
            QuerySummary {
                charset: set,
                length: a.length,
                tolerance,
                known_positions: known.iter().map(|&(p, c)| (ctx.to_display(p), c)).collect(),
                position_base: if ctx.zero_based { 0 } else { 1 },
                charset_match,
            },
        )
    };

    let mut survivors = String::new();
    for r in &reports {
        for w in &r.survivors {
            if reports.len() > 1 {
                survivors.push_str(&format!("{}\t{w}\n", r.experiment));
            } else {
                survivors.push_str(w);
                survivors.push('\n');
            }
        }
    }
    ctx.emit(a.out.as_deref(), &survivors)?;

    for r in &reports {
        writeln!(
            ctx.stderr,
            "experiment {}: {} of {} survive ({:.0} entries/s)",
            r.experiment,
            r.survivor_count(),
            r.input_count,
            r.entries_per_second()
        )
        .map_err(io_err)?;
    }

    let summary = DictSummary {
        seed,
        workers: a.workers,
        sampled_positions: sampled,
        query: query_summary,
        wordlist: WordlistSummary {
            path: a.wordlist.display().to_string(),
            lines: dict.source.lines,
            entries: dict.len(),
            skipped_undecodable: dict.source.skipped,
            duplicates: dict.source.duplicates,
            empty: dict.source.empty,
        },
        experiments: reports
            .iter()
            .map(|r| ExperimentSummary {
                experiment: r.experiment,
                survivors: r.survivor_count(),
                input: r.input_count,
                reduction_ratio: r.reduction_ratio(),
                elapsed_seconds: a.timing.then_some(r.elapsed.as_secs_f64()),
                entries_per_second: a.timing.then(|| r.entries_per_second()),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(io_err)? + "\n";
    match &a.summary {
        Some(path) => fs::write(path, text).map_err(|e| io_err(format!("{}: {e}", path.display()))),
        None => ctx.stderr.write_all(text.as_bytes()).map_err(io_err),
    }
}
