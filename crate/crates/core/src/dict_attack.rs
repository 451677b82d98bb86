//! Dictionary filtering from leaked response characters.
//!
//! A keylogger that sees responses but not challenges learns which
//! characters occur in the password (`S_P`), and possibly a few
//! characters together with their positions. A candidate survives a query
//! when its own character set contains `S_P` and it agrees with whatever
//! else is known:
//!
//! | experiment | known positions | length |
//! |------------|-----------------|--------|
//! | A          | yes             | no     |
//! | B          | no              | yes    |
//! | C          | yes             | yes    |
//!
//! Matching is case-sensitive and compares Unicode scalar values with no
//! normalization. Lengths and positions count characters, not bytes.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DictError;

/// Candidate passwords in input order, first occurrence of each kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    entries: Vec<String>,
    pub source: DictionarySource,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySource {
    pub path: Option<PathBuf>,
    pub lines: u64,
    /// Lines that were not valid UTF-8.
    pub skipped: u64,
    pub duplicates: u64,
    pub empty: u64,
}

impl Dictionary {
    /// Builds a dictionary from in-memory words, applying the same rules as
    /// [`load_dictionary`].
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut source = DictionarySource::default();
        let mut raw = Vec::new();
        for w in words {
            let w: String = w.into();
            source.lines += 1;
            if w.is_empty() {
                source.empty += 1;
            } else {
                raw.push(w);
            }
        }
        let entries = dedup_keep_first(raw, &mut source);
        Self { entries, source }
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// Sort indices instead of hashing owned strings so peak memory stays near
// one copy of the wordlist.
fn dedup_keep_first(raw: Vec<String>, source: &mut DictionarySource) -> Vec<String> {
    let mut order: Vec<u32> = (0..raw.len() as u32).collect();
    order.par_sort_unstable_by(|&a, &b| {
        raw[a as usize]
            .cmp(&raw[b as usize])
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; raw.len()];
    for w in order.windows(2) {
        if raw[w[0] as usize] == raw[w[1] as usize] {
            keep[w[1] as usize] = false;
        }
    }
    let before = raw.len();
    let entries: Vec<String> = raw
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect();
    source.duplicates += (before - entries.len()) as u64;
    entries
}

fn strip_terminator(line: &mut Vec<u8>) {
    if line.last() == Some(&b'\n') {
        line.pop();
        if line.last() == Some(&b'\r') {
            line.pop();
        }
    }
}

/// Reads one candidate per line.
///
/// Lines that are not UTF-8 are counted in [`DictionarySource::skipped`]
/// and dropped; empty lines and repeats are dropped too.
pub fn load_dictionary<R: BufRead>(mut reader: R) -> Result<Dictionary, DictError> {
    let mut source = DictionarySource::default();
    let mut raw = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) => {}
            Err(source_err) => {
                return Err(DictError::Io {
                    lines_read: source.lines,
                    entries: raw.len(),
                    source: source_err,
                })
            }
        }
        source.lines += 1;
        strip_terminator(&mut buf);
        if buf.is_empty() {
            source.empty += 1;
            continue;
        }
        match std::str::from_utf8(&buf) {
            Ok(s) => raw.push(s.to_owned()),
            Err(_) => source.skipped += 1,
        }
    }
    let entries = dedup_keep_first(raw, &mut source);
    Ok(Dictionary { entries, source })
}

pub fn load_dictionary_file(path: &Path) -> Result<Dictionary, DictError> {
    let file = std::fs::File::open(path).map_err(|e| DictError::Io {
        lines_read: 0,
        entries: 0,
        source: e,
    })?;
    let mut dict = load_dictionary(std::io::BufReader::with_capacity(1 << 20, file))?;
    dict.source.path = Some(path.to_path_buf());
    Ok(dict)
}

/// The set of distinct characters in `candidate`.
pub fn charset_of(candidate: &str) -> BTreeSet<char> {
    candidate.chars().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    /// Charset and known positions.
    A,
    /// Charset and length.
    B,
    /// Charset, length and known positions.
    C,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::A, Experiment::B, Experiment::C];

    fn uses_positions(self) -> bool {
        matches!(self, Experiment::A | Experiment::C)
    }

    fn uses_length(self) -> bool {
        matches!(self, Experiment::B | Experiment::C)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            other => Err(format!("unknown experiment {other:?}")),
        }
    }
}

/// How the leaked charset is compared with a candidate's charset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CharsetMatch {
    /// Every leaked character occurs in the candidate.
    #[default]
    Subset,
    /// The candidate uses exactly the leaked characters. Experimental.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterQuery {
    leaked_charset: BTreeSet<char>,
    known_positions: Vec<(usize, char)>,
    target_length: Option<usize>,
    length_tolerance: usize,
    experiment: Experiment,
    charset_match: CharsetMatch,
}

impl FilterQuery {
    /// Validates the field combination for `experiment`. Positions are
    /// 0-based character indices.
    pub fn new(
        experiment: Experiment,
        leaked_charset: impl IntoIterator<Item = char>,
        known_positions: Vec<(usize, char)>,
        target_length: Option<usize>,
        length_tolerance: usize,
    ) -> Result<Self, DictError> {
        let leaked_charset: BTreeSet<char> = leaked_charset.into_iter().collect();
        if experiment.uses_positions() && known_positions.is_empty() {
            return Err(DictError::Query(format!(
                "experiment {experiment} needs known positions"
            )));
        }
        if !experiment.uses_positions() && !known_positions.is_empty() {
            return Err(DictError::Query(format!(
                "experiment {experiment} takes no known positions"
            )));
        }
        if experiment.uses_length() && target_length.is_none() {
            return Err(DictError::Query(format!(
                "experiment {experiment} needs a target length"
            )));
        }
        let mut seen = HashSet::new();
        for &(i, c) in &known_positions {
            if !seen.insert(i) {
                return Err(DictError::Query(format!("position {i} given twice")));
            }
            if !leaked_charset.contains(&c) {
                return Err(DictError::Query(format!(
                    "known character {c:?} is missing from the leaked charset"
                )));
            }
        }
        let mut known_positions = known_positions;
        known_positions.sort_unstable();
        Ok(Self {
            leaked_charset,
            known_positions,
            // experiment A ignores any length it is given
            target_length: if experiment.uses_length() { target_length } else { None },
            length_tolerance,
            experiment,
            charset_match: CharsetMatch::Subset,
        })
    }

    /// Query for `experiment` derived from a password and chosen positions.
    pub fn from_password(
        experiment: Experiment,
        password: &str,
        positions: &[usize],
        length_tolerance: usize,
    ) -> Result<Self, DictError> {
        let chars: Vec<char> = password.chars().collect();
        let known = if experiment.uses_positions() {
            positions
                .iter()
                .map(|&i| {
                    chars.get(i).map(|&c| (i, c)).ok_or_else(|| {
                        DictError::Query(format!("position {i} beyond password length"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        Self::new(
            experiment,
            chars.iter().copied(),
            known,
            Some(chars.len()),
            length_tolerance,
        )
    }

    pub fn with_charset_match(mut self, mode: CharsetMatch) -> Self {
        self.charset_match = mode;
        self
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    pub fn leaked_charset(&self) -> &BTreeSet<char> {
        &self.leaked_charset
    }

    pub fn known_positions(&self) -> &[(usize, char)] {
        &self.known_positions
    }

    pub fn target_length(&self) -> Option<usize> {
        self.target_length
    }

    pub fn length_tolerance(&self) -> usize {
        self.length_tolerance
    }

    /// Same query with one more leaked character.
    pub fn with_extra_char(&self, c: char) -> Self {
        let mut q = self.clone();
        q.leaked_charset.insert(c);
        q
    }

    pub fn matcher(&self) -> Matcher<'_> {
        Matcher::new(self)
    }
}

/// A query compiled for fast per-candidate checks.
#[derive(Debug, Clone)]
pub struct Matcher<'q> {
    query: &'q FilterQuery,
    // bit c set iff ASCII char c is leaked; valid when `ascii_only`
    ascii_mask: u128,
    ascii_only: bool,
    length_band: Option<(usize, usize)>,
}

impl<'q> Matcher<'q> {
    fn new(query: &'q FilterQuery) -> Self {
        let ascii_only = query.leaked_charset.iter().all(|c| c.is_ascii())
            && query.known_positions.iter().all(|(_, c)| c.is_ascii());
        let ascii_mask = query
            .leaked_charset
            .iter()
            .filter(|c| c.is_ascii())
            .fold(0u128, |m, &c| m | 1u128 << (c as u32));
        let length_band = query.target_length.map(|len| {
            (
                len.saturating_sub(query.length_tolerance),
                len.saturating_add(query.length_tolerance),
            )
        });
        Self {
            query,
            ascii_mask,
            ascii_only,
            length_band,
        }
    }

    pub fn matches(&self, candidate: &str) -> bool {
        if candidate.is_ascii() {
            self.matches_ascii(candidate.as_bytes())
        } else {
            self.matches_general(candidate)
        }
    }

    fn matches_ascii(&self, bytes: &[u8]) -> bool {
        if !self.ascii_only {
            // some leaked character cannot occur in an ASCII candidate
            return false;
        }
        if let Some((lo, hi)) = self.length_band {
            if bytes.len() < lo || bytes.len() > hi {
                return false;
            }
        }
        for &(i, c) in &self.query.known_positions {
            if bytes.get(i) != Some(&(c as u8)) {
                return false;
            }
        }
        let seen = bytes.iter().fold(0u128, |m, &b| m | 1u128 << b);
        match self.query.charset_match {
            CharsetMatch::Subset => seen & self.ascii_mask == self.ascii_mask,
            CharsetMatch::Equal => seen == self.ascii_mask,
        }
    }

    fn matches_general(&self, candidate: &str) -> bool {
        let chars: Vec<char> = candidate.chars().collect();
        if let Some((lo, hi)) = self.length_band {
            if chars.len() < lo || chars.len() > hi {
                return false;
            }
        }
        for &(i, c) in &self.query.known_positions {
            if chars.get(i) != Some(&c) {
                return false;
            }
        }
        let set: BTreeSet<char> = chars.into_iter().collect();
        match self.query.charset_match {
            CharsetMatch::Subset => self.query.leaked_charset.is_subset(&set),
            CharsetMatch::Equal => self.query.leaked_charset == set,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub experiment: Experiment,
    pub survivors: Vec<String>,
    pub input_count: usize,
    pub elapsed: Duration,
}

impl FilterReport {
    pub fn survivor_count(&self) -> usize {
        self.survivors.len()
    }

    /// Fraction of the dictionary that survives.
    pub fn reduction_ratio(&self) -> f64 {
        if self.input_count == 0 {
            0.0
        } else {
            self.survivors.len() as f64 / self.input_count as f64
        }
    }

    pub fn entries_per_second(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.input_count as f64 / secs
        } else {
            f64::INFINITY
        }
    }
}

/// Whether [`filter_with`] spreads the scan over the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Sequential,
    Parallel,
}

/// Keeps the entries matching `query`, in dictionary order.
pub fn filter(query: &FilterQuery, dict: &Dictionary) -> FilterReport {
    filter_with(query, dict, ScanMode::Parallel)
}

pub fn filter_with(query: &FilterQuery, dict: &Dictionary, mode: ScanMode) -> FilterReport {
    let start = Instant::now();
    let matcher = query.matcher();
    let survivors: Vec<String> = match mode {
        ScanMode::Sequential => dict
            .entries
            .iter()
            .filter(|e| matcher.matches(e))
            .cloned()
            .collect(),
        // rayon keeps the input order when collecting into a Vec
        ScanMode::Parallel => dict
            .entries
            .par_iter()
            .with_min_len(4096)
            .filter(|e| matcher.matches(e))
            .cloned()
            .collect(),
    };
    FilterReport {
        experiment: query.experiment,
        survivors,
        input_count: dict.len(),
        elapsed: start.elapsed(),
    }
}

/// Filters a wordlist while reading it, holding only survivors in memory.
///
/// `input_count` in the returned report counts decodable, non-empty lines
/// (repeats included); survivors are de-duplicated.
pub fn filter_stream<R: BufRead>(
    query: &FilterQuery,
    mut reader: R,
) -> Result<(FilterReport, DictionarySource), DictError> {
    let start = Instant::now();
    let matcher = query.matcher();
    let mut source = DictionarySource::default();
    let mut seen = HashSet::new();
    let mut survivors = Vec::new();
    let mut scanned = 0usize;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                return Err(DictError::Io {
                    lines_read: source.lines,
                    entries: survivors.len(),
                    source: e,
                })
            }
        }
        source.lines += 1;
        strip_terminator(&mut buf);
        if buf.is_empty() {
            source.empty += 1;
            continue;
        }
        let Ok(word) = std::str::from_utf8(&buf) else {
            source.skipped += 1;
            continue;
        };
        scanned += 1;
        if matcher.matches(word) {
            if seen.insert(word.to_owned()) {
                survivors.push(word.to_owned());
            } else {
                source.duplicates += 1;
            }
        }
    }
    Ok((
        FilterReport {
            experiment: query.experiment,
            survivors,
            input_count: scanned,
            elapsed: start.elapsed(),
        },
        source,
    ))
}

/// Reports for experiments A, B and C run against one password.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// Sampled known positions, 0-based and ascending.
    pub positions: Vec<usize>,
    pub a: FilterReport,
    pub b: FilterReport,
    pub c: FilterReport,
}

impl SuiteReport {
    pub fn reports(&self) -> [&FilterReport; 3] {
        [&self.a, &self.b, &self.c]
    }
}

/// Samples `known_position_count` positions of `password` without
/// replacement and runs all three experiments.
pub fn experiment_suite<R: Rng + ?Sized>(
    password: &str,
    dict: &Dictionary,
    known_position_count: usize,
    length_tolerance: usize,
    rng: &mut R,
) -> Result<SuiteReport, DictError> {
    let positions = sample_known_positions(password.chars().count(), known_position_count, rng)?;
    experiment_suite_at(password, dict, &positions, length_tolerance)
}

/// `count` distinct positions below `len`, ascending.
pub fn sample_known_positions<R: Rng + ?Sized>(
    len: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>, DictError> {
    if count == 0 || count > len {
        return Err(DictError::Query(format!(
            "cannot sample {count} known positions from a password of length {len}"
        )));
    }
    let mut positions = index::sample(rng, len, count).into_vec();
    positions.sort_unstable();
    Ok(positions)
}

/// Runs all three experiments with the given known positions.
pub fn experiment_suite_at(
    password: &str,
    dict: &Dictionary,
    positions: &[usize],
    length_tolerance: usize,
) -> Result<SuiteReport, DictError> {
    let run = |e| -> Result<FilterReport, DictError> {
        let q = FilterQuery::from_password(e, password, positions, length_tolerance)?;
        Ok(filter(&q, dict))
    };
    Ok(SuiteReport {
        positions: positions.to_vec(),
        a: run(Experiment::A)?,
        b: run(Experiment::B)?,
        c: run(Experiment::C)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol_sim::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::io::Cursor;

    fn set(s: &str) -> BTreeSet<char> {
        s.chars().collect()
    }

    #[test]
    fn load_drops_duplicates() {
        let d = load_dictionary(Cursor::new("password\nbaseball\npassword\n")).unwrap();
        assert_eq!(d.entries(), ["password", "baseball"]);
        assert_eq!(d.source.duplicates, 1);
        let d = load_dictionary(Cursor::new("")).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.source.skipped, 0);
    }

    #[test]
    fn load_skips_undecodable_lines() {
        let mut bytes = Vec::new();
        for i in 0..10 {
            if i == 4 {
                bytes.extend_from_slice(b"bad\xff\xfeline\n");
            } else {
                bytes.extend_from_slice(format!("word{i}\r\n").as_bytes());
            }
        }
        let d = load_dictionary(Cursor::new(bytes)).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.source.skipped, 1);
        assert_eq!(d.entries()[0], "word0");
        assert_eq!(d.entries()[4], "word5");
    }

    #[test]
    fn load_reports_partial_progress_on_io_error() {
        struct Flaky(usize);
        impl std::io::Read for Flaky {
            fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
                if self.0 == 0 {
                    return Err(std::io::Error::other("disk gone"));
                }
                self.0 -= 1;
                buf[..4].copy_from_slice(b"abc\n");
                Ok(4)
            }
        }
        let err = load_dictionary(std::io::BufReader::with_capacity(4, Flaky(3))).unwrap_err();
        match err {
            DictError::Io { lines_read, entries, .. } => {
                assert_eq!(lines_read, 3);
                assert_eq!(entries, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn charset_examples() {
        assert_eq!(charset_of("password"), set("pawsord"));
        assert_eq!(charset_of("aaaa"), set("a"));
        assert!(charset_of("").is_empty());
        assert_ne!(charset_of("Aa"), set("a"));
    }

    #[test]
    fn synthetic_experiment_b() {
        let d = Dictionary::from_words(["abc", "abd", "bcd", "ab"]);
        let q = FilterQuery::new(Experiment::B, "ab".chars(), vec![], Some(3), 0).unwrap();
        assert_eq!(filter(&q, &d).survivors, ["abc", "abd"]);
        let q = FilterQuery::new(Experiment::B, "ab".chars(), vec![], Some(3), 1).unwrap();
        assert_eq!(filter(&q, &d).survivors, ["abc", "abd", "ab"]);
    }

    #[test]
    fn query_validation() {
        assert!(FilterQuery::new(Experiment::A, "ab".chars(), vec![], None, 0).is_err());
        assert!(FilterQuery::new(Experiment::B, "ab".chars(), vec![(0, 'a')], Some(2), 0).is_err());
        assert!(FilterQuery::new(Experiment::B, "ab".chars(), vec![], None, 0).is_err());
        assert!(FilterQuery::new(Experiment::C, "ab".chars(), vec![(0, 'a')], None, 0).is_err());
        assert!(FilterQuery::new(Experiment::A, "ab".chars(), vec![(0, 'z')], None, 0).is_err());
        assert!(FilterQuery::new(Experiment::A, "ab".chars(), vec![(0, 'a'), (0, 'b')], None, 0).is_err());
        let q = FilterQuery::new(Experiment::A, "ab".chars(), vec![(0, 'a')], Some(9), 0).unwrap();
        assert_eq!(q.target_length(), None);
    }

    #[test]
    fn positions_beyond_candidate_length_do_not_match() {
        let d = Dictionary::from_words(["ab", "abxxxxxxxb"]);
        let q = FilterQuery::new(Experiment::A, "ab".chars(), vec![(9, 'b')], None, 0).unwrap();
        assert_eq!(filter(&q, &d).survivors, ["abxxxxxxxb"]);
    }

    #[test]
    fn non_ascii_candidates() {
        let d = Dictionary::from_words(["żółw", "zolw", "wół"]);
        let q = FilterQuery::new(Experiment::C, "łw".chars(), vec![(3, 'w')], Some(4), 0).unwrap();
        assert_eq!(filter(&q, &d).survivors, ["żółw"]);
        let q = FilterQuery::new(Experiment::B, "lw".chars(), vec![], Some(4), 0).unwrap();
        assert_eq!(filter(&q, &d).survivors, ["zolw"]);
    }

    #[test]
    fn equality_mode() {
        let d = Dictionary::from_words(["abab", "abcd", "baba"]);
        let q = FilterQuery::new(Experiment::B, "ab".chars(), vec![], Some(4), 0)
            .unwrap()
            .with_charset_match(CharsetMatch::Equal);
        assert_eq!(filter(&q, &d).survivors, ["abab", "baba"]);
    }

    #[test]
    fn suite_on_singleton_dictionary() {
        let d = Dictionary::from_words(["dragon"]);
        let mut rng = SimRng::seed_from_u64(1);
        let s = experiment_suite("dragon", &d, 2, 0, &mut rng).unwrap();
        assert_eq!(s.positions.len(), 2);
        for r in s.reports() {
            assert_eq!(r.survivors, ["dragon"]);
        }
        assert!(experiment_suite("dragon", &d, 7, 0, &mut rng).is_err());
    }

    #[test]
    fn streaming_matches_loaded_scan() {
        let text = "admin\nadmin1\nnimda\nadmin\nxadmin\n\nmadin\n";
        let d = load_dictionary(Cursor::new(text)).unwrap();
        let q = FilterQuery::from_password(Experiment::B, "admin", &[], 0).unwrap();
        let (streamed, src) = filter_stream(&q, Cursor::new(text)).unwrap();
        assert_eq!(streamed.survivors, filter(&q, &d).survivors);
        assert_eq!(streamed.survivors, ["admin", "nimda", "madin"]);
        assert_eq!(src.empty, 1);
        assert_eq!(src.duplicates, 1);
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-e]{1,8}"
    }

    proptest! {
        #[test]
        fn intersection_law(words in prop::collection::vec(word(), 1..200), pick in any::<prop::sample::Index>(), seed: u64) {
            let d = Dictionary::from_words(words);
            let password = pick.get(d.entries()).clone();
            let k = password.chars().count().min(2);
            let mut rng = SimRng::seed_from_u64(seed);
            let s = experiment_suite(&password, &d, k, 0, &mut rng).unwrap();
            let b: HashSet<&String> = s.b.survivors.iter().collect();
            let expect: Vec<String> = s.a.survivors.iter().filter(|x| b.contains(x)).cloned().collect();
            prop_assert_eq!(&s.c.survivors, &expect);
            prop_assert!(s.c.survivor_count() <= s.a.survivor_count().min(s.b.survivor_count()));
            for r in s.reports() {
                prop_assert!(r.survivors.contains(&password));
            }
        }

        #[test]
        fn extra_leaked_char_never_adds(words in prop::collection::vec(word(), 1..200), leak in "[a-e]{0,3}", extra in "[a-f]", len in 1usize..8) {
            let d = Dictionary::from_words(words);
            let q = FilterQuery::new(Experiment::B, leak.chars(), vec![], Some(len), 0).unwrap();
            let q2 = q.with_extra_char(extra.chars().next().unwrap());
            let base = filter(&q, &d);
            let fewer = filter(&q2, &d);
            prop_assert!(fewer.survivor_count() <= base.survivor_count());
            prop_assert!(fewer.survivors.iter().all(|w| base.survivors.contains(w)));
        }

        #[test]
        fn parallel_equals_sequential(words in prop::collection::vec(word(), 0..3000), leak in "[a-e]{1,3}") {
            let d = Dictionary::from_words(words);
            let q = FilterQuery::new(Experiment::A, leak.chars(), vec![(0, leak.chars().next().unwrap())], None, 0).unwrap();
            prop_assert_eq!(
                filter_with(&q, &d, ScanMode::Parallel).survivors,
                filter_with(&q, &d, ScanMode::Sequential).survivors
            );
        }

        #[test]
        fn ascii_fast_path_agrees_with_general(words in prop::collection::vec("[a-d]{0,6}", 1..50), leak in "[a-d]{0,3}", pos in 0usize..6, len in 0usize..7, tol in 0usize..2) {
            let c = leak.chars().next();
            let known = c.map(|c| vec![(pos, c)]).unwrap_or_default();
            let exp = if known.is_empty() { Experiment::B } else { Experiment::C };
            let q = FilterQuery::new(exp, leak.chars(), known, Some(len), tol).unwrap();
            let m = q.matcher();
            for w in &words {
                prop_assert_eq!(m.matches(w), m.matches_general(w));
            }
        }
    }
}
