//! Shell-game simulation and a sound statistical cheating test.
//!
//! A dealer hides balls under three cups; each round the player picks a cup
//! `x` and observes whether it holds a ball. An honest dealer keeps at least
//! one ball in play, which forbids the all-empty outcome pattern and yields
//! the classical bound
//!
//! ```text
//! p(empty|1) + p(empty|2) + p(empty|3) <= 2.
//! ```
//!
//! A dealer who sometimes removes every ball after the choice can push the
//! sum of empty-rates above 2; [`cheat_test`] detects this from finite trial
//! data with a per-cup Hoeffding deviation bound and a union bound over the
//! three cups, so a `cheating_detected` verdict is wrong with probability at
//! most `1 - confidence`. Only the upper bound is tested: extra balls make
//! the game easier for the player and are not cheating against them.
//!
//! Outcome numbering matches the polytope modules: outcome 1 = empty cup
//! (miss), outcome 2 = ball found.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{LinearInequality, Rational, Sense};
use crate::scenario::{ConditionalProbabilityMatrix, Scenario};

/// Number of cups in the game.
pub const CUPS: u8 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShellGameError {
    #[error("honest strategies need between 1 and 3 balls, got {0}")]
    BadBallCount(u8),
    #[error("cheat probability must lie in [0, 1], got {0}")]
    BadCheatProbability(f64),
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    BadConfidence(f64),
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("trial {round} refers to cup {cup}, but cups are numbered 1-{CUPS}")]
    InvalidCup { round: u64, cup: u8 },
    #[error("no trials recorded for cup {0}; the test needs data on every cup")]
    NoTrials(u8),
}

/// What the player sees after lifting the chosen cup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Found,
    Empty,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Found => "found",
            Self::Empty => "empty",
        })
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "found" => Ok(Self::Found),
            "empty" => Ok(Self::Empty),
            other => Err(format!("unknown outcome '{other}' (use found|empty)")),
        }
    }
}

/// One round of play: which cup was lifted and what was underneath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub round: u64,
    pub cup: u8,
    pub outcome: Outcome,
}

/// How the simulated player picks a cup. The choice never depends on past
/// outcomes, so per-cup probabilities are well-defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chooser {
    UniformRandom,
    RoundRobin,
}

impl FromStr for Chooser {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform_random" => Ok(Self::UniformRandom),
            "round_robin" => Ok(Self::RoundRobin),
            other => Err(format!(
                "unknown chooser '{other}' (use uniform_random|round_robin)"
            )),
        }
    }
}

impl fmt::Display for Chooser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UniformRandom => "uniform_random",
            Self::RoundRobin => "round_robin",
        })
    }
}

/// How the dealer places balls each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DealerStrategy {
    /// A uniformly random subset of `balls` cups every round.
    HonestUniform { balls: u8 },
    /// Cycles deterministically through the size-`balls` subsets in
    /// lexicographic order (round `r` uses subset `(r - 1) mod count`).
    HonestFixedCounts { balls: u8 },
    /// Removes every ball: the empty subset each round.
    CheatRemove,
    /// With probability `cheat_prob` removes every ball, otherwise places a
    /// uniformly random subset of `balls` cups.
    Mixed { balls: u8, cheat_prob: f64 },
}

impl DealerStrategy {
    fn validate(&self) -> Result<(), ShellGameError> {
        let check_balls = |balls: u8| {
            if (1..=CUPS).contains(&balls) {
                Ok(())
            } else {
                Err(ShellGameError::BadBallCount(balls))
            }
        };
        match self {
            Self::HonestUniform { balls } | Self::HonestFixedCounts { balls } => check_balls(*balls),
            Self::CheatRemove => Ok(()),
            Self::Mixed { balls, cheat_prob } => {
                check_balls(*balls)?;
                if (0.0..=1.0).contains(cheat_prob) {
                    Ok(())
                } else {
                    Err(ShellGameError::BadCheatProbability(*cheat_prob))
                }
            }
        }
    }
}

/// All subsets of the cups `{1, 2, 3}` with `size` elements, in lexicographic
/// order, as membership masks indexed by cup - 1.
fn ball_subsets(size: u8) -> Vec<[bool; 3]> {
    let mut listed: Vec<Vec<u8>> = (1u8..8)
        .filter(|mask| mask.count_ones() == size as u32)
        .map(|mask| (1..=CUPS).filter(|cup| mask >> (cup - 1) & 1 == 1).collect())
        .collect();
    listed.sort();
    listed
        .into_iter()
        .map(|cups| {
            let mut flags = [false; 3];
            for cup in cups {
                flags[cup as usize - 1] = true;
            }
            flags
        })
        .collect()
}

/// Plays `rounds` rounds and returns the trial log.
///
/// Reproducible: the generator is seeded from `seed` and each round draws in
/// a fixed order — first the dealer (for `Mixed`, the cheat coin before the
/// placement), then the player's cup when the chooser is random.
pub fn simulate(
    strategy: &DealerStrategy,
    rounds: u64,
    seed: u64,
    chooser: Chooser,
) -> Result<Vec<TrialRecord>, ShellGameError> {
    strategy.validate()?;
    if rounds == 0 {
        return Err(ShellGameError::ZeroRounds);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let subsets = match strategy {
        DealerStrategy::HonestUniform { balls }
        | DealerStrategy::HonestFixedCounts { balls }
        | DealerStrategy::Mixed { balls, .. } => ball_subsets(*balls),
        DealerStrategy::CheatRemove => Vec::new(),
    };
    let mut log = Vec::with_capacity(rounds as usize);
    for round in 1..=rounds {
        let placement: [bool; 3] = match strategy {
            DealerStrategy::HonestUniform { .. } => subsets[rng.random_range(0..subsets.len())],
            DealerStrategy::HonestFixedCounts { .. } => {
                subsets[((round - 1) % subsets.len() as u64) as usize]
            }
            DealerStrategy::CheatRemove => [false; 3],
            DealerStrategy::Mixed { cheat_prob, .. } => {
                let cheat = rng.random::<f64>() < *cheat_prob;
                if cheat {
                    [false; 3]
                } else {
                    subsets[rng.random_range(0..subsets.len())]
                }
            }
        };
        let cup: u8 = match chooser {
            Chooser::UniformRandom => rng.random_range(1..=CUPS),
            Chooser::RoundRobin => ((round - 1) % CUPS as u64) as u8 + 1,
        };
        let outcome = if placement[cup as usize - 1] {
            Outcome::Found
        } else {
            Outcome::Empty
        };
        log.push(TrialRecord {
            round,
            cup,
            outcome,
        });
    }
    Ok(log)
}

/// Per-cup tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CupStats {
    pub trials: u64,
    pub found: u64,
}

/// Empirical conditional probabilities estimated from a trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    matrix: ConditionalProbabilityMatrix,
    counts: [CupStats; 3],
}

impl Estimate {
    /// The estimated distribution as exact rationals: row `x` is
    /// `[p(empty|x), p(found|x)]`.
    pub fn matrix(&self) -> &ConditionalProbabilityMatrix {
        &self.matrix
    }

    pub fn counts(&self) -> &[CupStats; 3] {
        &self.counts
    }

    /// `p̂(found|cup)` for a cup in `1..=3`.
    pub fn found_rate(&self, cup: u8) -> f64 {
        let s = self.counts[cup as usize - 1];
        s.found as f64 / s.trials as f64
    }

    /// `p̂(empty|cup)` for a cup in `1..=3`.
    pub fn miss_rate(&self, cup: u8) -> f64 {
        1.0 - self.found_rate(cup)
    }
}

/// Tallies a trial log into per-cup estimates.
///
/// Every cup must occur at least once; cups outside `1..=3` are rejected.
pub fn estimate(trials: &[TrialRecord]) -> Result<Estimate, ShellGameError> {
    let mut tally: BTreeMap<u8, CupStats> = BTreeMap::new();
    for t in trials {
        if !(1..=CUPS).contains(&t.cup) {
            return Err(ShellGameError::InvalidCup {
                round: t.round,
                cup: t.cup,
            });
        }
        let entry = tally.entry(t.cup).or_insert(CupStats {
            trials: 0,
            found: 0,
        });
        entry.trials += 1;
        if t.outcome == Outcome::Found {
            entry.found += 1;
        }
    }
    let mut counts = [CupStats {
        trials: 0,
        found: 0,
    }; 3];
    for cup in 1..=CUPS {
        counts[cup as usize - 1] = *tally
            .get(&cup)
            .ok_or(ShellGameError::NoTrials(cup))?;
    }
    let rows = counts
        .iter()
        .map(|s| {
            let found = Rational::new(BigInt::from(s.found), BigInt::from(s.trials));
            let empty = Rational::from_integer(BigInt::from(1)) - &found;
            vec![empty, found]
        })
        .collect();
    let matrix =
        ConditionalProbabilityMatrix::from_rows(rows).expect("tally rows are valid probabilities");
    Ok(Estimate { matrix, counts })
}

/// The inequality the cheating test checks: the sum of the three empty-rates
/// is classically at most 2 when at least one ball stays in play.
pub fn tsirelson_test_inequality() -> LinearInequality {
    LinearInequality::from_integers(&[1, 1, 1], Sense::Le, 2)
}

/// Outcome of the statistical test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    CheatingDetected,
}

impl Verdict {
    pub fn is_cheating(self) -> bool {
        self == Self::CheatingDetected
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::CheatingDetected => "cheating_detected",
        })
    }
}

/// Full record of a cheating test, sufficient to audit the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub counts: [CupStats; 3],
    /// Found-rates `p̂(found|x)` per cup.
    pub estimates: [f64; 3],
    /// `S`, the sum of empty-rates over the three cups.
    pub statistic: f64,
    /// Classical bound on `S` for an honest dealer.
    pub threshold: f64,
    /// Per-cup Hoeffding deviations at the requested confidence.
    pub epsilon: [f64; 3],
    pub confidence: f64,
    /// The inequality whose violation is being certified.
    pub inequality: LinearInequality,
    pub verdict: Verdict,
    /// Human-readable audit trail of the computation.
    pub certificate: String,
    /// Simulation seed, when the data came from [`simulate`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TestReport {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Tests whether the estimates certify cheating at the given confidence.
///
/// Each empty-rate gets a Hoeffding deviation `eps_x = sqrt(ln(3 / (1 -
/// confidence)) / (2 n_x))`; a union bound over the three cups makes `S -
/// sum(eps) > 2` a valid certificate at the stated confidence. The verdict is
/// one-sided: small `S` is never flagged.
pub fn cheat_test(est: &Estimate, confidence: f64) -> Result<TestReport, ShellGameError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ShellGameError::BadConfidence(confidence));
    }
    let inequality = tsirelson_test_inequality();
    let threshold = 2.0;
    let mut estimates = [0.0; 3];
    let mut epsilon = [0.0; 3];
    let mut statistic = 0.0;
    for cup in 1..=CUPS {
        let i = cup as usize - 1;
        let n = est.counts[i].trials as f64;
        estimates[i] = est.found_rate(cup);
        epsilon[i] = ((CUPS as f64 / (1.0 - confidence)).ln() / (2.0 * n)).sqrt();
        statistic += est.miss_rate(cup);
    }
    let margin = statistic - epsilon.iter().sum::<f64>();
    let verdict = if margin > threshold {
        Verdict::CheatingDetected
    } else {
        Verdict::Consistent
    };

    let mut certificate = String::new();
    certificate.push_str(&format!(
        "shell-game cheating test at confidence {confidence:.6}\n"
    ));
    certificate.push_str(&format!(
        "inequality under test (outcome 1 = empty cup): {}\n",
        inequality.render(&Scenario::new(2, 3).expect("three-cup scenario is valid"))
    ));
    for cup in 1..=CUPS {
        let i = cup as usize - 1;
        certificate.push_str(&format!(
            "cup {cup}: {} trials, {} found, empty-rate {:.6}, epsilon {:.6}\n",
            est.counts[i].trials,
            est.counts[i].found,
            est.miss_rate(cup),
            epsilon[i]
        ));
    }
    certificate.push_str(&format!(
        "S = {statistic:.6}; S - sum(epsilon) = {margin:.6} vs classical bound {threshold}\n"
    ));
    certificate.push_str(&format!("verdict: {verdict}\n"));

    Ok(TestReport {
        counts: est.counts,
        estimates,
        statistic,
        threshold,
        epsilon,
        confidence,
        inequality,
        verdict,
        certificate,
        seed: None,
    })
}

/// Writes a trial log as CSV with the header `round,x,outcome`.
pub fn write_trial_log(trials: &[TrialRecord], out: &mut impl io::Write) -> io::Result<()> {
    writeln!(out, "round,x,outcome")?;
    for t in trials {
        writeln!(out, "{},{},{}", t.round, t.cup, t.outcome)?;
    }
    Ok(())
}

/// A trial-log parse failure, located by 1-based line number (the header is
/// line 1).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct TrialLogError {
    pub line: usize,
    pub kind: TrialLogErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrialLogErrorKind {
    #[error("missing header line")]
    MissingHeader,
    #[error("expected header 'round,x,outcome', found '{0}'")]
    BadHeader(String),
    #[error("expected 3 comma-separated fields, found {0}")]
    FieldCount(usize),
    #[error("invalid round number '{0}'")]
    BadRound(String),
    #[error("invalid cup '{0}' (cups are numbered 1-3)")]
    BadCup(String),
    #[error("invalid outcome '{0}' (expected found|empty)")]
    BadOutcome(String),
}

/// Parses a trial-log CSV produced by [`write_trial_log`] (or by hand).
///
/// Accepts `\r\n` line endings and skips blank lines; everything else is
/// strict, and errors carry the offending line number.
pub fn parse_trial_log(input: &str) -> Result<Vec<TrialRecord>, TrialLogError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(TrialLogError {
        line: 1,
        kind: TrialLogErrorKind::MissingHeader,
    })?;
    if header.trim_end() != "round,x,outcome" {
        return Err(TrialLogError {
            line: 1,
            kind: TrialLogErrorKind::BadHeader(header.trim_end().to_string()),
        });
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let text = raw.trim_end();
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(TrialLogError {
                line,
                kind: TrialLogErrorKind::FieldCount(fields.len()),
            });
        }
        let round: u64 = fields[0].parse().map_err(|_| TrialLogError {
            line,
            kind: TrialLogErrorKind::BadRound(fields[0].to_string()),
        })?;
        if round == 0 {
            return Err(TrialLogError {
                line,
                kind: TrialLogErrorKind::BadRound(fields[0].to_string()),
            });
        }
        let cup: u8 = fields[1]
            .parse()
            .ok()
            .filter(|c| (1..=CUPS).contains(c))
            .ok_or(TrialLogError {
                line,
                kind: TrialLogErrorKind::BadCup(fields[1].to_string()),
            })?;
        let outcome: Outcome = fields[2].parse().map_err(|_| TrialLogError {
            line,
            kind: TrialLogErrorKind::BadOutcome(fields[2].to_string()),
        })?;
        records.push(TrialRecord {
            round,
            cup,
            outcome,
        });
    }
    Ok(records)
}
