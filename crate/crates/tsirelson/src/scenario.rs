//! Measurement scenarios and constrained classical models.
//!
//! A [`Scenario`] fixes one observable with `A >= 2` outcomes, measured at one
//! of `X >= 1` settings. An [`OutcomePattern`] assigns one outcome to every
//! setting; a classical (hidden-variable) description of the experiment is a
//! probability distribution over patterns — a [`GlobalDistribution`]. The
//! observed data is the conditional probability matrix `p(a|x)`, obtained from
//! a global distribution by [`marginalize`].
//!
//! A [`ConstraintSet`] declares certain patterns impossible (zero weight). The
//! central question — does a given `p(a|x)` admit a global distribution
//! supported on the allowed patterns? — is answered exactly by
//! [`has_constrained_model`], which returns either an explicit model or a
//! separating inequality certifying that none exists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp;
use crate::polytope::{LinearInequality, Rational, Sense};

/// Guard on the size of the pattern space `A^X` for operations that enumerate
/// or materialize all patterns.
pub const MAX_PATTERNS: u64 = 1 << 22;

/// Absolute tolerance on normalization sums (row sums of a conditional matrix,
/// total weight of a global distribution). Individual entries are validated
/// against `[0, 1]` exactly.
pub fn normalization_tolerance() -> &'static Rational {
    static TOL: OnceLock<Rational> = OnceLock::new();
    TOL.get_or_init(|| Rational::new(BigInt::one(), BigInt::from(10u64).pow(12)))
}

/// Errors from scenario construction, validation, and model checking.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario needs at least 2 outcomes, got {0}")]
    TooFewOutcomes(u32),
    #[error("scenario supports at most 255 outcomes, got {0}")]
    TooManyOutcomes(u32),
    #[error("scenario needs at least 1 setting, got {0}")]
    TooFewSettings(u32),
    #[error("pattern {pattern} has {got} letters, expected one per setting ({expected})")]
    PatternLength {
        pattern: String,
        expected: u32,
        got: usize,
    },
    #[error("pattern {pattern} contains letter {letter}, outside 1..={outcomes}")]
    PatternLetter {
        pattern: String,
        letter: u8,
        outcomes: u32,
    },
    #[error("empty pattern token")]
    EmptyPattern,
    #[error("pattern token '{0}' is not a string of digits 1-9")]
    PatternToken(String),
    #[error("pattern {pattern} has negative weight {weight}")]
    NegativeWeight { pattern: String, weight: String },
    #[error("global weights sum to {0}, expected 1 within 1e-12")]
    WeightSum(String),
    #[error("row for setting {setting} sums to {sum}, expected 1 within 1e-12")]
    RowSum { setting: u32, sum: String },
    #[error("entry p({outcome}|{setting}) = {value} lies outside [0, 1]")]
    EntryRange {
        setting: u32,
        outcome: u32,
        value: String,
    },
    #[error("matrix has {outcomes} outcomes x {settings} settings, scenario expects {expected_outcomes} x {expected_settings}")]
    ShapeMismatch {
        outcomes: u32,
        settings: u32,
        expected_outcomes: u32,
        expected_settings: u32,
    },
    #[error("reduced coordinate vector has length {got}, expected {expected}")]
    ReducedLength { expected: usize, got: usize },
    #[error("matrix row for setting {setting} has {got} entries, expected {expected}")]
    RaggedRow {
        setting: u32,
        expected: usize,
        got: usize,
    },
    #[error("pattern space {outcomes}^{settings} exceeds the enumeration guard of 2^22")]
    PatternSpaceTooLarge { outcomes: u32, settings: u32 },
    #[error("probability {0} is not finite")]
    NonFinite(f64),
}

/// One observable with `outcomes` possible results, measured at one of
/// `settings` settings.
///
/// Outcomes are labeled `1..=A` and settings `1..=X` throughout, matching the
/// conditional-probability notation `p(a|x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    outcomes: u32,
    settings: u32,
}

impl Scenario {
    /// Requires `2 <= outcomes <= 255` (outcome labels are stored as bytes)
    /// and `settings >= 1`.
    pub fn new(outcomes: u32, settings: u32) -> Result<Self, ScenarioError> {
        if outcomes < 2 {
            return Err(ScenarioError::TooFewOutcomes(outcomes));
        }
        if outcomes > u8::MAX as u32 {
            return Err(ScenarioError::TooManyOutcomes(outcomes));
        }
        if settings < 1 {
            return Err(ScenarioError::TooFewSettings(settings));
        }
        Ok(Self { outcomes, settings })
    }

    pub fn outcomes(&self) -> u32 {
        self.outcomes
    }

    pub fn settings(&self) -> u32 {
        self.settings
    }

    /// Dimension of the reduced coordinate space `(p(1|1), ..., p(A-1|X))`.
    pub fn reduced_dimension(&self) -> usize {
        (self.outcomes as usize - 1) * self.settings as usize
    }

    /// `A^X`, or `None` on overflow.
    pub fn pattern_count(&self) -> Option<u64> {
        (self.outcomes as u64).checked_pow(self.settings)
    }

    fn check_pattern_space(&self) -> Result<u64, ScenarioError> {
        match self.pattern_count() {
            Some(n) if n <= MAX_PATTERNS => Ok(n),
            _ => Err(ScenarioError::PatternSpaceTooLarge {
                outcomes: self.outcomes,
                settings: self.settings,
            }),
        }
    }

    /// All outcome patterns in lexicographic order.
    pub fn patterns(&self) -> Patterns {
        Patterns {
            outcomes: self.outcomes as u8,
            next: Some(vec![1; self.settings as usize]),
        }
    }

    /// Index of the reduced coordinate `p(a|x)` (`1 <= a <= A-1`, 1-based `x`).
    pub fn reduced_index(&self, outcome: u32, setting: u32) -> usize {
        debug_assert!(outcome >= 1 && outcome < self.outcomes);
        debug_assert!(setting >= 1 && setting <= self.settings);
        (setting as usize - 1) * (self.outcomes as usize - 1) + (outcome as usize - 1)
    }
}

/// Lexicographic iterator over all outcome patterns of a scenario.
pub struct Patterns {
    outcomes: u8,
    next: Option<Vec<u8>>,
}

impl Iterator for Patterns {
    type Item = OutcomePattern;

    fn next(&mut self) -> Option<OutcomePattern> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // Odometer increment from the last position.
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                self.next = None;
                break;
            }
            pos -= 1;
            if succ[pos] < self.outcomes {
                succ[pos] += 1;
                for later in succ.iter_mut().skip(pos + 1) {
                    *later = 1;
                }
                self.next = Some(succ);
                break;
            }
        }
        Some(OutcomePattern(current))
    }
}

/// One outcome per setting: `(a_1, ..., a_X)`, letters 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomePattern(Vec<u8>);

impl OutcomePattern {
    pub fn new(letters: impl Into<Vec<u8>>) -> Self {
        Self(letters.into())
    }

    /// Parses a compact digit string like `"21112"` (letters 1-9 only).
    pub fn from_digits(token: &str) -> Result<Self, ScenarioError> {
        if token.is_empty() {
            return Err(ScenarioError::EmptyPattern);
        }
        let mut letters = Vec::with_capacity(token.len());
        for c in token.chars() {
            match c.to_digit(10) {
                Some(d) if d >= 1 => letters.push(d as u8),
                _ => return Err(ScenarioError::PatternToken(token.to_string())),
            }
        }
        Ok(Self(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letter at a 1-based setting.
    pub fn letter(&self, setting: u32) -> u8 {
        self.0[setting as usize - 1]
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), ScenarioError> {
        if self.0.len() != scenario.settings() as usize {
            return Err(ScenarioError::PatternLength {
                pattern: self.to_string(),
                expected: scenario.settings(),
                got: self.0.len(),
            });
        }
        for &letter in &self.0 {
            if letter < 1 || letter as u32 > scenario.outcomes() {
                return Err(ScenarioError::PatternLetter {
                    pattern: self.to_string(),
                    letter,
                    outcomes: scenario.outcomes(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for OutcomePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&l| l <= 9) {
            for l in &self.0 {
                write!(f, "{l}")?;
            }
            Ok(())
        } else {
            write!(f, "(")?;
            for (i, l) in self.0.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{l}")?;
            }
            write!(f, ")")
        }
    }
}

/// A set of forbidden outcome patterns (deduplicated, ordered).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    forbidden: BTreeSet<OutcomePattern>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates every pattern against the scenario; duplicates collapse.
    pub fn new(
        patterns: impl IntoIterator<Item = OutcomePattern>,
        scenario: &Scenario,
    ) -> Result<Self, ScenarioError> {
        let mut forbidden = BTreeSet::new();
        for p in patterns {
            p.validate(scenario)?;
            forbidden.insert(p);
        }
        Ok(Self { forbidden })
    }

    pub fn forbids(&self, pattern: &OutcomePattern) -> bool {
        self.forbidden.contains(pattern)
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &OutcomePattern> {
        self.forbidden.iter()
    }

    pub(crate) fn validate(&self, scenario: &Scenario) -> Result<(), ScenarioError> {
        for p in &self.forbidden {
            p.validate(scenario)?;
        }
        Ok(())
    }
}

/// Parses a comma-separated list of digit-string patterns, e.g. `"111,222"`.
pub fn parse_pattern_list(input: &str, scenario: &Scenario) -> Result<ConstraintSet, ScenarioError> {
    let mut patterns = Vec::new();
    for token in input.split(',') {
        patterns.push(OutcomePattern::from_digits(token.trim())?);
    }
    ConstraintSet::new(patterns, scenario)
}

/// A scenario together with its forbidden patterns; the JSON form is
/// `{"A": 2, "X": 5, "forbidden": [[2,1,2,1,2], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConstrainedScenarioRaw", into = "ConstrainedScenarioRaw")]
pub struct ConstrainedScenario {
    scenario: Scenario,
    constraints: ConstraintSet,
}

impl ConstrainedScenario {
    pub fn new(scenario: Scenario, constraints: ConstraintSet) -> Result<Self, ScenarioError> {
        constraints.validate(&scenario)?;
        Ok(Self {
            scenario,
            constraints,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn from_json_str(input: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(input)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("constrained scenario serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct ConstrainedScenarioRaw {
    #[serde(rename = "A")]
    outcomes: u32,
    #[serde(rename = "X")]
    settings: u32,
    #[serde(default)]
    forbidden: Vec<OutcomePattern>,
}

impl TryFrom<ConstrainedScenarioRaw> for ConstrainedScenario {
    type Error = ScenarioError;

    fn try_from(raw: ConstrainedScenarioRaw) -> Result<Self, ScenarioError> {
        let scenario = Scenario::new(raw.outcomes, raw.settings)?;
        let constraints = ConstraintSet::new(raw.forbidden, &scenario)?;
        Ok(Self {
            scenario,
            constraints,
        })
    }
}

impl From<ConstrainedScenario> for ConstrainedScenarioRaw {
    fn from(cs: ConstrainedScenario) -> Self {
        Self {
            outcomes: cs.scenario.outcomes(),
            settings: cs.scenario.settings(),
            forbidden: cs.constraints.forbidden.into_iter().collect(),
        }
    }
}

/// A probability distribution over outcome patterns (a classical model).
///
/// Weights are exact rationals; patterns with zero weight are dropped from the
/// support. The total weight must be 1 within `1e-12`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDistribution {
    outcomes: u32,
    settings: u32,
    weights: BTreeMap<OutcomePattern, Rational>,
}

impl GlobalDistribution {
    pub fn new(
        scenario: &Scenario,
        weights: impl IntoIterator<Item = (OutcomePattern, Rational)>,
    ) -> Result<Self, ScenarioError> {
        let mut map = BTreeMap::new();
        let mut total = Rational::zero();
        for (pattern, weight) in weights {
            pattern.validate(scenario)?;
            if weight.is_negative() {
                return Err(ScenarioError::NegativeWeight {
                    pattern: pattern.to_string(),
                    weight: weight.to_string(),
                });
            }
            if !weight.is_zero() {
                total += &weight;
                *map.entry(pattern).or_insert_with(Rational::zero) += weight;
            }
        }
        let deviation = (&total - Rational::one()).abs();
        if deviation > *normalization_tolerance() {
            return Err(ScenarioError::WeightSum(total.to_string()));
        }
        Ok(Self {
            outcomes: scenario.outcomes(),
            settings: scenario.settings(),
            weights: map,
        })
    }

    /// The deterministic model concentrated on one pattern.
    pub fn delta(scenario: &Scenario, pattern: OutcomePattern) -> Result<Self, ScenarioError> {
        Self::new(scenario, [(pattern, Rational::one())])
    }

    pub fn weight(&self, pattern: &OutcomePattern) -> Rational {
        self.weights.get(pattern).cloned().unwrap_or_else(Rational::zero)
    }

    /// Patterns with strictly positive weight, in lexicographic order.
    pub fn support(&self) -> impl Iterator<Item = (&OutcomePattern, &Rational)> {
        self.weights.iter()
    }

    /// True when the distribution puts zero weight on every forbidden pattern.
    pub fn respects(&self, constraints: &ConstraintSet) -> bool {
        constraints.iter().all(|p| !self.weights.contains_key(p))
    }

    pub fn outcomes(&self) -> u32 {
        self.outcomes
    }

    pub fn settings(&self) -> u32 {
        self.settings
    }
}

/// The observed data `p(a|x)`: one probability row per setting.
///
/// Rows are indexed by setting, columns by outcome; every entry lies in
/// `[0, 1]` exactly and each row sums to 1 within `1e-12`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalProbabilityMatrix {
    rows: Vec<Vec<Rational>>,
}

impl ConditionalProbabilityMatrix {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, ScenarioError> {
        if rows.is_empty() {
            return Err(ScenarioError::TooFewSettings(0));
        }
        let outcomes = rows[0].len();
        if outcomes < 2 {
            return Err(ScenarioError::TooFewOutcomes(outcomes as u32));
        }
        for (x, row) in rows.iter().enumerate() {
            let setting = x as u32 + 1;
            if row.len() != outcomes {
                return Err(ScenarioError::RaggedRow {
                    setting,
                    expected: outcomes,
                    got: row.len(),
                });
            }
            let mut sum = Rational::zero();
            for (a, entry) in row.iter().enumerate() {
                if entry.is_negative() || *entry > Rational::one() {
                    return Err(ScenarioError::EntryRange {
                        setting,
                        outcome: a as u32 + 1,
                        value: entry.to_string(),
                    });
                }
                sum += entry;
            }
            if (&sum - Rational::one()).abs() > *normalization_tolerance() {
                return Err(ScenarioError::RowSum {
                    setting,
                    sum: sum.to_string(),
                });
            }
        }
        Ok(Self { rows })
    }

    /// Builds from floating-point rows via exact binary-to-rational conversion.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self, ScenarioError> {
        let mut exact = Vec::with_capacity(rows.len());
        for row in rows {
            let mut r = Vec::with_capacity(row.len());
            for &p in row {
                r.push(Rational::from_float(p).ok_or(ScenarioError::NonFinite(p))?);
            }
            exact.push(r);
        }
        Self::from_rows(exact)
    }

    pub fn outcomes(&self) -> u32 {
        self.rows[0].len() as u32
    }

    pub fn settings(&self) -> u32 {
        self.rows.len() as u32
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    /// `p(a|x)` with 1-based outcome and setting.
    pub fn prob(&self, outcome: u32, setting: u32) -> &Rational {
        &self.rows[setting as usize - 1][outcome as usize - 1]
    }

    /// Reduced coordinates `(p(1|1), ..., p(A-1|1), p(1|2), ...)`: the last
    /// outcome of each row is dropped (it is determined by normalization).
    pub fn reduced(&self) -> Vec<Rational> {
        let keep = self.rows[0].len() - 1;
        let mut out = Vec::with_capacity(keep * self.rows.len());
        for row in &self.rows {
            out.extend(row[..keep].iter().cloned());
        }
        out
    }

    /// Reconstructs a full matrix from reduced coordinates; the dropped
    /// outcome is `1 - sum` of the rest and must land in `[0, 1]`.
    pub fn from_reduced(scenario: &Scenario, coords: &[Rational]) -> Result<Self, ScenarioError> {
        let expected = scenario.reduced_dimension();
        if coords.len() != expected {
            return Err(ScenarioError::ReducedLength {
                expected,
                got: coords.len(),
            });
        }
        let keep = scenario.outcomes() as usize - 1;
        let mut rows = Vec::with_capacity(scenario.settings() as usize);
        for chunk in coords.chunks(keep) {
            let mut row: Vec<Rational> = chunk.to_vec();
            let sum: Rational = row.iter().fold(Rational::zero(), |acc, p| acc + p);
            row.push(Rational::one() - sum);
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn matches(&self, scenario: &Scenario) -> Result<(), ScenarioError> {
        if self.outcomes() != scenario.outcomes() || self.settings() != scenario.settings() {
            return Err(ScenarioError::ShapeMismatch {
                outcomes: self.outcomes(),
                settings: self.settings(),
                expected_outcomes: scenario.outcomes(),
                expected_settings: scenario.settings(),
            });
        }
        Ok(())
    }
}

/// `p(a|x) = sum over patterns with a_x = a of the pattern weight`.
pub fn marginalize(
    global: &GlobalDistribution,
    scenario: &Scenario,
) -> Result<ConditionalProbabilityMatrix, ScenarioError> {
    if global.outcomes() != scenario.outcomes() || global.settings() != scenario.settings() {
        return Err(ScenarioError::ShapeMismatch {
            outcomes: global.outcomes(),
            settings: global.settings(),
            expected_outcomes: scenario.outcomes(),
            expected_settings: scenario.settings(),
        });
    }
    let settings = scenario.settings() as usize;
    let outcomes = scenario.outcomes() as usize;
    let mut rows = vec![vec![Rational::zero(); outcomes]; settings];
    for (pattern, weight) in global.support() {
        for x in 0..settings {
            rows[x][pattern.letters()[x] as usize - 1] += weight;
        }
    }
    ConditionalProbabilityMatrix::from_rows(rows)
}

/// The product (independent) model: each setting draws its outcome
/// independently from its own row. Marginalizing it returns the input, so
/// *unconstrained* classical models reach every conditional matrix.
pub fn product_model(
    cond: &ConditionalProbabilityMatrix,
) -> Result<GlobalDistribution, ScenarioError> {
    let scenario = Scenario::new(cond.outcomes(), cond.settings())?;
    // Sparse odometer over the nonzero support of each row.
    let support: Vec<Vec<u8>> = cond
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(a, _)| a as u8 + 1)
                .collect()
        })
        .collect();
    let combinations = support
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64))
        .filter(|&n| n <= MAX_PATTERNS)
        .ok_or(ScenarioError::PatternSpaceTooLarge {
            outcomes: cond.outcomes(),
            settings: cond.settings(),
        })?;
    let mut weights = Vec::with_capacity(combinations as usize);
    let mut index = vec![0usize; support.len()];
    loop {
        let mut letters = Vec::with_capacity(index.len());
        let mut weight = Rational::one();
        for (x, &i) in index.iter().enumerate() {
            let letter = support[x][i];
            letters.push(letter);
            weight *= cond.prob(letter as u32, x as u32 + 1);
        }
        weights.push((OutcomePattern::new(letters), weight));
        // Advance the odometer.
        let mut pos = index.len();
        loop {
            if pos == 0 {
                return GlobalDistribution::new(&scenario, weights);
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < support[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

fn allowed_patterns(
    scenario: &Scenario,
    constraints: &ConstraintSet,
) -> Result<Vec<OutcomePattern>, ScenarioError> {
    scenario.check_pattern_space()?;
    constraints.validate(scenario)?;
    Ok(scenario
        .patterns()
        .filter(|p| !constraints.forbids(p))
        .collect())
}

/// Reduced coordinates of the deterministic vertex for `pattern`.
fn reduced_vertex(pattern: &OutcomePattern, scenario: &Scenario) -> Vec<Rational> {
    let mut coords = vec![Rational::zero(); scenario.reduced_dimension()];
    for (x, &letter) in pattern.letters().iter().enumerate() {
        if (letter as u32) < scenario.outcomes() {
            coords[scenario.reduced_index(letter as u32, x as u32 + 1)] = Rational::one();
        }
    }
    coords
}

/// Conditional matrices of all allowed deterministic assignments, in
/// lexicographic pattern order. These are the vertices of the constrained
/// classical polytope.
pub fn enumerate_constrained_vertices(
    scenario: &Scenario,
    constraints: &ConstraintSet,
) -> Result<Vec<ConditionalProbabilityMatrix>, ScenarioError> {
    let allowed = allowed_patterns(scenario, constraints)?;
    let outcomes = scenario.outcomes() as usize;
    allowed
        .iter()
        .map(|pattern| {
            let rows = pattern
                .letters()
                .iter()
                .map(|&letter| {
                    let mut row = vec![Rational::zero(); outcomes];
                    row[letter as usize - 1] = Rational::one();
                    row
                })
                .collect();
            ConditionalProbabilityMatrix::from_rows(rows)
        })
        .collect()
}

/// Outcome of [`has_constrained_model`]: either an explicit classical model or
/// a separating inequality (valid on every allowed deterministic assignment,
/// violated by the queried matrix).
#[derive(Debug, Clone)]
pub enum ModelCheck {
    Model(GlobalDistribution),
    NoModel(LinearInequality),
}

impl ModelCheck {
    pub fn is_classical(&self) -> bool {
        matches!(self, ModelCheck::Model(_))
    }

    pub fn model(&self) -> Option<&GlobalDistribution> {
        match self {
            ModelCheck::Model(g) => Some(g),
            ModelCheck::NoModel(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&LinearInequality> {
        match self {
            ModelCheck::Model(_) => None,
            ModelCheck::NoModel(w) => Some(w),
        }
    }
}

/// Decides exactly whether `cond` is a convex combination of the allowed
/// deterministic assignments.
///
/// Feasibility is a rational linear program over the vertex weights; the
/// returned model re-marginalizes to `cond` exactly. In the infeasible case
/// the Farkas dual of the program yields the separating inequality, with its
/// bound tightened to the maximum over allowed vertices.
pub fn has_constrained_model(
    cond: &ConditionalProbabilityMatrix,
    scenario: &Scenario,
    constraints: &ConstraintSet,
) -> Result<ModelCheck, ScenarioError> {
    cond.matches(scenario)?;
    let allowed = allowed_patterns(scenario, constraints)?;
    let dim = scenario.reduced_dimension();

    // Equality system: sum of lambda_v * vertex_v = target, sum lambda_v = 1.
    let columns: Vec<Vec<Rational>> = allowed
        .iter()
        .map(|p| {
            let mut col = reduced_vertex(p, scenario);
            col.push(Rational::one());
            col
        })
        .collect();
    let mut rhs = cond.reduced();
    rhs.push(Rational::one());

    match lp::feasible_combination(&columns, &rhs) {
        Ok(lambda) => {
            let weights = allowed.into_iter().zip(lambda);
            Ok(ModelCheck::Model(GlobalDistribution::new(scenario, weights)?))
        }
        Err(dual) => {
            let coeffs = dual[..dim].to_vec();
            let slack_bound = -dual[dim].clone();
            let bound = columns
                .iter()
                .map(|col| {
                    col[..dim]
                        .iter()
                        .zip(&coeffs)
                        .fold(Rational::zero(), |acc, (v, c)| acc + v * c)
                })
                .max()
                .unwrap_or(slack_bound);
            Ok(ModelCheck::NoModel(LinearInequality::new(
                coeffs,
                Sense::Le,
                bound,
            )))
        }
    }
}
