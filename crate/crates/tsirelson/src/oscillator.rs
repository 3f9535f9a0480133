//! Quantum violations for a truncated harmonic oscillator.
//!
//! The system is a unit-frequency harmonic oscillator restricted to the span
//! of its first `N` energy eigenstates. The measurement asks "is the particle
//! on the positive half-line?", probed at times `theta_x = 2 pi x / X` for
//! `x = 1..X`; free evolution between probes makes the Heisenberg-picture
//! "yes" operator at probe `x`
//!
//! ```text
//! Q(theta_x)_mn = e^{i (m - n) theta_x} P_mn,
//! P_mn = integral_0^inf psi_m(q) psi_n(q) dq,
//! ```
//!
//! with `psi_n` the Hermite functions. `P` has exact structure: the diagonal
//! is 1/2 and entries with `m + n` even vanish by parity; the odd entries are
//! computed by adaptive composite Gauss-Legendre quadrature.
//!
//! For an inequality `sum_x c_x p(1|x) <= b` the maximal quantum value over
//! truncated states is the top eigenvalue of `O = sum_x c_x Q(theta_x)`
//! (bottom eigenvalue for `>=`); [`max_violation`] reports it together with
//! the optimal state, and [`violation_sweep`] tabulates whole facet families
//! against the truncation dimension.
//!
//! The allowed classical outcome patterns of this experiment (outcome 1 =
//! positive position) are those of a sign function sampled along a harmonic
//! trajectory: [`generate_oscillator_constraints`] encodes them as forbidden
//! patterns in two strengths (see [`ConstraintMode`]).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::polytope::{
    facet_enumeration, FacetList, LinearInequality, PolytopeError, Rational, Sense,
};
use crate::scenario::{
    enumerate_constrained_vertices, ConditionalProbabilityMatrix, ConstraintSet, OutcomePattern,
    Scenario, ScenarioError,
};

/// Default convergence tolerance for the overlap quadrature (max-norm change
/// between consecutive panel refinements).
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// A bound must be beaten by more than this before a violation is declared.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Positions closer to the origin than this are treated as "on the boundary"
/// by the classical trajectory model.
pub const ZERO_TOL: f64 = 1e-12;

const HERMITICITY_TOL: f64 = 1e-12;
const PANEL_ORDER: usize = 32;
const INITIAL_PANELS: usize = 16;
const MAX_PANELS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscillatorError {
    #[error("probe count must be odd, got {0}")]
    EvenProbeCount(u32),
    #[error("need at least 3 probes, got {0}")]
    TooFewProbes(u32),
    #[error("truncation dimension must be at least 1")]
    ZeroDimension,
    #[error("quadrature tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("quadrature did not reach tolerance {requested:e} (best refinement change {achieved:e})")]
    QuadratureNotConverged { requested: f64, achieved: f64 },
    #[error("inequality has {got} coefficients, expected one per probe ({expected})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("an equality has no violation direction")]
    EqualitySense,
    #[error("matrix is not self-adjoint (deviation {0:e})")]
    NotSelfAdjoint(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// How much of the trajectory structure the classical constraints encode.
///
/// A sign pattern of a harmonic trajectory sampled at `X` equally spaced
/// times is positive at either `floor(X/2)` or `ceil(X/2)` of them, and those
/// positive samples sit consecutively (cyclically). `Basic` forbids patterns
/// failing the count condition; `Full` additionally forbids patterns whose
/// positive samples are not one contiguous cyclic block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    Basic,
    Full,
}

impl FromStr for ConstraintMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "basic" => Ok(Self::Basic),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown constraint mode '{other}' (use basic|full)")),
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Basic => "basic",
            Self::Full => "full",
        })
    }
}

/// An oscillator probed at `X` (odd, >= 3) equally spaced times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OscillatorScenario {
    probes: u32,
    mode: ConstraintMode,
}

impl OscillatorScenario {
    pub fn new(probes: u32, mode: ConstraintMode) -> Result<Self, OscillatorError> {
        check_probes(probes)?;
        Ok(Self { probes, mode })
    }

    pub fn probes(&self) -> u32 {
        self.probes
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    /// Probe phases `2 pi x / X` for `x = 1..=X`; the last one is a full turn.
    pub fn phases(&self) -> Vec<f64> {
        (1..=self.probes)
            .map(|x| TAU * x as f64 / self.probes as f64)
            .collect()
    }

    /// The two-outcome measurement scenario (outcome 1 = positive side).
    pub fn scenario(&self) -> Scenario {
        Scenario::new(2, self.probes).expect("two-outcome scenario is valid")
    }

    pub fn constraints(&self) -> ConstraintSet {
        generate_oscillator_constraints(self.probes, self.mode)
            .expect("probe count was validated on construction")
    }

    /// Enumerates the classical polytope's vertices and derives its facets.
    pub fn derive_facets(&self) -> Result<FacetList, OscillatorError> {
        let scenario = self.scenario();
        let vertices = enumerate_constrained_vertices(&scenario, &self.constraints())?;
        Ok(facet_enumeration(&vertices)?)
    }
}

fn check_probes(probes: u32) -> Result<(), OscillatorError> {
    if probes < 3 {
        return Err(OscillatorError::TooFewProbes(probes));
    }
    if probes % 2 == 0 {
        return Err(OscillatorError::EvenProbeCount(probes));
    }
    Ok(())
}

/// Builds the forbidden-pattern set of the sampled-trajectory model.
pub fn generate_oscillator_constraints(
    probes: u32,
    mode: ConstraintMode,
) -> Result<ConstraintSet, OscillatorError> {
    check_probes(probes)?;
    let scenario = Scenario::new(2, probes)?;
    let lo = probes / 2;
    let hi = lo + 1;
    let mut forbidden: Vec<OutcomePattern> = Vec::new();
    for pattern in scenario.patterns() {
        let positives: Vec<bool> = pattern.letters().iter().map(|&l| l == 1).collect();
        let count = positives.iter().filter(|&&p| p).count() as u32;
        let allowed = match mode {
            ConstraintMode::Basic => count == lo || count == hi,
            ConstraintMode::Full => (count == lo || count == hi) && single_cyclic_block(&positives),
        };
        if !allowed {
            forbidden.push(pattern);
        }
    }
    Ok(ConstraintSet::new(forbidden, &scenario)?)
}

/// True when the `true` positions form exactly one cyclically contiguous run.
fn single_cyclic_block(flags: &[bool]) -> bool {
    let x = flags.len();
    let starts = (0..x)
        .filter(|&i| flags[i] && !flags[(i + x - 1) % x])
        .count();
    starts == 1
}

/// A self-adjoint operator on the truncated Fock space, stored densely in the
/// energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: DMatrix<Complex64>,
}

impl FockOperator {
    /// Validates self-adjointness within `1e-12` (entrywise).
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self, OscillatorError> {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator must be square");
        let mut deviation: f64 = 0.0;
        for m in 0..matrix.nrows() {
            for n in m..matrix.ncols() {
                deviation = deviation.max((matrix[(m, n)] - matrix[(n, m)].conj()).norm());
            }
        }
        if deviation > HERMITICITY_TOL {
            return Err(OscillatorError::NotSelfAdjoint(deviation));
        }
        Ok(Self { matrix })
    }

    fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.matrix[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Restriction to the first `n` basis states.
    pub fn leading_block(&self, n: usize) -> FockOperator {
        assert!(n >= 1 && n <= self.dim(), "block size out of range");
        Self::from_matrix_unchecked(self.matrix.view((0, 0), (n, n)).into_owned())
    }

    /// `<state| A |state>` (real for self-adjoint `A`).
    pub fn expectation(&self, state: &[Complex64]) -> f64 {
        assert_eq!(state.len(), self.dim(), "state dimension mismatch");
        let mut acc = Complex64::ZERO;
        for m in 0..self.dim() {
            for n in 0..self.dim() {
                acc += state[m].conj() * self.matrix[(m, n)] * state[n];
            }
        }
        acc.re
    }

    /// All eigenvalues, ascending.
    ///
    /// Solved on the real symmetric `2N x 2N` embedding `[[Re, -Im], [Im, Re]]`,
    /// which carries each eigenvalue twice; one copy of each pair is returned.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eigen = SymmetricEigen::new(self.embedding());
        let mut all: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        all.into_iter().step_by(2).collect()
    }

    /// The largest (or smallest) eigenvalue and a unit-norm eigenvector with
    /// a deterministic global phase (largest-magnitude component made real
    /// positive).
    pub fn extremal_eigenpair(&self, maximize: bool) -> (f64, Vec<Complex64>) {
        let n = self.dim();
        let eigen = SymmetricEigen::new(self.embedding());
        let values = &eigen.eigenvalues;
        let mut best = 0;
        for i in 1..2 * n {
            let better = if maximize {
                values[i] > values[best]
            } else {
                values[i] < values[best]
            };
            if better {
                best = i;
            }
        }
        let column = eigen.eigenvectors.column(best);
        let mut state: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(column[k], column[n + k]))
            .collect();
        let norm = state.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in state.iter_mut() {
            *c /= norm;
        }
        let mut anchor = 0;
        for k in 1..n {
            if state[k].norm_sqr() > state[anchor].norm_sqr() {
                anchor = k;
            }
        }
        let phase = state[anchor] / state[anchor].norm();
        for c in state.iter_mut() {
            *c /= phase;
        }
        (values[best], state)
    }

    fn embedding(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let e = self.matrix[(i % n, j % n)];
            match (i / n, j / n) {
                (0, 0) | (1, 1) => e.re,
                (0, 1) => -e.im,
                _ => e.im,
            }
        })
    }
}

/// Evaluates the Hermite functions `psi_0..psi_(count-1)` at `q` via the
/// stable recurrence `psi_(n+1) = sqrt(2/(n+1)) q psi_n - sqrt(n/(n+1)) psi_(n-1)`.
fn hermite_values(q: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    out.push(PI.powf(-0.25) * (-q * q / 2.0).exp());
    if count > 1 {
        out.push(std::f64::consts::SQRT_2 * q * out[0]);
    }
    for n in 1..count.saturating_sub(1) {
        let next = (2.0 / (n as f64 + 1.0)).sqrt() * q * out[n]
            - (n as f64 / (n as f64 + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// The half-line projector `P_mn = integral_0^inf psi_m psi_n dq` on the
/// first `dim` energy states.
///
/// Diagonal entries are exactly 1/2 and entries with `m + n` even vanish by
/// parity; the rest are integrated over `[0, sqrt(2 dim + 1) + 10]` with
/// composite 32-point Gauss-Legendre panels, doubling the panel count until
/// the matrix changes by less than `quad_tol` in max-norm.
pub fn halfline_overlap_matrix(dim: usize, quad_tol: f64) -> Result<FockOperator, OscillatorError> {
    if dim == 0 {
        return Err(OscillatorError::ZeroDimension);
    }
    if !(quad_tol.is_finite() && quad_tol > 0.0) {
        return Err(OscillatorError::BadTolerance(quad_tol));
    }
    let q_max = ((2 * dim + 1) as f64).sqrt() + 10.0;
    let rule = crate::quad::GaussLegendre::new(PANEL_ORDER);

    let mut integrals = overlap_integrals(dim, q_max, INITIAL_PANELS, &rule);
    if dim > 1 {
        let mut panels = INITIAL_PANELS;
        let mut best_delta = f64::INFINITY;
        loop {
            panels *= 2;
            if panels > MAX_PANELS {
                return Err(OscillatorError::QuadratureNotConverged {
                    requested: quad_tol,
                    achieved: best_delta,
                });
            }
            let refined = overlap_integrals(dim, q_max, panels, &rule);
            let delta = integrals
                .iter()
                .zip(&refined)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            best_delta = best_delta.min(delta);
            integrals = refined;
            if delta < quad_tol {
                break;
            }
        }
    }

    let matrix = DMatrix::from_fn(dim, dim, |m, n| {
        if m == n {
            Complex64::new(0.5, 0.0)
        } else if (m + n) % 2 == 0 {
            Complex64::ZERO
        } else {
            Complex64::new(integrals[m.min(n) * dim + m.max(n)], 0.0)
        }
    });
    Ok(FockOperator::from_matrix_unchecked(matrix))
}

/// Upper-triangular odd-parity integrals, flattened row-major.
fn overlap_integrals(
    dim: usize,
    q_max: f64,
    panels: usize,
    rule: &crate::quad::GaussLegendre,
) -> Vec<f64> {
    let mut acc = vec![0.0; dim * dim];
    let h = q_max / panels as f64;
    for k in 0..panels {
        let a = k as f64 * h;
        for (q, w) in rule.scaled(a, a + h) {
            let psi = hermite_values(q, dim);
            for m in 0..dim {
                for n in ((m + 1)..dim).step_by(2) {
                    acc[m * dim + n] += w * psi[m] * psi[n];
                }
            }
        }
    }
    acc
}

/// Conjugates the projector by free evolution: `Q(theta)_mn = e^{i(m-n)theta} P_mn`.
pub fn evolved_operator(p: &FockOperator, theta: f64) -> FockOperator {
    let dim = p.dim();
    let matrix = DMatrix::from_fn(dim, dim, |m, n| {
        Complex64::from_polar(1.0, (m as f64 - n as f64) * theta) * p.entry(m, n)
    });
    FockOperator::from_matrix_unchecked(matrix)
}

/// `O = sum_x c_x Q(theta_x)` for the inequality's coefficient vector.
pub fn inequality_operator(
    ineq: &LinearInequality,
    scen: &OscillatorScenario,
    dim: usize,
) -> Result<FockOperator, OscillatorError> {
    let overlaps = halfline_overlap_matrix(dim, DEFAULT_QUAD_TOL)?;
    check_inequality(ineq, scen)?;
    Ok(operator_from_overlaps(ineq, scen, &overlaps))
}

fn check_inequality(
    ineq: &LinearInequality,
    scen: &OscillatorScenario,
) -> Result<(), OscillatorError> {
    if ineq.dimension() != scen.probes() as usize {
        return Err(OscillatorError::DimensionMismatch {
            expected: scen.probes() as usize,
            got: ineq.dimension(),
        });
    }
    Ok(())
}

fn operator_from_overlaps(
    ineq: &LinearInequality,
    scen: &OscillatorScenario,
    overlaps: &FockOperator,
) -> FockOperator {
    let dim = overlaps.dim();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for (coeff, theta) in ineq.coefficients().iter().zip(scen.phases()) {
        if coeff.is_zero() {
            continue;
        }
        let c = coeff.to_f64().expect("canonical coefficient fits f64");
        acc += evolved_operator(overlaps, theta).matrix() * Complex64::new(c, 0.0);
    }
    FockOperator::from_matrix_unchecked(acc)
}

fn violates(sense: Sense, value: f64, bound: f64) -> bool {
    match sense {
        Sense::Le => value > bound + VIOLATION_TOL,
        Sense::Ge => value < bound - VIOLATION_TOL,
        Sense::Eq => false,
    }
}

/// Extremal quantum value of an inequality over the first `dim` energy
/// states, with the optimizing state.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationResult {
    pub inequality: LinearInequality,
    /// Truncation dimension `N`.
    pub truncation: usize,
    /// Top eigenvalue of the inequality operator (`<=`), or bottom (`>=`).
    pub value: f64,
    pub bound: f64,
    /// True when `value` beats the bound by more than [`VIOLATION_TOL`].
    pub violated: bool,
    /// Unit-norm optimal state in the energy basis.
    pub state: Vec<Complex64>,
}

impl Serialize for ViolationResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ViolationResult", 7)?;
        st.serialize_field("inequality", &self.inequality)?;
        st.serialize_field("N", &self.truncation)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("bound", &self.bound)?;
        st.serialize_field("violated", &self.violated)?;
        let re: Vec<f64> = self.state.iter().map(|c| c.re).collect();
        let im: Vec<f64> = self.state.iter().map(|c| c.im).collect();
        st.serialize_field("state_re", &re)?;
        st.serialize_field("state_im", &im)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ViolationResult {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            inequality: LinearInequality,
            #[serde(rename = "N")]
            truncation: usize,
            value: f64,
            bound: f64,
            violated: bool,
            state_re: Vec<f64>,
            state_im: Vec<f64>,
        }
        let w = Wire::deserialize(deserializer)?;
        if w.state_re.len() != w.state_im.len() {
            return Err(serde::de::Error::custom(
                "state_re and state_im lengths differ",
            ));
        }
        Ok(ViolationResult {
            inequality: w.inequality,
            truncation: w.truncation,
            value: w.value,
            bound: w.bound,
            violated: w.violated,
            state: w
                .state_re
                .iter()
                .zip(&w.state_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
        })
    }
}

/// Computes the maximal quantum value of `ineq` over states in the first
/// `dim` energy levels.
pub fn max_violation(
    ineq: &LinearInequality,
    scen: &OscillatorScenario,
    dim: usize,
) -> Result<ViolationResult, OscillatorError> {
    if ineq.sense() == Sense::Eq {
        return Err(OscillatorError::EqualitySense);
    }
    let op = inequality_operator(ineq, scen, dim)?;
    let maximize = ineq.sense() == Sense::Le;
    let (value, state) = op.extremal_eigenpair(maximize);
    let bound = ineq.bound().to_f64().expect("canonical bound fits f64");
    Ok(ViolationResult {
        inequality: ineq.clone(),
        truncation: dim,
        value,
        bound,
        violated: violates(ineq.sense(), value, bound),
        state,
    })
}

/// Which bound of a two-sided facet family a row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Upper,
    Lower,
}

impl fmt::Display for BoundSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Upper => "upper",
            Self::Lower => "lower",
        })
    }
}

/// One cell of a violation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub truncation: usize,
    /// Facet family label: `type_t`, `type_1`, `type_2`, or `other_k`.
    #[serde(rename = "type")]
    pub family: String,
    pub bound_side: BoundSide,
    pub value: f64,
    pub violated: bool,
}

/// Writes sweep rows as CSV with a fixed 9-decimal value format.
pub fn write_sweep_csv(rows: &[SweepRow], out: &mut impl io::Write) -> io::Result<()> {
    writeln!(out, "N,type,bound_side,value,violated")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.9},{}",
            r.truncation, r.family, r.bound_side, r.value, r.violated
        )?;
    }
    Ok(())
}

/// Recognizes the named facet families.
///
/// `type_t` is the all-ones inequality with bounds `floor(X/2)`/`ceil(X/2)`
/// (any odd X). At `X = 5`, `type_1` covers the rotations of the alternating
/// support `{x, x+2, x+4}` with bounds 1/2, and `type_2` the rotations of the
/// signed template `(1, -1, 1, 0, 0)` with bounds 0/1.
fn known_family(f: &LinearInequality, probes: u32) -> Option<(&'static str, BoundSide)> {
    let x = probes as usize;
    let lo = (probes / 2) as i64;
    let ones = vec![1i64; x];
    if *f == LinearInequality::from_integers(&ones, Sense::Le, lo + 1) {
        return Some(("type_t", BoundSide::Upper));
    }
    if *f == LinearInequality::from_integers(&ones, Sense::Ge, lo) {
        return Some(("type_t", BoundSide::Lower));
    }
    if x == 5 {
        for r in 0..5 {
            let mut support = vec![0i64; 5];
            for k in [0, 2, 4] {
                support[(r + k) % 5] = 1;
            }
            if *f == LinearInequality::from_integers(&support, Sense::Le, 2) {
                return Some(("type_1", BoundSide::Upper));
            }
            if *f == LinearInequality::from_integers(&support, Sense::Ge, 1) {
                return Some(("type_1", BoundSide::Lower));
            }
            let mut signed = vec![0i64; 5];
            signed[r] = 1;
            signed[(r + 1) % 5] = -1;
            signed[(r + 2) % 5] = 1;
            if *f == LinearInequality::from_integers(&signed, Sense::Le, 1) {
                return Some(("type_2", BoundSide::Upper));
            }
            if *f == LinearInequality::from_integers(&signed, Sense::Ge, 0) {
                return Some(("type_2", BoundSide::Lower));
            }
        }
    }
    None
}

fn family_rank(label: &str) -> u8 {
    match label {
        "type_t" => 0,
        "type_1" => 1,
        "type_2" => 2,
        _ => 3,
    }
}

/// Canonical key identifying a facet's rotation orbit, shared between the
/// upper and lower bound of a family (minimized over rotations and global
/// negation of the `<=` form).
fn orbit_key(f: &LinearInequality) -> (Vec<BigInt>, BigInt) {
    let (base, bound) = match f.sense() {
        Sense::Ge => (
            f.coefficients().iter().map(|c| -c).collect::<Vec<_>>(),
            -f.bound(),
        ),
        _ => (f.coefficients().to_vec(), f.bound().clone()),
    };
    let x = base.len();
    let mut best: Option<(Vec<BigInt>, BigInt)> = None;
    for r in 0..x {
        let rot: Vec<BigInt> = (0..x).map(|i| base[(i + r) % x].clone()).collect();
        let mirrored: Vec<BigInt> = rot.iter().map(|c| -c).collect();
        for cand in [(rot, bound.clone()), (mirrored, -&bound)] {
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.expect("facet has at least one coefficient")
}

/// Tabulates extremal quantum values for all `N = 1..=n_max`.
///
/// Cyclic rotations of a facet are unitarily equivalent (a shift of the probe
/// phases), so facets are grouped into (family, bound side) cells and one
/// representative per cell is swept. Rows are sorted by family, side, then N;
/// cells are evaluated in parallel.
pub fn violation_sweep(
    facets: &[LinearInequality],
    scen: &OscillatorScenario,
    n_max: usize,
) -> Result<Vec<SweepRow>, OscillatorError> {
    if n_max == 0 {
        return Err(OscillatorError::ZeroDimension);
    }
    for f in facets {
        check_inequality(f, scen)?;
        if f.sense() == Sense::Eq {
            return Err(OscillatorError::EqualitySense);
        }
    }

    // Deterministic numbering for families without a recognized name.
    let mut unknown_keys = BTreeSet::new();
    for f in facets {
        if known_family(f, scen.probes()).is_none() {
            unknown_keys.insert(orbit_key(f));
        }
    }
    let numbering: BTreeMap<_, usize> = unknown_keys
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i + 1))
        .collect();

    let mut families: BTreeMap<(u8, String, BoundSide), LinearInequality> = BTreeMap::new();
    for f in facets {
        let (label, side) = match known_family(f, scen.probes()) {
            Some((name, side)) => (name.to_string(), side),
            None => {
                let side = if f.sense() == Sense::Le {
                    BoundSide::Upper
                } else {
                    BoundSide::Lower
                };
                (format!("other_{}", numbering[&orbit_key(f)]), side)
            }
        };
        families
            .entry((family_rank(&label), label, side))
            .or_insert_with(|| f.clone());
    }

    let overlaps = halfline_overlap_matrix(n_max, DEFAULT_QUAD_TOL)?;
    let cells: Vec<_> = families.into_iter().collect();
    let groups: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|((_, label, side), f)| {
            let op = operator_from_overlaps(f, scen, &overlaps);
            let maximize = f.sense() == Sense::Le;
            let bound = f.bound().to_f64().expect("canonical bound fits f64");
            (1..=n_max)
                .map(|n| {
                    let (value, _) = op.leading_block(n).extremal_eigenpair(maximize);
                    SweepRow {
                        truncation: n,
                        family: label.clone(),
                        bound_side: *side,
                        value,
                        violated: violates(f.sense(), value, bound),
                    }
                })
                .collect()
        })
        .collect();
    Ok(groups.into_iter().flatten().collect())
}

/// A classical phase-space starting point `(q, p)` at time zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub position: f64,
    pub momentum: f64,
}

/// The deterministic trajectory model: `q(theta) = q cos(theta) + p sin(theta)`,
/// outcome 1 iff the position is positive. Positions within [`ZERO_TOL`] of
/// zero split the outcome half and half.
pub fn classical_conditional_matrix(
    point: &PhasePoint,
    scen: &OscillatorScenario,
) -> ConditionalProbabilityMatrix {
    let half = || Rational::new(BigInt::from(1), BigInt::from(2));
    let rows = scen
        .phases()
        .iter()
        .map(|theta| {
            let q = point.position * theta.cos() + point.momentum * theta.sin();
            let p_positive = if q > ZERO_TOL {
                Rational::from_integer(BigInt::from(1))
            } else if q < -ZERO_TOL {
                Rational::from_integer(BigInt::from(0))
            } else {
                half()
            };
            let complement = Rational::from_integer(BigInt::from(1)) - &p_positive;
            vec![p_positive, complement]
        })
        .collect();
    ConditionalProbabilityMatrix::from_rows(rows).expect("trajectory rows are valid probabilities")
}

#[cfg(test)]
mod tests {
    use super::*;

    const P01: f64 = 0.3989422804014327; // 1/sqrt(2 pi)
    const P12: f64 = 0.28209479177387814; // 1/(2 sqrt(pi))
    const P03: f64 = -0.16286750396763996; // -1/(2 sqrt(3 pi))
    const P05: f64 = 0.10925484305920792; // 12/sqrt(3840 pi)

    fn scen(x: u32, mode: ConstraintMode) -> OscillatorScenario {
        OscillatorScenario::new(x, mode).unwrap()
    }

    fn pattern_strings(set: &ConstraintSet) -> Vec<String> {
        set.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn three_probe_constraints_coincide_for_both_modes() {
        let basic = generate_oscillator_constraints(3, ConstraintMode::Basic).unwrap();
        let full = generate_oscillator_constraints(3, ConstraintMode::Full).unwrap();
        assert_eq!(pattern_strings(&basic), ["111", "222"]);
        assert_eq!(basic, full);
    }

    #[test]
    fn five_probe_basic_constraints_are_the_twelve_count_violators() {
        let basic = generate_oscillator_constraints(5, ConstraintMode::Basic).unwrap();
        assert_eq!(basic.len(), 12);
        let expected = [
            "11111", "11112", "11121", "11211", "12111", "21111", // 4 or 5 positives
            "12222", "21222", "22122", "22212", "22221", "22222", // 0 or 1 positive
        ];
        let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        expected.sort();
        assert_eq!(pattern_strings(&basic), expected);
    }

    #[test]
    fn five_probe_full_constraints_add_the_ten_scattered_patterns() {
        let basic = generate_oscillator_constraints(5, ConstraintMode::Basic).unwrap();
        let full = generate_oscillator_constraints(5, ConstraintMode::Full).unwrap();
        assert_eq!(full.len(), 22);
        for p in basic.iter() {
            assert!(full.forbids(p), "full mode keeps {p} forbidden");
        }
        // The extra ten: positives of the right count but not contiguous.
        for extra in ["21212", "12121", "11212", "21121", "12112"] {
            assert!(full.forbids(&OutcomePattern::from_digits(extra).unwrap()));
        }
        // Contiguous blocks stay allowed.
        for ok in ["11122", "21112", "11221", "22111", "12211"] {
            assert!(!full.forbids(&OutcomePattern::from_digits(ok).unwrap()));
        }
    }

    #[test]
    fn probe_count_validation() {
        assert!(matches!(
            OscillatorScenario::new(4, ConstraintMode::Full),
            Err(OscillatorError::EvenProbeCount(4))
        ));
        assert!(matches!(
            OscillatorScenario::new(1, ConstraintMode::Full),
            Err(OscillatorError::TooFewProbes(1))
        ));
        assert!("weird".parse::<ConstraintMode>().is_err());
        assert_eq!("full".parse::<ConstraintMode>().unwrap(), ConstraintMode::Full);
    }

    #[test]
    fn overlap_matrix_matches_closed_forms() {
        let p = halfline_overlap_matrix(6, DEFAULT_QUAD_TOL).unwrap();
        for m in 0..6 {
            assert_eq!(p.entry(m, m), Complex64::new(0.5, 0.0));
            for n in 0..6 {
                if m != n && (m + n) % 2 == 0 {
                    assert_eq!(p.entry(m, n), Complex64::ZERO);
                }
            }
        }
        assert!((p.entry(0, 1).re - P01).abs() < 1e-10);
        assert!((p.entry(1, 2).re - P12).abs() < 1e-10);
        assert!((p.entry(0, 3).re - P03).abs() < 1e-10);
        assert!((p.entry(0, 5).re - P05).abs() < 1e-10);
        // Symmetric real matrix.
        assert_eq!(p.entry(2, 1), p.entry(1, 2));
    }

    #[test]
    fn overlap_matrix_validates_arguments() {
        assert!(matches!(
            halfline_overlap_matrix(0, 1e-10),
            Err(OscillatorError::ZeroDimension)
        ));
        assert!(matches!(
            halfline_overlap_matrix(4, -1.0),
            Err(OscillatorError::BadTolerance(_))
        ));
        assert!(matches!(
            halfline_overlap_matrix(4, 0.0),
            Err(OscillatorError::BadTolerance(_))
        ));
    }

    #[test]
    fn projector_spectrum_lies_in_the_unit_interval() {
        for dim in [1, 8, 16] {
            let p = halfline_overlap_matrix(dim, DEFAULT_QUAD_TOL).unwrap();
            for lambda in p.eigenvalues() {
                assert!(
                    (-1e-9..=1.0 + 1e-9).contains(&lambda),
                    "dim {dim}: eigenvalue {lambda} outside [0,1]"
                );
            }
        }
    }

    #[test]
    fn evolution_phases_are_correct() {
        let p = halfline_overlap_matrix(4, DEFAULT_QUAD_TOL).unwrap();
        // theta = 0 is the identity conjugation.
        assert_eq!(evolved_operator(&p, 0.0), p);
        // theta = pi flips the half-line: Q(pi) = 1 - P.
        let q = evolved_operator(&p, PI);
        for m in 0..4 {
            for n in 0..4 {
                let expected = if m == n {
                    Complex64::new(0.5, 0.0)
                } else {
                    -p.entry(m, n)
                };
                assert!((q.entry(m, n) - expected).norm() < 1e-12);
            }
        }
        // Off-diagonal phase: Q(theta)_01 = e^{-i theta} P_01.
        let theta = 0.77;
        let q = evolved_operator(&p, theta);
        let expected = Complex64::from_polar(P01, -theta);
        assert!((q.entry(0, 1) - expected).norm() < 1e-10);
        // Conjugation by a unitary preserves the spectrum.
        let base = halfline_overlap_matrix(12, DEFAULT_QUAD_TOL).unwrap();
        let spun = evolved_operator(&base, 2.31);
        for (a, b) in base.eigenvalues().iter().zip(spun.eigenvalues()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn three_probe_sum_operator_is_scalar() {
        // Phase sums cancel every off-diagonal entry below dimension 3, so
        // the sum operator at N = 2 is (3/2) * identity: no violation.
        let scen3 = scen(3, ConstraintMode::Full);
        let sum = LinearInequality::from_integers(&[1, 1, 1], Sense::Le, 2);
        let op = inequality_operator(&sum, &scen3, 2).unwrap();
        for m in 0..2 {
            for n in 0..2 {
                let expected = if m == n { 1.5 } else { 0.0 };
                assert!((op.entry(m, n) - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
        let result = max_violation(&sum, &scen3, 2).unwrap();
        assert!((result.value - 1.5).abs() < 1e-12);
        assert!(!result.violated);
    }

    #[test]
    fn one_dimensional_truncation_gives_half_the_coefficient_sum() {
        let scen5 = scen(5, ConstraintMode::Full);
        for (coeffs, sense, bound) in [
            (vec![1, 1, 1, 1, 1], Sense::Le, 3),
            (vec![1, 0, 1, 0, 1], Sense::Ge, 1),
            (vec![1, -1, 1, 0, 0], Sense::Le, 1),
        ] {
            let ineq = LinearInequality::from_integers(&coeffs, sense, bound);
            let r = max_violation(&ineq, &scen5, 1).unwrap();
            let half_sum = coeffs.iter().sum::<i64>() as f64 / 2.0;
            assert!((r.value - half_sum).abs() < 1e-12, "{ineq}");
            assert!(!r.violated, "{ineq}");
        }
    }

    #[test]
    fn all_ones_violation_at_six_levels_matches_the_closed_form() {
        // The five phases sum to zero except on residue-0 diagonals, so at
        // N = 6 the top eigenvalue is exactly 5/2 + 5 * P_05.
        let scen5 = scen(5, ConstraintMode::Full);
        let sum = LinearInequality::from_integers(&[1; 5], Sense::Le, 3);
        let r = max_violation(&sum, &scen5, 6).unwrap();
        assert!((r.value - (2.5 + 5.0 * P05)).abs() < 1e-8, "got {}", r.value);
        assert!(r.violated);
        assert_eq!(r.bound, 3.0);
        // The optimal state is unit norm and reproduces the eigenvalue as an
        // expectation value.
        let norm: f64 = r.state.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let op = inequality_operator(&sum, &scen5, 6).unwrap();
        assert!((op.expectation(&r.state) - r.value).abs() < 1e-9);
    }

    #[test]
    fn mirror_symmetry_links_the_two_bound_sides() {
        // Reflecting q -> -q maps each Q to 1 - Q, so min eig = sum(c) - max eig.
        let scen5 = scen(5, ConstraintMode::Full);
        for coeffs in [vec![1i64; 5], vec![1, 0, 1, 0, 1], vec![1, -1, 1, 0, 0]] {
            let upper = LinearInequality::from_integers(&coeffs, Sense::Le, 3);
            let lower = LinearInequality::from_integers(&coeffs, Sense::Ge, 0);
            let hi = max_violation(&upper, &scen5, 9).unwrap().value;
            let lo = max_violation(&lower, &scen5, 9).unwrap().value;
            let coeff_sum: f64 = coeffs.iter().sum::<i64>() as f64;
            assert!((hi + lo - coeff_sum).abs() < 1e-9);
        }
    }

    #[test]
    fn equalities_are_rejected_and_dimensions_checked() {
        let scen5 = scen(5, ConstraintMode::Full);
        let eq = LinearInequality::from_integers(&[1; 5], Sense::Eq, 2);
        assert!(matches!(
            max_violation(&eq, &scen5, 4),
            Err(OscillatorError::EqualitySense)
        ));
        let short = LinearInequality::from_integers(&[1, 1, 1], Sense::Le, 2);
        assert!(matches!(
            max_violation(&short, &scen5, 4),
            Err(OscillatorError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            max_violation(&short, &scen(3, ConstraintMode::Full), 0),
            Err(OscillatorError::ZeroDimension)
        ));
    }

    #[test]
    fn sweep_groups_rotations_and_sorts_rows() {
        let scen5 = scen(5, ConstraintMode::Full);
        let facets = scen5.derive_facets().unwrap();
        let nontrivial = facets.nontrivial(&scen5.scenario()).unwrap();
        assert_eq!(nontrivial.len(), 22);
        let rows = violation_sweep(&nontrivial, &scen5, 6).unwrap();
        // 3 families x 2 sides x 6 truncations.
        assert_eq!(rows.len(), 36);
        let labels: Vec<&str> = rows.iter().map(|r| r.family.as_str()).collect();
        assert_eq!(labels[0], "type_t");
        assert_eq!(labels[12], "type_1");
        assert_eq!(labels[24], "type_2");
        for chunk in rows.chunks(6) {
            for (i, row) in chunk.iter().enumerate() {
                assert_eq!(row.truncation, i + 1);
            }
        }
        // Spot values against the independent tabulation.
        let find = |family: &str, side: BoundSide, n: usize| {
            rows.iter()
                .find(|r| r.family == family && r.bound_side == side && r.truncation == n)
                .unwrap()
        };
        assert!((find("type_t", BoundSide::Upper, 6).value - 3.046274).abs() < 5e-6);
        assert!((find("type_1", BoundSide::Upper, 5).value - 2.007034).abs() < 5e-6);
        assert!((find("type_2", BoundSide::Upper, 5).value - 0.996268).abs() < 5e-6);
        assert!(!find("type_2", BoundSide::Upper, 5).violated);
        assert!(find("type_2", BoundSide::Upper, 6).violated);
    }

    #[test]
    fn sweep_csv_has_the_fixed_format() {
        let rows = vec![SweepRow {
            truncation: 6,
            family: "type_t".into(),
            bound_side: BoundSide::Upper,
            value: 3.0462742152960396,
            violated: true,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "N,type,bound_side,value,violated\n6,type_t,upper,3.046274215,true\n"
        );
    }

    #[test]
    fn classical_trajectories_follow_the_sign_pattern() {
        let scen3 = scen(3, ConstraintMode::Full);
        // Starting at (1, 0): cos is negative at 2pi/3 and 4pi/3, positive at 2pi.
        let m = classical_conditional_matrix(
            &PhasePoint {
                position: 1.0,
                momentum: 0.0,
            },
            &scen3,
        );
        let ones: Vec<String> = m.reduced().iter().map(|r| r.to_string()).collect();
        assert_eq!(ones, ["0", "0", "1"]);

        // The origin never leaves the boundary: all entries are 1/2.
        let still = classical_conditional_matrix(
            &PhasePoint {
                position: 0.0,
                momentum: 0.0,
            },
            &scen3,
        );
        assert!(still
            .reduced()
            .iter()
            .all(|r| *r == Rational::new(BigInt::from(1), BigInt::from(2))));

        // Momentum start at five probes: sin pattern (+, +, -, -, 0).
        let scen5 = scen(5, ConstraintMode::Full);
        let m = classical_conditional_matrix(
            &PhasePoint {
                position: 0.0,
                momentum: 1.0,
            },
            &scen5,
        );
        let vals: Vec<String> = m.reduced().iter().map(|r| r.to_string()).collect();
        assert_eq!(vals, ["1", "1", "0", "0", "1/2"]);
    }

    #[test]
    fn violation_result_json_round_trips() {
        let scen5 = scen(5, ConstraintMode::Full);
        let sum = LinearInequality::from_integers(&[1; 5], Sense::Le, 3);
        let r = max_violation(&sum, &scen5, 3).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"N\":3"));
        assert!(json.contains("\"state_re\""));
        let back: ViolationResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
