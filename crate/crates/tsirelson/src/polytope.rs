//! Exact polytope geometry over reduced conditional probabilities.
//!
//! For a scenario with `A` outcomes and `X` settings, the reduced coordinates
//! are `(p(1|1), ..., p(A-1|1), p(1|2), ..., p(A-1|X))` — the last outcome of
//! each setting is fixed by normalization. The constrained classical models
//! form the convex hull of the allowed deterministic assignments, which are
//! 0/1 points in this space.
//!
//! [`facet_enumeration`] converts that vertex description into the unique
//! irredundant inequality description: the affine hull as a list of
//! equalities, plus one canonical [`LinearInequality`] per facet. Facets that
//! merely restate `0 <= p(a|x)` or `sum_a p(a|x) <= 1` are "trivial"; the
//! remaining ones are Tsirelson inequalities ([`classify_trivial`]).
//!
//! The enumeration runs the double description method on the cone of valid
//! inequalities `{(c, b) : c . v <= b for every vertex v}` in exact integer
//! arithmetic: the extreme rays of that cone, reduced modulo the affine-hull
//! directions, are exactly the facets. Every returned facet is re-verified
//! against the vertex list (validity, and tightness on an affinely
//! independent set of the right rank), so an internal error cannot produce a
//! silently wrong answer.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::ser::{Error as _, SerializeStruct};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scenario::{ConditionalProbabilityMatrix, Scenario};

/// Exact scalar type for all polytope work.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytopeError {
    #[error("no vertices supplied")]
    EmptyVertexList,
    #[error("facet enumeration needs at least 2 distinct vertices")]
    TooFewVertices,
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("vertex {index} has {got} coordinates, expected {expected}")]
    VertexDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("inequality has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Direction of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    /// The sense obtained by negating both sides of the inequality.
    pub fn flipped(self) -> Self {
        match self {
            Sense::Le => Sense::Ge,
            Sense::Ge => Sense::Le,
            Sense::Eq => Sense::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// A linear constraint `c . p (sense) bound` over reduced coordinates, held in
/// canonical form: integer coefficients and bound with overall gcd 1, and the
/// first nonzero coefficient positive (negating a constraint flips `<=` with
/// `>=`). Two constraints describe the same halfspace or hyperplane iff their
/// canonical forms are equal, so equality, hashing, and ordering are
/// meaningful.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearInequality {
    coeffs: Vec<BigInt>,
    sense: Sense,
    bound: BigInt,
}

impl LinearInequality {
    /// Canonicalizes arbitrary rational data.
    pub fn new(coeffs: Vec<Rational>, sense: Sense, bound: Rational) -> Self {
        let mut scale = BigInt::one();
        for r in coeffs.iter().chain(std::iter::once(&bound)) {
            scale = scale.lcm(r.denom());
        }
        let mut ints: Vec<BigInt> = coeffs
            .iter()
            .map(|r| r.numer() * (&scale / r.denom()))
            .collect();
        let mut bound_int = bound.numer() * (&scale / bound.denom());

        let mut g = BigInt::zero();
        for v in ints.iter().chain(std::iter::once(&bound_int)) {
            g = g.gcd(v);
        }
        if g > BigInt::one() {
            for v in ints.iter_mut() {
                *v /= &g;
            }
            bound_int /= &g;
        }

        let mut sense = sense;
        match ints.iter().find(|v| !v.is_zero()) {
            Some(first) if first.is_negative() => {
                for v in ints.iter_mut() {
                    *v = -std::mem::take(v);
                }
                bound_int = -bound_int;
                sense = sense.flipped();
            }
            None if sense == Sense::Eq && bound_int.is_negative() => {
                bound_int = -bound_int;
            }
            _ => {}
        }

        Self {
            coeffs: ints,
            sense,
            bound: bound_int,
        }
    }

    /// Canonicalizes integer data (convenience for hand-written constraints).
    pub fn from_integers(coeffs: &[i64], sense: Sense, bound: i64) -> Self {
        Self::new(
            coeffs
                .iter()
                .map(|&c| Rational::from_integer(BigInt::from(c)))
                .collect(),
            sense,
            Rational::from_integer(BigInt::from(bound)),
        )
    }

    /// Canonical integer coefficients.
    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Canonical integer bound.
    pub fn bound(&self) -> &BigInt {
        &self.bound
    }

    pub fn bound_rational(&self) -> Rational {
        Rational::from_integer(self.bound.clone())
    }

    pub fn dimension(&self) -> usize {
        self.coeffs.len()
    }

    /// `c . point`, exact. Panics on length mismatch (use [`evaluate`] for a
    /// checked entry point).
    pub fn value(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.coeffs.len(), "dimension mismatch");
        self.coeffs
            .iter()
            .zip(point)
            .fold(Rational::zero(), |acc, (c, p)| acc + p * c)
    }

    /// Signed slack: nonnegative iff the constraint holds at `point`.
    /// For `<=` this is `bound - c.p`, for `>=` it is `c.p - bound`, and for
    /// `=` it is `-|c.p - bound|`.
    pub fn slack(&self, point: &[Rational]) -> Rational {
        let v = self.value(point);
        let b = self.bound_rational();
        match self.sense {
            Sense::Le => b - v,
            Sense::Ge => v - b,
            Sense::Eq => -(v - b).abs(),
        }
    }

    pub fn satisfied(&self, point: &[Rational]) -> bool {
        !self.slack(point).is_negative()
    }

    /// Renders with `p(a|x)` labels, e.g. `p(1|1) + p(1|2) - p(1|3) <= 2`.
    pub fn render(&self, scenario: &Scenario) -> String {
        let per_setting = scenario.outcomes() as usize - 1;
        let mut out = String::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let magnitude = c.abs();
            if out.is_empty() {
                if c.is_negative() {
                    out.push('-');
                }
            } else if c.is_negative() {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if !magnitude.is_one() {
                out.push_str(&format!("{magnitude} "));
            }
            let outcome = i % per_setting + 1;
            let setting = i / per_setting + 1;
            out.push_str(&format!("p({outcome}|{setting})"));
        }
        if out.is_empty() {
            out.push('0');
        }
        format!("{out} {} {}", self.sense.symbol(), self.bound)
    }

    fn to_wire(&self) -> Result<LinearInequalityWire, String> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.to_i128())
            .collect::<Option<Vec<i128>>>()
            .ok_or("inequality coefficient overflows i128")?;
        let bound = self
            .bound
            .to_i128()
            .ok_or("inequality bound overflows i128")?;
        Ok(LinearInequalityWire {
            coeffs,
            sense: self.sense,
            bound,
        })
    }
}

impl fmt::Display for LinearInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "] {} {}", self.sense.symbol(), self.bound)
    }
}

#[derive(Serialize, Deserialize)]
struct LinearInequalityWire {
    coeffs: Vec<i128>,
    sense: Sense,
    bound: i128,
}

impl From<LinearInequalityWire> for LinearInequality {
    fn from(wire: LinearInequalityWire) -> Self {
        LinearInequality::new(
            wire.coeffs
                .iter()
                .map(|&c| Rational::from_integer(BigInt::from(c)))
                .collect(),
            wire.sense,
            Rational::from_integer(BigInt::from(wire.bound)),
        )
    }
}

impl Serialize for LinearInequality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_wire()
            .map_err(S::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinearInequality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(LinearInequalityWire::deserialize(deserializer)?.into())
    }
}

/// Checked evaluation of an inequality's slack at a conditional matrix.
pub fn evaluate(
    ineq: &LinearInequality,
    cond: &ConditionalProbabilityMatrix,
) -> Result<Rational, PolytopeError> {
    let point = cond.reduced();
    if point.len() != ineq.dimension() {
        return Err(PolytopeError::DimensionMismatch {
            expected: ineq.dimension(),
            got: point.len(),
        });
    }
    Ok(ineq.slack(&point))
}

/// Whether an inequality already follows from probability theory alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InequalityClass {
    Trivial,
    Tsirelson,
}

/// Classifies an inequality as trivial (it holds for *every* conditional
/// probability matrix, constrained or not) or Tsirelson (it can be violated
/// without the constraints).
///
/// Deterministic assignments extremize each setting independently, so the
/// unconstrained extreme of `c . p` is computed per setting: for `<=`, each
/// setting contributes `max(0, max_a c_(x,a))` (the dropped outcome
/// contributes 0).
pub fn classify_trivial(
    ineq: &LinearInequality,
    scenario: &Scenario,
) -> Result<InequalityClass, PolytopeError> {
    if ineq.dimension() != scenario.reduced_dimension() {
        return Err(PolytopeError::DimensionMismatch {
            expected: scenario.reduced_dimension(),
            got: ineq.dimension(),
        });
    }
    let per_setting = scenario.outcomes() as usize - 1;
    let trivial = match ineq.sense() {
        Sense::Le => {
            let mut extreme = BigInt::zero();
            for chunk in ineq.coefficients().chunks(per_setting) {
                let best = chunk.iter().max().unwrap();
                if best.is_positive() {
                    extreme += best;
                }
            }
            extreme <= *ineq.bound()
        }
        Sense::Ge => {
            let mut extreme = BigInt::zero();
            for chunk in ineq.coefficients().chunks(per_setting) {
                let worst = chunk.iter().min().unwrap();
                if worst.is_negative() {
                    extreme += worst;
                }
            }
            extreme >= *ineq.bound()
        }
        // An equality satisfied by every matrix forces the zero constraint.
        Sense::Eq => {
            ineq.coefficients().iter().all(BigInt::is_zero) && ineq.bound().is_zero()
        }
    };
    Ok(if trivial {
        InequalityClass::Trivial
    } else {
        InequalityClass::Tsirelson
    })
}

/// Affine hull of a vertex set: its dimension and the canonical equalities
/// cutting it out of the ambient space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineHull {
    pub dimension: usize,
    pub equalities: Vec<LinearInequality>,
}

/// Full facet description of the convex hull of a vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetList {
    /// Dimension of the affine hull.
    pub dimension: usize,
    /// Equalities satisfied by every vertex (empty iff full-dimensional).
    pub equalities: Vec<LinearInequality>,
    /// Canonical facet inequalities, sorted.
    pub facets: Vec<LinearInequality>,
}

impl FacetList {
    pub fn classified(&self, scenario: &Scenario) -> Result<ClassifiedFacetList, PolytopeError> {
        let facets = self
            .facets
            .iter()
            .map(|f| {
                Ok(ClassifiedFacet {
                    inequality: f.clone(),
                    class: classify_trivial(f, scenario)?,
                })
            })
            .collect::<Result<Vec<_>, PolytopeError>>()?;
        Ok(ClassifiedFacetList {
            dimension: self.dimension,
            equalities: self.equalities.clone(),
            facets,
        })
    }

    /// The Tsirelson facets only.
    pub fn nontrivial(&self, scenario: &Scenario) -> Result<Vec<LinearInequality>, PolytopeError> {
        let mut out = Vec::new();
        for f in &self.facets {
            if classify_trivial(f, scenario)? == InequalityClass::Tsirelson {
                out.push(f.clone());
            }
        }
        Ok(out)
    }
}

/// A facet together with its classification; the serialized form is
/// `{"coeffs": [1,1,1], "sense": "<=", "bound": 2, "class": "tsirelson"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedFacet {
    pub inequality: LinearInequality,
    pub class: InequalityClass,
}

impl Serialize for ClassifiedFacet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = self.inequality.to_wire().map_err(S::Error::custom)?;
        let mut st = serializer.serialize_struct("ClassifiedFacet", 4)?;
        st.serialize_field("coeffs", &wire.coeffs)?;
        st.serialize_field("sense", &wire.sense)?;
        st.serialize_field("bound", &wire.bound)?;
        st.serialize_field("class", &self.class)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ClassifiedFacet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            coeffs: Vec<i128>,
            sense: Sense,
            bound: i128,
            class: InequalityClass,
        }
        let w = Wire::deserialize(deserializer)?;
        if w.coeffs.is_empty() {
            return Err(D::Error::custom("facet with no coefficients"));
        }
        Ok(ClassifiedFacet {
            inequality: LinearInequalityWire {
                coeffs: w.coeffs,
                sense: w.sense,
                bound: w.bound,
            }
            .into(),
            class: w.class,
        })
    }
}

/// Serializable facet report (the `derive` output format).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedFacetList {
    pub dimension: usize,
    pub equalities: Vec<LinearInequality>,
    pub facets: Vec<ClassifiedFacet>,
}

/// Computes the affine hull of a nonempty vertex set.
pub fn affine_hull(vertices: &[ConditionalProbabilityMatrix]) -> Result<AffineHull, PolytopeError> {
    let points = reduced_points(vertices)?;
    let hull = hull_basis(&points);
    Ok(AffineHull {
        dimension: hull.dimension,
        equalities: hull.equalities(),
    })
}

/// Enumerates all facets of the convex hull of the given vertices.
///
/// Vertices must be distinct and at least two. The output is canonical and
/// deterministic: equalities and facets are sorted, and each facet is the
/// unique representative with zero coefficients on the affine hull's free
/// coordinates.
pub fn facet_enumeration(
    vertices: &[ConditionalProbabilityMatrix],
) -> Result<FacetList, PolytopeError> {
    let points = reduced_points(vertices)?;
    let mut seen: BTreeSet<&[Rational]> = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        if !seen.insert(p.as_slice()) {
            let j = points.iter().position(|q| q == p).unwrap();
            return Err(PolytopeError::DuplicateVertex(j, i));
        }
    }
    if points.len() < 2 {
        return Err(PolytopeError::TooFewVertices);
    }

    let hull = hull_basis(&points);
    let dim = points[0].len();

    // Valid-inequality cone: y = (c, b) with (-v, 1) . y >= 0 per vertex v.
    let rows: Vec<Vec<BigInt>> = points
        .iter()
        .map(|v| {
            let mut scale = BigInt::one();
            for r in v {
                scale = scale.lcm(r.denom());
            }
            let mut row: Vec<BigInt> = v
                .iter()
                .map(|r| -(r.numer() * (&scale / r.denom())))
                .collect();
            row.push(scale);
            make_primitive(&mut row);
            row
        })
        .collect();

    let rays = double_description(&rows, dim + 1);

    let mut facets = BTreeSet::new();
    for ray in rays {
        let mut coeffs: Vec<Rational> = ray.dir[..dim]
            .iter()
            .map(|c| Rational::from_integer(c.clone()))
            .collect();
        let mut bound = Rational::from_integer(ray.dir[dim].clone());
        // Reduce modulo the affine hull so each facet has one representative.
        for nv in &hull.nullspace {
            let t = coeffs[nv.free_col].clone();
            if t.is_zero() {
                continue;
            }
            for (c, n) in coeffs.iter_mut().zip(&nv.normal) {
                *c -= &t * n;
            }
            bound -= &t * &nv.bound;
        }
        if coeffs.iter().all(Rational::is_zero) {
            continue; // a lineality remnant, not a facet
        }
        facets.insert(LinearInequality::new(coeffs, Sense::Le, bound));
    }

    // Independent re-verification: every facet valid everywhere and tight on
    // a (dimension-1)-dimensional vertex subset. A failure here is a bug.
    for facet in &facets {
        let tight: Vec<&Vec<Rational>> = points
            .iter()
            .filter(|p| {
                let s = facet.slack(p);
                assert!(
                    !s.is_negative(),
                    "internal error: facet {facet} cut off a vertex"
                );
                s.is_zero()
            })
            .collect();
        assert!(
            affine_rank(&tight) == hull.dimension.saturating_sub(1),
            "internal error: facet {facet} is not tight on a rank-{} set",
            hull.dimension.saturating_sub(1)
        );
    }

    Ok(FacetList {
        dimension: hull.dimension,
        equalities: hull.equalities(),
        facets: facets.into_iter().collect(),
    })
}

fn reduced_points(
    vertices: &[ConditionalProbabilityMatrix],
) -> Result<Vec<Vec<Rational>>, PolytopeError> {
    if vertices.is_empty() {
        return Err(PolytopeError::EmptyVertexList);
    }
    let expected = vertices[0].reduced().len();
    vertices
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let p = v.reduced();
            if p.len() != expected {
                Err(PolytopeError::VertexDimension {
                    index,
                    expected,
                    got: p.len(),
                })
            } else {
                Ok(p)
            }
        })
        .collect()
}

/// One affine-hull equality in nullspace form: `normal . p = bound` with
/// `normal[free_col] = 1` and zero on all other free columns.
struct NullVector {
    normal: Vec<Rational>,
    bound: Rational,
    free_col: usize,
}

struct HullBasis {
    dimension: usize,
    nullspace: Vec<NullVector>,
}

impl HullBasis {
    fn equalities(&self) -> Vec<LinearInequality> {
        let mut eqs: Vec<LinearInequality> = self
            .nullspace
            .iter()
            .map(|nv| LinearInequality::new(nv.normal.clone(), Sense::Eq, nv.bound.clone()))
            .collect();
        eqs.sort();
        eqs
    }
}

fn hull_basis(points: &[Vec<Rational>]) -> HullBasis {
    let base = &points[0];
    let cols = base.len();
    let mut diffs: Vec<Vec<Rational>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    let pivots = rref(&mut diffs);
    let dimension = pivots.len();

    let mut nullspace = Vec::with_capacity(cols - dimension);
    for free_col in 0..cols {
        if pivots.contains(&free_col) {
            continue;
        }
        let mut normal = vec![Rational::zero(); cols];
        normal[free_col] = Rational::one();
        for (row, &pivot_col) in pivots.iter().enumerate() {
            normal[pivot_col] = -diffs[row][free_col].clone();
        }
        let bound = normal
            .iter()
            .zip(base)
            .fold(Rational::zero(), |acc, (n, b)| acc + n * b);
        nullspace.push(NullVector {
            normal,
            bound,
            free_col,
        });
    }
    HullBasis {
        dimension,
        nullspace,
    }
}

/// In-place reduced row echelon form; returns the pivot column of each
/// surviving row (zero rows are dropped).
fn rref(rows: &mut Vec<Vec<Rational>>) -> Vec<usize> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut next_row = 0;
    for col in 0..cols {
        let Some(src) = (next_row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(next_row, src);
        let inv = rows[next_row][col].recip();
        for entry in rows[next_row].iter_mut() {
            *entry *= &inv;
        }
        for r in 0..rows.len() {
            if r != next_row && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..cols {
                    let delta = &factor * &rows[next_row][c];
                    rows[r][c] -= delta;
                }
            }
        }
        pivots.push(col);
        next_row += 1;
        if next_row == rows.len() {
            break;
        }
    }
    rows.truncate(next_row);
    pivots
}

/// Affine rank (dimension of the affine span) of a point set.
fn affine_rank(points: &[&Vec<Rational>]) -> usize {
    match points.split_first() {
        None => 0, // empty set: rank of the empty flat
        Some((base, rest)) => {
            let mut diffs: Vec<Vec<Rational>> = rest
                .iter()
                .map(|p| p.iter().zip(base.iter()).map(|(a, b)| a - b).collect())
                .collect();
            rref(&mut diffs).len()
        }
    }
}

// ---------------------------------------------------------------------------
// Double description in exact integer arithmetic.

/// Constraint indices a ray is tight on, as a bitset.
#[derive(Clone)]
struct TightSet {
    words: Vec<u64>,
}

impl TightSet {
    fn new(capacity: usize) -> Self {
        Self {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn intersection(&self, other: &Self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn is_subset_of(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }
}

struct Ray {
    dir: Vec<BigInt>,
    tight: TightSet,
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Divides out the gcd of the entries (no-op for the zero vector).
fn make_primitive(v: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        g = g.gcd(x);
    }
    if g > BigInt::one() {
        for x in v.iter_mut() {
            *x /= &g;
        }
    }
}

/// Computes the extreme rays of `{y : row . y >= 0 for all rows}`.
///
/// State is a lineality basis plus the extreme rays of the pointed part.
/// Each constraint either pivots a lineality direction out (projecting the
/// rest to its kernel) or splits the ray list, joining adjacent positive and
/// negative rays. Adjacency is the standard combinatorial test on tight sets.
fn double_description(rows: &[Vec<BigInt>], dim: usize) -> Vec<Ray> {
    let m = rows.len();
    let mut lines: Vec<Vec<BigInt>> = (0..dim)
        .map(|i| {
            let mut e = vec![BigInt::zero(); dim];
            e[i] = BigInt::one();
            e
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (ci, a) in rows.iter().enumerate() {
        if let Some(p) = lines.iter().position(|l| !dot(a, l).is_zero()) {
            // Pivot: one lineality direction leaves, becoming a ray on the
            // nonnegative side of the new constraint.
            let mut pivot = lines.remove(p);
            if dot(a, &pivot).is_negative() {
                for x in pivot.iter_mut() {
                    *x = -std::mem::take(x);
                }
            }
            let dp = dot(a, &pivot);
            for l in lines.iter_mut() {
                let dl = dot(a, l);
                if !dl.is_zero() {
                    *l = l
                        .iter()
                        .zip(&pivot)
                        .map(|(x, pv)| x * &dp - pv * &dl)
                        .collect();
                    make_primitive(l);
                }
            }
            for r in rays.iter_mut() {
                let dr = dot(a, &r.dir);
                if !dr.is_zero() {
                    r.dir = r
                        .dir
                        .iter()
                        .zip(&pivot)
                        .map(|(x, pv)| x * &dp - pv * &dr)
                        .collect();
                    make_primitive(&mut r.dir);
                }
                // Every adjusted ray lands exactly on the new hyperplane.
                r.tight.insert(ci);
            }
            let mut tight = TightSet::new(m);
            for j in 0..ci {
                tight.insert(j);
            }
            rays.push(Ray { dir: pivot, tight });
        } else {
            let vals: Vec<BigInt> = rays.iter().map(|r| dot(a, &r.dir)).collect();
            if !vals.iter().any(|v| v.is_negative()) {
                for (r, v) in rays.iter_mut().zip(&vals) {
                    if v.is_zero() {
                        r.tight.insert(ci);
                    }
                }
                continue;
            }
            let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
            let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();

            let mut new_rays = Vec::new();
            for &ip in &pos {
                for &ineg in &neg {
                    if !adjacent(&rays, ip, ineg) {
                        continue;
                    }
                    let mut dir: Vec<BigInt> = rays[ineg]
                        .dir
                        .iter()
                        .zip(&rays[ip].dir)
                        .map(|(n, p)| n * &vals[ip] - p * &vals[ineg])
                        .collect();
                    make_primitive(&mut dir);
                    let mut tight = rays[ip].tight.intersection(&rays[ineg].tight);
                    tight.insert(ci);
                    new_rays.push(Ray { dir, tight });
                }
            }

            let mut next = Vec::with_capacity(pos.len() + new_rays.len());
            for (i, r) in rays.into_iter().enumerate() {
                if vals[i].is_negative() {
                    continue;
                }
                let mut r = r;
                if vals[i].is_zero() {
                    r.tight.insert(ci);
                }
                next.push(r);
            }
            next.extend(new_rays);
            rays = next;
        }
    }
    rays
}

/// Rays `i` and `j` are adjacent iff no third ray is tight on everything they
/// are both tight on.
fn adjacent(rays: &[Ray], i: usize, j: usize) -> bool {
    let common = rays[i].tight.intersection(&rays[j].tight);
    rays.iter()
        .enumerate()
        .all(|(k, r)| k == i || k == j || !common.is_subset_of(&r.tight))
}
