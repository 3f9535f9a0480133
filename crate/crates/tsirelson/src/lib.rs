//! Tsirelson inequalities for sequential measurements on a single system.
//!
//! A measurement scenario has one observable with `A` outcomes measured at one
//! of `X` settings (times). A *constrained classical model* is a joint
//! probability distribution over outcome assignments `(a_1, ..., a_X)` — one
//! outcome per setting — that puts zero weight on a declared set of forbidden
//! assignments. The conditional probabilities `p(a|x)` reachable by such
//! models form a polytope; its nontrivial facets are Tsirelson inequalities.
//!
//! The crate has three layers:
//!
//! * [`scenario`] — scenarios, outcome patterns, constraint sets, global
//!   distributions and conditional probability matrices, marginalization, and
//!   an exact feasibility test ([`scenario::has_constrained_model`]) that
//!   returns either a classical model or a separating inequality.
//! * [`polytope`] — exact facet enumeration over the reduced coordinates
//!   `(p(1|1), ..., p(A-1|X))`, affine hulls, and classification of facets
//!   into trivial (probability bounds) and Tsirelson inequalities.
//! * [`oscillator`] — maximal quantum violations for a harmonic oscillator
//!   truncated to the first `N` energy eigenstates, where the measurement asks
//!   "is the particle on the positive half-line?" at probe times
//!   `theta_x = 2 pi x / X`.
//! * [`shellgame`] — a statistical application: detect a shell-game dealer who
//!   removes the ball, by testing trial data against the `X = 3` inequality
//!   `p(empty|1) + p(empty|2) + p(empty|3) <= 2` with Hoeffding margins.
//!
//! All polytope geometry is exact (arbitrary-precision rationals / integers);
//! floating point only enters the oscillator spectra and the statistical test.

pub mod oscillator;
pub mod polytope;
pub mod scenario;
pub mod shellgame;

mod lp;
mod quad;

pub use polytope::{LinearInequality, Rational, Sense};
pub use scenario::Scenario;
