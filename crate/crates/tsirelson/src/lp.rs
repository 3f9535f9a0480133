//! Exact linear feasibility via phase-1 simplex over rationals.
//!
//! Solves "is `rhs` a nonnegative combination of the given columns?" with
//! Bland's rule, so termination is guaranteed without any tolerance. The
//! infeasible answer carries a Farkas certificate recovered from the reduced
//! costs of the artificial columns.

use num_traits::{One, Signed, Zero};

use crate::polytope::Rational;

/// Finds `x >= 0` with `sum_j x_j * columns[j] = rhs`, or returns a
/// certificate `y` with `y . columns[j] <= 0` for every `j` and `y . rhs > 0`
/// (proving no such `x` exists).
pub(crate) fn feasible_combination(
    columns: &[Vec<Rational>],
    rhs: &[Rational],
) -> Result<Vec<Rational>, Vec<Rational>> {
    let m = rhs.len();
    let k = columns.len();
    debug_assert!(columns.iter().all(|c| c.len() == m));

    // Orient rows so the artificial identity basis starts feasible.
    let flip: Vec<bool> = rhs.iter().map(Signed::is_negative).collect();
    let width = k + m + 1; // structural | artificial | rhs
    let mut t: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            let mut row = Vec::with_capacity(width);
            for col in columns {
                row.push(if flip[i] { -&col[i] } else { col[i].clone() });
            }
            for j in 0..m {
                row.push(if j == i { Rational::one() } else { Rational::zero() });
            }
            row.push(if flip[i] { -&rhs[i] } else { rhs[i].clone() });
            row
        })
        .collect();

    // Reduced costs for minimizing the artificial sum; the rhs column carries
    // the negated objective along for free.
    let mut rc: Vec<Rational> = (0..width)
        .map(|j| {
            let col_sum = (0..m).fold(Rational::zero(), |acc, i| acc + &t[i][j]);
            let cost = if (k..k + m).contains(&j) {
                Rational::one()
            } else {
                Rational::zero()
            };
            cost - col_sum
        })
        .collect();
    let mut basis: Vec<usize> = (k..k + m).collect();

    // Bland's rule: smallest eligible index enters; ratio ties leave by
    // smallest basic index. No cycling, exact arithmetic throughout.
    loop {
        let Some(e) = (0..k + m).find(|&j| rc[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if !t[i][e].is_positive() {
                continue;
            }
            let ratio = &t[i][width - 1] / &t[i][e];
            let better = match &leave {
                None => true,
                Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let (l, _) = leave.expect("phase-1 objective is bounded below zero");

        let inv = t[l][e].recip();
        for v in t[l].iter_mut() {
            *v *= &inv;
        }
        for i in 0..m {
            if i == l || t[i][e].is_zero() {
                continue;
            }
            let f = std::mem::replace(&mut t[i][e], Rational::zero());
            for j in 0..width {
                // Column e is already exact zero from the replace above.
                if j != e && !t[l][j].is_zero() {
                    let d = &f * &t[l][j];
                    t[i][j] -= d;
                }
            }
        }
        if !rc[e].is_zero() {
            let f = std::mem::replace(&mut rc[e], Rational::zero());
            for j in 0..width {
                if j != e && !t[l][j].is_zero() {
                    let d = &f * &t[l][j];
                    rc[j] -= d;
                }
            }
        }
        basis[l] = e;
    }

    let objective = -rc[width - 1].clone();
    debug_assert!(!objective.is_negative());
    if objective.is_zero() {
        let mut x = vec![Rational::zero(); k];
        for (i, &b) in basis.iter().enumerate() {
            if b < k {
                x[b] = t[i][width - 1].clone();
            }
        }
        debug_assert!(verify_feasible(columns, rhs, &x));
        Ok(x)
    } else {
        // Simplex multipliers y satisfy rc_art_i = 1 - y_i in the oriented
        // system; undo the orientation per row.
        let y: Vec<Rational> = (0..m)
            .map(|i| {
                let oriented = Rational::one() - &rc[k + i];
                if flip[i] {
                    -oriented
                } else {
                    oriented
                }
            })
            .collect();
        debug_assert!(verify_certificate(columns, rhs, &y));
        Err(y)
    }
}

#[cfg(debug_assertions)]
fn verify_feasible(columns: &[Vec<Rational>], rhs: &[Rational], x: &[Rational]) -> bool {
    if x.iter().any(Signed::is_negative) {
        return false;
    }
    (0..rhs.len()).all(|i| {
        let combo = columns
            .iter()
            .zip(x)
            .fold(Rational::zero(), |acc, (col, xi)| acc + &col[i] * xi);
        combo == rhs[i]
    })
}

#[cfg(debug_assertions)]
fn verify_certificate(columns: &[Vec<Rational>], rhs: &[Rational], y: &[Rational]) -> bool {
    let against = |v: &[Rational]| {
        v.iter()
            .zip(y)
            .fold(Rational::zero(), |acc, (vi, yi)| acc + vi * yi)
    };
    columns.iter().all(|c| !against(c).is_positive()) && against(rhs).is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn cols(data: &[&[i64]]) -> Vec<Vec<Rational>> {
        data.iter()
            .map(|c| c.iter().map(|&v| rat(v, 1)).collect())
            .collect()
    }

    #[test]
    fn identity_columns_read_off_the_rhs() {
        let columns = cols(&[&[1, 0], &[0, 1]]);
        let x = feasible_combination(&columns, &[rat(1, 2), rat(1, 3)]).unwrap();
        assert_eq!(x, vec![rat(1, 2), rat(1, 3)]);
    }

    #[test]
    fn negative_rhs_needs_a_negative_certificate() {
        let columns = cols(&[&[1], &[2]]);
        let y = feasible_combination(&columns, &[rat(-1, 1)]).unwrap_err();
        assert_eq!(y, vec![rat(-1, 1)]);
    }

    #[test]
    fn convex_combination_with_normalization_row() {
        // Columns are 0/1 vertices with an appended 1; the solution is a
        // distribution mixing the first and last columns.
        let columns = cols(&[&[0, 0, 1], &[1, 0, 1], &[1, 1, 1]]);
        let x = feasible_combination(
            &columns,
            &[rat(1, 2), rat(1, 2), rat(1, 1)],
        )
        .unwrap();
        assert_eq!(x, vec![rat(1, 2), rat(0, 1), rat(1, 2)]);
    }

    #[test]
    fn farkas_dual_of_the_cut_corner_system() {
        // Vertex columns of the three-setting scenario without 111, plus the
        // normalization row; target (1,1,1) is out of reach and the dual pins
        // the separating sum inequality with multipliers (1,1,1,-2).
        let columns = cols(&[
            &[1, 1, 0, 1],
            &[1, 0, 1, 1],
            &[1, 0, 0, 1],
            &[0, 1, 1, 1],
            &[0, 1, 0, 1],
            &[0, 0, 1, 1],
            &[0, 0, 0, 1],
        ]);
        let rhs = [rat(1, 1), rat(1, 1), rat(1, 1), rat(1, 1)];
        let y = feasible_combination(&columns, &rhs).unwrap_err();
        assert_eq!(y, vec![rat(1, 1), rat(1, 1), rat(1, 1), rat(-2, 1)]);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // Multiple zero-ratio pivots force Bland's tie-breaking.
        let columns = cols(&[&[1, 1, 0], &[1, 0, 1], &[0, 1, 1], &[1, 1, 1]]);
        let x = feasible_combination(
            &columns,
            &[rat(1, 1), rat(1, 1), rat(1, 1)],
        )
        .unwrap();
        let total: Rational = x.iter().fold(Rational::zero(), |a, b| a + b);
        assert!(x.iter().all(|v| !v.is_negative()));
        assert!(total.is_positive());
    }

    #[test]
    fn empty_column_set_is_infeasible_for_nonzero_rhs() {
        let y = feasible_combination(&[], &[rat(1, 1)]).unwrap_err();
        assert_eq!(y, vec![rat(1, 1)]);
    }
}
