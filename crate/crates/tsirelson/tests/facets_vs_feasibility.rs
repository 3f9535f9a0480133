//! Cross-validation of the two membership routes: a conditional-probability
//! matrix satisfies every derived facet (and hull equality) exactly when the
//! exact LP finds a classical model for it, and each route's certificate
//! checks out against the other's data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use tsirelson::polytope::{facet_enumeration, Rational};
use tsirelson::scenario::{
    enumerate_constrained_vertices, has_constrained_model, marginalize, parse_pattern_list,
    ConditionalProbabilityMatrix, ConstraintSet,
};
use tsirelson::Scenario;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn battery() -> Vec<(Scenario, ConstraintSet)> {
    [
        (2, 2, ""),
        (2, 2, "11"),
        (2, 3, "111"),
        (2, 3, "111,222"),
        (2, 3, "111,212"),
        (3, 2, "11,22"),
        (2, 5, "11111,22222,21212,12121"),
    ]
    .into_iter()
    .map(|(a, x, forb)| {
        let s = Scenario::new(a, x).unwrap();
        let c = if forb.is_empty() {
            ConstraintSet::empty()
        } else {
            parse_pattern_list(forb, &s).unwrap()
        };
        (s, c)
    })
    .collect()
}

#[test]
fn membership_agrees_with_the_facet_description() {
    let mut rng = ChaCha12Rng::seed_from_u64(20240817);
    for (scenario, constraints) in battery() {
        let vertices = enumerate_constrained_vertices(&scenario, &constraints).unwrap();
        let list = facet_enumeration(&vertices).unwrap();
        let dim = scenario.reduced_dimension();

        let mut tested = 0;
        let mut classical = 0;
        while tested < 150 {
            // Coarse rational grid points; denominators keep the LP small.
            let coords: Vec<Rational> =
                (0..dim).map(|_| rat(rng.random_range(0..=12), 12)).collect();
            let Ok(cond) = ConditionalProbabilityMatrix::from_reduced(&scenario, &coords) else {
                continue; // outside the probability simplex for A > 2
            };
            tested += 1;

            let inside = list.equalities.iter().all(|e| e.satisfied(&coords))
                && list.facets.iter().all(|f| f.satisfied(&coords));
            let check = has_constrained_model(&cond, &scenario, &constraints).unwrap();
            assert_eq!(
                check.is_classical(),
                inside,
                "LP and facets disagree for {scenario:?} at {coords:?}"
            );

            if let Some(model) = check.model() {
                classical += 1;
                assert!(model.respects(&constraints));
                assert_eq!(marginalize(model, &scenario).unwrap(), cond);
            }
            if let Some(witness) = check.witness() {
                // The witness must separate the point from every vertex.
                assert!(!witness.satisfied(&coords));
                for v in &vertices {
                    assert!(witness.satisfied(&v.reduced()));
                }
            }
        }
        // The grid must exercise both branches for the comparison to mean
        // anything (unconstrained scenarios are classical everywhere).
        assert!(classical > 0, "no classical points for {scenario:?}");
        if !constraints.is_empty() {
            assert!(classical < tested, "no excluded points for {scenario:?}");
        }
    }
}

#[test]
fn vertices_themselves_are_classical_and_tight() {
    for (scenario, constraints) in battery() {
        let vertices = enumerate_constrained_vertices(&scenario, &constraints).unwrap();
        let list = facet_enumeration(&vertices).unwrap();
        for v in &vertices {
            let check = has_constrained_model(v, &scenario, &constraints).unwrap();
            assert!(check.is_classical());
            // A polytope vertex of dimension d saturates at least d facets.
            let tight = list
                .facets
                .iter()
                .filter(|f| f.slack(&v.reduced()) == Rational::from_integer(0.into()))
                .count();
            assert!(
                tight >= list.dimension,
                "vertex {:?} tight on {tight} < {} facets",
                v.reduced(),
                list.dimension
            );
        }
    }
}
