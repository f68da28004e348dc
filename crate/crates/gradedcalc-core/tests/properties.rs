//! Randomized law checks for the public algebra, one section per module:
//! sign bookkeeping, coefficient arithmetic, series products, morphism
//! pullbacks, vector-field brackets, the Cartan calculus, and the
//! bundle/atlas transition machinery. Each test draws its data from seeded
//! generators, so proptest shrinks over the seed while the objects stay
//! well-formed by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num::{One, Zero};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use gradedcalc_core::atlas::{
    check_global_function, product_morphism, GlobalFunction, GluingData,
};
use gradedcalc_core::bundles::shifted_bundle_ek;
use gradedcalc_core::coeffs::{BaseCoefficient, BasePoint, Rat};
use gradedcalc_core::fields::{related_check, VectorField};
use gradedcalc_core::forms::{pullback_form, Form, ShiftedSystem};
use gradedcalc_core::grading::{
    enumerate_all_indices, enumerate_indices, epsilon, Coord, CoordinateSystem, MultiIndex,
};
use gradedcalc_core::morphisms::{DegreeBlock, DomainMorphism};
use gradedcalc_core::reference::{enumerate_by_filter, epsilon_by_word_reordering};
use gradedcalc_core::series::{GradedFunction, Truncation};
use gradedcalc_testgen as gen;

fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// (−1)^e as an exact rational.
fn parity_sign(e: i64) -> Rat {
    if e.rem_euclid(2) == 0 {
        Rat::one()
    } else {
        -Rat::one()
    }
}

/// Random rational-function coefficient (nonzero denominator).
fn random_rational_coefficient(rng: &mut StdRng, nvars: usize) -> BaseCoefficient {
    loop {
        let num = gen::random_poly(rng, nvars, 2, 2);
        let den = gen::random_poly(rng, nvars, 1, 2);
        if let Ok(c) = BaseCoefficient::new(num, den) {
            return c;
        }
    }
}

/// All exponent vectors over `nvars` variables with total order ≤ `q`.
fn derivative_orders(nvars: usize, q: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..nvars {
        let mut next = Vec::new();
        for stem in &out {
            let used: u32 = stem.iter().sum();
            for e in 0..=(q - used) {
                let mut v = stem.clone();
                v.push(e);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Every point of the integer grid {−2,…,2}^nvars, as exact rationals.
fn rational_grid(nvars: usize) -> Vec<BasePoint> {
    let mut stems = vec![Vec::new()];
    for _ in 0..nvars {
        let mut next = Vec::new();
        for stem in &stems {
            for v in -2i64..=2 {
                let mut q = stem.clone();
                q.push(gen::rat(v, 1));
                next.push(q);
            }
        }
        stems = next;
    }
    stems.into_iter().map(BasePoint).collect()
}

/// Functional equality of morphisms: same endpoints and matching pullbacks
/// of every target coordinate at the common resolution.
fn morphisms_match(a: &DomainMorphism, b: &DomainMorphism) -> bool {
    a.source() == b.source()
        && a.target() == b.target()
        && a
            .target()
            .coords()
            .all(|c| a.pullback_coordinate(c).agrees_with(&b.pullback_coordinate(c)))
}

fn fields_match(a: &VectorField, b: &VectorField) -> bool {
    a.components()
        .iter()
        .zip(b.components())
        .all(|(x, y)| x.agrees_with(y))
}

fn forms_match(a: &Form, b: &Form) -> bool {
    a.value().agrees_with(b.value())
}

/// Transport of a field on the target of `phi` to its source through the
/// mutually inverse pair `(phi, psi)`: components `φ*(Y(ψ*(𝕫^b)))`.
fn transport_field(y: &VectorField, phi: &DomainMorphism, psi: &DomainMorphism) -> VectorField {
    let src = phi.source().clone();
    let comps = src
        .coords()
        .map(|c| {
            let through = psi.pullback_coordinate(c);
            let moved = y.apply(&through).expect("matching systems");
            phi.pullback(&moved).expect("matching systems")
        })
        .collect();
    VectorField::new(src, y.degree(), comps).expect("transport preserves degrees")
}

fn block_product(left: &DegreeBlock, right: &DegreeBlock) -> Vec<Vec<Rat>> {
    assert_eq!(left.cols, right.rows, "inner dimensions agree");
    (0..left.rows)
        .map(|r| {
            (0..right.cols)
                .map(|c| {
                    let mut s = Rat::zero();
                    for k in 0..left.cols {
                        s += left.entries[r][k].clone() * right.entries[k][c].clone();
                    }
                    s
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sign bookkeeping
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reordering_signs_match_the_word_oracle(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let indices = enumerate_all_indices(&cs, 4);
        for _ in 0..8 {
            let p = &indices[rng.gen_range(0..indices.len())];
            let q = &indices[rng.gen_range(0..indices.len())];
            prop_assert_eq!(epsilon(p, q, &cs), epsilon_by_word_reordering(p, q, &cs));
        }
    }

    #[test]
    fn reordering_signs_compose_associatively(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, false, false);
        let indices = enumerate_all_indices(&cs, 4);
        for _ in 0..8 {
            let p = &indices[rng.gen_range(0..indices.len())];
            let q = &indices[rng.gen_range(0..indices.len())];
            let r = &indices[rng.gen_range(0..indices.len())];
            let (pq, qr) = match (MultiIndex::sum(p, q, &cs), MultiIndex::sum(q, r, &cs)) {
                (Ok(pq), Ok(qr)) => (pq, qr),
                _ => continue,
            };
            let lhs = epsilon(p, q, &cs) * epsilon(&pq, r, &cs);
            let rhs = epsilon(q, r, &cs) * epsilon(p, &qr, &cs);
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn reordering_signs_swap_with_the_degree_parity(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, true, false);
        let indices = enumerate_all_indices(&cs, 4);
        for _ in 0..8 {
            let p = &indices[rng.gen_range(0..indices.len())];
            let q = &indices[rng.gen_range(0..indices.len())];
            let swap = if (p.degree(&cs) * q.degree(&cs)).rem_euclid(2) == 0 { 1 } else { -1 };
            prop_assert_eq!(epsilon(p, q, &cs), swap * epsilon(q, p, &cs));
        }
    }

    #[test]
    fn degree_enumeration_matches_the_filter_oracle(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, false, false);
        for w in 0..=4u32 {
            let mut union = Vec::new();
            for k in gen::realizable_degrees(&cs, w) {
                let fast = enumerate_indices(&cs, k, w);
                let slow = enumerate_by_filter(&cs, k, w);
                prop_assert_eq!(&fast, &slow);
                let distinct: BTreeSet<&MultiIndex> = fast.iter().collect();
                prop_assert_eq!(distinct.len(), fast.len(), "no duplicates");
                union.extend(fast);
            }
            let mut all = enumerate_all_indices(&cs, w);
            union.sort();
            all.sort();
            prop_assert_eq!(union, all, "degree slices partition the weight ball");
        }
    }
}

// ---------------------------------------------------------------------------
// Coefficient arithmetic
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficients_satisfy_the_field_axioms(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let nvars = rng.gen_range(1..=2);
        let a = random_rational_coefficient(&mut rng, nvars);
        let b = random_rational_coefficient(&mut rng, nvars);
        let c = random_rational_coefficient(&mut rng, nvars);
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.add(&a.neg()).is_zero());
        if !a.is_zero() {
            let inv = a.invert().expect("nonzero coefficients invert");
            prop_assert_eq!(a.mul(&inv), BaseCoefficient::constant(nvars, Rat::one()));
        }
    }

    #[test]
    fn coefficient_partials_commute(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let nvars = rng.gen_range(2..=3);
        let f = random_rational_coefficient(&mut rng, nvars);
        for i in 0..nvars {
            for j in (i + 1)..nvars {
                prop_assert_eq!(f.partial(i).partial(j), f.partial(j).partial(i));
            }
        }
    }

    #[test]
    fn taylor_parts_recombine_and_the_remainder_is_flat(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let nvars = rng.gen_range(1..=2);
        let f = random_rational_coefficient(&mut rng, nvars);
        let q = rng.gen_range(0..=3u32);
        // Find a center where the denominator does not vanish.
        let a = loop {
            let p = gen::random_point(&mut rng, nvars);
            if f.eval(&p.0).is_ok() {
                break p;
            }
        };
        let (t, r) = f.taylor(&a, q).expect("denominator checked above");
        prop_assert_eq!(t.add(&r), f);
        for order in derivative_orders(nvars, q) {
            let mut d = r.clone();
            for (v, k) in order.iter().enumerate() {
                for _ in 0..*k {
                    d = d.partial(v);
                }
            }
            let value = d.eval(&a.0).expect("pole-free center");
            prop_assert!(value.is_zero(), "flat to order {q} at the center");
        }
    }

    #[test]
    fn coefficient_composition_is_associative(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=2);
        let k = rng.gen_range(1..=2);
        let f = BaseCoefficient::from_poly(gen::random_poly(&mut rng, n, 2, 2));
        let g: Vec<BaseCoefficient> = (0..n)
            .map(|_| BaseCoefficient::from_poly(gen::random_poly(&mut rng, m, 2, 2)))
            .collect();
        let h: Vec<BaseCoefficient> = (0..m)
            .map(|_| BaseCoefficient::from_poly(gen::random_poly(&mut rng, k, 2, 2)))
            .collect();
        let left = f.compose(&g).unwrap().compose(&h).unwrap();
        let gh: Vec<BaseCoefficient> =
            g.iter().map(|gi| gi.compose(&h).unwrap()).collect();
        let right = f.compose(&gh).unwrap();
        prop_assert_eq!(left, right);
    }
}

// ---------------------------------------------------------------------------
// Series products and derivatives
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn series_products_commute_with_the_parity_sign(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let f = gen::random_homogeneous(&mut rng, &cs, 5, 3);
        let g = gen::random_homogeneous(&mut rng, &cs, 5, 3);
        let lhs = f.mul(&g).unwrap();
        let rhs = g.mul(&f).unwrap().scale(&parity_sign(f.degree() * g.degree()));
        prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());
    }

    #[test]
    fn series_products_associate_up_to_the_common_weight(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let f = gen::random_homogeneous(&mut rng, &cs, 5, 2);
        let g = gen::random_homogeneous(&mut rng, &cs, 5, 2);
        let h = gen::random_homogeneous(&mut rng, &cs, 5, 2);
        let left = f.mul(&g).unwrap().mul(&h).unwrap();
        let right = f.mul(&g.mul(&h).unwrap()).unwrap();
        prop_assert!(left.agrees_with(&right));
    }

    #[test]
    fn graded_partials_obey_the_leibniz_rule(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, true, false);
        let f = gen::random_homogeneous(&mut rng, &cs, 5, 2);
        let g = gen::random_homogeneous(&mut rng, &cs, 5, 2);
        for mu in 0..cs.n_graded() {
            let lhs = f.mul(&g).unwrap().partial_odd(mu);
            let sign = parity_sign(cs.graded_degree(mu) * f.degree());
            let rhs = f
                .partial_odd(mu)
                .mul(&g)
                .unwrap()
                .add(&f.mul(&g.partial_odd(mu)).unwrap().scale(&sign))
                .unwrap();
            prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());
        }
    }

    #[test]
    fn repeated_partials_commute_or_vanish(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, true, false);
        let f = gen::random_homogeneous(&mut rng, &cs, 5, 3);
        for i in 0..cs.n_even() {
            for j in (i + 1)..cs.n_even() {
                let ij = f.partial_even(i).partial_even(j);
                let ji = f.partial_even(j).partial_even(i);
                prop_assert!(ij.agrees_with(&ji));
            }
        }
        for mu in 0..cs.n_graded() {
            if cs.graded_degree(mu) % 2 != 0 {
                prop_assert!(f.partial_odd(mu).partial_odd(mu).is_zero());
            }
        }
    }

    #[test]
    fn truncated_inverses_multiply_to_one(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let w = 6;
        let body = GradedFunction::from_coefficient(
            cs.clone(),
            gen::random_nonzero_coefficient(&mut rng, cs.n_even()),
            Truncation::Weight(w),
        );
        let f = body.add(&gen::random_correction(&mut rng, &cs, w)).unwrap();
        let inv = f.invert(w).expect("nonzero body inverts");
        let product = f.mul(&inv).unwrap();
        prop_assert!(product.eq_up_to_weight(&GradedFunction::one(cs.clone()), w));
    }

    #[test]
    fn taylor_data_separates_functions_with_odd_letters(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_odd_system(&mut rng, 2, 3);
        let bound = gen::odd_weight_bound(&cs);
        let f = gen::random_homogeneous(&mut rng, &cs, bound, 3);
        prop_assert!(!f.is_zero());
        // A nonzero function must show a nonzero polynomial part somewhere
        // on a small rational grid, at some order within the weight bound.
        let mut found = false;
        'search: for a in rational_grid(cs.n_even()) {
            for q in 0..=bound {
                let split = match f.taylor_split(&a, q) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                if !split.taylor.is_zero() {
                    found = true;
                    break 'search;
                }
            }
        }
        prop_assert!(found, "nonzero input is visible in sampled data: {}", f.render());
        // The zero function shows nothing anywhere.
        let zero = f.sub(&f).unwrap();
        for a in rational_grid(cs.n_even()).into_iter().take(5) {
            let split = zero.taylor_split(&a, bound).unwrap();
            prop_assert!(split.taylor.is_zero());
        }
    }
}

// ---------------------------------------------------------------------------
// Morphisms and pullbacks
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pullbacks_preserve_the_algebra_operations(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let w = 5;
        let phi = gen::random_endomorphism(&mut rng, &cs, w);
        let f = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let g = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let lhs = phi.pullback(&f.mul(&g).unwrap()).unwrap();
        let rhs = phi.pullback(&f).unwrap().mul(&phi.pullback(&g).unwrap()).unwrap();
        prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());

        let one = GradedFunction::one(cs.clone());
        prop_assert!(phi.pullback(&one).unwrap().agrees_with(&one));

        let g_same = gen::random_function(&mut rng, &cs, f.degree(), w, 2);
        let sum_pull = phi.pullback(&f.add(&g_same).unwrap()).unwrap();
        let pull_sum = phi.pullback(&f).unwrap().add(&phi.pullback(&g_same).unwrap()).unwrap();
        prop_assert!(sum_pull.agrees_with(&pull_sum));
    }

    #[test]
    fn pullbacks_reverse_composition(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 2, false, false);
        let w = 5;
        let phi = gen::random_endomorphism(&mut rng, &cs, w);
        let psi = gen::random_endomorphism(&mut rng, &cs, w);
        let chi = DomainMorphism::compose(&phi, &psi).unwrap();
        let f = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let direct = chi.pullback(&f).unwrap();
        let staged = phi.pullback(&psi.pullback(&f).unwrap()).unwrap();
        prop_assert!(direct.agrees_with(&staged), "{} vs {}", direct.render(), staged.render());
    }

    #[test]
    fn pullbacks_obey_the_chain_rule(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 2, false, false);
        let w = 5;
        let phi = gen::random_endomorphism(&mut rng, &cs, w);
        let f = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let pulled = phi.pullback(&f).unwrap();
        for c in cs.coords() {
            let lhs = pulled.partial(c);
            let mut rhs = GradedFunction::zero(cs.clone(), 0, Truncation::Exact);
            for k in cs.coords() {
                let jac = phi.pullback_coordinate(k).partial(c);
                let moved = phi.pullback(&f.partial(k)).unwrap();
                rhs = rhs.add(&jac.mul(&moved).unwrap()).unwrap();
            }
            prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());
        }
    }

    #[test]
    fn differentials_compose_blockwise(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 2, false, false);
        let w = 4;
        let phi = gen::random_endomorphism(&mut rng, &cs, w);
        let psi = gen::random_endomorphism(&mut rng, &cs, w);
        let chi = DomainMorphism::compose(&phi, &psi).unwrap();
        let m = gen::random_point(&mut rng, cs.n_even());
        let mid = BasePoint(
            phi.underlying()
                .iter()
                .map(|c| c.eval(&m.0).expect("polynomial underlying map"))
                .collect(),
        );
        let d_phi = phi.differential_matrices(&m).unwrap();
        let d_psi = psi.differential_matrices(&mid).unwrap();
        let d_chi = chi.differential_matrices(&m).unwrap();
        let chi_degrees: BTreeSet<i64> = d_chi.blocks().map(|(d, _)| d).collect();
        let phi_degrees: BTreeSet<i64> = d_phi.blocks().map(|(d, _)| d).collect();
        prop_assert_eq!(&chi_degrees, &phi_degrees);
        for (d, block) in d_chi.blocks() {
            let left = d_psi.block(d).expect("endomorphisms share the degree profile");
            let right = d_phi.block(d).expect("endomorphisms share the degree profile");
            prop_assert_eq!(&block.entries, &block_product(left, right), "degree {} block", d);
        }
    }

    #[test]
    fn inverse_morphisms_cancel_both_ways(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let w = 6;
        let (phi, inv) = gen::random_invertible_endomorphism(&mut rng, &cs, w);
        let sigma = phi.invert(&inv, w).unwrap();
        for round in [
            DomainMorphism::compose(&phi, &sigma).unwrap(),
            DomainMorphism::compose(&sigma, &phi).unwrap(),
        ] {
            for c in cs.coords() {
                let back = round.pullback_coordinate(c);
                let original = GradedFunction::coordinate(cs.clone(), c);
                prop_assert!(back.agrees_with(&original), "{}", back.render());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn brackets_are_graded_antisymmetric(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, true, false);
        let w = 5;
        let x = gen::random_field_any_degree(&mut rng, &cs, w);
        let y = gen::random_field_any_degree(&mut rng, &cs, w);
        let xy = VectorField::bracket(&x, &y).unwrap();
        let yx = VectorField::bracket(&y, &x).unwrap();
        let sign = -parity_sign(x.degree() * y.degree());
        let flipped = VectorField::new(
            cs.clone(),
            yx.degree(),
            yx.components().iter().map(|c| c.scale(&sign)).collect(),
        )
        .unwrap();
        prop_assert!(fields_match(&xy, &flipped));
    }

    #[test]
    fn brackets_satisfy_the_graded_jacobi_identity(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, true, false);
        let w = 5;
        let x = gen::random_field_any_degree(&mut rng, &cs, w);
        let y = gen::random_field_any_degree(&mut rng, &cs, w);
        let z = gen::random_field_any_degree(&mut rng, &cs, w);
        let lhs = VectorField::bracket(&x, &VectorField::bracket(&y, &z).unwrap()).unwrap();
        let first = VectorField::bracket(&VectorField::bracket(&x, &y).unwrap(), &z).unwrap();
        let second = VectorField::bracket(&y, &VectorField::bracket(&x, &z).unwrap()).unwrap();
        let sign = parity_sign(x.degree() * y.degree());
        for (a, l) in lhs.components().iter().enumerate() {
            let r = first.components()[a]
                .add(&second.components()[a].scale(&sign))
                .unwrap();
            prop_assert!(l.agrees_with(&r), "{} vs {}", l.render(), r.render());
        }
    }

    #[test]
    fn fields_differentiate_products_by_the_leibniz_rule(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, true, false);
        let w = 5;
        let x = gen::random_field_any_degree(&mut rng, &cs, w);
        let f = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let g = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let lhs = x.apply(&f.mul(&g).unwrap()).unwrap();
        let sign = parity_sign(x.degree() * f.degree());
        let rhs = x
            .apply(&f)
            .unwrap()
            .mul(&g)
            .unwrap()
            .add(&f.mul(&x.apply(&g).unwrap()).unwrap().scale(&sign))
            .unwrap();
        prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());
    }

    #[test]
    fn bracket_components_equal_the_operator_commutator(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 3, true, false);
        let w = 5;
        let x = gen::random_field_any_degree(&mut rng, &cs, w);
        let y = gen::random_field_any_degree(&mut rng, &cs, w);
        let bracket = VectorField::bracket(&x, &y).unwrap();
        let sign = parity_sign(x.degree() * y.degree());
        for c in cs.coords() {
            let zc = GradedFunction::coordinate(cs.clone(), c);
            let lhs = bracket.apply(&zc).unwrap();
            let rhs = x
                .apply(&y.apply(&zc).unwrap())
                .unwrap()
                .add(&y.apply(&x.apply(&zc).unwrap()).unwrap().scale(&-sign.clone()))
                .unwrap();
            prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs.render(), rhs.render());
        }
    }

    #[test]
    fn transported_fields_stay_related_under_brackets(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_odd_system(&mut rng, 2, 3);
        let w = gen::odd_weight_bound(&cs).max(2);
        let (phi, inv) = gen::random_invertible_endomorphism(&mut rng, &cs, w);
        let psi = phi.invert(&inv, w).unwrap();
        let y1 = gen::random_field_any_degree(&mut rng, &cs, w);
        let y2 = gen::random_field_any_degree(&mut rng, &cs, w);
        let x1 = transport_field(&y1, &phi, &psi);
        let x2 = transport_field(&y2, &phi, &psi);
        prop_assert!(related_check(&x1, &y1, &phi).unwrap());
        prop_assert!(related_check(&x2, &y2, &phi).unwrap());
        let bx = VectorField::bracket(&x1, &x2).unwrap();
        let by = VectorField::bracket(&y1, &y2).unwrap();
        prop_assert!(related_check(&bx, &by, &phi).unwrap());
    }
}

/// Values of a bracket at a point are not a function of the factors' values
/// at that point: the weight field and the zero field agree at the origin,
/// yet their brackets against ∂/∂ξ differ there.
#[test]
fn bracket_values_at_a_point_exceed_pointwise_data() {
    let cs = Arc::new(
        CoordinateSystem::new(vec!["x".to_string()], vec![("xi".to_string(), 2)]).unwrap(),
    );
    let origin = BasePoint(vec![Rat::zero()]);
    let euler = VectorField::euler(&cs);
    let zero = VectorField::zero(cs.clone(), 0);
    let e_val = euler.value_at(&origin).unwrap();
    let z_val = zero.value_at(&origin).unwrap();
    assert_eq!(e_val.components, z_val.components, "both vanish at the origin");

    let mut comps: Vec<GradedFunction> = cs
        .coords()
        .map(|c| GradedFunction::zero(cs.clone(), -2 + cs.coord_degree(c), Truncation::Exact))
        .collect();
    comps[1] = GradedFunction::one(cs.clone());
    let d_xi = VectorField::new(cs.clone(), -2, comps).unwrap();

    let with_euler = VectorField::bracket(&d_xi, &euler).unwrap();
    let with_zero = VectorField::bracket(&d_xi, &zero).unwrap();
    let ve = with_euler.value_at(&origin).unwrap();
    let vz = with_zero.value_at(&origin).unwrap();
    assert_ne!(
        ve.components, vz.components,
        "equal field values at a point do not determine the bracket there"
    );
}

// ---------------------------------------------------------------------------
// Differential forms and the Cartan calculus
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exterior_derivatives_square_to_zero(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, true, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let p = rng.gen_range(0..=2);
        let omega = gen::random_form(&mut rng, &sh, p, 5);
        prop_assert!(omega.d().unwrap().d().unwrap().is_zero());
    }

    #[test]
    fn lie_derivatives_realize_the_cartan_relations(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, true, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let w = 5;
        let x = gen::random_field_any_degree(&mut rng, &cs, w);
        let y = gen::random_field_any_degree(&mut rng, &cs, w);
        let p = rng.gen_range(0..=2);
        let omega = gen::random_form(&mut rng, &sh, p, w);
        let step = sh.step();
        let bracket = VectorField::bracket(&x, &y).unwrap();

        // Lie derivatives represent the bracket.
        let ll = omega.lie(&y).unwrap().lie(&x).unwrap();
        let ll_swapped = omega
            .lie(&x)
            .unwrap()
            .lie(&y)
            .unwrap()
            .scale(&parity_sign(x.degree() * y.degree()));
        let lhs = ll.sub(&ll_swapped).unwrap();
        let rhs = omega.lie(&bracket).unwrap();
        prop_assert!(forms_match(&lhs, &rhs));

        // Lie derivatives commute with d in the graded sense.
        let ld = omega.d().unwrap().lie(&x).unwrap();
        let dl = omega
            .lie(&x)
            .unwrap()
            .d()
            .unwrap()
            .scale(&parity_sign(x.degree() * step));
        prop_assert!(forms_match(&ld, &dl));

        // The mixed commutator with a contraction contracts the bracket.
        let li = omega.contract(&y).unwrap().lie(&x).unwrap();
        let il = omega
            .lie(&x)
            .unwrap()
            .contract(&y)
            .unwrap()
            .scale(&parity_sign(x.degree() * (y.degree() - step)));
        let mixed = li.sub(&il).unwrap();
        let contracted = omega.contract(&bracket).unwrap();
        prop_assert!(forms_match(&mixed, &contracted));
    }

    #[test]
    fn exterior_derivatives_act_as_graded_derivations(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, true, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let p_omega = rng.gen_range(0..=1);
        let p_tau = rng.gen_range(0..=1);
        let omega = gen::random_form(&mut rng, &sh, p_omega, 5);
        let tau = gen::random_form(&mut rng, &sh, p_tau, 5);
        let lhs = omega.mul(&tau).unwrap().d().unwrap();
        let sign = parity_sign(omega.value().degree());
        let rhs = omega
            .d()
            .unwrap()
            .mul(&tau)
            .unwrap()
            .add(&omega.mul(&tau.d().unwrap()).unwrap().scale(&sign))
            .unwrap();
        prop_assert!(forms_match(&lhs, &rhs));
    }

    #[test]
    fn form_pullbacks_commute_with_d(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, true, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let w = 5;
        let phi = gen::random_endomorphism(&mut rng, &cs, w);
        let p = rng.gen_range(0..=1);
        let omega = gen::random_form(&mut rng, &sh, p, w);
        let d_then_pull = pullback_form(&phi, &omega.d().unwrap()).unwrap();
        let pull_then_d = pullback_form(&phi, &omega).unwrap().d().unwrap();
        prop_assert!(
            forms_match(&d_then_pull, &pull_then_d),
            "{} vs {}",
            d_then_pull.value().render(),
            pull_then_d.value().render()
        );
    }

    #[test]
    fn coordinate_homotopies_split_the_identity(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, false, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let p = rng.gen_range(0..=2);
        let omega = gen::random_form(&mut rng, &sh, p, 5);
        let mu = rng.gen_range(0..cs.n_graded());
        let dk = omega.poincare_homotopy(mu).unwrap().d().unwrap();
        let kd = omega.d().unwrap().poincare_homotopy(mu).unwrap();
        let lhs = dk.add(&kd).unwrap();
        let rhs = omega.sub(&omega.zero_section_projection(mu)).unwrap();
        prop_assert!(
            forms_match(&lhs, &rhs),
            "{} vs {}",
            lhs.value().render(),
            rhs.value().render()
        );
    }

    #[test]
    fn coordinate_one_forms_commute_by_shifted_parity(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 1, 2, false, false);
        let sh = Arc::new(ShiftedSystem::new(&cs).unwrap());
        let step = sh.step();
        let coords: Vec<Coord> = cs.coords().collect();
        let a = coords[rng.gen_range(0..coords.len())];
        let b = coords[rng.gen_range(0..coords.len())];
        let da = Form::from_function(sh.clone(), &GradedFunction::coordinate(cs.clone(), a))
            .unwrap()
            .d()
            .unwrap();
        let db = Form::from_function(sh.clone(), &GradedFunction::coordinate(cs.clone(), b))
            .unwrap()
            .d()
            .unwrap();
        let lhs = da.mul(&db).unwrap();
        let sign = parity_sign((cs.coord_degree(a) + step) * (cs.coord_degree(b) + step));
        let rhs = db.mul(&da).unwrap().scale(&sign);
        prop_assert!(forms_match(&lhs, &rhs));
    }
}

// ---------------------------------------------------------------------------
// Bundle transitions
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structure_operations_preserve_the_cocycle(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let base = gen::random_system(&mut rng, 2, 2, false, false);
        let w = 5;
        let rank = rng.gen_range(1..=3usize);
        let degrees: Vec<i64> = (0..rank).map(|_| rng.gen_range(-2..=2)).collect();
        let t = gen::random_transition_pair(&mut rng, &base, degrees, w);
        prop_assert!(t.check_cocycle(None, None).unwrap().passed());

        let dual = t.dual_transitions();
        prop_assert!(dual.check_cocycle(None, None).unwrap().passed());

        let l = rng.gen_range(-2..=2i64);
        let shifted = t.shift_transitions(l);
        prop_assert!(shifted.check_cocycle(None, None).unwrap().passed());

        let phi = gen::random_endomorphism(&mut rng, &base, w);
        let pulled = t.pullback_transitions_uniform(&phi).unwrap();
        prop_assert!(pulled.check_cocycle(None, None).unwrap().passed());
    }
}

// ---------------------------------------------------------------------------
// Atlas gluing
// ---------------------------------------------------------------------------

/// `(matrix, inverse)` over polynomial coefficients: invertible diagonal plus
/// strictly upper triangular content, inverted by the terminating series.
fn invertible_coefficient_matrix(
    rng: &mut StdRng,
    nvars: usize,
    m: usize,
) -> (Vec<Vec<BaseCoefficient>>, Vec<Vec<BaseCoefficient>>) {
    let zero = BaseCoefficient::constant(nvars, Rat::zero());
    let mut g = vec![vec![zero.clone(); m]; m];
    let mut dinv = Vec::with_capacity(m);
    for r in 0..m {
        let d = gen::random_nonzero_rat(rng);
        dinv.push(BaseCoefficient::constant(nvars, Rat::one() / d.clone()));
        g[r][r] = BaseCoefficient::constant(nvars, d);
        for c in (r + 1)..m {
            g[r][c] = gen::random_coefficient(rng, nvars);
        }
    }
    let mat_mul = |a: &Vec<Vec<BaseCoefficient>>, b: &Vec<Vec<BaseCoefficient>>| {
        (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| {
                        let mut s = BaseCoefficient::constant(nvars, Rat::zero());
                        for k in 0..m {
                            s = s.add(&a[r][k].mul(&b[k][c]));
                        }
                        s
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    // (D(I+T))⁻¹ = (I − T + T² − …)·D⁻¹ with T = D⁻¹·(strict upper part).
    let mut neg_t = vec![vec![zero.clone(); m]; m];
    for r in 0..m {
        for c in (r + 1)..m {
            neg_t[r][c] = g[r][c].mul(&dinv[r]).neg();
        }
    }
    let mut eye = vec![vec![zero; m]; m];
    for (r, row) in eye.iter_mut().enumerate() {
        row[r] = BaseCoefficient::constant(nvars, Rat::one());
    }
    let mut power = eye.clone();
    let mut series = eye;
    for _ in 1..m {
        power = mat_mul(&power, &neg_t);
        for r in 0..m {
            for c in 0..m {
                series[r][c] = series[r][c].add(&power[r][c]);
            }
        }
    }
    for row in series.iter_mut() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = e.mul(&dinv[c]);
        }
    }
    (g, series)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn lifted_ordinary_bundles_glue_coherently(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n0 = rng.gen_range(1..=2usize);
        let base = Arc::new(
            CoordinateSystem::new((1..=n0).map(|i| format!("x{i}")).collect(), vec![]).unwrap(),
        );
        let rank = rng.gen_range(1..=2usize);
        let (g01, g10) = invertible_coefficient_matrix(&mut rng, n0, rank);
        let mut g = BTreeMap::new();
        g.insert((0usize, 1usize), g01);
        g.insert((1usize, 0usize), g10);
        let k = *[-2i64, -1, 1, 2].choose(&mut rng).unwrap();
        let (t, glue) = shifted_bundle_ek(&base, 2, rank, &g, k, Truncation::Weight(6)).unwrap();
        prop_assert!(glue.verify(None).unwrap().passed());
        // The fiber matrices live on the shared even base, where the gluing
        // is the identity, so no transport is needed for their cocycle.
        prop_assert!(t.check_cocycle(None, None).unwrap().passed());
    }

    #[test]
    fn compatible_families_are_closed_under_products(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs = gen::random_system(&mut rng, 2, 3, false, false);
        let w = 6;
        let (phi, inv) = gen::random_invertible_endomorphism(&mut rng, &cs, w);
        let sigma = phi.invert(&inv, w).unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0usize, 1usize), phi);
        transitions.insert((1usize, 0usize), sigma);
        let glue = GluingData::new(vec![cs.clone(), cs.clone()], transitions).unwrap();
        prop_assert!(glue.verify(None).unwrap().passed());

        let f0 = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let g0 = gen::random_homogeneous(&mut rng, &cs, w, 2);
        let carry = glue.transition(0, 1).unwrap();
        let f = GlobalFunction::new(
            &glue,
            f0.degree(),
            vec![f0.clone(), carry.pullback(&f0).unwrap()],
        )
        .unwrap();
        let g = GlobalFunction::new(
            &glue,
            g0.degree(),
            vec![g0.clone(), carry.pullback(&g0).unwrap()],
        )
        .unwrap();
        prop_assert!(check_global_function(&glue, &f).unwrap());
        prop_assert!(check_global_function(&glue, &g).unwrap());

        let product = GlobalFunction::new(
            &glue,
            f0.degree() + g0.degree(),
            vec![
                f.representative(0).mul(g.representative(0)).unwrap(),
                f.representative(1).mul(g.representative(1)).unwrap(),
            ],
        )
        .unwrap();
        prop_assert!(check_global_function(&glue, &product).unwrap());
    }

    #[test]
    fn product_morphisms_compose_factor_wise(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let cs_a = gen::random_system(&mut rng, 2, 2, false, false);
        let cs_b = gen::random_system_named(&mut rng, 2, 2, false, false, "y", "eta");
        let w = 5;
        let phi = gen::random_endomorphism(&mut rng, &cs_a, w);
        let phi_prime = gen::random_endomorphism(&mut rng, &cs_a, w);
        let psi = gen::random_endomorphism(&mut rng, &cs_b, w);
        let psi_prime = gen::random_endomorphism(&mut rng, &cs_b, w);
        let staged = DomainMorphism::compose(
            &product_morphism(&phi_prime, &psi_prime).unwrap(),
            &product_morphism(&phi, &psi).unwrap(),
        )
        .unwrap();
        let direct = product_morphism(
            &DomainMorphism::compose(&phi_prime, &phi).unwrap(),
            &DomainMorphism::compose(&psi_prime, &psi).unwrap(),
        )
        .unwrap();
        prop_assert!(morphisms_match(&staged, &direct));
    }
}
