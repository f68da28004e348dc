//! Seeded random generators for the gradedcalc test suites. Every function
//! takes `&mut impl Rng`, so callers control determinism by seeding (the
//! suites use ChaCha with fixed seeds). Generated objects always satisfy
//! the library's constructor contracts: homogeneous degrees, zero-body even
//! corrections, matching component degrees, invertible transition matrices
//! with exact inverses.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{BigInt, One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use gradedcalc_core::bundles::{FiberBasis, TransitionData};
use gradedcalc_core::coeffs::{BaseCoefficient, BasePoint, Polynomial, Rat};
use gradedcalc_core::fields::VectorField;
use gradedcalc_core::forms::{Form, ShiftedSystem};
use gradedcalc_core::grading::{
    enumerate_all_indices, enumerate_indices, CoordinateSystem, MultiIndex,
};
use gradedcalc_core::morphisms::DomainMorphism;
use gradedcalc_core::series::{GradedFunction, Truncation};

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Small rational with numerator in [-6, 6] and denominator in [1, 4].
pub fn random_rat(rng: &mut impl Rng) -> Rat {
    rat(rng.gen_range(-6..=6), rng.gen_range(1..=4))
}

pub fn random_nonzero_rat(rng: &mut impl Rng) -> Rat {
    loop {
        let r = random_rat(rng);
        if !r.is_zero() {
            return r;
        }
    }
}

/// Rational point with small coordinates, for evaluation-based checks.
pub fn random_point(rng: &mut impl Rng, nvars: usize) -> BasePoint {
    BasePoint((0..nvars).map(|_| rat(rng.gen_range(-3..=3), 1)).collect())
}

/// Coordinate system with `1..=max_even` even coordinates and
/// `1..=max_graded` graded ones, degrees in ±[1, 3]. At least one odd degree
/// is forced when `force_odd` is set, one even graded degree when
/// `force_even_graded` is.
pub fn random_system(
    rng: &mut impl Rng,
    max_even: usize,
    max_graded: usize,
    force_odd: bool,
    force_even_graded: bool,
) -> Arc<CoordinateSystem> {
    random_system_named(rng, max_even, max_graded, force_odd, force_even_graded, "x", "xi")
}

/// Same sampler with caller-chosen name prefixes, so two independent systems
/// can be combined into a product without name collisions.
pub fn random_system_named(
    rng: &mut impl Rng,
    max_even: usize,
    max_graded: usize,
    force_odd: bool,
    force_even_graded: bool,
    even_prefix: &str,
    graded_prefix: &str,
) -> Arc<CoordinateSystem> {
    let n_even = rng.gen_range(1..=max_even.max(1));
    let n_graded = rng.gen_range(1..=max_graded.max(1));
    let even = (1..=n_even).map(|i| format!("{even_prefix}{i}")).collect();
    let mut degrees: Vec<i64> = (0..n_graded)
        .map(|_| {
            let d = rng.gen_range(1..=3);
            if rng.gen_bool(0.5) {
                -d
            } else {
                d
            }
        })
        .collect();
    if force_odd && degrees.iter().all(|d| d % 2 == 0) {
        degrees[0] = if degrees[0] < 0 { -1 } else { 1 };
    }
    if force_even_graded && degrees.iter().all(|d| d % 2 != 0) {
        let last = degrees.len() - 1;
        degrees[last] = if degrees[last] < 0 { -2 } else { 2 };
    }
    let graded = degrees
        .into_iter()
        .enumerate()
        .map(|(i, d)| (format!("{graded_prefix}{}", i + 1), d))
        .collect();
    Arc::new(CoordinateSystem::new(even, graded).expect("generated names are distinct"))
}

/// Coordinate system whose graded degrees are all odd, so every series on it
/// is a polynomial (`Exact` truncation) and Neumann series terminate.
pub fn random_odd_system(
    rng: &mut impl Rng,
    max_even: usize,
    max_graded: usize,
) -> Arc<CoordinateSystem> {
    let n_even = rng.gen_range(1..=max_even.max(1));
    let n_graded = rng.gen_range(1..=max_graded.max(1));
    let even = (1..=n_even).map(|i| format!("x{i}")).collect();
    let graded = (0..n_graded)
        .map(|i| {
            let d = *[-3i64, -1, 1, 3].choose(rng).expect("nonempty");
            (format!("xi{}", i + 1), d)
        })
        .collect();
    Arc::new(CoordinateSystem::new(even, graded).expect("generated names are distinct"))
}

/// Largest possible monomial weight on a purely odd system: every letter can
/// appear at most once.
pub fn odd_weight_bound(cs: &CoordinateSystem) -> u32 {
    cs.graded_degrees().map(|d| d.unsigned_abs() as u32).sum()
}

/// Sparse polynomial: up to `max_terms` monomials of total degree at most
/// `max_degree` in `nvars` variables.
pub fn random_poly(
    rng: &mut impl Rng,
    nvars: usize,
    max_degree: u32,
    max_terms: usize,
) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for _ in 0..rng.gen_range(1..=max_terms.max(1)) {
        let mut exps = vec![0u32; nvars];
        let mut budget = max_degree;
        for e in exps.iter_mut() {
            if budget == 0 {
                break;
            }
            *e = rng.gen_range(0..=budget.min(2));
            budget -= *e;
        }
        p = p.add(&Polynomial::monomial(nvars, exps, random_rat(rng)));
    }
    p
}

/// Polynomial coefficient (no denominator), the workhorse for series terms.
pub fn random_coefficient(rng: &mut impl Rng, nvars: usize) -> BaseCoefficient {
    BaseCoefficient::from_poly(random_poly(rng, nvars, 2, 2))
}

pub fn random_nonzero_coefficient(rng: &mut impl Rng, nvars: usize) -> BaseCoefficient {
    loop {
        let c = random_coefficient(rng, nvars);
        if !c.is_zero() {
            return c;
        }
    }
}

/// Homogeneous function of the given degree, built from up to `max_terms`
/// random admissible monomials of weight ≤ w. Zero when no monomial of that
/// degree exists within the weight bound.
pub fn random_function(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    degree: i64,
    w: u32,
    max_terms: usize,
) -> GradedFunction {
    let indices = enumerate_indices(cs, degree, w);
    if indices.is_empty() {
        return GradedFunction::zero(cs.clone(), degree, Truncation::Weight(w));
    }
    let count = rng.gen_range(1..=max_terms.max(1)).min(indices.len());
    let picks: Vec<MultiIndex> = indices
        .choose_multiple(rng, count)
        .cloned()
        .collect();
    let terms = picks
        .into_iter()
        .map(|p| (p, random_coefficient(rng, cs.n_even())))
        .collect();
    GradedFunction::from_term_list(cs.clone(), degree, Truncation::Weight(w), terms)
        .expect("enumerated indices have the requested degree")
}

/// The set of degrees realized by monomials of weight ≤ w, ascending.
pub fn realizable_degrees(cs: &CoordinateSystem, w: u32) -> Vec<i64> {
    let mut degrees: Vec<i64> = enumerate_all_indices(cs, w)
        .iter()
        .map(|p| p.degree(cs))
        .collect();
    degrees.sort_unstable();
    degrees.dedup();
    degrees
}

/// Homogeneous function of a random realizable degree; retries a few times
/// to avoid returning zero.
pub fn random_homogeneous(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    w: u32,
    max_terms: usize,
) -> GradedFunction {
    let degrees = realizable_degrees(cs, w);
    for _ in 0..8 {
        let d = *degrees.choose(rng).expect("weight-0 index always exists");
        let f = random_function(rng, cs, d, w, max_terms);
        if !f.is_zero() {
            return f;
        }
    }
    GradedFunction::constant(cs.clone(), random_nonzero_rat(rng))
}

/// Degree-0 function with zero body (every term uses at least one graded
/// letter): valid as an even-coordinate correction of a morphism.
pub fn random_correction(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    w: u32,
) -> GradedFunction {
    let indices: Vec<MultiIndex> = enumerate_indices(cs, 0, w)
        .into_iter()
        .filter(|p| p.weight() > 0)
        .collect();
    if indices.is_empty() {
        return GradedFunction::zero(cs.clone(), 0, Truncation::Weight(w));
    }
    let count = rng.gen_range(0..=2).min(indices.len());
    let terms = indices
        .choose_multiple(rng, count)
        .cloned()
        .map(|p| (p, random_coefficient(rng, cs.n_even())))
        .collect();
    GradedFunction::from_term_list(cs.clone(), 0, Truncation::Weight(w), terms)
        .expect("weight-positive degree-0 indices")
}

/// Endomorphism with a random polynomial underlying map, random zero-body
/// even corrections, and random graded images of matching degrees. Not
/// invertible in general.
pub fn random_endomorphism(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    w: u32,
) -> DomainMorphism {
    let n0 = cs.n_even();
    let underlying = (0..n0)
        .map(|_| BaseCoefficient::from_poly(random_poly(rng, n0, 2, 2)))
        .collect();
    let ybar = (0..n0).map(|_| random_correction(rng, cs, w)).collect();
    let thetabar = (0..cs.n_graded())
        .map(|nu| random_function(rng, cs, cs.graded_degree(nu), w, 2))
        .collect();
    DomainMorphism::new(cs.clone(), cs.clone(), underlying, ybar, thetabar, Truncation::Weight(w))
        .expect("generated data fits the morphism contract")
}

/// Invertible endomorphism together with the exact inverse of its underlying
/// map: the base part is the translation x_i ↦ x_i + c_i, each graded image
/// is a nonzero multiple of its own coordinate plus weight-raising terms, so
/// every degreewise linear block is an invertible diagonal.
pub fn random_invertible_endomorphism(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    w: u32,
) -> (DomainMorphism, Vec<BaseCoefficient>) {
    let n0 = cs.n_even();
    let shifts: Vec<Rat> = (0..n0).map(|_| rat(rng.gen_range(-3..=3), 1)).collect();
    let underlying: Vec<BaseCoefficient> = shifts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            BaseCoefficient::from_poly(
                Polynomial::variable(n0, i).add(&Polynomial::constant(n0, c.clone())),
            )
        })
        .collect();
    let underlying_inverse: Vec<BaseCoefficient> = shifts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            BaseCoefficient::from_poly(
                Polynomial::variable(n0, i).add(&Polynomial::constant(n0, -c.clone())),
            )
        })
        .collect();
    let ybar = (0..n0).map(|_| random_correction(rng, cs, w)).collect();
    let thetabar = (0..cs.n_graded())
        .map(|nu| {
            let d = cs.graded_degree(nu);
            let unit = GradedFunction::coordinate(cs.clone(), cs.coord(n0 + nu))
                .scale(&random_nonzero_rat(rng));
            let candidates: Vec<MultiIndex> = enumerate_indices(cs, d, w)
                .into_iter()
                .filter(|p| p.weight() >= 2)
                .collect();
            let tail_count = rng.gen_range(0..=1);
            let tail: Vec<(MultiIndex, BaseCoefficient)> = candidates
                .choose_multiple(rng, tail_count)
                .cloned()
                .map(|p| (p, random_coefficient(rng, cs.n_even())))
                .collect();
            let tail = GradedFunction::from_term_list(cs.clone(), d, Truncation::Weight(w), tail)
                .expect("tail indices have the coordinate degree");
            unit.add(&tail).expect("degrees match")
        })
        .collect();
    let phi = DomainMorphism::new(
        cs.clone(),
        cs.clone(),
        underlying,
        ybar,
        thetabar,
        Truncation::Weight(w),
    )
    .expect("generated data fits the morphism contract");
    (phi, underlying_inverse)
}

/// Homogeneous vector field of the given degree (components of degree
/// `degree + |𝕫^A|`).
pub fn random_field(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    degree: i64,
    w: u32,
) -> VectorField {
    let components = (0..cs.coord_count())
        .map(|a| {
            let d = degree + cs.coord_degree(cs.coord(a));
            random_function(rng, cs, d, w, 2)
        })
        .collect();
    VectorField::new(cs.clone(), degree, components).expect("component degrees match")
}

/// Vector field of a random degree in [-2, 2], retried a few times so the
/// result is usually nonzero.
pub fn random_field_any_degree(
    rng: &mut impl Rng,
    cs: &Arc<CoordinateSystem>,
    w: u32,
) -> VectorField {
    for _ in 0..8 {
        let degree = rng.gen_range(-2..=2);
        let x = random_field(rng, cs, degree, w);
        if x.components().iter().any(|c| !c.is_zero()) {
            return x;
        }
    }
    random_field(rng, cs, 0, w)
}

/// Form of the given letter count `p` on the shifted system, homogeneous in
/// the form degree. Zero when no admissible monomial exists.
pub fn random_form(
    rng: &mut impl Rng,
    shifted: &Arc<ShiftedSystem>,
    p: u32,
    w: u32,
) -> Form {
    let doubled = shifted.doubled();
    let candidates: Vec<MultiIndex> = enumerate_all_indices(doubled, w)
        .into_iter()
        .filter(|idx| shifted.d_count(idx) == p)
        .collect();
    if candidates.is_empty() {
        return Form::zero(shifted.clone(), p, 0);
    }
    let mut by_degree: BTreeMap<i64, Vec<MultiIndex>> = BTreeMap::new();
    for idx in candidates {
        by_degree.entry(idx.degree(doubled)).or_default().push(idx);
    }
    let keys: Vec<i64> = by_degree.keys().copied().collect();
    let degree = *keys.choose(rng).expect("nonempty bucket map");
    let bucket = &by_degree[&degree];
    let count = rng.gen_range(1..=2.min(bucket.len()));
    let terms = bucket
        .choose_multiple(rng, count)
        .cloned()
        .map(|idx| (idx, random_coefficient(rng, doubled.n_even())))
        .collect();
    let value =
        GradedFunction::from_term_list(doubled.clone(), degree, Truncation::Weight(w), terms)
            .expect("bucketed indices share one degree");
    Form::new(shifted.clone(), p, value).expect("letter count is uniform")
}

/// Square matrix over `base` with entry `(r, c)` of degree
/// `degrees[r] − degrees[c]`, of the shape diagonal + strictly upper
/// triangular: the diagonal is nonzero rational, so the matrix is invertible
/// with a terminating inverse series.
fn random_triangular_matrix(
    rng: &mut impl Rng,
    base: &Arc<CoordinateSystem>,
    degrees: &[i64],
    w: u32,
) -> Vec<Vec<GradedFunction>> {
    let m = degrees.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    if r == c {
                        GradedFunction::constant(base.clone(), random_nonzero_rat(rng))
                    } else if r < c {
                        random_function(rng, base, degrees[r] - degrees[c], w, 1)
                    } else {
                        GradedFunction::zero(
                            base.clone(),
                            degrees[r] - degrees[c],
                            Truncation::Weight(w),
                        )
                    }
                })
                .collect()
        })
        .collect()
}

/// Standard matrix product with scalars multiplied in written order:
/// `(A·B)[r][c] = Σ_k A[r][k]·B[k][c]`.
fn mat_mul(
    a: &[Vec<GradedFunction>],
    b: &[Vec<GradedFunction>],
    base: &Arc<CoordinateSystem>,
    degrees: &[i64],
) -> Vec<Vec<GradedFunction>> {
    let m = degrees.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let mut sum = GradedFunction::zero(
                        base.clone(),
                        degrees[r] - degrees[c],
                        Truncation::Exact,
                    );
                    for k in 0..m {
                        sum = sum
                            .add(&a[r][k].mul(&b[k][c]).expect("matched systems"))
                            .expect("matched degrees");
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

/// Two-sided inverse of a diagonal-plus-strictly-upper-triangular matrix:
/// write M = D(I + T) with T = D⁻¹·(strictly upper part); then
/// M⁻¹ = (I − T + T² − …)·D⁻¹, a finite sum by nilpotency of T.
fn mat_inverse(
    m0: &[Vec<GradedFunction>],
    base: &Arc<CoordinateSystem>,
    degrees: &[i64],
) -> Vec<Vec<GradedFunction>> {
    let m = degrees.len();
    let dinv: Vec<Rat> = (0..m)
        .map(|r| {
            let c = m0[r][r]
                .body()
                .constant_value()
                .expect("diagonal entries are rational constants");
            Rat::one() / c
        })
        .collect();
    let neg_t: Vec<Vec<GradedFunction>> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    if r == c {
                        GradedFunction::zero(base.clone(), 0, Truncation::Exact)
                    } else {
                        m0[r][c].scale(&dinv[r]).neg()
                    }
                })
                .collect()
        })
        .collect();
    let eye: Vec<Vec<GradedFunction>> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    if r == c {
                        GradedFunction::constant(base.clone(), Rat::one())
                    } else {
                        GradedFunction::zero(
                            base.clone(),
                            degrees[r] - degrees[c],
                            Truncation::Exact,
                        )
                    }
                })
                .collect()
        })
        .collect();
    let mut power = eye.clone();
    let mut series = eye;
    for _ in 1..m {
        power = mat_mul(&power, &neg_t, base, degrees);
        for r in 0..m {
            for c in 0..m {
                series[r][c] = series[r][c].add(&power[r][c]).expect("matched degrees");
            }
        }
    }
    // Right-multiply by D⁻¹: scale column c by dinv[c].
    for row in series.iter_mut() {
        for (c, e) in row.iter_mut().enumerate() {
            *e = e.scale(&dinv[c]);
        }
    }
    series
}

/// Transition data over `base` with the given fiber degrees on two charts,
/// built from a random invertible matrix and its exact inverse so the full
/// cocycle (including mutual inverses) holds. The stored matrices follow
/// the transposed-entry convention used by the cocycle checker.
pub fn random_transition_pair(
    rng: &mut impl Rng,
    base: &Arc<CoordinateSystem>,
    fiber_degrees: Vec<i64>,
    w: u32,
) -> TransitionData {
    // Work with matrices M[r][c] of degree d_r − d_c under the standard
    // written-order product; the checker's convention is the transpose.
    let m = random_triangular_matrix(rng, base, &fiber_degrees, w);
    let minv = mat_inverse(&m, base, &fiber_degrees);
    let transpose = |x: &[Vec<GradedFunction>]| -> Vec<Vec<GradedFunction>> {
        let n = x.len();
        (0..n).map(|r| (0..n).map(|c| x[c][r].clone()).collect()).collect()
    };
    let mut matrices = BTreeMap::new();
    matrices.insert((0, 1), transpose(&m));
    matrices.insert((1, 0), transpose(&minv));
    TransitionData::new(base.clone(), 2, FiberBasis::new(fiber_degrees), matrices)
        .expect("transposed entries satisfy the degree constraint")
}
