//! Finite gluing data for graded coordinate charts: transition morphisms
//! between chart systems with cocycle verification, functions given by
//! compatible per-chart representatives, and binary products of coordinate
//! systems with the associated projection and product morphisms.
//!
//! Overlap structure is declared, never computed: the transition morphism
//! for an ordered pair `(α,β)` maps the β-chart domain to the α-chart
//! domain, so its pullback rewrites α-chart expressions in β-chart
//! coordinates. Agreement on overlaps always means term equality up to the
//! finest truncation weight both sides support.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::coeffs::{BaseCoefficient, CoeffError};
use crate::grading::{Coord, CoordinateSystem, GradingError, MultiIndex};
use crate::morphisms::{DomainMorphism, MorphismError};
use crate::series::{GradedFunction, SeriesError, Truncation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtlasError {
    #[error("chart {chart} out of range (atlas has {charts} charts)")]
    ChartOutOfRange { chart: usize, charts: usize },
    #[error("transition for overlap ({0}, {1}) does not map chart {1} to chart {0}")]
    WrongChartSystems(usize, usize),
    #[error("overlap ({0}, {1}) is declared without its reverse ({1}, {0})")]
    AsymmetricOverlap(usize, usize),
    #[error("no overlap declared for pair ({0}, {1})")]
    MissingOverlap(usize, usize),
    #[error("function data does not live on the expected coordinate system")]
    CoordinateMismatch,
    #[error("representative for chart {chart} has degree {found}, expected {expected}")]
    RepresentativeDegree {
        chart: usize,
        expected: i64,
        found: i64,
    },
    #[error("{found} representatives supplied for {expected} charts")]
    WrongRepresentativeCount { expected: usize, found: usize },
    #[error("coordinate name `{0}` appears in both factors")]
    NameCollision(String),
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// A failed comparison, pinned to the coordinate function it was observed on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub coordinate: String,
    pub lhs: String,
    pub rhs: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "on {}: {} != {}",
            self.coordinate, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCheck {
    pub pair: (usize, usize),
    pub pass: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleCheck {
    pub triple: (usize, usize, usize),
    pub pass: bool,
    pub witness: Option<Witness>,
}

/// Outcome of `GluingData::verify`: identity checks on declared diagonals,
/// mutual-inverse checks per unordered overlap, and the transition cocycle
/// per triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluingReport {
    pub identities: Vec<PairCheck>,
    pub inverses: Vec<PairCheck>,
    pub cocycles: Vec<TripleCheck>,
}

impl GluingReport {
    pub fn passed(&self) -> bool {
        self.identities.iter().all(|c| c.pass)
            && self.inverses.iter().all(|c| c.pass)
            && self.cocycles.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.identities.iter().filter(|c| !c.pass).count()
            + self.inverses.iter().filter(|c| !c.pass).count()
            + self.cocycles.iter().filter(|c| !c.pass).count()
    }
}

/// Chart systems indexed `0..charts` together with transition morphisms on
/// declared ordered overlaps. The morphism stored for `(α,β)` has source
/// chart β and target chart α, so composing `(α,β)` after `(β,γ)` matches
/// the chained coordinate change `γ → β → α`.
#[derive(Debug, Clone)]
pub struct GluingData {
    systems: Vec<Arc<CoordinateSystem>>,
    transitions: BTreeMap<(usize, usize), DomainMorphism>,
}

impl GluingData {
    pub fn new(
        systems: Vec<Arc<CoordinateSystem>>,
        transitions: BTreeMap<(usize, usize), DomainMorphism>,
    ) -> Result<GluingData, AtlasError> {
        let charts = systems.len();
        for (&(a, b), phi) in &transitions {
            for chart in [a, b] {
                if chart >= charts {
                    return Err(AtlasError::ChartOutOfRange { chart, charts });
                }
            }
            if phi.source() != &systems[b] || phi.target() != &systems[a] {
                return Err(AtlasError::WrongChartSystems(a, b));
            }
            if a != b && !transitions.contains_key(&(b, a)) {
                return Err(AtlasError::AsymmetricOverlap(a, b));
            }
        }
        Ok(GluingData {
            systems,
            transitions,
        })
    }

    pub fn charts(&self) -> usize {
        self.systems.len()
    }

    pub fn system(&self, chart: usize) -> &Arc<CoordinateSystem> {
        &self.systems[chart]
    }

    pub fn systems(&self) -> &[Arc<CoordinateSystem>] {
        &self.systems
    }

    pub fn transition(&self, a: usize, b: usize) -> Option<&DomainMorphism> {
        self.transitions.get(&(a, b))
    }

    pub fn overlaps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.transitions.keys().copied()
    }

    fn require(&self, a: usize, b: usize) -> Result<&DomainMorphism, AtlasError> {
        self.transitions
            .get(&(a, b))
            .ok_or(AtlasError::MissingOverlap(a, b))
    }

    /// All triples whose three ordered overlaps are declared (diagonal
    /// overlaps are implicit identities and do not require declarations).
    fn checkable_triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let declared: BTreeSet<(usize, usize)> = self
            .transitions
            .keys()
            .copied()
            .filter(|(a, b)| a != b)
            .collect();
        let has = |a: usize, b: usize| a == b || declared.contains(&(a, b));
        for a in 0..self.charts() {
            for b in 0..self.charts() {
                for c in 0..self.charts() {
                    if a == b && b == c {
                        continue;
                    }
                    if has(a, b) && has(b, c) && has(a, c) {
                        out.push((a, b, c));
                    }
                }
            }
        }
        out
    }

    /// Transition for the pair, with diagonals defaulting to the identity
    /// at the given truncation.
    fn transition_or_identity(
        &self,
        a: usize,
        b: usize,
        trunc: Truncation,
    ) -> Result<DomainMorphism, AtlasError> {
        if let Some(phi) = self.transitions.get(&(a, b)) {
            return Ok(phi.clone());
        }
        if a == b {
            return Ok(DomainMorphism::identity(&self.systems[a], trunc));
        }
        Err(AtlasError::MissingOverlap(a, b))
    }

    /// Check identity diagonals, mutual inverses, and the triple cocycle
    /// (the `(α,γ)` transition must equal the `(α,β)` transition composed
    /// after the `(β,γ)` one). Verifies the given triples, or every
    /// checkable triple when none are specified.
    pub fn verify(
        &self,
        triples: Option<&[(usize, usize, usize)]>,
    ) -> Result<GluingReport, AtlasError> {
        let mut identities = Vec::new();
        let mut inverses = Vec::new();
        let mut cocycles = Vec::new();

        for (&(a, b), phi) in &self.transitions {
            if a == b {
                let id = DomainMorphism::identity(&self.systems[a], phi.trunc());
                let witness = morphisms_agree(phi, &id)?;
                identities.push(PairCheck {
                    pair: (a, b),
                    pass: witness.is_none(),
                    witness,
                });
            } else if a < b {
                // Inverse check once per unordered pair.
                let rev = self.require(b, a)?;
                let round = DomainMorphism::compose(phi, rev)?;
                let id = DomainMorphism::identity(&self.systems[b], round.trunc());
                let witness = morphisms_agree(&round, &id)?;
                inverses.push(PairCheck {
                    pair: (a, b),
                    pass: witness.is_none(),
                    witness,
                });
            }
        }

        let all = match triples {
            Some(list) => list.to_vec(),
            None => self.checkable_triples(),
        };
        for (a, b, c) in all {
            for chart in [a, b, c] {
                if chart >= self.charts() {
                    return Err(AtlasError::ChartOutOfRange {
                        chart,
                        charts: self.charts(),
                    });
                }
            }
            let trunc = self
                .transitions
                .values()
                .map(|m| m.trunc())
                .min()
                .unwrap_or(Truncation::Exact);
            let ab = self.transition_or_identity(a, b, trunc)?;
            let bc = self.transition_or_identity(b, c, trunc)?;
            let ac = self.transition_or_identity(a, c, trunc)?;
            let chained = DomainMorphism::compose(&bc, &ab)?;
            let witness = morphisms_agree(&chained, &ac)?;
            cocycles.push(TripleCheck {
                triple: (a, b, c),
                pass: witness.is_none(),
                witness,
            });
        }

        Ok(GluingReport {
            identities,
            inverses,
            cocycles,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "charts": self.systems.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
            "overlaps": self
                .transitions
                .iter()
                .map(|(&(a, b), phi)| {
                    json!({ "pair": [a, b], "morphism": phi.to_json() })
                })
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &Value) -> Result<GluingData, AtlasError> {
        let obj = value.as_object().ok_or(AtlasError::BadJson("gluing data"))?;
        let charts = obj
            .get("charts")
            .and_then(|v| v.as_array())
            .ok_or(AtlasError::BadJson("gluing charts"))?;
        let systems: Vec<Arc<CoordinateSystem>> = charts
            .iter()
            .map(|v| CoordinateSystem::from_json(v).map(Arc::new))
            .collect::<Result<_, _>>()?;
        let mut transitions = BTreeMap::new();
        let overlaps = obj
            .get("overlaps")
            .and_then(|v| v.as_array())
            .ok_or(AtlasError::BadJson("gluing overlaps"))?;
        for entry in overlaps {
            let pair = entry
                .get("pair")
                .and_then(|v| v.as_array())
                .ok_or(AtlasError::BadJson("overlap pair"))?;
            let (a, b) = match pair.as_slice() {
                [x, y] => (
                    x.as_u64().ok_or(AtlasError::BadJson("overlap pair"))? as usize,
                    y.as_u64().ok_or(AtlasError::BadJson("overlap pair"))? as usize,
                ),
                _ => return Err(AtlasError::BadJson("overlap pair")),
            };
            for chart in [a, b] {
                if chart >= systems.len() {
                    return Err(AtlasError::ChartOutOfRange {
                        chart,
                        charts: systems.len(),
                    });
                }
            }
            let phi = DomainMorphism::from_json(
                systems[b].clone(),
                systems[a].clone(),
                entry
                    .get("morphism")
                    .ok_or(AtlasError::BadJson("overlap morphism"))?,
            )?;
            transitions.insert((a, b), phi);
        }
        GluingData::new(systems, transitions)
    }
}

/// Compare two morphisms with equal endpoints on every coordinate function
/// of the target; the first disagreement becomes the witness.
fn morphisms_agree(
    phi: &DomainMorphism,
    psi: &DomainMorphism,
) -> Result<Option<Witness>, AtlasError> {
    for c in phi.target().coords() {
        let lhs = phi.pullback_coordinate(c);
        let rhs = psi.pullback_coordinate(c);
        if !lhs.agrees_with(&rhs) {
            return Ok(Some(Witness {
                coordinate: phi.target().coord_name(c).to_string(),
                lhs: lhs.render(),
                rhs: rhs.render(),
            }));
        }
    }
    Ok(None)
}

/// A function given chart by chart: representative `α` lives on chart α's
/// coordinate system and all representatives share one degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalFunction {
    degree: i64,
    representatives: Vec<GradedFunction>,
}

impl GlobalFunction {
    pub fn new(
        glue: &GluingData,
        degree: i64,
        representatives: Vec<GradedFunction>,
    ) -> Result<GlobalFunction, AtlasError> {
        if representatives.len() != glue.charts() {
            return Err(AtlasError::WrongRepresentativeCount {
                expected: glue.charts(),
                found: representatives.len(),
            });
        }
        for (chart, rep) in representatives.iter().enumerate() {
            if rep.cs() != glue.system(chart).as_ref() {
                return Err(AtlasError::CoordinateMismatch);
            }
            if !rep.is_zero() && rep.degree() != degree {
                return Err(AtlasError::RepresentativeDegree {
                    chart,
                    expected: degree,
                    found: rep.degree(),
                });
            }
        }
        Ok(GlobalFunction {
            degree,
            representatives,
        })
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn representative(&self, chart: usize) -> &GradedFunction {
        &self.representatives[chart]
    }

    pub fn representatives(&self) -> &[GradedFunction] {
        &self.representatives
    }

    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "representatives": self
                .representatives
                .iter()
                .map(|f| f.to_json())
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(glue: &GluingData, value: &Value) -> Result<GlobalFunction, AtlasError> {
        let obj = value
            .as_object()
            .ok_or(AtlasError::BadJson("global function"))?;
        let degree = obj
            .get("degree")
            .and_then(|v| v.as_i64())
            .ok_or(AtlasError::BadJson("global function degree"))?;
        let reps = obj
            .get("representatives")
            .and_then(|v| v.as_array())
            .ok_or(AtlasError::BadJson("global function representatives"))?;
        if reps.len() != glue.charts() {
            return Err(AtlasError::WrongRepresentativeCount {
                expected: glue.charts(),
                found: reps.len(),
            });
        }
        let representatives = reps
            .iter()
            .enumerate()
            .map(|(chart, v)| GradedFunction::from_json(glue.system(chart).clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        GlobalFunction::new(glue, degree, representatives)
    }
}

/// True iff every declared overlap carries the compatibility: the β-chart
/// representative equals the α-chart representative rewritten through the
/// transition pullback, up to the common truncation.
pub fn check_global_function(glue: &GluingData, f: &GlobalFunction) -> Result<bool, AtlasError> {
    if f.representatives.len() != glue.charts() {
        return Err(AtlasError::WrongRepresentativeCount {
            expected: glue.charts(),
            found: f.representatives.len(),
        });
    }
    for (a, b) in glue.overlaps() {
        if a == b {
            continue;
        }
        let phi = glue.require(a, b)?;
        let moved = phi.pullback(f.representative(a))?;
        if !moved.agrees_with(f.representative(b)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Concatenate two coordinate systems: evens of the first, then of the
/// second; graded coordinates likewise. Names must stay distinct.
pub fn product_system(
    a: &CoordinateSystem,
    b: &CoordinateSystem,
) -> Result<Arc<CoordinateSystem>, AtlasError> {
    let mut evens: Vec<String> = a.even_names().to_vec();
    for name in b.even_names() {
        if a.coord_by_name(name).is_some() {
            return Err(AtlasError::NameCollision(name.clone()));
        }
        evens.push(name.clone());
    }
    let mut graded: Vec<(String, i64)> = (0..a.n_graded())
        .map(|mu| (a.graded_name(mu).to_string(), a.graded_degree(mu)))
        .collect();
    for mu in 0..b.n_graded() {
        let name = b.graded_name(mu);
        if a.coord_by_name(name).is_some() {
            return Err(AtlasError::NameCollision(name.to_string()));
        }
        graded.push((name.to_string(), b.graded_degree(mu)));
    }
    match CoordinateSystem::new(evens, graded) {
        Ok(cs) => Ok(Arc::new(cs)),
        Err(GradingError::DuplicateName(name)) => Err(AtlasError::NameCollision(name)),
        Err(e) => Err(e.into()),
    }
}

/// Reinterpret a function on one factor as a function on the product, with
/// the factor's coordinates sitting at the given offsets.
fn embed_function(
    f: &GradedFunction,
    product: &Arc<CoordinateSystem>,
    even_offset: usize,
    graded_offset: usize,
) -> Result<GradedFunction, AtlasError> {
    let n0 = product.n_even();
    let vars: Vec<BaseCoefficient> = (0..f.cs().n_even())
        .map(|i| BaseCoefficient::variable(n0, even_offset + i))
        .collect();
    let mut terms = Vec::new();
    for (p, c) in f.terms() {
        let mut exps = vec![0u32; product.n_graded()];
        for mu in 0..f.cs().n_graded() {
            exps[graded_offset + mu] = p.exp(mu);
        }
        terms.push((MultiIndex::new(exps, product)?, c.compose(&vars)?));
    }
    Ok(GradedFunction::from_term_list(
        product.clone(),
        f.degree(),
        f.trunc(),
        terms,
    )?)
}

fn embed_coefficient(
    c: &BaseCoefficient,
    product_n0: usize,
    even_offset: usize,
) -> Result<BaseCoefficient, AtlasError> {
    let vars: Vec<BaseCoefficient> = (0..c.nvars())
        .map(|i| BaseCoefficient::variable(product_n0, even_offset + i))
        .collect();
    Ok(c.compose(&vars)?)
}

/// The two coordinate projections of a product system built by
/// `product_system(a, b)`.
pub fn product_projections(
    product: &Arc<CoordinateSystem>,
    a: &Arc<CoordinateSystem>,
    b: &Arc<CoordinateSystem>,
    trunc: Truncation,
) -> Result<(DomainMorphism, DomainMorphism), AtlasError> {
    let n0 = product.n_even();
    let onto_a = DomainMorphism::new(
        product.clone(),
        a.clone(),
        (0..a.n_even())
            .map(|i| BaseCoefficient::variable(n0, i))
            .collect(),
        (0..a.n_even())
            .map(|_| GradedFunction::zero(product.clone(), 0, Truncation::Exact))
            .collect(),
        (0..a.n_graded())
            .map(|mu| GradedFunction::coordinate(product.clone(), Coord::Graded(mu)))
            .collect(),
        trunc,
    )?;
    let onto_b = DomainMorphism::new(
        product.clone(),
        b.clone(),
        (0..b.n_even())
            .map(|i| BaseCoefficient::variable(n0, a.n_even() + i))
            .collect(),
        (0..b.n_even())
            .map(|_| GradedFunction::zero(product.clone(), 0, Truncation::Exact))
            .collect(),
        (0..b.n_graded())
            .map(|mu| GradedFunction::coordinate(product.clone(), Coord::Graded(a.n_graded() + mu)))
            .collect(),
        trunc,
    )?;
    Ok((onto_a, onto_b))
}

/// The factor-wise morphism between product systems: coordinates of the
/// first target factor pull back through `phi`, those of the second through
/// `psi`, each rewritten in the product coordinates.
pub fn product_morphism(
    phi: &DomainMorphism,
    psi: &DomainMorphism,
) -> Result<DomainMorphism, AtlasError> {
    let source = product_system(phi.source(), psi.source())?;
    let target = product_system(phi.target(), psi.target())?;
    let n0 = source.n_even();
    let phi_even_off = 0;
    let phi_graded_off = 0;
    let psi_even_off = phi.source().n_even();
    let psi_graded_off = phi.source().n_graded();

    let mut underlying = Vec::with_capacity(target.n_even());
    let mut ybar = Vec::with_capacity(target.n_even());
    for c in phi.underlying() {
        underlying.push(embed_coefficient(c, n0, phi_even_off)?);
    }
    for c in psi.underlying() {
        underlying.push(embed_coefficient(c, n0, psi_even_off)?);
    }
    for y in phi.ybar() {
        ybar.push(embed_function(y, &source, phi_even_off, phi_graded_off)?);
    }
    for y in psi.ybar() {
        ybar.push(embed_function(y, &source, psi_even_off, psi_graded_off)?);
    }
    let mut thetabar = Vec::with_capacity(target.n_graded());
    for th in phi.thetabar() {
        thetabar.push(embed_function(th, &source, phi_even_off, phi_graded_off)?);
    }
    for th in psi.thetabar() {
        thetabar.push(embed_function(th, &source, psi_even_off, psi_graded_off)?);
    }
    Ok(DomainMorphism::new(
        source,
        target,
        underlying,
        ybar,
        thetabar,
        phi.trunc().min(psi.trunc()),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    use crate::coeffs::Rat;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    fn system(even: &[&str], graded: &[(&str, i64)]) -> Arc<CoordinateSystem> {
        Arc::new(
            CoordinateSystem::new(
                even.iter().map(|s| s.to_string()).collect(),
                graded.iter().map(|(n, d)| (n.to_string(), *d)).collect(),
            )
            .unwrap(),
        )
    }

    fn coord(cs: &Arc<CoordinateSystem>, name: &str) -> GradedFunction {
        GradedFunction::coordinate(cs.clone(), cs.coord_by_name(name).unwrap())
    }

    /// Two-chart gluing along x ↦ x + ξ1ξ2 and its inverse.
    fn shear_gluing() -> (GluingData, Arc<CoordinateSystem>) {
        let cs = system(&["x"], &[("xi1", -2), ("xi2", 2)]);
        let w = Truncation::Weight(6);
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let phi = DomainMorphism::new(
            cs.clone(),
            cs.clone(),
            vec![BaseCoefficient::variable(1, 0)],
            vec![prod],
            vec![coord(&cs, "xi1"), coord(&cs, "xi2")],
            w,
        )
        .unwrap();
        let inv = phi.invert(&[BaseCoefficient::variable(1, 0)], 6).unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 1), phi);
        transitions.insert((1, 0), inv);
        (
            GluingData::new(vec![cs.clone(), cs.clone()], transitions).unwrap(),
            cs,
        )
    }

    #[test]
    fn single_chart_verifies_vacuously() {
        let cs = system(&["x"], &[("xi", 1)]);
        let glue = GluingData::new(vec![cs], BTreeMap::new()).unwrap();
        let report = glue.verify(None).unwrap();
        assert!(report.passed());
        assert!(report.cocycles.is_empty());
    }

    #[test]
    fn mutually_inverse_charts_verify() {
        let (glue, _) = shear_gluing();
        let report = glue.verify(None).unwrap();
        assert!(report.passed(), "{:?}", report);
        assert!(!report.inverses.is_empty());
        // Triples over two charts exercise the inverse relations.
        assert!(!report.cocycles.is_empty());
    }

    #[test]
    fn corrupted_transition_fails_with_witness() {
        let cs = system(&["x"], &[("xi1", -2), ("xi2", 2)]);
        let w = Truncation::Weight(6);
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let phi = DomainMorphism::new(
            cs.clone(),
            cs.clone(),
            vec![BaseCoefficient::variable(1, 0)],
            vec![prod],
            // ξ1 ↦ 2ξ1 without the inverse knowing.
            vec![coord(&cs, "xi1").scale(&rat(2, 1)), coord(&cs, "xi2")],
            w,
        )
        .unwrap();
        let honest_inverse = DomainMorphism::new(
            cs.clone(),
            cs.clone(),
            vec![BaseCoefficient::variable(1, 0)],
            vec![coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap().neg()],
            vec![coord(&cs, "xi1"), coord(&cs, "xi2")],
            w,
        )
        .unwrap();
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 1), phi);
        transitions.insert((1, 0), honest_inverse);
        let glue = GluingData::new(vec![cs.clone(), cs.clone()], transitions).unwrap();
        let report = glue.verify(None).unwrap();
        assert!(!report.passed());
        let failing = report.inverses.iter().find(|c| !c.pass).unwrap();
        // First disagreement: the ybar correction of the round trip picks up
        // the stray factor 2, so x fails before the graded coordinates do.
        let witness = failing.witness.as_ref().unwrap();
        assert_eq!(witness.coordinate, "x");
        assert_ne!(witness.lhs, witness.rhs);
    }

    #[test]
    fn missing_reverse_overlap_is_rejected() {
        let cs = system(&["x"], &[]);
        let id = DomainMorphism::identity(&cs, Truncation::Weight(4));
        let mut transitions = BTreeMap::new();
        transitions.insert((0, 1), id);
        let err = GluingData::new(vec![cs.clone(), cs.clone()], transitions).unwrap_err();
        assert_eq!(err, AtlasError::AsymmetricOverlap(0, 1));
    }

    #[test]
    fn explicit_triples_can_be_requested() {
        let (glue, _) = shear_gluing();
        let report = glue.verify(Some(&[(0, 1, 0), (1, 0, 1)])).unwrap();
        assert!(report.passed());
        assert_eq!(report.cocycles.len(), 2);
        let err = glue.verify(Some(&[(0, 2, 0)])).unwrap_err();
        assert_eq!(
            err,
            AtlasError::ChartOutOfRange {
                chart: 2,
                charts: 2
            }
        );
    }

    #[test]
    fn global_functions_move_with_the_transitions() {
        let (glue, cs) = shear_gluing();
        // Constants glue on any atlas.
        let c = GradedFunction::constant(cs.clone(), rat(5, 1));
        let f = GlobalFunction::new(&glue, 0, vec![c.clone(), c]).unwrap();
        assert!(check_global_function(&glue, &f).unwrap());
        // Build a representative pair by pulling chart 0's expression.
        let f0 = coord(&cs, "x")
            .mul(&coord(&cs, "x"))
            .unwrap()
            .add(&coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap())
            .unwrap();
        let f1 = glue.transition(0, 1).unwrap().pullback(&f0).unwrap();
        let f = GlobalFunction::new(&glue, 0, vec![f0.clone(), f1]).unwrap();
        assert!(check_global_function(&glue, &f).unwrap());
        // Mismatched constants fail.
        let g = GlobalFunction::new(
            &glue,
            0,
            vec![
                GradedFunction::constant(cs.clone(), rat(1, 1)),
                GradedFunction::constant(cs.clone(), rat(2, 1)),
            ],
        )
        .unwrap();
        assert!(!check_global_function(&glue, &g).unwrap());
        // Gluing derivatives of glued functions: ∂f̂_β/∂𝕫^B transforms with
        // the transition Jacobian, checked here on the x-derivative.
        let phi = glue.transition(0, 1).unwrap();
        let dx0 = f0.partial(cs.coord_by_name("x").unwrap());
        let lhs = phi.pullback(&dx0).unwrap();
        // Chain rule: ∂(φ*f)/∂x = Σ_K ∂(φ*𝕫^K)/∂x · φ*(∂f/∂𝕫^K); with this
        // shear the x-column of the Jacobian is (1, 0, 0), so the pulled
        // derivative is the derivative of the pulled function.
        let rhs = f.representative(1).partial(cs.coord_by_name("x").unwrap());
        assert!(lhs.agrees_with(&rhs));
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let (glue, cs) = shear_gluing();
        let err = GlobalFunction::new(
            &glue,
            0,
            vec![coord(&cs, "xi2"), coord(&cs, "xi2")],
        )
        .unwrap_err();
        assert_eq!(
            err,
            AtlasError::RepresentativeDegree {
                chart: 0,
                expected: 0,
                found: 2
            }
        );
    }

    #[test]
    fn products_concatenate_dimensions() {
        let a = system(&["x"], &[("xi", -1), ("eta", 2)]);
        let b = system(&["y", "z"], &[("mu", 3)]);
        let p = product_system(&a, &b).unwrap();
        assert_eq!(p.n_even(), 3);
        assert_eq!(p.n_graded(), 3);
        assert_eq!(
            p.graded_dimension(),
            a.graded_dimension().sum(&b.graded_dimension())
        );
        // Empty factor changes nothing but the identity of the Arc.
        let empty = system(&[], &[]);
        let q = product_system(&a, &empty).unwrap();
        assert_eq!(q.graded_dimension(), a.graded_dimension());
        // Collisions are caught.
        let clash = system(&["x"], &[]);
        assert_eq!(
            product_system(&a, &clash).unwrap_err(),
            AtlasError::NameCollision("x".into())
        );
    }

    #[test]
    fn projections_pull_back_factor_coordinates() {
        let a = system(&["x"], &[("xi", -1)]);
        let b = system(&["y"], &[("mu", 3)]);
        let p = product_system(&a, &b).unwrap();
        let (pa, pb) = product_projections(&p, &a, &b, Truncation::Weight(6)).unwrap();
        assert_eq!(
            pa.pullback(&coord(&a, "xi")).unwrap(),
            GradedFunction::coordinate(p.clone(), Coord::Graded(0))
        );
        assert_eq!(
            pb.pullback(&coord(&b, "mu")).unwrap(),
            GradedFunction::coordinate(p.clone(), Coord::Graded(1))
        );
        assert_eq!(
            pb.pullback(&coord(&b, "y")).unwrap(),
            GradedFunction::coordinate(p.clone(), Coord::Even(1))
        );
    }

    #[test]
    fn product_morphisms_act_factor_wise() {
        let a = system(&["x"], &[("xi1", -2), ("xi2", 2)]);
        let b = system(&["y"], &[("mu", 1)]);
        let w = Truncation::Weight(6);
        let prod = coord(&a, "xi1").mul(&coord(&a, "xi2")).unwrap();
        let phi = DomainMorphism::new(
            a.clone(),
            a.clone(),
            vec![BaseCoefficient::variable(1, 0)],
            vec![prod],
            vec![coord(&a, "xi1"), coord(&a, "xi2")],
            w,
        )
        .unwrap();
        let psi = DomainMorphism::new(
            b.clone(),
            b.clone(),
            vec![BaseCoefficient::variable(1, 0)
                .mul(&BaseCoefficient::variable(1, 0))],
            vec![GradedFunction::zero(b.clone(), 0, Truncation::Exact)],
            vec![coord(&b, "mu").scale(&rat(3, 1))],
            w,
        )
        .unwrap();
        let pm = product_morphism(&phi, &psi).unwrap();
        let p = product_system(&a, &b).unwrap();
        // Factor coordinates transform exactly as in the factors.
        let (pa, pb) = product_projections(&p, &a, &b, w).unwrap();
        for c in a.coords() {
            let through_product =
                pm.pullback(&pa.pullback_coordinate(c)).unwrap();
            let through_factor = pa
                .pullback(&phi.pullback_coordinate(c))
                .unwrap();
            assert!(through_product.agrees_with(&through_factor));
        }
        for c in b.coords() {
            let through_product =
                pm.pullback(&pb.pullback_coordinate(c)).unwrap();
            let through_factor = pb
                .pullback(&psi.pullback_coordinate(c))
                .unwrap();
            assert!(through_product.agrees_with(&through_factor));
        }
        // Products compose factor-wise.
        let pm2 = product_morphism(&phi, &psi).unwrap();
        let seq = DomainMorphism::compose(&pm, &pm2).unwrap();
        let fact = product_morphism(
            &DomainMorphism::compose(&phi, &phi).unwrap(),
            &DomainMorphism::compose(&psi, &psi).unwrap(),
        )
        .unwrap();
        for c in seq.target().coords() {
            assert!(seq
                .pullback_coordinate(c)
                .agrees_with(&fact.pullback_coordinate(c)));
        }
    }

    #[test]
    fn json_round_trip() {
        let (glue, cs) = shear_gluing();
        let back = GluingData::from_json(&glue.to_json()).unwrap();
        assert_eq!(back.charts(), 2);
        assert!(back.verify(None).unwrap().passed());
        let f0 = coord(&cs, "x");
        let f1 = glue.transition(0, 1).unwrap().pullback(&f0).unwrap();
        let f = GlobalFunction::new(&glue, 0, vec![f0, f1]).unwrap();
        let f_back = GlobalFunction::from_json(&glue, &f.to_json()).unwrap();
        assert_eq!(f, f_back);
    }
}
