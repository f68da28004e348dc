//! Graded vector bundles presented by transition matrices over a finite
//! chart set: cocycle verification with a first-failing-entry witness, the
//! dual / degree-shift / pullback constructions on transition data, and
//! degree-shifted ordinary bundles with their total-space gluing morphisms.
//!
//! A transition matrix for the ordered pair `(α,β)` converts β-frame fiber
//! components to the α-frame; its `(κ,λ)` entry is a function on the base
//! of degree `|ϑ_λ| − |ϑ_κ|`. Entries need not commute, so the cocycle is
//! multiplied in a fixed order and never re-associated: the `(β,γ)` factor
//! stays on the left of the `(α,β)` one.
//!
//! All matrices are written over one shared base coordinate system. When
//! the charts carry genuinely different coordinate expressions, the
//! optional gluing data supplies the chart-change pullbacks used to
//! transport the `(β,γ)` factor into the α-chart before comparing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num::One;
use serde_json::{json, Value};
use thiserror::Error;

use crate::atlas::{AtlasError, GluingData};
use crate::coeffs::{BaseCoefficient, CoeffError, Rat};
use crate::grading::{CoordinateSystem, GradingError};
use crate::morphisms::{DomainMorphism, MorphismError};
use crate::series::{GradedFunction, SeriesError, Truncation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("chart {chart} out of range ({charts} charts)")]
    ChartOutOfRange { chart: usize, charts: usize },
    #[error("transition matrix for ({0}, {1}) is not {2}x{2}")]
    WrongShape(usize, usize, usize),
    #[error("matrix entries for ({0}, {1}) do not live on the base coordinate system")]
    CoordinateMismatch(usize, usize),
    #[error(
        "entry ({row}, {col}) of transition ({alpha}, {beta}) has degree {found}, expected {expected}"
    )]
    EntryDegree {
        alpha: usize,
        beta: usize,
        row: usize,
        col: usize,
        expected: i64,
        found: i64,
    },
    #[error("transition for chart {0} with itself is not the identity")]
    DiagonalNotIdentity(usize),
    #[error("overlap ({0}, {1}) is declared without its reverse ({1}, {0})")]
    AsymmetricOverlap(usize, usize),
    #[error("no transition matrix declared for pair ({0}, {1})")]
    MissingOverlap(usize, usize),
    #[error("gluing data does not match the transition base system")]
    GlueMismatch,
    #[error("pullback morphism for ({0}, {1}) does not target the base system")]
    PullbackTarget(usize, usize),
    #[error("pullback morphisms do not share one source system")]
    PullbackSources,
    #[error("base matrices violate the cocycle on charts ({0}, {1}, {2})")]
    BadBaseCocycle(usize, usize, usize),
    #[error("degree shift for an ordinary bundle must be nonzero")]
    ZeroShift,
    #[error("ordinary bundle data needs a purely even base")]
    NotEvenBase,
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// Ordered fiber frame: the degree of each frame vector, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberBasis {
    degrees: Vec<i64>,
}

impl FiberBasis {
    pub fn new(degrees: Vec<i64>) -> FiberBasis {
        FiberBasis { degrees }
    }

    pub fn rank(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self, i: usize) -> i64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    /// Basis of the dual frame: degrees negated, order kept.
    pub fn dual(&self) -> FiberBasis {
        FiberBasis::new(self.degrees.iter().map(|d| -d).collect())
    }

    /// Basis viewed after a degree shift by `l`: all degrees drop by `l`.
    pub fn shifted(&self, l: i64) -> FiberBasis {
        FiberBasis::new(self.degrees.iter().map(|d| d - l).collect())
    }
}

/// First failing matrix entry of a cocycle comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixWitness {
    pub row: usize,
    pub col: usize,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CocycleCheck {
    pub triple: (usize, usize, usize),
    pub pass: bool,
    pub witness: Option<MatrixWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CocycleReport {
    pub triples: Vec<CocycleCheck>,
}

impl CocycleReport {
    pub fn passed(&self) -> bool {
        self.triples.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.triples.iter().filter(|c| !c.pass).count()
    }
}

/// Transition matrices of a graded vector bundle over `charts` charts.
/// `matrix(α, β)[κ][λ]` is the `(κ,λ)` entry of the α-after-β change of
/// frame; undeclared diagonal pairs act as identity matrices.
#[derive(Debug, Clone)]
pub struct TransitionData {
    charts: usize,
    fiber: FiberBasis,
    base: Arc<CoordinateSystem>,
    matrices: BTreeMap<(usize, usize), Vec<Vec<GradedFunction>>>,
}

impl TransitionData {
    pub fn new(
        base: Arc<CoordinateSystem>,
        charts: usize,
        fiber: FiberBasis,
        matrices: BTreeMap<(usize, usize), Vec<Vec<GradedFunction>>>,
    ) -> Result<TransitionData, BundleError> {
        let m = fiber.rank();
        for (&(a, b), matrix) in &matrices {
            for chart in [a, b] {
                if chart >= charts {
                    return Err(BundleError::ChartOutOfRange { chart, charts });
                }
            }
            if a != b && !matrices.contains_key(&(b, a)) {
                return Err(BundleError::AsymmetricOverlap(a, b));
            }
            if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
                return Err(BundleError::WrongShape(a, b, m));
            }
            for (row, cols) in matrix.iter().enumerate() {
                for (col, entry) in cols.iter().enumerate() {
                    if entry.cs() != base.as_ref() {
                        return Err(BundleError::CoordinateMismatch(a, b));
                    }
                    let expected = fiber.degree(col) - fiber.degree(row);
                    if !entry.is_zero() && entry.degree() != expected {
                        return Err(BundleError::EntryDegree {
                            alpha: a,
                            beta: b,
                            row,
                            col,
                            expected,
                            found: entry.degree(),
                        });
                    }
                }
            }
            if a == b {
                let id = identity_matrix(&base, &fiber);
                if matrix_witness(matrix, &id).is_some() {
                    return Err(BundleError::DiagonalNotIdentity(a));
                }
            }
        }
        Ok(TransitionData {
            charts,
            fiber,
            base,
            matrices,
        })
    }

    pub fn charts(&self) -> usize {
        self.charts
    }

    pub fn fiber(&self) -> &FiberBasis {
        &self.fiber
    }

    pub fn base(&self) -> &Arc<CoordinateSystem> {
        &self.base
    }

    pub fn matrix(&self, a: usize, b: usize) -> Option<&Vec<Vec<GradedFunction>>> {
        self.matrices.get(&(a, b))
    }

    pub fn overlaps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matrices.keys().copied()
    }

    fn matrix_or_identity(&self, a: usize, b: usize) -> Result<Vec<Vec<GradedFunction>>, BundleError> {
        if let Some(m) = self.matrices.get(&(a, b)) {
            return Ok(m.clone());
        }
        if a == b {
            return Ok(identity_matrix(&self.base, &self.fiber));
        }
        Err(BundleError::MissingOverlap(a, b))
    }

    /// All ordered triples whose three pairs carry data (diagonals count as
    /// implicit identities).
    fn checkable_triples(&self) -> Vec<(usize, usize, usize)> {
        let declared: BTreeSet<(usize, usize)> = self
            .matrices
            .keys()
            .copied()
            .filter(|(a, b)| a != b)
            .collect();
        let has = |a: usize, b: usize| a == b || declared.contains(&(a, b));
        let mut out = Vec::new();
        for a in 0..self.charts {
            for b in 0..self.charts {
                for c in 0..self.charts {
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

    /// Verify the transition cocycle on the given triples (all checkable
    /// triples when none are named): the `(β,γ)` matrix — transported into
    /// the α-chart by the gluing pullback when gluing data is supplied —
    /// multiplied on the left of the `(α,β)` matrix must reproduce the
    /// `(α,γ)` matrix entry by entry. Triples of the shape `(α,β,α)`
    /// exercise mutual inverses against the identity.
    pub fn check_cocycle(
        &self,
        glue: Option<&GluingData>,
        triples: Option<&[(usize, usize, usize)]>,
    ) -> Result<CocycleReport, BundleError> {
        if let Some(glue) = glue {
            if glue.charts() != self.charts {
                return Err(BundleError::GlueMismatch);
            }
            for chart in 0..glue.charts() {
                if glue.system(chart) != &self.base {
                    return Err(BundleError::GlueMismatch);
                }
            }
        }
        let m = self.fiber.rank();
        let all = match triples {
            Some(list) => {
                for &(a, b, c) in list {
                    for chart in [a, b, c] {
                        if chart >= self.charts {
                            return Err(BundleError::ChartOutOfRange {
                                chart,
                                charts: self.charts,
                            });
                        }
                    }
                }
                list.to_vec()
            }
            None => self.checkable_triples(),
        };
        let mut checks = Vec::new();
        for (a, b, c) in all {
            let ab = self.matrix_or_identity(a, b)?;
            let bc = self.matrix_or_identity(b, c)?;
            let ac = self.matrix_or_identity(a, c)?;
            // Rewrite the (β,γ) factor in α-chart expressions.
            let transported: Vec<Vec<GradedFunction>> = match glue {
                Some(glue) if a != b => {
                    let phi = glue
                        .transition(b, a)
                        .ok_or(AtlasError::MissingOverlap(b, a))?;
                    bc.iter()
                        .map(|row| row.iter().map(|e| phi.pullback(e)).collect())
                        .collect::<Result<_, _>>()?
                }
                _ => bc,
            };
            let mut witness = None;
            'entries: for k in 0..m {
                for l in 0..m {
                    let expected_degree = self.fiber.degree(l) - self.fiber.degree(k);
                    let mut sum =
                        GradedFunction::zero(self.base.clone(), expected_degree, Truncation::Exact);
                    for r in 0..m {
                        sum = sum.add(&transported[r][l].mul(&ab[k][r])?)?;
                    }
                    if !sum.agrees_with(&ac[k][l]) {
                        witness = Some(MatrixWitness {
                            row: k,
                            col: l,
                            lhs: sum.render(),
                            rhs: ac[k][l].render(),
                        });
                        break 'entries;
                    }
                }
            }
            checks.push(CocycleCheck {
                triple: (a, b, c),
                pass: witness.is_none(),
                witness,
            });
        }
        Ok(CocycleReport { triples: checks })
    }

    /// Transition data of the dual bundle: pairs swap, matrices transpose,
    /// and the `(κ,λ)` entry picks up `(−1)^{|ϑ_λ|(|ϑ_κ|−|ϑ_λ|)}` in the
    /// original fiber degrees. Fiber degrees negate.
    pub fn dual_transitions(&self) -> TransitionData {
        let mut matrices = BTreeMap::new();
        for (&(a, b), _) in &self.matrices {
            let source = &self.matrices[&(b, a)];
            let m = self.fiber.rank();
            let matrix: Vec<Vec<GradedFunction>> = (0..m)
                .map(|k| {
                    (0..m)
                        .map(|l| {
                            let dk = self.fiber.degree(k);
                            let dl = self.fiber.degree(l);
                            let entry = &source[l][k];
                            if (dl * (dk - dl)) % 2 != 0 {
                                entry.neg()
                            } else {
                                entry.clone()
                            }
                        })
                        .collect()
                })
                .collect();
            matrices.insert((a, b), matrix);
        }
        TransitionData::new(self.base.clone(), self.charts, self.fiber.dual(), matrices)
            .expect("dual transition data keeps shapes and degree bookkeeping")
    }

    /// Same matrices on the degree-shifted fiber frame.
    pub fn shift_transitions(&self, l: i64) -> TransitionData {
        TransitionData::new(
            self.base.clone(),
            self.charts,
            self.fiber.shifted(l),
            self.matrices.clone(),
        )
        .expect("shifting fiber degrees preserves entry degree differences")
    }

    /// Entrywise pullback along one morphism per declared overlap. Every
    /// morphism must target the current base and all must share one source,
    /// which becomes the new base.
    pub fn pullback_transitions(
        &self,
        phis: &BTreeMap<(usize, usize), DomainMorphism>,
    ) -> Result<TransitionData, BundleError> {
        let mut new_base: Option<Arc<CoordinateSystem>> = None;
        for (&(a, b), phi) in phis {
            if phi.target() != &self.base {
                return Err(BundleError::PullbackTarget(a, b));
            }
            match &new_base {
                None => new_base = Some(phi.source().clone()),
                Some(src) if src == phi.source() => {}
                Some(_) => return Err(BundleError::PullbackSources),
            }
        }
        let mut matrices = BTreeMap::new();
        for (&(a, b), matrix) in &self.matrices {
            let phi = phis.get(&(a, b)).ok_or(BundleError::MissingOverlap(a, b))?;
            let moved = matrix
                .iter()
                .map(|row| row.iter().map(|e| phi.pullback(e)).collect())
                .collect::<Result<Vec<Vec<_>>, _>>()?;
            matrices.insert((a, b), moved);
        }
        let base = match new_base {
            Some(base) => base,
            None => self.base.clone(),
        };
        TransitionData::new(base, self.charts, self.fiber.clone(), matrices)
    }

    /// Entrywise pullback along a single morphism used on every overlap.
    pub fn pullback_transitions_uniform(
        &self,
        phi: &DomainMorphism,
    ) -> Result<TransitionData, BundleError> {
        let phis: BTreeMap<(usize, usize), DomainMorphism> = self
            .matrices
            .keys()
            .map(|&pair| (pair, phi.clone()))
            .collect();
        if phis.is_empty() {
            if phi.target() != &self.base {
                return Err(BundleError::PullbackTarget(0, 0));
            }
            return TransitionData::new(
                phi.source().clone(),
                self.charts,
                self.fiber.clone(),
                BTreeMap::new(),
            );
        }
        self.pullback_transitions(&phis)
    }

    /// JSON form: {"charts", "fiber_degrees", "overlaps", "matrices"} with
    /// overlap pairs and matrices aligned by position.
    pub fn to_json(&self) -> Value {
        let overlaps: Vec<Value> = self.matrices.keys().map(|&(a, b)| json!([a, b])).collect();
        let matrices: Vec<Value> = self
            .matrices
            .values()
            .map(|matrix| {
                json!(matrix
                    .iter()
                    .map(|row| row.iter().map(|e| e.to_json()).collect::<Vec<_>>())
                    .collect::<Vec<_>>())
            })
            .collect();
        json!({
            "charts": self.charts,
            "fiber_degrees": self.fiber.degrees(),
            "overlaps": overlaps,
            "matrices": matrices,
        })
    }

    pub fn from_json(
        base: Arc<CoordinateSystem>,
        value: &Value,
    ) -> Result<TransitionData, BundleError> {
        let obj = value
            .as_object()
            .ok_or(BundleError::BadJson("transition data"))?;
        let charts = obj
            .get("charts")
            .and_then(|v| v.as_u64())
            .ok_or(BundleError::BadJson("transition charts"))? as usize;
        let degrees = obj
            .get("fiber_degrees")
            .and_then(|v| v.as_array())
            .ok_or(BundleError::BadJson("fiber degrees"))?
            .iter()
            .map(|v| v.as_i64().ok_or(BundleError::BadJson("fiber degrees")))
            .collect::<Result<Vec<_>, _>>()?;
        let overlaps = obj
            .get("overlaps")
            .and_then(|v| v.as_array())
            .ok_or(BundleError::BadJson("transition overlaps"))?;
        let raw_matrices = obj
            .get("matrices")
            .and_then(|v| v.as_array())
            .ok_or(BundleError::BadJson("transition matrices"))?;
        if overlaps.len() != raw_matrices.len() {
            return Err(BundleError::BadJson("transition matrices"));
        }
        let mut matrices = BTreeMap::new();
        for (pair, matrix) in overlaps.iter().zip(raw_matrices) {
            let pair = pair
                .as_array()
                .ok_or(BundleError::BadJson("overlap pair"))?;
            let (a, b) = match pair.as_slice() {
                [x, y] => (
                    x.as_u64().ok_or(BundleError::BadJson("overlap pair"))? as usize,
                    y.as_u64().ok_or(BundleError::BadJson("overlap pair"))? as usize,
                ),
                _ => return Err(BundleError::BadJson("overlap pair")),
            };
            let rows = matrix
                .as_array()
                .ok_or(BundleError::BadJson("transition matrix"))?
                .iter()
                .map(|row| {
                    row.as_array()
                        .ok_or(BundleError::BadJson("transition matrix"))?
                        .iter()
                        .map(|e| GradedFunction::from_json(base.clone(), e).map_err(Into::into))
                        .collect::<Result<Vec<_>, BundleError>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            matrices.insert((a, b), rows);
        }
        TransitionData::new(base, charts, FiberBasis::new(degrees), matrices)
    }
}

fn identity_matrix(base: &Arc<CoordinateSystem>, fiber: &FiberBasis) -> Vec<Vec<GradedFunction>> {
    let m = fiber.rank();
    (0..m)
        .map(|k| {
            (0..m)
                .map(|l| {
                    if k == l {
                        GradedFunction::constant(base.clone(), Rat::one())
                    } else {
                        GradedFunction::zero(
                            base.clone(),
                            fiber.degree(l) - fiber.degree(k),
                            Truncation::Exact,
                        )
                    }
                })
                .collect()
        })
        .collect()
}

/// First entry where the matrices disagree up to the common truncation.
fn matrix_witness(
    lhs: &[Vec<GradedFunction>],
    rhs: &[Vec<GradedFunction>],
) -> Option<MatrixWitness> {
    for (k, (lrow, rrow)) in lhs.iter().zip(rhs).enumerate() {
        for (l, (le, re)) in lrow.iter().zip(rrow).enumerate() {
            if !le.agrees_with(re) {
                return Some(MatrixWitness {
                    row: k,
                    col: l,
                    lhs: le.render(),
                    rhs: re.render(),
                });
            }
        }
    }
    None
}

/// Build the degree-`k` shift of an ordinary vector bundle given by rational
/// matrices `g` over a purely even base: the fiber frame sits in degree `k`,
/// the fiber coordinates transform through the rows of `g`, and the returned
/// gluing data holds the total-space transition morphisms (base coordinates
/// pass through unchanged; fiber coordinate `μ` pulls back to row `μ` of the
/// matrix applied to the fiber coordinates). The ordinary cocycle of `g` is
/// checked first; the graded cocycle of the produced morphisms is re-verified
/// before returning.
pub fn shifted_bundle_ek(
    base: &Arc<CoordinateSystem>,
    charts: usize,
    rank: usize,
    g: &BTreeMap<(usize, usize), Vec<Vec<BaseCoefficient>>>,
    k: i64,
    trunc: Truncation,
) -> Result<(TransitionData, GluingData), BundleError> {
    if k == 0 {
        return Err(BundleError::ZeroShift);
    }
    if base.n_graded() != 0 {
        return Err(BundleError::NotEvenBase);
    }
    let n0 = base.n_even();
    for (&(a, b), matrix) in g {
        for chart in [a, b] {
            if chart >= charts {
                return Err(BundleError::ChartOutOfRange { chart, charts });
            }
        }
        if a != b && !g.contains_key(&(b, a)) {
            return Err(BundleError::AsymmetricOverlap(a, b));
        }
        if matrix.len() != rank || matrix.iter().any(|row| row.len() != rank) {
            return Err(BundleError::WrongShape(a, b, rank));
        }
        if matrix
            .iter()
            .any(|row| row.iter().any(|e| e.nvars() != n0))
        {
            return Err(BundleError::CoordinateMismatch(a, b));
        }
    }

    // Ordinary cocycle over the (commutative) base coefficients, including
    // the mutual-inverse triples (α,β,α) against the identity.
    let declared: BTreeSet<(usize, usize)> = g.keys().copied().filter(|(a, b)| a != b).collect();
    let has = |a: usize, b: usize| a == b || declared.contains(&(a, b));
    let id_entry = |k: usize, l: usize| {
        if k == l {
            BaseCoefficient::one(n0)
        } else {
            BaseCoefficient::zero(n0)
        }
    };
    let entry = |a: usize, b: usize, k: usize, l: usize| -> BaseCoefficient {
        match g.get(&(a, b)) {
            Some(m) => m[k][l].clone(),
            None => id_entry(k, l),
        }
    };
    for a in 0..charts {
        for b in 0..charts {
            for c in 0..charts {
                if (a == b && b == c) || !(has(a, b) && has(b, c) && has(a, c)) {
                    continue;
                }
                for kk in 0..rank {
                    for ll in 0..rank {
                        let mut sum = BaseCoefficient::zero(n0);
                        for rr in 0..rank {
                            sum = sum.add(&entry(a, b, kk, rr).mul(&entry(b, c, rr, ll)));
                        }
                        if sum != entry(a, c, kk, ll) {
                            return Err(BundleError::BadBaseCocycle(a, b, c));
                        }
                    }
                }
            }
        }
    }

    // Transition data: every fiber degree is k, entries are g verbatim.
    let fiber = FiberBasis::new(vec![k; rank]);
    let mut matrices = BTreeMap::new();
    for (&pair, matrix) in g {
        let lifted = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        GradedFunction::from_term_list(
                            base.clone(),
                            0,
                            Truncation::Exact,
                            vec![(base.zero_index(), e.clone())],
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        matrices.insert(pair, lifted);
    }
    let transitions = TransitionData::new(base.clone(), charts, fiber, matrices)?;

    // Total space: the even base plus one degree-k coordinate per frame
    // vector, glued by morphisms that fix the base and mix the fibers.
    let total = Arc::new(CoordinateSystem::new(
        base.even_names().to_vec(),
        (1..=rank).map(|i| (format!("xi{i}"), k)).collect(),
    )?);
    let mut morphisms = BTreeMap::new();
    for &(a, b) in g.keys() {
        let underlying = (0..n0).map(|i| BaseCoefficient::variable(n0, i)).collect();
        let ybar = (0..n0)
            .map(|_| GradedFunction::zero(total.clone(), 0, Truncation::Exact))
            .collect();
        // The total system shares the base's even coordinates, so the matrix
        // entries already have the right variable count.
        let thetabar = (0..rank)
            .map(|mu| {
                let terms = (0..rank)
                    .map(|nu| (total.zero_index().with_exp(nu, 1), entry(a, b, mu, nu)))
                    .collect();
                GradedFunction::from_term_list(total.clone(), k, trunc, terms)
            })
            .collect::<Result<Vec<_>, SeriesError>>()?;
        morphisms.insert(
            (a, b),
            DomainMorphism::new(
                total.clone(),
                total.clone(),
                underlying,
                ybar,
                thetabar,
                trunc,
            )?,
        );
    }
    let glue = GluingData::new(vec![total; charts], morphisms)?;
    let report = glue.verify(None)?;
    if let Some(check) = report.cocycles.iter().find(|c| !c.pass) {
        let (a, b, c) = check.triple;
        return Err(BundleError::BadBaseCocycle(a, b, c));
    }
    if report.identities.iter().any(|c| !c.pass) || report.inverses.iter().any(|c| !c.pass) {
        let (a, b) = report
            .identities
            .iter()
            .chain(&report.inverses)
            .find(|c| !c.pass)
            .map(|c| c.pair)
            .unwrap_or((0, 0));
        return Err(BundleError::BadBaseCocycle(a, b, a));
    }
    Ok((transitions, glue))
}
