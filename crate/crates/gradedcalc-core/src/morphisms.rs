//! Morphisms of graded domains, stored as coordinate pullback data: a
//! rational underlying map on the even base, zero-body corrections `ȳ^j`
//! for the even coordinates, and images `θ̄_ν` for the graded coordinates.
//! This data determines the full algebra pullback, which is computed by a
//! Taylor expansion around the underlying map. Composition, degreewise
//! differentials and ranks, and Neumann-series inversion all build on it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, One};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coeffs::{BaseCoefficient, BasePoint, CoeffError, Rat};
use crate::grading::{Coord, CoordinateSystem};
use crate::matrix::{coeff_matrix_inverse, rat_rank};
use crate::series::{GradedFunction, SeriesError, Truncation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("function or morphism lives on the wrong coordinate system")]
    CoordinateMismatch,
    #[error("{what}: expected {expected} entries, found {found}")]
    WrongDataLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("even-coordinate correction {0} must have zero body")]
    BodyNotZero(usize),
    #[error("graded image {slot} has degree {found}, coordinate needs {expected}")]
    ImageDegree {
        slot: usize,
        expected: i64,
        found: i64,
    },
    #[error("a morphism whose source admits even-degree coordinates needs a finite truncation weight")]
    NeedsFiniteTruncation,
    #[error("source and target graded dimensions differ")]
    DimensionMismatch,
    #[error("degree-{0} differential block is not invertible over the function field")]
    SingularDifferential(i64),
    #[error("supplied underlying inverse does not invert the underlying map")]
    BadUnderlyingInverse,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// A graded-domain morphism, determined by what it pulls each target
/// coordinate function back to:
/// full even pullback = `y^j ∘ ul + ȳ^j`, graded pullback = `θ̄_ν`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMorphism {
    source: Arc<CoordinateSystem>,
    target: Arc<CoordinateSystem>,
    underlying: Vec<BaseCoefficient>,
    ybar: Vec<GradedFunction>,
    thetabar: Vec<GradedFunction>,
    trunc: Truncation,
}

impl DomainMorphism {
    pub fn new(
        source: Arc<CoordinateSystem>,
        target: Arc<CoordinateSystem>,
        underlying: Vec<BaseCoefficient>,
        ybar: Vec<GradedFunction>,
        thetabar: Vec<GradedFunction>,
        trunc: Truncation,
    ) -> Result<DomainMorphism, MorphismError> {
        if underlying.len() != target.n_even() {
            return Err(MorphismError::WrongDataLength {
                what: "underlying map",
                expected: target.n_even(),
                found: underlying.len(),
            });
        }
        if ybar.len() != target.n_even() {
            return Err(MorphismError::WrongDataLength {
                what: "even corrections",
                expected: target.n_even(),
                found: ybar.len(),
            });
        }
        if thetabar.len() != target.n_graded() {
            return Err(MorphismError::WrongDataLength {
                what: "graded images",
                expected: target.n_graded(),
                found: thetabar.len(),
            });
        }
        let mut trunc = if source.is_purely_odd() {
            Truncation::Exact
        } else {
            trunc
        };
        for c in &underlying {
            if c.nvars() != source.n_even() {
                return Err(MorphismError::CoordinateMismatch);
            }
        }
        for (j, y) in ybar.iter().enumerate() {
            if y.cs() != source.as_ref() {
                return Err(MorphismError::CoordinateMismatch);
            }
            if !y.is_zero() && y.degree() != 0 {
                return Err(MorphismError::ImageDegree {
                    slot: j,
                    expected: 0,
                    found: y.degree(),
                });
            }
            if !y.body().is_zero() {
                return Err(MorphismError::BodyNotZero(j));
            }
            trunc = trunc.min(y.trunc());
        }
        for (nu, th) in thetabar.iter().enumerate() {
            if th.cs() != source.as_ref() {
                return Err(MorphismError::CoordinateMismatch);
            }
            let expected = target.graded_degree(nu);
            if !th.is_zero() && th.degree() != expected {
                return Err(MorphismError::ImageDegree {
                    slot: nu,
                    expected,
                    found: th.degree(),
                });
            }
            trunc = trunc.min(th.trunc());
        }
        // The pullback Taylor series terminates on its own only when every
        // even correction is nilpotent — each term must carry at least one
        // odd-degree letter, so powers die once the odd slots are used up.
        // Otherwise a finite weight is required to cut the series.
        if trunc == Truncation::Exact {
            let nilpotent = ybar.iter().all(|y| {
                y.terms().all(|(p, _)| {
                    (0..source.n_graded())
                        .any(|mu| p.exp(mu) > 0 && source.graded_degree(mu) % 2 != 0)
                })
            });
            if !nilpotent {
                return Err(MorphismError::NeedsFiniteTruncation);
            }
        }
        Ok(DomainMorphism {
            source,
            target,
            underlying,
            ybar,
            thetabar,
            trunc,
        })
    }

    pub fn identity(cs: &Arc<CoordinateSystem>, trunc: Truncation) -> DomainMorphism {
        let underlying = (0..cs.n_even())
            .map(|i| BaseCoefficient::variable(cs.n_even(), i))
            .collect();
        let ybar = (0..cs.n_even())
            .map(|_| GradedFunction::zero(cs.clone(), 0, Truncation::Exact))
            .collect();
        let thetabar = (0..cs.n_graded())
            .map(|mu| GradedFunction::coordinate(cs.clone(), Coord::Graded(mu)))
            .collect();
        DomainMorphism::new(cs.clone(), cs.clone(), underlying, ybar, thetabar, trunc)
            .expect("identity data is well-formed")
    }

    pub fn source(&self) -> &Arc<CoordinateSystem> {
        &self.source
    }

    pub fn target(&self) -> &Arc<CoordinateSystem> {
        &self.target
    }

    pub fn underlying(&self) -> &[BaseCoefficient] {
        &self.underlying
    }

    pub fn ybar(&self) -> &[GradedFunction] {
        &self.ybar
    }

    pub fn thetabar(&self) -> &[GradedFunction] {
        &self.thetabar
    }

    pub fn trunc(&self) -> Truncation {
        self.trunc
    }

    /// Image of a base point under the underlying map.
    pub fn underlying_value(&self, m: &BasePoint) -> Result<BasePoint, CoeffError> {
        let mut out = Vec::with_capacity(self.underlying.len());
        for c in &self.underlying {
            out.push(c.eval_at(m)?);
        }
        Ok(BasePoint(out))
    }

    /// Full pullback of one target coordinate function.
    pub fn pullback_coordinate(&self, c: Coord) -> GradedFunction {
        match c {
            Coord::Even(j) => {
                let base = GradedFunction::from_coefficient(
                    self.source.clone(),
                    self.underlying[j].clone(),
                    self.trunc,
                );
                base.add(&self.ybar[j]).expect("degree-0 sum")
            }
            Coord::Graded(nu) => self.thetabar[nu].clone(),
        }
    }

    /// Pull a coefficient of the target back along the morphism:
    /// `Σ_α (1/α!) (D^α c ∘ ul) · ȳ^α`. The sum is cut at the output weight
    /// (or runs to nilpotency on purely odd sources).
    fn pull_coefficient(
        &self,
        c: &BaseCoefficient,
        taylor_cap: u32,
        out_trunc: Truncation,
    ) -> Result<GradedFunction, MorphismError> {
        let mut acc = GradedFunction::zero(self.source.clone(), 0, out_trunc);
        let ones = GradedFunction::one(self.source.clone());
        self.pull_coefficient_rec(c, 0, taylor_cap, &ones, BigInt::one(), &mut acc)?;
        Ok(acc)
    }

    fn pull_coefficient_rec(
        &self,
        deriv: &BaseCoefficient,
        v: usize,
        budget: u32,
        ypow: &GradedFunction,
        factorial: BigInt,
        acc: &mut GradedFunction,
    ) -> Result<(), MorphismError> {
        if v == self.target.n_even() {
            let composed = deriv.compose(&self.underlying)?;
            if !composed.is_zero() {
                let scale = Rat::new(BigInt::one(), factorial);
                let term = ypow.scale_coeff(&composed).scale(&scale);
                *acc = acc.add(&term)?;
            }
            return Ok(());
        }
        let mut d = deriv.clone();
        let mut yp = ypow.clone();
        let mut fact = factorial;
        for e in 0..=budget {
            self.pull_coefficient_rec(&d, v + 1, budget - e, &yp, fact.clone(), acc)?;
            if e < budget {
                d = d.partial(v);
                yp = yp.mul(&self.ybar[v])?;
                fact *= BigInt::from(e + 1);
                if d.is_zero() || yp.is_zero() {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Pullback of a function on the target:
    /// `φ*(f) = Σ_r φ̄*(f_r)·θ̄^r` with `θ̄^r` the coordinate-ordered product.
    pub fn pullback(&self, f: &GradedFunction) -> Result<GradedFunction, MorphismError> {
        if f.cs() != self.target.as_ref() {
            return Err(MorphismError::CoordinateMismatch);
        }
        let out_trunc = self.trunc.min(f.trunc());
        let weight_cap = match out_trunc {
            Truncation::Weight(w) => Some(w),
            Truncation::Exact => None,
        };
        // Taylor orders above the cap only feed weights above it; on purely
        // odd sources nilpotency kicks in at the coordinate count.
        let taylor_cap = weight_cap.unwrap_or(self.source.n_graded() as u32);
        let mut acc = GradedFunction::zero(self.source.clone(), f.degree(), out_trunc);
        for (r, c) in f.terms() {
            if let Some(w) = weight_cap {
                // θ̄^r has no terms below weight w(r).
                if r.weight() > w as u64 {
                    continue;
                }
            }
            let pulled = self.pull_coefficient(c, taylor_cap, out_trunc)?;
            if pulled.is_zero() {
                continue;
            }
            let mut theta_pow = GradedFunction::one(self.source.clone());
            for nu in 0..self.target.n_graded() {
                for _ in 0..r.exp(nu) {
                    theta_pow = theta_pow.mul(&self.thetabar[nu])?;
                }
            }
            let term = pulled.mul(&theta_pow)?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Composite `ψ ∘ φ` for `φ: A→B`, `ψ: B→C`, defined by pulling C's
    /// coordinate functions through ψ and then φ.
    pub fn compose(
        phi: &DomainMorphism,
        psi: &DomainMorphism,
    ) -> Result<DomainMorphism, MorphismError> {
        if phi.target != psi.source {
            return Err(MorphismError::CoordinateMismatch);
        }
        let trunc = phi.trunc.min(psi.trunc);
        let mut underlying = Vec::with_capacity(psi.target.n_even());
        let mut ybar = Vec::with_capacity(psi.target.n_even());
        for j in 0..psi.target.n_even() {
            let pulled = phi.pullback(&psi.pullback_coordinate(Coord::Even(j)))?;
            let body = pulled.body();
            let base = GradedFunction::from_coefficient(
                phi.source.clone(),
                body.clone(),
                pulled.trunc(),
            );
            underlying.push(body);
            ybar.push(pulled.sub(&base)?);
        }
        let mut thetabar = Vec::with_capacity(psi.target.n_graded());
        for nu in 0..psi.target.n_graded() {
            thetabar.push(phi.pullback(&psi.thetabar[nu])?);
        }
        DomainMorphism::new(
            phi.source.clone(),
            psi.target.clone(),
            underlying,
            ybar,
            thetabar,
            trunc,
        )
    }

    /// Degreewise differential blocks at a base point: the Jacobian of the
    /// underlying map in degree 0, and in degree j the matrix of linear
    /// `ξ`-coefficients of the graded images, evaluated at the point.
    pub fn differential_matrices(
        &self,
        m: &BasePoint,
    ) -> Result<DegreeMatrices, MorphismError> {
        let mut blocks: BTreeMap<i64, DegreeBlock> = BTreeMap::new();
        // Degree 0: ∂(ul_j)/∂x_i at m.
        let rows0 = self.target.n_even();
        let cols0 = self.source.n_even();
        if rows0 + cols0 > 0 {
            let mut entries = Vec::with_capacity(rows0);
            for j in 0..rows0 {
                let mut row = Vec::with_capacity(cols0);
                for i in 0..cols0 {
                    row.push(self.underlying[j].partial(i).eval_at(m)?);
                }
                entries.push(row);
            }
            blocks.insert(
                0,
                DegreeBlock {
                    rows: rows0,
                    cols: cols0,
                    entries,
                },
            );
        }
        // Nonzero degrees: linear coefficient of ξ^{e_A} in θ̄_K, at m.
        let degrees: std::collections::BTreeSet<i64> = self
            .source
            .graded_degrees()
            .chain(self.target.graded_degrees())
            .collect();
        for j in degrees {
            let src: Vec<usize> = (0..self.source.n_graded())
                .filter(|&mu| self.source.graded_degree(mu) == j)
                .collect();
            let tgt: Vec<usize> = (0..self.target.n_graded())
                .filter(|&nu| self.target.graded_degree(nu) == j)
                .collect();
            let mut entries = Vec::with_capacity(tgt.len());
            for &k in &tgt {
                let mut row = Vec::with_capacity(src.len());
                for &a in &src {
                    let idx = self.source.unit_index(a);
                    let coeff = self.thetabar[k].coefficient_or_zero(&idx);
                    row.push(coeff.eval_at(m)?);
                }
                entries.push(row);
            }
            blocks.insert(
                j,
                DegreeBlock {
                    rows: tgt.len(),
                    cols: src.len(),
                    entries,
                },
            );
        }
        Ok(DegreeMatrices {
            point: m.clone(),
            blocks,
        })
    }

    /// Per-degree ranks of the differential at a point.
    pub fn graded_rank(&self, m: &BasePoint) -> Result<BTreeMap<i64, usize>, MorphismError> {
        Ok(self.differential_matrices(m)?.ranks())
    }

    /// Immersion/submersion/local-diffeomorphism classification at a point.
    pub fn classify(&self, m: &BasePoint) -> Result<Classification, MorphismError> {
        Ok(self.differential_matrices(m)?.classify())
    }

    /// Constructive inverse up to weight `w`. Needs equal graded dimensions,
    /// an explicit two-sided inverse of the underlying map, and invertible
    /// linear blocks in every graded degree. The graded part is inverted by
    /// the Neumann series of the weight-increasing remainder.
    pub fn invert(
        &self,
        underlying_inverse: &[BaseCoefficient],
        w: u32,
    ) -> Result<DomainMorphism, MorphismError> {
        if self.source.graded_dimension() != self.target.graded_dimension() {
            return Err(MorphismError::DimensionMismatch);
        }
        let n0 = self.source.n_even();
        if underlying_inverse.len() != n0 {
            return Err(MorphismError::WrongDataLength {
                what: "underlying inverse",
                expected: n0,
                found: underlying_inverse.len(),
            });
        }
        // Two-sided check on the even base.
        for j in 0..n0 {
            let fwd = self.underlying[j]
                .compose(underlying_inverse)
                .map_err(|_| MorphismError::BadUnderlyingInverse)?;
            let bwd = underlying_inverse[j]
                .compose(&self.underlying)
                .map_err(|_| MorphismError::BadUnderlyingInverse)?;
            let var = BaseCoefficient::variable(n0, j);
            if fwd != var || bwd != var {
                return Err(MorphismError::BadUnderlyingInverse);
            }
        }
        let trunc = Truncation::Weight(w).min(self.trunc);
        // Linear reduction ψ1: invert the linear ξ-blocks over the function
        // field and compose with the underlying inverse.
        let mut thetabar1: Vec<Option<GradedFunction>> = vec![None; self.source.n_graded()];
        let degrees: std::collections::BTreeSet<i64> = self.source.graded_degrees().collect();
        for j in degrees {
            let src: Vec<usize> = (0..self.source.n_graded())
                .filter(|&mu| self.source.graded_degree(mu) == j)
                .collect();
            let tgt: Vec<usize> = (0..self.target.n_graded())
                .filter(|&nu| self.target.graded_degree(nu) == j)
                .collect();
            let mut block = Vec::with_capacity(tgt.len());
            for &k in &tgt {
                let mut row = Vec::with_capacity(src.len());
                for &a in &src {
                    let idx = self.source.unit_index(a);
                    row.push(self.thetabar[k].coefficient_or_zero(&idx));
                }
                block.push(row);
            }
            let inv = coeff_matrix_inverse(&block, n0)
                .ok_or(MorphismError::SingularDifferential(j))?;
            // ψ1*(ξ^μ) = Σ_K (block⁻¹ ∘ ulinv)^μ_K · η^K.
            for (a_pos, &mu) in src.iter().enumerate() {
                let mut image = GradedFunction::zero(
                    self.target.clone(),
                    self.source.graded_degree(mu),
                    trunc,
                );
                for (k_pos, &nu) in tgt.iter().enumerate() {
                    let entry = inv[a_pos][k_pos].compose(underlying_inverse)?;
                    if entry.is_zero() {
                        continue;
                    }
                    let coord =
                        GradedFunction::coordinate(self.target.clone(), Coord::Graded(nu));
                    image = image.add(&coord.scale_coeff(&entry))?;
                }
                thetabar1[mu] = Some(image);
            }
        }
        let psi1 = DomainMorphism::new(
            self.target.clone(),
            self.source.clone(),
            underlying_inverse.to_vec(),
            (0..n0)
                .map(|_| GradedFunction::zero(self.target.clone(), 0, trunc))
                .collect(),
            thetabar1.into_iter().map(|t| t.unwrap()).collect(),
            trunc,
        )?;
        // τ = φ ∘ ψ1 pulls back as 1 + ρ with ρ strictly weight-increasing;
        // apply the alternating Neumann series of ρ to every coordinate.
        let tau = DomainMorphism::compose(&psi1, self)?;
        let mut underlying_sigma = Vec::with_capacity(self.target.n_even());
        let mut ybar_sigma = Vec::with_capacity(self.target.n_even());
        let mut thetabar_sigma = Vec::with_capacity(self.target.n_graded());
        for c in self.target.coords() {
            let mut total = GradedFunction::coordinate(self.target.clone(), c);
            let mut h = total.clone();
            let mut negative = false;
            for _ in 0..=w {
                h = tau.pullback(&h)?.sub(&h)?;
                if h.is_zero() {
                    break;
                }
                negative = !negative;
                total = if negative { total.sub(&h)? } else { total.add(&h)? };
            }
            match c {
                Coord::Even(_) => {
                    let body = total.body();
                    let base = GradedFunction::from_coefficient(
                        self.target.clone(),
                        body.clone(),
                        total.trunc(),
                    );
                    underlying_sigma.push(body);
                    ybar_sigma.push(total.sub(&base)?);
                }
                Coord::Graded(_) => thetabar_sigma.push(total),
            }
        }
        let sigma = DomainMorphism::new(
            self.target.clone(),
            self.target.clone(),
            underlying_sigma,
            ybar_sigma,
            thetabar_sigma,
            trunc,
        )?;
        DomainMorphism::compose(&sigma, &psi1)
    }

    /// JSON form: {"underlying", "ybar", "thetabar", "trunc"}.
    pub fn to_json(&self) -> Value {
        json!({
            "underlying": self.underlying.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "ybar": self.ybar.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
            "thetabar": self.thetabar.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
            "trunc": self.trunc.to_json(),
        })
    }

    pub fn from_json(
        source: Arc<CoordinateSystem>,
        target: Arc<CoordinateSystem>,
        value: &Value,
    ) -> Result<DomainMorphism, MorphismError> {
        let obj = value.as_object().ok_or(MorphismError::BadJson("morphism"))?;
        let arr = |key: &'static str| -> Result<&Vec<Value>, MorphismError> {
            obj.get(key)
                .and_then(|v| v.as_array())
                .ok_or(MorphismError::BadJson("morphism field"))
        };
        let underlying = arr("underlying")?
            .iter()
            .map(|v| BaseCoefficient::from_json(source.n_even(), v))
            .collect::<Result<Vec<_>, _>>()?;
        let ybar = arr("ybar")?
            .iter()
            .map(|v| GradedFunction::from_json(source.clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        let thetabar = arr("thetabar")?
            .iter()
            .map(|v| GradedFunction::from_json(source.clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        let trunc = Truncation::from_json(
            obj.get("trunc").ok_or(MorphismError::BadJson("morphism trunc"))?,
        )?;
        DomainMorphism::new(source, target, underlying, ybar, thetabar, trunc)
    }
}

/// Degreewise differential of a morphism at one base point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeMatrices {
    point: BasePoint,
    blocks: BTreeMap<i64, DegreeBlock>,
}

/// One degree's block: rows index target coordinates of that degree, columns
/// index source coordinates. Kept even when one side is empty so ranks and
/// the classification can compare against both dimension profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeBlock {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<Rat>>,
}

/// Outcome of comparing the graded rank with the two dimension profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LocalDiffeo,
    Immersion,
    Submersion,
    None,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::LocalDiffeo => "local-diffeo",
            Classification::Immersion => "immersion",
            Classification::Submersion => "submersion",
            Classification::None => "none",
        };
        write!(f, "{s}")
    }
}

impl DegreeMatrices {
    pub fn point(&self) -> &BasePoint {
        &self.point
    }

    pub fn blocks(&self) -> impl Iterator<Item = (i64, &DegreeBlock)> {
        self.blocks.iter().map(|(d, b)| (*d, b))
    }

    pub fn block(&self, degree: i64) -> Option<&DegreeBlock> {
        self.blocks.get(&degree)
    }

    pub fn ranks(&self) -> BTreeMap<i64, usize> {
        self.blocks
            .iter()
            .map(|(d, b)| (*d, rat_rank(&b.entries)))
            .collect()
    }

    pub fn classify(&self) -> Classification {
        let mut injective = true;
        let mut surjective = true;
        for (_, b) in self.blocks.iter() {
            let r = rat_rank(&b.entries);
            if r != b.cols {
                injective = false;
            }
            if r != b.rows {
                surjective = false;
            }
        }
        match (injective, surjective) {
            (true, true) => Classification::LocalDiffeo,
            (true, false) => Classification::Immersion,
            (false, true) => Classification::Submersion,
            (false, false) => Classification::None,
        }
    }
}

/// Components of the differential of a function at a point, aligned with the
/// unified coordinate order: `(∂f/∂𝕫^A)(m)`.
pub fn differential_of_function(
    f: &GradedFunction,
    m: &BasePoint,
) -> Result<Vec<Rat>, MorphismError> {
    let cs = f.cs();
    let mut out = Vec::with_capacity(cs.coord_count());
    for c in cs.coords() {
        out.push(f.partial(c).value_at(m)?);
    }
    Ok(out)
}

/// Degreewise independence of differentials at a point: within each
/// functional degree, the differentials must be linearly independent over
/// the rationals. The empty family is independent.
pub fn independent_at(
    fs: &[GradedFunction],
    m: &BasePoint,
) -> Result<bool, MorphismError> {
    if fs.is_empty() {
        return Ok(true);
    }
    let cs = fs[0].cs_arc().clone();
    let mut groups: BTreeMap<i64, Vec<Vec<Rat>>> = BTreeMap::new();
    for f in fs {
        if f.cs() != cs.as_ref() {
            return Err(MorphismError::CoordinateMismatch);
        }
        groups
            .entry(f.degree())
            .or_default()
            .push(differential_of_function(f, m)?);
    }
    for rows in groups.values() {
        if rat_rank(rows) != rows.len() {
            return Ok(false);
        }
    }
    Ok(true)
}
