//! Differential forms, realized as graded functions on a doubled coordinate
//! system: for every coordinate `𝕫^A` of the base the doubled system adds a
//! partner `d𝕫^A` of degree `|𝕫^A| + 1 + s`, with the shift `s` chosen even
//! and large enough to make every partner degree positive. The exterior
//! derivative, interior product, and Lie derivative are then ordinary vector
//! fields on the doubled system, so one multiplication routine and one sign
//! engine serve the whole calculus. Primitives of closed forms come from the
//! Euler contraction in nonzero degree and from an explicit chain homotopy
//! (one graded coordinate at a time, plus the classical radial integral on
//! the even base) in degree zero.

use std::sync::Arc;

use num::{BigInt, One};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coeffs::{BaseCoefficient, CoeffError, Polynomial, Rat};
use crate::fields::{FieldError, VectorField};
use crate::grading::{Coord, CoordinateSystem, GradingError, MultiIndex, epsilon};
use crate::morphisms::{DomainMorphism, MorphismError};
use crate::series::{GradedFunction, SeriesError, Truncation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("form or function lives on the wrong coordinate system")]
    CoordinateMismatch,
    #[error("term carries {found} differential factors, form declares {expected}")]
    InhomogeneousFormDegree { expected: u32, found: u32 },
    #[error("form degrees differ: {left} vs {right}")]
    FormDegreeMismatch { left: u32, right: u32 },
    #[error("shift {given} is below the minimal admissible shift {required}")]
    ShiftTooSmall { required: u32, given: u32 },
    #[error("shift must be even, got {0}")]
    OddShift(u32),
    #[error("form has degree zero; use the homotopy-based primitive")]
    DegreeZero,
    #[error("form has nonzero degree; use the Euler-contraction primitive")]
    DegreeNotZero,
    #[error("form is not closed")]
    NotClosed,
    #[error("residual base form has non-polynomial coefficients")]
    NonPolynomialResidue,
    #[error("0-forms with nonzero constant part have no primitive")]
    ConstantObstruction,
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// A base coordinate system together with its doubled partner carrying the
/// `d𝕫^A` coordinates at degrees `|𝕫^A| + 1 + s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftedSystem {
    base: Arc<CoordinateSystem>,
    shift: u32,
    doubled: Arc<CoordinateSystem>,
}

impl ShiftedSystem {
    /// The smallest admissible shift: even, non-negative, and at least the
    /// magnitude of the most negative coordinate degree.
    pub fn minimal_shift(cs: &CoordinateSystem) -> u32 {
        let lowest = cs.graded_degrees().min().unwrap_or(0).min(0);
        let needed = (-lowest) as u32;
        needed + (needed % 2)
    }

    pub fn new(base: &Arc<CoordinateSystem>) -> Result<ShiftedSystem, FormError> {
        ShiftedSystem::with_shift(base, ShiftedSystem::minimal_shift(base))
    }

    pub fn with_shift(base: &Arc<CoordinateSystem>, shift: u32) -> Result<ShiftedSystem, FormError> {
        if shift % 2 != 0 {
            return Err(FormError::OddShift(shift));
        }
        let minimal = ShiftedSystem::minimal_shift(base);
        if shift < minimal {
            return Err(FormError::ShiftTooSmall {
                required: minimal,
                given: shift,
            });
        }
        let mut graded: Vec<(String, i64)> = (0..base.n_graded())
            .map(|mu| (base.graded_name(mu).to_string(), base.graded_degree(mu)))
            .collect();
        for c in base.coords() {
            let name = format!("d{}", base.coord_name(c));
            let degree = base.coord_degree(c) + 1 + shift as i64;
            graded.push((name, degree));
        }
        let doubled = CoordinateSystem::new(base.even_names().to_vec(), graded)?;
        Ok(ShiftedSystem {
            base: base.clone(),
            shift,
            doubled: Arc::new(doubled),
        })
    }

    pub fn base(&self) -> &Arc<CoordinateSystem> {
        &self.base
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn doubled(&self) -> &Arc<CoordinateSystem> {
        &self.doubled
    }

    /// Degree step `1 + s` between a coordinate and its differential.
    pub fn step(&self) -> i64 {
        1 + self.shift as i64
    }

    /// The doubled-system coordinate `d𝕫^A` for the base coordinate at
    /// unified position `a`.
    pub fn d_coord(&self, a: usize) -> Coord {
        Coord::Graded(self.base.n_graded() + a)
    }

    /// If the doubled graded index is a `d𝕫^A`, the unified base position `a`.
    pub fn d_origin(&self, mu: usize) -> Option<usize> {
        mu.checked_sub(self.base.n_graded())
    }

    /// Number of differential factors in a doubled-system index.
    pub fn d_count(&self, p: &MultiIndex) -> u32 {
        (self.base.n_graded()..self.doubled.n_graded())
            .map(|k| p.exp(k))
            .sum()
    }

    /// Reinterpret a base function on the doubled system.
    pub fn lift(&self, f: &GradedFunction) -> Result<GradedFunction, FormError> {
        if f.cs() != self.base.as_ref() {
            return Err(FormError::CoordinateMismatch);
        }
        let mut terms = Vec::new();
        for (p, c) in f.terms() {
            let mut exps = p.exps().to_vec();
            exps.resize(self.doubled.n_graded(), 0);
            terms.push((MultiIndex::new(exps, &self.doubled)?, c.clone()));
        }
        Ok(GradedFunction::from_term_list(
            self.doubled.clone(),
            f.degree(),
            f.trunc(),
            terms,
        )?)
    }

    /// The exterior-derivative field `d𝕫^A·∂/∂𝕫^A` on the doubled system.
    fn d_field(&self) -> VectorField {
        let step = self.step();
        let mut comps = Vec::with_capacity(self.doubled.coord_count());
        for c in self.doubled.coords() {
            let keep = match c {
                Coord::Even(_) => true,
                Coord::Graded(mu) => mu < self.base.n_graded(),
            };
            if keep {
                let a = self.doubled.coord_position(c);
                comps.push(GradedFunction::coordinate(
                    self.doubled.clone(),
                    self.d_coord(a),
                ));
            } else {
                comps.push(GradedFunction::zero(
                    self.doubled.clone(),
                    step + self.doubled.coord_degree(c),
                    Truncation::Exact,
                ));
            }
        }
        VectorField::new(self.doubled.clone(), step, comps).expect("derivative field data")
    }
}

/// A homogeneous differential form: a graded function on the doubled system
/// in which every term carries exactly `p` differential factors. The form
/// degree is `deg = |value| − p(1+s)`, independent of the chosen shift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Form {
    shifted: Arc<ShiftedSystem>,
    p: u32,
    value: GradedFunction,
    deg: i64,
}

impl Form {
    pub fn new(
        shifted: Arc<ShiftedSystem>,
        p: u32,
        value: GradedFunction,
    ) -> Result<Form, FormError> {
        if value.cs() != shifted.doubled().as_ref() {
            return Err(FormError::CoordinateMismatch);
        }
        for (idx, _) in value.terms() {
            let found = shifted.d_count(idx);
            if found != p {
                return Err(FormError::InhomogeneousFormDegree { expected: p, found });
            }
        }
        let deg = value.degree() - (p as i64) * shifted.step();
        Ok(Form {
            shifted,
            p,
            value,
            deg,
        })
    }

    pub fn zero(shifted: Arc<ShiftedSystem>, p: u32, deg: i64) -> Form {
        let degree = deg + (p as i64) * shifted.step();
        let value = GradedFunction::zero(shifted.doubled().clone(), degree, Truncation::Exact);
        Form {
            shifted,
            p,
            value,
            deg,
        }
    }

    /// A function as a 0-form.
    pub fn from_function(shifted: Arc<ShiftedSystem>, f: &GradedFunction) -> Result<Form, FormError> {
        let value = shifted.lift(f)?;
        Form::new(shifted, 0, value)
    }

    pub fn shifted(&self) -> &Arc<ShiftedSystem> {
        &self.shifted
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn deg(&self) -> i64 {
        self.deg
    }

    pub fn value(&self) -> &GradedFunction {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn trunc(&self) -> Truncation {
        self.value.trunc()
    }

    pub fn eq_up_to_weight(&self, other: &Form, w: u32) -> bool {
        self.p == other.p && self.value.eq_up_to_weight(&other.value, w)
    }

    pub fn add(&self, other: &Form) -> Result<Form, FormError> {
        if self.shifted != other.shifted {
            return Err(FormError::CoordinateMismatch);
        }
        if !self.is_zero() && !other.is_zero() && self.p != other.p {
            return Err(FormError::FormDegreeMismatch {
                left: self.p,
                right: other.p,
            });
        }
        let p = if self.is_zero() { other.p } else { self.p };
        Form::new(self.shifted.clone(), p, self.value.add(&other.value)?)
    }

    pub fn neg(&self) -> Form {
        Form {
            shifted: self.shifted.clone(),
            p: self.p,
            value: self.value.neg(),
            deg: self.deg,
        }
    }

    pub fn sub(&self, other: &Form) -> Result<Form, FormError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> Form {
        Form {
            shifted: self.shifted.clone(),
            p: self.p,
            value: self.value.scale(c),
            deg: self.deg,
        }
    }

    /// Product of forms; degrees and differential counts add.
    pub fn mul(&self, other: &Form) -> Result<Form, FormError> {
        if self.shifted != other.shifted {
            return Err(FormError::CoordinateMismatch);
        }
        Form::new(
            self.shifted.clone(),
            self.p + other.p,
            self.value.mul(&other.value)?,
        )
    }

    /// Exterior derivative: apply `d𝕫^A·∂/∂𝕫^A`. Raises `p`, keeps `deg`.
    pub fn d(&self) -> Result<Form, FormError> {
        let field = self.shifted.d_field();
        let value = field.apply(&self.value)?;
        Form::new(self.shifted.clone(), self.p + 1, value)
    }

    /// Interior product with a field on the base: `X^A·∂/∂(d𝕫^A)`. Lowers
    /// `p`, shifts `deg` by `|X|`.
    pub fn contract(&self, x: &VectorField) -> Result<Form, FormError> {
        if x.cs() != self.shifted.base().as_ref() {
            return Err(FormError::CoordinateMismatch);
        }
        if self.p == 0 {
            return Ok(Form::zero(self.shifted.clone(), 0, self.deg + x.degree()));
        }
        let fdeg = x.degree() - self.shifted.step();
        let base_count = self.shifted.base().coord_count();
        let mut comps = Vec::with_capacity(self.shifted.doubled().coord_count());
        for c in self.shifted.doubled().coords() {
            let d_origin = match c {
                Coord::Graded(mu) => self.shifted.d_origin(mu),
                Coord::Even(_) => None,
            };
            match d_origin {
                Some(a) if a < base_count => {
                    comps.push(self.shifted.lift(x.component(a))?);
                }
                _ => comps.push(GradedFunction::zero(
                    self.shifted.doubled().clone(),
                    fdeg + self.shifted.doubled().coord_degree(c),
                    Truncation::Exact,
                )),
            }
        }
        let field = VectorField::new(self.shifted.doubled().clone(), fdeg, comps)?;
        let value = field.apply(&self.value)?;
        Form::new(self.shifted.clone(), self.p - 1, value)
    }

    /// Lie derivative along a base field, by its coordinate expression
    /// `X^A·∂/∂𝕫^A + (−1)^{|X|} d𝕫^B·(∂X^A/∂𝕫^B)·∂/∂(d𝕫^A)`.
    /// Keeps `p`, shifts `deg` by `|X|`.
    pub fn lie(&self, x: &VectorField) -> Result<Form, FormError> {
        let sh = &self.shifted;
        if x.cs() != sh.base().as_ref() {
            return Err(FormError::CoordinateMismatch);
        }
        let base = sh.base();
        let sign_flip = x.degree() % 2 != 0;
        let mut comps = Vec::with_capacity(sh.doubled().coord_count());
        for c in sh.doubled().coords() {
            let d_origin = match c {
                Coord::Graded(mu) => sh.d_origin(mu),
                Coord::Even(_) => None,
            };
            match d_origin {
                Some(a) if a < base.coord_count() => {
                    // Component along d𝕫^a: Σ_B d𝕫^B · ∂X^a/∂𝕫^B.
                    let mut comp = GradedFunction::zero(
                        sh.doubled().clone(),
                        x.degree() + sh.doubled().coord_degree(c),
                        x.component(a).trunc(),
                    );
                    for b in 0..base.coord_count() {
                        let partial = x.component(a).partial(base.coord(b));
                        if partial.is_zero() {
                            continue;
                        }
                        let dzb =
                            GradedFunction::coordinate(sh.doubled().clone(), sh.d_coord(b));
                        comp = comp.add(&dzb.mul(&sh.lift(&partial)?)?)?;
                    }
                    if sign_flip {
                        comp = comp.neg();
                    }
                    comps.push(comp);
                }
                _ => {
                    // Component along the base copy of 𝕫^a.
                    let a = sh.doubled().coord_position(c);
                    comps.push(sh.lift(x.component(a))?);
                }
            }
        }
        let field = VectorField::new(sh.doubled().clone(), x.degree(), comps)?;
        let value = field.apply(&self.value)?;
        Form::new(sh.clone(), self.p, value)
    }

    /// Primitive of a closed form of nonzero degree: `α = i_E(ω)/deg(ω)`.
    pub fn exact_primitive_nonzero_degree(&self) -> Result<Form, FormError> {
        if self.is_zero() {
            return Ok(Form::zero(self.shifted.clone(), self.p.saturating_sub(1), self.deg));
        }
        if self.deg == 0 {
            return Err(FormError::DegreeZero);
        }
        if !self.d()?.is_zero() {
            return Err(FormError::NotClosed);
        }
        let euler = VectorField::euler(self.shifted.base());
        let contracted = self.contract(&euler)?;
        Ok(contracted.scale(&Rat::new(BigInt::one(), BigInt::from(self.deg))))
    }

    /// Drop every term containing the graded coordinate `ξ_μ` or its
    /// differential: the pullback through the zero section of the projection
    /// that eliminates that coordinate.
    pub fn zero_section_projection(&self, mu: usize) -> Form {
        let sh = &self.shifted;
        let xi_pos = mu;
        let dxi_pos = sh.base().n_graded() + sh.base().n_even() + mu;
        let terms: Vec<_> = self
            .value
            .terms()
            .filter(|(idx, _)| idx.exp(xi_pos) == 0 && idx.exp(dxi_pos) == 0)
            .map(|(idx, c)| (idx.clone(), c.clone()))
            .collect();
        let value = GradedFunction::from_term_list(
            sh.doubled().clone(),
            self.value.degree(),
            self.value.trunc(),
            terms,
        )
        .expect("filtered terms stay well-formed");
        Form {
            shifted: sh.clone(),
            p: self.p,
            value,
            deg: self.deg,
        }
    }

    /// Chain homotopy eliminating the graded coordinate `ξ_μ`: on each
    /// monomial written as `(dξ)^q·(ξ)^r·ρ` it returns
    /// `(dξ)^{q−1}·(ξ)^{r+1}·ρ` for odd `|ξ|` and the definite integral
    /// `ξ^{r+1}/(r+1)·ρ` (for `q = 1`) for even `|ξ|`; terms without `dξ`
    /// map to zero. Satisfies `𝟙 − π*s* = K∘d + d∘K` against
    /// `zero_section_projection`.
    pub fn poincare_homotopy(&self, mu: usize) -> Result<Form, FormError> {
        let sh = &self.shifted;
        if self.p == 0 {
            return Ok(Form::zero(sh.clone(), 0, self.deg));
        }
        let doubled = sh.doubled();
        let xi_pos = mu;
        let dxi_pos = sh.base().n_graded() + sh.base().n_even() + mu;
        let odd = sh.base().graded_degree(mu) % 2 != 0;
        let zero_idx = doubled.zero_index();
        let mut terms = Vec::new();
        for (idx, coeff) in self.value.terms() {
            let q = idx.exp(dxi_pos);
            let r = idx.exp(xi_pos);
            if q == 0 {
                continue;
            }
            if odd && r >= 1 {
                // ξ² = 0 for odd ξ.
                continue;
            }
            // Extract (dξ)^q (ξ)^r to the front: ξ^{idx} = c·ξ^a·ξ^b·ξ^u.
            let a = zero_idx.with_exp(dxi_pos, q);
            let b = zero_idx.with_exp(xi_pos, r);
            let u = idx.with_exp(dxi_pos, 0).with_exp(xi_pos, 0);
            let bu = MultiIndex::sum(&b, &u, doubled)?;
            let sign_in = epsilon(&a, &bu, doubled) * epsilon(&b, &u, doubled);
            // Apply K on the front normal form.
            let (a2, b2, factor) = if odd {
                (
                    zero_idx.with_exp(dxi_pos, q - 1),
                    zero_idx.with_exp(xi_pos, 1),
                    Rat::one(),
                )
            } else {
                (
                    zero_idx.clone(),
                    zero_idx.with_exp(xi_pos, r + 1),
                    Rat::new(BigInt::one(), BigInt::from(r + 1)),
                )
            };
            // Return to canonical order.
            let b2u = MultiIndex::sum(&b2, &u, doubled)?;
            let sign_out = epsilon(&a2, &b2u, doubled) * epsilon(&b2, &u, doubled);
            let new_idx = MultiIndex::sum(&a2, &b2u, doubled)?;
            let total = Rat::from(BigInt::from((sign_in * sign_out) as i64)) * factor;
            terms.push((new_idx, coeff.scale(&total)));
        }
        let value = GradedFunction::from_term_list(
            doubled.clone(),
            self.value.degree() - sh.step(),
            self.value.trunc(),
            terms,
        )?;
        Form::new(sh.clone(), self.p - 1, value)
    }

    /// Primitive of a closed degree-zero form with `p ≥ 1`: eliminate the
    /// graded coordinates one at a time through the chain homotopy, then
    /// integrate the residual polynomial form on the even base by the
    /// classical radial homotopy.
    pub fn primitive_deg_zero(&self) -> Result<Form, FormError> {
        if self.deg != 0 {
            return Err(FormError::DegreeNotZero);
        }
        if self.p == 0 {
            return if self.is_zero() {
                Ok(self.clone())
            } else {
                Err(FormError::ConstantObstruction)
            };
        }
        if !self.d()?.is_zero() {
            return Err(FormError::NotClosed);
        }
        let sh = &self.shifted;
        let base = sh.base();
        let mut omega = self.clone();
        let mut primitive = Form::zero(sh.clone(), self.p - 1, 0);
        for mu in 0..base.n_graded() {
            primitive = primitive.add(&omega.poincare_homotopy(mu)?)?;
            omega = omega.zero_section_projection(mu);
        }
        // Residual: only even coordinates and their differentials remain.
        let n0 = base.n_even();
        let ng = base.n_graded();
        let mut terms = Vec::new();
        for (idx, coeff) in omega.value.terms() {
            if !coeff.is_polynomial() {
                return Err(FormError::NonPolynomialResidue);
            }
            let dxs: Vec<usize> = (0..n0).filter(|i| idx.exp(ng + i) == 1).collect();
            for (mexps, c) in coeff.num().terms() {
                let dm: u32 = mexps.iter().sum();
                let denom = BigInt::from(dm + self.p);
                for (t, &i) in dxs.iter().enumerate() {
                    let mut me = mexps.clone();
                    me[i] += 1;
                    let mut scaled = c * Rat::new(BigInt::one(), denom.clone());
                    if t % 2 == 1 {
                        scaled = -scaled;
                    }
                    let mono = Polynomial::monomial(n0, me, scaled);
                    terms.push((idx.with_exp(ng + i, 0), BaseCoefficient::from_poly(mono)));
                }
            }
        }
        let radial = GradedFunction::from_term_list(
            sh.doubled().clone(),
            omega.value.degree() - sh.step(),
            omega.value.trunc(),
            terms,
        )?;
        let radial_form = Form::new(sh.clone(), self.p - 1, radial)?;
        primitive.add(&radial_form)
    }

    /// JSON form: {"p", "deg", "value"} with the doubled-system encoding.
    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "deg": self.deg,
            "value": self.value.to_json(),
        })
    }

    pub fn from_json(shifted: Arc<ShiftedSystem>, value: &Value) -> Result<Form, FormError> {
        let obj = value.as_object().ok_or(FormError::BadJson("form"))?;
        let p = obj
            .get("p")
            .and_then(|v| v.as_u64())
            .ok_or(FormError::BadJson("form p"))? as u32;
        let val = GradedFunction::from_json(
            shifted.doubled().clone(),
            obj.get("value").ok_or(FormError::BadJson("form value"))?,
        )?;
        let form = Form::new(shifted, p, val)?;
        if let Some(d) = obj.get("deg").and_then(|v| v.as_i64()) {
            if !form.is_zero() && d != form.deg {
                return Err(FormError::BadJson("form deg"));
            }
        }
        Ok(form)
    }

    /// Move a form to the same base system doubled at a larger even shift.
    /// Pure reindexing: parities are unchanged because shifts are even, so
    /// every Koszul sign is preserved.
    pub fn reshift(&self, target: &Arc<ShiftedSystem>) -> Result<Form, FormError> {
        if target.base() != self.shifted.base() {
            return Err(FormError::CoordinateMismatch);
        }
        if target.shift() == self.shifted.shift() {
            let mut out = self.clone();
            out.shifted = target.clone();
            return Ok(out);
        }
        let delta = target.step() - self.shifted.step();
        let mut terms = Vec::new();
        for (idx, c) in self.value.terms() {
            terms.push((
                MultiIndex::new(idx.exps().to_vec(), target.doubled())?,
                c.clone(),
            ));
        }
        let value = GradedFunction::from_term_list(
            target.doubled().clone(),
            self.value.degree() + (self.p as i64) * delta,
            self.value.trunc(),
            terms,
        )?;
        Form::new(target.clone(), self.p, value)
    }
}

/// Pullback of a form along a morphism of the base systems, computed through
/// the doubled morphism that sends each `d𝕪^K` to `d(φ*(𝕪^K))`. The source
/// form lives at the common shift `max(minimal source shift, ω's shift)`.
pub fn pullback_form(phi: &DomainMorphism, omega: &Form) -> Result<Form, FormError> {
    if omega.shifted().base() != phi.target() {
        return Err(FormError::CoordinateMismatch);
    }
    let s = ShiftedSystem::minimal_shift(phi.source()).max(omega.shifted().shift());
    let src_sh = Arc::new(ShiftedSystem::with_shift(phi.source(), s)?);
    let omega = if omega.shifted().shift() == s {
        omega.clone()
    } else {
        let tgt_sh = Arc::new(ShiftedSystem::with_shift(phi.target(), s)?);
        omega.reshift(&tgt_sh)?
    };
    let tgt_sh = omega.shifted().clone();
    let target = phi.target();
    // Assemble the doubled morphism.
    let ybar = phi
        .ybar()
        .iter()
        .map(|y| src_sh.lift(y))
        .collect::<Result<Vec<_>, _>>()?;
    let mut thetabar = Vec::with_capacity(tgt_sh.doubled().n_graded());
    for nu in 0..target.n_graded() {
        thetabar.push(src_sh.lift(&phi.thetabar()[nu])?);
    }
    let d_field = src_sh.d_field();
    for c in target.coords() {
        let pulled = src_sh.lift(&phi.pullback_coordinate(c))?;
        thetabar.push(d_field.apply(&pulled)?);
    }
    let doubled_phi = DomainMorphism::new(
        src_sh.doubled().clone(),
        tgt_sh.doubled().clone(),
        phi.underlying().to_vec(),
        ybar,
        thetabar,
        phi.trunc(),
    )?;
    let value = doubled_phi.pullback(omega.value())?;
    Form::new(src_sh, omega.p(), value)
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn shifted(cs: &Arc<CoordinateSystem>) -> Arc<ShiftedSystem> {
        Arc::new(ShiftedSystem::new(cs).unwrap())
    }

    /// Field with a single nonzero component along the named coordinate.
    fn single(
        cs: &Arc<CoordinateSystem>,
        degree: i64,
        along: &str,
        comp: GradedFunction,
    ) -> VectorField {
        let pos = cs.coord_position(cs.coord_by_name(along).unwrap());
        let mut components: Vec<GradedFunction> = cs
            .coords()
            .map(|c| {
                GradedFunction::zero(cs.clone(), degree + cs.coord_degree(c), Truncation::Exact)
            })
            .collect();
        components[pos] = comp;
        VectorField::new(cs.clone(), degree, components).unwrap()
    }

    #[test]
    fn shifts_are_minimal_even_bounds() {
        assert_eq!(ShiftedSystem::minimal_shift(&system(&["x"], &[])), 0);
        assert_eq!(
            ShiftedSystem::minimal_shift(&system(&["x"], &[("a", 1), ("b", 1)])),
            0
        );
        assert_eq!(
            ShiftedSystem::minimal_shift(&system(&["x"], &[("a", -2), ("b", 2)])),
            2
        );
        assert_eq!(ShiftedSystem::minimal_shift(&system(&[], &[("a", -3)])), 4);
        // Doubled degrees are all positive and offset by 1+s.
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        assert_eq!(sh.shift(), 2);
        let d = sh.doubled();
        assert_eq!(d.graded_degree(2), 3); // dx
        assert_eq!(d.graded_degree(3), 1); // dxi
        assert_eq!(d.graded_degree(4), 5); // deta
        assert!(d.graded_degrees().all(|deg| deg > 0 || deg == -2));
    }

    #[test]
    fn exterior_derivative_of_a_square() {
        let cs = system(&["x"], &[]);
        let sh = shifted(&cs);
        let x = coord(&cs, "x");
        let f = Form::from_function(sh.clone(), &x.mul(&x).unwrap()).unwrap();
        let df = f.d().unwrap();
        assert_eq!(df.p(), 1);
        assert_eq!(df.deg(), 0);
        // 2x·dx on the doubled system.
        let dx = GradedFunction::coordinate(sh.doubled().clone(), Coord::Graded(0));
        let expect = dx.scale_coeff(&BaseCoefficient::variable(1, 0)).scale(&rat(2, 1));
        assert_eq!(*df.value(), expect);
        // d² = 0 and d(constant) = 0.
        assert!(df.d().unwrap().is_zero());
        let c = Form::from_function(sh.clone(), &GradedFunction::constant(cs.clone(), rat(3, 1)))
            .unwrap();
        assert!(c.d().unwrap().is_zero());
    }

    #[test]
    fn d_squares_to_zero_with_graded_coordinates() {
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        let f = coord(&cs, "xi")
            .mul(&coord(&cs, "eta"))
            .unwrap()
            .scale_coeff(&BaseCoefficient::variable(1, 0));
        let form = Form::from_function(sh.clone(), &f).unwrap();
        let ddf = form.d().unwrap().d().unwrap();
        assert!(ddf.is_zero());
    }

    #[test]
    fn d_is_a_graded_derivation() {
        // d(ω·τ) = dω·τ + (−1)^{|ω|} ω·dτ with |ω| the doubled-system degree.
        let cs = system(&["x"], &[("xi", 1)]);
        let sh = shifted(&cs);
        let omega = Form::from_function(sh.clone(), &coord(&cs, "xi")).unwrap(); // odd
        let tau = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap();
        let lhs = omega.mul(&tau).unwrap().d().unwrap();
        let rhs = omega
            .d()
            .unwrap()
            .mul(&tau)
            .unwrap()
            .sub(&omega.mul(&tau.d().unwrap()).unwrap())
            .unwrap();
        assert_eq!(lhs.value(), rhs.value());
    }

    #[test]
    fn one_form_letters_commute_by_shifted_parity() {
        let cs = system(&["x", "y"], &[]);
        let sh = shifted(&cs);
        let fx = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap();
        let fy = Form::from_function(sh.clone(), &coord(&cs, "y")).unwrap();
        let dx = fx.d().unwrap();
        let dy = fy.d().unwrap();
        // dx·dy = −dy·dx here: both letters have odd degree 1+s.
        let lhs = dx.mul(&dy).unwrap();
        let rhs = dy.mul(&dx).unwrap();
        assert_eq!(lhs.value(), &rhs.value().neg());
    }

    #[test]
    fn contraction_pairs_with_coordinates() {
        let cs = system(&["x"], &[("xi", 1)]);
        let sh = shifted(&cs);
        let ddx = single(&cs, 0, "x", GradedFunction::one(cs.clone()));
        let dx_form = Form::from_function(sh.clone(), &coord(&cs, "x"))
            .unwrap()
            .d()
            .unwrap();
        let paired = dx_form.contract(&ddx).unwrap();
        assert_eq!(paired.p(), 0);
        assert_eq!(*paired.value(), GradedFunction::one(sh.doubled().clone()));
        // i_X on a 0-form vanishes.
        let f = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap();
        assert!(f.contract(&ddx).unwrap().is_zero());
    }

    #[test]
    fn contractions_anticommute() {
        // [i_X, i_Y] = 0 with the graded-commutator sign.
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        let x = single(&cs, 4, "xi", coord(&cs, "eta"));
        let y = single(&cs, 0, "eta", coord(&cs, "eta"));
        // Two-form to probe: d(xi)·d(eta)·x as a function product.
        let dxi = Form::from_function(sh.clone(), &coord(&cs, "xi")).unwrap().d().unwrap();
        let deta = Form::from_function(sh.clone(), &coord(&cs, "eta")).unwrap().d().unwrap();
        let xfun = Form::from_function(
            sh.clone(),
            &GradedFunction::coordinate(cs.clone(), Coord::Even(0)),
        )
        .unwrap();
        let omega = dxi.mul(&deta).unwrap().mul(&xfun).unwrap();
        let ix = |f: &Form, v: &VectorField| f.contract(v).unwrap();
        let lhs = ix(&ix(&omega, &x), &y);
        // |i_X| = |X|−1−s, |i_Y| = |Y|−1−s; s = 2 here so parities are
        // (4−3, 0−3) = (odd, odd) → commutator has a plus sign.
        let rhs = ix(&ix(&omega, &y), &x);
        assert_eq!(lhs.value(), &rhs.value().neg());
    }

    #[test]
    fn lie_routes_agree_and_measure_degree() {
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        // A 1-form with mixed content.
        let omega = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi")
                .mul(&coord(&cs, "eta"))
                .unwrap()
                .scale_coeff(&BaseCoefficient::variable(1, 0)),
        )
        .unwrap()
        .d()
        .unwrap();
        let x = single(&cs, 4, "xi", coord(&cs, "eta").scale_coeff(&BaseCoefficient::variable(1, 0)));
        // Production route vs. [i_X, d] = i_X∘d + (−1)^{|X|} d∘i_X.
        let via_formula = omega.lie(&x).unwrap();
        let ixd = omega.d().unwrap().contract(&x).unwrap();
        let dix = omega.contract(&x).unwrap().d().unwrap();
        let via_cartan = if x.degree() % 2 == 0 {
            ixd.add(&dix).unwrap()
        } else {
            ixd.sub(&dix).unwrap()
        };
        assert_eq!(via_formula.value(), via_cartan.value());
        // L_E ω = deg(ω)·ω.
        let e = VectorField::euler(&cs);
        let lie_e = omega.lie(&e).unwrap();
        assert_eq!(*lie_e.value(), omega.value().scale(&rat(omega.deg(), 1)));
        // 0-forms: L_X f = X(f).
        let f = coord(&cs, "eta");
        let f0 = Form::from_function(sh.clone(), &f).unwrap();
        let lie_f = f0.lie(&x).unwrap();
        assert_eq!(*lie_f.value(), sh.lift(&x.apply(&f).unwrap()).unwrap());
    }

    #[test]
    fn pullback_through_identity_and_shear() {
        let cs = system(&["x"], &[("xi1", -2), ("xi2", 2)]);
        let sh = shifted(&cs);
        let id = DomainMorphism::identity(&cs, Truncation::Weight(6));
        let omega = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap(),
        )
        .unwrap()
        .d()
        .unwrap();
        let pulled = pullback_form(&id, &omega).unwrap();
        assert_eq!(pulled.p(), omega.p());
        assert!(pulled.eq_up_to_weight(&omega, 6));
        // d commutes with pullback through the shear x ↦ x + ξ1ξ2.
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let phi = DomainMorphism::new(
            cs.clone(),
            cs.clone(),
            vec![BaseCoefficient::variable(1, 0)],
            vec![prod],
            vec![coord(&cs, "xi1"), coord(&cs, "xi2")],
            Truncation::Weight(6),
        )
        .unwrap();
        let f = Form::from_function(
            sh.clone(),
            &coord(&cs, "x").mul(&coord(&cs, "x")).unwrap(),
        )
        .unwrap();
        let route_a = pullback_form(&phi, &f.d().unwrap()).unwrap();
        let route_b = pullback_form(&phi, &f).unwrap().d().unwrap();
        assert!(route_a.eq_up_to_weight(&route_b, 5));
        // Pullback of d𝕪 is d of the pulled-back coordinate.
        let dx_form = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap().d().unwrap();
        let pulled_dx = pullback_form(&phi, &dx_form).unwrap();
        let expect = Form::from_function(sh.clone(), &phi.pullback_coordinate(Coord::Even(0)))
            .unwrap()
            .d()
            .unwrap();
        assert!(pulled_dx.eq_up_to_weight(&expect, 5));
        // Products pull back to products.
        let omega2 = dx_form.mul(&omega).unwrap();
        let lhs = pullback_form(&phi, &omega2).unwrap();
        let rhs = pulled_dx.mul(&pullback_form(&phi, &omega).unwrap()).unwrap();
        assert!(lhs.eq_up_to_weight(&rhs, 5));
    }

    #[test]
    fn euler_contraction_gives_primitives_in_nonzero_degree() {
        let cs = system(&["x"], &[("xi1", -2), ("xi2", 2)]);
        let sh = shifted(&cs);
        // β of nonzero degree; ω = dβ is closed and exact.
        let beta = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi2").scale_coeff(&BaseCoefficient::variable(1, 0)),
        )
        .unwrap();
        let omega = beta.d().unwrap();
        assert_eq!(omega.deg(), 2);
        let alpha = omega.exact_primitive_nonzero_degree().unwrap();
        let recovered = alpha.d().unwrap();
        assert_eq!(recovered.value(), omega.value());
        // Degree-zero forms are rejected.
        let f = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap(),
        )
        .unwrap();
        assert_eq!(
            f.d().unwrap().exact_primitive_nonzero_degree().unwrap_err(),
            FormError::DegreeZero
        );
        // Non-closed forms are rejected.
        let open = Form::from_function(sh.clone(), &coord(&cs, "xi2")).unwrap();
        assert_eq!(
            open.exact_primitive_nonzero_degree().unwrap_err(),
            FormError::NotClosed
        );
    }

    #[test]
    fn homotopy_on_odd_coordinates_swaps_letters() {
        // K(dξ·f(x)) = ξ·f(x) for odd |ξ|.
        let cs = system(&["x"], &[("xi", 1)]);
        let sh = shifted(&cs);
        let f = coord(&cs, "xi");
        let omega = Form::from_function(sh.clone(), &f).unwrap().d().unwrap();
        // omega = dξ; K eliminates ξ (index 0).
        let k = omega.poincare_homotopy(0).unwrap();
        assert_eq!(k.p(), 0);
        assert_eq!(*k.value(), sh.lift(&coord(&cs, "xi")).unwrap());
        // Terms without dξ map to zero.
        let plain = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap().d().unwrap();
        assert!(plain.poincare_homotopy(0).unwrap().is_zero());
    }

    #[test]
    fn homotopy_on_even_coordinates_integrates() {
        // K(dξ·ξ) = ξ²/2 for even |ξ|.
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        let xi = Form::from_function(sh.clone(), &coord(&cs, "xi")).unwrap();
        let dxi = xi.d().unwrap();
        let omega = dxi.mul(&xi).unwrap();
        let k = omega.poincare_homotopy(0).unwrap();
        let xi2 = coord(&cs, "xi").mul(&coord(&cs, "xi")).unwrap();
        assert_eq!(*k.value(), sh.lift(&xi2).unwrap().scale(&rat(1, 2)));
    }

    #[test]
    fn homotopy_identity_both_parities() {
        // 𝟙 − π*s* = K∘d + d∘K on assorted monomial forms.
        let cs = system(&["x"], &[("mu", 1), ("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        let x = coord(&cs, "x");
        let lift_form = |f: &GradedFunction| Form::from_function(sh.clone(), f).unwrap();
        let samples = vec![
            // Functions (p = 0) and assorted 1-/2-forms.
            lift_form(&coord(&cs, "mu").scale_coeff(&x.body())),
            lift_form(&coord(&cs, "xi").mul(&coord(&cs, "eta")).unwrap()).d().unwrap(),
            lift_form(&coord(&cs, "mu")).d().unwrap(),
            lift_form(&coord(&cs, "xi")).d().unwrap().mul(&lift_form(&coord(&cs, "eta")).d().unwrap()).unwrap(),
            lift_form(&x.mul(&x).unwrap()).d().unwrap().mul(&lift_form(&coord(&cs, "mu")).d().unwrap()).unwrap(),
            lift_form(&coord(&cs, "eta")).d().unwrap().mul(&lift_form(&coord(&cs, "eta"))).unwrap(),
        ];
        for mu in 0..cs.n_graded() {
            for omega in &samples {
                let projected = omega.zero_section_projection(mu);
                let lhs = omega.sub(&projected).unwrap();
                let rhs = omega
                    .d()
                    .unwrap()
                    .poincare_homotopy(mu)
                    .unwrap()
                    .add(&omega.poincare_homotopy(mu).unwrap().d().unwrap())
                    .unwrap();
                let diff = lhs.value().sub(rhs.value()).unwrap();
                assert!(diff.is_zero(), "coordinate {mu}: {}", diff.render());
            }
        }
    }

    #[test]
    fn degree_zero_primitives_via_homotopy() {
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        // ω = dx on the even base.
        let dx = Form::from_function(sh.clone(), &coord(&cs, "x")).unwrap().d().unwrap();
        let alpha = dx.primitive_deg_zero().unwrap();
        assert_eq!(*alpha.value(), sh.lift(&coord(&cs, "x")).unwrap());
        // Generate-exact-then-recover with graded content.
        let beta = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi")
                .mul(&coord(&cs, "eta"))
                .unwrap()
                .scale_coeff(&BaseCoefficient::variable(1, 0)),
        )
        .unwrap();
        let omega = beta.d().unwrap();
        assert_eq!(omega.deg(), 0);
        let alpha = omega.primitive_deg_zero().unwrap();
        assert_eq!(alpha.d().unwrap().value(), omega.value());
        // A mixed two-form.
        let omega2 = beta.d().unwrap().mul(&dx).unwrap();
        let alpha2 = omega2.primitive_deg_zero().unwrap();
        assert_eq!(alpha2.d().unwrap().value(), omega2.value());
        // Rational residue is reported.
        let geom = BaseCoefficient::one(1)
            .sub(&BaseCoefficient::variable(1, 0))
            .invert()
            .unwrap();
        let bad = Form::from_function(
            sh.clone(),
            &GradedFunction::from_coefficient(cs.clone(), geom, Truncation::Exact),
        )
        .unwrap()
        .d()
        .unwrap();
        assert_eq!(
            bad.primitive_deg_zero().unwrap_err(),
            FormError::NonPolynomialResidue
        );
    }

    #[test]
    fn json_round_trip() {
        let cs = system(&["x"], &[("xi", -2), ("eta", 2)]);
        let sh = shifted(&cs);
        let omega = Form::from_function(
            sh.clone(),
            &coord(&cs, "xi").mul(&coord(&cs, "eta")).unwrap(),
        )
        .unwrap()
        .d()
        .unwrap();
        let back = Form::from_json(sh.clone(), &omega.to_json()).unwrap();
        assert_eq!(omega, back);
    }

    #[test]
    fn reshift_preserves_content_and_signs() {
        let cs = system(&["x"], &[("mu", 1), ("nu", 1)]);
        let sh0 = shifted(&cs); // minimal shift 0
        let sh2 = Arc::new(ShiftedSystem::with_shift(&cs, 2).unwrap());
        let omega = Form::from_function(
            sh0.clone(),
            &coord(&cs, "mu").mul(&coord(&cs, "nu")).unwrap(),
        )
        .unwrap()
        .d()
        .unwrap();
        let moved = omega.reshift(&sh2).unwrap();
        assert_eq!(moved.p(), 1);
        assert_eq!(moved.deg(), omega.deg());
        // d commutes with the reindexing.
        let da = omega.d().unwrap().reshift(&sh2).unwrap();
        let db = moved.d().unwrap();
        assert_eq!(da.value().terms().count(), db.value().terms().count());
        for ((pa, ca), (pb, cb)) in da.value().terms().zip(db.value().terms()) {
            assert_eq!(pa.exps(), pb.exps());
            assert_eq!(ca, cb);
        }
    }
}
