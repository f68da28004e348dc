//! Homogeneous formal power series in the graded coordinates of a domain,
//! with rational-function coefficients in the even coordinates. A series
//! carries a truncation: either `Exact` (all stored terms are the whole
//! function, as always happens when every graded coordinate is odd) or a
//! weight `W` meaning the coefficients are exact up to monomial weight `W`.
//! Every operation propagates the largest weight it can still certify.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::coeffs::{BaseCoefficient, BasePoint, CoeffError, Rat};
use crate::grading::{epsilon, Coord, CoordinateSystem, GradingError, MultiIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("operands live on different coordinate systems")]
    CoordinateMismatch,
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: i64, right: i64 },
    #[error("function has zero body and no inverse")]
    NotInvertible,
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// Exactness marker. `Weight(W)`: coefficients of monomial weight ≤ W are
/// exact, higher ones are not stored. `Exact`: the stored terms are the
/// entire function. The derived order makes `Exact` the top element, so
/// `min` combines truncations of operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Truncation {
    Weight(u32),
    Exact,
}

impl Truncation {
    pub fn admits(&self, p: &MultiIndex) -> bool {
        match self {
            Truncation::Weight(w) => p.weight() <= *w as u64,
            Truncation::Exact => true,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Truncation::Weight(w) => Value::from(*w),
            Truncation::Exact => Value::String("exact".to_string()),
        }
    }

    pub fn from_json(value: &Value) -> Result<Truncation, SeriesError> {
        if value.as_str() == Some("exact") {
            return Ok(Truncation::Exact);
        }
        value
            .as_u64()
            .filter(|&w| w <= u32::MAX as u64)
            .map(|w| Truncation::Weight(w as u32))
            .ok_or(SeriesError::BadJson("truncation"))
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Weight(w) => write!(f, "{w}"),
            Truncation::Exact => write!(f, "exact"),
        }
    }
}

/// A homogeneous function on a graded domain: sparse map from monomials
/// `ξ^p` (all of one degree) to rational-function coefficients. The degree
/// is stored, so the zero function of any degree exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedFunction {
    cs: Arc<CoordinateSystem>,
    degree: i64,
    trunc: Truncation,
    terms: BTreeMap<MultiIndex, BaseCoefficient>,
}

/// On purely odd systems every series is a polynomial, so the truncation is
/// always `Exact` regardless of what an operation would otherwise propagate.
fn normalize_trunc(cs: &CoordinateSystem, trunc: Truncation) -> Truncation {
    if cs.is_purely_odd() {
        Truncation::Exact
    } else {
        trunc
    }
}

impl GradedFunction {
    pub fn zero(cs: Arc<CoordinateSystem>, degree: i64, trunc: Truncation) -> GradedFunction {
        let trunc = normalize_trunc(&cs, trunc);
        GradedFunction {
            cs,
            degree,
            trunc,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 function with the given body and no graded part.
    pub fn from_coefficient(
        cs: Arc<CoordinateSystem>,
        coeff: BaseCoefficient,
        trunc: Truncation,
    ) -> GradedFunction {
        assert_eq!(coeff.nvars(), cs.n_even(), "coefficient variable count");
        let mut out = GradedFunction::zero(cs, 0, trunc);
        if !coeff.is_zero() {
            let zero_idx = out.cs.zero_index();
            out.terms.insert(zero_idx, coeff);
        }
        out
    }

    pub fn constant(cs: Arc<CoordinateSystem>, value: Rat) -> GradedFunction {
        let coeff = BaseCoefficient::constant(cs.n_even(), value);
        GradedFunction::from_coefficient(cs, coeff, Truncation::Exact)
    }

    pub fn one(cs: Arc<CoordinateSystem>) -> GradedFunction {
        GradedFunction::constant(cs, Rat::from_integer(1.into()))
    }

    /// The coordinate function of an even or graded coordinate.
    pub fn coordinate(cs: Arc<CoordinateSystem>, c: Coord) -> GradedFunction {
        match c {
            Coord::Even(i) => {
                let coeff = BaseCoefficient::variable(cs.n_even(), i);
                GradedFunction::from_coefficient(cs, coeff, Truncation::Exact)
            }
            Coord::Graded(mu) => {
                let degree = cs.graded_degree(mu);
                let idx = cs.unit_index(mu);
                let coeff = BaseCoefficient::one(cs.n_even());
                let mut out = GradedFunction::zero(cs, degree, Truncation::Exact);
                out.terms.insert(idx, coeff);
                out
            }
        }
    }

    /// Single term `coeff · ξ^p`.
    pub fn monomial(
        cs: Arc<CoordinateSystem>,
        p: MultiIndex,
        coeff: BaseCoefficient,
        trunc: Truncation,
    ) -> Result<GradedFunction, SeriesError> {
        let degree = p.degree(&cs);
        GradedFunction::from_term_list(cs, degree, trunc, vec![(p, coeff)])
    }

    /// Assemble from raw terms, accumulating duplicate indices, dropping zero
    /// coefficients and terms above the truncation weight. Every index must
    /// have the stated degree.
    pub fn from_term_list(
        cs: Arc<CoordinateSystem>,
        degree: i64,
        trunc: Truncation,
        terms: Vec<(MultiIndex, BaseCoefficient)>,
    ) -> Result<GradedFunction, SeriesError> {
        let trunc = normalize_trunc(&cs, trunc);
        let mut map: BTreeMap<MultiIndex, BaseCoefficient> = BTreeMap::new();
        for (p, c) in terms {
            if p.len() != cs.n_graded() {
                return Err(GradingError::IndexLength {
                    expected: cs.n_graded(),
                    found: p.len(),
                }
                .into());
            }
            if c.nvars() != cs.n_even() {
                return Err(SeriesError::CoordinateMismatch);
            }
            let d = p.degree(&cs);
            if d != degree {
                return Err(SeriesError::DegreeMismatch {
                    left: degree,
                    right: d,
                });
            }
            if !trunc.admits(&p) || c.is_zero() {
                continue;
            }
            match map.entry(p) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = e.get().add(&c);
                    if sum.is_zero() {
                        e.remove();
                    } else {
                        e.insert(sum);
                    }
                }
            }
        }
        Ok(GradedFunction {
            cs,
            degree,
            trunc,
            terms: map,
        })
    }

    pub fn cs(&self) -> &CoordinateSystem {
        &self.cs
    }

    pub fn cs_arc(&self) -> &Arc<CoordinateSystem> {
        &self.cs
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn trunc(&self) -> Truncation {
        self.trunc
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &BaseCoefficient)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &MultiIndex) -> Option<&BaseCoefficient> {
        self.terms.get(p)
    }

    pub fn coefficient_or_zero(&self, p: &MultiIndex) -> BaseCoefficient {
        self.terms
            .get(p)
            .cloned()
            .unwrap_or_else(|| BaseCoefficient::zero(self.cs.n_even()))
    }

    fn check_same_system(&self, other: &GradedFunction) -> Result<(), SeriesError> {
        if self.cs != other.cs {
            return Err(SeriesError::CoordinateMismatch);
        }
        Ok(())
    }

    /// Sum. A zero operand (empty term map) adopts the other side's degree;
    /// otherwise degrees must agree.
    pub fn add(&self, other: &GradedFunction) -> Result<GradedFunction, SeriesError> {
        self.check_same_system(other)?;
        let degree = if self.is_zero() {
            other.degree
        } else if other.is_zero() {
            self.degree
        } else if self.degree == other.degree {
            self.degree
        } else {
            return Err(SeriesError::DegreeMismatch {
                left: self.degree,
                right: other.degree,
            });
        };
        let trunc = self.trunc.min(other.trunc);
        let mut terms: Vec<(MultiIndex, BaseCoefficient)> =
            Vec::with_capacity(self.terms.len() + other.terms.len());
        for (p, c) in self.terms.iter().chain(other.terms.iter()) {
            terms.push((p.clone(), c.clone()));
        }
        GradedFunction::from_term_list(self.cs.clone(), degree, trunc, terms)
    }

    pub fn neg(&self) -> GradedFunction {
        let terms = self
            .terms
            .iter()
            .map(|(p, c)| (p.clone(), c.neg()))
            .collect();
        GradedFunction {
            cs: self.cs.clone(),
            degree: self.degree,
            trunc: self.trunc,
            terms,
        }
    }

    pub fn sub(&self, other: &GradedFunction) -> Result<GradedFunction, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, factor: &Rat) -> GradedFunction {
        self.scale_coeff(&BaseCoefficient::constant(self.cs.n_even(), factor.clone()))
    }

    /// Multiply every coefficient by a base function (weight-0 scaling).
    pub fn scale_coeff(&self, factor: &BaseCoefficient) -> GradedFunction {
        let mut terms = BTreeMap::new();
        if !factor.is_zero() {
            for (p, c) in &self.terms {
                let prod = c.mul(factor);
                if !prod.is_zero() {
                    terms.insert(p.clone(), prod);
                }
            }
        }
        GradedFunction {
            cs: self.cs.clone(),
            degree: self.degree,
            trunc: self.trunc,
            terms,
        }
    }

    /// Product with the Koszul sign convolution:
    /// `(f·g)_p = Σ_q ε(q, p−q) f_q g_{p−q}`.
    pub fn mul(&self, other: &GradedFunction) -> Result<GradedFunction, SeriesError> {
        self.check_same_system(other)?;
        let trunc = self.trunc.min(other.trunc);
        let degree = self.degree + other.degree;
        let mut terms: Vec<(MultiIndex, BaseCoefficient)> = Vec::new();
        for (p, cp) in &self.terms {
            for (q, cq) in &other.terms {
                if let Truncation::Weight(w) = trunc {
                    if p.weight() + q.weight() > w as u64 {
                        continue;
                    }
                }
                let sign = epsilon(p, q, &self.cs);
                if sign == 0 {
                    continue;
                }
                let idx = MultiIndex::sum(p, q, &self.cs)?;
                let mut c = cp.mul(cq);
                if sign < 0 {
                    c = c.neg();
                }
                terms.push((idx, c));
            }
        }
        GradedFunction::from_term_list(self.cs.clone(), degree, trunc, terms)
    }

    pub fn pow(&self, n: u32) -> Result<GradedFunction, SeriesError> {
        let mut out = GradedFunction::one(self.cs.clone());
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Coefficient of the empty monomial when the degree is 0; the zero
    /// function of the base otherwise (nonzero degree forces an empty
    /// degree-0 slot).
    pub fn body(&self) -> BaseCoefficient {
        if self.degree != 0 {
            return BaseCoefficient::zero(self.cs.n_even());
        }
        self.coefficient_or_zero(&self.cs.zero_index())
    }

    /// Value at a base point: the body evaluated there.
    pub fn value_at(&self, a: &BasePoint) -> Result<Rat, CoeffError> {
        self.body().eval_at(a)
    }

    /// Neumann-series reciprocal, exact up to weight `min(w, trunc)`:
    /// `f⁻¹ = f₀⁻¹ Σ_q (−1)^q (f₀⁻¹(f − f₀))^q`. Requires degree 0 and a
    /// nonzero body. On purely odd systems the series terminates by
    /// nilpotency and `w` is ignored; it also terminates early (and stays
    /// exact) whenever the non-body part is nilpotent.
    pub fn invert(&self, w: u32) -> Result<GradedFunction, SeriesError> {
        if self.degree != 0 {
            return Err(SeriesError::NotInvertible);
        }
        let body = self.body();
        if body.is_zero() {
            return Err(SeriesError::NotInvertible);
        }
        let body_inv = body.invert().expect("nonzero body");
        let cap: u64 = if self.cs.is_purely_odd() {
            self.cs.n_graded() as u64 + 1
        } else {
            match self.trunc {
                Truncation::Weight(wf) => w.min(wf) as u64,
                Truncation::Exact => w as u64,
            }
        };
        // ρ = f₀⁻¹(f − f₀): zero body, so ρ^q has no terms below weight q.
        let body_fn =
            GradedFunction::from_coefficient(self.cs.clone(), body.clone(), self.trunc);
        let rho = self.sub(&body_fn)?.scale_coeff(&body_inv);
        let mut acc = GradedFunction::one(self.cs.clone());
        let mut term = GradedFunction::one(self.cs.clone());
        let mut negative = false;
        let mut terminated = false;
        for _ in 1..=cap {
            term = term.mul(&rho)?;
            if term.is_zero() {
                terminated = true;
                break;
            }
            negative = !negative;
            acc = if negative {
                acc.sub(&term)?
            } else {
                acc.add(&term)?
            };
        }
        let result = acc.scale_coeff(&body_inv);
        // The partial sum is exact only up to the cap weight unless the
        // series actually terminated on an exact operand.
        if terminated && self.trunc == Truncation::Exact {
            Ok(result)
        } else {
            Ok(result.with_truncation(Truncation::Weight(cap.min(u32::MAX as u64) as u32)))
        }
    }

    /// Reduce the truncation (dropping terms above it). Never raises it, and
    /// purely odd systems stay `Exact` (their series are never cut).
    fn with_truncation(&self, t: Truncation) -> GradedFunction {
        let trunc = normalize_trunc(&self.cs, self.trunc.min(t));
        let terms = self
            .terms
            .iter()
            .filter(|(p, _)| trunc.admits(p))
            .map(|(p, c)| (p.clone(), c.clone()))
            .collect();
        GradedFunction {
            cs: self.cs.clone(),
            degree: self.degree,
            trunc,
            terms,
        }
    }

    /// Equality of all terms up to (and including) weight `w`.
    pub fn eq_up_to_weight(&self, other: &GradedFunction, w: u32) -> bool {
        if self.cs != other.cs {
            return false;
        }
        if !self.is_zero() && !other.is_zero() && self.degree != other.degree {
            return false;
        }
        let cut = |f: &GradedFunction| -> BTreeMap<MultiIndex, BaseCoefficient> {
            f.terms
                .iter()
                .filter(|(p, _)| p.weight() <= w as u64)
                .map(|(p, c)| (p.clone(), c.clone()))
                .collect()
        };
        cut(self) == cut(other)
    }

    /// Agreement at the finest resolution both operands support: term
    /// equality up to the smaller weight when either is truncated,
    /// structural equality when both are exact.
    pub fn agrees_with(&self, other: &GradedFunction) -> bool {
        match self.trunc.min(other.trunc) {
            Truncation::Weight(w) => self.eq_up_to_weight(other, w),
            Truncation::Exact => {
                self.cs == other.cs
                    && (self.is_zero() && other.is_zero()
                        || self.degree == other.degree && self.terms == other.terms)
            }
        }
    }

    /// Derivative along an even coordinate: coefficient-wise.
    pub fn partial_even(&self, i: usize) -> GradedFunction {
        assert!(i < self.cs.n_even(), "even coordinate index");
        let mut terms = BTreeMap::new();
        for (p, c) in &self.terms {
            let d = c.partial(i);
            if !d.is_zero() {
                terms.insert(p.clone(), d);
            }
        }
        GradedFunction {
            cs: self.cs.clone(),
            degree: self.degree,
            trunc: self.trunc,
            terms,
        }
    }

    /// Derivative along the graded coordinate `ξ_μ`, acting from the left:
    /// `(∂f/∂ξ_μ)_p = (p_μ + 1)·(−1)^{|ξ_μ|·(p_1|ξ_1| + … + p_{μ−1}|ξ_{μ−1}|)}·f_{p+e_μ}`.
    /// Degree drops by `|ξ_μ|`; a finite truncation drops by one.
    pub fn partial_odd(&self, mu: usize) -> GradedFunction {
        assert!(mu < self.cs.n_graded(), "graded coordinate index");
        let d_mu = self.cs.graded_degree(mu);
        let trunc = match self.trunc {
            Truncation::Exact => Truncation::Exact,
            Truncation::Weight(w) => Truncation::Weight(w.saturating_sub(1)),
        };
        let trunc = normalize_trunc(&self.cs, trunc);
        let mut terms = BTreeMap::new();
        for (r, c) in &self.terms {
            if r.exp(mu) == 0 {
                continue;
            }
            let p = r.with_exp(mu, r.exp(mu) - 1);
            // Sign: coordinates in front of ξ_μ inside ξ^p contribute their
            // degrees; only odd-odd pairs flip it.
            let mut sign_flip = false;
            if d_mu % 2 != 0 {
                let mut parity = 0u32;
                for nu in 0..mu {
                    if self.cs.graded_degree(nu) % 2 != 0 {
                        parity ^= p.exp(nu) & 1;
                    }
                }
                sign_flip = parity == 1;
            }
            let mut coeff = c.scale(&Rat::from_integer(r.exp(mu).into()));
            if sign_flip {
                coeff = coeff.neg();
            }
            if !coeff.is_zero() {
                terms.insert(p, coeff);
            }
        }
        GradedFunction {
            cs: self.cs.clone(),
            degree: self.degree - d_mu,
            trunc,
            terms,
        }
    }

    /// Derivative along any coordinate of the unified view.
    pub fn partial(&self, c: Coord) -> GradedFunction {
        match c {
            Coord::Even(i) => self.partial_even(i),
            Coord::Graded(mu) => self.partial_odd(mu),
        }
    }

    /// Split into a graded Taylor polynomial of total order `q` around `a`
    /// and a flat remainder: each coefficient of weight `w ≤ q` keeps its
    /// classical Taylor part of order `q − w`.
    pub fn taylor_split(&self, a: &BasePoint, q: u32) -> Result<TaylorSplit, SeriesError> {
        let mut t_terms = Vec::new();
        for (p, c) in &self.terms {
            let w = p.weight();
            if w > q as u64 {
                continue;
            }
            let (t, _) = c.taylor(a, q - w as u32)?;
            t_terms.push((p.clone(), t));
        }
        let taylor =
            GradedFunction::from_term_list(self.cs.clone(), self.degree, self.trunc, t_terms)?;
        let remainder = self.sub(&taylor)?;
        Ok(TaylorSplit {
            taylor,
            remainder,
            center: a.clone(),
            order: q,
        })
    }

    /// Canonical text: terms in weight-major, exponent-lexicographic order.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let names: Vec<&str> = self.cs.even_names().iter().map(|s| s.as_str()).collect();
        let mut out = String::new();
        for (i, (p, c)) in self.terms.iter().enumerate() {
            let (negative, piece) = render_term(&self.cs, &names, p, c);
            if i == 0 {
                if negative {
                    out.push('-');
                }
            } else if negative {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&piece);
        }
        out
    }

    /// JSON form: {"degree", "trunc", "terms": [{"index", "coeff"}...]}.
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "trunc": self.trunc.to_json(),
            "terms": self
                .terms
                .iter()
                .map(|(p, c)| {
                    json!({
                        "index": p.exps().to_vec(),
                        "coeff": c.to_json(),
                    })
                })
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(
        cs: Arc<CoordinateSystem>,
        value: &Value,
    ) -> Result<GradedFunction, SeriesError> {
        let obj = value
            .as_object()
            .ok_or(SeriesError::BadJson("graded function"))?;
        let degree = obj
            .get("degree")
            .and_then(|v| v.as_i64())
            .ok_or(SeriesError::BadJson("graded function degree"))?;
        let trunc = Truncation::from_json(
            obj.get("trunc")
                .ok_or(SeriesError::BadJson("graded function trunc"))?,
        )?;
        let mut terms = Vec::new();
        for entry in obj
            .get("terms")
            .and_then(|v| v.as_array())
            .ok_or(SeriesError::BadJson("graded function terms"))?
        {
            let term = entry
                .as_object()
                .ok_or(SeriesError::BadJson("graded function term"))?;
            let exps_json = term
                .get("index")
                .and_then(|v| v.as_array())
                .ok_or(SeriesError::BadJson("graded function index"))?;
            let mut exps = Vec::with_capacity(exps_json.len());
            for e in exps_json {
                let e = e
                    .as_u64()
                    .filter(|&e| e <= u32::MAX as u64)
                    .ok_or(SeriesError::BadJson("graded function exponent"))?;
                exps.push(e as u32);
            }
            let idx = MultiIndex::new(exps, &cs)?;
            let coeff = BaseCoefficient::from_json(
                cs.n_even(),
                term.get("coeff")
                    .ok_or(SeriesError::BadJson("graded function coeff"))?,
            )?;
            terms.push((idx, coeff));
        }
        GradedFunction::from_term_list(cs, degree, trunc, terms)
    }
}

/// One rendered term: sign (extracted for joining) plus the body text.
fn render_term(
    cs: &CoordinateSystem,
    names: &[&str],
    p: &MultiIndex,
    c: &BaseCoefficient,
) -> (bool, String) {
    let mono = if p.is_empty() {
        None
    } else {
        Some(cs.monomial_string(p))
    };
    // Multi-term polynomial coefficients need parentheses before a monomial;
    // quotients already wrap their numerator, and single products bind fine.
    let multi = c.is_polynomial() && c.num().num_terms() > 1;
    let rendered = c.render(names);
    match mono {
        None => {
            if multi {
                (false, rendered)
            } else {
                match rendered.strip_prefix('-') {
                    Some(rest) => (true, rest.to_string()),
                    None => (false, rendered),
                }
            }
        }
        Some(mono) => {
            if multi {
                (false, format!("({})*{}", rendered, mono))
            } else {
                let (neg, core) = match rendered.strip_prefix('-') {
                    Some(rest) => (true, rest.to_string()),
                    None => (false, rendered),
                };
                if core == "1" {
                    (neg, mono)
                } else {
                    (neg, format!("{}*{}", core, mono))
                }
            }
        }
    }
}

impl fmt::Display for GradedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// Graded Hadamard split: `taylor + remainder` is the input, and every
/// remainder coefficient of weight `w ≤ order` has all base-partials up to
/// order `order − w` vanishing at the center.
#[derive(Debug, Clone)]
pub struct TaylorSplit {
    pub taylor: GradedFunction,
    pub remainder: GradedFunction,
    pub center: BasePoint,
    pub order: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use num::{BigInt, Zero};

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    fn system(even: &[&str], degrees: &[i64]) -> Arc<CoordinateSystem> {
        let graded = degrees
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("xi{}", i + 1), *d))
            .collect();
        Arc::new(
            CoordinateSystem::new(even.iter().map(|s| s.to_string()).collect(), graded).unwrap(),
        )
    }

    fn coord(cs: &Arc<CoordinateSystem>, name: &str) -> GradedFunction {
        GradedFunction::coordinate(cs.clone(), cs.coord_by_name(name).unwrap())
    }

    #[test]
    fn one_is_neutral() {
        let cs = system(&["x"], &[-2, 2]);
        let f = coord(&cs, "x")
            .mul(&coord(&cs, "xi2"))
            .unwrap()
            .add(&coord(&cs, "xi2"))
            .unwrap();
        let one = GradedFunction::one(cs.clone());
        assert_eq!(one.mul(&f).unwrap(), f);
        assert_eq!(f.mul(&one).unwrap(), f);
    }

    #[test]
    fn odd_coordinates_anticommute() {
        let cs = system(&["x"], &[1, 1]);
        let xi1 = coord(&cs, "xi1");
        let xi2 = coord(&cs, "xi2");
        let fwd = xi1.mul(&xi2).unwrap();
        let rev = xi2.mul(&xi1).unwrap();
        let idx = MultiIndex::new(vec![1, 1], &cs).unwrap();
        assert_eq!(
            fwd.coefficient(&idx),
            Some(&BaseCoefficient::one(1))
        );
        assert_eq!(
            rev.coefficient(&idx),
            Some(&BaseCoefficient::one(1).neg())
        );
        assert_eq!(fwd.neg(), rev);
        // Odd squares vanish.
        assert!(xi1.mul(&xi1).unwrap().is_zero());
    }

    #[test]
    fn difference_of_squares_in_even_degrees() {
        let cs = system(&["x"], &[-2, 2]);
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let one = GradedFunction::one(cs.clone());
        let lhs = one.add(&prod).unwrap().mul(&one.sub(&prod).unwrap()).unwrap();
        let expect = one.sub(&prod.mul(&prod).unwrap()).unwrap();
        assert_eq!(lhs, expect);
        assert_eq!(lhs.trunc(), Truncation::Exact);
    }

    #[test]
    fn mul_matches_word_expansion_oracle() {
        // Both terms have degree 1: x·ξ1 and ξ2ξ3 (degrees 1, −2+3).
        let cs = system(&["x", "y"], &[1, -2, 3]);
        let x = coord(&cs, "x");
        let f = coord(&cs, "xi1")
            .scale_coeff(&x.body())
            .add(&coord(&cs, "xi2").mul(&coord(&cs, "xi3")).unwrap())
            .unwrap();
        let g = f.mul(&f).unwrap();
        for (a, b) in [(&f, &f), (&f, &g), (&g, &f), (&g, &g)] {
            assert_eq!(
                a.mul(b).unwrap(),
                reference::mul_by_words(a, b).unwrap()
            );
        }
    }

    #[test]
    fn body_and_value() {
        let cs = system(&["x"], &[-2, 2]);
        let three = GradedFunction::constant(cs.clone(), rat(3, 1));
        let f = three
            .add(&coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap())
            .unwrap();
        assert_eq!(f.body(), BaseCoefficient::constant(1, rat(3, 1)));
        // Nonzero degree forces body 0.
        let xi2 = coord(&cs, "xi2");
        assert!(xi2.body().is_zero());
        assert_eq!(xi2.value_at(&BasePoint(vec![rat(5, 1)])).unwrap(), rat(0, 1));
        // x² + ξ1ξ2 at x = 2 evaluates through the body.
        let x = coord(&cs, "x");
        let g = x
            .mul(&x)
            .unwrap()
            .add(&coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap())
            .unwrap();
        assert_eq!(g.value_at(&BasePoint(vec![rat(2, 1)])).unwrap(), rat(4, 1));
        // Pole in the body surfaces on evaluation.
        let pole = GradedFunction::from_coefficient(
            cs.clone(),
            BaseCoefficient::variable(1, 0).invert().unwrap(),
            Truncation::Exact,
        );
        assert_eq!(
            pole.value_at(&BasePoint(vec![rat(0, 1)])),
            Err(CoeffError::EvalPole)
        );
    }

    #[test]
    fn invert_constant() {
        let cs = system(&["x"], &[-2, 2]);
        let c = GradedFunction::constant(cs.clone(), rat(2, 1));
        let inv = c.invert(4).unwrap();
        assert_eq!(inv, GradedFunction::constant(cs.clone(), rat(1, 2)));
        assert_eq!(inv.trunc(), Truncation::Exact);
    }

    #[test]
    fn invert_neumann_series() {
        let cs = system(&["x"], &[-2, 2]);
        let one = GradedFunction::one(cs.clone());
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let f = one.add(&prod).unwrap();
        let inv = f.invert(4).unwrap();
        // 1 − ξ1ξ2 + (ξ1ξ2)², truncated at weight 4.
        let expect = one
            .sub(&prod)
            .unwrap()
            .add(&prod.mul(&prod).unwrap())
            .unwrap();
        assert!(inv.eq_up_to_weight(&expect, 4));
        assert_eq!(inv.trunc(), Truncation::Weight(4));
        // f · f⁻¹ = 1 up to the requested weight.
        let check = f.mul(&inv).unwrap();
        assert!(check.eq_up_to_weight(&GradedFunction::one(cs.clone()), 4));
        // Zero body is not invertible.
        assert_eq!(prod.invert(4), Err(SeriesError::NotInvertible));
    }

    #[test]
    fn invert_terminates_on_purely_odd_systems() {
        let cs = system(&["x"], &[1, -1]);
        let one = GradedFunction::one(cs.clone());
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let f = one.add(&prod).unwrap();
        // Nilpotency ends the series exactly: (ξ1ξ2)² = 0.
        let inv = f.invert(0).unwrap();
        assert_eq!(inv, one.sub(&prod).unwrap());
        assert_eq!(inv.trunc(), Truncation::Exact);
        assert_eq!(f.mul(&inv).unwrap(), one);
    }

    #[test]
    fn partial_even_examples() {
        let cs = system(&["x"], &[1, 1]);
        let x = coord(&cs, "x");
        let xi1 = coord(&cs, "xi1");
        // ∂x(x·ξ1) = ξ1.
        assert_eq!(x.mul(&xi1).unwrap().partial_even(0), xi1);
        // ∂x(ξ1ξ2) = 0.
        assert!(xi1
            .mul(&coord(&cs, "xi2"))
            .unwrap()
            .partial_even(0)
            .is_zero());
        // ∂x(x²) = 2x.
        assert_eq!(x.mul(&x).unwrap().partial_even(0), x.scale(&rat(2, 1)));
    }

    #[test]
    fn partial_odd_is_kronecker_on_coordinates() {
        let cs = system(&["x"], &[1, -2, 3]);
        for mu in 0..3 {
            for nu in 0..3 {
                let f = GradedFunction::coordinate(cs.clone(), Coord::Graded(nu));
                let d = f.partial_odd(mu);
                if mu == nu {
                    assert_eq!(d, GradedFunction::one(cs.clone()));
                } else {
                    assert!(d.is_zero());
                }
            }
        }
    }

    #[test]
    fn partial_odd_signs() {
        let cs = system(&["x"], &[1, 1]);
        let xi1 = coord(&cs, "xi1");
        let xi2 = coord(&cs, "xi2");
        let f = xi1.mul(&xi2).unwrap();
        // Acting from the left: ∂ξ1(ξ1ξ2) = ξ2, ∂ξ2(ξ1ξ2) = −ξ1.
        assert_eq!(f.partial_odd(0), xi2);
        assert_eq!(f.partial_odd(1), xi1.neg());
        // Odd partials square to zero.
        assert!(f.partial_odd(0).partial_odd(0).is_zero());
    }

    #[test]
    fn partial_odd_even_degree_coordinate() {
        // Even graded degree: plain exponent rule without signs.
        let cs = system(&["x"], &[-2, 2]);
        let f = coord(&cs, "xi1")
            .pow(2)
            .unwrap()
            .mul(&coord(&cs, "xi2").pow(2).unwrap())
            .unwrap();
        let d = f.partial_odd(0);
        let expect = coord(&cs, "xi1")
            .mul(&coord(&cs, "xi2").pow(2).unwrap())
            .unwrap()
            .scale(&rat(2, 1));
        assert_eq!(d, expect);
        assert_eq!(d.degree(), f.degree() + 2);
    }

    #[test]
    fn partial_odd_leibniz_with_sign() {
        let cs = system(&["x"], &[1, 1, -1]);
        let x = coord(&cs, "x");
        let f = coord(&cs, "xi1").scale_coeff(&x.body());
        // Degree 0: x·ξ2ξ3 + 2.
        let g = coord(&cs, "xi2")
            .mul(&coord(&cs, "xi3"))
            .unwrap()
            .scale_coeff(&x.body())
            .add(&GradedFunction::constant(cs.clone(), rat(2, 1)))
            .unwrap();
        for mu in 0..3 {
            let lhs = f.mul(&g).unwrap().partial_odd(mu);
            let sign = if (cs.graded_degree(mu) % 2 != 0) && (f.degree() % 2 != 0) {
                rat(-1, 1)
            } else {
                rat(1, 1)
            };
            let rhs = f
                .partial_odd(mu)
                .mul(&g)
                .unwrap()
                .add(&f.mul(&g.partial_odd(mu)).unwrap().scale(&sign))
                .unwrap();
            assert_eq!(lhs, rhs, "mu = {mu}");
        }
    }

    #[test]
    fn taylor_split_examples() {
        let origin = BasePoint::origin(1);
        // Constant: T = f, R = 0.
        let cs = system(&["x"], &[-2, 2]);
        let c = GradedFunction::constant(cs.clone(), rat(7, 2));
        let split = c.taylor_split(&origin, 3).unwrap();
        assert_eq!(split.taylor, c);
        assert!(split.remainder.is_zero());
        // Pure base function x² at order 1: everything lands in R.
        let x = coord(&cs, "x");
        let f = x.mul(&x).unwrap();
        let split = f.taylor_split(&origin, 1).unwrap();
        assert!(split.taylor.is_zero());
        assert_eq!(split.remainder, f);
        // Weight-2 monomial at order 1: below the cut, untouched.
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let split = prod.taylor_split(&origin, 1).unwrap();
        assert!(split.taylor.is_zero());
        assert_eq!(split.remainder, prod);
    }

    #[test]
    fn taylor_split_mixed_orders() {
        // f = (1/(1−x))·ξ1ξ2 with q = 3: the weight-2 coefficient is
        // expanded to order 1, so T = (1 + x)·ξ1ξ2.
        let cs = system(&["x"], &[-2, 2]);
        let geom = BaseCoefficient::one(1)
            .sub(&BaseCoefficient::variable(1, 0))
            .invert()
            .unwrap();
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let f = prod.scale_coeff(&geom);
        let split = f.taylor_split(&BasePoint::origin(1), 3).unwrap();
        let expect_t = prod.scale_coeff(
            &BaseCoefficient::one(1).add(&BaseCoefficient::variable(1, 0)),
        );
        assert_eq!(split.taylor, expect_t);
        assert_eq!(
            split.taylor.add(&split.remainder).unwrap(),
            f
        );
        // Remainder coefficient has partials vanishing to order q − w = 1.
        let r_coeff = split
            .remainder
            .coefficient(&MultiIndex::new(vec![1, 1], &cs).unwrap())
            .unwrap()
            .clone();
        assert!(r_coeff.eval(&[rat(0, 1)]).unwrap().is_zero());
        assert!(r_coeff.partial(0).eval(&[rat(0, 1)]).unwrap().is_zero());
    }

    #[test]
    fn rendering_is_canonical() {
        let cs = system(&["x"], &[-2, 2]);
        let one = GradedFunction::one(cs.clone());
        let prod = coord(&cs, "xi1").mul(&coord(&cs, "xi2")).unwrap();
        let f = one
            .sub(&prod)
            .unwrap()
            .add(&prod.mul(&prod).unwrap())
            .unwrap();
        assert_eq!(f.render(), "1 - xi1*xi2 + xi1^2*xi2^2");
        // Multi-term coefficients wrap; constants fold into the sign.
        let x = coord(&cs, "x");
        let g = coord(&cs, "xi2")
            .scale_coeff(&x.body().add(&BaseCoefficient::one(1)))
            .sub(&coord(&cs, "xi1").mul(&coord(&cs, "xi2").pow(2).unwrap()).unwrap())
            .unwrap();
        assert_eq!(g.render(), "(x + 1)*xi2 - xi1*xi2^2");
        assert_eq!(GradedFunction::zero(cs.clone(), 2, Truncation::Exact).render(), "0");
    }

    #[test]
    fn json_round_trip() {
        // Degree 1 both ways: (1/(x+y))·ξ1 and ξ2ξ3.
        let cs = system(&["x", "y"], &[1, -2, 3]);
        let f = coord(&cs, "xi1")
            .scale_coeff(
                &BaseCoefficient::variable(2, 0)
                    .add(&BaseCoefficient::variable(2, 1))
                    .invert()
                    .unwrap(),
            )
            .add(&coord(&cs, "xi2").mul(&coord(&cs, "xi3")).unwrap())
            .unwrap();
        let back = GradedFunction::from_json(cs.clone(), &f.to_json()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let cs = system(&["x"], &[1, 1]);
        let sum = coord(&cs, "xi1").add(&GradedFunction::one(cs.clone()));
        assert!(matches!(sum, Err(SeriesError::DegreeMismatch { .. })));
        // But adding the zero function of any stored degree is fine.
        let zero = GradedFunction::zero(cs.clone(), 7, Truncation::Exact);
        let xi1 = coord(&cs, "xi1");
        assert_eq!(zero.add(&xi1).unwrap(), xi1);
    }
}
