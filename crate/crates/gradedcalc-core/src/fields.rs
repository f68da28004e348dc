//! Vector fields on a graded domain, stored by their components in the
//! coordinate frame: `X = Σ_A X^A ∂/∂𝕫^A` with `|X^A| = |X| + |𝕫^A|`.
//! Provides application to functions, the graded commutator, the Euler
//! field, pointwise tangent vectors, and relatedness along a morphism.

use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::coeffs::{BasePoint, CoeffError, Rat};
use crate::grading::{Coord, CoordinateSystem};
use crate::morphisms::{DomainMorphism, MorphismError};
use crate::series::{GradedFunction, SeriesError, Truncation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field or function lives on the wrong coordinate system")]
    CoordinateMismatch,
    #[error("expected one component per coordinate ({expected}), found {found}")]
    WrongDataLength { expected: usize, found: usize },
    #[error("component {slot} has degree {found}, needs {expected}")]
    ComponentDegree {
        slot: usize,
        expected: i64,
        found: i64,
    },
    #[error("field degrees differ: {left} vs {right}")]
    DegreeMismatch { left: i64, right: i64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// A homogeneous vector field, one component function per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    cs: Arc<CoordinateSystem>,
    degree: i64,
    components: Vec<GradedFunction>,
}

/// The value of a vector field at a base point: one rational per coordinate
/// direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TangentVector {
    pub point: BasePoint,
    pub degree: i64,
    pub components: Vec<Rat>,
}

impl TangentVector {
    pub fn is_zero(&self) -> bool {
        use num::Zero;
        self.components.iter().all(|c| c.is_zero())
    }
}

impl VectorField {
    pub fn new(
        cs: Arc<CoordinateSystem>,
        degree: i64,
        components: Vec<GradedFunction>,
    ) -> Result<VectorField, FieldError> {
        if components.len() != cs.coord_count() {
            return Err(FieldError::WrongDataLength {
                expected: cs.coord_count(),
                found: components.len(),
            });
        }
        for (a, comp) in components.iter().enumerate() {
            if comp.cs() != cs.as_ref() {
                return Err(FieldError::CoordinateMismatch);
            }
            let expected = degree + cs.coord_degree(cs.coord(a));
            if !comp.is_zero() && comp.degree() != expected {
                return Err(FieldError::ComponentDegree {
                    slot: a,
                    expected,
                    found: comp.degree(),
                });
            }
        }
        Ok(VectorField {
            cs,
            degree,
            components,
        })
    }

    /// The zero field of a given degree.
    pub fn zero(cs: Arc<CoordinateSystem>, degree: i64) -> VectorField {
        let components = cs
            .coords()
            .map(|c| {
                GradedFunction::zero(cs.clone(), degree + cs.coord_degree(c), Truncation::Exact)
            })
            .collect();
        VectorField {
            cs,
            degree,
            components,
        }
    }

    /// The Euler field `Σ_μ |ξ_μ| ξ_μ ∂/∂ξ_μ`: degree 0, zero on the even
    /// directions, grading operator on functions.
    pub fn euler(cs: &Arc<CoordinateSystem>) -> VectorField {
        let mut components = Vec::with_capacity(cs.coord_count());
        for c in cs.coords() {
            match c {
                Coord::Even(_) => {
                    components.push(GradedFunction::zero(cs.clone(), 0, Truncation::Exact))
                }
                Coord::Graded(mu) => {
                    let d = cs.graded_degree(mu);
                    let coord = GradedFunction::coordinate(cs.clone(), c);
                    components.push(coord.scale(&Rat::from(num::BigInt::from(d))));
                }
            }
        }
        VectorField {
            cs: cs.clone(),
            degree: 0,
            components,
        }
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

    pub fn components(&self) -> &[GradedFunction] {
        &self.components
    }

    pub fn component(&self, a: usize) -> &GradedFunction {
        &self.components[a]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    /// Common truncation of the components.
    pub fn trunc(&self) -> Truncation {
        self.components
            .iter()
            .map(|c| c.trunc())
            .min()
            .unwrap_or(Truncation::Exact)
    }

    /// Apply the field as a derivation: `X(f) = Σ_A X^A · ∂f/∂𝕫^A`, with the
    /// component as the left factor. Degree `|X| + |f|`.
    pub fn apply(&self, f: &GradedFunction) -> Result<GradedFunction, FieldError> {
        if f.cs() != self.cs.as_ref() {
            return Err(FieldError::CoordinateMismatch);
        }
        let mut acc = GradedFunction::zero(
            self.cs.clone(),
            self.degree + f.degree(),
            self.trunc().min(f.trunc()),
        );
        for (a, comp) in self.components.iter().enumerate() {
            if comp.is_zero() {
                continue;
            }
            let term = comp.mul(&f.partial(self.cs.coord(a)))?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Graded commutator `[X,Y](f) = X(Y(f)) − (−1)^{|X||Y|} Y(X(f))`,
    /// assembled from its action on the coordinate functions.
    pub fn bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, FieldError> {
        if x.cs != y.cs {
            return Err(FieldError::CoordinateMismatch);
        }
        let sign_negative = (x.degree % 2 != 0) && (y.degree % 2 != 0);
        let mut components = Vec::with_capacity(x.cs.coord_count());
        for a in 0..x.cs.coord_count() {
            // Y(𝕫^a) is the a-th component of Y.
            let first = x.apply(&y.components[a])?;
            let second = y.apply(&x.components[a])?;
            components.push(if sign_negative {
                first.add(&second)?
            } else {
                first.sub(&second)?
            });
        }
        VectorField::new(x.cs.clone(), x.degree + y.degree, components)
    }

    /// Evaluate all components at a base point.
    pub fn value_at(&self, m: &BasePoint) -> Result<TangentVector, FieldError> {
        let mut components = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            components.push(comp.value_at(m)?);
        }
        Ok(TangentVector {
            point: m.clone(),
            degree: self.degree,
            components,
        })
    }

    /// JSON form: {"degree", "components"}.
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "components": self.components.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(cs: Arc<CoordinateSystem>, value: &Value) -> Result<VectorField, FieldError> {
        let obj = value.as_object().ok_or(FieldError::BadJson("vector field"))?;
        let degree = obj
            .get("degree")
            .and_then(|v| v.as_i64())
            .ok_or(FieldError::BadJson("vector field degree"))?;
        let components = obj
            .get("components")
            .and_then(|v| v.as_array())
            .ok_or(FieldError::BadJson("vector field components"))?
            .iter()
            .map(|v| GradedFunction::from_json(cs.clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(cs, degree, components)
    }
}

/// Whether `X` (on the source of `φ`) and `Y` (on the target) satisfy
/// `X(φ*(f)) = φ*(Y(f))` for every target coordinate function. Agreement on
/// the coordinate generators extends to the whole coefficient class, since
/// both sides are derivations composed with an algebra morphism.
pub fn related_check(
    x: &VectorField,
    y: &VectorField,
    phi: &DomainMorphism,
) -> Result<bool, FieldError> {
    if x.cs.as_ref() != phi.source().as_ref() || y.cs.as_ref() != phi.target().as_ref() {
        return Err(FieldError::CoordinateMismatch);
    }
    if x.degree != y.degree {
        return Err(FieldError::DegreeMismatch {
            left: x.degree,
            right: y.degree,
        });
    }
    for a in 0..y.cs.coord_count() {
        let lhs = x.apply(&phi.pullback_coordinate(y.cs.coord(a)))?;
        let rhs = phi.pullback(&y.components[a])?;
        let agree = match lhs.trunc().min(rhs.trunc()) {
            Truncation::Weight(w) => lhs.eq_up_to_weight(&rhs, w),
            Truncation::Exact => lhs == rhs,
        };
        if !agree {
            return Ok(false);
        }
    }
    Ok(true)
}
