//! Exact rational functions: quotients of sparse multivariate polynomials
//! over the rationals, kept in a canonical reduced form so that structural
//! equality decides mathematical equality. These are the coefficients that
//! graded series are built from; the variables are the even coordinates of
//! a domain.
//!
//! Canonical form: numerator and denominator share no polynomial factor,
//! the denominator has coprime integer coefficients and a positive leading
//! coefficient (lexicographic order), and zero is stored as 0/1.

pub mod poly;

use num::{BigInt, One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

pub use poly::{poly_gcd, Polynomial, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoeffError {
    #[error("division by the zero polynomial")]
    ZeroDenominator,
    #[error("the zero function has no reciprocal")]
    ZeroInverse,
    #[error("denominator vanishes identically under the substitution")]
    CompositionPole,
    #[error("denominator vanishes at the evaluation point")]
    EvalPole,
    #[error("expected {expected} variables, found {found}")]
    VariableCount { expected: usize, found: usize },
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
    #[error("not a rational number: `{0}`")]
    BadRational(String),
}

/// Rational function in canonical reduced form. Construct through
/// [`BaseCoefficient::new`] (or the convenience constructors), never by
/// assembling the parts directly, so equality stays structural.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseCoefficient {
    num: Polynomial,
    den: Polynomial,
}

impl BaseCoefficient {
    /// Reduce `num/den` to canonical form.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<BaseCoefficient, CoeffError> {
        if den.is_zero() {
            return Err(CoeffError::ZeroDenominator);
        }
        debug_assert_eq!(num.nvars(), den.nvars());
        if num.is_zero() {
            return Ok(BaseCoefficient {
                num,
                den: Polynomial::one(den.nvars()),
            });
        }
        let g = poly_gcd(&num, &den);
        let mut num = num.exact_div(&g).expect("gcd divides");
        let mut den = den.exact_div(&g).expect("gcd divides");
        // Normalize the denominator: integer-primitive with positive leading
        // coefficient, moving the factor into the numerator.
        let mut c = den.content();
        if den.leading_coeff_is_negative() {
            c = -c;
        }
        den = den.scale(&c.recip());
        num = num.scale(&c.recip());
        Ok(BaseCoefficient { num, den })
    }

    pub fn from_poly(num: Polynomial) -> BaseCoefficient {
        let den = Polynomial::one(num.nvars());
        BaseCoefficient { num, den }
    }

    pub fn zero(nvars: usize) -> BaseCoefficient {
        BaseCoefficient::from_poly(Polynomial::zero(nvars))
    }

    pub fn one(nvars: usize) -> BaseCoefficient {
        BaseCoefficient::from_poly(Polynomial::one(nvars))
    }

    pub fn constant(nvars: usize, value: Rat) -> BaseCoefficient {
        BaseCoefficient::from_poly(Polynomial::constant(nvars, value))
    }

    pub fn variable(nvars: usize, v: usize) -> BaseCoefficient {
        BaseCoefficient::from_poly(Polynomial::variable(nvars, v))
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Some(value) when the function is a rational constant.
    pub fn constant_value(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.constant_value()
        } else {
            None
        }
    }

    /// True when the denominator is 1, i.e. the function is polynomial.
    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn add(&self, other: &BaseCoefficient) -> BaseCoefficient {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        BaseCoefficient::new(num, den).expect("denominator product is nonzero")
    }

    pub fn neg(&self) -> BaseCoefficient {
        BaseCoefficient {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &BaseCoefficient) -> BaseCoefficient {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &BaseCoefficient) -> BaseCoefficient {
        let num = self.num.mul(&other.num);
        let den = self.den.mul(&other.den);
        BaseCoefficient::new(num, den).expect("denominator product is nonzero")
    }

    pub fn scale(&self, factor: &Rat) -> BaseCoefficient {
        BaseCoefficient::new(self.num.scale(factor), self.den.clone())
            .expect("denominator unchanged")
    }

    pub fn invert(&self) -> Result<BaseCoefficient, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::ZeroInverse);
        }
        BaseCoefficient::new(self.den.clone(), self.num.clone())
    }

    pub fn pow(&self, n: u32) -> BaseCoefficient {
        let mut out = BaseCoefficient::one(self.nvars());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Quotient rule: d(n/d) = (n'·d − n·d')/d².
    pub fn partial(&self, v: usize) -> BaseCoefficient {
        let num = self
            .num
            .partial(v)
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.partial(v)));
        let den = self.den.mul(&self.den);
        BaseCoefficient::new(num, den).expect("denominator square is nonzero")
    }

    pub fn eval(&self, point: &[Rat]) -> Result<Rat, CoeffError> {
        if point.len() != self.nvars() {
            return Err(CoeffError::VariableCount {
                expected: self.nvars(),
                found: point.len(),
            });
        }
        let d = self.den.eval(point);
        if d.is_zero() {
            return Err(CoeffError::EvalPole);
        }
        Ok(self.num.eval(point) / d)
    }

    pub fn eval_at(&self, point: &BasePoint) -> Result<Rat, CoeffError> {
        self.eval(&point.0)
    }

    /// Substitute `args[v]` for variable `v`. All arguments must live over
    /// the same variable set; the result does too.
    pub fn compose(&self, args: &[BaseCoefficient]) -> Result<BaseCoefficient, CoeffError> {
        if args.len() != self.nvars() {
            return Err(CoeffError::VariableCount {
                expected: self.nvars(),
                found: args.len(),
            });
        }
        let out_nvars = args
            .first()
            .map(|a| a.nvars())
            .unwrap_or(0);
        let num = compose_poly(&self.num, args, out_nvars);
        let den = compose_poly(&self.den, args, out_nvars);
        let den_inv = den.invert().map_err(|_| CoeffError::CompositionPole)?;
        Ok(num.mul(&den_inv))
    }

    /// Split into the Taylor polynomial of total order `q` around `a` and
    /// the remainder: `self = T + R` with every partial of `R` up to order
    /// `q` vanishing at `a`. Fails when `a` is a pole.
    pub fn taylor(
        &self,
        a: &BasePoint,
        q: u32,
    ) -> Result<(BaseCoefficient, BaseCoefficient), CoeffError> {
        if a.0.len() != self.nvars() {
            return Err(CoeffError::VariableCount {
                expected: self.nvars(),
                found: a.0.len(),
            });
        }
        if self.den.eval(&a.0).is_zero() {
            return Err(CoeffError::EvalPole);
        }
        let nvars = self.nvars();
        // Shifted monomials (x_v − a_v), reused across terms.
        let shifted: Vec<Polynomial> = (0..nvars)
            .map(|v| {
                Polynomial::variable(nvars, v)
                    .sub(&Polynomial::constant(nvars, a.0[v].clone()))
            })
            .collect();
        let mut t = Polynomial::zero(nvars);
        let mut alpha = vec![0u32; nvars];
        taylor_rec(self, 0, q, &mut alpha, a, &shifted, &mut t)?;
        let t = BaseCoefficient::from_poly(t);
        let r = self.sub(&t);
        Ok((t, r))
    }

    pub fn render(&self, names: &[&str]) -> String {
        if self.num.is_zero() {
            return "0".to_string();
        }
        if self.den.is_one() {
            return render_poly(&self.num, names);
        }
        let num_str = if self.num.num_terms() > 1 {
            format!("({})", render_poly(&self.num, names))
        } else {
            render_poly(&self.num, names)
        };
        let den_str = match self.den.constant_value() {
            Some(c) if !c.is_negative() && c.denom().is_one() => format!("{}", c),
            _ => format!("({})", render_poly(&self.den, names)),
        };
        format!("{}/{}", num_str, den_str)
    }

    /// JSON form: {"num": [[coeff, [exps]], ...], "den": ...}, terms in
    /// descending lexicographic order.
    pub fn to_json(&self) -> Value {
        json!({
            "num": poly_to_json(&self.num),
            "den": poly_to_json(&self.den),
        })
    }

    pub fn from_json(nvars: usize, value: &Value) -> Result<BaseCoefficient, CoeffError> {
        let obj = value
            .as_object()
            .ok_or(CoeffError::BadJson("coefficient"))?;
        let num = poly_from_json(
            nvars,
            obj.get("num").ok_or(CoeffError::BadJson("coefficient.num"))?,
        )?;
        let den = match obj.get("den") {
            Some(v) => poly_from_json(nvars, v)?,
            None => Polynomial::one(nvars),
        };
        BaseCoefficient::new(num, den)
    }
}

fn compose_poly(p: &Polynomial, args: &[BaseCoefficient], out_nvars: usize) -> BaseCoefficient {
    // Memoized powers of each argument, filled on demand.
    let mut powers: Vec<Vec<BaseCoefficient>> = args
        .iter()
        .map(|a| vec![BaseCoefficient::one(a.nvars()), a.clone()])
        .collect();
    let mut acc = BaseCoefficient::zero(out_nvars);
    for (exps, c) in p.terms() {
        let mut term = BaseCoefficient::constant(out_nvars, c.clone());
        for (v, &e) in exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            while powers[v].len() <= e as usize {
                let next = powers[v].last().unwrap().mul(&args[v]);
                powers[v].push(next);
            }
            term = term.mul(&powers[v][e as usize]);
        }
        acc = acc.add(&term);
    }
    acc
}

fn taylor_rec(
    f: &BaseCoefficient,
    v: usize,
    budget: u32,
    alpha: &mut Vec<u32>,
    a: &BasePoint,
    shifted: &[Polynomial],
    out: &mut Polynomial,
) -> Result<(), CoeffError> {
    if v == f.nvars() {
        let value = f.eval(&a.0)?;
        if value.is_zero() {
            return Ok(());
        }
        let mut factorial = BigInt::one();
        for &e in alpha.iter() {
            for k in 2..=e {
                factorial *= BigInt::from(k);
            }
        }
        let mut mono = Polynomial::constant(shifted.len(), value / Rat::from_integer(factorial));
        for (i, &e) in alpha.iter().enumerate() {
            mono = mono.mul(&shifted[i].pow(e));
        }
        *out = out.add(&mono);
        return Ok(());
    }
    let mut g = f.clone();
    for e in 0..=budget {
        alpha[v] = e;
        taylor_rec(&g, v + 1, budget - e, alpha, a, shifted, out)?;
        if e < budget {
            if g.is_zero() {
                break;
            }
            g = g.partial(v);
        }
    }
    alpha[v] = 0;
    Ok(())
}

/// Point of the even base: one rational per even coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasePoint(pub Vec<Rat>);

impl BasePoint {
    pub fn origin(nvars: usize) -> BasePoint {
        BasePoint(vec![Rat::zero(); nvars])
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.0
                .iter()
                .map(|r| Value::String(rational_string(r)))
                .collect(),
        )
    }

    pub fn from_json(value: &Value) -> Result<BasePoint, CoeffError> {
        let arr = value.as_array().ok_or(CoeffError::BadJson("point"))?;
        let mut coords = Vec::with_capacity(arr.len());
        for v in arr {
            let s = v.as_str().ok_or(CoeffError::BadJson("point entry"))?;
            coords.push(parse_rational(s)?);
        }
        Ok(BasePoint(coords))
    }
}

impl std::fmt::Display for BasePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", rational_string(r))?;
        }
        write!(f, ")")
    }
}

/// "p/q", or just "p" for integers.
pub fn rational_string(r: &Rat) -> String {
    format!("{}", r)
}

pub fn parse_rational(s: &str) -> Result<Rat, CoeffError> {
    s.trim()
        .parse::<Rat>()
        .map_err(|_| CoeffError::BadRational(s.to_string()))
}

/// Canonical polynomial rendering: terms in descending lexicographic order,
/// "+"/"-" joined, coefficients 1 and −1 elided next to a monomial.
pub fn render_poly(p: &Polynomial, names: &[&str]) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    let terms: Vec<_> = p.terms().collect();
    for (i, (exps, coeff)) in terms.iter().rev().enumerate() {
        let negative = coeff.is_negative();
        let mag = coeff.abs();
        let mono = monomial_string(exps, names);
        if i == 0 {
            if negative {
                out.push('-');
            }
        } else if negative {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if mono.is_empty() {
            out.push_str(&rational_string(&mag));
        } else if mag.is_one() {
            out.push_str(&mono);
        } else {
            out.push_str(&format!("{}*{}", rational_string(&mag), mono));
        }
    }
    out
}

fn monomial_string(exps: &[u32], names: &[&str]) -> String {
    let mut parts = Vec::new();
    for (v, &e) in exps.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(names[v].to_string()),
            _ => parts.push(format!("{}^{}", names[v], e)),
        }
    }
    parts.join("*")
}

pub fn poly_to_json(p: &Polynomial) -> Value {
    Value::Array(
        p.terms()
            .rev()
            .map(|(exps, c)| {
                json!([
                    rational_string(c),
                    exps.iter().map(|&e| Value::from(e)).collect::<Vec<_>>()
                ])
            })
            .collect(),
    )
}

pub fn poly_from_json(nvars: usize, value: &Value) -> Result<Polynomial, CoeffError> {
    let arr = value.as_array().ok_or(CoeffError::BadJson("polynomial"))?;
    let mut out = Polynomial::zero(nvars);
    for term in arr {
        let pair = term
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or(CoeffError::BadJson("polynomial term"))?;
        let coeff = parse_rational(
            pair[0]
                .as_str()
                .ok_or(CoeffError::BadJson("polynomial coefficient"))?,
        )?;
        let exps_arr = pair[1]
            .as_array()
            .ok_or(CoeffError::BadJson("polynomial exponents"))?;
        if exps_arr.len() != nvars {
            return Err(CoeffError::BadJson("polynomial exponent length"));
        }
        let mut exps = Vec::with_capacity(nvars);
        for e in exps_arr {
            let e = e
                .as_u64()
                .filter(|&e| e <= u32::MAX as u64)
                .ok_or(CoeffError::BadJson("polynomial exponent"))?;
            exps.push(e as u32);
        }
        out = out.add(&Polynomial::monomial(nvars, exps, coeff));
    }
    Ok(out)
}
