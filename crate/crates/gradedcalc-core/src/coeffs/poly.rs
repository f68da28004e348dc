//! Sparse multivariate polynomials over exact rationals. Provides the exact
//! division and primitive-PRS GCD that keep rational functions in canonical
//! reduced form, plus evaluation, differentiation, and Taylor expansion
//! support for the coefficient layer.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Integer, One, Signed, Zero};

pub type Rat = BigRational;

/// Sparse polynomial: exponent vector (length `nvars`) -> nonzero rational
/// coefficient. The `BTreeMap` keeps terms in ascending lexicographic order;
/// canonical printing walks them in reverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Polynomial {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, value: Rat) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !value.is_zero() {
            terms.insert(vec![0; nvars], value);
        }
        Polynomial { nvars, terms }
    }

    pub fn one(nvars: usize) -> Polynomial {
        Polynomial::constant(nvars, Rat::one())
    }

    pub fn variable(nvars: usize, v: usize) -> Polynomial {
        assert!(v < nvars, "variable index out of range");
        let mut exps = vec![0; nvars];
        exps[v] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(exps, Rat::one());
        Polynomial { nvars, terms }
    }

    pub fn monomial(nvars: usize, exps: Vec<u32>, coeff: Rat) -> Polynomial {
        assert_eq!(exps.len(), nvars);
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(exps, coeff);
        }
        Polynomial { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value()
            .map(|c| c.is_one())
            .unwrap_or(false)
    }

    /// Some(value) when the polynomial is a constant (including zero).
    pub fn constant_value(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (exps, c) = self.terms.iter().next().unwrap();
                if exps.iter().all(|&e| e == 0) {
                    Some(c.clone())
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }

    /// Sign of the lexicographically leading coefficient.
    pub fn leading_coeff_is_negative(&self) -> bool {
        self.leading().map(|(_, c)| c.is_negative()).unwrap_or(false)
    }

    fn insert_term(&mut self, exps: Vec<u32>, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    e.insert(sum);
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (exps, c) in &other.terms {
            out.insert_term(exps.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), -c.clone()))
            .collect();
        Polynomial {
            nvars: self.nvars,
            terms,
        }
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert_term(exps, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn scale(&self, factor: &Rat) -> Polynomial {
        if factor.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.clone() * factor.clone()))
            .collect();
        Polynomial {
            nvars: self.nvars,
            terms,
        }
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        let mut out = Polynomial::one(self.nvars);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, point: &[Rat]) -> Rat {
        debug_assert_eq!(point.len(), self.nvars);
        let mut acc = Rat::zero();
        for (exps, c) in &self.terms {
            let mut term = c.clone();
            for (v, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    term *= point[v].clone();
                }
            }
            acc += term;
        }
        acc
    }

    pub fn partial(&self, v: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (exps, c) in &self.terms {
            if exps[v] == 0 {
                continue;
            }
            let mut e = exps.clone();
            e[v] -= 1;
            out.insert_term(e, c.clone() * Rat::from_integer(BigInt::from(exps[v])));
        }
        out
    }

    /// Highest total degree among the terms (zero polynomial -> 0).
    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|e| e[v]).max().unwrap_or(0)
    }

    /// Reinterpret over a larger variable set: variable `i` becomes
    /// `var_map[i]`. Used to inject coefficients into product systems.
    pub fn map_vars(&self, new_nvars: usize, var_map: &[usize]) -> Polynomial {
        debug_assert_eq!(var_map.len(), self.nvars);
        let mut out = Polynomial::zero(new_nvars);
        for (exps, c) in &self.terms {
            let mut e = vec![0u32; new_nvars];
            for (v, &old) in exps.iter().enumerate() {
                e[var_map[v]] = old;
            }
            out.insert_term(e, c.clone());
        }
        out
    }

    /// Leading term under lexicographic order.
    fn leading(&self) -> Option<(&Vec<u32>, &Rat)> {
        self.terms.iter().next_back()
    }

    /// Exact division: Some(q) with `self = q * divisor`, None when the
    /// division leaves a remainder.
    pub fn exact_div(&self, divisor: &Polynomial) -> Option<Polynomial> {
        if divisor.is_zero() {
            return None;
        }
        let mut rem = self.clone();
        let mut quot = Polynomial::zero(self.nvars);
        let (dexp, dcoeff) = {
            let (e, c) = divisor.leading().unwrap();
            (e.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (rexp, rcoeff) = {
                let (e, c) = rem.leading().unwrap();
                (e.clone(), c.clone())
            };
            if rexp.iter().zip(&dexp).any(|(r, d)| r < d) {
                return None;
            }
            let exps: Vec<u32> = rexp.iter().zip(&dexp).map(|(r, d)| r - d).collect();
            let coeff = rcoeff / dcoeff.clone();
            let mono = Polynomial::monomial(self.nvars, exps, coeff);
            rem = rem.sub(&mono.mul(divisor));
            quot = quot.add(&mono);
        }
        Some(quot)
    }

    /// Positive rational `c` such that `self / c` has coprime integer
    /// coefficients: gcd of numerators over lcm of denominators.
    pub fn content(&self) -> Rat {
        if self.is_zero() {
            return Rat::zero();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
            den_lcm = den_lcm.lcm(c.denom());
        }
        Rat::new(num_gcd, den_lcm)
    }

    /// `self / content()`: coprime integer coefficients, sign preserved.
    pub fn primitive_integer(&self) -> Polynomial {
        if self.is_zero() {
            return self.clone();
        }
        let c = self.content();
        self.scale(&c.recip())
    }

    /// View as univariate in `v`: v-exponent -> coefficient polynomial with
    /// the v-slot zeroed.
    fn univariate_in(&self, v: usize) -> BTreeMap<u32, Polynomial> {
        let mut out: BTreeMap<u32, Polynomial> = BTreeMap::new();
        for (exps, c) in &self.terms {
            let d = exps[v];
            let mut e = exps.clone();
            e[v] = 0;
            out.entry(d)
                .or_insert_with(|| Polynomial::zero(self.nvars))
                .insert_term(e, c.clone());
        }
        out
    }

    fn leading_coeff_in(&self, v: usize) -> Polynomial {
        let d = self.degree_in(v);
        let mut out = Polynomial::zero(self.nvars);
        for (exps, c) in &self.terms {
            if exps[v] == d {
                let mut e = exps.clone();
                e[v] = 0;
                out.insert_term(e, c.clone());
            }
        }
        out
    }

    fn shift_var(&self, v: usize, by: u32) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e = e.clone();
                e[v] += by;
                (e, c.clone())
            })
            .collect();
        Polynomial {
            nvars: self.nvars,
            terms,
        }
    }
}

/// Polynomial GCD (primitive pseudo-remainder sequence). The result is an
/// integer-primitive polynomial with positive lexicographic leading
/// coefficient; gcd(0, 0) = 0, gcd of nonzero constants is 1.
pub fn poly_gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    debug_assert_eq!(a.nvars(), b.nvars());
    let normalize = |p: &Polynomial| {
        let mut q = p.primitive_integer();
        if q.leading_coeff_is_negative() {
            q = q.neg();
        }
        q
    };
    if a.is_zero() {
        return normalize(b);
    }
    if b.is_zero() {
        return normalize(a);
    }
    let g = gcd_primitive(&a.primitive_integer(), &b.primitive_integer());
    normalize(&g)
}

/// Highest variable index used by either polynomial.
fn main_var(a: &Polynomial, b: &Polynomial) -> Option<usize> {
    let mut best: Option<usize> = None;
    for p in [a, b] {
        for exps in p.terms.keys() {
            for (v, &e) in exps.iter().enumerate() {
                if e > 0 && best.map(|m| v > m).unwrap_or(true) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

fn gcd_primitive(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let v = match main_var(a, b) {
        None => return Polynomial::one(a.nvars()),
        Some(v) => v,
    };
    // Content/primitive split with respect to the main variable.
    let cont = |p: &Polynomial| -> Polynomial {
        let mut acc = Polynomial::zero(p.nvars());
        for coeff in p.univariate_in(v).values() {
            acc = poly_gcd(&acc, coeff);
        }
        acc
    };
    let cont_a = cont(a);
    let cont_b = cont(b);
    let c = poly_gcd(&cont_a, &cont_b);
    let pp = |p: &Polynomial, cp: &Polynomial| p.exact_div(cp).expect("content divides");
    let (mut f, mut g) = if a.degree_in(v) >= b.degree_in(v) {
        (pp(a, &cont_a), pp(b, &cont_b))
    } else {
        (pp(b, &cont_b), pp(a, &cont_a))
    };
    // Primitive PRS: pseudo-remainder, then strip all content in v.
    loop {
        let r = pseudo_rem(&f, &g, v);
        if r.is_zero() {
            break;
        }
        let rc = cont(&r);
        f = g;
        g = r.exact_div(&rc).expect("content divides").primitive_integer();
    }
    c.mul(&g)
}

/// Pseudo-remainder of `f` by `g` with respect to variable `v`: repeatedly
/// scales by the leading v-coefficient of `g` so the division needs no
/// fractions. Only valid up to factors, which the primitive PRS strips.
fn pseudo_rem(f: &Polynomial, g: &Polynomial, v: usize) -> Polynomial {
    let dg = g.degree_in(v);
    let lcg = g.leading_coeff_in(v);
    let mut r = f.clone();
    while !r.is_zero() && r.degree_in(v) >= dg {
        let dr = r.degree_in(v);
        let lcr = r.leading_coeff_in(v);
        r = lcg.mul(&r).sub(&lcr.mul(&g.shift_var(v, dr - dg)));
        debug_assert!(r.is_zero() || r.degree_in(v) < dr);
    }
    r
}
