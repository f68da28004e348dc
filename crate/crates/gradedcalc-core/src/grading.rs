//! Coordinate systems, graded dimensions, multi-indices, and the Koszul sign
//! engine. Every product of graded monomials in the crate routes through
//! [`epsilon`], so the reordering sign convention lives here and nowhere else.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

/// Largest accepted magnitude for a coordinate degree. Bounding degrees and
/// exponents at construction keeps all later degree/weight arithmetic inside
/// `i64`/`i128` without per-operation overflow checks.
pub const MAX_DEGREE_MAGNITUDE: i64 = 1 << 20;
/// Largest accepted exponent in a multi-index.
pub const MAX_EXPONENT: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradingError {
    #[error("coordinate `{0}` declared more than once")]
    DuplicateName(String),
    #[error("graded coordinate `{0}` must have nonzero degree")]
    ZeroDegree(String),
    #[error("degree {0} exceeds the supported magnitude")]
    DegreeTooLarge(i64),
    #[error("`{0}` is not a valid identifier")]
    BadIdentifier(String),
    #[error("multi-index has {found} entries but the system has {expected} graded coordinates")]
    IndexLength { expected: usize, found: usize },
    #[error("exponent {exp} on odd-degree coordinate `{name}` (odd coordinates square to zero)")]
    OddExponent { name: String, exp: u32 },
    #[error("exponent {0} exceeds the supported magnitude")]
    ExponentTooLarge(u32),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("malformed JSON for {0}")]
    BadJson(&'static str),
}

/// Count of coordinates per integer degree. Degree 0 counts the even
/// coordinates; entries with count zero are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedDimension {
    counts: BTreeMap<i64, usize>,
}

impl GradedDimension {
    pub fn from_counts(counts: impl IntoIterator<Item = (i64, usize)>) -> Self {
        let mut map = BTreeMap::new();
        for (degree, count) in counts {
            if count > 0 {
                *map.entry(degree).or_insert(0) += count;
            }
        }
        GradedDimension { counts: map }
    }

    /// Number of coordinates of the given degree.
    pub fn count(&self, degree: i64) -> usize {
        self.counts.get(&degree).copied().unwrap_or(0)
    }

    /// Total number of coordinates across all degrees.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        self.counts.iter().map(|(d, c)| (*d, *c))
    }

    /// Degreewise sum, used for products of domains.
    pub fn sum(&self, other: &GradedDimension) -> GradedDimension {
        let mut counts = self.counts.clone();
        for (d, c) in other.iter() {
            *counts.entry(d).or_insert(0) += c;
        }
        GradedDimension { counts }
    }
}

impl fmt::Display for GradedDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(d, c)| format!("{d}:{c}"))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Reference to a coordinate in the unified view: even coordinates first in
/// declaration order, then graded coordinates in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coord {
    Even(usize),
    Graded(usize),
}

/// An ordered coordinate system for a graded domain: even (degree-0)
/// coordinates plus graded coordinates of nonzero integer degree. The
/// declaration order is part of the data and never changes; monomials,
/// matrices, and printed output all follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSystem {
    even: Vec<String>,
    graded: Vec<(String, i64)>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl CoordinateSystem {
    pub fn new(
        even: Vec<String>,
        graded: Vec<(String, i64)>,
    ) -> Result<CoordinateSystem, GradingError> {
        let mut seen = std::collections::BTreeSet::new();
        for name in even.iter().chain(graded.iter().map(|(n, _)| n)) {
            if !is_identifier(name) {
                return Err(GradingError::BadIdentifier(name.clone()));
            }
            if !seen.insert(name.clone()) {
                return Err(GradingError::DuplicateName(name.clone()));
            }
        }
        for (name, degree) in &graded {
            if *degree == 0 {
                return Err(GradingError::ZeroDegree(name.clone()));
            }
            if degree.abs() > MAX_DEGREE_MAGNITUDE {
                return Err(GradingError::DegreeTooLarge(*degree));
            }
        }
        Ok(CoordinateSystem { even, graded })
    }

    pub fn n_even(&self) -> usize {
        self.even.len()
    }

    pub fn n_graded(&self) -> usize {
        self.graded.len()
    }

    pub fn even_names(&self) -> &[String] {
        &self.even
    }

    pub fn graded_names(&self) -> impl Iterator<Item = &str> {
        self.graded.iter().map(|(n, _)| n.as_str())
    }

    pub fn graded_name(&self, mu: usize) -> &str {
        &self.graded[mu].0
    }

    pub fn graded_degree(&self, mu: usize) -> i64 {
        self.graded[mu].1
    }

    pub fn graded_degrees(&self) -> impl Iterator<Item = i64> + '_ {
        self.graded.iter().map(|(_, d)| *d)
    }

    pub fn even_index(&self, name: &str) -> Option<usize> {
        self.even.iter().position(|n| n == name)
    }

    pub fn graded_index(&self, name: &str) -> Option<usize> {
        self.graded.iter().position(|(n, _)| n == name)
    }

    /// Total number of coordinates in the unified view.
    pub fn coord_count(&self) -> usize {
        self.even.len() + self.graded.len()
    }

    /// Unified position -> coordinate reference.
    pub fn coord(&self, a: usize) -> Coord {
        if a < self.even.len() {
            Coord::Even(a)
        } else {
            Coord::Graded(a - self.even.len())
        }
    }

    /// Coordinate reference -> unified position.
    pub fn coord_position(&self, c: Coord) -> usize {
        match c {
            Coord::Even(i) => i,
            Coord::Graded(mu) => self.even.len() + mu,
        }
    }

    pub fn coord_name(&self, c: Coord) -> &str {
        match c {
            Coord::Even(i) => &self.even[i],
            Coord::Graded(mu) => &self.graded[mu].0,
        }
    }

    pub fn coord_degree(&self, c: Coord) -> i64 {
        match c {
            Coord::Even(_) => 0,
            Coord::Graded(mu) => self.graded[mu].1,
        }
    }

    pub fn coord_by_name(&self, name: &str) -> Option<Coord> {
        if let Some(i) = self.even_index(name) {
            return Some(Coord::Even(i));
        }
        self.graded_index(name).map(Coord::Graded)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.coord_count()).map(|a| self.coord(a))
    }

    pub fn graded_dimension(&self) -> GradedDimension {
        let mut counts: Vec<(i64, usize)> = vec![(0, self.even.len())];
        for (_, d) in &self.graded {
            counts.push((*d, 1));
        }
        GradedDimension::from_counts(counts)
    }

    /// True when every graded coordinate has odd degree; the monomial basis
    /// is then finite, so series over this system are always exact.
    pub fn is_purely_odd(&self) -> bool {
        self.graded.iter().all(|(_, d)| d % 2 != 0)
    }

    pub fn zero_index(&self) -> MultiIndex {
        MultiIndex {
            exps: vec![0; self.graded.len()],
        }
    }

    pub fn unit_index(&self, mu: usize) -> MultiIndex {
        let mut exps = vec![0; self.graded.len()];
        exps[mu] = 1;
        MultiIndex { exps }
    }

    /// Canonical rendering of the monomial `ξ^p`, e.g. `xi1^2*xi2`; the empty
    /// monomial renders as `1`.
    pub fn monomial_string(&self, p: &MultiIndex) -> String {
        let mut parts = Vec::new();
        for (mu, &e) in p.exps.iter().enumerate() {
            if e == 1 {
                parts.push(self.graded[mu].0.clone());
            } else if e > 1 {
                parts.push(format!("{}^{}", self.graded[mu].0, e));
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "even": self.even,
            "graded": self.graded.iter().map(|(n, d)| json!([n, d])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &Value) -> Result<CoordinateSystem, GradingError> {
        let bad = || GradingError::BadJson("coordinate system");
        let obj = value.as_object().ok_or_else(bad)?;
        let even = obj
            .get("even")
            .and_then(|v| v.as_array())
            .ok_or_else(bad)?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()?;
        let graded = obj
            .get("graded")
            .and_then(|v| v.as_array())
            .ok_or_else(bad)?
            .iter()
            .map(|v| {
                let pair = v.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
                let name = pair[0].as_str().ok_or_else(bad)?.to_string();
                let degree = pair[1].as_i64().ok_or_else(bad)?;
                Ok((name, degree))
            })
            .collect::<Result<Vec<_>, GradingError>>()?;
        CoordinateSystem::new(even, graded)
    }
}

/// Exponent vector aligned with a system's graded coordinates. Odd-degree
/// coordinates carry exponent 0 or 1 only. Ordering is weight-major, then
/// lexicographic in the exponents — the canonical term order used everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exps: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>, cs: &CoordinateSystem) -> Result<MultiIndex, GradingError> {
        if exps.len() != cs.n_graded() {
            return Err(GradingError::IndexLength {
                expected: cs.n_graded(),
                found: exps.len(),
            });
        }
        for (mu, &e) in exps.iter().enumerate() {
            if e > MAX_EXPONENT {
                return Err(GradingError::ExponentTooLarge(e));
            }
            if cs.graded_degree(mu) % 2 != 0 && e > 1 {
                return Err(GradingError::OddExponent {
                    name: cs.graded_name(mu).to_string(),
                    exp: e,
                });
            }
        }
        Ok(MultiIndex { exps })
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn exp(&self, mu: usize) -> u32 {
        self.exps[mu]
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Monomial weight w(p): the total number of graded-coordinate factors.
    pub fn weight(&self) -> u64 {
        self.exps.iter().map(|&e| e as u64).sum()
    }

    /// Monomial degree: sum of exponent times coordinate degree.
    pub fn degree(&self, cs: &CoordinateSystem) -> i64 {
        let mut acc: i128 = 0;
        for (mu, &e) in self.exps.iter().enumerate() {
            acc += (e as i128) * (cs.graded_degree(mu) as i128);
        }
        acc as i64
    }

    /// Componentwise sum `p + q`; fails on odd-coordinate collisions (the
    /// caller normally rules these out by checking `epsilon` first).
    pub fn sum(p: &MultiIndex, q: &MultiIndex, cs: &CoordinateSystem) -> Result<MultiIndex, GradingError> {
        let exps: Vec<u32> = p.exps.iter().zip(&q.exps).map(|(a, b)| a + b).collect();
        MultiIndex::new(exps, cs)
    }

    /// Copy with the exponent of coordinate `mu` replaced.
    pub fn with_exp(&self, mu: usize, e: u32) -> MultiIndex {
        let mut exps = self.exps.clone();
        exps[mu] = e;
        MultiIndex { exps }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Koszul sign of the canonical product: `ξ^p · ξ^q = epsilon(p,q) · ξ^{p+q}`.
///
/// Returns 0 exactly when some odd-degree coordinate appears in both factors
/// (its square vanishes). Otherwise the sign is `(-1)^e` with
/// `e = Σ_{μ<ν} q_μ|ξ_μ| · p_ν|ξ_ν|`; only pairs of odd-degree coordinates
/// contribute to the parity of `e`.
pub fn epsilon(p: &MultiIndex, q: &MultiIndex, cs: &CoordinateSystem) -> i8 {
    debug_assert_eq!(p.exps.len(), cs.n_graded());
    debug_assert_eq!(q.exps.len(), cs.n_graded());
    let mut flip = false;
    // Parity of Σ_{ν>μ} p_ν|ξ_ν| restricted to odd-degree coordinates,
    // maintained while scanning μ from the right.
    let mut later_p_odd = false;
    for mu in (0..cs.n_graded()).rev() {
        if cs.graded_degree(mu) % 2 != 0 {
            if p.exps[mu] + q.exps[mu] >= 2 {
                return 0;
            }
            if q.exps[mu] & 1 == 1 && later_p_odd {
                flip = !flip;
            }
            if p.exps[mu] & 1 == 1 {
                later_p_odd = !later_p_odd;
            }
        }
    }
    if flip {
        -1
    } else {
        1
    }
}

/// All multi-indices of exact degree `k` and weight at most `max_weight`,
/// in canonical order (weight-major, then exponent-lexicographic).
pub fn enumerate_indices(cs: &CoordinateSystem, k: i64, max_weight: u32) -> Vec<MultiIndex> {
    let n = cs.n_graded();
    let mut out = Vec::new();
    let mut exps = vec![0u32; n];
    fn rec(
        cs: &CoordinateSystem,
        mu: usize,
        remaining: u32,
        degree: i128,
        k: i64,
        exps: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
    ) {
        if mu == cs.n_graded() {
            if degree == k as i128 {
                out.push(MultiIndex { exps: exps.clone() });
            }
            return;
        }
        let d = cs.graded_degree(mu);
        let cap = if d % 2 != 0 { remaining.min(1) } else { remaining };
        for e in 0..=cap {
            exps[mu] = e;
            rec(
                cs,
                mu + 1,
                remaining - e,
                degree + (e as i128) * (d as i128),
                k,
                exps,
                out,
            );
            exps[mu] = 0;
        }
    }
    rec(cs, 0, max_weight, 0, k, &mut exps, &mut out);
    out.sort();
    out
}

/// All multi-indices of weight at most `max_weight`, any degree, in canonical
/// order. Handy for generators and exhaustive checks.
pub fn enumerate_all_indices(cs: &CoordinateSystem, max_weight: u32) -> Vec<MultiIndex> {
    let n = cs.n_graded();
    let mut out = Vec::new();
    let mut exps = vec![0u32; n];
    fn rec(
        cs: &CoordinateSystem,
        mu: usize,
        remaining: u32,
        exps: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
    ) {
        if mu == cs.n_graded() {
            out.push(MultiIndex { exps: exps.clone() });
            return;
        }
        let d = cs.graded_degree(mu);
        let cap = if d % 2 != 0 { remaining.min(1) } else { remaining };
        for e in 0..=cap {
            exps[mu] = e;
            rec(cs, mu + 1, remaining - e, exps, out);
            exps[mu] = 0;
        }
    }
    rec(cs, 0, max_weight, &mut exps, &mut out);
    out.sort();
    out
}
