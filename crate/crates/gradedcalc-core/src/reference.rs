//! Deliberately naive reference implementations used to cross-validate the
//! production code paths in tests. Each function here takes the slowest,
//! most literal route available — letter-by-letter word reordering, brute
//! force enumeration, term-by-term expansion — and shares no logic with the
//! optimized implementations it checks.

use crate::coeffs::BaseCoefficient;
use crate::grading::{CoordinateSystem, MultiIndex};
use crate::series::{GradedFunction, SeriesError, Truncation};

/// Koszul sign computed by writing `ξ^p ξ^q` as a word of single coordinate
/// letters and bubble-sorting it into canonical order, one adjacent
/// transposition at a time. Each swap of letters with degrees `a`, `b`
/// contributes `(−1)^{ab}`; two adjacent equal letters of odd degree kill
/// the word.
pub fn epsilon_by_word_reordering(p: &MultiIndex, q: &MultiIndex, cs: &CoordinateSystem) -> i8 {
    let mut word: Vec<usize> = Vec::new();
    for (mu, &e) in p.exps().iter().enumerate() {
        word.extend(std::iter::repeat(mu).take(e as usize));
    }
    for (mu, &e) in q.exps().iter().enumerate() {
        word.extend(std::iter::repeat(mu).take(e as usize));
    }
    let mut sign: i8 = 1;
    let n = word.len();
    for i in 0..n {
        for j in (i + 1..n).rev() {
            if word[j - 1] > word[j] {
                let a = cs.graded_degree(word[j - 1]);
                let b = cs.graded_degree(word[j]);
                if (a % 2 != 0) && (b % 2 != 0) {
                    sign = -sign;
                }
                word.swap(j - 1, j);
            }
        }
    }
    for k in 1..n {
        if word[k - 1] == word[k] && cs.graded_degree(word[k]) % 2 != 0 {
            return 0;
        }
    }
    sign
}

/// Multi-index enumeration by filtering a plain odometer over all exponent
/// vectors within the weight bound.
pub fn enumerate_by_filter(cs: &CoordinateSystem, k: i64, max_weight: u32) -> Vec<MultiIndex> {
    let n = cs.n_graded();
    let mut out = Vec::new();
    let mut exps = vec![0u32; n];
    loop {
        let weight: u64 = exps.iter().map(|&e| e as u64).sum();
        if weight <= max_weight as u64 {
            if let Ok(idx) = MultiIndex::new(exps.clone(), cs) {
                if idx.degree(cs) == k {
                    out.push(idx);
                }
            }
        }
        // Odometer step over 0..=max_weight per position.
        let mut pos = 0;
        loop {
            if pos == n {
                out.sort();
                return out;
            }
            if exps[pos] < max_weight {
                exps[pos] += 1;
                break;
            }
            exps[pos] = 0;
            pos += 1;
        }
    }
}

/// Series product expanded pairwise with the word-reordering sign oracle
/// instead of the closed-form sign. Used to differential-test `series_mul`.
pub fn mul_by_words(f: &GradedFunction, g: &GradedFunction) -> Result<GradedFunction, SeriesError> {
    let cs = f.cs_arc().clone();
    let trunc = f.trunc().min(g.trunc());
    let degree = f.degree() + g.degree();
    let mut terms: Vec<(MultiIndex, BaseCoefficient)> = Vec::new();
    for (p, cp) in f.terms() {
        for (q, cq) in g.terms() {
            if let Truncation::Weight(w) = trunc {
                if p.weight() + q.weight() > w as u64 {
                    continue;
                }
            }
            let sign = epsilon_by_word_reordering(p, q, &cs);
            if sign == 0 {
                continue;
            }
            let idx = MultiIndex::sum(p, q, &cs)?;
            let mut c = cp.mul(cq);
            if sign < 0 {
                c = c.neg();
            }
            terms.push((idx, c));
        }
    }
    GradedFunction::from_term_list(cs, degree, trunc, terms)
}
