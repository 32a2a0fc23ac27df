use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// `constant + sum(coef * var)`. Normalized expressions have sorted, unique,
/// nonzero terms; all constructors and arithmetic here normalize.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn from_terms(terms: &[(VarId, f64)], constant: f64) -> Self {
        let mut e = Self { terms: terms.to_vec(), constant };
        e.normalize();
        e
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sort by variable, merge duplicates, drop zero coefficients.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// `self + k * other`.
    pub fn add_scaled(&self, other: &LinExpr, k: f64) -> LinExpr {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = j >= other.terms.len() || (i < self.terms.len() && self.terms[i].0 < other.terms[j].0);
            let take_right = i >= self.terms.len() || (j < other.terms.len() && other.terms[j].0 < self.terms[i].0);
            if take_left {
                terms.push(self.terms[i]);
                i += 1;
            } else if take_right {
                let (v, c) = other.terms[j];
                if k * c != 0.0 {
                    terms.push((v, k * c));
                }
                j += 1;
            } else {
                let c = self.terms[i].1 + k * other.terms[j].1;
                if c != 0.0 {
                    terms.push((self.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        LinExpr { terms, constant: self.constant + k * other.constant }
    }

    pub fn scaled(&self, k: f64) -> LinExpr {
        if k == 0.0 {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * k)).filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant * k,
        }
    }

    /// `sum(w_k * exprs[k]) + bias`, accumulated densely. `scratch` must be
    /// all zeros with room for every variable id; it is left zeroed.
    pub fn weighted_sum(weights: &[(usize, f64)], exprs: &[LinExpr], bias: f64, scratch: &mut Vec<f64>) -> LinExpr {
        let mut touched: Vec<usize> = Vec::new();
        let mut constant = bias;
        for &(k, w) in weights {
            let e = &exprs[k];
            constant += w * e.constant;
            for &(v, c) in &e.terms {
                if v.0 >= scratch.len() {
                    scratch.resize(v.0 + 1, 0.0);
                }
                if scratch[v.0] == 0.0 {
                    touched.push(v.0);
                }
                scratch[v.0] += w * c;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let mut terms = Vec::with_capacity(touched.len());
        for idx in touched {
            let c = scratch[idx];
            scratch[idx] = 0.0;
            if c != 0.0 {
                terms.push((VarId(idx), c));
            }
        }
        LinExpr { terms, constant }
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, -1.0)
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        self.scaled(k)
    }
}

impl Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}
