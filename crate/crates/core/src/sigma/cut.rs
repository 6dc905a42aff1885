//! Conjugate unscented rules: fully symmetric point families matched to
//! standard-Gaussian moments.
//!
//! A family is the orbit of one generator under all coordinate permutations
//! and sign flips, with a single weight shared by every point in the orbit.
//! Odd moments vanish by construction; even moments reduce to one equation
//! per integer partition `λ` of the half-degree (monomial `Π x_j^{2λ_j}`).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cut_solver::{solve_cut_rule, SolverOptions};
use super::cut_table::CutTable;
use super::{RuleTag, SigmaSet};
use crate::error::{Error, Result};
use crate::kron::binomial;

/// Generator shape of a fully symmetric family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// The origin.
    Center,
    /// `±r e_i`.
    Axis,
    /// `±r e_i ± r e_j`.
    PairEqual,
    /// `±r e_i ± s e_j`, both orderings.
    PairMixed,
    /// `±r e_i ± r e_j ± r e_k`.
    Triple,
    /// `r (±1, …, ±1)`.
    Corner,
}

impl Pattern {
    pub fn radius_count(self) -> usize {
        match self {
            Pattern::Center => 0,
            Pattern::PairMixed => 2,
            _ => 1,
        }
    }

    /// Radius index of each nonzero generator coordinate.
    pub(crate) fn slots(self, n: usize) -> Vec<usize> {
        match self {
            Pattern::Center => vec![],
            Pattern::Axis => vec![0],
            Pattern::PairEqual => vec![0, 0],
            Pattern::PairMixed => vec![0, 1],
            Pattern::Triple => vec![0, 0, 0],
            Pattern::Corner => vec![0; n],
        }
    }

    pub fn fits(self, n: usize) -> bool {
        self.slots(n).len() <= n && !(self == Pattern::Corner && n < 4)
    }

    pub fn point_count(self, n: usize) -> usize {
        let slots = self.slots(n);
        let k = slots.len();
        if k > n {
            return 0;
        }
        let arrangements = factorial(k) / multiplicity_factor(&slots);
        (1usize << k) * binomial(n, k) * arrangements as usize
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn multiplicity_factor(slots: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &s in slots {
        *counts.entry(s).or_default() += 1;
    }
    counts.values().map(|&c| factorial(c)).product()
}

/// Sum over the family's points of `Π_j x_j^{2λ_j}` (weight excluded), with
/// squared radii `q`. Also returns the derivative with respect to each `q`.
pub(crate) fn family_moment(
    pattern: Pattern,
    q: &[f64],
    n: usize,
    lambda: &[u32],
) -> (f64, Vec<f64>) {
    let slots = pattern.slots(n);
    let k = slots.len();
    let m = lambda.len();
    let mut grad = vec![0.0; q.len()];
    if m > k || k > n {
        return (0.0, grad);
    }
    if k == 0 {
        return (1.0, grad);
    }
    let coef = 2f64.powi(k as i32) * binomial(n - m, k - m) as f64 * factorial(k - m)
        / multiplicity_factor(&slots);
    let mut total = 0.0;
    let mut used = vec![false; k];
    let mut seq = Vec::with_capacity(m);
    injective_sequences(k, m, &mut used, &mut seq, &mut |seq: &[usize]| {
        let mut term = 1.0;
        for (j, &s) in seq.iter().enumerate() {
            term *= q[slots[s]].powi(lambda[j] as i32);
        }
        total += term;
        for (p, g) in grad.iter_mut().enumerate() {
            let power: u32 = seq
                .iter()
                .enumerate()
                .filter(|(_, &s)| slots[s] == p)
                .map(|(j, _)| lambda[j])
                .sum();
            if power > 0 {
                *g += term * power as f64 / q[p];
            }
        }
    });
    for g in grad.iter_mut() {
        *g *= coef;
    }
    (total * coef, grad)
}

fn injective_sequences(
    k: usize,
    m: usize,
    used: &mut [bool],
    seq: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if seq.len() == m {
        visit(seq);
        return;
    }
    for s in 0..k {
        if !used[s] {
            used[s] = true;
            seq.push(s);
            injective_sequences(k, m, used, seq, visit);
            seq.pop();
            used[s] = false;
        }
    }
}

/// Partitions of `d` into at most `max_parts` positive parts, non-increasing.
pub(crate) fn partitions(d: u32, max_parts: usize) -> Vec<Vec<u32>> {
    fn rec(rem: u32, max_part: u32, parts_left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        if parts_left == 0 {
            return;
        }
        for p in (1..=rem.min(max_part)).rev() {
            cur.push(p);
            rec(rem - p, p, parts_left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, d, max_parts, &mut Vec::new(), &mut out);
    out
}

/// `E[Π x_j^{e_j}]` for `x ~ N(0, I)`.
pub fn gaussian_raw_moment(exponents: &[u32]) -> f64 {
    exponents
        .iter()
        .map(|&e| {
            if e % 2 == 1 {
                0.0
            } else {
                (1..e).step_by(2).map(|k| k as f64).product::<f64>()
            }
        })
        .product()
}

/// The moment equations of a fully symmetric rule: one partition per equation.
pub(crate) fn moment_equations(n: usize, order: usize) -> Vec<Vec<u32>> {
    (0..=(order / 2) as u32)
        .flat_map(|d| partitions(d, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutFamily {
    pub pattern: Pattern,
    pub radii: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRule {
    pub dim: usize,
    pub order: usize,
    pub families: Vec<CutFamily>,
    /// Max absolute error over the symmetric moment equations.
    pub residual: f64,
    pub nonnegative: bool,
}

impl CutRule {
    pub fn point_count(&self) -> usize {
        self.families
            .iter()
            .map(|f| f.pattern.point_count(self.dim))
            .sum()
    }

    pub fn center_weight(&self) -> f64 {
        self.families
            .iter()
            .filter(|f| f.pattern == Pattern::Center)
            .map(|f| f.weight)
            .sum()
    }

    /// Max absolute error of the symmetric moment equations, from the radii
    /// and weights alone.
    pub fn equation_residual(&self) -> f64 {
        moment_equations(self.dim, self.order)
            .iter()
            .map(|lambda| {
                let value: f64 = self
                    .families
                    .iter()
                    .map(|f| {
                        let q: Vec<f64> = f.radii.iter().map(|r| r * r).collect();
                        f.weight * family_moment(f.pattern, &q, self.dim, lambda).0
                    })
                    .sum();
                let exps: Vec<u32> = lambda.iter().map(|l| 2 * l).collect();
                (value - gaussian_raw_moment(&exps)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Canonical point set (zero mean, identity covariance).
    pub fn sigma_set(&self) -> Result<SigmaSet> {
        let n = self.dim;
        let total = self.point_count();
        let mut points = DMatrix::zeros(n, total);
        let mut weights = DVector::zeros(total);
        let mut col = 0;
        let mut centers = 0;
        let (centre_fams, paired_fams): (Vec<_>, Vec<_>) = self
            .families
            .iter()
            .partition(|f| f.pattern == Pattern::Center);
        for f in centre_fams {
            weights[col] = f.weight;
            col += 1;
            centers += 1;
        }
        for f in paired_fams {
            for p in family_points(f.pattern, &f.radii, n) {
                points.set_column(col, &p);
                points.set_column(col + 1, &(-&p));
                weights[col] = f.weight;
                weights[col + 1] = f.weight;
                col += 2;
            }
        }
        if col != total {
            return Err(Error::UnsupportedDimension {
                dim: n,
                order: self.order,
            });
        }
        Ok(SigmaSet {
            points,
            w_mean: weights.clone(),
            w_cov: weights,
            rule: RuleTag::cut(self.order)?,
            generating_mean: DVector::zeros(n),
            generating_cov: DMatrix::identity(n, n),
            centers,
        })
    }
}

/// One representative of every `±` pair in the family's orbit.
fn family_points(pattern: Pattern, radii: &[f64], n: usize) -> Vec<DVector<f64>> {
    let slots = pattern.slots(n);
    let k = slots.len();
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let arrangements = distinct_permutations(&slots);
    for support in combinations(n, k) {
        for arr in &arrangements {
            // first sign fixed positive; the negation is emitted by the caller
            for signs in 0..(1usize << (k - 1)) {
                let mut p = DVector::zeros(n);
                for (pos, &coord) in support.iter().enumerate() {
                    let negative = pos > 0 && (signs >> (pos - 1)) & 1 == 1;
                    let r = radii[arr[pos]];
                    p[coord] = if negative { -r } else { r };
                }
                out.push(p);
            }
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn distinct_permutations(items: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut out = vec![sorted.clone()];
    // next lexicographic permutation
    loop {
        let n = sorted.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| sorted[i] < sorted[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| sorted[j] > sorted[i]).unwrap();
        sorted.swap(i, j);
        sorted[i + 1..].reverse();
        out.push(sorted.clone());
    }
    out
}

type RuleCache = Mutex<HashMap<(usize, usize), Arc<(CutRule, SigmaSet)>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const LOAD_TOLERANCE: f64 = 1e-9;

fn load_rule(n: usize, order: usize) -> Result<Arc<(CutRule, SigmaSet)>> {
    if ![4, 6, 8].contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if n == 0 {
        return Err(Error::UnsupportedDimension { dim: n, order });
    }
    if let Some(hit) = cache().lock().unwrap().get(&(n, order)) {
        return Ok(hit.clone());
    }
    let rule = match CutTable::shipped().find(n, order) {
        Some(rule) => rule.clone(),
        None => {
            log::info!("no shipped CUT{order} rule for n = {n}; solving");
            solve_cut_rule(n, order, &SolverOptions::default())?
        }
    };
    let set = rule.sigma_set()?;
    let err = symmetric_moment_error(&set, order);
    if err > LOAD_TOLERANCE {
        log::error!("CUT{order} rule for n = {n} fails moment check ({err:e})");
        return Err(Error::UnsupportedDimension { dim: n, order });
    }
    if !rule.nonnegative {
        log::warn!(
            "CUT{order} rule for n = {n} has negative weights (min {:e})",
            rule.families.iter().map(|f| f.weight).fold(f64::INFINITY, f64::min)
        );
    }
    let entry = Arc::new((rule, set));
    cache()
        .lock()
        .unwrap()
        .entry((n, order))
        .or_insert(entry.clone());
    Ok(entry)
}

/// Max error of the even symmetric moment equations, evaluated by brute force on the points.
pub(crate) fn symmetric_moment_error(set: &SigmaSet, order: usize) -> f64 {
    let n = set.dim();
    moment_equations(n, order)
        .iter()
        .map(|lambda| {
            let mut exps = vec![0u32; n];
            for (j, &l) in lambda.iter().enumerate() {
                exps[j] = 2 * l;
            }
            (set.raw_moment(&exps) - gaussian_raw_moment(&exps)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn cut_rule(n: usize, order: usize) -> Result<CutRule> {
    Ok(load_rule(n, order)?.0.clone())
}

/// Canonical CUT point set for `N(0, I_n)`.
pub fn cut_points(n: usize, order: usize) -> Result<SigmaSet> {
    Ok(load_rule(n, order)?.1.clone())
}
