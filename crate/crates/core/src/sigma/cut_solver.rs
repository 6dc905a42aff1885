//! Offline solver for fully symmetric CUT rules.
//!
//! Unknowns are the log squared radii and the weight of each family. The
//! moment equations are solved by Levenberg–Marquardt from a deterministic
//! set of random starts; among converged solutions the one with the largest
//! minimum weight wins.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cut::{family_moment, gaussian_raw_moment, moment_equations, CutFamily, CutRule, Pattern};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub starts: usize,
    pub max_iters: usize,
    /// Max scaled residual accepted as converged.
    pub tolerance: f64,
    /// Stop once this many nonnegative solutions have been found.
    pub enough: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 600,
            max_iters: 400,
            tolerance: 1e-13,
            enough: 6,
            seed: 0x5eed_c0de,
        }
    }
}

/// Weights above `-NONNEGATIVE_SLACK` count as nonnegative.
const NONNEGATIVE_SLACK: f64 = 1e-15;

use Pattern::{Axis as A, Center as C, Corner as K, PairEqual as PE, PairMixed as PM, Triple as T};

fn candidates(n: usize, order: usize) -> Vec<Vec<Pattern>> {
    let lists: Vec<Vec<Pattern>> = match (order, n) {
        (4, 1) => vec![vec![C, A]],
        (4, _) => vec![vec![C, A, PE], vec![A, PE], vec![C, A, K], vec![C, A, PE, K]],
        (6, 1) => vec![vec![A, A], vec![C, A, A]],
        (6, 2) => vec![vec![A, A, PE], vec![C, A, A, PE]],
        (6, 3) => vec![vec![C, A, PE, T], vec![C, A, A, PE, T]],
        (6, _) => vec![
            vec![C, A, PE, T],
            vec![C, A, PE, K],
            vec![C, A, PE, T, K],
            vec![C, A, A, PE, T],
        ],
        (8, 1) => vec![vec![C, A, A], vec![A, A, A]],
        (8, 2) => vec![vec![A, A, PE, PM], vec![C, A, A, PE, PM]],
        (8, 3) => vec![vec![A, A, PE, PM, T], vec![C, A, A, PE, PM, T]],
        (8, _) => vec![
            vec![C, A, PE, PM, T, K],
            vec![C, A, A, PE, PM, T, K],
            vec![C, A, A, PE, PE, PM, T, K],
        ],
        _ => vec![],
    };
    lists
        .into_iter()
        .filter(|l| l.iter().all(|p| p.fits(n)))
        .collect()
}

struct System {
    n: usize,
    families: Vec<Pattern>,
    equations: Vec<Vec<u32>>,
    targets: Vec<f64>,
    /// Offset of each family's parameters in the unknown vector.
    offsets: Vec<usize>,
    unknowns: usize,
}

impl System {
    fn new(n: usize, order: usize, families: Vec<Pattern>) -> Self {
        let equations = moment_equations(n, order);
        let targets = equations
            .iter()
            .map(|l| gaussian_raw_moment(&l.iter().map(|x| 2 * x).collect::<Vec<_>>()))
            .collect();
        let mut offsets = Vec::new();
        let mut off = 0;
        for f in &families {
            offsets.push(off);
            off += f.radius_count() + 1;
        }
        Self {
            n,
            families,
            equations,
            targets,
            offsets,
            unknowns: off,
        }
    }

    fn split<'a>(&self, theta: &'a DVector<f64>, f: usize) -> (Vec<f64>, f64) {
        let rc = self.families[f].radius_count();
        let o = self.offsets[f];
        let q = (0..rc).map(|p| theta[o + p].exp()).collect();
        (q, theta[o + rc])
    }

    fn residual_and_jacobian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.equations.len();
        let mut r = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, self.unknowns);
        for f in 0..self.families.len() {
            let (q, w) = self.split(theta, f);
            let o = self.offsets[f];
            let rc = q.len();
            for (i, lambda) in self.equations.iter().enumerate() {
                let g = self.targets[i];
                let (val, grad) = family_moment(self.families[f], &q, self.n, lambda);
                r[i] += w * val / g;
                for p in 0..rc {
                    jac[(i, o + p)] = w * grad[p] * q[p] / g;
                }
                jac[(i, o + rc)] = val / g;
            }
        }
        for i in 0..m {
            r[i] -= 1.0;
        }
        (r, jac)
    }

    /// Least-squares weights for fixed radii.
    fn fit_weights(&self, theta: &mut DVector<f64>) {
        let m = self.equations.len();
        let nf = self.families.len();
        let mut a = DMatrix::zeros(m, nf);
        let b = DVector::from_element(m, 1.0);
        for f in 0..nf {
            let (q, _) = self.split(theta, f);
            for (i, lambda) in self.equations.iter().enumerate() {
                a[(i, f)] = family_moment(self.families[f], &q, self.n, lambda).0 / self.targets[i];
            }
        }
        if let Ok(w) = a.svd(true, true).solve(&b, 1e-12) {
            for f in 0..nf {
                theta[self.offsets[f] + self.families[f].radius_count()] = w[f];
            }
        }
    }

    fn to_rule(&self, theta: &DVector<f64>, order: usize) -> CutRule {
        let families: Vec<CutFamily> = (0..self.families.len())
            .map(|f| {
                let (q, w) = self.split(theta, f);
                CutFamily {
                    pattern: self.families[f],
                    radii: q.iter().map(|v| v.sqrt()).collect(),
                    weight: w,
                }
            })
            .collect();
        let nonnegative = families.iter().all(|f| f.weight >= -NONNEGATIVE_SLACK);
        let mut rule = CutRule {
            dim: self.n,
            order,
            families,
            residual: 0.0,
            nonnegative,
        };
        rule.residual = rule.equation_residual();
        rule
    }

    fn degenerate(&self, theta: &DVector<f64>) -> bool {
        let mut logs: Vec<(Pattern, f64)> = Vec::new();
        for f in 0..self.families.len() {
            let rc = self.families[f].radius_count();
            let o = self.offsets[f];
            let w = theta[o + rc];
            if !w.is_finite() || w.abs() > 1e6 || w == 0.0 {
                return true;
            }
            for p in 0..rc {
                let t = theta[o + p];
                if !(-10.0..=10.0).contains(&t) {
                    return true;
                }
            }
            if self.families[f] == Pattern::PairMixed && (theta[o] - theta[o + 1]).abs() < 1e-3 {
                return true;
            }
            if rc == 1 {
                let t = theta[o];
                if logs
                    .iter()
                    .any(|(p, s)| *p == self.families[f] && (s - t).abs() < 1e-3)
                {
                    return true;
                }
                logs.push((self.families[f], t));
            }
        }
        false
    }
}

fn lm(sys: &System, mut theta: DVector<f64>, opts: &SolverOptions) -> Option<DVector<f64>> {
    let (mut r, mut jac) = sys.residual_and_jacobian(&theta);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut converged_iters = 0;
    for _ in 0..opts.max_iters {
        if r.amax() < opts.tolerance {
            converged_iters += 1;
            if converged_iters > 3 {
                break;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let scale = jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * (jtj[(i, i)] + 1e-10 * scale);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let trial = &theta + &step;
            let (rt, jt) = sys.residual_and_jacobian(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct <= cost {
                theta = trial;
                r = rt;
                jac = jt;
                cost = ct;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (r.amax() < opts.tolerance && !sys.degenerate(&theta)).then_some(theta)
}

fn min_weight(rule: &CutRule) -> f64 {
    rule.families
        .iter()
        .map(|f| f.weight)
        .fold(f64::INFINITY, f64::min)
}

fn solve_families(
    n: usize,
    order: usize,
    families: Vec<Pattern>,
    opts: &SolverOptions,
) -> Option<CutRule> {
    let sys = System::new(n, order, families);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((n as u64) << 16) ^ order as u64);
    let mut best: Option<CutRule> = None;
    let mut nonneg_found = 0;
    for _ in 0..opts.starts {
        let mut theta = DVector::zeros(sys.unknowns);
        for f in 0..sys.families.len() {
            for p in 0..sys.families[f].radius_count() {
                theta[sys.offsets[f] + p] = rng.random_range(0.3f64.ln()..12f64.ln());
            }
        }
        sys.fit_weights(&mut theta);
        let Some(sol) = lm(&sys, theta, opts) else {
            continue;
        };
        let rule = sys.to_rule(&sol, order);
        if rule.nonnegative {
            nonneg_found += 1;
        }
        let better = match &best {
            None => true,
            Some(b) => min_weight(&rule) > min_weight(b) + 1e-12,
        };
        if better {
            best = Some(rule);
        }
        if nonneg_found >= opts.enough {
            break;
        }
    }
    best
}

/// Solve a CUT rule of the given order for dimension `n`.
///
/// Candidate family sets are tried in order of increasing size; the first
/// nonnegative solution is returned, otherwise the best signed one.
pub fn solve_cut_rule(n: usize, order: usize, opts: &SolverOptions) -> Result<CutRule> {
    if ![4, 6, 8].contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut fallback: Option<CutRule> = None;
    for families in candidates(n, order) {
        if let Some(rule) = solve_families(n, order, families, opts) {
            if rule.nonnegative {
                return Ok(rule);
            }
            let better = match &fallback {
                None => true,
                Some(f) => min_weight(&rule) > min_weight(f) + 1e-12,
            };
            if better {
                fallback = Some(rule);
            }
        }
    }
    fallback.ok_or(Error::UnsupportedDimension { dim: n, order })
}
