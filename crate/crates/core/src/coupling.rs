//! Exact pair couplings (W, W') with equal marginals.
//!
//! A coupling is a finite joint distribution p_{k,j} = P[W = v_k, W' = v_j]
//! over a common, strictly increasing value set. Everything the theorems
//! consume — regression decompositions, jump kernels, conditional moments —
//! is extracted from this joint by exact summation. Couplings built from a
//! stationary Markov chain have equal marginals by construction, up to the
//! stationary-solve residual, which is recorded on the coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DiscreteDistribution;

/// Default tolerance for the equal-marginals law L(W') = L(W).
pub const DEFAULT_MARGINAL_TOL: f64 = 1e-10;

/// Finite joint distribution of (W, W') over a shared value set.
#[derive(Debug, Clone)]
pub struct ExactPairCoupling {
    values: Vec<f64>,
    joint: Vec<f64>, // row-major m x m, joint[k*m + j] = P[W = v_k, W' = v_j]
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    integer_valued: bool,
    marginal_discrepancy: f64,
}

#[derive(Serialize, Deserialize)]
struct CouplingJson {
    values: Vec<f64>,
    joint: Vec<Vec<f64>>,
}

impl ExactPairCoupling {
    /// Build a coupling from an explicit joint matrix, checking all
    /// invariants: non-negative entries, total mass 1 within 1e-12, and
    /// row marginal = column marginal within `marginal_tol`. The achieved
    /// discrepancy is stored on the coupling.
    pub fn from_joint(values: Vec<f64>, joint: Vec<Vec<f64>>, marginal_tol: f64) -> Result<Self> {
        let m = values.len();
        if m == 0 {
            return Err(Error::invalid("values", "empty value set"));
        }
        for w in values.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::invalid("values", "must be strictly increasing"));
            }
        }
        if joint.len() != m || joint.iter().any(|r| r.len() != m) {
            return Err(Error::invalid(
                "joint",
                "must be an m x m matrix matching the value set",
            ));
        }
        let mut flat = Vec::with_capacity(m * m);
        let mut mass = 0.0;
        for row in &joint {
            for &p in row {
                if p < -1e-15 || !p.is_finite() {
                    return Err(Error::invalid(
                        "joint",
                        format!("negative or non-finite entry {p}"),
                    ));
                }
                flat.push(p.max(0.0));
                mass += p;
            }
        }
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "joint",
                format!("total mass {mass} differs from 1 by more than 1e-12"),
            ));
        }
        let mut row_marginal = vec![0.0; m];
        let mut col_marginal = vec![0.0; m];
        for k in 0..m {
            for j in 0..m {
                row_marginal[k] += flat[k * m + j];
                col_marginal[j] += flat[k * m + j];
            }
        }
        let discrepancy = row_marginal
            .iter()
            .zip(&col_marginal)
            .map(|(r, c)| (r - c).abs())
            .fold(0.0, f64::max);
        if discrepancy > marginal_tol {
            return Err(Error::UnequalMarginals {
                discrepancy,
                tolerance: marginal_tol,
            });
        }
        let integer_valued = values.iter().all(|v| (v - v.round()).abs() <= 1e-9);
        Ok(ExactPairCoupling {
            values,
            joint: flat,
            row_marginal,
            col_marginal,
            integer_valued,
            marginal_discrepancy: discrepancy,
        })
    }

    /// Two-step coupling of a stationary Markov chain: joint[k][j] =
    /// π_k P[k→j] where π solves πP = π. Requires row-stochastic `transition`
    /// and an irreducible chain (otherwise the stationary law is not unique).
    pub fn from_markov_chain(transition: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        let m = transition.len();
        if values.len() != m || m == 0 {
            return Err(Error::invalid(
                "values",
                "must match the transition dimension",
            ));
        }
        for (row, r) in transition.iter().enumerate() {
            if r.len() != m {
                return Err(Error::invalid("transition", "matrix must be square"));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::NotStochastic { row, sum });
            }
            if r.iter().any(|&p| p < -1e-15 || !p.is_finite()) {
                return Err(Error::invalid(
                    "transition",
                    "entries must be probabilities",
                ));
            }
        }
        if !is_irreducible(transition) {
            return Err(Error::ReducibleChain);
        }
        let pi = stationary_distribution(transition)?;
        let joint = (0..m)
            .map(|k| (0..m).map(|j| pi[k] * transition[k][j]).collect())
            .collect();
        ExactPairCoupling::from_joint(values.to_vec(), joint, DEFAULT_MARGINAL_TOL)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn joint(&self, k: usize, j: usize) -> f64 {
        self.joint[k * self.values.len() + j]
    }

    /// P[W = v_k] (row sums of the joint).
    pub fn w_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    /// P[W' = v_j] (column sums of the joint).
    pub fn wprime_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn integer_valued(&self) -> bool {
        self.integer_valued
    }

    /// Achieved max |row marginal - column marginal|.
    pub fn marginal_discrepancy(&self) -> f64 {
        self.marginal_discrepancy
    }

    /// The law of W as a discrete distribution.
    pub fn marginal_distribution(&self) -> DiscreteDistribution {
        DiscreteDistribution::new(self.values.clone(), self.row_marginal.clone())
            .expect("coupling invariants imply a valid marginal")
    }

    /// E g(W, W') by exact summation over the joint.
    pub fn expectation(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let m = self.values.len();
        let mut acc = 0.0;
        for k in 0..m {
            for j in 0..m {
                let p = self.joint[k * m + j];
                if p != 0.0 {
                    acc += p * g(self.values[k], self.values[j]);
                }
            }
        }
        acc
    }

    pub fn mean_w(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.row_marginal)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn var_w(&self) -> f64 {
        let mu = self.mean_w();
        self.values
            .iter()
            .zip(&self.row_marginal)
            .map(|(v, p)| (v - mu) * (v - mu) * p)
            .sum()
    }

    /// True iff max_{k,j} |p_{k,j} - p_{j,k}| <= tol, i.e. L(W,W') = L(W',W)
    /// up to `tol`.
    pub fn is_exchangeable(&self, tol: f64) -> bool {
        self.exchangeability_defect() <= tol
    }

    /// max_{k,j} |p_{k,j} - p_{j,k}|.
    pub fn exchangeability_defect(&self) -> f64 {
        let m = self.values.len();
        let mut worst = 0.0f64;
        for k in 0..m {
            for j in (k + 1)..m {
                worst = worst.max((self.joint[k * m + j] - self.joint[j * m + k]).abs());
            }
        }
        worst
    }

    /// Affinely rescale the values so the W-marginal has mean 0 and
    /// variance 1. The joint is untouched.
    pub fn standardize(&self) -> Result<Self> {
        let mu = self.mean_w();
        let var = self.var_w();
        if var <= 1e-14 || var.is_nan() {
            return Err(Error::DegenerateCoupling(var));
        }
        let sigma = var.sqrt();
        let values: Vec<f64> = self.values.iter().map(|v| (v - mu) / sigma).collect();
        let integer_valued = values.iter().all(|v| (v - v.round()).abs() <= 1e-9);
        Ok(ExactPairCoupling {
            values,
            joint: self.joint.clone(),
            row_marginal: self.row_marginal.clone(),
            col_marginal: self.col_marginal.clone(),
            integer_valued,
            marginal_discrepancy: self.marginal_discrepancy,
        })
    }

    pub fn is_standardized(&self) -> bool {
        self.mean_w().abs() <= 1e-8 && (self.var_w() - 1.0).abs() <= 1e-8
    }

    /// E[W' | W = v_k] for every state, with zero-mass states mapped to
    /// their own value (they carry no expectation weight).
    pub fn conditional_mean_wprime(&self) -> Vec<f64> {
        let m = self.values.len();
        (0..m)
            .map(|k| {
                let mass = self.row_marginal[k];
                if mass <= 0.0 {
                    self.values[k]
                } else {
                    let s: f64 = (0..m).map(|j| self.joint[k * m + j] * self.values[j]).sum();
                    s / mass
                }
            })
            .collect()
    }

    /// Regression decomposition E[W'|W] = (1-λ)W + R for a standardized
    /// coupling. When λ is not supplied, λ* = 1 - E{WW'} is used, which
    /// makes α = E{RW} vanish.
    pub fn regression_decompose(&self, lambda: Option<f64>) -> Result<RegressionDecomposition> {
        if !self.is_standardized() {
            return Err(Error::invalid(
                "coupling",
                "must be standardized (EW = 0, Var W = 1)",
            ));
        }
        let eww = self.expectation(|w, wp| w * wp);
        let lambda = match lambda {
            Some(l) => {
                if l <= 0.0 || l >= 1.0 || l.is_nan() {
                    return Err(Error::LambdaOutOfRange(l));
                }
                l
            }
            None => {
                let l = 1.0 - eww;
                if l <= 0.0 || l >= 1.0 || l.is_nan() {
                    return Err(Error::LambdaOutOfRange(l));
                }
                l
            }
        };
        let cond_mean = self.conditional_mean_wprime();
        let m = self.values.len();
        let mut r = vec![0.0; m];
        let mut er2 = 0.0;
        let mut alpha = 0.0;
        let mut er = 0.0;
        for k in 0..m {
            r[k] = cond_mean[k] - (1.0 - lambda) * self.values[k];
            if self.row_marginal[k] > 0.0 {
                er2 += self.row_marginal[k] * r[k] * r[k];
                alpha += self.row_marginal[k] * r[k] * self.values[k];
                er += self.row_marginal[k] * r[k];
            } else {
                r[k] = 0.0;
            }
        }
        let ev2 = self.expectation(|w, wp| (wp - w) * (wp - w));
        let identity_residual = ev2 - 2.0 * (lambda - alpha);
        if identity_residual.abs() > 1e-10 {
            return Err(Error::invalid(
                "coupling",
                format!("EV² = 2(λ-α) violated by {identity_residual:e}; marginals are not equal enough"),
            ));
        }
        Ok(RegressionDecomposition {
            lambda,
            r,
            er2,
            alpha,
            e_r: er,
            ev2,
        })
    }

    /// Conditional jump law P_i(v_k) = P[W' - W = i | W = v_k] for integer
    /// couplings, together with the marginal E P_i(W).
    pub fn jump_probabilities(&self) -> Result<JumpKernel> {
        if !self.integer_valued {
            return Err(Error::NonIntegerSupport);
        }
        let m = self.values.len();
        let ints: Vec<i64> = self.values.iter().map(|v| v.round() as i64).collect();
        let mut displacements: Vec<i64> = Vec::new();
        for k in 0..m {
            for j in 0..m {
                if self.joint[k * m + j] > 0.0 {
                    let d = ints[j] - ints[k];
                    if !displacements.contains(&d) {
                        displacements.push(d);
                    }
                }
            }
        }
        displacements.sort_unstable();
        if displacements.is_empty() {
            displacements.push(0);
        }
        let idx_of = |d: i64| displacements.iter().position(|&x| x == d);
        let mut probs = vec![vec![0.0; displacements.len()]; m];
        let mut marginal = vec![0.0; displacements.len()];
        for k in 0..m {
            if self.row_marginal[k] <= 0.0 {
                // zero-mass state: conditional law is a convention; use "stay"
                if let Some(z) = idx_of(0) {
                    probs[k][z] = 1.0;
                }
                continue;
            }
            for j in 0..m {
                let p = self.joint[k * m + j];
                if p > 0.0 {
                    let di = idx_of(ints[j] - ints[k]).expect("collected above");
                    probs[k][di] += p / self.row_marginal[k];
                    marginal[di] += p;
                }
            }
        }
        Ok(JumpKernel {
            displacements,
            probs,
            marginal,
        })
    }

    /// Conditional second moments of V = W' - W: per-state E^W V², its
    /// variance over W, E|V|³, and A = max |V| over positive-mass pairs.
    /// The global identity E V² = 2(λ - α) is re-verified against the
    /// decomposition.
    pub fn conditional_v2(&self, decomp: &RegressionDecomposition) -> Result<ConditionalMoments> {
        let m = self.values.len();
        let mut per_state = vec![0.0; m];
        let mut e_abs_v3 = 0.0;
        let mut max_abs_v = 0.0f64;
        #[allow(clippy::needless_range_loop)]
        for k in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                let p = self.joint[k * m + j];
                if p > 0.0 {
                    let v = self.values[j] - self.values[k];
                    acc += p * v * v;
                    e_abs_v3 += p * v.abs().powi(3);
                    max_abs_v = max_abs_v.max(v.abs());
                }
            }
            per_state[k] = if self.row_marginal[k] > 0.0 {
                acc / self.row_marginal[k]
            } else {
                0.0
            };
        }
        let ev2: f64 = per_state
            .iter()
            .zip(&self.row_marginal)
            .map(|(e, p)| e * p)
            .sum();
        let var_ev2: f64 = per_state
            .iter()
            .zip(&self.row_marginal)
            .map(|(e, p)| (e - ev2) * (e - ev2) * p)
            .sum::<f64>()
            .max(0.0);
        let identity_residual = ev2 - 2.0 * (decomp.lambda - decomp.alpha);
        if identity_residual.abs() > 1e-10 {
            return Err(Error::invalid(
                "coupling",
                format!("EV² = 2(λ-α) violated by {identity_residual:e}"),
            ));
        }
        Ok(ConditionalMoments {
            per_state_ev2: per_state,
            var_ev2,
            e_abs_v3,
            max_abs_v,
            ev2,
        })
    }

    /// Serialize as the documented `{"values": [...], "joint": [[...]]}`
    /// object.
    pub fn to_json(&self) -> String {
        let m = self.values.len();
        let joint = (0..m)
            .map(|k| self.joint[k * m..(k + 1) * m].to_vec())
            .collect();
        serde_json::to_string_pretty(&CouplingJson {
            values: self.values.clone(),
            joint,
        })
        .expect("plain arrays always serialize")
    }

    /// Parse the documented JSON object, re-checking every invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: CouplingJson = serde_json::from_str(text)?;
        ExactPairCoupling::from_joint(parsed.values, parsed.joint, DEFAULT_MARGINAL_TOL)
    }
}

/// The decomposition E[W'|W] = (1-λ)W + R plus its summary moments.
#[derive(Debug, Clone)]
pub struct RegressionDecomposition {
    pub lambda: f64,
    /// R evaluated at each state value.
    pub r: Vec<f64>,
    /// E R².
    pub er2: f64,
    /// α = E{RW}.
    pub alpha: f64,
    /// E R (should vanish for standardized couplings).
    pub e_r: f64,
    /// E V², V = W' - W.
    pub ev2: f64,
}

/// Conditional displacement law P_i(w) = P[W' - W = i | W = w].
#[derive(Debug, Clone)]
pub struct JumpKernel {
    /// Sorted displacement support (all i with joint mass somewhere).
    pub displacements: Vec<i64>,
    /// probs[state][d] = P_{displacements[d]}(v_state).
    pub probs: Vec<Vec<f64>>,
    /// marginal[d] = E P_{displacements[d]}(W).
    pub marginal: Vec<f64>,
}

impl JumpKernel {
    /// P_i(v_k), zero when i is outside the displacement support.
    pub fn p(&self, state: usize, i: i64) -> f64 {
        match self.displacements.iter().position(|&d| d == i) {
            Some(di) => self.probs[state][di],
            None => 0.0,
        }
    }

    /// E P_i(W).
    pub fn marginal_p(&self, i: i64) -> f64 {
        match self.displacements.iter().position(|&d| d == i) {
            Some(di) => self.marginal[di],
            None => 0.0,
        }
    }
}

/// Exact conditional second/third-moment summary of V = W' - W.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub per_state_ev2: Vec<f64>,
    pub var_ev2: f64,
    pub e_abs_v3: f64,
    pub max_abs_v: f64,
    pub ev2: f64,
}

/// Both-directions reachability over positive transition entries.
fn is_irreducible(transition: &[Vec<f64>]) -> bool {
    let m = transition.len();
    let forward = |k: usize| {
        (0..m)
            .filter(|&j| transition[k][j] > 1e-15)
            .collect::<Vec<_>>()
    };
    let backward = |k: usize| {
        (0..m)
            .filter(|&j| transition[j][k] > 1e-15)
            .collect::<Vec<_>>()
    };
    reaches_all(m, forward) && reaches_all(m, backward)
}

fn reaches_all(m: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = stack.pop() {
        for j in neighbors(k) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == m
}

/// Solve πP = π, Σπ = 1 for an irreducible chain. Dense elimination up to
/// 2000 states, power iteration beyond.
fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = transition.len();
    if m > 2000 {
        return stationary_power_iteration(transition);
    }
    // (P^T - I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for slot in a[m - 1].iter_mut() {
        *slot = 1.0;
    }
    b[m - 1] = 1.0;
    let mut pi = solve_dense(a, b)?;
    let mut total = 0.0;
    for p in &mut pi {
        if *p < 0.0 {
            if *p < -1e-9 {
                return Err(Error::ReducibleChain);
            }
            *p = 0.0;
        }
        total += *p;
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

fn stationary_power_iteration(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = transition.len();
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..200_000 {
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for k in 0..m {
            let pk = pi[k];
            if pk == 0.0 {
                continue;
            }
            for j in 0..m {
                next[j] += pk * transition[k][j];
            }
        }
        let delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if delta < 1e-15 {
            return Ok(pi);
        }
    }
    Err(Error::invalid(
        "transition",
        "power iteration did not converge",
    ))
}

#[allow(clippy::needless_range_loop)] // in-place elimination indexes two rows at once
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-13 {
            return Err(Error::ReducibleChain);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row][j] -= factor * a[col][j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in (row + 1)..n {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn biased_three_cycle() -> ExactPairCoupling {
        // P[k→k+1 mod 3] = 0.7, P[k→k] = 0.3
        let p = vec![
            vec![0.3, 0.7, 0.0],
            vec![0.0, 0.3, 0.7],
            vec![0.7, 0.0, 0.3],
        ];
        ExactPairCoupling::from_markov_chain(&p, &[-1.0, 0.0, 1.0]).unwrap()
    }

    /// Same shape with a lazy walk, so that λ* = 1 - E{WW'} lands in (0, 1).
    fn lazy_three_cycle() -> ExactPairCoupling {
        let p = vec![
            vec![0.8, 0.2, 0.0],
            vec![0.0, 0.8, 0.2],
            vec![0.2, 0.0, 0.8],
        ];
        ExactPairCoupling::from_markov_chain(&p, &[-1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn identity_chain_is_rejected() {
        let p = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = ExactPairCoupling::from_markov_chain(&p, &[0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::ReducibleChain));
    }

    #[test]
    fn symmetric_two_state_chain_is_exchangeable_quarter_joint() {
        let p = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let c = ExactPairCoupling::from_markov_chain(&p, &[0.0, 1.0]).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                assert!((c.joint(k, j) - 0.25).abs() < 1e-15);
            }
        }
        assert!(c.is_exchangeable(1e-14));
    }

    #[test]
    fn biased_cycle_stationary_matches_hand_solution() {
        // Hand oracle: doubly stochastic circulant, so π = (1/3, 1/3, 1/3);
        // verified by solving the 3x3 system π = πP by hand:
        //   π0 = 0.3 π0 + 0.7 π2, π1 = 0.7 π0 + 0.3 π1, π2 = 0.7 π1 + 0.3 π2
        // gives π0 = π1 = π2.
        let c = biased_three_cycle();
        for k in 0..3 {
            assert!((c.w_marginal()[k] - 1.0 / 3.0).abs() < 1e-12);
            assert!((c.wprime_marginal()[k] - 1.0 / 3.0).abs() < 1e-12);
        }
        // joint is asymmetric: p_{01} = 0.7/3, p_{10} = 0
        assert!(!c.is_exchangeable(1e-12));
        assert!((c.joint(0, 1) - 0.7 / 3.0).abs() < 1e-12);
        assert_eq!(c.joint(1, 0), 0.0);
        assert!(c.marginal_discrepancy() < 1e-12);
    }

    #[test]
    fn diagonal_joint_is_exchangeable() {
        let c = ExactPairCoupling::from_joint(
            vec![0.0, 1.0],
            vec![vec![0.4, 0.0], vec![0.0, 0.6]],
            1e-10,
        )
        .unwrap();
        assert!(c.is_exchangeable(0.0));
    }

    #[test]
    fn standardize_symmetric_two_point() {
        let c = ExactPairCoupling::from_joint(
            vec![0.0, 1.0],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            1e-10,
        )
        .unwrap();
        let s = c.standardize().unwrap();
        assert!((s.values()[0] + 1.0).abs() < 1e-12);
        assert!((s.values()[1] - 1.0).abs() < 1e-12);
        let again = s.standardize().unwrap();
        assert!((again.values()[0] - s.values()[0]).abs() < 1e-12);
        assert!((again.values()[1] - s.values()[1]).abs() < 1e-12);
    }

    #[test]
    fn standardize_binomial_four() {
        // Binomial(4, 1/2) has npq = 1, so standardized values are k - 2.
        let probs = [1.0, 4.0, 6.0, 4.0, 1.0].map(|x| x / 16.0);
        let joint: Vec<Vec<f64>> = (0..5)
            .map(|k| {
                (0..5)
                    .map(|j| if k == j { probs[k] } else { 0.0 })
                    .collect()
            })
            .collect();
        let c = ExactPairCoupling::from_joint((0..5).map(|k| k as f64).collect(), joint, 1e-10)
            .unwrap();
        let s = c.standardize().unwrap();
        for (k, v) in s.values().iter().enumerate() {
            assert!((v - (k as f64 - 2.0)).abs() < 1e-12, "value {v} at {k}");
        }
        assert!(s.integer_valued());
    }

    #[test]
    fn degenerate_marginal_fails_standardize() {
        let c = ExactPairCoupling::from_joint(vec![3.0], vec![vec![1.0]], 1e-10).unwrap();
        assert!(matches!(c.standardize(), Err(Error::DegenerateCoupling(_))));
    }

    #[test]
    fn independent_copy_has_lambda_one() {
        // W' independent of W with the same symmetric two-point law
        let c = ExactPairCoupling::from_joint(
            vec![-1.0, 1.0],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            1e-10,
        )
        .unwrap();
        let err = c.regression_decompose(None).unwrap_err();
        assert!(matches!(err, Error::LambdaOutOfRange(l) if (l - 1.0).abs() < 1e-12));
        assert!(err.to_string().contains("0 < lambda < 1"));
    }

    #[test]
    fn diagonal_joint_has_lambda_zero() {
        let c = ExactPairCoupling::from_joint(
            vec![-1.0, 1.0],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            1e-10,
        )
        .unwrap();
        let err = c.regression_decompose(None).unwrap_err();
        assert!(matches!(err, Error::LambdaOutOfRange(l) if l.abs() < 1e-12));
    }

    #[test]
    fn default_lambda_zeroes_alpha() {
        let c = lazy_three_cycle().standardize().unwrap();
        let d = c.regression_decompose(None).unwrap();
        assert!(d.alpha.abs() <= 1e-12, "alpha {}", d.alpha);
        assert!((d.ev2 - 2.0 * d.lambda).abs() <= 1e-12);
        // E R = -λ EW = 0 after standardization
        assert!(d.e_r.abs() <= 1e-10);
    }

    #[test]
    fn explicit_lambda_keeps_e_r_zero() {
        let c = lazy_three_cycle().standardize().unwrap();
        for lambda in [0.2, 0.5, 0.9] {
            let d = c.regression_decompose(Some(lambda)).unwrap();
            assert!(d.e_r.abs() <= 1e-10, "lambda {lambda}: E R = {}", d.e_r);
            assert!((d.ev2 - 2.0 * (d.lambda - d.alpha)).abs() <= 1e-10);
        }
    }

    #[test]
    fn jump_kernel_reconstructs_joint() {
        let c = lazy_three_cycle();
        let kernel = c.jump_probabilities().unwrap();
        for (k, &pk) in c.w_marginal().iter().enumerate() {
            let mut row_total = 0.0;
            for (di, &d) in kernel.displacements.iter().enumerate() {
                row_total += kernel.probs[k][di];
                let j = k as i64 + d;
                if (0..3).contains(&j) {
                    let reconstructed = pk * kernel.probs[k][di];
                    let expect = c.joint(k, j as usize);
                    assert!((reconstructed - expect).abs() < 1e-15, "state {k} disp {d}");
                }
            }
            assert!((row_total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_joint_jump_kernel_is_stay() {
        let c = ExactPairCoupling::from_joint(
            vec![0.0, 1.0],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            1e-10,
        )
        .unwrap();
        let kernel = c.jump_probabilities().unwrap();
        assert_eq!(kernel.displacements, vec![0]);
        assert!((kernel.p(0, 0) - 1.0).abs() < 1e-15);
        assert!((kernel.p(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_integer_values_reject_jump_kernel() {
        let c = ExactPairCoupling::from_joint(
            vec![-1.5, 1.5],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            1e-10,
        )
        .unwrap();
        assert!(matches!(
            c.jump_probabilities(),
            Err(Error::NonIntegerSupport)
        ));
    }

    #[test]
    fn conditional_v2_identity_on_cycle() {
        let c = lazy_three_cycle().standardize().unwrap();
        let d = c.regression_decompose(None).unwrap();
        let m = c.conditional_v2(&d).unwrap();
        assert!((m.ev2 - 2.0 * (d.lambda - d.alpha)).abs() < 1e-12);
        assert!(m.var_ev2 >= 0.0);
        assert!(m.max_abs_v > 0.0);
    }

    #[test]
    fn json_round_trip() {
        let c = lazy_three_cycle();
        let text = c.to_json();
        let back = ExactPairCoupling::from_json(&text).unwrap();
        assert_eq!(back.len(), c.len());
        for k in 0..3 {
            assert_eq!(back.values()[k], c.values()[k]);
            for j in 0..3 {
                assert_eq!(back.joint(k, j), c.joint(k, j));
            }
        }
    }

    #[test]
    fn power_iteration_matches_dense_solve() {
        let p = vec![
            vec![0.5, 0.4, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ];
        let dense = stationary_distribution(&p).unwrap();
        let power = stationary_power_iteration(&p).unwrap();
        for k in 0..3 {
            assert!((dense[k] - power[k]).abs() < 1e-12, "state {k}");
        }
    }

    #[test]
    fn unequal_marginals_are_rejected() {
        let joint = vec![vec![0.5, 0.3], vec![0.0, 0.2]];
        let err = ExactPairCoupling::from_joint(vec![0.0, 1.0], joint, 1e-10).unwrap_err();
        assert!(matches!(err, Error::UnequalMarginals { .. }));
    }
}
