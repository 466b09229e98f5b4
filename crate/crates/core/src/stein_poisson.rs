//! Poisson Stein equation solutions and the discrete antiderivative.
//!
//! For a subset A of the non-negative integers, f_A solves
//!
//!   λ f(j+1) - j f(j) = I[j ∈ A] - Po(λ){A},   f(0) = 0.
//!
//! The right-hand side is additive in A, so f_A = Σ_{i∈A} f_{{i}} and the
//! singleton solutions form a basis; suprema over all A reduce to sign
//! decompositions of singleton functionals. Each singleton has the closed
//! form (with P_j, Q_j the Poisson(λ) head and tail masses)
//!
//!   f_{{i}}(j+1) =  (j!/i!) λ^{i-j-1} Q_j   for j >= i,
//!   f_{{i}}(j+1) = -(j!/i!) λ^{i-j-1} P_j   for j <  i,
//!
//! evaluated in log space with head/tail masses accumulated as positive
//! sums. The textbook forward recursion amplifies rounding like j!/λ^j —
//! at N = 40 it is wrong by many orders of magnitude — so it serves here
//! only as the residual certificate: the closed form satisfies it to
//! rounding, which `max_residual` verifies.

use crate::coupling::ExactPairCoupling;
use crate::error::{Error, Result};
use crate::numerics::poisson_pmf;

/// Bounded solution f_A of the Poisson Stein equation, tabulated on
/// 0..f_len.
#[derive(Debug, Clone)]
pub struct PoissonSteinSolution {
    lambda: f64,
    subset: Vec<u32>,
    po_a: f64,
    f: Vec<f64>,
}

impl PoissonSteinSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn subset(&self) -> &[u32] {
        &self.subset
    }

    /// Po(λ){A}, accumulated as the same pmf sum the residual uses.
    pub fn po_a(&self) -> f64 {
        self.po_a
    }

    /// Number of tabulated values f(0), ..., f(len-1).
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn f(&self, j: usize) -> f64 {
        self.f[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// max_j |f(j)|.
    pub fn norm(&self) -> f64 {
        self.f.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// max_j |f(j+1) - f(j)|.
    pub fn delta1_norm(&self) -> f64 {
        self.f
            .windows(2)
            .fold(0.0f64, |a, w| a.max((w[1] - w[0]).abs()))
    }

    /// max_j |λ f(j+1) - j f(j) - (I[j ∈ A] - Po(λ){A})| — how well the
    /// tabulated values satisfy the defining recursion.
    pub fn max_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.f.len() - 1 {
            let indicator = if self.subset.binary_search(&(j as u32)).is_ok() {
                1.0
            } else {
                0.0
            };
            let res = self.lambda * self.f[j + 1] - j as f64 * self.f[j] - (indicator - self.po_a);
            worst = worst.max(res.abs());
        }
        worst
    }
}

/// Log-space Poisson head/tail tables shared by the singleton formulas.
struct PoissonTables {
    ln_lambda: f64,
    ln_fact: Vec<f64>,
    ln_head: Vec<f64>, // ln P_j = ln Po{0..j}
    ln_tail: Vec<f64>, // ln Q_j = ln Po{j+1..}
}

impl PoissonTables {
    fn new(lambda: f64, max_j: usize) -> Self {
        let ln_lambda = lambda.ln();
        // extend far enough that the truncated tail at the top index is
        // negligible relative to every tabulated tail
        let mut top = max_j + 8 + (2.0 * lambda) as usize;
        loop {
            let ln_p_top = ln_pmf_at(lambda, ln_lambda, top);
            if ln_p_top < ln_pmf_at(lambda, ln_lambda, max_j + 1) - 80.0 && top as f64 > lambda {
                break;
            }
            top += 8;
        }
        let mut ln_fact = vec![0.0; top + 2];
        for j in 1..ln_fact.len() {
            ln_fact[j] = ln_fact[j - 1] + (j as f64).ln();
        }
        let ln_pmf: Vec<f64> = (0..=top)
            .map(|j| j as f64 * ln_lambda - lambda - ln_fact[j])
            .collect();
        let mut ln_head = vec![0.0; top + 1];
        ln_head[0] = ln_pmf[0];
        for j in 1..=top {
            ln_head[j] = log_add(ln_head[j - 1], ln_pmf[j]);
        }
        // tail beyond `top` via the geometric-ratio series from p_{top+1}
        let mut ln_beyond = ln_pmf_at(lambda, ln_lambda, top + 1);
        let mut ratio_sum = 1.0;
        let mut ratio = 1.0;
        let mut k = top + 2;
        loop {
            ratio *= lambda / k as f64;
            ratio_sum += ratio;
            if ratio < 1e-18 * ratio_sum {
                break;
            }
            k += 1;
        }
        ln_beyond += ratio_sum.ln();
        let mut ln_tail = vec![f64::NEG_INFINITY; top + 1];
        ln_tail[top] = ln_beyond;
        for j in (0..top).rev() {
            ln_tail[j] = log_add(ln_tail[j + 1], ln_pmf[j + 1]);
        }
        PoissonTables {
            ln_lambda,
            ln_fact,
            ln_head,
            ln_tail,
        }
    }

    /// f_{{i}}(j+1) in closed form.
    fn singleton_value(&self, i: usize, j: usize) -> f64 {
        let base = self.ln_fact[j] - self.ln_fact[i] + (i as f64 - j as f64 - 1.0) * self.ln_lambda;
        if j >= i {
            (base + self.ln_tail[j]).exp()
        } else {
            -(base + self.ln_head[j]).exp()
        }
    }
}

fn ln_pmf_at(lambda: f64, ln_lambda: f64, j: usize) -> f64 {
    let mut ln_fact = 0.0;
    for k in 2..=j {
        ln_fact += (k as f64).ln();
    }
    j as f64 * ln_lambda - lambda - ln_fact
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn validate_subset(subset: &[u32], n_cap: u32) -> Result<Vec<u32>> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() {
        return Err(Error::invalid("subset", "contains duplicate elements"));
    }
    if let Some(&top) = sorted.last() {
        if top > n_cap {
            return Err(Error::invalid(
                "subset",
                format!("element {top} exceeds the support cap {n_cap}"),
            ));
        }
    }
    Ok(sorted)
}

/// Solve the Poisson Stein equation for A ⊆ {0..n_cap}, tabulating
/// f(0..f_len). `f_len` must cover at least n_cap + 2 values so the
/// residual can be checked across the whole support.
pub fn solve_poisson_stein(
    lambda: f64,
    subset: &[u32],
    n_cap: u32,
    f_len: usize,
) -> Result<PoissonSteinSolution> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    if f_len < n_cap as usize + 2 {
        return Err(Error::invalid("f_len", "must cover n_cap + 2 values"));
    }
    let sorted = validate_subset(subset, n_cap)?;
    let tables = PoissonTables::new(lambda, f_len);
    let mut f = vec![0.0; f_len];
    let mut po_a = 0.0;
    for &i in &sorted {
        po_a += poisson_pmf(lambda, i as u64)?;
        for (j, slot) in f.iter_mut().enumerate().skip(1) {
            *slot += tables.singleton_value(i as usize, j - 1);
        }
    }
    Ok(PoissonSteinSolution {
        lambda,
        subset: sorted,
        po_a,
        f,
    })
}

/// All singleton solutions f_{{j}}, j = 0..=n_cap, sharing one table build.
pub fn singleton_basis(lambda: f64, n_cap: u32, f_len: usize) -> Result<Vec<PoissonSteinSolution>> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    if f_len < n_cap as usize + 2 {
        return Err(Error::invalid("f_len", "must cover n_cap + 2 values"));
    }
    let tables = PoissonTables::new(lambda, f_len);
    (0..=n_cap)
        .map(|i| {
            let mut f = vec![0.0; f_len];
            for (j, slot) in f.iter_mut().enumerate().skip(1) {
                *slot = tables.singleton_value(i as usize, j - 1);
            }
            Ok(PoissonSteinSolution {
                lambda,
                subset: vec![i],
                po_a: poisson_pmf(lambda, i as u64)?,
                f,
            })
        })
        .collect()
}

/// Pointwise sum of solutions (valid for disjoint index sets by linearity).
pub fn sum_solutions(parts: &[&PoissonSteinSolution]) -> Result<PoissonSteinSolution> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid("parts", "empty sum"))?;
    let len = first.len();
    let lambda = first.lambda;
    let mut f = vec![0.0; len];
    let mut subset = Vec::new();
    let mut po_a = 0.0;
    for sol in parts {
        if sol.len() != len || sol.lambda != lambda {
            return Err(Error::invalid("parts", "mismatched solutions"));
        }
        for (slot, &x) in f.iter_mut().zip(&sol.f) {
            *slot += x;
        }
        subset.extend_from_slice(&sol.subset);
        po_a += sol.po_a;
    }
    subset.sort_unstable();
    Ok(PoissonSteinSolution {
        lambda,
        subset,
        po_a,
        f,
    })
}

/// A function f on a contiguous integer range together with its discrete
/// antiderivative G(w) = Σ_{k=1}^w f(k) - Σ_{k=0}^{-w-1} f(-k), where
/// sums with inverted limits are empty. G(w) - G(w-1) = f(w) for all w in
/// range, and G(0) = 0.
#[derive(Debug, Clone)]
pub struct DiscreteAntiderivative {
    lo: i64,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl DiscreteAntiderivative {
    /// Build from values f(lo), f(lo+1), ... with lo <= 0.
    pub fn new(lo: i64, f: Vec<f64>) -> Result<Self> {
        if lo > 0 {
            return Err(Error::invalid("lo", "range must contain 0"));
        }
        if f.is_empty() || lo + f.len() as i64 - 1 < 0 {
            return Err(Error::invalid("f", "range must contain 0"));
        }
        let hi = lo + f.len() as i64 - 1;
        let at = |w: i64| f[(w - lo) as usize];
        let g = (lo..=hi)
            .map(|w| {
                if w >= 0 {
                    // Σ_{k=1}^w f(k)
                    (1..=w).map(at).sum()
                } else {
                    // -Σ_{k=0}^{-w-1} f(-k)
                    -(0..=(-w - 1)).map(|k| at(-k)).sum::<f64>()
                }
            })
            .collect();
        Ok(DiscreteAntiderivative { lo, f, g })
    }

    pub fn from_solution(sol: &PoissonSteinSolution) -> Self {
        DiscreteAntiderivative::new(0, sol.f.clone()).expect("solution range contains 0")
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.f.len() as i64 - 1)
    }

    fn index(&self, w: i64) -> Result<usize> {
        let (lo, hi) = self.range();
        if w < lo || w > hi {
            return Err(Error::OutOfRange { index: w, lo, hi });
        }
        Ok((w - lo) as usize)
    }

    pub fn f(&self, w: i64) -> Result<f64> {
        Ok(self.f[self.index(w)?])
    }

    pub fn g(&self, w: i64) -> Result<f64> {
        Ok(self.g[self.index(w)?])
    }

    /// Δ_i G(w) = G(w+i) - G(w).
    pub fn delta_g(&self, w: i64, i: i64) -> Result<f64> {
        Ok(self.g[self.index(w + i)?] - self.g[self.index(w)?])
    }
}

/// Σ_i E{P_i(W) Δ_i G(W)} over an equal-marginal integer coupling —
/// the telescoped form of E G(W') - E G(W), expected to vanish.
pub fn telescope_check(
    coupling: &ExactPairCoupling,
    antider: &DiscreteAntiderivative,
) -> Result<f64> {
    let kernel = coupling.jump_probabilities()?;
    let row = coupling.w_marginal();
    let mut acc = 0.0;
    for (di, &i) in kernel.displacements.iter().enumerate() {
        for (k, &pk) in row.iter().enumerate() {
            let p = kernel.probs[k][di];
            if p > 0.0 && pk > 0.0 {
                let w = coupling.values()[k].round() as i64;
                acc += pk * p * antider.delta_g(w, i)?;
            }
        }
    }
    Ok(acc)
}

/// E{f(W+1) P₁(W) - f(W) P₋₁(W)} — the reduced expectation of the
/// antisymmetric jump function; vanishes for exchangeable pairs.
pub fn ef_zero_poisson_check(
    coupling: &ExactPairCoupling,
    antider: &DiscreteAntiderivative,
) -> Result<f64> {
    if !coupling.integer_valued() {
        return Err(Error::NonIntegerSupport);
    }
    let kernel = coupling.jump_probabilities()?;
    let row = coupling.w_marginal();
    let mut acc = 0.0;
    for (k, &pk) in row.iter().enumerate() {
        if pk <= 0.0 {
            continue;
        }
        let w = coupling.values()[k].round() as i64;
        let p_up = kernel.p(k, 1);
        let p_down = kernel.p(k, -1);
        if p_up > 0.0 {
            acc += pk * p_up * antider.f(w + 1)?;
        }
        if p_down > 0.0 {
            acc -= pk * p_down * antider.f(w)?;
        }
    }
    Ok(acc)
}
