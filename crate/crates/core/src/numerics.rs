//! Special functions, Gauss–Legendre quadrature, and probability distances.
//!
//! Everything downstream (Stein solutions, coupling moments, bound reports)
//! reduces to the primitives in this module: the standard normal CDF Φ, the
//! Poisson pmf in log space, fixed-node quadrature for the auxiliary-variable
//! expectations, and exact Kolmogorov / total-variation distances for finite
//! discrete laws.

use crate::error::{Error, Result};

use std::f64::consts::FRAC_2_SQRT_PI;

/// sqrt(2*pi)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
/// sqrt(2/pi), the class constant for half-line indicator tests.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF Φ(x) = erfc(-x/√2)/2.
///
/// Absolute accuracy is ~1e-16; relative accuracy in the lower tail is kept
/// by evaluating through erfc rather than 1 - Φ(-x).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Complementary error function.
///
/// Maclaurin series below |x| = 2, Laplace continued fraction (modified
/// Lentz) above. The continued-fraction branch is relatively accurate deep
/// into the tail, which the Stein-solution evaluation relies on.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else if x > 27.0 {
        // erfc(27) ~ 5e-318: below double-precision normal range.
        0.0
    } else {
        erfc_continued_fraction(x)
    }
}

/// Error function, erf(x) = 1 - erfc(x).
pub fn erf(x: f64) -> f64 {
    if x.abs() < 2.0 {
        erf_series(x)
    } else if x > 0.0 {
        1.0 - erfc(x)
    } else {
        erfc(-x) - 1.0
    }
}

/// Maclaurin series erf(x) = (2/√π) Σ (-1)^n x^(2n+1) / (n! (2n+1)).
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0_f64;
    loop {
        term *= -x2 * (2.0 * n - 1.0) / (n * (2.0 * n + 1.0));
        sum += term;
        n += 1.0;
        if term.abs() < 1e-18 * sum.abs() || n > 200.0 {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// √π e^{x²} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))) for x > 0.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = TINY;
    let mut d = 0.0;
    let mut n = 0u32;
    loop {
        // partial numerator a_1 = 1, a_k = (k-1)/2 for k >= 2; denominators x
        let a = if n == 0 { 1.0 } else { 0.5 * n as f64 };
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        n += 1;
        if (delta - 1.0).abs() < 1e-17 || n > 10_000 {
            break;
        }
    }
    (f / TINY) * TINY * (-x * x).exp() / SQRT_PI
}

/// ln k!
pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// ln of the Poisson(λ) pmf at k, computed in log space.
pub fn poisson_ln_pmf(lambda: f64, k: u64) -> Result<f64> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    Ok(k as f64 * lambda.ln() - lambda - ln_factorial(k))
}

/// Poisson(λ) pmf e^{-λ} λ^k / k!, stable for k up to a few hundred.
pub fn poisson_pmf(lambda: f64, k: u64) -> Result<f64> {
    Ok(poisson_ln_pmf(lambda, k)?.exp())
}

/// Fixed Gauss–Legendre rule with nodes and weights on [-1, 1].
///
/// Nodes are computed by Newton iteration on the Legendre recurrence and
/// mirrored so the rule is exactly symmetric; the symmetry is what makes the
/// τ ↔ 1-τ pairing in the remainder identities cancel to rounding.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureSpec {
    /// Gauss–Legendre rule with `node_count >= 2` nodes; exact for
    /// polynomials of degree <= 2*node_count - 1.
    pub fn gauss_legendre(node_count: usize) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::invalid("node_count", "need at least 2 nodes"));
        }
        let n = node_count;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    let (p2, d2) = legendre_with_deriv(n, x);
                    dp = d2;
                    x -= p2 / d2;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // cos() above descends from +1, so index i is the i-th largest root
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureSpec { nodes, weights })
    }

    /// Default rule used for τ-expectations.
    pub fn default_tau() -> Self {
        QuadratureSpec::gauss_legendre(32).expect("32 >= 2")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes mapped onto [0, 1], paired with their [0, 1]-normalized weights.
    pub fn unit_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (0.5 * (1.0 + x), 0.5 * w))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫_a^b fn dx by the given rule; a > b integrates with a sign flip.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, spec: &QuadratureSpec) -> f64 {
    if a > b {
        return -integrate(f, b, a, spec);
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in spec.nodes.iter().zip(&spec.weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// A finite discrete law: strictly increasing support with probabilities
/// summing to 1 within 1e-12.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::invalid(
                "values",
                "support and probabilities must match and be non-empty",
            ));
        }
        for w in values.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::invalid(
                    "values",
                    "support must be strictly increasing",
                ));
            }
        }
        let mut mass = 0.0;
        for &p in &probs {
            if p < -1e-15 || !p.is_finite() {
                return Err(Error::invalid(
                    "probs",
                    format!("negative or non-finite probability {p}"),
                ));
            }
            mass += p;
        }
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "probs",
                format!("total mass {mass} differs from 1 by more than 1e-12"),
            ));
        }
        Ok(DiscreteDistribution { values, probs })
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

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| (v - m) * (v - m) * p)
            .sum()
    }

    /// True when every support point is within 1e-9 of an integer.
    pub fn integer_valued(&self) -> bool {
        self.values.iter().all(|v| (v - v.round()).abs() <= 1e-9)
    }
}

/// sup over half-line indicators of |F_W(x) - reference(x)|.
///
/// The supremum over the closed class (left and right half-lines, open and
/// closed) is attained at an atom from one side or the other, so both
/// one-sided limits are compared at every support point.
pub fn kolmogorov_distance(dist: &DiscreteDistribution, reference_cdf: impl Fn(f64) -> f64) -> f64 {
    let mut cdf = 0.0;
    let mut sup: f64 = 0.0;
    for (&v, &p) in dist.values().iter().zip(dist.probs()) {
        let r = reference_cdf(v);
        sup = sup.max((cdf - r).abs());
        cdf += p;
        sup = sup.max((cdf - r).abs());
    }
    sup
}

/// A two-sided enclosure of a total-variation distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TvInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// d_TV(dist, Po(λ)) = ½ Σ_k |P[W=k] - Po(λ){k}|, with the Poisson tail
/// truncated once its remaining mass drops below `tail_tol`. The unresolved
/// tail is returned as an interval of width <= tail_tol.
pub fn tv_distance_to_poisson(
    dist: &DiscreteDistribution,
    lambda: f64,
    tail_tol: f64,
) -> Result<TvInterval> {
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(Error::invalid(
            "lambda",
            format!("must be > 0, got {lambda}"),
        ));
    }
    if tail_tol <= 0.0 || tail_tol.is_nan() {
        return Err(Error::invalid("tail_tol", "must be > 0"));
    }
    if !dist.integer_valued() {
        return Err(Error::NonIntegerSupport);
    }
    if dist.values()[0] < -0.5 {
        return Err(Error::NegativeSupport(dist.values()[0].round() as i64));
    }
    let max_support = dist.values().last().unwrap().round() as i64;

    // Walk k = 0, 1, ... accumulating |P[W=k] - pmf(k)| until both the support
    // is exhausted and the remaining Poisson mass is below tail_tol.
    let mut by_k = std::collections::BTreeMap::new();
    for (&v, &p) in dist.values().iter().zip(dist.probs()) {
        by_k.insert(v.round() as i64, p);
    }
    let mut half_l1 = 0.0;
    let mut poisson_cdf = 0.0;
    let mut ln_p = -lambda; // ln pmf(0)
    let mut k: i64 = 0;
    loop {
        let pmf = ln_p.exp();
        let pw = by_k.get(&k).copied().unwrap_or(0.0);
        half_l1 += 0.5 * (pw - pmf).abs();
        poisson_cdf += pmf;
        if k >= max_support && 1.0 - poisson_cdf < tail_tol {
            break;
        }
        k += 1;
        ln_p += lambda.ln() - (k as f64).ln();
        if k > 100_000 {
            return Err(Error::invalid("tail_tol", "Poisson tail did not converge"));
        }
    }
    let tail = (1.0 - poisson_cdf).max(0.0) + f64::EPSILON * (k as f64 + 1.0);
    Ok(TvInterval {
        lo: half_l1,
        hi: half_l1 + 0.5 * tail,
    })
}
