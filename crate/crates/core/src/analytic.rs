//! The limiting type profile `(p_k)` and its companions.
//!
//! All routines are generic over [`Scalar`]. The two quadratic recursions
//! (for `p_k` and for the equilibrium masses) are evaluated with the
//! cancellation-free form of the positive root, so the tail keeps full
//! relative precision far below machine epsilon.

use serde::Serialize;

use crate::error::{domain, RatchetError, Result};
use crate::params::Params;
use crate::scalar::Scalar;

/// Default truncation index for profile numerics.
pub const DEFAULT_KMAX: usize = 200;

/// Relative tolerance used to call two consecutive weights equal.
pub const SHAPE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileWeights<T> {
    pub rho: T,
    pub weights: Vec<T>,
    pub partial_sums: Vec<T>,
    /// `p_kmax / p_{kmax-1}`; absent when `kmax = 0`.
    pub tail_ratio: Option<T>,
}

impl<T: Scalar> ProfileWeights<T> {
    pub fn kmax(&self) -> usize {
        self.weights.len() - 1
    }

    /// `1 - sum_{k <= ell} p_k` computed from the partial sums.
    pub fn tail_after(&self, ell: usize) -> T {
        T::one() - self.partial_sums[ell]
    }

    /// Mean of the (truncated) distribution.
    pub fn mean(&self) -> T {
        self.weights
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, &p)| acc + T::from_count(k) * p)
    }

    /// Numerical estimate of the constant `C` in `p_k ~ C q^k`, read off at
    /// the last index.
    pub fn geometric_tail_constant(&self) -> T {
        let q = self.rho / (T::one() + self.rho);
        let k = self.kmax();
        self.weights[k] / q.powi(k as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumMasses<T> {
    pub alpha: T,
    pub mu: T,
    pub masses: Vec<T>,
    pub total: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShapeClass {
    StrictlyDecreasing,
    PlateauAtZeroOne,
    /// Rising up to `k1`, with `p_k1 = p_k2` when `k2 = k1 + 1`, then falling.
    Unimodal {
        k1: usize,
        k2: usize,
    },
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if !(rho > T::zero() && rho < T::one()) {
        return domain(format!("rho must lie in (0, 1), got {rho}"));
    }
    Ok(())
}

/// Neumaier summation, so partial sums of the weights stay below 1.
struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    fn new(x: T) -> Self {
        Self {
            sum: x,
            carry: T::zero(),
        }
    }

    fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Positive root of `x^2 - b x - c = 0` with `c > 0`, free of cancellation.
fn positive_root<T: Scalar>(b: T, c: T) -> T {
    let disc = (b * b + T::lit(4.0) * c).sqrt();
    if b >= T::zero() {
        (b + disc) / T::lit(2.0)
    } else {
        T::lit(2.0) * c / (disc - b)
    }
}

/// Weights `p_0..p_kmax` from the quadratic recursion
/// `p_k^2 - p_k (1 - rho - 2 sum_{k'<k} p_k') = rho p_{k-1}` with
/// `p_0 = 1 - rho`, taking the positive root at each step.
pub fn profile_recursion<T: Scalar>(rho: T, kmax: usize) -> Result<ProfileWeights<T>> {
    check_rho(rho)?;
    let mut weights = Vec::with_capacity(kmax + 1);
    let mut partial_sums = Vec::with_capacity(kmax + 1);
    let p0 = T::one() - rho;
    weights.push(p0);
    partial_sums.push(p0);
    let mut sum = CompensatedSum::new(p0);
    for k in 1..=kmax {
        let prev = weights[k - 1];
        let b = T::one() - rho - T::lit(2.0) * sum.value();
        let p = positive_root(b, rho * prev);
        if !(p > T::zero()) || !p.is_finite() {
            return Err(RatchetError::Numeric(format!(
                "p_{k} = {p} is not positive; the recursion lost precision"
            )));
        }
        weights.push(p);
        sum.add(p);
        partial_sums.push(sum.value());
    }
    let tail_ratio = (kmax >= 1).then(|| weights[kmax] / weights[kmax - 1]);
    Ok(ProfileWeights {
        rho,
        weights,
        partial_sums,
        tail_ratio,
    })
}

/// The generating-function map `G(u) = (1 + rho - sqrt((1 + rho)^2 - 4 rho u)) / 2`.
pub fn g_map<T: Scalar>(rho: T, u: T) -> Result<T> {
    check_rho(rho)?;
    if !(u >= T::zero() && u <= T::one()) {
        return domain(format!("G is defined on [0, 1], got u = {u}"));
    }
    Ok(g_unchecked(rho, u))
}

#[inline]
fn g_unchecked<T: Scalar>(rho: T, u: T) -> T {
    let a = T::one() + rho;
    // Rationalised form; same value as the surd expression.
    T::lit(2.0) * rho * u / (a + (a * a - T::lit(4.0) * rho * u).sqrt())
}

/// `ell`-fold iterate of `G` applied to `rho`, i.e. `sum_{k > ell} p_k`.
pub fn tail_iterate<T: Scalar>(rho: T, ell: usize) -> Result<T> {
    check_rho(rho)?;
    let mut u = rho;
    for _ in 0..ell {
        u = g_unchecked(rho, u);
    }
    Ok(u)
}

fn trend<T: Scalar>(a: T, b: T) -> i8 {
    let scale = a.abs().max(b.abs());
    let d = b - a;
    if d.abs() <= T::lit(SHAPE_TOLERANCE) * scale {
        0
    } else if d > T::zero() {
        1
    } else {
        -1
    }
}

/// Sorts a profile into one of the three shapes it can take.
pub fn classify_shape<T: Scalar>(weights: &ProfileWeights<T>) -> Result<ShapeClass> {
    let p = &weights.weights;
    if p.len() < 4 {
        return Err(RatchetError::Classification(format!(
            "need kmax >= 3, got {}",
            p.len().saturating_sub(1)
        )));
    }
    let steps: Vec<i8> = p.windows(2).map(|w| trend(w[0], w[1])).collect();
    let rise = steps.iter().take_while(|&&s| s == 1).count();
    let flat = steps[rise..].iter().take_while(|&&s| s == 0).count();
    let rest_falls = steps[rise + flat..].iter().all(|&s| s == -1);
    match (rise, flat, rest_falls) {
        (0, 0, true) => Ok(ShapeClass::StrictlyDecreasing),
        (0, 1, true) => Ok(ShapeClass::PlateauAtZeroOne),
        (r, f, true) if r >= 1 && f <= 1 => Ok(ShapeClass::Unimodal { k1: r, k2: r + f }),
        _ => Err(RatchetError::Classification(format!(
            "consecutive trends {steps:?} fit no admissible shape"
        ))),
    }
}

/// Equilibrium of the level-mass ODE: `n_0 = 2 (alpha - mu)` and
/// `mu n_{k-1} + n_k (alpha - mu - n_k / 2 - sum_{i<k} n_i) = 0`.
pub fn equilibrium_masses<T: Scalar>(alpha: T, mu: T, kmax: usize) -> Result<EquilibriumMasses<T>> {
    if !(mu > T::zero() && mu < alpha) {
        return domain(format!(
            "need 0 < mu < alpha, got mu = {mu}, alpha = {alpha}"
        ));
    }
    let two = T::lit(2.0);
    let mut masses = Vec::with_capacity(kmax + 1);
    masses.push(two * (alpha - mu));
    let mut below = CompensatedSum::new(masses[0]);
    for k in 1..=kmax {
        // n^2 / 2 - c n - mu n_{k-1} = 0  <=>  n^2 - 2c n - 2 mu n_{k-1} = 0
        let c = alpha - mu - below.value();
        let n = positive_root(two * c, two * mu * masses[k - 1]);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(RatchetError::Numeric(format!(
                "equilibrium mass n_{k} = {n} is not positive"
            )));
        }
        masses.push(n);
        below.add(n);
    }
    Ok(EquilibriumMasses {
        alpha,
        mu,
        masses,
        total: below.value(),
    })
}

/// Coefficient `2 (alpha - mu + mu ln(mu / alpha))` of `N / f(N)` in the
/// logarithm of the click time scale.
pub fn click_exponent_coefficient<T: Scalar>(alpha: T, mu: T) -> Result<T> {
    if !(mu > T::zero() && mu < alpha) {
        return domain(format!(
            "need 0 < mu < alpha, got mu = {mu}, alpha = {alpha}"
        ));
    }
    Ok(T::lit(2.0) * (alpha - mu + mu * (mu / alpha).ln()))
}

/// `2 (alpha - mu + mu ln(mu / alpha)) N / f(N)`.
pub fn click_exponent(params: &Params) -> Result<f64> {
    Ok(click_exponent_coefficient(params.alpha, params.mu)? * params.n_over_f())
}

/// Largest violation of the mutation-selection balance
/// `p_k (sum_{k'>k} p_k' - sum_{k'<k} p_k') = rho (p_k - p_{k-1})`
/// (with `alpha = 1`), closing the infinite sum with the exact `G`-tail.
pub fn systeq_residual<T: Scalar>(weights: &ProfileWeights<T>) -> T {
    let p = &weights.weights;
    let rho = weights.rho;
    let kmax = p.len() - 1;
    let beyond = tail_iterate(rho, kmax).unwrap_or(T::zero());
    let mut above = vec![beyond; kmax + 1];
    for k in (0..kmax).rev() {
        above[k] = above[k + 1] + p[k + 1];
    }
    let mut below = T::zero();
    let mut worst = T::zero();
    for k in 0..=kmax {
        let prev = if k == 0 { T::zero() } else { p[k - 1] };
        let r = (p[k] * (above[k] - below) - rho * (p[k] - prev)).abs();
        worst = worst.max(r);
        below = below + p[k];
    }
    worst
}

/// Smallest truncation level `K` with `2 alpha G^K(rho) < tol`.
pub fn ode_truncation_level(alpha: f64, mu: f64, tol: f64) -> Result<usize> {
    let rho = mu / alpha;
    check_rho(rho)?;
    let mut u = rho;
    let mut k = 0;
    while 2.0 * alpha * u >= tol {
        u = g_unchecked(rho, u);
        k += 1;
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle: p_k = G^{k-1}(rho) - G^k(rho), p_0 = 1 - rho, with G in its
    // surd form. Only accurate for small k.
    fn oracle_weights(rho: f64, kmax: usize) -> Vec<f64> {
        let g = |u: f64| 0.5 * (1.0 + rho - ((1.0 + rho).powi(2) - 4.0 * rho * u).sqrt());
        let mut tails = vec![rho];
        for _ in 0..kmax {
            let t = g(*tails.last().unwrap());
            tails.push(t);
        }
        let mut w = vec![1.0 - rho];
        for k in 1..=kmax {
            w.push(tails[k - 1] - tails[k]);
        }
        w
    }

    #[test]
    fn recursion_matches_g_oracle_at_half() {
        let p = profile_recursion(0.5_f64, 2).unwrap();
        let o = oracle_weights(0.5, 2);
        for k in 0..=2 {
            assert!((p.weights[k] - o[k]).abs() < 1e-14);
        }
        // Frozen from the oracle above.
        let frozen = [0.5, 0.309017, 0.124363];
        for k in 0..=2 {
            assert!(
                (p.weights[k] - frozen[k]).abs() < 5e-7,
                "k = {k}: {}",
                p.weights[k]
            );
        }
    }

    #[test]
    fn plateau_value_at_two_thirds() {
        let p = profile_recursion(2.0 / 3.0_f64, 1).unwrap();
        assert!((p.weights[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((p.weights[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn vanishing_mutation_limit() {
        let p = profile_recursion(1e-12_f64, 3).unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0];
        for k in 0..=3 {
            assert!((p.weights[k] - expect[k]).abs() < 1e-11);
        }
    }

    #[test]
    fn recursion_domain_errors() {
        assert!(matches!(
            profile_recursion(0.0_f64, 3),
            Err(RatchetError::Domain(_))
        ));
        assert!(matches!(
            profile_recursion(1.0_f64, 3),
            Err(RatchetError::Domain(_))
        ));
        assert!(profile_recursion(-0.1_f64, 3).is_err());
    }

    #[test]
    fn recursion_in_single_precision() {
        let p = profile_recursion(0.5_f32, 10).unwrap();
        let d = profile_recursion(0.5_f64, 10).unwrap();
        for k in 0..=10 {
            assert!(((p.weights[k] as f64) - d.weights[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn g_map_values() {
        assert_eq!(g_map(0.5_f64, 0.0).unwrap(), 0.0);
        assert!((g_map(0.5_f64, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let direct = 0.5 * (1.5 - (2.25_f64 - 1.0).sqrt());
        let v = g_map(0.5_f64, 0.5).unwrap();
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.190983).abs() < 5e-7);
        assert!(g_map(0.5_f64, 1.5).is_err());
        assert!(g_map(1.5_f64, 0.5).is_err());
    }

    #[test]
    fn tail_iterate_values() {
        assert_eq!(tail_iterate(0.5_f64, 0).unwrap(), 0.5);
        assert!((tail_iterate(0.5_f64, 1).unwrap() - 0.190983).abs() < 5e-7);
        assert!((tail_iterate(0.5_f64, 2).unwrap() - 0.066620).abs() < 5e-7);
    }

    #[test]
    fn shapes() {
        let c = |rho: f64| classify_shape(&profile_recursion(rho, 60).unwrap()).unwrap();
        assert_eq!(c(0.5), ShapeClass::StrictlyDecreasing);
        assert_eq!(c(2.0 / 3.0), ShapeClass::PlateauAtZeroOne);
        assert_eq!(c(0.8), ShapeClass::Unimodal { k1: 1, k2: 1 });
        assert_eq!(c(2.0 / 3.0 - 1e-6), ShapeClass::StrictlyDecreasing);
        assert_eq!(c(2.0 / 3.0 + 1e-6), ShapeClass::Unimodal { k1: 1, k2: 1 });
        let p = profile_recursion(0.8_f64, 3).unwrap();
        let frozen = [0.2, 0.312311, 0.235647];
        for k in 0..3 {
            assert!((p.weights[k] - frozen[k]).abs() < 5e-7);
        }
    }

    #[test]
    fn shape_needs_enough_terms_and_rejects_garbage() {
        let short = profile_recursion(0.5_f64, 2).unwrap();
        assert!(classify_shape(&short).is_err());
        let mut bad = profile_recursion(0.5_f64, 10).unwrap();
        bad.weights[5] = 0.3;
        assert!(matches!(
            classify_shape(&bad),
            Err(RatchetError::Classification(_))
        ));
    }

    #[test]
    fn equilibrium_values() {
        let m = equilibrium_masses(1.0_f64, 0.5, 200).unwrap();
        assert_eq!(m.masses[0], 1.0);
        assert!((m.masses[1] - 0.618034).abs() < 5e-7);
        assert!((m.total - 2.0).abs() < 1e-12);
        assert!(equilibrium_masses(1.0_f64, 1.0, 5).is_err());
    }

    #[test]
    fn click_exponent_values() {
        let p = Params::new(1000, 1.0, 0.5, 50.0).unwrap();
        assert!((click_exponent(&p).unwrap() - 6.1371).abs() < 1e-4);
        let p = Params::new(2000, 1.0, 0.5, 50.0).unwrap();
        assert!((click_exponent(&p).unwrap() - 12.2741).abs() < 1e-4);
        let near = click_exponent_coefficient(1.0_f64, 1.0 - 1e-6).unwrap();
        assert!(near > 0.0 && near < 1e-10);
        assert!(click_exponent_coefficient(1.0_f64, 1.0).is_err());
    }

    #[test]
    fn systeq_residual_small_and_sensitive() {
        for rho in [0.5, 2.0 / 3.0] {
            let p = profile_recursion(rho, 60).unwrap();
            assert!(systeq_residual(&p) <= 1e-10);
        }
        let mut p = profile_recursion(0.5_f64, 60).unwrap();
        p.weights[1] += 1e-3;
        assert!(systeq_residual(&p) >= 1e-4);
    }

    #[test]
    fn truncation_level_meets_tolerance() {
        let k = ode_truncation_level(1.0, 0.5, 1e-8).unwrap();
        assert!(2.0 * tail_iterate(0.5, k).unwrap() < 1e-8);
        assert!(2.0 * tail_iterate(0.5, k - 1).unwrap() >= 1e-8);
    }
}
