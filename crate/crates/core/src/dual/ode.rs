//! The truncated level-mass system
//! `dn_k/dt = mu n_{k-1} + n_k (alpha - mu - n_k / 2 - sum_{i<k} n_i)`
//! with `n_{-1} = 0`, integrated by classical fixed-step RK4.

use serde::Serialize;

use crate::error::{domain, RatchetError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeState<T> {
    pub t: T,
    pub n: Vec<T>,
}

impl<T: Scalar> OdeState<T> {
    pub fn total(&self) -> T {
        self.n.iter().fold(T::zero(), |a, &x| a + x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrajectory<T> {
    pub alpha: T,
    pub mu: T,
    pub states: Vec<OdeState<T>>,
}

impl<T: Scalar> OdeTrajectory<T> {
    pub fn last(&self) -> &OdeState<T> {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Largest sup-norm distance of any recorded state from `target`.
    pub fn max_deviation(&self, target: &[T]) -> T {
        self.states
            .iter()
            .flat_map(|s| s.n.iter().zip(target).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max)
    }
}

fn vector_field<T: Scalar>(alpha: T, mu: T, n: &[T], out: &mut [T]) {
    let half = T::lit(0.5);
    let mut below = T::zero();
    let mut prev = T::zero();
    for (k, &x) in n.iter().enumerate() {
        out[k] = mu * prev + x * (alpha - mu - half * x - below);
        below = below + x;
        prev = x;
    }
}

/// Integrates levels `0..=k` from `n_init` (padded with zeros) up to
/// `t_max` with step `dt`, recording every step.
pub fn ode_integrate<T: Scalar>(
    alpha: T,
    mu: T,
    k: usize,
    n_init: &[T],
    t_max: T,
    dt: T,
) -> Result<OdeTrajectory<T>> {
    if !(dt > T::zero()) {
        return domain(format!("step size must be positive, got {dt}"));
    }
    if k < 1 {
        return domain("truncation level must be at least 1");
    }
    if !(alpha > T::zero() && mu >= T::zero()) {
        return domain(format!(
            "need alpha > 0 and mu >= 0, got alpha = {alpha}, mu = {mu}"
        ));
    }
    if n_init.len() > k + 1 || n_init.iter().any(|&x| !(x >= T::zero())) {
        return domain("initial masses must be nonnegative and fit the truncation");
    }
    let dim = k + 1;
    let mut n = vec![T::zero(); dim];
    n[..n_init.len()].copy_from_slice(n_init);

    let steps = (t_max / dt).round().to_usize().unwrap_or(0);
    let limit = T::lit(4.0) * alpha;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(OdeState {
        t: T::zero(),
        n: n.clone(),
    });

    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
    );
    let mut tmp = vec![T::zero(); dim];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    for step in 1..=steps {
        vector_field(alpha, mu, &n, &mut k1);
        for i in 0..dim {
            tmp[i] = n[i] + half * dt * k1[i];
        }
        vector_field(alpha, mu, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = n[i] + half * dt * k2[i];
        }
        vector_field(alpha, mu, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = n[i] + dt * k3[i];
        }
        vector_field(alpha, mu, &tmp, &mut k4);
        for i in 0..dim {
            n[i] = n[i] + dt * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        let t = T::from_count(step) * dt;
        let mass = n.iter().fold(T::zero(), |a, &x| a + x);
        if !(mass <= limit) {
            return Err(RatchetError::BlowUp {
                time: t.as_f64(),
                mass: mass.as_f64(),
            });
        }
        states.push(OdeState { t, n: n.clone() });
    }
    Ok(OdeTrajectory { alpha, mu, states })
}

/// Solution of `n' = n (alpha - n / 2)` started from `n0`.
pub fn logistic_total<T: Scalar>(alpha: T, n0: T, t: T) -> T {
    let e = (alpha * t).exp();
    let two_a = T::lit(2.0) * alpha;
    two_a * n0 * e / (two_a + n0 * (e - T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::equilibrium_masses;

    #[test]
    fn equilibrium_is_fixed() {
        let eq = equilibrium_masses(1.0, 0.5, 30).unwrap();
        let tr = ode_integrate(1.0, 0.5, 30, &eq.masses, 100.0, 0.01).unwrap();
        assert!(tr.max_deviation(&eq.masses) < 1e-8);
    }

    #[test]
    fn total_mass_is_logistic() {
        let tr = ode_integrate(1.0, 0.5, 30, &[0.01], 50.0, 0.01).unwrap();
        for s in tr.states.iter().step_by(97) {
            assert!(
                (s.total() - logistic_total(1.0f64, 0.01, s.t)).abs() < 1e-6,
                "t = {}",
                s.t
            );
        }
    }

    #[test]
    fn works_in_single_precision() {
        let eq = equilibrium_masses(1.0f32, 0.5, 10).unwrap();
        let tr = ode_integrate(1.0f32, 0.5, 10, &eq.masses, 5.0, 0.05).unwrap();
        assert!(tr.max_deviation(&eq.masses) < 1e-4);
    }

    #[test]
    fn rejects_bad_input_and_flags_blow_up() {
        assert!(ode_integrate(1.0, 0.5, 0, &[1.0], 1.0, 0.1).is_err());
        assert!(ode_integrate(1.0, 0.5, 3, &[1.0], 1.0, 0.0).is_err());
        assert!(ode_integrate(1.0, 0.5, 3, &[-1.0], 1.0, 0.1).is_err());
        // a huge step makes RK4 diverge
        let r = ode_integrate(1.0, 0.5, 3, &[3.9], 100.0, 5.0);
        assert!(matches!(r, Err(RatchetError::BlowUp { .. })));
    }
}
