use proptest::prelude::*;
use ratchet_core::analytic::{equilibrium_masses, g_map, profile_recursion, tail_iterate};
use ratchet_core::dual::{DualState, Hierarchy};
use ratchet_core::graphical::{
    asg_backward, audit_transitions, forward_transport, m_distance, sample_elements,
    GraphicalElements, Mark, TypeConfig,
};
use ratchet_core::moran::{MoranSimulator, PopState};
use ratchet_core::yule::yule_classes_at;
use ratchet_core::Rates;

fn realisation() -> impl Strategy<Value = GraphicalElements> {
    (
        1usize..=12,
        0.0..1.5f64,
        0.0..0.6f64,
        0.5..6.0f64,
        any::<u64>(),
    )
        .prop_map(|(n, s, m, len, seed)| {
            let r = Rates::new(n as u64, s, m).unwrap();
            sample_elements(&r, 0.0, len, seed).unwrap()
        })
}

proptest! {
    #[test]
    fn tail_identity(rho in 0.01..0.95f64, ell in 0usize..=60) {
        let w = profile_recursion(rho, 60).unwrap();
        let tail = tail_iterate(rho, ell).unwrap();
        prop_assert!((w.tail_after(ell) - tail).abs() < 1e-10);
        prop_assert!((w.weights[0] - (1.0 - rho)).abs() < 1e-14);
        prop_assert!(w.weights.iter().all(|&p| p > 0.0));
        // strict growth and staying below 1, up to rounding once the weights
        // drop below the ulp of the partial sums
        for (k, x) in w.partial_sums.windows(2).enumerate() {
            prop_assert!(x[0] < x[1] || w.weights[k + 1] < f64::EPSILON * x[0]);
            prop_assert!(x[1] <= 1.0 + 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn g_chord_and_lipschitz_bounds(rho in 0.01..0.99f64, u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let gu = g_map(rho, u).unwrap();
        let gv = g_map(rho, v).unwrap();
        // G is convex with G(0) = 0 and G(1) = rho, and G'(1) = rho / (1 - rho)
        prop_assert!(gu <= rho * u + 1e-15);
        prop_assert!((gu - gv).abs() <= rho / (1.0 - rho) * (u - v).abs() + 1e-15);
        prop_assert!((u <= v) == (gu <= gv) || (gu - gv).abs() < 1e-15);
    }

    #[test]
    fn masses_are_scaled_weights(alpha in 0.1..5.0f64, frac in 0.01..0.99f64) {
        let mu = alpha * frac;
        let w = profile_recursion(frac, 80).unwrap();
        let m = equilibrium_masses(alpha, mu, 80).unwrap();
        for (p, n) in w.weights.iter().zip(&m.masses) {
            prop_assert!((n - 2.0 * alpha * p).abs() < 1e-12 * alpha.max(1.0));
        }
        prop_assert!(m.total < 2.0 * alpha + 1e-12);
    }

    #[test]
    fn transport_equals_full_source_distance(g in realisation()) {
        let out = forward_transport(&g, TypeConfig::zeros(g.n(), 0.0)).unwrap();
        let all: Vec<usize> = (0..g.n()).collect();
        let trace = m_distance(&g, &all).unwrap();
        let last: Vec<u32> = trace.last().iter().map(|d| d.finite().unwrap()).collect();
        prop_assert_eq!(&last, &out.final_config.values);
        let best = *last.iter().min().unwrap();
        prop_assert_eq!(out.clicks.len() as u32, best);
    }

    #[test]
    fn forward_and_backward_best_agree(g in realisation()) {
        let all: Vec<usize> = (0..g.n()).collect();
        let out = forward_transport(&g, TypeConfig::zeros(g.n(), 0.0)).unwrap();
        let run = asg_backward(&g, &all).unwrap();
        prop_assert_eq!(run.last().min_load, out.final_config.best());
        prop_assert!(audit_transitions(&run).is_empty());
        for snap in &run.snapshots {
            prop_assert!(snap.size() <= g.n());
        }
    }

    #[test]
    fn triangle_inequality(g in realisation(), a in 0.0..1.0f64, b in 0.0..1.0f64, i in 0usize..12, j in 0usize..12, k in 0usize..12) {
        let n = g.n();
        let (i, j, k) = (i % n, j % n, k % n);
        let (t0, t1) = g.window();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let t = t0 + lo * (t1 - t0);
        let u = t0 + hi * (t1 - t0);
        prop_assume!(t < u);
        let from_i = m_distance(&g, &[i]).unwrap();
        let direct = from_i.at(u)[k];
        let first = from_i.at(t)[j];
        let second = m_distance(&g.restrict(t, t1).unwrap(), &[j]).unwrap().at(u)[k];
        prop_assert!(direct <= first.plus(second));
    }

    #[test]
    fn extra_mark_never_shortens(g in realisation(), line in 0usize..12, frac in 0.0..1.0f64) {
        let (t0, t1) = g.window();
        let mark = Mark { line: line % g.n(), time: t0 + frac * (t1 - t0) };
        prop_assume!(g.events().iter().all(|e| e.time != mark.time));
        let h = g.with_extra_mark(mark).unwrap();
        let src: Vec<usize> = vec![0];
        let before = m_distance(&g, &src).unwrap();
        let after = m_distance(&h, &src).unwrap();
        for s in 0..=20 {
            let t = t0 + (t1 - t0) * s as f64 / 20.0;
            for (x, y) in before.at(t).iter().zip(after.at(t)) {
                prop_assert!(y >= x);
            }
        }
    }

    #[test]
    fn moran_conserves_population(n in 1u64..60, s in 0.0..1.0f64, m in 0.0..0.5f64, seed in any::<u64>()) {
        let r = Rates::new(n, s, m).unwrap();
        let mut sim = MoranSimulator::new(r, PopState::monomorphic(n), seed).unwrap();
        let mut best = 0;
        for _ in 0..400 {
            if sim.advance_until(1e9).is_none() {
                break;
            }
            prop_assert_eq!(sim.state().size(), n);
            prop_assert!(sim.state().counts[0] > 0);
            prop_assert!(sim.state().best_type >= best);
            best = sim.state().best_type;
        }
    }

    #[test]
    fn hierarchy_respects_capacity(n in 1u64..60, s in 0.0..1.0f64, m in 0.0..0.5f64, seed in any::<u64>()) {
        let r = Rates::new(n, s, m).unwrap();
        let mut h = Hierarchy::new(r, DualState::full(n), seed, None).unwrap();
        let mut lowest = 0;
        for _ in 0..400 {
            if h.step_until(1e9).is_none() {
                break;
            }
            prop_assert!(h.state().total() <= n);
            let now = h.state().lowest_nonempty().unwrap();
            prop_assert!(now >= lowest);
            lowest = now;
        }
    }

    #[test]
    fn yule_lower_classes_stay_empty(mu in 0.0..0.9f64, seed in any::<u64>(), t1 in 0.1..2.0f64, dt in 0.0..2.0f64) {
        // the same seed replays the same path, so the state at t1 + dt
        // continues the one at t1
        let a = yule_classes_at(1.0, mu, t1, seed).unwrap();
        let b = yule_classes_at(1.0, mu, t1 + dt, seed).unwrap();
        prop_assert!(a.min_class() <= b.min_class());
        prop_assert!(a.total() <= b.total());
    }
}
