//! Statistical agreement between independent routes to the same law.

use ratchet_core::analytic::profile_recursion;
use ratchet_core::dual::{simulate_hierarchy, z0_extinction_exact, z0_extinction_mc, DualState};
use ratchet_core::graphical::{asg_backward, merging_time, sample_elements, MergeTime};
use ratchet_core::moran::simulate;
use ratchet_core::yule::yule_min_load_batch;
use ratchet_core::{stats, Rates};

#[test]
fn merging_probability_grows_with_window() {
    let r = Rates::new(20, 1.0, 0.2).unwrap();
    let a: Vec<usize> = (0..10).collect();
    let b: Vec<usize> = (10..20).collect();
    let reps = 300;
    let p: Vec<f64> = [2.0, 8.0, 32.0]
        .iter()
        .map(|&w| {
            let hits = (0..reps as u64)
                .filter(|&seed| {
                    let g = sample_elements(&r, 0.0, w, seed).unwrap();
                    matches!(merging_time(&g, &a, &b, 0).unwrap(), MergeTime::At(_))
                })
                .count();
            hits as f64 / reps as f64
        })
        .collect();
    assert!(p[0] < p[1] && p[1] <= p[2], "{p:?}");
    assert!(p[2] >= 0.95, "{p:?}");
}

#[test]
fn hierarchy_matches_backward_graph() {
    // the level cardinalities of the full-population backward graph and the
    // hierarchy started from N units at level 0 share one law
    let r = Rates::new(10, 1.0, 0.5).unwrap();
    let t = 2.0;
    let key = |c: &[usize]| -> (usize, usize, usize) {
        let at = |k: usize| c.get(k).copied().unwrap_or(0);
        (at(0), at(1), at(2))
    };
    let mut graph = Vec::new();
    let mut dual = Vec::new();
    for seed in 0..3000u64 {
        let g = sample_elements(&r, 0.0, t, seed).unwrap();
        let run = asg_backward(&g, &(0..10).collect::<Vec<_>>()).unwrap();
        graph.push(key(&run.last().cardinalities()));
        let path =
            simulate_hierarchy(r, DualState::full(10), t, &[], 500_000 + seed, None).unwrap();
        let z: Vec<usize> = path.final_state.z.iter().map(|&x| x as usize).collect();
        dual.push(key(&z));
    }
    let test = stats::chi_square_two_sample(&graph, &dual, 5.0).unwrap();
    assert!(test.p_value > 0.001, "{test:?}");
}

#[test]
fn level_zero_extinction_mc_matches_exact() {
    let r = Rates::new(30, 0.1, 0.05).unwrap();
    let exact = z0_extinction_exact(&r, 30).unwrap();
    let mc = z0_extinction_mc(&r, 30, 400, 17).unwrap();
    assert!(
        (mc.mean_h0 - exact).abs() < 4.0 * mc.se_h0,
        "exact {exact}, mc {} ± {}",
        mc.mean_h0,
        mc.se_h0
    );
}

#[test]
fn yule_minimum_fits_recursion() {
    for (rho, seed) in [(0.3, 1u64), (0.8, 2)] {
        let batch = yule_min_load_batch(1.0, rho, 200, 100_000, 5000, seed).unwrap();
        assert_eq!(batch.censored, 0);
        let w = profile_recursion(rho, 40).unwrap();
        let fit = stats::chi_square_goodness_of_fit(&batch.loads(), &w.weights, 5.0).unwrap();
        assert!(fit.p_value > 0.001, "rho {rho}: {fit:?}");
    }
}

#[test]
fn neutral_population_never_clicks_without_mutation() {
    let r = Rates::new(50, 0.0, 0.0).unwrap();
    let out = simulate(r, 100.0, &[50.0], 3).unwrap();
    assert!(out.clicks.is_empty());
    assert_eq!(out.final_state.counts, vec![50]);
}
