use jtsched_core::conic::ClarabelSolver;
use jtsched_core::exhaustive::*;
use jtsched_core::linalg::{unit, CVector};
use jtsched_core::phy::{downlink_sinr, rate, rate_targets, validate_solution, Tolerances};
use jtsched_core::scenario::draw;
use jtsched_core::zfbf::{run_algorithm3, zf_beamformers, DEFAULT_SUS_THRESHOLD};
use jtsched_core::{ChannelSet, NetworkConfig, RateTargets, C64};

fn cv(v: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))
}

#[test]
fn no_feasible_user_gives_empty_schedule() {
    let cfg = NetworkConfig::new(1, 2, 3, 0.0).unwrap().with_seed(1);
    let ch = draw(&cfg).unwrap();
    let mut t = rate_targets(&ch, &cfg);
    t.feasible = vec![false; 3];
    let (sol, rec) = run_algorithm2(&ch, &t, &cfg, &ExhaustiveSettings::default()).unwrap();
    assert_eq!(sol.num_scheduled(), 0);
    assert_eq!(sol.sum_rate, 0.0);
    assert!(rec.iter().all(|r| !r.feasible));
}

#[test]
fn dominant_user_three_way_audit() {
    let cfg = NetworkConfig::new(1, 2, 2, 5.0).unwrap();
    let h = vec![cv(&[(3.0, 0.0), (0.5, 1.0)]), cv(&[(0.2, 0.1), (-0.1, 0.3)])];
    let ch = ChannelSet::from_normalized(1, 2, h).unwrap();
    let t = rate_targets(&ch, &cfg);
    let settings = ExhaustiveSettings::default();
    let solver = ClarabelSolver::default();
    let (best, rec) = run_algorithm2(&ch, &t, &cfg, &settings).unwrap();
    assert_eq!(rec.len(), 3);

    let mut rates = Vec::new();
    for set in [vec![0], vec![1], vec![0, 1]] {
        let rate = match feasibility_socp(&set, &ch, &t, &cfg, &solver).unwrap() {
            Some(w) => fixed_set_optimize(&set, &w, &ch, &t, &cfg, &settings.sca, &solver).unwrap().map_or(0.0, |s| s.sum_rate),
            None => 0.0,
        };
        rates.push((rate, set));
    }
    let top = rates.iter().map(|r| r.0).fold(0.0, f64::max);
    assert!((best.sum_rate - top).abs() < 1e-9);
    let winner = rates.iter().find(|r| r.0 == top).unwrap();
    assert_eq!(best.scheduled_users(), winner.1);
}

#[test]
fn returned_rate_dominates_every_subset_and_gate_is_sound() {
    for seed in 0..4 {
        let cfg = NetworkConfig::new(2, 2, 5, 5.0).unwrap().with_seed(seed);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let (sol, rec) = run_algorithm2(&ch, &t, &cfg, &ExhaustiveSettings::default()).unwrap();
        let expect: usize = enumerate_subsets(5, 4).len();
        assert_eq!(rec.len(), expect);
        for r in &rec {
            assert!(sol.sum_rate >= r.sum_rate - 1e-12);
        }
        let rep = validate_solution(&sol, &ch, &t, &cfg, Tolerances::default());
        assert!(rep.is_valid(), "{:?}", rep.violations);

        // every set that passed the gate admits a valid solution
        let solver = ClarabelSolver::default();
        for r in rec.iter().filter(|r| r.feasible).take(6) {
            let w = feasibility_socp(&r.users, &ch, &t, &cfg, &solver).unwrap().unwrap();
            let s = fixed_set_optimize(&r.users, &w, &ch, &t, &cfg, &Default::default(), &solver).unwrap().unwrap();
            let rep = validate_solution(&s, &ch, &t, &cfg, Tolerances::default());
            assert!(rep.is_valid(), "{:?}: {:?}", r.users, rep.violations);
        }
    }
}

#[test]
fn exhaustive_is_not_beaten_by_zero_forcing() {
    for seed in 0..6 {
        let cfg = NetworkConfig::new(2, 1, 3, 10.0).unwrap().with_seed(seed);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let (a2, _) = run_algorithm2(&ch, &t, &cfg, &ExhaustiveSettings::default()).unwrap();
        let a3 = run_algorithm3(&ch, &t, &cfg, DEFAULT_SUS_THRESHOLD).unwrap();
        assert!(a2.sum_rate >= a3.sum_rate - 1e-5, "seed {seed}: {} < {}", a2.sum_rate, a3.sum_rate);
    }
}

/// Best sum rate over beamformers interpolating MRT and ZF per user and a
/// power grid, single BS, two users.
fn grid_oracle(h: &[CVector], budget: f64, targets: &RateTargets) -> f64 {
    let zf = zf_beamformers(&[0, 1], h).unwrap();
    let mrt: Vec<CVector> = h.iter().map(|v| unit(v).unwrap()).collect();
    let steps = 40;
    let pgrid = 200;
    let active = [true, true];
    let mut best: f64 = 0.0;
    for a in 0..=steps {
        for b in 0..=steps {
            let mix = |k: usize, s: usize| {
                let t = s as f64 / steps as f64;
                unit(&(mrt[k].scale(1.0 - t) + zf.w[k].scale(t))).unwrap()
            };
            let w = vec![mix(0, a), mix(1, b)];
            for i in 0..=pgrid {
                let p0 = budget * i as f64 / pgrid as f64;
                let p = [p0, budget - p0];
                let s0 = downlink_sinr(0, &p, &w, h, &active);
                let s1 = downlink_sinr(1, &p, &w, h, &active);
                if s0 >= targets.sinr_target[0] && s1 >= targets.sinr_target[1] {
                    best = best.max(rate(s0) + rate(s1));
                }
            }
        }
    }
    best
}

#[test]
fn two_user_fixed_set_matches_grid_search() {
    let cases = [
        vec![cv(&[(1.0, 0.2), (0.4, -0.3)]), cv(&[(0.3, 0.1), (0.9, 0.5)])],
        vec![cv(&[(0.8, 0.0), (0.6, 0.6)]), cv(&[(0.7, -0.2), (0.1, 0.9)])],
    ];
    for h in cases {
        let cfg = NetworkConfig::new(1, 2, 2, 10.0).unwrap();
        let ch = ChannelSet::from_normalized(1, 2, h.clone()).unwrap();
        let t = rate_targets(&ch, &cfg);
        let solver = ClarabelSolver::default();
        let w = feasibility_socp(&[0, 1], &ch, &t, &cfg, &solver).unwrap().unwrap();
        let sol = fixed_set_optimize(&[0, 1], &w, &ch, &t, &cfg, &Default::default(), &solver).unwrap().unwrap();
        let oracle = grid_oracle(&h, cfg.power_budgets[0], &t);
        let gap = (sol.sum_rate - oracle).abs() / oracle;
        assert!(gap <= 0.02, "optimizer {} vs grid {}", sol.sum_rate, oracle);
    }
}
