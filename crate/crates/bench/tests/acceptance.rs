//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Runs as a plain binary (no libtest
//! harness) so the report is visible in `cargo test` output.

use std::process::ExitCode;
use std::time::Instant;

use jtsched_bench::*;
use jtsched_core::duality::{downlink_power_from_uplink, mmse_beamformers, uplink_power_from_downlink, BsWeights};
use jtsched_core::exhaustive::{enumerate_subsets, run_algorithm2, ExhaustiveSettings};
use jtsched_core::linalg::CVector;
use jtsched_core::phy::{rate_targets, validate_solution, Tolerances};
use jtsched_core::sca::surrogate::{penalty_convex, penalty_convex_grad, penalty_lin};
use jtsched_core::sca::{run_algorithm1, Gains, ScaSettings};
use jtsched_core::scenario::draw;
use jtsched_core::zfbf::{fits_budgets, min_qos_power, run_algorithm3, sus_orthogonalize, sus_select, zf_beamformers, zf_power_allocation, DEFAULT_SUS_THRESHOLD};
use jtsched_core::{NetworkConfig, ScheduleSolution, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// `|h^H w|²` written out term by term.
fn gain_oracle(h: &CVector, w: &CVector) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..h.len() {
        acc += h[i].conj() * w[i];
    }
    acc.norm_sqr()
}

/// `Σ_b λ_b ‖Q_b w‖²` from the antenna blocks.
fn weighted_energy(w: &CVector, lambda: &[f64], nt: usize) -> f64 {
    lambda
        .iter()
        .enumerate()
        .map(|(b, l)| l * (b * nt..(b + 1) * nt).map(|i| w[i].norm_sqr()).sum::<f64>())
        .sum()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn duality_instances() -> Vec<(Vec<CVector>, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|_| {
            let h: Vec<CVector> = (0..2).map(|_| random_cvec(&mut rng, 4)).collect();
            let q: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..3.0)).collect();
            let lambda: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..2.0)).collect();
            (h, q, lambda)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let set = [0, 1];
    let (mut sinr_err, mut power_err) = (0.0f64, 0.0f64);
    for (h, q, lambda) in duality_instances() {
        let weights = BsWeights::new(lambda.clone(), 2).unwrap();
        let w = mmse_beamformers(&set, &q, &h, &weights).unwrap();
        let p = downlink_power_from_uplink(&set, &q, &w, &h, &weights).unwrap();
        for k in 0..2 {
            let up = q[k] * gain_oracle(&h[k], &w[k]) / (q[1 - k] * gain_oracle(&h[1 - k], &w[k]) + weighted_energy(&w[k], &lambda, 2));
            let down = p[k] * gain_oracle(&h[k], &w[k]) / (p[1 - k] * gain_oracle(&h[k], &w[1 - k]) + 1.0);
            sinr_err = sinr_err.max(rel(down, up));
        }
        let weighted: f64 = (0..2).map(|k| p[k] * weighted_energy(&w[k], &lambda, 2)).sum();
        power_err = power_err.max(rel(weighted, q.iter().sum()));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        sinr_err <= 1e-6 && power_err <= 1e-8 && secs < 10.0,
        format!("100 instances: max SINR gap {sinr_err:.2e} (tol 1e-6), max power identity gap {power_err:.2e} (tol 1e-8), {secs:.2} s (limit 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let set = [0, 1];
    let mut worst = 0.0f64;
    for (h, q, lambda) in duality_instances() {
        let weights = BsWeights::new(lambda, 2).unwrap();
        let w = mmse_beamformers(&set, &q, &h, &weights).unwrap();
        let p = downlink_power_from_uplink(&set, &q, &w, &h, &weights).unwrap();
        let back = uplink_power_from_downlink(&set, &p, &w, &h, &weights).unwrap();
        for k in 0..2 {
            worst = worst.max((back[k] - q[k]).abs() / q[k]);
        }
    }
    outcome(worst <= 1e-6, format!("100 instances: max relative error of q after the round trip {worst:.2e} (tol 1e-6)"))
}

/// The 30 logged Algorithm-1 runs shared by criteria 3 and 6.
fn logged_runs() -> Vec<(NetworkConfig, ScheduleSolution)> {
    (0..30)
        .map(|seed| {
            let cfg = NetworkConfig::new(3, 2, 6, 0.0).unwrap().with_seed(1000 + seed);
            let ch = draw(&cfg).unwrap();
            let t = rate_targets(&ch, &cfg);
            let sol = run_algorithm1(&ch, &t, &cfg, &ScaSettings::default()).unwrap();
            (cfg, sol)
        })
        .collect()
}

fn criterion_3(runs: &[(NetworkConfig, ScheduleSolution)]) -> Outcome {
    let worst = runs.iter().map(|(cfg, s)| s.unscheduled_power / cfg.total_budget()).fold(0.0, f64::max);
    let rounded_out: usize = runs.iter().map(|(_, s)| s.relaxed_mask.iter().filter(|&&m| m > 0.0 && m < 0.5).count()).sum();
    outcome(
        worst <= 1e-4,
        format!("30 runs: max unscheduled power / total budget {worst:.2e} (tol 1e-4); users with fractional mask below 0.5: {rounded_out}"),
    )
}

fn criterion_6(runs: &[(NetworkConfig, ScheduleSolution)]) -> Outcome {
    // Descent: between penalty-weight updates ζ may not rise; an update from
    // τ to τ' can raise it by at most (τ' − τ)·Σ(μ − μ²) of the previous iterate.
    let (mut steps, mut worst) = (0usize, f64::NEG_INFINITY);
    for (_, sol) in runs {
        for pair in sol.trace.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if (a.outer, a.middle) != (b.outer, b.middle) {
                continue;
            }
            steps += 1;
            worst = worst.max(b.zeta - (a.zeta + (b.tau - a.tau) * a.penalty));
        }
    }

    // Anchors and gradient on random points.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut anchor_err, mut grad_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = 4;
        let h: Vec<CVector> = (0..n).map(|_| random_cvec(&mut rng, 6)).collect();
        let w: Vec<CVector> = (0..n).map(|_| random_cvec(&mut rng, 6).normalize()).collect();
        let lambda: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
        let users: Vec<usize> = (0..n).collect();
        let g = Gains::new(&users, &w, &h, &BsWeights::new(lambda, 2).unwrap());
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let theta = rng.random_range(0.0..5.0);
        let mu = rng.random_range(0.0..1.0);
        let target = rng.random_range(0.1..4.0);
        for i in 0..n {
            let f = g.phi(i, theta, &q);
            anchor_err = anchor_err.max(rel(g.phi_lin(i, (theta, &q), theta, &q), f));
            let f = g.phi_tilde(i, target, mu, &q);
            anchor_err = anchor_err.max(rel(g.phi_tilde_lin(i, target, (mu, &q), mu, &q), f));
        }
        let kappa: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let mus: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let tau = rng.random_range(0.01..5.0);
        let f = penalty_convex(&kappa, &mus, tau);
        anchor_err = anchor_err.max(rel(penalty_lin((&kappa, &mus), tau, &kappa, &mus), f));

        let (gk, gm) = penalty_convex_grad(&kappa, &mus, tau);
        let hstep = 1e-5;
        for i in 0..n {
            let mut kp = kappa.clone();
            let mut km = kappa.clone();
            kp[i] += hstep;
            km[i] -= hstep;
            let fd = (penalty_convex(&kp, &mus, tau) - penalty_convex(&km, &mus, tau)) / (2.0 * hstep);
            grad_err = grad_err.max(rel(fd, gk[i]));
            let mut mp = mus.clone();
            let mut mm = mus.clone();
            mp[i] += hstep;
            mm[i] -= hstep;
            let fd = (penalty_convex(&kappa, &mp, tau) - penalty_convex(&kappa, &mm, tau)) / (2.0 * hstep);
            grad_err = grad_err.max(rel(fd, gm[i]));
        }
    }
    outcome(
        worst <= 1e-7 && anchor_err <= 1e-10 && grad_err <= 1e-6,
        format!(
            "{steps} inner steps over 30 runs: max rise above the descent bound {worst:.2e} (tol 1e-7); \
             anchor gap {anchor_err:.2e} (tol 1e-10); gradient gap {grad_err:.2e} (tol 1e-6)"
        ),
    )
}

fn small_spec(name: &str, axis: &str, values: &str, algorithms: &str, trials: usize, network: &str) -> ExperimentSpec {
    let text = format!(
        "name = \"{name}\"\naxis = \"{axis}\"\nvalues = {values}\nalgorithms = {algorithms}\ntrials = {trials}\nbase_seed = 20240601\n\n[network]\n{network}\n"
    );
    ExperimentSpec::from_toml(&text).unwrap()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let spec = small_spec("gap", "users", "[3]", "[\"alg1\", \"alg2\", \"alg3\"]", 20, "num_bs = 2\nantennas_per_bs = 1\nnum_users = 3\nsnr_db = 0.0");
    let records = run_experiment(&spec).unwrap();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let summary = Summary::new(&records, Some(&spec));
    let mean = |a| summary.row(a, 3.0).and_then(|r| r.mean_sum_rate).unwrap_or(0.0);
    let (a1, a2, a3) = (mean(Algorithm::Alg1), mean(Algorithm::Alg2), mean(Algorithm::Alg3));
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..spec.trials {
        let get = |alg| records.iter().find(|r| r.trial == trial && r.algorithm == alg).unwrap().sum_rate;
        worst = worst.max(get(Algorithm::Alg3) - get(Algorithm::Alg2));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failed == 0 && a1 >= 0.9 * a2 && worst <= 1e-5 && secs < 600.0,
        format!(
            "20 trials: mean alg1 {a1:.4}, alg2 {a2:.4}, alg3 {a3:.4}; alg1/alg2 {:.4} (min 0.9); \
             max alg3 - alg2 {worst:.2e} (tol 1e-5); {failed} failed runs; {secs:.1} s (limit 600 s)",
            a1 / a2
        ),
    )
}

fn criterion_5() -> Outcome {
    let tol = Tolerances { qos: 1e-4, power: 1e-6, unit_norm: 1e-12 };
    let snrs = [0.0, 5.0, 10.0, 15.0, 20.0];
    let (mut checked, mut bad) = (0usize, Vec::new());
    for seed in 0..50u64 {
        let cfg = NetworkConfig::new(2, 2, 5, snrs[seed as usize % snrs.len()]).unwrap().with_seed(500 + seed);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let sols = [
            ("alg1", run_algorithm1(&ch, &t, &cfg, &ScaSettings::default())),
            ("alg2", run_algorithm2(&ch, &t, &cfg, &ExhaustiveSettings::default()).map(|r| r.0)),
            ("alg3", run_algorithm3(&ch, &t, &cfg, DEFAULT_SUS_THRESHOLD)),
        ];
        for (name, sol) in sols {
            checked += 1;
            match sol {
                Ok(s) => {
                    let rep = validate_solution(&s, &ch, &t, &cfg, tol);
                    if !rep.is_valid() {
                        bad.push(format!("{name} seed {seed}: {:?}", rep.violations));
                    }
                }
                Err(e) => bad.push(format!("{name} seed {seed}: {e}")),
            }
        }
    }
    let first = bad.first().cloned().unwrap_or_default();
    outcome(
        bad.is_empty(),
        format!("{checked} solutions on 50 instances (B=2, Nt=2, K=5, SNR 0 to 20 dB): {} invalid {first}", bad.len()),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut cross, mut corr_viol, mut kkt_gain, mut sets) = (0.0f64, 0usize, f64::NEG_INFINITY, 0usize);
    let objective = |omega: &[f64], p: &[f64]| p.iter().zip(omega).map(|(x, w)| (1.0 + x / w).log2()).sum::<f64>();
    for seed in 0..30u64 {
        let cfg = NetworkConfig::new(3, 2, 12, [0.0, 10.0, 20.0][seed as usize % 3]).unwrap().with_seed(700 + seed);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let h = &ch.normalized;
        let sel = sus_select(&ch, &t, &cfg, DEFAULT_SUS_THRESHOLD).unwrap();
        if sel.is_empty() {
            continue;
        }
        sets += 1;
        let mut basis: Vec<CVector> = Vec::new();
        for &k in &sel {
            for g in &basis {
                let c = gain_oracle(&h[k], g).sqrt() / (h[k].norm() * g.norm());
                if c >= DEFAULT_SUS_THRESHOLD {
                    corr_viol += 1;
                }
            }
            basis.push(sus_orthogonalize(&h[k], &basis));
        }
        let zf = zf_beamformers(&sel, h).unwrap();
        for (i, &k) in zf.users.iter().enumerate() {
            for (j, w) in zf.w.iter().enumerate() {
                if i != j {
                    cross = cross.max(gain_oracle(&h[k], w).sqrt());
                }
            }
        }
        let floor = min_qos_power(&zf, &t);
        let p = zf_power_allocation(&zf, &floor, &cfg).unwrap();
        let best = objective(&zf.col_norm_sq, &p);
        for i in 0..p.len() {
            for sign in [-1.0, 1.0] {
                let mut x = p.clone();
                x[i] += sign * 1e-4;
                if x.iter().zip(&floor).all(|(a, f)| a >= f) && fits_budgets(&zf, &x, &cfg) {
                    kkt_gain = kkt_gain.max(objective(&zf.col_norm_sq, &x) - best);
                }
            }
            // move power between pairs of users
            let j = rng.random_range(0..p.len());
            if j != i {
                let mut x = p.clone();
                x[i] += 1e-4;
                x[j] -= 1e-4;
                if x.iter().zip(&floor).all(|(a, f)| a >= f) && fits_budgets(&zf, &x, &cfg) {
                    kkt_gain = kkt_gain.max(objective(&zf.col_norm_sq, &x) - best);
                }
            }
        }
    }
    let kkt_gain = kkt_gain.max(0.0);
    outcome(
        cross <= 1e-8 && corr_viol == 0 && kkt_gain <= 1e-6,
        format!(
            "{sets} selections (B=3, Nt=2, K=12): max cross gain {cross:.2e} (tol 1e-8); \
             correlation violations {corr_viol}; best feasible 1e-4 perturbation gain {kkt_gain:.2e} (tol 1e-6)"
        ),
    )
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn means(summary: &Summary, alg: Algorithm, values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| summary.row(alg, v).and_then(|r| r.mean_sum_rate).unwrap_or(f64::NAN)).collect()
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" -> ")
}

fn sweep(spec: &ExperimentSpec) -> (Summary, usize) {
    let records = run_experiment(spec).unwrap();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    (Summary::new(&records, Some(spec)), failed)
}

fn criterion_8() -> Vec<(String, Outcome)> {
    let start = Instant::now();
    let mut out = Vec::new();

    let spec = small_spec("users", "users", "[4, 8, 12]", "[\"alg1\", \"alg3\"]", 50, "num_bs = 3\nantennas_per_bs = 4\nnum_users = 4\nsnr_db = 0.0");
    let (s, failed) = sweep(&spec);
    let (m1, m3) = (means(&s, Algorithm::Alg1, &spec.values), means(&s, Algorithm::Alg3, &spec.values));
    out.push((
        "8a sum rate vs K".to_string(),
        outcome(failed == 0 && non_decreasing(&m1), format!("alg1 {} (alg3 {}); {failed} failed runs", fmt(&m1), fmt(&m3))),
    ));

    let spec = small_spec("snr", "snr", "[0, 10, 20]", "[\"alg1\", \"alg3\"]", 50, "num_bs = 3\nantennas_per_bs = 2\nnum_users = 8");
    let (s, failed) = sweep(&spec);
    let (m1, m3) = (means(&s, Algorithm::Alg1, &spec.values), means(&s, Algorithm::Alg3, &spec.values));
    out.push((
        "8b sum rate vs SNR".to_string(),
        outcome(failed == 0 && non_decreasing(&m1), format!("alg1 {} (alg3 {}); {failed} failed runs", fmt(&m1), fmt(&m3))),
    ));
    let se = |a| s.row(a, 20.0).and_then(|r| r.stderr_sum_rate).unwrap_or(f64::NAN);
    out.push((
        "8c alg1 vs alg3 at 20 dB".to_string(),
        outcome(
            m1[2] >= m3[2],
            format!("alg1 {:.3} (se {:.3}) vs alg3 {:.3} (se {:.3})", m1[2], se(Algorithm::Alg1), m3[2], se(Algorithm::Alg3)),
        ),
    ));

    let spec = small_spec("antennas", "antennas", "[2, 4, 8]", "[\"alg1\", \"alg3\"]", 50, "num_bs = 3\nantennas_per_bs = 2\nnum_users = 12\nsnr_db = 0.0");
    let (s, failed) = sweep(&spec);
    let (m1, m3) = (means(&s, Algorithm::Alg1, &spec.values), means(&s, Algorithm::Alg3, &spec.values));
    out.push((
        "8d sum rate vs Nt".to_string(),
        outcome(failed == 0 && non_decreasing(&m1), format!("alg1 {} (alg3 {}); {failed} failed runs", fmt(&m1), fmt(&m3))),
    ));

    let mut spec = small_spec("runtime", "users", "[8]", "[\"alg1\", \"alg2\", \"alg3\"]", 3, "num_bs = 3\nantennas_per_bs = 2\nnum_users = 8\nsnr_db = 0.0");
    spec.record_timing = true;
    let (s, failed) = sweep(&spec);
    let t = |a| s.row(a, 8.0).and_then(|r| r.mean_runtime_seconds).unwrap_or(f64::NAN);
    let (t1, t2, t3) = (t(Algorithm::Alg1), t(Algorithm::Alg2), t(Algorithm::Alg3));
    out.push((
        "8e runtime at K=8".to_string(),
        outcome(failed == 0 && t2 > t1 && t2 > t3, format!("3 trials: mean seconds alg1 {t1:.3}, alg2 {t2:.3}, alg3 {t3:.5}")),
    ));

    let secs = start.elapsed().as_secs_f64();
    out.push(("8f sweep budget".to_string(), outcome(secs < 3600.0, format!("all sweeps {secs:.0} s (limit 3600 s)"))));
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    // multiplicative formula on exact integers
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn criterion_9() -> Outcome {
    let cases = [(4usize, 4usize, 15usize), (5, 2, 15), (6, 4, 56)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, limit, expect) in cases {
        let oracle: u64 = (1..=limit.min(k) as u64).map(|s| binomial(k as u64, s)).sum();
        let got = enumerate_subsets(k, limit).len();
        pass &= got == expect && oracle as usize == expect;
        parts.push(format!("(K={k}, B*Nt={limit}) {got} (expected {expect})"));
    }
    outcome(pass, parts.join(", "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut report = |name: &str, o: Outcome| {
        println!("criterion {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name.to_string(), o));
    };
    report("1 duality identity", criterion_1());
    report("2 power mapping round trip", criterion_2());
    let runs = logged_runs();
    report("3 rounded-out users carry no power", criterion_3(&runs));
    report("4 optimality gap", criterion_4());
    report("5 constraint satisfaction", criterion_5());
    report("6 penalized SCA mechanics", criterion_6(&runs));
    report("7 zero-forcing and user selection", criterion_7());
    for (name, o) in criterion_8() {
        report(&name, o);
    }
    report("9 enumeration audit", criterion_9());

    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0.as_str()).collect();
    println!("acceptance: {} of {} passed in {:.0} s", results.len() - failed.len(), results.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
