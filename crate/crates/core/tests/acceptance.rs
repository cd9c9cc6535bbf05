//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails.

use std::cell::RefCell;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use miwg::calibration::{default_reader, default_sensor_coil, default_v_threshold};
use miwg::chain::{beta_exact, beta_taylor, chain_params, empirical_decay, optimal_interval};
use miwg::coil::{loop_impedance, CoilSpec, MediumConstants};
use miwg::mutual::{mutual_conway, mutual_dipole, CouplingModel, RelativePose};
use miwg::network::{
    max_downlink_range, single_sensor_voltage, single_sensor_voltage_with_mutual, solve_exact, ArrayScenario,
    CouplingRange, LinkSolution, NodePlacement, ReaderConfig,
};
use miwg::optimizer::{feasibility_check, minimal_power, search, PowerCriterion, SearchSpec};
use miwg::sweep::sensors_to_reach;

thread_local! {
    static MISMATCHES: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Exact solve that records the power balance for the conservation check.
fn solve(s: &ArrayScenario) -> LinkSolution {
    let sol = solve_exact(s).expect("exact solve");
    MISMATCHES.with(|m| m.borrow_mut().push(sol.power_mismatch()));
    sol
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn coil(a: f64, n: u32, q: f64) -> CoilSpec {
    CoilSpec::new(a, n, q).unwrap()
}

fn uniform(reader: ReaderConfig, sensor: CoilSpec, count: usize, interval: f64) -> ArrayScenario {
    ArrayScenario::new(reader, NodePlacement::uniform(sensor, count, interval).unwrap())
}

const QS: [f64; 4] = [8.0, 16.0, 24.0, 32.0];

fn c1_oracle_identity() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let medium = MediumConstants::default();
    let (mut worst_m, mut worst_dipole) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let reader = ReaderConfig::new(
            coil(rng.gen_range(0.02..0.06), rng.gen_range(1..=10), rng.gen_range(2.0..40.0)),
            rng.gen_range(0.01..1.0),
        )
        .unwrap();
        let sensor = coil(rng.gen_range(0.01..0.05), rng.gen_range(1..=10), rng.gen_range(2.0..40.0));
        let d = rng.gen_range(0.03..0.6);
        let mut s = ArrayScenario::new(reader, vec![NodePlacement::new(sensor, d, 0.0).unwrap()]);
        // Route 1: any coupling model against the voltage formula with the solver's M.
        let auto = solve(&s);
        let closed = single_sensor_voltage_with_mutual(&reader, &sensor, auto.reader_couplings_h[0], &medium);
        worst_m = worst_m.max(rel(auto.load_voltages[0], closed));
        // Route 2: dipole coupling against the expanded distance formula.
        s.coupling = CouplingModel::Dipole;
        let dip = solve(&s);
        let expanded = single_sensor_voltage(&reader, &sensor, d, &medium).unwrap();
        worst_dipole = worst_dipole.max(rel(dip.load_voltages[0], expanded));
    }
    verdict(
        worst_m < 1e-9 && worst_dipole < 1e-9,
        format!("max rel err: with solver M {worst_m:.2e}, dipole vs expanded form {worst_dipole:.2e}"),
    )
}

fn c2_mutual_convergence() -> Verdict {
    let medium = MediumConstants::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.01, 0.025, 0.05] {
        let c = coil(a, 1, 8.0);
        for (mult, tol) in [(10.0, 0.01), (25.0, 0.001)] {
            let z = mult * a;
            let exact = mutual_conway(&c, &c, &RelativePose::coaxial(z).unwrap(), &medium).unwrap();
            let dipole = mutual_dipole(&c, &c, z, &medium).unwrap();
            let dev = rel(exact, dipole);
            pass &= dev < tol;
            parts.push(format!("a={a} {mult}a: {:.3}%", 100.0 * dev));
        }
    }
    verdict(pass, format!("{} (need <1% at 10a, <0.1% at 25a)", parts.join(", ")))
}

fn c3_single_range() -> Verdict {
    let medium = MediumConstants::default();
    let reader = default_reader();
    let v_th = default_v_threshold();
    let ranges: Vec<f64> = QS
        .iter()
        .map(|&q| max_downlink_range(&reader, &default_sensor_coil().with_quality_factor(q).unwrap(), v_th, &medium).unwrap())
        .collect();
    let increasing = ranges.windows(2).all(|w| w[1] > w[0]);
    let d32 = ranges[3];
    verdict(
        increasing && (0.09..=0.13).contains(&d32),
        format!(
            "v_th={v_th:.6} V; ranges {:?} cm",
            ranges.iter().map(|r| format!("{:.2}", 100.0 * r)).collect::<Vec<_>>()
        ),
    )
}

fn deepest_voltage(q: f64, c: f64) -> f64 {
    let sensor = default_sensor_coil().with_quality_factor(q).unwrap();
    let interval = c * sensor.radius_m() * q.cbrt();
    let sol = solve(&uniform(default_reader(), sensor, 10, interval));
    *sol.load_voltages.last().unwrap()
}

fn c4_interval_scaling() -> Verdict {
    let grid: Vec<f64> = (0..=35).map(|k| 0.5 + 0.1 * k as f64).collect();
    let spreads: Vec<f64> = grid
        .iter()
        .map(|&c| {
            let v: Vec<f64> = QS.iter().map(|&q| deepest_voltage(q, c)).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean).abs() / mean).fold(0.0, f64::max)
        })
        .collect();
    // c* is the first grid point from which the spread stays within 10% and
    // never grows again.
    let c_star = (0..grid.len()).find(|&i| {
        spreads[i..].iter().all(|&s| s <= 0.10) && spreads[i..].windows(2).all(|w| w[1] <= w[0])
    });
    let at = |c: f64| spreads[grid.iter().position(|&g| (g - c).abs() < 1e-9).unwrap()];
    let sample = format!(
        "spread c=1.0 {:.3}, 1.6 {:.4}, 2.0 {:.4}, 3.0 {:.4}, 4.0 {:.4}",
        at(1.0),
        at(1.6),
        at(2.0),
        at(3.0),
        at(4.0)
    );
    match c_star {
        Some(i) => verdict(true, format!("c*={:.1}; {sample}", grid[i])),
        None => verdict(false, format!("no c* on [0.5, 4.0]; {sample}")),
    }
}

fn power_table(radius: f64, target: f64) -> Vec<(f64, Option<f64>, f64)> {
    QS.iter()
        .map(|&q| {
            let sensor = coil(radius, 5, q);
            let interval = 0.8 * radius * q.cbrt();
            let s = uniform(default_reader(), sensor, sensors_to_reach(target, interval), interval);
            solve(&s);
            let req = minimal_power(&s, 0.01, 0.05, 1.0, PowerCriterion::Deepest, 1e-6).unwrap();
            (q, req.power_w, req.unbounded_power_w)
        })
        .collect()
}

fn power_rows_ok(rows: &[(f64, Option<f64>, f64)]) -> bool {
    let reachable: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    let in_range = reachable.iter().all(|p| (0.01..=1.0).contains(p));
    let non_increasing = reachable.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    // A reachable Q never follows an unreachable one at higher Q.
    let no_regress = rows.windows(2).all(|w| !(w[0].1.is_some() && w[1].1.is_none()));
    // Dual route: bisection against the √Pₜ scaling of the load voltages.
    let scaling_agrees = rows
        .iter()
        .all(|r| r.1.map_or(r.2 > 1.0, |p| rel(p, r.2.max(0.01)) < 1e-4));
    in_range && non_increasing && no_regress && scaling_agrees
}

fn fmt_power(rows: &[(f64, Option<f64>, f64)]) -> String {
    rows.iter()
        .map(|(q, p, u)| match p {
            Some(p) => format!("Q{q}:{p:.3}W"),
            None => format!("Q{q}:unreachable({u:.3}W)"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn c5_power_requirement() -> Verdict {
    let main = power_table(0.025, 0.8);
    let wide = power_table(0.05, 0.6);
    verdict(
        power_rows_ok(&main) && power_rows_ok(&wide),
        format!("a=0.025 @0.8 m: {}; a=0.05 @0.6 m: {}", fmt_power(&main), fmt_power(&wide)),
    )
}

fn c6_deployment() -> Verdict {
    let spec = SearchSpec::new(1.2, 0.15).unwrap();
    let template = ArrayScenario::new(default_reader(), Vec::new());
    let outcome = search(&spec, &template).unwrap();
    let corner = outcome.reported.quality_factor == 32.0
        && outcome.reported.transmit_power_w == 1.0
        && outcome.reported.radius_m == 0.05;
    let scenario = miwg::optimizer::design_scenario(&spec, &template, &outcome.reported).unwrap();
    let (all_on, sol) = feasibility_check(&scenario).unwrap();
    MISMATCHES.with(|m| m.borrow_mut().push(sol.power_mismatch()));
    let pass = outcome.feasible && corner && all_on && sol.load_voltages.len() == 8;

    // The same search with a threshold the corner design can meet.
    let mut low = template.clone();
    low.thresholds.v_threshold = 0.645;
    let sup = search(&spec, &low).unwrap();
    let sup_corner = sup.feasible
        && sup.params.is_some_and(|p| p.quality_factor == 32.0 && p.transmit_power_w == 1.0 && p.radius_m == 0.05);
    let sup_check = feasibility_check(&miwg::optimizer::design_scenario(&spec, &low, &sup.reported).unwrap())
        .unwrap()
        .0;
    verdict(
        pass,
        format!(
            "feasible={} reported=({}, {} W, {} m) after {} evaluations, min voltage {:.4} V vs v_th {:.4} V; \
             with v_th=0.645 V: feasible at corner={} confirmed={}",
            outcome.feasible,
            outcome.reported.quality_factor,
            outcome.reported.transmit_power_w,
            outcome.reported.radius_m,
            outcome.iterations,
            outcome.near_far.min_voltage_v,
            template.thresholds.v_threshold,
            sup_corner,
            sup_check
        ),
    )
}

fn c7_uplink_array() -> Verdict {
    let reader = default_reader().with_power(1.0).unwrap();
    let sensor = coil(0.05, 5, 32.0);
    let s = uniform(reader, sensor, 8, 0.15);
    let sol = solve(&s);
    let alpha_m = &sol.uplink_ratios;
    let alpha_s: Vec<f64> = s
        .sensors
        .iter()
        .map(|p| miwg::network::uplink_ratio_single(&reader, &sensor, p.depth_m()).unwrap())
        .collect();
    let deep_ok = s
        .sensors
        .iter()
        .zip(alpha_m.iter().zip(&alpha_s))
        .filter(|(p, _)| p.depth_m() >= 0.6 - 1e-9)
        .all(|(_, (m, single))| m > single);
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    verdict(
        deep_ok && dec(alpha_m) && dec(&alpha_s),
        format!(
            "deepest (1.2 m): array {:.3e} vs single {:.3e}; at 0.6 m: array {:.3e} vs single {:.3e}",
            alpha_m[7], alpha_s[7], alpha_m[3], alpha_s[3]
        ),
    )
}

fn c8_conservation() -> Verdict {
    let (count, worst) = MISMATCHES.with(|m| {
        let m = m.borrow();
        (m.len(), m.iter().copied().fold(0.0, f64::max))
    });
    verdict(
        count > 0 && worst < 1e-8,
        format!("{count} solved scenarios, max relative mismatch {worst:.2e}"),
    )
}

fn chain_ratios(range: CouplingRange) -> (f64, Vec<String>) {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for q in QS {
        let sensor = coil(0.025, 5, q);
        let d_opt = optimal_interval(&sensor, 0.5).unwrap();
        for k in [1.0, 1.2, 1.5, 2.0] {
            let mut s = uniform(default_reader(), sensor, 10, k * d_opt);
            s.range = range;
            let exact = empirical_decay(&solve(&s)).unwrap();
            let beta = chain_params(&s, 0.0).unwrap().beta.norm();
            let dev = rel(exact, beta);
            worst = worst.max(dev);
            if k == 1.0 || k == 2.0 {
                parts.push(format!("Q{q} {k}d*: {:.1}%", 100.0 * dev));
            }
        }
    }
    (worst, parts)
}

fn c9_chain_model() -> Verdict {
    let (worst_all, parts_all) = chain_ratios(CouplingRange::All);
    let (worst_adj, _) = chain_ratios(CouplingRange::Adjacent);

    let medium = MediumConstants::default();
    let mut rng = StdRng::seed_from_u64(0x5eed_0009);
    let mut taylor_ok = true;
    for _ in 0..100 {
        let c = coil(rng.gen_range(0.01..0.06), rng.gen_range(1..=10), rng.gen_range(1.0..60.0));
        let z = loop_impedance(&c, &medium);
        let ratio = rng.gen_range(1e-4..0.1);
        let gamma = rng.gen_range(0.0..2.0);
        let m = ratio * z.norm() / medium.angular_frequency();
        let exact = beta_exact(z, m, gamma, &medium).unwrap();
        let taylor = beta_taylor(z, m, gamma, &medium);
        taylor_ok &= (exact - taylor).norm() / exact.norm() < (2.0 * ratio).powi(2);
    }
    verdict(
        worst_all < 0.15 && taylor_ok,
        format!(
            "mid-chain |i(p+1)/i(p)| vs |beta|, all-pairs coupling: worst {:.1}% ({}); \
             adjacent-only coupling: worst {:.2e}; Taylor bound on 100 configs: {}",
            100.0 * worst_all,
            parts_all.join(", "),
            worst_adj,
            if taylor_ok { "holds" } else { "violated" }
        ),
    )
}

fn run_cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_miwg")).args(args).output().expect("run miwg");
    (out.status.code(), out.stdout)
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let sensors = r#""sensors": {"generator": {"coil": {"radius_m": 0.05, "turns": 5, "quality_factor": 32}, "count": 8, "interval_m": 0.15}}"#;
    let configs = [
        ("single-range", r#"{"sweep": {"range": [0.03, 0.3], "steps": 28}}"#.to_string()),
        ("interval-sweep", r#"{"sweep": {"range": [0.5, 3.0], "steps": 26}}"#.to_string()),
        ("power-requirement", r#"{"sweep": {"target_depth_m": 0.6}}"#.to_string()),
        ("uplink-compare", format!("{{{sensors}, \"reader\": {{\"coil\": {{\"radius_m\": 0.04, \"turns\": 5, \"quality_factor\": 8}}, \"transmit_power_w\": 1}}}}")),
        ("design", r#"{"search": {"total_depth_m": 0.3, "interval_m": 0.15}}"#.to_string()),
        ("defaults", "{}".to_string()),
    ];
    let mut failures = Vec::new();
    for (cmd, cfg) in &configs {
        let path = dir.path().join(format!("{cmd}.json"));
        std::fs::write(&path, cfg).unwrap();
        let p = path.to_str().unwrap();
        for fmt in ["csv", "json"] {
            let a = run_cli(&[cmd, "--config", p, "--format", fmt]);
            let b = run_cli(&[cmd, "--config", p, "--format", fmt]);
            if a.0 != Some(0) || a != b || a.1.is_empty() {
                failures.push(format!("{cmd}/{fmt} (exit {:?})", a.0));
            }
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "6 subcommands x 2 formats byte-identical across runs".to_string()
        } else {
            format!("differs or failed: {}", failures.join(", "))
        },
    )
}

#[test]
fn acceptance() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check, Duration); 10] = [
        ("1 oracle identity", c1_oracle_identity, Duration::from_secs(1)),
        ("2 mutual-inductance convergence", c2_mutual_convergence, Duration::from_secs(10)),
        ("3 single-sensor range vs Q", c3_single_range, Duration::from_secs(1)),
        ("4 interval scaling", c4_interval_scaling, Duration::from_secs(30)),
        ("5 minimal power vs Q", c5_power_requirement, Duration::from_secs(60)),
        ("6 deployment search", c6_deployment, Duration::from_secs(60)),
        ("7 array uplink ratio", c7_uplink_array, Duration::from_secs(10)),
        // Conservation must run after every other solve.
        ("9 chain model", c9_chain_model, Duration::from_secs(60)),
        ("8 power conservation", c8_conservation, Duration::from_secs(1)),
        ("10 CLI determinism", c10_determinism, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = v.pass && in_time;
        println!(
            "{} criterion {name}: {} [{:.2} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
