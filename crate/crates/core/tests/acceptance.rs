//! Acceptance suite: one test per criterion, each printing PASS/FAIL with
//! its wall-clock time before asserting.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use advsel_core::mechanisms::{cut_and_choose_outcome, quantile_outcome, Player};
use advsel_core::oracle::{
    optimal_samples_bruteforce, parse_decimal, random_rationals, verify_theorem1, verify_theorem2,
    verify_theorem3, verify_theorem4,
};
use advsel_core::population::samples_equivalent;
use advsel_core::rng::{DrawSource, Stream};
use advsel_core::simulation::{emit_figure_data, run_experiment, ExperimentConfig, Figure};
use advsel_core::stats::{all_stats, ks_stat, quantile_closed_forms, ExactStat, StatKind};
use advsel_core::{Population, Sample};

const SEED: u64 = 20240601;

fn report(id: u32, what: &str, ok: bool, elapsed: Duration, limit: Option<Duration>) {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    let budget = limit.map(|l| format!(" (limit {l:?})")).unwrap_or_default();
    // Written to the stream directly so the verdict shows even under output capture.
    let line = format!("criterion {id}: {verdict} — {what} [{elapsed:.2?}{budget}]\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {id} failed: {what}");
    assert!(in_time, "criterion {id} exceeded its time budget: {elapsed:?}");
}

fn q(s: &str) -> ExactStat {
    s.parse().unwrap()
}

/// (n, k, m) with n = (2m+1)k, k ≤ 5, m ≤ 4.
fn closed_form_grid() -> Vec<(usize, usize, usize)> {
    let mut g = Vec::new();
    for k in 1..=5 {
        for m in 0..=4 {
            g.push(((2 * m + 1) * k, k, m));
        }
    }
    g
}

#[test]
fn criterion_1_quantile_closed_forms() {
    let t = Instant::now();
    let pop = Population::strict(972).unwrap();
    let out = quantile_outcome(&pop, 12, 40, Player::PlayerI).unwrap();
    let expected: Vec<usize> = (0..12).map(|j| 41 + 81 * j).collect();
    let mut ok = out.positions() == expected.as_slice();
    ok &= ks_stat(&pop, &out.sample).unwrap() == q("10/243");
    for (n, k, m) in closed_form_grid() {
        let pop = Population::strict(n).unwrap();
        for cutter in [Player::PlayerI, Player::PlayerII] {
            let s = quantile_outcome(&pop, k, m, cutter).unwrap().sample;
            let st = all_stats(&pop, &s).unwrap();
            let cf = quantile_closed_forms(n, k, m).unwrap();
            ok &= st.ks == ExactStat::new(m as u64, n as u64);
            ok &= st.l1 == ExactStat::new((m * (m + 1)) as u64, (n * (2 * m + 1)) as u64);
            ok &= st.ks == cf.ks && st.l1 == cf.l1 && st.cvm == cf.cvm;
        }
    }
    report(1, "quantile positions, KS = m/n and L1 closed forms", ok, t.elapsed(), Some(Duration::from_secs(1)));
}

/// Random weak order with contiguous levels on a quantile-shaped size.
fn random_weak_population(rng: &mut Stream) -> (Population, usize) {
    let shapes: Vec<(usize, usize)> = (1..=16)
        .flat_map(|n| (1..=n).map(move |k| (n, k)))
        .filter(|&(n, k)| n % k == 0 && (n / k) % 2 == 1)
        .collect();
    let (n, k) = shapes[rng.index(shapes.len())];
    let top = 1 + rng.index(n);
    let raw: Vec<usize> = (0..n).map(|_| rng.index(top)).collect();
    let mut used = raw.clone();
    used.sort_unstable();
    used.dedup();
    let levels: Vec<u32> = raw
        .iter()
        .map(|v| used.binary_search(v).unwrap() as u32 + 1)
        .collect();
    (Population::from_levels(&levels).unwrap(), k)
}

#[test]
fn criterion_2_theorem1_brute_force() {
    let t = Instant::now();
    let mut ok = true;
    for (n, k, m) in [(3, 1, 1), (9, 3, 1), (15, 3, 2), (10, 2, 2)] {
        let r = verify_theorem1(&Population::strict(n).unwrap(), k).unwrap();
        assert_eq!(r.m, m);
        ok &= r.passed && r.closed_forms_match == Some(true);
        for rep in &r.reports {
            ok &= rep.runner_up.as_ref().is_none_or(|s| s > &rep.minimum);
        }
    }
    let mut weak_cases = 0;
    for i in 0..100 {
        let mut rng = Stream::derive(SEED, "criterion2", i);
        let (pop, k) = random_weak_population(&mut rng);
        let r = verify_theorem1(&pop, k).unwrap();
        for rep in &r.reports {
            let qs = rep.quantile_sample.as_ref().unwrap();
            // Minimizer set = equivalence class of the quantile sample.
            ok &= rep
                .minimizers
                .iter()
                .all(|s| samples_equivalent(&pop, s, qs).unwrap());
            ok &= rep.minimizers.contains(qs);
            // Everything else is strictly worse.
            ok &= rep.runner_up.as_ref().is_none_or(|s| s > &rep.minimum);
        }
        ok &= r.passed;
        weak_cases += 1;
    }
    assert_eq!(weak_cases, 100);
    report(2, "quantile sample is the unique minimizer up to equivalence (KS, L1, CvM)", ok, t.elapsed(), Some(Duration::from_secs(30)));
}

#[test]
fn criterion_3_cvm_ground_truth() {
    let t = Instant::now();
    let mut ok = true;
    for (n, k, m) in closed_form_grid() {
        let pop = Population::strict(n).unwrap();
        let r = optimal_samples_bruteforce(&pop, k, StatKind::Cvm).unwrap();
        let expected = ExactStat::new((m * (m + 1)) as u64, (3 * n * n) as u64);
        ok &= r.minimum == expected;
        ok &= r.quantile_sample_is_unique_minimizer_up_to_equivalence == Some(true);
    }
    // The verification report carries the printed variant and flags it.
    for (n, k) in [(9, 3), (15, 3), (10, 2), (25, 5)] {
        let r = verify_theorem1(&Population::strict(n).unwrap(), k).unwrap();
        let v = r
            .printed_variants
            .iter()
            .find(|v| v.stat == StatKind::Cvm)
            .unwrap();
        println!(
            "  n={n} k={k}: CvM minimum {} vs printed {} {} -> consistent: {}",
            v.brute_force, v.formula, v.printed, v.consistent
        );
        ok &= !v.consistent;
    }
    report(3, "CvM minima equal m(m+1)/(3n^2); printed 2m(m+1)/n^2 flagged inconsistent", ok, t.elapsed(), None);
}

#[test]
fn criterion_4_symmetry_and_equal_blocks() {
    let t = Instant::now();
    let mut ok = true;
    for (n, k, m) in (1..=45usize)
        .flat_map(|k| (0..=22usize).map(move |m| ((2 * m + 1) * k, k, m)))
        .filter(|&(n, _, _)| n <= 45)
    {
        let pop = Population::strict(n).unwrap();
        let a = quantile_outcome(&pop, k, m, Player::PlayerI).unwrap().sample;
        let b = quantile_outcome(&pop, k, m, Player::PlayerII).unwrap().sample;
        ok &= samples_equivalent(&pop, &a, &b).unwrap();
        for cutter in [Player::PlayerI, Player::PlayerII] {
            let s = cut_and_choose_outcome(&pop, &vec![2 * m + 1; k], cutter).unwrap().sample;
            ok &= ks_stat(&pop, &s).unwrap() == ExactStat::new((2 * m) as u64, n as u64);
        }
    }
    report(4, "cutter symmetry and equal-block KS = 2m/n", ok, t.elapsed(), None);
}

#[test]
fn criterion_5_theorem2() {
    let t = Instant::now();
    let r = verify_theorem2(100, 12, SEED).unwrap();
    report(5, "implement_quantiles reproduces 100 random target vectors", r.passed && r.trials == 100, t.elapsed(), Some(Duration::from_secs(5)));
}

#[test]
fn criterion_6_theorem3() {
    let t = Instant::now();
    let r = verify_theorem3(6, &[2, 3], 200, SEED).unwrap();
    println!("  cases checked: {}, violations: {}", r.cases_checked, r.violations.len());
    let ok = r.passed && r.cases_checked == 400;
    report(6, "cutter utility >= benchmark and chooser CDF dominance, both cutters", ok, t.elapsed(), Some(Duration::from_secs(60)));
}

#[test]
fn criterion_7_theorem4() {
    let t = Instant::now();
    let mut ok = true;
    for (k, m, seed) in [(2, 4, SEED), (3, 3, SEED), (2, 4, SEED + 1), (3, 3, SEED + 1)] {
        let values = random_rationals(seed, k * m);
        let r = verify_theorem4(&values, k, m).unwrap();
        println!(
            "  n={} k={k} m={m}: {} partitions, mean invariant {}, routes agree {}, directional claim holds {}",
            k * m,
            r.partitions_checked,
            r.mean_invariant,
            r.routes_agree,
            r.directional_claim_holds
        );
        ok &= r.passed && r.route_a_skipped == 0;
    }
    // Values given as decimal strings are parsed exactly.
    let decimals: Vec<_> = ["0.1", "-2.75", "3.3", "1e-2", "4", "0.125", "-0.5", "2.2"]
        .iter()
        .map(|s| parse_decimal(s).unwrap())
        .collect();
    ok &= verify_theorem4(&decimals, 2, 4).unwrap().passed;

    let one_to_four: Vec<_> = ["1", "2", "3", "4"].iter().map(|s| parse_decimal(s).unwrap()).collect();
    let r = verify_theorem4(&one_to_four, 2, 2).unwrap();
    println!(
        "  values {{1,2,3,4}}: ordered E[var] = {}, optimum {} at {:?}; directional claim holds: {} (reported, not gated)",
        r.minimize_expected_variance.ordered_partition_value,
        r.minimize_expected_variance.optimum,
        r.minimize_expected_variance.optimal_partitions,
        r.directional_claim_holds
    );
    ok &= r.minimize_expected_variance.ordered_partition_value == q("9/8");
    ok &= r.minimize_expected_variance.optimum == q("5/8");
    report(7, "mean invariance and moment identity on all partitions", ok, t.elapsed(), Some(Duration::from_secs(60)));
}

fn figure2_files(dir: &Path, seed: u64, reps: usize) -> Vec<u8> {
    let config = ExperimentConfig::figure2(seed, reps, true);
    let (pop, res) = run_experiment(&config).unwrap();
    let f1 = dir.join("fig1.csv");
    let f2 = dir.join("fig2.csv");
    emit_figure_data(&pop, &res.records, Figure::Fig1, &f1).unwrap();
    let paths = emit_figure_data(&pop, &res.records, Figure::Fig2, &f2).unwrap();
    let mut bytes = fs::read(&f1).unwrap();
    for p in paths {
        bytes.extend(fs::read(p).unwrap());
    }
    bytes.extend(serde_json::to_vec(&res).unwrap());
    bytes
}

#[test]
fn criterion_8_figure2_reproduction() {
    let t = Instant::now();
    let config = ExperimentConfig::figure2(SEED, 1000, true);
    let (pop, res) = run_experiment(&config).unwrap();
    let target = q("10/243");
    let ks_of = |id: &str| -> Vec<&ExactStat> {
        res.records.iter().filter(|r| r.mechanism == id).map(|r| &r.ks).collect()
    };
    let mean = |v: &[&ExactStat]| v.iter().map(|x| x.to_f64()).sum::<f64>() / v.len() as f64;
    let quantile = ks_of("quantile");
    let random = ks_of("random");
    let a = quantile.len() == 1000 && quantile.iter().all(|&k| k == &target);
    let min_random = random.iter().min().unwrap();
    let b = &target < *min_random;
    let cal = res.calibration.as_ref().unwrap();
    let gap = (cal.mean_ks_at_n_star.to_f64() - target.to_f64()).abs();
    let c = (180..=400).contains(&cal.n_star) && gap <= 0.002;
    println!("  (a) quantile KS constant {}: {a}", target.to_decimal(6));
    println!("  (b) min random KS {} > quantile KS: {b}", min_random.to_decimal(6));
    println!(
        "  (c) n* = {} with mean KS {} (|gap| = {gap:.5}): {c}",
        cal.n_star,
        cal.mean_ks_at_n_star.to_decimal(6)
    );
    let (m_rand, m_med, m_strike, m_star) = (
        mean(&random),
        mean(&ks_of("median_sample")),
        mean(&ks_of("strike_and_replace")),
        mean(&ks_of("random_n_star")),
    );
    println!(
        "  mean KS: random {m_rand:.4}, median_sample {m_med:.4}, strike_and_replace {m_strike:.4}, random n* {m_star:.4}"
    );
    let ordering = m_med < m_rand && (0.20..=0.30).contains(&m_rand);
    // Records always match recomputation from their positions.
    let consistent = res.records.iter().step_by(97).all(|r| {
        let s = Sample::new(r.positions.clone(), pop.n()).unwrap();
        all_stats(&pop, &s).unwrap().ks == r.ks
    });
    report(8, "quantile KS constant, below every random draw, calibrated n* in band", a && b && c && ordering && consistent, t.elapsed(), Some(Duration::from_secs(300)));
}

#[test]
fn criterion_9_determinism_across_thread_counts() {
    let t = Instant::now();
    let run = |threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        pool.install(|| {
            let mut bytes = figure2_files(dir.path(), SEED, 200);
            let pop = Population::strict(15).unwrap();
            bytes.extend(serde_json::to_vec(&verify_theorem1(&pop, 3).unwrap()).unwrap());
            bytes.extend(serde_json::to_vec(&verify_theorem3(6, &[2, 3], 50, SEED).unwrap()).unwrap());
            bytes
        })
    };
    let one = run(1);
    let four = run(4);
    let eight = run(8);
    let ok = one == four && four == eight && !one.is_empty();
    report(9, "bit-identical outputs with 1, 4 and 8 worker threads", ok, t.elapsed(), None);
}
