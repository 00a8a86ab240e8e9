//! Acceptance battery. Every test writes one `PASS`/`FAIL` line to stderr,
//! outside the test harness capture, then asserts its verdict.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rwrs_core::estimators::{
    confinement_probability, empirical_law, enumerate_exact, fit_exponent, lower_bound_return_chain,
    spectral_gap, splitting_tail, weighted_sum_tail, ConfinementMethod, Functional, SmcParams, SplittingParams,
    TailEstimate, Transform,
};
use rwrs_core::experiments::{execute, ExperimentConfig};
use rwrs_core::exponents::{boundary_continuity, classify, Region, RegionTag};
use rwrs_core::green::green_constants;
use rwrs_core::lattice::{local_times, local_times_streaming, simulate_walk, Trajectory};
use rwrs_core::scenery::SceneryModel;
use rwrs_core::silt::{
    coincidence_pairs_sorted, dyadic_decompose, interpolation_check, intersection_truncation_bound, silt,
    two_walk_intersection,
};
use rwrs_core::PhasePoint;

fn report(id: &str, pass: bool, started: Instant, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("{verdict} {id} ({:.1}s) {detail}\n", started.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{id} failed: {detail}");
}

fn sites(t: &Trajectory) -> Vec<Vec<i64>> {
    let mut pos = vec![0i64; t.dim()];
    let mut out = Vec::with_capacity(t.steps() + 1);
    out.push(pos.clone());
    for m in t.moves() {
        pos[m.axis()] += m.delta() as i64;
        out.push(pos.clone());
    }
    out
}

fn occupation<'a, I: IntoIterator<Item = &'a Vec<i64>>>(path: I) -> FxHashMap<Vec<i64>, u64> {
    let mut l = FxHashMap::default();
    for x in path {
        *l.entry(x.clone()).or_insert(0) += 1;
    }
    l
}

fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

fn pairs_by_scan(path: &[Vec<i64>]) -> u64 {
    let mut total = 0;
    for i in 0..path.len() {
        for j in i + 1..path.len() {
            total += (path[i] == path[j]) as u64;
        }
    }
    total
}

fn pairs_by_sort(path: &[Vec<i64>]) -> u64 {
    let mut v = path.to_vec();
    v.sort_unstable();
    let mut total = 0;
    let mut run = 1u64;
    for w in v.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += pairs(run);
            run = 1;
        }
    }
    total + pairs(run)
}

#[test]
fn ac01_silt_identity() {
    let started = Instant::now();
    let mut violations = 0;
    let mut checked = 0;
    for d in [3usize, 5] {
        for n in [100usize, 10_000] {
            for i in 0..250u64 {
                let t = simulate_walk(d, n, 1000 * d as u64 + i + n as u64 * 7).unwrap();
                let path = sites(&t);
                let l = occupation(&path);
                let squares: u64 = l.values().map(|c| c * c).sum();
                let coincidences = if n <= 100 { pairs_by_scan(&path) } else { pairs_by_sort(&path) };
                let lib_field = local_times(&t);
                let ok = squares == n as u64 + 1 + 2 * coincidences
                    && silt(&lib_field) == squares
                    && coincidence_pairs_sorted(&t) == coincidences;
                violations += (!ok) as u32;
                checked += 1;
            }
        }
    }
    let pass = violations == 0 && checked == 1000 && started.elapsed().as_secs() < 60;
    report("AC1", pass, started, format!("silt identity: {violations} violations on {checked} trajectories"));
}

#[derive(Default)]
struct Laws {
    silt: BTreeMap<u64, u64>,
    level: BTreeMap<u64, u64>,
    z0: BTreeMap<u64, u64>,
}

/// Every path of `n` steps in dimension `d`, by odometer over the move codes.
fn enumerate_laws(d: usize, n: usize, b_low: f64, b_high: f64, b_z0: f64) -> Laws {
    let nf = n as f64;
    let (lo, hi, tau) = (nf.powf(b_low), nf.powf(b_high), nf.powf(b_z0));
    let mut laws = Laws::default();
    let total = (2 * d).pow(n as u32);
    let mut pos = vec![vec![0i64; d]; n + 1];
    for code in 0..total {
        let mut c = code;
        for k in 0..n {
            let mv = c % (2 * d);
            c /= 2 * d;
            pos[k + 1] = pos[k].clone();
            pos[k + 1][mv / 2] += if mv % 2 == 0 { 1 } else { -1 };
        }
        let mut counts: Vec<(&Vec<i64>, u64)> = Vec::with_capacity(n + 1);
        for x in &pos {
            match counts.iter_mut().find(|(y, _)| *y == x) {
                Some(e) => e.1 += 1,
                None => counts.push((x, 1)),
            }
        }
        let s: u64 = counts.iter().map(|(_, c)| c * c).sum();
        let level = counts
            .iter()
            .filter(|(_, c)| *c as f64 >= lo && (b_high >= 1.0 || (*c as f64) < hi))
            .count() as u64;
        let z0: u64 = counts.iter().filter(|(_, c)| *c as f64 <= tau).map(|(_, c)| pairs(*c)).sum();
        *laws.silt.entry(s).or_default() += 1;
        *laws.level.entry(level).or_default() += 1;
        *laws.z0.entry(z0).or_default() += 1;
    }
    laws
}

#[test]
fn ac02_enumeration_oracle() {
    let started = Instant::now();
    let (d, n, replicas) = (5usize, 6usize, 100_000u64);
    let own = enumerate_laws(d, n, 0.3, 1.0, 0.5);
    let total = (2 * d as u64).pow(n as u32) as f64;
    let functionals = [
        ("silt", Functional::SiltP { p: 2 }, &own.silt),
        ("level-set", Functional::LevelSetSize { b_low: 0.3, b_high: 1.0 }, &own.level),
        ("z0", Functional::Z0 { b: 0.5 }, &own.z0),
    ];
    let mut mismatched = Vec::new();
    let mut atoms = 0;
    let mut worst: f64 = 0.0;
    for (k, (name, f, exact)) in functionals.into_iter().enumerate() {
        let lib = enumerate_exact(d, n, f).unwrap();
        if &lib.counts != exact {
            mismatched.push(format!("{name}: enumeration differs"));
        }
        let mc = empirical_law(d, n as u64, f, replicas, 77 + k as u64).unwrap();
        for (&v, &count) in exact.iter() {
            let p = count as f64 / total;
            if p < 1e-3 {
                continue;
            }
            atoms += 1;
            let freq = mc.get(&v).copied().unwrap_or(0) as f64 / replicas as f64;
            let z = (freq - p).abs() / (p * (1.0 - p) / replicas as f64).sqrt();
            worst = worst.max(z);
            if z > 3.0 {
                mismatched.push(format!("{name} atom {v}: p = {p:.5}, freq = {freq:.5}, z = {z:.2}"));
            }
        }
    }
    let pass = mismatched.is_empty() && started.elapsed().as_secs() < 300;
    report(
        "AC2",
        pass,
        started,
        format!("{atoms} atoms, worst |z| = {worst:.2}, mismatches: {mismatched:?}"),
    );
}

/// `l_inf(0)` of one walk in dimension 5 with Russian roulette on the L1
/// distance: each doubling past 16 is survived with probability 1/4.
fn weighted_origin_visits(rng: &mut Xoshiro256PlusPlus, horizon: u64) -> f64 {
    let mut pos = [0i64; 5];
    let (mut l1, mut next) = (0i64, 16i64);
    let (mut weight, mut total) = (1.0, 1.0);
    for _ in 0..horizon {
        let m = rng.random_range(0..10usize);
        let step = if m % 2 == 0 { 1 } else { -1 };
        let before = pos[m / 2].abs();
        pos[m / 2] += step;
        l1 += pos[m / 2].abs() - before;
        if l1 == 0 {
            total += weight;
        } else if l1 >= next {
            next *= 2;
            if rng.random::<f64>() >= 0.25 {
                break;
            }
            weight *= 4.0;
        }
    }
    total
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn ac03_mean_silt_constant() {
    let started = Instant::now();
    let g = green_constants(5, 8, 1e-10).unwrap();
    let target = 2.0 * g.g0 - 1.0;
    let n = 10_000u64;
    let per_step: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| silt(&local_times_streaming(5, n, 500_000 + i).unwrap()) as f64 / n as f64)
        .collect();
    let (mean, se) = mean_se(&per_step);
    let silt_ok = (mean - target).abs() <= 0.02 * target;

    let visits: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| weighted_origin_visits(&mut Xoshiro256PlusPlus::seed_from_u64(9_000_000 + i), 1_000_000))
        .collect();
    let (g_mc, g_se) = mean_se(&visits);
    let green_ok = (g.g0 - g_mc).abs() <= 0.005 * g_mc;
    report(
        "AC3",
        silt_ok && green_ok,
        started,
        format!(
            "mean silt/n = {mean:.5} +- {se:.5} vs 2G-1 = {target:.5}; G(0) = {:.6} vs MC {g_mc:.5} +- {g_se:.5}",
            g.g0
        ),
    );
}

struct OwnDyadic {
    z0: u64,
    z1: [u64; 2],
    j1: u64,
    strands_match: bool,
}

fn own_dyadic(path: &[Vec<i64>], b: f64) -> OwnDyadic {
    let n = path.len() - 1;
    let h = n / 2;
    let tau = (n as f64).powf(b);
    let low = |c: u64| c as f64 <= tau;
    let full = occupation(path);
    let first = occupation(&path[..=h]);
    let second = occupation(&path[h..]);
    let z0 = full.values().filter(|&&c| low(c)).map(|&c| pairs(c)).sum();
    let z1 = [
        first.values().filter(|&&c| low(c)).map(|&c| pairs(c)).sum(),
        second.values().filter(|&&c| low(c)).map(|&c| pairs(c)).sum(),
    ];
    let j1 = first
        .iter()
        .filter(|&(_, &c)| low(c))
        .map(|(x, &c)| c * second.get(x).copied().unwrap_or(0))
        .sum();
    let mid = &path[h];
    let reflect = |x: &Vec<i64>| -> Vec<i64> { mid.iter().zip(x).map(|(m, y)| m - y).collect() };
    let strand1 = occupation(&(0..=h).map(|k| reflect(&path[h - k])).collect::<Vec<_>>());
    let strand2 = occupation(&(0..=h).map(|k| reflect(&path[h + k])).collect::<Vec<_>>());
    let strands_match = [(&first, &strand1), (&second, &strand2)].iter().all(|(half, strand)| {
        half.len() == strand.len() && half.iter().all(|(x, c)| strand.get(&reflect(x)) == Some(c))
    });
    OwnDyadic {
        z0,
        z1,
        j1,
        strands_match,
    }
}

#[test]
fn ac04_dyadic_decomposition() {
    let started = Instant::now();
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..1000u64 {
        let level = if i % 2 == 0 { 8 } else { 12 };
        let d = [3usize, 4, 5][(i % 3) as usize];
        let t = simulate_walk(d, 1 << level, 40_000 + i).unwrap();
        let path = sites(&t);
        for b in [0.1, 0.3, 0.5] {
            let own = own_dyadic(&path, b);
            let lib = dyadic_decompose(&t, b).unwrap();
            let ok = own.z0 <= own.z1[0] + own.z1[1] + own.j1
                && own.strands_match
                && (lib.z0, lib.z1, lib.j1) == (own.z0, own.z1, own.j1)
                && lib.checks().all();
            checked += 1;
            if !ok {
                violations.push((i, level, b));
            }
        }
    }
    report(
        "AC4",
        violations.is_empty(),
        started,
        format!("{} violations on {checked} decompositions: {violations:?}", violations.len()),
    );
}

fn own_intersection(a: &Trajectory, b: &Trajectory) -> u64 {
    let l = occupation(&sites(a));
    sites(b).iter().map(|x| l.get(x).copied().unwrap_or(0)).sum()
}

#[test]
fn ac05_two_walk_intersection() {
    let started = Instant::now();
    let (d, n, pairs) = (5usize, 100_000u64, 10_000u64);
    let g = green_constants(d, 8, 1e-10).unwrap();
    let seeds = |i: u64| (2 * i + 70_000_001, 2 * i + 70_000_002);
    let values: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let (s1, s2) = seeds(i);
            two_walk_intersection(s1, s2, d, n).unwrap().value as f64
        })
        .collect();
    let cross_checked = (0..20)
        .filter(|&i| {
            let (s1, s2) = seeds(i);
            let a = simulate_walk(d, n as usize, s1).unwrap();
            let b = simulate_walk(d, n as usize, s2).unwrap();
            own_intersection(&a, &b) as f64 == values[i as usize]
        })
        .count();
    let (mean, se) = mean_se(&values);
    let trunc = intersection_truncation_bound(d, n);
    let pass = (mean - g.m1).abs() <= 3.0 * se + trunc && cross_checked == 20;
    report(
        "AC5",
        pass,
        started,
        format!(
            "mean I = {mean:.5} +- {se:.5} vs m1 = {:.6} (truncation {trunc:.2e}); {cross_checked}/20 values reproduced",
            g.m1
        ),
    );
}

#[test]
fn ac06_phase_diagram_continuity() {
    let started = Instant::now();
    let zeta_i = |b: f64| 2.0 * b - 1.0;
    let zeta_ii = |a: f64, b: f64| b * a / (a + 1.0);
    let zeta_iii = |d: f64, b: f64| d * b / (d + 2.0);
    let zeta_iv = |a: f64, d: f64, b: f64| (d + 2.0 * a * (b - 1.0)) / (d + 2.0);
    let zeta_v = |a: f64, b: f64| a * (b - 1.0);
    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for d in 3..=12usize {
        for k in 0..100 {
            let a = 1.05 + 0.1 * k as f64;
            let df = d as f64;
            let (b1, b3, b5) = ((a + 1.0) / (a + 2.0), (df / 2.0 + 1.0) / (df / 2.0 + 2.0), 1.0 + 1.0 / a);
            let own = [
                (Region::I, Region::II, b1, zeta_i(b1), zeta_ii(a, b1)),
                (Region::I, Region::III, b3, zeta_i(b3), zeta_iii(df, b3)),
                (Region::II, Region::V, b5, zeta_ii(a, b5), zeta_v(a, b5)),
                (Region::III, Region::IV, 1.0, zeta_iii(df, 1.0), zeta_iv(a, df, 1.0)),
            ];
            let lib = boundary_continuity(d, a);
            for (lo, hi, beta, z_lo, z_hi) in own {
                let v = lib.iter().find(|v| v.lower == lo && v.upper == hi).expect("boundary listed");
                worst = worst
                    .max((z_lo - z_hi).abs())
                    .max((v.beta - beta).abs())
                    .max((v.zeta_lower - z_lo).abs())
                    .max((v.zeta_upper - z_hi).abs())
                    .max(v.gap().abs());
            }
            combos += 1;
        }
    }
    let examples = [
        (2.0, 0.6, 5, RegionTag::I, 0.2),
        (2.0, 1.0, 6, RegionTag::II, 2.0 / 3.0),
        (4.0, 1.0, 5, RegionTag::III, 5.0 / 7.0),
        (4.0, 1.1, 5, RegionTag::IV, 29.0 / 35.0),
    ];
    let wrong: Vec<_> = examples
        .iter()
        .filter(|&&(a, b, d, tag, zeta)| {
            let r = classify(PhasePoint::new(a, b, d));
            r.region != tag || r.zeta.is_none_or(|z| (z - zeta).abs() > 1e-12)
        })
        .collect();
    let pass = combos == 1000 && worst <= 1e-12 && wrong.is_empty();
    report(
        "AC6",
        pass,
        started,
        format!("{combos} (alpha, d) combinations, worst boundary gap {worst:.1e}; misclassified examples: {wrong:?}"),
    );
}

#[test]
fn ac07_silt_sqrt_n_scaling() {
    let started = Instant::now();
    let d = 5;
    let y = 1.2 * green_constants(d, 8, 1e-10).unwrap().y0_silt;
    let grid = [256u64, 512, 1024, 2048, 4096];
    let params = SplittingParams {
        particles: 500,
        runs: 4,
        ..Default::default()
    };
    let split: Vec<TailEstimate> =
        grid.iter().map(|&n| splitting_tail(d, n as usize, y, &params, 3000 + n).unwrap()).collect();
    let chain: Vec<TailEstimate> =
        grid.iter().map(|&n| lower_bound_return_chain(d, n, y, 20_000, 4000 + n).unwrap()).collect();
    let points = |e: &[TailEstimate]| grid.iter().zip(e).map(|(&n, e)| (n as f64, e.log_p)).collect::<Vec<_>>();
    let fs = fit_exponent(&points(&split), Transform::LogVsSqrtN).unwrap();
    let fc = fit_exponent(&points(&chain), Transform::LogVsSqrtN).unwrap();
    let below = split.iter().zip(&chain).all(|(s, c)| {
        c.log_p <= s.log_p + 3.0 * (s.log_std_err().powi(2) + c.log_std_err().powi(2)).sqrt()
    });
    let steeper = fc.slope <= fs.slope + 3.0 * (fs.slope_se.powi(2) + fc.slope_se.powi(2)).sqrt();
    let pass = fs.slope < 0.0 && fs.r_squared >= 0.9 && below && steeper && started.elapsed().as_secs() < 1800;
    report(
        "AC7",
        pass,
        started,
        format!(
            "splitting slope {:.4} +- {:.4} (r2 {:.3}); return-chain slope {:.4} +- {:.4}; bound below estimate: {below}",
            fs.slope, fs.slope_se, fs.r_squared, fc.slope, fc.slope_se
        ),
    );
}

/// Survival in the box of side `r` by the power method on one axis. The
/// `d`-dimensional kernel picks an axis uniformly, so with `j` axes and `k`
/// moves the first axis receives a binomial share of the moves.
fn own_box_survival(d: usize, r: u32, t: u64) -> f64 {
    let points = 2 * ((r as usize - 1) / 2) + 1;
    let steps = t as usize;
    let mut one = Vec::with_capacity(steps + 1);
    let mut v = vec![0.0; points];
    v[points / 2] = 1.0;
    one.push(1.0);
    for _ in 0..steps {
        let mut w = vec![0.0; points];
        for (i, &p) in v.iter().enumerate() {
            if i > 0 {
                w[i - 1] += 0.5 * p;
            }
            if i + 1 < points {
                w[i + 1] += 0.5 * p;
            }
        }
        v = w;
        one.push(v.iter().sum());
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=steps).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut surv = one.clone();
    for j in 2..=d {
        let (pj, qj) = ((1.0 / j as f64).ln(), ((j - 1) as f64 / j as f64).ln());
        surv = (0..=steps)
            .map(|k| {
                (0..=k)
                    .map(|m| {
                        let ln_binom = ln_fact[k] - ln_fact[m] - ln_fact[k - m] + m as f64 * pj + (k - m) as f64 * qj;
                        ln_binom.exp() * one[m] * surv[k - m]
                    })
                    .sum()
            })
            .collect();
    }
    surv[steps]
}

#[test]
fn ac08_confinement() {
    let started = Instant::now();
    let d = 5;
    let mut details = Vec::new();
    let mut pass = true;
    for r in [5u32, 9] {
        for mult in [10u64, 20] {
            let t = mult * (r as u64).pow(2);
            let exact = confinement_probability(d, r, t, &ConfinementMethod::ExactSpectral, 0).unwrap();
            let oracle = own_box_survival(d, r, t);
            let mc = confinement_probability(d, r, t, &ConfinementMethod::Mc(SmcParams::default()), 900 + t).unwrap();
            let rate = -mc.p_hat.ln() / t as f64;
            let gap = spectral_gap(r);
            let agree = (mc.p_hat - exact.p_hat).abs() <= 3.0 * mc.std_err
                && (exact.log_p - oracle.ln()).abs() <= 1e-8 * exact.log_p.abs().max(1.0);
            let rate_ok = (rate - gap).abs() <= 0.05 * gap;
            pass &= agree && rate_ok;
            details.push(format!(
                "r={r} T={t}: mc {:.4e} +- {:.1e}, exact {:.4e}, rate/gap {:.4}",
                mc.p_hat,
                mc.std_err,
                exact.p_hat,
                rate / gap
            ));
        }
    }
    report("AC8", pass, started, details.join("; "));
}

#[test]
fn ac09_region_ii_exponent() {
    let started = Instant::now();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/region_ii.toml");
    let cfg = ExperimentConfig::from_path(&path).unwrap();
    let record = execute(&cfg).unwrap();
    let (alpha, beta) = (1.5, 0.9);
    let target = beta * alpha / (alpha + 1.0);
    let fit = record.fits.first().and_then(|f| f.fit.clone());
    let largest = record.points.iter().max_by_key(|p| p.n).and_then(|p| p.estimate.clone());
    let p_last = largest.map_or(0.0, |e| e.p_hat);
    let zeta_hat = fit.as_ref().and_then(|f| f.zeta_hat);
    let pass = p_last >= 1e-4 && zeta_hat.is_some_and(|z| (z - target).abs() <= 0.15);
    report(
        "AC9",
        pass,
        started,
        format!("zeta_hat = {zeta_hat:?} vs {target}; p_hat at largest n = {p_last:.3e}"),
    );
}

#[test]
fn ac10_bell_shaped_monotonicity() {
    let started = Instant::now();
    let model = SceneryModel::exp_power(1.5, 1.0, 0).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for case in 0..20u64 {
        let k = rng.random_range(1..=4usize);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
        let b: Vec<f64> = a.iter().map(|&x| x + rng.random_range(0.0..1.0)).collect();
        let y = rng.random_range(0.2..2.5) * a.iter().sum::<f64>().max(0.5);
        let pa = weighted_sum_tail(&model, &a, y, 1_000_000, 2 * case + 11).unwrap();
        let pb = weighted_sum_tail(&model, &b, y, 1_000_000, 2 * case + 12).unwrap();
        let sigma = (pa.std_err.powi(2) + pb.std_err.powi(2)).sqrt();
        let excess = (pa.p_hat - pb.p_hat) / sigma.max(f64::MIN_POSITIVE);
        worst = worst.max(excess);
        if pa.p_hat > pb.p_hat + 3.0 * sigma {
            failures.push(case);
        }
    }
    report(
        "AC10",
        failures.is_empty(),
        started,
        format!("20 weight pairs, largest (P(a) - P(b)) / sigma = {worst:.2}; failures {failures:?}"),
    );
}

#[test]
fn ac11_pathwise_inequalities() {
    let started = Instant::now();
    let mut violations = Vec::new();
    let slack = 1e-12;
    for i in 0..1000u64 {
        let d = [3usize, 4, 5][(i % 3) as usize];
        let n = 1usize << 10;
        let t = simulate_walk(d, n, 80_000 + i).unwrap();
        let path = sites(&t);
        let l: Vec<f64> = occupation(&path).values().map(|&c| c as f64).collect();
        let range = l.len() as f64;
        let q = d as f64 / (d as f64 - 2.0) + 0.01;
        for p in [1.1, 0.5 * (1.0 + q), 0.99 * q] {
            let conj = |r: f64| r / (r - 1.0);
            let theta = 1.0 - conj(q) / conj(p);
            let sp: f64 = l.iter().map(|c| c.powf(p)).sum();
            let sq: f64 = l.iter().map(|c| c.powf(q)).sum();
            let s1: f64 = l.iter().sum();
            let holder = sp.powf(1.0 / p) <= s1.powf(theta) * sq.powf((1.0 - theta) / q) * (1.0 + slack);
            let power_mean = ((n + 1) as f64 / range).powf(p) <= sp / range * (1.0 + slack);
            let lib = interpolation_check(&local_times(&t), p, q).unwrap();
            if !(holder && power_mean && lib.holds()) {
                violations.push(format!("traj {i} p {p:.3}: holder {holder}, power mean {power_mean}"));
            }
        }
        let h = n / 2;
        for b in [0.3, 0.5, 1.0] {
            let tau = (n as f64).powf(b);
            for half in [&path[..=h], &path[h..]] {
                let occ = occupation(half);
                let set = occ.values().filter(|&&c| c >= 2 && c as f64 <= tau);
                let z1: u64 = set.clone().map(|&c| pairs(c)).sum();
                let squares: u64 = set.map(|&c| c * c).sum();
                if 4 * z1 < squares {
                    violations.push(format!("traj {i} b {b}: 4 Z1 = {} < {squares}", 4 * z1));
                }
            }
            if !dyadic_decompose(&t, b).unwrap().checks().z1_quarter_bound {
                violations.push(format!("traj {i} b {b}: library quarter bound"));
            }
        }
    }
    report(
        "AC11",
        violations.is_empty(),
        started,
        format!("{} violations on 1000 trajectories: {violations:?}", violations.len()),
    );
}
