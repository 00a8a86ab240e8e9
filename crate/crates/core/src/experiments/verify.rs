use crate::error::{Error, Result};
use crate::estimators::{
    confinement_probability, empirical_law, enumerate_exact, fit_exponent, lower_bound_return_chain, naive_tail,
    spectral_gap, splitting_tail, tilted_scenery_tail, ConfinementMethod, Event, Functional, SmcParams,
    SplittingParams, TiltedParams, Transform,
};
use crate::exponents::{boundary_continuity, classify, iid_exponent, PhasePoint, RegionTag};
use crate::green::green_value;
use crate::lattice::{local_times, local_times_streaming, returns_within, simulate_walk, Site};
use crate::rng;
use crate::scenery::SceneryModel;
use crate::silt::{coincidence_pairs_sorted, dyadic_decompose, interpolation_check, level_set_size, silt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Oracles,
    ExponentMap,
    DeskScale,
    /// The identities battery against a fixture that is off by one; it must
    /// fail.
    Canary,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Identities, Suite::Oracles, Suite::ExponentMap, Suite::DeskScale, Suite::Canary];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Oracles => "oracles",
            Suite::ExponentMap => "exponent-map",
            Suite::DeskScale => "desk-scale",
            Suite::Canary => "canary",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::param("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub wall_clock_secs: f64,
    pub checks: Vec<Check>,
}

pub fn verify(suite: Suite, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = match suite {
        Suite::Identities => identities(seed, 0),
        Suite::Canary => identities(seed, 1),
        Suite::Oracles => oracles(seed),
        Suite::ExponentMap => exponent_map(),
        Suite::DeskScale => desk_scale(seed),
    };
    SuiteReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        checks,
    }
}

fn identities(seed: u64, fixture_offset: u64) -> Vec<Check> {
    let mut out = Vec::new();

    let silt_id = || -> Result<(bool, String)> {
        let mut bad = 0;
        let mut total = 0;
        for (k, (d, n)) in [(3usize, 100usize), (3, 1000), (5, 100), (5, 1000)].into_iter().enumerate() {
            bad += (0..100u64)
                .into_par_iter()
                .map(|i| {
                    let t = simulate_walk(d, n, rng::derive_seed(seed, (k as u64) << 32 | i))?;
                    let pairs = coincidence_pairs_sorted(&t);
                    Ok(u64::from(silt(&local_times(&t)) != n as u64 + 1 + 2 * pairs + fixture_offset))
                })
                .sum::<Result<u64>>()?;
            total += 100;
        }
        Ok((bad == 0, format!("{bad} violations in {total} trajectories")))
    };
    out.push(Check::from_result("silt-identity", silt_id()));

    let dyadic = || -> Result<(bool, String)> {
        let mut bad = 0;
        let mut total = 0;
        for (k, level) in [8u32, 10].into_iter().enumerate() {
            for b in [0.1, 0.3, 0.5] {
                bad += (0..50u64)
                    .into_par_iter()
                    .map(|i| {
                        let t = simulate_walk(3, 1 << level, rng::derive_seed(seed ^ 0xD7AD, (k as u64) << 32 | i))?;
                        Ok(u64::from(!dyadic_decompose(&t, b)?.checks().all()))
                    })
                    .sum::<Result<u64>>()?;
                total += 50;
            }
        }
        Ok((bad == 0, format!("{bad} violations in {total} decompositions")))
    };
    out.push(Check::from_result("dyadic-decomposition", dyadic()));

    let interp = || -> Result<(bool, String)> {
        let mut bad = 0;
        for i in 0..100u64 {
            let f = local_times_streaming(3, 500, rng::derive_seed(seed ^ 0x1A7E, i))?;
            for (p, q) in [(1.5, 2.0), (2.0, 3.0)] {
                bad += u64::from(!interpolation_check(&f, p, q)?.holds());
            }
        }
        Ok((bad == 0, format!("{bad} violations in 200 checks")))
    };
    out.push(Check::from_result("interpolation-and-power-mean", interp()));

    let partition = || -> Result<(bool, String)> {
        let mut bad = 0;
        for i in 0..100u64 {
            let f = local_times_streaming(3, 2000, rng::derive_seed(seed ^ 0x9A27, i))?;
            let parts = level_set_size(&f, 0.0, 0.3) + level_set_size(&f, 0.3, 0.6) + level_set_size(&f, 0.6, 1.0);
            bad += u64::from(parts != f.support_size());
        }
        Ok((bad == 0, format!("{bad} mismatches in 100 fields")))
    };
    out.push(Check::from_result("level-set-partition", partition()));

    let enumeration = || -> Result<(bool, String)> {
        let law = enumerate_exact(2, 8, Functional::SiltP { p: 2 })?;
        let paths: u64 = law.counts.values().sum();
        Ok((paths == 4u64.pow(8), format!("{paths} of {} paths", 4u64.pow(8))))
    };
    out.push(Check::from_result("enumeration-normalization", enumeration()));
    out
}

fn within(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se + 1e-12
}

fn oracles(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();

    let laws = || -> Result<(bool, String)> {
        let replicas = 20_000u64;
        let mut worst: f64 = 0.0;
        let mut atoms = 0;
        for (k, f) in [
            Functional::SiltP { p: 2 },
            Functional::LevelSetSize { b_low: 0.0, b_high: 0.5 },
            Functional::Z0 { b: 0.5 },
        ]
        .into_iter()
        .enumerate()
        {
            let exact = enumerate_exact(5, 6, f.clone())?;
            let emp = empirical_law(5, 6, f, replicas, rng::derive_seed(seed, k as u64))?;
            for (&v, _) in exact.counts.iter() {
                let p = exact.probability(v);
                if p < 1e-3 {
                    continue;
                }
                let q = *emp.get(&v).unwrap_or(&0) as f64 / replicas as f64;
                let se = (p * (1.0 - p) / replicas as f64).sqrt();
                worst = worst.max((q - p).abs() / se);
                atoms += 1;
            }
        }
        Ok((worst <= 3.0, format!("{atoms} atoms, worst deviation {worst:.2} sigma")))
    };
    out.push(Check::from_result("enumeration-vs-mc", laws()));

    let tilted = || -> Result<(bool, String)> {
        let m = SceneryModel::gaussian(1.0, 0)?;
        let walks = (0..30u64)
            .map(|i| local_times_streaming(3, 100, rng::derive_seed(seed ^ 0x7117, i)))
            .collect::<Result<Vec<_>>>()?;
        let exact = tilted_scenery_tail(&walks, &m, 0.9, 1.5, &TiltedParams::default(), seed)?;
        let mc = tilted_scenery_tail(
            &walks,
            &m,
            0.9,
            1.5,
            &TiltedParams {
                force_monte_carlo: true,
                draws_per_walk: 2000,
                ..Default::default()
            },
            seed,
        )?;
        Ok((
            within(mc.p_hat, exact.p_hat, mc.std_err, 3.0),
            format!("tilted {:.4e} +- {:.2e}, exact {:.4e}", mc.p_hat, mc.std_err, exact.p_hat),
        ))
    };
    out.push(Check::from_result("tilted-vs-gaussian", tilted()));

    let confinement = || -> Result<(bool, String)> {
        let exact = confinement_probability(5, 5, 100, &ConfinementMethod::ExactSpectral, 0)?;
        let params = SmcParams {
            particles: 2000,
            runs: 16,
            range_cap: None,
        };
        let mc = confinement_probability(5, 5, 100, &ConfinementMethod::Mc(params), seed)?;
        Ok((
            within(mc.p_hat, exact.p_hat, mc.std_err, 3.0),
            format!("smc {:.4e} +- {:.2e}, spectral {:.4e}", mc.p_hat, mc.std_err, exact.p_hat),
        ))
    };
    out.push(Check::from_result("confinement-vs-spectral", confinement()));

    let splitting = || -> Result<(bool, String)> {
        let naive = naive_tail(&Event::Silt { p: 2.0, gamma: 1.0, y: 2.4 }, 3, 200, 40_000, seed)?;
        let split = splitting_tail(
            3,
            200,
            2.4,
            &SplittingParams {
                particles: 300,
                runs: 12,
                ..Default::default()
            },
            seed ^ 0x5917,
        )?;
        Ok((
            split.agrees_with(&naive, 3.0),
            format!("splitting {:.4e} +- {:.2e}, naive {:.4e} +- {:.2e}", split.p_hat, split.std_err, naive.p_hat, naive.std_err),
        ))
    };
    out.push(Check::from_result("splitting-vs-naive", splitting()));

    let returns = || -> Result<(bool, String)> {
        let (horizon, walks) = (1000u64, 20_000u64);
        let g0 = green_value(5, &Site::origin(5), 1e-10)?.value;
        let exact = 1.0 - 1.0 / g0;
        let hits = (0..walks)
            .into_par_iter()
            .map(|i| returns_within(5, horizon, rng::derive_seed(seed ^ 0x4E70, i)).map(u64::from))
            .sum::<Result<u64>>()?;
        let q = hits as f64 / walks as f64;
        let se = (exact * (1.0 - exact) / walks as f64).sqrt();
        // Returns after the horizon: sum_{k > h} c k^{-5/2} with c <= 2 (5 / 2 pi)^{5/2}.
        let tail = 2.0 * (2.5 / std::f64::consts::PI).powf(2.5) * (2.0 / 3.0) * (horizon as f64).powf(-1.5);
        Ok((
            q <= exact + 3.0 * se && q >= exact - tail - 3.0 * se,
            format!("P(T0 <= {horizon}) = {q:.5}, 1 - 1/G(0) = {exact:.5}"),
        ))
    };
    out.push(Check::from_result("return-probability-vs-green", returns()));
    out
}

fn exponent_map() -> Vec<Check> {
    let mut out = Vec::new();
    let cases: [(f64, f64, usize, RegionTag, f64); 4] = [
        (2.0, 0.6, 5, RegionTag::I, 0.2),
        (2.0, 1.0, 6, RegionTag::II, 2.0 / 3.0),
        (4.0, 1.0, 5, RegionTag::III, 5.0 / 7.0),
        (4.0, 1.1, 5, RegionTag::IV, 29.0 / 35.0),
    ];
    let mut bad = Vec::new();
    for (alpha, beta, d, region, zeta) in cases {
        let r = classify(PhasePoint::new(alpha, beta, d));
        if r.region != region || r.zeta.is_none_or(|z| (z - zeta).abs() > 1e-12) {
            bad.push(format!("({alpha}, {beta}, {d}) -> {:?} {:?}", r.region, r.zeta));
        }
    }
    out.push(Check::new("classification-examples", bad.is_empty(), bad.join("; ")));

    let iid = [(2.0f64, 1.5f64, 2.0f64), (2.0, 0.7, 0.4), (0.5, 0.9, 0.45)]
        .into_iter()
        .all(|(a, b, z)| iid_exponent(a, b).is_ok_and(|e| e.zeta.is_some_and(|v| (v - z).abs() < 1e-12)));
    out.push(Check::new("iid-three-regimes", iid, ""));

    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for d in 3..=27usize {
        for k in 0..40 {
            let alpha = 1.05 + k as f64 * 0.23;
            for b in boundary_continuity(d, alpha) {
                worst = worst.max(b.gap());
            }
            combos += 1;
        }
    }
    out.push(Check::new(
        "boundary-continuity",
        worst <= 1e-12,
        format!("{combos} (alpha, d) pairs, largest gap {worst:.2e}"),
    ));

    let oos = classify(PhasePoint::new(0.5, 0.9, 5)).region == RegionTag::OutOfScope;
    out.push(Check::new("out-of-scope-flagged", oos, ""));
    out
}

fn desk_scale(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let grid = [256u64, 512, 1024, 2048, 4096];

    let chain = || -> Result<(bool, String)> {
        let pts = grid
            .iter()
            .map(|&n| Ok((n as f64, lower_bound_return_chain(5, n, 5.0, 20_000, rng::derive_seed(seed, n))?.log_p)))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_exponent(&pts, Transform::LogVsSqrtN)?;
        Ok((
            fit.slope < 0.0 && fit.r_squared >= 0.95,
            format!("slope {:.4}, r2 {:.4}", fit.slope, fit.r_squared),
        ))
    };
    out.push(Check::from_result("return-chain-sqrt-n", chain()));

    let split = || -> Result<(bool, String)> {
        let y = 1.2 * super::y0_silt(5)?;
        let params = SplittingParams {
            particles: 400,
            runs: 4,
            ..Default::default()
        };
        let pts = grid[..4]
            .iter()
            .map(|&n| Ok((n as f64, splitting_tail(5, n as usize, y, &params, rng::derive_seed(seed ^ 0x5E, n))?.log_p)))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_exponent(&pts, Transform::LogVsSqrtN)?;
        Ok((
            fit.slope < 0.0 && fit.r_squared >= 0.9,
            format!("slope {:.4}, r2 {:.4}", fit.slope, fit.r_squared),
        ))
    };
    out.push(Check::from_result("splitting-sqrt-n", split()));

    let gap = || -> Result<(bool, String)> {
        let r = 5;
        let t = 10 * r as u64 * r as u64;
        let p = confinement_probability(5, r, t, &ConfinementMethod::ExactSpectral, 0)?;
        let rate = -p.log_p / t as f64;
        let g = spectral_gap(r);
        Ok(((rate / g - 1.0).abs() <= 0.05, format!("-log P / T = {rate:.5}, gap {g:.5}")))
    };
    out.push(Check::from_result("confinement-rate", gap()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_pass_and_canary_fails() {
        let ok = verify(Suite::Identities, 99);
        assert!(ok.passed, "{ok:?}");
        let canary = verify(Suite::Canary, 99);
        assert!(!canary.passed);
        assert!(!canary.checks[0].passed);
    }

    #[test]
    fn exponent_map_suite_passes() {
        let r = verify(Suite::ExponentMap, 0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
