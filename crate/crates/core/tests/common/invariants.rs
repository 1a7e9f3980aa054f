//! Randomized invariant checks, each run for a configurable number of cases.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pes_sim::engine::{SimError, Simulation, SimulationConfig};
use pes_sim::intervention::{apply_help, update_skill, InterventionParams, ScenarioConfig, ScenarioName};
use pes_sim::market::{bias_term, job_probability, MarketParams};
use pes_sim::metrics::{bgsd, counterfactual_fraction, equal_opportunity, Decision, MetricsRow};
use pes_sim::population::{s_real, sample_individual, Individual, PopulationParams};
use pes_sim::prediction::{classify, LogisticModel, ModelVariant, ProspectClass};

pub struct Property {
    pub name: &'static str,
    pub run: fn(u32) -> Result<(), String>,
}

pub fn properties() -> Vec<Property> {
    vec![
        Property {
            name: "update_skill fixed points",
            run: update_skill_fixed_points,
        },
        Property {
            name: "update_skill contracts toward x_max",
            run: update_skill_contraction,
        },
        Property {
            name: "help is monotone and bounded",
            run: help_is_monotone,
        },
        Property {
            name: "market bias arithmetic",
            run: bias_arithmetic,
        },
        Property {
            name: "job probability increases with skill",
            run: job_probability_monotone,
        },
        Property {
            name: "sampled skills respect truncation bounds",
            run: truncation_bounds,
        },
        Property {
            name: "bgsd antisymmetry",
            run: bgsd_antisymmetry,
        },
        Property {
            name: "counterfactual fraction range",
            run: counterfactual_range,
        },
        Property {
            name: "equal opportunity range and duplication",
            run: equal_opportunity_duplication,
        },
        Property {
            name: "prob_low monotone by coefficient sign",
            run: prob_low_monotone,
        },
        Property {
            name: "base classification ignores x_pr",
            run: base_ignores_group,
        },
        Property {
            name: "pool size and flow conservation",
            run: pool_conservation,
        },
    ]
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn individual(x1: f64, x2: f64, x_pr: u8) -> Individual {
    Individual {
        id: 0,
        x1,
        x2,
        x_pr,
        t_unemployed: 0,
        wait_remaining: 0,
    }
}

fn update_skill_fixed_points(cases: u32) -> Result<(), String> {
    check(cases, (-5.0..5.0f64, 0.0..=1.0f64, -5.0..5.0f64), |(x_max, k, x)| {
        prop_assert_eq!(update_skill(x_max, k, x_max), x_max);
        prop_assert_eq!(update_skill(x, 0.0, x_max), x);
        // At or above the ceiling the update never moves x.
        let above = x_max + x.abs();
        prop_assert_eq!(update_skill(above, k, x_max), above);
        Ok(())
    })
}

fn update_skill_contraction(cases: u32) -> Result<(), String> {
    check(cases, (-5.0..5.0f64, 0.0..=1.0f64, 0.0..10.0f64), |(x_max, k, gap)| {
        let x = x_max - gap;
        let y = update_skill(x, k, x_max);
        let expected = (1.0 - k) * gap;
        prop_assert!(
            ((x_max - y) - expected).abs() <= 1e-12 * (1.0 + gap),
            "gap {} -> {}",
            gap,
            x_max - y
        );
        prop_assert!(y >= x && y <= x_max);
        Ok(())
    })
}

fn help_is_monotone(cases: u32) -> Result<(), String> {
    let strategy = (
        -2.0..2.0f64,
        -2.0..2.0f64,
        0u8..2,
        0.0..0.05f64,
        1u32..20,
        0.0..3.0f64,
        0.0..3.0f64,
    );
    check(cases, strategy, |(x1, x2, x_pr, k, reps, m1, m2)| {
        let params = InterventionParams {
            x1_max: x1 + m1,
            x2_max: x2 + m2,
            delta_t_u: 5,
            t_u_max: 40,
            t_u_threshold: 10,
        };
        let before = individual(x1, x2, x_pr);
        let mut once = before.clone();
        apply_help(&mut once, k, &params, reps);
        let mut more = before.clone();
        apply_help(&mut more, k, &params, reps + 1);
        prop_assert!(once.x1 >= before.x1 && once.x2 >= before.x2);
        prop_assert!(once.x1 <= params.x1_max && once.x2 <= params.x2_max);
        prop_assert!(once.s_real() >= before.s_real());
        prop_assert!(more.s_real() >= once.s_real());
        prop_assert_eq!(
            (once.x_pr, once.t_unemployed, once.id),
            (before.x_pr, before.t_unemployed, before.id)
        );
        Ok(())
    })
}

fn bias_arithmetic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (0.0..5.0f64, 0.1..10.0f64, -5.0..10.0f64, -2.0..2.0f64),
        |(beta_b, alpha_l, beta_l, s)| {
            prop_assert_eq!(bias_term(beta_b, 1), 0.5 * beta_b);
            prop_assert_eq!(bias_term(beta_b, 0), -0.5 * beta_b);
            prop_assert_eq!(bias_term(beta_b, 1) - bias_term(beta_b, 0), beta_b);
            let params = MarketParams {
                alpha_l,
                beta_l,
                beta_b,
            };
            for x_pr in [0u8, 1] {
                let z = alpha_l * s - beta_l + beta_b * (f64::from(x_pr) - 0.5);
                let expected = 1.0 / (1.0 + (-z).exp());
                let p = job_probability(&params, s, x_pr);
                prop_assert!((p - expected).abs() <= 1e-14, "{} vs {}", p, expected);
            }
            // A privileged individual never has worse odds at equal skill.
            prop_assert!(job_probability(&params, s, 1) >= job_probability(&params, s, 0));
            Ok(())
        },
    )
}

fn job_probability_monotone(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            0.1..10.0f64,
            -5.0..10.0f64,
            0.0..3.0f64,
            -2.0..2.0f64,
            0.001..1.0f64,
            0u8..2,
        ),
        |(alpha_l, beta_l, beta_b, s, ds, x_pr)| {
            let params = MarketParams {
                alpha_l,
                beta_l,
                beta_b,
            };
            let lo = job_probability(&params, s, x_pr);
            let hi = job_probability(&params, s + ds, x_pr);
            prop_assert!(hi >= lo);
            if lo > 1e-12 && hi < 1.0 - 1e-12 {
                prop_assert!(hi > lo);
            }
            prop_assert!((0.0..=1.0).contains(&lo));
            Ok(())
        },
    )
}

fn truncation_bounds(cases: u32) -> Result<(), String> {
    check(
        cases,
        (0.0..6.0f64, 0.5..3.0f64, any::<u64>()),
        |(alpha_pr, trunc, seed)| {
            let params = PopulationParams { alpha_pr, trunc };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for id in 0..20 {
                let ind = sample_individual(&mut rng, &params, id);
                let (lo, hi) = params.x2_bounds(ind.x_pr);
                prop_assert!(ind.x1.abs() <= trunc);
                prop_assert!(ind.x2 >= lo && ind.x2 <= hi);
                prop_assert!(ind.x2 <= params.x2_upper());
                prop_assert!(ind.x_pr <= 1);
                prop_assert_eq!(ind.s_real().to_bits(), s_real(ind.x1, ind.x2).to_bits());
            }
            Ok(())
        },
    )
}

fn pool() -> impl Strategy<Value = Vec<Individual>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, 0u8..2), 1..60)
        .prop_map(|v| v.into_iter().map(|(a, b, g)| individual(a, b, g)).collect())
}

fn bgsd_antisymmetry(cases: u32) -> Result<(), String> {
    check(cases, pool(), |pool| {
        let flipped: Vec<Individual> = pool
            .iter()
            .map(|i| Individual {
                x_pr: 1 - i.x_pr,
                ..i.clone()
            })
            .collect();
        match (bgsd(&pool), bgsd(&flipped)) {
            (Some(a), Some(b)) => prop_assert_eq!(a, -b),
            (None, None) => {}
            other => return Err(TestCaseError::fail(format!("presence differs: {other:?}"))),
        }
        Ok(())
    })
}

fn full_model() -> impl Strategy<Value = LogisticModel> {
    (-5.0..5.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(a1, a2, b)| LogisticModel::new(ModelVariant::Full, vec![a1, a2], b).unwrap())
}

fn counterfactual_range(cases: u32) -> Result<(), String> {
    let real = (-5.0..5.0f64, -3.0..3.0f64)
        .prop_map(|(a, b)| LogisticModel::new(ModelVariant::RealProspect, vec![a], b).unwrap());
    check(cases, (full_model(), real, pool()), |(model, real, pool)| {
        if let Some(cf) = counterfactual_fraction(&model, &pool, &real).unwrap() {
            prop_assert!((0.0..=1.0).contains(&cf));
        }
        let blind = LogisticModel::new(
            ModelVariant::Full,
            vec![model.coefficients()[0], 0.0],
            model.intercept(),
        )
        .unwrap();
        let cf = counterfactual_fraction(&blind, &pool, &real).unwrap();
        prop_assert!(cf.is_none() || cf == Some(0.0));
        Ok(())
    })
}

fn decision() -> impl Strategy<Value = Decision> {
    (any::<bool>(), any::<bool>(), 0u8..2).prop_map(|(p, t, g)| Decision {
        predicted: if p { ProspectClass::Low } else { ProspectClass::High },
        truth: if t { ProspectClass::Low } else { ProspectClass::High },
        x_pr: g,
    })
}

fn equal_opportunity_duplication(cases: u32) -> Result<(), String> {
    check(
        cases,
        (prop::collection::vec(decision(), 0..80), 1usize..6),
        |(decisions, k)| {
            let eo = equal_opportunity(&decisions);
            if let Some(v) = eo {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
            let repeated: Vec<Decision> = decisions.iter().flat_map(|d| std::iter::repeat_n(*d, k)).collect();
            prop_assert_eq!(equal_opportunity(&repeated), eo);
            Ok(())
        },
    )
}

fn prob_low_monotone(cases: u32) -> Result<(), String> {
    check(
        cases,
        (full_model(), -2.0..2.0f64, 0u8..2, 0.01..1.0f64),
        |(model, x1, x_pr, dx)| {
            let g = f64::from(x_pr);
            let p = model.prob_low(&[x1, g]).unwrap();
            let q = model.prob_low(&[x1 + dx, g]).unwrap();
            let a1 = model.coefficients()[0];
            if p > 1e-9 && p < 1.0 - 1e-9 && q > 1e-9 && q < 1.0 - 1e-9 && a1.abs() > 1e-6 {
                prop_assert_eq!((q - p).signum(), a1.signum());
            }
            let a2 = model.coefficients()[1];
            let p0 = model.prob_low(&[x1, 0.0]).unwrap();
            let p1 = model.prob_low(&[x1, 1.0]).unwrap();
            if p0.min(p1) > 1e-9 && p0.max(p1) < 1.0 - 1e-9 && a2.abs() > 1e-6 {
                prop_assert_eq!((p1 - p0).signum(), a2.signum());
            }
            Ok(())
        },
    )
}

fn base_ignores_group(cases: u32) -> Result<(), String> {
    let base =
        (-5.0..5.0f64, -3.0..3.0f64).prop_map(|(a, b)| LogisticModel::new(ModelVariant::Base, vec![a], b).unwrap());
    check(cases, (base, -2.0..2.0f64, -2.0..2.0f64), |(model, x1, x2)| {
        let p0 = model.prob_low_for(&individual(x1, x2, 0));
        let p1 = model.prob_low_for(&individual(x1, x2, 1));
        prop_assert_eq!(p0.to_bits(), p1.to_bits());
        prop_assert_eq!(classify(p0), classify(p1));
        Ok(())
    })
}

fn small_config() -> impl Strategy<Value = SimulationConfig> {
    (
        10usize..60,
        2.0..8.0f64,
        1.0..4.0f64,
        0.0..3.0f64,
        1u32..5,
        3u32..10,
        0u32..6,
        0usize..4,
        any::<bool>(),
    )
        .prop_map(
            |(pool_size, alpha_l, beta_l, beta_b, threshold, extra, delta, scenario, full)| {
                let mut c = SimulationConfig {
                    pool_size,
                    spinup_steps: 30,
                    spinup_discard: 10,
                    total_steps: 45,
                    model_variant: if full { ModelVariant::Full } else { ModelVariant::Base },
                    scenario: ScenarioConfig::named(ScenarioName::NAMED[scenario]),
                    ..SimulationConfig::default()
                };
                c.market = MarketParams {
                    alpha_l,
                    beta_l,
                    beta_b,
                };
                c.intervention.t_u_threshold = threshold;
                c.intervention.t_u_max = threshold + extra;
                c.intervention.delta_t_u = delta;
                c
            },
        )
}

fn pool_conservation(cases: u32) -> Result<(), String> {
    check(cases, (small_config(), any::<u64>()), |(config, seed)| {
        let mut sim = match Simulation::spin_up(&config, seed) {
            Ok(sim) => sim,
            // Tiny pools can finish spin-up with a single-class history.
            Err(SimError::DegenerateHistory { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        while sim.t() < config.total_steps {
            sim.step();
            prop_assert_eq!(sim.active().len() + sim.waiting().len(), config.pool_size);
            let f = sim.flows();
            prop_assert_eq!(f.entrants, config.pool_size as u64 + f.hires + f.forced_exits);
            // Pool metrics recomputed from the current pools match the recorded row.
            let row = sim.rows().last().unwrap();
            let audit = MetricsRow::pool_snapshot(row.t, sim.active(), sim.waiting(), &[], 0);
            prop_assert_eq!(audit.bgsd, row.bgsd);
            prop_assert_eq!(audit.mean_s, row.mean_s);
            prop_assert_eq!(audit.frac_upriv, row.frac_upriv);
            prop_assert_eq!(audit.n_waiting, row.n_waiting);
        }
        Ok(())
    })
}
