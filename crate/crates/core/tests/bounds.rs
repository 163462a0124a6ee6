use std::f64::consts::PI;

use faulty_sector::bounds::{
    crude_i1_bound, decompose_regions, empirical_tv, expected_w, joint_count_prob, shifted_prob,
    tv_bound, BoundsConfig, Indicator, JointRegionDecomposition, Truncation,
};
use faulty_sector::geometry::{Estimate, Point2, Sector};
use faulty_sector::harness::{run_trials, TrialOptions};
use faulty_sector::model::ModelParams;
use faulty_sector::theory::{poisson_pmf, radius_for_mu};
use faulty_sector::{DegreeSet, Mode, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn dec(common: f64, only1: f64, only2: f64) -> JointRegionDecomposition {
    JointRegionDecomposition {
        area_common: Estimate::exact(common),
        area_only1: Estimate::exact(only1),
        area_only2: Estimate::exact(only2),
    }
}

const TRUNC: Truncation = Truncation {
    cap: 1e-12,
    max_terms: 10_000,
};

fn simulate_joint(
    means: (f64, f64, f64),
    set: &DegreeSet,
    b: (f64, f64),
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a zero mean is a point mass at zero
    let pois = |m: f64| (m > 0.0).then(|| Poisson::new(m).unwrap());
    let (pc, p1, p2) = (pois(means.0), pois(means.1), pois(means.2));
    let draw = |d: &Option<Poisson<f64>>, rng: &mut ChaCha8Rng| {
        d.as_ref().map_or(0, |d| d.sample(rng) as u64)
    };
    let mut hits = 0usize;
    for _ in 0..draws {
        let c = draw(&pc, &mut rng);
        let a = draw(&p1, &mut rng);
        let d = draw(&p2, &mut rng);
        let b1 = (rng.random::<f64>() < b.0) as u64;
        let b2 = (rng.random::<f64>() < b.1) as u64;
        let k1 = c + a + b1;
        let k2 = c + d + b2;
        if set.contains(k1) && set.contains(k2) {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

#[test]
fn joint_probability_matches_simulation() {
    let lambda = 100.0;
    let cases: [(f64, f64, f64, DegreeSet, Indicator, Indicator); 4] = [
        (
            0.01,
            0.015,
            0.008,
            DegreeSet::Tail(3),
            Indicator::ABSENT,
            Indicator::ABSENT,
        ),
        (
            0.02,
            0.01,
            0.01,
            DegreeSet::Tail(4),
            Indicator::new(true, 0.8),
            Indicator::ABSENT,
        ),
        (
            0.005,
            0.02,
            0.03,
            "set:1,2,5".parse().unwrap(),
            Indicator::new(true, 0.7),
            Indicator::new(true, 0.7),
        ),
        (
            0.03,
            0.0,
            0.004,
            DegreeSet::Tail(2),
            Indicator::new(false, 0.9),
            Indicator::new(true, 1.0),
        ),
    ];
    for (i, (c, o1, o2, set, b1, b2)) in cases.iter().enumerate() {
        let got = joint_count_prob(&dec(*c, *o1, *o2), lambda, set, *b1, *b2, TRUNC).unwrap();
        let pb = |b: &Indicator| if b.present { b.survival } else { 0.0 };
        let (sim, se) = simulate_joint(
            (lambda * c, lambda * o1, lambda * o2),
            set,
            (pb(b1), pb(b2)),
            1_000_000,
            i as u64,
        );
        assert!(
            (got.value - sim).abs() <= 4.0 * se + got.truncation_error,
            "case {i}: exact {} sim {sim} ± {se}",
            got.value
        );
    }
}

#[test]
fn joint_probability_is_symmetric() {
    let d = dec(0.012, 0.02, 0.005);
    let set = DegreeSet::Tail(2);
    let (b1, b2) = (Indicator::new(true, 0.6), Indicator::ABSENT);
    let a = joint_count_prob(&d, 150.0, &set, b1, b2, TRUNC)
        .unwrap()
        .value;
    let b = joint_count_prob(&d.swapped(), 150.0, &set, b2, b1, TRUNC)
        .unwrap()
        .value;
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn vanishing_overlap_converges_to_product() {
    let set = DegreeSet::Tail(3);
    let (a1, a2) = (0.03, 0.025);
    let lambda = 80.0;
    let product = shifted_prob(lambda * a1, &set, 0) * shifted_prob(lambda * a2, &set, 0);
    let mut last = f64::INFINITY;
    for k in 0..14 {
        let c = a1.min(a2) * 0.5f64.powi(k);
        let d = dec(c, a1 - c, a2 - c);
        let joint = joint_count_prob(
            &d,
            lambda,
            &set,
            Indicator::ABSENT,
            Indicator::ABSENT,
            TRUNC,
        )
        .unwrap()
        .value;
        let err = (joint - product).abs();
        assert!(err <= last, "error must shrink with the overlap");
        last = err;
    }
    assert!(last < 1e-3 * product);
    let d = dec(0.0, a1, a2);
    let joint = joint_count_prob(
        &d,
        lambda,
        &set,
        Indicator::ABSENT,
        Indicator::ABSENT,
        TRUNC,
    )
    .unwrap();
    assert!((joint.value - product).abs() < 1e-14);
}

#[test]
fn truncation_error_accounts_for_the_dropped_mass() {
    let d = dec(0.2, 0.05, 0.05);
    let set = "set:30,31,32,33,34,35,36,37,38,39,40"
        .parse::<DegreeSet>()
        .unwrap();
    let fine =
        joint_count_prob(&d, 150.0, &set, Indicator::ABSENT, Indicator::ABSENT, TRUNC).unwrap();
    for cap in [1e-2, 1e-4, 1e-6] {
        let coarse = joint_count_prob(
            &d,
            150.0,
            &set,
            Indicator::ABSENT,
            Indicator::ABSENT,
            Truncation {
                cap,
                max_terms: 10_000,
            },
        )
        .unwrap();
        assert!(coarse.truncation_error < cap);
        assert!(coarse.value <= fine.value + 1e-15);
        assert!(fine.value - coarse.value <= coarse.truncation_error + 1e-15);
    }
}

#[test]
fn decomposition_is_symmetric_in_expectation() {
    let a = Sector::new(Point2::new(0.4, 0.5), 0.2, 2.0, 0.2);
    let b = Sector::new(Point2::new(0.55, 0.45), 3.0, 2.5, 0.2);
    let ab = decompose_regions(&a, &b, 200_000, 1);
    let ba = decompose_regions(&b, &a, 200_000, 2);
    let tol = |x: &Estimate, y: &Estimate| 4.0 * (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
    assert!(
        (ab.area_common.value - ba.area_common.value).abs()
            <= tol(&ab.area_common, &ba.area_common)
    );
    assert!(
        (ab.area_only1.value - ba.area_only2.value).abs() <= tol(&ab.area_only1, &ba.area_only2)
    );
    assert!((ab.area1() - a.area()).abs() < 0.01);
}

fn params(n: u64, mu: f64, v: f64, q: f64) -> ModelParams {
    let r = radius_for_mu(n, PI, v, q, mu).unwrap();
    ModelParams::new(n, PI, r, v, q, Mode::Poisson, 17).unwrap()
}

#[test]
fn expected_w_matches_simulated_mean() {
    let p = params(500, 1.0, 0.2, 0.2);
    let set = DegreeSet::Tail(3);
    let cfg = BoundsConfig {
        outer_samples: 20_000,
        area_samples: 1024,
        ..Default::default()
    };
    let opts = TrialOptions {
        sets: vec![set.clone()],
        keep_histogram: false,
    };
    let records = run_trials(&p, 2000, 4, &opts);
    for side in [Side::Out, Side::In] {
        let ew = expected_w(&p, &set, side, &cfg);
        let w: Vec<f64> = records.iter().map(|r| r.w(0, side) as f64).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let se = (var / w.len() as f64 + ew.std_error.powi(2)).sqrt();
        assert!(
            (ew.value - mean).abs() <= 4.0 * se,
            "{side}: EW {ew:?} simulated {mean} ± {se}"
        );
    }
}

#[test]
fn interior_expected_w_has_closed_form() {
    // With no boundary in reach every vertex sees the same mean, except
    // within r of the edges; a tiny radius makes that strip negligible.
    let p = params(100_000, 1.0, 0.0, 0.0);
    let set = DegreeSet::Tail(2);
    let cfg = BoundsConfig {
        outer_samples: 4000,
        area_samples: 512,
        ..Default::default()
    };
    let ew = expected_w(&p, &set, Side::Out, &cfg);
    let interior = 1e5 * (1.0 - poisson_pmf(1.0, 0) - poisson_pmf(1.0, 1));
    // the edge strip (width r ≈ 0.0025) holds about 1% of the vertices
    assert!(
        (ew.value - interior).abs() / interior < 0.02,
        "{ew:?} vs {interior}"
    );
}

#[test]
fn i1_respects_crude_bound() {
    for (n, mu) in [(500u64, 0.5), (2000, 1.0)] {
        let p = params(n, mu, 0.0, 0.2);
        let cfg = BoundsConfig {
            outer_samples: 4000,
            area_samples: 512,
            seed: 3,
            ..Default::default()
        };
        let k = faulty_sector::theory::predict(&p).unwrap().k_n as u32;
        let rep = tv_bound(&p, &DegreeSet::Tail(k), Side::Out, &cfg).unwrap();
        let crude = crude_i1_bound(&p, k);
        assert!(
            rep.i1.value <= crude + 4.0 * rep.i1.std_error,
            "{rep:?} crude {crude}"
        );
    }
}

#[test]
fn bound_reports_are_deterministic_and_bounded() {
    let p = params(500, 1.0, 0.0, 0.0);
    let cfg = BoundsConfig {
        outer_samples: 1000,
        area_samples: 256,
        ..Default::default()
    };
    let set = DegreeSet::Tail(4);
    let a = tv_bound(&p, &set, Side::In, &cfg).unwrap();
    let b = faulty_sector::harness::with_pool(1, || tv_bound(&p, &set, Side::In, &cfg).unwrap());
    assert_eq!(a, b);
    assert!(a.bound.value >= 0.0);
    assert!(a.i1.value >= 0.0 && a.i2.value >= 0.0);
}

#[test]
fn empirical_tv_of_exact_poisson_sample_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = Poisson::new(2.5).unwrap();
    let xs: Vec<u64> = (0..200_000).map(|_| d.sample(&mut rng) as u64).collect();
    assert!(empirical_tv(&xs, 2.5) < 0.01);
}
