//! Stein–Chen total-variation bounds for the number `W_A` of alive vertices
//! whose out- or in-degree lies in a set `A`, for the Poisson-mode graph
//! with uniform density on the unit square.
//!
//! With `λ` the Poisson intensity, the bound on `d_TV(W_A, Poi(E W_A))` is
//! `min(1, 1/E W_A) (I₁ + I₂)`, where both integrals run over pairs of
//! vertices `x₁ ∈ Q`, `x₂ ∈ B(x₁, 3r) ∩ Q` with independent uniform
//! orientations:
//!
//! * `I₁` integrates the product of the two marginal probabilities that
//!   each vertex has its degree in `A`;
//! * `I₂` integrates the joint probability, where each degree also counts
//!   the other vertex when it is inside the relevant sector and the arc
//!   survives.
//!
//! For out-degrees the counts are `Poisson(λ(1−q)(1−v)|S ∩ Q|)` over the
//! vertex's own sector. For in-degrees they come from the thinned process
//! with intensity `λα(1−q)(1−v)/2π` over the disk `B(x, r) ∩ Q`. Both
//! integrals and `E W_A` are estimated by Monte Carlo; overlapping regions
//! are split into three disjoint pieces whose areas are estimated by
//! stratified sampling.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    hit_estimate, region_area, sector_contains, stratified_points, Estimate, Point2, Rect, Sector,
};
use crate::model::{mix64, DegreeSet, ModelParams, Side};
use crate::theory::{poisson_pmf, poisson_tail, tail_from};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("joint Poisson sum did not reach the truncation cap {cap:e} within {terms} terms (remaining mass {remaining:e})")]
    TruncationBudgetExceeded {
        cap: f64,
        terms: usize,
        remaining: f64,
    },
}

/// Monte Carlo budgets for bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Outer samples for `E W_A`, `I₁` and `I₂`.
    pub outer_samples: usize,
    /// Stratified samples per area estimate inside the integrands.
    pub area_samples: usize,
    /// Cap on the neglected Poisson mass per joint-probability evaluation.
    pub truncation_cap: f64,
    /// Maximum number of terms in a joint-probability sum.
    pub max_terms: usize,
    pub seed: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            outer_samples: 10_000,
            area_samples: 4096,
            truncation_cap: 1e-8,
            max_terms: 10_000,
            seed: 0,
        }
    }
}

impl BoundsConfig {
    fn truncation(&self) -> Truncation {
        Truncation {
            cap: self.truncation_cap,
            max_terms: self.max_terms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub cap: f64,
    pub max_terms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            cap: 1e-8,
            max_terms: 10_000,
        }
    }
}

/// Areas inside `Q` of `R₁ ∩ R₂`, `R₁ \ R₂` and `R₂ \ R₁`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointRegionDecomposition {
    pub area_common: Estimate,
    pub area_only1: Estimate,
    pub area_only2: Estimate,
}

impl JointRegionDecomposition {
    pub fn area1(&self) -> f64 {
        self.area_common.value + self.area_only1.value
    }

    pub fn area2(&self) -> f64 {
        self.area_common.value + self.area_only2.value
    }

    pub fn swapped(&self) -> Self {
        Self {
            area_common: self.area_common,
            area_only1: self.area_only2,
            area_only2: self.area_only1,
        }
    }
}

pub fn decompose_regions(
    r1: &Sector,
    r2: &Sector,
    samples: usize,
    seed: u64,
) -> JointRegionDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    decompose_with(r1, r2, samples, &mut rng)
}

fn decompose_with<R: Rng>(
    r1: &Sector,
    r2: &Sector,
    samples: usize,
    rng: &mut R,
) -> JointRegionDecomposition {
    let rect = Rect::disk_box_in_square(r1.apex, r1.radius)
        .union(Rect::disk_box_in_square(r2.apex, r2.radius));
    let box_area = rect.area();
    let (mut common, mut only1, mut only2) = (0usize, 0usize, 0usize);
    let total = stratified_points(rect, samples, rng, |p| {
        match (sector_contains(r1, p), sector_contains(r2, p)) {
            (true, true) => common += 1,
            (true, false) => only1 += 1,
            (false, true) => only2 += 1,
            (false, false) => {}
        }
    });
    JointRegionDecomposition {
        area_common: hit_estimate(common, total, box_area),
        area_only1: hit_estimate(only1, total, box_area),
        area_only2: hit_estimate(only2, total, box_area),
    }
}

/// Contribution `B` of the other vertex to a degree: 1 with probability
/// `survival` when it is geometrically `present`, 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub present: bool,
    pub survival: f64,
}

impl Indicator {
    pub const ABSENT: Indicator = Indicator {
        present: false,
        survival: 0.0,
    };

    pub fn new(present: bool, survival: f64) -> Self {
        Self { present, survival }
    }

    fn prob_one(&self) -> f64 {
        if self.present {
            self.survival
        } else {
            0.0
        }
    }
}

/// `P(Poi(mean) + shift ∈ set)`.
pub fn shifted_prob(mean: f64, set: &DegreeSet, shift: u64) -> f64 {
    match set {
        DegreeSet::Tail(t) => tail_from(mean, *t as i64 - shift as i64),
        DegreeSet::Finite(s) => s
            .range(shift.min(u32::MAX as u64) as u32..)
            .map(|&a| poisson_pmf(mean, a as u64 - shift))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointProbability {
    pub value: f64,
    /// Upper bound on the Poisson mass left out of the sum.
    pub truncation_error: f64,
}

/// `P(N_c + N₁ + B₁ ∈ A, N_c + N₂ + B₂ ∈ A)` for independent Poisson
/// `N_c, N₁, N₂` with means `lambda_eff` times the three decomposition
/// areas and independent indicators `B₁, B₂`.
///
/// The sum runs over the common count `N_c` until the Poisson mass beyond
/// it falls below the cap.
pub fn joint_count_prob(
    dec: &JointRegionDecomposition,
    lambda_eff: f64,
    set: &DegreeSet,
    b1: Indicator,
    b2: Indicator,
    trunc: Truncation,
) -> Result<JointProbability, BoundsError> {
    if set.is_empty() {
        return Ok(JointProbability {
            value: 0.0,
            truncation_error: 0.0,
        });
    }
    let mc = lambda_eff * dec.area_common.value.max(0.0);
    let m1 = lambda_eff * dec.area_only1.value.max(0.0);
    let m2 = lambda_eff * dec.area_only2.value.max(0.0);
    let (p1, p2) = (b1.prob_one(), b2.prob_one());
    let side = |mean: f64, p: f64, c: u64| -> f64 {
        let base = shifted_prob(mean, set, c);
        if p == 0.0 {
            base
        } else {
            (1.0 - p) * base + p * shifted_prob(mean, set, c + 1)
        }
    };
    let last_useful = set.max_member().map(u64::from);
    let mut terms = Vec::new();
    let mut c = 0u64;
    let remaining = loop {
        terms.push(poisson_pmf(mc, c) * side(m1, p1, c) * side(m2, p2, c));
        let remaining = poisson_tail(mc, c + 1);
        if remaining < trunc.cap {
            break remaining;
        }
        if last_useful.is_some_and(|top| c >= top) {
            // every later term vanishes
            break 0.0;
        }
        if terms.len() >= trunc.max_terms {
            return Err(BoundsError::TruncationBudgetExceeded {
                cap: trunc.cap,
                terms: terms.len(),
                remaining,
            });
        }
        c += 1;
    };
    Ok(JointProbability {
        value: stable_sum(&terms).clamp(0.0, 1.0),
        truncation_error: remaining,
    })
}

/// Neumaier-compensated sum; summing a fixed-order slice makes results
/// independent of how samples were scheduled.
pub(crate) fn stable_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error.
pub(crate) fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate::exact(0.0);
    }
    let mean = stable_sum(xs) / n as f64;
    if n == 1 {
        return Estimate::exact(mean);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = stable_sum(&dev) / (n - 1) as f64;
    Estimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
    }
}

fn sample_rng(seed: u64, salt: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed ^ salt) ^ index as u64))
}

fn uniform_point<R: Rng>(rng: &mut R) -> Point2 {
    Point2::new(rng.random(), rng.random())
}

/// Poisson intensity (per unit area) of the points feeding a degree count.
fn effective_intensity(params: &ModelParams, side: Side) -> f64 {
    let base = params.n as f64 * (1.0 - params.q) * (1.0 - params.v);
    match side {
        Side::Out => base,
        Side::In => base * params.alpha / TAU,
    }
}

/// The region whose points are counted for a vertex at `x` with
/// orientation `y`.
fn count_region(params: &ModelParams, side: Side, x: Point2, y: f64) -> Sector {
    match side {
        Side::Out => params.sector(x, y),
        Side::In => Sector::disk(x, params.r),
    }
}

const EW_SALT: u64 = 0xE3A1_5D07_44C1_9B2B;
const PAIR_SALT: u64 = 0x1B0A_7F3C_9D62_E581;

/// Monte Carlo estimate of `E W_A` for the Poisson-mode graph with
/// intensity `params.n`.
pub fn expected_w(
    params: &ModelParams,
    set: &DegreeSet,
    side: Side,
    cfg: &BoundsConfig,
) -> Estimate {
    let scale = (1.0 - params.v) * params.n as f64;
    if set.is_empty() {
        return Estimate::exact(0.0);
    }
    if *set == DegreeSet::all() {
        return Estimate::exact(scale);
    }
    let lambda_eff = effective_intensity(params, side);
    let values: Vec<f64> = (0..cfg.outer_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, EW_SALT, i);
            let x = uniform_point(&mut rng);
            let y = rng.random::<f64>() * TAU;
            let region = count_region(params, side, x, y);
            let area = region_area(&region, cfg.area_samples, &mut rng).value;
            scale * shifted_prob(lambda_eff * area, set, 0)
        })
        .collect();
    mean_estimate(&values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVBoundReport {
    pub side: Side,
    pub set: DegreeSet,
    #[serde(rename = "EW")]
    pub ew: Estimate,
    #[serde(rename = "I1")]
    pub i1: Estimate,
    #[serde(rename = "I2")]
    pub i2: Estimate,
    /// Largest neglected Poisson mass over all joint-probability sums.
    pub truncation_error: f64,
    /// Bound on the total effect of truncation on `I₂`.
    pub truncation_error_integrated: f64,
    /// `min(1, 1/EW) (I₁ + I₂)`.
    pub bound: Estimate,
}

struct PairSample {
    i1: f64,
    i2: f64,
    truncation: f64,
}

/// Evaluate the total-variation bound for `W_A` on the given side.
pub fn tv_bound(
    params: &ModelParams,
    set: &DegreeSet,
    side: Side,
    cfg: &BoundsConfig,
) -> Result<TVBoundReport, BoundsError> {
    let ew = expected_w(params, set, side, cfg);
    if set.is_empty() {
        return Ok(TVBoundReport {
            side,
            set: set.clone(),
            ew,
            i1: Estimate::exact(0.0),
            i2: Estimate::exact(0.0),
            truncation_error: 0.0,
            truncation_error_integrated: 0.0,
            bound: Estimate::exact(0.0),
        });
    }
    let r = params.r;
    let reach = 3.0 * r;
    let lambda_eff = effective_intensity(params, side);
    let weight = {
        let f = (1.0 - params.v) * params.n as f64;
        f * f * (2.0 * reach) * (2.0 * reach)
    };
    let survival = 1.0 - params.q;
    let trunc = cfg.truncation();

    let samples: Vec<Result<PairSample, BoundsError>> = (0..cfg.outer_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, PAIR_SALT, i);
            let x1 = uniform_point(&mut rng);
            let y1 = rng.random::<f64>() * TAU;
            let dx = (2.0 * rng.random::<f64>() - 1.0) * reach;
            let dy = (2.0 * rng.random::<f64>() - 1.0) * reach;
            let y2 = rng.random::<f64>() * TAU;
            let x2 = Point2::new(x1.x + dx, x1.y + dy);
            if dx * dx + dy * dy > reach * reach || !x2.in_unit_square() {
                return Ok(PairSample {
                    i1: 0.0,
                    i2: 0.0,
                    truncation: 0.0,
                });
            }
            let s1 = params.sector(x1, y1);
            let s2 = params.sector(x2, y2);
            let (r1, r2) = (
                count_region(params, side, x1, y1),
                count_region(params, side, x2, y2),
            );
            let dec = if x1.dist_sq(x2) > 4.0 * r * r {
                JointRegionDecomposition {
                    area_common: Estimate::exact(0.0),
                    area_only1: region_area(&r1, cfg.area_samples, &mut rng),
                    area_only2: region_area(&r2, cfg.area_samples, &mut rng),
                }
            } else {
                decompose_with(&r1, &r2, cfg.area_samples, &mut rng)
            };
            // b1 is the other vertex's contribution to the first count
            let (b1, b2) = match side {
                Side::Out => (
                    Indicator::new(sector_contains(&s1, x2), survival),
                    Indicator::new(sector_contains(&s2, x1), survival),
                ),
                Side::In => (
                    Indicator::new(sector_contains(&s2, x1), survival),
                    Indicator::new(sector_contains(&s1, x2), survival),
                ),
            };
            let marg1 = shifted_prob(lambda_eff * dec.area1(), set, 0);
            let marg2 = shifted_prob(lambda_eff * dec.area2(), set, 0);
            let joint = joint_count_prob(&dec, lambda_eff, set, b1, b2, trunc)?;
            Ok(PairSample {
                i1: weight * marg1 * marg2,
                i2: weight * joint.value,
                truncation: joint.truncation_error,
            })
        })
        .collect();
    let samples: Vec<PairSample> = samples.into_iter().collect::<Result<_, _>>()?;

    let i1v: Vec<f64> = samples.iter().map(|s| s.i1).collect();
    let i2v: Vec<f64> = samples.iter().map(|s| s.i2).collect();
    let sumv: Vec<f64> = samples.iter().map(|s| s.i1 + s.i2).collect();
    let truncation_error = samples.iter().map(|s| s.truncation).fold(0.0, f64::max);
    let truncation_error_integrated =
        weight * samples.iter().map(|s| s.truncation).sum::<f64>() / samples.len().max(1) as f64;
    let i1 = mean_estimate(&i1v);
    let i2 = mean_estimate(&i2v);
    let total = mean_estimate(&sumv);

    let bound = if ew.value > 1.0 {
        let value = total.value / ew.value;
        let rel_ew = ew.std_error / ew.value;
        Estimate {
            value,
            std_error: ((total.std_error / ew.value).powi(2) + (value * rel_ew).powi(2)).sqrt(),
        }
    } else {
        total
    };
    Ok(TVBoundReport {
        side,
        set: set.clone(),
        ew,
        i1,
        i2,
        truncation_error,
        truncation_error_integrated,
        bound,
    })
}

/// The crude bound `n² ξ(t)² π (3r)²` on `I₁` for `A = {j ≥ t}`, with
/// `ξ(t) = P(Poi(μ) ≥ t)`.
pub fn crude_i1_bound(params: &ModelParams, threshold: u32) -> f64 {
    let xi = poisson_tail(crate::theory::mu(params), threshold as u64);
    let n = params.n as f64;
    n * n * xi * xi * PI * 9.0 * params.r * params.r
}

/// Half the L¹ distance between the empirical law of `samples` and
/// `Poisson(mean)`, counting the Poisson mass above the sample maximum in
/// full.
pub fn empirical_tv(samples: &[u64], mean: f64) -> f64 {
    assert!(
        !samples.is_empty(),
        "empirical_tv needs at least one sample"
    );
    let hist = histogram(samples);
    let t = samples.len() as f64;
    let mut diffs: Vec<f64> = hist
        .iter()
        .enumerate()
        .map(|(k, &c)| (c as f64 / t - poisson_pmf(mean, k as u64)).abs())
        .collect();
    diffs.push(poisson_tail(mean, hist.len() as u64));
    (0.5 * stable_sum(&diffs)).clamp(0.0, 1.0)
}

/// Error scale of [`empirical_tv`]: `½ Σ_k sqrt(p̂_k (1 − p̂_k) / T)`, the
/// summed standard errors of the histogram cells.
pub fn empirical_tv_std_error(samples: &[u64]) -> f64 {
    let hist = histogram(samples);
    let t = samples.len() as f64;
    let terms: Vec<f64> = hist
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            (p * (1.0 - p) / t).sqrt()
        })
        .collect();
    0.5 * stable_sum(&terms)
}

fn histogram(samples: &[u64]) -> Vec<u64> {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; max + 1];
    for &s in samples {
        hist[s as usize] += 1;
    }
    hist
}
