//! Seeded parallel Monte Carlo experiments and their comparison with the
//! predicted two-point law of the maximum degree.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::{mean_estimate, TVBoundReport};
use crate::geometry::Estimate;
use crate::model::{
    degree_count, degree_summary, mix64, sample_graph, trial_seed, DegreeSet, Mode, ModelParams,
    Side,
};
use crate::theory::{predict, radius_for_mu, FocusingPrediction, TheoryError};

/// Confidence level of the exact binomial intervals in reports.
pub const CONFIDENCE: f64 = 0.95;

/// Default slack on point masses.
pub const DEFAULT_SLACK: f64 = 0.08;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialOptions {
    /// Degree sets whose counts `W_A` are recorded per trial.
    pub sets: Vec<DegreeSet>,
    /// Keep the per-trial degree histograms.
    pub keep_histogram: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistograms {
    pub out: Vec<u64>,
    #[serde(rename = "in")]
    pub inn: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub realized_count: usize,
    pub alive_count: usize,
    pub max_out: u32,
    pub max_in: u32,
    pub empty: bool,
    pub histogram: Option<DegreeHistograms>,
    /// `(W_A^out, W_A^in)` for each configured set, in order.
    pub w_counts: Vec<(u64, u64)>,
}

impl TrialRecord {
    pub fn max(&self, side: Side) -> u32 {
        match side {
            Side::Out => self.max_out,
            Side::In => self.max_in,
        }
    }

    pub fn w(&self, set_index: usize, side: Side) -> u64 {
        let (o, i) = self.w_counts[set_index];
        match side {
            Side::Out => o,
            Side::In => i,
        }
    }
}

fn degree_histogram(degrees: &[Option<u32>]) -> Vec<u64> {
    let mut h = Vec::new();
    for &d in degrees.iter().flatten() {
        let d = d as usize;
        if h.len() <= d {
            h.resize(d + 1, 0);
        }
        h[d] += 1;
    }
    h
}

/// Generate and summarize trial `index`.
pub fn run_trial(params: &ModelParams, index: u64, opts: &TrialOptions) -> TrialRecord {
    let seed = trial_seed(params.master_seed, index);
    let g = sample_graph(params, seed);
    let s = degree_summary(&g);
    let w_counts = opts
        .sets
        .iter()
        .map(|a| {
            (
                degree_count(&s, a, Side::Out) as u64,
                degree_count(&s, a, Side::In) as u64,
            )
        })
        .collect();
    TrialRecord {
        trial_index: index,
        seed,
        realized_count: g.realized_count,
        alive_count: s.alive_count,
        max_out: s.max_out,
        max_in: s.max_in,
        empty: s.empty,
        histogram: opts.keep_histogram.then(|| DegreeHistograms {
            out: degree_histogram(&s.out_degrees),
            inn: degree_histogram(&s.in_degrees),
        }),
        w_counts,
    }
}

/// Run `trials` independent trials on `parallelism` worker threads. The
/// result depends only on the parameters and the master seed.
pub fn run_trials(
    params: &ModelParams,
    trials: u64,
    parallelism: usize,
    opts: &TrialOptions,
) -> Vec<TrialRecord> {
    with_pool(parallelism, || {
        (0..trials)
            .into_par_iter()
            .map(|i| run_trial(params, i, opts))
            .collect()
    })
}

/// Run `f` on a dedicated pool of `parallelism` threads.
pub fn with_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}

pub fn write_trials_csv<W: Write>(records: &[TrialRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "trial,seed,N,alive,max_out,max_in,empty")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.trial_index,
            r.seed,
            r.realized_count,
            r.alive_count,
            r.max_out,
            r.max_in,
            r.empty as u8
        )?;
    }
    Ok(())
}

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let tail = 0.5 * (1.0 - confidence);
    let (x, t) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, t - x + 1.0).unwrap().inverse_cdf(tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, t - x).unwrap().inverse_cdf(1.0 - tail)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub count: u64,
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MassEstimate {
    pub fn new(count: u64, trials: u64) -> Self {
        let p = count as f64 / trials as f64;
        let (ci_low, ci_high) = clopper_pearson(count, trials, CONFIDENCE);
        Self {
            count,
            value: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            ci_low,
            ci_high,
        }
    }

    /// Largest distance from the point estimate to an interval end.
    pub fn half_width(&self) -> f64 {
        (self.value - self.ci_low).max(self.ci_high - self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    /// `"<="` or `">="`: how `observed` must relate to `threshold`.
    pub relation: String,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: &str, observed: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            observed,
            threshold,
            relation: "<=".into(),
            pass: observed <= threshold,
        }
    }

    pub fn at_least(name: &str, observed: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            observed,
            threshold,
            relation: ">=".into(),
            pass: observed >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    /// `histogram[d]` = number of trials whose maximum degree was `d`.
    pub histogram: Vec<u64>,
    pub masses: Vec<f64>,
    pub at_k_minus_1: MassEstimate,
    pub at_k: MassEstimate,
    pub elsewhere: MassEstimate,
    pub two_point: MassEstimate,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: ModelParams,
    pub prediction: FocusingPrediction,
    pub trials: u64,
    pub slack: f64,
    pub confidence: f64,
    pub sides: Vec<SideReport>,
    pub pass: bool,
    pub note: String,
    pub bound_checks: Vec<TVBoundReport>,
    pub elapsed_ms: Option<u64>,
}

const LAW_NOTE: &str = "predicted masses: P(max = k-1) = exp(-a), P(max = k) = 1 - exp(-a), \
a = n(1-v)P(Poi(mu) >= k); the slack on point masses is a finite-size acceptance policy";

fn side_report(
    records: &[TrialRecord],
    pred: &FocusingPrediction,
    side: Side,
    slack: f64,
) -> SideReport {
    let t = records.len() as u64;
    let mut histogram = Vec::new();
    for r in records {
        let d = r.max(side) as usize;
        if histogram.len() <= d {
            histogram.resize(d + 1, 0u64);
        }
        histogram[d] += 1;
    }
    let count_at = |d: u64| -> u64 { histogram.get(d as usize).copied().unwrap_or(0) };
    let km1 = if pred.k_n >= 1 {
        count_at(pred.k_n - 1)
    } else {
        0
    };
    let k = count_at(pred.k_n);
    let at_k_minus_1 = MassEstimate::new(km1, t);
    let at_k = MassEstimate::new(k, t);
    let two_point = MassEstimate::new(km1 + k, t);
    let elsewhere = MassEstimate::new(t - km1 - k, t);
    let verdicts = vec![
        Verdict::at_most(
            "abs(P(max=k-1) - exp(-a))",
            (at_k_minus_1.value - pred.p_km1).abs(),
            slack + at_k_minus_1.half_width(),
        ),
        Verdict::at_least("P(max in {k-1,k})", two_point.value, 1.0 - 2.0 * slack),
    ];
    SideReport {
        side,
        masses: histogram.iter().map(|&c| c as f64 / t as f64).collect(),
        histogram,
        at_k_minus_1,
        at_k,
        elsewhere,
        two_point,
        pass: verdicts.iter().all(|v| v.pass),
        verdicts,
    }
}

/// Compare empirical maxima on both sides with the predicted two-point law.
pub fn compare(
    params: &ModelParams,
    records: &[TrialRecord],
    prediction: &FocusingPrediction,
    slack: f64,
) -> ExperimentReport {
    assert!(!records.is_empty(), "compare needs at least one trial");
    let sides: Vec<SideReport> = [Side::Out, Side::In]
        .into_iter()
        .map(|s| side_report(records, prediction, s, slack))
        .collect();
    ExperimentReport {
        params: *params,
        prediction: *prediction,
        trials: records.len() as u64,
        slack,
        confidence: CONFIDENCE,
        pass: sides.iter().all(|s| s.pass),
        sides,
        note: LAW_NOTE.to_string(),
        bound_checks: Vec::new(),
        elapsed_ms: None,
    }
}

/// Predict, simulate and compare in one go.
pub fn verify(
    params: &ModelParams,
    trials: u64,
    parallelism: usize,
    slack: f64,
) -> Result<ExperimentReport, TheoryError> {
    let prediction = predict(params)?;
    let records = run_trials(params, trials, parallelism, &TrialOptions::default());
    Ok(compare(params, &records, &prediction, slack))
}

/// Records whose maxima are drawn from the predicted two-point law itself
/// (both sides independently).
pub fn manufacture_records(
    prediction: &FocusingPrediction,
    trials: u64,
    seed: u64,
) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = prediction.k_n as u32;
    let draw = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < prediction.p_km1 {
            k.saturating_sub(1)
        } else {
            k
        }
    };
    (0..trials)
        .map(|i| {
            let max_out = draw(&mut rng);
            let max_in = draw(&mut rng);
            TrialRecord {
                trial_index: i,
                seed: 0,
                realized_count: 0,
                alive_count: 0,
                max_out,
                max_in,
                empty: false,
                histogram: None,
                w_counts: Vec::new(),
            }
        })
        .collect()
}

/// Mean of `W_A` over trials for the set at `set_index`.
pub fn w_mean(records: &[TrialRecord], set_index: usize, side: Side) -> Estimate {
    let xs: Vec<f64> = records
        .iter()
        .map(|r| r.w(set_index, side) as f64)
        .collect();
    mean_estimate(&xs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RadiusSchedule {
    /// Choose `r_n` so that `μ` stays at the given value.
    FixedMu(f64),
    /// One radius per grid point.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: u64,
    pub r: Option<f64>,
    pub report: Result<ExperimentReport, String>,
}

/// One experiment per grid point. A failing point is recorded and does not
/// stop the others.
pub fn sweep(
    base: &ModelParams,
    n_grid: &[u64],
    schedule: &RadiusSchedule,
    trials: u64,
    parallelism: usize,
    slack: f64,
) -> Vec<SweepPoint> {
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let r = match schedule {
                RadiusSchedule::FixedMu(m) => {
                    radius_for_mu(n, base.alpha, base.v, base.q, *m).map_err(|e| e.to_string())
                }
                RadiusSchedule::Explicit(rs) => rs
                    .get(i)
                    .copied()
                    .ok_or_else(|| format!("no radius given for grid point {i}")),
            };
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    return SweepPoint {
                        n,
                        r: None,
                        report: Err(e),
                    }
                }
            };
            let params = ModelParams { n, r, ..*base };
            let report = params.validate().map_err(|e| e.to_string()).and_then(|_| {
                verify(&params, trials, parallelism, slack).map_err(|e| e.to_string())
            });
            SweepPoint {
                n,
                r: Some(r),
                report,
            }
        })
        .collect()
}

/// True when `k_n` never decreases along the sweep's successful points.
pub fn k_monotone(points: &[SweepPoint]) -> bool {
    let ks: Vec<u64> = points
        .iter()
        .filter_map(|p| p.report.as_ref().ok().map(|r| r.prediction.k_n))
        .collect();
    ks.windows(2).all(|w| w[0] <= w[1])
}

fn normalized_histogram(xs: &[u32]) -> Vec<f64> {
    let max = xs.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0.0; max + 1];
    let w = 1.0 / xs.len() as f64;
    for &x in xs {
        h[x as usize] += w;
    }
    h
}

/// Half the L¹ distance between the empirical laws of two samples.
pub fn law_distance(a: &[u32], b: &[u32]) -> f64 {
    let (ha, hb) = (normalized_histogram(a), normalized_histogram(b));
    let len = ha.len().max(hb.len());
    let terms: Vec<f64> = (0..len)
        .map(|d| (ha.get(d).unwrap_or(&0.0) - hb.get(d).unwrap_or(&0.0)).abs())
        .collect();
    0.5 * crate::bounds::stable_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub distance: f64,
    /// Bootstrap standard deviation of the distance.
    pub bootstrap_error: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Law distance with a bootstrap error bar from resampling both samples.
pub fn bootstrap_distance(a: &[u32], b: &[u32], resamples: usize, seed: u64) -> DistanceEstimate {
    let distance = law_distance(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0xB007));
    let mut ds = Vec::with_capacity(resamples);
    let mut ra = vec![0u32; a.len()];
    let mut rb = vec![0u32; b.len()];
    for _ in 0..resamples {
        ra.iter_mut()
            .for_each(|x| *x = a[rng.random_range(0..a.len())]);
        rb.iter_mut()
            .for_each(|x| *x = b[rng.random_range(0..b.len())]);
        ds.push(law_distance(&ra, &rb));
    }
    let est = mean_estimate(&ds);
    DistanceEstimate {
        distance,
        // sd of the bootstrap replicates, not of their mean
        bootstrap_error: est.std_error * (ds.len() as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAgreement {
    pub params: ModelParams,
    pub trials: u64,
    pub out: DistanceEstimate,
    #[serde(rename = "in")]
    pub inn: DistanceEstimate,
}

/// Distance between the binomial-mode and Poisson-mode laws of the maximum
/// out- and in-degree, both simulated from the same master seed.
pub fn mode_agreement(params: &ModelParams, trials: u64, parallelism: usize) -> ModeAgreement {
    let opts = TrialOptions::default();
    let bin = run_trials(
        &params.with_mode(Mode::Binomial),
        trials,
        parallelism,
        &opts,
    );
    let poi = run_trials(&params.with_mode(Mode::Poisson), trials, parallelism, &opts);
    agreement_between(params, &bin, &poi)
}

pub fn agreement_between(
    params: &ModelParams,
    a: &[TrialRecord],
    b: &[TrialRecord],
) -> ModeAgreement {
    let pick = |rs: &[TrialRecord], s: Side| rs.iter().map(|r| r.max(s)).collect::<Vec<u32>>();
    ModeAgreement {
        params: *params,
        trials: a.len() as u64,
        out: bootstrap_distance(
            &pick(a, Side::Out),
            &pick(b, Side::Out),
            BOOTSTRAP_RESAMPLES,
            params.master_seed,
        ),
        inn: bootstrap_distance(
            &pick(a, Side::In),
            &pick(b, Side::In),
            BOOTSTRAP_RESAMPLES,
            params.master_seed ^ 1,
        ),
    }
}
