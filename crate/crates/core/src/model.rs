//! Sampling of the random faulty scaled sector graph and its degree
//! statistics.
//!
//! A realization is fully determined by `(params, trial seed)`. The trial
//! seed is derived from the master seed and the trial index by
//! [`trial_seed`]. From the trial seed a ChaCha8 stream draws, in order:
//!
//! 1. the vertex count (`n` in binomial mode, one `Poisson(n)` draw in
//!    Poisson mode);
//! 2. for each vertex `i = 0..N` in turn: `x`, `y`, the orientation
//!    `θ ∈ [0, 2π)` and one uniform `u`, with the vertex alive iff `u ≥ v`.
//!
//! Edge faults are not taken from the stream. The candidate arc `(i, j)`
//! survives iff [`edge_uniform`]`(trial_seed, i, j) ≥ q`, a counter-based
//! hash of the ordered pair, so arcs can be generated lazily in any order.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build_index, sector_contains, Point2, Sector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n must be at least 1")]
    ZeroCount,
    #[error("alpha must lie in (0, 2π], got {0}")]
    Alpha(f64),
    #[error("r must lie in (0, 0.5), got {0}")]
    Radius(f64),
    #[error("v must lie in [0, 1), got {0}")]
    VertexFault(f64),
    #[error("q must lie in [0, 1), got {0}")]
    EdgeFault(f64),
}

/// Point-process mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exactly `n` uniform points.
    Binomial,
    /// `Poisson(n)` uniform points.
    Poisson,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Binomial => "binomial",
            Mode::Poisson => "poisson",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binomial" => Ok(Mode::Binomial),
            "poisson" => Ok(Mode::Poisson),
            _ => Err(format!("unknown mode `{s}` (expected binomial or poisson)")),
        }
    }
}

/// Which degree of a vertex is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Out,
    In,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Out => "out",
            Side::In => "in",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u64,
    pub alpha: f64,
    pub r: f64,
    pub v: f64,
    pub q: f64,
    pub mode: Mode,
    pub master_seed: u64,
}

impl ModelParams {
    pub fn new(
        n: u64,
        alpha: f64,
        r: f64,
        v: f64,
        q: f64,
        mode: Mode,
        master_seed: u64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            n,
            alpha,
            r,
            v,
            q,
            mode,
            master_seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n == 0 {
            return Err(ParamError::ZeroCount);
        }
        if !(self.alpha > 0.0 && self.alpha <= TAU) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(ParamError::Radius(self.r));
        }
        if !(0.0..1.0).contains(&self.v) {
            return Err(ParamError::VertexFault(self.v));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(ParamError::EdgeFault(self.q));
        }
        Ok(())
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..self
        }
    }

    pub fn sector(&self, apex: Point2, orientation: f64) -> Sector {
        Sector::new(apex, orientation, self.alpha, self.r)
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `mix64(master ^ mix64(index))`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ mix64(index))
}

const EDGE_SALT: u64 = 0x5EC7_0A9C_ED6E_F417;

/// Uniform in `[0, 1)` attached to the ordered pair `(i, j)` of a trial.
pub fn edge_uniform(trial_seed: u64, i: u32, j: u32) -> f64 {
    let key = ((i as u64) << 32) | j as u64;
    let h = mix64(mix64(trial_seed ^ EDGE_SALT) ^ key);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One realization of the faulty sector graph. Arcs are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultySectorGraph {
    pub realized_count: usize,
    pub positions: Vec<Point2>,
    pub orientations: Vec<f64>,
    pub alive: Vec<bool>,
    pub arcs: Vec<(u32, u32)>,
}

/// Vertex positions, orientations and alive flags of a realization,
/// drawn in the documented order.
pub fn sample_vertices(params: &ModelParams, trial_seed: u64) -> FaultySectorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let count = match params.mode {
        Mode::Binomial => params.n as usize,
        Mode::Poisson => {
            let dist = Poisson::new(params.n as f64).expect("n >= 1 is a valid Poisson mean");
            dist.sample(&mut rng) as usize
        }
    };
    let mut positions = Vec::with_capacity(count);
    let mut orientations = Vec::with_capacity(count);
    let mut alive = Vec::with_capacity(count);
    for _ in 0..count {
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        let theta: f64 = rng.random::<f64>() * TAU;
        let u: f64 = rng.random();
        positions.push(Point2::new(x, y));
        orientations.push(theta);
        alive.push(u >= params.v);
    }
    FaultySectorGraph {
        realized_count: count,
        positions,
        orientations,
        alive,
        arcs: Vec::new(),
    }
}

/// Sample one realization from the given trial seed.
pub fn sample_graph(params: &ModelParams, trial_seed: u64) -> FaultySectorGraph {
    let mut g = sample_vertices(params, trial_seed);
    connect_arcs(params, &mut g, trial_seed);
    g
}

/// Fill `g.arcs` from the vertices already in `g`: every ordered pair of
/// alive vertices with `j` in the sector of `i` whose edge-fault uniform
/// passes.
pub fn connect_arcs(params: &ModelParams, g: &mut FaultySectorGraph, trial_seed: u64) {
    let idx = build_index(&g.positions, params.r);
    let r2 = params.r * params.r;
    let mut arcs = Vec::new();
    for i in 0..g.realized_count {
        if !g.alive[i] {
            continue;
        }
        let apex = g.positions[i];
        let s = params.sector(apex, g.orientations[i]);
        idx.for_each_candidate(apex, |j| {
            if j == i || !g.alive[j] {
                return;
            }
            let p = g.positions[j];
            if p.dist_sq(apex) <= r2
                && sector_contains(&s, p)
                && edge_uniform(trial_seed, i as u32, j as u32) >= params.q
            {
                arcs.push((i as u32, j as u32));
            }
        });
    }
    arcs.sort_unstable();
    g.arcs = arcs;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    /// Out-degree per vertex, `None` for dead vertices.
    pub out_degrees: Vec<Option<u32>>,
    pub in_degrees: Vec<Option<u32>>,
    pub max_out: u32,
    pub max_in: u32,
    pub alive_count: usize,
    /// Set when no vertex is alive; the maxima are then reported as 0.
    pub empty: bool,
}

impl DegreeSummary {
    pub fn degrees(&self, side: Side) -> &[Option<u32>] {
        match side {
            Side::Out => &self.out_degrees,
            Side::In => &self.in_degrees,
        }
    }

    pub fn max(&self, side: Side) -> u32 {
        match side {
            Side::Out => self.max_out,
            Side::In => self.max_in,
        }
    }
}

pub fn degree_summary(g: &FaultySectorGraph) -> DegreeSummary {
    let mut out = vec![0u32; g.realized_count];
    let mut inn = vec![0u32; g.realized_count];
    for &(i, j) in &g.arcs {
        out[i as usize] += 1;
        inn[j as usize] += 1;
    }
    let mask = |d: Vec<u32>| -> Vec<Option<u32>> {
        d.into_iter()
            .zip(&g.alive)
            .map(|(d, &a)| a.then_some(d))
            .collect()
    };
    let out_degrees = mask(out);
    let in_degrees = mask(inn);
    let alive_count = g.alive.iter().filter(|&&a| a).count();
    let max_of = |d: &[Option<u32>]| d.iter().flatten().copied().max().unwrap_or(0);
    DegreeSummary {
        max_out: max_of(&out_degrees),
        max_in: max_of(&in_degrees),
        out_degrees,
        in_degrees,
        alive_count,
        empty: alive_count == 0,
    }
}

/// A set of degrees: either finite or an upper tail `{j : j ≥ t}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DegreeSet {
    Finite(BTreeSet<u32>),
    Tail(u32),
}

impl DegreeSet {
    pub fn all() -> Self {
        DegreeSet::Tail(0)
    }

    pub fn empty() -> Self {
        DegreeSet::Finite(BTreeSet::new())
    }

    pub fn contains(&self, j: u64) -> bool {
        match self {
            DegreeSet::Finite(s) => j <= u32::MAX as u64 && s.contains(&(j as u32)),
            DegreeSet::Tail(t) => j >= *t as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, DegreeSet::Finite(s) if s.is_empty())
    }

    /// Largest member, `None` for tails and the empty set.
    pub fn max_member(&self) -> Option<u32> {
        match self {
            DegreeSet::Finite(s) => s.iter().next_back().copied(),
            DegreeSet::Tail(_) => None,
        }
    }
}

impl fmt::Display for DegreeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeSet::Tail(t) => write!(f, "tail:{t}"),
            DegreeSet::Finite(s) => {
                let items: Vec<String> = s.iter().map(u32::to_string).collect();
                write!(f, "set:{}", items.join(","))
            }
        }
    }
}

impl FromStr for DegreeSet {
    type Err = String;

    /// Parses `tail:t` or `set:a,b,c` (`set:` alone is the empty set).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(t) = s.strip_prefix("tail:") {
            return t
                .trim()
                .parse()
                .map(DegreeSet::Tail)
                .map_err(|e| format!("bad tail threshold in `{s}`: {e}"));
        }
        if let Some(items) = s.strip_prefix("set:") {
            let mut set = BTreeSet::new();
            for item in items.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                set.insert(
                    item.parse()
                        .map_err(|e| format!("bad degree `{item}` in `{s}`: {e}"))?,
                );
            }
            return Ok(DegreeSet::Finite(set));
        }
        Err(format!(
            "degree set `{s}` must look like `tail:t` or `set:a,b,c`"
        ))
    }
}

impl Serialize for DegreeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DegreeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of alive vertices whose degree on `side` lies in `set`.
pub fn degree_count(summary: &DegreeSummary, set: &DegreeSet, side: Side) -> usize {
    summary
        .degrees(side)
        .iter()
        .flatten()
        .filter(|&&d| set.contains(d as u64))
        .count()
}

/// Edge list: a header `N alive_count`, then one `i j` line per arc.
pub fn write_edge_list<W: Write>(g: &FaultySectorGraph, mut w: W) -> io::Result<()> {
    let alive = g.alive.iter().filter(|&&a| a).count();
    writeln!(w, "{} {}", g.realized_count, alive)?;
    for &(i, j) in &g.arcs {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

/// Vertex table with columns `index,x,y,theta,alive`.
pub fn write_vertex_csv<W: Write>(g: &FaultySectorGraph, mut w: W) -> io::Result<()> {
    writeln!(w, "index,x,y,theta,alive")?;
    for i in 0..g.realized_count {
        let p = g.positions[i];
        writeln!(
            w,
            "{i},{},{},{},{}",
            p.x, p.y, g.orientations[i], g.alive[i] as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(n: u64, alpha: f64, r: f64, v: f64, q: f64, mode: Mode) -> ModelParams {
        ModelParams::new(n, alpha, r, v, q, mode, 7).unwrap()
    }

    fn manual_graph(positions: Vec<Point2>, orientations: Vec<f64>) -> FaultySectorGraph {
        let n = positions.len();
        FaultySectorGraph {
            realized_count: n,
            positions,
            orientations,
            alive: vec![true; n],
            arcs: Vec::new(),
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert_eq!(
            ModelParams::new(0, PI, 0.1, 0.0, 0.0, Mode::Binomial, 0),
            Err(ParamError::ZeroCount)
        );
        assert!(matches!(
            ModelParams::new(10, 3.0 * PI, 0.1, 0.0, 0.0, Mode::Binomial, 0),
            Err(ParamError::Alpha(_))
        ));
        assert!(matches!(
            ModelParams::new(10, PI, 0.5, 0.0, 0.0, Mode::Binomial, 0),
            Err(ParamError::Radius(_))
        ));
        assert!(matches!(
            ModelParams::new(10, PI, 0.1, 1.0, 0.0, Mode::Binomial, 0),
            Err(ParamError::VertexFault(_))
        ));
        assert!(matches!(
            ModelParams::new(10, PI, 0.1, 0.0, -0.1, Mode::Binomial, 0),
            Err(ParamError::EdgeFault(_))
        ));
    }

    #[test]
    fn faultless_pair_is_connected() {
        let p = params(2, PI / 2.0, 0.1, 0.0, 0.0, Mode::Binomial);
        let mut g = manual_graph(
            vec![Point2::new(0.5, 0.5), Point2::new(0.55, 0.51)],
            vec![7.0 * PI / 4.0 + 0.1, PI / 2.0],
        );
        for seed in 0..50 {
            connect_arcs(&p, &mut g, seed);
            assert_eq!(g.arcs, vec![(0, 1)]);
        }
    }

    #[test]
    fn single_vertex_has_no_arcs() {
        let p = params(1, PI, 0.3, 0.0, 0.0, Mode::Binomial);
        let g = sample_graph(&p, 11);
        assert_eq!(g.realized_count, 1);
        assert!(g.arcs.is_empty());
    }

    #[test]
    fn empty_summary_is_flagged() {
        let g = manual_graph(Vec::new(), Vec::new());
        let s = degree_summary(&g);
        assert_eq!((s.max_out, s.max_in), (0, 0));
        assert!(s.empty);
    }

    #[test]
    fn all_dead_is_flagged() {
        let p = params(50, PI, 0.2, 0.0, 0.0, Mode::Binomial);
        let mut g = sample_vertices(&p, 3);
        g.alive.iter_mut().for_each(|a| *a = false);
        let s = degree_summary(&g);
        assert!(s.empty);
        assert_eq!(s.alive_count, 0);
    }

    #[test]
    fn full_disk_without_edge_faults_is_symmetric() {
        let p = params(400, TAU, 0.08, 0.3, 0.0, Mode::Poisson);
        for seed in 0..5 {
            let s = degree_summary(&sample_graph(&p, seed));
            assert_eq!(s.out_degrees, s.in_degrees);
            assert_eq!(s.max_out, s.max_in);
        }
    }

    #[test]
    fn degree_count_edge_sets() {
        let p = params(300, PI, 0.1, 0.2, 0.1, Mode::Binomial);
        let s = degree_summary(&sample_graph(&p, 5));
        assert_eq!(
            degree_count(&s, &DegreeSet::all(), Side::Out),
            s.alive_count
        );
        assert_eq!(degree_count(&s, &DegreeSet::empty(), Side::In), 0);
        assert!(degree_count(&s, &DegreeSet::Tail(s.max_out), Side::Out) >= 1);
        assert!(degree_count(&s, &DegreeSet::Tail(s.max_in), Side::In) >= 1);
        assert_eq!(
            degree_count(&s, &DegreeSet::Tail(s.max_out + 1), Side::Out),
            0
        );
    }

    #[test]
    fn poisson_count_varies_binomial_does_not() {
        let pb = params(200, PI, 0.1, 0.0, 0.0, Mode::Binomial);
        let pp = pb.with_mode(Mode::Poisson);
        let counts: BTreeSet<usize> = (0..20)
            .map(|s| sample_vertices(&pp, s).realized_count)
            .collect();
        assert!(counts.len() > 1);
        assert!((0..20).all(|s| sample_vertices(&pb, s).realized_count == 200));
    }

    #[test]
    fn degree_set_parsing() {
        assert_eq!("tail:7".parse::<DegreeSet>().unwrap(), DegreeSet::Tail(7));
        assert_eq!("set:".parse::<DegreeSet>().unwrap(), DegreeSet::empty());
        let s: DegreeSet = "set:3, 1,2".parse().unwrap();
        assert_eq!(s.to_string(), "set:1,2,3");
        assert!("bogus".parse::<DegreeSet>().is_err());
        assert!("tail:x".parse::<DegreeSet>().is_err());
    }

    #[test]
    fn edge_uniform_is_in_unit_interval_and_ordered_pair_specific() {
        let a = edge_uniform(42, 3, 9);
        let b = edge_uniform(42, 9, 3);
        assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b));
        assert_ne!(a, b);
        assert_eq!(a, edge_uniform(42, 3, 9));
    }

    #[test]
    fn dump_formats() {
        let p = params(30, PI, 0.3, 0.2, 0.0, Mode::Binomial);
        let g = sample_graph(&p, 1);
        let mut edges = Vec::new();
        write_edge_list(&g, &mut edges).unwrap();
        let text = String::from_utf8(edges).unwrap();
        let mut lines = text.lines();
        let alive = g.alive.iter().filter(|&&a| a).count();
        assert_eq!(lines.next().unwrap(), format!("30 {alive}"));
        assert_eq!(lines.count(), g.arcs.len());

        let mut csv = Vec::new();
        write_vertex_csv(&g, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "index,x,y,theta,alive");
        assert_eq!(text.lines().count(), 31);
    }
}
