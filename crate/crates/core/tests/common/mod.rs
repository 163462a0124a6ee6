//! Independent re-derivations shared by the integration tests.
//!
//! Nothing here calls into the crate's geometry or sampling code: the
//! random stream is replayed from its documented draw order and arcs are
//! found by scanning all ordered pairs.

#![allow(dead_code)]

use std::f64::consts::TAU;

use faulty_sector::{Mode, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub struct Replay {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub thetas: Vec<f64>,
    pub alive: Vec<bool>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seed_of_trial(master: u64, index: u64) -> u64 {
    splitmix(master ^ splitmix(index))
}

fn pair_uniform(seed: u64, i: usize, j: usize) -> f64 {
    let key = ((i as u64) << 32) | j as u64;
    let h = splitmix(splitmix(seed ^ 0x5EC7_0A9C_ED6E_F417) ^ key);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Replay the vertex stream: count, then per vertex x, y, θ, fault uniform.
pub fn replay(params: &ModelParams, seed: u64) -> Replay {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = match params.mode {
        Mode::Binomial => params.n as usize,
        Mode::Poisson => Poisson::new(params.n as f64).unwrap().sample(&mut rng) as usize,
    };
    let mut out = Replay {
        xs: vec![],
        ys: vec![],
        thetas: vec![],
        alive: vec![],
    };
    for _ in 0..count {
        out.xs.push(rng.random());
        out.ys.push(rng.random());
        out.thetas.push(rng.random::<f64>() * TAU);
        out.alive.push(rng.random::<f64>() >= params.v);
    }
    out
}

/// Containment by rotating the offset into the sector's frame.
pub fn in_sector(ax: f64, ay: f64, elev: f64, alpha: f64, r: f64, px: f64, py: f64) -> bool {
    let (dx, dy) = (px - ax, py - ay);
    if dx == 0.0 && dy == 0.0 {
        return false;
    }
    if dx * dx + dy * dy > r * r {
        return false;
    }
    if alpha >= TAU {
        return true;
    }
    let (s, c) = elev.sin_cos();
    // offset expressed relative to the elevation direction
    let u = dx * c + dy * s;
    let w = -dx * s + dy * c;
    let mut phi = w.atan2(u);
    if phi < 0.0 {
        phi += TAU;
    }
    phi < alpha
}

/// All surviving arcs by O(n²) scan.
pub fn brute_arcs(params: &ModelParams, seed: u64, rep: &Replay) -> Vec<(u32, u32)> {
    let n = rep.xs.len();
    let mut arcs = Vec::new();
    for i in 0..n {
        if !rep.alive[i] {
            continue;
        }
        for j in 0..n {
            if i == j || !rep.alive[j] {
                continue;
            }
            if in_sector(
                rep.xs[i],
                rep.ys[i],
                rep.thetas[i],
                params.alpha,
                params.r,
                rep.xs[j],
                rep.ys[j],
            ) && pair_uniform(seed, i, j) >= params.q
            {
                arcs.push((i as u32, j as u32));
            }
        }
    }
    arcs
}

pub struct BruteDegrees {
    pub out: Vec<Option<u32>>,
    pub inn: Vec<Option<u32>>,
    pub max_out: u32,
    pub max_in: u32,
}

pub fn brute_degrees(rep: &Replay, arcs: &[(u32, u32)]) -> BruteDegrees {
    let n = rep.xs.len();
    let mut out = vec![0u32; n];
    let mut inn = vec![0u32; n];
    for &(i, j) in arcs {
        out[i as usize] += 1;
        inn[j as usize] += 1;
    }
    let mask = |d: Vec<u32>| -> Vec<Option<u32>> {
        d.into_iter()
            .zip(&rep.alive)
            .map(|(d, &a)| a.then_some(d))
            .collect()
    };
    let out = mask(out);
    let inn = mask(inn);
    let max_out = out.iter().flatten().copied().max().unwrap_or(0);
    let max_in = inn.iter().flatten().copied().max().unwrap_or(0);
    BruteDegrees {
        out,
        inn,
        max_out,
        max_in,
    }
}

/// Parse a frozen oracle CSV (header skipped) into rows of fields.
pub fn csv_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').collect())
        .collect()
}
