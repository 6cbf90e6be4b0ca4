//! Maximal coupling of categorical draws and coupled urn trajectories.
//!
//! [`maximal_coupling_pair`] maps one uniform `u` to a pair of colours
//! `(i, j)` with `i ~ x` and `j ~ y` that agree as often as possible. The
//! unit interval is cut left to right: first the common pieces
//! `min(x_i, y_i)` for `i = 1..k`, which end at `u0 = sum_i min(x_i, y_i)`;
//! then, on `(u0, 1]`, the excesses `x_i - min` give the first colour and,
//! independently laid out on the same stretch, the excesses `y_i - min` give
//! the second. The colours disagree exactly on `(u0, 1]`, whose length is
//! `|x - y|_1 / 2`.
//!
//! Two urns sharing `(alpha, beta, b0)` but started from different `B0` are
//! coupled by driving both with the same uniforms through this map. When
//! both start with mass `|b0| + |B0| = r*`, the expected `L1` gap between
//! their predictive means shrinks by at least `gamma` per step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::model::{derive_constants, ModelParams};
use crate::rng::{open_uniform, stream_rng};
use crate::simulate::{Trajectory, UrnState};

const SIMPLEX_TOL: f64 = 1e-9;

/// Piece `(lo, hi]` of the unit interval on which the coupling outputs
/// `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub i: usize,
    pub j: usize,
}

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= -SIMPLEX_TOL) || !v.is_finite()) {
        return Err(UrnError::Domain(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(UrnError::Domain(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(UrnError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(UrnError::Empty("probability vector"));
    }
    check_simplex("x", x)?;
    check_simplex("y", y)
}

/// First index whose cumulative weight from `start` reaches `u`, skipping
/// zero-width pieces. Falls back to the last positive weight when rounding
/// leaves the total a hair short.
fn locate(u: f64, start: f64, weights: impl Iterator<Item = f64>) -> Option<usize> {
    let mut cum = start;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            cum += w;
            last = Some(i);
            if u <= cum {
                return Some(i);
            }
        }
    }
    last
}

/// Couples one draw from `x` with one draw from `y` using the uniform `u`.
/// Categories are 0-based.
pub fn maximal_coupling_pair(x: &[f64], y: &[f64], u: f64) -> Result<(usize, usize)> {
    check_pair(x, y)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(UrnError::Domain(format!("uniform must lie in (0, 1), got {u}")));
    }
    Ok(couple_unchecked(x, y, u))
}

fn couple_unchecked(x: &[f64], y: &[f64], u: f64) -> (usize, usize) {
    let mins = || x.iter().zip(y).map(|(a, b)| a.min(*b));
    let u0: f64 = mins().sum();
    if u <= u0 {
        if let Some(i) = locate(u, 0.0, mins()) {
            return (i, i);
        }
    }
    let ex = x.iter().zip(y).map(|(a, b)| (a - a.min(*b)).max(0.0));
    let ey = x.iter().zip(y).map(|(a, b)| (b - a.min(*b)).max(0.0));
    match (locate(u, u0, ex), locate(u, u0, ey)) {
        (Some(i), Some(j)) => (i, j),
        // Only reachable when x == y up to rounding and u sits above u0.
        _ => {
            let i = locate(u, 0.0, mins()).unwrap_or(0);
            (i, i)
        }
    }
}

/// The full interval partition of the coupling, in left-to-right order.
/// Zero-length pieces are omitted.
pub fn coupling_segments(x: &[f64], y: &[f64]) -> Result<Vec<Segment>> {
    check_pair(x, y)?;
    let mut out = Vec::new();
    let mut cum = 0.0;
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        let m = a.min(*b);
        if m > 0.0 {
            out.push(Segment {
                lo: cum,
                hi: cum + m,
                i,
                j: i,
            });
            cum += m;
        }
    }
    let u0 = cum;
    let breaks = |p: &[f64], q: &[f64]| {
        let mut c = u0;
        p.iter()
            .zip(q)
            .enumerate()
            .filter_map(|(i, (a, b))| {
                let e = a - a.min(*b);
                (e > 0.0).then(|| {
                    c += e;
                    (c, i)
                })
            })
            .collect::<Vec<_>>()
    };
    let bx = breaks(x, y);
    let by = breaks(y, x);
    let (mut ix, mut iy) = (0, 0);
    let mut lo = u0;
    while ix < bx.len() && iy < by.len() {
        let hi = bx[ix].0.min(by[iy].0);
        if hi > lo {
            out.push(Segment {
                lo,
                hi,
                i: bx[ix].1,
                j: by[iy].1,
            });
            lo = hi;
        }
        if bx[ix].0 <= hi {
            ix += 1;
        }
        if by[iy].0 <= hi {
            iy += 1;
        }
    }
    Ok(out)
}

/// Probability that the coupled colours differ, by exact integration.
pub fn disagreement_probability(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(coupling_segments(x, y)?
        .iter()
        .filter(|s| s.i != s.j)
        .map(|s| s.hi - s.lo)
        .sum())
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Two urns driven by one uniform stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub traj1: Trajectory,
    pub traj2: Trajectory,
    /// `|psi1_n - psi2_n|_1` for `n = 0..=N`.
    pub distances: Vec<f64>,
}

fn check_shared(p1: &ModelParams, p2: &ModelParams) -> Result<()> {
    if p1.k() != p2.k() {
        return Err(UrnError::DimensionMismatch {
            expected: p1.k(),
            got: p2.k(),
        });
    }
    if p1.alpha() != p2.alpha() || p1.beta() != p2.beta() || p1.b0() != p2.b0() {
        return Err(UrnError::InvalidParams(
            "coupled urns must share alpha, beta and b0".into(),
        ));
    }
    Ok(())
}

/// Coupled trajectories of length `n_steps` on stream `(seed, 0)`.
pub fn coupled_trajectories(
    params1: &ModelParams,
    params2: &ModelParams,
    n_steps: usize,
    seed: u64,
) -> Result<CoupledPair> {
    coupled_stream(params1, params2, n_steps, seed, 0)
}

pub fn coupled_stream(
    params1: &ModelParams,
    params2: &ModelParams,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<CoupledPair> {
    check_shared(params1, params2)?;
    let mut rng = stream_rng(seed, stream);
    let mut s1 = UrnState::initial(params1);
    let mut s2 = UrnState::initial(params2);
    let mut d1 = Vec::with_capacity(n_steps);
    let mut d2 = Vec::with_capacity(n_steps);
    let mut distances = Vec::with_capacity(n_steps + 1);
    let mut psi1 = s1.predictive_mean(params1);
    let mut psi2 = s2.predictive_mean(params2);
    distances.push(l1_distance(&psi1, &psi2));
    for _ in 0..n_steps {
        let u = open_uniform(&mut rng);
        let (i, j) = couple_unchecked(&psi1, &psi2, u);
        s1.reinforce(params1, i)?;
        s2.reinforce(params2, j)?;
        d1.push(i);
        d2.push(j);
        psi1 = s1.predictive_mean(params1);
        psi2 = s2.predictive_mean(params2);
        distances.push(l1_distance(&psi1, &psi2));
    }
    let traj = |params: &ModelParams, draws, state| Trajectory {
        params: params.clone(),
        seed,
        stream,
        draws,
        psi_path: None,
        final_state: state,
    };
    Ok(CoupledPair {
        traj1: traj(params1, d1, s1),
        traj2: traj(params2, d2, s2),
        distances,
    })
}

/// `count` independent coupled pairs on streams `0..count`, generated in
/// parallel and returned in stream order.
pub fn coupled_pairs(
    params1: &ModelParams,
    params2: &ModelParams,
    n_steps: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<CoupledPair>> {
    crate::montecarlo::with_thread_cap(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| coupled_stream(params1, params2, n_steps, seed, r))
            .collect()
    })
}

/// `E |psi1_{n+1} - psi2_{n+1}|_1` given the current states, integrated
/// exactly over the coupling partition.
pub fn expected_step_distance(
    params1: &ModelParams,
    state1: &UrnState,
    params2: &ModelParams,
    state2: &UrnState,
) -> Result<f64> {
    check_shared(params1, params2)?;
    let psi1 = state1.predictive_mean(params1);
    let psi2 = state2.predictive_mean(params2);
    let mut total = 0.0;
    for seg in coupling_segments(&psi1, &psi2)? {
        let mut a = state1.clone();
        let mut b = state2.clone();
        a.reinforce(params1, seg.i)?;
        b.reinforce(params2, seg.j)?;
        let d = l1_distance(&a.predictive_mean(params1), &b.predictive_mean(params2));
        total += (seg.hi - seg.lo) * d;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub n: usize,
    pub mean_distance: f64,
    pub stderr: f64,
    /// `gamma^n * mean |Delta_0|`.
    pub envelope: Option<f64>,
    /// `mean_distance - envelope`; positive values are the observed slack.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub pairs: usize,
    pub gamma: Option<f64>,
    pub mean_initial_distance: f64,
    /// True when every urn starts at mass `r*`, where the envelope is a
    /// strict bound rather than an asymptotic one.
    pub stationary_mass: bool,
    pub steps: Vec<StepSummary>,
    /// Largest positive slack over the grid.
    pub max_slack: Option<f64>,
}

/// Per-step mean and standard error of the coupled distances against the
/// geometric envelope.
pub fn contraction_diagnostic(pairs: &[CoupledPair]) -> Result<ContractionReport> {
    let first = pairs.first().ok_or(UrnError::Empty("coupled pairs"))?;
    let len = first.distances.len();
    if let Some(bad) = pairs.iter().find(|p| p.distances.len() != len) {
        return Err(UrnError::DimensionMismatch {
            expected: len,
            got: bad.distances.len(),
        });
    }
    for p in pairs {
        check_shared(&first.traj1.params, &p.traj1.params)?;
        check_shared(&first.traj1.params, &p.traj2.params)?;
    }
    let constants = derive_constants(&first.traj1.params);
    let gamma = constants.gamma;
    let stationary_mass = constants.r_star.is_some_and(|r| {
        pairs.iter().all(|p| {
            [&p.traj1.params, &p.traj2.params]
                .iter()
                .all(|q| ((q.b0_mass() + q.initial_mass()) - r).abs() <= 1e-12 * r)
        })
    });

    let m = pairs.len() as f64;
    let mut steps = Vec::with_capacity(len);
    let mut delta0 = 0.0;
    let mut max_slack: Option<f64> = None;
    for n in 0..len {
        let mean = pairs.iter().map(|p| p.distances[n]).sum::<f64>() / m;
        let var = if pairs.len() > 1 {
            pairs.iter().map(|p| (p.distances[n] - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        if n == 0 {
            delta0 = mean;
        }
        let envelope = gamma.map(|g| g.powi(n as i32) * delta0);
        let slack = envelope.map(|e| mean - e);
        if let Some(s) = slack {
            max_slack = Some(max_slack.map_or(s, |cur| cur.max(s)));
        }
        steps.push(StepSummary {
            n,
            mean_distance: mean,
            stderr: (var / m).sqrt(),
            envelope,
            slack,
        });
    }
    Ok(ContractionReport {
        pairs: pairs.len(),
        gamma,
        mean_initial_distance: delta0,
        stationary_mass,
        steps,
        max_slack,
    })
}
