//! Exact forward simulation.
//!
//! The fluctuating composition `B_n` is propagated by the exact recursion
//! `B_{n+1} = beta B_n + alpha e_i` and never renormalized; predictive means
//! are computed from it on demand. For `beta > 1` the mass grows like
//! `beta^n`, and a step whose mass would leave the finite `f64` range fails
//! with [`UrnError::Overflow`] (for `beta = 2` that happens after roughly
//! 1020 steps).
//!
//! Categories are 0-based in the API and 1-based in CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::model::ModelParams;
use crate::rng::{open_uniform, stream_rng};

/// Fluctuating composition `B_n` after `n` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnState {
    pub n: u64,
    pub balls: Vec<f64>,
}

impl UrnState {
    pub fn initial(params: &ModelParams) -> Self {
        UrnState {
            n: 0,
            balls: params.initial_balls().to_vec(),
        }
    }

    /// `r*_n = |b0| + |B_n|`.
    pub fn total_mass(&self, params: &ModelParams) -> f64 {
        params.b0_mass() + self.balls.iter().sum::<f64>()
    }

    /// `psi_n = (b0 + B_n) / r*_n`.
    pub fn predictive_mean(&self, params: &ModelParams) -> Vec<f64> {
        let total = self.total_mass(params);
        params
            .b0()
            .iter()
            .zip(&self.balls)
            .map(|(b, bb)| (b + bb) / total)
            .collect()
    }

    /// Draws one ball with the uniform `u` and updates the composition in
    /// place. Returns the 0-based colour drawn.
    pub fn advance(&mut self, params: &ModelParams, u: f64) -> Result<usize> {
        if !(u > 0.0 && u < 1.0) {
            return Err(UrnError::Domain(format!("uniform must lie in (0, 1), got {u}")));
        }
        let b0 = params.b0();
        let total = self.total_mass(params);
        let target = u * total;
        let mut cum = 0.0;
        let mut chosen = None;
        let mut last_positive = 0;
        for (i, (b, bb)) in b0.iter().zip(&self.balls).enumerate() {
            let w = b + bb;
            if w > 0.0 {
                last_positive = i;
            }
            cum += w;
            if cum >= target && w > 0.0 {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave the running sum a hair below u * total.
        let i = chosen.unwrap_or(last_positive);
        self.reinforce(params, i)?;
        Ok(i)
    }

    /// Applies the update for a draw of colour `colour` chosen elsewhere:
    /// `B <- beta B + alpha e_colour`.
    pub fn reinforce(&mut self, params: &ModelParams, colour: usize) -> Result<()> {
        if colour >= self.balls.len() {
            return Err(UrnError::Domain(format!(
                "colour {colour} out of range for k = {}",
                self.balls.len()
            )));
        }
        let (alpha, beta) = (params.alpha(), params.beta());
        if beta != 1.0 {
            self.balls.iter_mut().for_each(|b| *b *= beta);
        }
        self.balls[colour] += alpha;
        self.n += 1;
        if !self.balls.iter().sum::<f64>().is_finite() {
            return Err(UrnError::Overflow { step: self.n });
        }
        Ok(())
    }
}

/// One urn step: inverse-CDF draw on the current predictive mean (smallest
/// colour whose cumulative probability reaches `u`), then reinforcement.
pub fn step(state: &UrnState, params: &ModelParams, u: f64) -> Result<(UrnState, usize)> {
    if state.balls.len() != params.k() {
        return Err(UrnError::DimensionMismatch {
            expected: params.k(),
            got: state.balls.len(),
        });
    }
    let mut next = state.clone();
    let i = next.advance(params, u)?;
    Ok((next, i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub stream: u64,
    /// 0-based colours `xi_1, ..., xi_N`.
    pub draws: Vec<usize>,
    /// `psi_0, ..., psi_N` when recorded.
    pub psi_path: Option<Vec<Vec<f64>>>,
    pub final_state: UrnState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Colour counts over the first `prefix_len` draws.
    pub fn counts(&self, prefix_len: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.params.k()];
        for &d in &self.draws[..prefix_len.min(self.draws.len())] {
            counts[d] += 1;
        }
        counts
    }

    /// Predictive mean after the last draw.
    pub fn final_psi(&self) -> Vec<f64> {
        self.final_state.predictive_mean(&self.params)
    }

    /// Writes `step,draw[,psi_1..psi_k]`. With psi columns a leading row for
    /// step 0 carries `psi_0` and an empty draw.
    pub fn write_csv<W: Write>(&self, writer: W, include_psi: bool) -> Result<()> {
        let k = self.params.k();
        let psi = match (include_psi, &self.psi_path) {
            (false, _) => None,
            (true, Some(p)) => Some(p),
            (true, None) => {
                return Err(UrnError::Format(
                    "psi columns requested but the trajectory did not record psi".into(),
                ))
            }
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string(), "draw".to_string()];
        if psi.is_some() {
            header.extend((1..=k).map(|i| format!("psi_{i}")));
        }
        w.write_record(&header)?;
        if let Some(path) = psi {
            let mut row = vec!["0".to_string(), String::new()];
            row.extend(path[0].iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        for (n, &d) in self.draws.iter().enumerate() {
            let mut row = vec![(n + 1).to_string(), (d + 1).to_string()];
            if let Some(path) = psi {
                row.extend(path[n + 1].iter().map(|x| x.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `n_steps` draws on stream `(seed, 0)`.
pub fn simulate_trajectory(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    record_psi: bool,
) -> Result<Trajectory> {
    simulate_stream(params, n_steps, seed, 0, record_psi)
}

/// Simulates `n_steps` draws on stream `(seed, stream)`.
pub fn simulate_stream(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    stream: u64,
    record_psi: bool,
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(UrnError::Domain("trajectory length must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, stream);
    let mut state = UrnState::initial(params);
    let mut draws = Vec::with_capacity(n_steps);
    let mut psi_path = record_psi.then(|| {
        let mut v = Vec::with_capacity(n_steps + 1);
        v.push(state.predictive_mean(params));
        v
    });
    for _ in 0..n_steps {
        let u = open_uniform(&mut rng);
        draws.push(state.advance(params, u)?);
        if let Some(path) = psi_path.as_mut() {
            path.push(state.predictive_mean(params));
        }
    }
    Ok(Trajectory {
        params: params.clone(),
        seed,
        stream,
        draws,
        psi_path,
        final_state: state,
    })
}

/// Relative colour frequencies over the first `prefix_len` draws.
pub fn empirical_mean(traj: &Trajectory, prefix_len: usize) -> Result<Vec<f64>> {
    if prefix_len == 0 {
        return Err(UrnError::Empty("empirical mean needs a nonempty prefix"));
    }
    if prefix_len > traj.len() {
        return Err(UrnError::Domain(format!(
            "prefix {prefix_len} exceeds trajectory length {}",
            traj.len()
        )));
    }
    let n = prefix_len as f64;
    Ok(traj.counts(prefix_len).into_iter().map(|c| c as f64 / n).collect())
}
