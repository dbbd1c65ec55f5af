//! Biased random walk on the half-line with a reflecting wall.
//!
//! This is the classical skeleton of every emitter in the crate: the
//! walker's position plays the role of a stack height (or matter-density
//! imbalance), the wall sits at zero, and the left/right bias decides the
//! phase. Rates follow the outflow convention: per tick a walker at site
//! `i ≥ 1` hops left with probability `gamma_left`, right with
//! `gamma_right`, and stays put otherwise; at the wall it hops right with
//! `gamma_wall` and stays otherwise.
//!
//! With bias `δ = gamma_right/gamma_left − 1` the three phases are
//!
//! * pinned (`δ < 0`): geometric steady state `p_{i+1}/p_i = γ_R/γ_L`,
//! * critical (`δ = 0`): diffusive spreading, return probability
//!   `p_0(t) ~ t^{-1/2}`,
//! * escaping (`δ > 0`): ballistic drift away from the wall.
//!
//! Evolution is exact (deterministic propagation of the occupation vector),
//! not sampled. The support of a walk started at the wall grows one site per
//! tick, so the propagation cost is `O(min(t, capacity))` per tick. When the
//! support hits the truncation edge, the outgoing hop is folded into the
//! stay probability of the last site: the vector stays exactly stochastic
//! and [`HalfLineWalk::edge_mass`] tells you how much weight is feeling the
//! fold.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("rate {name} = {value} must lie in [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("bulk outflow gamma_left + gamma_right = {sum} exceeds 1")]
    Overcommitted { sum: f64 },
    #[error("capacity must be at least 2 sites, got {0}")]
    CapacityTooSmall(usize),
    #[error("initial distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("bias ratio gamma_right/gamma_left is undefined: gamma_left is zero")]
    UndefinedBias,
    #[error("no normalizable steady state outside the pinned phase")]
    NoSteadyState,
    #[error("truncation leak {leak:.3e} exceeds tolerance {tolerance:.3e}; enlarge the capacity")]
    TruncationLeak { leak: f64, tolerance: f64 },
}

/// Hop rates of the half-line walk (outflow convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub gamma_left: f64,
    pub gamma_right: f64,
    /// Rightward rate out of the wall site.
    pub gamma_wall: f64,
}

/// Dynamical phase as decided by the sign of the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pinned,
    Critical,
    Escaping,
}

impl WalkParams {
    pub fn new(gamma_left: f64, gamma_right: f64, gamma_wall: f64) -> Result<Self, WalkError> {
        for (name, value) in [
            ("gamma_left", gamma_left),
            ("gamma_right", gamma_right),
            ("gamma_wall", gamma_wall),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(WalkError::RateOutOfRange { name, value });
            }
        }
        let sum = gamma_left + gamma_right;
        if sum > 1.0 + 1e-12 {
            return Err(WalkError::Overcommitted { sum });
        }
        Ok(Self { gamma_left, gamma_right, gamma_wall })
    }

    /// Unbiased walk with all three rates equal to `gamma`.
    pub fn critical(gamma: f64) -> Result<Self, WalkError> {
        Self::new(gamma, gamma, gamma)
    }

    /// Bias `δ = γ_R/γ_L − 1`. Errors when `γ_L = 0`: the ratio (and with it
    /// the phase) is not defined without a leftward rate.
    pub fn bias(&self) -> Result<f64, WalkError> {
        if self.gamma_left == 0.0 {
            return Err(WalkError::UndefinedBias);
        }
        Ok(self.gamma_right / self.gamma_left - 1.0)
    }

    pub fn phase(&self) -> Result<Phase, WalkError> {
        let delta = self.bias()?;
        Ok(if delta < 0.0 {
            Phase::Pinned
        } else if delta > 0.0 {
            Phase::Escaping
        } else {
            Phase::Critical
        })
    }

    /// Decay length of the pinned steady-state tail, `ξ = −1/ln(γ_R/γ_L)`.
    /// `None` outside the pinned phase or at `γ_R = 0` (where the state is a
    /// two-site atom rather than an exponential tail).
    pub fn correlation_length(&self) -> Option<f64> {
        if !matches!(self.phase(), Ok(Phase::Pinned)) || self.gamma_right == 0.0 {
            return None;
        }
        Some(-1.0 / (self.gamma_right / self.gamma_left).ln())
    }
}

/// Exactly propagated occupation vector of the truncated half-line walk.
#[derive(Debug, Clone)]
pub struct HalfLineWalk {
    params: WalkParams,
    dist: Vec<f64>,
    /// Highest occupied site; propagation skips the empty region above.
    frontier: usize,
    time: usize,
    max_edge_mass: f64,
}

impl HalfLineWalk {
    /// Walker delta-localized at the wall.
    pub fn new(params: WalkParams, capacity: usize) -> Result<Self, WalkError> {
        if capacity < 2 {
            return Err(WalkError::CapacityTooSmall(capacity));
        }
        let mut dist = vec![0.0; capacity];
        dist[0] = 1.0;
        Ok(Self { params, dist, frontier: 0, time: 0, max_edge_mass: 0.0 })
    }

    /// Start from an arbitrary normalized distribution.
    pub fn with_distribution(params: WalkParams, dist: Vec<f64>) -> Result<Self, WalkError> {
        if dist.len() < 2 {
            return Err(WalkError::CapacityTooSmall(dist.len()));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&p| p < 0.0) {
            return Err(WalkError::NotNormalized { sum });
        }
        let frontier = dist.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let max_edge_mass = *dist.last().unwrap();
        Ok(Self { params, dist, frontier, time: 0, max_edge_mass })
    }

    pub fn params(&self) -> &WalkParams {
        &self.params
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn distribution(&self) -> &[f64] {
        &self.dist
    }

    /// Probability of finding the walker back at the wall.
    pub fn return_probability(&self) -> f64 {
        self.dist[0]
    }

    pub fn mean_position(&self) -> f64 {
        self.dist[..=self.frontier].iter().enumerate().map(|(i, &p)| i as f64 * p).sum()
    }

    pub fn mean_square_displacement(&self) -> f64 {
        self.dist[..=self.frontier]
            .iter()
            .enumerate()
            .map(|(i, &p)| (i * i) as f64 * p)
            .sum()
    }

    /// Weight currently sitting on the truncation edge, i.e. the probability
    /// that the fold-back approximation is active. Keep this small by sizing
    /// `capacity` to the run.
    pub fn edge_mass(&self) -> f64 {
        *self.dist.last().unwrap()
    }

    /// Largest edge mass seen at any tick so far; the truncation error of the
    /// whole run is bounded by `time × max_edge_mass`.
    pub fn max_edge_mass(&self) -> f64 {
        self.max_edge_mass
    }

    /// One exact tick of the master equation.
    pub fn step(&mut self) {
        let WalkParams { gamma_left: gl, gamma_right: gr, gamma_wall: g0 } = self.params;
        let last = self.dist.len() - 1;
        let hi = (self.frontier + 1).min(last);
        let old = &self.dist[..=hi.min(self.frontier)];

        let mut next = vec![0.0; hi + 1];
        for (i, &p) in old.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (stay, left, right) = if i == 0 {
                (1.0 - g0, 0.0, g0)
            } else if i == last {
                // Fold the outgoing hop back into staying put.
                (1.0 - gl, gl, 0.0)
            } else {
                (1.0 - gl - gr, gl, gr)
            };
            next[i] += stay * p;
            if i > 0 {
                next[i - 1] += left * p;
            }
            if right > 0.0 {
                next[i + 1] += right * p;
            }
        }
        for (i, v) in next.into_iter().enumerate() {
            self.dist[i] = v;
        }
        self.frontier = self.dist[..=hi].iter().rposition(|&p| p > 0.0).unwrap_or(0);
        self.time += 1;
        self.max_edge_mass = self.max_edge_mass.max(self.edge_mass());
    }

    /// Evolve for `steps` ticks, recording `(t, p_0, ⟨x⟩, ⟨x²⟩)` at every
    /// tick (including t = 0).
    pub fn run(&mut self, steps: usize) -> Vec<WalkSample> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(self.sample());
        for _ in 0..steps {
            self.step();
            out.push(self.sample());
        }
        out
    }

    fn sample(&self) -> WalkSample {
        WalkSample {
            time: self.time,
            return_probability: self.return_probability(),
            mean_position: self.mean_position(),
            mean_square_displacement: self.mean_square_displacement(),
        }
    }
}

/// Observables of one tick of an exact walk evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSample {
    pub time: usize,
    pub return_probability: f64,
    pub mean_position: f64,
    pub mean_square_displacement: f64,
}

/// Closed-form stationary distribution of the truncated chain, pinned phase
/// only.
///
/// Detailed balance gives `p_1/p_0 = γ_0/γ_L` at the wall and
/// `p_{i+1}/p_i = γ_R/γ_L` in the bulk; edge folding leaves both relations
/// untouched, so this is exact for the truncated walk. Outside the pinned
/// phase the half-line distribution is not normalizable (critical and
/// escaping walkers keep spreading forever) and the call is an error.
pub fn steady_state(params: &WalkParams, capacity: usize) -> Result<Vec<f64>, WalkError> {
    if capacity < 2 {
        return Err(WalkError::CapacityTooSmall(capacity));
    }
    if params.phase()? != Phase::Pinned {
        return Err(WalkError::NoSteadyState);
    }
    let r = params.gamma_right / params.gamma_left;
    let mut p = Vec::with_capacity(capacity);
    p.push(1.0);
    p.push(params.gamma_wall / params.gamma_left);
    for _ in 2..capacity {
        let lastv = *p.last().unwrap();
        p.push(lastv * r);
    }
    let norm: f64 = p.iter().sum();
    for v in &mut p {
        *v /= norm;
    }
    Ok(p)
}

/// Capacity that keeps the truncation leak of a `horizon`-tick run from the
/// wall below `RETURN_SERIES_LEAK_TOL`, by phase:
///
/// * critical — diffusive spread `σ ~ √(2γ t)`; five standard deviations of
///   the widest profile plus margin,
/// * pinned — the larger of the diffusive transient window and 25 decay
///   lengths of the stationary tail,
/// * escaping — the full ballistic cone (`horizon + 2`), which is exact.
pub fn suggested_capacity(params: &WalkParams, horizon: usize) -> Result<usize, WalkError> {
    let diffusive = (3.0 * (horizon as f64).sqrt()).ceil() as usize + 10;
    let wide = (5.0 * (horizon as f64).sqrt()).ceil() as usize + 10;
    Ok(match params.phase()? {
        Phase::Critical => wide.min(horizon + 2),
        Phase::Pinned => {
            let tail = match params.correlation_length() {
                Some(xi) => (25.0 * xi).ceil() as usize + 10,
                None => 2, // γ_R = 0: the walker never leaves {0, 1}.
            };
            tail.max(diffusive).min(horizon + 2)
        }
        Phase::Escaping => horizon + 2,
    })
}

/// Leak tolerance enforced by [`return_probability_series`].
pub const RETURN_SERIES_LEAK_TOL: f64 = 1e-9;

/// Exact return-probability series `p_0(t)` for `t = 1..=horizon`, starting
/// from the wall. The truncation window is sized by [`suggested_capacity`];
/// if the edge of the window ever carries more than
/// [`RETURN_SERIES_LEAK_TOL`] of probability the run is rejected rather than
/// silently folded.
pub fn return_probability_series(
    params: &WalkParams,
    horizon: usize,
) -> Result<Vec<f64>, WalkError> {
    let capacity = suggested_capacity(params, horizon)?.max(2);
    let mut walk = HalfLineWalk::new(*params, capacity)?;
    let mut series = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        walk.step();
        series.push(walk.return_probability());
    }
    let leak = walk.max_edge_mass();
    if leak > RETURN_SERIES_LEAK_TOL {
        return Err(WalkError::TruncationLeak { leak, tolerance: RETURN_SERIES_LEAK_TOL });
    }
    Ok(series)
}
