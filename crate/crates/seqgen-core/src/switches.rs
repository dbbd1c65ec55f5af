//! Switch-controlled walk generalizations.
//!
//! The ladder construction admits a switch sitting to the left of the wall:
//! its state is imprinted on particles as they enter the conveyor, and the
//! stack-head transition weights are controlled by that imprint. Driving
//! the switch with an auxiliary walker that flips the head's bias whenever
//! it returns to its origin turns the diffusive stack height into a Lévy
//! walk — flip events arrive at the auxiliary walker's return rate, so a
//! diffusive auxiliary (rate `t^{-1/2}`) gives a mean free path `t^{1/2}`
//! and displacement `x ~ t^{3/4}`. Purity of the radiated state costs one
//! extra post-selection — the auxiliary walker back at its origin — whose
//! success rate this module also estimates.
//!
//! Only the *return-event point process* of the auxiliary walker enters the
//! construction. For the switch that process is modeled as independent
//! events firing at the walker's origin-occupation envelope — `√(2/(πt))`
//! for a diffusive line walker, `rate/t` for a ballistic one, `2/(πt)` on
//! the square lattice — because each flip consumes a *decohered* return
//! event of the quantum driver, whose probability is the occupation law.
//! (Driving the flips with one classical trajectory's literal revisits
//! would correlate them into heavy-tailed clusters — revisit intervals
//! have infinite mean — and the head would turn ballistic instead of
//! reproducing the paper's `t^{3/4}`.) The post-selection overhead, by
//! contrast, is a plain occupation question, so there the walkers are
//! simulated positionally. Likewise the quenched-disorder variant replaces
//! uniform transition rates with a heavy-tailed trap field, which slows
//! the head to `x ~ t^{μ/(1+μ)}` — the tunable subdiffusive range
//! α ∈ (0, 1/2).
//!
//! Entanglement enters through a deliberately heuristic proxy: the radiated
//! entropy at cut ℓ is estimated from the walk ensemble as
//! `⟨m(ℓ)⟩·ln s + H(m(ℓ))` with `m(ℓ)` the stack height at emission ℓ —
//! the height times the per-level color entropy plus the height
//! distribution's own entropy. Only its scaling exponent is meaningful, and
//! every exponent estimator here reports a bootstrap confidence interval
//! resampled over whole traces.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fit::{fit_exponent, least_squares_line, FitError, FitReport};
use crate::par::run_trials;
use crate::rng::{mix_seed, trial_rng};
use crate::util::{log_spaced_integers, shannon_entropy};

#[derive(Debug, Error)]
pub enum SwitchError {
    #[error("drift magnitude must lie in [0, 1], got {drift}")]
    BadDrift { drift: f64 },
    #[error("ballistic return rate must be positive and finite, got {rate}")]
    BadRate { rate: f64 },
    #[error("trap tail index must be positive and finite, got {mu}")]
    BadTailIndex { mu: f64 },
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("need at least {need} trials, got {got}")]
    TooFewTrials { got: usize, need: usize },
    #[error("no origin visits in the window starting at {window_start}; rate indistinguishable from zero")]
    ZeroCount { window_start: usize },
    #[error("entanglement proxy needs at least {need} traces, got {got}")]
    InsufficientEnsemble { got: usize, need: usize },
    #[error("entanglement proxy needs s ≥ 2 colors (got s = {s}): at s = 1 the ⟨m⟩·ln s term vanishes and only the height entropy would remain")]
    ProxyNeedsColors { s: usize },
    #[error("cut {ell} exceeds a trace horizon of {horizon}")]
    CutBeyondHorizon { ell: usize, horizon: usize },
    #[error("trace flip times disagree with auxiliary return events: {flips} flips vs {returns} returns (first mismatch at event {index})")]
    FlipReturnMismatch { flips: usize, returns: usize, index: usize },
    #[error("position changed by more than one site at tick {t}")]
    BadStep { t: usize },
    #[error("trace must start at the wall, found x(0) = {x0}")]
    BadOrigin { x0: u32 },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Auxiliary process driving the switch. Only its origin-return events
/// matter, so each variant is the simplest classical process with the
/// right return statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxWalkerModel {
    /// Never leaves the origin: a return fires every tick. Calibration
    /// variant — the post-selection succeeds with probability 1.
    Pinned,
    /// Diffusive walker on the line; origin occupation decays as
    /// `√(2/(πt))`, the regime of the Lévy construction. Switch events
    /// fire independently at that envelope; the overhead estimate
    /// simulates the ±1 walk positionally.
    Diffusive1d,
    /// Ballistic walker: returns fire independently with probability
    /// `min(1, rate/t)` at tick `t`, the `1/t` return law of a
    /// ballistic quantum walker. The recorded "position" is the time
    /// since the last return (the distance a unit-speed walker covers).
    Ballistic1d { rate: f64 },
    /// Diffusive walker on the square lattice; origin occupation decays
    /// as `2/(πt)` (parity-smoothed). Switch events fire at that
    /// envelope; the overhead estimate simulates the lattice walk and
    /// counts exact origin revisits.
    Diffusive2d,
}

impl AuxWalkerModel {
    fn validate(&self) -> Result<(), SwitchError> {
        if let AuxWalkerModel::Ballistic1d { rate } = *self {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(SwitchError::BadRate { rate });
            }
        }
        Ok(())
    }
}

/// The switch driver: the auxiliary walker's return-event point process.
/// Events fire independently at the walker's origin-occupation envelope —
/// the decohered return statistics of the quantum driver. The tracked
/// "position" is the time since the last event.
struct ReturnProcess {
    last_return: usize,
}

impl ReturnProcess {
    fn new() -> Self {
        ReturnProcess { last_return: 0 }
    }

    fn intensity(model: &AuxWalkerModel, t: usize) -> f64 {
        let t = t as f64;
        match *model {
            AuxWalkerModel::Pinned => 1.0,
            AuxWalkerModel::Diffusive1d => (2.0 / (std::f64::consts::PI * t)).sqrt().min(1.0),
            AuxWalkerModel::Ballistic1d { rate } => (rate / t).min(1.0),
            AuxWalkerModel::Diffusive2d => (2.0 / (std::f64::consts::PI * t)).min(1.0),
        }
    }

    /// Advance one tick (tick index `t ≥ 1`); report whether a return
    /// event fired.
    fn fire(&mut self, model: &AuxWalkerModel, t: usize, rng: &mut ChaCha8Rng) -> bool {
        let fired = rng.random::<f64>() < Self::intensity(model, t);
        if fired {
            self.last_return = t;
        }
        fired
    }

    fn excursion(&self, t: usize) -> [i64; 2] {
        [(t - self.last_return) as i64, 0]
    }
}

/// Positional state of the auxiliary walker, used where occupation of the
/// origin itself is measured (the post-selection overhead).
struct AuxState {
    pos: [i64; 2],
    last_return: usize,
}

impl AuxState {
    fn new() -> Self {
        AuxState { pos: [0, 0], last_return: 0 }
    }

    /// Advance one tick (tick index `t ≥ 1`) and report whether the walker
    /// sits at its origin afterwards (for the ballistic stand-in, whether a
    /// return event fired).
    fn step(&mut self, model: &AuxWalkerModel, t: usize, rng: &mut ChaCha8Rng) -> bool {
        match *model {
            AuxWalkerModel::Pinned => true,
            AuxWalkerModel::Diffusive1d => {
                self.pos[0] += if rng.random::<f64>() < 0.5 { 1 } else { -1 };
                self.pos[0] == 0
            }
            AuxWalkerModel::Ballistic1d { rate } => {
                let fired = rng.random::<f64>() < (rate / t as f64).min(1.0);
                if fired {
                    self.last_return = t;
                }
                self.pos[0] = (t - self.last_return) as i64;
                fired
            }
            AuxWalkerModel::Diffusive2d => {
                let dir = (rng.random::<f64>() * 4.0) as usize;
                match dir.min(3) {
                    0 => self.pos[0] += 1,
                    1 => self.pos[0] -= 1,
                    2 => self.pos[1] += 1,
                    _ => self.pos[1] -= 1,
                }
                self.pos == [0, 0]
            }
        }
    }
}

/// One trajectory of a switch-controlled (or disordered) head walk.
///
/// `positions[t]` is the head height after `t` ticks; the unsigned type
/// carries the reflecting-wall invariant `x(t) ≥ 0`. For switched walks the
/// flip times must be exactly the auxiliary walker's return events
/// ([`audit_trace`] checks the two records agree); disordered walks leave
/// both lists empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchedWalkTrace {
    pub positions: Vec<u32>,
    pub flip_times: Vec<u32>,
    pub aux_return_times: Vec<u32>,
    pub aux_final: [i64; 2],
}

impl SwitchedWalkTrace {
    pub fn horizon(&self) -> usize {
        self.positions.len() - 1
    }
}

/// Head walker with a dynamical bias sign.
struct SwitchedWalker {
    bias: i8,
    x: i64,
    aux: ReturnProcess,
}

impl SwitchedWalker {
    fn new() -> Self {
        SwitchedWalker { bias: 1, x: 0, aux: ReturnProcess::new() }
    }

    /// One tick: the return process may fire and flip the bias, then the
    /// head steps right with probability `(1 + bias·drift)/2`, left
    /// otherwise — except at the wall, where a left move is a stay.
    /// Returns whether the bias flipped at this tick.
    fn tick(
        &mut self,
        model: &AuxWalkerModel,
        drift: f64,
        t: usize,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        let flipped = self.aux.fire(model, t, rng);
        if flipped {
            self.bias = -self.bias;
        }
        let p_right = 0.5 * (1.0 + f64::from(self.bias) * drift);
        if rng.random::<f64>() < p_right {
            self.x += 1;
        } else if self.x > 0 {
            self.x -= 1;
        }
        flipped
    }
}

fn validate_switched(
    aux: &AuxWalkerModel,
    horizon: usize,
    drift: f64,
) -> Result<(), SwitchError> {
    aux.validate()?;
    if horizon == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    if !(0.0..=1.0).contains(&drift) || !drift.is_finite() {
        return Err(SwitchError::BadDrift { drift });
    }
    Ok(())
}

/// Simulate one switch-controlled head walk: the bias sign toggles at every
/// auxiliary return event. With a diffusive auxiliary the flip rate decays
/// as `t^{-1/2}`, giving flights whose length grows with time and the Lévy
/// displacement `x ~ t^{3/4}` at drift 1; drift 0 ignores the switch and
/// reduces to the ordinary reflected walk.
pub fn levy_trace(
    aux: &AuxWalkerModel,
    horizon: usize,
    drift: f64,
    seed: u64,
) -> Result<SwitchedWalkTrace, SwitchError> {
    validate_switched(aux, horizon, drift)?;
    let mut rng = trial_rng(seed, "levy-trace", 0);
    let mut walker = SwitchedWalker::new();
    let mut trace = SwitchedWalkTrace {
        positions: Vec::with_capacity(horizon + 1),
        flip_times: Vec::new(),
        aux_return_times: Vec::new(),
        aux_final: [0, 0],
    };
    trace.positions.push(0);
    let mut bias_before = walker.bias;
    for t in 1..=horizon {
        let returned = walker.tick(aux, drift, t, &mut rng);
        if returned {
            trace.aux_return_times.push(t as u32);
        }
        if walker.bias != bias_before {
            trace.flip_times.push(t as u32);
            bias_before = walker.bias;
        }
        trace.positions.push(u32::try_from(walker.x).expect("wall keeps x nonnegative"));
    }
    trace.aux_final = walker.aux.excursion(horizon);
    Ok(trace)
}

/// Integrity check on a recorded trace: the flip record and the auxiliary
/// return record must agree event for event, the walk must start at the
/// wall, and no tick may move the head by more than one site. (The
/// reflecting-wall invariant `x ≥ 0` is carried by the unsigned type.)
pub fn audit_trace(trace: &SwitchedWalkTrace) -> Result<(), SwitchError> {
    let flips = trace.flip_times.len();
    let returns = trace.aux_return_times.len();
    for (i, (f, r)) in trace.flip_times.iter().zip(&trace.aux_return_times).enumerate() {
        if f != r {
            return Err(SwitchError::FlipReturnMismatch { flips, returns, index: i });
        }
    }
    if flips != returns {
        return Err(SwitchError::FlipReturnMismatch {
            flips,
            returns,
            index: flips.min(returns),
        });
    }
    match trace.positions.first() {
        Some(&x0) if x0 != 0 => return Err(SwitchError::BadOrigin { x0 }),
        _ => {}
    }
    for (t, pair) in trace.positions.windows(2).enumerate() {
        if pair[0].abs_diff(pair[1]) > 1 {
            return Err(SwitchError::BadStep { t: t + 1 });
        }
    }
    Ok(())
}

/// A fitted ensemble scaling law together with the curve it was fitted to.
/// The confidence interval in `fit` comes from resampling whole traces
/// (≥ 200 resamples), not from the pair bootstrap, so it reflects the
/// Monte Carlo uncertainty of the ensemble.
#[derive(Debug, Clone)]
pub struct ScalingEstimate {
    pub fit: FitReport,
    /// `(t, ensemble estimate)` pairs entering the fit.
    pub curve: Vec<(f64, f64)>,
}

/// Fit a power law to an ensemble curve with a trace bootstrap: `curve(I)`
/// maps a multiset of trial indices to the curve estimated from those
/// trials. The point estimate (and r²) use the full ensemble; the interval
/// is the 2.5–97.5 percentile of slopes over resampled ensembles.
fn bootstrap_curve_fit<F>(
    ts: &[f64],
    n_rows: usize,
    curve: F,
    resamples: usize,
    seed: u64,
) -> Result<ScalingEstimate, SwitchError>
where
    F: Fn(&[usize]) -> Vec<f64>,
{
    let full: Vec<usize> = (0..n_rows).collect();
    let ys = curve(&full);
    let point = fit_exponent(ts, &ys, 200, mix_seed(seed, "curve-point", 0))?;
    let resamples = resamples.max(200);
    let mut slopes = Vec::with_capacity(resamples);
    let lx: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
    for r in 0..resamples {
        let mut rng = trial_rng(seed, "trace-bootstrap", r as u64);
        let idx: Vec<usize> =
            (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect();
        let ys_r = curve(&idx);
        if ys_r.iter().any(|&y| !(y > 0.0)) {
            // A resample can void a log point (e.g. all walkers at the
            // wall); skip it rather than poison the percentiles.
            continue;
        }
        let ly: Vec<f64> = ys_r.iter().map(|v| v.ln()).collect();
        slopes.push(least_squares_line(&lx, &ly).0);
    }
    if slopes.len() < resamples / 2 {
        return Err(SwitchError::ZeroCount { window_start: ts[0] as usize });
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];
    let fit = FitReport { exponent_ci: (pick(0.025), pick(0.975)), ..point };
    Ok(ScalingEstimate {
        fit,
        curve: ts.iter().copied().zip(ys).collect(),
    })
}

fn checkpoint_times(horizon: usize) -> Vec<usize> {
    log_spaced_integers((horizon / 100).max(8).min(horizon), horizon, 12)
}

/// Ensemble displacement exponent of the switched walk: simulates `trials`
/// independent traces, records `⟨x(t)⟩` at log-spaced checkpoints over the
/// last two decades, and fits the power law. Diffusive auxiliary at drift 1
/// is the Lévy construction (`x ~ t^{3/4}`); drift 0 recovers `t^{1/2}`.
pub fn displacement_exponent(
    aux: &AuxWalkerModel,
    horizon: usize,
    drift: f64,
    trials: usize,
    seed: u64,
) -> Result<ScalingEstimate, SwitchError> {
    validate_switched(aux, horizon, drift)?;
    if trials < 2 {
        return Err(SwitchError::TooFewTrials { got: trials, need: 2 });
    }
    let checks = checkpoint_times(horizon);
    let model = *aux;
    let rows: Vec<Vec<f64>> = run_trials(trials, move |k| {
        let mut rng = trial_rng(seed, "levy-ensemble", k as u64);
        let mut walker = SwitchedWalker::new();
        let mut row = Vec::with_capacity(checkpoint_times(horizon).len());
        let checks = checkpoint_times(horizon);
        let mut next = 0;
        for t in 1..=horizon {
            walker.tick(&model, drift, t, &mut rng);
            while next < checks.len() && checks[next] == t {
                row.push(walker.x as f64);
                next += 1;
            }
        }
        row
    });
    let ts: Vec<f64> = checks.iter().map(|&t| t as f64).collect();
    bootstrap_curve_fit(
        &ts,
        trials,
        |idx| {
            let mut means = vec![0.0; ts.len()];
            for &i in idx {
                for (m, v) in means.iter_mut().zip(&rows[i]) {
                    *m += v;
                }
            }
            means.iter().map(|m| m / idx.len() as f64).collect()
        },
        400,
        mix_seed(seed, "displacement-fit", 0),
    )
}

/// One row of the ensemble curve written by the CLI: time, mean
/// displacement, mean squared displacement, mean cumulative flip count.
#[derive(Debug, Clone)]
pub struct EnsembleCurveRow {
    pub t: usize,
    pub mean_x: f64,
    pub msd: f64,
    pub flips: f64,
}

/// Full ensemble curve of the switched walk at log-spaced checkpoints.
pub fn switched_ensemble_curve(
    aux: &AuxWalkerModel,
    horizon: usize,
    drift: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<EnsembleCurveRow>, SwitchError> {
    validate_switched(aux, horizon, drift)?;
    if trials == 0 {
        return Err(SwitchError::TooFewTrials { got: 0, need: 1 });
    }
    let checks = log_spaced_integers(1, horizon, 24);
    let model = *aux;
    let rows: Vec<Vec<(f64, f64, f64)>> = run_trials(trials, move |k| {
        let mut rng = trial_rng(seed, "levy-ensemble", k as u64);
        let mut walker = SwitchedWalker::new();
        let checks = log_spaced_integers(1, horizon, 24);
        let mut flips = 0usize;
        let mut row = Vec::with_capacity(checks.len());
        let mut next = 0;
        for t in 1..=horizon {
            if walker.tick(&model, drift, t, &mut rng) {
                flips += 1;
            }
            while next < checks.len() && checks[next] == t {
                let x = walker.x as f64;
                row.push((x, x * x, flips as f64));
                next += 1;
            }
        }
        row
    });
    Ok(checks
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let n = trials as f64;
            let (mut sx, mut sxx, mut sf) = (0.0, 0.0, 0.0);
            for row in &rows {
                sx += row[j].0;
                sxx += row[j].1;
                sf += row[j].2;
            }
            EnsembleCurveRow { t, mean_x: sx / n, msd: sxx / n, flips: sf / n }
        })
        .collect())
}

/// Post-selection rate of the switch construction: the probability that
/// the auxiliary walker sits at its origin at the end of the run. To
/// smooth the parity of lattice walks the estimate averages origin
/// occupation over the window `[n, 1.2·n]`.
#[derive(Debug, Clone)]
pub struct OverheadEstimate {
    pub rate: f64,
    /// Trace-bootstrap percentile interval on the rate.
    pub ci: (f64, f64),
    pub window: (usize, usize),
    pub trials: usize,
}

fn origin_occupation(
    aux: &AuxWalkerModel,
    window: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut state = AuxState::new();
    let mut hits = 0usize;
    for t in 1..=window.1 {
        let returned = state.step(aux, t, rng);
        let at_origin = match aux {
            // The Bernoulli stand-in has no position; "at the origin"
            // means a return fired at this tick.
            AuxWalkerModel::Ballistic1d { .. } => returned,
            _ => state.pos == [0, 0],
        };
        if t >= window.0 && at_origin {
            hits += 1;
        }
    }
    hits as f64 / (window.1 - window.0 + 1) as f64
}

/// Estimate the auxiliary walker's origin-return rate at horizon `n` by
/// Monte Carlo over `trials` independent walkers.
pub fn conditioned_overhead(
    aux: &AuxWalkerModel,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<OverheadEstimate, SwitchError> {
    aux.validate()?;
    if n == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    if trials == 0 {
        return Err(SwitchError::TooFewTrials { got: 0, need: 1 });
    }
    let window = (n, n + (n + 4) / 5);
    let model = *aux;
    let fractions: Vec<f64> = run_trials(trials, move |k| {
        let mut rng = trial_rng(seed, "overhead-aux", k as u64);
        origin_occupation(&model, window, &mut rng)
    });
    let rate = fractions.iter().sum::<f64>() / trials as f64;
    if rate == 0.0 {
        return Err(SwitchError::ZeroCount { window_start: n });
    }
    let resamples = 400;
    let mut rates = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = trial_rng(seed, "overhead-bootstrap", r as u64);
        let mean = (0..trials)
            .map(|_| fractions[rng.random_range(0..trials)])
            .sum::<f64>()
            / trials as f64;
        rates.push(mean);
    }
    rates.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| rates[((rates.len() - 1) as f64 * q).round() as usize];
    Ok(OverheadEstimate {
        rate,
        ci: (pick(0.025), pick(0.975)),
        window,
        trials,
    })
}

/// Fit the overhead decay exponent over several horizons (the diffusive
/// auxiliary must give `−1/2`: the extra `√N` post-selection overhead).
pub fn overhead_exponent(
    aux: &AuxWalkerModel,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ScalingEstimate, SwitchError> {
    aux.validate()?;
    if trials < 2 {
        return Err(SwitchError::TooFewTrials { got: trials, need: 2 });
    }
    let model = *aux;
    // rows[k][j]: occupation fraction of trial k at horizon ns[j].
    let ns_owned: Vec<usize> = ns.to_vec();
    let rows: Vec<Vec<f64>> = run_trials(trials, move |k| {
        ns_owned
            .iter()
            .map(|&n| {
                let window = (n, n + (n + 4) / 5);
                let mut rng =
                    trial_rng(mix_seed(seed, "overhead-horizon", n as u64), "overhead-aux", k as u64);
                origin_occupation(&model, window, &mut rng)
            })
            .collect()
    });
    let ts: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    bootstrap_curve_fit(
        &ts,
        trials,
        |idx| {
            let mut means = vec![0.0; ts.len()];
            for &i in idx {
                for (m, v) in means.iter_mut().zip(&rows[i]) {
                    *m += v;
                }
            }
            means.iter().map(|m| m / idx.len() as f64).collect()
        },
        400,
        mix_seed(seed, "overhead-fit", 0),
    )
}

/// Quenched per-site transition rates for the disordered head walk.
///
/// Rates are derived lazily, one independent stream per site, so the same
/// seed always reproduces the same field regardless of how far a walk
/// explores, and trace randomness never touches field randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomRateField {
    kind: DisorderKind,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderKind {
    /// No disorder: every site moves every tick (γ_L = γ_R = 1/2).
    Uniform,
    /// Heavy-tailed traps: site escape probability `U^{1/μ}` for uniform
    /// `U`, so waiting times have tail index μ and the walk slows to
    /// `x ~ t^{μ/(1+μ)}`.
    Trap { mu: f64 },
}

impl RandomRateField {
    pub fn uniform(seed: u64) -> Self {
        RandomRateField { kind: DisorderKind::Uniform, seed }
    }

    pub fn trap(mu: f64, seed: u64) -> Result<Self, SwitchError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(SwitchError::BadTailIndex { mu });
        }
        Ok(RandomRateField { kind: DisorderKind::Trap { mu }, seed })
    }

    pub fn kind(&self) -> DisorderKind {
        self.kind
    }

    /// The `(γ_L, γ_R)` pair at one site. Always satisfies γ ≥ 0 and
    /// γ_L + γ_R ≤ 1 (the escape probability of the site's trap, split
    /// evenly between the two directions).
    pub fn pair(&self, site: usize) -> (f64, f64) {
        match self.kind {
            DisorderKind::Uniform => (0.5, 0.5),
            DisorderKind::Trap { mu } => {
                let mut rng = trial_rng(self.seed, "trap-site", site as u64);
                let u = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let escape = u.powf(1.0 / mu);
                (0.5 * escape, 0.5 * escape)
            }
        }
    }

    /// Materialize the first `sites` pairs (CLI and inspection).
    pub fn realize(&self, sites: usize) -> Vec<(f64, f64)> {
        (0..sites).map(|i| self.pair(i)).collect()
    }
}

/// Evolve the disordered head walk for one tick sequence, recording
/// positions. At each tick the walker escapes its site with probability
/// `γ_L + γ_R`; an escape moves right or left with equal probability,
/// except at the wall where it always moves right.
fn simulate_trap(
    field: &RandomRateField,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    mut record: impl FnMut(usize, i64),
) {
    let mut rates: Vec<(f64, f64)> = Vec::new();
    let mut x: i64 = 0;
    for t in 1..=horizon {
        let site = x as usize;
        while rates.len() <= site {
            rates.push(field.pair(rates.len()));
        }
        let (gl, gr) = rates[site];
        if rng.random::<f64>() < gl + gr {
            if x == 0 || rng.random::<f64>() < 0.5 {
                x += 1;
            } else {
                x -= 1;
            }
        }
        record(t, x);
    }
}

/// One quenched-disorder walk over the given rate field. The trace's flip
/// and return records are empty — there is no switch in this variant.
pub fn subdiffusive_trace(
    field: &RandomRateField,
    horizon: usize,
    seed: u64,
) -> Result<SwitchedWalkTrace, SwitchError> {
    if horizon == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    let mut rng = trial_rng(seed, "trap-trace", 0);
    let mut positions = Vec::with_capacity(horizon + 1);
    positions.push(0u32);
    simulate_trap(field, horizon, &mut rng, |_, x| {
        positions.push(u32::try_from(x).expect("wall keeps x nonnegative"));
    });
    Ok(SwitchedWalkTrace {
        positions,
        flip_times: Vec::new(),
        aux_return_times: Vec::new(),
        aux_final: [0, 0],
    })
}

/// Disorder-averaged displacement exponent: every trial draws its own rate
/// field (fresh disorder) and its own walk stream. Heavy-tailed traps with
/// index μ give `x ~ t^{μ/(1+μ)}`; the uniform field recovers `t^{1/2}`.
pub fn subdiffusive_exponent(
    kind: DisorderKind,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<ScalingEstimate, SwitchError> {
    if horizon == 0 {
        return Err(SwitchError::ZeroHorizon);
    }
    if trials < 2 {
        return Err(SwitchError::TooFewTrials { got: trials, need: 2 });
    }
    if let DisorderKind::Trap { mu } = kind {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(SwitchError::BadTailIndex { mu });
        }
    }
    let checks = checkpoint_times(horizon);
    let rows: Vec<Vec<f64>> = run_trials(trials, move |k| {
        let field = match kind {
            DisorderKind::Uniform => RandomRateField::uniform(0),
            DisorderKind::Trap { mu } => RandomRateField {
                kind: DisorderKind::Trap { mu },
                seed: mix_seed(seed, "trap-field", k as u64),
            },
        };
        let mut rng = trial_rng(seed, "trap-walk", k as u64);
        let checks = checkpoint_times(horizon);
        let mut row = Vec::with_capacity(checks.len());
        let mut next = 0;
        simulate_trap(&field, horizon, &mut rng, |t, x| {
            while next < checks.len() && checks[next] == t {
                row.push(x as f64);
                next += 1;
            }
        });
        row
    });
    let ts: Vec<f64> = checks.iter().map(|&t| t as f64).collect();
    bootstrap_curve_fit(
        &ts,
        trials,
        |idx| {
            let mut means = vec![0.0; ts.len()];
            for &i in idx {
                for (m, v) in means.iter_mut().zip(&rows[i]) {
                    *m += v;
                }
            }
            means.iter().map(|m| m / idx.len() as f64).collect()
        },
        400,
        mix_seed(seed, "trap-fit", 0),
    )
}

/// Heuristic entanglement estimate from a walk ensemble: at cut ℓ the
/// radiated entropy is approximated by `⟨m(ℓ)⟩·ln s + H(m(ℓ))`, the mean
/// height times the per-level color entropy plus the entropy of the height
/// distribution itself. Only the scaling exponent of the result is
/// validated; prefactors are heuristic.
pub fn entanglement_proxy(
    traces: &[SwitchedWalkTrace],
    ells: &[usize],
    colors: usize,
) -> Result<Vec<(usize, f64)>, SwitchError> {
    if colors < 2 {
        return Err(SwitchError::ProxyNeedsColors { s: colors });
    }
    if traces.len() < 1000 {
        return Err(SwitchError::InsufficientEnsemble { got: traces.len(), need: 1000 });
    }
    let ln_s = (colors as f64).ln();
    let mut out = Vec::with_capacity(ells.len());
    for &ell in ells {
        for trace in traces {
            if ell > trace.horizon() {
                return Err(SwitchError::CutBeyondHorizon { ell, horizon: trace.horizon() });
            }
        }
        let heights: Vec<u32> = traces.iter().map(|tr| tr.positions[ell]).collect();
        out.push((ell, proxy_from_heights(&heights, ln_s)));
    }
    Ok(out)
}

fn proxy_from_heights(heights: &[u32], ln_s: f64) -> f64 {
    let n = heights.len() as f64;
    let mean = heights.iter().map(|&h| f64::from(h)).sum::<f64>() / n;
    let max = *heights.iter().max().expect("nonempty ensemble") as usize;
    let mut hist = vec![0.0f64; max + 1];
    for &h in heights {
        hist[h as usize] += 1.0 / n;
    }
    mean * ln_s + shannon_entropy(&hist)
}

/// Exponent of the entanglement proxy over the given cuts, with the
/// bootstrap resampling whole traces.
pub fn proxy_exponent(
    traces: &[SwitchedWalkTrace],
    ells: &[usize],
    colors: usize,
    seed: u64,
) -> Result<ScalingEstimate, SwitchError> {
    entanglement_proxy(traces, ells, colors)?;
    let ln_s = (colors as f64).ln();
    // heights[j][k]: height of trace k at cut ells[j].
    let heights: Vec<Vec<u32>> = ells
        .iter()
        .map(|&ell| traces.iter().map(|tr| tr.positions[ell]).collect())
        .collect();
    let ts: Vec<f64> = ells.iter().map(|&e| e as f64).collect();
    bootstrap_curve_fit(
        &ts,
        traces.len(),
        |idx| {
            heights
                .iter()
                .map(|col| {
                    let sample: Vec<u32> = idx.iter().map(|&i| col[i]).collect();
                    proxy_from_heights(&sample, ln_s)
                })
                .collect()
        },
        200,
        mix_seed(seed, "proxy-fit", 0),
    )
}
