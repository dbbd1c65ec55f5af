//! Scaling-law fits on (size, observable) data.
//!
//! The workhorse is an ordinary least-squares line in log-log space, giving
//! `y ≈ A · x^b`. Uncertainty on the exponent comes from a pair bootstrap
//! (resample points with replacement, refit, take percentile bounds), which
//! makes no assumption about per-point error bars. For entanglement-entropy
//! data the interesting distinction is `S ~ ℓ^b` versus `S ~ a + b·ln ℓ`;
//! [`compare_log_power`] fits both and ranks them by residual sum of squares
//! in the original y-space.

use crate::rng::trial_rng;
use rand::RngExt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {need} data points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("x and y lengths differ: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("log-log fit requires strictly positive data (offending value {value} at index {index})")]
    NonPositive { index: usize, value: f64 },
}

/// Result of a power-law fit `y ≈ amplitude · x^exponent`.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub exponent: f64,
    pub amplitude: f64,
    /// Bootstrap percentile interval (2.5%, 97.5%) on the exponent.
    pub exponent_ci: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
}

impl FitReport {
    /// True when `value` lies inside the bootstrap interval widened by
    /// `slack` on both sides.
    pub fn consistent_with(&self, value: f64, slack: f64) -> bool {
        value >= self.exponent_ci.0 - slack && value <= self.exponent_ci.1 + slack
    }
}

pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check_positive_pairs(xs: &[f64], ys: &[f64], min_points: usize) -> Result<(), FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch { x: xs.len(), y: ys.len() });
    }
    if xs.len() < min_points {
        return Err(FitError::TooFewPoints { need: min_points, got: xs.len() });
    }
    for (i, &v) in xs.iter().chain(ys.iter()).enumerate() {
        if !(v > 0.0) {
            return Err(FitError::NonPositive { index: i % xs.len(), value: v });
        }
    }
    Ok(())
}

/// Fit `y ≈ A·x^b` by least squares on `(ln x, ln y)` with a pair bootstrap
/// for the exponent interval. `resamples` below 200 is bumped to 200 so the
/// percentile bounds are meaningful.
pub fn fit_exponent(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<FitReport, FitError> {
    check_positive_pairs(xs, ys, 3)?;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = least_squares_line(&lx, &ly);

    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let resamples = resamples.max(200);
    let n = lx.len();
    let mut slopes: Vec<f64> = (0..resamples)
        .map(|r| {
            let mut rng = trial_rng(seed, "bootstrap", r as u64);
            let mut bx = Vec::with_capacity(n);
            let mut by = Vec::with_capacity(n);
            // Degenerate resamples (all one point) give slope NaN; redraw.
            loop {
                bx.clear();
                by.clear();
                for _ in 0..n {
                    let k = rng.random_range(0..n);
                    bx.push(lx[k]);
                    by.push(ly[k]);
                }
                let first = bx[0];
                if bx.iter().any(|&v| v != first) {
                    break;
                }
            }
            least_squares_line(&bx, &by).0
        })
        .collect();
    slopes.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| slopes[((slopes.len() - 1) as f64 * q).round() as usize];

    Ok(FitReport {
        exponent: slope,
        amplitude: intercept.exp(),
        exponent_ci: (pick(0.025), pick(0.975)),
        r_squared,
        points: n,
    })
}

/// Which functional form describes the data better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingLaw {
    /// `y ≈ a + b·ln x`
    Log,
    /// `y ≈ A·x^b`
    Power,
}

/// Outcome of the log-vs-power comparison: both fits plus their residual
/// sums of squares measured in the original y-space.
#[derive(Debug, Clone)]
pub struct LawComparison {
    pub preferred: ScalingLaw,
    pub log_coeffs: (f64, f64),
    pub power_coeffs: (f64, f64),
    pub rss_log: f64,
    pub rss_power: f64,
}

/// Fit both `y = a + b ln x` and `y = A x^b`, comparing residuals in
/// y-space so neither model gets the home-field advantage of its own
/// transformed coordinates.
pub fn compare_log_power(xs: &[f64], ys: &[f64]) -> Result<LawComparison, FitError> {
    check_positive_pairs(xs, ys, 3)?;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();

    let (b_log, a_log) = least_squares_line(&lx, ys);
    let (b_pow, la_pow) = least_squares_line(&lx, &ly);
    let a_pow = la_pow.exp();

    let rss = |pred: &dyn Fn(f64) -> f64| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - pred(x);
                r * r
            })
            .sum()
    };
    let rss_log = rss(&|x: f64| a_log + b_log * x.ln());
    let rss_power = rss(&|x: f64| a_pow * x.powf(b_pow));

    Ok(LawComparison {
        preferred: if rss_log <= rss_power { ScalingLaw::Log } else { ScalingLaw::Power },
        log_coeffs: (a_log, b_log),
        power_coeffs: (a_pow, b_pow),
        rss_log,
        rss_power,
    })
}

/// Wilson score interval for a binomial proportion at normal quantile `z`
/// (1.96 for 95%). Well-behaved at small counts and at p near 0 or 1.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
