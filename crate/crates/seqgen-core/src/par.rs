//! Trial runners: rayon-parallel by default, sequential otherwise.
//!
//! Both runners evaluate `f(trial_index)` for `0..trials` and return results
//! in trial order. Because each trial seeds its own RNG stream from its
//! index (see [`crate::rng`]), the two runners are interchangeable — the
//! `parallel` feature only changes wall-clock time, never output.

/// Run trials on the rayon pool (or sequentially without the feature),
/// collecting results in trial order.
#[cfg(feature = "parallel")]
pub fn run_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    run_trials_seq(trials, f)
}

/// Always-sequential runner, kept available for benchmarking against the
/// parallel path and for callers that need strict single-thread execution.
pub fn run_trials_seq<T, F>(trials: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..trials).map(f).collect()
}
