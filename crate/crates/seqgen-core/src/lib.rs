//! Sequential generators of correlated qudit states.
//!
//! An emitter with a small (or truncated) internal Hilbert space interacts
//! once per clock tick with a fresh reservoir qudit and never touches it
//! again. Running the machine for `N` ticks radiates an `N`-qudit state
//! whose correlations are entirely dictated by the emitter dynamics. This
//! crate implements several such machines and the analysis tools needed to
//! verify their scaling behaviour at desk scale:
//!
//! * [`walk`] — the classical skeleton: a biased random walker on the
//!   half-line with a reflecting wall, its phases, return probabilities and
//!   steady states.
//! * [`channel`] — quantum channels in Kraus form, sequential generation of
//!   radiated states, Rényi entropies computed on the emitter side, and
//!   exact Schmidt analysis of small radiated states.
//! * [`motzkin`] — colored Motzkin walk ensembles (spin-1 and spin-2), exact
//!   amplitudes, height-resolved Schmidt spectra and entanglement scaling.
//! * [`grammar`] / [`pda`] — weighted context-free grammars in Chomsky
//!   normal form, CYK recognition, and compilation to weighted push-down
//!   automata that emit superpositions of strings of the language.
//! * [`conveyor`] — circuit-level realizations of the above machines on a
//!   two- or three-leg ladder with a conveyor belt of reservoir particles.
//! * [`switches`] — walkers whose bias is toggled by an auxiliary process
//!   (Lévy-type superdiffusion) or frozen by quenched trap disorder
//!   (subdiffusion), with post-selection overhead estimates.
//! * [`fit`] — log-log exponent fits with bootstrap confidence intervals.
//!
//! Monte Carlo ensembles run on a rayon thread pool when the `parallel`
//! feature (default) is enabled; disabling it falls back to sequential
//! execution with identical results, since every trial derives its own RNG
//! stream from the master seed.

pub mod channel;
pub mod conveyor;
pub mod fit;
pub mod grammar;
pub mod motzkin;
pub mod par;
pub mod pda;
pub mod rng;
pub mod switches;
pub mod util;
pub mod walk;
