//! Weighted push-down automata compiled from CNF grammars.
//!
//! The machine keeps a stack of grammar variables and repeatedly rewrites
//! the top: a pair rule `A -> B C` replaces the top (silently, `B` on
//! top), a terminal rule `A -> a` pops the top and radiates `a`. The
//! emitted string is accepted when the stack is empty. On an empty stack
//! the machine either halts ([`RestartPolicy::Halt`]) or silently pushes
//! the start symbol again and keeps generating ([`RestartPolicy::Renew`]),
//! which turns acceptance at length `N` into a recurrent wall-return
//! event rather than a one-shot parse.
//!
//! Three views of the same machine are implemented and cross-checked:
//! stochastic sampling ([`WeightedPda::sample_emission`]), the exact
//! coherent superposition over trajectories
//! ([`WeightedPda::exact_superposition`]), and a bona fide Kraus channel
//! on the truncated stack space ([`WeightedPda::to_channel`]).

use std::collections::BTreeMap;
use std::collections::VecDeque;

use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{ChannelError, KrausChannel, RadiatedState};
use crate::fit::{fit_exponent, wilson_interval, FitError, FitReport};
use crate::grammar::{CnfGrammar, GrammarError, RuleBody};
use crate::par::run_trials;
use crate::rng::{mix_seed, trial_rng};

#[derive(Debug, Error)]
pub enum PdaError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("exact superposition is limited to lengths 1..=12, got {n}")]
    LengthTooLong { n: usize },
    #[error("no accepted string of length {n}")]
    EmptySupport { n: usize },
    #[error("post-selection rates need at least 10^4 trials per length, got {0}")]
    NotEnoughTrials(usize),
    #[error(
        "the truncated machine needs {states} stack states (cap {cap}); \
         lower max_len"
    )]
    StateSpaceTooLarge { states: usize, cap: usize },
}

/// What the machine does when its stack empties mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartPolicy {
    /// Stop generating: the run is over (one complete derivation).
    Halt,
    /// Silently push the start symbol and continue: the emitted string
    /// becomes a concatenation of complete derivations.
    Renew,
}

/// One entry of a top-of-stack transition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdaAction {
    /// Replace the top by two variables, the first on top. Silent.
    PushPair(usize, usize),
    /// Pop the top and radiate a terminal.
    EmitPop(char),
    /// Empty stack, [`RestartPolicy::Renew`]: push the start symbol. Silent.
    PushStart,
    /// Empty stack, [`RestartPolicy::Halt`]: absorb.
    Stay,
}

impl PdaAction {
    fn stack_delta(self) -> i32 {
        match self {
            PdaAction::PushPair(..) => 1,
            PdaAction::EmitPop(_) => -1,
            PdaAction::PushStart => 1,
            PdaAction::Stay => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub action: PdaAction,
    pub weight: f64,
}

/// Time-dependent modulation of the transition weights.
#[derive(Debug, Clone, Copy)]
pub enum BiasSchedule {
    /// Multiply each transition weight by `strength^Δstack` until
    /// `n_half` symbols have been emitted, by `strength^-Δstack` after,
    /// renormalizing per row. Drives the stack up, then back down.
    PushPop { n_half: usize, strength: f64 },
}

impl BiasSchedule {
    fn factor(&self, emitted: usize, action: PdaAction) -> f64 {
        match *self {
            BiasSchedule::PushPop { n_half, strength } => {
                let s = if emitted < n_half { strength } else { 1.0 / strength };
                s.powi(action.stack_delta())
            }
        }
    }
}

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRun {
    /// Radiated terminals, in order.
    pub emitted: String,
    /// Stack contents at the end of the run (variable names, top last).
    pub final_stack: Vec<String>,
    /// Product of the chosen transition weights (modulated ones under a
    /// bias schedule).
    pub weight: f64,
    /// Total machine steps, silent rewrites included.
    pub steps: usize,
    /// Stack size right after each emission — the height profile.
    pub stack_sizes: Vec<usize>,
}

impl EmissionRun {
    /// Acceptance event: the stack is empty at the end of the run.
    pub fn accepted(&self) -> bool {
        self.final_stack.is_empty()
    }
}

/// Acceptance-rate estimates over a list of target lengths.
#[derive(Debug, Clone)]
pub struct PostselectionReport {
    pub lengths: Vec<usize>,
    pub rates: Vec<f64>,
    /// 95% Wilson intervals per length.
    pub intervals: Vec<(f64, f64)>,
    pub trials: usize,
    /// Log-log fit over the nonzero rates (needs at least three).
    pub fit: Option<FitReport>,
    /// Set when some length saw no acceptance at all — the hallmark of an
    /// exponentially suppressed (escaping) regime at these sample sizes.
    pub exponential_suspected: bool,
}

/// The channel form of a PDA, with its emitter basis spelled out.
#[derive(Debug, Clone)]
pub struct PdaChannel {
    pub channel: KrausChannel,
    /// Basis label of each stack-sector state: a stack, top last. States
    /// `stacks.len()..channel.dim()` are absorbing junk states.
    pub stacks: Vec<Vec<usize>>,
    /// Index of the empty-stack state.
    pub empty: usize,
    /// Index of the start state (stack = [S]).
    pub start: usize,
    /// First junk state; junk occupation is the discarded sector.
    pub junk_start: usize,
    /// Uniform contraction factor c ≥ 1 applied to every emission
    /// operator: post-selected amplitudes of length-N strings carry a
    /// common factor c^(-N), so the normalized radiated state is
    /// unchanged while trace preservation becomes exact.
    pub contraction: f64,
}

/// A weighted PDA compiled from a CNF grammar.
#[derive(Debug, Clone)]
pub struct WeightedPda {
    rows: Vec<Vec<Transition>>,
    empty_row: Vec<Transition>,
    start: usize,
    names: Vec<String>,
    terminals: Vec<char>,
    min_yield: Vec<usize>,
    policy: RestartPolicy,
}

impl WeightedPda {
    /// Compile a validated grammar. Pair rules become silent push-pair
    /// transitions, terminal rules become emit-pops; the empty-stack row
    /// is a single unit-weight transition fixed by the restart policy.
    pub fn compile(grammar: &CnfGrammar, policy: RestartPolicy) -> Self {
        let n = grammar.n_variables();
        let mut rows = vec![Vec::new(); n];
        for rule in grammar.rules() {
            let action = match rule.body {
                RuleBody::Terminal(c) => PdaAction::EmitPop(c),
                RuleBody::Pair(b, c) => PdaAction::PushPair(b, c),
            };
            rows[rule.lhs].push(Transition { action, weight: rule.weight });
        }
        let empty_row = vec![Transition {
            action: match policy {
                RestartPolicy::Halt => PdaAction::Stay,
                RestartPolicy::Renew => PdaAction::PushStart,
            },
            weight: 1.0,
        }];
        Self {
            rows,
            empty_row,
            start: grammar.start(),
            names: (0..n).map(|v| grammar.variable_name(v).to_string()).collect(),
            terminals: grammar.terminals().to_vec(),
            min_yield: (0..n).map(|v| grammar.min_yield(v)).collect(),
            policy,
        }
    }

    pub fn policy(&self) -> RestartPolicy {
        self.policy
    }

    pub fn terminals(&self) -> &[char] {
        &self.terminals
    }

    /// Transition row for a stack top (`None` = empty stack).
    pub fn transitions(&self, top: Option<usize>) -> &[Transition] {
        match top {
            Some(v) => &self.rows[v],
            None => &self.empty_row,
        }
    }

    /// Position of a terminal in the sorted terminal alphabet — the
    /// radiated symbol used by the exact and channel representations.
    pub fn terminal_index(&self, c: char) -> Option<usize> {
        self.terminals.iter().position(|&t| t == c)
    }

    /// Encode a string over the terminal alphabet as radiated symbols.
    pub fn encode(&self, s: &str) -> Option<Vec<i64>> {
        s.chars().map(|c| self.terminal_index(c).map(|i| i as i64)).collect()
    }

    fn stack_min_yield(&self, stack: &[usize]) -> usize {
        stack.iter().map(|&v| self.min_yield[v]).sum()
    }

    /// Modulated, renormalized probabilities of a row.
    fn row_probabilities(
        &self,
        row: &[Transition],
        emitted: usize,
        schedule: Option<&BiasSchedule>,
    ) -> Vec<f64> {
        let mut probs: Vec<f64> = row
            .iter()
            .map(|t| {
                t.weight
                    * schedule.map_or(1.0, |s| s.factor(emitted, t.action))
            })
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }

    fn run_trajectory(
        &self,
        max_steps: usize,
        stop_at_emitted: Option<usize>,
        schedule: Option<&BiasSchedule>,
        rng: &mut ChaCha8Rng,
    ) -> EmissionRun {
        let mut stack = vec![self.start];
        let mut emitted = String::new();
        let mut n_emitted = 0usize;
        let mut stack_sizes = Vec::new();
        let mut weight = 1.0;
        let mut steps = 0usize;
        while steps < max_steps {
            if stop_at_emitted == Some(n_emitted) {
                break;
            }
            let row = self.transitions(stack.last().copied());
            if matches!(row[0].action, PdaAction::Stay) {
                break; // halted on the empty stack
            }
            let probs = self.row_probabilities(row, n_emitted, schedule);
            let mut u: f64 = rng.random();
            let mut choice = row.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                if u < p {
                    choice = i;
                    break;
                }
                u -= p;
            }
            weight *= probs[choice];
            match row[choice].action {
                PdaAction::PushPair(b, c) => {
                    stack.pop();
                    stack.push(c);
                    stack.push(b);
                }
                PdaAction::EmitPop(a) => {
                    stack.pop();
                    emitted.push(a);
                    n_emitted += 1;
                    stack_sizes.push(stack.len());
                }
                PdaAction::PushStart => stack.push(self.start),
                PdaAction::Stay => unreachable!(),
            }
            steps += 1;
        }
        EmissionRun {
            emitted,
            final_stack: stack.into_iter().map(|v| self.names[v].clone()).collect(),
            weight,
            steps,
            stack_sizes,
        }
    }

    /// Sample one trajectory. Runs until the machine halts or `max_steps`
    /// machine steps have elapsed; acceptance is an empty final stack.
    pub fn sample_emission(
        &self,
        max_steps: usize,
        seed: u64,
        schedule: Option<&BiasSchedule>,
    ) -> EmissionRun {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.run_trajectory(max_steps, None, schedule, &mut rng)
    }

    /// Sample one trajectory stopped right after its `target`-th emission
    /// (or earlier, if the machine halts or `max_steps` elapses first).
    /// Acceptance still means an empty final stack, so this measures the
    /// post-selection success at an exact length — with an optional bias
    /// schedule steering the run.
    pub fn sample_emission_to(
        &self,
        target: usize,
        max_steps: usize,
        seed: u64,
        schedule: Option<&BiasSchedule>,
    ) -> EmissionRun {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.run_trajectory(max_steps, Some(target), schedule, &mut rng)
    }

    /// Allocation-light acceptance probe: does one fresh trajectory have
    /// an empty stack right after its `n`-th emission?
    fn accepts_at(&self, n: usize, rng: &mut ChaCha8Rng) -> bool {
        let max_steps = 64 * n;
        let mut stack = vec![self.start];
        let mut n_emitted = 0usize;
        for _ in 0..max_steps {
            if n_emitted == n {
                break;
            }
            let row = self.transitions(stack.last().copied());
            if matches!(row[0].action, PdaAction::Stay) {
                return false; // halted early
            }
            let mut u: f64 = rng.random::<f64>();
            let mut choice = row.len() - 1;
            for (i, t) in row.iter().enumerate() {
                if u < t.weight {
                    choice = i;
                    break;
                }
                u -= t.weight;
            }
            match row[choice].action {
                PdaAction::PushPair(b, c) => {
                    stack.pop();
                    stack.push(c);
                    stack.push(b);
                }
                PdaAction::EmitPop(_) => {
                    stack.pop();
                    n_emitted += 1;
                }
                PdaAction::PushStart => stack.push(self.start),
                PdaAction::Stay => unreachable!(),
            }
        }
        n_emitted == n && stack.is_empty()
    }

    /// Monte-Carlo empty-stack acceptance rate at each target length,
    /// with Wilson intervals and a log-log exponent fit.
    pub fn postselection_rate(
        &self,
        lengths: &[usize],
        trials: usize,
        seed: u64,
    ) -> Result<PostselectionReport, PdaError> {
        if trials < 10_000 {
            return Err(PdaError::NotEnoughTrials(trials));
        }
        let mut rates = Vec::with_capacity(lengths.len());
        let mut intervals = Vec::with_capacity(lengths.len());
        for &n in lengths {
            let stream = mix_seed(seed, "postselection", n as u64);
            let hits: u64 = run_trials(trials, |i| {
                let mut rng = trial_rng(stream, "trial", i as u64);
                u64::from(self.accepts_at(n, &mut rng))
            })
            .into_iter()
            .sum();
            rates.push(hits as f64 / trials as f64);
            intervals.push(wilson_interval(hits, trials as u64, 1.96));
        }
        let exponential_suspected = rates.iter().any(|&r| r == 0.0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = lengths
            .iter()
            .zip(&rates)
            .filter(|&(_, &r)| r > 0.0)
            .map(|(&n, &r)| (n as f64, r))
            .unzip();
        let fit = if xs.len() >= 3 {
            fit_exponent(&xs, &ys, 400, mix_seed(seed, "rate-fit", 0)).ok()
        } else {
            None
        };
        Ok(PostselectionReport {
            lengths: lengths.to_vec(),
            rates,
            intervals,
            trials,
            fit,
            exponential_suspected,
        })
    }

    /// Exact radiated state of length `n`: the amplitude of each string is
    /// the coherent sum of `√weight` over all stack trajectories emitting
    /// it, post-selected on an empty stack and normalized. The reported
    /// success probability is the squared norm of the unnormalized
    /// superposition; when several derivations of one string interfere
    /// constructively it exceeds the classical acceptance weight from
    /// [`Self::acceptance_weights`].
    pub fn exact_superposition(&self, n: usize) -> Result<RadiatedState, PdaError> {
        if n == 0 || n > 12 {
            return Err(PdaError::LengthTooLong { n });
        }
        let layers = self.trajectory_dp(n, true)?;
        let mut amps: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        let mut success = 0.0;
        for ((string, stack), amp) in &layers {
            if stack.is_empty() {
                success += amp * amp;
                amps.insert(string.clone(), Complex64::new(*amp, 0.0));
            }
        }
        if amps.is_empty() {
            return Err(PdaError::EmptySupport { n });
        }
        let norm = success.sqrt();
        for a in amps.values_mut() {
            *a /= norm;
        }
        Ok(RadiatedState::from_amplitudes(n, amps, success))
    }

    /// Classical acceptance weights at length `n`: probability (not
    /// amplitude) of emitting each accepted string — the quantity a
    /// trajectory sampler estimates. Returns the per-string map and the
    /// total acceptance probability.
    pub fn acceptance_weights(
        &self,
        n: usize,
    ) -> Result<(BTreeMap<String, f64>, f64), PdaError> {
        if n == 0 || n > 12 {
            return Err(PdaError::LengthTooLong { n });
        }
        let layers = self.trajectory_dp(n, false)?;
        let mut weights: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        for ((string, stack), w) in &layers {
            if stack.is_empty() {
                let decoded: String = string
                    .iter()
                    .map(|&i| self.terminals[i as usize])
                    .collect();
                weights.insert(decoded, *w);
                total += w;
            }
        }
        Ok((weights, total))
    }

    /// Shared layer DP over (emitted string, stack) keys. `coherent`
    /// selects √weight amplitudes; otherwise plain probabilities.
    fn trajectory_dp(
        &self,
        n: usize,
        coherent: bool,
    ) -> Result<BTreeMap<(Vec<i64>, Vec<usize>), f64>, PdaError> {
        type Key = (Vec<i64>, Vec<usize>);
        let gain = |w: f64| if coherent { w.sqrt() } else { w };

        // Silent closure at a fixed emission count: expand pair rules (and
        // renews) in order of stack size; children always grow the stack.
        let close = |map: BTreeMap<Key, f64>, emitted: usize| -> BTreeMap<Key, f64> {
            let budget = n - emitted;
            let mut out: BTreeMap<Key, f64> = BTreeMap::new();
            let mut by_size: BTreeMap<usize, Vec<(Key, f64)>> = BTreeMap::new();
            for (key, v) in map {
                by_size.entry(key.1.len()).or_default().push((key, v));
            }
            while let Some((&size, _)) = by_size.iter().next() {
                let batch = by_size.remove(&size).unwrap();
                // Merge duplicates arriving at this size.
                let mut merged: BTreeMap<Key, f64> = BTreeMap::new();
                for (key, v) in batch {
                    *merged.entry(key).or_insert(0.0) += v;
                }
                for ((string, stack), v) in merged {
                    if self.stack_min_yield(&stack) > budget {
                        continue; // cannot finish in time
                    }
                    match stack.last() {
                        None => {
                            if self.policy == RestartPolicy::Renew && budget > 0 {
                                let mut renewed = stack.clone();
                                renewed.push(self.start);
                                by_size
                                    .entry(renewed.len())
                                    .or_default()
                                    .push(((string.clone(), renewed), v));
                            }
                            // Empty stack is kept as-is: it is the
                            // acceptance state at the final layer.
                            *out.entry((string, stack)).or_insert(0.0) += v;
                        }
                        Some(&top) => {
                            for t in &self.rows[top] {
                                if let PdaAction::PushPair(b, c) = t.action {
                                    let mut grown = stack.clone();
                                    grown.pop();
                                    grown.push(c);
                                    grown.push(b);
                                    by_size
                                        .entry(grown.len())
                                        .or_default()
                                        .push(((string.clone(), grown), v * gain(t.weight)));
                                }
                            }
                            *out.entry((string, stack)).or_insert(0.0) += v;
                        }
                    }
                }
            }
            out
        };

        let mut layer: BTreeMap<Key, f64> = BTreeMap::new();
        layer.insert((Vec::new(), vec![self.start]), 1.0);
        layer = close(layer, 0);
        for emitted in 0..n {
            let mut next: BTreeMap<Key, f64> = BTreeMap::new();
            for ((string, stack), v) in &layer {
                let Some(&top) = stack.last() else { continue };
                for t in &self.rows[top] {
                    if let PdaAction::EmitPop(a) = t.action {
                        let mut s = string.clone();
                        s.push(self.terminal_index(a).unwrap() as i64);
                        let mut popped = stack.clone();
                        popped.pop();
                        *next.entry((s, popped)).or_insert(0.0) += v * gain(t.weight);
                    }
                }
            }
            layer = if emitted + 1 < n { close(next, emitted + 1) } else { next };
        }
        Ok(layer)
    }

    /// Build an exactly trace-preserving Kraus channel whose post-selected
    /// sequential generation reproduces [`Self::exact_superposition`].
    ///
    /// Emitter basis states are the reachable stacks that could still
    /// finish a string of length ≤ `max_len`. The raw emission operators
    /// (entrywise √weight over silent-chain-then-emit transitions) are in
    /// general not a complete Kraus family: distinct stacks feeding the
    /// same (symbol, target) make the stacked columns non-orthogonal —
    /// that is precisely the coherence that lets trajectories interfere.
    /// So every emission operator is contracted by a common factor `1/c`
    /// with `c²` an upper bound on the Gram matrix spectrum, and the
    /// (now positive-semidefinite) completeness deficit is factored into
    /// junk operators that dump into absorbing junk states. A length-N
    /// string's amplitude picks up the harmless uniform factor `c^(-N)`;
    /// junk branches carry negative symbols (−1 decay, −2 junk idle) and
    /// never return to the stack sector.
    pub fn to_channel(&self, max_len: usize) -> Result<PdaChannel, PdaError> {
        const STATE_CAP: usize = 4_000;
        let mut stacks: Vec<Vec<usize>> = vec![Vec::new(), vec![self.start]];
        let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        index.insert(stacks[0].clone(), 0);
        index.insert(stacks[1].clone(), 1);

        // entries[symbol] -> sparse (target, source, amplitude)
        let mut entries: BTreeMap<i64, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let mut queue: VecDeque<usize> = VecDeque::from([0, 1]);

        while let Some(source) = queue.pop_front() {
            let origin = stacks[source].clone();
            // Silent closure from this stack: expand pair rules (and
            // renews) by stack size; reconverging silent paths merge
            // coherently, exactly as in the trajectory DP.
            let mut closed: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            let mut by_size: BTreeMap<usize, BTreeMap<Vec<usize>, f64>> = BTreeMap::new();
            by_size.insert(origin.len(), BTreeMap::from([(origin, 1.0)]));
            while let Some((&size, _)) = by_size.iter().next() {
                let batch = by_size.remove(&size).unwrap();
                for (stack, amp) in batch {
                    let silent: Vec<(Vec<usize>, f64)> = match stack.last() {
                        None => match self.policy {
                            RestartPolicy::Halt => Vec::new(),
                            RestartPolicy::Renew => {
                                let mut renewed = stack.clone();
                                renewed.push(self.start);
                                vec![(renewed, amp)]
                            }
                        },
                        Some(&top) => self.rows[top]
                            .iter()
                            .filter_map(|t| match t.action {
                                PdaAction::PushPair(b, c) => {
                                    let mut grown = stack.clone();
                                    grown.pop();
                                    grown.push(c);
                                    grown.push(b);
                                    Some((grown, amp * t.weight.sqrt()))
                                }
                                _ => None,
                            })
                            .collect(),
                    };
                    for (child, ca) in silent {
                        if self.stack_min_yield(&child) > max_len {
                            continue; // truncated: the junk sector absorbs it
                        }
                        *by_size
                            .entry(child.len())
                            .or_default()
                            .entry(child)
                            .or_insert(0.0) += ca;
                    }
                    *closed.entry(stack).or_insert(0.0) += amp;
                }
            }
            // Harvest emissions from every closed configuration; chains
            // meeting at the same (symbol, target) add coherently.
            let mut column: BTreeMap<(i64, usize), f64> = BTreeMap::new();
            for (stack, amp) in &closed {
                let Some(&top) = stack.last() else { continue };
                for t in &self.rows[top] {
                    if let PdaAction::EmitPop(a) = t.action {
                        let mut target = stack.clone();
                        target.pop();
                        let ti = match index.get(&target) {
                            Some(&i) => i,
                            None => {
                                let i = stacks.len();
                                if i >= STATE_CAP {
                                    return Err(PdaError::StateSpaceTooLarge {
                                        states: i + 1,
                                        cap: STATE_CAP,
                                    });
                                }
                                stacks.push(target.clone());
                                index.insert(target, i);
                                queue.push_back(i);
                                i
                            }
                        };
                        let symbol = self.terminal_index(a).unwrap() as i64;
                        *column.entry((symbol, ti)).or_insert(0.0) +=
                            amp * t.weight.sqrt();
                    }
                }
            }
            for ((symbol, target), amp) in column {
                entries.entry(symbol).or_default().push((target, source, amp));
            }
        }

        let n = stacks.len();
        // Gram matrix of the stacked emission isometry.
        let mut gram = vec![vec![0.0f64; n]; n];
        for list in entries.values() {
            let mut by_target: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
            for &(t, s, a) in list {
                by_target.entry(t).or_default().push((s, a));
            }
            for group in by_target.values() {
                for &(s1, a1) in group {
                    for &(s2, a2) in group {
                        gram[s1][s2] += a1 * a2;
                    }
                }
            }
        }
        // Gershgorin column-sum bound on the spectrum: a cheap, exact
        // contraction that keeps relative amplitudes intact.
        let bound = gram
            .iter()
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let contraction = bound.max(1.0).sqrt();
        for list in entries.values_mut() {
            for e in list.iter_mut() {
                e.2 /= contraction;
            }
        }
        // Completeness deficit D = I − M/c², factored by a clamped LDLT
        // into junk rows (symbol −1) landing in fresh absorbing states.
        let c2 = contraction * contraction;
        let mut deficit = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                deficit[i][j] = f64::from(u8::from(i == j)) - gram[i][j] / c2;
            }
        }
        let mut lower = vec![vec![0.0f64; n]; n];
        let mut pivots = vec![0.0f64; n];
        for j in 0..n {
            let mut d = deficit[j][j];
            for k in 0..j {
                d -= lower[j][k] * lower[j][k] * pivots[k];
            }
            pivots[j] = if d > 0.0 { d } else { 0.0 };
            lower[j][j] = 1.0;
            for i in j + 1..n {
                if pivots[j] == 0.0 {
                    continue;
                }
                let mut v = deficit[i][j];
                for k in 0..j {
                    v -= lower[i][k] * lower[j][k] * pivots[k];
                }
                lower[i][j] = v / pivots[j];
            }
        }
        let mut junk_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for j in 0..n {
            if pivots[j] <= 0.0 {
                continue;
            }
            let scale = pivots[j].sqrt();
            let row: Vec<(usize, f64)> = (j..n)
                .filter_map(|i| {
                    let v = scale * lower[i][j];
                    (v.abs() > 1e-15).then_some((i, v))
                })
                .collect();
            if !row.is_empty() {
                junk_rows.push(row);
            }
        }
        let junk_start = n;
        let dim = n + junk_rows.len();
        let mut decay: Vec<(usize, usize, Complex64)> = Vec::new();
        let mut idle: Vec<(usize, usize, Complex64)> = Vec::new();
        for (r, row) in junk_rows.iter().enumerate() {
            for &(src, v) in row {
                decay.push((junk_start + r, src, Complex64::new(v, 0.0)));
            }
            idle.push((junk_start + r, junk_start + r, Complex64::ONE));
        }
        let mut ops: Vec<(i64, Vec<(usize, usize, Complex64)>)> = entries
            .into_iter()
            .map(|(symbol, list)| {
                let resolved = list
                    .into_iter()
                    .map(|(t, s, a)| (t, s, Complex64::new(a, 0.0)))
                    .collect();
                (symbol, resolved)
            })
            .collect();
        if !decay.is_empty() {
            ops.push((-1, decay));
            ops.push((-2, idle));
        }
        let channel = KrausChannel::from_sparse(dim, ops)?;
        Ok(PdaChannel { channel, stacks, empty: 0, start: 1, junk_start, contraction })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures;
    use crate::motzkin::enumerate_walks;
    use crate::walk::{HalfLineWalk, WalkParams};
    use approx::assert_relative_eq;

    fn motzkin_pda(policy: RestartPolicy) -> WeightedPda {
        let g = CnfGrammar::parse(fixtures::MOTZKIN1).unwrap();
        WeightedPda::compile(&g, policy)
    }

    #[test]
    fn trivial_grammar_emits_one_symbol() {
        let g = CnfGrammar::parse("start: S\nS -> a @ 1.0\n").unwrap();
        let pda = WeightedPda::compile(&g, RestartPolicy::Halt);
        let run = pda.sample_emission(100, 7, None);
        assert_eq!(run.emitted, "a");
        assert!(run.accepted());
        assert_eq!(run.steps, 1);
        assert_relative_eq!(run.weight, 1.0);

        let state = pda.exact_superposition(1).unwrap();
        assert_eq!(state.support_size(), 1);
        assert_relative_eq!(state.amplitude(&[0]).re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(state.success_probability(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            pda.exact_superposition(2),
            Err(PdaError::EmptySupport { n: 2 })
        ));
        assert!(matches!(
            pda.exact_superposition(13),
            Err(PdaError::LengthTooLong { n: 13 })
        ));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let a = pda.sample_emission(200, 42, None);
        let b = pda.sample_emission(200, 42, None);
        assert_eq!(a, b);
        let c = pda.sample_emission(200, 43, None);
        assert_ne!(a, c);
    }

    #[test]
    fn acceptance_weights_match_cyk_for_all_fixtures() {
        // Under Halt, the classical acceptance weight of a string is the
        // total derivation weight the CYK recognizer computes.
        for text in [fixtures::MOTZKIN1, fixtures::BALANCED01, fixtures::CAT3] {
            let g = CnfGrammar::parse(text).unwrap();
            let pda = WeightedPda::compile(&g, RestartPolicy::Halt);
            for n in 1..=8usize {
                let (weights, _) = pda.acceptance_weights(n).unwrap();
                for (s, w) in &weights {
                    assert_relative_eq!(
                        *w,
                        g.recognize(s).unwrap(),
                        epsilon = 1e-10,
                        max_relative = 1e-10
                    );
                }
                // And nothing outside the language is accepted: total
                // weight equals the summed recognizer weight at length n.
                let total: f64 = weights.values().sum();
                let mut memo = std::collections::HashMap::new();
                let oracle: f64 =
                    crate::grammar::oracle::exact_language(&g, g.start(), n, &mut memo)
                        .values()
                        .sum();
                assert_relative_eq!(total, oracle, epsilon = 1e-12, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn renew_motzkin_support_at_three_is_the_four_walks() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let state = pda.exact_superposition(3).unwrap();
        assert_eq!(state.support_size(), 4);
        // Map terminal indices (d=0, f=1, u=2) onto walk steps.
        let walk_state = state
            .relabel(|i| match i {
                0 => -1,
                1 => 0,
                _ => 1,
            })
            .unwrap();
        let mut support: Vec<Vec<i64>> =
            walk_state.iter().map(|(s, _)| s.to_vec()).collect();
        support.sort();
        let mut expected = enumerate_walks(3, 1).unwrap();
        expected.sort();
        assert_eq!(support, expected);
    }

    #[test]
    fn balanced_support_at_four_matches_hand_enumeration() {
        let g = CnfGrammar::parse(fixtures::BALANCED01).unwrap();
        let pda = WeightedPda::compile(&g, RestartPolicy::Halt);
        let state = pda.exact_superposition(4).unwrap();
        let mut support: Vec<String> = state
            .iter()
            .map(|(s, _)| s.iter().map(|&i| pda.terminals()[i as usize]).collect())
            .collect();
        support.sort();
        assert_eq!(support, vec!["0011", "0101", "0110", "1001", "1010", "1100"]);
        // Odd lengths have no balanced strings at all.
        assert!(matches!(
            pda.exact_superposition(3),
            Err(PdaError::EmptySupport { n: 3 })
        ));
    }

    #[test]
    fn exact_superposition_matches_channel_for_all_fixtures_and_policies() {
        // Lengths per fixture keep the truncated stack space small; the
        // machine state count grows exponentially with max_len.
        let cases: [(&str, &[usize]); 3] = [
            (fixtures::MOTZKIN1, &[2, 4, 7]),
            (fixtures::BALANCED01, &[2, 4, 6]),
            (fixtures::CAT3, &[2, 3, 5]),
        ];
        for (text, lengths) in cases {
            let g = CnfGrammar::parse(text).unwrap();
            for policy in [RestartPolicy::Halt, RestartPolicy::Renew] {
                let pda = WeightedPda::compile(&g, policy);
                for &n in lengths {
                    let exact = match pda.exact_superposition(n) {
                        Ok(state) => state,
                        Err(PdaError::EmptySupport { .. }) => continue,
                        Err(e) => panic!("unexpected error: {e}"),
                    };
                    let built = pda.to_channel(n).unwrap();
                    let via_channel = built
                        .channel
                        .sequential_generate(built.start, n, built.empty)
                        .unwrap();
                    // Post-selected amplitudes carry the uniform factor
                    // c^(-n), so success probabilities differ by c^(-2n)
                    // and the normalized states agree exactly.
                    let scale = built.contraction.powi(-2 * n as i32);
                    assert_relative_eq!(
                        via_channel.success_probability(),
                        exact.success_probability() * scale,
                        max_relative = 1e-9
                    );
                    assert!(
                        exact.fidelity(&via_channel) >= 1.0 - 1e-10,
                        "fidelity loss at n={n}, policy {policy:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn renew_classical_height_marginal_is_the_half_line_walk() {
        // The stack of the renewing Motzkin PDA, observed after each
        // emission and projected onto the height #R + 2·#T, performs
        // exactly the uniform-measure half-line walk γ_L = γ_R = γ_0 = ⅓.
        let pda = motzkin_pda(RestartPolicy::Renew);
        let height = |stack: &[usize]| -> usize {
            stack
                .iter()
                .map(|&v| match pda.names[v].as_str() {
                    "R" => 1,
                    "T" => 2,
                    _ => 0,
                })
                .sum()
        };
        // Classical silent closure: probability of passing through each
        // configuration within one tick, expanded by stack size.
        let close = |layer: BTreeMap<Vec<usize>, f64>| -> BTreeMap<Vec<usize>, f64> {
            let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            let mut by_size: BTreeMap<usize, BTreeMap<Vec<usize>, f64>> = BTreeMap::new();
            for (stack, w) in layer {
                *by_size.entry(stack.len()).or_default().entry(stack).or_insert(0.0) += w;
            }
            while let Some((&size, _)) = by_size.iter().next() {
                let batch = by_size.remove(&size).unwrap();
                for (stack, w) in batch {
                    if w < 1e-18 {
                        continue;
                    }
                    match stack.last() {
                        None => {
                            let mut renewed = stack.clone();
                            renewed.push(pda.start);
                            *by_size
                                .entry(renewed.len())
                                .or_default()
                                .entry(renewed)
                                .or_insert(0.0) += w;
                        }
                        Some(&top) => {
                            for t in &pda.rows[top] {
                                if let PdaAction::PushPair(b, c) = t.action {
                                    let mut grown = stack.clone();
                                    grown.pop();
                                    grown.push(c);
                                    grown.push(b);
                                    *by_size
                                        .entry(grown.len())
                                        .or_default()
                                        .entry(grown)
                                        .or_insert(0.0) += w * t.weight;
                                }
                            }
                        }
                    }
                    *out.entry(stack).or_insert(0.0) += w;
                }
            }
            out
        };
        let params = WalkParams::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        let mut walk = HalfLineWalk::new(params, 24).unwrap();
        let mut layer: BTreeMap<Vec<usize>, f64> =
            BTreeMap::from([(vec![pda.start], 1.0)]);
        for _tick in 1..=16usize {
            let closed = close(layer);
            let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (stack, w) in &closed {
                let Some(&top) = stack.last() else { continue };
                for t in &pda.rows[top] {
                    if let PdaAction::EmitPop(_) = t.action {
                        let mut popped = stack.clone();
                        popped.pop();
                        *next.entry(popped).or_insert(0.0) += w * t.weight;
                    }
                }
            }
            layer = next;
            walk.step();
            let total: f64 = layer.values().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            let mut marginal = vec![0.0; 24];
            for (stack, w) in &layer {
                marginal[height(stack)] += w;
            }
            for (h, &p) in walk.distribution().iter().enumerate() {
                assert_relative_eq!(marginal[h], p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn critical_rate_decays_as_inverse_square_root() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let report = pda
            .postselection_rate(&[8, 16, 32, 64], 20_000, 0xfeed)
            .unwrap();
        assert!(!report.exponential_suspected);
        let fit = report.fit.as_ref().expect("fit should exist");
        assert!(
            fit.exponent > -0.85 && fit.exponent < -0.25,
            "exponent {} outside the diffusive window",
            fit.exponent
        );
        // Wilson intervals bracket the point estimates.
        for (rate, (lo, hi)) in report.rates.iter().zip(&report.intervals) {
            assert!(lo <= rate && rate <= hi);
        }
        assert!(matches!(
            pda.postselection_rate(&[8], 100, 1),
            Err(PdaError::NotEnoughTrials(100))
        ));
    }

    /// Motzkin-style grammar with adjustable up/down/flat weights.
    fn biased_walk_grammar(up: f64, down: f64, flat: f64) -> CnfGrammar {
        // Boundary kept at the uniform choice; bulk moves are the R rules.
        let text = format!(
            "start: S\nS -> 'f' @ 1/3\nS -> U R @ 1/6\nS -> C G @ 1/2\n\
             G -> 'f' @ 1/3\nG -> U R @ 1/6\nG -> C G @ 1/2\n\
             C -> 'f' @ 2/3\nC -> U R @ 1/3\n\
             R -> 'd' @ {down}\nR -> F R @ {flat}\nR -> U T @ {up}\n\
             T -> R R @ 1\nF -> 'f' @ 1\nU -> 'u' @ 1\n"
        );
        CnfGrammar::parse(&text).unwrap()
    }

    #[test]
    fn pinned_rate_saturates_and_escaping_rate_is_flagged_exponential() {
        let pinned = WeightedPda::compile(
            &biased_walk_grammar(0.15, 0.5, 0.35),
            RestartPolicy::Renew,
        );
        let report = pinned.postselection_rate(&[16, 32, 64], 20_000, 0xabc).unwrap();
        assert!(!report.exponential_suspected);
        assert!(
            report.rates[2] > 0.6 * report.rates[0],
            "pinned rates should plateau: {:?}",
            report.rates
        );

        let escaping = WeightedPda::compile(
            &biased_walk_grammar(0.5, 0.15, 0.35),
            RestartPolicy::Renew,
        );
        let report = escaping
            .postselection_rate(&[16, 48, 96, 160], 20_000, 0xdef)
            .unwrap();
        assert!(report.exponential_suspected, "rates: {:?}", report.rates);
    }

    #[test]
    fn bias_schedule_drives_acceptance_and_peaks_midway() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let n = 16usize;
        let schedule = BiasSchedule::PushPop { n_half: n / 2, strength: 4.0 };
        let trials = 10_000usize;
        let runs = run_trials(trials, |i| {
            let mut rng = trial_rng(0x5ced, "schedule", i as u64);
            pda.run_trajectory(64 * n, Some(n), Some(&schedule), &mut rng)
        });
        let accepted = runs.iter().filter(|r| r.accepted()).count();
        let rate = accepted as f64 / trials as f64;
        assert!(rate >= 0.3, "scheduled acceptance too low: {rate}");
        // Mean height profile peaks near n/2.
        let mut mean = vec![0.0; n];
        for run in &runs {
            for (i, &h) in run.stack_sizes.iter().enumerate() {
                mean[i] += h as f64 / trials as f64;
            }
        }
        let peak = (0..n).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
        // stack_sizes[i] is the height after emission i+1.
        let peak_emission = peak + 1;
        assert!(
            (n / 2 - 2..=n / 2 + 2).contains(&peak_emission),
            "profile peaks at {peak_emission}, profile {mean:?}"
        );
        // Unscheduled acceptance at the same length is much lower.
        let plain = pda.postselection_rate(&[n], 10_000, 0x5ced).unwrap();
        assert!(rate > 1.5 * plain.rates[0]);
    }

    #[test]
    fn targeted_sampling_stops_at_the_requested_length() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let schedule = BiasSchedule::PushPop { n_half: 8, strength: 2.0 };
        let mut accepted = 0usize;
        for seed in 0..300u64 {
            let run = pda.sample_emission_to(16, 64 * 16, seed, Some(&schedule));
            assert!(run.emitted.len() <= 16, "ran past the target length");
            if run.accepted() {
                assert_eq!(run.emitted.len(), 16, "accepted at the wrong length");
                accepted += 1;
            }
        }
        assert!(accepted > 0, "targeted sampling never accepted");
    }

    #[test]
    fn schedule_modulation_keeps_rows_stochastic() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let schedule = BiasSchedule::PushPop { n_half: 8, strength: 3.0 };
        for v in 0..pda.rows.len() {
            for emitted in [0usize, 7, 8, 20] {
                let probs =
                    pda.row_probabilities(&pda.rows[v], emitted, Some(&schedule));
                let sum: f64 = probs.iter().sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sampled_motzkin_prefix_heights_never_go_negative() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        for trial in 0..100u64 {
            let run = pda.sample_emission(256, trial, None);
            let mut height = 0i64;
            for c in run.emitted.chars() {
                height += match c {
                    'u' => 1,
                    'd' => -1,
                    _ => 0,
                };
                assert!(height >= 0, "negative prefix height in {}", run.emitted);
            }
        }
    }

    #[test]
    fn renew_acceptance_dominates_halt_acceptance() {
        let halt = motzkin_pda(RestartPolicy::Halt);
        let renew = motzkin_pda(RestartPolicy::Renew);
        for n in [4usize, 6, 8] {
            let (_, halt_total) = halt.acceptance_weights(n).unwrap();
            let (_, renew_total) = renew.acceptance_weights(n).unwrap();
            assert!(renew_total > halt_total);
            // Same support either way: any complete derivation is also a
            // single-piece renewal run.
            let hs = halt.exact_superposition(n).unwrap();
            let rs = renew.exact_superposition(n).unwrap();
            assert_eq!(hs.support_size(), rs.support_size());
        }
    }

    #[test]
    fn ambiguous_emissions_interfere_constructively() {
        // Two distinct stack trajectories emit "ab": S → A B and S → C B
        // with A and C both emitting 'a'. Classically their weights add
        // to 1; coherently their amplitudes √½ + √½ add, so the squared
        // norm of the unnormalized superposition is 2.
        let g = CnfGrammar::parse(
            "start: S\nS -> A B @ 0.5\nS -> C B @ 0.5\nA -> a @ 1\nC -> a @ 1\nB -> b @ 1\n",
        )
        .unwrap();
        let pda = WeightedPda::compile(&g, RestartPolicy::Halt);
        let (weights, classical) = pda.acceptance_weights(2).unwrap();
        assert_relative_eq!(weights["ab"], 1.0, epsilon = 1e-14);
        assert_relative_eq!(classical, 1.0, epsilon = 1e-14);
        let exact = pda.exact_superposition(2).unwrap();
        assert_eq!(exact.support_size(), 1);
        assert_relative_eq!(exact.success_probability(), 2.0, epsilon = 1e-12);
        // The trace-preserving channel reproduces the interference after
        // the uniform contraction.
        let built = pda.to_channel(2).unwrap();
        let via = built.channel.sequential_generate(built.start, 2, built.empty).unwrap();
        assert!(exact.fidelity(&via) >= 1.0 - 1e-12);
        assert_relative_eq!(
            via.success_probability(),
            2.0 * built.contraction.powi(-4),
            max_relative = 1e-10
        );
    }

    #[test]
    fn channel_truncation_routes_overflow_to_junk() {
        let pda = motzkin_pda(RestartPolicy::Renew);
        let built = pda.to_channel(6).unwrap();
        assert!(built.contraction >= 1.0);
        // Run longer than the truncation: mass decays into the junk
        // sector but the trace stays exactly one.
        let mut rho =
            crate::channel::density::basis_state(built.channel.dim(), built.start).unwrap();
        for _ in 0..12 {
            rho = built.channel.apply(&rho);
        }
        let trace: f64 = (0..built.channel.dim()).map(|i| rho[(i, i)].re).sum();
        assert_relative_eq!(trace, 1.0, epsilon = 1e-12);
        let junk: f64 = (built.junk_start..built.channel.dim())
            .map(|i| rho[(i, i)].re)
            .sum();
        assert!(junk > 0.5, "junk mass {junk}");
    }
}
