//! Ladder-lattice conveyor emitters.
//!
//! The sequential stack generators in [`crate::motzkin`] and [`crate::pda`]
//! radiate one symbol per tick from a single site. This module rebuilds
//! them as *local* lattice dynamics: a narrow ladder whose lower leg is a
//! conveyor of injected particles drifting right one column per cycle, and
//! whose upper leg(s) carry the stack, delimited by a cursor marker. A
//! shallow brick of gates applied where the cursor sits converts each
//! fresh particle into one generator move and writes the move's symbol on
//! the particle, which then outruns the cursor and is harvested at the far
//! end. Post-selecting on the cursor having returned to the wall leaves
//! the same radiated state the abstract generator produces, while every
//! gate touches O(1) sites and the active region stays as narrow as the
//! cursor's excursion.
//!
//! Two constructions share the geometry:
//!
//! * the **two-leg ladder** carries a colored Motzkin trail (colors 1, 2
//!   left of the cursor, zeros to its right) and realizes a
//!   [`MotzkinEnsemble`]; its downward triangle gate branches into
//!   pop / stay / push with the square roots of the move weights;
//! * the **three-leg ladder** carries an arbitrary weighted CNF stack and
//!   realizes the corresponding pushdown generator: each cycle substitutes
//!   the head variable in superposition, emits terminals through a
//!   transient `X` marker that swaps the terminal onto the particle
//!   beneath the cursor, and restores the cursor in a direction read off
//!   the lower leg.
//!
//! Particles are injected two cycles apart. That spacing is what makes the
//! dynamics Markovian: after a pop the consumed particle ends up two
//! columns ahead of the cursor and the trailing one arrives exactly when
//! the cursor is ready again; after a stay or a push the next triangle
//! sees either no particle or an already-marked one and acts as the
//! identity. [`markovianity_audit`] checks this single-interaction
//! contract on recorded classical trajectories.
//!
//! The two-leg gates are honest isometries — distinct inputs keep
//! distinct outputs because the moved color rides out on the particle. A
//! general grammar loses that property whenever two variables share a rule
//! body, so the three-leg substitution carries the same uniform
//! contraction the pushdown channel compiler uses
//! ([`substitution_contraction`]): amplitudes shrink by a constant factor
//! per engaged step, the deficit leaks into junk modes, and post-selection
//! returns the exact superposition with a success probability rescaled by
//! a known power of the contraction.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::RngExt;
use thiserror::Error;

use crate::channel::RadiatedState;
use crate::grammar::{CnfGrammar, RuleBody};
use crate::motzkin::MotzkinEnsemble;
use crate::pda::RestartPolicy;
use crate::rng::trial_rng;

/// Every layer is an isometry on the kept branches once junk leakage is
/// accounted for, so squared norm plus pruned plus discarded mass must
/// stay at one to within this tolerance — and the leakage itself must
/// never be negative.
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ConveyorError {
    #[error("the two-leg ladder carries at most 2 colors, the ensemble has {s}")]
    TooManyColors { s: usize },
    #[error("emission count must be positive")]
    ZeroLength,
    #[error("width {width} is below the minimum {minimum} for this run")]
    WidthTooSmall { width: usize, minimum: usize },
    #[error("triangle at column {position} overlaps a cursor (width {width})")]
    Geometry { position: usize, width: usize },
    #[error("cursor reached column {head} with no room left to act (width {width})")]
    WidthExhausted { head: usize, width: usize },
    #[error("global norm drifted to {norm}")]
    NormDrift { norm: f64 },
    #[error("X marker persisted past the reset step at column {column}")]
    XPersisted { column: usize },
    #[error("particle {particle} took part in {gates} nontrivial gates")]
    AuditFailure { particle: usize, gates: usize },
    #[error("particle {particle} broke the post-move geometry at cycle {cycle}")]
    CaseViolation { particle: usize, cycle: usize },
    #[error("post-selection removed every branch at length {n}")]
    NoAcceptedBranch { n: usize },
    #[error("run exceeded the cycle cap of {cap}")]
    CycleOverrun { cap: usize },
}

/// One classical configuration of the two-leg ladder.
///
/// The upper leg is stored as the trail of push colors left of the cursor;
/// the cursor column equals `trail.len()` and everything to its right is
/// zero. `belt[c]` is the lower-leg cell at column `c`: `None` inert,
/// `Some(0)` a fresh particle, `Some(k)` a particle carrying a move
/// (pops write the popped color `+k`, pushes write `-k`, stays leave `0`).
/// `harvested` lists extracted particles in injection order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TwoLegConfig {
    pub trail: Vec<u8>,
    pub belt: Vec<Option<i8>>,
    pub harvested: Vec<i8>,
}

impl TwoLegConfig {
    /// Cursor column: the boundary between the trail and the zeros.
    pub fn head(&self) -> usize {
        self.trail.len()
    }
}

/// Sparse superposition over two-leg configurations. Amplitudes are kept
/// real: every gate amplitude is the square root of a move weight.
#[derive(Debug, Clone)]
pub struct BranchState {
    width: usize,
    configs: BTreeMap<TwoLegConfig, f64>,
}

impl BranchState {
    /// The vacuum: empty trail, inert belt, nothing harvested.
    pub fn vacuum(width: usize) -> Self {
        let cfg = TwoLegConfig {
            trail: Vec::new(),
            belt: vec![None; width],
            harvested: Vec::new(),
        };
        let mut configs = BTreeMap::new();
        configs.insert(cfg, 1.0);
        Self { width, configs }
    }

    /// A state concentrated on one configuration (amplitude 1). The belt
    /// must already have the requested width.
    pub fn concentrated(cfg: TwoLegConfig) -> Self {
        let width = cfg.belt.len();
        let mut configs = BTreeMap::new();
        configs.insert(cfg, 1.0);
        Self { width, configs }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn configs(&self) -> impl Iterator<Item = (&TwoLegConfig, f64)> {
        self.configs.iter().map(|(c, &a)| (c, a))
    }

    pub fn norm_sq(&self) -> f64 {
        self.configs.values().map(|a| a * a).sum()
    }

    fn add(&mut self, cfg: TwoLegConfig, amp: f64) {
        *self.configs.entry(cfg).or_insert(0.0) += amp;
    }
}

/// Branch targets of the nontrivial triangle block at the cursor, with
/// their amplitude factors. At the wall (cursor at column zero) the pop is
/// absent and the boundary push weight is shared among the colors.
fn gate_branches(cfg: &TwoLegConfig, ensemble: &MotzkinEnsemble) -> Vec<(TwoLegConfig, f64)> {
    let (w_up, w_down, w_flat, w_boundary) = ensemble.weights();
    let s = ensemble.colors();
    let pos = cfg.head();
    let (stay_w, push_w) = if pos == 0 {
        (1.0 - w_boundary, w_boundary / s as f64)
    } else {
        (w_flat, w_up)
    };
    let mut out = Vec::with_capacity(s + 2);
    if pos > 0 && w_down > 0.0 {
        let mut child = cfg.clone();
        let color = child.trail.pop().expect("nonempty trail above the wall");
        child.belt[pos] = Some(color as i8);
        out.push((child, w_down.sqrt()));
    }
    if stay_w > 0.0 {
        out.push((cfg.clone(), stay_w.sqrt()));
    }
    if push_w > 0.0 {
        for color in 1..=s as u8 {
            let mut child = cfg.clone();
            child.trail.push(color);
            child.belt[pos] = Some(-(color as i8));
            out.push((child, push_w.sqrt()));
        }
    }
    out
}

/// Apply the downward triangle gate whose upper sites span columns
/// `position-1 ..= position+1` (the wall variant at `position == 0`) and
/// whose lower site is the conveyor cell at `position`.
///
/// The gate is the identity unless the cursor sits exactly at `position`
/// with a fresh particle beneath it; then it branches into pop / stay /
/// pushes with the square roots of the ensemble's move weights, writing
/// the move on the particle. Applying the gates of one cycle in any column
/// order gives the same state: a move leaves no fresh particle where a
/// later triangle of the same cycle could re-engage the branch.
pub fn triangle_gate(
    state: &BranchState,
    ensemble: &MotzkinEnsemble,
    position: usize,
) -> Result<BranchState, ConveyorError> {
    if ensemble.colors() > 2 {
        return Err(ConveyorError::TooManyColors { s: ensemble.colors() });
    }
    // The triangle needs its right upper site, and must keep clear of the
    // extraction cursor in the last column.
    if position + 2 >= state.width {
        return Err(ConveyorError::Geometry { position, width: state.width });
    }
    let mut out = BranchState { width: state.width, configs: BTreeMap::new() };
    for (cfg, amp) in state.configs() {
        if cfg.head() == position && cfg.belt[position] == Some(0) {
            for (child, factor) in gate_branches(cfg, ensemble) {
                out.add(child, amp * factor);
            }
        } else {
            out.add(cfg.clone(), amp);
        }
    }
    Ok(out)
}

/// One cycle's worth of triangles in a single pass: each branch engages at
/// most the triangle under its own cursor, so sweeping every column is
/// equivalent (see [`triangle_gate`]) and this avoids rebuilding the map
/// once per column.
fn apply_cursor_triangles(
    state: &BranchState,
    ensemble: &MotzkinEnsemble,
) -> Result<BranchState, ConveyorError> {
    let mut out = BranchState { width: state.width, configs: BTreeMap::new() };
    for (cfg, amp) in state.configs() {
        let pos = cfg.head();
        if pos + 2 >= state.width {
            return Err(ConveyorError::WidthExhausted { head: pos, width: state.width });
        }
        if cfg.belt[pos] == Some(0) {
            for (child, factor) in gate_branches(cfg, ensemble) {
                out.add(child, amp * factor);
            }
        } else {
            out.add(cfg.clone(), amp);
        }
    }
    Ok(out)
}

/// Shift every conveyor particle one column right. A particle on the
/// extraction cursor (the last column) moves to the harvested register
/// instead of shifting.
pub fn advect(state: &BranchState) -> BranchState {
    let width = state.width;
    let mut out = BranchState { width, configs: BTreeMap::new() };
    for (cfg, amp) in state.configs() {
        let mut child = cfg.clone();
        if let Some(sym) = child.belt[width - 1] {
            child.harvested.push(sym);
        }
        for c in (1..width).rev() {
            child.belt[c] = child.belt[c - 1];
        }
        child.belt[0] = None;
        out.add(child, amp);
    }
    out
}

/// Per-cycle gate accounting. `nontrivial_gates` counts the gate
/// applications whose support touches non-inert cells: one triangle per
/// column of the active span plus one transport gate per particle in
/// flight. `active_width` is the span itself — from the wall to the
/// rightmost of cursor and particles.
#[derive(Debug, Clone, Copy)]
pub struct GateStatRow {
    pub t: usize,
    pub nontrivial_gates: usize,
    pub active_width: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GateStats {
    pub rows: Vec<GateStatRow>,
}

impl GateStats {
    pub fn cycles(&self) -> usize {
        self.rows.len()
    }

    pub fn total_gates(&self) -> usize {
        self.rows.iter().map(|r| r.nontrivial_gates).sum()
    }

    pub fn mean_gates_per_cycle(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.total_gates() as f64 / self.rows.len() as f64
    }
}

/// Width that accommodates an `n`-move run: three standard deviations of
/// the critical cursor excursion plus margin, and room for every trail
/// that can still return to the wall (height at most `n/2`).
pub fn suggested_width(n_emit: usize) -> usize {
    let excursion = (3.0 * (n_emit as f64).sqrt()).ceil() as usize + 6;
    excursion.max(n_emit / 2 + 4)
}

fn inject(state: &BranchState) -> BranchState {
    let mut out = BranchState { width: state.width, configs: BTreeMap::new() };
    for (cfg, amp) in state.configs() {
        assert!(cfg.belt[0].is_none(), "injection column occupied");
        let mut child = cfg.clone();
        child.belt[0] = Some(0);
        out.add(child, amp);
    }
    out
}

/// Moves made so far in one branch: harvested particles plus belt
/// particles that already met the cursor — marked ones anywhere, fresh
/// ones at or beyond the cursor column (a stay leaves its particle
/// unmarked but strands it where the cursor can no longer catch it).
fn moves_made(cfg: &TwoLegConfig) -> usize {
    let e = cfg.head();
    let consumed = cfg
        .belt
        .iter()
        .enumerate()
        .filter(|(c, cell)| match cell {
            Some(0) => *c >= e,
            Some(_) => true,
            None => false,
        })
        .count();
    cfg.harvested.len() + consumed
}

/// Drop branches whose trail can no longer return to the wall within the
/// remaining moves; their post-selected amplitude is exactly zero, so the
/// accepted state is untouched. Returns the removed squared mass.
fn prune_two_leg(state: &mut BranchState, n_emit: usize) -> f64 {
    let mut removed = 0.0;
    state.configs.retain(|cfg, amp| {
        let keep = cfg.trail.len() + moves_made(cfg) <= n_emit;
        if !keep {
            removed += *amp * *amp;
        }
        keep
    });
    removed
}

fn two_leg_stat_row<'a, I>(t: usize, configs: I) -> GateStatRow
where
    I: Iterator<Item = &'a TwoLegConfig>,
{
    let mut gates = 0;
    let mut span = 0;
    for cfg in configs {
        let right = cfg
            .belt
            .iter()
            .rposition(|c| c.is_some())
            .map(|p| p + 1)
            .unwrap_or(0);
        let w = right.max(cfg.head() + 1);
        let particles = cfg.belt.iter().filter(|c| c.is_some()).count();
        gates = gates.max(w + particles);
        span = span.max(w);
    }
    GateStatRow { t, nontrivial_gates: gates, active_width: span }
}

/// Run the two-leg ladder until `n_emit` particles have been injected,
/// converted and harvested, then post-select on the cursor having returned
/// to the wall with an empty trail.
///
/// The returned state lives on the harvested register (conveyor symbol
/// convention: pops radiate `+k`, pushes `-k`, stays `0`); its success
/// probability equals the ensemble's wall-return weight at `n_emit`.
/// Branch amplitudes are exact square roots of walk path weights, so the
/// state matches the ensemble's radiated state bit for bit up to float
/// roundoff.
pub fn run_two_leg(
    ensemble: &MotzkinEnsemble,
    n_emit: usize,
    width: usize,
) -> Result<(RadiatedState, GateStats), ConveyorError> {
    if ensemble.colors() > 2 {
        return Err(ConveyorError::TooManyColors { s: ensemble.colors() });
    }
    if n_emit == 0 {
        return Err(ConveyorError::ZeroLength);
    }
    let minimum = suggested_width(n_emit);
    if width < minimum {
        return Err(ConveyorError::WidthTooSmall { width, minimum });
    }
    let mut state = BranchState::vacuum(width);
    let mut injected = 0usize;
    let mut pruned = 0.0;
    let mut rows = Vec::new();
    let cap = 2 * n_emit + 2 * width + 16;
    let mut done = false;
    for t in 0..cap {
        if t % 2 == 0 && injected < n_emit {
            state = inject(&state);
            injected += 1;
        }
        state = apply_cursor_triangles(&state, ensemble)?;
        pruned += prune_two_leg(&mut state, n_emit);
        let norm = state.norm_sq() + pruned;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(ConveyorError::NormDrift { norm });
        }
        rows.push(two_leg_stat_row(t, state.configs.keys()));
        state = advect(&state);
        if injected == n_emit && state.configs.keys().all(|c| c.belt.iter().all(Option::is_none)) {
            done = true;
            break;
        }
    }
    if !done {
        return Err(ConveyorError::CycleOverrun { cap });
    }
    let mut amps: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    let mut success = 0.0;
    for (cfg, amp) in state.configs() {
        if cfg.trail.is_empty() && cfg.harvested.len() == n_emit {
            success += amp * amp;
            let string: Vec<i64> = cfg.harvested.iter().map(|&v| v as i64).collect();
            *amps.entry(string).or_insert(Complex64::new(0.0, 0.0)) +=
                Complex64::new(amp, 0.0);
        }
    }
    if amps.is_empty() {
        return Err(ConveyorError::NoAcceptedBranch { n: n_emit });
    }
    let norm = success.sqrt();
    for a in amps.values_mut() {
        *a /= norm;
    }
    Ok((
        RadiatedState::from_amplitudes(n_emit, amps, success),
        GateStats { rows },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveCase {
    Pop,
    Stay,
    Push,
}

/// One nontrivial gate in a sampled run: which particle was converted,
/// when, how, and where the cursor stood.
#[derive(Debug, Clone, Copy)]
pub struct ParticleEvent {
    pub particle: usize,
    pub cycle: usize,
    pub case: MoveCase,
    pub cursor_before: usize,
}

/// A sampled classical trajectory of the two-leg ladder.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub n_emit: usize,
    pub width: usize,
    /// Radiated symbols in move order (pops `+k`, pushes `-k`, stays `0`).
    pub moves: Vec<i8>,
    /// Cursor column at the start of every cycle, plus one final entry.
    pub cursor_path: Vec<usize>,
    pub events: Vec<ParticleEvent>,
    pub cycles: usize,
}

/// Sample one classical trajectory of the two-leg ladder: the same
/// geometry as [`run_two_leg`], but each engaged triangle draws a single
/// move from the ensemble weights instead of branching. Deterministic per
/// seed. The width only needs to cover the sampled cursor excursion
/// (escaping-biased weights will exhaust it and error).
pub fn sample_two_leg(
    ensemble: &MotzkinEnsemble,
    n_emit: usize,
    width: usize,
    seed: u64,
) -> Result<(TrajectoryRecord, GateStats), ConveyorError> {
    if ensemble.colors() > 2 {
        return Err(ConveyorError::TooManyColors { s: ensemble.colors() });
    }
    if n_emit == 0 {
        return Err(ConveyorError::ZeroLength);
    }
    let minimum = 8;
    if width < minimum {
        return Err(ConveyorError::WidthTooSmall { width, minimum });
    }
    let (w_up, w_down, w_flat, w_boundary) = ensemble.weights();
    let s = ensemble.colors();
    let mut rng = trial_rng(seed, "two-leg-trajectory", 0);
    let mut trail: Vec<u8> = Vec::new();
    let mut belt: Vec<Option<(usize, i8)>> = vec![None; width];
    let mut harvested = 0usize;
    let mut injected = 0usize;
    let mut moves = Vec::with_capacity(n_emit);
    let mut cursor_path = Vec::new();
    let mut events = Vec::new();
    let mut rows = Vec::new();
    let cap = 3 * n_emit + 3 * width + 16;
    let mut cycles = None;
    for t in 0..cap {
        cursor_path.push(trail.len());
        if t % 2 == 0 && injected < n_emit {
            assert!(belt[0].is_none(), "injection column occupied");
            belt[0] = Some((injected, 0));
            injected += 1;
        }
        let pos = trail.len();
        if pos + 2 >= width {
            return Err(ConveyorError::WidthExhausted { head: pos, width });
        }
        if let Some((id, 0)) = belt[pos] {
            let (stay_w, push_w) = if pos == 0 {
                (1.0 - w_boundary, w_boundary / s as f64)
            } else {
                (w_flat, w_up)
            };
            let mut u: f64 = rng.random();
            let mut case = None;
            if pos > 0 {
                if u < w_down {
                    case = Some(MoveCase::Pop);
                }
                u -= w_down;
            }
            if case.is_none() {
                if u < stay_w {
                    case = Some(MoveCase::Stay);
                } else {
                    u -= stay_w;
                }
            }
            let case = case.unwrap_or(MoveCase::Push);
            match case {
                MoveCase::Pop => {
                    let color = trail.pop().expect("nonempty trail above the wall");
                    belt[pos] = Some((id, color as i8));
                    moves.push(color as i8);
                }
                MoveCase::Stay => {
                    moves.push(0);
                }
                MoveCase::Push => {
                    let color = 1 + ((u / push_w) as usize).min(s - 1) as u8;
                    trail.push(color);
                    belt[pos] = Some((id, -(color as i8)));
                    moves.push(-(color as i8));
                }
            }
            events.push(ParticleEvent { particle: id, cycle: t, case, cursor_before: pos });
        }
        rows.push(sampled_stat_row(t, &trail, &belt));
        if let Some((id, _)) = belt[width - 1] {
            assert_eq!(id, harvested, "extraction out of injection order");
            harvested += 1;
        }
        for c in (1..width).rev() {
            belt[c] = belt[c - 1];
        }
        belt[0] = None;
        if injected == n_emit && harvested == n_emit {
            cursor_path.push(trail.len());
            cycles = Some(t + 1);
            break;
        }
    }
    let cycles = cycles.ok_or(ConveyorError::CycleOverrun { cap })?;
    Ok((
        TrajectoryRecord { n_emit, width, moves, cursor_path, events, cycles },
        GateStats { rows },
    ))
}

fn sampled_stat_row(t: usize, trail: &[u8], belt: &[Option<(usize, i8)>]) -> GateStatRow {
    let right = belt
        .iter()
        .rposition(|c| c.is_some())
        .map(|p| p + 1)
        .unwrap_or(0);
    let span = right.max(trail.len() + 1);
    let particles = belt.iter().filter(|c| c.is_some()).count();
    GateStatRow { t, nontrivial_gates: span + particles, active_width: span }
}

/// Outcome of [`markovianity_audit`]: how many particles were converted by
/// each move case, and the largest number of nontrivial gates any single
/// particle took part in (always 1 on a clean record).
#[derive(Debug, Clone, Copy)]
pub struct MarkovianityReport {
    pub particles: usize,
    pub pops: usize,
    pub stays: usize,
    pub pushes: usize,
    pub max_gates_per_particle: usize,
}

/// Check the single-interaction contract on a recorded trajectory.
///
/// Every injected particle must take part in exactly one nontrivial
/// triangle, and the post-move geometry must keep it out of reach of the
/// following cycles: after a pop the particle sits two columns ahead of
/// the receded cursor; after a stay it sits one ahead of the unmoved
/// cursor (the next triangle sees the cursor with nothing beneath it);
/// after a push it sits beneath the advanced cursor but already marked.
/// Particle positions are reconstructed from the injection schedule
/// (particle `j` enters column 0 at cycle `2j` and advects one column per
/// cycle), so a doctored record cannot pass by editing positions alone.
pub fn markovianity_audit(record: &TrajectoryRecord) -> Result<MarkovianityReport, ConveyorError> {
    let mut per_particle = vec![0usize; record.n_emit];
    let mut pops = 0;
    let mut stays = 0;
    let mut pushes = 0;
    for ev in &record.events {
        if ev.particle >= record.n_emit {
            return Err(ConveyorError::CaseViolation { particle: ev.particle, cycle: ev.cycle });
        }
        per_particle[ev.particle] += 1;
        if ev.cycle + 1 >= record.cursor_path.len() || ev.cycle < 2 * ev.particle {
            return Err(ConveyorError::CaseViolation { particle: ev.particle, cycle: ev.cycle });
        }
        let pos_next = ev.cycle + 1 - 2 * ev.particle;
        let e_next = record.cursor_path[ev.cycle + 1];
        let ok = match ev.case {
            MoveCase::Pop => {
                pops += 1;
                ev.cursor_before >= 1
                    && e_next == ev.cursor_before - 1
                    && pos_next == e_next + 2
            }
            MoveCase::Stay => {
                stays += 1;
                e_next == ev.cursor_before && pos_next == e_next + 1
            }
            MoveCase::Push => {
                pushes += 1;
                e_next == ev.cursor_before + 1 && pos_next == e_next
            }
        };
        if !ok {
            return Err(ConveyorError::CaseViolation { particle: ev.particle, cycle: ev.cycle });
        }
    }
    let mut max_gates = 0;
    for (particle, &gates) in per_particle.iter().enumerate() {
        if gates != 1 {
            return Err(ConveyorError::AuditFailure { particle, gates });
        }
        max_gates = max_gates.max(gates);
    }
    Ok(MarkovianityReport {
        particles: record.n_emit,
        pops,
        stays,
        pushes,
        max_gates_per_particle: max_gates,
    })
}

// ---------------------------------------------------------------------------
// Three-leg ladder: the general weighted-CNF stack.
// ---------------------------------------------------------------------------

/// Contraction applied to every engaged substitution of the three-leg
/// ladder. When several variables share a rule body (motzkin-style
/// grammars renew through a twin of the start symbol), the ideal
/// substitution maps distinct head cells onto the same output
/// configuration; those branches must interfere, so the map cannot be an
/// isometry as it stands. Dividing every engaged amplitude by `c` and
/// letting the rank deficit leak into discarded junk modes makes the
/// dilated layer exactly isometric. `c²` is the Gershgorin row bound on
/// the Gram matrix of the ideal substitution columns (an upper bound on
/// its largest eigenvalue), so the leak is never negative.
///
/// Every accepted branch makes exactly `2·N − 1` engaged steps for `N`
/// emissions — the stack walk starts at height 1, ends at 0, and each
/// step moves it by one — so the contraction rescales all accepted
/// amplitudes uniformly: the normalized post-selected state is exact and
/// the raw success probability carries a factor `c^(−2·(2N−1))`.
pub fn substitution_contraction(grammar: &CnfGrammar) -> f64 {
    let nv = grammar.n_variables();
    let mut by_body: BTreeMap<(u8, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for rule in grammar.rules() {
        let key = match rule.body {
            RuleBody::Pair(first, second) => (0u8, first, second),
            RuleBody::Terminal(c) => {
                let t = grammar
                    .terminals()
                    .iter()
                    .position(|&x| x == c)
                    .expect("terminal indexed by the grammar");
                (1u8, t, 0)
            }
        };
        by_body.entry(key).or_default().push((rule.lhs, rule.weight.sqrt()));
    }
    let mut gram = vec![vec![0.0f64; nv]; nv];
    for sources in by_body.values() {
        for &(v, a) in sources {
            for &(w, b) in sources {
                gram[v][w] += a * b;
            }
        }
    }
    let bound = gram
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(1.0f64, f64::max);
    bound.sqrt()
}

/// Middle-leg cell encoding: empty, the transient emission marker, then
/// variables, then terminals.
const EMPTY: u16 = 0;
const XMARK: u16 = 1;

fn var_cell(v: usize) -> u16 {
    2 + v as u16
}

fn term_cell(n_vars: usize, t: usize) -> u16 {
    2 + (n_vars + t) as u16
}

/// One classical configuration of the three-leg ladder. The middle leg
/// holds the occupied stack cells (bottom first); the cursor column equals
/// `stack.len()`. Belt cells: `Some(0)` fresh, `Some(1 + t)` a particle
/// marked with terminal index `t`. `harvested` keeps marked particles only
/// — unmarked ones are discarded at extraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ThreeLegConfig {
    stack: Vec<u16>,
    belt: Vec<Option<i8>>,
    harvested: Vec<i8>,
}

struct ThreeLegRun<'a> {
    grammar: &'a CnfGrammar,
    policy: RestartPolicy,
    n_emit: usize,
    width: usize,
    terminal_of: BTreeMap<char, usize>,
    /// See [`substitution_contraction`]; applied to every engaged
    /// substitution (rules and renewals alike) so the leak into junk
    /// modes keeps the layer isometric and uniform across branches.
    contraction: f64,
}

impl ThreeLegRun<'_> {
    /// Step 1: superposed substitution at the stack head, controlled on a
    /// fresh particle beneath the cursor. Pair rules write the second
    /// variable into the head cell and the first on top of it (the first
    /// is derived first); terminal rules write the terminal into the head
    /// cell and raise the `X` marker above it. On an empty stack the renew
    /// variant pushes the start variable; the halting variant does nothing
    /// and lets the particle stream past.
    fn substitute(
        &self,
        configs: BTreeMap<ThreeLegConfig, f64>,
    ) -> Result<BTreeMap<ThreeLegConfig, f64>, ConveyorError> {
        let mut out: BTreeMap<ThreeLegConfig, f64> = BTreeMap::new();
        for (cfg, amp) in configs {
            let e = cfg.stack.len();
            if e + 2 >= self.width {
                return Err(ConveyorError::WidthExhausted { head: e, width: self.width });
            }
            let engaged = cfg.belt[e] == Some(0);
            if !engaged {
                *out.entry(cfg).or_insert(0.0) += amp;
                continue;
            }
            if cfg.stack.is_empty() {
                match self.policy {
                    RestartPolicy::Renew => {
                        let mut child = cfg.clone();
                        child.stack.push(var_cell(self.grammar.start()));
                        *out.entry(child).or_insert(0.0) += amp / self.contraction;
                    }
                    RestartPolicy::Halt => {
                        // No gate fires: the particle streams past the idle
                        // machine, so no contraction applies.
                        *out.entry(cfg).or_insert(0.0) += amp;
                    }
                }
                continue;
            }
            let head = cfg.stack[e - 1];
            let nv = self.grammar.n_variables();
            assert!(
                (2..2 + nv as u16).contains(&head),
                "stack head is not a variable between cycles"
            );
            let v = (head - 2) as usize;
            for rule in self.grammar.rules_for(v) {
                let mut child = cfg.clone();
                match rule.body {
                    RuleBody::Pair(first, second) => {
                        child.stack[e - 1] = var_cell(second);
                        child.stack.push(var_cell(first));
                    }
                    RuleBody::Terminal(c) => {
                        let t = self.terminal_of[&c];
                        child.stack[e - 1] = term_cell(nv, t);
                        child.stack.push(XMARK);
                    }
                }
                *out.entry(child).or_insert(0.0) +=
                    amp * rule.weight.sqrt() / self.contraction;
            }
        }
        Ok(out)
    }

    /// Steps 2 and 3: where the `X` marker was raised, swap the terminal
    /// beneath it onto the fresh particle under the cursor, then clear the
    /// marker so the two freed cells rejoin the unoccupied side. Any `X`
    /// surviving this step is a broken cycle.
    fn emit_and_reset(
        &self,
        configs: BTreeMap<ThreeLegConfig, f64>,
    ) -> Result<BTreeMap<ThreeLegConfig, f64>, ConveyorError> {
        let nv = self.grammar.n_variables();
        let mut out: BTreeMap<ThreeLegConfig, f64> = BTreeMap::new();
        for (mut cfg, amp) in configs {
            if cfg.stack.last() == Some(&XMARK) {
                let len = cfg.stack.len();
                assert!(len >= 2, "marker with no terminal beneath");
                let cell = cfg.stack[len - 2];
                assert!(cell >= 2 + nv as u16, "marker above a non-terminal");
                let t = (cell - 2) as usize - nv;
                // Step 2: the particle sits at the pre-substitution head
                // column, one left of the marker's own column.
                let col = len - 1;
                assert_eq!(cfg.belt[col], Some(0), "marker with no particle to swap");
                cfg.belt[col] = Some(1 + t as i8);
                cfg.stack[len - 2] = EMPTY;
                // Step 3: clear the marker; both cells are unoccupied
                // again, which recedes the cursor by one net cell.
                cfg.stack.truncate(len - 2);
            }
            if let Some(column) = cfg.stack.iter().position(|&c| c == XMARK) {
                return Err(ConveyorError::XPersisted { column });
            }
            *out.entry(cfg).or_insert(0.0) += amp;
        }
        Ok(out)
    }

    /// Step 4: the cursor restoration is implicit — the cursor column *is*
    /// the occupied length, which grew by one on a pair substitution and
    /// receded by one on an emission, exactly the direction the lower leg
    /// dictates (fresh particle still beneath the cursor vs marked one).
    /// Then the conveyor shifts; marked particles on the extraction cursor
    /// are harvested, unmarked ones are discarded.
    fn advect(&self, configs: BTreeMap<ThreeLegConfig, f64>) -> BTreeMap<ThreeLegConfig, f64> {
        let mut out: BTreeMap<ThreeLegConfig, f64> = BTreeMap::new();
        for (cfg, amp) in configs {
            let mut child = cfg;
            if let Some(sym) = child.belt[self.width - 1] {
                if sym > 0 {
                    child.harvested.push(sym - 1);
                }
            }
            for c in (1..self.width).rev() {
                child.belt[c] = child.belt[c - 1];
            }
            child.belt[0] = None;
            *out.entry(child).or_insert(0.0) += amp;
        }
        out
    }

    /// Emissions already fixed in one branch: harvested plus marked
    /// particles still in flight.
    fn emitted(&self, cfg: &ThreeLegConfig) -> usize {
        cfg.harvested.len()
            + cfg
                .belt
                .iter()
                .filter(|cell| matches!(cell, Some(v) if *v > 0))
                .count()
    }

    /// Drop branches whose stack cannot finish within the remaining
    /// emissions (every variable must still yield its minimum). Exact:
    /// such branches post-select to nothing.
    fn prune(&self, configs: &mut BTreeMap<ThreeLegConfig, f64>) -> f64 {
        let mut removed = 0.0;
        let nv = self.grammar.n_variables();
        configs.retain(|cfg, amp| {
            let emitted = self.emitted(cfg);
            let needed: usize = cfg
                .stack
                .iter()
                .map(|&cell| {
                    debug_assert!((2..2 + nv as u16).contains(&cell));
                    self.grammar.min_yield((cell - 2) as usize)
                })
                .sum();
            let keep = emitted + needed <= self.n_emit;
            if !keep {
                removed += *amp * *amp;
            }
            keep
        });
        removed
    }

    fn stat_row(&self, t: usize, configs: &BTreeMap<ThreeLegConfig, f64>) -> GateStatRow {
        let mut gates = 0;
        let mut span = 0;
        for cfg in configs.keys() {
            let right = cfg
                .belt
                .iter()
                .rposition(|c| c.is_some())
                .map(|p| p + 1)
                .unwrap_or(0);
            let w = right.max(cfg.stack.len() + 1);
            let particles = cfg.belt.iter().filter(|c| c.is_some()).count();
            gates = gates.max(w + particles);
            span = span.max(w);
        }
        GateStatRow { t, nontrivial_gates: gates, active_width: span }
    }
}

/// Run the three-leg ladder for a weighted CNF grammar: inject `n_emit`
/// particles two cycles apart and drive the
/// substitute / emit / reset / restore cycle until every branch has
/// finished and drained, then post-select on an empty stack with exactly
/// `n_emit` harvested terminals.
///
/// The harvested strings use the grammar's terminal indices, so the state
/// is directly comparable with the pushdown generator's exact
/// superposition — including the constructive interference between
/// distinct derivations of one string, which end in identical ladder
/// configurations because particle positions depend only on the injection
/// schedule.
///
/// Every engaged substitution carries the grammar's
/// [`substitution_contraction`] factor `1/c`, the same device the pushdown
/// channel compiler uses: colliding rule bodies make the ideal layer
/// non-isometric, and the uniform contraction (with its implicit junk
/// leak) restores isometry without touching relative amplitudes. Accepted
/// branches engage exactly `2·n_emit − 1` times, so the returned state is
/// exactly the pushdown superposition while its success probability is the
/// pushdown's times `c^(−2·(2·n_emit − 1))`.
pub fn run_three_leg(
    grammar: &CnfGrammar,
    policy: RestartPolicy,
    n_emit: usize,
    width: usize,
) -> Result<(RadiatedState, GateStats), ConveyorError> {
    if n_emit == 0 {
        return Err(ConveyorError::ZeroLength);
    }
    let minimum = n_emit + 4;
    if width < minimum {
        return Err(ConveyorError::WidthTooSmall { width, minimum });
    }
    let run = ThreeLegRun {
        grammar,
        policy,
        n_emit,
        width,
        terminal_of: grammar
            .terminals()
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect(),
        contraction: substitution_contraction(grammar),
    };
    let mut configs: BTreeMap<ThreeLegConfig, f64> = BTreeMap::new();
    configs.insert(
        ThreeLegConfig {
            stack: vec![var_cell(grammar.start())],
            belt: vec![None; width],
            harvested: Vec::new(),
        },
        1.0,
    );
    let mut injected = 0usize;
    let mut pruned = 0.0;
    let mut discarded = 0.0;
    let mut rows = Vec::new();
    let cap = 6 * n_emit + 2 * width + 16;
    let mut done = false;
    for t in 0..cap {
        if t % 2 == 0 && injected < n_emit {
            let mut next: BTreeMap<ThreeLegConfig, f64> = BTreeMap::new();
            for (cfg, amp) in configs {
                assert!(cfg.belt[0].is_none(), "injection column occupied");
                let mut child = cfg;
                child.belt[0] = Some(0);
                *next.entry(child).or_insert(0.0) += amp;
            }
            configs = next;
            injected += 1;
        }
        let before: f64 = configs.values().map(|a| a * a).sum();
        configs = run.substitute(configs)?;
        let after: f64 = configs.values().map(|a| a * a).sum();
        // The contraction bounds the Gram spectrum from above, so the
        // dilated substitution can only leak mass into junk modes, never
        // create it.
        let leak = before - after;
        if leak < -NORM_TOL {
            return Err(ConveyorError::NormDrift { norm: after + pruned + discarded });
        }
        discarded += leak.max(0.0);
        configs = run.emit_and_reset(configs)?;
        pruned += run.prune(&mut configs);
        let norm: f64 =
            configs.values().map(|a| a * a).sum::<f64>() + pruned + discarded;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(ConveyorError::NormDrift { norm });
        }
        rows.push(run.stat_row(t, &configs));
        configs = run.advect(configs);
        if injected == n_emit && configs.keys().all(|c| c.belt.iter().all(Option::is_none)) {
            done = true;
            break;
        }
    }
    if !done {
        return Err(ConveyorError::CycleOverrun { cap });
    }
    let mut amps: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    let mut success = 0.0;
    for (cfg, amp) in &configs {
        if cfg.stack.is_empty() && cfg.harvested.len() == n_emit {
            success += amp * amp;
            let string: Vec<i64> = cfg.harvested.iter().map(|&v| v as i64).collect();
            *amps.entry(string).or_insert(Complex64::new(0.0, 0.0)) +=
                Complex64::new(*amp, 0.0);
        }
    }
    if amps.is_empty() {
        return Err(ConveyorError::NoAcceptedBranch { n: n_emit });
    }
    let norm = success.sqrt();
    for a in amps.values_mut() {
        *a /= norm;
    }
    Ok((
        RadiatedState::from_amplitudes(n_emit, amps, success),
        GateStats { rows },
    ))
}
