//! Acceptance gate: one test per headline claim of the library, each
//! printing a single `[PASS]`/`[FAIL]` line (run with `--nocapture
//! --test-threads=1` to watch the lines go by, roughly in order of cost).
//!
//! The claims are asymptotic scaling statements, so every check is either
//! an exact small-instance oracle comparison or an exponent fit at desk
//! scale with an explicit tolerance. Seeds are fixed; the suite is
//! deterministic.

use num_complex::Complex64;
use seqgen_core::channel::{hermitian_eigenvalues, markov_chain_channel, RadiatedState};
use seqgen_core::conveyor::{
    markovianity_audit, run_three_leg, run_two_leg, sample_two_leg, substitution_contraction,
    suggested_width,
};
use seqgen_core::fit::{compare_log_power, fit_exponent, ScalingLaw};
use seqgen_core::grammar::{fixtures, CnfGrammar};
use seqgen_core::motzkin::{enumerate_walks, walk_count, MotzkinEnsemble};
use seqgen_core::pda::{RestartPolicy, WeightedPda};
use seqgen_core::switches::{
    displacement_exponent, overhead_exponent, subdiffusive_exponent, AuxWalkerModel, DisorderKind,
};
use seqgen_core::util::{log_spaced_integers, renyi_entropy};
use seqgen_core::walk::{return_probability_series, steady_state, HalfLineWalk, Phase, WalkParams};
use std::collections::BTreeMap;

fn report(criterion: usize, ok: bool, detail: &str) {
    let tag = if ok { "[PASS]" } else { "[FAIL]" };
    println!("{tag} criterion {criterion}: {detail}");
    assert!(ok, "criterion {criterion}: {detail}");
}

/// Ordinary least squares slope of `ys` against `xs`.
fn line_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

/// Reference radiated state of a colored walk ensemble, built by brute
/// enumeration: amplitude √(path weight / wall-return weight) per walk.
fn ensemble_state(ens: &MotzkinEnsemble, n: usize) -> RadiatedState {
    let z = ens.partition_weight(n).unwrap();
    let mut amps = BTreeMap::new();
    for walk in enumerate_walks(n, ens.colors()).unwrap() {
        let w = ens.path_weight(&walk).unwrap();
        if w > 0.0 {
            amps.insert(walk, Complex64::new((w / z).sqrt(), 0.0));
        }
    }
    RadiatedState::from_amplitudes(n, amps, z)
}

#[test]
fn criterion_1_walk_combinatorics_oracle() {
    let mut checked = 0usize;
    for s in [1usize, 2] {
        for n in 1..=10usize {
            let listed = enumerate_walks(n, s).unwrap();
            let counted = walk_count(n, s).unwrap();
            assert_eq!(listed.len() as u128, counted, "count mismatch at n = {n}, s = {s}");
            checked += 1;
        }
    }
    let m3 = enumerate_walks(3, 1).unwrap().len();
    let m4 = enumerate_walks(4, 1).unwrap().len();
    let ok = m3 == 4 && m4 == 9;
    report(
        1,
        ok,
        &format!(
            "enumeration equals the closed count at {checked} (n, s) pairs, n ≤ 10; \
             enumerated M_3 = {m3}, M_4 = {m4}"
        ),
    );
}

#[test]
fn criterion_2_channel_state_duality() {
    let ens = MotzkinEnsemble::uniform_spin1();
    let ch = ens.channel(12).unwrap();
    let mut worst: f64 = 0.0;
    for n in 2..=10usize {
        for cut in 1..n {
            let direct = ens.schmidt_spectrum(n, cut).unwrap().renyi(2.0);
            let dual = ch.renyi_entropy(0, 0, n, cut, 2).unwrap();
            worst = worst.max((direct - dual).abs());
        }
    }

    // Deep cut of a gapped emitter: the cut spectrum collapses onto the
    // steady-state spectrum, far from both boundaries.
    let gapped = markov_chain_channel(&[vec![0.7, 0.3], vec![0.5, 0.5]]).unwrap();
    let rho = gapped.steady_state().unwrap();
    let stationary = hermitian_eigenvalues(&rho);
    let expected = renyi_entropy(&stationary, 2.0);
    let deep = gapped.renyi_entropy(0, 0, 80, 40, 2).unwrap();
    let gap_err = (deep - expected).abs();

    let ok = worst < 1e-8 && gap_err < 1e-6;
    report(
        2,
        ok,
        &format!(
            "dual-picture Rényi-2 vs direct Schmidt: worst |Δ| = {worst:.2e} over all cuts, \
             n ≤ 10 (bound 1e-8); deep cut vs steady-state spectrum |Δ| = {gap_err:.2e} \
             (bound 1e-6)"
        ),
    );
}

#[test]
fn criterion_3_critical_return_and_postselection() {
    // Exact wall-return series of the critical walk.
    let params = WalkParams::critical(0.25).unwrap();
    let horizon = 4096;
    let series = return_probability_series(&params, horizon).unwrap();
    let ts: Vec<f64> =
        log_spaced_integers(256, horizon, 12).into_iter().map(|t| t as f64).collect();
    let ps: Vec<f64> = ts.iter().map(|&t| series[t as usize - 1]).collect();
    let p0_fit = fit_exponent(&ts, &ps, 400, 31).unwrap();

    // Monte-Carlo empty-stack acceptance of the push-down generator.
    let grammar = CnfGrammar::parse(fixtures::MOTZKIN1).unwrap();
    let pda = WeightedPda::compile(&grammar, RestartPolicy::Renew);
    let lengths = [16usize, 32, 64, 128, 256];
    let rate = pda.postselection_rate(&lengths, 10_000, 37).unwrap();
    let rate_fit = rate.fit.expect("every length has accepting trajectories");

    let ok = (p0_fit.exponent + 0.5).abs() <= 0.05 && (rate_fit.exponent + 0.5).abs() <= 0.1;
    report(
        3,
        ok,
        &format!(
            "wall-return exponent {:.4} at horizon 4096 (target -0.5 ± 0.05); empty-stack \
             acceptance exponent {:.4} over n ∈ {{16..256}}, 10^4 trials per length \
             (target -0.5 ± 0.1)",
            p0_fit.exponent, rate_fit.exponent
        ),
    );
}

#[test]
fn criterion_4_entanglement_scaling() {
    let n = 2048;
    let cuts = log_spaced_integers(16, 256, 9);
    let xs: Vec<f64> = cuts.iter().map(|&c| c as f64).collect();

    // Two colors: the cut entropy splits exactly as S(ℓ) = ⟨m⟩·ln 2 + H(m)
    // — the stack-word term plus the height-distribution term. The claimed
    // √ℓ growth is the leading stack-word term; the additive H ≈ ½·ln ℓ
    // piece (the same law the one-color sweep below isolates, since there
    // S = H identically) depresses a naive log S vs log ℓ slope to ~0.35
    // at these cuts and approaches 0.5 only logarithmically slowly. The
    // leading term is therefore fitted on its own, the subleading term is
    // checked against the log law, and the raw slope is reported alongside.
    let colored = MotzkinEnsemble::unbiased(2).unwrap();
    let colored_scaling = colored.entropy_scaling(n, &cuts).unwrap();
    let stack_term: Vec<f64> =
        colored_scaling.mean_height.iter().map(|m| m * 2f64.ln()).collect();
    let height_term: Vec<f64> = colored_scaling
        .entanglement
        .iter()
        .zip(&stack_term)
        .map(|(s, c)| s - c)
        .collect();
    let slope = fit_exponent(&xs, &stack_term, 400, 41).unwrap();
    let leading = stack_term.last().unwrap() > height_term.last().unwrap();
    let sub_law = compare_log_power(&xs, &height_term).unwrap();
    let sub_log = matches!(sub_law.preferred, ScalingLaw::Log);
    let raw_log_s: Vec<f64> = colored_scaling.entanglement.iter().map(|v| v.ln()).collect();
    let log_x: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let raw_slope = line_slope(&log_x, &raw_log_s);

    // One color: the logarithmic law must beat the power law in y-space.
    let plain = MotzkinEnsemble::uniform_spin1();
    let plain_scaling = plain.entropy_scaling(n, &cuts).unwrap();
    let law = compare_log_power(&xs, &plain_scaling.entanglement).unwrap();
    let log_preferred = matches!(law.preferred, ScalingLaw::Log);

    // Pinned weights: the cut entropy stops growing (area law).
    let pinned = MotzkinEnsemble::new(2, 0.1, 0.45, 0.35, 0.5).unwrap();
    let s_mid = pinned.schmidt_spectrum(n, 128).unwrap().entropy();
    let s_deep = pinned.schmidt_spectrum(n, 256).unwrap().entropy();
    let critical_deep = *colored_scaling.entanglement.last().unwrap();
    let saturated = (s_deep - s_mid).abs() < 0.02 && s_deep < 0.5 * critical_deep;

    let ok = (slope.exponent - 0.5).abs() <= 0.1
        && leading
        && sub_log
        && log_preferred
        && saturated;
    report(
        4,
        ok,
        &format!(
            "two-color entropy leading term slope {:.4} over ℓ ∈ [16, 256] at n = 2048 \
             (target 0.5 ± 0.1; raw log S slope {raw_slope:.4} here, depressed by the \
             subleading log term, which itself prefers the log law: {sub_log}); one-color \
             sweep prefers the log law: {log_preferred}; pinned entropy saturates: \
             {s_mid:.4} at ℓ = 128 vs {s_deep:.4} at ℓ = 256 ({critical_deep:.2} when critical)",
            slope.exponent
        ),
    );
}

#[test]
fn criterion_5_phase_diagram() {
    // Three regimes by bias sign, with the matching steady-state behavior.
    let pinned = WalkParams::new(0.3, 0.24, 0.3).unwrap();
    let critical = WalkParams::critical(0.3).unwrap();
    let escaping = WalkParams::new(0.2, 0.3, 0.3).unwrap();
    let phases_ok = pinned.phase().unwrap() == Phase::Pinned
        && critical.phase().unwrap() == Phase::Critical
        && escaping.phase().unwrap() == Phase::Escaping;

    // Pinned: nearly all stationary mass within a few decay lengths.
    let xi = pinned.correlation_length().unwrap();
    let pi = steady_state(&pinned, 400).unwrap();
    let near = (3.0 * xi).ceil() as usize;
    let mass_near: f64 = pi.iter().take(near + 1).sum();
    let pinned_ok = mass_near > 0.95;

    // Critical: diffusive front, mean position doubling when time quadruples.
    let mut walk = HalfLineWalk::new(critical, 100).unwrap();
    let samples = walk.run(400);
    let diff_ratio = samples[399].mean_position / samples[99].mean_position;
    let critical_ok = (diff_ratio - 2.0).abs() < 0.3;

    // Escaping: ballistic front at speed γ_R - γ_L.
    let mut runaway = HalfLineWalk::new(escaping, 500).unwrap();
    let s2 = runaway.run(400);
    let speed = s2[399].mean_position / 400.0;
    let escape_ok = (speed / 0.1 - 1.0).abs() < 0.1 && s2[399].mean_position / s2[199].mean_position > 1.8;

    // Pinned confinement length vs bias: measure ξ from the stationary
    // tail at several δ < 0 and fit ξ ~ |δ|^b.
    let deltas = [-0.02, -0.04, -0.08, -0.16, -0.32];
    let mut abs_d = Vec::new();
    let mut xis = Vec::new();
    for &d in &deltas {
        let p = WalkParams::new(0.3, 0.3 * (1.0 + d), 0.3).unwrap();
        let cap = (30.0 * p.correlation_length().unwrap()).ceil() as usize + 20;
        let tail = steady_state(&p, cap).unwrap();
        let hi = tail.iter().position(|&x| x < 1e-13).unwrap_or(tail.len() - 1).max(8);
        let sites: Vec<f64> = (2..hi).map(|i| i as f64).collect();
        let logs: Vec<f64> = (2..hi).map(|i| tail[i].ln()).collect();
        let rate = -line_slope(&sites, &logs);
        abs_d.push(-d);
        xis.push(1.0 / rate);
    }
    let xi_fit = fit_exponent(&abs_d, &xis, 400, 43).unwrap();
    let xi_ok = (xi_fit.exponent + 0.5).abs() <= 0.1;

    let ok = phases_ok && pinned_ok && critical_ok && escape_ok && xi_ok;
    report(
        5,
        ok,
        &format!(
            "regimes reproduced (phases {phases_ok}, pinned mass within 3ξ {mass_near:.4}, \
             diffusive ratio {diff_ratio:.3}, ballistic speed {speed:.4}); pinned confinement \
             fit ξ ~ |δ|^({:.3}) vs target -0.5 ± 0.1 — the measured stationary tails decay \
             at rate -ln(1+δ), so ξ tracks 1/|δ| and the -0.5 window cannot be met",
            xi_fit.exponent
        ),
    );
}

#[test]
fn criterion_6_circuit_equivalence() {
    // Two-leg ladder against the enumerated walk ensemble (the harvested
    // register records pops as +k, so relabel before comparing).
    let ensembles = [
        MotzkinEnsemble::unbiased(2).unwrap(),
        MotzkinEnsemble::uniform_spin1(),
        MotzkinEnsemble::new(2, 0.10, 0.45, 0.35, 0.5).unwrap(),
    ];
    let mut worst_two = 1.0f64;
    for ens in &ensembles {
        for n in [4usize, 6, 8] {
            let (state, _) = run_two_leg(ens, n, suggested_width(n)).unwrap();
            let as_walk = state.relabel(|v| -v).unwrap();
            worst_two = worst_two.min(as_walk.fidelity(&ensemble_state(ens, n)));
            let z = ens.partition_weight(n).unwrap();
            assert!(
                (state.success_probability() - z).abs() < 1e-10,
                "two-leg success deviates from the wall-return weight at n = {n}"
            );
        }
    }

    // Three-leg ladder against the push-down superposition, including the
    // uniform contraction relating the two success probabilities.
    let cases: [(&str, RestartPolicy, &[usize]); 3] = [
        (fixtures::MOTZKIN1, RestartPolicy::Renew, &[2, 4, 6]),
        (fixtures::BALANCED01, RestartPolicy::Halt, &[2, 4, 6]),
        (fixtures::CAT3, RestartPolicy::Halt, &[2, 4, 6]),
    ];
    let mut worst_three = 1.0f64;
    for (text, policy, lens) in cases {
        let g = CnfGrammar::parse(text).unwrap();
        let pda = WeightedPda::compile(&g, policy);
        let c = substitution_contraction(&g);
        for &n in lens {
            let expected = pda.exact_superposition(n).unwrap();
            let (state, _) = run_three_leg(&g, policy, n, n + 6).unwrap();
            worst_three = worst_three.min(state.fidelity(&expected));
            let scaled = expected.success_probability() * c.powi(-2 * (2 * n as i32 - 1));
            let rel = (state.success_probability() - scaled).abs() / scaled;
            assert!(rel < 1e-8, "three-leg success off by {rel} at n = {n}");
        }
    }

    // Single-interaction contract on sampled trajectories.
    let ens = MotzkinEnsemble::unbiased(2).unwrap();
    let n = 64;
    let width = 4 * ((n as f64).sqrt().ceil() as usize) + 8;
    let mut audited = 0usize;
    for seed in 0..1000u64 {
        let (rec, _) = sample_two_leg(&ens, n, width, seed).unwrap();
        let rep = markovianity_audit(&rec).unwrap();
        assert_eq!(rep.max_gates_per_particle, 1, "particle touched twice, seed {seed}");
        audited += 1;
    }

    let ok = worst_two >= 1.0 - 1e-10 && worst_three >= 1.0 - 1e-8 && audited == 1000;
    report(
        6,
        ok,
        &format!(
            "two-leg worst fidelity 1 - {:.1e} (n ≤ 8, 3 weight settings; bound 1 - 1e-10); \
             three-leg worst fidelity 1 - {:.1e} (n ≤ 6, 3 grammars; bound 1 - 1e-8); \
             {audited}/1000 sampled trajectories audit to exactly one gate per particle",
            1.0 - worst_two,
            1.0 - worst_three
        ),
    );
}

#[test]
fn criterion_7_gate_accounting() {
    let ens = MotzkinEnsemble::unbiased(2).unwrap();
    let sizes = [64usize, 256, 1024];
    let reps = 50u64;
    let mut log_n = Vec::new();
    let mut log_gates = Vec::new();
    for &n in &sizes {
        let width = 4 * ((n as f64).sqrt().ceil() as usize) + 8;
        let mut acc = 0.0;
        for seed in 0..reps {
            let (_, stats) = sample_two_leg(&ens, n, width, 1000 + seed).unwrap();
            acc += stats.mean_gates_per_cycle();
        }
        log_n.push((n as f64).ln());
        log_gates.push((acc / reps as f64).ln());
    }
    let exponent = line_slope(&log_n, &log_gates);
    let ok = (exponent - 0.5).abs() <= 0.15;
    report(
        7,
        ok,
        &format!(
            "nontrivial gates per cycle scale as n^({exponent:.4}) over n ∈ {{64, 256, 1024}} \
             (target 0.5 ± 0.15, i.e. total work ~ n^1.5)"
        ),
    );
}

#[test]
fn criterion_8_switched_walk_exponents() {
    let levy =
        displacement_exponent(&AuxWalkerModel::Diffusive1d, 100_000, 1.0, 10_000, 61).unwrap();
    let over =
        overhead_exponent(&AuxWalkerModel::Diffusive1d, &[100, 400, 1600, 6400], 3000, 67)
            .unwrap();
    let mut trap_ok = true;
    let mut trap_detail = String::new();
    for mu in [1.0 / 3.0, 2.0 / 3.0] {
        let est = subdiffusive_exponent(DisorderKind::Trap { mu }, 50_000, 2000, 71).unwrap();
        let target = mu / (1.0 + mu);
        trap_ok &= (est.fit.exponent - target).abs() <= 0.07;
        trap_detail.push_str(&format!(" μ = {mu:.3} gives {:.4} (target {target:.3});", est.fit.exponent));
    }
    let ok = (levy.fit.exponent - 0.75).abs() <= 0.05
        && (over.fit.exponent + 0.5).abs() <= 0.1
        && trap_ok;
    report(
        8,
        ok,
        &format!(
            "switched displacement exponent {:.4} from 10^4 traces at T = 10^5 (target \
             0.75 ± 0.05); origin-occupation overhead exponent {:.4} (target -0.5 ± 0.1); \
             trap disorder:{trap_detail} tolerance ± 0.07",
            levy.fit.exponent, over.fit.exponent
        ),
    );
}

#[test]
fn criterion_9_desk_scale_boundaries() {
    // The limits of what this repository claims are documentation, not
    // simulation: exact entropy prefactors, adiabatic-gap comparisons and
    // exact equality with any particular ground state are out of scope by
    // design and replaced by the oracle and exponent checks above. Hold
    // the README to that.
    let readme =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let lower = readme.to_lowercase();
    let ok = lower.contains("prefactor")
        && lower.contains("adiabatic")
        && lower.contains("ground state");
    report(
        9,
        ok,
        "out-of-scope items (exact prefactors, adiabatic gaps, exact ground-state equality) \
         are documented as boundaries rather than silently approximated",
    );
}
