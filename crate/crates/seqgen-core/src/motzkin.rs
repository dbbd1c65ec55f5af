//! Weighted colored Motzkin ensembles and their entanglement structure.
//!
//! A length-`N` emission run of the stack emitter produces a superposition
//! of *colored Motzkin walks*: strings over `{+c, −c, 0}` (push color `c`,
//! pop color `c`, flat) whose height profile stays nonnegative, whose pops
//! match the pushed colors, and which return to height zero at the end. The
//! squared amplitude of a walk is its classical path weight under the
//! half-line height walk, so everything here cross-checks against
//! [`crate::walk`] and [`crate::channel`].
//!
//! The Schmidt decomposition across `first ℓ | rest` is computed without
//! enumeration: amplitudes factor through the cut height `m` and the `s^m`
//! color words of the open stack, so the reduced state is block diagonal
//! with one rank-one block per stack word. That gives eigenvalues
//!
//! ```text
//! λ(m) = A_ℓ(m) · B_{N−ℓ}(m) / (s^m · Z_N),   multiplicity s^m,
//! ```
//!
//! where `A_ℓ(m)` is the walk measure at height `m` after `ℓ` ticks,
//! `B_j(m)` the probability of descending from `m` to the wall in `j`
//! ticks, and `Z_N` the return probability — all plain walk quantities.

use thiserror::Error;

use crate::channel::{colored_stack_channel, ChannelError, KrausChannel};
use crate::util::{kahan_sum, shannon_entropy, KahanSum};
use crate::walk::{HalfLineWalk, WalkError, WalkParams};

#[derive(Debug, Error)]
pub enum MotzkinError {
    #[error("need at least one color, got s = 0")]
    NoColors,
    #[error("bulk weights must satisfy s·w_up + w_down + w_flat = 1, got {sum}")]
    BulkNotNormalized { sum: f64 },
    #[error("weights must be nonnegative, got {name} = {value}")]
    NegativeWeight { name: &'static str, value: f64 },
    #[error("boundary push weight {0} must lie in [0, 1]")]
    BadBoundaryWeight(f64),
    #[error("symbol {symbol} outside the alphabet of s = {s} colors")]
    SymbolOutOfRange { symbol: i64, s: usize },
    #[error("enumeration of {count} strings refused (cap {cap}); use the closed-form ops")]
    EnumerationTooLarge { count: u128, cap: u128 },
    #[error("walk length {n} exceeds the enumeration cap of 14")]
    LengthTooLong { n: usize },
    #[error("colored walk count overflows u128 at n = {n}, s = {s}")]
    CountOverflow { n: usize, s: usize },
    #[error("cut must satisfy 1 ≤ cut < n, got cut {cut} of length {n}")]
    BadCut { cut: usize, n: usize },
    #[error("entropy scaling needs at least 4 cut positions, got {0}")]
    TooFewCuts(usize),
    #[error("cut {cut} deeper than n/4 = {max} leaves the scaling window")]
    CutTooDeep { cut: usize, max: usize },
    #[error("spectrum expansion would produce {classes} eigenvalues (cap {cap})")]
    SpectrumTooLarge { classes: u128, cap: u128 },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Weighted ensemble of `s`-colored Motzkin walks.
///
/// Bulk step weights: each of the `s` push colors carries `w_up`, the
/// (color-forced) pop carries `w_down`, the flat `w_flat`, with
/// `s·w_up + w_down + w_flat = 1`. At height zero the pushes share
/// `w_up_boundary` equally among colors and the flat takes the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotzkinEnsemble {
    s: usize,
    w_up: f64,
    w_down: f64,
    w_flat: f64,
    w_up_boundary: f64,
}

impl MotzkinEnsemble {
    pub fn new(
        s: usize,
        w_up: f64,
        w_down: f64,
        w_flat: f64,
        w_up_boundary: f64,
    ) -> Result<Self, MotzkinError> {
        if s == 0 {
            return Err(MotzkinError::NoColors);
        }
        for (name, value) in
            [("w_up", w_up), ("w_down", w_down), ("w_flat", w_flat)]
        {
            if value < 0.0 || !value.is_finite() {
                return Err(MotzkinError::NegativeWeight { name, value });
            }
        }
        let sum = s as f64 * w_up + w_down + w_flat;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MotzkinError::BulkNotNormalized { sum });
        }
        if !(0.0..=1.0).contains(&w_up_boundary) {
            return Err(MotzkinError::BadBoundaryWeight(w_up_boundary));
        }
        Ok(Self { s, w_up, w_down, w_flat, w_up_boundary })
    }

    /// Uniform spin-1 weights: every move a third, boundary matching the
    /// bulk push rate.
    pub fn uniform_spin1() -> Self {
        Self::new(1, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap()
    }

    /// Unbiased `s`-color ensemble: total push rate equals the pop rate
    /// (`s·w_up = w_down = 1/3`), boundary push `s·w_up + w_down`.
    pub fn unbiased(s: usize) -> Result<Self, MotzkinError> {
        let w_up = 1.0 / (3.0 * s as f64);
        Self::new(s, w_up, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0)
    }

    pub fn colors(&self) -> usize {
        self.s
    }

    pub fn weights(&self) -> (f64, f64, f64, f64) {
        (self.w_up, self.w_down, self.w_flat, self.w_up_boundary)
    }

    /// The equivalent half-line height walk: `γ_R = s·w_up`, `γ_L = w_down`,
    /// `γ_0 = w_up_boundary`.
    pub fn walk_params(&self) -> Result<WalkParams, MotzkinError> {
        Ok(WalkParams::new(self.w_down, self.s as f64 * self.w_up, self.w_up_boundary)?)
    }

    /// The equivalent stack emitter as a Kraus channel, exact for runs whose
    /// height stays below `max_height`.
    pub fn channel(&self, max_height: usize) -> Result<KrausChannel, MotzkinError> {
        Ok(colored_stack_channel(
            self.s,
            self.w_up,
            self.w_down,
            self.w_flat,
            self.w_up_boundary,
            max_height,
        )?)
    }

    fn step_weight(&self, height: usize, symbol: i64) -> f64 {
        if symbol > 0 {
            if height == 0 {
                self.w_up_boundary / self.s as f64
            } else {
                self.w_up
            }
        } else if symbol < 0 {
            self.w_down
        } else if height == 0 {
            1.0 - self.w_up_boundary
        } else {
            self.w_flat
        }
    }

    /// Classical path weight of a colored walk string (zero when the string
    /// is not a legal walk returning to the wall).
    pub fn path_weight(&self, string: &[i64]) -> Result<f64, MotzkinError> {
        let mut stack: Vec<i64> = Vec::new();
        let mut weight = 1.0;
        for &sym in string {
            if sym.unsigned_abs() as usize > self.s {
                return Err(MotzkinError::SymbolOutOfRange { symbol: sym, s: self.s });
            }
            weight *= self.step_weight(stack.len(), sym);
            if sym > 0 {
                stack.push(sym);
            } else if sym < 0 {
                match stack.pop() {
                    Some(top) if top == -sym => {}
                    _ => return Ok(0.0), // color mismatch or pop below the wall
                }
            }
        }
        if stack.is_empty() { Ok(weight) } else { Ok(0.0) }
    }

    /// Total weight `Z_n` of all legal length-`n` walks — the wall-return
    /// probability of the height walk.
    pub fn partition_weight(&self, n: usize) -> Result<f64, MotzkinError> {
        if n == 0 {
            return Ok(1.0);
        }
        let params = self.walk_params()?;
        let mut walk = HalfLineWalk::new(params, n + 2)?;
        for _ in 0..n {
            walk.step();
        }
        Ok(walk.return_probability())
    }

    /// Normalized amplitude of one basis string in the length-`n` radiated
    /// state, `√(weight / Z_n)`.
    pub fn amplitude(&self, string: &[i64]) -> Result<f64, MotzkinError> {
        let w = self.path_weight(string)?;
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok((w / self.partition_weight(string.len())?).sqrt())
    }

    /// Schmidt spectrum across `first cut | rest` of the length-`n` state.
    pub fn schmidt_spectrum(&self, n: usize, cut: usize) -> Result<SchmidtSpectrum, MotzkinError> {
        if cut == 0 || cut >= n {
            return Err(MotzkinError::BadCut { cut, n });
        }
        let params = self.walk_params()?;
        // A_ℓ(m): walk measure after ℓ ticks (support ≤ ℓ, exact capacity).
        let mut a_walk = HalfLineWalk::new(params, cut + 2)?;
        for _ in 0..cut {
            a_walk.step();
        }
        let a = a_walk.distribution();

        // B_j(m): probability of reaching the wall from height m in j ticks.
        // B_j(m) = 0 for m > j, so a (j+2)-site window is exact.
        let j = n - cut;
        let (gl, gr, g0) = (params.gamma_left, params.gamma_right, params.gamma_wall);
        let mut b = vec![0.0; j + 2];
        b[0] = 1.0;
        let mut next = vec![0.0; j + 2];
        for step in 1..=j {
            let reach = step.min(j);
            for (h, slot) in next.iter_mut().enumerate().take(reach + 1) {
                let flat = if h == 0 { 1.0 - g0 } else { 1.0 - gl - gr };
                let up = if h == 0 { g0 } else { gr };
                let mut v = flat * b[h] + up * b[h + 1];
                if h > 0 {
                    v += gl * b[h - 1];
                }
                *slot = v;
            }
            for slot in next.iter_mut().skip(reach + 1) {
                *slot = 0.0;
            }
            std::mem::swap(&mut b, &mut next);
        }

        let m_max = cut.min(n - cut);
        let mut joint = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let am = if m < a.len() { a[m] } else { 0.0 };
            joint.push(am * b[m]);
        }
        let z = kahan_sum(joint.iter().copied());
        let class_prob = joint.into_iter().map(|w| (w / z).max(0.0)).collect();
        Ok(SchmidtSpectrum { s: self.s, class_prob, partition: z })
    }

    /// Entanglement observables across a list of cuts of the length-`n`
    /// state. At least four cuts, each within the scaling window `ℓ ≤ n/4`.
    pub fn entropy_scaling(
        &self,
        n: usize,
        cuts: &[usize],
    ) -> Result<EntropyScaling, MotzkinError> {
        if cuts.len() < 4 {
            return Err(MotzkinError::TooFewCuts(cuts.len()));
        }
        for &cut in cuts {
            if cut == 0 || cut >= n {
                return Err(MotzkinError::BadCut { cut, n });
            }
            if cut > n / 4 {
                return Err(MotzkinError::CutTooDeep { cut, max: n / 4 });
            }
        }
        let mut entanglement = Vec::with_capacity(cuts.len());
        let mut renyi2 = Vec::with_capacity(cuts.len());
        let mut mean_height = Vec::with_capacity(cuts.len());
        for &cut in cuts {
            let spec = self.schmidt_spectrum(n, cut)?;
            entanglement.push(spec.entropy());
            renyi2.push(spec.renyi(2.0));
            mean_height.push(spec.mean_height());
        }
        Ok(EntropyScaling { cuts: cuts.to_vec(), entanglement, renyi2, mean_height })
    }
}

/// Schmidt spectrum stored by cut-height class: class `m` holds `s^m`
/// identical eigenvalues of total probability `class_prob[m]`.
#[derive(Debug, Clone)]
pub struct SchmidtSpectrum {
    s: usize,
    class_prob: Vec<f64>,
    partition: f64,
}

impl SchmidtSpectrum {
    /// Total probability of crossing height `m` (all `s^m` stack words).
    pub fn class_probabilities(&self) -> &[f64] {
        &self.class_prob
    }

    /// Unnormalized total weight `Z_n` of the run.
    pub fn partition(&self) -> f64 {
        self.partition
    }

    /// Single eigenvalue of class `m` (zero when the class is empty).
    pub fn lambda(&self, m: usize) -> f64 {
        match self.class_prob.get(m) {
            Some(&p) if p > 0.0 => p / (self.s as f64).powi(m as i32),
            _ => 0.0,
        }
    }

    pub fn multiplicity(&self, m: usize) -> u128 {
        (self.s as u128).pow(m as u32)
    }

    /// Mean cut height `E[m]`.
    pub fn mean_height(&self) -> f64 {
        kahan_sum(self.class_prob.iter().enumerate().map(|(m, &p)| m as f64 * p))
    }

    /// Von Neumann entanglement entropy,
    /// `S₁ = H(class) + E[m]·ln s`.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.class_prob) + self.mean_height() * (self.s as f64).ln()
    }

    /// Rényi entropy of real order `n > 0`, `n ≠ 1`:
    /// `S_n = (1−n)^{-1} ln Σ_m P(m)^n s^{m(1−n)}`.
    pub fn renyi(&self, n: f64) -> f64 {
        let s = self.s as f64;
        let mut acc = KahanSum::new();
        for (m, &p) in self.class_prob.iter().enumerate() {
            if p > 0.0 {
                acc.add(p.powf(n) * s.powf(m as f64 * (1.0 - n)));
            }
        }
        acc.value().ln() / (1.0 - n)
    }

    /// Expand the class structure into the explicit eigenvalue list,
    /// descending. Refused when the total class count exceeds `cap`.
    pub fn expanded(&self, cap: u128) -> Result<Vec<f64>, MotzkinError> {
        let classes: u128 = (0..self.class_prob.len())
            .map(|m| self.multiplicity(m))
            .sum();
        if classes > cap {
            return Err(MotzkinError::SpectrumTooLarge { classes, cap });
        }
        let mut out = Vec::with_capacity(classes as usize);
        for m in 0..self.class_prob.len() {
            let lam = self.lambda(m);
            if lam > 0.0 {
                out.extend(std::iter::repeat_n(lam, self.multiplicity(m) as usize));
            }
        }
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(out)
    }
}

/// Entanglement observables along a cut sweep.
#[derive(Debug, Clone)]
pub struct EntropyScaling {
    pub cuts: Vec<usize>,
    pub entanglement: Vec<f64>,
    pub renyi2: Vec<f64>,
    pub mean_height: Vec<f64>,
}

/// Number of `s`-colored Motzkin walks of length `n` (every push picks one
/// of `s` colors; pops and flats are forced).
pub fn walk_count(n: usize, s: usize) -> Result<u128, MotzkinError> {
    if s == 0 {
        return Err(MotzkinError::NoColors);
    }
    let overflow = || MotzkinError::CountOverflow { n, s };
    let mut counts: Vec<u128> = vec![1];
    for t in 0..n {
        let mut next = vec![0u128; counts.len() + 1];
        for (h, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            // flat
            next[h] = next[h].checked_add(c).ok_or_else(overflow)?;
            // push, s colors
            let pushed = c.checked_mul(s as u128).ok_or_else(overflow)?;
            next[h + 1] = next[h + 1].checked_add(pushed).ok_or_else(overflow)?;
            // pop
            if h > 0 {
                next[h - 1] = next[h - 1].checked_add(c).ok_or_else(overflow)?;
            }
        }
        next.truncate((t + 2).min(n + 1));
        counts = next;
    }
    Ok(counts[0])
}

/// All legal `s`-colored walks of length `n`, lexicographically sorted.
/// Capped at length 14 and five million strings; beyond that use the
/// closed-form operations.
pub fn enumerate_walks(n: usize, s: usize) -> Result<Vec<Vec<i64>>, MotzkinError> {
    const CAP: u128 = 5_000_000;
    if s == 0 {
        return Err(MotzkinError::NoColors);
    }
    if n > 14 {
        return Err(MotzkinError::LengthTooLong { n });
    }
    let count = walk_count(n, s)?;
    if count > CAP {
        return Err(MotzkinError::EnumerationTooLarge { count, cap: CAP });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut stack: Vec<i64> = Vec::new();
    let mut prefix: Vec<i64> = Vec::new();
    fn recurse(
        n: usize,
        s: usize,
        prefix: &mut Vec<i64>,
        stack: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        let remaining = n - prefix.len();
        if stack.len() > remaining {
            return; // cannot descend in time
        }
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        // Symbol order: pops (negative), flat, pushes — i.e. ascending i64.
        if let Some(&top) = stack.last() {
            stack.pop();
            prefix.push(-top);
            recurse(n, s, prefix, stack, out);
            prefix.pop();
            stack.push(top);
        }
        prefix.push(0);
        recurse(n, s, prefix, stack, out);
        prefix.pop();
        for c in 1..=s as i64 {
            stack.push(c);
            prefix.push(c);
            recurse(n, s, prefix, stack, out);
            prefix.pop();
            stack.pop();
        }
    }
    recurse(n, s, &mut prefix, &mut stack, &mut out);
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    const MOTZKIN_NUMBERS: [u128; 11] = [1, 1, 2, 4, 9, 21, 51, 127, 323, 835, 2188];

    #[test]
    fn counts_match_motzkin_numbers() {
        for (n, &m) in MOTZKIN_NUMBERS.iter().enumerate() {
            assert_eq!(walk_count(n, 1).unwrap(), m, "n = {n}");
        }
        // Motzkin recurrence M_{n+1} = M_n + Σ_k M_k M_{n−1−k}.
        for n in 1..20usize {
            let lhs = walk_count(n + 1, 1).unwrap();
            let mut rhs = walk_count(n, 1).unwrap();
            for k in 0..n {
                rhs += walk_count(k, 1).unwrap() * walk_count(n - 1 - k, 1).unwrap();
            }
            assert_eq!(lhs, rhs, "recurrence fails at n = {n}");
        }
    }

    #[test]
    fn enumeration_matches_counts_and_legality() {
        for s in 1..=2usize {
            for n in 0..=8usize {
                let walks = enumerate_walks(n, s).unwrap();
                assert_eq!(walks.len() as u128, walk_count(n, s).unwrap(), "n={n} s={s}");
                let ens = MotzkinEnsemble::unbiased(s).unwrap();
                for w in &walks {
                    assert!(ens.path_weight(w).unwrap() > 0.0, "illegal walk listed: {w:?}");
                }
                // No duplicates (sorted order makes this a pairwise check).
                for pair in walks.windows(2) {
                    assert!(pair[0] < pair[1]);
                }
            }
        }
        assert_eq!(walk_count(4, 2).unwrap(), 21);
        let three = enumerate_walks(3, 1).unwrap();
        let expected: Vec<Vec<i64>> =
            vec![vec![0, 0, 0], vec![0, 1, -1], vec![1, -1, 0], vec![1, 0, -1]];
        assert_eq!(three, { let mut e = expected; e.sort(); e });
    }

    #[test]
    fn enumeration_caps_are_enforced() {
        assert!(matches!(enumerate_walks(15, 1), Err(MotzkinError::LengthTooLong { n: 15 })));
        assert!(matches!(
            enumerate_walks(14, 4),
            Err(MotzkinError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn weights_are_validated() {
        assert!(matches!(
            MotzkinEnsemble::new(2, 0.3, 0.3, 0.3, 0.5),
            Err(MotzkinError::BulkNotNormalized { .. })
        ));
        assert!(matches!(
            MotzkinEnsemble::new(1, -0.1, 0.6, 0.5, 0.5),
            Err(MotzkinError::NegativeWeight { name: "w_up", .. })
        ));
        assert!(matches!(
            MotzkinEnsemble::new(1, 0.3, 0.3, 0.4, 1.2),
            Err(MotzkinError::BadBoundaryWeight(_))
        ));
        assert!(matches!(MotzkinEnsemble::new(0, 0.3, 0.3, 0.4, 0.3), Err(MotzkinError::NoColors)));
    }

    #[test]
    fn amplitudes_are_walk_path_weights() {
        let ens = MotzkinEnsemble::uniform_spin1();
        // Z_3 = 13/27 (hand-enumerated); weight of 000 is (2/3)³.
        let z = ens.partition_weight(3).unwrap();
        assert_relative_eq!(z, 13.0 / 27.0, epsilon = 1e-14);
        let amp = ens.amplitude(&[0, 0, 0]).unwrap();
        assert_relative_eq!(amp, (8.0f64 / 13.0).sqrt(), epsilon = 1e-14);
        // Mismatched pop color and wall violations have zero amplitude.
        let ens2 = MotzkinEnsemble::unbiased(2).unwrap();
        assert_eq!(ens2.path_weight(&[1, -2]).unwrap(), 0.0);
        assert_eq!(ens2.path_weight(&[-1, 1]).unwrap(), 0.0);
        assert_eq!(ens2.path_weight(&[1, 0, 0]).unwrap(), 0.0); // open stack
        assert!(matches!(
            ens2.path_weight(&[3, -3]),
            Err(MotzkinError::SymbolOutOfRange { symbol: 3, .. })
        ));
        // Color symmetry: swapping colors preserves amplitudes.
        let a12 = ens2.amplitude(&[1, 2, -2, -1]).unwrap();
        let a21 = ens2.amplitude(&[2, 1, -1, -2]).unwrap();
        assert_relative_eq!(a12, a21, epsilon = 1e-15);
    }

    #[test]
    fn amplitudes_match_stack_channel() {
        let ens = MotzkinEnsemble::unbiased(2).unwrap();
        let n = 6;
        let ch = ens.channel(n / 2 + 1).unwrap();
        let state = ch.sequential_generate(0, n, 0).unwrap();
        assert_relative_eq!(
            state.success_probability(),
            ens.partition_weight(n).unwrap(),
            epsilon = 1e-12
        );
        for w in enumerate_walks(n, 2).unwrap() {
            let direct = ens.amplitude(&w).unwrap();
            let via_channel = state.amplitude(&w).re;
            assert_relative_eq!(direct, via_channel, epsilon = 1e-12);
        }
    }

    /// Dense oracle: enumerate the state, group amplitudes into a
    /// prefix × suffix matrix, and diagonalize the smaller Gram matrix
    /// (both share the nonzero spectrum).
    fn dense_schmidt(ens: &MotzkinEnsemble, n: usize, cut: usize) -> Vec<f64> {
        let walks = enumerate_walks(n, ens.colors()).unwrap();
        let z = ens.partition_weight(n).unwrap();
        let mut prefixes = BTreeMap::new();
        let mut suffixes = BTreeMap::new();
        for w in &walks {
            let np = prefixes.len();
            prefixes.entry(w[..cut].to_vec()).or_insert(np);
            let ns = suffixes.len();
            suffixes.entry(w[cut..].to_vec()).or_insert(ns);
        }
        let mut m = DMatrix::<f64>::zeros(prefixes.len(), suffixes.len());
        for w in &walks {
            let amp = (ens.path_weight(w).unwrap() / z).sqrt();
            m[(prefixes[&w[..cut]], suffixes[&w[cut..]])] = amp;
        }
        let gram = if m.nrows() <= m.ncols() {
            &m * m.transpose()
        } else {
            m.transpose() * &m
        };
        let mut out: Vec<f64> = gram
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .filter(|&x| x > 1e-13)
            .collect();
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        out
    }

    #[test]
    fn schmidt_classes_match_dense_oracle_spin1() {
        let ens = MotzkinEnsemble::uniform_spin1();
        for (n, cut) in [(10, 2), (10, 5), (9, 4)] {
            let oracle = dense_schmidt(&ens, n, cut);
            let spec = ens.schmidt_spectrum(n, cut).unwrap().expanded(1 << 20).unwrap();
            let spec: Vec<f64> = spec.into_iter().filter(|&x| x > 1e-13).collect();
            assert_eq!(oracle.len(), spec.len(), "rank mismatch at n={n} cut={cut}");
            for (a, b) in oracle.iter().zip(&spec) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn schmidt_classes_match_dense_oracle_two_colors() {
        let ens = MotzkinEnsemble::unbiased(2).unwrap();
        for (n, cut) in [(10, 5), (10, 3)] {
            let oracle = dense_schmidt(&ens, n, cut);
            let spec = ens.schmidt_spectrum(n, cut).unwrap().expanded(1 << 20).unwrap();
            let spec: Vec<f64> = spec.into_iter().filter(|&x| x > 1e-13).collect();
            assert_eq!(oracle.len(), spec.len(), "rank mismatch at n={n} cut={cut}");
            for (a, b) in oracle.iter().zip(&spec) {
                assert_relative_eq!(a, b, epsilon = 1e-11);
            }
        }
        // A biased two-color ensemble, to exercise asymmetric weights.
        let pinned = MotzkinEnsemble::new(2, 0.1, 0.45, 0.35, 0.5).unwrap();
        let oracle = dense_schmidt(&pinned, 8, 4);
        let spec = pinned.schmidt_spectrum(8, 4).unwrap().expanded(1 << 16).unwrap();
        let spec: Vec<f64> = spec.into_iter().filter(|&x| x > 1e-13).collect();
        assert_eq!(oracle.len(), spec.len());
        for (a, b) in oracle.iter().zip(&spec) {
            assert_relative_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn schmidt_spectrum_matches_channel_cross_oracle() {
        let ens = MotzkinEnsemble::unbiased(2).unwrap();
        let n = 8;
        let ch = ens.channel(n / 2 + 1).unwrap();
        let state = ch.sequential_generate(0, n, 0).unwrap();
        for cut in 1..n {
            let direct = state.schmidt_values(cut).unwrap();
            let direct: Vec<f64> = direct.into_iter().filter(|&x| x > 1e-13).collect();
            let spec = ens.schmidt_spectrum(n, cut).unwrap();
            let expanded = spec.expanded(1 << 16).unwrap();
            let expanded: Vec<f64> = expanded.into_iter().filter(|&x| x > 1e-13).collect();
            assert_eq!(direct.len(), expanded.len(), "cut {cut}");
            for (a, b) in direct.iter().zip(&expanded) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
            // And the entropy accessors agree with the expanded spectrum.
            assert_relative_eq!(
                spec.entropy(),
                crate::util::shannon_entropy(&expanded),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                spec.renyi(2.0),
                crate::util::renyi_entropy(&expanded, 2.0),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn partition_is_cut_independent() {
        let ens = MotzkinEnsemble::unbiased(2).unwrap();
        let n = 64;
        let z = ens.partition_weight(n).unwrap();
        for cut in [1, 7, 16, 32, 63] {
            let spec = ens.schmidt_spectrum(n, cut).unwrap();
            assert_relative_eq!(spec.partition(), z, epsilon = 1e-13);
        }
    }

    #[test]
    fn entropy_scaling_runs_and_validates() {
        let ens = MotzkinEnsemble::unbiased(2).unwrap();
        let n = 256;
        let cuts = vec![8, 16, 32, 64];
        let scaling = ens.entropy_scaling(n, &cuts).unwrap();
        // Critical colored ensemble: entropies grow with the cut.
        for w in scaling.entanglement.windows(2) {
            assert!(w[1] > w[0]);
        }
        for (s1, s2) in scaling.entanglement.iter().zip(&scaling.renyi2) {
            assert!(s2 < s1, "Rényi-2 must lie below the entanglement entropy");
        }
        // Mean height grows diffusively.
        assert!(scaling.mean_height[3] > scaling.mean_height[0] * 1.8);

        assert!(matches!(
            ens.entropy_scaling(n, &[8, 16, 32]),
            Err(MotzkinError::TooFewCuts(3))
        ));
        assert!(matches!(
            ens.entropy_scaling(n, &[8, 16, 32, 65]),
            Err(MotzkinError::CutTooDeep { cut: 65, .. })
        ));
        assert!(matches!(
            ens.schmidt_spectrum(8, 0),
            Err(MotzkinError::BadCut { .. })
        ));
    }

    #[test]
    fn pinned_ensemble_entropy_saturates() {
        let pinned = MotzkinEnsemble::new(2, 0.1, 0.45, 0.35, 0.5).unwrap();
        let n = 768;
        // Both cuts sit far past the walk's relaxation time (~20 ticks), so
        // the crossing-height distribution is stationary at each.
        let s_small = pinned.schmidt_spectrum(n, 128).unwrap().entropy();
        let s_big = pinned.schmidt_spectrum(n, 256).unwrap().entropy();
        assert!((s_big - s_small).abs() < 0.02, "pinned entropy keeps growing: {s_small} vs {s_big}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn states_are_normalized_for_random_weights(
            s in 1usize..4,
            up_share in 0.05f64..0.3,
            down_share in 0.1f64..0.5,
            boundary in 0.1f64..0.9,
        ) {
            let w_up = up_share / s as f64;
            let w_down = down_share;
            let w_flat = 1.0 - up_share - down_share;
            prop_assume!(w_flat > 0.0);
            let ens = MotzkinEnsemble::new(s, w_up, w_down, w_flat, boundary).unwrap();
            let n = 6;
            let total: f64 = enumerate_walks(n, s)
                .unwrap()
                .iter()
                .map(|w| ens.amplitude(w).unwrap().powi(2))
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-10, "norm {total}");
            // Schmidt classes are a probability distribution at every cut.
            for cut in 1..n {
                let spec = ens.schmidt_spectrum(n, cut).unwrap();
                let sum: f64 = spec.class_probabilities().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}
