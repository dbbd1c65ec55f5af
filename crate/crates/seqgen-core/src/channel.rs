//! Quantum channels as sequential state generators.
//!
//! A [`KrausChannel`] is a set of Kraus operators, each tagged with the
//! classical symbol it radiates. Iterating the channel on an emitter and
//! post-selecting the final emitter state produces a pure many-body state of
//! the radiated symbols ([`KrausChannel::sequential_generate`]); the same
//! object run as a density-matrix map ([`KrausChannel::apply`] /
//! [`KrausChannel::apply_dual`]) gives Rényi entropies of any contiguous cut
//! of that state without ever enumerating it
//! ([`KrausChannel::renyi_entropy`]):
//!
//! ```text
//! S_n(ℓ) = (1 − n)^{-1} ln( Tr[(ρ_ℓ O)^n] / (Tr[ρ_ℓ O])^n ),
//! ρ_ℓ = 𝓔^ℓ(|start⟩⟨start|),  O = (𝓔*)^{N−ℓ}(|final⟩⟨final|).
//! ```
//!
//! Kraus operators are stored sparsely (triplets); emitters here are stack
//! or height registers whose operators have O(dim) nonzeros, so one channel
//! application costs O(nnz · dim) instead of dim³.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::rng::{standard_normal, trial_rng};
use crate::util::kahan_sum;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("kraus operator {index} is {rows}x{cols}, emitter dimension is {dim}")]
    DimensionMismatch { index: usize, rows: usize, cols: usize, dim: usize },
    #[error("kraus set is not trace preserving: max |Σ K†K − I| = {defect:.3e}")]
    NotComplete { defect: f64 },
    #[error("emitted symbol {symbol} is attached to more than one kraus operator")]
    DuplicateSymbol { symbol: i64 },
    #[error("channel needs at least one kraus operator")]
    EmptyKraus,
    #[error("emitter state index {index} out of range for dimension {dim}")]
    NoSuchState { index: usize, dim: usize },
    #[error("matrix is not hermitian: max |A − A†| = {defect:.3e}")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPositive { min_eig: f64 },
    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("rényi order must be an integer ≥ 2, got {0}")]
    OrderTooSmall(u32),
    #[error("cut must satisfy 1 ≤ cut < length, got cut {cut} of length {length}")]
    BadCut { cut: usize, length: usize },
    #[error("post-selection weight vanishes: no emission string connects start to final")]
    PostSelectionImpossible,
    #[error("branch count {count} exceeds cap {cap}; emitter alphabet too rich for enumeration")]
    BranchOverflow { count: usize, cap: usize },
    #[error("steady state is not unique: {n_peripheral} transfer eigenvalues within {tol:.1e} of the unit circle")]
    DegenerateSteadyState { n_peripheral: usize, tol: f64 },
    #[error("power iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NotConverged { residual: f64, iters: usize },
    #[error("symbol relabeling is not injective on the support")]
    RelabelCollision,
    #[error("channel serialization: {0}")]
    Serde(String),
}

/// One Kraus operator in triplet form, tagged with its radiated symbol.
#[derive(Debug, Clone)]
pub struct KrausOp {
    pub symbol: i64,
    /// `(row, col, value)` triplets; rows/cols index emitter basis states.
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl KrausOp {
    /// `K · v`.
    fn apply_vec(&self, v: &DVector<Complex64>, out: &mut DVector<Complex64>) {
        out.fill(Complex64::ZERO);
        for &(r, c, val) in &self.entries {
            out[r] += val * v[c];
        }
    }

    /// `K · M` into `out` (assumed zeroed).
    fn mul_left(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = m.ncols();
        for &(r, c, val) in &self.entries {
            for j in 0..n {
                out[(r, j)] += val * m[(c, j)];
            }
        }
    }

    /// `M · K†` into `out` (assumed zeroed).
    fn mul_right_dagger(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = m.nrows();
        for &(r, c, val) in &self.entries {
            let vc = val.conj();
            for i in 0..n {
                out[(i, r)] += m[(i, c)] * vc;
            }
        }
    }

    /// `K† · M` into `out` (assumed zeroed).
    fn mul_left_dagger(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = m.ncols();
        for &(r, c, val) in &self.entries {
            let vc = val.conj();
            for j in 0..n {
                out[(c, j)] += vc * m[(r, j)];
            }
        }
    }

    /// `M · K` into `out` (assumed zeroed).
    fn mul_right(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = m.nrows();
        for &(r, c, val) in &self.entries {
            for i in 0..n {
                out[(i, c)] += m[(i, r)] * val;
            }
        }
    }
}

/// Trace-preserving channel whose Kraus operators radiate classical symbols.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    ops: Vec<KrausOp>,
}

/// Completeness tolerance for `Σ K†K = I` at construction.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Branch amplitudes below this are pruned during sequential generation.
pub const BRANCH_PRUNE_TOL: f64 = 1e-14;

const BRANCH_CAP: usize = 4_000_000;

impl KrausChannel {
    /// Build from dense matrices; zero entries are dropped.
    pub fn new(dim: usize, ops: Vec<(i64, DMatrix<Complex64>)>) -> Result<Self, ChannelError> {
        let sparse = ops
            .into_iter()
            .map(|(symbol, m)| {
                let mut entries = Vec::new();
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        if m[(r, c)] != Complex64::ZERO {
                            entries.push((r, c, m[(r, c)]));
                        }
                    }
                }
                (symbol, m.nrows(), m.ncols(), entries)
            })
            .collect::<Vec<_>>();
        let with_shapes = sparse
            .into_iter()
            .map(|(symbol, rows, cols, entries)| (symbol, Some((rows, cols)), entries))
            .collect();
        Self::build(dim, with_shapes)
    }

    /// Build directly from triplets.
    pub fn from_sparse(
        dim: usize,
        ops: Vec<(i64, Vec<(usize, usize, Complex64)>)>,
    ) -> Result<Self, ChannelError> {
        let with_shapes = ops.into_iter().map(|(s, e)| (s, None, e)).collect();
        Self::build(dim, with_shapes)
    }

    fn build(
        dim: usize,
        ops: Vec<(i64, Option<(usize, usize)>, Vec<(usize, usize, Complex64)>)>,
    ) -> Result<Self, ChannelError> {
        if ops.is_empty() {
            return Err(ChannelError::EmptyKraus);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut built = Vec::with_capacity(ops.len());
        for (index, (symbol, shape, entries)) in ops.into_iter().enumerate() {
            if let Some((rows, cols)) = shape {
                if rows != dim || cols != dim {
                    return Err(ChannelError::DimensionMismatch { index, rows, cols, dim });
                }
            }
            for &(r, c, _) in &entries {
                if r >= dim || c >= dim {
                    return Err(ChannelError::DimensionMismatch {
                        index,
                        rows: r + 1,
                        cols: c + 1,
                        dim,
                    });
                }
            }
            if !seen.insert(symbol) {
                return Err(ChannelError::DuplicateSymbol { symbol });
            }
            built.push(KrausOp { symbol, entries });
        }
        let channel = Self { dim, ops: built };
        let defect = channel.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(ChannelError::NotComplete { defect });
        }
        Ok(channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[KrausOp] {
        &self.ops
    }

    pub fn symbols(&self) -> Vec<i64> {
        self.ops.iter().map(|k| k.symbol).collect()
    }

    /// Max-norm distance of `Σ K†K` from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for op in &self.ops {
            for &(r, c1, v1) in &op.entries {
                for &(r2, c2, v2) in &op.entries {
                    if r == r2 {
                        acc[(c1, c2)] += v1.conj() * v2;
                    }
                }
            }
        }
        let mut defect: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
                defect = defect.max((acc[(i, j)] - target).norm());
            }
        }
        defect
    }

    /// `𝓔(ρ) = Σ K ρ K†`.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let mut tmp = DMatrix::zeros(self.dim, self.dim);
        for op in &self.ops {
            tmp.fill(Complex64::ZERO);
            op.mul_left(rho, &mut tmp);
            op.mul_right_dagger(&tmp, &mut out);
        }
        out
    }

    /// Heisenberg-picture dual, `𝓔*(O) = Σ K† O K`.
    pub fn apply_dual(&self, obs: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let mut tmp = DMatrix::zeros(self.dim, self.dim);
        for op in &self.ops {
            tmp.fill(Complex64::ZERO);
            op.mul_left_dagger(obs, &mut tmp);
            op.mul_right(&tmp, &mut out);
        }
        out
    }

    /// Enumerate every emission branch of `n` iterations from basis state
    /// `start`, post-select the emitter on basis state `final_state`, and
    /// return the normalized radiated state together with the raw
    /// post-selection probability.
    pub fn sequential_generate(
        &self,
        start: usize,
        n: usize,
        final_state: usize,
    ) -> Result<RadiatedState, ChannelError> {
        for idx in [start, final_state] {
            if idx >= self.dim {
                return Err(ChannelError::NoSuchState { index: idx, dim: self.dim });
            }
        }
        let mut v0 = DVector::<Complex64>::zeros(self.dim);
        v0[start] = Complex64::ONE;
        let mut branches: Vec<(Vec<i64>, DVector<Complex64>)> = vec![(Vec::new(), v0)];
        let mut scratch = DVector::<Complex64>::zeros(self.dim);
        for _ in 0..n {
            let mut next = Vec::with_capacity(branches.len() * self.ops.len());
            for (string, vec) in &branches {
                for op in &self.ops {
                    op.apply_vec(vec, &mut scratch);
                    if scratch.iter().any(|z| z.norm_sqr() > BRANCH_PRUNE_TOL * BRANCH_PRUNE_TOL) {
                        let mut s = string.clone();
                        s.push(op.symbol);
                        next.push((s, scratch.clone()));
                    }
                }
            }
            if next.len() > BRANCH_CAP {
                return Err(ChannelError::BranchOverflow { count: next.len(), cap: BRANCH_CAP });
            }
            branches = next;
        }
        let mut amps = BTreeMap::new();
        for (string, vec) in branches {
            let a = vec[final_state];
            if a.norm() > BRANCH_PRUNE_TOL {
                amps.insert(string, a);
            }
        }
        if amps.is_empty() {
            return Err(ChannelError::PostSelectionImpossible);
        }
        let success = kahan_sum(amps.values().map(|a| a.norm_sqr()));
        let scale = success.sqrt().recip();
        for a in amps.values_mut() {
            *a *= scale;
        }
        Ok(RadiatedState { length: n, amps, success_probability: success })
    }

    /// Rényi entropy of the first `cut` radiated symbols of an `n_total`-step
    /// post-selected run, via the dual-picture trace formula (no enumeration).
    pub fn renyi_entropy(
        &self,
        start: usize,
        final_state: usize,
        n_total: usize,
        cut: usize,
        order: u32,
    ) -> Result<f64, ChannelError> {
        for idx in [start, final_state] {
            if idx >= self.dim {
                return Err(ChannelError::NoSuchState { index: idx, dim: self.dim });
            }
        }
        if order < 2 {
            return Err(ChannelError::OrderTooSmall(order));
        }
        if cut == 0 || cut >= n_total {
            return Err(ChannelError::BadCut { cut, length: n_total });
        }
        let mut rho = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        rho[(start, start)] = Complex64::ONE;
        for _ in 0..cut {
            rho = self.apply(&rho);
        }
        let mut obs = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        obs[(final_state, final_state)] = Complex64::ONE;
        for _ in 0..(n_total - cut) {
            obs = self.apply_dual(&obs);
        }
        let t = &rho * &obs;
        let tr1 = t.trace();
        if tr1.norm() < 1e-300 {
            return Err(ChannelError::PostSelectionImpossible);
        }
        let mut power = t.clone();
        for _ in 1..order {
            power = &power * &t;
        }
        let trn = power.trace();
        let ratio = trn / tr1.powu(order);
        Ok(ratio.re.max(f64::MIN_POSITIVE).ln() / (1.0 - f64::from(order)))
    }

    /// Dense transfer matrix `T[(i,j),(k,l)] = Σ_K K[i,k] conj(K[j,l])`,
    /// acting on row-major vectorized operators.
    fn transfer_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let mut t = DMatrix::<Complex64>::zeros(d * d, d * d);
        for op in &self.ops {
            for &(i, k, v) in &op.entries {
                for &(j, l, w) in &op.entries {
                    t[(i * d + j, k * d + l)] += v * w.conj();
                }
            }
        }
        t
    }

    /// Moduli of the transfer-matrix spectrum, descending. Exact dense
    /// computation, intended for small emitters (`dim ≤ 16`).
    pub fn transfer_moduli(&self) -> Vec<f64> {
        let t = self.transfer_matrix();
        let mut moduli = complex_matrix_eigenmoduli(&t);
        moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
        moduli
    }

    /// Unique fixed point of the channel, by power iteration with a
    /// peripheral-spectrum uniqueness check.
    ///
    /// For emitters up to dimension 16 uniqueness is decided from the exact
    /// transfer spectrum; larger emitters fall back to two independent power
    /// iterations that must agree.
    pub fn steady_state(&self) -> Result<DMatrix<Complex64>, ChannelError> {
        const GAP_TOL: f64 = 1e-8;
        if self.dim <= 16 {
            let moduli = self.transfer_moduli();
            let peripheral = moduli.iter().filter(|&&m| m > 1.0 - GAP_TOL).count();
            if peripheral > 1 {
                return Err(ChannelError::DegenerateSteadyState {
                    n_peripheral: peripheral,
                    tol: GAP_TOL,
                });
            }
        }
        let uniform = DMatrix::<Complex64>::identity(self.dim, self.dim)
            .map(|z| z / Complex64::from(self.dim as f64));
        let a = self.power_iterate(uniform)?;
        if self.dim > 16 {
            let b = self.power_iterate(random_density(self.dim, 0x5eed))?;
            let diff = (&a - &b).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            if diff > 1e-8 {
                return Err(ChannelError::DegenerateSteadyState { n_peripheral: 2, tol: diff });
            }
        }
        Ok(a)
    }

    fn power_iterate(&self, start: DMatrix<Complex64>) -> Result<DMatrix<Complex64>, ChannelError> {
        let mut rho = start;
        let max_iters = 200_000;
        for iters in 1..=max_iters {
            let mut next = self.apply(&rho);
            // Trace renormalization and hermitization absorb roundoff.
            let tr = next.trace().re;
            next /= Complex64::from(tr);
            let herm = (next.clone() + next.adjoint()) * Complex64::from(0.5);
            let residual = (&herm - &rho).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            rho = herm;
            if residual < 1e-13 {
                return Ok(rho);
            }
            if iters == max_iters {
                return Err(ChannelError::NotConverged { residual, iters });
            }
        }
        unreachable!()
    }

    /// Serialize to the on-disk JSON schema.
    pub fn to_json(&self) -> String {
        let doc = schema::ChannelDoc {
            emitter_dim: self.dim,
            kraus: self
                .ops
                .iter()
                .map(|op| schema::KrausDoc {
                    symbol: op.symbol,
                    entries: op
                        .entries
                        .iter()
                        .map(|&(r, c, v)| (r, c, v.re, v.im))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("channel schema serializes")
    }

    /// Parse the on-disk JSON schema; the completeness check reruns.
    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        let doc: schema::ChannelDoc =
            serde_json::from_str(text).map_err(|e| ChannelError::Serde(e.to_string()))?;
        let ops = doc
            .kraus
            .into_iter()
            .map(|k| {
                let entries = k
                    .entries
                    .into_iter()
                    .map(|(r, c, re, im)| (r, c, Complex64::new(re, im)))
                    .collect();
                (k.symbol, entries)
            })
            .collect();
        Self::from_sparse(doc.emitter_dim, ops)
    }
}

mod schema {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    pub struct ChannelDoc {
        pub emitter_dim: usize,
        pub kraus: Vec<KrausDoc>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct KrausDoc {
        pub symbol: i64,
        /// `(row, col, re, im)` triplets.
        pub entries: Vec<(usize, usize, f64, f64)>,
    }
}

/// Validated density operator helpers.
pub mod density {
    use super::*;

    /// Hermiticity / positivity / unit-trace validation for emitter states.
    pub fn validate_state(rho: &DMatrix<Complex64>) -> Result<(), ChannelError> {
        let defect =
            (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if defect > 1e-12 {
            return Err(ChannelError::NotHermitian { defect });
        }
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > 1e-9 {
            return Err(ChannelError::TraceNotOne { trace });
        }
        let eigs = hermitian_eigenvalues(rho);
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(ChannelError::NotPositive { min_eig });
        }
        Ok(())
    }

    /// `|index⟩⟨index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<DMatrix<Complex64>, ChannelError> {
        if index >= dim {
            return Err(ChannelError::NoSuchState { index, dim });
        }
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(index, index)] = Complex64::ONE;
        Ok(rho)
    }
}

/// Eigenvalues of a hermitian complex matrix, via the real symmetric
/// embedding `[[A, −B], [B, A]]` of `H = A + iB` (each eigenvalue of `H`
/// appears twice in the embedding).
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            real[(i, j)] = z.re;
            real[(i + n, j + n)] = z.re;
            real[(i, j + n)] = -z.im;
            real[(i + n, j)] = z.im;
        }
    }
    let mut eigs: Vec<f64> = real.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs.into_iter().step_by(2).collect()
}

/// Moduli of the eigenvalues of a general complex matrix, via the real
/// embedding (spectrum of the embedding = spec(M) ∪ conj(spec(M))).
fn complex_matrix_eigenmoduli(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            real[(i, j)] = z.re;
            real[(i + n, j + n)] = z.re;
            real[(i, j + n)] = -z.im;
            real[(i + n, j)] = z.im;
        }
    }
    let eigs = real.complex_eigenvalues();
    let mut moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    moduli.into_iter().step_by(2).collect()
}

/// Pure state of the radiated symbol string after post-selection.
#[derive(Debug, Clone)]
pub struct RadiatedState {
    length: usize,
    amps: BTreeMap<Vec<i64>, Complex64>,
    success_probability: f64,
}

impl RadiatedState {
    pub fn from_amplitudes(
        length: usize,
        amps: BTreeMap<Vec<i64>, Complex64>,
        success_probability: f64,
    ) -> Self {
        Self { length, amps, success_probability }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Raw probability that post-selection succeeds.
    pub fn success_probability(&self) -> f64 {
        self.success_probability
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        kahan_sum(self.amps.values().map(|a| a.norm_sqr()))
    }

    pub fn amplitude(&self, string: &[i64]) -> Complex64 {
        self.amps.get(string).copied().unwrap_or(Complex64::ZERO)
    }

    /// Strings in lexicographic order with their amplitudes.
    pub fn iter(&self) -> impl Iterator<Item = (&[i64], Complex64)> {
        self.amps.iter().map(|(s, &a)| (s.as_slice(), a))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &RadiatedState) -> f64 {
        let mut ip = Complex64::ZERO;
        for (s, a) in &self.amps {
            ip += a.conj() * other.amplitude(s);
        }
        ip.norm_sqr()
    }

    /// Apply a symbol relabeling; errors if the map merges any two symbols in
    /// use (which would change the state rather than rename its basis).
    pub fn relabel(&self, map: impl Fn(i64) -> i64) -> Result<RadiatedState, ChannelError> {
        let mut used = std::collections::BTreeSet::new();
        for s in self.amps.keys() {
            used.extend(s.iter().copied());
        }
        let mut images = std::collections::BTreeSet::new();
        for &sym in &used {
            if !images.insert(map(sym)) {
                return Err(ChannelError::RelabelCollision);
            }
        }
        let amps = self
            .amps
            .iter()
            .map(|(s, &a)| (s.iter().map(|&x| map(x)).collect(), a))
            .collect();
        Ok(RadiatedState {
            length: self.length,
            amps,
            success_probability: self.success_probability,
        })
    }

    /// Squared Schmidt values across `first cut symbols | rest`, descending,
    /// normalized to Σλ = 1.
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<f64>, ChannelError> {
        if cut == 0 || cut >= self.length {
            return Err(ChannelError::BadCut { cut, length: self.length });
        }
        let mut prefixes = BTreeMap::new();
        let mut suffixes = BTreeMap::new();
        for s in self.amps.keys() {
            let np = prefixes.len();
            prefixes.entry(s[..cut].to_vec()).or_insert(np);
            let ns = suffixes.len();
            suffixes.entry(s[cut..].to_vec()).or_insert(ns);
        }
        let mut m = DMatrix::<Complex64>::zeros(prefixes.len(), suffixes.len());
        for (s, &a) in &self.amps {
            m[(prefixes[&s[..cut]], suffixes[&s[cut..]])] = a;
        }
        // Schmidt values = spectrum of the prefix Gram matrix M M†.
        let small = prefixes.len() <= suffixes.len();
        let gram = if small { &m * m.adjoint() } else { m.adjoint() * &m };
        let mut eigs = hermitian_eigenvalues(&gram);
        let total: f64 = kahan_sum(eigs.iter().copied());
        for e in &mut eigs {
            *e = (*e / total).max(0.0);
        }
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(eigs)
    }

    pub fn renyi_entropy(&self, cut: usize, order: u32) -> Result<f64, ChannelError> {
        if order < 2 {
            return Err(ChannelError::OrderTooSmall(order));
        }
        let lambda = self.schmidt_values(cut)?;
        Ok(crate::util::renyi_entropy(&lambda, f64::from(order)))
    }

    pub fn von_neumann_entropy(&self, cut: usize) -> Result<f64, ChannelError> {
        let lambda = self.schmidt_values(cut)?;
        Ok(crate::util::shannon_entropy(&lambda))
    }

    /// Largest total Schmidt weight discarded by a rank-`chi` truncation,
    /// maximized over all cuts.
    pub fn max_truncation_weight(&self, chi: usize) -> Result<f64, ChannelError> {
        let mut worst = 0.0f64;
        for cut in 1..self.length {
            let lambda = self.schmidt_values(cut)?;
            let discarded: f64 = lambda.iter().skip(chi).sum();
            worst = worst.max(discarded);
        }
        Ok(worst)
    }
}

fn random_density(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = trial_rng(seed, "steady-start", 0);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho / Complex64::from(tr)
}

// ---------------------------------------------------------------------------
// Stock channels.
// ---------------------------------------------------------------------------

/// Two-symbol GHZ-style emitter: `K_± = |±⟩⟨±|` radiating ±1. Post-selected
/// runs produce the length-N cat state, maximally long-range correlated.
pub fn ghz_channel() -> KrausChannel {
    let h = Complex64::from(0.5);
    KrausChannel::from_sparse(
        2,
        vec![
            (1, vec![(0, 0, h), (0, 1, h), (1, 0, h), (1, 1, h)]),
            (-1, vec![(0, 0, h), (0, 1, -h), (1, 0, -h), (1, 1, h)]),
        ],
    )
    .expect("ghz kraus set is complete")
}

/// Single-qubit depolarizing channel `{I, X, Y, Z}/2`, symbols 0..3.
pub fn depolarizing_channel() -> KrausChannel {
    let h = Complex64::from(0.5);
    let ih = Complex64::new(0.0, 0.5);
    KrausChannel::from_sparse(
        2,
        vec![
            (0, vec![(0, 0, h), (1, 1, h)]),
            (1, vec![(0, 1, h), (1, 0, h)]),
            (2, vec![(0, 1, -ih), (1, 0, ih)]),
            (3, vec![(0, 0, h), (1, 1, -h)]),
        ],
    )
    .expect("depolarizing kraus set is complete")
}

/// Amplitude damping with decay probability `gamma`, symbols {0: no decay,
/// 1: decay}.
pub fn amplitude_damping_channel(gamma: f64) -> Result<KrausChannel, ChannelError> {
    KrausChannel::from_sparse(
        2,
        vec![
            (
                0,
                vec![
                    (0, 0, Complex64::ONE),
                    (1, 1, Complex64::from((1.0 - gamma).sqrt())),
                ],
            ),
            (1, vec![(0, 1, Complex64::from(gamma.sqrt()))]),
        ],
    )
}

/// Classically dephased Markov chain: one Kraus `√M[j][i] |j⟩⟨i|` per
/// transition, radiating symbol `i·dim + j`. `m` is row stochastic.
pub fn markov_chain_channel(m: &[Vec<f64>]) -> Result<KrausChannel, ChannelError> {
    let dim = m.len();
    let mut ops = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                ops.push((
                    (i * dim + j) as i64,
                    vec![(j, i, Complex64::from(p.sqrt()))],
                ));
            }
        }
    }
    KrausChannel::from_sparse(dim, ops)
}

/// Haar-ish random isometry channel: QR of a complex Gaussian `(d·χ) × χ`
/// matrix, split into `d` Kraus blocks radiating symbols `0..d`.
pub fn random_isometry_channel(chi: usize, d: usize, seed: u64) -> KrausChannel {
    let mut rng = trial_rng(seed, "isometry", 0);
    let g = DMatrix::<Complex64>::from_fn(d * chi, chi, |_, _| {
        Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng))
    });
    let qr = g.qr();
    let q = qr.q();
    let ops = (0..d)
        .map(|a| {
            let block = q.rows(a * chi, chi).into_owned();
            (a as i64, block)
        })
        .collect();
    KrausChannel::new(chi, ops).expect("Q blocks of a QR isometry are complete")
}

/// Spin-1 height emitter: the walker's position is a stack height, pushes
/// radiate +1, pops −1, flats 0. At the truncation top the push is folded
/// into the flat move, so the Kraus set stays complete; size `n_max` beyond
/// the reachable height to keep generated strings exact.
pub fn spin1_motzkin_channel(
    w_up: f64,
    w_down: f64,
    w_flat: f64,
    w_up_boundary: f64,
    n_max: usize,
) -> Result<KrausChannel, ChannelError> {
    let bulk_defect = (w_up + w_down + w_flat - 1.0).abs();
    if bulk_defect > 1e-12 {
        return Err(ChannelError::NotComplete { defect: bulk_defect });
    }
    if !(0.0..=1.0).contains(&w_up_boundary) {
        return Err(ChannelError::NotComplete { defect: w_up_boundary });
    }
    let w_flat_boundary = 1.0 - w_up_boundary;
    let top = n_max - 1;
    let mut push = Vec::new();
    let mut pop = Vec::new();
    let mut flat = Vec::new();
    for h in 0..n_max {
        if h < top {
            let w = if h == 0 { w_up_boundary } else { w_up };
            push.push((h + 1, h, Complex64::from(w.sqrt())));
        }
        if h > 0 {
            pop.push((h - 1, h, Complex64::from(w_down.sqrt())));
        }
        let wf = if h == 0 {
            w_flat_boundary
        } else if h == top {
            w_flat + w_up // fold the truncated push into staying put
        } else {
            w_flat
        };
        flat.push((h, h, Complex64::from(wf.sqrt())));
    }
    KrausChannel::from_sparse(n_max, vec![(1, push), (-1, pop), (0, flat)])
}

/// Colored stack emitter with `s` colors: basis states are stacks of height
/// ≤ `max_height`, push of color `c` radiates `+c`, pop radiates `−c`, flat
/// radiates 0. Bulk weights: per-color push `w_up` with
/// `s·w_up + w_down + w_flat = 1`; at the empty stack each color pushes with
/// weight `w_up_total/s` and flat takes `1 − w_up_total`. Pushes at the
/// height cap fold into the flat move.
pub fn colored_stack_channel(
    s: usize,
    w_up: f64,
    w_down: f64,
    w_flat: f64,
    w_up_total_boundary: f64,
    max_height: usize,
) -> Result<KrausChannel, ChannelError> {
    let bulk_defect = (s as f64 * w_up + w_down + w_flat - 1.0).abs();
    if bulk_defect > 1e-12 {
        return Err(ChannelError::NotComplete { defect: bulk_defect });
    }
    // Enumerate stacks breadth-first by height; index = position in order.
    let mut stacks: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_height {
        let mut next = Vec::new();
        for st in &frontier {
            for c in 1..=s as u8 {
                let mut grown = st.clone();
                grown.push(c);
                next.push(grown);
            }
        }
        stacks.extend(next.iter().cloned());
        frontier = next;
    }
    let index: BTreeMap<Vec<u8>, usize> =
        stacks.iter().cloned().enumerate().map(|(i, st)| (st, i)).collect();
    let dim = stacks.len();

    let w_flat_boundary = 1.0 - w_up_total_boundary;
    let per_color_boundary = w_up_total_boundary / s as f64;
    let mut flat = Vec::new();
    let mut pushes: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); s];
    let mut pops: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); s];
    for (i, st) in stacks.iter().enumerate() {
        let at_cap = st.len() == max_height;
        let wf = if st.is_empty() {
            w_flat_boundary
        } else if at_cap {
            w_flat + s as f64 * w_up
        } else {
            w_flat
        };
        if wf > 0.0 {
            flat.push((i, i, Complex64::from(wf.sqrt())));
        }
        if !at_cap {
            let w = if st.is_empty() { per_color_boundary } else { w_up };
            for c in 1..=s as u8 {
                let mut grown = st.clone();
                grown.push(c);
                pushes[c as usize - 1].push((index[&grown], i, Complex64::from(w.sqrt())));
            }
        }
        if let Some(&c) = st.last() {
            let shrunk = st[..st.len() - 1].to_vec();
            pops[c as usize - 1].push((index[&shrunk], i, Complex64::from(w_down.sqrt())));
        }
    }
    let mut ops = vec![(0i64, flat)];
    for c in 1..=s {
        ops.push((c as i64, std::mem::take(&mut pushes[c - 1])));
        ops.push((-(c as i64), std::mem::take(&mut pops[c - 1])));
    }
    KrausChannel::from_sparse(dim, ops)
}
