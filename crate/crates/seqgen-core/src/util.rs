//! Small numeric helpers shared across modules.

/// Kahan–Babuška compensated accumulator.
///
/// Long entropy sums over `~10^3`–`10^6` terms of wildly varying magnitude
/// lose several digits under naive accumulation; compensated summation keeps
/// the error at a few ulps independent of length.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of f64.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Shannon entropy `-Σ p ln p` of a (sub)normalized distribution, skipping
/// zero and negative entries (eigen-solvers occasionally return -1e-17).
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &p in probs {
        if p > 0.0 {
            acc.add(-p * p.ln());
        }
    }
    acc.value()
}

/// Rényi entropy of order `n` (n ≠ 1) of a probability vector.
pub fn renyi_entropy(probs: &[f64], n: f64) -> f64 {
    assert!(n > 0.0 && (n - 1.0).abs() > 1e-12, "order must be > 0 and ≠ 1");
    let s = kahan_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| p.powf(n)));
    s.ln() / (1.0 - n)
}

/// Roughly geometrically spaced integers in `[lo, hi]`, deduplicated and
/// sorted. Used to pick sample sizes for scaling fits.
pub fn log_spaced_integers(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo && count >= 1);
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (llo + f * (lhi - llo)).exp().round() as usize
        })
        .map(|v| v.clamp(lo, hi))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
