//! Compensated floating-point accumulation.
//!
//! Population position sums can mix magnitudes badly (many particles far from
//! the origin versus a small centered residual), and the replicate reductions
//! must not depend on how work was scheduled. A Neumaier accumulator keeps the
//! rounding error of every addition in a running compensation term, so a fixed
//! visiting order yields one well-defined, nearly exact total.

use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
///
/// `value()` returns the running sum plus the accumulated compensation. The
/// accumulator is insensitive to the case where the addend is larger in
/// magnitude than the running sum, which plain Kahan summation mishandles.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

/// Sums an iterator of `f64` with compensation, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(compensated_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn matches_exact_sum_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(compensated_sum(xs), 500500.0);
    }

    #[test]
    fn survives_catastrophic_cancellation() {
        let mut acc = NeumaierSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(1.0);
        acc.add(-1e100);
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn add_assign_matches_add() {
        let mut a = NeumaierSum::new();
        let mut b = NeumaierSum::new();
        for x in [0.1, 0.2, 0.3, 1e15, -1e15] {
            a.add(x);
            b += x;
        }
        assert_eq!(a.value(), b.value());
    }

    #[test]
    fn tighter_than_naive_on_small_increments() {
        let n = 1_000_000;
        let x = 0.1f64;
        let naive: f64 = (0..n).map(|_| x).sum();
        let comp = compensated_sum((0..n).map(|_| x));
        let exact = 100_000.0;
        assert!((comp - exact).abs() <= (naive - exact).abs());
        assert!((comp - exact).abs() < 1e-9);
    }
}
