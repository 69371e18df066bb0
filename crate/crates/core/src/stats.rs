//! Single-pass mean/variance accumulation with pairwise merging.

use crate::num::Real;

/// Welford accumulator. Partial accumulators merge with Chan's update, so a
/// fixed partition merged in a fixed order gives bit-identical results no
/// matter which thread filled which partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Real> Default for RunningStats<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> RunningStats<T> {
    pub fn new() -> Self {
        RunningStats { n: 0, mean: T::zero(), m2: T::zero() }
    }

    pub fn push(&mut self, x: T) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::count(self.n);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let (na, nb, nn) = (T::count(self.n), T::count(other.n), T::count(n));
        let delta = other.mean - self.mean;
        self.mean = self.mean + delta * nb / nn;
        self.m2 = self.m2 + other.m2 + delta * delta * na * nb / nn;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Option<T> {
        (self.n > 0).then_some(self.mean)
    }

    /// Sample variance with the `n - 1` denominator; `None` below two values.
    pub fn variance(&self) -> Option<T> {
        (self.n > 1).then(|| self.m2 / T::count(self.n - 1))
    }

    pub fn sd(&self) -> Option<T> {
        self.variance().map(|v| v.sqrt())
    }
}

impl<T: Real> FromIterator<T> for RunningStats<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_samples() {
        let empty = RunningStats::<f64>::new();
        assert_eq!(empty.mean(), None);
        let one: RunningStats<f64> = [3.0].into_iter().collect();
        assert_eq!(one.mean(), Some(3.0));
        assert_eq!(one.sd(), None);
        let s: RunningStats<f64> = [-1.0, 0.0, 1.0, 2.0].into_iter().collect();
        assert_eq!(s.mean(), Some(0.5));
        assert!((s.sd().unwrap() - 1.290_994_448_735_805_6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let k = split.min(xs.len());
            let mut a: RunningStats<f64> = xs[..k].iter().copied().collect();
            let b: RunningStats<f64> = xs[k..].iter().copied().collect();
            a.merge(&b);
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert_eq!(a.count(), xs.len());
            prop_assert!((a.mean().unwrap() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
            prop_assert!((a.variance().unwrap() - var).abs() <= 1e-9 * (1.0 + var));
        }
    }
}
