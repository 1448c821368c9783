//! Compensated (Neumaier) summation and an order-independent fixed-point sum.

/// Running Kahan–Babuška–Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(values);
    acc.value()
}

const FIXED_SCALE: f64 = (1u128 << 96) as f64;

/// Sum of terms with magnitude at most a few units, rounded per term onto a
/// grid of 2^-96 and accumulated exactly in an `i128`. The result does not
/// depend on the order of the terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedPointSum {
    acc: i128,
}

impl FixedPointSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        self.acc += (value * FIXED_SCALE).round() as i128;
    }

    pub fn merge(&mut self, other: &Self) {
        self.acc += other.acc;
    }

    pub fn value(&self) -> f64 {
        self.acc as f64 / FIXED_SCALE
    }
}
