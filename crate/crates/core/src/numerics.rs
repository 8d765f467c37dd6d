//! Small numerical helpers shared across modules.

/// Pairwise (cascade) summation. The result does not depend on how the
/// caller chunks the input beyond the usual `O(eps log n)` bound.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Uniform grid `start + i * step`, `i in 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// Symmetric grid on `[-half_width, half_width]` with `len` points.
    pub fn symmetric(half_width: f64, len: usize) -> Self {
        assert!(len >= 2);
        Self {
            start: -half_width,
            step: 2.0 * half_width / (len - 1) as f64,
            len,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.value(self.len - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-12 * self.step;
        x >= self.start - tol && x <= self.end() + tol
    }

    /// Segment index and fractional position for linear interpolation.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let t = ((x - self.start) / self.step).max(0.0);
        let i = (t.floor() as usize).min(self.len - 2);
        Some((i, (t - i as f64).clamp(0.0, 1.0)))
    }

    /// Composite trapezoid weights.
    pub fn trapezoid(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.len);
        let n = samples.len();
        let inner = pairwise_sum(&samples[1..n - 1]);
        self.step * (inner + 0.5 * (samples[0] + samples[n - 1]))
    }
}

/// Linear interpolation of `samples` tabulated on `grid`.
pub fn interpolate<T>(grid: &UniformGrid, samples: &[T], x: f64) -> Option<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (i, t) = grid.locate(x)?;
    Some(samples[i] * (1.0 - t) + samples[i + 1] * t)
}
