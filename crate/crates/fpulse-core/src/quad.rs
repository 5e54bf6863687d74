//! Composite Simpson quadrature on uniform samples.

use crate::real::Real;
use crate::util::pairwise_sum;

/// Integrates uniform samples over their span with composite Simpson.
/// `samples.len()` must be odd (an even number of subintervals); `h` is the
/// sample spacing.
///
/// Panics on an even sample count; callers own the grid layout.
pub fn simpson<T: Real>(samples: &[T], h: T) -> T {
    let n = samples.len();
    assert!(n >= 3 && n % 2 == 1, "composite Simpson needs an odd sample count, got {n}");
    let four = T::of(4.0);
    let two = T::two();
    let mut terms = Vec::with_capacity(n);
    terms.push(samples[0]);
    for (i, &s) in samples.iter().enumerate().take(n - 1).skip(1) {
        terms.push(if i % 2 == 1 { four * s } else { two * s });
    }
    terms.push(samples[n - 1]);
    pairwise_sum(&terms) * h / T::of(3.0)
}
