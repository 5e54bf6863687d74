//! Small numeric helpers shared across modules.

use crate::real::Real;

/// Pairwise (tree) summation. Deterministic for a fixed input order and
/// carries an O(log n) error constant instead of O(n), which the energy and
/// momentum observers rely on for bit-reproducible diagnostics.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const CUTOFF: usize = 32;
    if xs.len() <= CUTOFF {
        let mut acc = T::zero();
        for &x in xs {
            acc = acc + x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Max of |x| over a slice; zero for empty input.
pub fn sup_norm<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Golden-section minimization of a unimodal scalar function on [a, b].
/// Returns (argmin, min). Tolerance is on the bracket width.
pub fn golden_min<T: Real>(mut a: T, mut b: T, tol: T, mut f: impl FnMut(T) -> T) -> (T, T) {
    let inv_phi = T::of(0.618_033_988_749_894_9);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b).half();
    let fm = f(mid);
    if fm <= fc && fm <= fd {
        (mid, fm)
    } else if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn pairwise_beats_naive_on_drifting_accumulator() {
        // Constant increment x repeated 2^20 times: the exact sum x * 2^20
        // is representable (power-of-two scaling), the naive left fold
        // drifts once the accumulator outgrows the increment.
        let x = 1.0f64 / 3.0;
        let n = 1usize << 20;
        let xs = vec![x; n];
        let exact = x * n as f64;
        let pairwise_err = (pairwise_sum(&xs) - exact).abs();
        let naive_err = (xs.iter().fold(0.0, |a, &b| a + b) - exact).abs();
        assert!(pairwise_err < 1e-8, "pairwise error {pairwise_err}");
        assert!(pairwise_err <= naive_err + 1e-15, "pairwise {pairwise_err} vs naive {naive_err}");
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(-1.0, 2.0, 1e-12, |x: f64| (x - 0.3).powi(2) + 1.0);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
    }
}
