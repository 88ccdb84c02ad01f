//! Cached binomial coefficients.

use std::sync::OnceLock;

/// Largest `n` supported by [`binomial`]; Bernstein operations cap their
/// degrees well below this so the double-precision table stays accurate.
pub const BINOMIAL_MAX_N: usize = 1023;

static PASCAL: OnceLock<Vec<Vec<f64>>> = OnceLock::new();

fn table() -> &'static Vec<Vec<f64>> {
    PASCAL.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(BINOMIAL_MAX_N + 1);
        rows.push(vec![1.0]);
        for n in 1..=BINOMIAL_MAX_N {
            let prev = &rows[n - 1];
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Binomial coefficient C(n, k) as f64 (0 when k > n).
///
/// Panics if `n` exceeds [`BINOMIAL_MAX_N`]; callers enforce their degree
/// caps with typed errors before reaching this point.
pub fn binomial(n: usize, k: usize) -> f64 {
    assert!(
        n <= BINOMIAL_MAX_N,
        "binomial({n}, {k}) exceeds the supported table size"
    );
    if k > n {
        return 0.0;
    }
    table()[n][k]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values_exact() {
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(10, 5), 252.0);
        assert_eq!(binomial(3, 7), 0.0);
    }

    #[test]
    fn row_sums_are_powers_of_two() {
        for n in [1_usize, 7, 20, 50] {
            let sum: f64 = (0..=n).map(|k| binomial(n, k)).sum();
            assert_eq!(sum, 2.0_f64.powi(n as i32));
        }
    }
}
