//! Small numeric helpers shared across modules.

/// Pairwise (tree) summation in fixed index order.
///
/// Deterministic regardless of thread count and considerably more accurate
/// than a running sum on long vectors; every reduction in the crate goes
/// through here.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Log-spaced snapshot ladder `base·2^k`, clipped to `(0, s_max]`.
pub fn log_ladder(base: f64, s_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = base;
    while s < s_max {
        out.push(s);
        s *= 2.0;
    }
    out.push(s_max);
    out
}

/// Index of the first non-finite entry, if any.
pub fn first_nonfinite(xs: &[f64]) -> Option<usize> {
    xs.iter().position(|x| !x.is_finite())
}
