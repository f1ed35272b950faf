//! Pool-adjacent-violators regression, used to smooth noisy normalized
//! premium profiles before threshold crossings are read off.

/// Weighted least-squares fit of a nonincreasing sequence to `values`.
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    isotonic_nondecreasing(&negated, weights)
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// Weighted least-squares fit of a nondecreasing sequence to `values`.
pub fn isotonic_nondecreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    let n = values.len();
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w.max(0.0), 1));
        while blocks.len() > 1 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 <= last.0 {
                break;
            }
            // pool the violating pair
            blocks.pop();
            blocks.pop();
            let w = prev.1 + last.1;
            let mean = if w > 0.0 {
                (prev.0 * prev.1 + last.0 * last.1) / w
            } else {
                0.5 * (prev.0 + last.0)
            };
            blocks.push((mean, w, prev.2 + last.2));
        }
    }
    let mut out = Vec::with_capacity(n);
    for (mean, _, len) in blocks {
        out.extend(std::iter::repeat_n(mean, len));
    }
    out
}
