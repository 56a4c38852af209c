//! Small statistics helpers shared across the pipeline.

/// Mean of a non-empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and population variance computed against a shifted origin (the first
/// element), so a slice of identical values yields a variance of exactly 0.0
/// with no floating-point residue.
pub fn mean_and_population_variance(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty(), "variance of empty slice");
    let shift = xs[0];
    let n = xs.len() as f64;
    let mean_d = xs.iter().map(|&x| x - shift).sum::<f64>() / n;
    let var = xs
        .iter()
        .map(|&x| {
            let d = (x - shift) - mean_d;
            d * d
        })
        .sum::<f64>()
        / n;
    (shift + mean_d, var)
}

pub fn population_std(xs: &[f64]) -> f64 {
    mean_and_population_variance(xs).1.sqrt()
}

/// Linear-interpolation empirical quantile (type-7, the R/NumPy default):
/// `h = (n-1)p`, interpolate between the floor and ceiling order statistics.
/// `sorted` must be ascending.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&p), "quantile level outside [0,1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Convenience: type-7 quantile of an unsorted slice.
pub fn quantile_type7_unsorted(xs: &[f64], p: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    quantile_type7(&sorted, p)
}

/// Lag-`k` autocorrelation (biased normalization, standard ACF estimator).
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    assert!(lag < xs.len(), "lag exceeds series length");
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs
        .windows(lag + 1)
        .map(|w| (w[0] - m) * (w[lag] - m))
        .sum();
    num / denom
}

/// Spearman rank correlation. Ties receive average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman length mismatch");
    assert!(a.len() >= 2, "spearman needs at least two points");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("NaN in rank input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}

/// Golden-section search for the minimizer of a unimodal function on [lo, hi].
pub fn golden_section_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
