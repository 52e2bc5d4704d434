//! Order statistics and moments shared by the raster, feature and sampling code.
//!
//! Every percentile in the crate goes through [`percentile_sorted`] so that
//! clipping thresholds and `pNN` features agree with each other.

/// Linear-interpolation percentile of an ascending slice.
///
/// Rank `h = (n - 1) * p / 100`; value `v[floor h] + frac(h) * (v[floor h + 1] - v[floor h])`.
/// Returns `None` for an empty slice.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let h = (n - 1) as f64 * pct / 100.0;
    let lo = h.floor();
    let i = (lo as usize).min(n - 1);
    if i + 1 >= n {
        return Some(sorted[n - 1]);
    }
    let frac = h - lo;
    Some(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
}

/// Median of an ascending slice; mean of the two middle values for even counts.
pub fn median_sorted(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Median of an unsorted buffer. The buffer is reordered.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lower + upper) / 2.0)
    }
}

pub fn sort_f64(values: &mut [f64]) {
    values.sort_unstable_by(f64::total_cmp);
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population central moments m2, m3, m4 about the mean.
pub fn central_moments(values: &[f64]) -> Option<(f64, f64, f64, f64)> {
    let m = mean(values)?;
    let n = values.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Some((m, m2 / n, m3 / n, m4 / n))
}

/// Coefficient of determination. `None` when the target has zero variance.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Option<f64> {
    let ybar = mean(y)?;
    let ss_tot: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> f64 {
    if y.is_empty() {
        return f64::NAN;
    }
    y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a).unwrap_or(0.0);
    let mb = mean(b).unwrap_or(0.0);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da.sqrt() * db.sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_rule_on_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile_sorted(&v, 1.0).unwrap() - 1.99).abs() < 1e-12);
        assert!((percentile_sorted(&v, 99.0).unwrap() - 99.01).abs() < 1e-12);
        assert_eq!(percentile_sorted(&v, 0.0), Some(1.0));
        assert_eq!(percentile_sorted(&v, 100.0), Some(100.0));
    }

    #[test]
    fn median_variants_agree() {
        let mut a = vec![5.0, 1.0, 4.0, 2.0];
        let mut b = a.clone();
        sort_f64(&mut b);
        assert_eq!(median_in_place(&mut a), median_sorted(&b));
        assert_eq!(median_sorted(&b), Some(3.0));
        assert_eq!(median_in_place(&mut []), None);
    }

    #[test]
    fn r2_hand_value() {
        let r2 = r_squared(&[1.0, 2.0, 3.0], &[1.1, 1.9, 3.2]).unwrap();
        assert!((r2 - 0.97).abs() < 1e-12);
        assert_eq!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), None);
    }

    #[test]
    fn spearman_monotone() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [10.0, 20.0, 25.0, 100.0];
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
    }
}
