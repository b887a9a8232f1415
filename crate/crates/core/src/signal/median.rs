use crate::error::{Error, Result};

/// Sliding median with half-sample symmetric edge reflection
/// (`x[-1] = x[0]`, `x[n] = x[n-1]`).
pub fn median_filter(x: &[f64], kernel: usize) -> Result<Vec<f64>> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::invalid(format!("median kernel must be odd and positive, got {kernel}")));
    }
    if kernel > x.len() {
        return Err(Error::invalid(format!(
            "median kernel {kernel} exceeds signal length {}",
            x.len()
        )));
    }
    if kernel == 1 {
        return Ok(x.to_vec());
    }
    let n = x.len() as isize;
    let half = (kernel / 2) as isize;
    let reflect = |i: isize| -> f64 {
        let j = if i < 0 {
            -i - 1
        } else if i >= n {
            2 * n - i - 1
        } else {
            i
        };
        x[j as usize]
    };
    let mut buf = vec![0.0; kernel];
    let out = (0..n)
        .map(|i| {
            for (slot, k) in buf.iter_mut().zip(i - half..=i + half) {
                *slot = reflect(k);
            }
            buf.sort_by(|a, b| a.total_cmp(b));
            buf[kernel / 2]
        })
        .collect();
    Ok(out)
}
