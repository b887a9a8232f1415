use crate::error::{Error, Result};

/// Linear-interpolation resampling. Output sample `j` sits at time
/// `j / fs_out`; positions past the last input sample hold its value.
pub fn resample(x: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    if !(fs_in > 0.0 && fs_out > 0.0) {
        return Err(Error::invalid(format!(
            "sampling rates must be positive, got {fs_in} -> {fs_out}"
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("resample needs at least two samples"));
    }
    let out_len = (x.len() as f64 * fs_out / fs_in).round() as usize;
    let ratio = fs_in / fs_out;
    let last = x.len() - 1;
    let out = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                return x[last];
            }
            let frac = pos - i as f64;
            x[i] + (x[i + 1] - x[i]) * frac
        })
        .collect();
    Ok(out)
}
