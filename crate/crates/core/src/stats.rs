//! Mean and sample standard deviation across repeated runs.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// (n-1)-denominator standard deviation; 0 when `n == 1`.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// `None` for an empty sample. Values are summed in sorted order so the
    /// result does not depend on the order they are given in.
    pub fn from_values(values: &[f64]) -> Option<MeanStd> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mut values = values.to_vec();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }

    /// A single run carries no spread information.
    pub fn is_degenerate(&self) -> bool {
        self.n < 2
    }

    pub fn scaled(self, factor: f64) -> MeanStd {
        MeanStd {
            mean: self.mean * factor,
            std: self.std * factor,
            n: self.n,
        }
    }
}

/// Renders as `79.4±2.5` (one decimal unless a precision is given).
impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = f.precision().unwrap_or(1);
        write!(f, "{:.*}±{:.*}", p, self.mean, p, self.std)
    }
}
