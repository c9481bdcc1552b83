/// Per-coordinate comparison of an analytic gradient with central differences.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_error: Vec<f64>,
    pub max_rel_error: f64,
    /// Coordinate holding the maximum.
    pub worst: usize,
}

impl FdReport {
    pub fn summary(&self) -> String {
        format!(
            "coordinates={} max_rel_error={:.3e} worst={} analytic={:.6e} numeric={:.6e}",
            self.analytic.len(),
            self.max_rel_error,
            self.worst,
            self.analytic.get(self.worst).copied().unwrap_or(0.0),
            self.numeric.get(self.worst).copied().unwrap_or(0.0),
        )
    }
}

/// Compares `grad` against central differences of `f` around `point` with step `h`.
///
/// The relative error of coordinate `i` is `|a - n| / max(|a|, |n|, floor)`,
/// so `floor` sets the magnitude below which errors count as absolute.
pub fn finite_difference_check(
    f: impl Fn(&[f64]) -> f64,
    grad: &[f64],
    point: &[f64],
    h: f64,
    floor: f64,
) -> FdReport {
    assert_eq!(grad.len(), point.len());
    let mut work = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = work[i];
        work[i] = x0 + h;
        let fp = f(&work);
        work[i] = x0 - h;
        let fm = f(&work);
        work[i] = x0;
        numeric.push((fp - fm) / (2.0 * h));
    }
    let rel_error: Vec<f64> = grad
        .iter()
        .zip(&numeric)
        .map(|(a, n)| {
            let denom = a.abs().max(n.abs()).max(floor);
            if denom == 0.0 {
                0.0
            } else {
                (a - n).abs() / denom
            }
        })
        .collect();
    let (worst, max_rel_error) = rel_error
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    FdReport {
        analytic: grad.to_vec(),
        numeric,
        rel_error,
        max_rel_error,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let f = |p: &[f64]| 3.0 * p[0] - 2.0 * p[1] + 0.5;
        let r = finite_difference_check(f, &[3.0, -2.0], &[0.4, 1.7], 1e-3, 0.0);
        assert!(r.max_rel_error < 1e-12, "{}", r.summary());
    }

    #[test]
    fn exp_at_zero() {
        let r = finite_difference_check(|p| p[0].exp(), &[1.0], &[0.0], 1e-6, 0.0);
        assert!(r.max_rel_error < 1e-9, "{}", r.summary());
    }

    #[test]
    fn oversized_step_is_reported() {
        let r = finite_difference_check(|p| p[0].exp(), &[1.0], &[0.0], 1.0, 0.0);
        // sinh(1) = 1.1752: reported, not hidden
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.worst, 0);
    }
}
