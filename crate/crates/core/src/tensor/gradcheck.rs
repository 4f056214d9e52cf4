/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
///
/// The floor keeps coordinates whose true gradient is essentially zero from
/// reporting huge ratios of two rounding errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares `analytic[i]` against the central difference
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for each `i` in `coords`.
///
/// `loss_at(i, v)` must evaluate the scalar loss with coordinate `i` set to
/// `v` and every other coordinate at its base value, restoring afterwards.
pub fn grad_check<F>(mut loss_at: F, base: &[f64], analytic: &[f64], coords: &[usize], eps: f64) -> GradCheckReport
where
    F: FnMut(usize, f64) -> f64,
{
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for &i in coords {
        let plus = loss_at(i, base[i] + eps);
        let minus = loss_at(i, base[i] - eps);
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_correct_and_wrong_gradients() {
        let x = [0.3f64, -1.2, 2.0];
        let f = |v: &[f64]| v[0] * v[0] + (v[1] * v[2]).sin();
        let grad = [2.0 * x[0], x[2] * (x[1] * x[2]).cos(), x[1] * (x[1] * x[2]).cos()];
        let eval = |i: usize, v: f64| {
            let mut y = x;
            y[i] = v;
            f(&y)
        };
        let ok = grad_check(eval, &x, &grad, &[0, 1, 2], 1e-5);
        assert!(ok.max_rel_error < 1e-8, "{ok:?}");
        let wrong = [grad[0], grad[1] * 1.01, grad[2]];
        let bad = grad_check(eval, &x, &wrong, &[0, 1, 2], 1e-5);
        assert_eq!(bad.worst, Some(1));
        assert!(bad.max_rel_error > 5e-3);
    }
}
