//! Central finite-difference gradient checking.

use std::fmt;

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub epsilon: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} elements checked, max relative error {:.3e} (tolerance {:.1e})",
            if self.passed() { "ok:" } else { "FAIL:" },
            self.checked,
            self.max_rel_error,
            self.tolerance,
        )?;
        if let Some(i) = self.worst_index {
            write!(f, " at element {i}")?;
        }
        Ok(())
    }
}

/// Compare `analytic` against central finite differences of the scalar
/// function `f` around `x`, element by element.
///
/// The relative error denominator is floored at 1e-3 so that elements whose
/// true gradient is (near) zero are judged on the absolute scale the
/// truncation error of the difference quotient actually supports.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = f(&probe);
        probe[i] = orig - epsilon;
        let minus = f(&probe);
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = (numeric.abs() + analytic[i].abs()).max(1e-3);
        let rel = (numeric - analytic[i]).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = Some(i);
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        worst_index: worst,
        checked: x.len(),
        epsilon,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activations::sigmoid;

    #[test]
    fn linear_op_gradient_is_exact() {
        // y = 3x, analytic gradient 3.
        let report = grad_check(|v| 3.0 * v[0], &[1.7], &[3.0], 1e-6, 1e-8);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn sigmoid_derivative_at_zero_is_quarter() {
        let eps = 1e-6f64;
        let numeric = (sigmoid(eps) - sigmoid(-eps)) / (2.0 * eps);
        assert!((numeric - 0.25).abs() < 1e-6);
        let report = grad_check(|v| sigmoid(v[0]), &[0.0], &[0.25], 1e-6, 1e-6);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let report = grad_check(|v| v[0] * v[0], &[2.0], &[3.0], 1e-5, 1e-3);
        assert!(!report.passed());
        assert_eq!(report.worst_index, Some(0));
    }
}
