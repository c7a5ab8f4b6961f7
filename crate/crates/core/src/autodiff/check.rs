/// Central-difference gradient of `f` at `point` with step `h`.
pub fn central_difference_gradient<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let fp = f(&x);
            x[i] = x0 - h;
            let fm = f(&x);
            x[i] = x0;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Compares an AD gradient against central differences.
///
/// `f` returns the value and its AD gradient at a point. The result is
/// `max_i |AD_i - FD_i| / (|AD_i| + h)`; any non-finite comparison counts as
/// `+inf`.
pub fn finite_difference_check<F>(f: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "step must be positive");
    let (_, ad) = f(point);
    let fd = central_difference_gradient(|x| f(x).0, point, h);
    ad.iter()
        .zip(&fd)
        .map(|(&a, &d)| {
            let r = (a - d).abs() / (a.abs() + h);
            if r.is_finite() {
                r
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::evaluate_with_input_derivatives;
    use crate::autodiff::Real;

    fn taped<F>(f: F) -> impl Fn(&[f64]) -> (f64, Vec<f64>)
    where
        F: for<'t> Fn(crate::autodiff::Var<'t>) -> crate::autodiff::Var<'t> + Copy,
    {
        move |x: &[f64]| evaluate_with_input_derivatives(|_, v| f(v[0]), x).unwrap()
    }

    #[test]
    fn square_is_exact() {
        let d = finite_difference_check(taped(|x| x * x), &[1.0], 1e-4);
        assert!(d <= 1e-7, "{d}");
    }

    #[test]
    fn constant_has_zero_discrepancy() {
        let d = finite_difference_check(|_| (4.2, vec![0.0, 0.0]), &[0.3, 0.7], 1e-4);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn steep_tanh() {
        let d = finite_difference_check(taped(|x| (x * 10.0).tanh()), &[0.1], 1e-4);
        assert!(d <= 1e-5, "{d}");
    }

    #[test]
    fn nan_reported_as_infinite() {
        let d = finite_difference_check(|x| (x[0].ln(), vec![f64::NAN]), &[1.0], 1e-4);
        assert!(d.is_infinite());
    }
}
