//! Radial cutoff used to globalize nonlinearities and fiber extensions.
//!
//! `rho(r) = 1` for `r <= R/2`, `rho(r) = 0` for `r >= R`, and in between the
//! smooth step `b(t) / (b(t) + b(1 - t))` built from the bump
//! `b(t) = exp(1 - 1/(1 - t^2))`, with `t = 2r/R - 1`. The quotient is flat at
//! both ends, so the cutoff is C-infinity.

fn bump(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn bump_derivative(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        bump(t) * (-2.0 * t / (s * s))
    }
}

/// Cutoff value at radius `r` for outer radius `radius`.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    let t = 2.0 * r / radius - 1.0;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = bump(t);
        let b = bump(1.0 - t);
        a / (a + b)
    }
}

/// Derivative of [`cutoff`] with respect to `r`.
pub fn cutoff_derivative(r: f64, radius: f64) -> f64 {
    let t = 2.0 * r / radius - 1.0;
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = bump(t);
    let b = bump(1.0 - t);
    let da = bump_derivative(t);
    let db = -bump_derivative(1.0 - t);
    let dt = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
    dt * 2.0 / radius
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        assert_eq!(cutoff(0.0, 1.0), 1.0);
        assert_eq!(cutoff(0.5, 1.0), 1.0);
        assert_eq!(cutoff(1.0, 1.0), 0.0);
        assert_eq!(cutoff(3.0, 1.0), 0.0);
        let mid = cutoff(0.75, 1.0);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_derivative_matches_difference_quotient() {
        let mut prev = 1.0;
        for i in 0..=200 {
            let r = 0.5 + 0.5 * i as f64 / 200.0;
            let v = cutoff(r, 1.0);
            assert!(v <= prev + 1e-15);
            prev = v;
            if i > 0 && i < 200 {
                let h = 1e-6;
                let fd = (cutoff(r + h, 1.0) - cutoff(r - h, 1.0)) / (2.0 * h);
                assert!((fd - cutoff_derivative(r, 1.0)).abs() < 1e-6);
            }
        }
    }
}
