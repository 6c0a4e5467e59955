//! Built-in test maps.
//!
//! | name   | linear part         | nonlinearity                                            |
//! |--------|---------------------|---------------------------------------------------------|
//! | LIN3   | diag(0.5, 1, 2)     | none                                                    |
//! | POLY3  | diag(0.5, 1, 2)     | (e xc xs + e xu^2, e xs xu, e xc xu)                    |
//! | POLY3b | diag(0.5, 1, 2)     | POLY3 plus e xc^2 in the center component               |
//! | TWOU4  | diag(0.5, 1, 2, 4)  | POLY3-type terms plus couplings e xc xu2, e xs xu2      |
//! | CEX1   | 0.5                 | F(x) = mu * integral_0^x (1 - 1/log t) dt, mu = 0.5     |
//!
//! All polynomial nonlinearities are multiplied by the radial cutoff of
//! radius [`CATALOG_RADIUS`], so they are globally small.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::blocks::{Block, BlockClass, Envelopes, SpectralStructure};
use crate::error::{Error, Result};
use crate::map::{HolderData, MapModel, NormalizationFlags, Nonlinearity, Polynomial, Zero};

/// Coupling strength of the polynomial catalog maps.
pub const EPSILON: f64 = 0.05;
/// Cutoff radius of the polynomial catalog maps.
pub const CATALOG_RADIUS: f64 = 1.2;
/// Contraction factor of the counterexample map.
pub const CEX1_MU: f64 = 0.5;
/// Cutoff radius of the counterexample map.
pub const CEX1_RADIUS: f64 = 0.25;

/// Names of every catalog entry.
pub const CATALOG_NAMES: [&str; 5] = ["LIN3", "POLY3", "POLY3b", "TWOU4", "CEX1"];

fn blk(size: usize, modulus: f64, class: BlockClass) -> Block {
    Block {
        size,
        modulus,
        class,
    }
}

fn three_block_structure() -> SpectralStructure {
    SpectralStructure::from_blocks(
        &[
            blk(1, 0.5, BlockClass::Stable),
            blk(1, 1.0, BlockClass::Center),
            blk(1, 2.0, BlockClass::Unstable),
        ],
        Envelopes {
            lambda_s_minus: 0.4,
            lambda_s_plus: 0.6,
            lambda_u_minus: 1.5,
            lambda_u_plus: 3.0,
            margin: 0.1,
            dichotomy_k: 1.0,
        },
    )
    .expect("static structure")
}

fn four_block_structure() -> SpectralStructure {
    SpectralStructure::from_blocks(
        &[
            blk(1, 0.5, BlockClass::Stable),
            blk(1, 1.0, BlockClass::Center),
            blk(1, 2.0, BlockClass::Unstable),
            blk(1, 4.0, BlockClass::Unstable),
        ],
        Envelopes {
            lambda_s_minus: 0.4,
            lambda_s_plus: 0.6,
            lambda_u_minus: 1.5,
            lambda_u_plus: 5.0,
            margin: 0.1,
            dichotomy_k: 1.0,
        },
    )
    .expect("static structure")
}

fn prenormalized() -> NormalizationFlags {
    NormalizationFlags {
        center_is_xc: true,
        block_diagonal_on_xc: true,
        cs_invariant: true,
        cu_invariant: false,
        stable_foliation_flat: true,
    }
}

/// `A = diag(0.5, 1, 2)`, `f = 0`.
pub fn lin3() -> MapModel {
    let s = three_block_structure();
    MapModel::new(
        "LIN3",
        s.clone(),
        s.diagonal_matrix(),
        Arc::new(Zero(3)),
        HolderData {
            alpha: 1.0,
            delta_f: 0.0,
            m: 0.0,
        },
        CATALOG_RADIUS,
        NormalizationFlags {
            center_is_xc: true,
            block_diagonal_on_xc: true,
            cs_invariant: true,
            cu_invariant: true,
            stable_foliation_flat: true,
        },
    )
    .expect("static model")
}

/// POLY3 nonlinearity with coupling `eps` (coordinates `s, c, u`).
pub fn poly3_polynomial(eps: f64) -> Polynomial {
    Polynomial::new(3, vec![])
        .expect("empty polynomial")
        .term(0, &[1, 1, 0], eps)
        .term(0, &[0, 0, 2], eps)
        .term(1, &[1, 0, 1], eps)
        .term(2, &[0, 1, 1], eps)
}

/// POLY3 with a custom nonlinearity, sharing its structure and flags.
pub fn poly3_family(
    name: &str,
    poly: Polynomial,
    flags: NormalizationFlags,
) -> Result<MapModel> {
    let s = three_block_structure();
    MapModel::new(
        name,
        s.clone(),
        s.diagonal_matrix(),
        Arc::new(poly),
        HolderData {
            alpha: 1.0,
            delta_f: 0.25,
            m: 1.0,
        },
        CATALOG_RADIUS,
        flags,
    )
}

/// `A = diag(0.5, 1, 2)`, `f = (e xc xs + e xu^2, e xs xu, e xc xu)`.
pub fn poly3() -> MapModel {
    poly3_family("POLY3", poly3_polynomial(EPSILON), prenormalized()).expect("static model")
}

/// POLY3 with `f_c += e xc^2`, giving nontrivial center dynamics.
pub fn poly3b() -> MapModel {
    let p = poly3_polynomial(EPSILON).term(1, &[0, 2, 0], EPSILON);
    poly3_family("POLY3b", p, prenormalized()).expect("static model")
}

/// TWOU4 nonlinearity (coordinates `s, c, u1, u2`).
pub fn twou4_polynomial(eps: f64) -> Polynomial {
    Polynomial::new(4, vec![])
        .expect("empty polynomial")
        .term(0, &[1, 1, 0, 0], eps)
        .term(0, &[0, 0, 2, 0], eps)
        .term(1, &[1, 0, 1, 0], eps)
        .term(2, &[0, 1, 1, 0], eps)
        .term(2, &[0, 1, 0, 1], eps)
        .term(2, &[1, 0, 0, 1], eps)
        .term(3, &[0, 1, 0, 1], eps)
        .term(3, &[1, 0, 0, 1], eps)
}

/// TWOU4 with coupling `eps`.
pub fn twou4_with(eps: f64) -> MapModel {
    let s = four_block_structure();
    MapModel::new(
        "TWOU4",
        s.clone(),
        s.diagonal_matrix(),
        Arc::new(twou4_polynomial(eps)),
        HolderData {
            alpha: 1.0,
            delta_f: 0.3,
            m: 1.0,
        },
        CATALOG_RADIUS,
        NormalizationFlags {
            cu_invariant: eps == 0.0,
            ..prenormalized()
        },
    )
    .expect("static model")
}

/// `A = diag(0.5, 1, 2, 4)` with two unstable blocks whose generator
/// `A_u(x_cs)` is upper triangular and depends on both `x_c` and `x_s`.
pub fn twou4() -> MapModel {
    twou4_with(EPSILON)
}

/// Exponential integral `E_1(t)` for `t > 0`.
pub fn exp_integral_e1(t: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if t <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -t / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - t.ln() + sum
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = t + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-t).exp()
    }
}

/// Logarithmic integral `li(x) = integral_0^x dt / log t` for `0 <= x < 1`.
pub fn log_integral(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -exp_integral_e1(-x.ln())
    }
}

/// Nonlinear part of `F(x) = mu * integral_0^x (1 - 1/log|t|) dt`, extended
/// as an odd function: `f(x) = -mu * sign(x) * li(|x|)`.
#[derive(Debug, Clone, Copy)]
pub struct LogIntegralContraction {
    pub mu: f64,
}

impl Nonlinearity for LogIntegralContraction {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let v = x[0];
        DVector::from_element(1, -self.mu * v.signum() * log_integral(v.abs()))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let a = x[0].abs();
        let d = if a == 0.0 { 0.0 } else { -self.mu / a.ln() };
        Some(DMatrix::from_element(1, 1, d))
    }
}

/// The one-dimensional contraction without a differentiable linearization.
pub fn cex1_with(mu: f64) -> Result<MapModel> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Inadmissible {
            name: "mu".into(),
            value: mu,
            reason: "must lie in (0, 1)".into(),
        });
    }
    let s = SpectralStructure::from_blocks(
        &[blk(1, mu, BlockClass::Stable)],
        Envelopes {
            lambda_s_minus: 0.5 * mu,
            lambda_s_plus: (mu + 1.0) / 2.0,
            lambda_u_minus: 1.5,
            lambda_u_plus: 3.0,
            margin: 0.0,
            dichotomy_k: 1.0,
        },
    )?;
    MapModel::new(
        "CEX1",
        s,
        DMatrix::from_element(1, 1, mu),
        Arc::new(LogIntegralContraction { mu }),
        HolderData {
            alpha: 0.1,
            delta_f: mu,
            m: f64::INFINITY,
        },
        CEX1_RADIUS,
        NormalizationFlags {
            center_is_xc: true,
            block_diagonal_on_xc: true,
            cs_invariant: true,
            cu_invariant: true,
            stable_foliation_flat: true,
        },
    )
}

pub fn cex1() -> MapModel {
    cex1_with(CEX1_MU).expect("static model")
}

/// Every catalog entry.
pub fn builtin_test_maps() -> Vec<MapModel> {
    vec![lin3(), poly3(), poly3b(), twou4(), cex1()]
}

/// Looks up a catalog entry by name (case-insensitive).
pub fn by_name(name: &str) -> Result<MapModel> {
    match name.to_ascii_uppercase().as_str() {
        "LIN3" => Ok(lin3()),
        "POLY3" => Ok(poly3()),
        "POLY3B" => Ok(poly3b()),
        "TWOU4" => Ok(twou4()),
        "CEX1" => Ok(cex1()),
        _ => Err(Error::input(format!(
            "unknown catalog map `{name}` (known: {})",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::DiscreteMap;

    #[test]
    fn log_integral_against_quadrature() {
        // Substituting t = exp(-s) gives li(x) = -int_{-ln x}^inf exp(-s)/s ds,
        // a smooth integrand; composite Simpson on a truncated range.
        let x: f64 = 0.3;
        let (a, b) = (-x.ln(), -x.ln() + 45.0);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let g = |s: f64| (-s).exp() / s;
        let mut s = g(a) + g(b);
        for i in 1..n {
            let t = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(t);
        }
        let q = -s * h / 3.0;
        assert!((log_integral(x) - q).abs() < 1e-9, "{} vs {}", log_integral(x), q);
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((exp_integral_e1(2.5) - 0.024_914_917_870_269_7).abs() < 1e-14);
    }

    #[test]
    fn poly3_evaluation_by_hand() {
        let m = poly3();
        let (xs, xc, xu) = (0.1, 0.2, 0.1);
        let y = m.eval(&DVector::from_vec(vec![xs, xc, xu])).unwrap();
        let e = EPSILON;
        let expect = [
            0.5 * xs + e * xc * xs + e * xu * xu,
            xc + e * xs * xu,
            2.0 * xu + e * xc * xu,
        ];
        for i in 0..3 {
            assert!((y[i] - expect[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn cex1_derivative_at_zero_is_mu() {
        let m = cex1();
        let h = 1e-8;
        let d = (m.eval(&DVector::from_element(1, h)).unwrap()[0]
            - m.eval(&DVector::from_element(1, -h)).unwrap()[0])
            / (2.0 * h);
        assert!((d - CEX1_MU).abs() < 0.05);
        assert_eq!(m.jacobian(&DVector::zeros(1)).unwrap()[(0, 0)], CEX1_MU);
    }
}
