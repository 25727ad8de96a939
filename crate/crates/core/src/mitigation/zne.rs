//! Zero-noise extrapolation from observables at amplified noise levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lagrange polynomial through all points, evaluated at `r = 0`.
pub fn richardson_extrapolate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::input(
            "Richardson extrapolation needs at least two points",
        ));
    }
    for (i, a) in points.iter().enumerate() {
        if points[..i].iter().any(|b| b.0 == a.0) {
            return Err(Error::input(format!("duplicate noise level {}", a.0)));
        }
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &(ri, vi))| {
            let weight: f64 = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &(rj, _))| rj / (rj - ri))
                .product();
            weight * vi
        })
        .sum())
}

/// Amplitude of `A e^{−αr}` through `(r, v_r)` and `(rp, v_rp)`.
pub fn exp_extrapolate(v_r: f64, v_rp: f64, r: f64, rp: f64) -> Result<f64> {
    if r == rp {
        return Err(Error::input(format!("duplicate noise level {r}")));
    }
    if v_r * v_rp <= 0.0 || (v_r * v_rp).is_nan() {
        return Err(Error::AnsatzInapplicable(format!(
            "values {v_r} and {v_rp} are zero or differ in sign"
        )));
    }
    Ok(v_r * (v_rp / v_r).powf(r / (r - rp)))
}

/// Exponential extrapolation of `v − asymptote`, shifted back.
pub fn shifted_exp_extrapolate(
    v_r: f64,
    v_rp: f64,
    r: f64,
    rp: f64,
    asymptote: f64,
) -> Result<f64> {
    Ok(exp_extrapolate(v_r - asymptote, v_rp - asymptote, r, rp)? + asymptote)
}

/// How an observable is carried to zero noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Value at the lowest noise level.
    Bare,
    Richardson,
    Exp,
    ShiftedExp {
        asymptote: f64,
    },
}

impl Extrapolation {
    pub fn tag(&self) -> &'static str {
        match self {
            Extrapolation::Bare => "bare",
            Extrapolation::Richardson => "richardson",
            Extrapolation::Exp => "exp",
            Extrapolation::ShiftedExp { .. } => "shifted-exp",
        }
    }

    /// Extrapolates `(r, value)` points sorted by increasing `r`; the
    /// exponential forms use the two lowest levels.
    pub fn apply(&self, points: &[(f64, f64)]) -> Result<f64> {
        let Some(&(r, v)) = points.first() else {
            return Err(Error::input("no points to extrapolate"));
        };
        let second = || {
            points
                .get(1)
                .copied()
                .ok_or_else(|| Error::input("exponential extrapolation needs two points"))
        };
        match *self {
            Extrapolation::Bare => Ok(v),
            Extrapolation::Richardson => richardson_extrapolate(points),
            Extrapolation::Exp => {
                let (rp, vp) = second()?;
                exp_extrapolate(v, vp, r, rp)
            }
            Extrapolation::ShiftedExp { asymptote } => {
                let (rp, vp) = second()?;
                shifted_exp_extrapolate(v, vp, r, rp, asymptote)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn richardson_examples() {
        assert!((richardson_extrapolate(&[(1.0, 0.8), (3.0, 0.4)]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            richardson_extrapolate(&[(1.0, 0.3), (3.0, 0.3), (5.0, 0.3)]).unwrap(),
            0.3
        );
        assert!(richardson_extrapolate(&[(1.0, 0.3), (1.0, 0.4)]).is_err());
        let quad = |r: f64| 0.5 - 0.1 * r + 0.02 * r * r;
        let pts: Vec<_> = [1.0, 3.0, 5.0].iter().map(|&r| (r, quad(r))).collect();
        assert!((richardson_extrapolate(&pts).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exp_examples() {
        let v = |r: f64| 2.0 * (-0.5 * r).exp();
        assert!((exp_extrapolate(v(1.0), v(3.0), 1.0, 3.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(exp_extrapolate(0.7, 0.7, 1.0, 3.0).unwrap(), 0.7);
        assert!(matches!(
            exp_extrapolate(0.2, -0.1, 1.0, 3.0),
            Err(Error::AnsatzInapplicable(_))
        ));
        assert!(exp_extrapolate(0.0, 0.1, 1.0, 3.0).is_err());
    }

    #[test]
    fn shifted_examples() {
        for asym in [1.0, 2.0, -0.5] {
            let v = |r: f64| asym - 0.6 * (-0.3 * r).exp();
            let a = shifted_exp_extrapolate(v(1.0), v(3.0), 1.0, 3.0, asym).unwrap();
            assert!((a - (asym - 0.6)).abs() < 1e-12);
        }
    }

    #[test]
    fn bare_uses_lowest_level() {
        assert_eq!(
            Extrapolation::Bare
                .apply(&[(1.0, 0.4), (3.0, 0.2)])
                .unwrap(),
            0.4
        );
    }

    proptest! {
        #[test]
        fn linear_data_recovered(a in -5.0f64..5.0, b in -2.0f64..2.0) {
            let pts = [(1.0, a + b), (3.0, a + 3.0 * b)];
            prop_assert!((richardson_extrapolate(&pts).unwrap() - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
        }

        #[test]
        fn exponential_data_recovered(amp in 0.01f64..5.0, rate in 0.0f64..1.5, neg in any::<bool>()) {
            let amp = if neg { -amp } else { amp };
            let v = |r: f64| amp * (-rate * r).exp();
            let got = exp_extrapolate(v(1.0), v(3.0), 1.0, 3.0).unwrap();
            prop_assert!((got - amp).abs() < 1e-10);
        }

        #[test]
        fn zero_shift_is_plain_exponential(v1 in 0.01f64..2.0, v3 in 0.01f64..2.0) {
            prop_assert_eq!(
                shifted_exp_extrapolate(v1, v3, 1.0, 3.0, 0.0).unwrap(),
                exp_extrapolate(v1, v3, 1.0, 3.0).unwrap()
            );
        }
    }
}
