//! Excess-risk bounds for the echoed algorithms.

use std::fmt;
use std::str::FromStr;

use super::{RegretCertificate, TheoryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// Echoed GD: `βD²/(2KT) + 2ρD/√(BT)`.
    Degd,
    /// Echoed proximal GD: `√(1 + 1/K)·2ρD/√(BT) + βD²/(2KT)`.
    Depgd,
    /// Echoed AGD: `4·βD²/(K²T²) + 4·ρD/√(BT)`.
    Deagd,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Degd => "degd",
            BoundKind::Depgd => "depgd",
            BoundKind::Deagd => "deagd",
        })
    }
}

impl FromStr for BoundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "degd" => Ok(BoundKind::Degd),
            "depgd" => Ok(BoundKind::Depgd),
            "deagd" => Ok(BoundKind::Deagd),
            other => Err(format!("unknown bound `{other}`")),
        }
    }
}

/// Constant applied to each term of the AGD bound.
pub const AGD_BOUND_CONSTANT: f64 = 4.0;

pub fn theorem_bound(
    which: BoundKind,
    beta: f64,
    rho: f64,
    d: f64,
    b: usize,
    t: usize,
    k: usize,
) -> Result<f64, TheoryError> {
    for (name, v) in [
        ("beta", beta),
        ("rho", rho),
        ("D", d),
        ("B", b as f64),
        ("T", t as f64),
        ("K", k as f64),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(TheoryError::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let (b, t, k) = (b as f64, t as f64, k as f64);
    let statistical = rho * d / (b * t).sqrt();
    Ok(match which {
        BoundKind::Degd => beta * d * d / (2.0 * k * t) + 2.0 * statistical,
        BoundKind::Depgd => {
            (1.0 + 1.0 / k).sqrt() * 2.0 * statistical + beta * d * d / (2.0 * k * t)
        }
        BoundKind::Deagd => AGD_BOUND_CONSTANT * (beta * d * d / (k * k * t * t) + statistical),
    })
}

/// Composes per-batch certificates into the excess-risk bound
/// `V(w_0, s_0, w*)/T + ε`, dropping the nonnegative final potential.
pub fn compose_main_theorem(
    certificates: &[RegretCertificate],
    epsilon: f64,
    t: usize,
) -> Result<f64, TheoryError> {
    if certificates.len() != t || t == 0 {
        return Err(TheoryError::Mismatch {
            expected: t,
            actual: certificates.len(),
        });
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(TheoryError::InvalidArgument(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(certificates[0].potential_init / t as f64 + epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cert(v0: f64) -> RegretCertificate {
        RegretCertificate {
            lhs: 0.0,
            rhs: 0.0,
            slack: 0.0,
            potential_init: v0,
            potential_out: 0.0,
            precondition_ok: true,
        }
    }

    #[test]
    fn degd_example() {
        let v = theorem_bound(BoundKind::Degd, 1.0, 1.0, 1.0, 100, 100, 10).unwrap();
        assert_relative_eq!(v, 1.0 / 2000.0 + 2.0 / 100.0, epsilon = 1e-15);
        assert_relative_eq!(v, 0.0205, epsilon = 1e-15);
    }

    #[test]
    fn depgd_large_k_limit() {
        let v = theorem_bound(BoundKind::Depgd, 1.0, 1.0, 1.0, 100, 100, 1 << 40).unwrap();
        assert_relative_eq!(v, 2.0 / 100.0, max_relative = 1e-9);
    }

    #[test]
    fn degd_at_k1_has_sgd_shape() {
        // βD²/(2T) + 2ρD/√(BT)
        let v = theorem_bound(BoundKind::Degd, 3.0, 2.0, 0.5, 8, 50, 1).unwrap();
        assert_relative_eq!(
            v,
            3.0 * 0.25 / 100.0 + 2.0 * 2.0 * 0.5 / 20.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn deagd_uses_constant_four() {
        let v = theorem_bound(BoundKind::Deagd, 1.0, 1.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!(v, 8.0);
        assert!(theorem_bound(BoundKind::Deagd, 1.0, 0.0, 1.0, 1, 1, 1).is_err());
    }

    #[test]
    fn composition_degenerate_cases() {
        assert_eq!(compose_main_theorem(&[cert(0.0)], 0.0, 1).unwrap(), 0.0);
        assert_eq!(
            compose_main_theorem(&[cert(0.7)], 0.1, 1).unwrap(),
            0.7 + 0.1
        );
        assert_eq!(
            compose_main_theorem(&[cert(1.0), cert(0.5)], 0.0, 2).unwrap(),
            0.5
        );
        assert!(matches!(
            compose_main_theorem(&[cert(1.0)], 0.0, 3),
            Err(TheoryError::Mismatch {
                expected: 3,
                actual: 1
            })
        ));
    }
}
