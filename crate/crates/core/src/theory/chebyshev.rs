//! Powers of the AGD transfer matrix `H = [[2h, −h], [1, 0]]` and their
//! closed form in Chebyshev polynomials of the second kind, with `r = √h`:
//!
//! ```text
//! H^{2n}   = hⁿ [[U_{2n}(r),       −r·U_{2n−1}(r)],
//!               [U_{2n−1}(r)/r,    −U_{2n−2}(r)  ]]
//! H^{2n+1} = hⁿ [[r·U_{2n+1}(r),   −h·U_{2n}(r)  ],
//!               [U_{2n}(r),        −r·U_{2n−1}(r)]]
//! ```

use nalgebra::Matrix2;

use super::TheoryError;

/// `U_n(x)` by the three-term recurrence. `n = −1` gives 0.
pub fn chebyshev_u(n: i64, x: f64) -> f64 {
    match n {
        n if n < -1 => panic!("chebyshev_u: degree {n} below -1"),
        -1 => 0.0,
        0 => 1.0,
        _ => {
            let (mut prev, mut cur) = (1.0, 2.0 * x);
            for _ in 1..n {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `U_{2m−1}(x)/x`, evaluated without dividing so that `x = 0` works.
fn odd_u_over_x(m: i64, x: f64) -> f64 {
    let c = 4.0 * x * x - 2.0;
    let (mut prev, mut cur) = (0.0, 2.0);
    if m == 0 {
        return prev;
    }
    for _ in 1..m {
        let next = c * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn transfer_matrix(h: f64) -> Matrix2<f64> {
    Matrix2::new(2.0 * h, -h, 1.0, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferPower {
    pub direct: Matrix2<f64>,
    pub closed_form: Matrix2<f64>,
    /// `‖H^j‖₂` of the direct power.
    pub spectral_norm: f64,
}

impl TransferPower {
    pub fn max_entry_error(&self) -> f64 {
        (self.direct - self.closed_form).amax()
    }
}

/// Largest singular value of a 2×2 matrix.
pub fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    let f2 = m.norm_squared();
    let det = m.determinant();
    let disc = (f2 * f2 - 4.0 * det * det).max(0.0);
    ((f2 + disc.sqrt()) / 2.0).sqrt()
}

pub fn transfer_power(h: f64, j: u32) -> Result<TransferPower, TheoryError> {
    if !(0.0..=1.0).contains(&h) {
        return Err(TheoryError::InvalidArgument(format!(
            "h must lie in [0, 1], got {h}"
        )));
    }
    if j == 0 {
        return Err(TheoryError::InvalidArgument(
            "power must be at least 1".into(),
        ));
    }
    let hm = transfer_matrix(h);
    let mut direct = hm;
    for _ in 1..j {
        direct *= hm;
    }

    let r = h.sqrt();
    let n = (j / 2) as i64;
    let scale = h.powi(n as i32);
    let u = |k: i64| chebyshev_u(k, r);
    let closed_form = if j.is_multiple_of(2) {
        Matrix2::new(
            u(2 * n),
            -r * u(2 * n - 1),
            odd_u_over_x(n, r),
            -u(2 * n - 2),
        ) * scale
    } else {
        Matrix2::new(r * u(2 * n + 1), -h * u(2 * n), u(2 * n), -r * u(2 * n - 1)) * scale
    };

    Ok(TransferPower {
        spectral_norm: spectral_norm(&direct),
        direct,
        closed_form,
    })
}
