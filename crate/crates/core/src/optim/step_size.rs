use super::OptimError;

fn positive(name: &'static str, value: f64) -> Result<f64, OptimError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(OptimError::NonPositive { name, value })
    }
}

fn positive_count(name: &'static str, value: usize) -> Result<f64, OptimError> {
    positive(name, value as f64)
}

/// Echoed GD step size `min{1/β, (D / 2ρK)·√(B/T)}`, which balances the
/// regret term `D²/(2ηKT)` against the stability term `2ηKρ²/B`.
pub fn step_size_gd(
    beta: f64,
    rho: f64,
    d: f64,
    b: usize,
    t: usize,
    k: usize,
) -> Result<f64, OptimError> {
    let (beta, rho, d) = (
        positive("beta", beta)?,
        positive("rho", rho)?,
        positive("D", d)?,
    );
    let (b, t, k) = (
        positive_count("B", b)?,
        positive_count("T", t)?,
        positive_count("K", k)?,
    );
    Ok((1.0 / beta).min(d / (2.0 * rho * k) * (b / t).sqrt()))
}

/// Echoed proximal GD parameters `(γ, η) = ((ρ/D)·√(T/B), 1/(β+γ))`.
pub fn prox_params(
    beta: f64,
    rho: f64,
    d: f64,
    b: usize,
    t: usize,
) -> Result<(f64, f64), OptimError> {
    let (beta, rho, d) = (
        positive("beta", beta)?,
        positive("rho", rho)?,
        positive("D", d)?,
    );
    let (b, t) = (positive_count("B", b)?, positive_count("T", t)?);
    let gamma = rho / d * (t / b).sqrt();
    Ok((gamma, 1.0 / (beta + gamma)))
}

/// Echoed AGD step size `min{1/β, D√B / (ρK²T^{3/2})}`, which balances
/// `D²/(ηK²T²)` against `ηρ²K²T/B`.
pub fn step_size_agd(
    beta: f64,
    rho: f64,
    d: f64,
    b: usize,
    t: usize,
    k: usize,
) -> Result<f64, OptimError> {
    let (beta, rho, d) = (
        positive("beta", beta)?,
        positive("rho", rho)?,
        positive("D", d)?,
    );
    let (b, t, k) = (
        positive_count("B", b)?,
        positive_count("T", t)?,
        positive_count("K", k)?,
    );
    Ok((1.0 / beta).min(d * b.sqrt() / (rho * k * k * t.powf(1.5))))
}
