//! Physical data of a mixed problem: boundary pulse E_in(t), initial field
//! E₀(x), initial polarization ρ₀(x, λ), medium length L and horizon T.

use std::fmt;
use std::sync::Arc;

use crate::error::{MbError, Result};
use crate::C64;

pub type SignalFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
pub type MediumFn = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

/// A complex function of one real variable.
#[derive(Clone)]
pub enum Signal {
    Zero,
    /// amplitude · sech((s − center)/width)
    Sech { amplitude: f64, center: f64, width: f64 },
    /// amplitude · exp(−((s − center)/width)²)
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// Linear interpolation of samples at s0 + k·ds, zero outside.
    Samples { s0: f64, ds: f64, values: Vec<C64> },
    Func(SignalFn),
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Zero => write!(f, "Zero"),
            Signal::Sech { amplitude, center, width } => {
                write!(f, "Sech {{ amplitude: {amplitude}, center: {center}, width: {width} }}")
            }
            Signal::Gaussian { amplitude, center, width } => {
                write!(f, "Gaussian {{ amplitude: {amplitude}, center: {center}, width: {width} }}")
            }
            Signal::Samples { s0, ds, values } => write!(f, "Samples {{ s0: {s0}, ds: {ds}, n: {} }}", values.len()),
            Signal::Func(_) => write!(f, "Func"),
        }
    }
}

impl Signal {
    pub fn eval(&self, s: f64) -> C64 {
        match self {
            Signal::Zero => C64::new(0.0, 0.0),
            Signal::Sech { amplitude, center, width } => C64::new(amplitude / ((s - center) / width).cosh(), 0.0),
            Signal::Gaussian { amplitude, center, width } => {
                let u = (s - center) / width;
                C64::new(amplitude * (-u * u).exp(), 0.0)
            }
            Signal::Samples { s0, ds, values } => {
                let u = (s - s0) / ds;
                if values.is_empty() || u < 0.0 || u > (values.len() - 1) as f64 {
                    return C64::new(0.0, 0.0);
                }
                let k = (u.floor() as usize).min(values.len().saturating_sub(2));
                if values.len() == 1 {
                    return values[0];
                }
                let frac = u - k as f64;
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
            Signal::Func(f) => f(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Signal::Zero)
    }

    /// max |signal| over [a, b] sampled at `n` points.
    pub fn max_abs(&self, a: f64, b: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| self.eval(a + (b - a) * i as f64 / (n - 1).max(1) as f64).norm())
            .fold(0.0, f64::max)
    }
}

/// Initial polarization ρ₀(x, λ).
#[derive(Clone)]
pub enum Rho0 {
    Zero,
    /// amplitude · exp(−((x − center)/width)²) · exp(−(λ/spread)²)
    Gaussian { amplitude: C64, center: f64, width: f64, spread: f64 },
    /// Bilinear interpolation of a table, zero outside.
    Table { x: Vec<f64>, lambda: Vec<f64>, values: Vec<Vec<C64>> },
    Func(MediumFn),
}

impl fmt::Debug for Rho0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho0::Zero => write!(f, "Zero"),
            Rho0::Gaussian { amplitude, center, width, spread } => write!(
                f,
                "Gaussian {{ amplitude: {amplitude}, center: {center}, width: {width}, spread: {spread} }}"
            ),
            Rho0::Table { x, lambda, .. } => write!(f, "Table {{ {}x{} }}", x.len(), lambda.len()),
            Rho0::Func(_) => write!(f, "Func"),
        }
    }
}

fn bracket(grid: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 0 || v < grid[0] || v > grid[n - 1] {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let k = grid.partition_point(|&g| g <= v).clamp(1, n - 1) - 1;
    Some((k, (v - grid[k]) / (grid[k + 1] - grid[k])))
}

impl Rho0 {
    pub fn eval(&self, x: f64, lambda: f64) -> C64 {
        match self {
            Rho0::Zero => C64::new(0.0, 0.0),
            Rho0::Gaussian { amplitude, center, width, spread } => {
                let u = (x - center) / width;
                let v = lambda / spread;
                amplitude * (-u * u - v * v).exp()
            }
            Rho0::Table { x: xs, lambda: ls, values } => {
                let (Some((i, a)), Some((j, b))) = (bracket(xs, x), bracket(ls, lambda)) else {
                    return C64::new(0.0, 0.0);
                };
                let i1 = (i + 1).min(xs.len() - 1);
                let j1 = (j + 1).min(ls.len() - 1);
                values[i][j] * ((1.0 - a) * (1.0 - b))
                    + values[i1][j] * (a * (1.0 - b))
                    + values[i][j1] * ((1.0 - a) * b)
                    + values[i1][j1] * (a * b)
            }
            Rho0::Func(f) => f(x, lambda),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Rho0::Zero)
    }

    /// N₀ = +√(1 − |ρ₀|²).
    pub fn n0(&self, x: f64, lambda: f64) -> f64 {
        (1.0 - self.eval(x, lambda).norm_sqr()).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioData {
    pub e_in: Signal,
    pub e0: Signal,
    pub rho0: Rho0,
    pub length: f64,
    pub horizon: f64,
}

impl ScenarioData {
    pub fn trivial(length: f64, horizon: f64) -> Self {
        Self { e_in: Signal::Zero, e0: Signal::Zero, rho0: Rho0::Zero, length, horizon }
    }

    pub fn is_trivial(&self) -> bool {
        self.e_in.is_zero() && self.e0.is_zero() && self.rho0.is_zero()
    }

    /// |ρ₀| ≤ 1 on a probe grid over x ∈ [0, L], λ ∈ `lambdas`; reports the
    /// first offending cell.
    pub fn check_rho0(&self, lambdas: &[f64], nx: usize) -> Result<()> {
        if self.rho0.is_zero() {
            return Ok(());
        }
        let xs: Vec<f64> = match &self.rho0 {
            Rho0::Table { x, .. } => x.clone(),
            _ => (0..nx).map(|i| self.length * i as f64 / (nx - 1).max(1) as f64).collect(),
        };
        let ls: Vec<f64> = match &self.rho0 {
            Rho0::Table { lambda, .. } => lambda.clone(),
            _ => lambdas.to_vec(),
        };
        for &x in &xs {
            for &l in &ls {
                let r = self.rho0.eval(x, l).norm();
                if r > 1.0 {
                    return Err(MbError::InvalidInput(format!(
                        "|rho0| = {r} > 1 at (x, lambda) = ({x}, {l}); N0 = sqrt(1 - |rho0|^2) needs |rho0| <= 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// |E_in(T)| ≤ 1e−6 · max |E_in|.
    pub fn check_decay(&self) -> Result<()> {
        let peak = self.e_in.max_abs(0.0, self.horizon, 4001);
        if peak == 0.0 {
            return Ok(());
        }
        let ratio = self.e_in.eval(self.horizon).norm() / peak;
        if ratio > 1e-6 {
            return Err(MbError::DecayViolation { ratio });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(MbError::InvalidInput(format!("length must be positive, got {}", self.length)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(MbError::InvalidInput(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}
