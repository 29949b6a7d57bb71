//! Point-spread-function model and the overlap functionals that
//! parameterize everything downstream.
//!
//! The amplitude PSF is real-valued with unit L2 norm. Two variants are
//! supported: the closed-form Gaussian `psi(x) = (2 pi x_R^2)^(-1/4)
//! exp(-x^2 / (4 x_R^2))` and a numerically sampled profile on a uniform
//! grid. All functionals of the Gaussian have closed forms; the sampled
//! path goes through composite Gauss-Legendre quadrature of a cubic
//! interpolant.

use crate::error::{Error, Result};
use crate::quadrature;
use serde::Serialize;

/// Integration settings for the sampled-PSF path.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureSpec {
    /// Integration domain is [-half_width, half_width].
    pub half_width: f64,
    /// Total Gauss-Legendre nodes, split into 64-node panels.
    pub nodes: usize,
}

impl QuadratureSpec {
    pub fn new(half_width: f64, nodes: usize) -> Self {
        assert!(nodes >= 64, "need at least 64 quadrature nodes");
        Self { half_width, nodes }
    }

    fn panels(&self) -> usize {
        (self.nodes / 64).max(1)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            half_width: 16.0,
            nodes: 512,
        }
    }
}

/// Sampled amplitude profile on a uniform grid, normalized to unit L2 norm.
#[derive(Debug, Clone)]
pub struct NumericPsf {
    x0: f64,
    dx: f64,
    amp: Vec<f64>,
    /// 4th-order central-difference derivative samples.
    damp: Vec<f64>,
    /// Effective width: standard deviation of |psi|^2.
    width: f64,
    pub quadrature: QuadratureSpec,
}

/// Amplitude point-spread function with unit L2 norm.
#[derive(Debug, Clone)]
pub enum PsfModel {
    Gaussian { x_r: f64 },
    Numeric(NumericPsf),
}

/// The scalar overlap functionals at one separation.
#[derive(Debug, Clone, Copy)]
pub struct OverlapFunctionals {
    pub s: f64,
    pub delta: f64,
    /// 1 - delta computed without cancellation (expm1 on the Gaussian
    /// path); the antisymmetric-mode denominators need it at small s.
    pub one_minus_delta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub dk2: f64,
    pub eps_plus_sq: f64,
    pub eps_minus_sq: f64,
}

impl PsfModel {
    /// Closed-form Gaussian PSF with Rayleigh length `x_r`.
    pub fn gaussian(x_r: f64) -> Result<Self> {
        if !(x_r.is_finite() && x_r > 0.0) {
            return Err(Error::NonFinite("x_R"));
        }
        Ok(PsfModel::Gaussian { x_r })
    }

    /// Sampled PSF on a uniform grid; the amplitude is normalized to unit
    /// L2 norm on construction.
    pub fn from_samples(xs: &[f64], amps: &[f64], quadrature: QuadratureSpec) -> Result<Self> {
        assert_eq!(xs.len(), amps.len());
        if xs.len() < 8 {
            return Err(Error::NonFinite("fewer than 8 samples"));
        }
        for &a in amps {
            if !a.is_finite() {
                return Err(Error::NonFinite("sample amplitude"));
            }
        }
        let dx = xs[1] - xs[0];
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::NonFinite("sample grid step"));
        }
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx {
                return Err(Error::NonFinite("sample grid is not uniform"));
            }
        }
        let mut psf = NumericPsf {
            x0: xs[0],
            dx,
            amp: amps.to_vec(),
            damp: Vec::new(),
            width: 0.0,
            quadrature,
        };
        psf.normalize()?;
        Ok(PsfModel::Numeric(psf))
    }

    /// Reads a two-column `x,amplitude` CSV (header optional, uniform grid).
    pub fn from_csv_str(text: &str, quadrature: QuadratureSpec) -> Result<Self> {
        let mut xs = Vec::new();
        let mut amps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let a = cols.next().unwrap_or("").trim();
            let b = cols.next().unwrap_or("").trim();
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    amps.push(y);
                }
                _ if i == 0 => continue, // header row
                _ => return Err(Error::NonFinite("unparsable CSV row")),
            }
        }
        Self::from_samples(&xs, &amps, quadrature)
    }

    /// Rayleigh length: exact for the Gaussian, the standard deviation of
    /// |psi|^2 for a sampled profile.
    pub fn x_r(&self) -> f64 {
        match self {
            PsfModel::Gaussian { x_r } => *x_r,
            PsfModel::Numeric(p) => p.width,
        }
    }

    /// Image overlap delta(s) = Re int psi(x+s/2) psi(x-s/2) dx.
    pub fn delta(&self, s: f64) -> Result<f64> {
        match self {
            PsfModel::Gaussian { x_r } => Ok((-s * s / (8.0 * x_r * x_r)).exp()),
            PsfModel::Numeric(p) => {
                p.check_domain(s)?;
                Ok(p.integrate_product(s, false))
            }
        }
    }

    /// gamma(s) = d delta / d s.
    pub fn gamma(&self, s: f64) -> Result<f64> {
        match self {
            PsfModel::Gaussian { x_r } => Ok(-(s / (4.0 * x_r * x_r)) * self.delta(s)?),
            PsfModel::Numeric(p) => {
                // for a symmetric PSF, d delta/ds = int psi'(x+s/2) psi(x-s/2) dx
                p.check_domain(s)?;
                Ok(p.integrate_mixed(s))
            }
        }
    }

    /// beta(s) = int psi'(x+s/2) psi'(x-s/2) dx.
    pub fn beta(&self, s: f64) -> Result<f64> {
        match self {
            PsfModel::Gaussian { x_r } => {
                let xr2 = x_r * x_r;
                Ok(self.delta(s)? * (1.0 - s * s / (4.0 * xr2)) / (4.0 * xr2))
            }
            PsfModel::Numeric(p) => {
                p.check_domain(s)?;
                Ok(p.integrate_product(s, true))
            }
        }
    }

    /// Momentum variance dk^2 = int |psi'(x)|^2 dx.
    pub fn momentum_variance(&self) -> Result<f64> {
        let v = match self {
            PsfModel::Gaussian { x_r } => 1.0 / (4.0 * x_r * x_r),
            PsfModel::Numeric(p) => p.integrate_product(0.0, true),
        };
        if !v.is_finite() {
            return Err(Error::NonFinite("momentum variance"));
        }
        Ok(v)
    }

    /// All functionals at one separation, with the epsilon terms
    /// `eps_pm^2 = dk^2 -+ beta - gamma^2 / (1 +- delta)`.
    ///
    /// At s = 0 the antisymmetric ratio gamma^2/(1-delta) is taken at its
    /// limit 2 dk^2, so both epsilon terms vanish there.
    pub fn functionals(&self, s: f64) -> Result<OverlapFunctionals> {
        assert!(s >= 0.0, "separation must be non-negative");
        let dk2 = self.momentum_variance()?;
        if s == 0.0 {
            let beta = self.beta(0.0)?;
            return Ok(OverlapFunctionals {
                s,
                delta: self.delta(0.0)?,
                one_minus_delta: 0.0,
                gamma: 0.0,
                beta,
                dk2,
                eps_plus_sq: clamp_eps(dk2 - beta, dk2, '+')?,
                eps_minus_sq: clamp_eps(beta - dk2, dk2, '-')?,
            });
        }
        let delta = self.delta(s)?;
        let one_minus_delta = match self {
            PsfModel::Gaussian { x_r } => -(-s * s / (8.0 * x_r * x_r)).exp_m1(),
            PsfModel::Numeric(_) => 1.0 - delta,
        };
        let gamma = self.gamma(s)?;
        let beta = self.beta(s)?;
        let g2 = gamma * gamma;
        let eps_plus_sq = clamp_eps(dk2 - beta - g2 / (1.0 + delta), dk2, '+')?;
        let eps_minus_sq = clamp_eps(dk2 + beta - g2 / one_minus_delta, dk2, '-')?;
        Ok(OverlapFunctionals {
            s,
            delta,
            one_minus_delta,
            gamma,
            beta,
            dk2,
            eps_plus_sq,
            eps_minus_sq,
        })
    }
}

fn clamp_eps(value: f64, dk2: f64, sign: char) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -1e-6 * dk2 {
        Ok(0.0)
    } else {
        Err(Error::EpsilonNegative {
            sign,
            value,
            dk2,
        })
    }
}

/// Re-normalizes a sampled PSF to unit L2 norm; Gaussian models pass
/// through unchanged (normalized by construction).
pub fn normalize_psf(raw: PsfModel) -> Result<PsfModel> {
    match raw {
        g @ PsfModel::Gaussian { .. } => Ok(g),
        PsfModel::Numeric(mut p) => {
            p.normalize()?;
            Ok(PsfModel::Numeric(p))
        }
    }
}

impl NumericPsf {
    fn normalize(&mut self) -> Result<()> {
        // Simpson weights on the sample grid are enough here; accuracy is
        // limited by the sampling itself, not the norm estimate.
        let norm2: f64 = simpson(&self.amp.iter().map(|a| a * a).collect::<Vec<_>>(), self.dx);
        if norm2 <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        if !norm2.is_finite() {
            return Err(Error::NonFinite("squared norm"));
        }
        let scale = 1.0 / norm2.sqrt();
        for a in &mut self.amp {
            *a *= scale;
        }
        // Second pass against the quadrature route itself so that
        // delta(0) = 1 to full precision.
        let q = self.integrate_product(0.0, false);
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::NonFinite("quadrature norm"));
        }
        let scale2 = 1.0 / q.sqrt();
        for a in &mut self.amp {
            *a *= scale2;
        }
        self.damp = fourth_order_derivative(&self.amp, self.dx);
        // Effective width from the intensity second moment.
        let n = self.amp.len();
        let mut m0 = vec![0.0; n];
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for i in 0..n {
            let x = self.x0 + i as f64 * self.dx;
            let p = self.amp[i] * self.amp[i];
            m0[i] = p;
            m1[i] = x * p;
            m2[i] = x * x * p;
        }
        let z0 = simpson(&m0, self.dx);
        let mean = simpson(&m1, self.dx) / z0;
        let var = simpson(&m2, self.dx) / z0 - mean * mean;
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::NonFinite("intensity variance"));
        }
        self.width = var.sqrt();
        Ok(())
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        let required = 0.5 * s + 8.0 * self.width;
        if self.quadrature.half_width < required {
            return Err(Error::QuadratureDomainTooSmall {
                half_width: self.quadrature.half_width,
                required,
                s,
            });
        }
        Ok(())
    }

    /// int f(x+s/2) f(x-s/2) dx with f the amplitude (or its derivative).
    fn integrate_product(&self, s: f64, deriv: bool) -> f64 {
        let w = self.quadrature.half_width;
        let f = |x: f64| {
            if deriv {
                self.eval_interp(&self.damp, x)
            } else {
                self.eval_interp(&self.amp, x)
            }
        };
        quadrature::integrate(
            |x| f(x + 0.5 * s) * f(x - 0.5 * s),
            -w,
            w,
            self.quadrature.panels(),
            64,
        )
    }

    /// int f'(x+s/2) f(x-s/2) dx with f the amplitude.
    fn integrate_mixed(&self, s: f64) -> f64 {
        let w = self.quadrature.half_width;
        quadrature::integrate(
            |x| self.eval_interp(&self.damp, x + 0.5 * s) * self.eval_interp(&self.amp, x - 0.5 * s),
            -w,
            w,
            self.quadrature.panels(),
            64,
        )
    }

    /// Cubic Catmull-Rom interpolation on the uniform grid; zero outside.
    fn eval_interp(&self, ys: &[f64], x: f64) -> f64 {
        let t = (x - self.x0) / self.dx;
        if t < 0.0 || t > (ys.len() - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(ys.len() - 2);
        let u = t - i as f64;
        let y0 = if i == 0 { ys[0] } else { ys[i - 1] };
        let y1 = ys[i];
        let y2 = ys[i + 1];
        let y3 = if i + 2 < ys.len() { ys[i + 2] } else { ys[i + 1] };
        let a = -0.5 * y0 + 1.5 * y1 - 1.5 * y2 + 0.5 * y3;
        let b = y0 - 2.5 * y1 + 2.0 * y2 - 0.5 * y3;
        let c = 0.5 * (y2 - y0);
        ((a * u + b) * u + c) * u + y1
    }
}

fn simpson(ys: &[f64], dx: f64) -> f64 {
    let n = ys.len();
    if n < 3 {
        return ys.iter().sum::<f64>() * dx;
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        acc += dx / 3.0 * (ys[i] + 4.0 * ys[i + 1] + ys[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        // trailing trapezoid for even sample counts
        acc += 0.5 * dx * (ys[n - 2] + ys[n - 1]);
    }
    acc
}

fn fourth_order_derivative(ys: &[f64], dx: f64) -> Vec<f64> {
    let n = ys.len();
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-ys[i + 2] + 8.0 * ys[i + 1] - 8.0 * ys[i - 1] + ys[i - 2]) / (12.0 * dx);
    }
    d[0] = (ys[1] - ys[0]) / dx;
    d[1] = (ys[2] - ys[0]) / (2.0 * dx);
    d[n - 2] = (ys[n - 1] - ys[n - 3]) / (2.0 * dx);
    d[n - 1] = (ys[n - 1] - ys[n - 2]) / dx;
    d
}
