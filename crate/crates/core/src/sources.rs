//! Problem scales and source models: the ellipsoidal spatial factor V and
//! its Fourier transform, the temporal factor g₀, the half-line transform
//! G₀(ξ,t) and the even symbols f₁, f₂, f₃.
//!
//! Fourier convention: Ṽ(p) = (2π)^{-1} ∫ V(y) e^{−i⟨p,y⟩} dy, so that
//! V(y) = (2π)^{-1} ∫ Ṽ(p) e^{i⟨p,y⟩} dp.

use crate::quad::{integrate_semi_inf, QuadOptions};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("invalid parameter `{name}`: {why}")]
    Invalid { name: &'static str, why: String },
}

fn invalid(name: &'static str, why: impl Into<String>) -> SourceError {
    SourceError::Invalid { name, why: why.into() }
}

/// λ (decay rate), μ (source size), c₀ (velocity at the origin), ν (decay exponent).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleParams {
    lambda: f64,
    mu: f64,
    c0: f64,
    nu: f64,
}

impl ScaleParams {
    pub fn new(lambda: f64, mu: f64, c0: f64, nu: f64) -> Result<Self, SourceError> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("c0", c0), ("nu", nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(Self { lambda, mu, c0, nu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    /// ω = c₀/(λμ), always recomputed.
    pub fn omega(&self) -> f64 {
        self.c0 / (self.lambda * self.mu)
    }
}

/// A(1 + (y₁'/b₁)² + (y₂'/b₂)²)^{−3/2} with y' = T(θ)y, optionally
/// differentiated (multi-index of total order ≤ 2) before the rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialSource {
    pub amplitude: f64,
    pub b1: f64,
    pub b2: f64,
    pub theta: f64,
    pub deriv: [u32; 2],
}

impl SpatialSource {
    pub fn new(amplitude: f64, b1: f64, b2: f64, theta: f64) -> Result<Self, SourceError> {
        Self::with_deriv(amplitude, b1, b2, theta, [0, 0])
    }

    pub fn with_deriv(amplitude: f64, b1: f64, b2: f64, theta: f64, deriv: [u32; 2]) -> Result<Self, SourceError> {
        if !(b1 > 0.0 && b1.is_finite()) {
            return Err(invalid("b1", format!("must be positive, got {b1}")));
        }
        if !(b2 > 0.0 && b2.is_finite()) {
            return Err(invalid("b2", format!("must be positive, got {b2}")));
        }
        if !amplitude.is_finite() || !theta.is_finite() {
            return Err(invalid("amplitude", "amplitude and theta must be finite"));
        }
        if deriv[0] + deriv[1] > 2 {
            return Err(invalid("deriv", "derivative order above 2 is not supported"));
        }
        Ok(Self { amplitude, b1, b2, theta, deriv })
    }

    pub fn has_deriv(&self) -> bool {
        self.deriv != [0, 0]
    }

    pub fn b_min(&self) -> f64 {
        self.b1.min(self.b2)
    }
    pub fn b_max(&self) -> f64 {
        self.b1.max(self.b2)
    }

    /// y' = T(θ)y: coordinates in the frame of the ellipse axes.
    pub fn to_body(&self, y: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * y[0] + s * y[1], -s * y[0] + c * y[1]]
    }

    /// V(y) (or its derivative) at a point in source units.
    pub fn eval(&self, y: [f64; 2]) -> f64 {
        let yb = self.to_body(y);
        let b = [self.b1, self.b2];
        let q = (yb[0] / b[0]).powi(2) + (yb[1] / b[1]).powi(2);
        let f0 = (1.0 + q).powf(-1.5);
        let a = self.amplitude;
        match self.deriv {
            [0, 0] => a * f0,
            _ => {
                // f(q) = (1+q)^{-3/2}; ∂_i V = A f'(q) 2y_i/b_i²; ∂_i∂_j V = A[f'' 4y_iy_j/(b_i²b_j²) + f' 2δ_ij/b_i²]
                let f1 = -1.5 * (1.0 + q).powf(-2.5);
                let f2 = 3.75 * (1.0 + q).powf(-3.5);
                let g = |i: usize| 2.0 * yb[i] / (b[i] * b[i]);
                match self.deriv {
                    [1, 0] => a * f1 * g(0),
                    [0, 1] => a * f1 * g(1),
                    [2, 0] => a * (f2 * g(0) * g(0) + f1 * 2.0 / (b[0] * b[0])),
                    [0, 2] => a * (f2 * g(1) * g(1) + f1 * 2.0 / (b[1] * b[1])),
                    _ => a * f2 * g(0) * g(1),
                }
            }
        }
    }

    /// Ṽ(p) = (i p')^deriv · A b₁b₂ e^{−√(b₁²p₁'² + b₂²p₂'²)}, p' = T(θ)p.
    pub fn fourier(&self, p: [f64; 2]) -> C64 {
        let pb = self.to_body(p);
        let e = (self.b1 * pb[0]).hypot(self.b2 * pb[1]);
        let base = self.amplitude * self.b1 * self.b2 * (-e).exp();
        self.deriv_factor(pb) * base
    }

    fn deriv_factor(&self, pb: [f64; 2]) -> C64 {
        let i = C64::new(0.0, 1.0);
        (i * pb[0]).powu(self.deriv[0]) * (i * pb[1]).powu(self.deriv[1])
    }

    /// β(ψ) for the rotated source: Ṽ(ρn(ψ)) ∝ e^{−ρβ(ψ)}.
    pub fn beta(&self, psi: f64) -> f64 {
        let (s, c) = (psi - self.theta).sin_cos();
        (self.b1 * c).hypot(self.b2 * s)
    }

    /// Angular factor (i n')^deriv with n' = T(θ)n(ψ); Ṽ(ρn) = factor·ρ^|deriv|·A b₁b₂ e^{−ρβ}.
    pub fn angular_factor(&self, psi: f64) -> C64 {
        self.deriv_factor(self.to_body([psi.cos(), psi.sin()]))
    }

    pub fn deriv_order(&self) -> u32 {
        self.deriv[0] + self.deriv[1]
    }
}

/// One term coef·(ξ + a)^{−n} of a pole expansion of G₀(ξ,t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTerm {
    pub coef: C64,
    pub a: C64,
    pub n: u32,
}

pub const MAX_POLY_DEGREE: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum TemporalKind {
    /// g₀(τ) = a e^{−τ}(sin(ατ+φ₀) − sin φ₀)
    Sine { alpha: f64, phi0: f64 },
    /// g₀(τ) = e^{−τ} Σ_k P_k τ^k/k!, coefficients P₁..P_n
    Polynomial { coeffs: Vec<f64> },
    /// samples g₀(kΔτ), k = 0..; piecewise linear, zero beyond the table
    Tabulated { dt: f64, samples: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalSource {
    kind: TemporalKind,
    norm: f64,
}

impl TemporalSource {
    pub fn sine(alpha: f64, phi0: f64) -> Result<Self, SourceError> {
        let den = alpha * phi0.cos() - alpha * alpha * phi0.sin();
        if !(alpha.is_finite() && phi0.is_finite()) || den.abs() < 1e-12 {
            return Err(invalid("alpha", "normalizing factor (α²+1)/(α cos φ₀ − α² sin φ₀) is singular"));
        }
        Ok(Self { kind: TemporalKind::Sine { alpha, phi0 }, norm: (alpha * alpha + 1.0) / den })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, SourceError> {
        if coeffs.is_empty() || coeffs.len() > MAX_POLY_DEGREE {
            return Err(invalid("coefficients", format!("degree must be 1..={MAX_POLY_DEGREE}, got {}", coeffs.len())));
        }
        let s: f64 = coeffs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid("coefficients", format!("must sum to 1 (normalization), got {s}")));
        }
        Ok(Self { kind: TemporalKind::Polynomial { coeffs }, norm: 1.0 })
    }

    pub fn tabulated(dt: f64, samples: Vec<f64>) -> Result<Self, SourceError> {
        if !(dt > 0.0) || samples.len() < 2 {
            return Err(invalid("samples", "need dt > 0 and at least two samples"));
        }
        if samples[0] != 0.0 {
            return Err(invalid("samples", "g0(0) must be 0"));
        }
        if samples.last().unwrap().abs() >= 1e-10 {
            return Err(invalid("samples", "table must decay below 1e-10 at its end"));
        }
        Ok(Self { kind: TemporalKind::Tabulated { dt, samples }, norm: 1.0 })
    }

    pub fn kind(&self) -> &TemporalKind {
        &self.kind
    }

    /// Normalizing factor a of the sine kind (1 otherwise).
    pub fn norm_factor(&self) -> f64 {
        self.norm
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, TemporalKind::Tabulated { .. })
    }

    /// P^{(j)}(t), j = 0..=n for the polynomial kind.
    fn poly_derivs(coeffs: &[f64], t: f64) -> Vec<f64> {
        let n = coeffs.len();
        // P(τ) = Σ_{k=1}^n P_k τ^k/k!  ⇒  P^{(j)}(t) = Σ_{k≥j} P_k t^{k−j}/(k−j)!
        (0..=n)
            .map(|j| {
                let mut s = 0.0;
                let mut fact = 1.0;
                for m in 0..=(n - j) {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    let k = j + m;
                    if k >= 1 {
                        s += coeffs[k - 1] * t.powi(m as i32) / fact;
                    }
                }
                s
            })
            .collect()
    }

    /// g₀(τ), τ ≥ 0.
    pub fn eval(&self, tau: f64) -> f64 {
        debug_assert!(tau >= 0.0, "g0 evaluated at negative time {tau}");
        match &self.kind {
            TemporalKind::Sine { alpha, phi0 } => self.norm * (-tau).exp() * ((alpha * tau + phi0).sin() - phi0.sin()),
            TemporalKind::Polynomial { coeffs } => (-tau).exp() * Self::poly_derivs(coeffs, tau)[0],
            TemporalKind::Tabulated { dt, samples } => {
                let x = tau / dt;
                let k = x.floor() as usize;
                if k + 1 >= samples.len() {
                    return 0.0;
                }
                let f = x - k as f64;
                samples[k] * (1.0 - f) + samples[k + 1] * f
            }
        }
    }

    /// g₀'(τ) (piecewise constant for the tabulated kind).
    pub fn eval_deriv(&self, tau: f64) -> f64 {
        match &self.kind {
            TemporalKind::Sine { alpha, phi0 } => {
                let th = alpha * tau + phi0;
                self.norm * (-tau).exp() * (alpha * th.cos() - th.sin() + phi0.sin())
            }
            TemporalKind::Polynomial { coeffs } => {
                let d = Self::poly_derivs(coeffs, tau);
                (-tau).exp() * (d[1] - d[0])
            }
            TemporalKind::Tabulated { dt, samples } => {
                let k = (tau / dt).floor() as usize;
                if k + 1 >= samples.len() {
                    return 0.0;
                }
                (samples[k + 1] - samples[k]) / dt
            }
        }
    }

    /// Pole expansion G₀(ξ,t) = Σ coef·(ξ+a)^{−n}; `None` for tabulated sources.
    pub fn poles(&self, t: f64) -> Option<Vec<PoleTerm>> {
        let i = C64::new(0.0, 1.0);
        let decay = (-t).exp();
        match &self.kind {
            TemporalKind::Sine { alpha, phi0 } => {
                let th = alpha * t + phi0;
                let k = self.norm * decay;
                Some(vec![
                    PoleTerm { coef: 0.5 * k * C64::from_polar(1.0, -th), a: C64::new(*alpha, -1.0), n: 1 },
                    PoleTerm { coef: -0.5 * k * C64::from_polar(1.0, th), a: C64::new(-alpha, -1.0), n: 1 },
                    PoleTerm { coef: i * k * phi0.sin(), a: C64::new(0.0, -1.0), n: 1 },
                ])
            }
            TemporalKind::Polynomial { coeffs } => {
                // (1+iξ)^{−(j+1)} = i^{−(j+1)} (ξ − i)^{−(j+1)}
                let d = Self::poly_derivs(coeffs, t);
                Some(
                    d.iter()
                        .enumerate()
                        .map(|(j, &pj)| PoleTerm {
                            coef: decay * pj * i.powi(-(j as i32 + 1)),
                            a: C64::new(0.0, -1.0),
                            n: j as u32 + 1,
                        })
                        .collect(),
                )
            }
            TemporalKind::Tabulated { .. } => None,
        }
    }

    /// G₀(ξ,t) = ∫₀^∞ e^{−iξτ} g₀(τ+t) dτ.
    pub fn g0_transform(&self, xi: f64, t: f64) -> C64 {
        debug_assert!(t >= 0.0);
        match &self.kind {
            TemporalKind::Tabulated { dt, samples } => tabulated_transform(*dt, samples, xi, t),
            _ => self
                .poles(t)
                .unwrap()
                .iter()
                .map(|p| p.coef * (C64::new(xi, 0.0) + p.a).powi(-(p.n as i32)))
                .sum(),
        }
    }

    /// (f₁(ξ), f₂(ξ), f₃(ξ,t)).
    pub fn symbols(&self, xi: f64, t: f64) -> (f64, f64, f64) {
        debug_assert!(xi >= 0.0);
        let z = xi.sqrt();
        let f1 = self.g0_transform(z, 0.0).re;
        let f3 = self.g0_transform(z, t).re;
        (f1, self.im_ratio(z), f3)
    }

    /// Im G₀(ζ,0)/ζ, even in ζ; near 0 by two-point even extrapolation.
    pub fn im_ratio(&self, zeta: f64) -> f64 {
        const EPS: f64 = 1e-4;
        let h = |s: f64| self.g0_transform(s, 0.0).im / s;
        if zeta.abs() < EPS {
            (4.0 * h(EPS) - h(2.0 * EPS)) / 3.0
        } else {
            h(zeta)
        }
    }

    /// ∫₀^∞ g₀ dτ by adaptive quadrature (normalization check).
    pub fn integral(&self) -> f64 {
        integrate_semi_inf(|t| self.eval(t), 0.0, QuadOptions::tol(1e-15, 1e-13)).value
    }
}

// ∫₀¹ (1−u) e^{ku} du and ∫₀¹ u e^{ku} du
fn linear_weights(k: C64) -> (C64, C64) {
    if k.norm() < 1e-2 {
        let mut w0 = C64::new(0.0, 0.0);
        let mut w1 = C64::new(0.0, 0.0);
        let mut p = C64::new(1.0, 0.0); // k^m/m!
        for m in 0..10 {
            let mf = m as f64;
            w1 += p / (mf + 2.0);
            w0 += p / ((mf + 1.0) * (mf + 2.0));
            p *= k / (mf + 1.0);
        }
        (w0, w1)
    } else {
        let ek = k.exp();
        let w1 = ek * (1.0 / k - 1.0 / (k * k)) + 1.0 / (k * k);
        let full = (ek - 1.0) / k;
        (full - w1, w1)
    }
}

// Exact transform of the piecewise-linear interpolant (Filon-trapezoid).
fn tabulated_transform(dt: f64, samples: &[f64], xi: f64, t: f64) -> C64 {
    let n = samples.len();
    let end = dt * (n - 1) as f64;
    if t >= end {
        return C64::new(0.0, 0.0);
    }
    let val = |x: f64| {
        let s = x / dt;
        let k = (s.floor() as usize).min(n - 2);
        let f = s - k as f64;
        samples[k] * (1.0 - f) + samples[k + 1] * f
    };
    let mut knots = vec![t];
    let first = (t / dt).floor() as usize + 1;
    knots.extend((first..n).map(|k| dt * k as f64));
    let mut acc = C64::new(0.0, 0.0);
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let h = x1 - x0;
        if h <= 0.0 {
            continue;
        }
        let k = C64::new(0.0, -xi * h);
        let (w0, w1) = linear_weights(k);
        // shift τ = σ − t
        let phase = C64::from_polar(1.0, -xi * (x0 - t));
        acc += phase * h * (w0 * val(x0) + w1 * val(x1));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_omega() {
        let s = ScaleParams::new(20.0, 0.05, 1.0, 1.0).unwrap();
        assert_eq!(s.omega(), 1.0 / (20.0 * 0.05));
        assert!(ScaleParams::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn spatial_examples() {
        let v = SpatialSource::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(v.eval([0.0, 0.0]), 1.0);
        let v = SpatialSource::new(2.0, 1.0, 2.0, 0.0).unwrap();
        assert!((v.eval([1.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-15);
        let v = SpatialSource::new(1.0, 1.0, 2.0, 0.0).unwrap();
        assert!((v.fourier([0.0, 0.0]).re - 2.0).abs() < 1e-15);
        let v = SpatialSource::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((v.fourier([3.0, 4.0]).re - (-5.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn rotation_moves_long_axis() {
        let v = SpatialSource::new(1.0, 1.0, 4.0, std::f64::consts::PI / 10.0).unwrap();
        // long axis (b2) along the rotated y-axis direction (−sin θ, cos θ)
        let (s, c) = v.theta.sin_cos();
        let along = v.eval([-3.0 * s, 3.0 * c]);
        let across = v.eval([3.0 * c, 3.0 * s]);
        assert!(along > across);
        assert!((v.beta(std::f64::consts::PI / 10.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_normalization_factor() {
        let g = TemporalSource::sine(2.0, 0.3).unwrap();
        let a = (4.0 + 1.0) / (2.0 * 0.3f64.cos() - 4.0 * 0.3f64.sin());
        assert!((g.norm_factor() - a).abs() < 1e-14);
        assert_eq!(g.eval(0.0), 0.0);
        assert!((g.integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polynomial_fig2_value() {
        let g = TemporalSource::polynomial(vec![0.2, 0.8]).unwrap();
        assert!((g.eval(1.0) - 0.6 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(TemporalSource::polynomial(vec![0.2, 0.7]).is_err());
        assert!(TemporalSource::polynomial(vec![0.1; 10]).is_err());
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for g in [TemporalSource::sine(1.5, 0.2).unwrap(), TemporalSource::polynomial(vec![0.1, 0.5, 0.4]).unwrap()] {
            for &t in &[0.1, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (g.eval(t + h) - g.eval(t - h)) / (2.0 * h);
                assert!((fd - g.eval_deriv(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tabulated_transform_matches_quadrature_of_interpolant() {
        let dt = 0.1;
        let mut samples: Vec<f64> = (0..401).map(|k| {
            let t = k as f64 * dt;
            t * t * 0.5 * (-t).exp()
        }).collect();
        *samples.last_mut().unwrap() = 0.0;
        let g = TemporalSource::tabulated(dt, samples).unwrap();
        for &(xi, t) in &[(0.0, 0.0), (3.0, 0.5), (12.0, 1.234)] {
            let mut pts = vec![0.0];
            pts.extend((0..401).map(|k| k as f64 * dt - t).filter(|&x| x > 0.0));
            let q = crate::quad::integrate_points(|tau| g.eval(tau + t) * C64::from_polar(1.0, -xi * tau), &pts, QuadOptions::tol(1e-15, 1e-13));
            let v = g.g0_transform(xi, t);
            assert!((v - q.value).norm() < 1e-10, "xi={xi} t={t}: {v} vs {}", q.value);
        }
    }

    #[test]
    fn f2_extrapolation_is_continuous() {
        let g = TemporalSource::sine(2.0, 0.0).unwrap();
        let near = g.im_ratio(0.0);
        let away = g.im_ratio(3e-4);
        assert!((near - away).abs() < 1e-6);
    }
}
