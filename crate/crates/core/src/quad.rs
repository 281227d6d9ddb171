//! Adaptive Gauss–Kronrod quadrature (G10/K21) for real and complex
//! integrands, with a semi-infinite variant and a periodic trapezoid rule.
//!
//! Used both by the library (quadrature evaluation modes, tabulated sources)
//! and as the independent oracle in tests.

use crate::C64;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated: closed under addition and real scaling.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208323579301,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes 1,3,5,7,9.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One 21-point Kronrod panel on [a,b]: (estimate, |K21 − G10|).
pub fn gk21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[10];
    let mut rg = T::zero();
    for j in 0..10 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk = rk + s * WGK[j];
        if j % 2 == 1 {
            rg = rg + s * WG[j / 2];
        }
    }
    let k = rk * hl;
    let g = rg * hl;
    (k, (k - g).magnitude())
}

/// Adaptive integration over [a,b] with global bisection of the worst panel.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult<T> {
    integrate_points(f, &[a, b], opts)
}

/// Adaptive integration over consecutive breakpoints `pts` (sorted).
pub fn integrate_points<T: QuadValue, F: Fn(f64) -> T>(f: F, pts: &[f64], opts: QuadOptions) -> QuadResult<T> {
    assert!(pts.len() >= 2, "need at least two breakpoints");
    let mut panels: Vec<(f64, f64, T, f64)> = pts
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| {
            let (v, e) = gk21(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    if panels.is_empty() {
        return QuadResult { value: T::zero(), error: 0.0, intervals: 0, converged: true };
    }
    loop {
        let total = panels.iter().fold(T::zero(), |acc, p| acc + p.2);
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if err <= target || panels.len() >= opts.max_intervals {
            return QuadResult { value: total, error: err, intervals: panels.len(), converged: err <= target };
        }
        let (iw, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (a, b, _, _) = panels[iw];
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // panel cannot be split further in floating point
            return QuadResult { value: total, error: err, intervals: panels.len(), converged: false };
        }
        let (v1, e1) = gk21(&f, a, m);
        let (v2, e2) = gk21(&f, m, b);
        panels[iw] = (a, m, v1, e1);
        panels.push((m, b, v2, e2));
    }
}

/// ∫_a^∞ f via x = a + t/(1−t), t ∈ [0,1).
pub fn integrate_semi_inf<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, opts: QuadOptions) -> QuadResult<T> {
    let g = |t: f64| {
        if t >= 1.0 {
            return T::zero();
        }
        let s = 1.0 - t;
        let v = f(a + t / s);
        v * (1.0 / (s * s))
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Periodic trapezoid rule on [0, 2π) with `n` nodes ψ_k = 2πk/n.
pub fn trapezoid_periodic<T: QuadValue, F: Fn(f64) -> T>(f: F, n: usize) -> T {
    let h = std::f64::consts::TAU / n as f64;
    (0..n).fold(T::zero(), |acc, k| acc + f(h * k as f64)) * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, QuadOptions::default());
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, QuadOptions::tol(1e-12, 1e-12));
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let r = integrate_semi_inf(|x: f64| (-x * x).exp(), 0.0, QuadOptions::default());
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        // ∫_0^∞ e^{-(1-3i)x} dx = 1/(1-3i)
        let z = C64::new(1.0, -3.0);
        let r = integrate_semi_inf(|x: f64| (-z * x).exp(), 0.0, QuadOptions::default());
        assert!((r.value - 1.0 / z).norm() < 1e-12);
    }

    #[test]
    fn trapezoid_spectral() {
        // ∫ e^{cos ψ} dψ = 2π I₀(1)
        let v = trapezoid_periodic(|p: f64| p.cos().exp(), 32);
        assert!((v - std::f64::consts::TAU * 1.266_065_877_752_008_4).abs() < 1e-13);
    }
}
