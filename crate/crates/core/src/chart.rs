//! Local front coordinates: for a point x, the angles ψ_j(x,t) whose front
//! point X(t,ψ_j) is the foot of a perpendicular from x, the phases
//! S_j = ⟨P, x − X⟩, and regular/focal classification.
//!
//! Between grid rays the front is represented by cubic Hermite interpolation
//! built from the variational data (X, X_ψ) and (P, P_ψ).

use crate::rays::FrontSet;
use crate::velocity::VelocityField;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("time {0} is not one of the front times")]
    TimeNotSampled(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub psi: f64,
    pub phase: f64,
    pub morse: u32,
    pub x_psi_norm: f64,
    pub c_at_x: f64,
    pub front_point: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub x: [f64; 2],
    pub t: f64,
    /// regular branches only
    pub branches: Vec<Branch>,
    /// candidates existed but all were focal (or the geometry is degenerate)
    pub masked: bool,
    /// candidates dropped because refinement did not converge
    pub newton_failures: usize,
}

/// Cubic Hermite curve on one ψ-cell: value, first and second ψ-derivative.
#[derive(Clone, Copy, Debug)]
pub struct HermiteCell {
    pub h: f64,
    pub y0: [f64; 2],
    pub d0: [f64; 2],
    pub y1: [f64; 2],
    pub d1: [f64; 2],
}

impl HermiteCell {
    pub fn eval(&self, s: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (s2, s3) = (s * s, s * s * s);
        let h = self.h;
        let b = [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2];
        let db = [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s];
        let ddb = [12.0 * s - 6.0, 6.0 * s - 4.0, -12.0 * s + 6.0, 6.0 * s - 2.0];
        let mut v = [0.0; 2];
        let mut d = [0.0; 2];
        let mut dd = [0.0; 2];
        for i in 0..2 {
            let c = [self.y0[i], h * self.d0[i], self.y1[i], h * self.d1[i]];
            v[i] = (0..4).map(|k| b[k] * c[k]).sum();
            d[i] = (0..4).map(|k| db[k] * c[k]).sum::<f64>() / h;
            dd[i] = (0..4).map(|k| ddb[k] * c[k]).sum::<f64>() / (h * h);
        }
        (v, d, dd)
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl FrontSet {
    fn cells(&self, ti: usize, k: usize) -> (HermiteCell, HermiteCell) {
        let n = self.psi.len();
        let (a, b) = (&self.samples[ti][k], &self.samples[ti][(k + 1) % n]);
        let h = std::f64::consts::TAU / n as f64;
        (
            HermiteCell { h, y0: a.x, d0: a.x_psi, y1: b.x, d1: b.x_psi },
            HermiteCell { h, y0: a.p, d0: a.p_psi, y1: b.p, d1: b.p_psi },
        )
    }

    fn locate_cell(&self, psi: f64) -> (usize, f64) {
        let n = self.psi.len();
        let u = psi.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * n as f64;
        let k = (u.floor() as usize).min(n - 1);
        (k, u - k as f64)
    }

    /// Interpolated (X, X_ψ, P) at (t_index, ψ).
    pub fn interpolate(&self, ti: usize, psi: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (k, s) = self.locate_cell(psi);
        let (cx, cp) = self.cells(ti, k);
        let (x, dx, _) = cx.eval(s);
        (x, dx, cp.eval(s).0)
    }

    /// |X_ψ(t,ψ)| > threshold·c₀·t
    pub fn is_regular(&self, psi: f64, t: f64, threshold: f64) -> Result<bool, ChartError> {
        let ti = self.time_index(t).ok_or(ChartError::TimeNotSampled(t))?;
        let (_, dx, _) = self.interpolate(ti, psi);
        Ok(t > 0.0 && norm(dx) > threshold * self.c0 * t)
    }
}

/// Find every branch ψ_j with |x − X(t,ψ_j)| ≤ band that is a local minimum
/// of the distance to the front, refined by safeguarded Newton iteration.
pub fn locate_branches(front: &FrontSet, vel: &VelocityField, x: [f64; 2], t: f64, band: f64, focal_threshold: f64) -> Result<ChartPoint, ChartError> {
    let ti = front.time_index(t).ok_or(ChartError::TimeNotSampled(t))?;
    let n = front.psi.len();
    let row = &front.samples[ti];
    let h = std::f64::consts::TAU / n as f64;
    let dist: Vec<f64> = row.iter().map(|s| norm(sub(x, s.x))).collect();
    let g: Vec<f64> = row.iter().map(|s| dot(sub(x, s.x), s.x_psi)).collect();
    let mut out = ChartPoint { x, t, branches: Vec::new(), masked: false, newton_failures: 0 };
    let mut focal_found = false;
    let mut degenerate = true;
    let mut any_near = false;
    for k in 0..n {
        let k1 = (k + 1) % n;
        let chord = norm(sub(row[k1].x, row[k].x));
        if dist[k].min(dist[k1]) > band + chord {
            continue;
        }
        any_near = true;
        let scale = norm(row[k].x_psi) * dist[k];
        if g[k].abs() > 1e-10 * scale.max(1e-300) {
            degenerate = false;
        }
        if !(g[k] > 0.0 && g[k1] <= 0.0) {
            continue;
        }
        let (cx, cp) = front.cells(ti, k);
        let resid = |s: f64| {
            let (v, d, dd) = cx.eval(s);
            let r = sub(x, v);
            (dot(r, d), -dot(d, d) + dot(r, dd), norm(r) * norm(d))
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut s = 0.5;
        let mut converged = false;
        for _ in 0..100 {
            let (gv, dg, sc) = resid(s);
            if gv.abs() <= 1e-13 * sc.max(1e-300) || hi - lo < 1e-15 {
                converged = true;
                break;
            }
            if gv > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            // Newton in s (dψ = h ds), bisection when it leaves the bracket
            let step = if dg != 0.0 { -gv / (dg * h) } else { f64::NAN };
            let cand = s + step;
            s = if cand.is_finite() && cand > lo && cand < hi { cand } else { 0.5 * (lo + hi) };
        }
        if !converged {
            out.newton_failures += 1;
            continue;
        }
        let (xf, dxf, _) = cx.eval(s);
        let d = norm(sub(x, xf));
        if d > band {
            continue;
        }
        let p = cp.eval(s).0;
        let xpn = norm(dxf);
        if !(t > 0.0 && xpn > focal_threshold * front.c0 * t) {
            focal_found = true;
            continue;
        }
        let node = if s < 0.5 { k } else { k1 };
        out.branches.push(Branch {
            psi: front.psi[k] + s * h,
            phase: dot(p, sub(x, xf)),
            morse: row[node].morse,
            x_psi_norm: xpn,
            c_at_x: vel.c(xf),
            front_point: xf,
        });
    }
    if any_near && degenerate {
        out.branches.clear();
        out.masked = true;
    } else if out.branches.is_empty() && focal_found {
        out.masked = true;
    }
    Ok(out)
}

/// Default band half-width 12·μ·ω·b_max.
pub fn default_band(mu: f64, omega: f64, b_max: f64) -> f64 {
    12.0 * mu * omega * b_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{build_front, FrontOptions};

    #[test]
    fn hermite_reproduces_cubic() {
        let f = |t: f64| [t * t * t - 2.0 * t, 0.5 * t * t + 1.0];
        let df = |t: f64| [3.0 * t * t - 2.0, t];
        let (a, b) = (0.3, 0.55);
        let c = HermiteCell { h: b - a, y0: f(a), d0: df(a), y1: f(b), d1: df(b) };
        let (v, d, dd) = c.eval(0.4);
        let t = a + 0.4 * (b - a);
        assert!((v[0] - f(t)[0]).abs() < 1e-14 && (d[0] - df(t)[0]).abs() < 1e-13);
        assert!((dd[0] - 6.0 * t).abs() < 1e-11 && (dd[1] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn circle_branch_and_phase() {
        let v = VelocityField::constant(1.0).unwrap();
        let f = build_front(&v, 64, &[2.0], FrontOptions::default()).unwrap();
        let cp = locate_branches(&f, &v, [2.3, 0.0], 2.0, 1.0, 1e-3).unwrap();
        assert_eq!(cp.branches.len(), 1);
        let b = cp.branches[0];
        assert!(b.psi.abs() < 1e-12 || (b.psi - std::f64::consts::TAU).abs() < 1e-12);
        assert!((b.phase - 0.3).abs() < 1e-12);
        let cp = locate_branches(&f, &v, [0.0, 0.0], 2.0, 3.0, 1e-3).unwrap();
        assert!(cp.masked && cp.branches.is_empty());
        let cp = locate_branches(&f, &v, [5.0, 5.0], 2.0, 1.0, 1e-3).unwrap();
        assert!(!cp.masked && cp.branches.is_empty());
    }
}
