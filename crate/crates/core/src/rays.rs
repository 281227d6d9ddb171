//! Rays of H(x,p) = |p|c(x) launched from the origin, with the tangent
//! (variational) system for X_ψ, P_ψ, integrated by Dormand–Prince 5(4)
//! with Hairer's dense output; fronts, focal points and Morse indices.

use crate::velocity::VelocityField;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error("ray integrator: step size underflow at tau = {tau}")]
    StepUnderflow { tau: f64 },
    #[error("ray integrator: momentum |p| fell below 1e-6 at tau = {tau}")]
    MomentumVanished { tau: f64 },
    #[error("ray integrator: Hamiltonian drift {drift:e} exceeds tolerance {tol:e}")]
    Drift { drift: f64, tol: f64 },
    #[error("invalid ray request: {0}")]
    Invalid(String),
}

/// Phase-space point (x, p) at time t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayState {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub t: f64,
}

/// [x, p, X_ψ, P_ψ]
pub type Phase = [f64; 8];

pub fn rhs(vel: &VelocityField, y: &Phase) -> Result<Phase, f64> {
    let (x, p) = ([y[0], y[1]], [y[2], y[3]]);
    let (dx, dp) = ([y[4], y[5]], [y[6], y[7]]);
    let np = p[0].hypot(p[1]);
    if np < 1e-6 {
        return Err(np);
    }
    let (c, g, h) = vel.eval(x);
    let u = [p[0] / np, p[1] / np];
    let gdx = g[0] * dx[0] + g[1] * dx[1];
    let udp = u[0] * dp[0] + u[1] * dp[1];
    let mut f = [0.0; 8];
    for i in 0..2 {
        f[i] = c * u[i];
        f[2 + i] = -np * g[i];
        f[4 + i] = gdx * u[i] + c * (dp[i] - u[i] * udp) / np;
        f[6 + i] = -udp * g[i] - np * (h[i][0] * dx[0] + h[i][1] * dx[1]);
    }
    Ok(f)
}

pub fn hamiltonian(vel: &VelocityField, y: &Phase) -> f64 {
    y[2].hypot(y[3]) * vel.c([y[0], y[1]])
}

/// Initial data of the point-source family: X = 0, P = n(ψ), X_ψ = 0, P_ψ = n'(ψ).
pub fn initial_phase(psi: f64) -> Phase {
    let (s, c) = psi.sin_cos();
    [0.0, 0.0, c, s, 0.0, 0.0, -s, c]
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its dense-output coefficients.
#[derive(Clone, Debug)]
struct Step {
    t0: f64,
    h: f64,
    r: [Phase; 5],
}

/// Dense solution of one ray on [0, t_end].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub psi: f64,
    steps: Vec<Step>,
    start: Phase,
    t_end: f64,
    /// max |H − H(0)|/H(0) over step ends
    pub drift: f64,
    pub rejected: usize,
}

fn lin(y: &Phase, terms: &[(f64, &Phase)]) -> Phase {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..8 {
            out[i] += c * k[i];
        }
    }
    out
}

struct StepResult {
    y1: Phase,
    k7: Phase,
    err: Phase,
    dense: [Phase; 5],
}

fn dopri_step(vel: &VelocityField, t: f64, y: &Phase, k1: &Phase, h: f64) -> Result<StepResult, RayError> {
    let f = |yy: &Phase, tt: f64| rhs(vel, yy).map_err(|_| RayError::MomentumVanished { tau: tt });
    let k2 = f(&lin(y, &[(h * A21, k1)]), t + C2 * h)?;
    let k3 = f(&lin(y, &[(h * A31, k1), (h * A32, &k2)]), t + C3 * h)?;
    let k4 = f(&lin(y, &[(h * A41, k1), (h * A42, &k2), (h * A43, &k3)]), t + C4 * h)?;
    let k5 = f(&lin(y, &[(h * A51, k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]), t + C5 * h)?;
    let k6 = f(&lin(y, &[(h * A61, k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]), t + h)?;
    let y1 = lin(y, &[(h * A71, k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)]);
    let k7 = f(&y1, t + h)?;
    let mut err = [0.0; 8];
    let mut dense = [[0.0; 8]; 5];
    for i in 0..8 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let ydiff = y1[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        dense[0][i] = y[i];
        dense[1][i] = ydiff;
        dense[2][i] = bspl;
        dense[3][i] = ydiff - h * k7[i] - bspl;
        dense[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Ok(StepResult { y1, k7, err, dense })
}

impl Trajectory {
    /// Adaptive integration from `y0` over [0, t_end]; relative/absolute tolerance `rtol`.
    pub fn adaptive(vel: &VelocityField, psi: f64, y0: Phase, t_end: f64, rtol: f64) -> Result<Self, RayError> {
        if !(t_end >= 0.0) || !(rtol > 0.0) {
            return Err(RayError::Invalid(format!("t_end = {t_end}, tol = {rtol}")));
        }
        let h0 = hamiltonian(vel, &y0);
        let mut traj = Self { psi, steps: Vec::new(), start: y0, t_end, drift: 0.0, rejected: 0 };
        if t_end == 0.0 {
            return Ok(traj);
        }
        let mut t = 0.0;
        let mut y = y0;
        let mut k1 = rhs(vel, &y).map_err(|_| RayError::MomentumVanished { tau: 0.0 })?;
        let mut h = 0.01 * t_end;
        let mut last_rejected = false;
        while t < t_end {
            if t + 1.01 * h >= t_end {
                h = t_end - t;
            }
            if h < 1e-13 * t.abs().max(1.0) {
                return Err(RayError::StepUnderflow { tau: t });
            }
            let s = dopri_step(vel, t, &y, &k1, h)?;
            let mut e2 = 0.0;
            for i in 0..8 {
                let sc = rtol + rtol * y[i].abs().max(s.y1[i].abs());
                e2 += (s.err[i] / sc).powi(2);
            }
            let err = (e2 / 8.0).sqrt();
            if err <= 1.0 {
                traj.steps.push(Step { t0: t, h, r: s.dense });
                t = if t + h >= t_end { t_end } else { t + h };
                y = s.y1;
                k1 = s.k7;
                let d = (hamiltonian(vel, &y) - h0).abs() / h0;
                traj.drift = traj.drift.max(d);
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 5.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h *= fac;
                last_rejected = false;
            } else {
                traj.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                last_rejected = true;
            }
        }
        Ok(traj)
    }

    /// Fixed-step integration with `n` equal steps (convergence studies).
    pub fn fixed(vel: &VelocityField, psi: f64, y0: Phase, t_end: f64, n: usize) -> Result<Self, RayError> {
        let h0 = hamiltonian(vel, &y0);
        let mut traj = Self { psi, steps: Vec::with_capacity(n), start: y0, t_end, drift: 0.0, rejected: 0 };
        let h = t_end / n as f64;
        let mut y = y0;
        let mut k1 = rhs(vel, &y).map_err(|_| RayError::MomentumVanished { tau: 0.0 })?;
        for k in 0..n {
            let t = k as f64 * h;
            let s = dopri_step(vel, t, &y, &k1, h)?;
            traj.steps.push(Step { t0: t, h, r: s.dense });
            y = s.y1;
            k1 = s.k7;
            traj.drift = traj.drift.max((hamiltonian(vel, &y) - h0).abs() / h0);
        }
        Ok(traj)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Step end times (for sampling sign changes).
    pub fn step_times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t0 + s.h).collect()
    }

    /// Dense-output phase vector at τ ∈ [0, t_end].
    pub fn phase(&self, tau: f64) -> Phase {
        if self.steps.is_empty() || tau <= 0.0 {
            return self.start;
        }
        let k = match self.steps.binary_search_by(|s| s.t0.partial_cmp(&tau).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let s = &self.steps[k.min(self.steps.len() - 1)];
        let th = ((tau - s.t0) / s.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = s.r[0][i] + th * (s.r[1][i] + th1 * (s.r[2][i] + th * (s.r[3][i] + th1 * s.r[4][i])));
        }
        out
    }

    pub fn state(&self, tau: f64) -> RayState {
        let y = self.phase(tau);
        RayState { x: [y[0], y[1]], p: [y[2], y[3]], t: tau }
    }

    /// Signed tube width j = det[X_ψ, Ẋ]/|Ẋ| (= −c t for constant c).
    pub fn signed_width(&self, tau: f64) -> f64 {
        signed_width(&self.phase(tau))
    }
}

pub fn signed_width(y: &Phase) -> f64 {
    let np = y[2].hypot(y[3]);
    let (u0, u1) = (y[2] / np, y[3] / np);
    // Ẋ ∥ P, so det[X_ψ, Ẋ]/|Ẋ| = det[X_ψ, P/|P|]
    y[4] * u1 - y[5] * u0
}

/// Integrate one ray for the point-source family with drift enforcement:
/// the internal tolerance is tightened until |H − H(0)|/H(0) ≤ tol.
pub fn integrate_ray(vel: &VelocityField, psi: f64, t_end: f64, tol: f64) -> Result<Trajectory, RayError> {
    integrate_from(vel, psi, initial_phase(psi), t_end, tol)
}

pub fn integrate_from(vel: &VelocityField, psi: f64, y0: Phase, t_end: f64, tol: f64) -> Result<Trajectory, RayError> {
    let mut rtol = tol * 1e-2;
    let mut last = 0.0;
    for _ in 0..5 {
        let tr = Trajectory::adaptive(vel, psi, y0, t_end, rtol)?;
        if tr.drift <= tol {
            return Ok(tr);
        }
        last = tr.drift;
        rtol *= 0.1;
        if rtol < 1e-15 {
            break;
        }
    }
    Err(RayError::Drift { drift: last, tol })
}

/// Caustic times τ ∈ (0, t_end] of a ray: sign changes of the signed width
/// plus tangential zeros detected by a local quadratic fit.
pub fn caustic_times(tr: &Trajectory, c0: f64) -> Vec<f64> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for s in &tr.steps {
        for q in 1..=4 {
            let tau = s.t0 + s.h * q as f64 / 4.0;
            samples.push((tau, tr.signed_width(tau)));
        }
    }
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let ((ta, ja), (tb, jb)) = (w[0], w[1]);
        if ja == 0.0 {
            continue;
        }
        if ja.signum() != jb.signum() || jb == 0.0 {
            let (mut lo, mut hi, mut jlo) = (ta, tb, ja);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let jm = tr.signed_width(mid);
                if jm == 0.0 || jm.signum() != jlo.signum() {
                    hi = mid;
                } else {
                    lo = mid;
                    jlo = jm;
                }
                if hi - lo < 1e-14 * hi.max(1.0) {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    for w in samples.windows(3) {
        let ((t0, j0), (t1, j1), (t2, j2)) = (w[0], w[1], w[2]);
        if j0.signum() != j1.signum() || j1.signum() != j2.signum() {
            continue;
        }
        if !(j1.abs() <= j0.abs() && j1.abs() <= j2.abs()) {
            continue;
        }
        // vertex of the parabola through the three samples
        let d01 = (j1 - j0) / (t1 - t0);
        let d12 = (j2 - j1) / (t2 - t1);
        let a = (d12 - d01) / (t2 - t0);
        if a == 0.0 {
            continue;
        }
        let b = d01 - a * (t0 + t1);
        let tv = (-b / (2.0 * a)).clamp(t0, t2);
        let jv = j0 + d01 * (tv - t0) + a * (tv - t0) * (tv - t1);
        if jv.abs() <= 1e-9 * c0 * tv {
            out.push(tv);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// One front sample at (t, ψ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontSample {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub x_psi: [f64; 2],
    pub p_psi: [f64; 2],
    pub morse: u32,
    pub focal: bool,
}

impl FrontSample {
    pub fn x_psi_norm(&self) -> f64 {
        self.x_psi[0].hypot(self.x_psi[1])
    }
}

/// Fronts Γ_t/γ_t on a uniform ψ grid at the requested times.
#[derive(Clone, Debug)]
pub struct FrontSet {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    /// `samples[ti][k]`
    pub samples: Vec<Vec<FrontSample>>,
    /// caustic times per ray
    pub caustics: Vec<Vec<f64>>,
    pub c0: f64,
    pub focal_threshold: f64,
    pub max_drift: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FrontOptions {
    pub tol: f64,
    pub focal_threshold: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        Self { tol: 1e-9, focal_threshold: 1e-3 }
    }
}

pub fn psi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect()
}

/// Trace `psi_count` rays (a power of two ≥ 16) to the largest requested time.
pub fn build_front(vel: &VelocityField, psi_count: usize, times: &[f64], opts: FrontOptions) -> Result<FrontSet, RayError> {
    if psi_count < 16 || !psi_count.is_power_of_two() {
        return Err(RayError::Invalid(format!("psi_count must be a power of two ≥ 16, got {psi_count}")));
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(RayError::Invalid("times must be nonnegative and sorted".into()));
    }
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let psi = psi_grid(psi_count);
    let c0 = vel.c0();
    let rays: Vec<Result<(Vec<FrontSample>, Vec<f64>, f64), RayError>> = psi
        .par_iter()
        .map(|&ps| {
            let tr = integrate_ray(vel, ps, t_end, opts.tol)?;
            let caus = caustic_times(&tr, c0);
            let col = times
                .iter()
                .map(|&t| {
                    let y = tr.phase(t);
                    let morse = caus.iter().filter(|&&tc| tc <= t).count() as u32;
                    let s = FrontSample { x: [y[0], y[1]], p: [y[2], y[3]], x_psi: [y[4], y[5]], p_psi: [y[6], y[7]], morse, focal: false };
                    let focal = t <= 0.0 || s.x_psi_norm() < opts.focal_threshold * c0 * t;
                    FrontSample { focal, ..s }
                })
                .collect();
            Ok((col, caus, tr.drift))
        })
        .collect();
    let mut samples = vec![Vec::with_capacity(psi_count); times.len()];
    let mut caustics = Vec::with_capacity(psi_count);
    let mut max_drift: f64 = 0.0;
    for r in rays {
        let (col, caus, drift) = r?;
        for (ti, s) in col.into_iter().enumerate() {
            samples[ti].push(s);
        }
        caustics.push(caus);
        max_drift = max_drift.max(drift);
    }
    Ok(FrontSet { times: times.to_vec(), psi, samples, caustics, c0, focal_threshold: opts.focal_threshold, max_drift })
}

impl FrontSet {
    pub fn psi_count(&self) -> usize {
        self.psi.len()
    }

    /// Index of `t` in `times` (relative tolerance 1e−12).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    fn nearest_ray(&self, psi: f64) -> usize {
        let n = self.psi.len() as f64;
        let k = (psi.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * n).round() as usize;
        k % self.psi.len()
    }

    /// Number of zeros of |X_ψ(τ,ψ)| on (0, t] along the grid ray nearest ψ.
    pub fn morse_index(&self, psi: f64, t: f64) -> u32 {
        self.caustics[self.nearest_ray(psi)].iter().filter(|&&tc| tc > 0.0 && tc <= t).count() as u32
    }

    /// Spectral ψ-derivative of X at time index `ti` (consistency check for X_ψ).
    pub fn spectral_x_psi(&self, ti: usize) -> Vec<[f64; 2]> {
        let n = self.psi.len();
        let xs = &self.samples[ti];
        let mut out = vec![[0.0; 2]; n];
        for comp in 0..2 {
            // forward DFT
            let coef: Vec<(f64, f64)> = (0..n)
                .map(|m| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (k, s) in xs.iter().enumerate() {
                        let ang = -std::f64::consts::TAU * ((m * k) % n) as f64 / n as f64;
                        re += s.x[comp] * ang.cos();
                        im += s.x[comp] * ang.sin();
                    }
                    (re, im)
                })
                .collect();
            for k in 0..n {
                let mut acc = 0.0;
                for (m, &(re, im)) in coef.iter().enumerate() {
                    let wave = if m < n / 2 { m as f64 } else if m > n / 2 { m as f64 - n as f64 } else { continue };
                    let ang = std::f64::consts::TAU * ((m * k) % n) as f64 / n as f64;
                    // Re[(i·wave)(re + i im) e^{i ang}]
                    acc += -wave * (re * ang.sin() + im * ang.cos());
                }
                out[k][comp] = acc / n as f64;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::Bump;

    #[test]
    fn constant_velocity_is_exact() {
        let v = VelocityField::constant(1.5).unwrap();
        let tr = integrate_ray(&v, 0.7, 5.0, 1e-10).unwrap();
        for &t in &[0.3, 1.0, 4.99, 5.0] {
            let s = tr.state(t);
            assert!((s.x[0] - 1.5 * t * 0.7f64.cos()).abs() < 1e-12);
            assert!((s.x[1] - 1.5 * t * 0.7f64.sin()).abs() < 1e-12);
            assert!((tr.signed_width(t) + 1.5 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_step_order() {
        let v = VelocityField::gaussian(1.0, vec![Bump { amplitude: 0.5, center: [0.0, 0.0], width: 1.0 }], None).unwrap();
        let y0 = initial_phase(0.4);
        let reference = Trajectory::fixed(&v, 0.4, y0, 2.0, 4096).unwrap().phase(2.0);
        let err = |n| {
            let y = Trajectory::fixed(&v, 0.4, y0, 2.0, n).unwrap().phase(2.0);
            (0..4).map(|i| (y[i] - reference[i]).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn dense_output_matches_step_ends() {
        let v = VelocityField::gaussian(1.0, vec![Bump { amplitude: -0.3, center: [1.0, 0.2], width: 0.7 }], None).unwrap();
        let tr = integrate_ray(&v, 0.1, 3.0, 1e-10).unwrap();
        let fine = integrate_ray(&v, 0.1, 1.2345, 1e-12).unwrap();
        let a = tr.phase(1.2345);
        let b = fine.phase(1.2345);
        for i in 0..8 {
            assert!((a[i] - b[i]).abs() < 1e-7, "component {i}");
        }
    }

    #[test]
    fn spectral_derivative_consistent() {
        let v = VelocityField::gaussian(1.0, vec![Bump { amplitude: 0.4, center: [0.8, 0.0], width: 0.6 }], None).unwrap();
        let f = build_front(&v, 128, &[1.5], FrontOptions::default()).unwrap();
        let sp = f.spectral_x_psi(0);
        for (k, s) in f.samples[0].iter().enumerate() {
            let d = (sp[k][0] - s.x_psi[0]).hypot(sp[k][1] - s.x_psi[1]);
            assert!(d < 1e-4 * 1.5, "ray {k}: {d}");
        }
    }
}
