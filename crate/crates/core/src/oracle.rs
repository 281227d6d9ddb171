//! Finite-difference reference solution of η_tt − ∇·(c²∇η) = λ²g₀'(λt)V(x/μ)
//! with zero initial data: second-order divergence-form stencil with c² on
//! cell faces, leapfrog in time, Dirichlet boundary on an oversized square.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{Component, FieldGrid, GridSpec};
use crate::sources::{ScaleParams, SpatialSource, TemporalSource};
use crate::velocity::VelocityField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("CFL violated: dt = {dt} > 0.5·h/c_max = {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("domain too small: side {side} < 2·c_max·t_end + comparison radius = {needed}")]
    Domain { side: f64, needed: f64 },
    #[error("invalid FD setup: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub struct FdSource {
    pub scales: ScaleParams,
    pub spatial: SpatialSource,
    pub temporal: TemporalSource,
}

#[derive(Clone, Debug)]
pub struct FdConfig {
    /// the grid covers [−half_extent, half_extent]²
    pub half_extent: f64,
    pub h: f64,
    /// None → 0.5·h/c_max
    pub dt: Option<f64>,
    pub t_end: f64,
    pub comparison_radius: f64,
    pub source: Option<FdSource>,
    /// initial displacement (homogeneous runs); initial velocity is always zero
    pub initial: Option<Vec<f64>>,
    /// record both energies every this many steps (0 = never)
    pub energy_every: usize,
}

impl FdConfig {
    pub fn forced(half_extent: f64, h: f64, t_end: f64, comparison_radius: f64, source: FdSource) -> Self {
        Self { half_extent, h, dt: None, t_end, comparison_radius, source: Some(source), initial: None, energy_every: 0 }
    }

    pub fn homogeneous(half_extent: f64, h: f64, t_end: f64, comparison_radius: f64, init: impl Fn([f64; 2]) -> f64) -> Result<Self, FdError> {
        let spec = grid_spec(half_extent, h)?;
        let initial = (0..spec.len()).map(|k| init(spec.point(k))).collect();
        Ok(Self { half_extent, h, dt: None, t_end, comparison_radius, source: None, initial: Some(initial), energy_every: 0 })
    }

    pub fn grid(&self) -> Result<GridSpec, FdError> {
        grid_spec(self.half_extent, self.h)
    }
}

fn grid_spec(half: f64, h: f64) -> Result<GridSpec, FdError> {
    if !(half > 0.0 && h > 0.0) {
        return Err(FdError::Invalid(format!("half extent {half} and spacing {h} must be positive")));
    }
    let cells = 2.0 * half / h;
    let m = cells.round();
    if (cells - m).abs() > 1e-9 * cells || m < 4.0 {
        return Err(FdError::Invalid(format!("2·half_extent/h = {cells} must be an integer ≥ 4")));
    }
    let n = m as usize + 1;
    GridSpec::new(n, n, [-half, -half], [h, h]).map_err(|e| FdError::Invalid(e.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    /// exactly conserved by the homogeneous scheme, at t_{n+½}
    pub staggered: f64,
    /// ½Σ(η_t² + c²|∇η|²) at t_n with centred η_t
    pub midpoint: f64,
}

#[derive(Clone, Debug)]
pub struct FdRun {
    pub snapshots: Vec<FieldGrid>,
    pub energies: Vec<EnergySample>,
    pub dt: f64,
    pub steps: usize,
}

/// c² on x-faces (i+½,j) and y-faces (i,j+½), row-major like the nodes.
struct Faces {
    n: usize,
    cx: Vec<f64>,
    cy: Vec<f64>,
}

impl Faces {
    fn new(spec: &GridSpec, vel: &VelocityField) -> Self {
        let n = spec.nx;
        let h = spec.spacing[0];
        let mut cx = vec![0.0; n * n];
        let mut cy = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let p = spec.point(j * n + i);
                cx[j * n + i] = vel.c([p[0] + 0.5 * h, p[1]]).powi(2);
                cy[j * n + i] = vel.c([p[0], p[1] + 0.5 * h]).powi(2);
            }
        }
        Self { n, cx, cy }
    }

    /// h²·(L u) on interior node (i,j)
    #[inline]
    fn apply(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let n = self.n;
        let k = j * n + i;
        self.cx[k] * (u[k + 1] - u[k]) - self.cx[k - 1] * (u[k] - u[k - 1]) + self.cy[k] * (u[k + n] - u[k]) - self.cy[k - n] * (u[k] - u[k - n])
    }

    /// Σ_faces c² (Δa)(Δb), the bilinear form of −h²L under Dirichlet data.
    fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if i + 1 < n {
                    s += self.cx[k] * (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
                }
                if j + 1 < n {
                    s += self.cy[k] * (a[k + n] - a[k]) * (b[k + n] - b[k]);
                }
            }
        }
        s
    }
}

/// ½Σ(η_t² + c²|∇η|²)·h² with face differences and c² at the faces.
pub fn energy(eta: &FieldGrid, eta_t: &FieldGrid, vel: &VelocityField) -> Result<f64, FdError> {
    if eta.spec != eta_t.spec || eta.spec.nx != eta.spec.ny || eta.spec.spacing[0] != eta.spec.spacing[1] {
        return Err(FdError::Invalid("energy needs matching square grids".into()));
    }
    let faces = Faces::new(&eta.spec, vel);
    Ok(energy_raw(&faces, &eta.values, &eta_t.values, eta.spec.cell_area()))
}

fn energy_raw(faces: &Faces, u: &[f64], ut: &[f64], area: f64) -> f64 {
    0.5 * ut.iter().map(|v| v * v).sum::<f64>() * area + 0.5 * faces.form(u, u)
}

/// Leapfrog integration; snapshots by linear interpolation between steps.
pub fn solve_fd(cfg: &FdConfig, vel: &VelocityField, times: &[f64]) -> Result<FdRun, FdError> {
    let spec = cfg.grid()?;
    let n = spec.nx;
    let h = cfg.h;
    let cmax = vel.c_max();
    let limit = 0.5 * h / cmax;
    let dt = cfg.dt.unwrap_or(limit);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(FdError::Cfl { dt, limit });
    }
    let side = 2.0 * cfg.half_extent;
    let needed = 2.0 * cmax * cfg.t_end + cfg.comparison_radius;
    if side < needed {
        return Err(FdError::Domain { side, needed });
    }
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=cfg.t_end).contains(&t)) {
        return Err(FdError::Invalid(format!("snapshot time {t} outside [0, {}]", cfg.t_end)));
    }
    if cfg.source.is_some() == cfg.initial.is_some() {
        return Err(FdError::Invalid("exactly one of source and initial displacement must be given".into()));
    }
    let faces = Faces::new(&spec, vel);
    let area = spec.cell_area();
    let steps = (cfg.t_end / dt).ceil() as usize;

    // spatial forcing shape V(x/μ) and its time factor λ²g₀'(λt)
    let (shape, time_factor): (Vec<f64>, Box<dyn Fn(f64) -> f64 + Sync>) = match &cfg.source {
        Some(src) => {
            let mu = src.scales.mu();
            let lam = src.scales.lambda();
            let shape = (0..spec.len())
                .map(|k| {
                    let p = spec.point(k);
                    src.spatial.eval([p[0] / mu, p[1] / mu])
                })
                .collect();
            let tmp = src.temporal.clone();
            (shape, Box::new(move |t: f64| lam * lam * tmp.eval_deriv(lam * t)))
        }
        None => (vec![0.0; spec.len()], Box::new(|_| 0.0)),
    };

    let mut prev = cfg.initial.clone().unwrap_or_else(|| vec![0.0; spec.len()]);
    if prev.len() != spec.len() {
        return Err(FdError::Invalid("initial displacement has the wrong length".into()));
    }
    zero_boundary(&mut prev, n);

    // startup: η¹ = η⁰ + dt²/2 (Lη⁰ + Q⁰)
    let q0 = time_factor(0.0);
    let mut cur = prev.clone();
    {
        let p = &prev;
        cur.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            if j == 0 || j == n - 1 {
                return;
            }
            for i in 1..n - 1 {
                row[i] = p[j * n + i] + 0.5 * dt * dt * (faces.apply(p, i, j) / (h * h) + q0 * shape[j * n + i]);
            }
        });
    }
    let mut next = vec![0.0; spec.len()];

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
    let mut snaps: Vec<Option<FieldGrid>> = vec![None; times.len()];
    let mut pending = order.into_iter().peekable();
    let mut energies = Vec::new();
    let emit = |a: &[f64], b: &[f64], ta: f64, t: f64| {
        let f = (t - ta) / dt;
        let values = a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect();
        FieldGrid { spec, t, component: Component::Oracle, values, mask: vec![false; spec.len()] }
    };

    // invariant: prev = η^s, cur = η^{s+1}
    for s in 0..steps {
        let ts = s as f64 * dt;
        while let Some(&k) = pending.peek() {
            if times[k] <= ts + dt {
                snaps[k] = Some(emit(&prev, &cur, ts, times[k]));
                pending.next();
            } else {
                break;
            }
        }
        if pending.peek().is_none() && cfg.energy_every == 0 {
            break;
        }
        let q = time_factor(ts + dt);
        {
            let (p, c) = (&prev, &cur);
            next.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
                if j == 0 || j == n - 1 {
                    return;
                }
                for i in 1..n - 1 {
                    let k = j * n + i;
                    row[i] = 2.0 * c[k] - p[k] + dt * dt * (faces.apply(c, i, j) / (h * h) + q * shape[k]);
                }
            });
        }
        if cfg.energy_every > 0 && s % cfg.energy_every == 0 {
            let ut: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a - b) / dt).collect();
            let staggered = 0.5 * ut.iter().map(|v| v * v).sum::<f64>() * area + 0.5 * faces.form(&cur, &prev);
            let utc: Vec<f64> = next.iter().zip(&prev).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
            energies.push(EnergySample { t: ts + dt, staggered, midpoint: energy_raw(&faces, &cur, &utc, area) });
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    for k in pending {
        // only reachable when t equals the final step time to rounding
        snaps[k] = Some(emit(&prev, &cur, steps as f64 * dt, times[k]));
    }
    Ok(FdRun { snapshots: snaps.into_iter().map(|s| s.unwrap()).collect(), energies, dt, steps })
}

fn zero_boundary(u: &mut [f64], n: usize) {
    for i in 0..n {
        u[i] = 0.0;
        u[(n - 1) * n + i] = 0.0;
        u[i * n] = 0.0;
        u[i * n + n - 1] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(x: [f64; 2]) -> f64 {
        (-(x[0] * x[0] + x[1] * x[1]) / 0.02).exp()
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let v = VelocityField::constant(1.0).unwrap();
        let cfg = FdConfig::homogeneous(1.0, 0.05, 0.3, 0.2, |_| 0.0).unwrap();
        let run = solve_fd(&cfg, &v, &[0.1, 0.3]).unwrap();
        assert!(run.snapshots.iter().all(|g| g.values.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn refuses_cfl_and_small_domain() {
        let v = VelocityField::constant(2.0).unwrap();
        let mut cfg = FdConfig::homogeneous(1.0, 0.05, 0.2, 0.2, bump).unwrap();
        cfg.dt = Some(0.02);
        assert!(matches!(solve_fd(&cfg, &v, &[0.1]), Err(FdError::Cfl { .. })));
        cfg.dt = None;
        cfg.t_end = 1.0;
        assert!(matches!(solve_fd(&cfg, &v, &[0.1]), Err(FdError::Domain { .. })));
    }

    #[test]
    fn staggered_energy_is_conserved() {
        let v = VelocityField::constant(1.0).unwrap();
        let mut cfg = FdConfig::homogeneous(1.5, 0.02, 0.6, 0.2, bump).unwrap();
        cfg.energy_every = 5;
        let run = solve_fd(&cfg, &v, &[0.6]).unwrap();
        let e0 = run.energies[0].staggered;
        for e in &run.energies {
            assert!((e.staggered - e0).abs() <= 1e-12 * e0, "{} vs {e0}", e.staggered);
        }
    }
}
