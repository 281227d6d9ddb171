//! Physical fields: equivalent sources, the wave profile F(z,ψ), the
//! propagating (front) component, the transient component and their sum.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::chart::{locate_branches, ChartError};
use crate::quad::{integrate, integrate_semi_inf, QuadOptions};
use crate::rays::FrontSet;
use crate::sources::{ScaleParams, SpatialSource, TemporalKind, TemporalSource};
use crate::special::{expint_en_scaled, i0_kernel, pole_moment, si_ci, SpecialError};
use crate::velocity::VelocityField;
use crate::C64;

pub const SENTINEL: f64 = -9999.0;
const MAGIC: &[u8; 4] = b"RWV1";

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad field file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Transient,
    Propagating,
    Total,
    U1,
    U2,
    Oracle,
}

impl Component {
    pub fn tag(self) -> u32 {
        match self {
            Component::Transient => 0,
            Component::Propagating => 1,
            Component::Total => 2,
            Component::U1 => 3,
            Component::U2 => 4,
            Component::Oracle => 5,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => Component::Transient,
            1 => Component::Propagating,
            2 => Component::Total,
            3 => Component::U1,
            4 => Component::U2,
            5 => Component::Oracle,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Transient => "transient",
            Component::Propagating => "propagating",
            Component::Total => "total",
            Component::U1 => "U1",
            Component::U2 => "U2",
            Component::Oracle => "oracle",
        }
    }
}

/// Regular grid: point (i,j) = origin + (i·dx, j·dy), stored row-major (j outer).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, origin: [f64; 2], spacing: [f64; 2]) -> Result<Self, FieldError> {
        if nx == 0 || ny == 0 || !(spacing[0] > 0.0 && spacing[1] > 0.0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(FieldError::Invalid(format!("grid {nx}x{ny}, spacing {spacing:?}")));
        }
        Ok(Self { nx, ny, origin, spacing })
    }

    /// Square grid covering [−half, half]² with n points per side.
    pub fn centered(n: usize, half: f64) -> Result<Self, FieldError> {
        if n < 2 {
            return Err(FieldError::Invalid("need at least 2 points per side".into()));
        }
        let h = 2.0 * half / (n - 1) as f64;
        Self::new(n, n, [-half, -half], [h, h])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.nx, idx / self.nx);
        [self.origin[0] + i as f64 * self.spacing[0], self.origin[1] + j as f64 * self.spacing[1]]
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub t: f64,
    pub component: Component,
    /// masked cells hold SENTINEL
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FieldGrid {
    pub fn zeros(spec: GridSpec, t: f64, component: Component) -> Self {
        Self { spec, t, component, values: vec![0.0; spec.len()], mask: vec![false; spec.len()] }
    }

    pub fn from_cells(spec: GridSpec, t: f64, component: Component, cells: Vec<Option<f64>>) -> Self {
        let mask: Vec<bool> = cells.iter().map(|c| c.is_none()).collect();
        let values = cells.into_iter().map(|c| c.unwrap_or(SENTINEL)).collect();
        Self { spec, t, component, values, mask }
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        (!self.mask[idx]).then(|| self.values[idx])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// √(Σ v² dx dy) over unmasked cells accepted by `keep`.
    pub fn l2_norm_where(&self, keep: impl Fn([f64; 2]) -> bool) -> f64 {
        let s: f64 = (0..self.spec.len())
            .filter(|&i| !self.mask[i] && keep(self.spec.point(i)))
            .map(|i| self.values[i] * self.values[i])
            .sum();
        (s * self.spec.cell_area()).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_where(|_| true)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.spec.len()).filter_map(|i| self.get(i)).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, k: f64) {
        for (v, &m) in self.values.iter_mut().zip(&self.mask) {
            if !m {
                *v *= k;
            }
        }
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<(), FieldError> {
        let mut buf = Vec::with_capacity(48 + 8 * self.values.len() + self.mask.len() / 8 + 1);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.spec.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(self.spec.ny as u32).to_le_bytes());
        for v in self.spec.origin.iter().chain(&self.spec.spacing).chain(std::iter::once(&self.t)) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.component.tag().to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut bits = vec![0u8; self.mask.len().div_ceil(8)];
        for (i, &m) in self.mask.iter().enumerate() {
            if m {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        buf.extend_from_slice(&bits);
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self, FieldError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], FieldError> {
            let s = buf.get(pos..pos + n).ok_or_else(|| FieldError::Format("truncated".into()))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(FieldError::Format("bad magic".into()));
        }
        let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let f64_of = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let nx = u32_of(take(4)?) as usize;
        let ny = u32_of(take(4)?) as usize;
        let mut h = [0.0; 5];
        for v in h.iter_mut() {
            *v = f64_of(take(8)?);
        }
        let tag = u32_of(take(4)?);
        let component = Component::from_tag(tag).ok_or_else(|| FieldError::Format(format!("unknown component tag {tag}")))?;
        let spec = GridSpec::new(nx, ny, [h[0], h[1]], [h[2], h[3]]).map_err(|e| FieldError::Format(e.to_string()))?;
        let n = spec.len();
        let values: Vec<f64> = take(8 * n)?.chunks_exact(8).map(f64_of).collect();
        let bits = take(n.div_ceil(8))?;
        let mask = (0..n).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(Self { spec, t: h[4], component, values, mask })
    }

    pub fn save(&self, path: &Path) -> Result<(), FieldError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FieldError> {
        Self::read_binary(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Plain-text matrix: a `#` header, then one line per grid row; masked cells as `nan`.
    pub fn write_text(&self, w: &mut impl Write) -> Result<(), FieldError> {
        let s = &self.spec;
        writeln!(
            w,
            "# component={} t={:e} nx={} ny={} origin={:e},{:e} spacing={:e},{:e}",
            self.component.name(),
            self.t,
            s.nx,
            s.ny,
            s.origin[0],
            s.origin[1],
            s.spacing[0],
            s.spacing[1]
        )?;
        for j in 0..s.ny {
            let row: Vec<String> = (0..s.nx)
                .map(|i| match self.get(j * s.nx + i) {
                    Some(v) => format!("{v:.17e}"),
                    None => "nan".to_string(),
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Pointwise sum with mask union.
pub fn total_field(a: &FieldGrid, b: &FieldGrid) -> Result<FieldGrid, FieldError> {
    if a.spec != b.spec || a.t != b.t {
        return Err(FieldError::GridMismatch(format!("{:?} at t={} vs {:?} at t={}", a.spec, a.t, b.spec, b.t)));
    }
    let cells = (0..a.spec.len()).map(|i| Some(a.get(i)? + b.get(i)?)).collect();
    Ok(FieldGrid::from_cells(a.spec, a.t, Component::Total, cells))
}

/// (Ũ₁(p), Ũ₂(p)).
pub fn equivalent_sources(scales: &ScaleParams, spatial: &SpatialSource, temporal: &TemporalSource, p: [f64; 2]) -> (C64, C64) {
    let xi = scales.omega() * p[0].hypot(p[1]);
    let v = spatial.fourier(p);
    let g = temporal.g0_transform(xi, 0.0);
    (g.re * v, temporal.im_ratio(xi) / scales.lambda() * v)
}

/// Sample Ũ₁ or Ũ₂ on a grid in p-space.
pub fn equivalent_source_grid(scales: &ScaleParams, spatial: &SpatialSource, temporal: &TemporalSource, spec: GridSpec, which: Component) -> Result<FieldGrid, FieldError> {
    if !matches!(which, Component::U1 | Component::U2) {
        return Err(FieldError::Invalid(format!("{} is not an equivalent source", which.name())));
    }
    if spatial.has_deriv() {
        return Err(FieldError::Unsupported("real-valued export of U1/U2 for differentiated spatial sources".into()));
    }
    let cells = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let (u1, u2) = equivalent_sources(scales, spatial, temporal, spec.point(i));
            Some(if which == Component::U1 { u1.re } else { u2.re })
        })
        .collect();
    Ok(FieldGrid::from_cells(spec, 0.0, which, cells))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileMode {
    ClosedForm,
    Quadrature,
}

/// F(z,ψ) = e^{−iπ/4}∫₀^∞ √ρ conj(g̃₀(ωρ)) Ṽ(ρn(ψ)) e^{izρ} dρ.
#[derive(Clone, Debug)]
pub struct ProfileFn {
    pub temporal: TemporalSource,
    pub spatial: SpatialSource,
    pub omega: f64,
    pub mode: ProfileMode,
}

impl ProfileFn {
    pub fn new(temporal: TemporalSource, spatial: SpatialSource, omega: f64, mode: ProfileMode) -> Result<Self, FieldError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(FieldError::Invalid(format!("omega must be positive, got {omega}")));
        }
        if mode == ProfileMode::ClosedForm && !(temporal.has_closed_form() && !spatial.has_deriv()) {
            return Err(FieldError::Unsupported("closed-form profile needs a sine/polynomial source without derivatives".into()));
        }
        Ok(Self { temporal, spatial, omega, mode })
    }

    pub fn eval(&self, z: f64, psi: f64) -> Result<C64, FieldError> {
        match self.mode {
            ProfileMode::ClosedForm => self.closed_form(z, psi),
            ProfileMode::Quadrature => Ok(self.quadrature(z, psi)),
        }
    }

    fn closed_form(&self, z: f64, psi: f64) -> Result<C64, FieldError> {
        let i = C64::new(0.0, 1.0);
        let w = self.omega;
        let c1 = C64::new(self.spatial.beta(psi), -z) / w;
        // G₀(−s,0) = Σ coef·i^n (C₂ − is)^{−n}, C₂ = i·a
        let mut sum = C64::new(0.0, 0.0);
        let poles = self.temporal.poles(0.0).expect("closed form checked at construction");
        let nmax = poles.iter().map(|p| p.n).max().unwrap_or(1);
        let mut cache: Vec<(C64, Vec<C64>)> = Vec::new();
        for p in &poles {
            let c2 = i * p.a;
            let idx = match cache.iter().position(|(c, _)| *c == c2) {
                Some(k) => k,
                None => {
                    cache.push((c2, kernel_moments(c1, c2, nmax)?));
                    cache.len() - 1
                }
            };
            sum += p.coef * i.powu(p.n) * cache[idx].1[p.n as usize - 1];
        }
        let sp = &self.spatial;
        let pref = sp.amplitude * sp.b1 * sp.b2 * C64::from_polar(1.0, -FRAC_PI_4) / ((TAU).sqrt() * w.powf(1.5));
        Ok(pref * sum)
    }

    fn quadrature(&self, z: f64, psi: f64) -> C64 {
        let n = [psi.cos(), psi.sin()];
        let rho_max = 40.0 / self.spatial.beta(psi);
        // ρ = u² removes the √ρ endpoint singularity
        let f = |u: f64| {
            let rho = u * u;
            let g = self.temporal.g0_transform(-self.omega * rho, 0.0);
            2.0 * rho * g * self.spatial.fourier([rho * n[0], rho * n[1]]) * C64::from_polar(1.0, z * rho)
        };
        let r = integrate(f, 0.0, rho_max.sqrt(), QuadOptions::tol(1e-15, 1e-11));
        C64::from_polar(1.0, -FRAC_PI_4) / TAU.sqrt() * r.value
    }

    /// i·A b₁b₂/(2√2 (z + iβ)^{3/2}), the instantaneous-source limit.
    pub fn small_omega_limit(&self, z: f64, psi: f64) -> C64 {
        let sp = &self.spatial;
        let w = C64::new(z, sp.beta(psi));
        C64::new(0.0, sp.amplitude * sp.b1 * sp.b2) / (2.0 * 2f64.sqrt() * w.powf(1.5))
    }
}

/// M_n = ∫₀^∞ √s e^{−C₁s}(C₂ − is)^{−n} ds for n = 1..=nmax.
///
/// Integration by parts: M_{k+1} = (C₁M_k − ½N_k)/(ik) with
/// N_k = ∫ s^{−1/2}e^{−C₁s}(C₂ − is)^{−k} ds = (iM_k + N_{k−1})/C₂.
fn kernel_moments(c1: C64, c2: C64, nmax: u32) -> Result<Vec<C64>, SpecialError> {
    let i = C64::new(0.0, 1.0);
    let mut m = vec![i0_kernel(c1, c2)?];
    let mut nk = (PI / c1).sqrt();
    for k in 1..nmax {
        let mk = m[k as usize - 1];
        nk = (i * mk + nk) / c2;
        m.push((c1 * mk - 0.5 * nk) / (i * k as f64));
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatingOptions {
    pub band: f64,
    pub focal_threshold: f64,
}

/// η_prop = √μ Re Σ_j e^{−iπm_j/2}|X_ψ|^{−1/2}√(c₀/c(X)) F(S_j/μ, ψ_j).
pub fn propagating_field(
    front: &FrontSet,
    vel: &VelocityField,
    pf: &ProfileFn,
    scales: &ScaleParams,
    spec: GridSpec,
    t: f64,
    opts: PropagatingOptions,
) -> Result<FieldGrid, FieldError> {
    if !(t > 0.0) {
        return Err(FieldError::Invalid(format!("propagating field needs t > 0, got {t}")));
    }
    if !(opts.band > 0.0) {
        return Err(FieldError::Invalid("band must be positive".into()));
    }
    let mu = scales.mu();
    let c0 = vel.c0();
    let cells = (0..spec.len())
        .into_par_iter()
        .map(|idx| -> Result<Option<f64>, FieldError> {
            let cp = locate_branches(front, vel, spec.point(idx), t, opts.band, opts.focal_threshold)?;
            if cp.masked {
                return Ok(None);
            }
            let mut acc = C64::new(0.0, 0.0);
            for b in &cp.branches {
                let maslov = C64::from_polar(1.0, -PI * b.morse as f64 / 2.0);
                let green = (c0 / b.c_at_x).sqrt() / b.x_psi_norm.sqrt();
                acc += maslov * green * pf.eval(b.phase / mu, b.psi)?;
            }
            Ok(Some(mu.sqrt() * acc.re))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FieldGrid::from_cells(spec, t, Component::Propagating, cells))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransientMode {
    /// pole expansion of G₀ with exact Laplace moments
    Closed,
    /// explicit Ci/Si/E₁ expressions (cross-check only; the sine form is valid only near the origin)
    ExplicitForms,
    /// adaptive quadrature of the ρ-integral
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransientOptions {
    pub psi_nodes: usize,
    pub mode: TransientMode,
    /// closed mode: tabulate each ψ-slice in p = ⟨n,x⟩/μ when that is cheaper
    pub tabulate: bool,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self { psi_nodes: 256, mode: TransientMode::Closed, tabulate: true }
    }
}

struct TransientCtx<'a> {
    scales: &'a ScaleParams,
    spatial: &'a SpatialSource,
    temporal: &'a TemporalSource,
    psi: Vec<f64>,
    ang: Vec<C64>,
}

impl<'a> TransientCtx<'a> {
    fn new(scales: &'a ScaleParams, spatial: &'a SpatialSource, temporal: &'a TemporalSource, n: usize) -> Result<Self, FieldError> {
        if n < 8 || n % 2 != 0 {
            return Err(FieldError::Invalid(format!("psi_nodes must be even and ≥ 8, got {n}")));
        }
        let psi: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let ang = psi.iter().map(|&p| spatial.angular_factor(p)).collect();
        Ok(Self { scales, spatial, temporal, psi, ang })
    }

    fn z(&self, x: [f64; 2], psi: f64) -> C64 {
        let proj = (x[0] * psi.cos() + x[1] * psi.sin()) / self.scales.mu();
        let z = C64::new(self.spatial.beta(psi), -proj) / self.scales.omega();
        debug_assert!(z.re > 0.0);
        z
    }

    /// −A b₁b₂/(2π ω^{2+|α|}) · (2π/N)
    fn prefactor(&self) -> f64 {
        let sp = self.spatial;
        let w = self.scales.omega();
        -sp.amplitude * sp.b1 * sp.b2 / (w * w * w.powi(sp.deriv_order() as i32) * self.psi.len() as f64)
    }
}

/// η_trans = −(2π)^{−1}∫∫ ρ Re G₀(ωρ,λt) Ṽ(ρn(ψ)) e^{iρ⟨n(ψ),x⟩/μ} dρ dψ on a grid.
pub fn transient_field(
    scales: &ScaleParams,
    spatial: &SpatialSource,
    temporal: &TemporalSource,
    spec: GridSpec,
    t: f64,
    opts: TransientOptions,
) -> Result<FieldGrid, FieldError> {
    Ok(transient_fields(scales, spatial, temporal, spec, &[t], opts)?.pop().unwrap())
}

/// Several snapshot times; in closed mode the ψ-summed moments are shared.
pub fn transient_fields(
    scales: &ScaleParams,
    spatial: &SpatialSource,
    temporal: &TemporalSource,
    spec: GridSpec,
    times: &[f64],
    opts: TransientOptions,
) -> Result<Vec<FieldGrid>, FieldError> {
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
        return Err(FieldError::Invalid(format!("transient field needs t ≥ 0, got {t}")));
    }
    let ctx = TransientCtx::new(scales, spatial, temporal, opts.psi_nodes)?;
    let lam = scales.lambda();
    match opts.mode {
        TransientMode::Closed => {
            let shape = temporal
                .poles(0.0)
                .ok_or_else(|| FieldError::Unsupported("closed transient needs a sine/polynomial source".into()))?;
            let m = 1 + spatial.deriv_order();
            let tables = if opts.tabulate { SliceTables::plan(&ctx, spec) } else { None };
            // Q[cell][term] = Σ_ψ ang(ψ)·∫ s^m e^{−sz}(s+a)^{−n} ds
            let q: Vec<Vec<C64>> = match tables.map(|t| t.build(&ctx, &shape, m)) {
                Some(tab) => (0..spec.len()).into_par_iter().map(|idx| tab.eval(&ctx, spec.point(idx))).collect(),
                None => (0..spec.len())
                    .into_par_iter()
                    .map(|idx| {
                        let x = spec.point(idx);
                        let mut acc = vec![C64::new(0.0, 0.0); shape.len()];
                        for (k, &psi) in ctx.psi.iter().enumerate() {
                            let z = ctx.z(x, psi);
                            for (slot, p) in acc.iter_mut().zip(&shape) {
                                *slot += ctx.ang[k] * pole_moment(m, p.n, z, p.a);
                            }
                        }
                        acc
                    })
                    .collect(),
            };
            let pref = ctx.prefactor();
            Ok(times
                .iter()
                .map(|&t| {
                    let coefs: Vec<C64> = temporal.poles(lam * t).unwrap().iter().map(|p| p.coef).collect();
                    let cells = q
                        .iter()
                        .map(|row| Some(pref * row.iter().zip(&coefs).map(|(qv, c)| c * qv).sum::<C64>().re))
                        .collect();
                    FieldGrid::from_cells(spec, t, Component::Transient, cells)
                })
                .collect())
        }
        TransientMode::ExplicitForms => times
            .iter()
            .map(|&t| {
                let cells = (0..spec.len())
                    .into_par_iter()
                    .map(|idx| explicit_transient_point(&ctx, spec.point(idx), lam * t).map(Some))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FieldGrid::from_cells(spec, t, Component::Transient, cells))
            })
            .collect(),
        TransientMode::Quadrature => times
            .iter()
            .map(|&t| {
                let cells = (0..spec.len())
                    .into_par_iter()
                    .map(|idx| Some(quadrature_transient_point(&ctx, spec.point(idx), lam * t)))
                    .collect();
                Ok(FieldGrid::from_cells(spec, t, Component::Transient, cells))
            })
            .collect(),
    }
}

/// Per-ψ tables of the pole moments on a uniform grid in p = ⟨n(ψ),x⟩/μ,
/// interpolated by cubic Hermite with the exact p-derivative. The moments are
/// analytic for |Im p| < β(ψ), which sets the step.
struct SliceTables {
    p0: Vec<f64>,
    len: Vec<usize>,
    step: f64,
    terms: usize,
    /// [ψ][node][term] → (ang·value, ang·d/dp)
    data: Vec<Vec<(C64, C64)>>,
}

impl SliceTables {
    const PER_BETA: f64 = 40.0;

    fn plan(ctx: &TransientCtx, spec: GridSpec) -> Option<Self> {
        let mu = ctx.scales.mu();
        let step = ctx.spatial.b_min() / Self::PER_BETA;
        let corners = [
            spec.origin,
            [spec.origin[0] + (spec.nx - 1) as f64 * spec.spacing[0], spec.origin[1]],
            [spec.origin[0], spec.origin[1] + (spec.ny - 1) as f64 * spec.spacing[1]],
            [spec.origin[0] + (spec.nx - 1) as f64 * spec.spacing[0], spec.origin[1] + (spec.ny - 1) as f64 * spec.spacing[1]],
        ];
        let mut p0 = Vec::with_capacity(ctx.psi.len());
        let mut len = Vec::with_capacity(ctx.psi.len());
        for &psi in &ctx.psi {
            let proj: Vec<f64> = corners.iter().map(|c| (c[0] * psi.cos() + c[1] * psi.sin()) / mu).collect();
            let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min) - step;
            let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + step;
            p0.push(lo);
            len.push(((hi - lo) / step).ceil() as usize + 2);
        }
        let nodes: usize = len.iter().sum();
        // each table node costs two moment evaluations, each cell one per ψ
        (2 * nodes < spec.len() * ctx.psi.len()).then_some(Self { p0, len, step, terms: 0, data: Vec::new() })
    }

    fn build(mut self, ctx: &TransientCtx, shape: &[crate::sources::PoleTerm], m: u32) -> Self {
        let w = ctx.scales.omega();
        let i_w = C64::new(0.0, 1.0 / w);
        self.terms = shape.len();
        self.data = (0..ctx.psi.len())
            .into_par_iter()
            .map(|k| {
                let beta = ctx.spatial.beta(ctx.psi[k]);
                let mut out = Vec::with_capacity(self.len[k] * shape.len());
                for node in 0..self.len[k] {
                    let p = self.p0[k] + node as f64 * self.step;
                    let z = C64::new(beta, -p) / w;
                    for t in shape {
                        let v = ctx.ang[k] * pole_moment(m, t.n, z, t.a);
                        let d = ctx.ang[k] * i_w * pole_moment(m + 1, t.n, z, t.a);
                        out.push((v, d));
                    }
                }
                out
            })
            .collect();
        self
    }

    fn eval(&self, ctx: &TransientCtx, x: [f64; 2]) -> Vec<C64> {
        let mu = ctx.scales.mu();
        let h = self.step;
        let mut acc = vec![C64::new(0.0, 0.0); self.terms];
        for (k, &psi) in ctx.psi.iter().enumerate() {
            let p = (x[0] * psi.cos() + x[1] * psi.sin()) / mu;
            let u = (p - self.p0[k]) / h;
            let i = (u.floor() as usize).min(self.len[k] - 2);
            let s = u - i as f64;
            let (s2, s3) = (s * s, s * s * s);
            let b = [2.0 * s3 - 3.0 * s2 + 1.0, (s3 - 2.0 * s2 + s) * h, -2.0 * s3 + 3.0 * s2, (s3 - s2) * h];
            let row = &self.data[k];
            for (t, slot) in acc.iter_mut().enumerate() {
                let (v0, d0) = row[i * self.terms + t];
                let (v1, d1) = row[(i + 1) * self.terms + t];
                *slot += b[0] * v0 + b[1] * d0 + b[2] * v1 + b[3] * d1;
            }
        }
        acc
    }
}

fn quadrature_transient_point(ctx: &TransientCtx, x: [f64; 2], big_t: f64) -> f64 {
    let m = 1 + ctx.spatial.deriv_order() as i32;
    let mut acc = C64::new(0.0, 0.0);
    for (k, &psi) in ctx.psi.iter().enumerate() {
        let z = ctx.z(x, psi);
        let f = |s: f64| s.powi(m) * ctx.temporal.g0_transform(s, big_t).re * (-s * z).exp();
        let r = integrate_semi_inf(f, 0.0, QuadOptions::tol(1e-16, 1e-11));
        acc += ctx.ang[k] * r.value;
    }
    // ψ and ψ+π contribute complex-conjugate terms
    debug_assert!(acc.im.abs() <= 1e-9 * acc.norm().max(1e-300), "transient imaginary residue {acc}");
    ctx.prefactor() * acc.re
}

fn explicit_transient_point(ctx: &TransientCtx, x: [f64; 2], big_t: f64) -> Result<f64, FieldError> {
    if ctx.spatial.has_deriv() {
        return Err(FieldError::Unsupported("explicit transient forms assume an underived source".into()));
    }
    let i = C64::new(0.0, 1.0);
    let mut acc = 0.0;
    match ctx.temporal.kind() {
        TemporalKind::Polynomial { coeffs } if coeffs.len() <= 2 => {
            let p1 = coeffs[0];
            let p2 = coeffs.get(1).copied().unwrap_or(0.0);
            let t = big_t;
            let c = [p2 * t * t / 2.0 + (p1 - p2) * t - p1, 2.0 * p2 * t + 2.0 * p1 - 3.0 * p2, 4.0 * p2];
            for &psi in &ctx.psi {
                let z = ctx.z(x, psi);
                let (si, ci) = si_ci(z)?;
                let (s, co) = (z.sin(), z.cos());
                let th1 = -co * ci + 0.5 * s * (PI - 2.0 * si);
                let th2 = 0.25 * (2.0 - 2.0 * z * s * ci - z * co * (PI - 2.0 * si));
                let th3 = (4.0 - z * s * (PI * z + 2.0 * ci - 2.0 * z * si) + z * co * (-PI + 2.0 * z * ci + 2.0 * si)) / 16.0;
                acc += (c[0] * th1 + c[1] * th2 + c[2] * th3).re;
            }
            acc *= (-big_t).exp();
        }
        TemporalKind::Sine { alpha, phi0 } => {
            let (alpha, phi0) = (*alpha, *phi0);
            let th = alpha * big_t + phi0;
            let am = C64::new(alpha, -1.0);
            let ap = C64::new(alpha, 1.0);
            for &psi in &ctx.psi {
                let z = ctx.z(x, psi);
                let (si, ci) = si_ci(z)?;
                let v = i / z * (th.sin() - phi0.sin())
                    + phi0.sin() * 0.5 * i * (-i * z).exp() * (PI + 2.0 * i * ci - 2.0 * si)
                    + 0.5 * am * C64::from_polar(1.0, -th) * expint_en_scaled(1, am * z)
                    + 0.5 * ap * C64::from_polar(1.0, th) * expint_en_scaled(1, -ap * z);
                acc += v.re;
            }
            // −(2π)^{−1}·(−a e^{−T}) from ∫ s e^{−sz}/(s+c) = 1/z − c∫e^{−sz}/(s+c)
            acc *= -ctx.temporal.norm_factor() * (-big_t).exp();
        }
        _ => return Err(FieldError::Unsupported("explicit transient forms exist for sine and degree ≤ 2 polynomial sources".into())),
    }
    Ok(ctx.prefactor() * acc)
}


#[cfg(test)]
mod mode_tests {
    use super::*;

    #[test]
    fn transient_modes_agree() {
        let scales = ScaleParams::new(10.0, 0.1, 1.0, 1.0).unwrap();
        let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.3).unwrap();
        // principal-branch E₁ in the sine form is only valid while −(α+i)z stays off the cut
        let cases = [
            (TemporalSource::polynomial(vec![0.0, 1.0]).unwrap(), [0.05, 0.02]),
            (TemporalSource::polynomial(vec![0.4, 0.6]).unwrap(), [-0.3, 0.2]),
            (TemporalSource::sine(2.0, 0.4).unwrap(), [0.0, 0.0]),
            (TemporalSource::sine(2.0, 0.4).unwrap(), [0.01, 0.0]),
        ];
        for (tmp, x) in cases {
            let spec = GridSpec::new(1, 1, x, [1.0, 1.0]).unwrap();
            let run = |mode| transient_field(&scales, &sp, &tmp, spec, 0.1, TransientOptions { psi_nodes: 64, mode, tabulate: false }).unwrap().values[0];
            let (c, p, q) = (run(TransientMode::Closed), run(TransientMode::ExplicitForms), run(TransientMode::Quadrature));
            assert!((c - q).abs() <= 1e-8 * c.abs(), "closed {c} vs quad {q}");
            assert!((c - p).abs() <= 1e-8 * c.abs(), "closed {c} vs explicit {p}");
        }
    }

    #[test]
    fn profile_closed_vs_quadrature() {
        let sp = SpatialSource::new(1.3, 1.0, 2.0, 0.2).unwrap();
        for tmp in [
            TemporalSource::sine(2.0, 0.4).unwrap(),
            TemporalSource::polynomial(vec![0.0, 1.0]).unwrap(),
            TemporalSource::polynomial(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
        ] {
            for (w, z, psi) in [(0.5, 0.3, PI / 5.0), (1.0, -2.0, 2.0), (3.0, 5.0, 4.0), (0.05, 0.7, 1.0)] {
                let c = ProfileFn::new(tmp.clone(), sp, w, ProfileMode::ClosedForm).unwrap().eval(z, psi).unwrap();
                let q = ProfileFn::new(tmp.clone(), sp, w, ProfileMode::Quadrature).unwrap().eval(z, psi).unwrap();
                assert!((c - q).norm() <= 1e-8 * q.norm(), "w={w} z={z}: {c} vs {q}");
            }
        }
    }

    #[test]
    fn profile_small_omega() {
        // first-order term ≈ 1.5·m₁·ω/|β − iz| with m₁ = ∫τ g₀ dτ
        let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.0).unwrap();
        for tmp in [TemporalSource::sine(2.0, 0.4).unwrap(), TemporalSource::polynomial(vec![0.0, 1.0]).unwrap()] {
            let m1 = integrate_semi_inf(|t| t * tmp.eval(t), 0.0, QuadOptions::default()).value;
            for (z, psi) in [(0.0, 0.0), (0.4, 0.7), (-3.0, 0.3)] {
                let dev = |w: f64| {
                    let pf = ProfileFn::new(tmp.clone(), sp, w, ProfileMode::ClosedForm).unwrap();
                    let l = pf.small_omega_limit(z, psi);
                    (pf.eval(z, psi).unwrap() - l).norm() / l.norm()
                };
                let (d1, d2) = (dev(0.02), dev(0.01));
                let bound = 2.0 * m1.abs() * 0.01 / C64::new(sp.beta(psi), -z).norm();
                assert!(d2 < bound && d2 / d1 < 0.6, "{d1} {d2} {bound}");
            }
        }
    }

    #[test]
    fn tabulated_transient_matches_direct() {
        let scales = ScaleParams::new(20.0, 0.05, 1.0, 1.0).unwrap();
        let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.4).unwrap();
        let spec = GridSpec::centered(61, 1.0).unwrap();
        for tmp in [TemporalSource::sine(1.0, 0.3).unwrap(), TemporalSource::polynomial(vec![0.2, 0.8]).unwrap()] {
            let times = [0.0, 0.02, 0.1];
            let run = |tabulate| transient_fields(&scales, &sp, &tmp, spec, &times, TransientOptions { psi_nodes: 128, mode: TransientMode::Closed, tabulate }).unwrap();
            let (a, b) = (run(true), run(false));
            for (ga, gb) in a.iter().zip(&b) {
                let scale = gb.max_abs();
                let err = ga.values.iter().zip(&gb.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err <= 1e-9 * scale, "t={}: {err} vs {scale}", ga.t);
            }
        }
    }
}
