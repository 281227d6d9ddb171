//! Velocity fields c(x) > 0 with gradient and Hessian, constant outside a
//! stabilization disk.

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VelocityError {
    #[error("velocity: {0}")]
    Invalid(String),
    #[error("velocity grid file {path}: {why}")]
    File { path: String, why: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

/// Table of c on a regular grid, interpolated by Catmull–Rom bicubics.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityTable {
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// row-major, `values[j*nx + i]` at (x_i, y_j)
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VelocityField {
    Constant(f64),
    /// c = background + taper(|x|)·Σ A_k exp(−|x−x_k|²/w_k²)
    Gaussian { background: f64, bumps: Vec<Bump>, r_stab: f64 },
    /// c = far + taper(|x|)·(table(x) − far)
    Table { table: VelocityTable, far: f64, r_stab: f64 },
}

// C³ smoothstep: 1 on [0, 0.8R], 0 beyond R.
fn taper(r: f64, r_stab: f64) -> (f64, f64, f64) {
    let r0 = 0.8 * r_stab;
    if r <= r0 {
        return (1.0, 0.0, 0.0);
    }
    if r >= r_stab {
        return (0.0, 0.0, 0.0);
    }
    let w = r_stab - r0;
    let u = (r_stab - r) / w; // 1 at r0, 0 at R
    let s = u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u.powi(3));
    let ds = 140.0 * u.powi(3) * (1.0 - u).powi(3);
    let dds = 420.0 * u * u * (1.0 - u).powi(2) * (1.0 - 2.0 * u);
    (s, -ds / w, dds / (w * w))
}

// Radial function f(|x|) lifted to gradient/Hessian in the plane.
fn radial(x: [f64; 2], f: (f64, f64, f64)) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let r = x[0].hypot(x[1]);
    if r < 1e-300 || (f.1 == 0.0 && f.2 == 0.0) {
        return (f.0, [0.0; 2], [[0.0; 2]; 2]);
    }
    let e = [x[0] / r, x[1] / r];
    let g = [f.1 * e[0], f.1 * e[1]];
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let d = if i == j { 1.0 } else { 0.0 };
            h[i][j] = f.2 * e[i] * e[j] + f.1 * (d - e[i] * e[j]) / r;
        }
    }
    (f.0, g, h)
}

fn mul(a: (f64, [f64; 2], [[f64; 2]; 2]), b: (f64, [f64; 2], [[f64; 2]; 2])) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let v = a.0 * b.0;
    let g = [a.1[0] * b.0 + a.0 * b.1[0], a.1[1] * b.0 + a.0 * b.1[1]];
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            h[i][j] = a.2[i][j] * b.0 + a.1[i] * b.1[j] + a.1[j] * b.1[i] + a.0 * b.2[i][j];
        }
    }
    (v, g, h)
}

impl VelocityTable {
    pub fn read(path: &Path) -> Result<Self, VelocityError> {
        let err = |why: String| VelocityError::File { path: path.display().to_string(), why };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut tok = text.split_whitespace();
        let mut next = |what: &str| -> Result<f64, VelocityError> {
            tok.next()
                .ok_or_else(|| err(format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|e| err(format!("bad {what}: {e}")))
        };
        let nx = next("nx")? as usize;
        let ny = next("ny")? as usize;
        let (xmin, xmax, ymin, ymax) = (next("xmin")?, next("xmax")?, next("ymin")?, next("ymax")?);
        let mut values = Vec::with_capacity(nx * ny);
        for k in 0..nx * ny {
            values.push(next(&format!("value #{k}"))?);
        }
        let t = Self { nx, ny, xmin, xmax, ymin, ymax, values };
        t.validate().map_err(|e| err(e.to_string()))?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), VelocityError> {
        if self.nx < 4 || self.ny < 4 || self.values.len() != self.nx * self.ny {
            return Err(VelocityError::Invalid("table needs at least 4×4 values matching nx·ny".into()));
        }
        if !(self.xmax > self.xmin && self.ymax > self.ymin) {
            return Err(VelocityError::Invalid("table extent is empty".into()));
        }
        if self.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(VelocityError::Invalid("table values must be positive".into()));
        }
        Ok(())
    }

    fn at(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        self.values[j * self.nx + i]
    }

    /// Catmull–Rom bicubic value, gradient and Hessian (edge values clamped).
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let hx = (self.xmax - self.xmin) / (self.nx - 1) as f64;
        let hy = (self.ymax - self.ymin) / (self.ny - 1) as f64;
        let sx = ((x[0] - self.xmin) / hx).clamp(0.0, (self.nx - 1) as f64);
        let sy = ((x[1] - self.ymin) / hy).clamp(0.0, (self.ny - 1) as f64);
        let inside_x = x[0] > self.xmin && x[0] < self.xmax;
        let inside_y = x[1] > self.ymin && x[1] < self.ymax;
        let i0 = (sx.floor() as isize).min(self.nx as isize - 2);
        let j0 = (sy.floor() as isize).min(self.ny as isize - 2);
        let (u, v) = (sx - i0 as f64, sy - j0 as f64);
        // Catmull–Rom basis and derivatives at parameter t
        let basis = |t: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            (
                [0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)],
                [0.5 * (-3.0 * t2 + 4.0 * t - 1.0), 0.5 * (9.0 * t2 - 10.0 * t), 0.5 * (-9.0 * t2 + 8.0 * t + 1.0), 0.5 * (3.0 * t2 - 2.0 * t)],
                [0.5 * (-6.0 * t + 4.0), 0.5 * (18.0 * t - 10.0), 0.5 * (-18.0 * t + 8.0), 0.5 * (6.0 * t - 2.0)],
            )
        };
        let (bu, du, ddu) = basis(u);
        let (bv, dv, ddv) = basis(v);
        let (mut f, mut fx, mut fy, mut fxx, mut fxy, mut fyy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                let p = self.at(i0 - 1 + a as isize, j0 - 1 + b as isize);
                f += bu[a] * bv[b] * p;
                fx += du[a] * bv[b] * p;
                fy += bu[a] * dv[b] * p;
                fxx += ddu[a] * bv[b] * p;
                fxy += du[a] * dv[b] * p;
                fyy += bu[a] * ddv[b] * p;
            }
        }
        // outside the table the value is frozen in the clamped direction
        let kx = if inside_x { 1.0 } else { 0.0 };
        let ky = if inside_y { 1.0 } else { 0.0 };
        (
            f,
            [kx * fx / hx, ky * fy / hy],
            [[kx * fxx / (hx * hx), kx * ky * fxy / (hx * hy)], [kx * ky * fxy / (hx * hy), ky * fyy / (hy * hy)]],
        )
    }
}

impl VelocityField {
    pub fn constant(c: f64) -> Result<Self, VelocityError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(VelocityError::Invalid(format!("constant velocity must be positive, got {c}")));
        }
        Ok(Self::Constant(c))
    }

    /// Gaussian bumps/dips; `r_stab = None` picks the radius where every bump is below 1e−16.
    pub fn gaussian(background: f64, bumps: Vec<Bump>, r_stab: Option<f64>) -> Result<Self, VelocityError> {
        let auto = bumps
            .iter()
            .map(|b| b.center[0].hypot(b.center[1]) + 6.1 * b.width)
            .fold(1.0, f64::max)
            / 0.8;
        let r_stab = r_stab.unwrap_or(auto);
        let f = Self::Gaussian { background, bumps, r_stab };
        f.check_positive()?;
        Ok(f)
    }

    pub fn table(table: VelocityTable, far: f64, r_stab: f64) -> Result<Self, VelocityError> {
        table.validate()?;
        let f = Self::Table { table, far, r_stab };
        f.check_positive()?;
        Ok(f)
    }

    fn check_positive(&self) -> Result<(), VelocityError> {
        if let Self::Gaussian { background, bumps, .. } = self {
            let worst: f64 = background + bumps.iter().map(|b| b.amplitude.min(0.0)).sum::<f64>();
            if !(worst > 0.0) {
                return Err(VelocityError::Invalid("velocity could become non-positive".into()));
            }
            if bumps.iter().any(|b| !(b.width > 0.0)) {
                return Err(VelocityError::Invalid("bump width must be positive".into()));
            }
        }
        if let Self::Table { far, r_stab, .. } = self {
            if !(*far > 0.0 && *r_stab > 0.0) {
                return Err(VelocityError::Invalid("far velocity and r_stab must be positive".into()));
            }
        }
        Ok(())
    }

    /// (c, ∇c, ∇²c) at x.
    pub fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        match self {
            Self::Constant(c) => (*c, [0.0; 2], [[0.0; 2]; 2]),
            Self::Gaussian { background, bumps, r_stab } => {
                let r = x[0].hypot(x[1]);
                if r >= *r_stab {
                    return (*background, [0.0; 2], [[0.0; 2]; 2]);
                }
                let mut sum = (0.0, [0.0; 2], [[0.0; 2]; 2]);
                for b in bumps {
                    let d = [x[0] - b.center[0], x[1] - b.center[1]];
                    let w2 = b.width * b.width;
                    let e = b.amplitude * (-(d[0] * d[0] + d[1] * d[1]) / w2).exp();
                    sum.0 += e;
                    for i in 0..2 {
                        sum.1[i] += -2.0 * d[i] / w2 * e;
                        for j in 0..2 {
                            let dij = if i == j { 1.0 } else { 0.0 };
                            sum.2[i][j] += (4.0 * d[i] * d[j] / (w2 * w2) - 2.0 * dij / w2) * e;
                        }
                    }
                }
                let t = radial(x, taper(r, *r_stab));
                let p = mul(t, sum);
                (background + p.0, p.1, p.2)
            }
            Self::Table { table, far, r_stab } => {
                let r = x[0].hypot(x[1]);
                if r >= *r_stab {
                    return (*far, [0.0; 2], [[0.0; 2]; 2]);
                }
                let v = table.eval(x);
                let t = radial(x, taper(r, *r_stab));
                let p = mul(t, (v.0 - far, v.1, v.2));
                (far + p.0, p.1, p.2)
            }
        }
    }

    pub fn c(&self, x: [f64; 2]) -> f64 {
        self.eval(x).0
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        self.eval(x).1
    }

    /// Velocity at the origin.
    pub fn c0(&self) -> f64 {
        self.c([0.0, 0.0])
    }

    /// Radius beyond which c is constant.
    pub fn r_stab(&self) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Gaussian { r_stab, .. } | Self::Table { r_stab, .. } => *r_stab,
        }
    }

    /// Upper bound on c over the plane.
    pub fn c_max(&self) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Gaussian { background, bumps, .. } => background + bumps.iter().map(|b| b.amplitude.max(0.0)).sum::<f64>(),
            Self::Table { table, far, .. } => {
                // Catmull–Rom overshoot is bounded by 1.25× the local spread
                let hi = table.values.iter().cloned().fold(f64::MIN, f64::max);
                let lo = table.values.iter().cloned().fold(f64::MAX, f64::min);
                (hi + 0.25 * (hi - lo)).max(*far)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(v: &VelocityField, pts: &[[f64; 2]]) {
        let h = 1e-5;
        for &x in pts {
            let (c, g, hs) = v.eval(x);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let (cp, gp, _) = v.eval(xp);
                let (cm, gm, _) = v.eval(xm);
                let fd = (cp - cm) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + c), "grad at {x:?}: {fd} vs {}", g[i]);
                for j in 0..2 {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd2 - hs[i][j]).abs() <= 1e-5 * (1.0 + c), "hess at {x:?}");
                }
            }
        }
    }

    #[test]
    fn gaussian_derivatives_and_taper() {
        let v = VelocityField::gaussian(1.0, vec![Bump { amplitude: 0.5, center: [0.3, -0.2], width: 0.8 }, Bump { amplitude: -0.3, center: [-1.0, 0.5], width: 0.5 }], Some(4.0)).unwrap();
        check_derivatives(&v, &[[0.1, 0.2], [-0.9, 0.4], [2.5, 2.0], [3.3, 0.1], [1.0, -1.0]]);
        assert_eq!(v.c([5.0, 0.0]), 1.0);
        assert_eq!(v.c([0.0, 4.0]), 1.0);
    }

    #[test]
    fn table_derivatives() {
        let (nx, ny) = (12, 10);
        let values = (0..nx * ny)
            .map(|k| {
                let (i, j) = ((k % nx) as f64, (k / nx) as f64);
                1.0 + 0.1 * (0.5 * i).sin() * (0.3 * j).cos()
            })
            .collect();
        let t = VelocityTable { nx, ny, xmin: -2.0, xmax: 2.0, ymin: -1.5, ymax: 1.5, values };
        let v = VelocityField::table(t, 1.0, 1.4).unwrap();
        check_derivatives(&v, &[[0.13, 0.21], [-0.77, 0.4], [1.0, -0.6], [0.5, 1.0]]);
    }

    #[test]
    fn table_reproduces_linear_data() {
        let (nx, ny) = (6, 5);
        let values = (0..nx * ny).map(|k| 2.0 + 0.1 * (k % nx) as f64 + 0.05 * (k / nx) as f64).collect();
        let t = VelocityTable { nx, ny, xmin: 0.0, xmax: 5.0, ymin: 0.0, ymax: 4.0, values };
        let (v, g, _) = t.eval([2.3, 1.7]);
        assert!((v - (2.0 + 0.23 + 0.085)).abs() < 1e-13);
        assert!((g[0] - 0.1).abs() < 1e-13 && (g[1] - 0.05).abs() < 1e-13);
    }
}
