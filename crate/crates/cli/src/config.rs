//! Run configuration: TOML text → validated model objects.
//!
//! Every diagnostic is anchored to a line of the config file. Defaults are
//! expanded in place so the resolved config can be echoed verbatim.

use std::fmt;
use std::path::{Path, PathBuf};

use raywave_core::*;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: Option<usize>, msg: impl Into<String>) -> Self {
        Self { line, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => write!(f, "{}", self.msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Asymptotic,
    Oracle,
    Compare,
    Profile,
    Rays,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scales {
    pub lambda: f64,
    pub mu: f64,
    /// defaults to c at the origin of the velocity field
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "ten")]
    pub omega_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spatial {
    #[serde(default = "one")]
    pub amplitude: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub deriv: [u32; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Temporal {
    /// sine | polynomial | tabulated
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Velocity {
    /// constant | gaussian | table
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<BumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_stab: Option<f64>,
    /// table file, relative to the config file
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far: Option<f64>,
}

impl Default for Velocity {
    fn default() -> Self {
        Self { kind: "constant".into(), c: None, background: None, bumps: Vec::new(), r_stab: None, file: None, far: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_extent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// also write plain-text matrices next to the binary snapshots
    #[serde(default)]
    pub text: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "n256")]
    pub rays: usize,
    #[serde(default = "n256")]
    pub psi_nodes: usize,
    /// closed | quadrature | explicit
    #[serde(default = "closed")]
    pub transient_mode: String,
    #[serde(default = "yes")]
    pub tabulate: bool,
    /// closed | quadrature | auto
    #[serde(default = "auto")]
    pub profile_mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    #[serde(default = "milli")]
    pub focal_threshold: f64,
    #[serde(default = "nano")]
    pub ray_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_extent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison_radius: Option<f64>,
    #[serde(default)]
    pub energy_every: usize,
    /// compare mode: asymptotics on every `stride`-th oracle node
    #[serde(default = "two")]
    pub stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    #[serde(default = "minus20")]
    pub z_min: f64,
    #[serde(default = "plus20")]
    pub z_max: f64,
    #[serde(default = "n401")]
    pub z_count: usize,
    /// ψ_k = πk/psi_count, k < psi_count (F is π-periodic in ψ)
    #[serde(default = "four")]
    pub psi_count: usize,
}

impl Default for Profile {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn n256() -> usize {
    256
}
fn n401() -> usize {
    401
}
fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn closed() -> String {
    "closed".into()
}
fn auto() -> String {
    "auto".into()
}
fn yes() -> bool {
    true
}
fn milli() -> f64 {
    1e-3
}
fn nano() -> f64 {
    1e-9
}
fn minus20() -> f64 {
    -20.0
}
fn plus20() -> f64 {
    20.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scales: Scales,
    pub spatial: Spatial,
    pub temporal: Temporal,
    #[serde(default)]
    pub velocity: Velocity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Oracle>,
    #[serde(default)]
    pub profile: Profile,
}

/// Validated configuration with the model objects built.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub raw: RawConfig,
    pub scales: ScaleParams,
    pub spatial: SpatialSource,
    pub temporal: TemporalSource,
    pub velocity: VelocityField,
    pub grid: Option<GridSpec>,
    pub band: f64,
    pub transient: TransientOptions,
    pub profile_mode: ProfileMode,
}

/// Line numbers of `[section]` headers and `key =` assignments.
struct Lines<'a> {
    text: &'a str,
}

impl Lines<'_> {
    fn section(&self, name: &str) -> Option<usize> {
        let want = format!("[{name}]");
        self.text.lines().position(|l| l.trim() == want).map(|i| i + 1)
    }

    fn key(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, l) in self.text.lines().enumerate() {
            let l = l.trim();
            if l.starts_with('[') {
                current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            } else if current == section {
                if let Some((k, _)) = l.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        self.section(section)
    }

    fn offset(&self, byte: usize) -> usize {
        self.text[..byte.min(self.text.len())].matches('\n').count() + 1
    }
}

pub fn load(path: &Path, mode: Mode) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(None, format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, mode, &base)
}

pub fn parse(text: &str, mode: Mode, base: &Path) -> Result<RunConfig, ConfigError> {
    let lines = Lines { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| lines.offset(s.start));
        ConfigError::at(line, e.message().to_string())
    })?;
    validate(raw, mode, &lines, base)
}

fn validate(mut raw: RawConfig, mode: Mode, lines: &Lines, base: &Path) -> Result<RunConfig, ConfigError> {
    let field = |sec: &str, key: &str, msg: String| ConfigError::at(lines.key(sec, key), msg);
    let need = |sec: &str, key: &str, v: Option<f64>| v.ok_or_else(|| ConfigError::at(lines.section(sec), format!("missing field `{key}` in [{sec}]")));

    let v = &raw.velocity;
    let velocity = match v.kind.as_str() {
        "constant" => VelocityField::constant(v.c.or(raw.scales.c0).unwrap_or(1.0)),
        "gaussian" => {
            let bumps = v.bumps.iter().map(|b| Bump { amplitude: b.amplitude, center: b.center, width: b.width }).collect();
            VelocityField::gaussian(need("velocity", "background", v.background)?, bumps, v.r_stab)
        }
        "table" => {
            let file = v.file.as_ref().ok_or_else(|| ConfigError::at(lines.section("velocity"), "missing field `file` in [velocity]"))?;
            let path: PathBuf = base.join(file);
            let table = VelocityTable::read(&path).map_err(|e| field("velocity", "file", e.to_string()))?;
            let far = need("velocity", "far", v.far)?;
            let r_stab = need("velocity", "r_stab", v.r_stab)?;
            VelocityField::table(table, far, r_stab)
        }
        other => return Err(field("velocity", "kind", format!("unknown velocity kind `{other}` (constant, gaussian, table)"))),
    }
    .map_err(|e| ConfigError::at(lines.section("velocity"), e.to_string()))?;

    let c_origin = velocity.c0();
    let c0 = match raw.scales.c0 {
        Some(c) if (c - c_origin).abs() > 1e-12 * c_origin => {
            return Err(field("scales", "c0", format!("c0 = {c} but the velocity field has c(0) = {c_origin}")));
        }
        _ => c_origin,
    };
    raw.scales.c0 = Some(c0);
    let s = &raw.scales;
    let scales = ScaleParams::new(s.lambda, s.mu, c0, s.nu).map_err(|e| match &e {
        SourceError::Invalid { name, .. } => field("scales", name, e.to_string()),
    })?;
    if scales.omega() > s.omega_max {
        return Err(field("scales", "mu", format!("omega = c0/(lambda·mu) = {} exceeds omega_max = {}", scales.omega(), s.omega_max)));
    }

    let sp = &raw.spatial;
    let spatial = SpatialSource::with_deriv(sp.amplitude, sp.b1, sp.b2, sp.theta, sp.deriv).map_err(|e| match &e {
        SourceError::Invalid { name, .. } => field("spatial", name, e.to_string()),
    })?;

    let tp = &raw.temporal;
    let temporal = match tp.kind.as_str() {
        "sine" => TemporalSource::sine(need("temporal", "alpha", tp.alpha)?, tp.phi0.unwrap_or(0.0)),
        "polynomial" => {
            let c = tp.coeffs.clone().ok_or_else(|| ConfigError::at(lines.section("temporal"), "missing field `coeffs` in [temporal]"))?;
            TemporalSource::polynomial(c)
        }
        "tabulated" => {
            let samples = tp.samples.clone().ok_or_else(|| ConfigError::at(lines.section("temporal"), "missing field `samples` in [temporal]"))?;
            TemporalSource::tabulated(need("temporal", "dt", tp.dt)?, samples)
        }
        other => return Err(field("temporal", "kind", format!("unknown temporal kind `{other}` (sine, polynomial, tabulated)"))),
    }
    .map_err(|e| match &e {
        SourceError::Invalid { name, .. } => field("temporal", name, e.to_string()),
    })?;
    if tp.kind == "sine" {
        raw.temporal.phi0 = Some(tp.phi0.unwrap_or(0.0));
    }

    let grid = match &raw.grid {
        None => None,
        Some(g) => Some(match (g.n, g.half_extent, g.nx, g.ny, g.origin, g.spacing) {
            (Some(n), Some(h), None, None, None, None) => GridSpec::centered(n, h),
            (None, None, Some(nx), Some(ny), Some(o), Some(d)) => GridSpec::new(nx, ny, o, d),
            _ => return Err(ConfigError::at(lines.section("grid"), "[grid] needs either `n` and `half_extent`, or `nx`, `ny`, `origin` and `spacing`")),
        }
        .map_err(|e| ConfigError::at(lines.section("grid"), e.to_string()))?),
    };
    if grid.is_none() && mode == Mode::Asymptotic {
        return Err(ConfigError::at(None, "missing section [grid] (required by mode asymptotic)"));
    }

    let times = &raw.output.times;
    if matches!(mode, Mode::Asymptotic | Mode::Oracle | Mode::Compare | Mode::Rays) && times.is_empty() {
        return Err(ConfigError::at(lines.key("output", "times"), "missing field `times` in [output]"));
    }
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(field("output", "times", "times must be positive and strictly increasing".into()));
    }
    if matches!(mode, Mode::Oracle | Mode::Compare) {
        let o = raw.oracle.as_ref().ok_or_else(|| ConfigError::at(None, "missing section [oracle] (required by modes oracle and compare)"))?;
        if !(o.h > 0.0) {
            return Err(field("oracle", "h", format!("h must be positive, got {}", o.h)));
        }
        if o.stride == 0 {
            return Err(field("oracle", "stride", "stride must be ≥ 1".into()));
        }
    }

    let nm = raw.numerics.clone();
    if nm.rays < 16 || !nm.rays.is_power_of_two() {
        return Err(field("numerics", "rays", format!("rays must be a power of two ≥ 16, got {}", nm.rays)));
    }
    if nm.psi_nodes < 8 || nm.psi_nodes % 2 != 0 {
        return Err(field("numerics", "psi_nodes", format!("psi_nodes must be even and ≥ 8, got {}", nm.psi_nodes)));
    }
    let tmode = match nm.transient_mode.as_str() {
        "closed" => TransientMode::Closed,
        "quadrature" => TransientMode::Quadrature,
        "explicit" => TransientMode::ExplicitForms,
        other => return Err(field("numerics", "transient_mode", format!("unknown transient mode `{other}` (closed, quadrature, explicit)"))),
    };
    let closed_ok = temporal.has_closed_form() && !spatial.has_deriv();
    let profile_mode = match nm.profile_mode.as_str() {
        "closed" if closed_ok => ProfileMode::ClosedForm,
        "closed" => return Err(field("numerics", "profile_mode", "closed-form profile needs a sine/polynomial source without derivatives".into())),
        "quadrature" => ProfileMode::Quadrature,
        "auto" if closed_ok => ProfileMode::ClosedForm,
        "auto" => ProfileMode::Quadrature,
        other => return Err(field("numerics", "profile_mode", format!("unknown profile mode `{other}` (closed, quadrature, auto)"))),
    };
    raw.numerics.profile_mode = if profile_mode == ProfileMode::ClosedForm { "closed".into() } else { "quadrature".into() };
    let band = nm.band.unwrap_or_else(|| default_band(scales.mu(), scales.omega(), spatial.b_max()));
    if !(band > 0.0) {
        return Err(field("numerics", "band", format!("band must be positive, got {band}")));
    }
    raw.numerics.band = Some(band);
    let transient = TransientOptions { psi_nodes: nm.psi_nodes, mode: tmode, tabulate: nm.tabulate };

    let pr = &raw.profile;
    if mode == Mode::Profile && (pr.z_count < 2 || pr.psi_count == 0 || !(pr.z_max > pr.z_min)) {
        return Err(ConfigError::at(lines.section("profile"), "[profile] needs z_max > z_min, z_count ≥ 2 and psi_count ≥ 1"));
    }

    Ok(RunConfig { mode, raw, scales, spatial, temporal, velocity, grid, band, transient, profile_mode })
}

impl RunConfig {
    /// The fully-resolved config as TOML (defaults expanded).
    pub fn resolved_toml(&self) -> String {
        let body = toml::to_string(&self.raw).expect("config serializes");
        format!("# resolved configuration; omega = c0/(lambda·mu) = {}\n{body}", self.scales.omega())
    }

    /// Oracle grid parameters: (half extent, comparison radius).
    pub fn oracle_extent(&self) -> (f64, f64) {
        let o = self.raw.oracle.as_ref().expect("validated");
        let t_end = self.raw.output.times.last().copied().unwrap_or(0.0);
        let r_cmp = o.comparison_radius.unwrap_or(self.velocity.c_max() * t_end + self.band);
        let half = o.half_extent.unwrap_or_else(|| ((2.0 * self.velocity.c_max() * t_end + r_cmp) / 2.0 / o.h).ceil() * o.h);
        (half, r_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[scales]\nlambda = 1.0\nmu = 0.1\n\n[spatial]\nb1 = 1.0\nb2 = 2.0\n\n[temporal]\nkind = \"polynomial\"\ncoeffs = [0.0, 1.0]\n\n[grid]\nn = 11\nhalf_extent = 2.0\n\n[output]\ntimes = [1.0]\n";

    #[test]
    fn defaults_expand() {
        let c = parse(BASE, Mode::Asymptotic, Path::new(".")).unwrap();
        assert_eq!(c.scales.c0(), 1.0);
        assert!((c.scales.omega() - 10.0).abs() < 1e-12);
        assert_eq!(c.raw.numerics.band, Some(12.0 * 0.1 * 10.0 * 2.0));
        let echo = c.resolved_toml();
        let again = parse(&echo, Mode::Asymptotic, Path::new(".")).unwrap();
        assert_eq!(again.resolved_toml(), echo);
    }

    #[test]
    fn missing_b2_names_field_and_line() {
        let text = BASE.replace("b2 = 2.0\n", "");
        let e = parse(&text, Mode::Asymptotic, Path::new(".")).unwrap_err();
        assert!(e.msg.contains("b2"), "{e}");
        assert!(e.line.is_some());
    }

    #[test]
    fn semantic_errors_point_at_key() {
        let text = BASE.replace("mu = 0.1", "mu = 0.01");
        let e = parse(&text, Mode::Asymptotic, Path::new(".")).unwrap_err();
        assert_eq!(e.line, Some(3), "{e}");
        assert!(e.msg.contains("omega_max"));
        let e = parse(&BASE.replace("\"polynomial\"", "\"cosine\""), Mode::Asymptotic, Path::new(".")).unwrap_err();
        assert_eq!(e.line, Some(10), "{e}");
    }

    #[test]
    fn mode_requirements() {
        assert!(parse(BASE, Mode::Compare, Path::new(".")).unwrap_err().msg.contains("[oracle]"));
        let no_grid = BASE.replace("[grid]\nn = 11\nhalf_extent = 2.0\n", "");
        assert!(parse(&no_grid, Mode::Asymptotic, Path::new(".")).is_err());
        assert!(parse(&no_grid, Mode::Profile, Path::new(".")).is_ok());
    }

    #[test]
    fn shipped_configs_parse() {
        for (text, mode) in [
            (include_str!("../../../configs/reference_scenario.toml"), Mode::Asymptotic),
            (include_str!("../../../configs/compare_constant.toml"), Mode::Compare),
            (include_str!("../../../configs/lens_rays.toml"), Mode::Rays),
        ] {
            parse(text, mode, Path::new(".")).unwrap();
        }
    }
}
