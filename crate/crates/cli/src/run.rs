//! Mode drivers. Payload files are deterministic; wall-clock information
//! goes only to run.log.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use raywave_core::*;

use crate::config::{Mode, RunConfig};

#[derive(Debug)]
pub struct RunError {
    pub module: &'static str,
    pub msg: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.module, self.msg)
    }
}

fn fail(module: &'static str) -> impl Fn(&dyn std::fmt::Display) -> RunError {
    move |e| RunError { module, msg: e.to_string() }
}

fn io(e: std::io::Error) -> RunError {
    RunError { module: "cli_runner", msg: e.to_string() }
}

impl From<RayError> for RunError {
    fn from(e: RayError) -> Self {
        fail("ray_tracer")(&e)
    }
}
impl From<FieldError> for RunError {
    fn from(e: FieldError) -> Self {
        let module = match e {
            FieldError::Chart(_) => "front_chart",
            FieldError::Special(_) => "special_functions",
            _ => "field_assembler",
        };
        fail(module)(&e)
    }
}
impl From<ChartError> for RunError {
    fn from(e: ChartError) -> Self {
        fail("front_chart")(&e)
    }
}
impl From<FdError> for RunError {
    fn from(e: FdError) -> Self {
        fail("reference_oracle")(&e)
    }
}

/// Sidecar log: the only file that carries timestamps and timings.
pub struct RunLog {
    lines: Vec<String>,
    start: Instant,
}

impl RunLog {
    pub fn new() -> Self {
        Self { lines: vec![format!("started {}", chrono::Utc::now().to_rfc3339())], start: Instant::now() }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.lines.push(format!("[{:9.3}s] {}", self.start.elapsed().as_secs_f64(), msg.into()));
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join("run.log"), self.lines.join("\n") + "\n")
    }
}

pub fn execute(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<(), RunError> {
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join("resolved_config.toml"), cfg.resolved_toml()).map_err(io)?;
    match cfg.mode {
        Mode::Asymptotic => asymptotic(cfg, out, log),
        Mode::Oracle => oracle(cfg, out, log).map(|_| ()),
        Mode::Compare => compare(cfg, out, log),
        Mode::Profile => profile(cfg, out, log),
        Mode::Rays => rays(cfg, out, log),
    }
}

fn front(cfg: &RunConfig, log: &mut RunLog) -> Result<FrontSet, RunError> {
    let nm = &cfg.raw.numerics;
    let f = build_front(&cfg.velocity, nm.rays, &cfg.raw.output.times, FrontOptions { tol: nm.ray_tol, focal_threshold: nm.focal_threshold })?;
    log.note(format!("traced {} rays, max Hamiltonian drift {:e}", nm.rays, f.max_drift));
    Ok(f)
}

fn profile_fn(cfg: &RunConfig) -> Result<ProfileFn, RunError> {
    Ok(ProfileFn::new(cfg.temporal.clone(), cfg.spatial, cfg.scales.omega(), cfg.profile_mode)?)
}

fn save(cfg: &RunConfig, out: &Path, name: &str, g: &FieldGrid, index: &mut String) -> Result<(), RunError> {
    let file = format!("{name}.rwv");
    g.save(&out.join(&file))?;
    if cfg.raw.output.text {
        let mut w = std::io::BufWriter::new(fs::File::create(out.join(format!("{name}.txt"))).map_err(io)?);
        g.write_text(&mut w)?;
        w.flush().map_err(io)?;
    }
    writeln!(index, "{}\t{}\t{}\t{}\t{}", g.t, g.component.name(), file, g.masked_count(), g.max_abs()).unwrap();
    Ok(())
}

const INDEX_HEADER: &str = "t\tcomponent\tfile\tmasked\tmax_abs\n";

/// (transient, propagating, total) per output time on `spec`.
fn asymptotic_fields(cfg: &RunConfig, spec: GridSpec, log: &mut RunLog) -> Result<Vec<[FieldGrid; 3]>, RunError> {
    let times = &cfg.raw.output.times;
    let fr = front(cfg, log)?;
    let pf = profile_fn(cfg)?;
    let trans = transient_fields(&cfg.scales, &cfg.spatial, &cfg.temporal, spec, times, cfg.transient)?;
    log.note(format!("transient fields on {}x{} grid", spec.nx, spec.ny));
    let opts = PropagatingOptions { band: cfg.band, focal_threshold: cfg.raw.numerics.focal_threshold };
    let mut out = Vec::with_capacity(times.len());
    for (tr, &t) in trans.into_iter().zip(times) {
        let prop = propagating_field(&fr, &cfg.velocity, &pf, &cfg.scales, spec, t, opts)?;
        let tot = total_field(&prop, &tr)?;
        log.note(format!("propagating field at t = {t}: {} masked cells", prop.masked_count()));
        out.push([tr, prop, tot]);
    }
    Ok(out)
}

fn asymptotic(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<(), RunError> {
    let spec = cfg.grid.expect("validated");
    let mut index = String::from(INDEX_HEADER);
    for (k, fields) in asymptotic_fields(cfg, spec, log)?.iter().enumerate() {
        for g in fields {
            save(cfg, out, &format!("{}_{k:03}", g.component.name()), g, &mut index)?;
        }
    }
    fs::write(out.join("snapshots.tsv"), index).map_err(io)
}

fn oracle(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<FdRun, RunError> {
    let o = cfg.raw.oracle.as_ref().expect("validated");
    let times = &cfg.raw.output.times;
    let (half, r_cmp) = cfg.oracle_extent();
    let src = FdSource { scales: cfg.scales, spatial: cfg.spatial, temporal: cfg.temporal.clone() };
    let mut fd = FdConfig::forced(half, o.h, *times.last().unwrap(), r_cmp, src);
    fd.dt = o.dt;
    fd.energy_every = o.energy_every;
    let run = solve_fd(&fd, &cfg.velocity, times)?;
    log.note(format!("oracle: {} steps of dt = {} on {}^2 nodes", run.steps, run.dt, fd.grid()?.nx));
    let mut index = String::from(INDEX_HEADER);
    for (k, g) in run.snapshots.iter().enumerate() {
        save(cfg, out, &format!("oracle_{k:03}"), g, &mut index)?;
    }
    fs::write(out.join("snapshots.tsv"), index).map_err(io)?;
    if !run.energies.is_empty() {
        let mut s = String::from("t\tstaggered\tmidpoint\n");
        for e in &run.energies {
            writeln!(s, "{}\t{}\t{}", e.t, e.staggered, e.midpoint).unwrap();
        }
        fs::write(out.join("energy.tsv"), s).map_err(io)?;
    }
    Ok(run)
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(num / den)
}

fn compare(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<(), RunError> {
    let o = cfg.raw.oracle.clone().expect("validated");
    let run = oracle(cfg, out, log)?;
    let (half, r_cmp) = cfg.oracle_extent();
    let fd_spec = run.snapshots[0].spec;
    let h = fd_spec.spacing[0];
    let k = o.stride;
    // the comparison square never leaves the oracle grid
    let m = (((r_cmp.min(half) / h) + 1e-9).floor() as usize) / k;
    let lo = -((m * k) as f64) * h;
    let sub = GridSpec::new(2 * m + 1, 2 * m + 1, [lo, lo], [k as f64 * h, k as f64 * h])?;
    let off = (fd_spec.nx - 1) / 2 - m * k;
    let fields = asymptotic_fields(cfg, sub, log)?;
    let fr = front(cfg, log)?;

    let mut index = String::from(INDEX_HEADER);
    let mut rows = Vec::new();
    for (ti, (f, fd)) in fields.iter().zip(&run.snapshots).enumerate() {
        for g in f {
            save(cfg, out, &format!("{}_{ti:03}", g.component.name()), g, &mut index)?;
        }
        let tot = &f[2];
        let (mut num, mut den, mut cells, mut masked) = (0.0, 0.0, 0usize, 0usize);
        for j in 0..sub.ny {
            for i in 0..sub.nx {
                let idx = j * sub.nx + i;
                let cp = locate_branches(&fr, &cfg.velocity, sub.point(idx), tot.t, cfg.band, cfg.raw.numerics.focal_threshold)?;
                if cp.branches.is_empty() && !cp.masked {
                    continue;
                }
                cells += 1;
                if tot.mask[idx] {
                    masked += 1;
                    continue;
                }
                let v = fd.values[(off + j * k) * fd_spec.nx + off + i * k];
                num += (tot.values[idx] - v).powi(2);
                den += v * v;
            }
        }
        let err = if den > 0.0 { (num / den).sqrt() } else { f64::NAN };
        rows.push((tot.t, err, cells, masked, f[0].l2_norm(), fd.max_abs()));
    }
    fs::write(out.join("snapshots.tsv"), index).map_err(io)?;

    let lam = cfg.scales.lambda();
    let decay = slope(&rows.iter().filter(|r| r.4 > 0.0).map(|r| (r.0, r.4.ln())).collect::<Vec<_>>()).map(|s| s / lam);
    let head = rows.last().unwrap();
    let mut txt = String::new();
    let mut kv = String::new();
    writeln!(txt, "raywave comparison report").unwrap();
    writeln!(txt, "assumption: the reference scenario's symbol Lambda is read as lambda (decay rate)").unwrap();
    writeln!(txt, "assumption: front band = points whose nearest front foot lies within band = {}", cfg.band).unwrap();
    writeln!(txt, "lambda = {}, mu = {}, c0 = {}, omega = {}", lam, cfg.scales.mu(), cfg.scales.c0(), cfg.scales.omega()).unwrap();
    writeln!(txt, "oracle: h = {h}, dt = {}, {}^2 nodes; asymptotics on every node with stride {k} within radius {}", run.dt, fd_spec.nx, r_cmp.min(half)).unwrap();
    writeln!(txt).unwrap();
    writeln!(txt, "headline: banded relative L2 error at t = {} is {:.6e}", head.0, head.1).unwrap();
    writeln!(txt).unwrap();
    writeln!(txt, "{:>12} {:>14} {:>10} {:>10} {:>14} {:>14}", "t", "banded_rel_l2", "band_cells", "masked", "transient_l2", "oracle_max").unwrap();
    for r in &rows {
        writeln!(txt, "{:>12} {:>14.6e} {:>10} {:>10} {:>14.6e} {:>14.6e}", r.0, r.1, r.2, r.3, r.4, r.5).unwrap();
    }
    match decay {
        Some(s) => writeln!(txt, "\ntransient decay slope: {s:.4}·lambda (expected -nu = {})", -cfg.scales.nu()).unwrap(),
        None => writeln!(txt, "\ntransient decay slope: needs at least 3 output times").unwrap(),
    }
    writeln!(kv, "assumption.lambda_symbol=lambda").unwrap();
    writeln!(kv, "band={}", cfg.band).unwrap();
    writeln!(kv, "headline.t={}", head.0).unwrap();
    writeln!(kv, "headline.banded_rel_l2={}", head.1).unwrap();
    for (i, r) in rows.iter().enumerate() {
        writeln!(kv, "t{i:03}.t={}", r.0).unwrap();
        writeln!(kv, "t{i:03}.banded_rel_l2={}", r.1).unwrap();
        writeln!(kv, "t{i:03}.band_cells={}", r.2).unwrap();
        writeln!(kv, "t{i:03}.masked_cells={}", r.3).unwrap();
        writeln!(kv, "t{i:03}.mask_coverage={}", if r.2 > 0 { r.3 as f64 / r.2 as f64 } else { 0.0 }).unwrap();
        writeln!(kv, "t{i:03}.transient_l2={}", r.4).unwrap();
    }
    if let Some(s) = decay {
        writeln!(kv, "transient_decay_slope_per_lambda={s}").unwrap();
    }
    fs::write(out.join("report.txt"), txt).map_err(io)?;
    fs::write(out.join("report.kv"), kv).map_err(io)
}

fn profile(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<(), RunError> {
    let pf = profile_fn(cfg)?;
    let p = &cfg.raw.profile;
    let mut s = String::from("psi\tz\tre\tim\n");
    for j in 0..p.psi_count {
        let psi = std::f64::consts::PI * j as f64 / p.psi_count as f64;
        for i in 0..p.z_count {
            let z = p.z_min + (p.z_max - p.z_min) * i as f64 / (p.z_count - 1) as f64;
            let v = pf.eval(z, psi)?;
            writeln!(s, "{psi}\t{z}\t{}\t{}", v.re, v.im).unwrap();
        }
    }
    log.note(format!("profile: {} x {} samples", p.psi_count, p.z_count));
    fs::write(out.join("profile.tsv"), s).map_err(io)
}

fn rays(cfg: &RunConfig, out: &Path, log: &mut RunLog) -> Result<(), RunError> {
    let f = front(cfg, log)?;
    let mut s = String::from("psi\tt\tx\ty\tpx\tpy\tx_psi_x\tx_psi_y\tx_psi_norm\tmorse\tfocal\n");
    for (k, &psi) in f.psi.iter().enumerate() {
        for (ti, &t) in f.times.iter().enumerate() {
            let r = &f.samples[ti][k];
            writeln!(
                s,
                "{psi}\t{t}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.x[0],
                r.x[1],
                r.p[0],
                r.p[1],
                r.x_psi[0],
                r.x_psi[1],
                r.x_psi_norm(),
                r.morse,
                u8::from(r.focal)
            )
            .unwrap();
        }
    }
    fs::write(out.join("rays.tsv"), s).map_err(io)?;
    let mut c = String::from("psi\tfocal_times\n");
    for (psi, ts) in f.psi.iter().zip(&f.caustics) {
        let list: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
        writeln!(c, "{psi}\t{}", list.join(",")).unwrap();
    }
    fs::write(out.join("caustics.tsv"), c).map_err(io)
}

/// `--out` beats RAYWAVE_OUT beats `[output] dir` beats ./raywave-out.
pub fn output_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    cli.or_else(|| std::env::var_os("RAYWAVE_OUT").map(PathBuf::from))
        .or_else(|| cfg.raw.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("raywave-out"))
}
