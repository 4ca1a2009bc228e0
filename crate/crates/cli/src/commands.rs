use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use serde_json::{json, Value};
use winterbottom::anisotropy::Anisotropy;
use winterbottom::convex::{
    build_wulff, classify_regime, winterbottom as truncate, winterbottom_with_volume, young_law_check, ConvexPolytope, Regime,
};
use winterbottom::io::{csv_table, loglog_scatter_svg, polyhedron_off, polytope_svg, records_csv, shapes_svg};
use winterbottom::optimizer::{brute_force_pixels, verify_theorem_main, OptimizeError, Schedule, VerifyOptions};
use winterbottom::shape::{energy_f, wetting_demo as slab_energies, SubstrateShape};
use winterbottom::stability::{reference_shape, stability_sweep, Family, StabilityError, StabilityOptions};

use crate::density::{parse_phi, phi_from_value, RunConfig};
use crate::{CliError, Common};

pub struct Output {
    reproducible: bool,
}

impl Output {
    pub fn new(reproducible: bool) -> Self {
        Self { reproducible }
    }

    fn svg_comment(&self) -> Option<String> {
        if self.reproducible {
            return None;
        }
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Some(format!("winterbottom {} generated at unix time {secs}", env!("CARGO_PKG_VERSION")))
    }

    fn write(&self, path: &Path, body: &str) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(path, body).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json(&self, path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(CliError::io)?;
        body.push('\n');
        self.write(path, &body)
    }

    fn summary(&self, value: Value) {
        let body = serde_json::to_string_pretty(&value).expect("summary serializes");
        let _ = writeln!(std::io::stdout(), "{body}");
    }
}

/// Path with the same stem as `base`: `run.json` with suffix `trace.csv` gives `run.trace.csv`.
fn companion(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}.{suffix}"))
}

struct Resolved {
    cfg: RunConfig,
    phi: Anisotropy,
    output: Option<PathBuf>,
}

fn resolve(common: &Common) -> Result<Resolved, CliError> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let dim = common.dim.or(cfg.dim);
    let phi = match (&common.phi, &cfg.phi) {
        (Some(s), _) => parse_phi(s, dim)?,
        (None, Some(v)) => phi_from_value(v, dim)?,
        (None, None) => return Err(CliError::config("missing --phi")),
    };
    let output = common.output.clone().or_else(|| cfg.output.clone());
    Ok(Resolved { cfg, phi, output })
}

fn required(value: Option<f64>, name: &str) -> Result<f64, CliError> {
    match value {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(CliError::config(format!("--{name} must be finite, got {x}"))),
        None => Err(CliError::config(format!("missing --{name}"))),
    }
}

fn positive_volume(value: Option<f64>) -> Result<f64, CliError> {
    let v = value.unwrap_or(1.0);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("--volume must be positive, got {v}")))
    }
}

fn regime_error(phi: &Anisotropy, lambda: f64) -> Option<CliError> {
    let label = classify_regime(phi, lambda);
    match label.regime {
        Regime::CompleteWetting => Some(CliError::new(
            CliError::WETTING,
            format!("complete wetting: lambda = {lambda} <= -phi(e_d) = {}; no minimizer exists", label.lower),
        )),
        _ => None,
    }
}

fn default_directions(dim: usize) -> usize {
    if dim == 2 {
        256
    } else {
        512
    }
}

fn polytope_artifacts(out: &Output, base: &Path, p: &ConvexPolytope) -> Result<(), CliError> {
    if let Some(svg) = polytope_svg(p, out.svg_comment().as_deref()) {
        out.write(&base.with_extension("svg"), &svg)?;
    }
    if let Some(poly) = p.as_polyhedron() {
        out.write(&base.with_extension("off"), &polyhedron_off(poly))?;
    }
    Ok(())
}

pub fn wulff(common: &Common, n: Option<usize>, out: &Output) -> Result<(), CliError> {
    let r = resolve(common)?;
    let n = n.or(r.cfg.n).unwrap_or_else(|| default_directions(r.phi.dim()));
    let w = build_wulff(&r.phi, n).map_err(CliError::construction)?;
    if let Some(path) = &r.output {
        out.write_json(path, &w)?;
        polytope_artifacts(out, path, &w)?;
    }
    out.summary(json!({
        "dim": w.dim(),
        "volume": w.volume(),
        "boundary_measure": w.boundary_measure(),
        "facets": w.facet_count(),
        "vertices": w.vertices().len(),
    }));
    Ok(())
}

fn winterbottom_shape(
    phi: &Anisotropy,
    lambda: f64,
    v: f64,
    n: usize,
) -> Result<(ConvexPolytope, SubstrateShape), CliError> {
    let w = build_wulff(phi, n).map_err(CliError::construction)?;
    let wv = winterbottom_with_volume(&truncate(&w, lambda), lambda, v).map_err(CliError::construction)?;
    let shape = SubstrateShape::from_polytope(&wv).map_err(CliError::construction)?;
    Ok((wv, shape))
}

pub fn winterbottom(
    common: &Common,
    lambda: Option<f64>,
    volume: Option<f64>,
    n: Option<usize>,
    out: &Output,
) -> Result<(), CliError> {
    let r = resolve(common)?;
    let lambda = required(lambda.or(r.cfg.lambda), "lambda")?;
    let v = positive_volume(volume.or(r.cfg.volume))?;
    if let Some(e) = regime_error(&r.phi, lambda) {
        return Err(e);
    }
    let n = n.or(r.cfg.n).unwrap_or(if r.phi.dim() == 2 { 1024 } else { 512 });
    let (wv, shape) = winterbottom_shape(&r.phi, lambda, v, n)?;
    let energy = energy_f(&shape, &r.phi, lambda).map_err(CliError::construction)?;
    let label = classify_regime(&r.phi, lambda);
    let young = if r.phi.is_smooth() && label.regime == Regime::PartialWetting {
        young_law_check(&r.phi, &wv, lambda).ok()
    } else {
        None
    };
    let report = json!({
        "phi": r.phi.to_spec(),
        "lambda": lambda,
        "volume": v,
        "regime": label.regime.to_string(),
        "thresholds": {"lower": label.lower, "upper": label.upper},
        "energy": energy,
        "young_residual": young,
        "shape": shape,
    });
    if let Some(path) = &r.output {
        out.write_json(path, &report)?;
        if let Some(svg) = shapes_svg(&[&shape], true, out.svg_comment().as_deref()) {
            out.write(&path.with_extension("svg"), &svg)?;
        }
        if let Some(poly) = wv.as_polyhedron() {
            out.write(&path.with_extension("off"), &polyhedron_off(poly))?;
        }
    }
    out.summary(json!({
        "regime": label.regime.to_string(),
        "thresholds": {"lower": label.lower, "upper": label.upper},
        "energy": energy,
        "young_residual": young,
        "facets": wv.facet_count(),
    }));
    Ok(())
}

pub struct OptimizeArgs {
    pub lambda: Option<f64>,
    pub volume: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub nvertices: Option<usize>,
    pub anneal_steps: Option<usize>,
}

fn optimize_error(e: OptimizeError) -> CliError {
    match e {
        OptimizeError::Regime { .. } => CliError::new(CliError::WETTING, e),
        OptimizeError::TooFewVertices(_) | OptimizeError::CellCount(_) | OptimizeError::Unsupported => {
            CliError::config(e)
        }
        OptimizeError::InvalidInit(_) => CliError::config(e),
        other => CliError::construction(other),
    }
}

fn stability_error(e: StabilityError) -> CliError {
    match e {
        StabilityError::Regime { .. } => CliError::new(CliError::WETTING, e),
        StabilityError::Unsupported => CliError::config(e),
        other => CliError::construction(other),
    }
}

pub fn optimize(common: &Common, a: OptimizeArgs, out: &Output) -> Result<(), CliError> {
    let r = resolve(common)?;
    let lambda = required(a.lambda.or(r.cfg.lambda), "lambda")?;
    let v = positive_volume(a.volume.or(r.cfg.volume))?;
    let trials = a.trials.or(r.cfg.trials).unwrap_or(5);
    let seed = a.seed.or(r.cfg.seed).unwrap_or(0);
    let mut opts = VerifyOptions::default();
    if let Some(nv) = a.nvertices.or(r.cfg.nvertices) {
        opts.n_vertices = nv;
    }
    if let Some(steps) = a.anneal_steps.or(r.cfg.anneal_steps) {
        opts.schedule = Schedule::geometric(opts.schedule.t0, 1e-10, steps);
    }
    if trials == 0 {
        return Err(CliError::config("--trials must be positive"));
    }
    let mut report = verify_theorem_main(&r.phi, lambda, v, trials, seed, &opts).map_err(optimize_error)?;
    let mut rows = Vec::new();
    for (k, t) in report.trials.iter_mut().enumerate() {
        for (i, e) in t.trace.iter().enumerate() {
            rows.push(vec![k.to_string(), t.seed.to_string(), i.to_string(), format!("{e}")]);
        }
        t.trace.clear();
    }
    if let Some(path) = &r.output {
        out.write_json(path, &report)?;
        out.write(&companion(path, "trace.csv"), &csv_table(&["trial", "seed", "step", "energy"], &rows))?;
        let (reference, _) = reference_shape(&r.phi, lambda, v, opts.n_directions).map_err(stability_error)?;
        let best = report
            .trials
            .iter()
            .min_by(|x, y| x.energy.total_cmp(&y.energy))
            .expect("at least one trial");
        if let Some(svg) = shapes_svg(&[&reference, &best.shape], true, out.svg_comment().as_deref()) {
            out.write(&path.with_extension("svg"), &svg)?;
        }
    }
    out.summary(json!({
        "method": report.method,
        "reference_energy": report.reference_energy,
        "min_energy": report.min_energy,
        "median_energy": report.median_energy,
        "best_asymmetry": report.best_asymmetry,
        "energy_ok": report.energy_ok,
        "asymmetry_ok": report.asymmetry_ok,
        "pass": report.pass,
    }));
    if report.pass {
        Ok(())
    } else {
        Err(CliError::new(CliError::VERIFICATION, "verification failed"))
    }
}

pub fn oracle(common: &Common, lambda: Option<f64>, cells: Option<usize>, out: &Output) -> Result<(), CliError> {
    let r = resolve(common)?;
    let lambda = required(lambda.or(r.cfg.lambda), "lambda")?;
    let cells = cells.or(r.cfg.cells).ok_or_else(|| CliError::config("missing --cells"))?;
    let res = brute_force_pixels(&r.phi, lambda, cells).map_err(optimize_error)?;
    if let Some(path) = &r.output {
        out.write_json(
            path,
            &json!({"phi": r.phi.to_spec(), "lambda": lambda, "cells": cells, "result": res}),
        )?;
    }
    let shapes: Vec<Value> = res
        .minimizers
        .iter()
        .map(|p| json!({"width": p.width(), "height": p.height(), "lift": p.lift(), "rectangle": p.is_rectangle()}))
        .collect();
    out.summary(json!({"min_energy": res.min_energy, "evaluated": res.evaluated, "minimizers": shapes}));
    Ok(())
}

fn family_of(name: &str, seed: u64) -> Result<Family, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "rect" | "rectangle" => Ok(Family::rect()),
        "noise" => Ok(Family::noise(seed)),
        "shear" => Ok(Family::shear()),
        other => Err(CliError::config(format!("unknown family {other:?} (rect, noise, shear)"))),
    }
}

pub fn stability(
    common: &Common,
    lambda: Option<f64>,
    volume: Option<f64>,
    family: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    out: &Output,
) -> Result<(), CliError> {
    let r = resolve(common)?;
    let lambda = required(lambda.or(r.cfg.lambda), "lambda")?;
    let v = positive_volume(volume.or(r.cfg.volume))?;
    let seed = seed.or(r.cfg.seed).unwrap_or(0);
    let family = family_of(family.as_deref().or(r.cfg.family.as_deref()).unwrap_or("rect"), seed)?;
    let n = n.or(r.cfg.n).unwrap_or(20);
    if n == 0 {
        return Err(CliError::config("--n must be positive"));
    }
    let sweep = stability_sweep(&r.phi, lambda, v, &family, n, &StabilityOptions::default()).map_err(stability_error)?;
    let summary = json!({
        "family": family,
        "records": sweep.records.len(),
        "reference_energy": sweep.reference_energy,
        "c_hat": sweep.sup_ratio,
        "small_slope": sweep.small_slope,
        "min_deficit": sweep.records.iter().map(|r| r.deficit).fold(f64::INFINITY, f64::min),
    });
    if let Some(path) = &r.output {
        out.write(&path.with_extension("csv"), &records_csv(&sweep.records))?;
        out.write_json(&path.with_extension("json"), &summary)?;
        let pts: Vec<(f64, f64)> = sweep.records.iter().map(|r| (r.deficit, r.asymmetry * r.asymmetry)).collect();
        let svg = loglog_scatter_svg(&pts, "deficit", "asymmetry^2", out.svg_comment().as_deref());
        out.write(&path.with_extension("svg"), &svg)?;
    }
    out.summary(summary);
    Ok(())
}

pub fn wetting_demo(
    common: &Common,
    lambda: Option<f64>,
    volume: Option<f64>,
    max_radius: Option<u32>,
    out: &Output,
) -> Result<(), CliError> {
    let r = resolve(common)?;
    let lambda = required(lambda.or(r.cfg.lambda), "lambda")?;
    let v = positive_volume(volume.or(r.cfg.volume))?;
    let max_r = max_radius.unwrap_or(100);
    if max_r == 0 {
        return Err(CliError::config("--max-radius must be positive"));
    }
    let radii: Vec<f64> = (1..=max_r).map(f64::from).collect();
    let energies = slab_energies(&r.phi, lambda, v, &radii).map_err(CliError::construction)?;
    let decreasing = energies.windows(2).all(|w| w[1].1 < w[0].1);
    let label = classify_regime(&r.phi, lambda);
    let summary = json!({
        "regime": label.regime.to_string(),
        "strictly_decreasing": decreasing,
        "final_radius": energies.last().map(|e| e.0),
        "final_energy": energies.last().map(|e| e.1),
    });
    if let Some(path) = &r.output {
        let rows: Vec<Vec<String>> = energies.iter().map(|(r, e)| vec![format!("{r}"), format!("{e}")]).collect();
        out.write(&path.with_extension("csv"), &csv_table(&["radius", "energy"], &rows))?;
        out.write_json(&path.with_extension("json"), &summary)?;
    }
    out.summary(summary);
    Ok(())
}
