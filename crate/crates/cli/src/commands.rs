use std::path::{Path, PathBuf};

use cglwaves::continuation::{continue_path, ContinuationPath, ContinuationPoint};
use cglwaves::evolve::{defocusing, evolve};
use cglwaves::grid::RadialGrid;
use cglwaves::ground_state::{rounding_floor, solve_ground_state, GroundState};
use cglwaves::io::FieldFile;
use cglwaves::linearized::{
    convergence_orders, eigs_l_plus, identity_residual, kernel_diagnostics, spectrum_k, Identity,
};
use cglwaves::params::{DomainKind, ProblemParams};
use cglwaves::{build_grid, Error};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::args::{self, ContinueArgs, EvolveArgs, GroundArgs, PlotArgs, SpectrumArgs};
use crate::error::{CliError, CliResult};
use crate::plot::{self, Panel, Series};

pub const MANIFEST: &str = "run-manifest.json";

/// What a command produced: a JSON summary, a one-paragraph text summary
/// and the files it wrote.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub outputs: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read_field(path: &Path) -> CliResult<FieldFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(FieldFile::parse(&text)?)
}

fn dir_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `dir/stem_suffix.ext` next to `path`.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Records `config` under `command` in the run manifest of `dir`, keeping
/// the records of other commands.
pub fn write_manifest(dir: &Path, command: &str, config: Value, outputs: &[PathBuf]) -> CliResult<()> {
    let path = dir.join(MANIFEST);
    let mut runs = match std::fs::read_to_string(&path) {
        Ok(text) => match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(mut m)) => match m.remove("runs") {
                Some(Value::Object(r)) => r,
                _ => Map::new(),
            },
            _ => Map::new(),
        },
        Err(_) => Map::new(),
    };
    let outputs: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
    runs.insert(command.to_string(), json!({ "config": config, "outputs": outputs }));
    let manifest = json!({
        "tool": "cglwaves",
        "version": env!("CARGO_PKG_VERSION"),
        "runs": runs,
    });
    write_file(&path, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))
}

fn ground_summary(gs: &GroundState, out: &Path) -> Value {
    let v = gs.values();
    let monotone = v.windows(2).all(|w| w[1] <= w[0]);
    let decay = match gs.params.domain {
        DomainKind::UnitBall => {
            // one-sided slope against the wall value 0
            let slope = -v[v.len() - 1] / (gs.grid.rmax() - gs.grid.nodes()[v.len() - 1]);
            json!({ "monotone": monotone, "boundary_slope": slope, "ok": monotone && slope < 0.0 })
        }
        DomainKind::WholeSpace => {
            let tail = v[v.len() - 1] / v[0];
            json!({ "monotone": monotone, "tail_ratio": tail, "ok": monotone && tail < 1e-3 })
        }
    };
    json!({
        "output": out.display().to_string(),
        "domain": gs.params.domain.as_str(),
        "dim": gs.params.dim,
        "alpha": gs.params.alpha,
        "rho": gs.params.rho,
        "points": gs.grid.points(),
        "rmax": gs.grid.rmax(),
        "residual": gs.residual_norm,
        "rounding_floor": rounding_floor(gs.grid.spacing()),
        "energy": gs.energy,
        "peak": gs.peak(),
        "l2_norm": gs.l2_norm(),
        "iterations": gs.iterations,
        "decay_check": decay,
    })
}

fn solve_and_write(params: &ProblemParams, points: usize, rmax: Option<f64>, out: &Path) -> CliResult<Value> {
    let grid = build_grid(params, points, rmax)?;
    let gs = solve_ground_state(params, &grid, None)?;
    write_file(out, &FieldFile::from_real(*params, grid, &gs.u)?.to_text())?;
    info!("wrote {}", out.display());
    Ok(ground_summary(&gs, out))
}

pub fn ground(a: &GroundArgs) -> CliResult<Report> {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("ground.csv"));
    let params = a.problem.params(0.0)?;
    let points = a.problem.points()?;
    let Some(rhos) = &a.sweep_rho else {
        let summary = solve_and_write(&params, points, a.problem.rmax, &out)?;
        let text = format!(
            "ground state: peak {:.9}, residual {:.3e}, energy {:.9} -> {}",
            summary["peak"].as_f64().unwrap_or(f64::NAN),
            summary["residual"].as_f64().unwrap_or(f64::NAN),
            summary["energy"].as_f64().unwrap_or(f64::NAN),
            out.display()
        );
        return Ok(Report { json: summary, text, outputs: vec![out] });
    };
    if rhos.is_empty() {
        return Err(CliError::Usage("--sweep-rho needs at least one value".into()));
    }
    let jobs: Vec<(ProblemParams, PathBuf)> = rhos
        .iter()
        .map(|&rho| Ok((params.with_rho(rho)?, sibling(&out, &format!("_rho{rho}"), "csv"))))
        .collect::<CliResult<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", a.jobs.unwrap_or(0))))?;
    let results: Vec<CliResult<Value>> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, path)| solve_and_write(p, points, a.problem.rmax, path))
            .collect()
    });
    let mut summaries = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => summaries.push(v),
            Err(e) => {
                warn!("sweep member failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    let text = format!("{} ground states written next to {}", summaries.len(), out.display());
    Ok(Report {
        json: Value::Array(summaries),
        text,
        outputs: jobs.into_iter().map(|(_, p)| p).collect(),
    })
}

fn load_ground(path: &Path) -> CliResult<GroundState> {
    let file = read_field(path)?;
    if file.field.im().max_abs() != 0.0 {
        return Err(CliError::Usage(format!("{}: a ground state must be real", path.display())));
    }
    Ok(GroundState::from_field(file.field.re(), file.params, file.grid)?)
}

fn identity_ladder(u: &GroundState, id: Identity) -> CliResult<Value> {
    let m = u.grid.points();
    let ladder: Vec<usize> = [8, 4, 2, 1].iter().map(|d| m / d).collect();
    let mut residuals = Vec::new();
    for &points in &ladder {
        let grid = RadialGrid::new(u.params.domain, u.params.dim, points, u.grid.rmax())?;
        let gs = if points == m {
            u.clone()
        } else {
            solve_ground_state(&u.params, &grid, None)?
        };
        residuals.push(identity_residual(&gs, id)?);
    }
    Ok(json!({
        "grids": ladder,
        "residuals": residuals,
        "orders": convergence_orders(&residuals),
    }))
}

pub fn spectrum(a: &SpectrumArgs) -> CliResult<Report> {
    let input = a
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("spectrum needs --input <ground-state file>".into()))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("spec.json"));
    let k = a.k.unwrap_or(5);
    let u = load_ground(input)?;
    let ks = spectrum_k(&u, k.max(2))?;
    let lp = eigs_l_plus(&u, k)?;
    let kernel = kernel_diagnostics(&u)?;
    let mut report = json!({
        "input": input.display().to_string(),
        "residual": u.residual_norm,
        "lambda1_K": ks.eigenvalues[0],
        "lambda2_K": ks.eigenvalues[1],
        "k_eigenvalues": ks.eigenvalues,
        "l_plus_eigenvalues": lp.eigenvalues,
        "kernel_dim": kernel.kernel_dim_estimate,
        "kernel": kernel,
    });
    if a.check_identities {
        let p = &u.params;
        let mut ids = Vec::new();
        match p.domain {
            DomainKind::WholeSpace => {
                if p.rho == 1.0 {
                    ids.push(Identity::EtaWhole);
                }
                ids.push(Identity::EtaBall);
            }
            DomainKind::UnitBall => {
                ids.push(Identity::EtaBall);
                if p.rho == 0.0 {
                    ids.push(Identity::Pohozaev);
                }
            }
        }
        let mut table = Map::new();
        for id in ids {
            table.insert(id.name().to_string(), identity_ladder(&u, id)?);
        }
        report["identities"] = Value::Object(table);
    }
    write_file(&out, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    let text = format!(
        "lambda1(K) = {:.9}, lambda2(K) = {:.9}, kernel dimension {} -> {}",
        ks.eigenvalues[0],
        ks.eigenvalues[1],
        kernel.kernel_dim_estimate,
        out.display()
    );
    Ok(Report { json: report, text, outputs: vec![out] })
}

fn point_file(path: &ContinuationPath, pt: &ContinuationPoint) -> CliResult<FieldFile> {
    Ok(FieldFile::new(path.params, path.grid.clone(), pt.u.clone())?
        .with_extra("gamma", format!("{:e}", pt.gamma))
        .with_extra("omega", format!("{:e}", pt.omega))
        .with_extra("beta", path.beta)
        .with_extra("residual", format!("{:e}", pt.residual)))
}

/// Runs the continuation described by `a` without writing anything.
pub fn run_continuation(a: &ContinueArgs) -> CliResult<ContinuationPath> {
    let gamma_to = a
        .gamma_to
        .ok_or_else(|| CliError::Usage("continue needs --gamma-to".into()))?;
    let theta = a.theta.unwrap_or(0.0);
    let ground = match &a.input {
        Some(p) => load_ground(p)?,
        None => {
            let params = a.problem.params(0.0)?;
            let grid = build_grid(&params, a.problem.points()?, a.problem.rmax)?;
            solve_ground_state(&params, &grid, None)?
        }
    };
    Ok(continue_path(&ground, theta, a.beta.unwrap_or(0.0), gamma_to, a.step.unwrap_or(0.01))?)
}

fn write_path(path: &ContinuationPath, out: &Path, dump: bool) -> CliResult<Vec<PathBuf>> {
    write_file(out, &path.to_csv())?;
    let mut outputs = vec![out.to_path_buf()];
    if dump {
        for (k, pt) in path.points.iter().enumerate() {
            let f = sibling(out, &format!("_{k:04}"), "csv");
            write_file(&f, &point_file(path, pt)?.to_text())?;
            outputs.push(f);
        }
    }
    Ok(outputs)
}

pub fn continuation(a: &ContinueArgs) -> CliResult<Report> {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("path.csv"));
    match run_continuation(a) {
        Ok(path) => {
            let outputs = write_path(&path, &out, a.dump_fields)?;
            let last = path.last().expect("paths are nonempty");
            let worst = path.points.iter().map(|p| p.residual).fold(0.0, f64::max);
            let json = json!({
                "output": out.display().to_string(),
                "points": path.len(),
                "theta": path.theta,
                "beta": path.beta,
                "gamma_end": last.gamma,
                "omega_end": last.omega,
                "max_residual": worst,
            });
            let text = format!(
                "{} points from gamma = {} to {}, omega_end = {:.9} -> {}",
                path.len(),
                path.theta,
                last.gamma,
                last.omega,
                out.display()
            );
            Ok(Report { json, text, outputs })
        }
        Err(CliError::Solver(Error::StepUnderflow { gamma, points, partial })) => {
            write_path(&partial, &out, a.dump_fields)?;
            warn!("partial path with {points} points written to {}", out.display());
            Err(CliError::Solver(Error::StepUnderflow { gamma, points, partial }))
        }
        Err(e) => Err(e),
    }
}

/// `STEM:K` -> (`STEM`, K).
fn parse_point_spec(spec: &str) -> Option<(PathBuf, usize)> {
    let (stem, k) = spec.rsplit_once(':')?;
    let k = k.parse().ok()?;
    Some((PathBuf::from(stem), k))
}

fn reconstruct_point(stem: &Path, k: usize) -> CliResult<FieldFile> {
    let dir = dir_of(stem);
    let manifest = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: manifest.clone(),
        source,
    })?;
    let config = value["runs"]["continue"]["config"].clone();
    if config.is_null() {
        return Err(CliError::Usage(format!("{} has no continue run", manifest.display())));
    }
    let a: ContinueArgs = serde_json::from_value(config).map_err(|source| CliError::Json {
        path: manifest.clone(),
        source,
    })?;
    info!("recomputing point {k} from {}", manifest.display());
    let path = run_continuation(&a)?;
    let pt = path.points.get(k).ok_or_else(|| {
        CliError::Usage(format!("path has {} points, no point {k}", path.len()))
    })?;
    point_file(&path, pt)
}

fn point_or_input(a: &EvolveArgs) -> CliResult<(FieldFile, Option<f64>)> {
    match (&a.point, &a.input) {
        (Some(spec), _) => {
            let file = match parse_point_spec(spec) {
                Some((stem, k)) => {
                    let f = sibling(&stem.with_extension("csv"), &format!("_{k:04}"), "csv");
                    if f.exists() {
                        read_field(&f)?
                    } else {
                        reconstruct_point(&stem, k)?
                    }
                }
                None => read_field(Path::new(spec))?,
            };
            let omega = file.extra_f64("omega")?;
            Ok((file, omega))
        }
        (None, Some(input)) => Ok((read_field(input)?, None)),
        (None, None) => Err(CliError::Usage("evolve needs --point or --input".into())),
    }
}

pub fn evolution(a: &EvolveArgs) -> CliResult<Report> {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("traj.csv"));
    let final_out = a.final_out.clone().unwrap_or_else(|| sibling(&out, "_final", "csv"));
    let t_final = a.t_final.unwrap_or(1.0);
    let dt = a.dt.unwrap_or(1e-4);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::BadParameter(format!("time step must be positive, got {dt}")).into());
    }
    let (file, omega) = point_or_input(a)?;
    let gamma = match a.gamma.or(file.extra_f64("gamma")?) {
        Some(g) => g,
        None => file.params.theta,
    };
    let reference = match (omega, a.defocus) {
        (Some(w), false) => Some(ContinuationPoint::new(gamma, w, file.field.clone())),
        _ => None,
    };
    let phase = if a.defocus { defocusing(gamma) } else { gamma };
    let traj = evolve(&file.field, t_final, dt, phase, &file.params, &file.grid, reference.as_ref())?;
    write_file(&out, &traj.to_csv())?;
    write_file(&final_out, &FieldFile::new(file.params, file.grid.clone(), traj.final_field.clone())?.to_text())?;
    let monotone = traj.monotone_decay(1e-12);
    let json = json!({
        "output": out.display().to_string(),
        "final_field": final_out.display().to_string(),
        "gamma": phase,
        "defocus": a.defocus,
        "t_final": t_final,
        "dt": dt,
        "samples": traj.times.len(),
        "initial_norm": traj.norms[0],
        "final_norm": traj.norms[traj.norms.len() - 1],
        "max_drift": traj.max_drift(),
        "monotone_decay": monotone,
    });
    let text = match traj.max_drift() {
        Some(d) => format!("max drift {d:.3e} over t in [0, {t_final}] -> {}", out.display()),
        None => format!(
            "norm {:.9} -> {:.9}, monotone decay {monotone} -> {}",
            traj.norms[0],
            traj.norms[traj.norms.len() - 1],
            out.display()
        ),
    };
    Ok(Report {
        json,
        text,
        outputs: vec![out, final_out],
    })
}

fn read_columns(text: &str, path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut cols = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: not a number: {v}", path.display())))?;
            c.push(v);
        }
    }
    Ok((headers, cols))
}

fn column<'a>(headers: &[String], cols: &'a [Vec<f64>], name: &str) -> Option<&'a [f64]> {
    headers.iter().position(|h| h == name).map(|i| cols[i].as_slice())
}

fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

pub fn plot(a: &PlotArgs) -> CliResult<Report> {
    let input = a
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("plot needs --input".into()))?;
    let out = a.out.clone().unwrap_or_else(|| input.with_extension("svg"));
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{} is empty", input.display())));
    }
    let (kind, panels) = if text.trim_start().starts_with('#') {
        let f = FieldFile::parse(&text)?;
        let r = f.grid.nodes();
        let v = f.field.values();
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let abs: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        (
            "field",
            vec![Panel {
                title: format!("radial profile ({}, N = {})", f.params.domain, f.params.dim),
                xlabel: "r".into(),
                ylabel: "u(r)".into(),
                series: vec![
                    Series::new("|u|", zip(r, &abs)),
                    Series::new("Re u", zip(r, &re)),
                    Series::new("Im u", zip(r, &im)),
                ],
            }],
        )
    } else {
        let (headers, cols) = read_columns(&text, input)?;
        if cols.first().is_none_or(|c| c.is_empty()) {
            return Err(CliError::Usage(format!("{} has no data rows", input.display())));
        }
        if let (Some(g), Some(w)) = (column(&headers, &cols, "gamma"), column(&headers, &cols, "omega")) {
            let mut panels = vec![Panel {
                title: "omega along the branch".into(),
                xlabel: "gamma".into(),
                ylabel: "omega".into(),
                series: vec![Series::new("omega", zip(g, w))],
            }];
            if let Some(res) = column(&headers, &cols, "residual") {
                let logs: Vec<f64> = res.iter().map(|r| r.log10()).collect();
                panels.push(Panel {
                    title: "point residuals".into(),
                    xlabel: "gamma".into(),
                    ylabel: "log10 residual".into(),
                    series: vec![Series::new("residual", zip(g, &logs))],
                });
            }
            ("path", panels)
        } else if let (Some(t), Some(n)) = (column(&headers, &cols, "t"), column(&headers, &cols, "l2norm")) {
            let mut panels = vec![Panel {
                title: "L2 norm in time".into(),
                xlabel: "t".into(),
                ylabel: "||phi||".into(),
                series: vec![Series::new("l2norm", zip(t, n))],
            }];
            if let Some(d) = column(&headers, &cols, "drift").filter(|d| d.iter().any(|x| x.is_finite())) {
                panels.push(Panel {
                    title: "drift from the standing wave".into(),
                    xlabel: "t".into(),
                    ylabel: "drift".into(),
                    series: vec![Series::new("drift", zip(t, d))],
                });
            }
            ("trajectory", panels)
        } else {
            return Err(CliError::Usage(format!(
                "{}: unrecognized columns {}",
                input.display(),
                headers.join(",")
            )));
        }
    };
    write_file(&out, &plot::render(&panels))?;
    Ok(Report {
        json: json!({ "output": out.display().to_string(), "kind": kind, "panels": panels.len() }),
        text: format!("{kind} plot -> {}", out.display()),
        outputs: vec![out],
    })
}

/// Directory that receives the manifest for a command's outputs.
pub fn manifest_dir(outputs: &[PathBuf]) -> PathBuf {
    outputs.first().map(|p| dir_of(p)).unwrap_or_else(|| PathBuf::from("."))
}

pub fn config_value<T: serde::Serialize>(a: &T) -> Value {
    args::to_value(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_specs() {
        assert_eq!(parse_point_spec("path:12"), Some((PathBuf::from("path"), 12)));
        assert_eq!(parse_point_spec("out/run:3"), Some((PathBuf::from("out/run"), 3)));
        assert_eq!(parse_point_spec("path.csv"), None);
        assert_eq!(parse_point_spec("path:x"), None);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("path.csv"), "_0012", "csv"), PathBuf::from("path_0012.csv"));
        assert_eq!(sibling(Path::new("a/traj.csv"), "_final", "csv"), PathBuf::from("a/traj_final.csv"));
    }
}
