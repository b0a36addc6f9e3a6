use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fdlpv_core::analysis::{check_performance, check_stability, Certificate, CertificateStatus};
use fdlpv_core::config::{PipelineConfig, PlantSource};
use fdlpv_core::obf::basis_selection_iterate;
use fdlpv_core::realization::{build_lfr, simulate_closed_loop, step_metrics, StepMetrics};
use fdlpv_core::workflow::{self, CHANNEL_G, CHANNEL_S, CHANNEL_SG};
use fdlpv_core::{
    assemble_closed_loop, bisect_gamma, evaluate_factors, load_dataset, save_dataset, Channel, ClosedLoopFactorData,
    Error, FrfDataset, Result,
};
use serde::Serialize;
use serde_json::json;

use crate::files::{self, ControllerFile, Outputs};

/// Result of a successful command: a JSON summary for stdout and a flag
/// telling whether a certificate was refuted or inconclusive.
pub struct Outcome {
    pub summary: serde_json::Value,
    pub rejected: bool,
}

fn accepted(summary: serde_json::Value) -> Outcome {
    Outcome { summary, rejected: false }
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("output directory {} does not exist", dir.display())))
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

/// Hidden sibling with the same extension, so the dataset format is kept.
fn staging_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".staging-{name}"))
}

fn path_list(out: &Outputs) -> Vec<String> {
    out.paths().iter().map(|p| p.display().to_string()).collect()
}

fn load_dataset_for(cfg: &PipelineConfig) -> Result<FrfDataset> {
    let path = cfg.dataset_path();
    require_file(&path, "dataset")?;
    let ds = load_dataset(&path)?;
    for ch in [CHANNEL_S, CHANNEL_SG] {
        if ds.channel_index(ch).is_none() {
            return Err(Error::Config(format!("dataset {} has no {ch} channel", path.display())));
        }
    }
    Ok(ds)
}

fn load_controller(cfg: &PipelineConfig, path: Option<&Path>) -> Result<(PathBuf, ControllerFile)> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| cfg.controller_path());
    require_file(&path, "controller file")?;
    let file = ControllerFile::load(&path)?;
    Ok((path, file))
}

pub fn generate(cfg: &PipelineConfig) -> Result<Outcome> {
    if cfg.plant.source != PlantSource::Surrogate {
        return Err(Error::Config("generate needs plant.source = \"surrogate\"".into()));
    }
    let dir = &cfg.paths.output_dir;
    require_dir(dir)?;
    let model = cfg.model()?;
    let fs = model.sample_rate();
    let k0 = cfg.controller0(fs)?;
    let sched = cfg.scheduling_grid(model.range())?;
    let grid = cfg.frequency_grid(fs)?;
    let opts = cfg.estimation_options();
    let experiments = workflow::run_experiments(&model, &k0, &sched, &opts)?;
    let ds = workflow::dataset_from_experiments(&experiments, &sched, &grid, &opts)?;

    let mut out = Outputs::default();
    for (exp, &p) in experiments.iter().zip(sched.points()) {
        out.add(dir.join(files::records_name(p)), files::records_csv(exp)?);
    }
    let dataset_path = cfg.dataset_path();
    let mut errors = Vec::new();
    for (i, &p) in sched.points().iter().enumerate() {
        let truth = model.frozen_frf(p, &grid)?;
        let est = ds.get(i, CHANNEL_G)?;
        errors.push(json!({ "p": p, "max_relative_error": est.max_relative_error(&truth, |w| (0.01 * PI..=0.8 * PI).contains(&w)) }));
    }
    let staging = staging_path(&dataset_path);
    save_dataset(&ds, &staging)?;
    if let Err(e) = out.commit() {
        let _ = std::fs::remove_file(&staging);
        return Err(e);
    }
    std::fs::rename(&staging, &dataset_path).map_err(|e| files::io(&dataset_path, e))?;
    Ok(accepted(json!({
        "command": "generate",
        "points": sched.points(),
        "frequencies": grid.len(),
        "samples": opts.n_samples,
        "plant_error": errors,
        "dataset": dataset_path.display().to_string(),
    })))
}

pub fn estimate(cfg: &PipelineConfig) -> Result<Outcome> {
    let dir = &cfg.paths.output_dir;
    require_dir(dir)?;
    let model = cfg.model()?;
    let sched = cfg.scheduling_grid(model.range())?;
    let paths: Vec<PathBuf> = sched.points().iter().map(|&p| dir.join(files::records_name(p))).collect();
    for p in &paths {
        require_file(p, "record file")?;
    }
    let experiments = paths.iter().map(|p| files::load_records(p)).collect::<Result<Vec<_>>>()?;
    let fs = experiments[0].d.sample_rate();
    let grid = cfg.frequency_grid(fs)?;
    let mut opts = cfg.estimation_options();
    opts.n_samples = experiments[0].d.len();
    let ds = workflow::dataset_from_experiments(&experiments, &sched, &grid, &opts)?;
    let dataset_path = cfg.dataset_path();
    let staging = staging_path(&dataset_path);
    save_dataset(&ds, &staging)?;
    std::fs::rename(&staging, &dataset_path).map_err(|e| files::io(&dataset_path, e))?;
    Ok(accepted(json!({
        "command": "estimate",
        "points": sched.points(),
        "frequencies": grid.len(),
        "samples": opts.n_samples,
        "dataset": dataset_path.display().to_string(),
    })))
}

pub fn synthesize(cfg: &PipelineConfig, lti: bool) -> Result<Outcome> {
    let dir = &cfg.paths.output_dir;
    require_dir(dir)?;
    let ds = load_dataset_for(cfg)?;
    let model = cfg.model()?;
    let fs = model.sample_rate();
    let k0 = cfg.controller0(fs)?;
    let weights = cfg.weights(fs)?;
    let mut design_cfg = cfg.clone();
    design_cfg.synthesis.lti |= lti;
    let design = design_cfg.design_options();
    let problem = workflow::build_problem(&ds, &k0, &weights, &design)?;
    let result = if cfg.synthesis.basis_rounds > 0 {
        basis_selection_iterate(&problem, cfg.synthesis.basis_rounds)?.1
    } else {
        bisect_gamma(&problem)?
    };

    let controller = ControllerFile {
        sample_rate: fs,
        gamma: result.gamma,
        lti: design_cfg.synthesis.lti,
        params: result.params.clone(),
    };
    let mut out = Outputs::default();
    out.add(dir.join("synthesis.json"), files::to_json(&result)?);
    out.add(cfg.controller_path(), files::to_json(&controller)?);
    let written = path_list(&out);
    out.commit()?;
    Ok(accepted(json!({
        "command": "synthesize",
        "mode": if controller.lti { "lti" } else { "lpv" },
        "gamma": result.gamma,
        "achieved_gamma": result.achieved_gamma,
        "min_margin": result.min_margin,
        "bisection_iterations": result.telemetry.bisection_iterations,
        "files": written,
    })))
}

fn closed_loop_data(
    cfg: &PipelineConfig,
    ds: &FrfDataset,
    controller: &ControllerFile,
) -> Result<Vec<ClosedLoopFactorData>> {
    let k0 = cfg.controller0(controller.sample_rate)?;
    let pairs = workflow::coprime_pairs(ds, &k0, cfg.synthesis.bezout_tolerance)?;
    ds.scheduling()
        .points()
        .iter()
        .zip(&pairs)
        .map(|(&p, pair)| {
            let (nk, dk) = evaluate_factors(&controller.params, p, ds.grid())?;
            assemble_closed_loop(pair, &nk, &dk)
        })
        .collect()
}

#[derive(Serialize)]
struct CertificateFile {
    gamma: f64,
    status: CertificateStatus,
    stability: Certificate,
    performance: Certificate,
}

pub fn analyze(cfg: &PipelineConfig, controller: Option<&Path>, gamma: Option<f64>) -> Result<Outcome> {
    let dir = &cfg.paths.output_dir;
    require_dir(dir)?;
    let (_, ctrl) = load_controller(cfg, controller)?;
    let ds = load_dataset_for(cfg)?;
    let gamma = gamma.unwrap_or(ctrl.gamma);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let data = closed_loop_data(cfg, &ds, &ctrl)?;
    let weights = cfg.weights(ctrl.sample_rate)?.eval(ds.grid())?;
    let opts = cfg.analysis_options();
    let dp: Vec<_> = data.iter().map(|d| d.d_p.clone()).collect();
    let stability = check_stability(&dp, ds.grid(), &opts)?;
    let performance = check_performance(&data, &weights, gamma, ds.grid(), &opts)?;
    let status = match (stability.status, performance.status) {
        (CertificateStatus::Certified, CertificateStatus::Certified) => CertificateStatus::Certified,
        (CertificateStatus::Refuted, _) | (_, CertificateStatus::Refuted) => CertificateStatus::Refuted,
        _ => CertificateStatus::Inconclusive,
    };
    let file = CertificateFile { gamma, status, stability, performance };
    let mut out = Outputs::default();
    out.add(dir.join("certificate.json"), files::to_json(&file)?);
    let written = path_list(&out);
    out.commit()?;
    Ok(Outcome {
        summary: json!({
            "command": "analyze",
            "gamma": gamma,
            "status": status,
            "stability": file.stability.status,
            "performance": file.performance.status,
            "min_margin": file.performance.min_margin(),
            "files": written,
        }),
        rejected: status != CertificateStatus::Certified,
    })
}

#[derive(Serialize)]
struct FrozenMetrics {
    p: f64,
    #[serde(flatten)]
    metrics: StepMetrics,
}

#[derive(Serialize)]
struct MetricsFile {
    frozen: Vec<FrozenMetrics>,
    varying: StepMetrics,
}

pub fn simulate(cfg: &PipelineConfig, controller: Option<&Path>) -> Result<Outcome> {
    let dir = &cfg.paths.output_dir;
    require_dir(dir)?;
    let (_, ctrl) = load_controller(cfg, controller)?;
    let model = cfg.model()?;
    let fs = model.sample_rate();
    if (ctrl.sample_rate - fs).abs() > 1e-9 * fs {
        return Err(Error::Config(format!(
            "controller sample rate {} differs from the plant's {fs}",
            ctrl.sample_rate
        )));
    }
    let (lo, hi) = model.range();
    if let Some(p) = cfg.scenario.frozen_points.iter().find(|p| !(**p >= lo && **p <= hi)) {
        return Err(Error::Config(format!("scenario.frozen_points entry {p} lies outside [{lo}, {hi}]")));
    }
    let lfr = build_lfr(&ctrl.params)?;
    let mut out = Outputs::default();
    let mut frozen = Vec::new();
    for &p in &cfg.scenario.frozen_points {
        let sig = cfg.scenario.frozen_signals(fs, p)?;
        let tr = simulate_closed_loop(&model, &lfr, &sig.reference, &sig.scheduling, &sig.disturbance)?;
        frozen.push(FrozenMetrics { p, metrics: step_metrics(&tr)? });
        out.add(dir.join(format!("trace_frozen_p{p}.csv")), files::trace_csv(&tr)?);
    }
    let sig = cfg.scenario.signals(fs, model.range())?;
    let tr = simulate_closed_loop(&model, &lfr, &sig.reference, &sig.scheduling, &sig.disturbance)?;
    let metrics = MetricsFile { frozen, varying: step_metrics(&tr)? };
    out.add(dir.join("trace_varying.csv"), files::trace_csv(&tr)?);
    out.add(dir.join("metrics.json"), files::to_json(&metrics)?);
    let written = path_list(&out);
    out.commit()?;
    Ok(accepted(json!({ "command": "simulate", "metrics": metrics, "files": written })))
}

pub fn report(cfg: &PipelineConfig, controller: Option<&Path>) -> Result<Outcome> {
    let dir = cfg.paths.output_dir.join("report");
    require_dir(&cfg.paths.output_dir)?;
    let (_, ctrl) = load_controller(cfg, controller)?;
    let ds = load_dataset_for(cfg)?;
    if ds.scheduling().is_empty() || ds.grid().is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let grid = ds.grid();
    let hz: Vec<f64> = grid.omegas().iter().map(|w| w * ctrl.sample_rate / (2.0 * std::f64::consts::PI)).collect();
    let data = closed_loop_data(cfg, &ds, &ctrl)?;
    let weights = cfg.weights(ctrl.sample_rate)?.eval(grid)?;

    let mut out = Outputs::default();
    for (i, &p) in ds.scheduling().points().iter().enumerate() {
        // Estimated frozen responses.
        let chans: Vec<_> = ds.channels().iter().map(|c| ds.get(i, c)).collect::<Result<_>>()?;
        let mut header = vec!["omega".to_string(), "hz".to_string()];
        for c in ds.channels() {
            header.push(format!("{c}_mag"));
            header.push(format!("{c}_phase_deg"));
        }
        let rows = (0..grid.len()).map(|k| {
            let mut row = vec![grid.omegas()[k], hz[k]];
            for r in &chans {
                let v = r.values()[k];
                row.extend([v.norm(), v.arg().to_degrees()]);
            }
            row
        });
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        out.add(dir.join(format!("frf_p{p}.csv")), files::to_csv(&header_refs, rows)?);

        // Closed-loop four-block magnitudes with their weighted bounds gamma / |W|.
        let d = &data[i];
        let rows = (0..grid.len()).map(|k| {
            let mut row = vec![grid.omegas()[k], hz[k]];
            for c in Channel::ALL {
                row.push((d.numerator(c)[k] / d.d_p[k]).norm());
            }
            for c in Channel::ALL {
                let w = weights[c.index()][k].norm();
                row.push(if w > 0.0 { ctrl.gamma / w } else { f64::INFINITY });
            }
            row
        });
        out.add(
            dir.join(format!("fourblock_p{p}.csv")),
            files::to_csv(
                &["omega", "hz", "S", "SG", "KS", "T", "bound_S", "bound_SG", "bound_KS", "bound_T"],
                rows,
            )?,
        );

        let (nk, dk) = evaluate_factors(&ctrl.params, p, grid)?;
        let rows = (0..grid.len()).map(|k| {
            let kv = nk[k] / dk[k];
            vec![grid.omegas()[k], hz[k], kv.norm(), kv.arg().to_degrees()]
        });
        out.add(dir.join(format!("controller_p{p}.csv")), files::to_csv(&["omega", "hz", "K_mag", "K_phase_deg"], rows)?);
    }
    let written = path_list(&out);
    std::fs::create_dir_all(&dir).map_err(|e| files::io(&dir, e))?;
    out.commit()?;
    Ok(accepted(json!({ "command": "report", "files": written })))
}
