use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use kamtorus::certificate::{estimate_global_constants, kam_check, CertificateMode};
use kamtorus::cohomology::DiophantineParams;
use kamtorus::fourier::{grid_point, FourierMap};
use kamtorus::iso::{iterate_kam_iso, FrequencyRay};
use kamtorus::solver::{iterate_kam, KamRun, StepDiagnostics};
use kamtorus::system::{validate_system, Domain};
use kamtorus::{TorusCandidate, VERSION};

use crate::config::{Config, Mode};

/// Whether a command reached its positive outcome (exit 0) or not (exit 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Success,
    Negative,
}

/// Serialized torus, self-describing enough to be certified or plotted later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorusFile {
    pub version: String,
    pub config: Config,
    pub system: String,
    pub epsilon: f64,
    pub mode: Mode,
    pub dio: DiophantineParams,
    pub rho: f64,
    pub status: String,
    pub steps: usize,
    pub final_error: f64,
    pub ray: Option<FrequencyRay>,
    pub target: Option<f64>,
    pub k: FourierMap,
}

impl TorusFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading torus {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing torus {}", path.display()))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_log(path: &Path, log: &[StepDiagnostics]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for step in log {
        serde_json::to_writer(&mut w, step)?;
        w.write_all(b"\n")?;
    }
    Ok(w.flush()?)
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

pub fn solve(cfg: &Config, out: &Path) -> Result<Verdict> {
    let sys = cfg.build_system()?;
    cfg.validate(&sys)?;
    prepare(out)?;
    let dio = cfg.diophantine()?;
    let bands = cfg.band_vec();
    let (run, ray, target, c_final): (KamRun, Option<FrequencyRay>, Option<f64>, Option<f64>) = match cfg.mode {
        Mode::Ordinary => {
            let cand = TorusCandidate::flat(sys, dio, &bands, cfg.rho)?;
            (iterate_kam(&cand, &cfg.schedule)?, None, None, None)
        }
        Mode::Iso => {
            let ray = cfg.ray()?;
            let cand = TorusCandidate::flat(sys, ray.dio(), &bands, cfg.rho)?;
            let c0 = match cfg.target {
                Some(t) => t,
                None => cand.conserved_map(cfg.conserved)?.average()[(0, 0)] + cfg.target_offset,
            };
            let iso = iterate_kam_iso(&cand, &ray, cfg.conserved, c0, &cfg.schedule)?;
            (iso.run, Some(iso.ray), Some(c0), Some(iso.c_final))
        }
    };
    let status = serde_json::to_value(run.status)?.as_str().unwrap_or_default().to_string();
    let torus = TorusFile {
        version: VERSION.into(),
        config: cfg.clone(),
        system: cfg.system.clone(),
        epsilon: cfg.epsilon,
        mode: cfg.mode,
        dio: run.candidate.dio.clone(),
        rho: cfg.rho,
        status: status.clone(),
        steps: run.steps,
        final_error: run.final_error,
        ray,
        target,
        k: run.candidate.k.clone(),
    };
    write_json(&out.join("torus.json"), &torus)?;
    write_log(&out.join("convergence.jsonl"), &run.log)?;
    let summary = json!({
        "version": VERSION,
        "command": "solve",
        "config": cfg,
        "status": status,
        "failure": run.failure.as_ref().map(|e| e.to_string()),
        "steps": run.steps,
        "final_error": run.final_error,
        "frak_c": run.frak_c,
        "bands": run.candidate.bands(),
        "omega": run.candidate.omega(),
        "gamma": run.candidate.dio.gamma,
        "target": target,
        "conserved_final": c_final,
        "contraction_slopes": run.contraction_slopes(1e-13),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("solve: {status} after {} steps, |E| = {:.3e}", run.steps, run.final_error);
    if let Some(e) = &run.failure {
        println!("failure: {e}");
    }
    Ok(if run.converged() { Verdict::Success } else { Verdict::Negative })
}

pub fn certify(torus_path: &Path, cfg: Option<Config>, out: &Path) -> Result<Verdict> {
    let torus = TorusFile::read(torus_path)?;
    let cfg = cfg.unwrap_or_else(|| torus.config.clone());
    let mut sys = kamtorus::builtin_system(&torus.system, torus.epsilon)?;
    if let Some(tight) = &cfg.certificate.domain {
        sys.domain = Domain::around(&torus.k, sys.n(), tight.radius, tight.imag_width);
    }
    let sys = Arc::new(sys);
    cfg.validate(&sys)?;
    prepare(out)?;
    let rho = cfg.certificate.rho.unwrap_or(torus.rho);
    let cand = TorusCandidate::new(sys.clone(), torus.k.clone(), torus.dio.clone(), rho)?;
    let mode = match (cfg.mode, &torus.ray, torus.target) {
        (Mode::Iso, Some(ray), Some(c0)) => CertificateMode::Iso { ray: ray.clone(), c0 },
        (Mode::Iso, _, _) => anyhow::bail!("iso certificate needs a torus produced by an iso solve"),
        (Mode::Ordinary, _, _) => CertificateMode::Ordinary,
    };
    let cc = &cfg.certificate;
    let globals = estimate_global_constants(&sys, cfg.conserved, cc.lattice_density, cc.random_points, cc.seed)?;
    let verdict = match kam_check(&cand, cfg.conserved, &mode, &globals, &cc.options) {
        Ok((report, ledger)) => {
            let file = fs::File::create(out.join("ledger.csv"))?;
            ledger.write_csv(BufWriter::new(file))?;
            let doc = json!({
                "version": VERSION,
                "command": "certify",
                "config": cfg,
                "torus": torus_path.file_name().map(|n| n.to_string_lossy().into_owned()),
                "report": report,
                "globals": globals,
            });
            write_json(&out.join("certificate.json"), &doc)?;
            println!(
                "certify: {} with ratio {:.3e} (dominant {})",
                if report.passed { "PASS" } else { "FAIL" },
                report.ratio,
                report.dominant
            );
            if report.passed {
                Verdict::Success
            } else {
                Verdict::Negative
            }
        }
        Err(e) => {
            let doc = json!({
                "version": VERSION,
                "command": "certify",
                "config": cfg,
                "report": null,
                "failure": e.to_string(),
            });
            write_json(&out.join("certificate.json"), &doc)?;
            println!("certify: FAIL ({e})");
            Verdict::Negative
        }
    };
    Ok(verdict)
}

pub fn validate(cfg: &Config, out: &Path) -> Result<Verdict> {
    let sys = cfg.build_system()?;
    let report = validate_system(&sys, cfg.validation.samples, cfg.validation.seed)?;
    for check in &report.checks {
        println!("{:<12} max defect {:.3e} over {} samples", check.check, check.max_defect, check.samples);
    }
    println!("validate: {}", if report.passed { "PASS" } else { "FAIL" });
    prepare(out)?;
    let doc = json!({ "version": VERSION, "command": "validate", "config": cfg, "report": report });
    write_json(&out.join("validation.json"), &doc)?;
    Ok(if report.passed { Verdict::Success } else { Verdict::Negative })
}

pub fn plotdata(torus_path: &Path, log: Option<PathBuf>, out: &Path) -> Result<Verdict> {
    let torus = TorusFile::read(torus_path)?;
    prepare(out)?;
    let d = torus.k.torus_dim();
    let dim = torus.k.rows();
    let grid = torus.k.grid().to_vec();
    let values = torus.k.eval_grid();
    let mut w = csv::Writer::from_path(out.join("torus_grid.csv"))?;
    let header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).chain((1..=dim).map(|i| format!("z_{i}"))).collect();
    w.write_record(&header)?;
    for p in 0..values.len() {
        let theta = grid_point(&grid, p);
        let z = values.at(p);
        let row: Vec<String> = theta
            .iter()
            .map(|t| t.to_string())
            .chain((0..dim).map(|i| (z[(i, 0)] + if i < d { theta[i] } else { 0.0 }).to_string()))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    let log = log.or_else(|| Some(torus_path.with_file_name("convergence.jsonl")).filter(|p| p.exists()));
    if let Some(path) = log {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut w = csv::Writer::from_path(out.join("errors.csv"))?;
        w.write_record(["iteration", "rho", "delta", "error_before", "error_after", "correction"])?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let s: StepDiagnostics = serde_json::from_str(line)?;
            w.write_record([
                s.iteration.to_string(),
                s.rho.to_string(),
                s.delta.to_string(),
                s.error_before.to_string(),
                s.error_after.to_string(),
                s.correction.to_string(),
            ])?;
        }
        w.flush()?;
    }
    println!("plotdata: {} grid rows written", values.len());
    Ok(Verdict::Success)
}
