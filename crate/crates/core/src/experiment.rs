//! Runs a configured experiment and writes the report directory:
//!
//! ```text
//! verdicts.json
//! traces/probe_NNN.csv  resonances_NNN.csv  sweep_NNN.csv  quadform_NNN.csv
//! plots/point_NNN.svg
//! ```
//!
//! `NNN` is the index of the point in `lambda_grid`. Points are analysed in
//! parallel; everything written depends only on the config.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classify::{analyze_point, PointAnalysis, PointVerdict, Status, TraceRef};
use crate::config::ExperimentConfig;
use crate::error::{Result, SpectralError};
use crate::plot::emit_plots;

pub const VERDICTS_FILE: &str = "verdicts.json";
pub const TRACES_DIR: &str = "traces";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone)]
pub struct Report {
    pub output_dir: PathBuf,
    pub verdicts: Vec<PointVerdict>,
    /// Notes from plotting (skipped panels and the like).
    pub plot_notes: Vec<String>,
}

impl Report {
    pub fn any_inconclusive(&self) -> bool {
        self.verdicts
            .iter()
            .any(|v| v.status == Status::Inconclusive)
    }
}

/// Classifies every grid point on a pool of `jobs` threads (all cores when
/// `None`) and writes the report.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SpectralError::InvalidArgument(format!("thread pool: {e}")))?;
    let analyses: Vec<PointAnalysis> = pool.install(|| {
        cfg.lambda_grid
            .par_iter()
            .map(|&lambda| analyze_point(&cfg.model, lambda, cfg))
            .collect()
    });

    let out = &cfg.output_dir;
    fs::create_dir_all(out.join(TRACES_DIR))?;
    let mut verdicts = Vec::with_capacity(analyses.len());
    for (i, analysis) in analyses.into_iter().enumerate() {
        verdicts.push(write_traces(out, i, analysis, cfg)?);
    }
    let json = serde_json::to_string_pretty(&verdicts)
        .map_err(|e| SpectralError::Io(format!("serializing verdicts: {e}")))?;
    fs::write(out.join(VERDICTS_FILE), json + "\n")?;
    let plot_notes = emit_plots(out)?;
    Ok(Report {
        output_dir: out.clone(),
        verdicts,
        plot_notes,
    })
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(
        out.join(TRACES_DIR).join(name),
    )?))
}

fn write_traces(
    out: &Path,
    i: usize,
    a: PointAnalysis,
    cfg: &ExperimentConfig,
) -> Result<PointVerdict> {
    let mut verdict = a.verdict;
    let mut add = |kind: &str, name: String| {
        verdict.traces.push(TraceRef {
            kind: kind.to_string(),
            file: format!("{TRACES_DIR}/{name}"),
        })
    };
    if let Some(probe) = &a.probe {
        let name = format!("probe_{i:03}.csv");
        probe.write_csv(create(out, &name)?, &cfg.r_grid)?;
        add("probe", name);
    }
    if let Some(track) = &a.track {
        let name = format!("resonances_{i:03}.csv");
        track.write_csv(create(out, &name)?)?;
        add("resonances", name);
    }
    if let Some(sweep) = &a.sweep {
        let name = format!("sweep_{i:03}.csv");
        sweep.write_csv(create(out, &name)?)?;
        add("sweep", name);
    }
    if let (Some(probe), false) = (&a.probe, a.quadratic_forms.is_empty()) {
        let name = format!("quadform_{i:03}.csv");
        let mut w = csv::Writer::from_writer(create(out, &name)?);
        w.write_record(["y", "psi", "re", "im"])?;
        for (p, values) in a.quadratic_forms.iter().enumerate() {
            for (y, q) in probe.offsets().iter().zip(values) {
                w.write_record([
                    y.to_string(),
                    p.to_string(),
                    q.re.to_string(),
                    q.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        add("quadratic_form", name);
    }
    Ok(verdict)
}

/// Reads `verdicts.json` back from a report directory.
pub fn load_verdicts(dir: &Path) -> Result<Vec<PointVerdict>> {
    let text = fs::read_to_string(dir.join(VERDICTS_FILE))?;
    serde_json::from_str(&text).map_err(|e| SpectralError::ConfigParse {
        location: format!("{} line {} column {}", VERDICTS_FILE, e.line(), e.column()),
        message: e.to_string(),
    })
}
