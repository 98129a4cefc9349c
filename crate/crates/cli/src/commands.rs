use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use surgseg::eval::{classify as classify_prepared, k_sweep, prepare, sweep_csv, ClassificationReport, EvalReport};
use surgseg::features::build_all;
use surgseg::io::{read_json, write_atomic, write_json};
use surgseg::knn::{context_for, knn_retrieve, FeatureMask};
use surgseg::segment::{detect_changepoints, detect_per_feature, filter_changepoints, segment as run_segmenter, segment_records};
use surgseg::synth::{generate_dataset, DatasetName, GenerateSpec};
use surgseg::trace::{load_trace, save_trace, ExecutionTrace};
use surgseg::{Error, KChoice, PipelineConfig, Result};

use crate::config::{noise_of, GenFlags, PipelineFlags};

const TRACE_SUFFIX: &str = ".trace.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

/// A dataset is a single trace file or a directory of `*.trace.json` files,
/// loaded in file-name order.
pub fn load_dataset(path: &Path) -> Result<Vec<ExecutionTrace>> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        return Ok(vec![load_trace(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(TRACE_SUFFIX)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("no *{TRACE_SUFFIX} files")),
        ));
    }
    files.iter().map(load_trace).collect()
}

pub fn generate(spec: &str, flags: &GenFlags, out: &Path) -> Result<()> {
    let mut spec: GenerateSpec = match spec.parse::<DatasetName>() {
        Ok(name) => GenerateSpec::new(name, 0),
        Err(_) => read_json(spec)?,
    };
    flags.apply(&mut spec);
    let traces = generate_dataset(&spec)?;
    let spec_json = serde_json::to_string(&spec)?;
    ensure_dir(out)?;
    let single = traces.len() == 1;
    for (i, mut t) in traces.into_iter().enumerate() {
        let name = match t.meta.get("name") {
            Some(n) => n.clone(),
            None if single => spec.name.to_string(),
            None => format!("{}_{i:02}", spec.name),
        };
        t.meta.insert("name".into(), name.clone());
        t.meta.insert("spec".into(), spec_json.clone());
        let path = out.join(format!("{name}{TRACE_SUFFIX}"));
        save_trace(&t, &path)?;
        println!("{}", path.display());
    }
    if let Some(n) = noise_of(&spec) {
        eprintln!("noise: beta={} lambda={} seed={}", n.beta, n.lambda, n.seed);
    }
    Ok(())
}

/// Sidecar written next to every output, recording what produced it.
fn provenance(command: &str, input: &Path, cfg: &PipelineConfig) -> serde_json::Value {
    json!({ "command": command, "input": input.display().to_string(), "config": cfg })
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

pub fn segment(trace: &Path, flags: &PipelineFlags, out: &Path, debug: Option<&Path>) -> Result<()> {
    let cfg = flags.resolve()?;
    let t = load_trace(trace)?;
    let segs = run_segmenter(&t, &cfg.segmenter)?;
    ensure_parent(out)?;
    write_json(out, &segment_records(&segs))?;
    write_json(sidecar(out), &provenance("segment", trace, &cfg))?;
    if let Some(d) = debug {
        let per_feature = detect_per_feature(&t, &cfg.segmenter)?;
        let candidates = detect_changepoints(&t, &cfg.segmenter)?;
        let kept = filter_changepoints(&t, &candidates, &cfg.segmenter);
        ensure_parent(d)?;
        write_json(d, &json!({ "per_feature_peaks": per_feature, "candidates": candidates, "kept": kept }))?;
    }
    println!("{} segments", segs.len());
    Ok(())
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    config: &'a PipelineConfig,
    #[serde(flatten)]
    report: &'a ClassificationReport,
}

/// Retrieval without annotations: k and every query come from the config.
fn classify_unannotated(traces: &[ExecutionTrace], cfg: &PipelineConfig) -> Result<ClassificationReport> {
    let KChoice::Fixed(k) = cfg.k else {
        return Err(Error::InvalidConfig("unannotated data needs a fixed k".into()));
    };
    if cfg.exemplars.is_empty() {
        return Err(Error::InvalidConfig("unannotated data needs query exemplars in the config".into()));
    }
    let mut features = Vec::new();
    for t in traces {
        let segs = run_segmenter(t, &cfg.segmenter)?;
        features.extend(build_all(t, &segs, &cfg.features)?);
    }
    let ctx = context_for(&features, cfg.context, k)?;
    let queries = cfg
        .exemplars
        .iter()
        .map(|(a, &id)| {
            if id >= features.len() {
                return Err(Error::UnknownSegment(id));
            }
            let mask = cfg.masks.get(a).copied().unwrap_or(FeatureMask::FULL);
            knn_retrieve(id, &features, k, &ctx, mask)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationReport { k, queries })
}

pub fn classify(dataset: &Path, flags: &PipelineFlags, out: &Path) -> Result<()> {
    let cfg = flags.resolve()?;
    let traces = load_dataset(dataset)?;
    let annotated = traces.iter().all(|t| !t.annotations().is_empty());
    let report = if annotated {
        classify_prepared(&prepare(&traces, &cfg)?, &cfg, None)?.1
    } else {
        classify_unannotated(&traces, &cfg)?
    };
    ensure_parent(out)?;
    write_json(out, &ClassifyOutput { config: &cfg, report: &report })?;
    println!("k = {}, {} queries", report.k, report.queries.len());
    Ok(())
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    config: &'a PipelineConfig,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn write_reports(
    command: &str,
    dataset: &Path,
    traces: &[ExecutionTrace],
    cfg: &PipelineConfig,
    sweep: Option<(usize, usize, usize)>,
    out: &Path,
    with_intermediates: bool,
) -> Result<()> {
    let data = prepare(traces, cfg)?;
    let (report, retrieval) = classify_prepared(&data, cfg, None)?;
    ensure_dir(out)?;
    write_json(out.join("report.json"), &ReportOutput { config: cfg, report: &report })?;
    write_atomic(out.join("report.csv"), report.to_csv().as_bytes())?;
    write_json(out.join("provenance.json"), &provenance(command, dataset, cfg))?;

    if with_intermediates {
        let segments: Vec<_> = traces
            .iter()
            .enumerate()
            .map(|(ti, t)| {
                let segs: Vec<_> = data.segments.iter().filter(|(i, _)| *i == ti).map(|(_, s)| *s).collect();
                json!({ "trace": t.name(), "segments": segment_records(&segs) })
            })
            .collect();
        write_json(out.join("segments.json"), &segments)?;
        write_json(out.join("features.json"), &data.features)?;
        write_json(out.join("classification.json"), &ClassifyOutput { config: cfg, report: &retrieval })?;
    }

    if let Some((start, end, step)) = sweep {
        let rows = k_sweep(&data, cfg, (start..=end).step_by(step))?;
        write_atomic(out.join("k_sweep.csv"), sweep_csv(&rows).as_bytes())?;
        write_json(out.join("k_sweep.json"), &rows)?;
    }
    println!("{}", report.average_row());
    Ok(())
}

pub fn evaluate(dataset: &Path, flags: &PipelineFlags, sweep: Option<(usize, usize, usize)>, out: &Path) -> Result<()> {
    let cfg = flags.resolve()?;
    let traces = load_dataset(dataset)?;
    write_reports("evaluate", dataset, &traces, &cfg, sweep, out, false)
}

pub fn pipeline(dataset: &Path, flags: &PipelineFlags, sweep: Option<(usize, usize, usize)>, out: &Path) -> Result<()> {
    let cfg = flags.resolve()?;
    let traces = load_dataset(dataset)?;
    write_reports("pipeline", dataset, &traces, &cfg, sweep, out, true)
}
