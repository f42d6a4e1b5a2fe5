use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use walkability::analytics::{hcluster, pearson_matrix, regress, MIN_PAIRS};
use walkability::features::{
    extract_files, read_feature_table_file, write_clusters_csv, write_events_csv, write_features_csv, ExtractError,
    FeatureTable, Summary,
};
use walkability::ingest::{parse_trip_file, WeatherTable};
use walkability::model::{load_network_file, SidewalkNetwork};
use walkability::report::{fd_scatter, segment_boxes, write_fd_scatter};
use walkability::simulator::{
    campus_network, campus_scenario, fleet, generate, write_fleet, FleetSpec, Manifest, ScenarioSpec, SimError,
};

use crate::config::RunConfig;
use crate::{AnalyzeArgs, ExtractArgs, Mode, ReportArgs, SimulateArgs, ValidateArgs};

/// Exit status 2 for bad usage or unusable inputs, 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Internal(e) => e,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Io(_) => internal(e),
        _ => input(e),
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig, default: &str) -> Result<PathBuf, Failure> {
    let dir = flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(internal)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(internal)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(internal)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(internal)
}

/// Logs named by the inputs, with the manifest they came from if any.
struct Inputs {
    logs: Vec<PathBuf>,
    manifest: Option<(PathBuf, Manifest)>,
}

fn is_pattern(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

fn expand(patterns: &[String]) -> Result<Inputs, Failure> {
    let mut logs = Vec::new();
    let mut manifest = None;
    for p in patterns {
        if is_pattern(p) {
            let paths = glob::glob(p).with_context(|| format!("bad pattern `{p}`")).map_err(input)?;
            for path in paths {
                logs.push(path.map_err(input)?);
            }
            continue;
        }
        let path = PathBuf::from(p);
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(&path)
                .with_context(|| format!("listing {}", path.display()))
                .map_err(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            logs.extend(found);
        } else if path.extension().is_some_and(|x| x == "json") {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(input)?;
            let m: Manifest = serde_json::from_str(&text)
                .with_context(|| format!("{} is not a simulator manifest", path.display()))
                .map_err(input)?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            logs.extend(m.trips.iter().map(|t| base.join(&t.log)));
            manifest = Some((base, m));
        } else {
            logs.push(path);
        }
    }
    Ok(Inputs { logs, manifest })
}

fn load_network(path: &Path) -> Result<SidewalkNetwork, Failure> {
    load_network_file(path)
        .with_context(|| format!("network {}", path.display()))
        .map_err(input)
}

#[derive(Serialize)]
struct InputStatus {
    path: String,
    kept: Option<usize>,
    dropped: Option<usize>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ExtractSummary<'a> {
    #[serde(flatten)]
    summary: &'a Summary,
    inputs: Vec<InputStatus>,
}

pub fn extract(mut cfg: RunConfig, args: ExtractArgs) -> Outcome {
    let patterns = if args.inputs.is_empty() { cfg.inputs.clone() } else { args.inputs.clone() };
    if patterns.is_empty() {
        return Err(input(anyhow!("no inputs")));
    }
    let inputs = expand(&patterns)?;
    if inputs.logs.is_empty() {
        return Err(input(anyhow!("no inputs")));
    }
    args.thresholds.apply(&mut cfg.pipeline).map_err(input)?;

    let from_manifest = |pick: fn(&Manifest) -> Option<&String>| {
        inputs
            .manifest
            .as_ref()
            .and_then(|(base, m)| pick(m).map(|f| base.join(f)))
    };
    let network_path = args
        .network
        .or(cfg.network.clone())
        .or_else(|| from_manifest(|m| Some(&m.network)))
        .ok_or_else(|| input(anyhow!("no network given (use --network)")))?;
    let network = load_network(&network_path)?;
    let weather = match args
        .weather
        .or(cfg.weather.clone())
        .or_else(|| from_manifest(|m| m.weather.as_ref()))
    {
        Some(p) => Some(
            WeatherTable::from_path(&p)
                .with_context(|| format!("weather {}", p.display()))
                .map_err(input)?,
        ),
        None => None,
    };

    let out = out_dir(args.out, &cfg, ".")?;
    let (ds, reports) = extract_files(&inputs.logs, &network, weather.as_ref(), &cfg.pipeline).map_err(|e| match e {
        ExtractError::NoInputs => input(anyhow!("no inputs")),
        e @ ExtractError::NoTraversals(_) => input(e),
    })?;

    let mut w = create(&out.join("features.csv"))?;
    write_features_csv(&ds.records, &mut w).map_err(internal)?;
    w.flush().map_err(internal)?;
    let statuses = reports
        .iter()
        .map(|r| InputStatus {
            path: r.path.display().to_string(),
            kept: r.report.as_ref().map(|x| x.kept),
            dropped: r.report.as_ref().map(|x| x.dropped.len()),
            error: r.error.clone(),
        })
        .collect();
    write_json(
        &out.join("summary.json"),
        &ExtractSummary {
            summary: &ds.summary,
            inputs: statuses,
        },
    )?;
    if args.dump_events {
        let mut w = create(&out.join("events.csv"))?;
        write_events_csv(&ds.events, &mut w).map_err(internal)?;
        let mut w = create(&out.join("clusters.csv"))?;
        write_clusters_csv(&ds.summary.segments, &mut w).map_err(internal)?;
    }
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} traversals from {} trips ({} unreadable) -> {}",
        ds.records.len(),
        ds.summary.trips,
        failed,
        out.join("features.csv").display()
    );
    Ok(())
}

fn read_table(path: &Path) -> Result<FeatureTable, Failure> {
    read_feature_table_file(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)
}

#[derive(Serialize)]
struct CorrelationReport {
    rows: usize,
    min_pairs: usize,
    #[serde(flatten)]
    matrix: walkability::analytics::CorrelationMatrix,
}

pub fn analyze(mut cfg: RunConfig, args: AnalyzeArgs) -> Outcome {
    let table = read_table(&args.features)?;
    if table.n_rows() < 3 {
        return Err(input(anyhow!("{} rows in {}, need at least 3", table.n_rows(), args.features.display())));
    }
    let out = out_dir(args.out, &cfg, ".")?;
    match args.mode {
        Mode::Correlate => {
            let mut features = if args.columns.is_empty() { cfg.correlate.features.clone() } else { args.columns };
            if features.is_empty() {
                features = table.matrix.columns().to_vec();
            }
            let names: Vec<&str> = features.iter().map(String::as_str).collect();
            let matrix = pearson_matrix(&table.matrix, &names).map_err(input)?;
            let path = out.join("correlation.json");
            write_json(
                &path,
                &CorrelationReport {
                    rows: table.n_rows(),
                    min_pairs: MIN_PAIRS,
                    matrix,
                },
            )?;
            println!("{}", path.display());
        }
        Mode::Cluster => {
            if !args.columns.is_empty() {
                cfg.cluster.features = args.columns;
            }
            args.cluster.apply(&mut cfg.cluster).map_err(input)?;
            let result = hcluster(&table.matrix, &cfg.cluster).map_err(input)?;
            let path = out.join("clusters.json");
            write_json(&path, &result)?;
            let mut w = csv::Writer::from_writer(create(&out.join("assignments.csv"))?);
            w.write_record(["row", "trip_id", "segment_id", "cluster"]).map_err(internal)?;
            for (i, a) in result.assignments.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    table.trip_ids[i].clone(),
                    table.segment_ids[i].clone(),
                    a.map(|c| c.to_string()).unwrap_or_default(),
                ])
                .map_err(internal)?;
            }
            w.flush().map_err(internal)?;
            println!("{} (sizes {:?})", path.display(), result.sizes);
        }
        Mode::Regress => {
            let r = &mut cfg.regression;
            if let Some(resp) = args.response {
                r.response = resp;
            }
            if !args.predictors.is_empty() {
                r.predictors = args.predictors;
            }
            if let Some(logs) = args.log_columns {
                r.log_columns = logs.into_iter().filter(|s| !s.is_empty()).collect();
            }
            if let Some(t) = args.threshold {
                if !(0.0..=1.0).contains(&t) {
                    return Err(input(anyhow!("threshold must lie in [0, 1]")));
                }
                r.threshold = t;
            }
            let report = regress(&table.matrix, r).map_err(input)?;
            let path = out.join("regression.json");
            write_json(&path, &report)?;
            println!(
                "{} (R^2 full {:.3}, reduced {:.3})",
                path.display(),
                report.full.r_squared,
                report.reduced.r_squared
            );
        }
    }
    Ok(())
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))
        .map_err(input)?;
    serde_json::from_str(&text)
        .map_err(SimError::Parse)
        .map_err(sim_failure)
}

/// Network for a scenario: explicit path, else the scenario's own
/// (relative to the scenario file), else the built-in campus.
fn scenario_network(
    explicit: Option<PathBuf>,
    spec: &ScenarioSpec,
    scenario_path: Option<&Path>,
) -> Result<SidewalkNetwork, Failure> {
    if let Some(p) = explicit {
        return load_network(&p);
    }
    match &spec.network {
        Some(rel) => {
            let base = scenario_path.and_then(Path::parent).unwrap_or(Path::new("."));
            load_network(&base.join(rel))
        }
        None => Ok(campus_network()),
    }
}

pub fn simulate(cfg: RunConfig, args: SimulateArgs) -> Outcome {
    let mut spec = match &args.scenario {
        Some(p) => load_scenario(p)?,
        None => campus_scenario(),
    };
    let network = scenario_network(args.network.or(cfg.network.clone()), &spec, args.scenario.as_deref())?;
    spec.validate(&network).map_err(sim_failure)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(spec.seed);
    let outputs = match args.fleet {
        Some(0) => return Err(input(anyhow!("--fleet must be at least 1"))),
        Some(n) => {
            let fs = FleetSpec {
                scenarios: vec![spec],
                trips: n,
                variation: cfg.fleet.clone(),
                seed,
            };
            fleet(&fs, &network).map_err(sim_failure)?
        }
        None => {
            spec.seed = seed;
            vec![generate(&spec, &network).map_err(sim_failure)?]
        }
    };
    let out = out_dir(args.out, &cfg, "sim")?;
    let manifest = write_fleet(&out, &outputs, &network, seed).map_err(sim_failure)?;
    println!("{}", out.join("manifest.json").display());
    log::info!("{} trips written", manifest.trips.len());
    Ok(())
}

pub fn report(cfg: RunConfig, args: ReportArgs) -> Outcome {
    let table = read_table(&args.features)?;
    let out = out_dir(args.out, &cfg, ".")?;
    let points = fd_scatter(&table);
    let mut w = create(&out.join("fd_scatter.csv"))?;
    write_fd_scatter(&points, &mut w).map_err(internal)?;
    w.flush().map_err(internal)?;
    write_json(&out.join("segment_boxes.json"), &segment_boxes(&table))?;
    println!("{} scatter points, {} rows -> {}", points.len(), table.n_rows(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct Check {
    kind: &'static str,
    path: String,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn validate(cfg: RunConfig, args: ValidateArgs) -> Outcome {
    let patterns = if args.inputs.is_empty() { cfg.inputs.clone() } else { args.inputs };
    let network_path = args.network.or(cfg.network);
    if patterns.is_empty() && network_path.is_none() && args.scenario.is_none() {
        return Err(input(anyhow!("no inputs")));
    }
    let mut checks = Vec::new();
    let mut network = None;
    if let Some(p) = &network_path {
        let r = load_network_file(p);
        checks.push(Check {
            kind: "network",
            path: p.display().to_string(),
            ok: r.is_ok(),
            detail: r.as_ref().ok().map(|n| serde_json::json!({ "segments": n.len() })),
            error: r.as_ref().err().map(|e| e.to_string()),
        });
        network = r.ok();
    }
    if let Some(p) = &args.scenario {
        let r = load_scenario(p).and_then(|spec| {
            let net = match &network {
                Some(n) => n.clone(),
                None => scenario_network(None, &spec, Some(p))?,
            };
            spec.validate(&net).map_err(sim_failure)
        });
        checks.push(Check {
            kind: "scenario",
            path: p.display().to_string(),
            ok: r.is_ok(),
            detail: None,
            error: r.err().map(|e| format!("{:#}", e.error())),
        });
    }
    if !patterns.is_empty() {
        for log in expand(&patterns)?.logs {
            let r = parse_trip_file(&log);
            checks.push(Check {
                kind: "log",
                path: log.display().to_string(),
                ok: r.is_ok(),
                detail: r.as_ref().ok().map(|(_, rep)| serde_json::to_value(rep).expect("serializable")),
                error: r.as_ref().err().map(|e| e.to_string()),
            });
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for c in &checks {
        serde_json::to_writer(&mut lock, c).map_err(internal)?;
        writeln!(lock).map_err(internal)?;
    }
    let bad = checks.iter().filter(|c| !c.ok).count();
    if bad > 0 {
        return Err(input(anyhow!("{bad} of {} checks failed", checks.len())));
    }
    Ok(())
}
