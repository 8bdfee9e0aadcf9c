use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use seqdevid_core::capture::{ingest_sessions_with, read_session_manifest_file, CaptureError};
use seqdevid_core::evalstats::{
    compare_architectures, render_boxplot_svg, render_markdown, render_quartile_csv, report_json, run_experiment,
    ComparisonReport, StatsError,
};
use seqdevid_core::exec::Execution;
use seqdevid_core::features::{
    build_dataset, load_dataset, save_dataset, FeatureError, FeatureManifest, LabelCodec, SessionMatrix,
};
use seqdevid_core::models::{build_model, evaluate, train_with, Architecture, ModelError, TrainConfig, TrainedModel};

use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Runtime(_) => 3,
        }
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            Self::Usage(e) | Self::Data(e) | Self::Runtime(e) => e,
        }
    }
}

impl From<CaptureError> for CliError {
    fn from(e: CaptureError) -> Self {
        Self::Data(e.into())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        Self::Data(e.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ShapeMismatch { .. }
            | ModelError::ClassTooSmall { .. }
            | ModelError::EmptyTestSet
            | ModelError::Feature(_) => Self::Data(e.into()),
            ModelError::InvalidSpec(_) | ModelError::InvalidConfig(_) => Self::Usage(e.into()),
            _ => Self::Runtime(e.into()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Model(m) => m.into(),
            other => Self::Runtime(other.into()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(anyhow!(e).context(format!("writing {}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
}

fn load_config(path: &Path, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path).map_err(CliError::Usage)?;
    if let Some(out) = &o.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(r) = o.repeats {
        cfg.repeats = r;
    }
    Ok(cfg)
}

/// Run `f` with the requested concurrency.
fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce(Execution) -> R + Send) -> Result<R, CliError> {
    match jobs {
        Some(1) => Ok(f(Execution::Sequential)),
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.into()))?;
            Ok(pool.install(|| f(Execution::Parallel)))
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --jobs ignored");
            Ok(f(Execution::Sequential))
        }
        None => Ok(f(Execution::default())),
    }
}

struct Loaded {
    data: Vec<SessionMatrix>,
    codec: LabelCodec,
    seq_len: usize,
    features: usize,
}

fn extract_from_captures(cfg: &ExperimentConfig, exec: Execution) -> Result<Loaded, CliError> {
    let src = cfg
        .captures
        .as_ref()
        .ok_or_else(|| CliError::Usage(anyhow!("config has no `captures` source")))?;
    let manifest = FeatureManifest::resolve(&src.features)?;
    let rows = read_session_manifest_file(&src.sessions)?;
    let sessions = ingest_sessions_with(&rows, &src.root, exec)?;
    let (data, codec) = build_dataset(&sessions, &manifest, exec)?;
    Ok(Loaded {
        data,
        codec,
        seq_len: manifest.seq_len,
        features: manifest.feature_count(),
    })
}

fn load_data(cfg: &ExperimentConfig, exec: Execution) -> Result<Loaded, CliError> {
    match &cfg.dataset {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Data(anyhow!("dataset {} not found", path.display())));
            }
            let (data, features) =
                load_dataset(path, None).map_err(|e| CliError::Data(anyhow!(e).context(path.display().to_string())))?;
            let codec = LabelCodec::from_dataset(&data)?;
            let seq_len = data.first().map_or(0, SessionMatrix::seq_len);
            Ok(Loaded {
                data,
                codec,
                seq_len,
                features,
            })
        }
        None => extract_from_captures(cfg, exec),
    }
}

fn require_data(l: &Loaded) -> Result<(), CliError> {
    if l.data.is_empty() {
        return Err(CliError::Data(anyhow!("dataset has no sessions")));
    }
    Ok(())
}

pub fn extract(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    if cfg.captures.is_none() {
        return Err(CliError::Usage(anyhow!(
            "`extract` needs a `captures` source in the config"
        )));
    }
    let loaded = with_jobs(o.jobs, |exec| extract_from_captures(&cfg, exec))??;
    let out = cfg.output.join("dataset.csv");
    std::fs::create_dir_all(&cfg.output).map_err(|e| io_err(&cfg.output, e))?;
    save_dataset(&out, &loaded.data, loaded.features)?;

    let mut per_device: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &loaded.data {
        *per_device.entry(m.device_name.as_str()).or_default() += 1;
    }
    let mut summary = format!(
        "{} sessions, {}x{}\n",
        loaded.data.len(),
        loaded.seq_len,
        loaded.features
    );
    for (device, n) in &per_device {
        writeln!(summary, "  {device}: {n}").unwrap();
    }
    writeln!(summary, "dataset written to {}", out.display()).unwrap();
    print!("{summary}");
    Ok(())
}

pub fn train(config: &Path, o: &Overrides, arch: &str) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    let arch: Architecture = arch.parse().map_err(|e: ModelError| CliError::Usage(e.into()))?;
    let (trained, accuracy) = with_jobs(o.jobs, |exec| -> Result<_, CliError> {
        let loaded = load_data(&cfg, exec)?;
        require_data(&loaded)?;
        let spec = cfg
            .model
            .spec(arch, loaded.seq_len, loaded.features, loaded.codec.class_count());
        let tcfg = TrainConfig {
            seed: cfg.seed,
            ..cfg.train.clone()
        };
        let model = build_model(&spec, cfg.seed)?;
        let trained = train_with(model, &loaded.data, &tcfg, exec)?;
        let accuracy = evaluate(&trained, &trained.split.test_set(&loaded.data))?;
        Ok((trained, accuracy))
    })??;

    let dir = cfg.output.join("models");
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let stem = dir.join(arch.slug());
    trained.save(&stem)?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in trained.history.epoch_loss.iter().enumerate() {
        writeln!(history, "{},{l}", i + 1).unwrap();
    }
    let history_path = dir.join(format!("{}_history.csv", arch.slug()));
    write_file(&history_path, &history)?;
    let (params, sidecar) = TrainedModel::artifact_paths(&stem);
    println!(
        "{arch}: {} epochs, final loss {:.6}, test accuracy {:.4} ({}/{})",
        trained.history.epoch_loss.len(),
        trained.history.epoch_loss.last().copied().unwrap_or(f64::NAN),
        accuracy.accuracy,
        accuracy.correct,
        accuracy.total
    );
    println!("model: {}", params.display());
    println!("metadata: {}", sidecar.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn write_report_artifacts(dir: &Path, report: &ComparisonReport) -> Result<String, CliError> {
    let md = render_markdown(report);
    write_file(&dir.join("report.md"), &md)?;
    write_file(&dir.join("boxplot.svg"), &render_boxplot_svg(report))?;
    write_file(&dir.join("quartiles.csv"), &render_quartile_csv(report))?;
    Ok(md)
}

pub fn compare(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    if cfg.repeats < 2 {
        return Err(CliError::Usage(anyhow!(
            "`compare` needs at least 2 repeats, got {}",
            cfg.repeats
        )));
    }
    let report = with_jobs(o.jobs, |exec| -> Result<_, CliError> {
        let loaded = load_data(&cfg, exec)?;
        require_data(&loaded)?;
        let specs: Vec<_> = cfg
            .architectures
            .iter()
            .map(|&a| {
                cfg.model
                    .spec(a, loaded.seq_len, loaded.features, loaded.codec.class_count())
            })
            .collect();
        let rm = run_experiment(&specs, &loaded.data, &cfg.train, cfg.repeats, cfg.seed, exec)?;
        Ok(compare_architectures(&rm)?)
    })??;
    let json_path = cfg.output.join("report.json");
    write_file(&json_path, &report_json(&report))?;
    let md = write_report_artifacts(&cfg.output, &report)?;
    print!("{md}");
    println!("\nreport written to {}", json_path.display());
    Ok(())
}

pub fn report(config: &Path, o: &Overrides) -> Result<(), CliError> {
    let cfg = load_config(config, o)?;
    let json_path = cfg.output.join("report.json");
    let text = std::fs::read_to_string(&json_path)
        .with_context(|| format!("reading {}", json_path.display()))
        .map_err(CliError::Data)?;
    let report: ComparisonReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", json_path.display()))
        .map_err(CliError::Data)?;
    let md = write_report_artifacts(&cfg.output, &report)?;
    print!("{md}");
    Ok(())
}
