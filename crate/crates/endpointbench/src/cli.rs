//! The `epbench` command line.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use endpointbench_core::analysis::{DEFAULT_DELTA, DEFAULT_K, DEFAULT_RESAMPLES};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::{EndpointId, Timestamp};

use crate::api::{self, AppState, Loaded};
use crate::canon::Table;
use crate::error::{Error, Result};
use crate::fixture::{self, Layout};
use crate::pipeline::{self, Clock, PipelineConfig, VirtualClock, WallClock};
use crate::registry_io::RegistryBundle;
use crate::report;
use crate::snapshot_io;
use crate::store::Store;

const SCRIPT_MAP: &str = "\
Script equivalents:
  within_model.py        within-model --model <id>
  fingerprint_by_sku.py  fingerprint-by-sku
  preset_overlap.py      preset-overlap
  factor_ablation.py     factor-ablation --preset <name>
  sensitivity.py         sensitivity
  bootstrap_ci.py        bootstrap --endpoint <id> --preset <name>
  leave_one_out.py       loo --model <id>
  registry_summary.py    registry-summary
  tdp_table.py           tdp-table

Exit status: 0 success, 1 usage error, 2 data error.";

#[derive(Debug, Parser)]
#[command(name = "epbench", version, about = "Endpoint-level LLM inference benchmarking", after_help = SCRIPT_MAP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Where a command reads its registry and snapshot and writes its CSV.
#[derive(Debug, Clone, Args)]
pub struct Inputs {
    /// Snapshot directory (the one holding manifest.json).
    #[arg(long, env = "TA_SNAPSHOT")]
    pub snapshot: Option<PathBuf>,
    /// Registry directory; defaults to `registry/` two levels above the snapshot.
    #[arg(long, env = "TA_REGISTRY")]
    pub registry: Option<PathBuf>,
    /// Directory for the CSV output.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RegistryInputs {
    /// Registry directory.
    #[arg(long, env = "TA_REGISTRY")]
    pub registry: Option<PathBuf>,
    /// Snapshot directory, used only to locate the registry.
    #[arg(long, env = "TA_SNAPSHOT")]
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Min, max and gap of the twelve axes across one model's endpoints.
    WithinModel {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Stability of each within-model gap when one endpoint is dropped.
    Loo {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Mean fidelity and accuracy deltas per precision class.
    FingerprintBySku {
        /// Cohort to report; defaults to the largest one.
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Top-k overlap between the rankings of the six comparison presets.
    PresetOverlap {
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Ranking agreement after dropping each factor in turn.
    FactorAblation {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Rank movement under single-factor weight perturbations.
    Sensitivity {
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Bootstrap confidence interval of one endpoint's composite score.
    Bootstrap {
        /// provider/model/sku/precision/decoding/region
        #[arg(long)]
        endpoint: EndpointId,
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Endpoint and provider counts per provider category.
    RegistrySummary {
        #[command(flatten)]
        inputs: RegistryInputs,
    },
    /// Hardware classes with TDP, default PUE and sharing factor.
    TdpTable {
        #[command(flatten)]
        inputs: RegistryInputs,
    },
    /// Every analysis CSV at once.
    All {
        /// Model for the within-model and leave-one-out reports; defaults to the largest cohort.
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Runs the measurement pipeline over a simulated fleet and exports a snapshot.
    Simulate {
        /// Fleet directory holding registry/, sim/ and pipeline.toml.
        #[arg(long)]
        fleet: PathBuf,
        #[arg(long, default_value_t = 1)]
        days: u32,
        /// Run as fast as possible instead of following the wall clock.
        #[arg(long)]
        virtual_clock: bool,
        /// Output directory for store/ and snapshot/<version>/.
        #[arg(long, default_value = "sim-out")]
        out: PathBuf,
    },
    /// Serves the JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "TA_SNAPSHOT")]
        snapshot: Option<PathBuf>,
        #[arg(long, env = "TA_REGISTRY")]
        registry: Option<PathBuf>,
    },
    /// Rebuilds the calibrated reference fixture.
    Fixture {
        #[arg(long)]
        out: PathBuf,
    },
}

/// `registry/` next to the `snapshot/` directory that holds `snapshot`.
fn registry_near(snapshot: &Path) -> Option<PathBuf> {
    let dir = snapshot.parent()?.parent()?.join("registry");
    dir.is_dir().then_some(dir)
}

fn resolve_registry(registry: Option<&Path>, snapshot: Option<&Path>) -> Result<PathBuf> {
    match (registry, snapshot) {
        (Some(r), _) => Ok(r.to_path_buf()),
        (None, Some(s)) => registry_near(s).ok_or_else(|| {
            Error::Usage(format!("no registry/ found near {}; pass --registry", s.display()))
        }),
        (None, None) => Err(Error::Usage("pass --registry or --snapshot (or set TA_REGISTRY / TA_SNAPSHOT)".into())),
    }
}

fn load(inputs: &Inputs) -> Result<(RegistryBundle, Snapshot)> {
    let snapshot = inputs
        .snapshot
        .as_deref()
        .ok_or_else(|| Error::Usage("pass --snapshot or set TA_SNAPSHOT".into()))?;
    let bundle = RegistryBundle::load(&resolve_registry(inputs.registry.as_deref(), Some(snapshot))?)?;
    let snap = snapshot_io::import(snapshot, &bundle)?;
    Ok((bundle, snap))
}

fn emit(out: &Path, name: &str, table: &Table, stdout: &mut dyn Write) -> Result<()> {
    let path = out.join(name);
    table.write(&path)?;
    writeln!(stdout, "{}", table.render()).map_err(Error::io(Path::new("<stdout>")))?;
    writeln!(stdout, "wrote {}", path.display()).map_err(Error::io(Path::new("<stdout>")))?;
    Ok(())
}

fn largest_model(bundle: &RegistryBundle) -> Result<String> {
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for e in bundle.registry.endpoints() {
        *counts.entry(&e.id.model).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(m, _)| m.to_string())
        .ok_or_else(|| endpointbench_core::Error::Empty("models").into())
}

/// Writes every analysis CSV for `model` into `out`.
pub fn write_all(bundle: &RegistryBundle, snap: &Snapshot, model: &str, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let reg = &bundle.registry;
    emit(out, report::WITHIN_MODEL, &report::within_model_table(reg, snap, model)?, stdout)?;
    emit(out, report::LOO, &report::loo_table(reg, snap, model)?, stdout)?;
    emit(out, report::FINGERPRINT_BY_SKU, &report::fingerprint_by_sku_table(reg, snap, model)?, stdout)?;
    emit(out, report::OVERLAP, &report::overlap_table(reg, snap, DEFAULT_K)?, stdout)?;
    emit(out, report::ABLATION, &report::ablation_table(reg, snap, "chat", DEFAULT_K)?, stdout)?;
    emit(out, report::SENSITIVITY, &report::sensitivity_table(reg, snap, DEFAULT_DELTA, DEFAULT_K)?, stdout)?;
    emit(out, report::REGISTRY_SUMMARY, &report::registry_summary_table(reg), stdout)?;
    emit(out, report::TDP_TABLE, &report::tdp_table(reg), stdout)?;
    Ok(())
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::WithinModel { model, inputs } => {
            let (b, s) = load(&inputs)?;
            emit(&inputs.out, report::WITHIN_MODEL, &report::within_model_table(&b.registry, &s, &model)?, stdout)
        }
        Command::Loo { model, inputs } => {
            let (b, s) = load(&inputs)?;
            emit(&inputs.out, report::LOO, &report::loo_table(&b.registry, &s, &model)?, stdout)
        }
        Command::FingerprintBySku { model, inputs } => {
            let (b, s) = load(&inputs)?;
            let model = match model {
                Some(m) => m,
                None => largest_model(&b)?,
            };
            let t = report::fingerprint_by_sku_table(&b.registry, &s, &model)?;
            emit(&inputs.out, report::FINGERPRINT_BY_SKU, &t, stdout)
        }
        Command::PresetOverlap { k, inputs } => {
            let (b, s) = load(&inputs)?;
            emit(&inputs.out, report::OVERLAP, &report::overlap_table(&b.registry, &s, k)?, stdout)
        }
        Command::FactorAblation { preset, k, inputs } => {
            let (b, s) = load(&inputs)?;
            emit(&inputs.out, report::ABLATION, &report::ablation_table(&b.registry, &s, &preset, k)?, stdout)
        }
        Command::Sensitivity { delta, k, inputs } => {
            if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
                return Err(Error::Usage(format!("--delta must lie in (0, 1), got {delta}")));
            }
            let (b, s) = load(&inputs)?;
            emit(&inputs.out, report::SENSITIVITY, &report::sensitivity_table(&b.registry, &s, delta, k)?, stdout)
        }
        Command::Bootstrap {
            endpoint,
            preset,
            n,
            seed,
            inputs,
        } => {
            if n == 0 {
                return Err(Error::Usage("--n must be at least 1".into()));
            }
            let (b, s) = load(&inputs)?;
            let t = report::bootstrap_table(&b.registry, &s, &endpoint, &preset, n, seed)?;
            emit(&inputs.out, report::BOOTSTRAP, &t, stdout)
        }
        Command::RegistrySummary { inputs } => {
            let dir = resolve_registry(inputs.registry.as_deref(), inputs.snapshot.as_deref())?;
            let b = RegistryBundle::load(&dir)?;
            emit(&inputs.out, report::REGISTRY_SUMMARY, &report::registry_summary_table(&b.registry), stdout)
        }
        Command::TdpTable { inputs } => {
            let dir = resolve_registry(inputs.registry.as_deref(), inputs.snapshot.as_deref())?;
            let b = RegistryBundle::load(&dir)?;
            emit(&inputs.out, report::TDP_TABLE, &report::tdp_table(&b.registry), stdout)
        }
        Command::All { model, inputs } => {
            let (b, s) = load(&inputs)?;
            let model = match model {
                Some(m) => m,
                None => largest_model(&b)?,
            };
            write_all(&b, &s, &model, &inputs.out, stdout)
        }
        Command::Simulate {
            fleet,
            days,
            virtual_clock,
            out,
        } => simulate(&fleet, days, virtual_clock, &out, stdout),
        Command::Serve {
            listen,
            snapshot,
            registry,
        } => {
            let loaded = match &snapshot {
                Some(s) => Some(Loaded::open(&resolve_registry(registry.as_deref(), Some(s))?, s)?),
                None => {
                    eprintln!("no snapshot given; data routes answer 409 until one is loaded");
                    None
                }
            };
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Usage(format!("cannot start runtime: {e}")))?;
            rt.block_on(api::serve(listen, AppState::new(loaded)))
        }
        Command::Fixture { out } => {
            let started = Instant::now();
            let r = fixture::build(&out)?;
            writeln!(
                stdout,
                "fixture written to {} (H100 sharing factor {}, snapshot {}) in {:.1?}",
                out.display(),
                r.h100_sharing,
                r.snapshot_dir.display(),
                started.elapsed()
            )
            .map_err(Error::io(Path::new("<stdout>")))
        }
    }
}

fn simulate(fleet: &Path, days: u32, virtual_clock: bool, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    if days == 0 {
        return Err(Error::Usage("--days must be at least 1".into()));
    }
    let layout = Layout::new(fleet);
    let bundle = RegistryBundle::load(&layout.registry())?;
    let spec = crate::fleet_io::FleetSpec::load(&layout.sim())?;
    let cfg = PipelineConfig::load(&layout.pipeline())?;
    let sim = pipeline::fleet_for(&bundle, &spec)?;
    let store = Store::open(&out.join("store"), bundle.registry.clone())?;
    let clock: Box<dyn Clock> = if virtual_clock {
        Box::new(VirtualClock)
    } else {
        Box::new(WallClock::new(Timestamp::start_of_day(cfg.start_day)))
    };
    let started = Instant::now();
    let report = pipeline::simulate(&bundle, &sim, &cfg, days, clock.as_ref(), &store)?;
    let snap = pipeline::snapshot_from_store(&bundle, &store, &cfg, days)?;
    let dir = snapshot_io::export(&out.join("snapshot"), &snap)?;
    bundle.save(&out.join("registry"))?;
    let w = |stdout: &mut dyn Write, s: String| writeln!(stdout, "{s}").map_err(Error::io(Path::new("<stdout>")));
    w(
        stdout,
        format!(
            "simulated {} day(s): {} probes, {} eval runs, {} fingerprints in {:.1?}",
            report.days,
            report.probes,
            report.eval_runs,
            report.fingerprints,
            started.elapsed()
        ),
    )?;
    w(stdout, format!("snapshot {} written to {}", snap.version, dir.display()))
}

/// Parses `args`, runs the command and maps the outcome to an exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().ansi().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return ExitCode::from(code);
        }
    };
    match run(cli, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
