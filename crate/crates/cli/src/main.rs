use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wei_core::config::RunConfig;
use wei_core::experiments::{build_dataset, run_csi_experiment, run_pl_benchmark, CsiMethod};
use wei_core::geometry::{generate_rx_set, generate_scene};
use wei_core::neuralnet::grad_check_suite;
use wei_core::store::{load_dataset, read_scene, save_dataset, write_scene, SCENE_FILE};

/// Largest relative gradient error the grad-check command accepts.
const GRADCHECK_TOLERANCE: f64 = 1e-3;
const GRADCHECK_DEFAULT_SEEDS: u64 = 20;
const MIN_RX: usize = 100;

#[derive(Parser)]
#[command(name = "wei-bench", version, about = "Environment-aware channel prediction benchmark")]
struct Cli {
    /// Worker threads for per-link work (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and write scene.json.
    GenScene(Common),
    /// Run the channel oracle and WEI extractors for a receiver set.
    BuildDataset {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train one path-loss model per WEI step and compare them.
    BenchPl {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pilot-ratio sweep for CSI recovery.
    Csi {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference gradient check over random models of each layer
    /// type; GRADCHECK_SEEDS sets the number of models per type.
    GradCheck {
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum Failure {
    Core(wei_core::Error),
    Usage(String),
    Check(String),
}

impl From<wei_core::Error> for Failure {
    fn from(e: wei_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_validation() => 1,
            Failure::Usage(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.kind(),
            Failure::Usage(_) => "Usage",
            Failure::Check(_) => "CheckFailed",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) | Failure::Check(m) => m.clone(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn gen_scene(common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let scene = generate_scene(&cfg.scene, cfg.seeds().scene)?;
    fs::create_dir_all(&common.out)?;
    write_scene(&common.out.join(SCENE_FILE), &scene)?;
    let e = scene.extent;
    let summary = format!(
        "buildings: {}\nextent: [{}, {}] x [{}, {}] m\ntx: ({}, {}, {}) m\ncarrier: {} Hz\nscene seed: {}\n",
        scene.buildings.len(),
        e.min[0],
        e.max[0],
        e.min[1],
        e.max[1],
        scene.tx.x,
        scene.tx.y,
        scene.tx.z,
        scene.carrier_freq,
        scene.seed
    );
    fs::write(common.out.join("scene_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn build(scene_path: &Path, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let scene = read_scene(scene_path)?;
    let rx = generate_rx_set(&scene, &cfg.rx.layout, cfg.rx.height, cfg.seeds().rx)?;
    if rx.points.len() < MIN_RX {
        return Err(Failure::Core(wei_core::Error::InvalidConfig(format!(
            "receiver set has {} points, at least {MIN_RX} are required",
            rx.points.len()
        ))));
    }
    let ds = build_dataset(&scene, &rx, &cfg.steps, &cfg.dataset, cfg.seeds().split)?;
    let manifest = save_dataset(&common.out, &ds)?;
    let steps: Vec<String> = manifest.steps.iter().map(|s| s.to_string()).collect();
    println!(
        "records: {}\nrepresentations: {} ({})\nsplit: {} train / {} val / {} test\nrecords bytes: {}\nconfig hash: {}",
        manifest.link_count,
        steps.len(),
        steps.join(", "),
        manifest.split.train.len(),
        manifest.split.val.len(),
        manifest.split.test.len(),
        manifest.records.bytes,
        manifest.config_hash
    );
    Ok(())
}

fn bench_pl(dataset: &Path, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let ds = load_dataset(dataset)?;
    let (report, predictors) = run_pl_benchmark(&ds, &cfg.pl_bench_config())?;
    fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("pl_report.json"), &report)?;
    fs::write(common.out.join("pl_report.csv"), report.to_csv())?;
    for p in &predictors {
        let step = p.model.spec().step.map(|s| s.to_string()).unwrap_or_default();
        let mut bytes = Vec::new();
        p.write_to(&mut bytes)?;
        fs::write(common.out.join(format!("model_{step}.bin")), bytes)?;
    }
    print!("{}", report.table());
    Ok(())
}

fn csi(dataset: &Path, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let ds = load_dataset(dataset)?;
    let report = run_csi_experiment(&ds, &cfg.csi_config())?;
    fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("csi_report.json"), &report)?;
    fs::write(common.out.join("csi_report.csv"), report.to_csv())?;
    print!("{}", report.table());
    match (report.min_ratio(CsiMethod::BaselineInterp), report.min_ratio(CsiMethod::WeiS4)) {
        (Ok(base), Ok(s4)) => println!("wei-s4 pilot reduction vs baseline: {:.1}%", 100.0 * (1.0 - s4 / base)),
        (b, s) => {
            for e in [b.err(), s.err()].into_iter().flatten() {
                println!("unreachable: {e}");
            }
        }
    }
    Ok(())
}

fn grad_check(eps: f64, common: &Common) -> Outcome {
    let seeds = match std::env::var("GRADCHECK_SEEDS") {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| Failure::Usage(format!("GRADCHECK_SEEDS={v:?} is not a count")))?,
        Err(_) => GRADCHECK_DEFAULT_SEEDS,
    };
    let rows = grad_check_suite(seeds, eps)?;
    fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("gradcheck.json"), &json!({ "eps": eps, "tolerance": GRADCHECK_TOLERANCE, "rows": rows }))?;
    println!("{:<8} {:>7} {:>14} {:>8} {:>8}", "layer", "models", "max rel err", "checked", "skipped");
    for r in &rows {
        println!("{:<8} {:>7} {:>14.3e} {:>8} {:>8}", r.kind.name(), r.models, r.max_rel_error, r.checked, r.skipped);
    }
    let bad: Vec<&str> = rows.iter().filter(|r| !(r.max_rel_error < GRADCHECK_TOLERANCE)).map(|r| r.kind.name()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("gradient check above {GRADCHECK_TOLERANCE} for {}", bad.join(", "))))
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::GenScene(common) => gen_scene(common),
        Command::BuildDataset { scene, common } => build(scene, common),
        Command::BenchPl { dataset, common } => bench_pl(dataset, common),
        Command::Csi { dataset, common } => csi(dataset, common),
        Command::GradCheck { eps, common } => grad_check(*eps, common),
    }
}

fn report(f: &Failure) -> ExitCode {
    let code = f.exit_code();
    eprintln!("{}", json!({ "error": f.kind(), "message": f.message(), "exit_code": code }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&Failure::Usage(e.to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
