//! `metanet` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::Channel;
use crate::metasurface::{export_layout, load_library, simulate_bifocal, RealizationStats};
use crate::model::{load_checkpoint, save_checkpoint, CheckpointMeta, IntensityMap, NetworkModel};
use crate::trainer::{
    self, compare_confusions, crosstalk_evaluate, evaluate, input_field, realize_model,
    write_confusion_csv, write_energy_csv, write_epoch_csv, write_percentage_error_csv,
    write_pgm16, write_records_csv, TaskData,
};
use crate::par;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "metanet", version, about = "Polarization-multiplexed metasurface diffractive networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the configured channel tasks and write a checkpoint.
    Train(CommonArgs),
    /// Evaluate a checkpoint, optionally through a meta-unit library.
    Eval(LibraryArgs),
    /// Compile a checkpoint's layers to nanopillar layouts.
    Realize(LibraryArgs),
    /// Design a polarization-dependent bifocal lens and locate its foci.
    DemoBifocal(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct LibraryArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// Failure tagged with the stage it happened in.
enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn setup(args: &CommonArgs) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(Failure::Config)?;
    if let Some(seed) = args.seed {
        cfg.train.rng_seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(out) = &args.out {
        cfg.paths.out = Some(out.clone());
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn with_pool<R: Send>(cfg: &RunConfig, op: impl FnOnce() -> R + Send) -> R {
    match cfg.threads {
        Some(t) => par::with_threads(t, op),
        None => op(),
    }
}

fn cmd_train(args: &CommonArgs) -> Outcome {
    let cfg = setup(args)?;
    cfg.validate_for_training().map_err(Failure::Config)?;
    let tasks = cfg.channel_tasks()?;
    let network = cfg.network.as_ref().expect("validated");
    let mut data = Vec::with_capacity(tasks.len());
    for t in &cfg.tasks {
        data.push((t.load_train()?, t.load_test()?));
    }
    let task_data: Vec<TaskData> = tasks
        .iter()
        .zip(&data)
        .map(|(task, (train, test))| TaskData {
            task,
            train,
            test: cfg.eval.each_epoch.then_some(test),
        })
        .collect();

    let out = cfg.out_dir();
    create_dir(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.rng_seed);
    let model = NetworkModel::random(cfg.optics, network.layers, network.resolved_gaps(), &mut rng)?;
    let (model, records) = with_pool(&cfg, || trainer::train(model, &task_data, &cfg.train))?;

    let ckpt = cfg.checkpoint_dir();
    let meta = CheckpointMeta::describe(&model, &tasks, cfg.train.gain, cfg.train.rng_seed);
    save_checkpoint(&ckpt, &model, &meta)?;
    write_epoch_csv(&out.join("metrics.csv"), &records)?;
    for (task, (_, test)) in tasks.iter().zip(&data) {
        let eval = with_pool(&cfg, || evaluate(&model, task, test))?;
        let ch = task.channel;
        write_confusion_csv(&out.join(format!("confusion_{ch}.csv")), &eval.confusion)?;
        write_energy_csv(&out.join(format!("energy_{ch}.csv")), &eval.energy)?;
        println!(
            "channel {ch}: test accuracy {:.2}% ({} samples), min class target energy {:.3}",
            eval.confusion.accuracy() * 100.0,
            eval.confusion.total(),
            eval.energy.min_mean()
        );
    }
    println!("checkpoint written to {}", ckpt.display());
    Ok(())
}

fn open_checkpoint(args: &LibraryArgs, cfg: &RunConfig) -> std::result::Result<(NetworkModel, CheckpointMeta), Failure> {
    let dir = args.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_dir());
    let (model, meta) = load_checkpoint(&dir)?;
    if meta.optical_config() != cfg.optics {
        return Err(Failure::Config(Error::config(
            "optics",
            format!(
                "checkpoint at {} was trained with {:?}",
                dir.display(),
                meta.optical_config()
            ),
        )));
    }
    Ok((model, meta))
}

fn library_path(args: &LibraryArgs, cfg: &mut RunConfig) -> std::result::Result<Option<PathBuf>, Failure> {
    if let Some(p) = &args.library {
        cfg.paths.library = Some(p.clone());
    }
    if cfg.paths.library.is_none() {
        return Ok(None);
    }
    Ok(Some(cfg.validate_library_path().map_err(Failure::Config)?.to_path_buf()))
}

fn cmd_eval(args: &LibraryArgs) -> Outcome {
    let mut cfg = setup(&args.common)?;
    cfg.validate_optics().map_err(Failure::Config)?;
    cfg.validate_tasks().map_err(Failure::Config)?;
    let lib_path = library_path(args, &mut cfg)?;
    let (model, meta) = open_checkpoint(args, &cfg)?;
    let lib = match &lib_path {
        Some(p) => {
            let lib = load_library(p)?;
            lib.check_compatible(model.config())
                .map_err(|e| Failure::Config(e.within("library")))?;
            Some(lib)
        }
        None => None,
    };

    let out = cfg.out_dir().join("eval");
    create_dir(&out)?;
    for task in &meta.tasks {
        let ch = task.channel;
        let section = cfg
            .tasks
            .iter()
            .find(|t| t.channel == ch)
            .ok_or_else(|| Failure::Config(Error::config("tasks", format!("no {ch} task for the checkpoint"))))?;
        let test = section.load_test()?;
        let eval = with_pool(&cfg, || evaluate(&model, task, &test))?;
        write_confusion_csv(&out.join(format!("confusion_{ch}.csv")), &eval.confusion)?;
        write_energy_csv(&out.join(format!("energy_{ch}.csv")), &eval.energy)?;
        write_records_csv(&out.join(format!("records_{ch}.csv")), &eval.records)?;
        for i in 0..cfg.eval.pgm_samples.min(test.len()) {
            let input = input_field(task, &test, i, model.config())?;
            let map: IntensityMap = model.forward_channel(&input, ch, false)?.intensity();
            let r = &eval.records[i];
            let name = format!("intensity_{ch}_{i:05}_label{}_pred{}.pgm", r.label, r.predicted);
            write_pgm16(&out.join(name), &map)?;
        }
        println!(
            "channel {ch}: phase-only accuracy {:.2}% ({} samples)",
            eval.confusion.accuracy() * 100.0,
            eval.confusion.total()
        );
        if let Some(lib) = &lib {
            let real = with_pool(&cfg, || crosstalk_evaluate(&model, lib, task, &test))?;
            let diff = compare_confusions(&eval.confusion, &real.confusion)?;
            write_confusion_csv(&out.join(format!("confusion_crosstalk_{ch}.csv")), &real.confusion)?;
            write_energy_csv(&out.join(format!("energy_crosstalk_{ch}.csv")), &real.energy)?;
            write_percentage_error_csv(&out.join(format!("percentage_error_{ch}.csv")), &diff)?;
            println!(
                "channel {ch}: amplitude-crosstalk accuracy {:.2}%, max cell change {:.3}%",
                real.confusion.accuracy() * 100.0,
                diff.max_abs()
            );
        }
    }
    Ok(())
}

fn cmd_realize(args: &LibraryArgs) -> Outcome {
    let mut cfg = setup(&args.common)?;
    cfg.validate_optics().map_err(Failure::Config)?;
    let lib_path = library_path(args, &mut cfg)?.ok_or_else(|| {
        Failure::Config(Error::config("paths.library", "realize needs a library"))
    })?;
    let (model, _) = open_checkpoint(args, &cfg)?;
    let lib = load_library(&lib_path)?;
    lib.check_compatible(model.config())
        .map_err(|e| Failure::Config(e.within("library")))?;
    let (_, geoms) = with_pool(&cfg, || realize_model(&model, &lib))?;

    let out = cfg.out_dir().join("realize");
    create_dir(&out)?;
    let report_path = out.join("realization.csv");
    let mut report = String::from("layer,channel,max_abs_error_rad,mean_abs_error_rad,min_amplitude,mean_amplitude\n");
    for (l, geom) in geoms.iter().enumerate() {
        export_layout(geom, model.config(), &out.join(format!("layout_layer{l}.csv")))?;
        let s = RealizationStats::of(geom);
        for ch in Channel::ALL {
            let k = ch.index();
            report.push_str(&format!(
                "{l},{ch},{},{},{},{}\n",
                s.max_abs_error[k], s.mean_abs_error[k], s.min_amplitude[k], s.mean_amplitude[k]
            ));
            println!(
                "layer {l} channel {ch}: max |Δφ| {:.4} rad, mean |Δφ| {:.4} rad, mean amplitude {:.4}",
                s.max_abs_error[k], s.mean_abs_error[k], s.mean_amplitude[k]
            );
        }
    }
    fs::write(&report_path, report).map_err(|e| Error::io(&report_path, e))?;
    Ok(())
}

fn cmd_demo_bifocal(args: &CommonArgs) -> Outcome {
    let cfg = setup(args)?;
    let b = cfg.validate_bifocal().map_err(Failure::Config)?.clone();
    let (_, reports) = simulate_bifocal(&cfg.optics, b.n, b.focus_x, b.focus_y)?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let path = out.join("peaks.csv");
    let mut csv = String::from(
        "channel,focus_x_m,focus_y_m,focus_z_m,designed_row,designed_col,peak_row,peak_col,peak_intensity,cross_intensity,cross_ratio\n",
    );
    for r in &reports {
        let map = IntensityMap {
            n: b.n,
            pitch: cfg.optics.pitch,
            values: r.intensity.clone(),
        };
        write_pgm16(&out.join(format!("bifocal_{}.pgm", r.channel)), &map)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.channel,
            r.designed.x,
            r.designed.y,
            r.designed.z,
            r.designed_cell.0,
            r.designed_cell.1,
            r.peak_cell.0,
            r.peak_cell.1,
            r.peak_intensity,
            r.cross_intensity,
            r.cross_ratio()
        ));
        println!(
            "channel {}: designed cell ({}, {}), peak at ({}, {}), cross-polarized ratio {:.4}",
            r.channel,
            r.designed_cell.0,
            r.designed_cell.1,
            r.peak_cell.0,
            r.peak_cell.1,
            r.cross_ratio()
        );
    }
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Realize(a) => cmd_realize(a),
        Command::DemoBifocal(a) => cmd_demo_bifocal(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
