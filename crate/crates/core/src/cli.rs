//! The `smqc` command-line front end.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::export_dataset;
use crate::error::{Error, Result};
use crate::fit::fit_accuracy_model;
use crate::imaging::{modulation_spectrum, ModulationAccumulator};
use crate::io;
use crate::label::{build_label, LabelState, LayerStack};
use crate::photon::{simulate_read_aggregated, simulate_read_into, PhotonStream, PixelFilter};
use crate::recognizer::{
    accuracy_sweep, build_templates, classify, repeated_read_trial, Charset, Decision, Sampling,
};
use crate::seed::{derive_seed, rng_from_seed};

const READ_STREAM: u64 = 0x7265_6164;
const SPECTRUM_STREAM: u64 = 0x7370_6563;

#[derive(Debug, Parser)]
#[command(name = "smqc", version, about = "Forge, read and evaluate single-molecule coherence labels")]
#[command(subcommand_required = false, arg_required_else_help = true)]
pub struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set label.molecule_count=60`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Base seed, overriding `seed` in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Print the default configuration as commented TOML and exit.
    #[arg(long)]
    pub emit_default_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forge a label and write it as a checksummed JSON file.
    Forge(ForgeArgs),
    /// Read a label once: write images and a report, and persist the bleaching.
    Read(ReadArgs),
    /// Modulation spectra of molecule and background pixels, without bleaching the label.
    Spectrum(SpectrumArgs),
    /// Recognition accuracy against mean molecule count, or across repeated reads.
    Sweep(SweepArgs),
    /// Fit the accuracy model to a sweep or an n0,t,accuracy table.
    Fit(FitArgs),
    /// Write labelled frequency-domain images and a manifest.
    ExportDataset(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    /// One character 0-9/A-Z, or a pair of letters.
    #[arg(long)]
    pub text: String,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Quench-inhibited layer stack: molecules do not bleach.
    #[arg(long)]
    pub reusable: bool,
    #[arg(long)]
    pub molecules: Option<usize>,
    #[arg(long)]
    pub qds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReadArgs {
    /// Label file; rewritten in place after the read.
    pub label: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Simulate every photon instead of per-pixel sums.
    #[arg(long)]
    pub exact: bool,
    /// Also stream every photon to a binary dump (implies --exact).
    #[arg(long, value_name = "FILE")]
    pub dump_photons: Option<PathBuf>,
    /// Read immediately instead of waiting for the scheduled read time.
    #[arg(long)]
    pub no_schedule: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    pub label: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Grid start, Hz.
    #[arg(long)]
    pub start: Option<f64>,
    /// Grid stop, Hz.
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated mean molecule counts.
    #[arg(long, value_delimiter = ',')]
    pub mean_counts: Option<Vec<f64>>,
    /// Repeated reads of the same labels on the configured schedule.
    #[arg(long)]
    pub repeated: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV, or a CSV with columns n0,t,accuracy.
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fit the ceiling c instead of holding it at 1.
    #[arg(long)]
    pub free_c: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    /// Also write time-domain images.
    #[arg(long)]
    pub include_time: bool,
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.emit_default_config {
        print!("{}", RunConfig::default_toml());
        return Ok(());
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Some(Command::Forge(a)) => forge(&config, a),
        Some(Command::Read(a)) => read(&config, a),
        Some(Command::Spectrum(a)) => spectrum(&config, a),
        Some(Command::Sweep(a)) => sweep(config, a),
        Some(Command::Fit(a)) => fit(&config, a),
        Some(Command::ExportDataset(a)) => export(config, a),
        None => Err(Error::Config("no subcommand given".into())),
    }
}

fn forge(config: &RunConfig, args: ForgeArgs) -> Result<()> {
    let mut cfg = config.label_config()?;
    if args.reusable {
        cfg.layer_stack = LayerStack::QuenchInhibited;
    }
    if let Some(n) = args.molecules {
        cfg.molecule_count = n;
    }
    if let Some(n) = args.qds {
        cfg.qd_count = n;
    }
    let state = build_label(&args.text, &cfg, config.seed)?;
    io::write_label(&args.out, &state)?;
    println!(
        "forged {:?}: mask area {} px, {} molecules, {} quantum dots, {:?} stack -> {}",
        state.glyph_text,
        state.glyph_mask()?.area(),
        state.molecule_count(),
        state.qd_count(),
        state.layer_stack,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReadReport {
    glyph_text: String,
    read_index: u32,
    layer_stack: LayerStack,
    sampling: Sampling,
    /// Bleach-only illumination applied before this read to reach its scheduled time, s.
    wait_illumination: f64,
    illumination_time: f64,
    molecules_at_start: usize,
    molecules_at_end: usize,
    emitter_photons: u64,
    dark_photons: u64,
    frequency: Decision,
    time: Decision,
    frequency_correct: bool,
    time_correct: bool,
}

fn read(config: &RunConfig, args: ReadArgs) -> Result<()> {
    let mut state = io::read_label(&args.label)?;
    let drive = config.drive()?;
    let exposure = config.exposure();
    exposure.validate()?;
    let mut rng = rng_from_seed(derive_seed(derive_seed(state.rng_seed, READ_STREAM), state.read_count as u64));

    let wait = if args.no_schedule {
        0.0
    } else {
        config
            .schedule()
            .gap_before(state.read_count as usize + 1, state.illumination_time, exposure.duration)
    };
    state.bleach(wait, &mut rng);

    let sampling = if args.exact || args.dump_photons.is_some() {
        Sampling::Exact
    } else {
        config.exposure.sampling
    };
    let mut acc = ModulationAccumulator::new(state.canvas.width, state.canvas.height);
    let summary = match (&args.dump_photons, sampling) {
        (Some(path), _) => {
            let (w, h) = (state.canvas.width, state.canvas.height);
            let mut dump = io::PhotonDumpWriter::create(path, w, h, exposure.duration, drive.mod_frequency)?;
            let s = simulate_read_into(&mut state, &drive, &exposure, &mut rng, &mut (&mut acc, &mut dump));
            dump.finish()?;
            s
        }
        (None, Sampling::Exact) => simulate_read_into(&mut state, &drive, &exposure, &mut rng, &mut acc),
        (None, Sampling::Aggregated) => simulate_read_aggregated(&mut state, &drive, &exposure, &mut rng, &mut acc)?,
    };

    let templates = build_templates(&Charset::for_text(&state.glyph_text), state.canvas, state.font, state.glyph_scale)?;
    let freq = acc.freq_image();
    let time = acc.time_image();
    let frequency = classify(&freq, &templates)?;
    let time_decision = classify(&time, &templates)?;
    let report = ReadReport {
        glyph_text: state.glyph_text.clone(),
        read_index: summary.read_index,
        layer_stack: state.layer_stack,
        sampling,
        wait_illumination: wait,
        illumination_time: state.illumination_time,
        molecules_at_start: summary.molecules_at_start,
        molecules_at_end: summary.molecules_at_end,
        emitter_photons: summary.emitter_photons,
        dark_photons: summary.dark_photons,
        frequency_correct: frequency.is(&state.glyph_text),
        time_correct: time_decision.is(&state.glyph_text),
        frequency,
        time: time_decision,
    };

    fs::create_dir_all(&args.out_dir)?;
    io::write_image_pgm(&args.out_dir.join("time.pgm"), &time)?;
    io::write_image_pgm(&args.out_dir.join("freq.pgm"), &freq)?;
    io::write_magnitudes_csv(&args.out_dir.join("freq_raw.csv"), &freq)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    fs::write(args.out_dir.join("report.json"), json)?;
    io::write_label(&args.label, &state)?;

    println!(
        "read {} of {:?}: {} -> {} molecules, frequency image {}, time image {}",
        report.read_index,
        report.glyph_text,
        report.molecules_at_start,
        report.molecules_at_end,
        describe(&report.frequency),
        describe(&report.time)
    );
    Ok(())
}

fn describe(d: &Decision) -> String {
    match d {
        Decision::Decoded(c) => format!("{:?} (score {:.3})", c.label, c.score),
        Decision::NoSignal => "no signal".into(),
    }
}

/// Spot pixels of alive molecules, and a sample of the remaining pixels.
fn spectrum_pixels(state: &LabelState, background: usize, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let molecule: BTreeSet<u32> = state
        .molecules()
        .filter(|e| e.alive)
        .flat_map(|e| e.spot_pixels(&state.canvas))
        .collect();
    let rest: Vec<u32> = (0..state.canvas.pixel_count() as u32)
        .filter(|p| !molecule.contains(p))
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<u32> = sample(&mut rng, rest.len(), background.min(rest.len()))
        .into_iter()
        .map(|i| rest[i])
        .collect();
    picked.sort_unstable();
    (molecule.into_iter().collect(), picked)
}

fn spectrum(config: &RunConfig, args: SpectrumArgs) -> Result<()> {
    let mut state = io::read_label(&args.label)?;
    let drive = config.drive()?;
    let exposure = config.exposure();
    exposure.validate()?;
    let mut c = config.clone();
    c.spectrum.start = args.start.unwrap_or(c.spectrum.start);
    c.spectrum.stop = args.stop.unwrap_or(c.spectrum.stop);
    c.spectrum.points = args.points.unwrap_or(c.spectrum.points);
    c.validate()?;
    let grid = c.frequency_grid();

    let seed = derive_seed(derive_seed(state.rng_seed, SPECTRUM_STREAM), state.read_count as u64);
    let (molecule, background) = spectrum_pixels(&state, c.spectrum.background_pixels, seed);
    let all: Vec<u32> = molecule.iter().chain(&background).copied().collect();
    let mut filter = PixelFilter::new(
        state.canvas.pixel_count(),
        &all,
        PhotonStream::for_canvas(&state.canvas, &exposure, &drive),
    );
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    simulate_read_into(&mut state, &drive, &exposure, &mut rng, &mut filter);
    let mut stream = filter.inner;
    stream.finish();

    fs::create_dir_all(&args.out_dir)?;
    for (name, pixels) in [("molecule", &molecule), ("background", &background)] {
        let times = stream.restricted_to(pixels).merged_times();
        let trace = modulation_spectrum(&times, &grid)?;
        io::write_spectrum_csv(&args.out_dir.join(format!("{name}_spectrum.csv")), &trace)?;
        match trace.peak_frequency().filter(|_| trace.max_magnitude() > 0.0) {
            Some(f) => println!(
                "{name}: {} px, {} photons, peak {f} Hz, |F| = {:.1}",
                pixels.len(),
                times.len(),
                trace.max_magnitude()
            ),
            None => println!("{name}: {} px, no photons", pixels.len()),
        }
    }
    Ok(())
}

fn sweep(mut config: RunConfig, args: SweepArgs) -> Result<()> {
    if args.repeated {
        if let Some(t) = args.trials {
            config.repeated_read.trials = t;
        }
        let mut trial = config.trial_config()?;
        trial.label.molecule_count = config.repeated_read.initial_molecules;
        let rows = repeated_read_trial(&trial, &config.schedule(), config.repeated_read.trials, config.seed)?;
        io::write_repeated_read_csv(&args.out, &rows)?;
        for r in &rows {
            println!(
                "read {}: {:.1} survivors, accuracy {:.3} [{:.3}, {:.3}]",
                r.read_index, r.survivors, r.accuracy, r.ci_low, r.ci_high
            );
        }
    } else {
        let trials = args.trials.unwrap_or(config.sweep.trials);
        let counts = args.mean_counts.unwrap_or_else(|| config.sweep.mean_counts.clone());
        let rows = accuracy_sweep(&counts, trials, &config.trial_config()?, config.seed)?;
        io::write_sweep_csv(&args.out, &rows)?;
        for r in &rows {
            println!(
                "<N> = {}: accuracy {:.3} [{:.3}, {:.3}] over {} trials",
                r.mean_n, r.accuracy, r.ci_low, r.ci_high, r.trials
            );
        }
    }
    Ok(())
}

fn fit(config: &RunConfig, args: FitArgs) -> Result<()> {
    let points = io::read_accuracy_points(&args.data)?;
    let mut options = config.fit_options();
    options.free_c |= args.free_c;
    let result = fit_accuracy_model(&points, &options)?;
    io::write_fit_json(&args.out, &result)?;
    println!(
        "beta = {:.4}, k_dis = {:.4}, c = {:.4}, alpha_p = {:.4}{}, R^2 = {:.4}",
        result.beta,
        result.k_dis,
        result.c,
        result.alpha_p,
        if result.alpha_p_fixed { " (fixed)" } else { "" },
        result.residual_r2
    );
    Ok(())
}

fn export(mut config: RunConfig, args: ExportArgs) -> Result<()> {
    let count = args.count.unwrap_or(config.dataset.count);
    let include_time = args.include_time || config.dataset.include_time;
    config.sweep.charset = config.dataset.charset.clone();
    let rows = export_dataset(
        &config.trial_config()?,
        &config.dataset.mean_counts,
        count,
        include_time,
        config.seed,
        &args.out_dir,
    )?;
    println!("wrote {} images and {}", rows.len(), Path::new(&args.out_dir).join("manifest.csv").display());
    Ok(())
}
