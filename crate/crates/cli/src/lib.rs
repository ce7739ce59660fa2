//! The `prevmap` command line.
//!
//! All machine-readable output goes to files under `--output-dir`; progress
//! and summaries go to standard error. Exit status is 0 on success, 1 for
//! usage errors and 2 for data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use prevmap::efficiency::{efficacy_signed_rank, efficacy_t, pitman_are, power_csv, power_curve_mc, NuisanceSpec};
use prevmap::em::EmOptions;
use prevmap::gof::{gof_compare, CandidateFamily};
use prevmap::model::EffectsTable;
use prevmap::pipeline::{fit_table, Analysis};
use prevmap::regions::{
    agreement_csv, label_components, regions_csv, split_half_agreement, statistic_map, summarize_regions,
    threshold_map, Statistic,
};
use prevmap::simulate::{make_toy_population, sample_effects, Ellipse, Spread, ToySpec};
use prevmap::volio::{
    analysis_records, format_effects_table, format_parameter_map, format_volume_csv, read_effects_table,
    read_parameter_map, render_pgm_slice, write_text, Axis, ParameterMapRecord,
};
use prevmap::volume::{Dims, VoxelMap};
use prevmap::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "prevmap", version, about = "Voxel-wise prevalence maps for group studies")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a toy population and write its effects table and truth.
    Simulate(SimulateArgs),
    /// Fit the mixture model at every voxel of an effects table.
    Fit(FitArgs),
    /// Test a fitted parameter map and mask it at an FDR level.
    Test(TestArgs),
    /// Fit, test and render in one go; simulates a toy when no input is given.
    Pipeline(PipelineArgs),
    /// Threshold t and prevalence maps into regions and measure split-half agreement.
    Regions(RegionsArgs),
    /// Held-out Kolmogorov-Smirnov comparison of candidate distributions.
    Gof(GofArgs),
    /// Pitman efficiency of the signed-rank test relative to the t test.
    Are(AreArgs),
    /// Monte Carlo power of both tests along the prevalence path.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// Spacing of the weight grid used for starting values.
    #[arg(long, default_value_t = 0.05)]
    pub grid_step: f64,
    /// Number of best grid starts refined by EM.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
}

impl EmArgs {
    fn options(&self, seed: u64) -> EmOptions {
        EmOptions {
            grid_step: self.grid_step,
            top_k_starts: self.top_k,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            seed,
            ..EmOptions::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    #[arg(long, default_value_t = 1)]
    pub nz: usize,
    #[arg(long, default_value_t = 100)]
    pub subjects: usize,
    /// Ellipse centre as x,y[,z] (default: grid centre).
    #[arg(long, value_delimiter = ',')]
    pub center: Option<Vec<f64>>,
    /// Ellipse semi-axes as a,b[,c].
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 12.0, 1.0])]
    pub axes: Vec<f64>,
    /// SD of the per-subject centre shift, in voxels.
    #[arg(long, default_value_t = 1.5)]
    pub center_jitter: f64,
    /// SD of the per-subject relative axis change.
    #[arg(long, default_value_t = 0.1)]
    pub axes_jitter: f64,
    /// Use the scale-mixture active model 0.88 N(1,0.15) + 0.12 N(1,1).
    #[arg(long)]
    pub misspecified: bool,
    /// No activation at all.
    #[arg(long)]
    pub null_only: bool,
    /// Read the second parameter of N(a,b) as a standard deviation.
    #[arg(long)]
    pub spread_sd: bool,
}

impl ToyArgs {
    pub fn spec(&self, seed: u64) -> Result<ToySpec, Error> {
        let dims = Dims::new(self.nx, self.ny, self.nz)?;
        let mid = |n: usize| (n as f64 - 1.0) / 2.0;
        let center = match &self.center {
            Some(c) => pad3(c, mid(self.nz))?,
            None => [mid(self.nx), mid(self.ny), mid(self.nz)],
        };
        let base = if self.misspecified {
            ToySpec::standard_misspecified(seed)
        } else {
            ToySpec::standard(seed)
        };
        Ok(ToySpec {
            dims,
            n_subjects: self.subjects,
            ellipse: (!self.null_only).then_some(Ellipse {
                center,
                axes: pad3(&self.axes, 1.0)?,
            }),
            center_jitter_sd: self.center_jitter,
            axes_jitter_sd: self.axes_jitter,
            spread: if self.spread_sd { Spread::StdDev } else { Spread::Variance },
            ..base
        })
    }
}

fn pad3(v: &[f64], fill: f64) -> Result<[f64; 3], Error> {
    match v {
        [a, b] => Ok([*a, *b, fill]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::InvalidOption(format!("expected 2 or 3 comma-separated values, got {}", v.len()))),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SliceSpec {
    pub axis: Axis,
    pub index: usize,
}

fn parse_slice(s: &str) -> Result<SliceSpec, String> {
    let (a, i) = s.split_once(':').ok_or("expected <axis>:<index>, e.g. z:0")?;
    let axis = a.parse::<Axis>().map_err(|e| e.to_string())?;
    let index = i.parse::<usize>().map_err(|_| format!("bad slice index '{i}'"))?;
    Ok(SliceSpec { axis, index })
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub toy: ToyArgs,
    /// Also render the true prevalence slice as PGM.
    #[arg(long, value_parser = parse_slice)]
    pub render_slice: Option<SliceSpec>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Effects table (PREVMAP-EFFECTS v1).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Effects table the parameter map was fitted on.
    #[arg(long)]
    pub input: PathBuf,
    /// Parameter map written by `fit`.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// FDR level.
    #[arg(long, default_value_t = 0.1, value_parser = parse_unit)]
    pub q: f64,
    #[arg(long, value_parser = parse_slice)]
    pub render_slice: Option<SliceSpec>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Effects table; a toy population is simulated when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// FDR level [default: 0.1, or 0.05 for a simulated toy].
    #[arg(long, value_parser = parse_unit)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub toy: ToyArgs,
    #[arg(long, value_parser = parse_slice)]
    pub render_slice: Option<SliceSpec>,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Fraction of in-mask voxels marked active.
    #[arg(long, default_value_t = 0.5)]
    pub active_fraction: f64,
    /// Number of random split halves for the agreement table.
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Comma-separated families (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Seed of the train/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NuisanceArgs {
    /// Weight of the first null component.
    #[arg(long, default_value_t = 0.88)]
    pub null_weight: f64,
    #[arg(long, default_value_t = 0.15)]
    pub null_var1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub null_var2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub active_mu: f64,
    #[arg(long, default_value_t = 0.25)]
    pub active_var: f64,
}

impl NuisanceArgs {
    fn spec(&self) -> NuisanceSpec {
        NuisanceSpec {
            null_weights: [self.null_weight, 1.0 - self.null_weight],
            null_vars: [self.null_var1, self.null_var2],
            active_mu: self.active_mu,
            active_var: self.active_var,
        }
    }
}

#[derive(Debug, Args)]
pub struct AreArgs {
    #[command(flatten)]
    pub nuisance: NuisanceArgs,
    /// Write `are.csv` here as well as the summary line.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub nuisance: NuisanceArgs,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Subjects per simulated sample.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Comma-separated prevalences.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3])]
    pub p_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_unit)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let workers = cli
        .workers
        .map(|w| w as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {workers} workers: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidOption(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Test(a) => test(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Regions(a) => regions(a),
        Command::Gof(a) => gof(a),
        Command::Are(a) => are(a),
        Command::Power(a) => power(a),
    }
}

fn dense_map(dims: Dims, values: Vec<f64>) -> VoxelMap {
    VoxelMap {
        dims,
        voxel_index: (0..dims.len()).collect(),
        values,
    }
}

fn render(dir: &Path, name: &str, map: &VoxelMap, slice: Option<SliceSpec>, range: (f64, f64)) -> Result<(), Error> {
    if let Some(s) = slice {
        let pgm = render_pgm_slice(map, s.axis, s.index, range)?;
        write_text(&dir.join(name), &pgm)?;
    }
    Ok(())
}

fn simulate_toy(dir: &Path, toy: &ToyArgs, seed: u64, slice: Option<SliceSpec>) -> Result<EffectsTable, Error> {
    let spec = toy.spec(seed)?;
    let pop = make_toy_population(&spec)?;
    let table = sample_effects(&pop, &spec)?;
    write_text(&dir.join("effects.txt"), &format_effects_table(&table))?;
    let truth = dense_map(spec.dims, pop.true_prevalence);
    write_text(&dir.join("true_prevalence.csv"), &format_volume_csv(&truth))?;
    render(dir, "true_prevalence.pgm", &truth, slice, (0.0, 1.0))?;
    eprintln!(
        "simulated {} subjects on a {}x{}x{} grid (seed {seed})",
        spec.n_subjects, spec.dims.nx, spec.dims.ny, spec.dims.nz
    );
    Ok(table)
}

fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    simulate_toy(&a.output_dir, &a.toy, a.seed, a.render_slice).map(|_| ())
}

fn fit(a: &FitArgs) -> Result<(), Error> {
    let table = read_effects_table(&a.input)?;
    let opts = a.em.options(a.seed);
    let start = Instant::now();
    let fits = fit_table(&table, &opts)?;
    let records: Vec<ParameterMapRecord> = table
        .voxel_index()
        .iter()
        .zip(&fits)
        .map(|(&v, f)| ParameterMapRecord::from_fit(table.dims(), v, f))
        .collect();
    write_text(&a.output_dir.join("parameter_map.csv"), &format_parameter_map(&records))?;
    let thresholded = fits.iter().filter(|f| f.thresholded).count();
    let unconverged = fits.iter().filter(|f| !f.converged).count();
    eprintln!(
        "fitted {} voxels x {} subjects in {:.1?}; {thresholded} thresholded, {unconverged} not converged",
        table.n_voxels(),
        table.n_subjects(),
        start.elapsed()
    );
    Ok(())
}

fn write_analysis(
    dir: &Path,
    name: &str,
    table: &EffectsTable,
    analysis: &Analysis,
    slice: Option<SliceSpec>,
) -> Result<(), Error> {
    let records = analysis_records(table, analysis);
    write_text(&dir.join(name), &format_parameter_map(&records))?;
    let map = analysis.signed_prevalence_map(table);
    render(dir, "signed_prevalence.pgm", &map, slice, (-1.0, 1.0))?;
    eprintln!(
        "{} of {} voxels significant at q = {}; {} with non-zero signed prevalence",
        analysis.fdr.n_rejected(),
        table.n_voxels(),
        analysis.fdr.q_level,
        analysis.signed_prevalence.iter().filter(|&&v| v != 0.0).count()
    );
    Ok(())
}

fn test(a: &TestArgs) -> Result<(), Error> {
    let table = read_effects_table(&a.input)?;
    let mut records = read_parameter_map(&a.params)?;
    records.sort_by_key(|r| r.voxel_index);
    let dims = table.dims();
    let same_voxels = records.len() == table.n_voxels()
        && records.iter().zip(table.voxel_index()).all(|(r, &v)| r.voxel_index == v);
    if !same_voxels {
        return Err(Error::DimensionMismatch(format!(
            "{} does not cover the voxels of {}",
            a.params.display(),
            a.input.display()
        )));
    }
    for r in &records {
        r.check(&dims)?;
    }
    let fits = records.iter().map(|r| r.to_fit()).collect::<Result<Vec<_>, _>>()?;
    let analysis = Analysis::from_fits(&table, fits, a.q)?;
    write_analysis(&a.output_dir, "tested_map.csv", &table, &analysis, a.render_slice)
}

fn pipeline(a: &PipelineArgs) -> Result<(), Error> {
    let (table, q) = match &a.input {
        Some(p) => (read_effects_table(p)?, a.q.unwrap_or(0.1)),
        None => (
            simulate_toy(&a.output_dir, &a.toy, a.seed, a.render_slice)?,
            a.q.unwrap_or(0.05),
        ),
    };
    let start = Instant::now();
    let analysis = Analysis::run(&table, &a.em.options(a.seed), q)?;
    eprintln!("fitted and tested {} voxels in {:.1?}", table.n_voxels(), start.elapsed());
    write_analysis(&a.output_dir, "parameter_map.csv", &table, &analysis, a.render_slice)
}

fn regions(a: &RegionsArgs) -> Result<(), Error> {
    let table = read_effects_table(&a.input)?;
    let opts = a.em.options(a.seed);
    let mut agreement = Vec::new();
    for (stat, name) in [(Statistic::T, "t"), (Statistic::Prevalence, "prevalence")] {
        let map = statistic_map(&table, stat, &opts)?;
        let regions = label_components(&threshold_map(&map, a.active_fraction)?);
        write_text(&a.output_dir.join(format!("regions_{name}.csv")), &regions_csv(&regions))?;
        let s = summarize_regions(&regions);
        eprintln!(
            "{name}: {} regions, {} singletons, median complexity {}",
            s.n_regions,
            s.n_singletons,
            s.median_complexity.map_or("n/a".into(), |m| format!("{m:.3}"))
        );
        if a.splits > 0 {
            let d = split_half_agreement(&table, stat, a.active_fraction, a.splits, a.seed, &opts)?;
            eprintln!("{name}: mean split-half Dice {:.3}", d.iter().sum::<f64>() / d.len() as f64);
            agreement.extend(d.into_iter().enumerate().map(|(k, v)| (k, stat, v)));
        }
    }
    write_text(&a.output_dir.join("agreement.csv"), &agreement_csv(&agreement))
}

fn gof(a: &GofArgs) -> Result<(), Error> {
    let table = read_effects_table(&a.input)?;
    let families = match &a.families {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<CandidateFamily>())
            .collect::<Result<Vec<_>, _>>()?,
        None => CandidateFamily::ALL.to_vec(),
    };
    let res = gof_compare(&table, &families, a.seed, &a.em.options(a.seed))?;
    write_text(&a.output_dir.join("gof_ks.csv"), &res.to_csv())?;
    write_text(&a.output_dir.join("gof_summary.csv"), &res.summary_csv())?;
    for s in res.ranking() {
        eprintln!("{:<26} median KS {:.4} ({} missing)", s.family.name(), s.median, s.n_missing);
    }
    Ok(())
}

fn are(a: &AreArgs) -> Result<(), Error> {
    let spec = a.nuisance.spec();
    let (ct, cw) = (efficacy_t(&spec)?, efficacy_signed_rank(&spec)?);
    let e = pitman_are(&spec)?;
    eprintln!("c_t = {ct:.6}, c_w = {cw:.6}, ARE(signed-rank vs t) = {e:.6}");
    if let Some(dir) = &a.output_dir {
        write_text(&dir.join("are.csv"), &format!("c_t,c_w,are\n{ct},{cw},{e}\n"))?;
    }
    Ok(())
}

fn power(a: &PowerArgs) -> Result<(), Error> {
    let spec = a.nuisance.spec();
    let points = power_curve_mc(&spec, a.n, &a.p_grid, a.alpha, a.reps, a.seed)?;
    write_text(&a.output_dir.join("power.csv"), &power_csv(&points))?;
    for p in &points {
        eprintln!(
            "p = {:<5} t {:.3} +/- {:.3}   signed-rank {:.3} +/- {:.3}",
            p.p, p.power_t, p.se_t, p.power_wilcoxon, p.se_wilcoxon
        );
    }
    Ok(())
}
