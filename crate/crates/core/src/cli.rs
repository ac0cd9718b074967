//! The `ttlab` command line: data generation, the inversion pipelines,
//! dataset comparison, simplicity checks and grid-refinement sweeps.
//!
//! Every subcommand writes a JSON report into the output directory and
//! prints its summary table. Exit status 0 means every criterion passed,
//! 1 that some criterion failed, 2 a configuration or input error and 3 a
//! numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, MetricSpec, Pipeline};
use crate::error::{Error, Result};
use crate::experiment::{
    isometry_criteria, isometry_sweep, lens_checks, lens_criteria, pullback_relation, random_pairs,
    reconstruction_check, reconstruction_criteria, split_checks, split_criteria, stability,
    stability_criteria, transport_sources,
};
use crate::geodesic::{
    lift_inward, simplicity_report, trace, BoundaryVector, ConnectOptions, TraceOptions,
    TraceStart, Verdict,
};
use crate::inversion::{
    diffeo_invariant_distance, hausdorff_distance, recover_lens, DataCloud, Mode, RecoveredLensData,
};
use crate::metric::{MetricModel, Point};
use crate::report::{hex_sha256, Criterion, Report};
use crate::survey::{
    boundary_fans, load_dataset, make_broken_scattering_data, make_travel_time_data,
    sample_sources, save_dataset, save_sealed, BoundaryGrid, BrokenScatteringTable, Dataset,
    Encoding, Generated, SurveyOptions, TravelTimeData, TravelTimeDifferenceData,
};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "TTLAB_WORKERS";

/// Random subsamples and their size in the exact Gromov–Hausdorff check.
const GH_SUBSAMPLES: usize = 50;
const GH_SUBSAMPLE_SIZE: usize = 6;
/// Random crossing pairs checked per broken scattering table.
const SPLIT_PAIRS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "ttlab",
    version,
    about = "Travel-time inverse problems on simple metrics of the disc"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that replace the matching configuration fields.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Experiment configuration (JSON); defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel library work.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Directory for reports and datasets.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Metric preset name or an inline JSON metric descriptor.
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Second metric, as for `--metric`.
    #[arg(long, global = true)]
    pub second_metric: Option<String>,
    /// Number of boundary angles.
    #[arg(long, short = 'm', global = true)]
    pub boundary_angles: Option<usize>,
    /// Number of interior sources.
    #[arg(long, global = true)]
    pub sources: Option<usize>,
    /// Number of sources placed on the boundary circle.
    #[arg(long, global = true)]
    pub boundary_sources: Option<usize>,
    /// Seed of the source layout and of random pair draws.
    #[arg(long, global = true)]
    pub source_seed: Option<u64>,
    /// Seed of the order in which functions are stored.
    #[arg(long, global = true)]
    pub shuffle_seed: Option<u64>,
    /// Boundary angles of the direction grid.
    #[arg(long, global = true)]
    pub m_theta: Option<usize>,
    /// Tangential components of the direction grid.
    #[arg(long, global = true)]
    pub m_mu: Option<usize>,
    /// Largest tangential component `|μ|` of the direction grid.
    #[arg(long, global = true)]
    pub mu_max: Option<f64>,
    /// Random source pairs measured by `sweep`.
    #[arg(long, global = true)]
    pub sweep_pairs: Option<usize>,
    /// Integrator step of the boundary fans.
    #[arg(long, global = true)]
    pub fan_step: Option<f64>,
    /// Dataset encoding: `text` or `binary`.
    #[arg(long, global = true, value_parser = parse_encoding)]
    pub encoding: Option<Encoding>,
}

fn parse_encoding(s: &str) -> std::result::Result<Encoding, String> {
    match s {
        "text" => Ok(Encoding::Text),
        "binary" => Ok(Encoding::Binary),
        other => Err(format!(
            "unknown encoding `{other}`; expected text or binary"
        )),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate datasets and their sealed source files.
    Simulate {
        /// Also tabulate the broken scattering relation.
        #[arg(long)]
        bsr: bool,
        /// Export this many geodesics of a boundary fan as columnar traces.
        #[arg(long, default_value_t = 0)]
        traces: usize,
    },
    /// Run a matching pipeline and check its criteria.
    Invert {
        #[arg(value_enum)]
        pipeline: Pipeline,
    },
    /// Distances between two dataset files.
    Compare { first: PathBuf, second: PathBuf },
    /// Simplicity report of the metric.
    CheckSimple,
    /// Grid-refinement study of the sup-norm isometry.
    Sweep {
        /// Sweep every zoo metric instead of the configured one.
        #[arg(long)]
        zoo: bool,
    },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Simulate { .. } => "simulate".into(),
            Command::Invert { pipeline } => format!("invert-{}", pipeline_name(*pipeline)),
            Command::Compare { .. } => "compare".into(),
            Command::CheckSimple => "check-simple".into(),
            Command::Sweep { .. } => "sweep".into(),
        }
    }
}

fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::Ttd => "ttd",
        Pipeline::Ttdd => "ttdd",
        Pipeline::Bsr => "bsr",
    }
}

fn metric_spec(s: &str) -> Result<MetricSpec> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s)
            .map_err(|e| Error::Config(format!("invalid metric descriptor: {e}")))
    } else {
        Ok(MetricSpec::Preset(s.to_string()))
    }
}

/// The configuration file (or the defaults) with every given flag applied.
pub fn resolve_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &o.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = &o.metric {
        cfg.metric = metric_spec(v)?;
    }
    if let Some(v) = &o.second_metric {
        cfg.second_metric = Some(metric_spec(v)?);
    }
    macro_rules! set {
        ($flag:ident => $($field:ident).+) => {
            if let Some(v) = o.$flag {
                cfg.$($field).+ = v;
            }
        };
    }
    set!(boundary_angles => boundary_angles);
    set!(sources => sources);
    set!(boundary_sources => source_options.boundary);
    set!(source_seed => source_seed);
    set!(shuffle_seed => shuffle_seed);
    set!(m_theta => direction_grid.m_theta);
    set!(m_mu => direction_grid.m_mu);
    set!(mu_max => direction_grid.mu_max);
    set!(sweep_pairs => sweep_pairs);
    set!(fan_step => fan.step);
    set!(encoding => encoding);
    cfg.validate()?;
    Ok(cfg)
}

/// Exit status of a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Shape(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Domain(_)
        | Error::InvalidDiffeo(_) => 2,
        Error::Numeric(_)
        | Error::TrappedGeodesic { .. }
        | Error::ShootingFailure { .. }
        | Error::IncompleteTable(..)
        | Error::AmbiguousScattering { .. } => 3,
    }
}

/// Parses the arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("ttlab: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command on the worker pool and saves its report.
pub fn run(cli: &Cli) -> Result<Report> {
    let cfg = resolve_config(&cli.overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.overrides.workers {
        if n == 0 {
            return Err(Error::Config("worker count must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let name = cli.command.name();
    let report = pool.install(|| match &cli.command {
        Command::Simulate { bsr, traces } => simulate(&cfg, *bsr, *traces),
        Command::Invert { pipeline } => invert(&cfg, *pipeline),
        Command::Compare { first, second } => compare(&cfg, first, second),
        Command::CheckSimple => check_simple(&cfg),
        Command::Sweep { zoo } => sweep(&cfg, *zoo),
    })?;
    report.save(&cfg.output_dir.join(format!("{name}.json")))?;
    Ok(report)
}

fn survey_sources(cfg: &ExperimentConfig) -> Vec<Point> {
    sample_sources(cfg.source_seed, cfg.sources, &cfg.source_options)
}

fn travel_time_data(
    cfg: &ExperimentConfig,
    model: &MetricModel,
    sources: &[Point],
    seed: u64,
) -> Result<Generated<TravelTimeData>> {
    let opts = SurveyOptions {
        seed,
        fan: cfg.fan.clone(),
    };
    make_travel_time_data(
        model,
        sources,
        &BoundaryGrid::new(cfg.boundary_angles)?,
        &opts,
    )
}

/// The second survey: the second metric over transported sources when it
/// is a pullback of the first, over the same sources otherwise, and a
/// reshuffled copy of the first survey when no second metric is given.
fn second_survey(
    cfg: &ExperimentConfig,
    a: &MetricModel,
    sources: &[Point],
) -> Result<(String, MetricModel, Vec<Point>)> {
    match cfg.second_model()? {
        None => Ok(("reshuffled copy".into(), a.clone(), sources.to_vec())),
        Some(b) => {
            let moved = match pullback_relation(a, &b) {
                Some(phi) => transport_sources(&phi, sources)?,
                None => sources.to_vec(),
            };
            Ok((describe(&b), b, moved))
        }
    }
}

fn describe(m: &MetricModel) -> String {
    crate::config::zoo()
        .into_iter()
        .find(|(_, z)| z == m)
        .map_or_else(|| "custom metric".to_string(), |(n, _)| n.to_string())
}

fn simulate(cfg: &ExperimentConfig, bsr: bool, traces: usize) -> Result<Report> {
    let mut report = Report::new("simulate", cfg);
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let a = cfg.metric_model()?;
    let sources = survey_sources(cfg);
    let mut surveys = vec![("a", a.clone(), sources.clone())];
    if cfg.second_model()?.is_some() {
        let (_, b, moved) = second_survey(cfg, &a, &sources)?;
        surveys.push(("b", b, moved));
    }
    let mut files = Vec::new();
    for (tag, model, pts) in &surveys {
        let g = travel_time_data(cfg, model, pts, cfg.shuffle_seed)?;
        let ttdd = TravelTimeDifferenceData::from_travel_time_data(&g.data);
        let mut write = |name: String, d: Dataset| -> Result<()> {
            save_dataset(&d, dir.join(&name), cfg.encoding)?;
            files.push(name);
            Ok(())
        };
        write(format!("{tag}.ttd"), Dataset::TravelTime(g.data))?;
        write(format!("{tag}.ttdd"), Dataset::TravelTimeDifference(ttdd))?;
        if bsr {
            let t = make_broken_scattering_data(model, &cfg.direction_grid, &cfg.bsr)?;
            report.metric(&format!("{tag}.bsr_entries"), t.entry_count());
            write(format!("{tag}.bsr"), Dataset::BrokenScattering(t))?;
        }
        let sealed = format!("{tag}.sources.json");
        save_sealed(&g.sealed, dir.join(&sealed))?;
        files.push(sealed);
        if traces > 0 {
            files.extend(export_traces(
                model,
                traces,
                cfg.direction_grid.mu_max,
                dir,
                tag,
            )?);
        }
    }
    let mut listing = String::new();
    let mut sums = std::collections::BTreeMap::new();
    for f in &files {
        let h = hex_sha256(&std::fs::read(dir.join(f))?);
        listing.push_str(&format!("{h}  {f}\n"));
        sums.insert(f.clone(), h);
    }
    std::fs::write(dir.join("checksums.sha256"), listing)?;
    report.metric("checksums", sums);
    report.metric("sources", sources.len());
    Ok(report)
}

/// Geodesics leaving the boundary point at angle 0 with tangential
/// components spread over `[−μ_max, μ_max]`, one columnar file each.
fn export_traces(
    model: &MetricModel,
    count: usize,
    mu_max: f64,
    dir: &Path,
    tag: &str,
) -> Result<Vec<String>> {
    let tdir = dir.join("traces");
    std::fs::create_dir_all(&tdir)?;
    let mut names = Vec::new();
    for k in 0..count {
        let mu = if count == 1 {
            0.0
        } else {
            -mu_max + 2.0 * mu_max * k as f64 / (count - 1) as f64
        };
        let bv = BoundaryVector::new(0.0, mu)?;
        let tr = trace(
            model,
            lift_inward(model, bv)?,
            TraceStart::Boundary(bv),
            &TraceOptions::default(),
        )?;
        let name = format!("traces/{tag}_{k:03}.txt");
        std::fs::write(dir.join(&name), tr.to_columns())?;
        names.push(name);
    }
    Ok(names)
}

fn invert(cfg: &ExperimentConfig, pipeline: Pipeline) -> Result<Report> {
    match pipeline {
        Pipeline::Ttd | Pipeline::Ttdd => invert_matching(cfg, pipeline),
        Pipeline::Bsr => invert_bsr(cfg),
    }
}

fn cloud_of(data: &TravelTimeData, pipeline: Pipeline) -> DataCloud {
    match pipeline {
        Pipeline::Ttdd => {
            DataCloud::from_difference_data(&TravelTimeDifferenceData::from_travel_time_data(data))
        }
        _ => DataCloud::from_travel_time_data(data),
    }
}

fn invert_matching(cfg: &ExperimentConfig, pipeline: Pipeline) -> Result<Report> {
    let mut report = Report::new(&format!("invert {}", pipeline_name(pipeline)), cfg);
    let a = cfg.metric_model()?;
    let sources = survey_sources(cfg);
    let (b_name, b, b_sources) = second_survey(cfg, &a, &sources)?;
    let ga = travel_time_data(cfg, &a, &sources, cfg.shuffle_seed)?;
    let gb = travel_time_data(cfg, &b, &b_sources, cfg.shuffle_seed.wrapping_add(1))?;
    let (ca, cb) = (cloud_of(&ga.data, pipeline), cloud_of(&gb.data, pipeline));
    let subject = format!("{} vs {b_name}", describe(&a));

    let s = stability(
        &ca,
        &cb,
        &cfg.matching,
        GH_SUBSAMPLES,
        GH_SUBSAMPLE_SIZE,
        cfg.source_seed,
    )?;
    report.criteria(stability_criteria(&subject, &s, cfg.tolerances.stability));
    let phi = pullback_relation(&a, &b);
    let same_manifold =
        cfg.second_metric.is_none() || phi.as_ref().is_some_and(|p| p.fixes_boundary());
    if same_manifold {
        report.criterion(Criterion::at_most(
            "C3",
            "Hausdorff distance under gauge",
            &subject,
            s.hausdorff,
            cfg.tolerances.gauge,
        ));
        if s.correspondence.boundary_check.boundary_functions > 0 {
            report.criterion(Criterion::holds(
                "C3",
                "boundary sources matched in place",
                &subject,
                s.correspondence.boundary_check.passed(),
            ));
        }
    }
    if s.correspondence.flagged {
        report.warn(format!(
            "correspondence distortion {:.3e} exceeds the flag level {:.1e}",
            s.correspondence.distortion, cfg.matching.distortion_flag
        ));
    }
    for w in &s.inconsistency {
        report.warn(w.clone());
    }
    // Sealed sources are read only here, after matching, to score it.
    let hits = s
        .correspondence
        .pairs
        .iter()
        .filter(|&&(i, j)| {
            let (p, q) = (ga.sealed.sources[i], gb.sealed.sources[j]);
            let k = b_sources.iter().position(|x| *x == q);
            k.is_some_and(|k| sources[k] == p)
        })
        .count();
    report.metric("hausdorff", s.hausdorff);
    report.metric("distortion", s.correspondence.distortion);
    report.metric("gh_upper_bound", s.gh_bound);
    report.metric("gh_subsample_excess", s.subsample_excess);
    report.metric(
        "sealed_match_fraction",
        hits as f64 / s.correspondence.pairs.len().max(1) as f64,
    );
    report.metric("correspondence", &s.correspondence);
    Ok(report)
}

fn lens_data(table: &BrokenScatteringTable, cfg: &ExperimentConfig) -> RecoveredLensData {
    recover_lens(table, &cfg.lens)
}

fn invert_bsr(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new("invert bsr", cfg);
    let grid = BoundaryGrid::new(cfg.boundary_angles)?;
    let a = cfg.metric_model()?;
    let a_name = describe(&a);
    let ta = make_broken_scattering_data(&a, &cfg.direction_grid, &cfg.bsr)?;
    let la = lens_data(&ta, cfg);
    let tol = &cfg.tolerances;

    let lens = lens_checks(&a, &ta, &la)?;
    report.criteria(lens_criteria(
        &a_name,
        &lens,
        tol.exit_time,
        tol.lens_resolved,
    ));
    let split = split_checks(&a, &ta, &la, SPLIT_PAIRS, cfg.source_seed)?;
    report.criteria(split_criteria(&a_name, &split, 1e-5, SPLIT_PAIRS));
    let rec = reconstruction_check(&a, &ta, &la, &grid, &cfg.reconstruction, &cfg.fan)?;
    report.criteria(reconstruction_criteria(
        &a_name,
        &rec,
        tol.reconstruction,
        tol.coverage_gap,
    ));
    if let Some(w) = rec.reconstruction.coverage.warning() {
        report.warn(w);
    }
    report.metric("a.lens", &la);
    report.metric("a.lens_checks", &lens);
    report.metric("a.splits", &split);
    report.metric("a.coverage", &rec.reconstruction.coverage);
    report.metric("a.reconstruction_hausdorff", rec.hausdorff);
    report.metric("a.labels", &rec.reconstruction.labels);

    if let Some(b) = cfg.second_model()? {
        let b_name = describe(&b);
        let tb = make_broken_scattering_data(&b, &cfg.direction_grid, &cfg.bsr)?;
        let lb = lens_data(&tb, cfg);
        let lens = lens_checks(&b, &tb, &lb)?;
        report.criteria(lens_criteria(
            &b_name,
            &lens,
            tol.exit_time,
            tol.lens_resolved,
        ));
        let split = split_checks(&b, &tb, &lb, SPLIT_PAIRS, cfg.source_seed)?;
        report.criteria(split_criteria(&b_name, &split, 1e-5, SPLIT_PAIRS));
        let rb = crate::inversion::bsr_to_travel_time_data(&tb, &lb, &grid, &cfg.reconstruction)?;
        let h = hausdorff_distance(&DataCloud::from_travel_time_data(&rb.data), &rec.forward)?;
        let subject = format!("{b_name} against {a_name}");
        report.criterion(Criterion::at_most(
            "C8",
            "receivers in coverage gaps",
            &b_name,
            rb.coverage.gap_fraction(),
            tol.coverage_gap,
        ));
        if pullback_relation(&a, &b).is_some_and(|p| p.fixes_boundary()) {
            report.criterion(Criterion::at_most(
                "C9",
                "reconstruction against data of g",
                &subject,
                h,
                tol.reconstruction,
            ));
        }
        if let Some(w) = rb.coverage.warning() {
            report.warn(w);
        }
        report.metric("b.lens_checks", &lens);
        report.metric("b.splits", &split);
        report.metric("b.coverage", &rb.coverage);
        report.metric("b.hausdorff_to_a_data", h);
    }
    Ok(report)
}

fn load_cloud(path: &Path) -> Result<DataCloud> {
    DataCloud::from_dataset(&load_dataset(path)?)
}

fn compare(cfg: &ExperimentConfig, first: &Path, second: &Path) -> Result<Report> {
    let mut report = Report::new("compare", cfg);
    let (a, b) = (load_cloud(first)?, load_cloud(second)?);
    let subject = format!("{} vs {}", first.display(), second.display());
    let s = stability(
        &a,
        &b,
        &cfg.matching,
        GH_SUBSAMPLES,
        GH_SUBSAMPLE_SIZE,
        cfg.source_seed,
    )?;
    report.criteria(stability_criteria(&subject, &s, cfg.tolerances.stability));
    let fit = diffeo_invariant_distance(&a, &b, &cfg.diffeo)?;
    report.metric(
        "mode",
        match a.mode {
            Mode::Ttd => "ttd",
            Mode::Ttdd => "ttdd",
        },
    );
    report.metric("hausdorff", s.hausdorff);
    report.metric("distortion", s.correspondence.distortion);
    report.metric("gh_upper_bound", s.gh_bound);
    report.metric("diffeo_invariant_distance", fit.value);
    report.metric("diffeo_fit", &fit);
    report.metric("correspondence", &s.correspondence);
    for w in &s.inconsistency {
        report.warn(w.clone());
    }
    Ok(report)
}

fn check_simple(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new("check-simple", cfg);
    let model = cfg.metric_model()?;
    let r = simplicity_report(&model, &cfg.simplicity)?;
    report.criterion(Criterion::holds(
        "simple",
        "metric is simple",
        &describe(&model),
        r.verdict == Verdict::Simple,
    ));
    if r.verdict == Verdict::Inconclusive {
        report.warn("boundary curvature lies within the convexity margin; verdict inconclusive");
    }
    report.metric("min_boundary_curvature", r.min_boundary_curvature);
    report.metric("max_exit_time", r.max_exit_time);
    report.metric("simplicity", &r);
    Ok(report)
}

fn sweep(cfg: &ExperimentConfig, zoo: bool) -> Result<Report> {
    let mut report = Report::new("sweep", cfg);
    let models = if zoo {
        crate::config::zoo()
            .into_iter()
            .map(|(n, m)| (n.to_string(), m))
            .collect()
    } else {
        let m = cfg.metric_model()?;
        vec![(describe(&m), m)]
    };
    let sources = survey_sources(cfg);
    let pairs = random_pairs(sources.len(), cfg.sweep_pairs, cfg.source_seed);
    for (name, model) in models {
        let fans = boundary_fans(&model, &sources, &cfg.fan)?;
        let s = isometry_sweep(
            &model,
            &sources,
            &fans,
            &pairs,
            &cfg.sweep_grids,
            &ConnectOptions::default(),
        )?;
        report.criteria(isometry_criteria(
            &name,
            &s,
            cfg.boundary_angles,
            cfg.tolerances.isometry,
        ));
        report.metric(&format!("{name}.sweep"), &s);
    }
    Ok(report)
}
