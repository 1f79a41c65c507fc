//! `stkit` command line: synthesize scenario data, process trials into the
//! cohort table, and run the statistics battery.
//!
//! Data exclusions are report content and exit 0; only malformed inputs and
//! I/O failures exit nonzero.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use stkit::config::{FilterOrder, RunConfig};
use stkit::events::parse_overrides;
use stkit::report::{box_stats_by_group, render_box_doc, render_report, svg::boxplot_svg};
use stkit::stats::run_battery;
use stkit::synth::cohort::{generate_cohort, parse_spec_file, write_cohort, SynthSpec};
use stkit::synth::generate_trial;
use stkit::table;

#[derive(Parser)]
#[command(name = "stkit", version, about = "Sensing-time analytics for hazard-perception trials")]
struct Cli {
    /// Key = value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigFlags {
    /// Consecutive detection frames required for hazard onset.
    #[arg(long, global = true)]
    debounce_frames: Option<usize>,
    /// Minimum detector confidence.
    #[arg(long, global = true)]
    conf_min: Option<f64>,
    /// Dilation of target boxes in the gaze hit test, pixels.
    #[arg(long, global = true)]
    gaze_radius_px: Option<f64>,
    /// Longest gaze dropout held forward, milliseconds.
    #[arg(long, global = true)]
    max_gap_ms: Option<i64>,
    /// Sensing times at or above this are misses, milliseconds.
    #[arg(long, global = true)]
    max_st_ms: Option<f64>,
    /// Outlier cutoff multiplier (q3 + k * IQR).
    #[arg(long, global = true)]
    iqr_k: Option<f64>,
    /// Confidence level for the Tukey intervals.
    #[arg(long, global = true)]
    conf_level: Option<f64>,
    /// Significance threshold for the linear-model terms.
    #[arg(long, global = true)]
    glm_alpha: Option<f64>,
    /// Timestamp resolution for the uncertainty block, milliseconds.
    #[arg(long, global = true)]
    resolution_ms: Option<f64>,
    /// Validity filter order: miss_first or iqr_first.
    #[arg(long, global = true)]
    filter_order: Option<String>,
    /// Seed override for synthetic generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trial or cohort files from a scenario spec.
    Synth {
        /// Scenario spec file (kind = trial or kind = cohort).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Process trials and append their rows to the cohort table.
    Trial {
        /// Trial manifest file(s); repeat the flag for batches.
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// Manual corrections CSV (trial_id,field,value,reason).
        #[arg(long)]
        overrides: Option<PathBuf>,
        /// Cohort table to append to (created when absent).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the statistics battery over a cohort table.
    Cohort {
        #[arg(long)]
        table: Option<PathBuf>,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the table with miss/outlier statuses assigned.
        #[arg(long)]
        annotated_table: Option<PathBuf>,
    },
    /// Box statistics per group, with an optional SVG plot.
    Report {
        #[arg(long)]
        table: Option<PathBuf>,
        /// Box-stats document; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG box plot path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let f = &cli.flags;
    if let Some(v) = f.debounce_frames {
        cfg.debounce_frames = v;
    }
    if let Some(v) = f.conf_min {
        cfg.conf_min = v;
    }
    if let Some(v) = f.gaze_radius_px {
        cfg.gaze_radius_px = v;
    }
    if let Some(v) = f.max_gap_ms {
        cfg.max_gap_ms = v;
    }
    if let Some(v) = f.max_st_ms {
        cfg.max_st_ms = v;
    }
    if let Some(v) = f.iqr_k {
        cfg.iqr_k = v;
    }
    if let Some(v) = f.conf_level {
        cfg.conf_level = v;
    }
    if let Some(v) = f.glm_alpha {
        cfg.glm_alpha = v;
    }
    if let Some(v) = f.resolution_ms {
        cfg.resolution_ms = v;
    }
    if let Some(v) = &f.filter_order {
        cfg.filter_order = FilterOrder::parse(v)
            .with_context(|| format!("--filter-order must be miss_first or iqr_first, got `{v}`"))?;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required_path(
    flag: Option<PathBuf>,
    fallback: &Option<String>,
    what: &str,
) -> Result<PathBuf> {
    match flag.or_else(|| fallback.as_ref().map(PathBuf::from)) {
        Some(p) => Ok(p),
        None => bail!("no {what} given: pass the flag or set it in the config file"),
    }
}

// Stdout may be a closed pipe (e.g. piped into head); that is not an error
// worth failing a batch run over.
fn say(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, contents)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(contents.as_bytes());
            Ok(())
        }
    }
}

fn cmd_synth(cfg: &RunConfig, seed_flag: Option<u64>, spec: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("reading spec {}", spec.display()))?;
    match parse_spec_file(&text)? {
        SynthSpec::Trial(mut scenario) => {
            if let Some(seed) = seed_flag {
                scenario.seed = seed;
            } else if cfg.seed != 0 {
                scenario.seed = cfg.seed;
            }
            let trial = generate_trial(&scenario)?;
            let manifest = trial.write_to_dir(out)?;
            say(format_args!("{}", manifest.display()));
        }
        SynthSpec::Cohort(mut cohort) => {
            if let Some(seed) = seed_flag {
                cohort.seed = seed;
            } else if cfg.seed != 0 {
                cohort.seed = cfg.seed;
            }
            let trials = generate_cohort(&cohort)?;
            let manifests = write_cohort(&trials, out)?;
            say(format_args!("{} trials under {}", manifests.len(), out.display()));
        }
    }
    Ok(())
}

fn cmd_trial(
    cfg: &RunConfig,
    manifests: &[PathBuf],
    overrides_path: Option<&Path>,
    table_path: &Path,
) -> Result<()> {
    let overrides = match overrides_path {
        Some(p) => parse_overrides(p)?,
        None => Vec::new(),
    };
    // Trials are independent; process them in parallel and reduce in a
    // deterministic order (append_rows sorts by trial id on write).
    let outcomes: Vec<Result<stkit::TrialOutcome>> = manifests
        .par_iter()
        .map(|m| {
            stkit::run_trial_files(m, &overrides, cfg)
                .with_context(|| format!("processing {}", m.display()))
        })
        .collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut audit = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        for d in &outcome.diagnostics {
            eprintln!("{}: {d}", outcome.record.trial_id);
        }
        say(format_args!(
            "{} {} st_ms={}",
            outcome.record.trial_id,
            outcome.record.status,
            outcome.record.st_ms.map_or_else(|| "-".into(), |v| v.to_string())
        ));
        audit.extend(outcome.audit);
        rows.push(outcome.record);
    }
    table::append_rows(table_path, &rows)?;
    table::append_audit(&table::audit_path(table_path), &audit)?;
    Ok(())
}

fn cmd_cohort(
    cfg: &RunConfig,
    table_path: &Path,
    out: Option<&Path>,
    annotated: Option<&Path>,
) -> Result<()> {
    let records = table::read_table(table_path)?;
    if records.is_empty() {
        bail!("cohort table {} has no rows", table_path.display());
    }
    let battery = run_battery(&records, cfg)?;
    let sidecar = table::read_audit(&table::audit_path(table_path))?;
    let report = render_report(&battery, &sidecar, cfg);
    emit(out, &report)?;
    if let Some(path) = annotated {
        table::write_table(path, &battery.annotated)?;
    }
    Ok(())
}

fn cmd_report(
    cfg: &RunConfig,
    table_path: &Path,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<()> {
    let records = table::read_table(table_path)?;
    if records.is_empty() {
        bail!("cohort table {} has no rows", table_path.display());
    }
    let boxes = box_stats_by_group(&records, cfg.iqr_k)?;
    emit(out, &render_box_doc(&boxes))?;
    if let Some(path) = svg {
        std::fs::write(path, boxplot_svg(&boxes))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Synth { spec, out } => {
            let out = required_path(out.clone(), &cfg.output, "output directory")?;
            cmd_synth(&cfg, cli.flags.seed, spec, &out)
        }
        Command::Trial { manifest, overrides, table } => {
            let table = required_path(table.clone(), &cfg.output, "cohort table path")?;
            cmd_trial(&cfg, manifest, overrides.as_deref(), &table)
        }
        Command::Cohort { table, out, annotated_table } => {
            let table = required_path(table.clone(), &cfg.input, "cohort table path")?;
            cmd_cohort(&cfg, &table, out.as_deref(), annotated_table.as_deref())
        }
        Command::Report { table, out, svg } => {
            let table = required_path(table.clone(), &cfg.input, "cohort table path")?;
            cmd_report(&cfg, &table, out.as_deref(), svg.as_deref())
        }
    }
}
