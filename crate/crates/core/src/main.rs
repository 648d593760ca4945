//! Command-line surface: validate, featurize, evaluate, synth.
//!
//! Exit codes: 0 success, 1 validation failure, 2 protocol/config error,
//! 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use behavekit::eval::{self, PipelineConfig, SubjectRow};
use behavekit::report;
use behavekit::session;
use behavekit::synth;
use behavekit::Error;

#[derive(Parser)]
#[command(name = "behavekit", version, about = "Behavioral feature extraction and two-stage SVM evaluation for face/head tracking cohorts")]
struct Cli {
    /// Worker threads for fold/candidate parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Validate every session named by a cohort index.
    Validate {
        #[arg(long)]
        cohort: PathBuf,
    },
    /// Featurize a cohort into an N x 2976 feature-matrix CSV.
    Featurize {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the two-stage leave-one-subject-out evaluation.
    Evaluate {
        /// Cohort index (featurized on the fly) ...
        #[arg(long, conflicts_with = "features")]
        cohort: Option<PathBuf>,
        /// ... or a cached feature-matrix CSV.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config JSON (selection, grid, folds).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides both the selection fold seed and the grid seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        /// Leaky mode: feature selection once on all data, labeled in output.
        #[arg(long)]
        paper_mode: bool,
    },
    /// Generate a synthetic cohort.
    Synth {
        /// Generator config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn cmd_validate(index: &Path) -> Result<i32, Error> {
    let entries = session::read_cohort_index(index)?;
    let mut failures = 0usize;
    let mut io_errors = 0usize;
    for entry in &entries {
        match session::load_session(&entry.manifest_path, &entry.frames_path) {
            Ok(rec) => {
                if rec.manifest.subject_id != entry.subject_id {
                    failures += 1;
                    println!(
                        "FAIL {}: manifest subject_id {:?} does not match index",
                        entry.subject_id, rec.manifest.subject_id
                    );
                } else {
                    println!("PASS {}", entry.subject_id);
                }
            }
            Err(e) => {
                if matches!(e, Error::Io { .. }) {
                    io_errors += 1;
                } else {
                    failures += 1;
                }
                println!("FAIL {}: {}", entry.subject_id, e);
            }
        }
    }
    println!(
        "{} of {} sessions valid",
        entries.len() - failures - io_errors,
        entries.len()
    );
    Ok(if io_errors > 0 {
        3
    } else if failures > 0 {
        1
    } else {
        0
    })
}

fn featurize_cohort(index: &Path) -> Result<Vec<SubjectRow>, Error> {
    let cohort = session::load_cohort(index)?;
    let mut rows = Vec::with_capacity(cohort.sessions.len());
    for s in &cohort.sessions {
        let fv = behavekit::features::assemble(s)?;
        rows.push(SubjectRow {
            subject_id: s.manifest.subject_id.clone(),
            group: s.manifest.group,
            features: fv.values,
        });
    }
    rows.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(rows)
}

fn cmd_featurize(index: &Path, out: &Path) -> Result<i32, Error> {
    let rows = featurize_cohort(index)?;
    report::write_text(out, &report::write_feature_matrix(&rows))?;
    println!("wrote {} subjects x {} features to {}", rows.len(), behavekit::features::FEATURE_LEN, out.display());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    cohort: Option<&Path>,
    features: Option<&Path>,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    stage: StageArg,
    paper_mode: bool,
) -> Result<i32, Error> {
    let dataset = match (features, cohort) {
        (Some(path), _) => report::read_feature_matrix(&read_to_string(path)?)?,
        (None, Some(index)) => featurize_cohort(index)?,
        (None, None) => {
            return Err(Error::Format(
                "evaluate needs --features or --cohort".into(),
            ))
        }
    };
    let mut cfg: PipelineConfig = match config {
        Some(path) => serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.selection.fold_seed = seed;
        cfg.grid_seed = seed;
    }
    if paper_mode {
        cfg.paper_mode = true;
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_json = serde_json::to_string(&cfg).expect("config serializes");

    let stages: Vec<eval::StageSpec> = match stage {
        StageArg::One => vec![eval::stage1()],
        StageArg::Two => vec![eval::stage2()],
        StageArg::Both => vec![eval::stage1(), eval::stage2()],
    };
    let mut tables = String::new();
    let mut failed = false;
    for spec in &stages {
        match eval::loso(&dataset, spec, &cfg) {
            Ok(rep) => {
                let top = eval::top_features(&rep.fold_details, 10);
                let artifact = report::EvaluationArtifact {
                    config: &cfg,
                    seed: cfg.selection.fold_seed,
                    report: &rep,
                    top_features: top.clone(),
                };
                let json = serde_json::to_string_pretty(&artifact)
                    .expect("report serializes");
                report::write_text(&out.join(format!("report_{}.json", spec.name)), &json)?;
                report::write_text(
                    &out.join(format!("scatter_{}.csv", spec.name)),
                    &report::scatter_csv(&dataset, &rep, &top, &config_json),
                )?;
                report::write_text(
                    &out.join(format!("scatter_{}.svg", spec.name)),
                    &report::scatter_svg(&dataset, &rep, &top, &config_json),
                )?;
                let table = report::render_table(&rep);
                print!("{table}");
                tables.push_str(&table);
                tables.push('\n');
            }
            Err(e) => {
                failed = true;
                let msg = format!("{}: {e}\n", spec.name);
                eprint!("{msg}");
                tables.push_str(&msg);
            }
        }
    }
    report::write_text(&out.join("tables.txt"), &tables)?;
    Ok(if failed { 2 } else { 0 })
}

fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<i32, Error> {
    let mut cfg: synth::GeneratorConfig = match config {
        Some(path) => serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
        None => synth::GeneratorConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let cohort = synth::generate(&cfg)?;
    if cohort.sessions.is_empty() {
        eprintln!("warning: config requests zero subjects, writing an empty cohort");
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut index = Vec::new();
    for s in &cohort.sessions {
        let id = &s.manifest.subject_id;
        let manifest_name = format!("{id}.manifest.json");
        let frames_name = format!("{id}.frames.jsonl");
        report::write_text(&out.join(&manifest_name), &s.manifest.to_json())?;
        let mut stream = String::new();
        for frame in &s.frames {
            stream.push_str(&frame.to_json_line());
            stream.push('\n');
        }
        report::write_text(&out.join(&frames_name), &stream)?;
        index.push(session::CohortEntry {
            subject_id: id.clone(),
            manifest_path: PathBuf::from(manifest_name),
            frames_path: PathBuf::from(frames_name),
        });
    }
    report::write_text(
        &out.join("cohort.json"),
        &serde_json::to_string_pretty(&index).expect("index serializes"),
    )?;
    report::write_text(
        &out.join("generator_config.json"),
        &serde_json::to_string_pretty(&cfg).expect("config serializes"),
    )?;
    let mut by_group = std::collections::BTreeMap::new();
    for s in &cohort.sessions {
        *by_group.entry(s.manifest.group).or_insert(0usize) += 1;
    }
    let summary: Vec<String> = by_group.iter().map(|(g, n)| format!("{g}: {n}")).collect();
    println!(
        "generated {} subjects ({}) with seed {} into {}",
        cohort.sessions.len(),
        summary.join(", "),
        cfg.seed,
        out.display()
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<i32, Error> {
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match cli.command {
        Command::Validate { cohort } => cmd_validate(&cohort),
        Command::Featurize { cohort, out } => cmd_featurize(&cohort, &out),
        Command::Evaluate {
            cohort,
            features,
            out,
            config,
            seed,
            stage,
            paper_mode,
        } => cmd_evaluate(
            cohort.as_deref(),
            features.as_deref(),
            &out,
            config.as_deref(),
            seed,
            stage,
            paper_mode,
        ),
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
