//! Command-line driver: scene ingestion, one subcommand per pipeline stage,
//! deterministic outputs.
//!
//! Every command reads the scene from `--scene` and writes its reports under
//! `--out`. Floating-point output in delimited files carries 17 significant
//! digits; any sampled choices derive from `--seed`. Exit status is zero
//! exactly when every asserted check of the requested command passed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use torbil_core::admissible::{
    build_increment_graph, build_transition_graph, check_admissible, check_increment_graph,
    enumerate_periodic, PeriodicType,
};
use torbil_core::flow::{rotation_estimate, trace, FlowState};
use torbil_core::io;
use torbil_core::linalg;
use torbil_core::rotset::{
    convexity_experiment, proper_inclusion_check, sample_admissible_rotation_set, SampleOptions,
};
use torbil_core::scene::{escape_bound, validate_scene, Scene};
use torbil_core::varpath::{minimize_open, minimize_periodic, Endpoints};

#[derive(Parser)]
#[command(
    name = "torbil",
    about = "Billiards outside ball obstacles on the m-torus: validation, symbolic graphs, variational orbits, flow traces, rotation sets",
    version
)]
struct Cli {
    /// Scene file (JSON: m, obstacles, optional tolerance).
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for any sampled choices.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cell cutoff for graph enumerations.
    #[arg(long, global = true)]
    jmax: Option<i64>,
    /// Discrete period bound for cycle enumeration.
    #[arg(long, global = true)]
    qmax: Option<usize>,
    /// Target accuracy for the convexity experiment.
    #[arg(long, global = true, default_value_t = 0.05)]
    eps: f64,
    /// Convex weight for the convexity experiment.
    #[arg(long, global = true, default_value_t = 0.5)]
    t: f64,
    /// Cell offset for the far-flight construction.
    #[arg(long, global = true, default_value_t = 100)]
    k: i64,
    /// Reflection budget for flow traces.
    #[arg(long, global = true, default_value_t = 100)]
    nmax: usize,
    /// Time budget for flow traces.
    #[arg(long, global = true, default_value_t = 1e6)]
    tmax: f64,
    /// Which outputs to write.
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Delimited,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Delimited
    }
    fn delimited(self) -> bool {
        self != Format::Json
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the scene against the standing assumptions.
    Validate,
    /// Build the increment graph and the exact transition graph; run the
    /// structural checks (self-edges, unit-pair lemma, hub diameter are
    /// asserted; symmetry closure and edge reversal are reported).
    Graph,
    /// Enumerate periodic cycles, minimize each orbit, export rotation
    /// samples.
    Periodic,
    /// Sample the admissible rotation set: cloud, hull, margin.
    Rotset,
    /// Minimize a trajectory piece of the type in --seq between --start and
    /// --end (free-space anchors by default, boundary points with
    /// --on-boundary, free endpoints when both are omitted).
    Trajectory {
        /// Sequence file: JSON rows [k_1, ..., k_m, r].
        #[arg(long)]
        seq: PathBuf,
        /// Start point, comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Option<Vec<f64>>,
        /// End point, comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        end: Option<Vec<f64>>,
        /// Interpret --start/--end as points on the first/last obstacle
        /// boundaries instead of free-space anchors.
        #[arg(long)]
        on_boundary: bool,
    },
    /// Trace the flow from --start along --dir; export the event table and
    /// the rotation-estimate series.
    Flow {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dir: Vec<f64>,
    },
    /// Convexity experiment between an enumerated zero-period cycle and the
    /// strongest translating cycle at weight --t, accuracy --eps.
    Convexity,
    /// Proper-inclusion certificate: periodic margin delta against the
    /// far-flight sample at offset --k.
    Inclusion,
    /// Escape-bound search for rays from an obstacle center.
    Escape {
        /// Obstacle label (1-based).
        #[arg(long, default_value_t = 1)]
        label: usize,
        /// Direction-grid resolution.
        #[arg(long, default_value_t = 720)]
        resolution: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_scene(cli: &Cli) -> Result<Scene> {
    let path = cli
        .scene
        .as_ref()
        .context("--scene is required for this command")?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scene file {}", path.display()))?;
    io::scene_from_json(&text).context("parsing scene file")
}

fn write(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let path = out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Select the experiment cycles: the smallest zero-period cycle and the
/// translating cycle with the largest per-period stride.
fn experiment_cycles(
    scene: &Scene,
    j_max: i64,
    q_max: usize,
) -> Result<(PeriodicType, PeriodicType)> {
    let graph = build_transition_graph(scene, j_max);
    let (cycles, _) = enumerate_periodic(scene, &graph, q_max, Some(200_000));
    let zero = cycles
        .iter()
        .filter(|c| c.p.iter().all(|&x| x == 0))
        .min_by_key(|c| c.q)
        .context("no zero-period cycle found; raise --qmax")?;
    let translating = cycles
        .iter()
        .filter(|c| c.p.iter().any(|&x| x != 0))
        .max_by_key(|c| (c.p.iter().map(|x| x.abs()).sum::<i64>() * 1000) / c.q as i64)
        .context("no translating cycle found; raise --qmax or --jmax")?;
    Ok((zero.ptype.clone(), translating.ptype.clone()))
}

fn run(cli: &Cli) -> Result<bool> {
    let out = &cli.out;
    match &cli.command {
        Command::Validate => {
            let scene = load_scene(cli)?;
            let report = validate_scene(&scene);
            if cli.format.json() {
                write(out, "validate.json", &serde_json::to_string_pretty(&report)?)?;
            }
            for check in &report.checks {
                println!(
                    "{} {} ({})",
                    if check.passed { "pass" } else { "FAIL" },
                    check.name,
                    check.witness
                );
            }
            Ok(report.valid())
        }
        Command::Graph => {
            let scene = load_scene(cli)?;
            let j_max = cli.jmax.unwrap_or(3);
            let graph = build_increment_graph(&scene, j_max);
            let transition = build_transition_graph(&scene, j_max.min(2));
            let checks = check_increment_graph(&scene, &graph);
            if cli.format.json() {
                write(out, "increment_graph.json", &io::increment_graph_to_json(&graph))?;
                write(
                    out,
                    "transition_graph.json",
                    &io::transition_graph_to_json(&transition),
                )?;
                write(out, "graph_checks.json", &serde_json::to_string_pretty(&checks)?)?;
            }
            println!(
                "vertices {} edges {} self-edges {} unit-pair-lemma {} hub-diameter {} (max {})",
                checks.vertex_count,
                checks.edge_count,
                checks.self_edges,
                checks.unit_pair_lemma_ok,
                checks.hub_diameter_ok,
                checks.max_hub_path_len
            );
            println!(
                "reported: symmetry violations {} of {} edges; reversal violations {} of {}",
                checks.symmetry_violations,
                checks.edge_count,
                checks.reversal_violations,
                checks.reversal_checked
            );
            if graph.boundary_shell_warning {
                eprintln!(
                    "warning: vertices on the enumeration boundary; --jmax may truncate the graph"
                );
            }
            Ok(checks.self_edges == 0 && checks.unit_pair_lemma_ok && checks.hub_diameter_ok)
        }
        Command::Periodic => {
            let scene = load_scene(cli)?;
            let j_max = cli.jmax.unwrap_or(1);
            let q_max = cli.qmax.unwrap_or(4);
            let graph = build_transition_graph(&scene, j_max);
            let (cycles, truncated) = enumerate_periodic(&scene, &graph, q_max, Some(200_000));
            if truncated {
                eprintln!("warning: cycle enumeration truncated at the cap");
            }
            let mut orbits = Vec::new();
            let mut failures = 0usize;
            for cycle in &cycles {
                match minimize_periodic(&scene, &cycle.ptype) {
                    Ok(orbit) => orbits.push(orbit),
                    Err(_) => failures += 1,
                }
            }
            if cli.format.json() {
                write(out, "cycles.json", &serde_json::to_string_pretty(&cycles)?)?;
                write(out, "orbits.json", &serde_json::to_string_pretty(&orbits)?)?;
            }
            if cli.format.delimited() {
                let mut table =
                    String::from("# q  p[m]  length  rotation[m]  residual  clearance\n");
                for orbit in &orbits {
                    let mut row = format!("{}", orbit.q);
                    for p in &orbit.period_cells {
                        row.push_str(&format!(" {p}"));
                    }
                    row.push(' ');
                    row.push_str(&io::fmt17(orbit.period_length));
                    for x in &orbit.rotation_vector {
                        row.push(' ');
                        row.push_str(&io::fmt17(*x));
                    }
                    row.push(' ');
                    row.push_str(&io::fmt17(orbit.residual));
                    row.push(' ');
                    row.push_str(&io::fmt17(orbit.min_clearance));
                    table.push_str(&row);
                    table.push('\n');
                }
                write(out, "orbits.csv", &table)?;
            }
            println!(
                "{} cycles (q <= {q_max}), {} orbits accepted, {} rejected",
                cycles.len(),
                orbits.len(),
                failures
            );
            Ok(failures == 0 && !orbits.is_empty())
        }
        Command::Rotset => {
            let scene = load_scene(cli)?;
            let opts = SampleOptions {
                j_max: cli.jmax.unwrap_or(1),
                max_cycles: Some(200_000),
            };
            let q_max = cli.qmax.unwrap_or(4);
            let cloud = sample_admissible_rotation_set(&scene, q_max, &opts)?;
            if cloud.cutoff_shell_warning {
                eprintln!(
                    "warning: cycles use increments on the cell cutoff shell; raise --jmax for longer strides"
                );
            }
            if cli.format.json() {
                write(out, "rotset.json", &serde_json::to_string_pretty(&cloud)?)?;
            }
            if cli.format.delimited() {
                write(out, "cloud.csv", &io::cloud_to_table(&cloud))?;
                if let Some(hull) = io::hull_2d_to_table(&cloud) {
                    write(out, "hull.csv", &hull)?;
                }
                if let Some(hull) = io::hull_3d_to_table(&cloud) {
                    write(out, "hull_facets.csv", &hull)?;
                }
            }
            println!(
                "{} samples (q <= {q_max}), margin to the unit sphere {:.6}, {} cycles skipped",
                cloud.samples.len(),
                cloud.delta_margin,
                cloud.cycles_skipped
            );
            Ok(cloud.delta_margin > 0.0 && cloud.cycles_skipped == 0)
        }
        Command::Trajectory {
            seq,
            start,
            end,
            on_boundary,
        } => {
            let scene = load_scene(cli)?;
            let text = fs::read_to_string(seq)
                .with_context(|| format!("reading sequence file {}", seq.display()))?;
            let sequence = io::sequence_from_json(&text, scene.m)?;
            if let Some(bad) = sequence
                .entries
                .iter()
                .find(|e| e.label > scene.num_obstacles())
            {
                bail!(
                    "sequence label {} exceeds the scene's {} obstacles",
                    bad.label,
                    scene.num_obstacles()
                );
            }
            let verdict = check_admissible(&scene, &sequence);
            if !verdict.ok {
                bail!("sequence is not admissible: {:?}", verdict.violation);
            }
            let endpoints = match (start, end) {
                (Some(s), Some(e)) if *on_boundary => Endpoints::Boundary {
                    start: s.clone(),
                    end: e.clone(),
                },
                (Some(s), Some(e)) => Endpoints::Anchors {
                    start: s.clone(),
                    end: e.clone(),
                },
                (None, None) => Endpoints::Free,
                _ => bail!("--start and --end must be given together"),
            };
            let piece = minimize_open(&scene, &sequence, endpoints)?;
            if cli.format.json() {
                write(out, "piece.json", &io::piece_to_json(&piece))?;
            }
            println!(
                "length {} displacement {:?} residual {:.2e} clearance {:.6}",
                io::fmt17(piece.length),
                piece.displacement,
                piece.residual,
                piece.min_clearance
            );
            Ok(true)
        }
        Command::Flow { start, dir } => {
            let scene = load_scene(cli)?;
            if start.len() != scene.m || dir.len() != scene.m {
                bail!("--start and --dir need {} coordinates", scene.m);
            }
            let flight = trace(
                &scene,
                FlowState::new(start.clone(), dir.clone()),
                cli.nmax,
                cli.tmax,
            );
            if cli.format.json() {
                write(out, "flight.json", &serde_json::to_string_pretty(&flight)?)?;
            }
            if cli.format.delimited() {
                write(out, "flight.csv", &io::flight_to_table(&flight))?;
                let series: Vec<(usize, Vec<f64>)> = (1..=flight.events.len())
                    .map(|n| (n, rotation_estimate(&flight, n).expect("in range")))
                    .collect();
                write(
                    out,
                    "rotation_series.csv",
                    &io::estimate_series_to_table(&series),
                )?;
            }
            println!(
                "{} reflections, terminal {:?}, time {}",
                flight.events.len(),
                flight.terminal,
                io::fmt17(flight.final_state.time)
            );
            Ok(true)
        }
        Command::Convexity => {
            let scene = load_scene(cli)?;
            let (zero, translating) =
                experiment_cycles(&scene, cli.jmax.unwrap_or(1), cli.qmax.unwrap_or(2))?;
            let report = convexity_experiment(&scene, &zero, &translating, cli.t, cli.eps)?;
            if cli.format.json() {
                write(out, "convexity.json", &serde_json::to_string_pretty(&report)?)?;
            }
            println!(
                "achieved error {:.6} (eps {}, assembled budget {:.6}) over {} entries: {}",
                report.achieved_error,
                report.eps,
                report.budget,
                report.combined_entries,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(report.pass)
        }
        Command::Inclusion => {
            let scene = load_scene(cli)?;
            let opts = SampleOptions {
                j_max: cli.jmax.unwrap_or(1),
                max_cycles: Some(200_000),
            };
            let report = proper_inclusion_check(&scene, cli.qmax.unwrap_or(6), cli.k, &opts)?;
            if cli.format.json() {
                write(out, "inclusion.json", &serde_json::to_string_pretty(&report)?)?;
            }
            println!(
                "delta {:.6} over {} samples; far-flight norm {:.6} at k = {}: {}",
                report.delta,
                report.periodic_samples,
                report.flow_norm,
                report.flow.k_used,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(report.pass)
        }
        Command::Escape { label, resolution } => {
            let scene = load_scene(cli)?;
            if *label < 1 || *label > scene.num_obstacles() {
                bail!("label {label} out of range 1..={}", scene.num_obstacles());
            }
            let report = escape_bound(&scene, *label, *resolution);
            if cli.format.json() {
                write(out, "escape.json", &serde_json::to_string_pretty(&report)?)?;
            }
            match &report.verdict {
                torbil_core::scene::EscapeVerdict::Bounded {
                    m,
                    max_hit,
                    gap_covered,
                    ..
                } => {
                    println!(
                        "bounded: M = {} (max first hit {}, grid gap covered: {gap_covered})",
                        io::fmt17(*m),
                        io::fmt17(*max_hit)
                    );
                }
                torbil_core::scene::EscapeVerdict::Unbounded { witness_direction } => {
                    println!(
                        "unbounded: ray along {:?} travels past the cutoff (direction norm {})",
                        witness_direction,
                        io::fmt17(linalg::norm(witness_direction))
                    );
                }
            }
            Ok(true)
        }
    }
}
