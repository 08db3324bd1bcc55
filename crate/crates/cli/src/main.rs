//! Command-line front end. Every subcommand reads its inputs, delegates to
//! the library, and emits one self-describing report document on stdout.
//!
//! Exit codes: 0 success, 1 a statistical or exactness check failed,
//! 2 bad input (missing file, parse error, dimension mismatch).

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use modalx_core::frame::{parse_frame, Frame, WorldSet};
use modalx_core::group::{
    check_ext, is_point_homogeneous, orbit_partition, stabilizer_with_bound, OrbitPartition,
    PermGroup,
};
use modalx_core::measure::{
    check_invariance_exact, ergodic_decompose, read_measure_csv, EXACT_TOL,
};
use modalx_core::sampler::{parse_spec, sample_replicates, Dataset, HierarchicalSpec};
use modalx_core::verify::{
    calibration_table, cross_orbit_report, estimate_directing, posterior_update,
    test_exchangeability, test_invariance_mc, test_principal_principle, test_rigidity,
    PosteriorState, TestReport,
};

mod text;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "modalx", version, about = "Frame symmetry, exchangeable measures, and their verification")]
struct RunConfig {
    #[command(subcommand)]
    command: Command,
    /// Report format on stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a frame and report its accessible cluster
    Check {
        frame: PathBuf,
    },
    /// Stabilizer order, cluster orbits, extension property per orbit
    Orbits {
        frame: PathBuf,
        /// Enumerate group elements only up to this order
        #[arg(long, default_value_t = 100_000)]
        enumeration_bound: u64,
    },
    /// Exact ergodic decomposition of an invariant measure on valuations
    Decompose {
        frame: PathBuf,
        /// Measure CSV (valuation_index,probability)
        #[arg(long)]
        measure: PathBuf,
        /// Number of propositional atoms
        #[arg(long)]
        atoms: usize,
        /// Refuse valuation spaces needing more than this many bits
        #[arg(long, default_value_t = 26)]
        max_space_bits: u32,
    },
    /// Draw seeded replicates from a hierarchical specification
    Sample {
        frame: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Number of replicates
        #[arg(short, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical checks of rigidity, exchangeability, invariance,
    /// calibration, and coupling on sampled or supplied data
    Verify {
        frame: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Replicates to sample when no dataset is supplied
        #[arg(short, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated subset of rigidity,exchangeability,invariance,pp,coupling
        #[arg(long, default_value = "rigidity,exchangeability,invariance,pp,coupling")]
        tests: String,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Existing dataset CSV; skips sampling
        #[arg(long)]
        data: Option<PathBuf>,
        /// Tuple size for the exchangeability test (2 or 3)
        #[arg(long, default_value_t = 2)]
        tuple_size: usize,
        #[arg(long, default_value_t = 10)]
        pp_bins: usize,
        #[arg(long, default_value_t = 0.02)]
        pp_tol: f64,
        /// Skip calibration bins with fewer observations than this
        #[arg(long, default_value_t = 10_000)]
        min_bin_obs: usize,
        /// Directory for histogram and calibration CSVs
        #[arg(long)]
        emit_plot_data: Option<PathBuf>,
    },
    /// Conjugate posterior update over orbit chances from a dataset
    Posterior {
        frame: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Restrict observations to these worlds (comma-separated names)
        #[arg(long)]
        observed: Option<String>,
        /// Beta prior shape a for every orbit and atom
        #[arg(long, default_value_t = 1.0)]
        prior_a: f64,
        /// Beta prior shape b for every orbit and atom
        #[arg(long, default_value_t = 1.0)]
        prior_b: f64,
    },
}

struct InputError(String);

fn read_to_string(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_frame(path: &Path) -> Result<Frame, InputError> {
    let text = read_to_string(path)?;
    parse_frame(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<HierarchicalSpec, InputError> {
    let text = read_to_string(path)?;
    parse_spec(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, InputError> {
    let file = fs::File::open(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(file))
        .map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Stabilizer of the designated world plus orbit structure of the rest of
/// the accessible cluster. Every subcommand that needs symmetry goes
/// through here so they all agree on orbit numbering.
struct Symmetry {
    group: PermGroup,
    cluster: WorldSet,
    partition: OrbitPartition,
    point_homogeneous: bool,
}

fn analyze(frame: &Frame, bound: u64) -> Result<Symmetry, InputError> {
    let group = stabilizer_with_bound(frame, bound);
    let cluster = frame
        .accessible_cluster(frame.designated())
        .map_err(|e| InputError(e.to_string()))?;
    let rest = cluster.without(frame.designated());
    let partition =
        orbit_partition(&group, &rest).map_err(|e| InputError(e.to_string()))?;
    let point_homogeneous = is_point_homogeneous(&group, &cluster, frame.designated())
        .map_err(|e| InputError(e.to_string()))?;
    Ok(Symmetry {
        group,
        cluster,
        partition,
        point_homogeneous,
    })
}

fn world_names(frame: &Frame, set: &WorldSet) -> Vec<String> {
    set.iter().map(|w| frame.world_name(w).to_string()).collect()
}

fn frame_input(path: &Path, frame: &Frame) -> Value {
    json!({"path": path.display().to_string(), "fingerprint": frame.fingerprint()})
}

fn envelope(command: &str, inputs: Value, body: Value) -> Value {
    let mut doc = json!({
        "tool": "modalx",
        "version": VERSION,
        "command": command,
        "inputs": inputs,
    });
    let obj = doc.as_object_mut().expect("envelope is an object");
    for (k, v) in body.as_object().expect("body is an object") {
        obj.insert(k.clone(), v.clone());
    }
    doc
}

fn emit(doc: &Value, format: Format) {
    match format {
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(doc).expect("report serializes"))
        }
        Format::Text => print!("{}", text::render(doc)),
    }
}

fn cmd_check(path: &Path, format: Format) -> Result<u8, InputError> {
    let frame = load_frame(path)?;
    let sym = analyze(&frame, 100_000)?;
    let class = frame.classify();
    let doc = envelope(
        "check",
        json!({"frame": frame_input(path, &frame)}),
        json!({
            "frame_name": frame.name,
            "worlds": frame.worlds(),
            "designated": frame.world_name(frame.designated()),
            "classification": serde_json::to_value(class).expect("classification serializes"),
            "cluster": {
                "worlds": world_names(&frame, &sym.cluster),
                "size": sym.cluster.len(),
            },
            "point_homogeneous": sym.point_homogeneous,
        }),
    );
    emit(&doc, format);
    Ok(0)
}

fn cmd_orbits(path: &Path, bound: u64, format: Format) -> Result<u8, InputError> {
    let frame = load_frame(path)?;
    let sym = analyze(&frame, bound)?;
    let mut orbits = Vec::new();
    for (i, block) in sym.partition.blocks().iter().enumerate() {
        let ext = check_ext(&sym.group, block, i).map_err(|e| InputError(e.to_string()))?;
        orbits.push(json!({
            "index": i,
            "worlds": world_names(&frame, block),
            "size": block.len(),
            "ext": serde_json::to_value(&ext).expect("ext report serializes"),
        }));
    }
    let doc = envelope(
        "orbits",
        json!({"frame": frame_input(path, &frame)}),
        json!({
            "stabilizer": {
                "order": sym.group.order().to_string(),
                "generator_count": sym.group.generators().len(),
                "enumerated": sym.group.is_enumerated(),
            },
            "orbits": orbits,
            // The designated world is fixed by the whole stabilizer, so its
            // orbit is {w0} and the extension property holds trivially.
            "designated_orbit": {
                "world": frame.world_name(frame.designated()),
                "size": 1,
                "ext": {"holds": true, "restricted_order": "1", "trivial": true},
            },
            "point_homogeneous": sym.point_homogeneous,
        }),
    );
    emit(&doc, format);
    Ok(0)
}

fn cmd_decompose(
    path: &Path,
    measure_path: &Path,
    atoms: usize,
    max_space_bits: u32,
    format: Format,
) -> Result<u8, InputError> {
    let frame = load_frame(path)?;
    let bits = (frame.world_count() * atoms) as u32;
    if bits > max_space_bits {
        return Err(InputError(format!(
            "valuation space needs {bits} bits, cap is {max_space_bits}"
        )));
    }
    let file = fs::File::open(measure_path)
        .map_err(|e| InputError(format!("{}: {e}", measure_path.display())))?;
    let measure = read_measure_csv(BufReader::new(file), frame.world_count(), atoms)
        .map_err(|e| InputError(format!("{}: {e}", measure_path.display())))?;
    let sym = analyze(&frame, 100_000)?;
    let inputs = json!({
        "frame": frame_input(path, &frame),
        "measure": {
            "path": measure_path.display().to_string(),
            "fingerprint": measure.fingerprint(),
            "atoms": atoms,
        },
    });
    let invariance = check_invariance_exact(&measure, &sym.group, EXACT_TOL);
    if !invariance.invariant {
        let doc = envelope(
            "decompose",
            inputs,
            json!({
                "invariance": serde_json::to_value(invariance).expect("check serializes"),
                "components": Value::Null,
            }),
        );
        emit(&doc, format);
        return Ok(1);
    }
    let decomposition =
        ergodic_decompose(&measure, &sym.group).map_err(|e| InputError(e.to_string()))?;
    let include_support = measure.len() <= 4096;
    let components: Vec<Value> = decomposition
        .components()
        .iter()
        .map(|c| {
            let mut entry = json!({
                "weight": c.weight,
                "support_size": c.support.len(),
            });
            if include_support {
                entry["support"] = json!(c.support);
            }
            entry
        })
        .collect();
    let reconstructed = decomposition.reconstruct();
    let error = measure
        .probabilities()
        .iter()
        .zip(reconstructed.probabilities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let doc = envelope(
        "decompose",
        inputs,
        json!({
            "invariance": serde_json::to_value(invariance).expect("check serializes"),
            "component_count": decomposition.components().len(),
            "components": components,
            "reconstruction_error": error,
        }),
    );
    emit(&doc, format);
    Ok(0)
}

fn cmd_sample(
    path: &Path,
    spec_path: &Path,
    n: usize,
    seed: u64,
    out: Option<&Path>,
    format: Format,
) -> Result<u8, InputError> {
    let frame = load_frame(path)?;
    let spec = load_spec(spec_path)?;
    let sym = analyze(&frame, 100_000)?;
    check_block_count(&spec, &sym)?;
    let data = sample_replicates(&spec, &sym.partition, frame.world_count(), n, seed)
        .map_err(|e| InputError(e.to_string()))?;
    match out {
        Some(out_path) => {
            let mut file = fs::File::create(out_path)
                .map_err(|e| InputError(format!("{}: {e}", out_path.display())))?;
            data.write_csv(&mut file)
                .map_err(|e| InputError(format!("{}: {e}", out_path.display())))?;
            let doc = envelope(
                "sample",
                json!({
                    "frame": frame_input(path, &frame),
                    "spec": {"path": spec_path.display().to_string(), "fingerprint": spec.fingerprint()},
                }),
                json!({
                    "seed": seed,
                    "replicates": n,
                    "dataset": {
                        "path": out_path.display().to_string(),
                        "fingerprint": data.fingerprint(),
                    },
                }),
            );
            emit(&doc, format);
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            data.write_csv(&mut lock)
                .map_err(|e| InputError(format!("stdout: {e}")))?;
        }
    }
    Ok(0)
}

fn check_block_count(spec: &HierarchicalSpec, sym: &Symmetry) -> Result<(), InputError> {
    if spec.block_count() != sym.partition.len() {
        return Err(InputError(format!(
            "spec declares {} orbit priors but the frame has {} cluster orbits",
            spec.block_count(),
            sym.partition.len()
        )));
    }
    Ok(())
}

fn check_dataset_shape(
    data: &Dataset,
    frame: &Frame,
    spec: &HierarchicalSpec,
    sym: &Symmetry,
) -> Result<(), InputError> {
    if data.world_count != frame.world_count() {
        return Err(InputError(format!(
            "dataset has {} worlds, frame has {}",
            data.world_count,
            frame.world_count()
        )));
    }
    if data.atom_count != spec.atoms().len() {
        return Err(InputError(format!(
            "dataset has {} atoms, spec has {}",
            data.atom_count,
            spec.atoms().len()
        )));
    }
    if data.block_count != sym.partition.len() {
        return Err(InputError(format!(
            "dataset has {} latent blocks, frame has {} cluster orbits",
            data.block_count,
            sym.partition.len()
        )));
    }
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum TestKind {
    Rigidity,
    Exchangeability,
    Invariance,
    Pp,
    Coupling,
}

fn parse_tests(list: &str) -> Result<Vec<TestKind>, InputError> {
    let mut kinds = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = match name {
            "rigidity" => TestKind::Rigidity,
            "exchangeability" => TestKind::Exchangeability,
            "invariance" => TestKind::Invariance,
            "pp" => TestKind::Pp,
            "coupling" => TestKind::Coupling,
            other => return Err(InputError(format!("unknown test {other:?}"))),
        };
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(InputError("no tests selected".into()));
    }
    Ok(kinds)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    path: &Path,
    spec_path: &Path,
    n: usize,
    seed: u64,
    tests: &str,
    alpha: f64,
    data_path: Option<&Path>,
    tuple_size: usize,
    pp_bins: usize,
    pp_tol: f64,
    min_bin_obs: usize,
    plot_dir: Option<&Path>,
    format: Format,
) -> Result<u8, InputError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(InputError(format!("alpha {alpha} outside (0, 1)")));
    }
    let frame = load_frame(path)?;
    let spec = load_spec(spec_path)?;
    let sym = analyze(&frame, 100_000)?;
    check_block_count(&spec, &sym)?;
    let selected = parse_tests(tests)?;

    let (data, data_source) = match data_path {
        Some(p) => {
            let data = load_dataset(p)?;
            check_dataset_shape(&data, &frame, &spec, &sym)?;
            (data, json!({"path": p.display().to_string()}))
        }
        None => {
            let data = sample_replicates(&spec, &sym.partition, frame.world_count(), n, seed)
                .map_err(|e| InputError(e.to_string()))?;
            (data, json!({"sampled": true}))
        }
    };

    let mut reports: Vec<TestReport> = Vec::new();
    let mut coupling = Value::Null;
    for kind in &selected {
        match kind {
            TestKind::Rigidity => {
                let r = test_rigidity(&data, &sym.partition, alpha)
                    .map_err(|e| InputError(e.to_string()))?;
                reports.push(r);
            }
            TestKind::Exchangeability => {
                let mut ran = false;
                for (i, block) in sym.partition.blocks().iter().enumerate() {
                    if block.len() < tuple_size {
                        continue;
                    }
                    ran = true;
                    let mut r = test_exchangeability(&data, block, tuple_size, alpha)
                        .map_err(|e| InputError(e.to_string()))?;
                    r.test = format!("exchangeability[orbit {i}]");
                    reports.push(r);
                }
                if !ran {
                    reports.push(TestReport {
                        test: "exchangeability".into(),
                        statistic: 0.0,
                        null_description: "vacuous".into(),
                        p_value: None,
                        deviation: Some(0.0),
                        threshold: 0.0,
                        pass: true,
                        sample_size: data.len(),
                        seed: data.seed,
                        notes: vec![format!("no orbit has {tuple_size} worlds")],
                    });
                }
            }
            TestKind::Invariance => {
                let rest = sym.cluster.without(frame.designated());
                let projection: Vec<usize> = if rest.is_empty() {
                    vec![frame.designated()]
                } else {
                    rest.iter().take(2).collect()
                };
                let r = test_invariance_mc(&data, sym.group.generators(), &projection, alpha)
                    .map_err(|e| InputError(e.to_string()))?;
                reports.push(r);
            }
            TestKind::Pp => {
                for b in 0..sym.partition.len() {
                    for a in 0..spec.atoms().len() {
                        let mut r = test_principal_principle(
                            &data,
                            &sym.partition,
                            b,
                            a,
                            pp_bins,
                            pp_tol,
                            min_bin_obs,
                        )
                        .map_err(|e| InputError(e.to_string()))?;
                        r.test = format!(
                            "principal-principle[orbit {b}, {}]",
                            spec.atoms().names()[a]
                        );
                        reports.push(r);
                    }
                }
            }
            TestKind::Coupling => {
                if sym.partition.len() >= 2 {
                    let r = cross_orbit_report(
                        &data,
                        &sym.partition.blocks()[0],
                        &sym.partition.blocks()[1],
                        0,
                    )
                    .map_err(|e| InputError(e.to_string()))?;
                    coupling = serde_json::to_value(&r).expect("coupling report serializes");
                } else {
                    coupling = json!({"note": "needs at least two orbits"});
                }
            }
        }
    }

    if let Some(dir) = plot_dir {
        emit_plot_data(dir, &data, &sym, &spec, pp_bins)?;
    }

    let all_pass = reports.iter().all(|r| r.pass);
    let doc = envelope(
        "verify",
        json!({
            "frame": frame_input(path, &frame),
            "spec": {"path": spec_path.display().to_string(), "fingerprint": spec.fingerprint()},
        }),
        json!({
            "seed": data.seed,
            "alpha": alpha,
            "dataset": {
                "source": data_source,
                "replicates": data.len(),
                "fingerprint": data.fingerprint(),
            },
            "tests": serde_json::to_value(&reports).expect("test reports serialize"),
            "coupling": coupling,
            "pass": all_pass,
        }),
    );
    emit(&doc, format);
    Ok(if all_pass { 0 } else { 1 })
}

/// Histogram CSVs per orbit and atom, plus calibration CSVs where latents
/// allow. Files are small and plot-ready; nothing here affects verdicts.
fn emit_plot_data(
    dir: &Path,
    data: &Dataset,
    sym: &Symmetry,
    spec: &HierarchicalSpec,
    pp_bins: usize,
) -> Result<(), InputError> {
    fs::create_dir_all(dir).map_err(|e| InputError(format!("{}: {e}", dir.display())))?;
    for (i, block) in sym.partition.blocks().iter().enumerate() {
        let est =
            estimate_directing(data, block).map_err(|e| InputError(e.to_string()))?;
        for (a, name) in spec.atoms().names().iter().enumerate() {
            let hist_path = dir.join(format!("hist_orbit{i}_{name}.csv"));
            let mut out = String::from("bin_lo,bin_hi,count\n");
            for (b, &count) in est.histograms[a].iter().enumerate() {
                let lo = b as f64 / est.bins as f64;
                let hi = (b + 1) as f64 / est.bins as f64;
                out.push_str(&format!("{lo},{hi},{count}\n"));
            }
            fs::write(&hist_path, out)
                .map_err(|e| InputError(format!("{}: {e}", hist_path.display())))?;

            let table = calibration_table(data, &sym.partition, i, a, pp_bins)
                .map_err(|e| InputError(e.to_string()))?;
            let cal_path = dir.join(format!("calibration_orbit{i}_{name}.csv"));
            let mut out = String::from("bin,mean_theta,frequency,replicates,observations\n");
            for (b, bin) in table.iter().enumerate() {
                out.push_str(&format!(
                    "{b},{},{},{},{}\n",
                    bin.mean_theta, bin.frequency, bin.replicates, bin.observations
                ));
            }
            fs::write(&cal_path, out)
                .map_err(|e| InputError(format!("{}: {e}", cal_path.display())))?;
        }
    }
    Ok(())
}

fn cmd_posterior(
    path: &Path,
    data_path: &Path,
    observed: Option<&str>,
    prior_a: f64,
    prior_b: f64,
    format: Format,
) -> Result<u8, InputError> {
    if prior_a <= 0.0 || prior_b <= 0.0 {
        return Err(InputError("prior shapes must be positive".into()));
    }
    let frame = load_frame(path)?;
    let sym = analyze(&frame, 100_000)?;
    let data = load_dataset(data_path)?;
    if data.world_count != frame.world_count() {
        return Err(InputError(format!(
            "dataset has {} worlds, frame has {}",
            data.world_count,
            frame.world_count()
        )));
    }
    if data.block_count != sym.partition.len() {
        return Err(InputError(format!(
            "dataset has {} latent blocks, frame has {} cluster orbits",
            data.block_count,
            sym.partition.len()
        )));
    }
    let observed_set = match observed {
        Some(names) => {
            let mut indices = Vec::new();
            for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let idx = frame
                    .world_index(name)
                    .ok_or_else(|| InputError(format!("unknown world {name:?}")))?;
                indices.push(idx);
            }
            Some(WorldSet::new(indices))
        }
        None => None,
    };
    let prior = PosteriorState {
        shapes: vec![vec![(prior_a, prior_b); data.atom_count]; sym.partition.len()],
    };
    let post = posterior_update(&data, &sym.partition, &prior, observed_set.as_ref())
        .map_err(|e| InputError(e.to_string()))?;
    let blocks: Vec<Value> = sym
        .partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let atoms: Vec<Value> = (0..data.atom_count)
                .map(|a| {
                    let (sa, sb) = post.shape(b, a);
                    json!({"atom": a, "a": sa, "b": sb, "mean": post.mean(b, a)})
                })
                .collect();
            json!({
                "orbit": b,
                "worlds": world_names(&frame, block),
                "shapes": atoms,
            })
        })
        .collect();
    let doc = envelope(
        "posterior",
        json!({
            "frame": frame_input(path, &frame),
            "data": {"path": data_path.display().to_string(), "fingerprint": data.fingerprint()},
        }),
        json!({
            "seed": data.seed,
            "prior": {"a": prior_a, "b": prior_b},
            "observed": observed_set
                .as_ref()
                .map(|s| json!(world_names(&frame, s)))
                .unwrap_or(Value::Null),
            "posterior": blocks,
        }),
    );
    emit(&doc, format);
    Ok(0)
}

fn run(cfg: RunConfig) -> Result<u8, InputError> {
    match &cfg.command {
        Command::Check { frame } => cmd_check(frame, cfg.format),
        Command::Orbits {
            frame,
            enumeration_bound,
        } => cmd_orbits(frame, *enumeration_bound, cfg.format),
        Command::Decompose {
            frame,
            measure,
            atoms,
            max_space_bits,
        } => cmd_decompose(frame, measure, *atoms, *max_space_bits, cfg.format),
        Command::Sample {
            frame,
            spec,
            n,
            seed,
            out,
        } => cmd_sample(frame, spec, *n, *seed, out.as_deref(), cfg.format),
        Command::Verify {
            frame,
            spec,
            n,
            seed,
            tests,
            alpha,
            data,
            tuple_size,
            pp_bins,
            pp_tol,
            min_bin_obs,
            emit_plot_data,
        } => cmd_verify(
            frame,
            spec,
            *n,
            *seed,
            tests,
            *alpha,
            data.as_deref(),
            *tuple_size,
            *pp_bins,
            *pp_tol,
            *min_bin_obs,
            emit_plot_data.as_deref(),
            cfg.format,
        ),
        Command::Posterior {
            frame,
            data,
            observed,
            prior_a,
            prior_b,
        } => cmd_posterior(
            frame,
            data,
            observed.as_deref(),
            *prior_a,
            *prior_b,
            cfg.format,
        ),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MODALX_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => modalx_core::init_threads(n),
            _ => {
                eprintln!("error: MODALX_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = RunConfig::parse();
    match run(cfg) {
        Ok(code) => ExitCode::from(code),
        Err(InputError(msg)) => {
            let mut stderr = std::io::stderr();
            let _ = writeln!(stderr, "error: {msg}");
            ExitCode::from(2)
        }
    }
}
