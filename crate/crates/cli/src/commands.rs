//! Implementations behind the CLI subcommands.

use crate::manifest::{CommandSpec, GenSpec, PlantKind, RunManifest};
use cyclerank_core::rng::{stream_rng, STREAM_MISC};
use cyclerank_core::sketch::{contract_all_modes, sketch_columns, CountSketchOp, SketchOp};
use cyclerank_core::{
    approx_cp_rank, approx_cycle_rank, cp_residual_sq, cycle_reconstruct, pcfg, residual_sq,
    write_matrix_text, CoreError, CycleFactors, DenseMatrix, DenseTensor, Entry, Mode,
    PipelineConfig, SparseTensor3,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Command failures mapped onto the documented exit codes: configuration
/// problems exit 2, input/output problems exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse { .. }
            | CoreError::Io(_)
            | CoreError::IndexOutOfRange { .. }
            | CoreError::NonFiniteEntry { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

fn read_tensor(path: &Path) -> Result<SparseTensor3, CliError> {
    SparseTensor3::read_path(path).map_err(CliError::from).map_err(|e| match e {
        CliError::Io(m) => CliError::Io(format!("{}: {}", path.display(), m)),
        other => other,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {}", path.display(), e)))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

fn write_factor(m: &DenseMatrix, path: &Path) -> CliResult {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix_text(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// `approx-cycle` and `approx-cp`: run the pipeline, write three factor
/// files, the deterministic report, the timings sidecar and the manifest.
pub fn cmd_approx(
    form: PlantKind,
    input: &Path,
    config: PipelineConfig,
    output_dir: &Path,
) -> CliResult {
    let a = read_tensor(input)?;
    std::fs::create_dir_all(output_dir)?;
    let canonical_input = input
        .canonicalize()
        .map_err(|e| CliError::Io(format!("{}: {}", input.display(), e)))?;

    let (factors, report) = match form {
        PlantKind::Cycle => {
            let (f, report) = approx_cycle_rank(&a, &config).map_err(CliError::from)?;
            ([f.u, f.v, f.w], report)
        }
        PlantKind::Cp => {
            let (f, report) = approx_cp_rank(&a, &config).map_err(CliError::from)?;
            ([f.u, f.v, f.w], report)
        }
    };

    for (name, m) in ["U.mat", "V.mat", "W.mat"].iter().zip(&factors) {
        write_factor(m, &output_dir.join(name))?;
    }
    write_json(&report, &output_dir.join("report.json"))?;
    write_json(&report.timings, &output_dir.join("timings.json"))?;

    let command = match form {
        PlantKind::Cycle => CommandSpec::ApproxCycle { input: canonical_input, config },
        PlantKind::Cp => CommandSpec::ApproxCp { input: canonical_input, config },
    };
    let outputs =
        ["U.mat", "V.mat", "W.mat", "report.json"].iter().map(|s| s.to_string()).collect();
    RunManifest::new(command, outputs).write(output_dir)?;

    println!(
        "residual_sq = {} (relative {}), report in {}",
        report.residual_sq,
        report.relative_residual,
        output_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct GenSidecar {
    kind: PlantKind,
    n: usize,
    k: usize,
    seed: u64,
    noise: f64,
    nnz: usize,
    norm_a_sq: f64,
    /// Exact squared residual of the planted factors against the emitted
    /// tensor; a valid upper bound on OPT.
    planted_residual_sq: f64,
}

/// `gen`: emit a planted tensor plus a sidecar recording the exact
/// residual of the planted factors (an upper bound on OPT).
pub fn cmd_gen(spec: GenSpec, output: &Path) -> CliResult {
    if spec.n == 0 || spec.k == 0 {
        return Err(CliError::Config("gen needs n >= 1 and k >= 1".into()));
    }
    if spec.noise < 0.0 || spec.noise.is_nan() {
        return Err(CliError::Config("noise must be >= 0".into()));
    }
    let mut rng = stream_rng(spec.seed, STREAM_MISC);
    let (n, k) = (spec.n, spec.k);
    let mut rand_matrix = |rows: usize, cols: usize| {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    };

    enum Planted {
        Cycle(CycleFactors),
        Cp(DenseMatrix, DenseMatrix, DenseMatrix),
    }
    let (planted, mut dense) = match spec.kind {
        PlantKind::Cycle => {
            let f = CycleFactors::new(
                n,
                k,
                rand_matrix(n, k * k),
                rand_matrix(n, k * k),
                rand_matrix(n, k * k),
            )
            .map_err(CliError::from)?;
            let dense = cycle_reconstruct(&f);
            (Planted::Cycle(f), dense)
        }
        PlantKind::Cp => {
            let (u, v, w) = (rand_matrix(n, k), rand_matrix(n, k), rand_matrix(n, k));
            let dense = cyclerank_core::cp_reconstruct(&u, &v, &w).map_err(CliError::from)?;
            (Planted::Cp(u, v, w), dense)
        }
    };

    if spec.noise > 0.0 {
        let len = n * n * n;
        let mut g = Vec::with_capacity(len);
        for _ in 0..len {
            g.push(rng.sample::<f64, _>(StandardNormal));
        }
        let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if g_norm > 0.0 {
            spec.noise * dense.norm_sq().sqrt() / g_norm
        } else {
            0.0
        };
        let data: Vec<f64> =
            dense.data().iter().zip(&g).map(|(a, b)| a + scale * b).collect();
        dense = DenseTensor::from_data(&[n, n, n], data).map_err(CliError::from)?;
    }

    let a = SparseTensor3::from_dense(&dense).map_err(CliError::from)?;
    let planted_residual_sq = match &planted {
        Planted::Cycle(f) => residual_sq(f, &a).map_err(CliError::from)?,
        Planted::Cp(u, v, w) => cp_residual_sq(u, v, w, &a).map_err(CliError::from)?,
    };

    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    a.write_path(output).map_err(CliError::from)?;

    let sidecar = GenSidecar {
        kind: spec.kind,
        n,
        k,
        seed: spec.seed,
        noise: spec.noise,
        nnz: a.nnz(),
        norm_a_sq: a.norm_sq(),
        planted_residual_sq,
    };
    let sidecar_path = sidecar_path(output);
    write_json(&sidecar, &sidecar_path)?;

    let file_name = output
        .file_name()
        .ok_or_else(|| CliError::Config("output path has no file name".into()))?
        .to_string_lossy()
        .to_string();
    let manifest = RunManifest::new(
        CommandSpec::Gen { spec, output: PathBuf::from(&file_name) },
        vec![file_name.clone(), sidecar_name(&file_name)],
    );
    let dir = output.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    manifest.write(&dir)?;

    println!(
        "wrote {} ({} nonzeros), planted residual_sq = {}",
        output.display(),
        a.nnz(),
        planted_residual_sq
    );
    Ok(())
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let name = output.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    output.with_file_name(sidecar_name(&name))
}

fn sidecar_name(file_name: &str) -> String {
    format!("{}.meta.json", file_name)
}

/// `sketch-bench`: count the sparse-entry visits of the two CountSketch
/// kernels across nnz scales and time them. CSV goes to stdout and, when
/// an output directory is given, to `bench.csv` there.
pub fn cmd_sketch_bench(
    n: usize,
    sizes: &[usize],
    seed: u64,
    output_dir: Option<&Path>,
) -> CliResult {
    if sizes.is_empty() {
        return Err(CliError::Config("sketch-bench needs a non-empty --sizes list".into()));
    }
    if n == 0 {
        return Err(CliError::Config("sketch-bench needs n >= 1".into()));
    }
    let cube = n * n * n;
    for &nnz in sizes {
        if nnz == 0 || nnz > cube {
            return Err(CliError::Config(format!(
                "nnz = {} outside 1..={} for n = {}",
                nnz, cube, n
            )));
        }
    }

    let mut csv = String::from("op,nnz,entry_visits,wall_ns\n");
    for (idx, &nnz) in sizes.iter().enumerate() {
        let mut rng = stream_rng(seed.wrapping_add(idx as u64), STREAM_MISC);
        // distinct coordinates so nnz is exact after canonicalization
        let coords = rand::seq::index::sample(&mut rng, cube, nnz);
        let entries: Vec<Entry> = coords
            .iter()
            .map(|lin| Entry {
                i: lin / (n * n),
                j: (lin / n) % n,
                l: lin % n,
                value: rng.sample(StandardNormal),
            })
            .collect();
        let a = SparseTensor3::new(n, entries).map_err(CliError::from)?;
        debug_assert_eq!(a.nnz(), nnz);

        let flat = a.flatten(Mode::One);
        let cs = SketchOp::CountSketch(
            CountSketchOp::new((n * n).min(256), n * n, seed).map_err(CliError::from)?,
        );
        let t0 = Instant::now();
        let (_, visits) = sketch_columns(&flat, &cs).map_err(CliError::from)?;
        let dt = t0.elapsed().as_nanos();
        csv.push_str(&format!("sketch_columns,{},{},{}\n", nnz, visits, dt));

        let t = CountSketchOp::new(n.min(32), n, seed).map_err(CliError::from)?;
        let t0 = Instant::now();
        let (_, visits) = contract_all_modes(&a, &t, &t, &t).map_err(CliError::from)?;
        let dt = t0.elapsed().as_nanos();
        csv.push_str(&format!("contract_all_modes,{},{},{}\n", nnz, visits, dt));
    }
    print!("{}", csv);

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), &csv)?;
        RunManifest::new(
            CommandSpec::SketchBench { n, sizes: sizes.to_vec(), seed },
            vec!["bench.csv".to_string()],
        )
        .write(dir)?;
    }
    Ok(())
}

/// `pcfg`: inside/outside/marginal tables as TSV on stdout (and in
/// `tables.tsv` when an output directory is given).
pub fn cmd_pcfg(grammar_path: &Path, sentence: &[String], output_dir: Option<&Path>) -> CliResult {
    let text = std::fs::read_to_string(grammar_path)
        .map_err(|e| CliError::Io(format!("{}: {}", grammar_path.display(), e)))?;
    let grammar = pcfg::Grammar::parse_text(&text).map_err(CliError::from)?;
    if sentence.is_empty() {
        return Err(CliError::Config("empty sentence".into()));
    }
    let p_in = pcfg::inside(&grammar, sentence).map_err(CliError::from)?;
    let p_out = pcfg::outside(&grammar, sentence, &p_in).map_err(CliError::from)?;
    let mu = pcfg::marginals(&p_in, &p_out).map_err(CliError::from)?;

    let mut tsv = String::from("table\ti\tj\tsymbol\tvalue\n");
    for (name, chart) in [("inside", &p_in), ("outside", &p_out), ("marginal", &mu)] {
        for i in 0..chart.len() {
            for j in i..chart.len() {
                for a in 0..chart.syms() {
                    tsv.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\n",
                        name,
                        i,
                        j,
                        grammar.name(a),
                        chart.get(i, j, a)
                    ));
                }
            }
        }
    }
    print!("{}", tsv);

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("tables.tsv"), &tsv)?;
        RunManifest::new(
            CommandSpec::Pcfg {
                grammar: grammar_path
                    .canonicalize()
                    .map_err(|e| CliError::Io(format!("{}: {}", grammar_path.display(), e)))?,
                sentence: sentence.to_vec(),
            },
            vec!["tables.tsv".to_string()],
        )
        .write(dir)?;
    }
    Ok(())
}

/// `rerun`: replay a manifest into a fresh output directory.
pub fn cmd_rerun(manifest_path: &Path, output_dir: Option<&Path>) -> CliResult {
    let manifest = RunManifest::read(manifest_path)
        .map_err(|e| CliError::Io(format!("{}: {}", manifest_path.display(), e)))?;
    let default_dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = output_dir.map(Path::to_path_buf).unwrap_or(default_dir);
    match manifest.command {
        CommandSpec::ApproxCycle { input, config } => {
            cmd_approx(PlantKind::Cycle, &input, config, &dir)
        }
        CommandSpec::ApproxCp { input, config } => cmd_approx(PlantKind::Cp, &input, config, &dir),
        CommandSpec::Gen { spec, output } => cmd_gen(spec, &dir.join(output)),
        CommandSpec::Pcfg { grammar, sentence } => cmd_pcfg(&grammar, &sentence, Some(&dir)),
        CommandSpec::SketchBench { n, sizes, seed } => {
            cmd_sketch_bench(n, &sizes, seed, Some(&dir))
        }
    }
}
