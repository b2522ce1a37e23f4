use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use blockshape::lattice::{BlockModel, LatticeSpec};
use blockshape::merge::{Convention, MergeParams, Objective, ScanPattern};
use blockshape::mesh::{self, RefineParams};
use blockshape::metrics;
use blockshape::parallel::available_threads;
use blockshape::pipeline::{self, ClassMode, PipelineConfig};
use blockshape::tagging::{parse_instructions, TagMode};
use blockshape::{Error, Vec3};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "blockshape", version, about = "Restructure block models against triangulated surfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sub-block surface-intersecting parents, merge per class and tag.
    Restructure(RestructureArgs),
    /// Merge each (parent, label) group of a model.
    Merge(MergeCmdArgs),
    /// Octree baseline, optionally compared against the merging pipeline.
    Octree(OctreeArgs),
    /// Write summary tables for a model.
    Stats(StatsArgs),
}

#[derive(Args, Serialize, Clone)]
struct LatticeArgs {
    /// Lattice origin x,y,z.
    #[arg(long, value_parser = triple::<f64>, default_value = "0,0,0")]
    origin: [f64; 3],
    /// Parent block dims.
    #[arg(long, value_parser = triple::<f64>)]
    parent: [f64; 3],
    /// Minimum block dims.
    #[arg(long, value_parser = triple::<f64>)]
    min: [f64; 3],
}

impl LatticeArgs {
    fn spec(&self) -> Result<LatticeSpec, Error> {
        let v = |a: [f64; 3]| Vec3::from_array(a);
        LatticeSpec::new(v(self.origin), v(self.parent), v(self.min))
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConventionArg {
    Persistent,
    Dissolved,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ObjectiveArg {
    Count,
    Aspect,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum ScansArg {
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "8")]
    #[serde(rename = "8")]
    Eight,
}

#[derive(Args, Serialize, Clone)]
struct MergeArgs {
    #[arg(long, value_enum, default_value = "dissolved")]
    convention: ConventionArg,
    #[arg(long, value_enum, default_value = "aspect")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "8")]
    scans: ScansArg,
    /// Growth cycles per seed before it stops.
    #[arg(long)]
    token: Option<u32>,
    /// Largest merged size in cells, kx,ky,kz.
    #[arg(long, value_parser = triple::<u32>)]
    max_dims: Option<[u32; 3]>,
}

impl MergeArgs {
    fn params(&self) -> MergeParams {
        MergeParams {
            token: self.token,
            max_dims: self.max_dims,
            convention: match self.convention {
                ConventionArg::Persistent => Convention::Persistent,
                ConventionArg::Dissolved => Convention::Dissolved,
            },
            scans: match self.scans {
                ScansArg::One => vec![ScanPattern::STANDARD],
                ScansArg::Eight => ScanPattern::all(),
            },
            objective: match self.objective {
                ObjectiveArg::Count => Objective::MinBlockCount,
                ObjectiveArg::Aspect => Objective::MinAspectRatio,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Preclassified,
    LegacyTwoSet,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TaggingArg {
    Affiliated,
    Sequential,
}

#[derive(Args, Serialize)]
struct RestructureArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tagging instruction file; mesh paths are relative to it.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[command(flatten)]
    merge: MergeArgs,
    #[arg(long, value_enum, default_value = "preclassified")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "affiliated")]
    tagging: TaggingArg,
    /// Largest triangle area after refinement; needs --refine-edge.
    #[arg(long, requires = "refine_edge")]
    refine_area: Option<f64>,
    /// Longest triangle edge after refinement; needs --refine-area.
    #[arg(long, requires = "refine_area")]
    refine_edge: Option<f64>,
    #[serde(skip)]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
struct MergeCmdArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[command(flatten)]
    merge: MergeArgs,
    #[serde(skip)]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum OctMergeArg {
    None,
    Intra,
}

#[derive(Args, Serialize)]
struct OctreeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Surface meshes, top-down.
    #[arg(long, num_args = 1..)]
    surfaces: Vec<PathBuf>,
    #[arg(long)]
    depth: u32,
    #[arg(long, value_enum, default_value = "none")]
    merge: OctMergeArg,
    #[arg(long)]
    out: PathBuf,
    /// Also run the merging pipeline under both conventions and print a table.
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[serde(skip)]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Models at other octree depths for growth factors, as D=path.
    #[arg(long, value_parser = depth_model)]
    depth_model: Vec<(u32, PathBuf)>,
    #[command(flatten)]
    lattice: LatticeArgs,
}

fn triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let p = |i: usize| parts[i].parse::<T>().map_err(|_| format!("bad value '{}'", parts[i]));
    Ok([p(0)?, p(1)?, p(2)?])
}

fn depth_model(s: &str) -> Result<(u32, PathBuf), String> {
    let (d, p) = s.split_once('=').ok_or_else(|| format!("expected D=path, got '{s}'"))?;
    Ok((d.trim().parse().map_err(|_| format!("bad depth '{d}'"))?, PathBuf::from(p)))
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure { code: if e.is_geometric() { 2 } else { 1 }, msg: e.to_string() }
    }
}

type Run<T> = Result<T, Failure>;

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: Vec<InputHash>,
    config: serde_json::Value,
    config_hash: String,
    threads: usize,
    wall_time_s: f64,
    counts: BTreeMap<String, u64>,
}

/// Reads inputs and remembers their hashes for the manifest.
#[derive(Default)]
struct Inputs {
    seen: Vec<InputHash>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Run<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
        self.seen.push(InputHash { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(bytes)
    }

    fn text(&mut self, path: &Path) -> Run<String> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| Failure { code: 1, msg: format!("{}: not valid UTF-8", path.display()) })
    }

    fn model(&mut self, path: &Path, spec: LatticeSpec) -> Run<BlockModel> {
        let text = self.text(path)?;
        BlockModel::from_csv(spec, &text).map_err(|e| Failure::from(e).context(path))
    }

    fn mesh(&mut self, path: &Path) -> Run<mesh::TriangleMesh> {
        self.read(path)?;
        mesh::io::load(path).map_err(|e| Failure::from(e).context(path))
    }
}

impl Failure {
    fn context(self, path: &Path) -> Failure {
        if self.msg.starts_with(&path.display().to_string()) {
            return self;
        }
        Failure { msg: format!("{}: {}", path.display(), self.msg), ..self }
    }
}

fn write(path: &Path, text: &str) -> Run<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() }.into())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn emit_manifest(
    path: &Path,
    command: &'static str,
    inputs: Inputs,
    config: &impl Serialize,
    threads: usize,
    started: Instant,
    counts: BTreeMap<String, u64>,
) -> Run<()> {
    let config = serde_json::to_value(config).expect("serialisable config");
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(config.to_string().as_bytes());
    for i in &inputs.seen {
        h.update(i.sha256.as_bytes());
    }
    let m = Manifest {
        tool: "blockshape",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: hex::encode(h.finalize()),
        inputs: inputs.seen,
        config,
        threads,
        wall_time_s: started.elapsed().as_secs_f64(),
        counts,
    };
    write(path, &(serde_json::to_string_pretty(&m).expect("serialisable manifest") + "\n"))
}

fn threads(t: Option<usize>) -> Run<usize> {
    match t {
        Some(0) => Err(Failure { code: 1, msg: "--threads must be at least 1".into() }),
        Some(n) => Ok(n),
        None => Ok(available_threads()),
    }
}

fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v as u64)).collect()
}

fn cmd_restructure(a: &RestructureArgs) -> Run<()> {
    let started = Instant::now();
    let threads = threads(a.threads)?;
    let spec = a.lattice.spec()?;
    let mut inputs = Inputs::default();
    let model = inputs.model(&a.model, spec)?;
    let text = inputs.text(&a.config)?;
    let instructions = parse_instructions(&text).map_err(|e| Failure::from(e).context(&a.config))?;
    let base = a.config.parent().unwrap_or(Path::new(""));
    let mut meshes = Vec::new();
    for i in &instructions {
        meshes.push(inputs.mesh(&base.join(&i.surface))?);
    }
    let refine = match (a.refine_area, a.refine_edge) {
        (Some(ar), Some(e)) => Some(RefineParams::new(ar, e)?),
        _ => None,
    };
    let mut cfg = PipelineConfig::new(pipeline::prepare_surfaces(meshes, refine)?, instructions);
    cfg.merge = a.merge.params();
    cfg.mode = match a.mode {
        ModeArg::Preclassified => ClassMode::Preclassified,
        ModeArg::LegacyTwoSet => ClassMode::LegacyTwoSet,
    };
    cfg.tagging = match a.tagging {
        TaggingArg::Affiliated => TagMode::Affiliated,
        TaggingArg::Sequential => TagMode::Sequential,
    };
    cfg.threads = threads;
    let r = pipeline::restructure(&model, &cfg)?;
    write(&a.out, &r.model.to_csv())?;
    let d = &r.diagnostics;
    let c = counts(&[
        ("blocks_in", d.blocks_in),
        ("blocks_out", d.blocks_out),
        ("parents", d.parents),
        ("intersecting_parents", d.intersecting_parents),
        ("intersecting_cells", d.intersecting_cells),
        ("intersecting_blocks", d.intersecting_blocks),
        ("classes", d.classes),
    ]);
    emit_manifest(&manifest_path(&a.out), "restructure", inputs, a, threads, started, c)
}

fn cmd_merge(a: &MergeCmdArgs) -> Run<()> {
    let started = Instant::now();
    let threads = threads(a.threads)?;
    let mut inputs = Inputs::default();
    let model = inputs.model(&a.model, a.lattice.spec()?)?;
    let merged = pipeline::merge_model(&model, &a.merge.params(), threads)?;
    write(&a.out, &merged.to_csv())?;
    print!("{}", metrics::compute_stats(&merged).to_csv());
    let c = counts(&[("blocks_in", model.blocks.len()), ("blocks_out", merged.blocks.len())]);
    emit_manifest(&manifest_path(&a.out), "merge", inputs, a, threads, started, c)
}

fn cmd_octree(a: &OctreeArgs) -> Run<()> {
    let started = Instant::now();
    let threads = threads(a.threads)?;
    let mut inputs = Inputs::default();
    let model = inputs.model(&a.model, a.lattice.spec()?)?;
    let mut meshes = Vec::new();
    for p in &a.surfaces {
        meshes.push(inputs.mesh(p)?);
    }
    let surfaces = pipeline::prepare_surfaces(meshes, None)?;
    let dirs = vec![Vec3::Z; surfaces.len()];
    let oct = pipeline::octree_model(&model, &surfaces, &dirs, a.depth, a.merge == OctMergeArg::Intra, threads)?;
    write(&a.out, &oct.to_csv())?;
    let mut c = counts(&[("blocks_in", model.blocks.len()), ("blocks_out", oct.blocks.len())]);
    if a.compare {
        let mut rows = vec![("octree", oct.clone())];
        if a.merge == OctMergeArg::None {
            rows.push(("octree+merge", pipeline::octree_model(&model, &surfaces, &dirs, a.depth, true, threads)?));
        }
        for (name, conv) in [("proposed-p", Convention::Persistent), ("proposed-d", Convention::Dissolved)] {
            let mut cfg = PipelineConfig::new(surfaces.clone(), vec![]);
            cfg.merge.convention = conv;
            cfg.threads = threads;
            rows.push((name, pipeline::restructure(&model, &cfg)?.model));
        }
        println!("method,blocks,vw_aspect");
        for (name, m) in &rows {
            let s = metrics::compute_stats(m);
            println!("{name},{},{:.6}", m.blocks.len(), s.total.vw_aspect);
            c.insert(format!("{name}_blocks"), m.blocks.len() as u64);
        }
    } else {
        print!("{}", metrics::compute_stats(&oct).to_csv());
    }
    emit_manifest(&manifest_path(&a.out), "octree", inputs, a, threads, started, c)
}

fn cmd_stats(a: &StatsArgs) -> Run<()> {
    let started = Instant::now();
    let spec = a.lattice.spec()?;
    let mut inputs = Inputs::default();
    let model = inputs.model(&a.model, spec)?;
    let mut by_depth = BTreeMap::new();
    for (d, p) in &a.depth_model {
        by_depth.insert(*d, inputs.model(p, spec)?.blocks.len() as u64);
    }
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Error::Io { path: a.out_dir.display().to_string(), msg: e.to_string() })?;
    let out = |name: &str| a.out_dir.join(name);
    write(&out("stats.csv"), &metrics::compute_stats(&model).to_csv())?;
    write(&out("icdf.csv"), &metrics::icdf_csv(&metrics::aspect_ratio_icdf(&model)))?;
    write(&out("cdf.csv"), &metrics::cdf_csv(&metrics::block_dimension_cdf(&model)))?;
    write(&out("growth.csv"), &metrics::growth_csv(&metrics::growth_factors(&by_depth)))?;
    let c = counts(&[("blocks", model.blocks.len())]);
    emit_manifest(&out("manifest.json"), "stats", inputs, a, 1, started, c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let r = match &cli.cmd {
        Command::Restructure(a) => cmd_restructure(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Octree(a) => cmd_octree(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
