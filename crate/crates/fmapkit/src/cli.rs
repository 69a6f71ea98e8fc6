//! Command-line interface. [`run`] executes a parsed [`Cli`]; the binary
//! only adds logging and exit codes.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmapkit_core::eval::evaluate_indices;
use fmapkit_core::mesh::TriangleMesh;
use fmapkit_core::shapes;

use crate::cache::{BasisCache, CacheStatus};
use crate::config::{Config, MaskChoice, OptimizerChoice};
use crate::formats::{self, AdaptedParams, EvalSummary};
use crate::mesh_io::{read_mesh, write_atomic};
use crate::pipeline::{self, CheckRow, VerifyOptions};
use crate::{report, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fmapkit", version, about = "Functional map shape correspondence")]
pub struct Cli {
    /// Worker threads for pair-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory of the spectral basis cache (no caching when omitted).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute and cache spectral bases.
    Precompute {
        #[arg(required = true)]
        meshes: Vec<PathBuf>,
        #[arg(long, default_value_t = fmapkit_core::spectral::DEFAULT_K)]
        k: usize,
    },
    /// Match mesh X to mesh Y.
    Match(MatchArgs),
    /// Adapt the solver parameters on a collection of pairs.
    Adapt(AdaptArgs),
    /// Score a point map against ground truth.
    Eval(EvalArgs),
    /// Run the map-equality and repeated-row checks.
    Verify(VerifyArgs),
    /// Aggregate result directories into CSV and SVG.
    Report {
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Default)]
pub struct SolverOverrides {
    /// Number of basis functions.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub mask: Option<MaskChoice>,
    /// Initial mask strength λ.
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Initial mask exponent γ, in (0, 1).
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Softmax temperature of the soft point map.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Adaptation steps; 0 keeps the initial parameters.
    #[arg(long)]
    pub adapt_steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerChoice>,
    /// Enable spectral upsampling up to this basis size.
    #[arg(long)]
    pub refine_to: Option<usize>,
    /// Basis size increment per refinement round.
    #[arg(long)]
    pub refine_step: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, config: &mut Config) -> Result<()> {
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(m) = self.mask {
            config.solver.mask = m;
        }
        if let Some(l) = self.lambda0 {
            config.solver.lambda = l;
        }
        if let Some(g) = self.gamma0 {
            config.solver.gamma = g;
        }
        if let Some(t) = self.tau {
            config.solver.tau = t;
        }
        if let Some(s) = self.adapt_steps {
            config.adapt.steps = s;
        }
        if let Some(s) = self.step_size {
            config.adapt.step_size = s;
        }
        if let Some(o) = self.optimizer {
            config.adapt.optimizer = o;
        }
        if let Some(k) = self.refine_to {
            config.refine.enabled = true;
            config.refine.k_end = k;
        }
        if let Some(s) = self.refine_step {
            config.refine.step = s;
        }
        config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapSource {
    Features,
    Fmap,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub mesh_x: PathBuf,
    pub mesh_y: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Which recovered map is written as `map.txt`.
    #[arg(long, value_enum, default_value_t = MapSource::Fmap)]
    pub map_source: MapSource,
    /// Evaluate both maps against `--gt`.
    #[arg(long)]
    pub eval: bool,
    /// Ground-truth Y → X map, one X index per line.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// File with one `mesh_x mesh_y` pair per line.
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Collection label (default: the pair list's file stem).
    #[arg(long)]
    pub collection: Option<String>,
    #[command(flatten)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Source mesh X (errors are measured on it).
    #[arg(long)]
    pub mesh_x: PathBuf,
    /// Predicted Y → X map.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth Y → X map.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pred")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Meshes for the map-equality check (default: the built-in shapes).
    pub meshes: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Basis sizes to check, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10])]
    pub k: Vec<usize>,
    /// Feature columns beyond k in the second theorem variant.
    #[arg(long, default_value_t = 3)]
    pub extra_features: usize,
    /// Random instances per mesh and k.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub lemma_instances: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(Error::Validation("--jobs must be positive".into()));
            }
            builder = builder.num_threads(j);
        }
        builder.build().map_err(|e| Error::Validation(format!("thread pool: {e}")))?
    };
    let cache = match &cli.cache_dir {
        Some(d) => BasisCache::new(d),
        None => BasisCache::disabled(),
    };
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    pool.install(|| match cli.command {
        Command::Precompute { meshes, k } => {
            if cli.cache_dir.is_none() {
                return Err(Error::Validation("precompute needs --cache-dir".into()));
            }
            precompute(&meshes, k, &cache)
        }
        Command::Match(args) => {
            args.solver.apply(&mut config)?;
            cmd_match(&args, &config, &cache)
        }
        Command::Adapt(args) => {
            args.solver.apply(&mut config)?;
            cmd_adapt(&args, &config, &cache)
        }
        Command::Eval(args) => cmd_eval(&args, &config),
        Command::Verify(args) => cmd_verify(&args, &cache),
        Command::Report { results, out } => {
            let inputs = report::collect_inputs(&results)?;
            for path in report::write_report(&inputs, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    })
}

fn precompute(meshes: &[PathBuf], k: usize, cache: &BasisCache) -> Result<()> {
    for (path, status) in pipeline::precompute(meshes, k, cache)? {
        let what = match status {
            CacheStatus::Hit => "cached",
            CacheStatus::Computed => "computed",
            CacheStatus::Recomputed => "recomputed",
            CacheStatus::Uncached => "uncached",
        };
        println!("{}: {what}", path.display());
    }
    Ok(())
}

pub fn cmd_match(args: &MatchArgs, config: &Config, cache: &BasisCache) -> Result<()> {
    // validate everything before any output exists
    if args.eval && args.gt.is_none() {
        return Err(Error::Validation("--eval needs --gt".into()));
    }
    let x = pipeline::load_shape(&args.mesh_x, config, cache)?;
    let y = pipeline::load_shape(&args.mesh_y, config, cache)?;
    let gt = match (&args.gt, args.eval) {
        (Some(p), true) => Some(
            formats::read_pointmap_checked(p, y.mesh.n(), x.mesh.n())?
                .as_hard()
                .expect("hard")
                .to_vec(),
        ),
        _ => None,
    };
    let result = pipeline::match_shapes(&x, &y, config)?;
    let evals = match &gt {
        Some(gt) => {
            let thresholds = config.eval.thresholds();
            let mut evals = Vec::new();
            for (label, map) in [("features", &result.map_features), ("fmap", &result.map_fmap)] {
                evals.push((label, evaluate_indices(map, gt, &x.mesh, &thresholds)?));
            }
            Some(evals)
        }
        None => None,
    };

    let out = &args.out;
    let selected = match args.map_source {
        MapSource::Features => &result.map_features,
        MapSource::Fmap => &result.map_fmap,
    };
    formats::write_pointmap(&result.map_features, out.join("map_features.txt"))?;
    formats::write_pointmap(&result.map_fmap, out.join("map_fmap.txt"))?;
    formats::write_pointmap(selected, out.join("map.txt"))?;
    formats::write_fmap_csv(&result.fmap, out.join("fmap.csv"))?;
    formats::write_fmap_binary(&result.fmap, out.join("fmap.bin"))?;
    if let Some(c) = &result.fmap_refined {
        formats::write_fmap_csv(c, out.join("fmap_refined.csv"))?;
    }
    let losses: Vec<(&str, &_)> = result.losses.iter().map(|(l, r)| (l.as_str(), r)).collect();
    formats::write_loss_reports(&losses, out.join("losses.csv"))?;
    if let Some(trace) = &result.trace {
        formats::write_trace(trace, out.join("trace.csv"))?;
    }
    if let Some(evals) = &evals {
        let mut summaries = Vec::new();
        for (label, r) in evals {
            formats::write_pck(&r.pck, out.join(format!("pck_{label}.csv")))?;
            formats::write_per_vertex_errors(r, out.join(format!("errors_{label}.csv")))?;
            summaries.push(EvalSummary::new(*label, r));
            println!("{label}: mean error {:.6e}, auc {:.4}", r.mean_error, r.auc);
        }
        formats::write_eval_summaries(&summaries, out.join("eval_summary.csv"))?;
    }
    println!(
        "lambda {:.6e} gamma {:.6}; wrote {}",
        result.params.lambda(),
        result.params.gamma(),
        out.display()
    );
    Ok(())
}

pub fn cmd_adapt(args: &AdaptArgs, config: &Config, cache: &BasisCache) -> Result<()> {
    let pairs = pipeline::read_pair_list(&args.pairs)?;
    let collection = args.collection.clone().unwrap_or_else(|| {
        args.pairs
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "collection".into())
    });
    let (outcome, aborted) = match pipeline::adapt_collection(&pairs, config, cache) {
        Ok(o) => (o, None),
        Err(Error::AdaptAborted { step, last_good }) => (*last_good, Some(step)),
        Err(e) => return Err(e),
    };
    let trace = &outcome.trace;
    formats::write_trace(trace, args.out.join("trace.csv"))?;
    let params = AdaptedParams {
        collection,
        lambda: outcome.params.lambda(),
        gamma: outcome.params.gamma(),
        steps: trace.len().saturating_sub(1),
        initial_loss: trace.first().map_or(f64::NAN, |e| e.report.total),
        final_loss: trace.last().map_or(f64::NAN, |e| e.report.total),
        stalled: outcome.stalled,
        aborted: aborted.is_some(),
    };
    formats::write_adapted_params(&params, args.out.join("params.toml"))?;
    if let Some(step) = aborted {
        return Err(Error::AdaptAborted {
            step,
            last_good: Box::new(outcome),
        });
    }
    println!(
        "{}: lambda {:.6e} gamma {:.6}, loss {:.6e} -> {:.6e} in {} steps",
        params.collection, params.lambda, params.gamma, params.initial_loss, params.final_loss, params.steps
    );
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, config: &Config) -> Result<()> {
    let mesh_x = read_mesh(&args.mesh_x)?;
    let pred = formats::read_pointmap(&args.pred)?;
    let gt = formats::read_pointmap(&args.gt)?;
    let r = evaluate_indices(&pred, &gt, &mesh_x, &config.eval.thresholds())?;
    if !r.unreachable.is_empty() {
        log::warn!("{} vertices have unreachable predictions and are excluded", r.unreachable.len());
    }
    formats::write_per_vertex_errors(&r, args.out.join(format!("errors_{}.csv", args.label)))?;
    formats::write_pck(&r.pck, args.out.join(format!("pck_{}.csv", args.label)))?;
    formats::write_eval_summaries(&[EvalSummary::new(args.label.clone(), &r)], args.out.join(format!("eval_summary_{}.csv", args.label)))?;
    let svg = report::line_chart("PCK", "normalized geodesic error", "fraction of vertices", &[(args.label.clone(), r.pck.clone())]);
    write_atomic(&args.out.join(format!("pck_{}.svg", args.label)), svg.as_bytes())?;
    println!(
        "mean error {:.6e} (x100: {:.4}), auc {:.4}, unreachable {}",
        r.mean_error,
        100.0 * r.mean_error,
        r.auc,
        r.unreachable.len()
    );
    Ok(())
}

/// The built-in shapes used when `verify` gets no meshes.
pub fn builtin_meshes() -> Vec<(String, TriangleMesh)> {
    vec![
        ("blob".into(), shapes::blob()),
        ("torus".into(), shapes::bumpy_torus()),
        ("patch".into(), shapes::wavy_patch()),
    ]
}

pub fn cmd_verify(args: &VerifyArgs, cache: &BasisCache) -> Result<()> {
    let meshes = if args.meshes.is_empty() {
        builtin_meshes()
    } else {
        args.meshes
            .iter()
            .map(|p| Ok((p.display().to_string(), read_mesh(p)?)))
            .collect::<Result<_>>()?
    };
    let options = VerifyOptions {
        ks: args.k.clone(),
        extra_features: args.extra_features,
        first_seed: args.seed,
        seeds: args.seeds,
        lemma_instances: args.lemma_instances,
    };
    let rows = pipeline::verify(&meshes, &options, cache)?;
    let (csv, table) = verify_tables(&rows);
    print!("{table}");
    if let Some(out) = &args.out {
        write_atomic(&out.join("verify.csv"), csv.as_bytes())?;
        write_atomic(&out.join("verify.txt"), table.as_bytes())?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Error::ChecksFailed { failed, total: rows.len() });
    }
    Ok(())
}

fn verify_tables(rows: &[CheckRow]) -> (String, String) {
    let mut csv = String::from("check,subject,k,c,seed,metric,value,passed\n");
    let mut table = format!("{:<14} {:<24} {:>3} {:>4} {:>5} {:<11} {:>12}  result\n", "check", "subject", "k", "c", "seed", "metric", "value");
    for r in rows {
        writeln!(csv, "{},{},{},{},{},{},{:?},{}", r.check, r.subject, r.k, r.c, r.seed, r.metric, r.value, r.passed).unwrap();
        writeln!(
            table,
            "{:<14} {:<24} {:>3} {:>4} {:>5} {:<11} {:>12.3e}  {}",
            r.check,
            r.subject,
            r.k,
            r.c,
            r.seed,
            r.metric,
            r.value,
            if r.passed { "pass" } else { "FAIL" }
        )
        .unwrap();
    }
    let passed = rows.iter().filter(|r| r.passed).count();
    writeln!(table, "{passed}/{} passed", rows.len()).unwrap();
    (csv, table)
}
