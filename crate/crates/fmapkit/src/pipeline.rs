//! The batch stages behind the CLI: shape preparation, pair matching,
//! collection adaptation and the theory checks.

use std::path::{Path, PathBuf};

use fmapkit_core::adapt::{adapt_prepared, AdaptOutcome, PreparedPair, TraceEntry};
use fmapkit_core::conversion::{
    fmap_from_pointmap, pointmap_from_features, pointmap_from_fmap, refine_spectral_upsampling, PointMapMode,
};
use fmapkit_core::descriptors::FeatureMatrix;
use fmapkit_core::fmap::{solve_fmap, FunctionalMap, SolverParams};
use fmapkit_core::losses::{loss_coupling, LossReport};
use fmapkit_core::mesh::TriangleMesh;
use fmapkit_core::spectral::SpectralBasis;
use fmapkit_core::theory;
use rayon::prelude::*;

use crate::cache::{short_hash, BasisCache, CacheStatus};
use crate::config::Config;
use crate::mesh_io::read_mesh;
use crate::{Error, Result};

/// A mesh with its basis (at [`Config::basis_k`]) and descriptors (computed
/// from the first `k` eigenpairs).
#[derive(Clone, Debug)]
pub struct Shape {
    pub mesh: TriangleMesh,
    pub basis: SpectralBasis,
    pub features: FeatureMatrix,
}

pub fn prepare_shape(mesh: TriangleMesh, config: &Config, cache: &BasisCache) -> Result<Shape> {
    let (basis, status) = cache.basis(&mesh, config.basis_k())?;
    log::debug!("basis {} k={}: {status:?}", short_hash(&mesh), config.basis_k());
    let features = config.descriptor.compute(&basis.truncated(config.k)?)?;
    Ok(Shape { mesh, basis, features })
}

pub fn load_shape(path: &Path, config: &Config, cache: &BasisCache) -> Result<Shape> {
    prepare_shape(read_mesh(path)?, config, cache)
}

fn pair(x: &Shape, y: &Shape, params: &SolverParams) -> Result<PreparedPair> {
    Ok(PreparedPair::from_features(&x.features, &y.features, &x.basis, &y.basis, params.k, params.tau)?)
}

#[derive(Clone, Debug)]
pub struct MatchOutput {
    pub params: SolverParams,
    /// Adaptation trace when adaptation ran.
    pub trace: Option<Vec<TraceEntry>>,
    /// Solved `k × k` map X → Y.
    pub fmap: FunctionalMap,
    /// Upsampled map when refinement is enabled.
    pub fmap_refined: Option<FunctionalMap>,
    /// Y → X nearest neighbours in descriptor space.
    pub map_features: Vec<usize>,
    /// Y → X map recovered from the functional map.
    pub map_fmap: Vec<usize>,
    /// Loss breakdowns: the soft-coupled training objective, then the same
    /// terms with the coupling target built from each hard map.
    pub losses: Vec<(String, LossReport)>,
}

/// Matches X to Y: optional adaptation of `(λ, γ)` on this pair, the solve,
/// and both point-map recoveries.
pub fn match_shapes(x: &Shape, y: &Shape, config: &Config) -> Result<MatchOutput> {
    let params0 = config.solver_params()?;
    let prepared = pair(x, y, &params0)?;
    let (params, trace) = if config.adapt.steps > 0 {
        let outcome = run_adaptation(std::slice::from_ref(&prepared), &params0, config)?;
        (outcome.params, Some(outcome.trace))
    } else {
        (params0, None)
    };

    let mask = params.mask(&prepared.lambda_x, &prepared.lambda_y)?;
    let fmap = solve_fmap(&prepared.a_x, &prepared.a_y, &mask, params.lambda())?;

    let map_features = hard(pointmap_from_features(&x.features, &y.features, PointMapMode::HardNn, params.tau)?);
    let (fmap_refined, map_fmap) = if config.refine.enabled {
        let (c, pi) = refine_spectral_upsampling(&fmap, &x.basis, &y.basis, config.k, config.refine.k_end, config.refine.step)?;
        (Some(c), hard(pi))
    } else {
        (None, hard(pointmap_from_fmap(&fmap, &x.basis, &y.basis)?))
    };

    let (soft, _) = prepared.evaluate(&params, false)?;
    let mut losses = vec![("soft".to_string(), soft)];
    let bx = x.basis.truncated(config.k)?;
    let by = y.basis.truncated(config.k)?;
    for (label, map) in [("features", &map_features), ("fmap", &map_fmap)] {
        let pi = fmapkit_core::conversion::PointMap::hard(map.clone(), x.mesh.n())?;
        let converted = fmap_from_pointmap(&pi, &bx, &by)?;
        let couple = loss_coupling(&fmap, &converted)?;
        let report = LossReport::new(soft.bij, soft.orth, couple, soft.contrast_x, soft.contrast_y, &params.weights);
        losses.push((label.to_string(), report));
    }

    Ok(MatchOutput {
        params,
        trace,
        fmap,
        fmap_refined,
        map_features,
        map_fmap,
        losses,
    })
}

fn hard(map: fmapkit_core::conversion::PointMap) -> Vec<usize> {
    map.as_hard().expect("hard point map").to_vec()
}

/// Runs the optimizer and checks the trace is non-increasing. A non-finite
/// loss becomes [`Error::AdaptAborted`] carrying the last good state.
pub fn run_adaptation(pairs: &[PreparedPair], params0: &SolverParams, config: &Config) -> Result<AdaptOutcome> {
    let outcome = match adapt_prepared(pairs, params0, &config.adapt_options()) {
        Ok(outcome) => outcome,
        Err(fmapkit_core::Error::NonFiniteLoss { step, last_good }) => {
            return Err(Error::AdaptAborted { step, last_good });
        }
        Err(e) => return Err(e.into()),
    };
    check_monotone(&outcome.trace)?;
    Ok(outcome)
}

pub fn check_monotone(trace: &[TraceEntry]) -> Result<()> {
    match trace.windows(2).find(|w| !(w[1].report.total <= w[0].report.total)) {
        Some(w) => Err(Error::TraceNotMonotone {
            step: w[1].step,
            previous: w[0].report.total,
            current: w[1].report.total,
        }),
        None => Ok(()),
    }
}

/// Reads a pair list: one `mesh_x mesh_y` pair per line, paths relative to
/// the list file, `#` comments allowed.
pub fn read_pair_list(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        match fields.as_slice() {
            [x, y] => pairs.push((base.join(x), base.join(y))),
            _ => return Err(Error::parse(path, i + 1, "expected two mesh paths")),
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!("{} lists no pairs", path.display())));
    }
    Ok(pairs)
}

/// Loads every distinct mesh once (in parallel) and adapts `(λ, γ)` on the
/// collection.
pub fn adapt_collection(pairs: &[(PathBuf, PathBuf)], config: &Config, cache: &BasisCache) -> Result<AdaptOutcome> {
    let mut paths: Vec<&PathBuf> = pairs.iter().flat_map(|(x, y)| [x, y]).collect();
    paths.sort();
    paths.dedup();
    let shapes: Vec<Shape> = paths
        .par_iter()
        .map(|p| load_shape(p, config, cache))
        .collect::<Result<_>>()?;
    let find = |p: &PathBuf| &shapes[paths.binary_search(&p).expect("path was loaded")];
    let params0 = config.solver_params()?;
    let prepared: Vec<PreparedPair> = pairs
        .par_iter()
        .map(|(x, y)| pair(find(x), find(y), &params0))
        .collect::<Result<_>>()?;
    run_adaptation(&prepared, &params0, config)
}

/// Precomputes bases for `paths` in parallel.
pub fn precompute(paths: &[PathBuf], k: usize, cache: &BasisCache) -> Result<Vec<(PathBuf, CacheStatus)>> {
    paths
        .par_iter()
        .map(|p| {
            let mesh = read_mesh(p)?;
            let (_, status) = cache.basis(&mesh, k)?;
            Ok((p.clone(), status))
        })
        .collect()
}

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub subject: String,
    pub k: usize,
    pub c: usize,
    pub seed: u64,
    pub metric: &'static str,
    pub value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub ks: Vec<usize>,
    /// Descriptor count is `k + extra_features`.
    pub extra_features: usize,
    pub first_seed: u64,
    pub seeds: u64,
    pub lemma_instances: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            ks: vec![2, 5, 10],
            extra_features: 3,
            first_seed: 0,
            seeds: 10,
            lemma_instances: 20,
        }
    }
}

/// Lemma sizes cycled through by [`verify`]: `(n_X, n_Y, c)`.
const LEMMA_SIZES: [(usize, usize, usize); 5] = [(3, 1, 2), (4, 2, 3), (5, 5, 2), (6, 3, 4), (8, 8, 3)];

/// Runs the map-equality check on every mesh × k × seed and the repeated-row
/// and distinct-row checks on seeded instances.
pub fn verify(meshes: &[(String, TriangleMesh)], options: &VerifyOptions, cache: &BasisCache) -> Result<Vec<CheckRow>> {
    let k_max = options.ks.iter().copied().max().unwrap_or(0);
    let mut rows: Vec<CheckRow> = meshes
        .par_iter()
        .map(|(name, mesh)| -> Result<Vec<CheckRow>> {
            let (basis, _) = cache.basis(mesh, k_max)?;
            let mut rows = Vec::new();
            for &k in &options.ks {
                let c = k + options.extra_features;
                for seed in options.first_seed..options.first_seed + options.seeds {
                    let r = theory::check_theorem_with_basis(&basis, k, c, seed)?;
                    rows.push(CheckRow {
                        check: "map_equality",
                        subject: name.clone(),
                        k,
                        c,
                        seed,
                        metric: "fmap_gap",
                        value: r.fmap_gap,
                        passed: r.passed,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    for i in 0..options.lemma_instances {
        let seed = options.first_seed + i;
        let (n_x, n_y, c) = LEMMA_SIZES[i as usize % LEMMA_SIZES.len()];
        let subject = format!("{n_x}x{n_y}");
        let r = theory::check_lemma_repeated_rows(n_x, n_y, c, seed)?;
        rows.push(CheckRow {
            check: "repeated_rows",
            subject: subject.clone(),
            k: 0,
            c,
            seed,
            metric: "minimizers",
            value: r.minimizers.count as f64,
            passed: r.passed,
        });
        let r = theory::check_lemma_distinct_control(n_x, n_y, c, seed)?;
        rows.push(CheckRow {
            check: "distinct_rows",
            subject,
            k: 0,
            c,
            seed,
            metric: "minimizers",
            value: r.minimizers.count as f64,
            passed: r.passed,
        });
    }
    Ok(rows)
}
