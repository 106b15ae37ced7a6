//! Batch orchestration: loads inputs, runs the ensemble of baseline and
//! pulsed simulations, and writes reports.
//!
//! The ensemble is the product of ECS draws and pattern files. Members run
//! in parallel and are collected in a fixed order; every reduction inside a
//! member is deterministic, so outputs do not depend on the thread count.

pub mod config;
pub mod manifest;
pub mod report;

pub use config::{load_config, validate_config, ConfigError, DamageConfig, EcsConfig, PulseConfig, RunConfig, UhiConfig};
pub use manifest::RunManifest;
pub use report::{emit_reports, ReportError, Reports};

use crate::climate::{
    load_pattern, load_trajectory, sample_ecs, scale_trajectory, ClimateError, ClimateField, GlobalTrajectory, PatternField,
    UhiBasis, UhiOptions, REFERENCE_ECS,
};
use crate::damage::{
    load_damage_params_over, run_losses, DamageError, DamageParams, PersistenceParams, RegionalDamageParams, RunLosses,
    Variant,
};
use crate::pulse::{perturbed_trajectory_scaled, PulseError};
use crate::region::{Region, RegionValues};
use crate::scc::{
    decompose, scc_from_losses, scuhi_one_percent, Decomposition, DiscountSpec, SccError, SccReport, ScuhiInputs, ScuhiReport,
};
use crate::scenario::{classify_urban, load_scenario, Scenario, ScenarioMeta, UrbanMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Data { context: String, source: BoxError },
    #[error("{context}: {source}")]
    Runtime { context: String, source: BoxError },
}

impl RunError {
    /// Process exit status: 2 config, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data { .. } => 3,
            RunError::Runtime { .. } => 4,
        }
    }
}

fn data<E: Into<BoxError>>(context: impl Into<String>) -> impl FnOnce(E) -> RunError {
    let context = context.into();
    move |e| RunError::Data {
        context,
        source: e.into(),
    }
}

fn runtime<E: Into<BoxError>>(context: impl Into<String>) -> impl FnOnce(E) -> RunError {
    let context = context.into();
    move |e| RunError::Runtime {
        context,
        source: e.into(),
    }
}

/// Loaded and cross-checked inputs of a run.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub scenario: Scenario,
    pub trajectory: GlobalTrajectory,
    pub patterns: Vec<PatternField>,
    pub damage: DamageParams,
    /// Config threshold unless the scenario sidecar overrides it.
    pub urban_threshold: f64,
    pub warnings: Vec<String>,
}

impl RunInputs {
    /// Inputs built in memory; damage parameters and threshold come from
    /// the config.
    pub fn new(scenario: Scenario, trajectory: GlobalTrajectory, patterns: Vec<PatternField>, config: &RunConfig) -> Self {
        Self {
            scenario,
            trajectory,
            patterns,
            damage: uniform_damage(&config.damage),
            urban_threshold: config.urban_threshold,
            warnings: Vec::new(),
        }
    }
}

fn uniform_damage(d: &DamageConfig) -> DamageParams {
    let mut regional = RegionalDamageParams::uniform(d.alpha_r);
    regional.alpha_u = RegionValues([d.alpha_u.unwrap_or(d.alpha_r); Region::COUNT]);
    DamageParams {
        regional,
        persistence: PersistenceParams {
            phi: RegionValues([d.phi; Region::COUNT]),
        },
    }
}

pub fn load_inputs(config: &RunConfig) -> Result<RunInputs, RunError> {
    let mut warnings = Vec::new();
    let sidecar = ScenarioMeta::load_sidecar(&config.scenario).map_err(data("scenario sidecar"))?;
    let meta = sidecar.unwrap_or_default();
    let mut urban_threshold = config.urban_threshold;
    if let Some(t) = meta.threshold {
        if t != urban_threshold {
            warnings.push(format!("scenario sidecar sets urban threshold {t} (config {urban_threshold})"));
        }
        urban_threshold = t;
    }
    let scenario = load_scenario(&config.scenario, &meta).map_err(data(format!("scenario {}", config.scenario.display())))?;
    let trajectory = load_trajectory(&config.trajectory).map_err(data(format!("trajectory {}", config.trajectory.display())))?;
    let patterns = config
        .patterns
        .iter()
        .map(|p| load_pattern(p).map_err(data(format!("pattern {}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut damage = uniform_damage(&config.damage);
    if let Some(path) = &config.damage.params_file {
        damage = load_damage_params_over(path, damage).map_err(data(format!("damage parameters {}", path.display())))?;
    }
    Ok(RunInputs {
        scenario,
        trajectory,
        patterns,
        damage,
        urban_threshold,
        warnings,
    })
}

/// ECS value of every draw, in draw order.
pub fn ecs_draws(config: &RunConfig, seed: u64) -> Vec<f64> {
    match config.ecs {
        EcsConfig::Fixed { value } => vec![value],
        EcsConfig::Sample { draws, .. } => {
            let dist = config.ecs_distribution().unwrap_or_default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..draws).map(|_| sample_ecs(&dist, rng.random::<f64>())).collect()
        }
    }
}

/// Seed actually used: the command-line override, else the config seed.
pub fn resolve_seed(config: &RunConfig, cli_seed: Option<u64>) -> u64 {
    cli_seed.unwrap_or(match config.ecs {
        EcsConfig::Sample { seed, .. } => seed,
        EcsConfig::Fixed { .. } => 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Member {
    pub ecs: f64,
    pub pattern: String,
}

/// Per-member results of one variant at one discount rate.
#[derive(Debug, Clone)]
pub struct VariantResults {
    pub variant: Variant,
    pub scc: Vec<SccReport>,
    /// Urban variants only.
    pub decomposition: Vec<Decomposition>,
    /// Urban variants only.
    pub scuhi: Vec<ScuhiReport>,
}

#[derive(Debug, Clone)]
pub struct RateResults {
    pub discount: DiscountSpec,
    pub variants: Vec<VariantResults>,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub members: Vec<Member>,
    pub rates: Vec<RateResults>,
    pub warnings: Vec<String>,
}

struct MemberOutput {
    /// `[rate][variant]`
    results: Vec<Vec<(SccReport, Option<Decomposition>, Option<ScuhiReport>)>>,
    warnings: BTreeSet<String>,
}

struct Shared<'a> {
    inputs: &'a RunInputs,
    config: &'a RunConfig,
    mask: UrbanMask,
    basis: UhiBasis,
    slopes: Vec<Arc<[f64]>>,
    specs: Vec<DiscountSpec>,
    regional_gdp: Vec<RegionValues>,
    missing: Vec<Region>,
}

/// Runs every ensemble member and collects results in member order.
pub fn run_ensemble(inputs: &RunInputs, config: &RunConfig, seed: u64) -> Result<RunResults, RunError> {
    let scenario = &inputs.scenario;
    let axis = scenario.axis();
    let mut warnings: BTreeSet<String> = inputs.warnings.iter().cloned().collect();
    let missing = scenario.missing_regions();
    if !missing.is_empty() {
        let codes: Vec<_> = missing.iter().map(|r| r.code()).collect();
        warnings.insert(format!("no cells for regions {}; their SCC is reported as 0", codes.join(", ")));
    }
    if config.horizon > axis.last() {
        warnings.insert(format!("horizon {} beyond scenario end {}; damages truncated", config.horizon, axis.last()));
    }
    if config.discount_base_year() < axis.first() {
        warnings.insert(format!(
            "discounting starts in {} before the scenario start {}; earlier damages are not counted",
            config.discount_base_year(),
            axis.first()
        ));
    }
    let mask = classify_urban(scenario, inputs.urban_threshold).map_err(data("urban mask"))?;
    let uhi = config.uhi.params();
    let basis = UhiBasis::build(scenario, &mask, uhi.b, UhiOptions { ratchet: config.uhi.ratchet });
    let slopes = inputs
        .patterns
        .iter()
        .map(|p| p.align(scenario).map(Arc::from).map_err(data(format!("pattern {}", p.model_tag()))))
        .collect::<Result<Vec<Arc<[f64]>>, _>>()?;
    let shared = Shared {
        inputs,
        config,
        mask,
        basis,
        slopes,
        specs: config.discount_specs(),
        regional_gdp: (0..axis.len()).map(|t| scenario.regional_exposure(t).1).collect(),
        missing,
    };

    let draws = ecs_draws(config, seed);
    let members: Vec<(f64, usize)> = draws.iter().flat_map(|&e| (0..inputs.patterns.len()).map(move |p| (e, p))).collect();
    let outputs = members
        .par_iter()
        .map(|&(ecs, p)| run_member(&shared, ecs, p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rates: Vec<RateResults> = shared
        .specs
        .iter()
        .map(|&discount| RateResults {
            discount,
            variants: config
                .variants
                .iter()
                .map(|&variant| VariantResults {
                    variant,
                    scc: Vec::with_capacity(members.len()),
                    decomposition: Vec::new(),
                    scuhi: Vec::new(),
                })
                .collect(),
        })
        .collect();
    for out in outputs {
        warnings.extend(out.warnings);
        for (rate, per_variant) in rates.iter_mut().zip(out.results) {
            for (slot, (scc, dec, scuhi)) in rate.variants.iter_mut().zip(per_variant) {
                slot.scc.push(scc);
                slot.decomposition.extend(dec);
                slot.scuhi.extend(scuhi);
            }
        }
    }
    Ok(RunResults {
        members: members
            .iter()
            .map(|&(ecs, p)| Member {
                ecs,
                pattern: inputs.patterns[p].model_tag().to_string(),
            })
            .collect(),
        rates,
        warnings: warnings.into_iter().collect(),
    })
}

fn run_member(shared: &Shared, ecs: f64, pattern: usize) -> Result<MemberOutput, RunError> {
    let inputs = shared.inputs;
    let config = shared.config;
    let scenario = &inputs.scenario;
    let axis = scenario.axis();
    let pulse = config.pulse.params();
    let tag = format!("member ecs={ecs} pattern={}", inputs.patterns[pattern].model_tag());

    let reference = scale_trajectory(&inputs.trajectory, ecs, REFERENCE_ECS).map_err(data(tag.clone()))?;
    let scale = if config.pulse.scale_with_ecs { ecs / REFERENCE_ECS } else { 1.0 };
    let pulsed = perturbed_trajectory_scaled(&reference, &pulse, scale).map_err(data::<PulseError>(tag.clone()))?;
    let field_of = |g: &GlobalTrajectory| -> Result<ClimateField, RunError> {
        let anomaly = g.slice(axis).map_err(data::<ClimateError>(tag.clone()))?;
        Ok(ClimateField::from_parts(
            axis,
            shared.slopes[pattern].clone(),
            anomaly,
            shared.basis.clone(),
            config.uhi.a,
        ))
    };
    let base_field = field_of(&reference)?;
    let pulsed_field = field_of(&pulsed)?;
    let losses = |f: &ClimateField| -> Result<RunLosses, RunError> {
        run_losses(scenario, &shared.mask, f, &inputs.damage, &config.global_df).map_err(runtime::<DamageError>(tag.clone()))
    };
    let base = losses(&base_field)?;
    let pulsed = losses(&pulsed_field)?;

    let mut warnings = BTreeSet::new();
    let mut finals = Vec::new();
    for &v in &config.variants {
        let b = base.variant(v).map_err(runtime::<DamageError>(tag.clone()))?;
        let p = pulsed.variant(v).map_err(runtime::<DamageError>(tag.clone()))?;
        if v.has_persistence() {
            check_exceeds_gdp(v, &b, &shared.regional_gdp, &mut warnings);
        }
        finals.push((v, b, p));
    }
    let without = |v: Variant| -> Result<_, RunError> {
        Ok((
            base.variant(v.without_uhi()).map_err(runtime::<DamageError>(tag.clone()))?,
            pulsed.variant(v.without_uhi()).map_err(runtime::<DamageError>(tag.clone()))?,
        ))
    };
    let scc_err = runtime::<SccError>;
    let mut results = Vec::with_capacity(shared.specs.len());
    for spec in &shared.specs {
        let mut per_variant = Vec::with_capacity(finals.len());
        for (v, b, p) in &finals {
            let mut report = scc_from_losses(*v, b, p, spec, &pulse).map_err(scc_err(tag.clone()))?;
            report.missing = shared.missing.clone();
            let (dec, scuhi) = if v.has_uhi() {
                let (wb, wp) = without(*v)?;
                let dec = decompose(*v, (&wb, &wp), (b, p), spec, &pulse).map_err(scc_err(tag.clone()))?;
                let scuhi_inputs = ScuhiInputs {
                    scenario,
                    mask: &shared.mask,
                    field: &base_field,
                    uhi: config.uhi.params(),
                    damage: &inputs.damage,
                    scaling: &base.scaling,
                    variant: *v,
                    discount: spec,
                };
                let scuhi = scuhi_one_percent(&scuhi_inputs, &config.scuhi).map_err(scc_err(tag.clone()))?;
                (Some(dec), Some(scuhi))
            } else {
                (None, None)
            };
            per_variant.push((report, dec, scuhi));
        }
        results.push(per_variant);
    }
    Ok(MemberOutput { results, warnings })
}

fn check_exceeds_gdp(
    variant: Variant,
    losses: &crate::damage::RegionalLosses,
    regional_gdp: &[RegionValues],
    warnings: &mut BTreeSet<String>,
) {
    let axis = losses.axis();
    for region in Region::ALL {
        if let Some(t) = (0..axis.len()).find(|&t| losses.region_total(region, t) > regional_gdp[t].get(region)) {
            warnings.insert(format!(
                "{variant} losses exceed GDP in {} from {} (reported uncapped)",
                region.code(),
                axis.year_at(t)
            ));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config output directory.
    pub out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "gridscc-out";

/// Runs a validated config end to end and writes all reports.
///
/// Files are written to a staging directory inside the output directory
/// and moved into place only once everything has succeeded.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary, RunError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let out_dir = options
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let seed = resolve_seed(config, options.seed);
    let threads = options.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime::<rayon::ThreadPoolBuildError>("thread pool"))?;

    let (inputs, results) = pool.install(|| -> Result<_, RunError> {
        let inputs = load_inputs(config)?;
        let results = run_ensemble(&inputs, config, seed)?;
        Ok((inputs, results))
    })?;
    for w in &results.warnings {
        log::warn!("{w}");
    }
    let reports = Reports::from_results(&results, &config.quantiles).map_err(runtime::<ReportError>("ensemble summary"))?;

    std::fs::create_dir_all(&out_dir).map_err(runtime::<std::io::Error>(format!("creating {}", out_dir.display())))?;
    let staging = tempfile::Builder::new()
        .prefix(".gridscc-staging-")
        .tempdir_in(&out_dir)
        .map_err(runtime::<std::io::Error>("staging directory"))?;
    let mut names = emit_reports(staging.path(), &reports).map_err(runtime::<ReportError>("writing reports"))?;

    let mut manifest = RunManifest::new(config, &inputs, &results, seed, &ecs_draws(config, seed))
        .map_err(runtime::<std::io::Error>("hashing inputs"))?;
    manifest.record_outputs(staging.path(), &names).map_err(runtime::<std::io::Error>("hashing outputs"))?;
    manifest.finish(started, clock.elapsed(), pool.current_num_threads());
    manifest.write(&staging.path().join(manifest::MANIFEST)).map_err(runtime::<std::io::Error>("writing manifest"))?;
    names.push(manifest::MANIFEST.to_string());

    let files = promote(staging.path(), &out_dir, &names)?;
    Ok(RunSummary {
        out_dir,
        files,
        warnings: results.warnings,
    })
}

/// Moves staged files into the output directory; on failure removes the
/// ones already moved.
fn promote(staging: &Path, out_dir: &Path, names: &[String]) -> Result<Vec<PathBuf>, RunError> {
    let mut moved = Vec::new();
    for name in names {
        let target = out_dir.join(name);
        if let Err(e) = std::fs::rename(staging.join(name), &target) {
            for m in &moved {
                let _ = std::fs::remove_file(m);
            }
            return Err(runtime::<std::io::Error>(format!("moving {name} into place"))(e));
        }
        moved.push(target);
    }
    Ok(moved)
}

pub(crate) fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}
