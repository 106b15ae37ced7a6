//! Damage functions: cell-level quadratic losses with and without urban
//! heat island terms, calibration to a global damage function, and the
//! regional persistence recursion.
//!
//! Four variants are supported:
//!
//! | variant | urban UHI terms | persistence |
//! |---------|-----------------|-------------|
//! | `R`     | no              | no          |
//! | `RU`    | yes             | no          |
//! | `RP`    | no              | yes         |
//! | `RPU`   | yes             | yes         |
//!
//! Every run is calibrated with a per-year scaling factor so that the world
//! total of the `R` losses equals the chosen global damage function times
//! world GDP. The same factor multiplies the per-period losses of all
//! variants before persistence is applied.

use crate::axis::YearAxis;
use crate::climate::ClimateField;
use crate::region::{Region, RegionValues};
use crate::scenario::{Scenario, UrbanMask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Default quadratic coefficient of the global damage function.
pub const DICE2016_COEFFICIENT: f64 = 0.00236;

/// Cells per work unit of the parallel aggregation. Fixed so the summation
/// order never depends on the number of threads.
const CELL_CHUNK: usize = 2048;

#[derive(Debug, thiserror::Error)]
pub enum DamageError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {field} from {value:?}")]
    Parse {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error(transparent)]
    UnknownRegion(#[from] crate::region::UnknownRegion),
    #[error("duplicate parameters for region {0}")]
    DuplicateRegion(Region),
    #[error("damage coefficient for {region} must be non-negative, got {value}")]
    NegativeCoefficient { region: Region, value: f64 },
    #[error("persistence parameter must lie in [0, 1], got {0}")]
    PhiOutOfRange(f64),
    #[error("damage table must be strictly increasing in temperature and non-decreasing in damage")]
    NonMonotoneTable,
    #[error("damage table must start at (0, 0) and hold at least two points")]
    InvalidTable,
    #[error("invalid global damage function parameters: {0}")]
    InvalidGlobalDf(String),
    #[error("R-variant world losses are zero in {year} while the global damage function is not")]
    ZeroDenominator { year: i32 },
    #[error("axes disagree: {0} vs {1}")]
    AxisMismatch(YearAxis, YearAxis),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    R,
    RU,
    RP,
    RPU,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown damage-function variant {0:?} (expected R, RU, RP or RPU)")]
pub struct UnknownVariant(pub String);

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::R, Variant::RP, Variant::RU, Variant::RPU];

    pub fn code(self) -> &'static str {
        match self {
            Variant::R => "R",
            Variant::RU => "RU",
            Variant::RP => "RP",
            Variant::RPU => "RPU",
        }
    }

    pub fn has_uhi(self) -> bool {
        matches!(self, Variant::RU | Variant::RPU)
    }

    pub fn has_persistence(self) -> bool {
        matches!(self, Variant::RP | Variant::RPU)
    }

    /// The variant with the urban terms removed (`RU -> R`, `RPU -> RP`).
    pub fn without_uhi(self) -> Variant {
        match self {
            Variant::R | Variant::RU => Variant::R,
            Variant::RP | Variant::RPU => Variant::RP,
        }
    }
}

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R" => Ok(Variant::R),
            "RU" => Ok(Variant::RU),
            "RP" => Ok(Variant::RP),
            "RPU" => Ok(Variant::RPU),
            other => Err(UnknownVariant(other.to_string())),
        }
    }
}

impl TryFrom<String> for Variant {
    type Error = UnknownVariant;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> Self {
        v.code().to_string()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Per-region quadratic coefficients (fraction of GDP per °C²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionalDamageParams {
    pub alpha_r: RegionValues,
    pub alpha_u: RegionValues,
}

impl RegionalDamageParams {
    /// Same coefficient everywhere, urban equal to regional.
    pub fn uniform(alpha: f64) -> Self {
        let v = RegionValues([alpha; Region::COUNT]);
        Self { alpha_r: v, alpha_u: v }
    }

    pub fn validate(&self) -> Result<(), DamageError> {
        for values in [&self.alpha_r, &self.alpha_u] {
            for (region, value) in values.iter() {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(DamageError::NegativeCoefficient { region, value });
                }
            }
        }
        Ok(())
    }
}

impl Default for RegionalDamageParams {
    fn default() -> Self {
        Self::uniform(DICE2016_COEFFICIENT)
    }
}

/// Per-region persistence parameter φ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceParams {
    pub phi: RegionValues,
}

impl PersistenceParams {
    pub fn uniform(phi: f64) -> Result<Self, DamageError> {
        let p = Self {
            phi: RegionValues([phi; Region::COUNT]),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DamageError> {
        for (_, phi) in self.phi.iter() {
            check_phi(phi)?;
        }
        Ok(())
    }
}

impl Default for PersistenceParams {
    /// Placeholder φ = 0.5 in every region.
    fn default() -> Self {
        Self {
            phi: RegionValues([0.5; Region::COUNT]),
        }
    }
}

/// Damage coefficients and persistence per region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DamageParams {
    pub regional: RegionalDamageParams,
    pub persistence: PersistenceParams,
}

impl DamageParams {
    pub fn validate(&self) -> Result<(), DamageError> {
        self.regional.validate()?;
        self.persistence.validate()
    }
}

/// Reads a `region,alpha_r,alpha_u,phi` CSV. Regions not listed keep the
/// defaults; an empty `alpha_u` takes the region's `alpha_r`.
pub fn load_damage_params(path: &Path) -> Result<DamageParams, DamageError> {
    load_damage_params_over(path, DamageParams::default())
}

/// As [`load_damage_params`], with unlisted regions taken from `base`.
pub fn load_damage_params_over(path: &Path, base: DamageParams) -> Result<DamageParams, DamageError> {
    let file = std::fs::File::open(path).map_err(|source| DamageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_damage_params_over(file, base)
}

pub fn read_damage_params<R: std::io::Read>(reader: R) -> Result<DamageParams, DamageError> {
    read_damage_params_over(reader, DamageParams::default())
}

pub fn read_damage_params_over<R: std::io::Read>(reader: R, base: DamageParams) -> Result<DamageParams, DamageError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name).ok_or(DamageError::MissingColumn(name));
    let (region_col, ar_col, au_col, phi_col) = (col("region")?, col("alpha_r")?, col("alpha_u")?, col("phi")?);
    let mut params = base;
    let mut seen = [false; Region::COUNT];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(i).unwrap_or("");
        let region: Region = get(region_col).parse()?;
        if std::mem::replace(&mut seen[region.index()], true) {
            return Err(DamageError::DuplicateRegion(region));
        }
        let number = |field: &'static str, text: &str| {
            text.parse::<f64>().map_err(|_| DamageError::Parse {
                line,
                field,
                value: text.to_string(),
            })
        };
        let alpha_r = number("alpha_r", get(ar_col))?;
        let alpha_u = match get(au_col) {
            "" => alpha_r,
            text => number("alpha_u", text)?,
        };
        let phi = number("phi", get(phi_col))?;
        params.regional.alpha_r.set(region, alpha_r);
        params.regional.alpha_u.set(region, alpha_u);
        params.persistence.phi.set(region, phi);
    }
    params.validate()?;
    Ok(params)
}

/// Loss fraction of the regional quadratic damage function.
#[inline]
pub fn cell_damage_fraction_r(alpha_r: f64, t_ghg: f64) -> f64 {
    alpha_r * (t_ghg * t_ghg)
}

/// Loss fraction including the urban heat island terms:
/// `α_R T_GHG² + 2 α_U T_GHG T_UHI + α_U T_UHI²`.
///
/// With `α_U = α_R` this is evaluated as `α (T_GHG + T_UHI)²`.
#[inline]
pub fn cell_damage_fraction_ru(alpha_r: f64, alpha_u: f64, t_ghg: f64, t_uhi: f64) -> f64 {
    if alpha_u == alpha_r {
        let t = t_ghg + t_uhi;
        alpha_r * (t * t)
    } else {
        cell_damage_fraction_r(alpha_r, t_ghg) + 2.0 * alpha_u * t_ghg * t_uhi + alpha_u * t_uhi * t_uhi
    }
}

/// Piecewise-linear damage curve through `(temperature, fraction)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct DamageTable {
    points: Vec<[f64; 2]>,
}

impl DamageTable {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self, DamageError> {
        if points.len() < 2 || points[0] != [0.0, 0.0] {
            return Err(DamageError::InvalidTable);
        }
        let monotone = points
            .windows(2)
            .all(|w| w[1][0] > w[0][0] && w[1][1] >= w[0][1] && w[1][1].is_finite());
        if !monotone {
            return Err(DamageError::NonMonotoneTable);
        }
        Ok(Self { points })
    }

    /// Flat beyond the last point.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let last = self.points[self.points.len() - 1];
        if t >= last[0] {
            return last[1];
        }
        let i = self.points.partition_point(|p| p[0] <= t);
        let ([t0, d0], [t1, d1]) = (self.points[i - 1], self.points[i]);
        d0 + (d1 - d0) * (t - t0) / (t1 - t0)
    }
}

impl TryFrom<Vec<[f64; 2]>> for DamageTable {
    type Error = DamageError;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<DamageTable> for Vec<[f64; 2]> {
    fn from(t: DamageTable) -> Self {
        t.points
    }
}

/// Global damage function the grid losses are calibrated to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GlobalDf {
    /// `c T²`.
    Quadratic { coefficient: f64 },
    /// `d / (1 + d)` with `d = (T / s1)² + (T / s2)^p`.
    Weitzman { s1: f64, s2: f64, exponent: f64 },
    /// Linear interpolation in a monotone table.
    Table { points: DamageTable },
}

impl Default for GlobalDf {
    fn default() -> Self {
        GlobalDf::Quadratic {
            coefficient: DICE2016_COEFFICIENT,
        }
    }
}

impl GlobalDf {
    /// Parameters published with the Weitzman (2012) calibration.
    pub fn weitzman_default() -> Self {
        GlobalDf::Weitzman {
            s1: 20.46,
            s2: 6.081,
            exponent: 6.754,
        }
    }

    pub fn validate(&self) -> Result<(), DamageError> {
        let ok = match *self {
            GlobalDf::Quadratic { coefficient } => coefficient.is_finite() && coefficient >= 0.0,
            GlobalDf::Weitzman { s1, s2, exponent } => s1 > 0.0 && s2 > 0.0 && exponent > 0.0 && exponent.is_finite(),
            GlobalDf::Table { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(DamageError::InvalidGlobalDf(format!("{self:?}")))
        }
    }
}

/// Global loss fraction at global warming `t_global`. The Weitzman and
/// table forms treat negative anomalies as zero.
pub fn global_df_eval(df: &GlobalDf, t_global: f64) -> f64 {
    match df {
        GlobalDf::Quadratic { coefficient } => coefficient * t_global * t_global,
        GlobalDf::Weitzman { s1, s2, exponent } => {
            let t = t_global.max(0.0);
            let d = (t / s1).powi(2) + (t / s2).powf(*exponent);
            d / (1.0 + d)
        }
        GlobalDf::Table { points } => points.eval(t_global),
    }
}

/// Per-year calibration factor `S_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    axis: YearAxis,
    factors: Vec<f64>,
}

impl ScalingSeries {
    pub fn ones(axis: YearAxis) -> Self {
        Self::constant(axis, 1.0)
    }

    pub fn constant(axis: YearAxis, value: f64) -> Self {
        Self {
            axis,
            factors: vec![value; axis.len()],
        }
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn at(&self, t: usize) -> f64 {
        self.factors[t]
    }
}

/// `S_t = DF(T_t) Y_t / I^R_t`, or 1 where both are zero.
pub fn scaling_series(
    axis: YearAxis,
    world_gdp: &[f64],
    df: &GlobalDf,
    t_global: &[f64],
    r_aggregate: &[f64],
) -> Result<ScalingSeries, DamageError> {
    for got in [world_gdp.len(), t_global.len(), r_aggregate.len()] {
        if got != axis.len() {
            return Err(DamageError::LengthMismatch {
                expected: axis.len(),
                got,
            });
        }
    }
    let mut factors = Vec::with_capacity(axis.len());
    for t in 0..axis.len() {
        let target = global_df_eval(df, t_global[t]) * world_gdp[t];
        let implied = r_aggregate[t];
        let s = if implied != 0.0 {
            target / implied
        } else if target == 0.0 {
            1.0
        } else {
            return Err(DamageError::ZeroDenominator { year: axis.year_at(t) });
        };
        factors.push(s);
    }
    Ok(ScalingSeries { axis, factors })
}

fn check_phi(phi: f64) -> Result<(), DamageError> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(DamageError::PhiOutOfRange(phi))
    }
}

/// `I_t = L_t + φ I_{t-1}` with `I_1 = L_1`.
pub fn apply_persistence(per_period: &[f64], phi: f64) -> Result<Vec<f64>, DamageError> {
    check_phi(phi)?;
    let mut out = Vec::with_capacity(per_period.len());
    let mut carried = 0.0;
    for (i, &loss) in per_period.iter().enumerate() {
        carried = if i == 0 { loss } else { loss + phi * carried };
        out.push(carried);
    }
    Ok(out)
}

/// Whether a cell-year counts as urban.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellClass {
    NonUrban = 0,
    Urban = 1,
}

impl CellClass {
    pub const BOTH: [CellClass; 2] = [CellClass::NonUrban, CellClass::Urban];

    fn from_flag(urban: bool) -> Self {
        if urban {
            CellClass::Urban
        } else {
            CellClass::NonUrban
        }
    }
}

/// USD losses by region, cell class and year.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionalLosses {
    axis: YearAxis,
    data: Vec<f64>,
}

impl RegionalLosses {
    pub fn zeros(axis: YearAxis) -> Self {
        Self {
            axis,
            data: vec![0.0; Region::COUNT * 2 * axis.len()],
        }
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    #[inline]
    fn offset(&self, region: usize, class: CellClass) -> usize {
        (region * 2 + class as usize) * self.axis.len()
    }

    /// Year series for one region and class.
    pub fn series(&self, region: Region, class: CellClass) -> &[f64] {
        let o = self.offset(region.index(), class);
        &self.data[o..o + self.axis.len()]
    }

    fn series_mut(&mut self, region: usize, class: CellClass) -> &mut [f64] {
        let o = self.offset(region, class);
        let n = self.axis.len();
        &mut self.data[o..o + n]
    }

    pub fn get(&self, region: Region, class: CellClass, t: usize) -> f64 {
        self.series(region, class)[t]
    }

    pub fn add(&mut self, region: Region, class: CellClass, t: usize, value: f64) {
        self.series_mut(region.index(), class)[t] += value;
    }

    pub fn region_total(&self, region: Region, t: usize) -> f64 {
        self.get(region, CellClass::NonUrban, t) + self.get(region, CellClass::Urban, t)
    }

    /// World losses per year, summed over regions in report order.
    pub fn world(&self) -> Vec<f64> {
        (0..self.axis.len())
            .map(|t| Region::ALL.iter().map(|&r| self.region_total(r, t)).sum())
            .collect()
    }

    /// Adds another aggregate elementwise.
    pub fn accumulate(&mut self, other: &RegionalLosses) {
        debug_assert_eq!(self.axis, other.axis);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scaled(&self, scaling: &ScalingSeries) -> Result<Self, DamageError> {
        if scaling.axis != self.axis {
            return Err(DamageError::AxisMismatch(scaling.axis, self.axis));
        }
        let n = self.axis.len();
        let mut out = self.clone();
        for chunk in out.data.chunks_exact_mut(n) {
            for (v, s) in chunk.iter_mut().zip(&scaling.factors) {
                *v *= s;
            }
        }
        Ok(out)
    }

    /// Applies the persistence recursion to every region and class
    /// separately. The recursion is linear, so class totals add up to the
    /// persistent region total.
    pub fn with_persistence(&self, params: &PersistenceParams) -> Result<Self, DamageError> {
        let mut out = self.clone();
        for region in Region::ALL {
            for class in CellClass::BOTH {
                let persisted = apply_persistence(self.series(region, class), params.phi.get(region))?;
                out.series_mut(region.index(), class).copy_from_slice(&persisted);
            }
        }
        Ok(out)
    }
}

/// Per-period (unscaled) losses of one run under both the `R` and `RU`
/// damage functions.
#[derive(Debug, Clone)]
pub struct PeriodLosses {
    pub r: RegionalLosses,
    pub ru: RegionalLosses,
}

fn check_axes(scenario: &Scenario, mask: &UrbanMask, field: &ClimateField) -> Result<(), DamageError> {
    let axis = scenario.axis();
    for other in [mask.axis(), field.axis()] {
        if other != axis {
            return Err(DamageError::AxisMismatch(axis, other));
        }
    }
    if field.n_cells() != scenario.n_cells() {
        return Err(DamageError::LengthMismatch {
            expected: scenario.n_cells(),
            got: field.n_cells(),
        });
    }
    Ok(())
}

/// Aggregates cell losses to region, class and year.
///
/// Cells are processed in fixed-size chunks in parallel; the partial sums
/// are then combined in chunk order, so the result is bit-identical for any
/// number of worker threads.
pub fn period_losses(
    scenario: &Scenario,
    mask: &UrbanMask,
    field: &ClimateField,
    params: &RegionalDamageParams,
) -> Result<PeriodLosses, DamageError> {
    check_axes(scenario, mask, field)?;
    let axis = scenario.axis();
    let n = axis.len();
    let n_cells = scenario.n_cells();
    let starts: Vec<usize> = (0..n_cells).step_by(CELL_CHUNK).collect();
    let partials: Vec<PeriodLosses> = starts
        .par_iter()
        .map(|&start| {
            let mut r = RegionalLosses::zeros(axis);
            let mut ru = RegionalLosses::zeros(axis);
            let anomaly = field.anomaly();
            let coefficient = field.uhi_coefficient();
            for c in start..(start + CELL_CHUNK).min(n_cells) {
                let region = scenario.cells()[c].region;
                let (alpha_r, alpha_u) = (params.alpha_r.get(region), params.alpha_u.get(region));
                let slope = field.slopes()[c];
                let gdp = scenario.cell_gdp(c);
                let flags = mask.cell_flags(c);
                let basis = &field.basis().values()[c * n..(c + 1) * n];
                for t in 0..n {
                    let t_ghg = slope * anomaly[t];
                    let t_uhi = coefficient[t] * basis[t];
                    let class = CellClass::from_flag(flags[t]);
                    let o = r.offset(region.index(), class) + t;
                    r.data[o] += gdp[t] * cell_damage_fraction_r(alpha_r, t_ghg);
                    ru.data[o] += gdp[t] * cell_damage_fraction_ru(alpha_r, alpha_u, t_ghg, t_uhi);
                }
            }
            PeriodLosses { r, ru }
        })
        .collect();
    let mut total = PeriodLosses {
        r: RegionalLosses::zeros(axis),
        ru: RegionalLosses::zeros(axis),
    };
    for p in &partials {
        total.r.accumulate(&p.r);
        total.ru.accumulate(&p.ru);
    }
    Ok(total)
}

/// Calibrated losses of one run for every variant.
#[derive(Debug, Clone)]
pub struct RunLosses {
    pub scaling: ScalingSeries,
    /// Scaled per-period losses without UHI terms.
    pub r: RegionalLosses,
    /// Scaled per-period losses with UHI terms.
    pub ru: RegionalLosses,
    pub persistence: PersistenceParams,
}

impl RunLosses {
    /// Calibrates per-period losses against the global damage function.
    pub fn calibrate(
        period: &PeriodLosses,
        world_gdp: &[f64],
        df: &GlobalDf,
        t_global: &[f64],
        persistence: PersistenceParams,
    ) -> Result<Self, DamageError> {
        persistence.validate()?;
        let axis = period.r.axis();
        let scaling = scaling_series(axis, world_gdp, df, t_global, &period.r.world())?;
        Ok(Self {
            r: period.r.scaled(&scaling)?,
            ru: period.ru.scaled(&scaling)?,
            scaling,
            persistence,
        })
    }

    /// Final losses for a variant (with persistence where the variant has it).
    pub fn variant(&self, variant: Variant) -> Result<RegionalLosses, DamageError> {
        let per_period = if variant.has_uhi() { &self.ru } else { &self.r };
        if variant.has_persistence() {
            per_period.with_persistence(&self.persistence)
        } else {
            Ok(per_period.clone())
        }
    }
}

/// Full calibrated losses for a scenario, climate field and damage setup.
pub fn run_losses(
    scenario: &Scenario,
    mask: &UrbanMask,
    field: &ClimateField,
    params: &DamageParams,
    df: &GlobalDf,
) -> Result<RunLosses, DamageError> {
    df.validate()?;
    params.validate()?;
    let period = period_losses(scenario, mask, field, &params.regional)?;
    RunLosses::calibrate(&period, &scenario.world_gdp(), df, field.anomaly(), params.persistence)
}

/// Cell-level detail of a ledger, cell-major like the scenario arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLosses {
    /// Scaled loss fraction of GDP.
    pub loss_fraction: Vec<f64>,
    /// Scaled per-period loss, USD-2005.
    pub loss_usd: Vec<f64>,
}

/// Losses of one run under one variant.
#[derive(Debug, Clone)]
pub struct DamageLedger {
    variant: Variant,
    cells: CellLosses,
    scaling: ScalingSeries,
    persistence: PersistenceParams,
    per_period: RegionalLosses,
    regional: RegionalLosses,
}

impl DamageLedger {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn axis(&self) -> YearAxis {
        self.per_period.axis()
    }

    pub fn cells(&self) -> &CellLosses {
        &self.cells
    }

    pub fn scaling(&self) -> &ScalingSeries {
        &self.scaling
    }

    /// Scaled losses before persistence.
    pub fn per_period(&self) -> &RegionalLosses {
        &self.per_period
    }

    /// Final regional losses; for persistent variants this is the carried
    /// value `I^p`.
    pub fn regional(&self) -> &RegionalLosses {
        &self.regional
    }

    /// Multiplies every per-period loss by `s` and recomputes persistence.
    pub fn apply_scaling(&self, s: &ScalingSeries) -> Result<DamageLedger, DamageError> {
        let axis = self.axis();
        if s.axis != axis {
            return Err(DamageError::AxisMismatch(s.axis, axis));
        }
        let n = axis.len();
        let mut cells = self.cells.clone();
        for (frac, usd) in cells.loss_fraction.chunks_exact_mut(n).zip(cells.loss_usd.chunks_exact_mut(n)) {
            for t in 0..n {
                frac[t] *= s.factors[t];
                usd[t] *= s.factors[t];
            }
        }
        let per_period = self.per_period.scaled(s)?;
        let regional = finish(self.variant, &per_period, &self.persistence)?;
        let scaling = ScalingSeries {
            axis,
            factors: self.scaling.factors.iter().zip(&s.factors).map(|(a, b)| a * b).collect(),
        };
        Ok(DamageLedger {
            variant: self.variant,
            cells,
            scaling,
            persistence: self.persistence,
            per_period,
            regional,
        })
    }
}

fn finish(variant: Variant, per_period: &RegionalLosses, persistence: &PersistenceParams) -> Result<RegionalLosses, DamageError> {
    if variant.has_persistence() {
        per_period.with_persistence(persistence)
    } else {
        Ok(per_period.clone())
    }
}

/// Builds a calibrated ledger with cell-level detail.
///
/// The scaling factor always comes from the `R` losses of this run, whatever
/// the requested variant.
pub fn build_ledger(
    scenario: &Scenario,
    mask: &UrbanMask,
    field: &ClimateField,
    variant: Variant,
    params: &DamageParams,
    df: &GlobalDf,
) -> Result<DamageLedger, DamageError> {
    let run = run_losses(scenario, mask, field, params, df)?;
    let n = scenario.axis().len();
    let mut loss_fraction = Vec::with_capacity(scenario.n_cells() * n);
    let mut loss_usd = Vec::with_capacity(scenario.n_cells() * n);
    for (c, cell) in scenario.cells().iter().enumerate() {
        let (alpha_r, alpha_u) = (params.regional.alpha_r.get(cell.region), params.regional.alpha_u.get(cell.region));
        let gdp = scenario.cell_gdp(c);
        for t in 0..n {
            let t_ghg = field.t_ghg(c, t);
            let raw = if variant.has_uhi() {
                cell_damage_fraction_ru(alpha_r, alpha_u, t_ghg, field.t_uhi(c, t))
            } else {
                cell_damage_fraction_r(alpha_r, t_ghg)
            };
            let fraction = raw * run.scaling.at(t);
            loss_fraction.push(fraction);
            loss_usd.push(fraction * gdp[t]);
        }
    }
    let per_period = if variant.has_uhi() { run.ru.clone() } else { run.r.clone() };
    let regional = run.variant(variant)?;
    Ok(DamageLedger {
        variant,
        cells: CellLosses { loss_fraction, loss_usd },
        scaling: run.scaling,
        persistence: params.persistence,
        per_period,
        regional,
    })
}

/// Ledgers for several variants, keyed by variant.
pub fn build_ledgers(
    scenario: &Scenario,
    mask: &UrbanMask,
    field: &ClimateField,
    variants: &[Variant],
    params: &DamageParams,
    df: &GlobalDf,
) -> Result<BTreeMap<Variant, DamageLedger>, DamageError> {
    variants
        .iter()
        .map(|&v| build_ledger(scenario, mask, field, v, params, df).map(|l| (v, l)))
        .collect()
}
