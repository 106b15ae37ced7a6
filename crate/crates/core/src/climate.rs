//! Hazard layer: pattern-scaled local warming, climate sensitivity sampling
//! and urban heat island (UHI) intensity.

use crate::axis::YearAxis;
use crate::scenario::{GridCell, Scenario, UrbanMask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Climate sensitivity the reference trajectories are assumed to carry.
pub const REFERENCE_ECS: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum ClimateError {
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
    #[error("pattern file has unsupported column `{0}` (temperature slopes only)")]
    UnsupportedPatternColumn(String),
    #[error("no pattern slope for cell {0}")]
    MissingPattern(u64),
    #[error("duplicate entry for {0}")]
    Duplicate(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("trajectory years must be consecutive; found {0} after {1}")]
    NonConsecutiveYears(i32, i32),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory {have} does not cover {need}")]
    AxisMismatch { have: YearAxis, need: YearAxis },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("year {0} not on the trajectory axis")]
    YearOutOfRange(i32),
    #[error("climate sensitivity must be positive, got {0}")]
    NonPositiveEcs(f64),
    #[error("triangular distribution needs lower < mode < upper, got ({0}, {1}, {2})")]
    InvalidDistribution(f64, f64, f64),
    #[error("UHI parameters need a >= 0 and 0 < b < 1, got a = {0}, b = {1}")]
    InvalidUhiParams(f64, f64),
}

/// Global mean temperature anomaly (°C above pre-industrial) per year.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTrajectory {
    label: String,
    axis: YearAxis,
    anomaly: Vec<f64>,
}

impl GlobalTrajectory {
    pub fn new(label: impl Into<String>, axis: YearAxis, anomaly: Vec<f64>) -> Result<Self, ClimateError> {
        if anomaly.len() != axis.len() {
            return Err(ClimateError::LengthMismatch {
                expected: axis.len(),
                got: anomaly.len(),
            });
        }
        if anomaly.iter().any(|v| !v.is_finite()) {
            return Err(ClimateError::NonFinite("trajectory"));
        }
        Ok(Self {
            label: label.into(),
            axis,
            anomaly,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.anomaly
    }

    pub fn at(&self, year: i32) -> Option<f64> {
        self.axis.index_of(year).map(|i| self.anomaly[i])
    }

    /// The anomaly restricted to `axis`.
    pub fn slice(&self, axis: YearAxis) -> Result<Vec<f64>, ClimateError> {
        if !self.axis.covers(&axis) {
            return Err(ClimateError::AxisMismatch {
                have: self.axis,
                need: axis,
            });
        }
        let start = self.axis.index_of(axis.first()).unwrap();
        Ok(self.anomaly[start..start + axis.len()].to_vec())
    }

    pub(crate) fn map_values(&self, label: String, f: impl Fn(i32, f64) -> f64) -> Self {
        Self {
            label,
            axis: self.axis,
            anomaly: self.axis.years().zip(&self.anomaly).map(|(y, &v)| f(y, v)).collect(),
        }
    }
}

/// Reads a `year,anomaly_degC` CSV with consecutive years.
pub fn load_trajectory(path: &Path) -> Result<GlobalTrajectory, ClimateError> {
    let file = open(path)?;
    let label = file_label(path);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let year_col = column(&headers, "year")?;
    let value_col = column(&headers, "anomaly_degC")?;
    let mut first = None;
    let mut prev: Option<i32> = None;
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let year: i32 = parse(line, "year", record.get(year_col).unwrap_or(""))?;
        let v: f64 = parse(line, "anomaly_degC", record.get(value_col).unwrap_or(""))?;
        if let Some(p) = prev {
            if year != p + 1 {
                return Err(ClimateError::NonConsecutiveYears(year, p));
            }
        }
        first.get_or_insert(year);
        prev = Some(year);
        values.push(v);
    }
    let (Some(first), Some(last)) = (first, prev) else {
        return Err(ClimateError::EmptyTrajectory);
    };
    GlobalTrajectory::new(label, YearAxis::new(first, last).unwrap(), values)
}

/// Per-cell ratio of local to global warming.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternField {
    model_tag: String,
    slopes: HashMap<u64, f64>,
}

impl PatternField {
    pub fn new(model_tag: impl Into<String>, slopes: HashMap<u64, f64>) -> Result<Self, ClimateError> {
        if slopes.values().any(|s| !s.is_finite()) {
            return Err(ClimateError::NonFinite("pattern slope"));
        }
        Ok(Self {
            model_tag: model_tag.into(),
            slopes,
        })
    }

    /// Same slope everywhere; handy for tests and sensitivity runs.
    pub fn uniform(model_tag: impl Into<String>, cells: &[GridCell], slope: f64) -> Result<Self, ClimateError> {
        Self::new(model_tag, cells.iter().map(|c| (c.cell_id, slope)).collect())
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn slope(&self, cell_id: u64) -> Result<f64, ClimateError> {
        self.slopes.get(&cell_id).copied().ok_or(ClimateError::MissingPattern(cell_id))
    }

    /// Slopes in scenario cell order.
    pub fn align(&self, scenario: &Scenario) -> Result<Vec<f64>, ClimateError> {
        scenario.cells().iter().map(|c| self.slope(c.cell_id)).collect()
    }
}

/// Reads a `cell_id,slope` CSV. Any other column (precipitation slopes in
/// particular) is rejected.
pub fn load_pattern(path: &Path) -> Result<PatternField, ClimateError> {
    let file = open(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "cell_id")?;
    let slope_col = column(&headers, "slope")?;
    if let Some(extra) = headers.iter().find(|h| *h != "cell_id" && *h != "slope") {
        return Err(ClimateError::UnsupportedPatternColumn(extra.to_string()));
    }
    let mut slopes = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id: u64 = parse(line, "cell_id", record.get(id_col).unwrap_or(""))?;
        let slope: f64 = parse(line, "slope", record.get(slope_col).unwrap_or(""))?;
        if slopes.insert(id, slope).is_some() {
            return Err(ClimateError::Duplicate(format!("cell {id}")));
        }
    }
    PatternField::new(file_label(path), slopes)
}

/// Triangular distribution of equilibrium climate sensitivity (°C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcsDistribution {
    lower: f64,
    mode: f64,
    upper: f64,
}

impl Default for EcsDistribution {
    fn default() -> Self {
        Self {
            lower: 2.0,
            mode: 3.0,
            upper: 5.0,
        }
    }
}

impl EcsDistribution {
    pub fn new(lower: f64, mode: f64, upper: f64) -> Result<Self, ClimateError> {
        if !(lower < mode && mode < upper) {
            return Err(ClimateError::InvalidDistribution(lower, mode, upper));
        }
        Ok(Self { lower, mode, upper })
    }

    pub fn mean(&self) -> f64 {
        (self.lower + self.mode + self.upper) / 3.0
    }

    pub fn variance(&self) -> f64 {
        let (a, c, b) = (self.lower, self.mode, self.upper);
        (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.lower, self.mode, self.upper);
        if x <= a {
            0.0
        } else if x <= c {
            (x - a).powi(2) / ((b - a) * (c - a))
        } else if x < b {
            1.0 - (b - x).powi(2) / ((b - a) * (b - c))
        } else {
            1.0
        }
    }
}

/// Inverse CDF of the triangular distribution at `u` (clamped to [0, 1]).
pub fn sample_ecs(dist: &EcsDistribution, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let (a, c, b) = (dist.lower, dist.mode, dist.upper);
    let at_mode = (c - a) / (b - a);
    if u <= at_mode {
        a + (u * (b - a) * (c - a)).sqrt()
    } else {
        b - ((1.0 - u) * (b - a) * (b - c)).sqrt()
    }
}

/// Rescales a reference trajectory linearly to another climate sensitivity.
pub fn scale_trajectory(reference: &GlobalTrajectory, ecs: f64, reference_ecs: f64) -> Result<GlobalTrajectory, ClimateError> {
    if !(reference_ecs > 0.0) {
        return Err(ClimateError::NonPositiveEcs(reference_ecs));
    }
    if !(ecs > 0.0) {
        return Err(ClimateError::NonPositiveEcs(ecs));
    }
    let factor = ecs / reference_ecs;
    let label = format!("{}@ecs{ecs}", reference.label);
    Ok(reference.map_values(label, |_, v| v * factor))
}

/// Greenhouse warming of one cell: pattern slope times the global anomaly.
pub fn local_temperature(global: &GlobalTrajectory, pattern: &PatternField, cell: &GridCell, year: i32) -> Result<f64, ClimateError> {
    let slope = pattern.slope(cell.cell_id)?;
    let anomaly = global.at(year).ok_or(ClimateError::YearOutOfRange(year))?;
    Ok(slope * anomaly)
}

/// Coefficients of the UHI power law `T_UHI = a * P^b`.
///
/// The defaults (`a = 1.85e-3 °C`, `b = 0.45`) are placeholders that give
/// about 2.6 °C for a cell of ten million people.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhiParams {
    pub a: f64,
    pub b: f64,
}

impl Default for UhiParams {
    fn default() -> Self {
        Self { a: 1.85e-3, b: 0.45 }
    }
}

impl UhiParams {
    pub fn new(a: f64, b: f64) -> Result<Self, ClimateError> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ClimateError> {
        if self.a.is_finite() && self.a >= 0.0 && self.b > 0.0 && self.b < 1.0 {
            Ok(())
        } else {
            Err(ClimateError::InvalidUhiParams(self.a, self.b))
        }
    }
}

/// UHI intensity in °C for a cell of `population` persons.
pub fn uhi_intensity(params: &UhiParams, population: f64) -> f64 {
    if population <= 0.0 {
        return 0.0;
    }
    params.a * population.powf(params.b)
}

/// How population drives the UHI basis over time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UhiOptions {
    /// Use the running maximum of population, so UHI never weakens when a
    /// city shrinks.
    #[serde(default)]
    pub ratchet: bool,
}

/// `P^b` on urban cell-years, exactly zero elsewhere. Shared between runs
/// that differ only in the global trajectory or the coefficient `a`.
#[derive(Debug, Clone)]
pub struct UhiBasis {
    exponent: f64,
    values: Arc<[f64]>,
}

impl UhiBasis {
    pub fn build(scenario: &Scenario, mask: &UrbanMask, exponent: f64, options: UhiOptions) -> Self {
        let n = scenario.axis().len();
        let mut values = vec![0.0; scenario.n_cells() * n];
        values.par_chunks_mut(n).enumerate().for_each(|(c, out)| {
            let pop = scenario.cell_population(c);
            let flags = mask.cell_flags(c);
            let mut driver = 0.0f64;
            for t in 0..n {
                driver = if options.ratchet { driver.max(pop[t]) } else { pop[t] };
                if flags[t] && driver > 0.0 {
                    out[t] = driver.powf(exponent);
                }
            }
        });
        Self {
            exponent,
            values: values.into(),
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per cell-year greenhouse and UHI warming.
///
/// Greenhouse warming is stored factorised as per-cell slopes and a per-year
/// anomaly; UHI warming as a per-year coefficient times the shared basis.
#[derive(Debug, Clone)]
pub struct ClimateField {
    axis: YearAxis,
    slopes: Arc<[f64]>,
    anomaly: Vec<f64>,
    basis: UhiBasis,
    uhi_coefficient: Vec<f64>,
}

impl ClimateField {
    /// Assembles a field from precomputed parts. `anomaly` must already be
    /// restricted to the scenario axis.
    pub fn from_parts(axis: YearAxis, slopes: Arc<[f64]>, anomaly: Vec<f64>, basis: UhiBasis, a: f64) -> Self {
        assert_eq!(anomaly.len(), axis.len());
        assert_eq!(basis.values.len(), slopes.len() * axis.len());
        Self {
            axis,
            slopes,
            anomaly,
            basis,
            uhi_coefficient: vec![a; axis.len()],
        }
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    pub fn n_cells(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Global anomaly per year.
    pub fn anomaly(&self) -> &[f64] {
        &self.anomaly
    }

    pub fn basis(&self) -> &UhiBasis {
        &self.basis
    }

    /// UHI coefficient `a` in force per year.
    pub fn uhi_coefficient(&self) -> &[f64] {
        &self.uhi_coefficient
    }

    #[inline]
    pub fn t_ghg(&self, cell: usize, t: usize) -> f64 {
        self.slopes[cell] * self.anomaly[t]
    }

    #[inline]
    pub fn t_uhi(&self, cell: usize, t: usize) -> f64 {
        self.uhi_coefficient[t] * self.basis.values[cell * self.axis.len() + t]
    }

    /// Same cells and UHI, different global trajectory.
    pub fn with_trajectory(&self, global: &GlobalTrajectory) -> Result<Self, ClimateError> {
        Ok(Self {
            anomaly: global.slice(self.axis)?,
            ..self.clone()
        })
    }

    /// Same field with the UHI coefficient replaced by `a` in every year.
    pub fn with_uhi_coefficient(&self, a: f64) -> Self {
        Self {
            uhi_coefficient: vec![a; self.axis.len()],
            ..self.clone()
        }
    }

    /// UHI intensity multiplied by `factor` from `start_year` onwards.
    pub fn with_uhi_factor(&self, factor: f64, start_year: i32) -> Self {
        let uhi_coefficient = self
            .axis
            .years()
            .zip(&self.uhi_coefficient)
            .map(|(y, &a)| if y >= start_year { a * factor } else { a })
            .collect();
        Self {
            uhi_coefficient,
            ..self.clone()
        }
    }
}

/// Builds the hazard layer for a scenario. UHI warming applies only to
/// urban cell-years.
pub fn build_climate_field(
    scenario: &Scenario,
    mask: &UrbanMask,
    global: &GlobalTrajectory,
    pattern: &PatternField,
    uhi: &UhiParams,
) -> Result<ClimateField, ClimateError> {
    build_climate_field_with(scenario, mask, global, pattern, uhi, UhiOptions::default())
}

pub fn build_climate_field_with(
    scenario: &Scenario,
    mask: &UrbanMask,
    global: &GlobalTrajectory,
    pattern: &PatternField,
    uhi: &UhiParams,
    options: UhiOptions,
) -> Result<ClimateField, ClimateError> {
    uhi.validate()?;
    let axis = scenario.axis();
    let anomaly = global.slice(axis)?;
    let slopes: Arc<[f64]> = pattern.align(scenario)?.into();
    let basis = UhiBasis::build(scenario, mask, uhi.b, options);
    Ok(ClimateField::from_parts(axis, slopes, anomaly, basis, uhi.a))
}

fn open(path: &Path) -> Result<std::fs::File, ClimateError> {
    std::fs::File::open(path).map_err(|source| ClimateError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, ClimateError> {
    headers.iter().position(|h| h == name).ok_or(ClimateError::MissingColumn(name))
}

fn parse<T: std::str::FromStr>(line: u64, field: &'static str, value: &str) -> Result<T, ClimateError> {
    value.parse().map_err(|_| ClimateError::Parse {
        line,
        field,
        value: value.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::Region;
    use crate::scenario::classify_urban;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn cell(id: u64) -> GridCell {
        GridCell {
            cell_id: id,
            lat: 10.0,
            lon: 20.0,
            region: Region::China,
        }
    }

    fn four_cells() -> Scenario {
        let axis = YearAxis::new(2010, 2012).unwrap();
        let cells = (0..4).map(cell).collect();
        #[rustfmt::skip]
        let pop = vec![
            3.0e5, 3.2e5, 3.4e5,
            1.0e3, 1.0e3, 1.0e3,
            5.0e6, 4.0e6, 4.5e6,
            2.4e5, 2.6e5, 2.0e5,
        ];
        Scenario::new("four", axis, cells, pop, vec![1e9; 12]).unwrap()
    }

    #[test]
    fn ecs_quantiles() {
        let d = EcsDistribution::default();
        assert_eq!(sample_ecs(&d, 0.0), 2.0);
        assert_eq!(sample_ecs(&d, 1.0), 5.0);
        assert_eq!(sample_ecs(&d, 1.0 / 3.0), 3.0);
        assert!((d.cdf(3.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ecs_sampler_mean() {
        let d = EcsDistribution::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = (0..n).map(|_| sample_ecs(&d, rng.random())).sum::<f64>() / n as f64;
        let se = (d.variance() / n as f64).sqrt();
        assert!((mean - 10.0 / 3.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn invalid_distribution() {
        assert!(EcsDistribution::new(3.0, 3.0, 5.0).is_err());
    }

    #[test]
    fn trajectory_scaling() {
        let axis = YearAxis::new(2050, 2051).unwrap();
        let tr = GlobalTrajectory::new("ref", axis, vec![1.5, 2.0]).unwrap();
        assert_eq!(scale_trajectory(&tr, 3.0, 3.0).unwrap().values(), tr.values());
        assert_eq!(scale_trajectory(&tr, 2.0, 3.0).unwrap().at(2050), Some(1.0));
        let hot = scale_trajectory(&tr, 5.0, 3.0).unwrap().at(2051).unwrap();
        assert!((hot - 10.0 / 3.0).abs() < 1e-15);
        assert!(matches!(scale_trajectory(&tr, 3.0, 0.0), Err(ClimateError::NonPositiveEcs(_))));
    }

    #[test]
    fn local_temperature_examples() {
        let axis = YearAxis::new(2050, 2050).unwrap();
        let c = cell(9);
        let pattern = |s: f64| PatternField::uniform("m", &[c], s).unwrap();
        let tr = |v: f64| GlobalTrajectory::new("g", axis, vec![v]).unwrap();
        assert_eq!(local_temperature(&tr(2.0), &pattern(1.0), &c, 2050).unwrap(), 2.0);
        assert_eq!(local_temperature(&tr(7.0), &pattern(0.0), &c, 2050).unwrap(), 0.0);
        assert!((local_temperature(&tr(3.0), &pattern(1.4), &c, 2050).unwrap() - 4.2).abs() < 1e-15);
        assert!(matches!(
            local_temperature(&tr(3.0), &pattern(1.4), &cell(10), 2050),
            Err(ClimateError::MissingPattern(10))
        ));
    }

    #[test]
    fn uhi_examples() {
        let zero = UhiParams { a: 0.0, b: 0.45 };
        assert_eq!(uhi_intensity(&zero, 1e7), 0.0);
        let p = UhiParams { a: 0.7, b: 0.45 };
        assert_eq!(uhi_intensity(&p, 1.0), 0.7);
        assert_eq!(uhi_intensity(&p, 0.0), 0.0);
        let d = UhiParams::default();
        assert!((uhi_intensity(&d, 1e7) - 2.6).abs() < 0.05);
        // a megacity of 26 million reaches roughly 4 °C
        assert!((uhi_intensity(&d, 2.6e7) - 4.0).abs() < 0.1);
        assert!(UhiParams::new(1.0, 1.0).is_err());
        assert!(UhiParams::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn field_matches_elementwise_oracle() {
        let s = four_cells();
        let mask = classify_urban(&s, 250_000.0).unwrap();
        let tr = GlobalTrajectory::new("g", s.axis(), vec![1.0, 1.2, 1.5]).unwrap();
        let slopes: HashMap<u64, f64> = [(0, 1.1), (1, 0.9), (2, 1.4), (3, 0.5)].into();
        let pattern = PatternField::new("m", slopes.clone()).unwrap();
        let uhi = UhiParams::default();
        let field = build_climate_field(&s, &mask, &tr, &pattern, &uhi).unwrap();
        for c in 0..4 {
            for t in 0..3 {
                let pop = s.cell_population(c)[t];
                let ghg = slopes[&(c as u64)] * tr.values()[t];
                let uhi_expected = if pop >= 250_000.0 { uhi.a * pop.powf(uhi.b) } else { 0.0 };
                assert_eq!(field.t_ghg(c, t), ghg);
                assert_eq!(field.t_uhi(c, t), uhi_expected);
            }
        }
    }

    #[test]
    fn ratchet_holds_peak_population() {
        let s = four_cells();
        let mask = classify_urban(&s, 250_000.0).unwrap();
        let tr = GlobalTrajectory::new("g", s.axis(), vec![1.0; 3]).unwrap();
        let pattern = PatternField::uniform("m", s.cells(), 1.0).unwrap();
        let uhi = UhiParams::default();
        let opts = UhiOptions { ratchet: true };
        let field = build_climate_field_with(&s, &mask, &tr, &pattern, &uhi, opts).unwrap();
        assert_eq!(field.t_uhi(2, 1), uhi_intensity(&uhi, 5.0e6));
        assert_eq!(field.t_uhi(2, 2), uhi_intensity(&uhi, 5.0e6));
        // not urban in 2012 so still zero
        assert_eq!(field.t_uhi(3, 2), 0.0);
    }

    #[test]
    fn rural_scenario_has_no_uhi() {
        let s = four_cells();
        let mask = classify_urban(&s, 1e9).unwrap();
        let tr = GlobalTrajectory::new("g", s.axis(), vec![1.0, 2.0, 3.0]).unwrap();
        let pattern = PatternField::uniform("m", s.cells(), 1.0).unwrap();
        let field = build_climate_field(&s, &mask, &tr, &pattern, &UhiParams::default()).unwrap();
        assert!((0..4).all(|c| (0..3).all(|t| field.t_uhi(c, t) == 0.0)));
    }

    #[test]
    fn pattern_rejects_precipitation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "cell_id,slope,precip_slope\n1,1.0,0.1\n").unwrap();
        assert!(matches!(load_pattern(&path), Err(ClimateError::UnsupportedPatternColumn(_))));
        std::fs::write(&path, "cell_id,slope\n1,1.0\n2,0.8\n").unwrap();
        let p = load_pattern(&path).unwrap();
        assert_eq!(p.slope(2).unwrap(), 0.8);
        assert_eq!(p.model_tag(), "p");
    }

    #[test]
    fn trajectory_file_needs_consecutive_years() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "year,anomaly_degC\n2010,1.0\n2012,1.1\n").unwrap();
        assert!(matches!(load_trajectory(&path), Err(ClimateError::NonConsecutiveYears(2012, 2010))));
        std::fs::write(&path, "year,anomaly_degC\n2010,1.0\n2011,1.1\n").unwrap();
        assert_eq!(load_trajectory(&path).unwrap().at(2011), Some(1.1));
    }

    proptest! {
        #[test]
        fn local_temperature_is_homogeneous(slope in -3.0f64..3.0, anomaly in 0.0f64..8.0, k in 0.0f64..4.0) {
            let axis = YearAxis::new(2000, 2000).unwrap();
            let c = cell(1);
            let pattern = PatternField::uniform("m", &[c], slope).unwrap();
            let base = GlobalTrajectory::new("g", axis, vec![anomaly]).unwrap();
            let scaled = GlobalTrajectory::new("g", axis, vec![k * anomaly]).unwrap();
            let t1 = local_temperature(&base, &pattern, &c, 2000).unwrap();
            let tk = local_temperature(&scaled, &pattern, &c, 2000).unwrap();
            prop_assert!((tk - k * t1).abs() <= 1e-12 * (1.0 + tk.abs()));
        }

        #[test]
        fn uhi_strictly_increasing(a in 1e-6f64..1.0, b in 0.05f64..0.95, p in 1.0f64..1e8, dp in 1.0f64..1e6) {
            let params = UhiParams { a, b };
            prop_assert!(uhi_intensity(&params, p + dp) > uhi_intensity(&params, p));
        }

        #[test]
        fn ecs_cdf_monotone(u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
            let d = EcsDistribution::default();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(sample_ecs(&d, lo) <= sample_ecs(&d, hi));
            let x = sample_ecs(&d, u1);
            prop_assert!((d.cdf(x) - u1).abs() < 1e-9);
        }
    }
}
