//! Gridded socioeconomic exposure: population and GDP per cell and year,
//! the region each cell belongs to, and the urban classification.

use crate::axis::YearAxis;
use crate::region::{Region, RegionValues, UnknownRegion};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Default population count above which a cell is declared urban.
pub const DEFAULT_URBAN_THRESHOLD: f64 = 250_000.0;

const REQUIRED_COLUMNS: [&str; 7] = ["cell_id", "lat", "lon", "region", "year", "population", "gdp"];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed scenario metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {field} from {value:?}")]
    Parse {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("negative or non-finite exposure for cell {cell} in {year}")]
    NegativeExposure { cell: u64, year: i32 },
    #[error("duplicate row for cell {cell} in {year}")]
    DuplicateRow { cell: u64, year: i32 },
    #[error(transparent)]
    UnknownRegion(#[from] UnknownRegion),
    #[error("cell {0} has inconsistent lat/lon/region across rows")]
    InconsistentCell(u64),
    #[error("cell {cell}: coordinates ({lat}, {lon}) out of range")]
    InvalidCoordinate { cell: u64, lat: f64, lon: f64 },
    #[error("scenario contains no rows")]
    Empty,
    #[error("interpolation needs at least two support years, got {0}")]
    TooFewSupports(usize),
    #[error("support years must be strictly increasing")]
    NonIncreasingSupports,
    #[error("year {year} lies outside the supported range {first}-{last}")]
    OutOfRange { year: i32, first: i32, last: i32 },
    #[error("invalid year range {first}-{last}")]
    InvalidAxis { first: i32, last: i32 },
    #[error("series length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("urban threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_id: u64,
    pub lat: f64,
    pub lon: f64,
    pub region: Region,
}

/// Population and GDP over a set of years, not necessarily consecutive.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTimeseries {
    pub years: Vec<i32>,
    /// Persons.
    pub population: Vec<f64>,
    /// USD-2005.
    pub gdp: Vec<f64>,
}

/// Contents of the `<scenario>.meta.json` sidecar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub label: Option<String>,
    pub base_year: Option<i32>,
    pub horizon: Option<i32>,
    pub threshold: Option<f64>,
}

impl ScenarioMeta {
    /// Sidecar path for a scenario file: `scenario.csv` -> `scenario.meta.json`.
    pub fn sidecar_path(scenario: &Path) -> PathBuf {
        scenario.with_extension("meta.json")
    }

    /// Loads the sidecar when it exists.
    pub fn load_sidecar(scenario: &Path) -> Result<Option<Self>, ScenarioError> {
        let path = Self::sidecar_path(scenario);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
        Ok(Some(serde_json::from_str(&text)?))
    }
}

/// Validated exposure layer. Series are stored cell-major: the value for
/// cell `c` and year index `t` lives at `c * axis.len() + t`.
#[derive(Debug, Clone)]
pub struct Scenario {
    label: String,
    axis: YearAxis,
    cells: Vec<GridCell>,
    population: Vec<f64>,
    gdp: Vec<f64>,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        axis: YearAxis,
        cells: Vec<GridCell>,
        population: Vec<f64>,
        gdp: Vec<f64>,
    ) -> Result<Self, ScenarioError> {
        let expected = cells.len() * axis.len();
        for got in [population.len(), gdp.len()] {
            if got != expected {
                return Err(ScenarioError::LengthMismatch { expected, got });
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if !seen.insert(cell.cell_id) {
                return Err(ScenarioError::DuplicateRow {
                    cell: cell.cell_id,
                    year: axis.first(),
                });
            }
            check_coordinates(cell)?;
            let span = c * axis.len()..(c + 1) * axis.len();
            for (t, (&p, &y)) in population[span.clone()].iter().zip(&gdp[span]).enumerate() {
                if !valid_exposure(p) || !valid_exposure(y) {
                    return Err(ScenarioError::NegativeExposure {
                        cell: cell.cell_id,
                        year: axis.year_at(t),
                    });
                }
            }
        }
        Ok(Self {
            label: label.into(),
            axis,
            cells,
            population,
            gdp,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Population series of cell `index` (position, not id).
    pub fn cell_population(&self, index: usize) -> &[f64] {
        let n = self.axis.len();
        &self.population[index * n..(index + 1) * n]
    }

    pub fn cell_gdp(&self, index: usize) -> &[f64] {
        let n = self.axis.len();
        &self.gdp[index * n..(index + 1) * n]
    }

    /// Flat cell-major population array.
    pub fn population(&self) -> &[f64] {
        &self.population
    }

    /// Flat cell-major GDP array.
    pub fn gdp(&self) -> &[f64] {
        &self.gdp
    }

    /// World GDP per year.
    pub fn world_gdp(&self) -> Vec<f64> {
        let n = self.axis.len();
        let mut out = vec![0.0; n];
        for chunk in self.gdp.chunks_exact(n) {
            for (acc, v) in out.iter_mut().zip(chunk) {
                *acc += v;
            }
        }
        out
    }

    /// Population and GDP per region in a year.
    pub fn regional_exposure(&self, t: usize) -> (RegionValues, RegionValues) {
        let n = self.axis.len();
        let mut pop = RegionValues::zeros();
        let mut gdp = RegionValues::zeros();
        for (c, cell) in self.cells.iter().enumerate() {
            pop.add(cell.region, self.population[c * n + t]);
            gdp.add(cell.region, self.gdp[c * n + t]);
        }
        (pop, gdp)
    }

    /// Regions without any cell. Their SCC is reported as zero.
    pub fn missing_regions(&self) -> Vec<Region> {
        let mut present = [false; Region::COUNT];
        for cell in &self.cells {
            present[cell.region.index()] = true;
        }
        Region::ALL.into_iter().filter(|r| !present[r.index()]).collect()
    }
}

fn valid_exposure(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn check_coordinates(cell: &GridCell) -> Result<(), ScenarioError> {
    let ok = (-90.0..=90.0).contains(&cell.lat) && (-180.0..180.0).contains(&cell.lon);
    if ok {
        Ok(())
    } else {
        Err(ScenarioError::InvalidCoordinate {
            cell: cell.cell_id,
            lat: cell.lat,
            lon: cell.lon,
        })
    }
}

/// Reads a scenario CSV (`cell_id,lat,lon,region,year,population,gdp`).
///
/// Cells are ordered by id. When rows are not annual, or the metadata asks
/// for a wider axis than a cell's rows provide directly, the cell's series
/// is linearly interpolated onto the annual axis.
pub fn load_scenario(path: &Path, meta: &ScenarioMeta) -> Result<Scenario, ScenarioError> {
    let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = meta.label.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    read_scenario(file, &label, meta)
}

/// Parses scenario CSV from any reader.
pub fn read_scenario<R: std::io::Read>(reader: R, label: &str, meta: &ScenarioMeta) -> Result<Scenario, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 7];
    for (slot, name) in col.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ScenarioError::MissingColumn(name))?;
    }

    struct Rows {
        cell: GridCell,
        by_year: BTreeMap<i32, (f64, f64)>,
    }
    let mut cells: BTreeMap<u64, Rows> = BTreeMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(col[i]).unwrap_or("");
        let cell_id: u64 = parse_field(line, "cell_id", field(0))?;
        let lat: f64 = parse_field(line, "lat", field(1))?;
        let lon: f64 = parse_field(line, "lon", field(2))?;
        let region: Region = field(3).parse()?;
        let year: i32 = parse_field(line, "year", field(4))?;
        let population: f64 = parse_field(line, "population", field(5))?;
        let gdp: f64 = parse_field(line, "gdp", field(6))?;
        if !valid_exposure(population) || !valid_exposure(gdp) {
            return Err(ScenarioError::NegativeExposure { cell: cell_id, year });
        }
        let cell = GridCell {
            cell_id,
            lat,
            lon,
            region,
        };
        check_coordinates(&cell)?;
        let rows = cells.entry(cell_id).or_insert_with(|| Rows {
            cell,
            by_year: BTreeMap::new(),
        });
        if rows.cell != cell {
            return Err(ScenarioError::InconsistentCell(cell_id));
        }
        if rows.by_year.insert(year, (population, gdp)).is_some() {
            return Err(ScenarioError::DuplicateRow { cell: cell_id, year });
        }
    }
    if cells.is_empty() {
        return Err(ScenarioError::Empty);
    }

    let data_first = cells.values().filter_map(|r| r.by_year.keys().next()).min().copied().unwrap();
    let data_last = cells.values().filter_map(|r| r.by_year.keys().next_back()).max().copied().unwrap();
    let first = meta.base_year.unwrap_or(data_first);
    let last = meta.horizon.unwrap_or(data_last);
    let axis = YearAxis::new(first, last).ok_or(ScenarioError::InvalidAxis { first, last })?;

    let n = axis.len();
    let mut grid_cells = Vec::with_capacity(cells.len());
    let mut population = Vec::with_capacity(cells.len() * n);
    let mut gdp = Vec::with_capacity(cells.len() * n);
    for rows in cells.into_values() {
        let direct = axis.years().all(|y| rows.by_year.contains_key(&y));
        if direct {
            for y in axis.years() {
                let (p, g) = rows.by_year[&y];
                population.push(p);
                gdp.push(g);
            }
        } else {
            let sparse = CellTimeseries {
                years: rows.by_year.keys().copied().collect(),
                population: rows.by_year.values().map(|v| v.0).collect(),
                gdp: rows.by_year.values().map(|v| v.1).collect(),
            };
            let annual = interpolate_annual(&sparse, axis)?;
            population.extend(annual.population);
            gdp.extend(annual.gdp);
        }
        grid_cells.push(rows.cell);
    }
    Scenario::new(label, axis, grid_cells, population, gdp)
}

fn parse_field<T: std::str::FromStr>(line: u64, field: &'static str, value: &str) -> Result<T, ScenarioError> {
    value.parse().map_err(|_| ScenarioError::Parse {
        line,
        field,
        value: value.to_string(),
    })
}

/// Linear interpolation of `values` given at strictly increasing `supports`.
/// Support years are returned exactly; years outside the support range are
/// an error.
pub fn interpolate_at(supports: &[i32], values: &[f64], year: i32) -> Result<f64, ScenarioError> {
    if supports.len() < 2 {
        return Err(ScenarioError::TooFewSupports(supports.len()));
    }
    if values.len() != supports.len() {
        return Err(ScenarioError::LengthMismatch {
            expected: supports.len(),
            got: values.len(),
        });
    }
    if supports.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScenarioError::NonIncreasingSupports);
    }
    let (first, last) = (supports[0], supports[supports.len() - 1]);
    if year < first || year > last {
        return Err(ScenarioError::OutOfRange { year, first, last });
    }
    match supports.binary_search(&year) {
        Ok(i) => Ok(values[i]),
        Err(i) => {
            let (y0, y1) = (supports[i - 1], supports[i]);
            let (v0, v1) = (values[i - 1], values[i]);
            let w = f64::from(year - y0) / f64::from(y1 - y0);
            Ok(v0 + (v1 - v0) * w)
        }
    }
}

/// Fills a sparse (e.g. decadal) series onto every year of `axis`.
pub fn interpolate_annual(sparse: &CellTimeseries, axis: YearAxis) -> Result<CellTimeseries, ScenarioError> {
    let mut population = Vec::with_capacity(axis.len());
    let mut gdp = Vec::with_capacity(axis.len());
    for year in axis.years() {
        population.push(interpolate_at(&sparse.years, &sparse.population, year)?);
        gdp.push(interpolate_at(&sparse.years, &sparse.gdp, year)?);
    }
    Ok(CellTimeseries {
        years: axis.years().collect(),
        population,
        gdp,
    })
}

/// Per cell-year urban flag: `population >= threshold`.
#[derive(Debug, Clone)]
pub struct UrbanMask {
    threshold: f64,
    axis: YearAxis,
    flags: Vec<bool>,
}

impl UrbanMask {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn axis(&self) -> YearAxis {
        self.axis
    }

    pub fn is_urban(&self, cell: usize, t: usize) -> bool {
        self.flags[cell * self.axis.len() + t]
    }

    pub fn cell_flags(&self, cell: usize) -> &[bool] {
        let n = self.axis.len();
        &self.flags[cell * n..(cell + 1) * n]
    }

    /// Flat cell-major flag array.
    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn urban_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Urban status is re-evaluated every year, so cells can switch class as
/// their population grows or shrinks.
pub fn classify_urban(scenario: &Scenario, threshold: f64) -> Result<UrbanMask, ScenarioError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(ScenarioError::InvalidThreshold(threshold));
    }
    Ok(UrbanMask {
        threshold,
        axis: scenario.axis,
        flags: scenario.population.iter().map(|&p| p >= threshold).collect(),
    })
}

/// Urban share of world population and GDP in `year`. Both are zero when
/// the world totals are zero.
pub fn urban_shares(scenario: &Scenario, mask: &UrbanMask, year: i32) -> Result<(f64, f64), ScenarioError> {
    let axis = scenario.axis;
    let t = axis.index_of(year).ok_or(ScenarioError::OutOfRange {
        year,
        first: axis.first(),
        last: axis.last(),
    })?;
    let n = axis.len();
    let (mut pop, mut pop_u, mut gdp, mut gdp_u) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..scenario.n_cells() {
        let p = scenario.population[c * n + t];
        let g = scenario.gdp[c * n + t];
        pop += p;
        gdp += g;
        if mask.flags[c * n + t] {
            pop_u += p;
            gdp_u += g;
        }
    }
    let share = |part: f64, whole: f64| if whole > 0.0 { part / whole } else { 0.0 };
    Ok((share(pop_u, pop), share(gdp_u, gdp)))
}

/// Urban population per region in year index `t`.
pub fn urban_population(scenario: &Scenario, mask: &UrbanMask, t: usize) -> RegionValues {
    let n = scenario.axis.len();
    let mut out = RegionValues::zeros();
    for (c, cell) in scenario.cells.iter().enumerate() {
        if mask.flags[c * n + t] {
            out.add(cell.region, scenario.population[c * n + t]);
        }
    }
    out
}
