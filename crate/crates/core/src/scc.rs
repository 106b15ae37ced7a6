//! Social cost of carbon from paired baseline/pulsed runs, its urban and
//! non-urban decomposition, and the social cost of the urban heat island.

use crate::axis::YearAxis;
use crate::climate::{ClimateField, UhiParams};
use crate::damage::{
    apply_persistence, period_losses, CellClass, DamageError, DamageLedger, DamageParams, RegionalLosses,
    ScalingSeries, Variant,
};
use crate::pulse::PulseParams;
use crate::region::{Region, RegionValues};
use crate::scenario::{urban_population, Scenario, UrbanMask};
use serde::{Deserialize, Serialize};

/// Default consumption discount rate.
pub const DEFAULT_DISCOUNT_RATE: f64 = 0.015;

/// Default last year of the damage sum.
pub const DEFAULT_HORIZON: i32 = 2100;

#[derive(Debug, thiserror::Error)]
pub enum SccError {
    #[error("year {year} outside discounting window {base_year}-{horizon}")]
    YearOutOfRange { year: i32, base_year: i32, horizon: i32 },
    #[error("invalid discounting: rate {rate}, window {base_year}-{horizon}")]
    InvalidDiscount { rate: f64, base_year: i32, horizon: i32 },
    #[error("ledgers disagree on variant: {0} vs {1}")]
    VariantMismatch(Variant, Variant),
    #[error("ledgers disagree on year axis: {0} vs {1}")]
    AxisMismatch(YearAxis, YearAxis),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("SCUHI needs an urban variant (RU or RPU), got {0}")]
    NotUrbanVariant(Variant),
    #[error("zero population on urban cell {cell} in {year}")]
    ZeroPopulation { cell: u64, year: i32 },
    #[error("reduction must lie in (0, 1], got {0}")]
    InvalidReduction(f64),
    #[error(transparent)]
    Damage(#[from] DamageError),
}

/// Annual discounting `(1 + rate)^-(year - base_year)` over
/// `[base_year, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    pub rate: f64,
    pub base_year: i32,
    pub horizon: i32,
}

impl DiscountSpec {
    pub fn new(rate: f64, base_year: i32, horizon: i32) -> Result<Self, SccError> {
        let spec = Self {
            rate,
            base_year,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SccError> {
        if self.rate.is_finite() && self.rate > -1.0 && self.horizon >= self.base_year {
            Ok(())
        } else {
            Err(SccError::InvalidDiscount {
                rate: self.rate,
                base_year: self.base_year,
                horizon: self.horizon,
            })
        }
    }

    /// Axis indices inside the window together with their discount factor.
    fn weights(&self, axis: YearAxis) -> Vec<(usize, f64)> {
        axis.years()
            .enumerate()
            .filter(|&(_, y)| y >= self.base_year && y <= self.horizon)
            .map(|(t, y)| (t, self.factor_unchecked(y)))
            .collect()
    }

    fn factor_unchecked(&self, year: i32) -> f64 {
        (1.0 + self.rate).powi(-(year - self.base_year))
    }
}

pub fn discount_factor(spec: &DiscountSpec, year: i32) -> Result<f64, SccError> {
    if year < spec.base_year || year > spec.horizon {
        return Err(SccError::YearOutOfRange {
            year,
            base_year: spec.base_year,
            horizon: spec.horizon,
        });
    }
    Ok(spec.factor_unchecked(year))
}

/// Present value per region of a loss aggregate, restricted to one cell
/// class when `class` is given.
pub fn present_value(losses: &RegionalLosses, class: Option<CellClass>, spec: &DiscountSpec) -> RegionValues {
    let weights = spec.weights(losses.axis());
    let mut out = RegionValues::zeros();
    for region in Region::ALL {
        let mut pv = 0.0;
        for &(t, w) in &weights {
            let v = match class {
                Some(c) => losses.get(region, c, t),
                None => losses.region_total(region, t),
            };
            pv += w * v;
        }
        out.set(region, pv);
    }
    out
}

/// Discounted pulsed-minus-baseline losses per tonne of CO₂, by region.
fn scc_values(
    base: &RegionalLosses,
    pulsed: &RegionalLosses,
    class: Option<CellClass>,
    spec: &DiscountSpec,
    pulse: &PulseParams,
) -> Result<RegionValues, SccError> {
    spec.validate()?;
    if base.axis() != pulsed.axis() {
        return Err(SccError::AxisMismatch(base.axis(), pulsed.axis()));
    }
    let weights = spec.weights(base.axis());
    let tonnes = pulse.tonnes_co2();
    let mut out = RegionValues::zeros();
    for region in Region::ALL {
        let mut pv = 0.0;
        for &(t, w) in &weights {
            let (b, p) = match class {
                Some(c) => (base.get(region, c, t), pulsed.get(region, c, t)),
                None => (base.region_total(region, t), pulsed.region_total(region, t)),
            };
            pv += w * (p - b);
        }
        out.set(region, pv / tonnes);
    }
    Ok(out)
}

/// SCC of one variant at one discount rate, USD-2005 per tCO₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccReport {
    pub variant: Variant,
    pub rate: f64,
    pub per_region: RegionValues,
    /// Regions without cells; their value is zero.
    pub missing: Vec<Region>,
}

impl SccReport {
    pub fn world(&self) -> f64 {
        self.per_region.world()
    }

    /// Share of the world SCC; all zero when the world value is zero.
    pub fn fraction(&self, region: Region) -> f64 {
        let world = self.world();
        if world == 0.0 {
            0.0
        } else {
            self.per_region.get(region) / world
        }
    }
}

/// SCC from losses of a baseline and a pulsed run.
pub fn scc_from_losses(
    variant: Variant,
    base: &RegionalLosses,
    pulsed: &RegionalLosses,
    spec: &DiscountSpec,
    pulse: &PulseParams,
) -> Result<SccReport, SccError> {
    Ok(SccReport {
        variant,
        rate: spec.rate,
        per_region: scc_values(base, pulsed, None, spec, pulse)?,
        missing: Vec::new(),
    })
}

pub fn scc(base: &DamageLedger, pulsed: &DamageLedger, spec: &DiscountSpec, pulse: &PulseParams) -> Result<SccReport, SccError> {
    if base.variant() != pulsed.variant() {
        return Err(SccError::VariantMismatch(base.variant(), pulsed.variant()));
    }
    scc_from_losses(base.variant(), base.regional(), pulsed.regional(), spec, pulse)
}

/// One row of the urban/non-urban decomposition, USD-2005 per tCO₂.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecompositionRow {
    /// Non-urban cells, damage function without UHI.
    pub nu: f64,
    /// Urban cells, damage function with UHI.
    pub u: f64,
    /// Urban cells, damage function without UHI.
    pub u_nouhi: f64,
    /// `u_nouhi - nu`.
    pub exposure: f64,
    /// `u - u_nouhi`.
    pub uhi_int: f64,
}

impl DecompositionRow {
    pub fn from_components(nu: f64, u_nouhi: f64, u: f64) -> Self {
        Self {
            nu,
            u,
            u_nouhi,
            exposure: u_nouhi - nu,
            uhi_int: u - u_nouhi,
        }
    }

    /// Total SCC of the urban variant.
    pub fn total(&self) -> f64 {
        self.nu + self.u
    }

    /// `|nu + u_nouhi + uhi_int - total|`.
    pub fn closure_error(&self) -> f64 {
        (self.nu + self.u_nouhi + self.uhi_int - self.total()).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `RU` or `RPU`.
    pub variant: Variant,
    pub rate: f64,
    pub regions: Vec<DecompositionRow>,
    pub world: DecompositionRow,
}

impl Decomposition {
    pub fn region(&self, region: Region) -> &DecompositionRow {
        &self.regions[region.index()]
    }

    /// Builds the world row as component-wise sums of the region rows.
    pub fn from_regions(variant: Variant, rate: f64, regions: Vec<DecompositionRow>) -> Self {
        let mut world = DecompositionRow::default();
        for r in &regions {
            world.nu += r.nu;
            world.u += r.u;
            world.u_nouhi += r.u_nouhi;
            world.exposure += r.exposure;
            world.uhi_int += r.uhi_int;
        }
        Self {
            variant,
            rate,
            regions,
            world,
        }
    }
}

/// Decomposes the SCC of an urban variant.
///
/// `without_uhi` are the baseline and pulsed losses under `R` (or `RP`),
/// `with_uhi` those under `RU` (or `RPU`).
pub fn decompose(
    variant: Variant,
    without_uhi: (&RegionalLosses, &RegionalLosses),
    with_uhi: (&RegionalLosses, &RegionalLosses),
    spec: &DiscountSpec,
    pulse: &PulseParams,
) -> Result<Decomposition, SccError> {
    if !variant.has_uhi() {
        return Err(SccError::NotUrbanVariant(variant));
    }
    let nu = scc_values(without_uhi.0, without_uhi.1, Some(CellClass::NonUrban), spec, pulse)?;
    let u_nouhi = scc_values(without_uhi.0, without_uhi.1, Some(CellClass::Urban), spec, pulse)?;
    let u = scc_values(with_uhi.0, with_uhi.1, Some(CellClass::Urban), spec, pulse)?;
    let regions = Region::ALL
        .iter()
        .map(|&r| DecompositionRow::from_components(nu.get(r), u_nouhi.get(r), u.get(r)))
        .collect();
    Ok(Decomposition::from_regions(variant, spec.rate, regions))
}

/// [`decompose`] on ledgers; the pairs must be `(R, RU)` or `(RP, RPU)`.
pub fn decompose_ledgers(
    base_without: &DamageLedger,
    pulsed_without: &DamageLedger,
    base_with: &DamageLedger,
    pulsed_with: &DamageLedger,
    spec: &DiscountSpec,
    pulse: &PulseParams,
) -> Result<Decomposition, SccError> {
    let variant = base_with.variant();
    for (a, b) in [(base_without, pulsed_without), (base_with, pulsed_with)] {
        if a.variant() != b.variant() {
            return Err(SccError::VariantMismatch(a.variant(), b.variant()));
        }
    }
    if !variant.has_uhi() {
        return Err(SccError::NotUrbanVariant(variant));
    }
    if base_without.variant() != variant.without_uhi() {
        return Err(SccError::VariantMismatch(base_without.variant(), variant.without_uhi()));
    }
    decompose(
        variant,
        (base_without.regional(), pulsed_without.regional()),
        (base_with.regional(), pulsed_with.regional()),
        spec,
        pulse,
    )
}

/// Which urban population the per-dweller SCUHI is divided by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePopulation {
    /// Urban population in the discounting base year.
    #[default]
    PulseYear,
    /// Urban population in the last year of the window.
    Horizon,
    /// Mean urban population over the window.
    TimeAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScuhiSettings {
    /// Fractional UHI reduction.
    #[serde(default = "default_reduction")]
    pub reduction: f64,
    /// First year the reduction applies; defaults to the discounting base year.
    #[serde(default)]
    pub start_year: Option<i32>,
    #[serde(default)]
    pub reference_population: ReferencePopulation,
}

fn default_reduction() -> f64 {
    0.01
}

impl Default for ScuhiSettings {
    fn default() -> Self {
        Self {
            reduction: default_reduction(),
            start_year: None,
            reference_population: ReferencePopulation::default(),
        }
    }
}

/// Everything a SCUHI evaluation needs from a baseline (no pulse) run.
#[derive(Debug, Clone, Copy)]
pub struct ScuhiInputs<'a> {
    pub scenario: &'a Scenario,
    pub mask: &'a UrbanMask,
    pub field: &'a ClimateField,
    pub uhi: UhiParams,
    pub damage: &'a DamageParams,
    /// Calibration factor of the run. It depends only on the `R` losses and
    /// therefore not on the UHI coefficient.
    pub scaling: &'a ScalingSeries,
    /// `RU` or `RPU`.
    pub variant: Variant,
    pub discount: &'a DiscountSpec,
}

impl ScuhiInputs<'_> {
    fn check(&self) -> Result<(), SccError> {
        if !self.variant.has_uhi() {
            return Err(SccError::NotUrbanVariant(self.variant));
        }
        self.discount.validate()
    }

    fn finish(&self, per_period: &RegionalLosses) -> Result<RegionalLosses, SccError> {
        let scaled = per_period.scaled(self.scaling)?;
        Ok(if self.variant.has_persistence() {
            scaled.with_persistence(&self.damage.persistence)?
        } else {
            scaled
        })
    }

    /// Present value of calibrated urban losses under `field`.
    pub fn urban_npv(&self, field: &ClimateField) -> Result<RegionValues, SccError> {
        self.check()?;
        let period = period_losses(self.scenario, self.mask, field, &self.damage.regional)?;
        Ok(present_value(&self.finish(&period.ru)?, Some(CellClass::Urban), self.discount))
    }
}

/// Present value of `∂D/∂a = 2 α_U (T_GHG + T_UHI) P^b`, GDP-weighted over
/// urban cells, in USD per unit of `a`.
pub fn scuhi_marginal_a(inputs: &ScuhiInputs) -> Result<RegionValues, SccError> {
    inputs.check()?;
    let scenario = inputs.scenario;
    let field = inputs.field;
    let axis = scenario.axis();
    let n = axis.len();
    let mut derivative = RegionalLosses::zeros(axis);
    for (c, cell) in scenario.cells().iter().enumerate() {
        let alpha_u = inputs.damage.regional.alpha_u.get(cell.region);
        let gdp = scenario.cell_gdp(c);
        let basis = &field.basis().values()[c * n..(c + 1) * n];
        let flags = inputs.mask.cell_flags(c);
        for t in 0..n {
            if flags[t] {
                let d = 2.0 * alpha_u * (field.t_ghg(c, t) + field.t_uhi(c, t)) * basis[t];
                derivative.add(cell.region, CellClass::Urban, t, gdp[t] * d);
            }
        }
    }
    Ok(present_value(&inputs.finish(&derivative)?, Some(CellClass::Urban), inputs.discount))
}

/// Per-cell SCUHI with respect to the cell's own population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScuhi {
    pub cell_id: u64,
    pub region: Region,
    /// USD per person.
    pub value: f64,
}

/// Present value of `∂D/∂P = 2 α_U a b (T_GHG + T_UHI) P^(b-1)`, GDP-weighted,
/// for every cell that is urban at least once in the window.
pub fn scuhi_marginal_p(inputs: &ScuhiInputs) -> Result<Vec<CellScuhi>, SccError> {
    inputs.check()?;
    let scenario = inputs.scenario;
    let field = inputs.field;
    let axis = scenario.axis();
    let n = axis.len();
    let weights = inputs.discount.weights(axis);
    let b = field.basis().exponent();
    let mut out = Vec::new();
    let mut series = vec![0.0; n];
    for (c, cell) in scenario.cells().iter().enumerate() {
        let flags = inputs.mask.cell_flags(c);
        if !flags.iter().any(|&f| f) {
            continue;
        }
        let alpha_u = inputs.damage.regional.alpha_u.get(cell.region);
        let gdp = scenario.cell_gdp(c);
        let basis = &field.basis().values()[c * n..(c + 1) * n];
        for t in 0..n {
            series[t] = 0.0;
            if !flags[t] {
                continue;
            }
            if basis[t] <= 0.0 {
                return Err(SccError::ZeroPopulation {
                    cell: cell.cell_id,
                    year: axis.year_at(t),
                });
            }
            // P^(b-1) recovered from the basis P^b, so a ratcheted driver stays consistent
            let p_pow = basis[t].powf((b - 1.0) / b);
            let a = field.uhi_coefficient()[t];
            let d = 2.0 * alpha_u * a * b * (field.t_ghg(c, t) + field.t_uhi(c, t)) * p_pow;
            series[t] = gdp[t] * d * inputs.scaling.at(t);
        }
        let series = if inputs.variant.has_persistence() {
            apply_persistence(&series, inputs.damage.persistence.phi.get(cell.region))?
        } else {
            series.clone()
        };
        let value = weights.iter().map(|&(t, w)| w * series[t]).sum();
        out.push(CellScuhi {
            cell_id: cell.cell_id,
            region: cell.region,
            value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScuhiReport {
    pub variant: Variant,
    pub rate: f64,
    pub reduction: f64,
    pub start_year: i32,
    /// Present value of the marginal damage in `a`, USD per unit of `a`.
    pub marginal_a: RegionValues,
    /// Present value of avoided damages, USD-2005.
    pub total_npv: RegionValues,
    /// Urban dwellers the benefit is divided by.
    pub reference_population: RegionValues,
}

impl ScuhiReport {
    /// USD-2005 per urban dweller; zero where there are no urban dwellers.
    pub fn per_dweller(&self, region: Region) -> f64 {
        ratio(self.total_npv.get(region), self.reference_population.get(region))
    }

    pub fn world_per_dweller(&self) -> f64 {
        ratio(self.total_npv.world(), self.reference_population.world())
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Benefit of reducing UHI intensity by `settings.reduction` in all urban
/// cells from the start year to the horizon.
pub fn scuhi_one_percent(inputs: &ScuhiInputs, settings: &ScuhiSettings) -> Result<ScuhiReport, SccError> {
    inputs.check()?;
    if !(settings.reduction > 0.0 && settings.reduction <= 1.0) {
        return Err(SccError::InvalidReduction(settings.reduction));
    }
    let start_year = settings.start_year.unwrap_or(inputs.discount.base_year);
    let reduced = inputs.field.with_uhi_factor(1.0 - settings.reduction, start_year);
    let before = inputs.urban_npv(inputs.field)?;
    let after = inputs.urban_npv(&reduced)?;
    Ok(ScuhiReport {
        variant: inputs.variant,
        rate: inputs.discount.rate,
        reduction: settings.reduction,
        start_year,
        marginal_a: scuhi_marginal_a(inputs)?,
        total_npv: before.zip_with(&after, |b, a| b - a),
        reference_population: reference_population(inputs, settings.reference_population)?,
    })
}

fn reference_population(inputs: &ScuhiInputs, which: ReferencePopulation) -> Result<RegionValues, SccError> {
    let axis = inputs.scenario.axis();
    let spec = inputs.discount;
    let out_of_range = |year| SccError::YearOutOfRange {
        year,
        base_year: axis.first(),
        horizon: axis.last(),
    };
    match which {
        ReferencePopulation::PulseYear => {
            let t = axis.index_of(spec.base_year).ok_or_else(|| out_of_range(spec.base_year))?;
            Ok(urban_population(inputs.scenario, inputs.mask, t))
        }
        ReferencePopulation::Horizon => {
            let year = spec.horizon.min(axis.last());
            let t = axis.index_of(year).ok_or_else(|| out_of_range(year))?;
            Ok(urban_population(inputs.scenario, inputs.mask, t))
        }
        ReferencePopulation::TimeAveraged => {
            let weights = spec.weights(axis);
            if weights.is_empty() {
                return Err(out_of_range(spec.base_year));
            }
            let mut sum = RegionValues::zeros();
            for &(t, _) in &weights {
                sum = sum.zip_with(&urban_population(inputs.scenario, inputs.mask, t), |a, b| a + b);
            }
            let k = weights.len() as f64;
            Ok(sum.map(|v| v / k))
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantiles of SCC across ensemble members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub variant: Variant,
    pub rate: f64,
    pub members: usize,
    pub quantiles: Vec<f64>,
    /// One entry per quantile.
    pub per_region: Vec<RegionValues>,
    /// World SCC quantiles (not the sum of regional quantiles).
    pub world: Vec<f64>,
}

pub fn ensemble_percentiles(reports: &[SccReport], quantiles: &[f64]) -> Result<EnsembleSummary, SccError> {
    let first = reports.first().ok_or(SccError::EmptyEnsemble)?;
    for r in reports {
        if r.variant != first.variant {
            return Err(SccError::VariantMismatch(first.variant, r.variant));
        }
    }
    if let Some(&q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(SccError::InvalidQuantile(q));
    }
    let sorted = |f: &dyn Fn(&SccReport) -> f64| {
        let mut v: Vec<f64> = reports.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let regional: Vec<Vec<f64>> = Region::ALL.iter().map(|&r| sorted(&|rep| rep.per_region.get(r))).collect();
    let world = sorted(&|rep| rep.world());
    let per_region = quantiles
        .iter()
        .map(|&q| {
            let mut v = RegionValues::zeros();
            for r in Region::ALL {
                v.set(r, quantile_sorted(&regional[r.index()], q));
            }
            v
        })
        .collect();
    Ok(EnsembleSummary {
        variant: first.variant,
        rate: first.rate,
        members: reports.len(),
        quantiles: quantiles.to_vec(),
        per_region,
        world: quantiles.iter().map(|&q| quantile_sorted(&world, q)).collect(),
    })
}
