//! CSV report emission.
//!
//! | file              | rows                                   | columns |
//! |-------------------|----------------------------------------|---------|
//! | `table1.csv`      | 13 regions + `WORLD` per rate          | `rate,region` then `<V>,<V>_pct` per variant |
//! | `table2.csv`      | 13 regions + `WORLD` per rate, variant | `rate,variant,region,nu,u,u_nouhi,exposure,uhi_int,total` |
//! | `scuhi.csv`       | 13 regions + `WORLD` per rate, variant | `rate,variant,region,reduction,start_year,marginal_a,total_npv,reference_population,per_dweller` |
//! | `percentiles.csv` | 13 regions + `WORLD` per rate, variant | `rate,variant,region` then `p<q>` per quantile |
//!
//! Monetary values are USD-2005 (per tCO₂ for SCC) with six decimals;
//! percentages are computed from unrounded values and printed with two.
//! Tables 1, 2 and the SCUHI summary report the ensemble mean.

use super::{RateResults, RunResults};
use crate::damage::Variant;
use crate::region::{Region, RegionValues};
use crate::scc::{ensemble_percentiles, Decomposition, DecompositionRow, EnsembleSummary, SccError, SccReport, ScuhiReport};
use std::io::Write;
use std::path::Path;

pub const TABLE1: &str = "table1.csv";
pub const TABLE2: &str = "table2.csv";
pub const SCUHI: &str = "scuhi.csv";
pub const PERCENTILES: &str = "percentiles.csv";

pub const WORLD: &str = "WORLD";

/// Relative tolerance of the closure re-check before writing Table 2.
const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Scc(#[from] SccError),
    #[error("decomposition does not close for {region} ({variant}): {detail}")]
    Closure {
        region: String,
        variant: Variant,
        detail: String,
    },
}

/// One discount rate of Table 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Block {
    pub rate: f64,
    pub variants: Vec<Variant>,
    /// Label and one value per variant.
    pub regions: Vec<(String, Vec<f64>)>,
    /// One value per variant; percentages are relative to it.
    pub world: Vec<f64>,
}

impl Table1Block {
    /// Block from one report per variant.
    pub fn from_reports(rate: f64, reports: &[SccReport]) -> Self {
        Self {
            rate,
            variants: reports.iter().map(|r| r.variant).collect(),
            regions: Region::ALL
                .iter()
                .map(|&region| (region.code().to_string(), reports.iter().map(|r| r.per_region.get(region)).collect()))
                .collect(),
            world: reports.iter().map(|r| r.world()).collect(),
        }
    }
}

/// Everything written by [`emit_reports`].
#[derive(Debug, Clone, Default)]
pub struct Reports {
    pub table1: Vec<Table1Block>,
    pub table2: Vec<Decomposition>,
    pub scuhi: Vec<ScuhiReport>,
    pub percentiles: Vec<EnsembleSummary>,
}

impl Reports {
    /// Ensemble means for the tables and quantiles for the percentile file.
    pub fn from_results(results: &RunResults, quantiles: &[f64]) -> Result<Self, ReportError> {
        let mut reports = Reports::default();
        for RateResults { discount, variants } in &results.rates {
            let means: Vec<SccReport> = variants.iter().map(|v| mean_scc(&v.scc)).collect::<Result<_, _>>()?;
            reports.table1.push(Table1Block::from_reports(discount.rate, &means));
            for v in variants {
                if !v.decomposition.is_empty() {
                    reports.table2.push(mean_decomposition(&v.decomposition));
                }
                if !v.scuhi.is_empty() {
                    reports.scuhi.push(mean_scuhi(&v.scuhi));
                }
                reports.percentiles.push(ensemble_percentiles(&v.scc, quantiles)?);
            }
        }
        Ok(reports)
    }
}

fn mean_values<'a>(values: impl ExactSizeIterator<Item = &'a RegionValues>) -> RegionValues {
    let n = values.len() as f64;
    let mut sum = RegionValues::zeros();
    for v in values {
        sum = sum.zip_with(v, |a, b| a + b);
    }
    sum.map(|s| s / n)
}

pub fn mean_scc(reports: &[SccReport]) -> Result<SccReport, SccError> {
    let first = reports.first().ok_or(SccError::EmptyEnsemble)?;
    Ok(SccReport {
        variant: first.variant,
        rate: first.rate,
        per_region: mean_values(reports.iter().map(|r| &r.per_region)),
        missing: first.missing.clone(),
    })
}

/// Component-wise mean; the identities are linear and survive averaging.
pub fn mean_decomposition(items: &[Decomposition]) -> Decomposition {
    let n = items.len() as f64;
    let first = &items[0];
    let regions = (0..Region::COUNT)
        .map(|i| {
            let mean = |f: fn(&DecompositionRow) -> f64| items.iter().map(|d| f(&d.regions[i])).sum::<f64>() / n;
            DecompositionRow::from_components(mean(|r| r.nu), mean(|r| r.u_nouhi), mean(|r| r.u))
        })
        .collect();
    Decomposition::from_regions(first.variant, first.rate, regions)
}

pub fn mean_scuhi(items: &[ScuhiReport]) -> ScuhiReport {
    let first = &items[0];
    ScuhiReport {
        marginal_a: mean_values(items.iter().map(|s| &s.marginal_a)),
        total_npv: mean_values(items.iter().map(|s| &s.total_npv)),
        reference_population: mean_values(items.iter().map(|s| &s.reference_population)),
        ..first.clone()
    }
}

fn money(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn percent(value: f64, world: f64) -> String {
    if world == 0.0 {
        "0.00".to_string()
    } else {
        let s = format!("{:.2}", 100.0 * value / world);
        if s == "-0.00" {
            "0.00".to_string()
        } else {
            s
        }
    }
}

pub fn write_table1<W: Write>(w: W, blocks: &[Table1Block]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    let variants = blocks.first().map(|b| b.variants.clone()).unwrap_or_default();
    let mut header = vec!["rate".to_string(), "region".to_string()];
    for v in &variants {
        header.push(v.code().to_string());
        header.push(format!("{}_pct", v.code()));
    }
    out.write_record(&header)?;
    for block in blocks {
        let rows = block.regions.iter().map(|(l, v)| (l.as_str(), v)).chain([(WORLD, &block.world)]);
        for (label, values) in rows {
            let mut record = vec![block.rate.to_string(), label.to_string()];
            for (v, world) in values.iter().zip(&block.world) {
                record.push(money(*v));
                record.push(percent(*v, *world));
            }
            out.write_record(&record)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Re-checks `nu + u_nouhi + uhi_int = total` and
/// `exposure = u_nouhi - nu` for a row.
pub fn check_closure(label: &str, variant: Variant, row: &DecompositionRow) -> Result<(), ReportError> {
    let scale = row.total().abs().max(row.u_nouhi.abs()).max(row.nu.abs()).max(1.0);
    let chain = row.closure_error();
    let exposure = (row.exposure - (row.u_nouhi - row.nu)).abs();
    let uhi = (row.uhi_int - (row.u - row.u_nouhi)).abs();
    for (what, err) in [("total", chain), ("exposure", exposure), ("uhi_int", uhi)] {
        if !(err <= CLOSURE_TOLERANCE * scale) {
            return Err(ReportError::Closure {
                region: label.to_string(),
                variant,
                detail: format!("{what} off by {err:e}"),
            });
        }
    }
    Ok(())
}

pub fn write_table2<W: Write>(w: W, items: &[Decomposition]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rate", "variant", "region", "nu", "u", "u_nouhi", "exposure", "uhi_int", "total"])?;
    for d in items {
        let rows = Region::ALL.iter().map(|r| (r.code(), d.region(*r))).chain([(WORLD, &d.world)]);
        for (label, row) in rows {
            check_closure(label, d.variant, row)?;
            out.write_record([
                d.rate.to_string(),
                d.variant.code().to_string(),
                label.to_string(),
                money(row.nu),
                money(row.u),
                money(row.u_nouhi),
                money(row.exposure),
                money(row.uhi_int),
                money(row.total()),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_scuhi<W: Write>(w: W, items: &[ScuhiReport]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rate",
        "variant",
        "region",
        "reduction",
        "start_year",
        "marginal_a",
        "total_npv",
        "reference_population",
        "per_dweller",
    ])?;
    for s in items {
        let mut rows: Vec<(String, f64, f64, f64, f64)> = Region::ALL
            .iter()
            .map(|&r| {
                (
                    r.code().to_string(),
                    s.marginal_a.get(r),
                    s.total_npv.get(r),
                    s.reference_population.get(r),
                    s.per_dweller(r),
                )
            })
            .collect();
        rows.push((
            WORLD.to_string(),
            s.marginal_a.world(),
            s.total_npv.world(),
            s.reference_population.world(),
            s.world_per_dweller(),
        ));
        for (label, marginal, npv, pop, per) in rows {
            out.write_record([
                s.rate.to_string(),
                s.variant.code().to_string(),
                label,
                s.reduction.to_string(),
                s.start_year.to_string(),
                money(marginal),
                money(npv),
                format!("{pop:.1}"),
                money(per),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn quantile_label(q: f64) -> String {
    format!("p{}", (q * 1e6).round() / 1e4)
}

pub fn write_percentiles<W: Write>(w: W, items: &[EnsembleSummary]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    let quantiles = items.first().map(|s| s.quantiles.clone()).unwrap_or_default();
    let mut header = vec!["rate".to_string(), "variant".to_string(), "region".to_string(), "members".to_string()];
    header.extend(quantiles.iter().map(|&q| quantile_label(q)));
    out.write_record(&header)?;
    for s in items {
        for region in Region::ALL {
            let mut record = vec![s.rate.to_string(), s.variant.code().to_string(), region.code().to_string(), s.members.to_string()];
            record.extend(s.per_region.iter().map(|v| money(v.get(region))));
            out.write_record(&record)?;
        }
        let mut record = vec![s.rate.to_string(), s.variant.code().to_string(), WORLD.to_string(), s.members.to_string()];
        record.extend(s.world.iter().map(|&v| money(v)));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the four CSV reports into `dir` and returns their file names.
pub fn emit_reports(dir: &Path, reports: &Reports) -> Result<Vec<String>, ReportError> {
    let create = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_table1(create(TABLE1)?, &reports.table1)?;
    write_table2(create(TABLE2)?, &reports.table2)?;
    write_scuhi(create(SCUHI)?, &reports.scuhi)?;
    write_percentiles(create(PERCENTILES)?, &reports.percentiles)?;
    Ok([TABLE1, TABLE2, SCUHI, PERCENTILES].map(String::from).to_vec())
}
