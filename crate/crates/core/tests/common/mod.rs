//! Fixtures and an independent direct-enumeration oracle shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use gridscc::climate::{GlobalTrajectory, PatternField};
use gridscc::scenario::{GridCell, Scenario};
use gridscc::{Region, YearAxis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// A scenario spelled out cell by cell.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub first_year: i32,
    pub regions: Vec<Region>,
    pub population: Vec<Vec<f64>>,
    pub gdp: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    /// Reference global anomaly (°C at ECS 3).
    pub anomaly: Vec<f64>,
}

impl Fixture {
    pub fn years(&self) -> usize {
        self.anomaly.len()
    }

    pub fn axis(&self) -> YearAxis {
        YearAxis::new(self.first_year, self.first_year + self.years() as i32 - 1).unwrap()
    }

    fn cell(&self, c: usize) -> GridCell {
        GridCell {
            cell_id: 100 + c as u64,
            lat: -60.0 + (c % 120) as f64,
            lon: -170.0 + (c % 340) as f64,
            region: self.regions[c],
        }
    }

    pub fn scenario(&self) -> Scenario {
        let cells = (0..self.regions.len()).map(|c| self.cell(c)).collect();
        Scenario::new(
            "fixture",
            self.axis(),
            cells,
            self.population.concat(),
            self.gdp.concat(),
        )
        .unwrap()
    }

    pub fn trajectory(&self) -> GlobalTrajectory {
        GlobalTrajectory::new("fixture", self.axis(), self.anomaly.clone()).unwrap()
    }

    pub fn pattern(&self) -> PatternField {
        let slopes = (0..self.slopes.len()).map(|c| (self.cell(c).cell_id, self.slopes[c])).collect();
        PatternField::new("fixture", slopes).unwrap()
    }

    /// Writes `scenario.csv`, `pattern.csv` and `global.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) {
        let mut s = String::from("cell_id,lat,lon,region,year,population,gdp\n");
        for c in 0..self.regions.len() {
            let cell = self.cell(c);
            for t in 0..self.years() {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    cell.cell_id,
                    cell.lat,
                    cell.lon,
                    cell.region.code(),
                    self.first_year + t as i32,
                    self.population[c][t],
                    self.gdp[c][t]
                )
                .unwrap();
            }
        }
        std::fs::write(dir.join("scenario.csv"), s).unwrap();
        let mut p = String::from("cell_id,slope\n");
        for c in 0..self.slopes.len() {
            writeln!(p, "{},{}", self.cell(c).cell_id, self.slopes[c]).unwrap();
        }
        std::fs::write(dir.join("pattern.csv"), p).unwrap();
        let mut g = String::from("year,anomaly_degC\n");
        for (t, a) in self.anomaly.iter().enumerate() {
            writeln!(g, "{},{}", self.first_year + t as i32, a).unwrap();
        }
        std::fs::write(dir.join("global.csv"), g).unwrap();
    }
}

/// Four cells in two regions over three years. One cell crosses the
/// urban threshold mid-way.
pub fn four_cell() -> Fixture {
    Fixture {
        first_year: 2010,
        regions: vec![Region::Us, Region::Us, Region::India, Region::India],
        population: vec![
            vec![2.0e6, 2.1e6, 2.2e6],
            vec![4.0e4, 4.1e4, 4.2e4],
            vec![2.4e5, 2.6e5, 3.0e5],
            vec![9.0e4, 9.5e4, 1.0e5],
        ],
        gdp: vec![
            vec![9.0e11, 9.3e11, 9.6e11],
            vec![5.0e10, 5.1e10, 5.2e10],
            vec![2.0e10, 2.3e10, 2.7e10],
            vec![6.0e9, 6.2e9, 6.4e9],
        ],
        slopes: vec![1.2, 0.9, 1.1, 1.4],
        anomaly: vec![1.0, 1.05, 1.1],
    }
}

/// Random scenario with positive warming in every year.
pub fn random_fixture(rng: &mut ChaCha8Rng, cells: usize, years: usize, regions: &[Region]) -> Fixture {
    let mut population = Vec::with_capacity(cells);
    let mut gdp = Vec::with_capacity(cells);
    let mut cell_regions = Vec::with_capacity(cells);
    for c in 0..cells {
        cell_regions.push(regions[c % regions.len()]);
        let p0 = 10f64.powf(rng.random_range(3.0..6.8));
        let growth: f64 = rng.random_range(-0.01..0.03);
        let per_capita = rng.random_range(500.0..60_000.0);
        let pop: Vec<f64> = (0..years).map(|t| p0 * (1.0 + growth).powi(t as i32)).collect();
        gdp.push(pop.iter().enumerate().map(|(t, p)| p * per_capita * 1.02f64.powi(t as i32)).collect());
        population.push(pop);
    }
    let start = rng.random_range(0.6..1.2);
    let trend = rng.random_range(0.005..0.06);
    let anomaly = (0..years).map(|t| start + trend * t as f64 + rng.random_range(0.0..0.05)).collect();
    Fixture {
        first_year: 2010,
        regions: cell_regions,
        population,
        gdp,
        slopes: (0..cells).map(|_| rng.random_range(0.3..2.0)).collect(),
        anomaly,
    }
}

/// Parameters of the oracle, written out independently of the engine's
/// configuration types.
#[derive(Debug, Clone)]
pub struct OracleParams {
    pub ecs: f64,
    pub threshold: f64,
    pub uhi_a: f64,
    pub uhi_b: f64,
    /// Per region: (alpha_r, alpha_u, phi).
    pub damage: HashMap<Region, (f64, f64, f64)>,
    pub default_damage: (f64, f64, f64),
    /// Global damage function: `Some((s1, s2, p))` for Weitzman, else
    /// quadratic with `quadratic`.
    pub weitzman: Option<(f64, f64, f64)>,
    pub quadratic: f64,
    pub amplitudes: [f64; 3],
    pub timescales: [f64; 3],
    pub pulse_year: i32,
    pub pulse_gtc: f64,
    pub horizon: i32,
    pub reduction: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            ecs: 3.0,
            threshold: 250_000.0,
            uhi_a: 1.85e-3,
            uhi_b: 0.45,
            damage: HashMap::new(),
            default_damage: (0.00236, 0.00236, 0.5),
            weitzman: None,
            quadratic: 0.00236,
            amplitudes: [-2.308, 0.743, -0.191],
            timescales: [2.241, 35.750, 97.180],
            pulse_year: 2010,
            pulse_gtc: 1.0,
            horizon: 2100,
            reduction: 0.01,
        }
    }
}

/// Results of the direct enumeration for one variant and discount rate.
#[derive(Debug, Clone, Default)]
pub struct OracleResult {
    pub scc: HashMap<Region, f64>,
    /// Per region: (nu, u_nouhi, u). Only for urban variants.
    pub decomposition: HashMap<Region, (f64, f64, f64)>,
    pub scuhi_total: HashMap<Region, f64>,
    pub scuhi_marginal: HashMap<Region, f64>,
    pub urban_population: HashMap<Region, f64>,
}

pub struct Oracle<'a> {
    pub fixture: &'a Fixture,
    pub params: OracleParams,
}

impl Oracle<'_> {
    fn damage(&self, r: Region) -> (f64, f64, f64) {
        *self.params.damage.get(&r).unwrap_or(&self.params.default_damage)
    }

    fn pulse(&self, year: i32) -> f64 {
        let p = &self.params;
        if year < p.pulse_year {
            return 0.0;
        }
        let dt = (year - p.pulse_year) as f64;
        let mut mk = -(p.amplitudes[0] + p.amplitudes[1] + p.amplitudes[2]);
        for i in 0..3 {
            mk += p.amplitudes[i] * (-dt / p.timescales[i]).exp();
        }
        mk * p.pulse_gtc / 1000.0
    }

    fn global(&self, t: usize, pulsed: bool) -> f64 {
        let year = self.fixture.first_year + t as i32;
        let base = self.fixture.anomaly[t] * self.params.ecs / 3.0;
        if pulsed {
            base + self.pulse(year)
        } else {
            base
        }
    }

    fn global_df(&self, temp: f64) -> f64 {
        match self.params.weitzman {
            Some((s1, s2, p)) => {
                let x = temp.max(0.0);
                let d = (x / s1).powi(2) + (x / s2).powf(p);
                d / (1.0 + d)
            }
            None => self.params.quadratic * temp * temp,
        }
    }

    fn urban(&self, c: usize, t: usize) -> bool {
        self.fixture.population[c][t] >= self.params.threshold
    }

    fn t_uhi(&self, c: usize, t: usize, a: f64) -> f64 {
        if self.urban(c, t) {
            a * self.fixture.population[c][t].powf(self.params.uhi_b)
        } else {
            0.0
        }
    }

    /// Scaling factor of one run: world R damages of the global function
    /// over the bottom-up R losses.
    fn scaling(&self, pulsed: bool) -> Vec<f64> {
        let f = self.fixture;
        (0..f.years())
            .map(|t| {
                let tg = self.global(t, pulsed);
                let mut world_gdp = 0.0;
                let mut bottom_up = 0.0;
                for c in 0..f.regions.len() {
                    let (ar, _, _) = self.damage(f.regions[c]);
                    let local = f.slopes[c] * tg;
                    world_gdp += f.gdp[c][t];
                    bottom_up += f.gdp[c][t] * ar * local * local;
                }
                let top_down = self.global_df(tg) * world_gdp;
                if bottom_up == 0.0 {
                    assert_eq!(top_down, 0.0);
                    1.0
                } else {
                    top_down / bottom_up
                }
            })
            .collect()
    }

    /// Final losses per (region, urban) and year.
    fn losses(&self, pulsed: bool, uhi: bool, persistence: bool, a: &dyn Fn(usize) -> f64) -> HashMap<(Region, bool), Vec<f64>> {
        let f = self.fixture;
        let s = self.scaling(pulsed);
        let mut out: HashMap<(Region, bool), Vec<f64>> = HashMap::new();
        for c in 0..f.regions.len() {
            let region = f.regions[c];
            let (ar, au, _) = self.damage(region);
            for t in 0..f.years() {
                let tg = f.slopes[c] * self.global(t, pulsed);
                let tu = if uhi { self.t_uhi(c, t, a(t)) } else { 0.0 };
                let fraction = ar * tg * tg + 2.0 * au * tg * tu + au * tu * tu;
                let entry = out.entry((region, self.urban(c, t))).or_insert_with(|| vec![0.0; f.years()]);
                entry[t] += s[t] * f.gdp[c][t] * fraction;
            }
        }
        if persistence {
            for ((region, _), series) in out.iter_mut() {
                let phi = self.damage(*region).2;
                for t in 1..series.len() {
                    series[t] += phi * series[t - 1];
                }
            }
        }
        out
    }

    fn discount(&self, rate: f64, t: usize) -> Option<f64> {
        let year = self.fixture.first_year + t as i32;
        if year < self.params.pulse_year || year > self.params.horizon {
            None
        } else {
            Some(1.0 / (1.0 + rate).powi(year - self.params.pulse_year))
        }
    }

    fn present_value(&self, series: &[f64], rate: f64) -> f64 {
        series.iter().enumerate().filter_map(|(t, v)| self.discount(rate, t).map(|d| d * v)).sum()
    }

    fn tonnes(&self) -> f64 {
        self.params.pulse_gtc * 1e9 * 44.01 / 12.011
    }

    /// SCC per region restricted to the given urban classes.
    fn scc_classes(&self, uhi: bool, persistence: bool, classes: &[bool], rate: f64) -> HashMap<Region, f64> {
        let a = |_| self.params.uhi_a;
        let base = self.losses(false, uhi, persistence, &a);
        let pulsed = self.losses(true, uhi, persistence, &a);
        let mut out = HashMap::new();
        for r in self.fixture.regions.iter() {
            let mut v = 0.0;
            for &urban in classes {
                let zero = vec![0.0; self.fixture.years()];
                let b = base.get(&(*r, urban)).unwrap_or(&zero);
                let p = pulsed.get(&(*r, urban)).unwrap_or(&zero);
                let diff: Vec<f64> = p.iter().zip(b).map(|(p, b)| p - b).collect();
                v += self.present_value(&diff, rate);
            }
            out.insert(*r, v / self.tonnes());
        }
        out
    }

    /// Present value of `S gdp α_U (ε T_UHI)²` over urban cells: the gap
    /// between the first-order and the exact benefit of the UHI reduction.
    pub fn second_order(&self, persistence: bool, rate: f64) -> HashMap<Region, f64> {
        let f = self.fixture;
        let s = self.scaling(false);
        let eps = self.params.reduction;
        let mut series: HashMap<Region, Vec<f64>> = HashMap::new();
        for c in 0..f.regions.len() {
            let (_, au, _) = self.damage(f.regions[c]);
            let entry = series.entry(f.regions[c]).or_insert_with(|| vec![0.0; f.years()]);
            for t in 0..f.years() {
                let du = eps * self.t_uhi(c, t, self.params.uhi_a);
                entry[t] += s[t] * f.gdp[c][t] * au * du * du;
            }
        }
        series
            .into_iter()
            .map(|(r, mut v)| {
                if persistence {
                    let phi = self.damage(r).2;
                    for t in 1..v.len() {
                        v[t] += phi * v[t - 1];
                    }
                }
                (r, self.present_value(&v, rate))
            })
            .collect()
    }

    pub fn evaluate(&self, uhi: bool, persistence: bool, rate: f64) -> OracleResult {
        let mut result = OracleResult {
            scc: self.scc_classes(uhi, persistence, &[false, true], rate),
            ..Default::default()
        };
        if !uhi {
            return result;
        }
        let nu = self.scc_classes(false, persistence, &[false], rate);
        let u_nouhi = self.scc_classes(false, persistence, &[true], rate);
        let u = self.scc_classes(true, persistence, &[true], rate);
        for r in self.fixture.regions.iter() {
            result.decomposition.insert(*r, (nu[r], u_nouhi[r], u[r]));
        }

        let f = self.fixture;
        let a = self.params.uhi_a;
        let reduced = a * (1.0 - self.params.reduction);
        let full = self.losses(false, true, persistence, &|_| a);
        let less = self.losses(false, true, persistence, &|t| {
            if f.first_year + t as i32 >= self.params.pulse_year {
                reduced
            } else {
                a
            }
        });
        let s = self.scaling(false);
        let mut marginal: HashMap<Region, Vec<f64>> = HashMap::new();
        for c in 0..f.regions.len() {
            let region = f.regions[c];
            let (_, au, _) = self.damage(region);
            let entry = marginal.entry(region).or_insert_with(|| vec![0.0; f.years()]);
            for t in 0..f.years() {
                if self.urban(c, t) {
                    let pb = f.population[c][t].powf(self.params.uhi_b);
                    let tg = f.slopes[c] * self.global(t, false);
                    entry[t] += s[t] * f.gdp[c][t] * 2.0 * au * (tg + a * pb) * pb;
                }
            }
        }
        if persistence {
            for (region, series) in marginal.iter_mut() {
                let phi = self.damage(*region).2;
                for t in 1..series.len() {
                    series[t] += phi * series[t - 1];
                }
            }
        }
        let t0 = (self.params.pulse_year - f.first_year) as usize;
        for r in f.regions.iter() {
            let zero = vec![0.0; f.years()];
            let full_u = full.get(&(*r, true)).unwrap_or(&zero);
            let less_u = less.get(&(*r, true)).unwrap_or(&zero);
            let diff: Vec<f64> = full_u.iter().zip(less_u).map(|(x, y)| x - y).collect();
            result.scuhi_total.insert(*r, self.present_value(&diff, rate));
            result.scuhi_marginal.insert(*r, self.present_value(&marginal[r], rate));
            let pop: f64 = (0..f.regions.len())
                .filter(|&c| f.regions[c] == *r && self.urban(c, t0))
                .map(|c| f.population[c][t0])
                .sum();
            result.urban_population.insert(*r, pop);
        }
        result
    }
}
