use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The 13 world regions results are aggregated to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Region {
    Us,
    Eu,
    Japan,
    Russia,
    Eurasia,
    China,
    India,
    Meast,
    Africa,
    Lam,
    Ohi,
    Oasia,
    Mx,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown region code {0:?}")]
pub struct UnknownRegion(pub String);

impl Region {
    pub const COUNT: usize = 13;

    /// Report order.
    pub const ALL: [Region; Region::COUNT] = [
        Region::Us,
        Region::Eu,
        Region::Japan,
        Region::Russia,
        Region::Eurasia,
        Region::China,
        Region::India,
        Region::Meast,
        Region::Africa,
        Region::Lam,
        Region::Ohi,
        Region::Oasia,
        Region::Mx,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Region::Us => "US",
            Region::Eu => "EU",
            Region::Japan => "JAPAN",
            Region::Russia => "RUSSIA",
            Region::Eurasia => "EURASIA",
            Region::China => "CHINA",
            Region::India => "INDIA",
            Region::Meast => "MEAST",
            Region::Africa => "AFRICA",
            Region::Lam => "LAM",
            Region::Ohi => "OHI",
            Region::Oasia => "OASIA",
            Region::Mx => "MX",
        }
    }

    /// Position in [`Region::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Region {
    type Err = UnknownRegion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Region::ALL
            .into_iter()
            .find(|r| r.code() == s)
            .ok_or_else(|| UnknownRegion(s.to_string()))
    }
}

impl TryFrom<String> for Region {
    type Error = UnknownRegion;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Region> for String {
    fn from(r: Region) -> Self {
        r.code().to_string()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One value per region, in [`Region::ALL`] order. The world value is the
/// plain sum over regions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionValues(pub [f64; Region::COUNT]);

impl RegionValues {
    pub fn zeros() -> Self {
        Self([0.0; Region::COUNT])
    }

    pub fn get(&self, region: Region) -> f64 {
        self.0[region.index()]
    }

    pub fn set(&mut self, region: Region, value: f64) {
        self.0[region.index()] = value;
    }

    pub fn add(&mut self, region: Region, value: f64) {
        self.0[region.index()] += value;
    }

    pub fn world(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Region, f64)> + '_ {
        Region::ALL.into_iter().zip(self.0.iter().copied())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = [0.0; Region::COUNT];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(self.0[i], other.0[i]);
        }
        Self(out)
    }
}
