use serde::{Deserialize, Serialize};

/// Inclusive range of consecutive calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearAxis {
    first: i32,
    last: i32,
}

impl YearAxis {
    /// Returns `None` when `last < first`.
    pub fn new(first: i32, last: i32) -> Option<Self> {
        (last >= first).then_some(Self { first, last })
    }

    pub fn first(&self) -> i32 {
        self.first
    }

    pub fn last(&self) -> i32 {
        self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first) as usize + 1
    }

    /// Always false; an axis holds at least one year.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        self.contains(year).then(|| (year - self.first) as usize)
    }

    pub fn year_at(&self, index: usize) -> i32 {
        debug_assert!(index < self.len());
        self.first + index as i32
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }

    /// True when every year of `other` lies on this axis.
    pub fn covers(&self, other: &YearAxis) -> bool {
        self.first <= other.first && self.last >= other.last
    }
}

impl std::fmt::Display for YearAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}
