//! Spectral bands over which spatial filters are optimized.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    BetaLow,
    BetaHigh,
    GammaLow,
    GammaMid,
    GammaHigh,
    Hfo,
}

impl BandName {
    pub const ALL: [BandName; 9] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::BetaLow,
        BandName::BetaHigh,
        BandName::GammaLow,
        BandName::GammaMid,
        BandName::GammaHigh,
        BandName::Hfo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::BetaLow => "beta_low",
            BandName::BetaHigh => "beta_high",
            BandName::GammaLow => "gamma_low",
            BandName::GammaMid => "gamma_mid",
            BandName::GammaHigh => "gamma_high",
            BandName::Hfo => "hfo",
        }
    }

    /// Canonical passband edges in Hz.
    ///
    /// The 74-76 Hz stretch between `gamma_mid` and `gamma_high` is left
    /// uncovered on purpose.
    pub fn edges(self) -> (f64, f64) {
        match self {
            BandName::Delta => (1.5, 4.0),
            BandName::Theta => (4.0, 8.0),
            BandName::Alpha => (8.0, 15.0),
            BandName::BetaLow => (15.0, 26.0),
            BandName::BetaHigh => (26.0, 35.0),
            BandName::GammaLow => (35.0, 50.0),
            BandName::GammaMid => (50.0, 74.0),
            BandName::GammaHigh => (76.0, 120.0),
            BandName::Hfo => (120.0, 220.0),
        }
    }

    pub fn spec(self) -> BandSpec {
        let (lo_hz, hi_hz) = self.edges();
        BandSpec {
            name: self,
            lo_hz,
            hi_hz,
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownBand(pub String);

impl fmt::Display for UnknownBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown band `{}`", self.0)
    }
}

impl std::error::Error for UnknownBand {}

impl FromStr for BandName {
    type Err = UnknownBand;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| UnknownBand(s.to_string()))
    }
}

/// A named passband `[lo_hz, hi_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandSpec {
    /// The nine canonical bands, lowest first.
    pub fn canonical() -> Vec<BandSpec> {
        BandName::ALL.iter().map(|b| b.spec()).collect()
    }

    pub fn fits(&self, sample_rate_hz: f64) -> bool {
        0.0 < self.lo_hz && self.lo_hz < self.hi_hz && self.hi_hz < sample_rate_hz / 2.0
    }
}

impl From<BandName> for BandSpec {
    fn from(name: BandName) -> Self {
        name.spec()
    }
}
