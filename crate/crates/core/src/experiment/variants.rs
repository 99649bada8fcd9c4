use std::fmt;
use std::str::FromStr;

use super::config::{ExperimentConfig, TrendChoice};
use crate::error::{Error, Result};
use crate::gp::NoiseSpec;

/// Modifiers of a base local-volatility configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// The base configuration itself.
    M1,
    /// No virtual points.
    M2,
    /// 10 ITM, 10 OTM and 10 maturity virtual points.
    M3,
    /// Plug-in heteroskedastic noise.
    M4,
    /// Constant trend.
    M5,
    /// Black–Scholes reference trend with σ = 0.3.
    M6,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::M1, Variant::M2, Variant::M3, Variant::M4, Variant::M5, Variant::M6];

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(Variant::M1),
            "M2" => Ok(Variant::M2),
            "M3" => Ok(Variant::M3),
            "M4" => Ok(Variant::M4),
            "M5" => Ok(Variant::M5),
            "M6" => Ok(Variant::M6),
            other => Err(Error::Config(format!("unknown variant '{other}' (expected M1..M6)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::M1 => "M1",
            Variant::M2 => "M2",
            Variant::M3 => "M3",
            Variant::M4 => "M4",
            Variant::M5 => "M5",
            Variant::M6 => "M6",
        }
    }

    pub fn apply(self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = base.clone();
        c.variants.clear();
        match self {
            Variant::M1 => {}
            Variant::M2 => {
                c.design.virtual_itm = 0;
                c.design.virtual_otm = 0;
                c.design.virtual_maturity = 0;
            }
            Variant::M3 => {
                c.design.virtual_itm = 10;
                c.design.virtual_otm = 10;
                c.design.virtual_maturity = 10;
            }
            Variant::M4 => c.model.noise = NoiseSpec::PluginHeteroskedastic,
            Variant::M5 => c.model.trend = TrendChoice::Constant,
            Variant::M6 => c.model.trend = TrendChoice::Reference { volatility: 0.3 },
        }
        c
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::parse(s)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
