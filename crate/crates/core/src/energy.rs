//! Modeled energy and carbon per token.
//!
//! `j = TDP · u · PUE · (1 − σ) / tokens_per_sec / sharing_factor`, then
//! kWh per million tokens and grams CO₂ per million tokens follow from the
//! region's grid intensity.

use alloc::format;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Endpoint, EndpointId, HardwareClass, Region, Registry};

pub const DEFAULT_UTILIZATION: f64 = 0.70;
pub const DEFAULT_SPARSITY: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Disclosed,
    RegionalDefault,
    Modeled,
}

impl Provenance {
    pub const fn as_str(self) -> &'static str {
        match self {
            Provenance::Disclosed => "disclosed",
            Provenance::RegionalDefault => "regional_default",
            Provenance::Modeled => "modeled",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disclosed" => Ok(Provenance::Disclosed),
            "regional_default" => Ok(Provenance::RegionalDefault),
            "modeled" => Ok(Provenance::Modeled),
            _ => Err(Error::invalid("provenance", format!("`{s}` is not a provenance"))),
        }
    }
}

/// Provider-disclosed operating figures, where available.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Disclosure {
    pub utilization: Option<f64>,
    pub pue: Option<f64>,
    pub sparsity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAssumptions {
    pub utilization: f64,
    pub utilization_provenance: Provenance,
    pub pue: f64,
    pub pue_provenance: Provenance,
    pub sparsity: f64,
    pub sparsity_provenance: Provenance,
}

impl EnergyAssumptions {
    /// Modeled defaults with the hardware class's PUE.
    pub fn modeled(hw: &HardwareClass) -> Self {
        EnergyAssumptions {
            utilization: DEFAULT_UTILIZATION,
            utilization_provenance: Provenance::Modeled,
            pue: hw.default_pue,
            pue_provenance: Provenance::Modeled,
            sparsity: DEFAULT_SPARSITY,
            sparsity_provenance: Provenance::Modeled,
        }
    }

    /// Disclosed figures first; PUE then falls back to the region override
    /// and finally the hardware default.
    pub fn resolve(disclosure: &Disclosure, hw: &HardwareClass, region: &Region) -> Self {
        let mut a = EnergyAssumptions::modeled(hw);
        if let Some(u) = disclosure.utilization {
            a.utilization = u;
            a.utilization_provenance = Provenance::Disclosed;
        }
        if let Some(s) = disclosure.sparsity {
            a.sparsity = s;
            a.sparsity_provenance = Provenance::Disclosed;
        }
        match (disclosure.pue, region.pue_override) {
            (Some(p), _) => {
                a.pue = p;
                a.pue_provenance = Provenance::Disclosed;
            }
            (None, Some(p)) => {
                a.pue = p;
                a.pue_provenance = Provenance::RegionalDefault;
            }
            (None, None) => {}
        }
        a
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return Err(Error::invalid("utilization", "must lie in (0, 1]"));
        }
        if !(self.pue.is_finite() && self.pue >= 1.0) {
            return Err(Error::invalid("pue", "must be >= 1.0"));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::invalid("sparsity", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

pub fn joules_per_token(hw: &HardwareClass, assumptions: &EnergyAssumptions, tokens_per_sec: f64) -> Result<f64> {
    if !(tokens_per_sec > 0.0 && tokens_per_sec.is_finite()) {
        return Err(Error::invalid("tokens_per_sec", format!("{tokens_per_sec} must be > 0")));
    }
    assumptions.validate()?;
    let a = assumptions;
    Ok(hw.tdp_watts * a.utilization * a.pue * (1.0 - a.sparsity) / tokens_per_sec / hw.sharing_factor)
}

/// `(kWh per 1M tokens, gCO₂ per 1M tokens)`.
pub fn kwh_and_co2(j_per_token: f64, region: &Region) -> Result<(f64, f64)> {
    if !(j_per_token > 0.0 && j_per_token.is_finite()) {
        return Err(Error::invalid("j_per_token", "must be > 0"));
    }
    let kwh = j_per_token * 1e6 / 3.6e6;
    Ok((kwh, kwh * region.grid_intensity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub endpoint: EndpointId,
    pub j_per_token: f64,
    pub kwh_per_mtok: f64,
    pub gco2_per_mtok: f64,
    pub assumptions: EnergyAssumptions,
    pub sharing_factor: f64,
    pub grid_intensity: f64,
    pub throughput_used: f64,
}

impl EnergyEstimate {
    pub fn validate(&self) -> Result<()> {
        // Relative slack covers values that went through 9-digit text.
        let kwh = self.j_per_token * 1e6 / 3.6e6;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1e-300);
        if !(self.j_per_token > 0.0) || !close(self.kwh_per_mtok, kwh) || !close(self.gco2_per_mtok, kwh * self.grid_intensity) {
            return Err(Error::invalid(
                format!("energy estimate {}", self.endpoint),
                "kWh and gCO2 must follow from j_per_token",
            ));
        }
        self.assumptions.validate()
    }
}

/// Full estimate for a registry endpoint at a measured throughput.
pub fn estimate(
    registry: &Registry,
    endpoint: &Endpoint,
    disclosure: &Disclosure,
    tokens_per_sec: f64,
) -> Result<EnergyEstimate> {
    let hw = registry.hardware_class(&endpoint.hardware_class)?;
    let region = registry.region(&endpoint.id.region)?;
    let assumptions = EnergyAssumptions::resolve(disclosure, hw, region);
    let j = joules_per_token(hw, &assumptions, tokens_per_sec)?;
    let (kwh, gco2) = kwh_and_co2(j, region)?;
    Ok(EnergyEstimate {
        endpoint: endpoint.id.clone(),
        j_per_token: j,
        kwh_per_mtok: kwh,
        gco2_per_mtok: gco2,
        assumptions,
        sharing_factor: hw.sharing_factor,
        grid_intensity: region.grid_intensity,
        throughput_used: tokens_per_sec,
    })
}
