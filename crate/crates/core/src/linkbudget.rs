//! Link budget in dB units: free-space loss, received power, carrier-to-noise
//! ratio, and the per-class feasibility test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SPEED_OF_LIGHT;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.38e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    /// Optical links are specified by wavelength.
    WavelengthM(f64),
    /// RF links are specified by carrier frequency.
    FrequencyHz(f64),
}

impl Carrier {
    pub fn wavelength_m(&self) -> f64 {
        match *self {
            Carrier::WavelengthM(l) => l,
            Carrier::FrequencyHz(f) => SPEED_OF_LIGHT / f,
        }
    }

    pub fn is_optical(&self) -> bool {
        matches!(self, Carrier::WavelengthM(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetParams {
    pub transmit_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    #[serde(default)]
    pub other_losses_db: f64,
    pub carrier: Carrier,
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("transmit_power_dbm", self.transmit_power_dbm),
            ("tx_gain_dbi", self.tx_gain_dbi),
            ("rx_gain_dbi", self.rx_gain_dbi),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(k, "must be finite"));
            }
        }
        if !(self.other_losses_db >= 0.0) {
            return Err(Error::invalid("other_losses_db", "must be >= 0"));
        }
        let c = match self.carrier {
            Carrier::WavelengthM(v) | Carrier::FrequencyHz(v) => v,
        };
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("carrier", "must be > 0"));
        }
        Ok(())
    }

    /// Distance at which the received power equals `required_dbm`.
    pub fn max_distance_m(&self, required_dbm: f64) -> f64 {
        let margin = self.transmit_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi
            - self.other_losses_db
            - required_dbm;
        self.carrier.wavelength_m() / (4.0 * std::f64::consts::PI) * 10f64.powf(margin / 20.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfNoiseParams {
    pub system_noise_temp_k: f64,
    pub bandwidth_hz: f64,
}

impl RfNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.system_noise_temp_k > 0.0) {
            return Err(Error::invalid("system_noise_temp_k", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::invalid("bandwidth_hz", "must be > 0"));
        }
        Ok(())
    }

    /// Thermal noise power in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        10.0 * (BOLTZMANN * self.system_noise_temp_k * self.bandwidth_hz).log10() + 30.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    Optical,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkClassRules {
    pub link_class: LinkClass,
    /// `None` means the class has no distance limit.
    pub distance_threshold_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_rx_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_cnr_db: Option<f64>,
}

impl LinkClassRules {
    pub fn optical(distance_threshold_m: Option<f64>, required_rx_power_dbm: f64) -> Self {
        LinkClassRules {
            link_class: LinkClass::Optical,
            distance_threshold_m,
            required_rx_power_dbm: Some(required_rx_power_dbm),
            required_cnr_db: None,
        }
    }

    pub fn rf(distance_threshold_m: Option<f64>, required_cnr_db: f64) -> Self {
        LinkClassRules {
            link_class: LinkClass::Rf,
            distance_threshold_m,
            required_rx_power_dbm: None,
            required_cnr_db: Some(required_cnr_db),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.distance_threshold_m {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("distance_threshold_m", "must be finite and > 0"));
            }
        }
        match self.link_class {
            LinkClass::Optical => match self.required_rx_power_dbm {
                Some(p) if p.is_finite() => Ok(()),
                _ => Err(Error::invalid(
                    "required_rx_power_dbm",
                    "optical rules need a finite required power",
                )),
            },
            LinkClass::Rf => match self.required_cnr_db {
                Some(c) if c.is_finite() => Ok(()),
                _ => Err(Error::invalid(
                    "required_cnr_db",
                    "rf rules need a finite required CNR",
                )),
            },
        }
    }

    pub fn within_distance(&self, distance_m: f64) -> bool {
        self.distance_threshold_m.map_or(true, |d| distance_m <= d)
    }
}

/// Geometric inputs of a link feasibility test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub visible: bool,
    pub distance_m: f64,
}

fn check_distance(distance_m: f64) -> Result<()> {
    if distance_m > 0.0 && distance_m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "distance must be positive, got {distance_m}"
        )))
    }
}

/// Free-space loss 20*log10(4*pi*d/lambda) in dB.
pub fn free_space_loss_db(distance_m: f64, carrier: Carrier) -> Result<f64> {
    check_distance(distance_m)?;
    let ratio = 4.0 * std::f64::consts::PI * distance_m / carrier.wavelength_m();
    Ok(20.0 * ratio.log10())
}

pub fn received_power_dbm(p: &LinkBudgetParams, distance_m: f64) -> Result<f64> {
    let lf = free_space_loss_db(distance_m, p.carrier)?;
    Ok(p.transmit_power_dbm + p.tx_gain_dbi - lf + p.rx_gain_dbi - p.other_losses_db)
}

pub fn cnr_db(p: &LinkBudgetParams, n: &RfNoiseParams, distance_m: f64) -> Result<f64> {
    if p.carrier.is_optical() {
        return Err(Error::ClassMismatch(
            "carrier-to-noise ratio requires an RF carrier".into(),
        ));
    }
    Ok(received_power_dbm(p, distance_m)? - n.noise_power_dbm())
}

/// Visibility, distance threshold, and the class-specific power condition.
/// Boundary equality counts as feasible.
pub fn link_feasible(
    rules: &LinkClassRules,
    p: &LinkBudgetParams,
    noise: Option<&RfNoiseParams>,
    geometry: LinkGeometry,
) -> Result<bool> {
    check_distance(geometry.distance_m)?;
    let power_ok = match rules.link_class {
        LinkClass::Optical => {
            let req = rules.required_rx_power_dbm.ok_or_else(|| {
                Error::MissingParameter("required_rx_power_dbm for optical link".into())
            })?;
            received_power_dbm(p, geometry.distance_m)? >= req
        }
        LinkClass::Rf => {
            let n = noise.ok_or_else(|| {
                Error::MissingParameter("noise parameters for RF link".into())
            })?;
            let req = rules
                .required_cnr_db
                .ok_or_else(|| Error::MissingParameter("required_cnr_db for RF link".into()))?;
            cnr_db(p, n, geometry.distance_m)? >= req
        }
    };
    Ok(geometry.visible && rules.within_distance(geometry.distance_m) && power_ok)
}
