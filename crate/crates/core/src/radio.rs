//! Field geometry and the first-order radio energy model.
//!
//! Transmitting `k` bits over `d` meters costs `e_elec·k + eps_fs·k·d²` below the
//! crossover distance `d0` and `e_elec·k + eps_mp·k·d⁴` at or beyond it. Receiving
//! costs `e_elec·k`; fusing costs `e_da·k` per signal.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("coordinate ({x}, {y}) is not finite")]
    NotFinite { x: f64, y: f64 },
    #[error("coordinate ({x}, {y}) lies outside the {width} x {height} m field")]
    OutOfField { x: f64, y: f64, width: f64, height: f64 },
}

/// A point on the deployment field, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Builds a position and checks it against the field bounds.
    pub fn within_field(x: f64, y: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NotFinite { x, y });
        }
        if !(0.0..=width).contains(&x) || !(0.0..=height).contains(&y) {
            return Err(GeometryError::OutOfField { x, y, width, height });
        }
        Ok(Self { x, y })
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Radio dissipation constants. The crossover distance is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Electronics energy per bit, TX and RX (J/bit).
    pub e_elec: f64,
    /// Free-space amplifier coefficient (J/bit/m²).
    pub eps_fs: f64,
    /// Multipath amplifier coefficient (J/bit/m⁴).
    pub eps_mp: f64,
    /// Data aggregation energy (J/bit/signal).
    pub e_da: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { e_elec: 50e-9, eps_fs: 10e-12, eps_mp: 0.0013e-12, e_da: 5e-9 }
    }
}

impl EnergyModel {
    /// Crossover distance between the d² and d⁴ amplifier regimes.
    pub fn d0(&self) -> f64 {
        (self.eps_fs / self.eps_mp).sqrt()
    }

    /// Returns the name of the first non-positive (or non-finite) coefficient.
    pub fn invalid_coefficient(&self) -> Option<&'static str> {
        [("e_elec", self.e_elec), ("eps_fs", self.eps_fs), ("eps_mp", self.eps_mp), ("e_da", self.e_da)]
            .into_iter()
            .find(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(name, _)| name)
    }

    pub fn tx_energy(&self, bits: u64, dist: f64) -> f64 {
        let k = bits as f64;
        if dist < self.d0() {
            self.e_elec * k + self.eps_fs * k * dist * dist
        } else {
            self.e_elec * k + self.eps_mp * k * dist.powi(4)
        }
    }

    pub fn rx_energy(&self, bits: u64) -> f64 {
        self.e_elec * bits as f64
    }

    /// Fusion cost for `signals` packets of `bits` each (members plus the CH's own).
    pub fn aggregation_energy(&self, bits: u64, signals: u64) -> f64 {
        self.e_da * bits as f64 * signals as f64
    }
}
