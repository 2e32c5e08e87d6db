//! Canonical physical quantities and unit conversion.
//!
//! Everything downstream works in watts and joules. Other units (µJ, mW,
//! kWh, ...) exist only at the boundary: file headers, CLI flags, and
//! rendered reports. Parsers normalize on ingest via [`convert`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instantaneous or average power in watts. Finite and non-negative.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Power(f64);

impl Power {
    pub fn from_watts(watts: f64) -> Result<Self> {
        if !watts.is_finite() {
            return Err(Error::InvalidInput(format!("power must be finite, got {watts}")));
        }
        if watts < 0.0 {
            return Err(Error::InvalidInput(format!("power must be >= 0 W, got {watts}")));
        }
        Ok(Power(watts))
    }

    pub fn watts(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Power {
    type Error = Error;
    fn try_from(watts: f64) -> Result<Self> {
        Power::from_watts(watts)
    }
}

impl From<Power> for f64 {
    fn from(p: Power) -> f64 {
        p.0
    }
}

/// Energy in joules. Finite and non-negative.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Energy(f64);

impl Energy {
    pub fn from_joules(joules: f64) -> Result<Self> {
        if !joules.is_finite() {
            return Err(Error::InvalidInput(format!("energy must be finite, got {joules}")));
        }
        if joules < 0.0 {
            return Err(Error::InvalidInput(format!("energy must be >= 0 J, got {joules}")));
        }
        Ok(Energy(joules))
    }

    pub fn joules(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Energy {
    type Error = Error;
    fn try_from(joules: f64) -> Result<Self> {
        Energy::from_joules(joules)
    }
}

impl From<Energy> for f64 {
    fn from(e: Energy) -> f64 {
        e.0
    }
}

/// Joules per watt-hour. Exact by definition.
pub const JOULES_PER_WATT_HOUR: f64 = 3600.0;

/// Joules per kilowatt-hour. Exact by definition.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Power-of-ten magnitude prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Micro,
    Milli,
    Unit,
    Kilo,
    Mega,
}

impl Magnitude {
    pub fn factor(self) -> f64 {
        match self {
            Magnitude::Micro => 1e-6,
            Magnitude::Milli => 1e-3,
            Magnitude::Unit => 1.0,
            Magnitude::Kilo => 1e3,
            Magnitude::Mega => 1e6,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Magnitude::Micro => "u",
            Magnitude::Milli => "m",
            Magnitude::Unit => "",
            Magnitude::Kilo => "k",
            Magnitude::Mega => "M",
        }
    }
}

/// The three base units in play: the power/energy/time triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseUnit {
    Watt,
    Joule,
    WattHour,
}

impl BaseUnit {
    pub fn dimension(self) -> Dimension {
        match self {
            BaseUnit::Watt => Dimension::Power,
            BaseUnit::Joule | BaseUnit::WattHour => Dimension::Energy,
        }
    }

    /// Multiplier to the canonical unit of the dimension (W or J).
    fn canonical_factor(self) -> f64 {
        match self {
            BaseUnit::Watt | BaseUnit::Joule => 1.0,
            BaseUnit::WattHour => JOULES_PER_WATT_HOUR,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BaseUnit::Watt => "W",
            BaseUnit::Joule => "J",
            BaseUnit::WattHour => "Wh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Power,
    Energy,
}

/// A scaled unit such as `mW` or `kWh`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitScale {
    pub magnitude: Magnitude,
    pub base: BaseUnit,
}

/// Unit symbols accepted in file headers and CLI flags. Case-sensitive;
/// `u` denotes micro.
pub const ACCEPTED_SYMBOLS: [&str; 12] = [
    "uJ", "mJ", "J", "kJ", "MJ", "Wh", "kWh", "uW", "mW", "W", "kW", "MW",
];

impl UnitScale {
    pub const fn new(magnitude: Magnitude, base: BaseUnit) -> Self {
        UnitScale { magnitude, base }
    }

    pub const WATTS: UnitScale = UnitScale::new(Magnitude::Unit, BaseUnit::Watt);
    pub const JOULES: UnitScale = UnitScale::new(Magnitude::Unit, BaseUnit::Joule);
    pub const MICROJOULES: UnitScale = UnitScale::new(Magnitude::Micro, BaseUnit::Joule);
    pub const KILOWATT_HOURS: UnitScale = UnitScale::new(Magnitude::Kilo, BaseUnit::WattHour);

    pub fn dimension(&self) -> Dimension {
        self.base.dimension()
    }

    /// Multiplier taking a value in this unit to the canonical unit (W or J).
    pub fn to_canonical_factor(&self) -> f64 {
        self.magnitude.factor() * self.base.canonical_factor()
    }

    /// Parse one of the accepted unit symbols.
    pub fn parse_symbol(symbol: &str) -> Result<Self> {
        use BaseUnit::*;
        use Magnitude::*;
        let scale = match symbol {
            "uJ" => UnitScale::new(Micro, Joule),
            "mJ" => UnitScale::new(Milli, Joule),
            "J" => UnitScale::new(Unit, Joule),
            "kJ" => UnitScale::new(Kilo, Joule),
            "MJ" => UnitScale::new(Mega, Joule),
            "Wh" => UnitScale::new(Unit, WattHour),
            "kWh" => UnitScale::new(Kilo, WattHour),
            "uW" => UnitScale::new(Micro, Watt),
            "mW" => UnitScale::new(Milli, Watt),
            "W" => UnitScale::new(Unit, Watt),
            "kW" => UnitScale::new(Kilo, Watt),
            "MW" => UnitScale::new(Mega, Watt),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown unit symbol {other:?}; accepted: {}",
                    ACCEPTED_SYMBOLS.join(", ")
                )))
            }
        };
        Ok(scale)
    }

    pub fn symbol(&self) -> String {
        format!("{}{}", self.magnitude.prefix(), self.base.symbol())
    }
}

impl std::fmt::Display for UnitScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl std::str::FromStr for UnitScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        UnitScale::parse_symbol(s)
    }
}

/// Convert a value between two unit scales of the same dimension.
///
/// The conversion is a single multiplication, so round-tripping a→b→a
/// reproduces the input up to representation precision.
pub fn convert(value: f64, from: UnitScale, to: UnitScale) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::DimensionMismatch {
            from: from.symbol(),
            to: to.symbol(),
        });
    }
    Ok(value * (from.to_canonical_factor() / to.to_canonical_factor()))
}

/// Energy of a constant power draw held for `duration_s` seconds.
pub fn energy_from_constant_power(power: Power, duration_s: f64) -> Result<Energy> {
    if !duration_s.is_finite() || duration_s < 0.0 {
        return Err(Error::InvalidInput(format!(
            "duration must be >= 0 s, got {duration_s}"
        )));
    }
    Energy::from_joules(power.watts() * duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn microjoules_to_joules() {
        let j = convert(1_000_000.0, UnitScale::MICROJOULES, UnitScale::JOULES).unwrap();
        assert_eq!(j, 1.0);
    }

    #[test]
    fn watt_hours_to_joules() {
        let wh = UnitScale::new(Magnitude::Unit, BaseUnit::WattHour);
        assert_eq!(convert(1.0, wh, UnitScale::JOULES).unwrap(), 3600.0);
    }

    #[test]
    fn milliwatts_to_watts() {
        let mw = UnitScale::parse_symbol("mW").unwrap();
        assert_eq!(convert(2500.0, mw, UnitScale::WATTS).unwrap(), 2.5);
    }

    #[test]
    fn kwh_to_joules() {
        assert_eq!(
            convert(1.0, UnitScale::KILOWATT_HOURS, UnitScale::JOULES).unwrap(),
            3.6e6
        );
    }

    #[test]
    fn power_to_energy_is_a_dimension_error() {
        let err = convert(1.0, UnitScale::WATTS, UnitScale::JOULES).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn all_accepted_symbols_parse_and_roundtrip() {
        for sym in ACCEPTED_SYMBOLS {
            let scale = UnitScale::parse_symbol(sym).unwrap();
            assert_eq!(scale.symbol(), sym);
        }
        assert!(UnitScale::parse_symbol("wH").is_err());
        assert!(UnitScale::parse_symbol("UJ").is_err());
    }

    #[test]
    fn constant_power_energy() {
        let p = Power::from_watts(100.0).unwrap();
        assert_eq!(energy_from_constant_power(p, 60.0).unwrap().joules(), 6000.0);

        let zero = Power::from_watts(0.0).unwrap();
        assert_eq!(energy_from_constant_power(zero, 1e6).unwrap().joules(), 0.0);

        // cpu1 idle draw held for an hour
        let idle = Power::from_watts(220.0).unwrap();
        assert_eq!(
            energy_from_constant_power(idle, 3600.0).unwrap().joules(),
            792_000.0
        );
    }

    #[test]
    fn negative_duration_rejected() {
        let p = Power::from_watts(1.0).unwrap();
        assert!(energy_from_constant_power(p, -1.0).is_err());
    }

    #[test]
    fn invalid_quantities_rejected() {
        assert!(Power::from_watts(-1.0).is_err());
        assert!(Power::from_watts(f64::NAN).is_err());
        assert!(Energy::from_joules(f64::INFINITY).is_err());
        let bad: std::result::Result<Power, _> = serde_json::from_str("-3.0");
        assert!(bad.is_err());
    }

    fn any_scale() -> impl Strategy<Value = UnitScale> {
        let mag = prop_oneof![
            Just(Magnitude::Micro),
            Just(Magnitude::Milli),
            Just(Magnitude::Unit),
            Just(Magnitude::Kilo),
            Just(Magnitude::Mega),
        ];
        let base = prop_oneof![
            Just(BaseUnit::Watt),
            Just(BaseUnit::Joule),
            Just(BaseUnit::WattHour),
        ];
        (mag, base).prop_map(|(magnitude, base)| UnitScale { magnitude, base })
    }

    proptest! {
        #[test]
        fn conversion_round_trips(value in 1e-6f64..1e9, a in any_scale(), b in any_scale()) {
            prop_assume!(a.dimension() == b.dimension());
            let there = convert(value, a, b).unwrap();
            let back = convert(there, b, a).unwrap();
            prop_assert!(rel_err(back, value) <= 1e-12);
        }

        #[test]
        fn conversion_composes(
            value in 1e-6f64..1e9,
            a in any_scale(),
            b in any_scale(),
            c in any_scale(),
        ) {
            prop_assume!(a.dimension() == b.dimension() && b.dimension() == c.dimension());
            let via_b = convert(convert(value, a, b).unwrap(), b, c).unwrap();
            let direct = convert(value, a, c).unwrap();
            prop_assert!(rel_err(via_b, direct) <= 1e-12);
        }
    }
}
