//! Unit-suffixed scalar parsing for configuration files.
//!
//! Values may be written as bare numbers (taken to be SI) or as strings with
//! a unit suffix, e.g. `"3.2MHz"`, `"56um"`, `"2.3deg"`, `"3.3G"`. The
//! accepted suffixes depend on the physical dimension of the field.
//! Serialization always emits bare SI numbers so a written file re-parses to
//! exactly the same values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Frequency,
    Rate,
    Time,
    Length,
    Speed,
    Angle,
    Field,
    Dimensionless,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Frequency => "frequency",
            Dim::Rate => "rate",
            Dim::Time => "time",
            Dim::Length => "length",
            Dim::Speed => "speed",
            Dim::Angle => "angle",
            Dim::Field => "magnetic field",
            Dim::Dimensionless => "dimensionless number",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (_, "") => 1.0,
            (Dim::Frequency | Dim::Rate, "Hz") => 1.0,
            (Dim::Frequency | Dim::Rate, "kHz") => 1e3,
            (Dim::Frequency | Dim::Rate, "MHz") => 1e6,
            (Dim::Frequency | Dim::Rate, "GHz") => 1e9,
            (Dim::Rate, "/s" | "s^-1" | "1/s" | "counts/s" | "cps") => 1.0,
            (Dim::Rate, "/us" | "/μs") => 1e6,
            (Dim::Time, "s") => 1.0,
            (Dim::Time, "ms") => 1e-3,
            (Dim::Time, "us" | "μs" | "µs") => 1e-6,
            (Dim::Time, "ns") => 1e-9,
            (Dim::Time, "ps") => 1e-12,
            (Dim::Length, "m") => 1.0,
            (Dim::Length, "cm") => 1e-2,
            (Dim::Length, "mm") => 1e-3,
            (Dim::Length, "um" | "μm" | "µm") => 1e-6,
            (Dim::Length, "nm") => 1e-9,
            (Dim::Speed, "m/s") => 1.0,
            (Dim::Speed, "mm/s") => 1e-3,
            (Dim::Speed, "cm/s") => 1e-2,
            (Dim::Angle, "rad") => 1.0,
            (Dim::Angle, "mrad") => 1e-3,
            (Dim::Angle, "urad" | "μrad") => 1e-6,
            (Dim::Angle, "deg") => std::f64::consts::PI / 180.0,
            (Dim::Field, "T") => 1.0,
            (Dim::Field, "mT") => 1e-3,
            (Dim::Field, "G") => 1e-4,
            (Dim::Field, "mG") => 1e-7,
            (Dim::Dimensionless, "%") => 1e-2,
            (Dim::Dimensionless, "ppm") => 1e-6,
            _ => return None,
        };
        Some(s)
    }
}

/// Parses `"<number><unit>"` into an SI value of the given dimension.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && text[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse number in {text:?}")))?;
    let unit = unit.trim();
    let scale = dim
        .scale(unit)
        .ok_or_else(|| Error::Config(format!("unit {unit:?} is not a {} unit", dim.name())))?;
    // Dividing by an exact power of ten keeps "50ns" at exactly 5e-8.
    let inverse = 1.0 / scale;
    if scale < 1.0 && (inverse - inverse.round()).abs() < 1e-9 * inverse {
        Ok(value / inverse.round())
    } else {
        Ok(value * scale)
    }
}

macro_rules! unit_module {
    ($name:ident, $dim:expr) => {
        pub mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(*value)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                super::Raw::deserialize(d)?.into_si($dim).map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum Raw {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Raw {
    fn into_si(self, dim: Dim) -> Result<f64> {
        match self {
            Raw::Float(v) => Ok(v),
            Raw::Int(v) => Ok(v as f64),
            Raw::Text(t) => parse_quantity(&t, dim),
        }
    }
}

unit_module!(frequency, super::Dim::Frequency);
unit_module!(rate, super::Dim::Rate);
unit_module!(time, super::Dim::Time);
unit_module!(length, super::Dim::Length);
unit_module!(speed, super::Dim::Speed);
unit_module!(angle, super::Dim::Angle);
unit_module!(field, super::Dim::Field);
unit_module!(number, super::Dim::Dimensionless);
