use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BigReal, DoubleDouble, Real};
use crate::error::Error;

/// Widest software float supported.
pub const MAX_EXTENDED_BITS: u32 = 512;

/// Runtime choice of scalar backend.
///
/// `Extended { mantissa_bits }` is realized by the narrowest available backend
/// that carries at least that many bits: double-double up to 106, then
/// software floats of 128, 256 or 512 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum PrecisionConfig {
    #[default]
    Double,
    Extended { mantissa_bits: u32 },
}

/// A computation to run with whatever backend a [`PrecisionConfig`] selects.
pub trait WithReal {
    type Output;
    fn run<S: Real>(self) -> Self::Output;
}

impl PrecisionConfig {
    pub fn extended(mantissa_bits: u32) -> Result<Self, Error> {
        let p = PrecisionConfig::Extended { mantissa_bits };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            PrecisionConfig::Double => Ok(()),
            PrecisionConfig::Extended { mantissa_bits } if mantissa_bits < 53 => Err(
                Error::UnsupportedPrecision(format!("ext:{mantissa_bits} is below 53 bits")),
            ),
            PrecisionConfig::Extended { mantissa_bits } if mantissa_bits > MAX_EXTENDED_BITS => {
                Err(Error::UnsupportedPrecision(format!(
                    "ext:{mantissa_bits} exceeds the {MAX_EXTENDED_BITS}-bit maximum"
                )))
            }
            PrecisionConfig::Extended { .. } => Ok(()),
        }
    }

    pub fn is_extended(&self) -> bool {
        matches!(self, PrecisionConfig::Extended { .. })
    }

    /// Bits actually carried by the selected backend.
    pub fn effective_bits(&self) -> u32 {
        match *self {
            PrecisionConfig::Double => 53,
            PrecisionConfig::Extended { mantissa_bits: b } if b <= 106 => 106,
            PrecisionConfig::Extended { mantissa_bits: b } if b <= 128 => 128,
            PrecisionConfig::Extended { mantissa_bits: b } if b <= 256 => 256,
            PrecisionConfig::Extended { .. } => 512,
        }
    }

    /// Name of the backend that will run, e.g. `ext:106`.
    pub fn backend_name(&self) -> String {
        match self {
            PrecisionConfig::Double => "double".into(),
            _ => format!("ext:{}", self.effective_bits()),
        }
    }

    pub fn dispatch<W: WithReal>(&self, job: W) -> Result<W::Output, Error> {
        self.validate()?;
        Ok(match self.effective_bits() {
            53 => job.run::<f64>(),
            106 => job.run::<DoubleDouble>(),
            128 => job.run::<BigReal<128>>(),
            256 => job.run::<BigReal<256>>(),
            _ => job.run::<BigReal<512>>(),
        })
    }
}

impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionConfig::Double => f.write_str("double"),
            PrecisionConfig::Extended { mantissa_bits } => write!(f, "ext:{mantissa_bits}"),
        }
    }
}

impl FromStr for PrecisionConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("double") {
            return Ok(PrecisionConfig::Double);
        }
        let bits = s
            .strip_prefix("ext:")
            .and_then(|b| b.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::UnsupportedPrecision(format!("`{s}`: expected `double` or `ext:<bits>`"))
            })?;
        PrecisionConfig::extended(bits)
    }
}

impl TryFrom<String> for PrecisionConfig {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<PrecisionConfig> for String {
    fn from(p: PrecisionConfig) -> String {
        p.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bits;
    impl WithReal for Bits {
        type Output = u32;
        fn run<S: Real>(self) -> u32 {
            S::mantissa_bits()
        }
    }

    #[test]
    fn parses_and_prints() {
        assert_eq!("double".parse::<PrecisionConfig>().unwrap(), PrecisionConfig::Double);
        let p: PrecisionConfig = "ext:200".parse().unwrap();
        assert_eq!(p.to_string(), "ext:200");
        assert_eq!(p.backend_name(), "ext:256");
        assert!("ext:40".parse::<PrecisionConfig>().is_err());
        assert!("ext:1000".parse::<PrecisionConfig>().is_err());
        assert!("quad".parse::<PrecisionConfig>().is_err());
    }

    #[test]
    fn dispatch_rounds_up_to_a_backend() {
        let cases = [(53, 106), (106, 106), (107, 128), (256, 256), (300, 512)];
        for (asked, got) in cases {
            let p = PrecisionConfig::extended(asked).unwrap();
            assert_eq!(p.dispatch(Bits).unwrap(), got);
        }
        assert_eq!(PrecisionConfig::Double.dispatch(Bits).unwrap(), 53);
    }

    #[test]
    fn serde_uses_the_flag_syntax() {
        let p = PrecisionConfig::extended(106).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "\"ext:106\"");
        assert_eq!(serde_json::from_str::<PrecisionConfig>(&s).unwrap(), p);
    }
}
