use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative privacy-loss value that may be infinite.
///
/// Serializes as a JSON number, or as the string `"inf"` when infinite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub const ZERO: Epsilon = Epsilon(0.0);
    pub const INFINITY: Epsilon = Epsilon(f64::INFINITY);

    pub fn finite(value: f64) -> Self {
        debug_assert!(value.is_finite(), "use Epsilon::INFINITY for infinite values");
        Epsilon(value)
    }

    pub fn from_f64(value: f64) -> Self {
        Epsilon(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Fixed six-decimal rendering, `inf` for infinity.
    pub fn fmt_fixed(self) -> String {
        if self.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.6}", self.0)
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else if let Some(precision) = f.precision() {
            write!(f, "{:.*}", precision, self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(Epsilon(v)),
            Repr::Str(s) if s == "inf" => Ok(Epsilon::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad epsilon `{s}`"))),
        }
    }
}
