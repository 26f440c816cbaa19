//! Small value types shared by several modules.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A level in decibels that may be unbounded.
///
/// Noise-free signals have an infinite SNR/SINAD; that case is carried as an
/// explicit variant so no arithmetic ever produces or consumes `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decibels {
    Finite(f64),
    #[serde(with = "infinite_tag")]
    Infinite,
}

impl Decibels {
    /// Converts a linear power ratio; a zero denominator maps to [`Decibels::Infinite`].
    pub fn from_power_ratio(num: f64, den: f64) -> Self {
        if den <= 0.0 || !(num / den).is_finite() {
            Decibels::Infinite
        } else {
            Decibels::Finite(10.0 * (num / den).log10())
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Decibels::Finite(v) => Some(v),
            Decibels::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Decibels::Infinite)
    }

    /// Linear power ratio 10^(dB/10); `None` when unbounded.
    pub fn power_ratio(self) -> Option<f64> {
        self.finite().map(|db| 10f64.powf(db / 10.0))
    }
}

impl fmt::Display for Decibels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decibels::Finite(v) => write!(f, "{v:.2} dB"),
            Decibels::Infinite => f.write_str("inf dB"),
        }
    }
}

impl std::str::FromStr for Decibels {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("none") {
            return Ok(Decibels::Infinite);
        }
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Decibels::Finite)
            .ok_or_else(|| format!("not a decibel value: {s:?}"))
    }
}

mod infinite_tag {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = ();
            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("the string \"inf\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<(), E> {
                if v.eq_ignore_ascii_case("inf") {
                    Ok(())
                } else {
                    Err(E::custom(format!("expected \"inf\", got {v:?}")))
                }
            }
        }
        d.deserialize_str(V)
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}
