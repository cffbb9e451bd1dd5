//! Exact rational arithmetic for accuracies, gaps, and call-count means.
//! Keeps report numbers exact until display rounding.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs().max(1)
}

/// A reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: i64,
    den: i64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 {
            (-(num as i128), -(den as i128))
        } else {
            (num as i128, den as i128)
        };
        let g = gcd(num, den);
        Ratio {
            num: (num / g) as i64,
            den: (den / g) as i64,
        }
    }

    pub fn from_counts(part: u64, whole: u64) -> Self {
        if whole == 0 {
            return Ratio::ZERO;
        }
        Ratio::new(part as i64, whole as i64)
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn abs(&self) -> Self {
        Ratio {
            num: self.num.abs(),
            den: self.den,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn add(&self, other: Ratio) -> Ratio {
        let num = self.num as i128 * other.den as i128 + other.num as i128 * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        let g = gcd(num, den);
        Ratio {
            num: (num / g) as i64,
            den: (den / g) as i64,
        }
    }

    pub fn sub(&self, other: Ratio) -> Ratio {
        self.add(Ratio {
            num: -other.num,
            den: other.den,
        })
    }

    pub fn scale(&self, factor: i64) -> Ratio {
        Ratio::new(
            (self.num as i128 * factor as i128) as i64,
            self.den,
        )
    }

    pub fn div(&self, divisor: i64) -> Ratio {
        assert!(divisor != 0);
        let num = self.num as i128;
        let den = self.den as i128 * divisor as i128;
        let g = gcd(num, den);
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        Ratio {
            num: (num / g) as i64,
            den: (den / g) as i64,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Value in percent, for table display.
    pub fn percent(&self) -> f64 {
        self.to_f64() * 100.0
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        let left = self.num as i128 * other.den as i128;
        let right = other.num as i128 * self.den as i128;
        left.cmp(&right)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Ratio", 3)?;
        st.serialize_field("num", &self.num)?;
        st.serialize_field("den", &self.den)?;
        st.serialize_field("value", &self.to_f64())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: i64,
            den: i64,
        }
        let raw = Raw::deserialize(d)?;
        if raw.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Ratio::new(raw.num, raw.den))
    }
}
