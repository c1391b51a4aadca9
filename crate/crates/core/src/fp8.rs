//! Bit-exact software emulation of 8-bit floating-point formats.
//!
//! Two formats are provided:
//!
//! - **E4M3**: 1 sign + 4 exponent + 3 mantissa bits, bias 7, no infinities.
//!   The all-ones exponent is an ordinary binade except for the all-ones
//!   mantissa, which is NaN. Largest finite value: 448.
//! - **E5M2**: 1 sign + 5 exponent + 2 mantissa bits, bias 15, IEEE-like.
//!   Exponent all-ones encodes infinity (mantissa 0) and NaN (otherwise).
//!   Largest finite value: 57344.
//!
//! Encoding rounds to nearest-even over the format's full value set,
//! including subnormals. Overflow follows IEEE conversion semantics: a
//! magnitude rounds to the largest finite value as long as it lies below the
//! midpoint to the next (non-representable) lattice step; beyond that it
//! either saturates to the largest finite value or maps to the NaN encoding,
//! chosen by the caller.

use serde::{Deserialize, Serialize};

/// Descriptor of an 8-bit floating-point format (1 sign bit implied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fp8Format {
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
    pub exponent_bias: i32,
    pub max_finite: f64,
    pub has_infinity: bool,
}

/// E4M3: bias 7, no infinities, max finite 448.
pub const E4M3: Fp8Format = Fp8Format {
    exponent_bits: 4,
    mantissa_bits: 3,
    exponent_bias: 7,
    max_finite: 448.0,
    has_infinity: false,
};

/// E5M2: bias 15, IEEE-like specials, max finite 57344.
pub const E5M2: Fp8Format = Fp8Format {
    exponent_bits: 5,
    mantissa_bits: 2,
    exponent_bias: 15,
    max_finite: 57344.0,
    has_infinity: true,
};

impl Fp8Format {
    /// Looks a format up by its config-file identifier.
    pub fn from_name(name: &str) -> Option<Fp8Format> {
        match name {
            "e4m3" => Some(E4M3),
            "e5m2" => Some(E5M2),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        if self.exponent_bits == 4 {
            "e4m3"
        } else {
            "e5m2"
        }
    }

    #[inline]
    fn exp_mask(&self) -> u8 {
        ((1u16 << self.exponent_bits) - 1) as u8
    }

    #[inline]
    fn man_mask(&self) -> u8 {
        ((1u16 << self.mantissa_bits) - 1) as u8
    }

    /// Canonical NaN encoding (positive sign).
    pub fn nan_code(&self) -> u8 {
        (self.exp_mask() << self.mantissa_bits) | self.man_mask()
    }

    /// Code of the largest finite value (positive sign).
    pub fn max_finite_code(&self) -> u8 {
        if self.has_infinity {
            // largest exponent below the specials binade, mantissa all ones
            ((self.exp_mask() - 1) << self.mantissa_bits) | self.man_mask()
        } else {
            // all-ones exponent, mantissa one below NaN
            (self.exp_mask() << self.mantissa_bits) | (self.man_mask() - 1)
        }
    }

    /// Smallest positive normal exponent value, `2^(1 - bias)`.
    fn min_normal_exp(&self) -> i32 {
        1 - self.exponent_bias
    }

    /// Overflow threshold under round-to-nearest-even: the midpoint between
    /// `max_finite` and the next step of the (unbounded-exponent) lattice.
    fn overflow_threshold(&self) -> f64 {
        let ulp = self.max_finite_ulp();
        self.max_finite + ulp / 2.0
    }

    fn max_finite_ulp(&self) -> f64 {
        // max_finite = (2 - 2^-m) * 2^e  =>  ulp in that binade is 2^(e - m)
        let e = self.max_finite.log2().floor() as i32;
        exp2(e - self.mantissa_bits as i32)
    }

    /// True when `code` is one of the format's NaN encodings.
    pub fn is_nan_code(&self, code: u8) -> bool {
        let exp = (code >> self.mantissa_bits) & self.exp_mask();
        let man = code & self.man_mask();
        if self.has_infinity {
            exp == self.exp_mask() && man != 0
        } else {
            exp == self.exp_mask() && man == self.man_mask()
        }
    }

    /// True when `code` encodes an infinity (always false for E4M3-style formats).
    pub fn is_inf_code(&self, code: u8) -> bool {
        self.has_infinity
            && (code >> self.mantissa_bits) & self.exp_mask() == self.exp_mask()
            && code & self.man_mask() == 0
    }
}

#[inline]
fn exp2(e: i32) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Decodes an 8-bit code to its exact real value.
///
/// Total over all 256 codes; NaN encodings decode to NaN, and for formats
/// with infinities the infinity codes decode to `±inf`.
pub fn decode(code: u8, format: &Fp8Format) -> f64 {
    let m = format.mantissa_bits;
    let sign = if code & 0x80 != 0 { -1.0 } else { 1.0 };
    let exp_field = (code >> m) & format.exp_mask();
    let man_field = code & format.man_mask();

    if exp_field == format.exp_mask() {
        if format.has_infinity {
            if man_field == 0 {
                return sign * f64::INFINITY;
            }
            return f64::NAN.copysign(sign);
        }
        if man_field == format.man_mask() {
            return f64::NAN.copysign(sign);
        }
        // fall through: ordinary value in the top binade
    }

    let frac = man_field as f64 / (1u64 << m) as f64;
    if exp_field == 0 {
        // subnormal: 0.man * 2^(1 - bias)
        sign * frac * exp2(format.min_normal_exp())
    } else {
        sign * (1.0 + frac) * exp2(exp_field as i32 - format.exponent_bias)
    }
}

/// Encodes a real value to the nearest representable 8-bit code
/// (round-to-nearest-even).
///
/// Overflowing magnitudes saturate to `±max_finite` when `saturate` is set
/// and map to the NaN encoding otherwise. Infinite inputs encode to the
/// format's infinity when it has one, else they follow the overflow rule.
/// NaN maps to the canonical NaN encoding (sign preserved).
pub fn encode(value: f64, format: &Fp8Format, saturate: bool) -> u8 {
    let sign_bit = if value.is_sign_negative() { 0x80u8 } else { 0 };
    let m = format.mantissa_bits;

    if value.is_nan() {
        return sign_bit | format.nan_code();
    }
    if value.is_infinite() {
        if format.has_infinity {
            return sign_bit | (format.exp_mask() << m);
        }
        return if saturate {
            sign_bit | format.max_finite_code()
        } else {
            sign_bit | format.nan_code()
        };
    }

    let mag = value.abs();
    if mag == 0.0 {
        return sign_bit;
    }
    if mag >= format.overflow_threshold() {
        return if saturate {
            sign_bit | format.max_finite_code()
        } else {
            sign_bit | format.nan_code()
        };
    }

    let min_exp = format.min_normal_exp();
    // binade exponent straight from the f64 bits; log2+floor can misround at
    // binade boundaries
    let biased = (mag.to_bits() >> 52) as i32;
    let e = if biased == 0 { -1023 } else { biased - 1023 };

    if e < min_exp {
        // subnormal range: round mag / 2^(min_exp - m) to an integer
        let step = exp2(min_exp - m as i32);
        let q = round_half_even(mag / step);
        if q >= (1u64 << m) as f64 {
            // rolled over into the first normal binade
            return sign_bit | (1u8 << m);
        }
        return sign_bit | q as u8;
    }

    // normal range: mag in [2^e, 2^(e+1)), significand in [2^m, 2^(m+1)]
    let step = exp2(e - m as i32);
    let mut q = round_half_even(mag / step) as u64;
    let mut exp_field = (e + format.exponent_bias) as u8;
    if q == 1u64 << (m + 1) {
        // rounding crossed into the next binade
        q = 1u64 << m;
        exp_field += 1;
    }
    let man_field = (q - (1u64 << m)) as u8;
    let code = sign_bit | (exp_field << m) | man_field;

    debug_assert!(
        !format.is_nan_code(code) && !format.is_inf_code(code),
        "in-range value {value} must not encode to a special code"
    );
    code
}

/// Round half to even; exact for the small ratios used by `encode`.
#[inline]
fn round_half_even(x: f64) -> f64 {
    let f = x.floor();
    let d = x - f;
    if d > 0.5 {
        f + 1.0
    } else if d < 0.5 {
        f
    } else if (f as i64) % 2 == 0 {
        f
    } else {
        f + 1.0
    }
}

/// Enumerates every finite value of the format (deduplicated, ascending).
pub fn finite_values(format: &Fp8Format) -> Vec<f64> {
    let mut vals: Vec<f64> = (0u16..=255)
        .map(|c| decode(c as u8, format))
        .filter(|v| v.is_finite())
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals
}
