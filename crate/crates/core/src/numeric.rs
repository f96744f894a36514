//! Small numerical helpers used across modules.

/// Neumaier-compensated sum. The moment sums and mass-closure dot products
/// mix magnitudes across three decades of cluster sizes; plain summation
/// noise would eat into the 1e-10-level conservation budgets.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Binomial coefficient as f64; exact for the small orders used by the
/// finite-difference operators (k <= ~30).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0f64, |acc, i| acc * i as f64)
}

/// `2^e` for `e` in `[-1022, 1023]`, exact.
fn exp2i(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Floating scalar with an `f64` mantissa and an `i64` exponent.
///
/// The equilibrium tails decay geometrically and drop through the bottom of
/// the `f64` exponent range within a couple thousand terms; carrying the
/// recursion's sequential accumulators in this type keeps them meaningful
/// (same ~1e-16 relative rounding per operation as `f64`, no underflow).
#[derive(Debug, Clone, Copy)]
pub struct WideFloat {
    /// Normalized to `±[1, 2)`, or exactly 0.0.
    mant: f64,
    exp: i64,
}

impl WideFloat {
    pub const ZERO: Self = Self { mant: 0.0, exp: 0 };

    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite());
        Self { mant: v, exp: 0 }.normalized()
    }

    fn normalized(mut self) -> Self {
        if self.mant == 0.0 {
            return Self::ZERO;
        }
        let bits = self.mant.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        if biased == 0 {
            // subnormal mantissa: rescale into the normal range and retry
            self.mant *= exp2i(200);
            self.exp -= 200;
            return self.normalized();
        }
        let mant = f64::from_bits((bits & 0x800F_FFFF_FFFF_FFFF) | (1023u64 << 52));
        Self {
            mant,
            exp: self.exp + biased - 1023,
        }
    }

    /// Conversion back to `f64`; values outside the representable range
    /// flush to 0 or `±inf`.
    pub fn to_f64(self) -> f64 {
        if self.mant == 0.0 {
            return 0.0;
        }
        if self.exp > 1023 {
            return f64::INFINITY.copysign(self.mant);
        }
        if self.exp < -1100 {
            return 0.0;
        }
        if self.exp >= -1021 {
            self.mant * exp2i(self.exp)
        } else {
            // land in the subnormal range via two in-range factors
            (self.mant * exp2i(-1000)) * exp2i(self.exp + 1000)
        }
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn is_negative(self) -> bool {
        self.mant < 0.0
    }

    /// `log10(|x|)`; `-inf` for zero.
    pub fn log10_abs(self) -> f64 {
        if self.mant == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.mant.abs().log10() + self.exp as f64 * std::f64::consts::LN_2 / std::f64::consts::LN_10
    }

    pub fn mul_f64(self, v: f64) -> Self {
        self * Self::from_f64(v)
    }

    pub fn div_f64(self, v: f64) -> Self {
        assert!(v.is_finite() && v != 0.0);
        let d = Self::from_f64(v);
        Self {
            mant: self.mant / d.mant,
            exp: self.exp - d.exp,
        }
        .normalized()
    }
}

impl std::ops::Neg for WideFloat {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl std::ops::Add for WideFloat {
    type Output = Self;
    fn add(self, other: Self) -> Self {
        if self.mant == 0.0 {
            return other;
        }
        if other.mant == 0.0 {
            return self;
        }
        let (hi, lo) = if self.exp >= other.exp {
            (self, other)
        } else {
            (other, self)
        };
        let d = hi.exp - lo.exp;
        if d > 60 {
            return hi;
        }
        Self {
            mant: hi.mant + lo.mant * exp2i(-d),
            exp: hi.exp,
        }
        .normalized()
    }
}

impl std::ops::Sub for WideFloat {
    type Output = Self;
    fn sub(self, other: Self) -> Self {
        self + (-other)
    }
}

impl std::ops::Mul for WideFloat {
    type Output = Self;
    fn mul(self, other: Self) -> Self {
        Self {
            mant: self.mant * other.mant,
            exp: self.exp + other.exp,
        }
        .normalized()
    }
}

impl PartialEq for WideFloat {
    fn eq(&self, other: &Self) -> bool {
        self.mant == other.mant && (self.mant == 0.0 || self.exp == other.exp)
    }
}

impl PartialOrd for WideFloat {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let diff = *self - *other;
        diff.mant.partial_cmp(&0.0)
    }
}
