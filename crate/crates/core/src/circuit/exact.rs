//! Order-independent exact summation of `f64` values.
//!
//! Every finite double is an integer multiple of 2^-1074, so a sum of doubles
//! is an integer in that unit. [`ExactSum`] keeps it in a fixed-point
//! accumulator of 32-bit digits held in `i64` limbs (the headroom absorbs
//! carries lazily) and rounds once, to nearest-even, when read. The result
//! therefore does not depend on the order of the terms, and a sum whose true
//! value is zero reads back as exactly zero.

/// Weight of limb 0 is 2^LIMB_BASE; a multiple of 32 below the smallest subnormal.
const LIMB_BASE: i32 = -1088;
const LIMBS: usize = 68;
/// Additions between carry normalizations; each adds < 2^32 to a limb.
const MAX_PENDING: u32 = 1 << 30;

#[derive(Clone)]
pub struct ExactSum {
    limbs: [i64; LIMBS],
    pending: u32,
    /// Sum of non-finite terms, which are kept out of the fixed-point part.
    special: f64,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("ExactSum").field(&self.value()).finish()
    }
}

impl ExactSum {
    pub const fn new() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
            special: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        if !x.is_finite() {
            self.special += x;
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let exp_bits = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        let pos = (exponent - LIMB_BASE) as usize;
        let (k, shift) = (pos / 32, pos % 32);
        let wide = (mantissa as u128) << shift;
        for (i, limb) in self.limbs[k..k + 3].iter_mut().enumerate() {
            let digit = ((wide >> (32 * i)) & 0xffff_ffff) as i64;
            if negative {
                *limb -= digit;
            } else {
                *limb += digit;
            }
        }
        self.pending += 1;
        if self.pending >= MAX_PENDING {
            normalize(&mut self.limbs);
            self.pending = 0;
        }
    }

    /// Adds every term of another accumulator.
    pub fn absorb(&mut self, other: &ExactSum) {
        if self.pending.saturating_add(other.pending) >= MAX_PENDING {
            normalize(&mut self.limbs);
            self.pending = 0;
        }
        let mut other_limbs = other.limbs;
        if other.pending >= MAX_PENDING / 2 {
            normalize(&mut other_limbs);
        }
        for (a, b) in self.limbs.iter_mut().zip(other_limbs.iter()) {
            *a += *b;
        }
        self.pending += other.pending.min(MAX_PENDING / 2) + 1;
        self.special += other.special;
    }

    /// The exact sum rounded to nearest-even. Results in the subnormal range
    /// may be off by one rounding step.
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let mut limbs = self.limbs;
        normalize(&mut limbs);
        let negative = limbs[LIMBS - 1] < 0;
        if negative {
            for l in limbs.iter_mut() {
                *l = -*l;
            }
            normalize(&mut limbs);
        }
        let Some(top) = limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        let lo = top.saturating_sub(2);
        let mut v: u128 = 0;
        for k in (lo..=top).rev() {
            v = (v << 32) | limbs[k] as u128;
        }
        if limbs[..lo].iter().any(|&l| l != 0) {
            v |= 1;
        }
        let magnitude = scale_by_pow2(v as f64, 32 * lo as i32 + LIMB_BASE);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Brings limbs 0..LIMBS-1 into [0, 2^32); the top limb keeps the sign.
fn normalize(limbs: &mut [i64; LIMBS]) {
    for k in 0..LIMBS - 1 {
        let carry = limbs[k] >> 32;
        limbs[k] -= carry << 32;
        limbs[k + 1] += carry;
    }
}

fn scale_by_pow2(x: f64, mut e: i32) -> f64 {
    let mut out = x;
    while e < -1000 {
        out *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        out *= 2f64.powi(1000);
        e -= 1000;
    }
    out * 2f64.powi(e)
}

/// Exact sum of a slice, rounded once.
pub fn exact_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<ExactSum>().value()
}
