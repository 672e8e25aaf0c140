//! Binary floating-point reals of explicit precision, plus the constants
//! (ζ(n), Li_s, ln 2, γ, π) the rest of the crate is built on.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::{bernoulli, Rational};
use crate::Error;

/// log2(10)
pub const LOG2_10: f64 = 3.321_928_094_887_362;
/// Guard digits added on top of every requested decimal precision.
pub const GUARD_DIGITS: u32 = 15;

/// Bits needed to resolve `digits` decimal digits (plus a small cushion).
pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + 8
}

/// Arbitrary-precision real `man * 2^exp` carrying at most `prec` significant bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HPReal {
    man: BigInt,
    exp: i64,
    prec: u32,
}

fn bitlen(x: &BigInt) -> i64 {
    x.bits() as i64
}

// round-half-away shift right by n > 0
fn shr_round(x: &BigInt, n: u64) -> BigInt {
    if n == 0 {
        return x.clone();
    }
    let neg = x.is_negative();
    let mut a = x.abs();
    a += BigInt::one() << (n - 1);
    a >>= n;
    if neg {
        -a
    } else {
        a
    }
}

impl HPReal {
    pub fn zero(prec: u32) -> Self {
        HPReal { man: BigInt::zero(), exp: 0, prec }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_i64(1, prec)
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        Self::from_parts(BigInt::from(v), 0, prec)
    }

    pub fn from_bigint(v: BigInt, prec: u32) -> Self {
        Self::from_parts(v, 0, prec)
    }

    /// `man * 2^exp`, rounded to `prec` bits.
    pub fn from_parts(man: BigInt, exp: i64, prec: u32) -> Self {
        let mut r = HPReal { man, exp, prec };
        r.normalize();
        r
    }

    /// Nearest representable value to an exact rational.
    pub fn from_rational(r: &Rational, prec: u32) -> Self {
        Self::from_ratio(r.numer(), r.denom(), prec)
    }

    pub fn from_ratio(num: &BigInt, den: &BigInt, prec: u32) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::zero(prec);
        }
        // enough quotient bits that the final rounding is to nearest
        let shift = (prec as i64 + 2 + bitlen(den) - bitlen(num)).max(0) as u64;
        let n = num.abs() << shift;
        let d = den.abs();
        let (q, rem): (BigInt, BigInt) = n.div_rem(&d);
        // sticky bit keeps the round-to-nearest honest
        let mut q: BigInt = q << 1usize;
        if !rem.is_zero() {
            q += 1;
        }
        let neg = num.is_negative() != den.is_negative();
        let q = if neg { -q } else { q };
        Self::from_parts(q, -(shift as i64) - 1, prec)
    }

    pub fn from_f64(v: f64, prec: u32) -> Self {
        if v == 0.0 {
            return Self::zero(prec);
        }
        let bits = v.to_bits();
        let sign = if (bits >> 63) == 1 { -1 } else { 1 };
        let e = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, ex) = if e == 0 { (frac, -1074) } else { (frac | (1u64 << 52), e - 1075) };
        Self::from_parts(BigInt::from(m) * sign, ex, prec)
    }

    fn normalize(&mut self) {
        if self.man.is_zero() {
            self.exp = 0;
            return;
        }
        let excess = bitlen(&self.man) - self.prec as i64;
        if excess > 0 {
            self.man = shr_round(&self.man, excess as u64);
            self.exp += excess;
            // rounding may carry into a new bit
            if bitlen(&self.man) > self.prec as i64 {
                self.man >>= 1u32;
                self.exp += 1;
            }
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Same value, re-rounded to a new precision.
    pub fn with_prec(&self, prec: u32) -> Self {
        Self::from_parts(self.man.clone(), self.exp, prec)
    }

    pub fn is_zero(&self) -> bool {
        self.man.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.man.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.man.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        HPReal { man: self.man.abs(), exp: self.exp, prec: self.prec }
    }

    /// floor(log2 |x|) + 1; i64::MIN for zero.
    pub fn top(&self) -> i64 {
        if self.man.is_zero() {
            i64::MIN
        } else {
            self.exp + bitlen(&self.man)
        }
    }

    /// Exponent of one unit in the last place.
    pub fn ulp_exp(&self) -> i64 {
        if self.is_zero() {
            i64::MIN / 2
        } else {
            self.top() - self.prec as i64
        }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        HPReal { man: self.man.clone(), exp: self.exp + k, prec: self.prec }
    }

    /// Exact ordering of the two values.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let sa = self.signum();
        let sb = other.signum();
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let (ta, tb) = (self.top(), other.top());
        if ta != tb {
            let mag = ta.cmp(&tb);
            return if sa > 0 { mag } else { mag.reverse() };
        }
        let e = self.exp.min(other.exp);
        let a = &self.man << (self.exp - e) as u64;
        let b = &other.man << (other.exp - e) as u64;
        a.cmp(&b)
    }

    pub fn max_abs<'a>(a: &'a Self, b: &'a Self) -> &'a Self {
        if a.abs().cmp_value(&b.abs()) == Ordering::Less {
            b
        } else {
            a
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = bitlen(&self.man);
        let (m, e) = if n > 60 {
            (&self.man >> (n - 60) as u64, self.exp + n - 60)
        } else {
            (self.man.clone(), self.exp)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        if e > 2000 {
            return m.signum() * f64::INFINITY;
        }
        if e < -2000 {
            return 0.0;
        }
        m * 2f64.powi(e as i32)
    }

    /// log10 |x| as an f64 estimate (-inf for zero); works far outside the f64 range.
    pub fn log10_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let n = bitlen(&self.man);
        let take = n.min(60);
        let m = (self.man.abs() >> (n - take) as u64).to_f64().unwrap();
        m.log10() + (self.exp + n - take) as f64 * std::f64::consts::LOG10_2
    }

    /// Nearest integer (ties away from zero).
    pub fn round_to_bigint(&self) -> BigInt {
        if self.exp >= 0 {
            &self.man << self.exp as u64
        } else {
            shr_round(&self.man, (-self.exp) as u64)
        }
    }

    pub fn floor_to_bigint(&self) -> BigInt {
        if self.exp >= 0 {
            &self.man << self.exp as u64
        } else {
            // BigInt >> rounds toward -inf
            &self.man >> (-self.exp) as u64
        }
    }

    /// Exact value as a rational.
    pub fn to_rational(&self) -> Rational {
        if self.exp >= 0 {
            Rational::from_integer(&self.man << self.exp as u64)
        } else {
            Rational::new(self.man.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut r = Self::one(self.prec);
        let mut b = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                r = &r * &b;
            }
            n >>= 1;
            if n > 0 {
                b = &b * &b;
            }
        }
        r
    }

    pub fn recip(&self) -> Self {
        &Self::one(self.prec) / self
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        Self::from_parts(&self.man * k, self.exp, self.prec)
    }

    pub fn div_i64(&self, k: i64) -> Self {
        self / &Self::from_i64(k, self.prec)
    }

    pub fn mul_rational(&self, r: &Rational) -> Self {
        if r.denom().is_one() {
            return Self::from_parts(&self.man * r.numer(), self.exp, self.prec);
        }
        self * &Self::from_rational(r, self.prec + 8)
    }

    pub fn sqrt(&self) -> Result<Self, Error> {
        if self.is_negative() {
            return Err(Error::Domain("sqrt of a negative number".into()));
        }
        if self.is_zero() {
            return Ok(self.clone());
        }
        // scale so the integer root carries prec+2 bits
        let want = 2 * (self.prec as i64 + 2);
        let mut shift = (want - bitlen(&self.man)).max(0);
        if (self.exp - shift).rem_euclid(2) != 0 {
            shift += 1;
        }
        let m = &self.man << shift as u64;
        let r = m.sqrt();
        Ok(Self::from_parts(r, (self.exp - shift) / 2, self.prec))
    }

    /// Natural logarithm.
    pub fn ln(&self) -> Result<Self, Error> {
        if self.signum() <= 0 {
            return Err(Error::Domain("ln of a non-positive number".into()));
        }
        let p = self.prec + 16;
        let x = self.with_prec(p);
        // x = y * 2^t with y in [0.75, 1.5)
        let mut t = x.top() - 1;
        let mut y = x.mul_pow2(-t);
        if y.cmp_value(&HPReal::from_ratio(&BigInt::from(3), &BigInt::from(4), p)) == Ordering::Less {
            y = y.mul_pow2(1);
            t -= 1;
        } else if y.cmp_value(&HPReal::from_ratio(&BigInt::from(3), &BigInt::from(2), p))
            != Ordering::Less
        {
            y = y.mul_pow2(-1);
            t += 1;
        }
        let one = HPReal::one(p);
        let z = &(&y - &one) / &(&y + &one);
        let z2 = &z * &z;
        let mut term = z.clone();
        let mut acc = z.clone();
        let stop = -(p as i64) - 4;
        let mut n = 1i64;
        loop {
            term = &term * &z2;
            n += 2;
            let add = term.div_i64(n);
            if add.is_zero() || add.top() < stop {
                break;
            }
            acc += &add;
        }
        let mut r = acc.mul_pow2(1);
        if t != 0 {
            r += &ln2_bits(p).mul_i64(t);
        }
        Ok(r.with_prec(self.prec))
    }

    /// Decimal scientific notation with `digits` significant digits, round to nearest.
    pub fn to_sci(&self, digits: u32) -> String {
        let digits = digits.max(1);
        if self.is_zero() {
            return format!("0.{}e+00", "0".repeat(digits as usize - 1));
        }
        let mut e10 = self.log10_abs().floor() as i64;
        let (n, e10) = loop {
            let n = self.scaled_decimal(digits as i64 - 1 - e10);
            let lo = BigInt::from(10).pow(digits - 1);
            let hi = &lo * 10;
            if n >= hi {
                e10 += 1;
            } else if n < lo {
                e10 -= 1;
            } else {
                break (n, e10);
            }
        };
        let s = n.to_string();
        let sign = if self.is_negative() { "-" } else { "" };
        let (head, tail) = s.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{e10:+03}")
        } else {
            format!("{sign}{head}.{tail}e{e10:+03}")
        }
    }

    // round(|x| * 10^s)
    fn scaled_decimal(&self, s: i64) -> BigInt {
        let ten = BigInt::from(10);
        let mut num = self.man.abs();
        let mut den = BigInt::one();
        if s >= 0 {
            num *= ten.pow(s as u32);
        } else {
            den *= ten.pow((-s) as u32);
        }
        if self.exp >= 0 {
            num <<= self.exp as u64;
        } else {
            den <<= (-self.exp) as u64;
        }
        let (q, r) = num.div_rem(&den);
        if r * 2 >= den {
            q + 1
        } else {
            q
        }
    }

    /// Parse plain or scientific decimal notation.
    pub fn parse(s: &str, prec: u32) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a decimal number: {s:?}"));
        let (mant, e) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (neg, mant) = match mant.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, mant.strip_prefix('+').unwrap_or(mant)),
        };
        let (ip, fp) = match mant.find('.') {
            Some(i) => (&mant[..i], &mant[i + 1..]),
            None => (mant, ""),
        };
        if ip.is_empty() && fp.is_empty() {
            return Err(bad());
        }
        if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{ip}{fp}");
        let mut m: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        if neg {
            m = -m;
        }
        let e = e - fp.len() as i64;
        let ten = BigInt::from(10);
        Ok(if e >= 0 {
            Self::from_bigint(m * ten.pow(e as u32), prec)
        } else {
            Self::from_ratio(&m, &ten.pow((-e) as u32), prec)
        })
    }

    fn add_signed(&self, other: &Self, negate: bool) -> Self {
        let prec = self.prec.min(other.prec);
        if other.is_zero() {
            return self.with_prec(prec);
        }
        if self.is_zero() {
            let r = other.with_prec(prec);
            return if negate { -r } else { r };
        }
        let hi = self.top().max(other.top());
        let floor = (hi - prec as i64 - 4).max(self.exp.min(other.exp));
        let align = |x: &HPReal| -> BigInt {
            if x.exp >= floor {
                &x.man << (x.exp - floor) as u64
            } else {
                // bits below the floor are worth < ulp/16 of the result
                &x.man >> (floor - x.exp) as u64
            }
        };
        let a = align(self);
        let b = align(other);
        let m = if negate { a - b } else { a + b };
        Self::from_parts(m, floor, prec)
    }
}

impl fmt::Debug for HPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HPReal({}, {} bits)", self.to_sci(20), self.prec)
    }
}

impl fmt::Display for HPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = f.precision().unwrap_or(((self.prec as f64) / LOG2_10).floor() as usize) as u32;
        f.write_str(&self.to_sci(d))
    }
}

impl Neg for HPReal {
    type Output = HPReal;
    fn neg(self) -> HPReal {
        HPReal { man: -self.man, exp: self.exp, prec: self.prec }
    }
}

impl Neg for &HPReal {
    type Output = HPReal;
    fn neg(self) -> HPReal {
        HPReal { man: -&self.man, exp: self.exp, prec: self.prec }
    }
}

impl Add<&HPReal> for &HPReal {
    type Output = HPReal;
    fn add(self, o: &HPReal) -> HPReal {
        self.add_signed(o, false)
    }
}

impl Sub<&HPReal> for &HPReal {
    type Output = HPReal;
    fn sub(self, o: &HPReal) -> HPReal {
        self.add_signed(o, true)
    }
}

impl Mul<&HPReal> for &HPReal {
    type Output = HPReal;
    fn mul(self, o: &HPReal) -> HPReal {
        let prec = self.prec.min(o.prec);
        if self.is_zero() || o.is_zero() {
            return HPReal::zero(prec);
        }
        HPReal::from_parts(&self.man * &o.man, self.exp + o.exp, prec)
    }
}

impl Div<&HPReal> for &HPReal {
    type Output = HPReal;
    fn div(self, o: &HPReal) -> HPReal {
        assert!(!o.is_zero(), "HPReal division by zero");
        let prec = self.prec.min(o.prec);
        if self.is_zero() {
            return HPReal::zero(prec);
        }
        let shift = (prec as i64 + 3 + bitlen(&o.man) - bitlen(&self.man)).max(0);
        let q = (&self.man << shift as u64) / &o.man;
        HPReal::from_parts(q, self.exp - shift - o.exp, prec)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $f:ident) => {
        impl $tr<HPReal> for HPReal {
            type Output = HPReal;
            fn $f(self, o: HPReal) -> HPReal {
                (&self).$f(&o)
            }
        }
        impl $tr<&HPReal> for HPReal {
            type Output = HPReal;
            fn $f(self, o: &HPReal) -> HPReal {
                (&self).$f(o)
            }
        }
        impl $tr<HPReal> for &HPReal {
            type Output = HPReal;
            fn $f(self, o: HPReal) -> HPReal {
                self.$f(&o)
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&HPReal> for HPReal {
    fn add_assign(&mut self, o: &HPReal) {
        *self = &*self + o;
    }
}
impl SubAssign<&HPReal> for HPReal {
    fn sub_assign(&mut self, o: &HPReal) {
        *self = &*self - o;
    }
}
impl MulAssign<&HPReal> for HPReal {
    fn mul_assign(&mut self, o: &HPReal) {
        *self = &*self * o;
    }
}

// ---------------------------------------------------------------------------
// constants

/// What a caller may ask the constant layer for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConstantRequest {
    Zeta(u32),
    Polylog(u32, Rational),
    Ln2,
    EulerGamma,
    Pi,
}

impl ConstantRequest {
    /// Evaluate to absolute error < 10^-digits.
    pub fn eval(&self, digits: u32) -> Result<HPReal, Error> {
        match self {
            ConstantRequest::Zeta(s) => zeta_int(*s, digits),
            ConstantRequest::Polylog(s, x) => polylog(*s, x, digits),
            ConstantRequest::Ln2 => Ok(ln2(digits)),
            ConstantRequest::EulerGamma => Ok(euler_gamma(digits)),
            ConstantRequest::Pi => Ok(pi(digits)),
        }
    }
}

fn check_digits(digits: u32) -> Result<(), Error> {
    if digits < 10 {
        return Err(Error::Domain(format!("precision {digits} below the 10-digit minimum")));
    }
    Ok(())
}

type CacheKey = (u8, u32, u32, String);

fn cache() -> &'static Mutex<HashMap<CacheKey, HPReal>> {
    static C: OnceLock<Mutex<HashMap<CacheKey, HPReal>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn clear_constant_cache() {
    cache().lock().unwrap().clear();
}

fn cached(key: CacheKey, f: impl FnOnce() -> HPReal) -> HPReal {
    if let Some(v) = cache().lock().unwrap().get(&key) {
        return v.clone();
    }
    let v = f();
    cache().lock().unwrap().insert(key, v.clone());
    v
}

/// ζ(s) for integer s ≥ 2, absolute error < 10^-digits.
pub fn zeta_int(s: u32, digits: u32) -> Result<HPReal, Error> {
    check_digits(digits)?;
    if s < 2 {
        return Err(Error::Domain(format!("zeta({s}) diverges")));
    }
    Ok(zeta_bits(s, digits_to_bits(digits + 2)))
}

/// Li_s(x) for integer s ≥ 1 and rational |x| ≤ 1/2.
pub fn polylog(s: u32, x: &Rational, digits: u32) -> Result<HPReal, Error> {
    check_digits(digits)?;
    if s < 1 {
        return Err(Error::Domain("polylog order must be >= 1".into()));
    }
    if x.abs() > Rational::new(1.into(), 2.into()) {
        return Err(Error::Domain(format!("polylog argument {x} outside |x| <= 1/2")));
    }
    Ok(polylog_bits(s, x, digits_to_bits(digits + 2)))
}

pub fn ln2(digits: u32) -> HPReal {
    ln2_bits(digits_to_bits(digits + 2))
}

pub fn euler_gamma(digits: u32) -> HPReal {
    gamma_bits(digits_to_bits(digits + 2))
}

pub fn pi(digits: u32) -> HPReal {
    pi_bits(digits_to_bits(digits + 2))
}

/// ln 2 = Σ 1/(k 2^k), accurate to 2^-prec.
pub fn ln2_bits(prec: u32) -> HPReal {
    cached((0, prec, 0, String::new()), || {
        let p = prec + 16;
        let mut acc = HPReal::zero(p);
        let mut k = 1i64;
        loop {
            let t = HPReal::one(p).mul_pow2(-k).div_i64(k);
            if t.top() < -(p as i64) - 2 {
                break;
            }
            acc += &t;
            k += 1;
        }
        acc.with_prec(prec)
    })
}

fn atan_inv(n: i64, p: u32) -> HPReal {
    // arctan(1/n) = Σ (-1)^j / ((2j+1) n^(2j+1))
    let n2 = HPReal::from_i64(n * n, p);
    let mut pw = HPReal::one(p).div_i64(n);
    let mut acc = pw.clone();
    let mut j = 0i64;
    loop {
        j += 1;
        pw = &pw / &n2;
        let t = pw.div_i64(2 * j + 1);
        if t.top() < -(p as i64) - 2 {
            break;
        }
        if j % 2 == 1 {
            acc -= &t;
        } else {
            acc += &t;
        }
    }
    acc
}

/// π by Machin's formula.
pub fn pi_bits(prec: u32) -> HPReal {
    cached((1, prec, 0, String::new()), || {
        let p = prec + 16;
        let a = atan_inv(5, p).mul_i64(16);
        let b = atan_inv(239, p).mul_i64(4);
        (a - b).with_prec(prec)
    })
}

/// Terms of the Euler–Maclaurin tail Σ_{k>N} k^-s beyond the integral and half-term.
fn zeta_em_terms(s: u32, n: i64, p: u32) -> HPReal {
    // Σ_j B_2j/(2j)! (s)_{2j-1} N^{-s-2j+1}, stopped once terms are below 2^-p
    let nn = HPReal::from_i64(n, p);
    let n2 = &nn * &nn;
    let mut pw = nn.powi(s + 1).recip(); // N^{-s-1}
    let mut acc = HPReal::zero(p);
    let mut rising = Rational::from_integer(BigInt::from(s)); // (s)_{2j-1}
    let mut fact = Rational::from_integer(BigInt::from(2)); // (2j)!
    let mut j = 1u32;
    loop {
        let c = bernoulli(2 * j) * &rising / &fact;
        let t = pw.mul_rational(&c);
        if t.is_zero() || t.top() < -(p as i64) - 4 {
            break;
        }
        acc += &t;
        let a = s as i64 + 2 * j as i64 - 1;
        rising = rising * Rational::from_integer(BigInt::from(a * (a + 1)));
        fact = fact * Rational::from_integer(BigInt::from((2 * j as i64 + 1) * (2 * j as i64 + 2)));
        pw = &pw / &n2;
        j += 1;
        assert!(j < 400, "Euler-Maclaurin terms failed to decay");
    }
    acc
}

/// ζ(s) = H_N^(s) + N^{1-s}/(s-1) - N^{-s}/2 + Bernoulli corrections.
pub fn zeta_bits(s: u32, prec: u32) -> HPReal {
    cached((2, prec, s, String::new()), || {
        let p = prec + 16;
        // N ~ digits keeps the Bernoulli terms decaying fast
        let n = (prec as i64 / 3).max(20);
        let mut acc = HPReal::zero(p);
        for k in 1..=n {
            acc += &HPReal::from_i64(k, p).powi(s).recip();
        }
        let nn = HPReal::from_i64(n, p);
        acc += &nn.powi(s - 1).recip().div_i64(s as i64 - 1);
        acc -= &nn.powi(s).recip().mul_pow2(-1);
        acc += &zeta_em_terms(s, n, p);
        acc.with_prec(prec)
    })
}

/// γ = H_N - ln N - 1/(2N) + Σ B_2j/(2j N^2j).
pub fn gamma_bits(prec: u32) -> HPReal {
    cached((3, prec, 0, String::new()), || {
        let p = prec + 16;
        let n = (prec as i64 / 3).max(20);
        let mut h = HPReal::zero(p);
        for k in 1..=n {
            h += &HPReal::one(p).div_i64(k);
        }
        let nn = HPReal::from_i64(n, p);
        let mut acc = h - nn.ln().unwrap() - nn.recip().mul_pow2(-1);
        let n2 = &nn * &nn;
        let mut pw = n2.recip();
        let mut j = 1u32;
        loop {
            let c = bernoulli(2 * j) / Rational::from_integer(BigInt::from(2 * j));
            let t = pw.mul_rational(&c);
            if t.is_zero() || t.top() < -(p as i64) - 4 {
                break;
            }
            acc += &t;
            pw = &pw / &n2;
            j += 1;
            assert!(j < 400, "gamma series failed to decay");
        }
        acc.with_prec(prec)
    })
}

/// Li_s(x) by direct summation; |x| ≤ 1/2 gives a geometric tail bound.
pub fn polylog_bits(s: u32, x: &Rational, prec: u32) -> HPReal {
    cached((4, prec, s, x.to_string()), || {
        let p = prec + 16;
        if x.is_zero() {
            return HPReal::zero(prec);
        }
        let xv = HPReal::from_rational(x, p);
        let xa = xv.abs().to_f64();
        let mut pw = xv.clone();
        let mut acc = HPReal::zero(p);
        let mut k = 1i64;
        loop {
            acc += &(&pw / &HPReal::from_i64(k, p).powi(s));
            // remaining tail ≤ |x|^{k+1} / ((k+1)^s (1-|x|)) ≤ 2 |x|^{k+1}/(k+1)^s
            let tail_log2 = (k + 1) as f64 * xa.log2() - s as f64 * ((k + 1) as f64).log2() + 1.0;
            if tail_log2 < -(p as f64) - 2.0 {
                break;
            }
            pw = &pw * &xv;
            k += 1;
        }
        acc.with_prec(prec)
    })
}
