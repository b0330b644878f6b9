//! Scalar fields: exact complex rationals and floating complex numbers.
//!
//! Everything downstream (series, linear algebra, jets, connections) is
//! generic over [`Scalar`], so one code path serves both exact points and
//! floating points (the latter being needed as soon as `exp` shows up).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::linalg::{self, KernelInfo, Matrix, RankInfo};

/// Exact complex rational `re + im·i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl CRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        CRational { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        CRational {
            re,
            im: BigRational::zero(),
        }
    }

    pub fn from_int(v: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_frac(num: i64, den: i64) -> Self {
        Self::real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn imag_unit() -> Self {
        CRational {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// Integer value, if this is a real integer that fits in an `i64`.
    pub fn as_i64(&self) -> Option<i64> {
        if self.is_real() && self.re.is_integer() {
            self.re.to_integer().to_i64()
        } else {
            None
        }
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        if self.im.is_zero() {
            return Some(Self::real(self.re.recip()));
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(CRational {
            re: &self.re / &norm,
            im: -(&self.im / &norm),
        })
    }

    /// Integer power, negative exponents allowed for nonzero bases.
    pub fn powi(&self, k: i32) -> Option<Self> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Some(result)
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl Default for CRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl<'a> Add<&'a CRational> for &'a CRational {
    type Output = CRational;
    fn add(self, o: &CRational) -> CRational {
        if self.im.is_zero() && o.im.is_zero() {
            return CRational::real(&self.re + &o.re);
        }
        CRational {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }
}

impl<'a> Sub<&'a CRational> for &'a CRational {
    type Output = CRational;
    fn sub(self, o: &CRational) -> CRational {
        if self.im.is_zero() && o.im.is_zero() {
            return CRational::real(&self.re - &o.re);
        }
        CRational {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }
}

impl<'a> Mul<&'a CRational> for &'a CRational {
    type Output = CRational;
    fn mul(self, o: &CRational) -> CRational {
        if self.im.is_zero() && o.im.is_zero() {
            return CRational::real(&self.re * &o.re);
        }
        CRational {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Neg for &CRational {
    type Output = CRational;
    fn neg(self) -> CRational {
        CRational {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

impl Add for CRational {
    type Output = CRational;
    fn add(self, o: CRational) -> CRational {
        &self + &o
    }
}

impl Sub for CRational {
    type Output = CRational;
    fn sub(self, o: CRational) -> CRational {
        &self - &o
    }
}

impl Mul for CRational {
    type Output = CRational;
    fn mul(self, o: CRational) -> CRational {
        &self * &o
    }
}

impl Neg for CRational {
    type Output = CRational;
    fn neg(self) -> CRational {
        -&self
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for CRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return f.write_str(&fmt_rational(&self.re));
        }
        let im = if self.im.is_one() {
            "I".to_string()
        } else if (-self.im.clone()).is_one() {
            "-I".to_string()
        } else {
            format!("{}*I", fmt_rational(&self.im))
        };
        if self.re.is_zero() {
            return f.write_str(&im);
        }
        if self.im.is_negative() {
            write!(f, "{}{}", fmt_rational(&self.re), im)
        } else {
            write!(f, "{}+{}", fmt_rational(&self.re), im)
        }
    }
}

impl Serialize for CRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Parses real rationals of the form `p`, `-p`, `p/q`.
impl FromStr for CRational {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || ParseRationalError(s.to_string());
        let (num, den) = match t.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (t, "1"),
        };
        let num: BigInt = num.parse().map_err(|_| err())?;
        let den: BigInt = den.parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        Ok(CRational::real(BigRational::new(num, den)))
    }
}

/// Field-like arithmetic shared by scalars, truncated series and symbolic
/// expressions. Generic elimination code only needs this.
pub trait Arith: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn negated(&self) -> Self;
    /// Multiplicative inverse; `None` when the element is known to vanish.
    fn recip(&self) -> Option<Self>;
}

/// A field of scalars usable by every algorithm in the crate.
pub trait Scalar: Arith + fmt::Debug + PartialEq + Send + Sync + 'static {
    /// Whether zero tests are exact (`true`) or tolerance based.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn from_exact(q: &CRational) -> Self;
    /// Nearest field element to a finite float (exact for binary fractions).
    fn from_f64(v: f64) -> Self;

    /// `None` when the exponential leaves the field (exact, nonzero argument).
    fn exp(&self) -> Option<Self>;

    fn is_zero(&self) -> bool;
    fn magnitude(&self) -> f64;
    fn to_complex(&self) -> Complex64;

    fn rank_of(m: &Matrix<Self>, tol: f64) -> RankInfo;
    fn kernel_of(m: &Matrix<Self>, tol: f64) -> KernelInfo<Self>;
}

impl Arith for CRational {
    fn zero_like(&self) -> Self {
        CRational::zero()
    }
    fn one_like(&self) -> Self {
        CRational::one()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn negated(&self) -> Self {
        -self
    }
    fn recip(&self) -> Option<Self> {
        CRational::recip(self)
    }
}

impl Scalar for CRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        CRational::zero()
    }
    fn one() -> Self {
        CRational::one()
    }
    fn from_int(v: i64) -> Self {
        CRational::from_int(v)
    }
    fn from_exact(q: &CRational) -> Self {
        q.clone()
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).map_or_else(CRational::zero, CRational::real)
    }
    fn exp(&self) -> Option<Self> {
        if self.is_zero() {
            Some(CRational::one())
        } else {
            None
        }
    }
    fn is_zero(&self) -> bool {
        CRational::is_zero(self)
    }
    fn magnitude(&self) -> f64 {
        self.to_complex().norm()
    }
    fn to_complex(&self) -> Complex64 {
        CRational::to_complex(self)
    }
    fn rank_of(m: &Matrix<Self>, _tol: f64) -> RankInfo {
        linalg::exact_rank(m)
    }
    fn kernel_of(m: &Matrix<Self>, _tol: f64) -> KernelInfo<Self> {
        linalg::exact_kernel(m)
    }
}

impl Arith for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn negated(&self) -> Self {
        -self
    }
    fn recip(&self) -> Option<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            None
        } else {
            Some(self.inv())
        }
    }
}

impl Scalar for Complex64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_int(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn from_exact(q: &CRational) -> Self {
        q.to_complex()
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn exp(&self) -> Option<Self> {
        Some(Complex64::exp(*self))
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn rank_of(m: &Matrix<Self>, tol: f64) -> RankInfo {
        linalg::numeric_rank(m, tol)
    }
    fn kernel_of(m: &Matrix<Self>, tol: f64) -> KernelInfo<Self> {
        linalg::numeric_kernel(m, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let q: CRational = "-6/4".parse().unwrap();
        assert_eq!(q.to_string(), "-3/2");
        assert_eq!("7".parse::<CRational>().unwrap(), CRational::from_int(7));
        assert!("1/0".parse::<CRational>().is_err());
        assert!("abc".parse::<CRational>().is_err());
        let z = &CRational::from_int(2) + &CRational::imag_unit();
        assert_eq!(z.to_string(), "2+I");
    }

    #[test]
    fn complex_inverse() {
        let z = CRational::new(
            BigRational::from_integer(3.into()),
            BigRational::from_integer(4.into()),
        );
        let w = z.recip().unwrap();
        assert_eq!(&z * &w, CRational::one());
        assert!(CRational::zero().recip().is_none());
    }

    #[test]
    fn integer_powers() {
        let two = CRational::from_int(2);
        assert_eq!(two.powi(10).unwrap(), CRational::from_int(1024));
        assert_eq!(two.powi(-2).unwrap(), CRational::from_frac(1, 4));
        assert!(CRational::zero().powi(-1).is_none());
    }
}
