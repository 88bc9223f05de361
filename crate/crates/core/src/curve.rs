//! Short-Weierstrass curves y^2 = x^3 + ax + b over F_p. Points are affine;
//! scalar multiplication runs in Jacobian coordinates.

use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{add_mod, mod_inverse, sub_mod, Natural};
use crate::error::{Error, Result};
use crate::group::{hexconst, PrimeOrderGroup};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurvePoint<I> {
    Infinity,
    Affine { x: I, y: I },
}

impl<I: Natural> fmt::Debug for CurvePoint<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Infinity => write!(f, "O"),
            CurvePoint::Affine { x, y } => write!(f, "({}, {})", x.to_hex(), y.to_hex()),
        }
    }
}

impl<I: Natural> Serialize for CurvePoint<I> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CurvePoint::Infinity => s.serialize_str("infinity"),
            CurvePoint::Affine { x, y } => {
                let mut st = s.serialize_struct("CurvePoint", 2)?;
                st.serialize_field("x", &x.to_hex())?;
                st.serialize_field("y", &y.to_hex())?;
                st.end()
            }
        }
    }
}

impl<'de, I: Natural> Deserialize<'de> for CurvePoint<I> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Tag(String),
            Pt { x: String, y: String },
        }
        match Wire::deserialize(d)? {
            Wire::Tag(t) if t == "infinity" => Ok(CurvePoint::Infinity),
            Wire::Tag(t) => Err(D::Error::custom(format!("unknown point tag {t:?}"))),
            Wire::Pt { x, y } => {
                let parse = |s: &str| I::from_hex(s).ok_or_else(|| D::Error::custom(format!("bad coordinate {s:?}")));
                Ok(CurvePoint::Affine { x: parse(&x)?, y: parse(&y)? })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveParams<I: Natural> {
    pub p: I,
    pub a: I,
    pub b: I,
    pub g: CurvePoint<I>,
    pub n: I,
}

impl<I: Natural> CurveParams<I> {
    pub fn new(p: I, a: I, b: I, g: CurvePoint<I>, n: I) -> Result<Self> {
        let c = Self { p, a, b, g, n };
        let four_a3 = I::from_u64(4).mul_mod(&c.a.pow_mod(&I::from_u64(3), &c.p), &c.p);
        let b2 = I::from_u64(27).mul_mod(&c.b.mul_mod(&c.b, &c.p), &c.p);
        if add_mod(&four_a3, &b2, &c.p).is_zero() {
            return Err(Error::Domain("singular curve".into()));
        }
        if c.g == CurvePoint::Infinity || !c.on_curve(&c.g) {
            return Err(Error::Domain("base point not on curve".into()));
        }
        if c.mul(&c.g, &c.n) != CurvePoint::Infinity {
            return Err(Error::Domain("[n]G is not the identity".into()));
        }
        Ok(c)
    }

    /// y^2 = x^3 + 7x + 6 over F_13; 11 points, G = (1, 1).
    pub fn desk() -> Self {
        let f = I::from_u64;
        Self { p: f(13), a: f(7), b: f(6), g: CurvePoint::Affine { x: f(1), y: f(1) }, n: f(11) }
    }

    /// NIST P-256.
    pub fn p256() -> Self {
        let p: I = hexconst("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
        Self {
            a: p.clone() - I::from_u64(3),
            p,
            b: hexconst("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
            g: CurvePoint::Affine {
                x: hexconst("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
                y: hexconst("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
            },
            n: hexconst("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"),
        }
    }

    pub fn on_curve(&self, pt: &CurvePoint<I>) -> bool {
        match pt {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                if *x >= self.p || *y >= self.p {
                    return false;
                }
                let lhs = y.mul_mod(y, &self.p);
                let x3 = x.pow_mod(&I::from_u64(3), &self.p);
                let rhs = add_mod(&add_mod(&x3, &self.a.mul_mod(x, &self.p), &self.p), &self.b, &self.p);
                lhs == rhs
            }
        }
    }

    pub fn add(&self, a: &CurvePoint<I>, b: &CurvePoint<I>) -> CurvePoint<I> {
        let (x1, y1, x2, y2) = match (a, b) {
            (CurvePoint::Infinity, _) => return b.clone(),
            (_, CurvePoint::Infinity) => return a.clone(),
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
        };
        let p = &self.p;
        if x1 == x2 && add_mod(y1, y2, p).is_zero() {
            return CurvePoint::Infinity;
        }
        let lambda = if x1 == x2 {
            let three_x2 = I::from_u64(3).mul_mod(&x1.mul_mod(x1, p), p);
            let num = add_mod(&three_x2, &self.a, p);
            let den = I::from_u64(2).mul_mod(y1, p);
            num.mul_mod(&mod_inverse(&den, p).expect("p is prime and 2y != 0"), p)
        } else {
            let num = sub_mod(y2, y1, p);
            let den = sub_mod(x2, x1, p);
            num.mul_mod(&mod_inverse(&den, p).expect("p is prime and x1 != x2"), p)
        };
        let x3 = sub_mod(&sub_mod(&lambda.mul_mod(&lambda, p), x1, p), x2, p);
        let y3 = sub_mod(&lambda.mul_mod(&sub_mod(x1, &x3, p), p), y1, p);
        CurvePoint::Affine { x: x3, y: y3 }
    }

    pub fn mul(&self, pt: &CurvePoint<I>, s: &I) -> CurvePoint<I> {
        let CurvePoint::Affine { x, y } = pt else { return CurvePoint::Infinity };
        let mut acc = Jacobian::infinity();
        for byte in s.to_bytes_be() {
            for bit in (0..8).rev() {
                acc = self.double_j(&acc);
                if (byte >> bit) & 1 == 1 {
                    acc = self.add_affine_j(&acc, x, y);
                }
            }
        }
        self.to_affine(&acc)
    }

    /// Whether Hasse's bound leaves no room for a cofactor, so every point
    /// on the curve has order n.
    fn cofactor_one(&self) -> bool {
        let (p, n) = (self.p.to_biguint(), self.n.to_biguint());
        n * 2u32 > &p + 1u32 + (p.sqrt() + 1u32) * 2u32
    }

    fn double_j(&self, a: &Jacobian<I>) -> Jacobian<I> {
        let p = &self.p;
        if a.z.is_zero() || a.y.is_zero() {
            return Jacobian::infinity();
        }
        let m = |u: &I, v: &I| u.mul_mod(v, p);
        let small = |k: u64, v: &I| I::from_u64(k).mul_mod(v, p);
        let yy = m(&a.y, &a.y);
        let zz = m(&a.z, &a.z);
        let s = small(4, &m(&a.x, &yy));
        let mm = add_mod(&small(3, &m(&a.x, &a.x)), &m(&self.a, &m(&zz, &zz)), p);
        let x3 = sub_mod(&m(&mm, &mm), &small(2, &s), p);
        let y3 = sub_mod(&m(&mm, &sub_mod(&s, &x3, p)), &small(8, &m(&yy, &yy)), p);
        let z3 = small(2, &m(&a.y, &a.z));
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn add_affine_j(&self, a: &Jacobian<I>, x2: &I, y2: &I) -> Jacobian<I> {
        let p = &self.p;
        if a.z.is_zero() {
            return Jacobian { x: x2.clone(), y: y2.clone(), z: I::from_u64(1) };
        }
        let m = |u: &I, v: &I| u.mul_mod(v, p);
        let zz = m(&a.z, &a.z);
        let h = sub_mod(&m(x2, &zz), &a.x, p);
        let r = sub_mod(&m(y2, &m(&zz, &a.z)), &a.y, p);
        if h.is_zero() {
            return if r.is_zero() { self.double_j(a) } else { Jacobian::infinity() };
        }
        let hh = m(&h, &h);
        let hhh = m(&hh, &h);
        let v = m(&a.x, &hh);
        let x3 = sub_mod(&sub_mod(&m(&r, &r), &hhh, p), &add_mod(&v, &v, p), p);
        let y3 = sub_mod(&m(&r, &sub_mod(&v, &x3, p)), &m(&a.y, &hhh), p);
        Jacobian { x: x3, y: y3, z: m(&a.z, &h) }
    }

    fn to_affine(&self, a: &Jacobian<I>) -> CurvePoint<I> {
        if a.z.is_zero() {
            return CurvePoint::Infinity;
        }
        let p = &self.p;
        let zi = mod_inverse(&a.z, p).expect("p is prime and z != 0");
        let zi2 = zi.mul_mod(&zi, p);
        CurvePoint::Affine { x: a.x.mul_mod(&zi2, p), y: a.y.mul_mod(&zi2.mul_mod(&zi, p), p) }
    }
}

/// (X, Y, Z) standing for (X/Z^2, Y/Z^3); Z = 0 is the point at infinity.
struct Jacobian<I> {
    x: I,
    y: I,
    z: I,
}

impl<I: Natural> Jacobian<I> {
    fn infinity() -> Self {
        Self { x: I::from_u64(1), y: I::from_u64(1), z: I::zero() }
    }
}

impl<I: Natural> PrimeOrderGroup for CurveParams<I> {
    type Int = I;
    type Element = CurvePoint<I>;

    fn order(&self) -> &I {
        &self.n
    }
    fn generator(&self) -> CurvePoint<I> {
        self.g.clone()
    }
    fn identity(&self) -> CurvePoint<I> {
        CurvePoint::Infinity
    }
    fn op(&self, a: &CurvePoint<I>, b: &CurvePoint<I>) -> CurvePoint<I> {
        self.add(a, b)
    }
    fn exp(&self, base: &CurvePoint<I>, s: &I) -> CurvePoint<I> {
        self.mul(base, &(s.clone() % self.n.clone()))
    }
    fn contains(&self, e: &CurvePoint<I>) -> bool {
        // Both named curves have cofactor one; the explicit [n]P check
        // covers any other parameters.
        self.on_curve(e) && (self.cofactor_one() || self.mul(e, &self.n) == CurvePoint::Infinity)
    }
    fn encode(&self, e: &CurvePoint<I>) -> Vec<u8> {
        match e {
            CurvePoint::Infinity => vec![0],
            CurvePoint::Affine { x, y } => {
                let width = self.p.bits().div_ceil(8) as usize;
                let mut out = vec![4u8];
                for c in [x, y] {
                    let b = c.to_bytes_be();
                    out.extend(std::iter::repeat_n(0, width.saturating_sub(b.len())));
                    out.extend(b);
                }
                out
            }
        }
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "type": "short-weierstrass",
            "p": self.p.to_hex(), "a": self.a.to_hex(), "b": self.b.to_hex(),
            "g": crate::canon::to_value(&self.g), "n": self.n.to_hex(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn pt(x: u64, y: u64) -> CurvePoint<u64> {
        CurvePoint::Affine { x, y }
    }

    #[test]
    fn desk_curve_multiples() {
        let c = CurveParams::<u64>::desk();
        let expected = [(1, 1), (10, 6), (6, 2), (5, 6), (11, 6), (11, 7), (5, 7), (6, 11), (10, 7), (1, 12)];
        for (k, (x, y)) in expected.iter().enumerate() {
            assert_eq!(c.mul(&c.g, &(k as u64 + 1)), pt(*x, *y));
        }
        assert_eq!(c.mul(&c.g, &11), CurvePoint::Infinity);
        assert!(CurveParams::new(c.p, c.a, c.b, c.g.clone(), c.n).is_ok());
    }

    #[test]
    fn p256_validates() {
        let c = CurveParams::<BigUint>::p256();
        assert!(CurveParams::new(c.p.clone(), c.a.clone(), c.b.clone(), c.g.clone(), c.n.clone()).is_ok());
    }

    #[test]
    fn p256_multiples_follow_the_affine_law() {
        let c = CurveParams::<BigUint>::p256();
        let mut walk = CurvePoint::Infinity;
        for k in 0u32..20 {
            assert_eq!(c.mul(&c.g, &BigUint::from(k)), walk);
            walk = c.add(&walk, &c.g);
        }
        let minus_g = match &c.g {
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: x.clone(), y: &c.p - y },
            CurvePoint::Infinity => unreachable!(),
        };
        assert_eq!(c.mul(&c.g, &(&c.n - 1u32)), minus_g);
        assert!(c.cofactor_one());
    }

    #[test]
    fn point_encoding_roundtrip() {
        let c = CurveParams::<u64>::desk();
        let v = crate::canon::to_value(&pt(5, 7));
        assert_eq!(v, serde_json::json!({"x": "5", "y": "7"}));
        assert_eq!(c.decode(&v).unwrap(), pt(5, 7));
        assert!(c.decode(&serde_json::json!({"x": "5", "y": "8"})).is_err());
        assert_eq!(c.decode(&serde_json::json!("infinity")).unwrap(), CurvePoint::Infinity);
    }

    proptest! {
        #[test]
        fn scalar_mul_composes(r in 1u64..11, s1 in 0u64..11, s2 in 0u64..11) {
            let c = CurveParams::<u64>::desk();
            let x = c.gen_exp(&r);
            prop_assert_eq!(c.exp(&c.exp(&x, &s1), &s2), c.exp(&x, &(s1 * s2 % 11)));
        }

        #[test]
        fn addition_matches_scalar_sum(a in 0u64..11, b in 0u64..11) {
            let c = CurveParams::<u64>::desk();
            prop_assert_eq!(c.add(&c.gen_exp(&a), &c.gen_exp(&b)), c.gen_exp(&((a + b) % 11)));
        }
    }
}
