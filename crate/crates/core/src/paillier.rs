//! Paillier encryption with g = N + 1.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::arith::{mod_inverse, random_prime, ModRing, Natural};
use crate::canon;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct Ciphertext<I: Natural>(#[serde(with = "canon::hex")] pub I);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound = "")]
pub struct PaillierPublic<I: Natural> {
    #[serde(with = "canon::hex")]
    pub he_modulus: I,
    #[serde(skip)]
    n_sq: I,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierSecret<I> {
    lambda: I,
    mu: I,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierKeys<I: Natural> {
    pub public: PaillierPublic<I>,
    secret: PaillierSecret<I>,
}

impl<I: Natural> PaillierPublic<I> {
    pub fn new(he_modulus: I) -> Self {
        let n_sq = he_modulus.clone() * he_modulus.clone();
        Self { he_modulus, n_sq }
    }

    pub fn modulus_squared(&self) -> &I {
        &self.n_sq
    }

    fn check_plaintext(&self, m: &I) -> Result<()> {
        if *m >= self.he_modulus {
            return Err(Error::PlaintextRange(format!("{} >= {}", m.to_hex(), self.he_modulus.to_hex())));
        }
        Ok(())
    }

    /// (1+N)^m mod N^2, computed as 1 + mN.
    fn g_pow(&self, m: &I) -> I {
        (I::one() + m.clone() * self.he_modulus.clone()) % self.n_sq.clone()
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &I, rng: &mut R) -> Result<Ciphertext<I>> {
        let r = ModRing::new(self.he_modulus.clone()).random_unit(rng);
        self.encrypt_with(m, &r)
    }

    /// Encryption with caller-chosen randomness r (a unit mod N).
    pub fn encrypt_with(&self, m: &I, r: &I) -> Result<Ciphertext<I>> {
        self.check_plaintext(m)?;
        let rn = r.pow_mod(&self.he_modulus, &self.n_sq);
        Ok(Ciphertext(self.g_pow(m).mul_mod(&rn, &self.n_sq)))
    }

    /// Randomness-free encryption (1+N)^m. Anyone can invert it; it exists
    /// only to model a deterministic homomorphic scheme.
    pub fn encrypt_deterministic(&self, m: &I) -> Result<Ciphertext<I>> {
        self.check_plaintext(m)?;
        Ok(Ciphertext(self.g_pow(m)))
    }

    pub fn add(&self, a: &Ciphertext<I>, b: &Ciphertext<I>) -> Ciphertext<I> {
        Ciphertext(a.0.mul_mod(&b.0, &self.n_sq))
    }

    pub fn scale(&self, c: &Ciphertext<I>, s: &I) -> Ciphertext<I> {
        Ciphertext(c.0.pow_mod(s, &self.n_sq))
    }

    /// Ciphertext of the additive inverse.
    pub fn negate(&self, c: &Ciphertext<I>) -> Result<Ciphertext<I>> {
        Ok(Ciphertext(mod_inverse(&c.0, &self.n_sq)?))
    }

    pub fn is_well_formed(&self, c: &Ciphertext<I>) -> bool {
        c.0 < self.n_sq && c.0.gcd(&self.he_modulus).is_one()
    }
}

impl<I: Natural> PaillierKeys<I> {
    pub fn from_primes(p: I, q: I) -> Result<Self> {
        if p == q {
            return Err(Error::ParameterGeneration("Paillier primes must differ".into()));
        }
        let n = p.clone() * q.clone();
        let p1 = p - I::one();
        let q1 = q - I::one();
        if !n.gcd(&(p1.clone() * q1.clone())).is_one() {
            return Err(Error::ParameterGeneration("gcd(N, phi(N)) != 1".into()));
        }
        let lambda = p1.lcm(&q1);
        // With g = N+1, L(g^lambda mod N^2) = lambda mod N.
        let mu = mod_inverse(&(lambda.clone() % n.clone()), &n)?;
        Ok(Self { public: PaillierPublic::new(n), secret: PaillierSecret { lambda, mu } })
    }

    /// Keys with an N of exactly `bits` bits.
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self> {
        for _ in 0..256 {
            let p: I = random_prime(bits.div_ceil(2), rng)?;
            let q: I = random_prime(bits / 2, rng)?;
            if (p.clone() * q.clone()).bits() != bits {
                continue;
            }
            if let Ok(k) = Self::from_primes(p, q) {
                return Ok(k);
            }
        }
        Err(Error::ParameterGeneration(format!("no {bits}-bit Paillier modulus")))
    }

    /// N = 65519 * 65521, the largest two-prime modulus whose square fits a u64.
    pub fn desk() -> Self {
        Self::from_primes(I::from_u64(65519), I::from_u64(65521)).expect("fixed desk primes")
    }

    pub fn decrypt(&self, c: &Ciphertext<I>) -> Result<I> {
        let pk = &self.public;
        if !pk.is_well_formed(c) {
            return Err(Error::Malformed("ciphertext not a unit below N^2".into()));
        }
        let u = c.0.pow_mod(&self.secret.lambda, &pk.n_sq);
        let l = (u - I::one()) / pk.he_modulus.clone();
        Ok(l.mul_mod(&self.secret.mu, &pk.he_modulus))
    }
}
