//! Arbitrary-precision modular arithmetic over a prime modulus.
//!
//! Every residue in the laboratory lives in `Z_p` and every exponent in
//! `Z_{p-1}`. None of this is constant-time: the crate is a cryptanalysis
//! workbench, not a credential store, and timing side channels are out of
//! scope.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModMathError;
use crate::rng::SeededRng;

/// Smallest modulus accepted anywhere in the laboratory.
pub const MIN_PRIME: u32 = 23;

/// Miller-Rabin rounds; 4^-40 = 2^-80 error bound.
const MILLER_RABIN_ROUNDS: usize = 40;

/// Candidates below this bound are settled by trial division alone.
const TRIAL_DIVISION_LIMIT: u64 = 1 << 16;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// A prime modulus of at least [`MIN_PRIME`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Prime(BigUint);

impl Prime {
    pub fn new(value: BigUint) -> Result<Self, ModMathError> {
        if value < BigUint::from(MIN_PRIME) {
            return Err(ModMathError::PrimeTooSmall);
        }
        if !is_probable_prime(&value) {
            return Err(ModMathError::NotPrime);
        }
        Ok(Prime(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Order of the multiplicative group, `p - 1`.
    pub fn group_order(&self) -> BigUint {
        &self.0 - 1u32
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    /// Byte width of a residue, `ceil(bitlen(p) / 8)`.
    pub fn byte_width(&self) -> usize {
        self.0.bits().div_ceil(8) as usize
    }

    /// True when `x` lies in `[lo, p - hi_gap]`.
    pub(crate) fn in_range(&self, x: &BigUint, lo: u32, hi_gap: u32) -> bool {
        *x >= BigUint::from(lo) && x + hi_gap <= self.0
    }
}

impl fmt::Debug for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prime(0x{:x})", self.0)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Prime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        hex::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Prime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = hex::deserialize(d)?;
        Prime::new(value).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Prime {
    type Err = ModMathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Prime::new(hex::decode(s)?)
    }
}

/// `base^exp mod m` by left-to-right square-and-multiply.
///
/// Panics if `base >= m`; callers reduce or reject at their boundary.
pub fn mod_pow(base: &BigUint, exp: &BigUint, m: &Prime) -> BigUint {
    assert!(base < m.value(), "mod_pow: base must be reduced below the modulus");
    let modulus = m.value();
    let mut acc = BigUint::one();
    for i in (0..exp.bits()).rev() {
        acc = (&acc * &acc) % modulus;
        if exp.bit(i) {
            acc = (&acc * base) % modulus;
        }
    }
    acc
}

/// Multiplicative inverse of `a` modulo the prime `m`.
pub fn mod_inv(a: &BigUint, m: &Prime) -> Result<BigUint, ModMathError> {
    if a.is_zero() {
        return Err(ModMathError::ZeroNotInvertible);
    }
    assert!(a < m.value(), "mod_inv: argument must be reduced below the modulus");
    inverse_mod(a, m.value()).ok_or(ModMathError::ZeroNotInvertible)
}

/// Inverse of exponent `k` modulo `group_order` (normally `p - 1`).
pub fn exp_inv(k: &BigUint, group_order: &BigUint) -> Result<BigUint, ModMathError> {
    if k.is_zero() {
        return Err(ModMathError::NotCoprime);
    }
    inverse_mod(&(k % group_order), group_order).ok_or(ModMathError::NotCoprime)
}

fn inverse_mod(a: &BigUint, n: &BigUint) -> Option<BigUint> {
    if n.is_one() {
        return Some(BigUint::zero());
    }
    let a = BigInt::from(a.clone());
    let n = BigInt::from(n.clone());
    let egcd = a.extended_gcd(&n);
    if !egcd.gcd.is_one() {
        return None;
    }
    let x = egcd.x.mod_floor(&n);
    debug_assert!(!x.is_negative());
    x.to_biguint()
}

/// Uniform exponent in `[1, p - 2]`.
pub fn sample_exponent(m: &Prime, rng: &mut SeededRng) -> BigUint {
    rng.gen_biguint_range(&BigUint::one(), &(m.value() - 1u32))
}

/// Uniform residue in `[lo, p - hi_gap]`.
pub(crate) fn sample_in(m: &Prime, lo: u32, hi_gap: u32, rng: &mut SeededRng) -> BigUint {
    rng.gen_biguint_range(&BigUint::from(lo), &(m.value() - hi_gap + 1u32))
}

/// Random prime with exactly `bits` bits. For `bits = 5` the result is also
/// clamped to the [`MIN_PRIME`] floor, so it is one of 23, 29 or 31.
pub fn gen_prime(bits: u64, rng: &mut SeededRng) -> Result<Prime, ModMathError> {
    if bits < 5 {
        return Err(ModMathError::BitLengthTooSmall(bits));
    }
    let lo = std::cmp::max(BigUint::one() << (bits - 1), BigUint::from(MIN_PRIME));
    let hi = BigUint::one() << bits;
    loop {
        let mut candidate = rng.gen_biguint_range(&lo, &hi);
        candidate.set_bit(0, true);
        if candidate >= hi {
            continue;
        }
        if is_probable_prime(&candidate) {
            return Ok(Prime(candidate));
        }
    }
}

/// Trial division below 2^16, trial division plus 40 Miller-Rabin rounds
/// above. Witnesses come from a generator seeded by the candidate itself,
/// so the verdict is reproducible.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64().filter(|&v| v < TRIAL_DIVISION_LIMIT) {
        return is_prime_trial(small);
    }
    for &sp in SMALL_PRIMES.iter() {
        if (n % sp).is_zero() {
            return false;
        }
    }
    miller_rabin(n, MILLER_RABIN_ROUNDS)
}

fn is_prime_trial(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn miller_rabin(n: &BigUint, rounds: usize) -> bool {
    let one = BigUint::one();
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut seed = [0u8; 32];
    let bytes = n.to_bytes_le();
    for (i, b) in bytes.iter().enumerate() {
        seed[i % 32] ^= b.rotate_left((i / 32) as u32);
    }
    let mut rng = ChaCha20Rng::from_seed(seed);

    let two = BigUint::from(2u32);
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Lowercase hexadecimal encoding shared by every file format in the crate.
pub mod hex {
    use super::*;

    pub fn encode(x: &BigUint) -> String {
        format!("{x:x}")
    }

    /// Strict inverse of [`encode`]: rejects uppercase digits, prefixes,
    /// and leading zeros so that every value has exactly one spelling.
    pub fn decode(s: &str) -> Result<BigUint, ModMathError> {
        let canonical = !s.is_empty()
            && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
            && (s == "0" || !s.starts_with('0'));
        if !canonical {
            return Err(ModMathError::BadHex(s.to_string()));
        }
        BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| ModMathError::BadHex(s.to_string()))
    }

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => s.serialize_some(&encode(v)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| decode(&s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn p23() -> Prime {
        Prime::new(23u32.into()).unwrap()
    }

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn naive_pow(base: u64, exp: u64, m: u64) -> u64 {
        let mut acc = 1 % m;
        for _ in 0..exp {
            acc = acc * base % m;
        }
        acc
    }

    #[test]
    fn mod_pow_examples() {
        let p = p23();
        for x in 1..23 {
            assert_eq!(mod_pow(&big(x), &big(0), &p), big(1));
        }
        assert_eq!(mod_pow(&big(2), &big(22), &p), big(1));
        assert_eq!(mod_pow(&big(5), &big(3), &p), big(10));
    }

    #[test]
    fn mod_pow_matches_repeated_multiplication() {
        let p = p23();
        for base in 0..23u64 {
            for exp in 0..=50u64 {
                assert_eq!(
                    mod_pow(&big(base), &big(exp), &p),
                    big(naive_pow(base, exp, 23)),
                    "{base}^{exp}"
                );
            }
        }
    }

    #[test]
    #[should_panic(expected = "reduced below the modulus")]
    fn mod_pow_rejects_unreduced_base() {
        mod_pow(&big(23), &big(2), &p23());
    }

    #[test]
    fn fermat_holds_on_small_prime() {
        let p = p23();
        for a in 1..23 {
            assert!(mod_pow(&big(a), &p.group_order(), &p).is_one());
        }
    }

    #[test]
    fn mod_inv_examples() {
        let p = p23();
        assert_eq!(mod_inv(&big(1), &p).unwrap(), big(1));
        assert_eq!(mod_inv(&big(4), &p).unwrap(), big(6));
        assert_eq!(mod_inv(&big(0), &p), Err(ModMathError::ZeroNotInvertible));
    }

    #[test]
    fn mod_inv_matches_exhaustive_search() {
        let p = p23();
        for a in 1..23u64 {
            let expected = (1..23u64).find(|b| a * b % 23 == 1).unwrap();
            assert_eq!(mod_inv(&big(a), &p).unwrap(), big(expected));
        }
    }

    #[test]
    fn exp_inv_examples() {
        assert_eq!(exp_inv(&big(1), &big(22)).unwrap(), big(1));
        assert_eq!(exp_inv(&big(3), &big(22)).unwrap(), big(15));
        assert_eq!(exp_inv(&big(2), &big(22)), Err(ModMathError::NotCoprime));
        assert_eq!(exp_inv(&big(11), &big(22)), Err(ModMathError::NotCoprime));
    }

    #[test]
    fn exponent_inverse_undoes_power_on_small_prime() {
        let p = p23();
        let n = p.group_order();
        for k in 1..22u64 {
            let Ok(k_inv) = exp_inv(&big(k), &n) else {
                assert!(num_integer::gcd(k, 22) != 1);
                continue;
            };
            for x in 1..23u64 {
                let y = mod_pow(&big(x), &big(k), &p);
                assert_eq!(mod_pow(&y, &k_inv, &p), big(x), "x={x} k={k}");
            }
        }
    }

    #[test]
    fn sample_exponent_is_reproducible_and_covers_range() {
        let p = p23();
        let a: Vec<_> = {
            let mut rng = seeded(7);
            (0..32).map(|_| sample_exponent(&p, &mut rng)).collect()
        };
        let b: Vec<_> = {
            let mut rng = seeded(7);
            (0..32).map(|_| sample_exponent(&p, &mut rng)).collect()
        };
        assert_eq!(a, b);
        let c: Vec<_> = {
            let mut rng = seeded(8);
            (0..32).map(|_| sample_exponent(&p, &mut rng)).collect()
        };
        assert_ne!(a, c);

        let mut counts = [0u32; 23];
        let mut rng = seeded(1);
        for _ in 0..10_000 {
            let r = sample_exponent(&p, &mut rng).to_usize().unwrap();
            assert!((1..=21).contains(&r));
            counts[r] += 1;
        }
        // chi-square against uniform over 21 classes, 20 dof; 0.999 quantile is 45.3
        let expected = 10_000.0 / 21.0;
        let chi2: f64 = counts[1..=21]
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(counts[1..=21].iter().all(|&c| c > 0));
        assert!(chi2 < 45.3, "chi2 = {chi2}");
    }

    fn trial_division_oracle(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn gen_prime_bit_lengths() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let p = gen_prime(5, &mut rng).unwrap();
            let v = p.value().to_u64().unwrap();
            assert!((17..=31).contains(&v) && [23, 29, 31].contains(&v));
        }
        let p = gen_prime(64, &mut rng).unwrap();
        assert_eq!(p.bits(), 64);
        let v = p.value().to_u64().unwrap();
        // no factor below 10^6, and the bignum Fermat test agrees
        assert!((2..1_000_000u64).all(|d| !v.is_multiple_of(d)));
        assert!(big(2).modpow(&big(v - 1), &big(v)).is_one());
        assert_eq!(gen_prime(4, &mut rng), Err(ModMathError::BitLengthTooSmall(4)));
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        for n in 0..5000u64 {
            assert_eq!(is_probable_prime(&big(n)), trial_division_oracle(n), "{n}");
        }
        for n in (1u64 << 16) - 50..(1u64 << 16) + 5000 {
            assert_eq!(is_probable_prime(&big(n)), trial_division_oracle(n), "{n}");
        }
        // Carmichael numbers
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265, 321197185] {
            assert!(!is_probable_prime(&big(n)));
        }
        assert!(is_probable_prime(&big((1u64 << 61) - 1)));
    }

    #[test]
    fn prime_constructor_enforces_invariants() {
        assert_eq!(Prime::new(big(19)), Err(ModMathError::PrimeTooSmall));
        assert_eq!(Prime::new(big(25)), Err(ModMathError::NotPrime));
        assert!(Prime::new(big(23)).is_ok());
    }

    #[test]
    fn hex_is_canonical() {
        assert_eq!(hex::encode(&big(0)), "0");
        assert_eq!(hex::encode(&big(0xabc)), "abc");
        assert_eq!(hex::decode("abc").unwrap(), big(0xabc));
        for bad in ["", "0abc", "ABC", "0x1", "g", "-1", " 1"] {
            assert!(hex::decode(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn hex_round_trips(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let x = BigUint::from_bytes_be(&bytes);
            prop_assert_eq!(hex::decode(&hex::encode(&x)).unwrap(), x);
        }

        #[test]
        fn mod_pow_agrees_with_library(base in any::<u64>(), exp in any::<u64>()) {
            let p = Prime::new(big((1u64 << 61) - 1)).unwrap();
            let b = big(base) % p.value();
            prop_assert_eq!(mod_pow(&b, &big(exp), &p), b.modpow(&big(exp), p.value()));
        }

        #[test]
        fn mod_inv_is_an_inverse(a in 1u64..((1u64 << 61) - 1)) {
            let p = Prime::new(big((1u64 << 61) - 1)).unwrap();
            let inv = mod_inv(&big(a), &p).unwrap();
            prop_assert!((big(a) * inv % p.value()).is_one());
        }
    }
}
