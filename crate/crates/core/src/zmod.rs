//! Arithmetic in Z/p^k for a small prime p and exponent k, with p-adic
//! valuation bookkeeping. Values are stored as `u64` residues in `[0, p^k)`.

/// The ring Z/p^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    p: u64,
    k: u32,
    pk: u64,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// p^e, checked against u64 overflow.
pub fn checked_pow(p: u64, e: u32) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..e {
        acc = acc.checked_mul(p)?;
    }
    Some(acc)
}

impl Modulus {
    /// Panics if p^k overflows u64; callers validate p prime and k >= 1.
    pub fn new(p: u64, k: u32) -> Modulus {
        let pk = checked_pow(p, k).expect("p^k must fit in u64");
        Modulus { p, k, pk }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn exponent(&self) -> u32 {
        self.k
    }

    pub fn order(&self) -> u64 {
        self.pk
    }

    pub fn reduce(&self, x: u64) -> u64 {
        x % self.pk
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        let m = self.pk as i128;
        (((x % m) + m) % m) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.pk && b < self.pk);
        let s = a + b;
        if s >= self.pk {
            s - self.pk
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.pk && b < self.pk);
        if a >= b {
            a - b
        } else {
            a + self.pk - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.pk - (a % self.pk)
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        // every modulus in use is far below 2^32, so the product fits u64
        if self.pk <= u32::MAX as u64 {
            a * b % self.pk
        } else {
            ((a as u128 * b as u128) % self.pk as u128) as u64
        }
    }

    /// p-adic valuation of `x` in Z/p^k; `k` for x == 0.
    pub fn val(&self, x: u64) -> u32 {
        if x % self.pk == 0 {
            return self.k;
        }
        let mut x = x % self.pk;
        let mut v = 0;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_unit(&self, x: u64) -> bool {
        x % self.p != 0
    }

    /// Inverse of a unit, by lifting the Fermat inverse mod p with Newton
    /// iteration (Hensel).
    pub fn inv(&self, x: u64) -> u64 {
        assert!(self.is_unit(x), "inverse of a non-unit mod p^k");
        let x = x % self.pk;
        // inverse mod p by exponentiation
        let mut inv = pow_mod(x % self.p, self.p - 2, self.p);
        if self.p == 2 {
            inv = 1; // units mod 2 are 1
        }
        // Newton: inv <- inv * (2 - x*inv), doubling the precision each step
        let mut modulus = self.p;
        while modulus < self.pk {
            modulus = modulus.saturating_mul(modulus).min(self.pk);
            let m = modulus as u128;
            let prod = (x as u128 % m) * (inv as u128 % m) % m;
            let two_minus = (2 + m - prod % m) % m;
            inv = ((inv as u128 * two_minus) % m) as u64;
        }
        inv % self.pk
    }

    /// Exact division by p^v. Requires p^v | x; the result is the canonical
    /// representative in [0, p^(k-v)) of x / p^v.
    pub fn div_pow_p(&self, x: u64, v: u32) -> u64 {
        let pv = checked_pow(self.p, v).expect("p^v fits");
        let x = x % self.pk;
        assert!(x % pv == 0, "inexact division by p^{v}");
        x / pv
    }

    pub fn pow(&self, x: u64, e: u64) -> u64 {
        pow_mod(x % self.pk, e, self.pk)
    }
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc: u128 = 1;
    let mm = m as u128;
    let mut bb = b as u128 % mm;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * bb % mm;
        }
        bb = bb * bb % mm;
        e >>= 1;
    }
    acc as u64
}
