//! The finite groups `SL2(Z/qZ)` for square-free `q`.

use super::CongruenceError;
use crate::geometry::MobiusMap;
use std::collections::HashMap;

/// Upper limit on `#SL2(Z/q)`.
pub const MAX_ORDER: u128 = 1_000_000;
/// Groups up to this order keep a full multiplication table.
const MAX_TABLE_ORDER: usize = 3000;

/// Element index into a [`GroupModQ`] table.
pub type Elem = u32;

/// Prime factors of `q`, or `None` when `q` is not square-free.
pub fn squarefree_factors(q: u64) -> Option<Vec<u64>> {
    let mut primes = Vec::new();
    let mut n = q;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return None;
            }
            primes.push(p);
        }
        p += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    Some(primes)
}

/// `q^3 prod (1 - p^-2)` for square-free `q`.
pub fn sl2_order(q: u64) -> u128 {
    let primes = squarefree_factors(q).unwrap_or_default();
    primes.iter().map(|&p| p as u128 * (p as u128 * p as u128 - 1)).product()
}

/// All divisors of a square-free number, in increasing order.
pub fn divisors(q: u64) -> Vec<u64> {
    let mut d: Vec<u64> = (1..=q).filter(|k| q.is_multiple_of(*k)).collect();
    d.sort_unstable();
    d
}

/// Multiplication table-free model of `SL2(Z/q)`: elements are enumerated in
/// lexicographic order of `(a, b, c, d)` and looked up through a hash map.
#[derive(Debug, Clone)]
pub struct GroupModQ {
    pub q: u64,
    pub primes: Vec<u64>,
    elements: Vec<[u32; 4]>,
    index: HashMap<u64, Elem>,
    inverse: Vec<Elem>,
    identity: Elem,
    /// Full multiplication table for small groups.
    table: Option<Vec<Elem>>,
}

impl GroupModQ {
    pub fn new(q: u64) -> Result<Self, CongruenceError> {
        Self::avoiding(q, &[])
    }

    /// Like [`GroupModQ::new`] but rejects levels divisible by a bad prime.
    pub fn avoiding(q: u64, bad_primes: &[u64]) -> Result<Self, CongruenceError> {
        if q == 0 {
            return Err(CongruenceError::NotSquareFree(q));
        }
        let primes = squarefree_factors(q).ok_or(CongruenceError::NotSquareFree(q))?;
        if let Some(&p) = primes.iter().find(|p| bad_primes.contains(p)) {
            return Err(CongruenceError::BadPrime(p));
        }
        let order = sl2_order(q);
        if order > MAX_ORDER {
            return Err(CongruenceError::TooLarge(q, order));
        }
        let mut elements = Vec::with_capacity(order as usize);
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    for d in 0..q {
                        if (a * d + q * q - (b * c) % q) % q == 1 % q {
                            elements.push([a as u32, b as u32, c as u32, d as u32]);
                        }
                    }
                }
            }
        }
        let index: HashMap<u64, Elem> =
            elements.iter().enumerate().map(|(i, e)| (Self::code(q, e), i as Elem)).collect();
        let mut g = GroupModQ { q, primes, elements, index, inverse: Vec::new(), identity: 0, table: None };
        g.identity = g.lookup(&[1 % q as u32, 0, 0, 1 % q as u32]).expect("identity present");
        g.inverse = (0..g.order())
            .map(|i| {
                let [a, b, c, d] = g.elements[i];
                let neg = |x: u32| (q as u32 - x) % q as u32;
                g.lookup(&[d, neg(b), neg(c), a]).expect("inverse present")
            })
            .collect();
        let n = g.order();
        if n <= MAX_TABLE_ORDER {
            let mut table = Vec::with_capacity(n * n);
            for x in 0..n as Elem {
                for y in 0..n as Elem {
                    table.push(g.mul_slow(x, y));
                }
            }
            g.table = Some(table);
        }
        Ok(g)
    }

    fn code(q: u64, e: &[u32; 4]) -> u64 {
        ((e[0] as u64 * q + e[1] as u64) * q + e[2] as u64) * q + e[3] as u64
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn identity(&self) -> Elem {
        self.identity
    }

    pub fn element(&self, i: Elem) -> [u32; 4] {
        self.elements[i as usize]
    }

    pub fn lookup(&self, e: &[u32; 4]) -> Option<Elem> {
        self.index.get(&Self::code(self.q, e)).copied()
    }

    pub fn inv(&self, x: Elem) -> Elem {
        self.inverse[x as usize]
    }

    pub fn mul(&self, x: Elem, y: Elem) -> Elem {
        match &self.table {
            Some(t) => t[x as usize * self.order() + y as usize],
            None => self.mul_slow(x, y),
        }
    }

    fn mul_slow(&self, x: Elem, y: Elem) -> Elem {
        let q = self.q;
        let [a, b, c, d] = self.elements[x as usize].map(|v| v as u64);
        let [e, f, g, h] = self.elements[y as usize].map(|v| v as u64);
        let r = [(a * e + b * g) % q, (a * f + b * h) % q, (c * e + d * g) % q, (c * f + d * h) % q];
        self.lookup(&r.map(|v| v as u32)).expect("closed under multiplication")
    }

    /// Reduction of an integer matrix of determinant one.
    pub fn reduce(&self, m: &MobiusMap) -> Elem {
        let q = self.q as i64;
        let r = [m.a, m.b, m.c, m.d].map(|v| v.rem_euclid(q) as u32);
        self.lookup(&r).expect("determinant-one matrices reduce into SL2")
    }

    /// Index of the image of every element under reduction to a divisor level.
    pub fn reduction_map(&self, coarse: &GroupModQ) -> Result<Vec<Elem>, CongruenceError> {
        if !self.q.is_multiple_of(coarse.q) {
            return Err(CongruenceError::ModulusMismatch(self.q, coarse.q));
        }
        let p = coarse.q as u32;
        Ok(self
            .elements
            .iter()
            .map(|e| coarse.lookup(&e.map(|v| v % p)).expect("reduction is onto"))
            .collect())
    }

    /// Permutation `g -> g h` of element indices.
    pub fn right_mul_perm(&self, h: Elem) -> Vec<Elem> {
        (0..self.order() as Elem).map(|g| self.mul(g, h)).collect()
    }
}
