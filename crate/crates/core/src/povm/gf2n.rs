//! Arithmetic in GF(2^n), n <= 4, in the polynomial basis.

/// Binary extension field with elements stored as coefficient bit masks
/// (bit `i` is the coefficient of `x^i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf2n {
    degree: u32,
    modulus: u32,
}

impl Gf2n {
    /// Field of order `2^degree`. The modulus is a fixed primitive polynomial.
    pub fn new(degree: u32) -> Option<Self> {
        let modulus = match degree {
            1 => 0b11,     // x + 1
            2 => 0b111,    // x^2 + x + 1
            3 => 0b1011,   // x^3 + x + 1
            4 => 0b10011,  // x^4 + x + 1
            _ => return None,
        };
        Some(Self { degree, modulus })
    }

    /// Field with `order` elements, if supported.
    pub fn with_order(order: usize) -> Option<Self> {
        if !order.is_power_of_two() || order < 2 {
            return None;
        }
        Self::new(order.trailing_zeros())
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn order(&self) -> u32 {
        1 << self.degree
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        a ^ b
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        let mut acc = 0u32;
        let mut a = a;
        let mut b = b;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & (1 << self.degree) != 0 {
                a ^= self.modulus;
            }
        }
        acc
    }

    /// Absolute trace `a + a^2 + ... + a^(2^(n-1))`, either 0 or 1.
    pub fn trace(&self, a: u32) -> u32 {
        let mut t = 0;
        let mut p = a;
        for _ in 0..self.degree {
            t ^= p;
            p = self.mul(p, p);
        }
        debug_assert!(t <= 1);
        t
    }

    /// `x^i`
    pub fn basis_element(&self, i: u32) -> u32 {
        (0..i).fold(1, |acc, _| self.mul(acc, 0b10))
    }

    /// Coordinates of `mu` in the trace-dual basis: `b_i = Tr(x^i mu)`.
    pub fn dual_coordinates(&self, mu: u32) -> u32 {
        (0..self.degree).fold(0, |acc, i| acc | (self.trace(self.mul(self.basis_element(i), mu)) << i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicative_group_is_cyclic() {
        for n in 1..=4 {
            let f = Gf2n::new(n).unwrap();
            let q = f.order();
            // x (or 1 in GF(2)) generates every nonzero element
            let g = if n == 1 { 1 } else { 0b10 };
            let mut seen = std::collections::HashSet::new();
            let mut e = 1;
            for _ in 0..q - 1 {
                seen.insert(e);
                e = f.mul(e, g);
            }
            assert_eq!(seen.len() as u32, q - 1);
        }
    }

    #[test]
    fn field_axioms_gf16() {
        let f = Gf2n::new(4).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..16 {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                }
            }
            if a != 0 {
                assert!((1..16).any(|b| f.mul(a, b) == 1));
            }
        }
    }

    #[test]
    fn trace_is_balanced_and_nondegenerate() {
        let f = Gf2n::new(4).unwrap();
        let ones = (0..16).filter(|&a| f.trace(a) == 1).count();
        assert_eq!(ones, 8);
        // dual coordinates are a bijection
        let mut imgs: Vec<u32> = (0..16).map(|m| f.dual_coordinates(m)).collect();
        imgs.sort();
        assert_eq!(imgs, (0..16).collect::<Vec<_>>());
    }
}
