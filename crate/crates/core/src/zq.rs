//! Exact modular linear algebra over Z_q.
//!
//! Vectors, 1×n row vectors, and m×n matrices with every element kept as
//! its canonical representative in `[0, q)`. These are the only arithmetic
//! objects the scheme needs: key material lives in `Z_q^m`, public values
//! in `Z_q^{1×n}`, and every phase reduces to row-vector/matrix products,
//! componentwise sums, and scalar multiples.
//!
//! All operations are pure; values are immutable after construction and
//! safe to share across threads. Sampling is the only stateful entry point
//! and takes an exclusive RNG handle.

use rand::RngCore;

use crate::error::ZqError;

/// A validated prime modulus `3 <= q < 2^16`.
///
/// The type is runtime-generic so the same code serves the 123-bit
/// parameter set (`q = 101`) and tiny test profiles (`q = 7`). The
/// 16-bit ceiling keeps every accumulated inner product inside u64
/// without intermediate reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus(u32);

impl Modulus {
    pub const MAX: u32 = u16::MAX as u32;

    pub fn new(q: u32) -> Result<Self, ZqError> {
        if !(3..=Self::MAX).contains(&q) || !is_prime(q) {
            return Err(ZqError::InvalidModulus(q));
        }
        Ok(Self(q))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Bits needed to represent `q - 1`; the packed width of one element.
    pub fn elem_bits(self) -> u32 {
        32 - (self.0 - 1).leading_zeros()
    }

    /// Bytes needed to hold one element in byte-aligned encodings.
    pub fn elem_bytes(self) -> usize {
        self.elem_bits().div_ceil(8) as usize
    }

    pub fn reduce_u64(self, v: u64) -> u32 {
        (v % u64::from(self.0)) as u32
    }

    /// Canonical additive inverse.
    pub fn neg(self, a: u32) -> u32 {
        debug_assert!(a < self.0);
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    fn check(self, other: Modulus) -> Result<(), ZqError> {
        if self != other {
            return Err(ZqError::Modulus {
                left: self.0,
                right: other.0,
            });
        }
        Ok(())
    }

    /// Draws one uniform element in `[0, q)` by rejection sampling.
    ///
    /// Reads `elem_bytes` big-endian bytes per attempt and rejects values
    /// at or above the largest multiple of `q`, so no modulo bias enters.
    pub fn sample_uniform(self, rng: &mut dyn RngCore) -> u32 {
        let width = self.elem_bytes();
        let space = 1u64 << (8 * width);
        let limit = space / u64::from(self.0) * u64::from(self.0);
        let mut buf = [0u8; 4];
        loop {
            rng.fill_bytes(&mut buf[..width]);
            let mut v = 0u64;
            for &b in &buf[..width] {
                v = v << 8 | u64::from(b);
            }
            if v < limit {
                return self.reduce_u64(v);
            }
        }
    }

    /// Draws one uniform element in `[1, q)`.
    pub fn sample_nonzero(self, rng: &mut dyn RngCore) -> u32 {
        loop {
            let v = self.sample_uniform(rng);
            if v != 0 {
                return v;
            }
        }
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u32;
    while u64::from(d) * u64::from(d) <= u64::from(n) {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A column vector in `Z_q^len` (secret keys, nonces, signatures).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZqVec {
    q: Modulus,
    elems: Vec<u32>,
}

/// A row vector in `Z_q^{1×len}` (public keys and commitments `v^T A`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZqRowVec {
    q: Modulus,
    elems: Vec<u32>,
}

/// A row-major matrix in `Z_q^{rows×cols}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZqMatrix {
    q: Modulus,
    rows: usize,
    cols: usize,
    elems: Vec<u32>,
}

macro_rules! vec_common {
    ($ty:ident) => {
        impl $ty {
            /// Wraps raw elements, reducing each into `[0, q)`.
            pub fn from_elems(q: Modulus, elems: impl IntoIterator<Item = u32>) -> Self {
                Self {
                    q,
                    elems: elems.into_iter().map(|e| e % q.get()).collect(),
                }
            }

            pub fn zero(q: Modulus, len: usize) -> Self {
                Self {
                    q,
                    elems: vec![0; len],
                }
            }

            /// Uniform vector via per-element rejection sampling;
            /// deterministic under a seeded RNG.
            pub fn sample_uniform(q: Modulus, len: usize, rng: &mut dyn RngCore) -> Self {
                Self {
                    q,
                    elems: (0..len).map(|_| q.sample_uniform(rng)).collect(),
                }
            }

            pub fn len(&self) -> usize {
                self.elems.len()
            }

            pub fn is_empty(&self) -> bool {
                self.elems.is_empty()
            }

            pub fn modulus(&self) -> Modulus {
                self.q
            }

            pub fn elems(&self) -> &[u32] {
                &self.elems
            }

            /// Componentwise sum mod q.
            pub fn add(&self, other: &Self) -> Result<Self, ZqError> {
                self.q.check(other.q)?;
                if self.len() != other.len() {
                    return Err(ZqError::Dimension {
                        expected: self.len(),
                        got: other.len(),
                    });
                }
                let q = self.q.get();
                Ok(Self {
                    q: self.q,
                    elems: self
                        .elems
                        .iter()
                        .zip(&other.elems)
                        .map(|(&a, &b)| (a + b) % q)
                        .collect(),
                })
            }

            /// Componentwise scalar multiple `c·v` mod q.
            pub fn scale(&self, c: u32) -> Self {
                debug_assert!(c < self.q.get(), "scalar not reduced mod q");
                Self {
                    q: self.q,
                    elems: self
                        .elems
                        .iter()
                        .map(|&a| self.q.reduce_u64(u64::from(a) * u64::from(c)))
                        .collect(),
                }
            }

            /// In-place componentwise `self += v` mod q.
            pub fn add_assign(&mut self, v: &Self) -> Result<(), ZqError> {
                self.q.check(v.q)?;
                if self.len() != v.len() {
                    return Err(ZqError::Dimension {
                        expected: self.len(),
                        got: v.len(),
                    });
                }
                let q = self.q.get();
                for (a, &b) in self.elems.iter_mut().zip(&v.elems) {
                    *a = (*a + b) % q;
                }
                Ok(())
            }

            /// In-place `self += c·v` mod q; the accumulator core of
            /// batch aggregation.
            pub fn add_scaled_assign(&mut self, c: u32, v: &Self) -> Result<(), ZqError> {
                self.q.check(v.q)?;
                if self.len() != v.len() {
                    return Err(ZqError::Dimension {
                        expected: self.len(),
                        got: v.len(),
                    });
                }
                let q = self.q;
                for (a, &b) in self.elems.iter_mut().zip(&v.elems) {
                    *a = q.reduce_u64(u64::from(*a) + u64::from(b) * u64::from(c));
                }
                Ok(())
            }

            /// Minimal big-endian byte encoding, `elem_bytes` per element.
            pub fn to_bytes(&self) -> Vec<u8> {
                let w = self.q.elem_bytes();
                let mut out = Vec::with_capacity(self.len() * w);
                for &e in &self.elems {
                    out.extend_from_slice(&e.to_be_bytes()[4 - w..]);
                }
                out
            }
        }
    };
}

vec_common!(ZqVec);
vec_common!(ZqRowVec);

impl ZqVec {
    /// Row-vector/matrix product `v^T A ∈ Z_q^{1×n}`.
    ///
    /// `result[j] = Σ_i v[i]·A[i][j] mod q`, computed with a u64
    /// accumulator so no intermediate reduction is needed.
    pub fn row_mul(&self, a: &ZqMatrix) -> Result<ZqRowVec, ZqError> {
        self.q.check(a.q)?;
        if self.len() != a.rows {
            return Err(ZqError::Dimension {
                expected: a.rows,
                got: self.len(),
            });
        }
        let mut out = vec![0u32; a.cols];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = 0u64;
            for (i, &v) in self.elems.iter().enumerate() {
                acc += u64::from(v) * u64::from(a.elems[i * a.cols + j]);
            }
            *slot = self.q.reduce_u64(acc);
        }
        Ok(ZqRowVec {
            q: self.q,
            elems: out,
        })
    }
}

impl ZqMatrix {
    pub fn from_rows(q: Modulus, rows: &[Vec<u32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let elems = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), cols, "ragged matrix rows");
                r.iter().map(|&e| e % q.get())
            })
            .collect();
        Self {
            q,
            rows: rows.len(),
            cols,
            elems,
        }
    }

    /// Uniform matrix sampled row-major, element by element.
    pub fn sample_uniform(q: Modulus, rows: usize, cols: usize, rng: &mut dyn RngCore) -> Self {
        Self {
            q,
            rows,
            cols,
            elems: (0..rows * cols).map(|_| q.sample_uniform(rng)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> Modulus {
        self.q
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.elems[row * self.cols + col]
    }

    pub fn elems(&self) -> &[u32] {
        &self.elems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngCore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn q(v: u32) -> Modulus {
        Modulus::new(v).unwrap()
    }

    /// Independent triple-loop oracle in i64 arithmetic.
    fn naive_row_mul(v: &[u32], a: &ZqMatrix) -> Vec<u32> {
        let qq = i64::from(a.modulus().get());
        (0..a.cols())
            .map(|j| {
                let mut acc = 0i64;
                for (i, &vi) in v.iter().enumerate() {
                    acc = (acc + i64::from(vi) * i64::from(a.get(i, j))) % qq;
                }
                acc as u32
            })
            .collect()
    }

    #[test]
    fn modulus_rejects_composites_and_out_of_range() {
        assert!(Modulus::new(101).is_ok());
        assert!(Modulus::new(7).is_ok());
        assert!(Modulus::new(65521).is_ok());
        assert_eq!(Modulus::new(100), Err(ZqError::InvalidModulus(100)));
        assert_eq!(Modulus::new(2), Err(ZqError::InvalidModulus(2)));
        assert_eq!(Modulus::new(0), Err(ZqError::InvalidModulus(0)));
        // primes above the 16-bit ceiling are out of contract
        assert_eq!(Modulus::new(65537), Err(ZqError::InvalidModulus(65537)));
    }

    #[test]
    fn elem_widths() {
        assert_eq!(q(101).elem_bits(), 7);
        assert_eq!(q(101).elem_bytes(), 1);
        assert_eq!(q(7).elem_bits(), 3);
        assert_eq!(q(7).elem_bytes(), 1);
        assert_eq!(q(257).elem_bits(), 9);
        assert_eq!(q(257).elem_bytes(), 2);
    }

    #[test]
    fn row_mul_zero_annihilates() {
        let m = q(7);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = ZqMatrix::sample_uniform(m, 5, 3, &mut rng);
        let z = ZqVec::zero(m, 5);
        assert_eq!(z.row_mul(&a).unwrap(), ZqRowVec::zero(m, 3));
    }

    #[test]
    fn row_mul_hand_example() {
        // q=7, v=(1,2), A=[[1,0,3],[2,1,1]] -> (5,2,5)
        let m = q(7);
        let v = ZqVec::from_elems(m, [1, 2]);
        let a = ZqMatrix::from_rows(m, &[vec![1, 0, 3], vec![2, 1, 1]]);
        let r = v.row_mul(&a).unwrap();
        assert_eq!(r.elems(), &[5, 2, 5]);
        assert_eq!(r.elems(), naive_row_mul(v.elems(), &a).as_slice());
    }

    #[test]
    fn row_mul_basis_vector_selects_row() {
        let m = q(101);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = ZqMatrix::sample_uniform(m, 4, 6, &mut rng);
        let e1 = ZqVec::from_elems(m, [1, 0, 0, 0]);
        let r = e1.row_mul(&a).unwrap();
        let first_row: Vec<u32> = (0..6).map(|j| a.get(0, j)).collect();
        assert_eq!(r.elems(), first_row.as_slice());
    }

    #[test]
    fn row_mul_matches_oracle_on_random_instances() {
        let m = q(7);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let rows = 1 + (rng.next_u32() % 8) as usize;
            let cols = 1 + (rng.next_u32() % 8) as usize;
            let a = ZqMatrix::sample_uniform(m, rows, cols, &mut rng);
            let v = ZqVec::sample_uniform(m, rows, &mut rng);
            assert_eq!(
                v.row_mul(&a).unwrap().elems(),
                naive_row_mul(v.elems(), &a).as_slice()
            );
        }
    }

    #[test]
    fn row_mul_dimension_and_modulus_errors() {
        let m = q(7);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = ZqMatrix::sample_uniform(m, 5, 3, &mut rng);
        let bad_len = ZqVec::zero(m, 4);
        assert_eq!(
            bad_len.row_mul(&a),
            Err(ZqError::Dimension {
                expected: 5,
                got: 4
            })
        );
        let bad_q = ZqVec::zero(q(101), 5);
        assert_eq!(
            bad_q.row_mul(&a),
            Err(ZqError::Modulus {
                left: 101,
                right: 7
            })
        );
    }

    #[test]
    fn add_identity_and_wraparound() {
        let m = q(7);
        let u = ZqVec::from_elems(m, [6, 6]);
        let v = ZqVec::from_elems(m, [1, 2]);
        assert_eq!(u.add(&v).unwrap().elems(), &[0, 1]);
        let z = ZqVec::zero(m, 2);
        assert_eq!(u.add(&z).unwrap(), u);
    }

    #[test]
    fn add_matches_componentwise_oracle() {
        let m = q(101);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let u = ZqVec::sample_uniform(m, 40, &mut rng);
        let v = ZqVec::sample_uniform(m, 40, &mut rng);
        let s = u.add(&v).unwrap();
        for i in 0..40 {
            assert_eq!(s.elems()[i], (u.elems()[i] + v.elems()[i]) % 101);
        }
    }

    #[test]
    fn scale_edge_cases_and_oracle() {
        let m = q(7);
        let v = ZqVec::from_elems(m, [2, 5]);
        assert_eq!(v.scale(0), ZqVec::zero(m, 2));
        assert_eq!(v.scale(1), v);
        assert_eq!(v.scale(3).elems(), &[6, 1]);
    }

    #[test]
    fn add_scaled_assign_matches_add_of_scale() {
        let m = q(101);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut acc = ZqVec::sample_uniform(m, 30, &mut rng);
        let v = ZqVec::sample_uniform(m, 30, &mut rng);
        let expected = acc.add(&v.scale(77)).unwrap();
        acc.add_scaled_assign(77, &v).unwrap();
        assert_eq!(acc, expected);
    }

    #[test]
    fn sampling_is_deterministic_under_fixed_seed() {
        let m = q(101);
        let a = ZqVec::sample_uniform(m, 64, &mut ChaCha20Rng::seed_from_u64(9));
        let b = ZqVec::sample_uniform(m, 64, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_empty_vector() {
        let m = q(101);
        let v = ZqVec::sample_uniform(m, 0, &mut ChaCha20Rng::seed_from_u64(9));
        assert!(v.is_empty());
    }

    #[test]
    fn sample_uniform_chi_squared() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let m = q(101);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let draws = 100_000usize;
        let mut counts = [0u64; 101];
        for _ in 0..draws {
            counts[m.sample_uniform(&mut rng) as usize] += 1;
        }
        let expected = draws as f64 / 101.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let dist = ChiSquared::new(100.0).unwrap();
        let p = 1.0 - dist.cdf(stat);
        assert!(p > 0.001, "chi-squared stat {stat}, p {p}");
    }

    #[test]
    fn sample_nonzero_never_zero() {
        let m = q(7);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let v = m.sample_nonzero(&mut rng);
            assert!((1..7).contains(&v));
        }
    }

    fn arb_instance(qv: u32) -> impl Strategy<Value = (ZqMatrix, ZqVec, ZqVec, u32)> {
        (1usize..6, 1usize..6).prop_flat_map(move |(rows, cols)| {
            let m = q(qv);
            (
                proptest::collection::vec(0u32..qv, rows * cols),
                proptest::collection::vec(0u32..qv, rows),
                proptest::collection::vec(0u32..qv, rows),
                0u32..qv,
            )
                .prop_map(move |(ae, ue, ve, c)| {
                    let a = ZqMatrix {
                        q: m,
                        rows,
                        cols,
                        elems: ae,
                    };
                    (a, ZqVec::from_elems(m, ue), ZqVec::from_elems(m, ve), c)
                })
        })
    }

    proptest! {
        #[test]
        fn row_mul_is_linear_q7((a, u, v, _c) in arb_instance(7)) {
            let lhs = u.add(&v).unwrap().row_mul(&a).unwrap();
            let rhs = u.row_mul(&a).unwrap().add(&v.row_mul(&a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn row_mul_is_linear_q101((a, u, v, _c) in arb_instance(101)) {
            let lhs = u.add(&v).unwrap().row_mul(&a).unwrap();
            let rhs = u.row_mul(&a).unwrap().add(&v.row_mul(&a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn row_mul_commutes_with_scaling((a, _u, v, c) in arb_instance(101)) {
            let lhs = v.scale(c).row_mul(&a).unwrap();
            let rhs = v.row_mul(&a).unwrap().scale(c);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn results_stay_reduced((a, u, v, c) in arb_instance(101)) {
            let r = u.add(&v).unwrap().scale(c).row_mul(&a).unwrap();
            prop_assert!(r.elems().iter().all(|&e| e < 101));
        }
    }
}
