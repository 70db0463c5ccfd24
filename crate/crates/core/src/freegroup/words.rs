use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qcore::NO_PARTNER;

/// A reduced word in the free product of `s` copies of `Z_2`, packed four bits per
/// generator (generator `t` of the word at bits `4t..4t+4`, leftmost first) with the
/// length in the top four bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(u64);

impl Word {
    pub const MAX_LEN: usize = 15;
    pub const MAX_GENERATORS: usize = 16;

    pub const IDENTITY: Word = Word(0);

    /// Multiplies the generators left to right, cancelling adjacent repeats.
    pub fn reduce(symbols: &[u8]) -> Result<Word> {
        let mut stack: Vec<u8> = Vec::with_capacity(symbols.len());
        for &g in symbols {
            if usize::from(g) >= Self::MAX_GENERATORS {
                return Err(Error::InvalidConfig(format!("generator index {g} out of range")));
            }
            if stack.last() == Some(&g) {
                stack.pop();
            } else {
                stack.push(g);
            }
        }
        if stack.len() > Self::MAX_LEN {
            return Err(Error::InvalidConfig(format!(
                "reduced word of length {} exceeds {}",
                stack.len(),
                Self::MAX_LEN
            )));
        }
        let mut packed = (stack.len() as u64) << 60;
        for (t, &g) in stack.iter().enumerate() {
            packed |= u64::from(g) << (4 * t);
        }
        Ok(Word(packed))
    }

    pub fn generator(g: u8) -> Result<Word> {
        Self::reduce(&[g])
    }

    pub fn len(self) -> usize {
        (self.0 >> 60) as usize
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn symbol(self, t: usize) -> u8 {
        ((self.0 >> (4 * t)) & 0xF) as u8
    }

    pub fn symbols(self) -> Vec<u8> {
        (0..self.len()).map(|t| self.symbol(t)).collect()
    }

    pub fn first(self) -> Option<u8> {
        (!self.is_empty()).then(|| self.symbol(0))
    }

    pub fn packed(self) -> u64 {
        self.0
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Word {
    /// `e` for the identity, otherwise `g1g2...` with 1-based generator numbers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("e");
        }
        for g in self.symbols() {
            write!(f, "g{}", g + 1)?;
        }
        Ok(())
    }
}

/// The reduced form of `a b`.
pub fn word_multiply(a: Word, b: Word) -> Result<Word> {
    let mut all = a.symbols();
    all.extend(b.symbols());
    Word::reduce(&all)
}

/// All reduced words of length at most `max_len`, ordered by length and then
/// lexicographically, together with the partner tables of the left regular action.
#[derive(Clone, Debug)]
pub struct WordSpace {
    s: usize,
    max_len: usize,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    partners: Vec<Arc<[u32]>>,
}

/// Builds the word space of the free product of `s` copies of `Z_2` up to length
/// `max_len`.
pub fn enumerate(s: usize, max_len: usize) -> Result<WordSpace> {
    WordSpace::new(s, max_len)
}

impl WordSpace {
    pub fn new(s: usize, max_len: usize) -> Result<Self> {
        if !(2..=Word::MAX_GENERATORS).contains(&s) {
            return Err(Error::InvalidConfig(format!(
                "generator count must be in 2..={}, got {s}",
                Word::MAX_GENERATORS
            )));
        }
        if max_len > Word::MAX_LEN {
            return Err(Error::InvalidConfig(format!(
                "maximum word length must be at most {}, got {max_len}",
                Word::MAX_LEN
            )));
        }
        let mut counts = Vec::with_capacity(max_len + 1);
        let mut offsets = Vec::with_capacity(max_len + 2);
        let mut total: u64 = 0;
        for l in 0..=max_len {
            let c = if l == 0 {
                1u64
            } else {
                s as u64 * (s as u64 - 1).pow(l as u32 - 1)
            };
            offsets.push(total as usize);
            counts.push(c as usize);
            total += c;
            if total >= u64::from(NO_PARTNER) {
                return Err(Error::InvalidConfig(format!(
                    "{total} words exceed the 32-bit index range"
                )));
            }
        }
        offsets.push(total as usize);
        let mut space = Self {
            s,
            max_len,
            counts,
            offsets,
            partners: Vec::new(),
        };
        space.partners = (0..s)
            .map(|g| {
                let table: Vec<u32> = (0..space.len())
                    .into_par_iter()
                    .map(|idx| space.compute_partner(g, idx))
                    .collect();
                Arc::from(table)
            })
            .collect();
        Ok(space)
    }

    pub fn generators(&self) -> usize {
        self.s
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Total number of words.
    pub fn len(&self) -> usize {
        self.offsets[self.max_len + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn count_at(&self, l: usize) -> usize {
        self.counts.get(l).copied().unwrap_or(0)
    }

    /// Number of words of length at most `l`; these occupy indices `0..count_up_to(l)`.
    pub fn count_up_to(&self, l: usize) -> usize {
        self.offsets[l.min(self.max_len) + 1]
    }

    /// Length of the word with index `idx`.
    pub fn length_of(&self, idx: usize) -> usize {
        self.offsets.partition_point(|&o| o <= idx) - 1
    }

    fn radix_pow(&self, e: usize) -> usize {
        (self.s - 1).pow(e as u32)
    }

    /// Left multiplication by generator `g` in index form.
    fn compute_partner(&self, g: usize, idx: usize) -> u32 {
        let l = self.length_of(idx);
        if l == 0 {
            return if self.max_len >= 1 { (self.offsets[1] + g) as u32 } else { NO_PARTNER };
        }
        let r = idx - self.offsets[l];
        let base = self.radix_pow(l - 1);
        let a1 = r / base;
        let rest = r % base;
        if a1 == g {
            if l == 1 {
                return 0;
            }
            let base2 = self.radix_pow(l - 2);
            let d2 = rest / base2;
            let a2 = d2 + usize::from(d2 >= a1);
            (self.offsets[l - 1] + a2 * base2 + rest % base2) as u32
        } else if l == self.max_len {
            NO_PARTNER
        } else {
            let d1 = a1 - usize::from(a1 > g);
            (self.offsets[l + 1] + g * self.radix_pow(l) + d1 * base + rest) as u32
        }
    }

    pub fn word(&self, idx: usize) -> Word {
        let l = self.length_of(idx);
        let mut r = idx - self.offsets[l];
        let mut symbols = Vec::with_capacity(l);
        let mut prev: Option<usize> = None;
        for t in 0..l {
            let base = self.radix_pow(l - 1 - t);
            let d = r / base;
            r %= base;
            let a = match prev {
                None => d,
                Some(p) => d + usize::from(d >= p),
            };
            symbols.push(a as u8);
            prev = Some(a);
        }
        Word::reduce(&symbols).expect("enumerated words are reduced")
    }

    pub fn index_of(&self, w: Word) -> Option<usize> {
        let l = w.len();
        if l > self.max_len {
            return None;
        }
        let mut r = 0usize;
        let mut prev: Option<usize> = None;
        for t in 0..l {
            let a = usize::from(w.symbol(t));
            if a >= self.s {
                return None;
            }
            let d = match prev {
                None => a,
                Some(p) if p == a => return None,
                Some(p) => a - usize::from(a > p),
            };
            r = r * (self.s - 1) + d;
            prev = Some(a);
        }
        Some(self.offsets[l] + r)
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.len()).map(|i| self.word(i))
    }

    /// Partner table of `lambda(g)`: `lambda(g) e_w = e_partner[w]`, or
    /// [`NO_PARTNER`] when `g w` is longer than the maximum length.
    pub fn partner(&self, g: usize) -> &Arc<[u32]> {
        &self.partners[g]
    }

    /// `lambda(g) v` with words leaving the space dropped. The table is an involution
    /// where defined, so `(lambda(g) v)[u] = v[partner[u]]`.
    pub fn lambda_apply(&self, g: usize, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v.len(),
            });
        }
        if g >= self.s {
            return Err(Error::InvalidConfig(format!("generator {g} out of range")));
        }
        let table = &self.partners[g];
        Ok((0..v.len())
            .into_par_iter()
            .map(|u| match table[u] {
                NO_PARTNER => 0.0,
                p => v[p as usize],
            })
            .collect())
    }

    /// `sum_g lambda(g) v` compressed to the first `v.len()` words (a prefix
    /// `count_up_to(l)`); the result has the same length.
    pub fn generator_sum_apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        assert!(n <= self.len() && out.len() == n);
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let start = ci * CHUNK;
            for (o, slot) in chunk.iter_mut().enumerate() {
                let u = start + o;
                let mut acc = 0.0;
                for table in &self.partners {
                    let p = table[u] as usize;
                    if p < n {
                        acc += v[p];
                    }
                }
                *slot = acc;
            }
        });
    }
}

/// Work unit for parallel loops; fixed so that reductions do not depend on the
/// thread count.
pub(crate) const CHUNK: usize = 4096;

/// Sum of `f(i)` for `i in 0..n`, reduced in fixed chunks.
pub(crate) fn chunked_sum<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute_words(s: u8, max_len: usize) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for g in 0..s {
                    if w.last() != Some(&g) {
                        let mut x: Vec<u8> = w.clone();
                        x.push(g);
                        next.push(x);
                    }
                }
            }
            next.sort();
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn multiplication_reduces() {
        let g1 = Word::generator(0).unwrap();
        let g1g2 = Word::reduce(&[0, 1]).unwrap();
        assert_eq!(word_multiply(g1, g1g2).unwrap(), Word::generator(1).unwrap());
        let w = Word::reduce(&[0, 1, 2]).unwrap();
        let inv = Word::reduce(&[2, 1, 0]).unwrap();
        assert_eq!(word_multiply(w, inv).unwrap(), Word::IDENTITY);
        assert_eq!(w.to_string(), "g1g2g3");
        assert_eq!(Word::IDENTITY.to_string(), "e");
    }

    #[test]
    fn small_enumeration() {
        let space = enumerate(2, 2).unwrap();
        let names: Vec<String> = space.words().map(|w| w.to_string()).collect();
        assert_eq!(names, ["e", "g1", "g2", "g1g2", "g2g1"]);
    }

    #[test]
    fn counts_match_brute_force() {
        for (s, l) in [(2usize, 6usize), (3, 5), (5, 5)] {
            let space = enumerate(s, l).unwrap();
            let brute = brute_words(s as u8, l);
            assert_eq!(space.len(), brute.len());
            for (i, b) in brute.iter().enumerate() {
                let w = space.word(i);
                assert_eq!(&w.symbols(), b);
                assert_eq!(space.index_of(w), Some(i));
            }
            for len in 1..=l {
                assert_eq!(space.count_at(len), s * (s - 1).pow(len as u32 - 1));
            }
        }
        assert_eq!(enumerate(5, 5).unwrap().len(), 1706);
    }

    #[test]
    fn partners_are_left_multiplication() {
        let space = enumerate(4, 4).unwrap();
        for g in 0..4 {
            let gw = Word::generator(g as u8).unwrap();
            for (i, &p) in space.partner(g).iter().enumerate() {
                let prod = word_multiply(gw, space.word(i)).unwrap();
                match space.index_of(prod) {
                    Some(j) => assert_eq!(p as usize, j),
                    None => assert_eq!(p, NO_PARTNER),
                }
            }
        }
    }

    #[test]
    fn lambda_is_an_interior_involution() {
        let space = enumerate(3, 4).unwrap();
        let interior = space.count_up_to(3);
        let mut e = vec![0.0; space.len()];
        e[0] = 1.0;
        let img = space.lambda_apply(1, &e).unwrap();
        assert_eq!(img[space.index_of(Word::generator(1).unwrap()).unwrap()], 1.0);
        let v: Vec<f64> = (0..space.len()).map(|i| if i < interior { (i as f64).sin() } else { 0.0 }).collect();
        for g in 0..3 {
            let twice = space.lambda_apply(g, &space.lambda_apply(g, &v).unwrap()).unwrap();
            assert_eq!(twice, v);
            let full: Vec<f64> = (0..space.len()).map(|i| (i as f64).cos()).collect();
            let image = space.lambda_apply(g, &full).unwrap();
            let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>();
            assert!(norm(&image) <= norm(&full) + 1e-12);
        }
        let distinct: BTreeSet<u32> = space.partner(0).iter().copied().filter(|&p| p != NO_PARTNER).collect();
        assert_eq!(distinct.len(), space.partner(0).iter().filter(|&&p| p != NO_PARTNER).count());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(enumerate(1, 3).is_err());
        assert!(enumerate(3, 16).is_err());
        let alternating: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
        assert!(Word::reduce(&alternating).is_err());
        assert!(Word::reduce(&alternating[..15]).is_ok());
    }
}
