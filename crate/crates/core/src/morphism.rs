//! Free-monoid morphisms and directive sequences.
//!
//! Letters are dense 0-based indices into an alphabet whose identity is just
//! its size (alphabets are tied to diagram levels by position in a directive
//! sequence). A morphism maps every domain letter to a non-empty word over
//! the codomain alphabet. The JSON form uses 1-based letters.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactMatrix;
use crate::util::splitmix64;

pub type Letter = u32;
pub type Word = Vec<Letter>;

/// A non-erasing morphism between free monoids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    domain: usize,
    codomain: usize,
    images: Vec<Word>,
}

/// Structural flags per the usual classification of substitutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismFlags {
    pub positive: bool,
    pub left_proper: bool,
    pub right_proper: bool,
    pub proper: bool,
    pub hat: bool,
    pub letter_injective: bool,
}

impl Morphism {
    pub fn new(domain: usize, codomain: usize, images: Vec<Word>) -> Result<Self> {
        if images.len() != domain {
            return Err(Error::AlphabetMismatch(format!(
                "expected {domain} images, got {}",
                images.len()
            )));
        }
        for (a, img) in images.iter().enumerate() {
            if img.is_empty() {
                return Err(Error::ErasingImage {
                    letter: a as Letter,
                });
            }
            for &b in img {
                if b as usize >= codomain {
                    return Err(Error::LetterOutOfRange {
                        letter: b,
                        alphabet: codomain,
                    });
                }
            }
        }
        Ok(Self {
            domain,
            codomain,
            images,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            domain: n,
            codomain: n,
            images: (0..n as Letter).map(|a| vec![a]).collect(),
        }
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn image(&self, a: Letter) -> &[Letter] {
        &self.images[a as usize]
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn apply(&self, w: &[Letter]) -> Result<Word> {
        let mut out = Vec::new();
        for &a in w {
            if a as usize >= self.domain {
                return Err(Error::LetterOutOfRange {
                    letter: a,
                    alphabet: self.domain,
                });
            }
            out.extend_from_slice(&self.images[a as usize]);
        }
        Ok(out)
    }

    /// `self` after `rhs`: `(self . rhs)(a) = self(rhs(a))`.
    pub fn compose(&self, rhs: &Morphism) -> Result<Morphism> {
        if self.domain != rhs.codomain {
            return Err(Error::AlphabetMismatch(format!(
                "compose: outer domain {} != inner codomain {}",
                self.domain, rhs.codomain
            )));
        }
        let images = rhs
            .images
            .iter()
            .map(|img| self.apply(img))
            .collect::<Result<Vec<_>>>()?;
        Morphism::new(rhs.domain, self.codomain, images)
    }

    /// Letter-count matrix, codomain letters as rows.
    pub fn incidence(&self) -> ExactMatrix {
        let mut m = vec![BigInt::zero(); self.codomain * self.domain];
        for (a, img) in self.images.iter().enumerate() {
            for &b in img {
                m[b as usize * self.domain + a] += BigInt::one();
            }
        }
        ExactMatrix::new(self.codomain, self.domain, m).expect("shape is valid")
    }

    /// `(min, max)` image length.
    pub fn norms(&self) -> (usize, usize) {
        let min = self
            .images
            .iter()
            .map(|i| i.len())
            .min()
            .expect("non-empty");
        let max = self
            .images
            .iter()
            .map(|i| i.len())
            .max()
            .expect("non-empty");
        (min, max)
    }

    /// Repetition complexity: total number of maximal constant-letter blocks
    /// over all images.
    pub fn r_comp(&self) -> u64 {
        self.images
            .iter()
            .map(|img| 1 + img.windows(2).filter(|w| w[0] != w[1]).count() as u64)
            .sum()
    }

    pub fn classify(&self) -> MorphismFlags {
        let positive = self
            .images
            .iter()
            .all(|img| (0..self.codomain as Letter).all(|b| img.contains(&b)));
        let first = self.images[0][0];
        let left_proper = self.images.iter().all(|img| img[0] == first);
        let last = *self.images[0].last().expect("non-empty");
        let right_proper = self.images.iter().all(|img| *img.last().unwrap() == last);
        // Hat: every codomain letter occurs at most once across all images.
        let mut seen = vec![false; self.codomain];
        let mut hat = true;
        'outer: for img in &self.images {
            for &b in img {
                if seen[b as usize] {
                    hat = false;
                    break 'outer;
                }
                seen[b as usize] = true;
            }
        }
        let mut sorted = self.images.clone();
        sorted.sort();
        let letter_injective = sorted.windows(2).all(|w| w[0] != w[1]);
        MorphismFlags {
            positive,
            left_proper,
            right_proper,
            proper: left_proper && right_proper,
            hat,
            letter_injective,
        }
    }

    /// Offsets of image boundaries inside `self(w)`, starting at 0.
    pub fn cutting_points(&self, w: &[Letter]) -> Result<Vec<usize>> {
        let mut cuts = Vec::with_capacity(w.len() + 1);
        let mut acc = 0usize;
        cuts.push(0);
        for &a in w {
            if a as usize >= self.domain {
                return Err(Error::LetterOutOfRange {
                    letter: a,
                    alphabet: self.domain,
                });
            }
            acc += self.images[a as usize].len();
            cuts.push(acc);
        }
        Ok(cuts)
    }
}

/// Builds the edge order of a level from its incidence matrix.
///
/// For an `r x c` matrix `A` (next level size `r`, current level size `c`)
/// with `A[j][0] > r` for every row, the image of the j-th next-level vertex
/// (1-based) is
///
/// ```text
/// u1^j  u2^A[j][1]  u1^(A[j][0]-j)  u3^A[j][2] ... uc^A[j][c-1]
/// ```
///
/// so the incidence of the result is exactly `A` transposed into morphism
/// orientation, and the initial `u1`-run length distinguishes images whenever
/// the later blocks are non-empty. Entries outside the first column may be
/// zero (the corresponding block is simply absent); the first column must
/// exceed the number of rows.
pub fn injective_order(a: &ExactMatrix) -> Result<Morphism> {
    let next = a.rows();
    let cur = a.cols();
    if cur < 2 {
        return Err(Error::OrderPrecondition(format!(
            "codomain alphabet must have at least 2 letters, got {cur}"
        )));
    }
    if !a.is_nonnegative() {
        return Err(Error::OrderPrecondition(
            "matrix has a negative entry".into(),
        ));
    }
    let bound = BigInt::from(next as u64);
    for j in 0..next {
        if *a.entry(j, 0) <= bound {
            return Err(Error::OrderPrecondition(format!(
                "first-column entry {} at row {} must exceed the next level size {}",
                a.entry(j, 0),
                j + 1,
                next
            )));
        }
    }
    let entry_usize = |j: usize, k: usize| -> Result<usize> {
        a.entry(j, k).to_usize().ok_or_else(|| {
            Error::OrderPrecondition(format!(
                "entry {} at ({},{}) too large to materialize",
                a.entry(j, k),
                j,
                k
            ))
        })
    };
    let mut images = Vec::with_capacity(next);
    for j in 0..next {
        let a0 = entry_usize(j, 0)?;
        let mut img: Word = Vec::new();
        img.extend(std::iter::repeat_n(0 as Letter, j + 1));
        img.extend(std::iter::repeat_n(1 as Letter, entry_usize(j, 1)?));
        img.extend(std::iter::repeat_n(0 as Letter, a0 - (j + 1)));
        for k in 2..cur {
            img.extend(std::iter::repeat_n(k as Letter, entry_usize(j, k)?));
        }
        images.push(img);
    }
    Morphism::new(next, cur, images)
}

/// A finite chain of morphisms `t0, t1, ...` with `ti` mapping the level
/// `i+1` alphabet into the level `i` alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectiveSequence {
    morphisms: Vec<Morphism>,
    flags: Vec<MorphismFlags>,
}

impl DirectiveSequence {
    pub fn new(morphisms: Vec<Morphism>) -> Result<Self> {
        if morphisms.is_empty() {
            return Err(Error::AlphabetMismatch(
                "directive sequence is empty".into(),
            ));
        }
        for i in 1..morphisms.len() {
            if morphisms[i].codomain() != morphisms[i - 1].domain() {
                return Err(Error::AlphabetMismatch(format!(
                    "morphism {} has codomain {} but morphism {} has domain {}",
                    i,
                    morphisms[i].codomain(),
                    i - 1,
                    morphisms[i - 1].domain()
                )));
            }
        }
        let flags = morphisms.iter().map(|m| m.classify()).collect();
        Ok(Self { morphisms, flags })
    }

    /// Convenience: the same morphism repeated `depth` times.
    pub fn repeated(m: Morphism, depth: usize) -> Result<Self> {
        if m.domain() != m.codomain() {
            return Err(Error::AlphabetMismatch(
                "repeated morphism must be an endomorphism".into(),
            ));
        }
        Self::new(vec![m; depth.max(1)])
    }

    pub fn len(&self) -> usize {
        self.morphisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphisms.is_empty()
    }

    pub fn morphism(&self, i: usize) -> &Morphism {
        &self.morphisms[i]
    }

    pub fn morphisms(&self) -> &[Morphism] {
        &self.morphisms
    }

    pub fn flags(&self, i: usize) -> &MorphismFlags {
        &self.flags[i]
    }

    /// Size of the alphabet at level `i`, for `0 <= i <= len`.
    pub fn alphabet_size(&self, i: usize) -> usize {
        if i == 0 {
            self.morphisms[0].codomain()
        } else {
            self.morphisms[i - 1].domain()
        }
    }

    /// Incidence of `t_[i,k)` as an exact product; identity when `i == k`.
    pub fn composed_incidence(&self, i: usize, k: usize) -> Result<ExactMatrix> {
        assert!(i <= k && k <= self.len());
        let mut acc = ExactMatrix::identity(self.alphabet_size(i));
        for j in i..k {
            acc = acc.mul(&self.morphisms[j].incidence())?;
        }
        Ok(acc)
    }

    /// Exact image lengths `|t_[0,k)(a)|` for every level-`k` letter.
    pub fn letter_lengths(&self, k: usize) -> Result<Vec<BigInt>> {
        Ok(self.composed_incidence(0, k)?.col_sums())
    }

    /// `(min, max)` of `|t_[0,k)(a)|`, i.e. the composed norms.
    pub fn composed_norms(&self, k: usize) -> Result<(BigInt, BigInt)> {
        let lens = self.letter_lengths(k)?;
        let min = lens.iter().min().expect("non-empty").clone();
        let max = lens.iter().max().expect("non-empty").clone();
        Ok((min, max))
    }

    /// First window `[i,k)` whose composed incidence is entrywise positive.
    pub fn primitivity_witness(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            let mut acc = ExactMatrix::identity(self.alphabet_size(i));
            for k in i..self.len() {
                acc = acc
                    .mul(&self.morphisms[k].incidence())
                    .expect("chained shapes");
                if acc.is_positive() {
                    return Some((i, k + 1));
                }
            }
        }
        None
    }
}

/// JSON form of a morphism; letters are 1-based on the wire.
#[derive(Serialize, Deserialize)]
struct MorphismWire {
    domain: usize,
    codomain: usize,
    images: Vec<Vec<u32>>,
}

impl Serialize for Morphism {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        MorphismWire {
            domain: self.domain,
            codomain: self.codomain,
            images: self
                .images
                .iter()
                .map(|img| img.iter().map(|&b| b + 1).collect())
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Morphism {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = MorphismWire::deserialize(de)?;
        let images = wire
            .images
            .iter()
            .map(|img| {
                img.iter()
                    .map(|&b| {
                        if b == 0 {
                            Err(D::Error::custom("letters are 1-based on the wire"))
                        } else {
                            Ok(b - 1)
                        }
                    })
                    .collect::<std::result::Result<Word, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Morphism::new(wire.domain, wire.codomain, images).map_err(D::Error::custom)
    }
}

impl Serialize for DirectiveSequence {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            morphisms: &'a [Morphism],
        }
        Wire {
            morphisms: &self.morphisms,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DirectiveSequence {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        struct Wire {
            morphisms: Vec<Morphism>,
        }
        let wire = Wire::deserialize(de)?;
        DirectiveSequence::new(wire.morphisms).map_err(D::Error::custom)
    }
}

/// Evidence from the marker and decoding checks on one morphism.
#[derive(Clone, Debug, Serialize)]
pub struct RecognizabilityReport {
    pub codomain: usize,
    pub letter_injective: bool,
    /// The marker argument needs at least 3 codomain letters; for 2 the
    /// trailing block is a `u1`-run and the marker pair occurs inside images.
    pub marker_available: bool,
    pub images_start_with_first: bool,
    pub images_end_with_marker: bool,
    /// The pair (last letter, first letter) occurs only at image boundaries,
    /// checked inside every single image and across every image pair.
    pub marker_only_at_cuts: bool,
    pub marker_exception_m2: bool,
    pub decoding_samples: usize,
    pub decoding_unique: bool,
    pub ambiguous_samples: Vec<(Word, Word)>,
}

impl RecognizabilityReport {
    /// Marker property as a single verdict (both directions).
    pub fn marker_holds(&self) -> bool {
        self.marker_only_at_cuts && self.images_start_with_first && self.images_end_with_marker
    }
}

/// All domain words of length <= 4 (capped deterministically) plus a few
/// longer seeded words.
pub fn default_recognizability_sample(domain: usize, seed: u64) -> Vec<Word> {
    let mut out = Vec::new();
    let mut count = 0usize;
    for len in 1..=4usize {
        let total = (domain as u64).checked_pow(len as u32).unwrap_or(u64::MAX);
        for idx in 0..total {
            if count >= 4096 {
                break;
            }
            let mut w = Vec::with_capacity(len);
            let mut x = idx;
            for _ in 0..len {
                w.push((x % domain as u64) as Letter);
                x /= domain as u64;
            }
            out.push(w);
            count += 1;
        }
    }
    let mut state = seed ^ 0x5adc;
    for _ in 0..8 {
        let len = 5 + (splitmix64(&mut state) % 4) as usize;
        let w = (0..len)
            .map(|_| (splitmix64(&mut state) % domain as u64) as Letter)
            .collect();
        out.push(w);
    }
    out
}

/// Checks the marker property and brute-force unique decoding of `m`.
///
/// The decoding check enumerates, for each sampled word, every domain word
/// whose image reproduces the sampled image on the first `window` letters
/// (full-image equality once the window covers it) and reports whether the
/// sampled word is the only preimage.
pub fn verify_recognizability(
    m: &Morphism,
    words: &[Word],
    window: usize,
) -> RecognizabilityReport {
    let flags = m.classify();
    let cod = m.codomain();
    let first: Letter = 0;
    let marker: Letter = (cod - 1) as Letter;

    let images_start_with_first = m.images().iter().all(|img| img[0] == first);
    let images_end_with_marker = m.images().iter().all(|img| *img.last().unwrap() == marker);

    let mut marker_only_at_cuts = true;
    for img in m.images() {
        if img.windows(2).any(|w| w[0] == marker && w[1] == first) {
            marker_only_at_cuts = false;
        }
    }
    // Across pairs the only straddling position is the boundary itself, which
    // is a cutting point; an occurrence there is allowed. Interior
    // occurrences were covered above, so nothing else to scan.

    let mut decoding_unique = true;
    let mut ambiguous = Vec::new();
    for w in words {
        let image = match m.apply(w) {
            Ok(img) => img,
            Err(_) => continue,
        };
        let target: &[Letter] = if image.len() > window {
            &image[..window]
        } else {
            &image
        };
        let exact = target.len() == image.len();
        let preimages = enumerate_preimages(m, target, exact, 4);
        if preimages.len() != 1 {
            decoding_unique = false;
            if ambiguous.len() < 8 {
                let other = preimages.iter().find(|p| p != &w).cloned();
                ambiguous.push((w.clone(), other.unwrap_or_default()));
            }
        }
    }

    RecognizabilityReport {
        codomain: cod,
        letter_injective: flags.letter_injective,
        marker_available: cod >= 3,
        images_start_with_first,
        images_end_with_marker,
        marker_only_at_cuts,
        marker_exception_m2: cod == 2,
        decoding_samples: words.len(),
        decoding_unique,
        ambiguous_samples: ambiguous,
    }
}

/// Depth-first enumeration of words whose image matches `target`.
///
/// With `exact` set, a match must consume `target` completely at an image
/// boundary; otherwise the final image may run past the end of the window.
/// Stops early once `cap + 1` preimages are found.
fn enumerate_preimages(m: &Morphism, target: &[Letter], exact: bool, cap: usize) -> Vec<Word> {
    let mut found = Vec::new();
    let mut stack: Word = Vec::new();
    fn rec(
        m: &Morphism,
        target: &[Letter],
        pos: usize,
        exact: bool,
        cap: usize,
        stack: &mut Word,
        found: &mut Vec<Word>,
    ) {
        if found.len() > cap {
            return;
        }
        if pos == target.len() {
            found.push(stack.clone());
            return;
        }
        let rest = &target[pos..];
        for a in 0..m.domain() as Letter {
            let img = m.image(a);
            let matches = if img.len() <= rest.len() {
                rest[..img.len()] == *img
            } else {
                !exact && img[..rest.len()] == *rest
            };
            if matches {
                stack.push(a);
                let next = pos + img.len().min(rest.len());
                rec(m, target, next, exact, cap, stack, found);
                stack.pop();
            }
        }
    }
    rec(m, target, 0, exact, cap, &mut stack, &mut found);
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fib() -> Morphism {
        // a -> ab, b -> a
        Morphism::new(2, 2, vec![vec![0, 1], vec![0]]).unwrap()
    }

    #[test]
    fn compose_fibonacci_square() {
        let f = fib();
        let f2 = f.compose(&f).unwrap();
        assert_eq!(f2.image(0), &[0, 1, 0]);
        assert_eq!(f2.image(1), &[0, 1]);
        assert_eq!(f2.norms(), (2, 3));
    }

    #[test]
    fn compose_identity() {
        let f = fib();
        let id = Morphism::identity(2);
        assert_eq!(id.compose(&f).unwrap(), f);
        assert_eq!(f.compose(&id).unwrap(), f);
    }

    #[test]
    fn compose_incidence_homomorphism() {
        let f = fib();
        let f2 = f.compose(&f).unwrap();
        let expect = f.incidence().mul(&f.incidence()).unwrap();
        assert_eq!(f2.incidence(), expect);
    }

    #[test]
    fn incidence_counts() {
        // a -> aab, b -> ab, rows are codomain letters a, b.
        let m = Morphism::new(2, 2, vec![vec![0, 0, 1], vec![0, 1]]).unwrap();
        assert_eq!(
            m.incidence(),
            ExactMatrix::from_rows(&[vec![2, 1], vec![1, 1]])
        );
        assert_eq!(m.norms(), (2, 3));
        assert_eq!(m.r_comp(), 4);

        assert_eq!(Morphism::identity(3).incidence(), ExactMatrix::identity(3));

        let m = Morphism::new(1, 2, vec![vec![1]]).unwrap();
        assert_eq!(m.incidence(), ExactMatrix::from_rows(&[vec![0], vec![1]]));

        let uniform = Morphism::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(uniform.norms(), (2, 2));
    }

    #[test]
    fn r_comp_cases() {
        assert_eq!(Morphism::new(1, 1, vec![vec![0]]).unwrap().r_comp(), 1);
        // v1 -> u1 u2^2 u1^2, v2 -> u1^2 u2^3 u1^2: three blocks each.
        let m = Morphism::new(2, 2, vec![vec![0, 1, 1, 0, 0], vec![0, 0, 1, 1, 1, 0, 0]]).unwrap();
        assert_eq!(m.r_comp(), 6);
    }

    #[test]
    fn classify_fibonacci() {
        let flags = fib().classify();
        assert!(!flags.positive);
        assert!(flags.left_proper);
        assert!(!flags.right_proper);
        assert!(!flags.proper);
        assert!(!flags.hat);
        assert!(flags.letter_injective);
    }

    #[test]
    fn classify_hat() {
        // a -> 12, b -> 34 over a 4-letter codomain.
        let m = Morphism::new(2, 4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert!(m.classify().hat);
        let m = Morphism::new(2, 4, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert!(!m.classify().hat);
    }

    #[test]
    fn order_from_two_by_two() {
        let a = ExactMatrix::from_rows(&[vec![3, 2], vec![4, 3]]);
        let m = injective_order(&a).unwrap();
        // v1 -> u1 u2^2 u1^2, v2 -> u1^2 u2^3 u1^2
        assert_eq!(m.image(0), &[0, 1, 1, 0, 0]);
        assert_eq!(m.image(1), &[0, 0, 1, 1, 1, 0, 0]);
        assert_eq!(m.image(0).len(), 5);
        assert_eq!(m.image(1).len(), 7);
        assert_eq!(m.incidence(), a.transpose());
        let flags = m.classify();
        assert!(flags.positive);
        assert!(flags.letter_injective);
        assert!(flags.left_proper);
        // Trailing block is a u1-run, so right-properness picks letter u1.
        assert!(flags.right_proper);
    }

    #[test]
    fn order_precondition_violation() {
        let a = ExactMatrix::from_rows(&[vec![2, 5], vec![3, 1]]);
        assert!(matches!(
            injective_order(&a),
            Err(Error::OrderPrecondition(_))
        ));
        let a = ExactMatrix::from_rows(&[vec![3], vec![4]]);
        assert!(matches!(
            injective_order(&a),
            Err(Error::OrderPrecondition(_))
        ));
    }

    #[test]
    fn order_from_three_by_three() {
        let a = ExactMatrix::from_rows(&[vec![4, 1, 1], vec![5, 2, 2], vec![6, 3, 3]]);
        let m = injective_order(&a).unwrap();
        assert_eq!(m.image(0), &[0, 1, 0, 0, 0, 2]);
        assert_eq!(m.image(1), &[0, 0, 1, 1, 0, 0, 0, 2, 2]);
        assert_eq!(m.image(2), &[0, 0, 0, 1, 1, 1, 0, 0, 0, 2, 2, 2]);
        assert_eq!(m.incidence(), a.transpose());
        assert!(m.classify().letter_injective);
    }

    #[test]
    fn cutting_point_offsets() {
        let a = ExactMatrix::from_rows(&[vec![3, 2], vec![4, 3]]);
        let m = injective_order(&a).unwrap();
        assert_eq!(m.cutting_points(&[0, 1]).unwrap(), vec![0, 5, 12]);
        assert_eq!(m.cutting_points(&[]).unwrap(), vec![0]);
        assert_eq!(m.cutting_points(&[0, 0]).unwrap(), vec![0, 5, 10]);
        assert!(matches!(
            m.cutting_points(&[7]),
            Err(Error::LetterOutOfRange { .. })
        ));
    }

    #[test]
    fn cutting_points_partition() {
        let a = ExactMatrix::from_rows(&[vec![4, 1, 1], vec![5, 2, 2], vec![6, 3, 3]]);
        let m = injective_order(&a).unwrap();
        let w = vec![2, 0, 1, 1, 0];
        let cuts = m.cutting_points(&w).unwrap();
        for (i, pair) in cuts.windows(2).enumerate() {
            assert_eq!(pair[1] - pair[0], m.image(w[i]).len());
        }
    }

    #[test]
    fn recognizability_marker_holds_for_three_letters() {
        let a = ExactMatrix::from_rows(&[vec![4, 1, 1], vec![5, 2, 2], vec![6, 3, 3]]);
        let m = injective_order(&a).unwrap();
        // Exhaustive over all domain words of length <= 6.
        let mut words = Vec::new();
        for len in 1..=6usize {
            for idx in 0..3u64.pow(len as u32) {
                let mut w = Vec::new();
                let mut x = idx;
                for _ in 0..len {
                    w.push((x % 3) as Letter);
                    x /= 3;
                }
                words.push(w);
            }
        }
        let rep = verify_recognizability(&m, &words, usize::MAX);
        assert!(rep.marker_available);
        assert!(rep.marker_holds());
        assert!(rep.decoding_unique);
    }

    #[test]
    fn recognizability_marker_fails_for_two_letters() {
        let a = ExactMatrix::from_rows(&[vec![3, 2], vec![4, 3]]);
        let m = injective_order(&a).unwrap();
        let words = default_recognizability_sample(2, 0);
        let rep = verify_recognizability(&m, &words, usize::MAX);
        assert!(!rep.marker_available);
        assert!(rep.marker_exception_m2);
        // u2 u1 occurs inside u1 u2^2 u1^2.
        assert!(!rep.marker_only_at_cuts);
        // Decoding is still evaluated exhaustively and is unique here.
        assert!(rep.decoding_unique);
    }

    #[test]
    fn recognizability_identity_decodes() {
        let id = Morphism::identity(3);
        let words = default_recognizability_sample(3, 1);
        let rep = verify_recognizability(&id, &words, usize::MAX);
        assert!(rep.decoding_unique);
    }

    #[test]
    fn directive_sequence_alphabets() {
        let f = fib();
        let ds = DirectiveSequence::repeated(f, 3).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.alphabet_size(0), 2);
        assert_eq!(ds.alphabet_size(3), 2);
        assert!(ds.primitivity_witness().is_some());
        let (min, max) = ds.composed_norms(3).unwrap();
        // Fib^3: a -> abaab (5), b -> aba (3).
        assert_eq!(min, BigInt::from(3));
        assert_eq!(max, BigInt::from(5));
    }

    #[test]
    fn morphism_json_round_trip() {
        let m = Morphism::new(2, 2, vec![vec![0, 1, 1, 0, 0], vec![0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("[1,2,2,1,1]"));
        let back: Morphism = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_morphism(domain: usize, codomain: usize) -> impl Strategy<Value = Morphism> {
            proptest::collection::vec(
                proptest::collection::vec(0..codomain as Letter, 1..6),
                domain,
            )
            .prop_map(move |images| Morphism::new(domain, codomain, images).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn incidence_of_compose_is_product((outer, inner) in (1usize..4, 1usize..4, 1usize..4)
                .prop_flat_map(|(a, b, c)| (arb_morphism(b, c), arb_morphism(a, b))))
            {
                let comp = outer.compose(&inner).unwrap();
                let prod = outer.incidence().mul(&inner.incidence()).unwrap();
                prop_assert_eq!(comp.incidence(), prod);
            }

            #[test]
            fn norms_of_compose_bounded((outer, inner) in (1usize..4, 1usize..4, 1usize..4)
                .prop_flat_map(|(a, b, c)| (arb_morphism(b, c), arb_morphism(a, b))))
            {
                let comp = outer.compose(&inner).unwrap();
                let (cmin, cmax) = comp.norms();
                let (omin, omax) = outer.norms();
                let (imin, imax) = inner.norms();
                prop_assert!(cmin >= omin * imin);
                prop_assert!(cmax <= omax * imax);
            }

            #[test]
            fn r_comp_lower_bound_for_positive(m in (1usize..4, 1usize..4)
                .prop_flat_map(|(d, c)| arb_morphism(d, c)))
            {
                if m.classify().positive {
                    prop_assert!(m.r_comp() >= (m.domain() * m.codomain()) as u64);
                }
            }

            #[test]
            fn order_round_trips_incidence(rows in 1usize..5, cols in 2usize..5, seed in 0u64..1000) {
                let mut state = seed;
                let mut data = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let v = if c == 0 {
                            rows as u64 + 1 + splitmix64(&mut state) % 7
                        } else {
                            1 + splitmix64(&mut state) % 5
                        };
                        let _ = r;
                        data.push(BigInt::from(v));
                    }
                }
                let a = ExactMatrix::new(rows, cols, data).unwrap();
                let m = injective_order(&a).unwrap();
                prop_assert_eq!(m.incidence(), a.transpose());
                // Positive entries beyond column one keep images pairwise distinct.
                prop_assert!(m.classify().letter_injective);
            }
        }
    }
}
