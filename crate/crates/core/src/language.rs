//! Word generation and factor statistics for directive sequences.
//!
//! Factor sets of order 0 are accumulated over the images of single letters
//! at ever deeper levels; the halting rule is set stabilization between two
//! consecutive levels together with a minimum window of twice the factor
//! length. Large profiles count distinct fixed-length slices of generated
//! words through a generalized suffix array instead of materializing factor
//! sets, with the evidence level recorded per profile.
//!
//! Scanning shards by start offset; the parallel and sequential paths merge
//! deterministically and return bitwise identical results.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::morphism::{DirectiveSequence, Letter, Word};

// ---------------------------------------------------------------------------
// Word generation

/// A generated prefix of `t_[level,k)(letter)` for the deepest stored `k`.
#[derive(Clone, Debug)]
pub struct GeneratedWord {
    pub letters: Word,
    pub level: usize,
    pub deepest_level: usize,
    /// Whether the same prefix arises from every deepest-level letter
    /// (meaningful when the inner morphisms are left proper).
    pub prefix_stable: Option<bool>,
}

/// Expands a prefix of `t_[level,k)(letter)` of exactly `len` letters,
/// erroring when the full image is shorter.
pub fn expand_prefix(
    ds: &DirectiveSequence,
    level: usize,
    letter: Letter,
    len: usize,
) -> Result<Word> {
    let k = ds.len();
    if level >= k {
        return Err(Error::InsufficientDepth(format!(
            "level {level} is not below the stored depth {k}"
        )));
    }
    if letter as usize >= ds.alphabet_size(k) {
        return Err(Error::LetterOutOfRange {
            letter,
            alphabet: ds.alphabet_size(k),
        });
    }
    let available = ds.composed_incidence(level, k)?.col_sums();
    if available[letter as usize] < BigInt::from(len as u64) {
        return Err(Error::InsufficientDepth(format!(
            "image of letter {} has {} letters at level {}, {} requested",
            letter + 1,
            available[letter as usize],
            level,
            len
        )));
    }
    // Per-level caps: expanding one letter multiplies length by at least the
    // minimum image length, so these prefixes always refine to `len`.
    let mut need = vec![0usize; k + 1];
    need[level] = len.max(1);
    for j in level..k {
        let (min_len, _) = ds.morphism(j).norms();
        need[j + 1] = need[j].div_ceil(min_len).max(1);
    }
    let mut word: Word = vec![letter];
    for j in (level..k).rev() {
        let m = ds.morphism(j);
        let cap = need[j];
        let mut out: Word = Vec::with_capacity(cap.min(1 << 20));
        'expand: for &c in &word {
            out.extend_from_slice(m.image(c));
            if out.len() >= cap {
                break 'expand;
            }
        }
        word = out;
    }
    word.truncate(len);
    Ok(word)
}

/// Generates a level-`level` word of length `len` from the deepest alphabet,
/// recording whether the prefix is independent of the chosen letter.
pub fn generate_word(
    ds: &DirectiveSequence,
    level: usize,
    letter: Letter,
    len: usize,
) -> Result<GeneratedWord> {
    let word = expand_prefix(ds, level, letter, len)?;
    let k = ds.len();
    let prefix_stable = if ds.alphabet_size(k) <= 64 {
        let mut stable = true;
        for other in 0..ds.alphabet_size(k) as Letter {
            if other == letter {
                continue;
            }
            match expand_prefix(ds, level, other, len) {
                Ok(w) => {
                    if w != word {
                        stable = false;
                        break;
                    }
                }
                Err(_) => {
                    stable = false;
                    break;
                }
            }
        }
        Some(stable)
    } else {
        None
    };
    Ok(GeneratedWord {
        letters: word,
        level,
        deepest_level: k,
        prefix_stable,
    })
}

// ---------------------------------------------------------------------------
// Explicit factor sets

/// Factor set of one length with its stabilization evidence.
#[derive(Clone, Debug)]
pub struct FactorSet {
    pub len: usize,
    pub words: BTreeSet<Word>,
    /// Two consecutive levels produced the same set and the minimum image
    /// length reached twice the factor length.
    pub stabilized: bool,
    pub level_used: usize,
}

/// Total letters materialized per level before the explicit scan gives up.
const FACTOR_BUDGET: usize = 8_000_000;

/// Accumulates the length-`len` factors of the images of single letters,
/// deepening until stabilization. A partial (unstabilized) set is returned
/// with its flag when depth or budget runs out first.
pub fn factors(ds: &DirectiveSequence, len: usize) -> Result<FactorSet> {
    if len == 0 {
        return Err(Error::InsufficientDepth(
            "factor length must be positive".into(),
        ));
    }
    if ds.primitivity_witness().is_none() {
        return Err(Error::NotPrimitive);
    }
    let two_len = BigInt::from(2 * len as u64);
    let mut acc: BTreeSet<Word> = BTreeSet::new();
    let mut prev: Option<BTreeSet<Word>> = None;
    let mut images: Vec<Word> = Vec::new();
    let mut level_used = 0;
    let mut stabilized = false;
    for k in 1..=ds.len() {
        let predicted: BigInt = ds.composed_incidence(0, k)?.col_sums().iter().sum();
        if predicted > BigInt::from(FACTOR_BUDGET as u64) {
            break;
        }
        images = next_images(ds, k, &images);
        let current = scan_factors(&word_refs(&images), len);
        acc.extend(current.iter().cloned());
        level_used = k;
        let window_ok = ds.composed_norms(k)?.0 >= two_len;
        if let Some(p) = &prev {
            if *p == current && window_ok {
                stabilized = true;
                break;
            }
        }
        prev = Some(current);
    }
    Ok(FactorSet {
        len,
        words: acc,
        stabilized,
        level_used,
    })
}

/// Images of all level-`k` letters under `t_[0,k)`, reusing the previous
/// level's materialization.
fn next_images(ds: &DirectiveSequence, k: usize, prev: &[Word]) -> Vec<Word> {
    if k == 1 {
        return ds.morphism(0).images().to_vec();
    }
    let m = ds.morphism(k - 1);
    (0..m.domain() as Letter)
        .map(|a| {
            let mut out = Word::new();
            for &c in m.image(a) {
                out.extend_from_slice(&prev[c as usize]);
            }
            out
        })
        .collect()
}

fn word_refs(words: &[Word]) -> Vec<&[Letter]> {
    words.iter().map(|w| w.as_slice()).collect()
}

/// Distinct fixed-length slices over the given words, sharded by start
/// offset when the parallel feature is enabled.
pub fn scan_factors(words: &[&[Letter]], len: usize) -> BTreeSet<Word> {
    #[cfg(feature = "parallel")]
    {
        scan_factors_par(words, len)
    }
    #[cfg(not(feature = "parallel"))]
    {
        scan_factors_seq(words, len)
    }
}

pub fn scan_factors_seq(words: &[&[Letter]], len: usize) -> BTreeSet<Word> {
    let mut set = BTreeSet::new();
    for w in words {
        if w.len() >= len {
            for start in 0..=w.len() - len {
                set.insert(w[start..start + len].to_vec());
            }
        }
    }
    set
}

#[cfg(feature = "parallel")]
pub fn scan_factors_par(words: &[&[Letter]], len: usize) -> BTreeSet<Word> {
    const CHUNK: usize = 8192;
    let mut jobs: Vec<(&[Letter], usize, usize)> = Vec::new();
    for w in words {
        if w.len() >= len {
            let starts = w.len() - len + 1;
            let mut s = 0;
            while s < starts {
                jobs.push((w, s, (s + CHUNK).min(starts)));
                s += CHUNK;
            }
        }
    }
    jobs.into_par_iter()
        .map(|(w, from, to)| {
            let mut set = BTreeSet::new();
            for start in from..to {
                set.insert(w[start..start + len].to_vec());
            }
            set
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        })
}

// ---------------------------------------------------------------------------
// Complexity profiles

#[derive(Clone, Debug, Serialize)]
pub struct ProfileEvidence {
    /// Deepest level whose letter images entered the scan.
    pub deepest_level: usize,
    /// Levels materialized in full (no prefix truncation).
    pub full_levels: usize,
    /// Per-letter prefix cap applied to the deepest level, when truncated.
    pub window_cap: Option<usize>,
    /// Counts agree with the previous evidence set for all lengths up to
    /// this value.
    pub stabilized_up_to: usize,
    /// Lengths certified by the halting rule (consecutive full levels equal
    /// and window at least twice the length).
    pub certified_up_to: usize,
    /// True when certification did not reach the requested maximum length.
    pub partial: bool,
}

/// Exact distinct-factor counts `p(1..=max_len)` of the accumulated scan.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexityProfile {
    pub max_len: usize,
    pub counts: Vec<u64>,
    pub evidence: ProfileEvidence,
}

impl ComplexityProfile {
    pub fn count(&self, n: usize) -> u64 {
        self.counts[n - 1]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileOptions {
    /// Budget (letters per level) for full materialization.
    pub full_level_budget: usize,
    /// Per-letter prefix cap for the deepest-level top-up; derived from the
    /// profile length when absent.
    pub window_cap: Option<usize>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            full_level_budget: 6_000_000,
            window_cap: None,
        }
    }
}

pub fn complexity_profile(ds: &DirectiveSequence, max_len: usize) -> Result<ComplexityProfile> {
    complexity_profile_with(ds, max_len, ProfileOptions::default())
}

pub fn complexity_profile_with(
    ds: &DirectiveSequence,
    max_len: usize,
    opts: ProfileOptions,
) -> Result<ComplexityProfile> {
    if max_len == 0 {
        return Err(Error::InsufficientDepth(
            "profile length must be positive".into(),
        ));
    }
    if ds.primitivity_witness().is_none() {
        return Err(Error::NotPrimitive);
    }
    let two_n = BigInt::from(2 * max_len as u64);

    let mut docs: Vec<Word> = Vec::new();
    let mut images: Vec<Word> = Vec::new();
    let mut counts_prev: Option<Vec<u64>> = None;
    let mut counts: Vec<u64> = vec![0; max_len];
    let mut full_levels = 0usize;
    let mut stabilized_up_to = 0usize;
    let mut certified_up_to = 0usize;
    let mut certified = false;

    for k in 1..=ds.len() {
        let predicted: BigInt = ds.composed_incidence(0, k)?.col_sums().iter().sum();
        if predicted > BigInt::from(opts.full_level_budget as u64) {
            break;
        }
        images = next_images(ds, k, &images);
        docs.extend(images.iter().cloned());
        full_levels = k;
        let new_counts = count_distinct_factors(&word_refs(&docs), max_len);
        if let Some(prev) = &counts_prev {
            let agree = prefix_agreement(prev, &new_counts);
            stabilized_up_to = agree;
            let window = ds.composed_norms(k)?.0;
            // The halting rule certifies a length once some pair of
            // consecutive levels agrees on it with the window covering twice
            // that length; keep the best certificate seen so far.
            let window_half = (&window / BigInt::from(2u32))
                .to_usize()
                .unwrap_or(usize::MAX);
            certified_up_to = certified_up_to.max(agree.min(window_half));
            if agree >= max_len && window >= two_n {
                counts = new_counts;
                certified = true;
                break;
            }
        }
        counts_prev = Some(new_counts.clone());
        counts = new_counts;
    }

    let mut window_cap = None;
    let deepest = ds.len();
    if !certified && full_levels < deepest {
        // Top up with capped prefixes of the deepest level's images.
        let cap = opts
            .window_cap
            .unwrap_or_else(|| (8 * max_len).clamp(65_536, 4_000_000));
        window_cap = Some(cap);
        let lengths = ds.composed_incidence(0, deepest)?.col_sums();
        for (a, total) in lengths.iter().enumerate() {
            let take = total.to_usize().map(|t| t.min(cap)).unwrap_or(cap);
            if take == 0 {
                continue;
            }
            docs.push(expand_prefix(ds, 0, a as Letter, take)?);
        }
        let new_counts = count_distinct_factors(&word_refs(&docs), max_len);
        if let Some(prev) = &counts_prev {
            stabilized_up_to = prefix_agreement(prev, &new_counts);
        }
        counts = new_counts;
    }

    let evidence = ProfileEvidence {
        deepest_level: if window_cap.is_some() {
            deepest
        } else {
            full_levels
        },
        full_levels,
        window_cap,
        stabilized_up_to: if certified { max_len } else { stabilized_up_to },
        certified_up_to: if certified {
            max_len
        } else {
            certified_up_to.min(max_len)
        },
        partial: !certified,
    };
    Ok(ComplexityProfile {
        max_len,
        counts,
        evidence,
    })
}

fn prefix_agreement(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

// ---------------------------------------------------------------------------
// Complexity upper bounds

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    I,
    J,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundValue {
    #[serde(serialize_with = "crate::util::ser_bigint")]
    pub bound: BigInt,
    pub regime: Regime,
    pub level: usize,
}

/// Precomputed norm intervals and per-level coefficients, so bounds over a
/// large range of `n` avoid recomputing incidence products.
pub struct BoundTable {
    /// `(min, max)` of `|t_[0,i)(a)|` for `i = 0..=len`.
    norms: Vec<(BigInt, BigInt)>,
    sizes: Vec<u64>,
    rcomps: Vec<u64>,
}

impl BoundTable {
    pub fn new(ds: &DirectiveSequence) -> Result<Self> {
        let mut norms = Vec::with_capacity(ds.len() + 1);
        for i in 0..=ds.len() {
            norms.push(ds.composed_norms(i)?);
        }
        let sizes = (0..=ds.len()).map(|i| ds.alphabet_size(i) as u64).collect();
        let rcomps = (0..ds.len()).map(|i| ds.morphism(i).r_comp()).collect();
        Ok(Self {
            norms,
            sizes,
            rcomps,
        })
    }

    fn locate(&self, n: u64) -> Result<(usize, Regime)> {
        let n_big = BigInt::from(n);
        let levels = self.rcomps.len();
        if n_big < self.norms[1].1 {
            return Err(Error::InsufficientDepth(format!(
                "n = {n} is below the first morphism's maximum image length {}",
                self.norms[1].1
            )));
        }
        let mut i = 1usize;
        loop {
            if i + 1 > levels {
                return Err(Error::InsufficientDepth(format!(
                    "n = {n} is beyond the norm of the full stored composition"
                )));
            }
            let (min_next, max_next) = &self.norms[i + 1];
            if n_big < *max_next {
                let regime = if n_big < *min_next {
                    Regime::I
                } else {
                    Regime::J
                };
                if regime == Regime::J && i + 1 >= levels {
                    return Err(Error::InsufficientDepth(format!(
                        "n = {n} falls in the upper regime of the last stored level"
                    )));
                }
                return Ok((i, regime));
            }
            i += 1;
        }
    }

    /// Per-letter-count repetition bound at `n`, with `i(n)` located so that
    /// `n` is in `[ ||t_[0,i)||, ||t_[0,i+1)|| )`.
    pub fn bound(&self, n: u64) -> Result<BoundValue> {
        let (i, regime) = self.locate(n)?;
        let coefficient = match regime {
            Regime::I => self.sizes[i] + (self.sizes[i + 1] + 1) * self.rcomps[i],
            Regime::J => {
                self.sizes[i + 1]
                    + self.sizes[i]
                    + self.rcomps[i]
                    + (self.sizes[i + 2] + 1) * self.rcomps[i + 1]
            }
        };
        Ok(BoundValue {
            bound: BigInt::from(coefficient) * BigInt::from(n),
            regime,
            level: i,
        })
    }

    /// The blunt cubic bound `3*|A_{i+2}|^3*n` (regime I) or `5*|A_{i+3}|^3*n`
    /// (regime J) that absorbs the repetition bound into one constant.
    pub fn coarse(&self, n: u64) -> Result<BoundValue> {
        let (i, regime) = self.locate(n)?;
        let bound = match regime {
            Regime::I => {
                let size = self.size_checked(i + 2)?;
                BigInt::from(3u64) * BigInt::from(size).pow(3) * BigInt::from(n)
            }
            Regime::J => {
                let size = self.size_checked(i + 3)?;
                BigInt::from(5u64) * BigInt::from(size).pow(3) * BigInt::from(n)
            }
        };
        Ok(BoundValue {
            bound,
            regime,
            level: i,
        })
    }

    fn size_checked(&self, i: usize) -> Result<u64> {
        self.sizes.get(i).copied().ok_or_else(|| {
            Error::InsufficientDepth(format!(
                "alphabet at level {i} is beyond the stored depth {}",
                self.rcomps.len()
            ))
        })
    }

    /// Minimum `n` the bound is defined at.
    pub fn min_n(&self) -> u64 {
        self.norms[1].1.to_u64().unwrap_or(u64::MAX)
    }
}

/// Locates `i(n)` with `n` in `[ ||t_[0,i)||, ||t_[0,i+1)|| )` and returns
/// the per-letter-count repetition bound for that regime.
pub fn complexity_bound(ds: &DirectiveSequence, n: u64) -> Result<BoundValue> {
    BoundTable::new(ds)?.bound(n)
}

/// See [`BoundTable::coarse`].
pub fn coarse_bound(ds: &DirectiveSequence, n: u64) -> Result<BoundValue> {
    BoundTable::new(ds)?.coarse(n)
}

// ---------------------------------------------------------------------------
// Toeplitz verification

/// Per-position periodicity evidence over a finite window.
#[derive(Clone, Debug, Serialize)]
pub struct ToeplitzReport {
    pub window_len: usize,
    pub candidates: Vec<u64>,
    /// Smallest verifying candidate per position, when one exists.
    pub periods: Vec<Option<u64>>,
    pub verified: usize,
    /// Positions where every candidate had at least two in-window progression
    /// points and all of them were inconsistent: periodicity is refuted for
    /// the whole candidate list at these positions.
    pub refuted: usize,
    /// True iff no position was refuted.
    pub flag: bool,
}

impl ToeplitzReport {
    /// Positions that could not be decided either way: no candidate verified
    /// them, but some candidate's progression did not fit the window.
    pub fn undecided(&self) -> usize {
        self.window_len - self.verified - self.refuted
    }
}

pub fn toeplitz_check(window: &[Letter], candidates: &[u64]) -> ToeplitzReport {
    let sorted = normalize_candidates(candidates);
    #[cfg(feature = "parallel")]
    let consistency: Vec<Vec<bool>> = sorted
        .par_iter()
        .map(|&q| class_consistency(window, q as usize))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let consistency: Vec<Vec<bool>> = sorted
        .iter()
        .map(|&q| class_consistency(window, q as usize))
        .collect();
    assemble_toeplitz_report(window, sorted, &consistency)
}

/// Sequential twin of [`toeplitz_check`] for benchmarking the two paths.
pub fn toeplitz_check_seq(window: &[Letter], candidates: &[u64]) -> ToeplitzReport {
    let sorted = normalize_candidates(candidates);
    let consistency: Vec<Vec<bool>> = sorted
        .iter()
        .map(|&q| class_consistency(window, q as usize))
        .collect();
    assemble_toeplitz_report(window, sorted, &consistency)
}

fn normalize_candidates(candidates: &[u64]) -> Vec<u64> {
    let mut sorted: Vec<u64> = candidates.iter().copied().filter(|&q| q >= 1).collect();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
}

/// Candidate periods for a Toeplitz scan: the cumulative products of the
/// per-level row sums, saturating at `u64::MAX` once they leave any feasible
/// window (a saturated candidate still records that deeper periods exist).
pub fn default_toeplitz_window_candidates(k_seq: &[BigInt]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut acc = BigInt::one();
    for k in k_seq {
        acc *= k;
        out.push(acc.to_u64().unwrap_or(u64::MAX));
    }
    // The leading k_1 = 1 product is not a useful period.
    out.retain(|&q| q > 1);
    out
}

/// Whether each residue class modulo `q` carries a single letter across the
/// window.
pub fn class_consistency(window: &[Letter], q: usize) -> Vec<bool> {
    let mut first: Vec<Option<Letter>> = vec![None; q];
    let mut ok = vec![true; q];
    for (p, &x) in window.iter().enumerate() {
        let r = p % q;
        match first[r] {
            None => first[r] = Some(x),
            Some(y) => {
                if y != x {
                    ok[r] = false;
                }
            }
        }
    }
    ok
}

fn assemble_toeplitz_report(
    window: &[Letter],
    sorted: Vec<u64>,
    consistency: &[Vec<bool>],
) -> ToeplitzReport {
    let w = window.len();
    let mut periods = vec![None; w];
    let mut verified = 0usize;
    let mut refuted = 0usize;
    for (p, slot) in periods.iter_mut().enumerate() {
        let mut any_unfitting = false;
        for (ci, &q) in sorted.iter().enumerate() {
            let r = p % q as usize;
            // The class has at least two in-window points iff r + q < w.
            if r + q as usize >= w {
                any_unfitting = true;
                continue;
            }
            if consistency[ci][r] {
                *slot = Some(q);
                verified += 1;
                break;
            }
        }
        if slot.is_none() && !any_unfitting {
            refuted += 1;
        }
    }
    ToeplitzReport {
        window_len: w,
        candidates: sorted,
        periods,
        verified,
        refuted,
        flag: refuted == 0,
    }
}

// ---------------------------------------------------------------------------
// Ergodic-measure count bound

#[derive(Clone, Debug, Serialize)]
pub struct BoshernitzanBound {
    /// `min_n p(n)/n` plus one unit in the last sampled denominator; an upper
    /// proxy for the liminf computed from finite data, never the liminf
    /// itself.
    #[serde(serialize_with = "crate::util::ser_bigrational")]
    pub alpha_estimate: BigRational,
    #[serde(serialize_with = "crate::util::ser_bigint")]
    pub measure_bound: BigInt,
}

pub fn boshernitzan_bound(profile: &ComplexityProfile) -> BoshernitzanBound {
    let last_n = profile.max_len as u64;
    let mut alpha: Option<BigRational> = None;
    for (idx, &p) in profile.counts.iter().enumerate() {
        let n = idx as u64 + 1;
        let ratio = BigRational::new(BigInt::from(p), BigInt::from(n));
        alpha = Some(match alpha {
            None => ratio,
            Some(a) => a.min(ratio),
        });
    }
    let alpha_estimate =
        alpha.expect("profile non-empty") + BigRational::new(BigInt::one(), BigInt::from(last_n));
    let floor = alpha_estimate.floor().to_integer();
    let measure_bound = floor.max(BigInt::one());
    BoshernitzanBound {
        alpha_estimate,
        measure_bound,
    }
}

// ---------------------------------------------------------------------------
// Distinct-factor counting over a generalized suffix array

/// `counts[n-1]` = number of distinct length-`n` slices across the documents,
/// for `1 <= n <= max_len`, via one suffix array over the concatenation with
/// distinct separators.
pub fn count_distinct_factors(docs: &[&[Letter]], max_len: usize) -> Vec<u64> {
    let total: usize = docs.iter().map(|d| d.len()).sum();
    let n = total + docs.len();
    assert!(
        n < u32::MAX as usize - docs.len() - 1,
        "text too large for u32 indexing"
    );
    let sep_base = u32::MAX - docs.len() as u32;
    let mut text: Vec<u32> = Vec::with_capacity(n);
    let mut avail: Vec<u32> = Vec::with_capacity(n);
    for (di, doc) in docs.iter().enumerate() {
        debug_assert!(doc.iter().all(|&c| c < sep_base));
        for (j, &c) in doc.iter().enumerate() {
            text.push(c);
            avail.push((doc.len() - j) as u32);
        }
        text.push(sep_base + di as u32);
        avail.push(0);
    }
    if text.is_empty() || max_len == 0 {
        return vec![0; max_len];
    }
    let sa = suffix::suffix_array(&text);
    let lcp = suffix::lcp_array(&text, &sa);

    let cap = max_len;
    let mut avail_hist = vec![0u64; cap + 1];
    for &a in &avail {
        let a = (a as usize).min(cap);
        avail_hist[a] += 1;
    }
    let mut lcp_hist = vec![0u64; cap + 1];
    for &l in &lcp {
        let l = (l as usize).min(cap);
        lcp_hist[l] += 1;
    }
    // counts[n] = #positions with avail >= n  -  #adjacent pairs with lcp >= n
    let mut counts = vec![0u64; cap];
    let mut avail_ge = 0u64;
    let mut lcp_ge = 0u64;
    for len in (1..=cap).rev() {
        avail_ge += avail_hist[len];
        lcp_ge += lcp_hist[len];
        counts[len - 1] = avail_ge - lcp_ge;
    }
    counts
}

mod suffix {
    //! Prefix-doubling suffix array with two-pass counting sorts, plus the
    //! usual linear LCP construction. Indices are u32; ranks are 1-based so
    //! that running past the end compares lowest.

    pub fn suffix_array(text: &[u32]) -> Vec<u32> {
        let n = text.len();
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![0];
        }
        let mut sorted_vals: Vec<u32> = text.to_vec();
        sorted_vals.sort_unstable();
        sorted_vals.dedup();
        let mut rank: Vec<u32> = text
            .iter()
            .map(|c| sorted_vals.binary_search(c).unwrap() as u32 + 1)
            .collect();
        let mut sa: Vec<u32> = (0..n as u32).collect();
        let mut by_second: Vec<u32> = vec![0; n];
        let mut new_rank: Vec<u32> = vec![0; n];
        let mut count: Vec<u32> = Vec::new();
        let mut k = 1usize;
        loop {
            let second = |i: usize| -> u32 {
                if i + k < n {
                    rank[i + k]
                } else {
                    0
                }
            };
            // Stable counting sort by the second key, then by the first.
            count.clear();
            count.resize(n + 2, 0);
            for i in 0..n {
                count[second(i) as usize] += 1;
            }
            prefix_sums(&mut count);
            for i in 0..n {
                let key = second(i) as usize;
                by_second[count[key] as usize] = i as u32;
                count[key] += 1;
            }
            count.clear();
            count.resize(n + 2, 0);
            for i in 0..n {
                count[rank[i] as usize] += 1;
            }
            prefix_sums(&mut count);
            for &i in by_second.iter() {
                let key = rank[i as usize] as usize;
                sa[count[key] as usize] = i;
                count[key] += 1;
            }
            // Re-rank.
            let mut r = 1u32;
            new_rank[sa[0] as usize] = 1;
            for w in 1..n {
                let a = sa[w - 1] as usize;
                let b = sa[w] as usize;
                if (rank[a], second(a)) != (rank[b], second(b)) {
                    r += 1;
                }
                new_rank[b] = r;
            }
            std::mem::swap(&mut rank, &mut new_rank);
            if r as usize == n || k >= n {
                break;
            }
            k <<= 1;
        }
        sa
    }

    fn prefix_sums(count: &mut [u32]) {
        let mut sum = 0u32;
        for c in count.iter_mut() {
            let t = *c;
            *c = sum;
            sum += t;
        }
    }

    pub fn lcp_array(text: &[u32], sa: &[u32]) -> Vec<u32> {
        let n = text.len();
        let mut rank = vec![0u32; n];
        for (i, &s) in sa.iter().enumerate() {
            rank[s as usize] = i as u32;
        }
        let mut lcp = vec![0u32; n];
        let mut h = 0usize;
        for i in 0..n {
            let r = rank[i] as usize;
            if r > 0 {
                let j = sa[r - 1] as usize;
                while i + h < n && j + h < n && text[i + h] == text[j + h] {
                    h += 1;
                }
                lcp[r] = h as u32;
                h = h.saturating_sub(1);
            } else {
                h = 0;
            }
        }
        lcp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::Morphism;

    fn fib_ds(depth: usize) -> DirectiveSequence {
        let f = Morphism::new(2, 2, vec![vec![0, 1], vec![0]]).unwrap();
        DirectiveSequence::repeated(f, depth).unwrap()
    }

    fn pd_ds(depth: usize) -> DirectiveSequence {
        let pd = Morphism::new(2, 2, vec![vec![0, 1], vec![0, 0]]).unwrap();
        DirectiveSequence::repeated(pd, depth).unwrap()
    }

    fn constant_ds(depth: usize) -> DirectiveSequence {
        let c = Morphism::new(1, 1, vec![vec![0, 0]]).unwrap();
        DirectiveSequence::repeated(c, depth).unwrap()
    }

    fn word(s: &str) -> Word {
        s.bytes().map(|b| (b - b'a') as Letter).collect()
    }

    #[test]
    fn generate_fibonacci_prefix() {
        let ds = fib_ds(10);
        let w = generate_word(&ds, 0, 0, 8).unwrap();
        assert_eq!(w.letters, word("abaababa"));
        // Fibonacci is left proper, so the prefix is letter-independent.
        assert_eq!(w.prefix_stable, Some(true));
    }

    #[test]
    fn generate_period_doubling_prefix() {
        let ds = pd_ds(6);
        let w = generate_word(&ds, 0, 0, 8).unwrap();
        assert_eq!(w.letters, word("abaaabab"));
    }

    #[test]
    fn generate_constant_prefix() {
        let ds = constant_ds(3);
        let w = generate_word(&ds, 0, 0, 4).unwrap();
        assert_eq!(w.letters, word("aaaa"));
    }

    #[test]
    fn generate_rejects_excess_length() {
        let ds = fib_ds(3);
        // t_[0,3) images have lengths 5 and 3.
        assert!(matches!(
            expand_prefix(&ds, 0, 0, 6),
            Err(Error::InsufficientDepth(_))
        ));
        assert!(expand_prefix(&ds, 0, 0, 5).is_ok());
    }

    #[test]
    fn fibonacci_factor_set() {
        let ds = fib_ds(12);
        let f = factors(&ds, 3).unwrap();
        assert!(f.stabilized);
        let expect: BTreeSet<Word> = ["aab", "aba", "baa", "bab"]
            .iter()
            .map(|s| word(s))
            .collect();
        assert_eq!(f.words, expect);
    }

    #[test]
    fn constant_factor_set() {
        let ds = constant_ds(5);
        let f = factors(&ds, 5).unwrap();
        assert!(f.stabilized);
        assert_eq!(f.words.len(), 1);
        assert!(f.words.contains(&word("aaaaa")));
    }

    #[test]
    fn period_doubling_pairs() {
        let ds = pd_ds(8);
        let f = factors(&ds, 2).unwrap();
        assert!(f.stabilized);
        let expect: BTreeSet<Word> = ["aa", "ab", "ba"].iter().map(|s| word(s)).collect();
        assert_eq!(f.words, expect);
    }

    #[test]
    fn fibonacci_profile_is_n_plus_one() {
        let ds = fib_ds(16);
        let p = complexity_profile(&ds, 4).unwrap();
        assert_eq!(p.counts, vec![2, 3, 4, 5]);
        assert!(!p.evidence.partial);
    }

    #[test]
    fn constant_profile_is_one() {
        let ds = constant_ds(6);
        let p = complexity_profile(&ds, 5).unwrap();
        assert_eq!(p.counts, vec![1; 5]);
    }

    #[test]
    fn period_doubling_profile() {
        let ds = pd_ds(10);
        let p = complexity_profile(&ds, 2).unwrap();
        assert_eq!(p.counts, vec![2, 3]);
    }

    #[test]
    fn windowed_profile_matches_certified_profile() {
        // Dual route: force the windowed path with a tiny budget and compare
        // against the fully certified computation.
        let ds = fib_ds(16);
        let certified = complexity_profile(&ds, 12).unwrap();
        assert!(!certified.evidence.partial);
        let windowed = complexity_profile_with(
            &ds,
            12,
            ProfileOptions {
                full_level_budget: 40,
                window_cap: Some(600),
            },
        )
        .unwrap();
        assert!(windowed.evidence.partial);
        assert_eq!(windowed.counts, certified.counts);
    }

    #[test]
    fn profile_counts_match_explicit_sets() {
        // Dual route: the suffix-array counts agree with the materialized
        // factor sets length by length.
        let ds = pd_ds(10);
        let p = complexity_profile(&ds, 6).unwrap();
        for n in 1..=6usize {
            let f = factors(&ds, n).unwrap();
            assert!(f.stabilized);
            assert_eq!(p.counts[n - 1], f.words.len() as u64, "length {n}");
        }
    }

    #[test]
    fn suffix_counts_on_constant_text() {
        // Worst case for rank ties: one distinct factor per length.
        let doc = vec![0 as Letter; 5000];
        let refs = vec![doc.as_slice()];
        let counts = count_distinct_factors(&refs, 200);
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn prefix_expansion_matches_full_composition() {
        // Dual route: the capped expansion must agree with a literal
        // composition of the morphisms.
        let ds = pd_ds(7);
        let mut full = Morphism::identity(2);
        for i in 0..ds.len() {
            full = full.compose(ds.morphism(i)).unwrap();
        }
        let image = full.apply(&[0]).unwrap();
        for len in [1usize, 2, 17, 63, 128] {
            let prefix = expand_prefix(&ds, 0, 0, len).unwrap();
            assert_eq!(prefix, image[..len].to_vec(), "length {len}");
        }
    }

    #[test]
    fn suffix_counts_match_naive_scan() {
        // Oracle for the counting engine: sliding-window sets on mixed
        // deterministic documents.
        use crate::util::splitmix64;
        let mut state = 7u64;
        for trial in 0..30 {
            let docs: Vec<Word> = (0..1 + trial % 3)
                .map(|_| {
                    let len = 1 + (splitmix64(&mut state) % 40) as usize;
                    (0..len)
                        .map(|_| (splitmix64(&mut state) % 3) as Letter)
                        .collect()
                })
                .collect();
            let refs = word_refs(&docs);
            let counts = count_distinct_factors(&refs, 12);
            for n in 1..=12usize {
                let set = scan_factors_seq(&refs, n);
                assert_eq!(counts[n - 1], set.len() as u64, "trial {trial} length {n}");
            }
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_scan_is_bitwise_identical() {
        let ds = fib_ds(18);
        let w = expand_prefix(&ds, 0, 0, 2000).unwrap();
        let refs = vec![w.as_slice()];
        for n in [1usize, 3, 17] {
            assert_eq!(scan_factors_seq(&refs, n), scan_factors_par(&refs, n));
        }
    }

    #[test]
    fn bound_dominates_fibonacci_profile() {
        let ds = fib_ds(16);
        let p = complexity_profile(&ds, 40).unwrap();
        for n in 2..=40u64 {
            let b = complexity_bound(&ds, n).unwrap();
            assert!(
                BigInt::from(p.count(n as usize)) <= b.bound,
                "p({n}) = {} exceeds bound {}",
                p.count(n as usize),
                b.bound
            );
        }
    }

    #[test]
    fn bound_formula_regime_one() {
        // Four-letter images with five blocks each: r-comp 20, sizes 4, so
        // the first-regime coefficient is 4 + 5*20 = 104.
        let a = crate::exact::ExactMatrix::from_rows(&[
            vec![5, 1, 1, 1],
            vec![6, 1, 1, 1],
            vec![7, 1, 1, 1],
            vec![8, 1, 1, 1],
        ]);
        let m = crate::morphism::injective_order(&a).unwrap();
        assert_eq!(m.r_comp(), 20);
        let ds = DirectiveSequence::repeated(m, 3).unwrap();
        // ||t_[0,1)|| = 11 and <t_[0,2)> = 70, so n = 20 sits in regime I_1.
        let b = complexity_bound(&ds, 20).unwrap();
        assert_eq!(b.regime, Regime::I);
        assert_eq!(b.level, 1);
        assert_eq!(b.bound, BigInt::from(104 * 20));
    }

    #[test]
    fn bound_requires_minimum_n() {
        let ds = fib_ds(4);
        assert!(matches!(
            complexity_bound(&ds, 1),
            Err(Error::InsufficientDepth(_))
        ));
    }

    #[test]
    fn toeplitz_period_doubling_window() {
        let ds = pd_ds(8);
        let w = expand_prefix(&ds, 0, 0, 64).unwrap();
        let rep = toeplitz_check(&w, &[2, 4, 8, 16, 32, 64]);
        assert!(rep.flag);
        // Positions 31 and 63 need period 64, whose progression does not fit
        // twice in the window; everything else resolves.
        assert_eq!(rep.verified, 62);
        assert_eq!(rep.refuted, 0);
        assert_eq!(rep.periods[31], None);
        assert_eq!(rep.periods[63], None);
        assert_eq!(rep.periods[0], Some(2));
        assert_eq!(rep.periods[1], Some(4));
        // Literal progression property for every verified position.
        for (p, q) in rep.periods.iter().enumerate() {
            if let Some(q) = q {
                let q = *q as usize;
                let mut j = p % q;
                while j < w.len() {
                    assert_eq!(w[j], w[p]);
                    j += q;
                }
            }
        }
    }

    #[test]
    fn toeplitz_constant_word() {
        let w = vec![0 as Letter; 32];
        let rep = toeplitz_check(&w, &[1]);
        assert!(rep.flag);
        assert_eq!(rep.verified, 32);
        assert!(rep.periods.iter().all(|p| *p == Some(1)));
    }

    #[test]
    fn toeplitz_fibonacci_fails() {
        // At window 64 every two-point progression class happens to agree, so
        // the scan needs a window of 128 before the aperiodicity shows up as
        // a refuted position.
        let ds = fib_ds(12);
        let w = expand_prefix(&ds, 0, 0, 128).unwrap();
        let candidates: Vec<u64> = (2..=32).collect();
        let rep = toeplitz_check(&w, &candidates);
        assert!(!rep.flag);
        assert!(rep.refuted > 0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn toeplitz_paths_agree() {
        let ds = pd_ds(12);
        let w = expand_prefix(&ds, 0, 0, 4096).unwrap();
        let candidates = [2u64, 4, 8, 16, 32, 64, 128];
        let a = toeplitz_check(&w, &candidates);
        let b = toeplitz_check_seq(&w, &candidates);
        assert_eq!(a.periods, b.periods);
        assert_eq!(a.flag, b.flag);
    }

    #[test]
    fn boshernitzan_examples() {
        let mk = |counts: Vec<u64>| ComplexityProfile {
            max_len: counts.len(),
            evidence: ProfileEvidence {
                deepest_level: 1,
                full_levels: 1,
                window_cap: None,
                stabilized_up_to: counts.len(),
                certified_up_to: counts.len(),
                partial: false,
            },
            counts,
        };
        // p(n) = n + 1.
        let b = boshernitzan_bound(&mk((1..=30).map(|n| n + 1).collect()));
        assert_eq!(b.measure_bound, BigInt::one());
        assert!(b.alpha_estimate > BigRational::one());
        // p(n) = 2n + 1.
        let b = boshernitzan_bound(&mk((1..=30).map(|n| 2 * n + 1).collect()));
        assert_eq!(b.measure_bound, BigInt::from(2));
        // p = 1.
        let b = boshernitzan_bound(&mk(vec![1; 10]));
        assert_eq!(b.measure_bound, BigInt::one());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn factor_counts_monotone_for_fibonacci(len in 1usize..12) {
                let ds = fib_ds(16);
                let a = factors(&ds, len).unwrap();
                let b = factors(&ds, len + 1).unwrap();
                prop_assert!(b.words.len() >= a.words.len());
            }

            #[test]
            fn suffix_counts_on_random_text(seed in 0u64..5000, alpha in 1u32..5) {
                use crate::util::splitmix64;
                let mut state = seed;
                let len = 2 + (splitmix64(&mut state) % 60) as usize;
                let doc: Word = (0..len).map(|_| (splitmix64(&mut state) % alpha as u64) as Letter).collect();
                let refs = vec![doc.as_slice()];
                let counts = count_distinct_factors(&refs, len);
                for n in 1..=len {
                    let expect = scan_factors_seq(&refs, n).len() as u64;
                    prop_assert_eq!(counts[n - 1], expect);
                }
            }
        }
    }
}
