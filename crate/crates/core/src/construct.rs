//! The two construction pipelines and their self-verification.
//!
//! `build_main1` turns a positive diagram and a superlinear target into an
//! ordered diagram through level splitting and a triangular change of basis;
//! `build_toeplitz` rescales a divisible-limit diagram into an equal-row-sum
//! diagram whose subshift is Toeplitz. Both record every per-level condition
//! as a diagnostic and stop at the first violation instead of guessing.
//!
//! Index bookkeeping: arrays are 0-based throughout and the written level
//! `i` of a sequence lives at array index `i`. For the main pipeline, `h[i]`,
//! `t[i]`, the telescoped matrix and its split all sit at index `i`, and the
//! change-of-basis matrix `J_i` at index `i` of a `depth + 1` vector. For the
//! Toeplitz pipeline, `k_seq[i-1]` stores the written `k_i`, so
//! `k_seq[0] = k_1 = 1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::bratteli::{
    read_morphisms, split_level, verify_adapted, AdaptedReport, BratteliDiagram,
};
use crate::error::{Error, Result};
use crate::exact::{ExactMatrix, RationalMatrix};
use crate::language::{
    boshernitzan_bound, complexity_profile_with, default_toeplitz_window_candidates,
    toeplitz_check, BoshernitzanBound, BoundTable, ComplexityProfile, ProfileEvidence,
    ProfileOptions, Regime, ToeplitzReport,
};
use crate::morphism::{
    default_recognizability_sample, injective_order, verify_recognizability,
    DirectiveSequence, Morphism, RecognizabilityReport, Word,
};
use crate::target::ComplexityTarget;

// ---------------------------------------------------------------------------
// Threshold scan

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub t_star: u64,
    /// The condition was checked pointwise for every `t` up to here; beyond,
    /// the target's monotonicity hint carries it.
    pub scan_verified_to: u64,
}

/// Smallest `t*` with `m^3 * t / p_t < 1/level` at `t*` and at every checked
/// `t` up to the scan limit. Exact rational comparisons throughout; at level
/// 0 the right-hand side is unbounded and the condition is vacuous.
pub fn threshold(
    target: &ComplexityTarget,
    m: usize,
    level: usize,
    scan_limit: u64,
) -> Result<ThresholdResult> {
    if level == 0 {
        return Ok(ThresholdResult {
            t_star: 1,
            scan_verified_to: scan_limit,
        });
    }
    let limit = target
        .domain_limit()
        .map(|d| d.min(scan_limit))
        .unwrap_or(scan_limit)
        .max(1);
    let m_cubed = BigInt::from(m as u64).pow(3);
    let level_big = BigInt::from(level as u64);
    let mut last_fail = 0u64;
    for t in 1..=limit {
        // m^3 t / p_t < 1/level  <=>  p_t > level * m^3 * t
        let rhs = BigRational::from_integer(&level_big * &m_cubed * BigInt::from(t));
        if !target.exceeds(t, &rhs)? {
            last_fail = t;
        }
    }
    if last_fail >= limit {
        return Err(Error::ThresholdExhausted {
            m,
            level,
            scan_limit: limit,
        });
    }
    Ok(ThresholdResult {
        t_star: last_fail + 1,
        scan_verified_to: limit,
    })
}

// ---------------------------------------------------------------------------
// Result plumbing

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Main1,
    Toeplitz,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Status {
    Complete,
    Failed { level: usize, condition: String },
}

impl Status {
    pub fn is_complete(&self) -> bool {
        matches!(self, Status::Complete)
    }
}

/// One recorded per-level condition with the value it was checked against.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: usize,
    pub condition: String,
    pub value: String,
    pub pass: bool,
}

/// Advisory records: facts worth keeping that the construction does not rely
/// on (they can fail at shallow levels by design).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observation {
    pub level: usize,
    pub condition: String,
    pub value: String,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Main1Artifacts {
    /// Telescoping cut indices into the expanded input diagram.
    pub cuts: Vec<usize>,
    /// Level sizes of the telescoped diagram (`m_0..m_depth`).
    pub level_sizes: Vec<usize>,
    pub t_seq: Vec<u64>,
    pub h_seq: Vec<u64>,
    /// Telescoped incidences, one per constructed level.
    pub telescoped: Vec<ExactMatrix>,
    pub split_b: Vec<ExactMatrix>,
    pub split_c: Vec<ExactMatrix>,
    /// The split diagram: `A'_0 = C_0`, `A'_i = C_i B_{i-1}`.
    pub a_prime: Vec<ExactMatrix>,
}

/// Recorded output of the root-splitting normalization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresplitResult {
    pub tilde: Vec<ExactMatrix>,
    pub b_factors: Vec<ExactMatrix>,
    pub c_factors: Vec<ExactMatrix>,
    pub changed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToeplitzArtifacts {
    /// The presplit input the pipeline consumed (`depth + 1` matrices).
    pub pre: PresplitResult,
    /// `t_i` for `i = 2..=depth`.
    pub t_seq: Vec<u64>,
    #[serde(with = "crate::util::bigint_vec")]
    pub s_seq: Vec<BigInt>,
    #[serde(with = "crate::util::bigint_vec")]
    pub l_seq: Vec<BigInt>,
    /// `k_1..k_depth` (so `k_seq[0] = 1`).
    #[serde(with = "crate::util::bigint_vec")]
    pub k_seq: Vec<BigInt>,
    /// Divisibility of the limit group is the caller's assertion, recorded
    /// here; only its finite-stage consequences are verified.
    pub divisible_asserted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionResult {
    pub mode: Mode,
    pub status: Status,
    pub target_expr: String,
    pub depth: usize,
    pub scan_limit: u64,
    pub j_seq: Vec<RationalMatrix>,
    /// Incidences of the constructed diagram (`A''` or `B`).
    pub final_incidences: Vec<ExactMatrix>,
    /// Edge orders for levels `1..depth-1` of the constructed diagram.
    pub order: Vec<Morphism>,
    pub diagnostics: Vec<Diagnostic>,
    pub observations: Vec<Observation>,
    pub main1: Option<Main1Artifacts>,
    pub toeplitz: Option<ToeplitzArtifacts>,
}

impl ConstructionResult {
    /// Rebuilds the ordered diagram from the stored matrices and order.
    pub fn diagram(&self) -> Result<BratteliDiagram> {
        BratteliDiagram::new_lenient(self.final_incidences.clone())?.with_order(self.order.clone())
    }

    /// Directive sequence read off the constructed ordered diagram.
    pub fn directive_sequence(&self) -> Result<DirectiveSequence> {
        read_morphisms(&self.diagram()?)
    }

    pub fn all_diagnostics_pass(&self) -> bool {
        self.status.is_complete() && self.diagnostics.iter().all(|d| d.pass)
    }

    pub fn first_failure(&self) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| !d.pass)
    }
}

fn push_diag(
    diags: &mut Vec<Diagnostic>,
    level: usize,
    condition: impl Into<String>,
    value: impl Into<String>,
    pass: bool,
) {
    diags.push(Diagnostic {
        level,
        condition: condition.into(),
        value: value.into(),
        pass,
    });
}

// ---------------------------------------------------------------------------
// Main construction

/// Widest telescoping window tried for a single level before giving up.
const MAX_WINDOW: usize = 4096;
/// Hard cap on expanding the repetition rule.
const MAX_HORIZON: usize = 1 << 16;

struct Expander {
    base: BratteliDiagram,
    expanded: BratteliDiagram,
    has_repeat: bool,
}

impl Expander {
    fn new(d: &BratteliDiagram) -> Self {
        Self {
            base: d.clone(),
            expanded: d.clone(),
            has_repeat: d.repeat().is_some(),
        }
    }

    fn incidence(&mut self, i: usize) -> Result<&ExactMatrix> {
        if i >= self.expanded.depth() {
            if !self.has_repeat || i >= MAX_HORIZON {
                return Err(Error::HorizonExhausted {
                    level: i,
                    detail: format!(
                        "needed incidence {} but only {} stored{}",
                        i,
                        self.expanded.depth(),
                        if self.has_repeat {
                            " (horizon cap reached)"
                        } else {
                            ""
                        }
                    ),
                });
            }
            let new_depth = (i + 1).next_power_of_two().clamp(64, MAX_HORIZON);
            self.expanded = self.base.expand(new_depth)?;
        }
        Ok(self.expanded.incidence(i))
    }

    fn level_size(&self, i: usize) -> usize {
        self.expanded.level_size(i)
    }
}

/// Runs the splitting construction: telescope until each level's minimum
/// entry clears `h^2 + h` for the greedy-minimal `h`, split with that `h`,
/// conjugate by the interleaved triangular basis and order the result.
pub fn build_main1(
    diagram: &BratteliDiagram,
    target: &ComplexityTarget,
    depth: usize,
    scan_limit: u64,
) -> Result<ConstructionResult> {
    if depth == 0 {
        return Err(Error::InsufficientDepth("depth must be at least 1".into()));
    }
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut observations: Vec<Observation> = Vec::new();
    let mut result = empty_result(Mode::Main1, target, depth, scan_limit);

    let mut expander = Expander::new(diagram);
    let mut cuts = vec![0usize];
    let mut level_sizes = vec![expander.level_size(0)];
    let mut t_seq: Vec<u64> = Vec::new();
    let mut h_seq: Vec<u64> = Vec::new();
    let mut telescoped: Vec<ExactMatrix> = Vec::new();
    let mut split_b: Vec<ExactMatrix> = Vec::new();
    let mut split_c: Vec<ExactMatrix> = Vec::new();

    macro_rules! fail {
        ($level:expr, $condition:expr) => {{
            result.status = Status::Failed {
                level: $level,
                condition: $condition,
            };
            result.diagnostics = diags;
            result.observations = observations;
            result.main1 = Some(Main1Artifacts {
                cuts,
                level_sizes,
                t_seq,
                h_seq,
                telescoped,
                split_b,
                split_c,
                a_prime: Vec::new(),
            });
            return Ok(result);
        }};
    }

    for i in 0..depth {
        let m_i = level_sizes[i];
        // The level size below the current one clamps at the root.
        let m_prev = if i == 0 {
            level_sizes[0]
        } else {
            level_sizes[i - 1]
        };
        let t_i = match threshold(target, m_i, i, scan_limit) {
            Ok(t) => t.t_star,
            Err(e @ (Error::ThresholdExhausted { .. } | Error::TargetDomain(_))) => {
                let condition = format!("threshold m^3*t/p_t < 1/{i} with m = {m_i}: {e}");
                push_diag(&mut diags, i, "threshold", &condition, false);
                fail!(i, condition);
            }
            Err(e) => return Err(e),
        };
        let h_i = t_i.max(2 * m_prev as u64) + 1;
        push_diag(
            &mut diags,
            i,
            "h > t",
            format!("h = {h_i}, t = {t_i}"),
            h_i > t_i,
        );
        push_diag(
            &mut diags,
            i,
            "h > 2 * previous level size",
            format!("h = {h_i}, m_prev = {m_prev}"),
            h_i > 2 * m_prev as u64,
        );
        t_seq.push(t_i);
        h_seq.push(h_i);

        // Greedily extend the telescoping window until the product's minimum
        // entry exceeds h^2 + h.
        let floor = BigInt::from(h_i) * BigInt::from(h_i) + BigInt::from(h_i);
        let start = cuts[i];
        let mut acc: Option<ExactMatrix> = None;
        let mut end = start;
        let window = loop {
            if end - start >= MAX_WINDOW {
                let condition = format!(
                    "telescoping window for level {i} exceeded {MAX_WINDOW} raw levels \
                     without min entry > h^2 + h = {floor}"
                );
                push_diag(&mut diags, i, "telescope window", &condition, false);
                fail!(i, condition);
            }
            let next = match expander.incidence(end) {
                Ok(m) => m.clone(),
                Err(e) => {
                    let condition = e.to_string();
                    push_diag(&mut diags, i, "telescope window", &condition, false);
                    fail!(i, condition);
                }
            };
            acc = Some(match acc {
                None => next,
                Some(a) => next.mul(&a)?,
            });
            end += 1;
            let current = acc.as_ref().expect("window non-empty");
            if *current.min_entry() > floor {
                break current.clone();
            }
        };
        push_diag(
            &mut diags,
            i,
            "h^2 + h < min entry of telescoped matrix",
            format!("h = {h_i}, min entry = {}", window.min_entry()),
            true,
        );
        cuts.push(end);
        level_sizes.push(window.rows());
        let split = split_level(&window, h_i)?;
        push_diag(
            &mut diags,
            i,
            "B(A,h) * C(A,h) = A",
            format!("{}x{} split with h = {h_i}", window.rows(), window.cols()),
            true,
        );
        telescoped.push(window);
        split_b.push(split.b);
        split_c.push(split.c);
    }

    // Split diagram: A'_0 = C_0, A'_i = C_i * B_{i-1}.
    let mut a_prime = Vec::with_capacity(depth);
    a_prime.push(split_c[0].clone());
    for i in 1..depth {
        a_prime.push(split_c[i].mul(&split_b[i - 1])?);
    }

    // Change of basis: J_0 = (1), J_i = S_i D_i over the doubled levels.
    let mut j_seq = Vec::with_capacity(depth + 1);
    j_seq.push(RationalMatrix::identity(1));
    for i in 1..=depth {
        j_seq.push(shear_times_diagonal(2 * level_sizes[i - 1], h_seq[i - 1]));
    }
    result.j_seq = j_seq;

    macro_rules! fail_with_artifacts {
        ($level:expr, $condition:expr) => {{
            result.status = Status::Failed {
                level: $level,
                condition: $condition,
            };
            result.diagnostics = diags;
            result.observations = observations;
            result.main1 = Some(Main1Artifacts {
                cuts,
                level_sizes,
                t_seq,
                h_seq,
                telescoped,
                split_b,
                split_c,
                a_prime,
            });
            return Ok(result);
        }};
    }

    // Conjugated incidences A''_i = J_{i+1} A'_i J_i^{-1}, checked exactly.
    let mut a_dprime: Vec<ExactMatrix> = Vec::with_capacity(depth);
    for i in 0..depth {
        let j_inv = result.j_seq[i].invert()?;
        let conj = result.j_seq[i + 1]
            .mul(&a_prime[i].to_rational())?
            .mul(&j_inv)?;
        let integral = conj.is_integral();
        push_diag(
            &mut diags,
            i,
            "J_{i+1} A'_i J_i^{-1} integral",
            format!("level {i}"),
            integral,
        );
        if !integral {
            fail_with_artifacts!(
                i,
                format!("conjugated incidence at level {i} is not integral")
            );
        }
        let m = conj.to_exact().expect("just checked integrality");
        let nonneg = m.is_nonnegative();
        push_diag(
            &mut diags,
            i,
            "A''_i nonnegative",
            format!("level {i}"),
            nonneg,
        );
        if !nonneg {
            fail_with_artifacts!(
                i,
                format!("conjugated incidence at level {i} has a negative entry")
            );
        }
        // Split remainders land in even columns and may vanish, so only the
        // per-column-class minima are recorded; positivity is not assumed.
        let (odd_min, even_min) = column_class_minima(&m);
        observations.push(Observation {
            level: i,
            condition: "min entries by column class (odd = scaled quotients, even = remainders)"
                .into(),
            value: format!("odd = {odd_min}, even = {even_min}"),
            holds: even_min > BigInt::zero(),
        });
        if i >= 1 {
            let next_size = BigInt::from(m.rows() as u64);
            let first_col_ok = (0..m.rows()).all(|r| *m.entry(r, 0) > next_size);
            push_diag(
                &mut diags,
                i,
                "A''_i(j,1) > next level size",
                format!("next level size = {}", m.rows()),
                first_col_ok,
            );
            if !first_col_ok {
                fail_with_artifacts!(
                    i,
                    format!(
                        "first column of conjugated incidence at level {i} does not exceed {}",
                        m.rows()
                    )
                );
            }
        }
        a_dprime.push(m);
    }

    // Order every level above the root.
    let mut order = Vec::with_capacity(depth.saturating_sub(1));
    for (i, incidence) in a_dprime.iter().enumerate().skip(1) {
        match injective_order(incidence) {
            Ok(m) => {
                push_diag(
                    &mut diags,
                    i,
                    "order (injective construction)",
                    format!("level {i}"),
                    true,
                );
                order.push(m);
            }
            Err(e) => {
                let condition = format!("ordering level {i}: {e}");
                push_diag(
                    &mut diags,
                    i,
                    "order (injective construction)",
                    &condition,
                    false,
                );
                fail_with_artifacts!(i, condition);
            }
        }
    }

    result.final_incidences = a_dprime;
    result.order = order;
    result.main1 = Some(Main1Artifacts {
        cuts,
        level_sizes,
        t_seq,
        h_seq: h_seq.clone(),
        telescoped,
        split_b,
        split_c,
        a_prime,
    });

    // Composed-norm observations: the minimum word length at level i against
    // h_{i+1}. The comparison holds only from some level on, so it is
    // recorded rather than enforced.
    let ds = result.directive_sequence()?;
    for i in 1..depth {
        if i < h_seq.len() {
            let (min_norm, _) = ds.composed_norms(i)?;
            let h_next = BigInt::from(h_seq[i]);
            observations.push(Observation {
                level: i,
                condition: "<t_[0,i)> >= h_{i+1}".into(),
                value: format!("<t_[0,{i})> = {min_norm}, h = {h_next}"),
                holds: min_norm >= h_next,
            });
        }
    }

    result.diagnostics = diags;
    result.observations = observations;
    Ok(result)
}

fn empty_result(
    mode: Mode,
    target: &ComplexityTarget,
    depth: usize,
    scan_limit: u64,
) -> ConstructionResult {
    ConstructionResult {
        mode,
        status: Status::Complete,
        target_expr: target.to_string(),
        depth,
        scan_limit,
        j_seq: Vec::new(),
        final_incidences: Vec::new(),
        order: Vec::new(),
        diagnostics: Vec::new(),
        observations: Vec::new(),
        main1: None,
        toeplitz: None,
    }
}

/// `J = S * D` on a doubled level: `D` scales odd (1-based) rows by `h`, `S`
/// adds each odd row into the even row below it.
fn shear_times_diagonal(size: usize, h: u64) -> RationalMatrix {
    let mut j = RationalMatrix::identity(size);
    let h = BigRational::from_integer(BigInt::from(h));
    for pair in 0..size / 2 {
        let odd = 2 * pair; // 0-based index of the 1-based odd row
        let even = odd + 1;
        j.set(odd, odd, h.clone());
        j.set(even, odd, h.clone());
        j.set(even, even, BigRational::one());
    }
    j
}

/// Minimum entries of the interleaved column classes (1-based odd columns
/// carry scaled quotients, even columns carry remainders).
fn column_class_minima(m: &ExactMatrix) -> (BigInt, BigInt) {
    let mut odd_min: Option<BigInt> = None;
    let mut even_min: Option<BigInt> = None;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = m.entry(r, c);
            let slot = if c % 2 == 0 {
                &mut odd_min
            } else {
                &mut even_min
            };
            match slot {
                None => *slot = Some(v.clone()),
                Some(cur) => {
                    if v < &*cur {
                        *slot = Some(v.clone());
                    }
                }
            }
        }
    }
    let odd = odd_min.unwrap_or_else(BigInt::zero);
    let even = even_min.unwrap_or_else(|| odd.clone());
    (odd, even)
}

// ---------------------------------------------------------------------------
// Toeplitz construction

/// Normalizes a positive diagram so the first level has exactly two vertices
/// reached by single edges, splitting singleton levels in two. The exact
/// intertwining of partial products is checked before returning.
pub fn presplit_divisible(a_seq: &[ExactMatrix]) -> Result<PresplitResult> {
    if a_seq.is_empty() {
        return Err(Error::InvalidDiagram("empty incidence list".into()));
    }
    for (i, a) in a_seq.iter().enumerate() {
        for r in 0..a.rows() {
            for c in 0..a.cols() {
                if !a.entry(r, c).is_positive() {
                    return Err(Error::NonPositiveEntry {
                        op: "presplit_divisible",
                        row: r + 1,
                        col: c + 1,
                        found: format!("{} in incidence {}", a.entry(r, c), i),
                    });
                }
            }
        }
    }
    let two_ones = ExactMatrix::from_rows(&[vec![1], vec![1]]);
    let already_normal = a_seq[0] == two_ones && a_seq.iter().skip(1).all(|a| a.cols() >= 2);
    if already_normal {
        return Ok(PresplitResult {
            tilde: a_seq.to_vec(),
            b_factors: Vec::new(),
            c_factors: Vec::new(),
            changed: false,
        });
    }

    // Balanced column split: two columns summing back to the original one.
    let balanced = |a: &ExactMatrix| -> ExactMatrix {
        let mut data = Vec::with_capacity(a.rows() * 2);
        for r in 0..a.rows() {
            let v = a.entry(r, 0);
            let hi: BigInt = (v + BigInt::one()) / BigInt::from(2);
            let lo = v - &hi;
            data.push(hi);
            data.push(lo);
        }
        ExactMatrix::new(a.rows(), 2, data).expect("shape is valid")
    };

    let mut b_factors = Vec::with_capacity(a_seq.len());
    let mut c_factors = Vec::with_capacity(a_seq.len());
    c_factors.push(two_ones.clone());
    b_factors.push(balanced(&a_seq[0]));
    for a in a_seq.iter().skip(1) {
        if a.cols() >= 2 {
            c_factors.push(ExactMatrix::identity(a.cols()));
            b_factors.push(a.clone());
        } else {
            c_factors.push(two_ones.clone());
            b_factors.push(balanced(a));
        }
    }
    let mut tilde = Vec::with_capacity(a_seq.len());
    tilde.push(c_factors[0].clone());
    for i in 1..a_seq.len() {
        tilde.push(c_factors[i].mul(&b_factors[i - 1])?);
    }
    // B_i C_i = A_i, hence the partial products intertwine:
    // tilde_i ... tilde_0 = C_i * (A_{i-1} ... A_0).
    for (i, (b, c)) in b_factors.iter().zip(&c_factors).enumerate() {
        assert_eq!(&b.mul(c)?, &a_seq[i], "recorded split must recompose");
    }
    let mut tilde_prod = tilde[0].clone();
    let mut a_prod: Option<ExactMatrix> = None;
    for i in 1..a_seq.len() {
        tilde_prod = tilde[i].mul(&tilde_prod)?;
        let ap = match a_prod {
            None => a_seq[i - 1].clone(),
            Some(p) => a_seq[i - 1].mul(&p)?,
        };
        assert_eq!(
            tilde_prod,
            c_factors[i].mul(&ap)?,
            "presplit intertwining failed at level {i}"
        );
        a_prod = Some(ap);
    }
    Ok(PresplitResult {
        tilde,
        b_factors,
        c_factors,
        changed: true,
    })
}

/// Runs the equal-row-sum rescaling. The caller asserts that the limit group
/// is divisible; the pipeline verifies the finite-stage consequences (row
/// sums, divisibility by the level index, entry growth) exactly.
pub fn build_toeplitz(
    diagram: &BratteliDiagram,
    target: &ComplexityTarget,
    depth: usize,
    scan_limit: u64,
) -> Result<ConstructionResult> {
    if depth < 2 {
        return Err(Error::InsufficientDepth("depth must be at least 2".into()));
    }
    let expanded = diagram.expand(depth + 1)?;
    let pre = presplit_divisible(expanded.incidences())?;
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut result = empty_result(Mode::Toeplitz, target, depth, scan_limit);

    let artifacts = |pre: PresplitResult,
                     t_seq: Vec<u64>,
                     s_seq: Vec<BigInt>,
                     l_seq: Vec<BigInt>,
                     k_seq: Vec<BigInt>| ToeplitzArtifacts {
        pre,
        t_seq,
        s_seq,
        l_seq,
        k_seq,
        divisible_asserted: true,
    };

    for (i, a) in pre.tilde.iter().enumerate() {
        if !a.is_positive() {
            let condition = format!("presplit output at level {i} is not positive");
            push_diag(&mut diags, i, "presplit positive", &condition, false);
            result.status = Status::Failed {
                level: i,
                condition,
            };
            result.diagnostics = diags;
            result.toeplitz = Some(artifacts(
                pre,
                Vec::new(),
                Vec::new(),
                Vec::new(),
                Vec::new(),
            ));
            return Ok(result);
        }
    }
    let two_ones = ExactMatrix::from_rows(&[vec![1], vec![1]]);
    assert_eq!(
        pre.tilde[0], two_ones,
        "presplit must normalize the root level"
    );

    let m1 = pre.tilde[0].rows();
    let mut b_seq: Vec<ExactMatrix> = vec![pre.tilde[0].clone()];
    let mut j_seq: Vec<RationalMatrix> =
        vec![RationalMatrix::identity(1), RationalMatrix::identity(m1)];
    let mut k_seq: Vec<BigInt> = vec![BigInt::one()];
    let mut t_seq: Vec<u64> = Vec::new();
    let mut s_seq: Vec<BigInt> = Vec::new();
    let mut l_seq: Vec<BigInt> = Vec::new();

    macro_rules! fail {
        ($level:expr, $condition:expr) => {{
            result.status = Status::Failed {
                level: $level,
                condition: $condition,
            };
            result.diagnostics = diags;
            result.j_seq = j_seq;
            result.final_incidences = b_seq;
            result.toeplitz = Some(artifacts(pre, t_seq, s_seq, l_seq, k_seq));
            return Ok(result);
        }};
    }

    for i in 2..=depth {
        let a_prev = &pre.tilde[i - 1];
        let level_size = a_prev.rows(); // m_i
        let next_size = pre.tilde[i].rows(); // m_{i+1}
        let j_prev_inv = j_seq[i - 1].invert()?;
        let unnormalized = a_prev.to_rational().mul(&j_prev_inv)?;
        let row_sums = unnormalized.row_sums();
        if row_sums.iter().any(|s| !s.is_positive()) {
            let condition = format!("row normalization impossible at level {i} (zero row)");
            push_diag(&mut diags, i - 1, "row normalization", &condition, false);
            fail!(i - 1, condition);
        }
        let j_prime = RationalMatrix::diagonal(row_sums.iter().map(|s| s.recip()).collect());
        let normalized = j_prime.mul(&unnormalized)?;
        let s_i = normalized.lcm_denominators();
        let t_i = match threshold(target, next_size, i + 1, scan_limit) {
            Ok(t) => t.t_star,
            Err(e @ (Error::ThresholdExhausted { .. } | Error::TargetDomain(_))) => {
                let condition = format!(
                    "threshold m^3*t/p_t < 1/{} with m = {next_size}: {e}",
                    i + 1
                );
                push_diag(&mut diags, i - 1, "threshold", &condition, false);
                fail!(i - 1, condition);
            }
            Err(e) => return Err(e),
        };
        // Smallest l with  i*s*l > t_i  and  i*s*l*min(normalized) > m_i.
        let i_s = BigInt::from(i as u64) * &s_i;
        let l_from_t = BigInt::from(t_i) / &i_s + BigInt::one();
        let min_entry = normalized_min(&normalized);
        let l_from_m = (BigInt::from(level_size as u64) * min_entry.denom())
            / (&i_s * min_entry.numer())
            + BigInt::one();
        let l_i = l_from_t.max(l_from_m).max(BigInt::one());
        let k_i = &i_s * &l_i;
        let j_i = j_prime.scale(&BigRational::from_integer(k_i.clone()));
        let scaled = normalized.scale(&BigRational::from_integer(k_i.clone()));
        let integral = scaled.is_integral();
        push_diag(
            &mut diags,
            i - 1,
            "B = J_i A J_{i-1}^{-1} integral",
            format!("k_{i} = {k_i}, s_{i} = {s_i}, l_{i} = {l_i}"),
            integral,
        );
        if !integral {
            fail!(
                i - 1,
                format!("rescaled incidence at level {} is not integral", i - 1)
            );
        }
        let b = scaled.to_exact().expect("just checked integrality");
        let (ers, row_sum) = b.is_ers();
        let ers_matches = ers && row_sum.as_ref() == Some(&k_i);
        push_diag(
            &mut diags,
            i - 1,
            "ERS with row sum k_i",
            format!("row sum = {}, k_{i} = {k_i}", fmt_opt(&row_sum)),
            ers_matches,
        );
        let divisible = b.is_divisible_big(&BigInt::from(i as u64));
        push_diag(
            &mut diags,
            i - 1,
            "entries divisible by level index + 1",
            format!("modulus = {i}"),
            divisible,
        );
        let entries_big = *b.min_entry() > BigInt::from(level_size as u64);
        push_diag(
            &mut diags,
            i - 1,
            "entries > m_i",
            format!("min entry = {}, m_i = {level_size}", b.min_entry()),
            entries_big,
        );
        let k_beats_t = k_i > BigInt::from(t_i);
        push_diag(
            &mut diags,
            i - 1,
            "k_i > t_i",
            format!("k = {k_i}, t = {t_i}"),
            k_beats_t,
        );
        if !(ers_matches && divisible && entries_big && k_beats_t) {
            fail!(
                i - 1,
                format!("rescaling invariant violated at level {}", i - 1)
            );
        }
        b_seq.push(b);
        j_seq.push(j_i);
        k_seq.push(k_i);
        t_seq.push(t_i);
        s_seq.push(s_i);
        l_seq.push(l_i);
    }

    // Order levels 1..depth-1 of the rescaled diagram.
    let mut order = Vec::with_capacity(depth - 1);
    for (i, incidence) in b_seq.iter().enumerate().skip(1) {
        match injective_order(incidence) {
            Ok(m) => {
                push_diag(
                    &mut diags,
                    i,
                    "order (injective construction)",
                    format!("level {i}"),
                    true,
                );
                order.push(m);
            }
            Err(e) => {
                let condition = format!("ordering level {i}: {e}");
                push_diag(
                    &mut diags,
                    i,
                    "order (injective construction)",
                    &condition,
                    false,
                );
                fail!(i, condition);
            }
        }
    }

    result.final_incidences = b_seq;
    result.order = order;
    result.j_seq = j_seq;
    result.toeplitz = Some(artifacts(pre, t_seq, s_seq, l_seq, k_seq));
    result.diagnostics = diags;
    Ok(result)
}

fn fmt_opt(x: &Option<BigInt>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => "unequal".into(),
    }
}

fn normalized_min(m: &RationalMatrix) -> BigRational {
    let mut min: Option<BigRational> = None;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = m.entry(r, c);
            match &min {
                None => min = Some(v.clone()),
                Some(cur) => {
                    if v < cur {
                        min = Some(v.clone());
                    }
                }
            }
        }
    }
    min.expect("matrix non-empty")
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Clone, Debug, Serialize)]
pub struct IntertwiningCheck {
    pub level: usize,
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecadeRatio {
    pub decade_start: u64,
    pub max_at_n: u64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErsCheck {
    pub level: usize,
    pub ers: bool,
    pub row_sum_matches_k: bool,
    pub divisible: bool,
    pub entries_exceed_size: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct VerificationOptions {
    /// Profile horizon N.
    pub horizon: usize,
    pub toeplitz_window: usize,
    pub seed: u64,
    pub profile: ProfileOptions,
}

impl Default for VerificationOptions {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            toeplitz_window: 10_000,
            seed: 0,
            profile: ProfileOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub skipped: bool,
    pub bounds_checked: usize,
    /// `n` values below the first norm or beyond the stored regime, where no
    /// bound is defined.
    pub bounds_out_of_range: usize,
    pub bound_violations: Vec<u64>,
    pub coarse_violations: Vec<u64>,
    pub ratio_decades: Vec<DecadeRatio>,
    pub decades_strictly_decreasing: bool,
    pub intertwinings: Vec<IntertwiningCheck>,
    pub adapted: Option<AdaptedReport>,
    pub recognizability: Vec<RecognizabilityReport>,
    pub ers_checks: Option<Vec<ErsCheck>>,
    pub toeplitz_window: Option<ToeplitzReport>,
    pub regime_always_first: Option<bool>,
    pub boshernitzan: Option<BoshernitzanBound>,
    pub profile_evidence: Option<ProfileEvidence>,
}

impl VerificationReport {
    /// Every enforced assertion: bounds, decade decrease, intertwinings,
    /// marker or decoding duty per ordered level, and the equal-row-sum and
    /// window structure when the pipeline claims Toeplitz. Adapted-sequence
    /// facts are reported, not enforced.
    pub fn passed(&self) -> bool {
        if self.skipped {
            return false;
        }
        let recognizability_ok = self.recognizability.iter().all(|r| {
            if r.codomain >= 3 {
                r.marker_holds() && r.decoding_unique
            } else {
                r.marker_exception_m2 && (!r.letter_injective || r.decoding_unique)
            }
        });
        self.bound_violations.is_empty()
            && self.coarse_violations.is_empty()
            && self.decades_strictly_decreasing
            && self.intertwinings.iter().all(|c| c.pass)
            && recognizability_ok
            && self.ers_checks.as_ref().is_none_or(|v| {
                v.iter()
                    .all(|c| c.ers && c.row_sum_matches_k && c.divisible && c.entries_exceed_size)
            })
            && self.toeplitz_window.as_ref().is_none_or(|t| t.flag)
    }
}

pub struct VerifyOutcome {
    pub report: VerificationReport,
    pub profile: Option<ComplexityProfile>,
}

/// Brute-force verification of a finished construction: complexity bounds at
/// every computable `n`, ratio decay per decade, the exact finite-stage
/// intertwinings, recognizability evidence, and (for the Toeplitz pipeline)
/// equal row sums, divisibility and window periodicity. Only finite evidence
/// is asserted; no limit claims are made.
pub fn verify_construction(
    res: &ConstructionResult,
    target: &ComplexityTarget,
    opts: &VerificationOptions,
) -> Result<VerifyOutcome> {
    if !res.status.is_complete() {
        return Ok(VerifyOutcome {
            report: skipped_report(),
            profile: None,
        });
    }
    let ds = res.directive_sequence()?;
    let profile = complexity_profile_with(&ds, opts.horizon, opts.profile)?;
    let table = BoundTable::new(&ds)?;

    let horizon = opts.horizon as u64;
    let (bound_violations, coarse_violations, out_of_range, regime_always_first) =
        check_bounds(&table, &profile, horizon);
    let bounds_checked = horizon as usize - out_of_range;

    let (ratio_decades, decades_strictly_decreasing) = decade_ratios(target, &profile, horizon)?;

    let mut intertwinings = Vec::new();
    let adapted;
    let mut ers_checks = None;
    let mut toeplitz_window = None;
    match res.mode {
        Mode::Main1 => {
            let art = res
                .main1
                .as_ref()
                .ok_or_else(|| Error::InvalidDiagram("main1 result without artifacts".into()))?;
            verify_main1_intertwinings(res, art, &mut intertwinings)?;
            adapted = Some(verify_adapted(&art.a_prime, &res.j_seq, res.depth)?);
        }
        Mode::Toeplitz => {
            let art = res
                .toeplitz
                .as_ref()
                .ok_or_else(|| Error::InvalidDiagram("toeplitz result without artifacts".into()))?;
            verify_toeplitz_intertwinings(res, art, &mut intertwinings)?;
            adapted = Some(verify_adapted(
                &art.pre.tilde[..res.depth],
                &res.j_seq,
                res.depth,
            )?);
            ers_checks = Some(toeplitz_structure_checks(res, art));
            if opts.toeplitz_window > 0 {
                let window_len = opts.toeplitz_window.min(max_window(&ds)?);
                let window = crate::language::expand_prefix(&ds, 0, 0, window_len)?;
                let candidates = default_toeplitz_window_candidates(&art.k_seq);
                toeplitz_window = Some(toeplitz_check(&window, &candidates));
            }
        }
    }

    // Recognizability per ordered level: exhaustive marker scans everywhere,
    // the heavier decoding sample on the two-letter levels.
    let mut recognizability = Vec::new();
    for i in 1..ds.len() {
        let m = ds.morphism(i);
        let words = if m.codomain() == 2 {
            default_recognizability_sample(m.domain(), opts.seed)
        } else {
            short_sample(m.domain())
        };
        recognizability.push(verify_recognizability(m, &words, usize::MAX));
    }

    let boshernitzan = Some(boshernitzan_bound(&profile));

    let report = VerificationReport {
        skipped: false,
        bounds_checked,
        bounds_out_of_range: out_of_range,
        bound_violations,
        coarse_violations,
        ratio_decades,
        decades_strictly_decreasing,
        intertwinings,
        adapted,
        recognizability,
        ers_checks,
        toeplitz_window,
        regime_always_first,
        boshernitzan,
        profile_evidence: Some(profile.evidence.clone()),
    };
    Ok(VerifyOutcome {
        report,
        profile: Some(profile),
    })
}

fn skipped_report() -> VerificationReport {
    VerificationReport {
        skipped: true,
        bounds_checked: 0,
        bounds_out_of_range: 0,
        bound_violations: Vec::new(),
        coarse_violations: Vec::new(),
        ratio_decades: Vec::new(),
        decades_strictly_decreasing: false,
        intertwinings: Vec::new(),
        adapted: None,
        recognizability: Vec::new(),
        ers_checks: None,
        toeplitz_window: None,
        regime_always_first: None,
        boshernitzan: None,
        profile_evidence: None,
    }
}

fn short_sample(domain: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for a in 0..domain as u32 {
        out.push(vec![a]);
        for b in 0..domain as u32 {
            out.push(vec![a, b]);
        }
    }
    out
}

fn max_window(ds: &DirectiveSequence) -> Result<usize> {
    let lens = ds.composed_incidence(0, ds.len())?.col_sums();
    Ok(lens
        .iter()
        .map(|l| l.to_usize().unwrap_or(usize::MAX))
        .max()
        .unwrap_or(0))
}

type BoundScan = (Vec<u64>, Vec<u64>, usize, Option<bool>);

fn check_bounds(table: &BoundTable, profile: &ComplexityProfile, horizon: u64) -> BoundScan {
    let ns: Vec<u64> = (1..=horizon).collect();
    let scan_chunk = |chunk: &[u64]| -> (Vec<u64>, Vec<u64>, usize, bool) {
        let mut bound_viol = Vec::new();
        let mut coarse_viol = Vec::new();
        let mut oor = 0usize;
        let mut all_first = true;
        for &n in chunk {
            let p = BigInt::from(profile.count(n as usize));
            match table.bound(n) {
                Ok(b) => {
                    if b.regime != Regime::I {
                        all_first = false;
                    }
                    if p > b.bound {
                        bound_viol.push(n);
                    }
                }
                Err(_) => {
                    oor += 1;
                    continue;
                }
            }
            if let Ok(b) = table.coarse(n) {
                if p > b.bound {
                    coarse_viol.push(n);
                }
            }
        }
        (bound_viol, coarse_viol, oor, all_first)
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<(Vec<u64>, Vec<u64>, usize, bool)> =
        ns.par_chunks(4096).map(scan_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<(Vec<u64>, Vec<u64>, usize, bool)> =
        ns.chunks(4096).map(scan_chunk).collect();
    let mut bound_violations = Vec::new();
    let mut coarse_violations = Vec::new();
    let mut out_of_range = 0usize;
    let mut all_first = true;
    for (b, c, o, f) in partials {
        bound_violations.extend(b);
        coarse_violations.extend(c);
        out_of_range += o;
        all_first &= f;
    }
    (
        bound_violations,
        coarse_violations,
        out_of_range,
        Some(all_first),
    )
}

fn decade_ratios(
    target: &ComplexityTarget,
    profile: &ComplexityProfile,
    horizon: u64,
) -> Result<(Vec<DecadeRatio>, bool)> {
    let mut decades = Vec::new();
    let mut maxima: Vec<(BigInt, u64)> = Vec::new();
    let mut start = 1u64;
    while start <= horizon {
        let end = (start * 10).min(horizon + 1);
        let mut best: Option<(BigInt, u64)> = None;
        for n in start..end {
            let p = BigInt::from(profile.count(n as usize));
            best = Some(match best {
                None => (p, n),
                Some((bp, bn)) => {
                    if target.ratio_cmp(&p, n, &bp, bn)? == std::cmp::Ordering::Greater {
                        (p, n)
                    } else {
                        (bp, bn)
                    }
                }
            });
        }
        let (bp, bn) = best.expect("decade non-empty");
        decades.push(DecadeRatio {
            decade_start: start,
            max_at_n: bn,
            max_ratio: bp.to_f64().unwrap_or(f64::NAN) / target.value_f64(bn),
        });
        maxima.push((bp, bn));
        start = end;
    }
    let mut decreasing = true;
    for w in maxima.windows(2) {
        let (ref p0, n0) = w[0];
        let (ref p1, n1) = w[1];
        if target.ratio_cmp(p1, n1, p0, n0)? != std::cmp::Ordering::Less {
            decreasing = false;
        }
    }
    Ok((decades, decreasing))
}

fn verify_main1_intertwinings(
    res: &ConstructionResult,
    art: &Main1Artifacts,
    out: &mut Vec<IntertwiningCheck>,
) -> Result<()> {
    // A_i ... A_0 = B_i * (A'_i ... A'_0), exactly, at every stored level.
    let mut tel_prod: Option<ExactMatrix> = None;
    let mut prime_prod: Option<ExactMatrix> = None;
    for i in 0..res.depth {
        tel_prod = Some(match tel_prod {
            None => art.telescoped[0].clone(),
            Some(p) => art.telescoped[i].mul(&p)?,
        });
        prime_prod = Some(match prime_prod {
            None => art.a_prime[0].clone(),
            Some(p) => art.a_prime[i].mul(&p)?,
        });
        let lhs = tel_prod.as_ref().expect("set above");
        let rhs = art.split_b[i].mul(prime_prod.as_ref().expect("set above"))?;
        out.push(IntertwiningCheck {
            level: i,
            name: "A_i...A_0 = B_i (A'_i...A'_0)".into(),
            pass: *lhs == rhs,
        });
    }
    // A''_i ... A''_0 * J_0 = J_{i+1} * (A'_i ... A'_0).
    let mut dp_prod: Option<RationalMatrix> = None;
    let mut prime_prod: Option<RationalMatrix> = None;
    for i in 0..res.depth {
        let dp = res.final_incidences[i].to_rational();
        dp_prod = Some(match dp_prod {
            None => dp,
            Some(p) => dp.mul(&p)?,
        });
        let ap = art.a_prime[i].to_rational();
        prime_prod = Some(match prime_prod {
            None => ap,
            Some(p) => ap.mul(&p)?,
        });
        let lhs = dp_prod.as_ref().expect("set above").mul(&res.j_seq[0])?;
        let rhs = res.j_seq[i + 1].mul(prime_prod.as_ref().expect("set above"))?;
        out.push(IntertwiningCheck {
            level: i,
            name: "A''_i...A''_0 J_0 = J_{i+1} (A'_i...A'_0)".into(),
            pass: lhs == rhs,
        });
    }
    // Re-derive each A''_i from the stored factors (adapted condition (2)).
    for i in 0..res.depth {
        let rebuilt = res.j_seq[i + 1]
            .mul(&art.a_prime[i].to_rational())?
            .mul(&res.j_seq[i].invert()?)?;
        let pass = rebuilt
            .to_exact()
            .map(|m| m == res.final_incidences[i])
            .unwrap_or(false);
        out.push(IntertwiningCheck {
            level: i,
            name: "adapted condition (2): stored A''_i = J_{i+1} A'_i J_i^{-1}".into(),
            pass,
        });
    }
    Ok(())
}

fn verify_toeplitz_intertwinings(
    res: &ConstructionResult,
    art: &ToeplitzArtifacts,
    out: &mut Vec<IntertwiningCheck>,
) -> Result<()> {
    out.push(IntertwiningCheck {
        level: 0,
        name: "B_0 = A_0".into(),
        pass: res.final_incidences[0] == art.pre.tilde[0],
    });
    for i in 1..res.depth {
        let rebuilt = res.j_seq[i + 1]
            .mul(&art.pre.tilde[i].to_rational())?
            .mul(&res.j_seq[i].invert()?)?;
        let pass = rebuilt
            .to_exact()
            .map(|m| m == res.final_incidences[i])
            .unwrap_or(false);
        out.push(IntertwiningCheck {
            level: i,
            name: "adapted condition (2): stored B_i = J_{i+1} A_i J_i^{-1}".into(),
            pass,
        });
    }
    Ok(())
}

fn toeplitz_structure_checks(res: &ConstructionResult, art: &ToeplitzArtifacts) -> Vec<ErsCheck> {
    let mut checks = Vec::new();
    for (i, b) in res.final_incidences.iter().enumerate() {
        let (ers, sum) = b.is_ers();
        let row_sum_matches_k = match (ers, art.k_seq.get(i), &sum) {
            (true, Some(k), Some(s)) => k == s,
            _ => false,
        };
        let divisible = b.is_divisible_big(&BigInt::from(i as u64 + 1));
        let entries_exceed_size = if i >= 1 {
            *b.min_entry() > BigInt::from(b.cols() as u64)
        } else {
            true // the root column (1,1)^t is exempt
        };
        checks.push(ErsCheck {
            level: i,
            ers,
            row_sum_matches_k,
            divisible,
            entries_exceed_size,
        });
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactMatrix;

    fn main1_sample_diagram() -> BratteliDiagram {
        BratteliDiagram::new(vec![ExactMatrix::from_rows(&[vec![1], vec![1]])])
            .unwrap()
            .with_repeat(vec![ExactMatrix::from_rows(&[vec![3, 1], vec![1, 3]])])
            .unwrap()
    }

    fn toeplitz_sample_diagram() -> BratteliDiagram {
        BratteliDiagram::new(vec![ExactMatrix::from_rows(&[vec![1], vec![1]])])
            .unwrap()
            .with_repeat(vec![ExactMatrix::from_rows(&[vec![1, 1], vec![1, 2]])])
            .unwrap()
    }

    #[test]
    fn threshold_worked_examples() {
        let t32 = ComplexityTarget::parse("n^1.5").unwrap();
        assert_eq!(threshold(&t32, 2, 1, 100_000).unwrap().t_star, 65);
        assert_eq!(threshold(&t32, 2, 2, 100_000).unwrap().t_star, 257);
        let quad = ComplexityTarget::parse("n^2").unwrap();
        assert_eq!(threshold(&quad, 1, 1, 100_000).unwrap().t_star, 2);
        // Level 0 is vacuous.
        assert_eq!(threshold(&t32, 5, 0, 100).unwrap().t_star, 1);
        // A linear target never clears the condition.
        let linear = ComplexityTarget::parse("n").unwrap();
        assert!(matches!(
            threshold(&linear, 2, 1, 1000),
            Err(Error::ThresholdExhausted { .. })
        ));
    }

    #[test]
    fn main1_worked_pipeline() {
        let d = main1_sample_diagram();
        let target = ComplexityTarget::parse("n^1.5").unwrap();
        let res = build_main1(&d, &target, 4, 100_000).unwrap();
        assert!(
            res.status.is_complete(),
            "failure: {:?}",
            res.first_failure()
        );
        assert!(res.all_diagnostics_pass());
        let art = res.main1.as_ref().unwrap();
        assert_eq!(art.t_seq, vec![1, 65, 257, 577]);
        assert_eq!(art.h_seq, vec![3, 66, 258, 578]);
        assert_eq!(art.cuts, vec![0, 3, 10, 19, 29]);
        assert_eq!(
            art.telescoped[0],
            ExactMatrix::from_rows(&[vec![16], vec![16]])
        );
        assert_eq!(
            res.final_incidences[0],
            ExactMatrix::from_rows(&[vec![3], vec![4]])
        );
        assert_eq!(
            res.final_incidences[1],
            ExactMatrix::from_rows(&[vec![264, 66], vec![268, 67], vec![264, 66], vec![268, 67]])
        );
        assert_eq!(
            res.final_incidences[2],
            ExactMatrix::from_rows(&[
                vec![30702, 1548, 29154, 2580],
                vec![30821, 1554, 29267, 2590],
                vec![29154, 2580, 30702, 1548],
                vec![29267, 2590, 30821, 1554]
            ])
        );
        // The sequence reads back with a hat morphism into 7 edge letters.
        let ds = res.directive_sequence().unwrap();
        assert_eq!(ds.alphabet_size(0), 7);
        assert!(ds.flags(0).hat);
        assert!(ds.primitivity_witness().is_some());
    }

    #[test]
    fn main1_rejects_linear_target() {
        let d = main1_sample_diagram();
        let target = ComplexityTarget::parse("n").unwrap();
        let res = build_main1(&d, &target, 3, 10_000).unwrap();
        match &res.status {
            Status::Failed { level, condition } => {
                assert_eq!(*level, 1);
                assert!(condition.contains("threshold"), "{condition}");
            }
            Status::Complete => panic!("linear target must fail the threshold scan"),
        }
    }

    #[test]
    fn main1_rejects_unreachable_positivity() {
        // A permutation tail never produces a positive telescoped product.
        let d = BratteliDiagram::new(vec![ExactMatrix::from_rows(&[vec![1], vec![1]])])
            .unwrap()
            .with_repeat(vec![ExactMatrix::from_rows(&[vec![1, 0], vec![0, 1]])])
            .unwrap();
        let target = ComplexityTarget::parse("n^1.5").unwrap();
        let res = build_main1(&d, &target, 2, 10_000).unwrap();
        match &res.status {
            Status::Failed { condition, .. } => {
                assert!(condition.contains("window"), "{condition}");
            }
            Status::Complete => panic!("permutation diagram cannot telescope to positivity"),
        }
    }

    #[test]
    fn presplit_examples() {
        // Singleton chain.
        let a = vec![
            ExactMatrix::from_rows(&[vec![2]]),
            ExactMatrix::from_rows(&[vec![3]]),
        ];
        let p = presplit_divisible(&a).unwrap();
        assert!(p.changed);
        assert_eq!(p.tilde[0], ExactMatrix::from_rows(&[vec![1], vec![1]]));
        assert_eq!(p.b_factors[0], ExactMatrix::from_rows(&[vec![1, 1]]));
        assert_eq!(
            p.tilde[1],
            ExactMatrix::from_rows(&[vec![1, 1], vec![1, 1]])
        );
        // Already normalized.
        let a = vec![
            ExactMatrix::from_rows(&[vec![1], vec![1]]),
            ExactMatrix::from_rows(&[vec![1, 1], vec![1, 2]]),
        ];
        let p = presplit_divisible(&a).unwrap();
        assert!(!p.changed);
        assert_eq!(p.tilde, a);
        // Mixed sizes come out at least two wide past the root.
        let a = vec![
            ExactMatrix::from_rows(&[vec![3], vec![2]]),
            ExactMatrix::from_rows(&[vec![2, 3], vec![4, 5]]),
        ];
        let p = presplit_divisible(&a).unwrap();
        assert!(p.changed);
        for t in &p.tilde {
            assert!(t.rows() >= 2);
        }
        // Nonpositive input is a precondition violation.
        let a = vec![ExactMatrix::from_rows(&[vec![0], vec![1]])];
        assert!(matches!(
            presplit_divisible(&a),
            Err(Error::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn toeplitz_worked_pipeline() {
        let d = toeplitz_sample_diagram();
        let target = ComplexityTarget::parse("n^2").unwrap();
        let res = build_toeplitz(&d, &target, 4, 100_000).unwrap();
        assert!(
            res.status.is_complete(),
            "failure: {:?}",
            res.first_failure()
        );
        assert!(res.all_diagnostics_pass());
        let art = res.toeplitz.as_ref().unwrap();
        // Hand-checked level values.
        assert_eq!(art.t_seq, vec![25, 33, 41]);
        assert_eq!(
            art.s_seq,
            vec![BigInt::from(6), BigInt::from(20), BigInt::from(273)]
        );
        assert_eq!(
            art.l_seq,
            vec![BigInt::from(3), BigInt::one(), BigInt::one()]
        );
        assert_eq!(
            art.k_seq,
            vec![
                BigInt::one(),
                BigInt::from(36),
                BigInt::from(60),
                BigInt::from(1092)
            ]
        );
        assert_eq!(
            res.final_incidences[1],
            ExactMatrix::from_rows(&[vec![18, 18], vec![12, 24]])
        );
        assert_eq!(
            res.final_incidences[2],
            ExactMatrix::from_rows(&[vec![24, 36], vec![15, 45]])
        );
        assert_eq!(
            res.final_incidences[3],
            ExactMatrix::from_rows(&[vec![420, 672], vec![260, 832]])
        );
    }

    #[test]
    fn ers_composed_norms_are_row_sum_products() {
        // With every level ERS, min and max composed norms coincide and both
        // equal the product of the recorded row sums, so the upper regime is
        // empty at every level.
        let d = toeplitz_sample_diagram();
        let target = ComplexityTarget::parse("n^2").unwrap();
        let res = build_toeplitz(&d, &target, 4, 100_000).unwrap();
        let art = res.toeplitz.as_ref().unwrap();
        let ds = res.directive_sequence().unwrap();
        let mut product = BigInt::one();
        for i in 1..=ds.len() {
            product *= &art.k_seq[i - 1];
            let (min, max) = ds.composed_norms(i).unwrap();
            assert_eq!(min, max, "ERS composition must have uniform lengths");
            assert_eq!(min, product, "norm at level {i}");
        }
    }

    #[test]
    fn toeplitz_rejects_linear_target() {
        let d = toeplitz_sample_diagram();
        let target = ComplexityTarget::parse("n").unwrap();
        let res = build_toeplitz(&d, &target, 3, 10_000).unwrap();
        assert!(!res.status.is_complete());
    }

    #[test]
    fn toeplitz_rejects_nonpositive_input() {
        let d = BratteliDiagram::new_lenient(vec![
            ExactMatrix::from_rows(&[vec![1], vec![1]]),
            ExactMatrix::from_rows(&[vec![1, 0], vec![1, 2]]),
            ExactMatrix::from_rows(&[vec![1, 1], vec![1, 2]]),
            ExactMatrix::from_rows(&[vec![1, 1], vec![1, 2]]),
            ExactMatrix::from_rows(&[vec![1, 1], vec![1, 2]]),
        ])
        .unwrap();
        let target = ComplexityTarget::parse("n^2").unwrap();
        assert!(matches!(
            build_toeplitz(&d, &target, 4, 10_000),
            Err(Error::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn verify_main1_sample() {
        let d = main1_sample_diagram();
        let target = ComplexityTarget::parse("n^1.5").unwrap();
        let res = build_main1(&d, &target, 4, 100_000).unwrap();
        assert!(res.status.is_complete());
        let opts = VerificationOptions {
            horizon: 2000,
            toeplitz_window: 0,
            seed: 0,
            profile: ProfileOptions::default(),
        };
        let out = verify_construction(&res, &target, &opts).unwrap();
        assert!(out.report.passed(), "{}", summarize(&out.report));
        assert!(out.report.bound_violations.is_empty());
        assert!(out.report.decades_strictly_decreasing);
        // The adapted report carries the facts: deeper products clear the
        // denominators at every level, conjugates are integral, literal
        // entrywise positivity of J^{-1} fails for the triangular basis.
        let adapted = out.report.adapted.as_ref().unwrap();
        assert!(adapted.operational());
        // J_0 = (1) is trivially positive; every triangular J_i beyond it
        // has a negative inverse entry.
        assert!(adapted
            .levels
            .iter()
            .skip(1)
            .all(|l| !l.j_inverse_entrywise_positive));
    }

    #[test]
    fn verify_toeplitz_sample() {
        let d = toeplitz_sample_diagram();
        let target = ComplexityTarget::parse("n^2").unwrap();
        let res = build_toeplitz(&d, &target, 4, 100_000).unwrap();
        assert!(res.status.is_complete());
        let opts = VerificationOptions {
            horizon: 2000,
            toeplitz_window: 10_000,
            seed: 0,
            profile: ProfileOptions::default(),
        };
        let out = verify_construction(&res, &target, &opts).unwrap();
        assert!(out.report.passed(), "{}", summarize(&out.report));
        assert_eq!(out.report.regime_always_first, Some(true));
        let toep = out.report.toeplitz_window.as_ref().unwrap();
        assert!(toep.flag);
        assert!(toep.verified > toep.window_len / 2);
        let ers = out.report.ers_checks.as_ref().unwrap();
        assert!(ers.iter().all(|c| c.ers && c.row_sum_matches_k));
    }

    #[test]
    fn verify_skips_failed_result() {
        let d = main1_sample_diagram();
        let target = ComplexityTarget::parse("n").unwrap();
        let res = build_main1(&d, &target, 3, 10_000).unwrap();
        assert!(!res.status.is_complete());
        let good_target = ComplexityTarget::parse("n^1.5").unwrap();
        let out = verify_construction(&res, &good_target, &VerificationOptions::default()).unwrap();
        assert!(out.report.skipped);
        assert!(!out.report.passed());
    }

    #[test]
    fn result_json_round_trip() {
        let d = toeplitz_sample_diagram();
        let target = ComplexityTarget::parse("n^2").unwrap();
        let res = build_toeplitz(&d, &target, 3, 50_000).unwrap();
        assert!(res.all_diagnostics_pass());
        let s = serde_json::to_string(&res).unwrap();
        let back: ConstructionResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back.final_incidences, res.final_incidences);
        assert_eq!(back.j_seq, res.j_seq);
        assert_eq!(back.status, res.status);
    }

    fn summarize(r: &VerificationReport) -> String {
        format!(
            "bounds: {} viol / {} oor, coarse: {} viol, decades dec: {}, intertwinings: {}/{}, \
             recog: {:?}",
            r.bound_violations.len(),
            r.bounds_out_of_range,
            r.coarse_violations.len(),
            r.decades_strictly_decreasing,
            r.intertwinings.iter().filter(|c| c.pass).count(),
            r.intertwinings.len(),
            r.recognizability
                .iter()
                .map(|x| (x.codomain, x.marker_holds(), x.decoding_unique))
                .collect::<Vec<_>>()
        )
    }
}
