//! Bratteli diagrams: finite truncations with an optional repetition rule,
//! telescoping, level splitting, path counts and adapted-sequence checks.
//!
//! A diagram stores one root vertex, the level sizes `|V_0|..|V_L|` and the
//! incidence matrices `A_0..A_{L-1}`, where `A_i` is `|V_{i+1}| x |V_i|`.
//! Infinite diagrams are handled by expanding the repetition rule to a
//! requested depth before any processing.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ExactMatrix, RationalMatrix};
use crate::morphism::{DirectiveSequence, Letter, Morphism};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BratteliDiagram {
    level_sizes: Vec<usize>,
    incidences: Vec<ExactMatrix>,
    /// Edge orders for levels `1..L-1`, one morphism per ordered level; the
    /// morphism at index `i-1` lists, for each level `i+1` vertex, the ordered
    /// sources of its incoming edges.
    order: Option<Vec<Morphism>>,
    /// Matrices appended cyclically after the stored prefix on expansion.
    repeat: Option<Vec<ExactMatrix>>,
}

impl BratteliDiagram {
    /// Validating constructor for externally supplied diagrams: one root,
    /// chained shapes, nonnegative entries, no empty rows or columns.
    pub fn new(incidences: Vec<ExactMatrix>) -> Result<Self> {
        let d = Self::assemble(incidences)?;
        for (i, a) in d.incidences.iter().enumerate() {
            for r in 0..a.rows() {
                if (0..a.cols()).all(|c| a.entry(r, c).is_zero()) {
                    return Err(Error::InvalidDiagram(format!(
                        "row {} of incidence {} is zero (vertex with no incoming edges)",
                        r + 1,
                        i
                    )));
                }
            }
            for c in 0..a.cols() {
                if (0..a.rows()).all(|r| a.entry(r, c).is_zero()) {
                    return Err(Error::InvalidDiagram(format!(
                        "column {} of incidence {} is zero (vertex with no outgoing edges)",
                        c + 1,
                        i
                    )));
                }
            }
        }
        Ok(d)
    }

    /// Shape-only constructor for pipeline-produced diagrams, where zero
    /// entries can legitimately appear in split remainders.
    pub(crate) fn new_lenient(incidences: Vec<ExactMatrix>) -> Result<Self> {
        Self::assemble(incidences)
    }

    fn assemble(incidences: Vec<ExactMatrix>) -> Result<Self> {
        if incidences.is_empty() {
            return Err(Error::InvalidDiagram("no incidence matrices".into()));
        }
        if incidences[0].cols() != 1 {
            return Err(Error::InvalidDiagram(format!(
                "root level must have one vertex, first incidence has {} columns",
                incidences[0].cols()
            )));
        }
        let mut level_sizes = vec![1usize];
        for (i, a) in incidences.iter().enumerate() {
            if a.cols() != level_sizes[i] {
                return Err(Error::InvalidDiagram(format!(
                    "incidence {} is {}x{} but level {} has {} vertices",
                    i,
                    a.rows(),
                    a.cols(),
                    i,
                    level_sizes[i]
                )));
            }
            if !a.is_nonnegative() {
                return Err(Error::InvalidDiagram(format!(
                    "incidence {} has a negative entry",
                    i
                )));
            }
            level_sizes.push(a.rows());
        }
        Ok(Self {
            level_sizes,
            incidences,
            order: None,
            repeat: None,
        })
    }

    pub fn with_repeat(mut self, cycle: Vec<ExactMatrix>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidDiagram("repeat cycle is empty".into()));
        }
        let top = *self.level_sizes.last().expect("at least the root");
        if cycle[0].cols() != top {
            return Err(Error::InvalidDiagram(format!(
                "repeat cycle starts with {} columns but the diagram tops out at {} vertices",
                cycle[0].cols(),
                top
            )));
        }
        for i in 0..cycle.len() {
            let next = &cycle[(i + 1) % cycle.len()];
            if next.cols() != cycle[i].rows() {
                return Err(Error::InvalidDiagram(
                    "repeat cycle does not chain (rows/cols mismatch)".into(),
                ));
            }
            if !cycle[i].is_nonnegative() {
                return Err(Error::InvalidDiagram(
                    "repeat cycle has a negative entry".into(),
                ));
            }
        }
        self.repeat = Some(cycle);
        Ok(self)
    }

    pub fn with_order(mut self, order: Vec<Morphism>) -> Result<Self> {
        let expected = self.incidences.len().saturating_sub(1);
        if order.len() != expected {
            return Err(Error::InvalidDiagram(format!(
                "expected {} order morphisms, got {}",
                expected,
                order.len()
            )));
        }
        for (i, m) in order.iter().enumerate() {
            if m.incidence() != self.incidences[i + 1].transpose() {
                return Err(Error::InvalidDiagram(format!(
                    "order morphism at level {} does not match the incidence matrix",
                    i + 1
                )));
            }
        }
        self.order = Some(order);
        Ok(self)
    }

    /// Number of stored incidence matrices.
    pub fn depth(&self) -> usize {
        self.incidences.len()
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn level_size(&self, i: usize) -> usize {
        self.level_sizes[i]
    }

    pub fn incidence(&self, i: usize) -> &ExactMatrix {
        &self.incidences[i]
    }

    pub fn incidences(&self) -> &[ExactMatrix] {
        &self.incidences
    }

    pub fn order(&self) -> Option<&[Morphism]> {
        self.order.as_deref()
    }

    pub fn repeat(&self) -> Option<&[ExactMatrix]> {
        self.repeat.as_deref()
    }

    /// Expands the repetition rule until `depth` matrices are stored. The
    /// expansion carries no order (re-derive it after any matrix surgery).
    pub fn expand(&self, depth: usize) -> Result<BratteliDiagram> {
        if depth <= self.depth() {
            return BratteliDiagram::assemble(self.incidences[..depth.max(1)].to_vec());
        }
        let cycle = self.repeat.as_ref().ok_or_else(|| {
            Error::InsufficientDepth(format!(
                "diagram stores {} matrices, {} requested and no repeat rule given",
                self.depth(),
                depth
            ))
        })?;
        let mut incidences = self.incidences.clone();
        let mut k = 0usize;
        while incidences.len() < depth {
            incidences.push(cycle[k % cycle.len()].clone());
            k += 1;
        }
        BratteliDiagram::assemble(incidences)
    }

    /// Total product `A_{L-1} ... A_0` of all stored incidences.
    pub fn total_product(&self) -> ExactMatrix {
        let mut acc = self.incidences[0].clone();
        for a in &self.incidences[1..] {
            acc = a.mul(&acc).expect("chained shapes");
        }
        acc
    }
}

/// Interleaved-columns factorization of a positive matrix.
///
/// From `A = dQ + R` with `0 <= R < d`, `B` holds the columns of `dQ` and `R`
/// interleaved and `C` recombines adjacent column pairs, so `B * C = A`.
#[derive(Clone, Debug, Serialize)]
pub struct SplitResult {
    pub b: ExactMatrix,
    pub c: ExactMatrix,
    pub q: ExactMatrix,
    pub r: ExactMatrix,
    pub d: u64,
}

pub fn split_level(a: &ExactMatrix, d: u64) -> Result<SplitResult> {
    if d < 1 {
        return Err(Error::InvalidModulus(d.to_string()));
    }
    for row in 0..a.rows() {
        for col in 0..a.cols() {
            if !a.entry(row, col).is_positive() {
                return Err(Error::NonPositiveEntry {
                    op: "split_level",
                    row: row + 1,
                    col: col + 1,
                    found: a.entry(row, col).to_string(),
                });
            }
        }
    }
    let n = a.rows();
    let m = a.cols();
    let dv = BigInt::from(d);
    let mut q = ExactMatrix::new(n, m, vec![BigInt::zero(); n * m])?;
    let mut r = ExactMatrix::new(n, m, vec![BigInt::zero(); n * m])?;
    let mut b = ExactMatrix::new(n, 2 * m, vec![BigInt::zero(); n * 2 * m])?;
    for row in 0..n {
        for col in 0..m {
            let (qq, rr) = num_integer::div_rem(a.entry(row, col).clone(), dv.clone());
            b.set(row, 2 * col, &qq * &dv);
            b.set(row, 2 * col + 1, rr.clone());
            q.set(row, col, qq);
            r.set(row, col, rr);
        }
    }
    let mut c = ExactMatrix::new(2 * m, m, vec![BigInt::zero(); 2 * m * m])?;
    for col in 0..m {
        c.set(2 * col, col, BigInt::one());
        c.set(2 * col + 1, col, BigInt::one());
    }
    let recomposed = b.mul(&c)?;
    assert_eq!(&recomposed, a, "split recomposition must be exact");
    Ok(SplitResult { b, c, q, r, d })
}

/// Replaces runs of incidences between consecutive cuts by their products.
/// Order data is dropped.
pub fn telescope(d: &BratteliDiagram, cuts: &[usize]) -> Result<BratteliDiagram> {
    if cuts.len() < 2 {
        return Err(Error::InvalidCuts("need at least two cut indices".into()));
    }
    if cuts[0] != 0 {
        return Err(Error::InvalidCuts("cuts must start at 0".into()));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCuts(
            "cuts must be strictly increasing".into(),
        ));
    }
    let last = *cuts.last().expect("non-empty");
    if last > d.depth() {
        return Err(Error::InvalidCuts(format!(
            "cut {} out of range, diagram stores {} levels of matrices",
            last,
            d.depth()
        )));
    }
    let mut incidences = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let mut acc = d.incidence(w[0]).clone();
        for j in w[0] + 1..w[1] {
            acc = d.incidence(j).mul(&acc)?;
        }
        incidences.push(acc);
    }
    BratteliDiagram::new_lenient(incidences)
}

/// Number of root-to-vertex paths at each vertex of the given level.
pub fn path_counts(d: &BratteliDiagram, level: usize) -> Result<Vec<BigInt>> {
    if level > d.depth() {
        return Err(Error::LevelOutOfRange {
            level,
            depth: d.depth(),
        });
    }
    let mut v = vec![BigInt::one()];
    for i in 0..level {
        let a = d.incidence(i);
        let mut next = vec![BigInt::zero(); a.rows()];
        for (r, slot) in next.iter_mut().enumerate() {
            for (c, count) in v.iter().enumerate() {
                *slot += a.entry(r, c) * count;
            }
        }
        v = next;
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimplicityReport {
    pub flag: bool,
    /// Half-open window `[i, k)` of incidences whose product is positive.
    pub witness: Option<(usize, usize)>,
}

/// Searches for a contiguous product of incidences with all entries positive,
/// shortest windows first.
pub fn check_simple(d: &BratteliDiagram) -> SimplicityReport {
    check_simple_window(d.incidences())
}

/// Same search on a bare chained matrix sequence.
pub fn check_simple_window(incidences: &[ExactMatrix]) -> SimplicityReport {
    for len in 1..=incidences.len() {
        for start in 0..=incidences.len() - len {
            let mut acc = incidences[start].clone();
            for m in &incidences[start + 1..start + len] {
                acc = m.mul(&acc).expect("chained shapes");
            }
            if acc.is_positive() {
                return SimplicityReport {
                    flag: true,
                    witness: Some((start, start + len)),
                };
            }
        }
    }
    SimplicityReport {
        flag: false,
        witness: None,
    }
}

/// Facts gathered about one level of a candidate adapted sequence.
#[derive(Clone, Debug, Serialize)]
pub struct AdaptedLevel {
    pub level: usize,
    /// Literal entrywise positivity of `J_i` and its inverse. Triangular or
    /// diagonal change-of-basis matrices fail this even when the rest of the
    /// conditions hold, so it is reported separately and never folded into
    /// the operational verdict.
    pub j_entrywise_positive: bool,
    pub j_inverse_entrywise_positive: bool,
    /// Smallest `M` within the horizon with `A_M ... A_i J_i^{-1}` a positive
    /// integer matrix, or `None` when the search is exhausted.
    pub m_found: Option<usize>,
    /// Integrality of `J_{i+1} A_i J_i^{-1}`.
    pub b_integral: bool,
    /// Entrywise positivity of the same matrix, reported separately: split
    /// remainders can be zero.
    pub b_positive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptedReport {
    pub horizon: usize,
    pub levels: Vec<AdaptedLevel>,
}

impl AdaptedReport {
    /// The two checkable load-bearing conditions at every reported level:
    /// some telescoped product clears the denominators of `J_i^{-1}`, and the
    /// conjugated matrices are integral.
    pub fn operational(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.m_found.is_some() && l.b_integral)
    }
}

/// Evaluates the adapted-sequence conditions for `J` against `A`, level by
/// level within the horizon.
pub fn verify_adapted(
    a_seq: &[ExactMatrix],
    j_seq: &[RationalMatrix],
    horizon: usize,
) -> Result<AdaptedReport> {
    let reportable = a_seq.len().min(j_seq.len().saturating_sub(1)).min(horizon);
    let mut levels = Vec::with_capacity(reportable);
    for i in 0..reportable {
        if j_seq[i].rows() != a_seq[i].cols() || j_seq[i + 1].rows() != a_seq[i].rows() {
            return Err(Error::DimensionMismatch {
                op: "verify_adapted",
                lhs_rows: j_seq[i].rows(),
                lhs_cols: j_seq[i].cols(),
                rhs_rows: a_seq[i].rows(),
                rhs_cols: a_seq[i].cols(),
            });
        }
        let j_inv = j_seq[i].invert()?;
        let mut m_found = None;
        let mut acc = a_seq[i].clone();
        let m_cap = a_seq.len().min(horizon);
        for (m, mat) in a_seq.iter().enumerate().take(m_cap).skip(i) {
            if m > i {
                acc = mat.mul(&acc)?;
            }
            let probe = acc.to_rational().mul(&j_inv)?;
            if probe.is_integral() && probe.to_exact().expect("integral").is_positive() {
                m_found = Some(m);
                break;
            }
        }
        let b = j_seq[i + 1].mul(&a_seq[i].to_rational())?.mul(&j_inv)?;
        let b_integral = b.is_integral();
        let b_positive = b.is_positive();
        levels.push(AdaptedLevel {
            level: i,
            j_entrywise_positive: j_seq[i].is_positive(),
            j_inverse_entrywise_positive: j_inv.is_positive(),
            m_found,
            b_integral,
            b_positive,
        });
    }
    Ok(AdaptedReport { horizon, levels })
}

/// Reads the directive sequence off an ordered diagram: the hat morphism into
/// the first edge alphabet, then the stored per-level source lists.
pub fn read_morphisms(d: &BratteliDiagram) -> Result<DirectiveSequence> {
    let order = d.order.as_ref().ok_or(Error::MissingOrder)?;
    let a0 = d.incidence(0);
    let mut images = Vec::with_capacity(a0.rows());
    let mut next_edge: Letter = 0;
    for j in 0..a0.rows() {
        let count = a0.entry(j, 0);
        let count = num_traits::ToPrimitive::to_usize(count)
            .ok_or_else(|| Error::InvalidDiagram(format!("edge count {} too large", count)))?;
        if count == 0 {
            return Err(Error::InvalidDiagram(format!(
                "vertex {} at level 1 has no edge from the root",
                j + 1
            )));
        }
        let img: Vec<Letter> = (next_edge..next_edge + count as Letter).collect();
        next_edge += count as Letter;
        images.push(img);
    }
    let hat = Morphism::new(a0.rows(), next_edge as usize, images)?;
    let mut morphisms = vec![hat];
    morphisms.extend(order.iter().cloned());
    DirectiveSequence::new(morphisms)
}

#[derive(Serialize, Deserialize)]
struct DiagramWire {
    level_sizes: Vec<usize>,
    incidences: Vec<ExactMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repeat: Option<Vec<ExactMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<Morphism>>,
}

impl Serialize for BratteliDiagram {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        DiagramWire {
            level_sizes: self.level_sizes.clone(),
            incidences: self.incidences.clone(),
            repeat: self.repeat.clone(),
            order: self.order.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BratteliDiagram {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = DiagramWire::deserialize(de)?;
        let mut d = BratteliDiagram::new(wire.incidences).map_err(D::Error::custom)?;
        if d.level_sizes != wire.level_sizes {
            return Err(D::Error::custom(format!(
                "stated level sizes {:?} do not match incidence shapes {:?}",
                wire.level_sizes, d.level_sizes
            )));
        }
        if let Some(cycle) = wire.repeat {
            d = d.with_repeat(cycle).map_err(D::Error::custom)?;
        }
        if let Some(order) = wire.order {
            d = d.with_order(order).map_err(D::Error::custom)?;
        }
        Ok(d)
    }
}
