use thiserror::Error;

/// Errors shared across the library.
///
/// Pipeline-level condition violations (a failed diagnostic inside a
/// construction) are not errors: they are recorded in the
/// [`ConstructionResult`](crate::construct::ConstructionResult) so that the
/// partial artifacts stay inspectable. `Error` covers misuse of an operation:
/// shape mismatches, missing data, exhausted scans.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "{op}: dimension mismatch, left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}"
    )]
    DimensionMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    #[error("matrix is singular over the rationals")]
    Singular,

    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: expected a positive entry, found {found} at ({row},{col})")]
    NonPositiveEntry {
        op: &'static str,
        row: usize,
        col: usize,
        found: String,
    },

    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    #[error("level {level} out of range, diagram stores {depth} levels")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("invalid telescoping cuts: {0}")]
    InvalidCuts(String),

    #[error("divisor must be >= 1, got {0}")]
    InvalidModulus(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("letter {letter} out of alphabet of size {alphabet}")]
    LetterOutOfRange { letter: u32, alphabet: usize },

    #[error("morphism image must be non-empty (letter {letter})")]
    ErasingImage { letter: u32 },

    #[error("diagram carries no edge order")]
    MissingOrder,

    #[error("ordering precondition failed: {0}")]
    OrderPrecondition(String),

    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),

    #[error("directive sequence has no positive composed incidence within the stored depth")]
    NotPrimitive,

    #[error(
        "threshold scan exhausted: no t <= {scan_limit} satisfies m^3*t/p_t < 1/i \
         stably for m={m}, i={level}"
    )]
    ThresholdExhausted {
        m: usize,
        level: usize,
        scan_limit: u64,
    },

    #[error("telescoping horizon exhausted at level {level}: {detail}")]
    HorizonExhausted { level: usize, detail: String },

    #[error("cannot parse complexity target: {0}")]
    TargetParse(String),

    #[error("complexity target undefined at n={0}")]
    TargetDomain(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
