use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("overflow state has no box")]
    OverflowHasNoBox,
    #[error("inflation radius must be nonnegative, got {0}")]
    NegativeInflation(f64),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("perturbation budget violated: |p| = {norm} exceeds {budget}")]
    BudgetViolated { norm: f64, budget: f64 },
    #[error("invalid perturbation map: {0}")]
    Perturbation(String),
    #[error("{0} dynamics are not affine")]
    NotAffine(&'static str),
    #[error("no growth matrix available for {0} dynamics")]
    MissingGrowthMatrix(&'static str),
    #[error("invalid system: {0}")]
    System(String),
    #[error("zero margin at cell {cell} input {input}: abstraction inconsistent")]
    ZeroMargin { cell: usize, input: usize },
    #[error("cell set is not a rectangular block (optionally with the overflow state)")]
    NonRectangular,
    #[error("cell {0} is outside the grid")]
    CellOutOfRange(usize),
    #[error("input index {0} is outside the input grid")]
    InputOutOfRange(usize),
    #[error("no finite escape direction for cell {cell} input {input}")]
    NoFiniteEscape { cell: usize, input: usize },
    #[error("escape witness needs an exact (delta = 0) reach operator")]
    InexactReach,
    #[error("witness construction failed: {0}")]
    Witness(String),
    #[error("invalid automaton: {0}")]
    Automaton(String),
    #[error("config: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the configuration rather than by a computation.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) => true,
            Error::Stage { stage, .. } => *stage == "config",
            _ => false,
        }
    }
}
