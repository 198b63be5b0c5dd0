use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabError {
    #[error("unknown generator symbol `{0}`")]
    UnknownGenerator(String),
    #[error("parse error at `{key}`: {msg}")]
    Parse { key: String, msg: String },
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("kernel vector {vector:?} does not fit factor {factor} of rank {rank}")]
    KernelOutsideFactor { factor: usize, rank: usize, vector: Vec<i64> },
    #[error("factor {0} is not peripheral")]
    NotPeripheral(usize),
    #[error("kernel shape not supported for exact word lengths: {0}")]
    UnsupportedKernel(String),
    #[error("elements lie in distinct cosets")]
    DistinctCosets,
    #[error("memory budget exceeded: {needed} bytes requested, cap {cap}")]
    MemoryBudget { needed: u64, cap: u64 },
    #[error("vertex not present in ball")]
    NotInBall,
    #[error("pair ({0}, {1}) is not certified")]
    Uncertified(usize, usize),
    #[error("no certified quadruples in ball")]
    NoCertifiedQuadruples,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("certification radius {radius} too small to witness failure at depth {depth}")]
    CertificationTooSmall { radius: u64, depth: u32 },
    #[error("empty depth window [{0}, {1}]")]
    EmptyWindow(u32, u32),
    #[error("orbit canonicalization budget exceeded after {0} moves")]
    OrbitBudget(usize),
    #[error("no horoball found at depth >= {0} along the geodesic")]
    NoHoroball(u32),
    #[error("element is not in the filling kernel")]
    NotInKernel,
    #[error("sphere of radius {0} is empty")]
    EmptySphere(u32),
    #[error("simplex budget exceeded: {0} simplices")]
    SimplexBudget(usize),
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(usize),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<LabError> },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse { key: "json".into(), msg: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
