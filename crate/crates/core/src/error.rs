use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh has no usable triangles")]
    EmptyMesh,
    #[error("surface is empty")]
    EmptySurface,
    #[error("refinement exceeded the cap of {cap} triangles")]
    RefinementOverflow { cap: usize },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("block at {centroid:?} with dims {dims:?} is not aligned to the cell grid")]
    MisalignedBlock { centroid: [f64; 3], dims: [f64; 3] },
    #[error("duplicate block at {0:?}")]
    DuplicateBlock([f64; 3]),
    #[error("blocks overlap in parent {0:?}")]
    OverlappingBlocks([i64; 3]),
    #[error("rotation matrix is not orthonormal")]
    NotOrthonormal,
    #[error("ray from {point:?} could not be resolved after {retries} retries")]
    UnresolvableRay { point: [f64; 3], retries: u32 },
    #[error("box [{n:?}, +{k:?}) is outside a map of dims {dims:?}")]
    OutOfBounds { n: [usize; 3], k: [usize; 3], dims: [usize; 3] },
    #[error("empty input")]
    EmptyInput,
    #[error("cell dims {dims:?} are not (2^{depth}) on every axis")]
    NonDyadicDims { dims: [u32; 3], depth: u32 },
    #[error("octant has 8 leaves with one label")]
    HomogeneousOctant,
    #[error("sidedness vector {0:?} is not monotone")]
    InconsistentSidedness(Vec<i8>),
    #[error("missing sidedness for surface {0}")]
    MissingSidedness(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parent {parent:?}: {source}")]
    InParent {
        parent: [i64; 3],
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Geometry failures as opposed to bad input.
    pub fn is_geometric(&self) -> bool {
        match self {
            Error::DegenerateTriangle
            | Error::UnresolvableRay { .. }
            | Error::InconsistentSidedness(_)
            | Error::RefinementOverflow { .. }
            | Error::HomogeneousOctant => true,
            Error::InParent { source, .. } => source.is_geometric(),
            _ => false,
        }
    }

    pub fn in_parent(self, parent: [i64; 3]) -> Error {
        match self {
            e @ Error::InParent { .. } => e,
            e => Error::InParent { parent, source: Box::new(e) },
        }
    }
}
