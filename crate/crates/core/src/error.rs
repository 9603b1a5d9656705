use thiserror::Error;

/// Every failure the library can report.
///
/// Variants fall into three groups: malformed input (validation), violated
/// preconditions of an operation, and sentinels that indicate a
/// mathematical identity failed to hold. The last group can only be
/// produced by a bug, never by bad data; see [`Error::is_sentinel`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed triangulation file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("triangulation has no tetrahedra")]
    NoTetrahedra,

    #[error("tetrahedron index {tet} out of range (file declares {count})")]
    TetOutOfRange { tet: usize, count: usize },

    #[error("face index {face} out of range on tetrahedron {tet}")]
    FaceOutOfRange { tet: usize, face: usize },

    #[error("face {face} of tetrahedron {tet} is not glued to anything")]
    UngluedFace { tet: usize, face: usize },

    #[error("bad gluing permutation {perm:?} on face {face} of tetrahedron {tet}: {reason}")]
    BadPermutation {
        tet: usize,
        face: usize,
        perm: Vec<usize>,
        reason: &'static str,
    },

    #[error("face {face} of tetrahedron {tet} is glued to itself")]
    SelfFaceGluing { tet: usize, face: usize },

    #[error("face {face} of tetrahedron {tet} has two different gluings")]
    ConflictingGluing { tet: usize, face: usize },

    #[error("triangulation is not orientable (conflict at tetrahedron {tet})")]
    NonOrientable { tet: usize },

    #[error("quad vector is not orthogonal to the tangential angle structures (witness basis vector {witness})")]
    NotInTasPerp { witness: usize },

    #[error("invalid shape: z({quad}) is 0 or 1")]
    DegenerateShape { quad: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("shape sequence is not degenerating: {0}")]
    NotDegenerating(String),

    #[error("flattening not applicable: no partially flat tetrahedron that is not flat")]
    NotApplicable,

    #[error("extracted shapes miss the edge equations by {residual:e}")]
    ExtractionMismatch { residual: f64 },

    #[error("could not initialise a circle-valued angle structure: {0}")]
    InitFailure(String),

    #[error("identity `{identity}` violated at indices {indices:?}")]
    IdentityViolation {
        identity: String,
        indices: Vec<usize>,
    },

    #[error("projection of normal surface solutions differs from the orthogonal complement of the tangential angle structures: {0}")]
    DualityViolation(String),

    #[error("flattening direction is not a tangential angle structure (edge {edge})")]
    ClaimViolation { edge: usize },
}

impl Error {
    /// True for the variants that signal a broken mathematical identity
    /// rather than bad input.
    pub fn is_sentinel(&self) -> bool {
        matches!(
            self,
            Error::IdentityViolation { .. }
                | Error::DualityViolation(_)
                | Error::ClaimViolation { .. }
                | Error::InitFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
