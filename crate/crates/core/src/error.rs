use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not special unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("rotation angle below tolerance, axis is undefined")]
    DegenerateAxis,

    #[error("UDD order must be at least 1, got {0}")]
    BadOrder(u32),

    #[error("both branch frequencies vanish, no resonance exists")]
    NoPrecession,

    #[error("no resonance in bracket: best axis dot {best_dot:.6} at tau = {tau:.6} us")]
    NoResonanceInBracket { tau: f64, best_dot: f64 },

    #[error("unit angles sum to zero, no finite iteration count exists")]
    NoRotation,

    #[error("dense oracle limited to {max} nuclear spins, got {got}")]
    TooLarge { got: usize, max: usize },

    #[error("register sampling stuck after {rejections} rejections (coupling interval too crowded)")]
    SamplingStuck { rejections: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
