use thiserror::Error;

/// Errors produced by mesh construction, operator assembly and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("element {element}: {message}")]
    InvalidElement { element: usize, message: String },

    #[error("element {element} is inverted (jacobian {jacobian:e})")]
    InvertedElement { element: usize, jacobian: f64 },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("initial value at element {element} is not finite")]
    NonFiniteInitialValue { element: usize },

    #[error("singular least-squares system at element {element}, sub-cell {subcell}, direction {direction}")]
    SingularStencil {
        element: usize,
        subcell: usize,
        direction: usize,
    },

    #[error("no active elements in the narrow band")]
    NoActiveElements,

    #[error("solution diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("no elements left after applying exclusions")]
    EmptyNorm,

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
