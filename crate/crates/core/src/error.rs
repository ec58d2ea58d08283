use std::path::PathBuf;

/// Which population a field or noise stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Prey,
    Predator,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Prey, Species::Predator];

    pub fn index(self) -> usize {
        match self {
            Species::Prey => 0,
            Species::Predator => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Prey => "prey",
            Species::Predator => "predator",
        }
    }
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: need at least 2 collocation points, got {size}")]
    InvalidGrid { size: usize },

    #[error("dimension mismatch: expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("negative {species} density {value:e} at grid index {index}")]
    NegativeState {
        species: Species,
        index: usize,
        value: f64,
    },

    #[error("positivity violated: {species} density {value:e} at grid index {index} (step {step})")]
    Positivity {
        species: Species,
        index: usize,
        value: f64,
        step: u64,
    },

    #[error("non-finite state at step {step}")]
    BlowUp { step: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("ODE oracle did not converge: {0}")]
    Oracle(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error{}: {key}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(line: Option<usize>, key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
