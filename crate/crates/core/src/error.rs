use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid element `{name}`: {reason}")]
    InvalidElement { name: String, reason: String },

    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("empty ABCD chain")]
    EmptyChain,

    #[error("circuit equations singular at {frequency} Hz")]
    SingularCircuit { frequency: f64 },

    #[error("invalid port kind: {0}")]
    InvalidPort(String),

    #[error("singular port conversion at {frequency} Hz (condition number {condition:.3e})")]
    SingularConversion { frequency: f64, condition: f64 },

    #[error("junction port missing: {0}")]
    MissingJunction(String),

    #[error("invalid bias: {0}")]
    InvalidBias(String),

    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("iteration diverged (NaN) at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("no stimulus tone at {frequency} Hz on port `{port}`")]
    NoTone { port: String, frequency: f64 },

    #[error("curve not fittable: {0}")]
    NotFittable(String),

    #[error("Rapp fit failed: {0}")]
    FitFailed(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
