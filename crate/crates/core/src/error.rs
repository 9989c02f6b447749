use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A pair potential was evaluated at a non-positive squared distance.
    #[error("pair potential evaluated at squared distance {0} (must be > 0)")]
    Domain(f64),

    /// Two particles are closer than the collision guard.
    #[error("particles {i} and {j} collide (distance {distance:e})")]
    Collision { i: usize, j: usize, distance: f64 },

    /// Collision detected while integrating a trajectory.
    #[error("collision between particles {i} and {j} at t = {time} (distance {distance:e})")]
    TrajectoryCollision {
        i: usize,
        j: usize,
        distance: f64,
        time: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error(
        "no sign change of the ring residual in [{a_min}, {a_max}] \
         (residuals {residual_min:e} and {residual_max:e} at the endpoints)"
    )]
    NoBracket {
        a_min: f64,
        a_max: f64,
        residual_min: f64,
        residual_max: f64,
    },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },

    #[error("nu^2 = {nu_sq} is resonant: {l}^2 nu^2 matches eigenvalue {eigenvalue}")]
    Resonant { nu_sq: f64, l: u32, eigenvalue: f64 },

    #[error("symmetry class {0} is incompatible with this equilibrium")]
    IncompatibleSymmetry(String),

    #[error("eigenvalue {eigenvalue} is not simple in the {class} slice (multiplicity {multiplicity})")]
    NotSimple {
        eigenvalue: f64,
        class: String,
        multiplicity: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("singular linear system in {0}")]
    Singular(&'static str),
}

impl Error {
    pub fn is_collision(&self) -> bool {
        matches!(
            self,
            Error::Collision { .. } | Error::TrajectoryCollision { .. }
        )
    }
}
