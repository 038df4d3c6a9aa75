pub mod dfe;
pub mod endemic;
pub mod hypotheses;
pub mod incidence;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod orbit;
pub mod periodic;
pub mod quadrature;
pub mod r0;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod variational;
