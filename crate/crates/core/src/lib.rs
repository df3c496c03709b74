pub mod backward;
pub mod cli;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod random;
pub mod rayleigh;
