pub mod criteria;
pub mod phiexp;
pub mod poincare;
pub mod profile;
pub mod quad;
pub mod radial;
pub mod specfun;
pub mod transport;
