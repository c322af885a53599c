pub mod bigseries;
pub mod potential;
pub mod pade;
pub mod testfn;
pub mod verify;
