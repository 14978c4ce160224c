pub mod even;
pub mod finite;
pub mod hpm;
pub mod bc;
