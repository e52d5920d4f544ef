pub mod data;
pub mod diffcore;
pub mod flowcore;
pub mod lrattn;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod survcore;
