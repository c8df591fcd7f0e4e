pub mod model;
pub mod numerics;
pub mod posemb;
pub mod report;
pub mod spectrum;
pub mod tasks;
pub mod toysim;
