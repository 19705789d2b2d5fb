pub mod precision;
pub mod point;
pub mod poly;
pub mod exec;
pub mod objective;
pub mod model;
pub mod subsolver;
pub mod driver;
pub mod baseline;
pub mod analysis;
pub mod experiment;
