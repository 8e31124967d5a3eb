pub mod reference;
pub mod topology;
