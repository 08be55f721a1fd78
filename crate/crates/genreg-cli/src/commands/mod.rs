pub mod data;
pub mod evaluate;
pub mod reconstruct;
pub mod train;
