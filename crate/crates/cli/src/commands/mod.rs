pub mod fit;
pub mod rates;
pub mod report;
pub mod simulate;
