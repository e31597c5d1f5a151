pub mod calibrate;
pub mod simulate;
pub mod skr;
pub mod sweep;
pub mod tomo;
