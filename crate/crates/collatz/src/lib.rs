//! Workbench for Syracuse-type maps.

pub mod inverse;
pub mod map;
pub mod measure;
pub mod residue;
pub mod triangle;
