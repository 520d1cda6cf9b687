pub mod angle;
pub mod curves;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ifs;
pub mod projection;
pub mod raster;
pub mod rational;
pub mod scaling;
pub mod slice;

pub use error::{Error, Result};
pub use geometry::{Angle, Point, Rect};
