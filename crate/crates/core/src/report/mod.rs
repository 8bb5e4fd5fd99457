//! Exports: the compass scatter plot and the combined report bundle.

mod bundle;
mod svg;

pub use bundle::ReportBundle;
pub use svg::{render_compass_svg, to_pixel, xml_escape, SvgError, SvgOptions};
