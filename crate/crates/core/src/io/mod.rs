//! File formats emitted by the experiment drivers and the CLI: CSV reports,
//! PGM images, and an SVG heatmap for the phase diagram.

pub mod csv;
pub mod pgm;
pub mod svg;
