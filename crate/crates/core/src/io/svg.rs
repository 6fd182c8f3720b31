//! SVG heatmap for phase-diagram grids: one grayscale rect per cell
//! (white = certain success, black = certain failure) with the
//! predicted transition curve (normalized total statistical dimension
//! equal to one) overlaid as a polyline.

use std::path::Path;

use crate::contour::contour_polylines;
use crate::error::Result;
use crate::experiments::phase::PhaseGridResult;
use crate::io::csv::write_bytes;

const CELL_PX: f64 = 20.0;

pub fn heatmap_svg(grid: &PhaseGridResult) -> String {
    let nx = grid.s_x_axis.len();
    let ny = grid.s_y_axis.len();
    let width = nx as f64 * CELL_PX;
    let height = ny as f64 * CELL_PX;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    // sparsity grows rightward and upward; SVG y grows downward
    for (ix, _sx) in grid.s_x_axis.iter().enumerate() {
        for (iy, _sy) in grid.s_y_axis.iter().enumerate() {
            let rate = grid.rate_at(ix, iy);
            let level = (rate * 255.0).round() as u8;
            let x = ix as f64 * CELL_PX;
            let y = (ny - 1 - iy) as f64 * CELL_PX;
            out.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" \
                 fill=\"#{level:02x}{level:02x}{level:02x}\"/>\n"
            ));
        }
    }

    // transition curve in grid-index coordinates, mapped to pixel centers
    let xs: Vec<f64> = (0..nx).map(|i| i as f64).collect();
    let ys: Vec<f64> = (0..ny).map(|j| j as f64).collect();
    let delta = |ix: usize, iy: usize| grid.delta_at(ix, iy);
    for line in contour_polylines(&xs, &ys, &delta, 1.0) {
        let points: Vec<String> = line
            .iter()
            .map(|&(gx, gy)| {
                let px = (gx + 0.5) * CELL_PX;
                let py = (ny as f64 - 1.0 - gy - 0.5 + 1.0) * CELL_PX - CELL_PX / 2.0;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#e6b800\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_heatmap_svg(grid: &PhaseGridResult, path: &Path) -> Result<()> {
    write_bytes(path, heatmap_svg(grid).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::phase::PhaseGridResult;

    #[test]
    fn all_success_grid_is_all_white() {
        let grid = PhaseGridResult::from_parts(
            vec![1, 2],
            vec![1, 2],
            vec![1.0; 4],
            vec![0.2; 4],
            vec![0; 4],
        );
        let svg = heatmap_svg(&grid);
        assert_eq!(svg.matches("fill=\"#ffffff\"").count(), 4);
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn transition_curve_appears_when_crossed() {
        // deltas rise through 1.0 along x
        let grid = PhaseGridResult::from_parts(
            vec![1, 2],
            vec![1, 2],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.5, 1.5, 0.5, 1.5],
            vec![0; 4],
        );
        let svg = heatmap_svg(&grid);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("fill=\"#000000\""));
    }
}
