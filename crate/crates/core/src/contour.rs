//! Level-set extraction on rectangular grids (marching squares).
//!
//! Grid nodes sit at arbitrary monotone coordinates (`xs[i]`, `ys[j]`) with
//! one scalar per node. [`contour_polylines`] returns the level set as
//! chained polylines in data coordinates; crossings are linearly
//! interpolated along cell edges.

type Point = (f64, f64);

/// Extract the `level` contour of `value(ix, iy)` over the grid
/// `xs x ys`. Returns polylines (each at least two points long), chained
/// from the raw marching-squares segments.
pub fn contour_polylines(
    xs: &[f64],
    ys: &[f64],
    value: &dyn Fn(usize, usize) -> f64,
    level: f64,
) -> Vec<Vec<Point>> {
    let nx = xs.len();
    let ny = ys.len();
    if nx < 2 || ny < 2 {
        return Vec::new();
    }

    let mut segments: Vec<(Point, Point)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            // corner order: 0 = (i,j), 1 = (i+1,j), 2 = (i+1,j+1), 3 = (i,j+1)
            let v = [
                value(i, j),
                value(i + 1, j),
                value(i + 1, j + 1),
                value(i, j + 1),
            ];
            let p = [
                (xs[i], ys[j]),
                (xs[i + 1], ys[j]),
                (xs[i + 1], ys[j + 1]),
                (xs[i], ys[j + 1]),
            ];
            let mut case = 0usize;
            for (bit, &val) in v.iter().enumerate() {
                if val > level {
                    case |= 1 << bit;
                }
            }
            if case == 0 || case == 0b1111 {
                continue;
            }
            // crossing point on the edge between corners a and b
            let cross = |a: usize, b: usize| -> Point {
                let t = (level - v[a]) / (v[b] - v[a]);
                let t = t.clamp(0.0, 1.0);
                (
                    p[a].0 + t * (p[b].0 - p[a].0),
                    p[a].1 + t * (p[b].1 - p[a].1),
                )
            };
            // edges: 0 = bottom(0-1), 1 = right(1-2), 2 = top(2-3), 3 = left(3-0)
            let edge_point = |e: usize| -> Point {
                match e {
                    0 => cross(0, 1),
                    1 => cross(1, 2),
                    2 => cross(2, 3),
                    _ => cross(3, 0),
                }
            };
            let mut emit = |e1: usize, e2: usize| {
                segments.push((edge_point(e1), edge_point(e2)));
            };
            match case {
                0b0001 | 0b1110 => emit(3, 0),
                0b0010 | 0b1101 => emit(0, 1),
                0b0100 | 0b1011 => emit(1, 2),
                0b1000 | 0b0111 => emit(2, 3),
                0b0011 | 0b1100 => emit(3, 1),
                0b0110 | 0b1001 => emit(0, 2),
                // saddles: disambiguate with the cell-center average
                0b0101 => {
                    let center = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                    if center > level {
                        emit(3, 0);
                        emit(1, 2);
                    } else {
                        emit(0, 1);
                        emit(2, 3);
                    }
                }
                0b1010 => {
                    let center = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                    if center > level {
                        emit(0, 1);
                        emit(2, 3);
                    } else {
                        emit(3, 0);
                        emit(1, 2);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain_segments(segments)
}

fn key(p: Point) -> (i64, i64) {
    // quantize endpoints so numerically identical crossings match up
    ((p.0 * 1e9).round() as i64, (p.1 * 1e9).round() as i64)
}

fn chain_segments(segments: Vec<(Point, Point)>) -> Vec<Vec<Point>> {
    use std::collections::HashMap;
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(key(a)).or_default().push(idx);
        adjacency.entry(key(b)).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut line = vec![a, b];
        // extend forward from the tail, then backward from the head
        for end in [true, false] {
            loop {
                let tip = if end { *line.last().expect("non-empty") } else { line[0] };
                let Some(candidates) = adjacency.get(&key(tip)) else {
                    break;
                };
                let next = candidates.iter().copied().find(|&i| !used[i]);
                let Some(i) = next else { break };
                used[i] = true;
                let (p, q) = segments[i];
                let far = if key(p) == key(tip) { q } else { p };
                if end {
                    line.push(far);
                } else {
                    line.insert(0, far);
                }
            }
        }
        polylines.push(line);
    }
    polylines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_gives_straight_contour() {
        // value = x, contour at 0.5 is the vertical line x = 0.5
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0];
        let f = |i: usize, _j: usize| xs[i];
        let lines = contour_polylines(&xs, &ys, &f, 0.5);
        assert_eq!(lines.len(), 1);
        for &(x, _) in &lines[0] {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_no_contour() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0];
        let f = |_: usize, _: usize| 3.0;
        assert!(contour_polylines(&xs, &ys, &f, 1.0).is_empty());
    }

    #[test]
    fn segments_chain_across_cells() {
        // value = y over a 3x2 grid: one horizontal contour spanning both
        // columns should chain into a single polyline
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0];
        let f = move |_i: usize, j: usize| [0.0, 1.0][j];
        let lines = contour_polylines(&xs, &ys, &f, 0.5);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].len() >= 3);
        for &(_, y) in &lines[0] {
            assert!((y - 0.5).abs() < 1e-12);
        }
    }
}
