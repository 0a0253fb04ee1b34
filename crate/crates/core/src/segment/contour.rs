//! Connected components and outer boundary tracing on binary masks.

use std::collections::VecDeque;

use crate::raster::Mask;

/// Clockwise Moore neighborhood in image coordinates (y grows downward),
/// starting west.
const MOORE: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Largest 4-connected foreground component. Equal sizes resolve to the
/// component whose first pixel comes first in raster order.
pub fn largest_component(mask: &Mask) -> Mask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut label = vec![0u32; w * h];
    let mut next = 0u32;
    let mut best = (0u32, 0usize);
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask.as_slice()[j] && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    let keep = best.0;
    Mask::from_vec(mask.width(), mask.height(), label.iter().map(|&l| keep != 0 && l == keep).collect())
        .expect("same dimensions")
}

/// Outer boundary of the component containing the first foreground pixel in
/// raster order, traced clockwise with the Moore neighborhood and Jacob's
/// stopping rule. Returns pixel coordinates; empty for an empty mask.
pub fn trace_boundary(mask: &Mask) -> Vec<(i64, i64)> {
    let Some(start) = first_pixel(mask) else {
        return Vec::new();
    };
    // the pixel west of the first raster pixel is always background
    let start_back = (start.0 - 1, start.1);
    let mut contour = vec![start];
    let (mut p, mut b) = (start, start_back);
    let limit = 4 * (mask.width() as usize * mask.height() as usize) + 8;
    for _ in 0..limit {
        let k = MOORE
            .iter()
            .position(|&(dx, dy)| (p.0 + dx, p.1 + dy) == b)
            .expect("backtrack pixel is a neighbor");
        let mut found = None;
        for i in 1..=8 {
            let (dx, dy) = MOORE[(k + i) % 8];
            let c = (p.0 + dx, p.1 + dy);
            if mask.get_signed(c.0, c.1) {
                let (bx, by) = MOORE[(k + i - 1) % 8];
                found = Some((c, (p.0 + bx, p.1 + by)));
                break;
            }
        }
        let Some((np, nb)) = found else {
            // isolated pixel
            break;
        };
        if np == start && nb == start_back {
            break;
        }
        p = np;
        b = nb;
        if p == start && b == start_back {
            break;
        }
        contour.push(p);
    }
    // a closed trace may revisit the start from another direction; drop the
    // closing duplicate if present
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

fn first_pixel(mask: &Mask) -> Option<(i64, i64)> {
    (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .find(|&(x, y)| mask.get(x, y))
        .map(|(x, y)| (x as i64, y as i64))
}
