//! Line-of-sight over the pixel mask.

use crate::domain::ChannelMask;
use crate::Vec2;

/// Pixels touched by the segment `a`-`b` (positions in meters), in traversal order.
///
/// Supercover: when the segment passes exactly through a pixel corner, both pixels
/// sharing that corner are included.
pub fn supercover(mask: &ChannelMask, a: Vec2, b: Vec2) -> Vec<(isize, isize)> {
    let h = mask.pixel_size();
    let (ax, ay) = (a.x / h, a.y / h);
    let (bx, by) = (b.x / h, b.y / h);
    let (mut cx, mut cy) = (ax.floor() as isize, ay.floor() as isize);
    let (ex, ey) = (bx.floor() as isize, by.floor() as isize);
    let (dx, dy) = (bx - ax, by - ay);
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 {
        1.0 / dx.abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if dy != 0.0 {
        1.0 / dy.abs()
    } else {
        f64::INFINITY
    };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - ax) * t_delta_x
    } else if dx < 0.0 {
        (ax - cx as f64) * t_delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - ay) * t_delta_y
    } else if dy < 0.0 {
        (ay - cy as f64) * t_delta_y
    } else {
        f64::INFINITY
    };

    let mut out = vec![(cy, cx)];
    let max_steps = (ex - cx).unsigned_abs() + (ey - cy).unsigned_abs() + 2;
    for _ in 0..max_steps {
        if cx == ex && cy == ey {
            break;
        }
        if t_max_x > 1.0 && t_max_y > 1.0 {
            break;
        }
        if t_max_x == t_max_y {
            out.push((cy, cx + step_x));
            out.push((cy + step_y, cx));
            cx += step_x;
            cy += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        out.push((cy, cx));
    }
    out
}

/// Whether every pixel touched by the segment is inside the raster and FLUID.
pub fn segment_clear(mask: &ChannelMask, a: Vec2, b: Vec2) -> bool {
    supercover(mask, a, b)
        .into_iter()
        .all(|(r, c)| mask.is_fluid_at(r, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::straight_channel;

    #[test]
    fn diagonal_through_corners_touches_both_neighbors() {
        let m = straight_channel(10, 10, 1.0, 0.0).unwrap();
        let cells = supercover(&m, Vec2::new(0.5, 0.5), Vec2::new(2.5, 2.5));
        assert_eq!(
            cells,
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn horizontal_segment_stays_in_its_row() {
        let m = straight_channel(10, 10, 1.0, 0.0).unwrap();
        let cells = supercover(&m, Vec2::new(0.5, 3.5), Vec2::new(6.5, 3.5));
        assert_eq!(cells, (0..7).map(|c| (3, c)).collect::<Vec<_>>());
    }
}
