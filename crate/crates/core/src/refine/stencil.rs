//! Fixed convolution stencils in pixel units.
//!
//! Both operators are correlations: the output at a pixel is `sum(K[m] * f[pixel + m])`.

use crate::domain::Map2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilAxis {
    /// Along columns (`x`).
    X,
    /// Along rows (`y`).
    Y,
}

/// First-derivative kernel `1/2 [-1 0 1]`.
pub const D1_KERNEL: [f64; 3] = [-0.5, 0.0, 0.5];

/// Second-order kernel `1/4 [[0,-1,0],[-1,4,-1],[0,-1,0]]`, i.e. `-1/4` of the discrete Laplacian.
pub const D2_KERNEL: [[f64; 3]; 3] = [[0.0, -0.25, 0.0], [-0.25, 1.0, -0.25], [0.0, -0.25, 0.0]];

/// Central difference along `axis`; the first and last pixel use one-sided differences.
///
/// Panics if the map is narrower than 3 pixels along `axis`.
pub fn stencil_d1(map: &Map2, axis: StencilAxis) -> Map2 {
    let (w, h) = map.dims();
    let n = match axis {
        StencilAxis::X => w,
        StencilAxis::Y => h,
    };
    assert!(n >= 3, "stencil_d1 needs at least 3 pixels along the axis");
    let at = |r: usize, c: usize, k: usize| match axis {
        StencilAxis::X => map.get(r, k),
        StencilAxis::Y => map.get(k, c),
    };
    Map2::from_fn(w, h, |r, c| {
        let k = match axis {
            StencilAxis::X => c,
            StencilAxis::Y => r,
        };
        if k == 0 {
            at(r, c, 1) - at(r, c, 0)
        } else if k == n - 1 {
            at(r, c, n - 1) - at(r, c, n - 2)
        } else {
            D1_KERNEL[0] * at(r, c, k - 1) + D1_KERNEL[2] * at(r, c, k + 1)
        }
    })
}

/// Applies [`D2_KERNEL`] verbatim, replicating border pixels outward.
///
/// Panics if the map is smaller than 3x3.
pub fn stencil_d2(map: &Map2) -> Map2 {
    let (w, h) = map.dims();
    assert!(w >= 3 && h >= 3, "stencil_d2 needs at least a 3x3 map");
    Map2::from_fn(w, h, |r, c| {
        let mut acc = 0.0;
        for (dr, row) in D2_KERNEL.iter().enumerate() {
            for (dc, &k) in row.iter().enumerate() {
                if k == 0.0 {
                    continue;
                }
                let rr = (r as isize + dr as isize - 1).clamp(0, h as isize - 1) as usize;
                let cc = (c as isize + dc as isize - 1).clamp(0, w as isize - 1) as usize;
                acc += k * map.get(rr, cc);
            }
        }
        acc
    })
}
