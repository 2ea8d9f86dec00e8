//! Window-origin arithmetic shared by patch extraction and tiled inference.

/// Window origins along one axis: `{0, shift, 2*shift, ...}` with the final
/// origin clamped to `dim - window` so the last window touches the far edge.
///
/// Callers must guarantee `window <= dim` and `shift >= 1`.
pub fn axis_offsets(dim: usize, window: usize, shift: usize) -> Vec<usize> {
    debug_assert!(window >= 1 && window <= dim && shift >= 1);
    let mut offsets = Vec::new();
    let mut origin = 0usize;
    loop {
        if origin + window >= dim {
            let last = dim - window;
            if offsets.last() != Some(&last) {
                offsets.push(last);
            }
            break;
        }
        offsets.push(origin);
        origin += shift;
    }
    offsets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentation_grid_clamps_to_edge() {
        assert_eq!(
            axis_offsets(512, 256, 50),
            vec![0, 50, 100, 150, 200, 250, 256]
        );
    }

    #[test]
    fn small_image_grid() {
        assert_eq!(axis_offsets(300, 256, 50), vec![0, 44]);
    }

    #[test]
    fn tiling_grid_with_ten_pixel_overlap() {
        assert_eq!(axis_offsets(512, 256, 246), vec![0, 246, 256]);
    }

    #[test]
    fn exact_fit_yields_single_origin() {
        assert_eq!(axis_offsets(256, 256, 246), vec![0]);
        assert_eq!(axis_offsets(256, 256, 50), vec![0]);
    }

    #[test]
    fn every_pixel_covered() {
        for dim in [17, 64, 101, 300] {
            for window in [5, 16, 17] {
                if window > dim {
                    continue;
                }
                for shift in [1, 3, window - 1, window] {
                    let offsets = axis_offsets(dim, window, shift);
                    let mut covered = vec![false; dim];
                    for &o in &offsets {
                        assert!(o + window <= dim);
                        covered[o..o + window].iter_mut().for_each(|c| *c = true);
                    }
                    assert!(covered.iter().all(|&c| c), "hole at dim={dim} window={window} shift={shift}");
                }
            }
        }
    }
}
