//! Bitmask helpers shared by jets and bundle points.
//!
//! Generators and tangent levels are numbered from 1; generator `j` lives in
//! bit `j - 1` of a mask.

#[inline]
pub(crate) fn bit(j: usize) -> usize {
    1 << (j - 1)
}

#[inline]
pub(crate) fn has(mask: usize, j: usize) -> bool {
    mask & bit(j) != 0
}

/// Exchange generators `a` and `b` in `mask`.
#[inline]
pub(crate) fn swap(mask: usize, a: usize, b: usize) -> usize {
    let (ba, bb) = (bit(a), bit(b));
    let ha = mask & ba != 0;
    let hb = mask & bb != 0;
    if ha == hb {
        mask
    } else {
        mask ^ ba ^ bb
    }
}

/// Remove generator `j` from a mask that does not contain it, shifting the
/// generators above `j` down by one.
#[inline]
#[cfg(test)]
pub(crate) fn squeeze(mask: usize, j: usize) -> usize {
    let low = mask & (bit(j) - 1);
    let high = mask >> j;
    low | (high << (j - 1))
}

/// Inverse of [`squeeze`]: open a zero slot at generator `j`.
#[inline]
pub(crate) fn expand(mask: usize, j: usize) -> usize {
    let low = mask & (bit(j) - 1);
    let high = mask >> (j - 1);
    low | (high << j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeeze_inverts_expand() {
        for j in 1..=4 {
            for m in 0..16usize {
                assert_eq!(squeeze(expand(m, j), j), m);
                assert!(!has(expand(m, j), j));
            }
        }
    }

    #[test]
    fn swap_is_involutive() {
        for m in 0..32usize {
            assert_eq!(swap(swap(m, 2, 4), 2, 4), m);
        }
        assert_eq!(swap(0b01, 1, 2), 0b10);
        assert_eq!(swap(0b11, 1, 2), 0b11);
    }
}
