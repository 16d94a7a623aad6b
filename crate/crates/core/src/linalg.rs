use nalgebra::DMatrix;

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `a + k b` elementwise.
pub(crate) fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fourth-order finite-difference derivative of uniformly sampled data:
/// central in the interior, one-sided at the two points nearest each end.
pub(crate) fn derivative_weights(i: usize, len: usize) -> [(isize, f64); 5] {
    const CENTRAL: [(isize, f64); 5] = [
        (-2, 1.0 / 12.0),
        (-1, -8.0 / 12.0),
        (0, 0.0),
        (1, 8.0 / 12.0),
        (2, -1.0 / 12.0),
    ];
    const FORWARD: [(isize, f64); 5] = [
        (0, -25.0 / 12.0),
        (1, 48.0 / 12.0),
        (2, -36.0 / 12.0),
        (3, 16.0 / 12.0),
        (4, -3.0 / 12.0),
    ];
    const SKEW: [(isize, f64); 5] = [
        (-1, -3.0 / 12.0),
        (0, -10.0 / 12.0),
        (1, 18.0 / 12.0),
        (2, -6.0 / 12.0),
        (3, 1.0 / 12.0),
    ];
    let flip = |w: [(isize, f64); 5]| w.map(|(o, c)| (-o, -c));
    if i == 0 {
        FORWARD
    } else if i == 1 {
        SKEW
    } else if i + 2 > len {
        flip(FORWARD)
    } else if i + 2 == len {
        flip(SKEW)
    } else {
        CENTRAL
    }
}

/// Apply [`derivative_weights`] to a sequence of matrices sampled with step `h`.
pub(crate) fn differentiate(samples: &[DMatrix<f64>], h: f64) -> Vec<DMatrix<f64>> {
    let len = samples.len();
    (0..len)
        .map(|i| {
            let mut acc = DMatrix::zeros(samples[i].nrows(), samples[i].ncols());
            for (off, w) in derivative_weights(i, len) {
                if w != 0.0 {
                    acc += &samples[(i as isize + off) as usize] * w;
                }
            }
            acc / h
        })
        .collect()
}
