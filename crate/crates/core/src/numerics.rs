//! Small numerical utilities: finite-difference weights on nonuniform grids,
//! composite trapezoid quadrature with a Richardson error estimate, and
//! least-squares line fits.

/// Fornberg weights for the `order`-th derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Indices of the (up to) five-point stencil used for the derivative at node `k`.
pub fn stencil(k: usize, n: usize) -> std::ops::Range<usize> {
    let width = n.min(5);
    let start = k.saturating_sub(width / 2).min(n - width);
    start..start + width
}

/// First derivative of samples `ys(ts)` at every node (fourth order in the interior).
pub fn derivative(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let r = stencil(k, n);
            let w = fd_weights(ts[k], &ts[r.clone()], 1);
            w.iter().zip(&ys[r]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Composite trapezoid rule on a nonuniform grid.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Trapezoid value and Richardson error estimate `|T_h − T_2h|/3`, where
/// `T_2h` uses every other node (the last node is always kept).
pub fn trapezoid_with_error(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let fine = trapezoid(ts, ys);
    if ts.len() < 3 {
        return (fine, 0.0);
    }
    let mut idx: Vec<usize> = (0..ts.len()).step_by(2).collect();
    if *idx.last().expect("nonempty") != ts.len() - 1 {
        idx.push(ts.len() - 1);
    }
    let ct: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
    let cy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let coarse = trapezoid(&ct, &cy);
    (fine, (fine - coarse).abs() / 3.0)
}

/// Ordinary least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Evenly spaced grid `start, start + step, …` up to `stop` (inclusive within
/// a relative tolerance), built by multiplication to avoid drift.
pub fn arange(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| start + k as f64 * step).collect()
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 3);
        let expect = [-0.5, 1.0, 0.0, -1.0, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_is_exact_for_quartics_on_nonuniform_grid() {
        let ts: Vec<f64> = (0..12).map(|k| (k as f64).powf(1.3) * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t.powi(4) - 2.0 * t).collect();
        let d = derivative(&ts, &ys);
        for (t, dy) in ts.iter().zip(d) {
            assert!((dy - (4.0 * t.powi(3) - 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn trapezoid_error_estimate_tracks_true_error() {
        let ts = linspace(0.0, 1.0, 101);
        let ys: Vec<f64> = ts.iter().map(|t| t.exp()).collect();
        let (v, e) = trapezoid_with_error(&ts, &ys);
        let truth = 1f64.exp() - 1.0;
        assert!((v - truth).abs() < 2.0 * e && e < 1e-4);
    }

    #[test]
    fn grids() {
        assert_eq!(arange(0.0, 1.5, 0.01).len(), 151);
        assert_eq!(linspace(0.05, 0.2, 8).len(), 8);
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 1.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
    }
}
