use drmean::estimators::{ace_combined, ace_control_variates, SampleView};

fn det(m: &[[f64; 4]; 4]) -> f64 {
    // Laplace expansion along the first row
    fn det3(a: [[f64; 3]; 3]) -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }
    (0..4)
        .map(|j| {
            let mut minor = [[0.0; 3]; 3];
            for r in 1..4 {
                for (c, k) in (0..4).filter(|&k| k != j).enumerate() {
                    minor[r - 1][c] = m[r][k];
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * det3(minor)
        })
        .sum()
}

fn cramer(a: &[[f64; 4]; 4], b: &[f64; 4]) -> [f64; 4] {
    let d = det(a);
    let mut x = [0.0; 4];
    for (j, xj) in x.iter_mut().enumerate() {
        let mut aj = *a;
        for r in 0..4 {
            aj[r][j] = b[r];
        }
        *xj = det(&aj) / d;
    }
    x
}

#[test]
fn four_unit_contrast_matches_cramer() {
    let t = [true, false, true, false, true];
    let y = [Some(5.0), Some(2.0), Some(7.0), Some(1.5), Some(4.0)];
    let pi = [0.6, 0.3, 0.45, 0.7, 0.2];
    let m1 = [4.0, 3.0, 6.0, 5.0, 3.5];
    let m0 = [1.0, 2.5, 2.0, 0.5, 1.5];
    let view = SampleView {
        treatment: &t,
        outcomes: &y,
        propensity: &pi,
        ps_design: None,
        or_design: None,
    };

    // independent construction of η, ξ and ζ
    let n = t.len();
    let mut eta = vec![0.0; n];
    let mut xi = vec![[0.0; 4]; n];
    let mut zeta = vec![[0.0; 4]; n];
    for i in 0..n {
        let (p, q) = (pi[i], 1.0 - pi[i]);
        let ti = if t[i] { 1.0 } else { 0.0 };
        let yi = y[i].unwrap();
        let w = ti / p - (1.0 - ti) / q;
        let g = [p, q, p * m0[i], q * m1[i]];
        eta[i] = ti * yi / p - (1.0 - ti) * yi / q;
        for k in 0..4 {
            xi[i][k] = w * g[k];
        }
        zeta[i] = [-(1.0 - ti) / q, ti / p, -(1.0 - ti) * m0[i] / q, ti * m1[i] / p];
    }
    let mut gram = [[0.0; 4]; 4];
    let mut cross = [0.0; 4];
    let mut xi_mean = [0.0; 4];
    for i in 0..n {
        for a in 0..4 {
            cross[a] += xi[i][a] * eta[i] / n as f64;
            xi_mean[a] += xi[i][a] / n as f64;
            for b in 0..4 {
                gram[a][b] += xi[i][a] * zeta[i][b] / n as f64;
            }
        }
    }
    let beta = cramer(&gram, &cross);
    let expect = eta.iter().sum::<f64>() / n as f64
        - (0..4).map(|k| beta[k] * xi_mean[k]).sum::<f64>();

    let cv = ace_control_variates(&view, &m1, &m0, false).unwrap();
    for i in 0..n {
        assert_eq!(cv.eta[i], eta[i]);
        for k in 0..4 {
            assert!((cv.xi.row(i)[k] - xi[i][k]).abs() < 1e-12);
            assert!((cv.zeta.row(i)[k] - zeta[i][k]).abs() < 1e-12);
        }
    }
    let got = ace_combined(&view, &m1, &m0, false).unwrap();
    assert!(!got.fallback.engaged());
    for k in 0..4 {
        assert!((got.beta[k] - beta[k]).abs() < 1e-9 * (1.0 + beta[k].abs()), "{:?} vs {beta:?}", got.beta);
    }
    assert!((got.value - expect).abs() < 1e-9, "{} vs {expect}", got.value);
}
