//! The p = 1, d = 1 filter against a hand-rolled univariate discount DLM.

use nalgebra::DMatrix;
use tvvar::{default_prior, run_filter, ModelConfig, SeriesFrame};

struct ScalarDlm {
    m: [f64; 2],
    p: [[f64; 2]; 2],
    s: f64,
}

impl ScalarDlm {
    fn step(&mut self, prev_y: f64, y: f64, delta: f64, k: f64) {
        let f = [1.0, prev_y];
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.p[i][j] / delta;
            }
        }
        let rf = [r[0][0] * f[0] + r[0][1] * f[1], r[1][0] * f[0] + r[1][1] * f[1]];
        let q = f[0] * rf[0] + f[1] * rf[1] + 1.0;
        let e = y - (self.m[0] * f[0] + self.m[1] * f[1]);
        for i in 0..2 {
            self.m[i] += rf[i] / q * e;
            for j in 0..2 {
                self.p[i][j] = r[i][j] - rf[i] * rf[j] / q;
            }
        }
        self.s = self.s / k + e * e / q;
    }
}

#[test]
fn matches_univariate_dlm_over_500_steps() {
    let (delta, beta) = (0.97, 0.93);
    let config = ModelConfig::new(1, 1, delta, beta).unwrap();
    let mut x = 0.3f64;
    let ys: Vec<f64> = (0..501)
        .map(|i| {
            x = 0.6 * x + 0.4 * ((i as f64 * 0.731).sin() + 0.5 * (i as f64 * 2.17).cos());
            x
        })
        .collect();
    let series = SeriesFrame::from_matrix(DMatrix::from_column_slice(501, 1, &ys)).unwrap();
    let prior = default_prior(&config, None).unwrap();
    let run = run_filter(&series, &config, &prior).unwrap();

    let mut dlm = ScalarDlm { m: [0.0; 2], p: [[1000.0, 0.0], [0.0, 1000.0]], s: 1.0 };
    let mut worst = 0.0f64;
    for (i, snap) in run.snapshots.iter().enumerate().skip(1) {
        dlm.step(ys[i - 1], ys[i], delta, config.k());
        let devs = [
            (snap.location[(0, 0)] - dlm.m[0]).abs(),
            (snap.location[(1, 0)] - dlm.m[1]).abs(),
            (snap.spread[(0, 0)] - dlm.p[0][0]).abs(),
            (snap.spread[(0, 1)] - dlm.p[0][1]).abs(),
            (snap.spread[(1, 1)] - dlm.p[1][1]).abs(),
            (snap.vol_scale[(0, 0)] - dlm.s).abs(),
        ];
        worst = devs.iter().fold(worst, |a, &b| a.max(b));
    }
    assert_eq!(run.snapshots.len(), 501);
    assert!(worst < 1e-10, "max deviation {worst:e}");
}
