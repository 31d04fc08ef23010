use nalgebra::DMatrix;
use tvvar::simulate::{complement_rank, evolve_precision, sample_singular_beta, beta_dof, seeded_rng};
use tvvar::ModelConfig;

#[test]
fn precision_mean_is_preserved() {
    let c = ModelConfig::new(2, 1, 0.98, 0.9).unwrap();
    let prec = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let mut rng = seeded_rng(2024);
    let m = 40_000;
    let mut sum = DMatrix::zeros(2, 2);
    let mut sq = DMatrix::zeros(2, 2);
    for _ in 0..m {
        let draw = evolve_precision(&prec, &c, &mut rng).unwrap();
        sq += draw.component_mul(&draw);
        sum += draw;
    }
    let mean = &sum / m as f64;
    for i in 0..2 {
        for j in 0..2 {
            let var = sq[(i, j)] / m as f64 - mean[(i, j)] * mean[(i, j)];
            let se = (var / m as f64).sqrt();
            assert!((mean[(i, j)] - prec[(i, j)]).abs() < 5.0 * se, "({i},{j}) {} vs {}", mean[(i, j)], prec[(i, j)]);
        }
    }
}

#[test]
fn beta_draws_have_rank_one_complement() {
    let c = ModelConfig::new(3, 1, 0.98, 0.97).unwrap();
    let mut rng = seeded_rng(1);
    for _ in 0..2000 {
        let b = sample_singular_beta(3, beta_dof(&c), &mut rng).unwrap();
        assert_eq!(complement_rank(&b), 1);
    }
}
