use nalgebra::DMatrix;
use proptest::prelude::*;
use winkler_core::plate::assemble_biharmonic;
use winkler_core::prior::{sample_prior, PriorSampler, PriorSpec};
use winkler_core::Grid;

fn empirical_covariance(samples: &[Vec<f64>]) -> DMatrix<f64> {
    let p = samples[0].len();
    let j = samples.len() as f64;
    let mut mean = vec![0.0; p];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / j;
        }
    }
    let mut c = DMatrix::zeros(p, p);
    for s in samples {
        for a in 0..p {
            for b in 0..p {
                c[(a, b)] += (s[a] - mean[a]) * (s[b] - mean[b]) / j;
            }
        }
    }
    c
}

#[test]
fn sample_covariance_approaches_scaled_inverse_operator() {
    let grid = Grid::unit(6).unwrap();
    let b = assemble_biharmonic(&grid).unwrap();
    let beta = 250.0;
    let spec = PriorSpec::new(beta, 11);
    let samples = sample_prior(&spec, &b, 2000).unwrap();
    let exact = DMatrix::from_row_slice(b.dim(), b.dim(), &b.to_dense())
        .try_inverse()
        .unwrap()
        * beta;
    let rel = (empirical_covariance(&samples) - &exact).norm() / exact.norm();
    assert!(rel <= 0.15, "relative Frobenius error {rel}");
}

#[test]
fn shifted_prior_matches_shifted_inverse() {
    let grid = Grid::unit(6).unwrap();
    let b = assemble_biharmonic(&grid).unwrap();
    let spec = PriorSpec {
        shift: 500.0,
        ..PriorSpec::new(1.0, 5)
    };
    let samples = sample_prior(&spec, &b, 2000).unwrap();
    let mut op = DMatrix::from_row_slice(b.dim(), b.dim(), &b.to_dense());
    for d in 0..b.dim() {
        op[(d, d)] += 500.0;
    }
    let exact = op.try_inverse().unwrap();
    let rel = (empirical_covariance(&samples) - &exact).norm() / exact.norm();
    assert!(rel <= 0.15, "relative Frobenius error {rel}");
}

#[test]
fn sample_mean_within_clt_bound() {
    let grid = Grid::unit(10).unwrap();
    let b = assemble_biharmonic(&grid).unwrap();
    let beta = 1e6;
    let j = 2000;
    let samples = sample_prior(&PriorSpec::new(beta, 3), &b, j).unwrap();
    let p = b.dim();
    let mut mean = vec![0.0; p];
    for s in &samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / j as f64;
        }
    }
    let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c0 = DMatrix::from_row_slice(p, p, &b.to_dense())
        .try_inverse()
        .unwrap()
        * beta;
    let bound = 3.0 * (c0.trace() / j as f64).sqrt();
    assert!(norm <= bound, "{norm} > {bound}");
}

#[test]
fn draws_are_damped_next_to_the_clamped_edge() {
    let grid = Grid::unit(10).unwrap();
    let b = assemble_biharmonic(&grid).unwrap();
    let samples = sample_prior(&PriorSpec::new(1.0, 8), &b, 2000).unwrap();
    let n = grid.n();
    let (mut edge, mut edge_count, mut centre, mut centre_count) = (0.0, 0, 0.0, 0);
    for (idx, (i, j)) in grid.nodes().enumerate() {
        let mean_abs = samples.iter().map(|s| s[idx].abs()).sum::<f64>() / samples.len() as f64;
        if i == 1 || j == 1 || i == n - 1 || j == n - 1 {
            edge += mean_abs;
            edge_count += 1;
        } else if (4..=6).contains(&i) && (4..=6).contains(&j) {
            centre += mean_abs;
            centre_count += 1;
        }
    }
    let (edge, centre) = (edge / edge_count as f64, centre / centre_count as f64);
    assert!(edge < centre, "edge ring {edge} vs centre {centre}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_member_is_reproducible(seed in any::<u64>(), n in 4usize..12) {
        let b = assemble_biharmonic(&Grid::unit(n).unwrap()).unwrap();
        let spec = PriorSpec::new(1e3, seed);
        prop_assert_eq!(sample_prior(&spec, &b, 1).unwrap(), sample_prior(&spec, &b, 1).unwrap());
    }

    #[test]
    fn members_do_not_depend_on_ensemble_size(seed in any::<u64>(), j in 1usize..20) {
        let b = assemble_biharmonic(&Grid::unit(6).unwrap()).unwrap();
        let sampler = PriorSampler::new(PriorSpec::new(2.0, seed), &b).unwrap();
        let all = sampler.sample(j);
        prop_assert_eq!(&all[j - 1], &sampler.sample_member(j - 1));
        prop_assert_eq!(&all[0], &sampler.sample(1)[0]);
    }

    #[test]
    fn quadrupling_beta_doubles_every_draw(seed in any::<u64>(), beta in 1e-3f64..1e6) {
        let b = assemble_biharmonic(&Grid::unit(7).unwrap()).unwrap();
        let small = sample_prior(&PriorSpec::new(beta, seed), &b, 3).unwrap();
        let big = sample_prior(&PriorSpec::new(4.0 * beta, seed), &b, 3).unwrap();
        for (s, l) in small.iter().flatten().zip(big.iter().flatten()) {
            prop_assert!((2.0 * s - l).abs() <= 1e-12 * l.abs().max(1e-300));
        }
    }

    #[test]
    fn invalid_hyperparameters_are_rejected(beta in -10.0f64..=0.0, shift in -10.0f64..-1e-9) {
        let b = assemble_biharmonic(&Grid::unit(5).unwrap()).unwrap();
        prop_assert!(sample_prior(&PriorSpec::new(beta, 0), &b, 2).is_err());
        let bad_shift = PriorSpec { shift, ..PriorSpec::new(1.0, 0) };
        prop_assert!(sample_prior(&bad_shift, &b, 2).is_err());
    }
}
