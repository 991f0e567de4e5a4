use uclab::bounds::*;
use uclab::linalg;
use uclab::oracles::{primal_grad_ncsc, InnerSolveConfig, Objective};
use uclab::problems::{derive_seed, make_sin_bilinear_ncsc, Dataset, MinimaxInstance};

#[test]
fn sample_sizes_grow_as_eps_shrinks() {
    let mut last = 0;
    for eps in [0.5, 0.2, 0.1, 0.05, 0.01] {
        let n = sample_size_ncsc(2, eps, 2.0, 1.0, 3.0).unwrap();
        assert!(n > last);
        last = n;
    }
    let mut last = 0;
    for eps in [0.5, 0.2, 0.1, 0.05] {
        let s = sample_size_ncc(2, eps, 2.0, 3.0, 1.0, 1.0).unwrap();
        assert!(s.n > last);
        assert!(s.terms.iter().sum::<f64>() <= eps * (1.0 + 1e-12));
        last = s.n;
    }
}

#[test]
fn stability_bounds_decay_like_one_over_n() {
    let a = stability_y_bound(2.0, 0.5, 10).unwrap();
    let b = stability_y_bound(2.0, 0.5, 100).unwrap();
    assert!((a / b - 10.0).abs() < 1e-12);
    let a = erm_gap_bound(2.0, 0.5, 10).unwrap();
    let b = erm_gap_bound(2.0, 0.5, 1000).unwrap();
    assert!((a / b - 100.0).abs() < 1e-9);
    assert!(stability_y_bound(1.0, 0.0, 10).is_err());
}

#[test]
fn chain_complexities_exceed_sample_size() {
    let t = ComplexityTemplate::catalyst_ncsc();
    let c = ncsc_chain_complexity(1, 0.1, 2.0, 1.0, 1.0, &t).unwrap();
    assert!(c >= sample_size_ncsc(1, 0.05, 2.0, 1.0, 1.0).unwrap() as f64);
    let t = ComplexityTemplate::catalyst_ncc();
    assert!(ncc_chain_complexity(1, 0.1, 2.0, 1.0, 1.0, 1.0, &t).unwrap() > 0.0);
}

#[test]
fn expected_gradient_deviation_below_bound() {
    let inst = make_sin_bilinear_ncsc(2, 2, 1.0, 1.0, 4.0, 1).unwrap();
    let c = *inst.constants();
    let cfg = InnerSolveConfig::default();
    let x = [0.2, -0.4];
    let pop = Objective::population(&inst).unwrap();
    let g = primal_grad_ncsc(&pop, &x, &cfg).unwrap();
    for n in [10u64, 100] {
        let draws = 200;
        let mut total = 0.0;
        for t in 0..draws {
            let data = Dataset::draw(&inst, derive_seed(&[77, n, t]), n as usize).unwrap();
            let emp = Objective::empirical(&inst, &data).unwrap();
            total += linalg::dist(&g, &primal_grad_ncsc(&emp, &x, &cfg).unwrap());
        }
        let mean = total / draws as f64;
        let bound = expected_grad_diff_bound(c.g, c.l, c.mu, n).unwrap();
        assert!(mean <= bound, "n = {n}: {mean} > {bound}");
    }
}
