use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uclab::linalg;
use uclab::oracles::{
    default_lambda, gradient_mapping, moreau_grad, primal_grad_ncsc, primal_value, prox_point, InnerSolveConfig,
    Objective, SaddleFunction,
};
use uclab::problems::{
    make_quadratic_scsc, make_sin_bilinear_ncc, make_sin_bilinear_ncsc, Dataset, MinimaxInstance,
};

fn points(inst: &dyn MinimaxInstance, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| linalg::scale(&inst.x_domain().sample_uniform(&mut rng), 0.9))
        .collect()
}

fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn check_danskin(inst: &dyn MinimaxInstance, cfg: &InnerSolveConfig, tol: f64) {
    let data = Dataset::draw(inst, 9, 32).unwrap();
    let emp = Objective::empirical(inst, &data).unwrap();
    for x in points(inst, 20, 4) {
        let g = primal_grad_ncsc(&emp, &x, cfg).unwrap();
        let fd = fd_grad(|z| primal_value(&emp, z, cfg).unwrap(), &x, 1e-5);
        let rel = linalg::dist(&g, &fd) / (1.0 + linalg::norm(&g));
        assert!(rel <= tol, "{} at {x:?}: {rel:e}", inst.family());
    }
}

#[test]
fn danskin_gradient_matches_finite_differences_sin_bilinear() {
    let inst = make_sin_bilinear_ncsc(3, 2, 1.0, 1.0, 5.0, 2).unwrap();
    check_danskin(&inst, &InnerSolveConfig::default(), 1e-4);
}

#[test]
fn danskin_gradient_matches_finite_differences_quadratic() {
    let inst = make_quadratic_scsc(2, 1.0, 2.0, 1.0, 5.0, 3).unwrap();
    check_danskin(&inst, &InnerSolveConfig::default(), 1e-4);
}

#[test]
fn danskin_with_numeric_inner_solve() {
    let inst = make_sin_bilinear_ncsc(2, 2, 1.0, 1.0, 4.0, 1).unwrap();
    let cfg = InnerSolveConfig::default().numeric().with_tolerance(1e-10);
    check_danskin(&inst, &cfg, 1e-4);
}

#[test]
fn moreau_gradient_matches_finite_differences() {
    let inst = make_sin_bilinear_ncc(2, 2, 1.0, 1.0, 3).unwrap();
    let pop = Objective::population(&inst).unwrap();
    let lambda = default_lambda(&pop);
    let cfg = InnerSolveConfig::default();
    for x in points(&inst, 20, 6) {
        let g = moreau_grad(&pop, &x, lambda, &cfg).unwrap();
        let fd = fd_grad(|z| prox_point(&pop, z, lambda, &cfg).unwrap().envelope_value(), &x, 1e-5);
        assert!(linalg::dist(&g, &fd) <= 1e-3, "{x:?}: {g:?} vs {fd:?}");
    }
}

#[test]
fn prox_map_is_lipschitz() {
    // prox of an L-weakly convex function with lambda L < 1 is 1/(1 - lambda L) Lipschitz
    let inst = make_sin_bilinear_ncc(2, 2, 1.0, 1.0, 8).unwrap();
    let pop = Objective::population(&inst).unwrap();
    let lambda = default_lambda(&pop);
    let lip = 1.0 / (1.0 - lambda * pop.constants().l);
    let cfg = InnerSolveConfig::default();
    let xs = points(&inst, 12, 10);
    let proxes: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| prox_point(&pop, x, lambda, &cfg).unwrap().prox_point().to_vec())
        .collect();
    for i in 0..xs.len() {
        for j in 0..i {
            let lhs = linalg::dist(&proxes[i], &proxes[j]);
            assert!(lhs <= 1.05 * lip * linalg::dist(&xs[i], &xs[j]) + 1e-6);
        }
    }
}

#[test]
fn primal_gradient_is_l_tilde_smooth() {
    let inst = make_sin_bilinear_ncsc(2, 3, 2.0, 1.0, 4.0, 5).unwrap();
    let pop = Objective::population(&inst).unwrap();
    let l_tilde = pop.l_tilde();
    let cfg = InnerSolveConfig::default();
    let xs = points(&inst, 15, 12);
    let gs: Vec<Vec<f64>> = xs.iter().map(|x| primal_grad_ncsc(&pop, x, &cfg).unwrap()).collect();
    for i in 0..xs.len() {
        for j in 0..i {
            assert!(linalg::dist(&gs[i], &gs[j]) <= l_tilde * linalg::dist(&xs[i], &xs[j]) + 1e-9);
        }
    }
}

#[test]
fn prox_point_is_nearly_stationary() {
    let inst = make_sin_bilinear_ncc(2, 2, 1.0, 1.0, 3).unwrap();
    let xi = inst.population_sample().unwrap();
    let f = Objective::at_sample(&inst, xi.clone());
    let lambda = default_lambda(&f);
    let cfg = InnerSolveConfig::default();
    for x in points(&inst, 10, 13) {
        let p = prox_point(&f, &x, lambda, &cfg).unwrap();
        let measure = inst.stationarity_measure(p.prox_point(), &xi).unwrap();
        assert!(measure <= linalg::norm(p.moreau_grad()) + 1e-4, "{measure} at {x:?}");
    }
}

#[test]
fn regularization_lowers_primal_by_at_most_nu_dy() {
    let inst = make_sin_bilinear_ncc(2, 2, 1.0, 1.0, 3).unwrap();
    let pop = Objective::population(&inst).unwrap();
    let cfg = InnerSolveConfig::default();
    let d_y = inst.constants().d_y;
    for nu in [1e-6, 1e-2, 0.5] {
        let reg = pop.regularized(nu).unwrap();
        for x in points(&inst, 5, 14) {
            let phi = primal_value(&pop, &x, &cfg).unwrap();
            let phi_hat = primal_value(&reg, &x, &cfg).unwrap();
            assert!(phi_hat <= phi + 1e-9);
            assert!(phi - phi_hat <= nu * d_y / 2.0 + 1e-9);
        }
    }
}

#[test]
fn mapping_vanishes_at_interior_saddle() {
    let q = make_quadratic_scsc(2, 1.0, 1.0, 2.0, 10.0, 5).unwrap();
    let pop = Objective::population(&q).unwrap();
    let x = q.interior_saddle_x(&q.population_sample().unwrap());
    let m = gradient_mapping(&pop, &x, &InnerSolveConfig::default()).unwrap();
    assert!(linalg::norm(&m) <= 1e-9);
}
