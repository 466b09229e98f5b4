//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines and measured runtimes.

use std::time::Instant;

use steinpair::bounds::{
    kappa_exact, poisson_total, rho_terms, solve_delta_inequality, BoundMode, NormalBoundReport,
    DOMINANCE_SLACK,
};
use steinpair::coupling::ExactPairCoupling;
use steinpair::models;
use steinpair::numerics::QuadratureSpec;
use steinpair::pipeline::{run_verify, ExperimentConfig, Mode, ModelZoo, SplitMix64};
use steinpair::stein_normal::{
    certify_grid, ef_zero_check, equal_marginals_identity_check, remainder_split_term,
    AntisymmetricForm, NormalSteinSolution, SmoothedHalfLineTest,
};
use steinpair::stein_poisson::{
    ef_zero_poisson_check, singleton_basis, solve_poisson_stein, DiscreteAntiderivative,
};

const Z_LIST: [f64; 3] = [-1.0, 0.0, 1.0];
const T_LIST: [f64; 3] = [0.25, 0.5, 1.0];

fn solutions(z_list: &[f64], t_list: &[f64]) -> Vec<NormalSteinSolution> {
    z_list
        .iter()
        .flat_map(|&z| {
            t_list
                .iter()
                .map(move |&t| NormalSteinSolution::new(SmoothedHalfLineTest::new(z, t).unwrap()))
        })
        .collect()
}

fn standardized_zoo() -> Vec<(ExactPairCoupling, steinpair::models::ModelMetadata, f64)> {
    ModelZoo::standard()
        .unwrap()
        .entries
        .into_iter()
        .map(|(raw, meta)| {
            let sigma = raw.var_w().sqrt();
            (raw.standardize().unwrap(), meta, sigma)
        })
        .collect()
}

#[test]
fn acceptance_01_normal_dominance_on_rademacher() {
    for n in [4usize, 8, 16, 32] {
        let start = Instant::now();
        let (coupling, meta) = models::rademacher_sum(n).unwrap();
        let decomp = coupling
            .regression_decompose(meta.structural_lambda)
            .unwrap();
        let report = NormalBoundReport::evaluate(&coupling, &decomp, meta.a_bound).unwrap();
        let nf = n as f64;
        assert!(
            report.delta_actual <= report.bound_third_moment + DOMINANCE_SLACK,
            "n={n}: delta {} vs bound 2.4 {}",
            report.delta_actual,
            report.bound_third_moment
        );
        assert!(
            report.delta_actual <= report.bound_bounded_jump + DOMINANCE_SLACK,
            "n={n}: delta {} vs bound 2.5 {}",
            report.delta_actual,
            report.bound_bounded_jump
        );
        assert!(
            (report.bound_bounded_jump - 280.0 / nf.sqrt()).abs() < 1e-10,
            "n={n}: bound 2.5 = {}, expected {}",
            report.bound_bounded_jump,
            280.0 / nf.sqrt()
        );
        assert!(report.var_ewv2 < 1e-24 && report.er2 < 1e-24);
        let scaled = report.delta_actual * nf.sqrt();
        assert!(
            (0.3..=1.0).contains(&scaled),
            "n={n}: delta*sqrt(n) = {scaled}"
        );
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 1.0, "n={n} took {elapsed:?}");
    }
    println!("acceptance 1 (normal dominance, rademacher n in {{4,8,16,32}}, 280/sqrt(n), CLT rate): PASS");
}

#[test]
fn acceptance_02_normal_dominance_without_exchangeability() {
    let start = Instant::now();
    for m in [8usize, 12, 24] {
        for drift in [0.1, 0.2] {
            let (coupling, _) = models::biased_cycle_normal(m, drift).unwrap();
            assert!(coupling.marginal_discrepancy() <= 1e-12, "m={m} d={drift}");
            assert!(!coupling.is_exchangeable(1e-12), "m={m} d={drift}");
            let decomp = coupling.regression_decompose(None).unwrap();
            assert!(decomp.er2 > 0.0, "m={m} d={drift}: ER² = {}", decomp.er2);
            let report = NormalBoundReport::evaluate(&coupling, &decomp, None).unwrap();
            assert!(
                report.delta_actual <= report.bound_third_moment + DOMINANCE_SLACK,
                "m={m} d={drift}: delta {} vs {}",
                report.delta_actual,
                report.bound_third_moment
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("acceptance 2 (normal dominance without exchangeability, biased cycle): PASS");
}

#[test]
fn acceptance_03_equal_marginals_identity_across_zoo() {
    let sols = solutions(&Z_LIST, &T_LIST);
    let tau = QuadratureSpec::default_tau();
    let mut worst: f64 = 0.0;
    for (coupling, meta, _) in standardized_zoo() {
        let decomp = coupling
            .regression_decompose(meta.structural_lambda)
            .unwrap();
        for sol in &sols {
            let report = equal_marginals_identity_check(&coupling, &decomp, sol, &tau).unwrap();
            worst = worst.max(report.residual.abs());
            assert!(
                report.residual.abs() < 1e-6,
                "{} z={} t={}: residual {:e}",
                meta.name,
                sol.test().z,
                sol.test().t,
                report.residual
            );
        }
    }
    println!("acceptance 3 (equal-marginals identity residual < 1e-6 on every zoo coupling, worst {worst:e}): PASS");
}

#[test]
fn acceptance_04_remainder_equality_and_its_failure() {
    let sols = solutions(&Z_LIST, &T_LIST);
    let tau = QuadratureSpec::default_tau();
    for (coupling, meta, _) in standardized_zoo() {
        if !meta.exchangeable_expected {
            continue;
        }
        for sol in &sols {
            let split = remainder_split_term(&coupling, sol, &tau).unwrap();
            assert!(
                split.abs() < 1e-8,
                "{}: split {:e} at z={} t={}",
                meta.name,
                split,
                sol.test().z,
                sol.test().t
            );
        }
    }
    // the non-exchangeable witness: for each cycle size at drift 0.2 the
    // term is visibly nonzero for some test function
    for m in [8usize, 12, 24] {
        let (coupling, _) = models::biased_cycle_normal(m, 0.2).unwrap();
        let max_split = sols
            .iter()
            .map(|sol| remainder_split_term(&coupling, sol, &tau).unwrap().abs())
            .fold(0.0f64, f64::max);
        assert!(max_split > 1e-6, "m={m}: max split {max_split:e}");
    }
    println!("acceptance 4 (remainder equality under exchangeability, nonzero witness at drift 0.2): PASS");
}

#[test]
fn acceptance_05_antisymmetric_function_dichotomy() {
    let sols = solutions(&Z_LIST, &T_LIST);
    for (coupling, meta, _) in standardized_zoo() {
        for sol in &sols {
            let integral = ef_zero_check(&coupling, sol, AntisymmetricForm::Integral).unwrap();
            assert!(
                integral.abs() < 1e-8,
                "{}: integral EF {:e}",
                meta.name,
                integral
            );
            let product = ef_zero_check(&coupling, sol, AntisymmetricForm::Product).unwrap();
            if meta.exchangeable_expected {
                assert!(
                    product.abs() < 1e-10,
                    "{}: product EF {:e}",
                    meta.name,
                    product
                );
            }
        }
        if !meta.exchangeable_expected {
            let witness = sols
                .iter()
                .map(|sol| {
                    ef_zero_check(&coupling, sol, AntisymmetricForm::Product)
                        .unwrap()
                        .abs()
                })
                .fold(0.0f64, f64::max);
            assert!(
                witness > 1e-10,
                "{}: product witness {witness:e}",
                meta.name
            );
        }
    }
    // Poisson jump function: < 1e-10 exchangeable, nonzero otherwise
    let zoo = ModelZoo::standard().unwrap();
    for (coupling, meta) in zoo
        .entries
        .iter()
        .filter(|(c, _)| c.integer_valued() && c.values()[0] >= -0.5)
    {
        let lambda = meta.poisson_mean.unwrap();
        let max_value = coupling.values().last().copied().unwrap() as u32;
        let basis = singleton_basis(lambda, max_value, max_value as usize + 4).unwrap();
        let extreme = basis
            .iter()
            .map(|sol| {
                let ad = DiscreteAntiderivative::from_solution(sol);
                ef_zero_poisson_check(coupling, &ad).unwrap().abs()
            })
            .fold(0.0f64, f64::max);
        if meta.exchangeable_expected {
            assert!(extreme < 1e-10, "{}: poisson EF {extreme:e}", meta.name);
        } else {
            assert!(
                extreme > 1e-10,
                "{}: poisson EF witness {extreme:e}",
                meta.name
            );
        }
    }
    println!("acceptance 5 (antisymmetric-function dichotomy): PASS");
}

#[test]
fn acceptance_06_stein_solution_certificates() {
    let start = Instant::now();
    // normal side: residual and norms on the [-8, 8] grid, step 0.01
    for z in Z_LIST {
        for t in [0.1, 0.5, 1.0] {
            let sol = NormalSteinSolution::new(SmoothedHalfLineTest::new(z, t).unwrap());
            let cert = certify_grid(&sol, 0.01);
            assert!(
                cert.max_fd_residual < 1e-8,
                "z={z} t={t}: fd residual {:e}",
                cert.max_fd_residual
            );
            assert!(
                cert.max_eq_residual < 1e-8,
                "z={z} t={t}: eq residual {:e}",
                cert.max_eq_residual
            );
            assert!(cert.max_abs_f <= 2.6, "z={z} t={t}: ‖f‖ {}", cert.max_abs_f);
            assert!(
                cert.max_abs_f1 <= 4.0,
                "z={z} t={t}: ‖f'‖ {}",
                cert.max_abs_f1
            );
            assert!(
                cert.max_abs_f2 <= 1.6 / t,
                "z={z} t={t}: ‖f''‖ {}",
                cert.max_abs_f2
            );
        }
    }
    // Poisson side: 200 random subsets per lambda at N = 40
    let mut rng = SplitMix64(0x0acc_e97a);
    for lambda in [0.5f64, 1.0, 2.0] {
        for _ in 0..200 {
            let subset: Vec<u32> = (0..=40u32).filter(|_| rng.next_f64() < 0.5).collect();
            let sol = solve_poisson_stein(lambda, &subset, 40, 44).unwrap();
            assert!(
                sol.max_residual() < 1e-12,
                "lambda={lambda}: residual {:e}",
                sol.max_residual()
            );
            assert!(
                sol.norm() <= lambda.powf(-0.5) + 1e-12,
                "lambda={lambda}: ‖f‖ = {}",
                sol.norm()
            );
            assert!(
                sol.delta1_norm() <= (1.0 - (-lambda).exp()) / lambda + 1e-12,
                "lambda={lambda}: ‖Δ₁f‖ = {}",
                sol.delta1_norm()
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "acceptance 6 (Stein-solution certificates, normal grid + 600 random subsets) in {:.2}s: PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_07_poisson_dominance() {
    for lambda in [0.5, 1.0, 2.0] {
        let (coupling, meta) = models::immigration_death(lambda, 12, lambda + 12.0).unwrap();
        let basis = singleton_basis(lambda, 12, 16).unwrap();
        let report = poisson_total(
            &coupling,
            lambda,
            meta.structural_c.unwrap(),
            BoundMode::Exact,
            1e-12,
            &basis,
        )
        .unwrap();
        assert!(report.dominance_ok, "immigration_death lambda={lambda}");
    }
    for eps in [0.005, 0.01] {
        let (coupling, meta) = models::skewed_two_step(1.0, 10, eps).unwrap();
        let basis = singleton_basis(1.0, 10, 14).unwrap();
        let report = poisson_total(
            &coupling,
            1.0,
            meta.structural_c.unwrap(),
            BoundMode::Exact,
            1e-12,
            &basis,
        )
        .unwrap();
        assert!(report.dominance_ok, "skewed eps={eps}");
        assert!(
            report.rho_exact > 0.0,
            "skewed eps={eps} should have rho > 0"
        );
    }
    for n in [4usize, 5, 6] {
        let (coupling, _) = models::permutation_fixed_points(n).unwrap();
        let max_value = coupling.values().last().copied().unwrap() as u32;
        let basis = singleton_basis(1.0, max_value, max_value as usize + 4).unwrap();
        let report = poisson_total(&coupling, 1.0, 2.0, BoundMode::Exact, 1e-12, &basis).unwrap();
        assert!(report.dominance_ok, "fixed_points n={n}");
        assert!(
            report.rho_exact < 1e-12 && report.rho_bound_joint < 1e-12,
            "fixed_points n={n}: rho {:e}/{:e}",
            report.rho_exact,
            report.rho_bound_joint
        );
        assert!(
            report.rho_bound_marginal > 0.0,
            "fixed_points n={n}: marginal bound should see the ±2 jumps"
        );
    }
    println!("acceptance 7 (Poisson dominance d_TV <= kappa + c rho on all integer models): PASS");
}

#[test]
fn acceptance_08_kappa_supremum_oracle() {
    use rayon::prelude::*;
    let start = Instant::now();
    for (coupling, lambda, n_cap) in [
        (
            models::immigration_death(1.0, 12, 13.0).unwrap().0,
            1.0,
            12u32,
        ),
        (
            models::skewed_two_step(1.0, 10, 0.01).unwrap().0,
            1.0,
            10u32,
        ),
    ] {
        let kernel = coupling.jump_probabilities().unwrap();
        let basis = singleton_basis(lambda, n_cap, n_cap as usize + 4).unwrap();
        let c_scale = lambda + n_cap as f64;
        let fast = kappa_exact(&coupling, &kernel, lambda, c_scale, &basis).unwrap();
        let ints: Vec<i64> = coupling.values().iter().map(|v| v.round() as i64).collect();
        let row = coupling.w_marginal();
        let states = n_cap + 1;
        let brute = (0u64..(1 << states))
            .into_par_iter()
            .map(|mask| {
                let subset: Vec<u32> = (0..states).filter(|b| mask & (1 << b) != 0).collect();
                let sol = solve_poisson_stein(lambda, &subset, n_cap, n_cap as usize + 4).unwrap();
                let mut s = 0.0;
                for (k, &pk) in row.iter().enumerate() {
                    let w = ints[k] as usize;
                    let up = c_scale * kernel.p(k, 1) - lambda;
                    let down = c_scale * kernel.p(k, -1) - w as f64;
                    s += pk * (up * sol.f(w + 1) - down * sol.f(w));
                }
                s.abs()
            })
            .reduce(|| 0.0, f64::max);
        assert!(
            (fast - brute).abs() < 1e-10,
            "N={n_cap}: singleton {fast:e} vs exhaustive {brute:e}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance 8 (kappa supremum equals exhaustive subset maximization) in {:.2}s: PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_09_ordering_chains() {
    let zoo = ModelZoo::standard().unwrap();
    for (coupling, meta) in zoo
        .entries
        .iter()
        .filter(|(c, _)| c.integer_valued() && c.values()[0] >= -0.5)
    {
        let lambda = meta.poisson_mean.unwrap();
        let max_value = coupling.values().last().copied().unwrap() as u32;
        let basis = singleton_basis(lambda, max_value, max_value as usize + 4).unwrap();
        let kernel = coupling.jump_probabilities().unwrap();
        let c_scale = meta.structural_c.unwrap_or(lambda + max_value as f64);
        let k_exact = kappa_exact(coupling, &kernel, lambda, c_scale, &basis).unwrap();
        let k_simple = steinpair::bounds::kappa_simple(coupling, &kernel, lambda, c_scale).unwrap();
        assert!(
            k_exact <= k_simple + 1e-10,
            "{}: kappa {k_exact} > simple {k_simple}",
            meta.name
        );
        let rho = rho_terms(coupling, lambda, &basis).unwrap();
        assert!(rho.exact <= rho.bound_joint + 1e-10, "{}", meta.name);
        assert!(
            rho.bound_joint <= rho.bound_marginal + 1e-10,
            "{}",
            meta.name
        );
    }
    println!("acceptance 9 (ordering chains kappa_exact <= kappa_simple, rho chain): PASS");
}

#[test]
fn acceptance_10_delta_inequality_closure() {
    let mut rng = SplitMix64(0xde17a);
    for _ in 0..100 {
        let p = 10.0 * rng.next_f64();
        let q = 10.0 * rng.next_f64();
        let closed = solve_delta_inequality(p, q).unwrap();
        // numeric fixed point of delta = p + q sqrt(delta)
        let s = 0.5 * (q + (q * q + 4.0 * p).sqrt());
        assert!(
            closed + 1e-9 >= s * s,
            "p={p} q={q}: closed {closed} < fixed point {}",
            s * s
        );
    }
    println!("acceptance 10 (delta-inequality closure dominates the fixed point): PASS");
}

#[test]
fn acceptance_11_verify_determinism() {
    let config = ExperimentConfig::new(Mode::Verify);
    let first = run_verify(&config).unwrap();
    let second = run_verify(&config).unwrap();
    assert!(first.all_pass, "verify suite must pass");
    assert_eq!(
        first.report_string().unwrap(),
        second.report_string().unwrap(),
        "verify JSON must be byte-identical"
    );
    assert_eq!(first.csv_string(), second.csv_string());
    println!("acceptance 11 (verify runs are byte-identical): PASS");
}
