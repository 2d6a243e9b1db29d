use cyclefv::dynamics::exact_moments;
use cyclefv::particle_system::{estimate_moments, simulate_ensemble, simulate_literal};
use cyclefv::{Configuration, Params};

// Both simulators should reproduce the exact mean and covariance of the chain.
#[test]
fn literal_and_effective_simulators_agree_with_chain() {
    let params = Params::new(4, 2.0, 1.5).unwrap();
    let eta0 = Configuration::new(vec![3, 1, 0, 0]).unwrap();
    let grid = [0.3, 1.0];
    let replicas = 40_000;
    let fast = simulate_ensemble(&params, &eta0, 1.0, &grid, 21, replicas).unwrap();
    let slow = simulate_literal(&params, &eta0, 1.0, &grid, 22, replicas).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let (mean, g) = exact_moments(&params, &eta0, t).unwrap();
        for (a, b) in [(0, 0), (1, 1), (0, 1), (1, 3), (2, 3)] {
            for ens in [&fast, &slow] {
                let e = estimate_moments(ens, a, b).unwrap()[i];
                assert!((e.mean_k - mean[a]).abs() < 4.0 * e.std_error + 1e-12, "t={t} site {a}: {e:?} vs {}", mean[a]);
                assert!(
                    (e.cov_kl - g[(a, b)]).abs() < 4.0 * e.cov_std_error + 1e-12,
                    "t={t} ({a},{b}): {e:?} vs {}",
                    g[(a, b)]
                );
            }
        }
    }
}
