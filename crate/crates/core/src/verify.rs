//! Quick self-checks of the numerical kernels, run by the `verify` command.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis;
use crate::lattice::ConvexDomain;
use crate::metric;
use crate::oracles;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Largest difference between the production tension and the brute-force
/// recomputation over `fields` random spacelike fields.
pub fn tension_equivalence(fields: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..fields {
        let n = 2 + k % 2;
        let m = 1 + (k / 2) % 3;
        let f = oracles::random_spacelike_field(&mut rng, n, m);
        for &node in f.grid().interior() {
            let a = metric::tension(&f, node).expect("spacelike by construction");
            let b = oracles::brute_force_tension(&f, node).expect("spacelike by construction");
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();

    let worst = tension_equivalence(1000, 1);
    out.push(check("tension matches brute force", worst <= 1e-12, format!("max difference {worst:e} over 1000 fields")));

    let off_axis = ConvexDomain::new_box(vec![1.0, -0.5], vec![2.0, 0.5]).expect("box");
    let square = ConvexDomain::new_box(vec![-0.5; 2], vec![0.5; 2]).expect("box");
    let solutions = [
        (oracles::lorentzian_catenoid(1.0).expect("valid"), &off_axis),
        (
            oracles::holomorphic_solution(
                vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.15, 0.0)],
                &square,
            )
            .expect("valid"),
            &square,
        ),
        (
            oracles::holomorphic_solution(
                vec![Complex64::new(0.0, 0.0), Complex64::new(0.1, 0.05), Complex64::new(0.0, 0.0), Complex64::new(0.2, 0.0)],
                &square,
            )
            .expect("valid"),
            &square,
        ),
    ];
    for (sol, domain) in &solutions {
        let points = oracles::sample_domain(domain, 10_000, 7);
        match sol.verify(&points) {
            Ok(c) => out.push(check(
                &format!("{} is an exact solution", sol.id),
                c.passed(1e-10),
                format!("tension {:e}, derivative mismatch {:e}", c.max_tension, c.max_derivative_mismatch),
            )),
            Err(e) => out.push(check(&format!("{} is an exact solution", sol.id), false, e.to_string())),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=3);
        let mut j = crate::stencil::Jacobian { n, m, data: (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let l1 = metric::singular_values(&j).largest();
        let scale = rng.random_range(0.0..0.99) / l1;
        j.data.iter_mut().for_each(|v| *v *= scale);
        let s = metric::singular_values(&j);
        let g = metric::induced_metric(&j).expect("spacelike");
        worst = worst.max((g.det_g - s.metric_determinant()).abs() / g.det_g);
    }
    out.push(check("det g equals the singular value product", worst <= 1e-10, format!("max relative difference {worst:e}")));

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let delta = rng.random_range(0.1..4.0);
        let eta = rng.random_range(1.0..3.0);
        let n = rng.random_range(2..6);
        let (s, sb) = (rng.random_range(0.0..2.0), rng.random_range(0.0..1.0));
        let t = analysis::boundary_gradient_bound_theoretical(delta, eta, n, s, sb).expect("valid");
        let c = analysis::condition_lhs(n, delta, eta, s, sb);
        worst = worst.max((t - c).abs() / c.max(1.0));
    }
    out.push(check("a priori gradient bound equals the condition", worst <= 1e-13, format!("max relative difference {worst:e}")));
    out
}
