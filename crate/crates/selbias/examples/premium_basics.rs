//! One-step selection premium: Monte Carlo against the closed form at K = 2
//! and the quadrature constant g(K) at the tie state.

use selbias::{g_normal, premium_exact_2, premium_mc, Family, IncrementModel, SeedSpec};

fn main() {
    let model = IncrementModel::iid(Family::Gaussian, 2, 1.0).unwrap();

    for u in [[0.0, 0.0], [1.0, 0.0], [3.0, -1.0]] {
        let mc = premium_mc(&u, &model, 2_000_000, SeedSpec::new(7)).unwrap();
        let exact = premium_exact_2(&u, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        println!(
            "u = {u:>12?}  mc = {:.5} +- {:.5}  closed form = {:.5}",
            mc.value, mc.std_error, exact.value
        );
    }

    println!();
    for k in [1, 2, 5, 10, 50] {
        let g = g_normal(k, 1e-10).unwrap();
        println!("g({k:>2}) = {:.7}", g.value);
    }
    println!("\n(1/sqrt(pi) = {:.7})", 1.0 / std::f64::consts::PI.sqrt());
}
