//! Stopped accounting identity E[M_T] = sum of truncated premiums, checked
//! three ways: Monte Carlo, an exact lattice oracle, and the Wald reduction
//! at K = 1.

use selbias::{
    exact_stopped_rademacher, simulate_stopped, wald_check, Family, IncrementModel, StoppingRule,
};

fn main() {
    let rule = StoppingRule::Threshold { c: 3.0, cap: 20 };
    let model = IncrementModel::iid(Family::Rademacher, 2, 1.0).unwrap();

    let mc = simulate_stopped(&model, rule, 100_000, 17, 500).unwrap();
    println!("threshold(c=3, cap=20), rademacher K=2:");
    println!("  E[M_T]  mc   = {:.5} +- {:.5}", mc.stopped_max, mc.stopped_max_se);
    println!("  RHS sum mc   = {:.5} +- {:.5}", mc.rhs_total, mc.rhs_total_se);

    let exact = exact_stopped_rademacher(2, rule).unwrap();
    println!("  E[M_T]  exact = {:.12}", exact.stopped_max);
    println!("  RHS sum exact = {:.12}", exact.rhs_total);
    println!("  E[T]    exact = {:.12}", exact.mean_stop_time);

    println!("\nWald at K=1, gaussian, mu = 0.5, threshold(c=5, cap=50):");
    let single = IncrementModel::iid(Family::Gaussian, 1, 1.0).unwrap();
    let w = wald_check(0.5, StoppingRule::Threshold { c: 5.0, cap: 50 }, &single, 100_000, 23)
        .unwrap();
    println!("  E[S_T]    = {:.5} +- {:.5}", w.stopped_sum, w.stopped_sum_se);
    println!("  mu E[T]   = {:.5}", w.drift_times_mean_t);
    println!("  paired diff = {:.5} +- {:.5}", w.difference, w.difference_se);
}
