//! Empirical E[max of K centered walks] against the sub-Gaussian envelope
//! sqrt(2 n lambda_max log K) over an (n, K) grid for two bounded families.

use selbias::{envelope_sweep, Family};

fn main() {
    let n_grid = [50, 100, 200, 500];
    let k_grid = [2, 10, 50];
    let families = [Family::UniformCentered, Family::Rademacher];
    let report = envelope_sweep(&n_grid, &k_grid, &families, 10_000, 3, 50_000).unwrap();

    println!(
        "{:>18} {:>4} {:>5} {:>10} {:>10} {:>10}",
        "family", "K", "n", "empirical", "envelope", "margin"
    );
    for cell in &report.cells {
        println!(
            "{:>18} {:>4} {:>5} {:>10.3} {:>10.3} {:>10.3}",
            cell.family.name(),
            cell.arm_count,
            cell.horizon,
            cell.empirical,
            cell.envelope,
            cell.margin
        );
    }
}
