use corank::assignment::{solve_assignment, solve_assignment_warm};
use corank::density::ReferenceDensity;
use corank::grid::{factorize, make_grid, FactorizePolicy};
use corank::rng::seeded_rng;
use std::time::Instant;

fn main() {
    // t3 data with t3 potential at n = 2000
    let t3 = ReferenceDensity::student_t(2, 3.0);
    let grid = make_grid(factorize(2000, 2, FactorizePolicy::Auto, 7).unwrap()).unwrap();
    let mut rng = seeded_rng(1, 0);
    let pts = t3.sample(&mut rng, 2000);
    let t0 = Instant::now();
    let a = solve_assignment_warm(&pts, &grid, |p| t3.radial_quantile(p).unwrap()).unwrap();
    println!("t3 n=2000 warm: {:?} (cost {:.2})", t0.elapsed(), a.cost);

    // mixture data at n = 5000, cold (no closed-form potential)
    let mix = ReferenceDensity::banana_mixture();
    let grid = make_grid(
        factorize(5000, 2, FactorizePolicy::Explicit { n_r: 40, n_s: 125 }, 7).unwrap(),
    )
    .unwrap();
    let mut rng = seeded_rng(2, 0);
    let pts = mix.sample(&mut rng, 5000);
    let t0 = Instant::now();
    let a = solve_assignment(&pts, &grid).unwrap();
    println!("mixture n=5000 cold: {:?} (cost {:.2})", t0.elapsed(), a.cost);
}
