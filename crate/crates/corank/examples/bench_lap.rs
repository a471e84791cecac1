use corank::grid::{factorize, make_grid, FactorizePolicy};
use corank::density::ReferenceDensity;
use corank::assignment::{solve_assignment, solve_assignment_warm};
use corank::rng::seeded_rng;
use std::time::Instant;

fn main() {
    let sizes: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let sizes = if sizes.is_empty() { vec![400, 1600, 2000, 3600] } else { sizes };
    let f = ReferenceDensity::gaussian(2);
    for &n in &sizes {
        let spec = factorize(n, 2, FactorizePolicy::Auto, 7).unwrap();
        let grid = make_grid(spec).unwrap();
        let mut rng = seeded_rng(42, 0);
        let pts = f.sample(&mut rng, n);

        let t0 = Instant::now();
        let a = solve_assignment(&pts, &grid).unwrap();
        let cold = t0.elapsed();

        let t0 = Instant::now();
        let b = solve_assignment_warm(&pts, &grid, |p| f.radial_quantile(p).unwrap()).unwrap();
        let warm = t0.elapsed();

        assert!((a.cost - b.cost).abs() <= 1e-9 * a.cost.max(1.0), "cost mismatch");
        for (x, y) in a.permutation.iter().zip(&b.permutation) {
            assert_eq!(grid.points[*x], grid.points[*y], "image mismatch");
        }
        println!("n={n:5}  cost={:.4}  cold={cold:?}  warm={warm:?}", a.cost);
    }
}
