//! The planar map behind separable waves of a purely Hertzian ring: area
//! preservation, a coarse orbit scan, and the scalar period law.

use chainwaves::homogeneous::{map_jacobian_det, map_jacobian_det_fd, orbit, orbit_scan, recursion_defect, scalar_orbit, scalar_period, PlanarMapState};
use chainwaves::timedomain::IntegratorOptions;

fn main() -> chainwaves::Result<()> {
    for s in [PlanarMapState::new(0.3, -0.2), PlanarMapState::new(-1.1, 0.7)] {
        println!("det at ({}, {}): analytic {:.12} finite difference {:.12}", s.a, s.b, map_jacobian_det(s)?, map_jacobian_det_fd(s)?);
    }
    let path = orbit(PlanarMapState::new(0.4, 0.1), 200);
    println!("recursion defect over 200 steps: {:.1e}", recursion_defect(&path));

    let radii = [0.01, 0.1, 1.0];
    for row in orbit_scan(&radii, 4, 2000)? {
        println!("seed ({:>7.4}, {:>7.4}) max radius {:>10.4e} escaped {}", row.seed_a, row.seed_b, row.max_radius, row.escaped);
    }

    for e in [0.5, 1.0, 16.0] {
        println!("T({e}) = {:.10}", scalar_period(e)?);
    }
    let orb = scalar_orbit(1.0, 64, &IntegratorOptions::default())?;
    println!("scalar orbit: return {:.1e} energy drift {:.1e}", orb.return_distance, orb.energy_drift);
    Ok(())
}
