//! Follows a travelling wave on a pendulum ring and integrates a few of its
//! points in time to confirm they really are periodic orbits.

use chainwaves::continuation::{continue_branch, ContinuationOptions};
use chainwaves::lattice::LatticeModel;
use chainwaves::symmetry::GroupLabel;
use chainwaves::timedomain::{verify_periodicity, IntegratorOptions};

fn main() -> chainwaves::Result<()> {
    let model = LatticeModel::pendulum(5, 1.0)?;
    let branch = continue_branch(&model, 1, GroupLabel::T, &ContinuationOptions::default())?;
    let opts = IntegratorOptions::with_tol(1e-10);
    let states: Vec<_> = branch.states().collect();
    let step = (states.len() / 4).max(1);
    for x in states.iter().step_by(step) {
        let rep = verify_periodicity(&model, x, 64, 1e-6, &opts)?;
        println!(
            "nu = {:.6} |x| = {:.4} residual {:.1e} return {:.1e} deviation {:.1e} drift {:.1e} {}",
            rep.nu,
            x.norm(),
            rep.residual,
            rep.return_distance,
            rep.max_deviation,
            rep.energy_drift,
            if rep.passed { "ok" } else { "FAILED" },
        );
    }
    Ok(())
}
