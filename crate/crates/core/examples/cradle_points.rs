//! Critical points of the reduced potential for a Newton's cradle of five
//! pendula, just below and just above the common linear frequency.

use chainwaves::cradle::{critical_points, distinct_orbits, CradleOptions};
use chainwaves::lattice::LatticeModel;
use chainwaves::symmetry::GroupLabel;

fn main() -> chainwaves::Result<()> {
    let model = LatticeModel::cradle(5, 1.0)?;
    let opts = CradleOptions::default();
    let mut sets = Vec::new();
    for nu in [0.98, 1.02] {
        for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
            let set = critical_points(&model, label, nu, &opts)?;
            println!(
                "{:<3} nu = {nu:.2} ({}) dim {} starts {} converged {} orbits {}",
                label.name(),
                set.side,
                set.fixed_dim,
                set.starts,
                set.converged_starts,
                set.count()
            );
            for p in &set.points {
                println!(
                    "    |x| = {:.4e} phi = {:+.4e} grad = {:.1e} residual = {:.1e} l0 = {} energy = {:.6e}",
                    p.state.norm(),
                    p.phi,
                    p.gradient_norm,
                    p.polished_residual,
                    p.polished_l0,
                    p.energy
                );
            }
            sets.push(set);
        }
    }
    println!("distinct orbits: {}", distinct_orbits(&sets, -1, opts.dedupe_tol));
    Ok(())
}
