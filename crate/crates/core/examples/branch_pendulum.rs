//! Continues the three families bifurcating from the first mode of a ring of
//! five pendula and prints a short summary of each branch.

use chainwaves::continuation::{continue_branch, onset_estimate, template_deviation, ContinuationOptions};
use chainwaves::lattice::LatticeModel;
use chainwaves::symmetry::GroupLabel;

fn main() -> chainwaves::Result<()> {
    let model = LatticeModel::pendulum(5, 1.0)?;
    let opts = ContinuationOptions::default();
    for family in GroupLabel::families() {
        let onset = onset_estimate(&model, 1, family, 1e-4, &opts)?;
        let branch = continue_branch(&model, 1, family, &opts)?;
        let last = branch.points.last().unwrap();
        let dev = template_deviation(&branch, &model, 1e-3, 1e-1)?;
        println!(
            "{:>3} pattern {:<5} onset {:.8} points {:>3} end r = {:.3} nu = {:.5} l0 = {} ({:?}) slope {:.3}",
            family.name(),
            branch.pattern,
            onset.extrapolated,
            branch.points.len(),
            last.r,
            last.nu,
            last.l0,
            branch.termination,
            dev.slope,
        );
    }
    Ok(())
}
