//! Isotropy subgroups of the first mode on small rings and the dimensions
//! of their fixed-point spaces.

use chainwaves::lattice::LatticeModel;
use chainwaves::symmetry::{build_isotropy, weinstein_moser_dims, GroupLabel};

fn main() -> chainwaves::Result<()> {
    for n in [4usize, 5, 6, 8] {
        println!("n = {n}");
        for k in 1..=n / 2 {
            for label in GroupLabel::families() {
                let Ok(group) = build_isotropy(label, n, k) else { continue };
                let fix = group.fixed_space(4, false)?;
                let per_harmonic: Vec<usize> = (0..=4).map(|l| fix.harmonic_dim(l)).collect();
                println!(
                    "  k = {k} {:<3} pattern {:<5} order {:>3} block dim {} harmonics {:?}",
                    label.name(),
                    group.pattern(),
                    group.order(),
                    group.block_dim(k),
                    per_harmonic,
                );
            }
        }
    }

    let cradle = LatticeModel::cradle(5, 1.0)?;
    for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
        let group = build_isotropy(label, 5, 0)?.for_model(&cradle)?;
        let fix = group.fixed_space(1, false)?;
        println!("cradle n = 5 {:<9} first-harmonic dim {}", label.name(), fix.harmonic_dim(1));
    }
    println!("predicted {:?}", weinstein_moser_dims(5));
    Ok(())
}
