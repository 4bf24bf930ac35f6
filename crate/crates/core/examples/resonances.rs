//! Bifurcation inventory and non-resonance checks for an FPU ring, where
//! the first harmonic of one mode can hit another mode exactly.

use chainwaves::continuation::bifurcation_inventory;
use chainwaves::lattice::LatticeModel;
use chainwaves::spectrum::non_resonance_check;

fn main() -> chainwaves::Result<()> {
    for n in [5usize, 6] {
        let model = LatticeModel::fpu(n, 1.0)?;
        println!("FPU n = {n}");
        for entry in bifurcation_inventory(&model)? {
            let fams: Vec<&str> = entry.families.iter().map(|f| f.name()).collect();
            println!("  k = {} nu = {:.6} families {:?} resonance {:?}", entry.k, entry.nu_k, fams, entry.resonance);
        }
        for k in 1..=n / 2 {
            let report = non_resonance_check(&model, k, 8)?;
            println!("  k = {k} non-resonant = {} pairs {:?}", report.non_resonant, report.resonant_pairs);
        }
    }
    Ok(())
}
