//! Linear frequencies of three standard chains, plus a check that the
//! Fourier modes diagonalise the ring Laplacian.

use chainwaves::lattice::{circulant_basis, LatticeModel};
use chainwaves::spectrum::{dispersion, k0_threshold, DispersionTable};

fn show(name: &str, table: &DispersionTable) {
    println!("{name} (n = {}, all equal: {})", table.n, table.all_equal);
    for e in &table.entries {
        println!("  k = {:>2}  nu^2 = {:>10.6}  nu = {:>9.6}  bifurcating = {}", e.k, e.nu_sq, e.nu, e.bifurcating);
    }
}

fn main() -> chainwaves::Result<()> {
    let basis = circulant_basis(8)?;
    println!("circulant eigen-defect for n = 8: {:.2e}\n", basis.eigen_defect());

    show("pendulum", &dispersion(&LatticeModel::pendulum(6, 1.0)?));
    show("FPU", &dispersion(&LatticeModel::fpu(6, 1.0)?));
    show("cradle", &dispersion(&LatticeModel::cradle(6, 1.0)?));

    // Pendula hanging upside down: only the short waves oscillate.
    let inverted = LatticeModel::with_equilibrium(
        40,
        chainwaves::potentials::PotentialSpec::Pendulum { omega: 0.5 },
        chainwaves::potentials::PotentialSpec::Harmonic,
        std::f64::consts::PI,
        false,
    )?;
    let th = k0_threshold(&inverted)?;
    println!("\ninverted ring n = 40: k0 = {:?}, continuum estimate {:.3}", th.k0, th.asymptotic);
    Ok(())
}
