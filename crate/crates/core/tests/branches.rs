use chainwaves::continuation::{continue_branch, template_deviation, ContinuationOptions};
use chainwaves::cradle::reduced_potential;
use chainwaves::lattice::LatticeModel;
use chainwaves::potentials::PotentialSpec;
use chainwaves::symmetry::{build_isotropy, symmetry_residual, GroupLabel};

#[test]
fn quadratic_nonlinearity_gives_second_order_deviation() {
    let model = LatticeModel::with_equilibrium(
        5,
        PotentialSpec::Polynomial { coefficients: vec![0.0, 0.0, 0.5, 0.3] },
        PotentialSpec::Harmonic,
        0.0,
        false,
    )
    .unwrap();
    let opts = ContinuationOptions::default();
    for family in GroupLabel::families() {
        let branch = continue_branch(&model, 1, family, &opts).unwrap();
        let dev = template_deviation(&branch, &model, 1e-3, 1e-1).unwrap();
        assert!((dev.slope - 2.0).abs() < 0.2, "{} slope {}", family.name(), dev.slope);
    }
}

#[test]
fn pendulum_energy_grows_along_branch() {
    let model = LatticeModel::pendulum(5, 1.0).unwrap();
    let opts = ContinuationOptions::default();
    let branch = continue_branch(&model, 1, GroupLabel::S, &opts).unwrap();
    let group = build_isotropy(GroupLabel::S, 5, 1).unwrap().for_model(&model).unwrap();
    let mut last = 0.0;
    for x in branch.states() {
        let (q, p) = x.phase_point(0.0);
        let e = model.energy(&q, &p).unwrap();
        assert!(e >= last - 1e-14, "energy dropped from {last} to {e}");
        last = e;
        assert!(symmetry_residual(x, &group) < 1e-8);
    }
    assert!(last > 0.0);
}

#[test]
fn cradle_reduced_potential_is_even() {
    let model = LatticeModel::cradle(4, 1.0).unwrap();
    for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
        let u = [0.01, -0.004, 0.002];
        let rp = chainwaves::cradle::ReducedPotential::new(&model, label, 1.01, 8).unwrap();
        let u = &u[..rp.dim()];
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let (a, ga) = reduced_potential(&model, label, u, 1.01, 8).unwrap();
        let (b, gb) = reduced_potential(&model, label, &neg, 1.01, 8).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12), "{} {a} {b}", label.name());
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x + y).abs() <= 1e-10 * x.abs().max(1e-10));
        }
    }
}
