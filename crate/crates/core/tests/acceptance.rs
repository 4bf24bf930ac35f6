//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every criterion is reported even when an earlier one fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chainwaves::continuation::{continue_branch, onset_estimate, template_deviation, ContinuationOptions};
use chainwaves::cradle::{critical_points, distinct_orbits, quadratic_coefficient, CradleOptions, ReducedPotential};
use chainwaves::galerkin::{real_dim, Galerkin, LoopState, SpectralGrid};
use chainwaves::homogeneous::{
    map_jacobian_det, map_jacobian_det_fd, orbit, recursion_defect, scalar_period, PlanarMapState,
};
use chainwaves::lattice::{circulant_basis, second_difference_matrix, LatticeModel};
use chainwaves::spectrum::{dispersion, non_resonance_check, resonance_parameter};
use chainwaves::symmetry::{build_isotropy, weinstein_moser_dims, GroupElement, GroupLabel};
use chainwaves::timedomain::{verify_periodicity, IntegratorOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn circulant_spectrum() -> Outcome {
    let mut eig_err = 0.0f64;
    let mut vec_err = 0.0f64;
    for n in 3..=16 {
        let mut computed: Vec<f64> = SymmetricEigen::new(second_difference_matrix(n)).eigenvalues.iter().copied().collect();
        computed.sort_by(f64::total_cmp);
        let mut exact: Vec<f64> = (0..n).map(|k| 4.0 * (k as f64 * PI / n as f64).sin().powi(2)).collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in computed.iter().zip(&exact) {
            eig_err = eig_err.max((a - b).abs());
        }
        vec_err = vec_err.max(circulant_basis(n).unwrap().eigen_defect());
    }
    outcome(eig_err <= 1e-11 && vec_err <= 1e-12, format!("eigenvalue error {eig_err:.2e}, eigenvector defect {vec_err:.2e}"))
}

fn dispersion_values() -> Outcome {
    let table = dispersion(&LatticeModel::pendulum(6, 1.0).unwrap());
    let expected = [(1, 2f64.sqrt()), (2, 2.0), (3, 5f64.sqrt())];
    let err = expected.iter().map(|&(k, nu)| (table.entry(k).unwrap().nu - nu).abs()).fold(0.0, f64::max);
    let cradle = dispersion(&LatticeModel::cradle(7, 1.0).unwrap());
    let flat = cradle.all_equal && cradle.entries.iter().all(|e| e.nu == 1.0);
    outcome(err <= 1e-12 && flat, format!("pendulum n = 6 error {err:.2e}, cradle flat = {flat}"))
}

fn fixed_point_dimensions() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in 3..=12 {
        let (ds, dst) = weinstein_moser_dims(n);
        let s = build_isotropy(GroupLabel::CradleS, n, 0).unwrap().fixed_space(1, false).unwrap().harmonic_dim(1);
        let st = build_isotropy(GroupLabel::CradleSTilde, n, 0).unwrap().fixed_space(1, false).unwrap().harmonic_dim(1);
        if (s, st) != (ds, dst) {
            failures.push(format!("n = {n}: Fix(S) = {s}, Fix(S~) = {st}"));
        }
        let mut blocks: Vec<(GroupLabel, usize)> = (1..=n / 2).map(|k| (GroupLabel::T, k)).collect();
        blocks.push((GroupLabel::T, n));
        for k in 1..(n + 1) / 2 {
            blocks.push((GroupLabel::S, k));
            blocks.push((GroupLabel::STilde, k));
        }
        for (label, k) in blocks {
            let dim = build_isotropy(label, n, k).unwrap().block_dim(k);
            checked += 1;
            if dim != 1 {
                failures.push(format!("n = {n}: {}_{k} block dimension {dim}", label.name()));
            }
        }
    }
    outcome(failures.is_empty(), if failures.is_empty() { format!("10 ring sizes, {checked} blocks") } else { failures.join("; ") })
}

fn random_loop(rng: &mut ChaCha8Rng, n: usize, l0: usize, scale: f64) -> LoopState {
    let v: Vec<f64> = (0..real_dim(n, l0)).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    LoopState::from_real(n, l0, 1.0 + rng.gen_range(0.0..1.0), &v)
}

fn random_element(rng: &mut ChaCha8Rng, n: usize) -> GroupElement {
    GroupElement::new(n, rng.gen_bool(0.5), rng.gen_range(0..n as i64), rng.gen_range(0..2 * n as i64), rng.gen_bool(0.5))
}

fn equivariance_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    let (mut hom, mut eqv, mut real) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..80 {
        let n = rng.gen_range(3..10);
        let l0 = rng.gen_range(2..6);
        let (g, h) = (random_element(&mut rng, n), random_element(&mut rng, n));
        let x = random_loop(&mut rng, n, l0, 1.0);
        let v = x.to_real();
        for parity in [1i8, -1] {
            let lhs = g.compose(&h).act_real(parity, v.as_slice(), l0);
            let rhs = g.act_real(parity, h.act_real(parity, v.as_slice(), l0).as_slice(), l0);
            hom = hom.max((lhs - rhs).norm() / v.norm());
            cases += 1;
        }
    }
    let models = [
        LatticeModel::pendulum(5, 1.0).unwrap(),
        LatticeModel::cradle(6, 1.0).unwrap(),
        LatticeModel::fpu(7, 1.0).unwrap(),
        LatticeModel::pendulum(4, 0.8).unwrap(),
    ];
    for model in &models {
        let parity = model.reflection_parity().unwrap();
        let l0 = 6;
        let gal = Galerkin::new(model, l0).unwrap();
        for _ in 0..25 {
            let x = random_loop(&mut rng, model.n, l0, 0.3);
            let g = random_element(&mut rng, model.n);
            let v = x.to_real();
            let f = gal.residual_real(v.as_slice(), x.nu).unwrap();
            let gv = g.act_real(parity, v.as_slice(), l0);
            let fg = gal.residual_real(gv.as_slice(), x.nu).unwrap();
            let gf = g.act_real(parity, f.as_slice(), l0);
            eqv = eqv.max((fg - gf).norm() / f.norm().max(1e-300));
            cases += 1;
        }
    }
    for _ in 0..60 {
        let n = rng.gen_range(3..12);
        let l0 = rng.gen_range(1..9);
        let x = random_loop(&mut rng, n, l0, 1.0);
        let grid = SpectralGrid::new(n, l0);
        let v = x.to_real();
        let mut samples = vec![0.0; grid.samples * n];
        grid.synthesize(v.as_slice(), &mut samples);
        let mut back = vec![0.0; v.len()];
        grid.analyze(&samples, &mut back);
        let round = (DVector::from_vec(back) - &v).norm() / v.norm();
        // direct trigonometric summation agrees with the FFT synthesis
        let t = grid.times()[1];
        let direct = x.eval(t);
        let fft: Vec<f64> = (0..n).map(|j| samples[n + j]).collect();
        let pointwise = direct.iter().zip(&fft).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let imag0 = x.coeffs[0].iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        real = real.max(round).max(pointwise).max(imag0);
        cases += 1;
    }
    let ok = hom <= 1e-12 && eqv <= 1e-10 && real <= 1e-12 && cases >= 200;
    outcome(ok, format!("{cases} cases: homomorphism {hom:.1e}, residual equivariance {eqv:.1e}, reality {real:.1e}"))
}

fn branch_options() -> ContinuationOptions {
    ContinuationOptions::default()
}

fn branch_onset_and_order() -> Outcome {
    let model = LatticeModel::pendulum(5, 1.0).unwrap();
    let opts = branch_options();
    let hand = (1.0 + 4.0 * (PI / 5.0).sin().powi(2)).sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for family in GroupLabel::families() {
        let start = Instant::now();
        let onset = onset_estimate(&model, 1, family, 1e-4, &opts).unwrap();
        let branch = continue_branch(&model, 1, family, &opts).unwrap();
        let dev = template_deviation(&branch, &model, 1e-3, 1e-1).unwrap();
        let sym = branch.points.iter().map(|p| p.sym_residual).fold(0.0, f64::max);
        let elapsed = start.elapsed();
        let onset_ok = (onset.extrapolated - hand).abs() <= 1e-3;
        let slope_ok = (1.8..=2.2).contains(&dev.slope);
        let sym_ok = sym <= 1e-10;
        let time_ok = elapsed < Duration::from_secs(60);
        ok &= onset_ok && slope_ok && sym_ok && time_ok;
        parts.push(format!(
            "{} onset {:.6} ({}) slope {:.3} ({}) sym {:.1e} ({}) {:.1}s",
            family.name(),
            onset.extrapolated,
            if onset_ok { "ok" } else { "off" },
            dev.slope,
            if slope_ok { "ok" } else { "outside [1.8, 2.2]" },
            sym,
            if sym_ok { "ok" } else { "high" },
            elapsed.as_secs_f64()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn cross_validation() -> Outcome {
    let model = LatticeModel::pendulum(5, 1.0).unwrap();
    let opts = branch_options();
    let tol = IntegratorOptions::with_tol(1e-10);
    let (mut worst_return, mut worst_drift) = (0.0f64, 0.0f64);
    let mut count = 0;
    for family in GroupLabel::families() {
        let branch = continue_branch(&model, 1, family, &opts).unwrap();
        let states: Vec<&LoopState> = branch.states().collect();
        for i in 0..5 {
            let x = states[(i * (states.len() - 1)) / 4];
            let rep = verify_periodicity(&model, x, 32, 1e-6, &tol).unwrap();
            worst_return = worst_return.max(rep.return_distance);
            worst_drift = worst_drift.max(rep.energy_drift);
            count += 1;
        }
    }
    outcome(
        worst_return <= 1e-6 && worst_drift <= 1e-8,
        format!("{count} points: return distance {worst_return:.2e}, energy drift {worst_drift:.2e}"),
    )
}

fn resonance_handling() -> Outcome {
    let fpu = LatticeModel::fpu(6, 1.0).unwrap();
    let rep = non_resonance_check(&fpu, 1, 8).unwrap();
    let witness = rep.resonant_pairs.iter().find(|p| p.l == 2 && p.j == 3);
    let exact = witness.is_some_and(|p| (p.nu_j - p.l_nu_k).abs() <= 1e-12);
    let w = resonance_parameter(4, 1, 2, 2).unwrap();
    let ok = !rep.non_resonant && exact && (w + 4.0 / 3.0).abs() <= 1e-12;
    outcome(ok, format!("FPU n = 6 witness (l = 2, j = 3) found = {exact}; omega_2(2) = {w:.15}"))
}

fn cradle_critical_points() -> Outcome {
    let model = LatticeModel::cradle(5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut quad_err = 0.0f64;
    let mut quad_raw = 0.0f64;
    let mut grad_err = 0.0f64;
    for nu in [0.98, 1.02] {
        for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
            let rp = ReducedPotential::new(&model, label, nu, 12).unwrap();
            let d = rp.dim();
            let w = DVector::from_iterator(d, (0..d).map(|_| rng.gen_range(-1.0..1.0)));
            let q = quadratic_coefficient(&rp, &w, 1e-4).unwrap();
            quad_err = quad_err.max((q.extrapolated / q.predicted - 1.0).abs());
            quad_raw = quad_raw.max((q.raw / q.predicted - 1.0).abs());
            let u = w.normalize() * 1e-2;
            let val = rp.evaluate(&u, None).unwrap();
            let h = 1e-6;
            for i in 0..d {
                let mut e = DVector::zeros(d);
                e[i] = h;
                let fd = (rp.evaluate(&(&u + &e), None).unwrap().phi - rp.evaluate(&(&u - &e), None).unwrap().phi) / (2.0 * h);
                grad_err = grad_err.max((fd - val.gradient[i]).abs() / val.gradient.norm());
            }
        }
    }
    let opts = CradleOptions::default();
    let mut sets = Vec::new();
    for nu in [0.98, 1.02] {
        for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
            sets.push(critical_points(&model, label, nu, &opts).unwrap());
        }
    }
    let total = distinct_orbits(&sets, model.reflection_parity().unwrap(), opts.dedupe_tol);
    let worst_residual = sets.iter().flat_map(|s| &s.points).map(|p| p.polished_residual).fold(0.0, f64::max);
    let needed = (model.n as f64 / 2.0 - 1.0).ceil() as usize;
    let ok = quad_err <= 1e-2 && grad_err <= 1e-5 && total >= needed && worst_residual <= 1e-9;
    outcome(
        ok,
        format!(
            "quadratic coefficient error {quad_err:.1e} (raw ratio {quad_raw:.1e}), gradient error {grad_err:.1e}, {total} distinct orbits (need {needed}), worst polished residual {worst_residual:.1e}"
        ),
    )
}

fn homogeneous_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut det_err = 0.0f64;
    for _ in 0..100 {
        let a = rng.gen_range(-2.0..2.0);
        let mag: f64 = 10f64.powf(rng.gen_range(-2.9..0.5));
        let b = if rng.gen_bool(0.5) { mag } else { -mag };
        let s = PlanarMapState::new(a, b);
        det_err = det_err.max((map_jacobian_det(s).unwrap() - 1.0).abs());
        det_err = det_err.max((map_jacobian_det_fd(s).unwrap() - 1.0).abs());
    }
    let mut rec = 0.0f64;
    for _ in 0..20 {
        let s = PlanarMapState::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        rec = rec.max(recursion_defect(&orbit(s, 50)));
    }
    let ratio = scalar_period(32.0).unwrap() / scalar_period(1.0).unwrap();
    let scale_err = (ratio - 32f64.powf(-0.1)).abs();
    outcome(
        det_err <= 1e-9 && rec <= 1e-12 && scale_err <= 1e-6,
        format!("det error {det_err:.1e}, recursion defect {rec:.1e}, T(32E)/T(E) error {scale_err:.1e}"),
    )
}

fn collect_files(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(&path, base, out);
        } else {
            let key = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
            out.insert(key, std::fs::read(&path).unwrap());
        }
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let pendulum = root.join("pendulum.json");
    std::fs::write(
        &pendulum,
        r#"{"model": {"n": 5, "onsite": {"family": "pendulum", "omega": 1.0}, "coupling": {"family": "harmonic"}}}"#,
    )
    .unwrap();
    let cradle = root.join("cradle.json");
    std::fs::write(
        &cradle,
        r#"{"model": {"n": 5, "onsite": {"family": "pendulum", "omega": 1.0}, "coupling": {"family": "hertz"}}}"#,
    )
    .unwrap();
    let p = pendulum.to_str().unwrap();
    let c = cradle.to_str().unwrap();
    let snapshot = root.join("run_a/branch/branch_k1_T/point_0010.json");
    let snap = snapshot.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("dispersion", vec!["dispersion".into(), "--config".into(), p.into()]),
        ("resonances", vec!["resonances".into(), "--config".into(), p.into()]),
        ("fixdim", vec!["fixdim".into(), "--config".into(), p.into()]),
        ("branch", vec!["branch".into(), "--config".into(), p.into(), "--steps".into(), "40".into()]),
        ("validate", vec!["validate".into(), "--config".into(), p.into(), "--loop".into(), snap]),
        ("cradle", vec!["cradle".into(), "--config".into(), c.into(), "--seed".into(), "7".into()]),
        ("homog", vec!["homog".into(), "--iters".into(), "2000".into()]),
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (name, args) in &runs {
        let mut trees = Vec::new();
        for tag in ["run_a", "run_b"] {
            let dir = root.join(tag).join(name);
            let mut argv = vec!["chainwaves".to_string()];
            argv.extend(args.iter().cloned());
            argv.extend(["--out".to_string(), dir.to_str().unwrap().to_string()]);
            let code = chainwaves::cli::main_with_args(argv);
            if code != 0 {
                mismatched.push(format!("{name} exited with {code}"));
            }
            let mut tree = BTreeMap::new();
            collect_files(&dir, &dir, &mut tree);
            trees.push(tree);
        }
        files += trees[0].len();
        if trees[0] != trees[1] || trees[0].is_empty() {
            mismatched.push(format!("{name} outputs differ"));
        }
    }
    outcome(mismatched.is_empty(), if mismatched.is_empty() { format!("7 subcommands, {files} files identical") } else { mismatched.join("; ") })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("circulant spectrum", circulant_spectrum),
        ("dispersion", dispersion_values),
        ("fixed-point dimensions", fixed_point_dimensions),
        ("equivariance suite", equivariance_suite),
        ("branch onset and order", branch_onset_and_order),
        ("time-domain cross-validation", cross_validation),
        ("resonance handling", resonance_handling),
        ("cradle critical points", cradle_critical_points),
        ("homogeneous map", homogeneous_map),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {:>2} {:<30} {}  [{:.2}s] {}",
            i + 1,
            name,
            if result.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("all criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
