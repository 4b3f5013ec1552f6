use energy_exchange::kernels::make_kernel;
use energy_exchange::numerics::QuadratureSpec;
use energy_exchange::simulator::ExchangeTable;
use energy_exchange::variational::{
    assemble, assemble_direct, assemble_exact, kappa_upper_curve, minimize, QuadraticProgram, TrialSpace,
};

const SAMPLES: usize = 400_000;

fn setup(name: &str) -> (ExchangeTable, QuadraticProgram, (f64, f64)) {
    let k = make_kernel(name).unwrap();
    let exact = assemble_exact(&k, &TrialSpace::polynomial(2, 3, true, k.d()).unwrap(), &QuadratureSpec::default()).unwrap();
    let table = ExchangeTable::build(&k, 512).unwrap();
    let ks = (exact.kappa_s_ref, exact.kappa_s_ref_error);
    (table, exact, ks)
}

#[test]
fn monte_carlo_matches_quadrature() {
    for name in ["gg3", "uniform"] {
        let (table, exact, ks) = setup(name);
        let space = TrialSpace::polynomial(2, 3, true, table_d(name)).unwrap();
        let mc = assemble(&table, &space, ks, SAMPLES, 5).unwrap();
        for i in 0..space.len() {
            let tol = 4.0 * mc.l_error[i] + 1e-9;
            assert!((mc.l[i] - exact.l[i]).abs() < tol, "{name} L[{i}]: {} vs {}", mc.l[i], exact.l[i]);
            for j in 0..space.len() {
                let tol = 4.0 * mc.s_error[i][j] + 1e-9;
                assert!((mc.s[i][j] - exact.s[i][j]).abs() < tol, "{name} S[{i}][{j}]: {} vs {}", mc.s[i][j], exact.s[i][j]);
            }
        }
        let ks_mc = mc.kappa_s_mc.unwrap();
        assert!((ks_mc - ks.0).abs() < 0.01 * ks.0, "{name}: {ks_mc}");
    }
}

fn table_d(name: &str) -> u32 {
    make_kernel(name).unwrap().d()
}

#[test]
fn direct_sampling_matches_quadrature() {
    // Coarse check of the shift expansion against a site-by-site evaluation.
    let (table, exact, _) = setup("gg3");
    let space = TrialSpace::polynomial(2, 3, true, 3).unwrap();
    let n = 400_000;
    let (s, l) = assemble_direct(&table, &space, n, 9).unwrap();
    for i in 0..space.len() {
        let scale = exact.s[i][i].sqrt();
        assert!((l[i] - exact.l[i]).abs() < 0.1 * scale, "L[{i}]: {} vs {}", l[i], exact.l[i]);
        assert!((s[i][i] - exact.s[i][i]).abs() < 0.1 * exact.s[i][i], "S[{i}][{i}]: {} vs {}", s[i][i], exact.s[i][i]);
    }
}

#[test]
fn independent_seeds_agree() {
    let (table, _, ks) = setup("uniform");
    let space = TrialSpace::polynomial(2, 3, true, table_d("uniform")).unwrap();
    let a = assemble(&table, &space, ks, SAMPLES, 1).unwrap();
    let b = assemble(&table, &space, ks, SAMPLES, 2).unwrap();
    for i in 0..space.len() {
        for j in 0..space.len() {
            let tol = 4.0 * (a.s_error[i][j].powi(2) + b.s_error[i][j].powi(2)).sqrt() + 1e-12;
            assert!((a.s[i][j] - b.s[i][j]).abs() < tol, "S[{i}][{j}]");
        }
    }
}

#[test]
fn replay_is_bitwise() {
    let (table, _, ks) = setup("gg3");
    let space = TrialSpace::polynomial(2, 3, false, 3).unwrap();
    let a = minimize(&assemble(&table, &space, ks, 50_000, 3).unwrap()).unwrap();
    let b = minimize(&assemble(&table, &space, ks, 50_000, 3).unwrap()).unwrap();
    assert_eq!(a.kappa_var.to_bits(), b.kappa_var.to_bits());
    assert_eq!(a.coefficients, b.coefficients);
}

#[test]
fn exact_bounds() {
    let spec = QuadratureSpec::default();
    // Frozen from the quadrature assembly at w = 2, degree 3.
    for (name, gap) in [("gg3", 1.990050e-4), ("uniform", 5.5521e-5), ("root-eta", 0.0)] {
        let k = make_kernel(name).unwrap();
        let qp = assemble_exact(&k, &TrialSpace::polynomial(2, 3, true, k.d()).unwrap(), &spec).unwrap();
        let b = minimize(&qp).unwrap();
        let got = qp.kappa_s_ref - b.kappa_var;
        assert!((got - gap).abs() < 1e-3 * gap + 1e-9, "{name}: {got}");
    }
}

#[test]
fn gradient_kernel_has_no_gap_and_nongradient_kernels_do() {
    for (name, strict) in [("root-eta", false), ("gg3", true), ("uniform", true)] {
        let (table, _, ks) = setup(name);
        let space = TrialSpace::polynomial(2, 3, true, table_d(name)).unwrap();
        let b = minimize(&assemble(&table, &space, ks, SAMPLES, 11).unwrap()).unwrap();
        let gap = ks.0 - b.kappa_var;
        assert!(gap > -3.0 * b.stderr, "{name}: bound above κ_s");
        if strict {
            assert!(gap > 3.0 * b.stderr, "{name}: gap {gap} ± {}", b.stderr);
        } else {
            assert!(gap.abs() < 3.0 * b.stderr, "{name}: gap {gap} ± {}", b.stderr);
        }
    }
}

#[test]
fn nested_curve_is_non_increasing() {
    let (table, _, ks) = setup("gg3");
    let spaces: Vec<TrialSpace> = (1..=3).map(|deg| TrialSpace::polynomial(2, deg, false, 3).unwrap()).collect();
    let curve = kappa_upper_curve(&table, &spaces, ks, SAMPLES, 4).unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(curve[0].size, 0);
    assert_eq!(curve[0].kappa_var, ks.0);
    for w in curve.windows(2) {
        assert!(w[1].kappa_var <= w[0].kappa_var + 1e-12, "{:?}", curve);
        assert!(!w[1].non_monotone);
    }
    assert!(kappa_upper_curve(&table, &[], ks, SAMPLES, 4).unwrap().is_empty());
}
