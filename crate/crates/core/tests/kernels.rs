use energy_exchange::kernels::{make_kernel, Kernel, KernelSpec, BUILTIN_KERNELS};
use proptest::prelude::*;

fn interior() -> impl Strategy<Value = f64> {
    0.001f64..0.999
}

fn builtin() -> impl Strategy<Value = Kernel> {
    prop::sample::select(BUILTIN_KERNELS.to_vec()).prop_map(|n| make_kernel(n).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn rates_are_homogeneous(k in builtin(), ea in 0.01f64..50.0, eb in 0.01f64..50.0, beta in interior(), c in 0.01f64..100.0) {
        let eta = ea - (ea + eb) * beta;
        if let (Ok(w), Ok(wc)) = (k.eval_W(ea, eb, eta), k.eval_W(c * ea, c * eb, c * eta)) {
            prop_assert!(close(wc, w / c.sqrt(), 1e-9), "{}: {wc} vs {}", k.name(), w / c.sqrt());
        }
    }

    #[test]
    fn reduced_form_is_reflection_symmetric(k in builtin(), alpha in interior(), beta in interior()) {
        let a = k.reduced(alpha, beta);
        let b = k.reduced(1.0 - alpha, 1.0 - beta);
        prop_assume!(a.is_finite() && b.is_finite());
        prop_assert!(close(a, b, 1e-9), "{}: {a} vs {b}", k.name());
    }

    #[test]
    fn detailed_balance_holds(k in builtin(), alpha in interior(), beta in interior()) {
        if let (Ok(a), Ok(b)) = (k.eval_tilde(alpha, beta), k.eval_tilde(beta, alpha)) {
            prop_assert!(close(a, b, 1e-9), "{}: {a} vs {b}", k.name());
        }
    }

    #[test]
    fn rates_are_non_negative(k in builtin(), alpha in interior(), beta in interior()) {
        let w = k.reduced(alpha, beta);
        prop_assert!(w >= 0.0, "{}: {w}", k.name());
    }

    #[test]
    fn custom_kernel_matches_its_expression(alpha in interior(), beta in interior()) {
        let k = Kernel::custom("quad", 2, "1 + (alpha - beta)^2", vec![], vec![]).unwrap();
        let want = 1.0 + (alpha - beta).powi(2);
        prop_assert!(close(k.reduced(alpha, beta), want, 1e-12));
    }
}

#[test]
fn specs_round_trip_through_json() {
    let custom = Kernel::custom("quad", 3, "alpha*beta + (1-alpha)*(1-beta)", vec![], vec![]).unwrap();
    for k in BUILTIN_KERNELS.iter().map(|n| make_kernel(n).unwrap()).chain([custom]) {
        let text = serde_json::to_string(&k.spec()).unwrap();
        let spec: KernelSpec = serde_json::from_str(&text).unwrap();
        let back = Kernel::from_spec(&spec).unwrap();
        assert_eq!(back.name(), k.name());
        assert_eq!(back.d(), k.d());
        for (a, b) in [(0.2, 0.7), (0.45, 0.3), (0.9, 0.15)] {
            assert_eq!(back.reduced(a, b).to_bits(), k.reduced(a, b).to_bits());
        }
    }
}

#[test]
fn unknown_names_list_the_builtins() {
    let msg = make_kernel("gg4").unwrap_err().to_string();
    for n in BUILTIN_KERNELS {
        assert!(msg.contains(n), "{msg}");
    }
}
