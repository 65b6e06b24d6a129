use proptest::prelude::*;

use ulil::kernel::{block_kernel_eval, catalog, sample_stream, BlockKernelSpec, Distribution, Kernel, KernelSpec};
use ulil::numeric::mean_and_se;
use ulil::Error;

fn kernel(spec: &str, dist: &Distribution) -> Kernel {
    catalog(&spec.parse::<KernelSpec>().unwrap(), dist).unwrap()
}

fn catalog_cases() -> Vec<(&'static str, Distribution)> {
    vec![
        ("zero", Distribution::Gaussian01),
        ("constant:c=-0.7", Distribution::Gaussian01),
        ("product", Distribution::Gaussian01),
        ("sum", Distribution::Uniform01),
        ("min", Distribution::Uniform01),
        ("block:a=0.5,0.2,0.9;b=0.1,0.1,0.1", Distribution::Uniform01),
        ("lil_block:a=1;b=2", Distribution::Uniform01),
        ("finite_rank:lambda=2,-1", Distribution::Gaussian01),
        ("finite_rank:lambda=1,-0.5,0.25;basis=legendre", Distribution::Uniform01),
        ("product:scale=-3", Distribution::Rademacher),
    ]
}

#[test]
fn catalog_kernels_symmetric_on_grid() {
    for (spec, d) in catalog_cases() {
        let k = kernel(spec, &d);
        let grid = d.probe_grid(32);
        let mut pairs = 0;
        for &x in &grid {
            for &y in &grid {
                assert_eq!(k.eval(x, y).to_bits(), k.eval(y, x).to_bits(), "{spec} at ({x}, {y})");
                pairs += 1;
            }
        }
        assert!(pairs >= 1000 || d.support().is_some(), "{spec}: only {pairs} pairs");
    }
}

#[test]
fn separable_expansion_matches_eval() {
    for (spec, d) in catalog_cases() {
        let k = kernel(spec, &d);
        let Some(sep) = k.separable() else { continue };
        for &x in &d.probe_grid(32) {
            for &y in &d.probe_grid(31) {
                let (h, e) = (k.eval(x, y), sep.eval(x, y));
                assert!((h - e).abs() <= 1e-12 * h.abs().max(1.0), "{spec} ({x}, {y}): {h} vs {e}");
            }
        }
    }
}

#[test]
fn hermite_rank_two_closed_form() {
    // He1 = x and He2 / sqrt(2) = (x^2 - 1) / sqrt(2).
    let k = kernel("finite_rank:lambda=2,-1", &Distribution::Gaussian01);
    for &x in &[-2.5, -1.0, 0.0, 0.3, 1.7] {
        for &y in &[-1.2, 0.0, 0.8, 2.2] {
            let want = 2.0 * x * y - (x * x - 1.0) * (y * y - 1.0) / 2.0;
            assert!((k.eval(x, y) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn legendre_closed_form() {
    // sqrt(3) (2x - 1) and sqrt(5) (6x^2 - 6x + 1).
    let k = kernel("finite_rank:lambda=1,0.5;basis=legendre", &Distribution::Uniform01);
    let p1 = |x: f64| 3f64.sqrt() * (2.0 * x - 1.0);
    let p2 = |x: f64| 5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0);
    for &x in &[0.0, 0.1, 0.5, 0.77, 1.0] {
        for &y in &[0.05, 0.4, 0.9] {
            let want = p1(x) * p1(y) + 0.5 * p2(x) * p2(y);
            assert!((k.eval(x, y) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn block_layout_integrals_exact() {
    let spec = BlockKernelSpec::new(vec![0.5, 0.2, 0.9], vec![0.1, 0.25, 0.3]).unwrap();
    let mut left = 0.0;
    for n in 0..spec.len() {
        let (lo, hi) = spec.support(n);
        assert_eq!(lo, left);
        let mid = spec.midpoint(n);
        // Integral of I_n is (mid - lo) - (hi - mid); of I_n^2 it is hi - lo.
        assert!(((mid - lo) - (hi - mid)).abs() <= 1e-15);
        assert!(((hi - lo) - spec.b()[n]).abs() <= 1e-15);
        assert_eq!(spec.indicator(n, lo), 1.0);
        assert_eq!(spec.indicator(n, mid), -1.0);
        assert_eq!(spec.indicator(n, hi), 0.0);
        left = hi;
    }
    assert_eq!(spec.indicator(0, 0.99), 0.0);
}

#[test]
fn block_eval_examples() {
    let spec = BlockKernelSpec::new(vec![0.5, 0.2, 0.9], vec![0.1, 0.1, 0.1]).unwrap();
    assert_eq!(block_kernel_eval(&spec, 0.01, 0.04), 0.5 / 0.1);
    assert_eq!(block_kernel_eval(&spec, 0.01, 0.07), -0.5 / 0.1);
    assert_eq!(block_kernel_eval(&spec, 0.06, 0.09), 0.5 / 0.1);
    assert_eq!(block_kernel_eval(&spec, 0.01, 0.15), 0.0);
    assert_eq!(block_kernel_eval(&spec, 0.26, 0.29), 0.9 / 0.1);
    assert_eq!(block_kernel_eval(&spec, 0.25, 0.21), -0.9 / 0.1);
    assert_eq!(block_kernel_eval(&spec, 0.5, 0.5), 0.0);
}

#[test]
fn block_spec_errors() {
    assert!(BlockKernelSpec::new(vec![1.0, 1.0], vec![0.6, 0.6]).is_err());
    assert!(BlockKernelSpec::new(vec![1.0], vec![0.0]).is_err());
    assert!(BlockKernelSpec::new(vec![1.0, 2.0], vec![0.1]).is_err());
    assert!("block:a=1,1;b=0.7,0.7".parse::<KernelSpec>().and_then(|s| catalog(&s, &Distribution::Uniform01)).is_err());
    assert!(matches!("gumbel".parse::<KernelSpec>(), Err(Error::UnknownKernel(_))));
}

#[test]
fn block_monte_carlo_canonical_and_block_moments() {
    let d = Distribution::Uniform01;
    let k = kernel("block:a=0.5,0.2,0.9;b=0.1,0.1,0.1", &d);
    let spec = k.block_spec().unwrap().clone();
    let n = 1_000_000;
    let xs = sample_stream(&d, 42, 0, n);
    let ys = sample_stream(&d, 42, 1, n);
    let hs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| k.eval(*x, *y)).collect();
    let (mean, se) = mean_and_se(&hs);
    assert!(mean.abs() <= 4.0 * se, "E h = {mean} ± {se}");
    for b in 0..spec.len() {
        // E h^2 1{X, Y in block b} = (a_b / b_b)^2 b_b^2 = a_b^2.
        let sq: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .zip(&hs)
            .map(|((x, y), h)| {
                let inside = spec.locate(*x).is_some_and(|(m, _)| m == b) && spec.locate(*y).is_some_and(|(m, _)| m == b);
                if inside {
                    h * h
                } else {
                    0.0
                }
            })
            .collect();
        let (m2, se2) = mean_and_se(&sq);
        let want = spec.a()[b] * spec.a()[b];
        assert!((m2 - want).abs() <= 4.0 * se2, "block {b}: E h^2 = {m2} ± {se2}, want {want}");
    }
}

#[test]
fn lil_block_widths_follow_double_exponential() {
    let spec = BlockKernelSpec::iterated_log(1.0, 2.0).unwrap();
    for (n, w) in spec.b().iter().enumerate() {
        let want = (-((n + 1) as f64 / 2.0).exp()).exp();
        assert!((w - want).abs() <= 1e-15 * want.max(1e-300));
        assert_eq!(spec.a()[n], 1.0);
    }
    assert!(*spec.b().last().unwrap() >= 1e-300);
    assert!(spec.truncated_at().is_some());
}

#[test]
fn streams_are_deterministic_and_prefix_stable() {
    for d in [Distribution::Rademacher, Distribution::Uniform01, Distribution::Gaussian01] {
        let a = sample_stream(&d, 9, 3, 500);
        assert_eq!(a, sample_stream(&d, 9, 3, 500));
        assert_eq!(a[..200], sample_stream(&d, 9, 3, 200)[..]);
        assert_ne!(a, sample_stream(&d, 9, 4, 500));
        assert_ne!(a, sample_stream(&d, 10, 3, 500));
        for (i, v) in a.iter().enumerate().step_by(37) {
            assert_eq!(*v, d.sample_at(9, 3, i as u64));
        }
    }
    assert!(sample_stream(&Distribution::Uniform01, 1, 1, 0).is_empty());
    let r = sample_stream(&Distribution::Rademacher, 5, 0, 4);
    assert!(r.iter().all(|v| *v == 1.0 || *v == -1.0));
}

#[test]
fn stream_moments_match_laws() {
    let discrete = Distribution::discrete(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
    for d in [Distribution::Rademacher, Distribution::Uniform01, Distribution::Gaussian01, discrete] {
        let xs = sample_stream(&d, 77, 0, 200_000);
        let (m, se) = mean_and_se(&xs);
        assert!((m - d.mean()).abs() <= 4.0 * se, "{d}: mean {m} ± {se}");
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_and_se(&sq);
        assert!((m2 - d.second_moment()).abs() <= 4.0 * se2, "{d}: E X^2 {m2} ± {se2}");
    }
}

#[test]
fn independent_streams_uncorrelated() {
    let d = Distribution::Gaussian01;
    let a = sample_stream(&d, 3, 0, 200_000);
    let b = sample_stream(&d, 3, 1, 200_000);
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let (m, se) = mean_and_se(&prod);
    assert!(m.abs() <= 4.0 * se);
}

#[test]
fn discrete_law_validation() {
    assert!(Distribution::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).is_ok());
    assert!(Distribution::discrete(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    assert!(Distribution::discrete(vec![0.0, f64::NAN], vec![0.5, 0.5]).is_err());
    assert!(Distribution::discrete(vec![0.0], vec![0.5, 0.5]).is_err());
    assert!(Distribution::discrete(vec![], vec![]).is_err());
    let d: Distribution = "discrete:values=-1,1;weights=0.25,0.75".parse().unwrap();
    assert_eq!(d.mean(), 0.5);
    assert_eq!(d.to_string().parse::<Distribution>().unwrap(), d);
}

#[test]
fn product_operator_norm_is_second_moment() {
    assert_eq!(kernel("product", &Distribution::Rademacher).analytic().unwrap().operator_norm, Some(1.0));
    let block = kernel("block:a=0.5,0.2,0.9;b=0.1,0.1,0.1", &Distribution::Uniform01);
    assert_eq!(block.analytic().unwrap().operator_norm, Some(0.9));
}

proptest! {
    #[test]
    fn block_values_are_signed_amplitudes(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let spec = BlockKernelSpec::new(vec![0.5, -0.2, 0.9], vec![0.1, 0.2, 0.3]).unwrap();
        let h = block_kernel_eval(&spec, x, y);
        prop_assert_eq!(h, block_kernel_eval(&spec, y, x));
        let allowed = spec.a().iter().zip(spec.b()).any(|(a, b)| (h.abs() - (a / b).abs()).abs() < 1e-12);
        prop_assert!(h == 0.0 || allowed);
        for n in 0..spec.len() {
            let i = spec.indicator(n, x);
            prop_assert!(i == 0.0 || i == 1.0 || i == -1.0);
        }
    }

    #[test]
    fn scaled_catalog_kernel_scales_eval(s in -4.0f64..4.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let d = Distribution::Gaussian01;
        let base = kernel("finite_rank:lambda=2,-1", &d);
        let spec = format!("finite_rank:lambda=2,-1;scale={s}");
        let scaled = kernel(&spec, &d);
        prop_assert!((scaled.eval(x, y) - s * base.eval(x, y)).abs() <= 1e-12 * (1.0 + base.eval(x, y).abs()) * 4.0);
    }
}
