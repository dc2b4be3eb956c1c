use nalgebra::{DMatrix, DVector};
use sashpcfe::hpcfe::*;
use sashpcfe::probspace::{sobol_points, uniform_samples};

fn small_config() -> HpcfeConfig {
    HpcfeConfig {
        restarts: 4,
        ..HpcfeConfig::default()
    }
}

#[test]
fn sine_fit_dense_grid() {
    let n = 12;
    let z: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let f = |x: f64| (3.0 * x).sin();
    let y: Vec<f64> = z.iter().map(|&x| f(x)).collect();
    let m = fit(&z, 1, &y, &small_config()).unwrap();
    let worst = (0..=400)
        .map(|i| -1.0 + 2.0 * i as f64 / 400.0)
        .map(|x| (m.predict_mean(&[x]).unwrap() - f(x)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-2, "max error {worst}");
}

#[test]
fn interpolates_training_points() {
    let u = sobol_points(40, 2).unwrap();
    let z: Vec<f64> = u.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
    let y: Vec<f64> = z.chunks(2).map(|p| (2.0 * p[0]).cos() * p[1] + (p[0] - p[1]).exp()).collect();
    let m = fit(&z, 2, &y, &small_config()).unwrap();
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    for (p, &t) in z.chunks(2).zip(&y) {
        assert!((m.predict_mean(p).unwrap() - t).abs() <= 1e-5 * range);
        assert!(m.predict_variance(p).unwrap() <= 1e-8 * m.sigma2.max(1e-300) + 1e-300);
    }
    let probes = uniform_samples(200, 2, 3).unwrap();
    for p in probes.iter_rows() {
        let q: Vec<f64> = p.iter().map(|v| 3.0 * v - 1.5).collect();
        assert!(m.predict_variance(&q).unwrap() >= 0.0);
    }
}

#[test]
fn trend_only_data() {
    let u = sobol_points(30, 2).unwrap();
    let z: Vec<f64> = u.as_slice().to_vec();
    let cfg = HpcfeConfig {
        degree: 2,
        restarts: 2,
        ..HpcfeConfig::default()
    };
    // y is a member of the trend space once z is mapped onto the training box
    let m0 = fit(&z, 2, &vec![0.0; 30], &cfg).unwrap();
    let basis = extended_basis(2, cfg.max_order, cfg.degree).unwrap();
    let mut s = vec![0.0; z.len()];
    for (src, dst) in z.chunks(2).zip(s.chunks_mut(2)) {
        m0.scaling.scale_into(src, dst);
    }
    let psi = build_design_matrix(&s, &basis).unwrap();
    let c = DVector::from_fn(basis.len(), |j, _| 0.3 + 0.1 * j as f64);
    let y: Vec<f64> = (&psi * &c).iter().map(|v| v + 2.0).collect();
    let m = fit(&z, 2, &y, &cfg).unwrap();
    assert!(m.sigma2 <= 1e-16, "sigma2 {}", m.sigma2);
    let probes = uniform_samples(50, 2, 9).unwrap();
    let mut sp = [0.0; 2];
    for p in probes.iter_rows() {
        m.scaling.scale_into(p, &mut sp);
        let t = build_design_matrix(&sp, &basis).unwrap();
        let expect = 2.0 + (t * &c)[0];
        let got = m.predict_mean(p).unwrap();
        assert!((got - expect).abs() <= 1e-8 * expect.abs().max(1.0), "{got} vs {expect}");
    }

    // constant response
    assert!(m0.alpha.iter().all(|a| a.abs() < 1e-14));
    assert!(m0.sigma2 <= 1e-30);
    assert_eq!(m0.g0, 0.0);
}

#[test]
fn homotopy_rank_deficient_system() {
    let u = uniform_samples(10, 6, 42).unwrap();
    let base = DMatrix::from_row_slice(10, 6, u.as_slice()).map(|v| v - 0.5);
    let a = &base * base.transpose(); // rank 6 of 10
    let b = &a * DVector::from_fn(10, |i, _| (i as f64).sin());
    let sol = homotopy_solve(&a, &b, &DMatrix::identity(10, 10)).unwrap();
    assert!(sol.warning.is_none());
    assert!((&a * &sol.alpha - &b).norm() <= 1e-8 * b.norm());
    let alpha0 = a.clone().pseudo_inverse(1e-12).unwrap() * &b;
    assert!((&sol.alpha - &alpha0).norm() <= 1e-8 * alpha0.norm());

    // a different SPD weight still satisfies the constraints
    let w = DMatrix::from_fn(10, 10, |i, j| if i == j { 2.0 + i as f64 } else { 0.1 });
    let sol = homotopy_solve(&a, &b, &w).unwrap();
    assert!((&a * &sol.alpha - &b).norm() <= 1e-8 * b.norm());
}

/// Universal kriging variance written out with explicit inverses.
fn gls_oracle(z: &[f64], theta: f64, nugget: f64, sigma2: f64, basis_fn: impl Fn(f64) -> Vec<f64>, x: f64) -> f64 {
    let n = z.len();
    let r = DMatrix::from_fn(n, n, |i, j| (-theta * (z[i] - z[j]).powi(2)).exp() + if i == j { nugget } else { 0.0 });
    let q = basis_fn(z[0]).len();
    let f = DMatrix::from_fn(n, q, |i, j| basis_fn(z[i])[j]);
    let ri = r.try_inverse().unwrap();
    let rv = DVector::from_fn(n, |i, _| (-theta * (x - z[i]).powi(2)).exp());
    let phi = DVector::from_vec(basis_fn(x));
    let a = f.transpose() * &ri * &f;
    let u = f.transpose() * &ri * &rv - phi;
    let ai = a.try_inverse().unwrap();
    sigma2 * (1.0 - (rv.transpose() * &ri * &rv)[0] + (u.transpose() * ai * &u)[0])
}

#[test]
fn kriging_variance_oracle_three_points() {
    // a three-point model assembled directly from its serialized fields
    let json = r#"{
        "g0": 0.4, "basis": {"dim": 1, "indices": [[1]]}, "alpha": [0.2],
        "theta": [1.7], "sigma2": 0.8, "nugget": 1e-10,
        "z_train": [-0.7, 0.1, 0.8], "d": [-0.1, -0.6, 0.7],
        "scaling": {"lo": [-1.0], "hi": [1.0]}
    }"#;
    let m: HpcfeModel = serde_json::from_str(json).unwrap();
    // trend columns are centered on their training mean
    let z = [-0.7, 0.1, 0.8];
    let mean = 3f64.sqrt() * z.iter().sum::<f64>() / 3.0;
    let basis = |t: f64| vec![3f64.sqrt() * t - mean];
    for x in [-1.5, -0.3, 0.45, 0.9, 2.0] {
        let oracle = gls_oracle(&z, 1.7, 1e-10, 0.8, basis, x).max(0.0);
        let got = m.predict_variance(&[x]).unwrap();
        assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
    }
    // far field: trend uncertainty pushes the variance above sigma2
    assert!(m.predict_variance(&[40.0]).unwrap() >= 0.8);
}

#[test]
fn likelihood_not_below_any_start() {
    let u = sobol_points(60, 2).unwrap();
    let z: Vec<f64> = u.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
    let y: Vec<f64> = z.chunks(2).map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
    let cfg = HpcfeConfig::default();
    let m = fit(&z, 2, &y, &cfg).unwrap();
    let starts = sobol_points(cfg.restarts, 2).unwrap();
    let (lo, hi) = (cfg.theta_bounds.0.ln(), cfg.theta_bounds.1.ln());
    for s in starts.iter_rows() {
        let theta: Vec<f64> = s.iter().map(|u| (lo + u * (hi - lo)).exp()).collect();
        let at = m.log_likelihood_at(&theta);
        assert!(m.log_likelihood >= at - 1e-9, "{} < {at} at {theta:?}; best {:?}", m.log_likelihood, m.theta);
    }
}

#[test]
fn json_round_trip_and_determinism() {
    let u = sobol_points(50, 3).unwrap();
    let z: Vec<f64> = u.as_slice().to_vec();
    let y: Vec<f64> = z.chunks(3).map(|p| p[0] * p[1] - p[2].powi(2)).collect();
    let cfg = small_config();
    let a = fit(&z, 3, &y, &cfg).unwrap();
    let b = fit(&z, 3, &y, &cfg).unwrap();
    let ja = serde_json::to_string(&a).unwrap();
    assert_eq!(ja, serde_json::to_string(&b).unwrap());
    let back: HpcfeModel = serde_json::from_str(&ja).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), ja);
    let p = [0.3, 0.6, 0.1];
    assert_eq!(back.predict_mean(&p).unwrap(), a.predict_mean(&p).unwrap());
    let v: serde_json::Value = serde_json::from_str(&ja).unwrap();
    for key in ["g0", "basis", "alpha", "theta", "sigma2", "z_train", "d", "scaling"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn input_validation() {
    assert!(fit(&[0.0, 1.0, 2.0], 1, &[1.0, 2.0, 3.0], &small_config()).is_err());
    assert!(fit(&[0.0, 1.0, 2.0, 3.0], 1, &[1.0, f64::NAN, 3.0, 4.0], &small_config()).is_err());
    let bad = HpcfeConfig {
        nugget: 0.0,
        ..HpcfeConfig::default()
    };
    assert!(fit(&[0.0, 1.0, 2.0, 3.0], 1, &[1.0, 2.0, 3.0, 4.0], &bad).is_err());
}
