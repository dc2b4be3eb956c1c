use nalgebra::DMatrix;
use sashpcfe::polybasis::{eval_multibasis, BasisSet, MultiIndex};
use sashpcfe::probspace::{sobol_points, transform, uniform_samples, Marginal, ProbabilisticModel, SampleMatrix, Space};
use sashpcfe::spce::*;

fn legendre_design(n: usize, d: usize) -> SampleMatrix {
    let u = sobol_points(n, d).unwrap();
    let m = ProbabilisticModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), d).unwrap();
    transform(&u, Space::StdLegendre, &m).unwrap()
}

fn random_legendre(n: usize, d: usize, seed: u64) -> SampleMatrix {
    let u = uniform_samples(n, d, seed).unwrap();
    let data = u.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
    SampleMatrix::new(data, n, d, Space::StdLegendre).unwrap()
}

fn synth(xi: &SampleMatrix, terms: &[(MultiIndex, f64)]) -> Vec<f64> {
    let basis = BasisSet::from_indices(xi.cols(), terms.iter().map(|t| t.0.clone()).collect()).unwrap();
    let coef: Vec<f64> = basis
        .indices()
        .iter()
        .map(|m| terms.iter().find(|t| &t.0 == m).unwrap().1)
        .collect();
    xi.iter_rows()
        .map(|r| eval_multibasis(r, &basis).unwrap().iter().zip(&coef).map(|(p, c)| p * c).sum())
        .collect()
}

#[test]
fn exact_recovery_two_terms() {
    let xi = legendre_design(100, 2);
    let terms = [(MultiIndex::new(vec![2, 0]), 5.0), (MultiIndex::new(vec![0, 1]), 0.5)];
    let y = synth(&xi, &terms);
    let m = fit_lar(&xi, &y, &SpceConfig::default()).unwrap();
    assert_eq!(m.active_indices(), &[MultiIndex::new(vec![0, 1]), MultiIndex::new(vec![2, 0])]);
    assert!((m.coefficients[0] - 0.5).abs() <= 1e-8);
    assert!((m.coefficients[1] - 5.0).abs() <= 1e-8);
    assert!(m.intercept.abs() <= 1e-8);
    // noiseless training fit
    let pred = m.predict_batch(&xi).unwrap();
    let max_err = pred.iter().zip(&y).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
    assert!(max_err < 1e-9);
}

#[test]
fn exact_recovery_up_to_five_terms() {
    let cases: Vec<Vec<(MultiIndex, f64)>> = vec![
        vec![(MultiIndex::new(vec![1, 0, 0, 0]), 2.0)],
        vec![(MultiIndex::new(vec![0, 3, 0, 0]), -1.5), (MultiIndex::new(vec![1, 0, 0, 1]), 0.8)],
        vec![
            (MultiIndex::new(vec![2, 0, 0, 0]), 1.0),
            (MultiIndex::new(vec![0, 0, 1, 0]), -2.0),
            (MultiIndex::new(vec![0, 1, 1, 0]), 0.7),
        ],
        vec![
            (MultiIndex::new(vec![1, 0, 0, 0]), 3.0),
            (MultiIndex::new(vec![0, 2, 0, 0]), -1.0),
            (MultiIndex::new(vec![0, 0, 0, 3]), 0.5),
            (MultiIndex::new(vec![1, 1, 1, 0]), 1.2),
        ],
        vec![
            (MultiIndex::new(vec![1, 0, 0, 0]), 1.0),
            (MultiIndex::new(vec![0, 1, 0, 0]), -1.0),
            (MultiIndex::new(vec![0, 0, 2, 0]), 2.0),
            (MultiIndex::new(vec![0, 0, 0, 4]), -0.6),
            (MultiIndex::new(vec![2, 0, 0, 1]), 0.9),
        ],
    ];
    for terms in cases {
        let k = terms.len();
        let xi = random_legendre(100, 4, 7 + k as u64);
        let y = synth(&xi, &terms);
        let m = fit_lar(&xi, &y, &SpceConfig { p_max: 4, max_candidates: 20_000 }).unwrap();
        let mut expect: Vec<MultiIndex> = terms.iter().map(|t| t.0.clone()).collect();
        expect.sort();
        assert_eq!(m.active_indices(), expect.as_slice(), "k = {k}");
    }
}

#[test]
fn lar_equicorrelation_along_path() {
    let xi = random_legendre(120, 3, 5);
    let y: Vec<f64> = xi
        .iter_rows()
        .map(|r| (2.0 * r[0]).sin() + r[1] * r[1] * r[2] + 0.3 * (3.0 * r[2]).cos())
        .collect();
    let (_, path) = fit_lar_with_path(&xi, &y, &SpceConfig { p_max: 5, max_candidates: 1000 }).unwrap();
    assert!(path.steps.len() > 20);
    let c0 = path.steps[0].active_abs_corr[0];
    for (s, step) in path.steps.iter().enumerate() {
        let c = step.active_abs_corr.iter().cloned().fold(0.0, f64::max);
        for a in &step.active_abs_corr {
            assert!((a - c).abs() <= 1e-8 * c0, "step {s}: active corr {a} vs {c}");
        }
        assert!(step.max_inactive_abs_corr <= c + 1e-8 * c0, "step {s}");
    }
}

#[test]
fn hat_matrix_loo_matches_brute_force() {
    let xi = random_legendre(20, 2, 11);
    let basis = BasisSet::total_degree(2, 2);
    let y: Vec<f64> = xi.iter_rows().map(|r| (r[0] + 0.5 * r[1]).exp() + 0.1 * r[0] * r[1]).collect();
    let design = basis.design_matrix(xi.iter_rows()).unwrap();
    let loo = loo_error(&design, &y).unwrap();

    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let d = DMatrix::from_fn(n - 1, design.ncols(), |r, c| design[(keep[r], c)]);
        let t = nalgebra::DVector::from_iterator(n - 1, keep.iter().map(|&k| y[k]));
        let coef = d.clone().svd(true, true).solve(&t, 1e-14).unwrap();
        let pred: f64 = design.row(i).iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        sum += (y[i] - pred).powi(2);
    }
    let brute = sum / n as f64 / var;
    assert!((loo.raw - brute).abs() <= 1e-10 * brute.max(1e-30), "{} vs {brute}", loo.raw);
    assert!(loo.corrected > loo.raw);
}

#[test]
fn loo_limits() {
    // pure noise against the constant model is about 1
    let n = 400;
    let noise = uniform_samples(n, 1, 3).unwrap().into_vec();
    let ones = DMatrix::from_element(n, 1, 1.0);
    let loo = loo_error(&ones, &noise).unwrap();
    assert!((loo.corrected - 1.0).abs() < 0.02, "{}", loo.corrected);
    // noiseless linear data with a linear model
    let xi = random_legendre(30, 1, 4);
    let y: Vec<f64> = xi.iter_rows().map(|r| 1.0 - 2.0 * r[0]).collect();
    let d = DMatrix::from_fn(30, 2, |r, c| if c == 0 { 1.0 } else { xi.row(r)[0] });
    assert!(loo_error(&d, &y).unwrap().corrected < 1e-20);
    // interpolating design
    let d = DMatrix::from_fn(2, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
    assert!(loo_error(&d, &[1.0, 2.0]).unwrap().corrected.is_infinite());
}

#[test]
fn incremental_loo_agrees_with_direct_computation() {
    let xi = random_legendre(80, 3, 21);
    let y: Vec<f64> = xi.iter_rows().map(|r| (r[0] * r[1]).sin() + r[2].powi(3)).collect();
    let m = fit_lar(&xi, &y, &SpceConfig { p_max: 4, max_candidates: 1000 }).unwrap();
    assert!(!m.coefficients.is_empty());
    let mut design = m.basis.design_matrix(xi.iter_rows()).unwrap();
    design = design.insert_column(0, 1.0);
    let direct = loo_error(&design, &y).unwrap();
    assert!((direct.corrected - m.loo_error).abs() <= 1e-8 * m.loo_error, "{} vs {}", direct.corrected, m.loo_error);
}

#[test]
fn gradient_matches_finite_differences() {
    let xi = random_legendre(150, 4, 8);
    let y: Vec<f64> = xi.iter_rows().map(|r| (r[0] + r[1] * r[2]).cos() + r[3].powi(2)).collect();
    let m = fit_lar(&xi, &y, &SpceConfig { p_max: 4, max_candidates: 1000 }).unwrap();
    let probes = uniform_samples(100, 4, 77).unwrap();
    let h = 1e-5;
    for row in probes.iter_rows() {
        let x: Vec<f64> = row.iter().map(|v| 0.98 * (2.0 * v - 1.0)).collect();
        let g = m.gradient(&x).unwrap();
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (m.predict(&xp).unwrap() - m.predict(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * scale, "fd {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn fitting_is_deterministic() {
    let xi = random_legendre(60, 5, 1);
    let y: Vec<f64> = xi.iter_rows().map(|r| r.iter().map(|v| v.abs()).product::<f64>()).collect();
    let cfg = SpceConfig { p_max: 3, max_candidates: 1000 };
    let a = fit_lar(&xi, &y, &cfg).unwrap();
    let b = fit_lar(&xi, &y, &cfg).unwrap();
    assert_eq!(a.active_indices(), b.active_indices());
    assert_eq!(
        a.coefficients.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.coefficients.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn serializes_to_json() {
    let xi = legendre_design(40, 2);
    let y: Vec<f64> = xi.iter_rows().map(|r| r[0] * r[1] + r[0]).collect();
    let m = fit_lar(&xi, &y, &SpceConfig::default()).unwrap();
    let json = serde_json::to_string(&m).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["p_max", "basis", "coefficients", "loo_error", "intercept"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let back: SparsePceModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
}
