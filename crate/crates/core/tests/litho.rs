use std::path::Path;
use std::time::Duration;

use faid_core::geometry::{contour_polygons, DensityGrid, GridSpec};
use faid_core::litho::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> GridSpec<f64> {
    GridSpec::new(n, n, 0.02, 0.0, 0.0).unwrap()
}

fn duv() -> GaussianThreshold<f64> {
    GaussianThreshold::new(GaussianThresholdParams::duv()).unwrap()
}

fn random_mask(n: usize, seed: u64) -> DensityGrid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    DensityGrid::from_values(grid(n), values).unwrap()
}

/// Smooth mask mostly near the threshold so the projection derivative is not tiny.
fn smooth_mask(n: usize) -> DensityGrid<f64> {
    let g = grid(n);
    let values = (0..n * n)
        .map(|k| {
            let (x, y) = (g.cell_center_x(k % n), g.cell_center_y(k / n));
            0.5 + 0.3 * (4.0 * x).sin() * (3.0 * y + 0.4).cos()
        })
        .collect();
    DensityGrid::from_values(g, values).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `J v` by Richardson-extrapolated central differences of predict (inputs may leave [0, 1]).
fn jvp(m: &dyn LithoModel<f64>, mask: &DensityGrid<f64>, v: &[f64], h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let values = mask.values.iter().zip(v).map(|(a, b)| a + s * b).collect();
        m.predict(&DensityGrid { grid: mask.grid, values }).unwrap().values
    };
    let d = |h: f64| -> Vec<f64> { at(h).iter().zip(at(-h)).map(|(p, q)| (p - q) / (2.0 * h)).collect() };
    let (a, b) = (d(h), d(h / 2.0));
    a.iter().zip(&b).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

#[test]
fn uniform_one_is_preserved() {
    let mask = DensityGrid::filled(grid(30), 1.0).unwrap();
    let out = duv().predict(&mask).unwrap();
    assert!(out.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn isolated_minimum_feature_is_erased() {
    let mut mask = DensityGrid::zeros(grid(60));
    mask.values[30 * 60 + 30] = 1.0;
    let m = duv();
    // Peak of the blurred delta is the squared center tap: about dx²/(2πσ²).
    let sigma_cells = 4.0f64;
    let taps: f64 = (-16..=16).map(|k: i32| (-(k * k) as f64 / (2.0 * sigma_cells * sigma_cells)).exp()).sum();
    let want = (1.0 / taps).powi(2);
    let rho = m.blurred(&mask).unwrap();
    let peak = rho.iter().fold(0.0f64, |a, &b| a.max(b));
    assert!((peak - want).abs() < 1e-12);
    assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * 16.0)).abs() < 1e-4);
    let out = m.predict(&mask).unwrap();
    assert!(out.values.iter().all(|&v| v < 0.01));
}

#[test]
fn large_square_keeps_interior_and_rounds_corners() {
    let n = 200;
    let g = grid(n);
    let (lo, hi) = (50usize, 150usize);
    let values = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            if (lo..hi).contains(&i) && (lo..hi).contains(&j) { 1.0 } else { 0.0 }
        })
        .collect();
    let mask = DensityGrid::from_values(g, values).unwrap();
    let out = duv().predict(&mask).unwrap();
    for j in lo + 20..hi - 20 {
        for i in lo + 20..hi - 20 {
            assert!((out.get(i, j) - 1.0).abs() < 1e-3);
        }
    }
    // Along the corner bisector the blurred value is Φ(u)², so the 0.5 level
    // sits at u = Φ⁻¹(√½) ≈ 0.5449 σ inside the drawn corner on each axis.
    let sigma = 0.08;
    let corner = g.x0 + lo as f64 * g.dx;
    let loops = contour_polygons(&out, 0.5);
    assert_eq!(loops.len(), 1);
    let vs = &loops.polygons[0].vertices;
    let mut inset = f64::NAN;
    for k in 0..vs.len() {
        let (a, b) = (vs[k], vs[(k + 1) % vs.len()]);
        let (da, db) = (a.x - a.y, b.x - b.y);
        if a.x < 2.0 && da * db <= 0.0 && da != db {
            let t = da / (da - db);
            inset = a.x + t * (b.x - a.x) - corner;
        }
    }
    assert!(inset > 0.3 * sigma && inset < 0.7 * sigma, "corner inset {inset}");
    assert!((inset - 0.5449 * sigma).abs() < 0.25 * g.dx, "corner inset {inset}");
    // Straight edges far from corners do not move.
    let mid = (lo + hi) / 2;
    let edge_val = 0.5 * (out.get(lo, mid) + out.get(lo - 1, mid));
    assert!((edge_val - 0.5).abs() < 1e-6);
}

#[test]
fn vjp_matches_finite_differences_on_cells() {
    let n = 40;
    let mask = smooth_mask(n);
    let m = duv();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cot: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let back = m.vjp(&mask, &cot).unwrap();
    for _ in 0..20 {
        let (i, j) = (rng.gen_range(8..n - 8), rng.gen_range(8..n - 8));
        let k = j * n + i;
        let mut e = vec![0.0; n * n];
        e[k] = 1.0;
        let fd = dot(&cot, &jvp(&m, &mask, &e, 1e-3));
        assert!((fd - back[k]).abs() < 1e-5 * back[k].abs().max(1e-3), "cell {k}: {fd} vs {}", back[k]);
    }
    assert!(m.vjp(&mask, &vec![0.0; n * n]).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn vjp_small_beta_limit_is_blur_adjoint() {
    let n = 30;
    let params = GaussianThresholdParams { beta: 1e-6, ..GaussianThresholdParams::duv() };
    let m = GaussianThreshold::new(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cot: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = random_mask(n, 13);
    let back = m.vjp(&random_mask(n, 14), &cot).unwrap();
    // Projection slope → 1, so ⟨vjp(cot), v⟩ → ⟨cot, blur(v)⟩.
    let lhs = dot(&back, &v.values);
    let rhs = dot(&cot, &m.blurred(&v).unwrap());
    assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
}

#[test]
fn sigma_beyond_half_extent_is_rejected() {
    let params = GaussianThresholdParams { sigma_nm: 200.0, ..GaussianThresholdParams::duv() };
    let m = GaussianThreshold::new(params).unwrap();
    let mask = DensityGrid::zeros(grid(16));
    assert!(matches!(m.predict(&mask), Err(LithoError::Config(_))));
}

#[test]
fn identity_model_contract() {
    let mask = random_mask(20, 3);
    let id = Identity;
    let out = LithoModel::<f64>::predict(&id, &mask).unwrap();
    assert_eq!(out.values, mask.values);
    let cot: Vec<f64> = mask.values.iter().map(|v| v - 0.3).collect();
    assert_eq!(id.vjp(&mask, &cot).unwrap(), cot);

    let chain = Chain { stages: vec![Box::new(Identity), Box::new(duv())] };
    assert_eq!(chain.predict(&mask).unwrap().values, duv().predict(&mask).unwrap().values);
    assert_eq!(chain.vjp(&mask, &cot).unwrap(), duv().vjp(&mask, &cot).unwrap());
    assert!(chain.differentiable());
}

#[test]
fn sigma_zero_is_pointwise_projection() {
    let params = GaussianThresholdParams { sigma_nm: 0.0, ..GaussianThresholdParams::duv() };
    let m = GaussianThreshold::new(params).unwrap();
    let mask = random_mask(12, 4);
    let out = m.predict(&mask).unwrap();
    for (o, v) in out.values.iter().zip(&mask.values) {
        assert_eq!(*o, m.project(*v));
    }
    let binary: Vec<f64> = (0..144).map(|k| (k % 3 == 0) as u8 as f64).collect();
    let out = m.predict(&DensityGrid::from_values(grid(12), binary.clone()).unwrap()).unwrap();
    for (o, b) in out.values.iter().zip(&binary) {
        assert!((o - b).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predict_stays_in_unit_interval(seed in any::<u64>(), sigma in 0.0f64..100.0) {
        let m = GaussianThreshold::new(GaussianThresholdParams { sigma_nm: sigma, ..GaussianThresholdParams::duv() }).unwrap();
        let out = m.predict(&random_mask(24, seed)).unwrap();
        prop_assert!(out.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn predict_is_monotone(seed in any::<u64>()) {
        let a = random_mask(24, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let b = DensityGrid::from_values(a.grid, a.values.iter().map(|v| v * rng.gen_range(0.0..1.0)).collect()).unwrap();
        let (pa, pb) = (duv().predict(&a).unwrap(), duv().predict(&b).unwrap());
        prop_assert!(pa.values.iter().zip(&pb.values).all(|(x, y)| x >= y));
    }

    #[test]
    fn predict_is_translation_equivariant(seed in any::<u64>(), shift in 1usize..6) {
        let n = 90;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut base = vec![0.0; n * n];
        for j in 35..50 {
            for i in 35..50 {
                base[j * n + i] = rng.gen_range(0.0..1.0);
            }
        }
        let mut moved = vec![0.0; n * n];
        for j in 0..n {
            for i in shift..n {
                moved[j * n + i] = base[j * n + i - shift];
            }
        }
        let m = duv();
        let pa = m.predict(&DensityGrid::from_values(grid(n), base).unwrap()).unwrap();
        let pb = m.predict(&DensityGrid::from_values(grid(n), moved).unwrap()).unwrap();
        for j in 20..70 {
            for i in 20..70 {
                prop_assert!((pb.values[j * n + i + shift] - pa.values[j * n + i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vjp_is_adjoint_of_linearization(seed in any::<u64>()) {
        let n = 20;
        let mask = smooth_mask(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cot: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = duv();
        let lhs = dot(&cot, &jvp(&m, &mask, &v, 1e-3));
        let rhs = dot(&m.vjp(&mask, &cot).unwrap(), &v);
        prop_assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{} vs {}", lhs, rhs);
    }
}

fn external(command: String, dir: &Path, timeout: f64) -> ExternalPredictor {
    ExternalPredictor::new(ExternalConfig {
        command,
        exchange_dir: dir.to_path_buf(),
        timeout: Duration::from_secs_f64(timeout),
    })
    .unwrap()
}

fn script() -> String {
    format!("{}/tests/fixtures/gauss_threshold.py", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn echo_predictor_behaves_as_identity() {
    let dir = tempfile::tempdir().unwrap();
    let ext = external("cp {input} {output}".into(), dir.path(), 10.0);
    let mask = random_mask(16, 5);
    let out = ext.predict(&mask).unwrap();
    assert_eq!(out.values, mask.values);
    assert!(!LithoModel::<f64>::differentiable(&ext));
    assert!(matches!(ext.vjp(&mask, &mask.values), Err(LithoError::NonDifferentiableModel(_))));
}

#[test]
fn external_script_matches_builtin_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let ext = external(format!("python3 {} 80 0.5 10 {{input}} {{output}}", script()), dir.path(), 60.0);
    let mask = smooth_mask(48);
    let a = ext.predict(&mask).unwrap();
    let b = duv().predict(&mask).unwrap();
    let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max per-cell difference {worst}");
}

#[test]
fn external_failures_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let mask = random_mask(12, 6);
    let failing = external("false {input} {output}".into(), dir.path(), 10.0);
    assert!(matches!(failing.predict(&mask), Err(LithoError::ExternalPredictorFailed { .. })));
    let slow = external("sleep 5".into(), dir.path(), 0.2);
    assert!(matches!(slow.predict(&mask), Err(LithoError::ExternalTimeout { .. })));
    let garbage = external(format!("python3 {} --garbage {{input}} {{output}}", script()), dir.path(), 60.0);
    assert!(matches!(garbage.predict(&mask), Err(LithoError::ExternalOutput(_))));
    let shape = external(format!("python3 {} --wrong-shape {{input}} {{output}}", script()), dir.path(), 60.0);
    assert!(matches!(shape.predict(&mask), Err(LithoError::ExternalShape { .. })));
    let missing = external("/nonexistent/predictor {input}".into(), dir.path(), 10.0);
    assert!(matches!(missing.predict(&mask), Err(LithoError::ExternalSpawn { .. })));
    let silent = external("true".into(), dir.path(), 10.0);
    assert!(matches!(silent.predict(&mask), Err(LithoError::ExternalOutput(_))));
}
