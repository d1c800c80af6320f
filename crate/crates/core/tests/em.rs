use faid_core::em::*;
use faid_core::geometry::{Direction, GridSpec, Port};
use faid_core::scalar::Cplx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 1.32;
const N_CLAD: f64 = 1.444;
const N_CORE: f64 = 2.97;

fn eps_from(grid: GridSpec<f64>, core: impl Fn(f64, f64) -> bool) -> PermittivityGrid<f64> {
    let mut eps = PermittivityGrid::uniform(grid, N_CLAD * N_CLAD);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if core(grid.cell_center_x(i), grid.cell_center_y(j)) {
                eps.eps[grid.index(i, j)] = N_CORE * N_CORE;
            }
        }
    }
    eps
}

fn port(name: &str, x: f64, half: f64, direction: Direction) -> Port<f64> {
    Port { name: name.into(), x, y_min: -half, y_max: half, direction }
}

/// Waveguide along x with a notch cut into one side: scatters and reflects, not mirror symmetric.
fn notched(x: f64, y: f64) -> bool {
    let in_guide = y.abs() < 0.255;
    let notch = (0.0..0.3).contains(&x) && y > 0.05;
    let blob = (x - 0.6).hypot(y + 0.35) < 0.155;
    (in_guide && !notch) || blob
}

/// Notched guide with `extra` cells added on every side.
fn notched_grid(extra: usize, dx: f64) -> GridSpec<f64> {
    let pad = extra as f64 * dx;
    GridSpec::covering(-1.4 - pad, 2.0 + pad, -1.2 - pad, 1.2 + pad, dx).unwrap()
}

fn transmission(eps: &PermittivityGrid<f64>, f: &Factorized<f64>, src: &Port<f64>, dst: &Port<f64>) -> f64 {
    let pin = PortMode::new(eps, src, LAMBDA, 0).unwrap();
    let pout = PortMode::new(eps, dst, LAMBDA, 0).unwrap();
    let (b, p) = pin.source(&eps.grid).unwrap();
    let x = solve_forward(f, &b).unwrap();
    mode_overlap_fom(&x, &pout, p).unwrap().0.transmission
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cplx<f64>> {
    (0..n).map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn rel_err(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn small_system() -> (PermittivityGrid<f64>, Factorized<f64>) {
    let grid = GridSpec::new(40, 30, 0.02, -0.4, -0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut eps = PermittivityGrid::uniform(grid, 2.0);
    eps.eps.iter_mut().for_each(|e| *e = rng.gen_range(1.0..N_CORE * N_CORE));
    let a = assemble(&eps, LAMBDA, Pml::new(8)).unwrap();
    let f = factorize(a).unwrap();
    (eps, f)
}

// Symmetric dielectric slab, TE: even modes κ tan(κa) = γ, odd modes −κ cot(κa) = γ.
fn slab_neffs(n1: f64, n2: f64, width: f64, lambda: f64) -> Vec<f64> {
    let k0 = 2.0 * std::f64::consts::PI / lambda;
    let a = width / 2.0;
    let f = |ne: f64, odd: bool| {
        let kappa = k0 * (n1 * n1 - ne * ne).sqrt();
        let gamma = k0 * (ne * ne - n2 * n2).sqrt();
        let (s, c) = (kappa * a).sin_cos();
        if odd { -kappa * c - gamma * s } else { kappa * s - gamma * c }
    };
    let mut roots = Vec::new();
    let steps = 20000;
    for odd in [false, true] {
        let grid: Vec<f64> = (1..steps).map(|k| n2 + (n1 - n2) * k as f64 / steps as f64).collect();
        for w in grid.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            if f(lo, odd).signum() == f(hi, odd).signum() {
                continue;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid, odd).signum() == f(lo, odd).signum() { lo = mid } else { hi = mid }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    roots
}

#[test]
fn slab_modes_match_transcendental_equation() {
    let (n1, n2, dx) = (2.85, 1.444, 0.005);
    let n = 800;
    let eps: Vec<f64> = (0..n)
        .map(|j| {
            let y = -2.0 + (j as f64 + 0.5) * dx;
            if y.abs() < 0.25 { n1 * n1 } else { n2 * n2 }
        })
        .collect();
    let modes = solve_modes(&eps, LAMBDA, dx).unwrap();
    let oracle = slab_neffs(n1, n2, 0.5, LAMBDA);
    assert_eq!(modes.len(), oracle.len());
    for (m, want) in modes.iter().zip(&oracle) {
        assert!(m.n_eff > n2 && m.n_eff < n1);
        assert!((m.n_eff - want).abs() < 2e-3, "n_eff {} vs {}", m.n_eff, want);
        let self_overlap = m.overlap(&m.profile);
        assert!((self_overlap - 1.0).abs() < 1e-10);
        assert!(m.profile[0].abs() < 1e-6 && m.profile[n - 1].abs() < 1e-6);
    }
    let p = &modes[0].profile;
    assert!((0..n).all(|j| (p[j] - p[n - 1 - j]).abs() < 1e-8), "fundamental is even");
    let q = &modes[1].profile;
    assert!((0..n).all(|j| (q[j] + q[n - 1 - j]).abs() < 1e-8), "first order is odd");
    assert!(modes.windows(2).all(|w| w[0].n_eff > w[1].n_eff));
}

#[test]
fn slab_discretization_error_shrinks_with_resolution() {
    let oracle = slab_neffs(2.85, 1.444, 0.5, LAMBDA)[0];
    let err = |dx: f64| {
        let n = (4.0 / dx).round() as usize;
        let eps: Vec<f64> = (0..n)
            .map(|j| if (-2.0 + (j as f64 + 0.5) * dx).abs() < 0.25 { 2.85 * 2.85 } else { 1.444 * 1.444 })
            .collect();
        (solve_modes(&eps, LAMBDA, dx).unwrap()[0].n_eff - oracle).abs()
    };
    assert!(err(0.005) < err(0.01) && err(0.01) < err(0.02));
}

#[test]
fn manufactured_solution_is_recovered() {
    let (_, f) = small_system();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = random_vec(f.matrix.len(), &mut rng);
    let b = f.matrix.apply(&x0);
    let x = solve_forward(&f, &b).unwrap();
    assert!(rel_err(&x.values, &x0) < 1e-8);
    assert_eq!(x.kind, FieldKind::Forward);
}

#[test]
fn forward_solve_is_linear() {
    let (_, f) = small_system();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = random_vec(f.matrix.len(), &mut rng);
    let c = Cplx::new(2.0, 3.0);
    let x = solve_forward(&f, &b).unwrap();
    let bc: Vec<_> = b.iter().map(|v| v * c).collect();
    let xc = solve_forward(&f, &bc).unwrap();
    let scaled: Vec<_> = x.values.iter().map(|v| v * c).collect();
    assert!(rel_err(&xc.values, &scaled) < 1e-12);
}

#[test]
fn zero_source_is_rejected_and_zero_adjoint_is_zero() {
    let (_, f) = small_system();
    let zero = vec![Cplx::new(0.0, 0.0); f.matrix.len()];
    assert!(matches!(solve_forward(&f, &zero), Err(EmError::InvalidInput(_))));
    let lam = solve_adjoint(&f, &zero).unwrap();
    assert!(lam.values.iter().all(|v| *v == Cplx::new(0.0, 0.0)));
    assert_eq!(lam.kind, FieldKind::Adjoint);
}

#[test]
fn adjoint_two_solve_identity() {
    let (_, f) = small_system();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_vec(f.matrix.len(), &mut rng);
    let s = random_vec(f.matrix.len(), &mut rng);
    let lam = solve_adjoint(&f, &g).unwrap();
    let u = solve_forward(&f, &s).unwrap();
    let lhs: Cplx<f64> = lam.values.iter().zip(&s).map(|(a, b)| a * b).sum();
    let rhs: Cplx<f64> = -g.iter().zip(&u.values).map(|(a, b)| a * b).sum::<Cplx<f64>>();
    assert!((lhs - rhs).norm() < 1e-8 * rhs.norm());
}

#[test]
fn reused_factorization_matches_fresh_one() {
    let (eps, f) = small_system();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_vec(f.matrix.len(), &mut rng);
    let _ = solve_forward(&f, &random_vec(f.matrix.len(), &mut rng)).unwrap();
    let reused = solve_adjoint(&f, &g).unwrap();
    let fresh = factorize(assemble(&eps, LAMBDA, Pml::new(8)).unwrap()).unwrap();
    let again = solve_adjoint(&fresh, &g).unwrap();
    assert!(rel_err(&reused.values, &again.values) < 1e-12);
}

#[test]
fn mode_overlap_identity_and_orthogonality() {
    let grid = GridSpec::covering(-1.0, 1.0, -1.0, 1.0, 0.02).unwrap();
    let eps = eps_from(grid, |_, y| y.abs() < 0.25);
    let out = port("out", 0.5, 0.7, Direction::PosX);
    let pm = PortMode::new(&eps, &out, LAMBDA, 0).unwrap();
    let kdx = pm.mode.kx * grid.dx;
    // Unit forward wave carrying the mode on every column.
    let mut x = FieldSolution { grid, values: vec![Cplx::new(0.0, 0.0); grid.len()], wavelength: LAMBDA, kind: FieldKind::Forward };
    let odd = {
        // Antisymmetric slice profile: orthogonal to the even fundamental.
        let n = pm.rows.len();
        (0..n).map(|k| if k < n / 2 { -1.0 } else if k >= n - n / 2 { 1.0 } else { 0.0 }).collect::<Vec<f64>>()
    };
    for i in 0..grid.nx {
        let phase = Cplx::from_polar(1.0, kdx * i as f64);
        for (k, j) in pm.rows.clone().enumerate() {
            x.values[grid.index(i, j)] = phase * pm.mode.profile[k];
        }
    }
    let (fom, _) = mode_overlap_fom(&x, &pm, pm.mode.power()).unwrap();
    assert!((fom.transmission - 1.0).abs() < 1e-12);
    assert!(fom.insertion_loss_db.abs() < 1e-10);

    // A backward wave is invisible to the probe.
    let back: Vec<_> = x.values.iter().map(|v| v.conj()).collect();
    let xb = FieldSolution { values: back, ..x.clone() };
    assert!(mode_overlap_fom(&xb, &pm, pm.mode.power()).unwrap().0.transmission < 1e-20);

    for i in 0..grid.nx {
        let phase = Cplx::from_polar(1.0, kdx * i as f64);
        for (k, j) in pm.rows.clone().enumerate() {
            x.values[grid.index(i, j)] = phase * odd[k];
        }
    }
    assert!(mode_overlap_fom(&x, &pm, pm.mode.power()).unwrap().0.transmission < 1e-20);
}

#[test]
fn fom_gradient_matches_finite_differences() {
    let grid = notched_grid(0, 0.02);
    let eps = eps_from(grid, notched);
    let f = factorize(assemble(&eps, LAMBDA, Pml::new(10)).unwrap()).unwrap();
    let pin = PortMode::new(&eps, &port("in", -0.81, 0.8, Direction::PosX), LAMBDA, 0).unwrap();
    let pout = PortMode::new(&eps, &port("out", 1.41, 0.8, Direction::PosX), LAMBDA, 0).unwrap();
    let (b, p) = pin.source(&grid).unwrap();
    let x = solve_forward(&f, &b).unwrap();
    let (fom, grad) = mode_overlap_fom(&x, &pout, p).unwrap();
    assert!(fom.transmission > 0.05 && fom.transmission < 0.99);

    let support: Vec<usize> = (0..grid.len()).filter(|&k| grad[k].norm() > 0.0).collect();
    assert_eq!(support.len(), 2 * pout.rows.len());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let peak = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let t_at = |k: usize, dv: Cplx<f64>| {
        let mut y = x.clone();
        y.values[k] += dv;
        mode_overlap_fom(&y, &pout, p).unwrap().0.transmission
    };
    let mut checked = 0;
    while checked < 20 {
        let k = support[rng.gen_range(0..support.len())];
        if grad[k].norm() < 1e-3 * peak {
            continue;
        }
        let h = 1e-6;
        let d_re = (t_at(k, Cplx::new(h, 0.0)) - t_at(k, Cplx::new(-h, 0.0))) / (2.0 * h);
        let d_im = (t_at(k, Cplx::new(0.0, h)) - t_at(k, Cplx::new(0.0, -h))) / (2.0 * h);
        // dT = Re(g dx): ∂T/∂Re = Re g, ∂T/∂Im = −Im g.
        let want = Cplx::new(d_re, -d_im);
        assert!((grad[k] - want).norm() < 1e-6 * grad[k].norm(), "cell {k}: {} vs {}", grad[k], want);
        checked += 1;
    }
}

#[test]
fn port_outside_grid_is_an_error() {
    let grid = GridSpec::covering(-1.0, 1.0, -1.0, 1.0, 0.02).unwrap();
    let eps = eps_from(grid, |_, y| y.abs() < 0.25);
    let bad = port("far", 5.0, 0.5, Direction::PosX);
    assert!(matches!(PortMode::new(&eps, &bad, LAMBDA, 0), Err(EmError::PortOutsideGrid { .. })));
}

#[test]
fn sensitivity_matches_cellwise_eps_perturbation() {
    let grid = notched_grid(0, 0.02);
    let eps = eps_from(grid, notched);
    let src = port("in", -0.81, 0.8, Direction::PosX);
    let dst = port("out", 1.41, 0.8, Direction::PosX);
    let a = assemble(&eps, LAMBDA, Pml::new(10)).unwrap();
    let f = factorize(a.clone()).unwrap();
    let pin = PortMode::new(&eps, &src, LAMBDA, 0).unwrap();
    let pout = PortMode::new(&eps, &dst, LAMBDA, 0).unwrap();
    let (b, p) = pin.source(&grid).unwrap();
    let x = solve_forward(&f, &b).unwrap();
    let (_, df) = mode_overlap_fom(&x, &pout, p).unwrap();
    let lam = solve_adjoint(&f, &df).unwrap();
    let s = sensitivity_field(&a, &x, &lam).unwrap();

    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if a.in_pml(i, j) {
                assert_eq!(s.values[grid.index(i, j)], 0.0);
            }
        }
    }

    // Keep the injected mode fixed: only the scattering region is perturbed.
    let mut order: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let x = grid.cell_center_x(k % grid.nx);
            x > -0.5 && x < 1.2
        })
        .collect();
    order.sort_by(|&u, &v| s.values[v].abs().partial_cmp(&s.values[u].abs()).unwrap());
    let h = 1e-4;
    for &k in order.iter().take(10) {
        let t = |d: f64| {
            let mut e = eps.clone();
            e.eps[k] += d;
            let f = factorize(assemble(&e, LAMBDA, Pml::new(10)).unwrap()).unwrap();
            let x = solve_forward(&f, &b).unwrap();
            mode_overlap_fom(&x, &pout, p).unwrap().0.transmission
        };
        let fd = (t(h) - t(-h)) / (2.0 * h);
        assert!((fd - s.values[k]).abs() < 0.01 * fd.abs(), "cell {k}: adjoint {} fd {}", s.values[k], fd);
    }
}

#[test]
fn sensitivity_vanishes_with_adjoint_and_outside_support() {
    let grid = GridSpec::new(40, 40, 0.02, 0.0, 0.0).unwrap();
    let eps = PermittivityGrid::uniform(grid, 2.0);
    let a = assemble(&eps, LAMBDA, Pml::new(8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut fwd = FieldSolution { grid, values: random_vec(grid.len(), &mut rng), wavelength: LAMBDA, kind: FieldKind::Forward };
    // Forward field vanishes on the left half.
    for k in 0..grid.len() {
        if k % grid.nx < 20 {
            fwd.values[k] = Cplx::new(0.0, 0.0);
        }
    }
    let zero = FieldSolution { values: vec![Cplx::new(0.0, 0.0); grid.len()], kind: FieldKind::Adjoint, ..fwd.clone() };
    assert!(sensitivity_field(&a, &fwd, &zero).unwrap().values.iter().all(|&v| v == 0.0));
    let adj = FieldSolution { values: random_vec(grid.len(), &mut rng), kind: FieldKind::Adjoint, ..fwd.clone() };
    let s = sensitivity_field(&a, &fwd, &adj).unwrap();
    let max = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..grid.len() {
        if k % grid.nx < 20 {
            assert!(s.values[k].abs() <= 1e-12 * max);
        }
    }
    let other = FieldSolution { wavelength: 1.31, ..adj };
    assert!(matches!(sensitivity_field(&a, &fwd, &other), Err(EmError::GridMismatch)));
}

#[test]
fn reciprocity_on_asymmetric_scatterer() {
    let grid = notched_grid(0, 0.02);
    let eps = eps_from(grid, notched);
    let f = factorize(assemble(&eps, LAMBDA, Pml::new(10)).unwrap()).unwrap();
    let t12 = transmission(&eps, &f, &port("a", -0.81, 0.8, Direction::PosX), &port("b", 1.41, 0.8, Direction::PosX));
    let t21 = transmission(&eps, &f, &port("b", 1.41, 0.8, Direction::NegX), &port("a", -0.81, 0.8, Direction::NegX));
    assert!(t12 > 0.05 && t12 < 0.99);
    assert!((t12 - t21).abs() < 1e-6, "{t12} vs {t21}");
}

#[test]
fn doubling_pml_leaves_transmission_unchanged() {
    let src = port("in", -0.81, 0.8, Direction::PosX);
    let dst = port("out", 1.41, 0.8, Direction::PosX);
    let t = |cells: usize| {
        let grid = notched_grid(cells - 10, 0.02);
        let eps = eps_from(grid, notched);
        let f = factorize(assemble(&eps, LAMBDA, Pml::new(cells)).unwrap()).unwrap();
        transmission(&eps, &f, &src, &dst)
    };
    let (t10, t20) = (t(10), t(20));
    assert!((t10 - t20).abs() < 1e-4, "{t10} vs {t20}");
}

#[test]
fn lossless_scatterer_conserves_energy() {
    let grid = notched_grid(0, 0.02);
    let eps = eps_from(grid, notched);
    let f = factorize(assemble(&eps, LAMBDA, Pml::new(10)).unwrap()).unwrap();
    let src = port("in", -0.81, 0.8, Direction::PosX);
    let pin = PortMode::new(&eps, &src, LAMBDA, 0).unwrap();
    let (b, p) = pin.source(&grid).unwrap();
    let x = solve_forward(&f, &b).unwrap();
    let dst = port("out", 1.41, 0.8, Direction::PosX);
    let refl = port("back", -1.01, 0.8, Direction::NegX);
    let mut total = 0.0;
    for (pt, mut order) in [(dst, 0usize), (refl, 0)] {
        while let Ok(pm) = PortMode::new(&eps, &pt, LAMBDA, order) {
            total += mode_overlap_fom(&x, &pm, p).unwrap().0.transmission;
            order += 1;
        }
    }
    assert!(total <= 1.0 + 1e-3, "guided power {total}");
}

#[test]
fn straight_guide_transmission_converges_with_resolution() {
    let t = |dx: f64| {
        let grid = GridSpec::covering(-1.0, 1.0, -1.0, 1.0, dx).unwrap();
        let eps = eps_from(grid, |_, y| y.abs() < 0.25);
        let cells = (0.2 / dx).round() as usize;
        let f = factorize(assemble(&eps, LAMBDA, Pml::new(cells)).unwrap()).unwrap();
        transmission(&eps, &f, &port("in", -0.6, 0.6, Direction::PosX), &port("out", 0.6, 0.6, Direction::PosX))
    };
    let (coarse, fine) = (t(0.02), t(0.01));
    assert!(coarse > 0.99 && fine > 0.99);
    assert!((coarse - fine).abs() < 0.02 * fine);
}

#[test]
fn single_precision_solve_runs() {
    let grid = GridSpec::<f32>::covering(-1.0, 1.0, -1.0, 1.0, 0.02).unwrap();
    let mut eps = PermittivityGrid::uniform(grid, (N_CLAD * N_CLAD) as f32);
    for j in 0..grid.ny {
        if grid.cell_center_y(j).abs() < 0.25 {
            for i in 0..grid.nx {
                eps.eps[grid.index(i, j)] = (N_CORE * N_CORE) as f32;
            }
        }
    }
    let f = factorize(assemble(&eps, 1.32f32, Pml::new(10)).unwrap()).unwrap();
    let mk = |x: f32| Port { name: "p".into(), x, y_min: -0.6f32, y_max: 0.6, direction: Direction::PosX };
    let pin = PortMode::new(&eps, &mk(-0.6), 1.32, 0).unwrap();
    let pout = PortMode::new(&eps, &mk(0.6), 1.32, 0).unwrap();
    let (b, p) = pin.source(&grid).unwrap();
    let x = solve_forward(&f, &b).unwrap();
    let t = mode_overlap_fom(&x, &pout, p).unwrap().0.transmission;
    assert!((t - 1.0).abs() < 1e-3, "{t}");
}
