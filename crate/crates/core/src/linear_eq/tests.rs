use super::*;
use crate::channel::{sample_channel, sample_noise};
use crate::linalg::{rel_diff, RMat};
use rand::Rng;

fn scalar(v: f64) -> CMat {
    CMat::from_element(1, 1, C64::new(v, 0.0))
}

fn random_problem(seed_val: u64, half_d: usize, half_m: usize, tx: usize, rx: usize, n: usize) -> (CMat, CMat, CMat, CMat) {
    let mut rng = seed::rng(seed_val);
    let x = complex_gaussian(half_d, n, 1.0, &mut rng);
    let y = complex_gaussian(half_m, n, 1.0, &mut rng);
    let h = complex_gaussian(rx, tx, 1.0, &mut rng);
    let f = complex_gaussian(tx, half_d, 1.0, &mut rng);
    (x, y, h, f)
}

#[test]
fn objective_simple_cases() {
    let (x, y, h, f) = random_problem(1, 3, 2, 2, 2, 5);
    let g = CMat::zeros(2, 2);
    let obj = objective(&g, &f, &x, &y, &h, 0.3, 5).unwrap();
    assert!((obj - y.norm_squared() / 5.0).abs() < 1e-12);

    let g = complex_gaussian(2, 2, 1.0, &mut seed::rng(2));
    let y_exact = &g * &h * &f * &x;
    assert!(objective(&g, &f, &x, &y_exact, &h, 0.0, 5).unwrap() < 1e-20);
    assert!(objective(&g, &f, &x, &y, &CMat::zeros(3, 3), 0.0, 5).is_err());
}

#[test]
fn objective_matches_monte_carlo_expectation() {
    let n = 4;
    let (x, y, h, f) = random_problem(3, 2, 2, 3, 3, n);
    let g = complex_gaussian(2, 3, 0.5, &mut seed::rng(4));
    let sigma2 = 0.7;
    let exact = objective(&g, &f, &x, &y, &h, sigma2, n).unwrap();
    let draws = 100_000;
    let mut rng = seed::rng(5);
    let mut acc = 0.0;
    for t in 0..draws {
        let i = t % n;
        let v = crate::channel::noise_from(&mut rng, 3, sigma2);
        let pred = &g * (&h * &f * x.column(i) + v);
        acc += (y.column(i) - pred).norm_squared();
    }
    let mc = acc / draws as f64;
    assert!((mc / exact - 1.0).abs() < 0.01, "mc {mc} vs exact {exact}");
}

#[test]
fn g_step_scalar_cases() {
    let one = scalar(1.0);
    let g = g_step(&one, &one, &scalar(2.0), &one, 0.0, 1).unwrap();
    assert!((g[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-10);
    let g = g_step(&one, &one, &scalar(2.0), &one, 1.0, 1).unwrap();
    assert!((g[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
}

fn fd_directional(gfun: &dyn Fn(&CMat) -> f64, at: &CMat, dir: &CMat, step: f64) -> f64 {
    (gfun(&(at + dir * C64::new(step, 0.0))) - gfun(&(at - dir * C64::new(step, 0.0)))) / (2.0 * step)
}

#[test]
fn g_step_zeroes_the_gradient() {
    // G is 4x6: m/2 = 4, KN_R = 6
    let n = 10;
    let (x, y, h, f) = random_problem(7, 3, 4, 5, 6, n);
    let sigma2 = 0.05;
    let g = g_step(&f, &x, &y, &h, sigma2, n).unwrap();
    assert_eq!(g.shape(), (4, 6));
    let obj = |gg: &CMat| objective(gg, &f, &x, &y, &h, sigma2, n).unwrap();
    let mut grad_sq = 0.0;
    for i in 0..4 {
        for j in 0..6 {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut e = CMat::zeros(4, 6);
                e[(i, j)] = unit;
                grad_sq += fd_directional(&obj, &g, &e, 1e-4).powi(2);
            }
        }
    }
    assert!(grad_sq.sqrt() <= 1e-6, "gradient norm {}", grad_sq.sqrt());
}

#[test]
fn g_step_scales_linearly_with_targets() {
    let n = 2;
    let (x, y, h, f) = random_problem(8, 2, 2, 2, 2, n);
    let g1 = g_step(&f, &x, &y, &h, 0.0, n).unwrap();
    let g3 = g_step(&f, &x, &(&y * C64::new(3.0, 0.0)), &h, 0.0, n).unwrap();
    assert!(rel_diff(&(g1 * C64::new(3.0, 0.0)), &g3) < 1e-8);
    // closed form on the square noiseless instance: G = Y (HFX)^-1
    let exact = &y * (&h * &f * &x).try_inverse().unwrap();
    assert!(rel_diff(&g_step(&f, &x, &y, &h, 0.0, n).unwrap(), &exact) < 1e-8);
}

#[test]
fn g_step_rejects_bad_inputs() {
    let (x, y, h, f) = random_problem(9, 2, 2, 2, 2, 3);
    assert!(g_step(&f, &x, &y, &h, -1.0, 3).is_err());
    let mut bad = x.clone();
    bad[(0, 0)] = C64::new(f64::NAN, 0.0);
    assert!(matches!(g_step(&f, &bad, &y, &h, 0.0, 3), Err(Error::Singular { .. })));
}

#[test]
fn f_step_scalar_cases() {
    let one = scalar(1.0);
    let zero = scalar(0.0);
    for solver in [FSolver::Kron, FSolver::Sylvester] {
        let f = f_step(&one, &one, &scalar(2.0), &one, &zero, &zero, 1.0, 1, solver).unwrap();
        assert!((f[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
    }
    // G = 0 collapses the equation to nρF = nρ(Z - U)
    let (x, y, h, _) = random_problem(10, 3, 2, 2, 2, 4);
    let mut rng = seed::rng(11);
    let z = complex_gaussian(2, 3, 1.0, &mut rng);
    let u = complex_gaussian(2, 3, 1.0, &mut rng);
    let f = f_step(&CMat::zeros(2, 2), &x, &y, &h, &z, &u, 5.0, 4, FSolver::Sylvester).unwrap();
    assert!(rel_diff(&f, &(&z - &u)) < 1e-12);
}

#[test]
fn f_step_solvers_agree_and_minimize() {
    let n = 9;
    let (x, y, h, _) = random_problem(12, 4, 3, 3, 4, n);
    let mut rng = seed::rng(13);
    let g = complex_gaussian(3, 4, 1.0, &mut rng);
    let z = complex_gaussian(3, 4, 1.0, &mut rng);
    let u = complex_gaussian(3, 4, 0.1, &mut rng);
    let rho = 2.0;
    let fk = f_step(&g, &x, &y, &h, &z, &u, rho, n, FSolver::Kron).unwrap();
    let fs = f_step(&g, &x, &y, &h, &z, &u, rho, n, FSolver::Sylvester).unwrap();
    assert!(rel_diff(&fk, &fs) < 1e-9);

    let sub = |f: &CMat| (&y - &g * &h * f * &x).norm_squared() / n as f64 + rho * (f - &z + &u).norm_squared();
    let best = sub(&fs);
    for _ in 0..10 {
        let mut d = complex_gaussian(3, 4, 1.0, &mut rng);
        d /= C64::new(d.norm() / 1e-2, 0.0);
        assert!(sub(&(&fs + d)) > best);
    }
}

#[test]
fn z_step_cases() {
    let mut rng = seed::rng(14);
    let inside = complex_gaussian(2, 3, 0.01, &mut rng);
    assert_eq!(z_step(&inside, 1.0), inside);

    // tr = 4 P_T → λ̂ = 1, Z = Ẑ/2
    let mut outside = complex_gaussian(2, 3, 1.0, &mut rng);
    outside *= C64::new((4.0 / power(&outside)).sqrt(), 0.0);
    assert!((projection_scale(&outside, 1.0) - 0.5).abs() < 1e-12);
    let z = z_step(&outside, 1.0);
    assert!(rel_diff(&z, &(&outside * C64::new(0.5, 0.0))) < 1e-12);
    assert!(power(&z) <= 1.0);
}

#[test]
fn z_step_is_the_closest_feasible_point() {
    let mut rng = seed::rng(15);
    let p_t = 2.0;
    let z_hat = complex_gaussian(3, 2, 3.0, &mut rng);
    assert!(power(&z_hat) > p_t);
    let z = z_step(&z_hat, p_t);
    assert!(power(&z) <= p_t);
    let best = (&z_hat - &z).norm();
    for _ in 0..10_000 {
        let mut cand = complex_gaussian(3, 2, 1.0, &mut rng);
        let radius = p_t.sqrt() * rng.random::<f64>().sqrt();
        cand *= C64::new(radius / cand.norm(), 0.0);
        assert!((&z_hat - cand).norm() >= best);
    }
}

#[test]
fn u_step_cases() {
    let mut rng = seed::rng(16);
    let u = complex_gaussian(2, 2, 1.0, &mut rng);
    let f = complex_gaussian(2, 2, 1.0, &mut rng);
    let z = complex_gaussian(2, 2, 1.0, &mut rng);
    assert_eq!(u_step(&u, &f, &f).unwrap(), u);
    assert_eq!(u_step(&CMat::zeros(2, 2), &f, &CMat::zeros(2, 2)).unwrap(), f);
    let three_term = CMat::from_fn(2, 2, |i, j| u[(i, j)] + f[(i, j)] - z[(i, j)]);
    assert!((u_step(&u, &f, &z).unwrap() - three_term).norm() < 1e-15);
    assert!(u_step(&u, &f, &CMat::zeros(3, 2)).is_err());
}

/// Reference instance: d=16, m=24, K=1, N_T=N_R=4, n=256, 20 dB.
pub(crate) fn reference_instance() -> (CMat, CMat, CMat, f64) {
    use crate::codec::{generate_synthetic, MapKind, SyntheticSpec};
    let ds = generate_synthetic(&SyntheticSpec { d: 16, m: 24, n: 256, classes: 4, cluster_spread: 0.3, map_kind: MapKind::RealLinear, seed: 21 }).unwrap();
    let x_raw = pair_rows(&ds.tx).unwrap();
    let w = crate::codec::fit_whitener(&x_raw, WhitenOptions::default()).unwrap();
    let x = w.apply_columns(&x_raw).unwrap();
    let y = pair_rows(&ds.rx).unwrap();
    let h = sample_channel(ChannelDims::new(1, 4, 4).unwrap(), 22).lift();
    (x, y, h, 0.01)
}

#[test]
fn admm_reference_instance() {
    let (x, y, h, sigma2) = reference_instance();
    let cfg = AdmmConfig::default();
    let (eq, state) = run_admm(&x, &y, &h, sigma2, &cfg, 1).unwrap();
    assert!(primal_residual(&state) <= 1e-3, "residual {}", primal_residual(&state));
    assert!(power(&eq.f) <= cfg.p_t * (1.0 + 1e-6));
    assert!(power(&state.z) <= cfg.p_t * (1.0 + 1e-9));
    assert_eq!(state.objective_history.len(), 20);
    assert!(state.objective_history.iter().all(|o| o.is_finite()));
    for &(before, after) in &state.g_step_history {
        assert!(after <= before * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn admm_zero_iterations_and_determinism() {
    let (x, y, h, sigma2) = reference_instance();
    let cfg = AdmmConfig { iters: 0, ..Default::default() };
    let (_, state) = run_admm(&x, &y, &h, sigma2, &cfg, 3).unwrap();
    let f0 = complex_gaussian(4, 8, 1.0, &mut seed::rng_at(3, &[stream::INIT]));
    assert_eq!(state.f, f0);
    assert_eq!(state.z, CMat::zeros(4, 8));
    assert_eq!(state.u, CMat::zeros(4, 8));
    assert!(state.objective_history.is_empty());

    let cfg = AdmmConfig { iters: 5, ..Default::default() };
    let a = run_admm(&x, &y, &h, sigma2, &cfg, 9).unwrap();
    let b = run_admm(&x, &y, &h, sigma2, &cfg, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn admm_represents_a_complex_linear_target() {
    // d = m = 16, KN_T = KN_R = 8, full-rank H, noiseless.
    let mut rng = seed::rng(30);
    let n = 64;
    let x_raw = complex_gaussian(8, n, 1.0, &mut rng);
    let w = crate::codec::fit_whitener(&x_raw, WhitenOptions { center: false, ..Default::default() }).unwrap();
    let x = w.apply_columns(&x_raw).unwrap();
    let q = complex_gaussian(8, 8, 1.0, &mut rng);
    let y = &q * &x;
    let h = complex_gaussian(8, 8, 1.0, &mut rng);
    let (eq, _) = run_admm(&x, &y, &h, SIGMA2_FLOOR, &AdmmConfig::default(), 4).unwrap();
    let mse = (&y - &eq.g * &h * &eq.f * &x).norm_squared() / n as f64;
    let scale = y.norm_squared() / n as f64;
    assert!(mse <= 1e-6 * scale, "mse {mse} vs {scale}");
}

#[test]
fn apply_linear_cases() {
    // F = G = I, H = I, v = 0, identity whitener: ŝ_R = s_T
    let eq = LinearEqualizer { f: CMat::identity(3, 3), g: CMat::identity(3, 3), whitener: Whitener::identity(3), p_t: 1.0 };
    let s = vec![0.5, -1.0, 2.0, 3.0, 0.0, -0.25];
    let out = apply_linear(&eq, &s, &CMat::identity(3, 3), &CVec::zeros(3)).unwrap();
    assert_eq!(out, s);

    // zero input leaves unpair(G v)
    let mut rng = seed::rng(31);
    let g = complex_gaussian(2, 3, 1.0, &mut rng);
    let eq = LinearEqualizer { f: complex_gaussian(3, 3, 1.0, &mut rng), g: g.clone(), whitener: Whitener::identity(3), p_t: 1.0 };
    let v = sample_noise(3, 1.0, 2).unwrap();
    let out = apply_linear(&eq, &[0.0; 6], &CMat::identity(3, 3), &v).unwrap();
    assert_eq!(out, unpair_to_real(&(&g * &v)));

    assert!(apply_linear(&eq, &[0.0; 4], &CMat::identity(3, 3), &v).is_err());
    assert!(apply_linear(&eq, &[0.0; 6], &CMat::identity(2, 3), &v).is_err());
}

#[test]
fn apply_linear_matches_composed_ops() {
    let mut rng = seed::rng(32);
    let whitener = Whitener { mean: complex_gaussian(4, 1, 1.0, &mut rng).column(0).into_owned(), transform: complex_gaussian(4, 4, 1.0, &mut rng), eps: 1e-8 };
    let eq = LinearEqualizer { f: complex_gaussian(2, 4, 1.0, &mut rng), g: complex_gaussian(5, 3, 1.0, &mut rng), whitener, p_t: 1.0 };
    let h = complex_gaussian(3, 2, 1.0, &mut rng);
    let v = sample_noise(3, 0.1, 3).unwrap();
    let s: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
    let out = apply_linear(&eq, &s, &h, &v).unwrap();

    let x = pair_to_complex(&s).unwrap();
    let xw = eq.whitener.apply(&x).unwrap();
    let rx = crate::channel::transmit(&h, &(&eq.f * xw), &v).unwrap();
    let expected = unpair_to_real(&(&eq.g * rx));
    for (a, b) in out.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }

    // batch path agrees with the per-vector path
    let rows = RMat::from_row_slice(1, 8, &s);
    let noise = CMat::from_column_slice(3, 1, v.as_slice());
    let batch = eq.apply_rows(&rows, &h, &noise).unwrap();
    for (a, b) in batch.iter().zip(&out) {
        assert!((a - b).abs() < 1e-12);
    }
}
