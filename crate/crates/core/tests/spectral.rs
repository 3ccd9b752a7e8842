use bspc_core::forcing::NoiseStream;
use bspc_core::spectral::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn random_real(grid: &Grid, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; grid.real_len()];
    NoiseStream::new(seed, 99).fill_normals(&mut v);
    v
}

fn random_scalar(grid: &Grid, seed: u64) -> SpectralField {
    let mut f = dealias(&transform_forward(&random_real(grid, seed), grid).unwrap());
    f.comp_mut(0)[0] = Complex64::new(0.0, 0.0);
    f
}

fn random_vector(grid: &Grid, seed: u64) -> SpectralField {
    let comps = (0..grid.dim())
        .map(|j| random_scalar(grid, seed.wrapping_mul(31).wrapping_add(j as u64)).into_components().remove(0))
        .collect();
    SpectralField::from_components(grid, comps).unwrap()
}

fn sample_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    (0..grid.real_len()).map(|i| f(grid.point(i))).collect()
}

#[test]
fn round_trip_across_grids() {
    for (d, n) in [(2, 8), (2, 16), (2, 64), (2, 256), (3, 8), (3, 16), (3, 32)] {
        let grid = Grid::new(d, n).unwrap();
        let x = random_real(&grid, n as u64);
        let back = transform_backward(&transform_forward(&x, &grid).unwrap()).remove(0);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = x.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12 * scale, "d={d} n={n} err={err}");
    }
}

#[test]
fn parseval_matches_real_space_sum() {
    for d in [2, 3] {
        let grid = Grid::new(d, 16).unwrap();
        let x = random_real(&grid, 5);
        let f = transform_forward(&x, &grid).unwrap();
        let real: f64 = x.iter().map(|v| v * v).sum::<f64>() * grid.dx().powi(d as i32);
        assert!((real - f.norm_l2_squared()).abs() < 1e-11 * real);
    }
}

#[test]
fn sine_mode_coefficients() {
    let grid = Grid::new(2, 16).unwrap();
    let f = transform_forward(&sample_fn(&grid, |p| p[0].sin()), &grid).unwrap();
    let mut nonzero = 0;
    for s in 0..grid.spectral_len() {
        if f.comp(0)[s].norm() > 1e-14 {
            nonzero += 1;
        }
    }
    // (1,0) is stored; (-1,0) is its conjugate partner
    assert_eq!(nonzero, 1);
    assert!((f.coeff(0, [1, 0, 0]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    assert!((f.coeff(0, [-1, 0, 0]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
}

#[test]
fn zero_samples_zero_coefficients() {
    let grid = Grid::new(3, 8).unwrap();
    let f = transform_forward(&vec![0.0; grid.real_len()], &grid).unwrap();
    assert_eq!(f.max_abs(), 0.0);
}

#[test]
fn planar_basis_example() {
    let grid = Grid::new(2, 32).unwrap();
    let e = basis_mode(BasisMode::new([1, 0, 0], 0), &grid).unwrap();
    assert!((e.norm_l2() - 1.0).abs() < 1e-12);
    assert!(divergence(&e).max_abs() < 1e-15);
    assert!((c_d(2) - 2f64.sqrt() / (2.0 * PI)).abs() < 1e-15);
    // first component vanishes, second is ±c₂ sin(x₁)
    let r = transform_backward(&e);
    let c2 = c_d(2);
    for i in 0..grid.real_len() {
        let p = grid.point(i);
        assert!(r[0][i].abs() < 1e-14);
        assert!((r[1][i].abs() - (c2 * p[0].sin()).abs()).abs() < 1e-13);
    }
}

#[test]
fn negative_wavevector_uses_cosine_branch() {
    let grid = Grid::new(2, 16).unwrap();
    let k = [2, 1, 0];
    let pos = basis_mode(BasisMode::new(k, 0), &grid).unwrap();
    let neg = basis_mode(BasisMode::new([-2, -1, 0], 0), &grid).unwrap();
    let g = gamma(k, 0, 2);
    let gn = gamma([-2, -1, 0], 0, 2);
    for j in 0..2 {
        assert!((g[j] + gn[j]).abs() < 1e-15);
    }
    let rp = transform_backward(&pos);
    let rn = transform_backward(&neg);
    let c2 = c_d(2);
    for i in 0..grid.real_len() {
        let p = grid.point(i);
        let ph = 2.0 * p[0] + p[1];
        for j in 0..2 {
            assert!((rp[j][i] - c2 * g[j] * ph.sin()).abs() < 1e-13);
            assert!((rn[j][i] - c2 * gn[j] * ph.cos()).abs() < 1e-13);
        }
    }
    assert!(pos.inner(&neg).abs() < 1e-14);
}

#[test]
fn basis_is_orthonormal_in_3d() {
    let grid = Grid::new(3, 8).unwrap();
    let ks: [[i64; 3]; 4] = [[1, 0, 0], [0, 1, 0], [0, -1, 2], [1, 1, -1]];
    let mut modes = Vec::new();
    for k in ks {
        for sgn in [1, -1] {
            for pol in 0..2 {
                let kk = [k[0] * sgn, k[1] * sgn, k[2] * sgn];
                modes.push(basis_mode(BasisMode::new(kk, pol), &grid).unwrap());
            }
        }
    }
    for (a, ea) in modes.iter().enumerate() {
        assert!(divergence(ea).max_abs() < 1e-14);
        for (b, eb) in modes.iter().enumerate() {
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((ea.inner(eb) - want).abs() < 1e-12, "{a} {b}");
        }
    }
}

#[test]
fn zero_wavevector_rejected() {
    let grid = Grid::new(2, 8).unwrap();
    assert!(basis_mode(BasisMode::new([0, 0, 0], 0), &grid).is_err());
    assert!(basis_mode(BasisMode::new([1, 0, 0], 1), &grid).is_err());
}

#[test]
fn leray_examples() {
    let grid = Grid::new(2, 16).unwrap();
    let s = transform_forward(&sample_fn(&grid, |p| p[0].sin()), &grid).unwrap();
    assert!(project_leray(&gradient(&s)).max_abs() < 1e-16);
    let e = basis_mode(BasisMode::new([1, 2, 0], 0), &grid).unwrap();
    let pe = project_leray(&e);
    for c in 0..2 {
        for (a, b) in pe.comp(c).iter().zip(e.comp(c)) {
            assert!((a - b).norm() < 1e-16);
        }
    }
    let mut v = SpectralField::vector(&grid);
    v.add_mode(0, [2, 3, 0], Complex64::new(2.0, 0.0)).unwrap();
    v.add_mode(1, [2, 3, 0], Complex64::new(3.0, 0.0)).unwrap();
    assert!(project_leray(&v).max_abs() < 1e-15);
}

#[test]
fn sharp_projection_examples() {
    let grid = Grid::new(2, 16).unwrap();
    let mut f = SpectralField::scalar(&grid);
    f.add_mode(0, [2, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
    assert_eq!(sharp_projection(&f, 2.0, Band::AtMost), f);
    let mut h = SpectralField::scalar(&grid);
    h.add_mode(0, [2, 1, 0], Complex64::new(1.0, 0.5)).unwrap();
    assert_eq!(sharp_projection(&h, 2.0, Band::AtMost).max_abs(), 0.0);
    let r = random_scalar(&grid, 3);
    for n in [1.0, 2.0, 3.5, 8.0] {
        let lo = sharp_projection(&r, n, Band::AtMost);
        let mut hi = r.clone();
        hi.axpy(-1.0, &lo);
        let sum = lo.norm_l2_squared() + hi.norm_l2_squared();
        assert!((sum - r.norm_l2_squared()).abs() < 1e-12 * sum);
    }
}

#[test]
fn smooth_projection_examples() {
    let grid = Grid::new(2, 64).unwrap();
    let mut inside = SpectralField::scalar(&grid);
    inside.add_mode(0, [3, 4, 0], Complex64::new(1.0, 0.0)).unwrap();
    assert_eq!(smooth_projection(&inside, 5.0, SmoothKind::Low), inside);
    let mut outside = SpectralField::scalar(&grid);
    outside.add_mode(0, [6, 8, 0], Complex64::new(1.0, 0.0)).unwrap();
    assert_eq!(smooth_projection(&outside, 20.0 / 3.0, SmoothKind::Low).max_abs(), 0.0);
    for i in 0..=4000 {
        let xi = i as f64 * 1e-3;
        let p = psi(xi);
        if xi <= 1.0 || xi >= 3.0 {
            assert_eq!(p, 0.0, "{xi}");
        }
        assert!((0.0..=1.0).contains(&p));
    }
    // ζ_N plus dyadic bands telescopes to ζ_{2^J N}
    for i in 0..=600 {
        let xi = i as f64 * 0.1;
        let mut s = zeta(xi);
        for j in 0..4 {
            s += psi(xi / (1u32 << j) as f64);
        }
        assert!((s - zeta(xi / 16.0)).abs() < 1e-15);
    }
}

#[test]
fn zeta_is_c2_at_the_joins() {
    let h = 1e-4;
    for x in [1.0, 1.5] {
        let d2 = |c: f64| (zeta(c + h) - 2.0 * zeta(c) + zeta(c - h)) / (h * h);
        assert!((d2(x - 2.0 * h) - d2(x + 2.0 * h)).abs() < 0.1);
    }
}

#[test]
fn sobolev_of_sine_on_the_plane() {
    let grid = Grid::new(2, 16).unwrap();
    let f = transform_forward(&sample_fn(&grid, |p| p[0].sin()), &grid).unwrap();
    assert!((sobolev_norm(&f, 0.0) - 2f64.sqrt() * PI).abs() < 1e-13);
    assert!((sobolev_norm(&f, -1.0) - PI).abs() < 1e-13);
}

#[test]
fn derivative_and_plancherel() {
    let grid = Grid::new(2, 32).unwrap();
    let f = transform_forward(&sample_fn(&grid, |p| p[0].sin()), &grid).unwrap();
    let d = transform_backward(&derivative(&f, &[1, 0])).remove(0);
    for i in 0..grid.real_len() {
        assert!((d[i] - grid.point(i)[0].cos()).abs() < 1e-13);
    }
    let g =
        transform_forward(&sample_fn(&grid, |p| (2.0 * p[0] + p[1]).sin() + 0.3 * (p[1] - 3.0 * p[0]).cos()), &grid)
            .unwrap();
    let grad = transform_backward(&gradient(&g));
    let quad: f64 =
        (0..grid.real_len()).map(|i| grad[0][i].powi(2) + grad[1][i].powi(2)).sum::<f64>() * grid.dx().powi(2);
    let spec = g.weighted_energy(|s| grid.k_squared(s));
    assert!((quad - spec).abs() < 1e-11 * spec);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leray_is_idempotent_and_self_adjoint(seed in any::<u64>(), d in 2usize..=3) {
        let grid = Grid::new(d, 8).unwrap();
        let v = random_vector(&grid, seed);
        let w = random_vector(&grid, seed ^ 0xabc);
        let pv = project_leray(&v);
        let ppv = project_leray(&pv);
        let mut diff = ppv.clone();
        diff.axpy(-1.0, &pv);
        prop_assert!(diff.max_abs() < 1e-14);
        prop_assert!(divergence(&pv).max_abs() < 1e-12);
        let a = pv.inner(&w);
        let b = v.inner(&project_leray(&w));
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn dealias_is_idempotent(seed in any::<u64>()) {
        let grid = Grid::new(2, 16).unwrap();
        let f = transform_forward(&random_real(&grid, seed), &grid).unwrap();
        let once = dealias(&f);
        prop_assert_eq!(dealias(&once), once.clone());
        for s in 0..grid.spectral_len() {
            if !grid.is_dealiased(s) {
                prop_assert_eq!(once.comp(0)[s], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn shells_partition_the_ball(seed in any::<u64>(), j in 1u32..5) {
        let grid = Grid::new(2, 32).unwrap();
        let f = random_scalar(&grid, seed);
        let n = (1u32 << j) as f64;
        let mut acc = sharp_projection(&f, 1.0, Band::AtMost);
        let mut m = 2.0;
        while m <= n {
            acc.axpy(1.0, &sharp_projection(&f, m, Band::Shell));
            m *= 2.0;
        }
        let mut diff = acc;
        diff.axpy(-1.0, &sharp_projection(&f, n, Band::AtMost));
        prop_assert_eq!(diff.max_abs(), 0.0);
        let p = sharp_projection(&f, n, Band::AtMost);
        prop_assert_eq!(sharp_projection(&p, n, Band::AtMost), p.clone());
        prop_assert!(p.norm_l2() <= f.norm_l2() * (1.0 + 1e-15));
    }

    #[test]
    fn sobolev_monotone_in_s(seed in any::<u64>(), s0 in -3.0f64..3.0, ds in 0.0f64..2.0) {
        let grid = Grid::new(2, 16).unwrap();
        let f = random_scalar(&grid, seed);
        prop_assert!(sobolev_norm(&f, s0) <= sobolev_norm(&f, s0 + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn translations_compose_and_preserve_norm(seed in any::<u64>(), a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let grid = Grid::new(2, 16).unwrap();
        let f = random_scalar(&grid, seed);
        let t1 = translate(&translate(&f, [a, 0.0, 0.0]), [0.0, b, 0.0]);
        let t2 = translate(&f, [a, b, 0.0]);
        let mut diff = t1;
        diff.axpy(-1.0, &t2);
        prop_assert!(diff.max_abs() < 1e-13);
        prop_assert!((t2.norm_l2() - f.norm_l2()).abs() < 1e-12 * f.norm_l2());
    }

    #[test]
    fn random_round_trip(seed in any::<u64>(), d in 2usize..=3) {
        let grid = Grid::new(d, 8).unwrap();
        let x = random_real(&grid, seed);
        let back = transform_backward(&transform_forward(&x, &grid).unwrap()).remove(0);
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn basis_modes_are_unit_and_solenoidal(k1 in -5i64..=5, k2 in -5i64..=5, k3 in -3i64..=3, pol in 0usize..2) {
        prop_assume!(k1 != 0 || k2 != 0 || k3 != 0);
        let grid = Grid::new(3, 16).unwrap();
        let e = basis_mode(BasisMode::new([k1, k2, k3], pol), &grid).unwrap();
        prop_assert!((e.norm_l2() - 1.0).abs() < 1e-12);
        prop_assert!(divergence(&e).max_abs() < 1e-14);
        let g = gamma([k1, k2, k3], pol, 3);
        let dot = g[0] * k1 as f64 + g[1] * k2 as f64 + g[2] * k3 as f64;
        prop_assert!(dot.abs() < 1e-13);
    }
}

#[test]
fn snapshot_round_trip_through_file() {
    let grid = Grid::new(2, 16).unwrap();
    let f = random_vector(&grid, 8);
    let dir = std::env::temp_dir().join(format!("bspc-snap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("u.bspc");
    save_snapshot(&path, &f).unwrap();
    assert_eq!(load_snapshot(&path).unwrap(), f);
    std::fs::remove_dir_all(&dir).ok();
}
