use proptest::prelude::*;
use riqs::maser::*;
use riqs::qops::{c, eig_general, herm_fn, max_abs, trace_norm, CMatrix, DensityMatrix, C64};
use riqs::spectral::peripheral_info;
use riqs::Error;

fn exact(eta: [i64; 2], xi: [i64; 2], n_trunc: usize) -> MaserParams {
    MaserParams::from_exact(1.0, ExactEtaXi { eta, xi }, 1.3, 0.7, n_trunc).unwrap()
}

fn is_square(x: i128) -> bool {
    let k = (x as f64).sqrt().round() as i128;
    (k - 1..=k + 1).any(|r| r >= 0 && r * r == x)
}

#[test]
fn d_vanishes_exactly_on_resonances() {
    for (eta, xi) in [([0, 1], [1, 1]), ([1, 1], [840, 1]), ([1, 4], [3, 4]), ([2, 1], [7, 1]), ([0, 1], [9, 4])] {
        let p = exact(eta, xi, 80);
        let s = rabi_resonances(&p, 80).unwrap();
        for n in 0..=80usize {
            // ξn+η = (a n f + e b)/(b f) must be an integer square.
            let (a, b, e, f) = (xi[0] as i128, xi[1] as i128, eta[0] as i128, eta[1] as i128);
            let (num, den) = (a * n as i128 * f + e * b, b * f);
            let resonant = n >= 1 && num % den == 0 && is_square(num / den);
            assert_eq!(s.resonances.contains(&n), resonant, "n = {n}");
            assert_eq!(p.d_of(n) == 0.0, n == 0 || resonant, "n = {n}");
        }
    }
}

#[test]
fn degenerate_example() {
    let p = exact([1, 1], [840, 1], 60);
    let s = rabi_resonances(&p, 60).unwrap();
    for n in [1, 2, 6, 23, 52, 53] {
        assert!(s.resonances.contains(&n), "n = {n}");
    }
    assert!(!s.resonances.contains(&3) && !s.resonances.contains(&51));
    assert_eq!(s.classification, Classification::FullyResonant { degenerate: true });
    assert!(s.consecutive.contains(&1) && s.consecutive.contains(&52));
    assert!(s.degenerate_offsets().contains(&51));
}

#[test]
fn closed_form_matches_partial_trace_below_cutoff() {
    let p = MaserParams::from_eta_xi(1.0, 0.37, 0.81, 1.1, 0.6, 8);
    let closed = jc_rdm(&p).unwrap();
    let numeric = jc_numeric(&p).unwrap();
    let x = CMatrix::from_fn(9, 9, |i, j| if i < 7 && j < 7 { c(0.1 * i as f64 + 0.3, 0.2 * j as f64 - 0.1 * i as f64) } else { c(0.0, 0.0) });
    assert!(max_abs(&(closed.apply(&x) - numeric.superop.apply(&x))) < 1e-10);
}

#[test]
fn diagonal_action_is_a_difference_operator() {
    for p in [MaserParams::from_eta_xi(1.0, 0.37, 0.81, 1.1, 0.6, 10), exact([1, 4], [3, 4], 10)] {
        let map = jc_rdm(&p).unwrap();
        let d = p.dim();
        let x: Vec<f64> = (0..d).map(|n| if n + 1 < d { 1.0 / (1.0 + n as f64) } else { 0.0 }).collect();
        let be = p.beta * p.e0;
        let y: Vec<f64> = (0..=d).map(|n| if n < d { (be * n as f64).exp() * x[n] } else { 0.0 }).collect();
        let grad = |n: usize| if n == 0 { y[0] } else { y[n] - y[n - 1] };
        let w = |n: usize| p.d_of(n) * (-be * n as f64).exp() * grad(n);
        let out = map.apply(&CMatrix::from_fn(d, d, |i, j| if i == j { c(x[i], 0.0) } else { c(0.0, 0.0) }));
        for n in 0..d {
            let oracle = x[n] - (w(n) - w(n + 1));
            assert!((out[(n, n)].re - oracle).abs() < 1e-10, "n = {n}");
        }
    }
}

#[test]
fn channel_respects_gauge_blocks() {
    for p in [MaserParams::from_eta_xi(1.0, 0.2, 0.7, 1.1, 0.5, 7), exact([1, 1], [840, 1], 7)] {
        let m = jc_rdm(&p).unwrap();
        assert!(m.gauge_defect() < 1e-12);
        let x = CMatrix::from_fn(8, 8, |i, j| c(i as f64 - 0.5 * j as f64, 0.3 * (i * j) as f64));
        for d in -7isize..=7 {
            let y = m.apply(&gauge_component(&x, d));
            assert!(max_abs(&(&y - gauge_component(&y, d))) < 1e-12);
        }
    }
}

#[test]
fn zero_coupling_is_unitary() {
    let p = MaserParams { e: 1.1, e0: 1.0, lambda: 0.0, tau: 0.8, beta: 0.3, n_trunc: 6, exact: None };
    let m = jc_rdm(&p).unwrap();
    let s = m.superoperator().unwrap();
    let ss = s.dual().compose(&s);
    assert!(max_abs(&(ss.matrix() - CMatrix::identity(49, 49))) < 1e-12);
}

#[test]
fn non_resonant_state_is_truncated_gibbs() {
    let p = MaserParams::from_eta_xi(1.0, 0.0, std::f64::consts::SQRT_2, 1.3, 0.7, 30);
    let s = rabi_resonances(&p, p.n_trunc).unwrap();
    let st = sector_invariant_states(&p, &s).unwrap();
    assert_eq!(st.states.len(), 1);
    let w: Vec<f64> = (0..p.dim()).map(|n| (-p.beta_star() * p.e * n as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    let gibbs = DensityMatrix::diagonal(&w.iter().map(|x| x / z).collect::<Vec<_>>()).unwrap();
    assert!(max_abs(&(st.states[0].matrix() - gibbs.matrix())) < 1e-14);
    let m = jc_rdm(&p).unwrap();
    let rho = st.states[0].matrix();
    assert!(trace_norm(&(m.apply(rho) - rho)) <= 1e-10 + 2.0 * st.tail_weight);
}

#[test]
fn finite_sector_states_are_fixed_exactly() {
    // ξ = 1, η = 0 truncated at 9 levels: resonances 1, 4 and 9 close three sectors.
    let p = exact([0, 1], [1, 1], 8);
    let s = rabi_resonances(&p, p.n_trunc).unwrap();
    assert_eq!(s.sectors, vec![(0, 0), (1, 3), (4, 8)]);
    assert!(s.top_closed);
    let st = sector_invariant_states(&p, &s).unwrap();
    let m = jc_rdm(&p).unwrap();
    for rho in &st.states {
        assert!(max_abs(&(m.apply(rho.matrix()) - rho.matrix())) < 1e-10);
    }
    let p2 = exact([1, 4], [3, 4], 40);
    let s2 = rabi_resonances(&p2, p2.n_trunc).unwrap();
    let st2 = sector_invariant_states(&p2, &s2).unwrap();
    let m2 = jc_rdm(&p2).unwrap();
    for (k, rho) in st2.states.iter().enumerate() {
        if s2.is_finite(k) {
            assert!(max_abs(&(m2.apply(rho.matrix()) - rho.matrix())) < 1e-10);
        }
    }
}

#[test]
fn sector_weights_are_conserved() {
    let p = exact([0, 1], [1, 1], 8);
    let rho0 = DensityMatrix::diagonal(&[0.1, 0.05, 0.2, 0.05, 0.1, 0.1, 0.2, 0.1, 0.1]).unwrap();
    let r = relax_in_mean(&p, &rho0, 300).unwrap();
    assert_eq!(r.weights.len(), 3);
    assert!((r.weights[0] - 0.1).abs() < 1e-15 && (r.weights[1] - 0.3).abs() < 1e-15);
    assert!(r.weight_drift < 1e-10);
    assert!(r.trace_loss.abs() < 1e-10);
    assert!(r.ergodic_distances.last().unwrap() < &0.05);
}

#[test]
fn finite_sector_mixes_exponentially() {
    let p = exact([0, 1], [1, 1], 8);
    let rho0 = DensityMatrix::basis(9, 2);
    let r = relax_in_mean(&p, &rho0, 200).unwrap();
    let d = &r.mixing_distances;
    assert!(d[199] < 1e-8);
    let slope = riqs::spectral::fit_log_slope(&d.iter().map(|x| x.max(1e-300)).collect::<Vec<_>>(), 10, 60);
    assert!(slope < -0.05);
}

#[test]
fn invariant_mixture_stays_put() {
    let p = exact([0, 1], [1, 1], 8);
    let s = rabi_resonances(&p, 8).unwrap();
    let st = sector_invariant_states(&p, &s).unwrap();
    let mix = st.states.iter().zip([0.2, 0.5, 0.3]).fold(CMatrix::zeros(9, 9), |acc, (r, w)| acc + r.matrix() * c(w, 0.0));
    let r = relax_in_mean(&p, &DensityMatrix::new(mix).unwrap(), 50).unwrap();
    assert!(r.ergodic_distances.iter().all(|&x| x < 1e-10));
}

#[test]
fn open_sector_needs_positive_beta() {
    let p = MaserParams { beta: 0.0, ..MaserParams::from_eta_xi(1.0, 0.0, std::f64::consts::SQRT_2, 1.3, 0.7, 10) };
    let s = rabi_resonances(&p, 10).unwrap();
    assert!(matches!(sector_invariant_states(&p, &s), Err(Error::NoInvariantState(_))));
}

#[test]
fn diagonal_block_has_only_peripheral_one_per_sector() {
    for p in [exact([0, 1], [1, 1], 8), exact([1, 4], [3, 4], 40), exact([1, 1], [840, 1], 60)] {
        let m = jc_rdm(&p).unwrap();
        let s = rabi_resonances(&p, p.n_trunc).unwrap();
        let b0 = m.gauge_block(0);
        for (k, &(a, b)) in s.sectors.iter().enumerate() {
            if !s.is_finite(k) {
                continue;
            }
            let len = b - a + 1;
            let sub = CMatrix::from_fn(len, len, |i, j| b0[(a + i, a + j)]);
            let info = peripheral_info(&sub, 1e-8).unwrap();
            assert_eq!(info.peripheral.len(), 1, "sector {k}");
            assert!((info.peripheral[0] - c(1.0, 0.0)).norm() < 1e-8);
        }
    }
}

#[test]
fn peripheral_eigenvectors_have_invariant_moduli() {
    let p = exact([1, 1], [840, 1], 60);
    let m = jc_rdm(&p).unwrap();
    let s = rabi_resonances(&p, 60).unwrap();
    let mut seen = 0;
    for d in s.degenerate_offsets().into_iter().filter(|&d| d > 0) {
        let blk = m.gauge_block(d);
        let eig = eig_general(&blk, 1e-9).unwrap();
        for (k, z) in eig.values.iter().enumerate() {
            if z.norm() < 1.0 - 1e-8 {
                continue;
            }
            seen += 1;
            // Peripheral value e^{±iτEd}, as ξπd is a multiple of 2π.
            let phase = C64::from_polar(1.0, p.tau * p.e * d as f64);
            assert!((z - phase).norm() < 1e-8 || (z - phase.conj()).norm() < 1e-8);
            let dim = p.dim();
            let mut x = CMatrix::zeros(dim, dim);
            for i in 0..blk.nrows() {
                x[(i, i + d as usize)] = eig.vectors[(i, k)];
            }
            let abs = herm_fn(&(x.adjoint() * &x), |v| c(v.max(0.0).sqrt(), 0.0)).unwrap();
            assert!(max_abs(&(m.apply(&abs) - &abs)) < 1e-8);
        }
    }
    assert!(seen > 0);
}

#[test]
fn degenerate_ergodic_limit_is_refused_with_fixed_point() {
    // τE d ∈ 2πZ for d = 51 turns the peripheral value into 1.
    let p = exact([1, 1], [840, 1], 60);
    let shift = 2.0 * std::f64::consts::PI / (p.tau * 51.0);
    let k = (p.e / shift).round().max(1.0);
    let q = MaserParams { e0: p.e0 + (k * shift - p.e), e: k * shift, ..p };
    let rho0 = DensityMatrix::basis(61, 0);
    assert!(matches!(relax_in_mean(&q, &rho0, 5), Err(Error::Degenerate(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blocks_reassemble(seed in 0u64..1000, n in 2usize..8) {
        let x = CMatrix::from_fn(n, n, |i, j| c(((seed as usize + i * 7 + j * 3) % 11) as f64, (i as f64) - (j as f64)));
        let sum = (-(n as isize)..=(n as isize)).fold(CMatrix::zeros(n, n), |acc, d| acc + gauge_component(&x, d));
        prop_assert_eq!(sum, x);
    }

    #[test]
    fn rational_resonances_are_perfect_squares(a in 1i64..50, b in 1i64..5, e in 0i64..10, f in 1i64..5) {
        let p = exact([e, f], [a, b], 40);
        let s = rabi_resonances(&p, 40).unwrap();
        for &n in &s.resonances {
            let v = a as f64 / b as f64 * n as f64 + e as f64 / f as f64;
            let k = v.sqrt().round();
            prop_assert!((v - k * k).abs() < 1e-9);
            prop_assert_eq!(p.d_of(n), 0.0);
        }
    }
}
