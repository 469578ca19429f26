use scnls_core::groundstate::{
    k_opt, sharp_constant, solve, solve_ground_state, Branch, SolverOptions,
};
use scnls_core::Grid;

/// Radial profile of the 2D cubic ground state `P'' + P'/r - P + P^3 = 0` by
/// shooting on `P(0)`, integrated with RK4. Returns `2π ∫ P² r dr`.
fn townes_mass() -> f64 {
    let h = 1e-3;
    let r_max = 12.0;
    let rhs = |r: f64, p: f64, q: f64| {
        let damping = if r > 0.0 { q / r } else { 0.0 };
        (q, p - p * p * p - damping)
    };
    // Integrates until the profile crosses zero (overshoot) or turns back up
    // (undershoot). Returns the verdict and the accumulated mass.
    let shoot = |p0: f64| -> (bool, f64) {
        // Series start avoids the coordinate singularity: P ≈ p0 + r²(p0 - p0³)/4.
        let mut r = h;
        let mut p = p0 + h * h * (p0 - p0.powi(3)) / 4.0;
        let mut q = h * (p0 - p0.powi(3)) / 2.0;
        let mut mass = 0.0;
        while r < r_max {
            let (k1p, k1q) = rhs(r, p, q);
            let (k2p, k2q) = rhs(r + h / 2.0, p + h / 2.0 * k1p, q + h / 2.0 * k1q);
            let (k3p, k3q) = rhs(r + h / 2.0, p + h / 2.0 * k2p, q + h / 2.0 * k2q);
            let (k4p, k4q) = rhs(r + h, p + h * k3p, q + h * k3q);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            r += h;
            if p < 0.0 {
                return (true, mass);
            }
            if q > 0.0 {
                return (false, mass);
            }
            mass += 2.0 * std::f64::consts::PI * p * p * r * h;
        }
        (false, mass)
    };
    let (mut lo, mut hi) = (2.0, 2.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid).0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    shoot(lo).1
}

#[test]
fn townes_mass_matches_shooting() {
    let reference = townes_mass();
    assert!(
        (reference - 11.70).abs() < 0.05,
        "shooting mass {reference}"
    );
    let g = Grid::new(2, 128, 20.0).unwrap();
    let opts = SolverOptions {
        branch: Branch::SemiTrivial,
        ..SolverOptions::new(1e-10)
    };
    let gs = solve(1.0, 0.0, &g, &opts).unwrap();
    let rel = (gs.l2_p - reference).abs() / reference;
    assert!(rel < 0.01, "grid mass {} vs shooting {reference}", gs.l2_p);
    // Mass-critical cubic in 2D: K = 2 / ‖P‖².
    assert!((gs.k_opt - 2.0 / gs.l2_p).abs() < 1e-12);
}

#[test]
fn k_opt_stable_under_refinement() {
    for (dim, coarse, fine, length, beta) in [(1, 512, 1024, 40.0, 1.0), (2, 64, 128, 20.0, 0.5)] {
        let sigma = if dim == 1 { 1.0 } else { 0.8 };
        let a = sharp_constant(
            sigma,
            beta,
            &Grid::new(dim, coarse, length).unwrap(),
            1e-10,
            5000,
        )
        .unwrap();
        let b = sharp_constant(
            sigma,
            beta,
            &Grid::new(dim, fine, length).unwrap(),
            1e-10,
            5000,
        )
        .unwrap();
        let rel = (a.k_opt - b.k_opt).abs() / b.k_opt;
        assert!(
            rel < 5e-3,
            "N={dim}: {} vs {} ({rel:.2e})",
            a.k_opt,
            b.k_opt
        );
    }
}

#[test]
fn two_dimensional_state_is_radial_and_converged() {
    let g = Grid::new(2, 64, 20.0).unwrap();
    let gs = solve_ground_state(1.0, 1.0, &g, 1e-10).unwrap();
    assert!(gs.residual_inf < 1e-10);
    assert!(gs.p.iter().chain(&gs.q).all(|x| *x >= 0.0));
    let n = g.points_per_axis();
    // Node (i, j) and its images under the square's symmetries about the center.
    let at = |i: usize, j: usize| gs.p[i * n + j];
    let c = n / 2;
    let mut worst: f64 = 0.0;
    for i in 1..n {
        for j in 1..n {
            let (mi, mj) = (2 * c - i, 2 * c - j);
            if mi < n && mj < n {
                worst = worst.max((at(i, j) - at(mi, j)).abs());
                worst = worst.max((at(i, j) - at(i, mj)).abs());
            }
            worst = worst.max((at(i, j) - at(j, i)).abs());
        }
    }
    assert!(worst < 1e-8, "asymmetry {worst:.2e}");
    assert!((k_opt(&gs) - gs.k_opt).abs() < 1e-14);
}
