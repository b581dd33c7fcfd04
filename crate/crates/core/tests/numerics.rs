//! Transient probabilities, Bessel functions and busy periods against
//! independent oracles.

use pollinglab_core::numerics::{
    bessel_i1_scaled, bessel_i_scaled, busy_arrival_counts, busy_density_at, busy_period_density,
    convolve_busy, integrate, transient_prob, GridSpec, TransientKernel, TransientQueue,
};
use pollinglab_core::Tolerances;
use proptest::prelude::*;

/// `P_{j,·}(x)` by uniformization of the birth-death generator truncated at
/// `size - 1` (arrivals blocked there).
fn uniformized_row(lambda: f64, mu: f64, j: usize, x: f64, size: usize) -> Vec<f64> {
    let rate = lambda + mu;
    let step = |p: &[f64]| {
        let mut out = vec![0.0; size];
        for (n, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let up = if n + 1 < size { lambda / rate } else { 0.0 };
            let down = if n > 0 { mu / rate } else { 0.0 };
            out[n] += mass * (1.0 - up - down);
            if n + 1 < size {
                out[n + 1] += mass * up;
            }
            if n > 0 {
                out[n - 1] += mass * down;
            }
        }
        out
    };
    let mean = rate * x;
    let terms = (mean + 12.0 * mean.sqrt() + 60.0) as usize;
    let mut p = vec![0.0; size];
    p[j] = 1.0;
    let mut result = vec![0.0; size];
    // Poisson weights in log form so large means do not underflow at n = 0.
    let mut log_w = -mean;
    for n in 0..=terms {
        if n > 0 {
            p = step(&p);
            log_w += mean.ln() - (n as f64).ln();
        }
        let w = log_w.exp();
        for (r, v) in result.iter_mut().zip(&p) {
            *r += w * v;
        }
    }
    result
}

/// Deterministic pseudo-random lattice of 100 `(λ, μ, j, k, x)` points.
fn lattice() -> Vec<(f64, f64, usize, usize, f64)> {
    let rates = [(0.5, 1.0), (0.2, 1.0), (0.9, 1.0), (1.5, 2.0), (0.1, 0.4)];
    let xs = [0.05, 0.3, 1.0, 2.5, 5.0, 10.0, 20.0, 35.0];
    let mut out = Vec::new();
    let mut state = 12345u64;
    let mut next = |m: u64| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    while out.len() < 100 {
        let (l, m) = rates[next(rates.len() as u64) as usize];
        let j = next(12) as usize;
        let k = next(12) as usize;
        let x = xs[next(xs.len() as u64) as usize];
        out.push((l, m, j, k, x));
    }
    out
}

#[test]
fn transient_matches_uniformization_on_lattice() {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    for (l, m, j, k, x) in lattice() {
        let q = TransientQueue::new(l, m).unwrap();
        let oracle = uniformized_row(l, m, j, x, 400)[k];
        let got = transient_prob(&q, j, k, x, &tol).unwrap();
        worst = worst.max((got - oracle).abs());
        assert!(
            (got - oracle).abs() < 1e-8,
            "λ={l} μ={m} j={j} k={k} x={x}: {got} vs {oracle}"
        );
    }
    assert!(worst < 1e-8);
}

#[test]
fn chapman_kolmogorov() {
    let tol = Tolerances::default();
    let q = TransientQueue::new(0.6, 1.0).unwrap();
    let size = 300;
    for &(s, t) in &[(0.5, 1.5), (2.0, 3.0), (7.0, 0.25)] {
        let ks = TransientKernel::new(&q, s, size, &tol).unwrap();
        let kt = TransientKernel::new(&q, t, size, &tol).unwrap();
        let kst = TransientKernel::new(&q, s + t, size, &tol).unwrap();
        for j in [0, 1, 4] {
            for k in [0, 2, 5] {
                let via: f64 = (0..size).map(|m| ks.prob(j, m) * kt.prob(m, k)).sum();
                assert!(
                    (via - kst.prob(j, k)).abs() < 1e-6,
                    "s={s} t={t} j={j} k={k}"
                );
            }
        }
    }
}

#[test]
fn rows_are_distributions() {
    let tol = Tolerances::default();
    let q = TransientQueue::new(0.3, 1.0).unwrap();
    let kernel = TransientKernel::new(&q, 4.0, 200, &tol).unwrap();
    for j in 0..10 {
        let total: f64 = (0..=200).map(|k| kernel.prob(j, k)).sum();
        assert!((total - 1.0).abs() < 1e-10, "row {j} sums to {total}");
    }
}

/// `e^{-x} I_k(x)` by its power series, summed in logs.
fn scaled_bessel_series(k: u32, x: f64) -> f64 {
    let half = (x / 2.0).ln();
    let mut total = 0.0;
    for m in 0..400u32 {
        let lg = statrs::function::gamma::ln_gamma(m as f64 + 1.0)
            + statrs::function::gamma::ln_gamma((m + k) as f64 + 1.0);
        let term = ((2 * m + k) as f64 * half - lg - x).exp();
        total += term;
        if m as f64 > x && term < 1e-18 * total {
            break;
        }
    }
    total
}

#[test]
fn bessel_matches_series() {
    for &x in &[1e-3, 0.02, 0.7, 3.0, 12.0, 40.0, 90.0] {
        for k in [0u32, 1, 2, 5, 13, 30] {
            let got = bessel_i_scaled(k as i64, x, 512).unwrap();
            let want = scaled_bessel_series(k, x);
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300,
                "k={k} x={x}: {got} vs {want}"
            );
        }
    }
    assert_eq!(bessel_i_scaled(-3, 2.0, 512), bessel_i_scaled(3, 2.0, 512));
}

#[test]
fn first_order_bessel_matches_general_routine() {
    for &y in &[0.0, 1e-6, 0.3, 5.0, 39.99, 40.01, 75.0, 1e3, 1e5] {
        let got = bessel_i1_scaled(y);
        let want = bessel_i_scaled(1, y, 512).unwrap();
        assert!((got - want).abs() <= 1e-13 * want, "y={y}: {got} vs {want}");
    }
}

/// `g(x) = √(μ/λ) e^{-(λ+μ)x} I_1(2√(λμ) x) / x`.
fn busy_density_closed_form(lambda: f64, mu: f64, x: f64) -> f64 {
    let a = 2.0 * (lambda * mu).sqrt();
    let decay = (mu.sqrt() - lambda.sqrt()).powi(2);
    (mu / lambda).sqrt() * (-decay * x).exp() * bessel_i_scaled(1, a * x, 512).unwrap() / x
}

/// `g(x) = Σ_{n≥1} e^{-λx} (λx)^{n-1}/n! · Erlang(n, μ)(x)`: the density of
/// a busy period as a mixture over the number of messages it serves.
fn busy_density_series(lambda: f64, mu: f64, x: f64) -> f64 {
    let ln = |v: f64| v.ln();
    let lg = |v: f64| statrs::function::gamma::ln_gamma(v);
    (1..4000)
        .map(|n| {
            let nf = n as f64;
            (-(lambda + mu) * x + (nf - 1.0) * ln(lambda * x) - lg(nf + 1.0)
                + nf * ln(mu)
                + (nf - 1.0) * ln(x)
                - lg(nf))
            .exp()
        })
        .sum()
}

const PAIRS: [(f64, f64); 10] = [
    (0.1, 1.0),
    (0.3, 1.0),
    (0.5, 1.0),
    (0.7, 1.0),
    (0.85, 1.0),
    (0.2, 0.5),
    (1.0, 2.5),
    (2.0, 3.0),
    (0.05, 0.2),
    (3.0, 10.0),
];

#[test]
fn busy_density_matches_bessel_form() {
    for (l, m) in PAIRS {
        let q = TransientQueue::new(l, m).unwrap();
        for &x in &[1e-3, 0.1, 1.0, 4.0, 20.0] {
            let got = busy_density_at(&q, x);
            let want = busy_density_closed_form(l, m, x);
            assert!(
                (got - want).abs() <= 1e-10 * want.max(1e-200),
                "λ={l} μ={m} x={x}"
            );
            let series = busy_density_series(l, m, x);
            assert!(
                (got - series).abs() <= 1e-9 * series.max(1e-200),
                "λ={l} μ={m} x={x}"
            );
        }
        assert!((busy_density_at(&q, 0.0) - m).abs() < 1e-12);
    }
}

#[test]
fn busy_density_mass_and_mean_by_quadrature() {
    let (l, m) = (0.4, 1.0);
    let q = TransientQueue::new(l, m).unwrap();
    let upper = 400.0;
    let mass = integrate(
        |x| busy_density_closed_form(l, m, x.max(1e-300)),
        0.0,
        upper,
        1e-12,
    )
    .unwrap();
    let mean = integrate(
        |x| x * busy_density_closed_form(l, m, x.max(1e-300)),
        0.0,
        upper,
        1e-12,
    )
    .unwrap();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!((mean - q.mean_busy_period()).abs() < 1e-8);
}

#[test]
fn busy_grid_mass_and_mean() {
    let tol = Tolerances::default();
    for (l, m) in PAIRS {
        let q = TransientQueue::new(l, m).unwrap();
        let g = busy_period_density(&q, GridSpec::default(), &tol).unwrap();
        let eb = 1.0 / (m - l);
        assert!(
            (g.mass() - 1.0).abs() < 1e-6,
            "λ={l} μ={m}: mass {}",
            g.mass()
        );
        assert!(
            ((g.mean() - eb) / eb).abs() < 1e-6,
            "λ={l} μ={m}: mean {} vs {eb}",
            g.mean()
        );
    }
}

#[test]
fn convolution_powers_add_means() {
    let tol = Tolerances::default();
    let q = TransientQueue::new(0.5, 1.0).unwrap();
    let g = busy_period_density(&q, GridSpec::default(), &tol).unwrap();
    let g3 = convolve_busy(&g, 3);
    assert!((g3.mass() - 1.0).abs() < 1e-5);
    assert!((g3.mean() - 3.0 * g.mean()).abs() < 1e-4 * g.mean());
    let g0 = convolve_busy(&g, 0);
    assert_eq!(g0.atom_at_zero, 1.0);
}

#[test]
fn arrivals_during_busy_period_have_the_right_mean() {
    // E[#other arrivals] = λ_o E B.
    let q = TransientQueue::new(0.5, 1.0).unwrap();
    let counts = busy_arrival_counts(&q, 0.7, 400);
    let total: f64 = counts.iter().sum();
    let mean: f64 = counts.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((mean - 0.7 * 2.0).abs() < 1e-10);
    // With no other traffic every mass sits at zero.
    let none = busy_arrival_counts(&q, 0.0, 5);
    assert!((none[0] - 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transient_probabilities_in_unit_interval(
        lambda in 0.05f64..0.95,
        j in 0usize..20,
        k in 0usize..20,
        x in 0.0f64..50.0,
    ) {
        let q = TransientQueue::new(lambda, 1.0).unwrap();
        let p = transient_prob(&q, j, k, x, &Tolerances::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn empty_probability_is_monotone_from_empty(lambda in 0.05f64..0.95, x in 0.0f64..30.0, dx in 0.01f64..5.0) {
        // From an empty start P_{0,0} decreases towards 1 - ρ.
        let tol = Tolerances::default();
        let q = TransientQueue::new(lambda, 1.0).unwrap();
        let a = transient_prob(&q, 0, 0, x, &tol).unwrap();
        let b = transient_prob(&q, 0, 0, x + dx, &tol).unwrap();
        prop_assert!(b <= a + 1e-12);
        prop_assert!(b >= 1.0 - lambda - 1e-12);
    }
}
