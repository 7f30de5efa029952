use vardisc::bnp;
use vardisc::simulate::{self, FrequencyVector};
use vardisc::special::ln_beta;
use vardisc::{BPHyperParams, VariantMatrix};

/// Mean and standard error of a sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn assert_close(xs: &[f64], want: f64, what: &str) {
    let (mean, se) = mean_se(xs);
    assert!((mean - want).abs() <= 4.0 * se, "{what}: mean {mean} vs {want} (se {se})");
}

fn stats<F: Fn(u64) -> VariantMatrix>(reps: u64, draw: F) -> (Vec<f64>, Vec<f64>) {
    (0..reps)
        .map(|s| {
            let m = draw(s);
            (m.n_distinct() as f64, m.n_incidences() as f64)
        })
        .unzip()
}

#[test]
fn single_sample_is_poisson_alpha() {
    let p = BPHyperParams::new(7.5, 0.3, 2.0).unwrap();
    let (distinct, _) = stats(3000, |s| simulate::draw_ibp(1, &p, s).unwrap());
    assert_close(&distinct, 7.5, "one-sample count");
    let (mean, _) = mean_se(&distinct);
    let var = distinct.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2999.0;
    // Poisson dispersion: variance / mean near 1.
    assert!((var / mean - 1.0).abs() < 0.1, "dispersion {}", var / mean);
}

#[test]
fn column_wise_matches_sequential_scheme() {
    let p = BPHyperParams::new(10.0, 0.4, 2.0).unwrap();
    let n = 40;
    let want_distinct = bnp::expected_new_variants(0, n as u64, &p);
    let want_incidences = 10.0 * n as f64;
    let (d1, i1) = stats(400, |s| simulate::draw_ibp(n, &p, s).unwrap());
    let (d2, i2) = stats(400, |s| simulate::draw_ibp_sequential(n, &p, 1000 + s).unwrap());
    assert_close(&d1, want_distinct, "column-wise distinct");
    assert_close(&d2, want_distinct, "sequential distinct");
    assert_close(&i1, want_incidences, "column-wise incidences");
    assert_close(&i2, want_incidences, "sequential incidences");
}

#[test]
fn ibp_prefix_growth_matches_prediction() {
    let p = BPHyperParams::new(20.0, 0.1, 1.0).unwrap();
    let news: Vec<f64> = (0..300)
        .map(|s| {
            let m = simulate::draw_ibp(300, &p, s).unwrap();
            (m.n_distinct() - m.prefix(100).unwrap().n_distinct()) as f64
        })
        .collect();
    assert_close(&news, bnp::expected_new_variants(100, 200, &p), "new variants after 100");
}

#[test]
fn beta_bernoulli_distinct_count() {
    let (n, k, a, b) = (25usize, 400usize, 0.3, 4.0);
    // P(site seen) = 1 - E[(1-θ)^N] = 1 - B(a, b+N)/B(a, b)
    let seen = 1.0 - (ln_beta(a, b + n as f64) - ln_beta(a, b)).exp();
    let (distinct, incidences) = stats(300, |s| simulate::draw_beta_bernoulli(n, k, a, b, s).unwrap());
    assert_close(&distinct, k as f64 * seen, "beta-Bernoulli distinct");
    assert_close(&incidences, (n * k) as f64 * a / (a + b), "beta-Bernoulli incidences");
}

#[test]
fn power_law_mean_frequency() {
    for xi in [0.0, 0.7, 1.5] {
        // E[θ] = ∫ Q(u) du by the midpoint rule.
        let grid = 200_000;
        let mean_theta = (0..grid)
            .map(|i| simulate::power_law_quantile((i as f64 + 0.5) / grid as f64, xi))
            .sum::<f64>()
            / grid as f64;
        let (n, k) = (20usize, 300usize);
        let (_, inc) = stats(300, |s| simulate::draw_power_law(n, k, xi, s).unwrap());
        assert_close(&inc, (n * k) as f64 * mean_theta, &format!("power law ξ = {xi}"));
    }
    assert!(simulate::draw_power_law(5, 5, 2.0, 0).is_err());
}

#[test]
fn frequency_draws_and_thinning() {
    let freqs = FrequencyVector::new((1..=200).map(|j| 1.0 / j as f64).collect()).unwrap();
    let total: f64 = freqs.thetas().iter().sum();
    let (_, inc) = stats(300, |s| simulate::draw_from_frequencies(&freqs, 30, 0.6, s).unwrap());
    assert_close(&inc, 30.0 * 0.6 * total, "frequency draw incidences");

    let base = simulate::draw_from_frequencies(&freqs, 30, 1.0, 1).unwrap();
    let kept: Vec<f64> = (0..300)
        .map(|s| simulate::thin_matrix(&base, 0.25, s).unwrap().n_incidences() as f64)
        .collect();
    assert_close(&kept, 0.25 * base.n_incidences() as f64, "thinned incidences");
    assert_eq!(simulate::thin_matrix(&base, 1.0, 9).unwrap(), base);
    assert_eq!(simulate::thin_matrix(&base, 0.0, 9).unwrap().n_incidences(), 0);
}

#[test]
fn draws_are_seed_deterministic() {
    let p = BPHyperParams::new(20.0, 0.3, 1.0).unwrap();
    assert_eq!(simulate::draw_ibp(150, &p, 3).unwrap(), simulate::draw_ibp(150, &p, 3).unwrap());
    assert_ne!(simulate::draw_ibp(150, &p, 3).unwrap(), simulate::draw_ibp(150, &p, 4).unwrap());
    let m = simulate::draw_ibp(150, &p, 3).unwrap();
    let f = FrequencyVector::from_matrix(&m);
    assert_eq!(f.len(), m.n_distinct());
}
