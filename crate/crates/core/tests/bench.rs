use hearth::bench::{difficulty_trace, generate_workload, nonce_samples, ConfigId, Phase};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn workload_marginals_are_uniform() {
    for phase in Phase::ALL {
        let (lo, hi) = phase.tx_range();
        let mut counts = vec![0f64; hi - lo + 1];
        for seed in 0..10_000 {
            for (p, n) in generate_workload(seed) {
                if p == phase {
                    counts[n - lo] += 1.0;
                }
            }
        }
        let expected = counts.iter().sum::<f64>() / counts.len() as f64;
        let chi2: f64 = counts.iter().map(|o| (o - expected).powi(2) / expected).sum();
        let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.001, "{phase}: chi2 {chi2} p {p}");
    }
}

fn phase_counts(idle: usize, normal: usize, emergency: usize, recovery: usize) -> Vec<usize> {
    [idle, normal, emergency, recovery]
        .iter()
        .flat_map(|n| [*n; 5])
        .collect()
}

#[test]
fn config_traces_have_their_declared_shapes() {
    let counts = phase_counts(1, 5, 12, 2);
    let c = difficulty_trace(&ConfigId::C.params(), &counts);
    assert_eq!(c[..5].iter().max(), Some(&4));
    assert!(c[10..15].contains(&1));
    let d = difficulty_trace(&ConfigId::D.params(), &counts);
    assert!(d.contains(&5));
    let e = difficulty_trace(&ConfigId::E.params(), &counts);
    assert!(e.iter().all(|d| (2..=4).contains(d)));
    for id in [ConfigId::A, ConfigId::B] {
        let t = difficulty_trace(&id.params(), &counts);
        assert!(t.iter().all(|d| *d == t[0]));
    }
}

#[test]
fn nonce_medians_order_by_difficulty() {
    let med = |d| {
        let mut v = nonce_samples(d, 101, 9);
        v.sort_unstable();
        v[50] as f64
    };
    let (m1, m2) = (med(1), med(2));
    assert!(m1 < m2);
    let ratio = m2 / m1;
    assert!((4.0..=64.0).contains(&ratio), "{ratio}");
}
