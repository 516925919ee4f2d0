use dynregimes::analytics::{phi_analytic, tc_closed_form};
use dynregimes::collapse::{analytic_entropy_curve, phi_collapse_mc};
use dynregimes::sde::ensemble_member;
use dynregimes::speciation::ProjectionClassifier;
use dynregimes::{
    collapse_time_from_curve, phi_speciation_mc, sample_gaussian_mixture, track_nearest, BackwardConfig, Dataset,
    EmpiricalDensity, GmSpec, RngPolicy, ScoreSource, TimeSchedule,
};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn population_samples_land_on_the_mixture() {
    let spec = GmSpec::new(1.0, 1.0, 16).unwrap();
    let sched = TimeSchedule::geometric(1e-3, 8.0, 600).unwrap();
    let cfg = BackwardConfig::new(sched, ScoreSource::GmPopulation(spec)).unwrap();
    let policy = RngPolicy::new(3);
    let m = spec.m_vec();
    let mut proj = Vec::new();
    for i in 0..400 {
        let x = ensemble_member(&cfg, &policy, i).unwrap();
        let p: f64 = x.final_state().iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / spec.m_norm();
        proj.push(p);
    }
    // Projection on the mean direction is ±|m| plus unit noise.
    let abs_mean = proj.iter().map(|p| p.abs()).sum::<f64>() / proj.len() as f64;
    assert!((abs_mean - 4.0).abs() < 0.2, "mean |projection| {abs_mean}");
    let plus = proj.iter().filter(|p| **p > 0.0).count();
    assert!((120..280).contains(&plus), "{plus} of 400 in the plus class");
}

#[test]
fn clone_curve_brackets_the_speciation_time() {
    let spec = GmSpec::new(1.0, 1.0, 32).unwrap();
    let ts = 0.5 * 33f64.ln();
    let sched = TimeSchedule::linear(1e-3, 8.0, 500).unwrap();
    let cfg = BackwardConfig::new(sched, ScoreSource::GmPopulation(spec)).unwrap();
    let cls = ProjectionClassifier {
        direction: spec.m_vec(),
    };
    let curve = phi_speciation_mc(&cfg, &cls, &[0.4 * ts, 2.5 * ts], 400, &RngPolicy::new(4)).unwrap();
    assert!(curve.values[0] > 0.95);
    assert!(curve.values[1] < 0.6);
    for (t, v) in curve.times.iter().zip(&curve.values) {
        let exact = phi_analytic(*t, &spec).unwrap();
        assert!((v - exact).abs() < 4.0 * (exact * (1.0 - exact) / 400.0).sqrt() + 0.01);
    }
}

#[test]
fn clone_curves_ignore_thread_count() {
    let spec = GmSpec::new(1.0, 1.0, 8).unwrap();
    let data = sample_gaussian_mixture(&spec, 40, &mut RngPolicy::new(5).stream("data", 0)).unwrap();
    let ed = EmpiricalDensity::new(&data);
    let sched = TimeSchedule::geometric(1e-3, 5.0, 200).unwrap();
    let cfg = BackwardConfig::new(sched, ScoreSource::Empirical(&ed)).unwrap();
    let run = || phi_collapse_mc(&cfg, &data, &[0.05, 0.5, 2.0], 64, &RngPolicy::new(6)).unwrap();
    let one = pool(1).install(run);
    let three = pool(3).install(run);
    assert_eq!(one, three);
}

#[test]
fn memorized_samples_end_on_atoms() {
    let spec = GmSpec::new(1.0, 1.0, 16).unwrap();
    let data = sample_gaussian_mixture(&spec, 30, &mut RngPolicy::new(7).stream("data", 0)).unwrap();
    let ed = EmpiricalDensity::new(&data);
    let sched = TimeSchedule::geometric(1e-5, 10.0, 800).unwrap();
    let cfg = BackwardConfig::new(sched, ScoreSource::Empirical(&ed)).unwrap();
    let tc = tc_closed_form(30, 16, 1.0).unwrap();
    let policy = RngPolicy::new(8);
    let mut t_hat = 0.0;
    for i in 0..100 {
        let tr = track_nearest(&ensemble_member(&cfg, &policy, i).unwrap(), &data).unwrap();
        assert!(
            tr.final_distance < 0.04,
            "trajectory {i} ended {} from an atom",
            tr.final_distance
        );
        t_hat += tr.t_hat_c / 100.0;
    }
    assert!((t_hat - tc).abs() < 0.3, "mean t_hat {t_hat} vs {tc}");
}

#[test]
fn analytic_entropy_crossing_matches_closed_form() {
    let times: Vec<f64> = (1..400).map(|k| k as f64 * 0.005).collect();
    for (n, d) in [(20_000, 32), (100, 32), (5_000, 64)] {
        let curve = analytic_entropy_curve(&times, n, d, 1.0).unwrap();
        let tc = collapse_time_from_curve(&curve).unwrap();
        assert!(
            (tc - tc_closed_form(n, d, 1.0).unwrap()).abs() < 0.005,
            "n={n} d={d}: {tc}"
        );
    }
}

#[test]
fn dataset_files_round_trip_through_load() {
    let spec = GmSpec::new(0.7, 1.3, 5).unwrap();
    let data = sample_gaussian_mixture(&spec, 25, &mut RngPolicy::new(9).stream("data", 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let bin = dir.path().join("a.bin");
    data.write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    data.write_binary(std::fs::File::create(&bin).unwrap()).unwrap();
    assert_eq!(Dataset::load(&csv).unwrap(), data);
    assert_eq!(Dataset::load(&bin).unwrap(), data);
}
