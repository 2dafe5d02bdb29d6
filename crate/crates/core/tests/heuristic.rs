use vfold::criteria::{compute_table, select};
use vfold::densities::{Setting, TrueDensity};
use vfold::heuristic::{
    m_star, phi_bar, selection_counts, selection_distribution, signal_ratio, sr, sr_all, Procedure,
};
use vfold::models::{regu_collection, HistogramModel, ModelCollection};
use vfold::projection::true_projection;
use vfold::variance::{expected_delta, var_increment};
use vfold::CriterionSpec;

#[test]
fn upper_tail() {
    assert_eq!(phi_bar(0.0), 0.5);
    assert_eq!(phi_bar(f64::INFINITY), 0.0);
    assert_eq!(phi_bar(f64::NEG_INFINITY), 1.0);
    assert!((phi_bar(1.959964) - 0.025).abs() < 1e-6);
    // Mill's-ratio bracket for the far tail.
    let t: f64 = 8.0;
    let dens = (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    assert!(phi_bar(t) < dens / t && phi_bar(t) > dens * t / (t * t + 1.0));
    let mut last = 1.0;
    for k in -60..=60 {
        let t = k as f64 / 10.0;
        assert!((phi_bar(t) + phi_bar(-t) - 1.0).abs() < 1e-12);
        let p = phi_bar(t);
        assert!(p < last && (0.0..=1.0).contains(&p));
        last = p;
    }
}

#[test]
fn ratio_markers_and_scaling() {
    assert_eq!(signal_ratio(1.0, 0.0), f64::INFINITY);
    assert_eq!(signal_ratio(0.0, 0.0), f64::NEG_INFINITY);
    assert_eq!(signal_ratio(-1.0, 0.0), f64::NEG_INFINITY);
    for (mean, var) in [(0.3, 0.02), (-1.5, 4.0), (2e-4, 1e-9)] {
        for a in [1e-3, 0.5, 7.0] {
            let base = signal_ratio(mean, var);
            assert!((signal_ratio(a * mean, a * a * var) - base).abs() < 1e-12 * base.abs());
        }
    }
}

#[test]
fn single_competitor() {
    let s = TrueDensity::setting(Setting::S);
    let a = HistogramModel::regular(5).unwrap();
    let b = HistogramModel::regular(12).unwrap();
    let c = ModelCollection::new("pair", vec![a.clone(), b.clone()]).unwrap();
    let n = 100;
    for (v, cst) in [(2, 1.0), (5, 1.5), (100, 1.0)] {
        let (pa, pb) = (true_projection(&s, &a), true_projection(&s, &b));
        // E[crit(m)] = −‖s_m‖² + (2C − 1) D_m / n.
        let mean = (pb.norm_sm_sq - pa.norm_sm_sq) + (2.0 * cst - 1.0) * (pa.d_cal - pb.d_cal) / n as f64;
        let var = var_increment(&s, &a, &b, n, v, cst).unwrap().analytic;
        let got = sr(&s, &c, 0, n, v, cst).unwrap();
        assert!((got - mean / var.sqrt()).abs() < 1e-12 * got.abs());
    }
    assert!(sr(&s, &c, 2, n, 5, 1.0).is_err());
    let lone = ModelCollection::new("one", vec![a]).unwrap();
    assert!(sr(&s, &lone, 0, n, 5, 1.0).is_err());
}

/// Against the best model alone, the signal ratio nearly attains its
/// maximum: exactly for models at moderate distance, and within a few
/// percent for far-off ones, whose strongest rival can be a neighbour of it.
#[test]
fn best_model_is_nearly_the_strongest_competitor() {
    let s = TrueDensity::setting(Setting::S);
    let n = 100;
    let c = regu_collection(n).unwrap();
    let star = m_star(&s, &c, n);
    let best = &c.models()[star];
    for v in [2, 5, 10, 100] {
        let entries = sr_all(&s, &c, n, Procedure::VFold { v, c: 1.0 }).unwrap();
        for (i, m) in c.models().iter().enumerate() {
            if i == star {
                continue;
            }
            let against_best =
                expected_delta(&s, m, best, n, 1.0) / var_increment(&s, m, best, n, v, 1.0).unwrap().analytic.sqrt();
            let full = entries[i].sr;
            assert!(against_best <= full + 1e-12);
            if full <= 1.0 {
                assert!(full - against_best < 0.01, "V={v}, dim {}: {full} vs {against_best}", m.dim());
            }
            assert!(full - against_best < 0.15 * full.abs().max(1.0), "V={v}, dim {}", m.dim());
        }
        assert!(entries[star].sr < entries[c.len() - 1].sr);
    }
}

#[test]
fn selection_frequencies() {
    let s = TrueDensity::setting(Setting::S);
    let n = 100;
    let c = regu_collection(30).unwrap();
    let spec: CriterionSpec = "penvf:V=5".parse().unwrap();
    let r = selection_distribution(&s, &c, n, &spec, 200, 3, false).unwrap();
    let total: f64 = r.rows.iter().map(|row| row.freq).sum();
    assert!((total - 1.0).abs() < 1.0 / 200.0);
    assert!(r.rows.iter().all(|row| (0.0..=1.0).contains(&row.phi_bar)));
    assert_eq!(r, selection_distribution(&s, &c, n, &spec, 200, 3, false).unwrap());

    let renorm = selection_distribution(&s, &c, n, &spec, 200, 3, true).unwrap();
    assert!((renorm.rows.iter().map(|row| row.phi_bar).sum::<f64>() - 1.0).abs() < 1e-12);

    let one = selection_distribution(&s, &c, n, &spec, 1, 9, false).unwrap();
    let masses: Vec<f64> = one.rows.iter().map(|row| row.freq).filter(|&f| f > 0.0).collect();
    assert_eq!(masses, vec![1.0]);
    assert!(selection_distribution(&s, &c, n, &spec, 0, 9, false).is_err());
    let uneven: CriterionSpec = "vfcv:V=3".parse().unwrap();
    assert!(selection_distribution(&s, &c, n, &uneven, 10, 9, false).is_err());
    assert!(selection_distribution(&s, &c, n, &"holdout".parse().unwrap(), 10, 9, false).is_err());
}

#[test]
fn selection_ignores_a_common_offset() {
    let s = TrueDensity::setting(Setting::S);
    let n = 100;
    let c = regu_collection(30).unwrap();
    let spec: CriterionSpec = "vfcv:V=10".parse().unwrap();
    let mut plain = vec![0usize; c.len()];
    let mut shifted = vec![0usize; c.len()];
    for seed in 0..100 {
        let sample = s.sample(n, 500 + seed).unwrap();
        let mut table = compute_table(&spec, &sample, &c, None).unwrap();
        plain[select(&table, &c).unwrap()] += 1;
        table.values.iter_mut().for_each(|v| *v += s.l2_norm_sq());
        shifted[select(&table, &c).unwrap()] += 1;
    }
    assert_eq!(plain, shifted);
    let counts = selection_counts(&s, &c, n, &spec, 100, 77).unwrap();
    assert_eq!(counts.iter().sum::<usize>(), 100);
}
