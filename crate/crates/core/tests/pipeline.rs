use std::path::Path;

use memloss::coupling::{check_stail_bound, s_tail_dp, CouplingConstants, CouplingModel, HFamily, ModelConfig, TailFamily};
use memloss::partitions::{lsv_preimage_points, EndpointData};
use memloss::tail::tail_csv;
use memloss::*;

/// `μ(τ ≥ n)` for `dμ = (1 - γ) x^{-γ} dx`, built from the exact cell endpoints.
fn singular_measure_tail(gamma: f64, n_max: usize) -> TailTable {
    let seq = ParamSequence::constant(MapParams::lsv(gamma)).unwrap();
    let ep = lsv_preimage_points(&seq, 1, n_max).unwrap();
    let EndpointData::Lsv { x, y_offset } = &ep.data else { unreachable!() };
    let e = 1.0 - gamma;
    let vals = (0..=n_max)
        .map(|n| if n == 0 { 1.0 } else { x[n].powf(e) + (0.5 + y_offset[n]).powf(e) - 0.5f64.powf(e) })
        .collect();
    TailTable::new(TailLabel::R, 1, vals).unwrap()
}

fn lsv_family(n_max: usize) -> TailFamily {
    let seq = ParamSequence::constant(MapParams::lsv(0.5)).unwrap();
    let h = return_time_tail(&seq, 1, n_max, TailBase::Mk).unwrap();
    let r = singular_measure_tail(0.5, n_max);
    let c_beta = (1..=n_max).map(|n| (n as f64).powi(2) * h[n]).fold(1.0, f64::max);
    let c_beta_prime = (1..=n_max).map(|n| n as f64 * r[n]).fold(1.0, f64::max);
    TailFamily::new(1, r, HFamily::Uniform(h), 2.0, 1.0, c_beta, c_beta_prime, vec![]).unwrap()
}

#[test]
fn singular_measure_tail_has_order_one() {
    let r = singular_measure_tail(0.5, 4000);
    let slope = fit_power_law(&r, 100, 4000).unwrap().slope;
    assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn lsv_tails_give_a_finite_plateau() {
    let n_max = 1000;
    let fam = lsv_family(n_max);
    let model = CouplingModel::new(CouplingConstants::synthetic(0.25, 1).unwrap(), &fam).unwrap();
    let t = s_tail_dp(&model, n_max).unwrap();
    let b = check_stail_bound(&t, 1.0, fam.theta_star(), 1);
    assert!(b.sup_ratio.is_finite());
    assert!(b.plateau, "sup at n = {}", b.argmax_n);
    let slope = fit_power_law(&t, 100, n_max).unwrap().slope;
    assert!(slope <= -0.9, "slope {slope}");
}

#[test]
fn file_tails_match_in_memory_model() {
    let n_max = 300;
    let fam = lsv_family(n_max);
    let dir = std::env::temp_dir().join(format!("memloss-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let HFamily::Uniform(h) = &fam.h else { unreachable!() };
    std::fs::write(dir.join("h.csv"), tail_csv(h)).unwrap();
    std::fs::write(dir.join("r.csv"), tail_csv(&fam.r)).unwrap();
    let cfg = ModelConfig::from_json(&format!(
        r#"{{"theta": 0.25, "n0": 1, "beta": 2, "beta_prime": 1, "C_beta": {}, "C_beta_prime": {}, "Theta": [],
            "tails": "file:h.csv", "r_tails": "file:r.csv"}}"#,
        fam.c_beta, fam.c_beta_prime
    ))
    .unwrap();
    let (_, from_file) = cfg.build(n_max, &dir).unwrap();
    let direct = CouplingModel::new(CouplingConstants::synthetic(0.25, 1).unwrap(), &fam).unwrap();
    assert_eq!(s_tail_dp(&from_file, n_max).unwrap(), s_tail_dp(&direct, n_max).unwrap());
    let missing = ModelConfig::from_json(r#"{"beta": 2, "beta_prime": 1, "tails": "file:nope.csv"}"#).unwrap();
    assert!(missing.build(10, Path::new(&dir)).is_err());
    std::fs::remove_dir_all(&dir).ok();
}
