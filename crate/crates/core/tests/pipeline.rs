use tempfile::tempdir;

use tomolab::estimate::{lsq_estimate, mle_estimate, EstimatorOptions};
use tomolab::povm::{build_named, load_povm, save_povm};
use tomolab::qcore::{fidelity_pure, haar_random_state, rng_stream};
use tomolab::simulate::{prepare_state, ErrorModel, MeasurementRecord, MeasurementRun};

#[test]
fn noiseless_data_from_saved_povm_recovers_state() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("gmb.json");
    save_povm(&build_named("gmb", 4).unwrap(), &path).unwrap();
    let povm = load_povm(&path).unwrap();

    let model = ErrorModel::noiseless();
    let run = MeasurementRun::new(&povm, &model, 3, &[0]).unwrap();
    for i in 0..5u64 {
        let psi = haar_random_state(4, &mut rng_stream(3, &[1, i]));
        let rec = run.measure(&psi.projector(), &mut rng_stream(3, &[2, i])).unwrap();
        let rec_path = dir.path().join(format!("rec{i}.json"));
        rec.save(&rec_path).unwrap();
        let rec = MeasurementRecord::load(&rec_path).unwrap();
        let est = mle_estimate(&rec, &povm, &EstimatorOptions::default()).unwrap();
        assert!(est.converged);
        assert!(1.0 - fidelity_pure(&psi, &est.rho_hat).unwrap() < 1e-8);
    }
}

#[test]
fn noisy_pipeline_gives_valid_states_and_sensible_errors() {
    let povm = build_named("mub", 4).unwrap();
    let model = ErrorModel::default();
    let run = MeasurementRun::new(&povm, &model, 11, &[0]).unwrap();
    let opts = EstimatorOptions::default();
    let mut mle_sum = 0.0;
    let n = 20u64;
    for i in 0..n {
        let psi = haar_random_state(4, &mut rng_stream(11, &[1, i]));
        let rho = prepare_state(&psi, &model, &mut rng_stream(11, &[2, i])).unwrap();
        let rec = run.measure(&rho, &mut rng_stream(11, &[3, i])).unwrap();
        let mle = mle_estimate(&rec, &povm, &opts).unwrap();
        let lsq = lsq_estimate(&rec, &povm, &opts).unwrap();
        mle.rho_hat.check().unwrap();
        lsq.rho_hat.check().unwrap();
        let inf = 1.0 - fidelity_pure(&psi, &mle.rho_hat).unwrap();
        assert!((0.0..0.5).contains(&inf), "infidelity {inf}");
        mle_sum += inf;
    }
    let mean = mle_sum / n as f64;
    assert!(mean > 1e-3 && mean < 0.2, "mean infidelity {mean}");
}

#[test]
fn estimate_rejects_record_from_other_povm() {
    let mub = build_named("mub", 4).unwrap();
    let sic = build_named("sic", 4).unwrap();
    let run = MeasurementRun::new(&mub, &ErrorModel::noiseless(), 0, &[]).unwrap();
    let psi = haar_random_state(4, &mut rng_stream(0, &[1]));
    let rec = run.measure(&psi.projector(), &mut rng_stream(0, &[2])).unwrap();
    assert!(mle_estimate(&rec, &sic, &EstimatorOptions::default()).is_err());
}
