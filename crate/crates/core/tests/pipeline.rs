use nalgebra::DVector;
use surfpde::discovery::{discover_evolution, discover_stationary, read_model, write_model};
use surfpde::geometry::{read_point_cloud, write_point_cloud};
use surfpde::recipes::{self, NormalMode};
use surfpde::solver::{relative_l2, solve_evolution, solve_stationary, DEFAULT_MAX_NEWTON, DEFAULT_TOL};
use surfpde::{build_operators, ForwardProblem, KernelSpec, RegressionSettings};

#[test]
fn stationary_model_survives_files_and_solves() {
    let dir = tempfile::tempdir().unwrap();
    let data = recipes::ex1_sphere(200, NormalMode::Analytic, 0.0, 0).unwrap();
    let kernel = KernelSpec::matern(3, 1, 4.0).unwrap();
    let model =
        discover_stationary(&data.cloud, &data.samples, &data.forcing, &kernel, 2, &RegressionSettings::lasso(0.01))
            .unwrap();
    assert_eq!(model.support_labels().len(), 2);

    write_point_cloud(&dir.path().join("cloud.csv"), &data.cloud).unwrap();
    write_model(dir.path().join("model.txt"), &model).unwrap();
    let cloud = read_point_cloud(&dir.path().join("cloud.csv")).unwrap();
    let back = read_model(dir.path().join("model.txt")).unwrap();
    assert_eq!(back.coefficients, model.coefficients);
    assert_eq!(cloud.len(), data.cloud.len());

    let ops = build_operators(&cloud, &back.kernel).unwrap();
    let u = solve_stationary(
        &ForwardProblem::stationary(&back, &ops, &data.forcing).unwrap(),
        DEFAULT_TOL,
        DEFAULT_MAX_NEWTON,
    )
    .unwrap();
    assert!(relative_l2(&u, &data.clean).unwrap() < 1e-3);
}

#[test]
fn learned_evolution_tracks_its_training_data() {
    let snaps = recipes::ex2_sphere(200, 0.01, 20, 0.0, 3).unwrap();
    let kernel = KernelSpec::matern(3, 1, 4.0).unwrap();
    let model = discover_evolution(&snaps, &kernel, 2, &RegressionSettings::lasso(0.01)).unwrap();
    let mut labels = model.support_labels();
    labels.sort_unstable();
    assert_eq!(labels, ["u²", "Δ_S u"]);

    let ops = build_operators(snaps.cloud(), &kernel).unwrap();
    let u0: DVector<f64> = snaps.values().column(0).into_owned();
    let problem = ForwardProblem::evolution(&model, &ops, &u0, 0.01, 20, snaps.forcing().clone()).unwrap();
    let trajectory = solve_evolution(&problem).unwrap();
    let last = trajectory.values.column(20).into_owned();
    let truth = snaps.values().column(20).into_owned();
    assert!(relative_l2(&last, &truth).unwrap() < 1e-3);
}
