use ricci_core::geometry::{GeometryModel, Point};
use ricci_core::lsi::{mu_local, nu_local, MuOptions, NuOptions, Region};

#[test]
fn euclidean_mu_is_stable_under_refinement() {
    let values: Vec<f64> = [256, 512]
        .iter()
        .map(|&nodes| {
            let e = GeometryModel::euclidean(3, 20.0, nodes).build(0.0).unwrap().1;
            let ball = Region::ball(&e, Point::North, 15.0).unwrap();
            mu_local(&e, &ball, 1.0, &MuOptions::default(), None).unwrap().value
        })
        .collect();
    assert!((values[0] - values[1]).abs() < 1e-2, "{values:?}");
}

#[test]
fn euclidean_nu_vanishes_across_scales() {
    let e = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap().1;
    let ball = Region::ball(&e, Point::North, 15.0).unwrap();
    let mut previous = f64::INFINITY;
    for tau in [0.25, 1.0, 4.0] {
        let nu = nu_local(&e, &ball, tau, &NuOptions::default(), &MuOptions::default()).unwrap();
        assert!(nu.converged);
        assert!(nu.value.abs() < 1e-2, "ν({tau}) = {}", nu.value);
        assert!(nu.value <= previous + 1e-6 || previous.is_infinite() || nu.value.abs() < 1e-2);
        previous = nu.value;
    }
}
