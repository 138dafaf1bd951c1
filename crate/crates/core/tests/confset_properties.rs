use rjar_core::confset::{cartesian_grid, linear_grid};
use rjar_core::montecarlo::{draw_replication, Design, SimConfig};
use rjar_core::{
    invert, partial_and_standardise, select_gamma, Dataset, Inverter, RidgeKernel, TestKind, TestOptions,
};

fn sample(k: usize, mu2: f64, rep: usize) -> Dataset {
    let cfg = SimConfig { k, mu2, design: Design::Dense, seed: 21, ..SimConfig::default() };
    let rep = draw_replication(&cfg, rep).unwrap();
    Dataset::new(rep.y, rep.x, rep.z, None).unwrap()
}

#[test]
fn shared_factorisation_matches_fresh_computation() {
    let data = sample(60, 50.0, 0);
    let pd = partial_and_standardise(&data).unwrap();
    let kern = RidgeKernel::new(&pd.z).unwrap();
    let sel = select_gamma(&kern, 1.0).unwrap();
    let grid: Vec<Vec<f64>> = linear_grid(-1.0, 3.0, 17).unwrap().into_iter().map(|b| vec![b]).collect();
    for test in TestKind::ALL {
        let set = invert(&pd, &kern, &sel, test, &grid, 0.05, TestOptions::default()).unwrap();
        for (b, shared) in grid.iter().zip(&set.results) {
            let fresh_kern = RidgeKernel::new(&pd.z).unwrap();
            let fresh_sel = select_gamma(&fresh_kern, 1.0).unwrap();
            let fresh = Inverter::new(&pd, &fresh_kern, &fresh_sel, test, 0.05, TestOptions::default())
                .unwrap()
                .evaluate(b)
                .unwrap();
            assert_eq!(shared.statistic.to_bits(), fresh.statistic.to_bits(), "{test} at {b:?}");
            assert_eq!(shared.reject, fresh.reject);
        }
    }
}

#[test]
fn refining_the_grid_keeps_decisions_at_shared_points() {
    let data = sample(150, 120.0, 1);
    let pd = partial_and_standardise(&data).unwrap();
    let kern = RidgeKernel::new(&pd.z).unwrap();
    let sel = select_gamma(&kern, 1.0).unwrap();
    let coarse: Vec<Vec<f64>> = linear_grid(-2.0, 4.0, 31).unwrap().into_iter().map(|b| vec![b]).collect();
    let fine: Vec<Vec<f64>> = linear_grid(-2.0, 4.0, 61).unwrap().into_iter().map(|b| vec![b]).collect();
    for test in [TestKind::Rjar, TestKind::SupScore] {
        let a = invert(&pd, &kern, &sel, test, &coarse, 0.05, TestOptions::default()).unwrap();
        let b = invert(&pd, &kern, &sel, test, &fine, 0.05, TestOptions::default()).unwrap();
        for i in 0..coarse.len() {
            assert_eq!(fine[2 * i], coarse[i]);
            assert_eq!(a.accepted[i], b.accepted[2 * i], "{test} at {:?}", coarse[i]);
        }
        let covered: usize = a.components.iter().map(|r| r.len()).sum();
        assert_eq!(covered, a.accepted.iter().filter(|&&x| x).count());
    }
}

#[test]
fn true_value_is_usually_covered() {
    let grid = vec![vec![1.0]];
    let mut covered = 0;
    let draws = 60;
    for rep in 0..draws {
        let data = sample(90, 180.0, rep);
        let pd = partial_and_standardise(&data).unwrap();
        let kern = RidgeKernel::new(&pd.z).unwrap();
        let sel = select_gamma(&kern, 1.0).unwrap();
        let set = invert(&pd, &kern, &sel, TestKind::Rjar, &grid, 0.05, TestOptions::default()).unwrap();
        covered += set.accepted[0] as usize;
    }
    // Nominal coverage 0.95; 50 of 60 sits several standard errors below it.
    assert!(covered >= 50, "covered {covered} of {draws}");
}

#[test]
fn two_dimensional_grids_are_row_major() {
    let g = cartesian_grid(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
    assert_eq!(g.len(), 6);
    assert_eq!(g[1], vec![0.0, 6.0]);
    assert_eq!(g[3], vec![1.0, 5.0]);
}
