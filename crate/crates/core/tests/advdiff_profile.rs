use kmr_core::problems::{advdiff_simulate, AdvDiffConfig};

#[test]
fn boundary_layer_profile_along_x_075() {
    let cfg = AdvDiffConfig::reference(64, 1e-3);
    let set = advdiff_simulate(&cfg).unwrap();
    assert_eq!(set.len(), 501);
    let n = cfg.n_per_axis;
    let h = cfg.spacing();
    let i = (0.75 / h).round() as usize - 1;
    let last = set.states().column(set.len() - 1);
    let profile: Vec<f64> = (0..n).map(|j| last[i + n * j]).collect();

    let (peak, &max) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert!(max > 0.0);
    // Rises monotonically to one interior maximum next to the y = 1 wall.
    assert!(profile[..=peak].windows(2).all(|w| w[1] >= w[0]), "{profile:?}");
    assert!(profile[peak..].windows(2).all(|w| w[1] <= w[0]), "{profile:?}");
    assert!(peak > 0 && peak < n - 1);
    let y_peak = (peak + 1) as f64 * h;
    assert!(y_peak > 0.85, "peak at y = {y_peak}");
    // The wall-adjacent node already sits on the falling side.
    assert!(profile[n - 1] < max);
}
