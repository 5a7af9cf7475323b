//! Row-profile fitting on noisy and obstructed scenes.

use freespace_flow::*;

/// Largest noise standard deviation (pixels) the fit is expected to absorb.
const ROBUSTNESS_SIGMA: f64 = 1.0;

fn kitti_like() -> (CameraIntrinsics, MountConfig) {
    (
        CameraIntrinsics::new(721.5377, 721.5377, 609.5593, 172.854).unwrap(),
        MountConfig::new(1.65, 0.0).unwrap(),
    )
}

fn clean_scene(z_d: f64) -> FlowMap {
    let (k, m) = kitti_like();
    let model = FlowModel::Simplest(SimplestMotion::Displacement { z_d });
    render_flow_map(1242, 375, None, &model, &k, &m).unwrap()
}

fn fit(map: &FlowMap, mask: Option<&FreespaceMask>) -> CurveFit {
    let (k, _) = kitti_like();
    let rp = row_projection(map, mask, &ProjectionParams::default()).unwrap();
    fit_fv_curve(&rp, &k, CurveKind::RationalDisplacement).unwrap()
}

fn fitted_k(f: &CurveFit) -> f64 {
    match f.params {
        CurveParams::RationalDisplacement { k, .. } => k,
        ref other => panic!("unexpected {other:?}"),
    }
}

fn max_error_vs(clean: &FlowMap, f: &CurveFit) -> f64 {
    let fitted = render_fitted_fv(f, clean.width, clean.height);
    (0..clean.len())
        .filter(|&i| clean.valid[i] && fitted.valid[i])
        .map(|i| (clean.fv[i] - fitted.fv[i]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn noise_up_to_robustness_level() {
    let (k, m) = kitti_like();
    let z_d = 1.2;
    let truth = z_d / (m.h * k.fy);
    let clean = clean_scene(z_d);
    for sigma in [0.125, 0.25, 0.5, ROBUSTNESS_SIGMA] {
        for seed in 0..3 {
            let noisy = add_noise(&clean, &NoiseSpec { sigma, seed }).unwrap();
            let f = fit(&noisy, None);
            let drift = (fitted_k(&f) - truth).abs() / truth;
            let err = max_error_vs(&clean, &f);
            assert!(
                drift < 0.01,
                "sigma {sigma} seed {seed}: k drift {drift:.4}"
            );
            assert!(
                err < 1.0,
                "sigma {sigma} seed {seed}: fitted error {err:.3} px"
            );
        }
    }
}

#[test]
fn obstacle_is_segmented_out() {
    let (k, m) = kitti_like();
    let z_d = 1.0;
    let clean = clean_scene(z_d);
    // a vehicle ahead, moving relative to the road
    let rect = Rect {
        u: 500,
        v: 190,
        width: 240,
        height: 60,
    };
    let (observed, truth_mask) = insert_obstacle(&clean, rect, FlowVector::new(0.0, -3.0)).unwrap();
    let f = fit(&observed, None);
    let drift = (fitted_k(&f) - z_d / (m.h * k.fy)).abs() / (z_d / (m.h * k.fy));
    assert!(drift < 0.01, "k drift {drift:.4}");

    let fitted = render_fitted_fv(&f, observed.width, observed.height);
    let free = segment_freespace(&observed, &fitted, 1.0).unwrap();
    let (mut obstacle_hits, mut obstacle_px) = (0, 0);
    for v in rect.v..rect.v + rect.height {
        for u in rect.u..rect.u + rect.width {
            obstacle_px += 1;
            obstacle_hits += usize::from(free.get(u, v));
        }
    }
    assert!(
        obstacle_hits == 0,
        "{obstacle_hits}/{obstacle_px} obstacle pixels labelled free"
    );
    let road_ok = (0..observed.len())
        .filter(|&i| truth_mask.mask[i] && observed.valid[i])
        .filter(|&i| free.mask[i])
        .count();
    let road = (0..observed.len())
        .filter(|&i| truth_mask.mask[i] && observed.valid[i])
        .count();
    assert!(
        road_ok as f64 > 0.99 * road as f64,
        "{road_ok}/{road} road pixels kept"
    );
}
