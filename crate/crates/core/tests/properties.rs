use proptest::prelude::*;

use iscreen::calibrate::{
    fit_affine_cross, fit_regressor, CalibrationSample, FeatureRecipe, RegressorModel, RegressorVariant,
};
use iscreen::detect::{extract_features, DetectorConfig, GazeVector};
use iscreen::frame::{BinaryMask, Frame, Point};
use iscreen::preprocess::{augment, binary_threshold, morphology, AugmentOp, AugmentSpec, MorphOp, Polarity};
use iscreen::screen::{ScreenPoint, ScreenSize};
use iscreen::synth::{render_eye_frame, SyntheticScene};

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    (1usize..24, 1usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::bool::weighted(0.55), w * h)
            .prop_map(move |bits| BinaryMask::new(w, h, bits).unwrap())
    })
}

fn frame_strategy() -> impl Strategy<Value = Frame> {
    (1usize..24, 1usize..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |p| Frame::new(w, h, p).unwrap())
    })
}

fn kernel() -> impl Strategy<Value = usize> {
    prop_oneof![Just(3usize), Just(5), Just(7)]
}

fn op(m: &BinaryMask, op: MorphOp, k: usize) -> BinaryMask {
    morphology(m, op, k).unwrap()
}

/// Default-size eye with the pupil somewhere inside the frame interior.
fn eye(cx: f64, cy: f64, gx: f64, gy: f64) -> SyntheticScene {
    SyntheticScene {
        width: 160,
        height: 120,
        background_intensity: 170,
        iris_center: Point::new(cx, cy),
        iris_radius: 30.0,
        iris_intensity: 100,
        pupil_center: Point::new(cx, cy),
        pupil_radius: 12.0,
        pupil_intensity: 15,
        glint_offset: Point::new(gx, gy),
        glint_radius: 2.0,
        glint_intensity: 245,
        secondary_glint_offset: None,
        eyelid_closure: 0.0,
        noise_sigma: 0.0,
        rng_seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dilate_grows_and_erode_shrinks(m in mask_strategy(), k in kernel()) {
        prop_assert!(m.is_subset_of(&op(&m, MorphOp::Dilate, k)));
        prop_assert!(op(&m, MorphOp::Erode, k).is_subset_of(&m));
        prop_assert!(op(&m, MorphOp::Open, k).is_subset_of(&m));
        // Erosion treats out-of-bounds as unset, so closing only keeps pixels
        // whose whole window is inside the frame.
        let r = k / 2;
        let closed = op(&m, MorphOp::Close, k);
        for (x, y) in m.iter_set() {
            if x >= r && y >= r && x + r < m.width() && y + r < m.height() {
                prop_assert!(closed.get(x, y));
            }
        }
    }

    #[test]
    fn open_and_close_are_idempotent(m in mask_strategy(), k in kernel()) {
        for o in [MorphOp::Open, MorphOp::Close] {
            let once = op(&m, o, k);
            prop_assert_eq!(op(&once, o, k), once);
        }
    }

    #[test]
    fn morphology_is_monotone(a in mask_strategy(), drop in prop::collection::vec(any::<bool>(), 480), k in kernel()) {
        // b is a subset of a.
        let b = BinaryMask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) && !drop[y * a.width() + x]);
        for o in [MorphOp::Dilate, MorphOp::Erode, MorphOp::Open, MorphOp::Close] {
            prop_assert!(op(&b, o, k).is_subset_of(&op(&a, o, k)), "{o:?}");
        }
    }

    #[test]
    fn threshold_is_monotone(f in frame_strategy(), t1 in any::<u8>(), t2 in any::<u8>()) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(binary_threshold(&f, lo, Polarity::KeepBelow).is_subset_of(&binary_threshold(&f, hi, Polarity::KeepBelow)));
        prop_assert!(binary_threshold(&f, hi, Polarity::KeepAbove).is_subset_of(&binary_threshold(&f, lo, Polarity::KeepAbove)));
        let below = binary_threshold(&f, lo, Polarity::KeepBelow);
        let above = binary_threshold(&f, lo, Polarity::KeepAbove);
        prop_assert_eq!(below.count() + above.count(), f.width() * f.height());
    }

    #[test]
    fn detection_is_translation_equivariant(
        cx in 50.0..110.0f64, cy in 45.0..75.0f64,
        gx in -6.0..6.0f64, gy in -6.0..6.0f64,
        dx in -8i32..8, dy in -8i32..8,
    ) {
        let cfg = DetectorConfig::default();
        let s = eye(cx, cy, gx, gy);
        let t = s.translated(Point::new(f64::from(dx), f64::from(dy)));
        let a = extract_features(&render_eye_frame(&s).unwrap(), &cfg);
        let b = extract_features(&render_eye_frame(&t).unwrap(), &cfg);
        let (pa, pb) = (a.pupil.unwrap().center, b.pupil.unwrap().center);
        prop_assert!((pb.x - pa.x - f64::from(dx)).abs() < 1e-6 && (pb.y - pa.y - f64::from(dy)).abs() < 1e-6);
        let (va, vb) = (a.vector.unwrap(), b.vector.unwrap());
        prop_assert!((va.du - vb.du).abs() < 1e-6 && (va.dv - vb.dv).abs() < 1e-6);
    }

    #[test]
    fn brightness_shift_barely_moves_the_vector(
        cx in 50.0..110.0f64, cy in 45.0..75.0f64,
        gx in -6.0..6.0f64, gy in -6.0..6.0f64,
    ) {
        let cfg = DetectorConfig::default();
        let frame = render_eye_frame(&eye(cx, cy, gx, gy)).unwrap();
        let brighter = augment(&frame, &AugmentSpec::new(vec![AugmentOp::Brightness { delta: 20 }])).unwrap();
        let a = extract_features(&frame, &cfg).vector.unwrap();
        let b = extract_features(&brighter, &cfg).vector.unwrap();
        prop_assert!((a.du - b.du).hypot(a.dv - b.dv) < 0.3, "{a:?} vs {b:?}");
    }

    #[test]
    fn rendering_is_deterministic(cx in 50.0..110.0f64, cy in 45.0..75.0f64, seed in any::<u64>()) {
        let mut s = eye(cx, cy, 2.0, -1.0);
        s.noise_sigma = 4.0;
        s.rng_seed = seed;
        prop_assert_eq!(render_eye_frame(&s).unwrap(), render_eye_frame(&s).unwrap());
    }

    #[test]
    fn least_squares_fit_is_optimal(
        vs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -30.0..30.0f64, -30.0..30.0f64), 5..12),
        which in 0usize..8, sign in prop_oneof![Just(1.0f64), Just(-1.0)],
    ) {
        let screen = ScreenSize::new(1080, 1920);
        let samples: Vec<CalibrationSample> = vs
            .iter()
            .map(|&(du, dv, ex, ey)| CalibrationSample {
                vector: GazeVector::new(du, dv),
                target: ScreenPoint::new(540.0 + 100.0 * du + ex, 960.0 + 200.0 * dv + ey),
            })
            .collect();
        let Ok(m) = fit_affine_cross(&samples, screen) else { return Ok(()) };
        let base = m.sum_squared_residuals(&samples);
        let mut p = m.clone();
        if which < 4 { p.x[which] += sign * 1e-3 } else { p.y[which - 4] += sign * 1e-3 }
        prop_assert!(p.sum_squared_residuals(&samples) >= base - 1e-9 * base.max(1.0));
    }

    #[test]
    fn ridge_shrinks_weights(
        vs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 12..30),
        l1 in 0.0..10.0f64, l2 in 0.0..10.0f64,
    ) {
        let recipe = FeatureRecipe { degree: 2, pupil_radius: false };
        let data: Vec<_> = vs
            .iter()
            .map(|&(du, dv)| {
                let v = GazeVector::new(du, dv);
                let target = ScreenPoint::new(540.0 + 90.0 * du + 3.0 * du * du, 960.0 + 180.0 * dv - 2.0 * du * dv);
                (recipe.features(v, None).unwrap(), target)
            })
            .collect();
        let (lo, hi) = (l1.min(l2) + 1e-6, l1.max(l2) + 1e-6);
        let norm = |lambda: f64| {
            let m = fit_regressor(&data, lambda, RegressorVariant::Linear, ScreenSize::new(1080, 1920)).unwrap();
            let RegressorModel::Linear { weights, .. } = &m.model else { unreachable!() };
            (weights.iter().map(|w| w * w).sum::<f64>(), m.training.final_loss)
        };
        let (n_lo, e_lo) = norm(lo);
        let (n_hi, e_hi) = norm(hi);
        prop_assert!(n_hi <= n_lo * (1.0 + 1e-9) + 1e-12, "{n_hi} > {n_lo}");
        prop_assert!(e_hi >= e_lo * (1.0 - 1e-9) - 1e-12, "{e_hi} < {e_lo}");
    }
}
