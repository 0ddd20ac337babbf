//! Thresholding, morphology and an augmentation chain on one eye image.
use iscreen::detect::{extract_features, DetectorConfig};
use iscreen::preprocess::{augment, binary_threshold, morphology, AugmentOp, AugmentSpec, MorphOp, Polarity};
use iscreen::synth::{render_eye_frame, SyntheticScene};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frame = render_eye_frame(&SyntheticScene {
        noise_sigma: 8.0,
        rng_seed: 3,
        ..SyntheticScene::reference()
    })?;
    let dark = binary_threshold(&frame, 64, Polarity::KeepBelow);
    println!("dark pixels {}", dark.count());
    for (op, k) in [(MorphOp::Erode, 3), (MorphOp::Dilate, 3), (MorphOp::Open, 3), (MorphOp::Close, 5)] {
        println!("{op:?} k={k}: {}", morphology(&dark, op, k)?.count());
    }

    let cfg = DetectorConfig::default();
    let base = extract_features(&frame, &cfg).vector.expect("clean frame detects");
    println!("vector {base:?}");
    let ops = [
        AugmentOp::Brightness { delta: 20 },
        AugmentOp::Brightness { delta: 40 },
        AugmentOp::Contrast { gain: 1.2 },
        AugmentOp::Blur { radius: 1 },
        AugmentOp::Sharpen,
        AugmentOp::Open { k: 3 },
    ];
    for op in ops {
        let spec = AugmentSpec::new(vec![op.clone()]);
        match extract_features(&augment(&frame, &spec)?, &cfg).vector {
            Some(v) => println!("{:<45} shift {:.3} px", serde_json::to_string(&op)?, (v.du - base.du).hypot(v.dv - base.dv)),
            None => println!("{:<45} lost", serde_json::to_string(&op)?),
        }
    }

    let flipped = augment(&frame, &AugmentSpec::new(vec![AugmentOp::FlipH]))?;
    println!("flip moves the glint: {:?}", extract_features(&flipped, &cfg).vector);
    Ok(())
}
