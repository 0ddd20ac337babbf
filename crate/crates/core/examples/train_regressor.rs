//! Ridge and MLP regressors on a generated dataset with augmented copies.
use iscreen::calibrate::{FeatureRecipe, MlpConfig, RegressorVariant};
use iscreen::detect::DetectorConfig;
use iscreen::io::{train_regressor, Dataset, GenerateConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let cfg = GenerateConfig::from_json(
        r#"{"seed": 4, "noise_sigma": 2.0, "segments": [{"kind": "calibration"}], "augment": {}}"#,
    )?;
    iscreen::io::generate(&cfg, dir.path())?;
    let ds = Dataset::open(dir.path())?;

    let recipe = FeatureRecipe { degree: 2, pupil_radius: false };
    let detector = DetectorConfig::default();
    for lambda in [1e-3, 1.0, 100.0] {
        let t = train_regressor(&ds, &detector, recipe, lambda, RegressorVariant::Linear)?;
        println!(
            "ridge lambda {lambda:>7}: {} samples ({} augmented), rms {:.2} px",
            t.samples,
            t.augmented,
            t.model.training.final_loss.sqrt()
        );
    }
    let mlp = RegressorVariant::Mlp(MlpConfig { epochs: 500, ..MlpConfig::default() });
    let t = train_regressor(&ds, &detector, recipe, 1e-3, mlp)?;
    println!("mlp: objective {:.4} (normalized units) over {} samples", t.model.training.final_loss, t.samples);
    Ok(())
}
