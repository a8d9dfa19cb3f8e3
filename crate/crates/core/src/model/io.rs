//! Self-describing text format for trained predictors.
//!
//! The file bundles the feature recipe with the weights so a saved model can
//! be applied without any out-of-band knowledge. Floats are written in
//! Rust's shortest round-trip form, so save followed by load reproduces the
//! model bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::mlp::{Layer, MlpModel, OUTPUT_DIM};
use super::{FeatureSpec, ModelError, Variant};
use crate::matrix::Matrix;

const MAGIC: &str = "mlp v1";

pub fn save_model(model: &MlpModel, spec: &FeatureSpec, path: &Path) -> Result<(), ModelError> {
    if spec.input_dim() != model.input_dim {
        return Err(ModelError::DimensionMismatch {
            detail: format!(
                "feature recipe produces {} inputs, model takes {}",
                spec.input_dim(),
                model.input_dim
            ),
        });
    }
    let mut text = String::new();
    let _ = writeln!(text, "{MAGIC}");
    let _ = writeln!(text, "variant {}", spec.variant.as_str());
    let _ = writeln!(text, "duration_mean {}", spec.duration_mean);
    let _ = writeln!(text, "duration_std {}", spec.duration_std);
    match spec.id_space {
        Some(v) => drop(writeln!(text, "id_space {v}")),
        None => drop(writeln!(text, "id_space none")),
    }
    match spec.k {
        Some(v) => drop(writeln!(text, "k {v}")),
        None => drop(writeln!(text, "k none")),
    }
    let _ = writeln!(text, "input_dim {}", model.input_dim);
    let widths: Vec<String> = model.hidden.iter().map(usize::to_string).collect();
    let _ = writeln!(text, "hidden {}", widths.join(" "));
    let _ = writeln!(text, "seed {}", model.seed);
    for (i, layer) in model.layers.iter().enumerate() {
        let _ = writeln!(text, "layer {i} weights");
        for r in 0..layer.w.rows() {
            let row: Vec<String> = layer.w.row(r).iter().map(f64::to_string).collect();
            let _ = writeln!(text, "{}", row.join(" "));
        }
        let _ = writeln!(text, "layer {i} biases");
        let row: Vec<String> = layer.b.iter().map(f64::to_string).collect();
        let _ = writeln!(text, "{}", row.join(" "));
    }
    let _ = writeln!(text, "end");
    std::fs::write(path, text)
        .map_err(|e| ModelError::ModelFile { path: path.to_path_buf(), detail: e.to_string() })
}

pub fn load_model(path: &Path) -> Result<(MlpModel, FeatureSpec), ModelError> {
    let fail = |detail: String| ModelError::ModelFile { path: path.to_path_buf(), detail };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str), ModelError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| fail(format!("file ends before {what}")))
    };

    let (_, magic) = next("header")?;
    if magic != MAGIC {
        return Err(fail(format!("expected {MAGIC:?}, found {magic:?}")));
    }
    let mut field = |key: &str| -> Result<String, ModelError> {
        let (line_no, line) = next(key)?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or(Some(rest).filter(|r| r.is_empty())))
            .map(str::to_string)
            .ok_or_else(|| fail(format!("line {line_no}: expected {key:?}")))
    };

    let variant: Variant = field("variant")?.parse().map_err(|_| fail("bad variant".into()))?;
    let parse_f64 = |name: &str, v: String| -> Result<f64, ModelError> {
        v.parse().map_err(|_| fail(format!("{name} {v:?} is not a number")))
    };
    let duration_mean = field("duration_mean").and_then(|v| parse_f64("duration_mean", v))?;
    let duration_std = field("duration_std").and_then(|v| parse_f64("duration_std", v))?;
    let id_space = match field("id_space")?.as_str() {
        "none" => None,
        v => Some(v.parse::<u32>().map_err(|_| fail(format!("bad id_space {v:?}")))?),
    };
    let k = match field("k")?.as_str() {
        "none" => None,
        v => Some(v.parse::<usize>().map_err(|_| fail(format!("bad k {v:?}")))?),
    };
    let input_dim: usize =
        field("input_dim")?.parse().map_err(|_| fail("bad input_dim".into()))?;
    let hidden: Vec<usize> = field("hidden")?
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| fail(format!("bad hidden width {w:?}"))))
        .collect::<Result<_, _>>()?;
    let seed: u64 = field("seed")?.parse().map_err(|_| fail("bad seed".into()))?;

    let spec = FeatureSpec { variant, duration_mean, duration_std, id_space, k };
    if spec.input_dim() != input_dim {
        return Err(fail(format!(
            "feature recipe produces {} inputs, weights take {input_dim}",
            spec.input_dim()
        )));
    }

    let parse_row = |line_no: usize, line: &str, want: usize| -> Result<Vec<f64>, ModelError> {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| fail(format!("line {line_no}: {v:?} is not a number")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != want {
            return Err(fail(format!("line {line_no}: {} values, expected {want}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(fail(format!("line {line_no}: non-finite weight")));
        }
        Ok(row)
    };

    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input_dim;
    for (li, &fan_out) in hidden.iter().chain(std::iter::once(&OUTPUT_DIM)).enumerate() {
        let (line_no, marker) = next("layer weights marker")?;
        if marker != format!("layer {li} weights") {
            return Err(fail(format!("line {line_no}: expected layer {li} weights")));
        }
        let mut w = Matrix::zeros(fan_out, fan_in);
        for r in 0..fan_out {
            let (line_no, line) = next("weight row")?;
            w.row_mut(r).copy_from_slice(&parse_row(line_no, line, fan_in)?);
        }
        let (line_no, marker) = next("layer biases marker")?;
        if marker != format!("layer {li} biases") {
            return Err(fail(format!("line {line_no}: expected layer {li} biases")));
        }
        let (line_no, line) = next("bias row")?;
        let b = parse_row(line_no, line, fan_out)?;
        layers.push(Layer { w, b });
        fan_in = fan_out;
    }
    let (line_no, end) = next("end marker")?;
    if end != "end" {
        return Err(fail(format!("line {line_no}: expected end marker")));
    }
    if lines.next().is_some() {
        return Err(fail("trailing content after end marker".into()));
    }
    Ok((MlpModel { input_dim, hidden, seed, layers }, spec))
}

#[cfg(test)]
mod tests {
    use super::super::mlp::init_mlp_custom;
    use super::*;

    fn spec_nn3(k: usize) -> FeatureSpec {
        FeatureSpec {
            variant: Variant::Nn3,
            duration_mean: 2210.75,
            duration_std: 389.0625,
            id_space: None,
            k: Some(k),
        }
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init_mlp_custom(1 + 2 * 3, &[5, 4], 42).unwrap();
        let spec = spec_nn3(3);
        save_model(&model, &spec, &path).unwrap();
        let (loaded, loaded_spec) = load_model(&path).unwrap();
        assert_eq!(loaded_spec, spec);
        assert_eq!(loaded.flat_params(), model.flat_params());
        assert_eq!(loaded.hidden_widths(), model.hidden_widths());
        assert_eq!(loaded.seed(), model.seed());
        let probe = vec![0.37; 7];
        assert_eq!(loaded.forward(&probe).unwrap(), model.forward(&probe).unwrap());
    }

    #[test]
    fn identity_spec_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let spec = FeatureSpec {
            variant: Variant::Nn2,
            duration_mean: 2000.0,
            duration_std: 1.0,
            id_space: Some(140),
            k: None,
        };
        let model = init_mlp_custom(spec.input_dim(), &[3], 0).unwrap();
        save_model(&model, &spec, &path).unwrap();
        let (_, loaded_spec) = load_model(&path).unwrap();
        assert_eq!(loaded_spec, spec);
    }

    #[test]
    fn inconsistent_spec_is_rejected_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init_mlp_custom(5, &[3], 0).unwrap();
        let err = save_model(&model, &spec_nn3(3), &path).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init_mlp_custom(7, &[4], 3).unwrap();
        save_model(&model, &spec_nn3(3), &path).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        for broken in [
            good.replace("mlp v1", "mlp v2"),
            good.replace("layer 1 biases", "layer 9 biases"),
            good.lines().take(12).collect::<Vec<_>>().join("\n"),
            format!("{good}extra\n"),
            good.replacen("duration_mean 2210.75", "duration_mean pi", 1),
        ] {
            std::fs::write(&path, broken).unwrap();
            assert!(matches!(
                load_model(&path).unwrap_err(),
                ModelError::ModelFile { .. }
            ));
        }
        assert!(matches!(
            load_model(&dir.path().join("absent.txt")).unwrap_err(),
            ModelError::ModelFile { .. }
        ));
    }
}
