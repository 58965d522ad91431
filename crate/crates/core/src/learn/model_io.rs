//! Model persistence. A saved model is three lines of text:
//!
//! ```text
//! ruledec-model v1
//! {"layer_sizes":[6,32,32,3], ...}
//! 3f5a... (sha256 of the JSON line)
//! ```
//!
//! The checksum covers the exact bytes of the JSON line, so any corruption
//! or truncation is caught before deserialization. JSON round-trips f64
//! exactly, so a loaded model predicts bit-for-bit like the saved one.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::mlp::MlpModel;

pub const MODEL_FORMAT_VERSION: &str = "ruledec-model v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported model format: found {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("model file checksum does not match its payload")]
    ChecksumMismatch,
    #[error("malformed model payload: {0}")]
    Payload(#[from] serde_json::Error),
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Serializes a model to the three-line text format.
pub fn model_to_string(model: &MlpModel) -> Result<String, ModelIoError> {
    let payload = serde_json::to_string(model)?;
    let checksum = sha256_hex(payload.as_bytes());
    Ok(format!("{MODEL_FORMAT_VERSION}\n{payload}\n{checksum}\n"))
}

/// Parses the three-line text format back into a model.
pub fn model_from_str(text: &str) -> Result<MlpModel, ModelIoError> {
    let mut lines = text.lines();
    let version = lines.next().unwrap_or("");
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found: version.to_string(),
            expected: MODEL_FORMAT_VERSION.to_string(),
        });
    }
    let payload = lines.next().unwrap_or("");
    let checksum = lines.next().unwrap_or("");
    if checksum != sha256_hex(payload.as_bytes()) {
        return Err(ModelIoError::ChecksumMismatch);
    }
    Ok(serde_json::from_str(payload)?)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<(), ModelIoError> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel, ModelIoError> {
    model_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_model() -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        MlpModel::new_random(&[32, 32], 2.0, &mut rng)
    }

    #[test]
    fn round_trip_preserves_the_model_exactly() {
        let model = sample_model();
        let text = model_to_string(&model).expect("serializes");
        let loaded = model_from_str(&text).expect("parses");
        assert_eq!(loaded, model);
        // Predictions are bit-identical, not just close.
        let x = [3.0, 1.5, -2.0, 0.25, 9.0, 4.0];
        assert_eq!(loaded.probabilities(&x), model.probabilities(&x));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("rules.model");
        let model = sample_model();
        save_model(&model, &path).expect("saves");
        let loaded = load_model(&path).expect("loads");
        assert_eq!(loaded, model);
    }

    #[test]
    fn format_is_three_lines_with_a_hex_checksum() {
        let text = model_to_string(&sample_model()).expect("serializes");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], MODEL_FORMAT_VERSION);
        assert!(lines[1].starts_with('{'));
        assert_eq!(lines[2].len(), 64);
        assert!(lines[2].chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = model_to_string(&sample_model()).expect("serializes");
        let bumped = text.replace("ruledec-model v1", "ruledec-model v2");
        match model_from_str(&bumped) {
            Err(ModelIoError::VersionMismatch { found, .. }) => {
                assert_eq!(found, "ruledec-model v2");
            }
            other => panic!("expected a version error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_payload_fails_the_checksum() {
        let text = model_to_string(&sample_model()).expect("serializes");
        let corrupted = text.replacen("6,32", "6,33", 1);
        assert!(matches!(
            model_from_str(&corrupted),
            Err(ModelIoError::ChecksumMismatch)
        ));
    }

    #[test]
    fn truncated_file_fails_the_checksum() {
        let text = model_to_string(&sample_model()).expect("serializes");
        // Cut inside the payload line: the checksum line is gone entirely.
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            model_from_str(truncated),
            Err(ModelIoError::ChecksumMismatch)
        ));
        // Dropping just the checksum line fails the same way.
        let two_lines: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            model_from_str(&two_lines),
            Err(ModelIoError::ChecksumMismatch)
        ));
    }

    #[test]
    fn valid_checksum_over_garbage_payload_is_a_payload_error() {
        let payload = "{\"not\": \"a model\"}";
        let checksum = super::sha256_hex(payload.as_bytes());
        let text = format!("{MODEL_FORMAT_VERSION}\n{payload}\n{checksum}\n");
        assert!(matches!(
            model_from_str(&text),
            Err(ModelIoError::Payload(_))
        ));
    }
}
