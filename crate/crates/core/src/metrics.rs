//! Reconstruction quality metrics and run records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MultiEchoImage;

/// `20·log10(||ref|| / ||ref - rec||)` over the whole stack, in dB.
///
/// Returns `f64::INFINITY` when the reconstruction matches exactly.
pub fn snr_db(reference: &MultiEchoImage, reconstruction: &MultiEchoImage) -> Result<f64> {
    reference.check_same_shape(reconstruction, "snr_db")?;
    snr_from_slices(reference.data(), reconstruction.data())
}

/// SNR of each echo plane separately.
pub fn snr_db_per_echo(
    reference: &MultiEchoImage,
    reconstruction: &MultiEchoImage,
) -> Result<Vec<f64>> {
    reference.check_same_shape(reconstruction, "snr_db_per_echo")?;
    (0..reference.echoes())
        .map(|e| snr_from_slices(reference.echo(e), reconstruction.echo(e)))
        .collect()
}

fn snr_from_slices(reference: &[f64], reconstruction: &[f64]) -> Result<f64> {
    let signal: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(signal > 0.0) {
        return Err(Error::invalid("SNR reference has zero norm"));
    }
    let err: f64 = reference
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (signal / err).log10())
}

/// Serializes an SNR as a JSON number, or the string `"inf"` for an exact
/// match.
pub mod snr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Tag("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad SNR value {t:?}"))),
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let reprs: Vec<Repr> = v
                .iter()
                .map(|&x| {
                    if x.is_infinite() && x > 0.0 {
                        Repr::Tag("inf".into())
                    } else {
                        Repr::Num(x)
                    }
                })
                .collect();
            reprs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| match r {
                    Repr::Num(v) => Ok(v),
                    Repr::Tag(t) if t == "inf" => Ok(f64::INFINITY),
                    Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad SNR value {t:?}"))),
                })
                .collect()
        }
    }
}

/// Outcome of one reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub config: serde_json::Value,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    #[serde(with = "snr_serde::vec")]
    pub snr_db_per_echo: Vec<f64>,
    /// True when the reconstruction equals the reference exactly.
    pub exact_match: bool,
    pub cost_history: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub seed: u64,
}
