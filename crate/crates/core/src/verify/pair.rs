use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Threshold;
use crate::embednet::{NetworkParams, Representation};
use crate::error::Result;
use crate::measure::DataImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

/// Where an image came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageProvenance {
    pub state: String,
    pub seed: u64,
    pub present: usize,
}

impl From<&DataImage> for ImageProvenance {
    fn from(img: &DataImage) -> Self {
        Self {
            state: img.descriptor.clone(),
            seed: img.seed,
            present: img.present_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub distance: f64,
    pub threshold: Threshold,
    pub verdict: Verdict,
    pub a: ImageProvenance,
    pub b: ImageProvenance,
}

impl VerificationReport {
    pub fn new(distance: f64, threshold: Threshold, a: ImageProvenance, b: ImageProvenance) -> Self {
        let verdict = if threshold.accepts(distance) {
            Verdict::Accept
        } else {
            Verdict::Reject
        };
        Self {
            distance,
            threshold,
            verdict,
            a,
            b,
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }

    /// `distance, threshold, verdict, state_a, seed_a, state_b, seed_b`
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let verdict = match self.verdict {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        };
        let _ = write!(
            s,
            "{:.16e}, {:.16e}, {verdict}, {}, {}, {}, {}",
            self.distance, self.threshold.value, self.a.state, self.a.seed, self.b.state, self.b.seed
        );
        s
    }
}

pub fn distance(a: &Representation, b: &Representation) -> f64 {
    a.distance(b)
}

/// Embeds both images and compares their distance with the threshold.
pub fn verify_pair(
    params: &NetworkParams,
    image_a: &DataImage,
    image_b: &DataImage,
    threshold: &Threshold,
) -> Result<VerificationReport> {
    let reps = params.embed(&[image_a, image_b])?;
    Ok(VerificationReport::new(
        reps[0].distance(&reps[1]),
        *threshold,
        image_a.into(),
        image_b.into(),
    ))
}
