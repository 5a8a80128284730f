//! Aggregation of five-criterion back-view scores into an overall score.
//!
//! A per-view score is the unweighted mean of the five criteria. Views are
//! combined per subject as `0.5·S₁₈₀ + 0.25·S₁₃₅ + 0.25·S₂₂₅`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const AZIMUTHS: [u32; 3] = [135, 180, 225];
pub const AZIMUTH_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.25];
pub const CRITERIA: [&str; 5] = [
    "clarity",
    "structural_integrity",
    "texture_quality",
    "color_lighting_consistency",
    "overall_perception",
];
pub const SCORE_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub subject: String,
    pub azimuth: u32,
    pub clarity: f64,
    pub structural_integrity: f64,
    pub texture_quality: f64,
    pub color_lighting_consistency: f64,
    pub overall_perception: f64,
}

impl ScoreRecord {
    pub fn scores(&self) -> [f64; 5] {
        [
            self.clarity,
            self.structural_integrity,
            self.texture_quality,
            self.color_lighting_consistency,
            self.overall_perception,
        ]
    }

    pub fn view_score(&self) -> f64 {
        mean5(&self.scores())
    }

    pub fn validate(&self) -> Result<()> {
        if !AZIMUTHS.contains(&self.azimuth) {
            return Err(Error::invalid(format!(
                "subject {}: azimuth {} is not one of {AZIMUTHS:?}",
                self.subject, self.azimuth
            )));
        }
        for (name, v) in CRITERIA.iter().zip(self.scores()) {
            if !(0.0..=SCORE_MAX).contains(&v) {
                return Err(Error::invalid(format!(
                    "subject {} azimuth {}: {name} = {v} outside [0, {SCORE_MAX}]",
                    self.subject, self.azimuth
                )));
            }
        }
        Ok(())
    }
}

fn mean5(v: &[f64; 5]) -> f64 {
    v.iter().sum::<f64>() / 5.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptualReport {
    /// Means over subjects of the view-weighted criterion scores, in [`CRITERIA`] order.
    pub criterion_means: [f64; 5],
    /// View-weighted overall score per subject.
    pub per_subject: BTreeMap<String, f64>,
    /// Mean of the five criterion means.
    pub overall: f64,
}

/// Overall table score from five criterion means.
pub fn overall_from_criterion_means(means: &[f64; 5]) -> f64 {
    mean5(means)
}

pub fn perceptual_aggregate(records: &[ScoreRecord]) -> Result<PerceptualReport> {
    let mut by_subject: BTreeMap<&str, [Option<&ScoreRecord>; 3]> = BTreeMap::new();
    for r in records {
        r.validate()?;
        let slot = AZIMUTHS.iter().position(|&a| a == r.azimuth).expect("validated");
        let entry = by_subject.entry(&r.subject).or_default();
        if entry[slot].is_some() {
            return Err(Error::invalid(format!(
                "duplicate record for subject {} at azimuth {}",
                r.subject, r.azimuth
            )));
        }
        entry[slot] = Some(r);
    }
    if by_subject.is_empty() {
        return Err(Error::invalid("no score records"));
    }
    let mut sums = [0.0; 5];
    let mut per_subject = BTreeMap::new();
    for (subject, views) in &by_subject {
        let mut weighted = [0.0; 5];
        for (slot, view) in views.iter().enumerate() {
            let view = view.ok_or_else(|| Error::MissingView {
                subject: subject.to_string(),
                azimuth: AZIMUTHS[slot],
            })?;
            for (w, s) in weighted.iter_mut().zip(view.scores()) {
                *w += AZIMUTH_WEIGHTS[slot] * s;
            }
        }
        per_subject.insert(subject.to_string(), mean5(&weighted));
        for (acc, w) in sums.iter_mut().zip(weighted) {
            *acc += w;
        }
    }
    let n = by_subject.len() as f64;
    let criterion_means = sums.map(|s| s / n);
    Ok(PerceptualReport {
        criterion_means,
        per_subject,
        overall: overall_from_criterion_means(&criterion_means),
    })
}

/// One JSON object per non-empty line.
pub fn parse_score_lines(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(line.trim())
            .map_err(|e| Error::parse("score records", start + e.column().saturating_sub(1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(subject: &str, azimuth: u32, s: f64) -> ScoreRecord {
        ScoreRecord {
            subject: subject.into(),
            azimuth,
            clarity: s,
            structural_integrity: s,
            texture_quality: s,
            color_lighting_consistency: s,
            overall_perception: s,
        }
    }

    #[test]
    fn constant_scores_fixed_point() {
        let recs: Vec<_> = AZIMUTHS.iter().map(|&a| rec("s1", a, 8.0)).collect();
        let report = perceptual_aggregate(&recs).unwrap();
        assert_eq!(report.overall, 8.0);
        assert_eq!(report.criterion_means, [8.0; 5]);
    }

    #[test]
    fn back_view_carries_half_the_weight() {
        let recs = vec![rec("s", 180, 10.0), rec("s", 135, 0.0), rec("s", 225, 0.0)];
        assert_eq!(perceptual_aggregate(&recs).unwrap().overall, 5.0);
    }

    #[test]
    fn missing_view_names_subject_and_azimuth() {
        let recs = vec![rec("s7", 180, 5.0), rec("s7", 135, 5.0)];
        match perceptual_aggregate(&recs).unwrap_err() {
            Error::MissingView { subject, azimuth } => {
                assert_eq!(subject, "s7");
                assert_eq!(azimuth, 225);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_rejected() {
        let recs = vec![rec("s", 180, 11.0), rec("s", 135, 0.0), rec("s", 225, 0.0)];
        assert!(perceptual_aggregate(&recs).is_err());
        let recs = vec![rec("s", 90, 1.0)];
        assert!(perceptual_aggregate(&recs).is_err());
    }

    #[test]
    fn json_lines() {
        let text = r#"{"subject":"a","azimuth":180,"clarity":8,"structural_integrity":7,"texture_quality":6,"color_lighting_consistency":9,"overall_perception":8}

{"subject":"a","azimuth":135,"clarity":8,"structural_integrity":7,"texture_quality":6,"color_lighting_consistency":9,"overall_perception":8}
"#;
        let recs = parse_score_lines(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].view_score(), 7.6);
        assert!(parse_score_lines("{\"subject\": 3}\n").is_err());
    }
}
