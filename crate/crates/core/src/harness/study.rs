use serde::{Deserialize, Serialize};

use super::output::{csv_float, ArtifactMeta, CSV_SCHEMA_VERSION};
use crate::detectors::dispatch;
use crate::error::{Error, Result};
use crate::model::ProblemShape;
use crate::rates::{
    bi_rate, corollary_rate, rate_breakdown, s1_equals_1_regime, Corollary, CorollaryConstants,
};

/// Band the rate ratios must fall in.
pub const RATIO_BAND: (f64, f64) = (1.0 / 50.0, 50.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Study {
    /// `R` against the balanced asymptotic rate.
    #[serde(rename = "cor1")]
    Cor1Match,
    /// `R / bi_rate` along a sequence where the scan is suboptimal.
    #[serde(rename = "prop3")]
    Prop3Trend,
    /// `R` against the closed-form single-row table.
    #[serde(rename = "s1eq1")]
    S1Eq1Table,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Cor1Match => "cor1",
            Study::Prop3Trend => "prop3",
            Study::S1Eq1Table => "s1eq1",
        }
    }

    /// The study's default shape set.
    pub fn default_shapes(&self) -> Vec<ProblemShape> {
        match self {
            Study::Cor1Match => cor1_grid(),
            Study::Prop3Trend => prop3_sequence(&[4, 8, 16, 32]),
            Study::S1Eq1Table => s1_table_instances(),
        }
    }
}

impl std::str::FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cor1" => Ok(Study::Cor1Match),
            "prop3" => Ok(Study::Prop3Trend),
            "s1eq1" => Ok(Study::S1Eq1Table),
            _ => Err(Error::InvalidArgument(format!("unknown study {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub shape: ProblemShape,
    pub rate: f64,
    /// `bi_rate`, or the table formula for the single-row study.
    pub reference_rate: f64,
    pub ratio: f64,
    pub regime: String,
    /// Test selected by the dominating term of `R~`.
    pub detector: String,
    /// Test named by the table row (single-row study only).
    pub expected_detector: Option<String>,
    pub assumptions_satisfied: bool,
    pub note: Option<String>,
}

impl StudyRow {
    fn in_band(&self) -> bool {
        self.ratio >= RATIO_BAND.0 && self.ratio <= RATIO_BAND.1
    }

    fn label_matches(&self) -> bool {
        self.expected_detector.as_deref().map_or(true, |e| e == self.detector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub study: Study,
    pub band: (f64, f64),
    pub rows: Vec<StudyRow>,
    /// Every row conforms, and for the trend study the ratios strictly decrease.
    pub verdict: bool,
}

pub const STUDY_HEADER: [&str; 17] = [
    "schema", "config_hash", "root_seed", "version", "study", "d1", "d2", "s1", "s2", "rate",
    "reference_rate", "ratio", "regime", "detector", "expected_detector", "assumptions_satisfied",
    "note",
];

impl StudyTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W, meta: &ArtifactMeta) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(STUDY_HEADER).map_err(io)?;
        for r in &self.rows {
            out.write_record([
                CSV_SCHEMA_VERSION.to_string(),
                meta.config_hash.clone(),
                meta.root_seed.to_string(),
                meta.version.clone(),
                self.study.name().to_string(),
                r.shape.d1.to_string(),
                r.shape.d2.to_string(),
                r.shape.s1.to_string(),
                r.shape.s2.to_string(),
                csv_float(r.rate),
                csv_float(r.reference_rate),
                csv_float(r.ratio),
                r.regime.clone(),
                r.detector.clone(),
                r.expected_detector.clone().unwrap_or_default(),
                r.assumptions_satisfied.to_string(),
                r.note.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Twenty square balanced shapes `(d, d, s, s)`.
pub fn cor1_grid() -> Vec<ProblemShape> {
    let mut out = Vec::new();
    for d in [64, 256, 1024, 4096] {
        for s in [2, 4, 8, 16, 20] {
            out.push(ProblemShape { d1: d, d2: d, s1: s, s2: s });
        }
    }
    out
}

/// Shapes with `d2 = 100 s2^3`, `d1 = ceil(4e4 s2 log d2)` and
/// `s1 = ceil(sqrt(2 d1 s2 log d2))`, so `s1^2 > d1 s2 log d2` with room to spare.
pub fn prop3_sequence(s2_values: &[usize]) -> Vec<ProblemShape> {
    s2_values
        .iter()
        .map(|&s2| {
            let d2 = 100 * s2 * s2 * s2;
            let l = (d2 as f64).ln();
            let d1 = (4e4 * s2 as f64 * l).ceil() as usize;
            let s1 = (2.0 * d1 as f64 * s2 as f64 * l).sqrt().ceil() as usize;
            ProblemShape { d1, d2, s1, s2 }
        })
        .collect()
}

/// Three single-row instances per table row, away from the row boundaries:
/// few columns, then dense, then sparse.
pub fn s1_table_instances() -> Vec<ProblemShape> {
    [
        (100, 50, 1, 2),
        (1000, 200, 1, 3),
        (10000, 1000, 1, 4),
        (100, 150, 1, 40),
        (50, 100, 1, 30),
        (200, 300, 1, 60),
        (20, 400, 1, 12),
        (100, 5000, 1, 10),
        (10, 10000, 1, 8),
    ]
    .into_iter()
    .map(|(d1, d2, s1, s2)| ProblemShape { d1, d2, s1, s2 })
    .collect()
}

fn study_row(shape: &ProblemShape, study: Study, k: &CorollaryConstants) -> Result<StudyRow> {
    let rb = rate_breakdown(shape)?;
    let detector = dispatch(&rb).name().to_string();
    let (reference_rate, expected_detector, assumptions_satisfied) = match study {
        Study::Cor1Match => {
            (bi_rate(shape)?, None, corollary_rate(shape, Corollary::Cor1, k)?.assumptions_satisfied)
        }
        Study::Prop3Trend => {
            (bi_rate(shape)?, None, corollary_rate(shape, Corollary::Cor4, k)?.assumptions_satisfied)
        }
        Study::S1Eq1Table => {
            let row = s1_equals_1_regime(shape)?;
            (row.rate, Some(row.optimal_test.name().to_string()), true)
        }
    };
    let note = (!assumptions_satisfied).then(|| "shape violates the study assumptions".to_string());
    Ok(StudyRow {
        shape: *shape,
        rate: rb.rate,
        reference_rate,
        ratio: rb.rate / reference_rate,
        regime: rb.regime.name().to_string(),
        detector,
        expected_detector,
        assumptions_satisfied,
        note,
    })
}

/// Per-shape rate comparison. Rows whose shape is invalid or violates the
/// study assumptions carry a note and fail the verdict.
pub fn rate_comparison_study(shapes: &[ProblemShape], study: Study) -> Result<StudyTable> {
    let k = CorollaryConstants::default();
    let rows: Vec<StudyRow> = shapes
        .iter()
        .map(|sh| {
            study_row(sh, study, &k).unwrap_or_else(|e| StudyRow {
                shape: *sh,
                rate: f64::NAN,
                reference_rate: f64::NAN,
                ratio: f64::NAN,
                regime: String::new(),
                detector: String::new(),
                expected_detector: None,
                assumptions_satisfied: false,
                note: Some(e.to_string()),
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("study needs at least one shape".into()));
    }
    let conforming = rows.iter().all(|r| r.assumptions_satisfied && r.note.is_none());
    let verdict = match study {
        Study::Cor1Match => conforming && rows.iter().all(StudyRow::in_band),
        Study::Prop3Trend => conforming && rows.windows(2).all(|w| w[1].ratio < w[0].ratio),
        Study::S1Eq1Table => {
            conforming && rows.iter().all(|r| r.in_band() && r.label_matches())
        }
    };
    Ok(StudyTable { study, band: RATIO_BAND, rows, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_studies_pass() {
        for study in [Study::Cor1Match, Study::Prop3Trend, Study::S1Eq1Table] {
            let t = rate_comparison_study(&study.default_shapes(), study).unwrap();
            assert!(t.verdict, "{study:?}: {:#?}", t.rows);
        }
    }

    #[test]
    fn bad_rows_are_reported() {
        let sh = [ProblemShape { d1: 8, d2: 8, s1: 8, s2: 2 }];
        let t = rate_comparison_study(&sh, Study::Cor1Match).unwrap();
        assert!(!t.verdict);
        assert!(t.rows[0].note.is_some());
    }
}
