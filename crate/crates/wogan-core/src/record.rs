//! Executed-test records and the archive they accumulate into.
//!
//! Campaign runners emit one JSON object per record, in execution order, as
//! soon as the record exists. Field order is fixed so that identical
//! campaigns serialize to identical bytes.

use crate::geometry::CurvatureTest;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    RandomInit,
    Wogan,
    RandomBaseline,
    Frenetic,
}

/// One executed test with its outcome and timing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestRecord {
    #[serde(rename = "kappas")]
    pub test: CurvatureTest,
    /// Maximum BOLP of the execution, in [0, 1].
    pub fitness: f64,
    pub source: Source,
    /// Seconds since campaign start when the execution finished.
    pub executed_at: f64,
    /// Seconds spent producing this candidate (drawing and validating).
    pub generation_time: f64,
    /// Seconds spent training models before this candidate.
    pub training_time: f64,
}

impl TestRecord {
    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}

/// Ordered, append-only archive of executed tests.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TestSuite {
    pub records: Vec<TestRecord>,
}

impl TestSuite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TestRecord) {
        self.records.push(record);
    }

    /// Number of records whose fitness strictly exceeds the threshold.
    pub fn failing_count(&self, threshold: f64) -> usize {
        self.records.iter().filter(|r| r.fitness > threshold).count()
    }

    pub fn failing(&self, threshold: f64) -> impl Iterator<Item = &TestRecord> {
        self.records.iter().filter(move |r| r.fitness > threshold)
    }
}

/// Parses a JSONL record stream. A trailing partial line (a campaign killed
/// mid-write) is ignored; malformed lines elsewhere are an error.
pub fn read_jsonl(content: &str) -> Result<TestSuite, serde_json::Error> {
    let lines: Vec<&str> = content.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut suite = TestSuite::new();
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<TestRecord>(line) {
            Ok(record) => suite.push(record),
            Err(e) if i + 1 == lines.len() => {
                let _ = e;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(suite)
}
