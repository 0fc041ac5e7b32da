use std::fmt;

/// The fifteen request/response steps, plus a terminal marker for
/// transactions that ended in an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    /// View request reaches the client controller.
    S01,
    /// Client controller passes it to the client model.
    S02,
    /// Client model probes the data cache.
    S03,
    /// Hit goes to S05; miss jumps to S08.
    S04,
    /// Controller asks the model for the result document.
    S05,
    /// Model encodes the document and hands it back.
    S06,
    /// View renders; transaction ends.
    S07,
    /// Controller forwards the request to the server controller.
    S08,
    /// Server controller invokes the server model.
    S09,
    /// Server model scans the data store.
    S10,
    /// Server controller returns the data.
    S11,
    /// Controller asks the model to cache the result and encode it.
    S12,
    /// Model caches and encodes the document.
    S13,
    /// Controller hands the document to the view.
    S14,
    /// View renders; transaction ends.
    S15,
    Failed,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::S01 => "S01",
            Step::S02 => "S02",
            Step::S03 => "S03",
            Step::S04 => "S04",
            Step::S05 => "S05",
            Step::S06 => "S06",
            Step::S07 => "S07",
            Step::S08 => "S08",
            Step::S09 => "S09",
            Step::S10 => "S10",
            Step::S11 => "S11",
            Step::S12 => "S12",
            Step::S13 => "S13",
            Step::S14 => "S14",
            Step::S15 => "S15",
            Step::Failed => "FAILED",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const HIT_SEQUENCE: &[Step] = &[Step::S01, Step::S02, Step::S03, Step::S04, Step::S05, Step::S06, Step::S07];

pub const MISS_SERVED_SEQUENCE: &[Step] = &[
    Step::S01,
    Step::S02,
    Step::S03,
    Step::S04,
    Step::S08,
    Step::S09,
    Step::S10,
    Step::S11,
    Step::S12,
    Step::S13,
    Step::S14,
    Step::S15,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    MissServed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTrace {
    pub transaction_id: String,
    pub steps: Vec<Step>,
    pub outcome: Outcome,
}

impl StepTrace {
    pub(crate) fn begin(transaction_id: String) -> Self {
        Self {
            transaction_id,
            steps: Vec::with_capacity(MISS_SERVED_SEQUENCE.len()),
            outcome: Outcome::Failed,
        }
    }

    pub(crate) fn step(&mut self, step: Step) {
        log::trace!("{} {step}", self.transaction_id);
        self.steps.push(step);
    }

    pub(crate) fn finish(&mut self, outcome: Outcome) {
        if outcome == Outcome::Failed {
            self.step(Step::Failed);
        }
        self.outcome = outcome;
        log::debug!("{} finished {:?} after {} steps", self.transaction_id, outcome, self.steps.len());
    }

    /// True when the steps are exactly the canonical sequence for the outcome.
    /// Failed traces are never canonical.
    pub fn is_canonical(&self) -> bool {
        match self.outcome {
            Outcome::Hit => self.steps == HIT_SEQUENCE,
            Outcome::MissServed => self.steps == MISS_SERVED_SEQUENCE,
            Outcome::Failed => false,
        }
    }

    /// One step id per line.
    pub fn to_lines(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shapes() {
        let mut t = StepTrace::begin("x".into());
        for s in HIT_SEQUENCE {
            t.step(*s);
        }
        t.finish(Outcome::Hit);
        assert!(t.is_canonical());
        assert_eq!(t.to_lines(), "S01\nS02\nS03\nS04\nS05\nS06\nS07\n");

        t.outcome = Outcome::MissServed;
        assert!(!t.is_canonical());
    }

    #[test]
    fn failed_trace_ends_with_marker() {
        let mut t = StepTrace::begin("x".into());
        t.step(Step::S01);
        t.finish(Outcome::Failed);
        assert_eq!(t.steps.last(), Some(&Step::Failed));
        assert!(!t.is_canonical());
    }
}
