use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

/// Outcome of one named check with the error measured and the tolerance applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub reason: String,
    pub err: f64,
    pub tol: f64,
}

impl Verdict {
    /// Pass iff `err <= tol`.
    pub fn compare(name: impl Into<String>, reason: impl Into<String>, err: f64, tol: f64) -> Self {
        let status = if err <= tol { Status::Pass } else { Status::Fail };
        Self {
            name: name.into(),
            status,
            reason: reason.into(),
            err,
            tol,
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            reason: reason.into(),
            err: f64::NAN,
            tol: f64::NAN,
        }
    }

    pub fn failed(name: impl Into<String>, reason: impl Into<String>, err: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            status: Status::Fail,
            reason: reason.into(),
            err,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({}) err={:e} tol={:e}",
            self.name, self.status, self.reason, self.err, self.tol
        )
    }
}
