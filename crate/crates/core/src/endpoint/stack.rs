use std::collections::BTreeSet;
use std::fmt;

use crate::ids::{LibVersion, WorkerId};

/// Upper bound on `|required| + |optional|` for a ULN stack.
pub const MAX_DVNS: usize = 254;

/// An OApp's per-remote verification and execution configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityStack {
    pub send_library: LibVersion,
    pub receive_library: LibVersion,
    pub prev_receive_library: Option<LibVersion>,
    /// Last block height at which `prev_receive_library` may still commit.
    pub grace_period_end: Option<u64>,
    pub required_dvns: BTreeSet<WorkerId>,
    pub optional_dvns: BTreeSet<WorkerId>,
    pub optional_threshold: u8,
    pub executor: WorkerId,
}

impl SecurityStack {
    pub fn new(send_library: LibVersion, receive_library: LibVersion, executor: WorkerId) -> Self {
        SecurityStack {
            send_library,
            receive_library,
            prev_receive_library: None,
            grace_period_end: None,
            required_dvns: BTreeSet::new(),
            optional_dvns: BTreeSet::new(),
            optional_threshold: 0,
            executor,
        }
    }

    pub fn with_required(mut self, dvns: impl IntoIterator<Item = WorkerId>) -> Self {
        self.required_dvns = dvns.into_iter().collect();
        self
    }

    pub fn with_optional(mut self, dvns: impl IntoIterator<Item = WorkerId>, threshold: u8) -> Self {
        self.optional_dvns = dvns.into_iter().collect();
        self.optional_threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(dup) = self.required_dvns.intersection(&self.optional_dvns).next() {
            return Err(format!("dvn {dup} is both required and optional"));
        }
        if usize::from(self.optional_threshold) > self.optional_dvns.len() {
            return Err(format!(
                "optional threshold {} exceeds {} optional dvns",
                self.optional_threshold,
                self.optional_dvns.len()
            ));
        }
        let total = self.required_dvns.len() + self.optional_dvns.len();
        if total > MAX_DVNS {
            return Err(format!("{total} dvns exceeds the limit of {MAX_DVNS}"));
        }
        if total == 0 {
            return Err("at least one dvn is required".into());
        }
        if self.required_dvns.is_empty() && self.optional_threshold == 0 {
            return Err("a stack without required dvns needs a positive optional threshold".into());
        }
        Ok(())
    }

    /// Every DVN the stack pays for and listens to.
    pub fn all_dvns(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.required_dvns.iter().chain(self.optional_dvns.iter()).copied()
    }

    /// Whether `lib` may commit at `height`.
    pub fn authorizes_receive(&self, lib: LibVersion, height: u64) -> bool {
        if lib == self.receive_library {
            return true;
        }
        match (self.prev_receive_library, self.grace_period_end) {
            (Some(prev), Some(end)) => prev == lib && height <= end,
            _ => false,
        }
    }
}

impl fmt::Display for SecurityStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |set: &BTreeSet<WorkerId>| set.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        write!(
            f,
            "send:{};recv:{};required:{};optional:{};threshold:{};executor:{}",
            self.send_library,
            self.receive_library,
            join(&self.required_dvns),
            join(&self.optional_dvns),
            self.optional_threshold,
            self.executor
        )?;
        if let (Some(prev), Some(end)) = (self.prev_receive_library, self.grace_period_end) {
            write!(f, ";prev:{prev};graceEnd:{end}")?;
        }
        Ok(())
    }
}

/// What an OApp has configured for one remote endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackSetting {
    Explicit(SecurityStack),
    /// Lazily resolves to whatever default the admin currently maintains.
    DefaultOptIn,
}
