use std::fmt;
use std::str::FromStr;

use crate::codec::Address;

/// Identifier of an offchain worker (DVN, executor, Pre-Crime worker).
///
/// Eight bits wide so it fits the Type 3 Message Options `workerId` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorkerId(pub u8);

impl WorkerId {
    /// Native-balance account that receives this worker's fees.
    pub fn account(self) -> Address {
        let mut bytes = [0u8; 32];
        bytes[0] = 0xee;
        bytes[31] = self.0;
        Address(bytes)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(libId, major, minor)`; written `libId@major.minor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LibVersion {
    pub lib_id: u32,
    pub major: u16,
    pub minor: u16,
}

impl LibVersion {
    pub const fn new(lib_id: u32, major: u16, minor: u16) -> Self {
        LibVersion { lib_id, major, minor }
    }

    /// Packet version byte emitted by a send library.
    pub fn packet_version(self) -> u8 {
        self.major as u8
    }
}

impl fmt::Display for LibVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}.{}", self.lib_id, self.major, self.minor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLibVersionError(pub String);

impl fmt::Display for ParseLibVersionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid library version `{}` (expected libId@major.minor)", self.0)
    }
}

impl std::error::Error for ParseLibVersionError {}

impl FromStr for LibVersion {
    type Err = ParseLibVersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseLibVersionError(s.to_string());
        let (id, ver) = s.split_once('@').ok_or_else(err)?;
        let (major, minor) = ver.split_once('.').ok_or_else(err)?;
        Ok(LibVersion {
            lib_id: id.parse().map_err(|_| err())?,
            major: major.parse().map_err(|_| err())?,
            minor: minor.parse().map_err(|_| err())?,
        })
    }
}
