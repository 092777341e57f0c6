//! Receiver chains a campaign can run.

use std::fmt;
use std::str::FromStr;

use ftn_core::coding::BpKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Sliding-window network, hard decisions on its outputs.
    UncodedDl,
    /// Whitened-model BCJR.
    UncodedMap,
    /// Cyclic-prefix MMSE frequency-domain equalizer.
    UncodedFde,
    /// Network + SIC soft output into an exact sum-product polar decoder.
    CodedDlSic,
    /// Network + SIC + scaled min-sum BP subnet.
    CodedJointPolar,
    /// Orthogonal (tau = 1) signaling, symbol-by-symbol decisions.
    NyquistReference,
    CodedFdePolar,
    CodedMapPolar,
    CodedNyquistPolar,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::UncodedDl,
        Scenario::UncodedMap,
        Scenario::UncodedFde,
        Scenario::CodedDlSic,
        Scenario::CodedJointPolar,
        Scenario::NyquistReference,
        Scenario::CodedFdePolar,
        Scenario::CodedMapPolar,
        Scenario::CodedNyquistPolar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::UncodedDl => "uncoded-dl",
            Scenario::UncodedMap => "uncoded-map",
            Scenario::UncodedFde => "uncoded-fde",
            Scenario::CodedDlSic => "coded-dl-sic",
            Scenario::CodedJointPolar => "coded-joint-polar",
            Scenario::NyquistReference => "nyquist-reference",
            Scenario::CodedFdePolar => "coded-fde-polar",
            Scenario::CodedMapPolar => "coded-map-polar",
            Scenario::CodedNyquistPolar => "coded-nyquist-polar",
        }
    }

    pub fn is_coded(self) -> bool {
        matches!(
            self,
            Scenario::CodedDlSic
                | Scenario::CodedJointPolar
                | Scenario::CodedFdePolar
                | Scenario::CodedMapPolar
                | Scenario::CodedNyquistPolar
        )
    }

    pub fn needs_detector(self) -> bool {
        matches!(
            self,
            Scenario::UncodedDl | Scenario::CodedDlSic | Scenario::CodedJointPolar
        )
    }

    /// Orthogonal signaling regardless of the configured `tau`.
    pub fn is_nyquist(self) -> bool {
        matches!(self, Scenario::NyquistReference | Scenario::CodedNyquistPolar)
    }

    pub fn is_fde(self) -> bool {
        matches!(self, Scenario::UncodedFde | Scenario::CodedFdePolar)
    }

    pub fn bp_kernel(self) -> BpKernel {
        if self == Scenario::CodedDlSic {
            BpKernel::BoxPlus
        } else {
            BpKernel::ScaledMinSum
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario `{0}`")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}
