//! ASIL determination and the SOTIF residual-risk gate.
//!
//! Ratings are plain ordinal enums. [`determine_asil`] is a lookup into the
//! 36-cell S1..S3 x E1..E4 x C1..C3 table; any S0 or C0 input is QM.
//! [`rra_required`] decides whether a residual risk assessment is needed,
//! under an explicit [`GateMode`].

mod registry_file;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use registry_file::{parse_registry, write_registry, ParseError};

macro_rules! ordinal_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            /// Position in the ordinal scale, starting at zero.
            pub fn rank(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl Serialize for $name {
            fn serialize<Ser: serde::Serializer>(&self, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
                ser.serialize_str(self.token())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<De: serde::Deserializer<'de>>(de: De) -> Result<Self, De::Error> {
                let raw = String::deserialize(de)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($token => Ok($name::$variant),)+
                    other => Err(UnknownToken {
                        kind: stringify!($name),
                        token: other.to_string(),
                    }),
                }
            }
        }
    };
}

ordinal_enum!(
    /// Severity class, S0 (no injuries) to S3 (survival uncertain).
    Severity { S0 => "S0", S1 => "S1", S2 => "S2", S3 => "S3" }
);
ordinal_enum!(
    /// Exposure class. There is no E0 in this taxonomy.
    Exposure { E1 => "E1", E2 => "E2", E3 => "E3", E4 => "E4" }
);
ordinal_enum!(
    /// Controllability class, C0 (controllable in general) to C3.
    Controllability { C0 => "C0", C1 => "C1", C2 => "C2", C3 => "C3" }
);
ordinal_enum!(
    AsilLevel { QM => "QM", A => "A", B => "B", C => "C", D => "D" }
);
ordinal_enum!(
    /// Which analysis produced a hazard record.
    HazardKind { Hara => "HARA", Sira => "SIRA" }
);

/// Token that does not name a level of the expected scale.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} token '{token}'")]
pub struct UnknownToken {
    pub kind: &'static str,
    pub token: String,
}

/// How the severity and controllability conditions combine in the residual-risk gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GateMode {
    /// `S > S0 || C > C0`.
    #[default]
    Disjunctive,
    /// `S > S0 && C > C0`.
    Conjunctive,
}

impl fmt::Display for GateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateMode::Disjunctive => "or",
            GateMode::Conjunctive => "and",
        })
    }
}

impl FromStr for GateMode {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "or" | "disjunctive" => Ok(GateMode::Disjunctive),
            "and" | "conjunctive" => Ok(GateMode::Conjunctive),
            other => Err(UnknownToken {
                kind: "GateMode",
                token: other.to_string(),
            }),
        }
    }
}

use AsilLevel::{A, B, C, D, QM};

/// `ASIL_TABLE[s-1][e-1][c-1]` for S1..S3, E1..E4, C1..C3.
const ASIL_TABLE: [[[AsilLevel; 3]; 4]; 3] = [
    // S1
    [[QM, QM, QM], [QM, QM, QM], [QM, QM, A], [QM, A, B]],
    // S2
    [[QM, QM, QM], [QM, QM, A], [QM, A, B], [A, B, C]],
    // S3
    [[QM, QM, A], [QM, A, B], [A, B, C], [B, C, D]],
];

/// The table cell (or the S0/C0 short-circuit) that produced an ASIL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleCell {
    /// Regular table lookup: row `S?/E?`, column `C?`.
    Table {
        severity: Severity,
        exposure: Exposure,
        controllability: Controllability,
    },
    /// S0 or C0 input; no table row applies.
    NoRisk {
        severity: Severity,
        controllability: Controllability,
    },
}

impl fmt::Display for RuleCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleCell::Table {
                severity,
                exposure,
                controllability,
            } => write!(f, "row {severity}/{exposure}, column {controllability}"),
            RuleCell::NoRisk {
                severity,
                controllability,
            } => write!(f, "{severity}/{controllability} outside table"),
        }
    }
}

pub fn determine_asil(s: Severity, e: Exposure, c: Controllability) -> AsilLevel {
    determine_asil_with_cell(s, e, c).0
}

/// Like [`determine_asil`] but also reports which rule fired.
pub fn determine_asil_with_cell(
    s: Severity,
    e: Exposure,
    c: Controllability,
) -> (AsilLevel, RuleCell) {
    if s == Severity::S0 || c == Controllability::C0 {
        return (
            QM,
            RuleCell::NoRisk {
                severity: s,
                controllability: c,
            },
        );
    }
    let level = ASIL_TABLE[s.rank() - 1][e.rank()][c.rank() - 1];
    (
        level,
        RuleCell::Table {
            severity: s,
            exposure: e,
            controllability: c,
        },
    )
}

pub fn rra_required(s: Severity, c: Controllability, mode: GateMode) -> bool {
    let severe = s > Severity::S0;
    let uncontrollable = c > Controllability::C0;
    match mode {
        GateMode::Disjunctive => severe || uncontrollable,
        GateMode::Conjunctive => severe && uncontrollable,
    }
}

/// One row of a HARA or SIRA worksheet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardRecord {
    pub id: String,
    pub kind: HazardKind,
    #[serde(default)]
    pub action: String,
    #[serde(default)]
    pub hazard: String,
    #[serde(default)]
    pub situation: String,
    #[serde(default)]
    pub hazardous_event: String,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<Exposure>,
    pub controllability: Controllability,
}

impl HazardRecord {
    /// ASIL of this record; fails when the exposure rating is absent.
    pub fn asil(&self) -> Result<(AsilLevel, RuleCell), RiskError> {
        let exposure = self.exposure.ok_or_else(|| RiskError::ExposureMissing {
            id: self.id.clone(),
        })?;
        Ok(determine_asil_with_cell(
            self.severity,
            exposure,
            self.controllability,
        ))
    }
}

/// Outcome of evaluating one hazard record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub kind: HazardKind,
    pub asil: Option<AsilLevel>,
    pub rule: Option<RuleCell>,
    pub rra: bool,
    pub gate_mode: GateMode,
    /// A safe state only exists for goals that carry an ASIL.
    pub safe_state_required: bool,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.id, self.kind)?;
        match (&self.asil, &self.rule) {
            (Some(asil), Some(rule)) => write!(f, " ASIL {asil} ({rule})")?,
            _ => write!(f, " ASIL n/a")?,
        }
        write!(
            f,
            " RRA {} (gate {})",
            if self.rra { "required" } else { "not required" },
            self.gate_mode
        )?;
        if !self.safe_state_required {
            write!(f, " safe-state n/a")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiskError {
    #[error("duplicate hazard id '{0}' in registry")]
    DuplicateId(String),
    #[error("exposure missing for record '{id}', cannot determine ASIL")]
    ExposureMissing { id: String },
}

/// Applies both gates to every record, preserving input order.
///
/// HARA records must carry an exposure. SIRA records get an ASIL only when
/// they happen to carry one.
pub fn evaluate_registry(
    records: &[HazardRecord],
    mode: GateMode,
) -> Result<Vec<Verdict>, RiskError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(RiskError::DuplicateId(r.id.clone()));
        }
    }
    records
        .iter()
        .map(|r| {
            let asil = match (r.kind, r.exposure) {
                (HazardKind::Hara, _) | (HazardKind::Sira, Some(_)) => Some(r.asil()?),
                (HazardKind::Sira, None) => None,
            };
            let (asil, rule) = match asil {
                Some((a, cell)) => (Some(a), Some(cell)),
                None => (None, None),
            };
            Ok(Verdict {
                id: r.id.clone(),
                kind: r.kind,
                asil,
                rule,
                rra: rra_required(r.severity, r.controllability, mode),
                gate_mode: mode,
                safe_state_required: asil.is_some_and(|a| a > QM),
            })
        })
        .collect()
}
