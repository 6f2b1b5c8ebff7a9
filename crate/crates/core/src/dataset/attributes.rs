use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;

/// Lower bound of the accepted scale / aspect-ratio band. Ratios strictly
/// outside `[RATIO_LOW, RATIO_HIGH]` trigger the attribute.
pub const RATIO_LOW: f64 = 0.5;
pub const RATIO_HIGH: f64 = 2.0;
/// Boxes with area strictly below this (px^2) are low resolution.
pub const LOW_RES_AREA: f64 = 1000.0;

/// The thirteen benchmark attributes. The first three are derived from the
/// labels; the rest are declared by the annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    SV,
    ARC,
    LR,
    PO,
    DB,
    SO,
    MW,
    SB,
    CR,
    SG,
    IS,
    AL,
    PL,
}

impl Attribute {
    pub const ALL: [Attribute; 13] = [
        Attribute::SV,
        Attribute::ARC,
        Attribute::LR,
        Attribute::PO,
        Attribute::DB,
        Attribute::SO,
        Attribute::MW,
        Attribute::SB,
        Attribute::CR,
        Attribute::SG,
        Attribute::IS,
        Attribute::AL,
        Attribute::PL,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            Attribute::SV => "SV",
            Attribute::ARC => "ARC",
            Attribute::LR => "LR",
            Attribute::PO => "PO",
            Attribute::DB => "DB",
            Attribute::SO => "SO",
            Attribute::MW => "MW",
            Attribute::SB => "SB",
            Attribute::CR => "CR",
            Attribute::SG => "SG",
            Attribute::IS => "IS",
            Attribute::AL => "AL",
            Attribute::PL => "PL",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::SV => "Scale Variation",
            Attribute::ARC => "Aspect Ratio Change",
            Attribute::LR => "Low Resolution",
            Attribute::PO => "Partial Occlusion",
            Attribute::DB => "Difficult Background",
            Attribute::SO => "Similar Objects",
            Attribute::MW => "Midwater",
            Attribute::SB => "Seabed",
            Attribute::CR => "Coral Reef",
            Attribute::SG => "Seagrass",
            Attribute::IS => "Intermittent Sand/Rocks",
            Attribute::AL => "Active Lighting",
            Attribute::PL => "Passive Lighting",
        }
    }

    /// Computed from the box track rather than declared.
    pub fn is_auto(&self) -> bool {
        matches!(self, Attribute::SV | Attribute::ARC | Attribute::LR)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Attribute::ALL.iter().copied().find(|a| a.code() == upper).ok_or_else(|| format!("unknown attribute '{s}'"))
    }
}

/// One flag per [`Attribute`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    flags: [bool; 13],
}

impl AttributeSet {
    pub fn get(&self, attr: Attribute) -> bool {
        self.flags[attr as usize]
    }

    pub fn set(&mut self, attr: Attribute, value: bool) {
        self.flags[attr as usize] = value;
    }

    pub fn with(mut self, attr: Attribute) -> Self {
        self.set(attr, true);
        self
    }

    pub fn iter_set(&self) -> impl Iterator<Item = Attribute> + '_ {
        Attribute::ALL.iter().copied().filter(|a| self.get(*a))
    }

    pub fn apply_auto(&mut self, auto: AutoAttributes) {
        self.set(Attribute::SV, auto.sv);
        self.set(Attribute::ARC, auto.arc);
        self.set(Attribute::LR, auto.lr);
    }

    pub fn auto(&self) -> AutoAttributes {
        AutoAttributes { sv: self.get(Attribute::SV), arc: self.get(Attribute::ARC), lr: self.get(Attribute::LR) }
    }

    /// Checks the structural rules between the environment attributes:
    /// lighting regimes are exclusive and the seabed sub-habitats imply SB.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.get(Attribute::AL) && self.get(Attribute::PL) {
            return Err("AL and PL are mutually exclusive".into());
        }
        let sub_habitat = [Attribute::CR, Attribute::SG, Attribute::IS].into_iter().find(|a| self.get(*a));
        if let Some(a) = sub_habitat {
            if !self.get(Attribute::SB) {
                return Err(format!("{a} is set but SB is not"));
            }
        }
        Ok(())
    }
}

/// The label-derived attributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoAttributes {
    pub sv: bool,
    pub arc: bool,
    pub lr: bool,
}

fn outside_band(ratio: f64) -> bool {
    ratio < RATIO_LOW || ratio > RATIO_HIGH
}

/// Derive SV / ARC / LR from a dense track. Each fires if any frame meets its
/// rule; band edges and the area threshold itself do not fire.
pub fn compute_auto_attributes(track: &[BBox]) -> AutoAttributes {
    let Some(first) = track.first() else {
        return AutoAttributes::default();
    };
    let first_area = first.area();
    let mut out = AutoAttributes::default();
    for b in track {
        if outside_band(b.area() / first_area) {
            out.sv = true;
        }
        // (w_t / h_t) / (w_0 / h_0), kept as a product ratio
        if outside_band((b.w * first.h) / (b.h * first.w)) {
            out.arc = true;
        }
        if b.area() < LOW_RES_AREA {
            out.lr = true;
        }
    }
    out
}
