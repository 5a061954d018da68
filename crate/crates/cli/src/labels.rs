//! The `StR,TrR:-2,SyR` label list syntax.

use repetition_core::generator::MAX_TRANSPOSITION;
use repetition_core::rules::RepetitionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelStep {
    pub label: RepetitionType,
    pub t: Option<i32>,
}

pub fn parse_step(s: &str) -> Result<LabelStep, String> {
    let s = s.trim();
    let (name, t) = match s.split_once(':') {
        Some((n, t)) => (n, Some(t)),
        None => (s, None),
    };
    let label: RepetitionType = name.parse().map_err(|_| format!("unknown label {name:?} (expected StR, TrR, SuR, HoR or SyR)"))?;
    let t = match t {
        None => None,
        Some(raw) => {
            if label != RepetitionType::TrR {
                return Err(format!("{s}: only TrR takes a transposition"));
            }
            let t: i32 = raw.parse().map_err(|_| format!("{s}: transposition {raw:?} is not an integer"))?;
            if t == 0 || t.abs() > MAX_TRANSPOSITION {
                return Err(format!("{s}: transposition must be non-zero and within ±{MAX_TRANSPOSITION}"));
            }
            Some(t)
        }
    };
    Ok(LabelStep { label, t })
}

/// A parsed `--labels` argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelList(pub Vec<LabelStep>);

pub fn parse_label_list(s: &str) -> Result<LabelList, String> {
    parse_list(s).map(LabelList)
}

pub fn parse_list(s: &str) -> Result<Vec<LabelStep>, String> {
    let steps = s.split(',').filter(|p| !p.trim().is_empty()).map(parse_step).collect::<Result<Vec<_>, _>>()?;
    if steps.is_empty() {
        return Err("at least one label is required".into());
    }
    Ok(steps)
}
