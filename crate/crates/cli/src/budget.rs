//! Interference-cap specification grammar.
//!
//! `inf` leaves every pair unconstrained. Otherwise a comma-separated list of
//! `zIJ=value` entries (1-based transmitter/receiver indices, `z1_12=...`
//! with an underscore once indices pass one digit); omitted pairs default to
//! unconstrained, values may be `inf`.

use misorate::InterferenceBudget;

pub fn parse_budget(spec: &str, m: usize) -> Result<InterferenceBudget, String> {
    let trimmed = spec.trim();
    if trimmed.is_empty() || trimmed == "inf" {
        return Ok(InterferenceBudget::unconstrained(m));
    }
    let mut budget = InterferenceBudget::unconstrained(m);
    for entry in trimmed.split(',') {
        let entry = entry.trim();
        let rest = entry
            .strip_prefix('z')
            .ok_or_else(|| format!("budget entry '{entry}' must start with 'z'"))?;
        let (indices, value) = rest
            .split_once('=')
            .ok_or_else(|| format!("budget entry '{entry}' is missing '='"))?;
        let (tx, rx) = parse_indices(indices)
            .ok_or_else(|| format!("budget entry '{entry}' has malformed indices"))?;
        if tx == 0 || rx == 0 || tx > m || rx > m {
            return Err(format!(
                "budget entry '{entry}': indices must be in 1..={m}"
            ));
        }
        if tx == rx {
            return Err(format!(
                "budget entry '{entry}': a transmitter has no cap toward itself"
            ));
        }
        let cap = parse_value(value.trim()).ok_or_else(|| {
            format!("budget entry '{entry}': value must be 'inf' or a number ≥ 0")
        })?;
        budget
            .set(tx - 1, rx - 1, cap)
            .map_err(|e| format!("budget entry '{entry}': {e}"))?;
    }
    Ok(budget)
}

fn parse_indices(text: &str) -> Option<(usize, usize)> {
    if let Some((a, b)) = text.split_once('_') {
        Some((a.parse().ok()?, b.parse().ok()?))
    } else if text.len() == 2 {
        let mut chars = text.chars();
        let a = chars.next()?.to_digit(10)? as usize;
        let b = chars.next()?.to_digit(10)? as usize;
        Some((a, b))
    } else {
        // ambiguous without a separator
        None
    }
}

fn parse_value(text: &str) -> Option<f64> {
    if text == "inf" {
        return Some(f64::INFINITY);
    }
    let value: f64 = text.parse().ok()?;
    (value.is_finite() && value >= 0.0).then_some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_common_forms() {
        let b = parse_budget("inf", 3).unwrap();
        assert_eq!(b.cap(0, 1), f64::INFINITY);

        let b = parse_budget("z12=0,z13=0.5,z21=inf", 3).unwrap();
        assert_eq!(b.cap(0, 1), 0.0);
        assert_eq!(b.cap(0, 2), 0.5);
        assert_eq!(b.cap(1, 0), f64::INFINITY);
        assert_eq!(b.cap(2, 0), f64::INFINITY); // omitted

        let b = parse_budget("z1_2=0.25", 2).unwrap();
        assert_eq!(b.cap(0, 1), 0.25);
    }

    #[test]
    fn rejects_malformed_entries() {
        assert!(parse_budget("z11=0", 2).is_err());
        assert!(parse_budget("z12=-1", 2).is_err());
        assert!(parse_budget("z123=0", 3).is_err());
        assert!(parse_budget("z14=0", 3).is_err());
        assert!(parse_budget("y12=0", 2).is_err());
        assert!(parse_budget("z12", 2).is_err());
    }
}
