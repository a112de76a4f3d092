//! UTC timestamp parsing and formatting without a calendar dependency.
//!
//! Accepted inputs: `YYYY-MM-DD` (midnight UTC) and
//! `YYYY-MM-DDTHH:MM:SS` with an optional trailing `Z`. Output always uses
//! the full second-precision form with `Z`.

use crate::error::LabError;

/// Days from 1970-01-01 for a civil date (Howard Hinnant's algorithm).
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = (m + 9) % 12;
    let doy = (153 * mp as u64 + 2) / 5 + d as u64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe as i64 - 719_468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = (if mp < 10 { mp + 3 } else { mp - 9 }) as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn bad(text: &str) -> LabError {
    LabError::Config(format!("invalid timestamp {text:?} (expected YYYY-MM-DD[THH:MM:SS[Z]])"))
}

fn parse_u32(s: &str, text: &str) -> Result<u32, LabError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(text));
    }
    s.parse().map_err(|_| bad(text))
}

/// Parse a date or date-time into UTC epoch seconds.
pub fn parse_instant(text: &str) -> Result<i64, LabError> {
    let (date, time) = match text.split_once('T') {
        Some((d, t)) => (d, Some(t.strip_suffix('Z').unwrap_or(t))),
        None => (text, None),
    };
    let mut parts = date.splitn(3, '-');
    let (y, m, d) = match (parts.next(), parts.next(), parts.next()) {
        (Some(y), Some(m), Some(d)) => (
            {
                if y.len() != 4 {
                    return Err(bad(text));
                }
                parse_u32(y, text)? as i64
            },
            parse_u32(m, text)?,
            parse_u32(d, text)?,
        ),
        _ => return Err(bad(text)),
    };
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return Err(bad(text));
    }
    let mut secs = days_from_civil(y, m, d) * 86_400;
    if let Some(t) = time {
        let mut parts = t.splitn(3, ':');
        let (hh, mm, ss) = match (parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(m), Some(s)) => {
                (parse_u32(h, text)?, parse_u32(m, text)?, parse_u32(s, text)?)
            }
            _ => return Err(bad(text)),
        };
        if hh > 23 || mm > 59 || ss > 59 {
            return Err(bad(text));
        }
        secs += i64::from(hh) * 3600 + i64::from(mm) * 60 + i64::from(ss);
    }
    Ok(secs)
}

/// Parse a plain date (midnight UTC); rejects date-time input.
pub fn parse_date(text: &str) -> Result<i64, LabError> {
    if text.contains('T') {
        return Err(bad(text));
    }
    parse_instant(text)
}

pub fn format_instant(t: i64) -> String {
    let days = t.div_euclid(86_400);
    let rem = t.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

pub fn format_date(t: i64) -> String {
    let (y, m, d) = civil_from_days(t.div_euclid(86_400));
    format!("{y:04}-{m:02}-{d:02}")
}
