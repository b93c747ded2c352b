use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use explab::ExtReal;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Twelve significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.11e}")
}

pub fn fmt_ext(v: ExtReal, scale: f64) -> String {
    match v {
        ExtReal::Infinite => "inf".into(),
        ExtReal::Finite(x) => fmt_num(x * scale),
    }
}

pub fn fmt_opt(v: Option<ExtReal>, scale: f64) -> String {
    v.map_or_else(String::new, |x| fmt_ext(x, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits_round_trip() {
        for v in [0.0, 1.0, 0.1234567890123456, 2f64.ln(), 1e-9 / 3.0, 12345.678901234] {
            let s = fmt_num(v);
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 5e-12 * v.abs(), "{s}");
            assert_eq!(fmt_num(back), s);
        }
        assert_eq!(fmt_ext(ExtReal::Infinite, 1.0), "inf");
        assert_eq!(fmt_opt(None, 1.0), "");
    }
}
