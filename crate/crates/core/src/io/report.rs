//! Plain `key=value` reports.

use std::fmt::{self, Display};
use std::path::Path;

use crate::backprojection::ReconstructionStats;
use crate::error::{Error, Result};

/// An ordered list of `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        self.entries.push((key, value.to_string()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push_stats(&mut self, prefix: &str, stats: &ReconstructionStats) -> &mut Self {
        self.push(
            format!("{prefix}ellipsoids_emitted"),
            stats.ellipsoids_emitted,
        )
        .push(
            format!("{prefix}ellipsoids_skipped_zero"),
            stats.ellipsoids_skipped_zero,
        )
        .push(
            format!("{prefix}ellipsoids_degenerate"),
            stats.ellipsoids_degenerate,
        )
        .push(format!("{prefix}triangles_total"), stats.triangles_total)
        .push(
            format!("{prefix}triangles_per_ellipsoid"),
            stats.triangles_per_ellipsoid(),
        )
        .push(format!("{prefix}saturated_levels"), stats.saturated_levels)
        .push(format!("{prefix}voxel_touches"), stats.voxel_touches)
        .push(format!("{prefix}wall_time_s"), stats.wall_time)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Report::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("report line {} has no '='", n + 1)))?;
            r.entries.push((k.to_string(), v.to_string()));
        }
        Ok(r)
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_string()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_text() {
        let stats = ReconstructionStats {
            ellipsoids_emitted: 10,
            ellipsoids_skipped_zero: 5,
            ellipsoids_degenerate: 1,
            triangles_total: 800,
            saturated_levels: 0,
            voxel_touches: 1234,
            wall_time: 1.5,
        };
        let mut r = Report::new();
        r.push("method", "fast")
            .push("pearson", 0.125f64)
            .push_stats("", &stats);
        let text = r.to_string();
        assert!(text.contains("triangles_per_ellipsoid=80\n"));
        assert!(text.contains("wall_time_s=1.5\n"));
        assert_eq!(Report::parse(&text).unwrap(), r);
        assert_eq!(r.get("pearson"), Some("0.125"));
        assert!(Report::parse("no equals sign").is_err());
    }
}
