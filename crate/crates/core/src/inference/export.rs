//! Forecast CSV export: one row per (origin, horizon step), de-standardized.

use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::mc::MwView;
use crate::Result;

/// Write forecasts as CSV with columns `origin_timestamp, horizon_h,
/// q<level>_mw..., mean_mw, aleatoric_var, epistemic_var`. `horizon_h` is
/// 1-based hours ahead of the origin.
pub fn export_forecasts(
    path: &Path,
    forecasts: &[(DateTime<Utc>, MwView)],
    levels: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["origin_timestamp".to_string(), "horizon_h".to_string()];
    header.extend(levels.iter().map(|l| format!("q{l}_mw")));
    header.extend(["mean_mw".into(), "aleatoric_var".into(), "epistemic_var".into()]);
    w.write_record(&header)?;
    for (origin, view) in forecasts {
        for h in 0..view.mean_mw.len() {
            let mut rec = vec![
                origin.to_rfc3339_opts(SecondsFormat::Secs, true),
                format!("{}", h + 1),
            ];
            rec.extend(view.pooled_quantiles_mw.row(h).iter().map(|v| format!("{v}")));
            rec.push(format!("{}", view.mean_mw[h]));
            rec.push(format!("{}", view.aleatoric_var_mw[h]));
            rec.push(format!("{}", view.epistemic_var_mw[h]));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
