//! `quantprobe report`: render a report or plan for humans, with optional
//! CSV export.

use std::path::Path;

use quantprobe_core::container;
use quantprobe_core::dispatch::{load_plan, PLAN_KIND};
use quantprobe_core::probe::{load_report, REPORT_KIND};

use crate::tabular;
use crate::CliError;

/// Renders the document at `input` and, when `csv_out` is given, writes the
/// flat tabular export next to it. Returns the rendered text.
pub fn cmd_report(input: &Path, csv_out: Option<&Path>) -> Result<String, CliError> {
    let doc = container::read_file(input)?;
    match doc.kind.as_str() {
        REPORT_KIND => {
            let (report, _) = load_report(input)?;
            if let Some(csv) = csv_out {
                tabular::write_report_csv(&report, csv)?;
            }
            Ok(tabular::render_report(&report))
        }
        PLAN_KIND => {
            let (plan, _) = load_plan(input)?;
            if let Some(csv) = csv_out {
                tabular::write_plan_csv(&plan, csv)?;
            }
            Ok(tabular::render_plan(&plan))
        }
        other => Err(CliError::Data(format!(
            "cannot render document kind {other:?}"
        ))),
    }
}
