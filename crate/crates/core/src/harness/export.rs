use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::summary::ExperimentSummary;
use super::{trial_csv_path, CONFIG_FILE, SUMMARY_FILE};
use crate::geometry::write_points_csv;
use crate::{Error, Result, C64};

pub const BOUNDARY_POINTS: usize = 512;
pub const SUMMARY_SCHEMA_FILE: &str = "summary.schema.json";

/// JSON Schema for `summary.json`.
pub const SUMMARY_SCHEMA: &str = r##"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "ExperimentSummary",
  "type": "object",
  "required": ["kind", "n", "seed", "trials", "completed", "rho", "epsilon", "match_cap",
               "predictions", "failures", "rates", "metrics", "acceptance", "passed"],
  "$defs": {
    "complex": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    "rate": {
      "type": "object",
      "required": ["successes", "total", "estimate", "wilson_low", "wilson_high"],
      "properties": {
        "successes": {"type": "integer", "minimum": 0},
        "total": {"type": "integer", "minimum": 0},
        "estimate": {"type": "number", "minimum": 0, "maximum": 1},
        "wilson_low": {"type": "number", "minimum": 0, "maximum": 1},
        "wilson_high": {"type": "number", "minimum": 0, "maximum": 1}
      }
    }
  },
  "properties": {
    "kind": {"enum": ["no-outliers", "perturbed", "isotropic", "dyson-sweep", "product", "diagnostics"]},
    "n": {"type": "integer", "minimum": 0},
    "seed": {"type": "integer", "minimum": 0},
    "trials": {"type": "integer", "minimum": 1},
    "completed": {"type": "integer", "minimum": 0},
    "rho": {"$ref": "#/$defs/complex"},
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
    "match_cap": {"type": "number", "exclusiveMinimum": 0},
    "predictions": {"type": "array", "items": {"$ref": "#/$defs/complex"}},
    "failures": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["trial_index", "error"],
        "properties": {"trial_index": {"type": "integer"}, "error": {"type": "string"}}
      }
    },
    "rates": {"type": "object", "additionalProperties": {"$ref": "#/$defs/rate"}},
    "metrics": {"type": "object", "additionalProperties": {"type": "number"}},
    "outliers_outside_region": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    "diagnostics": {"type": "object"},
    "acceptance": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["metric", "min_rate", "observed", "passed"],
        "properties": {
          "metric": {"type": "string"},
          "min_rate": {"type": "number"},
          "observed": {"type": ["number", "null"]},
          "passed": {"type": "boolean"}
        }
      }
    },
    "passed": {"type": "boolean"}
  }
}
"##;

/// Files written by [`export`].
#[derive(Clone, Debug)]
pub struct ExportFiles {
    pub scatter_csv: PathBuf,
    pub boundary_csv: PathBuf,
    pub predictions_csv: PathBuf,
    pub svg: PathBuf,
    pub summary_json: PathBuf,
    pub schema: PathBuf,
}

/// Reads `trial,re,im` rows.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<C64>> {
    let file = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("{}:{}: {e}", path.display(), i + 1)))
        };
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "{}:{}: expected 3 fields",
                path.display(),
                i + 1
            )));
        }
        out.push(C64::new(parse(parts[1])?, parse(parts[2])?));
    }
    Ok(out)
}

/// Standalone SVG: one `<circle>` per eigenvalue, the region boundary as a
/// polyline and one cross per prediction.
pub fn render_svg(spectra: &[(u64, Vec<C64>)], boundary: &[C64], predictions: &[C64]) -> String {
    let all = spectra
        .iter()
        .flat_map(|(_, s)| s.iter())
        .chain(boundary)
        .chain(predictions);
    let mut lim = 1.0f64;
    for z in all {
        if z.re.is_finite() && z.im.is_finite() {
            lim = lim.max(z.re.abs()).max(z.im.abs());
        }
    }
    let lim = lim * 1.1;
    let size = 800.0;
    let scale = size / (2.0 * lim);
    let px = |z: &C64| ((z.re + lim) * scale, (lim - z.im) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0) = px(&C64::new(0.0, 0.0));
    let _ = writeln!(
        s,
        r#"<path d="M0 {y0:.2}H{size}M{x0:.2} 0V{size}" stroke="silver" stroke-width="1"/>"#
    );
    let _ = writeln!(s, r#"<g fill="steelblue" fill-opacity="0.6">"#);
    for (_, spectrum) in spectra {
        for z in spectrum {
            let (x, y) = px(z);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5"/>"#);
        }
    }
    let _ = writeln!(s, "</g>");
    if !boundary.is_empty() {
        let pts: Vec<String> = boundary
            .iter()
            .chain(boundary.first())
            .map(|z| {
                let (x, y) = px(z);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1"/>"#,
            pts.join(" ")
        );
    }
    for z in predictions {
        let (x, y) = px(z);
        let a = 6.0;
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="crimson" stroke-width="2"/>"#,
            x - a,
            y - a,
            x + a,
            y + a,
            x - a,
            y + a,
            x + a,
            y - a
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Turns a finished run in `out_dir` into plot data under `out_dir/plots`.
pub fn export(out_dir: &Path) -> Result<ExportFiles> {
    let config = ExperimentConfig::from_path(&out_dir.join(CONFIG_FILE))?;
    let summary_text = fs::read_to_string(out_dir.join(SUMMARY_FILE))?;
    let summary: ExperimentSummary = serde_json::from_str(&summary_text)?;
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots)?;

    let mut spectra = Vec::new();
    if config.kind.has_spectrum() {
        for t in 0..config.trial_count() {
            let path = trial_csv_path(out_dir, t);
            if path.exists() {
                spectra.push((t, read_spectrum_csv(&path)?));
            }
        }
    }
    let region = crate::geometry::EllipticRegion::new(summary.rho, summary.epsilon)?;
    let boundary = region.boundary_points(BOUNDARY_POINTS)?;

    let files = ExportFiles {
        scatter_csv: plots.join("scatter.csv"),
        boundary_csv: plots.join("boundary.csv"),
        predictions_csv: plots.join("predictions.csv"),
        svg: plots.join("scatter.svg"),
        summary_json: plots.join("summary.json"),
        schema: plots.join(SUMMARY_SCHEMA_FILE),
    };
    let mut w = BufWriter::new(fs::File::create(&files.scatter_csv)?);
    writeln!(w, "trial,re,im")?;
    for (t, s) in &spectra {
        for z in s {
            writeln!(w, "{t},{},{}", z.re, z.im)?;
        }
    }
    w.flush()?;
    write_points_csv(
        BufWriter::new(fs::File::create(&files.boundary_csv)?),
        &boundary,
    )?;
    write_points_csv(
        BufWriter::new(fs::File::create(&files.predictions_csv)?),
        &summary.predictions,
    )?;
    fs::write(
        &files.svg,
        render_svg(&spectra, &boundary, &summary.predictions),
    )?;
    fs::write(&files.summary_json, summary_text)?;
    fs::write(&files.schema, SUMMARY_SCHEMA)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_counts() {
        let spectra = vec![
            (0, vec![C64::new(0.1, 0.2), C64::new(-0.3, 0.0)]),
            (1, vec![C64::new(0.5, 0.5), C64::new(0.0, -0.9)]),
        ];
        let boundary = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        let svg = render_svg(&spectra, &boundary, &[C64::new(2.0, 0.0)]);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("stroke=\"crimson\"").count(), 1);
    }

    #[test]
    fn schema_is_json() {
        let v: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
        assert_eq!(v["title"], "ExperimentSummary");
    }
}
