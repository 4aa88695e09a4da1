//! Merges result CSVs into a markdown table and an SVG heatmap of
//! `log10(RMSE)` by (series, N).
//!
//! An input CSV needs `transform`, `N` and an RMSE column (`best_rmse` or
//! `rmse`); a `method` column, when present, splits rows into one series per
//! method. The provenance hash of an input is the SHA-256 of its sibling
//! `<stem>.config.json`, or of the CSV itself when there is none.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// RMSE below which a transform counts as recovered.
pub const RECOVERED_RMSE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub series: String,
    pub n: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportInput {
    pub path: PathBuf,
    pub config_sha256: String,
    pub cells: Vec<Cell>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<dir>/<stem>.config.json` next to `path`.
pub fn config_path_for(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    path.with_file_name(format!("{stem}.config.json"))
}

pub fn parse_cells(csv_text: &str) -> Result<Vec<Cell>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::InvalidArgument(format!("CSV lacks a {name:?} column"));
    let t = col("transform").ok_or_else(|| missing("transform"))?;
    let n = col("N").ok_or_else(|| missing("N"))?;
    let r = col("best_rmse").or_else(|| col("rmse")).ok_or_else(|| missing("rmse"))?;
    let method = col("method");
    let mut cells = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |what: &str, v: &str| Error::InvalidArgument(format!("bad {what} value {v:?}"));
        let series = match method {
            Some(m) => format!("{} ({})", field(t), field(m)),
            None => field(t).to_string(),
        };
        cells.push(Cell {
            series,
            n: field(n).parse().map_err(|_| parse_err("N", field(n)))?,
            rmse: field(r).parse().map_err(|_| parse_err("rmse", field(r)))?,
        });
    }
    Ok(cells)
}

pub fn load_input(path: &Path) -> Result<ReportInput> {
    let text = std::fs::read_to_string(path)?;
    let config = config_path_for(path);
    let hashed = if config.exists() { std::fs::read(&config)? } else { text.as_bytes().to_vec() };
    Ok(ReportInput { path: path.to_path_buf(), config_sha256: sha256_hex(&hashed), cells: parse_cells(&text)? })
}

fn grid(cells: &[Cell]) -> (Vec<String>, Vec<usize>) {
    let mut series: Vec<String> = Vec::new();
    for c in cells {
        if !series.contains(&c.series) {
            series.push(c.series.clone());
        }
    }
    let sizes: BTreeSet<usize> = cells.iter().map(|c| c.n).collect();
    (series, sizes.into_iter().collect())
}

fn lookup(cells: &[Cell], series: &str, n: usize) -> Option<f64> {
    cells.iter().rev().find(|c| c.series == series && c.n == n).map(|c| c.rmse)
}

/// Fill colour of a heatmap cell. Recovered cells get greens (darker for
/// smaller error), the rest run from yellow to red as `log10(RMSE)` grows.
pub fn rmse_color(rmse: f64) -> String {
    if !rmse.is_finite() {
        return "#7f7f7f".into();
    }
    let l = rmse.max(1e-16).log10();
    if rmse < RECOVERED_RMSE {
        // l in [-12, -4] -> dark to light green
        let t = ((l + 12.0) / 8.0).clamp(0.0, 1.0);
        let g = (110.0 + 100.0 * t) as u8;
        let rb = (20.0 + 120.0 * t) as u8;
        format!("#{rb:02x}{g:02x}{rb:02x}")
    } else {
        // l in [-4, 0] -> yellow to red
        let t = ((l + 4.0) / 4.0).clamp(0.0, 1.0);
        let g = (220.0 * (1.0 - t)) as u8;
        format!("#e6{g:02x}30")
    }
}

pub fn render_markdown(inputs: &[ReportInput]) -> String {
    let cells: Vec<Cell> = inputs.iter().flat_map(|i| i.cells.iter().cloned()).collect();
    let (series, sizes) = grid(&cells);
    let mut s = String::from("# RMSE by transform and size\n\n");
    s.push_str("| transform |");
    for n in &sizes {
        s.push_str(&format!(" N={n} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(sizes.len()));
    s.push('\n');
    for name in &series {
        s.push_str(&format!("| {name} |"));
        for &n in &sizes {
            match lookup(&cells, name, n) {
                Some(r) if r < RECOVERED_RMSE => s.push_str(&format!(" **{r:.1e}** |")),
                Some(r) => s.push_str(&format!(" {r:.1e} |")),
                None => s.push_str(" |"),
            }
        }
        s.push('\n');
    }
    s.push_str(&format!("\nBold cells are below {RECOVERED_RMSE:.0e}.\n\n## Inputs\n\n"));
    for i in inputs {
        s.push_str(&format!("- `{}`: config sha256 `{}`\n", i.path.display(), i.config_sha256));
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(cells: &[Cell]) -> String {
    let (series, sizes) = grid(cells);
    let (label_w, cell_w, cell_h, head_h) = (190, 72, 28, 30);
    let width = label_w + cell_w * sizes.len() + 10;
    let height = head_h + cell_h * series.len() + 10;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    for (j, n) in sizes.iter().enumerate() {
        let x = label_w + j * cell_w + cell_w / 2;
        s.push_str(&format!("<text x=\"{x}\" y=\"20\" text-anchor=\"middle\">N={n}</text>\n"));
    }
    for (i, name) in series.iter().enumerate() {
        let y = head_h + i * cell_h;
        s.push_str(&format!("<text x=\"4\" y=\"{}\">{}</text>\n", y + 18, xml_escape(name)));
        for (j, &n) in sizes.iter().enumerate() {
            let Some(r) = lookup(cells, name, n) else { continue };
            let x = label_w + j * cell_w;
            s.push_str(&format!(
                "<rect class=\"{}\" x=\"{x}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{}\" stroke=\"white\"><title>{} N={n}: {r:e}</title></rect>\n",
                if r < RECOVERED_RMSE { "recovered" } else { "missed" },
                rmse_color(r),
                xml_escape(name)
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1}</text>\n",
                x + cell_w / 2,
                y + 18,
                r.max(1e-300).log10()
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "transform,N,arch,best_rmse\ndft,8,bp,3e-6\ndft,16,bp,2e-3\nhadamard,8,bp,1e-7\n";

    #[test]
    fn grid_has_one_cell_per_pair() {
        let cells = parse_cells(CSV).unwrap();
        let svg = render_svg(&cells);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("class=\"recovered\"").count(), 2);
        let md = render_markdown(&[ReportInput { path: "a.csv".into(), config_sha256: "abc".into(), cells }]);
        assert!(md.contains("| dft | **3.0e-6** | 2.0e-3 |"));
        assert!(md.contains("| hadamard | **1.0e-7** | |"));
        assert!(md.contains("`abc`"));
    }

    #[test]
    fn recovered_band_is_green() {
        for r in [1e-12, 1e-6, 9.9e-5] {
            let c = rmse_color(r);
            let g = u8::from_str_radix(&c[3..5], 16).unwrap();
            let red = u8::from_str_radix(&c[1..3], 16).unwrap();
            assert!(g > red, "{r}: {c}");
        }
        assert!(rmse_color(1e-3).starts_with("#e6"));
    }

    #[test]
    fn method_column_makes_series() {
        let cells = parse_cells("transform,N,method,budget,rmse,wall_ms\ndft,8,sparse,46,0.2,1.0\n").unwrap();
        assert_eq!(cells[0].series, "dft (sparse)");
        assert!(parse_cells("transform,rmse\ndft,1\n").is_err());
    }

    #[test]
    fn hash_prefers_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("run.csv");
        std::fs::write(&csv, CSV).unwrap();
        let plain = load_input(&csv).unwrap();
        assert_eq!(plain.config_sha256, sha256_hex(CSV.as_bytes()));
        std::fs::write(dir.path().join("run.config.json"), "{}").unwrap();
        assert_eq!(load_input(&csv).unwrap().config_sha256, sha256_hex(b"{}"));
        assert!(load_input(&dir.path().join("missing.csv")).is_err());
    }
}
