//! Renders a markdown table and an SVG heatmap from a result CSV.

use bpfactor::report::{parse_cells, render_markdown, render_svg, ReportInput};

const RESULTS: &str = "transform,N,best_rmse
dft,8,4.1e-5
dft,16,8.0e-5
dct,8,9.9e-5
dct,16,3.2e-2
randn,8,1.9e-1
randn,16,2.1e-1
";

fn main() -> bpfactor::Result<()> {
    let cells = parse_cells(RESULTS)?;
    let input = ReportInput { path: "inline.csv".into(), config_sha256: "-".into(), cells: cells.clone() };
    println!("{}", render_markdown(&[input]));
    let path = std::env::temp_dir().join("bpfactor_heatmap.svg");
    std::fs::write(&path, render_svg(&cells))?;
    println!("heatmap written to {}", path.display());
    Ok(())
}
