//! Ratio-curve SVG rendering from run CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::CSV_HEADER;
use crate::error::{invalid, Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Mean regret ratio per round for one `(algorithm, topology)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub algorithm: String,
    pub topology: String,
    /// `(round, mean over seeds of the node-mean ratio)`
    pub points: Vec<(usize, f64)>,
}

impl Curve {
    pub fn label(&self) -> String {
        format!("{} ({})", self.algorithm, self.topology)
    }
}

type SeedKey = (String, String, u64);

/// Average over nodes within a seed, then over seeds.
pub fn read_curves(paths: &[impl AsRef<Path>]) -> Result<Vec<Curve>> {
    if paths.is_empty() {
        return Err(invalid("no CSV files to plot"));
    }
    // (alg, topo, seed) -> round -> (sum, count)
    let mut per_seed: BTreeMap<SeedKey, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(invalid(format!(
                "{} does not have the run schema {}",
                path.display(),
                CSV_HEADER.join(",")
            )));
        }
        for (k, record) in r.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let parse_err = |what: &str| Error::Parse {
                line: k + 2,
                message: format!("{}: bad {what}", path.display()),
            };
            let round: usize = field(0).parse().map_err(|_| parse_err("round"))?;
            let seed: u64 = field(4).parse().map_err(|_| parse_err("seed"))?;
            let ratio: f64 = field(7).parse().map_err(|_| parse_err("regret_ratio"))?;
            let slot = per_seed
                .entry((field(2).to_string(), field(3).to_string(), seed))
                .or_default()
                .entry(round)
                .or_insert((0.0, 0));
            slot.0 += ratio;
            slot.1 += 1;
        }
    }
    let mut grouped: BTreeMap<(String, String), BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for ((alg, topo, _), rounds) in per_seed {
        let curve = grouped.entry((alg, topo)).or_default();
        for (round, (sum, count)) in rounds {
            let slot = curve.entry(round).or_insert((0.0, 0));
            slot.0 += sum / count as f64;
            slot.1 += 1;
        }
    }
    if grouped.is_empty() {
        return Err(invalid("CSV files contain no rows"));
    }
    Ok(grouped
        .into_iter()
        .map(|((algorithm, topology), rounds)| Curve {
            algorithm,
            topology,
            points: rounds.into_iter().map(|(t, (s, c))| (t, s / c as f64)).collect(),
        })
        .collect())
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    mag * if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of the curves: x is the round, y the mean regret ratio.
pub fn render_svg(curves: &[Curve]) -> Result<String> {
    let points = curves.iter().flat_map(|c| c.points.iter());
    let (mut x_max, mut y_min, mut y_max) = (1usize, 0.0f64, 0.0f64);
    let mut any = false;
    for &(t, y) in points {
        if !y.is_finite() {
            return Err(invalid("regret ratio is not finite"));
        }
        any = true;
        x_max = x_max.max(t);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !any {
        return Err(invalid("nothing to plot"));
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let y_step = nice_step(y_max - y_min);
    let y_lo = (y_min / y_step).floor() * y_step;
    let y_hi = (y_max / y_step).ceil() * y_step;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - 1.0) / ((x_max as f64 - 1.0).max(1.0)) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let ticks = ((y_hi - y_lo) / y_step).round() as usize;
    for k in 0..=ticks {
        let y = y_lo + k as f64 * y_step;
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            fmt_tick(y)
        );
    }
    let x_step = nice_step((x_max as f64 - 1.0).max(1.0)).max(1.0);
    let mut x = x_step;
    let mut x_ticks = vec![1.0];
    while x <= x_max as f64 + 1e-9 {
        x_ticks.push(x);
        x += x_step;
    }
    for t in x_ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            TOP + plot_h + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">regret / round</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (k, curve) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = curve
            .points
            .iter()
            .map(|&(t, y)| format!("{:.2},{:.2}", sx(t as f64), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&curve.label())
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Read run CSVs and write one SVG with a line per `(algorithm, topology)`.
pub fn emit_plots(paths: &[impl AsRef<Path>], out: &Path) -> Result<()> {
    let svg = render_svg(&read_curves(paths)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(dir: &Path, name: &str, alg: &str, seed: u64, ratios: &[[f64; 2]]) -> std::path::PathBuf {
        let mut text = CSV_HEADER.join(",") + "\n";
        for (t, r) in ratios.iter().enumerate() {
            for (node, v) in r.iter().enumerate() {
                text += &format!("{},{node},{alg},complete,{seed},0.5,{},{v},1,1\n", t + 1, v * (t + 1) as f64);
            }
        }
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn averages_nodes_then_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "dobga", 1, &[[1.0, 3.0], [0.5, 0.5]]);
        let b = write_csv(dir.path(), "b.csv", "dobga", 2, &[[0.0, 0.0], [0.5, 1.5]]);
        let curves = read_curves(&[a, b]).unwrap();
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].points, vec![(1, 1.0), (2, 0.75)]);
    }

    #[test]
    fn single_csv_single_line() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "dobga", 1, &[[1.0, 3.0], [0.5, 0.5]]);
        let out = dir.path().join("plot.svg");
        emit_plots(&[a], &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn legend_per_algorithm_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_csv(dir.path(), "a.csv", "dobga", 1, &[[1.0, 3.0], [0.5, 0.5]]);
        let b = write_csv(dir.path(), "b.csv", "mono-dmfw", 1, &[[2.0, 3.0], [1.5, 0.5]]);
        let files = [a, b];
        let svg = render_svg(&read_curves(&files).unwrap()).unwrap();
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert_eq!(svg, render_svg(&read_curves(&files).unwrap()).unwrap());
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let none: [&Path; 0] = [];
        assert!(read_curves(&none).is_err());
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "round,node,ratio\n1,0,0.5\n").unwrap();
        assert!(read_curves(&[bad]).is_err());
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_step(10.0), 2.0);
        assert_eq!(nice_step(0.7), 0.2);
        assert_eq!(fmt_tick(0.30000000000000004), "0.3");
        assert_eq!(fmt_tick(-0.0), "0");
    }
}
