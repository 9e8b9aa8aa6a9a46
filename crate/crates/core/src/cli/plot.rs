//! Minimal SVG line plot with error bars for sweep CSVs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(mean, std)` per setting.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub kind: String,
    pub settings: Vec<String>,
    pub fused: Series,
    pub baseline: Series,
}

fn parse_err(msg: String) -> Error {
    Error::Parse {
        what: "sweep CSV",
        msg,
    }
}

/// Pulls the `mean`/`std` rows for `metric` (`ergas`, `sam_deg` or `ssim`)
/// out of a sweep CSV.
pub fn summarize(csv: &str, metric: &str) -> Result<SweepSummary> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| parse_err("empty file".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| parse_err(format!("no {name} column")))
    };
    let (kind_c, set_c, trial_c) = (col("kind")?, col("setting")?, col("trial")?);
    let (fused_c, base_c) = (col(metric)?, col(&format!("baseline_{metric}"))?);

    let mut kind = String::new();
    let mut settings: Vec<String> = Vec::new();
    let mut fused: Vec<(f64, f64)> = Vec::new();
    let mut baseline: Vec<(f64, f64)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(parse_err(format!(
                "row {} has {} cells",
                n + 2,
                cells.len()
            )));
        }
        let value = |c: usize| {
            cells[c]
                .parse::<f64>()
                .map_err(|_| parse_err(format!("row {}: {:?}", n + 2, cells[c])))
        };
        let stat = cells[trial_c];
        if stat != "mean" && stat != "std" {
            continue;
        }
        kind = cells[kind_c].to_string();
        let setting = cells[set_c].to_string();
        let idx = match settings.iter().position(|s| *s == setting) {
            Some(i) => i,
            None => {
                settings.push(setting);
                fused.push((f64::NAN, 0.0));
                baseline.push((f64::NAN, 0.0));
                settings.len() - 1
            }
        };
        if stat == "mean" {
            fused[idx].0 = value(fused_c)?;
            baseline[idx].0 = value(base_c)?;
        } else {
            fused[idx].1 = value(fused_c)?;
            baseline[idx].1 = value(base_c)?;
        }
    }
    if settings.is_empty() || fused.iter().chain(&baseline).any(|p| p.0.is_nan()) {
        return Err(parse_err("no complete mean/std summary rows".into()));
    }
    Ok(SweepSummary {
        kind,
        settings,
        fused: Series {
            name: "fused".into(),
            points: fused,
        },
        baseline: Series {
            name: "interpolation".into(),
            points: baseline,
        },
    })
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

pub fn render_svg(summary: &SweepSummary, metric: &str) -> String {
    let numeric: Option<Vec<f64>> = summary.settings.iter().map(|s| s.parse().ok()).collect();
    let xs: Vec<f64> = numeric
        .clone()
        .unwrap_or_else(|| (0..summary.settings.len()).map(|i| i as f64).collect());
    let (x_lo, x_hi) = span(xs.iter().copied());
    let series = [(&summary.fused, "#1f77b4"), (&summary.baseline, "#d62728")];
    let (y_lo, y_hi) = span(
        series
            .iter()
            .flat_map(|(s, _)| s.points.iter().flat_map(|&(m, sd)| [m - sd, m + sd])),
    );
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\">{kind}</text>\n\
         <text x=\"15\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {cy})\">{metric}</text>\n",
        b = H - MARGIN,
        r = W - MARGIN,
        cx = W / 2.0,
        xl = H - 15.0,
        cy = H / 2.0,
        kind = summary.kind,
    );
    for (x, label) in xs.iter().zip(&summary.settings) {
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>\n",
            px(*x),
            H - MARGIN + 18.0
        );
    }
    for i in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y:.3}</text>\n",
            MARGIN - 6.0,
            py(y) + 4.0
        );
    }
    for (k, (s, colour)) in series.iter().enumerate() {
        let path: Vec<String> = xs
            .iter()
            .zip(&s.points)
            .map(|(x, p)| format!("{:.1},{:.1}", px(*x), py(p.0)))
            .collect();
        svg += &format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        );
        for (x, &(m, sd)) in xs.iter().zip(&s.points) {
            let x = px(*x);
            svg += &format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"{colour}\"/>\n<circle cx=\"{x:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{colour}\"/>\n",
                py(m - sd),
                py(m + sd),
                py(m)
            );
        }
        svg += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{colour}\">{}</text>\n",
            W - MARGIN - 100.0,
            MARGIN + 16.0 * k as f64,
            s.name
        );
    }
    svg + "</svg>\n"
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        (lo - 0.5, lo + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "kind,setting,trial,seed,ergas,sam_deg,ssim,baseline_ergas,baseline_sam_deg,baseline_ssim\n\
        snr,10,0,0,3,4,0.9,5,6,0.8\n\
        snr,10,mean,,3,4,0.9,5,6,0.8\n\
        snr,10,std,,0.1,0.2,0.01,0.3,0.4,0.02\n\
        snr,15,mean,,2,3,0.95,4,5,0.85\n\
        snr,15,std,,0,0,0,0,0,0\n";

    #[test]
    fn summary_and_svg() {
        let s = summarize(CSV, "ergas").unwrap();
        assert_eq!(s.settings, vec!["10", "15"]);
        assert_eq!(s.fused.points, vec![(3.0, 0.1), (2.0, 0.0)]);
        assert_eq!(s.baseline.points[0], (5.0, 0.3));
        let svg = render_svg(&s, "ergas");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn categorical_settings() {
        let csv = CSV
            .replace(",10,", ",bicubic,")
            .replace(",15,", ",nearest,");
        let s = summarize(&csv, "ssim").unwrap();
        assert!(render_svg(&s, "ssim").contains(">nearest<"));
    }

    #[test]
    fn errors() {
        assert!(summarize("", "ergas").is_err());
        assert!(summarize(CSV, "psnr").is_err());
        assert!(summarize(
            &CSV.replace("snr,15,std,,0,0,0,0,0,0\n", "snr,15,std,,0\n"),
            "ergas"
        )
        .is_err());
        let only_trials: String = CSV.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(summarize(&only_trials, "ergas").is_err());
    }
}
