//! Tab-separated plot data: the augmented points plus each fitted curve on a
//! regular grid.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::edf::{AugmentedEdf, TailSide};
use crate::fit::FittedCurve;

pub const GRID_POINTS: usize = 200;

/// Writes `x`, `empirical_b` and one column per fit. Data rows leave the fit
/// columns blank; grid rows fill only their own fit's column. Each grid spans
/// its tail slice, stretched outward to the most extreme value in `extremes`
/// on that side.
pub fn emit_plot_data(
    e: &AugmentedEdf,
    fits: &[FittedCurve],
    extremes: &[f64],
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_plot_data(e, fits, extremes, &mut w)?;
    w.flush()
}

/// `(x, empirical b, (fit index, fitted value))`
type Row = (f64, Option<f64>, Option<(usize, f64)>);

pub fn write_plot_data<W: Write>(
    e: &AugmentedEdf,
    fits: &[FittedCurve],
    extremes: &[f64],
    w: &mut W,
) -> io::Result<()> {
    let mut rows: Vec<Row> = e.points().iter().map(|p| (p.a, Some(p.b), None)).collect();
    for (k, f) in fits.iter().enumerate() {
        for x in grid(f, extremes) {
            rows.push((x, None, Some((k, f.eval(x)))));
        }
    }
    rows.sort_by(|l, r| l.0.total_cmp(&r.0));

    write!(w, "x\tempirical_b")?;
    for f in fits {
        write!(w, "\t{}_{}", f.side, f.family)?;
    }
    writeln!(w)?;
    for (x, b, fitted) in rows {
        write!(w, "{x}\t")?;
        if let Some(b) = b {
            write!(w, "{b}")?;
        }
        for k in 0..fits.len() {
            write!(w, "\t")?;
            if let Some((j, v)) = fitted {
                if j == k {
                    write!(w, "{v}")?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

fn grid(f: &FittedCurve, extremes: &[f64]) -> Vec<f64> {
    let (mut lo, mut hi) = f.a_range;
    match f.side {
        TailSide::Lower => lo = extremes.iter().copied().fold(lo, f64::min),
        TailSide::Upper => hi = extremes.iter().copied().fold(hi, f64::max),
    }
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| if i == GRID_POINTS - 1 { hi } else { lo + step * i as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::CurveFamily;
    use crate::edf::augment;
    use crate::fit::{fit_tail, TailFitConfig, TailSize};
    use crate::sample::Sample;

    fn text(e: &AugmentedEdf, fits: &[FittedCurve], extremes: &[f64]) -> String {
        let mut buf = Vec::new();
        write_plot_data(e, fits, extremes, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn data_rows_only() {
        let e = augment(&Sample::new(vec![3.0, 1.0, 2.0], None).unwrap());
        let t = text(&e, &[], &[]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "x\tempirical_b");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "1\t0.16666666666666666");
        assert_eq!(lines[2], "1.5\t0.3333333333333333");
    }

    #[test]
    fn grid_per_fit() {
        let values: Vec<f64> = (1..=40).map(|i| (i as f64).ln() * 10.0).collect();
        let e = augment(&Sample::new(values, None).unwrap());
        let lower = fit_tail(&e, &TailFitConfig::new(TailSide::Lower, CurveFamily::Quadratic).size(TailSize::Count(8)))
            .unwrap();
        let upper =
            fit_tail(&e, &TailFitConfig::new(TailSide::Upper, CurveFamily::Gumbel).size(TailSize::Count(8))).unwrap();
        let t = text(&e, &[lower.clone(), upper.clone()], &[60.0]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "x\tempirical_b\tlower_quadratic\tupper_gumbel");
        assert_eq!(lines.len(), 1 + 79 + 2 * GRID_POINTS);
        assert!(lines.iter().skip(1).all(|l| l.split('\t').count() == 4));
        let last: Vec<&str> = lines.last().unwrap().split('\t').collect();
        assert_eq!(last[0], "60");
        assert!(last[1].is_empty() && last[2].is_empty() && !last[3].is_empty());
        // the lower grid is not stretched by an upper-side value
        let lower_cells = lines.iter().skip(1).filter(|l| !l.split('\t').nth(2).unwrap().is_empty()).count();
        assert_eq!(lower_cells, GRID_POINTS);
        assert_eq!(grid(&lower, &[60.0])[0], lower.a_range.0);
        assert_eq!(*grid(&upper, &[60.0]).last().unwrap(), 60.0);
    }
}
