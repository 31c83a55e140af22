//! Text and CSV renderings of a convergence study.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConvergenceStudy;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Text,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown table format '{other}' (text, csv)")),
        }
    }
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or_else(|| "-".to_string(), |t| format!("{t:.2}"))
}

impl ConvergenceStudy {
    /// Fixed-width table: one row per eigenvalue, one column per level, then
    /// the fitted order, the extrapolated value and any reference value.
    pub fn table_text(&self, omega: bool) -> String {
        let c = &self.config;
        let mut out = String::new();
        writeln!(
            out,
            "# {}: family {}, domain {}, boundary {}, seed {}",
            c.name, c.family, c.domain, c.boundary, c.seed
        )
        .unwrap();
        let has_ref = !c.reference.is_empty();
        let block = |out: &mut String, label: &str, map: &dyn Fn(f64) -> f64| {
            let mut header = format!("{:<8}", label);
            for l in &self.levels {
                write!(header, "{:>16}", format!("N={}", l.n)).unwrap();
            }
            write!(header, "{:>8}{:>16}", "order", "extrapolated").unwrap();
            if has_ref {
                write!(header, "{:>16}", "reference").unwrap();
            }
            writeln!(out, "{}", header.trim_end()).unwrap();
            for (i, fit) in self.fits.iter().enumerate() {
                let mut row = format!("{:<8}", format!("{label}{}", i + 1));
                for l in &self.levels {
                    write!(row, "{:>16.6}", map(l.eigenvalues[i])).unwrap();
                }
                write!(row, "{:>8}{:>16.6}", fmt_order(fit.order), map(fit.extrapolated)).unwrap();
                if let Some(r) = c.reference.get(i) {
                    write!(row, "{:>16.6}", map(*r)).unwrap();
                }
                writeln!(out, "{row}").unwrap();
            }
        };
        block(&mut out, "λ", &|v| v);
        if omega {
            writeln!(out).unwrap();
            block(&mut out, "ω", &f64::sqrt);
        }
        for note in &self.notes {
            writeln!(out, "# note: {note}").unwrap();
        }
        out
    }

    /// CSV with a header row; numbers use the shortest round-trip form.
    pub fn table_csv(&self, omega: bool) -> String {
        let mut out = String::new();
        let mut header = vec!["index".to_string()];
        header.extend(self.levels.iter().map(|l| format!("lambda_N{}", l.n)));
        header.extend(["order".to_string(), "extrapolated".to_string(), "reference".to_string()]);
        if omega {
            header.extend(self.levels.iter().map(|l| format!("omega_N{}", l.n)));
            header.push("omega_extrapolated".into());
        }
        writeln!(out, "{}", header.join(",")).unwrap();
        for (i, fit) in self.fits.iter().enumerate() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(self.levels.iter().map(|l| l.eigenvalues[i].to_string()));
            row.push(fit.order.map_or(String::new(), |t| t.to_string()));
            row.push(fit.extrapolated.to_string());
            row.push(self.config.reference.get(i).map_or(String::new(), |r| r.to_string()));
            if omega {
                row.extend(self.levels.iter().map(|l| l.eigenvalues[i].sqrt().to_string()));
                row.push(fit.extrapolated.sqrt().to_string());
            }
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

/// Writes the study table in `format`; `ω` columns follow the config flag.
pub fn emit_table(study: &ConvergenceStudy, format: TableFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        TableFormat::Text => study.table_text(study.config.omega),
        TableFormat::Csv => study.table_csv(study.config.omega),
    };
    std::fs::write(path, text)?;
    Ok(())
}
