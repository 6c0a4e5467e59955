//! Plot-ready CSV bundles derived from the tables of a `verify` run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::ConfigError;

/// A CSV file read back as header plus string cells.
struct Csv {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines();
        let columns = lines
            .next()
            .ok_or_else(|| anyhow::anyhow!("{} is empty", path.display()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Ok(Self { columns, rows })
    }

    fn index(&self, name: &str) -> anyhow::Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| anyhow::anyhow!("missing column {name}"))
    }

    /// Keeps the columns selected by `keep`, cells copied verbatim.
    fn select(&self, keep: impl Fn(&str) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.columns.len()).filter(|i| keep(&self.columns[*i])).collect();
        Self {
            columns: idx.iter().map(|i| self.columns[*i].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|i| r[*i].clone()).collect()).collect(),
        }
    }

    fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
    }
}

/// Largest remainder per `(center_point, scale)` pair, in input order.
fn residual_vs_scale(fits: &Csv) -> anyhow::Result<Csv> {
    let (c, s, r) = (fits.index("center_point")?, fits.index("scale")?, fits.index("remainder")?);
    let mut order = Vec::new();
    let mut worst: BTreeMap<(String, String), (f64, String)> = BTreeMap::new();
    for row in &fits.rows {
        let key = (row[c].clone(), row[s].clone());
        let v: f64 = row[r].parse().with_context(|| format!("remainder {:?}", row[r]))?;
        match worst.get_mut(&key) {
            Some(w) if v <= w.0 => {}
            Some(w) => *w = (v, row[r].clone()),
            None => {
                order.push(key.clone());
                worst.insert(key, (v, row[r].clone()));
            }
        }
    }
    Ok(Csv {
        columns: vec!["center_point".into(), "scale".into(), "max_remainder".into()],
        rows: order
            .into_iter()
            .map(|k| {
                let cell = worst[&k].1.clone();
                vec![k.0, k.1, cell]
            })
            .collect(),
    })
}

/// Writes the plot bundles next to the tables in `dir` and returns their
/// paths. Fails with a configuration error when `dir` holds no verify run.
pub fn write_bundles(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.join("report.json").is_file() {
        return Err(ConfigError(format!(
            "{} holds no verify run (report.json missing); run `partlin verify` first",
            dir.display()
        ))
        .into());
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, csv: Csv| -> anyhow::Result<()> {
        let path = dir.join(name);
        csv.write(&path)?;
        written.push(path);
        Ok(())
    };
    let fits = dir.join("exponent_fits.csv");
    if fits.is_file() {
        let t = Csv::read(&fits)?;
        emit("plot_residual_vs_scale.csv", residual_vs_scale(&t)?)?;
        emit(
            "plot_exponent_fits.csv",
            t.select(|c| ["center_point", "scale", "direction_id", "remainder"].contains(&c)),
        )?;
    }
    let leaves = dir.join("leaves.csv");
    if leaves.is_file() {
        let t = Csv::read(&leaves)?;
        emit(
            "plot_leaf_cross_section.csv",
            t.select(|c| c.starts_with("x_") || c.starts_with("z_u_") || c.starts_with("leaf_")),
        )?;
    }
    let demo = dir.join("demo_remainders.csv");
    if demo.is_file() {
        emit("plot_demo_remainders.csv", Csv::read(&demo)?)?;
    }
    let residual = dir.join("conjugacy_residual.csv");
    if residual.is_file() {
        let t = Csv::read(&residual)?;
        emit("plot_conjugacy_residual.csv", t.select(|c| c != "threshold" && c != "pass"))?;
    }
    Ok(written)
}
