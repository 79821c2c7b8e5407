//! CSV and JSON files: `#` metadata lines, a header row, then data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use heavytail_pa::{Error, JointCountTable, JointPmf, ModelParams, Result, VERSION};
use serde::Serialize;

/// Provenance written at the top of every CSV.
pub struct Metadata {
    pub command: &'static str,
    pub params: Option<ModelParams>,
    pub seed: Option<u64>,
    pub options: Vec<(&'static str, String)>,
}

impl Metadata {
    pub fn new(command: &'static str) -> Self {
        Metadata {
            command,
            params: None,
            seed: None,
            options: Vec::new(),
        }
    }

    pub fn params(mut self, p: &ModelParams) -> Self {
        self.params = Some(*p);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn option(mut self, key: &'static str, value: impl ToString) -> Self {
        self.options.push((key, value.to_string()));
        self
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# tool: heavytail-pa {VERSION}")?;
        writeln!(w, "# command: {}", self.command)?;
        if let Some(p) = &self.params {
            writeln!(w, "# params: {p}")?;
            match p.derive() {
                Ok(d) => writeln!(
                    w,
                    "# derived: c1={} c2={} a={} alpha_in={} alpha_out={}",
                    d.c1, d.c2, d.a, d.alpha_in, d.alpha_out
                )?,
                Err(_) => writeln!(w, "# derived: unavailable")?,
            }
        }
        if let Some(s) = self.seed {
            writeln!(w, "# seed: {s}")?;
        }
        if !self.options.is_empty() {
            let opts: Vec<String> = self.options.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(w, "# options: {}", opts.join(" "))?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes metadata, `header`, and one line per row.
pub fn write_csv<I>(path: &Path, meta: &Metadata, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    meta.write_to(&mut w)?;
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Data rows of a CSV with the expected header, split on commas.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if !seen_header {
            if fields != header {
                return Err(Error::Format(format!(
                    "{}: expected header {}, found {line}",
                    path.display(),
                    header.join(",")
                )));
            }
            seen_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::Format(format!(
                "{}:{}: expected {} fields",
                path.display(),
                n + 1,
                header.len()
            )));
        }
        rows.push((n + 1, fields));
    }
    if !seen_header {
        return Err(Error::Format(format!("{}: missing header", path.display())));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("{}:{line}: bad value '{s}'", path.display())))
}

pub fn read_counts(path: &Path) -> Result<JointCountTable> {
    read_rows(path, &["i", "j", "N_ij"])?
        .into_iter()
        .map(|(n, f)| Ok((field(path, n, &f[0])?, field(path, n, &f[1])?, field(path, n, &f[2])?)))
        .collect()
}

pub fn read_pmf(path: &Path) -> Result<JointPmf> {
    let cells = read_rows(path, &["i", "j", "p"])?
        .into_iter()
        .map(|(n, f)| Ok((field(path, n, &f[0])?, field(path, n, &f[1])?, field(path, n, &f[2])?)))
        .collect::<Result<Vec<(u64, u64, f64)>>>()?;
    JointPmf::from_masses(cells)
}

pub fn read_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_rows(path, &["I", "O"])?
        .into_iter()
        .map(|(n, f)| Ok((field(path, n, &f[0])?, field(path, n, &f[1])?)))
        .collect()
}

pub fn write_counts(path: &Path, meta: &Metadata, counts: &JointCountTable) -> Result<()> {
    write_csv(
        path,
        meta,
        "i,j,N_ij",
        counts.iter().map(|(i, j, c)| format!("{i},{j},{c}")),
    )
}
