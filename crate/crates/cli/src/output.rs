//! Output files with a resolved-config header, plus the plain-text formats
//! used to pass templates and saddle states between subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use delaydense::transient::AttractorTemplate;
use delaydense::HistoryVector;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes output files, each prefixed with the resolved configuration.
pub struct Emitter<'a> {
    cfg: &'a ExperimentConfig,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Emitter {
            cfg,
            written: Vec::new(),
        }
    }

    fn header(&self) -> String {
        let mut h = format!(
            "# delaydense {VERSION}\n# command = {}\n",
            self.cfg.command()
        );
        for (k, v) in self.cfg.resolved() {
            h.push_str(&format!("# {k} = {v}\n"));
        }
        h
    }

    /// Writes `path`. PGM bodies keep their magic number on the first line,
    /// with the header as comments right after it.
    pub fn write(
        &mut self,
        path: &Path,
        body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let io_err = |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut buf = Vec::new();
        body(&mut buf).map_err(io_err)?;
        let header = self.header();
        let mut out = Vec::with_capacity(buf.len() + header.len());
        if buf.starts_with(b"P2\n") {
            out.extend_from_slice(b"P2\n");
            out.extend_from_slice(header.as_bytes());
            out.extend_from_slice(&buf[3..]);
        } else {
            out.extend_from_slice(header.as_bytes());
            out.extend_from_slice(&buf);
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        fs::write(path, out).map_err(io_err)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Lines of `path` with comments and blank lines removed.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn numbers(path: &Path, line: usize, fields: &[&str]) -> Result<Vec<f64>, CliError> {
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("bad number `{f}`")))
        })
        .collect()
}

/// CSV `label,kind,saddle,step,period_samples,tol,samples...`.
pub fn write_templates<W: Write>(mut w: W, templates: &[AttractorTemplate]) -> io::Result<()> {
    writeln!(w, "label,kind,saddle,step,period_samples,tol,samples")?;
    for t in templates {
        write!(
            w,
            "{},{},{},{},{},{}",
            t.label(),
            t.kind().name(),
            u8::from(t.is_saddle()),
            t.step(),
            t.period_samples(),
            t.tol()
        )?;
        for v in t.samples() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_templates(path: &Path) -> Result<Vec<AttractorTemplate>, CliError> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)?.into_iter().skip(1) {
        let f: Vec<&str> = text.split(',').collect();
        if f.len() < 7 {
            return Err(parse_err(path, line, "template row has too few fields"));
        }
        let label = f[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad label `{}`", f[0])))?;
        let head = numbers(path, line, &f[3..6])?;
        let samples = numbers(path, line, &f[6..])?;
        let t = match f[1] {
            "fixed_point" => AttractorTemplate::fixed_point(label, samples[0], head[0]),
            "periodic" => AttractorTemplate::periodic(label, samples, head[0], head[1]),
            other => return Err(parse_err(path, line, format!("unknown kind `{other}`"))),
        }?;
        let t = t.with_tol(head[2]);
        out.push(if f[2] == "1" { t.as_saddle() } else { t });
    }
    Ok(out)
}

/// CSV `t_anchor,u0,...,uN`, one history vector per row.
pub fn write_states<W: Write>(mut w: W, states: &[HistoryVector]) -> io::Result<()> {
    writeln!(w, "t_anchor,values")?;
    for s in states {
        write!(w, "{}", s.t_anchor())?;
        for v in s.values() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_states(path: &Path) -> Result<Vec<HistoryVector>, CliError> {
    let mut out = Vec::new();
    for (line, text) in data_lines(path)?.into_iter().skip(1) {
        let f: Vec<&str> = text.split(',').collect();
        let v = numbers(path, line, &f)?;
        if v.len() < 3 {
            return Err(parse_err(path, line, "state row has too few values"));
        }
        out.push(HistoryVector::new(v[1..].to_vec(), v[0])?);
    }
    Ok(out)
}
