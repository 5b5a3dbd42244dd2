use crate::config::RunConfig;
use crate::Result;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Output directory of one command. Records every file it hands out so the
/// manifest can list them.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    files: Mutex<Vec<String>>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Mutex::new(Vec::new()),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.files.lock().unwrap().push(name.to_string());
        self.root.join(name)
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<fs::File>> {
        Ok(csv::Writer::from_path(self.path(name))?)
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.path(name), contents)?;
        Ok(())
    }

    /// `manifest.toml`: tool version, command and the full config.
    pub fn manifest(&self, cfg: &RunConfig) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'static str,
            files: Vec<String>,
            config: &'a RunConfig,
        }
        let mut files = self.files.lock().unwrap().clone();
        files.sort();
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command.name(),
            files,
            config: cfg,
        };
        let text = toml::to_string(&m).expect("manifest serializes");
        fs::write(self.root.join("manifest.toml"), text)?;
        Ok(())
    }
}

/// Gnuplot script drawing `plots` into `plot.png` panels.
pub struct PlotScript {
    lines: Vec<String>,
}

impl PlotScript {
    pub fn new(title: &str) -> Self {
        PlotScript {
            lines: vec![
                "# gnuplot script; run `gnuplot plot.gp` in this directory".into(),
                "set datafile separator ','".into(),
                "set key autotitle columnhead".into(),
                "set terminal pngcairo size 900,600".into(),
                format!("set title '{title}'"),
            ],
        }
    }

    pub fn line(mut self, l: impl Into<String>) -> Self {
        self.lines.push(l.into());
        self
    }

    /// One PNG per call: `set output`, then the plot command.
    pub fn panel(self, png: &str, plot: &str) -> Self {
        self.line(format!("set output '{png}'")).line(plot.to_string())
    }

    pub fn write(self, out: &OutDir) -> Result<()> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        out.write("plot.gp", text.as_bytes())
    }
}
