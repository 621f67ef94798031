//! Report writers: JSON summaries, CSV field dumps, two-column plot data.
//!
//! Everything written here is a pure function of its inputs, so runs with the
//! same configuration and seed produce byte-identical files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hardy_core::lattice::FrequencyLattice;
use hardy_core::linalg::C;
use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
    quiet: bool,
}

impl OutDir {
    pub fn create(root: &Path, quiet: bool) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            quiet,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        self.note(&path);
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.note(&path);
        Ok(())
    }

    fn note(&self, path: &Path) {
        if !self.quiet {
            println!("wrote {}", path.display());
        }
    }

    /// Vector-field samples: index columns, then re/im per component.
    pub fn write_field_csv(
        &self,
        name: &str,
        lattice: &FrequencyLattice,
        samples: &[C],
        comps: usize,
    ) -> Result<()> {
        let mut text = String::new();
        let n = lattice.n;
        let size = lattice.size;
        for ax in 0..n {
            text.push_str(&format!("j{},", ax + 1));
        }
        for c in 0..comps {
            text.push_str(&format!("re{c},im{c}"));
            if c + 1 < comps {
                text.push(',');
            }
        }
        text.push('\n');
        for flat in 0..lattice.num_points() {
            let mut rem = flat;
            let mut idx = vec![0usize; n];
            for ax in (0..n).rev() {
                idx[ax] = rem % size;
                rem /= size;
            }
            for ax in 0..n {
                text.push_str(&format!("{},", idx[ax]));
            }
            for c in 0..comps {
                let z = samples[flat * comps + c];
                text.push_str(&format!("{:e},{:e}", z.re, z.im));
                if c + 1 < comps {
                    text.push(',');
                }
            }
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// Multivector samples: point index, basis bitmask, re, im.
    pub fn write_multivector_csv(
        &self,
        name: &str,
        samples: &[C],
        masks: &[u32],
    ) -> Result<()> {
        let dim = masks.len();
        let mut text = String::from("point,bitmask,re,im\n");
        for (flat, chunk) in samples.chunks(dim).enumerate() {
            for (ci, z) in chunk.iter().enumerate() {
                text.push_str(&format!("{},{},{:e},{:e}\n", flat, masks[ci], z.re, z.im));
            }
        }
        self.write_text(name, &text)
    }

    /// Two-column plot data.
    pub fn write_plot(&self, name: &str, points: &[(f64, f64)]) -> Result<()> {
        let mut text = String::new();
        for (x, y) in points {
            text.push_str(&format!("{x:e} {y:e}\n"));
        }
        self.write_text(name, &text)
    }

    /// Key/value rows.
    pub fn write_kv_csv(&self, name: &str, rows: &[(String, String)]) -> Result<()> {
        let mut text = String::from("key,value\n");
        for (k, v) in rows {
            text.push_str(&format!("{k},{v}\n"));
        }
        self.write_text(name, &text)
    }
}

/// Spectrum dump: one `re,im` row per eigenvalue.
pub fn spectrum_csv(values: &[C]) -> String {
    let mut text = String::from("re,im\n");
    for v in values {
        text.push_str(&format!("{:e},{:e}\n", v.re, v.im));
    }
    text
}
