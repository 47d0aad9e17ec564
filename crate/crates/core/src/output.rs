//! CSV and manifest writers. Every CSV starts with a `# manifest-hash:` line
//! and formats floats like C's `%.17g`, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observables::{MomentReport, WignerSnapshot};

/// Formats `x` as C's `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    fmt_g(x, 17)
}

/// C-style `%.{precision}g`.
pub fn fmt_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Hex SHA-256 of `text`.
pub fn manifest_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Output directory bound to one manifest.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    hash: String,
}

impl OutputDir {
    /// Creates `dir` and writes `manifest.toml`.
    pub fn create(dir: &Path, manifest: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let out = Self {
            dir: dir.to_path_buf(),
            hash: manifest_hash(manifest),
        };
        out.write_text("manifest.toml", manifest)?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// CSV with the hash line, optional `#` comment lines, a header and rows.
    pub fn write_csv(
        &self,
        name: &str,
        comments: &[String],
        header: &str,
        rows: &[Vec<f64>],
    ) -> Result<PathBuf> {
        let mut s = format!("# manifest-hash: {}\n", self.hash);
        for c in comments {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str(header);
        s.push('\n');
        for row in rows {
            push_row(&mut s, row);
        }
        self.write_text(name, &s)
    }

    /// `x,v,W` rows of a snapshot.
    pub fn write_snapshot(
        &self,
        name: &str,
        snap: &WignerSnapshot,
        comments: &[String],
    ) -> Result<PathBuf> {
        let mut all = vec![format!("t = {}", fmt_g17(snap.time))];
        all.extend_from_slice(comments);
        let mut rows = Vec::with_capacity(snap.x_grid.len() * snap.v_grid.len());
        for (i, &x) in snap.x_grid.iter().enumerate() {
            for (j, &v) in snap.v_grid.iter().enumerate() {
                rows.push(vec![x, v, snap.at(i, j)]);
            }
        }
        self.write_csv(name, &all, "x,v,W", &rows)
    }

    pub fn write_moments(&self, name: &str, reports: &[MomentReport]) -> Result<PathBuf> {
        let rows: Vec<Vec<f64>> = reports
            .iter()
            .map(|m| {
                vec![
                    m.time,
                    m.mean_x,
                    m.mean_v,
                    m.delta_x(),
                    m.delta_v(),
                    m.uncertainty,
                    m.normalized_cov,
                ]
            })
            .collect();
        self.write_csv(name, &[], "t,mean_x,mean_v,dx,dv,dxdv,cov", &rows)
    }

    /// `t,x,rho` rows for densities sampled at the given times.
    pub fn write_density(
        &self,
        name: &str,
        xs: &[f64],
        series: &[(f64, Vec<f64>)],
    ) -> Result<PathBuf> {
        let mut rows = Vec::with_capacity(series.len() * xs.len());
        for (t, rho) in series {
            for (&x, &r) in xs.iter().zip(rho) {
                rows.push(vec![*t, x, r]);
            }
        }
        self.write_csv(name, &[], "t,x,rho", &rows)
    }
}

fn push_row(s: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&fmt_g17(*v));
    }
    s.push('\n');
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf() {
        let cases = [
            (0.0, "0"),
            (-0.0, "-0"),
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (-2.5e-300, "-2.5e-300"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (0.0001, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g17(x), want, "{x:e}");
        }
        assert_eq!(fmt_g(0.5, 3), "0.5");
        assert_eq!(fmt_g(f64::NEG_INFINITY, 17), "-inf");
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            manifest_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let out = OutputDir::create(tmp.path(), "a = 1\n").unwrap();
        let p = out
            .write_csv("t.csv", &["note".into()], "a,b", &[vec![1.0, 0.5]])
            .unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(
            text,
            format!(
                "# manifest-hash: {}\n# note\na,b\n1,0.5\n",
                manifest_hash("a = 1\n")
            )
        );
        assert_eq!(
            fs::read_to_string(out.path("manifest.toml")).unwrap(),
            "a = 1\n"
        );
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let s = fmt_g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
